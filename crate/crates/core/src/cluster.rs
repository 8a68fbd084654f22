//! Constrained single-link clustering of an association matrix.
//!
//! Pairs are scanned once in decreasing order of association value (ties
//! broken by the item-id pair, ascending). A pair becomes an internal
//! association when it can start a cluster, extend one with a free item, or
//! merge two clusters without exceeding the maximum cluster size or the
//! maximum number of internal associations. A pair that would break a limit
//! is left out of the clusters; after the scan every scanned pair with
//! exactly one endpoint inside a surviving cluster is an external
//! association of that cluster. Clusters smaller than the minimum size are
//! dissolved.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cousage::{AssociationMatrix, ItemKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub min_cluster_size: usize,
    pub max_cluster_size: usize,
    pub max_internal_associations: usize,
    /// Pairs with a value below the floor are not scanned.
    pub association_floor: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            min_cluster_size: 3,
            max_cluster_size: 10,
            max_internal_associations: 20,
            association_floor: 0.0,
        }
    }
}

impl ClusterParams {
    /// No size or association limits: plain single-link components.
    pub fn unconstrained() -> Self {
        ClusterParams {
            min_cluster_size: 2,
            max_cluster_size: usize::MAX,
            max_internal_associations: usize::MAX,
            association_floor: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 2 {
            return Err(Error::invalid("min_cluster_size must be at least 2"));
        }
        if self.min_cluster_size > self.max_cluster_size {
            return Err(Error::invalid(format!(
                "min_cluster_size {} exceeds max_cluster_size {}",
                self.min_cluster_size, self.max_cluster_size
            )));
        }
        if self.max_internal_associations < 1 {
            return Err(Error::invalid("max_internal_associations must be at least 1"));
        }
        if !(self.association_floor.is_finite() && self.association_floor >= 0.0) {
            return Err(Error::invalid("association_floor must be a finite value >= 0"));
        }
        Ok(())
    }
}

/// An association between two items, `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    pub a: String,
    pub b: String,
    pub value: f64,
}

impl Association {
    pub fn involves(&self, item: &str) -> bool {
        self.a == item || self.b == item
    }

    pub fn other(&self, item: &str) -> Option<&str> {
        if self.a == item {
            Some(&self.b)
        } else if self.b == item {
            Some(&self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean internal association value.
    pub density: f64,
    /// Mean external association value, 0 without external associations.
    pub centrality: f64,
    /// `centrality / density`.
    pub structural: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    /// Highest-weight internal item.
    pub label: String,
    pub internal_items: Vec<String>,
    pub external_items: Vec<String>,
    pub internal_associations: Vec<Association>,
    pub external_associations: Vec<Association>,
    pub density: f64,
    pub centrality: f64,
    pub structural: f64,
    /// Weight of every internal and external item.
    pub item_weights: BTreeMap<String, f64>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.internal_items.len()
    }

    /// Internal plus external items.
    pub fn m_cl(&self) -> usize {
        self.internal_items.len() + self.external_items.len()
    }

    pub fn n_internal(&self) -> usize {
        self.internal_associations.len()
    }

    pub fn n_external(&self) -> usize {
        self.external_associations.len()
    }

    pub fn is_internal(&self, item: &str) -> bool {
        self.internal_items.binary_search_by(|x| x.as_str().cmp(item)).is_ok()
    }

    /// Occurrences of `item` across this cluster's associations.
    pub fn k(&self, item: &str) -> usize {
        self.internal_associations
            .iter()
            .chain(&self.external_associations)
            .filter(|a| a.involves(item))
            .count()
    }

    pub fn metrics(&self) -> Metrics {
        metrics(self)
    }
}

pub fn metrics(cluster: &Cluster) -> Metrics {
    let mean = |v: &[Association]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().map(|a| a.value).sum::<f64>() / v.len() as f64
        }
    };
    let density = mean(&cluster.internal_associations);
    let centrality = mean(&cluster.external_associations);
    let structural = if density > 0.0 { centrality / density } else { 0.0 };
    Metrics {
        density,
        centrality,
        structural,
    }
}

/// `k(a) / (n_in + n_ex)` for an item of the cluster's associations.
pub fn item_weight(cluster: &Cluster, item: &str) -> Result<f64> {
    let k = cluster.k(item);
    if k == 0 {
        return Err(Error::NotInCluster(item.to_owned()));
    }
    Ok(k as f64 / (cluster.n_internal() + cluster.n_external()) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceUnitRelevance {
    pub cluster_id: usize,
    pub source_unit: String,
    /// Internal items of the cluster present in the unit.
    pub l: usize,
    /// Items present in the unit.
    pub big_l: usize,
    pub relevance: f64,
}

/// Relevance of each source unit sharing at least one internal item with the
/// cluster, sorted by relevance descending then unit id.
pub fn relevance(cluster: &Cluster, units: &BTreeMap<String, BTreeSet<String>>) -> Vec<SourceUnitRelevance> {
    let mut out: Vec<SourceUnitRelevance> = units
        .iter()
        .filter(|(_, items)| !items.is_empty())
        .filter_map(|(unit, items)| {
            let shared: Vec<&String> = items.iter().filter(|a| cluster.is_internal(a)).collect();
            if shared.is_empty() {
                return None;
            }
            let sum: f64 = shared
                .iter()
                .map(|a| cluster.item_weights.get(a.as_str()).copied().unwrap_or(0.0))
                .sum();
            Some(SourceUnitRelevance {
                cluster_id: cluster.id,
                source_unit: unit.clone(),
                l: shared.len(),
                big_l: items.len(),
                relevance: sum / items.len() as f64,
            })
        })
        .collect();
    out.sort_by(|x, y| {
        y.relevance
            .total_cmp(&x.relevance)
            .then_with(|| x.source_unit.cmp(&y.source_unit))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub kind: ItemKind,
    pub params: ClusterParams,
    pub clusters: Vec<Cluster>,
    /// Items that are not internal to any cluster.
    pub unclustered: Vec<String>,
}

impl Clustering {
    pub fn cluster_of(&self, item: &str) -> Option<&Cluster> {
        self.clusters.iter().find(|c| c.is_internal(item))
    }

    pub fn relevance(&self, units: &BTreeMap<String, BTreeSet<String>>) -> Vec<SourceUnitRelevance> {
        self.clusters.iter().flat_map(|c| relevance(c, units)).collect()
    }
}

/// Association values equal to within 1e-9 are ties.
fn tie_key(value: f64) -> i64 {
    (value * 1e9).round() as i64
}

struct Building {
    created: usize,
    items: Vec<usize>,
    internal: Vec<(usize, usize, f64)>,
}

pub fn cluster(assoc: &AssociationMatrix, params: &ClusterParams) -> Result<Clustering> {
    params.validate()?;
    let n = assoc.len();
    let mut pairs: Vec<(usize, usize, f64)> = assoc
        .pairs()
        .filter(|&(_, _, v)| v > 0.0 && v >= params.association_floor)
        .collect();
    pairs.sort_by(|x, y| {
        tie_key(y.2)
            .cmp(&tie_key(x.2))
            .then_with(|| (x.0, x.1).cmp(&(y.0, y.1)))
    });

    let mut slots: Vec<Option<Building>> = Vec::new();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for &(i, j, v) in &pairs {
        match (owner[i], owner[j]) {
            (None, None) => {
                let slot = slots.len();
                slots.push(Some(Building {
                    created: slot,
                    items: vec![i, j],
                    internal: vec![(i, j, v)],
                }));
                owner[i] = Some(slot);
                owner[j] = Some(slot);
            }
            (Some(c), None) | (None, Some(c)) => {
                let free = if owner[i].is_none() { i } else { j };
                let b = slots[c].as_mut().expect("live cluster");
                if b.items.len() < params.max_cluster_size && b.internal.len() < params.max_internal_associations {
                    b.items.push(free);
                    b.internal.push((i, j, v));
                    owner[free] = Some(c);
                }
            }
            (Some(ci), Some(cj)) if ci == cj => {
                let b = slots[ci].as_mut().expect("live cluster");
                if b.internal.len() < params.max_internal_associations {
                    b.internal.push((i, j, v));
                }
            }
            (Some(ci), Some(cj)) => {
                let (a, b) = (slots[ci].as_ref().unwrap(), slots[cj].as_ref().unwrap());
                let fits_size = a.items.len() + b.items.len() <= params.max_cluster_size;
                let fits_assoc = a.internal.len() + b.internal.len() < params.max_internal_associations;
                if fits_size && fits_assoc {
                    let (keep, gone) = if a.created <= b.created { (ci, cj) } else { (cj, ci) };
                    let absorbed = slots[gone].take().unwrap();
                    let target = slots[keep].as_mut().unwrap();
                    for &item in &absorbed.items {
                        owner[item] = Some(keep);
                    }
                    target.items.extend(absorbed.items);
                    target.internal.extend(absorbed.internal);
                    target.internal.push((i, j, v));
                }
            }
        }
    }

    let mut survivors: Vec<Building> = slots
        .into_iter()
        .flatten()
        .filter(|b| b.items.len() >= params.min_cluster_size)
        .collect();
    survivors.sort_by_key(|b| b.created);

    let mut final_owner: Vec<Option<usize>> = vec![None; n];
    for (idx, b) in survivors.iter().enumerate() {
        for &item in &b.items {
            final_owner[item] = Some(idx);
        }
    }
    let mut externals: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); survivors.len()];
    for &(i, j, v) in &pairs {
        if final_owner[i] != final_owner[j] {
            for c in [final_owner[i], final_owner[j]].into_iter().flatten() {
                externals[c].push((i, j, v));
            }
        }
    }

    let name = |i: usize| assoc.items[i].clone();
    let to_assoc = |&(i, j, v): &(usize, usize, f64)| Association { a: name(i), b: name(j), value: v };
    let clusters = survivors
        .iter()
        .zip(&externals)
        .enumerate()
        .map(|(idx, (b, ext))| {
            let mut internal_items: Vec<String> = b.items.iter().map(|&i| name(i)).collect();
            internal_items.sort();
            let external_items: Vec<String> = ext
                .iter()
                .map(|&(i, j, _)| if final_owner[i] == Some(idx) { j } else { i })
                .map(name)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let mut internal_associations: Vec<Association> = b.internal.iter().map(to_assoc).collect();
            internal_associations.sort_by(|x, y| {
                tie_key(y.value)
                    .cmp(&tie_key(x.value))
                    .then_with(|| (&x.a, &x.b).cmp(&(&y.a, &y.b)))
            });
            let mut c = Cluster {
                id: idx + 1,
                label: String::new(),
                internal_items,
                external_items,
                internal_associations,
                external_associations: ext.iter().map(to_assoc).collect(),
                density: 0.0,
                centrality: 0.0,
                structural: 0.0,
                item_weights: BTreeMap::new(),
            };
            let m = metrics(&c);
            (c.density, c.centrality, c.structural) = (m.density, m.centrality, m.structural);
            c.item_weights = c
                .internal_items
                .iter()
                .chain(&c.external_items)
                .map(|item| (item.clone(), item_weight(&c, item).expect("item belongs to an association")))
                .collect();
            c.label = c
                .internal_items
                .iter()
                .max_by(|x, y| c.item_weights[*x].total_cmp(&c.item_weights[*y]).then_with(|| y.cmp(x)))
                .cloned()
                .unwrap_or_default();
            c
        })
        .collect();

    let unclustered = (0..n).filter(|&i| final_owner[i].is_none()).map(name).collect();
    Ok(Clustering {
        kind: assoc.kind,
        params: *params,
        clusters,
        unclustered,
    })
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

/// `cluster,source_unit,l,L,relevance`
pub fn relevance_to_csv(rows: &[SourceUnitRelevance]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cluster", "source_unit", "l", "L", "relevance"])?;
    for r in rows {
        w.write_record([
            r.cluster_id.to_string(),
            r.source_unit.clone(),
            r.l.to_string(),
            r.big_l.to_string(),
            format!("{:.6}", r.relevance),
        ])?;
    }
    csv_string(w)
}

/// One summary row per cluster.
pub fn clusters_to_csv(clusters: &[Cluster]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "cluster", "label", "size", "n_internal", "n_external", "m_cl", "density", "centrality", "structural",
    ])?;
    for c in clusters {
        w.write_record([
            c.id.to_string(),
            c.label.clone(),
            c.size().to_string(),
            c.n_internal().to_string(),
            c.n_external().to_string(),
            c.m_cl().to_string(),
            format!("{:.6}", c.density),
            format!("{:.6}", c.centrality),
            format!("{:.6}", c.structural),
        ])?;
    }
    csv_string(w)
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz rendering of one cluster: internal items as nodes, internal
/// associations as edges labelled with their value.
pub fn cluster_to_dot(cluster: &Cluster) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "graph {} {{", dot_id(&format!("cluster_{}", cluster.id)));
    let _ = writeln!(out, "  label={};", dot_id(&cluster.label));
    for item in &cluster.internal_items {
        let w = cluster.item_weights.get(item).copied().unwrap_or(0.0);
        let _ = writeln!(out, "  {} [weight=\"{w:.4}\"];", dot_id(item));
    }
    for a in &cluster.internal_associations {
        let _ = writeln!(out, "  {} -- {} [label=\"{:.3}\"];", dot_id(&a.a), dot_id(&a.b), a.value);
    }
    out.push_str("}\n");
    out
}
