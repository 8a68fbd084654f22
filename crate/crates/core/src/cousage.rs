//! Co-usage matrices.
//!
//! Two documents are coupled when one user refers to both; two users are
//! coupled when they refer to the same document. Pair counts are normalised
//! with the equivalence coefficient `E(i,j) = C(i,j)² / (o(i)·o(j))`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::UsageEvent;
use crate::time::Period;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Document,
    User,
}

impl ItemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ItemKind::Document => "document",
            ItemKind::User => "user",
        }
    }
}

impl fmt::Display for ItemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which records each user referred to, with set semantics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionSet {
    users: BTreeMap<String, BTreeSet<String>>,
}

impl TransactionSet {
    pub fn from_pairs<U, D>(pairs: impl IntoIterator<Item = (U, D)>) -> Self
    where
        U: Into<String>,
        D: Into<String>,
    {
        let mut users: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (u, d) in pairs {
            users.entry(u.into()).or_default().insert(d.into());
        }
        TransactionSet { users }
    }

    /// Number of users.
    pub fn m(&self) -> usize {
        self.users.len()
    }

    /// Number of distinct documents.
    pub fn n(&self) -> usize {
        self.documents().len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn users(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.users
    }

    pub fn documents(&self) -> BTreeSet<&str> {
        self.users.values().flatten().map(String::as_str).collect()
    }

    /// Document → users that referred to it.
    pub fn by_document(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut docs: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (u, set) in &self.users {
            for d in set {
                docs.entry(d.clone()).or_default().insert(u.clone());
            }
        }
        docs
    }

    /// Item sets of the information source units for clusters of `kind`:
    /// users' document sets for document clusters, documents' user sets for
    /// user clusters.
    pub fn source_units(&self, kind: ItemKind) -> BTreeMap<String, BTreeSet<String>> {
        match kind {
            ItemKind::Document => self.users.clone(),
            ItemKind::User => self.by_document(),
        }
    }
}

/// Groups events in `period` by actor, collapsing repeated references.
pub fn build_transactions<E: UsageEvent>(events: &[E], period: &Period) -> TransactionSet {
    TransactionSet::from_pairs(
        events
            .iter()
            .filter(|e| period.contains(&e.timestamp()))
            .map(|e| (e.actor(), e.record_id())),
    )
}

/// Sparse symmetric pair counts over a sorted item universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceMatrix {
    pub kind: ItemKind,
    /// Sorted item identifiers; indices below refer to this list.
    pub items: Vec<String>,
    /// `o(i)` for each item.
    pub occurrences: Vec<u64>,
    /// `C(i,j)` for `i < j`, nonzero entries only.
    pub pairs: BTreeMap<(usize, usize), u64>,
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

impl CooccurrenceMatrix {
    pub fn index_of(&self, item: &str) -> Option<usize> {
        self.items.binary_search_by(|x| x.as_str().cmp(item)).ok()
    }

    /// `C(i,j)`; zero on the diagonal and for uncoupled pairs.
    pub fn get(&self, i: usize, j: usize) -> u64 {
        if i == j {
            return 0;
        }
        self.pairs.get(&ordered(i, j)).copied().unwrap_or(0)
    }

    pub fn count(&self, a: &str, b: &str) -> u64 {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.get(i, j),
            _ => 0,
        }
    }

    pub fn occurrences_of(&self, item: &str) -> u64 {
        self.index_of(item).map_or(0, |i| self.occurrences[i])
    }

    /// `item_i,item_j,value`
    pub fn to_csv(&self) -> Result<String> {
        triples_csv(&self.items, self.pairs.iter().map(|(&(i, j), c)| (i, j, c.to_string())))
    }

    /// `item,occurrences`
    pub fn occurrences_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["item", "occurrences"])?;
        for (item, o) in self.items.iter().zip(&self.occurrences) {
            w.write_record([item.as_str(), &o.to_string()])?;
        }
        finish(w)
    }
}

fn triples_csv(items: &[String], rows: impl Iterator<Item = (usize, usize, String)>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["item_i", "item_j", "value"])?;
    for (i, j, v) in rows {
        w.write_record([items[i].as_str(), items[j].as_str(), &v])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Source(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn count_pairs(kind: ItemKind, sets: &BTreeMap<String, BTreeSet<String>>) -> CooccurrenceMatrix {
    let items: Vec<String> = sets
        .values()
        .flatten()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .cloned()
        .collect();
    let index: HashMap<&str, usize> = items.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut occurrences = vec![0u64; items.len()];
    let mut pairs: HashMap<(usize, usize), u64> = HashMap::new();
    for set in sets.values() {
        // Sets iterate in sorted order, so indices come out ascending.
        let members: Vec<usize> = set.iter().map(|s| index[s.as_str()]).collect();
        for (pos, &a) in members.iter().enumerate() {
            occurrences[a] += 1;
            for &b in &members[pos + 1..] {
                *pairs.entry((a, b)).or_default() += 1;
            }
        }
    }
    CooccurrenceMatrix {
        kind,
        items,
        occurrences,
        pairs: pairs.into_iter().collect(),
    }
}

/// Document kind: `C(i,j)` = users holding both documents, `o(i)` = users holding `i`.
/// User kind: `C(i,j)` = shared documents, `o(i)` = size of the user's set.
pub fn cooccurrence(transactions: &TransactionSet, kind: ItemKind) -> CooccurrenceMatrix {
    match kind {
        ItemKind::Document => count_pairs(kind, transactions.users()),
        ItemKind::User => count_pairs(kind, &transactions.by_document()),
    }
}

/// Sparse symmetric equivalence coefficients in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationMatrix {
    pub kind: ItemKind,
    pub items: Vec<String>,
    /// `E(i,j)` for `i < j`, nonzero entries only.
    pub values: BTreeMap<(usize, usize), f64>,
}

impl AssociationMatrix {
    /// Builds a matrix from named pairs. Items are sorted; duplicate or
    /// self pairs and values outside `(0, 1]` are rejected.
    pub fn from_pairs<S: AsRef<str>>(
        kind: ItemKind,
        items: impl IntoIterator<Item = S>,
        pairs: impl IntoIterator<Item = (S, S, f64)>,
    ) -> Result<Self> {
        let items: Vec<String> = items
            .into_iter()
            .map(|s| s.as_ref().to_owned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut m = AssociationMatrix {
            kind,
            items,
            values: BTreeMap::new(),
        };
        for (a, b, v) in pairs {
            let (a, b) = (a.as_ref(), b.as_ref());
            let (Some(i), Some(j)) = (m.index_of(a), m.index_of(b)) else {
                return Err(Error::invalid(format!("pair ({a}, {b}) names an unknown item")));
            };
            if i == j || !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("invalid association ({a}, {b}, {v})")));
            }
            if m.values.insert(ordered(i, j), v).is_some() {
                return Err(Error::invalid(format!("duplicate pair ({a}, {b})")));
            }
        }
        Ok(m)
    }

    pub fn index_of(&self, item: &str) -> Option<usize> {
        self.items.binary_search_by(|x| x.as_str().cmp(item)).ok()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        self.values.get(&ordered(i, j)).copied().unwrap_or(0.0)
    }

    pub fn value(&self, a: &str, b: &str) -> f64 {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.get(i, j),
            _ => 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `(i, j, E)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    /// `item_i,item_j,value`
    pub fn to_csv(&self) -> Result<String> {
        triples_csv(&self.items, self.pairs().map(|(i, j, v)| (i, j, v.to_string())))
    }
}

/// Normalises co-occurrence counts with the equivalence coefficient.
pub fn equivalence(cooc: &CooccurrenceMatrix) -> Result<AssociationMatrix> {
    if let Some(i) = cooc.occurrences.iter().position(|&o| o == 0) {
        return Err(Error::Corrupted(format!(
            "item {:?} has zero occurrences",
            cooc.items[i]
        )));
    }
    let values = cooc
        .pairs
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(&(i, j), &c)| {
            let c = c as f64;
            let e = (c * c) / (cooc.occurrences[i] as f64 * cooc.occurrences[j] as f64);
            ((i, j), e)
        })
        .collect();
    Ok(AssociationMatrix {
        kind: cooc.kind,
        items: cooc.items.clone(),
        values,
    })
}
