//! Strategic map: clusters placed by centrality (x) and density (y), split
//! into four types at the median of each axis.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cluster::Cluster;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub cluster: usize,
    pub label: String,
    /// Centrality.
    pub x: f64,
    /// Density.
    pub y: f64,
    pub size: usize,
    /// 1: high density, high centrality; 2: low density, high centrality;
    /// 3: high density, low centrality; 4: low on both.
    #[serde(rename = "type")]
    pub kind: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategicMap {
    pub points: Vec<MapPoint>,
    pub x_split: f64,
    pub y_split: f64,
    /// One edge per linked cluster pair, `a < b`.
    pub edges: Vec<MapEdge>,
}

/// Split overrides. Unset splits default to the median.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MapOptions {
    pub x_split: Option<f64>,
    pub y_split: Option<f64>,
}

/// A value at or above its split counts as high.
pub fn quadrant_type(x: f64, y: f64, x_split: f64, y_split: f64) -> u8 {
    match (y >= y_split, x >= x_split) {
        (true, true) => 1,
        (false, true) => 2,
        (true, false) => 3,
        (false, false) => 4,
    }
}

/// Median; an even count takes the mean of the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
}

pub fn build_map(clusters: &[Cluster], options: &MapOptions) -> StrategicMap {
    let xs: Vec<f64> = clusters.iter().map(|c| c.centrality).collect();
    let ys: Vec<f64> = clusters.iter().map(|c| c.density).collect();
    let x_split = options.x_split.or_else(|| median(&xs)).unwrap_or(0.0);
    let y_split = options.y_split.or_else(|| median(&ys)).unwrap_or(0.0);

    let mut points: Vec<MapPoint> = clusters
        .iter()
        .map(|c| MapPoint {
            cluster: c.id,
            label: c.label.clone(),
            x: c.centrality,
            y: c.density,
            size: c.size(),
            kind: quadrant_type(c.centrality, c.density, x_split, y_split),
        })
        .collect();
    points.sort_by_key(|p| p.cluster);

    let owner: HashMap<&str, usize> = clusters
        .iter()
        .flat_map(|c| c.internal_items.iter().map(move |i| (i.as_str(), c.id)))
        .collect();
    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for c in clusters {
        for a in &c.external_associations {
            let outside = if c.is_internal(&a.a) { &a.b } else { &a.a };
            // Each joining pair is listed by both clusters; count it from the lower id.
            if let Some(&other) = owner.get(outside.as_str()) {
                if other > c.id {
                    *weights.entry((c.id, other)).or_default() += a.value;
                }
            }
        }
    }
    let edges = weights.into_iter().map(|((a, b), weight)| MapEdge { a, b, weight }).collect();

    StrategicMap {
        points,
        x_split,
        y_split,
        edges,
    }
}

impl StrategicMap {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["cluster", "x", "y", "size", "type"])?;
        for p in &self.points {
            w.write_record([
                p.cluster.to_string(),
                format!("{:.6}", p.x),
                format!("{:.6}", p.y),
                p.size.to_string(),
                p.kind.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }

    /// Graphviz text: one node per cluster pinned at its map position, one
    /// edge per linked cluster pair.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph strategic_map {\n  layout=neato;\n  node [shape=circle];\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "  c{} [label=\"{}\", pos=\"{:.4},{:.4}!\", size={}, type={}];",
                p.cluster,
                dot_escape(&p.label),
                p.x,
                p.y,
                p.size,
                p.kind
            );
        }
        for e in &self.edges {
            let _ = writeln!(out, "  c{} -- c{} [weight=\"{:.6}\"];", e.a, e.b, e.weight);
        }
        out.push_str("}\n");
        out
    }

    pub fn to_svg(&self, options: &SvgOptions) -> String {
        let (w, h, m) = (options.width as f64, options.height as f64, options.margin as f64);
        let extent = |vals: &mut dyn Iterator<Item = f64>, split: f64| {
            let max = vals.fold(split, f64::max);
            if max > 0.0 { max * 1.1 } else { 1.0 }
        };
        let x_max = extent(&mut self.points.iter().map(|p| p.x), self.x_split);
        let y_max = extent(&mut self.points.iter().map(|p| p.y), self.y_split);
        let sx = |x: f64| m + x / x_max * (w - 2.0 * m);
        let sy = |y: f64| h - m - y / y_max * (h - 2.0 * m);

        let mut out = String::new();
        let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            options.width, options.height, options.width, options.height
        );
        let _ = writeln!(out, r#"  <rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"  <line class="axis" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
            m,
            h - m,
            w - m,
            h - m
        );
        let _ = writeln!(
            out,
            r#"  <line class="axis" x1="{m:.2}" y1="{:.2}" x2="{m:.2}" y2="{m:.2}" stroke="black"/>"#,
            h - m
        );
        let _ = writeln!(
            out,
            r#"  <text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">centrality</text>"#,
            w / 2.0,
            h - m / 3.0
        );
        let _ = writeln!(
            out,
            r#"  <text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14" transform="rotate(-90 {:.2} {:.2})">density</text>"#,
            m / 3.0,
            h / 2.0,
            m / 3.0,
            h / 2.0
        );
        if !self.points.is_empty() {
            let (x, y) = (sx(self.x_split), sy(self.y_split));
            let _ = writeln!(
                out,
                r#"  <line class="split" x1="{x:.2}" y1="{m:.2}" x2="{x:.2}" y2="{:.2}" stroke="grey" stroke-dasharray="4 4"/>"#,
                h - m
            );
            let _ = writeln!(
                out,
                r#"  <line class="split" x1="{m:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="grey" stroke-dasharray="4 4"/>"#,
                w - m
            );
        }
        let at: HashMap<usize, &MapPoint> = self.points.iter().map(|p| (p.cluster, p)).collect();
        for e in &self.edges {
            if let (Some(a), Some(b)) = (at.get(&e.a), at.get(&e.b)) {
                let _ = writeln!(
                    out,
                    r#"  <line class="link" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="steelblue" stroke-width="{:.2}"/>"#,
                    sx(a.x),
                    sy(a.y),
                    sx(b.x),
                    sy(b.y),
                    1.0 + 4.0 * e.weight.min(1.0)
                );
            }
        }
        for p in &self.points {
            let (x, y) = (sx(p.x), sy(p.y));
            let r = options.radius_per_item * p.size as f64;
            let _ = writeln!(
                out,
                r#"  <circle class="cluster type{}" cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="orange" fill-opacity="0.6" stroke="black"/>"#,
                p.kind
            );
            let _ = writeln!(
                out,
                r#"  <text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#,
                y - r - 3.0,
                xml_escape(&p.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgOptions {
    pub width: u32,
    pub height: u32,
    pub margin: u32,
    pub radius_per_item: f64,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            width: 640,
            height: 640,
            margin: 60,
            radius_per_item: 2.0,
        }
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}
