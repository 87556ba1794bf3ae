//! The fundamental cell and the quasi-1d lattice it generates.
//!
//! A cell is an oriented graph `(V, E)` with a source `v̲` and a sink `v̄`.
//! Gluing copies end to end (sink of cell `n` = source of cell `n + 1`) gives
//! the lattice; its vertices are `(v, n)` with `v ∈ V \ {v̄}`, and the vertex
//! `(v̲, n)` is the gate of cell `n`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-disk description of a cell: `{vertices, source, sink, edges: [{from, to, rate}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    pub source: String,
    pub sink: String,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

impl GraphSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph spec serializes")
    }

    /// Convenience builder used throughout tests and examples.
    pub fn new(vertices: &[&str], source: &str, sink: &str, edges: &[(&str, &str, f64)]) -> Self {
        GraphSpec {
            vertices: vertices.iter().map(|s| s.to_string()).collect(),
            source: source.to_string(),
            sink: sink.to_string(),
            edges: edges
                .iter()
                .map(|&(f, t, r)| EdgeSpec { from: f.to_string(), to: t.to_string(), rate: Some(r) })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    DuplicateVertex { name: String },
    UnknownSource { name: String },
    UnknownSink { name: String },
    SourceEqualsSink,
    UnknownVertex { edge: usize, name: String },
    SelfLoop { edge: usize, name: String },
    DuplicateEdge { edge: usize, from: String, to: String },
    MissingRate { edge: usize },
    NonPositiveRate { edge: usize },
    NotStronglyConnected { unreachable: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub structurally_sound: bool,
    pub strongly_connected: bool,
    pub rates_positive: bool,
    pub support_symmetric: bool,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        if self.valid {
            "ok".to_string()
        } else {
            let kinds: Vec<String> = self
                .issues
                .iter()
                .map(|i| serde_json::to_value(i).unwrap()["kind"].as_str().unwrap().to_string())
                .collect();
            kinds.join(", ")
        }
    }
}

/// Structure of a validated cell. Vertices are addressed by index.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    source: usize,
    sink: usize,
    edges: Vec<(usize, usize)>,
    out: Vec<Vec<usize>>,
}

impl FundamentalGraph {
    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }
    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }
    pub fn names(&self) -> &[String] {
        &self.names
    }
    pub fn vertex(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
    pub fn source(&self) -> usize {
        self.source
    }
    pub fn sink(&self) -> usize {
        self.sink
    }
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
    /// Indices into [`edges`](Self::edges) of the edges leaving `v`.
    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out[v]
    }
    pub fn edge_index(&self, from: usize, to: usize) -> Option<usize> {
        self.out[from].iter().copied().find(|&e| self.edges[e].1 == to)
    }
    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edge_index(from, to).is_some()
    }
    /// Every edge has its reverse in the edge set.
    pub fn support_symmetric(&self) -> bool {
        self.edges.iter().all(|&(a, b)| self.has_edge(b, a))
    }
}

/// Positive jump rates aligned with [`FundamentalGraph::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct RateMap {
    rates: Vec<f64>,
}

impl RateMap {
    pub fn get(&self, edge: usize) -> f64 {
        self.rates[edge]
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.rates
    }
}

/// A validated cell together with its rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RatedCell {
    graph: FundamentalGraph,
    rates: RateMap,
}

/// A vertex `(name, cell)` of the infinite lattice; `name` is never the sink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeVertex {
    pub name: usize,
    pub cell: i64,
}

impl LatticeVertex {
    pub fn new(name: usize, cell: i64) -> Self {
        LatticeVertex { name, cell }
    }

    /// The shift `𝒯`.
    pub fn shifted(self, by: i64) -> Self {
        LatticeVertex { name: self.name, cell: self.cell + by }
    }
}

impl fmt::Display for LatticeVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.name, self.cell)
    }
}

/// Checks a raw spec. Structural problems are collected, never raised.
pub fn validate(spec: &GraphSpec) -> ValidationReport {
    let mut issues = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, v) in spec.vertices.iter().enumerate() {
        if index.insert(v.as_str(), i).is_some() {
            issues.push(ValidationIssue::DuplicateVertex { name: v.clone() });
        }
    }
    let source = index.get(spec.source.as_str()).copied();
    let sink = index.get(spec.sink.as_str()).copied();
    if source.is_none() {
        issues.push(ValidationIssue::UnknownSource { name: spec.source.clone() });
    }
    if sink.is_none() {
        issues.push(ValidationIssue::UnknownSink { name: spec.sink.clone() });
    }
    if spec.source == spec.sink {
        issues.push(ValidationIssue::SourceEqualsSink);
    }

    let mut rates_positive = true;
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    for (k, e) in spec.edges.iter().enumerate() {
        let from = index.get(e.from.as_str()).copied();
        let to = index.get(e.to.as_str()).copied();
        for (name, idx) in [(&e.from, from), (&e.to, to)] {
            if idx.is_none() {
                issues.push(ValidationIssue::UnknownVertex { edge: k, name: name.clone() });
            }
        }
        if e.from == e.to {
            issues.push(ValidationIssue::SelfLoop { edge: k, name: e.from.clone() });
        }
        if !seen.insert((e.from.as_str(), e.to.as_str())) {
            issues.push(ValidationIssue::DuplicateEdge { edge: k, from: e.from.clone(), to: e.to.clone() });
        }
        match e.rate {
            None => {
                rates_positive = false;
                issues.push(ValidationIssue::MissingRate { edge: k });
            }
            Some(r) if !(r.is_finite() && r > 0.0) => {
                rates_positive = false;
                issues.push(ValidationIssue::NonPositiveRate { edge: k });
            }
            Some(_) => {}
        }
        if let (Some(a), Some(b)) = (from, to) {
            if a != b {
                edges.push((a, b));
            }
        }
    }
    let structurally_sound = issues.is_empty() || issues.iter().all(|i| {
        matches!(i, ValidationIssue::MissingRate { .. } | ValidationIssue::NonPositiveRate { .. })
    });

    let n = spec.vertices.len();
    let strongly_connected = match source {
        Some(s) if n > 0 => {
            let fwd = reachable(n, &edges, s, false);
            let bwd = reachable(n, &edges, s, true);
            let unreachable: Vec<String> = (0..n)
                .filter(|&v| !(fwd[v] && bwd[v]))
                .map(|v| spec.vertices[v].clone())
                .collect();
            if unreachable.is_empty() {
                true
            } else {
                issues.push(ValidationIssue::NotStronglyConnected { unreachable });
                false
            }
        }
        _ => false,
    };
    let edge_set: HashSet<(usize, usize)> = edges.iter().copied().collect();
    let support_symmetric = edges.iter().all(|&(a, b)| edge_set.contains(&(b, a)));

    ValidationReport {
        valid: structurally_sound && strongly_connected && rates_positive,
        structurally_sound,
        strongly_connected,
        rates_positive,
        support_symmetric,
        issues,
    }
}

fn reachable(n: usize, edges: &[(usize, usize)], start: usize, reverse: bool) -> Vec<bool> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if reverse {
            adj[b].push(a);
        } else {
            adj[a].push(b);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

impl RatedCell {
    pub fn from_spec(spec: &GraphSpec) -> Result<Self> {
        let report = validate(spec);
        if !report.valid {
            return Err(Error::InvalidGraph(Box::new(report)));
        }
        let names = spec.vertices.clone();
        let index: HashMap<String, usize> = names.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let mut edges = Vec::with_capacity(spec.edges.len());
        let mut rates = Vec::with_capacity(spec.edges.len());
        let mut out = vec![Vec::new(); names.len()];
        for e in &spec.edges {
            let (a, b) = (index[&e.from], index[&e.to]);
            out[a].push(edges.len());
            edges.push((a, b));
            rates.push(e.rate.expect("validated"));
        }
        let graph = FundamentalGraph {
            source: index[&spec.source],
            sink: index[&spec.sink],
            names,
            index,
            edges,
            out,
        };
        Ok(RatedCell { graph, rates: RateMap { rates } })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_spec(&GraphSpec::load(path)?)
    }

    pub fn to_spec(&self) -> GraphSpec {
        let g = &self.graph;
        GraphSpec {
            vertices: g.names.clone(),
            source: g.names[g.source].clone(),
            sink: g.names[g.sink].clone(),
            edges: g
                .edges
                .iter()
                .zip(&self.rates.rates)
                .map(|(&(a, b), &r)| EdgeSpec { from: g.names[a].clone(), to: g.names[b].clone(), rate: Some(r) })
                .collect(),
        }
    }

    /// Same structure, new rates (aligned with `graph().edges()`).
    pub fn with_rates(&self, rates: Vec<f64>) -> Result<Self> {
        let mut spec = self.to_spec();
        if rates.len() != spec.edges.len() {
            return Err(Error::DomainError(format!(
                "expected {} rates, got {}",
                spec.edges.len(),
                rates.len()
            )));
        }
        for (e, r) in spec.edges.iter_mut().zip(rates) {
            e.rate = Some(r);
        }
        Self::from_spec(&spec)
    }

    pub fn graph(&self) -> &FundamentalGraph {
        &self.graph
    }
    pub fn rates(&self) -> &RateMap {
        &self.rates
    }

    /// Rate of the cell edge `from → to`, zero when absent.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.graph.edge_index(from, to).map_or(0.0, |e| self.rates.get(e))
    }

    /// Sum of the rates of the cell edges leaving `v`.
    pub fn cell_out_rate(&self, v: usize) -> f64 {
        self.graph.out_edges(v).iter().map(|&e| self.rates.get(e)).sum()
    }

    /// Total exit rate of the lattice image of `v`; for source and sink this
    /// is the gate rate `out(v̲) + out(v̄)`.
    pub fn exit_rate(&self, v: usize) -> f64 {
        let g = &self.graph;
        if v == g.source || v == g.sink {
            self.cell_out_rate(g.source) + self.cell_out_rate(g.sink)
        } else {
            self.cell_out_rate(v)
        }
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.graph.vertex_count()).map(|v| self.exit_rate(v)).fold(0.0, f64::max)
    }

    pub fn gate(&self, cell: i64) -> LatticeVertex {
        LatticeVertex::new(self.graph.source, cell)
    }

    pub fn is_gate(&self, x: LatticeVertex) -> bool {
        x.name == self.graph.source
    }

    /// Lattice vertex reached by the cell edge `from → to` taken from cell `n`.
    fn lift(&self, to: usize, cell: i64) -> LatticeVertex {
        if to == self.graph.sink {
            LatticeVertex::new(self.graph.source, cell + 1)
        } else {
            LatticeVertex::new(to, cell)
        }
    }

    /// Outgoing lattice edges with their rates.
    ///
    /// A gate `(v̲, n)` carries the out-edges of `v̲` in cell `n` and the
    /// out-edges of `v̄` in cell `n - 1`.
    pub fn lattice_out_edges(&self, x: LatticeVertex) -> Vec<(LatticeVertex, f64)> {
        let g = &self.graph;
        assert!(x.name != g.sink && x.name < g.vertex_count(), "not a lattice vertex name");
        let mut out: Vec<(LatticeVertex, f64)> = g
            .out_edges(x.name)
            .iter()
            .map(|&e| (self.lift(g.edges[e].1, x.cell), self.rates.get(e)))
            .collect();
        if x.name == g.source {
            out.extend(
                g.out_edges(g.sink)
                    .iter()
                    .map(|&e| (self.lift(g.edges[e].1, x.cell - 1), self.rates.get(e))),
            );
        }
        out
    }
}
