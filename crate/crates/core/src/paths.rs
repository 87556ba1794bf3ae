//! Simple source-to-sink paths of the cell, minimality and the constant Δ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FundamentalGraph, RatedCell};

/// A simple oriented path `v̲ = z_0, …, z_n = v̄` of the cell, as vertex indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GatePath(pub Vec<usize>);

impl GatePath {
    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// All simple oriented paths from source to sink (DFS with a visited set).
pub fn enumerate_gate_paths(graph: &FundamentalGraph) -> Vec<GatePath> {
    let n = graph.vertex_count();
    let mut succ = vec![Vec::new(); n];
    for &(a, b) in graph.edges() {
        succ[a].push(b);
    }
    let mut paths = Vec::new();
    let mut on_path = vec![false; n];
    let mut stack = vec![graph.source()];
    on_path[graph.source()] = true;
    dfs(&succ, graph.sink(), &mut on_path, &mut stack, &mut paths);
    paths.sort();
    paths
}

fn dfs(succ: &[Vec<usize>], sink: usize, on_path: &mut [bool], stack: &mut Vec<usize>, out: &mut Vec<GatePath>) {
    let v = *stack.last().unwrap();
    if v == sink {
        out.push(GatePath(stack.clone()));
        return;
    }
    for &w in &succ[v] {
        if !on_path[w] {
            on_path[w] = true;
            stack.push(w);
            dfs(succ, sink, on_path, stack, out);
            stack.pop();
            on_path[w] = false;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonMinimalReason {
    AsymmetricSupport,
    MultiplePaths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub minimal: bool,
    pub path_count: usize,
    pub support_symmetric: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<NonMinimalReason>,
    /// The unique path, by vertex name, when minimal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<String>>,
}

pub fn minimality(graph: &FundamentalGraph) -> MinimalityReport {
    let paths = enumerate_gate_paths(graph);
    let support_symmetric = graph.support_symmetric();
    let reason = if !support_symmetric {
        Some(NonMinimalReason::AsymmetricSupport)
    } else if paths.len() != 1 {
        Some(NonMinimalReason::MultiplePaths)
    } else {
        None
    };
    let minimal = reason.is_none();
    MinimalityReport {
        minimal,
        path_count: paths.len(),
        support_symmetric,
        reason,
        path: minimal.then(|| paths[0].0.iter().map(|&v| graph.name(v).to_string()).collect()),
    }
}

pub fn is_minimal(graph: &FundamentalGraph) -> bool {
    minimality(graph).minimal
}

/// `Δ = log Π r(z_i, z_{i+1}) / Π r(z_{i+1}, z_i)` along the unique gate path.
pub fn gc_delta(cell: &RatedCell) -> Result<f64> {
    let graph = cell.graph();
    if !is_minimal(graph) {
        return Err(Error::NotMinimal);
    }
    let path = enumerate_gate_paths(graph).remove(0);
    Ok(path
        .0
        .windows(2)
        .map(|w| cell.rate(w[0], w[1]).ln() - cell.rate(w[1], w[0]).ln())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::graph::{GraphSpec, RatedCell};
    use proptest::prelude::*;

    fn chain_with_tooth_unrated() -> RatedCell {
        tooth()
    }

    #[test]
    fn two_vertex_has_single_direct_path() {
        let c = two_vertex(4.0, 1.0);
        assert_eq!(enumerate_gate_paths(c.graph()), vec![GatePath(vec![0, 1])]);
        assert!(is_minimal(c.graph()));
        assert!((gc_delta(&c).unwrap() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn diamond_has_two_paths() {
        let c = diamond();
        assert_eq!(enumerate_gate_paths(c.graph()).len(), 2);
        let rep = minimality(c.graph());
        assert!(!rep.minimal);
        assert_eq!(rep.reason, Some(NonMinimalReason::MultiplePaths));
        assert!(matches!(gc_delta(&c), Err(Error::NotMinimal)));
    }

    #[test]
    fn tooth_is_minimal_with_product_delta() {
        let c = chain_with_tooth_unrated();
        let paths = enumerate_gate_paths(c.graph());
        let names: Vec<&str> = paths[0].0.iter().map(|&v| c.graph().name(v)).collect();
        assert_eq!(paths.len(), 1);
        assert_eq!(names, ["u", "m", "w"]);
        assert!(is_minimal(c.graph()));
        assert!((gc_delta(&c).unwrap() - 6f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn symmetric_chain_has_zero_delta() {
        let spec = GraphSpec::new(
            &["u", "m", "w", "s"],
            "u",
            "w",
            &[("u", "m", 2.0), ("m", "u", 2.0), ("m", "w", 0.5), ("w", "m", 0.5), ("m", "s", 3.0), ("s", "m", 9.0)],
        );
        assert_eq!(gc_delta(&RatedCell::from_spec(&spec).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn asymmetric_support_is_not_minimal() {
        let rep = minimality(five_mixed().graph());
        assert!(!rep.minimal);
        assert_eq!(rep.reason, Some(NonMinimalReason::AsymmetricSupport));
    }

    /// Independent oracle: enumerate every vertex sequence (no DFS state) and
    /// keep the simple ones that follow edges from source to sink.
    fn brute_force_paths(graph: &FundamentalGraph) -> Vec<GatePath> {
        let n = graph.vertex_count();
        let mut found = Vec::new();
        let mut frontier: Vec<Vec<usize>> = vec![vec![graph.source()]];
        for _ in 0..n {
            let mut next = Vec::new();
            for p in frontier {
                for w in 0..n {
                    let last = *p.last().unwrap();
                    if last == graph.sink() || !graph.has_edge(last, w) || p.contains(&w) {
                        continue;
                    }
                    let mut q = p.clone();
                    q.push(w);
                    if w == graph.sink() {
                        found.push(GatePath(q.clone()));
                    }
                    next.push(q);
                }
            }
            frontier = next;
        }
        found.sort();
        found
    }

    fn random_graph() -> impl Strategy<Value = GraphSpec> {
        (3usize..=8)
            .prop_flat_map(|n| (Just(n), proptest::collection::vec(any::<bool>(), n * n)))
            .prop_map(|(n, bits)| {
                let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
                let mut edges = Vec::new();
                for a in 0..n {
                    for b in 0..n {
                        // a ring keeps the graph strongly connected
                        let ring = b == (a + 1) % n;
                        if a != b && (ring || bits[a * n + b]) {
                            edges.push((names[a].clone(), names[b].clone()));
                        }
                    }
                }
                let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
                let e: Vec<(&str, &str, f64)> = edges.iter().map(|(a, b)| (a.as_str(), b.as_str(), 1.0)).collect();
                GraphSpec::new(&refs, "v0", &format!("v{}", n / 2), &e)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn dfs_matches_brute_force(spec in random_graph()) {
            let c = RatedCell::from_spec(&spec).unwrap();
            let g = c.graph();
            let got = enumerate_gate_paths(g);
            prop_assert!(!got.is_empty());
            for p in &got {
                prop_assert_eq!(p.0[0], g.source());
                prop_assert_eq!(*p.0.last().unwrap(), g.sink());
            }
            prop_assert_eq!(got, brute_force_paths(g));
        }

        #[test]
        fn delta_scales_with_forward_path_rates(s in 0.1f64..10.0, off in 0.1f64..10.0) {
            let base = tooth();
            let g = base.graph();
            let (u, m, w, t) = (0, 1, 2, 3);
            let mut rates = base.rates().as_slice().to_vec();
            for (k, &(a, b)) in g.edges().iter().enumerate() {
                if (a, b) == (u, m) || (a, b) == (m, w) {
                    rates[k] *= s;
                }
                if (a, b) == (m, t) || (a, b) == (t, m) {
                    rates[k] *= off;
                }
            }
            let scaled = base.with_rates(rates).unwrap();
            let d0 = gc_delta(&base).unwrap();
            let d1 = gc_delta(&scaled).unwrap();
            prop_assert!((d1 - d0 - 2.0 * s.ln()).abs() < 1e-12);
        }
    }
}
