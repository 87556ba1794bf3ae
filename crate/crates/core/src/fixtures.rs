//! Small reference cells with pinned rates, shared by tests, the acceptance
//! suite and the CLI examples.

use crate::graph::{GraphSpec, RatedCell};

/// `s ⇄ t` with `r(s,t) = a`, `r(t,s) = b`: a birth-death chain on the gates.
pub fn two_vertex_spec(a: f64, b: f64) -> GraphSpec {
    GraphSpec::new(&["s", "t"], "s", "t", &[("s", "t", a), ("t", "s", b)])
}

pub fn two_vertex(a: f64, b: f64) -> RatedCell {
    RatedCell::from_spec(&two_vertex_spec(a, b)).unwrap()
}

/// `u – m – w`, source `u`, sink `w`.
pub fn three_chain_spec() -> GraphSpec {
    GraphSpec::new(
        &["u", "m", "w"],
        "u",
        "w",
        &[("u", "m", 2.0), ("m", "w", 3.0), ("m", "u", 1.0), ("w", "m", 1.0)],
    )
}

pub fn three_chain() -> RatedCell {
    RatedCell::from_spec(&three_chain_spec()).unwrap()
}

/// The 3-chain with a dead-end tooth `m – s` hanging off the middle.
pub fn tooth_spec() -> GraphSpec {
    GraphSpec::new(
        &["u", "m", "w", "s"],
        "u",
        "w",
        &[
            ("u", "m", 2.0),
            ("m", "w", 3.0),
            ("m", "u", 1.0),
            ("w", "m", 1.0),
            ("m", "s", 1.5),
            ("s", "m", 0.7),
        ],
    )
}

pub fn tooth() -> RatedCell {
    RatedCell::from_spec(&tooth_spec()).unwrap()
}

/// Two parallel branches `u – x – w` and `u – y – w`, all edges bidirected.
pub fn diamond_spec(rates: [f64; 8]) -> GraphSpec {
    GraphSpec::new(
        &["u", "x", "y", "w"],
        "u",
        "w",
        &[
            ("u", "x", rates[0]),
            ("x", "u", rates[1]),
            ("x", "w", rates[2]),
            ("w", "x", rates[3]),
            ("u", "y", rates[4]),
            ("y", "u", rates[5]),
            ("y", "w", rates[6]),
            ("w", "y", rates[7]),
        ],
    )
}

pub fn diamond() -> RatedCell {
    RatedCell::from_spec(&diamond_spec([2.0, 0.5, 1.5, 1.0, 0.8, 1.2, 2.5, 0.3])).unwrap()
}

pub fn diamond_uniform() -> RatedCell {
    RatedCell::from_spec(&diamond_spec([1.0; 8])).unwrap()
}

/// Five vertices mixing bidirected edges, a one-way cycle `x → y → z → x`
/// and a one-way shortcut from sink back to source.
pub fn five_mixed_spec() -> GraphSpec {
    GraphSpec::new(
        &["a", "x", "y", "z", "b"],
        "a",
        "b",
        &[
            ("a", "x", 1.7),
            ("x", "a", 0.6),
            ("x", "b", 1.1),
            ("b", "x", 0.4),
            ("x", "y", 0.9),
            ("y", "z", 1.3),
            ("z", "x", 0.5),
            ("z", "b", 2.2),
            ("b", "z", 0.8),
            ("b", "a", 0.35),
        ],
    )
}

pub fn five_mixed() -> RatedCell {
    RatedCell::from_spec(&five_mixed_spec()).unwrap()
}

pub fn all_test_cells() -> Vec<RatedCell> {
    vec![two_vertex(4.0, 1.0), three_chain(), tooth(), diamond(), five_mixed()]
}
