//! Moment generating functions of one regeneration step and of the one-step
//! first-passage times, the critical tilt and the velocity.
//!
//! For a tilt `λ` we write
//! `f±(λ) = E[e^{λτ} 1(w = ±1)]` and `φ±(λ) = E[e^{λ T±1} 1(T±1 < ∞)]`.
//! They are linked by `φ± = 2 f± / (1 + √(1 − 4 f₊ f₋))` for `λ ≤ λ_c`, where
//! `λ_c` solves `4 f₊ f₋ = 1`; above `λ_c` both `φ±` are infinite.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::graph::{LatticeVertex, RatedCell};
use crate::law::CycleLaw;
use crate::linalg;

/// A pair of values indexed by jump sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pm<T> {
    pub minus: T,
    pub plus: T,
}

impl<T: Copy> Pm<T> {
    pub fn get(&self, sign: Sign) -> T {
        match sign {
            Sign::Plus => self.plus,
            Sign::Minus => self.minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// `(f̃₋, f̃₀, f̃₊)`: MGFs of the time to the next gate visit (gate `-1`, `0`
/// or `+1`) after leaving gate 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TildeF {
    pub minus: ExtReal,
    pub zero: ExtReal,
    pub plus: ExtReal,
}

/// Precomputed first-passage structure of a cell, seen from gate 0.
#[derive(Debug, Clone)]
pub struct FirstPassage {
    /// Non-gate lattice vertices reachable from gate 0 before any gate.
    interior: Vec<LatticeVertex>,
    /// `diag(r(x)) − R` on the interior.
    base: DMatrix<f64>,
    /// Rates from interior states into gates −1, 0, +1 (columns).
    to_gates: DMatrix<f64>,
    /// First jumps out of gate 0: target (interior index or gate column) and rate.
    first: Vec<(Target, f64)>,
    gate_rate: f64,
    /// `MGF of the interior exit time is finite iff λ < decay`.
    decay: f64,
}

#[derive(Debug, Clone, Copy)]
enum Target {
    Interior(usize),
    Gate(usize),
}

fn gate_column(cell: i64) -> usize {
    (cell + 1) as usize
}

impl FirstPassage {
    pub fn new(cell: &RatedCell) -> Self {
        let gate0 = cell.gate(0);
        let mut index: HashMap<LatticeVertex, usize> = HashMap::new();
        let mut interior = Vec::new();
        let mut stack: Vec<LatticeVertex> = Vec::new();
        let mut first = Vec::new();
        for (y, r) in cell.lattice_out_edges(gate0) {
            if cell.is_gate(y) {
                first.push((Target::Gate(gate_column(y.cell)), r));
            } else {
                let k = *index.entry(y).or_insert_with(|| {
                    interior.push(y);
                    stack.push(y);
                    interior.len() - 1
                });
                first.push((Target::Interior(k), r));
            }
        }
        while let Some(x) = stack.pop() {
            for (y, _) in cell.lattice_out_edges(x) {
                if !cell.is_gate(y) && !index.contains_key(&y) {
                    index.insert(y, interior.len());
                    interior.push(y);
                    stack.push(y);
                }
            }
        }
        let n = interior.len();
        let mut base = DMatrix::zeros(n, n);
        let mut to_gates = DMatrix::zeros(n, 3);
        for (i, &x) in interior.iter().enumerate() {
            for (y, r) in cell.lattice_out_edges(x) {
                base[(i, i)] += r;
                if cell.is_gate(y) {
                    to_gates[(i, gate_column(y.cell))] += r;
                } else {
                    base[(i, index[&y])] -= r;
                }
            }
        }
        let decay = if n == 0 { f64::INFINITY } else { interior_decay(&base) };
        FirstPassage { interior, base, to_gates, first, gate_rate: cell.exit_rate(cell.graph().source()), decay }
    }

    pub fn interior(&self) -> &[LatticeVertex] {
        &self.interior
    }

    /// Supremum of the tilts for which the interior exit time has a finite MGF.
    pub fn decay_rate(&self) -> f64 {
        self.decay
    }

    /// Tilts at or above this value give `f̃ = +∞`.
    pub fn finiteness_bound(&self) -> f64 {
        self.decay.min(self.gate_rate)
    }

    /// Values and λ-derivatives of `(f̃₋, f̃₀, f̃₊)`; `None` when infinite.
    pub fn eval(&self, lambda: f64) -> Result<Option<([f64; 3], [f64; 3])>> {
        if lambda >= self.finiteness_bound() {
            return Ok(None);
        }
        let n = self.interior.len();
        let (u, du) = if n == 0 {
            (DMatrix::zeros(0, 3), DMatrix::zeros(0, 3))
        } else {
            let m = &self.base - DMatrix::identity(n, n) * lambda;
            let singular = || Error::SingularSystem { lambda };
            let u = linalg::guarded_solve(&m, &self.to_gates).ok_or_else(singular)?;
            if u.iter().any(|&x| x < 0.0) {
                return Err(singular());
            }
            // differentiating (M − λ) u = b gives (M − λ) u' = u
            let du = linalg::guarded_solve(&m, &u).ok_or_else(singular)?;
            (u, du)
        };
        let hold = self.gate_rate - lambda;
        let mut val = [0.0; 3];
        let mut der = [0.0; 3];
        for &(target, r) in &self.first {
            let c = r / hold;
            let dc = c / hold;
            match target {
                Target::Gate(g) => {
                    val[g] += c;
                    der[g] += dc;
                }
                Target::Interior(k) => {
                    for g in 0..3 {
                        val[g] += c * u[(k, g)];
                        der[g] += dc * u[(k, g)] + c * du[(k, g)];
                    }
                }
            }
        }
        Ok(Some((val, der)))
    }
}

/// `-(largest real eigenvalue)` of the interior sub-generator `R − diag(r)`,
/// via shifted power iteration.
fn interior_decay(base: &DMatrix<f64>) -> f64 {
    let n = base.nrows();
    let kappa = (0..n).map(|i| base[(i, i)]).fold(0.0, f64::max);
    let shifted = DMatrix::identity(n, n) * kappa - base;
    let top = match linalg::perron(&shifted) {
        Ok(p) => p.value,
        Err(_) => shifted.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
    };
    kappa - top
}

/// `(f̃₋, f̃₀, f̃₊)(λ)` by the first-passage linear solve.
pub fn tilde_f(cell: &RatedCell, lambda: f64) -> Result<TildeF> {
    tilde_f_with(&FirstPassage::new(cell), lambda)
}

pub fn tilde_f_with(fp: &FirstPassage, lambda: f64) -> Result<TildeF> {
    Ok(match fp.eval(lambda)? {
        None => TildeF { minus: ExtReal::PositiveInfinity, zero: ExtReal::PositiveInfinity, plus: ExtReal::PositiveInfinity },
        Some((v, _)) => TildeF { minus: ExtReal::Finite(v[0]), zero: ExtReal::Finite(v[1]), plus: ExtReal::Finite(v[2]) },
    })
}

/// Left edge of the region where the path-sum series is guaranteed to converge.
pub fn pathsum_domain_bound(cell: &RatedCell) -> f64 {
    -(3.0 * cell.max_exit_rate() + 1.0)
}

/// Truncated path sum for `f̃₊(λ)`: over source-to-sink cell paths of length
/// at most `max_len` whose interior avoids source and sink, of
/// `Π r(x_i, x_{i+1}) / Π (r(x_i) − λ)`.
pub fn tilde_f_pathsum(cell: &RatedCell, lambda: f64, max_len: usize) -> Result<f64> {
    check_pathsum_args(cell, lambda, max_len)?;
    let (mut total, _) = pathsum_terms(cell, lambda, max_len);
    total = total.max(0.0);
    Ok(total)
}

fn check_pathsum_args(cell: &RatedCell, lambda: f64, max_len: usize) -> Result<()> {
    if max_len == 0 {
        return Err(Error::DomainError("max_len must be >= 1".into()));
    }
    let bound = pathsum_domain_bound(cell);
    if !(lambda < bound) {
        return Err(Error::DomainError(format!("path sum needs lambda < {bound}, got {lambda}")));
    }
    Ok(())
}

/// Returns the partial sum and the weight still carried by unfinished paths.
fn pathsum_terms(cell: &RatedCell, lambda: f64, max_len: usize) -> (f64, f64) {
    let g = cell.graph();
    let (src, sink) = (g.source(), g.sink());
    let n = g.vertex_count();
    let denom: Vec<f64> = (0..n).map(|v| cell.exit_rate(v) - lambda).collect();
    // weight[v]: summed weight of open paths currently at interior vertex v
    let mut weight = vec![0.0; n];
    let mut total = 0.0;
    for &e in g.out_edges(src) {
        let (_, b) = g.edges()[e];
        let w = cell.rates().get(e) / denom[src];
        if b == sink {
            total += w;
        } else if b != src {
            weight[b] += w;
        }
    }
    for _ in 1..max_len {
        let mut next = vec![0.0; n];
        for v in (0..n).filter(|&v| v != src && v != sink && weight[v] > 0.0) {
            for &e in g.out_edges(v) {
                let (_, b) = g.edges()[e];
                let w = weight[v] * cell.rates().get(e) / denom[v];
                if b == sink {
                    total += w;
                } else if b != src {
                    next[b] += w;
                }
            }
        }
        weight = next;
    }
    (total, weight.iter().sum())
}

/// Smallest truncation whose geometric tail bound is below `tol`.
///
/// Each further step multiplies the open weight by at most
/// `q = max_v r(v) / (r(v) − λ) < 1`.
pub fn pathsum_truncation(cell: &RatedCell, lambda: f64, tol: f64) -> Result<usize> {
    check_pathsum_args(cell, lambda, 1)?;
    let n = cell.graph().vertex_count();
    let q = (0..n).map(|v| cell.exit_rate(v) / (cell.exit_rate(v) - lambda)).fold(0.0, f64::max);
    let (_, open1) = pathsum_terms(cell, lambda, 1);
    if open1 <= 0.0 {
        return Ok(1);
    }
    // tail after L steps ≤ open1 · q^(L-1) · q / (1 − q)
    let steps = ((tol * (1.0 - q) / (open1 * q)).ln() / q.ln()).ceil().max(0.0) as usize;
    Ok(steps + 1)
}

/// `ln f±` and `(ln f±)'` at one tilt; `None` = infinite, `Some((-inf, 0))` = zero.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogF {
    pub plus: Option<(f64, f64)>,
    pub minus: Option<(f64, f64)>,
}

const NO_MASS: (f64, f64) = (f64::NEG_INFINITY, 0.0);

pub(crate) fn log_f(law: &CycleLaw, lambda: f64) -> Result<LogF> {
    Ok(match law {
        CycleLaw::Graph(g) => match g.first_passage().eval(lambda)? {
            None => LogF { plus: None, minus: None },
            Some((v, d)) => {
                let rest = 1.0 - v[1];
                if !(rest > 0.0) {
                    LogF { plus: None, minus: None }
                } else {
                    let side = |k: usize| (v[k].ln() - rest.ln(), d[k] / v[k] + d[1] / rest);
                    LogF { plus: Some(side(2)), minus: Some(side(0)) }
                }
            }
        },
        CycleLaw::Discrete(dl) => {
            let side = |s: i8| {
                let atoms: Vec<_> = dl.atoms().iter().filter(|a| a.sign == s).collect();
                if atoms.is_empty() {
                    return NO_MASS;
                }
                let exps: Vec<f64> = atoms.iter().map(|a| a.prob.ln() + lambda * a.duration).collect();
                let m = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (mut z, mut zt) = (0.0, 0.0);
                for (a, e) in atoms.iter().zip(&exps) {
                    let w = (e - m).exp();
                    z += w;
                    zt += w * a.duration;
                }
                (m + z.ln(), zt / z)
            };
            LogF { plus: Some(side(1)), minus: Some(side(-1)) }
        }
        &CycleLaw::Exponential { p, beta_plus, beta_minus } => {
            let side = |q: f64, b: f64| (lambda < b).then(|| (q.ln() + b.ln() - (b - lambda).ln(), 1.0 / (b - lambda)));
            LogF { plus: side(p, beta_plus), minus: side(1.0 - p, beta_minus) }
        }
        &CycleLaw::Gamma { p, k_plus, beta_plus, k_minus, beta_minus } => {
            let side = |q: f64, k: f64, b: f64| {
                (lambda < b).then(|| (q.ln() + k * (b.ln() - (b - lambda).ln()), k / (b - lambda)))
            };
            LogF { plus: side(p, k_plus, beta_plus), minus: side(1.0 - p, k_minus, beta_minus) }
        }
    })
}

fn ext_exp(x: Option<(f64, f64)>) -> ExtReal {
    match x {
        Some((l, _)) => ExtReal::Finite(l.exp()),
        None => ExtReal::PositiveInfinity,
    }
}

/// `(f₋, f₊)(λ)`.
pub fn f_pm(law: &CycleLaw, lambda: f64) -> Result<Pm<ExtReal>> {
    let lf = log_f(law, lambda)?;
    Ok(Pm { minus: ext_exp(lf.minus), plus: ext_exp(lf.plus) })
}

/// `4 f₊ f₋ − 1` in log form: `ln 4 + ln f₊ + ln f₋`, `+inf` when infinite.
fn log_product(lf: &LogF) -> f64 {
    match (lf.plus, lf.minus) {
        (Some((a, _)), Some((b, _))) => 4f64.ln() + a + b,
        _ => f64::INFINITY,
    }
}

const LAMBDA_C_GTOL: f64 = 1e-12;
const LAMBDA_C_WIDTH: f64 = 1e-14;

/// The critical tilt: the root of `4 f₊(λ) f₋(λ) = 1`, always `≥ 0`.
pub fn lambda_c(law: &CycleLaw) -> Result<f64> {
    law.require_two_sided()?;
    // g(λ) > 0 also covers the region where f is infinite or the solve breaks
    let g = |l: f64| -> f64 {
        match log_f(law, l) {
            Ok(lf) => log_product(&lf),
            Err(Error::SingularSystem { .. }) => f64::INFINITY,
            Err(_) => f64::NAN,
        }
    };
    let g0 = g(0.0);
    if g0.is_nan() {
        return Err(Error::Inconsistent("cannot evaluate f at 0".into()));
    }
    if g0 >= 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut expansions = 0;
    loop {
        let v = g(hi);
        if v.is_nan() {
            return Err(Error::BracketFailure("NaN while bracketing lambda_c".into()));
        }
        if v > 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 1100 {
            return Err(Error::BracketFailure("4 f+ f- never exceeds 1".into()));
        }
    }
    while hi - lo > LAMBDA_C_WIDTH * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v.is_nan() {
            return Err(Error::BracketFailure("NaN during bisection".into()));
        }
        if v.abs() < LAMBDA_C_GTOL && v <= 0.0 {
            return Ok(mid);
        }
        if v > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

/// `(α₋, α₊)`: minimum of the support of `τ` on `{w = ±1}`. Zero for the
/// graph and continuous laws; `+inf` for a sign carrying no mass.
pub fn alpha_pm(law: &CycleLaw) -> Pm<f64> {
    match law {
        CycleLaw::Discrete(d) => Pm {
            minus: d.min_duration(-1).unwrap_or(f64::INFINITY),
            plus: d.min_duration(1).unwrap_or(f64::INFINITY),
        },
        _ => Pm { minus: 0.0, plus: 0.0 },
    }
}

/// `(P(w = −1), P(w = +1))`.
pub fn sign_probabilities(law: &CycleLaw) -> Result<Pm<f64>> {
    Ok(match law {
        CycleLaw::Discrete(d) => Pm { minus: d.mass(-1), plus: d.mass(1) },
        &CycleLaw::Exponential { p, .. } | &CycleLaw::Gamma { p, .. } => Pm { minus: 1.0 - p, plus: p },
        CycleLaw::Graph(_) => {
            let f = f_pm(law, 0.0)?;
            Pm { minus: f.minus.to_f64(), plus: f.plus.to_f64() }
        }
    })
}

/// `E(τ)`, in closed form or from `f₊'(0) + f₋'(0)` for graph laws.
pub fn mean_duration(law: &CycleLaw) -> Result<f64> {
    Ok(match law {
        CycleLaw::Discrete(d) => d.atoms().iter().map(|a| a.prob * a.duration).sum(),
        &CycleLaw::Exponential { p, beta_plus, beta_minus } => p / beta_plus + (1.0 - p) / beta_minus,
        &CycleLaw::Gamma { p, k_plus, beta_plus, k_minus, beta_minus } => {
            p * k_plus / beta_plus + (1.0 - p) * k_minus / beta_minus
        }
        CycleLaw::Graph(_) => {
            let lf = log_f(law, 0.0)?;
            let d = |x: Option<(f64, f64)>| x.map_or(0.0, |(l, dl)| l.exp() * dl);
            d(lf.plus) + d(lf.minus)
        }
    })
}

/// `v = E(w) / E(τ)`.
pub fn velocity(law: &CycleLaw) -> Result<f64> {
    let p = sign_probabilities(law)?;
    Ok((p.plus - p.minus) / mean_duration(law)?)
}

/// Renewal-route evaluator for one law, with `λ_c` computed once.
#[derive(Debug, Clone)]
pub struct Renewal<'a> {
    law: &'a CycleLaw,
    lambda_c: f64,
}

/// `φ±` and `(ln φ±)'` at one tilt below `λ_c`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PhiPoint {
    pub log_phi: Pm<f64>,
    pub dlog_phi: Pm<f64>,
}

const CLAMP: f64 = 1e-12;

impl<'a> Renewal<'a> {
    /// One-sided laws are accepted with `λ_c = +∞`.
    pub fn new(law: &'a CycleLaw) -> Result<Self> {
        let lambda_c = if law.is_two_sided() { lambda_c(law)? } else { f64::INFINITY };
        Ok(Renewal { law, lambda_c })
    }

    pub fn law(&self) -> &CycleLaw {
        self.law
    }

    pub fn lambda_c(&self) -> f64 {
        self.lambda_c
    }

    /// `ln φ±` and derivatives, or `None` above `λ_c`.
    pub(crate) fn phi_point(&self, lambda: f64) -> Result<Option<PhiPoint>> {
        if lambda > self.lambda_c {
            return Ok(None);
        }
        let lf = log_f(self.law, lambda)?;
        let (Some((lp, dp)), Some((lm, dm))) = (lf.plus, lf.minus) else {
            return Ok(None);
        };
        let mut s2 = 1.0 - (4f64.ln() + lp + lm).exp();
        if s2 < 0.0 {
            if s2 > -CLAMP {
                s2 = 0.0;
            } else {
                return Err(Error::Inconsistent(format!("1 - 4 f+ f- = {s2} below lambda_c")));
            }
        }
        let s = s2.sqrt();
        let log_den = (1.0 + s).ln();
        let log_phi = Pm { plus: 2f64.ln() + lp - log_den, minus: 2f64.ln() + lm - log_den };
        // from φ₊ = f₊ + f₋ φ₊² and 1 − 2 f₋ φ₊ = s
        let (dp, dm) = (if lp.is_finite() { dp } else { 0.0 }, if lm.is_finite() { dm } else { 0.0 });
        let dlog_phi = if s > 0.0 {
            Pm {
                plus: (dp * (1.0 + s) + dm * (1.0 - s)) / (2.0 * s),
                minus: (dm * (1.0 + s) + dp * (1.0 - s)) / (2.0 * s),
            }
        } else {
            Pm { plus: f64::INFINITY, minus: f64::INFINITY }
        };
        Ok(Some(PhiPoint { log_phi, dlog_phi }))
    }

    /// `(φ₋, φ₊)(λ)`.
    pub fn phi_pm(&self, lambda: f64) -> Result<Pm<ExtReal>> {
        Ok(match self.phi_point(lambda)? {
            None => Pm { minus: ExtReal::PositiveInfinity, plus: ExtReal::PositiveInfinity },
            Some(p) => Pm { minus: ExtReal::Finite(p.log_phi.minus.exp()), plus: ExtReal::Finite(p.log_phi.plus.exp()) },
        })
    }

    /// `(ln φ_sign)'(λ)` for `λ < λ_c`.
    pub fn dlog_phi(&self, sign: Sign, lambda: f64) -> Result<f64> {
        match self.phi_point(lambda)? {
            Some(p) => Ok(p.dlog_phi.get(sign)),
            None => Ok(f64::INFINITY),
        }
    }

    pub fn log_phi(&self, sign: Sign, lambda: f64) -> Result<ExtReal> {
        Ok(match self.phi_point(lambda)? {
            Some(p) => ExtReal::Finite(p.log_phi.get(sign)),
            None => ExtReal::PositiveInfinity,
        })
    }
}

/// `(φ₋, φ₊)(λ)`.
pub fn phi_pm(law: &CycleLaw, lambda: f64) -> Result<Pm<ExtReal>> {
    Renewal::new(law)?.phi_pm(lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfSummary {
    pub lambda_c: f64,
    #[serde(with = "crate::ext::ext_f64")]
    pub alpha_plus: f64,
    #[serde(with = "crate::ext::ext_f64")]
    pub alpha_minus: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub mean_duration: f64,
    pub velocity: f64,
    /// Finiteness bound of the first-passage solve (graph laws only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_interior: Option<ExtReal>,
}

pub fn mgf_summary(law: &CycleLaw) -> Result<MgfSummary> {
    let alpha = alpha_pm(law);
    let p = sign_probabilities(law)?;
    Ok(MgfSummary {
        lambda_c: lambda_c(law)?,
        alpha_plus: alpha.plus,
        alpha_minus: alpha.minus,
        p_plus: p.plus,
        p_minus: p.minus,
        mean_duration: mean_duration(law)?,
        velocity: velocity(law)?,
        lambda_interior: law.as_graph().map(|g| ExtReal::from_f64(g.first_passage().decay_rate()).unwrap()),
    })
}
