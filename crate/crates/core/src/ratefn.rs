//! Legendre transforms on the renewal route: `J±(u)` for the hitting times
//! `T_n / |n|` and `I(θ)` for the position `Z_t / t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::{self, ExtReal};
use crate::law::CycleLaw;
use crate::mgf::{self, Renewal, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateKind {
    I,
    #[serde(rename = "J_plus")]
    JPlus,
    #[serde(rename = "J_minus")]
    JMinus,
}

impl std::str::FromStr for RateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" => Ok(RateKind::I),
            "J+" | "J_plus" => Ok(RateKind::JPlus),
            "J-" | "J_minus" => Ok(RateKind::JMinus),
            _ => Err(Error::DomainError(format!("unknown curve kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Renewal,
    Spectral,
}

/// A tabulated rate function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub grid: Vec<f64>,
    pub values: Vec<ExtReal>,
    pub kind: RateKind,
    pub route: Route,
    pub law: String,
}

impl RateCurve {
    /// Most negative change of slope between consecutive finite triples.
    /// Nonnegative for a convex curve.
    pub fn min_slope_increment(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for k in 1..self.grid.len().saturating_sub(1) {
            let (Some(a), Some(b), Some(c)) =
                (self.values[k - 1].finite(), self.values[k].finite(), self.values[k + 1].finite())
            else {
                continue;
            };
            let (x0, x1, x2) = (self.grid[k - 1], self.grid[k], self.grid[k + 1]);
            let d = (c - b) / (x2 - x1) - (b - a) / (x1 - x0);
            // scaled to a second difference on the local spacing
            worst = worst.min(d * 0.5 * (x2 - x0));
        }
        worst
    }

    /// Index of the smallest value.
    pub fn argmin(&self) -> Option<usize> {
        (0..self.values.len()).min_by(|&a, &b| self.values[a].partial_cmp(&self.values[b]).unwrap())
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::DomainError("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

const MAX_DOUBLINGS: usize = 200;
const RESIDUAL_TOL: f64 = 1e-9;

/// Rate-function evaluator sharing one `λ_c` computation across calls.
#[derive(Debug, Clone)]
pub struct RateFn<'a> {
    renewal: Renewal<'a>,
    alpha: mgf::Pm<f64>,
}

impl<'a> RateFn<'a> {
    pub fn new(law: &'a CycleLaw) -> Result<Self> {
        Ok(RateFn { renewal: Renewal::new(law)?, alpha: mgf::alpha_pm(law) })
    }

    pub fn lambda_c(&self) -> f64 {
        self.renewal.lambda_c()
    }

    fn law(&self) -> &CycleLaw {
        self.renewal.law()
    }

    /// Mass of `w = sign`; zero only for one-sided laws.
    fn has_mass(&self, sign: Sign) -> bool {
        match self.law() {
            CycleLaw::Discrete(d) => d.mass(sign.as_i8()) > 0.0,
            _ => true,
        }
    }

    /// Upper end of the range of `(log φ)'`: finite only for one-sided laws,
    /// where it is the largest duration.
    fn upper_u(&self, sign: Sign) -> f64 {
        match self.law() {
            CycleLaw::Discrete(d) if !self.law().is_two_sided() => {
                d.max_duration(sign.as_i8()).unwrap_or(f64::NEG_INFINITY)
            }
            _ => f64::INFINITY,
        }
    }

    fn dlog(&self, sign: Sign, l: f64) -> Result<f64> {
        self.renewal.dlog_phi(sign, l)
    }

    /// The `λ̃ ≤ λ_c` with `(log φ_sign)'(λ̃) = u`.
    pub fn tilde_lambda(&self, sign: Sign, u: f64) -> Result<f64> {
        let alpha = self.alpha.get(sign);
        if !(u > alpha) || !u.is_finite() {
            return Err(Error::DomainError(format!("u = {u} must exceed alpha = {alpha}")));
        }
        if !self.has_mass(sign) || u >= self.upper_u(sign) {
            return Err(Error::DomainError(format!("u = {u} outside the range of (log phi)'")));
        }
        let lc = self.lambda_c();
        let (mut lo, mut hi);
        if lc.is_finite() {
            hi = lc;
            if self.dlog(sign, hi)? <= u {
                // the supremum sits at the edge
                return Ok(lc);
            }
        } else {
            hi = 1.0;
            let mut k = 0;
            while self.dlog(sign, hi)? <= u {
                hi *= 2.0;
                k += 1;
                if k > MAX_DOUBLINGS {
                    return Err(Error::BracketFailure(format!("no upper bracket for u = {u}")));
                }
            }
        }
        let top = if lc.is_finite() { lc } else { hi };
        let mut step = 1.0;
        lo = top.min(0.0) - step;
        let mut k = 0;
        while self.dlog(sign, lo)? >= u {
            hi = hi.min(lo);
            step *= 2.0;
            lo = top.min(0.0) - step;
            k += 1;
            if k > MAX_DOUBLINGS {
                return Err(Error::BracketFailure(format!("no lower bracket for u = {u}")));
            }
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let d = self.dlog(sign, mid)?;
            if d == u {
                return Ok(mid);
            }
            if d < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mid = 0.5 * (lo + hi);
        let residual = (self.dlog(sign, mid)? - u).abs();
        if residual > RESIDUAL_TOL * u.max(1.0) {
            // steep derivative: the best double-precision root still leaves a gap
            let width = hi - lo;
            if width > 8.0 * f64::EPSILON * mid.abs().max(1.0) {
                return Err(Error::NonConvergence { iterations: 400 });
            }
        }
        Ok(mid)
    }

    /// `J_sign(u) = sup_λ { λu − log φ_sign(λ) }`.
    pub fn j(&self, sign: Sign, u: f64) -> Result<ExtReal> {
        let alpha = self.alpha.get(sign);
        if !self.has_mass(sign) || u.is_nan() || u < alpha {
            return Ok(ExtReal::PositiveInfinity);
        }
        let top = self.upper_u(sign);
        if u > top {
            return Ok(ExtReal::PositiveInfinity);
        }
        if u == alpha || u == top {
            return Ok(self.atom_value(sign, u));
        }
        if u == f64::INFINITY {
            return Ok(ExtReal::PositiveInfinity);
        }
        let l = self.tilde_lambda(sign, u)?;
        let lp = self.renewal.log_phi(sign, l)?.to_f64();
        Ok(ExtReal::Finite((l * u - lp).max(0.0)))
    }

    /// `−log P(τ = u, w = sign)`, the limit at an end of the support.
    fn atom_value(&self, sign: Sign, u: f64) -> ExtReal {
        match self.law() {
            CycleLaw::Discrete(d) if u > 0.0 => {
                let p = d.point_mass(sign.as_i8(), u);
                if p > 0.0 {
                    ExtReal::Finite((-p.ln()).max(0.0))
                } else {
                    ExtReal::PositiveInfinity
                }
            }
            _ => ExtReal::PositiveInfinity,
        }
    }

    /// `I(θ)`: `θ J₊(1/θ)` for `θ > 0`, `|θ| J₋(1/|θ|)` for `θ < 0`, `λ_c` at 0.
    pub fn i(&self, theta: f64) -> Result<ExtReal> {
        if theta == 0.0 {
            return Ok(ExtReal::from_f64(self.lambda_c()).unwrap());
        }
        let sign = if theta > 0.0 { Sign::Plus } else { Sign::Minus };
        let a = theta.abs();
        let u = 1.0 / a;
        let alpha = self.alpha.get(sign);
        if !self.has_mass(sign) || u < alpha || u > self.upper_u(sign) {
            return Ok(ExtReal::PositiveInfinity);
        }
        if u == alpha || u == self.upper_u(sign) || !u.is_finite() {
            return Ok(self.j(sign, u)?.scale(a));
        }
        // θ·(λ̃/θ − log φ) without the large intermediate λ̃·u
        let l = self.tilde_lambda(sign, u)?;
        let lp = self.renewal.log_phi(sign, l)?.to_f64();
        Ok(ExtReal::Finite((l - a * lp).max(0.0)))
    }
}

pub fn tilde_lambda(law: &CycleLaw, sign: Sign, u: f64) -> Result<f64> {
    RateFn::new(law)?.tilde_lambda(sign, u)
}

pub fn j_rate(law: &CycleLaw, sign: Sign, u: f64) -> Result<ExtReal> {
    RateFn::new(law)?.j(sign, u)
}

pub fn i_rate(law: &CycleLaw, theta: f64) -> Result<ExtReal> {
    RateFn::new(law)?.i(theta)
}

/// Pointwise renewal-route curve.
pub fn rate_curve(law: &CycleLaw, kind: RateKind, grid: &[f64]) -> Result<RateCurve> {
    check_grid(grid)?;
    let rf = RateFn::new(law)?;
    let values = grid
        .iter()
        .map(|&x| match kind {
            RateKind::I => rf.i(x),
            RateKind::JPlus => rf.j(Sign::Plus, x),
            RateKind::JMinus => rf.j(Sign::Minus, x),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateCurve { grid: grid.to_vec(), values, kind, route: Route::Renewal, law: law.descriptor() })
}

/// Behaviour of `I` at one end of its domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    /// `1/α₊` or `−1/α₋`; infinite when `α = 0`.
    #[serde(with = "ext::ext_f64")]
    pub endpoint: f64,
    /// Limit of `I` at the endpoint; `inf` when it blows up.
    pub limit: ExtReal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualSummary {
    pub velocity: f64,
    pub lambda_c: f64,
    #[serde(with = "ext::ext_f64")]
    pub alpha_plus: f64,
    #[serde(with = "ext::ext_f64")]
    pub alpha_minus: f64,
    pub theta_c_plus: ExtReal,
    pub theta_c_minus: ExtReal,
    pub left: Boundary,
    pub right: Boundary,
}

pub fn qualitative_summary(law: &CycleLaw) -> Result<QualSummary> {
    law.require_two_sided()?;
    let rf = RateFn::new(law)?;
    let lc = rf.lambda_c();
    let alpha = mgf::alpha_pm(law);
    let critical = |sign| -> Result<ExtReal> {
        if lc > 0.0 {
            Ok(ExtReal::from_f64(rf.dlog(sign, 0.0)?).unwrap_or(ExtReal::PositiveInfinity))
        } else {
            Ok(ExtReal::PositiveInfinity)
        }
    };
    let boundary = |sign: Sign| -> Result<Boundary> {
        let a = alpha.get(sign);
        let s = sign.as_i8() as f64;
        if a > 0.0 {
            Ok(Boundary { endpoint: s / a, limit: rf.i(s / a)? })
        } else {
            Ok(Boundary { endpoint: s * f64::INFINITY, limit: ExtReal::PositiveInfinity })
        }
    };
    Ok(QualSummary {
        velocity: mgf::velocity(law)?,
        lambda_c: lc,
        alpha_plus: alpha.plus,
        alpha_minus: alpha.minus,
        theta_c_plus: critical(Sign::Plus)?,
        theta_c_minus: critical(Sign::Minus)?,
        left: boundary(Sign::Minus)?,
        right: boundary(Sign::Plus)?,
    })
}
