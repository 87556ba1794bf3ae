//! Empirical rate functions from simulation, with bootstrap bands, and their
//! comparison against analytic curves.

use std::collections::BTreeMap;

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::law::CycleLaw;
use crate::ratefn::RateCurve;
use crate::sim::{substream, CycleSampler, HittingResult, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `−(1/s) log(count / n)`.
    Raw,
    /// `−(1/s) log(count / count_mode)`: the modal bin is pinned at zero.
    Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmpiricalKind {
    Position,
    Hitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub seed: u64,
    /// Number of independent substreams; fixes the output together with the seed.
    pub workers: usize,
    pub bootstrap: usize,
    pub min_hits: u64,
}

impl McConfig {
    pub fn new(seed: u64) -> Self {
        McConfig { seed, workers: 8, bootstrap: 1000, min_hits: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCurve {
    pub kind: EmpiricalKind,
    pub normalization: Normalization,
    /// `t` for positions, `|n|` for hitting times.
    pub scale: f64,
    pub level: Option<i64>,
    pub bin_width: f64,
    pub n_samples: usize,
    pub abscissae: Vec<f64>,
    pub estimates: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<ExtReal>,
    pub counts: Vec<u64>,
    /// Add to a mode-normalized estimate to recover `−(1/s) log(count / n)`.
    pub offset: f64,
    pub censored: u64,
}

impl EmpiricalCurve {
    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.n_samples as f64
    }

    pub fn raw_estimate(&self, k: usize) -> f64 {
        self.estimates[k] + self.offset
    }

    pub fn argmin(&self) -> Option<usize> {
        (0..self.estimates.len()).min_by(|&a, &b| self.estimates[a].total_cmp(&self.estimates[b]))
    }
}

/// Sample counts per worker: the first `n % workers` take one extra.
fn split(n: usize, workers: usize) -> Vec<usize> {
    (0..workers).map(|i| n / workers + usize::from(i < n % workers)).collect()
}

fn run_workers<T, F>(n: usize, cfg: &McConfig, draw: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut SimRng) -> Result<T> + Sync,
{
    if cfg.workers == 0 {
        return Err(Error::DomainError("workers must be >= 1".into()));
    }
    let chunks: Vec<Result<Vec<T>>> = split(n, cfg.workers)
        .into_par_iter()
        .enumerate()
        .map(|(i, m)| {
            let mut rng = substream(cfg.seed, i as u64);
            (0..m).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Stream reserved for the bootstrap so it never overlaps sampling streams.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

/// Percentile-bootstrap bands by multinomial resampling of the bin counts.
/// Bins below the hit threshold and censored draws form one implicit remainder.
fn bootstrap(
    counts: &[u64],
    n: usize,
    scale: f64,
    norm: Normalization,
    mode: usize,
    cfg: &McConfig,
) -> (Vec<f64>, Vec<ExtReal>) {
    let k = counts.len();
    let mut rng = substream(cfg.seed, BOOTSTRAP_STREAM);
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let mut reps: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.bootstrap); k];
    for _ in 0..cfg.bootstrap {
        let mut left = n as u64;
        let mut mass = 1.0;
        let mut draw = vec![0u64; k];
        for j in 0..k {
            if left == 0 || mass <= 0.0 {
                break;
            }
            let p = (probs[j] / mass).clamp(0.0, 1.0);
            let x = Binomial::new(left, p).map(|b| b.sample(&mut rng)).unwrap_or(0);
            draw[j] = x;
            left -= x;
            mass -= probs[j];
        }
        let denom = match norm {
            Normalization::Raw => n as f64,
            Normalization::Mode => draw[mode] as f64,
        };
        for j in 0..k {
            let v = if draw[j] == 0 || denom == 0.0 { f64::INFINITY } else { -(draw[j] as f64 / denom).ln() / scale };
            reps[j].push(v);
        }
    }
    let mut lo = Vec::with_capacity(k);
    let mut hi = Vec::with_capacity(k);
    for mut r in reps {
        r.sort_by(f64::total_cmp);
        let b = r.len();
        let lo_ix = ((0.025 * b as f64).floor() as usize).min(b - 1);
        let hi_ix = ((0.975 * b as f64).ceil() as usize).clamp(1, b) - 1;
        lo.push(r[lo_ix]);
        hi.push(ExtReal::from_f64(r[hi_ix]).unwrap_or(ExtReal::PositiveInfinity));
    }
    (lo, hi)
}

struct Binned {
    abscissae: Vec<f64>,
    counts: Vec<u64>,
}

fn build_curve(
    kind: EmpiricalKind,
    level: Option<i64>,
    binned: Binned,
    n: usize,
    scale: f64,
    bin_width: f64,
    norm: Normalization,
    censored: u64,
    cfg: &McConfig,
) -> Result<EmpiricalCurve> {
    let Binned { abscissae, counts } = binned;
    if counts.is_empty() {
        return Err(Error::InsufficientSamples(format!("no bin reached {} hits", cfg.min_hits)));
    }
    let mode = (0..counts.len()).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).unwrap();
    let denom = match norm {
        Normalization::Raw => n as f64,
        Normalization::Mode => counts[mode] as f64,
    };
    let estimates: Vec<f64> = counts.iter().map(|&c| -(c as f64 / denom).ln() / scale).collect();
    let offset = match norm {
        Normalization::Raw => 0.0,
        Normalization::Mode => -(counts[mode] as f64 / n as f64).ln() / scale,
    };
    let (mut lower, mut upper) = bootstrap(&counts, n, scale, norm, mode, cfg);
    for j in 0..counts.len() {
        lower[j] = lower[j].min(estimates[j]);
        if upper[j].to_f64() < estimates[j] {
            upper[j] = ExtReal::Finite(estimates[j]);
        }
    }
    Ok(EmpiricalCurve {
        kind,
        normalization: norm,
        scale,
        level,
        bin_width,
        n_samples: n,
        abscissae,
        estimates,
        lower,
        upper,
        counts,
        offset,
        censored,
    })
}

fn check_common(n_samples: usize, bin_width: f64, cfg: &McConfig) -> Result<()> {
    if n_samples < 1000 {
        return Err(Error::DomainError(format!("n_samples must be >= 1000, got {n_samples}")));
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::DomainError("bin_width must be > 0".into()));
    }
    if cfg.bootstrap == 0 {
        return Err(Error::DomainError("bootstrap must be >= 1".into()));
    }
    Ok(())
}

/// Default position bin: two lattice steps per horizon.
pub fn default_bin_width(t: f64) -> f64 {
    2.0 / t
}

/// Rate estimates for `Z_t / t`. Each bin collects the integers `z` with
/// `z/t ∈ [k w, (k+1) w)` and sits at the midpoint of those values.
pub fn empirical_rate_position(
    law: &CycleLaw,
    t: f64,
    n_samples: usize,
    bin_width: f64,
    norm: Normalization,
    cfg: &McConfig,
) -> Result<EmpiricalCurve> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::DomainError("t must be > 0".into()));
    }
    check_common(n_samples, bin_width, cfg)?;
    let sampler = CycleSampler::new(law);
    let zs = run_workers(n_samples, cfg, |rng| sampler.sample_position(t, rng))?;
    // bin edges in units of z: [k w t, (k+1) w t)
    let span = bin_width * t;
    let eps = 1e-9;
    let mut hist: BTreeMap<i64, u64> = BTreeMap::new();
    for z in zs {
        *hist.entry((z as f64 / span + eps).floor() as i64).or_default() += 1;
    }
    let mut binned = Binned { abscissae: Vec::new(), counts: Vec::new() };
    for (k, c) in hist {
        if c >= cfg.min_hits {
            let zlo = (k as f64 * span - eps).ceil();
            let zhi = ((k + 1) as f64 * span - eps).ceil() - 1.0;
            binned.abscissae.push(0.5 * (zlo + zhi.max(zlo)) / t);
            binned.counts.push(c);
        }
    }
    build_curve(EmpiricalKind::Position, None, binned, n_samples, t, bin_width, norm, 0, cfg)
}

/// Rate estimates for `T_n / |n|`; censored draws count toward `n_samples`
/// but fall in no bin.
pub fn empirical_rate_hitting(
    law: &CycleLaw,
    level: i64,
    n_samples: usize,
    t_cap: f64,
    bin_width: f64,
    norm: Normalization,
    cfg: &McConfig,
) -> Result<EmpiricalCurve> {
    if level == 0 {
        return Err(Error::DomainError("level must be nonzero".into()));
    }
    if !(t_cap > 0.0) {
        return Err(Error::DomainError("t_cap must be > 0".into()));
    }
    check_common(n_samples, bin_width, cfg)?;
    let sampler = CycleSampler::new(law);
    let hits = run_workers(n_samples, cfg, |rng| sampler.sample_hitting_time(level, rng, t_cap))?;
    let s = level.unsigned_abs() as f64;
    let mut hist: BTreeMap<i64, u64> = BTreeMap::new();
    let mut censored = 0;
    for h in hits {
        match h {
            HittingResult::Finite(time) => *hist.entry((time / s / bin_width).floor() as i64).or_default() += 1,
            HittingResult::Censored => censored += 1,
        }
    }
    let mut binned = Binned { abscissae: Vec::new(), counts: Vec::new() };
    for (k, c) in hist {
        if c >= cfg.min_hits {
            binned.abscissae.push((k as f64 + 0.5) * bin_width);
            binned.counts.push(c);
        }
    }
    build_curve(EmpiricalKind::Hitting, Some(level), binned, n_samples, s, bin_width, norm, censored, cfg)
}

/// Fraction of finite `T_level` draws with its binomial standard error.
pub fn finite_hitting_fraction(
    law: &CycleLaw,
    level: i64,
    n_samples: usize,
    t_cap: f64,
    cfg: &McConfig,
) -> Result<(f64, f64)> {
    let sampler = CycleSampler::new(law);
    let hits = run_workers(n_samples, cfg, |rng| sampler.sample_hitting_time(level, rng, t_cap))?;
    let p = hits.iter().filter(|h| h.time().is_some()).count() as f64 / n_samples as f64;
    Ok((p, (p * (1.0 - p) / n_samples as f64).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinComparison {
    pub abscissa: f64,
    pub analytic: ExtReal,
    pub estimate: f64,
    pub lower: f64,
    pub upper: ExtReal,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub bins: Vec<BinComparison>,
    pub coverage: f64,
    /// Largest `|analytic − estimate|` over covered bins.
    pub max_gap: f64,
}

impl ComparisonReport {
    fn from_bins(bins: Vec<BinComparison>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::NoOverlap);
        }
        let covered: Vec<&BinComparison> = bins.iter().filter(|b| b.covered).collect();
        let coverage = covered.len() as f64 / bins.len() as f64;
        let max_gap = covered.iter().map(|b| (b.analytic.to_f64() - b.estimate).abs()).fold(0.0, f64::max);
        Ok(ComparisonReport { bins, coverage, max_gap })
    }

    /// The same report restricted to bins with abscissa in `[lo, hi]`.
    pub fn restricted(&self, lo: f64, hi: f64) -> Result<Self> {
        Self::from_bins(self.bins.iter().filter(|b| b.abscissa >= lo && b.abscissa <= hi).cloned().collect())
    }
}

/// Linear interpolation on the analytic grid; infinite next to an infinity.
fn interpolate(curve: &RateCurve, x: f64) -> Option<ExtReal> {
    let g = &curve.grid;
    if g.is_empty() || x < g[0] || x > g[g.len() - 1] {
        return None;
    }
    let k = g.partition_point(|&a| a <= x);
    if k == 0 {
        return Some(curve.values[0]);
    }
    let i = k - 1;
    if g[i] == x || i + 1 == g.len() {
        return Some(curve.values[i]);
    }
    match (curve.values[i].finite(), curve.values[i + 1].finite()) {
        (Some(a), Some(b)) => {
            let w = (x - g[i]) / (g[i + 1] - g[i]);
            Some(ExtReal::Finite(a + w * (b - a)))
        }
        _ => Some(ExtReal::PositiveInfinity),
    }
}

/// Per-bin coverage of the analytic curve by the empirical bands.
pub fn compare_curves(analytic: &RateCurve, empirical: &EmpiricalCurve) -> Result<ComparisonReport> {
    let mut bins = Vec::new();
    for j in 0..empirical.abscissae.len() {
        let x = empirical.abscissae[j];
        let Some(a) = interpolate(analytic, x) else { continue };
        let (lo, hi) = (empirical.lower[j], empirical.upper[j]);
        let covered = a.to_f64() >= lo && a <= hi;
        bins.push(BinComparison {
            abscissa: x,
            analytic: a,
            estimate: empirical.estimates[j],
            lower: lo,
            upper: hi,
            covered,
        });
    }
    ComparisonReport::from_bins(bins)
}
