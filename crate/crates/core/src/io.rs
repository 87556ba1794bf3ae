//! Run configuration, report envelopes and CSV writers.
//!
//! Every file written here starts with the configuration that produced it:
//! CSV files carry it on a leading `# config: {...}` line, JSON reports under
//! a `config` key.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::{fmt_f64, ExtReal};
use crate::law::CycleLaw;
use crate::mc::EmpiricalCurve;
use crate::mgf;
use crate::ratefn::{self, Boundary, RateCurve};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MOTORLD_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub input: Option<PathBuf>,
    /// Command-specific parameters, as given or defaulted.
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out_dir: Option<PathBuf>,
    pub version: String,
}

impl RunConfig {
    pub fn new(command: &str, input: Option<&Path>) -> Self {
        RunConfig {
            command: command.to_string(),
            input: input.map(Path::to_path_buf),
            params: serde_json::Map::new(),
            seed: None,
            out_dir: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).expect("serializable parameter");
        self.params.insert(key.to_string(), v);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_out_dir(mut self, dir: PathBuf) -> Self {
        self.out_dir = Some(dir);
        self
    }

    fn header(&self) -> String {
        format!("# config: {}\n", serde_json::to_string(self).expect("config serializes"))
    }
}

/// A result together with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub config: RunConfig,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// Flat merge of the MGF and qualitative summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawSummary {
    pub law: String,
    pub velocity: f64,
    pub lambda_c: f64,
    #[serde(with = "crate::ext::ext_f64")]
    pub alpha_plus: f64,
    #[serde(with = "crate::ext::ext_f64")]
    pub alpha_minus: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub mean_duration: f64,
    pub theta_c_plus: ExtReal,
    pub theta_c_minus: ExtReal,
    pub left: Boundary,
    pub right: Boundary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_interior: Option<ExtReal>,
}

pub fn summarize(law: &CycleLaw) -> Result<LawSummary> {
    let m = mgf::mgf_summary(law)?;
    let q = ratefn::qualitative_summary(law)?;
    Ok(LawSummary {
        law: law.descriptor(),
        velocity: m.velocity,
        lambda_c: m.lambda_c,
        alpha_plus: m.alpha_plus,
        alpha_minus: m.alpha_minus,
        p_plus: m.p_plus,
        p_minus: m.p_minus,
        mean_duration: m.mean_duration,
        theta_c_plus: q.theta_c_plus,
        theta_c_minus: q.theta_c_minus,
        left: q.left,
        right: q.right,
        lambda_interior: m.lambda_interior,
    })
}

/// Explicit directory, else the environment variable, else the working directory.
pub fn output_dir(explicit: Option<&Path>) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")),
    }
}

/// Parses `a:b:step` into `a, a+step, …` up to `b` inclusive (within 1e-9 of a step).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::DomainError(format!("grid must look like a:b:step, got {spec:?}"));
    let parts: Vec<f64> =
        spec.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
    let [a, b, step] = parts[..] else { return Err(bad()) };
    if !(a.is_finite() && b.is_finite() && step > 0.0 && b >= a) {
        return Err(bad());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    if n > 10_000_000 {
        return Err(Error::DomainError("grid has too many points".into()));
    }
    Ok((0..=n).map(|k| a + k as f64 * step).collect())
}

fn cell(v: ExtReal) -> (String, u8) {
    (fmt_f64(v.to_f64()), u8::from(v.is_infinite()))
}

/// `abscissa,value,is_infinite`.
pub fn write_rate_csv(w: &mut impl Write, config: &RunConfig, curve: &RateCurve) -> Result<()> {
    w.write_all(config.header().as_bytes())?;
    writeln!(w, "abscissa,value,is_infinite")?;
    for (x, v) in curve.grid.iter().zip(&curve.values) {
        let (s, inf) = cell(*v);
        writeln!(w, "{},{s},{inf}", fmt_f64(*x))?;
    }
    Ok(())
}

/// Largest `|renewal − spectral|` where both are finite; `inf` when the two
/// disagree on finiteness.
pub fn max_route_gap(renewal: &RateCurve, spectral: &RateCurve) -> f64 {
    renewal
        .values
        .iter()
        .zip(&spectral.values)
        .map(|(a, b)| match (a.finite(), b.finite()) {
            (Some(x), Some(y)) => (x - y).abs(),
            (None, None) => 0.0,
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

/// Two value columns on a shared grid plus their gap.
pub fn write_two_route_csv(
    w: &mut impl Write,
    config: &RunConfig,
    renewal: &RateCurve,
    spectral: &RateCurve,
) -> Result<()> {
    if renewal.grid != spectral.grid {
        return Err(Error::Inconsistent("route curves have different grids".into()));
    }
    w.write_all(config.header().as_bytes())?;
    writeln!(w, "# max_gap: {}", fmt_f64(max_route_gap(renewal, spectral)))?;
    writeln!(w, "abscissa,renewal,spectral,renewal_is_infinite,spectral_is_infinite,gap")?;
    for k in 0..renewal.grid.len() {
        let (a, ai) = cell(renewal.values[k]);
        let (b, bi) = cell(spectral.values[k]);
        let gap = match (renewal.values[k].finite(), spectral.values[k].finite()) {
            (Some(x), Some(y)) => fmt_f64((x - y).abs()),
            (None, None) => "0".to_string(),
            _ => "inf".to_string(),
        };
        writeln!(w, "{},{a},{b},{ai},{bi},{gap}", fmt_f64(renewal.grid[k]))?;
    }
    Ok(())
}

/// `abscissa,estimate,lo,hi,count`.
pub fn write_empirical_csv(w: &mut impl Write, config: &RunConfig, curve: &EmpiricalCurve) -> Result<()> {
    w.write_all(config.header().as_bytes())?;
    writeln!(w, "abscissa,estimate,lo,hi,count")?;
    for k in 0..curve.abscissae.len() {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(curve.abscissae[k]),
            fmt_f64(curve.estimates[k]),
            fmt_f64(curve.lower[k]),
            fmt_f64(curve.upper[k].to_f64()),
            curve.counts[k]
        )?;
    }
    Ok(())
}

/// Reads the `# config:` line back from a CSV written above.
pub fn read_csv_config(text: &str) -> Result<RunConfig> {
    let line = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# config: "))
        .ok_or_else(|| Error::Inconsistent("missing config header".into()))?;
    Ok(serde_json::from_str(line)?)
}
