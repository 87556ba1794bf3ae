//! Joint laws of one regeneration step `(w, τ)`: the sign of the next gate
//! reached and the time it takes.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::RatedCell;
use crate::mgf::FirstPassage;
use crate::sim::CompiledWalk;

/// One atom of a [`DiscreteLaw`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub sign: i8,
    pub duration: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    atoms: Vec<Atom>,
}

impl DiscreteLaw {
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn mass(&self, sign: i8) -> f64 {
        self.atoms.iter().filter(|a| a.sign == sign).map(|a| a.prob).sum()
    }

    /// Smallest duration carried by `sign`, if any.
    pub fn min_duration(&self, sign: i8) -> Option<f64> {
        self.atoms.iter().filter(|a| a.sign == sign).map(|a| a.duration).reduce(f64::min)
    }

    pub fn max_duration(&self, sign: i8) -> Option<f64> {
        self.atoms.iter().filter(|a| a.sign == sign).map(|a| a.duration).reduce(f64::max)
    }

    /// `P(τ = d, w = sign)`.
    pub fn point_mass(&self, sign: i8, d: f64) -> f64 {
        self.atoms.iter().filter(|a| a.sign == sign && a.duration == d).map(|a| a.prob).sum()
    }
}

/// A graph-induced law keeps the cell and its precompiled jump tables.
#[derive(Debug, Clone)]
pub struct GraphLaw {
    cell: Arc<RatedCell>,
    walk: Arc<CompiledWalk>,
    first_passage: Arc<FirstPassage>,
}

impl GraphLaw {
    pub fn new(cell: RatedCell) -> Self {
        let walk = CompiledWalk::new(&cell);
        let first_passage = FirstPassage::new(&cell);
        GraphLaw { cell: Arc::new(cell), walk: Arc::new(walk), first_passage: Arc::new(first_passage) }
    }
    pub fn cell(&self) -> &RatedCell {
        &self.cell
    }
    pub fn walk(&self) -> &CompiledWalk {
        &self.walk
    }
    pub fn first_passage(&self) -> &FirstPassage {
        &self.first_passage
    }
}

impl PartialEq for GraphLaw {
    fn eq(&self, other: &Self) -> bool {
        self.cell == other.cell
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CycleLaw {
    Graph(GraphLaw),
    Discrete(DiscreteLaw),
    /// `τ | w = ±1 ~ Exp(β±)`, `P(w = +1) = p`.
    Exponential { p: f64, beta_plus: f64, beta_minus: f64 },
    /// `τ | w = ±1 ~ Gamma(shape k±, rate β±)`.
    Gamma { p: f64, k_plus: f64, beta_plus: f64, k_minus: f64, beta_minus: f64 },
}

const PROB_TOL: f64 = 1e-12;

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidLaw(format!("{name} must be finite and > 0, got {x}")))
    }
}

fn open_unit(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLaw(format!("p must lie in (0, 1), got {p}")))
    }
}

impl CycleLaw {
    pub fn graph(cell: RatedCell) -> Self {
        CycleLaw::Graph(GraphLaw::new(cell))
    }

    /// Discrete law with both signs charged.
    pub fn discrete(atoms: Vec<Atom>) -> Result<Self> {
        let law = Self::discrete_one_sided(atoms)?;
        if let CycleLaw::Discrete(d) = &law {
            if d.mass(1) <= 0.0 || d.mass(-1) <= 0.0 {
                return Err(Error::InvalidLaw("both signs need positive mass".into()));
            }
        }
        Ok(law)
    }

    /// Discrete law that may put all its mass on one sign (deterministic
    /// ladders). Operations that need both signs reject it with
    /// [`Error::OneSidedLaw`].
    pub fn discrete_one_sided(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidLaw("no atoms".into()));
        }
        let mut total = 0.0;
        for a in &atoms {
            if a.sign != 1 && a.sign != -1 {
                return Err(Error::InvalidLaw(format!("sign must be ±1, got {}", a.sign)));
            }
            positive("duration", a.duration)?;
            positive("probability", a.prob)?;
            total += a.prob;
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidLaw(format!("probabilities sum to {total}")));
        }
        Ok(CycleLaw::Discrete(DiscreteLaw { atoms }))
    }

    pub fn exponential(p: f64, beta_plus: f64, beta_minus: f64) -> Result<Self> {
        open_unit(p)?;
        positive("beta_plus", beta_plus)?;
        positive("beta_minus", beta_minus)?;
        Ok(CycleLaw::Exponential { p, beta_plus, beta_minus })
    }

    pub fn gamma(p: f64, k_plus: f64, beta_plus: f64, k_minus: f64, beta_minus: f64) -> Result<Self> {
        open_unit(p)?;
        positive("k_plus", k_plus)?;
        positive("beta_plus", beta_plus)?;
        positive("k_minus", k_minus)?;
        positive("beta_minus", beta_minus)?;
        Ok(CycleLaw::Gamma { p, k_plus, beta_plus, k_minus, beta_minus })
    }

    pub fn is_two_sided(&self) -> bool {
        match self {
            CycleLaw::Discrete(d) => d.mass(1) > 0.0 && d.mass(-1) > 0.0,
            _ => true,
        }
    }

    pub fn require_two_sided(&self) -> Result<()> {
        if self.is_two_sided() {
            Ok(())
        } else {
            Err(Error::OneSidedLaw)
        }
    }

    pub fn as_graph(&self) -> Option<&GraphLaw> {
        match self {
            CycleLaw::Graph(g) => Some(g),
            _ => None,
        }
    }

    /// Short human-readable descriptor used in curve headers.
    pub fn descriptor(&self) -> String {
        match self {
            CycleLaw::Graph(g) => {
                let gr = g.cell().graph();
                format!("graph(|V|={}, |E|={})", gr.vertex_count(), gr.edges().len())
            }
            CycleLaw::Discrete(d) => format!("discrete({} atoms)", d.atoms().len()),
            CycleLaw::Exponential { p, beta_plus, beta_minus } => {
                format!("exponential(p={p}, beta+={beta_plus}, beta-={beta_minus})")
            }
            CycleLaw::Gamma { p, k_plus, beta_plus, k_minus, beta_minus } => {
                format!("gamma(p={p}, k+={k_plus}, beta+={beta_plus}, k-={k_minus}, beta-={beta_minus})")
            }
        }
    }
}

/// JSON form of a law. Graph laws point at a graph file, resolved relative to
/// the law file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawSpec {
    Graph { graph_file: PathBuf },
    Discrete { atoms: Vec<(i8, f64, f64)> },
    Exponential { p: f64, beta_plus: f64, beta_minus: f64 },
    Gamma { p: f64, k_plus: f64, beta_plus: f64, k_minus: f64, beta_minus: f64 },
}

impl LawSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Builds the law; `base_dir` anchors relative graph paths.
    pub fn build(&self, base_dir: &Path) -> Result<CycleLaw> {
        match self {
            LawSpec::Graph { graph_file } => {
                let path = if graph_file.is_absolute() { graph_file.clone() } else { base_dir.join(graph_file) };
                Ok(CycleLaw::graph(RatedCell::load(path)?))
            }
            LawSpec::Discrete { atoms } => CycleLaw::discrete(
                atoms.iter().map(|&(sign, duration, prob)| Atom { sign, duration, prob }).collect(),
            ),
            &LawSpec::Exponential { p, beta_plus, beta_minus } => CycleLaw::exponential(p, beta_plus, beta_minus),
            &LawSpec::Gamma { p, k_plus, beta_plus, k_minus, beta_minus } => {
                CycleLaw::gamma(p, k_plus, beta_plus, k_minus, beta_minus)
            }
        }
    }
}

/// Reads a law file. A file that is itself a graph spec (has `vertices`) is
/// accepted as a graph law directly.
pub fn load_law(path: impl AsRef<Path>) -> Result<CycleLaw> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("vertices").is_some() {
        let spec: crate::graph::GraphSpec = serde_json::from_value(value)?;
        return Ok(CycleLaw::graph(RatedCell::from_spec(&spec)?));
    }
    let spec: LawSpec = serde_json::from_value(value)?;
    spec.build(path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities_must_sum_to_one() {
        let atoms = vec![Atom { sign: 1, duration: 1.0, prob: 0.5 }, Atom { sign: -1, duration: 1.0, prob: 0.4 }];
        assert!(matches!(CycleLaw::discrete(atoms), Err(Error::InvalidLaw(_))));
    }

    #[test]
    fn both_signs_required_unless_waived() {
        let atoms = vec![Atom { sign: 1, duration: 1.0, prob: 1.0 }];
        assert!(CycleLaw::discrete(atoms.clone()).is_err());
        let law = CycleLaw::discrete_one_sided(atoms).unwrap();
        assert!(matches!(law.require_two_sided(), Err(Error::OneSidedLaw)));
    }

    #[test]
    fn parametric_parameters_are_checked() {
        assert!(CycleLaw::exponential(1.0, 1.0, 1.0).is_err());
        assert!(CycleLaw::exponential(0.5, 0.0, 1.0).is_err());
        assert!(CycleLaw::gamma(0.5, 1.0, 1.0, -2.0, 1.0).is_err());
        assert!(CycleLaw::gamma(0.5, 2.0, 1.0, 3.0, 1.5).is_ok());
    }

    #[test]
    fn law_spec_json_forms() {
        let specs = [
            r#"{"kind":"graph","graph_file":"cell.json"}"#,
            r#"{"kind":"discrete","atoms":[[1,2.0,0.5],[-1,1.0,0.5]]}"#,
            r#"{"kind":"exponential","p":0.5,"beta_plus":1.0,"beta_minus":2.0}"#,
            r#"{"kind":"gamma","p":0.3,"k_plus":2.0,"beta_plus":1.0,"k_minus":1.0,"beta_minus":3.0}"#,
        ];
        for s in specs {
            let spec = LawSpec::from_json(s).unwrap();
            let back = LawSpec::from_json(&serde_json::to_string(&spec).unwrap()).unwrap();
            assert_eq!(spec, back);
        }
        let d = LawSpec::from_json(specs[1]).unwrap().build(Path::new(".")).unwrap();
        assert!(matches!(d, CycleLaw::Discrete(_)));
    }
}
