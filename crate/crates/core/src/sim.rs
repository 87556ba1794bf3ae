//! Exact event-driven simulation of the lattice walk, its skeleton, and the
//! cumulative process built from i.i.d. regeneration steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LatticeVertex, RatedCell};
use crate::law::{Atom, CycleLaw};

pub type SimRng = ChaCha8Rng;

/// Default cap on jumps per simulation call.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

/// Independent stream `index` of the master `seed`.
pub fn substream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSample {
    pub sign: i8,
    pub duration: f64,
}

/// Jump tables of the lattice walk, relative to the current cell.
#[derive(Debug, Clone)]
pub struct CompiledWalk {
    source: usize,
    /// Per vertex name: `(target name, cell offset, cumulative rate)`.
    moves: Vec<Vec<(usize, i64, f64)>>,
    exit: Vec<f64>,
}

impl CompiledWalk {
    pub fn new(cell: &RatedCell) -> Self {
        let g = cell.graph();
        let n = g.vertex_count();
        let mut moves = vec![Vec::new(); n];
        let mut exit = vec![0.0; n];
        for v in (0..n).filter(|&v| v != g.sink()) {
            let mut acc = 0.0;
            for (y, r) in cell.lattice_out_edges(LatticeVertex::new(v, 0)) {
                acc += r;
                moves[v].push((y.name, y.cell, acc));
            }
            exit[v] = acc;
        }
        CompiledWalk { source: g.source(), moves, exit }
    }

    /// One exact jump: returns the holding time and the new vertex.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, x: LatticeVertex, rng: &mut R) -> (f64, LatticeVertex) {
        let total = self.exit[x.name];
        let hold = -(1.0 - rng.random::<f64>()).ln() / total;
        let u = rng.random::<f64>() * total;
        let table = &self.moves[x.name];
        let k = table.iter().position(|m| u < m.2).unwrap_or(table.len() - 1);
        let (name, off, _) = table[k];
        (hold, LatticeVertex::new(name, x.cell + off))
    }

    pub fn is_gate(&self, x: LatticeVertex) -> bool {
        x.name == self.source
    }

    pub fn gate(&self, cell: i64) -> LatticeVertex {
        LatticeVertex::new(self.source, cell)
    }

    /// Runs from gate 0 to the first of gates ±1.
    pub fn sample_cycle<R: Rng + ?Sized>(&self, rng: &mut R, step_cap: u64) -> Result<CycleSample> {
        let mut x = self.gate(0);
        let mut t = 0.0;
        for _ in 0..step_cap {
            let (h, y) = self.step(x, rng);
            t += h;
            x = y;
            if x.name == self.source && x.cell != 0 {
                return Ok(CycleSample { sign: x.cell.signum() as i8, duration: t });
            }
        }
        Err(Error::RunawaySimulation { cap: step_cap })
    }
}

/// Precomputed sampler for one regeneration step of a law.
#[derive(Debug, Clone)]
pub enum CycleSampler<'a> {
    Graph { walk: &'a CompiledWalk, step_cap: u64 },
    Scan(&'a [Atom]),
    Alias { atoms: &'a [Atom], table: WeightedAliasIndex<f64> },
    Exponential { p: f64, plus: Exp<f64>, minus: Exp<f64> },
    Gamma { p: f64, plus: Gamma<f64>, minus: Gamma<f64> },
}

const ALIAS_THRESHOLD: usize = 16;

impl<'a> CycleSampler<'a> {
    pub fn new(law: &'a CycleLaw) -> Self {
        Self::with_step_cap(law, DEFAULT_STEP_CAP)
    }

    pub fn with_step_cap(law: &'a CycleLaw, step_cap: u64) -> Self {
        match law {
            CycleLaw::Graph(g) => CycleSampler::Graph { walk: g.walk(), step_cap },
            CycleLaw::Discrete(d) if d.atoms().len() > ALIAS_THRESHOLD => {
                let weights: Vec<f64> = d.atoms().iter().map(|a| a.prob).collect();
                CycleSampler::Alias {
                    atoms: d.atoms(),
                    table: WeightedAliasIndex::new(weights).expect("validated weights"),
                }
            }
            CycleLaw::Discrete(d) => CycleSampler::Scan(d.atoms()),
            &CycleLaw::Exponential { p, beta_plus, beta_minus } => CycleSampler::Exponential {
                p,
                plus: Exp::new(beta_plus).expect("validated rate"),
                minus: Exp::new(beta_minus).expect("validated rate"),
            },
            &CycleLaw::Gamma { p, k_plus, beta_plus, k_minus, beta_minus } => CycleSampler::Gamma {
                p,
                plus: Gamma::new(k_plus, 1.0 / beta_plus).expect("validated shape"),
                minus: Gamma::new(k_minus, 1.0 / beta_minus).expect("validated shape"),
            },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CycleSample> {
        let pick = |a: &Atom| CycleSample { sign: a.sign, duration: a.duration };
        Ok(match self {
            CycleSampler::Graph { walk, step_cap } => return walk.sample_cycle(rng, *step_cap),
            CycleSampler::Scan(atoms) => {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                let mut chosen = atoms[atoms.len() - 1];
                for a in atoms.iter() {
                    acc += a.prob;
                    if u < acc {
                        chosen = *a;
                        break;
                    }
                }
                pick(&chosen)
            }
            CycleSampler::Alias { atoms, table } => pick(&atoms[table.sample(rng)]),
            CycleSampler::Exponential { p, plus, minus } => {
                if rng.random::<f64>() < *p {
                    CycleSample { sign: 1, duration: plus.sample(rng) }
                } else {
                    CycleSample { sign: -1, duration: minus.sample(rng) }
                }
            }
            CycleSampler::Gamma { p, plus, minus } => {
                if rng.random::<f64>() < *p {
                    CycleSample { sign: 1, duration: plus.sample(rng) }
                } else {
                    CycleSample { sign: -1, duration: minus.sample(rng) }
                }
            }
        })
    }

    /// `Z_t`: position of the cumulative process at time `t`.
    pub fn sample_position<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<i64> {
        let mut clock = 0.0;
        let mut pos = 0i64;
        loop {
            let c = self.sample(rng)?;
            clock += c.duration;
            if clock > t {
                return Ok(pos);
            }
            pos += c.sign as i64;
        }
    }

    pub fn sample_hitting_time<R: Rng + ?Sized>(&self, level: i64, rng: &mut R, t_cap: f64) -> Result<HittingResult> {
        let mut clock = 0.0;
        let mut pos = 0i64;
        loop {
            let c = self.sample(rng)?;
            clock += c.duration;
            if clock > t_cap {
                return Ok(HittingResult::Censored);
            }
            pos += c.sign as i64;
            if pos == level {
                return Ok(HittingResult::Finite(clock));
            }
        }
    }
}

/// One regeneration step drawn from `law`.
pub fn sample_cycle<R: Rng + ?Sized>(law: &CycleLaw, rng: &mut R) -> Result<CycleSample> {
    CycleSampler::new(law).sample(rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub jumps: Vec<(f64, LatticeVertex)>,
    pub horizon: f64,
}

/// Exact path of the lattice walk from gate 0 on `[0, t_max]`.
pub fn simulate_trajectory<R: Rng + ?Sized>(cell: &RatedCell, t_max: f64, rng: &mut R) -> Result<Trajectory> {
    simulate_trajectory_capped(cell, t_max, rng, DEFAULT_STEP_CAP)
}

pub fn simulate_trajectory_capped<R: Rng + ?Sized>(
    cell: &RatedCell,
    t_max: f64,
    rng: &mut R,
    step_cap: u64,
) -> Result<Trajectory> {
    if !(t_max >= 0.0) {
        return Err(Error::DomainError(format!("t_max must be >= 0, got {t_max}")));
    }
    let walk = CompiledWalk::new(cell);
    let mut x = walk.gate(0);
    let mut t = 0.0;
    let mut jumps = vec![(0.0, x)];
    let mut steps = 0u64;
    loop {
        let (h, y) = walk.step(x, rng);
        if t + h > t_max {
            break;
        }
        steps += 1;
        if steps > step_cap {
            return Err(Error::RunawaySimulation { cap: step_cap });
        }
        t += h;
        x = y;
        jumps.push((t, x));
    }
    Ok(Trajectory { jumps, horizon: t_max })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonPath {
    pub points: Vec<(f64, i64)>,
}

impl SkeletonPath {
    /// `X*_t`: the last gate visited up to `t`.
    pub fn value_at(&self, t: f64) -> i64 {
        let k = self.points.partition_point(|p| p.0 <= t);
        self.points[k.saturating_sub(1)].1
    }

    pub fn values(&self) -> Vec<i64> {
        self.points.iter().map(|p| p.1).collect()
    }
}

/// Gate visits of `traj` as integers; repeated visits of the same gate
/// without an intervening different gate are dropped.
pub fn skeleton(cell: &RatedCell, traj: &Trajectory) -> SkeletonPath {
    let first = traj.jumps.first().expect("trajectory is never empty");
    assert!(cell.is_gate(first.1), "trajectory must start at a gate");
    let mut points = vec![(first.0, first.1.cell)];
    for &(t, x) in &traj.jumps[1..] {
        if cell.is_gate(x) && x.cell != points.last().unwrap().1 {
            points.push((t, x.cell));
        }
    }
    SkeletonPath { points }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HittingResult {
    Finite(f64),
    Censored,
}

impl HittingResult {
    pub fn time(self) -> Option<f64> {
        match self {
            HittingResult::Finite(t) => Some(t),
            HittingResult::Censored => None,
        }
    }
}

/// First time the cumulative process reaches `level`, censored at `t_cap`.
pub fn sample_hitting_time<R: Rng + ?Sized>(law: &CycleLaw, level: i64, rng: &mut R, t_cap: f64) -> Result<HittingResult> {
    if level == 0 {
        return Err(Error::DomainError("hitting level must be nonzero".into()));
    }
    if !(t_cap > 0.0) {
        return Err(Error::DomainError("t_cap must be > 0".into()));
    }
    CycleSampler::new(law).sample_hitting_time(level, rng, t_cap)
}

/// Partial sums `W_m`, `𝒯_m` of i.i.d. regeneration steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeTrajectory {
    pub positions: Vec<i64>,
    pub times: Vec<f64>,
}

impl CumulativeTrajectory {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// `ν(t) = max { m : 𝒯_m ≤ t }`.
    pub fn renewal_count(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) || t > self.horizon() {
            return Err(Error::OutOfHorizon { t, horizon: self.horizon() });
        }
        Ok(self.times.partition_point(|&s| s <= t) - 1)
    }

    /// `Z_t = W_{ν(t)}`.
    pub fn z_at(&self, t: f64) -> Result<i64> {
        Ok(self.positions[self.renewal_count(t)?])
    }
}

pub fn sample_cumulative<R: Rng + ?Sized>(law: &CycleLaw, n_cycles: usize, rng: &mut R) -> Result<CumulativeTrajectory> {
    if n_cycles == 0 {
        return Err(Error::DomainError("n_cycles must be >= 1".into()));
    }
    let sampler = CycleSampler::new(law);
    let mut positions = Vec::with_capacity(n_cycles + 1);
    let mut times = Vec::with_capacity(n_cycles + 1);
    positions.push(0);
    times.push(0.0);
    for _ in 0..n_cycles {
        let c = sampler.sample(rng)?;
        positions.push(positions.last().unwrap() + c.sign as i64);
        times.push(times.last().unwrap() + c.duration);
    }
    Ok(CumulativeTrajectory { positions, times })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;

    fn ladder() -> CycleLaw {
        CycleLaw::discrete_one_sided(vec![Atom { sign: 1, duration: 1.0, prob: 1.0 }]).unwrap()
    }

    #[test]
    fn same_seed_same_output() {
        let law = CycleLaw::graph(tooth());
        let a = sample_cumulative(&law, 500, &mut substream(7, 3)).unwrap();
        let b = sample_cumulative(&law, 500, &mut substream(7, 3)).unwrap();
        let c = sample_cumulative(&law, 500, &mut substream(7, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn discrete_atoms_keep_their_pairing() {
        let atoms = vec![Atom { sign: 1, duration: 2.0, prob: 0.5 }, Atom { sign: -1, duration: 1.0, prob: 0.5 }];
        let law = CycleLaw::discrete(atoms).unwrap();
        let mut rng = substream(1, 0);
        for _ in 0..1000 {
            let c = sample_cycle(&law, &mut rng).unwrap();
            assert_eq!(c.duration, if c.sign == 1 { 2.0 } else { 1.0 });
        }
    }

    #[test]
    fn alias_path_matches_probabilities() {
        let atoms: Vec<Atom> = (0..20)
            .map(|i| Atom { sign: if i % 2 == 0 { 1 } else { -1 }, duration: 1.0 + i as f64, prob: 0.05 })
            .collect();
        let law = CycleLaw::discrete(atoms).unwrap();
        let sampler = CycleSampler::new(&law);
        assert!(matches!(sampler, CycleSampler::Alias { .. }));
        let mut rng = substream(2, 0);
        let n = 200_000;
        let plus = (0..n).filter(|_| sampler.sample(&mut rng).unwrap().sign == 1).count();
        let p = plus as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt() * 1.5);
    }

    #[test]
    fn zero_horizon_trajectory_has_only_the_start() {
        let c = tooth();
        let tr = simulate_trajectory(&c, 0.0, &mut substream(3, 0)).unwrap();
        assert_eq!(tr.jumps, vec![(0.0, c.gate(0))]);
    }

    #[test]
    fn trajectory_moves_along_lattice_edges() {
        for c in all_test_cells() {
            let tr = simulate_trajectory(&c, 50.0, &mut substream(4, 0)).unwrap();
            for w in tr.jumps.windows(2) {
                assert!(w[1].0 > w[0].0);
                let targets = c.lattice_out_edges(w[0].1);
                assert!(targets.iter().any(|(y, _)| *y == w[1].1));
            }
        }
    }

    #[test]
    fn step_cap_raises_runaway() {
        let c = tooth();
        let r = simulate_trajectory_capped(&c, 1e6, &mut substream(5, 0), 10);
        assert!(matches!(r, Err(Error::RunawaySimulation { cap: 10 })));
    }

    #[test]
    fn interior_only_trajectory_keeps_skeleton_at_zero() {
        let c = three_chain();
        let m = c.graph().vertex("m").unwrap();
        let traj = Trajectory { jumps: vec![(0.0, c.gate(0)), (0.3, LatticeVertex::new(m, 0))], horizon: 1.0 };
        assert_eq!(skeleton(&c, &traj).values(), vec![0]);
    }

    #[test]
    fn skeleton_hand_trace() {
        // u0 m0 u0 m0 u1
        let c = three_chain();
        let m = c.graph().vertex("m").unwrap();
        let traj = Trajectory {
            jumps: vec![
                (0.0, c.gate(0)),
                (0.1, LatticeVertex::new(m, 0)),
                (0.2, c.gate(0)),
                (0.3, LatticeVertex::new(m, 0)),
                (0.4, c.gate(1)),
            ],
            horizon: 1.0,
        };
        let sk = skeleton(&c, &traj);
        assert_eq!(sk.values(), vec![0, 1]);
        assert_eq!(sk.points[1].0, 0.4);
        assert_eq!(sk.value_at(0.39), 0);
        assert_eq!(sk.value_at(0.5), 1);
    }

    #[test]
    fn two_vertex_skeleton_equals_trajectory() {
        let c = two_vertex(4.0, 1.0);
        let tr = simulate_trajectory(&c, 20.0, &mut substream(6, 0)).unwrap();
        let sk = skeleton(&c, &tr);
        let cells: Vec<i64> = tr.jumps.iter().map(|j| j.1.cell).collect();
        assert_eq!(sk.values(), cells);
        for w in sk.points.windows(2) {
            assert_eq!((w[1].1 - w[0].1).abs(), 1);
        }
    }

    #[test]
    fn deterministic_ladder_hits_three_at_three() {
        let law = ladder();
        let r = sample_hitting_time(&law, 3, &mut substream(0, 0), 100.0).unwrap();
        assert_eq!(r, HittingResult::Finite(3.0));
        assert!(sample_hitting_time(&law, 0, &mut substream(0, 0), 1.0).is_err());
    }

    #[test]
    fn cumulative_ladder_and_horizon() {
        let law = ladder();
        let ct = sample_cumulative(&law, 5, &mut substream(0, 0)).unwrap();
        assert_eq!(ct.positions, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(ct.times, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(ct.z_at(2.5).unwrap(), 2);
        assert_eq!(ct.z_at(5.0).unwrap(), 5);
        assert!(matches!(ct.z_at(5.1), Err(Error::OutOfHorizon { .. })));
    }

    #[test]
    fn censoring_is_surfaced() {
        let law = CycleLaw::graph(two_vertex(1.0, 4.0));
        let mut rng = substream(8, 0);
        let censored = (0..200)
            .filter(|_| sample_hitting_time(&law, 5, &mut rng, 1e3).unwrap() == HittingResult::Censored)
            .count();
        // P(T_5 < ∞) = 4^-5
        assert!(censored >= 195);
    }
}
