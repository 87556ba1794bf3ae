//! Analytic verdict, symmetry residual and the sampled independence test
//! must tell the same story.

use motorld::fixtures::*;
use motorld::gc::{self, Verdict};
use motorld::law::{Atom, CycleLaw};
use motorld::mgf;
use motorld::sim::{self, CycleSampler, CycleSample};

fn laws() -> Vec<CycleLaw> {
    let mut out: Vec<CycleLaw> = all_test_cells().into_iter().map(CycleLaw::graph).collect();
    out.push(CycleLaw::graph(diamond_uniform()));
    out.push(CycleLaw::exponential(0.6, 1.0, 2.0).unwrap());
    out.push(CycleLaw::exponential(0.3, 2.0, 2.0).unwrap());
    out.push(CycleLaw::gamma(0.5, 2.0, 1.0, 2.0, 1.0).unwrap());
    out.push(CycleLaw::gamma(0.5, 2.0, 1.0, 3.0, 1.5).unwrap());
    out.push(
        CycleLaw::discrete(vec![
            Atom { sign: 1, duration: 1.0, prob: 0.3 },
            Atom { sign: 1, duration: 2.0, prob: 0.3 },
            Atom { sign: -1, duration: 1.0, prob: 0.2 },
            Atom { sign: -1, duration: 2.0, prob: 0.2 },
        ])
        .unwrap(),
    );
    out.push(
        CycleLaw::discrete(vec![
            Atom { sign: 1, duration: 2.0, prob: 0.5 },
            Atom { sign: -1, duration: 1.0, prob: 0.5 },
        ])
        .unwrap(),
    );
    out
}

fn draw(law: &CycleLaw, n: usize, seed: u64) -> Vec<CycleSample> {
    let sampler = CycleSampler::new(law);
    let mut rng = sim::substream(seed, 0);
    (0..n).map(|_| sampler.sample(&mut rng).unwrap()).collect()
}

/// Below this deviation the sign/duration dependence is too weak for a
/// two-sample test on 10⁵ cycles to see.
const DETECTABLE: f64 = 0.05;

#[test]
fn verdict_residual_and_test_agree() {
    let mut held = 0;
    let mut failed = 0;
    let mut weak = Vec::new();
    for (k, law) in laws().iter().enumerate() {
        let name = law.descriptor();
        let rep = gc::gc_check_analytic(law, gc::DEFAULT_GRID, gc::DEFAULT_TOL).unwrap();
        match rep.verdict {
            Verdict::Holds => {
                held += 1;
                assert!(rep.symmetry_residual < 1e-6, "{name}: residual {:e}", rep.symmetry_residual);
                let p = mgf::sign_probabilities(law).unwrap();
                assert!((rep.c - (p.minus / p.plus).ln()).abs() < 1e-8, "{name}");
                let t = gc::independence_test(&draw(law, 10_000, k as u64), 0.01).unwrap();
                assert!(!t.reject, "{name}: p = {}", t.p_value);
            }
            Verdict::Fails => {
                failed += 1;
                assert!(rep.max_ratio_deviation > 10.0 * rep.tol);
                if rep.max_ratio_deviation < DETECTABLE {
                    weak.push(name);
                    continue;
                }
                let t = gc::independence_test(&draw(law, 100_000, k as u64), 0.01).unwrap();
                assert!(t.reject, "{name}: p = {} at deviation {:e}", t.p_value, rep.max_ratio_deviation);
            }
            Verdict::Inconclusive => panic!("{name}: inconclusive at deviation {:e}", rep.max_ratio_deviation),
        }
    }
    assert!(held >= 5 && failed >= 4, "held {held}, failed {failed}");
    assert_eq!(weak, vec![CycleLaw::graph(diamond()).descriptor()]);
}

/// The pinned diamond fails the analytic check at deviation ~9e-3, yet KS on
/// 10⁵ cycles does not reject (p ≈ 0.5–0.8 across seeds); rejection at 1%
/// needs a few million cycles.
#[test]
#[ignore = "fails: dependence too weak to detect at 1e5 cycles"]
fn weak_dependence_rejected_at_1e5() {
    let law = CycleLaw::graph(diamond());
    let t = gc::independence_test(&draw(&law, 100_000, 0), 0.01).unwrap();
    assert!(t.reject, "p = {}", t.p_value);
}

#[test]
fn prediction_matches_analytic_verdict_on_graphs() {
    for cell in [two_vertex(4.0, 1.0), three_chain(), tooth(), diamond(), diamond_uniform()] {
        let pred = gc::gc_predict(&cell).unwrap();
        let rep = gc::gc_check_analytic(&CycleLaw::graph(cell.clone()), gc::DEFAULT_GRID, gc::DEFAULT_TOL).unwrap();
        match pred.prediction {
            gc::Prediction::Holds => {
                assert_eq!(rep.verdict, Verdict::Holds);
                assert!((rep.c + pred.delta.unwrap()).abs() < 1e-8);
            }
            // the uniform diamond sits on the null set where symmetry survives
            gc::Prediction::GenericallyFails => {}
        }
    }
    let fixed = gc::gc_check_analytic(&CycleLaw::graph(diamond()), gc::DEFAULT_GRID, gc::DEFAULT_TOL).unwrap();
    assert_eq!(fixed.verdict, Verdict::Fails);
    assert!(fixed.tilde_ratio_deviation.unwrap() > 1e-4);
}
