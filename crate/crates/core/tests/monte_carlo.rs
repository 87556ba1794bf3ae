//! Sampled curves against the analytic ones.

use motorld::fixtures::*;
use motorld::law::CycleLaw;
use motorld::mc::{self, McConfig, Normalization};
use motorld::mgf;
use motorld::ratefn::{self, RateKind};

fn birth_death() -> CycleLaw {
    CycleLaw::graph(two_vertex(4.0, 1.0))
}

#[test]
fn bin_at_velocity_is_near_zero() {
    let law = birth_death();
    let t = 50.0;
    let emp =
        mc::empirical_rate_position(&law, t, 100_000, mc::default_bin_width(t), Normalization::Mode, &McConfig::new(1))
            .unwrap();
    let k = emp.abscissae.iter().position(|&x| (x - 3.0).abs() < 0.5 * emp.bin_width).unwrap();
    assert!(emp.estimates[k] < 0.02, "{}", emp.estimates[k]);
    // I(0) = 1 puts P(Z_50 = 0) near e^{-50}: no bin there at this sample size
    assert!(emp.abscissae.iter().all(|&x| x > 0.5));
}

#[test]
fn error_shrinks_as_horizon_doubles() {
    let law = birth_death();
    let grid: Vec<f64> = (0..=500).map(|k| 0.01 * k as f64).collect();
    let analytic = ratefn::rate_curve(&law, RateKind::I, &grid).unwrap();
    let mut errors = Vec::new();
    for t in [25.0, 50.0, 100.0] {
        let emp = mc::empirical_rate_position(
            &law,
            t,
            100_000,
            mc::default_bin_width(t),
            Normalization::Mode,
            &McConfig::new(3),
        )
        .unwrap();
        let rep = mc::compare_curves(&analytic, &emp).unwrap().restricted(2.0, 4.0).unwrap();
        let mean = rep.bins.iter().map(|b| (b.analytic.to_f64() - b.estimate).abs()).sum::<f64>() / rep.bins.len() as f64;
        errors.push(mean);
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn finite_hitting_matches_phi_at_zero() {
    for cell in [two_vertex(1.0, 4.0), tooth(), diamond()] {
        let law = CycleLaw::graph(cell);
        let phi = mgf::phi_pm(&law, 0.0).unwrap();
        let cfg = McConfig::new(11);
        for (level, want) in [(1, phi.plus.to_f64()), (-1, phi.minus.to_f64())] {
            let (p, se) = mc::finite_hitting_fraction(&law, level, 50_000, 200.0, &cfg).unwrap();
            assert!((p - want).abs() <= 3.0 * se.max(1e-4), "{} level {level}: {p} vs {want}", law.descriptor());
        }
    }
}

#[test]
fn hitting_curve_minimum_and_censoring() {
    let law = birth_death();
    let cfg = McConfig::new(5);
    let emp = mc::empirical_rate_hitting(&law, 20, 50_000, 100.0, 0.02, Normalization::Mode, &cfg).unwrap();
    let k = emp.argmin().unwrap();
    assert!((emp.abscissae[k] - 1.0 / 3.0).abs() < 0.05, "{}", emp.abscissae[k]);
    assert_eq!(emp.censored, 0);

    let rev = CycleLaw::graph(two_vertex(1.0, 4.0));
    // P(T₂₀ < ∞) = 4^{-20}: every draw is censored and no bin survives
    let (p, _) = mc::finite_hitting_fraction(&rev, 20, 2_000, 50.0, &cfg).unwrap();
    assert_eq!(p, 0.0);
    let err = mc::empirical_rate_hitting(&rev, 20, 2_000, 50.0, 0.02, Normalization::Raw, &cfg).unwrap_err();
    assert!(matches!(err, motorld::Error::InsufficientSamples(_)));
}

#[test]
fn same_seed_same_report() {
    let law = CycleLaw::graph(tooth());
    let run = |seed| {
        let emp = mc::empirical_rate_position(&law, 20.0, 5_000, 0.1, Normalization::Mode, &McConfig::new(seed)).unwrap();
        serde_json::to_string(&emp).unwrap()
    };
    assert_eq!(run(4), run(4));
    assert_ne!(run(4), run(5));
}
