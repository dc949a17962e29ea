//! Quantile nodes checked against an independent gamma implementation.
//!
//! The reversion measure has shape alpha and scale beta; the oracle takes a rate.

use statrs::distribution::{ContinuousCDF, Gamma};
use tsvar_core::reversion::{acf_theoretical, gamma_quantile};
use tsvar_core::{GammaReversionMeasure, Station};

#[test]
fn cdf_matches_independent_implementation() {
    for s in Station::ALL {
        let m = s.reversion();
        let density = m.density();
        let oracle = Gamma::new(m.alpha(), 1.0 / m.beta()).unwrap();
        for r in [1e-4, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0, 80.0] {
            let mine = density.cdf(r).unwrap();
            let theirs = oracle.cdf(r);
            assert!((mine - theirs).abs() < 1e-12, "{s} r={r}: {mine} vs {theirs}");
        }
    }
}

#[test]
fn quantiles_match_independent_implementation() {
    for (shape, scale) in [(1.67, 1.0 / 0.0544), (0.17, 2.0), (3.5, 0.3)] {
        let oracle = Gamma::new(shape, 1.0 / scale).unwrap();
        for p in [1e-9, 1e-4, 0.01, 0.25, 0.5, 0.75, 0.99, 1.0 - 1e-6] {
            let mine = gamma_quantile(shape, scale, p).unwrap();
            assert!((oracle.cdf(mine) - p).abs() <= 1e-10 * p.max(1e-2), "shape {shape} p {p}");
        }
    }
}

#[test]
fn nodes_sit_on_midpoint_probabilities() {
    let m = Station::Kazarashi.reversion();
    let n = 1 << 12;
    let d = m.discretize(n).unwrap();
    let oracle = Gamma::new(m.alpha(), 1.0 / m.beta()).unwrap();
    let worst = d
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &r)| (oracle.cdf(r) - (2 * i + 1) as f64 / (2 * n) as f64).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-10, "worst probability error {worst}");
}

#[test]
fn quadrature_inverse_moment_close_to_closed_form() {
    for s in Station::ALL {
        let m = s.reversion();
        let d = m.discretize(1 << 15).unwrap();
        let rel = (d.inverse_moment() - m.inverse_moment()).abs() / m.inverse_moment();
        assert!(rel < 0.01, "{s}: {rel}");
    }
}

#[test]
fn acf_decreasing_with_divergent_integral() {
    let m = GammaReversionMeasure::new(1.67, 0.0544).unwrap();
    let mut prev = 1.0;
    for t in 1..1000 {
        let v = acf_theoretical(&m, t as f64).unwrap();
        assert!(v < prev);
        prev = v;
    }
    // Trapezoid integrals over doubling horizons keep growing by a non-vanishing amount.
    let integral = |t_max: f64| {
        let steps = 20_000;
        let h = t_max / steps as f64;
        (0..steps)
            .map(|i| {
                let a = acf_theoretical(&m, i as f64 * h).unwrap();
                let b = acf_theoretical(&m, (i + 1) as f64 * h).unwrap();
                0.5 * h * (a + b)
            })
            .sum::<f64>()
    };
    let increments: Vec<f64> = (10..16).map(|k| integral(2f64.powi(k + 1)) - integral(2f64.powi(k))).collect();
    assert!(increments.windows(2).all(|w| w[1] > w[0]), "{increments:?}");
}
