use tsvar_core::solver::{discrete_tail_mass, run_descent, DescentOptions};
use tsvar_core::{descend, Scheme, ShapeParameter, Side, Station, TsVaRProblem};

fn q(v: f64) -> ShapeParameter {
    ShapeParameter::new(v).unwrap()
}

fn problem(side: Side, a: f64, n: usize) -> TsVaRProblem {
    let scheme = if side == Side::Upper { Scheme::Tilted } else { Scheme::Plain };
    TsVaRProblem::new(Station::Kazarashi.reversion(), side, q(side.default_q()), a, n, scheme).unwrap()
}

#[test]
fn tail_mass_respects_chernoff_bound() {
    for side in [Side::Upper, Side::Lower] {
        for a in [0.6, 0.8, 0.99] {
            let p = problem(side, a, 1 << 13);
            let g = descend(&p).unwrap().value;
            // Tail event of the reference measure, not of the tilted quadrature.
            let plain = Station::Kazarashi.reversion().discretize(1 << 13).unwrap();
            let mass = discrete_tail_mass(&plain, g, side);
            assert!(mass <= a, "{side} a={a}: tail mass {mass}");
        }
    }
}

#[test]
fn upper_objective_strictly_convex_on_log_grid() {
    let p = problem(Side::Upper, 0.9, 1 << 13);
    let lambdas: Vec<f64> = (0..=30).map(|i| 10f64.powf(1.0 + 3.0 * i as f64 / 30.0)).collect();
    let f: Vec<f64> = lambdas.iter().map(|&l| p.objective(l).unwrap()).collect();
    for i in 1..lambdas.len() - 1 {
        let left = (f[i] - f[i - 1]) / (lambdas[i] - lambdas[i - 1]);
        let right = (f[i + 1] - f[i]) / (lambdas[i + 1] - lambdas[i]);
        assert!(right > left, "lambda {}", lambdas[i]);
    }
}

#[test]
fn iterates_stay_positive_for_any_step() {
    for side in [Side::Upper, Side::Lower] {
        let p = problem(side, 0.9, 1 << 12);
        for du in [1.0, 1e4, 1e8] {
            let mut lambda = 500.0;
            for _ in 0..200 {
                lambda = p.gradient_terms(lambda).unwrap().step(lambda, du);
                assert!(lambda > 0.0 && lambda.is_finite(), "{side} du={du}");
            }
        }
    }
}

#[test]
fn schemes_approach_each_other_with_resolution() {
    let gap = |m: u32| {
        let m_ = Station::Kazarashi.reversion();
        let plain = TsVaRProblem::new(m_, Side::Upper, q(0.33), 0.99, 1 << m, Scheme::Plain).unwrap();
        let tilted = TsVaRProblem::new(m_, Side::Upper, q(0.33), 0.99, 1 << m, Scheme::Tilted).unwrap();
        (descend(&tilted).unwrap().value - descend(&plain).unwrap().value).abs()
    };
    let (coarse, fine) = (gap(12), gap(15));
    assert!(fine < coarse, "{coarse} -> {fine}");
}

#[test]
fn lower_values_stable_across_resolution() {
    let p12 = problem(Side::Lower, 0.99, 1 << 12);
    let p15 = problem(Side::Lower, 0.99, 1 << 15);
    for lambda in [0.5, 1.0, 4.0] {
        let a = p12.objective(lambda).unwrap();
        let b = p15.objective(lambda).unwrap();
        assert!(((a - b) / b).abs() < 1e-3, "lambda {lambda}: {a} vs {b}");
    }
}

#[test]
fn unit_accuracy_returns_mean_inverse_rate() {
    let p = problem(Side::Upper, 1.0, 1 << 12);
    let s = descend(&p).unwrap();
    assert_eq!(s.value, p.quadrature().inverse_moment());
    assert!(s.lambda_star.is_infinite());
}

#[test]
fn iteration_cap_is_reported() {
    let p = problem(Side::Upper, 0.9, 1 << 12);
    let opts = DescentOptions { max_iterations: 3, ..DescentOptions::default() };
    let s = run_descent(&p, &opts).unwrap();
    assert!(!s.converged);
    assert_eq!(s.iterations, 3);
}
