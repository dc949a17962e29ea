use proptest::prelude::*;
use tsvar_core::{q_exp, q_log, tsallis_divergence, DiscreteDensity, ShapeParameter};

const SHAPES: [f64; 4] = [0.33, 1.0, 1.33, 2.0];

fn q(v: f64) -> ShapeParameter {
    ShapeParameter::new(v).unwrap()
}

/// Upper end of the q-exponential domain for q > 1.
fn domain_end(qv: f64) -> f64 {
    if qv > 1.0 {
        1.0 / (qv - 1.0)
    } else {
        f64::INFINITY
    }
}

/// Lower end of the q-exponential domain for q < 1.
fn domain_start(qv: f64) -> f64 {
    if qv < 1.0 {
        -1.0 / (1.0 - qv)
    } else {
        f64::NEG_INFINITY
    }
}

proptest! {
    #[test]
    fn log_inverts_exp(x in -20.0f64..20.0, idx in 0usize..4) {
        let qv = SHAPES[idx];
        prop_assume!(x < domain_end(qv) - 1e-3 && x > domain_start(qv) + 1e-3);
        let e = q_exp(x, q(qv)).unwrap();
        prop_assume!(e > 1e-200);
        let back = q_log(e, q(qv)).unwrap();
        prop_assert!((back - x).abs() <= 1e-12 * (1.0 + x.abs()), "q={qv} x={x} back={back}");
    }

    #[test]
    fn exp_is_increasing(x in -10.0f64..10.0, dx in 1e-6f64..1.0, idx in 0usize..4) {
        let qv = SHAPES[idx];
        prop_assume!(x + dx < domain_end(qv) && x > domain_start(qv));
        let lo = q_exp(x, q(qv)).unwrap();
        let hi = q_exp(x + dx, q(qv)).unwrap();
        prop_assume!(hi > 0.0);
        prop_assert!(hi > lo);
    }

    #[test]
    fn log_is_increasing(x in 1e-6f64..1e6, ratio in 1.0001f64..10.0, idx in 0usize..4) {
        let qq = q(SHAPES[idx]);
        prop_assert!(q_log(x * ratio, qq).unwrap() > q_log(x, qq).unwrap());
    }

    #[test]
    fn divergence_is_nonnegative(raw in prop::collection::vec(0.01f64..10.0, 2..40), idx in 0usize..4) {
        let phi = DiscreteDensity::normalized(raw).unwrap();
        let h = tsallis_divergence(&phi, q(SHAPES[idx])).unwrap();
        prop_assert!(h >= -1e-14, "H = {h}");
    }
}

#[test]
fn classical_limit() {
    for qv in [1.0 - 1e-6, 1.0 + 1e-6] {
        for i in 0..=100 {
            let x = -5.0 + 0.1 * i as f64;
            let got = q_exp(x, q(qv)).unwrap();
            assert!((got - x.exp()).abs() <= 1e-4 * x.exp(), "q={qv} x={x}");
        }
    }
}

#[test]
fn exp_convex_and_log_concave_on_grids() {
    for qv in SHAPES {
        let qq = q(qv);
        let h = 0.05;
        for i in 1..150 {
            let x = -4.0 + h * i as f64;
            if x - h <= domain_start(qv) {
                continue;
            }
            if x + h >= domain_end(qv) {
                break;
            }
            let second = q_exp(x + h, qq).unwrap() - 2.0 * q_exp(x, qq).unwrap() + q_exp(x - h, qq).unwrap();
            assert!(second >= -1e-12, "q={qv} x={x}");
        }
        for i in 1..200 {
            let x = 0.05 * i as f64;
            let second = q_log(x + 0.01, qq).unwrap() - 2.0 * q_log(x, qq).unwrap() + q_log(x - 0.01, qq).unwrap();
            assert!(second <= 1e-12, "q={qv} x={x}");
        }
    }
}

#[test]
fn divergence_vanishes_only_at_identity() {
    for qv in SHAPES {
        let one = DiscreteDensity::uniform(7);
        assert!(tsallis_divergence(&one, q(qv)).unwrap().abs() < 1e-15);
        let bumped = DiscreteDensity::normalized(vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.001]).unwrap();
        assert!(tsallis_divergence(&bumped, q(qv)).unwrap() > 0.0);
    }
}
