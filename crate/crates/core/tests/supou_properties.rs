use tsvar_core::{GammaReversionMeasure, Station, SupOUModel};

#[test]
fn levy_moments_log_convex() {
    for s in Station::ALL {
        let m = s.model().levy_moments();
        for k in 1..3 {
            assert!(m[k] * m[k] <= m[k - 1] * m[k + 1], "{s} k={}", k + 1);
        }
    }
}

#[test]
fn statistics_scale_linearly_in_inverse_moment() {
    for s in Station::ALL {
        let base = s.model();
        let r = base.reversion;
        // Halving beta doubles 1/(beta (alpha-1)).
        let doubled = GammaReversionMeasure::new(r.alpha(), r.beta() / 2.0).unwrap();
        let other = SupOUModel::new(doubled, base.levy, base.shift()).unwrap();
        let (a, b) = (base.stationary_stats(), other.stationary_stats());
        let pairs = [
            (a.mean - base.shift(), b.mean - base.shift()),
            (a.variance, b.variance),
            (a.third_central, b.third_central),
            (a.fourth_cumulant, b.fourth_cumulant),
        ];
        for (x, y) in pairs {
            assert!((y / x - 2.0).abs() < 1e-12, "{s}: {x} -> {y}");
        }
    }
}

#[test]
fn shift_moves_only_the_mean() {
    let m = Station::Nakajima.model();
    let moved = m.with_shift(m.shift() + 3.0).unwrap();
    let (a, b) = (m.stationary_stats(), moved.stationary_stats());
    assert!((b.mean - a.mean - 3.0).abs() < 1e-12);
    assert_eq!(a.variance, b.variance);
    assert_eq!(a.kurt_normalized, b.kurt_normalized);
}

#[test]
fn quadrature_inverse_moment_changes_statistics_little() {
    for s in Station::ALL {
        let model = s.model();
        let exact = model.stationary_stats();
        let r_quad = model.reversion.discretize(1 << 15).unwrap().inverse_moment();
        let stats = tsvar_core::supou::stats_with_inverse_moment(&model.levy_moments(), r_quad, model.shift());
        assert!(((stats.variance - exact.variance) / exact.variance).abs() < 0.01, "{s}");
    }
}
