use std::io::Write;

use chrono::{NaiveDateTime, TimeDelta};
use tsvar_core::identify::{
    empirical_acf, empirical_moments, fit_levy, fit_reversion, load_series, parse_series, positive_lag_cutoff,
    EmpiricalMoments, TimeSeries,
};
use tsvar_core::{Error, GammaReversionMeasure, Station};

fn t0() -> NaiveDateTime {
    NaiveDateTime::parse_from_str("2019-06-01T00:00:00", "%Y-%m-%dT%H:%M:%S").unwrap()
}

fn hourly(values: Vec<f64>) -> TimeSeries {
    let ts = (0..values.len()).map(|i| t0() + TimeDelta::hours(i as i64)).collect();
    TimeSeries::new(ts, values).unwrap()
}

fn wavy(n: usize) -> Vec<f64> {
    (0..n).map(|i| 10.0 + (i as f64 * 0.05).sin() * 3.0 + (i as f64 * 0.31).cos()).collect()
}

#[test]
fn reversion_fit_is_scale_covariant() {
    let truth = GammaReversionMeasure::new(1.67, 0.0544).unwrap();
    let base: Vec<f64> = (0..=500).map(|t| truth.acf(t as f64).unwrap()).collect();
    let fitted = fit_reversion(&base, 500).unwrap();
    let k = 2.0;
    // Dilating the lag axis by k: the sample at lag t is the original at t/k.
    let dilated: Vec<f64> = (0..=1000).map(|t| truth.acf(t as f64 / k).unwrap()).collect();
    let stretched = fit_reversion(&dilated, 1000).unwrap();
    assert!((stretched.alpha() - fitted.alpha()).abs() < 1e-6);
    assert!((stretched.beta() - fitted.beta() / k).abs() < 1e-6);
    assert!((fitted.alpha() - 1.67).abs() < 1e-6 && (fitted.beta() - 0.0544).abs() < 1e-6);
}

#[test]
fn acf_invariant_under_positive_affine_maps() {
    let ts = hourly(wavy(2000));
    let moved = ts.map_values(|v| 3.5 * v + 12.0).unwrap();
    let (a, b) = (empirical_acf(&ts, 200).unwrap(), empirical_acf(&moved, 200).unwrap());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn cutoff_bounded_by_max_lag() {
    let ts = hourly(wavy(3000));
    for max_lag in [5, 50, 400] {
        let acf = empirical_acf(&ts, max_lag).unwrap();
        let c = positive_lag_cutoff(&acf);
        assert!(c <= max_lag);
        assert_eq!(c == 0, acf[1] <= 0.0);
    }
}

#[test]
fn alternating_series_has_lag_one_near_minus_one() {
    let ts = hourly((0..2000).map(|i| if i % 2 == 0 { 1.0 } else { 3.0 }).collect());
    let acf = empirical_acf(&ts, 1).unwrap();
    assert!((acf[1] + 1.0).abs() < 2e-3);
}

#[test]
fn affine_shift_changes_only_mean_and_minimum() {
    let ts = hourly(wavy(500));
    let moved = ts.map_values(|v| v + 4.0).unwrap();
    let (a, b) = (empirical_moments(&ts).unwrap(), empirical_moments(&moved).unwrap());
    assert!((b.mean - a.mean - 4.0).abs() < 1e-12);
    assert!((b.min_value - a.min_value - 4.0).abs() < 1e-12);
    assert!((b.variance - a.variance).abs() < 1e-10 * a.variance);
    assert!((b.skew_normalized - a.skew_normalized).abs() < 1e-9);
}

#[test]
fn loads_files_and_flags_gaps() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "timestamp,discharge\n2020-01-01T00:00:00,1.5\n2020-01-01T01:00:00,2.0\n2020-01-01T02:00:00,2.5")
        .unwrap();
    let ts = load_series(f.path()).unwrap();
    assert_eq!(ts.len(), 3);
    assert!(!ts.has_gaps());

    let mut rows = String::from("timestamp,discharge\n");
    for h in (0..40).filter(|&h| h != 17) {
        rows += &format!("{},{}\n", (t0() + TimeDelta::hours(h)).format("%Y-%m-%dT%H:%M:%S"), 1.0 + h as f64);
    }
    let ts = parse_series(rows.as_bytes()).unwrap();
    assert_eq!(ts.len(), 39);
    assert!(ts.has_gaps());
    assert_eq!(ts.gaps()[0].missing, 1);
}

#[test]
fn negative_discharge_names_the_row() {
    let csv = "timestamp,discharge\n2020-01-01T00:00:00,1.0\n2020-01-01T01:00:00,-2.0\n";
    match parse_series(csv.as_bytes()) {
        Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn large_gaps_are_rejected() {
    let mut rows = String::from("timestamp,discharge\n");
    for h in (0..100).filter(|h| !(40..50).contains(h)) {
        rows += &format!("{},1.0\n", (t0() + TimeDelta::hours(h)).format("%Y-%m-%d %H:%M:%S"));
    }
    assert!(matches!(parse_series(rows.as_bytes()), Err(Error::Grid(_))));
}

#[test]
fn constant_series_is_degenerate() {
    let ts = hourly(vec![5.0; 50]);
    assert!(matches!(empirical_acf(&ts, 3), Err(Error::Degenerate(_))));
    assert!(matches!(empirical_moments(&ts), Err(Error::Degenerate(_))));
}

#[test]
fn exact_moments_are_reproduced_for_every_station() {
    for s in Station::ALL {
        let model = s.model();
        let emp = EmpiricalMoments::from_stats(&model.stationary_stats(), model.shift());
        let fit = fit_levy(&emp, &model.reversion).unwrap();
        let worst = fit.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        assert!(worst <= 1e-8, "{s}: {:?}", fit.residuals);
    }
}

#[test]
fn observed_kazarashi_moments_fit_close_to_reported_fit() {
    let s = Station::Kazarashi;
    let obs = s.observed_moments();
    let (shift, ..) = s.parameters();
    let emp = EmpiricalMoments {
        mean: obs.mean,
        variance: obs.variance,
        skew_normalized: obs.skewness,
        kurt_normalized: obs.kurtosis,
        min_value: shift,
    };
    let fit = fit_levy(&emp, &s.reversion()).unwrap();
    let model = tsvar_core::SupOUModel::new(s.reversion(), fit.levy, fit.shift).unwrap();
    let err = s.fitted_moments().max_relative_error(&model.stationary_stats());
    assert!(err <= 0.03, "max relative deviation from the reported fit {err}");
}
