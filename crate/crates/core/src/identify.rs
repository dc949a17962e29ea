//! Hourly discharge records and two-stage model identification.
//!
//! Stage one fits `(alpha, beta)` of the Gamma reversion measure to the
//! empirical autocorrelation up to the last positive lag; stage two fits the
//! tempered stable Lévy parameters and the minimum-discharge shift so that the
//! stationary mean, variance, skewness and kurtosis match the record.

use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, TimeDelta};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{minimize, NelderMeadOptions};
use crate::reversion::GammaReversionMeasure;
use crate::special::ln_gamma;
use crate::supou::{stats_with_inverse_moment, StationaryStats, SupOUModel, TemperedStableLevy};

/// Largest tolerated share of missing hours.
pub const MAX_GAP_FRACTION: f64 = 0.05;
/// Lag horizon used by [`fit_series`] when none is given: one year of hours.
pub const DEFAULT_MAX_LAG: usize = 24 * 365;
/// `alpha - 1` below this counts as pinned to the boundary.
pub const ALPHA_FLOOR: f64 = 1e-6;

/// A run of missing hours: `missing` hours are absent right after observation `after`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub after: usize,
    pub missing: usize,
}

/// Discharge observations on an hourly grid, possibly with flagged gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    timestamps: Vec<NaiveDateTime>,
    values: Vec<f64>,
    /// Hour offset of every observation from the first one.
    offsets: Vec<usize>,
    gaps: Vec<Gap>,
}

impl TimeSeries {
    /// Validates spacing and values. Timestamps must be strictly increasing
    /// whole hours apart; gaps are recorded, and rejected beyond 5% of the span.
    pub fn new(timestamps: Vec<NaiveDateTime>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::Alignment { expected: timestamps.len(), found: values.len() });
        }
        if values.is_empty() {
            return Err(Error::Parse { row: 0, message: "no observations".into() });
        }
        for (i, v) in values.iter().enumerate() {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("discharge must be a non-negative number, got {v}"),
                });
            }
        }
        let hour = TimeDelta::hours(1);
        let mut offsets = Vec::with_capacity(values.len());
        let mut gaps = Vec::new();
        offsets.push(0usize);
        for i in 1..timestamps.len() {
            let dt = timestamps[i] - timestamps[i - 1];
            if dt <= TimeDelta::zero() {
                return Err(Error::Grid(format!(
                    "timestamps not strictly increasing at observation {} ({} after {})",
                    i + 1,
                    timestamps[i],
                    timestamps[i - 1]
                )));
            }
            let secs = dt.num_seconds();
            if dt.subsec_nanos() != 0 || secs % hour.num_seconds() != 0 {
                return Err(Error::Grid(format!(
                    "spacing of {secs} s at observation {} is not a whole number of hours",
                    i + 1
                )));
            }
            let steps = (secs / hour.num_seconds()) as usize;
            if steps > 1 {
                gaps.push(Gap { after: i - 1, missing: steps - 1 });
            }
            offsets.push(offsets[i - 1] + steps);
        }
        let series = TimeSeries { timestamps, values, offsets, gaps };
        let frac = series.gap_fraction();
        if frac > MAX_GAP_FRACTION {
            return Err(Error::Grid(format!(
                "{:.2}% of hours are missing (at most {:.0}% tolerated)",
                100.0 * frac,
                100.0 * MAX_GAP_FRACTION
            )));
        }
        Ok(series)
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn gaps(&self) -> &[Gap] {
        &self.gaps
    }

    pub fn has_gaps(&self) -> bool {
        !self.gaps.is_empty()
    }

    /// Number of hourly grid points spanned, observed or not.
    pub fn span_hours(&self) -> usize {
        self.offsets.last().map_or(0, |o| o + 1)
    }

    pub fn missing_hours(&self) -> usize {
        self.gaps.iter().map(|g| g.missing).sum()
    }

    pub fn gap_fraction(&self) -> f64 {
        self.missing_hours() as f64 / self.span_hours() as f64
    }

    /// Same timestamps, values mapped through `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        TimeSeries::new(self.timestamps.clone(), values)
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_utc());
    }
    const FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];
    FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Parses `timestamp,discharge` CSV with a header row. Row numbers in errors
/// are file line numbers (the header is line 1).
pub fn parse_series<R: Read>(reader: R) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse { row: 1, message: e.to_string() })?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Parse { row: 1, message: "empty input: expected header 'timestamp,discharge'".into() });
    }
    let names: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    if names != ["timestamp", "discharge"] {
        return Err(Error::Parse {
            row: 1,
            message: format!(
                "expected header 'timestamp,discharge', found '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        if rec.len() != 2 {
            return Err(Error::Parse { row, message: format!("expected 2 fields, found {}", rec.len()) });
        }
        let t = parse_timestamp(&rec[0])
            .ok_or_else(|| Error::Parse { row, message: format!("invalid ISO-8601 timestamp '{}'", &rec[0]) })?;
        let v: f64 =
            rec[1].parse().map_err(|_| Error::Parse { row, message: format!("invalid discharge '{}'", &rec[1]) })?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Parse { row, message: format!("discharge must be non-negative, got {v}") });
        }
        timestamps.push(t);
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::Parse { row: 2, message: "no data rows".into() });
    }
    TimeSeries::new(timestamps, values)
}

pub fn load_series(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let file = std::fs::File::open(path)?;
    parse_series(std::io::BufReader::new(file))
}

/// Biased autocorrelation estimator for lags `0..=max_lag` (hours).
///
/// Pairs spanning a gap are skipped; the lag-`τ` sum is averaged over the
/// complete pairs and rescaled by `(L - τ)/L`, which reduces to the usual
/// `Σ(x_t - x̄)(x_{t+τ} - x̄) / Σ(x_t - x̄)²` on a complete record.
pub fn empirical_acf(ts: &TimeSeries, max_lag: usize) -> Result<Vec<f64>> {
    let span = ts.span_hours();
    if max_lag >= span {
        return Err(Error::invalid(format!("max lag {max_lag} must be below the record span of {span} hours")));
    }
    let n = ts.len() as f64;
    let mean = ts.values.iter().sum::<f64>() / n;
    let mut grid = vec![f64::NAN; span];
    for (&o, &v) in ts.offsets.iter().zip(&ts.values) {
        grid[o] = v - mean;
    }
    let ss: f64 = ts.values.iter().map(|v| (v - mean) * (v - mean)).sum();
    if !(ss > 0.0) {
        return Err(Error::Degenerate("series has zero variance".into()));
    }
    let complete = !ts.has_gaps();
    let acf: Vec<Result<f64>> = (0..=max_lag)
        .into_par_iter()
        .map(|lag| {
            let (mut s, mut count) = (0.0, 0usize);
            for (x, y) in grid.iter().zip(&grid[lag..]) {
                if x.is_nan() || y.is_nan() {
                    continue;
                }
                s += x * y;
                count += 1;
            }
            if complete {
                return Ok(s / ss);
            }
            if count == 0 {
                return Err(Error::Degenerate(format!("no complete pairs at lag {lag}")));
            }
            let cov = s / count as f64 * (span - lag) as f64 / span as f64;
            Ok(cov / (ss / n))
        })
        .collect();
    acf.into_iter().collect()
}

/// Last lag before the autocorrelation first drops to zero or below.
pub fn positive_lag_cutoff(acf: &[f64]) -> usize {
    match acf.iter().position(|&v| v <= 0.0) {
        Some(i) => i.saturating_sub(1),
        None => acf.len().saturating_sub(1),
    }
}

fn model_acf(alpha: f64, beta: f64, tau: f64) -> f64 {
    (-(alpha - 1.0) * (beta * tau).ln_1p()).exp()
}

/// Result of the autocorrelation stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReversionFit {
    pub measure: GammaReversionMeasure,
    /// Sum of squared residuals over lags `1..=cutoff`.
    pub sse: f64,
}

/// Least-squares fit of `(1 + beta tau)^-(alpha-1)` to `acf[1..=cutoff]`.
pub fn fit_reversion(acf: &[f64], cutoff: usize) -> Result<GammaReversionMeasure> {
    Ok(fit_reversion_detailed(acf, cutoff)?.measure)
}

pub fn fit_reversion_detailed(acf: &[f64], cutoff: usize) -> Result<ReversionFit> {
    if cutoff < 2 {
        return Err(Error::Convergence(format!(
            "autocorrelation fit is underdetermined with cutoff {cutoff} (two parameters need at least two lags)"
        )));
    }
    if cutoff >= acf.len() {
        return Err(Error::invalid(format!("cutoff {cutoff} exceeds the autocorrelation length {}", acf.len())));
    }
    let target = &acf[1..=cutoff];
    let alpha0: f64 = 1.5;
    let tau_half = target.iter().position(|&v| v < 0.5).map_or(cutoff, |i| i + 1) as f64;
    let beta0 = ((2f64.ln() / (alpha0 - 1.0)).exp() - 1.0) / tau_half;
    let sse = |u: f64, v: f64| -> f64 {
        let (alpha, beta) = (1.0 + u.exp(), v.exp());
        target
            .iter()
            .enumerate()
            .map(|(i, &rho)| {
                let d = rho - model_acf(alpha, beta, (i + 1) as f64);
                d * d
            })
            .sum()
    };
    let m = minimize(|x| sse(x[0], x[1]), &[(alpha0 - 1.0).ln(), beta0.ln()], &NelderMeadOptions::default())?;
    let (alpha_m1, beta) = (m.x[0].exp(), m.x[1].exp());
    if alpha_m1 < ALPHA_FLOOR {
        return Err(Error::Boundary(format!("alpha converged to 1 + {alpha_m1:e}: no long-memory decay in the data")));
    }
    let measure = GammaReversionMeasure::new(1.0 + alpha_m1, beta)?;
    Ok(ReversionFit { measure, sse: m.value })
}

/// Population moments of a record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMoments {
    pub mean: f64,
    pub variance: f64,
    pub skew_normalized: f64,
    /// Excess kurtosis.
    pub kurt_normalized: f64,
    pub min_value: f64,
}

impl EmpiricalMoments {
    /// `[mean, variance, skewness, kurtosis]`
    pub fn as_array(&self) -> [f64; 4] {
        [self.mean, self.variance, self.skew_normalized, self.kurt_normalized]
    }

    /// Moments a model would produce; `min_value` is taken as the model's shift.
    pub fn from_stats(s: &StationaryStats, min_value: f64) -> Self {
        EmpiricalMoments {
            mean: s.mean,
            variance: s.variance,
            skew_normalized: s.skew_normalized,
            kurt_normalized: s.kurt_normalized,
            min_value,
        }
    }
}

pub fn empirical_moments(ts: &TimeSeries) -> Result<EmpiricalMoments> {
    moments_of(ts.values())
}

/// Population moments of a plain slice.
pub fn moments_of(x: &[f64]) -> Result<EmpiricalMoments> {
    if x.len() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 observations, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    if !(m2 > 0.0) {
        return Err(Error::Degenerate("series has zero variance".into()));
    }
    Ok(EmpiricalMoments {
        mean,
        variance: m2,
        skew_normalized: m3 / m2.powf(1.5),
        kurt_normalized: m4 / (m2 * m2) - 3.0,
        min_value: x.iter().cloned().fold(f64::INFINITY, f64::min),
    })
}

/// Result of the moment-matching stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyFit {
    pub levy: TemperedStableLevy,
    pub shift: f64,
    /// Relative errors of mean, variance, skewness, kurtosis.
    pub residuals: [f64; 4],
    /// Sum of squared relative errors.
    pub objective: f64,
}

fn relative_errors(stats: &StationaryStats, target: &[f64; 4]) -> [f64; 4] {
    let got = [stats.mean, stats.variance, stats.skew_normalized, stats.kurt_normalized];
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = (got[i] - target[i]) / target[i].abs().max(f64::MIN_POSITIVE);
    }
    out
}

struct LevyParams {
    a: f64,
    b: f64,
    c: f64,
    shift: f64,
}

fn unpack(x: &[f64]) -> LevyParams {
    LevyParams { a: x[0].exp(), b: x[1].exp(), c: 1.0 - x[2].exp(), shift: x[3].max(0.0) }
}

fn moments_for(p: &LevyParams) -> [f64; 4] {
    let mut m = [0.0; 4];
    for (k, slot) in m.iter_mut().enumerate() {
        let kf = (k + 1) as f64;
        *slot = (p.a.ln() + (p.c - kf) * p.b.ln() + ln_gamma(kf - p.c)).exp();
    }
    m
}

/// Fits `(A, B, C, shift)` so the model statistics match `emp` under `m`.
pub fn fit_levy(emp: &EmpiricalMoments, m: &GammaReversionMeasure) -> Result<LevyFit> {
    if !(emp.variance > 0.0) {
        return Err(Error::Degenerate("zero variance".into()));
    }
    let r = m.inverse_moment();
    let target = emp.as_array();
    let objective = |x: &[f64]| -> f64 {
        let p = unpack(x);
        let stats = stats_with_inverse_moment(&moments_for(&p), r, p.shift);
        relative_errors(&stats, &target).iter().map(|e| e * e).sum()
    };
    let shift0 = emp.min_value.max(0.0);
    let excess = emp.mean - shift0;
    if !(excess > 0.0) {
        return Err(Error::Degenerate("mean does not exceed the minimum".into()));
    }
    let (c0, b0) = (0.5f64, 1.0 / emp.mean);
    // Mean equation: A B^(C-1) Gamma(1-C) R = mean - shift.
    let a0 = excess / ((c0 - 1.0) * b0.ln() + ln_gamma(1.0 - c0)).exp() / r;
    let x0 = [a0.ln(), b0.ln(), (1.0 - c0).ln(), shift0];
    let single = NelderMeadOptions { restart: false, ..NelderMeadOptions::default() };
    let first = minimize(objective, &x0, &single)?;
    // The clamp makes the objective flat for negative raw shifts, where the
    // simplex can collapse. Restart with the shift set to its exact optimum
    // for the current (A, B, C): only the mean depends on it.
    let mut x1 = first.x.clone();
    let p1 = unpack(&x1);
    x1[3] = (emp.mean - moments_for(&p1)[0] * r).max(0.0);
    let second = minimize(objective, &x1, &single)?;
    let best = if second.value <= first.value { second } else { first };

    let p = unpack(&best.x);
    let degenerate = ((shift0 - emp.mean) / emp.mean).powi(2) + 3.0;
    if !(best.value < degenerate) {
        return Err(Error::Infeasible(format!(
            "best objective {:e} does not improve on the zero-jump value {degenerate:e}",
            best.value
        )));
    }
    let levy = TemperedStableLevy::new(p.a, p.b, p.c)?;
    let stats = stats_with_inverse_moment(&moments_for(&p), r, p.shift);
    let residuals = relative_errors(&stats, &target);
    Ok(LevyFit { levy, shift: p.shift, residuals, objective: residuals.iter().map(|e| e * e).sum() })
}

/// Everything the identification pipeline produces.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: SupOUModel,
    pub acf_lag_cutoff: usize,
    pub acf_sse: f64,
    pub observed: EmpiricalMoments,
    pub fitted: StationaryStats,
    /// Relative errors of mean, variance, skewness, kurtosis.
    pub residuals: [f64; 4],
    /// Sum of squared relative errors.
    pub objective_value: f64,
}

/// The full pipeline: ACF → cutoff → reversion fit → moments → Lévy fit.
pub fn fit_series(ts: &TimeSeries, max_lag: Option<usize>) -> Result<FitReport> {
    let max_lag = max_lag.unwrap_or(DEFAULT_MAX_LAG).min(ts.span_hours().saturating_sub(1));
    let acf = empirical_acf(ts, max_lag)?;
    let cutoff = positive_lag_cutoff(&acf);
    let rev = fit_reversion_detailed(&acf, cutoff)?;
    let observed = empirical_moments(ts)?;
    let levy = fit_levy(&observed, &rev.measure)?;
    let model = SupOUModel::new(rev.measure, levy.levy, levy.shift)?;
    let fitted = model.stationary_stats();
    Ok(FitReport {
        model,
        acf_lag_cutoff: cutoff,
        acf_sse: rev.sse,
        observed,
        fitted,
        residuals: levy.residuals,
        objective_value: levy.objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hourly(values: &[f64]) -> TimeSeries {
        let t0 = NaiveDateTime::parse_from_str("2018-01-01T00:00:00", "%Y-%m-%dT%H:%M:%S").unwrap();
        let ts = (0..values.len()).map(|i| t0 + TimeDelta::hours(i as i64)).collect();
        TimeSeries::new(ts, values.to_vec()).unwrap()
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(positive_lag_cutoff(&[1.0, 0.5, 0.2, -0.1, 0.3]), 2);
        assert_eq!(positive_lag_cutoff(&[1.0, 0.9, 0.8]), 2);
        assert_eq!(positive_lag_cutoff(&[1.0, -0.1]), 0);
    }

    #[test]
    fn moment_examples() {
        let m = moments_of(&[1.0, 2.0, 3.0]).unwrap();
        assert!((m.mean - 2.0).abs() < 1e-15);
        assert!((m.variance - 2.0 / 3.0).abs() < 1e-15);
        assert!(m.skew_normalized.abs() < 1e-15);
        assert!((m.kurt_normalized + 1.5).abs() < 1e-14);
        assert_eq!(m.min_value, 1.0);
        assert!(matches!(moments_of(&[4.0; 4]), Err(Error::Degenerate(_))));
        assert!(moments_of(&[1.0]).is_err());
    }

    #[test]
    fn acf_basics() {
        let alt: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 2.0 } else { 0.0 }).collect();
        let acf = empirical_acf(&hourly(&alt), 3).unwrap();
        assert_eq!(acf[0], 1.0);
        assert!((acf[1] + 1.0).abs() < 2e-3);
        assert!(matches!(empirical_acf(&hourly(&[3.0; 10]), 2), Err(Error::Degenerate(_))));
    }

    #[test]
    fn underdetermined_cutoff() {
        assert!(matches!(fit_reversion(&[1.0, 0.5, 0.3], 1), Err(Error::Convergence(_))));
    }

    #[test]
    fn timestamps_parse_in_several_forms() {
        for s in ["2020-03-01T05:00:00Z", "2020-03-01T14:00:00+09:00", "2020-03-01 05:00:00", "2020-03-01T05:00"] {
            assert!(parse_timestamp(s).is_some(), "{s}");
        }
        assert_eq!(parse_timestamp("2020-03-01T14:00:00+09:00"), parse_timestamp("2020-03-01T05:00:00"));
        assert!(parse_timestamp("yesterday").is_none());
    }
}
