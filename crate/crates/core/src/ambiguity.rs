//! Worst-case Radon–Nikodym derivatives and the primal side of the
//! TsVaR duality.
//!
//! On a uniform-weight discrete measure with nodes `r_i` the inner problems are
//!
//! ```text
//! lower:  min_phi  λ0 mean(phi^q / r) + H_q(phi)      (q >= 1)
//! upper:  max_phi  λ0 mean(phi^q / r) - H_q(phi)      (q < 1)
//! ```
//!
//! over positive `phi` with `mean(phi) = 1`. Both are strictly convex (resp.
//! concave), and stationarity gives `phi_i ∝ (q w_i / μ)^(-1/(q-1))` with
//! `w_i = λ0 / r_i + 1/|q-1|`; the multiplier `μ` is found by bisection on the
//! normalization residual. The maximizer is proportional to `exp_q(±λ0 / r)`,
//! which serves as an independent cross-check, and the optimal values are
//! `-ln_q(∫exp_q(-λ0/r))` and `ln_q(∫exp_q(λ0/r))` respectively.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum_with;
use crate::qcalc::{q_exp, q_log, tsallis_divergence, DiscreteDensity, ShapeParameter};
use crate::reversion::{check_lower_q, DiscreteMeasure, GammaReversionMeasure};
use crate::solver::{descend_with, DescentOptions, Side, TsVaRProblem};
use crate::supou::distorted_inverse_moment;

/// Relative tolerance of the multiplier bisection.
pub const MULTIPLIER_TOLERANCE: f64 = 1e-12;
/// Largest accepted relative deviation between the numerical optimizer and
/// the closed form before [`WorstCase::closed_form_deviation`] is flagged.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-6;

/// Full output of the inner solve.
#[derive(Debug, Clone)]
pub struct WorstCase {
    pub phi: DiscreteDensity,
    /// Normalization multiplier `μ`.
    pub multiplier: f64,
    /// `max_i |phi_i / phi_closed_i - 1|`.
    pub closed_form_deviation: f64,
}

impl WorstCase {
    pub fn agrees_with_closed_form(&self) -> bool {
        self.closed_form_deviation <= CLOSED_FORM_TOLERANCE
    }
}

fn check_side_q(side: Side, q: ShapeParameter) -> Result<()> {
    match side {
        Side::Lower => check_lower_q(q),
        Side::Upper if q.value() < 1.0 => Ok(()),
        Side::Upper => {
            Err(Error::Feasibility { message: format!("q = {q} is not below 1"), allowed: "(0, 1)".to_string() })
        }
    }
}

fn check_lambda0(lambda0: f64) -> Result<()> {
    if lambda0 > 0.0 && lambda0.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("ambiguity aversion must be positive, got {lambda0}")))
    }
}

/// `ln(mean(exp(v)))`, stable for large `v`.
fn log_mean_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let [s] = pairwise_sum_with(v.len(), &|i| [(v[i] - m).exp()]);
    m + (s / v.len() as f64).ln()
}

/// `ln phi_i` at log-multiplier zero: `-ln(q w_i) / (q - 1)`, or `-λ0/r_i` at `q = 1`.
fn log_profile(lambda0: f64, q: ShapeParameter, nodes: &[f64]) -> Vec<f64> {
    let qv = q.value();
    if q.is_classical() {
        // Entropic case: phi ∝ exp(-λ0/r) (only the lower side admits q = 1).
        return nodes.iter().map(|&r| -lambda0 / r).collect();
    }
    let offset = 1.0 / (qv - 1.0).abs();
    nodes.iter().map(|&r| -(qv * (lambda0 / r + offset)).ln() / (qv - 1.0)).collect()
}

/// `ln exp_q(s λ0 / r)` with `s = +1` (upper) or `-1` (lower).
fn log_closed_form(side: Side, lambda0: f64, q: ShapeParameter, r: f64) -> f64 {
    let s = match side {
        Side::Upper => 1.0,
        Side::Lower => -1.0,
    };
    if q.is_classical() {
        s * lambda0 / r
    } else {
        let om = 1.0 - q.value();
        (om * s * lambda0 / r).ln_1p() / om
    }
}

/// Worst-case density with diagnostics.
pub fn worst_case(side: Side, lambda0: f64, q: ShapeParameter, d: &DiscreteMeasure) -> Result<WorstCase> {
    check_side_q(side, q)?;
    check_lambda0(lambda0)?;
    let nodes = d.nodes();
    let base = log_profile(lambda0, q, nodes);
    // ln phi_i(t) = base_i + t / (q - 1) with t = ln μ (t itself at q = 1).
    let slope = if q.is_classical() { 1.0 } else { 1.0 / (q.value() - 1.0) };
    let residual = |t: f64| {
        let shift = t * slope;
        let shifted: Vec<f64> = base.iter().map(|b| b + shift).collect();
        log_mean_exp(&shifted)
    };
    // The residual is monotone in t (increasing for q > 1, decreasing for q < 1).
    let increasing = slope > 0.0;
    let step = 4f64.ln();
    let (mut lo, mut hi) = (-step, step);
    let below = |v: f64| if increasing { v < 0.0 } else { v > 0.0 };
    let mut guard = 0;
    while !below(residual(lo)) {
        lo -= (hi - lo) * 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Convergence("multiplier bracket (lower end) not found".into()));
        }
    }
    while below(residual(hi)) {
        hi += (hi - lo) * 2.0;
        guard += 1;
        if guard > 400 {
            return Err(Error::Convergence("multiplier bracket (upper end) not found".into()));
        }
    }
    let mut iter = 0;
    while hi - lo > MULTIPLIER_TOLERANCE * (1.0 + lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(residual(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
        iter += 1;
        if iter > 10_000 {
            return Err(Error::Convergence("multiplier bisection did not terminate".into()));
        }
    }
    let t = 0.5 * (lo + hi);
    let shift = t * slope;
    let raw: Vec<f64> = base.iter().map(|b| (b + shift).exp()).collect();
    if raw.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::domain(format!("worst-case density leaves double precision at lambda0 = {lambda0}")));
    }
    // Bisection leaves the mean within ~1e-12; a final rescale makes it exact to round-off.
    let phi = DiscreteDensity::normalized(raw)?;

    let closed: Vec<f64> = nodes.iter().map(|&r| log_closed_form(side, lambda0, q, r)).collect();
    let log_norm = log_mean_exp(&closed);
    let closed_form_deviation =
        phi.values().iter().zip(&closed).map(|(p, c)| (p.ln() - (c - log_norm)).exp_m1().abs()).fold(0.0, f64::max);

    Ok(WorstCase { phi, multiplier: t.exp(), closed_form_deviation })
}

/// The optimizer of the discretized inner problem.
pub fn worst_case_phi(side: Side, lambda0: f64, q: ShapeParameter, d: &DiscreteMeasure) -> Result<DiscreteDensity> {
    Ok(worst_case(side, lambda0, q, d)?.phi)
}

/// The inner bracket at a given density: `λ0 R_phi ± H_q(phi)` (`+` lower, `-` upper).
pub fn inner_objective(
    side: Side,
    lambda0: f64,
    q: ShapeParameter,
    d: &DiscreteMeasure,
    phi: &DiscreteDensity,
) -> Result<f64> {
    let moment = distorted_inverse_moment(d, phi, q)?;
    let h = tsallis_divergence(phi, q)?;
    Ok(match side {
        Side::Lower => lambda0 * moment + h,
        Side::Upper => lambda0 * moment - h,
    })
}

/// `a = exp_q(-H_q(phi))`.
pub fn accuracy_from_phi(phi: &DiscreteDensity, q: ShapeParameter) -> Result<f64> {
    let h = tsallis_divergence(phi, q)?;
    let a = q_exp(-h, q)?;
    if a > 0.0 {
        Ok(a.min(1.0))
    } else {
        Err(Error::domain(format!("divergence {h} too large: exp_q(-H_q) vanishes at q = {q}")))
    }
}

/// `∓ln_q(mean exp_q(∓λ/r))` on the discrete measure.
pub fn dual_value(side: Side, lambda: f64, q: ShapeParameter, d: &DiscreteMeasure) -> Result<f64> {
    check_side_q(side, q)?;
    let (s, sign) = match side {
        Side::Upper => (1.0, 1.0),
        Side::Lower => (-1.0, -1.0),
    };
    let nodes = d.nodes();
    let mut err = None;
    let vals: Vec<f64> = nodes
        .iter()
        .map(|&r| match q_exp(s * lambda / r, q) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        })
        .collect();
    if let Some(e) = err {
        return Err(e);
    }
    let [sum] = pairwise_sum_with(vals.len(), &|i| [vals[i]]);
    Ok(sign * q_log(sum / vals.len() as f64, q)?)
}

/// Relative gap between the quadrature dual value and the inner optimum.
pub fn duality_gap(side: Side, lambda: f64, q: ShapeParameter, d: &DiscreteMeasure) -> Result<f64> {
    let lhs = dual_value(side, lambda, q, d)?;
    let phi = worst_case_phi(side, lambda, q, d)?;
    let rhs = inner_objective(side, lambda, q, d, &phi)?;
    Ok((lhs - rhs).abs() / lhs.abs())
}

/// One worst-case scenario: the density for a given aversion, the accuracy it
/// implies, and the TsVaR at that accuracy.
#[derive(Debug, Clone, Serialize)]
pub struct AmbiguityScenario {
    pub side: Side,
    pub lambda0: f64,
    #[serde(skip)]
    pub phi_star: DiscreteDensity,
    pub a_star: f64,
    pub lambda_star: f64,
    pub tsvar: f64,
    pub normalized: f64,
    /// `a*^(q-1) R_{phi*,q}`, the value the dual TsVaR must attain.
    pub primal_value: f64,
}

impl AmbiguityScenario {
    /// Share of distorted mass above (`true`) or below the median node.
    pub fn mass_beyond_median(&self, d: &DiscreteMeasure, above: bool) -> f64 {
        mass_beyond_median(d, &self.phi_star, above)
    }
}

/// `(1/N) sum phi_i 1{r_i > median}` (or `<` when `above` is false).
pub fn mass_beyond_median(d: &DiscreteMeasure, phi: &DiscreteDensity, above: bool) -> f64 {
    let nodes = d.nodes();
    let n = nodes.len();
    let median = if n % 2 == 1 { nodes[n / 2] } else { 0.5 * (nodes[n / 2 - 1] + nodes[n / 2]) };
    let s: f64 = nodes
        .iter()
        .zip(phi.values())
        .filter(|(r, _)| if above { **r > median } else { **r < median })
        .map(|(_, p)| p)
        .sum();
    s / n as f64
}

/// Worst-case density → accuracy → TsVaR on the same discrete measure.
///
/// `m` supplies the closed-form inverse moment used for normalization.
pub fn scenario(
    side: Side,
    lambda0: f64,
    q: ShapeParameter,
    d: &Arc<DiscreteMeasure>,
    m: &GammaReversionMeasure,
) -> Result<AmbiguityScenario> {
    scenario_with(side, lambda0, q, d, m, &DescentOptions::default())
}

pub fn scenario_with(
    side: Side,
    lambda0: f64,
    q: ShapeParameter,
    d: &Arc<DiscreteMeasure>,
    m: &GammaReversionMeasure,
    opts: &DescentOptions,
) -> Result<AmbiguityScenario> {
    let phi = worst_case_phi(side, lambda0, q, d)?;
    let a_star = accuracy_from_phi(&phi, q)?;
    let problem = TsVaRProblem::from_discrete(Arc::clone(d), side, q, a_star)?;
    // Duality places the outer optimum at λ = 1/λ0. Starting there only saves
    // time: the semi-implicit scheme converges linearly, and very slowly when
    // the optimum is far below the default start.
    let warm = DescentOptions { initial_lambda: 1.0 / lambda0, ..*opts };
    let sol = descend_with(&problem, &warm)?;
    let primal_value = a_star.powf(q.value() - 1.0) * distorted_inverse_moment(d, &phi, q)?;
    Ok(AmbiguityScenario {
        side,
        lambda0,
        phi_star: phi,
        a_star,
        lambda_star: sol.lambda_star,
        tsvar: sol.value,
        normalized: sol.value / m.inverse_moment(),
        primal_value,
    })
}

/// `per_decade` logarithmically spaced points from `start` to `stop` inclusive.
pub fn log_grid(start: f64, stop: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop > start && per_decade > 0) {
        return Err(Error::invalid(format!(
            "log grid needs 0 < start < stop and a positive density (got {start}, {stop}, {per_decade})"
        )));
    }
    let decades = (stop / start).log10();
    let steps = (decades * per_decade as f64).round().max(1.0) as usize;
    let (l0, l1) = (start.ln(), stop.ln());
    Ok((0..=steps).map(|i| (l0 + (l1 - l0) * i as f64 / steps as f64).exp()).collect())
}

/// The default aversion grid: 40 points per decade over `[1e-3, 1e3]`.
pub fn default_lambda0_grid() -> Vec<f64> {
    log_grid(1e-3, 1e3, 40).expect("static grid is valid")
}

/// Scenarios along a λ0 grid, computed in parallel and truncated at the first
/// failure. The failure, if any, is returned alongside the feasible prefix.
pub fn scenario_sweep(
    side: Side,
    q: ShapeParameter,
    d: &Arc<DiscreteMeasure>,
    m: &GammaReversionMeasure,
    lambda0_grid: &[f64],
) -> (Vec<AmbiguityScenario>, Option<(f64, Error)>) {
    let results: Vec<Result<AmbiguityScenario>> =
        lambda0_grid.par_iter().map(|&l| scenario(side, l, q, d, m)).collect();
    let mut out = Vec::with_capacity(results.len());
    for (l, r) in lambda0_grid.iter().zip(results) {
        match r {
            Ok(s) => out.push(s),
            Err(e) => return (out, Some((*l, e))),
        }
    }
    (out, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64) -> ShapeParameter {
        ShapeParameter::new(v).unwrap()
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy_from_phi(&DiscreteDensity::uniform(4), q(1.33)).unwrap(), 1.0);
        let phi = DiscreteDensity::new(vec![1.5, 0.5]).unwrap();
        assert!((accuracy_from_phi(&phi, q(2.0)).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn single_atom_is_exact() {
        let d = DiscreteMeasure::from_nodes(vec![1.0]).unwrap();
        for lambda in [0.1, 1.0, 10.0] {
            let lhs = dual_value(Side::Lower, lambda, q(1.33), &d).unwrap();
            assert!((lhs - lambda).abs() < 1e-12 * lambda);
            let phi = worst_case_phi(Side::Lower, lambda, q(1.33), &d).unwrap();
            assert_eq!(phi.values(), &[1.0]);
            assert!(duality_gap(Side::Lower, lambda, q(1.33), &d).unwrap() < 1e-12);
        }
    }

    #[test]
    fn tiny_aversion_gives_no_distortion() {
        let d = DiscreteMeasure::from_nodes(vec![0.2, 1.0, 3.0, 7.0]).unwrap();
        for side in [Side::Upper, Side::Lower] {
            let phi = worst_case_phi(side, 1e-9, q(side.default_q()), &d).unwrap();
            assert!(phi.values().iter().all(|p| (p - 1.0).abs() < 1e-7));
        }
    }

    #[test]
    fn closed_form_agrees() {
        let d = DiscreteMeasure::from_nodes(vec![0.05, 0.2, 1.0, 3.0, 7.0]).unwrap();
        for (side, qv) in [(Side::Lower, 1.0), (Side::Lower, 1.33), (Side::Lower, 3.0), (Side::Upper, 0.33)] {
            for l in [1e-3, 0.5, 20.0] {
                let w = worst_case(side, l, q(qv), &d).unwrap();
                assert!(w.agrees_with_closed_form(), "{side} q={qv} λ0={l}: {}", w.closed_form_deviation);
                assert!((w.phi.mean() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn feasibility_errors() {
        let d = DiscreteMeasure::from_nodes(vec![1.0, 2.0]).unwrap();
        assert!(matches!(worst_case_phi(Side::Lower, 1.0, q(0.5), &d), Err(Error::Feasibility { .. })));
        assert!(matches!(worst_case_phi(Side::Upper, 1.0, q(1.5), &d), Err(Error::Feasibility { .. })));
        assert!(worst_case_phi(Side::Lower, 0.0, q(1.5), &d).is_err());
    }

    #[test]
    fn log_grid_shape() {
        let g = default_lambda0_grid();
        assert_eq!(g.len(), 241);
        assert!((g[0] - 1e-3).abs() < 1e-18 && (g[240] - 1e3).abs() < 1e-9);
        assert!((g[40] - 1e-2).abs() < 1e-15);
        assert!(log_grid(1.0, 1.0, 3).is_err());
    }
}
