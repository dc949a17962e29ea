//! Tsallis Value-at-Risk bounds of the inverse moment.
//!
//! With `F(x) = ∫ exp_q(x/r) pi(dr)` and `G(x) = ∫ exp_q(-x/r) pi(dr)` the two
//! bounds are
//!
//! ```text
//! upper(a) = inf_{λ>0}  λ ln_q(F(1/λ) / a),   0 < q < 1 - 1/alpha
//! lower(a) = sup_{λ>0} -λ ln_q(G(1/λ) / a),   q >= 1
//! ```
//!
//! Both are found by integrating the gradient flow `dλ/du = ∓ dg/dλ` with a
//! semi-implicit step that treats the negative part of the flow implicitly:
//!
//! ```text
//! λ' = (λ + E Δu) / (1 + D Δu / λ)
//! ```
//!
//! where the flow is `E - D` with `E, D > 0`. For the upper side
//! `D = ln_q(F/a)` and `E = J2 (F/a)^-q / (a λ)`. For the lower side the
//! q-logarithm identity `ln_q(G/a) = a^(q-1) ln_q(G) + ln_q(1/a)` separates
//! the signs: `E = -a^(q-1) ln_q(G)` and `D = ln_q(1/a) + a^(q-1) G^-q J2 / λ`,
//! with `J2 = ∫ exp_q(∓1/(λr))^q / r pi(dr)`. Every iterate stays positive
//! whatever the step size.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcalc::{q_log, ShapeParameter};
use crate::reversion::{
    check_lower_q, check_upper_q, tilt, DiscreteMeasure, GammaReversionMeasure, Quadrature, Scheme,
};

/// Default resolution `N = 2^15`.
pub const DEFAULT_NODES: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Worst-case overestimation (upper bound of `R`).
    Upper,
    /// Worst-case underestimation (lower bound of `R`).
    Lower,
}

impl Side {
    pub fn default_q(self) -> f64 {
        match self {
            Side::Upper => 0.33,
            Side::Lower => 1.33,
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(Side::Upper),
            "lower" => Ok(Side::Lower),
            other => Err(Error::invalid(format!("unknown side '{other}' (upper|lower)"))),
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Upper => "upper",
            Side::Lower => "lower",
        })
    }
}

/// Admissible range of the shape parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QInterval {
    pub low: f64,
    pub high: f64,
    pub low_closed: bool,
    pub high_closed: bool,
}

impl QInterval {
    pub fn contains(&self, q: f64) -> bool {
        let above = if self.low_closed { q >= self.low } else { q > self.low };
        let below = if self.high_closed { q <= self.high } else { q < self.high };
        above && below
    }
}

impl std::fmt::Display for QInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let l = if self.low_closed { '[' } else { '(' };
        let r = if self.high_closed { ']' } else { ')' };
        if self.high.is_infinite() {
            write!(f, "{l}{}, inf{r}", self.low)
        } else {
            write!(f, "{l}{}, {:.4}{r}", self.low, self.high)
        }
    }
}

pub fn feasible_q_interval(side: Side, m: &GammaReversionMeasure) -> QInterval {
    match side {
        Side::Upper => QInterval { low: 0.0, high: m.upper_q_bound(), low_closed: false, high_closed: false },
        Side::Lower => QInterval { low: 1.0, high: f64::INFINITY, low_closed: true, high_closed: false },
    }
}

/// One TsVaR evaluation: side, shape, accuracy and the quadrature of `pi`.
#[derive(Debug, Clone)]
pub struct TsVaRProblem {
    side: Side,
    q: ShapeParameter,
    a: f64,
    scheme: Scheme,
    quad: Quadrature,
    measure: Option<GammaReversionMeasure>,
    reference: f64,
}

fn check_accuracy(a: f64) -> Result<()> {
    if a > 0.0 && a <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("accuracy parameter must lie in (0, 1], got {a}")))
    }
}

impl TsVaRProblem {
    /// Builds the problem on `n` quantile nodes. Shape feasibility is checked here.
    pub fn new(
        measure: GammaReversionMeasure,
        side: Side,
        q: ShapeParameter,
        a: f64,
        n: usize,
        scheme: Scheme,
    ) -> Result<Self> {
        check_accuracy(a)?;
        let quad = match side {
            Side::Upper => {
                check_upper_q(&measure, q)?;
                match scheme {
                    Scheme::Plain => Quadrature::plain(measure.discretize(n)?),
                    Scheme::Tilted => Quadrature::tilted(&tilt(&measure, q)?, n)?,
                }
            }
            Side::Lower => {
                check_lower_q(q)?;
                if scheme == Scheme::Tilted {
                    return Err(Error::invalid("the tilted scheme applies to the upper side only"));
                }
                Quadrature::plain(measure.discretize(n)?)
            }
        };
        Ok(TsVaRProblem { side, q, a, scheme, quad, measure: Some(measure), reference: measure.inverse_moment() })
    }

    /// Builds the problem directly on a uniform-weight discrete measure.
    ///
    /// The normalizing inverse moment is the discrete one, `(1/N) sum 1/r_i`.
    pub fn from_discrete(nodes: Arc<DiscreteMeasure>, side: Side, q: ShapeParameter, a: f64) -> Result<Self> {
        check_accuracy(a)?;
        match side {
            Side::Upper if q.value() >= 1.0 => {
                return Err(Error::Feasibility {
                    message: format!("q = {q} is not below 1"),
                    allowed: "(0, 1)".to_string(),
                })
            }
            Side::Lower => check_lower_q(q)?,
            _ => {}
        }
        let reference = nodes.inverse_moment();
        Ok(TsVaRProblem { side, q, a, scheme: Scheme::Plain, quad: Quadrature::plain(nodes), measure: None, reference })
    }

    /// Same problem at another accuracy level; the quadrature nodes are shared.
    pub fn with_accuracy(&self, a: f64) -> Result<Self> {
        check_accuracy(a)?;
        let mut out = self.clone();
        out.a = a;
        Ok(out)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn q(&self) -> ShapeParameter {
        self.q
    }

    pub fn accuracy(&self) -> f64 {
        self.a
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn measure(&self) -> Option<&GammaReversionMeasure> {
        self.measure.as_ref()
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    pub fn nodes(&self) -> &Arc<DiscreteMeasure> {
        self.quad.nodes()
    }

    /// Denominator of the normalized bound: closed-form `R` when the Gamma
    /// measure is known, the discrete inverse moment otherwise.
    pub fn inverse_moment(&self) -> f64 {
        self.reference
    }

    fn sign(&self) -> f64 {
        match self.side {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }

    fn check_lambda(lambda: f64) -> Result<()> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(format!("lambda must be positive and finite, got {lambda}")))
        }
    }

    /// `[J1, J2, J3]` at `λ`: the q-exponential integral and its two weighted
    /// companions, with integrand argument `±1/(λ r)`.
    pub fn convexity_integrals(&self, lambda: f64) -> Result<[f64; 3]> {
        Self::check_lambda(lambda)?;
        let j = self.quad.qexp_moments(self.q, 1.0 / lambda, self.sign());
        if j.iter().all(|v| v.is_finite()) {
            Ok(j)
        } else {
            Err(Error::domain(format!("quadrature overflow at lambda = {lambda}")))
        }
    }

    /// The objective in the `λ ↦ g(1/λ)` parameterization.
    pub fn objective(&self, lambda: f64) -> Result<f64> {
        let [j1, ..] = self.convexity_integrals(lambda)?;
        self.objective_from(lambda, j1)
    }

    fn objective_from(&self, lambda: f64, j1: f64) -> Result<f64> {
        let l = q_log(j1 / self.a, self.q)?;
        Ok(match self.side {
            Side::Upper => lambda * l,
            Side::Lower => -lambda * l,
        })
    }

    /// Positive split of the gradient flow at `λ`.
    pub fn gradient_terms(&self, lambda: f64) -> Result<GradientTerms> {
        let [j1, j2, _] = self.convexity_integrals(lambda)?;
        self.gradient_terms_from(lambda, j1, j2)
    }

    fn gradient_terms_from(&self, lambda: f64, j1: f64, j2: f64) -> Result<GradientTerms> {
        let (q, a) = (self.q, self.a);
        let qv = q.value();
        match self.side {
            Side::Upper => {
                let ratio = j1 / a;
                let implicit = q_log(ratio, q)?;
                let explicit = j2 * ratio.powf(-qv) / (a * lambda);
                Ok(GradientTerms { implicit, explicit })
            }
            Side::Lower => {
                if !(j1 > 0.0) {
                    return Err(Error::domain(format!("lower integral underflowed at lambda = {lambda}")));
                }
                let scale = a.powf(qv - 1.0);
                let explicit = -scale * q_log(j1, q)?;
                let implicit = q_log(1.0 / a, q)? + scale * j1.powf(-qv) * j2 / lambda;
                Ok(GradientTerms { implicit, explicit })
            }
        }
    }
}

/// Signed split `flow = explicit - implicit` of `dλ/du`; both parts are positive
/// for healthy inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientTerms {
    /// Treated implicitly (upper: `I1`).
    pub implicit: f64,
    /// Treated explicitly (upper: `I2`).
    pub explicit: f64,
}

impl GradientTerms {
    /// `dλ/du`; equals `-dg/dλ` (upper) or `+dg/dλ` (lower).
    pub fn flow(&self) -> f64 {
        self.explicit - self.implicit
    }

    /// One semi-implicit step of size `du` from `lambda`.
    pub fn step(&self, lambda: f64, du: f64) -> f64 {
        (lambda + self.explicit * du) / (1.0 + self.implicit * du / lambda)
    }
}

fn require_side(p: &TsVaRProblem, side: Side) -> Result<()> {
    if p.side == side {
        Ok(())
    } else {
        Err(Error::invalid(format!("expected a {side} problem, got {}", p.side)))
    }
}

pub fn upper_objective(p: &TsVaRProblem, lambda: f64) -> Result<f64> {
    require_side(p, Side::Upper)?;
    p.objective(lambda)
}

pub fn lower_objective(p: &TsVaRProblem, lambda: f64) -> Result<f64> {
    require_side(p, Side::Lower)?;
    p.objective(lambda)
}

/// `(I1, I2)` with `dλ/du = -I1 + I2` for the upper bound.
pub fn gradient_terms_upper(p: &TsVaRProblem, lambda: f64) -> Result<(f64, f64)> {
    require_side(p, Side::Upper)?;
    let t = p.gradient_terms(lambda)?;
    Ok((t.implicit, t.explicit))
}

/// `(D, E)` with `dλ/du = E - D` for the lower bound.
pub fn gradient_terms_lower(p: &TsVaRProblem, lambda: f64) -> Result<(f64, f64)> {
    require_side(p, Side::Lower)?;
    let t = p.gradient_terms(lambda)?;
    Ok((t.implicit, t.explicit))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub initial_lambda: f64,
    pub step: f64,
    /// Stop when `|Δλ| < tolerance * max(1, λ)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Iterations without a new smallest `|Δλ|` before giving up.
    pub stall_window: usize,
    /// Iterates beyond this are treated as divergence to infinity.
    pub lambda_ceiling: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            initial_lambda: 500.0,
            step: 1e4,
            tolerance: 1e-12,
            max_iterations: 1_000_000,
            stall_window: 10_000,
            lambda_ceiling: 1e15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsVaRSolution {
    /// The bound, in the units of `R` (hours).
    pub value: f64,
    /// Optimal `λ` in the `g(1/λ)` parameterization; infinite at `a = 1`.
    pub lambda_star: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `value / R`
    pub normalized: f64,
}

/// Runs the semi-implicit descent. A hit iteration cap returns a solution with
/// `converged = false`; divergence and stalls are errors.
pub fn run_descent(p: &TsVaRProblem, opts: &DescentOptions) -> Result<TsVaRSolution> {
    let r = p.inverse_moment();
    if p.a == 1.0 {
        // The optimum is the λ → ∞ limit, where the objective tends to the
        // quadrature inverse moment.
        let value = p.quad.inverse_moment();
        return Ok(TsVaRSolution {
            value,
            lambda_star: f64::INFINITY,
            iterations: 0,
            converged: true,
            normalized: value / r,
        });
    }
    if !(opts.initial_lambda > 0.0 && opts.step > 0.0) {
        return Err(Error::invalid("descent needs a positive initial lambda and step"));
    }
    let mut lambda = opts.initial_lambda;
    let mut best_delta = f64::INFINITY;
    let mut last_improvement = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;
    while iterations < opts.max_iterations {
        let [j1, j2, _] = p.convexity_integrals(lambda)?;
        let terms = p.gradient_terms_from(lambda, j1, j2)?;
        let next = terms.step(lambda, opts.step);
        iterations += 1;
        if !(next.is_finite() && next > 0.0) {
            return Err(Error::Convergence(format!("descent produced lambda = {next} at iteration {iterations}")));
        }
        if next > opts.lambda_ceiling {
            return Err(Error::Convergence(format!(
                "lambda diverged past {:e}; no interior optimum at a = {}",
                opts.lambda_ceiling, p.a
            )));
        }
        let delta = (next - lambda).abs();
        lambda = next;
        // Absolute below λ = 1, relative above: at λ ~ 1e3 an absolute 1e-12 is round-off.
        if delta < opts.tolerance * lambda.max(1.0) {
            converged = true;
            break;
        }
        if delta < best_delta {
            best_delta = delta;
            last_improvement = iterations;
        } else if iterations - last_improvement > opts.stall_window {
            return Err(Error::Convergence(format!(
                "descent stalled: |Δλ| has not decreased for {} iterations (best {best_delta:e})",
                opts.stall_window
            )));
        }
    }
    let value = p.objective(lambda)?;
    Ok(TsVaRSolution { value, lambda_star: lambda, iterations, converged, normalized: value / r })
}

/// Descent with default settings; an exhausted iteration budget is an error.
pub fn descend(p: &TsVaRProblem) -> Result<TsVaRSolution> {
    descend_with(p, &DescentOptions::default())
}

pub fn descend_with(p: &TsVaRProblem, opts: &DescentOptions) -> Result<TsVaRSolution> {
    let s = run_descent(p, opts)?;
    if s.converged {
        Ok(s)
    } else {
        Err(Error::Convergence(format!(
            "no convergence within {} iterations (last lambda {})",
            s.iterations, s.lambda_star
        )))
    }
}

/// One point of an accuracy sweep; infeasible points keep their error.
#[derive(Debug)]
pub struct SweepPoint {
    pub a: f64,
    pub outcome: Result<TsVaRSolution>,
}

/// Solves the template at every accuracy level, in parallel, returning rows in grid order.
pub fn accuracy_sweep(template: &TsVaRProblem, a_grid: &[f64]) -> Vec<SweepPoint> {
    accuracy_sweep_with(template, a_grid, &DescentOptions::default())
}

pub fn accuracy_sweep_with(template: &TsVaRProblem, a_grid: &[f64], opts: &DescentOptions) -> Vec<SweepPoint> {
    a_grid
        .par_iter()
        .map(|&a| SweepPoint { a, outcome: template.with_accuracy(a).and_then(|p| descend_with(&p, opts)) })
        .collect()
}

/// Fraction of nodes in the tail event bounded by the Chernoff inequality:
/// `1/r >= g` (upper) or `1/r <= g` (lower).
pub fn discrete_tail_mass(nodes: &DiscreteMeasure, g: f64, side: Side) -> f64 {
    let count = nodes
        .nodes()
        .iter()
        .filter(|&&r| match side {
            Side::Upper => 1.0 / r >= g,
            Side::Lower => 1.0 / r <= g,
        })
        .count();
    count as f64 / nodes.len() as f64
}
