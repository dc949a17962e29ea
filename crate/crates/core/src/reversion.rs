//! Gamma reversion measure and its quadrature.
//!
//! The reversion measure is the Gamma law of the reversion speeds `r`,
//! with shape `alpha > 1` and scale `beta`:
//!
//! ```text
//! pi(dr) = r^(alpha-1) exp(-r/beta) / (Gamma(alpha) beta^alpha) dr
//! ```
//!
//! Integrals against `pi` are approximated on `N` midpoint quantiles
//! `r_i = F^-1((2i-1)/(2N))` with uniform weights. For integrands that blow up
//! like `r^(-1/(1-q))` at the origin the measure is first tilted into a Gamma
//! law with shape `alpha - 1/(1-q)`, which absorbs the singularity.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum_with;
use crate::qcalc::ShapeParameter;
use crate::special::{gamma_inc_pair, ln_gamma, standard_gamma_quantile};

/// Largest resolution served from the node cache.
pub const MAX_CACHED_NODES: usize = 1 << 17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaReversionMeasure {
    alpha: f64,
    beta: f64,
}

impl GammaReversionMeasure {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(Error::invalid(format!("reversion shape alpha must exceed 1, got {alpha}")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid(format!("reversion scale beta must be positive, got {beta}")));
        }
        Ok(GammaReversionMeasure { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The underlying Gamma law (shape `alpha`, scale `beta`).
    pub fn density(&self) -> GammaDensity {
        GammaDensity { shape: self.alpha, scale: self.beta }
    }

    /// `R = E[1/r] = 1 / (beta (alpha - 1))`, in hours.
    pub fn inverse_moment(&self) -> f64 {
        1.0 / (self.beta * (self.alpha - 1.0))
    }

    /// Autocorrelation of the supOU process at lag `tau`: `(1 + beta tau)^-(alpha-1)`.
    pub fn acf(&self, tau: f64) -> Result<f64> {
        if !(tau >= 0.0) {
            return Err(Error::domain(format!("autocorrelation lag must be non-negative, got {tau}")));
        }
        Ok((1.0 + self.beta * tau).powf(-(self.alpha - 1.0)))
    }

    /// Upper end of the admissible shape range for upper bounds, `1 - 1/alpha`.
    pub fn upper_q_bound(&self) -> f64 {
        1.0 - 1.0 / self.alpha
    }

    pub fn discretize(&self, n: usize) -> Result<Arc<DiscreteMeasure>> {
        self.density().discretize(n)
    }
}

pub fn inverse_moment(m: &GammaReversionMeasure) -> f64 {
    m.inverse_moment()
}

pub fn acf_theoretical(m: &GammaReversionMeasure, tau: f64) -> Result<f64> {
    m.acf(tau)
}

/// A Gamma law with arbitrary positive shape; tilted measures may have shape below one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaDensity {
    pub shape: f64,
    pub scale: f64,
}

impl GammaDensity {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!("gamma density needs shape, scale > 0 (got {shape}, {scale})")));
        }
        Ok(GammaDensity { shape, scale })
    }

    pub fn cdf(&self, r: f64) -> Result<f64> {
        Ok(gamma_inc_pair(self.shape, r / self.scale)?.0)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        gamma_quantile(self.shape, self.scale, p)
    }

    /// Midpoint-quantile discretization, cached per `(shape, scale, n)` for `n <= 2^17`.
    pub fn discretize(&self, n: usize) -> Result<Arc<DiscreteMeasure>> {
        if n == 0 {
            return Err(Error::invalid("discretization needs at least one node"));
        }
        let key = (self.shape.to_bits(), self.scale.to_bits(), n);
        let cacheable = n <= MAX_CACHED_NODES;
        if cacheable {
            if let Some(hit) = node_cache().read().expect("node cache poisoned").get(&key) {
                return Ok(hit.clone());
            }
        }
        let measure = Arc::new(discretize_uncached(*self, n)?);
        if cacheable {
            let mut guard = node_cache().write().expect("node cache poisoned");
            // Another thread may have won the race; keep the first entry so callers share it.
            return Ok(guard.entry(key).or_insert(measure).clone());
        }
        Ok(measure)
    }
}

type CacheKey = (u64, u64, usize);

fn node_cache() -> &'static RwLock<HashMap<CacheKey, Arc<DiscreteMeasure>>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, Arc<DiscreteMeasure>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn discretize_uncached(density: GammaDensity, n: usize) -> Result<DiscreteMeasure> {
    let two_n = 2.0 * n as f64;
    let nodes = (1..=n)
        .into_par_iter()
        .map(|i| {
            // Both tails are exact dyadic-grid values.
            let p = (2 * i - 1) as f64 / two_n;
            let upper = (2 * (n - i) + 1) as f64 / two_n;
            standard_gamma_quantile(density.shape, p, upper).map(|x| x * density.scale)
        })
        .collect::<Result<Vec<f64>>>()?;
    DiscreteMeasure::from_nodes(nodes).map(|mut d| {
        d.source = Some(density);
        d
    })
}

/// `r` with `P(shape, r/scale) = p`.
pub fn gamma_quantile(shape: f64, scale: f64, p: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::domain(format!("gamma quantile needs a positive scale, got {scale}")));
    }
    Ok(standard_gamma_quantile(shape, p, 1.0 - p)? * scale)
}

/// Uniform-weight point measure on strictly increasing positive nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    nodes: Vec<f64>,
    source: Option<GammaDensity>,
}

impl DiscreteMeasure {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::invalid("discrete measure needs at least one node"));
        }
        if nodes.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::invalid("discrete measure nodes must be positive and finite"));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("discrete measure nodes must be strictly increasing"));
        }
        Ok(DiscreteMeasure { nodes, source: None })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The Gamma law the nodes were drawn from, if any.
    pub fn source(&self) -> Option<GammaDensity> {
        self.source
    }

    /// `(1/N) sum f(r_i)` with pairwise summation.
    pub fn mean_of<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> f64 {
        let nodes = &self.nodes;
        pairwise_sum_with(nodes.len(), &|i| [f(nodes[i])])[0] / nodes.len() as f64
    }

    /// Quadrature estimate of the inverse moment, `(1/N) sum 1/r_i`.
    pub fn inverse_moment(&self) -> f64 {
        self.mean_of(|r| 1.0 / r)
    }
}

pub fn discretize(density: GammaDensity, n: usize) -> Result<Arc<DiscreteMeasure>> {
    density.discretize(n)
}

/// `r^(-1/(1-q)) pi(dr)` renormalized: Gamma with shape `alpha - 1/(1-q)`, same scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedMeasure {
    pub measure: GammaDensity,
    /// `Gamma(alpha - 1/(1-q)) / Gamma(alpha) * beta^(-1/(1-q))`
    pub prefactor: f64,
    /// `1/(1-q)`
    pub exponent: f64,
}

pub fn tilt(m: &GammaReversionMeasure, q: ShapeParameter) -> Result<TiltedMeasure> {
    check_upper_q(m, q)?;
    let exponent = q.exponent();
    let shape = m.alpha() - exponent;
    let prefactor = (ln_gamma(shape) - ln_gamma(m.alpha()) - exponent * m.beta().ln()).exp();
    Ok(TiltedMeasure { measure: GammaDensity::new(shape, m.beta())?, prefactor, exponent })
}

/// Shape range for upper bounds: `0 < q < 1 - 1/alpha`.
pub(crate) fn check_upper_q(m: &GammaReversionMeasure, q: ShapeParameter) -> Result<()> {
    let bound = m.upper_q_bound();
    if q.value() < bound {
        Ok(())
    } else {
        Err(Error::Feasibility {
            message: format!("q = {q} makes the upper integral diverge at alpha = {}", m.alpha()),
            allowed: format!("(0, {bound:.4})"),
        })
    }
}

pub(crate) fn check_lower_q(q: ShapeParameter) -> Result<()> {
    if q.value() >= 1.0 {
        Ok(())
    } else {
        Err(Error::Feasibility {
            message: format!("q = {q} leaves the lower integral undefined near r = 0"),
            allowed: "[1, inf)".to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Quantiles of `pi` itself.
    Plain,
    /// Quantiles of the tilted Gamma law.
    Tilted,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Scheme::Plain),
            "tilted" => Ok(Scheme::Tilted),
            other => Err(Error::invalid(format!("unknown scheme '{other}' (plain|tilted)"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Plain => "plain",
            Scheme::Tilted => "tilted",
        })
    }
}

/// Quadrature of `∫ w(r) g(r) pi(dr)` as `prefactor * (1/N) sum r_i^weight_power g(r_i)`.
///
/// The plain scheme has `prefactor = 1`, `weight_power = 0`; the tilted one
/// carries the tilt constant and `weight_power = 1/(1-q)`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    nodes: Arc<DiscreteMeasure>,
    prefactor: f64,
    weight_power: f64,
}

impl Quadrature {
    pub fn plain(nodes: Arc<DiscreteMeasure>) -> Self {
        Quadrature { nodes, prefactor: 1.0, weight_power: 0.0 }
    }

    pub fn tilted(t: &TiltedMeasure, n: usize) -> Result<Self> {
        Ok(Quadrature { nodes: t.measure.discretize(n)?, prefactor: t.prefactor, weight_power: t.exponent })
    }

    pub fn nodes(&self) -> &Arc<DiscreteMeasure> {
        &self.nodes
    }

    pub fn is_tilted(&self) -> bool {
        self.weight_power != 0.0
    }

    /// Quadrature estimate of `R = ∫ r^-1 pi(dr)`.
    pub fn inverse_moment(&self) -> f64 {
        let w = self.weight_power;
        self.prefactor * self.nodes.mean_of(|r| r.powf(w - 1.0))
    }

    /// The three integrals driving the upper objective and its derivatives,
    /// for `sign = +1` (upper) or `-1` (lower), all with integrand argument `s x / r`:
    ///
    /// ```text
    /// J1 = ∫ exp_q(s x/r)                 pi(dr)
    /// J2 = ∫ exp_q(s x/r)^q        / r    pi(dr)
    /// J3 = ∫ exp_q(s x/r)^(2q-1)   / r^2  pi(dr)
    /// ```
    pub(crate) fn qexp_moments(&self, q: ShapeParameter, x: f64, sign: f64) -> [f64; 3] {
        let nodes = self.nodes.nodes();
        let n = nodes.len() as f64;
        let pref = self.prefactor;
        let sums = if q.is_classical() {
            let w = self.weight_power;
            pairwise_sum_with(nodes.len(), &|i| {
                let r = nodes[i];
                let e = (sign * x / r).exp() * if w != 0.0 { r.powf(w) } else { 1.0 };
                [e, e / r, e / (r * r)]
            })
        } else {
            let c = (1.0 - q.value()) * sign * x;
            let p = q.exponent();
            if self.is_tilted() {
                // With weight power p = 1/(1-q): r^p z^(p-k+1) r^-(k-1) = (r + c)^(p-k+1).
                debug_assert!((self.weight_power - p).abs() < 1e-15);
                pairwise_sum_with(nodes.len(), &|i| {
                    let u = nodes[i] + c;
                    let e2 = u.powf(p - 1.0);
                    [e2 * u, e2, e2 / u]
                })
            } else {
                pairwise_sum_with(nodes.len(), &|i| {
                    let r = nodes[i];
                    let z = 1.0 + c / r;
                    let e2 = z.powf(p - 1.0) / r;
                    [e2 * z * r, e2, e2 / (z * r)]
                })
            }
        };
        [pref * sums[0] / n, pref * sums[1] / n, pref * sums[2] / n]
    }

    /// `∫ exp_q(x/r) pi(dr)`.
    pub fn qexp_upper(&self, q: ShapeParameter, x: f64) -> f64 {
        self.qexp_moments(q, x, 1.0)[0]
    }

    /// `∫ exp_q(-x/r) pi(dr)`.
    pub fn qexp_lower(&self, q: ShapeParameter, x: f64) -> f64 {
        self.qexp_moments(q, x, -1.0)[0]
    }
}

/// `∫ exp_q(lambda/r) pi(dr)` on `n` nodes with the chosen scheme.
pub fn integrate_qexp_upper(
    m: &GammaReversionMeasure,
    q: ShapeParameter,
    lambda: f64,
    n: usize,
    scheme: Scheme,
) -> Result<f64> {
    check_upper_q(m, q)?;
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    let quad = match scheme {
        Scheme::Plain => Quadrature::plain(m.discretize(n)?),
        Scheme::Tilted => Quadrature::tilted(&tilt(m, q)?, n)?,
    };
    Ok(quad.qexp_upper(q, lambda))
}

/// `∫ exp_q(-lambda/r) pi(dr)` on the plain quantile grid; requires `q >= 1`.
pub fn integrate_qexp_lower(m: &GammaReversionMeasure, q: ShapeParameter, lambda: f64, n: usize) -> Result<f64> {
    check_lower_q(q)?;
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(Quadrature::plain(m.discretize(n)?).qexp_lower(q, lambda))
}
