//! Deformed exponential calculus: q-exponential, q-logarithm and the Tsallis
//! divergence of a density against a uniform-weight discrete measure.
//!
//! For `q != 1`
//!
//! ```text
//! exp_q(x) = (1 + (1-q) x)^(1/(1-q)),   1 + (1-q) x > 0
//! ln_q(x)  = (x^(1-q) - 1) / (1-q),     x > 0
//! ```
//!
//! and both reduce to `exp`/`ln` at `q = 1`. The classical case is selected by
//! an exact comparison on the parameter, never by a tolerance.

use crate::error::{Error, Result};
use crate::numeric::{pairwise_mean, pairwise_sum_with};

/// Tolerance on the mean of a [`DiscreteDensity`].
pub const DENSITY_MEAN_TOLERANCE: f64 = 1e-12;

/// The deformation parameter `q > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ShapeParameter(f64);

impl ShapeParameter {
    pub fn new(q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::invalid(format!("shape parameter q must be positive, got {q}")));
        }
        Ok(ShapeParameter(q))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// True only for `q == 1.0` exactly.
    #[inline]
    pub fn is_classical(self) -> bool {
        self.0 == 1.0
    }

    /// `1 / (1 - q)`; infinite for the classical case.
    #[inline]
    pub fn exponent(self) -> f64 {
        1.0 / (1.0 - self.0)
    }
}

impl std::fmt::Display for ShapeParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn q_exp(x: f64, q: ShapeParameter) -> Result<f64> {
    if q.is_classical() {
        return Ok(x.exp());
    }
    let base = 1.0 + (1.0 - q.value()) * x;
    if !(base > 0.0) {
        return Err(Error::domain(format!("exp_q undefined at x = {x}, q = {q}: 1 + (1-q)x = {base} is not positive")));
    }
    let v = base.powf(q.exponent());
    if !v.is_finite() {
        return Err(Error::domain(format!("exp_q overflow at x = {x}, q = {q}")));
    }
    Ok(v)
}

pub fn q_log(x: f64, q: ShapeParameter) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("ln_q requires a positive argument, got {x}")));
    }
    if q.is_classical() {
        return Ok(x.ln());
    }
    let e = 1.0 - q.value();
    Ok((x.powf(e) - 1.0) / e)
}

/// Positive density of an alternative measure with respect to a uniform-weight
/// discrete measure; its values average to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDensity {
    values: Vec<f64>,
}

impl DiscreteDensity {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::check_positive(&values)?;
        let mean = pairwise_mean(&values);
        if (mean - 1.0).abs() > DENSITY_MEAN_TOLERANCE {
            return Err(Error::invalid(format!(
                "density must average to 1 (within {DENSITY_MEAN_TOLERANCE:e}), mean is {mean}"
            )));
        }
        Ok(DiscreteDensity { values })
    }

    /// Rescales positive weights so that their mean is one.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self> {
        Self::check_positive(&values)?;
        let mean = pairwise_mean(&values);
        if !(mean.is_finite() && mean > 0.0) {
            return Err(Error::domain(format!("cannot normalize weights with mean {mean}")));
        }
        for v in &mut values {
            *v /= mean;
        }
        Ok(DiscreteDensity { values })
    }

    /// The identity density `phi = 1`.
    pub fn uniform(n: usize) -> Self {
        DiscreteDensity { values: vec![1.0; n] }
    }

    fn check_positive(values: &[f64]) -> Result<()> {
        if values.is_empty() {
            return Err(Error::invalid("density needs at least one value"));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::domain(format!("density value {v} at index {i} is not positive")));
        }
        Ok(())
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

    pub fn mean(&self) -> f64 {
        pairwise_mean(&self.values)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Tsallis divergence `H_q(phi) = (1 - mean(phi^q)) / (1 - q)`, or the
/// Kullback–Leibler divergence `mean(phi ln phi)` when `q = 1`.
pub fn tsallis_divergence(phi: &DiscreteDensity, q: ShapeParameter) -> Result<f64> {
    let v = phi.values();
    let n = v.len() as f64;
    if q.is_classical() {
        let [s] = pairwise_sum_with(v.len(), &|i| [v[i] * v[i].ln()]);
        return Ok(s / n);
    }
    let qv = q.value();
    let [s] = pairwise_sum_with(v.len(), &|i| [v[i].powf(qv)]);
    Ok((1.0 - s / n) / (1.0 - qv))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64) -> ShapeParameter {
        ShapeParameter::new(v).unwrap()
    }

    #[test]
    fn q_exp_examples() {
        for qv in [0.33, 1.0, 1.33, 2.0] {
            assert_eq!(q_exp(0.0, q(qv)).unwrap(), 1.0);
        }
        assert!((q_exp(1.0, q(0.5)).unwrap() - 2.25).abs() < 1e-14);
        assert!((q_exp(1.0, q(1.5)).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn q_exp_domain_error() {
        // 1 + (1 - 2) * 1 = 0
        assert!(matches!(q_exp(1.0, q(2.0)), Err(Error::Domain(_))));
        assert!(matches!(q_exp(-3.0, q(0.5)), Err(Error::Domain(_))));
    }

    #[test]
    fn q_log_examples() {
        for qv in [0.33, 1.0, 2.0] {
            assert_eq!(q_log(1.0, q(qv)).unwrap(), 0.0);
        }
        assert!((q_log(2.0, q(2.0)).unwrap() - 0.5).abs() < 1e-15);
        assert!((q_log(4.0, q(0.5)).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(q_log(0.0, q(1.0)), Err(Error::Domain(_))));
        assert!(matches!(q_log(-1.0, q(1.5)), Err(Error::Domain(_))));
    }

    #[test]
    fn shape_parameter_must_be_positive() {
        assert!(ShapeParameter::new(0.0).is_err());
        assert!(ShapeParameter::new(-0.2).is_err());
        assert!(ShapeParameter::new(f64::NAN).is_err());
    }

    #[test]
    fn divergence_examples() {
        let one = DiscreteDensity::uniform(5);
        for qv in [0.33, 1.0, 1.33, 2.0] {
            assert_eq!(tsallis_divergence(&one, q(qv)).unwrap(), 0.0);
        }
        let phi = DiscreteDensity::new(vec![1.5, 0.5]).unwrap();
        assert!((tsallis_divergence(&phi, q(2.0)).unwrap() - 0.25).abs() < 1e-15);
        let kl = 0.5 * (1.5 * 1.5f64.ln() + 0.5 * 0.5f64.ln());
        let h1 = tsallis_divergence(&phi, q(1.0)).unwrap();
        assert!((h1 - kl).abs() < 1e-15);
        assert!((h1 - 0.1308).abs() < 1e-4);
    }

    #[test]
    fn density_validation() {
        assert!(DiscreteDensity::new(vec![1.5, 0.6]).is_err());
        assert!(matches!(DiscreteDensity::new(vec![2.0, 0.0]), Err(Error::Domain(_))));
        assert!(DiscreteDensity::new(vec![]).is_err());
        let d = DiscreteDensity::normalized(vec![2.0, 6.0]).unwrap();
        assert_eq!(d.values(), &[0.5, 1.5]);
    }

    #[test]
    fn classical_limit() {
        for i in -50..=50 {
            let x = i as f64 / 10.0;
            for qv in [1.0 - 1e-6, 1.0 + 1e-6] {
                let v = q_exp(x, q(qv)).unwrap();
                assert!((v - x.exp()).abs() <= 1e-4 * x.exp(), "x={x} q={qv}");
            }
        }
    }

    #[test]
    fn convexity_and_concavity_on_grids() {
        let h = 1e-2;
        for qv in [0.33, 1.0, 1.33, 2.0] {
            let qq = q(qv);
            // For q = 2 exp_q is only defined below x = 1.
            for i in 0..170 {
                let x = -0.9 + i as f64 * 0.01;
                let (a, b, c) = (q_exp(x - h, qq).unwrap(), q_exp(x, qq).unwrap(), q_exp(x + h, qq).unwrap());
                assert!(a < b && b < c);
                assert!(a - 2.0 * b + c >= 0.0);
                let y = 0.05 + i as f64 * 0.05;
                let (a, b, c) = (q_log(y - h, qq).unwrap(), q_log(y, qq).unwrap(), q_log(y + h, qq).unwrap());
                assert!(a < b && b < c);
                assert!(a - 2.0 * b + c <= 0.0);
            }
        }
    }
}
