//! Gamma-family special functions: log-gamma, regularized incomplete gamma
//! and its inverse.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, nine terms; about 15 digits).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the Lanczos sum in its accurate range.
        let s = (std::f64::consts::PI * x).sin();
        return std::f64::consts::PI.ln() - s.abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `Γ(x)` for positive `x`.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Regularized incomplete gamma pair `(P(a, x), Q(a, x))`.
///
/// Series for `x < a + 1`, Lentz continued fraction otherwise, so that the
/// smaller of the two is always computed directly.
pub fn gamma_inc_pair(a: f64, x: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || !(x >= 0.0) {
        return Err(Error::domain(format!("incomplete gamma needs a > 0, x >= 0 (a={a}, x={x})")));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let log_pref = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                let p = (log_pref.exp() * sum).min(1.0);
                return Ok((p, 1.0 - p));
            }
        }
        Err(Error::Convergence(format!("incomplete gamma series (a={a}, x={x})")))
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                let q = (log_pref.exp() * h).min(1.0);
                return Ok((1.0 - q, q));
            }
        }
        Err(Error::Convergence(format!("incomplete gamma continued fraction (a={a}, x={x})")))
    }
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    Ok(gamma_inc_pair(a, x)?.0)
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    Ok(gamma_inc_pair(a, x)?.1)
}

const BISECTION_REL: f64 = 1e-3;
const NEWTON_REL: f64 = 1e-13;

/// Solves `P(a, x) = p` for the standard (unit-scale) Gamma distribution.
///
/// `upper` must equal `1 - p`; callers that know it exactly (dyadic grids)
/// pass it in so the upper tail keeps full relative precision.
pub(crate) fn standard_gamma_quantile(a: f64, p: f64, upper: f64) -> Result<f64> {
    if !(a > 0.0) || !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("gamma quantile needs a > 0 and p in (0,1), got a={a}, p={p}")));
    }
    let lower_tail = p <= 0.5;
    // Residual measured in the tail that is numerically small.
    let residual = |x: f64| -> Result<f64> {
        let (pp, qq) = gamma_inc_pair(a, x)?;
        Ok(if lower_tail { pp - p } else { upper - qq })
    };

    let mut hi = (a * 50.0).max(1.0);
    let mut guard = 0;
    while residual(hi)? < 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::Convergence(format!("gamma quantile upper bracket (a={a}, p={p})")));
        }
    }
    let mut lo = hi;
    while residual(lo)? > 0.0 {
        lo /= 8.0;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::Convergence(format!("gamma quantile lower bracket underflow (a={a}, p={p})")));
        }
    }
    // Geometric bisection: the root can sit dozens of decades below the bracket top.
    let mut iter = 0;
    while hi / lo - 1.0 > BISECTION_REL {
        let mid = lo.sqrt() * hi.sqrt();
        let mid = if mid > lo && mid < hi { mid } else { 0.5 * (lo + hi) };
        if residual(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iter += 1;
        if iter > 10_000 {
            return Err(Error::Convergence(format!("gamma quantile bisection (a={a}, p={p})")));
        }
    }

    // Newton in log x on the log of the tail probability.
    let ln_target = if lower_tail { p.ln() } else { upper.ln() };
    let ln_ga = ln_gamma(a);
    let mut y = 0.5 * (lo.ln() + hi.ln());
    let (ylo, yhi) = (lo.ln(), hi.ln());
    for _ in 0..100 {
        let x = y.exp();
        let (pp, qq) = gamma_inc_pair(a, x)?;
        let tail = if lower_tail { pp } else { qq };
        if !(tail > 0.0) {
            break;
        }
        // d tail / d ln x = x * density(x)
        let log_xdens = a * x.ln() - x - ln_ga;
        let slope = (log_xdens - tail.ln()).exp() * if lower_tail { 1.0 } else { -1.0 };
        let f = tail.ln() - ln_target;
        let mut step = f / slope;
        let mut next = y - step;
        if !(next > ylo - 1e-3 && next < yhi + 1e-3) || !next.is_finite() {
            step = 0.0;
            next = y;
        }
        y = next;
        if step.abs() < NEWTON_REL {
            return Ok(y.exp());
        }
    }
    let x = y.exp();
    // Newton stalled; accept only if the residual is already at round-off.
    let (pp, qq) = gamma_inc_pair(a, x)?;
    let err = if lower_tail { (pp - p).abs() / p } else { (qq - upper).abs() / upper };
    if err < 1e-9 {
        Ok(x)
    } else {
        Err(Error::Convergence(format!("gamma quantile Newton polish (a={a}, p={p}, rel err {err:e})")))
    }
}
