//! Deterministic Nelder–Mead simplex minimization.
//!
//! Standard coefficients (reflection 1, expansion 2, contraction 1/2,
//! shrink 1/2), a fixed initial simplex and one restart from a fresh simplex
//! around the first optimum. Identical inputs always take identical paths.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop when the simplex diameter falls below `tolerance * (1 + |x_best|_inf)`.
    pub tolerance: f64,
    pub max_evaluations: usize,
    /// Relative size of the initial simplex edges (absolute near zero).
    pub initial_step: f64,
    /// Restart once from a fresh simplex at the first optimum.
    pub restart: bool,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { tolerance: 1e-10, max_evaluations: 200_000, initial_step: 0.05, restart: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

fn initial_simplex(x0: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut s = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] = if v[i].abs() > 1e-3 { v[i] * (1.0 + step) } else { v[i] + step * 0.1 };
        s.push(v);
    }
    s
}

fn diameter(s: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for v in &s[1..] {
        for (a, b) in v.iter().zip(&s[0]) {
            d = d.max((a - b).abs());
        }
    }
    d
}

fn run<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], opts: &NelderMeadOptions, evals: &mut usize) -> Result<Minimum> {
    let n = x0.len();
    let mut simplex = initial_simplex(x0, opts.initial_step);
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(f, v, evals)).collect();
    loop {
        // Stable sort keeps ties in insertion order: deterministic.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let scale = 1.0 + simplex[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if diameter(&simplex) < opts.tolerance * scale {
            return Ok(Minimum { x: simplex[0].clone(), value: values[0], evaluations: *evals });
        }
        if *evals >= opts.max_evaluations {
            return Err(Error::Convergence(format!(
                "Nelder-Mead exhausted {} evaluations (best {:e}, diameter {:e})",
                opts.max_evaluations,
                values[0],
                diameter(&simplex)
            )));
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect() };

        let xr = along(1.0);
        let fr = eval(f, &xr, evals);
        if fr < values[0] {
            let xe = along(2.0);
            let fe = eval(f, &xe, evals);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(0.5);
            let fc = eval(f, &xc, evals);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(f, &xc, evals);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        for i in 1..=n {
            let v: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
            values[i] = eval(f, &v, evals);
            simplex[i] = v;
        }
    }
}

fn eval<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], evals: &mut usize) -> f64 {
    *evals += 1;
    let v = f(x);
    // Non-finite values count as +inf so the simplex moves away from them.
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimizes `f` from `x0`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Result<Minimum> {
    if x0.is_empty() {
        return Err(Error::invalid("cannot minimize over zero parameters"));
    }
    let mut evals = 0;
    let first = run(&mut f, x0, opts, &mut evals)?;
    if !opts.restart {
        return Ok(first);
    }
    let second = run(&mut f, &first.x, opts, &mut evals)?;
    Ok(if second.value <= first.value { second } else { first })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize(f, &[-1.2, 1.0], &NelderMeadOptions::default()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-8 && (m.x[1] - 1.0).abs() < 1e-8, "{:?}", m);
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(4) + x[2].abs();
        let a = minimize(f, &[0.0, 0.0, 1.0], &NelderMeadOptions::default()).unwrap();
        let b = minimize(f, &[0.0, 0.0, 1.0], &NelderMeadOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = NelderMeadOptions { max_evaluations: 10, ..Default::default() };
        let r = minimize(|x: &[f64]| x[0] * x[0] + x[1] * x[1], &[5.0, 5.0], &opts);
        assert!(matches!(r, Err(Error::Convergence(_))));
    }
}
