//! Subcommand implementations. Tables are assembled in grid order whatever
//! order the cells finish in.

use std::fs::File;
use std::io::{BufWriter, Write};

use rayon::prelude::*;
use tsvar_core::ambiguity::{default_lambda0_grid, scenario, scenario_sweep};
use tsvar_core::identify::{fit_series, load_series};
use tsvar_core::solver::{accuracy_sweep, descend};
use tsvar_core::{Error, Result, Scheme, ShapeParameter, Side, TsVaRProblem};

use crate::model_file::{resolve_model, Metadata, ModelFile};
use crate::{ConvergeArgs, FitArgs, OutputArg, RnderivArgs, StatsArgs, SweepArgs, TsvarArgs};

fn open_output(o: &OutputArg) -> Result<Box<dyn Write>> {
    Ok(match &o.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn shape(side: Side, q: Option<f64>) -> Result<ShapeParameter> {
    ShapeParameter::new(q.unwrap_or(side.default_q()))
}

fn default_scheme(side: Side) -> Scheme {
    match side {
        Side::Upper => Scheme::Tilted,
        Side::Lower => Scheme::Plain,
    }
}

/// `start:stop:points[:log]`
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::InvalidParameter(format!("grid '{s}' is not start:stop:points[:log]"));
    if !(parts.len() == 3 || (parts.len() == 4 && parts[3] == "log")) {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].parse().map_err(|_| bad())?;
    let points: usize = parts[2].parse().map_err(|_| bad())?;
    if points == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    let log = parts.len() == 4;
    if log && !(start > 0.0 && stop > 0.0) {
        return Err(Error::InvalidParameter(format!("log grid '{s}' needs positive ends")));
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    Ok((0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            if log {
                (start.ln() + t * (stop.ln() - start.ln())).exp()
            } else {
                start + t * (stop - start)
            }
        })
        .collect())
}

fn parse_m_range(s: &str) -> Result<Vec<u32>> {
    let bad = || Error::InvalidParameter(format!("m range '{s}' is not lo:hi"));
    let (lo, hi) = match s.split_once(':') {
        Some((a, b)) => (a.parse::<u32>().map_err(|_| bad())?, b.parse::<u32>().map_err(|_| bad())?),
        None => {
            let v = s.parse::<u32>().map_err(|_| bad())?;
            (v, v)
        }
    };
    if lo > hi || hi > 24 {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

pub fn fit(args: FitArgs) -> Result<()> {
    let ts = load_series(&args.input)?;
    let report = fit_series(&ts, args.max_lag)?;
    let stamp = |i: usize| ts.timestamps()[i].format("%Y-%m-%dT%H:%M:%S").to_string();
    let meta = Metadata {
        station: args.station.clone(),
        record_start: Some(stamp(0)),
        record_end: Some(stamp(ts.len() - 1)),
        ..Default::default()
    };
    let file = ModelFile::from_fit(&report, meta);
    file.save(&args.output)?;

    let mut out = std::io::stdout().lock();
    let o = &report.observed;
    let f = &report.fitted;
    writeln!(out, "observations {} (gaps: {}, missing hours: {})", ts.len(), ts.gaps().len(), ts.missing_hours())?;
    writeln!(out, "acf lag cutoff {} h, acf sse {:e}", report.acf_lag_cutoff, report.acf_sse)?;
    writeln!(out, "{:<10} {:>14} {:>14} {:>12}", "statistic", "observed", "fitted", "rel. error")?;
    let rows = [
        ("mean", o.mean, f.mean),
        ("variance", o.variance, f.variance),
        ("skewness", o.skew_normalized, f.skew_normalized),
        ("kurtosis", o.kurt_normalized, f.kurt_normalized),
    ];
    for ((name, obs, fit), err) in rows.iter().zip(report.residuals) {
        writeln!(out, "{name:<10} {obs:>14.6} {fit:>14.6} {err:>12.3e}")?;
    }
    writeln!(
        out,
        "alpha {:.6} beta {:.6e} A {:.6e} B {:.6e} C {:.6} shift {:.6}",
        file.alpha, file.beta, file.a, file.b, file.c, file.shift
    )?;
    writeln!(out, "wrote {}", args.output.display())?;
    Ok(())
}

pub fn stats(args: StatsArgs) -> Result<()> {
    let (model, _) = resolve_model(&args.model.model)?;
    let s = model.stationary_stats();
    let mut out = open_output(&args.output)?;
    writeln!(out, "mean,variance,third_central,fourth_cumulant,skewness,kurtosis,inverse_moment")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        s.mean,
        s.variance,
        s.third_central,
        s.fourth_cumulant,
        s.skew_normalized,
        s.kurt_normalized,
        model.reversion.inverse_moment()
    )?;
    out.flush()?;
    Ok(())
}

pub fn tsvar(args: TsvarArgs) -> Result<()> {
    let (model, _) = resolve_model(&args.model.model)?;
    let q = shape(args.side, args.q)?;
    let scheme = args.scheme.unwrap_or(default_scheme(args.side));
    let n = args.resolution.nodes();
    let p = TsVaRProblem::new(model.reversion, args.side, q, args.a, n, scheme)?;
    let s = descend(&p)?;
    let mut out = open_output(&args.output)?;
    writeln!(out, "side,q,a,n,scheme,value,lambda_star,iterations,normalized")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{}",
        args.side, q, args.a, n, scheme, s.value, s.lambda_star, s.iterations, s.normalized
    )?;
    out.flush()?;
    Ok(())
}

pub fn converge(args: ConvergeArgs) -> Result<()> {
    let (model, _) = resolve_model(&args.model.model)?;
    let q = shape(args.side, args.q)?;
    let ms = parse_m_range(&args.m_range)?;
    let schemes: Vec<Scheme> = match &args.schemes {
        Some(s) => s.split(',').map(|x| x.trim().parse()).collect::<Result<_>>()?,
        None => match args.side {
            Side::Upper => vec![Scheme::Plain, Scheme::Tilted],
            Side::Lower => vec![Scheme::Plain],
        },
    };
    // Feasibility errors surface before any cell is computed.
    for &sc in &schemes {
        TsVaRProblem::new(model.reversion, args.side, q, args.a, 1, sc)?;
    }
    let cells: Vec<(u32, Scheme)> = schemes.iter().flat_map(|&sc| ms.iter().map(move |&m| (m, sc))).collect();
    let values: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(m, sc)| {
            let p = TsVaRProblem::new(model.reversion, args.side, q, args.a, 1usize << m, sc)?;
            Ok(descend(&p)?.value)
        })
        .collect();
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let mut out = open_output(&args.output)?;
    writeln!(out, "m,n,scheme,value,error")?;
    for (k, &sc) in schemes.iter().enumerate() {
        let block = &values[k * ms.len()..(k + 1) * ms.len()];
        let reference = *block.last().expect("non-empty m range");
        for (i, (&m, &v)) in ms.iter().zip(block).enumerate() {
            let err = if i + 1 == ms.len() { String::new() } else { format!("{}", (v - reference).abs()) };
            writeln!(out, "{m},{},{sc},{v},{err}", 1usize << m)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn q_list(side: Side, q: &Option<String>) -> Result<Vec<ShapeParameter>> {
    match q {
        None => Ok(vec![shape(side, None)?]),
        Some(s) => s
            .split(',')
            .map(|x| {
                let v: f64 = x.trim().parse().map_err(|_| Error::InvalidParameter(format!("invalid q '{x}'")))?;
                ShapeParameter::new(v)
            })
            .collect(),
    }
}

fn flag(e: &Error) -> String {
    format!("{}: {}", e.category().as_str(), e).replace(',', ";")
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let (model, _) = resolve_model(&args.model.model)?;
    let qs = q_list(args.side, &args.q)?;
    let n = args.resolution.nodes();
    let mut out = open_output(&args.output)?;
    match args.over.as_str() {
        "a" => {
            let grid = parse_grid(args.grid.as_deref().unwrap_or("0.6:0.99:40"))?;
            let scheme = args.scheme.unwrap_or(default_scheme(args.side));
            writeln!(out, "q,a,value,lambda_star,iterations,normalized,status")?;
            for q in qs {
                let template = TsVaRProblem::new(model.reversion, args.side, q, 1.0, n, scheme)?;
                for pt in accuracy_sweep(&template, &grid) {
                    match pt.outcome {
                        Ok(s) => writeln!(
                            out,
                            "{q},{},{},{},{},{},ok",
                            pt.a, s.value, s.lambda_star, s.iterations, s.normalized
                        )?,
                        Err(e) => writeln!(out, "{q},{},,,,,infeasible ({})", pt.a, flag(&e))?,
                    }
                }
            }
        }
        "lambda0" => {
            let grid = match &args.grid {
                Some(g) => parse_grid(g)?,
                None => default_lambda0_grid(),
            };
            let d = model.reversion.discretize(n)?;
            writeln!(out, "q,lambda0,a_star,tsvar,normalized,lambda_star,status")?;
            for q in qs {
                let (rows, failure) = scenario_sweep(args.side, q, &d, &model.reversion, &grid);
                for s in rows {
                    writeln!(out, "{q},{},{},{},{},{},ok", s.lambda0, s.a_star, s.tsvar, s.normalized, s.lambda_star)?;
                }
                if let Some((l, e)) = failure {
                    writeln!(out, "{q},{l},,,,,infeasible ({})", flag(&e))?;
                }
            }
        }
        other => {
            return Err(Error::InvalidParameter(format!("--over must be 'a' or 'lambda0', got '{other}'")));
        }
    }
    out.flush()?;
    Ok(())
}

pub fn rnderiv(args: RnderivArgs) -> Result<()> {
    let (model, _) = resolve_model(&args.model.model)?;
    let q = shape(args.side, args.q)?;
    let d = model.reversion.discretize(args.resolution.nodes())?;
    let s = scenario(args.side, args.lambda0, q, &d, &model.reversion)?;
    let mut out = open_output(&args.output)?;
    writeln!(
        out,
        "# side={} q={} lambda0={} a_star={} tsvar={} normalized={}",
        args.side, q, s.lambda0, s.a_star, s.tsvar, s.normalized
    )?;
    writeln!(out, "r,phi")?;
    for (r, phi) in d.nodes().iter().zip(s.phi_star.values()) {
        writeln!(out, "{r},{phi}")?;
    }
    out.flush()?;
    Ok(())
}
