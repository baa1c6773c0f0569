use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::config::Command;
use super::run::{ENSEMBLE_SE_FACTOR, THERMO_HEADER};
use crate::error::{Error, Result};
use crate::thermo::{check_balances, BalanceTolerance, ThermoRecord};

/// Markov decompositions must close to this absolute level.
pub const MARKOV_RESIDUAL_TOL: f64 = 1e-12;

/// Overrides supplied on the command line.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReportOptions {
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub command: Command,
    /// One line per check, each starting with `PASS` or `FAIL`.
    pub lines: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| !l.starts_with("FAIL"))
    }
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let p = dir.join(name);
    fs::read_to_string(&p).map_err(|e| Error::io(p, e))
}

fn key_values(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn number(map: &BTreeMap<String, String>, key: &str, file: &str) -> Result<f64> {
    map.get(key)
        .ok_or_else(|| Error::Config(format!("{file} lacks `{key}`")))?
        .parse()
        .map_err(|_| Error::Config(format!("{file}: `{key}` is not a number")))
}

/// Header plus numeric rows.
fn read_csv(dir: &Path, name: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = read(dir, name)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{name} is empty")))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let row = l
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Config(format!("{name} line {}: not numeric", k + 2)))?;
            if row.len() != header.len() {
                return Err(Error::Config(format!("{name} line {}: wrong column count", k + 2)));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

fn column(header: &[String], name: &str) -> Option<usize> {
    header.iter().position(|h| h == name)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS:"
    } else {
        "FAIL:"
    }
}

/// Re-check a finished run directory against its recorded tolerances.
pub fn report(dir: &Path, opts: ReportOptions) -> Result<Report> {
    let manifest = key_values(&read(dir, "manifest.txt")?);
    let command = manifest
        .get("command")
        .and_then(|c| Command::parse(c))
        .ok_or_else(|| Error::Config("manifest.txt names no known command".into()))?;
    let lines = match command {
        Command::FpRun | Command::OuRun => thermo_report(dir, &manifest, opts)?,
        Command::AlphaSweep => sweep_report(dir, &manifest)?,
        Command::Markov => markov_report(dir)?,
        Command::LandscapeCheck => landscape_report(dir)?,
        Command::Ensemble => ensemble_report(dir)?,
    };
    Ok(Report { command, lines })
}

fn thermo_report(dir: &Path, manifest: &BTreeMap<String, String>, opts: ReportOptions) -> Result<Vec<String>> {
    let (header, rows) = read_csv(dir, "thermo.csv")?;
    if header.join(",") != THERMO_HEADER {
        return Err(Error::Config("thermo.csv has an unexpected header".into()));
    }
    let last = rows.len().saturating_sub(1);
    let records: Vec<ThermoRecord> = rows
        .iter()
        .enumerate()
        .map(|(k, r)| ThermoRecord {
            t: r[0],
            entropy: r[1],
            ep: r[2],
            qex: r[3],
            free_energy: r[4],
            qhk: r[5],
            dsdt_fd: r[6],
            dfdt_fd: r[7],
            res_entropy: r[8],
            res_freeenergy: r[9],
            one_sided: k == 0 || k == last,
        })
        .collect();
    let tol = BalanceTolerance {
        abs: opts.abs_tol.map_or_else(|| number(manifest, "abs_tol", "manifest.txt"), Ok)?,
        rel: opts.rel_tol.map_or_else(|| number(manifest, "rel_tol", "manifest.txt"), Ok)?,
    };
    let burn_in = number(manifest, "burn_in", "manifest.txt")?;
    let s = check_balances(&records, tol, burn_in);
    let at = |v: &Option<crate::thermo::Violation>| match v {
        Some(v) => format!(" first violation t={:.6e} ({:.3e} > {:.3e})", v.t, v.value, v.allowed),
        None => String::new(),
    };
    let mut out = vec![
        format!(
            "{} max res_entropy {:.3e} over {} records (abs {:.1e}, rel {:.1e}){}",
            verdict(s.checked > 0 && s.entropy_violation.is_none()),
            s.max_res_entropy,
            s.checked,
            tol.abs,
            tol.rel,
            at(&s.entropy_violation)
        ),
        format!(
            "{} max res_freeenergy {:.3e}{}",
            verdict(s.checked > 0 && s.freeenergy_violation.is_none()),
            s.max_res_freeenergy,
            at(&s.freeenergy_violation)
        ),
        format!(
            "{} max dFdt_fd {:.3e} (F non-increasing){}",
            verdict(s.lyapunov_violation.is_none()),
            s.max_dfdt,
            at(&s.lyapunov_violation)
        ),
    ];
    let first_negative = records
        .iter()
        .find(|r| r.ep < crate::thermo::NONNEGATIVE_SLACK
            || r.qhk < crate::thermo::NONNEGATIVE_SLACK
            || r.free_energy < crate::thermo::NONNEGATIVE_SLACK);
    out.push(format!(
        "{} negative ep/qhk/F records: {}{}",
        verdict(s.negativity_count == 0),
        s.negativity_count,
        first_negative.map_or(String::new(), |r| format!(" first at t={:.6e}", r.t))
    ));
    Ok(out)
}

fn sweep_report(dir: &Path, manifest: &BTreeMap<String, String>) -> Result<Vec<String>> {
    let fit = key_values(&read(dir, "fit.txt")?);
    let f = |k: &str| number(&fit, k, "fit.txt");
    let tol = number(manifest, "slope_tol", "manifest.txt")?;
    let predicted = f("predicted_slope")?;
    let scale = predicted.abs().max(f64::MIN_POSITIVE);
    let mut out = Vec::new();
    for (name, sign) in [("ep", 1.0), ("qex", -1.0)] {
        let slope = f(&format!("{name}_slope"))?;
        let err = (slope - sign * predicted).abs() / scale;
        out.push(format!(
            "{} {name} slope {slope:.6e} vs {:.6e}: relative error {err:.3e} (tol {tol:.1e})",
            verdict(err <= tol),
            sign * predicted
        ));
    }
    let sum = f("sum_slope")?;
    let se = f("sum_slope_se")?;
    let bound = 3.0 * se + crate::asympt::CANCELLATION_FLOOR;
    let ok = sum.abs() <= bound && sum.abs() <= 1e-2 * scale;
    out.push(format!(
        "{} cancellation: |sum slope| {:.3e} (3 SE + floor {:.3e}, 1% of predicted {:.3e})",
        verdict(ok),
        sum.abs(),
        bound,
        1e-2 * scale
    ));
    Ok(out)
}

fn markov_report(dir: &Path) -> Result<Vec<String>> {
    let text = read(dir, "markov.txt")?;
    let map: BTreeMap<String, String> = text
        .split_whitespace()
        .filter_map(|t| t.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let r = number(&map, "residual", "markov.txt")?;
    Ok(vec![format!(
        "{} decomposition residual {:.3e} (tol {:.0e})",
        verdict(r.abs() <= MARKOV_RESIDUAL_TOL),
        r,
        MARKOV_RESIDUAL_TOL
    )])
}

fn landscape_report(dir: &Path) -> Result<Vec<String>> {
    let (header, rows) = read_csv(dir, "landscape.csv")?;
    let (o, b) = match (column(&header, "ortho"), column(&header, "ortho_bound")) {
        (Some(o), Some(b)) => (o, b),
        _ => return Err(Error::Config("landscape.csv lacks ortho columns".into())),
    };
    let bad = rows.iter().filter(|r| r[o].abs() > r[b]).count();
    let worst = rows.iter().map(|r| r[o].abs() / r[b]).fold(0.0, f64::max);
    Ok(vec![format!(
        "{} orthogonality at {} points: {bad} above bound, worst ratio {worst:.3e}",
        verdict(bad == 0 && !rows.is_empty()),
        rows.len()
    )])
}

fn ensemble_report(dir: &Path) -> Result<Vec<String>> {
    let (header, rows) = read_csv(dir, "ensemble.csv")?;
    let mut worst_mean: f64 = 0.0;
    let mut worst_cov: f64 = 0.0;
    let mut has_reference = false;
    for (k, h) in header.iter().enumerate() {
        if let Some(a) = h.strip_prefix("ref_cov") {
            has_reference = true;
            let c = column(&header, &format!("cov{a}")).expect("written together");
            let se = column(&header, &format!("cov_se{a}")).expect("written together");
            for r in &rows {
                worst_cov = worst_cov.max((r[c] - r[k]).abs() / r[se].max(f64::MIN_POSITIVE));
            }
        }
    }
    if !has_reference {
        return Ok(vec![format!(
            "PASS: ensemble of {} snapshots recorded (no closed-form reference for a nonlinear drift)",
            rows.len()
        )]);
    }
    for (k, h) in header.iter().enumerate() {
        if let Some(a) = h.strip_prefix("mean_se") {
            let m = column(&header, &format!("mean{a}")).expect("written together");
            let x = column(&header, &format!("xhat{a}")).expect("written together");
            for r in &rows {
                worst_mean = worst_mean.max((r[m] - r[x]).abs() / r[k].max(f64::MIN_POSITIVE));
            }
        }
    }
    Ok(vec![
        format!(
            "{} ensemble mean within {ENSEMBLE_SE_FACTOR} SE of the flow: worst {worst_mean:.3} SE",
            verdict(worst_mean <= ENSEMBLE_SE_FACTOR)
        ),
        format!(
            "{} ensemble covariance within {ENSEMBLE_SE_FACTOR} SE of the exact law: worst {worst_cov:.3} SE",
            verdict(worst_cov <= ENSEMBLE_SE_FACTOR)
        ),
    ])
}
