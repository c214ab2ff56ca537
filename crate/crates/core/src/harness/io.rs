//! Run directories: manifest, CSV tables and trajectory dumps.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! trajectory read back is bit-identical to the one written.

use std::fs;
use std::path::{Path, PathBuf};

use super::certify::JumpCertificate;
use super::config::RunConfig;
use super::sweep::{PairDistance, RunResult};
use crate::diagnostics::{EnergyLedgerRow, MismatchReport, StepLedger};
use crate::error::{Error, Result};
use crate::jumps::TransitionPath;
use crate::stepper::{DiscreteTrajectory, Problem, SchemeConfig, StepRecord};

pub const MANIFEST: &str = "manifest.toml";
pub const TRAJECTORY: &str = "trajectory.csv";
/// Trajectories above this many stored values are skipped unless asked for.
pub const TRAJECTORY_AUTO_LIMIT: usize = 2_000_000;

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err)
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

/// Config manifest followed by a `[derived]` table of every value decided
/// at run time (σ, τ′, fixed tolerances, the stored trajectory's pair).
pub fn write_manifest(dir: &Path, c: &RunConfig, derived: &toml::Table) -> Result<()> {
    let mut text = c.manifest();
    if !derived.is_empty() {
        let mut wrap = toml::Table::new();
        wrap.insert("derived".into(), toml::Value::Table(derived.clone()));
        text.push('\n');
        text.push_str(&toml::to_string(&wrap).map_err(|e| Error::InvalidParameter(e.to_string()))?);
    }
    fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<(RunConfig, toml::Table)> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let c = RunConfig::from_manifest(&text)?;
    let all: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config(None, e.to_string()))?;
    let derived = match all.get("derived") {
        Some(toml::Value::Table(t)) => t.clone(),
        _ => toml::Table::new(),
    };
    Ok((c, derived))
}

/// Most ledger rows written per run; longer runs are grouped into windows.
pub const LEDGER_MAX_ROWS: usize = 4096;

/// Rows over consecutive node windows (single steps when K ≤ 4096), then
/// the full span (0, K) and the worst pair.
pub fn ledger_rows(l: &StepLedger) -> Result<Vec<EnergyLedgerRow>> {
    let last = l.last();
    let nw = last.min(LEDGER_MAX_ROWS);
    let mut rows = Vec::with_capacity(nw + 2);
    for i in 0..nw {
        rows.push(l.row(i * last / nw, (i + 1) * last / nw)?);
    }
    rows.push(l.row(0, last)?);
    let (m, n, _) = l.min_pair_slack();
    rows.push(l.row(m, n)?);
    Ok(rows)
}

pub fn write_ledger_csv(dir: &Path, rows: &[EnergyLedgerRow]) -> Result<()> {
    let mut w = writer(&dir.join("ledger.csv"))?;
    w.write_record(["m", "n", "lhs", "rhs", "slack"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.m.to_string(), r.n.to_string(), r.lhs.to_string(), r.rhs.to_string(), r.slack.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per run; run-id is the position in (τ, ε) order.
pub fn write_bounds_csv(dir: &Path, runs: &[RunResult]) -> Result<()> {
    let mut w = writer(&dir.join("bounds.csv"))?;
    w.write_record(["run-id", "tau", "eps", "i'", "ii'", "iii'", "iv'", "v'", "vi'", "vii'"]).map_err(csv_err)?;
    for (i, r) in runs.iter().enumerate() {
        if let Some(b) = &r.bounds {
            let mut rec = vec![i.to_string(), r.tau.to_string(), r.eps.to_string()];
            rec.extend(b.as_array().iter().map(|x| x.to_string()));
            w.write_record(rec).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

const MISMATCH_METRICS: [&str; 7] = [
    "sup_u",
    "sup_w",
    "l1_z",
    "l2_v",
    "dot_l2_v",
    "first_cell",
    "dot_l2_ustar",
];

pub fn write_mismatch_csv(dir: &Path, reports: &[&MismatchReport]) -> Result<()> {
    let mut w = writer(&dir.join("mismatch.csv"))?;
    w.write_record(["metric", "value", "tau", "eps"]).map_err(csv_err)?;
    for r in reports {
        for (name, v) in MISMATCH_METRICS.iter().zip(r.totals()) {
            w.write_record([name.to_string(), v.to_string(), r.tau.to_string(), r.eps.to_string()]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_jumps_csv(dir: &Path, certs: &[JumpCertificate]) -> Result<()> {
    let mut w = writer(&dir.join("jumps.csv"))?;
    w.write_record([
        "t_star",
        "window_start",
        "window_end",
        "drop",
        "cost",
        "verdict",
        "r_floor",
        "sigma",
        "sigma_used",
        "tau_prime",
        "admissible",
    ])
    .map_err(csv_err)?;
    for c in certs {
        let verdict = if c.verdict.pass { "PASS" } else { "FAIL" };
        w.write_record([
            c.landed.t_star.to_string(),
            c.landed.window.0.to_string(),
            c.landed.window.1.to_string(),
            c.landed.energy_drop.to_string(),
            c.cost.value.to_string(),
            verdict.to_string(),
            c.landed.r_floor.to_string(),
            c.cost.sigma.to_string(),
            c.cost.sigma_used.to_string(),
            c.cost.tau_prime.to_string(),
            c.admissibility.pass.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_distances_csv(dir: &Path, d: &[PairDistance]) -> Result<()> {
    let mut w = writer(&dir.join("convergence.csv"))?;
    w.write_record(["tau_from", "eps_from", "tau_to", "eps_to", "sup_w", "l1_z"]).map_err(csv_err)?;
    for x in d {
        w.write_record([x.from.0, x.from.1, x.to.0, x.to.1, x.sup_w, x.l1_z].map(|v| v.to_string()))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn header(n: usize, names: &[&str]) -> Vec<String> {
    let mut h = vec!["k".to_string(), "t".to_string()];
    for name in names {
        for i in 0..n {
            h.push(format!("{name}{i}"));
        }
    }
    h
}

/// Columns k, t, u*, v*, xi*, eta*, el_residual, inner_iters.
pub fn write_trajectory_csv(path: &Path, tr: &DiscreteTrajectory) -> Result<()> {
    let n = tr.dim();
    let mut w = writer(path)?;
    let mut h = header(n, &["u", "v", "xi", "eta"]);
    h.push("el_residual".into());
    h.push("inner_iters".into());
    w.write_record(&h).map_err(csv_err)?;
    for k in 0..tr.len() {
        let mut rec = vec![k.to_string(), tr.t(k).to_string()];
        for part in [tr.u(k), tr.v(k), tr.xi(k), tr.eta(k)] {
            rec.extend(part.iter().map(|x| x.to_string()));
        }
        rec.push(tr.el_residual[k].to_string());
        rec.push(tr.inner_iters[k].to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv(path: &Path, p: &Problem, cfg: SchemeConfig) -> Result<DiscreteTrajectory> {
    let n = p.n();
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let width = 2 + 4 * n + 2;
    let mut records = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_err)?;
        if row.len() != width {
            return Err(Error::InvalidParameter(format!("trajectory row {} has {} columns, expected {width}", line + 1, row.len())));
        }
        let num = |i: usize| -> Result<f64> {
            row[i]
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("trajectory row {}, column {i}: {e}", line + 1)))
        };
        let block = |b: usize| -> Result<Vec<f64>> { (0..n).map(|i| num(2 + b * n + i)).collect() };
        records.push(StepRecord {
            k: row[0].parse().map_err(|e| Error::InvalidParameter(format!("trajectory row {}: {e}", line + 1)))?,
            t: num(1)?,
            u: block(0)?,
            v: block(1)?,
            xi: block(2)?,
            eta: block(3)?,
            el_residual: num(2 + 4 * n)?,
            inner_iters: row[3 + 4 * n]
                .parse()
                .map_err(|e| Error::InvalidParameter(format!("trajectory row {}: {e}", line + 1)))?,
        });
    }
    let regime = p.regime(cfg.tau, cfg.eps);
    DiscreteTrajectory::from_parts(cfg, regime, n, records)
}

/// Transition path dump: k, s, u*, v*.
pub fn write_transition_csv(path: &Path, path_data: &TransitionPath) -> Result<()> {
    let n = path_data.n;
    let mut w = writer(path)?;
    w.write_record(header(n, &["u", "v"])).map_err(csv_err)?;
    for k in 0..path_data.len() {
        let mut rec = vec![k.to_string(), (k as f64 * path_data.tau_prime).to_string()];
        rec.extend(path_data.u(k).iter().map(|x| x.to_string()));
        rec.extend(path_data.v(k).iter().map(|x| x.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric CSV with a header row into (header, columns).
pub fn read_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let head: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut cols = vec![Vec::new(); head.len()];
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        for (c, field) in cols.iter_mut().zip(row.iter()) {
            c.push(field.parse().unwrap_or(f64::NAN));
        }
    }
    Ok((head, cols))
}
