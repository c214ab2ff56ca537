use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ibv_core::harness::pipeline::{
    audit_run_dir, execute_jumpcost, execute_run, execute_sweep, plot_run_dir, write_jumpcost_outputs, write_run_outputs, write_sweep_outputs,
};
use ibv_core::harness::{parse_config, Certificate, RunConfig, RunResult};
use ibv_core::Error;

const EXIT_AUDIT: u8 = 2;
const EXIT_CONFIG: u8 = 3;

/// Inertial-viscous minimizing-movement runs, sweeps and audits.
///
/// The worker count for sweeps is read from IBV_WORKERS.
#[derive(Parser)]
#[command(name = "ibv", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the scheme at (scheme.tau, scheme.eps) and classify the result.
    Run {
        config: PathBuf,
        /// Output directory (default: io.out_dir from the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every sweep pair and report convergence.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transition cost from the run's state at time t.
    Jumpcost {
        config: PathBuf,
        #[arg(long = "t")]
        t: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a run directory's stored trajectory.
    Audit { run_dir: PathBuf },
    /// Write SVG plots for a run directory.
    Plot { run_dir: PathBuf },
}

enum Outcome {
    Pass,
    Fail,
}

fn load(path: &Path) -> anyhow::Result<RunConfig> {
    parse_config(path).with_context(|| format!("reading {}", path.display()))
}

fn out_dir(c: &RunConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(&c.io.out_dir))
}

fn run_line(r: &RunResult) -> (String, bool) {
    let mut ok = r.ok();
    let mut s = format!("tau={:.3e} eps={:.3e}", r.tau, r.eps);
    if !r.regime.within_regime {
        s.push_str(" [outside regime]");
    }
    if let Some(((m, n, slack), tol)) = r.ledger_summary() {
        let pass = slack >= -tol;
        ok &= pass;
        s.push_str(&format!(" ledger min slack {slack:.3e} on ({m},{n}) {}", if pass { "ok" } else { "VIOLATED" }));
    }
    if let Some(e) = r.oracle_error {
        s.push_str(&format!(" oracle err {e:.4}"));
    }
    if !r.jumps.is_empty() {
        let ts: Vec<String> = r.jumps.iter().map(|j| format!("{:.5}", j.t_star)).collect();
        s.push_str(&format!(" jumps at {}", ts.join(", ")));
    }
    if let Some(e) = &r.error {
        s.push_str(&format!(" ERROR {e}"));
    }
    (s, ok)
}

fn dispatch(cmd: Cmd) -> anyhow::Result<Outcome> {
    match cmd {
        Cmd::Run { config, out } => {
            let c = load(&config)?;
            let o = execute_run(&c)?;
            let dir = out_dir(&c, out);
            write_run_outputs(&dir, &o)?;
            let (line, ok) = run_line(&o.result);
            println!("{line}");
            if let Some(cl) = &o.classification {
                println!("class: {} ({})", cl.class, cl.reason);
            }
            println!("wrote {}", dir.display());
            Ok(if ok { Outcome::Pass } else { Outcome::Fail })
        }
        Cmd::Sweep { config, out } => {
            let c = load(&config)?;
            let o = execute_sweep(&c)?;
            let dir = out_dir(&c, out);
            write_sweep_outputs(&dir, &o)?;
            let mut ok = true;
            for r in &o.report.runs {
                let (line, pass) = run_line(r);
                ok &= pass;
                println!("{line}");
            }
            for d in &o.report.distances {
                println!(
                    "distance ({:.2e},{:.2e}) -> ({:.2e},{:.2e}): sup_W {:.4e}, L1_Z {:.4e}",
                    d.from.0, d.from.1, d.to.0, d.to.1, d.sup_w, d.l1_z
                );
            }
            match &o.report.certificate {
                Certificate::Contracting { worst_ratio } => println!("convergence: contracting, worst ratio {worst_ratio:.3}"),
                Certificate::NoCertificate { reason } => println!("convergence: no certificate ({reason})"),
            }
            if let Some(cl) = &o.classification {
                println!("class of finest run: {} ({})", cl.class, cl.reason);
            }
            println!("wrote {}", dir.display());
            Ok(if ok { Outcome::Pass } else { Outcome::Fail })
        }
        Cmd::Jumpcost { config, t, out } => {
            let c = load(&config)?;
            let (run, cert) = execute_jumpcost(&c, t)?;
            let dir = out_dir(&c, out);
            write_jumpcost_outputs(&dir, &run, &cert)?;
            println!(
                "t={t} u-={:?} landed u+={:?}\ndrop {:.6} cost {:.6} R-floor {:.6} converged {} reconcile {} admissible {}",
                cert.landed.u_minus.iter().take(4).collect::<Vec<_>>(),
                cert.landed.u_plus.iter().take(4).collect::<Vec<_>>(),
                cert.landed.energy_drop,
                cert.cost.value,
                cert.landed.r_floor,
                cert.cost.converged,
                if cert.verdict.pass { "PASS" } else { "FAIL" },
                cert.admissibility.pass
            );
            println!("wrote {}", dir.display());
            Ok(if cert.certified() { Outcome::Pass } else { Outcome::Fail })
        }
        Cmd::Audit { run_dir } => {
            let a = audit_run_dir(&run_dir)?;
            println!(
                "EL dual residual {:.3e}, pairing gap {:.3e}, eta drift {:.3e} (tol {:.0e}): {}",
                a.el.max_dual_residual,
                a.el.max_pairing_gap,
                a.el.max_eta_drift,
                a.el.tol,
                if a.el.pass { "ok" } else { "FAIL" }
            );
            let (m, n, s) = a.ledger_min;
            println!(
                "ledger min slack {s:.3e} on ({m},{n}), tolerance {:.3e}: {}",
                a.ledger_tol,
                if a.ledger_pass { "ok" } else { "FAIL" }
            );
            if !a.complete {
                println!("trajectory is truncated");
            }
            Ok(if a.pass { Outcome::Pass } else { Outcome::Fail })
        }
        Cmd::Plot { run_dir } => {
            for f in plot_run_dir(&run_dir)? {
                println!("wrote {}", run_dir.join(f).display());
            }
            Ok(Outcome::Pass)
        }
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<Error>(),
            Some(Error::Config { .. } | Error::InvalidParameter(_) | Error::UnstableInitialState { .. })
        )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(EXIT_AUDIT),
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(EXIT_CONFIG)
            } else if e.chain().any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Audit(_)))) {
                ExitCode::from(EXIT_AUDIT)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
