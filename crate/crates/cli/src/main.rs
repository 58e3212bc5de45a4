use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use vofflux_core::donating::{audit_fluxing_errors, build_donating_regions, inflow_rates, DrKind, FluxErrorKind};
use vofflux_core::harness::{cases, convergence_sweep, run_case, step_size, Case, CaseConfig, RunResult, TimeSampling};
use vofflux_core::plic::PlicOptions;
use vofflux_core::transport::{Checks, FluxMethod, Model};
use vofflux_core::Mesh;

#[derive(Parser)]
#[command(name = "vofflux", version, about = "Two-phase VOF and staggered momentum transport runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one case to t = T.
    Run {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
    /// Run a case at several resolutions and fit observed orders.
    Sweep {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
        n: Vec<usize>,
    },
    /// Run a case with the fluxing-error audit on every step.
    Audit {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = 64)]
        n: usize,
        /// Audit EMFPA regions built from the initial velocity instead of running.
        #[arg(long)]
        emfpa: bool,
    },
}

#[derive(Args)]
struct CaseArgs {
    #[arg(long, default_value = "vortex2d")]
    case: Case,
    #[arg(long, default_value_t = 0.75)]
    cfl: f64,
    /// Modified-interpolant threshold; `inf` forces CTU on every face.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value = "lw")]
    flux: FluxMethod,
    #[arg(long, default_value = "two")]
    model: Model,
    #[arg(long = "T", default_value_t = 1.0)]
    period: f64,
    #[arg(long, default_value_t = 1e-3)]
    rho_ratio: f64,
    /// Velocity sampling time within a step: `n` or `midpoint`.
    #[arg(long, default_value = "n")]
    vel_time: TimeSampling,
    /// Run this many steps instead of up to T.
    #[arg(long)]
    steps: Option<usize>,
    /// Also check the CTU and modified-interpolant update bounds.
    #[arg(long)]
    check_bounds: bool,
    /// Use height-function normals where available.
    #[arg(long)]
    height_function: bool,
    /// Build the gas donating regions without the volume correction.
    #[arg(long)]
    plain_gas_regions: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CaseArgs {
    fn config(&self, n: usize) -> CaseConfig {
        CaseConfig {
            case: self.case,
            n,
            cfl: self.cfl,
            beta: self.beta,
            method: self.flux,
            model: self.model,
            period: self.period,
            rho_ratio: self.rho_ratio,
            sampling: self.vel_time,
            steps: self.steps,
            checks: Checks { ctu_bound: self.check_bounds, modified_bound: self.check_bounds, audit: false },
            plic: PlicOptions { height_function: self.height_function },
            enforce_gas_volume: !self.plain_gas_regions,
            out: self.out.clone(),
            ..CaseConfig::default()
        }
    }
}

fn summarize(r: &RunResult) {
    let c = &r.config;
    println!("{} n={} model={} flux={} cfl={} beta={}: {} steps, t = {:.6}", c.case.name(), c.n, c.model, c.method, c.cfl, c.beta, r.last.step, r.last.t);
    println!("  mass drift {:.3e}, momentum drift ({:.3e}, {:.3e})", r.mass_drift, r.momentum_drift[0], r.momentum_drift[1]);
    println!("  check margins: alpha {:.3e}, outflow {:.3e}", r.alpha_excess, r.outflow_excess);
    for e in &r.errors {
        println!("  {:<9} l1 {:.4e}  linf {:.4e}  dE/E {:.4e}", e.phase, e.l1, e.linf, e.rel_energy_change);
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { case, n } => {
            let r = run_case(&case.config(n)).context("run failed")?;
            summarize(&r);
            Ok(true)
        }
        Command::Sweep { case, n } => {
            let s = convergence_sweep(&case.config(n[0]), &n).context("sweep failed")?;
            for r in &s.runs {
                summarize(r);
            }
            println!("observed orders (least-squares fit):");
            for o in s.orders.iter().filter(|o| o.pair == "fit") {
                println!("  {:<9} {:<6} {:.3}", o.phase, o.norm, o.order);
            }
            Ok(true)
        }
        Command::Audit { case, n, emfpa } => {
            let mut cfg = case.config(n);
            if emfpa {
                let mesh = Mesh::unit(n)?;
                let (dt, _) = step_size(&mesh, &cfg);
                let u = cases::face_velocity(&mesh, &cfg, 0.0);
                if inflow_rates(&mesh, &u).data.iter().all(|r| *r == 0.0) {
                    bail!("the initial velocity of {} is zero; nothing to audit", cfg.case.name());
                }
                let rep = audit_fluxing_errors(&mesh, &build_donating_regions(&mesh, &u, dt, DrKind::Emfpa), 0);
                report_audit(&rep.errors);
                if let Some(dir) = &cfg.out {
                    std::fs::create_dir_all(dir)?;
                    rep.write_csv(std::fs::File::create(dir.join("audit.csv"))?)?;
                }
                return Ok(rep.is_clean());
            }
            cfg.checks.audit = true;
            let r = run_case(&cfg).context("run failed")?;
            summarize(&r);
            println!("audited {} steps", r.audit_steps);
            report_audit(&r.audit_errors);
            Ok(r.audit_errors.is_empty())
        }
    }
}

fn report_audit(errors: &[vofflux_core::donating::FluxError]) {
    for kind in [FluxErrorKind::Overlap, FluxErrorKind::Transit, FluxErrorKind::Volume, FluxErrorKind::Gap] {
        let hits: Vec<_> = errors.iter().filter(|e| e.error == kind).collect();
        let worst = hits.iter().fold(0.0f64, |m, e| m.max(e.magnitude));
        println!("  {kind:?}: {} (max magnitude {worst:.3e})", hits.len());
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
