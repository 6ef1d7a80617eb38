//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 typed halt of a
//! trajectory, 3 failed verification property.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::flow::{self, FlowTrajectory};
use crate::io;
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_HALT: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// Worker-pool cap for parameter sweeps.
pub const THREADS_ENV: &str = "FLATFLOW_THREADS";

#[derive(Debug, Parser)]
#[command(name = "flatflow2d", version, about = "Constrained flat flow for anisotropic surface diffusion of planar curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the discrete flat flow (or a parameter sweep of it).
    Run(CommonArgs),
    /// Run the sharp-interface reference solver.
    Reference(CommonArgs),
    /// Compare the two trajectory directories named in `[compare]`.
    Compare(CommonArgs),
    /// Run the property suite.
    Verify(CommonArgs),
    /// Export the Wulff boundary of the configured anisotropy.
    Wulff(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Snapshot stride (overrides `scheme.snapshot_stride`).
    #[arg(long)]
    stride: Option<usize>,
    /// Also write an SVG with one polyline per snapshot.
    #[arg(long)]
    svg: bool,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Reference(a) => cmd_reference(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Wulff(a) => cmd_wulff(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn load(a: &CommonArgs) -> Result<RunConfig> {
    let path = a.config.as_ref().ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    RunConfig::load(path)
}

fn load_or_default(a: &CommonArgs) -> Result<RunConfig> {
    match &a.config {
        Some(p) => RunConfig::load(p),
        None => RunConfig::from_toml("[initial_curve]\nkind = \"wulff\"\n"),
    }
}

fn stride(a: &CommonArgs, cfg: &RunConfig) -> Result<usize> {
    match a.stride {
        Some(0) => Err(Error::Config("--stride must be positive".into())),
        Some(k) => Ok(k),
        None => Ok(cfg.scheme.snapshot_stride),
    }
}

fn report(dir: &Path, traj: &FlowTrajectory, solver: &str, svg: bool) -> Result<i32> {
    let s = io::write_trajectory(dir, traj, solver, svg)?;
    match &s.halt {
        None => {
            println!("{}: completed {} steps to t = {}, F = {:.12e}", dir.display(), s.steps_completed, s.final_time, s.final_energies.f_total);
            Ok(EXIT_OK)
        }
        Some(h) => {
            eprintln!("{}: halted ({}) at step {}: {}", dir.display(), s.exit_reason, h.step, h.reason);
            Ok(EXIT_HALT)
        }
    }
}

/// Pool size: `FLATFLOW_THREADS` if set to a positive integer, else the
/// available parallelism, never more than `jobs`.
pub fn worker_count(jobs: usize) -> usize {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    cap.min(jobs).max(1)
}

fn cmd_run(a: &CommonArgs) -> Result<i32> {
    let cfg = load(a)?;
    let e0 = cfg.initial_curve()?;
    let stride = stride(a, &cfg)?;
    let out = cfg.output_dir(a.out.as_deref());
    let points = cfg.sweep_points();
    let base = cfg.step_config()?;
    let jobs: Vec<(PathBuf, crate::step::StepConfig)> = points
        .iter()
        .enumerate()
        .map(|(i, &(h, beta))| {
            let mut sc = base.clone();
            sc.h = h;
            sc.beta = beta;
            sc.cache = Default::default();
            let dir = if points.len() == 1 { out.clone() } else { out.join(format!("run_{i:03}")) };
            (dir, sc)
        })
        .collect();
    for (_, sc) in &jobs {
        sc.validate_for(&e0).map_err(|e| Error::Config(e.to_string()))?;
    }
    let t_final = cfg.scheme.t_final;
    let next = AtomicUsize::new(0);
    let codes = Mutex::new(vec![Ok(EXIT_OK); jobs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..worker_count(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((dir, sc)) = jobs.get(i) else { break };
                let r = flow::run_flat_flow(&e0, sc, t_final, stride).and_then(|t| report(dir, &t, "flat_flow", a.svg));
                codes.lock().expect("no poisoned workers")[i] = r;
            });
        }
    });
    let mut worst = EXIT_OK;
    for r in codes.into_inner().expect("no poisoned workers") {
        worst = worst.max(r?);
    }
    Ok(worst)
}

fn cmd_reference(a: &CommonArgs) -> Result<i32> {
    let cfg = load(a)?;
    let e0 = cfg.initial_curve()?;
    let an = cfg.anisotropy()?;
    let model = cfg.bulk_model()?;
    model.check_contains(&e0).map_err(|e| Error::Config(e.to_string()))?;
    let dt = cfg.reference.dt.unwrap_or_else(|| flow::default_reference_dt(&e0, &an));
    let t_final = cfg.reference.t_final.unwrap_or(cfg.scheme.t_final);
    let traj = flow::run_pde_reference(&e0, &an, &model, dt, t_final, stride(a, &cfg)?)?;
    report(&cfg.output_dir(a.out.as_deref()), &traj, "reference", a.svg)
}

fn cmd_compare(a: &CommonArgs) -> Result<i32> {
    let cfg = load(a)?;
    let spec = cfg.compare.clone().ok_or_else(|| Error::Config("[compare] section with a and b is required".into()))?;
    let read = |p: &Path| io::read_trajectory(&cfg.resolve(p)).map_err(|e| Error::Config(format!("compare input: {e}")));
    let (ta, tb) = (read(&spec.a)?, read(&spec.b)?);
    let rows = flow::compare(&ta, &tb);
    let out = cfg.output_dir(a.out.as_deref());
    fs::create_dir_all(&out)?;
    fs::write(out.join("compare.csv"), io::comparison_csv(&rows))?;
    let worst = rows.iter().map(|r| r.hausdorff).fold(0.0, f64::max);
    println!("{} matched snapshots, max Hausdorff {worst:.6e}", rows.len());
    Ok(EXIT_OK)
}

fn cmd_verify(a: &CommonArgs) -> Result<i32> {
    let cfg = load_or_default(a)?;
    let props = verify::run_suite(cfg.seed);
    let text: String = props.iter().map(|p| p.line() + "\n").collect();
    print!("{text}");
    let out = match (&a.out, &a.config) {
        (None, None) => None,
        _ => Some(cfg.output_dir(a.out.as_deref())),
    };
    if let Some(out) = out {
        fs::create_dir_all(&out)?;
        fs::write(out.join("verify_report.txt"), &text)?;
        fs::write(out.join("verify_report.json"), serde_json::to_string_pretty(&props).expect("report serializes"))?;
    }
    let failed: Vec<&str> = props.iter().filter(|p| !p.passed).map(|p| p.name).collect();
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("failed properties: {}", failed.join(", "));
        Ok(EXIT_VERIFY)
    }
}

fn cmd_wulff(a: &CommonArgs) -> Result<i32> {
    let cfg = load_or_default(a)?;
    let w = cfg.anisotropy()?.wulff_boundary(cfg.n)?;
    let out = cfg.output_dir(a.out.as_deref());
    fs::create_dir_all(&out)?;
    fs::write(out.join("wulff.json"), w.to_json())?;
    if a.svg {
        fs::write(out.join("wulff.svg"), io::svg_frames(std::slice::from_ref(&w)))?;
    }
    println!("{}", out.join("wulff.json").display());
    Ok(EXIT_OK)
}
