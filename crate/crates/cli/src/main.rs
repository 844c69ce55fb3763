//! `heston-amer`: pricing, boundary extraction, premium estimation,
//! verification and convergence runs from one JSON config.
//!
//! Exit codes: 0 success, 1 verification failure, 2 config error (nothing
//! written), 3 solver or output failure.

mod config;

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use heston_amer::analysis::{check_symmetry, eep_premium, refinement_study};
use heston_amer::boundary::default_tol;
use heston_amer::{
    extract_boundary, run_suite, solve_american, solve_european, PenaltyFamily, PriceSurface,
    SuiteConfig,
};
use serde::Serialize;
use serde_json::json;

use config::{Command, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "heston-amer", version, about)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, required_unless_present = "print_defaults")]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides the config.
    #[arg(long)]
    threads: Option<usize>,
    /// Monte Carlo seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the default configuration and exit.
    #[arg(long)]
    print_defaults: bool,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<heston_amer::Error> for Failure {
    fn from(e: heston_amer::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

/// Exclusive ownership of the output directory for the life of the run.
struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, Failure> {
        let path = dir.join(".lock");
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| {
                Failure::Config(format!(
                    "output directory {} is locked by another run ({e})",
                    dir.display()
                ))
            })?;
        Ok(Self(path))
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_with<F>(path: &Path, f: F) -> Result<(), Failure>
where
    F: FnOnce(&mut BufWriter<File>) -> heston_amer::Result<()>,
{
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let path = cli.config.as_ref().expect("clap requires --config");
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: RunConfig =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("config: {e}")))?;
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    cfg.validate().map_err(Failure::Config)?;
    Ok(cfg)
}

struct Solved {
    american: PriceSurface,
    european: PriceSurface,
}

fn solve(cfg: &RunConfig) -> Result<Solved, Failure> {
    let spec = cfg.spec();
    let i = cfg.instrument;
    let lattice = cfg.grid.build(&cfg.model, &spec, i.spot, i.y0)?;
    let penalty = PenaltyFamily::for_put(&cfg.model, &spec);
    let (american, european) = rayon::join(
        || solve_american(&cfg.model, &spec, &lattice, &penalty, &cfg.solver),
        || solve_european(&cfg.model, &spec, &lattice, &cfg.solver),
    );
    Ok(Solved {
        american: american?,
        european: european?,
    })
}

/// Runs the command; returns whether verification (if any) passed.
fn execute(cfg: &RunConfig) -> Result<bool, Failure> {
    let dir = &cfg.out;
    let spec = cfg.spec();
    let i = cfg.instrument;
    match cfg.command {
        Command::Price => {
            let s = solve(cfg)?;
            write_with(&dir.join("american_surface.csv"), |w| s.american.write_csv(w))?;
            write_with(&dir.join("european_surface.csv"), |w| s.european.write_csv(w))?;
            fs::write(dir.join("american_surface.json"), s.american.sidecar_json()?)?;
            fs::write(dir.join("european_surface.json"), s.european.sidecar_json()?)?;
            write_json(
                &dir.join("price.json"),
                &json!({
                    "spot": i.spot,
                    "y0": i.y0,
                    "american": s.american.price(i.spot, i.y0),
                    "european": s.european.price(i.spot, i.y0),
                }),
            )?;
        }
        Command::Boundary => {
            let s = solve(cfg)?;
            let b = extract_boundary(&s.american, default_tol(&s.american))?;
            write_with(&dir.join("boundary.csv"), |w| b.write_csv(w))?;
        }
        Command::Eep => {
            let s = solve(cfg)?;
            let b = extract_boundary(&s.american, default_tol(&s.american))?;
            let est = eep_premium(
                &cfg.model,
                &spec,
                i.spot,
                i.y0,
                &b,
                &s.american,
                &s.european,
                &cfg.mc,
            )?;
            write_json(&dir.join("premium.json"), &est)?;
        }
        Command::Verify => {
            let report = run_suite(&SuiteConfig {
                params: cfg.model,
                spec,
                s0: i.spot,
                y0: i.y0,
                grid: cfg.grid,
                solver: cfg.solver,
                mc: cfg.mc,
            })?;
            let mut text = report.to_json()?;
            text.push('\n');
            fs::write(dir.join("report.json"), text)?;
            let table = report.to_text();
            fs::write(dir.join("report.txt"), &table)?;
            print!("{table}");
            return Ok(report.overall_pass);
        }
        Command::Converge => {
            let table = refinement_study(
                &cfg.model,
                &spec,
                i.spot,
                i.y0,
                &cfg.grid,
                cfg.levels,
                &cfg.solver,
                Some(&cfg.mc),
            )?;
            write_with(&dir.join("refinement.csv"), |w| table.write_csv(w))?;
        }
        Command::Symmetry => {
            let (entry, cmp) = check_symmetry(
                &cfg.model, &spec, i.spot, i.y0, &cfg.grid, &cfg.solver, &cfg.mc,
            )?;
            write_json(
                &dir.join("symmetry.json"),
                &json!({ "comparison": cmp, "entry": entry }),
            )?;
            return Ok(entry.passed());
        }
    }
    Ok(true)
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let cfg = load(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Failure::Run(format!("thread pool: {e}")))?;
    fs::create_dir_all(&cfg.out)
        .map_err(|e| Failure::Config(format!("cannot create {}: {e}", cfg.out.display())))?;
    let _lock = DirLock::acquire(&cfg.out)?;
    let started = unix_seconds();
    write_json(&cfg.out.join("resolved_config.json"), &cfg)?;
    let passed = pool.install(|| execute(&cfg))?;
    write_json(
        &cfg.out.join("metadata.json"),
        &json!({
            "command": cfg.command,
            "finished_unix": unix_seconds(),
            "started_unix": started,
            "threads": pool.current_num_threads(),
            "version": env!("CARGO_PKG_VERSION"),
        }),
    )?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_defaults {
        println!(
            "{}",
            serde_json::to_string_pretty(&RunConfig::default()).expect("defaults serialize")
        );
        return ExitCode::SUCCESS;
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
