use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tmedia::config::RunConfig;
use tmedia::run::{execute, write_outputs, RunOptions};
use tmedia::verify::{default_workers, run_suite, SuiteOptions};
use tmedia::CliError;

#[derive(Parser)]
#[command(name = "tmedia", version, about = "Transparent-media solver and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip SVG plots.
    #[arg(long)]
    no_plots: bool,
    /// Multiplicative slack on the bound checks.
    #[arg(long)]
    slack: Option<f64>,
    /// Override the L^{N/(N-1)} embedding constant.
    #[arg(long)]
    s1: Option<f64>,
    /// Override the Lorentz embedding constant.
    #[arg(long = "s1-tilde")]
    s1_tilde: Option<f64>,
    /// Negate the recovered flux (mutation control).
    #[arg(long, hide = true)]
    inject_flux_sign_flip: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write its report.
    Run {
        #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
        config: Option<PathBuf>,
        #[arg(long)]
        fixture: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the acceptance battery.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

fn run(config: Option<PathBuf>, fixture: Option<String>, common: Common) -> Result<i32, CliError> {
    let mut cfg = match (config, fixture) {
        (Some(path), None) => RunConfig::from_file(&path)?,
        (None, Some(name)) => RunConfig::for_fixture(&name),
        _ => return Err(CliError::Config("give exactly one of --config and --fixture".into())),
    };
    if let Some(s) = common.slack {
        cfg.slack = s;
    }
    cfg.s1 = common.s1.or(cfg.s1);
    cfg.s1_tilde = common.s1_tilde.or(cfg.s1_tilde);
    if common.no_plots {
        cfg.plots = false;
    }
    let dir = common.out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("tmedia-out"));
    let opts = RunOptions { flip_flux_sign: common.inject_flux_sign_flip };
    let mut outcome = execute(&cfg, opts)?;
    write_outputs(&mut outcome, &dir, cfg.plots)?;
    let report = &outcome.report;
    println!(
        "{}: {:?} ({} checks, {} failed)",
        report.problem,
        report.status,
        report.checks.len(),
        report.failed_checks().count()
    );
    for c in report.failed_checks() {
        println!("  FAIL {} eps={:?} computed={:e} bound={:?}", c.name, c.eps, c.computed, c.bound);
    }
    if let Some(fail) = &report.sweep.failure {
        println!("  sweep stopped at eps = {:e}: {}", fail.eps, fail.message);
    }
    println!("report: {}", dir.join("report.json").display());
    Ok(report.exit_code)
}

fn verify(common: Common) -> Result<i32, CliError> {
    let opts = SuiteOptions {
        workers: default_workers(),
        flip_flux_sign: common.inject_flux_sign_flip,
        slack: common.slack.unwrap_or(1.1),
        s1: common.s1,
        s1_tilde: common.s1_tilde,
    };
    let results = run_suite(&opts);
    for r in &results {
        println!("{r}");
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("{passed}/{} criteria passed", results.len());
    if let Some(dir) = &common.out {
        write_verify_artifacts(dir, &results, &common)?;
    }
    Ok(if passed == results.len() { 0 } else { 1 })
}

fn write_verify_artifacts(
    dir: &Path,
    results: &[tmedia::verify::CriterionResult],
    common: &Common,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("verify.json"), serde_json::to_string_pretty(results)? + "\n")?;
    let cfg = RunConfig::for_fixture("torsion-ball:N=2,R=1,m=1,n=64");
    let mut outcome = execute(&cfg, RunOptions { flip_flux_sign: common.inject_flux_sign_flip })?;
    write_outputs(&mut outcome, &dir.join("torsion-ball"), !common.no_plots)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, fixture, common } => run(config, fixture, common),
        Command::Verify { common } => verify(common),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
