use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use dualrate_cli::plotdata::cmd_plotdata;
use dualrate_cli::{
    cmd_run, cmd_sweep, cmd_validate, parse_grid, read_manifest, RunRequest, SweepRequest,
};
use dualrate_ncs::ControllerVariant;

/// Dual-rate PID over a lossy, delayed network.
#[derive(Parser)]
#[command(name = "dualrate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write traces, report and manifest.
    Run(RunArgs),
    /// Simulate all four controllers on common channel draws.
    Compare(RunArgs),
    /// Model-mismatch grid of the delay-independent controller.
    Sweep(SweepArgs),
    /// Extract plot-ready CSVs from trace files.
    Plotdata(PlotArgs),
    /// Check a scenario and print its resolved form.
    Validate {
        #[arg(long)]
        scenario: String,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file or bundled scenario name.
    #[arg(long, required_unless_present = "manifest")]
    scenario: Option<String>,
    /// Single seed (overrides the scenario seed).
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed list `1,2,3` or range `0..10`.
    #[arg(long)]
    seeds: Option<String>,
    /// Output directory (default: $DUALRATE_OUT/<scenario>_<command>,
    /// or ./out/<scenario>_<command>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Only this variant (plus the nominal reference).
    #[arg(long)]
    variant: Option<ControllerVariant>,
    /// Reproduce the run recorded in a manifest.
    #[arg(long, conflicts_with_all = ["scenario", "seed", "seeds", "variant"])]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Grid `q=0,20,30;r=0,8,12` (default: the scenario's sweep keys).
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, hide = true)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Trace CSV files (`trace_<label>.csv`).
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Keep every n-th tick.
    #[arg(long, default_value_t = 10)]
    stride: usize,
}

fn parse_seeds(c: &Common) -> Result<Vec<u64>> {
    if let Some(s) = c.seed {
        return Ok(vec![s]);
    }
    let Some(spec) = c.seeds.as_deref() else {
        return Ok(Vec::new());
    };
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a >= b {
            bail!("empty seed range '{spec}'");
        }
        return Ok((a..b).collect());
    }
    Ok(spec
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<Vec<u64>, _>>()?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) | Command::Compare(a) if a.manifest.is_some() => {
            let m = read_manifest(a.manifest.as_deref().expect("checked"))?;
            let req = RunRequest::from_manifest(&m, a.common.out.clone())?;
            let (manifest, _) = cmd_run(&req, &m.command)?;
            println!("wrote {} files to {}", manifest.files.len(), manifest.out_dir.display());
        }
        Command::Run(a) => {
            let req = RunRequest {
                scenario: a.common.scenario.clone().expect("required"),
                seeds: parse_seeds(&a.common)?,
                variants: a.variant.map(|v| vec![v]),
                out_dir: a.common.out,
            };
            let (manifest, results) = cmd_run(&req, "run")?;
            for r in &results {
                print!("{}", r.report.to_summary(&format!("seed{}.", r.seed)));
            }
            println!("wrote {} files to {}", manifest.files.len(), manifest.out_dir.display());
        }
        Command::Compare(a) => {
            if a.variant.is_some() {
                bail!("compare always runs every variant; use `run --variant`");
            }
            let req = RunRequest {
                scenario: a.common.scenario.clone().expect("required"),
                seeds: parse_seeds(&a.common)?,
                variants: Some(ControllerVariant::ALL.to_vec()),
                out_dir: a.common.out,
            };
            let (manifest, results) = cmd_run(&req, "compare")?;
            for r in &results {
                print!("{}", r.report.to_summary(&format!("seed{}.", r.seed)));
            }
            println!("wrote {} files to {}", manifest.files.len(), manifest.out_dir.display());
        }
        Command::Sweep(a) => {
            let (scenario, seeds, grid) = match &a.manifest {
                Some(p) => {
                    let m = read_manifest(p)?;
                    m.load_config()?;
                    (m.scenario.clone(), m.seeds.clone(), m.grid.as_deref().map(parse_grid).transpose()?)
                }
                None => (
                    a.common.scenario.clone().expect("required"),
                    parse_seeds(&a.common)?,
                    a.grid.as_deref().map(parse_grid).transpose()?,
                ),
            };
            let (manifest, result) = cmd_sweep(&SweepRequest {
                scenario,
                grid,
                seeds,
                out_dir: a.common.out,
            })?;
            println!("degenerate={}", result.degenerate);
            println!("wrote {} files to {}", manifest.files.len(), manifest.out_dir.display());
        }
        Command::Plotdata(a) => {
            let manifest = cmd_plotdata(&a.traces, &a.out, a.stride)?;
            println!("wrote {} files to {}", manifest.files.len(), manifest.out_dir.display());
        }
        Command::Validate { scenario } => print!("{}", cmd_validate(&scenario)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
