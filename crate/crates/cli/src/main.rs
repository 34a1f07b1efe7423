use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use xrsim::harness::metrics::{mode_fraction_series, per_bandwidth_compliance, SeedSummary};
use xrsim::harness::run::{read_decisions, read_frames, read_metrics, write_summary};
use xrsim::harness::{aggregate_seeds, run_scenario, sweep, ProfileSpec, ScenarioSpec, SweepGrid};
use xrsim::{ExecutionMode, PolicyKind};

#[derive(Parser)]
#[command(name = "xrsim", version, about = "Battery-aware XR execution management simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy over a set of seeds.
    Run(RunArgs),
    /// Vary one hyperparameter at a time around a base scenario.
    Sweep(SweepArgs),
    /// Combine per-seed metrics.json files into a summary.
    Aggregate(AggregateArgs),
    /// Print a run directory's summary and derive per-bandwidth and mode series.
    Report(ReportArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// TOML scenario file; flags below override its fields.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    policy: Option<PolicyKind>,
    /// Constant bandwidth in Mbps.
    #[arg(long, conflicts_with_all = ["variable", "profile"])]
    stable: Option<f64>,
    /// The default five-level bandwidth cycle.
    #[arg(long, conflicts_with = "profile")]
    variable: bool,
    /// Plain-text profile of `bandwidth dwell` lines.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Horizon in seconds.
    #[arg(long)]
    horizon: Option<f64>,
    /// Decision interval in seconds.
    #[arg(long)]
    interval: Option<f64>,
    /// Output directory.
    #[arg(long, env = "XRSIM_OUT_DIR", default_value = "results")]
    out: PathBuf,
}

impl ScenarioArgs {
    fn build(&self) -> Result<ScenarioSpec> {
        let mut spec = match &self.scenario {
            Some(p) => ScenarioSpec::load(p)?,
            None => ScenarioSpec::default(),
        };
        if let Some(p) = self.policy {
            spec.policy = p;
        }
        if let Some(bw) = self.stable {
            spec.profile = ProfileSpec::stable(bw);
        } else if self.variable {
            spec.profile = ProfileSpec::Variable;
        } else if let Some(p) = &self.profile {
            spec.profile = ProfileSpec::File { path: p.clone() };
        }
        if let Some(s) = &self.seeds {
            spec.seeds = s.clone();
        }
        if let Some(h) = self.horizon {
            spec.env.horizon_s = h;
        }
        if let Some(i) = self.interval {
            spec.env.decision_interval_s = i;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Use the standard grid for every factor not given explicitly.
    #[arg(long)]
    standard: bool,
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    eps_decay: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    intervals: Vec<f64>,
}

#[derive(Args)]
struct AggregateArgs {
    /// metrics.json files or directories searched recursively for them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Where to write summary.json (printed to stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory produced by `run`.
    dir: PathBuf,
    /// Rolling window, in decisions, for the LOCAL fraction series.
    #[arg(long, default_value_t = 30)]
    window: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Aggregate(a) => cmd_aggregate(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let spec = a.scenario.build()?;
    let dir = a.scenario.out.join(spec.label());
    let (_, summary) = run_scenario(&spec, Some(&dir))?;
    print_summary(&summary);
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let mut spec = a.scenario.build()?;
    if a.scenario.policy.is_none() && a.scenario.scenario.is_none() {
        spec.policy = PolicyKind::Rl;
    }
    let std_grid = SweepGrid::standard();
    let pick = |given: &Vec<f64>, fallback: &Vec<f64>| {
        if given.is_empty() && a.standard {
            fallback.clone()
        } else {
            given.clone()
        }
    };
    let grid = SweepGrid {
        gamma: pick(&a.gamma, &std_grid.gamma),
        eps_decay: pick(&a.eps_decay, &std_grid.eps_decay),
        lambda: pick(&a.lambda, &std_grid.lambda),
        decision_interval: pick(&a.intervals, &std_grid.decision_interval),
    };
    let dir = a.scenario.out.join(format!("sweep-{}", spec.label()));
    let rows = sweep(&spec, &grid, Some(&dir))?;
    println!("{:<18} {:>8} {:>12} {:>10} {:>9}", "factor", "value", "compliance%", "power W", "local%");
    for r in &rows {
        let m = &r.summary.metrics;
        println!(
            "{:<18} {:>8} {:>12.1} {:>10.2} {:>9.1}",
            r.factor.name(),
            r.value,
            m["compliance_pct"].median,
            m["avg_power_w"].median,
            m["local_fraction_pct"].median
        );
    }
    println!("wrote {}", dir.join("sweep.csv").display());
    Ok(())
}

fn collect_metrics(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_file() {
        out.push(path.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_metrics(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == "metrics.json") {
            out.push(p);
        }
    }
    Ok(())
}

fn cmd_aggregate(a: AggregateArgs) -> Result<()> {
    let mut files = Vec::new();
    for p in &a.inputs {
        collect_metrics(p, &mut files)?;
    }
    if files.is_empty() {
        bail!("no metrics.json files found");
    }
    let records = files
        .iter()
        .map(|f| read_metrics(f).with_context(|| format!("reading {}", f.display())))
        .collect::<Result<Vec<_>>>()?;
    let summary = aggregate_seeds(&records)?;
    match a.out {
        Some(dir) => {
            write_summary(&dir, &summary)?;
            print_summary(&summary);
            println!("wrote {}", dir.join("summary.json").display());
        }
        None => println!("{}", serde_json::to_string_pretty(&summary)?),
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    if a.window == 0 {
        bail!("window must be at least 1");
    }
    let spec = ScenarioSpec::load(&a.dir.join("scenario.toml"))
        .with_context(|| format!("{} is not a run directory", a.dir.display()))?;
    let profile = spec.profile.build()?;
    let mut records = Vec::new();
    for &seed in &spec.seeds {
        let seed_dir = a.dir.join(format!("seed-{seed}"));
        records.push(read_metrics(&seed_dir.join("metrics.json"))?);

        let frames = read_frames(&seed_dir.join("frames.csv"))?;
        let mut w = csv::Writer::from_path(seed_dir.join("per_bandwidth.csv"))?;
        for b in per_bandwidth_compliance(&frames, &profile) {
            w.serialize(b)?;
        }
        w.flush()?;

        let decisions = read_decisions(&seed_dir.join("decisions.csv"))?;
        let local: Vec<bool> = decisions.iter().map(|d| d.m == ExecutionMode::Local).collect();
        let series = mode_fraction_series(&local, a.window);
        let mut w = csv::Writer::from_path(seed_dir.join("mode_fraction.csv"))?;
        w.write_record(["t", "bandwidth", "local_fraction"])?;
        for (d, f) in decisions.iter().zip(series) {
            w.write_record([d.t.to_string(), d.bandwidth.to_string(), f.to_string()])?;
        }
        w.flush()?;
    }
    let summary = aggregate_seeds(&records)?;
    print_summary(&summary);
    Ok(())
}

fn print_summary(s: &SeedSummary) {
    println!("scenario {} (policy {}, seeds {:?})", s.scenario, s.policy, s.seeds);
    println!("{:<24} {:>12} {:>12} {:>12}", "metric", "median", "min", "max");
    for (name, st) in &s.metrics {
        println!("{:<24} {:>12.3} {:>12.3} {:>12.3}", name, st.median, st.min, st.max);
    }
    if !s.per_bandwidth.is_empty() {
        println!("{:<24} {:>12} {:>12} {:>12}", "compliance% @ Mbps", "median", "min", "max");
        for (bw, st) in &s.per_bandwidth {
            println!("{:<24} {:>12.1} {:>12.1} {:>12.1}", bw, st.median, st.min, st.max);
        }
    }
}
