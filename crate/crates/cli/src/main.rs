use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ulf::corpus::{dataset_stats, load_dataset, DatasetPaths};
use ulf::harness::config::read_pairs;
use ulf::harness::{self, grid, GridSpace, Method, MetricsReport, RunConfig, SynthJob};

#[derive(Parser)]
#[command(
    name = "ulf",
    version,
    about = "Denoise weakly supervised labels by cross-validation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coverage, LF hits and majority-vote accuracy of a dataset
    Stats(Common),
    /// Majority-vote labels and a classifier trained on them
    Baseline(Common),
    /// Iterative refinement of the LF-to-class mapping
    Ulf(Common),
    /// Downweighting of samples flagged by LF-disjoint cross-validation
    Wscw(Common),
    /// Pruning by the class-to-class confident joint
    Wscl(Common),
    /// Grid search over comma-separated values, selected by dev score
    Grid(Common),
    /// Write a synthetic dataset with gold labels
    Synth(Common),
}

#[derive(Args)]
struct Common {
    /// key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides as `--key value` or `--key=value`, applied after the file
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "OVERRIDES"
    )]
    overrides: Vec<String>,
}

fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            bail!("expected a --key flag, got `{arg}`");
        };
        match flag.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it
                    .next()
                    .with_context(|| format!("missing value for --{flag}"))?;
                out.push((flag.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}

fn pairs(c: &Common) -> Result<Vec<(String, String)>> {
    let mut all = match &c.config {
        Some(p) => read_pairs(p)?,
        None => Vec::new(),
    };
    all.extend(parse_overrides(&c.overrides)?);
    Ok(all)
}

fn run_config(c: &Common, method: Option<Method>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    cfg.apply(pairs(c)?)?;
    if let Some(m) = method {
        cfg.method = m;
    }
    Ok(cfg)
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn stats(c: &Common) -> Result<()> {
    let cfg = run_config(c, None)?;
    let (Some(docs), Some(z), Some(t)) = (cfg.docs.clone(), cfg.z.clone(), cfg.t.clone()) else {
        bail!("docs, z and t are required (or set --data)");
    };
    let ds = load_dataset(&DatasetPaths {
        docs,
        z,
        t,
        gold: cfg.gold.clone(),
    })?;
    let s = to_json(&dataset_stats(&ds, cfg.repeats, cfg.seed));
    if let Some(dir) = &cfg.run_dir {
        write_file(&dir.join("stats.json"), &format!("{s}\n"))?;
    }
    println!("{s}");
    Ok(())
}

fn print_report(r: &MetricsReport) {
    let line = |name: &str, s: &Option<harness::Summary>| {
        if let Some(s) = s {
            println!(
                "{name:<24} {:.4} ± {:.4} (n={})",
                s.mean,
                s.sem,
                s.values.len()
            );
        }
    };
    println!(
        "method {} strategy {} metric {}",
        r.method, r.strategy, r.metric
    );
    line("test", &r.test);
    line("dev", &r.dev);
    line("label accuracy", &r.label_accuracy);
    line("majority label accuracy", &r.majority_label_accuracy);
    for f in &r.failures {
        eprintln!("repeat {} failed: {}", f.repeat, f.error);
    }
}

fn method(c: &Common, m: Method) -> Result<()> {
    let cfg = run_config(c, Some(m))?;
    let report = harness::run(&cfg)?;
    print_report(&report);
    if report.failures.len() == report.repeats {
        bail!("every repeat failed");
    }
    Ok(())
}

fn grid_cmd(c: &Common) -> Result<()> {
    let space = GridSpace::from_pairs(pairs(c)?)?;
    space.base.validate()?;
    let splits = harness::load_splits(&space.base)?;
    let result = harness::grid_search(&space, &splits)?;
    if let Some(dir) = &space.base.run_dir {
        grid::write_grid(dir, &result)?;
    }
    print!("{}", result.table());
    println!("best point {}", result.best_index);
    print!("{}", result.best.to_pairs_text());
    Ok(())
}

fn synth(c: &Common) -> Result<()> {
    let mut job = SynthJob::default();
    job.apply(pairs(c)?)?;
    let job = job.finish()?;
    harness::write_synth(&job)?;
    println!(
        "wrote {}",
        job.out.as_deref().unwrap_or(Path::new("")).display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Stats(c) => stats(c),
        Command::Baseline(c) => method(c, Method::BaselineMajority),
        Command::Ulf(c) => method(c, Method::Ulf),
        Command::Wscw(c) => method(c, Method::Wscw),
        Command::Wscl(c) => method(c, Method::Wscl),
        Command::Grid(c) => grid_cmd(c),
        Command::Synth(c) => synth(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
