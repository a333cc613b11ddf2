//! `dmac` — closed-loop adaptive control benchmark simulator.
//!
//! Exit codes: 0 = run(s) converged, 1 = configuration or I/O error,
//! 2 = at least one run diverged.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dmac::harness::{run_experiment, run_sweep, summarize, write_run_csv, write_sweep_json, ExperimentSpec};
use dmac::presets;

#[derive(Parser)]
#[command(name = "dmac", version, about = "Adaptive control benchmark simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop experiment and write its CSV log and summary.
    Run(RunArgs),
    /// Run the hyperparameter and physical robustness sweeps for a preset.
    Sweep(SweepArgs),
    /// Check a configuration without running it.
    Validate(SpecArgs),
    /// List the built-in presets.
    ListPresets,
}

#[derive(Args)]
struct SpecArgs {
    /// Built-in preset name (see `list-presets`).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Key=value configuration file; must contain `preset = <name>`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a single parameter, e.g. `--set lambda=0.99` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Random seed (overrides preset/config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Output directory (default: $DMAC_OUT_DIR or ./out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Output directory (default: $DMAC_OUT_DIR or ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep cells (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Which sweep to run.
    #[arg(long, default_value = "all", value_parser = ["hyper", "physical", "all"])]
    kind: String,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::ListPresets => {
            for name in presets::PRESET_NAMES {
                let spec = presets::preset(name).map_err(|e| e.to_string())?;
                println!(
                    "{name:<12} plant={:<12} Ts={:<5} duration={:<5} lambda={}",
                    spec.plant.name, spec.sample_time, spec.duration, spec.forgetting
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(args) => {
            let spec = build_spec(&args)?;
            spec.validate().map_err(|e| e.to_string())?;
            println!("ok: '{}' is valid ({} steps)", spec.name, spec.steps());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => {
            let spec = build_spec(&args.spec)?;
            let out_dir = out_dir(args.out);
            let log = run_experiment(&spec).map_err(|e| e.to_string())?;
            let summary = summarize(&log, spec.exploration_std).map_err(|e| e.to_string())?;
            let csv_path = write_run_csv(&log, &out_dir).map_err(|e| e.to_string())?;
            let json_path = out_dir.join(format!("{}_{}_summary.json", log.name, log.seed));
            let json = serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?;
            std::fs::write(&json_path, json).map_err(|e| e.to_string())?;
            println!(
                "{}: steps={} final_mean_|z|={:.3e} max_|u|={:.3e} diverged={}",
                summary.name,
                summary.steps,
                summary.final_window_mean_abs_z,
                summary.max_abs_u,
                summary.diverged
            );
            println!("wrote {}", csv_path.display());
            println!("wrote {}", json_path.display());
            Ok(if summary.diverged { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::Sweep(args) => {
            if let Some(jobs) = args.jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build_global()
                    .map_err(|e| e.to_string())?;
            }
            let base = build_spec(&args.spec)?;
            let out_dir = out_dir(args.out);
            let mut any_diverged = false;
            let kinds: &[&str] = match args.kind.as_str() {
                "hyper" => &["hyper"],
                "physical" => &["physical"],
                _ => &["hyper", "physical"],
            };
            for kind in kinds {
                let mut sweep = if *kind == "hyper" {
                    presets::hyperparameter_sweep(&base.name).map_err(|e| e.to_string())?
                } else {
                    presets::physical_sweep(&base.name).map_err(|e| e.to_string())?
                };
                sweep.base = base.clone();
                let cells = run_sweep(&sweep).map_err(|e| e.to_string())?;
                for c in &cells {
                    println!(
                        "{} {}={}: final_mean_|z|={:.3e} diverged={}",
                        kind, c.param, c.value, c.summary.final_window_mean_abs_z, c.summary.diverged
                    );
                    any_diverged |= c.summary.diverged;
                }
                let label = format!("{}_{kind}", base.name);
                let path = write_sweep_json(&label, &cells, &out_dir).map_err(|e| e.to_string())?;
                println!("wrote {}", path.display());
            }
            Ok(if any_diverged { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
    }
}

fn out_dir(cli_out: Option<PathBuf>) -> PathBuf {
    cli_out
        .or_else(|| std::env::var_os("DMAC_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Builds the experiment from preset/config plus overrides, applied in
/// the order preset < config file < --set < --seed.
fn build_spec(args: &SpecArgs) -> Result<ExperimentSpec, String> {
    let mut spec = match (&args.preset, &args.config) {
        (Some(name), None) => presets::preset(name).map_err(|e| e.to_string())?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            spec_from_config(&text)?
        }
        (None, None) => return Err("provide --preset or --config".into()),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    for kv in &args.sets {
        let (key, value) = parse_kv(kv)?;
        spec.set(key, value).map_err(|e| e.to_string())?;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

/// Parses a `key = value` config file. Lines starting with `#` and blank
/// lines are ignored; a `preset` line selects the base configuration and
/// every other key overrides one parameter.
fn spec_from_config(text: &str) -> Result<ExperimentSpec, String> {
    let mut preset_name: Option<&str> = None;
    let mut overrides: Vec<(&str, &str)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(format!("line {}: expected key = value", lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "preset" {
            preset_name = Some(value);
        } else {
            overrides.push((key, value));
        }
    }
    let name = preset_name.ok_or("config must contain `preset = <name>`")?;
    let mut spec = presets::preset(name).map_err(|e| e.to_string())?;
    for (key, value) in overrides {
        let value: f64 = value
            .parse()
            .map_err(|e| format!("bad value for '{key}': {e}"))?;
        spec.set(key, value).map_err(|e| e.to_string())?;
    }
    Ok(spec)
}

fn parse_kv(kv: &str) -> Result<(&str, f64), String> {
    let (key, value) = kv
        .split_once('=')
        .ok_or(format!("--set expects key=value, got '{kv}'"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("bad value in '{kv}': {e}"))?;
    Ok((key.trim(), value))
}
