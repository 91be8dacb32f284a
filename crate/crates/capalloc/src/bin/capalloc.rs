//! Command-line front end: run scenarios, verify recorded traces, sweep
//! parameters, render reports, list presets.
//!
//! Exit codes: 0 success, 1 bound failure, 2 usage error, 3 run divergence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use capalloc::harness::config::ScenarioConfig;
use capalloc::harness::{
    emit_report, presets, run_scenario, sweep_scenario, verify_dir, RunManifest,
};
use capalloc::Error;

#[derive(Parser)]
#[command(
    name = "capalloc",
    about = "Gradient-energy allocation runs, interventions, and bound verification"
)]
struct Cli {
    /// Worker threads for ensemble execution (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Treat assumption-limited reports as failures.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config (a JSON path or a preset name).
    Run {
        config: String,
        /// Override the ensemble base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's output_dir, or out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check every recorded trace in a scenario output directory.
    Verify { trace_dir: PathBuf },
    /// Run a scenario once per value of a config parameter.
    Sweep {
        config: String,
        /// Dot-separated config path, e.g. instance.objective.aux_terms.0.weight
        #[arg(long)]
        param: String,
        /// Comma-separated JSON values, e.g. 0,0.1,1,10
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG charts for a completed scenario directory or manifest.
    Report { manifest: PathBuf },
    /// Preset management.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List available presets.
    List,
    /// Print a preset's config JSON.
    Show { name: String },
}

fn load_config(spec: &str) -> Result<ScenarioConfig, Error> {
    let path = Path::new(spec);
    if path.exists() {
        ScenarioConfig::from_json(&fs::read_to_string(path)?)
    } else if let Some(json) = presets::preset_json(spec) {
        ScenarioConfig::from_json(json)
    } else {
        Err(Error::usage(format!(
            "'{spec}' is neither a config file nor a preset name \
             (try `capalloc presets list`)"
        )))
    }
}

fn out_dir_for(config: &ScenarioConfig, over: Option<PathBuf>) -> PathBuf {
    over.unwrap_or_else(|| {
        config
            .output_dir
            .as_ref()
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out").join(&config.name))
    })
}

fn print_manifest(manifest: &RunManifest, dir: &Path) {
    println!(
        "scenario '{}' ({} runs) -> {}",
        manifest.scenario,
        manifest.runs.len(),
        dir.display()
    );
    for run in &manifest.runs {
        if run.diverged {
            println!(
                "  run {:>3} seed {:<6} DIVERGED: {}",
                run.index,
                run.seed,
                run.error.as_deref().unwrap_or("")
            );
        }
    }
    if let Some(r) = manifest.spearman {
        println!("  spearman(early dispersion, final J) = {r:.4}");
    }
    for report in &manifest.ensemble_reports {
        println!("  {}", report.one_line());
    }
    println!(
        "  bounds: {}",
        if manifest.all_bounds_satisfied {
            "all satisfied"
        } else {
            "FAILURES PRESENT"
        }
    );
}

fn run_command(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut config = load_config(&config)?;
            if let Some(s) = seed {
                config.ensemble.base_seed = s;
            }
            let dir = out_dir_for(&config, out);
            if let Some(sweep) = config.sweep.clone() {
                // A dimension sweep on a scaling instance also runs the
                // isotropic control.
                let outcome = if sweep.param == "instance.d" {
                    let dims: Vec<usize> = sweep
                        .values
                        .iter()
                        .map(|v| {
                            v.as_u64().map(|d| d as usize).ok_or_else(|| {
                                Error::usage(format!("bad dimension value {v}"))
                            })
                        })
                        .collect::<Result<_, _>>()?;
                    capalloc::harness::scaling_sweep(&config, &dims, &dir)?
                } else {
                    sweep_scenario(&config, &sweep.param, &sweep.values, &dir)?
                };
                println!(
                    "sweep '{}' over {} ({} points) -> {}",
                    config.name,
                    sweep.param,
                    outcome.points.len(),
                    dir.display()
                );
                for point in &outcome.points {
                    println!(
                        "  {} = {:<8} mean_J={:.6} mean_NJ={:.4} mean_Ebar={:?} bounds={}",
                        sweep.param,
                        point.value,
                        point.mean_j,
                        point.mean_normalized_j,
                        point
                            .mean_ebar
                            .iter()
                            .map(|v| (v * 1e4).round() / 1e4)
                            .collect::<Vec<_>>(),
                        if point.all_bounds_satisfied { "ok" } else { "FAIL" }
                    );
                }
                for report in &outcome.sweep_reports {
                    println!("  {}", report.one_line());
                }
                return Ok(if outcome.any_diverged {
                    3
                } else if !outcome.all_satisfied {
                    1
                } else {
                    0
                });
            }
            let manifest = run_scenario(&config, &dir)?;
            if manifest.runs.iter().any(|r| !r.diverged) {
                emit_report(&dir)?;
            }
            print_manifest(&manifest, &dir);
            Ok(manifest.exit_code(cli.strict))
        }
        Command::Verify { trace_dir } => {
            let outcome = verify_dir(&trace_dir)?;
            println!("verifying scenario '{}'", outcome.scenario);
            for (index, reports) in &outcome.reports {
                println!("run {index:>3}:");
                for report in reports {
                    println!("  {}", report.one_line());
                }
            }
            let limited_fail = cli.strict && outcome.assumption_limited;
            if outcome.all_satisfied && !limited_fail {
                println!("all bounds satisfied");
                Ok(0)
            } else {
                println!("BOUND FAILURES PRESENT");
                Ok(1)
            }
        }
        Command::Sweep {
            config,
            param,
            values,
            seed,
            out,
        } => {
            let mut config = load_config(&config)?;
            if let Some(s) = seed {
                config.ensemble.base_seed = s;
            }
            let parsed: Result<Vec<serde_json::Value>, Error> = values
                .iter()
                .map(|v| {
                    serde_json::from_str(v)
                        .map_err(|e| Error::usage(format!("bad sweep value '{v}': {e}")))
                })
                .collect();
            let dir = out_dir_for(&config, out).join("sweep");
            let outcome = sweep_scenario(&config, &param, &parsed?, &dir)?;
            for point in &outcome.points {
                println!(
                    "{param} = {:<10} mean_J={:.6e} mean_NJ={:.4e} bounds={}",
                    point.value,
                    point.mean_j,
                    point.mean_normalized_j,
                    if point.all_bounds_satisfied { "ok" } else { "FAIL" }
                );
            }
            for report in &outcome.sweep_reports {
                println!("{}", report.one_line());
            }
            Ok(if outcome.any_diverged {
                3
            } else if !outcome.all_satisfied {
                1
            } else {
                0
            })
        }
        Command::Report { manifest } => {
            let dir = if manifest.is_dir() {
                manifest
            } else {
                manifest
                    .parent()
                    .map(Path::to_path_buf)
                    .unwrap_or_else(|| PathBuf::from("."))
            };
            let written = emit_report(&dir)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(0)
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for name in presets::PRESET_NAMES {
                    let config = presets::load_preset(name)?;
                    println!(
                        "{name:<22} n={:<4} T={:<6} checks={}",
                        config.ensemble.n,
                        config.trainer.horizon,
                        config.checks.len()
                    );
                }
                Ok(0)
            }
            PresetAction::Show { name } => {
                let json = presets::preset_json(&name).ok_or_else(|| {
                    Error::usage(format!("unknown preset '{name}'"))
                })?;
                println!("{json}");
                Ok(0)
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }
    match run_command(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
