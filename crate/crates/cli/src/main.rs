//! `tlroa` command-line front end: forward RoA grids, TLRoA boundaries,
//! fault assessment, and parameter sweeps, all driven by one config file.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 hard saturation requested where time reversal is required.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use tlroa_core::assess::{assess, clearing_windows};
use tlroa_core::config::{example_config, Document, RunConfig};
use tlroa_core::export::{
    boundary_json, write_boundary_csv, write_grid_csv, write_scan_csv, write_sweep_csv,
    write_trajectory_csv, PhasePlot, RunManifest, SCHEMA_VERSION, TOOL_VERSION,
};
use tlroa_core::lyap::build_seed;
use tlroa_core::assess::AssessError;
use tlroa_core::ode::IntegrateError;
use tlroa_core::roa::{estimate_tlroa, forward_roa, sweep_tlroa, RoaError, TlroaEstimate};

#[derive(Parser)]
#[command(name = "tlroa", version, about = "Transient-stability assessment for a grid-following converter")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration file (sectioned key = value text).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override a config entry, e.g. --set tlroa.t_back_s=0.9 (repeatable).
    #[arg(long, global = true, value_name = "key=value")]
    set: Vec<String>,

    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Byte-identical outputs across runs: wall-clock timing is omitted.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a grid of post-fault initial conditions by forward simulation.
    ForwardRoa,
    /// Estimate the time-limited region of attraction by reverse integration.
    Tlroa,
    /// Assess the configured fault and scan clearing times into windows.
    Assess,
    /// One TLRoA per value of a swept parameter, with area comparison.
    Sweep,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::ForwardRoa => "forward-roa",
            Command::Tlroa => "tlroa",
            Command::Assess => "assess",
            Command::Sweep => "sweep",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: could not configure {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }

    // Configuration phase: any failure here exits 2 before touching outputs.
    let (doc, cfg) = match load_config(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            return ExitCode::from(2);
        }
    };

    match run(&cli, &doc, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_hard_saturation(&e) {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn is_hard_saturation(e: &anyhow::Error) -> bool {
    // Transparent error wrappers forward source() past the wrapped error, so
    // check the wrapper enums as well as the bare integrator error.
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<IntegrateError>(),
            Some(IntegrateError::HardSaturationNotReversible)
        ) || matches!(
            c.downcast_ref::<RoaError>(),
            Some(RoaError::Integrate(IntegrateError::HardSaturationNotReversible))
        ) || matches!(
            c.downcast_ref::<AssessError>(),
            Some(AssessError::Integrate(IntegrateError::HardSaturationNotReversible))
        )
    })
}

fn load_config(cli: &Cli) -> Result<(Document, RunConfig)> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?,
        None => example_config().to_string(),
    };
    let mut doc = Document::parse(&text)?;
    for assignment in &cli.set {
        doc.set(assignment)?;
    }
    let cfg = RunConfig::from_document(&doc)?;
    Ok((doc, cfg))
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Outputs> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn run(cli: &Cli, doc: &Document, cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let hash = doc.hash();
    let mut out = Outputs::create(&cli.out)?;
    let mut sim_count = 0usize;

    let build_estimate = |sim_count: &mut usize| -> Result<TlroaEstimate> {
        let seed = build_seed(
            &cfg.scenario,
            cfg.seed_semi_axis_rad,
            cfg.seed_n_check,
            &cfg.integrator,
        )?;
        *sim_count += seed.validation_sims;
        let est = estimate_tlroa(
            &cfg.scenario,
            &seed,
            cfg.t_back_s,
            &cfg.sampler,
            &cfg.integrator,
        )?;
        *sim_count += est.sim_count;
        for w in &est.curve.metadata.warnings {
            eprintln!("warning: {w}");
        }
        Ok(est)
    };

    match cli.command {
        Command::ForwardRoa => {
            let seed = build_seed(
                &cfg.scenario,
                cfg.seed_semi_axis_rad,
                cfg.seed_n_check,
                &cfg.integrator,
            )?;
            sim_count += seed.validation_sims;
            let grid = cfg.grid_spec(seed.x_eq);
            let classified = forward_roa(&cfg.scenario, &grid, &seed, &cfg.integrator)?;
            sim_count += classified.sim_count;

            let mut csv = Vec::new();
            write_grid_csv(&mut csv, &classified, &hash)?;
            out.write("grid.csv", &csv)?;

            let mut plot = PhasePlot::new("Forward region of attraction");
            plot.add_grid(&classified);
            plot.add_closed_curve(&seed.polygonize(128), "#000000");
            out.write("roa.svg", plot.render().as_bytes())?;
            let stable = classified
                .labels
                .iter()
                .filter(|l| l.is_stable())
                .count();
            println!(
                "forward-roa: {} of {} cells stable ({} simulations)",
                stable,
                classified.labels.len(),
                sim_count
            );
        }
        Command::Tlroa => {
            let est = build_estimate(&mut sim_count)?;

            let mut csv = Vec::new();
            write_boundary_csv(&mut csv, &est, &hash)?;
            out.write("boundary.csv", &csv)?;
            let json = serde_json::to_string_pretty(&boundary_json(&est, &hash))?;
            out.write("boundary.json", json.as_bytes())?;

            let mut plot = PhasePlot::new("Time-limited region of attraction");
            plot.add_closed_curve(&est.curve.vertices, "#1f4e9c");
            plot.add_closed_curve(&est.seed.polygonize(128), "#000000");
            out.write("tlroa.svg", plot.render().as_bytes())?;
            println!(
                "tlroa: {} boundary samples, area {:.4} (t_back = {} s, {} simulations)",
                est.samples.len(),
                est.curve.area(),
                est.curve.t_back,
                sim_count
            );
        }
        Command::Assess => {
            let est = build_estimate(&mut sim_count)?;
            let result = assess(&cfg.scenario, &est, cfg.k_max, &cfg.integrator)?;
            sim_count += result.sim_count;
            let scan = clearing_windows(
                &cfg.scenario,
                &est,
                cfg.t_clear_min_s,
                cfg.t_clear_max_s,
                cfg.n_clear,
                cfg.k_max,
                &cfg.integrator,
            )?;
            sim_count += scan.sim_count;

            let mut csv = Vec::new();
            write_trajectory_csv(&mut csv, &result.trajectory, &hash)?;
            out.write("fault_trajectory.csv", &csv)?;
            let mut csv = Vec::new();
            write_scan_csv(&mut csv, &scan, &hash)?;
            out.write("clearing_scan.csv", &csv)?;

            let json = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "config_hash": hash,
                "verdict": result.verdict,
                "clearing_state": result.clearing_state,
                "windows": scan.windows,
                "transitions_s": scan.transitions,
                "mismatch_count": scan.mismatch_count,
            });
            out.write(
                "assessment.json",
                serde_json::to_string_pretty(&json)?.as_bytes(),
            )?;

            let mut plot = PhasePlot::new("Fault assessment");
            for k in -cfg.k_max..=cfg.k_max {
                let color = if k == 0 { "#1f4e9c" } else { "#8aa4d0" };
                plot.add_closed_curve(&est.curve.translated(k).vertices, color);
            }
            plot.add_trajectory(&result.trajectory, "#c0392b");
            out.write("assessment.svg", plot.render().as_bytes())?;
            println!(
                "assess: verdict {:?}; {} window(s), transitions at {:?} ({} simulations)",
                result.verdict,
                scan.windows.len(),
                scan.transitions,
                sim_count
            );
        }
        Command::Sweep => {
            let axis = cfg
                .sweep_axis
                .ok_or_else(|| anyhow!("sweep requires [sweep] axis in the config"))?;
            if cfg.sweep_values.is_empty() {
                bail!("sweep requires [sweep] values in the config");
            }
            // kA/s values for the ramp axis are converted here, where the
            // system base is known.
            let values: Vec<f64> = if axis == tlroa_core::roa::SweepAxis::RampRate {
                cfg.sweep_values
                    .iter()
                    .map(|v| cfg.scenario.params.ramp_ka_per_s_to_pu(*v))
                    .collect()
            } else {
                cfg.sweep_values.clone()
            };
            let sweep = sweep_tlroa(
                &cfg.scenario,
                axis,
                &values,
                cfg.t_back_s,
                &cfg.sampler,
                &cfg.integrator,
            )?;
            sim_count += sweep.sim_count;

            let mut csv = Vec::new();
            write_sweep_csv(&mut csv, &sweep, &hash)?;
            out.write("sweep.csv", &csv)?;

            let mut plot = PhasePlot::new(&format!("TLRoA sweep over {}", axis.name()));
            let palette = ["#1f4e9c", "#c0392b", "#1e8449", "#b7950b", "#6c3483"];
            for (i, entry) in sweep.entries.iter().enumerate() {
                plot.add_closed_curve(&entry.curve.vertices, palette[i % palette.len()]);
            }
            out.write("sweep.svg", plot.render().as_bytes())?;
            for (orig, entry) in cfg.sweep_values.iter().zip(&sweep.entries) {
                println!(
                    "sweep {} = {}: area {:.4} ({} samples)",
                    axis.name(),
                    orig,
                    entry.area,
                    entry.sample_count
                );
            }
        }
    }

    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        command: cli.command.name().to_string(),
        config_hash: hash,
        overrides: cli.set.clone(),
        wall_time_s: (!cli.deterministic).then(|| started.elapsed().as_secs_f64()),
        simulation_count: sim_count,
        outputs: out.files.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(out.dir.join("manifest.json"), json)?;
    Ok(())
}
