use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info, warn};
use mvps::pipeline::{
    evaluate, preset_solver_config, reconstruct, run_benchmark, write_json, write_outputs, write_scene, Inputs,
    SceneConfig,
};
use mvps::synth::{degraded_estimate, preset_scene, visual_hull, Preset, HULL_RESOLUTION};

const OK: u8 = 0;
const INPUT_ERROR: u8 = 1;
const RUNTIME_FAILURE: u8 = 2;
const WARNINGS: u8 = 3;

#[derive(Parser)]
#[command(name = "mvps", version, about = "Volumetric multi-view photometric stereo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct a surface from a scene config.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        /// Also recover per-vertex albedo.
        #[arg(long)]
        albedo: bool,
        /// Write the final octree to this file.
        #[arg(long)]
        dump_volume: Option<PathBuf>,
    },
    /// RMS/max Hausdorff distance between two meshes.
    Evaluate {
        #[arg(long)]
        rec: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        /// Also write the metrics as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Sweep initial-estimate quality on a synthetic preset and tabulate the final errors.
    Benchmark {
        #[arg(long)]
        preset: Preset,
        #[arg(long)]
        out: PathBuf,
        /// Override the finest octree level.
        #[arg(long)]
        max_level: Option<u8>,
    },
    /// Render a synthetic preset with its initial estimate and scene config.
    Render {
        #[arg(long)]
        preset: Preset,
        #[arg(long)]
        out: PathBuf,
        /// Triangle budget of the initial estimate.
        #[arg(long, default_value_t = 1500)]
        triangles: usize,
        /// Vertex noise of the initial estimate, as a fraction of the mean edge length.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Use the carved visual hull as initial estimate instead.
        #[arg(long)]
        visual_hull: bool,
    },
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(e: impl std::fmt::Display) -> Self {
        Self { code: INPUT_ERROR, message: e.to_string() }
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Self { code: RUNTIME_FAILURE, message: e.to_string() }
    }

    fn classify(e: mvps::Error) -> Self {
        if e.is_input_error() {
            Self::input(e)
        } else {
            Self::runtime(e)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors are input errors; help and version requests succeed.
            let code = if e.use_stderr() { INPUT_ERROR } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Reconstruct { config, albedo, dump_volume } => {
            run_reconstruct(&config, albedo, dump_volume.as_deref())
        }
        Command::Evaluate { rec, gt, samples, json } => run_evaluate(&rec, &gt, samples, json.as_deref()),
        Command::Benchmark { preset, out, max_level } => run_bench(preset, &out, max_level),
        Command::Render { preset, out, triangles, noise, visual_hull } => {
            run_render(preset, &out, triangles, noise, visual_hull)
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            error!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run_reconstruct(config: &Path, albedo: bool, dump_volume: Option<&Path>) -> Result<u8, Failure> {
    let config = SceneConfig::load(config).map_err(Failure::input)?;
    let inputs = Inputs::from_config(&config).map_err(Failure::input)?;
    info!("loaded {} views, initial mesh with {} triangles", inputs.views.len(), inputs.initial_mesh.triangles.len());
    let rec = reconstruct(&inputs, albedo).map_err(Failure::runtime)?;
    let written = write_outputs(&config, &rec, dump_volume).map_err(Failure::runtime)?;
    for p in &written {
        info!("wrote {}", p.display());
    }
    let report = &rec.report;
    if let (Some(h), Some(i)) = (report.hausdorff, report.initial_hausdorff) {
        info!("rms hausdorff {:.6} (initial estimate {:.6})", h.forward.rms, i.forward.rms);
    }
    for w in &report.warnings {
        warn!("{w}");
    }
    Ok(if report.has_warnings() { WARNINGS } else { OK })
}

fn run_evaluate(rec: &Path, gt: &Path, samples: usize, json: Option<&Path>) -> Result<u8, Failure> {
    let eval = evaluate(rec, gt, samples).map_err(Failure::classify)?;
    println!("{}", eval.summary());
    if let Some(p) = json {
        write_json(p, &eval).map_err(Failure::runtime)?;
    }
    Ok(OK)
}

fn run_bench(preset: Preset, out: &Path, max_level: Option<u8>) -> Result<u8, Failure> {
    let mut params = preset_solver_config(preset);
    if let Some(l) = max_level {
        params.max_level = l;
    }
    params.validate().map_err(Failure::input)?;
    let table = run_benchmark(preset, &params).map_err(Failure::runtime)?;
    let csv = table.to_csv();
    fs::write(out, &csv).map_err(|e| Failure::runtime(format!("{}: {e}", out.display())))?;
    print!("{csv}");
    let failed = table.failures().count();
    if failed > 0 {
        warn!("{failed} benchmark cell(s) failed");
        return Ok(WARNINGS);
    }
    Ok(OK)
}

fn run_render(preset: Preset, out: &Path, triangles: usize, noise: f64, hull: bool) -> Result<u8, Failure> {
    let scene = preset_scene::<f64>(preset).map_err(Failure::runtime)?;
    let initial = if hull { visual_hull(&scene, HULL_RESOLUTION) } else { degraded_estimate(&scene, triangles, noise) }
        .map_err(Failure::classify)?;
    let path = write_scene(&scene, &initial, preset_solver_config(preset), out).map_err(Failure::runtime)?;
    info!("wrote {}", path.display());
    Ok(OK)
}
