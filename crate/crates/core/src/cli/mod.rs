//! Command implementations behind the `tomosar` binary.
//!
//! Numeric knobs come from JSON configs; paths, seeds and toggles are flags.
//! A config file not given on the command line is looked up in the directory
//! named by `TOMOSAR_CONFIG_DIR`, falling back to built-in defaults.
//!
//! Exit codes: 0 success, 2 usage, 3 config, 4 io, 5 archive,
//! 6 invalid parameter / scene / shape, 7 numeric, 8 metric, 1 other.

mod manifest;
mod products;
pub mod store;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{self, CellSpacing, EvalConfig, Metrics};
use crate::geometry::{generate_scene, synthesize_observation_with, GeometryConfig, SceneSpec};
use crate::network::{init_params, reconstruct_volume, NetworkConfig};
use crate::solvers::{solve_volume, Method, RegLambda, SolverConfig};
use crate::training::{make_slices, train_resume, TrainConfig, TrainState};

pub use manifest::{
    read_json, read_manifest, write_json, Invocation, RunManifest, Timing, GEOMETRY_FILE,
    MANIFEST_FILE, TIMING_FILE,
};
pub use products::{heatmap_csv, heatmap_pgm, slice_magnitudes};

use manifest::RunClock;

pub const CONFIG_DIR_ENV: &str = "TOMOSAR_CONFIG_DIR";

#[derive(Debug, Parser)]
#[command(name = "tomosar", version, about = "Multi-baseline SAR tomography toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterise a scene and synthesise noisy multi-baseline observations.
    Simulate {
        /// Scene description (JSON).
        scene: PathBuf,
        #[arg(long)]
        geometry: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        noise_sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Invert every cell of a dataset with ISTA or FISTA.
    Solve {
        /// Dataset directory written by `simulate`.
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Fista)]
        method: MethodArg,
        /// Absolute l1 weight; overrides the solver config.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        solver: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the reconstruction network on a simulated dataset.
    Train {
        /// Dataset directory written by `simulate`.
        dataset: PathBuf,
        /// Training config with `network` and `training` sections.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `training.epochs`.
        #[arg(long)]
        epochs: Option<usize>,
        /// Continue from this checkpoint; its network layout wins over the config.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a trained network over every range slice of a dataset.
    Reconstruct {
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a reconstruction against the truth and append a row to a metrics CSV.
    Evaluate {
        /// Volume directory written by `solve` or `reconstruct`.
        recon: PathBuf,
        /// Dataset directory holding the truth.
        #[arg(long)]
        truth: PathBuf,
        /// Row label; defaults to the producing command's method.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        eval: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write point clouds, heatmaps or CSV tables from a volume or a cloud.
    Export {
        /// Volume directory, `.atsr` archive, or `.xyz` point cloud.
        input: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        /// Range line of the heatmap slice.
        #[arg(long, default_value_t = 0)]
        range: usize,
        #[arg(long)]
        eval: Option<PathBuf>,
        /// Geometry used when the input carries none.
        #[arg(long)]
        geometry: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-execute the command recorded in a manifest.
    Rerun {
        /// A `manifest.json` or the directory containing it.
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ista,
    Fista,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ista => Method::Ista,
            MethodArg::Fista => Method::Fista,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Xyz,
    Ply,
    PgmHeatmap,
    Csv,
}

/// `train.json`: both sections are optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainFile {
    pub network: NetworkConfig,
    pub training: TrainConfig,
}

/// Explicit path, else `$TOMOSAR_CONFIG_DIR/<name>` if present, else `None`.
fn config_path(explicit: Option<&Path>, name: &str) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    let dir = std::env::var_os(CONFIG_DIR_ENV)?;
    let p = Path::new(&dir).join(name);
    p.is_file().then_some(p)
}

fn load_or_default<T>(explicit: Option<&Path>, name: &str) -> Result<T>
where
    T: Default + for<'de> Deserialize<'de>,
{
    match config_path(explicit, name) {
        Some(p) => read_json(&p),
        None => Ok(T::default()),
    }
}

/// Single-line `error[category]: message` for the command line.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\n', " ");
    format!("error[{}]: {msg}", e.category())
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            scene,
            geometry,
            noise_sigma,
            seed,
            threads,
            out,
        } => {
            let inv = Invocation::Simulate {
                geometry: load_or_default(geometry.as_deref(), "geometry.json")?,
                scene: read_json(&scene)?,
                noise_sigma,
                seed,
                threads,
            };
            execute(&inv, &out)
        }
        Command::Solve {
            input,
            method,
            lambda,
            iters,
            solver,
            threads,
            out,
        } => {
            let mut cfg: SolverConfig = load_or_default(solver.as_deref(), "solver.json")?;
            if let Some(l) = lambda {
                cfg.reg_lambda = RegLambda::Fixed(l);
            }
            if let Some(k) = iters {
                cfg.max_iters = k;
            }
            let inv = Invocation::Solve {
                input,
                method: method.into(),
                solver: cfg,
                threads,
            };
            execute(&inv, &out)
        }
        Command::Train {
            dataset,
            config,
            epochs,
            resume,
            out,
        } => {
            let mut file: TrainFile = load_or_default(config.as_deref(), "train.json")?;
            if let Some(e) = epochs {
                file.training.epochs = e;
            }
            let inv = Invocation::Train {
                dataset,
                network: file.network,
                training: file.training,
                resume,
            };
            execute(&inv, &out)
        }
        Command::Reconstruct {
            input,
            checkpoint,
            threads,
            out,
        } => execute(
            &Invocation::Reconstruct {
                input,
                checkpoint,
                threads,
            },
            &out,
        ),
        Command::Evaluate {
            recon,
            truth,
            method,
            eval,
            out,
        } => {
            let cfg: EvalConfig = load_or_default(eval.as_deref(), "eval.json")?;
            cmd_evaluate(&recon, &truth, method.as_deref(), &cfg, &out).map(|_| ())
        }
        Command::Export {
            input,
            format,
            range,
            eval,
            geometry,
            out,
        } => {
            let cfg: EvalConfig = load_or_default(eval.as_deref(), "eval.json")?;
            let geometry = config_path(geometry.as_deref(), "geometry.json");
            cmd_export(&input, format, range, &cfg, geometry.as_deref(), &out)
        }
        Command::Rerun { manifest, out } => {
            let m = read_manifest(&manifest)?;
            execute(&m.invocation, &out)
        }
    }
}

/// Runs a directory-producing command and writes its manifest, geometry and timing.
pub fn execute(inv: &Invocation, out: &Path) -> Result<()> {
    let clock = RunClock::start();
    let (geometry, compute) = match inv {
        Invocation::Simulate {
            geometry,
            scene,
            noise_sigma,
            seed,
            threads,
        } => {
            let (t, c) = timed(|| simulate(geometry, scene, *noise_sigma, *seed, *threads))?;
            store::create_dir(out)?;
            store::write_dataset(out, &t.0, &t.1)?;
            (geometry.clone(), c)
        }
        Invocation::Solve {
            input,
            method,
            solver,
            threads,
        } => {
            let (geometry, obs) = store::read_observations(input)?;
            let r = geometry.measurement_matrix()?;
            let (vol, c) = timed(|| solve_volume(&r, &obs, solver, *method, *threads))?;
            store::create_dir(out)?;
            store::write_volume(out, &vol)?;
            (geometry, c)
        }
        Invocation::Train {
            dataset,
            network,
            training,
            resume,
        } => {
            let (geometry, truth, obs) = store::read_dataset(dataset)?;
            let data = make_slices(&truth, &obs)?;
            let (fit, _) = data.split(training.holdout);
            let (state, mut history) = match resume {
                Some(dir) => store::read_checkpoint(dir)?,
                None => {
                    let r = geometry.measurement_matrix()?;
                    let cfg = NetworkConfig {
                        slice_width: data.azimuth_count,
                        ..*network
                    };
                    (TrainState::new(init_params(&r, cfg, training.seed)?), Vec::new())
                }
            };
            store::create_dir(out)?;
            let interval = training.checkpoint_interval;
            let mut so_far = history.clone();
            let start = Instant::now();
            let (state, new) = train_resume(&fit, state, training, |s, rec| {
                so_far.push(*rec);
                if interval > 0 && s.epoch % interval == 0 {
                    store::write_checkpoint(out, s, &so_far)?;
                }
                Ok(())
            })?;
            let c = start.elapsed().as_secs_f64();
            history.extend(new);
            store::write_checkpoint(out, &state, &history)?;
            (geometry, c)
        }
        Invocation::Reconstruct {
            input,
            checkpoint,
            threads,
        } => {
            let (geometry, obs) = store::read_observations(input)?;
            let params = store::read_params(checkpoint)?;
            let (vol, c) = timed(|| reconstruct_volume(&params, &obs, *threads))?;
            store::create_dir(out)?;
            store::write_volume(out, &vol)?;
            (geometry, c)
        }
    };
    clock.finish(out, inv, &geometry, compute)
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed().as_secs_f64()))
}

fn simulate(
    geometry: &GeometryConfig,
    scene: &SceneSpec,
    noise_sigma: f64,
    seed: u64,
    threads: usize,
) -> Result<(crate::geometry::GroundTruthVolume, crate::geometry::ObservationVolume)> {
    let r = geometry.measurement_matrix()?;
    let truth = generate_scene(scene, r.grid())?;
    let obs = synthesize_observation_with(&r, &truth, noise_sigma, seed, threads)?;
    Ok((truth, obs))
}

fn spacing_of(g: &GeometryConfig) -> CellSpacing {
    CellSpacing {
        azimuth: g.azimuth_spacing,
        range: g.range_spacing,
    }
}

/// Appends one metrics row to `out`, writing the header first if the file is new or empty.
pub fn cmd_evaluate(
    recon: &Path,
    truth_dir: &Path,
    method: Option<&str>,
    cfg: &EvalConfig,
    out: &Path,
) -> Result<Metrics> {
    let (geometry, truth, _) = store::read_dataset(truth_dir)?;
    let vol = store::read_volume(recon)?;
    let recon_dir = if recon.is_dir() { Some(recon) } else { None };
    let label = match (method, recon_dir) {
        (Some(m), _) => m.to_string(),
        (None, Some(dir)) => match read_manifest(dir)?.invocation {
            Invocation::Solve { method, .. } => match method {
                Method::Ista => "ista".into(),
                Method::Fista => "fista".into(),
            },
            Invocation::Reconstruct { .. } => "network".into(),
            other => other.name().into(),
        },
        (None, None) => "unknown".into(),
    };
    if label.contains([',', '\n']) {
        return Err(Error::InvalidParameter(format!("method label {label:?} is not CSV-safe")));
    }
    let wall = match recon_dir {
        Some(dir) => read_json::<Timing>(&dir.join(TIMING_FILE))?.compute_seconds,
        None => 0.0,
    };
    let metrics = evaluation::evaluate(&label, &vol, &truth, spacing_of(&geometry), cfg, wall)?;
    let fresh = fs::metadata(out).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .map_err(|e| Error::io(out, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(evaluation::METRICS_HEADER);
        text.push('\n');
    }
    text.push_str(&evaluation::metrics_row(&metrics));
    text.push('\n');
    f.write_all(text.as_bytes()).map_err(|e| Error::io(out, e))?;
    Ok(metrics)
}

/// Geometry for an export input: the input directory's own, then an explicit
/// or config-dir file, then the built-in default.
fn export_geometry(input: &Path, fallback: Option<&Path>) -> Result<GeometryConfig> {
    let own = input.is_dir().then(|| input.join(GEOMETRY_FILE)).filter(|p| p.is_file());
    match own.as_deref().or(fallback) {
        Some(p) => read_json(p),
        None => Ok(GeometryConfig::default()),
    }
}

pub fn cmd_export(
    input: &Path,
    format: ExportFormat,
    range: usize,
    cfg: &EvalConfig,
    geometry: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let is_cloud = input.extension().is_some_and(|e| e == "xyz");
    if is_cloud {
        let cloud = evaluation::read_xyz(input)?;
        return match format {
            ExportFormat::Xyz => evaluation::write_xyz(&cloud, out),
            ExportFormat::Ply => evaluation::write_ply(&cloud, out),
            ExportFormat::PgmHeatmap | ExportFormat::Csv => Err(Error::InvalidParameter(
                "heatmap and CSV exports need a volume, not a point cloud".into(),
            )),
        };
    }
    let geometry = export_geometry(input, geometry)?;
    let grid = geometry.grid()?;
    let vol = if input.is_dir() && input.join(store::DATASET_FILE).is_file() {
        let (_, truth, _) = store::read_dataset(input)?;
        let dims = truth.dims();
        crate::volume::ComplexVolume::from_real(dims, truth.as_slice())?
    } else {
        store::read_volume(input)?
    };
    match format {
        ExportFormat::Xyz | ExportFormat::Ply => {
            let cloud = evaluation::extract_point_cloud(&vol, &grid, spacing_of(&geometry), cfg.threshold_rel)?;
            if format == ExportFormat::Xyz {
                evaluation::write_xyz(&cloud, out)
            } else {
                evaluation::write_ply(&cloud, out)
            }
        }
        ExportFormat::PgmHeatmap => {
            let bytes = heatmap_pgm(&vol, range)?;
            fs::write(out, bytes).map_err(|e| Error::io(out, e))
        }
        ExportFormat::Csv => {
            let text = heatmap_csv(&vol, range)?;
            fs::write(out, text).map_err(|e| Error::io(out, e))
        }
    }
}
