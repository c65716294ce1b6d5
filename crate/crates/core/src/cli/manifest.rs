use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GeometryConfig, SceneSpec};
use crate::network::NetworkConfig;
use crate::solvers::{Method, SolverConfig};
use crate::training::TrainConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GEOMETRY_FILE: &str = "geometry.json";
pub const TIMING_FILE: &str = "timing.json";

/// Fully resolved inputs of a directory-producing command. Replaying one
/// reproduces the archives of the original run byte for byte when
/// `threads` is 1 (and for any thread count where the command promises it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum Invocation {
    Simulate {
        geometry: GeometryConfig,
        scene: SceneSpec,
        noise_sigma: f64,
        seed: u64,
        threads: usize,
    },
    Solve {
        input: PathBuf,
        method: Method,
        solver: SolverConfig,
        threads: usize,
    },
    Train {
        dataset: PathBuf,
        network: NetworkConfig,
        training: TrainConfig,
        resume: Option<PathBuf>,
    },
    Reconstruct {
        input: PathBuf,
        checkpoint: PathBuf,
        threads: usize,
    },
}

impl Invocation {
    pub fn name(&self) -> &'static str {
        match self {
            Invocation::Simulate { .. } => "simulate",
            Invocation::Solve { .. } => "solve",
            Invocation::Train { .. } => "train",
            Invocation::Reconstruct { .. } => "reconstruct",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub started_at: f64,
    pub finished_at: f64,
    pub invocation: Invocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub command: String,
    pub wall_time_seconds: f64,
    /// Seconds spent in the core computation, excluding file I/O.
    pub compute_seconds: f64,
}

pub(crate) fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub(crate) struct RunClock {
    started_at: f64,
    start: Instant,
}

impl RunClock {
    pub fn start() -> Self {
        Self {
            started_at: unix_now(),
            start: Instant::now(),
        }
    }

    /// Writes `manifest.json`, `geometry.json` and `timing.json` into `out`.
    pub fn finish(
        self,
        out: &Path,
        invocation: &Invocation,
        geometry: &GeometryConfig,
        compute_seconds: f64,
    ) -> Result<()> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: self.started_at,
            finished_at: unix_now(),
            invocation: invocation.clone(),
        };
        let timing = Timing {
            command: invocation.name().to_string(),
            wall_time_seconds: self.start.elapsed().as_secs_f64(),
            compute_seconds,
        };
        write_json(&out.join(GEOMETRY_FILE), geometry)?;
        write_json(&out.join(TIMING_FILE), &timing)?;
        write_json(&out.join(MANIFEST_FILE), &manifest)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable value");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Config {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    read_json(&path)
}
