//! On-disk layout of command outputs.
//!
//! ```text
//! dataset dir     dataset.atsr ("truth" N×A×D real, "obs" M×A×D complex)
//! volume dir      volume.atsr ("volume" N×A×D complex)
//! checkpoint dir  params.atsr, optimizer.atsr, network.json, history.csv
//! ```
//!
//! Every directory also carries `manifest.json`, `geometry.json` and `timing.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::{read_json, write_json, GEOMETRY_FILE};
use crate::archive::Archive;
use crate::diffengine::Tensor;
use crate::error::{Error, Result};
use crate::geometry::{GeometryConfig, GroundTruthVolume, ObservationVolume};
use crate::network::{NetParams, NetworkConfig, NetworkParams};
use crate::training::{EpochRecord, LossParts, OptimizerState, TrainState, HISTORY_HEADER};
use crate::volume::ComplexVolume;

pub const DATASET_FILE: &str = "dataset.atsr";
pub const VOLUME_FILE: &str = "volume.atsr";
pub const PARAMS_FILE: &str = "params.atsr";
pub const OPTIMIZER_FILE: &str = "optimizer.atsr";
pub const NETWORK_FILE: &str = "network.json";
pub const HISTORY_FILE: &str = "history.csv";

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn read_geometry(dir: &Path) -> Result<GeometryConfig> {
    read_json(&dir.join(GEOMETRY_FILE))
}

fn dims3(t: &Tensor, name: &str) -> Result<[usize; 3]> {
    match *t.shape() {
        [a, b, c] => Ok([a, b, c]),
        ref s => Err(Error::Archive(format!("{name} must have rank 3, has shape {s:?}"))),
    }
}

pub fn write_dataset(dir: &Path, truth: &GroundTruthVolume, obs: &ObservationVolume) -> Result<()> {
    let mut a = Archive::new();
    a.insert("truth", Tensor::real(truth.dims().to_vec(), truth.as_slice().to_vec())?)?;
    a.insert("obs", Tensor::complex(obs.dims().to_vec(), obs.as_slice().to_vec())?)?;
    a.write(&dir.join(DATASET_FILE))
}

/// Truth and observations of a simulated dataset, with the geometry that produced them.
pub fn read_dataset(dir: &Path) -> Result<(GeometryConfig, GroundTruthVolume, ObservationVolume)> {
    let geometry = read_geometry(dir)?;
    let mut a = Archive::read(&dir.join(DATASET_FILE))?;
    let truth = a.take("truth")?;
    let [_, na, nd] = dims3(&truth, "truth")?;
    let truth = GroundTruthVolume::from_vec(geometry.grid()?, na, nd, truth.into_real()?)?;
    let obs = a.take("obs")?;
    let [m, oa, od] = dims3(&obs, "obs")?;
    let obs = ObservationVolume::from_vec(m, oa, od, obs.into_complex()?)?;
    Ok((geometry, truth, obs))
}

/// Observations only; the truth entry may be absent.
pub fn read_observations(dir: &Path) -> Result<(GeometryConfig, ObservationVolume)> {
    let geometry = read_geometry(dir)?;
    let mut a = Archive::read(&dir.join(DATASET_FILE))?;
    let obs = a.take("obs")?;
    let [m, na, nd] = dims3(&obs, "obs")?;
    Ok((geometry, ObservationVolume::from_vec(m, na, nd, obs.into_complex()?)?))
}

pub fn write_volume(dir: &Path, vol: &ComplexVolume) -> Result<()> {
    let mut a = Archive::new();
    a.insert("volume", Tensor::complex(vol.dims().to_vec(), vol.as_slice().to_vec())?)?;
    a.write(&dir.join(VOLUME_FILE))
}

/// Reads a reconstructed volume from a directory or directly from an archive file.
pub fn read_volume(path: &Path) -> Result<ComplexVolume> {
    let file = if path.is_dir() { path.join(VOLUME_FILE) } else { path.to_path_buf() };
    let mut a = Archive::read(&file)?;
    let t = a.take("volume")?;
    let dims = dims3(&t, "volume")?;
    ComplexVolume::from_vec(dims, t.into_complex()?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkMeta {
    version: String,
    config: NetworkConfig,
    m: usize,
    n: usize,
    seed: u64,
    /// Epochs completed.
    epoch: usize,
    optimizer_step: u64,
}

/// Writes parameters, optimizer moments, metadata and the full history.
pub fn write_checkpoint(dir: &Path, state: &TrainState, history: &[EpochRecord]) -> Result<()> {
    let p = &state.params;
    let names = p.names();
    let mut params = Archive::new();
    for (name, t) in names.iter().zip(p.tensors.iter()) {
        params.insert(name.clone(), t.clone())?;
    }
    params.write(&dir.join(PARAMS_FILE))?;

    let mut opt = Archive::new();
    let moments = state.optimizer.first_moment.iter().zip(&state.optimizer.second_moment);
    for (name, (m1, m2)) in names.iter().zip(moments) {
        opt.insert(format!("m.{name}"), Tensor::real([m1.len()], m1.clone())?)?;
        opt.insert(format!("v.{name}"), Tensor::real([m2.len()], m2.clone())?)?;
    }
    opt.write(&dir.join(OPTIMIZER_FILE))?;

    write_json(
        &dir.join(NETWORK_FILE),
        &NetworkMeta {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: p.config,
            m: p.m,
            n: p.n,
            seed: p.seed,
            epoch: state.epoch,
            optimizer_step: state.optimizer.step,
        },
    )?;
    let path = dir.join(HISTORY_FILE);
    fs::write(&path, crate::training::history_csv(history)).map_err(|e| Error::io(&path, e))
}

fn parse_history(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(HISTORY_HEADER) {
        return Err(Error::InvalidParameter(format!(
            "{}: missing header {HISTORY_HEADER:?}",
            path.display()
        )));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::InvalidParameter(format!("{}:{}: malformed row", path.display(), i + 2));
            let cols: Vec<&str> = line.split(',').collect();
            let [epoch, total, l1d, l2d, lim] = cols[..] else {
                return Err(bad());
            };
            let f = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(EpochRecord {
                epoch: epoch.parse().map_err(|_| bad())?,
                loss: LossParts {
                    total: f(total)?,
                    l1d: f(l1d)?,
                    l2d: f(l2d)?,
                    lim: f(lim)?,
                },
            })
        })
        .collect()
}

/// Parameters only, validated against the layout named in `network.json`.
pub fn read_params(dir: &Path) -> Result<NetworkParams> {
    let meta: NetworkMeta = read_json(&dir.join(NETWORK_FILE))?;
    let mut a = Archive::read(&dir.join(PARAMS_FILE))?;
    let names = crate::network::tensor_names(meta.config.n1, meta.config.n2);
    let tensors: Vec<Tensor> = names.iter().map(|n| a.take(n)).collect::<Result<_>>()?;
    if let Some(extra) = a.names().next() {
        return Err(Error::Archive(format!("unexpected entry {extra:?} in {PARAMS_FILE}")));
    }
    let params = NetworkParams {
        config: meta.config,
        m: meta.m,
        n: meta.n,
        seed: meta.seed,
        tensors: NetParams::from_flat(meta.config.n1, meta.config.n2, tensors)?,
    };
    params.validate()?;
    Ok(params)
}

/// Everything needed to continue training where the checkpoint stopped.
pub fn read_checkpoint(dir: &Path) -> Result<(TrainState, Vec<EpochRecord>)> {
    let meta: NetworkMeta = read_json(&dir.join(NETWORK_FILE))?;
    let params = read_params(dir)?;
    let mut a = Archive::read(&dir.join(OPTIMIZER_FILE))?;
    let mut first_moment = Vec::new();
    let mut second_moment = Vec::new();
    for (name, t) in params.names().iter().zip(params.tensors.iter()) {
        let m1 = a.take(&format!("m.{name}"))?.into_real()?;
        let m2 = a.take(&format!("v.{name}"))?.into_real()?;
        if m1.len() != t.real_dof() || m2.len() != t.real_dof() {
            return Err(Error::Archive(format!("optimizer moments for {name} have the wrong length")));
        }
        first_moment.push(m1);
        second_moment.push(m2);
    }
    let history = parse_history(&dir.join(HISTORY_FILE))?;
    let state = TrainState {
        params,
        optimizer: OptimizerState {
            step: meta.optimizer_step,
            first_moment,
            second_moment,
        },
        epoch: meta.epoch,
    };
    Ok((state, history))
}
