// Builds the default acquisition geometry, rasterises a tilted plane and
// synthesises noisy observations, then stores both in a tensor archive.

use tomosar::archive::Archive;
use tomosar::diffengine::Tensor;
use tomosar::geometry::{generate_scene, synthesize_observation, GeometryConfig, SceneSpec};

pub fn run_example() -> anyhow::Result<()> {
    let geometry = GeometryConfig::default();
    let r = geometry.measurement_matrix()?;
    println!(
        "{} baselines, {} elevation bins, bin spacing {:.3} m, Rayleigh resolution {:.2} m",
        r.m(),
        r.n(),
        r.grid().spacing(),
        r.baselines().rayleigh_resolution()
    );

    let scene = SceneSpec::oblique_plane(32, 4, -20.0, 20.0, 1.0, 1.0);
    let truth = generate_scene(&scene, r.grid())?;
    let obs = synthesize_observation(&r, &truth, 0.05, 7)?;
    let occupied = truth.as_slice().iter().filter(|v| **v != 0.0).count();
    println!("truth {:?} with {occupied} scatterers, observations {:?}", truth.dims(), obs.dims());

    let mut archive = Archive::new();
    archive.insert("truth", Tensor::real(truth.dims().to_vec(), truth.as_slice().to_vec())?)?;
    archive.insert("obs", Tensor::complex(obs.dims().to_vec(), obs.as_slice().to_vec())?)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("dataset.atsr");
    archive.write(&path)?;
    let back = Archive::read(&path)?;
    assert_eq!(back, archive);
    println!("wrote {} bytes to {}", std::fs::metadata(&path)?.len(), path.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
