// Trains a small reconstruction network on a simulated tilted plane and
// reports the loss history and per-stage errors.

use tomosar::geometry::{generate_scene, synthesize_observation, GeometryConfig, SceneSpec};
use tomosar::network::{forward, init_params, parameter_count, NetworkConfig};
use tomosar::training::{history_csv, make_slices, train, TrainConfig};

pub fn run_example() -> anyhow::Result<()> {
    let geometry = GeometryConfig {
        elevation_bins: 32,
        ..GeometryConfig::default()
    };
    let r = geometry.measurement_matrix()?;
    let scene = SceneSpec::oblique_plane(16, 2, -20.0, 20.0, 1.0, 1.0);
    let truth = generate_scene(&scene, r.grid())?;
    let obs = synthesize_observation(&r, &truth, 0.05, 1)?;
    let data = make_slices(&truth, &obs)?;

    let net = NetworkConfig {
        c0: 2,
        n1: 2,
        n2: 2,
        slice_width: 16,
        theta_init: 1e-2,
    };
    let init = init_params(&r, net, 0)?;
    println!(
        "{} real parameters (formula {})",
        init.real_scalar_count(),
        parameter_count(r.m(), r.n(), net.c0, net.n1, net.n2)
    );

    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let (params, history) = train(&data, init, &cfg)?;
    print!("{}", history_csv(&history));

    let item = &data.items[0];
    let out = forward(&params, &item.obs)?;
    let err = |v: &[tomosar::linalg::C64]| -> f64 {
        v.iter().zip(&item.target).map(|(a, b)| (a - b).norm_sqr()).sum()
    };
    println!(
        "slice 0 squared error: pre {:.3}, conv {:.3}, final {:.3}",
        err(&out.gamma_1d),
        err(&out.gamma_2d),
        err(&out.gamma_final)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
