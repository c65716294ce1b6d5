// Scores ISTA, FISTA and a briefly trained network on the same scene with
// the point-cloud metrics.

use std::time::Instant;

use tomosar::evaluation::{evaluate, metrics_csv, CellSpacing, EvalConfig};
use tomosar::geometry::{generate_scene, synthesize_observation, GeometryConfig, SceneSpec};
use tomosar::network::{init_params, reconstruct_volume, NetworkConfig};
use tomosar::solvers::{solve_volume, Method, SolverConfig};
use tomosar::training::{make_slices, train, TrainConfig};

pub fn run_example() -> anyhow::Result<()> {
    let geometry = GeometryConfig {
        elevation_bins: 32,
        ..GeometryConfig::default()
    };
    let r = geometry.measurement_matrix()?;
    let scene = SceneSpec::oblique_plane(16, 3, -25.0, 25.0, 2.0, 1.0);
    let truth = generate_scene(&scene, r.grid())?;
    let obs = synthesize_observation(&r, &truth, 0.05, 11)?;
    let spacing = CellSpacing {
        azimuth: geometry.azimuth_spacing,
        range: geometry.range_spacing,
    };
    let eval = EvalConfig::default();
    let solver = SolverConfig {
        max_iters: 300,
        ..SolverConfig::default()
    };

    let mut rows = Vec::new();
    for (label, method) in [("ista", Method::Ista), ("fista", Method::Fista)] {
        let t = Instant::now();
        let vol = solve_volume(&r, &obs, &solver, method, 1)?;
        let secs = t.elapsed().as_secs_f64();
        rows.push(evaluate(label, &vol, &truth, spacing, &eval, secs)?);
    }

    let net = NetworkConfig {
        c0: 2,
        n1: 4,
        n2: 4,
        slice_width: 16,
        theta_init: 1e-2,
    };
    let (params, _) = train(
        &make_slices(&truth, &obs)?,
        init_params(&r, net, 0)?,
        &TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        },
    )?;
    let t = Instant::now();
    let vol = reconstruct_volume(&params, &obs, 1)?;
    let secs = t.elapsed().as_secs_f64();
    match evaluate("network", &vol, &truth, spacing, &eval, secs) {
        Ok(m) => rows.push(m),
        Err(e) => println!("network: {e}"),
    }
    print!("{}", metrics_csv(&rows));
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
