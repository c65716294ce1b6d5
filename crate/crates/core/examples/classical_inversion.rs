// Recovers a single scatterer per cell with ISTA and FISTA and compares
// their objectives at equal iteration counts.

use tomosar::geometry::{generate_scene, synthesize_observation, GeometryConfig, SceneSpec};
use tomosar::linalg::C64;
use tomosar::solvers::{solve, solve_volume, Method, RegLambda, SolverConfig};

fn peak(gamma: &[C64]) -> (usize, f64) {
    gamma
        .iter()
        .enumerate()
        .map(|(i, z)| (i, z.norm()))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

pub fn run_example() -> anyhow::Result<()> {
    let r = GeometryConfig::default().measurement_matrix()?;
    let elevation = r.grid().centers()[90];
    let scene = SceneSpec::single_point(1, 1, 0, 0, elevation, 1.0);
    let truth = generate_scene(&scene, r.grid())?;
    let obs = synthesize_observation(&r, &truth, 0.0, 0)?;
    let g = obs.cell(0, 0);

    let cfg = SolverConfig {
        reg_lambda: RegLambda::Relative { relative: 0.02 },
        max_iters: 300,
        tol: 0.0,
        ..SolverConfig::default()
    };
    for method in [Method::Ista, Method::Fista] {
        let sol = solve(&r, &g, &cfg, method)?;
        let (bin, amp) = peak(&sol.gamma);
        println!(
            "{method:?}: objective {:.4e} -> {:.4e} after {} iterations, peak at bin {bin} (true 90), |γ| = {amp:.3}",
            sol.history[0],
            sol.history.last().copied().unwrap_or(f64::NAN),
            sol.iterations()
        );
    }

    // whole-volume inversion is independent of the worker count
    let scene = SceneSpec::oblique_plane(8, 2, -10.0, 10.0, 0.5, 1.0);
    let truth = generate_scene(&scene, r.grid())?;
    let obs = synthesize_observation(&r, &truth, 0.02, 3)?;
    let serial = solve_volume(&r, &obs, &cfg, Method::Fista, 1)?;
    let parallel = solve_volume(&r, &obs, &cfg, Method::Fista, 2)?;
    assert_eq!(serial, parallel);
    println!("volume {:?} solved identically on 1 and 2 threads", serial.dims());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
