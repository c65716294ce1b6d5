// Drives the command layer end to end: simulate a dataset, invert it, and
// export point clouds, a heatmap and the metrics table.

use std::path::Path;

use tomosar::cli::{cmd_evaluate, cmd_export, execute, ExportFormat, Invocation};
use tomosar::evaluation::EvalConfig;
use tomosar::geometry::{GeometryConfig, SceneSpec};
use tomosar::solvers::{Method, SolverConfig};

pub fn run_example() -> anyhow::Result<()> {
    let work = tempfile::tempdir()?;
    let dir = |name: &str| work.path().join(name);

    let geometry = GeometryConfig {
        elevation_bins: 64,
        ..GeometryConfig::default()
    };
    execute(
        &Invocation::Simulate {
            geometry,
            scene: SceneSpec::oblique_plane(12, 2, -15.0, 15.0, 1.0, 1.0),
            noise_sigma: 0.02,
            seed: 5,
            threads: 1,
        },
        &dir("data"),
    )?;
    execute(
        &Invocation::Solve {
            input: dir("data"),
            method: Method::Fista,
            solver: SolverConfig {
                max_iters: 200,
                ..SolverConfig::default()
            },
            threads: 1,
        },
        &dir("fista"),
    )?;

    let eval = EvalConfig::default();
    let metrics = dir("metrics.csv");
    let m = cmd_evaluate(&dir("fista"), &dir("data"), None, &eval, &metrics)?;
    println!("{m:?}");

    for (format, name) in [
        (ExportFormat::Xyz, "fista.xyz"),
        (ExportFormat::Ply, "fista.ply"),
        (ExportFormat::PgmHeatmap, "slice0.pgm"),
        (ExportFormat::Csv, "slice0.csv"),
    ] {
        cmd_export(&dir("fista"), format, 0, &eval, None, &dir(name))?;
    }
    cmd_export(&dir("fista.xyz"), ExportFormat::Ply, 0, &eval, None, &dir("again.ply"))?;

    let mut names: Vec<_> = std::fs::read_dir(work.path())?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()?;
    names.sort();
    for name in names {
        let p: &Path = &dir(&name);
        let size = if p.is_file() { std::fs::metadata(p)?.len() } else { 0 };
        println!("{name:<12} {size:>8}");
    }
    print!("{}", std::fs::read_to_string(&metrics)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
