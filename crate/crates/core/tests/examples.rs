mod simulate_scene {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/simulate_scene.rs"));
}

mod classical_inversion {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/classical_inversion.rs"));
}

mod gradient_check {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/gradient_check.rs"));
}

mod train_network {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/train_network.rs"));
}

mod compare_methods {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/compare_methods.rs"));
}

mod export_products {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/export_products.rs"));
}

#[test]
fn simulate_scene_runs() {
    simulate_scene::run_example().expect("simulate_scene example should run");
}

#[test]
fn classical_inversion_runs() {
    classical_inversion::run_example().expect("classical_inversion example should run");
}

#[test]
fn gradient_check_runs() {
    gradient_check::run_example().expect("gradient_check example should run");
}

#[test]
fn train_network_runs() {
    train_network::run_example().expect("train_network example should run");
}

#[test]
fn compare_methods_runs() {
    compare_methods::run_example().expect("compare_methods example should run");
}

#[test]
fn export_products_runs() {
    export_products::run_example().expect("export_products example should run");
}
