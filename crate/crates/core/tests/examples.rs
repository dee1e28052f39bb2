#[allow(dead_code)]
mod quantize_grid {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/quantize_grid.rs"));
}

#[allow(dead_code)]
mod neighbor_targets {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/neighbor_targets.rs"));
}

#[allow(dead_code)]
mod bandwidth_calibration {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/bandwidth_calibration.rs"));
}

#[allow(dead_code)]
mod loss_gradients {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/loss_gradients.rs"));
}

#[allow(dead_code)]
mod autoregressive_loss {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/autoregressive_loss.rs"));
}

#[allow(dead_code)]
mod masked_diffusion {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/masked_diffusion.rs"));
}

#[allow(dead_code)]
mod toy_experiment {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/toy_experiment.rs"));
}

#[allow(dead_code)]
mod large_codebook {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/large_codebook.rs"));
}

#[test]
fn quantize_grid_example_runs() {
    quantize_grid::run_example().expect("quantize_grid example should run");
}

#[test]
fn neighbor_targets_example_runs() {
    neighbor_targets::run_example().expect("neighbor_targets example should run");
}

#[test]
fn bandwidth_calibration_example_runs() {
    bandwidth_calibration::run_example().expect("bandwidth_calibration example should run");
}

#[test]
fn loss_gradients_example_runs() {
    loss_gradients::run_example().expect("loss_gradients example should run");
}

#[test]
fn autoregressive_loss_example_runs() {
    autoregressive_loss::run_example().expect("autoregressive_loss example should run");
}

#[test]
fn masked_diffusion_example_runs() {
    masked_diffusion::run_example().expect("masked_diffusion example should run");
}

#[test]
fn toy_experiment_example_runs() {
    toy_experiment::run_with_steps(30).expect("toy_experiment example should run");
}

#[test]
fn large_codebook_example_runs() {
    large_codebook::run_example().expect("large_codebook example should run");
}
