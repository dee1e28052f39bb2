// The two-Gaussian toy: fit the same MLP with a regression loss, one-hot
// cross entropy and neighbor cross entropy, then compare each fit against
// the discretized mixture.
//
// `cargo run --release --example toy_experiment -- 2000` runs the full
// schedule; the default is shorter.

use snce::toy::{compare_objectives, SweepSpec, ToyConfig};

pub fn run_with_steps(steps: usize) -> snce::Result<()> {
    let base = ToyConfig {
        steps,
        ..ToyConfig::default()
    };
    let sweep = SweepSpec {
        smoothing_grid: vec![0.1],
        ..SweepSpec::default()
    };
    let cmp = compare_objectives(&base, &[0], &sweep)?;
    println!("{:<8} {:>12} {:>8} {:>9}", "run", "kl_to_truth", "support", "fit_mass");
    for r in &cmp.runs {
        let m = &r.report.metrics;
        println!(
            "{:<8} {:>12.4} {:>8} {:>9.4}",
            r.label, m.kl_to_truth, m.support_size_at_threshold, m.empirical_fit_mass
        );
    }
    Ok(())
}

pub fn run_example() -> snce::Result<()> {
    run_with_steps(300)
}

fn main() -> snce::Result<()> {
    match std::env::args().nth(1) {
        Some(s) => run_with_steps(s.parse().expect("steps must be an integer")),
        None => run_example(),
    }
}
