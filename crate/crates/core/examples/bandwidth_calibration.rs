// Pick the neighbor bandwidth from a target perplexity instead of by hand.

use snce::codebook::grid_codebook;
use snce::neighbor::{calibrate_bandwidth, perplexity_at};

pub fn run_example() -> snce::Result<()> {
    let grid = grid_codebook(-5.0, 5.0, 50)?;
    let d = grid.distances(&[-2.03, 0.04])?;
    for target in [5.0, 30.0, 200.0] {
        let fit = calibrate_bandwidth(&d, target, 1e-6, 200)?;
        println!(
            "perplexity {target:6.1}: sigma = {:.5}, achieved {:.6} in {} iterations",
            fit.sigma, fit.achieved_perplexity, fit.iterations
        );
        assert!((perplexity_at(&d, fit.sigma) - target).abs() < 1e-4);
    }
    Ok(())
}

fn main() -> snce::Result<()> {
    run_example()
}
