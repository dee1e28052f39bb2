// How the temperature shapes the neighbor target around a latent.

use snce::codebook::{grid_codebook, Codebook, Metric};
use snce::neighbor::{neighbor_distribution, neighbor_distribution_topk, Temperature};
use snce::numeric::entropy;

pub fn run_example() -> snce::Result<()> {
    let three = Codebook::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]], Metric::L2Squared)?;
    let q = neighbor_distribution(&three, &[0.0, 0.0], Temperature::from_two_tau_sq(1.0)?)?;
    println!("three codes, z at code 0: {:?}", q.to_dense());

    let grid = grid_codebook(-5.0, 5.0, 50)?;
    let z = [-2.03, 0.04];
    println!("token {} is nearest to {z:?}", grid.quantize(&z)?);
    for tau in [0.05, 0.25, 0.71, 1.41] {
        let q = neighbor_distribution(&grid, &z, Temperature::new(tau)?)?;
        let p = q.to_dense();
        println!(
            "tau = {tau:4.2}: argmax {:4}, peak {:.4}, perplexity {:7.1}",
            q.argmax(),
            p[q.argmax()],
            entropy(&p).exp()
        );
    }

    let top = neighbor_distribution_topk(&grid, &z, Temperature::new(0.71)?, 8)?;
    println!("top-8 target keeps mass {:.12} on {} codes", top.total(), 8);
    Ok(())
}

fn main() -> snce::Result<()> {
    run_example()
}
