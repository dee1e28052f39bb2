// Dense and top-M neighbor targets over a 131,072-entry codebook.

use std::time::Instant;

use snce::codebook::{Codebook, Metric};
use snce::neighbor::reference::naive_neighbor_probs;
use snce::neighbor::{probs_from_distances, topk_from_distances};
use snce::rng::SplitMix64;
use snce::Temperature;

pub fn run_example() -> snce::Result<()> {
    let (size, dim) = (131_072, 16);
    let mut rng = SplitMix64::new(0);
    let flat: Vec<f32> = (0..size * dim).map(|_| rng.standard_normal() as f32).collect();
    let cb = Codebook::new(flat, size, dim, Metric::L2Squared)?;
    let z: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
    let temp = Temperature::new(0.71)?;

    let d = cb.distances(&z)?;
    let start = Instant::now();
    let dense = probs_from_distances(&d, temp)?;
    let dense_time = start.elapsed();
    let naive = naive_neighbor_probs(&d, temp);
    let dev = dense.iter().zip(&naive).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!(
        "dense: sum {:.15}, max deviation from two-pass {dev:.1e}, {dense_time:?}",
        dense.iter().sum::<f64>()
    );

    for m in [1, 64, 4096] {
        let start = Instant::now();
        let q = topk_from_distances(&d, temp, m)?;
        println!(
            "top-{m:<5} sum {:.15}, argmax {} (quantize {}), {:?}",
            q.total(),
            q.argmax(),
            cb.quantize(&z)?,
            start.elapsed()
        );
    }
    Ok(())
}

fn main() -> snce::Result<()> {
    run_example()
}
