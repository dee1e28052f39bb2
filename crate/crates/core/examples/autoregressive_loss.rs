// Sequence loss for next-token prediction with neighbor targets built from
// the encoder latents.

use ndarray::Array2;
use snce::codebook::grid_codebook;
use snce::losses::{ar_sequence_loss, SequenceBatch, TargetKind};
use snce::rng::SplitMix64;
use snce::Temperature;

pub fn run_example() -> snce::Result<()> {
    let cb = grid_codebook(-5.0, 5.0, 50)?;
    let mut rng = SplitMix64::new(3);
    let len = 6;
    let latents = Array2::from_shape_fn((len, 2), |(i, j)| {
        let center = if j == 0 { if i % 2 == 0 { -2.0 } else { 2.0 } } else { 0.0 };
        center + 0.5 * rng.standard_normal()
    });
    let tokens = (0..len)
        .map(|i| cb.quantize(latents.row(i).as_slice().unwrap()))
        .collect::<snce::Result<Vec<_>>>()?;
    let logits = Array2::from_shape_fn((len, cb.size()), |_| rng.standard_normal());
    let temp = Temperature::from_two_tau_sq(1.0)?;

    for kind in [TargetKind::OneHot, TargetKind::Smoothed { epsilon: 0.1 }, TargetKind::Neighbor] {
        let batch = SequenceBatch {
            tokens: tokens.clone(),
            latents: Some(latents.clone()),
            target_kind: kind,
        };
        let r = ar_sequence_loss(&logits, &batch, &cb, temp)?;
        println!(
            "{kind:?}: mean loss {:.5}, gradient row sums {:.1e}",
            r.loss,
            r.grad.rows().into_iter().map(|g| g.sum().abs()).fold(0.0, f64::max)
        );
    }
    Ok(())
}

fn main() -> snce::Result<()> {
    run_example()
}
