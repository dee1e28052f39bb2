// Masked-diffusion training loss with neighbor targets, and a check that its
// average over mask draws matches the closed-form expectation.

use ndarray::Array2;
use snce::codebook::grid_codebook;
use snce::losses::sequence_targets_for;
use snce::masked::{elbo_expectation_check, elbo_snce_loss, forward_mask};
use snce::rng::SplitMix64;
use snce::Temperature;

pub fn run_example() -> snce::Result<()> {
    let cb = grid_codebook(-5.0, 5.0, 50)?;
    let temp = Temperature::from_two_tau_sq(1.0)?;
    let mut rng = SplitMix64::new(11);
    let len = 8;
    let latents = Array2::from_shape_fn((len, 2), |_| 2.0 * rng.standard_normal());
    let logits = Array2::from_shape_fn((len, cb.size()), |_| rng.standard_normal());
    let (tokens, targets) = sequence_targets_for(&latents, &cb, temp)?;

    for t in [0.25, 0.5, 0.9] {
        let seq = forward_mask(&tokens, t, 5)?;
        let r = elbo_snce_loss(&logits, &seq, &targets)?;
        println!("t = {t:.2}: {} of {len} masked, loss {:.5}", r.masked_count, r.loss);
    }

    let e = elbo_expectation_check(&latents, &logits, &cb, temp, 4000, 1)?;
    println!(
        "over 4000 draws: {:.4} ± {:.4}, closed form {:.4}",
        e.mc_mean, e.stderr, e.analytic
    );
    Ok(())
}

fn main() -> snce::Result<()> {
    run_example()
}
