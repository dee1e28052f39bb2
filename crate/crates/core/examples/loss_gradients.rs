// One-hot, label-smoothed and neighbor targets on the same logits, with the
// gradient `p - w` each produces.

use snce::codebook::{Codebook, Metric};
use snce::losses::{kl_decomposition_check, mc_snce_estimate, soft_xent, snce_target};
use snce::neighbor::NeighborDistribution;
use snce::{TargetSpec, Temperature};

pub fn run_example() -> snce::Result<()> {
    let cb = Codebook::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]], Metric::L2Squared)?;
    let z = [0.0, 0.0];
    let logits = [1.0, 0.0, -1.0];
    let y = cb.quantize(&z)?;

    let targets = [
        ("one-hot", TargetSpec::OneHot(y)),
        ("smoothed", TargetSpec::Smoothed { index: y, epsilon: 0.1 }),
        ("neighbor", snce_target(&cb, &z, Temperature::from_two_tau_sq(1.0)?)?),
    ];
    for (name, target) in &targets {
        let r = soft_xent(&logits, target)?;
        let g: Vec<String> = r.grad_logits.iter().map(|g| format!("{g:+.4}")).collect();
        println!("{name:>9}: loss {:.6}, grad [{}]", r.loss, g.join(", "));
    }

    // The soft target is the expected one-hot loss under q.
    if let TargetSpec::Neighbor(q) = &targets[2].1 {
        let mc = mc_snce_estimate(&logits, q, 100_000, 7)?;
        println!("sampled one-hot losses: {:.6} ± {:.6}", mc.estimate, mc.stderr);
        let kl = kl_decomposition_check(&logits, q)?;
        println!("H(q,p) = {:.6} = KL {:.6} + H(q) {:.6}", kl.xent, kl.kl, kl.entropy);
        let sparse = NeighborDistribution::Sparse {
            size: 3,
            entries: vec![(0, 0.75), (1, 0.25)],
        };
        println!("sparse target loss: {:.6}", soft_xent(&logits, &TargetSpec::Neighbor(sparse))?.loss);
    }
    Ok(())
}

fn main() -> snce::Result<()> {
    run_example()
}
