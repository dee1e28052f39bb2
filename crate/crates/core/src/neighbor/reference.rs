//! Plain reference evaluations used to cross-check the production paths.

use crate::neighbor::Temperature;

/// Textbook two-pass softmax of `-d / 2τ²`: one pass for the max, one for the
/// exponentials and their sum, then a divide. No blocking.
pub fn naive_neighbor_probs(distances: &[f64], temp: Temperature) -> Vec<f64> {
    let logits: Vec<f64> = distances.iter().map(|d| -d / temp.two_tau_sq()).collect();
    let mut m = f64::NEG_INFINITY;
    for &x in &logits {
        if x > m {
            m = x;
        }
    }
    let mut e = Vec::with_capacity(logits.len());
    let mut total = 0.0;
    for &x in &logits {
        let v = (x - m).exp();
        total += v;
        e.push(v);
    }
    e.iter().map(|v| v / total).collect()
}
