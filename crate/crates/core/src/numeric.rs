//! Stable softmax primitives shared by the target and loss code.

/// Chunk length for the blocked log-sum-exp.
pub const LSE_CHUNK: usize = 4096;

/// Two-pass log-sum-exp: max shift, then a 64-bit partition sum.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Blocked log-sum-exp. Each chunk keeps its own `(max, shifted sum)` pair and
/// chunks are merged left to right, so no exponent ever sees an un-shifted
/// value and the reduction order is fixed.
pub fn log_sum_exp_chunked(xs: &[f64]) -> f64 {
    let (m, s) = shifted_partition(xs);
    if s == 0.0 {
        f64::NEG_INFINITY
    } else {
        m + s.ln()
    }
}

/// `(m, s)` with `m = max(xs)` and `s = Σ exp(x - m)`, accumulated per chunk
/// of [`LSE_CHUNK`] values.
///
/// Each chunk keeps its own `(max, shifted sum)` pair and chunks are merged
/// left to right, so no exponent ever sees an un-shifted value and the
/// reduction order is fixed.
pub fn shifted_partition(xs: &[f64]) -> (f64, f64) {
    xs.chunks(LSE_CHUNK)
        .map(|chunk| {
            let m = chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = chunk.iter().map(|&x| (x - m).exp()).sum();
            (m, s)
        })
        .fold((f64::NEG_INFINITY, 0.0), merge_lse)
}

#[inline]
fn merge_lse((m1, s1): (f64, f64), (m2, s2): (f64, f64)) -> (f64, f64) {
    if m1 == f64::NEG_INFINITY {
        return (m2, s2);
    }
    if m2 == f64::NEG_INFINITY {
        return (m1, s1);
    }
    let m = m1.max(m2);
    (m, s1 * (m1 - m).exp() + s2 * (m2 - m).exp())
}

pub fn log_softmax(xs: &[f64]) -> Vec<f64> {
    let (m, s) = shifted_partition(xs);
    let ls = s.ln();
    xs.iter().map(|&x| (x - m) - ls).collect()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let (m, s) = shifted_partition(xs);
    let inv = 1.0 / s;
    xs.iter().map(|&x| (x - m).exp() * inv).collect()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest entry; the lowest index wins ties.
pub fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// Shannon entropy in nats with `0 log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Accept `w` as a probability vector: finite, in `[0, 1]`, summing to one
/// within `1e-9`.
pub fn check_distribution(w: &[f64]) -> Result<(), String> {
    if w.is_empty() {
        return Err("empty vector".into());
    }
    if let Some((i, x)) = w
        .iter()
        .enumerate()
        .find(|(_, x)| !x.is_finite() || **x < 0.0 || **x > 1.0 + 1e-12)
    {
        return Err(format!("entry {i} = {x} outside [0, 1]"));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(format!("sums to {s}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_matches_two_pass() {
        let xs: Vec<f64> = (0..10_000).map(|i| ((i * 7919) % 1000) as f64 * -3.7).collect();
        let a = log_sum_exp(&xs);
        let b = log_sum_exp_chunked(&xs);
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn survives_huge_magnitudes() {
        let xs = [1e6, -1e6, 1e6 - 1.0];
        let l = log_sum_exp_chunked(&xs);
        assert!(l.is_finite());
        let p = softmax(&xs);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn ties_pick_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmin(&[2.0, 0.0, 0.0]), 1);
    }

    #[test]
    fn distribution_check() {
        assert!(check_distribution(&[0.5, 0.5]).is_ok());
        assert!(check_distribution(&[0.5, 0.6]).is_err());
        assert!(check_distribution(&[1.5, -0.5]).is_err());
        assert!(check_distribution(&[]).is_err());
    }
}
