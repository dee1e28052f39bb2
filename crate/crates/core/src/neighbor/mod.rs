//! Stochastic-neighbor target distributions over a codebook.
//!
//! For a latent `z` the target is `q_k(z) ∝ exp(-d(z, v_k) / 2τ²)`, a softmax
//! over negated codebook distances. Dense evaluation uses the blocked
//! log-sum-exp from [`crate::numeric`]; the top-M variant keeps only the M
//! nearest codes and renormalizes over them.

mod bandwidth;
pub mod reference;

pub use bandwidth::{calibrate_bandwidth, perplexity_at, BandwidthResult};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{Codebook, Token};
use crate::error::{Error, Result};
use crate::numeric::{self, argmax};

/// Temperature used in the toy experiment and most examples.
pub const DEFAULT_TAU: f64 = 0.71;

/// Neighbor softmax bandwidth.
///
/// The softmax divides distances by `two_tau_sq`, which is stored directly so
/// that `Temperature::from_two_tau_sq(1.0)` divides by exactly one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature {
    tau: f64,
    two_tau_sq: f64,
}

impl Temperature {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::invalid("tau", format!("must be positive and finite, got {tau}")));
        }
        let two_tau_sq = 2.0 * tau * tau;
        if !(two_tau_sq.is_finite() && two_tau_sq > 0.0) {
            return Err(Error::invalid("tau", format!("2τ² = {two_tau_sq} is not usable")));
        }
        Ok(Self { tau, two_tau_sq })
    }

    pub fn from_two_tau_sq(two_tau_sq: f64) -> Result<Self> {
        if !(two_tau_sq.is_finite() && two_tau_sq > 0.0) {
            return Err(Error::invalid(
                "two_tau_sq",
                format!("must be positive and finite, got {two_tau_sq}"),
            ));
        }
        Ok(Self {
            tau: (two_tau_sq / 2.0).sqrt(),
            two_tau_sq,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn two_tau_sq(&self) -> f64 {
        self.two_tau_sq
    }
}

impl Default for Temperature {
    fn default() -> Self {
        Self::new(DEFAULT_TAU).unwrap()
    }
}

/// Serializable form of a temperature: either `{"tau": t}` or
/// `{"two_tau_sq": v}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TemperatureParam {
    Tau(f64),
    TwoTauSq(f64),
}

impl TemperatureParam {
    pub fn resolve(self) -> Result<Temperature> {
        match self {
            TemperatureParam::Tau(t) => Temperature::new(t),
            TemperatureParam::TwoTauSq(v) => Temperature::from_two_tau_sq(v),
        }
    }
}

impl From<Temperature> for TemperatureParam {
    fn from(t: Temperature) -> Self {
        TemperatureParam::TwoTauSq(t.two_tau_sq())
    }
}

/// A probability vector over the `K` tokens of a codebook.
#[derive(Debug, Clone, PartialEq)]
pub enum NeighborDistribution {
    Dense(Vec<f64>),
    /// Entries sorted by strictly increasing token index.
    Sparse {
        size: usize,
        entries: Vec<(Token, f64)>,
    },
}

impl NeighborDistribution {
    /// Vocabulary size `K`.
    pub fn size(&self) -> usize {
        match self {
            NeighborDistribution::Dense(p) => p.len(),
            NeighborDistribution::Sparse { size, .. } => *size,
        }
    }

    pub fn prob(&self, k: Token) -> f64 {
        match self {
            NeighborDistribution::Dense(p) => p[k],
            NeighborDistribution::Sparse { entries, .. } => entries
                .binary_search_by_key(&k, |&(i, _)| i)
                .map(|pos| entries[pos].1)
                .unwrap_or(0.0),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            NeighborDistribution::Dense(p) => p.clone(),
            NeighborDistribution::Sparse { size, entries } => {
                let mut out = vec![0.0; *size];
                for &(k, p) in entries {
                    out[k] = p;
                }
                out
            }
        }
    }

    pub fn total(&self) -> f64 {
        match self {
            NeighborDistribution::Dense(p) => p.iter().sum(),
            NeighborDistribution::Sparse { entries, .. } => entries.iter().map(|e| e.1).sum(),
        }
    }

    /// Most probable token; lowest index wins ties.
    pub fn argmax(&self) -> Token {
        match self {
            NeighborDistribution::Dense(p) => argmax(p),
            NeighborDistribution::Sparse { entries, .. } => {
                let mut best = entries[0];
                for &e in &entries[1..] {
                    if e.1 > best.1 {
                        best = e;
                    }
                }
                best.0
            }
        }
    }

    /// Check the probability-vector invariants.
    pub fn validate(&self) -> Result<()> {
        match self {
            NeighborDistribution::Dense(p) => {
                numeric::check_distribution(p).map_err(Error::NotADistribution)
            }
            NeighborDistribution::Sparse { size, entries } => {
                if entries.is_empty() {
                    return Err(Error::NotADistribution("empty sparse distribution".into()));
                }
                if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::NotADistribution(
                        "sparse indices must be strictly increasing".into(),
                    ));
                }
                if let Some(&(k, _)) = entries.iter().find(|e| e.0 >= *size) {
                    return Err(Error::TokenOutOfRange {
                        token: k,
                        size: *size,
                    });
                }
                let probs: Vec<f64> = entries.iter().map(|e| e.1).collect();
                numeric::check_distribution(&probs).map_err(Error::NotADistribution)
            }
        }
    }
}

/// Softmax logits `-d_k / 2τ²`.
pub fn neighbor_logits(distances: &[f64], temp: Temperature) -> Vec<f64> {
    let inv = 1.0 / temp.two_tau_sq();
    distances.iter().map(|&d| -d * inv).collect()
}

fn check_distances(distances: &[f64]) -> Result<()> {
    if distances.is_empty() {
        return Err(Error::invalid("distances", "empty"));
    }
    if distances.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("distances"));
    }
    Ok(())
}

/// Log-probabilities of the neighbor softmax for precomputed distances.
pub fn log_probs_from_distances(distances: &[f64], temp: Temperature) -> Result<Vec<f64>> {
    check_distances(distances)?;
    let logits = neighbor_logits(distances, temp);
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("neighbor logits"));
    }
    Ok(numeric::log_softmax(&logits))
}

/// Probabilities of the neighbor softmax for precomputed distances.
pub fn probs_from_distances(distances: &[f64], temp: Temperature) -> Result<Vec<f64>> {
    check_distances(distances)?;
    let logits = neighbor_logits(distances, temp);
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("neighbor logits"));
    }
    Ok(numeric::softmax(&logits))
}

/// Dense neighbor distribution `q(z)` over every code.
pub fn neighbor_distribution(
    codebook: &Codebook,
    z: &[f64],
    temp: Temperature,
) -> Result<NeighborDistribution> {
    let d = codebook.distances(z)?;
    probs_from_distances(&d, temp).map(NeighborDistribution::Dense)
}

/// `log q(z)`, computed without exponentiating un-shifted logits.
pub fn log_neighbor_distribution(
    codebook: &Codebook,
    z: &[f64],
    temp: Temperature,
) -> Result<Vec<f64>> {
    let d = codebook.distances(z)?;
    log_probs_from_distances(&d, temp)
}

/// Top-M truncation of precomputed distances: keep the `m` smallest (ties by
/// lower index) and renormalize their softmax weights.
pub fn topk_from_distances(
    distances: &[f64],
    temp: Temperature,
    m: usize,
) -> Result<NeighborDistribution> {
    check_distances(distances)?;
    let size = distances.len();
    if m == 0 || m > size {
        return Err(Error::invalid("m", format!("must lie in 1..={size}, got {m}")));
    }
    let mut idx: Vec<Token> = (0..size).collect();
    let key = |&a: &Token, &b: &Token| distances[a].total_cmp(&distances[b]).then(a.cmp(&b));
    if m < size {
        idx.select_nth_unstable_by(m - 1, key);
        idx.truncate(m);
    }
    idx.sort_unstable();
    let kept: Vec<f64> = idx.iter().map(|&k| distances[k]).collect();
    let probs = probs_from_distances(&kept, temp)?;
    Ok(NeighborDistribution::Sparse {
        size,
        entries: idx.into_iter().zip(probs).collect(),
    })
}

/// Sparse neighbor distribution over the `m` nearest codes.
pub fn neighbor_distribution_topk(
    codebook: &Codebook,
    z: &[f64],
    temp: Temperature,
    m: usize,
) -> Result<NeighborDistribution> {
    if m == 0 || m > codebook.size() {
        return Err(Error::invalid(
            "m",
            format!("must lie in 1..={}, got {m}", codebook.size()),
        ));
    }
    let d = codebook.distances(z)?;
    topk_from_distances(&d, temp, m)
}

/// Dense targets for a batch of latents, evaluated in parallel. Each row is
/// computed independently, so the output does not depend on thread count.
pub fn neighbor_distributions<R: AsRef<[f64]> + Sync>(
    codebook: &Codebook,
    latents: &[R],
    temp: Temperature,
) -> Result<Vec<NeighborDistribution>> {
    latents
        .par_iter()
        .map(|z| neighbor_distribution(codebook, z.as_ref(), temp))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::Metric;

    fn three_codes() -> Codebook {
        Codebook::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]], Metric::L2Squared).unwrap()
    }

    // q = exp(-[0, 1, 4]) / (1 + e^-1 + e^-4), evaluated term by term.
    fn three_code_oracle() -> [f64; 3] {
        let w = [1.0, (-1.0f64).exp(), (-4.0f64).exp()];
        let z = w[0] + w[1] + w[2];
        [w[0] / z, w[1] / z, w[2] / z]
    }

    #[test]
    fn three_code_example() {
        let t = Temperature::from_two_tau_sq(1.0).unwrap();
        let q = neighbor_distribution(&three_codes(), &[0.0, 0.0], t).unwrap().to_dense();
        let oracle = three_code_oracle();
        for k in 0..3 {
            assert!((q[k] - oracle[k]).abs() < 1e-15);
        }
        assert!((q[0] - 0.7214).abs() < 5e-5);
        assert!((q[1] - 0.2654).abs() < 5e-5);
        assert!((q[2] - 0.0132).abs() < 5e-5);

        let lq = log_neighbor_distribution(&three_codes(), &[0.0, 0.0], t).unwrap();
        for k in 0..3 {
            assert!((lq[k] - oracle[k].ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_code_and_symmetric_codes() {
        let cb = Codebook::from_rows(&[[3.0, -1.0]], Metric::L2Squared).unwrap();
        let t = Temperature::new(0.3).unwrap();
        let q = neighbor_distribution(&cb, &[100.0, 7.0], t).unwrap();
        assert_eq!(q.to_dense(), vec![1.0]);
        assert_eq!(log_neighbor_distribution(&cb, &[1.0, 1.0], t).unwrap(), vec![0.0]);

        let cb = Codebook::from_rows(
            &[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            Metric::L2Squared,
        )
        .unwrap();
        for tau in [0.01, 0.71, 50.0] {
            let t = Temperature::new(tau).unwrap();
            let q = neighbor_distribution(&cb, &[0.0, 0.0], t).unwrap().to_dense();
            assert!(q.iter().all(|&p| (p - 0.25).abs() < 1e-15), "{q:?}");
        }
    }

    #[test]
    fn topk_examples() {
        let t = Temperature::from_two_tau_sq(1.0).unwrap();
        let cb = three_codes();
        let dense = neighbor_distribution(&cb, &[0.0, 0.0], t).unwrap().to_dense();
        let full = neighbor_distribution_topk(&cb, &[0.0, 0.0], t, 3).unwrap();
        for k in 0..3 {
            assert!((full.prob(k) - dense[k]).abs() < 1e-12);
        }
        let one = neighbor_distribution_topk(&cb, &[0.9, 0.1], t, 1).unwrap();
        assert_eq!(
            one,
            NeighborDistribution::Sparse {
                size: 3,
                entries: vec![(1, 1.0)]
            }
        );
        let two = neighbor_distribution_topk(&cb, &[0.0, 0.0], t, 2).unwrap();
        let e1 = (-1.0f64).exp();
        match &two {
            NeighborDistribution::Sparse { entries, .. } => {
                assert_eq!(entries.iter().map(|e| e.0).collect::<Vec<_>>(), vec![0, 1]);
                assert!((entries[0].1 - 1.0 / (1.0 + e1)).abs() < 1e-15);
                assert!((entries[1].1 - e1 / (1.0 + e1)).abs() < 1e-15);
                assert!((entries[0].1 - 0.7311).abs() < 5e-5);
            }
            _ => unreachable!(),
        }
        assert!(neighbor_distribution_topk(&cb, &[0.0, 0.0], t, 0).is_err());
        assert!(neighbor_distribution_topk(&cb, &[0.0, 0.0], t, 4).is_err());
        two.validate().unwrap();
    }

    #[test]
    fn topk_ties_keep_lowest_index() {
        let t = Temperature::new(1.0).unwrap();
        let q = topk_from_distances(&[1.0, 0.5, 0.5, 0.5], t, 2).unwrap();
        match q {
            NeighborDistribution::Sparse { entries, .. } => {
                assert_eq!(entries.iter().map(|e| e.0).collect::<Vec<_>>(), vec![1, 2]);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn temperature_parameterizations() {
        let t = Temperature::new(DEFAULT_TAU).unwrap();
        assert!((t.two_tau_sq() - 1.0082).abs() < 1e-12);
        let u = Temperature::from_two_tau_sq(1.0).unwrap();
        assert_eq!(u.two_tau_sq(), 1.0);
        assert!((u.tau() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(Temperature::new(0.0).is_err());
        assert!(Temperature::new(-1.0).is_err());
        assert!(Temperature::from_two_tau_sq(f64::INFINITY).is_err());
        let p: TemperatureParam = serde_json::from_str(r#"{"tau":0.5}"#).unwrap();
        assert_eq!(p.resolve().unwrap().two_tau_sq(), 0.5);
    }

    #[test]
    fn sparse_validation() {
        let bad = NeighborDistribution::Sparse {
            size: 3,
            entries: vec![(1, 0.5), (1, 0.5)],
        };
        assert!(bad.validate().is_err());
        let bad = NeighborDistribution::Sparse {
            size: 2,
            entries: vec![(0, 0.5), (5, 0.5)],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn non_finite_distances_rejected() {
        let t = Temperature::new(1.0).unwrap();
        assert!(probs_from_distances(&[0.0, f64::NAN], t).is_err());
        assert!(probs_from_distances(&[], t).is_err());
    }
}
