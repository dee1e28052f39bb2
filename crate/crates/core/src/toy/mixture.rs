//! Isotropic Gaussian mixtures in 2D and their exact token distribution on a
//! uniform grid.

use serde::{Deserialize, Serialize};

use super::GridSpec;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub centers: Vec<[f64; 2]>,
    /// Per-axis variance shared by every component.
    pub variance: f64,
    pub weights: Vec<f64>,
}

impl Default for MixtureSpec {
    /// Two equally weighted components at `(-2, 0)` and `(2, 0)`, variance 0.25.
    fn default() -> Self {
        Self {
            centers: vec![[-2.0, 0.0], [2.0, 0.0]],
            variance: 0.25,
            weights: vec![0.5, 0.5],
        }
    }
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::config("mixture.centers", "need at least one component"));
        }
        if self.centers.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::config("mixture.centers", "centers must be finite"));
        }
        if !(self.variance.is_finite() && self.variance > 0.0) {
            return Err(Error::config(
                "mixture.variance",
                format!("must be positive, got {}", self.variance),
            ));
        }
        if self.weights.len() != self.centers.len() {
            return Err(Error::config(
                "mixture.weights",
                format!(
                    "{} weights for {} centers",
                    self.weights.len(),
                    self.centers.len()
                ),
            ));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("mixture.weights", "weights must be nonnegative"));
        }
        let s: f64 = self.weights.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::config("mixture.weights", format!("weights sum to {s}")));
        }
        Ok(())
    }

    /// Probability-weighted mean of the component centers.
    pub fn mean(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for (c, w) in self.centers.iter().zip(&self.weights) {
            m[0] += w * c[0];
            m[1] += w * c[1];
        }
        m
    }
}

/// Draw `n` i.i.d. points: a component by inverse CDF over the weights, then
/// a Box–Muller Gaussian offset.
pub fn sample_mixture(spec: &MixtureSpec, n: usize, seed: u64) -> Result<Vec<[f64; 2]>> {
    spec.validate()?;
    let sd = spec.variance.sqrt();
    let last = spec.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    let mut rng = SplitMix64::new(seed);
    Ok((0..n)
        .map(|_| {
            let u = rng.next_f64();
            let mut acc = 0.0;
            let mut comp = last;
            for (i, w) in spec.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    comp = i;
                    break;
                }
            }
            let c = spec.centers[comp];
            let dx = rng.standard_normal();
            let dy = rng.standard_normal();
            [c[0] + sd * dx, c[1] + sd * dy]
        })
        .collect())
}

/// `P(lo < X <= hi)` for `X ~ N(mu, sd²)`, evaluated on whichever tail keeps
/// the subtraction well conditioned.
fn interval_mass(lo: f64, hi: f64, mu: f64, sd: f64) -> f64 {
    let a = (lo - mu) / sd;
    let b = (hi - mu) / sd;
    let upper_tail = |x: f64| 0.5 * libm::erfc(x / std::f64::consts::SQRT_2);
    if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else {
        upper_tail(-b) - upper_tail(-a)
    }
}

/// Exact distribution of the quantized token `Q(Z)` for `Z` drawn from the
/// mixture.
///
/// Each grid cell is the L2 Voronoi cell of its point: an axis-aligned box
/// bounded by midpoints between neighboring axis values, with the outer
/// cells extending to infinity (points outside the grid quantize to the
/// border). Cell mass factorizes per axis because components are isotropic.
/// The result is renormalized to absorb erfc rounding.
pub fn discretized_truth(spec: &MixtureSpec, grid: &GridSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    grid.validate()?;
    let axis = grid.axis()?;
    let n = axis.len();
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(f64::NEG_INFINITY);
    edges.extend(axis.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    edges.push(f64::INFINITY);

    let sd = spec.variance.sqrt();
    let mut probs = vec![0.0; n * n];
    for (c, &w) in spec.centers.iter().zip(&spec.weights) {
        if w == 0.0 {
            continue;
        }
        let px: Vec<f64> = edges.windows(2).map(|e| interval_mass(e[0], e[1], c[0], sd)).collect();
        let py: Vec<f64> = edges.windows(2).map(|e| interval_mass(e[0], e[1], c[1], sd)).collect();
        for (row, &y) in py.iter().enumerate() {
            for (col, &x) in px.iter().enumerate() {
                probs[row * n + col] += w * x * y;
            }
        }
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}
