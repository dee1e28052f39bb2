//! Codebooks, distance metrics and nearest-code quantization.

mod io;

pub use io::{load_codebook, read_codebook, save_codebook, write_codebook};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token index into a codebook.
pub type Token = usize;

/// Dissimilarity used by the quantizer. Smaller is closer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `Σ (x_d - y_d)^2`
    L2Squared,
    /// `-x·y`
    NegDot,
    /// `-(x·y) / (‖x‖ ‖y‖)`; undefined for zero vectors.
    NegCosine,
}

impl Metric {
    pub fn code(self) -> u8 {
        match self {
            Metric::L2Squared => 0,
            Metric::NegDot => 1,
            Metric::NegCosine => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Metric::L2Squared),
            1 => Some(Metric::NegDot),
            2 => Some(Metric::NegCosine),
            _ => None,
        }
    }

    /// Distance between two `f64` vectors of equal length.
    pub fn distance(self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        let d = match self {
            Metric::L2Squared => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
            Metric::NegDot => -dot(x, y),
            Metric::NegCosine => {
                let (nx, ny) = (dot(x, x).sqrt(), dot(y, y).sqrt());
                if nx == 0.0 || ny == 0.0 {
                    return Err(Error::ZeroNorm);
                }
                -dot(x, y) / (nx * ny)
            }
        };
        Ok(d)
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `K` code vectors of dimension `D`, stored row-major as `f32`.
///
/// Distances are accumulated in `f64`. A codebook is immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    vectors: Vec<f32>,
    size: usize,
    dim: usize,
    metric: Metric,
    norms: Vec<f64>,
}

impl Codebook {
    /// Build from a flat row-major buffer of `size * dim` values.
    pub fn new(vectors: Vec<f32>, size: usize, dim: usize, metric: Metric) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("size", "codebook must hold at least one code"));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "latent dimension must be positive"));
        }
        if vectors.len() != size * dim {
            return Err(Error::ShapeMismatch {
                what: "codebook buffer",
                expected: format!("{} values", size * dim),
                got: format!("{} values", vectors.len()),
            });
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("codebook vectors"));
        }
        let norms: Vec<f64> = vectors
            .chunks_exact(dim)
            .map(|row| row.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt())
            .collect();
        if metric == Metric::NegCosine && norms.contains(&0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            vectors,
            size,
            dim,
            metric,
            norms,
        })
    }

    /// Build from rows given in `f64`; values are rounded to `f32`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], metric: Metric) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            flat.extend(row.iter().map(|&x| x as f32));
        }
        Self::new(flat, rows.len(), dim, metric)
    }

    /// Number of codes `K`.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Latent dimension `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.vectors
    }

    pub fn code(&self, k: Token) -> &[f32] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    pub fn code_f64(&self, k: Token) -> Vec<f64> {
        self.code(k).iter().map(|&x| f64::from(x)).collect()
    }

    fn check_latent(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            });
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("latent"));
        }
        let norm = dot(z, z).sqrt();
        if self.metric == Metric::NegCosine && norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(norm)
    }

    #[inline]
    fn distance_unchecked(&self, k: Token, z: &[f64], z_norm: f64) -> f64 {
        let code = self.code(k);
        match self.metric {
            Metric::L2Squared => code
                .iter()
                .zip(z)
                .map(|(&c, &x)| {
                    let d = x - f64::from(c);
                    d * d
                })
                .sum(),
            Metric::NegDot => -code.iter().zip(z).map(|(&c, &x)| f64::from(c) * x).sum::<f64>(),
            Metric::NegCosine => {
                let d: f64 = code.iter().zip(z).map(|(&c, &x)| f64::from(c) * x).sum();
                -d / (self.norms[k] * z_norm)
            }
        }
    }

    /// `d(z, v_k)` for every code, in token order.
    pub fn distances(&self, z: &[f64]) -> Result<Vec<f64>> {
        let z_norm = self.check_latent(z)?;
        let out: Vec<f64> = (0..self.size)
            .map(|k| self.distance_unchecked(k, z, z_norm))
            .collect();
        if out.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("distances"));
        }
        Ok(out)
    }

    /// Nearest code under the codebook metric; exact ties go to the lowest index.
    pub fn quantize(&self, z: &[f64]) -> Result<Token> {
        let z_norm = self.check_latent(z)?;
        let mut best = 0;
        let mut best_d = self.distance_unchecked(0, z, z_norm);
        for k in 1..self.size {
            let d = self.distance_unchecked(k, z, z_norm);
            if d < best_d {
                best = k;
                best_d = d;
            }
        }
        if !best_d.is_finite() {
            return Err(Error::NonFinite("distances"));
        }
        Ok(best)
    }
}

/// Uniform 2D grid codebook over `[lo, hi]²` with `n_per_axis` values per
/// axis, endpoints included. Token `k = row * n + col` sits at
/// `(axis[col], axis[row])`, so x varies fastest.
pub fn grid_codebook(lo: f64, hi: f64, n_per_axis: usize) -> Result<Codebook> {
    let axis = grid_axis(lo, hi, n_per_axis)?;
    let mut flat = Vec::with_capacity(2 * n_per_axis * n_per_axis);
    for &y in &axis {
        for &x in &axis {
            flat.push(x as f32);
            flat.push(y as f32);
        }
    }
    Codebook::new(flat, n_per_axis * n_per_axis, 2, Metric::L2Squared)
}

/// The evenly spaced axis values used by [`grid_codebook`].
pub fn grid_axis(lo: f64, hi: f64, n_per_axis: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::invalid("lo/hi", format!("need finite lo < hi, got [{lo}, {hi}]")));
    }
    if n_per_axis < 2 {
        return Err(Error::invalid(
            "n_per_axis",
            format!("need at least 2 points per axis, got {n_per_axis}"),
        ));
    }
    let span = hi - lo;
    let last = (n_per_axis - 1) as f64;
    Ok((0..n_per_axis)
        .map(|i| lo + i as f64 * span / last)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_pair() -> Vec<[f64; 2]> {
        vec![[1.0, 0.0], [0.0, 1.0]]
    }

    #[test]
    fn distances_small_examples() {
        let cb = Codebook::from_rows(&unit_pair(), Metric::L2Squared).unwrap();
        assert_eq!(cb.distances(&[1.0, 0.0]).unwrap(), vec![0.0, 2.0]);
        let cb = Codebook::from_rows(&unit_pair(), Metric::NegDot).unwrap();
        assert_eq!(cb.distances(&[2.0, 3.0]).unwrap(), vec![-2.0, -3.0]);
        let cb = Codebook::from_rows(&unit_pair(), Metric::NegCosine).unwrap();
        let d = cb.distances(&[3.0, 4.0]).unwrap();
        assert!((d[0] + 0.6).abs() < 1e-15 && (d[1] + 0.8).abs() < 1e-15);
    }

    #[test]
    fn distance_errors() {
        let cb = Codebook::from_rows(&unit_pair(), Metric::L2Squared).unwrap();
        assert!(matches!(
            cb.distances(&[1.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
        let cb = Codebook::from_rows(&unit_pair(), Metric::NegCosine).unwrap();
        assert!(matches!(cb.distances(&[0.0, 0.0]), Err(Error::ZeroNorm)));
        assert!(matches!(
            Codebook::from_rows(&[[0.0, 0.0]], Metric::NegCosine),
            Err(Error::ZeroNorm)
        ));
        assert!(Codebook::new(vec![f32::NAN, 0.0], 1, 2, Metric::L2Squared).is_err());
        assert!(Codebook::new(vec![], 0, 2, Metric::L2Squared).is_err());
    }

    #[test]
    fn metric_symmetry() {
        let x = [0.3, -1.2, 2.0];
        let y = [1.5, 0.25, -0.5];
        for m in [Metric::L2Squared, Metric::NegDot, Metric::NegCosine] {
            assert_eq!(m.distance(&x, &y).unwrap(), m.distance(&y, &x).unwrap());
        }
    }

    #[test]
    fn quantize_ties_and_self() {
        let cb = Codebook::from_rows(&[[-1.0, 0.0], [1.0, 0.0]], Metric::L2Squared).unwrap();
        assert_eq!(cb.quantize(&[0.0, 0.0]).unwrap(), 0);
        let rows: Vec<[f64; 2]> = (0..6).map(|i| [i as f64, (i * i) as f64]).collect();
        let cb = Codebook::from_rows(&rows, Metric::L2Squared).unwrap();
        assert_eq!(cb.quantize(&rows[3]).unwrap(), 3);
    }

    #[test]
    fn grid_layout() {
        let cb = grid_codebook(0.0, 1.0, 2).unwrap();
        let codes: Vec<Vec<f64>> = (0..4).map(|k| cb.code_f64(k)).collect();
        assert_eq!(
            codes,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]
        );

        let cb = grid_codebook(-5.0, 5.0, 50).unwrap();
        assert_eq!((cb.size(), cb.dim()), (2500, 2));
        assert_eq!(cb.code_f64(0), vec![-5.0, -5.0]);
        assert_eq!(cb.code_f64(2499), vec![5.0, 5.0]);
        let axis = grid_axis(-5.0, 5.0, 50).unwrap();
        for w in axis.windows(2) {
            assert!((w[1] - w[0] - 10.0 / 49.0).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_rejects_bad_inputs() {
        assert!(grid_codebook(1.0, 1.0, 5).is_err());
        assert!(grid_codebook(0.0, 1.0, 1).is_err());
        assert!(grid_codebook(f64::NAN, 1.0, 3).is_err());
    }

    #[test]
    fn grid_quantize_matches_exhaustive_scan() {
        let cb = grid_codebook(-5.0, 5.0, 50).unwrap();
        for z in [[-2.0, 0.0], [-2.03, 0.04], [4.99, -4.99], [0.1, 0.1]] {
            let d = cb.distances(&z).unwrap();
            let mut best = 0;
            for k in 0..d.len() {
                if d[k] < d[best] {
                    best = k;
                }
            }
            assert_eq!(cb.quantize(&z).unwrap(), best);
        }
        // (-2.03, 0.04) -> column 15 (x = -1.9388), row 25 (y = 0.1020).
        let k = cb.quantize(&[-2.03, 0.04]).unwrap();
        let code = cb.code_f64(k);
        assert!((code[0] - (-5.0 + 15.0 * 10.0 / 49.0)).abs() < 1e-6, "{code:?}");
        assert!((code[1] - (-5.0 + 25.0 * 10.0 / 49.0)).abs() < 1e-6, "{code:?}");
    }
}
