//! Generalized linear model `θ_i = ⟨w, φ(i, x)⟩` and seeded Gaussian
//! perturbations shared by both applications.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("weight vector has {weights} entries but features have {features} columns")]
    DimensionMismatch { weights: usize, features: usize },
    #[error("feature row {row} has {len} entries, expected {cols}")]
    RaggedRow { row: usize, len: usize, cols: usize },
    #[error("feature row {0} contains a non-finite value")]
    NonFinite(usize),
    #[error("weight {index} = {value} lies outside the box of radius {radius}")]
    OutsideBox {
        index: usize,
        value: f64,
        radius: f64,
    },
    #[error("box radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("perturbation scale must be finite and non-negative, got {0}")]
    BadSigma(f64),
    #[error("at least one perturbation sample is required")]
    NoSamples,
}

/// Row-major feature matrix: one row per dimension `i ∈ I(x)`.
///
/// `kappa` is the largest row Euclidean norm, recorded when the matrix is
/// built.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    kappa: f64,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(ModelError::RaggedRow {
                    row: i,
                    len: row.len(),
                    cols,
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(rows.len(), cols, data)
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ModelError> {
        assert_eq!(data.len(), rows * cols, "flat buffer size");
        let mut kappa = 0.0_f64;
        for r in 0..rows {
            let row = &data[r * cols..(r + 1) * cols];
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite(r));
            }
            kappa = kappa.max(row.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        Ok(Self {
            rows,
            cols,
            data,
            kappa,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `Φᵀ g`, pulling a θ-space vector back to weight space.
    pub fn transpose_mul(&self, g: &[f64]) -> Vec<f64> {
        assert_eq!(g.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &gi) in g.iter().enumerate() {
            if gi != 0.0 {
                for (o, &phi) in out.iter_mut().zip(self.row(i)) {
                    *o += gi * phi;
                }
            }
        }
        out
    }
}

/// Weights of the linear model, constrained to `‖w‖_∞ ≤ box_radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    #[serde(rename = "d")]
    dim: usize,
    #[serde(rename = "M")]
    box_radius: f64,
    w: Vec<f64>,
}

impl WeightVector {
    pub fn new(w: Vec<f64>, box_radius: f64) -> Result<Self, ModelError> {
        if !(box_radius.is_finite() && box_radius > 0.0) {
            return Err(ModelError::BadRadius(box_radius));
        }
        if let Some((index, &value)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > box_radius)
        {
            return Err(ModelError::OutsideBox {
                index,
                value,
                radius: box_radius,
            });
        }
        Ok(Self {
            dim: w.len(),
            box_radius,
            w,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn box_radius(&self) -> f64 {
        self.box_radius
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Re-validates after deserialization.
    pub fn validated(self) -> Result<Self, ModelError> {
        if self.dim != self.w.len() {
            return Err(ModelError::DimensionMismatch {
                weights: self.w.len(),
                features: self.dim,
            });
        }
        Self::new(self.w, self.box_radius)
    }
}

/// `θ_i = ⟨w, Φ_i⟩` for every row.
pub fn predict_theta(w: &[f64], features: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
    if w.len() != features.cols() {
        return Err(ModelError::DimensionMismatch {
            weights: w.len(),
            features: features.cols(),
        });
    }
    Ok((0..features.rows())
        .map(|i| features.row(i).iter().zip(w).map(|(a, b)| a * b).sum())
        .collect())
}

/// Gaussian perturbation `w + σZ` settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub sigma: f64,
    pub nsamples: usize,
    pub seed: u64,
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(ModelError::BadSigma(self.sigma));
        }
        if self.nsamples == 0 {
            return Err(ModelError::NoSamples);
        }
        Ok(())
    }
}

/// `nsamples` standard-normal vectors of length `d`, drawn from a ChaCha8
/// stream seeded by `cfg.seed`. Row `k` only depends on the seed and `k`'s
/// predecessors, so prefixes are nested across `nsamples`.
pub fn sample_gaussians(cfg: &PerturbationConfig, d: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.nsamples)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

/// Five-point quantiles (min, 25%, median, 75%, max) by linear
/// interpolation between order statistics. Empty input gives zeros.
pub fn quantiles5(values: &[f64]) -> [f64; 5] {
    if values.is_empty() {
        return [0.0; 5];
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let last = (sorted.len() - 1) as f64;
    [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| {
        let pos = q * last;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    })
}
