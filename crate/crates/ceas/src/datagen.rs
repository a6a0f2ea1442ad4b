//! Synthetic per-node classification data and local training.
//!
//! Each node holds a two-class Gaussian-blob dataset and a logistic-regression
//! surrogate model. Gradient estimates carry configurable device noise: a
//! fixed-direction bias drawn once per node plus i.i.d. Gaussian perturbation,
//! both scaled by the node's error rate.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CeasError, Result};
use crate::param::ParamVector;
use crate::rng::substream;

/// Recipe for one node's local dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSpec {
    pub n_samples: usize,
    pub dim: usize,
    /// Distance between the two class means, in units of per-class std.
    pub class_separation: f64,
    /// Fraction of labels flipped after generation.
    pub label_noise: f64,
    pub seed: u64,
}

impl DataSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(CeasError::config("n_samples", "must be at least 2"));
        }
        if self.dim < 1 {
            return Err(CeasError::config("dim", "must be at least 1"));
        }
        if self.class_separation <= 0.0 {
            return Err(CeasError::config("class_separation", "must be positive"));
        }
        if !(0.0..=0.5).contains(&self.label_noise) {
            return Err(CeasError::config("label_noise", "must lie in [0, 0.5]"));
        }
        Ok(())
    }
}

/// A generated two-class dataset, row-major features.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

/// Two Gaussian blobs with unit per-class std, means `class_separation`
/// apart along axis 0, then exactly `floor(label_noise * n)` labels flipped.
/// Fully determined by `spec.seed`.
pub fn generate_dataset(spec: &DataSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = substream(spec.seed, 0xDA7A);
    let half = spec.class_separation / 2.0;
    let n = spec.n_samples;
    let mut features = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        // Alternate classes so both are present for any n >= 2.
        let label = (i % 2) as u8;
        let mean0 = if label == 0 { -half } else { half };
        for d in 0..spec.dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(if d == 0 { mean0 + z } else { z });
        }
        labels.push(label);
    }
    let flips = (spec.label_noise * n as f64).floor() as usize;
    let flip_idx = rand::seq::index::sample(&mut rng, n, flips);
    for i in flip_idx.iter() {
        labels[i] ^= 1;
    }
    Ok(Dataset {
        features,
        labels,
        dim: spec.dim,
    })
}

/// Logistic-regression weights plus bias; length `dim + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModel {
    pub params: ParamVector,
}

impl LocalModel {
    pub fn zeros(dim: usize) -> Self {
        LocalModel {
            params: ParamVector::zeros(dim + 1),
        }
    }

    pub fn from_params(params: ParamVector) -> Self {
        LocalModel { params }
    }

    pub fn dim(&self) -> usize {
        self.params.len() - 1
    }

    /// Raw decision score w.x + b.
    pub fn score(&self, x: &[f64]) -> f64 {
        let w = &self.params.as_slice()[..x.len()];
        let b = self.params[x.len()];
        w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if self.dim() == data.dim() {
            Ok(())
        } else {
            Err(CeasError::Shape {
                expected: data.dim() + 1,
                got: self.params.len(),
            })
        }
    }
}

/// Numerically stable sigmoid.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss of `model` on `data`.
pub fn logistic_loss(model: &LocalModel, data: &Dataset) -> Result<f64> {
    model.check_dataset(data)?;
    let mut total = 0.0;
    for i in 0..data.len() {
        let z = model.score(data.row(i));
        let y = data.label(i) as f64;
        // max(z,0) - z*y + ln(1 + e^{-|z|})
        total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
    }
    Ok(total / data.len() as f64)
}

/// Analytic gradient of the mean logistic loss; length `dim + 1`.
pub fn logistic_gradient(model: &LocalModel, data: &Dataset) -> Result<ParamVector> {
    model.check_dataset(data)?;
    let dim = data.dim();
    let mut grad = vec![0.0; dim + 1];
    for i in 0..data.len() {
        let x = data.row(i);
        let residual = sigmoid(model.score(x)) - data.label(i) as f64;
        for d in 0..dim {
            grad[d] += residual * x[d];
        }
        grad[dim] += residual;
    }
    let inv_n = 1.0 / data.len() as f64;
    for g in &mut grad {
        *g *= inv_n;
    }
    Ok(ParamVector::new(grad))
}

/// Magnitudes of the additive gradient noise channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientNoiseSpec {
    /// Norm of the systematic bias at error rate 1.
    pub bias_scale: f64,
    /// Per-component variance of the random part at error rate 1.
    pub variance_scale: f64,
    /// Device error rate in [0, 1].
    pub error_rate: f64,
}

impl GradientNoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bias_scale < 0.0 || self.variance_scale < 0.0 || self.error_rate < 0.0 {
            return Err(CeasError::config("noise", "fields must be nonnegative"));
        }
        if self.error_rate > 1.0 {
            return Err(CeasError::config("error_rate", "must not exceed 1"));
        }
        Ok(())
    }

    /// Draws the node's fixed bias direction and freezes the channel.
    pub fn realize<R: Rng>(self, dim_plus_bias: usize, rng: &mut R) -> Result<NoiseModel> {
        self.validate()?;
        let mut dir: Vec<f64> = (0..dim_plus_bias)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut dir {
                *v /= norm;
            }
        }
        let bias_norm = self.bias_scale * self.error_rate;
        Ok(NoiseModel {
            spec: self,
            bias: ParamVector::new(dir.iter().map(|v| v * bias_norm).collect()),
        })
    }
}

/// A realized per-node noise channel: fixed-direction bias plus i.i.d.
/// Gaussian noise with per-component variance `variance_scale * error_rate`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub spec: GradientNoiseSpec,
    bias: ParamVector,
}

impl NoiseModel {
    /// A channel that leaves gradients untouched.
    pub fn noiseless(dim_plus_bias: usize) -> Self {
        NoiseModel {
            spec: GradientNoiseSpec {
                bias_scale: 0.0,
                variance_scale: 0.0,
                error_rate: 0.0,
            },
            bias: ParamVector::zeros(dim_plus_bias),
        }
    }

    pub fn bias(&self) -> &ParamVector {
        &self.bias
    }

    /// One noise draw; always consumes the same number of stream values.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> ParamVector {
        let std = (self.spec.variance_scale * self.spec.error_rate).sqrt();
        let mut out = self.bias.clone();
        for v in out.as_mut_slice() {
            let z: f64 = StandardNormal.sample(rng);
            *v += std * z;
        }
        out
    }
}

/// Noisy local gradient estimate: analytic logistic gradient plus one draw
/// from the node's noise channel.
pub fn local_gradient<R: Rng>(
    model: &LocalModel,
    data: &Dataset,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<ParamVector> {
    let mut grad = logistic_gradient(model, data)?;
    let xi = noise.sample(rng);
    grad.check_dim(xi.len())?;
    grad.axpy(1.0, &xi)?;
    Ok(grad)
}

/// Fraction of correct sign predictions; score <= 0 predicts class 0.
pub fn evaluate_accuracy(model: &LocalModel, data: &Dataset) -> Result<f64> {
    model.check_dataset(data)?;
    let mut correct = 0usize;
    for i in 0..data.len() {
        let predicted = u8::from(model.score(data.row(i)) > 0.0);
        if predicted == data.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
