use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::parallel;

use super::train::TrainConfig;

/// Gaussian kernel `exp(-||x - y||^2 / sigma^2)`.
///
/// The kernel equals 1 when `x == y` and its square is proportional to a
/// Gaussian density with standard deviation `sigma / 2`, which is why the
/// mixture components of [`KdmModel`] have that spread.
pub fn kernel_eval(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "kernel bandwidth must be a positive finite number, got {sigma}"
        )));
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-d2 / (sigma * sigma)).exp())
}

/// Mixture density model backed by a set of component locations, softmax
/// mixture weights, and one shared bandwidth.
///
/// Each component contributes a Gaussian with standard deviation
/// `sigma / 2` in standardized coordinates. Inputs are standardized with
/// the stored per-column mean and scale before evaluation, and densities
/// are reported in original units (the change of variables is part of
/// [`KdmModel::log_density`]).
#[derive(Debug, Clone)]
pub struct KdmModel {
    pub(crate) dim: usize,
    /// Component locations in standardized coordinates, row-major `m x dim`.
    pub(crate) components: Vec<f64>,
    /// Unnormalized log weights; the mixture weights are their softmax.
    pub(crate) weight_logits: Vec<f64>,
    pub(crate) sigma: f64,
    pub(crate) standardize_mean: Vec<f64>,
    pub(crate) standardize_scale: Vec<f64>,
    pub(crate) column_names: Vec<String>,
    pub(crate) train_config: Option<TrainConfig>,
    pub(crate) final_log_likelihood: Option<f64>,
    pub(crate) initial_log_likelihood: Option<f64>,
    /// Density of each training point under the fitted model. Present
    /// only on models returned by `fit` (or after
    /// [`KdmModel::attach_train_densities`]); not serialized.
    pub(crate) train_densities: Option<Vec<f64>>,
}

impl KdmModel {
    /// Builds a model from explicit parts.
    ///
    /// `components` are standardized coordinates, row-major `m x dim`.
    /// `weights` must be positive and sum to 1 within `1e-9`; they are
    /// stored as logits, so any representation of the same simplex point
    /// evaluates identically. An empty `column_names` gets default names.
    pub fn from_parts(
        dim: usize,
        components: Vec<f64>,
        weights: &[f64],
        sigma: f64,
        standardize_mean: Vec<f64>,
        standardize_scale: Vec<f64>,
        column_names: Vec<String>,
    ) -> Result<KdmModel> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        let m = weights.len();
        if m == 0 {
            return Err(Error::InvalidArgument(
                "model must have at least one component".into(),
            ));
        }
        if components.len() != m * dim {
            return Err(Error::InvalidArgument(format!(
                "component buffer has {} values, expected {} ({} components x {} dims)",
                components.len(),
                m * dim,
                m,
                dim
            )));
        }
        if components.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "component locations must be finite".into(),
            ));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be a positive finite number, got {sigma}"
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidArgument(
                "mixture weights must be positive finite numbers".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "mixture weights must sum to 1, got {total}"
            )));
        }
        if standardize_mean.len() != dim || standardize_scale.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "standardization vectors must have length {dim}"
            )));
        }
        if standardize_mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "standardization means must be finite".into(),
            ));
        }
        if standardize_scale
            .iter()
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::InvalidArgument(
                "standardization scales must be positive finite numbers".into(),
            ));
        }
        let column_names = if column_names.is_empty() {
            (0..dim).map(|j| format!("x{j}")).collect()
        } else if column_names.len() == dim {
            column_names
        } else {
            return Err(Error::InvalidArgument(format!(
                "expected {} column names, got {}",
                dim,
                column_names.len()
            )));
        };
        Ok(KdmModel {
            dim,
            components,
            weight_logits: weights.iter().map(|w| w.ln()).collect(),
            sigma,
            standardize_mean,
            standardize_scale,
            column_names,
            train_config: None,
            final_log_likelihood: None,
            initial_log_likelihood: None,
            train_densities: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.weight_logits.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Standard deviation of a single component in standardized
    /// coordinates, `sigma / 2`.
    pub fn kernel_std(&self) -> f64 {
        self.sigma() / 2.0
    }

    /// Mixture weights, the softmax of the stored logits. Positive and
    /// summing to 1 up to rounding.
    pub fn weights(&self) -> Vec<f64> {
        softmax(&self.weight_logits)
    }

    /// Component locations in standardized coordinates, row-major.
    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn standardize_mean(&self) -> &[f64] {
        &self.standardize_mean
    }

    pub fn standardize_scale(&self) -> &[f64] {
        &self.standardize_scale
    }

    pub fn train_config(&self) -> Option<&TrainConfig> {
        self.train_config.as_ref()
    }

    pub fn final_log_likelihood(&self) -> Option<f64> {
        self.final_log_likelihood
    }

    pub fn initial_log_likelihood(&self) -> Option<f64> {
        self.initial_log_likelihood
    }

    pub fn train_densities(&self) -> Option<&[f64]> {
        self.train_densities.as_deref()
    }

    /// Renames the modeled columns, for callers that fit from named data.
    pub fn with_column_names(mut self, names: Vec<String>) -> Result<KdmModel> {
        if names.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} column names, got {}",
                self.dim,
                names.len()
            )));
        }
        self.column_names = names;
        Ok(self)
    }

    /// Log density at `x` in original units.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "density evaluation point must be finite".into(),
            ));
        }
        Ok(Evaluator::new(self).log_density(x))
    }

    /// Total log-likelihood of `data`, summed row by row in order.
    pub fn log_likelihood(&self, data: &Matrix) -> Result<f64> {
        self.check_data(data)?;
        let eval = Evaluator::new(self);
        Ok(data.iter_rows().map(|row| eval.log_density(row)).sum())
    }

    /// Same sum as [`KdmModel::log_likelihood`], computed over fixed row
    /// blocks in parallel and folded in block order, so the result does
    /// not depend on the worker count.
    pub fn log_likelihood_par(&self, data: &Matrix) -> Result<f64> {
        self.check_data(data)?;
        let eval = Evaluator::new(self);
        Ok(parallel::fold_blocks(
            data.rows(),
            |range| {
                range
                    .map(|i| eval.log_density(data.row(i)))
                    .sum::<f64>()
            },
            0.0,
            |a, b| a + b,
        ))
    }

    /// Cumulative distribution function of a univariate model.
    pub fn cdf_eval(&self, x: f64) -> Result<f64> {
        if self.dim != 1 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        if !x.is_finite() {
            return Err(Error::InvalidArgument(
                "cdf evaluation point must be finite".into(),
            ));
        }
        let z = (x - self.standardize_mean[0]) / self.standardize_scale[0];
        Ok(self.cdf_std(z, &self.weights()))
    }

    /// CDF in standardized coordinates given precomputed weights.
    fn cdf_std(&self, z: f64, weights: &[f64]) -> f64 {
        let s = self.kernel_std();
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            let t = (z - self.components[i]) / s;
            acc += w * normal_cdf(t);
        }
        acc.clamp(0.0, 1.0)
    }

    /// Inverse CDF of a univariate model, by bisection.
    ///
    /// The root is bracketed by the component range padded by twelve
    /// component standard deviations, where the CDF is within 1e-30 of
    /// 0 and 1. Bisection runs until the CDF at the midpoint is within
    /// 1e-12 of `q` or the bracket collapses, at most 200 iterations.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if self.dim != 1 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        if !(q.is_finite() && q > 0.0 && q < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "quantile level must be strictly between 0 and 1, got {q}"
            )));
        }
        let weights = self.weights();
        let s = self.kernel_std();
        let mut lo = self
            .components
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
            - 12.0 * s;
        let mut hi = self
            .components
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            + 12.0 * s;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let c = self.cdf_std(mid, &weights);
            if (c - q).abs() <= 1e-12 {
                lo = mid;
                hi = mid;
                break;
            }
            if c < q {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * (1.0 + mid.abs()) {
                break;
            }
        }
        let z = 0.5 * (lo + hi);
        Ok(z * self.standardize_scale[0] + self.standardize_mean[0])
    }

    /// Draws `count` rows from the mixture, in original units.
    ///
    /// The generator is seeded only by `seed`, so draws are reproducible
    /// across runs and platforms. Per row, one uniform picks the
    /// component by inverse transform over the cumulative weights, then
    /// one standard normal per dimension is scaled by the component
    /// spread.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Matrix> {
        if count == 0 {
            return Err(Error::InvalidArgument(
                "sample count must be at least 1".into(),
            ));
        }
        let weights = self.weights();
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        let s = self.kernel_std();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(count * self.dim);
        for _ in 0..count {
            let u: f64 = rng.gen();
            let mut i = cumulative.partition_point(|c| *c <= u);
            if i >= weights.len() {
                i = weights.len() - 1;
            }
            for j in 0..self.dim {
                let n: f64 = rng.sample(rand_distr::StandardNormal);
                let z = self.components[i * self.dim + j] + s * n;
                data.push(z * self.standardize_scale[j] + self.standardize_mean[j]);
            }
        }
        Matrix::from_flat(count, self.dim, data)
    }

    /// Recomputes per-point densities for `data` and stores them on the
    /// model, restoring what `fit` keeps for its training set. Needed
    /// before low-density thresholds on a model loaded from disk.
    pub fn attach_train_densities(&mut self, data: &Matrix) -> Result<()> {
        self.check_data(data)?;
        let eval = Evaluator::new(self);
        self.train_densities = Some(
            data.iter_rows()
                .map(|row| eval.log_density(row).exp())
                .collect(),
        );
        Ok(())
    }

    fn check_data(&self, data: &Matrix) -> Result<()> {
        if data.cols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: data.cols(),
            });
        }
        if data.is_empty() {
            return Err(Error::InvalidArgument("data must not be empty".into()));
        }
        if let Some(i) = data.first_non_finite_row() {
            return Err(Error::InvalidArgument(format!(
                "non-finite value in data row {i}"
            )));
        }
        Ok(())
    }
}

/// Standard normal CDF through the complementary error function, which
/// keeps the lower tail accurate.
pub(crate) fn normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

pub(crate) fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max
        + logits
            .iter()
            .map(|l| (l - max).exp())
            .sum::<f64>()
            .ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Precomputed quantities for repeated density evaluation: log weights,
/// the exponent scale, and the normalization constant including the
/// de-standardization Jacobian.
pub(crate) struct Evaluator<'a> {
    model: &'a KdmModel,
    log_weights: Vec<f64>,
    inv_two_s2: f64,
    log_norm: f64,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(model: &'a KdmModel) -> Evaluator<'a> {
        let s = model.kernel_std();
        let d = model.dim as f64;
        let log_jacobian: f64 = model.standardize_scale.iter().map(|v| v.ln()).sum();
        Evaluator {
            model,
            log_weights: log_softmax(&model.weight_logits),
            inv_two_s2: 1.0 / (2.0 * s * s),
            log_norm: -0.5 * d * (2.0 * PI * s * s).ln() - log_jacobian,
        }
    }

    /// Log density at an original-units point. Uses a streaming
    /// log-sum-exp over components, so no per-call allocation.
    pub(crate) fn log_density(&self, x: &[f64]) -> f64 {
        let m = self.model.n_components();
        let d = self.model.dim;
        let mut z = [0.0f64; 2];
        for (j, zj) in z.iter_mut().take(d).enumerate() {
            *zj = (x[j] - self.model.standardize_mean[j]) / self.model.standardize_scale[j];
        }
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for i in 0..m {
            let mut q = 0.0;
            for (zj, cj) in z[..d].iter().zip(&self.model.components[i * d..]) {
                let diff = zj - cj;
                q += diff * diff;
            }
            let e = self.log_weights[i] - q * self.inv_two_s2;
            if e > max {
                sum = sum * (max - e).exp() + 1.0;
                max = e;
            } else {
                sum += (e - max).exp();
            }
        }
        max + sum.ln() + self.log_norm
    }
}
