use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::parallel;

use super::model::{log_softmax, Evaluator, KdmModel};

/// Epoch window for the early-stop test: training stops when the best
/// log-likelihood has improved by less than the configured relative
/// threshold over this many epochs.
pub const EARLY_STOP_WINDOW: usize = 20;

/// Largest training set that still trains full-batch under
/// [`BatchSize::Auto`]; larger sets fall back to mini-batches of
/// [`AUTO_BATCH_ROWS`].
pub const FULL_BATCH_LIMIT: usize = 65_536;
pub const AUTO_BATCH_ROWS: usize = 8_192;

/// How component locations are initialized before optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitStrategy {
    /// Components start at a uniform subsample of the training rows.
    #[serde(rename = "subsample")]
    SubsampleData,
    /// Greedy spread seeding: each new component is drawn with
    /// probability proportional to its squared distance from the
    /// components picked so far.
    #[serde(rename = "kmeans")]
    KMeansLike,
}

/// Rows per optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    /// Full batch up to [`FULL_BATCH_LIMIT`] rows, mini-batches of
    /// [`AUTO_BATCH_ROWS`] beyond that.
    Auto,
    Full,
    Fixed(usize),
}

impl Serialize for BatchSize {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchSize::Auto => serializer.serialize_str("auto"),
            BatchSize::Full => serializer.serialize_str("full"),
            BatchSize::Fixed(n) => serializer.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Word(String),
            Rows(u64),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Word(w) => match w.as_str() {
                "auto" => Ok(BatchSize::Auto),
                "full" => Ok(BatchSize::Full),
                other => Err(D::Error::custom(format!(
                    "batch size must be \"auto\", \"full\", or a row count, got \"{other}\""
                ))),
            },
            Repr::Rows(n) => Ok(BatchSize::Fixed(n as usize)),
        }
    }
}

/// Training settings for [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_components: usize,
    pub learning_rate: f64,
    /// Initial kernel bandwidth in standardized units. The bandwidth
    /// itself is trained (through its log), this is only the start.
    pub sigma_init: f64,
    pub epochs: usize,
    pub batch_size: BatchSize,
    pub seed: u64,
    pub init: InitStrategy,
    /// Relative log-likelihood improvement under which training stops
    /// early, measured over [`EARLY_STOP_WINDOW`] epochs. Zero disables
    /// early stopping.
    pub min_rel_improvement: f64,
    /// When false, data is used as-is and the model stores identity
    /// standardization. Only sensible for data that is already near
    /// unit scale, since `sigma_init` is expressed in those units.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            n_components: 400,
            learning_rate: 1e-3,
            sigma_init: 0.1,
            epochs: 300,
            batch_size: BatchSize::Auto,
            seed: 0,
            init: InitStrategy::SubsampleData,
            min_rel_improvement: 1e-6,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(Error::InvalidArgument(
                "n_components must be at least 1".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be a positive finite number, got {}",
                self.learning_rate
            )));
        }
        if !(self.sigma_init.is_finite() && self.sigma_init > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma_init must be a positive finite number, got {}",
                self.sigma_init
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == BatchSize::Fixed(0) {
            return Err(Error::InvalidArgument(
                "batch size must be at least 1 row".into(),
            ));
        }
        if !(self.min_rel_improvement.is_finite() && self.min_rel_improvement >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "min_rel_improvement must be a nonnegative finite number, got {}",
                self.min_rel_improvement
            )));
        }
        Ok(())
    }
}

/// Gradient of the mean log-likelihood of a batch with respect to the
/// component locations (standardized coordinates, row-major), the weight
/// logits, and log sigma.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub components: Vec<f64>,
    pub weight_logits: Vec<f64>,
    pub log_sigma: f64,
}

/// Flat parameter vector layout: components, then logits, then log sigma.
struct Layout {
    m: usize,
    d: usize,
}

impl Layout {
    fn len(&self) -> usize {
        self.m * self.d + self.m + 1
    }

    fn split<'a>(&self, params: &'a [f64]) -> (&'a [f64], &'a [f64], f64) {
        let (comps, rest) = params.split_at(self.m * self.d);
        let (logits, sigma) = rest.split_at(self.m);
        (comps, logits, sigma[0])
    }
}

/// Partial sums of one accumulation pass: total standardized
/// log-likelihood, responsibility sums, and raw gradient sums.
struct Accum {
    ll: f64,
    grad_components: Vec<f64>,
    resp_sums: Vec<f64>,
    grad_log_sigma: f64,
    rows: usize,
}

impl Accum {
    fn zero(m: usize, d: usize) -> Accum {
        Accum {
            ll: 0.0,
            grad_components: vec![0.0; m * d],
            resp_sums: vec![0.0; m],
            grad_log_sigma: 0.0,
            rows: 0,
        }
    }

    fn merge(mut self, other: Accum) -> Accum {
        self.ll += other.ll;
        for (a, b) in self.grad_components.iter_mut().zip(&other.grad_components) {
            *a += b;
        }
        for (a, b) in self.resp_sums.iter_mut().zip(&other.resp_sums) {
            *a += b;
        }
        self.grad_log_sigma += other.grad_log_sigma;
        self.rows += other.rows;
        self
    }
}

/// One pass over the selected rows of standardized data, producing the
/// log-likelihood sum and gradient sums. `scratch` must have length `m`.
///
/// Per row this fills `scratch` with component exponents, exponentiates
/// in place against the row maximum, and then walks components once more
/// for the gradient terms, so each point-component pair costs a single
/// `exp`.
#[allow(clippy::too_many_arguments)]
fn accumulate_rows(
    layout: &Layout,
    params: &[f64],
    log_weights: &[f64],
    data: &[f64],
    rows: impl Iterator<Item = usize>,
    scratch: &mut [f64],
    with_gradient: bool,
    acc: &mut Accum,
) {
    let (comps, _, log_sigma) = layout.split(params);
    let (m, d) = (layout.m, layout.d);
    let s = (log_sigma.exp()) / 2.0;
    let inv_two_s2 = 1.0 / (2.0 * s * s);
    let inv_s2 = 1.0 / (s * s);
    let log_norm = -0.5 * d as f64 * (2.0 * PI * s * s).ln();
    for k in rows {
        let z = &data[k * d..(k + 1) * d];
        let mut max = f64::NEG_INFINITY;
        for i in 0..m {
            let mut q = 0.0;
            for j in 0..d {
                let diff = z[j] - comps[i * d + j];
                q += diff * diff;
            }
            let e = log_weights[i] - q * inv_two_s2;
            scratch[i] = e;
            if e > max {
                max = e;
            }
        }
        let mut sum = 0.0;
        for v in scratch.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        acc.ll += max + sum.ln() + log_norm;
        acc.rows += 1;
        if !with_gradient {
            continue;
        }
        let inv_sum = 1.0 / sum;
        for i in 0..m {
            let r = scratch[i] * inv_sum;
            let mut q = 0.0;
            for j in 0..d {
                let diff = z[j] - comps[i * d + j];
                q += diff * diff;
                acc.grad_components[i * d + j] += r * diff * inv_s2;
            }
            acc.resp_sums[i] += r;
            acc.grad_log_sigma += r * (q * inv_s2 - d as f64);
        }
    }
}

/// Mean log-likelihood (standardized units) and its gradient over a full
/// data pass, block-parallel with a fixed fold order.
fn grad_full(layout: &Layout, params: &[f64], data: &[f64], n: usize) -> (f64, Gradients) {
    let (_, logits, _) = layout.split(params);
    let log_weights = log_softmax(logits);
    let acc = parallel::fold_blocks(
        n,
        |range| {
            let mut acc = Accum::zero(layout.m, layout.d);
            let mut scratch = vec![0.0; layout.m];
            accumulate_rows(
                layout,
                params,
                &log_weights,
                data,
                range,
                &mut scratch,
                true,
                &mut acc,
            );
            acc
        },
        Accum::zero(layout.m, layout.d),
        Accum::merge,
    );
    finish_gradient(logits, acc)
}

/// Same as [`grad_full`] over an explicit row subset, sequentially.
fn grad_subset(layout: &Layout, params: &[f64], data: &[f64], rows: &[usize]) -> (f64, Gradients) {
    let (_, logits, _) = layout.split(params);
    let log_weights = log_softmax(logits);
    let mut acc = Accum::zero(layout.m, layout.d);
    let mut scratch = vec![0.0; layout.m];
    accumulate_rows(
        layout,
        params,
        &log_weights,
        data,
        rows.iter().copied(),
        &mut scratch,
        true,
        &mut acc,
    );
    finish_gradient(logits, acc)
}

fn finish_gradient(logits: &[f64], acc: Accum) -> (f64, Gradients) {
    let n = acc.rows as f64;
    let weights = super::model::softmax(logits);
    let mut grad_components = acc.grad_components;
    for g in &mut grad_components {
        *g /= n;
    }
    let weight_logits = acc
        .resp_sums
        .iter()
        .zip(&weights)
        .map(|(r, w)| r / n - w)
        .collect();
    (
        acc.ll / n,
        Gradients {
            components: grad_components,
            weight_logits,
            log_sigma: acc.grad_log_sigma / n,
        },
    )
}

/// Total standardized log-likelihood of all rows, block-parallel.
fn ll_total(layout: &Layout, params: &[f64], data: &[f64], n: usize) -> f64 {
    let (_, logits, _) = layout.split(params);
    let log_weights = log_softmax(logits);
    let acc = parallel::fold_blocks(
        n,
        |range| {
            let mut acc = Accum::zero(0, 0);
            let mut scratch = vec![0.0; layout.m];
            accumulate_rows(
                layout,
                params,
                &log_weights,
                data,
                range,
                &mut scratch,
                false,
                &mut acc,
            );
            acc
        },
        Accum::zero(0, 0),
        |a, b| Accum {
            ll: a.ll + b.ll,
            rows: a.rows + b.rows,
            ..a
        },
    );
    acc.ll
}

/// Gradient of the mean log-likelihood of `batch` under `model`.
///
/// The batch is in original units and is standardized with the model's
/// stored mean and scale before differentiation, so the result matches
/// what `fit` uses internally.
pub fn gradients(model: &KdmModel, batch: &Matrix) -> Result<Gradients> {
    if batch.cols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: batch.cols(),
        });
    }
    if batch.is_empty() {
        return Err(Error::InvalidArgument("batch must not be empty".into()));
    }
    if let Some(i) = batch.first_non_finite_row() {
        return Err(Error::InvalidArgument(format!(
            "non-finite value in data row {i}"
        )));
    }
    let layout = Layout {
        m: model.n_components(),
        d: model.dim(),
    };
    let mut params = Vec::with_capacity(layout.len());
    params.extend_from_slice(&model.components);
    params.extend_from_slice(&model.weight_logits);
    params.push(model.sigma.ln());
    let data = standardize_with(batch, &model.standardize_mean, &model.standardize_scale);
    let (_, grad) = grad_full(&layout, &params, &data, batch.rows());
    if grad.components.iter().any(|g| !g.is_finite())
        || grad.weight_logits.iter().any(|g| !g.is_finite())
        || !grad.log_sigma.is_finite()
    {
        return Err(Error::Numeric(
            "gradient evaluation produced a non-finite value".into(),
        ));
    }
    Ok(grad)
}

fn standardize_with(data: &Matrix, mean: &[f64], scale: &[f64]) -> Vec<f64> {
    let d = data.cols();
    let mut out = Vec::with_capacity(data.rows() * d);
    for row in data.iter_rows() {
        for j in 0..d {
            out.push((row[j] - mean[j]) / scale[j]);
        }
    }
    out
}

/// Per-column mean and population standard deviation.
fn column_moments(data: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let d = data.cols();
    let mut mean = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    let mut count = 0.0;
    for row in data.iter_rows() {
        count += 1.0;
        for j in 0..d {
            let delta = row[j] - mean[j];
            mean[j] += delta / count;
            m2[j] += delta * (row[j] - mean[j]);
        }
    }
    let std = m2.iter().map(|v| (v / count).sqrt()).collect();
    (mean, std)
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: usize,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(lr: f64, len: usize) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    /// Ascent step: parameters move along the gradient.
    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] += self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

fn init_components(
    data: &[f64],
    n: usize,
    d: usize,
    m: usize,
    strategy: InitStrategy,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    match strategy {
        InitStrategy::SubsampleData => {
            let picks = rand::seq::index::sample(rng, n, m);
            let mut out = Vec::with_capacity(m * d);
            for k in picks.iter() {
                out.extend_from_slice(&data[k * d..(k + 1) * d]);
            }
            out
        }
        InitStrategy::KMeansLike => {
            let mut out = Vec::with_capacity(m * d);
            let first = rng.gen_range(0..n);
            out.extend_from_slice(&data[first * d..(first + 1) * d]);
            let mut dist2: Vec<f64> = (0..n)
                .map(|k| sq_dist(&data[k * d..(k + 1) * d], &out[0..d]))
                .collect();
            for _ in 1..m {
                let total: f64 = dist2.iter().sum();
                let pick = if total > 0.0 {
                    let r = rng.gen::<f64>() * total;
                    let mut cum = 0.0;
                    let mut idx = n - 1;
                    for (k, w) in dist2.iter().enumerate() {
                        cum += w;
                        if r < cum {
                            idx = k;
                            break;
                        }
                    }
                    idx
                } else {
                    rng.gen_range(0..n)
                };
                let start = out.len();
                out.extend_from_slice(&data[pick * d..(pick + 1) * d]);
                let c = &out[start..start + d];
                for k in 0..n {
                    let q = sq_dist(&data[k * d..(k + 1) * d], c);
                    if q < dist2[k] {
                        dist2[k] = q;
                    }
                }
            }
            out
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fits a density model to `data` by maximizing the log-likelihood with
/// Adam.
///
/// Components start at data locations, weights start uniform, and the
/// bandwidth starts at `sigma_init`. The parameters with the best
/// full-data log-likelihood seen during training are returned, so the
/// fitted model is never worse than its initialization. Identical data,
/// config, and seed give bitwise identical results.
pub fn fit(data: &Matrix, config: &TrainConfig) -> Result<KdmModel> {
    config.validate()?;
    let d = data.cols();
    if d != 1 && d != 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    let n = data.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("training data is empty".into()));
    }
    if let Some(i) = data.first_non_finite_row() {
        return Err(Error::InvalidArgument(format!(
            "non-finite value in data row {i}"
        )));
    }
    let m = config.n_components;
    if n < m {
        return Err(Error::InvalidArgument(format!(
            "training data has {n} rows, fewer than {m} components"
        )));
    }

    let (mean, scale) = if config.standardize {
        let (mean, std) = column_moments(data);
        if let Some(j) = std.iter().position(|s| *s <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "column {j} has zero variance and cannot be standardized"
            )));
        }
        (mean, std)
    } else {
        (vec![0.0; d], vec![1.0; d])
    };
    let std_data = standardize_with(data, &mean, &scale);

    // Constant that turns standardized log-likelihood totals into
    // original-unit totals.
    let jacobian_per_row: f64 = scale.iter().map(|v| v.ln()).sum();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let layout = Layout { m, d };
    let mut params = init_components(&std_data, n, d, m, config.init, &mut rng);
    params.resize(layout.len() - 1, 0.0);
    params.push(config.sigma_init.ln());

    let batch_rows = match config.batch_size {
        BatchSize::Auto => {
            if n <= FULL_BATCH_LIMIT {
                n
            } else {
                AUTO_BATCH_ROWS
            }
        }
        BatchSize::Full => n,
        BatchSize::Fixed(b) => b.min(n),
    };
    let full_batch = batch_rows >= n;

    let mut adam = Adam::new(config.learning_rate, layout.len());
    let to_orig = |ll_std_total: f64| ll_std_total - n as f64 * jacobian_per_row;

    let ll_init = to_orig(ll_total(&layout, &params, &std_data, n));
    if !ll_init.is_finite() {
        return Err(Error::Numeric(
            "log-likelihood is non-finite at initialization".into(),
        ));
    }
    let mut best_params = params.clone();
    let mut best_ll = ll_init;
    // best_history[t] is the best log-likelihood known after epoch t,
    // with epoch 0 the initialization.
    let mut best_history = vec![best_ll];
    let mut indices: Vec<usize> = (0..n).collect();

    for _epoch in 0..config.epochs {
        if full_batch {
            // The fused pass gives the likelihood of the parameters
            // before this epoch's update; snapshot first, then step.
            let (mean_ll, grad) = grad_full(&layout, &params, &std_data, n);
            let ll = to_orig(mean_ll * n as f64);
            if !ll.is_finite() {
                return Err(Error::Numeric(
                    "log-likelihood became non-finite during training".into(),
                ));
            }
            if ll > best_ll {
                best_ll = ll;
                best_params.copy_from_slice(&params);
            }
            adam.step(&mut params, &flatten_grad(&grad));
        } else {
            indices.shuffle(&mut rng);
            for chunk in indices.chunks(batch_rows) {
                let (_, grad) = grad_subset(&layout, &params, &std_data, chunk);
                adam.step(&mut params, &flatten_grad(&grad));
            }
            let ll = to_orig(ll_total(&layout, &params, &std_data, n));
            if !ll.is_finite() {
                return Err(Error::Numeric(
                    "log-likelihood became non-finite during training".into(),
                ));
            }
            if ll > best_ll {
                best_ll = ll;
                best_params.copy_from_slice(&params);
            }
        }
        best_history.push(best_ll);
        let t = best_history.len() - 1;
        if config.min_rel_improvement > 0.0 && t >= EARLY_STOP_WINDOW {
            let before = best_history[t - EARLY_STOP_WINDOW];
            if best_ll - before < config.min_rel_improvement * before.abs() {
                break;
            }
        }
    }

    if full_batch {
        // The last update was never evaluated; give it the same chance
        // the intermediate parameters had.
        let ll = to_orig(ll_total(&layout, &params, &std_data, n));
        if ll.is_finite() && ll > best_ll {
            best_ll = ll;
            best_params.copy_from_slice(&params);
        }
    }

    let (comps, logits, log_sigma) = layout.split(&best_params);
    let mut model = KdmModel {
        dim: d,
        components: comps.to_vec(),
        weight_logits: logits.to_vec(),
        sigma: log_sigma.exp(),
        standardize_mean: mean,
        standardize_scale: scale,
        column_names: (0..d).map(|j| format!("x{j}")).collect(),
        train_config: Some(config.clone()),
        final_log_likelihood: Some(best_ll),
        initial_log_likelihood: Some(ll_init),
        train_densities: None,
    };
    let eval = Evaluator::new(&model);
    let densities = data
        .iter_rows()
        .map(|row| eval.log_density(row).exp())
        .collect();
    drop(eval);
    model.train_densities = Some(densities);
    Ok(model)
}

fn flatten_grad(grad: &Gradients) -> Vec<f64> {
    let mut flat = Vec::with_capacity(grad.components.len() + grad.weight_logits.len() + 1);
    flat.extend_from_slice(&grad.components);
    flat.extend_from_slice(&grad.weight_logits);
    flat.push(grad.log_sigma);
    flat
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_cluster_data(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let center = if i % 2 == 0 { -3.0 } else { 4.0 };
            let u: f64 = rng.sample(rand_distr::StandardNormal);
            values.push(center + 0.7 * u);
        }
        Matrix::from_column(values)
    }

    fn quick_config(m: usize, epochs: usize) -> TrainConfig {
        TrainConfig {
            n_components: m,
            epochs,
            seed: 9,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn fit_improves_log_likelihood() {
        let data = two_cluster_data(600, 3);
        let model = fit(&data, &quick_config(24, 40)).unwrap();
        let init = model.initial_log_likelihood().unwrap();
        let fin = model.final_log_likelihood().unwrap();
        assert!(fin >= init, "final {fin} vs initial {init}");
        assert_relative_eq!(
            fin,
            model.log_likelihood(&data).unwrap(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn fit_is_deterministic() {
        let data = two_cluster_data(400, 5);
        let cfg = quick_config(16, 25);
        let a = fit(&data, &cfg).unwrap();
        let b = fit(&data, &cfg).unwrap();
        assert_eq!(a.components, b.components);
        assert_eq!(a.weight_logits, b.weight_logits);
        assert_eq!(a.sigma, b.sigma);
    }

    #[test]
    fn fit_seed_changes_result() {
        let data = two_cluster_data(400, 5);
        let mut cfg = quick_config(16, 5);
        let a = fit(&data, &cfg).unwrap();
        cfg.seed = 10;
        let b = fit(&data, &cfg).unwrap();
        assert_ne!(a.components, b.components);
    }

    #[test]
    fn fit_rejects_bad_data() {
        let cfg = quick_config(4, 5);
        let empty = Matrix::from_column(vec![]);
        assert!(matches!(
            fit(&empty, &cfg),
            Err(Error::InvalidArgument(_))
        ));

        let short = Matrix::from_column(vec![1.0, 2.0, 3.0]);
        let err = fit(&short, &cfg).unwrap_err();
        assert!(err.to_string().contains("fewer than 4 components"));

        let bad = Matrix::from_column(vec![1.0, 2.0, f64::INFINITY, 4.0, 5.0]);
        let err = fit(&bad, &cfg).unwrap_err();
        assert!(err.to_string().contains("row 2"), "got: {err}");

        let flat = Matrix::from_column(vec![7.5; 50]);
        let err = fit(&flat, &cfg).unwrap_err();
        assert!(err.to_string().contains("zero variance"), "got: {err}");
    }

    #[test]
    fn fit_weights_stay_on_simplex() {
        let data = two_cluster_data(300, 8);
        let model = fit(&data, &quick_config(10, 30)).unwrap();
        let w = model.weights();
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        assert!(w.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn kmeans_like_init_spreads_components() {
        let data = two_cluster_data(500, 21);
        let mut cfg = quick_config(2, 1);
        cfg.init = InitStrategy::KMeansLike;
        cfg.epochs = 1;
        let model = fit(&data, &cfg).unwrap();
        // With two widely separated clusters the two seeds should land
        // in different clusters essentially always. Components are in
        // standardized coordinates, where the cluster centers sit near
        // -1 and +1.
        let a = model.component(0)[0];
        let b = model.component(1)[0];
        assert!(
            (a - b).abs() > 1.5,
            "components {a} and {b} landed in the same cluster"
        );
    }

    #[test]
    fn early_stop_truncates_training() {
        let data = two_cluster_data(300, 2);
        let mut cfg = quick_config(8, 4000);
        cfg.min_rel_improvement = 1e-3;
        let start = std::time::Instant::now();
        let model = fit(&data, &cfg).unwrap();
        assert!(model.final_log_likelihood().is_some());
        // 4000 epochs at this size would take far longer than a second.
        assert!(start.elapsed().as_secs_f64() < 10.0);
    }

    #[test]
    fn minibatch_training_works() {
        let data = two_cluster_data(1000, 13);
        let mut cfg = quick_config(12, 15);
        cfg.batch_size = BatchSize::Fixed(128);
        let model = fit(&data, &cfg).unwrap();
        assert!(model.final_log_likelihood().unwrap() >= model.initial_log_likelihood().unwrap());
    }

    #[test]
    fn gradient_of_symmetric_stationary_point_is_zero() {
        // One component at the data mean of a symmetric pair: the
        // location and weight gradients vanish by symmetry.
        let model = KdmModel::from_parts(
            1,
            vec![0.0],
            &[1.0],
            0.5,
            vec![0.0],
            vec![1.0],
            vec![],
        )
        .unwrap();
        let data = Matrix::from_column(vec![-1.0, 1.0]);
        let g = gradients(&model, &data).unwrap();
        assert_relative_eq!(g.components[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(g.weight_logits[0], 0.0, epsilon = 1e-14);
        // The bandwidth gradient is positive because the data sits far
        // outside the component spread.
        assert!(g.log_sigma > 0.0);
    }

    #[test]
    fn batch_size_serde_roundtrip() {
        for (v, s) in [
            (BatchSize::Auto, "\"auto\""),
            (BatchSize::Full, "\"full\""),
            (BatchSize::Fixed(2048), "2048"),
        ] {
            assert_eq!(serde_json::to_string(&v).unwrap(), s);
            let back: BatchSize = serde_json::from_str(s).unwrap();
            assert_eq!(back, v);
        }
        assert!(serde_json::from_str::<BatchSize>("\"half\"").is_err());
    }

    #[test]
    fn train_config_serde_fills_defaults() {
        let cfg: TrainConfig = serde_json::from_str("{\"n_components\": 32}").unwrap();
        assert_eq!(cfg.n_components, 32);
        assert_eq!(cfg.epochs, 300);
        assert_eq!(cfg.batch_size, BatchSize::Auto);
        assert_eq!(cfg.init, InitStrategy::SubsampleData);
        assert!(cfg.standardize);
    }
}
