//! Losses, their parameter gradients, Adam, and the training loop.
//!
//! The L2 loss is the mean squared residual over a minibatch of random
//! samples. The H²₂-type loss adds `lambda` times the mean squared mismatch
//! of 5-point Laplacians (spacing `h`) over a minibatch of grid nodes used as
//! stencil centers.

use std::io::{Read, Write};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fdgrid::{discrete_laplacian_at, GridError};
use crate::metrics::{ErrorMetrics, MetricEvaluator};
use crate::network::NetworkError;
use crate::rng::{stream_rng, Stream};
use crate::targets::sample_uniform;
use crate::{Activation, Architecture, Evaluable, Grid2D, Network, ParamVector, Point, Sample, TargetFunction};

/// Points per work unit in batch gradients. Fixed so the reduction order
/// does not depend on the thread count.
const CHUNK: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("loss needs a nonempty batch")]
    EmptyBatch,
    #[error("H2-type loss needs a nonempty batch of stencil centers")]
    EmptyCenters,
    #[error("vector length mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("checkpoint_interval must be at least 1")]
    ZeroCheckpointInterval,
    #[error("batch_size must be between 1 and samples ({samples}), got {batch_size}")]
    BadBatchSize { batch_size: usize, samples: usize },
    #[error("learning_rate must be positive and finite, got {0}")]
    BadLearningRate(f64),
    #[error("Adam betas must lie in [0, 1), got beta1={0}, beta2={1}")]
    BadBetas(f64, f64),
    #[error("Adam epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("lambda must be positive and finite for the H2-type loss, got {0}")]
    BadLambda(f64),
    #[error("loss stencil spacing: {0}")]
    Spacing(#[from] GridError),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("non-finite loss or gradient at iteration {iteration}; training aborted")]
    Diverged {
        iteration: usize,
        /// Trace up to the last finite checkpoint.
        trace: TrainingTrace,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    L2,
    H2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Laplacian penalty weight; ignored for L2.
    pub lambda: f64,
    /// Stencil spacing of the Laplacian term; its grid also supplies the
    /// stencil centers.
    pub h: f64,
}

impl LossSpec {
    pub const DEFAULT_LAMBDA: f64 = 1e-2;

    pub fn l2() -> Self {
        Self {
            kind: LossKind::L2,
            lambda: Self::DEFAULT_LAMBDA,
            h: Grid2D::DEFAULT_SPACING,
        }
    }

    pub fn h2(lambda: f64, h: f64) -> Self {
        Self {
            kind: LossKind::H2,
            lambda,
            h,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = Grid2D::from_spacing(self.h)?;
        let _ = grid;
        if self.kind == LossKind::H2 && !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(ConfigError::BadLambda(self.lambda));
        }
        Ok(())
    }

    pub fn stencil_grid(&self) -> Result<Grid2D, GridError> {
        Grid2D::from_spacing(self.h)
    }
}

/// Mean squared residual `(1/M) sum |F(x_i) - y_i|^2`.
pub fn loss_l2<M: Evaluable + ?Sized>(model: &M, batch: &[Sample]) -> Result<f64, LossError> {
    if batch.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let sum: f64 = batch
        .iter()
        .map(|s| {
            let r = model.eval(s.point) - s.value;
            r * r
        })
        .sum();
    Ok(sum / batch.len() as f64)
}

/// Mean squared mismatch of discrete Laplacians at `centers`.
pub fn laplacian_mismatch<M, T>(model: &M, target: &T, centers: &[Point], h: f64) -> Result<f64, LossError>
where
    M: Evaluable + ?Sized,
    T: Evaluable + ?Sized,
{
    if centers.is_empty() {
        return Err(LossError::EmptyCenters);
    }
    let sum: f64 = centers
        .iter()
        .map(|&x| {
            let r = discrete_laplacian_at(model, x, h) - discrete_laplacian_at(target, x, h);
            r * r
        })
        .sum();
    Ok(sum / centers.len() as f64)
}

/// `loss_l2 + lambda * laplacian_mismatch`.
pub fn loss_h2<M, T>(
    model: &M,
    batch: &[Sample],
    centers: &[Point],
    target: &T,
    spec: &LossSpec,
) -> Result<f64, LossError>
where
    M: Evaluable + ?Sized,
    T: Evaluable + ?Sized,
{
    let l2 = loss_l2(model, batch)?;
    let lap = laplacian_mismatch(model, target, centers, spec.h)?;
    Ok(l2 + spec.lambda * lap)
}

/// The loss selected by `spec`; `centers` is ignored for L2.
pub fn loss<M, T>(model: &M, batch: &[Sample], centers: &[Point], target: &T, spec: &LossSpec) -> Result<f64, LossError>
where
    M: Evaluable + ?Sized,
    T: Evaluable + ?Sized,
{
    match spec.kind {
        LossKind::L2 => loss_l2(model, batch),
        LossKind::H2 => loss_h2(model, batch, centers, target, spec),
    }
}

/// Analytic gradient of the selected loss with respect to every parameter.
///
/// Returns the loss value alongside the gradient.
pub fn loss_grad<T: Evaluable + Sync + ?Sized>(
    net: &Network,
    batch: &[Sample],
    centers: &[Point],
    target: &T,
    spec: &LossSpec,
) -> Result<(f64, ParamVector), LossError> {
    if batch.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let len = net.params().len();
    let scale = 2.0 / batch.len() as f64;
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; len];
            let mut g = vec![0.0; len];
            let mut sq = 0.0;
            for s in chunk {
                let r = net.grad_params_into(&s.point, &mut g) - s.value;
                sq += r * r;
                axpy(scale * r, &g, &mut acc);
            }
            (sq, acc)
        })
        .collect();
    let (sq, mut grad) = sum_parts(parts, len);
    let mut value = sq / batch.len() as f64;

    if spec.kind == LossKind::H2 {
        if centers.is_empty() {
            return Err(LossError::EmptyCenters);
        }
        let h = spec.h;
        let inv_h2 = 1.0 / (h * h);
        let scale = 2.0 * spec.lambda / centers.len() as f64;
        let parts: Vec<(f64, Vec<f64>)> = centers
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = vec![0.0; len];
                let mut stencil = [
                    vec![0.0; len],
                    vec![0.0; len],
                    vec![0.0; len],
                    vec![0.0; len],
                    vec![0.0; len],
                ];
                let mut sq = 0.0;
                for &[a, b] in chunk {
                    let pts = [[a + h, b], [a - h, b], [a, b + h], [a, b - h], [a, b]];
                    let mut v = [0.0; 5];
                    for k in 0..5 {
                        v[k] = net.grad_params_into(&pts[k], &mut stencil[k]);
                    }
                    let lap_f = (v[0] + v[1] + v[2] + v[3] - 4.0 * v[4]) * inv_h2;
                    let r = lap_f - discrete_laplacian_at(target, [a, b], h);
                    sq += r * r;
                    let c = scale * r * inv_h2;
                    for g in &stencil[..4] {
                        axpy(c, g, &mut acc);
                    }
                    axpy(-4.0 * c, &stencil[4], &mut acc);
                }
                (sq, acc)
            })
            .collect();
        let (sq, lap_grad) = sum_parts(parts, len);
        value += spec.lambda * (sq / centers.len() as f64);
        axpy(1.0, &lap_grad, &mut grad);
    }
    Ok((value, grad.into()))
}

fn sum_parts(parts: Vec<(f64, Vec<f64>)>, len: usize) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let mut grad = vec![0.0; len];
    for (sq, g) in parts {
        total += sq;
        axpy(1.0, &g, &mut grad);
    }
    (total, grad)
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Self {
            step: 0,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self.epsilon = epsilon;
        self
    }

    /// One update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<(), LossError> {
        let len = self.first_moment.len();
        for got in [params.len(), grad.len()] {
            if got != len {
                return Err(LossError::ShapeMismatch { expected: len, got });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..len {
            let g = grad[i];
            let m = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / c1;
            let v_hat = v / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    /// Size of the random sample pool.
    pub samples: usize,
    pub checkpoint_interval: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Supplied per run by the harness, not read from config files.
    #[serde(skip)]
    pub seed: u64,
    /// Record wall-clock seconds in the trace. Off by default so traces are
    /// a pure function of the configuration.
    pub timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            batch_size: 2048,
            samples: 50_000,
            checkpoint_interval: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            timing: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.iterations == 0 {
            return Err(ConfigError::NoIterations);
        }
        if self.checkpoint_interval == 0 {
            return Err(ConfigError::ZeroCheckpointInterval);
        }
        if self.batch_size == 0 || self.batch_size > self.samples {
            return Err(ConfigError::BadBatchSize {
                batch_size: self.batch_size,
                samples: self.samples,
            });
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ConfigError::BadLearningRate(self.learning_rate));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(ConfigError::BadBetas(self.beta1, self.beta2));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(ConfigError::BadEpsilon(self.epsilon));
        }
        Ok(())
    }
}

/// Minibatch source shared by every architecture trained with one seed.
///
/// The sample pool, the epoch permutations and the stencil centers depend
/// only on the target, the seed and the sizes, never on the network.
pub struct DataStream {
    pool: Vec<Sample>,
    order: Vec<usize>,
    cursor: usize,
    order_rng: ChaCha8Rng,
    center_rng: ChaCha8Rng,
    center_grid: Grid2D,
    batch_size: usize,
}

impl DataStream {
    pub fn new(target: &TargetFunction, cfg: &TrainConfig, center_grid: Grid2D) -> Self {
        let pool = sample_uniform(target, cfg.samples, cfg.seed);
        let mut order_rng = stream_rng(cfg.seed, Stream::BatchOrder);
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(&mut order_rng);
        Self {
            pool,
            order,
            cursor: 0,
            order_rng,
            center_rng: stream_rng(cfg.seed, Stream::StencilCenters),
            center_grid,
            batch_size: cfg.batch_size,
        }
    }

    pub fn pool(&self) -> &[Sample] {
        &self.pool
    }

    /// Next minibatch; passes over the pool without replacement and
    /// reshuffles at each epoch boundary.
    pub fn next_batch(&mut self) -> Vec<Sample> {
        let mut batch = Vec::with_capacity(self.batch_size);
        while batch.len() < self.batch_size {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.order_rng);
                self.cursor = 0;
            }
            batch.push(self.pool[self.order[self.cursor]]);
            self.cursor += 1;
        }
        batch
    }

    /// Stencil centers drawn uniformly from the grid nodes.
    pub fn next_centers(&mut self) -> Vec<Point> {
        let n = self.center_grid.node_count();
        (0..self.batch_size)
            .map(|_| self.center_grid.node_at(self.center_rng.gen_range(0..n)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    #[serde(flatten)]
    pub metrics: ErrorMetrics,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
    /// Minibatch loss before each update, one entry per iteration.
    pub batch_losses: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    iter: usize,
    l2_error: f64,
    h2_error: f64,
    zygmund_error: f64,
    seconds: f64,
}

impl TrainingTrace {
    pub fn first(&self) -> Option<&TraceRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// `iter,l2_error,h2_error,zygmund_error,seconds`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(TraceRow {
                iter: r.iteration,
                l2_error: r.metrics.l2_error,
                h2_error: r.metrics.h2_error,
                zygmund_error: r.metrics.zygmund_error,
                seconds: r.seconds,
            })?;
        }
        if self.records.is_empty() {
            w.write_record(["iter", "l2_error", "h2_error", "zygmund_error", "seconds"])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the checkpoint records back; batch losses are not part of the
    /// CSV.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, csv::Error> {
        let mut r = csv::Reader::from_reader(input);
        let mut records = Vec::new();
        for row in r.deserialize() {
            let row: TraceRow = row?;
            records.push(TraceRecord {
                iteration: row.iter,
                metrics: ErrorMetrics {
                    l2_error: row.l2_error,
                    h2_error: row.h2_error,
                    zygmund_error: row.zygmund_error,
                },
                seconds: row.seconds,
            });
        }
        Ok(Self {
            records,
            batch_losses: Vec::new(),
        })
    }

    /// `iter,loss`, one row per iteration.
    pub fn write_losses_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "loss"])?;
        for (i, l) in self.batch_losses.iter().enumerate() {
            w.write_record([(i + 1).to_string(), l.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean of `values[end - window .. end]`.
pub fn trailing_mean(values: &[f64], end: usize, window: usize) -> Option<f64> {
    if window == 0 || end > values.len() || end < window {
        return None;
    }
    Some(values[end - window..end].iter().sum::<f64>() / window as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub trace: TrainingTrace,
}

/// Trains a freshly initialized network with Adam.
///
/// Metrics are recorded before the first update, every
/// `checkpoint_interval` updates, and after the last one.
pub fn train(
    arch: Architecture,
    activation: Activation,
    target: &TargetFunction,
    loss_spec: &LossSpec,
    cfg: &TrainConfig,
    evaluator: &MetricEvaluator,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    loss_spec.validate()?;
    let mut net = Network::init(arch, activation, cfg.seed)?;
    let mut stream = DataStream::new(target, cfg, loss_spec.stencil_grid().map_err(ConfigError::from)?);
    let mut adam = AdamState::new(net.params().len(), cfg.learning_rate).with_betas(cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut trace = TrainingTrace::default();
    let started = Instant::now();
    let elapsed = |t: &Instant| if cfg.timing { t.elapsed().as_secs_f64() } else { 0.0 };

    trace.records.push(TraceRecord {
        iteration: 0,
        metrics: evaluator.evaluate(&net),
        seconds: elapsed(&started),
    });

    for it in 1..=cfg.iterations {
        let batch = stream.next_batch();
        let centers = match loss_spec.kind {
            LossKind::L2 => Vec::new(),
            LossKind::H2 => stream.next_centers(),
        };
        let (value, grad) = loss_grad(&net, &batch, &centers, target, loss_spec)?;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(TrainError::Diverged { iteration: it, trace });
        }
        trace.batch_losses.push(value);
        let mut next = net.params().clone();
        adam.step(&mut next, &grad)?;
        if next.iter().any(|p| !p.is_finite()) {
            return Err(TrainError::Diverged { iteration: it, trace });
        }
        *net.params_mut() = next;

        if it % cfg.checkpoint_interval == 0 || it == cfg.iterations {
            let metrics = evaluator.evaluate(&net);
            if ![metrics.l2_error, metrics.h2_error, metrics.zygmund_error]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(TrainError::Diverged { iteration: it, trace });
            }
            trace.records.push(TraceRecord {
                iteration: it,
                metrics,
                seconds: elapsed(&started),
            });
        }
    }
    Ok(TrainOutcome { network: net, trace })
}
