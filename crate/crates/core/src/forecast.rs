//! Per-flow traffic forecasting with a small LSTM.
//!
//! One network per flow: 1 input, one hidden layer of LSTM cells, a dense
//! readout. Training uses min-max normalized windows of the series, Adam,
//! mean squared error and early stopping on a chronological validation
//! tail. Everything is written out by hand; the parameter vector is flat so
//! the optimizer and the gradient check treat it uniformly.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ForecastError {
    #[error("series has {got} samples, needs at least {needed}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid forecast config: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },
    #[error("non-finite value in series at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub hidden_units: usize,
    /// Past samples fed per prediction.
    pub lookback: usize,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub min_delta: f64,
    pub patience: usize,
    /// Safety cap; early stopping normally ends training well before.
    pub max_epochs: usize,
    pub train_periods: usize,
    pub samples_per_period: usize,
    /// Steps ahead for the forecast handed to the placement.
    pub horizon: usize,
    /// ReLU on the readout (otherwise identity).
    pub relu_readout: bool,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            hidden_units: 8,
            lookback: 6,
            adam: AdamConfig::default(),
            batch_size: 4,
            validation_fraction: 0.1,
            min_delta: 0.001,
            patience: 10,
            max_epochs: 1000,
            train_periods: 50,
            samples_per_period: 24,
            horizon: 6,
            relu_readout: true,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<(), ForecastError> {
        let bad = |m: &str| Err(ForecastError::InvalidConfig(m.into()));
        if self.hidden_units == 0 || self.lookback == 0 || self.batch_size == 0 || self.samples_per_period == 0 {
            return bad("hidden units, lookback, batch size and period length must be positive");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation fraction must be in (0, 1)");
        }
        if self.patience == 0 || !(self.min_delta >= 0.0) {
            return bad("patience must be >= 1 and min_delta >= 0");
        }
        if self.horizon == 0 || self.train_periods == 0 || self.max_epochs == 0 {
            return bad("horizon, train periods and max epochs must be >= 1");
        }
        let a = &self.adam;
        if !(a.lr > 0.0) || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return bad("invalid Adam parameters");
        }
        Ok(())
    }
}

/// One training example: a normalized input window and the next value.
pub type Sample = (Vec<f64>, f64);

/// Flat parameter layout for `h` hidden units, gates ordered input,
/// forget, output, candidate.
#[derive(Debug, Clone, Copy)]
struct Layout {
    h: usize,
}

impl Layout {
    fn w(&self, row: usize) -> usize {
        row
    }
    fn u(&self, row: usize, col: usize) -> usize {
        4 * self.h + row * self.h + col
    }
    fn b(&self, row: usize) -> usize {
        4 * self.h + 4 * self.h * self.h + row
    }
    fn wo(&self, j: usize) -> usize {
        8 * self.h + 4 * self.h * self.h + j
    }
    fn bo(&self) -> usize {
        9 * self.h + 4 * self.h * self.h
    }
    fn len(&self) -> usize {
        self.bo() + 1
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Activations of one time step, kept for backpropagation.
struct Step {
    x: f64,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Gate activations, `4h` long.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

struct Trace {
    steps: Vec<Step>,
    h: Vec<f64>,
    pre: f64,
}

/// Network weights plus the normalization fitted on the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub config: ForecastConfig,
    pub params: Vec<f64>,
    pub norm_min: f64,
    pub norm_max: f64,
}

impl LstmModel {
    /// Fresh model: weights uniform in `(-0.5, 0.5) / sqrt(fan_in)`, gate
    /// biases zero, readout bias in the middle of the normalized range.
    pub fn init(config: ForecastConfig, seed: u64) -> Self {
        let lay = Layout { h: config.hidden_units };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; lay.len()];
        let scale_h = 1.0 / (lay.h as f64).sqrt();
        for r in 0..4 * lay.h {
            params[lay.w(r)] = rng.gen_range(-0.5..0.5);
            for c in 0..lay.h {
                params[lay.u(r, c)] = rng.gen_range(-0.5..0.5) * scale_h;
            }
        }
        for j in 0..lay.h {
            params[lay.wo(j)] = rng.gen_range(-0.5..0.5) * scale_h;
        }
        params[lay.bo()] = if config.relu_readout { 0.5 } else { 0.0 };
        Self { config, params, norm_min: 0.0, norm_max: 1.0 }
    }

    fn layout(&self) -> Layout {
        Layout { h: self.config.hidden_units }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.norm_min) / (self.norm_max - self.norm_min)
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        self.norm_min + y * (self.norm_max - self.norm_min)
    }

    fn forward(&self, params: &[f64], seq: &[f64]) -> Trace {
        let lay = self.layout();
        let h_n = lay.h;
        let mut h = vec![0.0; h_n];
        let mut c = vec![0.0; h_n];
        let mut steps = Vec::with_capacity(seq.len());
        for &x in seq {
            let mut gates = vec![0.0; 4 * h_n];
            for (r, g) in gates.iter_mut().enumerate() {
                let mut z = params[lay.w(r)] * x + params[lay.b(r)];
                for (k, hk) in h.iter().enumerate() {
                    z += params[lay.u(r, k)] * hk;
                }
                *g = if r < 3 * h_n { sigmoid(z) } else { z.tanh() };
            }
            let mut c_new = vec![0.0; h_n];
            let mut tanh_c = vec![0.0; h_n];
            let mut h_new = vec![0.0; h_n];
            for j in 0..h_n {
                let (i, f, o, g) = (gates[j], gates[h_n + j], gates[2 * h_n + j], gates[3 * h_n + j]);
                c_new[j] = f * c[j] + i * g;
                tanh_c[j] = c_new[j].tanh();
                h_new[j] = o * tanh_c[j];
            }
            steps.push(Step { x, h_prev: std::mem::replace(&mut h, h_new), c_prev: std::mem::replace(&mut c, c_new), gates, tanh_c });
        }
        let pre = params[lay.bo()] + (0..h_n).map(|j| params[lay.wo(j)] * h[j]).sum::<f64>();
        Trace { steps, h, pre }
    }

    fn readout(&self, pre: f64) -> f64 {
        if self.config.relu_readout {
            pre.max(0.0)
        } else {
            pre
        }
    }

    /// Normalized one-step prediction for a normalized window.
    pub fn predict_normalized(&self, window: &[f64]) -> f64 {
        self.readout(self.forward(&self.params, window).pre)
    }

    fn loss_with(&self, params: &[f64], batch: &[Sample]) -> f64 {
        let sum: f64 = batch
            .iter()
            .map(|(x, t)| {
                let y = self.readout(self.forward(params, x).pre);
                (y - t).powi(2)
            })
            .sum();
        sum / batch.len() as f64
    }

    /// Mean squared error over `batch` (normalized units).
    pub fn loss(&self, batch: &[Sample]) -> f64 {
        self.loss_with(&self.params, batch)
    }

    /// Loss and its gradient by backpropagation through time.
    pub fn loss_and_gradient(&self, batch: &[Sample]) -> (f64, Vec<f64>) {
        let lay = self.layout();
        let h_n = lay.h;
        let p = &self.params;
        let mut grad = vec![0.0; lay.len()];
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for (x, t) in batch {
            let tr = self.forward(p, x);
            let y = self.readout(tr.pre);
            loss += (y - t).powi(2) * scale;
            let mut dy = 2.0 * (y - t) * scale;
            if self.config.relu_readout && tr.pre <= 0.0 {
                dy = 0.0;
            }
            grad[lay.bo()] += dy;
            let mut dh: Vec<f64> = (0..h_n).map(|j| dy * p[lay.wo(j)]).collect();
            for j in 0..h_n {
                grad[lay.wo(j)] += dy * tr.h[j];
            }
            let mut dc = vec![0.0; h_n];
            let mut dz = vec![0.0; 4 * h_n];
            for st in tr.steps.iter().rev() {
                for j in 0..h_n {
                    let (i, f, o, g) = (st.gates[j], st.gates[h_n + j], st.gates[2 * h_n + j], st.gates[3 * h_n + j]);
                    let tc = st.tanh_c[j];
                    let d_o = dh[j] * tc;
                    let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
                    dz[j] = dcj * g * i * (1.0 - i);
                    dz[h_n + j] = dcj * st.c_prev[j] * f * (1.0 - f);
                    dz[2 * h_n + j] = d_o * o * (1.0 - o);
                    dz[3 * h_n + j] = dcj * i * (1.0 - g * g);
                    dc[j] = dcj * f;
                }
                let mut dh_prev = vec![0.0; h_n];
                for (r, &d) in dz.iter().enumerate() {
                    grad[lay.w(r)] += d * st.x;
                    grad[lay.b(r)] += d;
                    for k in 0..h_n {
                        grad[lay.u(r, k)] += d * st.h_prev[k];
                        dh_prev[k] += d * p[lay.u(r, k)];
                    }
                }
                dh = dh_prev;
            }
        }
        (loss, grad)
    }

    /// Raw-scale prediction `h` steps past the end of `history`, feeding
    /// predictions back in for the intermediate steps. Clamped at zero.
    pub fn predict_horizon(&self, history: &[f64], h: usize) -> f64 {
        assert!(!history.is_empty() && h >= 1, "prediction needs history and h >= 1");
        let look = self.config.lookback;
        let mut window: Vec<f64> = history[history.len().saturating_sub(look)..].iter().map(|&x| self.normalize(x)).collect();
        let mut y = 0.0;
        for _ in 0..h {
            y = self.predict_normalized(&window);
            window.push(y);
            if window.len() > look {
                window.remove(0);
            }
        }
        self.denormalize(y).max(0.0)
    }

    pub fn save_json(&self, path: &Path) -> Result<(), ForecastError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self, ForecastError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Largest relative difference between the analytic gradient and central
/// finite differences with the given step, over all parameters.
/// Differences are taken relative to `max(|analytic|, |numeric|, 1e-6)`, so
/// parameters with vanishing gradient are compared in absolute terms.
pub fn gradient_check(model: &LstmModel, batch: &[Sample], step: f64) -> f64 {
    let (_, analytic) = model.loss_and_gradient(batch);
    let mut params = model.params.clone();
    let mut worst: f64 = 0.0;
    for k in 0..params.len() {
        let orig = params[k];
        params[k] = orig + step;
        let up = model.loss_with(&params, batch);
        params[k] = orig - step;
        let down = model.loss_with(&params, batch);
        params[k] = orig;
        let numeric = (up - down) / (2.0 * step);
        let denom = analytic[k].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    worst
}

struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(cfg: AdamConfig, n: usize) -> Self {
        Self { cfg, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * grad[k];
            self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * grad[k] * grad[k];
            params[k] -= c.lr * (self.m[k] / bc1) / ((self.v[k] / bc2).sqrt() + c.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Epoch (1-based) with the lowest validation loss.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub final_val_loss: f64,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
}

/// Sliding windows of `lookback` inputs and the following target.
pub fn windows(series: &[f64], lookback: usize) -> Vec<Sample> {
    if series.len() <= lookback {
        return Vec::new();
    }
    (0..series.len() - lookback).map(|k| (series[k..k + lookback].to_vec(), series[k + lookback])).collect()
}

/// Trains a model on the first `train_periods` periods of `series`; the
/// series must extend at least one period beyond them.
pub fn train(series: &[f64], cfg: &ForecastConfig, seed: u64) -> Result<(LstmModel, TrainReport), ForecastError> {
    cfg.validate()?;
    let spp = cfg.samples_per_period;
    let needed = (cfg.train_periods + 1) * spp;
    if series.len() < needed {
        return Err(ForecastError::TooShort { needed, got: series.len() });
    }
    if let Some(i) = series.iter().position(|x| !x.is_finite()) {
        return Err(ForecastError::NonFinite(i));
    }
    let data = &series[..cfg.train_periods * spp];
    if data.len() < cfg.lookback + 2 {
        return Err(ForecastError::TooShort { needed: cfg.lookback + 2, got: data.len() });
    }
    let mut model = LstmModel::init(*cfg, seed);
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    model.norm_min = lo;
    model.norm_max = if hi > lo { hi } else { lo + 1.0 };
    let normalized: Vec<f64> = data.iter().map(|&x| model.normalize(x)).collect();
    let samples = windows(&normalized, cfg.lookback);
    let n_val = ((samples.len() as f64 * cfg.validation_fraction).round() as usize).clamp(1, samples.len() - 1);
    let (train_set, val_set) = samples.split_at(samples.len() - n_val);

    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(seed, &[1]));
    let mut adam = Adam::new(cfg.adam, model.params.len());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let initial_train_loss = model.loss(train_set);
    let mut best = f64::INFINITY;
    let mut best_epoch = 0;
    let mut wait = 0;
    let mut epochs_run = 0;
    let mut val_loss = f64::NAN;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Sample> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let (loss, grad) = model.loss_and_gradient(&batch);
            if !loss.is_finite() {
                return Err(ForecastError::Diverged { epoch });
            }
            adam.step(&mut model.params, &grad);
        }
        epochs_run = epoch;
        val_loss = model.loss(val_set);
        if !val_loss.is_finite() {
            return Err(ForecastError::Diverged { epoch });
        }
        if val_loss < best - cfg.min_delta {
            best = val_loss;
            best_epoch = epoch;
            wait = 0;
        } else {
            wait += 1;
            if wait >= cfg.patience {
                break;
            }
        }
    }
    let report = TrainReport {
        epochs_run,
        best_epoch,
        best_val_loss: best,
        final_val_loss: val_loss,
        initial_train_loss,
        final_train_loss: model.loss(train_set),
    };
    Ok((model, report))
}

/// Trivial forecasters for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Repeat the last observed value.
    LastValue,
    /// The value one period before the target time.
    SeasonalNaive,
}

impl Baseline {
    /// Prediction `h` steps past the end of `history`.
    pub fn predict(self, history: &[f64], h: usize, samples_per_period: usize) -> f64 {
        let last = *history.last().expect("baseline needs history");
        match self {
            Baseline::LastValue => last,
            Baseline::SeasonalNaive => {
                let target = history.len() + h - 1;
                target.checked_sub(samples_per_period).and_then(|i| history.get(i)).copied().unwrap_or(last)
            }
        }
    }
}

fn rmse(errors: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = errors.fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    (sum / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub train_periods: usize,
    /// One-step RMSE over the held-out final period, normalized units.
    pub rmse: f64,
    /// Same for the last-value baseline.
    pub baseline_rmse: f64,
    pub train_seconds: f64,
}

/// For each count `n`, trains on the `n` periods right before the final
/// period of `series` and scores one-step predictions on that final
/// period.
pub fn evaluate_rmse(series: &[f64], cfg: &ForecastConfig, counts: &[usize], seed: u64) -> Result<Vec<RmseRow>, ForecastError> {
    let spp = cfg.samples_per_period;
    let max = counts.iter().copied().max().unwrap_or(0);
    let needed = (max + 1) * spp;
    if series.len() < needed || counts.contains(&0) {
        return Err(ForecastError::TooShort { needed, got: series.len() });
    }
    counts
        .iter()
        .map(|&n| {
            let slice = &series[series.len() - (n + 1) * spp..];
            let c = ForecastConfig { train_periods: n, ..*cfg };
            let started = Instant::now();
            let (model, _) = train(slice, &c, seed)?;
            let train_seconds = started.elapsed().as_secs_f64();
            let start = n * spp;
            let errs = (start..slice.len()).map(|t| {
                let pred = model.normalize(model.predict_horizon(&slice[..t], 1));
                pred - model.normalize(slice[t])
            });
            let rmse_v = rmse(errs);
            let base = (start..slice.len()).map(|t| model.normalize(slice[t - 1]) - model.normalize(slice[t]));
            Ok(RmseRow { train_periods: n, rmse: rmse_v, baseline_rmse: rmse(base), train_seconds })
        })
        .collect()
}
