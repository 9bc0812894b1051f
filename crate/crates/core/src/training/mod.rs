//! Optimization, best-state tracking, evaluation and seed sweeps.

mod adam;
mod check;
mod metrics;
mod schedule;
mod sweep;

pub use adam::{Adam, AdamConfig};
pub use check::{gradcheck_model, sample_coords, ModelCheck};
pub use metrics::{write_metrics, METRICS_HEADER};
pub use schedule::LrSchedule;
pub use sweep::{run_sweep, summarize, write_summary, GroupStats, SeedResult};

use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::baselines::{Mlp, SysId};
use crate::batch::Batch;
use crate::error::ModelError;
use crate::mechanics::Dataset;
use crate::model::SyreNet;
use crate::objective::{mse, LossBreakdown, LossConfig, LossVars, Mode};
use crate::params::ParamSet;
use crate::scalar::Scalar;

/// Random stream used for epoch shuffling; parameter init uses stream 0.
pub const SHUFFLE_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    SyreNets,
    Nn,
    SysId,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "syrenets" => Ok(Self::SyreNets),
            "nn" => Ok(Self::Nn),
            "sysid" => Ok(Self::SysId),
            other => Err(format!("unknown method {other:?} (expected syrenets, nn or sysid)")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SyreNets => "syrenets",
            Self::Nn => "nn",
            Self::SysId => "sysid",
        })
    }
}

/// Any trainable model.
#[derive(Clone, Debug)]
pub enum AnyModel<T> {
    SyreNets(SyreNet<T>),
    Nn(Mlp<T>),
    SysId(SysId<T>),
}

impl<T: Scalar> AnyModel<T> {
    pub fn method(&self) -> Method {
        match self {
            Self::SyreNets(_) => Method::SyreNets,
            Self::Nn(_) => Method::Nn,
            Self::SysId(_) => Method::SysId,
        }
    }

    pub fn params(&self) -> &ParamSet<T> {
        match self {
            Self::SyreNets(m) => &m.params,
            Self::Nn(m) => &m.params,
            Self::SysId(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        match self {
            Self::SyreNets(m) => &mut m.params,
            Self::Nn(m) => &mut m.params,
            Self::SysId(m) => &mut m.params,
        }
    }

    pub fn loss(
        &self,
        t: &mut Tape<T>,
        leaves: &[Var],
        batch: &Batch<T>,
        cfg: &LossConfig,
    ) -> Result<LossVars, ModelError> {
        match self {
            Self::SyreNets(m) => m.loss(t, leaves, batch, cfg),
            Self::Nn(m) => m.loss(t, leaves, batch, cfg),
            Self::SysId(m) => m.loss(t, leaves, batch, cfg),
        }
    }

    /// Prediction compared by the basic loss: `(N, 1)` Lagrangian values in
    /// direct mode, `(N, J)` torques in indirect mode.
    pub fn predict(&self, t: &mut Tape<T>, leaves: &[Var], batch: &Batch<T>, mode: Mode) -> Result<Var, ModelError> {
        let torque = mode == Mode::Indirect;
        match self {
            Self::SyreNets(m) => {
                let out = m.forward(t, leaves, batch, torque)?;
                Ok(if torque { out.tau.expect("requested") } else { out.fhat })
            }
            Self::Nn(m) => Ok(if torque {
                m.torque(t, leaves, batch)
            } else {
                let x = t.constant(batch.inputs(), batch.n, 2 * batch.joints);
                m.forward(t, leaves, x)
            }),
            Self::SysId(m) => {
                let est = m.estimates_var(t, leaves);
                m.predict_from(t, est, batch, mode)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub adam: AdamConfig,
    pub decay_factor: f64,
    /// Non-improving steps before the learning rate is divided.
    pub patience: usize,
    pub lr_floor: f64,
    pub constant_lr: bool,
    pub max_steps: Option<u64>,
    pub max_seconds: Option<f64>,
    pub seed: u64,
    /// When false the metrics log records `elapsed_s = 0`, making logs
    /// byte-identical across reruns.
    pub record_time: bool,
    /// Consecutive non-finite steps tolerated before giving up.
    pub max_nonfinite: usize,
}

impl TrainConfig {
    pub fn for_method(method: Method) -> Self {
        let base = Self {
            batch_size: 32,
            lr: 1e-3,
            adam: AdamConfig::default(),
            decay_factor: 10.0,
            patience: 1000,
            lr_floor: 1e-5,
            constant_lr: false,
            max_steps: None,
            max_seconds: None,
            seed: 0,
            record_time: false,
            max_nonfinite: 50,
        };
        match method {
            Method::SyreNets => base,
            Method::Nn => Self {
                patience: 2000,
                ..base
            },
            Method::SysId => Self {
                constant_lr: true,
                ..base
            },
        }
    }

    fn schedule(&self) -> LrSchedule {
        if self.constant_lr {
            LrSchedule::constant(self.lr)
        } else {
            LrSchedule::new(self.lr, self.decay_factor, self.patience, self.lr_floor)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLog {
    pub step: u64,
    pub elapsed_s: f64,
    /// Learning rate used by this step.
    pub lr: f64,
    pub loss: LossBreakdown,
    /// `reconstruction + λ1·contraction`.
    pub ae: f64,
    /// Best running epoch-average total so far.
    pub best_total: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub log: Vec<StepLog>,
    /// Loss on the first mini-batch at initialization.
    pub initial: LossBreakdown,
    pub best_total: f64,
    /// Step whose loss was computed with the restored parameters.
    pub best_step: Option<u64>,
    pub events: Vec<String>,
    /// Training stopped on repeated non-finite losses.
    pub diverged: bool,
}

/// Whether training continues after a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

fn batch_of<T: Scalar>(ds: &Dataset, idx: &[usize]) -> Batch<T> {
    let samples: Vec<_> = idx.iter().map(|&i| ds.samples[i]).collect();
    Batch::from_samples(&samples)
}

/// Trains `model` in place and restores the best parameters seen.
///
/// `observe` is called after every step and may stop training early.
pub fn train<T: Scalar>(
    model: &mut AnyModel<T>,
    data: &Dataset,
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    mut observe: impl FnMut(&StepLog) -> Control,
) -> Result<TrainReport, ModelError> {
    let bs = cfg.batch_size;
    if data.len() < bs || bs < 2 {
        return Err(ModelError::Config(format!(
            "need at least one batch of {bs} (≥ 2) samples, dataset has {}",
            data.len()
        )));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let mut pos = 0;
    let mut adam = Adam::new(model.params(), cfg.adam);
    let mut sched = cfg.schedule();
    let mut report = TrainReport {
        best_total: f64::INFINITY,
        ..Default::default()
    };
    let mut best_params: Option<ParamSet<T>> = None;
    let (mut epoch_sum, mut epoch_count) = (0.0, 0usize);
    let mut nonfinite = 0usize;
    let mut step = 0u64;

    if cfg.max_steps == Some(0) {
        let b = batch_of(data, &order[..bs]);
        let mut t = Tape::new();
        let leaves = model.params().record_constant(&mut t);
        report.initial = model.loss(&mut t, &leaves, &b, loss_cfg)?.values(&t);
        return Ok(report);
    }

    loop {
        if cfg.max_steps.is_some_and(|m| step >= m)
            || cfg.max_seconds.is_some_and(|s| start.elapsed().as_secs_f64() >= s)
        {
            break;
        }
        if pos + bs > order.len() {
            order.shuffle(&mut rng);
            pos = 0;
            epoch_sum = 0.0;
            epoch_count = 0;
        }
        let b = batch_of(data, &order[pos..pos + bs]);
        pos += bs;
        let lr = sched.lr;
        let mut t = Tape::new();
        let leaves = model.params().record(&mut t);
        let outcome = match model.loss(&mut t, &leaves, &b, loss_cfg) {
            Ok(lv) => {
                let vals = lv.values(&t);
                if vals.is_finite() {
                    Some((lv, vals))
                } else {
                    None
                }
            }
            Err(ModelError::NonFinite { .. }) | Err(ModelError::Domain(_)) => None,
            Err(e) => return Err(e),
        };
        step += 1;
        let mut improved = false;
        let vals = match outcome {
            Some((lv, vals)) => {
                nonfinite = 0;
                if step == 1 {
                    report.initial = vals;
                }
                epoch_sum += vals.total;
                epoch_count += 1;
                let avg = epoch_sum / epoch_count as f64;
                if avg < report.best_total {
                    improved = true;
                    report.best_total = avg;
                    report.best_step = Some(step);
                    best_params = Some(model.params().clone());
                }
                let grads = t.backward(lv.total);
                let grads = model.params().collect_grads(&grads, &leaves);
                adam.update(model.params_mut(), &grads, lr);
                vals
            }
            None => {
                nonfinite += 1;
                report.events.push(format!("step {step}: non-finite loss, update skipped"));
                LossBreakdown {
                    total: f64::NAN,
                    basic: f64::NAN,
                    reconstruction: f64::NAN,
                    contraction: f64::NAN,
                    entropy: f64::NAN,
                    cross_entropy: f64::NAN,
                }
            }
        };
        sched.observe(improved);
        let entry = StepLog {
            step,
            elapsed_s: if cfg.record_time {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
            lr,
            loss: vals,
            ae: vals.ae(loss_cfg),
            best_total: report.best_total,
        };
        report.log.push(entry);
        if nonfinite >= cfg.max_nonfinite {
            report.diverged = true;
            report
                .events
                .push(format!("step {step}: {nonfinite} consecutive non-finite losses, stopping"));
            break;
        }
        if observe(&entry) == Control::Stop {
            break;
        }
    }
    if let Some(p) = best_params {
        *model.params_mut() = p;
    }
    Ok(report)
}

/// Contiguous evaluation chunks of about `size`; a trailing single sample
/// is merged into the previous chunk (channel similarity needs ≥ 2).
pub fn chunks(n: usize, size: usize) -> Vec<std::ops::Range<usize>> {
    let size = size.max(2);
    let mut out: Vec<std::ops::Range<usize>> = (0..n).step_by(size).map(|s| s..(s + size).min(n)).collect();
    if out.len() > 1 && out.last().is_some_and(|r| r.len() < 2) {
        let last = out.pop().expect("nonempty");
        out.last_mut().expect("nonempty").end = last.end;
    }
    out
}

/// Mean squared error of the model's prediction over `data`, evaluated in
/// chunks of `batch_size`.
pub fn evaluate<T: Scalar>(model: &AnyModel<T>, data: &Dataset, mode: Mode, batch_size: usize) -> Result<f64, ModelError> {
    if data.is_empty() {
        return Err(ModelError::Shape("empty evaluation set".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in chunks(data.len(), batch_size) {
        let b: Batch<T> = Batch::from_samples(&data.samples[r]);
        let mut t = Tape::new();
        let leaves = model.params().record_constant(&mut t);
        let pred = model.predict(&mut t, &leaves, &b, mode)?;
        let target = match mode {
            Mode::Direct => &b.lagrangian,
            Mode::Indirect => &b.tau,
        };
        let m = mse(&mut t, pred, target);
        let k = target.len();
        sum += t.scalar_value(m).as_f64() * k as f64;
        count += k;
    }
    Ok(sum / count as f64)
}
