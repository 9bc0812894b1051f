use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::batch::Batch;
use crate::error::ModelError;
use crate::objective::{basic_loss, LossConfig, LossVars, Mode};
use crate::params::{BlockId, ParamSet};
use crate::scalar::Scalar;

pub const DEFAULT_STENCIL_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlpConfig {
    pub joints: usize,
    pub hidden_layers: usize,
    pub width: usize,
    /// Central-difference step of the Euler-Lagrange stencil.
    pub stencil_step: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            joints: 2,
            hidden_layers: 5,
            width: 300,
            stencil_step: DEFAULT_STENCIL_STEP,
        }
    }
}

impl MlpConfig {
    pub fn inputs(&self) -> usize {
        2 * self.joints
    }

    pub fn param_count(&self) -> usize {
        let (i, w, l) = (self.inputs(), self.width, self.hidden_layers);
        (i + 1) * w + (l - 1) * (w + 1) * w + (w + 1)
    }
}

/// Euler-Lagrange operator on a black-box `L(q, q̇)` by central differences.
///
/// With `w = (q̇, q̈)` the time-derivative direction in input space,
/// `τ_i = ∂²L/∂q̇_i∂w − ∂L/∂q_i`: four evaluations for the mixed term and two
/// for the gradient, per joint. The torques are a fixed linear combination
/// of evaluations, so parameter gradients need only first-order reverse
/// mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElStencil {
    pub joints: usize,
    pub h: f64,
}

impl ElStencil {
    pub fn new(joints: usize, h: f64) -> Self {
        Self { joints, h }
    }

    pub fn evaluations(&self) -> usize {
        6 * self.joints
    }

    /// `(evaluations·N, 2J)` inputs, evaluation-major. Evaluation `6i..6i+4`
    /// are the mixed corners `(±e_{q̇_i}, ±w)`, then `±e_{q_i}`.
    pub fn points<T: Scalar>(&self, batch: &Batch<T>) -> Vec<T> {
        let (n, j) = (batch.n, self.joints);
        assert_eq!(batch.joints, j, "stencil and batch disagree on joints");
        let d = 2 * j;
        let h = T::lit(self.h);
        let mut x = Vec::with_capacity(self.evaluations() * n * d);
        for i in 0..j {
            for (si, sw) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                for s in 0..n {
                    let st = batch.state(s);
                    for k in 0..d {
                        let mut v = st[k] + T::lit(sw) * h * st[k + j];
                        if k == j + i {
                            v += T::lit(si) * h;
                        }
                        x.push(v);
                    }
                }
            }
            for sq in [1.0, -1.0] {
                for s in 0..n {
                    let st = batch.state(s);
                    for k in 0..d {
                        let mut v = st[k];
                        if k == i {
                            v += T::lit(sq) * h;
                        }
                        x.push(v);
                    }
                }
            }
        }
        x
    }

    /// `(J, evaluations)` combination matrix.
    pub fn combination<T: Scalar>(&self) -> Vec<T> {
        let evals = self.evaluations();
        let h = T::lit(self.h);
        let mixed = T::one() / (T::lit(4.0) * h * h);
        let grad = T::one() / (T::lit(2.0) * h);
        let mut comb = vec![T::zero(); self.joints * evals];
        for i in 0..self.joints {
            let row = &mut comb[i * evals..(i + 1) * evals];
            let base = 6 * i;
            row[base] = mixed;
            row[base + 1] = -mixed;
            row[base + 2] = -mixed;
            row[base + 3] = mixed;
            row[base + 4] = -grad;
            row[base + 5] = grad;
        }
        comb
    }

    /// `(N, J)` torques of a plain function of `(q, q̇)`.
    pub fn apply(&self, batch: &Batch<f64>, mut l: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        let (n, j) = (batch.n, self.joints);
        let d = 2 * j;
        let evals = self.evaluations();
        let vals: Vec<f64> = self.points(batch).chunks(d).map(&mut l).collect();
        let comb: Vec<f64> = self.combination();
        let mut tau = vec![0.0; n * j];
        for s in 0..n {
            for i in 0..j {
                tau[s * j + i] = (0..evals).map(|e| comb[i * evals + e] * vals[e * n + s]).sum();
            }
        }
        tau
    }
}

/// `(q, q̇) → L̂` with softplus hidden layers.
#[derive(Clone, Debug)]
pub struct Mlp<T> {
    pub config: MlpConfig,
    pub params: ParamSet<T>,
    layers: Vec<(BlockId, BlockId)>,
}

impl<T: Scalar> Mlp<T> {
    pub fn new(config: MlpConfig, seed: u64) -> Result<Self, ModelError> {
        if config.hidden_layers == 0 || config.width == 0 || config.joints == 0 {
            return Err(ModelError::Config("MLP dimensions must be positive".into()));
        }
        if !(config.stencil_step > 0.0) {
            return Err(ModelError::Config("stencil step must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let mut fan_in = config.inputs();
        let mut layers = Vec::new();
        for i in 0..=config.hidden_layers {
            let out = if i == config.hidden_layers { 1 } else { config.width };
            let w = params.uniform(format!("mlp.l{i}.w"), fan_in, out, fan_in, &mut rng);
            let b = params.uniform(format!("mlp.l{i}.b"), 1, out, fan_in, &mut rng);
            layers.push((w, b));
            fan_in = out;
        }
        debug_assert_eq!(params.count(), config.param_count());
        Ok(Self {
            config,
            params,
            layers,
        })
    }

    /// `(R, 2J)` inputs to `(R, 1)` outputs.
    pub fn forward(&self, t: &mut Tape<T>, leaves: &[Var], x: Var) -> Var {
        let mut h = x;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            let a = t.matmul(h, leaves[w.index()]);
            let a = t.add(a, leaves[b.index()]);
            h = if i + 1 == self.layers.len() { a } else { t.softplus(a) };
        }
        h
    }

    /// Euler-Lagrange torques by the fixed stencil of [`ElStencil`].
    pub fn torque(&self, t: &mut Tape<T>, leaves: &[Var], batch: &Batch<T>) -> Var {
        let st = ElStencil::new(batch.joints, self.config.stencil_step);
        let x = t.constant(st.points(batch), st.evaluations() * batch.n, 2 * batch.joints);
        let y = self.forward(t, leaves, x);
        let y = t.reshape(y, st.evaluations(), batch.n);
        let comb = t.constant(st.combination(), batch.joints, st.evaluations());
        let tau = t.matmul(comb, y);
        t.transpose(tau)
    }

    pub fn loss(&self, t: &mut Tape<T>, leaves: &[Var], batch: &Batch<T>, cfg: &LossConfig) -> Result<LossVars, ModelError> {
        let pred = match cfg.mode {
            Mode::Direct => {
                let x = t.constant(batch.inputs(), batch.n, 2 * batch.joints);
                self.forward(t, leaves, x)
            }
            Mode::Indirect => self.torque(t, leaves, batch),
        };
        let basic = basic_loss(t, pred, batch, cfg.mode);
        if let Some((node, op)) = t.first_non_finite() {
            return Err(ModelError::NonFinite { op, node });
        }
        Ok(LossVars {
            total: basic,
            basic,
            reconstruction: None,
            contraction: None,
            entropy: None,
            cross_entropy: None,
        })
    }
}
