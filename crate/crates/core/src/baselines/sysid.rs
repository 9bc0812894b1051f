use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{eval_expr_batch, Tape, Var};
use crate::batch::Batch;
use crate::error::ModelError;
use crate::expr::{ExprStore, Program, StateLayout};
use crate::mechanics::{dp_lagrangian_structural, PendulumParams, JOINTS};
use crate::objective::{basic_loss, LossConfig, LossVars, Mode};
use crate::params::{BlockId, ParamSet};
use crate::scalar::Scalar;

const HIDDEN: usize = 64;
const ESTIMATES: usize = 4;

/// Constant-input network estimating `(m1, l1, m2, l2)` of the known
/// pendulum structure.
#[derive(Clone, Debug)]
pub struct SysId<T> {
    pub params: ParamSet<T>,
    pub g: f64,
    hidden: BlockId,
    out: BlockId,
    lagrangian: Program,
    torques: Vec<Program>,
}

impl<T: Scalar> SysId<T> {
    pub fn new(seed: u64, g: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let hidden = params.uniform("sysid.hidden", ESTIMATES, HIDDEN, ESTIMATES, &mut rng);
        let out = params.uniform("sysid.out", HIDDEN, ESTIMATES, HIDDEN, &mut rng);
        let mut s = ExprStore::new(StateLayout::new(JOINTS));
        let l = dp_lagrangian_structural(&mut s, 0, g);
        let torques = s
            .euler_lagrange(l)
            .expect("the structural Lagrangian has no acceleration slots")
            .into_iter()
            .map(|e| s.compile(e))
            .collect();
        Self {
            params,
            g,
            hidden,
            out,
            lagrangian: s.compile(l),
            torques,
        }
    }

    /// `(1, 4)` estimates `(m1, l1, m2, l2)`.
    pub fn estimates_var(&self, t: &mut Tape<T>, leaves: &[Var]) -> Var {
        let ones = t.constant(vec![T::one(); ESTIMATES], 1, ESTIMATES);
        let h = t.matmul(ones, leaves[self.hidden.index()]);
        let h = t.softplus(h);
        t.matmul(h, leaves[self.out.index()])
    }

    pub fn estimates(&self) -> [f64; 4] {
        let mut t = Tape::new();
        let leaves = self.params.record_constant(&mut t);
        let e = self.estimates_var(&mut t, &leaves);
        let v = t.value(e);
        [0, 1, 2, 3].map(|i| v[i].as_f64())
    }

    /// Sets the output layer so the estimates equal `p` exactly.
    pub fn set_estimates(&mut self, p: &PendulumParams) {
        let h = self.params.block_mut(self.hidden);
        h.data.iter_mut().for_each(|v| *v = T::zero());
        // softplus(0) = ln 2 for every hidden unit; route unit k to estimate k.
        let ln2 = T::lit(std::f64::consts::LN_2);
        let o = self.params.block_mut(self.out);
        o.data.iter_mut().for_each(|v| *v = T::zero());
        for (k, v) in p.estimates().iter().enumerate() {
            o.data[k * ESTIMATES + k] = T::lit(*v) / ln2;
        }
    }

    /// Structural prediction from explicit `(1, 4)` estimates.
    pub fn predict_from(&self, t: &mut Tape<T>, est: Var, batch: &Batch<T>, mode: Mode) -> Result<Var, ModelError> {
        let slots = batch.slots();
        match mode {
            Mode::Direct => Ok(eval_expr_batch(t, &self.lagrangian, &batch.states, slots, est)?),
            Mode::Indirect => {
                let cols = self
                    .torques
                    .iter()
                    .map(|p| eval_expr_batch(t, p, &batch.states, slots, est))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(t.concat_cols(&cols))
            }
        }
    }

    pub fn loss(&self, t: &mut Tape<T>, leaves: &[Var], batch: &Batch<T>, cfg: &LossConfig) -> Result<LossVars, ModelError> {
        let est = self.estimates_var(t, leaves);
        let pred = self.predict_from(t, est, batch, cfg.mode)?;
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
