//! Training losses: prediction error, autoencoder terms and the
//! complementary entropy/cross-entropy term between selection heads.

use std::str::FromStr;

use crate::autodiff::{Tape, Var};
use crate::batch::Batch;
use crate::error::ModelError;
use crate::model::{ForwardOut, LayerVars, SyreNet};
use crate::scalar::Scalar;

/// What the basic loss compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    /// Predicted Lagrangian against Lagrangian values.
    #[default]
    Direct,
    /// Euler-Lagrange torques of the prediction against measured torques.
    Indirect,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Self::Direct),
            "indirect" => Ok(Self::Indirect),
            other => Err(format!("unknown mode {other:?} (expected direct or indirect)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Direct => "direct",
            Self::Indirect => "indirect",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    /// Contractive penalty weight.
    pub lambda1: f64,
    /// Head entropy weight.
    pub lambda2: f64,
    /// Head cross-entropy weight.
    pub lambda3: f64,
    pub mode: Mode,
    /// Added inside every logarithm.
    pub entropy_floor: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1e-3,
            lambda3: 1.0,
            mode: Mode::Direct,
            entropy_floor: 1e-12,
        }
    }
}

impl LossConfig {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

/// Loss terms recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub total: Var,
    pub basic: Var,
    pub reconstruction: Option<Var>,
    pub contraction: Option<Var>,
    pub entropy: Option<Var>,
    pub cross_entropy: Option<Var>,
}

/// Loss values. `total = basic + reconstruction + λ1·contraction
/// + λ2·entropy − λ3·cross_entropy`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub basic: f64,
    pub reconstruction: f64,
    pub contraction: f64,
    pub entropy: f64,
    pub cross_entropy: f64,
}

impl LossBreakdown {
    /// Autoencoder part as weighted into the total.
    pub fn ae(&self, cfg: &LossConfig) -> f64 {
        self.reconstruction + cfg.lambda1 * self.contraction
    }

    pub fn is_finite(&self) -> bool {
        [
            self.total,
            self.basic,
            self.reconstruction,
            self.contraction,
            self.entropy,
            self.cross_entropy,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

impl LossVars {
    pub fn values<T: Scalar>(&self, t: &Tape<T>) -> LossBreakdown {
        let get = |v: Option<Var>| v.map_or(0.0, |v| t.scalar_value(v).as_f64());
        LossBreakdown {
            total: t.scalar_value(self.total).as_f64(),
            basic: t.scalar_value(self.basic).as_f64(),
            reconstruction: get(self.reconstruction),
            contraction: get(self.contraction),
            entropy: get(self.entropy),
            cross_entropy: get(self.cross_entropy),
        }
    }
}

/// Mean squared error of `pred` against constant `target` of equal shape.
pub fn mse<T: Scalar>(t: &mut Tape<T>, pred: Var, target: &[T]) -> Var {
    let (r, c) = t.shape(pred);
    assert_eq!(r * c, target.len(), "prediction/target size mismatch");
    let y = t.constant(target.to_vec(), r, c);
    let d = t.sub(pred, y);
    let sq = t.square(d);
    t.mean(sq)
}

/// Basic loss for a prediction that is a Lagrangian `(N, 1)` in direct
/// mode or torques `(N, J)` in indirect mode.
pub fn basic_loss<T: Scalar>(t: &mut Tape<T>, pred: Var, batch: &Batch<T>, mode: Mode) -> Var {
    match mode {
        Mode::Direct => mse(t, pred, &batch.lagrangian),
        Mode::Indirect => mse(t, pred, &batch.tau),
    }
}

/// Summed head entropy `Σ H(p_j)` and summed ordered-pair cross-entropy
/// `Σ_{j'≠j} H(p_j', p_j)` over all layers, with `p_j = φ_j·P_j`.
pub fn complementary_terms<T: Scalar>(
    t: &mut Tape<T>,
    layers: &[LayerVars],
    floor: f64,
) -> Result<(Var, Var), ModelError> {
    let mut ent = t.scalar_constant(T::zero());
    let mut xent = t.scalar_constant(T::zero());
    for l in layers {
        let gated: Vec<Var> = l.heads.iter().map(|h| t.mul(h.p, h.phi)).collect();
        let p = t.concat_rows(&gated);
        let shifted = t.offset(p, T::lit(floor));
        let lg = t.log(shifted)?;
        // Σ_j Σ_b p_jb log p_jb
        let self_term = t.dot(p, lg);
        // Σ_{j,j'} Σ_b p_j'b log p_jb
        let ps = t.sum_rows(p);
        let ls = t.sum_rows(lg);
        let all_pairs = t.dot(ps, ls);
        let e = t.neg(self_term);
        let cross = t.sub(self_term, all_pairs);
        ent = t.add(ent, e);
        xent = t.add(xent, cross);
    }
    Ok((ent, xent))
}

/// Total loss of a forward pass.
pub fn syrenet_loss<T: Scalar>(
    t: &mut Tape<T>,
    out: &ForwardOut,
    batch: &Batch<T>,
    cfg: &LossConfig,
) -> Result<LossVars, ModelError> {
    let pred = match cfg.mode {
        Mode::Direct => out.fhat,
        Mode::Indirect => out
            .tau
            .ok_or_else(|| ModelError::Config("indirect loss needs a torque forward pass".into()))?,
    };
    let basic = basic_loss(t, pred, batch, cfg.mode);
    let (ent, xent) = complementary_terms(t, &out.layers, cfg.entropy_floor)?;
    let c = t.scale(out.contraction, T::lit(cfg.lambda1));
    let e = t.scale(ent, T::lit(cfg.lambda2));
    let x = t.scale(xent, T::lit(cfg.lambda3));
    let s = t.add(basic, out.recon);
    let s = t.add(s, c);
    let s = t.add(s, e);
    let total = t.sub(s, x);
    Ok(LossVars {
        total,
        basic,
        reconstruction: Some(out.recon),
        contraction: Some(out.contraction),
        entropy: Some(ent),
        cross_entropy: Some(xent),
    })
}

impl<T: Scalar> SyreNet<T> {
    /// Forward pass and total loss on one recording.
    pub fn loss(
        &self,
        t: &mut Tape<T>,
        leaves: &[Var],
        batch: &Batch<T>,
        cfg: &LossConfig,
    ) -> Result<LossVars, ModelError> {
        let out = self.forward(t, leaves, batch, cfg.mode == Mode::Indirect)?;
        let l = syrenet_loss(t, &out, batch, cfg)?;
        match t.first_non_finite() {
            Some((node, op)) => Err(ModelError::NonFinite { op, node }),
            None => Ok(l),
        }
    }
}
