//! Stacked symbolic layers: candidate enumeration, a shared contractive
//! autoencoder, channel similarity, per-layer specialization and gated
//! selection heads.

mod candidates;
mod extract;
mod jet;
mod symbolic;

pub use candidates::{candidate_count, candidate_exprs, candidate_jet, pair_indices};
pub use extract::ExtractMode;
pub use jet::{Derivs, Jet, JetShape};
pub use symbolic::SymbolicModel;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::batch::Batch;
use crate::error::ModelError;
use crate::params::{BlockId, ParamSet};
use crate::scalar::Scalar;

pub const LAYER_NORM_EPS: f64 = 1e-5;
pub const COSINE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArchConfig {
    pub joints: usize,
    pub layers: usize,
    pub heads: usize,
    pub latent: usize,
    pub sel_hidden: usize,
    pub ae_hidden: [usize; 2],
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            joints: 2,
            layers: 3,
            heads: 12,
            latent: 16,
            sel_hidden: 64,
            ae_hidden: [128, 128],
        }
    }
}

impl ArchConfig {
    /// Inputs of every layer: `(q, q̇)` plus one slot per head.
    pub fn inputs(&self) -> usize {
        2 * self.joints + self.heads
    }

    pub fn candidates(&self) -> usize {
        candidate_count(self.inputs())
    }

    /// Coefficient slot of `(layer, head, candidate)`.
    pub fn coeff_slot(&self, layer: usize, head: usize, cand: usize) -> usize {
        (layer * self.heads + head) * self.candidates() + cand
    }

    pub fn coeff_slots(&self) -> usize {
        self.layers * self.heads * self.candidates()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("joints", self.joints),
            ("layers", self.layers),
            ("heads", self.heads),
            ("latent", self.latent),
            ("sel_hidden", self.sel_hidden),
            ("ae_hidden[0]", self.ae_hidden[0]),
            ("ae_hidden[1]", self.ae_hidden[1]),
        ];
        match dims.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(ModelError::Config(format!("{name} must be positive"))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Dense {
    w: BlockId,
    b: BlockId,
}

#[derive(Clone, Copy, Debug)]
struct HeadIds {
    focus: BlockId,
    sel_hidden: BlockId,
    sel_out: BlockId,
    scale: BlockId,
    gate_p: BlockId,
    gate_prev: BlockId,
}

#[derive(Clone, Debug)]
struct LayerIds {
    spec: BlockId,
    heads: Vec<HeadIds>,
}

/// Tape values of one selection head.
#[derive(Clone, Copy, Debug)]
pub struct HeadVars {
    /// `(1, d_o)` selection distribution.
    pub p: Var,
    /// `(1, d_o)` scale vector.
    pub s: Var,
    /// `(1, 1)` gate.
    pub phi: Var,
    /// `(1, d_o)` coefficients `φ·S∘P`.
    pub coeff: Var,
}

/// Tape values of one layer.
#[derive(Clone, Debug)]
pub struct LayerVars {
    /// `(N, d_o)` candidate values.
    pub v: Var,
    pub v_norm: Var,
    /// `(N, d)` latents.
    pub z: Var,
    /// `(d, d)` channel similarity.
    pub sim: Var,
    pub spec: Var,
    pub heads: Vec<HeadVars>,
    /// `(1, d_o)` product of the head distributions.
    pub joint: Var,
}

#[derive(Clone, Debug)]
pub struct ForwardOut {
    /// `(N, 1)` predicted Lagrangian.
    pub fhat: Var,
    /// `(N, J)` torques of the frozen-coefficient prediction.
    pub tau: Option<Var>,
    /// Summed over layer invocations.
    pub recon: Var,
    pub contraction: Var,
    pub layers: Vec<LayerVars>,
}

#[derive(Clone, Debug)]
pub struct SyreNet<T> {
    pub config: ArchConfig,
    pub params: ParamSet<T>,
    enc: [Dense; 3],
    dec: [Dense; 3],
    layers: Vec<LayerIds>,
}

impl<T: Scalar> SyreNet<T> {
    /// Seeded initialization; every block is `U(±1/√fan_in)`.
    pub fn new(config: ArchConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        let d_o = config.candidates();
        let [h1, h2] = config.ae_hidden;
        let d = config.latent;
        let mut dense = |p: &mut ParamSet<T>, name: &str, fan_in: usize, out: usize| Dense {
            w: p.uniform(format!("{name}.w"), fan_in, out, fan_in, &mut rng),
            b: p.uniform(format!("{name}.b"), 1, out, fan_in, &mut rng),
        };
        let enc = [
            dense(&mut p, "ae.enc1", d_o, h1),
            dense(&mut p, "ae.enc2", h1, h2),
            dense(&mut p, "ae.enc3", h2, d),
        ];
        let dec = [
            dense(&mut p, "ae.dec1", d, h2),
            dense(&mut p, "ae.dec2", h2, h1),
            dense(&mut p, "ae.dec3", h1, d_o),
        ];
        let r = config.sel_hidden;
        let layers = (0..config.layers)
            .map(|i| LayerIds {
                spec: p.uniform(format!("layer{i}.spec"), d, d, d, &mut rng),
                heads: (0..config.heads)
                    .map(|j| {
                        let name = |s: &str| format!("layer{i}.head{j}.{s}");
                        HeadIds {
                            focus: p.uniform(name("focus"), d, 1, d, &mut rng),
                            sel_hidden: p.uniform(name("sel_hidden"), d, r, d, &mut rng),
                            sel_out: p.uniform(name("sel_out"), r, d_o, r, &mut rng),
                            scale: p.uniform(name("scale"), d_o, d_o, d_o, &mut rng),
                            gate_p: p.uniform(name("gate_p"), d_o, 1, d_o, &mut rng),
                            gate_prev: p.uniform(name("gate_prev"), d_o, 1, d_o, &mut rng),
                        }
                    })
                    .collect(),
            })
            .collect();
        Ok(Self {
            config,
            params: p,
            enc,
            dec,
            layers,
        })
    }

    /// Replaces the parameters, checking block names and shapes.
    pub fn set_params(&mut self, params: ParamSet<T>) -> Result<(), ModelError> {
        let same = params.len() == self.params.len()
            && params.blocks().iter().zip(self.params.blocks()).all(|(a, b)| {
                a.name == b.name && a.rows == b.rows && a.cols == b.cols
            });
        if !same {
            return Err(ModelError::Shape("parameter blocks do not match the architecture".into()));
        }
        self.params = params;
        Ok(())
    }

    fn dense(&self, t: &mut Tape<T>, leaves: &[Var], x: Var, l: Dense) -> Var {
        let a = t.matmul(x, leaves[l.w.index()]);
        t.add(a, leaves[l.b.index()])
    }

    /// Encoder pre-activations and latents.
    fn encode(&self, t: &mut Tape<T>, leaves: &[Var], x: Var) -> (Var, Var, Var) {
        let a1 = self.dense(t, leaves, x, self.enc[0]);
        let h1 = t.softplus(a1);
        let a2 = self.dense(t, leaves, h1, self.enc[1]);
        let h2 = t.softplus(a2);
        let z = self.dense(t, leaves, h2, self.enc[2]);
        (a1, a2, z)
    }

    fn decode(&self, t: &mut Tape<T>, leaves: &[Var], z: Var) -> Var {
        let a = self.dense(t, leaves, z, self.dec[0]);
        let h = t.softplus(a);
        let a = self.dense(t, leaves, h, self.dec[1]);
        let h = t.softplus(a);
        self.dense(t, leaves, h, self.dec[2])
    }

    /// `(1/N) Σ_s ‖∂z/∂x(s)‖_F²`, exact.
    ///
    /// Per sample the Jacobian is `A·W1ᵀ` with
    /// `A = W3ᵀ diag(σ(a2)) W2ᵀ diag(σ(a1))`, so its squared norm is
    /// `Σ (A·G) ∘ A` with `G = W1ᵀW1`.
    fn contraction(&self, t: &mut Tape<T>, leaves: &[Var], a1: Var, a2: Var) -> Var {
        let n = t.shape(a1).0;
        let d = self.config.latent;
        let w1 = leaves[self.enc[0].w.index()];
        let w2 = leaves[self.enc[1].w.index()];
        let w3 = leaves[self.enc[2].w.index()];
        let s1 = t.sigmoid(a1);
        let s2 = t.sigmoid(a2);
        let w3t = t.transpose(w3);
        let a = t.group_scale(w3t, s2, d);
        let a = t.matmul_nt(a, w2);
        let a = t.group_scale(a, s1, d);
        let g = t.matmul_tn(w1, w1);
        let ag = t.matmul(a, g);
        let total = t.dot(ag, a);
        t.scale(total, T::one() / T::from_usize(n).expect("batch size"))
    }

    /// Exact contractive penalty of the encoder on `x`, as a value.
    pub fn contractive_penalty(&self, x: &[T], n: usize) -> T {
        let mut t = Tape::new();
        let leaves = self.params.record_constant(&mut t);
        let x = t.constant(x.to_vec(), n, self.config.candidates());
        let (a1, a2, _) = self.encode(&mut t, &leaves, x);
        let c = self.contraction(&mut t, &leaves, a1, a2);
        t.scalar_value(c)
    }

    /// Latents of the shared encoder, as values.
    pub fn encode_values(&self, x: &[T], n: usize) -> Vec<T> {
        let mut t = Tape::new();
        let leaves = self.params.record_constant(&mut t);
        let x = t.constant(x.to_vec(), n, self.config.candidates());
        let (_, _, z) = self.encode(&mut t, &leaves, x);
        t.value(z).to_vec()
    }

    /// Channel cosine similarity of `(N, d)` latents.
    pub fn similarity(t: &mut Tape<T>, z: Var) -> Var {
        let sq = t.square(z);
        let col = t.sum_rows(sq);
        let floor = T::lit(COSINE_FLOOR);
        let col = t.clamp_min(col, floor * floor);
        let norm = t.sqrt(col).expect("clamped to a positive floor");
        let zn = t.div(z, norm).expect("clamped to a positive floor");
        t.matmul_tn(zn, zn)
    }

    fn head(&self, t: &mut Tape<T>, leaves: &[Var], ids: &HeadIds, spec: Var, prev: Var) -> HeadVars {
        let eps = T::lit(LAYER_NORM_EPS);
        let d = self.config.latent;
        let d_o = self.config.candidates();
        let f = t.matmul(spec, leaves[ids.focus.index()]);
        let f = t.reshape(f, 1, d);
        let h = t.matmul(f, leaves[ids.sel_hidden.index()]);
        let h = t.layer_norm_rows(h, eps);
        let h = t.softplus(h);
        let logits = t.matmul(h, leaves[ids.sel_out.index()]);
        let logits = t.layer_norm_rows(logits, eps);
        let p = t.softmax_rows(logits);
        let s = t.sum_cols(leaves[ids.scale.index()]);
        let s = t.reshape(s, 1, d_o);
        let gp = t.matmul(p, leaves[ids.gate_p.index()]);
        let gq = t.matmul(prev, leaves[ids.gate_prev.index()]);
        let g = t.add(gp, gq);
        let phi = t.sigmoid(g);
        let sp = t.mul(s, p);
        let coeff = t.mul(sp, phi);
        HeadVars { p, s, phi, coeff }
    }

    /// Records the forward pass. With `torque` the Euler-Lagrange torques
    /// of the frozen-coefficient prediction are recorded as well.
    pub fn forward(
        &self,
        t: &mut Tape<T>,
        leaves: &[Var],
        batch: &Batch<T>,
        torque: bool,
    ) -> Result<ForwardOut, ModelError> {
        let cfg = &self.config;
        if batch.n == 0 {
            return Err(ModelError::Shape("empty batch".into()));
        }
        if batch.joints != cfg.joints {
            return Err(ModelError::Shape(format!(
                "batch has {} joints, model expects {}",
                batch.joints, cfg.joints
            )));
        }
        if leaves.len() != self.params.len() {
            return Err(ModelError::Shape("parameter leaves do not match the model".into()));
        }
        let n = batch.n;
        let d_o = cfg.candidates();
        let shape = JetShape { n, joints: cfg.joints };
        let x = shape.inputs(t, &batch.states, 0, torque);
        let mut u = shape.inputs(t, &batch.states, cfg.heads, torque);
        let mut prev = t.constant(vec![T::one(); d_o], 1, d_o);
        let mut recon = t.scalar_constant(T::zero());
        let mut contraction = t.scalar_constant(T::zero());
        let mut layers = Vec::with_capacity(cfg.layers);
        let mut out = None;
        let inv_n = T::one() / T::from_usize(n).expect("batch size");
        for ids in &self.layers {
            let cand = candidate_jet(&shape, t, u);
            let v = cand.value;
            let v_norm = t.layer_norm_rows(v, T::lit(LAYER_NORM_EPS));
            let (a1, a2, z) = self.encode(t, leaves, v_norm);
            let v_hat = self.decode(t, leaves, z);
            let diff = t.sub(v_norm, v_hat);
            let sq = t.square(diff);
            let r = t.sum(sq);
            let r = t.scale(r, inv_n);
            recon = t.add(recon, r);
            let c = self.contraction(t, leaves, a1, a2);
            contraction = t.add(contraction, c);
            let sim = Self::similarity(t, z);
            let spec = t.matmul_nt(sim, leaves[ids.spec.index()]);
            let heads: Vec<HeadVars> = ids
                .heads
                .iter()
                .map(|h| self.head(t, leaves, h, spec, prev))
                .collect();
            let mut joint = heads[0].p;
            for h in &heads[1..] {
                joint = t.mul(joint, h.p);
            }
            let coeffs: Vec<Var> = heads.iter().map(|h| h.coeff).collect();
            let c = t.concat_rows(&coeffs);
            let h_out = shape.linear(t, cand, c);
            u = shape.concat_cols(t, &[x, h_out]);
            out = Some(h_out);
            prev = joint;
            layers.push(LayerVars {
                v,
                v_norm,
                z,
                sim,
                spec,
                heads,
                joint,
            });
        }
        let fhat = shape.sum_cols(t, out.expect("at least one layer"));
        let tau = torque.then(|| shape.torque(t, fhat));
        if let Some((node, op)) = t.first_non_finite() {
            return Err(ModelError::NonFinite { op, node });
        }
        Ok(ForwardOut {
            fhat: fhat.value,
            tau,
            recon,
            contraction,
            layers,
        })
    }

    /// Flat coefficient vector indexed by [`ArchConfig::coeff_slot`].
    pub fn coefficients(&self, t: &Tape<T>, out: &ForwardOut) -> Vec<f64> {
        out.layers
            .iter()
            .flat_map(|l| l.heads.iter())
            .flat_map(|h| t.value(h.coeff).iter().map(|v| v.as_f64()))
            .collect()
    }

    /// Convenience forward on a fresh tape with constant parameters.
    pub fn evaluate(&self, batch: &Batch<T>, torque: bool) -> Result<(Tape<T>, ForwardOut), ModelError> {
        let mut t = Tape::new();
        let leaves = self.params.record_constant(&mut t);
        let out = self.forward(&mut t, &leaves, batch, torque)?;
        Ok((t, out))
    }

    fn head_ids(&self, layer: usize, head: usize) -> HeadIds {
        self.layers[layer].heads[head]
    }
}
