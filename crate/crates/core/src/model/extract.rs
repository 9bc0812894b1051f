use super::{SymbolicModel, SyreNet};
use crate::batch::Batch;
use crate::error::ModelError;
use crate::expr::{ExprId, ExprStore};
use crate::scalar::Scalar;

/// Terms below this magnitude are dropped from argmax extractions.
pub const EXTRACT_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtractMode {
    /// Every coefficient as recorded by the forward pass.
    Soft,
    /// Each head keeps only its most probable candidate (lowest index on
    /// ties) with weight `φ·S`, followed by simplification.
    Argmax,
}

impl std::str::FromStr for ExtractMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "soft" => Ok(Self::Soft),
            "argmax" => Ok(Self::Argmax),
            other => Err(format!("unknown extraction mode {other:?}")),
        }
    }
}

/// Lowest index of the maximum.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

impl<T: Scalar> SyreNet<T> {
    /// Coefficients used by an extraction on the reference batch.
    pub fn extraction_coefficients(&self, batch: &Batch<T>, mode: ExtractMode) -> Result<Vec<f64>, ModelError> {
        let (t, out) = self.evaluate(batch, false)?;
        match mode {
            ExtractMode::Soft => Ok(self.coefficients(&t, &out)),
            ExtractMode::Argmax => {
                let d_o = self.config.candidates();
                let mut c = vec![0.0; self.config.coeff_slots()];
                for (i, layer) in out.layers.iter().enumerate() {
                    for (j, h) in layer.heads.iter().enumerate() {
                        let p: Vec<f64> = t.value(h.p).iter().map(|v| v.as_f64()).collect();
                        let b = argmax(&p);
                        let phi = t.scalar_value(h.phi).as_f64();
                        let s = t.value(h.s)[b].as_f64();
                        debug_assert_eq!(p.len(), d_o);
                        c[self.config.coeff_slot(i, j, b)] = phi * s;
                    }
                }
                Ok(c)
            }
        }
    }

    /// Learned equation as an expression over `(q, q̇)`.
    pub fn extract(
        &self,
        sym: &SymbolicModel,
        batch: &Batch<T>,
        mode: ExtractMode,
    ) -> Result<(ExprStore, ExprId), ModelError> {
        let coeffs = self.extraction_coefficients(batch, mode)?;
        let mut store = sym.store.clone();
        let e = store.instantiate(sym.fhat, &coeffs)?;
        let e = match mode {
            ExtractMode::Soft => e,
            ExtractMode::Argmax => store.simplify(e, EXTRACT_EPS),
        };
        Ok((store, e))
    }

    /// Sets one head so that it selects candidate `cand` with scale
    /// `scale` and an open gate (`σ(40)` rounds to 1 in `f64`).
    pub fn engineer_one_hot(&mut self, layer: usize, head: usize, cand: usize, scale: f64) {
        let ids = self.head_ids(layer, head);
        let d_o = self.config.candidates();
        assert!(cand < d_o, "candidate index out of range");
        let p = &mut self.params;
        let out = p.block_mut(ids.sel_out);
        for r in 0..out.rows {
            for c in 0..out.cols {
                out.data[r * out.cols + c] = T::lit(if c == cand { 10.0 } else { 0.0 });
            }
        }
        let s = p.block_mut(ids.scale);
        s.data.iter_mut().for_each(|v| *v = T::zero());
        s.data[cand * d_o] = T::lit(scale);
        p.block_mut(ids.gate_p).data.iter_mut().for_each(|v| *v = T::lit(40.0));
        p.block_mut(ids.gate_prev).data.iter_mut().for_each(|v| *v = T::zero());
    }

    /// Sets every gate of `layer` to `σ(bias)` regardless of its inputs.
    pub fn force_gates(&mut self, layer: usize, bias: f64) {
        for head in 0..self.config.heads {
            let ids = self.head_ids(layer, head);
            let p = &mut self.params;
            p.block_mut(ids.gate_p).data.iter_mut().for_each(|v| *v = T::lit(bias));
            p.block_mut(ids.gate_prev).data.iter_mut().for_each(|v| *v = T::zero());
        }
    }
}
