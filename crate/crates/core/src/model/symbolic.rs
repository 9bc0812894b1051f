use super::candidates::candidate_exprs;
use super::ArchConfig;
use crate::expr::{ExprId, ExprStore, StateLayout};

/// Expression skeleton of the network: one coefficient slot per
/// `(layer, head, candidate)`, fixed for a given architecture.
#[derive(Clone, Debug)]
pub struct SymbolicModel {
    pub store: ExprStore,
    /// Candidate expressions per layer, aligned with candidate values.
    pub candidates: Vec<Vec<ExprId>>,
    /// Head outputs per layer.
    pub heads: Vec<Vec<ExprId>>,
    pub fhat: ExprId,
}

impl SymbolicModel {
    pub fn build(cfg: &ArchConfig) -> Self {
        let mut s = ExprStore::new(StateLayout::new(cfg.joints));
        let mut x: Vec<ExprId> = (0..cfg.joints).map(|j| s.position(j)).collect();
        x.extend((0..cfg.joints).map(|j| s.velocity(j)));
        let zero = s.constant(0.0);
        let mut inputs: Vec<ExprId> = x.iter().copied().chain(std::iter::repeat_n(zero, cfg.heads)).collect();
        let mut candidates = Vec::with_capacity(cfg.layers);
        let mut heads = Vec::with_capacity(cfg.layers);
        for layer in 0..cfg.layers {
            let cand = candidate_exprs(&mut s, &inputs);
            let outs: Vec<ExprId> = (0..cfg.heads)
                .map(|head| {
                    let terms: Vec<ExprId> = cand
                        .iter()
                        .enumerate()
                        .map(|(b, &e)| {
                            let c = s.coeff(cfg.coeff_slot(layer, head, b));
                            s.mul(c, e)
                        })
                        .collect();
                    s.sum(terms)
                })
                .collect();
            inputs = x.iter().chain(&outs).copied().collect();
            candidates.push(cand);
            heads.push(outs);
        }
        let fhat = s.sum(heads.last().expect("at least one layer").clone());
        Self {
            store: s,
            candidates,
            heads,
            fhat,
        }
    }
}
