//! Symbolic differentiation and the Euler-Lagrange operator.

use std::collections::HashMap;

use super::{ExprId, ExprStore, Node, StateOrder};
use crate::error::ExprError;

impl ExprStore {
    /// Raw (unsimplified) derivative of `root` with respect to state slot
    /// `slot`. Product rule is always written `da*b + a*db`.
    fn raw_partial(&mut self, root: ExprId, slot: usize) -> ExprId {
        let order = self.reachable(root);
        let mut d: HashMap<ExprId, ExprId> = HashMap::with_capacity(order.len());
        let zero = self.constant(0.0);
        let one = self.constant(1.0);
        for id in order {
            let di = match self.node(id) {
                Node::Var(s) if s as usize == slot => one,
                Node::Var(_) | Node::Coeff(_) | Node::Const(_) => zero,
                Node::Add(a, b) => self.add(d[&a], d[&b]),
                Node::Mul(a, b) => {
                    let l = self.mul(d[&a], b);
                    let r = self.mul(a, d[&b]);
                    self.add(l, r)
                }
                Node::Sin(a) => {
                    let c = self.cos(a);
                    self.mul(c, d[&a])
                }
                Node::Cos(a) => {
                    let s = self.sin(a);
                    let ns = self.neg(s);
                    self.mul(ns, d[&a])
                }
            };
            d.insert(id, di);
        }
        d[&root]
    }

    /// `∂root/∂(state slot)`, simplified with `eps = 0`.
    pub fn partial(&mut self, root: ExprId, slot: usize) -> Result<ExprId, ExprError> {
        let slots = self.layout().n_slots();
        if slot >= slots {
            return Err(ExprError::BadVariable { slot, slots });
        }
        let raw = self.raw_partial(root, slot);
        Ok(self.simplify(raw, 0.0))
    }

    /// Joint torques `τ_i = d/dt ∂L/∂q̇_i − ∂L/∂q_i`, with the time
    /// derivative expanded through the chain rule over `q` and `q̇`:
    /// `Σ_j ∂²L/∂q̇_i∂q_j q̇_j + Σ_j ∂²L/∂q̇_i∂q̇_j q̈_j`.
    pub fn euler_lagrange(&mut self, lagrangian: ExprId) -> Result<Vec<ExprId>, ExprError> {
        let layout = self.layout();
        if let Some(&slot) = self
            .state_slots(lagrangian)
            .iter()
            .find(|&&s| matches!(layout.classify(s), Some((StateOrder::Acceleration, _))))
        {
            return Err(ExprError::AccelerationInLagrangian { slot });
        }
        let n = layout.n_joints();
        let mut torques = Vec::with_capacity(n);
        for i in 0..n {
            let dl_dqd = self.partial(lagrangian, layout.velocity(i))?;
            let mut terms = Vec::with_capacity(2 * n + 1);
            for j in 0..n {
                let h = self.partial(dl_dqd, layout.position(j))?;
                let qd = self.velocity(j);
                terms.push(self.mul(h, qd));
            }
            for j in 0..n {
                let h = self.partial(dl_dqd, layout.velocity(j))?;
                let qdd = self.acceleration(j);
                terms.push(self.mul(h, qdd));
            }
            let dl_dq = self.partial(lagrangian, layout.position(i))?;
            terms.push(self.neg(dl_dq));
            let tau = self.sum(terms);
            torques.push(self.simplify(tau, 0.0));
        }
        Ok(torques)
    }
}

#[cfg(test)]
mod tests {
    use super::super::StateLayout;
    use super::*;

    #[test]
    fn elementary_partials() {
        let mut s = ExprStore::new(StateLayout::new(2));
        let q1 = s.position(0);
        let sq = s.sin(q1);
        let d = s.partial(sq, 0).unwrap();
        assert_eq!(d, s.cos(q1));

        let v1 = s.velocity(0);
        let p = s.mul(q1, v1);
        assert_eq!(s.partial(p, s.layout().velocity(0)).unwrap(), q1);

        let k = s.coeff(0);
        let c = s.constant(4.0);
        let dk = s.partial(k, 0).unwrap();
        let dc = s.partial(c, 0).unwrap();
        assert_eq!(s.node(dk), Node::Const(0.0));
        assert_eq!(s.node(dc), Node::Const(0.0));
        assert!(s.partial(k, 6).is_err());
    }

    #[test]
    fn free_particle_and_gravity_examples() {
        let mut s = ExprStore::new(StateLayout::new(1));
        let v = s.velocity(0);
        let half = s.constant(0.5);
        let vv = s.mul(v, v);
        let l = s.mul(half, vv);
        let tau = s.euler_lagrange(l).unwrap();
        assert_eq!(tau[0], s.acceleration(0));

        let q = s.position(0);
        let l = s.cos(q);
        let tau = s.euler_lagrange(l).unwrap();
        assert_eq!(tau[0], s.sin(q));
        let v = s.eval(tau[0], &[std::f64::consts::FRAC_PI_2, 0.0, 0.0], &[]).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn rejects_acceleration_in_lagrangian() {
        let mut s = ExprStore::new(StateLayout::new(2));
        let a = s.acceleration(1);
        assert_eq!(
            s.euler_lagrange(a),
            Err(ExprError::AccelerationInLagrangian { slot: 5 })
        );
    }
}
