//! Identity folding, constant folding and small-term pruning.
//!
//! Normal form: constant factors of a product are lifted into a single
//! leading constant (`Mul(Const c, rest)`), constant sub-trees are folded,
//! `0 + x`, `0 * x` and `1 * x` collapse. Every rewrite is applied by a
//! smart constructor that returns normal output for normal input, so one
//! bottom-up sweep reaches the fixed point and `simplify` is idempotent.

use std::collections::HashMap;

use super::{ExprId, ExprStore, Node};

impl ExprStore {
    fn const_value(&self, id: ExprId) -> Option<f64> {
        match self.node(id) {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    /// `(leading constant, remaining factor)`; the constant defaults to 1.
    fn split_const(&self, id: ExprId) -> (f64, Option<ExprId>) {
        match self.node(id) {
            Node::Const(v) => (v, None),
            Node::Mul(a, b) => match self.node(a) {
                Node::Const(v) => (v, Some(b)),
                _ => (1.0, Some(id)),
            },
            _ => (1.0, Some(id)),
        }
    }

    /// Sum term whose constant weight is below `eps` in magnitude.
    fn negligible(&self, id: ExprId, eps: f64) -> bool {
        if eps <= 0.0 {
            return false;
        }
        match self.node(id) {
            Node::Const(v) => v.abs() < eps,
            Node::Mul(a, _) => matches!(self.node(a), Node::Const(v) if v.abs() < eps),
            _ => false,
        }
    }

    pub(crate) fn smart_add(&mut self, a: ExprId, b: ExprId, eps: f64) -> ExprId {
        if let (Some(x), Some(y)) = (self.const_value(a), self.const_value(b)) {
            return self.constant(x + y);
        }
        if self.const_value(a) == Some(0.0) || self.negligible(a, eps) {
            return b;
        }
        if self.const_value(b) == Some(0.0) || self.negligible(b, eps) {
            return a;
        }
        self.add(a, b)
    }

    pub(crate) fn smart_mul(&mut self, a: ExprId, b: ExprId) -> ExprId {
        if let (Some(x), Some(y)) = (self.const_value(a), self.const_value(b)) {
            return self.constant(x * y);
        }
        if self.const_value(a) == Some(0.0) || self.const_value(b) == Some(0.0) {
            return self.constant(0.0);
        }
        if self.const_value(a) == Some(1.0) {
            return b;
        }
        if self.const_value(b) == Some(1.0) {
            return a;
        }
        let (ca, ra) = self.split_const(a);
        let (cb, rb) = self.split_const(b);
        let rest = match (ra, rb) {
            (Some(x), Some(y)) if ca == 1.0 && cb == 1.0 => return self.mul(x, y),
            (Some(x), Some(y)) => self.smart_mul(x, y),
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => unreachable!("both constant handled above"),
        };
        let c = ca * cb;
        if c == 0.0 {
            return self.constant(0.0);
        }
        if c == 1.0 {
            return rest;
        }
        let k = self.constant(c);
        self.mul(k, rest)
    }

    pub(crate) fn smart_sin(&mut self, a: ExprId) -> ExprId {
        match self.const_value(a) {
            Some(v) => self.constant(v.sin()),
            None => self.sin(a),
        }
    }

    pub(crate) fn smart_cos(&mut self, a: ExprId) -> ExprId {
        match self.const_value(a) {
            Some(v) => self.constant(v.cos()),
            None => self.cos(a),
        }
    }

    /// Simplifies `root`. Constant-weighted sum terms with weight below
    /// `eps` are dropped; `eps = 0` performs identity folding only.
    /// Coefficient slots are opaque here: call [`ExprStore::instantiate`]
    /// first to have coefficient-weighted terms pruned.
    pub fn simplify(&mut self, root: ExprId, eps: f64) -> ExprId {
        assert!(eps >= 0.0, "eps must be non-negative");
        let order = self.reachable(root);
        let mut map: HashMap<ExprId, ExprId> = HashMap::with_capacity(order.len());
        for id in order {
            let new = match self.node(id) {
                Node::Add(a, b) => self.smart_add(map[&a], map[&b], eps),
                Node::Mul(a, b) => self.smart_mul(map[&a], map[&b]),
                Node::Sin(a) => self.smart_sin(map[&a]),
                Node::Cos(a) => self.smart_cos(map[&a]),
                _ => id,
            };
            map.insert(id, new);
        }
        map[&root]
    }
}

#[cfg(test)]
mod tests {
    use super::super::StateLayout;
    use super::*;

    fn store() -> ExprStore {
        ExprStore::new(StateLayout::new(2))
    }

    #[test]
    fn folds_identities() {
        let mut s = store();
        let q1 = s.position(0);
        let q2 = s.position(1);
        let zero = s.constant(0.0);
        let zq = s.mul(zero, q1);
        let e = s.add(zq, q2);
        assert_eq!(s.simplify(e, 0.0), q2);

        let two = s.constant(2.0);
        let three = s.constant(3.0);
        let e = s.add(two, three);
        let five = s.constant(5.0);
        assert_eq!(s.simplify(e, 0.0), five);

        let one = s.constant(1.0);
        let e = s.mul(one, q1);
        assert_eq!(s.simplify(e, 0.0), q1);
    }

    #[test]
    fn drops_negligible_terms() {
        let mut s = store();
        let q1 = s.position(0);
        let q2 = s.position(1);
        let tiny = s.constant(1e-9);
        let t = s.mul(tiny, q1);
        let e = s.add(t, q2);
        assert_eq!(s.simplify(e, 1e-6), q2);
        // eps = 0 keeps it
        assert_ne!(s.simplify(e, 0.0), q2);
    }

    #[test]
    fn lifts_and_merges_constant_factors() {
        let mut s = store();
        let q1 = s.position(0);
        let v = s.velocity(0);
        let two = s.constant(2.0);
        let three = s.constant(3.0);
        let a = s.mul(two, q1);
        let b = s.mul(v, three);
        let e = s.mul(a, b);
        let got = s.simplify(e, 0.0);
        let six = s.constant(6.0);
        let qv = s.mul(q1, v);
        assert_eq!(got, s.mul(six, qv));
        assert_eq!(s.simplify(got, 0.0), got);
    }
}
