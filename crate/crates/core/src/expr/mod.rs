//! Hash-consed symbolic expression DAG.
//!
//! Nodes are interned into an [`ExprStore`]; structurally identical trees
//! share one [`ExprId`], and children always carry smaller ids than their
//! parents, so a plain id sweep is a topological order.

mod diff;
mod print;
mod simplify;

use std::collections::HashMap;

use crate::error::{ExprError, SlotKind};
use crate::scalar::Scalar;

pub use print::{format_number, parse};

/// Handle to an interned node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExprId(u32);

impl ExprId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Node {
    Var(u32),
    Coeff(u32),
    Const(f64),
    Add(ExprId, ExprId),
    Mul(ExprId, ExprId),
    Sin(ExprId),
    Cos(ExprId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Key {
    Var(u32),
    Coeff(u32),
    Const(u64),
    Add(u32, u32),
    Mul(u32, u32),
    Sin(u32),
    Cos(u32),
}

/// Order of a state variable: position, velocity or acceleration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateOrder {
    Position,
    Velocity,
    Acceleration,
}

/// Maps `(q, q̇, q̈)` of an `n`-joint system onto state slots
/// `q_1..q_n, q̇_1..q̇_n, q̈_1..q̈_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateLayout {
    n_joints: usize,
}

impl StateLayout {
    pub fn new(n_joints: usize) -> Self {
        assert!(n_joints > 0, "a layout needs at least one joint");
        Self { n_joints }
    }

    pub fn n_joints(&self) -> usize {
        self.n_joints
    }

    pub fn n_slots(&self) -> usize {
        3 * self.n_joints
    }

    pub fn position(&self, joint: usize) -> usize {
        assert!(joint < self.n_joints);
        joint
    }

    pub fn velocity(&self, joint: usize) -> usize {
        assert!(joint < self.n_joints);
        self.n_joints + joint
    }

    pub fn acceleration(&self, joint: usize) -> usize {
        assert!(joint < self.n_joints);
        2 * self.n_joints + joint
    }

    pub fn classify(&self, slot: usize) -> Option<(StateOrder, usize)> {
        let n = self.n_joints;
        match slot / n {
            0 => Some((StateOrder::Position, slot)),
            1 => Some((StateOrder::Velocity, slot - n)),
            2 => Some((StateOrder::Acceleration, slot - 2 * n)),
            _ => None,
        }
    }
}

/// Append-only interning store. Cloning is the snapshot mechanism.
#[derive(Clone, Debug)]
pub struct ExprStore {
    layout: StateLayout,
    nodes: Vec<Node>,
    index: HashMap<Key, ExprId>,
}

impl ExprStore {
    pub fn new(layout: StateLayout) -> Self {
        Self {
            layout,
            nodes: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: ExprId) -> Node {
        self.nodes[id.index()]
    }

    fn key_of(node: &Node) -> Key {
        match *node {
            Node::Var(s) => Key::Var(s),
            Node::Coeff(s) => Key::Coeff(s),
            Node::Const(v) => Key::Const(v.to_bits()),
            Node::Add(a, b) => Key::Add(a.0, b.0),
            Node::Mul(a, b) => Key::Mul(a.0, b.0),
            Node::Sin(a) => Key::Sin(a.0),
            Node::Cos(a) => Key::Cos(a.0),
        }
    }

    /// Canonical operand order for commutative nodes: constants first, then
    /// ascending id.
    fn order_key(&self, id: ExprId) -> (bool, u32) {
        (!matches!(self.node(id), Node::Const(_)), id.0)
    }

    fn canonical(&self, node: Node) -> Node {
        match node {
            Node::Const(v) if v == 0.0 => Node::Const(0.0),
            Node::Add(a, b) if self.order_key(b) < self.order_key(a) => Node::Add(b, a),
            Node::Mul(a, b) if self.order_key(b) < self.order_key(a) => Node::Mul(b, a),
            other => other,
        }
    }

    /// Interns `node`, returning the existing id on a structural match.
    pub fn intern(&mut self, node: Node) -> ExprId {
        let check = |c: ExprId| {
            assert!(c.index() < self.nodes.len(), "child {c:?} not interned");
        };
        match node {
            Node::Add(a, b) | Node::Mul(a, b) => {
                check(a);
                check(b);
            }
            Node::Sin(a) | Node::Cos(a) => check(a),
            _ => {}
        }
        let node = self.canonical(node);
        let key = Self::key_of(&node);
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = ExprId(u32::try_from(self.nodes.len()).expect("expression store overflow"));
        self.nodes.push(node);
        self.index.insert(key, id);
        id
    }

    pub fn var(&mut self, slot: usize) -> ExprId {
        assert!(
            slot < self.layout.n_slots(),
            "state slot {slot} outside layout"
        );
        self.intern(Node::Var(slot as u32))
    }

    pub fn position(&mut self, joint: usize) -> ExprId {
        let s = self.layout.position(joint);
        self.var(s)
    }

    pub fn velocity(&mut self, joint: usize) -> ExprId {
        let s = self.layout.velocity(joint);
        self.var(s)
    }

    pub fn acceleration(&mut self, joint: usize) -> ExprId {
        let s = self.layout.acceleration(joint);
        self.var(s)
    }

    pub fn coeff(&mut self, slot: usize) -> ExprId {
        self.intern(Node::Coeff(slot as u32))
    }

    pub fn constant(&mut self, value: f64) -> ExprId {
        self.intern(Node::Const(value))
    }

    pub fn add(&mut self, a: ExprId, b: ExprId) -> ExprId {
        self.intern(Node::Add(a, b))
    }

    pub fn mul(&mut self, a: ExprId, b: ExprId) -> ExprId {
        self.intern(Node::Mul(a, b))
    }

    pub fn sin(&mut self, a: ExprId) -> ExprId {
        self.intern(Node::Sin(a))
    }

    pub fn cos(&mut self, a: ExprId) -> ExprId {
        self.intern(Node::Cos(a))
    }

    /// `-1 * a`
    pub fn neg(&mut self, a: ExprId) -> ExprId {
        let m = self.constant(-1.0);
        self.mul(m, a)
    }

    pub fn sub(&mut self, a: ExprId, b: ExprId) -> ExprId {
        let nb = self.neg(b);
        self.add(a, nb)
    }

    /// Right-nested sum of `terms`; `0` when empty.
    pub fn sum<I: IntoIterator<Item = ExprId>>(&mut self, terms: I) -> ExprId {
        let terms: Vec<ExprId> = terms.into_iter().collect();
        match terms.split_last() {
            None => self.constant(0.0),
            Some((&last, rest)) => rest.iter().rev().fold(last, |acc, &t| self.add(t, acc)),
        }
    }

    /// Every node reachable from `root`, in ascending (topological) order.
    pub fn reachable(&self, root: ExprId) -> Vec<ExprId> {
        let mut seen = vec![false; root.index() + 1];
        let mut stack = vec![root];
        seen[root.index()] = true;
        while let Some(id) = stack.pop() {
            let mut visit = |c: ExprId| {
                if !seen[c.index()] {
                    seen[c.index()] = true;
                    stack.push(c);
                }
            };
            match self.node(id) {
                Node::Add(a, b) | Node::Mul(a, b) => {
                    visit(a);
                    visit(b);
                }
                Node::Sin(a) | Node::Cos(a) => visit(a),
                _ => {}
            }
        }
        seen.iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(ExprId(i as u32)))
            .collect()
    }

    /// State slots referenced anywhere below `root`, ascending.
    pub fn state_slots(&self, root: ExprId) -> Vec<usize> {
        let mut slots: Vec<usize> = self
            .reachable(root)
            .into_iter()
            .filter_map(|id| match self.node(id) {
                Node::Var(s) => Some(s as usize),
                _ => None,
            })
            .collect();
        slots.sort_unstable();
        slots
    }

    /// Number of nodes reachable from `root`.
    pub fn size(&self, root: ExprId) -> usize {
        self.reachable(root).len()
    }

    /// Replaces every coefficient slot with a constant holding its value.
    pub fn instantiate(&mut self, root: ExprId, coeffs: &[f64]) -> Result<ExprId, ExprError> {
        let order = self.reachable(root);
        let mut map: HashMap<ExprId, ExprId> = HashMap::with_capacity(order.len());
        for id in order {
            let new = match self.node(id) {
                Node::Coeff(s) => {
                    let v = *coeffs.get(s as usize).ok_or(ExprError::SlotOutOfRange {
                        kind: SlotKind::Coeff,
                        slot: s as usize,
                        available: coeffs.len(),
                    })?;
                    self.constant(v)
                }
                Node::Add(a, b) => self.add(map[&a], map[&b]),
                Node::Mul(a, b) => self.mul(map[&a], map[&b]),
                Node::Sin(a) => self.sin(map[&a]),
                Node::Cos(a) => self.cos(map[&a]),
                _ => id,
            };
            map.insert(id, new);
        }
        Ok(map[&root])
    }

    /// Flattens `root` into an evaluation program.
    pub fn compile(&self, root: ExprId) -> Program {
        let order = self.reachable(root);
        let mut local = HashMap::with_capacity(order.len());
        let mut ops = Vec::with_capacity(order.len());
        let mut max_state = None;
        let mut max_coeff = None;
        for (i, id) in order.iter().enumerate() {
            local.insert(*id, i);
            let op = match self.node(*id) {
                Node::Var(s) => {
                    max_state = max_state.max(Some(s as usize));
                    Op::State(s as usize)
                }
                Node::Coeff(s) => {
                    max_coeff = max_coeff.max(Some(s as usize));
                    Op::Coeff(s as usize)
                }
                Node::Const(v) => Op::Const(v),
                Node::Add(a, b) => Op::Add(local[&a], local[&b]),
                Node::Mul(a, b) => Op::Mul(local[&a], local[&b]),
                Node::Sin(a) => Op::Sin(local[&a]),
                Node::Cos(a) => Op::Cos(local[&a]),
            };
            ops.push(op);
        }
        Program {
            ops,
            max_state,
            max_coeff,
        }
    }

    /// Evaluates `root` with DAG memoization.
    pub fn eval<T: Scalar>(&self, root: ExprId, state: &[T], coeffs: &[T]) -> Result<T, ExprError> {
        self.compile(root).eval(state, coeffs)
    }
}

/// One instruction of a compiled expression; operands index earlier ops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    State(usize),
    Coeff(usize),
    Const(f64),
    Add(usize, usize),
    Mul(usize, usize),
    Sin(usize),
    Cos(usize),
}

/// Topologically ordered instruction list; the last op is the root.
#[derive(Clone, Debug)]
pub struct Program {
    ops: Vec<Op>,
    max_state: Option<usize>,
    max_coeff: Option<usize>,
}

impl Program {
    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Checks that `state_len`/`coeff_len` cover every referenced slot.
    pub fn check_slots(&self, state_len: usize, coeff_len: usize) -> Result<(), ExprError> {
        if let Some(s) = self.max_state.filter(|&s| s >= state_len) {
            return Err(ExprError::SlotOutOfRange {
                kind: SlotKind::State,
                slot: s,
                available: state_len,
            });
        }
        if let Some(s) = self.max_coeff.filter(|&s| s >= coeff_len) {
            return Err(ExprError::SlotOutOfRange {
                kind: SlotKind::Coeff,
                slot: s,
                available: coeff_len,
            });
        }
        Ok(())
    }

    pub fn eval<T: Scalar>(&self, state: &[T], coeffs: &[T]) -> Result<T, ExprError> {
        self.check_slots(state.len(), coeffs.len())?;
        let mut buf = Vec::with_capacity(self.ops.len());
        Ok(self.eval_unchecked(state, coeffs, &mut buf))
    }

    /// Evaluation reusing `buf`; slots must already be validated.
    pub fn eval_unchecked<T: Scalar>(&self, state: &[T], coeffs: &[T], buf: &mut Vec<T>) -> T {
        buf.clear();
        for op in &self.ops {
            let v = match *op {
                Op::State(s) => state[s],
                Op::Coeff(s) => coeffs[s],
                Op::Const(c) => T::lit(c),
                Op::Add(a, b) => buf[a] + buf[b],
                Op::Mul(a, b) => buf[a] * buf[b],
                Op::Sin(a) => buf[a].sin(),
                Op::Cos(a) => buf[a].cos(),
            };
            buf.push(v);
        }
        *buf.last().expect("empty program")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn store() -> ExprStore {
        ExprStore::new(StateLayout::new(2))
    }

    #[test]
    fn interning_dedups_and_canonicalizes() {
        let mut s = store();
        let a = s.position(0);
        let b = s.position(1);
        let x = s.add(a, b);
        assert_eq!(x, s.add(a, b));
        assert_eq!(x, s.add(b, a));
        assert_eq!(s.mul(a, b), s.mul(b, a));
        let sa = s.sin(a);
        let ca = s.cos(a);
        assert_ne!(sa, ca);
    }

    #[test]
    fn constants_sort_first() {
        let mut s = store();
        let q = s.position(0);
        let c = s.cos(q);
        let one = s.constant(1.0);
        let sum = s.add(c, one);
        assert!(matches!(s.node(sum), Node::Add(l, _) if l == one));
        assert_eq!(s.constant(-0.0), s.constant(0.0));
    }

    #[test]
    fn children_precede_parents() {
        let mut s = store();
        let q = s.position(0);
        let v = s.velocity(1);
        let m = s.mul(q, v);
        let e = s.sin(m);
        for id in s.reachable(e) {
            match s.node(id) {
                Node::Add(a, b) | Node::Mul(a, b) => assert!(a < id && b < id),
                Node::Sin(a) | Node::Cos(a) => assert!(a < id),
                _ => {}
            }
        }
    }

    #[test]
    fn eval_examples() {
        let mut s = store();
        let q1 = s.position(0);
        let q2 = s.position(1);
        let sq = s.sin(q1);
        assert_eq!(s.eval(sq, &[0.0, 0.0], &[]).unwrap(), 0.0);

        let p = s.mul(q1, q2);
        let c = s.cos(q1);
        let e = s.add(p, c);
        let v = s.eval(e, &[FRAC_PI_2, 2.0], &[]).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-12);

        let k = s.coeff(0);
        let kq = s.mul(k, q1);
        assert_eq!(s.eval(kq, &[2.0, 0.0], &[3.0]).unwrap(), 6.0);
    }

    #[test]
    fn eval_reports_unbound_slots() {
        let mut s = store();
        let k = s.coeff(3);
        let q = s.velocity(1);
        let e = s.mul(k, q);
        assert_eq!(
            s.eval(e, &[0.0; 4], &[1.0]),
            Err(ExprError::SlotOutOfRange {
                kind: SlotKind::Coeff,
                slot: 3,
                available: 1
            })
        );
        assert!(matches!(
            s.eval::<f64>(e, &[0.0; 2], &[0.0; 4]),
            Err(ExprError::SlotOutOfRange {
                kind: SlotKind::State,
                ..
            })
        ));
    }

    #[test]
    fn instantiate_replaces_coefficients() {
        let mut s = store();
        let k = s.coeff(0);
        let q = s.position(0);
        let e = s.mul(k, q);
        let inst = s.instantiate(e, &[0.5]).unwrap();
        let half = s.constant(0.5);
        assert_eq!(inst, s.mul(half, q));
    }

    #[test]
    fn sum_is_right_nested() {
        let mut s = store();
        let t: Vec<_> = (0..2).map(|j| s.position(j)).collect();
        let v = s.velocity(0);
        let e = s.sum([t[0], t[1], v]);
        match s.node(e) {
            Node::Add(l, r) => {
                assert_eq!(l, t[0]);
                assert!(matches!(s.node(r), Node::Add(..)));
            }
            other => panic!("unexpected {other:?}"),
        }
        let z = s.sum([]);
        assert_eq!(s.node(z), Node::Const(0.0));
    }
}
