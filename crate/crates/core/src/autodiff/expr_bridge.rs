use super::{Tape, Var};
use crate::error::ExprError;
use crate::expr::{ExprId, ExprStore, Op, Program};
use crate::scalar::Scalar;

/// Evaluates `root` on the tape with state slots held constant and each
/// coefficient slot `j` bound to the scalar value `coeffs[j]`.
pub fn eval_expr_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ExprStore,
    root: ExprId,
    state: &[T],
    coeffs: &[Var],
) -> Result<Var, ExprError> {
    let program = store.compile(root);
    program.check_slots(state.len(), coeffs.len())?;
    let mut vals: Vec<Var> = Vec::with_capacity(program.len());
    for op in program.ops() {
        let v = match *op {
            Op::State(s) => tape.scalar_constant(state[s]),
            Op::Coeff(c) => coeffs[c],
            Op::Const(x) => tape.scalar_constant(T::lit(x)),
            Op::Add(a, b) => tape.add(vals[a], vals[b]),
            Op::Mul(a, b) => tape.mul(vals[a], vals[b]),
            Op::Sin(a) => tape.sin(vals[a]),
            Op::Cos(a) => tape.cos(vals[a]),
        };
        vals.push(v);
    }
    Ok(*vals.last().expect("program is never empty"))
}

/// Batched form of [`eval_expr_on_tape`].
///
/// `states` is an `(n, slots)` row-major block of constant states and
/// `coeffs` a `(1, m)` or `(n, m)` tape value. Returns an `(n, 1)` value.
pub fn eval_expr_batch<T: Scalar>(
    tape: &mut Tape<T>,
    program: &Program,
    states: &[T],
    slots: usize,
    coeffs: Var,
) -> Result<Var, ExprError> {
    let (_, m) = tape.shape(coeffs);
    program.check_slots(slots, m)?;
    let n = states.len().checked_div(slots).unwrap_or(0);
    let mut vals: Vec<Var> = Vec::with_capacity(program.len());
    for op in program.ops() {
        let v = match *op {
            Op::State(s) => {
                let col = (0..n).map(|r| states[r * slots + s]).collect();
                tape.constant(col, n, 1)
            }
            Op::Coeff(c) => tape.select_cols(coeffs, &[c]),
            Op::Const(x) => tape.scalar_constant(T::lit(x)),
            Op::Add(a, b) => tape.add(vals[a], vals[b]),
            Op::Mul(a, b) => tape.mul(vals[a], vals[b]),
            Op::Sin(a) => tape.sin(vals[a]),
            Op::Cos(a) => tape.cos(vals[a]),
        };
        vals.push(v);
    }
    let out = *vals.last().expect("program is never empty");
    // A state-free program still yields one value per sample.
    let (r, _) = tape.shape(out);
    if r == n {
        Ok(out)
    } else {
        let zeros = tape.constant(vec![T::zero(); n], n, 1);
        Ok(tape.add(zeros, out))
    }
}
