use super::jet::{Jet, JetShape};
use crate::autodiff::Tape;
use crate::expr::{ExprId, ExprStore};
use crate::scalar::Scalar;

/// Candidates produced from `n` inputs.
pub fn candidate_count(n: usize) -> usize {
    n * n + 3 * n
}

/// Index pairs `(a, b)` with `a ≤ b`, in row-major order.
pub fn pair_indices(n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut left = Vec::with_capacity(n * (n + 1) / 2);
    let mut right = Vec::with_capacity(n * (n + 1) / 2);
    for a in 0..n {
        for b in a..n {
            left.push(a);
            right.push(b);
        }
    }
    (left, right)
}

/// Candidate expressions in positional order: `sin u_a`, `cos u_a`,
/// `u_a + u_b`, `u_a · u_b` (pairs with `a ≤ b`).
pub fn candidate_exprs(s: &mut ExprStore, inputs: &[ExprId]) -> Vec<ExprId> {
    let n = inputs.len();
    let (left, right) = pair_indices(n);
    let mut out = Vec::with_capacity(candidate_count(n));
    out.extend(inputs.iter().map(|&u| s.sin(u)));
    out.extend(inputs.iter().map(|&u| s.cos(u)));
    for (&a, &b) in left.iter().zip(&right) {
        out.push(s.add(inputs[a], inputs[b]));
    }
    for (&a, &b) in left.iter().zip(&right) {
        out.push(s.mul(inputs[a], inputs[b]));
    }
    out
}

/// Candidate values (and jets) for an `(N, n)` input jet, same order as
/// [`candidate_exprs`].
pub fn candidate_jet<T: Scalar>(shape: &JetShape, t: &mut Tape<T>, u: Jet) -> Jet {
    let n = t.shape(u.value).1;
    let (left, right) = pair_indices(n);
    let s = shape.sin(t, u);
    let c = shape.cos(t, u);
    let a = shape.select_cols(t, u, &left);
    let b = shape.select_cols(t, u, &right);
    let sum = shape.add(t, a, b);
    let prod = shape.mul(t, a, b);
    shape.concat_cols(t, &[s, c, sum, prod])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::StateLayout;

    #[test]
    fn counts() {
        assert_eq!(candidate_count(2), 10);
        assert_eq!(candidate_count(4), 28);
        assert_eq!(candidate_count(16), 304);
    }

    #[test]
    fn two_input_order() {
        let mut s = ExprStore::new(StateLayout::new(2));
        let a = s.position(0);
        let b = s.position(1);
        let c = candidate_exprs(&mut s, &[a, b]);
        let names: Vec<String> = c.iter().map(|&e| s.pretty(e)).collect();
        let want = [
            "sin(q1)", "sin(q2)", "cos(q1)", "cos(q2)", "q1 + q1", "q1 + q2", "q2 + q2", "q1*q1",
            "q1*q2", "q2*q2",
        ];
        assert_eq!(names, want);
    }

    #[test]
    fn product_value() {
        let shape = JetShape { n: 1, joints: 1 };
        let mut t = Tape::<f64>::new();
        let v = t.constant(vec![2.0, 3.0], 1, 2);
        let j = candidate_jet(&shape, &mut t, Jet { value: v, derivs: None });
        assert_eq!(t.shape(j.value), (1, 10));
        assert_eq!(t.value(j.value)[8], 6.0);
    }
}
