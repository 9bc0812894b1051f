//! Truncated forward jets carrying exactly the state derivatives the
//! Euler-Lagrange operator needs, recorded on the tape so parameter
//! gradients flow through them.
//!
//! For `J` joints and `N` samples a jet of an `(N, p)` quantity `u` holds
//! - `value`: `u`
//! - `first`: `(2J + 1)` stacked `(N, p)` blocks: `∂u/∂q_i`, `∂u/∂q̇_i`,
//!   then the time derivative `D_w u = Σ_j ∂u/∂q_j q̇_j + ∂u/∂q̇_j q̈_j`
//! - `cross`: `J` stacked blocks `∂(D_w u)/∂q̇_i`.
//!
//! Then `τ_i = cross_i − ∂u/∂q_i`.

use crate::autodiff::{Tape, Var};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct Derivs {
    pub first: Var,
    pub cross: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct Jet {
    pub value: Var,
    pub derivs: Option<Derivs>,
}

/// Multiplies each of the stacked `(N, p)` blocks of `stacked` by `single`.
fn bmul<T: Scalar>(t: &mut Tape<T>, stacked: Var, single: Var) -> Var {
    let (r, p) = t.shape(stacked);
    let (n, p2) = t.shape(single);
    assert_eq!(p, p2);
    if r == n {
        return t.mul(stacked, single);
    }
    let blocks = r / n;
    let s = t.reshape(stacked, blocks, n * p);
    let one = t.reshape(single, 1, n * p);
    let m = t.mul(s, one);
    t.reshape(m, r, p)
}

/// Context fixing sample and joint counts.
#[derive(Clone, Copy, Debug)]
pub struct JetShape {
    pub n: usize,
    pub joints: usize,
}

impl JetShape {
    /// `∂/∂q̇` blocks of `first`.
    fn qd_blocks<T: Scalar>(&self, t: &mut Tape<T>, first: Var) -> Var {
        t.slice_rows(first, self.joints * self.n, self.joints * self.n)
    }

    fn w_block<T: Scalar>(&self, t: &mut Tape<T>, first: Var) -> Var {
        t.slice_rows(first, 2 * self.joints * self.n, self.n)
    }

    /// Jet of the model inputs `(q, q̇)` followed by `extra` zero columns.
    ///
    /// `states` is `(N, 3J)` in slot order `(q, q̇, q̈)`.
    pub fn inputs<T: Scalar>(
        &self,
        t: &mut Tape<T>,
        states: &[T],
        extra: usize,
        derivs: bool,
    ) -> Jet {
        let (n, j) = (self.n, self.joints);
        let width = 2 * j + extra;
        let mut value = vec![T::zero(); n * width];
        for s in 0..n {
            value[s * width..s * width + 2 * j].copy_from_slice(&states[s * 3 * j..s * 3 * j + 2 * j]);
        }
        let value = t.constant(value, n, width);
        if !derivs {
            return Jet { value, derivs: None };
        }
        let mut first = vec![T::zero(); (2 * j + 1) * n * width];
        for s in 0..n {
            for i in 0..2 * j {
                first[(i * n + s) * width + i] = T::one();
            }
            let w = (2 * j * n + s) * width;
            // D_w q = q̇, D_w q̇ = q̈
            first[w..w + 2 * j].copy_from_slice(&states[s * 3 * j + j..s * 3 * j + 3 * j]);
        }
        let first = t.constant(first, (2 * j + 1) * n, width);
        let cross = t.constant(vec![T::zero(); j * n * width], j * n, width);
        Jet {
            value,
            derivs: Some(Derivs { first, cross }),
        }
    }

    pub fn sin<T: Scalar>(&self, t: &mut Tape<T>, u: Jet) -> Jet {
        self.trig(t, u, false)
    }

    pub fn cos<T: Scalar>(&self, t: &mut Tape<T>, u: Jet) -> Jet {
        self.trig(t, u, true)
    }

    // sin: f' = cos, f'' = −sin; cos: f' = −sin, f'' = −cos.
    fn trig<T: Scalar>(&self, t: &mut Tape<T>, u: Jet, is_cos: bool) -> Jet {
        let s = t.sin(u.value);
        let c = t.cos(u.value);
        let value = if is_cos { c } else { s };
        let Some(d) = u.derivs else {
            return Jet { value, derivs: None };
        };
        let (d1, d2) = if is_cos {
            let ns = t.neg(s);
            let nc = t.neg(c);
            (ns, nc)
        } else {
            let ns = t.neg(s);
            (c, ns)
        };
        let first = bmul(t, d.first, d1);
        let qd = self.qd_blocks(t, d.first);
        let w = self.w_block(t, d.first);
        let qdw = bmul(t, qd, w);
        let a = bmul(t, d.cross, d1);
        let b = bmul(t, qdw, d2);
        let cross = t.add(a, b);
        Jet {
            value,
            derivs: Some(Derivs { first, cross }),
        }
    }

    pub fn add<T: Scalar>(&self, t: &mut Tape<T>, a: Jet, b: Jet) -> Jet {
        let value = t.add(a.value, b.value);
        let derivs = match (a.derivs, b.derivs) {
            (Some(x), Some(y)) => Some(Derivs {
                first: t.add(x.first, y.first),
                cross: t.add(x.cross, y.cross),
            }),
            _ => None,
        };
        Jet { value, derivs }
    }

    pub fn mul<T: Scalar>(&self, t: &mut Tape<T>, a: Jet, b: Jet) -> Jet {
        let value = t.mul(a.value, b.value);
        let derivs = match (a.derivs, b.derivs) {
            (Some(x), Some(y)) => {
                let f1 = bmul(t, x.first, b.value);
                let f2 = bmul(t, y.first, a.value);
                let first = t.add(f1, f2);
                let c1 = bmul(t, x.cross, b.value);
                let c2 = bmul(t, y.cross, a.value);
                let xqd = self.qd_blocks(t, x.first);
                let yqd = self.qd_blocks(t, y.first);
                let xw = self.w_block(t, x.first);
                let yw = self.w_block(t, y.first);
                let c3 = bmul(t, xqd, yw);
                let c4 = bmul(t, yqd, xw);
                let s1 = t.add(c1, c2);
                let s2 = t.add(c3, c4);
                let cross = t.add(s1, s2);
                Some(Derivs { first, cross })
            }
            _ => None,
        };
        Jet { value, derivs }
    }

    pub fn select_cols<T: Scalar>(&self, t: &mut Tape<T>, u: Jet, idx: &[usize]) -> Jet {
        Jet {
            value: t.select_cols(u.value, idx),
            derivs: u.derivs.map(|d| Derivs {
                first: t.select_cols(d.first, idx),
                cross: t.select_cols(d.cross, idx),
            }),
        }
    }

    pub fn concat_cols<T: Scalar>(&self, t: &mut Tape<T>, parts: &[Jet]) -> Jet {
        let values: Vec<Var> = parts.iter().map(|p| p.value).collect();
        let value = t.concat_cols(&values);
        let derivs = if parts.iter().all(|p| p.derivs.is_some()) {
            let firsts: Vec<Var> = parts.iter().map(|p| p.derivs.unwrap().first).collect();
            let crosses: Vec<Var> = parts.iter().map(|p| p.derivs.unwrap().cross).collect();
            Some(Derivs {
                first: t.concat_cols(&firsts),
                cross: t.concat_cols(&crosses),
            })
        } else {
            None
        };
        Jet { value, derivs }
    }

    /// Right-multiplies every component by `cᵀ` (`c` is `(k, p)`).
    pub fn linear<T: Scalar>(&self, t: &mut Tape<T>, u: Jet, c: Var) -> Jet {
        Jet {
            value: t.matmul_nt(u.value, c),
            derivs: u.derivs.map(|d| Derivs {
                first: t.matmul_nt(d.first, c),
                cross: t.matmul_nt(d.cross, c),
            }),
        }
    }

    /// Sums the columns of every component into one column.
    pub fn sum_cols<T: Scalar>(&self, t: &mut Tape<T>, u: Jet) -> Jet {
        Jet {
            value: t.sum_cols(u.value),
            derivs: u.derivs.map(|d| Derivs {
                first: t.sum_cols(d.first),
                cross: t.sum_cols(d.cross),
            }),
        }
    }

    /// `(N, J)` torques of a single-column jet.
    pub fn torque<T: Scalar>(&self, t: &mut Tape<T>, u: Jet) -> Var {
        let d = u.derivs.expect("torque needs derivative components");
        assert_eq!(t.shape(u.value).1, 1);
        let (n, j) = (self.n, self.joints);
        let dq = t.slice_rows(d.first, 0, j * n);
        let tau = t.sub(d.cross, dq);
        // (J·N, 1) → (J, N) → (N, J)
        let r = t.reshape(tau, j, n);
        t.transpose(r)
    }
}
