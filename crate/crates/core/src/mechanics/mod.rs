//! Double-pendulum ground truth, a numeric inverse-dynamics oracle and
//! dataset generation/persistence.

mod dataset;
mod oracle;

pub use dataset::{
    load_dataset, sample_dataset, sample_lagrangian_dataset, save_dataset, Dataset, DatasetSpec,
    StateSample, CSV_HEADER, JOINTS,
};
pub use oracle::{inverse_dynamics_fd, oracle_rel_err};

use crate::error::DatasetError;
use crate::expr::{ExprId, ExprStore};

/// Physical constants of the two-link pendulum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub g: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            m1: 3.0,
            m2: 1.0,
            l1: 2.67,
            l2: 1.67,
            g: 9.81,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let fields = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("g", self.g),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DatasetError::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Closed-form Lagrangian of two uniform rods.
    pub fn lagrangian(&self, q: &[f64], qd: &[f64]) -> f64 {
        let Self { m1, m2, l1, l2, g } = *self;
        0.5 * (m1 / 3.0 + m2) * l1 * l1 * qd[0] * qd[0]
            + 0.5 * (m2 / 3.0) * l2 * l2 * qd[1] * qd[1]
            + 0.5 * m2 * l1 * l2 * qd[0] * qd[1] * (q[0] - q[1]).cos()
            + (m1 / 2.0 + m2) * g * l1 * q[0].cos()
            + (m2 / 2.0) * g * l2 * q[1].cos()
    }

    /// The estimates `(m1, l1, m2, l2)` in the order used by the
    /// structural Lagrangian's coefficient slots.
    pub fn estimates(&self) -> [f64; 4] {
        [self.m1, self.l1, self.m2, self.l2]
    }
}

/// Lagrangian built from four parameter expressions and a gravity term.
fn pendulum_lagrangian(
    s: &mut ExprStore,
    m1: ExprId,
    l1: ExprId,
    m2: ExprId,
    l2: ExprId,
    g: f64,
) -> ExprId {
    let q1 = s.position(0);
    let q2 = s.position(1);
    let qd1 = s.velocity(0);
    let qd2 = s.velocity(1);
    let prod = |s: &mut ExprStore, k: f64, xs: &[ExprId]| {
        let mut acc = s.constant(k);
        for &x in xs.iter().rev() {
            acc = s.mul(x, acc);
        }
        acc
    };
    let dq = s.sub(q1, q2);
    let cdq = s.cos(dq);
    let c1 = s.cos(q1);
    let c2 = s.cos(q2);
    let terms = [
        prod(s, 1.0 / 6.0, &[m1, l1, l1, qd1, qd1]),
        prod(s, 0.5, &[m2, l1, l1, qd1, qd1]),
        prod(s, 1.0 / 6.0, &[m2, l2, l2, qd2, qd2]),
        prod(s, 0.5, &[m2, l1, l2, qd1, qd2, cdq]),
        prod(s, 0.5 * g, &[m1, l1, c1]),
        prod(s, g, &[m2, l1, c1]),
        prod(s, 0.5 * g, &[m2, l2, c2]),
    ];
    s.sum(terms)
}

/// Ground-truth Lagrangian with numeric constants, over `(q1, q2, qd1, qd2)`.
pub fn dp_lagrangian_expr(s: &mut ExprStore, p: &PendulumParams) -> ExprId {
    assert_eq!(s.layout().n_joints(), JOINTS, "pendulum needs a two-joint layout");
    let [m1, l1, m2, l2] = p.estimates().map(|v| s.constant(v));
    let raw = pendulum_lagrangian(s, m1, l1, m2, l2, p.g);
    s.simplify(raw, 0.0)
}

/// Structural Lagrangian whose masses and lengths are coefficient slots
/// `slot0..slot0+4` in the order `(m1, l1, m2, l2)`.
pub fn dp_lagrangian_structural(s: &mut ExprStore, slot0: usize, g: f64) -> ExprId {
    assert_eq!(s.layout().n_joints(), JOINTS, "pendulum needs a two-joint layout");
    let [m1, l1, m2, l2] = [0, 1, 2, 3].map(|i| s.coeff(slot0 + i));
    let raw = pendulum_lagrangian(s, m1, l1, m2, l2, g);
    s.simplify(raw, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::StateLayout;

    #[test]
    fn rest_and_moving_values() {
        let p = PendulumParams::default();
        let mut s = ExprStore::new(StateLayout::new(2));
        let l = dp_lagrangian_expr(&mut s, &p);
        let rest: f64 = s.eval(l, &[0.0; 6], &[]).unwrap();
        assert!((rest - 73.67310).abs() < 1e-5, "{rest}");
        let moving: f64 = s.eval(l, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0], &[]).unwrap();
        assert!((moving - 80.80200).abs() < 1e-5, "{moving}");
        assert!(s.state_slots(l).iter().all(|&slot| slot < 4));
    }

    #[test]
    fn expression_matches_closed_form_and_is_even() {
        let p = PendulumParams::default();
        let mut s = ExprStore::new(StateLayout::new(2));
        let l = dp_lagrangian_expr(&mut s, &p);
        for k in 0..20 {
            let x: Vec<f64> = (0..4).map(|i| ((k * 4 + i) as f64 * 0.731).sin() * 1.5).collect();
            let st = [x[0], x[1], x[2], x[3], 0.0, 0.0];
            let neg = st.map(|v| -v);
            let e = s.eval(l, &st, &[]).unwrap();
            assert!((e - p.lagrangian(&x[..2], &x[2..])).abs() < 1e-12);
            assert!((e - s.eval(l, &neg, &[]).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn structural_form_matches_numeric_form() {
        let p = PendulumParams::default();
        let mut s = ExprStore::new(StateLayout::new(2));
        let l = dp_lagrangian_structural(&mut s, 0, p.g);
        let st = [0.3, -0.7, 1.1, -0.4, 0.0, 0.0];
        let got = s.eval(l, &st, &p.estimates()).unwrap();
        assert!((got - p.lagrangian(&st[..2], &st[2..4])).abs() < 1e-12);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = PendulumParams {
            m2: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(PendulumParams::default().validate().is_ok());
    }
}
