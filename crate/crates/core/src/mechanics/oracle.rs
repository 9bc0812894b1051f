/// Inverse dynamics of an arbitrary Lagrangian `l(q, qd)` by central
/// differences: `τ_i = Σ_j ∂²L/∂q̇_i∂q_j q̇_j + Σ_j ∂²L/∂q̇_i∂q̇_j q̈_j − ∂L/∂q_i`.
///
/// Every second partial uses a nested central stencil, so the error is
/// `O(h²)` plus roundoff of order `ε·|L|/h²`.
pub fn inverse_dynamics_fd(
    l: impl Fn(&[f64], &[f64]) -> f64,
    q: &[f64],
    qd: &[f64],
    qdd: &[f64],
    h: f64,
) -> Vec<f64> {
    assert!(h > 0.0, "step must be positive");
    let n = q.len();
    assert!(qd.len() == n && qdd.len() == n, "state dimensions differ");
    let mut qw = q.to_vec();
    let mut vw = qd.to_vec();
    // L with q_j shifted by a and qd_i shifted by b.
    let mut shifted = |j: Option<(usize, bool)>, i: usize, a: f64, b: f64| {
        match j {
            Some((j, true)) => vw[j] += a,
            Some((j, false)) => qw[j] += a,
            None => {}
        }
        vw[i] += b;
        let v = l(&qw, &vw);
        qw.copy_from_slice(q);
        vw.copy_from_slice(qd);
        v
    };
    let mut tau = vec![0.0; n];
    for i in 0..n {
        let mut t = 0.0;
        for j in 0..n {
            for (vel, weight) in [(false, qd[j]), (true, qdd[j])] {
                let jj = Some((j, vel));
                let d = (shifted(jj, i, h, h) - shifted(jj, i, h, -h) - shifted(jj, i, -h, h)
                    + shifted(jj, i, -h, -h))
                    / (4.0 * h * h);
                t += d * weight;
            }
        }
        let dq = (shifted(Some((i, false)), i, h, 0.0) - shifted(Some((i, false)), i, -h, 0.0))
            / (2.0 * h);
        tau[i] = t - dq;
    }
    tau
}

/// `|a − b| / max(|a|, |b|, 1)`: relative for large torques, absolute near 0.
pub fn oracle_rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_particle() {
        let tau = inverse_dynamics_fd(|_, v| 0.5 * v[0] * v[0], &[0.2], &[0.7], &[1.3], 1e-4);
        assert!((tau[0] - 1.3).abs() < 1e-6);
    }

    #[test]
    fn cosine_potential() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let tau = inverse_dynamics_fd(|q, _| q[0].cos(), &[half_pi], &[0.4], &[-0.2], 1e-4);
        assert!((tau[0] - 1.0).abs() < 1e-7);
    }
}
