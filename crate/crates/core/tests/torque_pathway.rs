use syrenets::batch::Batch;
use syrenets::mechanics::{inverse_dynamics_fd, oracle_rel_err, sample_dataset, DatasetSpec};
use syrenets::model::{ArchConfig, SymbolicModel, SyreNet};

fn cfg() -> ArchConfig {
    ArchConfig {
        joints: 2,
        layers: 2,
        heads: 2,
        latent: 4,
        sel_hidden: 8,
        ae_hidden: [8, 8],
    }
}

/// Jet torques against symbolic Euler-Lagrange of the frozen-coefficient
/// expression, and both against the numeric oracle.
#[test]
fn jet_symbolic_and_fd_torques_agree() {
    let cfg = cfg();
    let sym = SymbolicModel::build(&cfg);
    for seed in 0..4 {
        let net = SyreNet::<f64>::new(cfg, seed).unwrap();
        let ds = sample_dataset(&DatasetSpec::new(16, 100 + seed)).unwrap();
        let b = Batch::from_samples(&ds.samples);
        let (t, out) = net.evaluate(&b, true).unwrap();
        let c = net.coefficients(&t, &out);
        let mut store = sym.store.clone();
        let fhat = store.instantiate(sym.fhat, &c).unwrap();
        let tau_sym = store.euler_lagrange(fhat).unwrap();
        let prog = store.compile(fhat);
        let jet = t.value(out.tau.unwrap());
        for (i, s) in ds.samples.iter().enumerate() {
            let fd = inverse_dynamics_fd(
                |q, qd| prog.eval(&[q[0], q[1], qd[0], qd[1], 0.0, 0.0], &[]).unwrap(),
                &s.q,
                &s.qd,
                &s.qdd,
                1e-4,
            );
            for j in 0..2 {
                let a = jet[i * 2 + j];
                let e = store.eval(tau_sym[j], b.state(i), &[]).unwrap();
                assert!(oracle_rel_err(a, e) < 1e-10, "seed {seed} sample {i}: jet {a} vs symbolic {e}");
                assert!(oracle_rel_err(a, fd[j]) < 1e-5, "seed {seed} sample {i}: jet {a} vs fd {}", fd[j]);
            }
        }
    }
}

#[test]
fn torque_is_linear_in_acceleration() {
    // f̂ never reads q̈, so τ(q, q̇, q̈) = τ(q, q̇, 0) + M(q, q̇) q̈.
    let cfg = cfg();
    let net = SyreNet::<f64>::new(cfg, 7).unwrap();
    let ds = sample_dataset(&DatasetSpec::new(8, 1)).unwrap();
    let mut zero = ds.clone();
    let mut doubled = ds.clone();
    for (z, d) in zero.samples.iter_mut().zip(&mut doubled.samples) {
        z.qdd = [0.0; 2];
        d.qdd = [2.0 * d.qdd[0], 2.0 * d.qdd[1]];
    }
    let tau = |d: &syrenets::mechanics::Dataset| {
        let (t, out) = net.evaluate(&Batch::from_samples(&d.samples), true).unwrap();
        t.value(out.tau.unwrap()).to_vec()
    };
    let (t0, t1, t2) = (tau(&zero), tau(&ds), tau(&doubled));
    for k in 0..t0.len() {
        let lin = 2.0 * t1[k] - t0[k];
        assert!((t2[k] - lin).abs() < 1e-9 * t2[k].abs().max(1.0), "{} vs {}", t2[k], lin);
    }
}
