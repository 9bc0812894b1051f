use syrenets::autodiff::FdScheme;
use syrenets::baselines::{ElStencil, Mlp, MlpConfig, SysId};
use syrenets::batch::Batch;
use syrenets::expr::{ExprStore, StateLayout};
use syrenets::mechanics::{
    dp_lagrangian_expr, sample_dataset, DatasetSpec, PendulumParams,
};
use syrenets::model::{ArchConfig, SyreNet};
use syrenets::objective::{LossConfig, Mode};
use syrenets::training::{gradcheck_model, AnyModel, ModelCheck};

fn batch(n: usize, seed: u64) -> Batch<f64> {
    Batch::from_samples(&sample_dataset(&DatasetSpec::new(n, seed)).unwrap().samples)
}

fn small() -> ArchConfig {
    ArchConfig {
        joints: 2,
        layers: 2,
        heads: 2,
        latent: 4,
        sel_hidden: 8,
        ae_hidden: [8, 8],
    }
}

fn ridders(coords: usize, tol: f64) -> ModelCheck {
    ModelCheck {
        scheme: FdScheme::Ridders,
        ..ModelCheck::new(coords, 0.1, tol)
    }
}

#[test]
fn syrenets_gradients_both_modes() {
    let model = AnyModel::SyreNets(SyreNet::new(small(), 3).unwrap());
    let b = batch(16, 5);
    for mode in [Mode::Direct, Mode::Indirect] {
        let r = gradcheck_model(&model, &b, &LossConfig::with_mode(mode), &ridders(60, 1e-5)).unwrap();
        assert!(r.passed(), "{mode}: {:?}", r.failures);
        assert!(r.resolved >= 40, "{mode}: only {} of {} coordinates resolved", r.resolved, r.checked);
    }
}

#[test]
fn mlp_direct_gradients() {
    let cfg = MlpConfig {
        hidden_layers: 2,
        width: 12,
        ..MlpConfig::default()
    };
    let model = AnyModel::Nn(Mlp::new(cfg, 1).unwrap());
    let r = gradcheck_model(&model, &batch(16, 2), &LossConfig::with_mode(Mode::Direct), &ridders(20, 1e-5)).unwrap();
    assert!(r.passed(), "{:?}", r.failures);
    assert_eq!(r.checked, 20);
}

#[test]
fn sysid_gradients_both_modes() {
    let model = AnyModel::SysId(SysId::new(4, 9.81));
    let b = batch(32, 6);
    for mode in [Mode::Direct, Mode::Indirect] {
        let r = gradcheck_model(&model, &b, &LossConfig::with_mode(mode), &ridders(200, 1e-5)).unwrap();
        assert!(r.passed(), "{mode}: {:?}", r.failures);
    }
}

#[test]
fn stencil_is_exact_for_a_free_particle() {
    let b = batch(20, 3);
    let st = ElStencil::new(2, 1e-3);
    let tau = st.apply(&b, |x| 0.5 * x[2] * x[2]);
    for i in 0..b.n {
        let qdd1 = b.state(i)[4];
        assert!((tau[2 * i] - qdd1).abs() < 1e-8, "{} vs {qdd1}", tau[2 * i]);
        assert!(tau[2 * i + 1].abs() < 1e-8);
    }
}

#[test]
fn stencil_matches_symbolic_torques_and_converges_quadratically() {
    let p = PendulumParams::default();
    let ds = sample_dataset(&DatasetSpec::new(50, 8)).unwrap();
    let b = Batch::from_samples(&ds.samples);
    let mut s = ExprStore::new(StateLayout::new(2));
    let l = dp_lagrangian_expr(&mut s, &p);
    let tau = s.euler_lagrange(l).unwrap();
    let exact: Vec<f64> = (0..b.n)
        .flat_map(|i| tau.iter().map(|&t| s.eval(t, b.state(i), &[]).unwrap()).collect::<Vec<_>>())
        .collect();
    let lagr = |x: &[f64]| p.lagrangian(&x[..2], &x[2..4]);
    let err = |h: f64| {
        let fd = ElStencil::new(2, h).apply(&b, lagr);
        fd.iter()
            .zip(&exact)
            .map(|(a, e)| (a - e).abs() / e.abs().max(1.0))
            .fold(0.0f64, f64::max)
    };
    let e3 = err(1e-3);
    assert!(e3 < 1e-3, "stencil error {e3:e} at h = 1e-3");
    // Truncation dominates at these steps, so halving h quarters the error.
    let (coarse, fine) = (err(4e-2), err(2e-2));
    let ratio = coarse / fine;
    assert!((3.5..4.5).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn mlp_torque_uses_the_stencil() {
    let cfg = MlpConfig {
        hidden_layers: 2,
        width: 8,
        ..MlpConfig::default()
    };
    let mlp = Mlp::<f64>::new(cfg, 9).unwrap();
    let b = batch(6, 4);
    let mut t = syrenets::autodiff::Tape::new();
    let leaves = mlp.params.record_constant(&mut t);
    let tau = mlp.torque(&mut t, &leaves, &b);
    let tau = t.value(tau).to_vec();
    let eval = |x: &[f64]| {
        let mut t = syrenets::autodiff::Tape::new();
        let leaves = mlp.params.record_constant(&mut t);
        let x = t.constant(x.to_vec(), 1, 4);
        let y = mlp.forward(&mut t, &leaves, x);
        t.scalar_value(y)
    };
    let want = ElStencil::new(2, cfg.stencil_step).apply(&b, eval);
    for (a, w) in tau.iter().zip(&want) {
        assert!((a - w).abs() < 1e-9 * w.abs().max(1.0), "{a} vs {w}");
    }
}
