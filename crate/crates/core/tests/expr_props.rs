use proptest::prelude::*;

use syrenets::autodiff::FdScheme;
use syrenets::expr::{parse, ExprId, ExprStore, StateLayout};
use syrenets::mechanics::{inverse_dynamics_fd, oracle_rel_err};

/// Expression tree over `(q1, q2, qd1, qd2)` used to drive the store.
#[derive(Clone, Debug)]
enum Tree {
    Var(usize),
    Const(f64),
    Add(Box<Tree>, Box<Tree>),
    Mul(Box<Tree>, Box<Tree>),
    Sin(Box<Tree>),
    Cos(Box<Tree>),
}

impl Tree {
    fn build(&self, s: &mut ExprStore) -> ExprId {
        match self {
            Tree::Var(i) => s.var(*i),
            Tree::Const(v) => s.constant(*v),
            Tree::Add(a, b) => {
                let (a, b) = (a.build(s), b.build(s));
                s.add(a, b)
            }
            Tree::Mul(a, b) => {
                let (a, b) = (a.build(s), b.build(s));
                s.mul(a, b)
            }
            Tree::Sin(a) => {
                let a = a.build(s);
                s.sin(a)
            }
            Tree::Cos(a) => {
                let a = a.build(s);
                s.cos(a)
            }
        }
    }
}

/// Constants on a grid that six significant digits print exactly.
fn tree(depth: u32) -> impl Strategy<Value = Tree> {
    let leaf = prop_oneof![
        (0usize..4).prop_map(Tree::Var),
        (-8i32..=8).prop_map(|k| Tree::Const(k as f64 / 4.0)),
    ];
    leaf.prop_recursive(depth, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Mul(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Tree::Sin(Box::new(a))),
            inner.prop_map(|a| Tree::Cos(Box::new(a))),
        ]
    })
}

fn state() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(-1.5f64..1.5)
}

fn store() -> ExprStore {
    ExprStore::new(StateLayout::new(2))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn print_parse_round_trip(t in tree(5), x in state()) {
        let mut s = store();
        let e = t.build(&mut s);
        let text = s.pretty(e);
        let len = s.len();
        prop_assert_eq!(parse(&mut s, &text).unwrap(), e, "{}", text);
        prop_assert_eq!(s.len(), len);

        let mut fresh = store();
        let f = parse(&mut fresh, &text).unwrap();
        let (a, b) = (s.eval(e, &x, &[]).unwrap(), fresh.eval(f, &x, &[]).unwrap());
        prop_assert!(close(a, b, 1e-12), "{} vs {}", a, b);
    }

    #[test]
    fn building_twice_is_hash_consed(t in tree(5)) {
        let mut s = store();
        let a = t.build(&mut s);
        let len = s.len();
        prop_assert_eq!(t.build(&mut s), a);
        prop_assert_eq!(s.len(), len);
    }

    #[test]
    fn commutative_operands_are_canonical(a in tree(3), b in tree(3)) {
        let mut s = store();
        let (x, y) = (a.build(&mut s), b.build(&mut s));
        prop_assert_eq!(s.add(x, y), s.add(y, x));
        prop_assert_eq!(s.mul(x, y), s.mul(y, x));
    }

    #[test]
    fn simplify_preserves_value(t in tree(5), x in state()) {
        let mut s = store();
        let e = t.build(&mut s);
        let simple = s.simplify(e, 0.0);
        let (a, b) = (s.eval(e, &x, &[]).unwrap(), s.eval(simple, &x, &[]).unwrap());
        prop_assert!(close(a, b, 1e-10), "{} -> {}: {} vs {}", s.pretty(e), s.pretty(simple), a, b);
        prop_assert!(s.size(simple) <= s.size(e));
    }

    #[test]
    fn symbolic_partials_match_finite_differences(t in tree(4), x in state(), slot in 0usize..4) {
        let mut s = store();
        let e = t.build(&mut s);
        let d = s.partial(e, slot).unwrap();
        let exact = s.eval(d, &x, &[]).unwrap();
        let fd = FdScheme::Ridders.derivative(
            |v| {
                let mut y = x;
                y[slot] = v;
                s.eval(e, &y, &[]).unwrap()
            },
            x[slot],
            0.1,
        );
        prop_assert!(close(exact, fd, 1e-7), "d/ds{} {}: {} vs {}", slot, s.pretty(e), exact, fd);
    }

    #[test]
    fn euler_lagrange_matches_oracle(t in tree(3), x in state()) {
        let mut s = store();
        let l = t.build(&mut s);
        let tau = s.euler_lagrange(l).unwrap();
        let prog = s.compile(l);
        let fd = inverse_dynamics_fd(
            |q, qd| prog.eval(&[q[0], q[1], qd[0], qd[1], 0.0, 0.0], &[]).unwrap(),
            &x[..2],
            &x[2..4],
            &x[4..],
            1e-4,
        );
        for (i, &ti) in tau.iter().enumerate() {
            let a = s.eval(ti, &x, &[]).unwrap();
            prop_assert!(oracle_rel_err(a, fd[i]) < 1e-5, "{}: τ{} {} vs {}", s.pretty(l), i, a, fd[i]);
        }
    }
}

#[test]
fn acceleration_in_a_lagrangian_is_rejected() {
    let mut s = store();
    let a = s.acceleration(0);
    assert!(s.euler_lagrange(a).is_err());
}

#[test]
fn free_particle_torque_is_its_acceleration() {
    let mut s = store();
    let l = parse(&mut s, "0.5*qd1*qd1").unwrap();
    let tau = s.euler_lagrange(l).unwrap();
    assert_eq!(s.pretty(tau[0]), "qdd1");
    assert_eq!(s.pretty(tau[1]), "0");
}
