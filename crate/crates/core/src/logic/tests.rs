use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;

fn bind(outputs: &[(&str, Vec<f64>)], params: &[(&str, f64)]) -> Bindings {
    Bindings {
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        outputs: outputs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect::<BTreeMap<_, _>>(),
    }
}

/// Atom `p[i] <= 0` whose clamped truth with sharpness 1 is `1 - p[i]`.
fn atom(i: usize) -> Formula {
    Formula::cmp(CmpOp::Le, Expr::output("N", "p", i), Expr::Num(0.0))
}

#[test]
fn godel_connectives_worked_values() {
    assert_eq!(godel_and(0.3, 0.7), 0.3);
    assert_eq!(godel_or(0.3, 0.7), 0.7);
    assert_eq!(godel_implies(0.2, 0.5), 1.0);
    assert_eq!(godel_implies(0.7, 0.5), 0.5);
}

/// Two-branch implication on crisp values: `1` if `x < y`, else `y`.
fn implies_table(x: bool, y: bool) -> bool {
    if !x && y {
        true
    } else {
        y
    }
}

#[test]
fn crisp_truth_tables() {
    // 4 input pairs x {and, or, implies, not}: 16 cases
    let mut cases = 0;
    for x in [false, true] {
        for y in [false, true] {
            let (fx, fy) = (x as u8 as f64, y as u8 as f64);
            assert_eq!(godel_and(fx, fy), (x && y) as u8 as f64);
            assert_eq!(godel_or(fx, fy), (x || y) as u8 as f64);
            assert_eq!(godel_implies(fx, fy), implies_table(x, y) as u8 as f64);
            // truth(atom i) = 1 - p[i]
            let b = bind(&[("p", vec![1.0 - fx, 1.0 - fy])], &[]);
            for (f, want) in [
                (Formula::and(atom(0), atom(1)), x && y),
                (Formula::or(atom(0), atom(1)), x || y),
                (Formula::implies(atom(0), atom(1)), implies_table(x, y)),
                (Formula::not(atom(0)), !x),
            ] {
                assert_eq!(truth(&f, &b, 1.0).unwrap(), want as u8 as f64);
                cases += 1;
            }
            // classical semantics differ only for false => false
            let imp = Formula::implies(atom(0), atom(1));
            assert_eq!(exact(&imp, &b).unwrap(), !x || y);
        }
    }
    assert_eq!(cases, 16);
    assert_eq!(godel_implies(0.0, 0.0), 0.0);
}

#[test]
fn formula_level_implication_cases() {
    // truths 0.25 and 0.75 are exact in binary
    let b = bind(&[("p", vec![0.75, 0.25])], &[]);
    assert_eq!(
        truth(&Formula::and(atom(0), atom(1)), &b, 1.0).unwrap(),
        0.25
    );
    assert_eq!(
        truth(&Formula::implies(atom(0), atom(1)), &b, 1.0).unwrap(),
        1.0
    );
    assert_eq!(
        truth(&Formula::implies(atom(1), atom(0)), &b, 1.0).unwrap(),
        0.25
    );
    assert_eq!(truth(&Formula::not(atom(1)), &b, 1.0).unwrap(), 0.25);
}

#[test]
fn atom_clamp_boundaries() {
    let f = Formula::cmp(CmpOp::Le, Expr::Var("a".into()), Expr::Var("b".into()));
    let loss =
        |a: f64, b: f64, g: f64| 1.0 - truth(&f, &bind(&[], &[("a", a), ("b", b)]), g).unwrap();
    assert_eq!(loss(-5.0, 1.0, 0.5), 0.0);
    assert_eq!(loss(1.5, 1.0, 0.5), 1.0);
    assert_eq!(loss(9.0, 1.0, 0.5), 1.0);
    assert_eq!(loss(1.25, 1.0, 0.5), 0.5);
    // sharpness 0 is crisp
    assert_eq!(loss(1.0 + 1e-12, 1.0, 0.0), 1.0);
    assert_eq!(loss(1.0, 1.0, 0.0), 0.0);
}

#[test]
fn robustness_body_half_sharpness_violation() {
    // |N(x) - N(x0)|_inf = delta + sharpness / 2 -> loss 1/2
    let (delta, gamma) = (0.25, 0.5);
    let body = Formula::robustness("N", "x", "x0", Expr::Var("delta".into()), 2);
    let b = bind(
        &[("x", vec![0.5, 0.1]), ("x0", vec![0.0, 0.0])],
        &[("delta", delta)],
    );
    assert_eq!(1.0 - truth(&body, &b, gamma).unwrap(), 0.5);
    assert!(!exact(&body, &b).unwrap());
}

#[test]
fn exact_examples() {
    let f = Formula::cmp(CmpOp::Le, Expr::Num(0.05), Expr::Num(0.1));
    assert!(exact(&f, &Bindings::default()).unwrap());
    let false_atom = Formula::cmp(CmpOp::Gt, Expr::Num(0.0), Expr::Num(1.0));
    let anything = Formula::cmp(CmpOp::Lt, Expr::Num(3.0), Expr::Num(2.0));
    assert!(exact(
        &Formula::implies(false_atom, anything),
        &Bindings::default()
    )
    .unwrap());
    let strict = Formula::cmp(CmpOp::Lt, Expr::Num(1.0), Expr::Num(1.0));
    assert!(!exact(&strict, &Bindings::default()).unwrap());
    // fuzzy semantics treat strict as non-strict
    assert_eq!(truth(&strict, &Bindings::default(), 0.1).unwrap(), 1.0);
}

#[test]
fn errors_are_reported() {
    let unbound = Formula::cmp(CmpOp::Le, Expr::Var("q".into()), Expr::Num(0.0));
    assert!(matches!(
        truth(&unbound, &Bindings::default(), 1.0),
        Err(LogicError::UnboundVariable(v)) if v == "q"
    ));
    let div = Formula::cmp(
        CmpOp::Le,
        Expr::bin(BinOp::Div, Expr::Num(1.0), Expr::Num(0.0)),
        Expr::Num(0.0),
    );
    assert!(matches!(
        exact(&div, &Bindings::default()),
        Err(LogicError::DivisionByZero)
    ));
    let idx = Formula::cmp(CmpOp::Le, Expr::output("N", "p", 5), Expr::Num(0.0));
    assert!(matches!(
        truth(&idx, &bind(&[("p", vec![0.0, 0.0])], &[]), 1.0),
        Err(LogicError::OutputIndex { index: 5, .. })
    ));
}

#[test]
fn env_wrappers_run_the_network() {
    use crate::netcore::{Layer, Linear, Network};
    use crate::tensor::Tensor;
    let net = Network::from_layers(vec![Layer::Linear(Linear {
        weight: Tensor::new(vec![1, 2], vec![1.0, -1.0]).unwrap(),
        bias: Tensor::new(vec![1], vec![0.0]).unwrap(),
    })])
    .unwrap();
    let body = Formula::robustness("N", "x", "x0", Expr::Num(0.25), 1);
    let mut env = Env::default();
    env.inputs
        .insert("x0".into(), Tensor::new(vec![2], vec![0.5, 0.5]).unwrap());
    env.inputs
        .insert("x".into(), Tensor::new(vec![2], vec![0.75, 0.5]).unwrap());
    assert!(eval_exact(&body, &env, &net).unwrap());
    assert_eq!(constraint_loss(&body, &env, &net, 0.25).unwrap(), 0.0);
    env.inputs
        .insert("x".into(), Tensor::new(vec![2], vec![1.0, 0.375]).unwrap());
    // |0.625 - 0| = 0.625, violation 0.375 over sharpness 0.5
    assert!(!eval_exact(&body, &env, &net).unwrap());
    assert_eq!(constraint_loss(&body, &env, &net, 0.5).unwrap(), 0.75);
    env.inputs.remove("x0");
    assert!(matches!(
        eval_exact(&body, &env, &net),
        Err(LogicError::UnboundInput(_))
    ));
}

// --- random formulas -------------------------------------------------------

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-2.0f64..2.0).prop_map(Expr::Num),
        (0usize..2).prop_map(|i| Expr::output("N", "x", i)),
        (0usize..2).prop_map(|i| Expr::output("N", "x0", i)),
        Just(Expr::Var("d".into())),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::abs),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::bin(BinOp::Add, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::bin(BinOp::Sub, a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::bin(BinOp::Mul, a, b)),
        ]
    })
}

fn arb_cmp() -> impl Strategy<Value = CmpOp> {
    prop_oneof![
        Just(CmpOp::Le),
        Just(CmpOp::Lt),
        Just(CmpOp::Ge),
        Just(CmpOp::Gt)
    ]
}

fn arb_formula(positive_only: bool) -> impl Strategy<Value = Formula> {
    let leaf = (arb_cmp(), arb_expr(), arb_expr()).prop_map(|(op, a, b)| Formula::cmp(op, a, b));
    leaf.prop_recursive(4, 16, 2, move |inner| {
        if positive_only {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::or(a, b)),
            ]
            .boxed()
        } else {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
                inner.prop_map(Formula::not),
            ]
            .boxed()
        }
    })
}

fn arb_bindings() -> impl Strategy<Value = Bindings> {
    (
        prop::collection::vec(-1.0f64..1.0, 2),
        prop::collection::vec(-1.0f64..1.0, 2),
        0.0f64..0.5,
    )
        .prop_map(|(x, x0, d)| bind(&[("x", x), ("x0", x0)], &[("d", d)]))
}

/// Crisp evaluation with the two-branch implication.
fn crisp_truth_oracle(f: &Formula, b: &Bindings) -> bool {
    match f {
        Formula::Cmp(..) => exact(f, b).unwrap(),
        Formula::And(x, y) => crisp_truth_oracle(x, b) && crisp_truth_oracle(y, b),
        Formula::Or(x, y) => crisp_truth_oracle(x, b) || crisp_truth_oracle(y, b),
        Formula::Implies(x, y) => implies_table(crisp_truth_oracle(x, b), crisp_truth_oracle(y, b)),
        Formula::Not(x) => !crisp_truth_oracle(x, b),
    }
}

fn atoms_crisp(f: &Formula, b: &Bindings, sharpness: f64) -> bool {
    f.atoms().iter().all(|(op, x, y)| {
        let (x, y) = (eval_expr(x, b).unwrap(), eval_expr(y, b).unwrap());
        let m = match op {
            CmpOp::Le | CmpOp::Lt => x - y,
            CmpOp::Ge | CmpOp::Gt => y - x,
        };
        m < 0.0 || m >= sharpness
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn truth_stays_in_unit_interval(f in arb_formula(false), b in arb_bindings(), g in 0.0f64..2.0) {
        let t = truth(&f, &b, g).unwrap();
        prop_assert!((0.0..=1.0).contains(&t));
    }

    #[test]
    fn crisp_atoms_give_crisp_truth(f in arb_formula(false), b in arb_bindings(), g in 0.01f64..1.0) {
        prop_assume!(atoms_crisp(&f, &b, g));
        let t = truth(&f, &b, g).unwrap();
        prop_assert_eq!(t, if crisp_truth_oracle(&f, &b) { 1.0 } else { 0.0 });
    }

    #[test]
    fn exact_true_with_satisfied_atoms_has_zero_loss(f in arb_formula(true), b in arb_bindings(), g in 0.01f64..1.0) {
        let all_satisfied = f.atoms().iter().all(|(op, x, y)| {
            let (x, y) = (eval_expr(x, &b).unwrap(), eval_expr(y, &b).unwrap());
            match op { CmpOp::Le | CmpOp::Lt => x <= y, CmpOp::Ge | CmpOp::Gt => x >= y }
        });
        if all_satisfied {
            prop_assert_eq!(truth(&f, &b, g).unwrap(), 1.0);
        }
        if exact(&f, &b).unwrap() && atoms_crisp(&f, &b, g) {
            prop_assert_eq!(truth(&f, &b, g).unwrap(), 1.0);
        }
    }

    #[test]
    fn widening_margins_never_lowers_truth(f in arb_formula(true), b in arb_bindings(), shift in 0.0f64..1.0) {
        // shifting every atom's margin up by `shift`
        fn widen(f: &Formula, s: f64) -> Formula {
            match f {
                Formula::Cmp(op, a, b) => match op {
                    CmpOp::Le | CmpOp::Lt => Formula::cmp(*op, a.clone(), Expr::bin(BinOp::Add, b.clone(), Expr::Num(s))),
                    CmpOp::Ge | CmpOp::Gt => Formula::cmp(*op, Expr::bin(BinOp::Add, a.clone(), Expr::Num(s)), b.clone()),
                },
                Formula::And(a, b) => Formula::and(widen(a, s), widen(b, s)),
                Formula::Or(a, b) => Formula::or(widen(a, s), widen(b, s)),
                Formula::Implies(a, b) => Formula::implies(widen(a, s), widen(b, s)),
                Formula::Not(a) => Formula::not(widen(a, s)),
            }
        }
        let before = truth(&f, &b, 0.3).unwrap();
        let after = truth(&widen(&f, shift), &b, 0.3).unwrap();
        prop_assert!(after >= before - 1e-12);
    }

    #[test]
    fn output_gradient_matches_finite_differences(f in arb_formula(false), b in arb_bindings()) {
        let (t, grads) = truth_with_grad(&f, &b, 0.7, AtomMode::Surrogate).unwrap();
        let h = 1e-6;
        for (name, out) in &b.outputs {
            for i in 0..out.len() {
                let mut up = b.clone();
                up.outputs.get_mut(name).unwrap()[i] += h;
                let mut dn = b.clone();
                dn.outputs.get_mut(name).unwrap()[i] -= h;
                let (tu, _) = truth_with_grad(&f, &up, 0.7, AtomMode::Surrogate).unwrap();
                let (td, _) = truth_with_grad(&f, &dn, 0.7, AtomMode::Surrogate).unwrap();
                // skip points where a min/max/abs/implication branch flips
                let smooth = ((tu - t) - (t - td)).abs() < 1e-9;
                if smooth {
                    let fd = (tu - td) / (2.0 * h);
                    prop_assert!((fd - grads[name][i]).abs() < 1e-5, "fd {} an {}", fd, grads[name][i]);
                }
            }
        }
    }
}
