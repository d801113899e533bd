use std::collections::BTreeSet;

use dbgdiff::campaign::generate_seed;
use dbgdiff::hdl::*;
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const AT: SourceLoc = SourceLoc::new(0, 1, 1);

fn expr_strategy(width: u32) -> impl Strategy<Value = Expr> {
    let leaf = any::<u64>().prop_map(move |v| Expr::literal(Literal::sized(width, v, LiteralBase::Hex), AT));
    leaf.prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            (0usize..3, inner.clone()).prop_map(|(k, e)| Expr::unary([UnaryOp::Not, UnaryOp::Neg, UnaryOp::LogicalNot][k], e)),
            (0usize..BinaryOp::ALL.len(), inner.clone(), inner).prop_map(|(k, l, r)| Expr::binary(BinaryOp::ALL[k], l, r)),
        ]
    })
}

/// Arbitrary-precision evaluation, reduced mod 2^width after every operator.
fn big_eval(e: &Expr, width: u32) -> BigUint {
    let modulus = BigUint::one() << width;
    let ones = &modulus - 1u32;
    let bool_val = |b: bool| if b { BigUint::one() } else { BigUint::zero() };
    match &e.kind {
        ExprKind::Literal(l) => BigUint::from(l.value) % &modulus,
        ExprKind::Ident(_) => unreachable!("constant trees only"),
        ExprKind::Paren(x) => big_eval(x, width),
        ExprKind::Unary(op, x) => {
            let a = big_eval(x, width);
            match op {
                UnaryOp::Not => &ones - &a,
                UnaryOp::Neg => (&modulus - &a) % &modulus,
                UnaryOp::LogicalNot => bool_val(a.is_zero()),
            }
        }
        ExprKind::Binary(op, l, r) => {
            let a = big_eval(l, width);
            let b = big_eval(r, width);
            match op {
                BinaryOp::Add => (a + b) % &modulus,
                BinaryOp::Sub => (a + &modulus - b) % &modulus,
                BinaryOp::And => a & b,
                BinaryOp::Or => a | b,
                BinaryOp::Xor => a ^ b,
                BinaryOp::Eq => bool_val(a == b),
                BinaryOp::Ne => bool_val(a != b),
                BinaryOp::Lt => bool_val(a < b),
                BinaryOp::Gt => bool_val(a > b),
                BinaryOp::Shl | BinaryOp::Shr if b >= BigUint::from(width) => BigUint::zero(),
                BinaryOp::Shl => (a << b.to_usize().unwrap()) % &modulus,
                BinaryOp::Shr => a >> b.to_usize().unwrap(),
            }
        }
    }
}

fn seed_unit(seed: u64, lo: u32, hi: u32) -> SourceUnit {
    generate_seed(&mut ChaCha8Rng::seed_from_u64(seed), lo..=hi).unwrap()
}

#[derive(Debug, Clone)]
enum Edit {
    Insert(u32, u32),
    Delete(BTreeSet<u32>),
}

fn edit_strategy() -> impl Strategy<Value = Edit> {
    prop_oneof![
        (1u32..60, 1u32..5).prop_map(|(a, n)| Edit::Insert(a, n)),
        prop::collection::btree_set(1u32..60, 1..6).prop_map(Edit::Delete),
    ]
}

fn to_map(e: &Edit) -> LineMap {
    match e {
        Edit::Insert(a, n) => LineMap::insertion(*a, *n),
        Edit::Delete(s) => LineMap::deletion(s),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn const_eval_matches_bignum((width, e) in (1u32..=64).prop_flat_map(|w| (Just(w), expr_strategy(w)))) {
        let got = const_eval(&e, width).unwrap();
        prop_assert_eq!(BigUint::from(got), big_eval(&e, width), "{}", render_expr(&e));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rendered_expressions_parse_back_to_the_same_value(e in expr_strategy(8)) {
        let text = format!("module m(output wire [7:0] o);\n  assign o = {};\nendmodule\n", render_expr(&e));
        let u = parse(&text).unwrap();
        let ItemKind::ContinuousAssign { rhs, .. } = &u.main().modules[0].items[0].kind else {
            panic!("expected an assign");
        };
        prop_assert_eq!(const_eval(rhs, 8).unwrap(), const_eval(&e, 8).unwrap());
    }

    #[test]
    fn composed_maps_apply_in_order(a in edit_strategy(), b in edit_strategy(), line in 1u32..80) {
        let (ma, mb) = (to_map(&a), to_map(&b));
        let c = ma.compose(&mb);
        prop_assert_eq!(c.map(line), ma.map(line).and_then(|x| mb.map(x)));
    }

    #[test]
    fn unmap_inverts_map(a in edit_strategy(), line in 1u32..80) {
        let m = to_map(&a);
        if let Some(k) = m.map(line) {
            prop_assert_eq!(m.unmap(k), Some(line));
        }
    }

    #[test]
    fn map_is_monotone(a in edit_strategy(), b in edit_strategy(), x in 1u32..80, y in 1u32..80) {
        let c = to_map(&a).compose(&to_map(&b));
        if let (Some(p), Some(q)) = (c.map(x.min(y)), c.map(x.max(y))) {
            prop_assert!(p <= q);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_designs_round_trip(seed in any::<u64>()) {
        let u = seed_unit(seed, 80, 200);
        let text = render(&u);
        let back = parse(&text).unwrap();
        prop_assert!(back.same_structure(&u));
        prop_assert_eq!(render(&back), text);
    }

    #[test]
    fn generated_designs_respect_line_budget(seed in any::<u64>(), lo in 40u32..300, span in 0u32..100) {
        let u = seed_unit(seed, lo, lo + span);
        let n = render(&u).lines().count() as u32;
        prop_assert!((lo..=lo + span).contains(&n), "{n} lines outside [{lo}, {}]", lo + span);
    }

    #[test]
    fn deleting_blank_lines_keeps_structure_modulo_lines(seed in any::<u64>()) {
        let mut u = seed_unit(seed, 80, 120);
        let before = render(&u);
        let occupied = edit::occupied_lines(u.main());
        let blank: BTreeSet<u32> = (1..=u.main().line_count).filter(|l| !occupied.contains(l)).collect();
        let map = edit::delete_lines(&mut u, 0, &blank);
        let after = render(&u);
        let kept: Vec<&str> = before.lines().filter(|l| !l.trim().is_empty()).collect();
        let now: Vec<&str> = after.lines().collect();
        prop_assert_eq!(kept, now);
        for l in occupied {
            prop_assert!(map.map(l).is_some());
        }
    }
}
