use hytl_ltl::{
    all_words, enumerate_formulas, progress, satisfies, simplify, Assignment, Formula, FormulaTable, PropId, Verdict,
};
use proptest::prelude::*;

fn fold(word: &[Assignment], phi: &Formula) -> bool {
    let mut cur = simplify(phi);
    for sigma in word {
        cur = simplify(&progress(sigma, &cur));
    }
    cur.is_true()
}

fn formula(n_props: u16, depth: u32) -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        Just(Formula::True),
        Just(Formula::False),
        (0..n_props).prop_map(|p| Formula::Prop(PropId(p))),
        (0..n_props).prop_map(|p| Formula::Not(PropId(p))),
    ];
    leaf.prop_recursive(depth, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::and(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::or(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::until(l, r)),
            inner.clone().prop_map(Formula::next),
            inner.prop_map(Formula::eventually),
        ]
    })
}

fn word(n_props: usize, max_len: usize) -> impl Strategy<Value = Vec<Assignment>> {
    prop::collection::vec(
        (0..1u64 << n_props).prop_map(move |b| Assignment::from_bits(b, n_props)),
        0..=max_len,
    )
}

#[test]
fn fold_matches_semantics_on_two_props() {
    let words = all_words(2, 4);
    for phi in enumerate_formulas(2, 3, 400) {
        for w in &words {
            assert_eq!(fold(w, &phi), satisfies(w, &phi), "{phi:?} on {w:?}");
        }
    }
}

#[test]
fn simplify_preserves_semantics() {
    let words = all_words(3, 3);
    for phi in enumerate_formulas(3, 3, 300) {
        let s = simplify(&phi);
        for w in &words {
            assert_eq!(satisfies(w, &s), satisfies(w, &phi), "{phi:?} on {w:?}");
        }
    }
}

#[test]
fn progressed_formula_accepts_the_same_continuations() {
    let ab = hytl_ltl::Alphabet::new(&["a", "b"]).unwrap();
    let phi = hytl_ltl::parse("F (a & F b)", &ab).unwrap();
    let a = Assignment::from_props(&[PropId(0)], 2);
    let next = simplify(&progress(&a, &phi));
    assert_eq!(next.display(&ab).to_string(), "F b | F (a & F b)");
    for w in all_words(2, 4) {
        let mut full = vec![a];
        full.extend(&w);
        assert_eq!(satisfies(&w, &next), satisfies(&full, &phi));
    }
}

#[test]
fn table_fold_agrees_with_direct_fold() {
    let mut table = FormulaTable::new();
    let words = all_words(2, 3);
    for phi in enumerate_formulas(2, 3, 150) {
        let start = table.intern(simplify(&phi));
        for w in &words {
            let mut id = start;
            let mut verdict = if id == hytl_ltl::FormulaId::TRUE {
                Verdict::SatisfiedNow
            } else {
                Verdict::Ongoing
            };
            for sigma in w {
                let out = table.progress(id, sigma);
                id = out.next;
                verdict = out.verdict;
            }
            let expect = fold(w, &phi);
            assert_eq!(id == hytl_ltl::FormulaId::TRUE, expect);
            if !w.is_empty() {
                assert_eq!(verdict == Verdict::SatisfiedNow, expect);
            }
        }
    }
    assert!(table.len() < 5000, "{}", table.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_pairs_cross_oracle(phi in formula(3, 3), w in word(3, 5)) {
        prop_assert_eq!(fold(&w, &phi), satisfies(&w, &phi));
    }

    #[test]
    fn interning_is_consistent(phi in formula(3, 3), bits in 0u64..8) {
        let sigma = Assignment::from_bits(bits, 3);
        let mut t = FormulaTable::new();
        let x = t.intern(phi.clone());
        let y = t.intern(phi.clone());
        prop_assert_eq!(x, y);
        prop_assert_eq!(t.progress(x, &sigma), t.progress(y, &sigma));
    }
}
