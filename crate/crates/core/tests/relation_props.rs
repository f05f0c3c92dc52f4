use cjt_core::{Comparator, Predicate, Relation, Schema, SemiringKind, Value};
use cjt_testkit::{matches, oracle, random_relation};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

const K: SemiringKind = SemiringKind::IntCountRing;

fn rel(seed: u64, attrs: &[u32]) -> Relation {
    random_relation(&mut StdRng::seed_from_u64(seed), K, attrs, 0, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn join_ignores_input_order(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let (r, s, t) = (rel(s1, &[0, 1]), rel(s2, &[1, 2]), rel(s3, &[0, 3]));
        let base = Relation::join(&[&r, &s, &t]).unwrap();
        for perm in [[&s, &r, &t], [&t, &s, &r], [&s, &t, &r], [&t, &r, &s], [&r, &t, &s]] {
            prop_assert_eq!(&Relation::join(&perm).unwrap(), &base);
        }
    }

    #[test]
    fn join_matches_oracle(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let (r, s, t) = (rel(s1, &[0, 1]), rel(s2, &[1, 2]), rel(s3, &[2, 0]));
        let joined = Relation::join(&[&r, &s, &t]).unwrap();
        prop_assert!(matches(&joined, &oracle(&[&r, &s, &t], &[0, 1, 2], &[]), 0.0));
    }

    #[test]
    fn early_marginalization(s1 in any::<u64>(), s2 in any::<u64>()) {
        // A = 0 is only in R.
        let (r, t) = (rel(s1, &[0, 1]), rel(s2, &[1, 2]));
        let late = Relation::join(&[&r, &t]).unwrap().marginalize(&Schema::new([0])).unwrap();
        let early = Relation::join(&[&r.marginalize(&Schema::new([0])).unwrap(), &t]).unwrap();
        prop_assert_eq!(late, early);
    }

    #[test]
    fn marginalization_composes(s in any::<u64>()) {
        let r = rel(s, &[0, 1, 2]);
        let stepwise = r.marginalize(&Schema::new([0])).unwrap().marginalize(&Schema::new([1])).unwrap();
        prop_assert_eq!(stepwise, r.marginalize(&Schema::new([0, 1])).unwrap());
    }

    #[test]
    fn indicator_projection_never_grows(s in any::<u64>()) {
        let r = rel(s, &[0, 1, 2]);
        let ind = r.indicator_projection(&Schema::new([0, 2])).unwrap();
        prop_assert!(ind.len() <= r.len());
        prop_assert!(ind.rows().values().all(|v| *v == Value::Int(1)));
    }

    #[test]
    fn selection_commutes_with_join(s1 in any::<u64>(), s2 in any::<u64>(), c in 0u32..3) {
        let (r, t) = (rel(s1, &[0, 1]), rel(s2, &[1, 2]));
        let p = Predicate::new(1, Comparator::Le, c);
        let after = Relation::join(&[&r, &t]).unwrap().select(&p).unwrap();
        let before = Relation::join(&[&r.select(&p).unwrap(), &t]).unwrap();
        prop_assert_eq!(after, before);
    }

    #[test]
    fn add_then_subtract_restores(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (r, d) = (rel(s1, &[0, 1]), rel(s2, &[0, 1]));
        prop_assert_eq!(r.add(&d).unwrap().add(&d.negate().unwrap()).unwrap(), r);
    }
}

#[test]
fn identity_is_neutral_for_join() {
    let r = rel(1, &[0, 1]);
    let id = Relation::identity(Schema::new([1, 5]), K);
    assert_eq!(Relation::join(&[&r, &id]).unwrap(), r);
    assert!(id.select(&Predicate::new(1, Comparator::Eq, 0)).is_err());
}

#[test]
fn duplicate_rows_accumulate() {
    let r = Relation::from_rows(&[1, 0], K, [(vec![3, 4], Value::Int(2)), (vec![3, 4], Value::Int(5))]).unwrap();
    assert_eq!(r.len(), 1);
    // Columns are stored in ascending attribute order.
    assert_eq!(r.get(&[4, 3]), Some(&Value::Int(7)));
}
