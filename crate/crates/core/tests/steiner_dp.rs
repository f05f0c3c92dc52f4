use std::collections::BTreeSet;

use cjt_core::{BagId, JunctionHypertree, Schema, SemiringKind};
use cjt_testkit::{brute_min_steiner, connected};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_tree(rng: &mut StdRng, n: u32) -> JunctionHypertree {
    let mut jt = JunctionHypertree::new(SemiringKind::NatCount);
    for i in 0..n {
        jt.add_bag(Schema::new([i]));
    }
    for i in 1..n {
        jt.add_edge(rng.gen_range(0..i), i).unwrap();
    }
    jt
}

#[test]
fn dp_equals_exhaustive_search_on_single_bag_annotations() {
    let mut rng = StdRng::seed_from_u64(42);
    for _ in 0..200 {
        let n = rng.gen_range(1..=8);
        let jt = random_tree(&mut rng, n);
        let m = rng.gen_range(1..=5);
        let sets: Vec<BTreeSet<BagId>> = (0..m).map(|_| BTreeSet::from([rng.gen_range(0..n)])).collect();
        let k = rng.gen_range(0..=m);
        let (tree, size) = jt.min_steiner_dp(&sets, k).unwrap();
        assert_eq!(Some(size), brute_min_steiner(&jt, &sets, k), "sets {sets:?} k {k}");
        assert!(connected(&jt, &tree));
        assert!(sets.iter().filter(|s| !s.is_disjoint(&tree)).count() >= k);
    }
}

#[test]
fn dp_equals_exhaustive_search_on_multi_bag_annotations() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..500 {
        let n = rng.gen_range(1..=8);
        let jt = random_tree(&mut rng, n);
        let m = rng.gen_range(1..=5);
        let sets: Vec<BTreeSet<BagId>> = (0..m)
            .map(|_| (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..n)).collect())
            .collect();
        let k = rng.gen_range(0..=m);
        let (tree, size) = jt.min_steiner_dp(&sets, k).unwrap();
        assert_eq!(Some(size), brute_min_steiner(&jt, &sets, k), "sets {sets:?} k {k}");
        assert_eq!(tree.len(), size);
        assert!(connected(&jt, &tree));
        assert!(sets.iter().filter(|s| !s.is_disjoint(&tree)).count() >= k);
    }
}
