use std::collections::{BTreeMap, BTreeSet};

use cjt_core::{
    AnnotationPlacement, Comparator, JtOptions, PlacementMode, Predicate, QuerySpec, Schema, SemiringKind,
    TraversalOrder,
};
use cjt_testkit::{matches, random_instance, random_query, Instance};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const KINDS: [SemiringKind; 3] = [
    SemiringKind::NatCount,
    SemiringKind::IntCountRing,
    SemiringKind::Covariance(3),
];

fn tol(kind: SemiringKind) -> f64 {
    match kind {
        SemiringKind::Covariance(_) => 1e-9,
        _ => 0.0,
    }
}

fn instances(seed: u64, n: usize) -> Vec<Instance> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let kind = KINDS[i % KINDS.len()];
            let rels = rng.gen_range(2..=5);
            random_instance(&mut rng, kind, rels)
        })
        .collect()
}

#[test]
fn absorption_at_every_bag_matches_oracle() {
    for inst in instances(1, 60) {
        let mut jt = inst.tree();
        let rep = jt.calibrate(&AnnotationPlacement::default()).unwrap();
        assert_eq!(rep.messages_computed(), 2 * (jt.bag_count() - 1));
        assert!(jt.is_calibrated());
        let want = inst.oracle(&QuerySpec::new(), &BTreeMap::new());
        for b in jt.bag_ids() {
            let got = jt.absorb(b).unwrap().project_onto(&Schema::empty()).unwrap();
            assert!(matches(&got, &want, tol(inst.kind)), "bag {b} of {inst:?}");
        }
    }
}

#[test]
fn delta_queries_match_oracle() {
    let mut rng = StdRng::seed_from_u64(2);
    for inst in instances(3, 60) {
        let mut jt = inst.tree();
        let pivot_q = random_query(&mut rng, &inst);
        let pivot = jt.place_annotations(&pivot_q, PlacementMode::SingleQuery { root: 0 }).unwrap();
        jt.calibrate(&pivot).unwrap();
        for _ in 0..5 {
            let q = random_query(&mut rng, &inst);
            let want = inst.oracle(&q, &BTreeMap::new());
            let out = jt.execute(&q).unwrap();
            assert!(matches(&out.result, &want, tol(inst.kind)), "{q:?} on {inst:?}");
            assert!((out.stats.messages_computed as usize) < jt.bag_count());
            assert_eq!(
                (out.stats.messages_computed + out.stats.messages_reused) as usize,
                out.plan.messages_required()
            );
            let scratch = jt.execute_scratch(&q, None).unwrap();
            assert!(matches(&scratch.result, &want, tol(inst.kind)));
        }
    }
}

#[test]
fn pivot_group_by_answers_without_messages() {
    let mut rng = StdRng::seed_from_u64(4);
    for inst in instances(5, 30) {
        let mut jt = inst.tree();
        let q = random_query(&mut rng, &inst);
        let pivot = jt.place_annotations(&q, PlacementMode::SingleQuery { root: 0 }).unwrap();
        jt.calibrate(&pivot).unwrap();
        let out = jt.execute(&q).unwrap();
        assert_eq!(out.stats.messages_computed, 0);
        assert!(matches(&out.result, &inst.oracle(&q, &BTreeMap::new()), tol(inst.kind)));
    }
}

#[test]
fn traversal_order_and_root_do_not_change_messages() {
    let mut rng = StdRng::seed_from_u64(6);
    for inst in instances(7, 30) {
        let mut jt = inst.tree();
        let q = random_query(&mut rng, &inst);
        let placement = jt.place_annotations(&q, PlacementMode::SingleQuery { root: 0 }).unwrap();
        jt.calibrate(&placement).unwrap();
        let base = jt.message_bytes();
        let bags = jt.bag_ids();
        for seed in 0..5 {
            let root = bags[rng.gen_range(0..bags.len())];
            jt.calibrate_with(&placement, root, TraversalOrder::Shuffled(seed)).unwrap();
            assert_eq!(jt.message_bytes(), base);
        }
    }
}

#[test]
fn reused_messages_equal_recomputed_ones() {
    let mut rng = StdRng::seed_from_u64(8);
    for inst in instances(9, 40) {
        let mut jt = inst.tree();
        jt.calibrate(&AnnotationPlacement::default()).unwrap();
        let q = random_query(&mut rng, &inst);
        let placement = jt.place_annotations(&q, PlacementMode::ReusePriority).unwrap();
        let mut fresh = jt.clone();
        fresh.calibrate(&placement).unwrap();
        for (u, v) in jt.directed_edges() {
            if jt.message_reusable(u, v, &placement).unwrap() {
                assert_eq!(
                    jt.message(u, v).unwrap().payload.canonical_bytes(),
                    fresh.message(u, v).unwrap().payload.canonical_bytes(),
                    "edge {u}->{v} for {q:?}"
                );
            }
        }
    }
}

#[test]
fn message_cache_only_holds_edges() {
    for inst in instances(10, 20) {
        let mut jt = inst.tree();
        jt.calibrate(&AnnotationPlacement::default()).unwrap();
        assert!(jt.messages().keys().all(|&(u, v)| jt.is_edge(u, v)));
    }
}

#[test]
fn empty_bag_round_trip_preserves_answers() {
    let mut rng = StdRng::seed_from_u64(11);
    for inst in instances(12, 30) {
        let mut jt = inst.tree();
        let Some((u, v)) = jt.edges().into_iter().next() else { continue };
        let sep = jt.bag(u).unwrap().attrs.intersect(&jt.bag(v).unwrap().attrs);
        let q = random_query(&mut rng, &inst);
        let before = jt.execute_scratch(&q, None).unwrap().result;
        let e = jt.add_empty_bag(sep, &[u, v]).unwrap();
        assert!(jt.validate().is_empty());
        jt.calibrate(&AnnotationPlacement::default()).unwrap();
        assert!(matches(&jt.execute(&q).unwrap().result, &before.rows().clone(), tol(inst.kind)));
        jt.remove_empty_bag(e).unwrap();
        assert!(jt.validate().is_empty());
        assert_eq!(jt.execute_scratch(&q, None).unwrap().result, before);
    }
}

#[test]
fn compensation_matches_direct_execution() {
    let mut rng = StdRng::seed_from_u64(13);
    for inst in instances(14, 40) {
        let attrs = inst.attrs();
        let d = attrs[rng.gen_range(0..attrs.len())];
        let mut jt = inst.tree();
        let pivot = jt
            .place_annotations(&QuerySpec::new().group_by([d]), PlacementMode::SingleQuery { root: 0 })
            .unwrap();
        jt.calibrate(&pivot).unwrap();
        let q = QuerySpec::new().filter(Predicate::new(attrs[0], Comparator::Ne, 0));
        let out = jt.execute(&q).unwrap();
        assert!(matches(&out.result, &inst.oracle(&q, &BTreeMap::new()), tol(inst.kind)));
    }
}

#[test]
fn single_relation_change_touches_one_bag() {
    let mut rng = StdRng::seed_from_u64(15);
    for inst in instances(16, 30) {
        let mut jt = inst.tree();
        jt.calibrate(&AnnotationPlacement::default()).unwrap();
        let rel = rng.gen_range(0..inst.rels.len()) as u32;
        let q = QuerySpec::new().exclude(rel);
        if inst.rels.len() < 2 {
            continue;
        }
        let out = jt.execute(&q).unwrap();
        assert_eq!(out.plan.tree_bags, BTreeSet::from([jt.bag_of(rel).unwrap()]));
        assert_eq!(out.stats.messages_computed, 0);
        assert!(matches(&out.result, &inst.oracle(&q, &BTreeMap::new()), tol(inst.kind)));
    }
}

#[test]
fn dangling_pruning_keeps_answers() {
    let mut rng = StdRng::seed_from_u64(17);
    for inst in instances(18, 30) {
        let mut jt = inst.tree();
        jt.set_options(JtOptions {
            prune_dangling: true,
            absorption_cache: true,
        });
        jt.calibrate(&AnnotationPlacement::default()).unwrap();
        for _ in 0..3 {
            let q = random_query(&mut rng, &inst);
            let out = jt.execute(&q).unwrap();
            assert!(matches(&out.result, &inst.oracle(&q, &BTreeMap::new()), tol(inst.kind)));
        }
    }
}
