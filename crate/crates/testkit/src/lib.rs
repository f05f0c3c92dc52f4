//! Brute-force oracles and random instances for testing the engine.
//!
//! Nothing here calls into the engine's join, marginalization or planning
//! code: joins are enumerated tuple by tuple and predicates are evaluated
//! locally.

use std::collections::{BTreeMap, BTreeSet};

use cjt_core::{
    lift_sparse, AttrId, BagId, Comparator, Covariance, JunctionHypertree, Predicate, QuerySpec, Relation, RelId,
    SemiringKind, Tuple, Value,
};
use rand::seq::SliceRandom;
use rand::Rng;

/// Attribute assignment of one joined row.
pub type Assignment = BTreeMap<AttrId, u32>;

pub fn eval(p: &Predicate, v: u32) -> bool {
    match p.op {
        Comparator::Eq => v == p.value,
        Comparator::Ne => v != p.value,
        Comparator::Lt => v < p.value,
        Comparator::Le => v <= p.value,
        Comparator::Gt => v > p.value,
        Comparator::Ge => v >= p.value,
    }
}

/// Every row of the natural join with its product annotation, by
/// backtracking over the relations in order.
pub fn join_rows(rels: &[&Relation]) -> Vec<(Assignment, Value)> {
    fn go(rels: &[&Relation], i: usize, cur: &mut Assignment, val: Value, out: &mut Vec<(Assignment, Value)>) {
        if i == rels.len() {
            out.push((cur.clone(), val));
            return;
        }
        let attrs = rels[i].schema().attrs();
        'rows: for (t, v) in rels[i].rows() {
            let mut added = Vec::new();
            for (&a, &x) in attrs.iter().zip(t) {
                match cur.get(&a) {
                    Some(&y) if y != x => {
                        for a in added {
                            cur.remove(&a);
                        }
                        continue 'rows;
                    }
                    Some(_) => {}
                    None => {
                        cur.insert(a, x);
                        added.push(a);
                    }
                }
            }
            go(rels, i + 1, cur, val.mul(v).unwrap(), out);
            for a in added {
                cur.remove(&a);
            }
        }
    }
    let Some(first) = rels.first() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    go(rels, 0, &mut Assignment::new(), first.kind().one(), &mut out);
    out
}

/// `SELECT group, SUM(annotation) FROM rels WHERE preds GROUP BY group`.
/// Keys list group values in ascending attribute order; zero sums are
/// dropped. Predicates on attributes no relation has are ignored.
pub fn oracle(rels: &[&Relation], group: &[AttrId], preds: &[Predicate]) -> BTreeMap<Tuple, Value> {
    let mut group = group.to_vec();
    group.sort_unstable();
    group.dedup();
    let mut out: BTreeMap<Tuple, Value> = BTreeMap::new();
    for (row, v) in join_rows(rels) {
        if preds.iter().any(|p| row.get(&p.attr).is_some_and(|&x| !eval(p, x))) {
            continue;
        }
        let key: Tuple = group.iter().map(|g| row[g]).collect();
        let e = out.entry(key).or_insert_with(|| v.kind().zero());
        *e = e.add(&v).unwrap();
    }
    out.retain(|_, v| !v.is_zero());
    out
}

/// Whether an engine result equals an oracle map (relative tolerance for
/// covariance values, exact otherwise).
pub fn matches(rel: &Relation, want: &BTreeMap<Tuple, Value>, rel_tol: f64) -> bool {
    rel.len() == want.len()
        && want
            .iter()
            .all(|(k, v)| rel.get(k).is_some_and(|got| got.approx_eq(v, rel_tol)))
}

/// A random acyclic database.
#[derive(Debug, Clone)]
pub struct Instance {
    pub kind: SemiringKind,
    pub rels: Vec<(String, Relation)>,
}

impl Instance {
    pub fn relations(&self) -> Vec<&Relation> {
        self.rels.iter().map(|(_, r)| r).collect()
    }

    pub fn attrs(&self) -> Vec<AttrId> {
        let s: BTreeSet<AttrId> = self.rels.iter().flat_map(|(_, r)| r.schema().iter()).collect();
        s.into_iter().collect()
    }

    pub fn tree(&self) -> JunctionHypertree {
        JunctionHypertree::default_jt(self.kind, self.rels.clone()).expect("generated instances are acyclic")
    }

    /// Oracle answer for a query; relation ids are positions in `rels`.
    pub fn oracle(&self, q: &QuerySpec, versions: &BTreeMap<RelId, Relation>) -> BTreeMap<Tuple, Value> {
        let rels: Vec<&Relation> = self
            .rels
            .iter()
            .enumerate()
            .filter(|(i, _)| !q.exclude.contains(&(*i as RelId)))
            .map(|(i, (_, r))| versions.get(&(i as RelId)).unwrap_or(r))
            .collect();
        let group: Vec<AttrId> = q.group_by.iter().copied().collect();
        oracle(&rels, &group, &q.predicates)
    }
}

/// Random annotation. Covariance values lift one small integer into `slot`.
pub fn random_value(rng: &mut impl Rng, kind: SemiringKind, slot: usize) -> Value {
    match kind {
        SemiringKind::NatCount => Value::Nat(rng.gen_range(1..=3)),
        SemiringKind::IntCountRing => Value::Int(*[-2i64, -1, 1, 2, 3].choose(rng).unwrap()),
        SemiringKind::Covariance(d) => lift_sparse(d, &[(slot % d, rng.gen_range(-3i32..=3) as f64)]),
    }
}

pub fn random_relation(rng: &mut impl Rng, kind: SemiringKind, attrs: &[AttrId], slot: usize, domain: u32) -> Relation {
    let n = rng.gen_range(1..=30);
    let rows: Vec<(Tuple, Value)> = (0..n)
        .map(|_| {
            let t = attrs.iter().map(|_| rng.gen_range(0..domain)).collect();
            (t, random_value(rng, kind, slot))
        })
        .collect();
    Relation::from_rows(attrs, kind, rows).unwrap()
}

/// `n` relations; each after the first shares one or two attributes with
/// an earlier relation and introduces one or two new ones, so the schema
/// is acyclic by construction.
pub fn random_instance(rng: &mut impl Rng, kind: SemiringKind, n: usize) -> Instance {
    let domain = rng.gen_range(2..=4);
    let mut next: AttrId = 0;
    let mut schemas: Vec<Vec<AttrId>> = Vec::new();
    for i in 0..n {
        let mut attrs = Vec::new();
        if i > 0 {
            let parent = &schemas[rng.gen_range(0..i)];
            let share = rng.gen_range(1..=parent.len().min(2));
            attrs.extend(parent.choose_multiple(rng, share).copied());
        }
        let fresh = if i == 0 { rng.gen_range(1..=3) } else { rng.gen_range(1..=2) };
        for _ in 0..fresh {
            attrs.push(next);
            next += 1;
        }
        attrs.sort_unstable();
        schemas.push(attrs);
    }
    let rels = schemas
        .iter()
        .enumerate()
        .map(|(i, s)| (format!("R{i}"), random_relation(rng, kind, s, i, domain)))
        .collect();
    Instance { kind, rels }
}

/// Random group-by, predicates and (sometimes) one excluded relation.
pub fn random_query(rng: &mut impl Rng, inst: &Instance) -> QuerySpec {
    let mut q = QuerySpec::new();
    let n = inst.rels.len();
    if n > 1 && rng.gen_bool(0.2) {
        q = q.exclude(rng.gen_range(0..n) as RelId);
    }
    let attrs: Vec<AttrId> = inst
        .rels
        .iter()
        .enumerate()
        .filter(|(i, _)| !q.exclude.contains(&(*i as RelId)))
        .flat_map(|(_, (_, r))| r.schema().iter())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let g = rng.gen_range(0..=attrs.len().min(3));
    q = q.group_by(attrs.choose_multiple(rng, g).copied());
    for _ in 0..rng.gen_range(0..=2) {
        let a = *attrs.choose(rng).unwrap();
        let op = *[Comparator::Eq, Comparator::Ne, Comparator::Lt, Comparator::Ge].choose(rng).unwrap();
        q = q.filter(Predicate::new(a, op, rng.gen_range(0..4)));
    }
    q
}

/// Smallest connected bag set covering at least `k` annotations, where
/// annotation `i` is covered when the set meets `sets[i]`. Enumerates every
/// subset, so keep trees small.
pub fn brute_min_steiner(jt: &JunctionHypertree, sets: &[BTreeSet<BagId>], k: usize) -> Option<usize> {
    if k == 0 {
        return Some(0);
    }
    let ids = jt.bag_ids();
    assert!(ids.len() <= 16, "exhaustive search over {} bags", ids.len());
    let mut best: Option<usize> = None;
    for mask in 1u32..(1 << ids.len()) {
        let chosen: BTreeSet<BagId> = ids
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, b)| *b)
            .collect();
        if best.is_some_and(|b| chosen.len() >= b) || !connected(jt, &chosen) {
            continue;
        }
        if sets.iter().filter(|s| !s.is_disjoint(&chosen)).count() >= k {
            best = Some(chosen.len());
        }
    }
    best
}

pub fn connected(jt: &JunctionHypertree, set: &BTreeSet<BagId>) -> bool {
    let Some(&start) = set.iter().next() else {
        return true;
    };
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(b) = stack.pop() {
        for n in jt.neighbors(b) {
            if set.contains(&n) && seen.insert(n) {
                stack.push(n);
            }
        }
    }
    seen.len() == set.len()
}

/// Count, sums and second moments of raw feature columns over materialized
/// joined rows, each row weighted by its multiplicity. `features` maps an
/// attribute to its slot.
pub fn materialized_gram(rows: &[(Assignment, f64)], features: &[(AttrId, usize)], d: usize) -> Covariance {
    let mut c = Covariance::zero(d);
    for (row, w) in rows {
        let mut x = vec![0.0; d];
        for &(a, s) in features {
            x[s] = row[&a] as f64;
        }
        c.count += w;
        for i in 0..d {
            c.sums[i] += w * x[i];
            for j in 0..d {
                c.quad[i * d + j] += w * x[i] * x[j];
            }
        }
    }
    c
}

/// Largest relative difference between two aggregates, per component.
pub fn max_rel_err(a: &Covariance, b: &Covariance) -> f64 {
    let err = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1.0);
    let mut e = err(a.count, b.count);
    for (x, y) in a.sums.iter().zip(&b.sums).chain(a.quad.iter().zip(&b.quad)) {
        e = e.max(err(*x, *y));
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn oracle_on_a_hand_example() {
        let k = SemiringKind::NatCount;
        let r = Relation::from_rows(&[0, 1], k, [(vec![1, 1], Value::Nat(2)), (vec![1, 2], Value::Nat(3))]).unwrap();
        let s = Relation::from_rows(&[0, 2], k, [(vec![1, 7], Value::Nat(5)), (vec![2, 7], Value::Nat(1))]).unwrap();
        let total = oracle(&[&r, &s], &[], &[]);
        assert_eq!(total[&vec![]], Value::Nat(25));
        let by_b = oracle(&[&r, &s], &[1], &[Predicate::new(1, Comparator::Gt, 1)]);
        assert_eq!(by_b.len(), 1);
        assert_eq!(by_b[&vec![2]], Value::Nat(15));
    }

    #[test]
    fn instances_are_acyclic() {
        let mut rng = StdRng::seed_from_u64(7);
        for n in 1..7 {
            let inst = random_instance(&mut rng, SemiringKind::NatCount, n);
            assert!(inst.tree().validate().is_empty());
        }
    }
}
