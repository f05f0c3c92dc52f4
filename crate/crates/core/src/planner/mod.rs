//! Query specs, annotation placement, and delta-query execution over a
//! calibrated tree.

mod dp;
mod steiner;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

pub use steiner::SteinerPlan;

use crate::annotation::{Annotation, AnnotationPlacement, PlacementRole};
use crate::calibration::Analysis;
use crate::error::{Error, Result};
use crate::hypertree::{BagId, JunctionHypertree, RelId, Version};
use crate::relation::{AttrId, Predicate, Relation, Schema};
use crate::stats::Stats;

/// `SELECT 𝒢, AGG FROM 𝒥 WHERE 𝒫 GROUP BY 𝒢` over the relations of a tree.
///
/// 𝒥 is every relation not in `exclude`, each at its current version unless
/// `versions` names another stored one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuerySpec {
    pub group_by: BTreeSet<AttrId>,
    pub exclude: BTreeSet<RelId>,
    pub versions: BTreeMap<RelId, Version>,
    pub predicates: Vec<Predicate>,
}

impl QuerySpec {
    pub fn new() -> Self {
        QuerySpec::default()
    }

    pub fn group_by(mut self, attrs: impl IntoIterator<Item = AttrId>) -> Self {
        self.group_by.extend(attrs);
        self
    }

    pub fn filter(mut self, p: Predicate) -> Self {
        self.predicates.push(p);
        self
    }

    pub fn exclude(mut self, rel: RelId) -> Self {
        self.exclude.insert(rel);
        self
    }

    pub fn version(mut self, rel: RelId, v: Version) -> Self {
        self.versions.insert(rel, v);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementMode {
    /// Standalone execution toward `root`: group-bys as close to the root as
    /// possible, selections pushed as far away as possible.
    SingleQuery { root: BagId },
    /// Reuse the calibrated pivot: annotations the pivot shares stay where
    /// the pivot has them, new ones go to the lowest-id eligible bag.
    ReusePriority,
}

#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub result: Relation,
    pub plan: SteinerPlan,
    pub stats: Stats,
}

/// A query resolved against one tree.
#[derive(Debug, Clone)]
pub(crate) struct Normalized {
    pub group: Schema,
    pub excluded: BTreeSet<RelId>,
    /// Versions that differ from the current one.
    pub updates: Vec<(RelId, Version)>,
    pub predicates: Vec<Predicate>,
}

impl JunctionHypertree {
    pub(crate) fn normalize(&self, q: &QuerySpec) -> Result<Normalized> {
        for &r in &q.exclude {
            self.stored(r)?;
        }
        let included: Vec<RelId> = self.relation_ids().filter(|r| !q.exclude.contains(r)).collect();
        if included.is_empty() {
            return Err(Error::InvalidQuery("every relation is excluded".into()));
        }
        let attrs = included
            .iter()
            .fold(Schema::empty(), |s, r| s.union(self.relations[r].versions[0].schema()));
        if let Some(g) = q.group_by.iter().find(|g| !attrs.contains(**g)) {
            return Err(Error::InvalidQuery(format!(
                "group-by attribute {g} is not in any joined relation"
            )));
        }
        let mut updates = Vec::new();
        for (&rel, &v) in &q.versions {
            self.relation_version(rel, v)?;
            if !q.exclude.contains(&rel) && v != self.current_version(rel)? {
                updates.push((rel, v));
            }
        }
        // Predicates on attributes no joined relation has are skipped.
        let mut predicates: Vec<Predicate> = q.predicates.iter().copied().filter(|p| attrs.contains(p.attr)).collect();
        predicates.sort_unstable();
        predicates.dedup();
        Ok(Normalized {
            group: q.group_by.iter().copied().collect(),
            excluded: q.exclude.clone(),
            updates,
            predicates,
        })
    }

    /// Whether the subtree on `i`'s side of `i – u` holds an included
    /// relation with attribute `a`.
    fn supplies(&self, i: BagId, u: BagId, a: AttrId, excluded: &BTreeSet<RelId>) -> bool {
        let side = self.side_of(i, u);
        self.mapping
            .iter()
            .any(|(r, b)| side.contains(b) && !excluded.contains(r) && self.relations[r].versions[0].schema().contains(a))
    }

    /// A selection on `a` can sit on `bag` if the bag's join is guaranteed to
    /// carry `a` whatever the root: the bag hosts an included relation with
    /// `a`, or at least two neighbor directions supply it.
    pub(crate) fn select_eligible(&self, bag: BagId, a: AttrId, excluded: &BTreeSet<RelId>) -> bool {
        if !self.bags.get(&bag).is_some_and(|b| b.attrs.contains(a)) {
            return false;
        }
        let local = self
            .relations_at(bag)
            .iter()
            .any(|r| !excluded.contains(r) && self.relations[r].versions[0].schema().contains(a));
        local
            || self
                .neighbors(bag)
                .filter(|&i| self.bags[&i].attrs.contains(a) && self.supplies(i, bag, a, excluded))
                .count()
                >= 2
    }

    /// Bags `a` may be placed on for this query.
    pub(crate) fn candidates(&self, a: &Annotation, excluded: &BTreeSet<RelId>) -> Result<Vec<BagId>> {
        Ok(match a {
            Annotation::Update { rel, .. } | Annotation::Exclude(rel) => vec![self.bag_of(*rel)?],
            Annotation::GroupBy(x) | Annotation::Marginalize(x) => self.bags_containing(*x),
            Annotation::Select(p) => self
                .bags_containing(p.attr)
                .into_iter()
                .filter(|&b| self.select_eligible(b, p.attr, excluded))
                .collect(),
        })
    }

    /// Bag-independent annotations a query needs.
    pub(crate) fn logical_annotations(&self, n: &Normalized) -> Vec<Annotation> {
        let mut out: Vec<Annotation> = n
            .updates
            .iter()
            .map(|&(rel, version)| Annotation::Update { rel, version })
            .chain(n.excluded.iter().map(|&r| Annotation::Exclude(r)))
            .chain(n.predicates.iter().map(|&p| Annotation::Select(p)))
            .chain(n.group.iter().map(Annotation::GroupBy))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn place_annotations(&self, q: &QuerySpec, mode: PlacementMode) -> Result<AnnotationPlacement> {
        let n = self.normalize(q)?;
        let wanted = self.logical_annotations(&n);
        let mut out = AnnotationPlacement::new(PlacementRole::Query);
        match mode {
            PlacementMode::SingleQuery { root } => {
                let dist = self.distances(root);
                for a in wanted {
                    let cands = self.candidates(&a, &n.excluded)?;
                    let pick = match a {
                        Annotation::Select(_) => cands.iter().copied().max_by_key(|b| (dist[b], std::cmp::Reverse(*b))),
                        _ => cands.iter().copied().min_by_key(|b| (dist[b], *b)),
                    };
                    out.add(pick.ok_or_else(|| no_bag(&a))?, a);
                }
            }
            PlacementMode::ReusePriority => {
                let pivot = self.pivot.as_ref().ok_or(Error::NotCalibrated)?;
                let mut unused: Vec<(BagId, Annotation)> = pivot.iter().map(|(b, a)| (b, *a)).collect();
                for a in wanted {
                    let cands = self.candidates(&a, &n.excluded)?;
                    let shared = unused.iter().position(|(b, x)| *x == a && cands.contains(b));
                    match shared {
                        Some(i) => {
                            let (b, _) = unused.remove(i);
                            out.add(b, a);
                        }
                        None => out.add(*cands.first().ok_or_else(|| no_bag(&a))?, a),
                    }
                }
                // Pivot-only group-bys stay put and are summed out on the
                // spot; other pivot-only annotations are dropped.
                for (b, a) in unused {
                    if let Annotation::GroupBy(x) = a {
                        out.add(b, a);
                        out.add(b, Annotation::Marginalize(x));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Answers `q` from the calibrated pivot, recomputing only messages
    /// inside the Steiner tree of bags whose annotations differ.
    pub fn execute(&mut self, q: &QuerySpec) -> Result<QueryOutcome> {
        let t0 = Instant::now();
        let group: Schema = q.group_by.iter().copied().collect();
        let placement = self.place_annotations(q, PlacementMode::ReusePriority)?;
        let plan = self.build_steiner(&placement)?;
        let planned = t0.elapsed();
        let mut out = self.execute_plan(plan, &group)?;
        out.stats.phases.insert(0, ("plan".into(), planned));
        Ok(out)
    }

    /// Executes a query placement produced elsewhere (for example by the
    /// cube's Steiner DP); `group` is the query's group-by set.
    pub fn execute_placement(&mut self, placement: &AnnotationPlacement, group: &Schema) -> Result<QueryOutcome> {
        self.check_placement(placement)?;
        let plan = self.build_steiner(placement)?;
        self.execute_plan(plan, group)
    }

    pub(crate) fn execute_plan(&mut self, plan: SteinerPlan, group: &Schema) -> Result<QueryOutcome> {
        let t0 = Instant::now();
        let pivot = self.pivot.clone().ok_or(Error::NotCalibrated)?;
        let pivot_an = self.analyze(&pivot)?;
        let mut stats = Stats::default();
        for &(i, u) in &plan.reused_edges {
            stats.messages_refreshed += self.ensure_fresh(i, u, &pivot, &pivot_an)?;
        }
        let refreshed = t0.elapsed();

        let t1 = Instant::now();
        let q_an = self.analyze(&plan.placement)?;
        let mut overlay: BTreeMap<(BagId, BagId), Arc<Relation>> = BTreeMap::new();
        for &(u, v) in &plan.recompute_edges {
            let (payload, tuples) = {
                let lookup = |i: BagId| match overlay.get(&(i, u)) {
                    Some(r) => Ok(r.clone()),
                    None => self.fresh_message(i, u, &pivot_an),
                };
                self.compute_message(u, v, &plan.placement, &q_an, &lookup)?
            };
            stats.messages_computed += 1;
            stats.tuples_processed += tuples;
            overlay.insert((u, v), Arc::new(payload));
        }
        let root = plan.root;
        let absorbed = if plan.tree_bags.is_empty() {
            self.absorb_pivot(root, &pivot, &pivot_an, &mut stats)?
        } else {
            let lookup = |i: BagId| match overlay.get(&(i, root)) {
                Some(r) => Ok(r.clone()),
                None => self.fresh_message(i, root, &pivot_an),
            };
            let (r, tuples) = self.absorb_with(root, &plan.placement, &lookup)?;
            stats.tuples_processed += tuples;
            Arc::new(r)
        };
        if let Some(g) = group.iter().find(|g| !absorbed.schema().contains(*g)) {
            return Err(Error::InvalidQuery(format!(
                "group-by attribute {g} did not reach the root bag {root}"
            )));
        }
        let result = absorbed.project_onto(group)?;
        stats.messages_reused = plan.reused_edges.len() as u64;
        stats.phase("refresh", refreshed);
        stats.phase("execute", t1.elapsed());
        self.stats.merge(&stats);
        Ok(QueryOutcome { result, plan, stats })
    }

    fn absorb_pivot(
        &mut self,
        bag: BagId,
        pivot: &AnnotationPlacement,
        an: &Analysis,
        stats: &mut Stats,
    ) -> Result<Arc<Relation>> {
        if let Some(r) = self.absorptions.get(&bag) {
            return Ok(r.clone());
        }
        let lookup = |i: BagId| self.fresh_message(i, bag, an);
        let (r, tuples) = self.absorb_with(bag, pivot, &lookup)?;
        stats.tuples_processed += tuples;
        let r = Arc::new(r);
        if self.options.absorption_cache {
            self.absorptions.insert(bag, r.clone());
        }
        Ok(r)
    }

    /// Recomputes `i → u` under the pivot if it is missing, invalid or
    /// stale, first refreshing the inputs it reads. Returns messages
    /// recomputed.
    pub(crate) fn ensure_fresh(
        &mut self,
        i: BagId,
        u: BagId,
        pivot: &AnnotationPlacement,
        an: &Analysis,
    ) -> Result<u64> {
        if self.fresh_message(i, u, an).is_ok() {
            return Ok(0);
        }
        let mut n = 0;
        let inputs: Vec<BagId> = self.neighbors(i).filter(|&k| k != u).collect();
        for k in inputs {
            n += self.ensure_fresh(k, i, pivot, an)?;
        }
        let tuples = self.pass_with(i, u, pivot, an)?;
        self.stats.tuples_processed += tuples;
        self.absorptions.clear();
        Ok(n + 1)
    }

    /// Upward pass from scratch toward `root` with a single-query placement;
    /// touches no cached message.
    pub fn execute_scratch(&self, q: &QuerySpec, root: Option<BagId>) -> Result<QueryOutcome> {
        let root = match root {
            Some(r) => r,
            None => *self.bags.keys().next().ok_or(Error::Schema("no bags".into()))?,
        };
        let placement = self.place_annotations(q, PlacementMode::SingleQuery { root })?;
        let an = self.analyze(&placement)?;
        let all: BTreeSet<BagId> = self.bags.keys().copied().collect();
        let edges = self.edges_toward(root, &all);
        let mut overlay: BTreeMap<(BagId, BagId), Arc<Relation>> = BTreeMap::new();
        let mut stats = Stats::default();
        let missing = |i, u| Error::MissingMessage(i, u);
        for &(u, v) in &edges {
            let (payload, tuples) = {
                let lookup = |i: BagId| overlay.get(&(i, u)).cloned().ok_or_else(|| missing(i, u));
                self.compute_message(u, v, &placement, &an, &lookup)?
            };
            stats.messages_computed += 1;
            stats.tuples_processed += tuples;
            overlay.insert((u, v), Arc::new(payload));
        }
        let lookup = |i: BagId| overlay.get(&(i, root)).cloned().ok_or_else(|| missing(i, root));
        let (absorbed, tuples) = self.absorb_with(root, &placement, &lookup)?;
        stats.tuples_processed += tuples;
        let group: Schema = q.group_by.iter().copied().collect();
        let result = absorbed.project_onto(&group)?;
        let plan = SteinerPlan {
            diff_bags: all.clone(),
            tree_bags: all,
            root,
            recompute_edges: edges,
            reused_edges: Vec::new(),
            placement,
        };
        Ok(QueryOutcome { result, plan, stats })
    }
}

fn no_bag(a: &Annotation) -> Error {
    Error::InvalidQuery(format!("no bag can host {a}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::Comparator;
    use crate::semiring::{SemiringKind, Value};

    const K: SemiringKind = SemiringKind::NatCount;
    const A: u32 = 0;
    const B: u32 = 1;
    const C: u32 = 2;
    const D: u32 = 3;

    fn rel(attrs: &[u32], rows: &[(&[u32], u64)]) -> Relation {
        Relation::from_rows(attrs, K, rows.iter().map(|(t, v)| (t.to_vec(), Value::Nat(*v)))).unwrap()
    }

    fn fig1() -> JunctionHypertree {
        JunctionHypertree::default_jt(
            K,
            vec![
                ("R".into(), rel(&[A, B], &[(&[1, 1], 2), (&[1, 2], 3), (&[2, 1], 1)])),
                ("S".into(), rel(&[A, C], &[(&[1, 1], 3), (&[1, 2], 5), (&[2, 1], 2)])),
                ("T".into(), rel(&[A, D], &[(&[1, 1], 5), (&[2, 1], 1)])),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_query_placement() {
        let jt = fig1();
        let q = QuerySpec::new().group_by([B]).filter(Predicate::new(C, Comparator::Eq, 1));
        let p = jt.place_annotations(&q, PlacementMode::SingleQuery { root: 2 }).unwrap();
        assert_eq!(p.at(0), &[Annotation::GroupBy(B)]);
        assert_eq!(p.at(1), &[Annotation::Select(Predicate::new(C, Comparator::Eq, 1))]);
        assert!(jt
            .place_annotations(&QuerySpec::new(), PlacementMode::SingleQuery { root: 0 })
            .unwrap()
            .is_empty());
    }

    #[test]
    fn pivot_query_needs_no_messages() {
        let mut jt = fig1();
        jt.calibrate(&AnnotationPlacement::default()).unwrap();
        let out = jt.execute(&QuerySpec::new()).unwrap();
        assert_eq!(out.stats.messages_computed, 0);
        assert_eq!(out.result.total().unwrap(), Value::Nat(202));
    }

    #[test]
    fn delta_query_matches_scratch() {
        let mut jt = fig1();
        jt.calibrate(&AnnotationPlacement::default()).unwrap();
        let q = QuerySpec::new().group_by([B]).filter(Predicate::new(C, Comparator::Eq, 1));
        let out = jt.execute(&q).unwrap();
        let scratch = jt.execute_scratch(&q, None).unwrap();
        assert_eq!(out.result, scratch.result);
        // a1: b1 2·3·5 = 30, b2 3·3·5 = 45; a2: b1 1·2·1 = 2.
        assert_eq!(out.result.get(&[1]), Some(&Value::Nat(32)));
        assert_eq!(out.result.get(&[2]), Some(&Value::Nat(45)));
        assert!(out.stats.messages_computed <= out.plan.tree_bags.len().saturating_sub(1) as u64);
    }

    #[test]
    fn unknown_predicate_attribute_is_skipped() {
        let jt = fig1();
        let q = QuerySpec::new().filter(Predicate::new(9, Comparator::Eq, 0));
        assert!(jt.place_annotations(&q, PlacementMode::SingleQuery { root: 0 }).unwrap().is_empty());
    }

    #[test]
    fn group_by_must_be_joined() {
        let jt = fig1();
        assert!(jt.normalize(&QuerySpec::new().group_by([D]).exclude(2)).is_err());
        assert!(jt.normalize(&QuerySpec::new().exclude(0).exclude(1).exclude(2)).is_err());
    }
}
