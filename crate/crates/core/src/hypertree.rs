//! Junction hypertree: bags, tree edges, relation mapping, message cache and
//! the versioned relation store.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use crate::annotation::AnnotationPlacement;
use crate::error::{Error, Result};
use crate::relation::{AttrId, Relation, Schema};
use crate::semiring::SemiringKind;
use crate::stats::Stats;

pub type BagId = u32;
pub type RelId = u32;
pub type Version = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bag {
    pub id: BagId,
    pub attrs: Schema,
    /// Created as a view shortcut; relations may never be mapped to it.
    pub is_empty_bag: bool,
}

/// Cached payload for one directed edge.
#[derive(Debug, Clone)]
pub struct Message {
    pub payload: Arc<Relation>,
    pub valid: bool,
    /// Digest of the annotations and relation versions in the source subtree
    /// at the time the payload was computed.
    pub signature: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JtOptions {
    /// Join indicator projections of the other relations into bags holding
    /// two or more relations. Incompatible with incremental maintenance.
    pub prune_dangling: bool,
    /// Keep each bag's absorption under the pivot once computed.
    pub absorption_cache: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct StoredRelation {
    pub name: String,
    pub versions: Vec<Arc<Relation>>,
    pub current: Version,
}

/// A broken structural property, reported with the offending ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NotATree { bags: usize, edges: usize },
    Disconnected { unreachable: Vec<BagId> },
    /// Relation attributes no bag holds, and bag attributes no relation has.
    VertexCoverage { uncovered: Vec<AttrId>, unused: Vec<AttrId> },
    EdgeCoverage { rel: RelId, bag: BagId, missing: Vec<AttrId> },
    RunningIntersection { attr: AttrId, bags: Vec<BagId> },
    EmptyBagHasRelation { bag: BagId, rel: RelId },
    UnmappedRelation { rel: RelId },
}

#[derive(Debug, Clone)]
pub struct JunctionHypertree {
    pub(crate) kind: SemiringKind,
    pub(crate) bags: BTreeMap<BagId, Bag>,
    pub(crate) adj: BTreeMap<BagId, BTreeSet<BagId>>,
    pub(crate) mapping: BTreeMap<RelId, BagId>,
    pub(crate) relations: BTreeMap<RelId, StoredRelation>,
    pub(crate) messages: BTreeMap<(BagId, BagId), Message>,
    pub(crate) pivot: Option<AnnotationPlacement>,
    pub(crate) absorptions: BTreeMap<BagId, Arc<Relation>>,
    pub(crate) options: JtOptions,
    pub(crate) stats: Stats,
    next_bag: BagId,
    next_rel: RelId,
}

impl JunctionHypertree {
    pub fn new(kind: SemiringKind) -> Self {
        JunctionHypertree {
            kind,
            bags: BTreeMap::new(),
            adj: BTreeMap::new(),
            mapping: BTreeMap::new(),
            relations: BTreeMap::new(),
            messages: BTreeMap::new(),
            pivot: None,
            absorptions: BTreeMap::new(),
            options: JtOptions::default(),
            stats: Stats::default(),
            next_bag: 0,
            next_rel: 0,
        }
    }

    /// One bag per relation, wired along a GYO elimination order. An ear
    /// is attached to the lowest-id relation covering its shared attributes.
    pub fn default_jt(kind: SemiringKind, rels: Vec<(String, Relation)>) -> Result<Self> {
        let mut jt = JunctionHypertree::new(kind);
        for (name, r) in rels {
            let schema = r.schema().clone();
            let rel = jt.add_relation(&name, r)?;
            let bag = jt.add_bag(schema);
            jt.assign(rel, bag)?;
        }
        // Bag ids equal relation ids here.
        let mut remaining: BTreeSet<BagId> = jt.bags.keys().copied().collect();
        'outer: while remaining.len() > 1 {
            for &e in &remaining {
                let others: Schema = remaining
                    .iter()
                    .filter(|&&f| f != e)
                    .fold(Schema::empty(), |s, f| s.union(&jt.bags[f].attrs));
                let shared = jt.bags[&e].attrs.intersect(&others);
                let witness = remaining
                    .iter()
                    .copied()
                    .find(|&f| f != e && shared.is_subset(&jt.bags[&f].attrs));
                if let Some(f) = witness {
                    jt.add_edge(e, f)?;
                    remaining.remove(&e);
                    continue 'outer;
                }
            }
            return Err(Error::Cyclic);
        }
        Ok(jt)
    }

    pub fn kind(&self) -> SemiringKind {
        self.kind
    }

    pub fn options(&self) -> JtOptions {
        self.options
    }

    pub fn set_options(&mut self, options: JtOptions) {
        if options != self.options {
            self.options = options;
            self.absorptions.clear();
        }
    }

    /// Cumulative counters since construction.
    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = Stats::default();
    }

    // ---- relation store ----

    pub fn add_relation(&mut self, name: &str, rel: Relation) -> Result<RelId> {
        if rel.kind() != self.kind {
            return Err(crate::semiring::SemiringError::Mismatch {
                expected: self.kind.to_string(),
                found: rel.kind().to_string(),
            }
            .into());
        }
        let id = self.next_rel;
        self.next_rel += 1;
        self.relations.insert(
            id,
            StoredRelation {
                name: name.to_string(),
                versions: vec![Arc::new(rel)],
                current: 0,
            },
        );
        Ok(id)
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelId> + '_ {
        self.relations.keys().copied()
    }

    pub fn relation_by_name(&self, name: &str) -> Option<RelId> {
        self.relations
            .iter()
            .find(|(_, s)| s.name == name)
            .map(|(id, _)| *id)
    }

    pub fn relation_name(&self, rel: RelId) -> Result<&str> {
        Ok(&self.stored(rel)?.name)
    }

    pub(crate) fn stored(&self, rel: RelId) -> Result<&StoredRelation> {
        self.relations.get(&rel).ok_or(Error::UnknownRelation(rel))
    }

    /// Current version of a relation.
    pub fn relation(&self, rel: RelId) -> Result<&Arc<Relation>> {
        let s = self.stored(rel)?;
        Ok(&s.versions[s.current as usize])
    }

    pub fn relation_version(&self, rel: RelId, version: Version) -> Result<&Arc<Relation>> {
        self.stored(rel)?
            .versions
            .get(version as usize)
            .ok_or(Error::UnknownVersion { rel, version })
    }

    pub fn current_version(&self, rel: RelId) -> Result<Version> {
        Ok(self.stored(rel)?.current)
    }

    pub fn version_count(&self, rel: RelId) -> Result<usize> {
        Ok(self.stored(rel)?.versions.len())
    }

    /// Stores a new version without making it current, so queries can
    /// address it through an update annotation.
    pub fn add_version(&mut self, rel: RelId, r: Relation) -> Result<Version> {
        let kind = self.kind;
        let s = self.relations.get_mut(&rel).ok_or(Error::UnknownRelation(rel))?;
        if r.schema() != s.versions[0].schema() || r.kind() != kind {
            return Err(Error::Schema(format!(
                "new version of {} must keep schema {} over {}",
                s.name,
                s.versions[0].schema(),
                kind
            )));
        }
        s.versions.push(Arc::new(r));
        Ok((s.versions.len() - 1) as Version)
    }

    /// Makes a stored version current without maintaining messages; every
    /// message whose source subtree holds the relation becomes invalid.
    pub fn set_current_version(&mut self, rel: RelId, version: Version) -> Result<()> {
        let s = self.relations.get_mut(&rel).ok_or(Error::UnknownRelation(rel))?;
        if version as usize >= s.versions.len() {
            return Err(Error::UnknownVersion { rel, version });
        }
        if s.current != version {
            s.current = version;
            if let Some(&bag) = self.mapping.get(&rel) {
                self.invalidate_away(bag);
            }
            self.absorptions.clear();
        }
        Ok(())
    }

    // ---- structure ----

    pub fn add_bag(&mut self, attrs: Schema) -> BagId {
        self.insert_bag(attrs, false)
    }

    fn insert_bag(&mut self, attrs: Schema, is_empty_bag: bool) -> BagId {
        let id = self.next_bag;
        self.next_bag += 1;
        self.bags.insert(
            id,
            Bag {
                id,
                attrs,
                is_empty_bag,
            },
        );
        self.adj.insert(id, BTreeSet::new());
        id
    }

    pub fn add_edge(&mut self, a: BagId, b: BagId) -> Result<()> {
        self.bag(a)?;
        self.bag(b)?;
        if a == b {
            return Err(Error::NotAnEdge(a, b));
        }
        self.adj.get_mut(&a).unwrap().insert(b);
        self.adj.get_mut(&b).unwrap().insert(a);
        Ok(())
    }

    fn remove_edge(&mut self, a: BagId, b: BagId) {
        if let Some(s) = self.adj.get_mut(&a) {
            s.remove(&b);
        }
        if let Some(s) = self.adj.get_mut(&b) {
            s.remove(&a);
        }
        self.messages.remove(&(a, b));
        self.messages.remove(&(b, a));
    }

    /// Maps a relation to a bag without validating; for building trees.
    pub fn assign(&mut self, rel: RelId, bag: BagId) -> Result<()> {
        self.stored(rel)?;
        self.bag(bag)?;
        self.mapping.insert(rel, bag);
        Ok(())
    }

    pub fn bag(&self, id: BagId) -> Result<&Bag> {
        self.bags.get(&id).ok_or(Error::UnknownBag(id))
    }

    pub fn bags(&self) -> impl Iterator<Item = &Bag> {
        self.bags.values()
    }

    pub fn bag_ids(&self) -> Vec<BagId> {
        self.bags.keys().copied().collect()
    }

    pub fn bag_count(&self) -> usize {
        self.bags.len()
    }

    pub fn neighbors(&self, id: BagId) -> impl Iterator<Item = BagId> + '_ {
        self.adj.get(&id).into_iter().flatten().copied()
    }

    pub fn degree(&self, id: BagId) -> usize {
        self.adj.get(&id).map_or(0, BTreeSet::len)
    }

    pub fn is_edge(&self, a: BagId, b: BagId) -> bool {
        self.adj.get(&a).is_some_and(|s| s.contains(&b))
    }

    /// Undirected edges as `(low, high)` pairs.
    pub fn edges(&self) -> Vec<(BagId, BagId)> {
        self.adj
            .iter()
            .flat_map(|(a, s)| s.iter().filter(move |b| *b > a).map(move |b| (*a, *b)))
            .collect()
    }

    pub fn directed_edges(&self) -> Vec<(BagId, BagId)> {
        self.adj
            .iter()
            .flat_map(|(a, s)| s.iter().map(move |b| (*a, *b)))
            .collect()
    }

    pub fn mapping(&self) -> &BTreeMap<RelId, BagId> {
        &self.mapping
    }

    pub fn bag_of(&self, rel: RelId) -> Result<BagId> {
        self.mapping.get(&rel).copied().ok_or(Error::UnknownRelation(rel))
    }

    pub fn relations_at(&self, bag: BagId) -> Vec<RelId> {
        self.mapping
            .iter()
            .filter(|(_, b)| **b == bag)
            .map(|(r, _)| *r)
            .collect()
    }

    /// Union of all mapped relation schemas.
    pub fn attributes(&self) -> Schema {
        self.mapping.keys().fold(Schema::empty(), |s, r| {
            s.union(self.relations[r].versions[0].schema())
        })
    }

    pub fn bags_containing(&self, a: AttrId) -> Vec<BagId> {
        self.bags
            .values()
            .filter(|b| b.attrs.contains(a))
            .map(|b| b.id)
            .collect()
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.bags.len();
        let edges = self.edges().len();
        if n > 0 && edges != n - 1 {
            out.push(Violation::NotATree { bags: n, edges });
        }
        if let Some(&start) = self.bags.keys().next() {
            let seen = self.reachable(start, |_| true);
            let unreachable: Vec<BagId> =
                self.bags.keys().copied().filter(|b| !seen.contains(b)).collect();
            if !unreachable.is_empty() {
                out.push(Violation::Disconnected { unreachable });
            }
        }
        for &rel in self.relations.keys() {
            if !self.mapping.contains_key(&rel) {
                out.push(Violation::UnmappedRelation { rel });
            }
        }
        let rel_attrs = self.attributes();
        let bag_attrs = self.bags.values().fold(Schema::empty(), |s, b| s.union(&b.attrs));
        let uncovered = rel_attrs.minus(&bag_attrs);
        let unused = bag_attrs.minus(&rel_attrs);
        if !uncovered.is_empty() || !unused.is_empty() {
            out.push(Violation::VertexCoverage {
                uncovered: uncovered.attrs().to_vec(),
                unused: unused.attrs().to_vec(),
            });
        }
        for (&rel, &bag) in &self.mapping {
            let schema = self.relations[&rel].versions[0].schema();
            let missing = schema.minus(&self.bags[&bag].attrs);
            if !missing.is_empty() {
                out.push(Violation::EdgeCoverage {
                    rel,
                    bag,
                    missing: missing.attrs().to_vec(),
                });
            }
            if self.bags[&bag].is_empty_bag {
                out.push(Violation::EmptyBagHasRelation { bag, rel });
            }
        }
        for a in bag_attrs.iter() {
            let holders = self.bags_containing(a);
            let seen = self.reachable(holders[0], |b| self.bags[&b].attrs.contains(a));
            if seen.len() != holders.len() {
                out.push(Violation::RunningIntersection { attr: a, bags: holders });
            }
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidJt(v))
        }
    }

    /// Inserts an empty bag adjacent to `neighbors`; edges between listed
    /// neighbors are rerouted through it. Rejected unless the result is a
    /// valid tree.
    pub fn add_empty_bag(&mut self, attrs: Schema, neighbors: &[BagId]) -> Result<BagId> {
        let mut next = self.clone();
        let mut cover = Schema::empty();
        for &n in neighbors {
            cover = cover.union(&next.bag(n)?.attrs);
        }
        if attrs.is_empty() || !attrs.is_subset(&cover) {
            return Err(Error::Schema(format!(
                "empty bag {attrs} must be a nonempty subset of its neighbors' attributes {cover}"
            )));
        }
        for (i, &a) in neighbors.iter().enumerate() {
            for &b in &neighbors[i + 1..] {
                next.remove_edge(a, b);
            }
        }
        let id = next.insert_bag(attrs, true);
        for &n in neighbors {
            next.add_edge(id, n)?;
        }
        next.check()?;
        next.invalidate_away(id);
        next.absorptions.clear();
        *self = next;
        Ok(id)
    }

    /// Removes a bag holding no relations, joining its neighbors to the
    /// lowest-id one among them.
    pub fn remove_empty_bag(&mut self, bag: BagId) -> Result<()> {
        self.bag(bag)?;
        if let Some(rel) = self.relations_at(bag).first() {
            return Err(Error::InvalidJt(vec![Violation::EmptyBagHasRelation {
                bag,
                rel: *rel,
            }]));
        }
        let mut next = self.clone();
        let nbrs: Vec<BagId> = next.neighbors(bag).collect();
        for &n in &nbrs {
            next.remove_edge(bag, n);
        }
        next.bags.remove(&bag);
        next.adj.remove(&bag);
        if let Some((&hub, rest)) = nbrs.split_first() {
            for &n in rest {
                next.add_edge(hub, n)?;
            }
        }
        next.check()?;
        for &n in &nbrs {
            next.invalidate_away(n);
        }
        next.absorptions.clear();
        *self = next;
        Ok(())
    }

    /// Remaps a relation; messages whose source subtree contains the old or
    /// new bag are invalidated.
    pub fn map_relation(&mut self, rel: RelId, bag: BagId) -> Result<()> {
        let old = self.bag_of(rel)?;
        self.bag(bag)?;
        if old == bag {
            return Ok(());
        }
        let mut next = self.clone();
        next.mapping.insert(rel, bag);
        next.check()?;
        next.invalidate_away(old);
        next.invalidate_away(bag);
        next.absorptions.clear();
        *self = next;
        Ok(())
    }

    /// Adds attributes to a bag (used when augmentation widens bags).
    pub(crate) fn widen_bag(&mut self, bag: BagId, attrs: &Schema) {
        if let Some(b) = self.bags.get_mut(&bag) {
            b.attrs = b.attrs.union(attrs);
        }
    }

    // ---- message cache ----

    pub fn messages(&self) -> &BTreeMap<(BagId, BagId), Message> {
        &self.messages
    }

    pub fn message(&self, u: BagId, v: BagId) -> Option<&Message> {
        self.messages.get(&(u, v))
    }

    pub fn pivot(&self) -> Option<&AnnotationPlacement> {
        self.pivot.as_ref()
    }

    /// Directed edges pointing away from `bag`, in breadth-first order.
    pub fn away_edges(&self, bag: BagId) -> Vec<(BagId, BagId)> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::from([bag]);
        let mut queue = VecDeque::from([bag]);
        while let Some(u) = queue.pop_front() {
            for v in self.neighbors(u) {
                if seen.insert(v) {
                    out.push((u, v));
                    queue.push_back(v);
                }
            }
        }
        out
    }

    /// Marks every message whose source subtree contains `bag` invalid;
    /// returns how many were valid before.
    pub fn invalidate_away(&mut self, bag: BagId) -> usize {
        let mut n = 0;
        for e in self.away_edges(bag) {
            if let Some(m) = self.messages.get_mut(&e) {
                if m.valid {
                    m.valid = false;
                    n += 1;
                }
            }
        }
        self.stats.messages_invalidated += n as u64;
        n
    }

    pub fn invalid_messages(&self) -> Vec<(BagId, BagId)> {
        self.directed_edges()
            .into_iter()
            .filter(|e| self.messages.get(e).is_none_or(|m| !m.valid))
            .collect()
    }

    // ---- tree utilities ----

    /// Bags reachable from `start` moving only through bags accepted by `ok`.
    pub(crate) fn reachable(&self, start: BagId, ok: impl Fn(BagId) -> bool) -> BTreeSet<BagId> {
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for v in self.neighbors(u) {
                if ok(v) && seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Bags on `u`'s side of the edge `u – v`.
    pub fn side_of(&self, u: BagId, v: BagId) -> BTreeSet<BagId> {
        self.reachable(u, |b| b != v)
    }

    /// Hop distance from `from` to every bag.
    pub fn distances(&self, from: BagId) -> BTreeMap<BagId, usize> {
        let mut d = BTreeMap::from([(from, 0)]);
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            let du = d[&u];
            for v in self.neighbors(u) {
                if let std::collections::btree_map::Entry::Vacant(e) = d.entry(v) {
                    e.insert(du + 1);
                    queue.push_back(v);
                }
            }
        }
        d
    }

    /// Smallest connected set of bags containing `terminals`.
    pub fn steiner_subtree(&self, terminals: &BTreeSet<BagId>) -> BTreeSet<BagId> {
        let mut keep: BTreeSet<BagId> = self.bags.keys().copied().collect();
        if terminals.is_empty() {
            return BTreeSet::new();
        }
        loop {
            let leaf = keep.iter().copied().find(|&b| {
                !terminals.contains(&b) && self.neighbors(b).filter(|n| keep.contains(n)).count() <= 1
            });
            match leaf {
                Some(b) => {
                    keep.remove(&b);
                }
                None => return keep,
            }
        }
    }

    /// Edges inside `tree` directed toward `root`, children before parents.
    pub fn edges_toward(&self, root: BagId, tree: &BTreeSet<BagId>) -> Vec<(BagId, BagId)> {
        let mut order = Vec::new();
        self.post_order(root, None, tree, &mut order);
        order
    }

    fn post_order(
        &self,
        u: BagId,
        parent: Option<BagId>,
        tree: &BTreeSet<BagId>,
        out: &mut Vec<(BagId, BagId)>,
    ) {
        for c in self.neighbors(u) {
            if Some(c) != parent && tree.contains(&c) {
                self.post_order(c, Some(u), tree, out);
                out.push((c, u));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiring::Value;

    const K: SemiringKind = SemiringKind::NatCount;

    fn unit(attrs: &[AttrId]) -> Relation {
        Relation::from_rows(attrs, K, [(vec![0; attrs.len()], Value::Nat(1))]).unwrap()
    }

    fn fig1() -> JunctionHypertree {
        JunctionHypertree::default_jt(
            K,
            vec![
                ("R".into(), unit(&[0, 1])),
                ("S".into(), unit(&[0, 2])),
                ("T".into(), unit(&[0, 3])),
            ],
        )
        .unwrap()
    }

    #[test]
    fn default_jt_builds_chain() {
        let jt = fig1();
        assert_eq!(jt.edges(), vec![(0, 1), (1, 2)]);
        assert!(jt.validate().is_empty());
    }

    #[test]
    fn default_jt_single_and_cyclic() {
        let jt = JunctionHypertree::default_jt(K, vec![("R".into(), unit(&[0, 1]))]).unwrap();
        assert_eq!(jt.bag_count(), 1);
        assert!(jt.edges().is_empty());
        let tri = JunctionHypertree::default_jt(
            K,
            vec![
                ("R".into(), unit(&[0, 1])),
                ("S".into(), unit(&[1, 2])),
                ("T".into(), unit(&[0, 2])),
            ],
        );
        assert!(matches!(tri, Err(Error::Cyclic)));
    }

    #[test]
    fn broken_running_intersection_is_reported() {
        let mut jt = JunctionHypertree::new(K);
        let r = jt.add_relation("R", unit(&[0, 1])).unwrap();
        let s = jt.add_relation("S", unit(&[1, 2])).unwrap();
        let t = jt.add_relation("T", unit(&[0, 2])).unwrap();
        let b0 = jt.add_bag(Schema::new([0, 1]));
        let b1 = jt.add_bag(Schema::new([1, 2]));
        let b2 = jt.add_bag(Schema::new([0, 2]));
        jt.assign(r, b0).unwrap();
        jt.assign(s, b1).unwrap();
        jt.assign(t, b2).unwrap();
        jt.add_edge(b0, b1).unwrap();
        jt.add_edge(b1, b2).unwrap();
        let v = jt.validate();
        assert_eq!(v, vec![Violation::RunningIntersection { attr: 0, bags: vec![0, 2] }]);
    }

    #[test]
    fn edge_coverage_violation() {
        let mut jt = JunctionHypertree::new(K);
        let r = jt.add_relation("R", unit(&[0, 1])).unwrap();
        let b = jt.add_bag(Schema::new([0]));
        jt.assign(r, b).unwrap();
        assert!(jt
            .validate()
            .contains(&Violation::EdgeCoverage { rel: r, bag: b, missing: vec![1] }));
    }

    #[test]
    fn redundant_triangle_design() {
        let mut jt = JunctionHypertree::new(K);
        let attrs = [[0, 1], [1, 2], [0, 2]];
        let mut bags = Vec::new();
        for (i, a) in attrs.iter().enumerate() {
            let r = jt.add_relation(&format!("R{i}"), unit(a)).unwrap();
            let b = jt.add_bag(Schema::new(*a));
            jt.assign(r, b).unwrap();
            bags.push(b);
        }
        let hub = jt.add_empty_bag(Schema::new([0, 1, 2]), &bags).unwrap();
        assert!(jt.validate().is_empty());
        assert_eq!(jt.degree(hub), 3);
    }

    #[test]
    fn empty_bag_must_be_covered() {
        let mut jt = fig1();
        assert!(jt.add_empty_bag(Schema::new([0, 9]), &[0, 1]).is_err());
        assert_eq!(jt.bag_count(), 3);
    }

    #[test]
    fn map_relation_rules() {
        let mut jt = JunctionHypertree::new(K);
        let ab = jt.add_relation("AB", unit(&[0, 1])).unwrap();
        let ac = jt.add_relation("AC", unit(&[0, 2])).unwrap();
        let s = jt.add_relation("S", unit(&[0])).unwrap();
        let b0 = jt.add_bag(Schema::new([0, 1]));
        let b1 = jt.add_bag(Schema::new([0, 2]));
        jt.assign(ab, b0).unwrap();
        jt.assign(ac, b1).unwrap();
        jt.assign(s, b0).unwrap();
        jt.add_edge(b0, b1).unwrap();
        jt.map_relation(s, b1).unwrap();
        assert_eq!(jt.bag_of(s).unwrap(), b1);
        assert!(jt.map_relation(ab, b1).is_err());
        jt.map_relation(s, b1).unwrap();
    }

    #[test]
    fn away_edges_cover_half() {
        let mut jt = JunctionHypertree::new(K);
        let ids: Vec<BagId> = (0..4).map(|i| jt.add_bag(Schema::new([i]))).collect();
        for w in ids.windows(2) {
            jt.add_edge(w[0], w[1]).unwrap();
        }
        assert_eq!(jt.away_edges(1), vec![(1, 0), (1, 2), (2, 3)]);
    }

    #[test]
    fn steiner_subtree_prunes_leaves() {
        let mut jt = JunctionHypertree::new(K);
        let ids: Vec<BagId> = (0..5).map(|i| jt.add_bag(Schema::new([i]))).collect();
        for w in ids.windows(2) {
            jt.add_edge(w[0], w[1]).unwrap();
        }
        let t = jt.steiner_subtree(&BTreeSet::from([1, 3]));
        assert_eq!(t, BTreeSet::from([1, 2, 3]));
        assert!(jt.steiner_subtree(&BTreeSet::new()).is_empty());
    }
}
