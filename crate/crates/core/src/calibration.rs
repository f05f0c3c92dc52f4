//! Message generation, upward and downward passes, absorption, and the
//! calibration check.
//!
//! The message on `u → v` joins the messages `u` receives from every other
//! neighbor with the relations mapped to `u` (at their resolved versions,
//! minus exclusions), applies the selections annotated on `u`, and sums out
//! every attribute that is neither shared with `v` nor carried toward the
//! root by a group-by annotation somewhere in `u`'s subtree.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::annotation::{Annotation, AnnotationPlacement, PlacementRole};
use crate::error::{Error, Result};
use crate::hypertree::{BagId, JunctionHypertree, Message, RelId, Version};
use crate::relation::{Relation, Schema};

/// Order in which ready messages are scheduled during a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraversalOrder {
    /// Lowest ready edge first.
    #[default]
    Canonical,
    /// Uniformly random ready edge, seeded.
    Shuffled(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalibrationReport {
    pub root: BagId,
    pub upward_messages: usize,
    pub downward_messages: usize,
}

impl CalibrationReport {
    pub fn messages_computed(&self) -> usize {
        self.upward_messages + self.downward_messages
    }
}

/// Per-placement facts about every directed edge.
#[derive(Debug, Clone)]
pub(crate) struct Analysis {
    pub keys: BTreeMap<BagId, u64>,
    pub sigs: BTreeMap<(BagId, BagId), u64>,
    pub carried: BTreeMap<(BagId, BagId), Schema>,
}

/// A relation resolved for one placement: `None` when excluded.
pub(crate) type Resolved = (RelId, Option<Version>);

impl JunctionHypertree {
    /// Relations mapped to `bag` with the version each one contributes.
    pub(crate) fn resolved_at(&self, bag: BagId, placement: &AnnotationPlacement) -> Result<Vec<Resolved>> {
        let anns = placement.at(bag);
        let mut out = Vec::new();
        for rel in self.relations_at(bag) {
            if anns.contains(&Annotation::Exclude(rel)) {
                out.push((rel, None));
                continue;
            }
            let version = anns
                .iter()
                .find_map(|a| match a {
                    Annotation::Update { rel: r, version } if *r == rel => Some(*version),
                    _ => None,
                })
                .map_or_else(|| self.current_version(rel), Ok)?;
            self.relation_version(rel, version)?;
            out.push((rel, Some(version)));
        }
        Ok(out)
    }

    fn resolved_all(&self, placement: &AnnotationPlacement) -> Result<Vec<Resolved>> {
        let mut out = Vec::new();
        for bag in self.bags.keys() {
            out.extend(self.resolved_at(*bag, placement)?);
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Checks every annotation against the bag it sits on.
    pub fn check_placement(&self, placement: &AnnotationPlacement) -> Result<()> {
        for (bag, a) in placement.iter() {
            let attrs = &self.bag(bag)?.attrs;
            match a {
                Annotation::Update { rel, .. } | Annotation::Exclude(rel) => {
                    if self.bag_of(*rel)? != bag {
                        return Err(Error::InvalidQuery(format!(
                            "{a} must sit on bag {} where the relation is mapped, not {bag}",
                            self.bag_of(*rel)?
                        )));
                    }
                }
                Annotation::GroupBy(x) | Annotation::Marginalize(x) => {
                    if !attrs.contains(*x) {
                        return Err(Error::InvalidQuery(format!("{a} placed on bag {bag} lacking the attribute")));
                    }
                }
                Annotation::Select(p) => {
                    if !attrs.contains(p.attr) {
                        return Err(Error::InvalidQuery(format!("{a} placed on bag {bag} lacking the attribute")));
                    }
                }
            }
        }
        self.resolved_all(placement)?;
        Ok(())
    }

    pub(crate) fn analyze(&self, placement: &AnnotationPlacement) -> Result<Analysis> {
        let global = if self.options.prune_dangling {
            Some(self.resolved_all(placement)?)
        } else {
            None
        };
        let mut keys = BTreeMap::new();
        for &bag in self.bags.keys() {
            let resolved = self.resolved_at(bag, placement)?;
            let mut h = DefaultHasher::new();
            bag.hash(&mut h);
            placement.at(bag).hash(&mut h);
            resolved.hash(&mut h);
            if resolved.len() >= 2 {
                global.hash(&mut h);
            }
            keys.insert(bag, h.finish());
        }
        let mut a = Analysis {
            keys,
            sigs: BTreeMap::new(),
            carried: BTreeMap::new(),
        };
        for (u, v) in self.directed_edges() {
            self.analyze_edge(u, v, placement, &mut a);
        }
        Ok(a)
    }

    fn analyze_edge(&self, u: BagId, v: BagId, placement: &AnnotationPlacement, a: &mut Analysis) {
        if a.sigs.contains_key(&(u, v)) {
            return;
        }
        let mut h = DefaultHasher::new();
        a.keys[&u].hash(&mut h);
        (u, v).hash(&mut h);
        let mut carried: BTreeSet<u32> = BTreeSet::new();
        for i in self.neighbors(u).filter(|&i| i != v) {
            self.analyze_edge(i, u, placement, a);
            a.sigs[&(i, u)].hash(&mut h);
            carried.extend(a.carried[&(i, u)].iter());
        }
        for ann in placement.at(u) {
            if let Annotation::GroupBy(x) = ann {
                carried.insert(*x);
            }
        }
        for ann in placement.at(u) {
            if let Annotation::Marginalize(x) = ann {
                carried.remove(x);
            }
        }
        a.sigs.insert((u, v), h.finish());
        a.carried.insert((u, v), Schema::new(carried));
    }

    /// Joins the inputs of `bag` (messages from `from`, local relations),
    /// then applies the bag's selections. Returns the join and the number of
    /// input rows consumed.
    fn bag_join(
        &self,
        bag: BagId,
        from: impl Iterator<Item = BagId>,
        placement: &AnnotationPlacement,
        lookup: &dyn Fn(BagId) -> Result<Arc<Relation>>,
        replace: Option<(RelId, &Arc<Relation>)>,
    ) -> Result<(Relation, u64)> {
        let mut inputs: Vec<Arc<Relation>> = Vec::new();
        for i in from {
            inputs.push(lookup(i)?);
        }
        let resolved = self.resolved_at(bag, placement)?;
        let mut locals = 0;
        for (rel, version) in &resolved {
            if let Some(ver) = version {
                match replace {
                    Some((r, delta)) if r == *rel => inputs.push(delta.clone()),
                    _ => inputs.push(self.relation_version(*rel, *ver)?.clone()),
                }
                locals += 1;
            }
        }
        if self.options.prune_dangling && locals >= 2 {
            let u = inputs
                .iter()
                .filter(|r| !r.is_identity())
                .fold(Schema::empty(), |s, r| s.union(r.schema()));
            for (rel, version) in self.resolved_all(placement)? {
                let Some(ver) = version else { continue };
                let r = self.relation_version(rel, ver)?;
                if r.schema().intersects(&u) {
                    inputs.push(Arc::new(r.indicator_projection(&u)?));
                }
            }
        }
        let tuples: u64 = inputs.iter().map(|r| r.len() as u64).sum();
        let mut joined = if inputs.is_empty() {
            Relation::identity(self.bag(bag)?.attrs.clone(), self.kind)
        } else {
            let refs: Vec<&Relation> = inputs.iter().map(|r| r.as_ref()).collect();
            Relation::join(&refs)?
        };
        for ann in placement.at(bag) {
            if let Annotation::Select(p) = ann {
                if joined.is_identity() || !joined.schema().contains(p.attr) {
                    return Err(Error::InvalidQuery(format!(
                        "selection {p} on bag {bag}, whose inputs do not carry the attribute"
                    )));
                }
                joined = joined.select(p)?;
            }
        }
        Ok((joined, tuples))
    }

    pub(crate) fn compute_message(
        &self,
        u: BagId,
        v: BagId,
        placement: &AnnotationPlacement,
        analysis: &Analysis,
        lookup: &dyn Fn(BagId) -> Result<Arc<Relation>>,
    ) -> Result<(Relation, u64)> {
        self.compute_message_replacing(u, v, placement, analysis, lookup, None)
    }

    /// Message generation with one local relation swapped for another
    /// factor; with a delta in its place this yields the delta message.
    pub(crate) fn compute_message_replacing(
        &self,
        u: BagId,
        v: BagId,
        placement: &AnnotationPlacement,
        analysis: &Analysis,
        lookup: &dyn Fn(BagId) -> Result<Arc<Relation>>,
        replace: Option<(RelId, &Arc<Relation>)>,
    ) -> Result<(Relation, u64)> {
        if !self.is_edge(u, v) {
            return Err(Error::NotAnEdge(u, v));
        }
        let (joined, tuples) = self.bag_join(u, self.neighbors(u).filter(|&i| i != v), placement, lookup, replace)?;
        let sep = self.bag(u)?.attrs.intersect(&self.bag(v)?.attrs);
        let keep = sep.union(&analysis.carried[&(u, v)]);
        let out = joined.schema().minus(&keep);
        Ok((joined.marginalize(&out)?, tuples))
    }

    /// Join of every incoming message with the bag's relations, selections
    /// applied, nothing marginalized.
    pub(crate) fn absorb_with(
        &self,
        bag: BagId,
        placement: &AnnotationPlacement,
        lookup: &dyn Fn(BagId) -> Result<Arc<Relation>>,
    ) -> Result<(Relation, u64)> {
        self.bag_join(bag, self.neighbors(bag), placement, lookup, None)
    }

    /// Message `i → u` from the cache if it is valid and current.
    pub(crate) fn fresh_message(&self, i: BagId, u: BagId, analysis: &Analysis) -> Result<Arc<Relation>> {
        match self.messages.get(&(i, u)) {
            Some(m) if m.valid && m.signature == analysis.sigs[&(i, u)] => Ok(m.payload.clone()),
            _ => Err(Error::MissingMessage(i, u)),
        }
    }

    /// Computes `u → v` from fresh cached inputs and stores it; returns the
    /// input rows consumed. Counters are left to the caller.
    pub(crate) fn pass_with(
        &mut self,
        u: BagId,
        v: BagId,
        placement: &AnnotationPlacement,
        analysis: &Analysis,
    ) -> Result<u64> {
        let (payload, tuples) = {
            let lookup = |i: BagId| self.fresh_message(i, u, analysis);
            self.compute_message(u, v, placement, analysis, &lookup)?
        };
        self.messages.insert(
            (u, v),
            Message {
                payload: Arc::new(payload),
                valid: true,
                signature: analysis.sigs[&(u, v)],
            },
        );
        Ok(tuples)
    }

    /// Computes and caches the message `u → v`; every other message into
    /// `u` must already be cached and valid.
    pub fn pass_message(&mut self, u: BagId, v: BagId, placement: &AnnotationPlacement) -> Result<()> {
        let analysis = self.analyze(placement)?;
        let tuples = self.pass_with(u, v, placement, &analysis)?;
        self.stats.messages_computed += 1;
        self.stats.tuples_processed += tuples;
        Ok(())
    }

    /// Computes `targets` in a dependency-respecting order.
    fn run_schedule(
        &mut self,
        targets: Vec<(BagId, BagId)>,
        placement: &AnnotationPlacement,
        analysis: &Analysis,
        order: TraversalOrder,
    ) -> Result<usize> {
        let mut rng = match order {
            TraversalOrder::Shuffled(seed) => Some(StdRng::seed_from_u64(seed)),
            TraversalOrder::Canonical => None,
        };
        let mut pending: BTreeSet<(BagId, BagId)> = targets.into_iter().collect();
        let mut done = 0;
        while !pending.is_empty() {
            let ready: Vec<(BagId, BagId)> = pending
                .iter()
                .copied()
                .filter(|&(u, v)| {
                    self.neighbors(u)
                        .filter(|&i| i != v)
                        .all(|i| !pending.contains(&(i, u)))
                })
                .collect();
            let pick = match rng.as_mut() {
                Some(r) => ready[r.gen_range(0..ready.len())],
                None => ready[0],
            };
            let tuples = self.pass_with(pick.0, pick.1, placement, analysis)?;
            self.stats.messages_computed += 1;
            self.stats.tuples_processed += tuples;
            pending.remove(&pick);
            done += 1;
        }
        Ok(done)
    }

    /// Messages toward `root` along every edge.
    pub fn upward(&mut self, root: BagId, placement: &AnnotationPlacement, order: TraversalOrder) -> Result<usize> {
        self.bag(root)?;
        self.check_placement(placement)?;
        let analysis = self.analyze(placement)?;
        let all = self.bags.keys().copied().collect();
        let targets = self.edges_toward(root, &all);
        self.run_schedule(targets, placement, &analysis, order)
    }

    /// Messages away from `root`; the upward pass must be in place.
    pub fn downward(&mut self, root: BagId, placement: &AnnotationPlacement, order: TraversalOrder) -> Result<usize> {
        self.bag(root)?;
        let analysis = self.analyze(placement)?;
        let targets = self.away_edges(root);
        self.run_schedule(targets, placement, &analysis, order)
    }

    /// Calibrates for `placement` rooted at the lowest bag id.
    pub fn calibrate(&mut self, placement: &AnnotationPlacement) -> Result<CalibrationReport> {
        let root = *self.bags.keys().next().ok_or(Error::Schema("no bags".into()))?;
        self.calibrate_with(placement, root, TraversalOrder::Canonical)
    }

    /// Upward then downward pass; the placement becomes the pivot.
    pub fn calibrate_with(
        &mut self,
        placement: &AnnotationPlacement,
        root: BagId,
        order: TraversalOrder,
    ) -> Result<CalibrationReport> {
        self.check()?;
        self.check_placement(placement)?;
        let mut pivot = placement.clone();
        pivot.role = PlacementRole::Pivot;
        self.messages.clear();
        self.absorptions.clear();
        self.pivot = Some(pivot.clone());
        let up = self.upward(root, &pivot, order)?;
        let down = self.downward(root, &pivot, order)?;
        Ok(CalibrationReport {
            root,
            upward_messages: up,
            downward_messages: down,
        })
    }

    /// Absorption at `bag` under the pivot, from cached messages.
    pub fn absorb(&self, bag: BagId) -> Result<Relation> {
        let pivot = self.pivot.as_ref().ok_or(Error::NotCalibrated)?;
        if let Some(r) = self.absorptions.get(&bag) {
            return Ok(r.as_ref().clone());
        }
        let analysis = self.analyze(pivot)?;
        let lookup = |i: BagId| self.fresh_message(i, bag, &analysis);
        Ok(self.absorb_with(bag, pivot, &lookup)?.0)
    }

    /// Every edge agrees on the marginal of its separator (plus the pivot's
    /// group-by attributes) when absorbed from either side.
    pub fn is_calibrated(&self) -> bool {
        let Some(pivot) = self.pivot.as_ref() else {
            return false;
        };
        let Ok(analysis) = self.analyze(pivot) else {
            return false;
        };
        if self
            .directed_edges()
            .iter()
            .any(|&(i, u)| self.fresh_message(i, u, &analysis).is_err())
        {
            return false;
        }
        let groups = Schema::new(pivot.group_attrs());
        let mut absorbed = BTreeMap::new();
        for &bag in self.bags.keys() {
            match self.absorb(bag) {
                Ok(r) => {
                    absorbed.insert(bag, r);
                }
                Err(_) => return false,
            }
        }
        self.edges().into_iter().all(|(u, v)| {
            let sep = self.bags[&u].attrs.intersect(&self.bags[&v].attrs).union(&groups);
            let (ru, rv) = (&absorbed[&u], &absorbed[&v]);
            let keep = sep.intersect(ru.schema()).intersect(rv.schema());
            match (ru.project_onto(&keep), rv.project_onto(&keep)) {
                (Ok(a), Ok(b)) => a.approx_eq(&b, 1e-9),
                _ => false,
            }
        })
    }

    /// Serialized payload of every cached message.
    pub fn message_bytes(&self) -> BTreeMap<(BagId, BagId), Vec<u8>> {
        self.messages
            .iter()
            .map(|(e, m)| (*e, m.payload.canonical_bytes()))
            .collect()
    }
}
