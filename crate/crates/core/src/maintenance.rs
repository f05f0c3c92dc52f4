//! Incremental maintenance of a calibrated tree under base-relation deltas.
//!
//! Eager mode pushes delta messages outward from the updated relation's bag
//! and adds them to the cached payloads; message generation is linear in
//! each input, so the sum equals recomputation. Lazy mode only marks the same
//! messages invalid and recomputes them when a plan reads them.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hypertree::{BagId, JunctionHypertree, Message, RelId, Version};
use crate::planner::SteinerPlan;
use crate::relation::{Relation, Tuple};
use crate::semiring::{SemiringError, Value};

/// Signed change to one base relation. Deletions carry negated values and
/// need a semi-ring with additive inverses.
#[derive(Debug, Clone)]
pub struct DeltaRelation {
    pub rel: RelId,
    pub rows: Relation,
}

impl DeltaRelation {
    /// Builds a delta from inserted and deleted tuples of `rel`, in the base
    /// relation's canonical column order.
    pub fn from_changes(
        jt: &JunctionHypertree,
        rel: RelId,
        inserts: impl IntoIterator<Item = (Tuple, Value)>,
        deletes: impl IntoIterator<Item = (Tuple, Value)>,
    ) -> Result<Self> {
        let base = jt.relation(rel)?;
        let mut rows = Relation::empty(base.schema().clone(), jt.kind());
        for (t, v) in inserts {
            rows.insert(t, v)?;
        }
        for (t, v) in deletes {
            rows.insert(t, v.negate()?)?;
        }
        Ok(DeltaRelation { rel, rows })
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has_deletions(&self) -> bool {
        self.rows.rows().values().any(|v| match v {
            Value::Nat(_) => false,
            Value::Int(n) => *n < 0,
            Value::Cov(c) => c.count < 0.0,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeltaReport {
    /// Version now current for the relation (unchanged for an empty delta).
    pub version: Version,
    /// Cached messages updated in place, in propagation order.
    pub edges_updated: Vec<(BagId, BagId)>,
    pub messages_invalidated: usize,
}

impl JunctionHypertree {
    fn stage_delta(&mut self, delta: &DeltaRelation) -> Result<Version> {
        let base = self.relation(delta.rel)?.clone();
        if delta.rows.schema() != base.schema() {
            return Err(Error::Schema(format!(
                "delta schema {} does not match {}",
                delta.rows.schema(),
                base.schema()
            )));
        }
        if delta.has_deletions() && !self.kind.has_additive_inverse() {
            return Err(SemiringError::NoInverse(self.kind.spec().name).into());
        }
        let next = base.add(&delta.rows)?;
        let v = self.add_version(delta.rel, next)?;
        self.relations.get_mut(&delta.rel).unwrap().current = v;
        self.absorptions.clear();
        Ok(v)
    }

    /// Applies a delta and updates every message directed away from the
    /// relation's bag by adding its delta message.
    pub fn apply_delta_eager(&mut self, delta: &DeltaRelation) -> Result<DeltaReport> {
        if self.options.prune_dangling {
            return Err(Error::Unsupported(
                "incremental maintenance with dangling-tuple pruning (indicator projections are not linear)".into(),
            ));
        }
        let pivot = self.pivot.clone().ok_or(Error::NotCalibrated)?;
        let bag = self.bag_of(delta.rel)?;
        if delta.is_empty() {
            return Ok(DeltaReport {
                version: self.current_version(delta.rel)?,
                ..Default::default()
            });
        }
        // Bring stale messages up to date first so the deltas land on a
        // calibrated cache.
        let analysis = self.analyze(&pivot)?;
        for (i, u) in self.directed_edges() {
            let n = self.ensure_fresh(i, u, &pivot, &analysis)?;
            self.stats.messages_refreshed += n;
        }
        let before = self.current_version(delta.rel)?;
        let tracks_current = self
            .resolved_at(bag, &pivot)?
            .into_iter()
            .any(|(r, v)| r == delta.rel && v == Some(before));
        let version = self.stage_delta(delta)?;
        let mut edges_updated = Vec::new();
        if tracks_current {
            let factor = Arc::new(delta.rows.clone());
            let mut deltas: BTreeMap<(BagId, BagId), Arc<Relation>> = BTreeMap::new();
            for (u, v) in self.away_edges(bag) {
                let (d, tuples) = {
                    let lookup = |i: BagId| match deltas.get(&(i, u)) {
                        Some(d) => Ok(d.clone()),
                        None => self.fresh_message(i, u, &analysis),
                    };
                    let replace = (u == bag).then_some((delta.rel, &factor));
                    self.compute_message_replacing(u, v, &pivot, &analysis, &lookup, replace)?
                };
                self.stats.tuples_processed += tuples;
                self.stats.messages_computed += 1;
                deltas.insert((u, v), Arc::new(d));
                edges_updated.push((u, v));
            }
            let fresh = self.analyze(&pivot)?;
            for e in &edges_updated {
                let old = self.messages[e].payload.clone();
                let next = if old.is_identity() {
                    deltas[e].as_ref().clone()
                } else {
                    old.add(&deltas[e])?
                };
                self.messages.insert(
                    *e,
                    Message {
                        payload: Arc::new(next),
                        valid: true,
                        signature: fresh.sigs[e],
                    },
                );
            }
        }
        Ok(DeltaReport {
            version,
            edges_updated,
            messages_invalidated: 0,
        })
    }

    /// Applies a delta to the store and invalidates the messages it affects.
    pub fn apply_delta_lazy(&mut self, delta: &DeltaRelation) -> Result<DeltaReport> {
        self.bag_of(delta.rel)?;
        if delta.is_empty() {
            return Ok(DeltaReport {
                version: self.current_version(delta.rel)?,
                ..Default::default()
            });
        }
        let version = self.stage_delta(delta)?;
        let n = self.invalidate_lazy(delta.rel)?;
        Ok(DeltaReport {
            version,
            edges_updated: Vec::new(),
            messages_invalidated: n,
        })
    }

    /// Marks every message directed away from the relation's bag invalid.
    /// Idempotent; returns how many messages were newly invalidated.
    pub fn invalidate_lazy(&mut self, rel: RelId) -> Result<usize> {
        let bag = self.bag_of(rel)?;
        self.absorptions.clear();
        Ok(self.invalidate_away(bag))
    }

    /// Recomputes the invalid or stale messages `plan` reads, together with
    /// the invalid inputs they depend on. Returns messages recomputed.
    pub fn refresh_for_plan(&mut self, plan: &SteinerPlan) -> Result<u64> {
        let pivot = self.pivot.clone().ok_or(Error::NotCalibrated)?;
        let analysis = self.analyze(&pivot)?;
        let mut n = 0;
        for &(i, u) in &plan.reused_edges {
            n += self.ensure_fresh(i, u, &pivot, &analysis)?;
        }
        self.stats.messages_refreshed += n;
        Ok(n)
    }

    /// Full calibration again under the current pivot.
    pub fn recalibrate(&mut self) -> Result<crate::calibration::CalibrationReport> {
        let pivot = self.pivot.clone().ok_or(Error::NotCalibrated)?;
        self.calibrate(&pivot)
    }
}
