use std::collections::BTreeSet;

use crate::annotation::{Annotation, AnnotationPlacement};
use crate::calibration::Analysis;
use crate::error::{Error, Result};
use crate::hypertree::{BagId, JunctionHypertree, RelId};

/// Where a delta query runs: the subtree spanning every bag whose
/// annotations differ from the pivot's, its root, and the cached messages
/// it reads from outside.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinerPlan {
    pub diff_bags: BTreeSet<BagId>,
    /// Empty when the query equals the pivot.
    pub tree_bags: BTreeSet<BagId>,
    pub root: BagId,
    /// Edges inside the tree directed at the root, children first.
    pub recompute_edges: Vec<(BagId, BagId)>,
    /// Cached messages flowing into the tree (or into the root when the
    /// tree is empty).
    pub reused_edges: Vec<(BagId, BagId)>,
    /// Query placement after shrinking.
    pub placement: AnnotationPlacement,
}

impl SteinerPlan {
    pub fn messages_required(&self) -> usize {
        self.recompute_edges.len() + self.reused_edges.len()
    }
}

impl JunctionHypertree {
    fn excluded_by(placement: &AnnotationPlacement) -> BTreeSet<RelId> {
        placement
            .iter()
            .filter_map(|(_, a)| match a {
                Annotation::Exclude(r) => Some(*r),
                _ => None,
            })
            .collect()
    }

    fn diff_from(&self, pivot: &Analysis, q: &Analysis) -> BTreeSet<BagId> {
        self.bags
            .keys()
            .copied()
            .filter(|b| pivot.keys[b] != q.keys[b])
            .collect()
    }

    /// Bags whose annotations or relation versions differ from the pivot.
    pub fn diff_bags(&self, placement: &AnnotationPlacement) -> Result<BTreeSet<BagId>> {
        let pivot = self.pivot.as_ref().ok_or(Error::NotCalibrated)?;
        Ok(self.diff_from(&self.analyze(pivot)?, &self.analyze(placement)?))
    }

    /// Whether the cached message `u → v` equals what `placement` would
    /// produce: the annotations and versions of `u`'s subtree match.
    pub fn message_reusable(&self, u: BagId, v: BagId, placement: &AnnotationPlacement) -> Result<bool> {
        if !self.is_edge(u, v) {
            return Err(Error::NotAnEdge(u, v));
        }
        let pivot = self.pivot.as_ref().ok_or(Error::NotCalibrated)?;
        Ok(self.analyze(pivot)?.sigs[&(u, v)] == self.analyze(placement)?.sigs[&(u, v)])
    }

    fn bag_rows(&self, bag: BagId, placement: &AnnotationPlacement) -> Result<u64> {
        let mut n = 0;
        for (rel, v) in self.resolved_at(bag, placement)? {
            if let Some(v) = v {
                n += self.relation_version(rel, v)?.len() as u64;
            }
        }
        Ok(n)
    }

    /// Minimal tree over the differing bags, shrunk by moving a leaf's extra
    /// movable annotations onto its tree neighbor whenever that makes the
    /// leaf identical to the pivot. Leaves holding the most rows go first.
    pub fn build_steiner(&self, placement: &AnnotationPlacement) -> Result<SteinerPlan> {
        let pivot = self.pivot.as_ref().ok_or(Error::NotCalibrated)?;
        let pivot_an = self.analyze(pivot)?;
        let excluded = Self::excluded_by(placement);
        let mut q = placement.clone();
        let mut q_an = self.analyze(&q)?;
        let mut diff = self.diff_from(&pivot_an, &q_an);
        let mut tree = self.steiner_subtree(&diff);

        'shrink: while tree.len() > 1 {
            let mut leaves = Vec::new();
            for &b in &tree {
                let inside: Vec<BagId> = self.neighbors(b).filter(|n| tree.contains(n)).collect();
                if inside.len() == 1 {
                    leaves.push((std::cmp::Reverse(self.bag_rows(b, &q)?), b, inside[0]));
                }
            }
            leaves.sort_unstable();
            for (_, leaf, w) in leaves {
                let mut extra: Vec<Annotation> = q.at(leaf).to_vec();
                for a in pivot.at(leaf) {
                    if let Some(i) = extra.iter().position(|x| x == a) {
                        extra.remove(i);
                    }
                }
                if extra.is_empty() || !extra.iter().all(|a| a.is_movable()) {
                    continue;
                }
                let placeable = extra.iter().all(|a| match a {
                    Annotation::Select(p) => self.select_eligible(w, p.attr, &excluded),
                    _ => a.attr().is_some_and(|x| self.bags[&w].attrs.contains(x)),
                });
                if !placeable {
                    continue;
                }
                let mut moved = q.clone();
                for a in &extra {
                    moved.remove(leaf, a);
                    moved.add(w, *a);
                }
                let moved_an = self.analyze(&moved)?;
                if moved_an.keys[&leaf] != pivot_an.keys[&leaf] {
                    continue;
                }
                q = moved;
                q_an = moved_an;
                diff = self.diff_from(&pivot_an, &q_an);
                tree = self.steiner_subtree(&diff);
                continue 'shrink;
            }
            break;
        }

        let candidates: BTreeSet<BagId> = if tree.is_empty() {
            self.bags.keys().copied().collect()
        } else {
            tree.clone()
        };
        let root = self.choose_root(&q, &tree, &candidates)?;
        let recompute_edges = self.edges_toward(root, &tree);
        let inside = if tree.is_empty() { BTreeSet::from([root]) } else { tree.clone() };
        let reused_edges = inside
            .iter()
            .flat_map(|&x| self.neighbors(x).filter(|y| !inside.contains(y)).map(move |y| (y, x)))
            .collect();
        Ok(SteinerPlan {
            diff_bags: diff,
            tree_bags: tree,
            root,
            recompute_edges,
            reused_edges,
            placement: q,
        })
    }

    /// Estimated size of `bag`'s join when sending toward `except` (or
    /// absorbing, when `None`): product of input cardinalities, using cached
    /// message sizes.
    fn join_cost(&self, bag: BagId, except: Option<BagId>, placement: &AnnotationPlacement) -> Result<f64> {
        let mut cost = 1.0;
        for i in self.neighbors(bag).filter(|&i| Some(i) != except) {
            if let Some(m) = self.messages.get(&(i, bag)) {
                if !m.payload.is_identity() {
                    cost *= m.payload.len() as f64;
                }
            }
        }
        for (rel, v) in self.resolved_at(bag, placement)? {
            if let Some(v) = v {
                cost *= self.relation_version(rel, v)?.len() as f64;
            }
        }
        Ok(cost)
    }

    /// Cheapest root among `candidates` for running `tree` (recompute cost of
    /// every tree edge toward the root plus absorption at the root); ties go
    /// to the lowest id.
    pub fn choose_root(
        &self,
        placement: &AnnotationPlacement,
        tree: &BTreeSet<BagId>,
        candidates: &BTreeSet<BagId>,
    ) -> Result<BagId> {
        let mut best: Option<(f64, BagId)> = None;
        for &r in candidates {
            let mut cost = self.join_cost(r, None, placement)?;
            for (u, v) in self.edges_toward(r, tree) {
                cost += self.join_cost(u, Some(v), placement)?;
            }
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, r));
            }
        }
        best.map(|(_, r)| r)
            .ok_or_else(|| Error::InvalidQuery("no candidate root".into()))
    }
}
