use std::collections::{BTreeMap, BTreeSet};

use crate::annotation::{Annotation, AnnotationPlacement, PlacementRole};
use crate::error::{Error, Result};
use crate::hypertree::{BagId, JunctionHypertree};
use crate::relation::{AttrId, Predicate, Relation, Schema};
use crate::stats::Stats;

/// One calibrated copy of the tree per `k`-subset of the dimensions, each
/// grouping by its subset.
#[derive(Debug, Clone)]
pub struct CubeIndex {
    pub k: usize,
    pub dims: Vec<AttrId>,
    pub pivots: BTreeMap<Vec<AttrId>, JunctionHypertree>,
}

#[derive(Debug, Clone)]
pub struct OlapAnswer {
    pub result: Relation,
    pub pivot: Vec<AttrId>,
    /// Bags in the Steiner tree the pivot choice was scored by.
    pub steiner_size: usize,
    pub stats: Stats,
}

fn subsets(dims: &[AttrId], k: usize) -> Vec<Vec<AttrId>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &d) in dims.iter().enumerate() {
        for mut rest in subsets(&dims[i + 1..], k - 1) {
            rest.insert(0, d);
            out.push(rest);
        }
    }
    out
}

/// Calibrates every `k`-attribute cuboid over `dims`; absorption caches are
/// switched on for every pivot.
pub fn build_cube(jt: &JunctionHypertree, dims: &[AttrId], k: usize) -> Result<CubeIndex> {
    let mut dims = dims.to_vec();
    dims.sort_unstable();
    dims.dedup();
    if k > dims.len() {
        return Err(Error::InvalidQuery(format!(
            "cube dimensionality {k} exceeds the {} dimensions",
            dims.len()
        )));
    }
    let attrs = jt.attributes();
    if let Some(d) = dims.iter().find(|d| !attrs.contains(**d)) {
        return Err(Error::InvalidQuery(format!("dimension {d} is not a tree attribute")));
    }
    let mut pivots = BTreeMap::new();
    for set in subsets(&dims, k) {
        let mut copy = jt.clone();
        let mut opts = copy.options();
        opts.absorption_cache = true;
        copy.set_options(opts);
        let mut placement = AnnotationPlacement::new(PlacementRole::Pivot);
        for &a in &set {
            placement.add(copy.bags_containing(a)[0], Annotation::GroupBy(a));
        }
        copy.calibrate(&placement)?;
        pivots.insert(set, copy);
    }
    Ok(CubeIndex { k, dims, pivots })
}

/// Annotations a query adds to a pivot, each with the bags it may sit on.
fn delta_annotations(
    jt: &JunctionHypertree,
    pivot_set: &[AttrId],
    group: &BTreeSet<AttrId>,
    predicates: &[Predicate],
) -> Result<Vec<(Annotation, BTreeSet<BagId>)>> {
    let none = BTreeSet::new();
    let mut out = Vec::new();
    for &a in group.iter().filter(|a| !pivot_set.contains(a)) {
        out.push((Annotation::GroupBy(a), jt.bags_containing(a).into_iter().collect()));
    }
    for &a in pivot_set.iter().filter(|a| !group.contains(a)) {
        out.push((Annotation::Marginalize(a), jt.bags_containing(a).into_iter().collect()));
    }
    let mut preds = predicates.to_vec();
    preds.sort_unstable();
    preds.dedup();
    for p in preds {
        let a = Annotation::Select(p);
        let cands: BTreeSet<BagId> = jt.candidates(&a, &none)?.into_iter().collect();
        if !cands.is_empty() {
            out.push((a, cands));
        }
    }
    Ok(out)
}

impl CubeIndex {
    /// Steiner tree size a pivot needs for the query, with the placement
    /// that achieves it.
    fn score(
        &self,
        pivot_set: &[AttrId],
        group: &BTreeSet<AttrId>,
        predicates: &[Predicate],
    ) -> Result<(usize, AnnotationPlacement)> {
        let jt = self
            .pivots
            .get(pivot_set)
            .ok_or_else(|| Error::InvalidQuery(format!("no pivot over {pivot_set:?}")))?;
        let attrs = jt.attributes();
        if let Some(g) = group.iter().find(|g| !attrs.contains(**g)) {
            return Err(Error::InvalidQuery(format!("group-by attribute {g} is not a tree attribute")));
        }
        let extra = delta_annotations(jt, pivot_set, group, predicates)?;
        let sets: Vec<BTreeSet<BagId>> = extra.iter().map(|(_, s)| s.clone()).collect();
        let (tree, assign) = jt.min_steiner_assignment(&sets, sets.len())?;
        let mut placement = jt.pivot().cloned().ok_or(Error::NotCalibrated)?;
        placement.role = PlacementRole::Query;
        for ((a, _), b) in extra.iter().zip(assign) {
            placement.add(b, *a);
        }
        Ok((tree.len(), placement))
    }

    /// Messages-free lower bound used to choose a pivot: the DP Steiner size.
    pub fn pivot_cost(&self, pivot_set: &[AttrId], group: &[AttrId], predicates: &[Predicate]) -> Result<usize> {
        Ok(self.score(pivot_set, &group.iter().copied().collect(), predicates)?.0)
    }

    /// Answers from the pivot whose Steiner tree is smallest (ties: first
    /// pivot in lexicographic order).
    pub fn answer_olap(&mut self, group: &[AttrId], predicates: &[Predicate]) -> Result<OlapAnswer> {
        let g: BTreeSet<AttrId> = group.iter().copied().collect();
        let mut best: Option<(usize, Vec<AttrId>)> = None;
        for set in self.pivots.keys() {
            let (size, _) = self.score(set, &g, predicates)?;
            if best.as_ref().is_none_or(|(s, _)| size < *s) {
                best = Some((size, set.clone()));
            }
        }
        let (_, set) = best.ok_or_else(|| Error::InvalidQuery("empty cube".into()))?;
        self.answer_with_pivot(&set, group, predicates)
    }

    /// Answers from a specific pivot.
    pub fn answer_with_pivot(
        &mut self,
        pivot_set: &[AttrId],
        group: &[AttrId],
        predicates: &[Predicate],
    ) -> Result<OlapAnswer> {
        let g: BTreeSet<AttrId> = group.iter().copied().collect();
        let (size, placement) = self.score(pivot_set, &g, predicates)?;
        let jt = self.pivots.get_mut(pivot_set).unwrap();
        let out = jt.execute_placement(&placement, &Schema::new(g))?;
        Ok(OlapAnswer {
            result: out.result,
            pivot: pivot_set.to_vec(),
            steiner_size: size,
            stats: out.stats,
        })
    }
}
