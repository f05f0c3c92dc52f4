//! Bag-local annotations that turn one join tree into many SPJA queries.

use std::collections::BTreeMap;
use std::fmt;

use crate::hypertree::{BagId, RelId, Version};
use crate::relation::{AttrId, Predicate};

/// Marker attached to a bag that changes how its messages are generated.
///
/// The derived order is also the order effects are applied in a bag:
/// version updates and exclusions, selections, group-by carry, then
/// marginalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Annotation {
    /// Use a stored version of the relation instead of the current one.
    Update { rel: RelId, version: Version },
    /// Drop the relation from the join.
    Exclude(RelId),
    Select(Predicate),
    /// Keep the attribute in every message on the way to the root.
    GroupBy(AttrId),
    /// Stop carrying an attribute some other bag groups by.
    Marginalize(AttrId),
}

impl Annotation {
    /// Annotations the planner may move between bags; the rest are pinned to
    /// the bag their relation is mapped to.
    pub fn is_movable(&self) -> bool {
        matches!(
            self,
            Annotation::Select(_) | Annotation::GroupBy(_) | Annotation::Marginalize(_)
        )
    }

    pub fn attr(&self) -> Option<AttrId> {
        match self {
            Annotation::Select(p) => Some(p.attr),
            Annotation::GroupBy(a) | Annotation::Marginalize(a) => Some(*a),
            _ => None,
        }
    }

    pub fn relation(&self) -> Option<RelId> {
        match self {
            Annotation::Update { rel, .. } | Annotation::Exclude(rel) => Some(*rel),
            _ => None,
        }
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Annotation::Update { rel, version } => write!(f, "R{rel}*v{version}"),
            Annotation::Exclude(rel) => write!(f, "!R{rel}"),
            Annotation::Select(p) => write!(f, "sigma({p})"),
            Annotation::GroupBy(a) => write!(f, "gamma(#{a})"),
            Annotation::Marginalize(a) => write!(f, "sum(#{a})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlacementRole {
    Pivot,
    #[default]
    Query,
}

/// Multiset of annotations per bag. Each bag's list is kept sorted so two
/// placements compare equal exactly when their multisets match.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotationPlacement {
    pub role: PlacementRole,
    bags: BTreeMap<BagId, Vec<Annotation>>,
}

impl AnnotationPlacement {
    pub fn new(role: PlacementRole) -> Self {
        AnnotationPlacement {
            role,
            bags: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, bag: BagId, a: Annotation) {
        let v = self.bags.entry(bag).or_default();
        let at = v.partition_point(|x| *x <= a);
        v.insert(at, a);
    }

    pub fn with(mut self, bag: BagId, a: Annotation) -> Self {
        self.add(bag, a);
        self
    }

    /// Removes one occurrence; returns whether it was present.
    pub fn remove(&mut self, bag: BagId, a: &Annotation) -> bool {
        let Some(v) = self.bags.get_mut(&bag) else {
            return false;
        };
        let Some(i) = v.iter().position(|x| x == a) else {
            return false;
        };
        v.remove(i);
        if v.is_empty() {
            self.bags.remove(&bag);
        }
        true
    }

    pub fn at(&self, bag: BagId) -> &[Annotation] {
        self.bags.get(&bag).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (BagId, &Annotation)> {
        self.bags.iter().flat_map(|(b, v)| v.iter().map(move |a| (*b, a)))
    }

    /// Bag holding the first occurrence of `a`.
    pub fn find(&self, a: &Annotation) -> Option<BagId> {
        self.iter().find(|(_, x)| *x == a).map(|(b, _)| b)
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bags.values().map(Vec::len).sum()
    }

    pub fn bags(&self) -> impl Iterator<Item = BagId> + '_ {
        self.bags.keys().copied()
    }

    pub fn group_attrs(&self) -> Vec<AttrId> {
        let mut v: Vec<AttrId> = self
            .iter()
            .filter_map(|(_, a)| match a {
                Annotation::GroupBy(x) => Some(*x),
                _ => None,
            })
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::Comparator;

    #[test]
    fn placement_is_a_sorted_multiset() {
        let p = Predicate::new(2, Comparator::Eq, 1);
        let a = AnnotationPlacement::default()
            .with(1, Annotation::GroupBy(3))
            .with(1, Annotation::Select(p))
            .with(1, Annotation::GroupBy(3));
        let b = AnnotationPlacement::default()
            .with(1, Annotation::GroupBy(3))
            .with(1, Annotation::GroupBy(3))
            .with(1, Annotation::Select(p));
        assert_eq!(a, b);
        assert_eq!(a.at(1)[0], Annotation::Select(p));
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn remove_drops_empty_bags() {
        let mut a = AnnotationPlacement::default().with(4, Annotation::Exclude(0));
        assert!(!a.remove(4, &Annotation::Exclude(1)));
        assert!(a.remove(4, &Annotation::Exclude(0)));
        assert!(a.is_empty());
    }
}
