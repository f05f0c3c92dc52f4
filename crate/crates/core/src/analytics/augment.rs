use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::hypertree::{BagId, JunctionHypertree, RelId};
use crate::planner::QuerySpec;
use crate::relation::{AttrId, Relation, Schema};

#[derive(Debug, Clone)]
pub struct AugmentOutcome {
    pub rel: RelId,
    /// Bag created for the new relation.
    pub bag: BagId,
    /// Existing bags spanned by the join keys, plus the new bag.
    pub steiner: BTreeSet<BagId>,
    /// Aggregate of the augmented join, grouped by the pivot's group-by
    /// attributes.
    pub aggregate: Relation,
    pub messages_computed: u64,
    pub multi_bag: bool,
}

impl JunctionHypertree {
    /// Joins a new relation into a calibrated tree on `keys` and returns the
    /// aggregate of the extended join.
    ///
    /// When one bag holds every key, the new bag hangs off it and a single
    /// message is computed. Otherwise the keys' Steiner tree answers a
    /// group-by-keys delta query, its bags are widened with the keys, and
    /// the cached messages are dropped; they are recomputed on demand.
    pub fn augment(&mut self, name: &str, rel: Relation, keys: &[AttrId]) -> Result<AugmentOutcome> {
        let pivot = self.pivot.clone().ok_or(Error::NotCalibrated)?;
        let keys = Schema::new(keys.iter().copied());
        if keys.is_empty() {
            return Err(Error::InvalidQuery("augmentation needs at least one join key".into()));
        }
        if !keys.is_subset(rel.schema()) {
            return Err(Error::Schema(format!("join keys {keys} are not all in {}", rel.schema())));
        }
        let attrs = self.attributes();
        if !keys.is_subset(&attrs) {
            return Err(Error::Schema(format!("join keys {keys} are not all tree attributes")));
        }
        if rel.schema().minus(&keys).intersects(&attrs) {
            return Err(Error::Schema(format!(
                "non-key attributes of {} already occur in the tree",
                rel.schema()
            )));
        }
        let group: Schema = pivot.group_attrs().into_iter().collect();
        let host = self.bags.values().find(|b| keys.is_subset(&b.attrs)).map(|b| b.id);

        if let Some(host) = host {
            let mut next = self.clone();
            let schema = rel.schema().clone();
            let id = next.add_relation(name, rel)?;
            let bag = next.add_bag(schema);
            next.add_edge(host, bag)?;
            next.assign(id, bag)?;
            next.check()?;
            let an = next.analyze(&pivot)?;
            let inputs: Vec<BagId> = next.neighbors(host).filter(|&i| i != bag).collect();
            for i in inputs {
                let n = next.ensure_fresh(i, host, &pivot, &an)?;
                next.stats.messages_refreshed += n;
            }
            let tuples = next.pass_with(host, bag, &pivot, &an)?;
            next.stats.messages_computed += 1;
            next.stats.tuples_processed += tuples;
            let absorbed = next.absorb(bag)?;
            let aggregate = absorbed.project_onto(&group.intersect(absorbed.schema()))?;
            next.invalidate_away(bag);
            next.absorptions.clear();
            *self = next;
            return Ok(AugmentOutcome {
                rel: id,
                bag,
                steiner: BTreeSet::from([host, bag]),
                aggregate,
                messages_computed: 1,
                multi_bag: false,
            });
        }

        let sets: Vec<BTreeSet<BagId>> = keys
            .iter()
            .map(|k| self.bags_containing(k).into_iter().collect())
            .collect();
        let (tree, _) = self.min_steiner_assignment(&sets, sets.len())?;
        let q = QuerySpec::new().group_by(keys.union(&group).iter());
        let out = self.execute(&q)?;
        let aggregate = Relation::join(&[&out.result, &rel])?.project_onto(&group)?;

        let mut next = self.clone();
        for &b in &tree {
            next.widen_bag(b, &keys);
        }
        let schema = rel.schema().clone();
        let id = next.add_relation(name, rel)?;
        let bag = next.add_bag(schema);
        next.add_edge(*tree.first().expect("keys span a bag"), bag)?;
        next.assign(id, bag)?;
        next.check()?;
        next.messages.clear();
        next.absorptions.clear();
        *self = next;
        let mut steiner = tree;
        steiner.insert(bag);
        Ok(AugmentOutcome {
            rel: id,
            bag,
            steiner,
            aggregate,
            messages_computed: out.stats.messages_computed,
            multi_bag: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::AnnotationPlacement;
    use crate::semiring::{SemiringKind, Value};

    const K: SemiringKind = SemiringKind::NatCount;

    fn rel(attrs: &[u32], rows: &[&[u32]]) -> Relation {
        Relation::from_rows(attrs, K, rows.iter().map(|t| (t.to_vec(), Value::Nat(1)))).unwrap()
    }

    // AB – AC – AD
    fn chain() -> JunctionHypertree {
        let rels = vec![
            ("R".into(), rel(&[0, 1], &[&[1, 1], &[1, 2], &[2, 1]])),
            ("S".into(), rel(&[0, 2], &[&[1, 1], &[2, 1], &[2, 2]])),
            ("T".into(), rel(&[0, 3], &[&[1, 1], &[1, 2], &[2, 3]])),
        ];
        let mut jt = JunctionHypertree::default_jt(K, rels).unwrap();
        jt.calibrate(&AnnotationPlacement::default()).unwrap();
        jt
    }

    #[test]
    fn single_key_hangs_off_one_bag() {
        let mut jt = chain();
        let de = rel(&[3, 4], &[&[1, 0], &[1, 1], &[3, 0]]);
        let out = jt.augment("U", de, &[3]).unwrap();
        assert!(!out.multi_bag);
        assert_eq!(out.steiner, BTreeSet::from([2, out.bag]));
        assert_eq!(out.messages_computed, 1);
        // a=1: 2·1·(2 via d=1) = 4; a=2: 1·2·1 = 2.
        assert_eq!(out.aggregate.total().unwrap(), Value::Nat(6));
        jt.recalibrate().unwrap();
        assert_eq!(jt.absorb(0).unwrap().total().unwrap(), Value::Nat(6));
    }

    #[test]
    fn multi_key_widens_the_steiner_tree() {
        let mut jt = chain();
        let bd = rel(&[1, 3], &[&[1, 1], &[2, 3]]);
        let out = jt.augment("U", bd, &[1, 3]).unwrap();
        assert!(out.multi_bag);
        assert!(jt.validate().is_empty());
        jt.recalibrate().unwrap();
        let total = jt.absorb(out.bag).unwrap().total().unwrap();
        assert_eq!(out.aggregate.total().unwrap(), total);
    }

    #[test]
    fn rejects_reused_non_keys() {
        let mut jt = chain();
        assert!(jt.augment("U", rel(&[2, 3], &[&[1, 1]]), &[3]).is_err());
        assert!(jt.augment("U", rel(&[3, 4], &[&[1, 1]]), &[]).is_err());
    }
}
