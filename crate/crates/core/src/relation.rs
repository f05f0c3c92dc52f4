//! Annotated relations and the operators message passing is built from.
//!
//! Rows live in a `BTreeMap` so iteration, sums and serialized bytes are
//! deterministic regardless of how a relation was produced. Joins still build
//! a hash index on the probe side.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::semiring::{SemiringKind, Value};

pub type AttrId = u32;
/// Dictionary-encoded values in canonical schema order.
pub type Tuple = Vec<u32>;

/// A set of attributes kept sorted ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Schema(Vec<AttrId>);

impl Schema {
    pub fn new(attrs: impl IntoIterator<Item = AttrId>) -> Self {
        let mut v: Vec<AttrId> = attrs.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Schema(v)
    }

    pub fn empty() -> Self {
        Schema(Vec::new())
    }

    pub fn attrs(&self) -> &[AttrId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, a: AttrId) -> bool {
        self.0.binary_search(&a).is_ok()
    }

    pub fn position(&self, a: AttrId) -> Option<usize> {
        self.0.binary_search(&a).ok()
    }

    pub fn union(&self, o: &Schema) -> Schema {
        Schema::new(self.0.iter().chain(&o.0).copied())
    }

    pub fn intersect(&self, o: &Schema) -> Schema {
        Schema(self.0.iter().copied().filter(|a| o.contains(*a)).collect())
    }

    pub fn minus(&self, o: &Schema) -> Schema {
        Schema(self.0.iter().copied().filter(|a| !o.contains(*a)).collect())
    }

    pub fn is_subset(&self, o: &Schema) -> bool {
        self.0.iter().all(|a| o.contains(*a))
    }

    pub fn intersects(&self, o: &Schema) -> bool {
        self.0.iter().any(|a| o.contains(*a))
    }

    pub fn iter(&self) -> impl Iterator<Item = AttrId> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<AttrId> for Schema {
    fn from_iter<I: IntoIterator<Item = AttrId>>(iter: I) -> Self {
        Schema::new(iter)
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub fn is_range(&self) -> bool {
        !matches!(self, Comparator::Eq | Comparator::Ne)
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }
}

/// Single-attribute filter against an encoded constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub attr: AttrId,
    pub op: Comparator,
    pub value: u32,
}

impl Predicate {
    pub fn new(attr: AttrId, op: Comparator, value: u32) -> Self {
        Predicate { attr, op, value }
    }

    pub fn eval(&self, v: u32) -> bool {
        match self.op {
            Comparator::Eq => v == self.value,
            Comparator::Ne => v != self.value,
            Comparator::Lt => v < self.value,
            Comparator::Le => v <= self.value,
            Comparator::Gt => v > self.value,
            Comparator::Ge => v >= self.value,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{} {} {}", self.attr, self.op.symbol(), self.value)
    }
}

/// Finite map from tuples to nonzero annotations.
///
/// The identity relation annotates every tuple with one. It is a marker that
/// joins skip and is never materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    schema: Schema,
    rows: BTreeMap<Tuple, Value>,
    kind: SemiringKind,
    identity: bool,
}

impl Relation {
    pub fn empty(schema: Schema, kind: SemiringKind) -> Self {
        Relation {
            schema,
            rows: BTreeMap::new(),
            kind,
            identity: false,
        }
    }

    pub fn identity(schema: Schema, kind: SemiringKind) -> Self {
        Relation {
            identity: true,
            ..Relation::empty(schema, kind)
        }
    }

    /// Builds a relation from rows whose values follow `attrs` (any order).
    /// Duplicate tuples accumulate; zero sums are dropped.
    pub fn from_rows(
        attrs: &[AttrId],
        kind: SemiringKind,
        rows: impl IntoIterator<Item = (Tuple, Value)>,
    ) -> Result<Self> {
        let schema = Schema::new(attrs.iter().copied());
        if schema.len() != attrs.len() {
            return Err(Error::Schema(format!("duplicate attribute in {attrs:?}")));
        }
        let perm: Vec<usize> = schema
            .iter()
            .map(|a| attrs.iter().position(|b| *b == a).unwrap())
            .collect();
        let mut rel = Relation::empty(schema, kind);
        for (t, v) in rows {
            if t.len() != attrs.len() {
                return Err(Error::Schema(format!(
                    "tuple arity {} does not match schema arity {}",
                    t.len(),
                    attrs.len()
                )));
            }
            let canon: Tuple = perm.iter().map(|&i| t[i]).collect();
            rel.insert(canon, v)?;
        }
        Ok(rel)
    }

    /// Adds `v` to the annotation of `t` (canonical order).
    pub fn insert(&mut self, t: Tuple, v: Value) -> Result<()> {
        self.kind.check(&v)?;
        if t.len() != self.schema.len() {
            return Err(Error::Schema(format!(
                "tuple arity {} does not match schema arity {}",
                t.len(),
                self.schema.len()
            )));
        }
        accumulate(&mut self.rows, t, v)?;
        Ok(())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn kind(&self) -> SemiringKind {
        self.kind
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn rows(&self) -> &BTreeMap<Tuple, Value> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, t: &[u32]) -> Option<&Value> {
        self.rows.get(t)
    }

    /// Semi-ring sum of every annotation.
    pub fn total(&self) -> Result<Value> {
        let mut acc = self.kind.zero();
        for v in self.rows.values() {
            acc = acc.add(v)?;
        }
        Ok(acc)
    }

    /// Natural join. Identity inputs are skipped; if every input is an
    /// identity the result is an identity over the union schema.
    pub fn join(inputs: &[&Relation]) -> Result<Relation> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::Schema("join needs at least one input".into()))?;
        let kind = first.kind;
        for r in inputs {
            if r.kind != kind {
                return Err(crate::semiring::SemiringError::Mismatch {
                    expected: kind.to_string(),
                    found: r.kind.to_string(),
                }
                .into());
            }
        }
        let mut pending: Vec<&Relation> = inputs.iter().copied().filter(|r| !r.identity).collect();
        if pending.is_empty() {
            let schema = inputs.iter().fold(Schema::empty(), |s, r| s.union(&r.schema));
            return Ok(Relation::identity(schema, kind));
        }
        // Left-deep, smallest first; prefer inputs sharing attributes with the
        // running result so indicator or message inputs do not cross-multiply.
        let start = argmin(&pending, |_| true);
        let mut acc = pending.remove(start).clone();
        while !pending.is_empty() {
            let next = if pending.iter().any(|r| r.schema.intersects(&acc.schema)) {
                argmin(&pending, |r| r.schema.intersects(&acc.schema))
            } else {
                argmin(&pending, |_| true)
            };
            let r = pending.remove(next);
            acc = binary_join(&acc, r)?;
        }
        Ok(acc)
    }

    /// Sums out `out`, which must be a subset of the schema.
    pub fn marginalize(&self, out: &Schema) -> Result<Relation> {
        if let Some(a) = out.iter().find(|a| !self.schema.contains(*a)) {
            return Err(Error::MissingAttribute(a));
        }
        let keep = self.schema.minus(out);
        if self.identity {
            return Ok(Relation::identity(keep, self.kind));
        }
        if out.is_empty() {
            return Ok(self.clone());
        }
        let pos: Vec<usize> = keep.iter().map(|a| self.schema.position(a).unwrap()).collect();
        let mut rows = BTreeMap::new();
        for (t, v) in &self.rows {
            let key: Tuple = pos.iter().map(|&i| t[i]).collect();
            accumulate(&mut rows, key, v.clone())?;
        }
        Ok(Relation {
            schema: keep,
            rows,
            kind: self.kind,
            identity: false,
        })
    }

    /// Marginalizes everything outside `keep` (attributes of `keep` absent
    /// from the schema are ignored).
    pub fn project_onto(&self, keep: &Schema) -> Result<Relation> {
        self.marginalize(&self.schema.minus(keep))
    }

    pub fn select(&self, pred: &Predicate) -> Result<Relation> {
        let i = self
            .schema
            .position(pred.attr)
            .ok_or(Error::MissingAttribute(pred.attr))?;
        if self.identity {
            return Err(Error::Unsupported(format!(
                "selection {pred} on a pass-through identity relation"
            )));
        }
        Ok(Relation {
            schema: self.schema.clone(),
            rows: self
                .rows
                .iter()
                .filter(|(t, _)| pred.eval(t[i]))
                .map(|(t, v)| (t.clone(), v.clone()))
                .collect(),
            kind: self.kind,
            identity: false,
        })
    }

    /// Distinct projection onto `attrs ∩ schema`, every tuple annotated one.
    pub fn indicator_projection(&self, attrs: &Schema) -> Result<Relation> {
        let keep = self.schema.intersect(attrs);
        if keep.is_empty() {
            return Err(Error::Schema(format!(
                "indicator projection of {} onto disjoint {}",
                self.schema, attrs
            )));
        }
        let pos: Vec<usize> = keep.iter().map(|a| self.schema.position(a).unwrap()).collect();
        let one = self.kind.one();
        let rows = self
            .rows
            .keys()
            .map(|t| (pos.iter().map(|&i| t[i]).collect::<Tuple>(), one.clone()))
            .collect();
        Ok(Relation {
            schema: keep,
            rows,
            kind: self.kind,
            identity: false,
        })
    }

    /// Pointwise sum of two relations over the same schema.
    pub fn add(&self, other: &Relation) -> Result<Relation> {
        if self.schema != other.schema || self.identity || other.identity {
            return Err(Error::Schema(format!(
                "cannot add relations over {} and {}",
                self.schema, other.schema
            )));
        }
        let mut out = self.clone();
        for (t, v) in &other.rows {
            out.kind.check(v)?;
            accumulate(&mut out.rows, t.clone(), v.clone())?;
        }
        Ok(out)
    }

    pub fn negate(&self) -> Result<Relation> {
        let mut out = self.clone();
        for v in out.rows.values_mut() {
            *v = v.negate()?;
        }
        Ok(out)
    }

    /// Equality with a relative tolerance on floating annotations.
    pub fn approx_eq(&self, other: &Relation, rel_tol: f64) -> bool {
        self.schema == other.schema
            && self.identity == other.identity
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|((ta, va), (tb, vb))| ta == tb && va.approx_eq(vb, rel_tol))
    }

    /// Serialized form used for byte-level comparison of message caches.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.rows.len() * 16);
        out.push(self.identity as u8);
        out.extend_from_slice(&(self.schema.len() as u32).to_le_bytes());
        for a in self.schema.iter() {
            out.extend_from_slice(&a.to_le_bytes());
        }
        for (t, v) in &self.rows {
            for x in t {
                out.extend_from_slice(&x.to_le_bytes());
            }
            v.write_bytes(&mut out);
        }
        out
    }
}

fn accumulate(rows: &mut BTreeMap<Tuple, Value>, t: Tuple, v: Value) -> Result<()> {
    use std::collections::btree_map::Entry;
    match rows.entry(t) {
        Entry::Vacant(e) => {
            if !v.is_zero() {
                e.insert(v);
            }
        }
        Entry::Occupied(mut e) => {
            let sum = e.get().add(&v)?;
            if sum.is_zero() {
                e.remove();
            } else {
                *e.get_mut() = sum;
            }
        }
    }
    Ok(())
}

fn argmin(rels: &[&Relation], eligible: impl Fn(&Relation) -> bool) -> usize {
    let mut best = None;
    for (i, r) in rels.iter().enumerate() {
        if !eligible(r) {
            continue;
        }
        match best {
            Some((_, n)) if n <= r.len() => {}
            _ => best = Some((i, r.len())),
        }
    }
    best.map(|(i, _)| i).unwrap_or(0)
}

fn binary_join(a: &Relation, b: &Relation) -> Result<Relation> {
    let schema = a.schema.union(&b.schema);
    let shared = a.schema.intersect(&b.schema);
    let a_key: Vec<usize> = shared.iter().map(|x| a.schema.position(x).unwrap()).collect();
    let b_key: Vec<usize> = shared.iter().map(|x| b.schema.position(x).unwrap()).collect();
    // Source of every output column: (false, i) from a, (true, i) from b.
    let layout: Vec<(bool, usize)> = schema
        .iter()
        .map(|x| match a.schema.position(x) {
            Some(i) => (false, i),
            None => (true, b.schema.position(x).unwrap()),
        })
        .collect();

    let mut index: HashMap<Vec<u32>, Vec<(&Tuple, &Value)>> = HashMap::with_capacity(b.rows.len());
    for (t, v) in &b.rows {
        index
            .entry(b_key.iter().map(|&i| t[i]).collect())
            .or_default()
            .push((t, v));
    }
    let mut out = Vec::new();
    let mut probe = Vec::with_capacity(a_key.len());
    for (ta, va) in &a.rows {
        probe.clear();
        probe.extend(a_key.iter().map(|&i| ta[i]));
        let Some(matches) = index.get(&probe) else {
            continue;
        };
        for (tb, vb) in matches {
            let v = va.mul(vb)?;
            if v.is_zero() {
                continue;
            }
            let t: Tuple = layout
                .iter()
                .map(|&(from_b, i)| if from_b { tb[i] } else { ta[i] })
                .collect();
            out.push((t, v));
        }
    }
    Ok(Relation {
        schema,
        rows: out.into_iter().collect(),
        kind: a.kind,
        identity: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: AttrId = 0;
    const B: AttrId = 1;
    const C: AttrId = 2;
    const K: SemiringKind = SemiringKind::NatCount;

    fn rel(attrs: &[AttrId], rows: &[(&[u32], u64)]) -> Relation {
        Relation::from_rows(attrs, K, rows.iter().map(|(t, v)| (t.to_vec(), Value::Nat(*v)))).unwrap()
    }

    #[test]
    fn join_multiplies_matching_annotations() {
        let r = rel(&[A, B], &[(&[1, 1], 2), (&[1, 2], 3)]);
        let m = rel(&[A], &[(&[1], 5)]);
        let j = Relation::join(&[&r, &m]).unwrap();
        assert_eq!(j, rel(&[A, B], &[(&[1, 1], 10), (&[1, 2], 15)]));
    }

    #[test]
    fn join_skips_identity() {
        let r = rel(&[A, B], &[(&[1, 1], 2), (&[1, 2], 3)]);
        let id = Relation::identity(r.schema().clone(), K);
        assert_eq!(Relation::join(&[&r, &id]).unwrap(), r);
        assert!(Relation::join(&[&id, &id]).unwrap().is_identity());
    }

    #[test]
    fn join_without_matches_is_empty() {
        let r = rel(&[A, B], &[(&[1, 1], 2)]);
        let s = rel(&[A, C], &[(&[2, 1], 2)]);
        let j = Relation::join(&[&r, &s]).unwrap();
        assert!(j.is_empty());
        assert_eq!(j.schema(), &Schema::new([A, B, C]));
    }

    #[test]
    fn from_rows_reorders_columns() {
        let r = Relation::from_rows(&[C, A], K, [(vec![7, 1], Value::Nat(1))]).unwrap();
        assert_eq!(r.get(&[1, 7]), Some(&Value::Nat(1)));
    }

    #[test]
    fn marginalize_sums() {
        let r = rel(&[A, B], &[(&[1, 1], 2), (&[1, 2], 3)]);
        assert_eq!(r.marginalize(&Schema::new([B])).unwrap(), rel(&[A], &[(&[1], 5)]));
        assert_eq!(r.marginalize(&Schema::empty()).unwrap(), r);
        let t = rel(&[A], &[(&[1], 4), (&[2], 6), (&[3], 9)]);
        let all = t.marginalize(t.schema()).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all.get(&[]), Some(&Value::Nat(19)));
        assert!(matches!(r.marginalize(&Schema::new([C])), Err(Error::MissingAttribute(C))));
    }

    #[test]
    fn select_filters_rows() {
        let r = rel(&[C], &[(&[1], 3), (&[2], 5)]);
        assert_eq!(r.select(&Predicate::new(C, Comparator::Eq, 1)).unwrap(), rel(&[C], &[(&[1], 3)]));
        assert_eq!(r.select(&Predicate::new(C, Comparator::Ge, 0)).unwrap(), r);
        assert!(r.select(&Predicate::new(C, Comparator::Lt, 0)).unwrap().is_empty());
        assert!(r.select(&Predicate::new(A, Comparator::Eq, 0)).is_err());
    }

    #[test]
    fn indicator_projection_cases() {
        let r = rel(&[A, B], &[(&[1, 1], 2), (&[1, 2], 3)]);
        assert_eq!(r.indicator_projection(&Schema::new([A])).unwrap(), rel(&[A], &[(&[1], 1)]));
        let keyed = r.indicator_projection(&Schema::new([A, B])).unwrap();
        assert_eq!(keyed, rel(&[A, B], &[(&[1, 1], 1), (&[1, 2], 1)]));
        assert!(r.indicator_projection(&Schema::new([C])).is_err());
    }

    #[test]
    fn ring_sums_cancel() {
        let k = SemiringKind::IntCountRing;
        let r = Relation::from_rows(&[A], k, [(vec![1], Value::Int(2)), (vec![2], Value::Int(1))]).unwrap();
        let d = Relation::from_rows(&[A], k, [(vec![1], Value::Int(-2))]).unwrap();
        let s = r.add(&d).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.get(&[2]), Some(&Value::Int(1)));
    }
}
