//! Minimum Steiner tree over annotated bags by dynamic programming on
//! directed edges.
//!
//! `x[(p, b)][n]` is the fewest bags in a connected subtree of `b`'s side of
//! `p – b` that contains `b` and covers `n` annotations (`n = k` meaning at
//! least `k`); `x[..][0] = 0` stands for the empty subtree. Child tables are
//! folded in one at a time with a min-plus convolution.
//!
//! Annotations with several candidate bags use a second table indexed by
//! the set of annotations covered rather than their number.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::hypertree::{BagId, JunctionHypertree};

const INF: u32 = u32::MAX;

/// Most multi-candidate annotations solved exactly; the mask DP costs
/// `3^m` per tree edge.
pub const MASK_LIMIT: usize = 12;

struct Table {
    children: Vec<BagId>,
    /// `folds[j]` combines the first `j` children.
    folds: Vec<Vec<u32>>,
    full: Vec<u32>,
}

struct Dp<'a> {
    jt: &'a JunctionHypertree,
    weight: BTreeMap<BagId, usize>,
    k: usize,
    memo: BTreeMap<(Option<BagId>, BagId), Table>,
}

fn convolve(a: &[u32], b: &[u32], k: usize) -> Vec<u32> {
    let mut out = vec![INF; k + 1];
    for (i, &x) in a.iter().enumerate() {
        if x == INF {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            if y == INF {
                continue;
            }
            let n = (i + j).min(k);
            out[n] = out[n].min(x + y);
        }
    }
    out
}

impl Dp<'_> {
    fn table(&mut self, parent: Option<BagId>, b: BagId) -> &Table {
        if !self.memo.contains_key(&(parent, b)) {
            let children: Vec<BagId> = self.jt.neighbors(b).filter(|&c| Some(c) != parent).collect();
            let mut acc = vec![INF; self.k + 1];
            acc[0] = 0;
            let mut folds = vec![acc.clone()];
            for &c in &children {
                let t = self.table(Some(b), c).full.clone();
                acc = convolve(&acc, &t, self.k);
                folds.push(acc.clone());
            }
            let w = self.weight.get(&b).copied().unwrap_or(0);
            let mut full = vec![INF; self.k + 1];
            for (n, &x) in acc.iter().enumerate() {
                if x != INF {
                    let m = (n + w).min(self.k);
                    full[m] = full[m].min(x + 1);
                }
            }
            full[0] = 0;
            self.memo.insert((parent, b), Table { children, folds, full });
        }
        &self.memo[&(parent, b)]
    }

    /// Fewest bags of a tree containing `b` that covers `k`.
    fn including(&mut self, b: BagId) -> u32 {
        let k = self.k;
        let w = self.weight.get(&b).copied().unwrap_or(0);
        let acc = self.table(None, b).folds.last().unwrap().clone();
        (0..=k)
            .filter(|&n| acc[n] != INF && (n + w).min(k) == k)
            .map(|n| acc[n] + 1)
            .min()
            .unwrap_or(INF)
    }

    /// Adds to `out` a subtree rooted at `b` (away from `parent`) with
    /// `size` bags covering coverage index `n`.
    fn rebuild(&mut self, parent: Option<BagId>, b: BagId, n: usize, size: u32, out: &mut BTreeSet<BagId>) {
        out.insert(b);
        let k = self.k;
        let w = self.weight.get(&b).copied().unwrap_or(0);
        let (children, folds) = {
            let t = self.table(parent, b);
            (t.children.clone(), t.folds.clone())
        };
        let last = folds.last().unwrap();
        let mut want = (0..=k)
            .find(|&i| last[i] != INF && (i + w).min(k) == n && last[i] + 1 == size)
            .expect("dp table is consistent");
        let mut remaining = size - 1;
        for j in (0..children.len()).rev() {
            let prev = &folds[j];
            let c = children[j];
            let t = self.table(Some(b), c).full.clone();
            let (i, m) = (0..=k)
                .flat_map(|i| (0..=k).map(move |m| (i, m)))
                .find(|&(i, m)| {
                    prev[i] != INF && t[m] != INF && (i + m).min(k) == want && prev[i] + t[m] == remaining
                })
                .expect("dp fold is consistent");
            if m > 0 {
                self.rebuild(Some(b), c, m, t[m], out);
            }
            remaining -= t[m];
            want = i;
        }
    }
}

impl JunctionHypertree {
    /// Smallest connected set of bags covering at least `k` annotations,
    /// where annotation `i` may sit on any bag of `sets[i]`.
    ///
    /// Exact for single-bag candidates (any number of annotations) and for
    /// up to [`MASK_LIMIT`] annotations with several candidates. Past that,
    /// every bag is tried as a root with each annotation on its candidate
    /// nearest that root, which is only a heuristic.
    pub fn min_steiner_dp(&self, sets: &[BTreeSet<BagId>], k: usize) -> Result<(BTreeSet<BagId>, usize)> {
        let (bags, _) = self.min_steiner_assignment(sets, k)?;
        let n = bags.len();
        Ok((bags, n))
    }

    /// As [`Self::min_steiner_dp`], also returning the bag chosen for each
    /// annotation.
    pub(crate) fn min_steiner_assignment(
        &self,
        sets: &[BTreeSet<BagId>],
        k: usize,
    ) -> Result<(BTreeSet<BagId>, Vec<BagId>)> {
        if k > sets.len() {
            return Err(Error::InvalidQuery(format!(
                "cannot cover {k} annotations with only {} placeable",
                sets.len()
            )));
        }
        for s in sets {
            if s.is_empty() {
                return Err(Error::InvalidQuery("annotation with no candidate bag".into()));
            }
            for &b in s {
                self.bag(b)?;
            }
        }
        let single = sets.iter().all(|s| s.len() == 1);
        if !single && sets.len() <= MASK_LIMIT {
            return Ok(self.dp_masks(sets, k));
        }
        let roots: Vec<BagId> = if single {
            vec![*self.bags.keys().next().ok_or(Error::Schema("no bags".into()))?]
        } else {
            self.bags.keys().copied().collect()
        };
        let mut best: Option<(BTreeSet<BagId>, Vec<BagId>)> = None;
        for r in roots {
            let dist = self.distances(r);
            let assign: Vec<BagId> = sets
                .iter()
                .map(|s| *s.iter().min_by_key(|b| (dist[b], **b)).unwrap())
                .collect();
            let tree = self.dp_weighted(&assign, k);
            if best.as_ref().is_none_or(|(t, _)| tree.len() < t.len()) {
                best = Some((tree, assign));
            }
        }
        Ok(best.expect("at least one root"))
    }

    /// Subtree DP over sets of covered annotations. `g[v][S]` is the
    /// fewest bags of a connected subtree topped by `v` (rooted at the first
    /// bag) that covers every annotation in `S`.
    fn dp_masks(&self, sets: &[BTreeSet<BagId>], k: usize) -> (BTreeSet<BagId>, Vec<BagId>) {
        let m = sets.len();
        let full = 1usize << m;
        let root = *self.bags.keys().next().expect("bags exist");
        let mut cover: BTreeMap<BagId, usize> = BTreeMap::new();
        for (i, s) in sets.iter().enumerate() {
            for &b in s {
                *cover.entry(b).or_default() |= 1 << i;
            }
        }
        // Post-order with parents.
        let mut order = vec![(root, None)];
        let mut i = 0;
        while i < order.len() {
            let (b, p) = order[i];
            for c in self.neighbors(b) {
                if Some(c) != p {
                    order.push((c, Some(b)));
                }
            }
            i += 1;
        }
        let mut g: BTreeMap<BagId, Vec<u32>> = BTreeMap::new();
        let mut folds: BTreeMap<BagId, (Vec<BagId>, Vec<Vec<u32>>)> = BTreeMap::new();
        for &(b, p) in order.iter().rev() {
            let children: Vec<BagId> = self.neighbors(b).filter(|&c| Some(c) != p).collect();
            let mut h = vec![INF; full];
            h[0] = 0;
            let mut steps = vec![h.clone()];
            for c in &children {
                let t = &g[c];
                let mut next = h.clone();
                for (s, slot) in next.iter_mut().enumerate() {
                    // Nonempty a ⊆ s covered by the child's subtree.
                    let mut a = s;
                    while a > 0 {
                        let (x, y) = (h[s & !a], t[a]);
                        if x != INF && y != INF {
                            *slot = (*slot).min(x + y);
                        }
                        a = (a - 1) & s;
                    }
                }
                h = next;
                steps.push(h.clone());
            }
            let cov = cover.get(&b).copied().unwrap_or(0);
            let gb: Vec<u32> = (0..full)
                .map(|s| match h[s & !cov] {
                    INF => INF,
                    x => x + 1,
                })
                .collect();
            g.insert(b, gb);
            folds.insert(b, (children, steps));
        }
        let mut out = BTreeSet::new();
        if k > 0 {
            let (_, b, s) = g
                .iter()
                .flat_map(|(&b, t)| {
                    t.iter()
                        .enumerate()
                        .filter(|&(s, &x)| x != INF && (s.count_ones() as usize) >= k)
                        .map(move |(s, &x)| (x, b, s))
                })
                .min()
                .expect("k annotations are placeable");
            let mut stack = vec![(b, s)];
            while let Some((b, s)) = stack.pop() {
                out.insert(b);
                let (children, steps) = &folds[&b];
                let mut want = s & !cover.get(&b).copied().unwrap_or(0);
                for j in (0..children.len()).rev() {
                    let (prev, cur, t) = (&steps[j], steps[j + 1][want], &g[&children[j]]);
                    if prev[want] == cur {
                        continue;
                    }
                    let mut a = want;
                    loop {
                        assert!(a > 0, "mask dp fold is consistent");
                        let (x, y) = (prev[want & !a], t[a]);
                        if x != INF && y != INF && x + y == cur {
                            break;
                        }
                        a = (a - 1) & want;
                    }
                    stack.push((children[j], a));
                    want &= !a;
                }
            }
        }
        let dist = self.distances(*out.iter().next().unwrap_or(&root));
        let assign = sets
            .iter()
            .map(|s| match s.intersection(&out).next() {
                Some(&b) => b,
                None => *s.iter().min_by_key(|b| (dist[b], **b)).unwrap(),
            })
            .collect();
        (out, assign)
    }

    fn dp_weighted(&self, assign: &[BagId], k: usize) -> BTreeSet<BagId> {
        let mut out = BTreeSet::new();
        if k == 0 {
            return out;
        }
        let mut weight = BTreeMap::new();
        for &b in assign {
            *weight.entry(b).or_insert(0) += 1;
        }
        let mut dp = Dp {
            jt: self,
            weight,
            k,
            memo: BTreeMap::new(),
        };
        let mut best: Option<(u32, BagId)> = None;
        for &b in self.bags.keys() {
            let size = dp.including(b);
            if size != INF && best.is_none_or(|(s, _)| size < s) {
                best = Some((size, b));
            }
        }
        let (size, center) = best.expect("k annotations are placeable");
        dp.rebuild(None, center, k, size, &mut out);
        out
    }
}
