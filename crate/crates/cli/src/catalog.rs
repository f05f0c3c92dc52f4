//! Catalog files, CSV loading and per-attribute dictionaries.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cjt_core::{AttrId, Comparator, Predicate, SemiringKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemiringName {
    #[default]
    Nat,
    Int,
    Covariance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationEntry {
    pub name: String,
    /// CSV path, relative to the catalog file.
    pub path: PathBuf,
    pub attributes: Vec<String>,
    /// Attributes encoded in value order so range predicates work.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ordered: Vec<String>,
    /// Numeric columns this relation lifts into the covariance aggregate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BagEntry {
    pub attrs: Vec<String>,
    #[serde(default)]
    pub relations: Vec<String>,
    #[serde(default)]
    pub empty: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplicitJt {
    pub bags: Vec<BagEntry>,
    /// Pairs of positions in `bags`.
    pub edges: Vec<[usize; 2]>,
}

/// The string `"auto"`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Auto {
    #[default]
    Auto,
}

/// `"auto"` builds the tree by GYO reduction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JtEntry {
    Auto(Auto),
    Explicit(ExplicitJt),
}

impl Default for JtEntry {
    fn default() -> Self {
        JtEntry::Auto(Auto::Auto)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Catalog {
    #[serde(default)]
    pub semiring: SemiringName,
    pub relations: Vec<RelationEntry>,
    /// Covariance slot of every feature attribute.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub feature_slots: BTreeMap<String, usize>,
    #[serde(default)]
    pub jt: JtEntry,
}

impl Catalog {
    pub fn read(path: &Path) -> Result<Catalog> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading catalog {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing catalog {}", path.display()))
    }

    pub fn kind(&self) -> Result<SemiringKind> {
        Ok(match self.semiring {
            SemiringName::Nat => SemiringKind::NatCount,
            SemiringName::Int => SemiringKind::IntCountRing,
            SemiringName::Covariance => {
                let d = self
                    .feature_slots
                    .values()
                    .max()
                    .map(|m| m + 1)
                    .ok_or_else(|| anyhow!("the covariance semi-ring needs feature_slots"))?;
                SemiringKind::Covariance(d)
            }
        })
    }
}

/// Raw CSV contents reordered to the declared attribute order.
pub fn read_csv(path: &Path, attributes: &[String]) -> Result<Vec<Vec<String>>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if let Some(col) = header.iter().find(|h| !attributes.contains(h)) {
        bail!("{}: column {col:?} is not a declared attribute", path.display());
    }
    let mut pos = Vec::with_capacity(attributes.len());
    for a in attributes {
        pos.push(
            header
                .iter()
                .position(|h| h == a)
                .ok_or_else(|| anyhow!("{}: missing column {a:?}", path.display()))?,
        );
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        rows.push(pos.iter().map(|&i| rec.get(i).unwrap_or("").trim().to_string()).collect());
    }
    Ok(rows)
}

fn compare_raw(a: &str, b: &str, numeric: bool) -> Ordering {
    if numeric {
        let (x, y): (f64, f64) = (a.parse().unwrap(), b.parse().unwrap());
        x.total_cmp(&y)
    } else {
        a.cmp(b)
    }
}

/// String ↔ code mapping for one attribute. Ordered dictionaries assign
/// codes by rank (numerically when every value parses as a number).
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    pub ordered: bool,
    numeric: bool,
    values: Vec<String>,
    codes: HashMap<String, u32>,
}

impl Dictionary {
    pub fn build<'a>(ordered: bool, raw: impl IntoIterator<Item = &'a str>) -> Dictionary {
        let mut d = Dictionary {
            ordered,
            ..Default::default()
        };
        for v in raw {
            if !d.codes.contains_key(v) {
                d.codes.insert(v.to_string(), d.values.len() as u32);
                d.values.push(v.to_string());
            }
        }
        if ordered {
            d.numeric = d.values.iter().all(|v| v.parse::<f64>().is_ok_and(f64::is_finite));
            let numeric = d.numeric;
            d.values.sort_by(|a, b| compare_raw(a, b, numeric));
            d.codes = d.values.iter().enumerate().map(|(i, v)| (v.clone(), i as u32)).collect();
        }
        d
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn encode(&self, v: &str) -> Option<u32> {
        self.codes.get(v).copied()
    }

    /// Code for `v`, adding it if unseen. An ordered dictionary only accepts
    /// new values that sort after every existing one.
    pub fn encode_or_insert(&mut self, v: &str) -> Result<u32> {
        if let Some(c) = self.encode(v) {
            return Ok(c);
        }
        if self.ordered {
            if self.numeric && v.parse::<f64>().is_err() {
                bail!("value {v:?} is not numeric like the rest of this ordered attribute");
            }
            if let Some(last) = self.values.last() {
                if compare_raw(v, last, self.numeric) != Ordering::Greater {
                    bail!("value {v:?} would break the order of an ordered attribute; reload the catalog instead");
                }
            }
        }
        let c = self.values.len() as u32;
        self.codes.insert(v.to_string(), c);
        self.values.push(v.to_string());
        Ok(c)
    }

    pub fn decode(&self, c: u32) -> &str {
        self.values.get(c as usize).map(String::as_str).unwrap_or("?")
    }

    /// Rank of `v` among the stored values: how many sort strictly below it,
    /// and whether it is present.
    fn rank(&self, v: &str) -> Result<(u32, bool)> {
        if self.numeric && v.parse::<f64>().is_err() {
            bail!("constant {v:?} is not numeric");
        }
        let below = self
            .values
            .partition_point(|x| compare_raw(x, v, self.numeric) == Ordering::Less) as u32;
        let found = self
            .values
            .get(below as usize)
            .is_some_and(|x| compare_raw(x, v, self.numeric) == Ordering::Equal);
        Ok((below, found))
    }

    /// Predicate over codes equivalent to `attr op v` over raw values.
    /// `None` means the predicate holds for every value.
    pub fn rewrite(&self, attr: AttrId, op: Comparator, v: &str) -> Result<Option<Predicate>> {
        let code = self.encode(v);
        if !self.ordered {
            return match (op, code) {
                (Comparator::Eq, Some(c)) => Ok(Some(Predicate::new(attr, op, c))),
                (Comparator::Eq, None) => Ok(Some(Predicate::new(attr, op, u32::MAX))),
                (Comparator::Ne, Some(c)) => Ok(Some(Predicate::new(attr, op, c))),
                (Comparator::Ne, None) => Ok(None),
                _ => bail!("range predicate {} on an attribute not declared ordered", op.symbol()),
            };
        }
        let (below, found) = self.rank(v)?;
        let p = |op, c| Ok(Some(Predicate::new(attr, op, c)));
        match (op, found) {
            (Comparator::Eq, true) | (Comparator::Ne, true) | (Comparator::Le, true) | (Comparator::Gt, true) => {
                p(op, below)
            }
            (Comparator::Eq, false) => p(Comparator::Eq, u32::MAX),
            (Comparator::Ne, false) => Ok(None),
            (Comparator::Lt, _) => p(Comparator::Lt, below),
            (Comparator::Le, false) => p(Comparator::Lt, below),
            (Comparator::Gt, false) | (Comparator::Ge, _) => p(Comparator::Ge, below),
        }
    }
}
