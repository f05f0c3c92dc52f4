//! Text formats for query and update specs.
//!
//! Entries are `key = value`, separated by newlines or `;`; `#` starts a
//! comment.
//!
//! ```text
//! group = A, B
//! where = A < 10, C != x
//! exclude = T
//! version R = 2
//! ```
//!
//! Updates name one relation and list rows (comma-separated values in the
//! relation's declared attribute order, rows separated by `|`), or CSV files
//! with a header row:
//!
//! ```text
//! relation = R
//! insert = 1, 2 | 3, 4
//! delete_csv = removed.csv
//! ```

use anyhow::{anyhow, bail, Result};
use cjt_core::Comparator;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPredicate {
    pub attr: String,
    pub op: Comparator,
    pub value: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawQuery {
    pub group: Vec<String>,
    pub exclude: Vec<String>,
    pub predicates: Vec<RawPredicate>,
    pub versions: Vec<(String, u32)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawUpdate {
    pub relation: String,
    pub inserts: Vec<Vec<String>>,
    pub deletes: Vec<Vec<String>>,
    pub insert_csv: Vec<String>,
    pub delete_csv: Vec<String>,
}

fn entries(text: &str) -> impl Iterator<Item = Result<(String, String)>> + '_ {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(';'))
        .map(str::trim)
        .filter(|e| !e.is_empty())
        .map(|e| {
            let (k, v) = e.split_once('=').ok_or_else(|| anyhow!("expected `key = value`, got {e:?}"))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

pub fn parse_predicate(text: &str) -> Result<RawPredicate> {
    let i = text
        .find(['<', '>', '=', '!'])
        .ok_or_else(|| anyhow!("predicate {text:?} has no comparison"))?;
    let rest = &text[i..];
    let (op, len) = [
        ("!=", Comparator::Ne),
        ("<=", Comparator::Le),
        (">=", Comparator::Ge),
        ("=", Comparator::Eq),
        ("<", Comparator::Lt),
        (">", Comparator::Gt),
    ]
    .iter()
    .find(|(s, _)| rest.starts_with(s))
    .map(|(s, op)| (*op, s.len()))
    .ok_or_else(|| anyhow!("unknown comparison in {text:?}"))?;
    let attr = text[..i].trim();
    let value = rest[len..].trim();
    if attr.is_empty() || value.is_empty() {
        bail!("predicate {text:?} needs an attribute and a constant");
    }
    Ok(RawPredicate {
        attr: attr.to_string(),
        op,
        value: value.to_string(),
    })
}

pub fn parse_query(text: &str) -> Result<RawQuery> {
    let mut q = RawQuery::default();
    for e in entries(text) {
        let (k, v) = e?;
        match k.as_str() {
            "group" | "group_by" => q.group.extend(list(&v)),
            "exclude" => q.exclude.extend(list(&v)),
            "where" | "filter" => {
                for p in list(&v) {
                    q.predicates.push(parse_predicate(&p)?);
                }
            }
            _ => match k.strip_prefix("version") {
                Some(rel) if !rel.trim().is_empty() => {
                    let n = v.parse().map_err(|_| anyhow!("version {v:?} is not a number"))?;
                    q.versions.push((rel.trim().to_string(), n));
                }
                _ => bail!("unknown query key {k:?}"),
            },
        }
    }
    Ok(q)
}

fn rows(v: &str) -> Vec<Vec<String>> {
    v.split('|').map(list).filter(|r| !r.is_empty()).collect()
}

pub fn parse_update(text: &str) -> Result<RawUpdate> {
    let mut u = RawUpdate::default();
    for e in entries(text) {
        let (k, v) = e?;
        match k.as_str() {
            "relation" => u.relation = v,
            "insert" => u.inserts.extend(rows(&v)),
            "delete" => u.deletes.extend(rows(&v)),
            "insert_csv" => u.insert_csv.push(v),
            "delete_csv" => u.delete_csv.push(v),
            _ => bail!("unknown update key {k:?}"),
        }
    }
    if u.relation.is_empty() {
        bail!("update spec needs `relation = <name>`");
    }
    Ok(u)
}
