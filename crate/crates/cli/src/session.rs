//! A loaded catalog plus its calibrated tree; one method per command.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use cjt_core::analytics::{build_cube, CubeIndex};
use cjt_core::{
    lift_sparse, AnnotationPlacement, AttrId, BagId, DeltaRelation, JtOptions, JunctionHypertree, PlacementMode,
    Predicate, QuerySpec, RelId, Relation, Schema, SemiringKind, Stats, Value,
};
use serde_json::json;

use crate::catalog::{read_csv, BagEntry, Catalog, Dictionary, ExplicitJt, JtEntry, RelationEntry};
use crate::spec::{RawPredicate, RawQuery, RawUpdate};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    #[default]
    Eager,
    Lazy,
}

/// What one command printed and what it cost.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: String,
    pub output: String,
    pub stats: Stats,
}

#[derive(Debug, Clone)]
struct RelInfo {
    /// Attribute names in file column order.
    columns: Vec<String>,
    /// (column, slot) of every lifted feature.
    features: Vec<(usize, usize)>,
}

pub struct Session {
    pub catalog: Catalog,
    pub kind: SemiringKind,
    pub jt: JunctionHypertree,
    pub cube: Option<CubeIndex>,
    pub mode: Mode,
    names: Vec<String>,
    ids: HashMap<String, AttrId>,
    dicts: BTreeMap<AttrId, Dictionary>,
    rels: BTreeMap<RelId, RelInfo>,
    calibrated: bool,
    pub history: Vec<Outcome>,
}

impl Session {
    pub fn load(path: &Path, options: JtOptions, mode: Mode) -> Result<Session> {
        let catalog = Catalog::read(path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Session::from_catalog(catalog, &dir, options, mode)
    }

    pub fn from_catalog(catalog: Catalog, dir: &Path, options: JtOptions, mode: Mode) -> Result<Session> {
        let kind = catalog.kind()?;
        let mut names = Vec::new();
        let mut ids = HashMap::new();
        for r in &catalog.relations {
            for a in &r.attributes {
                if !ids.contains_key(a) {
                    ids.insert(a.clone(), names.len() as AttrId);
                    names.push(a.clone());
                }
            }
        }
        let mut raw = Vec::new();
        for r in &catalog.relations {
            let mut seen = BTreeSet::new();
            if let Some(a) = r.attributes.iter().find(|a| !seen.insert(*a)) {
                bail!("relation {} declares attribute {a:?} twice", r.name);
            }
            for o in r.ordered.iter().chain(&r.features) {
                if !r.attributes.contains(o) {
                    bail!("relation {}: {o:?} is not one of its attributes", r.name);
                }
            }
            raw.push(read_csv(&resolve(dir, &r.path), &r.attributes)?);
        }
        let ordered: BTreeSet<&String> = catalog.relations.iter().flat_map(|r| &r.ordered).collect();
        let mut dicts = BTreeMap::new();
        for (name, &id) in &ids {
            let values = catalog.relations.iter().zip(&raw).flat_map(|(r, rows)| {
                let col = r.attributes.iter().position(|a| a == name);
                rows.iter().filter_map(move |row| col.map(|c| row[c].as_str()))
            });
            dicts.insert(id, Dictionary::build(ordered.contains(name), values));
        }
        let mut session = Session {
            kind,
            jt: JunctionHypertree::new(kind),
            cube: None,
            mode,
            names,
            ids,
            dicts,
            rels: BTreeMap::new(),
            calibrated: false,
            history: Vec::new(),
            catalog: catalog.clone(),
        };
        let mut loaded = Vec::new();
        for (i, (r, rows)) in catalog.relations.iter().zip(&raw).enumerate() {
            let info = session.rel_info(&r.name, &r.attributes, &r.features)?;
            session.rels.insert(i as RelId, info);
            let rel = session.encode_rows(i as RelId, rows, false)?.0;
            loaded.push((r.name.clone(), rel));
        }
        session.jt = match &catalog.jt {
            JtEntry::Auto(_) => JunctionHypertree::default_jt(kind, loaded).map_err(|e| match e {
                cjt_core::Error::Cyclic => anyhow!("{e}: describe the tree under \"jt\" in the catalog"),
                e => e.into(),
            })?,
            JtEntry::Explicit(x) => session.explicit_jt(x, loaded)?,
        };
        session.jt.set_options(options);
        Ok(session)
    }

    fn explicit_jt(&self, x: &ExplicitJt, loaded: Vec<(String, Relation)>) -> Result<JunctionHypertree> {
        let mut jt = JunctionHypertree::new(self.kind);
        let mut by_name = HashMap::new();
        for (name, rel) in loaded {
            let id = jt.add_relation(&name, rel)?;
            by_name.insert(name, id);
        }
        let mut bags = Vec::new();
        for b in &x.bags {
            if b.empty && !b.relations.is_empty() {
                bail!("empty bag {:?} lists relations", b.attrs);
            }
            let attrs = b.attrs.iter().map(|a| self.attr(a)).collect::<Result<Schema>>()?;
            let id = jt.add_bag(attrs);
            for r in &b.relations {
                let rel = *by_name.get(r).ok_or_else(|| anyhow!("tree bag names unknown relation {r:?}"))?;
                jt.assign(rel, id)?;
            }
            bags.push(id);
        }
        for &[a, b] in &x.edges {
            let (u, v) = (
                *bags.get(a).ok_or_else(|| anyhow!("edge names bag {a}"))?,
                *bags.get(b).ok_or_else(|| anyhow!("edge names bag {b}"))?,
            );
            jt.add_edge(u, v)?;
        }
        jt.check()?;
        Ok(jt)
    }

    fn rel_info(&self, name: &str, columns: &[String], features: &[String]) -> Result<RelInfo> {
        let mut out = Vec::new();
        for f in features {
            let slot = *self
                .catalog
                .feature_slots
                .get(f)
                .ok_or_else(|| anyhow!("relation {name}: feature {f:?} has no slot in feature_slots"))?;
            out.push((columns.iter().position(|c| c == f).unwrap(), slot));
        }
        if !out.is_empty() && !matches!(self.kind, SemiringKind::Covariance(_)) {
            bail!("relation {name} lists features but the semi-ring is {}", self.kind);
        }
        Ok(RelInfo {
            columns: columns.to_vec(),
            features: out,
        })
    }

    pub fn attr(&self, name: &str) -> Result<AttrId> {
        self.ids.get(name).copied().ok_or_else(|| anyhow!("unknown attribute {name:?}"))
    }

    pub fn attr_name(&self, a: AttrId) -> &str {
        &self.names[a as usize]
    }

    pub fn relation_id(&self, name: &str) -> Result<RelId> {
        self.jt.relation_by_name(name).ok_or_else(|| anyhow!("unknown relation {name:?}"))
    }

    fn annotation(&self, rel: RelId, row: &[String]) -> Result<Value> {
        Ok(match self.kind {
            SemiringKind::NatCount => Value::Nat(1),
            SemiringKind::IntCountRing => Value::Int(1),
            SemiringKind::Covariance(d) => {
                let mut slots = Vec::new();
                for &(col, slot) in &self.rels[&rel].features {
                    let x: f64 = row[col]
                        .parse()
                        .map_err(|_| anyhow!("feature {} value {:?} is not numeric", self.rels[&rel].columns[col], row[col]))?;
                    slots.push((slot, x));
                }
                lift_sparse(d, &slots)
            }
        })
    }

    /// Encodes raw rows of `rel` (columns in its file order). New values
    /// extend the dictionaries unless `existing_only`, in which case rows
    /// with unseen values are reported as missing.
    fn encode_rows(&mut self, rel: RelId, rows: &[Vec<String>], existing_only: bool) -> Result<(Relation, usize)> {
        let columns = self.rels[&rel].columns.clone();
        let attrs = columns.iter().map(|c| self.attr(c)).collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(rows.len());
        let mut missing = 0;
        'rows: for row in rows {
            if row.len() != attrs.len() {
                bail!("row {row:?} has {} values; expected {} ({})", row.len(), attrs.len(), columns.join(", "));
            }
            let mut t = Vec::with_capacity(row.len());
            for (a, v) in attrs.iter().zip(row) {
                let dict = self.dicts.get_mut(a).unwrap();
                if existing_only {
                    match dict.encode(v) {
                        Some(c) => t.push(c),
                        None => {
                            missing += 1;
                            continue 'rows;
                        }
                    }
                } else {
                    t.push(dict.encode_or_insert(v)?);
                }
            }
            out.push((t, self.annotation(rel, row)?));
        }
        Ok((Relation::from_rows(&attrs, self.kind, out)?, missing))
    }

    pub fn query_spec(&self, q: &RawQuery) -> Result<QuerySpec> {
        let mut spec = QuerySpec::new();
        for g in &q.group {
            spec = spec.group_by([self.attr(g)?]);
        }
        for r in &q.exclude {
            spec = spec.exclude(self.relation_id(r)?);
        }
        for (r, v) in &q.versions {
            spec = spec.version(self.relation_id(r)?, *v);
        }
        for p in self.predicates(&q.predicates)? {
            spec = spec.filter(p);
        }
        Ok(spec)
    }

    pub fn predicates(&self, raw: &[RawPredicate]) -> Result<Vec<Predicate>> {
        let mut out = Vec::new();
        for p in raw {
            let a = self.attr(&p.attr)?;
            if let Some(x) = self.dicts[&a]
                .rewrite(a, p.op, &p.value)
                .with_context(|| format!("predicate on {}", p.attr))?
            {
                out.push(x);
            }
        }
        Ok(out)
    }

    // ---- output ----

    fn slot_names(&self) -> Vec<String> {
        let d = match self.kind {
            SemiringKind::Covariance(d) => d,
            _ => return Vec::new(),
        };
        let mut names: Vec<String> = (0..d).map(|i| format!("s{i}")).collect();
        for (n, &s) in &self.catalog.feature_slots {
            names[s] = n.clone();
        }
        names
    }

    /// CSV with decoded group-by columns followed by the aggregate.
    pub fn render(&self, rel: &Relation) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = rel.schema().iter().map(|a| self.attr_name(a).to_string()).collect();
        let slots = self.slot_names();
        match self.kind {
            SemiringKind::Covariance(d) => {
                header.push("count".into());
                header.extend(slots.iter().map(|s| format!("sum:{s}")));
                for i in 0..d {
                    for j in i..d {
                        header.push(format!("q:{}:{}", slots[i], slots[j]));
                    }
                }
            }
            _ => header.push("count".into()),
        }
        w.write_record(&header)?;
        for (t, v) in rel.rows() {
            let mut rec: Vec<String> = rel
                .schema()
                .iter()
                .zip(t)
                .map(|(a, &c)| self.dicts[&a].decode(c).to_string())
                .collect();
            match v {
                Value::Nat(n) => rec.push(n.to_string()),
                Value::Int(n) => rec.push(n.to_string()),
                Value::Cov(c) => {
                    rec.push(c.count.to_string());
                    rec.extend(c.sums.iter().map(f64::to_string));
                    let d = c.dim();
                    for i in 0..d {
                        for j in i..d {
                            rec.push(c.quad_at(i, j).to_string());
                        }
                    }
                }
            }
            w.write_record(&rec)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    fn names_of(&self, attrs: impl IntoIterator<Item = AttrId>) -> String {
        attrs.into_iter().map(|a| self.attr_name(a)).collect::<Vec<_>>().join(",")
    }

    // ---- commands ----

    fn record(&mut self, command: &str, output: String, stats: Stats) -> Outcome {
        let o = Outcome {
            command: command.to_string(),
            output,
            stats,
        };
        self.history.push(o.clone());
        o
    }

    fn ensure_calibrated(&mut self) -> Result<()> {
        if !self.calibrated {
            self.jt.calibrate(&AnnotationPlacement::default())?;
            self.calibrated = true;
        }
        Ok(())
    }

    /// Current tree structure as JSON.
    pub fn build_jt(&mut self) -> Result<Outcome> {
        let desc = self.describe_jt()?;
        let text = serde_json::to_string_pretty(&desc)? + "\n";
        Ok(self.record("build-jt", text, Stats::default()))
    }

    fn describe_jt(&self) -> Result<ExplicitJt> {
        let ids = self.jt.bag_ids();
        let pos: HashMap<BagId, usize> = ids.iter().enumerate().map(|(i, b)| (*b, i)).collect();
        let mut bags = Vec::new();
        for &b in &ids {
            let bag = self.jt.bag(b)?;
            let relations = self
                .jt
                .relations_at(b)
                .into_iter()
                .map(|r| self.jt.relation_name(r).map(String::from))
                .collect::<Result<Vec<_>, _>>()?;
            bags.push(BagEntry {
                attrs: bag.attrs.iter().map(|a| self.attr_name(a).to_string()).collect(),
                empty: bag.is_empty_bag,
                relations,
            });
        }
        let edges = self.jt.edges().into_iter().map(|(u, v)| [pos[&u], pos[&v]]).collect();
        Ok(ExplicitJt { bags, edges })
    }

    pub fn calibrate(&mut self, q: &RawQuery) -> Result<Outcome> {
        let spec = self.query_spec(q)?;
        let root = self.jt.bag_ids()[0];
        let placement = self.jt.place_annotations(&spec, PlacementMode::SingleQuery { root })?;
        self.jt.reset_stats();
        let t0 = Instant::now();
        let rep = self.jt.calibrate(&placement)?;
        self.calibrated = true;
        let mut stats = self.jt.stats().clone();
        stats.phase("calibrate", t0.elapsed());
        let text = format!(
            "calibrated {} bags from root {}: {} upward + {} downward messages\n",
            self.jt.bag_count(),
            rep.root,
            rep.upward_messages,
            rep.downward_messages
        );
        Ok(self.record("calibrate", text, stats))
    }

    pub fn query(&mut self, q: &RawQuery) -> Result<Outcome> {
        self.ensure_calibrated()?;
        let spec = self.query_spec(q)?;
        self.jt.reset_stats();
        let out = self.jt.execute(&spec)?;
        let text = self.render(&out.result)?;
        Ok(self.record("query", text, out.stats))
    }

    fn delta_relation(&mut self, u: &RawUpdate, dir: &Path) -> Result<DeltaRelation> {
        let rel = self.relation_id(&u.relation)?;
        let columns = self.rels[&rel].columns.clone();
        let mut inserts = u.inserts.clone();
        let mut deletes = u.deletes.clone();
        for p in &u.insert_csv {
            inserts.extend(read_csv(&resolve(dir, Path::new(p)), &columns)?);
        }
        for p in &u.delete_csv {
            deletes.extend(read_csv(&resolve(dir, Path::new(p)), &columns)?);
        }
        let (ins, _) = self.encode_rows(rel, &inserts, false)?;
        let (del, missing) = self.encode_rows(rel, &deletes, true)?;
        let base = self.jt.relation(rel)?;
        let absent = missing
            + del
                .rows()
                .keys()
                .filter(|t| base.get(t).is_none())
                .count();
        if absent > 0 {
            bail!("{absent} deleted row(s) are not in {}", u.relation);
        }
        let rows = if del.is_empty() { ins } else { ins.add(&del.negate()?)? };
        Ok(DeltaRelation { rel, rows })
    }

    pub fn delta(&mut self, u: &RawUpdate, dir: &Path) -> Result<Outcome> {
        self.ensure_calibrated()?;
        let delta = self.delta_relation(u, dir)?;
        self.jt.reset_stats();
        let t0 = Instant::now();
        let rep = match self.mode {
            Mode::Eager => self.jt.apply_delta_eager(&delta)?,
            Mode::Lazy => self.jt.apply_delta_lazy(&delta)?,
        };
        let mut stats = self.jt.stats().clone();
        stats.phase("maintain", t0.elapsed());
        if let Some(cube) = self.cube.as_mut() {
            for p in cube.pivots.values_mut() {
                p.apply_delta_lazy(&delta)?;
            }
        }
        let text = format!(
            "{} is at version {}: {} messages updated, {} invalidated\n",
            u.relation,
            rep.version,
            rep.edges_updated.len(),
            rep.messages_invalidated
        );
        Ok(self.record("delta", text, stats))
    }

    pub fn cube(&mut self, dims: &[String], k: usize) -> Result<Outcome> {
        let dims = dims.iter().map(|d| self.attr(d)).collect::<Result<Vec<_>>>()?;
        let t0 = Instant::now();
        let cube = build_cube(&self.jt, &dims, k)?;
        let mut stats = Stats::default();
        let mut text = String::new();
        for (set, p) in &cube.pivots {
            stats.merge(p.stats());
            text += &format!("pivot [{}]: {} messages\n", self.names_of(set.iter().copied()), p.stats().messages_computed);
        }
        stats.phase("calibrate", t0.elapsed());
        self.cube = Some(cube);
        Ok(self.record("cube", text, stats))
    }

    pub fn olap(&mut self, group: &[String], preds: &[RawPredicate]) -> Result<Outcome> {
        let g = group.iter().map(|a| self.attr(a)).collect::<Result<Vec<_>>>()?;
        let preds = self.predicates(preds)?;
        let cube = self.cube.as_mut().ok_or_else(|| anyhow!("no cube: run `cube` first"))?;
        let out = cube.answer_olap(&g, &preds)?;
        let mut text = self.render(&out.result)?;
        text += &format!("# pivot [{}], steiner tree of {} bags\n", self.names_of(out.pivot.iter().copied()), out.steiner_size);
        Ok(self.record("olap", text, out.stats))
    }

    pub fn augment(
        &mut self,
        path: &Path,
        name: Option<&str>,
        keys: &[String],
        features: &[String],
    ) -> Result<Outcome> {
        self.ensure_calibrated()?;
        let name = match name {
            Some(n) => n.to_string(),
            None => path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| anyhow!("cannot name relation from {}", path.display()))?
                .to_string(),
        };
        if self.jt.relation_by_name(&name).is_some() {
            bail!("relation {name:?} already exists");
        }
        let header: Vec<String> = csv::Reader::from_path(path)
            .with_context(|| format!("opening {}", path.display()))?
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        for k in keys {
            self.attr(k)?;
            if !header.contains(k) {
                bail!("join key {k:?} is not a column of {}", path.display());
            }
        }
        let rows = read_csv(path, &header)?;
        for c in &header {
            if !self.ids.contains_key(c) {
                self.ids.insert(c.clone(), self.names.len() as AttrId);
                self.names.push(c.clone());
                self.dicts.insert(self.ids[c], Dictionary::default());
            }
        }
        let key_ids = keys.iter().map(|k| self.attr(k)).collect::<Result<Vec<_>>>()?;
        let info = self.rel_info(&name, &header, features)?;
        // Rows whose key values never occur in the tree join nothing.
        let key_cols: Vec<usize> = keys.iter().map(|k| header.iter().position(|c| c == k).unwrap()).collect();
        let rows: Vec<Vec<String>> = rows
            .into_iter()
            .filter(|r| key_cols.iter().all(|&c| self.dicts[&self.ids[&header[c]]].encode(&r[c]).is_some()))
            .collect();
        let placeholder = RelId::MAX;
        self.rels.insert(placeholder, info.clone());
        let encoded = self.encode_rows(placeholder, &rows, false);
        self.rels.remove(&placeholder);
        let rel = encoded?.0;
        self.jt.reset_stats();
        let t0 = Instant::now();
        let out = self.jt.augment(&name, rel, &key_ids)?;
        let mut stats = self.jt.stats().clone();
        stats.phase("augment", t0.elapsed());
        self.rels.insert(out.rel, info);
        self.catalog.relations.push(RelationEntry {
            name: name.clone(),
            path: path.to_path_buf(),
            attributes: header,
            ordered: Vec::new(),
            features: features.to_vec(),
        });
        let steiner: Vec<String> = out.steiner.iter().map(|b| b.to_string()).collect();
        let mut text = self.render(&out.aggregate)?;
        text += &format!(
            "# {name} on bag {}; steiner tree [{}]; {} messages{}\n",
            out.bag,
            steiner.join(","),
            out.messages_computed,
            if out.multi_bag { "; bags widened, tree needs recalibration" } else { "" }
        );
        if out.multi_bag {
            self.calibrated = false;
        }
        Ok(self.record("augment", text, stats))
    }

    pub fn train(&mut self, features: &[String], target: &str, lambda: f64) -> Result<Outcome> {
        self.ensure_calibrated()?;
        let slot = |n: &str| {
            self.catalog
                .feature_slots
                .get(n)
                .copied()
                .ok_or_else(|| anyhow!("{n:?} has no slot in feature_slots"))
        };
        let fs = features.iter().map(|f| slot(f)).collect::<Result<Vec<_>>>()?;
        let t = slot(target)?;
        self.jt.reset_stats();
        let m = self.jt.train_linreg(&fs, t, lambda)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["term", "value"])?;
        w.write_record(["intercept".to_string(), m.weights[0].to_string()])?;
        for (f, x) in features.iter().zip(&m.weights[1..]) {
            w.write_record([f.clone(), x.to_string()])?;
        }
        w.write_record(["r2".to_string(), m.r2.to_string()])?;
        w.write_record(["n".to_string(), m.n.to_string()])?;
        w.write_record(["lambda".to_string(), m.lambda.to_string()])?;
        let text = String::from_utf8(w.into_inner()?)?;
        let stats = self.jt.stats().clone();
        Ok(self.record("train", text, stats))
    }

    pub fn stats(&mut self) -> Result<Outcome> {
        let mut total = Stats::default();
        for o in &self.history {
            total.merge(&o.stats);
        }
        let text = format!("{}\n", serde_json::to_string_pretty(&stats_json("session", &total))?);
        Ok(self.record("stats", text, Stats::default()))
    }

    /// Writes every relation's current version as CSV plus a catalog that
    /// reloads the same tree.
    pub fn export(&mut self, dir: &Path) -> Result<Outcome> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut entries = Vec::new();
        for rel in self.jt.relation_ids().collect::<Vec<_>>() {
            let name = self.jt.relation_name(rel)?.to_string();
            let info = &self.rels[&rel];
            let r = self.jt.relation(rel)?;
            let file = format!("{name}.csv");
            let mut w = csv::Writer::from_path(dir.join(&file))?;
            w.write_record(&info.columns)?;
            let cols: Vec<usize> = info
                .columns
                .iter()
                .map(|c| r.schema().position(self.ids[c]).unwrap())
                .collect();
            for (t, v) in r.rows() {
                let rec: Vec<&str> = info
                    .columns
                    .iter()
                    .zip(&cols)
                    .map(|(c, &i)| self.dicts[&self.ids[c]].decode(t[i]))
                    .collect();
                for _ in 0..multiplicity(v)? {
                    w.write_record(&rec)?;
                }
            }
            w.flush()?;
            entries.push(RelationEntry {
                name: name.clone(),
                path: PathBuf::from(file),
                ordered: info
                    .columns
                    .iter()
                    .filter(|c| self.dicts[&self.ids[*c]].ordered)
                    .cloned()
                    .collect(),
                features: info.features.iter().map(|&(c, _)| info.columns[c].clone()).collect(),
                attributes: info.columns.clone(),
            });
        }
        let catalog = Catalog {
            semiring: self.catalog.semiring,
            relations: entries,
            feature_slots: self.catalog.feature_slots.clone(),
            jt: JtEntry::Explicit(self.describe_jt()?),
        };
        let path = dir.join("catalog.json");
        std::fs::write(&path, serde_json::to_string_pretty(&catalog)? + "\n")?;
        let text = format!("exported {} relations to {}\n", catalog.relations.len(), path.display());
        Ok(self.record("export", text, Stats::default()))
    }
}

fn multiplicity(v: &Value) -> Result<u64> {
    let n = match v {
        Value::Nat(n) => return Ok(*n),
        Value::Int(n) => *n as f64,
        Value::Cov(c) => c.count,
    };
    if n < 0.0 || n.fract() != 0.0 {
        bail!("cannot export a row with multiplicity {n}");
    }
    Ok(n as u64)
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

pub fn stats_json(command: &str, s: &Stats) -> serde_json::Value {
    let mut phases = serde_json::Map::new();
    for (n, d) in &s.phases {
        let ms = phases.get(n).and_then(|v| v.as_f64()).unwrap_or(0.0) + d.as_secs_f64() * 1e3;
        phases.insert(n.clone(), json!(ms));
    }
    json!({
        "command": command,
        "messages_computed": s.messages_computed,
        "messages_reused": s.messages_reused,
        "messages_invalidated": s.messages_invalidated,
        "messages_refreshed": s.messages_refreshed,
        "tuples_processed": s.tuples_processed,
        "phases_ms": phases,
    })
}
