//! Synthetic chain join: small relations whose join is enormous.
//!
//! `R_i(A_i, A_{i+1})` for `i < r`. Every value `a` of `A_i` has `f` rows,
//! the `j`-th pointing at `(a * f + j) % d`, so each relation has `d * f`
//! rows and the full join has `d * f^r`. The seed relabels the values of
//! every attribute through a random permutation.

use std::time::{Duration, Instant};

use anyhow::{ensure, Result};
use cjt_core::{AnnotationPlacement, JunctionHypertree, QuerySpec, Relation, SemiringKind, Value};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

#[derive(Debug, Clone)]
pub struct ChainReport {
    pub r: usize,
    pub f: u32,
    pub d: u32,
    pub relation_rows: usize,
    pub join_rows: u64,
    pub max_message_rows: usize,
    pub messages: usize,
    pub calibrate: Duration,
    pub materialize: Duration,
}

impl ChainReport {
    /// Join size over the largest cached message.
    pub fn ratio(&self) -> f64 {
        self.join_rows as f64 / self.max_message_rows.max(1) as f64
    }

    pub fn render(&self) -> String {
        format!(
            "chain r={} f={} d={}\n\
             relation rows:       {}\n\
             materialized join:   {} rows in {:.1} ms\n\
             calibration:         {} messages in {:.1} ms\n\
             largest message:     {} rows\n\
             join / message:      {:.1}x\n",
            self.r,
            self.f,
            self.d,
            self.relation_rows,
            self.join_rows,
            self.materialize.as_secs_f64() * 1e3,
            self.messages,
            self.calibrate.as_secs_f64() * 1e3,
            self.max_message_rows,
            self.ratio(),
        )
    }
}

pub fn chain_relations(r: usize, f: u32, d: u32, seed: u64) -> Vec<(String, Relation)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let labels: Vec<Vec<u32>> = (0..=r)
        .map(|_| {
            let mut p: Vec<u32> = (0..d).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    (0..r)
        .map(|i| {
            let rows = (0..d).flat_map(|a| (0..f).map(move |j| (a, (a * f + j) % d)));
            let rows: Vec<_> = rows
                .map(|(a, b)| (vec![labels[i][a as usize], labels[i + 1][b as usize]], Value::Nat(1)))
                .collect();
            let attrs = [i as u32, i as u32 + 1];
            (format!("R{i}"), Relation::from_rows(&attrs, SemiringKind::NatCount, rows).unwrap())
        })
        .collect()
}

pub fn run_chain(r: usize, f: u32, d: u32, seed: u64) -> Result<ChainReport> {
    ensure!(r >= 1 && f >= 1 && d >= 1, "chain parameters must be positive");
    let rels = chain_relations(r, f, d, seed);
    let relation_rows = rels.iter().map(|(_, x)| x.len()).sum();

    let t0 = Instant::now();
    let refs: Vec<&Relation> = rels.iter().map(|(_, x)| x).collect();
    let joined = Relation::join(&refs)?;
    let join_rows = joined.rows().values().map(|v| v.as_f64() as u64).sum();
    let materialize = t0.elapsed();
    drop(joined);

    let mut jt = JunctionHypertree::default_jt(SemiringKind::NatCount, rels)?;
    let t0 = Instant::now();
    let rep = jt.calibrate(&AnnotationPlacement::default())?;
    let calibrate = t0.elapsed();
    let max_message_rows = jt.messages().values().map(|m| m.payload.len()).max().unwrap_or(0);
    let total = jt.execute(&QuerySpec::new())?.result.total()?;
    ensure!(
        total.as_f64() as u64 == join_rows,
        "factorized count {} disagrees with the materialized join {join_rows}",
        total.as_f64()
    );
    Ok(ChainReport {
        r,
        f,
        d,
        relation_rows,
        join_rows,
        max_message_rows,
        messages: rep.messages_computed(),
        calibrate,
        materialize,
    })
}
