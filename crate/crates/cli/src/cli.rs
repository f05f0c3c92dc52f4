//! Argument parsing and dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cjt_core::{JtOptions, Stats};

use crate::bench::run_chain;
use crate::session::{stats_json, Mode, Outcome, Session};
use crate::spec::{parse_predicate, parse_query, parse_update};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    #[default]
    Off,
}

#[derive(Debug, Parser)]
#[command(name = "cjt", version, about = "Factorized aggregation over calibrated junction hypertrees")]
pub struct Args {
    /// Catalog JSON naming the relations and (optionally) the tree.
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// How deltas reach cached messages.
    #[arg(long, global = true, value_enum, default_value_t = Mode::Eager)]
    pub mode: Mode,
    /// Join semi-join indicators into bags with several relations.
    #[arg(long, global = true)]
    pub prune_dangling: bool,
    #[arg(long, global = true, value_enum, default_value_t = Switch::Off)]
    pub absorption_cache: Switch,
    /// Write per-command counters as a JSON array.
    #[arg(long, global = true)]
    pub stats_json: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Print the junction hypertree as JSON.
    BuildJt,
    /// Calibrate for a pivot query (a spec file or inline text).
    Calibrate { spec: Option<String> },
    /// Answer a query from the calibrated tree.
    Query {
        spec: Option<String>,
        /// Calibrate for this pivot first.
        #[arg(long)]
        pivot: Option<String>,
    },
    /// Apply an update spec.
    Delta { spec: String },
    /// Build one pivot per `k`-subset of the dimensions.
    Cube {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<String>,
        #[arg(long)]
        k: usize,
    },
    /// Group-by query answered from the best cube pivot.
    Olap {
        #[arg(value_delimiter = ',')]
        attrs: Vec<String>,
        /// Comma-separated predicates, e.g. `A<3,B=x`.
        #[arg(long = "where")]
        filter: Option<String>,
        /// Build the cube first.
        #[arg(long, value_delimiter = ',')]
        dims: Vec<String>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Join a new relation onto the tree.
    Augment {
        csv: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        keys: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        features: Vec<String>,
        #[arg(long)]
        name: Option<String>,
    },
    /// Ridge regression over the covariance aggregate.
    Train {
        #[arg(long, value_delimiter = ',', required = true)]
        features: Vec<String>,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
    },
    /// Counters summed over the session.
    Stats,
    /// Write the current relations and tree as a reloadable catalog.
    Export { dir: PathBuf },
    /// Chain join benchmark.
    BenchChain {
        #[arg(long, default_value_t = 6)]
        r: usize,
        #[arg(long, default_value_t = 4)]
        f: u32,
        #[arg(long, default_value_t = 64)]
        d: u32,
    },
    /// Run commands from a file, one per line, against one session.
    Script { file: PathBuf },
}

#[derive(Debug, Parser)]
#[command(no_binary_name = true)]
struct ScriptLine {
    #[command(subcommand)]
    command: Command,
}

/// Inline spec text, or the contents of a file if `s` names one.
fn spec_text(s: Option<&str>) -> Result<String> {
    match s {
        None => Ok(String::new()),
        Some(s) if Path::new(s).is_file() => {
            std::fs::read_to_string(s).with_context(|| format!("reading {s}"))
        }
        Some(s) => Ok(s.to_string()),
    }
}

/// Splits a script line on whitespace, keeping quoted runs together.
fn tokenize(line: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote = None;
    let mut started = false;
    for c in line.chars() {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), c) => cur.push(c),
            (None, '"' | '\'') => {
                quote = Some(c);
                started = true;
            }
            (None, c) if c.is_whitespace() => {
                if started {
                    out.push(std::mem::take(&mut cur));
                    started = false;
                }
            }
            (None, c) => {
                cur.push(c);
                started = true;
            }
        }
    }
    if quote.is_some() {
        bail!("unterminated quote in {line:?}");
    }
    if started {
        out.push(cur);
    }
    Ok(out)
}

pub struct Runner {
    pub args_seed: u64,
    options: JtOptions,
    mode: Mode,
    catalog: Option<PathBuf>,
    session: Option<Session>,
    /// Counters of every command run, in order.
    pub log: Vec<(String, Stats)>,
}

impl Runner {
    pub fn new(args: &Args) -> Runner {
        Runner {
            args_seed: args.seed,
            options: JtOptions {
                prune_dangling: args.prune_dangling,
                absorption_cache: args.absorption_cache == Switch::On,
            },
            mode: args.mode,
            catalog: args.catalog.clone(),
            session: None,
            log: Vec::new(),
        }
    }

    fn session(&mut self) -> Result<&mut Session> {
        if self.session.is_none() {
            let path = self.catalog.as_ref().ok_or_else(|| anyhow!("this command needs --catalog"))?;
            self.session = Some(Session::load(path, self.options, self.mode)?);
        }
        Ok(self.session.as_mut().unwrap())
    }

    fn base_dir(&self) -> PathBuf {
        self.catalog
            .as_ref()
            .and_then(|p| p.parent())
            .map(Path::to_path_buf)
            .unwrap_or_default()
    }

    /// Runs one command, writing results to `out` and counters to `err`.
    pub fn run(&mut self, cmd: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
        let outcome = match cmd {
            Command::Script { file } => {
                let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
                for (n, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let parsed = ScriptLine::try_parse_from(tokenize(line)?)
                        .map_err(|e| anyhow!("{}:{}: {e}", file.display(), n + 1))?;
                    if matches!(parsed.command, Command::Script { .. }) {
                        bail!("{}:{}: scripts cannot nest", file.display(), n + 1);
                    }
                    self.run(&parsed.command, out, err)
                        .with_context(|| format!("{}:{}", file.display(), n + 1))?;
                }
                return Ok(());
            }
            Command::BenchChain { r, f, d } => {
                let rep = run_chain(*r, *f, *d, self.args_seed)?;
                let mut stats = Stats {
                    messages_computed: rep.messages as u64,
                    ..Stats::default()
                };
                stats.phase("materialize", rep.materialize);
                stats.phase("calibrate", rep.calibrate);
                Outcome {
                    command: "bench-chain".into(),
                    output: rep.render(),
                    stats,
                }
            }
            Command::BuildJt => self.session()?.build_jt()?,
            Command::Calibrate { spec } => {
                let q = parse_query(&spec_text(spec.as_deref())?)?;
                self.session()?.calibrate(&q)?
            }
            Command::Query { spec, pivot } => {
                if let Some(p) = pivot {
                    let p = parse_query(&spec_text(Some(p))?)?;
                    let o = self.session()?.calibrate(&p)?;
                    self.report(&o, out, err)?;
                }
                let q = parse_query(&spec_text(spec.as_deref())?)?;
                self.session()?.query(&q)?
            }
            Command::Delta { spec } => {
                let u = parse_update(&spec_text(Some(spec))?)?;
                let dir = self.base_dir();
                self.session()?.delta(&u, &dir)?
            }
            Command::Cube { dims, k } => self.session()?.cube(dims, *k)?,
            Command::Olap { attrs, filter, dims, k } => {
                if let Some(k) = k {
                    if dims.is_empty() {
                        bail!("--k needs --dims");
                    }
                    let o = self.session()?.cube(dims, *k)?;
                    self.report(&o, out, err)?;
                }
                let preds: Vec<_> = filter
                    .as_deref()
                    .map(|f| f.split(',').filter(|p| !p.trim().is_empty()).map(parse_predicate).collect::<Result<Vec<_>>>())
                    .transpose()?
                    .unwrap_or_default();
                self.session()?.olap(attrs, &preds)?
            }
            Command::Augment {
                csv,
                keys,
                features,
                name,
            } => self.session()?.augment(csv, name.as_deref(), keys, features)?,
            Command::Train {
                features,
                target,
                lambda,
            } => self.session()?.train(features, target, *lambda)?,
            Command::Stats => {
                let mut total = Stats::default();
                for (_, s) in &self.log {
                    total.merge(s);
                }
                let text = serde_json::to_string_pretty(&stats_json("session", &total))? + "\n";
                Outcome {
                    command: "stats".into(),
                    output: text,
                    stats: Stats::default(),
                }
            }
            Command::Export { dir } => self.session()?.export(dir)?,
        };
        self.report(&outcome, out, err)
    }

    fn report(&mut self, o: &Outcome, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
        out.write_all(o.output.as_bytes())?;
        let s = &o.stats;
        let ms = s.phases.iter().fold(0.0, |acc, (_, d)| acc + d.as_secs_f64() * 1e3);
        writeln!(
            err,
            "[{}] computed={} reused={} refreshed={} invalidated={} tuples={} time={ms:.2}ms",
            o.command, s.messages_computed, s.messages_reused, s.messages_refreshed, s.messages_invalidated,
            s.tuples_processed
        )?;
        self.log.push((o.command.clone(), o.stats.clone()));
        Ok(())
    }

    pub fn stats_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.log.iter().map(|(c, s)| stats_json(c, s)).collect())
    }
}

/// Runs `args` and writes `--stats-json` if asked.
pub fn run(args: &Args, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let mut runner = Runner::new(args);
    let res = runner.run(&args.command, out, err);
    if let Some(p) = &args.stats_json {
        std::fs::write(p, serde_json::to_string_pretty(&runner.stats_json())? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_keeps_quoted_specs() {
        assert_eq!(
            tokenize(r#"query "group = A; where = B < 3" --pivot 'x y'"#).unwrap(),
            ["query", "group = A; where = B < 3", "--pivot", "x y"]
        );
        assert_eq!(tokenize("stats ''").unwrap(), ["stats", ""]);
        assert!(tokenize("query \"open").is_err());
    }

    #[test]
    fn script_lines_parse_as_subcommands() {
        let l = ScriptLine::try_parse_from(["olap", "A,B", "--where", "C<3"]).unwrap();
        assert!(matches!(l.command, Command::Olap { ref attrs, .. } if attrs.len() == 2));
    }
}
