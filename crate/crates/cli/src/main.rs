//! `gvsm` — semantic text search from the command line.
//!
//! Subcommands: `kb-validate`, `index`, `expand`, `search`, `batch`,
//! `eval`. The three search modes (`keyword`, `ne_kw`, `semantic`) share
//! one pipeline so their results differ only in the term spaces.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gvsm_core::annotate::{InterrogativeRules, RelationDict, Stoplist};
use gvsm_core::evalkit::{compare_runs, Qrels, Run};
use gvsm_core::expand::GeneralizedTerm;
use gvsm_core::index::Index;
use gvsm_core::kb::KnowledgeBase;
use gvsm_core::pipeline::{read_corpus, Pipeline, PipelineConfig, SearchMode};

#[derive(Parser)]
#[command(name = "gvsm", version, about = "Semantic text search with named-entity triples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default, Clone)]
struct SharedOpts {
    /// Optional `key=value` config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Knowledge base file.
    #[arg(long, global = true)]
    kb: Option<PathBuf>,
    /// Relation-phrase dictionary file.
    #[arg(long, global = true)]
    relations: Option<PathBuf>,
    /// Interrogative-word rule file.
    #[arg(long, global = true)]
    interrogatives: Option<PathBuf>,
    /// Stop-word list file (defaults to the built-in English list).
    #[arg(long, global = true)]
    stoplist: Option<PathBuf>,
    /// Search mode: keyword, ne_kw, or semantic.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Directory holding the persisted index.
    #[arg(long, global = true)]
    index_dir: Option<PathBuf>,
    /// Evaluation depth (results per query considered).
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Number of results to return.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Also index keywords inside entity spans.
    #[arg(long, global = true)]
    keywords_inside_entities: bool,
    /// Cap the superclass closure used for document triples.
    #[arg(long, global = true)]
    superclass_depth: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a knowledge base, printing record counts.
    KbValidate {
        #[command(flatten)]
        shared: SharedOpts,
    },
    /// Build an index over a corpus (directory of text files or a
    /// `docid<TAB>text` file).
    Index {
        corpus: PathBuf,
        #[command(flatten)]
        shared: SharedOpts,
    },
    /// Inspect the expansion of a single query (semantic mode).
    Expand {
        query: String,
        #[command(flatten)]
        shared: SharedOpts,
    },
    /// Search the index with one query.
    Search {
        query: String,
        #[command(flatten)]
        shared: SharedOpts,
    },
    /// Process a `query_id<TAB>text` file into a run file.
    Batch {
        queries: PathBuf,
        /// Run file to write.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        shared: SharedOpts,
    },
    /// Evaluate run files against qrels and print a comparison table.
    Eval {
        runs: Vec<PathBuf>,
        #[arg(long)]
        qrels: PathBuf,
        /// Optional file for machine-readable `run,level,metric,value`
        /// records.
        #[arg(long)]
        records: Option<PathBuf>,
        #[command(flatten)]
        shared: SharedOpts,
    },
}

/// Options after merging the config file (flags win).
struct Resolved {
    kb: Option<PathBuf>,
    relations: Option<PathBuf>,
    interrogatives: Option<PathBuf>,
    stoplist: Option<PathBuf>,
    mode: SearchMode,
    index_dir: PathBuf,
    depth: usize,
    k: usize,
    keywords_inside_entities: bool,
    superclass_depth: Option<usize>,
}

fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("{}:{}: expected key=value", path.display(), idx + 1))?;
        map.insert(key.trim().to_owned(), value.trim().to_owned());
    }
    Ok(map)
}

impl SharedOpts {
    fn resolve(&self) -> Result<Resolved> {
        let file = match &self.config {
            Some(path) => parse_config_file(path)?,
            None => BTreeMap::new(),
        };
        let path_opt = |flag: &Option<PathBuf>, key: &str| -> Option<PathBuf> {
            flag.clone().or_else(|| file.get(key).map(PathBuf::from))
        };
        let mode_str = self
            .mode
            .clone()
            .or_else(|| file.get("mode").cloned())
            .unwrap_or_else(|| "semantic".to_owned());
        let mode: SearchMode = mode_str.parse()?;
        let parse_num = |flag: Option<usize>, key: &str| -> Result<Option<usize>> {
            if flag.is_some() {
                return Ok(flag);
            }
            match file.get(key) {
                Some(v) => Ok(Some(
                    v.parse()
                        .with_context(|| format!("config key `{key}`: bad number `{v}`"))?,
                )),
                None => Ok(None),
            }
        };
        Ok(Resolved {
            kb: path_opt(&self.kb, "kb"),
            relations: path_opt(&self.relations, "relations"),
            interrogatives: path_opt(&self.interrogatives, "interrogatives"),
            stoplist: path_opt(&self.stoplist, "stoplist"),
            mode,
            index_dir: path_opt(&self.index_dir, "index-dir").unwrap_or_else(|| "index".into()),
            depth: parse_num(self.depth, "depth")?.unwrap_or(1000),
            k: parse_num(self.k, "k")?.unwrap_or(10),
            keywords_inside_entities: self.keywords_inside_entities
                || file
                    .get("keywords-inside-entities")
                    .map(|v| v == "true")
                    .unwrap_or(false),
            superclass_depth: parse_num(self.superclass_depth, "superclass-depth")?,
        })
    }
}

impl Resolved {
    fn load_pipeline(&self) -> Result<Pipeline> {
        if self.mode == SearchMode::Keyword && self.kb.is_some() {
            bail!("mode `keyword` takes no --kb");
        }
        if self.mode != SearchMode::Keyword && self.kb.is_none() {
            bail!("mode `{}` requires --kb", self.mode);
        }
        if self.mode == SearchMode::Semantic && self.relations.is_none() {
            bail!("mode `semantic` requires --relations");
        }
        let kb = match &self.kb {
            Some(path) => Some(
                KnowledgeBase::load(path)
                    .with_context(|| format!("loading KB {}", path.display()))?,
            ),
            None => None,
        };
        let relation_dict = match &self.relations {
            Some(path) => RelationDict::load(path)?,
            None => RelationDict::new(),
        };
        let interrogative_rules = match &self.interrogatives {
            Some(path) => InterrogativeRules::load(path)?,
            None => InterrogativeRules::new(),
        };
        let stoplist = match &self.stoplist {
            Some(path) => Stoplist::load(path)?,
            None => Stoplist::default_english(),
        };
        let config = PipelineConfig {
            mode: self.mode,
            keywords_inside_entities: self.keywords_inside_entities,
            superclass_depth: self.superclass_depth,
        };
        Ok(Pipeline::new(config, kb, relation_dict, interrogative_rules, stoplist)?)
    }

    fn index_file(&self) -> PathBuf {
        self.index_dir.join("index.tsv")
    }
}

fn term_counts(terms: &[GeneralizedTerm]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for t in terms {
        *counts.entry(t.key()).or_insert(0) += 1;
    }
    counts
}

fn cmd_kb_validate(shared: &SharedOpts) -> Result<()> {
    let resolved = shared.resolve()?;
    let path = resolved.kb.context("kb-validate requires --kb")?;
    let kb = KnowledgeBase::load(&path)?;
    println!("classes: {}", kb.class_count());
    println!("entities: {}", kb.entity_count());
    println!("aliases: {}", kb.alias_count());
    println!("relation_types: {}", kb.relation_type_count());
    println!("facts: {}", kb.fact_count());
    println!("OK");
    Ok(())
}

fn cmd_index(corpus: &Path, shared: &SharedOpts) -> Result<()> {
    let resolved = shared.resolve()?;
    let pipeline = resolved.load_pipeline()?;
    let (docs, warnings) = read_corpus(corpus)?;
    let (index, report) = pipeline.build_index(&docs)?;
    fs::create_dir_all(&resolved.index_dir)?;
    index.save(resolved.index_file())?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if docs.is_empty() {
        eprintln!("warning: empty corpus");
    }
    println!("documents: {}", report.documents);
    println!("terms: {}", report.terms);
    println!("annotations: {}", report.annotations);
    println!("index: {}", resolved.index_file().display());
    Ok(())
}

fn cmd_expand(query: &str, shared: &SharedOpts) -> Result<()> {
    let resolved = shared.resolve()?;
    if resolved.mode != SearchMode::Semantic {
        bail!("expand requires --mode semantic");
    }
    let pipeline = resolved.load_pipeline()?;
    let outcome = pipeline.query_outcome(query);
    let expansion = outcome.expansion.expect("semantic mode always expands");
    println!("query: {query}");
    println!("entities:");
    for a in &expansion.analysis.entities {
        println!(
            "  {:?} class={} id={}",
            a.surface,
            a.class_id.as_ref().map_or("?", |c| c.as_str()),
            a.entity_id.as_ref().map_or("?", |e| e.as_str()),
        );
    }
    println!("relations:");
    for m in &expansion.analysis.relation_mentions {
        println!(
            "  {:?} -> {}",
            m.phrase,
            m.relation_id.as_ref().map_or("unresolved", |r| r.as_str()),
        );
    }
    println!(
        "interrogative: {}",
        expansion
            .analysis
            .interrogative_class
            .as_ref()
            .map_or("none", |c| c.as_str()),
    );
    println!("status: {}", expansion.status);
    for name in &expansion.added_names {
        println!("added: {name}");
    }
    println!("terms:");
    for (key, count) in term_counts(&expansion.terms) {
        println!("  {key} x{count}");
    }
    Ok(())
}

fn cmd_search(query: &str, shared: &SharedOpts) -> Result<()> {
    let resolved = shared.resolve()?;
    let pipeline = resolved.load_pipeline()?;
    let index = Index::load(resolved.index_file())
        .with_context(|| format!("loading index {}", resolved.index_file().display()))?;
    let outcome = pipeline.query_outcome(query);
    if outcome.terms.is_empty() {
        bail!("query is empty after processing");
    }
    for (rank, hit) in index.search(&outcome.terms, resolved.k)?.iter().enumerate() {
        println!("{}\t{}\t{:.6}", rank + 1, hit.doc_id, hit.score);
    }
    Ok(())
}

fn cmd_batch(queries: &Path, output: &Path, shared: &SharedOpts) -> Result<()> {
    let resolved = shared.resolve()?;
    let pipeline = resolved.load_pipeline()?;
    let index = Index::load(resolved.index_file())
        .with_context(|| format!("loading index {}", resolved.index_file().display()))?;
    let text = fs::read_to_string(queries)
        .with_context(|| format!("cannot read queries {}", queries.display()))?;
    let mut run = Run::new(resolved.mode.to_string());
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((qid, qtext)) = line.split_once('\t') else {
            eprintln!(
                "warning: {}:{}: malformed query line, skipped",
                queries.display(),
                idx + 1
            );
            continue;
        };
        let outcome = pipeline.query_outcome(qtext);
        let results = if outcome.terms.is_empty() {
            Vec::new()
        } else {
            index
                .search(&outcome.terms, resolved.k)?
                .into_iter()
                .map(|hit| (hit.doc_id, hit.score))
                .collect()
        };
        run.set_results(qid, results)?;
    }
    fs::write(output, run.to_text())
        .with_context(|| format!("cannot write run file {}", output.display()))?;
    eprintln!("wrote {}", output.display());
    Ok(())
}

fn cmd_eval(
    run_paths: &[PathBuf],
    qrels_path: &Path,
    records: Option<&Path>,
    shared: &SharedOpts,
) -> Result<()> {
    if run_paths.is_empty() {
        bail!("eval requires at least one run file");
    }
    let resolved = shared.resolve()?;
    let qrels = Qrels::load(qrels_path)?;
    let runs = run_paths
        .iter()
        .map(Run::load)
        .collect::<Result<Vec<_>, _>>()?;
    let comparison = compare_runs(&runs, &qrels, resolved.depth)?;
    print!("{}", comparison.render_table());
    if let Some(path) = records {
        fs::write(path, comparison.render_records())
            .with_context(|| format!("cannot write records {}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::KbValidate { shared } => cmd_kb_validate(shared),
        Command::Index { corpus, shared } => cmd_index(corpus, shared),
        Command::Expand { query, shared } => cmd_expand(query, shared),
        Command::Search { query, shared } => cmd_search(query, shared),
        Command::Batch {
            queries,
            output,
            shared,
        } => cmd_batch(queries, output, shared),
        Command::Eval {
            runs,
            qrels,
            records,
            shared,
        } => cmd_eval(runs, qrels, records.as_deref(), shared),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
