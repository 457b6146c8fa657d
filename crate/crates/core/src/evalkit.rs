//! Retrieval evaluation: per-query precision/recall points, 11-point
//! interpolated P-R and F-R curves, cross-query averaging, and run
//! comparison tables.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

pub const RECALL_LEVELS: usize = 11;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("query `{0}` has no relevant document")]
    NoRelevantDocs(String),
    #[error("empty relevant set")]
    EmptyRelevant,
    #[error("cannot average an empty list of curves")]
    EmptyCurveList,
    #[error("query `{0}` missing from qrels")]
    QueryMissing(String),
    #[error("runs cover different query sets (`{0}` vs `{1}`)")]
    MismatchedQueries(String, String),
    #[error("run `{tag}`, query `{query}`: {message}")]
    InvalidRun {
        tag: String,
        query: String,
        message: String,
    },
}

/// Binary relevance judgments. Every query id has at least one relevant
/// document; queries without any are rejected at load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    relevant: BTreeMap<String, BTreeSet<String>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, query_id: &str, doc_id: &str, relevance: u8) {
        let entry = self.relevant.entry(query_id.to_owned()).or_default();
        if relevance > 0 {
            entry.insert(doc_id.to_owned());
        }
    }

    /// Check that every judged query has at least one relevant document.
    pub fn validate(&self) -> Result<(), EvalError> {
        for (qid, docs) in &self.relevant {
            if docs.is_empty() {
                return Err(EvalError::NoRelevantDocs(qid.clone()));
            }
        }
        Ok(())
    }

    /// Load a `query_id <TAB> 0 <TAB> doc_id <TAB> relevance` file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, EvalError> {
        let mut qrels = Self::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(EvalError::Parse {
                    path: origin.to_owned(),
                    line: idx + 1,
                    message: "expected `query_id<TAB>0<TAB>doc_id<TAB>relevance`".into(),
                });
            }
            let relevance: u8 = fields[3].parse().map_err(|e| EvalError::Parse {
                path: origin.to_owned(),
                line: idx + 1,
                message: format!("bad relevance: {e}"),
            })?;
            qrels.add(fields[0], fields[2], relevance);
        }
        qrels.validate()?;
        Ok(qrels)
    }

    pub fn relevant(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.relevant.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &String> {
        self.relevant.keys()
    }

    pub fn query_count(&self) -> usize {
        self.relevant.len()
    }
}

/// One ranked retrieval run: an ordered result list per query.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub tag: String,
    queries: BTreeMap<String, Vec<(String, f64)>>,
}

impl Run {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            queries: BTreeMap::new(),
        }
    }

    /// Set a query's result list. Scores must be non-increasing and doc
    /// ids unique.
    pub fn set_results(
        &mut self,
        query_id: &str,
        results: Vec<(String, f64)>,
    ) -> Result<(), EvalError> {
        let mut seen = BTreeSet::new();
        for window in results.windows(2) {
            if window[1].1 > window[0].1 {
                return Err(EvalError::InvalidRun {
                    tag: self.tag.clone(),
                    query: query_id.to_owned(),
                    message: "scores must be non-increasing".into(),
                });
            }
        }
        for (doc, _) in &results {
            if !seen.insert(doc) {
                return Err(EvalError::InvalidRun {
                    tag: self.tag.clone(),
                    query: query_id.to_owned(),
                    message: format!("duplicate document `{doc}`"),
                });
            }
        }
        self.queries.insert(query_id.to_owned(), results);
        Ok(())
    }

    pub fn results(&self, query_id: &str) -> Option<&[(String, f64)]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &String> {
        self.queries.keys()
    }

    pub fn query_id_set(&self) -> BTreeSet<String> {
        self.queries.keys().cloned().collect()
    }

    /// Load a `query_id <TAB> Q0 <TAB> doc_id <TAB> rank <TAB> score
    /// <TAB> tag` file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, EvalError> {
        let mut tag = String::from("run");
        let mut per_query: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 6 {
                return Err(EvalError::Parse {
                    path: origin.to_owned(),
                    line: idx + 1,
                    message: "expected `query_id<TAB>Q0<TAB>doc_id<TAB>rank<TAB>score<TAB>tag`"
                        .into(),
                });
            }
            let score: f64 = fields[4].parse().map_err(|e| EvalError::Parse {
                path: origin.to_owned(),
                line: idx + 1,
                message: format!("bad score: {e}"),
            })?;
            tag = fields[5].to_owned();
            per_query
                .entry(fields[0].to_owned())
                .or_default()
                .push((fields[2].to_owned(), score));
        }
        let mut run = Run::new(tag);
        for (qid, results) in per_query {
            run.set_results(&qid, results)?;
        }
        Ok(run)
    }

    /// Serialize in the run file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (qid, results) in &self.queries {
            for (rank, (doc, score)) in results.iter().enumerate() {
                writeln!(out, "{qid}\tQ0\t{doc}\t{}\t{score}\t{}", rank + 1, self.tag).unwrap();
            }
        }
        out
    }
}

/// Values at the eleven standard recall levels 0.0, 0.1, ..., 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurve {
    pub values: [f64; RECALL_LEVELS],
}

impl EvalCurve {
    pub fn zero() -> Self {
        Self {
            values: [0.0; RECALL_LEVELS],
        }
    }

    pub fn level(i: usize) -> f64 {
        i as f64 / 10.0
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / RECALL_LEVELS as f64
    }
}

/// One (recall, precision) point per rank position.
pub fn pr_points(
    ranked: &[String],
    relevant: &BTreeSet<String>,
) -> Result<Vec<(f64, f64)>, EvalError> {
    if relevant.is_empty() {
        return Err(EvalError::EmptyRelevant);
    }
    let total = relevant.len() as f64;
    let mut hits = 0usize;
    let mut points = Vec::with_capacity(ranked.len());
    for (i, doc) in ranked.iter().enumerate() {
        if relevant.contains(doc) {
            hits += 1;
        }
        points.push((hits as f64 / total, hits as f64 / (i + 1) as f64));
    }
    Ok(points)
}

/// Interpolate to the eleven standard recall levels: the value at level r
/// is the maximum precision over all points with recall >= r, 0 when no
/// such point exists.
pub fn interpolate_11pt(points: &[(f64, f64)]) -> EvalCurve {
    let mut curve = EvalCurve::zero();
    for (i, value) in curve.values.iter_mut().enumerate() {
        let level = EvalCurve::level(i);
        *value = points
            .iter()
            .filter(|(r, _)| *r + 1e-9 >= level)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
    }
    curve
}

/// F = 2PR / (P + R), 0 when P + R = 0.
pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Arithmetic mean at each recall level.
pub fn average_curves(curves: &[EvalCurve]) -> Result<EvalCurve, EvalError> {
    if curves.is_empty() {
        return Err(EvalError::EmptyCurveList);
    }
    let mut avg = EvalCurve::zero();
    for c in curves {
        for (a, v) in avg.values.iter_mut().zip(c.values) {
            *a += v;
        }
    }
    for a in avg.values.iter_mut() {
        *a /= curves.len() as f64;
    }
    Ok(avg)
}

#[derive(Debug, Clone)]
pub struct RunEval {
    pub tag: String,
    pub avg_precision: EvalCurve,
    pub avg_f: EvalCurve,
    /// Per query: (interpolated precision curve, F curve).
    pub per_query: BTreeMap<String, (EvalCurve, EvalCurve)>,
}

/// Evaluate one run: per query, interpolated precision and the F curve
/// (F computed per query per level from the interpolated precision and
/// the level's recall, then averaged across queries).
pub fn evaluate_run(run: &Run, qrels: &Qrels, depth: usize) -> Result<RunEval, EvalError> {
    let mut per_query = BTreeMap::new();
    let mut p_curves = Vec::new();
    let mut f_curves = Vec::new();
    for qid in run.query_ids() {
        let relevant = qrels
            .relevant(qid)
            .ok_or_else(|| EvalError::QueryMissing(qid.clone()))?;
        let ranked: Vec<String> = run
            .results(qid)
            .unwrap()
            .iter()
            .take(depth)
            .map(|(d, _)| d.clone())
            .collect();
        let points = pr_points(&ranked, relevant)?;
        let p_curve = interpolate_11pt(&points);
        let mut f_curve = EvalCurve::zero();
        for i in 0..RECALL_LEVELS {
            f_curve.values[i] = f_measure(p_curve.values[i], EvalCurve::level(i));
        }
        p_curves.push(p_curve.clone());
        f_curves.push(f_curve.clone());
        per_query.insert(qid.clone(), (p_curve, f_curve));
    }
    Ok(RunEval {
        tag: run.tag.clone(),
        avg_precision: average_curves(&p_curves)?,
        avg_f: average_curves(&f_curves)?,
        per_query,
    })
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub evals: Vec<RunEval>,
}

/// Evaluate several runs over the same query set side by side.
pub fn compare_runs(runs: &[Run], qrels: &Qrels, depth: usize) -> Result<Comparison, EvalError> {
    if let Some(first) = runs.first() {
        let base = first.query_id_set();
        for run in &runs[1..] {
            if run.query_id_set() != base {
                return Err(EvalError::MismatchedQueries(
                    first.tag.clone(),
                    run.tag.clone(),
                ));
            }
        }
    }
    let evals = runs
        .iter()
        .map(|r| evaluate_run(r, qrels, depth))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Comparison { evals })
}

impl Comparison {
    /// Aligned plain-text table: per run, a precision row and an F row at
    /// the eleven recall levels, values in percent, plus the mean over
    /// levels.
    pub fn render_table(&self) -> String {
        let tag_width = self
            .evals
            .iter()
            .map(|e| e.tag.len())
            .max()
            .unwrap_or(4)
            .max(5);
        let mut out = String::new();
        write!(out, "{:<14}{:<tag_width$}", "Measure", "Model").unwrap();
        for i in 0..RECALL_LEVELS {
            write!(out, "{:>7}", i * 10).unwrap();
        }
        writeln!(out, "{:>8}", "Mean").unwrap();
        for (label, pick) in [
            ("Precision (%)", 0usize),
            ("F-measure (%)", 1usize),
        ] {
            for eval in &self.evals {
                let curve = if pick == 0 {
                    &eval.avg_precision
                } else {
                    &eval.avg_f
                };
                write!(out, "{:<14}{:<tag_width$}", label, eval.tag).unwrap();
                for v in curve.values {
                    write!(out, "{:>7.1}", v * 100.0).unwrap();
                }
                writeln!(out, "{:>8.1}", curve.mean() * 100.0).unwrap();
            }
        }
        out
    }

    /// Machine-readable records, one `run,level,metric,value` per line.
    pub fn render_records(&self) -> String {
        let mut out = String::new();
        for eval in &self.evals {
            for (metric, curve) in [("precision", &eval.avg_precision), ("f", &eval.avg_f)] {
                for (i, v) in curve.values.iter().enumerate() {
                    writeln!(out, "{},{:.1},{},{}", eval.tag, EvalCurve::level(i), metric, v)
                        .unwrap();
                }
            }
        }
        out
    }
}
