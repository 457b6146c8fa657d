//! Inverted index over generalized terms with tf-idf cosine ranking.
//!
//! Weighting is (1 + ln tf) * ln(1 + N/df) on both document and query
//! sides, with cosine normalization. The built index is immutable and the
//! on-disk form is a diffable textual format.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::expand::GeneralizedTerm;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate document id `{0}`")]
    DuplicateDoc(String),
    #[error("empty query: nothing to search")]
    EmptyQuery,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("index file line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Term weight: (1 + ln tf) * ln(1 + N/df). Strictly increasing in tf,
/// strictly decreasing in df. Requires tf >= 1 and 1 <= df <= n.
pub fn weight(tf: u32, df: u32, n: u32) -> f64 {
    assert!(tf >= 1, "weight: tf must be >= 1, got {tf}");
    assert!(
        df >= 1 && df <= n,
        "weight: df must satisfy 1 <= df <= N, got df={df} N={n}"
    );
    (1.0 + (tf as f64).ln()) * (1.0 + n as f64 / df as f64).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermEntry {
    pub df: u32,
    pub postings: Vec<Posting>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentRecord {
    pub id: String,
    pub norm: f64,
    pub len: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Default)]
pub struct IndexBuilder {
    docs: BTreeMap<String, BTreeMap<String, u32>>,
}

impl IndexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a document's term multiset. Document ordinals are assigned by
    /// sorted id at build time, so insertion order does not matter.
    pub fn add_document(
        &mut self,
        id: impl Into<String>,
        terms: &[GeneralizedTerm],
    ) -> Result<(), IndexError> {
        let id = id.into();
        if self.docs.contains_key(&id) {
            return Err(IndexError::DuplicateDoc(id));
        }
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in terms {
            *counts.entry(t.key()).or_default() += 1;
        }
        self.docs.insert(id, counts);
        Ok(())
    }

    pub fn build(self) -> Index {
        let n = self.docs.len() as u32;
        let mut terms: BTreeMap<String, TermEntry> = BTreeMap::new();
        for (ord, counts) in self.docs.values().enumerate() {
            for (key, &tf) in counts {
                terms
                    .entry(key.clone())
                    .or_insert_with(|| TermEntry {
                        df: 0,
                        postings: Vec::new(),
                    })
                    .postings
                    .push(Posting {
                        doc: ord as u32,
                        tf,
                    });
            }
        }
        for entry in terms.values_mut() {
            entry.df = entry.postings.len() as u32;
        }
        let docs: Vec<DocumentRecord> = self
            .docs
            .iter()
            .map(|(id, counts)| {
                let norm = counts
                    .iter()
                    .map(|(key, &tf)| weight(tf, terms[key].df, n).powi(2))
                    .sum::<f64>()
                    .sqrt();
                DocumentRecord {
                    id: id.clone(),
                    norm,
                    len: counts.values().sum(),
                }
            })
            .collect();
        Index { docs, terms }
    }
}

/// An immutable inverted index with per-document vector norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    docs: Vec<DocumentRecord>,
    terms: BTreeMap<String, TermEntry>,
}

impl Index {
    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }
    pub fn docs(&self) -> &[DocumentRecord] {
        &self.docs
    }
    pub fn term(&self, key: &str) -> Option<&TermEntry> {
        self.terms.get(key)
    }
    pub fn terms(&self) -> impl Iterator<Item = (&String, &TermEntry)> {
        self.terms.iter()
    }

    /// Rank documents by tf-idf cosine similarity against a query term
    /// multiset. Documents sharing no term with the query are omitted.
    /// Ties are broken by document id ascending.
    pub fn search(
        &self,
        query_terms: &[GeneralizedTerm],
        k: usize,
    ) -> Result<Vec<ScoredDoc>, IndexError> {
        if query_terms.is_empty() {
            return Err(IndexError::EmptyQuery);
        }
        let n = self.docs.len() as u32;
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in query_terms {
            *counts.entry(t.key()).or_default() += 1;
        }
        // the query vector ranges over the index vocabulary; unseen terms
        // contribute nothing
        let mut query_norm_sq = 0.0;
        let mut dot: HashMap<u32, f64> = HashMap::new();
        for (key, &qtf) in &counts {
            let Some(entry) = self.terms.get(key) else {
                continue;
            };
            let wq = weight(qtf, entry.df, n);
            query_norm_sq += wq * wq;
            for p in &entry.postings {
                *dot.entry(p.doc).or_default() += wq * weight(p.tf, entry.df, n);
            }
        }
        if query_norm_sq == 0.0 {
            return Ok(Vec::new());
        }
        let query_norm = query_norm_sq.sqrt();
        let mut scored: Vec<ScoredDoc> = dot
            .into_iter()
            .map(|(ord, d)| {
                let rec = &self.docs[ord as usize];
                ScoredDoc {
                    doc_id: rec.id.clone(),
                    score: d / (query_norm * rec.norm),
                }
            })
            .collect();
        scored.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap()
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        scored.truncate(k);
        Ok(scored)
    }

    /// Serialize to the textual index format: a `#DOCS` section
    /// (ordinal, id, norm) then a `#TERMS` section (key, df, `ord:tf`
    /// postings), sorted by term key.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("#DOCS\n");
        for (ord, rec) in self.docs.iter().enumerate() {
            writeln!(out, "{ord}\t{}\t{}", rec.id, rec.norm).unwrap();
        }
        out.push_str("#TERMS\n");
        for (key, entry) in &self.terms {
            let postings: Vec<String> = entry
                .postings
                .iter()
                .map(|p| format!("{}:{}", p.doc, p.tf))
                .collect();
            writeln!(out, "{key}\t{}\t{}", entry.df, postings.join(" ")).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, IndexError> {
        enum Section {
            Preamble,
            Docs,
            Terms,
        }
        let mut section = Section::Preamble;
        let mut docs: Vec<DocumentRecord> = Vec::new();
        let mut terms: BTreeMap<String, TermEntry> = BTreeMap::new();
        let parse_err = |line: usize, message: String| IndexError::Parse { line, message };
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.is_empty() {
                continue;
            }
            match line {
                "#DOCS" => {
                    section = Section::Docs;
                    continue;
                }
                "#TERMS" => {
                    section = Section::Terms;
                    continue;
                }
                _ => {}
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match section {
                Section::Preamble => {
                    return Err(parse_err(line_no, "data before #DOCS header".into()))
                }
                Section::Docs => {
                    if fields.len() != 3 {
                        return Err(parse_err(line_no, "expected `ord<TAB>id<TAB>norm`".into()));
                    }
                    let ord: usize = fields[0]
                        .parse()
                        .map_err(|e| parse_err(line_no, format!("bad ordinal: {e}")))?;
                    if ord != docs.len() {
                        return Err(parse_err(line_no, "ordinals must be dense and in order".into()));
                    }
                    let norm: f64 = fields[2]
                        .parse()
                        .map_err(|e| parse_err(line_no, format!("bad norm: {e}")))?;
                    docs.push(DocumentRecord {
                        id: fields[1].to_owned(),
                        norm,
                        len: 0,
                    });
                }
                Section::Terms => {
                    if fields.len() != 3 {
                        return Err(parse_err(
                            line_no,
                            "expected `key<TAB>df<TAB>postings`".into(),
                        ));
                    }
                    let df: u32 = fields[1]
                        .parse()
                        .map_err(|e| parse_err(line_no, format!("bad df: {e}")))?;
                    let mut postings = Vec::new();
                    for item in fields[2].split(' ').filter(|s| !s.is_empty()) {
                        let (ord, tf) = item
                            .split_once(':')
                            .ok_or_else(|| parse_err(line_no, format!("bad posting `{item}`")))?;
                        let ord: u32 = ord
                            .parse()
                            .map_err(|e| parse_err(line_no, format!("bad posting doc: {e}")))?;
                        let tf: u32 = tf
                            .parse()
                            .map_err(|e| parse_err(line_no, format!("bad posting tf: {e}")))?;
                        if ord as usize >= docs.len() {
                            return Err(parse_err(line_no, format!("posting doc {ord} out of range")));
                        }
                        postings.push(Posting { doc: ord, tf });
                    }
                    if df as usize != postings.len() {
                        return Err(parse_err(line_no, "df does not match posting count".into()));
                    }
                    terms.insert(fields[0].to_owned(), TermEntry { df, postings });
                }
            }
        }
        // document lengths are derivable from the postings
        for entry in terms.values() {
            for p in &entry.postings {
                docs[p.doc as usize].len += p.tf;
            }
        }
        Ok(Index { docs, terms })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IndexError> {
        Self::parse(&fs::read_to_string(path)?)
    }
}
