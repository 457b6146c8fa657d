//! End-to-end wiring of the three search modes:
//!
//! * `keyword` — stop-worded keywords only, no KB.
//! * `ne_kw` — keywords plus NE triples on both sides, no query expansion.
//! * `semantic` — ne_kw plus related-entity query expansion.
//!
//! All three modes share tokenization and weighting, so mode deltas come
//! only from the term spaces.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::annotate::{
    analyze_document, analyze_query, remove_stopwords, tokenize, InterrogativeRules, RelationDict,
    Stoplist,
};
use crate::expand::{
    document_triples, expand_query, query_terms, ExpandError, ExpandedQuery, GeneralizedTerm,
};
use crate::index::{Index, IndexBuilder, IndexError};
use crate::kb::KnowledgeBase;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("mode `{0}` requires a knowledge base")]
    KbRequired(String),
    #[error("unknown mode `{0}` (expected keyword, ne_kw, or semantic)")]
    UnknownMode(String),
    #[error(transparent)]
    Expand(#[from] ExpandError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected `docid<TAB>text`")]
    BadCorpusLine { path: String, line: usize },
    #[error("duplicate document id `{0}` in corpus")]
    DuplicateDoc(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Keyword,
    NeKw,
    Semantic,
}

impl SearchMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Keyword => "keyword",
            Self::NeKw => "ne_kw",
            Self::Semantic => "semantic",
        }
    }
}

impl FromStr for SearchMode {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keyword" => Ok(Self::Keyword),
            "ne_kw" => Ok(Self::NeKw),
            "semantic" => Ok(Self::Semantic),
            other => Err(PipelineError::UnknownMode(other.to_owned())),
        }
    }
}

impl std::fmt::Display for SearchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub mode: SearchMode,
    /// Also index the keywords inside entity spans.
    pub keywords_inside_entities: bool,
    /// Cap on the superclass closure used for document triples.
    pub superclass_depth: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: SearchMode::Semantic,
            keywords_inside_entities: false,
            superclass_depth: None,
        }
    }
}

/// The loaded resources plus configuration for one mode.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub kb: Option<KnowledgeBase>,
    pub relation_dict: RelationDict,
    pub interrogative_rules: InterrogativeRules,
    pub stoplist: Stoplist,
}

#[derive(Debug, Clone, Default)]
pub struct BuildReport {
    pub documents: usize,
    pub terms: usize,
    pub annotations: usize,
    pub warnings: Vec<String>,
}

/// What a query turned into under the pipeline's mode.
pub struct QueryOutcome {
    pub terms: Vec<GeneralizedTerm>,
    /// Present in semantic mode only.
    pub expansion: Option<ExpandedQuery>,
}

impl Pipeline {
    pub fn new(
        config: PipelineConfig,
        kb: Option<KnowledgeBase>,
        relation_dict: RelationDict,
        interrogative_rules: InterrogativeRules,
        stoplist: Stoplist,
    ) -> Result<Self, PipelineError> {
        if config.mode != SearchMode::Keyword && kb.is_none() {
            return Err(PipelineError::KbRequired(config.mode.to_string()));
        }
        Ok(Self {
            config,
            kb,
            relation_dict,
            interrogative_rules,
            stoplist,
        })
    }

    fn kb(&self) -> &KnowledgeBase {
        self.kb.as_ref().expect("checked at construction")
    }

    /// Index-side term multiset for one document, plus the number of
    /// entity annotations it produced.
    pub fn document_terms(&self, text: &str) -> Result<(Vec<GeneralizedTerm>, usize), PipelineError> {
        match self.config.mode {
            SearchMode::Keyword => {
                let tokens = remove_stopwords(&tokenize(text), &self.stoplist);
                Ok((
                    tokens
                        .iter()
                        .map(|t| GeneralizedTerm::keyword(&t.text))
                        .collect(),
                    0,
                ))
            }
            SearchMode::NeKw | SearchMode::Semantic => {
                let (annotations, keywords) = analyze_document(
                    text,
                    self.kb(),
                    &self.stoplist,
                    self.config.keywords_inside_entities,
                );
                let mut terms: Vec<GeneralizedTerm> = keywords
                    .iter()
                    .map(|t| GeneralizedTerm::keyword(&t.text))
                    .collect();
                let count = annotations.len();
                for ann in &annotations {
                    for triple in
                        document_triples(ann, self.kb(), self.config.superclass_depth)?
                    {
                        terms.push(GeneralizedTerm::Triple(triple));
                    }
                }
                Ok((terms, count))
            }
        }
    }

    /// Query-side term multiset; semantic mode runs query expansion.
    pub fn query_outcome(&self, text: &str) -> QueryOutcome {
        match self.config.mode {
            SearchMode::Keyword => {
                let tokens = remove_stopwords(&tokenize(text), &self.stoplist);
                QueryOutcome {
                    terms: tokens
                        .iter()
                        .map(|t| GeneralizedTerm::keyword(&t.text))
                        .collect(),
                    expansion: None,
                }
            }
            SearchMode::NeKw => {
                let analysis = analyze_query(
                    text,
                    self.kb(),
                    &self.relation_dict,
                    &self.interrogative_rules,
                    &self.stoplist,
                );
                QueryOutcome {
                    terms: query_terms(&analysis),
                    expansion: None,
                }
            }
            SearchMode::Semantic => {
                let expanded = expand_query(
                    text,
                    self.kb(),
                    &self.relation_dict,
                    &self.interrogative_rules,
                    &self.stoplist,
                );
                QueryOutcome {
                    terms: expanded.terms.clone(),
                    expansion: Some(expanded),
                }
            }
        }
    }

    /// Build an index over a corpus of `(doc id, text)` records.
    pub fn build_index(
        &self,
        corpus: &[(String, String)],
    ) -> Result<(Index, BuildReport), PipelineError> {
        let mut builder = IndexBuilder::new();
        let mut report = BuildReport::default();
        for (id, text) in corpus {
            let (terms, annotations) = self.document_terms(text)?;
            builder.add_document(id.clone(), &terms)?;
            report.documents += 1;
            report.annotations += annotations;
        }
        let index = builder.build();
        report.terms = index.term_count();
        Ok((index, report))
    }
}

/// Read a corpus: either a directory of UTF-8 plain-text files (file name
/// = document id) or a single file of `docid <TAB> text` records.
/// Unreadable files in a directory are skipped and reported as warnings.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<(Vec<(String, String)>, Vec<String>), PipelineError> {
    let path = path.as_ref();
    let mut docs: BTreeMap<String, String> = BTreeMap::new();
    let mut warnings = Vec::new();
    let io_err = |source: std::io::Error| PipelineError::Io {
        path: path.display().to_string(),
        source,
    };
    if path.is_dir() {
        let mut entries: Vec<_> = fs::read_dir(path)
            .map_err(io_err)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(io_err)?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let p = entry.path();
            if !p.is_file() {
                continue;
            }
            let id = entry.file_name().to_string_lossy().into_owned();
            match fs::read_to_string(&p) {
                Ok(text) => {
                    if docs.insert(id.clone(), text).is_some() {
                        return Err(PipelineError::DuplicateDoc(id));
                    }
                }
                Err(e) => warnings.push(format!("skipped unreadable document {id}: {e}")),
            }
        }
    } else {
        let text = fs::read_to_string(path).map_err(io_err)?;
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, body) = line.split_once('\t').ok_or(PipelineError::BadCorpusLine {
                path: path.display().to_string(),
                line: idx + 1,
            })?;
            if docs.insert(id.to_owned(), body.to_owned()).is_some() {
                return Err(PipelineError::DuplicateDoc(id.to_owned()));
            }
        }
    }
    Ok((docs.into_iter().collect(), warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    const KB_TEXT: &str = "\
#CLASSES
Organization\tOrganization\t
Company\tCompany\tOrganization
#ENTITIES
#Company_123\tCompany\tGeneral Motors\tGM
#RELATIONS
bornIn\tborn in
#FACTS
";

    fn pipeline(mode: SearchMode) -> Pipeline {
        let kb = (mode != SearchMode::Keyword).then(|| KnowledgeBase::parse(KB_TEXT).unwrap());
        Pipeline::new(
            PipelineConfig {
                mode,
                ..PipelineConfig::default()
            },
            kb,
            RelationDict::new(),
            InterrogativeRules::new(),
            Stoplist::default_english(),
        )
        .unwrap()
    }

    #[test]
    fn keyword_mode_emits_only_keywords() {
        let p = pipeline(SearchMode::Keyword);
        let (terms, anns) = p.document_terms("General Motors asked for loans").unwrap();
        assert_eq!(anns, 0);
        assert!(terms.iter().all(|t| t.key().starts_with("kw:")));
    }

    #[test]
    fn ne_kw_mode_emits_triples_and_keywords() {
        let p = pipeline(SearchMode::NeKw);
        let (terms, anns) = p.document_terms("General Motors asked for loans").unwrap();
        assert_eq!(anns, 1);
        assert!(terms.iter().any(|t| t.key().starts_with("ne:")));
        assert!(terms.iter().any(|t| t.key() == "kw:loans"));
        assert!(!terms.iter().any(|t| t.key() == "kw:general"));
    }

    #[test]
    fn keywords_inside_entities_flag() {
        let kb = KnowledgeBase::parse(KB_TEXT).unwrap();
        let p = Pipeline::new(
            PipelineConfig {
                mode: SearchMode::NeKw,
                keywords_inside_entities: true,
                superclass_depth: None,
            },
            Some(kb),
            RelationDict::new(),
            InterrogativeRules::new(),
            Stoplist::default_english(),
        )
        .unwrap();
        let (terms, _) = p.document_terms("General Motors asked for loans").unwrap();
        assert!(terms.iter().any(|t| t.key() == "kw:general"));
    }

    #[test]
    fn mode_requires_kb() {
        assert!(Pipeline::new(
            PipelineConfig {
                mode: SearchMode::Semantic,
                ..PipelineConfig::default()
            },
            None,
            RelationDict::new(),
            InterrogativeRules::new(),
            Stoplist::default_english(),
        )
        .is_err());
    }

    #[test]
    fn semantic_terms_superset_of_ne_kw() {
        let text = "General Motors loans";
        let ne = pipeline(SearchMode::NeKw).query_outcome(text);
        let sem = pipeline(SearchMode::Semantic).query_outcome(text);
        let count = |terms: &[GeneralizedTerm], key: &str| {
            terms.iter().filter(|t| t.key() == key).count()
        };
        for t in &ne.terms {
            assert!(count(&sem.terms, &t.key()) >= count(&ne.terms, &t.key()));
        }
    }

    #[test]
    fn corpus_tsv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("corpus.tsv");
        fs::write(&file, "d2\tsecond doc\nd1\tfirst doc\n").unwrap();
        let (docs, warnings) = read_corpus(&file).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(
            docs,
            vec![
                ("d1".to_owned(), "first doc".to_owned()),
                ("d2".to_owned(), "second doc".to_owned())
            ]
        );
    }

    #[test]
    fn corpus_duplicate_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("corpus.tsv");
        fs::write(&file, "d1\ta\nd1\tb\n").unwrap();
        assert!(matches!(
            read_corpus(&file),
            Err(PipelineError::DuplicateDoc(_))
        ));
    }

    #[test]
    fn corpus_directory_sorted_by_name() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.txt"), "bee").unwrap();
        fs::write(dir.path().join("a.txt"), "ay").unwrap();
        let (docs, _) = read_corpus(dir.path()).unwrap();
        let ids: Vec<&str> = docs.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, ["a.txt", "b.txt"]);
    }
}
