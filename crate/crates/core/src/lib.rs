//! Semantic text search over a space of generalized terms, where a term is
//! either a keyword or a named-entity triple (name / class / identifier).
//!
//! The crate is organized as a pipeline:
//!
//! * [`kb`] — knowledge base: class hierarchy, entity descriptions with
//!   aliases, and relation facts between entities.
//! * [`annotate`] — tokenization, stop-word removal, gazetteer entity
//!   recognition, relation-phrase recognition, interrogative-word mapping.
//! * [`expand`] — implied-triple expansion of documents, most-specific
//!   triples for queries, and related-entity query expansion.
//! * [`index`] — inverted index over generalized terms with tf-idf cosine
//!   ranking.
//! * [`evalkit`] — 11-point interpolated precision/recall and F-measure
//!   evaluation of ranked runs.
//! * [`pipeline`] — wiring of the above into the three search modes
//!   (keyword, ne_kw, semantic).

pub mod annotate;
pub mod evalkit;
pub mod expand;
pub mod index;
pub mod kb;
pub mod pipeline;

pub use annotate::{EntityAnnotation, QueryAnalysis, RelationDict, RelationMention, Stoplist, Token};
pub use evalkit::{EvalCurve, Qrels, Run};
pub use expand::{ExpandedQuery, ExpansionStatus, GeneralizedTerm, NETriple};
pub use index::{Index, ScoredDoc};
pub use kb::{ClassId, EntityId, KnowledgeBase, RelationId};
pub use pipeline::{PipelineConfig, SearchMode};
