//! Generalized terms and expansion: implied-triple expansion of document
//! entities, most-specific triples for query entities, and related-entity
//! expansion of queries through KB facts.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::annotate::{
    analyze_query, EntityAnnotation, InterrogativeRules, QueryAnalysis, RelationDict, Stoplist,
};
use crate::kb::{normalize_name, ClassId, EntityId, KbError, KnowledgeBase};

#[derive(Debug, Error)]
pub enum ExpandError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("annotation carries no usable feature (no name, class, or identifier)")]
    NoFeatures,
}

/// A (name / class / identifier) pattern; `None` is the wildcard slot.
/// Never all-wildcard. Names are stored in normalized form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NETriple {
    pub name: Option<String>,
    pub class: Option<ClassId>,
    pub entity: Option<EntityId>,
}

impl NETriple {
    pub fn name_only(name: &str) -> Self {
        Self {
            name: Some(normalize_name(name)),
            class: None,
            entity: None,
        }
    }
    pub fn class_only(class: ClassId) -> Self {
        Self {
            name: None,
            class: Some(class),
            entity: None,
        }
    }
    pub fn id_only(entity: EntityId) -> Self {
        Self {
            name: None,
            class: None,
            entity: Some(entity),
        }
    }
    pub fn name_class(name: &str, class: ClassId) -> Self {
        Self {
            name: Some(normalize_name(name)),
            class: Some(class),
            entity: None,
        }
    }

    /// Canonical index term key: `ne:<name>|<class>|<id>`, absent slots
    /// `*`, name case-folded with whitespace runs replaced by `_`.
    pub fn key(&self) -> String {
        let name = match &self.name {
            Some(n) => normalize_name(n).replace(' ', "_"),
            None => "*".into(),
        };
        let class = self.class.as_ref().map_or("*", |c| c.as_str());
        let id = self.entity.as_ref().map_or("*", |e| e.as_str());
        format!("ne:{name}|{class}|{id}")
    }
}

impl fmt::Display for NETriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// A vector-space dimension: a keyword or an NE triple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GeneralizedTerm {
    Keyword(String),
    Triple(NETriple),
}

impl GeneralizedTerm {
    pub fn keyword(token: &str) -> Self {
        Self::Keyword(token.to_lowercase())
    }

    /// The serialized index term key (`kw:...` or `ne:...`).
    pub fn key(&self) -> String {
        match self {
            Self::Keyword(k) => format!("kw:{k}"),
            Self::Triple(t) => t.key(),
        }
    }
}

impl fmt::Display for GeneralizedTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// All implied triples for a document entity annotation. With name n,
/// class c, identifier id, aliases a and strict superclasses s, the
/// instantiated templates are (n/*/*), (*/c/*), (n/c/*), (a/*/*),
/// (*/s/*), (n/s/*), (a/c/*), (a/s/*), and (*/*/id); templates whose
/// required features are missing are skipped. `superclass_depth` caps the
/// closure (`None` = unlimited).
pub fn document_triples(
    annotation: &EntityAnnotation,
    kb: &KnowledgeBase,
    superclass_depth: Option<usize>,
) -> Result<BTreeSet<NETriple>, ExpandError> {
    let name = &annotation.name;
    let mut out = BTreeSet::new();
    out.insert(NETriple::name_only(name));

    let supers = match &annotation.class_id {
        Some(c) => {
            out.insert(NETriple::class_only(c.clone()));
            out.insert(NETriple::name_class(name, c.clone()));
            let supers = kb.super_classes_within(c, superclass_depth)?;
            for s in &supers {
                out.insert(NETriple::class_only(s.clone()));
                out.insert(NETriple::name_class(name, s.clone()));
            }
            supers
        }
        None => BTreeSet::new(),
    };

    if let Some(id) = &annotation.entity_id {
        out.insert(NETriple::id_only(id.clone()));
        let aliases: BTreeSet<String> = kb
            .names_of(id)?
            .iter()
            .map(|n| normalize_name(n))
            .filter(|n| n != &normalize_name(name))
            .collect();
        for alias in &aliases {
            out.insert(NETriple::name_only(alias));
            if let Some(c) = &annotation.class_id {
                out.insert(NETriple::name_class(alias, c.clone()));
            }
            for s in &supers {
                out.insert(NETriple::name_class(alias, s.clone()));
            }
        }
    }
    Ok(out)
}

/// The most specific available triple for a query entity annotation:
/// (*/*/id), then (n/c/*), then (n/*/*), then (*/c/*).
pub fn query_triple(annotation: &EntityAnnotation) -> Result<NETriple, ExpandError> {
    if let Some(id) = &annotation.entity_id {
        return Ok(NETriple::id_only(id.clone()));
    }
    let has_name = !annotation.name.is_empty();
    match (&annotation.class_id, has_name) {
        (Some(c), true) => Ok(NETriple::name_class(&annotation.name, c.clone())),
        (None, true) => Ok(NETriple::name_only(&annotation.name)),
        (Some(c), false) => Ok(NETriple::class_only(c.clone())),
        (None, false) => Err(ExpandError::NoFeatures),
    }
}

/// Why a query was or was not expanded, in check order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionStatus {
    Expanded,
    NoRelationPhrase,
    MultipleRelations,
    NoRelationMapping,
    NoEntity,
    NoFacts,
}

impl fmt::Display for ExpansionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Expanded => "EXPANDED",
            Self::NoRelationPhrase => "NO_RELATION_PHRASE",
            Self::MultipleRelations => "MULTIPLE_RELATIONS",
            Self::NoRelationMapping => "NO_RELATION_MAPPING",
            Self::NoEntity => "NO_ENTITY",
            Self::NoFacts => "NO_FACTS",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct ExpandedQuery {
    pub original_text: String,
    /// Generalized terms, with multiplicity.
    pub terms: Vec<GeneralizedTerm>,
    /// Canonical names of latently related entities appended to the query.
    pub added_names: Vec<String>,
    pub status: ExpansionStatus,
    /// Analysis of the (possibly extended) query text.
    pub analysis: QueryAnalysis,
}

/// Build the query term multiset from an analysis: one most-specific
/// triple per entity annotation, a class-only triple for the mapped
/// interrogative word, and one keyword term per residual token.
pub fn query_terms(analysis: &QueryAnalysis) -> Vec<GeneralizedTerm> {
    let mut terms = Vec::new();
    for ann in &analysis.entities {
        if let Ok(triple) = query_triple(ann) {
            terms.push(GeneralizedTerm::Triple(triple));
        }
    }
    if let Some(c) = &analysis.interrogative_class {
        terms.push(GeneralizedTerm::Triple(NETriple::class_only(c.clone())));
    }
    for kw in &analysis.keywords {
        terms.push(GeneralizedTerm::keyword(&kw.text));
    }
    terms
}

/// The full query-expansion pipeline: annotate, check the single-relation
/// conditions, look up latently related entities, and on success re-run
/// annotation over the extended query text.
pub fn expand_query(
    text: &str,
    kb: &KnowledgeBase,
    dict: &RelationDict,
    rules: &InterrogativeRules,
    stoplist: &Stoplist,
) -> ExpandedQuery {
    let analysis = analyze_query(text, kb, dict, rules, stoplist);

    let status = if analysis.relation_mentions.is_empty() {
        ExpansionStatus::NoRelationPhrase
    } else if analysis.relation_mentions.len() >= 2 {
        ExpansionStatus::MultipleRelations
    } else if analysis.relation_mentions[0].relation_id.is_none() {
        ExpansionStatus::NoRelationMapping
    } else {
        // fact lookup only uses unambiguously identified entities
        let identified: Vec<&EntityId> = analysis
            .entities
            .iter()
            .filter_map(|a| a.entity_id.as_ref())
            .collect();
        if identified.is_empty() {
            ExpansionStatus::NoEntity
        } else {
            let relation = analysis.relation_mentions[0].relation_id.clone().unwrap();
            let mut related: BTreeSet<EntityId> = BTreeSet::new();
            for e in identified {
                // ids come from the KB's own name index, so lookups succeed
                related.extend(kb.related_entities(e, &relation).unwrap_or_default());
            }
            if related.is_empty() {
                ExpansionStatus::NoFacts
            } else {
                let added_names: Vec<String> = related
                    .iter()
                    .filter_map(|e| kb.entity(e))
                    .map(|e| e.canonical_name.clone())
                    .collect();
                let extended = format!("{} {}", text, added_names.join(" "));
                let extended_analysis = analyze_query(&extended, kb, dict, rules, stoplist);
                let terms = query_terms(&extended_analysis);
                return ExpandedQuery {
                    original_text: text.to_owned(),
                    terms,
                    added_names,
                    status: ExpansionStatus::Expanded,
                    analysis: extended_analysis,
                };
            }
        }
    };

    let terms = query_terms(&analysis);
    ExpandedQuery {
        original_text: text.to_owned(),
        terms,
        added_names: Vec::new(),
        status,
        analysis,
    }
}
