//! Text analysis: tokenization, stop-word removal, gazetteer entity
//! recognition against the KB, relation-phrase recognition via a
//! dictionary, and interrogative-word mapping to NE classes.
//!
//! All operations are pure functions of immutable inputs. Matching is
//! token-aligned and left-to-right longest-match throughout.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::kb::{normalize_name, ClassId, EntityId, KnowledgeBase, RelationId};

/// Default English stop-word list (the classic 33-word list).
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

const INTERROGATIVES: [&str; 6] = ["who", "which", "where", "what", "when", "how"];

#[derive(Debug, Error)]
pub enum AnnotateError {
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
}

/// A token with character offsets into its source string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Split text into maximal runs of letters and digits. A `.` or `'`
/// flanked by letters/digits on both sides stays inside the token, so
/// "U.S." yields "U.S" and "don't" stays whole. Offsets are in chars.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let is_word = |i: usize| -> bool {
        let ch = chars[i];
        if ch.is_alphanumeric() {
            return true;
        }
        if ch == '.' || ch == '\'' {
            return i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_alphanumeric()
                && chars[i + 1].is_alphanumeric();
        }
        false
    };
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if is_word(i) {
            let start = i;
            while i < chars.len() && is_word(i) {
                i += 1;
            }
            tokens.push(Token {
                text: chars[start..i].iter().collect(),
                start,
                end: i,
            });
        } else {
            i += 1;
        }
    }
    tokens
}

#[derive(Debug, Clone, Default)]
pub struct Stoplist {
    words: HashSet<String>,
}

impl Stoplist {
    pub fn from_words<I: IntoIterator<Item = S>, S: AsRef<str>>(words: I) -> Self {
        Self {
            words: words
                .into_iter()
                .map(|w| w.as_ref().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// The built-in English list.
    pub fn default_english() -> Self {
        Self::from_words(DEFAULT_STOPWORDS.lines().map(str::trim))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AnnotateError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| AnnotateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::from_words(text.lines().map(str::trim)))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Drop tokens whose case-folded text is in the stoplist.
pub fn remove_stopwords(tokens: &[Token], stoplist: &Stoplist) -> Vec<Token> {
    tokens
        .iter()
        .filter(|t| !stoplist.contains(&t.text))
        .cloned()
        .collect()
}

/// A gazetteer match. `entity_id` is only filled when the surface name
/// resolves to exactly one KB entity; an ambiguous name yields one
/// annotation per candidate, each carrying that candidate's class but no
/// identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityAnnotation {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    /// Normalized surface form.
    pub name: String,
    pub class_id: Option<ClassId>,
    pub entity_id: Option<EntityId>,
}

/// Left-to-right longest-match of KB names (canonical and aliases) over
/// the token sequence, case-insensitive. Matches never overlap; after a
/// match, scanning resumes past it.
pub fn recognize_entities(text: &str, kb: &KnowledgeBase) -> Vec<EntityAnnotation> {
    let tokens = tokenize(text);
    let chars: Vec<char> = text.chars().collect();
    let max_words = kb.max_name_words();
    let mut annotations = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut matched_len = 0;
        for len in (1..=max_words.min(tokens.len() - i)).rev() {
            let start = tokens[i].start;
            let end = tokens[i + len - 1].end;
            let surface: String = chars[start..end].iter().collect();
            let name = normalize_name(&surface);
            let entities = kb.entities_by_name(&name);
            if entities.is_empty() {
                continue;
            }
            let unambiguous = entities.len() == 1;
            for eid in entities {
                let class_id = kb.entity(&eid).map(|e| e.class_id.clone());
                annotations.push(EntityAnnotation {
                    start,
                    end,
                    surface: surface.clone(),
                    name: name.clone(),
                    class_id,
                    entity_id: unambiguous.then(|| eid.clone()),
                });
            }
            matched_len = len;
            break;
        }
        i += matched_len.max(1);
    }
    annotations
}

/// Dictionary mapping relation phrases to KB relation ids.
#[derive(Debug, Clone, Default)]
pub struct RelationDict {
    phrases: std::collections::HashMap<String, RelationId>,
    max_words: usize,
}

impl RelationDict {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, phrase: &str, relation: RelationId) {
        let key = normalize_name(phrase);
        if key.is_empty() {
            return;
        }
        self.max_words = self.max_words.max(key.split(' ').count());
        self.phrases.insert(key, relation);
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AnnotateError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| AnnotateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, AnnotateError> {
        let mut dict = Self::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (phrase, relation) = line.split_once('\t').ok_or_else(|| AnnotateError::Parse {
                path: origin.to_owned(),
                line: idx + 1,
                message: "expected `phrase<TAB>relation_id`".into(),
            })?;
            dict.insert(phrase, RelationId::from(relation.trim()));
        }
        Ok(dict)
    }

    /// Exact case-insensitive lookup; `None` when the phrase is absent.
    pub fn map_phrase(&self, phrase: &str) -> Option<RelationId> {
        self.phrases.get(&normalize_name(phrase)).cloned()
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }
    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationMention {
    pub start: usize,
    pub end: usize,
    /// The dictionary phrase that matched.
    pub phrase: String,
    /// `None` marks an unresolved phrase.
    pub relation_id: Option<RelationId>,
}

/// Longest-match of dictionary phrases over contiguous token runs that lie
/// outside entity spans (entity spans are masked first).
pub fn recognize_relation_phrases(
    text: &str,
    tokens: &[Token],
    entity_spans: &[(usize, usize)],
    dict: &RelationDict,
) -> Vec<RelationMention> {
    let chars: Vec<char> = text.chars().collect();
    let masked = |t: &Token| {
        entity_spans
            .iter()
            .any(|&(s, e)| t.start < e && t.end > s)
    };
    let mut mentions = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if masked(&tokens[i]) {
            i += 1;
            continue;
        }
        // length of the contiguous unmasked run starting at i
        let mut run = 0;
        while i + run < tokens.len() && !masked(&tokens[i + run]) {
            run += 1;
        }
        let mut matched_len = 0;
        for len in (1..=dict.max_words.min(run)).rev() {
            let start = tokens[i].start;
            let end = tokens[i + len - 1].end;
            let surface: String = chars[start..end].iter().collect();
            let key = normalize_name(&surface);
            if let Some(relation) = dict.phrases.get(&key) {
                mentions.push(RelationMention {
                    start,
                    end,
                    phrase: key,
                    relation_id: Some(relation.clone()),
                });
                matched_len = len;
                break;
            }
        }
        i += matched_len.max(1);
    }
    mentions
}

/// One interrogative-mapping rule: all trigger keywords must occur in the
/// query; an empty trigger list is the word's default rule.
#[derive(Debug, Clone)]
pub struct InterrogativeRule {
    pub word: String,
    pub triggers: Vec<String>,
    pub class_id: ClassId,
}

#[derive(Debug, Clone, Default)]
pub struct InterrogativeRules {
    rules: Vec<InterrogativeRule>,
}

impl InterrogativeRules {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, word: &str, triggers: Vec<String>, class_id: ClassId) {
        self.rules.push(InterrogativeRule {
            word: word.to_lowercase(),
            triggers: triggers.into_iter().map(|t| t.to_lowercase()).collect(),
            class_id,
        });
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AnnotateError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| AnnotateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, AnnotateError> {
        let mut rules = Self::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(AnnotateError::Parse {
                    path: origin.to_owned(),
                    line: idx + 1,
                    message: "expected `word<TAB>triggers<TAB>class_id`".into(),
                });
            }
            let triggers = fields[1]
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(str::to_owned)
                .collect();
            rules.push(fields[0], triggers, ClassId::from(fields[2]));
        }
        Ok(rules)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Map the query's leading interrogative word (who/which/where/what/when/
/// how) to an NE class. Rules are tried in file order; the first rule
/// whose trigger keywords all occur in the query wins, so a word's
/// default (empty-trigger) rule should come last.
pub fn map_interrogative(tokens: &[Token], rules: &InterrogativeRules) -> Option<ClassId> {
    let first = tokens.first()?.text.to_lowercase();
    if !INTERROGATIVES.contains(&first.as_str()) {
        return None;
    }
    let words: HashSet<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
    rules
        .rules
        .iter()
        .find(|rule| rule.word == first && rule.triggers.iter().all(|t| words.contains(t)))
        .map(|rule| rule.class_id.clone())
}

/// Full analysis of a query string: tokens, entity annotations, relation
/// mentions, the mapped interrogative class, and residual keywords.
///
/// Residual keywords are the tokens outside entity spans, minus the
/// mapped interrogative word and stop words. Relation-phrase tokens that
/// are not stop words stay as keywords.
#[derive(Debug, Clone)]
pub struct QueryAnalysis {
    pub tokens: Vec<Token>,
    pub entities: Vec<EntityAnnotation>,
    pub relation_mentions: Vec<RelationMention>,
    pub interrogative_class: Option<ClassId>,
    pub keywords: Vec<Token>,
}

pub fn analyze_query(
    text: &str,
    kb: &KnowledgeBase,
    dict: &RelationDict,
    rules: &InterrogativeRules,
    stoplist: &Stoplist,
) -> QueryAnalysis {
    let tokens = tokenize(text);
    let entities = recognize_entities(text, kb);
    let entity_spans: Vec<(usize, usize)> = entities.iter().map(|a| (a.start, a.end)).collect();
    let mut relation_mentions = recognize_relation_phrases(text, &tokens, &entity_spans, dict);
    // a dictionary phrase may map to a relation type the KB does not
    // declare; such mentions stay recognized but unresolved
    for m in &mut relation_mentions {
        if let Some(r) = &m.relation_id {
            if kb.relation_type(r).is_none() {
                m.relation_id = None;
            }
        }
    }
    let interrogative_class = map_interrogative(&tokens, rules);
    let interrogative_span = if interrogative_class.is_some() {
        tokens.first().map(|t| (t.start, t.end))
    } else {
        None
    };
    let residual: Vec<Token> = tokens
        .iter()
        .filter(|t| {
            !entity_spans.iter().any(|&(s, e)| t.start < e && t.end > s)
                && Some((t.start, t.end)) != interrogative_span
        })
        .cloned()
        .collect();
    let keywords = remove_stopwords(&residual, stoplist);
    QueryAnalysis {
        tokens,
        entities,
        relation_mentions,
        interrogative_class,
        keywords,
    }
}

/// Document-side analysis: entity annotations plus residual keywords.
/// With `keywords_inside_entities`, tokens covered by entity spans are
/// also kept as keywords.
pub fn analyze_document(
    text: &str,
    kb: &KnowledgeBase,
    stoplist: &Stoplist,
    keywords_inside_entities: bool,
) -> (Vec<EntityAnnotation>, Vec<Token>) {
    let tokens = tokenize(text);
    let entities = recognize_entities(text, kb);
    let entity_spans: Vec<(usize, usize)> = entities.iter().map(|a| (a.start, a.end)).collect();
    let residual: Vec<Token> = tokens
        .iter()
        .filter(|t| {
            keywords_inside_entities
                || !entity_spans.iter().any(|&(s, e)| t.start < e && t.end > s)
        })
        .cloned()
        .collect();
    let keywords = remove_stopwords(&residual, stoplist);
    (entities, keywords)
}
