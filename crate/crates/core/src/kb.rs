//! Knowledge base: class hierarchy with transitive superclass closure,
//! entity descriptions with aliases, and relation facts between entities.
//!
//! The KB is loaded from a line-oriented tab-separated file with four
//! sections (`#CLASSES`, `#ENTITIES`, `#RELATIONS`, `#FACTS`, in that
//! order) and is immutable after load. All derived indexes are built at
//! load time and validated against the declared records.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

macro_rules! id_type {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

id_type!(ClassId);
id_type!(EntityId);
id_type!(RelationId);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub class_id: ClassId,
    pub label: String,
    pub parents: BTreeSet<ClassId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub entity_id: EntityId,
    pub class_id: ClassId,
    pub canonical_name: String,
    pub aliases: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationType {
    pub relation_id: RelationId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fact {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("io error reading knowledge base: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate {kind} id `{id}`")]
    DuplicateId {
        line: usize,
        kind: &'static str,
        id: String,
    },
    #[error("line {line}: {kind} `{id}` is not declared")]
    DanglingRef {
        line: usize,
        kind: &'static str,
        id: String,
    },
    #[error("cycle in class hierarchy involving `{class}`")]
    HierarchyCycle { class: ClassId },
    #[error("unknown class `{0}`")]
    UnknownClass(ClassId),
    #[error("unknown entity `{0}`")]
    UnknownEntity(EntityId),
    #[error("unknown relation `{0}`")]
    UnknownRelation(RelationId),
}

/// Case-fold, trim, and collapse internal whitespace runs to one space.
/// This is the comparison form for all surface-name matching.
pub fn normalize_name(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for ch in s.trim().chars() {
        if ch.is_whitespace() {
            pending_space = true;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            for lc in ch.to_lowercase() {
                out.push(lc);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    classes: BTreeMap<ClassId, ClassDef>,
    entities: BTreeMap<EntityId, Entity>,
    relation_types: BTreeMap<RelationId, RelationType>,
    facts: Vec<Fact>,
    // derived, built once at load
    name_index: HashMap<String, BTreeSet<EntityId>>,
    fact_index: HashMap<(EntityId, RelationId), BTreeSet<EntityId>>,
    max_name_words: usize,
}

impl KnowledgeBase {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, KbError> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, KbError> {
        let mut classes: BTreeMap<ClassId, ClassDef> = BTreeMap::new();
        let mut entities: BTreeMap<EntityId, Entity> = BTreeMap::new();
        let mut relation_types: BTreeMap<RelationId, RelationType> = BTreeMap::new();
        let mut facts: Vec<Fact> = Vec::new();

        #[derive(PartialEq, Clone, Copy)]
        enum Section {
            Preamble,
            Classes,
            Entities,
            Relations,
            Facts,
        }
        let mut section = Section::Preamble;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            // entity ids may themselves start with `#` (e.g. #Company_123),
            // so a leading `#` only introduces a header or comment on
            // lines without tab-separated fields
            if line.starts_with('#') && !line.contains('\t') {
                let header = &line[1..];
                section = match (header, section) {
                    ("CLASSES", Section::Preamble) => Section::Classes,
                    ("ENTITIES", Section::Classes) => Section::Entities,
                    ("RELATIONS", Section::Entities) => Section::Relations,
                    ("FACTS", Section::Relations) => Section::Facts,
                    ("CLASSES" | "ENTITIES" | "RELATIONS" | "FACTS", _) => {
                        return Err(KbError::Parse {
                            line: line_no,
                            message: format!("section #{header} out of order"),
                        })
                    }
                    (_, s) => s,
                };
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match section {
                Section::Preamble => {
                    return Err(KbError::Parse {
                        line: line_no,
                        message: "data before #CLASSES header".into(),
                    })
                }
                Section::Classes => {
                    // the trailing parent list may be empty or omitted
                    if fields.len() < 2 || fields.len() > 3 {
                        return Err(KbError::Parse {
                            line: line_no,
                            message: format!("expected 3 tab-separated fields, got {}", fields.len()),
                        });
                    }
                    let class_id = ClassId::from(fields[0]);
                    let parents: BTreeSet<ClassId> = fields
                        .get(2)
                        .copied()
                        .unwrap_or("")
                        .split(',')
                        .filter(|p| !p.is_empty())
                        .map(ClassId::from)
                        .collect();
                    let def = ClassDef {
                        class_id: class_id.clone(),
                        label: fields[1].to_owned(),
                        parents,
                    };
                    if classes.insert(class_id.clone(), def).is_some() {
                        return Err(KbError::DuplicateId {
                            line: line_no,
                            kind: "class",
                            id: class_id.0,
                        });
                    }
                }
                Section::Entities => {
                    // the trailing alias list may be empty or omitted
                    if fields.len() < 3 || fields.len() > 4 {
                        return Err(KbError::Parse {
                            line: line_no,
                            message: format!("expected 4 tab-separated fields, got {}", fields.len()),
                        });
                    }
                    let entity_id = EntityId::from(fields[0]);
                    let class_id = ClassId::from(fields[1]);
                    if !classes.contains_key(&class_id) {
                        return Err(KbError::DanglingRef {
                            line: line_no,
                            kind: "class",
                            id: class_id.0,
                        });
                    }
                    let canonical_name = fields[2].to_owned();
                    let aliases: BTreeSet<String> = fields
                        .get(3)
                        .copied()
                        .unwrap_or("")
                        .split('|')
                        .filter(|a| !a.is_empty())
                        .map(str::to_owned)
                        .filter(|a| normalize_name(a) != normalize_name(&canonical_name))
                        .collect();
                    let ent = Entity {
                        entity_id: entity_id.clone(),
                        class_id,
                        canonical_name,
                        aliases,
                    };
                    if entities.insert(entity_id.clone(), ent).is_some() {
                        return Err(KbError::DuplicateId {
                            line: line_no,
                            kind: "entity",
                            id: entity_id.0,
                        });
                    }
                }
                Section::Relations => {
                    if fields.len() != 2 {
                        return Err(KbError::Parse {
                            line: line_no,
                            message: format!("expected 2 tab-separated fields, got {}", fields.len()),
                        });
                    }
                    let relation_id = RelationId::from(fields[0]);
                    let rel = RelationType {
                        relation_id: relation_id.clone(),
                        label: fields[1].to_owned(),
                    };
                    if relation_types.insert(relation_id.clone(), rel).is_some() {
                        return Err(KbError::DuplicateId {
                            line: line_no,
                            kind: "relation",
                            id: relation_id.0,
                        });
                    }
                }
                Section::Facts => {
                    if fields.len() != 3 {
                        return Err(KbError::Parse {
                            line: line_no,
                            message: format!("expected 3 tab-separated fields, got {}", fields.len()),
                        });
                    }
                    let subject = EntityId::from(fields[0]);
                    let relation = RelationId::from(fields[1]);
                    let object = EntityId::from(fields[2]);
                    for (kind, ok, id) in [
                        ("entity", entities.contains_key(&subject), &subject.0),
                        ("relation", relation_types.contains_key(&relation), &relation.0),
                        ("entity", entities.contains_key(&object), &object.0),
                    ] {
                        if !ok {
                            return Err(KbError::DanglingRef {
                                line: line_no,
                                kind,
                                id: id.clone(),
                            });
                        }
                    }
                    facts.push(Fact {
                        subject,
                        relation,
                        object,
                    });
                }
            }
        }

        if section != Section::Facts {
            return Err(KbError::Parse {
                line: text.lines().count().max(1),
                message: "missing one or more section headers (#CLASSES, #ENTITIES, #RELATIONS, #FACTS)"
                    .into(),
            });
        }

        // parent references and acyclicity
        for def in classes.values() {
            for p in &def.parents {
                if !classes.contains_key(p) {
                    return Err(KbError::DanglingRef {
                        line: 0,
                        kind: "class",
                        id: p.0.clone(),
                    });
                }
            }
        }
        check_acyclic(&classes)?;

        facts.sort();
        facts.dedup();

        let mut kb = KnowledgeBase {
            classes,
            entities,
            relation_types,
            facts,
            name_index: HashMap::new(),
            fact_index: HashMap::new(),
            max_name_words: 0,
        };
        kb.build_indexes();
        Ok(kb)
    }

    fn build_indexes(&mut self) {
        for ent in self.entities.values() {
            for name in std::iter::once(&ent.canonical_name).chain(ent.aliases.iter()) {
                let key = normalize_name(name);
                if key.is_empty() {
                    continue;
                }
                let words = key.split(' ').count();
                self.max_name_words = self.max_name_words.max(words);
                self.name_index
                    .entry(key)
                    .or_default()
                    .insert(ent.entity_id.clone());
            }
        }
        for fact in &self.facts {
            self.fact_index
                .entry((fact.subject.clone(), fact.relation.clone()))
                .or_default()
                .insert(fact.object.clone());
            self.fact_index
                .entry((fact.object.clone(), fact.relation.clone()))
                .or_default()
                .insert(fact.subject.clone());
        }
    }

    pub fn classes(&self) -> impl Iterator<Item = &ClassDef> {
        self.classes.values()
    }
    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }
    pub fn relation_types(&self) -> impl Iterator<Item = &RelationType> {
        self.relation_types.values()
    }
    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn class(&self, c: &ClassId) -> Option<&ClassDef> {
        self.classes.get(c)
    }
    pub fn entity(&self, e: &EntityId) -> Option<&Entity> {
        self.entities.get(e)
    }
    pub fn relation_type(&self, r: &RelationId) -> Option<&RelationType> {
        self.relation_types.get(r)
    }

    /// Longest entity name in the KB, measured in whitespace-separated words.
    pub fn max_name_words(&self) -> usize {
        self.max_name_words
    }

    /// All strict ancestors of `c` under the parent relation (transitive
    /// closure, excluding `c` itself).
    pub fn super_classes(&self, c: &ClassId) -> Result<BTreeSet<ClassId>, KbError> {
        self.super_classes_within(c, None)
    }

    /// Transitive superclass closure cut off at `depth` parent steps
    /// (`None` = unlimited).
    pub fn super_classes_within(
        &self,
        c: &ClassId,
        depth: Option<usize>,
    ) -> Result<BTreeSet<ClassId>, KbError> {
        let def = self
            .classes
            .get(c)
            .ok_or_else(|| KbError::UnknownClass(c.clone()))?;
        let mut out = BTreeSet::new();
        let mut frontier: Vec<&ClassId> = def.parents.iter().collect();
        let mut level = 0usize;
        while !frontier.is_empty() {
            level += 1;
            if let Some(limit) = depth {
                if level > limit {
                    break;
                }
            }
            let mut next = Vec::new();
            for p in frontier {
                if out.insert(p.clone()) {
                    next.extend(self.classes[p].parents.iter());
                }
            }
            frontier = next;
        }
        Ok(out)
    }

    /// Canonical name plus all aliases of `e`.
    pub fn names_of(&self, e: &EntityId) -> Result<BTreeSet<String>, KbError> {
        let ent = self
            .entities
            .get(e)
            .ok_or_else(|| KbError::UnknownEntity(e.clone()))?;
        let mut names: BTreeSet<String> = ent.aliases.clone();
        names.insert(ent.canonical_name.clone());
        Ok(names)
    }

    /// All entities whose canonical name or any alias matches `n` under
    /// case-insensitive, whitespace-collapsed comparison.
    pub fn entities_by_name(&self, n: &str) -> BTreeSet<EntityId> {
        self.name_index
            .get(&normalize_name(n))
            .cloned()
            .unwrap_or_default()
    }

    /// Entities related to `e` by a fact with relation `r`, in either
    /// argument position.
    pub fn related_entities(
        &self,
        e: &EntityId,
        r: &RelationId,
    ) -> Result<BTreeSet<EntityId>, KbError> {
        if !self.entities.contains_key(e) {
            return Err(KbError::UnknownEntity(e.clone()));
        }
        if !self.relation_types.contains_key(r) {
            return Err(KbError::UnknownRelation(r.clone()));
        }
        Ok(self
            .fact_index
            .get(&(e.clone(), r.clone()))
            .cloned()
            .unwrap_or_default())
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }
    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }
    pub fn alias_count(&self) -> usize {
        self.entities.values().map(|e| e.aliases.len()).sum()
    }
    pub fn relation_type_count(&self) -> usize {
        self.relation_types.len()
    }
    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }
}

fn check_acyclic(classes: &BTreeMap<ClassId, ClassDef>) -> Result<(), KbError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let mut marks: HashMap<&ClassId, Mark> = classes.keys().map(|c| (c, Mark::White)).collect();

    fn visit<'a>(
        c: &'a ClassId,
        classes: &'a BTreeMap<ClassId, ClassDef>,
        marks: &mut HashMap<&'a ClassId, Mark>,
    ) -> Result<(), KbError> {
        match marks[c] {
            Mark::Black => return Ok(()),
            Mark::Grey => {
                return Err(KbError::HierarchyCycle { class: c.clone() });
            }
            Mark::White => {}
        }
        marks.insert(c, Mark::Grey);
        for p in &classes[c].parents {
            visit(p, classes, marks)?;
        }
        marks.insert(c, Mark::Black);
        Ok(())
    }

    for c in classes.keys() {
        visit(c, classes, &mut marks)?;
    }
    Ok(())
}
