//! Deterministic synthetic fixtures for benchmarking: a KB with a
//! shallow class tree plus a corpus that mentions its entities.

use std::fmt::Write as _;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use gvsm_core::KnowledgeBase;

const FILLER: &[&str] = &[
    "report", "market", "official", "statement", "region", "growth", "quarter", "announced",
    "series", "record", "early", "local", "issue", "figure", "against", "during", "between",
    "several", "measure", "public",
];

/// A KB with `n_classes` classes in random parent chains, `n_entities`
/// entities (each with 0-2 aliases), two relation types, and `n_facts`
/// random facts. Same seed, same KB.
pub fn synth_kb(n_classes: usize, n_entities: usize, n_facts: usize, seed: u64) -> KnowledgeBase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("#CLASSES\n");
    for i in 0..n_classes {
        let parent = if i == 0 {
            String::new()
        } else {
            format!("class{}", rng.gen_range(0..i))
        };
        writeln!(text, "class{i}\tClass {i}\t{parent}").unwrap();
    }
    text.push_str("#ENTITIES\n");
    for i in 0..n_entities {
        let class = rng.gen_range(0..n_classes);
        let aliases: Vec<String> = (0..rng.gen_range(0..=2))
            .map(|a| format!("entity{i} v{a}"))
            .collect();
        writeln!(text, "#E{i}\tclass{class}\tentity{i} prime\t{}", aliases.join("|")).unwrap();
    }
    text.push_str("#RELATIONS\nlinkedTo\tlinked to\nbasedAt\tbased at\n#FACTS\n");
    let mut facts = std::collections::BTreeSet::new();
    while facts.len() < n_facts {
        let s = rng.gen_range(0..n_entities);
        let o = rng.gen_range(0..n_entities);
        let r = if rng.gen_bool(0.5) { "linkedTo" } else { "basedAt" };
        facts.insert(format!("#E{s}\t{r}\t#E{o}"));
    }
    for f in facts {
        writeln!(text, "{f}").unwrap();
    }
    KnowledgeBase::parse(&text).expect("synthetic KB is well formed")
}

/// `n_docs` documents of about `words_per_doc` filler words, each
/// sprinkled with 1-3 entity mentions drawn from the KB.
pub fn synth_corpus(
    kb: &KnowledgeBase,
    n_docs: usize,
    words_per_doc: usize,
    seed: u64,
) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = kb.entities().map(|e| e.canonical_name.clone()).collect();
    (0..n_docs)
        .map(|d| {
            let mut words: Vec<String> = (0..words_per_doc)
                .map(|_| (*FILLER.choose(&mut rng).unwrap()).to_owned())
                .collect();
            for _ in 0..rng.gen_range(1..=3) {
                let pos = rng.gen_range(0..=words.len());
                words.insert(pos, names.choose(&mut rng).unwrap().clone());
            }
            (format!("doc{d:04}"), words.join(" "))
        })
        .collect()
}
