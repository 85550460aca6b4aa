//! Seeded synthetic parallel corpora.
//!
//! Sentences come from a small template grammar over category word pools;
//! the target side applies a fixed bijective word mapping position by
//! position, so a sequence labeler can learn the task exactly.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{CorpusError, ParallelCorpus};
use crate::neural::seeded_rng;

const SRC_SYLLABLES: [&str; 16] = [
    "ba", "ce", "di", "fo", "gu", "ka", "le", "mi", "no", "pu", "ra", "se", "ti", "vo", "wa",
    "zu",
];
const TGT_SYLLABLES: [&str; 16] = [
    "an", "el", "ir", "os", "un", "ar", "et", "il", "on", "ul", "em", "ig", "ob", "ad", "ey",
    "ou",
];

fn spell(index: usize, count: usize, syllables: &[&str]) -> String {
    let base = syllables.len();
    let mut width = 1;
    let mut span = base;
    while span < count {
        span *= base;
        width += 1;
    }
    let mut word = String::new();
    let mut rem = index;
    for _ in 0..width {
        word.insert_str(0, syllables[rem % base]);
        rem /= base;
    }
    word
}

/// The generator's source→target dictionary: index `i` on the source side
/// translates to index `(i + 7) % n` on the target side, where `n` is the
/// effective shared vocabulary size `min(vocab_src, vocab_tgt)`.
pub fn synthetic_word_map(vocab_src: usize, vocab_tgt: usize) -> Vec<(String, String)> {
    let n = vocab_src.min(vocab_tgt);
    (0..n)
        .map(|i| (spell(i, n, &SRC_SYLLABLES), spell((i + 7) % n, n, &TGT_SYLLABLES)))
        .collect()
}

#[derive(Clone, Copy)]
enum Slot {
    Subject,
    Verb,
    Adjective,
    Object,
    Tail,
    Conjunction,
}

const TEMPLATES: &[&[Slot]] = &[
    &[Slot::Subject, Slot::Verb, Slot::Object],
    &[Slot::Subject, Slot::Verb, Slot::Adjective, Slot::Object],
    &[Slot::Subject, Slot::Verb, Slot::Object, Slot::Tail],
    &[Slot::Tail, Slot::Subject, Slot::Verb, Slot::Object],
    &[Slot::Subject, Slot::Verb, Slot::Adjective, Slot::Object, Slot::Tail],
    &[
        Slot::Subject,
        Slot::Verb,
        Slot::Object,
        Slot::Conjunction,
        Slot::Subject,
        Slot::Verb,
        Slot::Object,
    ],
    &[
        Slot::Tail,
        Slot::Subject,
        Slot::Verb,
        Slot::Adjective,
        Slot::Object,
        Slot::Conjunction,
        Slot::Subject,
        Slot::Verb,
        Slot::Object,
    ],
];

/// Word-index ranges per category over `0..n`.
struct Pools {
    subjects: std::ops::Range<usize>,
    verbs: std::ops::Range<usize>,
    adjectives: std::ops::Range<usize>,
    objects: std::ops::Range<usize>,
    tails: std::ops::Range<usize>,
    conjunctions: std::ops::Range<usize>,
}

impl Pools {
    fn carve(n: usize) -> Pools {
        // Two conjunctions, the rest split roughly 25/20/15/25/15.
        let conj = 2;
        let rest = n - conj;
        let subjects = rest / 4;
        let verbs = rest / 5;
        let adjectives = rest * 3 / 20;
        let objects = rest / 4;
        let tails = rest - subjects - verbs - adjectives - objects;
        let mut at = 0;
        let mut next = |len: usize| {
            let r = at..at + len;
            at += len;
            r
        };
        Pools {
            subjects: next(subjects),
            verbs: next(verbs),
            adjectives: next(adjectives),
            objects: next(objects),
            tails: next(tails),
            conjunctions: next(conj),
        }
    }

    fn range(&self, slot: Slot) -> &std::ops::Range<usize> {
        match slot {
            Slot::Subject => &self.subjects,
            Slot::Verb => &self.verbs,
            Slot::Adjective => &self.adjectives,
            Slot::Object => &self.objects,
            Slot::Tail => &self.tails,
            Slot::Conjunction => &self.conjunctions,
        }
    }
}

/// Generate `n_pairs` template sentences, deterministic per seed. Unique
/// word counts never exceed the requested vocabulary sizes; every target
/// token is the [`synthetic_word_map`] image of its source token.
pub fn generate_synthetic(
    n_pairs: usize,
    vocab_src: usize,
    vocab_tgt: usize,
    max_len: usize,
    seed: u64,
) -> Result<ParallelCorpus, CorpusError> {
    if n_pairs == 0 {
        return Err(CorpusError::InvalidParams("n_pairs must be positive".into()));
    }
    let n = vocab_src.min(vocab_tgt);
    if n < 16 {
        return Err(CorpusError::InvalidParams(format!(
            "need at least 16 words per side, got {n}"
        )));
    }
    let usable: Vec<&[Slot]> = TEMPLATES.iter().filter(|t| t.len() <= max_len).copied().collect();
    if usable.is_empty() {
        return Err(CorpusError::InvalidParams(format!(
            "max_len {max_len} below the shortest template"
        )));
    }

    let map = synthetic_word_map(vocab_src, vocab_tgt);
    let pools = Pools::carve(n);
    let mut rng = seeded_rng(seed);

    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let template = *usable.choose(&mut rng).expect("non-empty templates");
        let mut src = Vec::with_capacity(template.len());
        let mut tgt = Vec::with_capacity(template.len());
        for slot in template {
            let range = pools.range(*slot);
            let idx = rng.random_range(range.clone());
            src.push(map[idx].0.as_str());
            tgt.push(map[idx].1.as_str());
        }
        pairs.push((src.join(" "), tgt.join(" ")));
    }
    Ok(ParallelCorpus { pairs })
}
