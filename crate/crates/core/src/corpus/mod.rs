//! Parallel-corpus loading, preprocessing, tokenization, padding, and
//! splitting for the translation models.

pub mod synth;

pub use synth::{generate_synthetic, synthetic_word_map};

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neural::seeded_rng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line count mismatch: {0} source lines vs {1} target lines")]
    LineCountMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("sequence of length {len} exceeds pad length {limit}")]
    SequenceTooLong { len: usize, limit: usize },
    #[error("split ratio {0} outside (0, 1)")]
    InvalidRatio(f64),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("unknown id {0} in sequence")]
    UnknownId(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Aligned sentence pairs, source and target.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParallelCorpus {
    pub pairs: Vec<(String, String)>,
}

impl ParallelCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Zip two one-sentence-per-line UTF-8 files into a corpus.
pub fn load_parallel(
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
) -> Result<ParallelCorpus, CorpusError> {
    let src = fs::read_to_string(src_path)?;
    let tgt = fs::read_to_string(tgt_path)?;
    parse_parallel(&src, &tgt)
}

/// Line-zipping core, separated from I/O so it can be exercised directly.
pub fn parse_parallel(src: &str, tgt: &str) -> Result<ParallelCorpus, CorpusError> {
    let src_lines: Vec<&str> = lines_of(src);
    let tgt_lines: Vec<&str> = lines_of(tgt);
    if src_lines.len() != tgt_lines.len() {
        return Err(CorpusError::LineCountMismatch(src_lines.len(), tgt_lines.len()));
    }
    Ok(ParallelCorpus {
        pairs: src_lines
            .into_iter()
            .zip(tgt_lines)
            .map(|(s, t)| (s.to_string(), t.to_string()))
            .collect(),
    })
}

fn lines_of(text: &str) -> Vec<&str> {
    // A single trailing newline does not add an empty last sentence.
    let trimmed = text.strip_suffix('\n').unwrap_or(text);
    if trimmed.is_empty() {
        return Vec::new();
    }
    trimmed.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect()
}

/// Characters that get space-delimited by [`preprocess`].
const DELIMITED: &[char] = &['.', ',', '!', '?', '\'', '"', ';', ':'];

/// Lowercase, space out punctuation, collapse whitespace.
pub fn preprocess(text: &str) -> String {
    let mut spaced = String::with_capacity(text.len() + 8);
    for c in text.to_lowercase().chars() {
        if DELIMITED.contains(&c) {
            spaced.push(' ');
            spaced.push(c);
            spaced.push(' ');
        } else {
            spaced.push(c);
        }
    }
    spaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentence_pairs: usize,
    pub words_src: usize,
    pub words_tgt: usize,
    pub unique_src: usize,
    pub unique_tgt: usize,
}

/// Whitespace-token statistics over the preprocessed corpus plus the
/// `top_k` most frequent words per side (ties broken by first
/// occurrence).
pub fn corpus_stats(
    corpus: &ParallelCorpus,
    top_k: usize,
) -> (CorpusStats, Vec<(String, usize)>, Vec<(String, usize)>) {
    let (src_total, src_ranked) = side_counts(corpus.pairs.iter().map(|(s, _)| s.as_str()));
    let (tgt_total, tgt_ranked) = side_counts(corpus.pairs.iter().map(|(_, t)| t.as_str()));
    let stats = CorpusStats {
        sentence_pairs: corpus.len(),
        words_src: src_total,
        words_tgt: tgt_total,
        unique_src: src_ranked.len(),
        unique_tgt: tgt_ranked.len(),
    };
    let top = |ranked: Vec<(String, usize)>| ranked.into_iter().take(top_k).collect();
    (stats, top(src_ranked), top(tgt_ranked))
}

/// Token totals and frequency ranking (freq desc, first occurrence asc)
/// over raw whitespace tokens of the preprocessed text.
fn side_counts<'a>(sentences: impl Iterator<Item = &'a str>) -> (usize, Vec<(String, usize)>) {
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new(); // word -> (freq, first_idx)
    let mut total = 0usize;
    let mut next_idx = 0usize;
    for sentence in sentences {
        for tok in preprocess(sentence).split_whitespace() {
            total += 1;
            let entry = counts.entry(tok.to_string()).or_insert_with(|| {
                let idx = next_idx;
                next_idx += 1;
                (0, idx)
            });
            entry.0 += 1;
        }
    }
    let mut ranked: Vec<(String, usize, usize)> =
        counts.into_iter().map(|(w, (f, i))| (w, f, i)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    (total, ranked.into_iter().map(|(w, f, _)| (w, f)).collect())
}

/// Characters filtered out of tokens before vocabulary lookup. The
/// apostrophe is intentionally absent, so contraction fragments such as
/// `l'` survive as words.
const TOKEN_FILTER: &[char] = &[
    '!', '"', '#', '$', '%', '&', '(', ')', '*', '+', ',', '-', '.', '/', ':', ';', '<', '=',
    '>', '?', '@', '[', '\\', ']', '^', '_', '`', '{', '|', '}', '~', '\t', '\n',
];

/// Lowercase a raw token and drop filtered characters; `None` when
/// nothing is left (pure punctuation vanishes from sequences).
fn filter_token(token: &str) -> Option<String> {
    let cleaned: String = token
        .to_lowercase()
        .chars()
        .filter(|c| !TOKEN_FILTER.contains(c))
        .collect();
    if cleaned.is_empty() {
        None
    } else {
        Some(cleaned)
    }
}

pub const PAD_ID: u32 = 0;
pub const UNK_TOKEN: &str = "<UNK>";
pub const PAD_TOKEN: &str = "<PAD>";

/// Frequency-ordered word↔id maps. Ids run 1..=V by descending
/// frequency; 0 is reserved for padding and never maps to a word; the
/// unknown token sits at V+1 so it displaces nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    word_to_id: HashMap<String, u32>,
    id_to_word: Vec<String>, // index 1..=V; index 0 unused
    frequencies: Vec<usize>, // aligned with id_to_word
}

impl Vocabulary {
    /// Number of in-vocabulary words (excludes pad and unk).
    pub fn len(&self) -> usize {
        self.id_to_word.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn unk_id(&self) -> u32 {
        self.len() as u32 + 1
    }

    /// Total distinct ids a model must handle: pad + words + unk.
    pub fn id_bound(&self) -> usize {
        self.len() + 2
    }

    pub fn id_of(&self, word: &str) -> Option<u32> {
        self.word_to_id.get(word).copied()
    }

    pub fn word_of(&self, id: u32) -> Option<&str> {
        if id == PAD_ID || id == self.unk_id() {
            return None;
        }
        self.id_to_word.get(id as usize).map(|s| s.as_str())
    }

    pub fn frequency_of_id(&self, id: u32) -> Option<usize> {
        self.frequencies.get(id as usize).copied()
    }

    /// Words in id order (id 1 first).
    pub fn words(&self) -> impl Iterator<Item = (&str, u32)> {
        self.id_to_word
            .iter()
            .enumerate()
            .skip(1)
            .map(|(id, w)| (w.as_str(), id as u32))
    }
}

/// Assign ids 1..=V by descending token frequency, ties broken by first
/// occurrence in reading order. Pure-punctuation tokens are dropped.
pub fn fit_tokenizer(sentences: &[impl AsRef<str>]) -> Result<Vocabulary, CorpusError> {
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    let mut next_idx = 0usize;
    for sentence in sentences {
        for raw in sentence.as_ref().split_whitespace() {
            if let Some(tok) = filter_token(raw) {
                let entry = counts.entry(tok).or_insert_with(|| {
                    let idx = next_idx;
                    next_idx += 1;
                    (0, idx)
                });
                entry.0 += 1;
            }
        }
    }
    if counts.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let mut ranked: Vec<(String, usize, usize)> =
        counts.into_iter().map(|(w, (f, i))| (w, f, i)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

    let mut vocab = Vocabulary {
        word_to_id: HashMap::with_capacity(ranked.len()),
        id_to_word: vec![PAD_TOKEN.to_string()],
        frequencies: vec![0],
    };
    for (word, freq, _) in ranked {
        let id = vocab.id_to_word.len() as u32;
        vocab.word_to_id.insert(word.clone(), id);
        vocab.id_to_word.push(word);
        vocab.frequencies.push(freq);
    }
    Ok(vocab)
}

/// Map sentences to id sequences. Out-of-vocabulary words become the unk
/// id; filtered punctuation tokens disappear.
pub fn tokenize(sentences: &[impl AsRef<str>], vocab: &Vocabulary) -> Vec<Vec<u32>> {
    sentences
        .iter()
        .map(|sentence| {
            sentence
                .as_ref()
                .split_whitespace()
                .filter_map(filter_token)
                .map(|tok| vocab.id_of(&tok).unwrap_or_else(|| vocab.unk_id()))
                .collect()
        })
        .collect()
}

/// Inverse of [`tokenize`] for sequences without pad/unk ids.
pub fn detokenize(ids: &[u32], vocab: &Vocabulary) -> Result<String, CorpusError> {
    let mut words = Vec::with_capacity(ids.len());
    for &id in ids {
        words.push(vocab.word_of(id).ok_or(CorpusError::UnknownId(id))?);
    }
    Ok(words.join(" "))
}

/// Post-pad every sequence with zeros to length `t`. With `truncate`
/// disabled an over-long sequence is an error; enabled, it is cut to `t`.
pub fn pad(sequences: &[Vec<u32>], t: usize, truncate: bool) -> Result<Vec<Vec<u32>>, CorpusError> {
    sequences
        .iter()
        .map(|seq| {
            if seq.len() > t && !truncate {
                return Err(CorpusError::SequenceTooLong { len: seq.len(), limit: t });
            }
            let mut row = seq.clone();
            row.truncate(t);
            row.resize(t, PAD_ID);
            Ok(row)
        })
        .collect()
}

/// Padded id matrices plus the vocabularies that produced them.
#[derive(Debug, Clone)]
pub struct TokenizedDataset {
    pub source_ids: Vec<Vec<u32>>,
    pub target_ids: Vec<Vec<u32>>,
    pub pad_length: usize,
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
}

impl TokenizedDataset {
    pub fn len(&self) -> usize {
        self.source_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_ids.is_empty()
    }
}

/// Full preprocessing pipeline: preprocess both sides, fit one
/// vocabulary per side, tokenize, and post-pad to `pin_t` or to the
/// longest sequence on either side.
pub fn make_dataset(
    corpus: &ParallelCorpus,
    pin_t: Option<usize>,
) -> Result<TokenizedDataset, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let src: Vec<String> = corpus.pairs.iter().map(|(s, _)| preprocess(s)).collect();
    let tgt: Vec<String> = corpus.pairs.iter().map(|(_, t)| preprocess(t)).collect();
    let source_vocab = fit_tokenizer(&src)?;
    let target_vocab = fit_tokenizer(&tgt)?;
    let src_ids = tokenize(&src, &source_vocab);
    let tgt_ids = tokenize(&tgt, &target_vocab);
    let longest = src_ids
        .iter()
        .chain(&tgt_ids)
        .map(Vec::len)
        .max()
        .unwrap_or(0);
    let t = pin_t.unwrap_or(longest);
    if t == 0 {
        return Err(CorpusError::InvalidParams("pad length 0".into()));
    }
    Ok(TokenizedDataset {
        source_ids: pad(&src_ids, t, false)?,
        target_ids: pad(&tgt_ids, t, false)?,
        pad_length: t,
        source_vocab,
        target_vocab,
    })
}

/// Seeded shuffle, then prefix split: `floor(n·ratio)` rows train, the
/// rest validation. Vocabularies are shared by clone.
pub fn split(
    dataset: &TokenizedDataset,
    ratio: f64,
    seed: u64,
) -> Result<(TokenizedDataset, TokenizedDataset), CorpusError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::InvalidRatio(ratio));
    }
    let n = dataset.len();
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut seeded_rng(seed));
    let n_train = (n as f64 * ratio).floor() as usize;

    let take = |idx: &[usize]| TokenizedDataset {
        source_ids: idx.iter().map(|&i| dataset.source_ids[i].clone()).collect(),
        target_ids: idx.iter().map(|&i| dataset.target_ids[i].clone()).collect(),
        pad_length: dataset.pad_length,
        source_vocab: dataset.source_vocab.clone(),
        target_vocab: dataset.target_vocab.clone(),
    };
    Ok((take(&indices[..n_train]), take(&indices[n_train..])))
}

/// Keep only pairs whose tokens all fall inside the per-side top-k
/// vocabulary and whose token counts stay within `max_len`. Frequencies
/// are measured over raw whitespace tokens of the preprocessed text, so
/// delimited punctuation counts as a token.
pub fn subset_corpus(
    corpus: &ParallelCorpus,
    max_vocab_src: usize,
    max_vocab_tgt: usize,
    max_len: usize,
) -> Result<ParallelCorpus, CorpusError> {
    if max_vocab_src == 0 || max_vocab_tgt == 0 || max_len == 0 {
        return Err(CorpusError::InvalidParams("subset limits must be positive".into()));
    }
    let (_, src_ranked) = side_counts(corpus.pairs.iter().map(|(s, _)| s.as_str()));
    let (_, tgt_ranked) = side_counts(corpus.pairs.iter().map(|(_, t)| t.as_str()));
    let src_keep: std::collections::HashSet<&str> = src_ranked
        .iter()
        .take(max_vocab_src)
        .map(|(w, _)| w.as_str())
        .collect();
    let tgt_keep: std::collections::HashSet<&str> = tgt_ranked
        .iter()
        .take(max_vocab_tgt)
        .map(|(w, _)| w.as_str())
        .collect();

    let covered = |text: &str, keep: &std::collections::HashSet<&str>| {
        let toks: Vec<&str> = text.split_whitespace().collect();
        toks.len() <= max_len && toks.iter().all(|t| keep.contains(t))
    };
    Ok(ParallelCorpus {
        pairs: corpus
            .pairs
            .iter()
            .filter(|(s, t)| {
                covered(&preprocess(s), &src_keep) && covered(&preprocess(t), &tgt_keep)
            })
            .cloned()
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG_SENTENCES: [&str; 3] = [
        "The quick brown fox jumps over the lazy dog .",
        "By Jove , my quick study of lexicography won a prize .",
        "This is a short sentence .",
    ];

    #[test]
    fn golden_dictionary() {
        let vocab = fit_tokenizer(&FIG_SENTENCES).unwrap();
        let expect = [
            ("the", 1),
            ("quick", 2),
            ("a", 3),
            ("brown", 4),
            ("fox", 5),
            ("jumps", 6),
            ("over", 7),
            ("lazy", 8),
            ("dog", 9),
            ("by", 10),
            ("jove", 11),
            ("my", 12),
            ("study", 13),
            ("of", 14),
            ("lexicography", 15),
            ("won", 16),
            ("prize", 17),
            ("this", 18),
            ("is", 19),
            ("short", 20),
            ("sentence", 21),
        ];
        assert_eq!(vocab.len(), expect.len());
        for (word, id) in expect {
            assert_eq!(vocab.id_of(word), Some(id), "word {word:?}");
        }
    }

    #[test]
    fn golden_sequences() {
        let vocab = fit_tokenizer(&FIG_SENTENCES).unwrap();
        let seqs = tokenize(&FIG_SENTENCES, &vocab);
        assert_eq!(seqs[0], vec![1, 2, 4, 5, 6, 7, 1, 8, 9]);
        assert_eq!(seqs[1], vec![10, 11, 12, 2, 13, 14, 15, 16, 3, 17]);
        assert_eq!(seqs[2], vec![18, 19, 3, 20, 21]);
    }

    #[test]
    fn golden_padding_row() {
        let padded = pad(&[vec![18, 19, 3, 20, 21]], 10, false).unwrap();
        assert_eq!(padded[0], vec![18, 19, 3, 20, 21, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn oov_maps_to_unk_and_punct_vanishes() {
        let vocab = fit_tokenizer(&FIG_SENTENCES).unwrap();
        let seqs = tokenize(&["zebra !".to_string()], &vocab);
        assert_eq!(seqs[0], vec![vocab.unk_id()]);
    }

    #[test]
    fn freq_beats_recency() {
        let vocab = fit_tokenizer(&["b a", "a"]).unwrap();
        assert_eq!(vocab.id_of("a"), Some(1));
        assert_eq!(vocab.id_of("b"), Some(2));
    }

    #[test]
    fn single_word() {
        let vocab = fit_tokenizer(&["a"]).unwrap();
        assert_eq!(vocab.id_of("a"), Some(1));
        assert_eq!(vocab.len(), 1);
        assert!(fit_tokenizer(&[] as &[&str]).is_err());
    }

    #[test]
    fn preprocess_rules() {
        assert_eq!(preprocess("New Jersey is quiet."), "new jersey is quiet .");
        assert_eq!(preprocess(""), "");
        assert_eq!(preprocess("l'automne"), "l ' automne");
        assert_eq!(preprocess("  A   lot\tof \n spaces "), "a lot of spaces");
    }

    #[test]
    fn parallel_mismatch_reports_both_counts() {
        let err = parse_parallel("a\nb\nc\nd\ne", "x\ny\nz\nw").unwrap_err();
        match err {
            CorpusError::LineCountMismatch(5, 4) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pad_edge_cases() {
        assert_eq!(pad(&[vec![]], 3, false).unwrap()[0], vec![0, 0, 0]);
        assert!(matches!(
            pad(&[vec![1, 2, 3]], 2, false),
            Err(CorpusError::SequenceTooLong { len: 3, limit: 2 })
        ));
        assert_eq!(pad(&[vec![1, 2, 3]], 2, true).unwrap()[0], vec![1, 2]);
    }

    #[test]
    fn stats_counts() {
        let corpus = ParallelCorpus {
            pairs: vec![("a a b".into(), "x".into())],
        };
        let (stats, top_src, _) = corpus_stats(&corpus, 10);
        assert_eq!(stats.words_src, 3);
        assert_eq!(stats.unique_src, 2);
        assert_eq!(top_src[0].0, "a");

        let empty = ParallelCorpus::default();
        let (stats, ts, tt) = corpus_stats(&empty, 10);
        assert_eq!(
            (stats.sentence_pairs, stats.words_src, stats.unique_tgt),
            (0, 0, 0)
        );
        assert!(ts.is_empty() && tt.is_empty());
    }

    #[test]
    fn split_sizes_match_paper_arithmetic() {
        let n = 123_892;
        let ds = TokenizedDataset {
            source_ids: vec![vec![1]; n],
            target_ids: vec![vec![1]; n],
            pad_length: 1,
            source_vocab: fit_tokenizer(&["a"]).unwrap(),
            target_vocab: fit_tokenizer(&["a"]).unwrap(),
        };
        let (train, val) = split(&ds, 0.8, 42).unwrap();
        assert_eq!(train.len(), 99_113);
        assert_eq!(val.len(), 24_779);
    }

    #[test]
    fn split_is_deterministic_partition() {
        let mut ds = TokenizedDataset {
            source_ids: (0..10u32).map(|i| vec![i + 1]).collect(),
            target_ids: (0..10u32).map(|i| vec![i + 1]).collect(),
            pad_length: 1,
            source_vocab: fit_tokenizer(&["a"]).unwrap(),
            target_vocab: fit_tokenizer(&["a"]).unwrap(),
        };
        ds.source_ids.iter_mut().for_each(|r| r.push(0));
        ds.target_ids.iter_mut().for_each(|r| r.push(0));
        let (t1, v1) = split(&ds, 0.8, 7).unwrap();
        let (t2, v2) = split(&ds, 0.8, 7).unwrap();
        assert_eq!(t1.source_ids, t2.source_ids);
        assert_eq!(v1.source_ids, v2.source_ids);
        assert_eq!(t1.len(), 8);
        assert_eq!(v1.len(), 2);

        let mut all: Vec<_> = t1.source_ids.iter().chain(&v1.source_ids).cloned().collect();
        all.sort();
        let mut orig = ds.source_ids.clone();
        orig.sort();
        assert_eq!(all, orig);

        assert!(split(&ds, 1.0, 7).is_err());
    }

    #[test]
    fn subset_keeps_fully_covered_pairs() {
        let corpus = ParallelCorpus {
            pairs: vec![
                ("a b".into(), "x".into()),
                ("c".into(), "y".into()),
                ("a".into(), "x".into()),
                ("a a b".into(), "x y".into()),
                ("b c".into(), "y x".into()),
            ],
        };
        // Brute-force oracle: per-side frequency ranking is
        // a(4) b(3) c(2) / x(4) y(3); keep top-1 source {a}, top-2 target.
        let out = subset_corpus(&corpus, 1, 2, 10).unwrap();
        assert_eq!(out.pairs, vec![("a".to_string(), "x".to_string())]);

        let unchanged = subset_corpus(&corpus, 100, 100, 100).unwrap();
        assert_eq!(unchanged.pairs, corpus.pairs);
    }

    #[test]
    fn detokenize_round_trip() {
        let vocab = fit_tokenizer(&FIG_SENTENCES).unwrap();
        let ids = vec![18, 19, 3, 20, 21];
        let text = detokenize(&ids, &vocab).unwrap();
        assert_eq!(tokenize(&[text], &vocab)[0], ids);
        assert!(detokenize(&[0], &vocab).is_err());
    }
}
