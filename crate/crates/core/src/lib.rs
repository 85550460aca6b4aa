//! Speech behaviour analysis and neural machine translation, end to end.
//!
//! The crate has two halves that meet in the CLI:
//!
//! * **Speech analysis** — decode WAV clips ([`audio`]), measure per-frame
//!   decibel intensity ([`acoustics`]), score transcripts with a rule-based
//!   lexicon sentiment engine ([`sentiment`]), and join both per speaker
//!   cohort ([`behavior`]).
//! * **Translation** — tokenize parallel corpora ([`corpus`]), train two
//!   small GRU sequence models written from scratch ([`neural`], [`nmt`]),
//!   and evaluate them with BLEU ([`eval`]).
//!
//! Everything is deterministic for a fixed seed and single-threaded
//! execution; all randomness flows through explicitly seeded ChaCha
//! generators.

pub mod acoustics;
pub mod audio;
pub mod behavior;
pub mod corpus;
pub mod eval;
pub mod neural;
pub mod nmt;
pub mod report;
pub mod sentiment;
