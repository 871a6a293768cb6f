//! Vocabularies, parallel corpora, synthetic reversible-translation tasks,
//! controlled hypothesis degradation and batching.

mod batch;
mod corpus;
mod degrade;
mod synthetic;
mod vocab;

pub use batch::{batchify, pair_tokens, Batch};
pub use corpus::{tokenize, ParallelCorpus, SentencePair, Side};
pub use degrade::{degrade, DegradedItem, DegradedSet};
pub use synthetic::{gen_synthetic, source_token, target_token, SyntheticTask, TaskKind, TaskSpec};
pub use vocab::{build_vocab, Vocabulary, BOS_ID, EOS_ID, PAD_ID, SPECIAL_TOKENS, UNK_ID};
