//! Gradient-informed rule induction for recurrent text classifiers.
//!
//! The pipeline has five stages, one module each:
//!
//! 1. [`corpus`] generates a labeled synthetic clinical corpus whose labeling
//!    rule (and therefore the set of truly important terms) is known.
//! 2. [`rnn`] trains a single-layer LSTM document classifier and exposes the
//!    exact gradient of the predicted logit with respect to every input
//!    embedding.
//! 3. [`saliency`] pools those gradients into one signed score per token.
//! 4. [`skipgram`] aggregates token scores into skipgram importance and builds
//!    a discretized bag-of-skipgram-importance feature table.
//! 5. [`rules`] induces a PART decision list over the table, and [`eval`]
//!    measures how faithfully that list reproduces the model's predictions.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod rnn;
pub mod rules;
pub mod saliency;
pub mod skipgram;

pub use corpus::{Corpus, Document, KeywordSets, Label, Split};
pub use error::{Error, Result};
pub use rnn::{LstmModel, Vocab};
pub use rules::{DecisionList, InductionParams, Rule};
pub use saliency::{Pooling, SaliencyMap};
pub use skipgram::{FeatureTable, Level, SkipgramVocab, Thresholds};
