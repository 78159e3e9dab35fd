//! Scoring, budgeted selection and comparative analysis for parallel-corpus
//! data selection.
//!
//! The pipeline is: [`corpus`] ingestion and cleaning, per-pair scoring
//! ([`lexical`], [`geometry`], [`lm`], [`metrics`], [`external`]), budgeted
//! [`selection`], and [`analysis`] of what each method picked.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod external;
pub mod geometry;
pub mod lexical;
pub mod lm;
pub mod metrics;
pub mod scores;
pub mod selection;

pub use corpus::{CorpusStats, ParallelCorpus, SentencePair, Side};
pub use error::{Error, Result};
pub use scores::{Direction, ScoreColumn, ScoreTable};
pub use selection::SelectionResult;
