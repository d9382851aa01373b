//! Sequential machine-translation experiments.
//!
//! A text is pushed through a chain of translation hops; after every
//! return to the reference language its GLEU against the original is
//! recorded. The resulting accuracy curve is fitted with the power law
//! `(t + 1)^-alpha`.
//!
//! - [`gleu`]: tokenization, n-gram bags, GLEU
//! - [`catalog`]: languages, family-tree distance, chain plans
//! - [`translate`]: live, cached and simulated backends
//! - [`chain`]: executing and resuming runs on disk
//! - [`analysis`]: curves, fits, step-by-step pair matrices
//! - [`corpus`]: the bundled source texts

pub mod analysis;
pub mod catalog;
pub mod chain;
pub mod corpus;
pub mod gleu;
pub mod translate;

pub use catalog::{Catalog, ChainBuilder, ChainMode, ChainSpec, Topology};
pub use chain::{ChainRun, HopRecord, RunManifest, RunStatus, SourceText};
pub use gleu::{gleu, tokenize, GleuScore, TokenSequence};
