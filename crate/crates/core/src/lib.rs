//! Corpus preprocessing and training-planning toolkit.
//!
//! The crate is organised around the stages of a pretraining data workflow:
//!
//! - [`config_graph`]: declarative YAML documents resolved into validated
//!   object graphs through a component registry.
//! - [`corpus_index`]: single-pass indexation of raw JSONL corpora.
//! - [`tokenizers`]: byte, whitespace-vocabulary and BPE encoders.
//! - [`pipeline`]: reader / worker pool / ordered writer tokenization.
//! - [`packed`]: the memory-mapped packed token format, seeded shuffling,
//!   chunking and fixed-length sampling.
//! - [`planner`]: α–β cost model for FSDP collectives and unit sizing.
//! - [`components`]: the built-in registry that wires the stages above into
//!   config-driven pipelines.

pub mod components;
pub mod config_graph;
pub mod corpus_index;
pub mod packed;
pub mod pipeline;
pub mod planner;
pub mod tokenizers;
