//! Toolkit for building, detecting and profiling LLM-generated disinformation
//! datasets.
//!
//! The crate is organised as a pipeline:
//!
//! - [`corpus`]: human-written news ingestion, JSONL persistence with manifests,
//!   sampling and word-level truncation.
//! - [`prompts`]: the generation and detection prompt templates.
//! - [`gateway`]: OpenAI-compatible chat/embedding client with a replay backend,
//!   retries, concurrency and rate limiting.
//! - [`parsing`]: typed extraction of verdicts, confidence scores and
//!   chain-of-thought generation outputs.
//! - [`sidecar`]: client for the sequence-classifier HTTP service.
//! - [`pipelines`]: dataset generation, batch detection and ablation grids.
//! - [`evaluation`]: misclassification accounting and report rendering.
//! - [`textstats`]: lexicon-based category profiling.
//! - [`embed_viz`]: exact t-SNE and projection overlap.
//! - [`cli`]: the subcommands behind the `disinfo` binary.
//!
//! Everything that talks to a model can run against recorded fixtures, so whole
//! experiments replay offline and bit-for-bit.

pub mod cli;
pub mod corpus;
pub mod digest;
pub mod embed_viz;
pub mod evaluation;
pub mod gateway;
pub mod parsing;
pub mod pipelines;
pub mod prompts;
pub mod sidecar;
pub mod textstats;
pub mod tokenize;
