//! Indexing, retrieval pipelines and evaluation harness built on
//! [`metarag_core`], with file formats, LLM providers and the command line.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod enrichment;
pub mod error;
pub mod eval;
pub mod gateway;
pub mod pipeline;
pub mod prompts;
pub mod store;

pub use error::{Error, Result};
