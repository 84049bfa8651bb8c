//! Query-driven extraction of structured data from HTML pages.
//!
//! The pipeline parses a page, strips noise and redundant markup, splits the
//! DOM into token-budgeted blocks of atomic mini-chunks, asks a pruner model
//! which mini-chunks matter for the query, merges the survivors into a small
//! distilled page, and has an extractor model fill a flat JSON schema (or
//! answer a question). Schema values are then grounded back to the source
//! DOM: each value is replaced by the best-matching source text and tagged
//! with that node's absolute XPath.
//!
//! Modules, bottom-up:
//!
//! - [`dom`]: parsing, XPaths, serialization, visible text
//! - [`preprocess`]: noise stripping and lossless cleaning
//! - [`chunker`]: block chunks and atomic mini-chunks
//! - [`model`]: prompt templates, output parsers, model clients
//! - [`pruner`]: per-chunk pruning and re-merging
//! - [`extractor`]: schema filling and question answering
//! - [`gxr`]: grounded XPath resolution
//! - [`pipeline`]: configuration and stage composition
//! - [`evalkit`]: metrics, datasets and evaluation runs

pub mod chunker;
pub mod dom;
pub mod error;
pub mod evalkit;
pub mod extractor;
pub mod gxr;
pub mod model;
mod par;
pub mod pipeline;
pub mod preprocess;
pub mod pruner;
pub mod tokenizer;

pub use dom::{parse_html, DomNode, DomTree, NodeId, XPath};
pub use error::{AxeError, ClientError, Result};
pub use tokenizer::{Tokenizer, WordTokenizer};
