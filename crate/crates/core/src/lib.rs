//! Neural-symbolic textual entailment: a hypothesis is decomposed into
//! sub-facts, each scored by a neural entailment network, a symbolic
//! matcher against the premise and a lookup in a knowledge base of
//! triples; a learned aggregator (or a probabilistic-OR ensemble) turns
//! the per-fact signals into one decision.

pub mod aggregator;
pub mod autodiff;
pub mod cache;
pub mod config;
pub mod data;
pub mod decompose;
pub mod embedding;
pub mod ensemble;
pub mod entail;
pub mod error;
pub mod eval;
pub mod explain;
pub mod kb;
pub mod matcher;
pub mod pipeline;
pub mod synthetic;
pub mod text;
pub mod train;

pub use error::{Error, Result};
