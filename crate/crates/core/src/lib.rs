//! Hybrid sequence-graph summarization toolkit.
//!
//! The pipeline: task-specific graph builders turn tokenized inputs (source
//! code with ASTs, annotated documents) into relationship graphs; a sequence
//! encoder seeds a gated graph neural network over those graphs; an LSTM
//! decoder with attention and a pointer-style copy mechanism generates the
//! summary; metrics and a gradient-checking harness verify everything at
//! desk scale.

pub mod codegraph;
pub mod graph;
pub mod metrics;
pub mod vocab;
pub mod neural;
pub mod tensor;

pub use graph::{BatchedGraph, Graph, NodeKind};
pub use tensor::{Scalar, Tensor};
