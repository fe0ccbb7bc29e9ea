//! Graph and batched-graph data model, plus the per-sample segment
//! reductions that make variable-size graph minibatches computable
//! without padding.
//!
//! A minibatch of graphs is flattened into a single graph with multiple
//! disconnected components; every node carries the index of the sample it
//! came from, and reductions (sum, softmax) run per segment of that index.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{Scalar, Tensor};

/// Whether a node is an element of the input token sequence or a node a
/// builder added on top of it (identifier, AST, sentence, entity).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    SequenceToken,
    Supplementary,
}

/// A directed multigraph with typed edge lists and per-node labels.
///
/// Sequence-token nodes occupy a contiguous prefix of the node indices, in
/// input order; supplementary nodes follow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub node_count: usize,
    /// One edge list per edge type; each entry is (source, target).
    pub edge_lists: Vec<Vec<(usize, usize)>>,
    pub node_labels: Vec<String>,
    pub node_kinds: Vec<NodeKind>,
}

impl Graph {
    /// A graph with `node_count` nodes, no edges, and `edge_types` empty
    /// edge lists. Labels default to empty strings, kinds to sequence tokens.
    pub fn empty(node_count: usize, edge_types: usize) -> Self {
        Graph {
            node_count,
            edge_lists: vec![Vec::new(); edge_types],
            node_labels: vec![String::new(); node_count],
            node_kinds: vec![NodeKind::SequenceToken; node_count],
        }
    }

    pub fn edge_type_count(&self) -> usize {
        self.edge_lists.len()
    }

    pub fn total_edge_count(&self) -> usize {
        self.edge_lists.iter().map(Vec::len).sum()
    }

    /// Length of the sequence-token prefix.
    pub fn sequence_len(&self) -> usize {
        self.node_kinds
            .iter()
            .take_while(|k| **k == NodeKind::SequenceToken)
            .count()
    }
}

/// One invariant violation found by [`validate_graph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphViolation {
    EndpointOutOfRange {
        edge_type: usize,
        source: usize,
        target: usize,
        node_count: usize,
    },
    EdgeTypeArity {
        declared: usize,
        actual: usize,
    },
    /// A sequence-token node appears after the first supplementary node.
    NonContiguousSequencePrefix {
        node: usize,
    },
    LabelArity {
        labels: usize,
        kinds: usize,
        node_count: usize,
    },
}

impl std::fmt::Display for GraphViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphViolation::EndpointOutOfRange {
                edge_type,
                source,
                target,
                node_count,
            } => write!(
                f,
                "endpoint out of range: edge ({source}, {target}) of type {edge_type} in graph of {node_count} nodes"
            ),
            GraphViolation::EdgeTypeArity { declared, actual } => {
                write!(f, "edge-type arity: declared {declared}, found {actual}")
            }
            GraphViolation::NonContiguousSequencePrefix { node } => {
                write!(f, "sequence-token node {node} after a supplementary node")
            }
            GraphViolation::LabelArity {
                labels,
                kinds,
                node_count,
            } => write!(
                f,
                "per-node arrays out of step: {labels} labels, {kinds} kinds, {node_count} nodes"
            ),
        }
    }
}

/// Report-style validation result: empty means the graph is well formed.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<GraphViolation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every structural invariant of `g` and reports all violations
/// rather than stopping at the first.
pub fn validate_graph(g: &Graph, declared_edge_types: usize) -> ValidationReport {
    let mut violations = Vec::new();
    if g.edge_lists.len() != declared_edge_types {
        violations.push(GraphViolation::EdgeTypeArity {
            declared: declared_edge_types,
            actual: g.edge_lists.len(),
        });
    }
    if g.node_labels.len() != g.node_count || g.node_kinds.len() != g.node_count {
        violations.push(GraphViolation::LabelArity {
            labels: g.node_labels.len(),
            kinds: g.node_kinds.len(),
            node_count: g.node_count,
        });
    }
    for (edge_type, edges) in g.edge_lists.iter().enumerate() {
        for &(source, target) in edges {
            if source >= g.node_count || target >= g.node_count {
                violations.push(GraphViolation::EndpointOutOfRange {
                    edge_type,
                    source,
                    target,
                    node_count: g.node_count,
                });
            }
        }
    }
    let mut seen_supplementary = false;
    for (node, kind) in g.node_kinds.iter().enumerate() {
        match kind {
            NodeKind::Supplementary => seen_supplementary = true,
            NodeKind::SequenceToken if seen_supplementary => {
                violations.push(GraphViolation::NonContiguousSequencePrefix { node });
            }
            NodeKind::SequenceToken => {}
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("empty minibatch")]
    EmptyBatch,
    #[error("mismatched edge-type counts in minibatch: expected {expected}, sample {sample} has {actual}")]
    EdgeTypeMismatch {
        expected: usize,
        actual: usize,
        sample: usize,
    },
    #[error("segment id {id} out of range for {segment_count} segments")]
    SegmentIdOutOfRange { id: usize, segment_count: usize },
    #[error("values length {values} does not match segment_ids length {ids}")]
    SegmentLengthMismatch { values: usize, ids: usize },
}

/// A minibatch of graphs flattened into one graph of disconnected
/// components. `sample_index[v]` tells which sample node `v` came from;
/// `node_offsets[i]` is the first node index of sample `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchedGraph {
    pub flattened: Graph,
    pub sample_index: Vec<usize>,
    pub node_offsets: Vec<usize>,
    pub sample_count: usize,
}

impl BatchedGraph {
    /// Node index range of sample `i` inside the flattened graph.
    pub fn node_range(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.node_offsets[i];
        let end = if i + 1 < self.sample_count {
            self.node_offsets[i + 1]
        } else {
            self.flattened.node_count
        };
        start..end
    }
}

/// Flattens a minibatch into a single disconnected graph, shifting the
/// node indices of sample `i` by `node_offsets[i]`.
pub fn flatten_batch(graphs: &[Graph]) -> Result<BatchedGraph, GraphError> {
    if graphs.is_empty() {
        return Err(GraphError::EmptyBatch);
    }
    let edge_types = graphs[0].edge_type_count();
    for (sample, g) in graphs.iter().enumerate() {
        if g.edge_type_count() != edge_types {
            return Err(GraphError::EdgeTypeMismatch {
                expected: edge_types,
                actual: g.edge_type_count(),
                sample,
            });
        }
    }

    let total_nodes: usize = graphs.iter().map(|g| g.node_count).sum();
    let mut flattened = Graph {
        node_count: total_nodes,
        edge_lists: vec![Vec::new(); edge_types],
        node_labels: Vec::with_capacity(total_nodes),
        node_kinds: Vec::with_capacity(total_nodes),
    };
    let mut sample_index = Vec::with_capacity(total_nodes);
    let mut node_offsets = Vec::with_capacity(graphs.len());

    let mut offset = 0;
    for (sample, g) in graphs.iter().enumerate() {
        node_offsets.push(offset);
        flattened.node_labels.extend_from_slice(&g.node_labels);
        flattened.node_kinds.extend_from_slice(&g.node_kinds);
        sample_index.extend(std::iter::repeat(sample).take(g.node_count));
        for (k, edges) in g.edge_lists.iter().enumerate() {
            flattened.edge_lists[k]
                .extend(edges.iter().map(|&(u, v)| (u + offset, v + offset)));
        }
        offset += g.node_count;
    }

    Ok(BatchedGraph {
        flattened,
        sample_index,
        node_offsets,
        sample_count: graphs.len(),
    })
}

/// Inverse of [`flatten_batch`]: recovers the original per-sample graphs.
pub fn unflatten_batch(batch: &BatchedGraph) -> Vec<Graph> {
    let edge_types = batch.flattened.edge_type_count();
    let mut graphs: Vec<Graph> = (0..batch.sample_count)
        .map(|i| {
            let range = batch.node_range(i);
            Graph {
                node_count: range.len(),
                edge_lists: vec![Vec::new(); edge_types],
                node_labels: batch.flattened.node_labels[range.clone()].to_vec(),
                node_kinds: batch.flattened.node_kinds[range].to_vec(),
            }
        })
        .collect();
    for (k, edges) in batch.flattened.edge_lists.iter().enumerate() {
        for &(u, v) in edges {
            let sample = batch.sample_index[u];
            let offset = batch.node_offsets[sample];
            graphs[sample].edge_lists[k].push((u - offset, v - offset));
        }
    }
    graphs
}

/// Sums rows of `values` into `segment_count` buckets keyed by
/// `segment_ids`. Segments with no members come back as zero rows.
pub fn segment_sum<F: Scalar>(
    values: &Tensor<F>,
    segment_ids: &[usize],
    segment_count: usize,
) -> Result<Tensor<F>, GraphError> {
    if values.rows() != segment_ids.len() {
        return Err(GraphError::SegmentLengthMismatch {
            values: values.rows(),
            ids: segment_ids.len(),
        });
    }
    let mut out = Tensor::zeros(segment_count, values.cols());
    for (i, &id) in segment_ids.iter().enumerate() {
        if id >= segment_count {
            return Err(GraphError::SegmentIdOutOfRange {
                id,
                segment_count,
            });
        }
        let src = values.row(i);
        let dst = out.row_mut(id);
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = *d + s;
        }
    }
    Ok(out)
}

/// Numerically stable softmax applied independently within each segment:
/// per segment, outputs are `exp(logit - segment_max)` normalized to sum 1.
pub fn segment_softmax<F: Scalar>(
    logits: &[F],
    segment_ids: &[usize],
    segment_count: usize,
) -> Result<Vec<F>, GraphError> {
    if logits.len() != segment_ids.len() {
        return Err(GraphError::SegmentLengthMismatch {
            values: logits.len(),
            ids: segment_ids.len(),
        });
    }
    let mut max = vec![F::neg_infinity(); segment_count];
    for (&x, &id) in logits.iter().zip(segment_ids) {
        if id >= segment_count {
            return Err(GraphError::SegmentIdOutOfRange {
                id,
                segment_count,
            });
        }
        if x > max[id] {
            max[id] = x;
        }
    }
    let mut out: Vec<F> = Vec::with_capacity(logits.len());
    let mut sums = vec![F::zero(); segment_count];
    for (&x, &id) in logits.iter().zip(segment_ids) {
        let e = (x - max[id]).exp();
        sums[id] = sums[id] + e;
        out.push(e);
    }
    for (y, &id) in out.iter_mut().zip(segment_ids) {
        *y = *y / sums[id];
    }
    Ok(out)
}
