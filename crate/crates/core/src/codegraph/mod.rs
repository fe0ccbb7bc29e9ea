//! Program graphs for source code: the subtoken sequence plus identifier,
//! syntax-tree, and lexical-use structure.

pub mod minilang;
pub mod subtoken;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, NodeKind};
pub use subtoken::split_subtokens;

/// The stand-in inserted where a method's own name appeared.
pub const NAME_PLACEHOLDER: &str = "%NAME%";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeToken {
    pub text: String,
    pub is_identifier: bool,
}

impl CodeToken {
    pub fn identifier(text: impl Into<String>) -> Self {
        CodeToken {
            text: text.into(),
            is_identifier: true,
        }
    }

    pub fn plain(text: impl Into<String>) -> Self {
        CodeToken {
            text: text.into(),
            is_identifier: false,
        }
    }
}

/// A node of the parse tree; leaves reference token indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<AstNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<usize>,
}

impl AstNode {
    pub fn interior(label: impl Into<String>, children: Vec<AstNode>) -> Self {
        AstNode {
            label: label.into(),
            children,
            token: None,
        }
    }

    pub fn leaf(label: impl Into<String>, token: usize) -> Self {
        AstNode {
            label: label.into(),
            children: Vec::new(),
            token: Some(token),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(AstNode::node_count).sum::<usize>()
    }
}

/// What the model should produce for this method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeTarget {
    NameSubtokens(Vec<String>),
    DocTokens(Vec<String>),
}

impl CodeTarget {
    pub fn tokens(&self) -> &[String] {
        match self {
            CodeTarget::NameSubtokens(t) | CodeTarget::DocTokens(t) => t,
        }
    }
}

/// A tokenized method with its parse tree and prediction target. The
/// method-name token must already be replaced by [`NAME_PLACEHOLDER`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeMethod {
    pub tokens: Vec<CodeToken>,
    pub ast: AstNode,
    pub target: CodeTarget,
}

/// Which edge families to build. The subtoken sequence-order family is
/// always present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeGraphConfig {
    pub in_token: bool,
    pub next_token: bool,
    pub child: bool,
    pub last_lexical_use: bool,
}

impl Default for CodeGraphConfig {
    fn default() -> Self {
        CodeGraphConfig {
            in_token: true,
            next_token: true,
            child: true,
            last_lexical_use: true,
        }
    }
}

impl CodeGraphConfig {
    pub fn sequence_only() -> Self {
        CodeGraphConfig {
            in_token: false,
            next_token: false,
            child: false,
            last_lexical_use: false,
        }
    }

    /// Edge family names in edge-list order.
    pub fn family_names(&self) -> Vec<&'static str> {
        let mut names = vec!["sequence"];
        if self.in_token {
            names.push("in_token");
        }
        if self.next_token {
            names.push("next_token");
        }
        if self.child {
            names.push("child");
        }
        if self.last_lexical_use {
            names.push("last_lexical_use");
        }
        names
    }

    pub fn edge_type_count(&self) -> usize {
        self.family_names().len()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeGraphError {
    #[error("AST leaf references token {token} but the method has {token_count} tokens")]
    LeafTokenOutOfRange { token: usize, token_count: usize },
}

/// Most-recent-use links: for each identifier occurrence, an edge back to
/// the previous occurrence of the same text, found by one left-to-right
/// scan over occurrences in token-stream order.
pub fn last_lexical_use_edges(occurrences: &[(usize, &str)]) -> Vec<(usize, usize)> {
    let mut latest: std::collections::HashMap<&str, usize> = Default::default();
    let mut edges = Vec::new();
    for &(node, text) in occurrences {
        if let Some(&prev) = latest.get(text) {
            edges.push((node, prev));
        }
        latest.insert(text, node);
    }
    edges
}

/// Builds the program graph for a method.
///
/// Node layout: the subtoken stream first (identifiers expanded through
/// [`split_subtokens`], other tokens kept verbatim), then one supplementary
/// node per identifier occurrence, then one per AST node in preorder.
pub fn build_code_graph(m: &CodeMethod, cfg: &CodeGraphConfig) -> Result<Graph, CodeGraphError> {
    // Validate AST leaf references up front.
    fn check_leaves(node: &AstNode, token_count: usize) -> Result<(), CodeGraphError> {
        if let Some(t) = node.token {
            if t >= token_count {
                return Err(CodeGraphError::LeafTokenOutOfRange {
                    token: t,
                    token_count,
                });
            }
        }
        node.children
            .iter()
            .try_for_each(|c| check_leaves(c, token_count))
    }
    check_leaves(&m.ast, m.tokens.len())?;

    let mut labels: Vec<String> = Vec::new();
    let mut kinds: Vec<NodeKind> = Vec::new();

    // Sequence prefix: one node per subtoken.
    let mut token_subtoken_range: Vec<std::ops::Range<usize>> = Vec::with_capacity(m.tokens.len());
    for tok in &m.tokens {
        let start = labels.len();
        if tok.is_identifier {
            for sub in split_subtokens(&tok.text) {
                labels.push(sub);
                kinds.push(NodeKind::SequenceToken);
            }
        } else {
            labels.push(tok.text.clone());
            kinds.push(NodeKind::SequenceToken);
        }
        token_subtoken_range.push(start..labels.len());
    }
    let sequence_len = labels.len();

    // One supplementary node per identifier occurrence.
    let mut identifier_node: Vec<Option<usize>> = vec![None; m.tokens.len()];
    let mut occurrences: Vec<(usize, &str)> = Vec::new();
    for (t, tok) in m.tokens.iter().enumerate() {
        if tok.is_identifier {
            let node = labels.len();
            labels.push(tok.text.clone());
            kinds.push(NodeKind::Supplementary);
            identifier_node[t] = Some(node);
            occurrences.push((node, tok.text.as_str()));
        }
    }

    // One supplementary node per AST node, preorder.
    struct AstFlat<'a> {
        node: usize,
        ast: &'a AstNode,
    }
    let mut ast_nodes: Vec<AstFlat> = Vec::new();
    let mut ast_child_edges: Vec<(usize, usize)> = Vec::new();
    fn walk<'a>(
        ast: &'a AstNode,
        labels: &mut Vec<String>,
        kinds: &mut Vec<NodeKind>,
        ast_nodes: &mut Vec<AstFlat<'a>>,
        edges: &mut Vec<(usize, usize)>,
    ) -> usize {
        let node = labels.len();
        labels.push(ast.label.clone());
        kinds.push(NodeKind::Supplementary);
        ast_nodes.push(AstFlat { node, ast });
        for child in &ast.children {
            let child_node = walk(child, labels, kinds, ast_nodes, edges);
            edges.push((node, child_node));
        }
        node
    }
    walk(
        &m.ast,
        &mut labels,
        &mut kinds,
        &mut ast_nodes,
        &mut ast_child_edges,
    );

    // Edge families in canonical order.
    let mut edge_lists: Vec<Vec<(usize, usize)>> = Vec::new();

    let mut sequence_edges = Vec::with_capacity(sequence_len.saturating_sub(1));
    for i in 1..sequence_len {
        sequence_edges.push((i - 1, i));
    }
    edge_lists.push(sequence_edges);

    if cfg.in_token {
        let mut edges = Vec::new();
        for (t, tok) in m.tokens.iter().enumerate() {
            if tok.is_identifier {
                let ident = identifier_node[t].expect("identifier node exists");
                for s in token_subtoken_range[t].clone() {
                    edges.push((s, ident));
                }
            }
        }
        edge_lists.push(edges);
    }

    if cfg.next_token {
        let edges = occurrences
            .windows(2)
            .map(|w| (w[0].0, w[1].0))
            .collect();
        edge_lists.push(edges);
    }

    if cfg.child {
        let mut edges = ast_child_edges;
        // Attach each AST leaf to the graph node of its token: the
        // identifier node when there is one, the token node otherwise.
        for flat in &ast_nodes {
            if let Some(t) = flat.ast.token {
                let target = identifier_node[t].unwrap_or(token_subtoken_range[t].start);
                edges.push((flat.node, target));
            }
        }
        edge_lists.push(edges);
    }

    if cfg.last_lexical_use {
        edge_lists.push(last_lexical_use_edges(&occurrences));
    }

    Ok(Graph {
        node_count: labels.len(),
        edge_lists,
        node_labels: labels,
        node_kinds: kinds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate_graph;

    fn xx_method() -> CodeMethod {
        // x = x with a root over three leaves, one per token.
        CodeMethod {
            tokens: vec![
                CodeToken::identifier("x"),
                CodeToken::plain("="),
                CodeToken::identifier("x"),
            ],
            ast: AstNode::interior(
                "Assign",
                vec![
                    AstNode::leaf("Ident", 0),
                    AstNode::leaf("Op", 1),
                    AstNode::leaf("Ident", 2),
                ],
            ),
            target: CodeTarget::NameSubtokens(vec!["x".into()]),
        }
    }

    #[test]
    fn builds_the_hand_constructed_assignment_graph() {
        let g = build_code_graph(&xx_method(), &CodeGraphConfig::default()).unwrap();
        // 3 subtoken nodes + 2 identifier nodes + 4 AST nodes.
        assert_eq!(g.node_count, 9);
        assert_eq!(g.sequence_len(), 3);
        assert_eq!(g.edge_type_count(), 5);
        assert!(validate_graph(&g, 5).is_ok());

        let [sequence, in_token, next_token, child, last_use] = &g.edge_lists[..] else {
            panic!("expected five families")
        };
        assert_eq!(sequence, &vec![(0, 1), (1, 2)]);
        // Subtoken -> identifier-occurrence node.
        assert_eq!(in_token, &vec![(0, 3), (2, 4)]);
        assert_eq!(next_token, &vec![(3, 4)]);
        // Root 5 -> leaves 6,7,8; leaves attach to identifier nodes for
        // identifiers and to the token node for "=".
        assert_eq!(
            child,
            &vec![(5, 6), (5, 7), (5, 8), (6, 3), (7, 1), (8, 4)]
        );
        // Exactly one edge: second occurrence of x back to the first.
        assert_eq!(last_use, &vec![(4, 3)]);

        assert_eq!(g.node_labels[3], "x");
        assert_eq!(g.node_labels[5], "Assign");
    }

    #[test]
    fn no_repeats_means_no_last_use_edges() {
        let m = CodeMethod {
            tokens: vec![CodeToken::identifier("a"), CodeToken::identifier("b")],
            ast: AstNode::interior(
                "Pair",
                vec![AstNode::leaf("Ident", 0), AstNode::leaf("Ident", 1)],
            ),
            target: CodeTarget::NameSubtokens(vec!["a".into()]),
        };
        let g = build_code_graph(&m, &CodeGraphConfig::default()).unwrap();
        assert!(g.edge_lists[4].is_empty());
    }

    #[test]
    fn sequence_only_config_gives_plain_chain() {
        let m = xx_method();
        let g = build_code_graph(&m, &CodeGraphConfig::sequence_only()).unwrap();
        assert_eq!(g.edge_type_count(), 1);
        assert_eq!(g.edge_lists[0], vec![(0, 1), (1, 2)]);
        // Identifier and AST nodes are still materialized as nodes; only
        // their edge families are dropped.
        assert_eq!(g.sequence_len(), 3);
    }

    #[test]
    fn identifiers_expand_to_subtokens() {
        let m = CodeMethod {
            tokens: vec![
                CodeToken::identifier("fooBar"),
                CodeToken::plain("("),
                CodeToken::plain(")"),
            ],
            ast: AstNode::interior("Call", vec![AstNode::leaf("Ident", 0)]),
            target: CodeTarget::NameSubtokens(vec!["foo".into()]),
        };
        let g = build_code_graph(&m, &CodeGraphConfig::default()).unwrap();
        assert_eq!(g.node_labels[..4], ["foo", "bar", "(", ")"]);
        assert_eq!(g.sequence_len(), 4);
        // Both subtokens point at the single identifier node.
        assert_eq!(g.edge_lists[1], vec![(0, 4), (1, 4)]);
    }

    #[test]
    fn rejects_out_of_range_leaf() {
        let m = CodeMethod {
            tokens: vec![CodeToken::identifier("a")],
            ast: AstNode::leaf("Ident", 5),
            target: CodeTarget::NameSubtokens(vec![]),
        };
        assert_eq!(
            build_code_graph(&m, &CodeGraphConfig::default()),
            Err(CodeGraphError::LeafTokenOutOfRange {
                token: 5,
                token_count: 1
            })
        );
    }

    #[test]
    fn last_lexical_use_scan_cases() {
        assert_eq!(
            last_lexical_use_edges(&[(0, "a"), (1, "b"), (2, "a")]),
            vec![(2, 0)]
        );
        // Chains go to the most recent use, not the first.
        assert_eq!(
            last_lexical_use_edges(&[(0, "x"), (1, "y"), (2, "x"), (3, "x")]),
            vec![(2, 0), (3, 2)]
        );
        assert_eq!(
            last_lexical_use_edges(&[(0, "p"), (1, "q"), (2, "r")]),
            vec![]
        );
    }

    #[test]
    fn in_token_edges_are_unique_per_subtoken() {
        let m = CodeMethod {
            tokens: vec![
                CodeToken::identifier("getMaxValue"),
                CodeToken::identifier("maxValue"),
            ],
            ast: AstNode::interior(
                "Pair",
                vec![AstNode::leaf("Ident", 0), AstNode::leaf("Ident", 1)],
            ),
            target: CodeTarget::NameSubtokens(vec![]),
        };
        let g = build_code_graph(&m, &CodeGraphConfig::default()).unwrap();
        let in_token = &g.edge_lists[1];
        let mut seen = std::collections::HashSet::new();
        for &(src, _) in in_token {
            assert!(seen.insert(src), "subtoken {src} has two InToken edges");
        }
        assert_eq!(in_token.len(), g.sequence_len());
    }
}
