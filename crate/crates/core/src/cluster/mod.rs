//! Classification trees from distance matrices.
//!
//! Both builders are deterministic: ties go to the smallest `(i, j)` slot
//! pair, and a merged cluster keeps slot `min(i, j)`, so a slot always holds
//! its smallest leaf index. Children are ordered by smallest contained leaf
//! index, which fixes the export bytes.

mod newick;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::matrix::DistanceMatrix;

pub use newick::parse_newick;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("{method} needs at least {min} leaves, got {n}")]
    TooFewLeaves { method: &'static str, n: usize, min: usize },
    #[error("unknown leaf label `{0}`")]
    UnknownLabel(String),
    #[error("newick offset {offset}: {message}")]
    Newick { offset: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Length of the edge to the parent; 0 at the root.
    pub branch_length: f64,
    /// Set on leaves only.
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DendroTree {
    nodes: Vec<TreeNode>,
    root: usize,
    rooted: bool,
    /// Node id of leaf `i`.
    leaves: Vec<usize>,
    leaf_labels: Vec<String>,
    clamped_branches: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeMethod {
    NeighborJoining,
    Upgma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeFormat {
    Newick,
    Dot,
}

struct Builder {
    nodes: Vec<TreeNode>,
    clamped: usize,
}

impl Builder {
    fn with_leaves(labels: &[String]) -> Self {
        let nodes = labels
            .iter()
            .map(|l| TreeNode {
                parent: None,
                children: Vec::new(),
                branch_length: 0.0,
                label: Some(l.clone()),
            })
            .collect();
        Self { nodes, clamped: 0 }
    }

    fn set_length(&mut self, node: usize, length: f64) {
        if length < 0.0 {
            self.clamped += 1;
        }
        self.nodes[node].branch_length = length.max(0.0);
    }

    fn join(&mut self, children: &[(usize, f64)]) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            parent: None,
            children: children.iter().map(|&(c, _)| c).collect(),
            branch_length: 0.0,
            label: None,
        });
        for &(c, len) in children {
            self.nodes[c].parent = Some(id);
            self.set_length(c, len);
        }
        id
    }

    fn finish(self, root: usize, rooted: bool, leaf_labels: Vec<String>) -> DendroTree {
        let leaves = (0..leaf_labels.len()).collect();
        DendroTree::assemble(self.nodes, root, rooted, leaves, leaf_labels, self.clamped)
    }
}

fn working_copy(m: &DistanceMatrix) -> Vec<Vec<f64>> {
    let n = m.n();
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { m.get(i, j) }).collect())
        .collect()
}

/// Neighbor joining; the result is unrooted, with the last three clusters
/// joined at a central node.
pub fn neighbor_joining(m: &DistanceMatrix) -> Result<DendroTree, ClusterError> {
    let n = m.n();
    if n < 3 {
        return Err(ClusterError::TooFewLeaves {
            method: "neighbor joining",
            n,
            min: 3,
        });
    }
    let mut d = working_copy(m);
    let mut b = Builder::with_leaves(m.labels());
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut active: Vec<usize> = (0..n).collect();

    while active.len() > 3 {
        let r = active.len();
        let sums: Vec<f64> = (0..n)
            .map(|i| active.iter().filter(|&&k| k != i).map(|&k| d[i][k]).sum())
            .collect();
        let mut best = (f64::INFINITY, 0, 0);
        for (a, &i) in active.iter().enumerate() {
            for &j in &active[a + 1..] {
                let q = (r - 2) as f64 * d[i][j] - sums[i] - sums[j];
                if q < best.0 {
                    best = (q, i, j);
                }
            }
        }
        let (_, i, j) = best;
        let dij = d[i][j];
        let li = 0.5 * dij + (sums[i] - sums[j]) / (2.0 * (r - 2) as f64);
        let u = b.join(&[(node_of[i], li), (node_of[j], dij - li)]);
        for &k in &active {
            if k != i && k != j {
                let duk = 0.5 * (d[i][k] + d[j][k] - dij);
                d[i][k] = duk;
                d[k][i] = duk;
            }
        }
        node_of[i] = u;
        active.retain(|&k| k != j);
    }

    let (x, y, z) = (active[0], active[1], active[2]);
    let (dxy, dxz, dyz) = (d[x][y], d[x][z], d[y][z]);
    let root = b.join(&[
        (node_of[x], 0.5 * (dxy + dxz - dyz)),
        (node_of[y], 0.5 * (dxy + dyz - dxz)),
        (node_of[z], 0.5 * (dxz + dyz - dxy)),
    ]);
    Ok(b.finish(root, false, m.labels().to_vec()))
}

/// Average-linkage clustering; rooted and ultrametric, each merge at height
/// `d / 2`.
pub fn upgma(m: &DistanceMatrix) -> Result<DendroTree, ClusterError> {
    let n = m.n();
    if n < 2 {
        return Err(ClusterError::TooFewLeaves {
            method: "UPGMA",
            n,
            min: 2,
        });
    }
    let mut d = working_copy(m);
    let mut b = Builder::with_leaves(m.labels());
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut height = vec![0.0f64; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut root = 0;

    while active.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for (a, &i) in active.iter().enumerate() {
            for &j in &active[a + 1..] {
                if d[i][j] < best.0 {
                    best = (d[i][j], i, j);
                }
            }
        }
        let (dij, i, j) = best;
        let h = dij / 2.0;
        root = b.join(&[(node_of[i], h - height[i]), (node_of[j], h - height[j])]);
        let (si, sj) = (size[i] as f64, size[j] as f64);
        for &k in &active {
            if k != i && k != j {
                let duk = (si * d[i][k] + sj * d[j][k]) / (si + sj);
                d[i][k] = duk;
                d[k][i] = duk;
            }
        }
        node_of[i] = root;
        size[i] += size[j];
        height[i] = h;
        active.retain(|&k| k != j);
    }
    Ok(b.finish(root, true, m.labels().to_vec()))
}

pub fn build_tree(m: &DistanceMatrix, method: TreeMethod) -> Result<DendroTree, ClusterError> {
    match method {
        TreeMethod::NeighborJoining => neighbor_joining(m),
        TreeMethod::Upgma => upgma(m),
    }
}

fn format_length(x: f64) -> String {
    let s = format!("{:.6}", x);
    let s = s.trim_end_matches('0');
    let s = if s.ends_with('.') { format!("{s}0") } else { s.to_string() };
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl DendroTree {
    pub(crate) fn assemble(
        mut nodes: Vec<TreeNode>,
        root: usize,
        rooted: bool,
        leaves: Vec<usize>,
        leaf_labels: Vec<String>,
        clamped_branches: usize,
    ) -> Self {
        let mut min_leaf = vec![usize::MAX; nodes.len()];
        for (i, &node) in leaves.iter().enumerate() {
            min_leaf[node] = i;
        }
        let order = postorder(&nodes, root);
        for &v in &order {
            let m = nodes[v].children.iter().map(|&c| min_leaf[c]).min();
            if let Some(m) = m {
                min_leaf[v] = min_leaf[v].min(m);
            }
        }
        for node in &mut nodes {
            node.children.sort_by_key(|&c| min_leaf[c]);
        }
        Self {
            nodes,
            root,
            rooted,
            leaves,
            leaf_labels,
            clamped_branches,
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn rooted(&self) -> bool {
        self.rooted
    }

    pub fn leaf_labels(&self) -> &[String] {
        &self.leaf_labels
    }

    /// Negative branch estimates that were raised to 0.
    pub fn clamped_branches(&self) -> usize {
        self.clamped_branches
    }

    /// `below[v][i]`: leaf `i` lies in the subtree under node `v`.
    fn leaf_sets(&self) -> Vec<Vec<bool>> {
        let n = self.leaf_labels.len();
        let mut below = vec![vec![false; n]; self.nodes.len()];
        for (i, &node) in self.leaves.iter().enumerate() {
            below[node][i] = true;
        }
        for v in postorder(&self.nodes, self.root) {
            for k in 0..self.nodes[v].children.len() {
                let c = self.nodes[v].children[k];
                let child = below[c].clone();
                for (mine, theirs) in below[v].iter_mut().zip(child) {
                    *mine |= theirs;
                }
            }
        }
        below
    }

    /// The side of the bipartition that excludes the smallest label.
    fn normalized_side(&self, side: &[bool]) -> BTreeSet<String> {
        let anchor = (0..side.len()).min_by_key(|&i| &self.leaf_labels[i]);
        let flip = anchor.is_some_and(|a| side[a]);
        (0..side.len())
            .filter(|&i| side[i] != flip)
            .map(|i| self.leaf_labels[i].clone())
            .collect()
    }

    /// Every edge's bipartition, keyed by label set, with the summed length
    /// of the edges inducing it. Leaf edges are included.
    pub fn split_lengths(&self) -> BTreeMap<BTreeSet<String>, f64> {
        let below = self.leaf_sets();
        let mut out = BTreeMap::new();
        for (v, leaves) in below.iter().enumerate() {
            if v == self.root {
                continue;
            }
            let side = self.normalized_side(leaves);
            if side.is_empty() {
                continue;
            }
            *out.entry(side).or_insert(0.0) += self.nodes[v].branch_length;
        }
        out
    }

    /// Non-trivial bipartitions (both sides have ≥ 2 leaves).
    pub fn splits(&self) -> BTreeSet<BTreeSet<String>> {
        let n = self.leaf_labels.len();
        self.split_lengths()
            .into_keys()
            .filter(|s| s.len() >= 2 && s.len() + 2 <= n)
            .collect()
    }

    /// Whether `labels` forms a connected group. Unrooted trees: some edge
    /// separates exactly `labels` from the rest. Rooted trees: `labels` is a
    /// clade. The empty set is never a group.
    pub fn subtree_check<S: AsRef<str>>(&self, labels: &[S]) -> Result<bool, ClusterError> {
        let n = self.leaf_labels.len();
        let mut want = vec![false; n];
        for l in labels {
            let l = l.as_ref();
            let i = self
                .leaf_labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| ClusterError::UnknownLabel(l.to_string()))?;
            want[i] = true;
        }
        if !want.contains(&true) {
            return Ok(false);
        }
        let below = self.leaf_sets();
        let complement: Vec<bool> = want.iter().map(|b| !b).collect();
        Ok((0..self.nodes.len()).any(|v| {
            below[v] == want || (!self.rooted && v != self.root && below[v] == complement)
        }))
    }

    /// Newick with branch lengths. Rooted trees carry a leading `[&R]`.
    pub fn to_newick(&self) -> String {
        let mut s = String::new();
        if self.rooted {
            s.push_str("[&R] ");
        }
        self.write_newick(self.root, &mut s);
        s.push_str(";\n");
        s
    }

    fn write_newick(&self, v: usize, s: &mut String) {
        let node = &self.nodes[v];
        if node.children.is_empty() {
            s.push_str(&newick::quote_label(node.label.as_deref().unwrap_or("")));
        } else {
            s.push('(');
            for (k, &c) in node.children.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                self.write_newick(c, s);
            }
            s.push(')');
        }
        if v != self.root {
            s.push(':');
            s.push_str(&format_length(node.branch_length));
        }
    }

    /// Graphviz source. Unrooted trees are undirected graphs.
    pub fn to_dot(&self) -> String {
        let (kind, arrow) = if self.rooted { ("digraph", "->") } else { ("graph", "--") };
        let mut s = format!("{kind} tree {{\n  node [shape=point];\n");
        let order = preorder(&self.nodes, self.root);
        let mut name = vec![0; self.nodes.len()];
        for (k, &v) in order.iter().enumerate() {
            name[v] = k;
            if let Some(label) = &self.nodes[v].label {
                let _ = writeln!(s, "  n{k} [shape=plaintext, label=\"{}\"];", dot_escape(label));
            }
        }
        for &v in &order {
            if let Some(p) = self.nodes[v].parent {
                let _ = writeln!(
                    s,
                    "  n{} {arrow} n{} [label=\"{}\"];",
                    name[p],
                    name[v],
                    format_length(self.nodes[v].branch_length)
                );
            }
        }
        s.push_str("}\n");
        s
    }

    pub fn export(&self, format: TreeFormat) -> String {
        match format {
            TreeFormat::Newick => self.to_newick(),
            TreeFormat::Dot => self.to_dot(),
        }
    }
}

fn preorder(nodes: &[TreeNode], root: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        out.push(v);
        stack.extend(nodes[v].children.iter().rev());
    }
    out
}

fn postorder(nodes: &[TreeNode], root: usize) -> Vec<usize> {
    let mut out = preorder(nodes, root);
    out.reverse();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distances::MetricId;

    fn matrix(labels: &[&str], upper: &[f64]) -> DistanceMatrix {
        let n = labels.len();
        let mut v = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                v[i * n + j] = upper[k];
                v[j * n + i] = upper[k];
                k += 1;
            }
        }
        DistanceMatrix::new(labels.iter().map(|s| s.to_string()).collect(), v, MetricId::Id, "test").unwrap()
    }

    fn set(labels: &[&str]) -> BTreeSet<String> {
        labels.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn three_leaves_closed_form() {
        let m = matrix(&["A", "B", "C"], &[2.0, 3.0, 3.0]);
        let t = neighbor_joining(&m).unwrap();
        assert_eq!(t.to_newick(), "(A:1.0,B:1.0,C:2.0);\n");
        assert!(!t.rooted());
    }

    #[test]
    fn four_leaf_additive_tree() {
        // ((A:1,B:2):3,(C:1,D:2))
        let m = matrix(&["A", "B", "C", "D"], &[3.0, 5.0, 6.0, 6.0, 7.0, 3.0]);
        let t = neighbor_joining(&m).unwrap();
        assert_eq!(t.splits(), BTreeSet::from([set(&["C", "D"])]));
        let lengths = t.split_lengths();
        for (side, want) in [(&["B", "C", "D"][..], 1.0), (&["B"], 2.0), (&["C"], 1.0), (&["D"], 2.0), (&["C", "D"], 3.0)] {
            assert!((lengths[&set(side)] - want).abs() < 1e-12, "{side:?}");
        }
        assert_eq!(t.clamped_branches(), 0);
    }

    #[test]
    fn too_few_leaves() {
        let m = matrix(&["A", "B"], &[1.0]);
        assert!(matches!(neighbor_joining(&m), Err(ClusterError::TooFewLeaves { n: 2, .. })));
        let one = DistanceMatrix::new(vec!["A".into()], vec![0.0], MetricId::Id, "t").unwrap();
        assert!(matches!(upgma(&one), Err(ClusterError::TooFewLeaves { n: 1, .. })));
    }

    #[test]
    fn upgma_cherry() {
        let t = upgma(&matrix(&["A", "B"], &[0.5])).unwrap();
        assert_eq!(t.to_newick(), "[&R] (A:0.25,B:0.25);\n");
    }

    #[test]
    fn upgma_reconstructs_ultrametric() {
        // ((A:1,B:1):2,(C:2,D:2):1), root height 3
        let m = matrix(&["A", "B", "C", "D"], &[2.0, 6.0, 6.0, 6.0, 6.0, 4.0]);
        let t = upgma(&m).unwrap();
        assert!(t.rooted());
        assert_eq!(t.to_newick(), "[&R] ((A:1.0,B:1.0):2.0,(C:2.0,D:2.0):1.0);\n");
    }

    #[test]
    fn ties_go_to_the_smallest_pair() {
        let m = matrix(&["A", "B", "C", "D"], &[1.0; 6]);
        let t = upgma(&m).unwrap();
        assert_eq!(t.to_newick(), "[&R] (((A:0.5,B:0.5):0.0,C:0.5):0.0,D:0.5);\n");
        let nj = neighbor_joining(&m).unwrap();
        assert_eq!(nj.splits(), BTreeSet::from([set(&["C", "D"])]));
    }

    #[test]
    fn subtree_checks() {
        let m = matrix(&["A", "B", "C", "D"], &[3.0, 5.0, 6.0, 6.0, 7.0, 3.0]);
        let t = neighbor_joining(&m).unwrap();
        assert!(t.subtree_check(&["A", "B", "C", "D"]).unwrap());
        assert!(t.subtree_check(&["C"]).unwrap());
        assert!(t.subtree_check(&["A", "B"]).unwrap());
        assert!(t.subtree_check(&["C", "D"]).unwrap());
        assert!(!t.subtree_check(&["A", "C"]).unwrap());
        assert!(!t.subtree_check::<&str>(&[]).unwrap());
        assert_eq!(t.subtree_check(&["A", "Z"]), Err(ClusterError::UnknownLabel("Z".into())));
    }

    #[test]
    fn rooted_check_requires_a_clade() {
        let m = matrix(&["A", "B", "C", "D"], &[2.0, 6.0, 6.0, 6.0, 6.0, 4.0]);
        let t = upgma(&m).unwrap();
        assert!(t.subtree_check(&["C", "D"]).unwrap());
        assert!(!t.subtree_check(&["A", "C", "D"]).unwrap());
    }

    #[test]
    fn negative_estimates_are_clamped_and_counted() {
        // Strongly non-additive: one tiny distance next to large ones.
        let m = matrix(&["A", "B", "C", "D"], &[0.1, 0.9, 0.1, 0.9, 0.9, 0.1]);
        let t = neighbor_joining(&m).unwrap();
        assert!(t.clamped_branches() > 0);
        assert!(t.nodes().iter().all(|n| n.branch_length >= 0.0));
    }

    #[test]
    fn dot_export() {
        let t = neighbor_joining(&matrix(&["A", "B", "C"], &[2.0, 3.0, 3.0])).unwrap();
        assert_eq!(
            t.to_dot(),
            "graph tree {\n  node [shape=point];\n  n1 [shape=plaintext, label=\"A\"];\n  \
             n2 [shape=plaintext, label=\"B\"];\n  n3 [shape=plaintext, label=\"C\"];\n  \
             n0 -- n1 [label=\"1.0\"];\n  n0 -- n2 [label=\"1.0\"];\n  n0 -- n3 [label=\"2.0\"];\n}\n"
        );
    }

    #[test]
    fn length_formatting() {
        assert_eq!(format_length(1.0), "1.0");
        assert_eq!(format_length(0.1234), "0.1234");
        assert_eq!(format_length(0.12345678), "0.123457");
        assert_eq!(format_length(-0.0), "0.0");
        assert_eq!(format_length(-1e-9), "0.0");
    }
}
