//! Exhaustive tree oracle shared by test targets: enumerates every unrooted
//! binary topology on k leaves and fits edge lengths by least squares.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use ncdkit::cluster::DendroTree;
use ncdkit::distances::MetricId;
use ncdkit::matrix::DistanceMatrix;

/// Edge list; nodes `0..k` are leaves.
#[derive(Clone, Debug)]
pub struct Topology {
    pub k: usize,
    pub edges: Vec<(usize, usize)>,
}

pub fn all_topologies(k: usize) -> Vec<Topology> {
    assert!(k >= 3);
    let star = Topology {
        k,
        edges: vec![(0, k), (1, k), (2, k)],
    };
    let mut trees = vec![star];
    for leaf in 3..k {
        let mut next = Vec::new();
        for t in &trees {
            let w = k + (t.edges.len() - 1) / 2;
            for e in 0..t.edges.len() {
                let (u, v) = t.edges[e];
                let mut edges = t.edges.clone();
                edges[e] = (u, w);
                edges.push((w, v));
                edges.push((leaf, w));
                next.push(Topology { k, edges });
            }
        }
        trees = next;
    }
    trees
}

pub fn path_edges(t: &Topology, from: usize, to: usize) -> Vec<usize> {
    let nodes = t.edges.iter().map(|&(u, v)| u.max(v)).max().unwrap() + 1;
    let mut adj = vec![Vec::new(); nodes];
    for (e, &(u, v)) in t.edges.iter().enumerate() {
        adj[u].push((v, e));
        adj[v].push((u, e));
    }
    let mut via: Vec<Option<(usize, usize)>> = vec![None; nodes];
    let mut queue = VecDeque::from([from]);
    let mut seen = vec![false; nodes];
    seen[from] = true;
    while let Some(x) = queue.pop_front() {
        for &(y, e) in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                via[y] = Some((x, e));
                queue.push_back(y);
            }
        }
    }
    let mut path = Vec::new();
    let mut x = to;
    while let Some((p, e)) = via[x] {
        path.push(e);
        x = p;
    }
    path
}

/// Leaf side of edge `e` that does not contain leaf 0.
pub fn edge_side(t: &Topology, e: usize, labels: &[String]) -> BTreeSet<String> {
    (0..t.k)
        .filter(|&leaf| path_edges(t, 0, leaf).contains(&e))
        .map(|leaf| labels[leaf].clone())
        .collect()
}

pub struct Fit {
    pub residual: f64,
    pub lengths: BTreeMap<BTreeSet<String>, f64>,
}

pub fn pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect()
}

pub fn fit(t: &Topology, m: &DistanceMatrix) -> Fit {
    let ps = pairs(t.k);
    let mut a = DMatrix::<f64>::zeros(ps.len(), t.edges.len());
    let b = DVector::from_iterator(ps.len(), ps.iter().map(|&(i, j)| m.get(i, j)));
    for (row, &(i, j)) in ps.iter().enumerate() {
        for e in path_edges(t, i, j) {
            a[(row, e)] = 1.0;
        }
    }
    let x = a.clone().svd(true, true).solve(&b, 1e-12).unwrap();
    let residual = (&a * &x - &b).norm();
    let labels = m.labels();
    let lengths = (0..t.edges.len()).map(|e| (edge_side(t, e, labels), x[e])).collect();
    Fit { residual, lengths }
}

pub fn best_fit(m: &DistanceMatrix) -> Fit {
    all_topologies(m.n())
        .iter()
        .map(|t| fit(t, m))
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .unwrap()
}

pub fn labels(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("L{i}")).collect()
}

pub fn additive_matrix(t: &Topology, lengths: &[f64]) -> DistanceMatrix {
    let k = t.k;
    let mut v = vec![0.0; k * k];
    for (i, j) in pairs(k) {
        let d: f64 = path_edges(t, i, j).iter().map(|&e| lengths[e]).sum();
        v[i * k + j] = d;
        v[j * k + i] = d;
    }
    DistanceMatrix::new(labels(k), v, MetricId::Id, "oracle").unwrap()
}

pub fn nontrivial(lengths: &BTreeMap<BTreeSet<String>, f64>, k: usize) -> BTreeSet<BTreeSet<String>> {
    lengths.keys().filter(|s| s.len() >= 2 && s.len() + 2 <= k).cloned().collect()
}

/// Why `tree` disagrees with the best least-squares fit, if it does.
pub fn oracle_mismatch(m: &DistanceMatrix, tree: &DendroTree, tol: f64) -> Option<String> {
    let oracle = best_fit(m);
    if oracle.residual >= tol {
        return Some(format!("input is not additive, residual {}", oracle.residual));
    }
    if tree.splits() != nontrivial(&oracle.lengths, m.n()) {
        return Some(format!("splits {:?} vs oracle {:?}", tree.splits(), nontrivial(&oracle.lengths, m.n())));
    }
    let got = tree.split_lengths();
    if got.len() != oracle.lengths.len() {
        return Some(format!("{} edges vs oracle {}", got.len(), oracle.lengths.len()));
    }
    for (side, want) in &oracle.lengths {
        let have = got.get(side).copied().unwrap_or(f64::NAN);
        let close = (have - want).abs() < tol;
        if !close {
            return Some(format!("{side:?}: {have} vs {want}"));
        }
    }
    None
}
