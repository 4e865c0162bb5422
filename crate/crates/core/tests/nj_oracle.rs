//! Neighbor joining against exhaustive search: every unrooted binary
//! topology is fitted by least squares and the best fit must match NJ.

#[path = "support/nj.rs"]
mod nj;

use std::collections::BTreeSet;

use ncdkit::cluster::{neighbor_joining, upgma, DendroTree};
use ncdkit::distances::MetricId;
use ncdkit::matrix::DistanceMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nj::{additive_matrix, all_topologies, labels, oracle_mismatch, pairs, Topology};

fn assert_matches_oracle(m: &DistanceMatrix, tree: &DendroTree) {
    if let Some(why) = oracle_mismatch(m, tree, 1e-9) {
        panic!("{why}");
    }
}

#[test]
fn topology_counts() {
    assert_eq!(all_topologies(3).len(), 1);
    assert_eq!(all_topologies(4).len(), 3);
    assert_eq!(all_topologies(5).len(), 15);
    assert_eq!(all_topologies(6).len(), 105);
}

#[test]
fn four_leaf_reference_tree() {
    // Leaf edges 1, 1, 2, 2 and internal edge 3, split {L0,L1} | {L2,L3}.
    let t = Topology {
        k: 4,
        edges: vec![(0, 4), (1, 4), (2, 5), (3, 5), (4, 5)],
    };
    let m = additive_matrix(&t, &[1.0, 1.0, 2.0, 2.0, 3.0]);
    assert_eq!(m.get(0, 1), 2.0);
    assert_eq!(m.get(0, 2), 6.0);
    assert_eq!(m.get(2, 3), 4.0);
    let tree = neighbor_joining(&m).unwrap();
    assert_matches_oracle(&m, &tree);
    let split: BTreeSet<String> = ["L2", "L3"].iter().map(|s| s.to_string()).collect();
    assert!((tree.split_lengths()[&split] - 3.0).abs() < 1e-12);
    assert!(tree.subtree_check(&["L0", "L1"]).unwrap());
    assert!(tree.subtree_check(&["L2", "L3"]).unwrap());
    assert!(!tree.subtree_check(&["L0", "L2"]).unwrap());
}

#[test]
fn random_additive_four_and_five_leaf_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    for k in [4, 5] {
        let tops = all_topologies(k);
        for _ in 0..40 {
            let t = &tops[rng.gen_range(0..tops.len())];
            let lengths: Vec<f64> = (0..t.edges.len()).map(|_| rng.gen_range(0.05..3.0)).collect();
            let m = additive_matrix(t, &lengths);
            assert_matches_oracle(&m, &neighbor_joining(&m).unwrap());
        }
    }
}

#[test]
fn every_five_leaf_topology_is_recovered() {
    for t in all_topologies(5) {
        let lengths: Vec<f64> = (0..t.edges.len()).map(|e| 0.5 + 0.25 * e as f64).collect();
        let m = additive_matrix(&t, &lengths);
        assert_matches_oracle(&m, &neighbor_joining(&m).unwrap());
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, k: usize) -> DistanceMatrix {
    let mut v = vec![0.0; k * k];
    for (i, j) in pairs(k) {
        let d = rng.gen_range(0.2..1.0);
        v[i * k + j] = d;
        v[j * k + i] = d;
    }
    DistanceMatrix::new(labels(k), v, MetricId::Ncd, "random").unwrap()
}

fn assert_isomorphic(a: &DendroTree, b: &DendroTree) {
    let (la, lb) = (a.split_lengths(), b.split_lengths());
    assert_eq!(la.keys().collect::<Vec<_>>(), lb.keys().collect::<Vec<_>>());
    for (side, x) in &la {
        assert!((x - lb[side]).abs() < 1e-9, "{side:?}");
    }
}

#[test]
fn permutation_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    for k in [4, 6, 9] {
        for _ in 0..10 {
            let m = random_matrix(&mut rng, k);
            let mut perm: Vec<usize> = (0..k).collect();
            perm.shuffle(&mut rng);
            let p = m.permuted(&perm);
            assert_isomorphic(&neighbor_joining(&m).unwrap(), &neighbor_joining(&p).unwrap());
            let (ua, ub) = (upgma(&m).unwrap(), upgma(&p).unwrap());
            assert_isomorphic(&ua, &ub);
            let clades = |t: &DendroTree| {
                (0..t.nodes().len())
                    .filter(|&v| !t.nodes()[v].children.is_empty())
                    .count()
            };
            assert_eq!(clades(&ua), clades(&ub));
        }
    }
}

#[test]
fn export_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = random_matrix(&mut rng, 8);
    let first = neighbor_joining(&m).unwrap().to_newick();
    for _ in 0..5 {
        assert_eq!(neighbor_joining(&m.clone()).unwrap().to_newick(), first);
    }
    assert_eq!(upgma(&m).unwrap().to_dot(), upgma(&m).unwrap().to_dot());
}
