//! Small random heterogeneous graphs for tests.

use rand::Rng;
use rhgnn_core::hetgraph::{build_graph, HeteroGraph, Schema};
use rhgnn_core::tensor::Matrix;

/// Three node types (M, D, A) and four base relations M-D, M-A, A-A, D-A.
/// Every movie has one director and one to three actors; the node counts are
/// `(movies, directors, actors)`.
pub fn toy_graph(seed: u64, counts: (usize, usize, usize)) -> HeteroGraph {
    let mut rng = rhgnn_core::seeded_rng(seed);
    let (nm, nd, na) = counts;
    let schema = Schema::new(
        &[("M", 5), ("D", 3), ("A", 4)],
        &[("M-D", "M", "D"), ("M-A", "M", "A"), ("A-A", "A", "A"), ("D-A", "D", "A")],
    )
    .unwrap();
    let mut feat = |n: usize, d: usize| {
        let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(n, d, data).unwrap()
    };
    let features = vec![feat(nm, 5), feat(nd, 3), feat(na, 4)];
    let mut md = Vec::new();
    let mut ma = Vec::new();
    for m in 0..nm {
        md.push((m, rng.random_range(0..nd)));
        let k = rng.random_range(1..=3.min(na));
        for a in rand::seq::index::sample(&mut rng, na, k) {
            ma.push((m, a));
        }
    }
    let mut aa = Vec::new();
    for a in 0..na {
        if rng.random_bool(0.5) {
            aa.push((a, rng.random_range(0..na)));
        }
    }
    let da = (0..nd).map(|d| (d, rng.random_range(0..na))).collect();
    build_graph(schema, vec![nm, nd, na], features, vec![md, ma, aa, da]).unwrap()
}

pub fn all_nodes(g: &HeteroGraph) -> Vec<Vec<usize>> {
    g.node_counts().iter().map(|&n| (0..n).collect()).collect()
}

/// Movies with class-dependent features and directors/actors that mostly connect
/// movies of one class. Returns the graph and the movie labels.
pub fn labeled_graph(seed: u64, movies: usize, classes: usize) -> (HeteroGraph, Vec<usize>) {
    let mut rng = rhgnn_core::seeded_rng(seed);
    let schema = Schema::new(&[("M", 6), ("D", 2), ("A", 2)], &[("M-D", "M", "D"), ("M-A", "M", "A")]).unwrap();
    let labels: Vec<usize> = (0..movies).map(|i| i % classes).collect();
    let centroids: Vec<Vec<f64>> = (0..classes).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut xm = Matrix::zeros(movies, 6);
    for (i, &c) in labels.iter().enumerate() {
        for j in 0..6 {
            xm[(i, j)] = centroids[c][j] + 0.5 * rng.random_range(-1.0..1.0);
        }
    }
    let (nd, na) = (2 * classes, 3 * classes);
    let mut feat = |n: usize| Matrix::from_vec(n, 2, (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let (xd, xa) = (feat(nd), feat(na));
    let pick = |rng: &mut rhgnn_core::Rng, c: usize, per: usize| {
        let c = if rng.random_bool(0.8) { c } else { rng.random_range(0..classes) };
        c * per + rng.random_range(0..per)
    };
    let mut md = Vec::new();
    let mut ma = Vec::new();
    for (m, &c) in labels.iter().enumerate() {
        md.push((m, pick(&mut rng, c, 2)));
        for _ in 0..2 {
            ma.push((m, pick(&mut rng, c, 3)));
        }
    }
    let g = build_graph(schema, vec![movies, nd, na], vec![xm, xd, xa], vec![md, ma]).unwrap();
    (g, labels)
}
