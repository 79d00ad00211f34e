use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::invalid;
use crate::math::ln;
use crate::tensor::Matrix;
use crate::Result;

/// Output of [`kmeans`].
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAssignment {
    pub assignment: Vec<usize>,
    pub k: usize,
    pub centroids: Matrix,
    pub inertia: f64,
    /// Inertia after every assignment step of the returned restart.
    pub trace: Vec<f64>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_seeds<R: Rng + ?Sized>(x: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(x.row(i), x.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist2(x.row(i), x.row(pick)));
        }
    }
    centroids
}

fn lloyd(x: &Matrix, mut centroids: Matrix, max_iter: usize) -> ClusterAssignment {
    let (n, k) = (x.rows(), centroids.rows());
    let mut assignment = vec![usize::MAX; n];
    let mut trace = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut inertia = 0.0;
        for i in 0..n {
            let (mut best, mut best_d) = (0, f64::INFINITY);
            for c in 0..k {
                let d = dist2(x.row(i), centroids.row(c));
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
            inertia += best_d;
        }
        trace.push(inertia);
        if !changed && trace.len() > 1 {
            break;
        }
        let mut sums = Matrix::zeros(k, x.cols());
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assignment[i]] += 1;
            for (s, v) in sums.row_mut(assignment[i]).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
        // An empty cluster takes over the point farthest from its own centroid.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = dist2(x.row(a), centroids.row(assignment[a]));
                        let db = dist2(x.row(b), centroids.row(assignment[b]));
                        da.total_cmp(&db)
                    })
                    .unwrap_or(0);
                counts[assignment[far]] -= 1;
                assignment[far] = c;
                counts[c] = 1;
                centroids.row_mut(c).copy_from_slice(x.row(far));
            }
        }
    }
    let inertia = *trace.last().unwrap_or(&0.0);
    ClusterAssignment {
        assignment,
        k,
        centroids,
        inertia,
        trace,
    }
}

/// Lloyd's algorithm with k-means++ seeding; returns the restart with the lowest
/// inertia.
pub fn kmeans<R: Rng + ?Sized>(
    x: &Matrix,
    k: usize,
    max_iter: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<ClusterAssignment> {
    if k == 0 || x.rows() < k {
        return Err(invalid(format!("k-means needs 1 <= k <= n, got k = {k}, n = {}", x.rows())));
    }
    let mut best: Option<ClusterAssignment> = None;
    for _ in 0..restarts.max(1) {
        let seeds = plus_plus_seeds(x, k, rng);
        let run = lloyd(x, seeds, max_iter);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

struct Contingency {
    n: f64,
    cells: BTreeMap<(usize, usize), usize>,
    rows: BTreeMap<usize, usize>,
    cols: BTreeMap<usize, usize>,
}

fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency> {
    if a.is_empty() {
        return Err(invalid("partition comparison of an empty input"));
    }
    if a.len() != b.len() {
        return Err(invalid(format!("partitions differ in length: {} vs {}", a.len(), b.len())));
    }
    let mut c = Contingency {
        n: a.len() as f64,
        cells: BTreeMap::new(),
        rows: BTreeMap::new(),
        cols: BTreeMap::new(),
    };
    for (&x, &y) in a.iter().zip(b) {
        *c.cells.entry((x, y)).or_default() += 1;
        *c.rows.entry(x).or_default() += 1;
        *c.cols.entry(y).or_default() += 1;
    }
    Ok(c)
}

fn entropy(counts: &BTreeMap<usize, usize>, n: f64) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * ln(p)
        })
        .sum()
}

/// Normalized mutual information with the arithmetic mean of the two entropies.
/// Two single-cluster partitions score 1; a single-cluster partition against any
/// other scores 0.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let c = contingency(a, b)?;
    let (ha, hb) = (entropy(&c.rows, c.n), entropy(&c.cols, c.n));
    if c.rows.len() == 1 && c.cols.len() == 1 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (&(x, y), &nxy) in &c.cells {
        let pxy = nxy as f64 / c.n;
        let px = c.rows[&x] as f64 / c.n;
        let py = c.cols[&y] as f64 / c.n;
        mi += pxy * ln(pxy / (px * py));
    }
    Ok((mi / ((ha + hb) / 2.0)).clamp(0.0, 1.0))
}

fn pairs(c: usize) -> f64 {
    let c = c as f64;
    c * (c - 1.0) / 2.0
}

/// Adjusted Rand index; identical degenerate partitions (all in one cluster or all
/// singletons on both sides) score 1.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    let c = contingency(a, b)?;
    let index: f64 = c.cells.values().map(|&x| pairs(x)).sum();
    let sa: f64 = c.rows.values().map(|&x| pairs(x)).sum();
    let sb: f64 = c.cols.values().map(|&x| pairs(x)).sum();
    let total = pairs(a.len());
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = (sa + sb) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// NMI and ARI of one k-means run on L2-normalized embeddings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterScore {
    pub nmi: f64,
    pub ari: f64,
}

/// One repetition of the clustering protocol: normalize rows, run k-means with
/// `restarts` restarts, score against `labels`.
pub fn clustering_run<R: Rng + ?Sized>(
    embeddings: &Matrix,
    labels: &[usize],
    k: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<ClusterScore> {
    if embeddings.rows() != labels.len() {
        return Err(invalid("one label per embedding row is required"));
    }
    let x = embeddings.l2_normalize_rows();
    let fit = kmeans(&x, k, 300, restarts, rng)?;
    Ok(ClusterScore {
        nmi: nmi(&fit.assignment, labels)?,
        ari: ari(&fit.assignment, labels)?,
    })
}

/// Mean NMI and ARI over `repetitions` runs of [`clustering_run`], run `i` seeded
/// with `seed + i`.
pub fn clustering_protocol(
    embeddings: &Matrix,
    labels: &[usize],
    k: usize,
    repetitions: usize,
    seed: u64,
) -> Result<ClusterScore> {
    if repetitions == 0 {
        return Err(invalid("at least one clustering repetition is required"));
    }
    let runs = (0..repetitions)
        .map(|i| clustering_run(embeddings, labels, k, 10, &mut crate::seeded_rng(seed + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_score(&runs))
}

pub fn mean_score(runs: &[ClusterScore]) -> ClusterScore {
    let n = runs.len() as f64;
    ClusterScore {
        nmi: runs.iter().map(|r| r.nmi).sum::<f64>() / n,
        ari: runs.iter().map(|r| r.ari).sum::<f64>() / n,
    }
}
