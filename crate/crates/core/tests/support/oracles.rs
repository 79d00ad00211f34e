//! Brute-force reference metrics.

/// ARI by explicit pair counting over all n(n-1)/2 pairs.
pub fn ari_pairs(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut total) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            total += 1.0;
            if sa && sb {
                both += 1.0;
            }
            if sa {
                only_a += 1.0;
            }
            if sb {
                only_b += 1.0;
            }
        }
    }
    let expected = only_a * only_b / total;
    let max = (only_a + only_b) / 2.0;
    if max == expected {
        1.0
    } else {
        (both - expected) / (max - expected)
    }
}

fn distinct(a: &[usize]) -> Vec<usize> {
    let mut v = a.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// NMI from an explicit dense contingency table.
pub fn nmi_table(a: &[usize], b: &[usize]) -> f64 {
    let (ka, kb) = (distinct(a), distinct(b));
    let n = a.len() as f64;
    let mut table = vec![vec![0.0; kb.len()]; ka.len()];
    for (x, y) in a.iter().zip(b) {
        let i = ka.iter().position(|v| v == x).unwrap();
        let j = kb.iter().position(|v| v == y).unwrap();
        table[i][j] += 1.0;
    }
    let row: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<f64> = (0..kb.len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let h = |m: &[f64]| -m.iter().map(|c| c / n * (c / n).ln()).sum::<f64>();
    let (ha, hb) = (h(&row), h(&col));
    if ka.len() == 1 && kb.len() == 1 {
        return 1.0;
    }
    if ka.len() == 1 || kb.len() == 1 {
        return 0.0;
    }
    let mut mi = 0.0;
    for i in 0..ka.len() {
        for j in 0..kb.len() {
            if table[i][j] > 0.0 {
                mi += table[i][j] / n * (n * table[i][j] / (row[i] * col[j])).ln();
            }
        }
    }
    mi / ((ha + hb) / 2.0)
}

/// Macro-F1 by recounting each class from scratch.
pub fn macro_f1_direct(pred: &[usize], truth: &[usize], classes: usize) -> f64 {
    let mut scores = Vec::new();
    for c in 0..classes {
        let tp = pred.iter().zip(truth).filter(|(p, t)| **p == c && **t == c).count() as f64;
        let pp = pred.iter().filter(|p| **p == c).count() as f64;
        let ap = truth.iter().filter(|t| **t == c).count() as f64;
        if pp + ap == 0.0 {
            continue;
        }
        scores.push(2.0 * tp / (pp + ap));
    }
    scores.iter().sum::<f64>() / scores.len() as f64
}
