//! Cross-modal complementarity: per-sample agreement counts, PCA-aligned
//! Pearson correlation and representational similarity (RSA).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use serde::Serialize;

use super::{accuracy, EvalError};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RsaResult {
    pub rho: f64,
    pub p_value: f64,
    pub permutations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplementarityReport {
    pub n: usize,
    pub pearson_r: f64,
    pub rsa_spearman: f64,
    pub rsa_p_value: f64,
    pub rsa_permutations: usize,
    pub acc_tree: f64,
    pub acc_image: f64,
    pub acc_fused: f64,
    /// `acc_fused - max(acc_tree, acc_image)`.
    pub gain: f64,
    /// Percent of samples where exactly one modality is correct.
    pub complementarity_score: f64,
    pub both_correct_pct: f64,
    pub both_wrong_pct: f64,
    pub exactly_one_count: usize,
    pub both_correct_count: usize,
    /// Samples where both single modalities are wrong.
    pub hard_case_count: usize,
    /// Hard cases the fused prediction gets right.
    pub rescue_count: usize,
    pub pca_dim: usize,
    pub pearson_aggregation: &'static str,
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

fn upper_distances(emb: &[Vec<f64>], perm: &[usize]) -> Vec<f64> {
    let n = emb.len();
    let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&emb[perm[i]], &emb[perm[j]]);
            out.push(a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt());
        }
    }
    out
}

/// Spearman correlation between the upper triangles of the two sets' pairwise
/// Euclidean distance matrices. The one-sided p-value comes from relabeling
/// the second set with seeded random permutations, with the usual `+1`
/// correction.
pub fn rsa_spearman(a: &[Vec<f64>], b: &[Vec<f64>], permutations: usize, seed: u64) -> Result<RsaResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    let ident: Vec<usize> = (0..a.len()).collect();
    let da = upper_distances(a, &ident);
    let ra = ranks(&da);
    let rho = pearson(&ra, &ranks(&upper_distances(b, &ident)));
    let mut rng = substream(seed, "rsa");
    let mut perm = ident.clone();
    let mut at_least = 0usize;
    for _ in 0..permutations {
        perm.shuffle(&mut rng);
        if pearson(&ra, &ranks(&upper_distances(b, &perm))) >= rho {
            at_least += 1;
        }
    }
    Ok(RsaResult { rho, p_value: (at_least + 1) as f64 / (permutations + 1) as f64, permutations })
}

fn pca_project(x: &[Vec<f64>], d: usize) -> DMatrix<f64> {
    let n = x.len();
    let p = x[0].len();
    let mut m = DMatrix::from_fn(n, p, |i, j| x[i][j]);
    for j in 0..p {
        let mean = m.column(j).mean();
        m.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = m.transpose() * &m / (n.max(2) - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let basis = DMatrix::from_fn(p, d, |i, k| eig.eigenvectors[(i, order[k])]);
    m * basis
}

/// Projects both sets onto their top `min(d_a, d_b)` principal components
/// (fit on the sets themselves) and returns the mean absolute Pearson
/// correlation over matched components, with the dimension used.
pub fn pca_pearson(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(f64, usize), EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Ok((0.0, 0));
    }
    let d = a[0].len().min(b[0].len());
    let (pa, pb) = (pca_project(a, d), pca_project(b, d));
    let total: f64 = (0..d)
        .map(|k| {
            let x: Vec<f64> = pa.column(k).iter().copied().collect();
            let y: Vec<f64> = pb.column(k).iter().copied().collect();
            pearson(&x, &y).abs()
        })
        .sum();
    Ok((total / d as f64, d))
}

#[allow(clippy::too_many_arguments)]
pub fn complementarity(
    pred_tree: &[usize],
    pred_image: &[usize],
    pred_fused: &[usize],
    labels: &[usize],
    emb_tree: &[Vec<f64>],
    emb_image: &[Vec<f64>],
    permutations: usize,
    seed: u64,
) -> Result<ComplementarityReport, EvalError> {
    let n = labels.len();
    for (name, len) in [
        ("pred_tree", pred_tree.len()),
        ("pred_image", pred_image.len()),
        ("pred_fused", pred_fused.len()),
        ("emb_tree", emb_tree.len()),
        ("emb_image", emb_image.len()),
    ] {
        if len != n {
            return Err(EvalError::LengthMismatch(format!("{name} has {len} entries, labels {n}")));
        }
    }
    let (mut one, mut both, mut hard, mut rescue) = (0, 0, 0, 0);
    for i in 0..n {
        let (t, v) = (pred_tree[i] == labels[i], pred_image[i] == labels[i]);
        match (t, v) {
            (true, true) => both += 1,
            (false, false) => {
                hard += 1;
                if pred_fused[i] == labels[i] {
                    rescue += 1;
                }
            }
            _ => one += 1,
        }
    }
    let pct = |c: usize| if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 };
    let (pearson_r, pca_dim) = pca_pearson(emb_tree, emb_image)?;
    let rsa = rsa_spearman(emb_tree, emb_image, permutations, seed)?;
    let (acc_tree, acc_image, acc_fused) = (accuracy(pred_tree, labels), accuracy(pred_image, labels), accuracy(pred_fused, labels));
    Ok(ComplementarityReport {
        n,
        pearson_r,
        rsa_spearman: rsa.rho,
        rsa_p_value: rsa.p_value,
        rsa_permutations: permutations,
        acc_tree,
        acc_image,
        acc_fused,
        gain: acc_fused - acc_tree.max(acc_image),
        complementarity_score: pct(one),
        both_correct_pct: pct(both),
        // Taken as the remainder so the three shares add to exactly 100.
        both_wrong_pct: if n == 0 { 0.0 } else { 100.0 - (pct(one) + pct(both)) },
        exactly_one_count: one,
        both_correct_count: both,
        hard_case_count: hard,
        rescue_count: rescue,
        pca_dim,
        pearson_aggregation: "mean |r| over PCA-aligned components",
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        use rand::Rng;
        let mut rng = substream(seed, "cloud");
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn hand_counted_score() {
        let labels = [0, 0, 0, 0];
        let e = cloud(1, 4, 3);
        let r = complementarity(&[0, 0, 1, 1], &[0, 1, 0, 1], &[0, 0, 0, 0], &labels, &e, &e, 10, 0).unwrap();
        assert_eq!(r.complementarity_score, 50.0);
        assert_eq!((r.hard_case_count, r.rescue_count), (1, 1));
    }

    #[test]
    fn all_correct() {
        let e = cloud(2, 5, 2);
        let l = [0, 1, 0, 1, 1];
        let r = complementarity(&l, &l, &l, &l, &e, &e, 10, 0).unwrap();
        assert_eq!(r.complementarity_score, 0.0);
        assert_eq!(r.hard_case_count, 0);
        assert_eq!(r.acc_fused, 100.0);
    }

    #[test]
    fn rsa_self_is_one_and_symmetric() {
        let a = cloud(3, 12, 4);
        let b = cloud(4, 12, 6);
        assert_eq!(rsa_spearman(&a, &a, 50, 1).unwrap().rho, 1.0);
        assert_eq!(rsa_spearman(&a, &b, 0, 1).unwrap().rho, rsa_spearman(&b, &a, 0, 1).unwrap().rho);
        let p = rsa_spearman(&a, &a, 200, 1).unwrap().p_value;
        assert!(p < 0.01, "{p}");
    }

    #[test]
    fn spearman_handles_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pca_pearson_of_rotated_copy_is_one() {
        // Distinct variances keep the component order unambiguous.
        let a: Vec<Vec<f64>> = cloud(5, 30, 2).iter().map(|v| vec![v[0] * 2.0, v[1] * 0.25]).collect();
        let (c, s) = (0.5f64.cos(), 0.5f64.sin());
        let b: Vec<Vec<f64>> = a.iter().map(|v| vec![3.0 * (c * v[0] - s * v[1]) + 1.0, 3.0 * (s * v[0] + c * v[1])]).collect();
        let (r, d) = pca_pearson(&a, &b).unwrap();
        assert_eq!(d, 2);
        assert!((r - 1.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn length_checked() {
        let e = cloud(1, 3, 2);
        assert!(complementarity(&[0, 0], &[0, 0, 0], &[0, 0, 0], &[0, 0, 0], &e, &e, 1, 0).is_err());
    }
}
