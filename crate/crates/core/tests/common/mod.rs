//! Independent reference implementations used by the oracle and acceptance
//! tests. Nothing here calls into the code paths it is checking.
#![allow(dead_code)]

use embedscope::classifier::{loss_and_gradient, train_softmax};
use embedscope::selection::FoldPlan;
use embedscope::{EmbeddingDataset, Seed, TrainConfig};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = Seed(seed).rng(900);
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Sample covariance with the N−1 denominator, by explicit double loops.
pub fn sample_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = x.shape();
    let means: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let s: f64 = (0..n)
                .map(|i| (x[(i, a)] - means[a]) * (x[(i, b)] - means[b]))
                .sum();
            cov[(a, b)] = s / (n as f64 - 1.0);
            cov[(b, a)] = cov[(a, b)];
        }
    }
    cov
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues in descending order and the matching eigenvectors as columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let d = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(d, d);
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|p| (0..d).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| m[(p, q)] * m[(p, q)])
            .sum();
        if off < 1e-30 * m.norm_squared().max(1e-300) {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(d, d, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Largest entry of |AᵀA − I| over the rows of `components` (K×D).
pub fn orthonormality_error(components: &DMatrix<f64>) -> f64 {
    let gram = components * components.transpose();
    let k = gram.nrows();
    (gram - DMatrix::<f64>::identity(k, k)).amax()
}

/// Finite-difference check of the softmax loss gradient at one random
/// point. Returns ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖).
pub fn gradient_check_error(seed: u64) -> f64 {
    let mut rng = Seed(seed).rng(901);
    let n = rng.random_range(5..30);
    let f = rng.random_range(1..8);
    let c = rng.random_range(2..6);
    let features = DMatrix::from_fn(n, f, |_, _| rng.sample::<f64, _>(StandardNormal) * 2.0);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let weights = DMatrix::from_fn(c, f, |_, _| rng.sample::<f64, _>(StandardNormal));
    let bias: Vec<f64> = (0..c).map(|_| rng.sample(StandardNormal)).collect();
    let scale = [0.0, 1e-3, 0.5][seed as usize % 3];
    let penalty: Vec<f64> = (0..f).map(|_| scale * rng.random_range(0.1..3.0)).collect();

    let loss = |w: &DMatrix<f64>, b: &[f64]| {
        loss_and_gradient(&features, &labels, c, w, b, &penalty)
            .unwrap()
            .0
    };
    let (_, grad_w, grad_b) =
        loss_and_gradient(&features, &labels, c, &weights, &bias, &penalty).unwrap();

    let h = 1e-5;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for i in 0..c {
        for j in 0..f {
            let mut plus = weights.clone();
            plus[(i, j)] += h;
            let mut minus = weights.clone();
            minus[(i, j)] -= h;
            numeric.push((loss(&plus, &bias) - loss(&minus, &bias)) / (2.0 * h));
            analytic.push(grad_w[(i, j)]);
        }
    }
    for i in 0..c {
        let mut plus = bias.clone();
        plus[i] += h;
        let mut minus = bias.clone();
        minus[i] -= h;
        numeric.push((loss(&weights, &plus) - loss(&weights, &minus)) / (2.0 * h));
        analytic.push(grad_b[i]);
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-300)
}

/// Forward selection written as a plain rescan: every step retrains a probe
/// on every fold for every unused column and keeps the first maximum.
pub fn naive_greedy(
    train: &EmbeddingDataset,
    n: usize,
    folds: usize,
    seed: Seed,
    config: &TrainConfig,
) -> (Vec<usize>, Vec<f64>) {
    let plan = FoldPlan::stratified(train, folds, seed).unwrap();
    let mut chosen: Vec<usize> = Vec::new();
    let mut scores = Vec::new();
    for _ in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for col in 0..train.n_dims() {
            if chosen.contains(&col) {
                continue;
            }
            let mut dims = chosen.clone();
            dims.push(col);
            let mut total = 0.0;
            for fold in 0..folds {
                let (fit_rows, held_rows) = plan.rows(fold);
                let subset = train.select_dims(&dims).unwrap();
                let model = train_softmax(&subset.select_rows(&fit_rows), config).unwrap();
                total += model.accuracy(&subset.select_rows(&held_rows)).unwrap();
            }
            let score = total / folds as f64;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((col, score));
            }
        }
        let (col, score) = best.unwrap();
        chosen.push(col);
        scores.push(score);
    }
    (chosen, scores)
}

/// Standard normal quantile (Acklam's rational approximation, refined by
/// one Halley step), used to plant columns with a target accuracy.
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    let plow = 0.02425;
    if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

/// Two classes separated along column `planted` only. Every other column
/// carries a scaled copy of that column plus fresh unit noise, with the
/// scale chosen so its own one-column Bayes accuracy is spread evenly over
/// `[0.51, max_leak]`. Returns (train, test).
pub fn graded_leak_fixture(
    n: usize,
    d: usize,
    planted: usize,
    separation: f64,
    max_leak: f64,
    seed: u64,
) -> (EmbeddingDataset, EmbeddingDataset) {
    let mut rng = Seed(seed).rng(902);
    let half = separation / 2.0;
    let others: Vec<usize> = (0..d).filter(|&j| j != planted).collect();
    let mut gains = vec![0.0; d];
    for (rank, &j) in others.iter().enumerate() {
        let target = 0.51 + (max_leak - 0.51) * rank as f64 / (others.len() - 1).max(1) as f64;
        let r = normal_quantile(target);
        gains[j] = r / (half * half - r * r).sqrt();
    }
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let mut x = DMatrix::zeros(n, d);
    for (i, &label) in labels.iter().enumerate() {
        let sign = if label == 0 { -1.0 } else { 1.0 };
        let base = sign * half + rng.sample::<f64, _>(StandardNormal);
        for j in 0..d {
            x[(i, j)] = if j == planted {
                base
            } else {
                gains[j] * base + rng.sample::<f64, _>(StandardNormal)
            };
        }
    }
    let data = EmbeddingDataset::new("graded-leak", x, labels, 2).unwrap();
    let split = data.stratified_split(0.5, Seed(seed)).unwrap();
    (split.train, split.test)
}
