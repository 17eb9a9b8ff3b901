//! Principal component analysis and the variance-ratio diagnostic that
//! compares the spectra of two fitted models.

use nalgebra::{DMatrix, DVector, RowDVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddingDataset;
use crate::error::{Error, Result};

/// A fitted PCA basis. Component rows are orthonormal and ordered by
/// non-increasing explained variance.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: DVector<f64>,
    components: DMatrix<f64>,
    explained_variance: Vec<f64>,
    explained_variance_ratio: Vec<f64>,
    fitted_on: usize,
}

/// Fits `k` principal axes to the rows of `x`.
///
/// The axes are the right singular vectors of the centered data and
/// explained variances are `σᵢ² / (N − 1)` and ratios are taken against the total variance of
/// the data, including axes beyond `k`. Each axis is sign-normalized so its
/// largest-magnitude entry is positive.
pub fn fit_pca(x: &DMatrix<f64>, k: usize) -> Result<PcaModel> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::invalid(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::invalid(format!(
            "component count {k} must be in [1, {}] for a {n}×{d} matrix",
            n.min(d)
        )));
    }
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        // Column-major storage.
        return Err(Error::invalid(format!(
            "non-finite value at ({}, {})",
            pos % n,
            pos / n
        )));
    }

    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let denom = (n - 1) as f64;
    let total_variance = centered.norm_squared() / denom;

    let (singular_values, v_t) = right_singular_vectors(centered)?;
    let mut components = DMatrix::zeros(k, d);
    let mut explained_variance = Vec::with_capacity(k);
    for (i, &s) in singular_values.iter().take(k).enumerate() {
        let mut axis: RowDVector<f64> = v_t.row(i).into_owned();
        normalize_sign(&mut axis);
        components.set_row(i, &axis);
        explained_variance.push(s * s / denom);
    }
    let explained_variance_ratio = explained_variance
        .iter()
        .map(|v| {
            if total_variance > 0.0 {
                v / total_variance
            } else {
                0.0
            }
        })
        .collect();

    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        explained_variance_ratio,
        fitted_on: n,
    })
}

/// Singular values of an N×D matrix in descending order, with the matching
/// right singular vectors as rows (min(N, D) of each).
///
/// Computed from a symmetric eigendecomposition of the smaller Gram matrix.
/// nalgebra's SVD loses accuracy on rank-deficient input, which includes
/// every centered matrix with N ≤ D and any data with constant or repeated
/// columns. For wide input, axes with no variance are completed by
/// Gram-Schmidt.
fn right_singular_vectors(a: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (n, d) = a.shape();
    if n >= d {
        let eigen = symmetric_eigen(a.transpose() * &a)?;
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eigen.eigenvalues[j].total_cmp(&eigen.eigenvalues[i]));
        let values = order
            .iter()
            .map(|&i| eigen.eigenvalues[i].max(0.0).sqrt())
            .collect();
        let rows = DMatrix::from_fn(d, d, |r, c| eigen.eigenvectors[(c, order[r])]);
        return Ok((values, rows));
    }

    let eigen = symmetric_eigen(&a * a.transpose())?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eigen.eigenvalues[j].total_cmp(&eigen.eigenvalues[i]));
    let largest = eigen.eigenvalues[order[0]].max(0.0).sqrt();
    let cutoff = largest * (n.max(d) as f64) * f64::EPSILON;

    let mut values = Vec::with_capacity(n);
    let mut rows: Vec<DVector<f64>> = Vec::with_capacity(n);
    for &i in &order {
        let sigma = eigen.eigenvalues[i].max(0.0).sqrt();
        if sigma > cutoff {
            let v = a.transpose() * eigen.eigenvectors.column(i) / sigma;
            if let Some(v) = orthonormalize(v, &rows) {
                values.push(sigma);
                rows.push(v);
                continue;
            }
        }
        break;
    }
    // Remaining axes carry no variance; any orthonormal completion will do.
    let mut basis = 0;
    while rows.len() < n {
        let e = DVector::from_fn(d, |j, _| if j == basis { 1.0 } else { 0.0 });
        basis += 1;
        if let Some(v) = orthonormalize(e, &rows) {
            values.push(0.0);
            rows.push(v);
        }
    }
    let v_t = DMatrix::from_fn(n, d, |r, c| rows[r][c]);
    Ok((values, v_t))
}

fn symmetric_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let eigen = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("eigendecomposition did not converge".into()))?;
    if eigen.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "eigendecomposition produced non-finite values".into(),
        ));
    }
    Ok(eigen)
}

/// Removes the components of `v` along `basis` (twice, for stability) and
/// normalizes. `None` if nothing substantial is left.
fn orthonormalize(mut v: DVector<f64>, basis: &[DVector<f64>]) -> Option<DVector<f64>> {
    let original = v.norm();
    for _ in 0..2 {
        for b in basis {
            let proj = b.dot(&v);
            v.axpy(-proj, b, 1.0);
        }
    }
    let norm = v.norm();
    (norm > 1e-6 * original).then(|| v / norm)
}

/// Fits PCA on a dataset's embeddings; labels are ignored.
pub fn fit_dataset(data: &EmbeddingDataset, k: usize) -> Result<PcaModel> {
    fit_pca(data.embeddings(), k)
}

fn normalize_sign(axis: &mut RowDVector<f64>) {
    let mut best = 0;
    for (i, v) in axis.iter().enumerate() {
        if v.abs() > axis[best].abs() {
            best = i;
        }
    }
    if axis[best] < 0.0 {
        axis.neg_mut();
    }
}

impl PcaModel {
    /// Assembles a model from stored parts, checking shapes only.
    pub fn from_parts(
        mean: Vec<f64>,
        components: DMatrix<f64>,
        explained_variance: Vec<f64>,
        explained_variance_ratio: Vec<f64>,
        fitted_on: usize,
    ) -> Result<Self> {
        let k = components.nrows();
        if components.ncols() != mean.len()
            || explained_variance.len() != k
            || explained_variance_ratio.len() != k
        {
            return Err(Error::mismatch(format!(
                "inconsistent PCA parts: mean {}, components {}×{}, variances {}/{}",
                mean.len(),
                k,
                components.ncols(),
                explained_variance.len(),
                explained_variance_ratio.len()
            )));
        }
        Ok(Self {
            mean: DVector::from_vec(mean),
            components,
            explained_variance,
            explained_variance_ratio,
            fitted_on,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// K×D, one principal axis per row.
    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn explained_variance_ratio(&self) -> &[f64] {
        &self.explained_variance_ratio
    }

    pub fn fitted_on(&self) -> usize {
        self.fitted_on
    }

    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn n_dims(&self) -> usize {
        self.components.ncols()
    }

    /// Coordinates of each row of `x` on the first `k` axes.
    pub fn transform(&self, x: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
        if x.ncols() != self.n_dims() {
            return Err(Error::mismatch(format!(
                "input has {} columns, model was fitted on {}",
                x.ncols(),
                self.n_dims()
            )));
        }
        if k == 0 || k > self.n_components() {
            return Err(Error::invalid(format!(
                "cannot project onto {k} axes; model has {}",
                self.n_components()
            )));
        }
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * self.components.rows(0, k).transpose())
    }

    /// Projects a dataset onto the first `k` axes, keeping labels.
    pub fn transform_dataset(&self, data: &EmbeddingDataset, k: usize) -> Result<EmbeddingDataset> {
        let projected = self.transform(data.embeddings(), k)?;
        data.with_embeddings(projected)
    }

    /// Maps coordinates on the first `z.ncols()` axes back to input space.
    pub fn reconstruct(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let k = z.ncols();
        if k == 0 || k > self.n_components() {
            return Err(Error::invalid(format!(
                "cannot reconstruct from {k} axes; model has {}",
                self.n_components()
            )));
        }
        let mut x = z * self.components.rows(0, k);
        for mut row in x.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(x)
    }
}

/// Per-component ratio of explained-variance fractions between a
/// "finetuned" and a "pretrained" model, with its crossover index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRatioReport {
    pub ratios: Vec<f64>,
    pub crossover: usize,
}

/// `ratios[i] = finetuned.ratio[i] / pretrained.ratio[i]` for the first `n`
/// components.
pub fn variance_ratios(
    finetuned: &PcaModel,
    pretrained: &PcaModel,
    n: usize,
) -> Result<VarianceRatioReport> {
    if n == 0 {
        return Err(Error::invalid("need at least one component to compare"));
    }
    for (label, model) in [("finetuned", finetuned), ("pretrained", pretrained)] {
        if n > model.n_components() {
            return Err(Error::invalid(format!(
                "requested {n} ratios but the {label} model has {} components",
                model.n_components()
            )));
        }
    }
    let ft = &finetuned.explained_variance_ratio[..n];
    let pt = &pretrained.explained_variance_ratio[..n];
    if let Some(i) = pt.iter().position(|&p| p <= 0.0) {
        return Err(Error::invalid(format!(
            "pretrained component {i} explains zero variance"
        )));
    }
    let ratios: Vec<f64> = ft.iter().zip(pt).map(|(f, p)| f / p).collect();
    let crossover = crossover_index(&ratios)?;
    Ok(VarianceRatioReport { ratios, crossover })
}

/// Length of the leading run of ratios strictly greater than 1.
pub fn crossover_index(ratios: &[f64]) -> Result<usize> {
    if ratios.is_empty() {
        return Err(Error::invalid("crossover of an empty ratio sequence"));
    }
    Ok(ratios.iter().take_while(|&&r| r > 1.0).count())
}
