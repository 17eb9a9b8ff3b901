//! Gaussian class-conditional embeddings with a planted low-dimensional
//! class subspace.
//!
//! Class centroids live in the first `signal_dims` coordinates; every
//! coordinate receives isotropic noise. An optional seeded orthogonal map
//! then mixes all coordinates so the signal is not axis-aligned. Because
//! the model is Gaussian, its population covariance is known exactly and
//! returned alongside the sample.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::rng::{self, Seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    pub class_count: usize,
    /// Dimensionality of the class-informative subspace.
    pub signal_dims: usize,
    /// Minimum distance between class centroids.
    pub class_separation: f64,
    pub noise_sigma: f64,
    pub rotate: bool,
    /// Norm of a per-class random offset added to each centroid across all
    /// coordinates. Models a corpus from a neighbouring domain.
    pub domain_shift: f64,
    /// Variance multiplier applied to the signal subspace of the
    /// "finetuned-like" member of [`generate_pair`].
    pub amplification: f64,
    /// Index of the noise draw. Different draws share centroids and
    /// rotation but have independent rows.
    pub draw: u64,
    pub seed: Seed,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 4000,
            d: 64,
            class_count: 4,
            signal_dims: 4,
            class_separation: 6.0,
            noise_sigma: 1.0,
            rotate: true,
            domain_shift: 0.0,
            amplification: 4.0,
            draw: 0,
            seed: Seed(0),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::invalid("synthetic data needs at least 2 classes"));
        }
        if self.n < self.class_count {
            return Err(Error::invalid(format!(
                "{} rows cannot cover {} classes",
                self.n, self.class_count
            )));
        }
        if self.d == 0 || self.signal_dims == 0 || self.signal_dims > self.d {
            return Err(Error::invalid(format!(
                "signal dims {} must be in [1, d = {}]",
                self.signal_dims, self.d
            )));
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return Err(Error::invalid("class separation must be positive"));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise sigma must be positive"));
        }
        if !(self.domain_shift >= 0.0 && self.domain_shift.is_finite()) {
            return Err(Error::invalid("domain shift must be non-negative"));
        }
        if !(self.amplification > 0.0 && self.amplification.is_finite()) {
            return Err(Error::invalid("amplification must be positive"));
        }
        Ok(())
    }
}

/// A generated dataset together with its ground truth.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: EmbeddingDataset,
    /// Orthogonal d×d map `Q`; stored rows are `x · Qᵀ`. `None` when the
    /// signal is axis-aligned.
    pub rotation: Option<DMatrix<f64>>,
    /// C×d centroids before rotation (after any domain shift and
    /// amplification).
    pub centroids: DMatrix<f64>,
    /// Population covariance of the generating model in stored coordinates.
    pub covariance: DMatrix<f64>,
}

impl Synthetic {
    /// The embeddings with the rotation undone.
    pub fn unrotated(&self) -> DMatrix<f64> {
        match &self.rotation {
            Some(q) => self.dataset.embeddings() * q,
            None => self.dataset.embeddings().clone(),
        }
    }
}

pub fn generate(config: &SynthConfig) -> Result<Synthetic> {
    config.validate()?;
    let geometry = Geometry::new(config)?;
    geometry.sample(config, rng::STREAM_NOISE, 1.0, "synthetic")
}

/// A "pretrained-like" and a "finetuned-like" dataset over the same labels
/// and centroids. The second has independent noise and its signal subspace
/// variance multiplied by `amplification`.
pub fn generate_pair(config: &SynthConfig) -> Result<(Synthetic, Synthetic)> {
    config.validate()?;
    let geometry = Geometry::new(config)?;
    let pretrained = geometry.sample(config, rng::STREAM_NOISE, 1.0, "pretrained-like")?;
    let finetuned = geometry.sample(
        config,
        rng::STREAM_NOISE_AMPLIFIED,
        config.amplification.sqrt(),
        "finetuned-like",
    )?;
    Ok((pretrained, finetuned))
}

struct Geometry {
    /// C×d, unrotated.
    centroids: DMatrix<f64>,
    rotation: Option<DMatrix<f64>>,
}

impl Geometry {
    fn new(config: &SynthConfig) -> Result<Self> {
        let c = config.class_count;
        let k = config.signal_dims;
        let signal = place_centroids(c, k, config.class_separation, config.seed)?;
        let mut centroids = DMatrix::zeros(c, config.d);
        centroids.view_mut((0, 0), (c, k)).copy_from(&signal);

        if config.domain_shift > 0.0 {
            let mut rng = config.seed.rng(rng::STREAM_SHIFT);
            for class in 0..c {
                let offset = gaussian_matrix(&mut rng, 1, config.d);
                let norm = offset.norm();
                if norm > 0.0 {
                    let mut row = centroids.row_mut(class);
                    row += offset * (config.domain_shift / norm);
                }
            }
        }

        let rotation = config
            .rotate
            .then(|| random_orthogonal(&mut config.seed.rng(rng::STREAM_ROTATION), config.d));
        Ok(Self {
            centroids,
            rotation,
        })
    }

    fn sample(
        &self,
        config: &SynthConfig,
        stream: u64,
        signal_scale: f64,
        name: &str,
    ) -> Result<Synthetic> {
        let (n, d, c, k) = (config.n, config.d, config.class_count, config.signal_dims);
        let sigma = config.noise_sigma;
        let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
        let mut rng = config.seed.rng(stream | (config.draw << 8));

        let mut x = DMatrix::zeros(n, d);
        for (i, &label) in labels.iter().enumerate() {
            for j in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                x[(i, j)] = self.centroids[(label, j)] + sigma * z;
            }
        }
        let mut centroids = self.centroids.clone();
        if signal_scale != 1.0 {
            x.columns_mut(0, k).scale_mut(signal_scale);
            centroids.columns_mut(0, k).scale_mut(signal_scale);
        }

        // Population covariance: between-class scatter at the realized class
        // proportions plus per-coordinate noise.
        let mut counts = vec![0usize; c];
        for &l in &labels {
            counts[l] += 1;
        }
        let weights: Vec<f64> = counts.iter().map(|&m| m as f64 / n as f64).collect();
        let mut grand = nalgebra::RowDVector::zeros(d);
        for (class, w) in weights.iter().enumerate() {
            grand += centroids.row(class) * *w;
        }
        let mut covariance = DMatrix::zeros(d, d);
        for (class, w) in weights.iter().enumerate() {
            let dev = centroids.row(class) - &grand;
            covariance += dev.transpose() * dev * *w;
        }
        for j in 0..d {
            let scale = if j < k { signal_scale } else { 1.0 };
            covariance[(j, j)] += sigma * sigma * scale * scale;
        }

        let x = match &self.rotation {
            Some(q) => {
                covariance = q * covariance * q.transpose();
                x * q.transpose()
            }
            None => x,
        };
        let dataset = EmbeddingDataset::new(name, x, labels, c)?;
        Ok(Synthetic {
            dataset,
            rotation: self.rotation.clone(),
            centroids,
            covariance,
        })
    }
}

/// C centroids in `k` dimensions with pairwise distance at least `s`.
///
/// When `k ≥ C − 1` the centroids form a regular simplex with edge exactly
/// `s`, randomly oriented inside the k-dimensional subspace. Otherwise
/// seeded Gaussian points are centered and scaled so their closest pair is
/// `s` apart.
fn place_centroids(c: usize, k: usize, s: f64, seed: Seed) -> Result<DMatrix<f64>> {
    let mut rng = seed.rng(rng::STREAM_CENTROIDS);
    if k + 1 >= c {
        // Helmert basis of the sum-zero subspace: vertex i of the centered
        // standard simplex has coordinate h_j[i] on axis j. Edge is √2.
        let mut simplex = DMatrix::zeros(c, k);
        for j in 1..c {
            let norm = ((j * (j + 1)) as f64).sqrt();
            for i in 0..c {
                let h = match i.cmp(&j) {
                    std::cmp::Ordering::Less => 1.0,
                    std::cmp::Ordering::Equal => -(j as f64),
                    std::cmp::Ordering::Greater => 0.0,
                };
                simplex[(i, j - 1)] = h / norm * s / std::f64::consts::SQRT_2;
            }
        }
        let mix = random_orthogonal(&mut seed.rng(rng::STREAM_SUBSPACE), k);
        return Ok(simplex * mix.transpose());
    }

    let mut points = gaussian_matrix(&mut rng, c, k);
    let mean = points.row_mean();
    for mut row in points.row_iter_mut() {
        row -= &mean;
    }
    let mut closest = f64::INFINITY;
    for a in 0..c {
        for b in a + 1..c {
            closest = closest.min((points.row(a) - points.row(b)).norm());
        }
    }
    if closest.is_nan() || closest <= 0.0 {
        return Err(Error::Numerical("coincident synthetic centroids".into()));
    }
    Ok(points * (s / closest))
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // Filled row by row so the draw order does not depend on storage order.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of R's diagonal folded into Q.
pub(crate) fn random_orthogonal(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, dim, dim).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pca::fit_pca;

    fn small() -> SynthConfig {
        SynthConfig {
            n: 400,
            d: 12,
            class_count: 3,
            signal_dims: 3,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn labels_are_balanced() {
        for n in [400, 401, 402] {
            let s = generate(&SynthConfig { n, ..small() }).unwrap();
            let sizes = s.dataset.class_sizes();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(hi - lo <= 1, "{sizes:?}");
        }
    }

    #[test]
    fn same_config_same_bits() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let c = generate(&SynthConfig {
            seed: Seed(1),
            ..small()
        })
        .unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn simplex_centroids_have_exact_separation() {
        for (c, k) in [(2, 1), (3, 2), (4, 4), (14, 14)] {
            let pts = place_centroids(c, k, 6.0, Seed(3)).unwrap();
            for a in 0..c {
                for b in a + 1..c {
                    let dist = (pts.row(a) - pts.row(b)).norm();
                    assert!((dist - 6.0).abs() < 1e-9, "{c},{k}: {dist}");
                }
            }
        }
    }

    #[test]
    fn low_dim_centroids_respect_minimum_separation() {
        let pts = place_centroids(10, 2, 3.0, Seed(5)).unwrap();
        let mut closest = f64::INFINITY;
        for a in 0..10 {
            for b in a + 1..10 {
                closest = closest.min((pts.row(a) - pts.row(b)).norm());
            }
        }
        assert!((closest - 3.0).abs() < 1e-9);
    }

    #[test]
    fn rotation_round_trip() {
        let cfg = small();
        let rotated = generate(&cfg).unwrap();
        let plain = generate(&SynthConfig {
            rotate: false,
            ..cfg
        })
        .unwrap();
        let back = rotated.unrotated();
        let err = (back - plain.dataset.embeddings()).abs().max();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn rotation_is_orthogonal() {
        let q = random_orthogonal(&mut Seed(2).rng(0), 8);
        let err = (q.transpose() * &q - DMatrix::<f64>::identity(8, 8))
            .abs()
            .max();
        assert!(err < 1e-12);
    }

    #[test]
    fn near_noiseless_variance_sits_in_centroid_span() {
        for (c, k) in [(4, 4), (3, 6), (5, 2)] {
            let cfg = SynthConfig {
                n: 300,
                d: 10,
                class_count: c,
                signal_dims: k,
                noise_sigma: 1e-6,
                rotate: false,
                ..SynthConfig::default()
            };
            let s = generate(&cfg).unwrap();
            let span = k.min(c - 1);
            let model = fit_pca(s.dataset.embeddings(), span).unwrap();
            let captured: f64 = model.explained_variance_ratio().iter().sum();
            assert!(captured >= 0.999, "{c},{k}: {captured}");
        }
    }

    #[test]
    fn draws_share_geometry_but_not_rows() {
        let a = generate(&small()).unwrap();
        let b = generate(&SynthConfig { draw: 1, ..small() }).unwrap();
        assert_eq!(a.centroids, b.centroids);
        assert_ne!(a.dataset.embeddings(), b.dataset.embeddings());
    }

    #[test]
    fn pair_shares_labels_and_amplifies_signal() {
        let (pre, fine) = generate_pair(&SynthConfig {
            rotate: false,
            ..small()
        })
        .unwrap();
        assert_eq!(pre.dataset.labels(), fine.dataset.labels());
        for j in 0..3 {
            let ratio = fine.covariance[(j, j)] / pre.covariance[(j, j)];
            assert!((ratio - 4.0).abs() < 1e-9);
        }
        assert_eq!(fine.covariance[(5, 5)], pre.covariance[(5, 5)]);
    }

    #[test]
    fn invalid_configs() {
        let base = small();
        for bad in [
            SynthConfig {
                class_count: 1,
                ..base.clone()
            },
            SynthConfig {
                signal_dims: 13,
                ..base.clone()
            },
            SynthConfig {
                signal_dims: 0,
                ..base.clone()
            },
            SynthConfig {
                class_separation: 0.0,
                ..base.clone()
            },
            SynthConfig {
                noise_sigma: -1.0,
                ..base.clone()
            },
            SynthConfig {
                n: 2,
                ..base.clone()
            },
        ] {
            assert!(generate(&bad).is_err(), "{bad:?}");
        }
    }
}
