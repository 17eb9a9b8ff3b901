//! Figure-level experiments: compression curves under three feature
//! scenarios, the few-component accuracy gap, PCA sample-size sweeps and
//! variance-ratio reports.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{probe_accuracy, TrainConfig};
use crate::dataset::{check_compatible, EmbeddingDataset};
use crate::error::{Error, Result};
use crate::parallel;
use crate::pca::{self, VarianceRatioReport};
use crate::rng::Seed;
use crate::selection::random_dim_subsets_accuracy;

/// Where the features of a compression curve come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// PCA fitted on the task's own training rows.
    PcaInDomain,
    /// PCA fitted on a separate corpus.
    PcaExternal,
    /// Uniformly drawn subsets of the original columns.
    RandomDims,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::PcaInDomain,
        Scenario::PcaExternal,
        Scenario::RandomDims,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::PcaInDomain => "pca_in_domain",
            Scenario::PcaExternal => "pca_external",
            Scenario::RandomDims => "random_dims",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "pca_in_domain" => Ok(Scenario::PcaInDomain),
            "pca_external" => Ok(Scenario::PcaExternal),
            "random_dims" | "random" => Ok(Scenario::RandomDims),
            other => Err(Error::invalid(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub mean_accuracy: f64,
    /// Spread over random draws; 0 for PCA scenarios.
    pub std: f64,
}

/// Probe accuracy as a function of the number of retained features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionCurve {
    pub scenario: Scenario,
    /// Name of the corpus the PCA was fitted on; `None` for random subsets.
    pub pca_source: Option<String>,
    pub points: Vec<CurvePoint>,
}

impl CompressionCurve {
    pub fn accuracy_at(&self, k: usize) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.k == k)
            .map(|p| p.mean_accuracy)
    }
}

/// Inputs shared by every compression-curve scenario.
#[derive(Debug, Clone, Copy)]
pub struct CurveSettings<'a> {
    pub ks: &'a [usize],
    /// Corpus for the external PCA scenario.
    pub pca_source: Option<&'a EmbeddingDataset>,
    /// Random draws per point in the random-subset scenario.
    pub repeats: usize,
    pub seed: Seed,
    pub config: &'a TrainConfig,
}

pub(crate) fn check_increasing(values: &[usize], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(format!("{what} must not be empty")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!(
            "{what} must be strictly increasing"
        )));
    }
    if values[0] == 0 {
        return Err(Error::invalid(format!("{what} must be positive")));
    }
    Ok(())
}

pub fn compression_curve(
    train: &EmbeddingDataset,
    test: &EmbeddingDataset,
    scenario: Scenario,
    settings: &CurveSettings<'_>,
) -> Result<CompressionCurve> {
    check_compatible(train, test)?;
    let ks = settings.ks;
    check_increasing(ks, "ks")?;
    let max_k = *ks.last().expect("checked non-empty");
    if max_k > train.n_dims() {
        return Err(Error::invalid(format!(
            "k = {max_k} exceeds the {} available columns",
            train.n_dims()
        )));
    }

    let fit_source = match scenario {
        Scenario::PcaInDomain => Some(train),
        Scenario::PcaExternal => {
            let source = settings.pca_source.ok_or_else(|| {
                Error::invalid("the external PCA scenario needs a PCA source corpus")
            })?;
            if source.n_dims() != train.n_dims() {
                return Err(Error::mismatch(format!(
                    "PCA source {} has {} columns, datasets have {}",
                    source.name(),
                    source.n_dims(),
                    train.n_dims()
                )));
            }
            Some(source)
        }
        Scenario::RandomDims => None,
    };

    let points: Vec<CurvePoint> = match fit_source {
        Some(source) => {
            let model = pca::fit_dataset(source, max_k)?;
            let projected_train = model.transform_dataset(train, max_k)?;
            let projected_test = model.transform_dataset(test, max_k)?;
            let leading: Vec<usize> = (0..max_k).collect();
            parallel::map(ks.to_vec(), |k| {
                let acc = probe_accuracy(
                    &projected_train.select_dims(&leading[..k])?,
                    &projected_test.select_dims(&leading[..k])?,
                    settings.config,
                )?;
                Ok(CurvePoint {
                    k,
                    mean_accuracy: acc,
                    std: 0.0,
                })
            })
            .into_iter()
            .collect::<Result<_>>()?
        }
        None => ks
            .iter()
            .map(|&k| {
                let stats = random_dim_subsets_accuracy(
                    train,
                    test,
                    k,
                    settings.repeats,
                    settings.seed,
                    settings.config,
                )?;
                Ok(CurvePoint {
                    k,
                    mean_accuracy: stats.mean,
                    std: stats.std,
                })
            })
            .collect::<Result<_>>()?,
    };

    Ok(CompressionCurve {
        scenario,
        pca_source: fit_source.map(|s| s.name().to_string()),
        points,
    })
}

/// `reference − accuracy(k)`, in percentage points.
pub fn few_component_gap(
    curve: &CompressionCurve,
    k: usize,
    reference_accuracy: f64,
) -> Result<f64> {
    let acc = curve
        .accuracy_at(k)
        .ok_or_else(|| Error::invalid(format!("curve has no point at k = {k}")))?;
    Ok((reference_accuracy - acc) * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub size: usize,
    pub accuracy: f64,
}

/// Accuracy of a `k`-component PCA probe as the PCA fitting sample grows.
/// Each size fits PCA on a seeded subsample of `corpus`.
#[allow(clippy::too_many_arguments)]
pub fn sample_size_sweep(
    corpus: &EmbeddingDataset,
    train: &EmbeddingDataset,
    test: &EmbeddingDataset,
    k: usize,
    sizes: &[usize],
    seed: Seed,
    config: &TrainConfig,
) -> Result<Vec<SweepPoint>> {
    check_compatible(train, test)?;
    if corpus.n_dims() != train.n_dims() {
        return Err(Error::mismatch(format!(
            "corpus {} has {} columns, datasets have {}",
            corpus.name(),
            corpus.n_dims(),
            train.n_dims()
        )));
    }
    check_increasing(sizes, "sizes")?;
    let largest = *sizes.last().expect("checked non-empty");
    if largest > corpus.n_rows() {
        return Err(Error::invalid(format!(
            "sample size {largest} exceeds the corpus's {} rows",
            corpus.n_rows()
        )));
    }
    if k == 0 || k > corpus.n_dims() {
        return Err(Error::invalid(format!(
            "k = {k} must be in [1, {}]",
            corpus.n_dims()
        )));
    }
    parallel::map(sizes.to_vec(), |size| {
        let sample = corpus.subsample(size, seed)?;
        let model = pca::fit_dataset(&sample, k)?;
        let accuracy = probe_accuracy(
            &model.transform_dataset(train, k)?,
            &model.transform_dataset(test, k)?,
            config,
        )?;
        Ok(SweepPoint { size, accuracy })
    })
    .into_iter()
    .collect()
}

/// Variance ratios of two corpora together with both spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRatioAnalysis {
    pub finetuned: String,
    pub pretrained: String,
    /// Task class count, for comparison against the crossover.
    pub class_count: Option<usize>,
    pub finetuned_ratio: Vec<f64>,
    pub pretrained_ratio: Vec<f64>,
    pub report: VarianceRatioReport,
}

/// Fits full-rank PCA to each corpus and compares the first `n` components.
pub fn variance_ratio_report(
    finetuned: &EmbeddingDataset,
    pretrained: &EmbeddingDataset,
    n: usize,
    class_count: Option<usize>,
) -> Result<VarianceRatioAnalysis> {
    if finetuned.n_dims() != pretrained.n_dims() {
        return Err(Error::mismatch(format!(
            "{} has {} columns, {} has {}",
            finetuned.name(),
            finetuned.n_dims(),
            pretrained.name(),
            pretrained.n_dims()
        )));
    }
    let full_rank = |data: &EmbeddingDataset| data.n_rows().min(data.n_dims());
    let ft = pca::fit_dataset(finetuned, full_rank(finetuned))?;
    let pt = pca::fit_dataset(pretrained, full_rank(pretrained))?;
    let report = pca::variance_ratios(&ft, &pt, n)?;
    Ok(VarianceRatioAnalysis {
        finetuned: finetuned.name().to_string(),
        pretrained: pretrained.name().to_string(),
        class_count,
        finetuned_ratio: ft.explained_variance_ratio()[..n].to_vec(),
        pretrained_ratio: pt.explained_variance_ratio()[..n].to_vec(),
        report,
    })
}

/// Powers of two below `d`, followed by `d` itself.
pub fn default_ks(d: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = std::iter::successors(Some(1usize), |k| k.checked_mul(2))
        .take_while(|&k| k < d)
        .collect();
    ks.push(d);
    ks
}
