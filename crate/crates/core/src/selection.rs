//! Salient-neuron machinery: stratified k-fold scoring of column subsets,
//! best-single-column search, greedy forward selection, per-column probe
//! accuracies and random baselines.
//!
//! Every argmax breaks ties toward the smallest column index. Candidate and
//! fold evaluations are independent and may run in parallel; results are
//! reduced in a fixed order so they never depend on scheduling.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::classifier::{probe_accuracy, TrainConfig};
use crate::dataset::{check_compatible, check_dims, EmbeddingDataset};
use crate::error::{Error, Result};
use crate::parallel;
use crate::rng::{self, Seed};

/// Stratified assignment of rows to folds.
///
/// Rows of each class are shuffled and dealt round-robin, continuing the
/// deal across classes, so per-fold class counts differ by at most one and
/// fold sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    folds: usize,
    seed: Seed,
    assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn stratified(data: &EmbeddingDataset, folds: usize, seed: Seed) -> Result<Self> {
        if folds < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 folds, got {folds}"
            )));
        }
        if folds > data.n_rows() {
            return Err(Error::invalid(format!(
                "{folds} folds exceed {} rows",
                data.n_rows()
            )));
        }
        let groups = data.rows_by_class();
        if let Some((class, g)) = groups.iter().enumerate().find(|(_, g)| g.len() < 2) {
            return Err(Error::invalid(format!(
                "class {class} has {} rows; every training fold must see each class",
                g.len()
            )));
        }
        let mut rng = seed.rng(rng::STREAM_FOLDS);
        let mut assignment = vec![0; data.n_rows()];
        let mut dealt = 0;
        for mut group in groups {
            group.shuffle(&mut rng);
            for row in group {
                assignment[row] = dealt % folds;
                dealt += 1;
            }
        }
        Ok(Self {
            folds,
            seed,
            assignment,
        })
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    /// Fold index of every row.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// (training rows, held-out rows) for one fold, both ascending.
    pub fn rows(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut held_out = Vec::new();
        for (row, &f) in self.assignment.iter().enumerate() {
            if f == fold {
                held_out.push(row);
            } else {
                train.push(row);
            }
        }
        (train, held_out)
    }

    /// Unweighted mean over folds of held-out accuracy for probes trained on
    /// `dims`.
    pub fn score(
        &self,
        data: &EmbeddingDataset,
        dims: &[usize],
        config: &TrainConfig,
    ) -> Result<f64> {
        if data.n_rows() != self.assignment.len() {
            return Err(Error::mismatch(format!(
                "fold plan covers {} rows, dataset has {}",
                self.assignment.len(),
                data.n_rows()
            )));
        }
        let restricted = data.select_dims(dims)?;
        let per_fold = parallel::map((0..self.folds).collect(), |fold| {
            let (train_rows, held_out) = self.rows(fold);
            probe_accuracy(
                &restricted.select_rows(&train_rows),
                &restricted.select_rows(&held_out),
                config,
            )
        });
        let mut total = 0.0;
        for acc in per_fold {
            total += acc?;
        }
        Ok(total / self.folds as f64)
    }
}

/// Mean held-out accuracy of a `folds`-fold stratified cross-validation of
/// a probe restricted to `dims`.
pub fn kfold_cv_accuracy(
    train: &EmbeddingDataset,
    dims: &[usize],
    folds: usize,
    seed: Seed,
    config: &TrainConfig,
) -> Result<f64> {
    check_dims(dims, train.n_dims())?;
    FoldPlan::stratified(train, folds, seed)?.score(train, dims, config)
}

/// Column with the best single-column CV score, and that score.
pub fn best_single_neuron(
    train: &EmbeddingDataset,
    folds: usize,
    seed: Seed,
    config: &TrainConfig,
) -> Result<(usize, f64)> {
    let plan = FoldPlan::stratified(train, folds, seed)?;
    let candidates: Vec<usize> = (0..train.n_dims()).collect();
    best_extension(train, &plan, &[], &candidates, config)
}

/// Scores `chosen + [c]` for every candidate and returns the best one.
fn best_extension(
    data: &EmbeddingDataset,
    plan: &FoldPlan,
    chosen: &[usize],
    candidates: &[usize],
    config: &TrainConfig,
) -> Result<(usize, f64)> {
    let scores = parallel::map(candidates.to_vec(), |c| {
        let mut dims = chosen.to_vec();
        dims.push(c);
        plan.score(data, &dims, config)
    });
    let mut best: Option<(usize, f64)> = None;
    for (&c, score) in candidates.iter().zip(scores) {
        let score = score?;
        // Candidates are ascending, so strict improvement keeps the
        // smallest index on ties.
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((c, score));
        }
    }
    best.ok_or_else(|| Error::invalid("no candidate columns"))
}

/// Greedily chosen columns with per-step scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub dims: Vec<usize>,
    /// Mean CV accuracy after adding each column.
    pub cv_scores: Vec<f64>,
    /// Test accuracy of a probe trained on the full training set restricted
    /// to the first t+1 chosen columns.
    pub test_accuracy_per_step: Vec<f64>,
    pub folds: usize,
    pub seed: Seed,
}

/// Forward selection: each step adds the column that maximizes the CV
/// accuracy of a probe trained jointly on all chosen columns. One fold
/// plan is shared by every step.
pub fn greedy_select(
    train: &EmbeddingDataset,
    test: &EmbeddingDataset,
    n: usize,
    folds: usize,
    seed: Seed,
    config: &TrainConfig,
) -> Result<SelectionResult> {
    check_compatible(train, test)?;
    if n == 0 || n > train.n_dims() {
        return Err(Error::invalid(format!(
            "cannot select {n} of {} columns",
            train.n_dims()
        )));
    }
    let plan = FoldPlan::stratified(train, folds, seed)?;
    let mut dims = Vec::with_capacity(n);
    let mut cv_scores = Vec::with_capacity(n);
    let mut test_accuracy_per_step = Vec::with_capacity(n);
    let mut remaining: Vec<usize> = (0..train.n_dims()).collect();
    for _ in 0..n {
        let (best, score) = best_extension(train, &plan, &dims, &remaining, config)?;
        remaining.retain(|&c| c != best);
        dims.push(best);
        cv_scores.push(score);
        test_accuracy_per_step.push(probe_accuracy(
            &train.select_dims(&dims)?,
            &test.select_dims(&dims)?,
            config,
        )?);
    }
    Ok(SelectionResult {
        dims,
        cv_scores,
        test_accuracy_per_step,
        folds,
        seed,
    })
}

/// Test accuracy of a one-column probe for every column, with a histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronHistogram {
    pub accuracies: Vec<f64>,
    /// `counts.len() + 1` ascending edges; the last bin is closed.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl NeuronHistogram {
    /// Bins `accuracies` into `bins` equal-width bins over `range`, or over
    /// the observed range when `None`. Values outside the range are not
    /// counted.
    pub fn new(accuracies: Vec<f64>, bins: usize, range: Option<(f64, f64)>) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("histogram needs at least one bin"));
        }
        let (lo, hi) = match range {
            Some(r) => r,
            None => accuracies
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| {
                    (lo.min(a), hi.max(a))
                }),
        };
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::invalid("histogram range is empty"));
        }
        let width = (hi - lo) / bins as f64;
        let bin_edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + width * i as f64 })
            .collect();
        let counts = histogram_counts(&accuracies, &bin_edges);
        Ok(Self {
            accuracies,
            bin_edges,
            counts,
        })
    }

    /// Column with the highest accuracy (smallest index on ties).
    pub fn peak(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &a) in self.accuracies.iter().enumerate() {
            if best.is_none_or(|b| a > self.accuracies[b]) {
                best = Some(i);
            }
        }
        best
    }
}

fn histogram_counts(values: &[f64], edges: &[f64]) -> Vec<usize> {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let mut counts = vec![0; bins];
    for &v in values {
        if v < lo || v > hi {
            continue;
        }
        // Upper edges are exclusive except for the last bin.
        let bin = edges[1..bins].partition_point(|&e| e <= v);
        counts[bin] += 1;
    }
    counts
}

/// Trains a one-column probe per column of `train` and evaluates it on
/// `test`. The histogram uses `bins` bins over the observed range.
pub fn per_neuron_accuracies(
    train: &EmbeddingDataset,
    test: &EmbeddingDataset,
    bins: usize,
    config: &TrainConfig,
) -> Result<NeuronHistogram> {
    check_compatible(train, test)?;
    let accuracies = parallel::map((0..train.n_dims()).collect(), |d| {
        probe_accuracy(&train.select_dims(&[d])?, &test.select_dims(&[d])?, config)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    NeuronHistogram::new(accuracies, bins, None)
}

/// Expected accuracy of uniform random guessing over `class_count` classes.
pub fn random_baseline_accuracy(class_count: usize) -> Result<f64> {
    if class_count < 2 {
        return Err(Error::invalid(format!(
            "random baseline needs at least 2 classes, got {class_count}"
        )));
    }
    Ok(1.0 / class_count as f64)
}

/// Mean and sample standard deviation of a statistic over repeated draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample standard deviation; a single value has std 0.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Test accuracy of probes on `repeats` uniformly drawn `k`-column subsets.
pub fn random_dim_subsets_accuracy(
    train: &EmbeddingDataset,
    test: &EmbeddingDataset,
    k: usize,
    repeats: usize,
    seed: Seed,
    config: &TrainConfig,
) -> Result<MeanStd> {
    check_compatible(train, test)?;
    let d = train.n_dims();
    if k == 0 || k > d {
        return Err(Error::invalid(format!("cannot draw {k} of {d} columns")));
    }
    if repeats == 0 {
        return Err(Error::invalid("need at least one random draw"));
    }
    let mut rng = seed.rng(rng::STREAM_RANDOM_DIMS);
    let subsets: Vec<Vec<usize>> = (0..repeats)
        .map(|_| {
            let mut dims = index::sample(&mut rng, d, k).into_vec();
            dims.sort_unstable();
            dims
        })
        .collect();
    let accuracies = parallel::map(subsets, |dims| {
        probe_accuracy(
            &train.select_dims(&dims)?,
            &test.select_dims(&dims)?,
            config,
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(MeanStd::of(&accuracies))
}

/// One row of the salient-neuron summary table: chance, all columns, best
/// single column, best `n` columns and the "natural" subset whose size
/// equals the class count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientSummary {
    pub class_count: usize,
    pub random_baseline: f64,
    pub all_dims: f64,
    pub best_1: f64,
    pub best_n: f64,
    pub n: usize,
    /// `None` when the class count exceeds the column count.
    pub natural: Option<f64>,
    pub selection: SelectionResult,
}

pub fn salient_summary(
    train: &EmbeddingDataset,
    test: &EmbeddingDataset,
    n: usize,
    folds: usize,
    seed: Seed,
    config: &TrainConfig,
) -> Result<SalientSummary> {
    check_compatible(train, test)?;
    let c = train.class_count();
    let d = train.n_dims();
    if n == 0 || n > d {
        return Err(Error::invalid(format!("cannot select {n} of {d} columns")));
    }
    let steps = if c <= d { n.max(c) } else { n };
    let selection = greedy_select(train, test, steps, folds, seed, config)?;
    let at = |size: usize| selection.test_accuracy_per_step[size - 1];
    Ok(SalientSummary {
        class_count: c,
        random_baseline: random_baseline_accuracy(c)?,
        all_dims: probe_accuracy(train, test, config)?,
        best_1: at(1),
        best_n: at(n),
        n,
        natural: (c <= d).then(|| at(c)),
        selection,
    })
}
