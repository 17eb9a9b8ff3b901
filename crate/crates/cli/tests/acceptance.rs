//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use embedscope::analysis::{compression_curve, variance_ratio_report, CurveSettings, Scenario};
use embedscope::classifier::probe_accuracy;
use embedscope::io::{decode_dataset, encode_dataset};
use embedscope::pca::{crossover_index, fit_pca};
use embedscope::selection::{
    greedy_select, per_neuron_accuracies, random_baseline_accuracy, random_dim_subsets_accuracy,
    NeuronHistogram,
};
use embedscope::synth::{generate, generate_pair, SynthConfig};
use embedscope::{AnalysisReport, EmbeddingDataset, Seed, TrainConfig};
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "PCA matches covariance eigendecomposition",
            Some(secs(5)),
            pca_oracle,
        ),
        (
            "probe gradient matches central differences",
            Some(secs(5)),
            gradient_check,
        ),
        ("random baseline arithmetic", None, random_baseline),
        (
            "crossover index on reference sequences",
            None,
            crossover_fixtures,
        ),
        (
            "few PCA components carry the task signal",
            Some(secs(120)),
            manifold,
        ),
        (
            "variance-ratio crossover equals class count",
            Some(secs(60)),
            planted_crossover,
        ),
        (
            "greedy selection matches naive rescan",
            Some(secs(60)),
            greedy_oracle,
        ),
        (
            "full-rank PCA probe matches full probe",
            None,
            full_rank_invariance,
        ),
        ("determinism and lossless round trips", None, determinism),
        (
            "per-dimension accuracy histogram is dense",
            None,
            histogram_shape,
        ),
    ];
    let mut failures = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > *limit {
                outcome.passed = false;
                outcome.detail += &format!("; took {elapsed:.1?}, limit {limit:?}");
            }
        }
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!(
            "{status} [{:>2}] {name} ({:.2}s): {}",
            i + 1,
            elapsed.as_secs_f64(),
            outcome.detail
        );
        if !outcome.passed {
            failures += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn pca_oracle() -> Outcome {
    let mut rng = Seed(11).rng(0);
    let mut worst_value = 0.0f64;
    let mut worst_ortho = 0.0f64;
    for case in 0..20 {
        let d = rng.random_range(2..=20);
        let n = rng.random_range(d + 1..=100);
        let x = gaussian(n, d, 100 + case);
        let model = fit_pca(&x, d).unwrap();
        let (values, _) = jacobi_eigen(&sample_covariance(&x));
        for (got, want) in model.explained_variance().iter().zip(&values) {
            worst_value = worst_value.max((got - want).abs() / want.abs());
        }
        worst_ortho = worst_ortho.max(orthonormality_error(model.components()));
    }
    Outcome::new(
        worst_value < 1e-8 && worst_ortho < 1e-8,
        format!("max relative error {worst_value:.1e}, max orthonormality error {worst_ortho:.1e}"),
    )
}

fn gradient_check() -> Outcome {
    let worst = (0..25).map(gradient_check_error).fold(0.0, f64::max);
    Outcome::new(
        worst < 1e-5,
        format!("max relative error {worst:.1e} over 25 points"),
    )
}

fn random_baseline() -> Outcome {
    let expected = [(2, "50.00"), (4, "25.00"), (14, "7.14")];
    let got: Vec<String> = expected
        .iter()
        .map(|&(c, _)| format!("{:.2}", 100.0 * random_baseline_accuracy(c).unwrap()))
        .collect();
    let passed = expected
        .iter()
        .zip(&got)
        .all(|((_, want), have)| want == have);
    Outcome::new(passed, format!("C=2,4,14 -> {}%", got.join("%, ")))
}

fn crossover_fixtures() -> Outcome {
    let a = crossover_index(&[1.25, 0.9, 1.1]).unwrap();
    let b = crossover_index(&[1.3, 3.7, 2.0, 1.5, 0.76]).unwrap();
    Outcome::new(
        a == 1 && b == 4,
        format!("[1.25, 0.9, ..] -> {a}, [1.3, .., 0.76] -> {b}"),
    )
}

fn default_fixture(seed: u64, rotate: bool) -> (EmbeddingDataset, EmbeddingDataset) {
    let synth = generate(&SynthConfig {
        rotate,
        seed: Seed(seed),
        ..SynthConfig::default()
    })
    .unwrap();
    let split = synth.dataset.stratified_split(0.2, Seed(seed)).unwrap();
    (split.train, split.test)
}

fn manifold() -> Outcome {
    let config = TrainConfig::default();
    let (mut a, mut b, mut c) = (0, 0, 0);
    let mut notes = Vec::new();
    for seed in 0..5 {
        let (train, test) = default_fixture(seed, true);
        let full = probe_accuracy(&train, &test, &config).unwrap();
        let settings = CurveSettings {
            ks: &[4],
            pca_source: None,
            repeats: 1,
            seed: Seed(seed),
            config: &config,
        };
        let pca4 = compression_curve(&train, &test, Scenario::PcaInDomain, &settings)
            .unwrap()
            .points[0]
            .mean_accuracy;
        let random4 = random_dim_subsets_accuracy(&train, &test, 4, 10, Seed(seed), &config)
            .unwrap()
            .mean;

        let (utrain, utest) = default_fixture(seed, false);
        let ufull = probe_accuracy(&utrain, &utest, &config).unwrap();
        let natural = greedy_select(&utrain, &utest, 4, 5, Seed(seed), &config)
            .unwrap()
            .test_accuracy_per_step[3];

        a += usize::from(pca4 >= full - 0.01);
        b += usize::from(natural >= ufull - 0.01);
        c += usize::from(pca4 - random4 >= 0.10);
        notes.push(format!(
            "seed {seed}: full {:.1} pca4 {:.1} natural {:.1}/{:.1} random4 {:.1}",
            100.0 * full,
            100.0 * pca4,
            100.0 * natural,
            100.0 * ufull,
            100.0 * random4
        ));
    }
    Outcome::new(
        a >= 4 && b >= 4 && c >= 4,
        format!("(a) {a}/5 (b) {b}/5 (c) {c}/5; {}", notes.join("; ")),
    )
}

fn planted_crossover() -> Outcome {
    let mut passed = true;
    let mut notes = Vec::new();
    for k in [2, 4, 14] {
        let mut crossovers = Vec::new();
        for seed in 0..5 {
            let (pretrained, finetuned) = generate_pair(&SynthConfig {
                class_count: k,
                signal_dims: k,
                seed: Seed(seed),
                ..SynthConfig::default()
            })
            .unwrap();
            let analysis =
                variance_ratio_report(&finetuned.dataset, &pretrained.dataset, 20, Some(k))
                    .unwrap();
            crossovers.push(analysis.report.crossover);
        }
        let hits = crossovers.iter().filter(|&&m| m == k).count();
        passed &= hits >= 4;
        notes.push(format!("k={k}: {crossovers:?}"));
    }
    Outcome::new(passed, notes.join("; "))
}

fn greedy_oracle() -> Outcome {
    let config = TrainConfig::default();
    let mut matches = 0;
    for fixture in 0..10u64 {
        let d = 12 - (fixture as usize % 5);
        let n = 1 + (fixture as usize % 3);
        let synth = generate(&SynthConfig {
            n: 150,
            d,
            class_count: 2 + (fixture as usize % 4),
            signal_dims: 3,
            class_separation: 2.0,
            rotate: fixture % 3 != 0,
            seed: Seed(1000 + fixture),
            ..SynthConfig::default()
        })
        .unwrap();
        let split = synth.dataset.stratified_split(0.2, Seed(fixture)).unwrap();
        let fast = greedy_select(&split.train, &split.test, n, 5, Seed(fixture), &config).unwrap();
        let naive = naive_greedy(&split.train, n, 5, Seed(fixture), &config);
        matches += usize::from(fast.dims == naive.0 && fast.cv_scores == naive.1);
    }
    Outcome::new(matches == 10, format!("{matches}/10 fixtures identical"))
}

fn full_rank_invariance() -> Outcome {
    let config = TrainConfig::default();
    let mut fixtures: Vec<(String, EmbeddingDataset, EmbeddingDataset)> = Vec::new();
    for seed in 0..5 {
        for rotate in [true, false] {
            let (train, test) = default_fixture(seed, rotate);
            fixtures.push((format!("default/{seed}/rot={rotate}"), train, test));
        }
    }
    for k in [2, 14] {
        let (_, finetuned) = generate_pair(&SynthConfig {
            class_count: k,
            signal_dims: k,
            ..SynthConfig::default()
        })
        .unwrap();
        let split = finetuned.dataset.stratified_split(0.2, Seed(0)).unwrap();
        fixtures.push((format!("pair/C={k}"), split.train, split.test));
    }
    let (train, test) = graded_leak_fixture(4000, 64, 17, 6.0, 0.985, 0);
    fixtures.push(("graded-leak".into(), train, test));

    let mut worst = (0.0f64, String::new());
    for (name, train, test) in &fixtures {
        let d = train.n_dims();
        let full = probe_accuracy(train, test, &config).unwrap();
        let settings = CurveSettings {
            ks: &[d],
            pca_source: None,
            repeats: 1,
            seed: Seed(0),
            config: &config,
        };
        let at_d = compression_curve(train, test, Scenario::PcaInDomain, &settings)
            .unwrap()
            .points[0]
            .mean_accuracy;
        let gap = 100.0 * (at_d - full).abs();
        if gap >= worst.0 {
            worst = (gap, name.clone());
        }
    }
    Outcome::new(
        worst.0 < 0.5,
        format!(
            "max |pca(k=D) - full| = {:.3} points ({}) over {} fixtures",
            worst.0,
            worst.1,
            fixtures.len()
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_embedscope"))
        .current_dir(dir)
        .arg("--no-timestamp")
        .args(args)
        .output()
        .map(|out| out.status.success())
        .unwrap_or(false)
}

/// Runs every subcommand in `dir` and returns the produced files, sorted.
fn cli_session(dir: &Path) -> Option<Vec<(String, Vec<u8>)>> {
    let script: [&[&str]; 12] = [
        &[
            "synth",
            "--out",
            "pt.embd",
            "--finetuned-out",
            "ft.embd",
            "--n",
            "600",
            "--d",
            "16",
            "--seed",
            "3",
            "--report",
            "synth.json",
        ],
        &[
            "synth",
            "--out",
            "ext.embd",
            "--n",
            "600",
            "--d",
            "16",
            "--domain-shift",
            "6",
            "--draw",
            "1",
            "--seed",
            "3",
        ],
        &[
            "split",
            "--input",
            "ft.embd",
            "--train-out",
            "train.embd",
            "--test-out",
            "test.embd",
            "--seed",
            "3",
            "--report",
            "split.json",
        ],
        &[
            "pca-fit",
            "--input",
            "train.embd",
            "--k",
            "8",
            "--out",
            "model.pcam",
            "--report",
            "pca.json",
        ],
        &[
            "curve",
            "--train",
            "train.embd",
            "--test",
            "test.embd",
            "--pca-source",
            "ext.embd",
            "--ks",
            "1,2,4,16",
            "--repeats",
            "4",
            "--seed",
            "3",
            "--out",
            "curve.json",
            "--csv",
            "curve.csv",
        ],
        &[
            "variance-ratio",
            "--a",
            "ft.embd",
            "--b",
            "pt.embd",
            "--top",
            "10",
            "--classes",
            "4",
            "--out",
            "ratio.json",
        ],
        &[
            "salient",
            "--train",
            "train.embd",
            "--test",
            "test.embd",
            "--n",
            "3",
            "--folds",
            "3",
            "--seed",
            "3",
            "--out",
            "salient.json",
        ],
        &[
            "histogram",
            "--train",
            "train.embd",
            "--test",
            "test.embd",
            "--bins",
            "10",
            "--out",
            "hist.json",
        ],
        &[
            "sweep",
            "--corpus",
            "ext.embd",
            "--train",
            "train.embd",
            "--test",
            "test.embd",
            "--k",
            "4",
            "--sizes",
            "50,200,600",
            "--seed",
            "3",
            "--out",
            "sweep.json",
        ],
        &[
            "curve",
            "--train",
            "train.embd",
            "--test",
            "test.embd",
            "--scenario",
            "random",
            "--ks",
            "2,8",
            "--seed",
            "4",
            "--out",
            "curve-random.json",
        ],
        &[
            "salient",
            "--train",
            "train.embd",
            "--test",
            "test.embd",
            "--n",
            "2",
            "--folds",
            "4",
            "--seed",
            "9",
            "--optimizer",
            "gd",
            "--max-iter",
            "200",
            "--out",
            "salient-gd.json",
        ],
        &[
            "histogram",
            "--train",
            "train.embd",
            "--test",
            "test.embd",
            "--l2",
            "0.01",
            "--out",
            "hist-l2.json",
        ],
    ];
    for args in script {
        if !run_cli(dir, args) {
            eprintln!("command failed: {args:?}");
            return None;
        }
    }
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .ok()?
        .map(|entry| {
            let entry = entry.unwrap();
            (
                entry.file_name().to_string_lossy().into_owned(),
                std::fs::read(entry.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    Some(files)
}

fn determinism() -> Outcome {
    let mut problems = Vec::new();

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (first, second) = (cli_session(a.path()), cli_session(b.path()));
    let reports = match (&first, &second) {
        (Some(x), Some(y)) => {
            for ((name, bytes), (_, other)) in x.iter().zip(y) {
                if bytes != other {
                    problems.push(format!("{name} differs between runs"));
                }
            }
            if x.len() != y.len() {
                problems.push("runs produced different file sets".into());
            }
            x.iter().filter(|(name, _)| name.ends_with(".json")).count()
        }
        _ => {
            problems.push("a CLI command failed".into());
            0
        }
    };
    if let Some(files) = &first {
        for (name, bytes) in files.iter().filter(|(n, _)| n.ends_with(".json")) {
            let text = String::from_utf8_lossy(bytes);
            match AnalysisReport::from_json(&text) {
                Ok(report) if report.to_json().unwrap() == text => {}
                Ok(_) => problems.push(format!("{name} does not re-serialize identically")),
                Err(e) => problems.push(format!("{name}: {e}")),
            }
        }
    }

    let synth = generate(&SynthConfig::default()).unwrap();
    let bytes = encode_dataset(&synth.dataset).unwrap();
    let back = decode_dataset(Path::new("default.embd"), &bytes).unwrap();
    let bitwise = back
        .embeddings()
        .iter()
        .zip(synth.dataset.embeddings().iter())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    if !bitwise || back.labels() != synth.dataset.labels() {
        problems.push("binary round trip is not bitwise".into());
    }

    let detail = if problems.is_empty() {
        format!("{reports} reports byte-identical across runs; binary and JSON round trips exact")
    } else {
        problems.join("; ")
    };
    Outcome::new(problems.is_empty(), detail)
}

fn histogram_shape() -> Outcome {
    let planted = 17;
    let (train, test) = graded_leak_fixture(10_000, 64, planted, 6.0, 0.985, 0);
    let config = TrainConfig::default();
    let per_neuron = per_neuron_accuracies(&train, &test, 20, &config).unwrap();
    let peak = per_neuron.peak().unwrap();
    let peak_acc = per_neuron.accuracies[peak];
    let chance = random_baseline_accuracy(2).unwrap();
    let hist =
        NeuronHistogram::new(per_neuron.accuracies.clone(), 20, Some((chance, peak_acc))).unwrap();
    let empty = hist.counts.iter().filter(|&&c| c == 0).count();
    Outcome::new(
        peak == planted && empty == 0,
        format!(
            "peak at dim {peak} ({:.2}%), {empty} empty of 20 bins over [{:.0}%, {:.2}%], counts {:?}",
            100.0 * peak_acc,
            100.0 * chance,
            100.0 * peak_acc,
            hist.counts
        ),
    )
}
