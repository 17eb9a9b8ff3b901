use std::path::Path;

use embedscope::analysis::{
    compression_curve, default_ks, sample_size_sweep, variance_ratio_report, CompressionCurve,
    CurveSettings, Scenario,
};
use embedscope::report::{
    CompressionCurves, LabelMapEntry, PcaSummary, ReportInputs, SampleSweep, SplitSummary,
    SynthSummary,
};
use embedscope::selection::{per_neuron_accuracies, salient_summary};
use embedscope::synth::{generate, generate_pair};
use embedscope::{io, pca, AnalysisReport, EmbeddingDataset, Payload, Result, Seed, SynthConfig};
use serde_json::json;

use crate::{
    Cli, Command, CurveArgs, HistogramArgs, PcaFitArgs, SalientArgs, SplitArgs, SweepArgs,
    SynthArgs, VarianceRatioArgs,
};

struct Context {
    no_timestamp: bool,
    label_column: String,
    datasets: Vec<String>,
    label_maps: Vec<LabelMapEntry>,
}

impl Context {
    fn load(&mut self, path: &Path) -> Result<EmbeddingDataset> {
        let name = path.display().to_string();
        self.datasets.push(name.clone());
        if path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("csv"))
        {
            let (data, labels) = io::read_csv_dataset(path, &self.label_column)?;
            self.label_maps.push(LabelMapEntry {
                dataset: name,
                labels,
            });
            Ok(data)
        } else {
            io::read_dataset(path)
        }
    }

    fn report(
        self,
        seeds: Vec<u64>,
        config: serde_json::Value,
        payload: Payload,
        out: Option<&Path>,
    ) -> Result<()> {
        let Some(out) = out else { return Ok(()) };
        let mut report = AnalysisReport::new(
            ReportInputs {
                datasets: self.datasets,
                seeds,
                config,
                label_maps: self.label_maps,
            },
            payload,
        );
        if !self.no_timestamp {
            report.created =
                Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
        }
        io::write_report(out, &report)?;
        println!("report written to {}", out.display());
        Ok(())
    }
}

pub(crate) fn run(cli: Cli) -> Result<()> {
    let ctx = Context {
        no_timestamp: cli.no_timestamp,
        label_column: cli.label_column,
        datasets: Vec::new(),
        label_maps: Vec::new(),
    };
    match cli.command {
        Command::Synth(args) => synth(ctx, args),
        Command::Split(args) => split(ctx, args),
        Command::PcaFit(args) => pca_fit(ctx, args),
        Command::Curve(args) => curve(ctx, args),
        Command::VarianceRatio(args) => variance_ratio(ctx, args),
        Command::Salient(args) => salient(ctx, args),
        Command::Histogram(args) => histogram(ctx, args),
        Command::Sweep(args) => sweep(ctx, args),
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn synth(mut ctx: Context, args: SynthArgs) -> Result<()> {
    let config = SynthConfig {
        n: args.n,
        d: args.d,
        class_count: args.classes,
        signal_dims: args.signal_dims,
        class_separation: args.separation,
        noise_sigma: args.noise,
        rotate: !args.no_rotate,
        domain_shift: args.domain_shift,
        amplification: args.amplification,
        draw: args.draw,
        seed: Seed(args.seed),
    };
    let written = match &args.finetuned_out {
        Some(finetuned_out) => {
            let (pretrained, finetuned) = generate_pair(&config)?;
            io::write_dataset(&args.out, &pretrained.dataset)?;
            io::write_dataset(finetuned_out, &finetuned.dataset)?;
            vec![
                (args.out.clone(), pretrained.dataset),
                (finetuned_out.clone(), finetuned.dataset),
            ]
        }
        None => {
            let synthetic = generate(&config)?;
            io::write_dataset(&args.out, &synthetic.dataset)?;
            vec![(args.out.clone(), synthetic.dataset)]
        }
    };
    for (path, data) in &written {
        println!(
            "{}: {} rows x {} dims, {} classes",
            path.display(),
            data.n_rows(),
            data.n_dims(),
            data.class_count()
        );
        ctx.datasets.push(path.display().to_string());
    }
    let payload = Payload::Synth(SynthSummary {
        config: config.clone(),
        paired: args.finetuned_out.is_some(),
        class_sizes: written[0].1.class_sizes(),
    });
    ctx.report(
        vec![args.seed],
        json!(config),
        payload,
        args.report.as_deref(),
    )
}

fn split(mut ctx: Context, args: SplitArgs) -> Result<()> {
    let data = ctx.load(&args.input)?;
    let split = data.stratified_split(args.test_fraction, Seed(args.seed))?;
    io::write_dataset(&args.train_out, &split.train)?;
    io::write_dataset(&args.test_out, &split.test)?;
    println!(
        "train: {} rows -> {}\ntest:  {} rows -> {}",
        split.train.n_rows(),
        args.train_out.display(),
        split.test.n_rows(),
        args.test_out.display()
    );
    let payload = Payload::Split(SplitSummary {
        test_fraction: args.test_fraction,
        train_class_sizes: split.train.class_sizes(),
        test_class_sizes: split.test.class_sizes(),
    });
    let config = json!({ "test_fraction": args.test_fraction });
    ctx.report(vec![args.seed], config, payload, args.report.as_deref())
}

fn pca_fit(mut ctx: Context, args: PcaFitArgs) -> Result<()> {
    let data = ctx.load(&args.input)?;
    let k = args.k.unwrap_or(data.n_rows().min(data.n_dims()));
    let model = pca::fit_dataset(&data, k)?;
    io::write_pca_model(&args.out, &model)?;
    println!("{k} components fitted on {} rows", model.fitted_on());
    let mut cumulative = 0.0;
    for (i, ratio) in model.explained_variance_ratio().iter().take(10).enumerate() {
        cumulative += ratio;
        println!(
            "  PC{:<3} {:>8}  cumulative {:>8}",
            i + 1,
            pct(*ratio),
            pct(cumulative)
        );
    }
    if k > 10 {
        println!("  ... {} more", k - 10);
    }
    let payload = Payload::PcaFit(PcaSummary {
        fitted_on: model.fitted_on(),
        n_dims: model.n_dims(),
        explained_variance: model.explained_variance().to_vec(),
        explained_variance_ratio: model.explained_variance_ratio().to_vec(),
    });
    ctx.report(vec![], json!({ "k": k }), payload, args.report.as_deref())
}

fn curve(mut ctx: Context, args: CurveArgs) -> Result<()> {
    let train = ctx.load(&args.train)?;
    let test = ctx.load(&args.test)?;
    let source = args
        .pca_source
        .as_deref()
        .map(|p| ctx.load(p))
        .transpose()?;
    let scenarios = if args.scenarios.is_empty() {
        let mut all = vec![Scenario::PcaInDomain];
        if source.is_some() {
            all.push(Scenario::PcaExternal);
        }
        all.push(Scenario::RandomDims);
        all
    } else {
        args.scenarios.clone()
    };
    let ks = if args.ks.is_empty() {
        default_ks(train.n_dims())
    } else {
        args.ks.clone()
    };
    let config = args.probe.config();
    let settings = CurveSettings {
        ks: &ks,
        pca_source: source.as_ref(),
        repeats: args.repeats,
        seed: Seed(args.seed),
        config: &config,
    };
    let curves = scenarios
        .iter()
        .map(|&s| compression_curve(&train, &test, s, &settings))
        .collect::<Result<Vec<CompressionCurve>>>()?;

    print!("{:>6}", "k");
    for c in &curves {
        print!("  {:>20}", c.scenario.as_str());
    }
    println!();
    for (i, k) in ks.iter().enumerate() {
        print!("{k:>6}");
        for c in &curves {
            let p = &c.points[i];
            let cell = if c.scenario == Scenario::RandomDims {
                format!("{} ±{:.2}", pct(p.mean_accuracy), 100.0 * p.std)
            } else {
                pct(p.mean_accuracy)
            };
            print!("  {cell:>20}");
        }
        println!();
    }

    if let Some(path) = &args.csv {
        io::write_curves_csv(path, &curves)?;
        println!("curves written to {}", path.display());
    }
    let echo = json!({
        "scenarios": scenarios.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
        "ks": ks,
        "repeats": args.repeats,
        "probe": config,
    });
    let payload = Payload::CompressionCurves(CompressionCurves { curves });
    ctx.report(vec![args.seed], echo, payload, args.out.as_deref())
}

fn variance_ratio(mut ctx: Context, args: VarianceRatioArgs) -> Result<()> {
    let a = ctx.load(&args.a)?;
    let b = ctx.load(&args.b)?;
    let analysis = variance_ratio_report(&a, &b, args.top, args.classes)?;
    println!("{:>4}  {:>9}  {:>9}  {:>8}", "pc", "a", "b", "ratio");
    for (i, ratio) in analysis.report.ratios.iter().enumerate() {
        println!(
            "{:>4}  {:>9}  {:>9}  {:>8.3}",
            i + 1,
            pct(analysis.finetuned_ratio[i]),
            pct(analysis.pretrained_ratio[i]),
            ratio
        );
    }
    match args.classes {
        Some(c) => println!("crossover = {} (classes = {c})", analysis.report.crossover),
        None => println!("crossover = {}", analysis.report.crossover),
    }
    let echo = json!({ "top": args.top, "classes": args.classes });
    ctx.report(
        vec![],
        echo,
        Payload::VarianceRatio(analysis),
        args.out.as_deref(),
    )
}

fn salient(mut ctx: Context, args: SalientArgs) -> Result<()> {
    let train = ctx.load(&args.train)?;
    let test = ctx.load(&args.test)?;
    let config = args.probe.config();
    let summary = salient_summary(&train, &test, args.n, args.folds, Seed(args.seed), &config)?;
    let best_n = format!("best-{}", summary.n);
    let natural = format!("natural ({})", summary.class_count);
    println!(
        "{:>10}  {:>10}  {:>10}  {:>10}  {:>12}",
        "random", "all", "best-1", best_n, natural
    );
    println!(
        "{:>10}  {:>10}  {:>10}  {:>10}  {:>12}",
        pct(summary.random_baseline),
        pct(summary.all_dims),
        pct(summary.best_1),
        pct(summary.best_n),
        summary.natural.map_or_else(|| "n/a".to_string(), pct)
    );
    let dims: Vec<String> = summary
        .selection
        .dims
        .iter()
        .map(|d| d.to_string())
        .collect();
    println!("selected dims (in order): {}", dims.join(", "));
    let echo = json!({ "n": args.n, "folds": args.folds, "probe": config });
    ctx.report(
        vec![args.seed],
        echo,
        Payload::Salient(summary),
        args.out.as_deref(),
    )
}

fn histogram(mut ctx: Context, args: HistogramArgs) -> Result<()> {
    let train = ctx.load(&args.train)?;
    let test = ctx.load(&args.test)?;
    let config = args.probe.config();
    let hist = per_neuron_accuracies(&train, &test, args.bins, &config)?;
    let widest = hist.counts.iter().copied().max().unwrap_or(0).max(1);
    for (i, &count) in hist.counts.iter().enumerate() {
        let bar = "#".repeat((count * 40).div_ceil(widest));
        println!(
            "[{:>7}, {:>7}) {count:>5} {bar}",
            pct(hist.bin_edges[i]),
            pct(hist.bin_edges[i + 1])
        );
    }
    if let Some(peak) = hist.peak() {
        println!("best dimension: {peak} ({})", pct(hist.accuracies[peak]));
    }
    let echo = json!({ "bins": args.bins, "probe": config });
    ctx.report(
        vec![],
        echo,
        Payload::NeuronHistogram(hist),
        args.out.as_deref(),
    )
}

fn sweep(mut ctx: Context, args: SweepArgs) -> Result<()> {
    let corpus = ctx.load(&args.corpus)?;
    let train = ctx.load(&args.train)?;
    let test = ctx.load(&args.test)?;
    let config = args.probe.config();
    let points = sample_size_sweep(
        &corpus,
        &train,
        &test,
        args.k,
        &args.sizes,
        Seed(args.seed),
        &config,
    )?;
    println!("{:>8}  {:>9}", "size", "accuracy");
    for p in &points {
        println!("{:>8}  {:>9}", p.size, pct(p.accuracy));
    }
    let echo = json!({ "k": args.k, "sizes": args.sizes, "probe": config });
    let payload = Payload::SampleSweep(SampleSweep { k: args.k, points });
    ctx.report(vec![args.seed], echo, payload, args.out.as_deref())
}
