//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every entry point takes a JSON object of synthetic-fixture parameters
//! (missing fields fall back to [`DemoParams::default`]) and returns a JSON
//! string. The plain Rust functions are the same computations without the
//! JS boundary.

use embedscope::analysis::{
    compression_curve, default_ks, variance_ratio_report, CurveSettings, Scenario,
};
use embedscope::classifier::probe_accuracy;
use embedscope::selection::{per_neuron_accuracies, random_baseline_accuracy};
use embedscope::synth::{generate, generate_pair};
use embedscope::{Result, Seed, SynthConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoParams {
    pub n: usize,
    pub d: usize,
    pub classes: usize,
    pub signal_dims: usize,
    pub separation: f64,
    pub noise: f64,
    pub rotate: bool,
    pub amplification: f64,
    pub seed: u64,
    /// Random subsets per k for the random-dimensions curve.
    pub repeats: usize,
    /// Leading components compared by the variance-ratio view.
    pub top: usize,
    pub bins: usize,
}

impl Default for DemoParams {
    fn default() -> Self {
        Self {
            n: 1200,
            d: 32,
            classes: 4,
            signal_dims: 4,
            separation: 6.0,
            noise: 1.0,
            rotate: true,
            amplification: 4.0,
            seed: 0,
            repeats: 5,
            top: 12,
            bins: 20,
        }
    }
}

impl DemoParams {
    fn synth(&self) -> SynthConfig {
        SynthConfig {
            n: self.n,
            d: self.d,
            class_count: self.classes,
            signal_dims: self.signal_dims,
            class_separation: self.separation,
            noise_sigma: self.noise,
            rotate: self.rotate,
            amplification: self.amplification,
            seed: Seed(self.seed),
            ..SynthConfig::default()
        }
    }
}

/// In-domain PCA and random-dimension curves over `1, 2, 4, …, d`, with the
/// full-probe accuracy and chance level for reference.
pub fn compression_curves(params: &DemoParams) -> Result<Value> {
    let data = generate(&params.synth())?.dataset;
    let split = data.stratified_split(0.2, Seed(params.seed))?;
    let config = TrainConfig::default();
    let ks = default_ks(params.d);
    let settings = CurveSettings {
        ks: &ks,
        pca_source: None,
        repeats: params.repeats,
        seed: Seed(params.seed),
        config: &config,
    };
    let curves = [Scenario::PcaInDomain, Scenario::RandomDims]
        .into_iter()
        .map(|s| compression_curve(&split.train, &split.test, s, &settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "curves": curves,
        "full": probe_accuracy(&split.train, &split.test, &config)?,
        "chance": random_baseline_accuracy(params.classes)?,
    }))
}

/// Explained-variance ratios of a finetuned-like and pretrained-like pair.
pub fn variance_ratios(params: &DemoParams) -> Result<Value> {
    let (pretrained, finetuned) = generate_pair(&params.synth())?;
    let top = params.top.min(params.d);
    let analysis = variance_ratio_report(
        &finetuned.dataset,
        &pretrained.dataset,
        top,
        Some(params.classes),
    )?;
    Ok(serde_json::to_value(analysis)?)
}

/// Test accuracy of a one-dimension probe for every dimension.
pub fn neuron_histogram(params: &DemoParams) -> Result<Value> {
    let data = generate(&params.synth())?.dataset;
    let split = data.stratified_split(0.2, Seed(params.seed))?;
    let hist = per_neuron_accuracies(
        &split.train,
        &split.test,
        params.bins,
        &TrainConfig::default(),
    )?;
    Ok(json!({
        "histogram": hist,
        "chance": random_baseline_accuracy(params.classes)?,
    }))
}

fn call(params: &str, f: fn(&DemoParams) -> Result<Value>) -> std::result::Result<String, JsValue> {
    let params: DemoParams = if params.trim().is_empty() {
        DemoParams::default()
    } else {
        serde_json::from_str(params).map_err(|e| JsValue::from_str(&e.to_string()))?
    };
    f(&params)
        .map(|v| v.to_string())
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = compressionCurves)]
pub fn compression_curves_js(params: &str) -> std::result::Result<String, JsValue> {
    call(params, compression_curves)
}

#[wasm_bindgen(js_name = varianceRatios)]
pub fn variance_ratios_js(params: &str) -> std::result::Result<String, JsValue> {
    call(params, variance_ratios)
}

#[wasm_bindgen(js_name = neuronHistogram)]
pub fn neuron_histogram_js(params: &str) -> std::result::Result<String, JsValue> {
    call(params, neuron_histogram)
}

#[wasm_bindgen(js_name = defaultParams)]
pub fn default_params_js() -> String {
    serde_json::to_string(&DemoParams::default()).expect("params serialize")
}
