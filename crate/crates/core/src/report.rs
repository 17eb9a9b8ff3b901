//! Serializable analysis records.
//!
//! On disk a report is a JSON object with keys in a fixed order:
//! `kind`, `version`, `created`, `inputs`, `payload`. `kind` selects the
//! payload schema.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{CompressionCurve, SweepPoint, VarianceRatioAnalysis};
use crate::error::{Error, Result};
use crate::selection::{NeuronHistogram, SalientSummary, SelectionResult};

pub const REPORT_VERSION: u32 = 1;

/// Dataset names, seeds and a configuration echo.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportInputs {
    pub datasets: Vec<String>,
    pub seeds: Vec<u64>,
    pub config: Value,
    /// Class names of string-labeled sources, indexed by dense label.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub label_maps: Vec<LabelMapEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMapEntry {
    pub dataset: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionCurves {
    pub curves: Vec<CompressionCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSweep {
    pub k: usize,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    pub fitted_on: usize,
    pub n_dims: usize,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub test_fraction: f64,
    pub train_class_sizes: Vec<usize>,
    pub test_class_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub config: crate::synth::SynthConfig,
    pub paired: bool,
    pub class_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    CompressionCurves(CompressionCurves),
    VarianceRatio(VarianceRatioAnalysis),
    NeuronHistogram(NeuronHistogram),
    Selection(SelectionResult),
    Salient(SalientSummary),
    SampleSweep(SampleSweep),
    PcaFit(PcaSummary),
    Split(SplitSummary),
    Synth(SynthSummary),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::CompressionCurves(_) => "compression_curves",
            Payload::VarianceRatio(_) => "variance_ratio",
            Payload::NeuronHistogram(_) => "neuron_histogram",
            Payload::Selection(_) => "selection",
            Payload::Salient(_) => "salient",
            Payload::SampleSweep(_) => "sample_size_sweep",
            Payload::PcaFit(_) => "pca_fit",
            Payload::Split(_) => "split",
            Payload::Synth(_) => "synth",
        }
    }

    fn to_value(&self) -> Result<Value> {
        Ok(match self {
            Payload::CompressionCurves(p) => serde_json::to_value(p)?,
            Payload::VarianceRatio(p) => serde_json::to_value(p)?,
            Payload::NeuronHistogram(p) => serde_json::to_value(p)?,
            Payload::Selection(p) => serde_json::to_value(p)?,
            Payload::Salient(p) => serde_json::to_value(p)?,
            Payload::SampleSweep(p) => serde_json::to_value(p)?,
            Payload::PcaFit(p) => serde_json::to_value(p)?,
            Payload::Split(p) => serde_json::to_value(p)?,
            Payload::Synth(p) => serde_json::to_value(p)?,
        })
    }

    fn from_value(kind: &str, value: Value) -> Result<Self> {
        Ok(match kind {
            "compression_curves" => Payload::CompressionCurves(serde_json::from_value(value)?),
            "variance_ratio" => Payload::VarianceRatio(serde_json::from_value(value)?),
            "neuron_histogram" => Payload::NeuronHistogram(serde_json::from_value(value)?),
            "selection" => Payload::Selection(serde_json::from_value(value)?),
            "salient" => Payload::Salient(serde_json::from_value(value)?),
            "sample_size_sweep" => Payload::SampleSweep(serde_json::from_value(value)?),
            "pca_fit" => Payload::PcaFit(serde_json::from_value(value)?),
            "split" => Payload::Split(serde_json::from_value(value)?),
            "synth" => Payload::Synth(serde_json::from_value(value)?),
            other => return Err(Error::Report(format!("unknown report kind `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    /// RFC 3339 creation time; omitted for byte-reproducible output.
    pub created: Option<String>,
    pub inputs: ReportInputs,
    pub payload: Payload,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    kind: String,
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    created: Option<String>,
    inputs: ReportInputs,
    payload: Value,
}

impl AnalysisReport {
    pub fn new(inputs: ReportInputs, payload: Payload) -> Self {
        Self {
            created: None,
            inputs,
            payload,
        }
    }

    pub fn kind(&self) -> &'static str {
        self.payload.kind()
    }

    pub fn to_json(&self) -> Result<String> {
        let envelope = Envelope {
            kind: self.kind().to_string(),
            version: REPORT_VERSION,
            created: self.created.clone(),
            inputs: self.inputs.clone(),
            payload: self.payload.to_value()?,
        };
        let mut text = serde_json::to_string_pretty(&envelope)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let envelope: Envelope = serde_json::from_str(text)?;
        if envelope.version != REPORT_VERSION {
            return Err(Error::Report(format!(
                "unsupported report version {}",
                envelope.version
            )));
        }
        Ok(Self {
            created: envelope.created,
            inputs: envelope.inputs,
            payload: Payload::from_value(&envelope.kind, envelope.payload)?,
        })
    }
}
