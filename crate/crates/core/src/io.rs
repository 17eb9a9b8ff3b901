//! File formats.
//!
//! # Dataset file (`.embd`)
//!
//! All integers and floats are little-endian.
//!
//! | offset | size    | field                                   |
//! |--------|---------|-----------------------------------------|
//! | 0      | 4       | magic `EMBD`                            |
//! | 4      | 4       | version, u32 = 1                        |
//! | 8      | 8       | n rows, u64                             |
//! | 16     | 4       | d columns, u32                          |
//! | 20     | 4       | c classes, u32                          |
//! | 24     | 8·n·d   | embeddings, f64, row-major              |
//! | …      | 4·n     | labels, u32                             |
//!
//! # PCA model file (`.pcam`)
//!
//! | offset | size    | field                                   |
//! |--------|---------|-----------------------------------------|
//! | 0      | 4       | magic `PCAM`                            |
//! | 4      | 4       | version, u32 = 1                        |
//! | 8      | 4       | d, u32                                  |
//! | 12     | 4       | k components, u32                       |
//! | 16     | 8       | rows the model was fitted on, u64       |
//! | 24     | 8·d     | mean, f64                               |
//! | …      | 8·k·d   | components, f64, row-major (one axis per row) |
//! | …      | 8·k     | explained variance, f64                 |
//! | …      | 8·k     | explained variance ratio, f64           |
//!
//! Readers compare the sizes implied by a header against the actual file
//! length before allocating anything.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::analysis::CompressionCurve;
use crate::dataset::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::pca::PcaModel;
use crate::report::AnalysisReport;

pub const DATASET_MAGIC: [u8; 4] = *b"EMBD";
pub const DATASET_VERSION: u32 = 1;
pub const DATASET_HEADER_LEN: u64 = 24;
pub const PCA_MAGIC: [u8; 4] = *b"PCAM";
pub const PCA_VERSION: u32 = 1;
pub const PCA_HEADER_LEN: u64 = 24;

/// Encodes a dataset in the binary layout above.
pub fn encode_dataset(dataset: &EmbeddingDataset) -> Result<Vec<u8>> {
    let (n, d) = (dataset.n_rows(), dataset.n_dims());
    let d32 = u32::try_from(d).map_err(|_| Error::invalid("too many columns for the format"))?;
    let c32 = u32::try_from(dataset.class_count())
        .map_err(|_| Error::invalid("too many classes for the format"))?;
    let mut out = Vec::with_capacity(DATASET_HEADER_LEN as usize + n * d * 8 + n * 4);
    out.extend_from_slice(&DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&d32.to_le_bytes());
    out.extend_from_slice(&c32.to_le_bytes());
    let x = dataset.embeddings();
    for i in 0..n {
        for j in 0..d {
            out.extend_from_slice(&x[(i, j)].to_le_bytes());
        }
    }
    for &label in dataset.labels() {
        out.extend_from_slice(&(label as u32).to_le_bytes());
    }
    Ok(out)
}

pub fn write_dataset(path: impl AsRef<Path>, dataset: &EmbeddingDataset) -> Result<()> {
    dataset.validate().map_err(Error::InvalidDataset)?;
    write_atomic(path.as_ref(), &encode_dataset(dataset)?)
}

/// Decodes and validates a dataset. `path` is used for error messages and
/// the file stem becomes the dataset name.
pub fn decode_dataset(path: &Path, bytes: &[u8]) -> Result<EmbeddingDataset> {
    let actual = bytes.len() as u64;
    if actual < DATASET_HEADER_LEN {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: DATASET_HEADER_LEN,
            actual,
        });
    }
    let mut cursor = Cursor::new(bytes);
    let magic = cursor.array::<4>();
    if magic != DATASET_MAGIC {
        return Err(Error::BadMagic {
            path: path.into(),
            found: magic,
            expected: DATASET_MAGIC,
        });
    }
    let version = cursor.u32();
    if version != DATASET_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            found: version,
        });
    }
    let n = cursor.u64();
    let d = cursor.u32();
    let c = cursor.u32();
    let expected =
        u128::from(DATASET_HEADER_LEN) + u128::from(n) * u128::from(d) * 8 + u128::from(n) * 4;
    check_length(path, expected, actual)?;
    let (n, d) = (n as usize, d as usize);

    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        values.push(cursor.f64());
    }
    let mut labels = Vec::with_capacity(n);
    for row in 0..n {
        let label = cursor.u32();
        if label >= c {
            return Err(Error::LabelOutOfRange {
                path: path.into(),
                row,
                label,
                class_count: c,
            });
        }
        labels.push(label as usize);
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            path: path.into(),
            row: pos / d,
            col: pos % d,
        });
    }
    EmbeddingDataset::new(
        stem(path),
        DMatrix::from_row_slice(n, d, &values),
        labels,
        c as usize,
    )
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<EmbeddingDataset> {
    let path = path.as_ref();
    decode_dataset(path, &fs::read(path)?)
}

fn check_length(path: &Path, expected: u128, actual: u64) -> Result<()> {
    let actual_wide = u128::from(actual);
    if actual_wide < expected {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: u64::try_from(expected).unwrap_or(u64::MAX),
            actual,
        });
    }
    if actual_wide > expected {
        return Err(Error::TrailingBytes {
            path: path.into(),
            trailing: (actual_wide - expected) as u64,
        });
    }
    Ok(())
}

pub fn encode_pca_model(model: &PcaModel) -> Result<Vec<u8>> {
    let d = u32::try_from(model.n_dims()).map_err(|_| Error::invalid("model too wide"))?;
    let k = u32::try_from(model.n_components()).map_err(|_| Error::invalid("model too deep"))?;
    let mut out = Vec::new();
    out.extend_from_slice(&PCA_MAGIC);
    out.extend_from_slice(&PCA_VERSION.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    out.extend_from_slice(&k.to_le_bytes());
    out.extend_from_slice(&(model.fitted_on() as u64).to_le_bytes());
    for v in model.mean().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let comps = model.components();
    for i in 0..comps.nrows() {
        for j in 0..comps.ncols() {
            out.extend_from_slice(&comps[(i, j)].to_le_bytes());
        }
    }
    for v in model
        .explained_variance()
        .iter()
        .chain(model.explained_variance_ratio())
    {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_pca_model(path: &Path, bytes: &[u8]) -> Result<PcaModel> {
    let actual = bytes.len() as u64;
    if actual < PCA_HEADER_LEN {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: PCA_HEADER_LEN,
            actual,
        });
    }
    let mut cursor = Cursor::new(bytes);
    let magic = cursor.array::<4>();
    if magic != PCA_MAGIC {
        return Err(Error::BadMagic {
            path: path.into(),
            found: magic,
            expected: PCA_MAGIC,
        });
    }
    let version = cursor.u32();
    if version != PCA_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            found: version,
        });
    }
    let d = cursor.u32();
    let k = cursor.u32();
    let fitted_on = cursor.u64();
    let (dw, kw) = (u128::from(d), u128::from(k));
    check_length(
        path,
        u128::from(PCA_HEADER_LEN) + 8 * (dw + kw * dw + 2 * kw),
        actual,
    )?;
    let (d, k) = (d as usize, k as usize);
    let mean: Vec<f64> = (0..d).map(|_| cursor.f64()).collect();
    let comps: Vec<f64> = (0..k * d).map(|_| cursor.f64()).collect();
    let variance: Vec<f64> = (0..k).map(|_| cursor.f64()).collect();
    let ratio: Vec<f64> = (0..k).map(|_| cursor.f64()).collect();
    PcaModel::from_parts(
        mean,
        DMatrix::from_row_slice(k, d, &comps),
        variance,
        ratio,
        fitted_on as usize,
    )
}

pub fn write_pca_model(path: impl AsRef<Path>, model: &PcaModel) -> Result<()> {
    write_atomic(path.as_ref(), &encode_pca_model(model)?)
}

pub fn read_pca_model(path: impl AsRef<Path>) -> Result<PcaModel> {
    let path = path.as_ref();
    decode_pca_model(path, &fs::read(path)?)
}

/// Reads a CSV with a header row. Every column except `label_column` is a
/// numeric feature, in header order. Labels are mapped to dense indices in
/// order of first appearance; the returned vector maps index → label text.
pub fn read_csv_dataset(
    path: impl AsRef<Path>,
    label_column: &str,
) -> Result<(EmbeddingDataset, Vec<String>)> {
    let path = path.as_ref();
    let csv_err = |message: String| Error::Csv {
        path: path.into(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| csv_err(e.to_string()))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| csv_err(format!("missing label column `{label_column}`")))?;
    let width = headers.len();
    let d = width - 1;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        // Header is line 1.
        let line = i + 2;
        let record = record.map_err(|e| csv_err(e.to_string()))?;
        if record.len() != width {
            return Err(csv_err(format!(
                "row {line} has {} fields, header has {width}",
                record.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            if col == label_idx {
                let name = field.trim().to_string();
                let next = names.len();
                let label = *index.entry(name.clone()).or_insert_with(|| {
                    names.push(name);
                    next
                });
                labels.push(label);
            } else {
                let v: f64 = field.trim().parse().map_err(|_| {
                    csv_err(format!(
                        "row {line}, column `{}`: `{field}` is not a number",
                        &headers[col]
                    ))
                })?;
                values.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(csv_err("no data rows".into()));
    }
    let n = labels.len();
    let dataset = EmbeddingDataset::new(
        stem(path),
        DMatrix::from_row_slice(n, d, &values),
        labels,
        names.len(),
    )?;
    Ok((dataset, names))
}

pub fn write_report(path: impl AsRef<Path>, report: &AnalysisReport) -> Result<()> {
    write_atomic(path.as_ref(), report.to_json()?.as_bytes())
}

pub fn read_report(path: impl AsRef<Path>) -> Result<AnalysisReport> {
    AnalysisReport::from_json(&fs::read_to_string(path)?)
}

/// Flat export of curve points: `scenario,k,mean,std`, one row per point.
pub fn curves_to_csv(curves: &[CompressionCurve]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Report(e.to_string());
    writer
        .write_record(["scenario", "k", "mean", "std"])
        .map_err(err)?;
    for curve in curves {
        for p in &curve.points {
            writer
                .write_record([
                    curve.scenario.as_str().to_string(),
                    p.k.to_string(),
                    p.mean_accuracy.to_string(),
                    p.std.to_string(),
                ])
                .map_err(err)?;
        }
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Report(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

pub fn write_curves_csv(path: impl AsRef<Path>, curves: &[CompressionCurve]) -> Result<()> {
    write_atomic(path.as_ref(), curves_to_csv(curves)?.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(bytes)?;
    file.sync_all()?;
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

/// Little-endian reader over a buffer whose length was checked up front.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn array<const N: usize>(&mut self) -> [u8; N] {
        let out: [u8; N] = self.bytes[self.pos..self.pos + N]
            .try_into()
            .expect("slice has length N");
        self.pos += N;
        out
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.array())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.array())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.array())
    }
}
