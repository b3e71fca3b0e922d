//! Dataset files, model checkpoints and the result tables.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use relabel_core::active::RoundLog;
use relabel_core::datagen::LabeledDataset;
use relabel_core::lnl::EpochLog;
use relabel_core::metrics::ClassSelection;
use relabel_core::model::{Model, Parameters};
use relabel_core::Matrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

const DATASET_MAGIC: &[u8; 4] = b"NOCL";
const MODEL_MAGIC: &[u8; 4] = b"NOCM";
const VERSION: u16 = 1;

/// `v` with `digits` significant digits, in the shorter of fixed and
/// exponent notation, trailing zeros removed.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| HarnessError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?))
}

fn csv_error(path: &Path, e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::format(path, format!("{other:?}")),
    }
}

fn flush(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w
        .into_inner()
        .map_err(|e| HarnessError::io(path, std::io::Error::other(e.to_string())))?;
    inner.flush().map_err(|e| HarnessError::io(path, e))
}

/// Row type of a result table.
pub trait Table: Serialize + DeserializeOwned {
    const HEADER: &'static [&'static str];
}

/// Writes `rows` under the table header, which is present even without rows.
pub fn write_table<T: Table, W: Write>(out: W, rows: &[T]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(out);
    w.write_record(T::HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows<T: Table>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = create(path)?;
    write_table(&mut out, rows).map_err(|e| csv_error(path, e))?;
    out.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_rows<T: Table>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let header = r.headers().map_err(|e| csv_error(path, e))?;
    if !header.iter().eq(T::HEADER.iter().copied()) {
        return Err(HarnessError::format(path, format!("expected header {}", T::HEADER.join(","))));
    }
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

/// Writes the dataset CSV. Features are stored at 32-bit precision.
pub fn write_dataset_csv(path: &Path, data: &LabeledDataset) -> Result<()> {
    let mut w = csv_writer(path)?;
    let f = data.feature_dim();
    let mut header: Vec<String> = (0..f).map(|j| format!("f{j}")).collect();
    header.extend(["true_label", "observed_label", "noise_flag"].map(String::from));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..data.len() {
        let mut record: Vec<String> = data
            .features()
            .row(i)
            .iter()
            .map(|&v| format_significant(v as f32 as f64, 9))
            .collect();
        record.push(data.true_labels()[i].to_string());
        record.push(data.observed_labels()[i].to_string());
        record.push(u8::from(data.noise_flags()[i]).to_string());
        w.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    flush(path, w)
}

/// Reads a dataset CSV. `classes` defaults to one more than the largest
/// label.
pub fn read_dataset_csv(path: &Path, classes: Option<usize>) -> Result<LabeledDataset> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let n = header.len();
    if n < 4 {
        return Err(HarnessError::format(path, "expected feature columns and three label columns"));
    }
    let f = n - 3;
    for (j, name) in header.iter().enumerate() {
        let want = match j {
            j if j < f => format!("f{j}"),
            j if j == f => "true_label".into(),
            j if j == f + 1 => "observed_label".into(),
            _ => "noise_flag".into(),
        };
        if name != want {
            return Err(HarnessError::format(path, format!("column {j} is `{name}`, expected `{want}`")));
        }
    }
    let mut features = Vec::new();
    let (mut truth, mut observed, mut flags) = (Vec::new(), Vec::new(), Vec::new());
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let bad = |what: &str| HarnessError::format(path, format!("row {}: bad {what}", line + 1));
        for v in record.iter().take(f) {
            features.push(v.parse::<f32>().map_err(|_| bad("feature"))? as f64);
        }
        truth.push(record[f].parse::<usize>().map_err(|_| bad("true_label"))?);
        observed.push(record[f + 1].parse::<usize>().map_err(|_| bad("observed_label"))?);
        flags.push(match &record[f + 2] {
            "0" => false,
            "1" => true,
            _ => return Err(bad("noise_flag")),
        });
    }
    let classes = classes.unwrap_or_else(|| truth.iter().chain(&observed).max().map_or(2, |m| (m + 1).max(2)));
    let matrix = Matrix::from_vec(truth.len(), f, features)?;
    Ok(LabeledDataset::from_parts(matrix, truth, observed, flags, classes)?)
}

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| HarnessError::format(self.path, "truncated file"))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.array()?) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.array()?) as usize)
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(HarnessError::format(self.path, "bad magic bytes"));
        }
        let version = self.u16()?;
        if version != VERSION {
            return Err(HarnessError::format(self.path, format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.at != self.bytes.len() {
            return Err(HarnessError::format(self.path, "trailing bytes"));
        }
        Ok(())
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| HarnessError::io(path, e))?;
    Ok(bytes)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| HarnessError::io(path, e))
}

/// Binary dataset: magic, version, `N: u64`, `F: u32`, `C: u32`, then
/// row-major `f32` features, `u32` true labels and `u32` observed labels,
/// all little-endian.
pub fn write_dataset_binary(path: &Path, data: &LabeledDataset) -> Result<()> {
    let mut out = Vec::with_capacity(22 + data.len() * (data.feature_dim() + 2) * 4);
    out.extend_from_slice(DATASET_MAGIC);
    put_u16(&mut out, VERSION);
    out.extend_from_slice(&(data.len() as u64).to_le_bytes());
    put_u32(&mut out, data.feature_dim());
    put_u32(&mut out, data.class_count());
    for &v in data.features().as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for labels in [data.true_labels(), data.observed_labels()] {
        for &y in labels {
            put_u32(&mut out, y);
        }
    }
    write_all(path, &out)
}

pub fn read_dataset_binary(path: &Path) -> Result<LabeledDataset> {
    let bytes = read_all(path)?;
    let mut c = Cursor { path, bytes: &bytes, at: 0 };
    c.header(DATASET_MAGIC)?;
    let (n, f, classes) = (c.u64()?, c.u32()?, c.u32()?);
    let cells = n.checked_mul(f).ok_or_else(|| HarnessError::format(path, "size overflow"))?;
    if cells.saturating_mul(4) > bytes.len() {
        return Err(HarnessError::format(path, "truncated file"));
    }
    let mut features = Vec::with_capacity(cells);
    for _ in 0..cells {
        features.push(f32::from_le_bytes(c.array()?) as f64);
    }
    let truth = (0..n).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
    let observed = (0..n).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
    c.finish()?;
    Ok(LabeledDataset::new(Matrix::from_vec(n, f, features)?, truth, observed, classes)?)
}

/// Loads the binary form for a `.nocl` extension and CSV otherwise.
pub fn load_dataset(path: &Path, classes: Option<usize>) -> Result<LabeledDataset> {
    if path.extension().is_some_and(|e| e == "nocl") {
        read_dataset_binary(path)
    } else {
        read_dataset_csv(path, classes)
    }
}

pub fn save_dataset(path: &Path, data: &LabeledDataset) -> Result<()> {
    if path.extension().is_some_and(|e| e == "nocl") {
        write_dataset_binary(path, data)
    } else {
        write_dataset_csv(path, data)
    }
}

/// Model checkpoint: magic, version, input/hidden/class dims as `u32`, then
/// `w1, b1, w2, b2` as little-endian `f64`.
pub fn write_model(path: &Path, model: &Model) -> Result<()> {
    let mut out = Vec::with_capacity(18 + model.params.len() * 8);
    out.extend_from_slice(MODEL_MAGIC);
    put_u16(&mut out, VERSION);
    put_u32(&mut out, model.input_dim());
    put_u32(&mut out, model.hidden_dim());
    put_u32(&mut out, model.class_count());
    for slice in model.params.slices() {
        for &v in slice {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_all(path, &out)
}

pub fn read_model(path: &Path) -> Result<Model> {
    let bytes = read_all(path)?;
    let mut c = Cursor { path, bytes: &bytes, at: 0 };
    c.header(MODEL_MAGIC)?;
    let (input, hidden, classes) = (c.u32()?, c.u32()?, c.u32()?);
    let mut params = Parameters::zeros(input, hidden, classes);
    if params.len().saturating_mul(8) != bytes.len() - c.at {
        return Err(HarnessError::format(path, "parameter block does not match the dimensions"));
    }
    for slice in params.slices_mut() {
        for v in slice.iter_mut() {
            *v = f64::from_le_bytes(c.array()?);
        }
    }
    c.finish()?;
    Ok(Model::from_parameters(input, hidden, classes, params)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub round: usize,
    pub cumulative_relabeled: usize,
    pub noise_remaining: usize,
    pub macro_f1_test: f64,
    pub macro_f1_val: f64,
    pub sampler: String,
    pub mode: String,
    pub seed: u64,
}

impl From<&RoundLog> for RoundRow {
    fn from(r: &RoundLog) -> Self {
        RoundRow {
            round: r.round,
            cumulative_relabeled: r.cumulative_relabeled,
            noise_remaining: r.noise_remaining,
            macro_f1_test: r.macro_f1_test,
            macro_f1_val: r.macro_f1_val,
            sampler: r.sampler.to_string(),
            mode: r.mode.to_string(),
            seed: r.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub epoch: usize,
    pub lr: f64,
    pub keep_fraction: f64,
    #[serde(rename = "mean_loss_A")]
    pub mean_loss_a: f64,
    #[serde(rename = "mean_loss_B")]
    pub mean_loss_b: f64,
    pub n_vog_selected: usize,
    pub clean_precision: Option<f64>,
    pub clean_recall: Option<f64>,
}

impl From<&EpochLog> for TrainingRow {
    fn from(l: &EpochLog) -> Self {
        TrainingRow {
            epoch: l.epoch,
            lr: l.lr,
            keep_fraction: l.keep_fraction,
            mean_loss_a: l.mean_loss_a,
            mean_loss_b: l.mean_loss_b,
            n_vog_selected: l.n_vog_selected,
            clean_precision: l.clean_precision,
            clean_recall: l.clean_recall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub class: usize,
    pub recall: Option<f64>,
    pub guess_pct: Option<f64>,
    pub n_clean_true: usize,
    pub n_selected: usize,
}

impl From<&ClassSelection> for SelectionRow {
    fn from(c: &ClassSelection) -> Self {
        SelectionRow {
            class: c.class,
            recall: c.recall,
            guess_pct: c.guess_pct,
            n_clean_true: c.n_clean_true,
            n_selected: c.n_selected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VogRow {
    pub sample_id: usize,
    pub epoch: usize,
    pub vog: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub mode: String,
    pub sampler: String,
    pub round: usize,
    pub f1_mean: f64,
    pub f1_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub sample_id: usize,
    pub clean: u8,
    pub provenance: String,
}

impl Table for RoundRow {
    const HEADER: &'static [&'static str] = &["round", "cumulative_relabeled", "noise_remaining", "macro_f1_test", "macro_f1_val", "sampler", "mode", "seed"];
}

impl Table for TrainingRow {
    const HEADER: &'static [&'static str] = &["epoch", "lr", "keep_fraction", "mean_loss_A", "mean_loss_B", "n_vog_selected", "clean_precision", "clean_recall"];
}

impl Table for SelectionRow {
    const HEADER: &'static [&'static str] = &["class", "recall", "guess_pct", "n_clean_true", "n_selected"];
}

impl Table for VogRow {
    const HEADER: &'static [&'static str] = &["sample_id", "epoch", "vog"];
}

impl Table for CurveRow {
    const HEADER: &'static [&'static str] = &["mode", "sampler", "round", "f1_mean", "f1_std"];
}

impl Table for PartitionRow {
    const HEADER: &'static [&'static str] = &["sample_id", "clean", "provenance"];
}
