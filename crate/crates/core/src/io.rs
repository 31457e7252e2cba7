//! CSV datasets, ground-truth tables and the versioned model file.
//!
//! Data CSV: `seq_id,t,y0,...,y{d-1}`. Truth CSV:
//! `seq_id,t,state,segment_start,regime`. Rows are grouped by `seq_id` in
//! ascending order with `t` running 0, 1, … inside each group. Floats are
//! written with 17 significant digits so parsing reproduces them exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Sequence;
use crate::error::{Error, Result};
use crate::model::{GlobalState, Hyperparams};
use crate::synth::LabeledDataset;

pub const MODEL_FORMAT: &str = "sihmm-model";
pub const MODEL_VERSION: u32 = 1;

/// Per-sequence ground truth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Truth {
    pub states: Vec<Vec<usize>>,
    pub segment_start: Vec<Vec<bool>>,
    pub regimes: Vec<Vec<usize>>,
}

impl From<&LabeledDataset> for Truth {
    fn from(d: &LabeledDataset) -> Self {
        Truth {
            states: d.states.clone(),
            segment_start: d.segment_start.clone(),
            regimes: d.regimes.clone(),
        }
    }
}

impl Truth {
    pub fn lengths(&self) -> Vec<usize> {
        self.states.iter().map(Vec::len).collect()
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn data_csv(sequences: &[Sequence]) -> String {
    let dim = sequences.first().map_or(1, Sequence::dim);
    let mut out = String::from("seq_id,t");
    for j in 0..dim {
        let _ = write!(out, ",y{j}");
    }
    out.push('\n');
    for (id, seq) in sequences.iter().enumerate() {
        for (t, y) in seq.rows().enumerate() {
            let _ = write!(out, "{id},{t}");
            for v in y {
                out.push(',');
                out.push_str(&format_float(*v));
            }
            out.push('\n');
        }
    }
    out
}

pub fn truth_csv(truth: &Truth) -> String {
    let mut out = String::from("seq_id,t,state,segment_start,regime\n");
    for (id, states) in truth.states.iter().enumerate() {
        for (t, z) in states.iter().enumerate() {
            let _ = writeln!(
                out,
                "{id},{t},{z},{},{}",
                u8::from(truth.segment_start[id][t]),
                truth.regimes[id][t]
            );
        }
    }
    out
}

pub fn write_data_csv(path: &Path, sequences: &[Sequence]) -> Result<()> {
    write_text(path, &data_csv(sequences))
}

pub fn write_truth_csv(path: &Path, truth: &Truth) -> Result<()> {
    write_text(path, &truth_csv(truth))
}

/// Tracks grouping by `seq_id` and the running `t` while reading rows.
struct RowOrder<'a> {
    path: &'a Path,
    groups: usize,
    next_t: usize,
}

impl RowOrder<'_> {
    /// Returns true when the row opens a new sequence.
    fn check(&mut self, line: usize, seq_id: usize, t: usize) -> Result<bool> {
        let opens = self.groups == 0 || seq_id == self.groups;
        let expected_seq = if opens { self.groups } else { self.groups - 1 };
        let expected_t = if opens { 0 } else { self.next_t };
        if seq_id != expected_seq || t != expected_t {
            return Err(parse_err(
                self.path,
                line,
                format!("expected seq_id {expected_seq} at t={expected_t}, got seq_id {seq_id} at t={t}"),
            ));
        }
        if opens {
            self.groups += 1;
        }
        self.next_t = t + 1;
        Ok(opens)
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {name} from {s:?}")))
}

fn check_header(path: &Path, header: Option<&str>, expected: &[&str]) -> Result<Vec<String>> {
    let header = header.ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let cols: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    if cols.len() < expected.len() || cols.iter().zip(expected).any(|(c, e)| c != e) {
        return Err(parse_err(
            path,
            1,
            format!("header must start with {}", expected.join(",")),
        ));
    }
    Ok(cols)
}

pub fn parse_data_csv(path: &Path, text: &str) -> Result<Vec<Sequence>> {
    let mut lines = text.lines();
    let cols = check_header(path, lines.next(), &["seq_id", "t"])?;
    let dim = cols.len() - 2;
    for (j, c) in cols[2..].iter().enumerate() {
        if *c != format!("y{j}") {
            return Err(parse_err(path, 1, format!("column {} must be y{j}, got {c}", j + 2)));
        }
    }
    if dim == 0 {
        return Err(parse_err(path, 1, "no observation columns"));
    }
    let mut order = RowOrder {
        path,
        groups: 0,
        next_t: 0,
    };
    let mut buffers: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in lines.enumerate() {
        let line = i + 2;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, got {}", dim + 2, fields.len()),
            ));
        }
        let seq_id: usize = parse_field(path, line, "seq_id", fields[0])?;
        let t: usize = parse_field(path, line, "t", fields[1])?;
        if order.check(line, seq_id, t)? {
            buffers.push(Vec::new());
        }
        let buf = buffers.last_mut().expect("a group is open");
        for (j, f) in fields[2..].iter().enumerate() {
            let v: f64 = parse_field(path, line, &format!("y{j}"), f)?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("y{j} is not finite")));
            }
            buf.push(v);
        }
    }
    if buffers.is_empty() {
        return Err(parse_err(path, 2, "no data rows"));
    }
    buffers.into_iter().map(|obs| Sequence::new(dim, obs)).collect()
}

pub fn parse_truth_csv(path: &Path, text: &str) -> Result<Truth> {
    let mut lines = text.lines();
    let cols = check_header(path, lines.next(), &["seq_id", "t", "state", "segment_start", "regime"])?;
    if cols.len() != 5 {
        return Err(parse_err(path, 1, "truth CSV has exactly five columns"));
    }
    let mut order = RowOrder {
        path,
        groups: 0,
        next_t: 0,
    };
    let mut truth = Truth::default();
    for (i, raw) in lines.enumerate() {
        let line = i + 2;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 5 {
            return Err(parse_err(path, line, format!("expected 5 fields, got {}", fields.len())));
        }
        let seq_id: usize = parse_field(path, line, "seq_id", fields[0])?;
        let t: usize = parse_field(path, line, "t", fields[1])?;
        if order.check(line, seq_id, t)? {
            truth.states.push(Vec::new());
            truth.segment_start.push(Vec::new());
            truth.regimes.push(Vec::new());
        }
        let state: usize = parse_field(path, line, "state", fields[2])?;
        let flag = match fields[3].trim() {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(path, line, format!("segment_start must be 0 or 1, got {other:?}"))),
        };
        let regime: usize = parse_field(path, line, "regime", fields[4])?;
        truth.states.last_mut().expect("open group").push(state);
        truth.segment_start.last_mut().expect("open group").push(flag);
        truth.regimes.last_mut().expect("open group").push(regime);
    }
    Ok(truth)
}

pub fn read_data_csv(path: &Path) -> Result<Vec<Sequence>> {
    parse_data_csv(path, &read_text(path)?)
}

pub fn read_truth_csv(path: &Path) -> Result<Truth> {
    parse_truth_csv(path, &read_text(path)?)
}

/// Self-describing model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub k: usize,
    pub dim: usize,
    pub hyperparams: Hyperparams,
    pub state: GlobalState,
}

impl ModelFile {
    pub fn new(hyperparams: Hyperparams, state: GlobalState) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            k: state.k(),
            dim: state.dim(),
            hyperparams,
            state,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Config(format!("not a model file (format {:?})", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::Config(format!(
                "model file version {} is not supported (expected {MODEL_VERSION})",
                self.version
            )));
        }
        if self.k != self.state.k() || self.dim != self.state.dim() {
            return Err(Error::Config("model shape fields disagree with the stored state".into()));
        }
        self.hyperparams.validate()?;
        self.state.validate(&self.hyperparams)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    write_json(path, model)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = read_text(path)?;
    let model: ModelFile = serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))?;
    model.validate()?;
    Ok(model)
}

/// One JSON object per line.
pub fn json_lines<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("serializable record"));
        out.push('\n');
    }
    out
}
