//! Gaze stream files: JSONL (one sample object per line) or CSV with a
//! `t,x,y,valid` header.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::types::GazeSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFormat {
    Jsonl,
    Csv,
}

impl StreamFormat {
    /// Guesses the format from a file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => StreamFormat::Csv,
            _ => StreamFormat::Jsonl,
        }
    }
}

impl FromStr for StreamFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(StreamFormat::Jsonl),
            "csv" => Ok(StreamFormat::Csv),
            other => Err(Error::InvalidParameter(format!("unknown stream format '{other}'"))),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    t: f64,
    #[serde(default)]
    x: Option<f64>,
    #[serde(default)]
    y: Option<f64>,
    #[serde(default = "default_valid")]
    valid: bool,
}

fn default_valid() -> bool {
    true
}

pub fn read_gaze_stream(path: &Path, format: StreamFormat) -> Result<Vec<GazeSample>> {
    let file = File::open(path)?;
    match format {
        StreamFormat::Jsonl => parse_jsonl(BufReader::new(file)),
        StreamFormat::Csv => parse_csv(file),
    }
}

pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<Vec<GazeSample>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
        let sample = build_sample(row.t, row.x, row.y, row.valid, lineno)?;
        push_ordered(&mut out, sample, lineno)?;
    }
    Ok(out)
}

pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<GazeSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse { line: 0, message: e.to_string() })?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse { line: 0, message: format!("missing column '{name}' in header") })
    };
    let (ct, cx, cy) = (col("t")?, col("x")?, col("y")?);
    let cv = headers.iter().position(|h| h.eq_ignore_ascii_case("valid"));

    let mut out = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let lineno = idx + 1;
        let record = record.map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
        let num = |i: usize, name: &str| -> Result<Option<f64>> {
            let field = record.get(i).unwrap_or("");
            if field.is_empty() {
                return Ok(None);
            }
            field.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                line: lineno,
                message: format!("column '{name}': '{field}' is not a number"),
            })
        };
        let t = num(ct, "t")?.ok_or_else(|| Error::Parse { line: lineno, message: "missing time".into() })?;
        let valid = match cv.and_then(|i| record.get(i)) {
            None | Some("") => true,
            Some(v) => parse_flag(v).ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("column 'valid': '{v}' is not a boolean"),
            })?,
        };
        let sample = build_sample(t, num(cx, "x")?, num(cy, "y")?, valid, lineno)?;
        push_ordered(&mut out, sample, lineno)?;
    }
    Ok(out)
}

fn parse_flag(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" => Some(true),
        "0" | "false" | "f" | "no" => Some(false),
        _ => None,
    }
}

fn build_sample(t: f64, x: Option<f64>, y: Option<f64>, valid: bool, line: usize) -> Result<GazeSample> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Parse { line, message: format!("time must be finite and non-negative, got {t}") });
    }
    if !valid {
        return Ok(GazeSample { t, x: x.unwrap_or(0.0), y: y.unwrap_or(0.0), valid: false });
    }
    match (x, y) {
        (Some(x), Some(y)) if x.is_finite() && y.is_finite() => Ok(GazeSample { t, x, y, valid }),
        _ => Err(Error::Parse { line, message: "valid sample needs finite x and y".into() }),
    }
}

fn push_ordered(out: &mut Vec<GazeSample>, sample: GazeSample, line: usize) -> Result<()> {
    if let Some(prev) = out.last() {
        if sample.t < prev.t {
            return Err(Error::NonMonotonicTime { line });
        }
    }
    out.push(sample);
    Ok(())
}

pub fn write_gaze_stream(path: &Path, format: StreamFormat, samples: &[GazeSample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        StreamFormat::Jsonl => {
            for s in samples {
                serde_json::to_writer(&mut w, s).map_err(|e| Error::Io(e.into()))?;
                w.write_all(b"\n")?;
            }
        }
        StreamFormat::Csv => {
            writeln!(w, "t,x,y,valid")?;
            for s in samples {
                writeln!(w, "{},{},{},{}", s.t, s.x, s.y, u8::from(s.valid))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
