//! The `SACKIT` binary container used for datasets, mean profiles, traces and
//! models.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    6 bytes  "SACKIT"
//! version  u16      currently 1
//! count    u32      number of sections
//! section  tag: 4 ASCII bytes, len: u64, payload: len bytes   (repeated)
//! ```
//!
//! Floats are stored as their IEEE-754 bit patterns, so values round-trip
//! exactly. Strings are a u32 byte length followed by UTF-8. A float array is a
//! u64 element count followed by the values. Section tags:
//!
//! | tag    | payload |
//! |--------|---------|
//! | `META` | source string, tracker rate f64, units string, dt f64 |
//! | `PROF` | label, outlier u8, dt f64, d array, lead array |
//! | `MEAN` | label, dt f64, source_count u64, mean array, std array, count array (u64 len + u32 each) |
//! | `TRAC` | anchor u64, detection u64, direction 2×f64, sample count u64, samples (t, x, y f64 + valid u8) |
//! | `MODL` | dt f64, alpha_min f64, alpha_step f64, row count u64, rows as arrays, durations array |
//!
//! A label is a factor code u8 (0 none, 1 orientation, 2 depth, 3 initial
//! movement, 4 user, 5 amplitude) followed by the value string. Readers skip
//! tags they do not know.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::PredictionModel;
use crate::types::{
    CategoryLabel, DatasetMetadata, Factor, GazeSample, MeanProfile, SaccadeDataset, SaccadeProfile, SaccadeTrace,
};

pub const MAGIC: &[u8; 6] = b"SACKIT";
pub const VERSION: u16 = 1;

const TAG_META: [u8; 4] = *b"META";
const TAG_PROFILE: [u8; 4] = *b"PROF";
const TAG_MEAN: [u8; 4] = *b"MEAN";
const TAG_TRACE: [u8; 4] = *b"TRAC";
const TAG_MODEL: [u8; 4] = *b"MODL";

#[derive(Default)]
struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
    }
    fn label(&mut self, l: &CategoryLabel) {
        self.u8(l.factor().code());
        self.str(l.value());
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("unexpected end of data at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("length overflows usize".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("string is not UTF-8".into()))
    }
    /// Reads an element count, rejecting counts the remaining bytes cannot hold.
    fn count(&mut self, elem_size: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(elem_size) > self.buf.len() - self.pos {
            return Err(Error::Format(format!("array of {n} elements exceeds section size")));
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn label(&mut self) -> Result<CategoryLabel> {
        let code = self.u8()?;
        let value = self.str()?;
        let factor = Factor::from_code(code).ok_or_else(|| Error::Format(format!("unknown factor code {code}")))?;
        if factor == Factor::None {
            return Ok(CategoryLabel::none());
        }
        CategoryLabel::new(factor, &value).map_err(|e| Error::Format(e.to_string()))
    }
    fn finish(&self, what: &str) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("trailing bytes in {what} section")));
        }
        Ok(())
    }
}

fn encode_file(sections: &[([u8; 4], Vec<u8>)]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + sections.iter().map(|s| s.1.len() + 12).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for (tag, payload) in sections {
        out.extend_from_slice(tag);
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(payload);
    }
    out
}

fn decode_file(bytes: &[u8]) -> Result<Vec<([u8; 4], &[u8])>> {
    let mut d = Decoder::new(bytes);
    let magic = d.take(6).map_err(|_| Error::Format("file too short for header".into()))?;
    if magic != MAGIC {
        return Err(Error::Format("missing SACKIT magic".into()));
    }
    let version = d.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion { found: version, expected: VERSION });
    }
    let count = d.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let tag: [u8; 4] = d.take(4)?.try_into().expect("4 bytes");
        let len = d.usize()?;
        out.push((tag, d.take(len)?));
    }
    d.finish("file")?;
    Ok(out)
}

fn read_sections(path: &Path) -> Result<Vec<([u8; 4], Vec<u8>)>> {
    let bytes = fs::read(path)?;
    Ok(decode_file(&bytes)?.into_iter().map(|(t, p)| (t, p.to_vec())).collect())
}

fn encode_profile(p: &SaccadeProfile) -> Vec<u8> {
    let mut e = Encoder::default();
    e.label(&p.category);
    e.u8(u8::from(p.outlier));
    e.f64(p.dt());
    e.f64s(p.displacement());
    e.f64s(p.lead());
    e.buf
}

fn decode_profile(payload: &[u8]) -> Result<SaccadeProfile> {
    let mut d = Decoder::new(payload);
    let category = d.label()?;
    let outlier = d.u8()? != 0;
    let dt = d.f64()?;
    let disp = d.f64s()?;
    let lead = d.f64s()?;
    d.finish("profile")?;
    let mut p = SaccadeProfile::with_lead(dt, disp, lead, category).map_err(|e| Error::Format(e.to_string()))?;
    p.outlier = outlier;
    Ok(p)
}

fn encode_meta(m: &DatasetMetadata) -> Vec<u8> {
    let mut e = Encoder::default();
    e.str(&m.source);
    e.f64(m.tracker_rate_hz);
    e.str(&m.units);
    e.f64(m.dt);
    e.buf
}

fn decode_meta(payload: &[u8]) -> Result<DatasetMetadata> {
    let mut d = Decoder::new(payload);
    let m = DatasetMetadata { source: d.str()?, tracker_rate_hz: d.f64()?, units: d.str()?, dt: d.f64()? };
    d.finish("metadata")?;
    Ok(m)
}

pub fn write_dataset(path: &Path, ds: &SaccadeDataset) -> Result<()> {
    let mut sections = vec![(TAG_META, encode_meta(&ds.metadata))];
    sections.extend(ds.profiles().iter().map(|p| (TAG_PROFILE, encode_profile(p))));
    fs::write(path, encode_file(&sections))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<SaccadeDataset> {
    let mut meta = None;
    let mut profiles = Vec::new();
    for (tag, payload) in read_sections(path)? {
        match tag {
            TAG_META => meta = Some(decode_meta(&payload)?),
            TAG_PROFILE => profiles.push(decode_profile(&payload)?),
            _ => {}
        }
    }
    let meta = meta.ok_or_else(|| Error::Format("dataset has no META section".into()))?;
    SaccadeDataset::from_profiles(meta, profiles)
}

fn encode_mean(m: &MeanProfile) -> Vec<u8> {
    let mut e = Encoder::default();
    e.label(&m.category);
    e.f64(m.dt());
    e.u64(m.source_count as u64);
    e.f64s(m.mean());
    e.f64s(m.std());
    e.u64(m.counts().len() as u64);
    for c in m.counts() {
        e.u32(*c);
    }
    e.buf
}

fn decode_mean(payload: &[u8]) -> Result<MeanProfile> {
    let mut d = Decoder::new(payload);
    let category = d.label()?;
    let dt = d.f64()?;
    let source_count = d.usize()?;
    let mean = d.f64s()?;
    let std = d.f64s()?;
    let n = d.count(4)?;
    let count = (0..n).map(|_| d.u32()).collect::<Result<Vec<_>>>()?;
    d.finish("mean profile")?;
    MeanProfile::new(dt, mean, std, count, source_count, category).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_means(path: &Path, means: &[MeanProfile]) -> Result<()> {
    let sections: Vec<_> = means.iter().map(|m| (TAG_MEAN, encode_mean(m))).collect();
    fs::write(path, encode_file(&sections))?;
    Ok(())
}

pub fn read_means(path: &Path) -> Result<Vec<MeanProfile>> {
    read_sections(path)?.into_iter().filter(|(tag, _)| *tag == TAG_MEAN).map(|(_, p)| decode_mean(&p)).collect()
}

fn encode_trace(t: &SaccadeTrace) -> Vec<u8> {
    let mut e = Encoder::default();
    e.u64(t.anchor_index as u64);
    e.u64(t.detection_index as u64);
    e.f64(t.direction[0]);
    e.f64(t.direction[1]);
    e.u64(t.samples.len() as u64);
    for s in &t.samples {
        e.f64(s.t);
        e.f64(s.x);
        e.f64(s.y);
        e.u8(u8::from(s.valid));
    }
    e.buf
}

fn decode_trace(payload: &[u8]) -> Result<SaccadeTrace> {
    let mut d = Decoder::new(payload);
    let anchor_index = d.usize()?;
    let detection_index = d.usize()?;
    let direction = [d.f64()?, d.f64()?];
    let n = d.count(25)?;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        samples.push(GazeSample { t: d.f64()?, x: d.f64()?, y: d.f64()?, valid: d.u8()? != 0 });
    }
    d.finish("trace")?;
    let trace = SaccadeTrace { samples, anchor_index, detection_index, direction };
    trace.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(trace)
}

pub fn write_traces(path: &Path, traces: &[SaccadeTrace]) -> Result<()> {
    let sections: Vec<_> = traces.iter().map(|t| (TAG_TRACE, encode_trace(t))).collect();
    fs::write(path, encode_file(&sections))?;
    Ok(())
}

pub fn read_traces(path: &Path) -> Result<Vec<SaccadeTrace>> {
    read_sections(path)?.into_iter().filter(|(tag, _)| *tag == TAG_TRACE).map(|(_, p)| decode_trace(&p)).collect()
}

fn encode_model(m: &PredictionModel) -> Vec<u8> {
    let mut e = Encoder::default();
    e.f64(m.dt());
    e.f64(m.alpha_min());
    e.f64(m.alpha_step());
    e.u64(m.rows().len() as u64);
    for row in m.rows() {
        e.f64s(row);
    }
    e.f64s(m.durations());
    e.buf
}

fn decode_model(payload: &[u8]) -> Result<PredictionModel> {
    let mut d = Decoder::new(payload);
    let dt = d.f64()?;
    let alpha_min = d.f64()?;
    let alpha_step = d.f64()?;
    let n = d.count(8)?;
    let rows = (0..n).map(|_| d.f64s()).collect::<Result<Vec<_>>>()?;
    let durations = d.f64s()?;
    d.finish("model")?;
    PredictionModel::from_parts(dt, alpha_min, alpha_step, rows, durations).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_model(path: &Path, model: &PredictionModel) -> Result<()> {
    fs::write(path, encode_file(&[(TAG_MODEL, encode_model(model))]))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<PredictionModel> {
    let sections = read_sections(path)?;
    let (_, payload) = sections
        .iter()
        .find(|(tag, _)| *tag == TAG_MODEL)
        .ok_or_else(|| Error::Format("file holds no model section".into()))?;
    decode_model(payload)
}
