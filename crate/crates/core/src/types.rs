//! Domain types shared by every stage of the pipeline.
//!
//! Angles are visual degrees in a 2D screen-angular frame, times are
//! milliseconds. Profiles are uniformly sampled displacement curves whose
//! origin is the saccade anchor.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default resampling interval for profiles, in milliseconds.
pub const DEFAULT_DT: f64 = 1.0;

/// One timestamped gaze estimate from a tracker stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    /// Time in ms.
    pub t: f64,
    /// Horizontal gaze angle in degrees.
    pub x: f64,
    /// Vertical gaze angle in degrees.
    pub y: f64,
    pub valid: bool,
}

impl GazeSample {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        Self { t, x, y, valid: true }
    }

    pub fn invalid(t: f64) -> Self {
        Self { t, x: 0.0, y: 0.0, valid: false }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// The factor a category belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Factor {
    None,
    Orientation,
    Depth,
    InitialMovement,
    User,
    Amplitude,
}

impl Factor {
    pub const ALL: [Factor; 6] =
        [Factor::None, Factor::Orientation, Factor::Depth, Factor::InitialMovement, Factor::User, Factor::Amplitude];

    pub fn as_str(self) -> &'static str {
        match self {
            Factor::None => "none",
            Factor::Orientation => "orientation",
            Factor::Depth => "depth",
            Factor::InitialMovement => "initial-movement",
            Factor::User => "user",
            Factor::Amplitude => "amplitude",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Factor::None => 0,
            Factor::Orientation => 1,
            Factor::Depth => 2,
            Factor::InitialMovement => 3,
            Factor::User => 4,
            Factor::Amplitude => 5,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.code() == code)
    }

    /// Category values admitted for this factor; `None` means free-form (user ids).
    fn allowed_values(self) -> Option<&'static [&'static str]> {
        match self {
            Factor::None => Some(&[""]),
            Factor::Orientation => Some(&["horizontal", "vertical"]),
            Factor::Depth => Some(&["same", "nearer", "farther"]),
            Factor::InitialMovement => Some(&["static", "same", "opposite"]),
            Factor::Amplitude => Some(&["-1", "+1"]),
            Factor::User => None,
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        let norm = match norm.as_str() {
            "users" => "user",
            "orientations" => "orientation",
            "initialmovement" | "initial-motion" => "initial-movement",
            other => other,
        }
        .to_string();
        Factor::ALL
            .into_iter()
            .find(|f| f.as_str() == norm)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown factor '{s}'")))
    }
}

/// A (factor, category) pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CategoryLabel {
    factor: Factor,
    value: String,
}

impl CategoryLabel {
    pub fn new(factor: Factor, value: &str) -> Result<Self> {
        let value = normalize_value(factor, value);
        let ok = match factor.allowed_values() {
            Some(allowed) => allowed.contains(&value.as_str()),
            None => !value.is_empty(),
        };
        if !ok {
            return Err(Error::InvalidParameter(format!("'{value}' is not a category of factor {factor}")));
        }
        Ok(Self { factor, value })
    }

    /// The unlabeled category; as a selector it matches every profile.
    pub fn none() -> Self {
        Self { factor: Factor::None, value: String::new() }
    }

    pub fn horizontal() -> Self {
        Self { factor: Factor::Orientation, value: "horizontal".into() }
    }

    pub fn vertical() -> Self {
        Self { factor: Factor::Orientation, value: "vertical".into() }
    }

    pub fn user(id: &str) -> Result<Self> {
        Self::new(Factor::User, id)
    }

    pub fn factor(&self) -> Factor {
        self.factor
    }

    pub fn value(&self) -> &str {
        &self.value
    }

    pub fn is_none(&self) -> bool {
        self.factor == Factor::None
    }

    /// Selector semantics: the none label matches everything.
    pub fn matches(&self, other: &CategoryLabel) -> bool {
        self.is_none() || self == other
    }
}

impl Default for CategoryLabel {
    fn default() -> Self {
        Self::none()
    }
}

impl fmt::Display for CategoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_none() {
            f.write_str("none")
        } else {
            write!(f, "{}:{}", self.factor, self.value)
        }
    }
}

impl FromStr for CategoryLabel {
    type Err = Error;

    /// `none`, `factor:value`, or a bare orientation (`horizontal`, `vertical`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("none") {
            return Ok(Self::none());
        }
        match s.split_once(':') {
            Some((factor, value)) => Self::new(factor.parse()?, value),
            None => Self::new(Factor::Orientation, s)
                .map_err(|_| Error::InvalidParameter(format!("label '{s}' is not 'none' or 'factor:value'"))),
        }
    }
}

fn normalize_value(factor: Factor, value: &str) -> String {
    let v = value.trim();
    match factor {
        Factor::User => v.to_string(),
        Factor::Amplitude => v.trim_end_matches('°').replace('\u{2212}', "-").trim_end_matches(".0").to_string(),
        _ => v.to_ascii_lowercase(),
    }
}

/// Samples of one detected saccade, from the pre-anchor window to the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaccadeTrace {
    pub samples: Vec<GazeSample>,
    pub anchor_index: usize,
    pub detection_index: usize,
    /// Unit vector from the anchor toward the endpoint.
    pub direction: [f64; 2],
}

impl SaccadeTrace {
    pub fn validate(&self) -> Result<()> {
        if self.anchor_index > self.detection_index || self.detection_index >= self.samples.len() {
            return Err(Error::InvalidProfile(format!(
                "trace indices out of order (anchor {}, detection {}, len {})",
                self.anchor_index,
                self.detection_index,
                self.samples.len()
            )));
        }
        if self.samples.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidProfile("trace times are not strictly increasing".into()));
        }
        if !self.samples[self.anchor_index].valid {
            return Err(Error::InvalidProfile("anchor sample is invalid".into()));
        }
        let valid_after = self.samples[self.anchor_index..].iter().filter(|s| s.valid).count();
        if valid_after < 3 {
            return Err(Error::TooFewSamples { needed: 3, got: valid_after });
        }
        let norm = self.direction[0].hypot(self.direction[1]);
        if !((norm - 1.0).abs() < 1e-9) {
            return Err(Error::InvalidProfile("direction is not a unit vector".into()));
        }
        Ok(())
    }

    pub fn anchor(&self) -> &GazeSample {
        &self.samples[self.anchor_index]
    }

    pub fn end(&self) -> &GazeSample {
        self.samples.last().expect("trace has samples")
    }

    /// Euclidean distance between anchor and endpoint.
    pub fn displacement(&self) -> f64 {
        let (a, e) = (self.anchor(), self.end());
        (e.x - a.x).hypot(e.y - a.y)
    }
}

/// A uniformly sampled displacement curve anchored at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaccadeProfile {
    dt: f64,
    d: Vec<f64>,
    /// Displacements before the anchor, at t = -dt, -2dt, ... (nearest first).
    lead: Vec<f64>,
    pub category: CategoryLabel,
    pub outlier: bool,
}

impl SaccadeProfile {
    pub fn new(dt: f64, d: Vec<f64>, category: CategoryLabel) -> Result<Self> {
        Self::with_lead(dt, d, Vec::new(), category)
    }

    pub fn with_lead(dt: f64, d: Vec<f64>, lead: Vec<f64>, category: CategoryLabel) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("sampling interval must be positive, got {dt}")));
        }
        if d.len() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: d.len() });
        }
        if d[0] != 0.0 {
            return Err(Error::InvalidProfile(format!("profile must start at 0, got {}", d[0])));
        }
        if d.iter().chain(lead.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("non-finite displacement".into()));
        }
        let amp = d[d.len() - 1];
        if amp <= 0.0 {
            return Err(Error::InvalidProfile(format!("amplitude must be positive, got {amp}")));
        }
        Ok(Self { dt, d, lead, category, outlier: false })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn displacement(&self) -> &[f64] {
        &self.d
    }

    pub fn lead(&self) -> &[f64] {
        &self.lead
    }

    pub fn amplitude(&self) -> f64 {
        self.d[self.d.len() - 1]
    }

    /// Time of the final sample.
    pub fn duration(&self) -> f64 {
        (self.d.len() - 1) as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Displacement at an arbitrary time, linear between samples, held past the end.
    pub fn at(&self, t: f64) -> f64 {
        crate::interp::sample_held(&self.d, self.dt, t)
    }

    pub fn with_category(mut self, category: CategoryLabel) -> Self {
        self.category = category;
        self
    }
}

impl AsRef<SaccadeProfile> for SaccadeProfile {
    fn as_ref(&self) -> &SaccadeProfile {
        self
    }
}

/// One entry of a mean profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSample {
    pub t: f64,
    pub mean: f64,
    pub std: f64,
    pub count: u32,
}

/// Per-timestamp mean and population standard deviation over a category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanProfile {
    dt: f64,
    mean: Vec<f64>,
    std: Vec<f64>,
    count: Vec<u32>,
    /// Number of profiles averaged.
    pub source_count: usize,
    pub category: CategoryLabel,
}

impl MeanProfile {
    pub fn new(
        dt: f64,
        mean: Vec<f64>,
        std: Vec<f64>,
        count: Vec<u32>,
        source_count: usize,
        category: CategoryLabel,
    ) -> Result<Self> {
        if mean.len() < 2 || mean.len() != std.len() || mean.len() != count.len() {
            return Err(Error::InvalidProfile("mean profile arrays must share a length of at least 2".into()));
        }
        if mean[0] != 0.0 {
            return Err(Error::InvalidProfile("mean profile must start at 0".into()));
        }
        if std.iter().any(|s| !(*s >= 0.0)) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidProfile("mean profile has negative or non-finite values".into()));
        }
        if count.contains(&0) {
            return Err(Error::InvalidProfile("every mean entry needs a contributing profile".into()));
        }
        Ok(Self { dt, mean, std, count, source_count, category })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn counts(&self) -> &[u32] {
        &self.count
    }

    pub fn amplitude(&self) -> f64 {
        self.mean[self.mean.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration(&self) -> f64 {
        (self.mean.len() - 1) as f64 * self.dt
    }

    pub fn entries(&self) -> impl Iterator<Item = MeanSample> + '_ {
        (0..self.mean.len()).map(move |l| MeanSample {
            t: l as f64 * self.dt,
            mean: self.mean[l],
            std: self.std[l],
            count: self.count[l],
        })
    }

    /// The mean curve as a plain profile, e.g. to feed it back into a model.
    pub fn to_profile(&self) -> Result<SaccadeProfile> {
        SaccadeProfile::new(self.dt, self.mean.clone(), self.category.clone())
    }
}

/// Anything that exposes a uniformly sampled displacement curve.
pub trait Curve {
    fn dt(&self) -> f64;
    fn values(&self) -> &[f64];
}

impl Curve for SaccadeProfile {
    fn dt(&self) -> f64 {
        self.dt
    }
    fn values(&self) -> &[f64] {
        &self.d
    }
}

impl Curve for MeanProfile {
    fn dt(&self) -> f64 {
        self.dt
    }
    fn values(&self) -> &[f64] {
        &self.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub source: String,
    pub tracker_rate_hz: f64,
    pub units: String,
    pub dt: f64,
}

impl Default for DatasetMetadata {
    fn default() -> Self {
        Self { source: String::new(), tracker_rate_hz: 120.0, units: "ms,deg".into(), dt: DEFAULT_DT }
    }
}

/// A labeled collection of profiles sharing one sampling interval.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SaccadeDataset {
    pub metadata: DatasetMetadata,
    profiles: Vec<SaccadeProfile>,
}

impl SaccadeDataset {
    pub fn new(metadata: DatasetMetadata) -> Self {
        Self { metadata, profiles: Vec::new() }
    }

    pub fn from_profiles(metadata: DatasetMetadata, profiles: Vec<SaccadeProfile>) -> Result<Self> {
        let mut ds = Self::new(metadata);
        for p in profiles {
            ds.push(p)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, profile: SaccadeProfile) -> Result<()> {
        if (profile.dt() - self.metadata.dt).abs() > 1e-12 {
            return Err(Error::IntervalMismatch(profile.dt(), self.metadata.dt));
        }
        // Constructors already enforce the profile invariants; re-check the
        // ones a deserialized value could violate.
        SaccadeProfile::with_lead(profile.dt, profile.d.clone(), profile.lead.clone(), profile.category.clone())?;
        self.profiles.push(profile);
        Ok(())
    }

    pub fn profiles(&self) -> &[SaccadeProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.metadata.dt
    }

    /// A dataset holding the given subset, with the same metadata.
    pub fn subset<'a>(&self, profiles: impl IntoIterator<Item = &'a SaccadeProfile>) -> Self {
        Self { metadata: self.metadata.clone(), profiles: profiles.into_iter().cloned().collect() }
    }

    pub fn into_profiles(self) -> Vec<SaccadeProfile> {
        self.profiles
    }
}
