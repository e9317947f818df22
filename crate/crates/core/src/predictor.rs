//! Online landing prediction on a live gaze stream.
//!
//! The predictor keeps a bounded buffer of recent valid samples. When the
//! velocity between the two newest samples exceeds `v_detect`, it scans the
//! buffer backwards for the anchor like the offline detector. While the
//! saccade lasts, every new sample yields a predicted amplitude from the
//! elapsed time and distance travelled since the anchor, and a landing point
//! along the anchor-to-latest direction.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::detection::{angular_velocity, DetectionParams};
use crate::error::{Error, Result};
use crate::model::PredictionModel;
use crate::types::GazeSample;

/// Buffer capacity in samples: about one second at 120 Hz.
pub const DEFAULT_CAPACITY: usize = 128;
/// Predictions for this many samples after the anchor are withheld.
pub const SUPPRESSED_SAMPLES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    High,
    /// The query fell outside the model's amplitude range.
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandingPrediction {
    /// Timestamp of the sample that produced the prediction, in ms.
    pub t: f64,
    pub landing: [f64; 2],
    pub alpha: f64,
    pub confidence: Confidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Fixation,
    InSaccade,
}

#[derive(Debug, Clone)]
pub struct Predictor {
    model: Arc<PredictionModel>,
    params: DetectionParams,
    buffer: VecDeque<GazeSample>,
    capacity: usize,
    phase: Phase,
    anchor: Option<GazeSample>,
    since_anchor: usize,
    last_t: Option<f64>,
}

impl Predictor {
    pub fn new(model: Arc<PredictionModel>, params: DetectionParams) -> Result<Self> {
        Self::with_capacity(model, params, DEFAULT_CAPACITY)
    }

    pub fn with_capacity(model: Arc<PredictionModel>, params: DetectionParams, capacity: usize) -> Result<Self> {
        params.validate()?;
        if capacity < 4 {
            return Err(Error::InvalidParameter(format!("predictor buffer needs at least 4 samples, got {capacity}")));
        }
        Ok(Self {
            model,
            params,
            buffer: VecDeque::with_capacity(capacity),
            capacity,
            phase: Phase::Fixation,
            anchor: None,
            since_anchor: 0,
            last_t: None,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn anchor(&self) -> Option<&GazeSample> {
        self.anchor.as_ref()
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Forgets all samples and returns to fixation.
    pub fn reset(&mut self) {
        self.buffer.clear();
        self.phase = Phase::Fixation;
        self.anchor = None;
        self.since_anchor = 0;
        self.last_t = None;
    }

    /// Consumes one sample. Returns a prediction while a saccade is in flight.
    pub fn feed(&mut self, sample: GazeSample) -> Result<Option<LandingPrediction>> {
        if let Some(last) = self.last_t {
            if sample.t < last {
                return Err(Error::OutOfOrder { t: sample.t, last });
            }
        }
        self.last_t = Some(sample.t);
        if !sample.valid || !sample.x.is_finite() || !sample.y.is_finite() {
            return Ok(None);
        }
        let prev = match self.buffer.back() {
            Some(p) if p.t >= sample.t => return Ok(None),
            Some(p) => Some(*p),
            None => None,
        };
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(sample);
        let Some(prev) = prev else { return Ok(None) };
        let gap = sample.t - prev.t > self.params.max_gap;
        let speed = angular_velocity(&prev, &sample)?;

        match self.phase {
            Phase::Fixation => {
                if gap || speed <= self.params.v_detect {
                    return Ok(None);
                }
                self.start_saccade();
                Ok(self.emit(&sample))
            }
            Phase::InSaccade => {
                if gap {
                    self.end_saccade();
                    return Ok(None);
                }
                self.since_anchor += 1;
                let out = self.emit(&sample);
                if speed < self.params.v_anchor {
                    self.end_saccade();
                }
                Ok(out)
            }
        }
    }

    fn start_saccade(&mut self) {
        // The newest pair is fast; walk back while pairs stay above v_anchor.
        let mut k = self.buffer.len() - 2;
        while k > 0 {
            let (a, b) = (&self.buffer[k - 1], &self.buffer[k]);
            let fast = b.t - a.t <= self.params.max_gap
                && angular_velocity(a, b).map(|v| v >= self.params.v_anchor).unwrap_or(false);
            if !fast {
                break;
            }
            k -= 1;
        }
        self.anchor = Some(self.buffer[k]);
        self.since_anchor = self.buffer.len() - 1 - k;
        self.phase = Phase::InSaccade;
    }

    fn end_saccade(&mut self) {
        self.phase = Phase::Fixation;
        self.anchor = None;
        self.since_anchor = 0;
    }

    fn emit(&self, sample: &GazeSample) -> Option<LandingPrediction> {
        let anchor = self.anchor?;
        if self.since_anchor <= SUPPRESSED_SAMPLES {
            return None;
        }
        let (vx, vy) = (sample.x - anchor.x, sample.y - anchor.y);
        let d = vx.hypot(vy);
        if d <= 0.0 {
            return None;
        }
        let p = self.model.predict(sample.t - anchor.t, d);
        let landing = [anchor.x + p.alpha * vx / d, anchor.y + p.alpha * vy / d];
        let confidence = if p.saturated { Confidence::Low } else { Confidence::High };
        Some(LandingPrediction { t: sample.t, landing, alpha: p.alpha, confidence })
    }
}

/// Wall-clock cost of `feed`, in microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub predictions: usize,
    pub p50_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
    pub budget_us: f64,
    pub within_budget: bool,
}

pub const DEFAULT_BUDGET_US: f64 = 200.0;

/// Feeds `stream` through `predictor`, timing each call. The p99 is checked
/// against `budget_us`.
pub fn benchmark_latency(predictor: &mut Predictor, stream: &[GazeSample], budget_us: f64) -> Result<LatencyStats> {
    let mut times = Vec::with_capacity(stream.len());
    let mut predictions = 0;
    for s in stream {
        let start = Instant::now();
        let out = predictor.feed(*s)?;
        times.push(start.elapsed().as_secs_f64() * 1e6);
        predictions += usize::from(out.is_some());
    }
    if times.is_empty() {
        return Ok(LatencyStats {
            samples: 0,
            predictions: 0,
            p50_us: 0.0,
            p99_us: 0.0,
            max_us: 0.0,
            budget_us,
            within_budget: true,
        });
    }
    times.sort_by(f64::total_cmp);
    let pct = |q: f64| times[((q * times.len() as f64).ceil() as usize).clamp(1, times.len()) - 1];
    let p99 = pct(0.99);
    Ok(LatencyStats {
        samples: times.len(),
        predictions,
        p50_us: pct(0.5),
        p99_us: p99,
        max_us: times[times.len() - 1],
        budget_us,
        within_budget: p99 <= budget_us,
    })
}
