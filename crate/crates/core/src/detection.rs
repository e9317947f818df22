//! Double-threshold saccade detection on raw gaze streams.
//!
//! Velocities are plain differences of consecutive valid samples; no filter
//! is applied. A saccade is detected where the velocity first exceeds
//! `v_detect`; its anchor is found by scanning back while the velocity stays
//! above `v_anchor`, and it ends at the first pair that drops below `v_anchor`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::resample;
use crate::types::{CategoryLabel, GazeSample, SaccadeProfile, SaccadeTrace, DEFAULT_DT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionParams {
    /// Detection threshold in deg/s.
    pub v_detect: f64,
    /// Anchor (and end) threshold in deg/s.
    pub v_anchor: f64,
    /// Context kept before the anchor, in ms.
    pub pre_anchor_window: f64,
    /// Smaller movements are discarded, in degrees.
    pub min_amplitude: f64,
    /// Longest run of invalid samples bridged inside a saccade, in ms.
    pub max_gap: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self { v_detect: 180.0, v_anchor: 90.0, pre_anchor_window: 30.0, min_amplitude: 1.0, max_gap: 20.0 }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.v_detect, self.v_anchor, self.pre_anchor_window, self.min_amplitude, self.max_gap];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("detection parameters must be positive and finite".into()));
        }
        if self.v_anchor >= self.v_detect {
            return Err(Error::InvalidParameter(format!(
                "anchor threshold ({}) must be below detection threshold ({})",
                self.v_anchor, self.v_detect
            )));
        }
        Ok(())
    }
}

/// Angular speed between two valid samples, in deg/s.
pub fn angular_velocity(a: &GazeSample, b: &GazeSample) -> Result<f64> {
    if !a.valid || !b.valid {
        return Err(Error::UndefinedVelocity("a sample is invalid"));
    }
    let dt = b.t - a.t;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("velocity needs increasing times, got {} then {}", a.t, b.t)));
    }
    Ok((b.x - a.x).hypot(b.y - a.y) / dt * 1000.0)
}

/// Consecutive valid samples and the speed between them.
struct Step {
    from: usize,
    to: usize,
    speed: f64,
    /// The samples are further apart than the tolerated gap.
    gap: bool,
}

fn steps(stream: &[GazeSample], max_gap: f64) -> Vec<Step> {
    let mut out = Vec::new();
    let mut prev: Option<usize> = None;
    for (i, s) in stream.iter().enumerate() {
        if !s.valid {
            continue;
        }
        if let Some(p) = prev {
            if s.t <= stream[p].t {
                continue;
            }
            let speed = angular_velocity(&stream[p], s).expect("valid, increasing");
            out.push(Step { from: p, to: i, speed, gap: s.t - stream[p].t > max_gap });
        }
        prev = Some(i);
    }
    out
}

/// Detects saccades in a time-ordered stream.
///
/// Events are found left to right and scanning resumes after each event's
/// end, so events never overlap. Candidates interrupted by a gap longer than
/// `max_gap`, still in flight at the end of the stream, or smaller than
/// `min_amplitude` are dropped.
pub fn detect_saccades(stream: &[GazeSample], params: &DetectionParams) -> Vec<SaccadeTrace> {
    let steps = steps(stream, params.max_gap);
    let mut out = Vec::new();
    let mut j = 0;
    while j < steps.len() {
        if steps[j].gap || steps[j].speed <= params.v_detect {
            j += 1;
            continue;
        }
        let mut k = j;
        while k > 0 && !steps[k - 1].gap && steps[k - 1].speed >= params.v_anchor {
            k -= 1;
        }
        let Some(m) = (j + 1..steps.len()).find(|&m| steps[m].gap || steps[m].speed < params.v_anchor) else {
            break;
        };
        let resume = m + 1;
        if steps[m].gap {
            log::debug!("saccade candidate at t={} ms dropped: tracking gap", stream[steps[j].to].t);
            j = resume;
            continue;
        }
        let (anchor, detection, end) = (steps[k].from, steps[j].to, steps[m].to);
        if let Some(trace) = build_trace(stream, anchor, detection, end, params) {
            out.push(trace);
        }
        j = resume;
    }
    out
}

fn build_trace(
    stream: &[GazeSample],
    anchor: usize,
    detection: usize,
    end: usize,
    params: &DetectionParams,
) -> Option<SaccadeTrace> {
    let (a, e) = (stream[anchor], stream[end]);
    let dist = (e.x - a.x).hypot(e.y - a.y);
    if dist < params.min_amplitude {
        return None;
    }
    let first = stream[..anchor].partition_point(|s| s.t < a.t - params.pre_anchor_window);
    let trace = SaccadeTrace {
        samples: stream[first..=end].to_vec(),
        anchor_index: anchor - first,
        detection_index: detection - first,
        direction: [(e.x - a.x) / dist, (e.y - a.y) / dist],
    };
    trace.validate().ok().map(|_| trace)
}

fn project(trace: &SaccadeTrace, s: &GazeSample) -> f64 {
    let a = trace.anchor();
    (s.x - a.x) * trace.direction[0] + (s.y - a.y) * trace.direction[1]
}

/// Resamples a trace into a displacement profile anchored at t = 0.
///
/// Displacement is the projection onto the trace direction. Invalid samples
/// are skipped, which bridges them linearly. Valid samples before the anchor
/// become the profile's lead at t = -dt, -2dt, ...
pub fn trace_to_profile(trace: &SaccadeTrace, dt: f64) -> Result<SaccadeProfile> {
    trace.validate()?;
    let t0 = trace.anchor().t;
    let points: Vec<(f64, f64)> =
        trace.samples[trace.anchor_index..].iter().filter(|s| s.valid).map(|s| (s.t - t0, project(trace, s))).collect();
    let mut d = resample(&points, dt)?;
    d[0] = 0.0;

    let mut before: Vec<(f64, f64)> =
        trace.samples[..trace.anchor_index].iter().filter(|s| s.valid).map(|s| (t0 - s.t, project(trace, s))).collect();
    let lead = if before.is_empty() {
        Vec::new()
    } else {
        // Walk backwards in time: mirror to positive lags, nearest first.
        before.reverse();
        let mut mirrored = vec![(0.0, 0.0)];
        mirrored.extend(before);
        let mut lead = resample(&mirrored, dt)?;
        lead.remove(0);
        lead
    };
    SaccadeProfile::with_lead(dt, d, lead, CategoryLabel::none())
}

/// Detects and resamples in one go; traces that cannot be resampled are skipped.
pub fn detect_profiles(stream: &[GazeSample], params: &DetectionParams) -> Vec<SaccadeProfile> {
    detect_saccades(stream, params)
        .iter()
        .filter_map(|t| match trace_to_profile(t, DEFAULT_DT) {
            Ok(p) => Some(p),
            Err(e) => {
                log::debug!("trace at t={} ms skipped: {e}", t.anchor().t);
                None
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn s(t: f64, x: f64, y: f64) -> GazeSample {
        GazeSample::new(t, x, y)
    }

    #[test]
    fn velocity_examples() {
        assert_abs_diff_eq!(angular_velocity(&s(0.0, 0.0, 0.0), &s(10.0, 1.0, 0.0)).unwrap(), 100.0);
        assert_eq!(angular_velocity(&s(0.0, 2.0, 2.0), &s(5.0, 2.0, 2.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(angular_velocity(&s(0.0, 0.0, 0.0), &s(8.0, 3.0, 4.0)).unwrap(), 625.0);
        assert!(angular_velocity(&s(5.0, 0.0, 0.0), &s(5.0, 1.0, 0.0)).is_err());
        assert!(matches!(
            angular_velocity(&s(0.0, 0.0, 0.0), &GazeSample::invalid(8.0)),
            Err(Error::UndefinedVelocity(_))
        ));
    }

    #[test]
    fn fixation_has_no_saccades() {
        let stream: Vec<_> = (0..500).map(|i| s(i as f64 * 8.3, 3.0, -1.0)).collect();
        assert!(detect_saccades(&stream, &DetectionParams::default()).is_empty());
    }

    /// A 10° rightward step spread over 5 samples of 10 ms.
    fn step_stream() -> Vec<GazeSample> {
        let xs = [0.0, 0.0, 0.0, 0.0, 0.5, 2.5, 5.0, 7.5, 9.5, 10.0, 10.0, 10.0, 10.0];
        xs.iter().enumerate().map(|(i, x)| s(i as f64 * 10.0, *x, 0.0)).collect()
    }

    #[test]
    fn anchor_detection_and_end() {
        let traces = detect_saccades(&step_stream(), &DetectionParams::default());
        assert_eq!(traces.len(), 1);
        let t = &traces[0];
        // Speeds: 50, 200, 250, 250, 200, 50 deg/s from t = 30 ms on.
        assert_eq!(t.anchor().t, 40.0);
        assert_eq!(t.samples[t.detection_index].t, 50.0);
        assert_eq!(t.end().t, 90.0);
        assert_eq!(t.samples[0].t, 10.0);
        assert_eq!(t.direction, [1.0, 0.0]);
    }

    #[test]
    fn profile_is_projected_and_resampled() {
        let t = &detect_saccades(&step_stream(), &DetectionParams::default())[0];
        let p = trace_to_profile(t, 1.0).unwrap();
        assert_eq!(p.len(), 51);
        assert_abs_diff_eq!(p.displacement()[5], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.amplitude(), 9.5, epsilon = 1e-12);
        assert_eq!(p.lead().len(), 30);
        assert_abs_diff_eq!(p.lead()[4], -0.25, epsilon = 1e-12);
    }

    #[test]
    fn gaps_are_bridged_or_rejected() {
        let mut stream = step_stream();
        stream[6].valid = false;
        assert_eq!(detect_saccades(&stream, &DetectionParams::default()).len(), 1);
        stream[7].valid = false;
        stream[5].valid = false;
        assert!(detect_saccades(&stream, &DetectionParams::default()).is_empty());
    }

    #[test]
    fn small_movements_are_ignored() {
        let stream: Vec<_> = (0..20).map(|i| s(i as f64 * 10.0, if i > 10 { 0.8 } else { 0.0 }, 0.0)).collect();
        assert!(detect_saccades(&stream, &DetectionParams::default()).is_empty());
    }

    #[test]
    fn interrupted_stream_drops_the_event() {
        let stream = &step_stream()[..8];
        assert!(detect_saccades(stream, &DetectionParams::default()).is_empty());
    }

    #[test]
    fn trace_with_exact_millisecond_samples_is_copied() {
        let samples: Vec<_> = [0.0, 0.5, 2.0, 4.0].iter().enumerate().map(|(i, x)| s(i as f64, *x, 0.0)).collect();
        let trace = SaccadeTrace { samples, anchor_index: 0, detection_index: 1, direction: [1.0, 0.0] };
        assert_eq!(trace_to_profile(&trace, 1.0).unwrap().displacement(), &[0.0, 0.5, 2.0, 4.0]);
        let two = SaccadeTrace {
            samples: vec![s(0.0, 0.0, 0.0), s(5.0, 0.5, 0.0), s(10.0, 2.0, 0.0)],
            anchor_index: 0,
            detection_index: 1,
            direction: [1.0, 0.0],
        };
        assert_abs_diff_eq!(trace_to_profile(&two, 1.0).unwrap().displacement()[5], 0.5);
    }

    #[test]
    fn too_few_valid_samples_are_rejected() {
        let mut samples = vec![s(0.0, 0.0, 0.0), s(5.0, 1.0, 0.0), s(10.0, 2.0, 0.0)];
        samples[1].valid = false;
        let trace = SaccadeTrace { samples, anchor_index: 0, detection_index: 1, direction: [1.0, 0.0] };
        assert!(matches!(trace_to_profile(&trace, 1.0), Err(Error::TooFewSamples { .. })));
    }
}
