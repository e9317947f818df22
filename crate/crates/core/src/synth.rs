//! Ground-truth synthetic saccades.
//!
//! The noiseless displacement of a saccade of amplitude α is
//!
//! ```text
//! d(t) = α · (1 − exp(−Φ(t/γ))) / (1 − exp(−K)),   0 ≤ t ≤ γ·T
//! Φ(s) = (s/τ)^β / (1 + s/(c·τ))
//! T = slope·α + intercept,   τ = rise_scale · (α/10)^rise_exponent
//! ```
//!
//! where `c` is chosen so that Φ(T) = K (`tail_level`), making the profile
//! reach α exactly at γ·T. The onset rise time τ grows slowly with amplitude,
//! which keeps larger saccades ahead of smaller ones at every elapsed time
//! (the lookup model relies on that order). Category effects are a pure time
//! dilation γ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::trace_to_profile;
use crate::error::{Error, Result};
use crate::types::{CategoryLabel, DatasetMetadata, GazeSample, SaccadeDataset, SaccadeProfile, SaccadeTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategorySpec {
    pub label: CategoryLabel,
    /// Time dilation; 1.15 makes saccades 15 % slower.
    pub gamma: f64,
    /// Relative frequency.
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    /// Tracker rate in Hz.
    pub rate: f64,
    /// Standard deviation of the additive angular noise per axis, in degrees.
    pub noise_sigma: f64,
    /// Probability that a tracker sample is invalid.
    pub dropout: f64,
    /// Log-normal spread of each saccade's own time dilation around its
    /// category's; models trial-to-trial scatter about the main sequence.
    pub speed_jitter: f64,
    pub categories: Vec<CategorySpec>,
    /// Main sequence: duration = slope·α + intercept, in ms.
    pub duration_slope: f64,
    pub duration_intercept: f64,
    /// Shape exponent β of the onset.
    pub shape_exponent: f64,
    /// Onset rise time of a 10° saccade, in ms.
    pub rise_scale: f64,
    pub rise_exponent: f64,
    /// Φ at the end of the saccade; sets how abruptly it lands.
    pub tail_level: f64,
    /// Resampling interval of the generated profiles, in ms.
    pub dt: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            amplitude_min: 5.0,
            amplitude_max: 45.0,
            rate: 120.0,
            noise_sigma: 0.1,
            dropout: 0.0369,
            speed_jitter: 0.0,
            categories: vec![CategorySpec { label: CategoryLabel::none(), gamma: 1.0, weight: 1.0 }],
            duration_slope: 2.2,
            duration_intercept: 21.0,
            shape_exponent: 2.0,
            rise_scale: 20.0,
            rise_exponent: 0.4,
            tail_level: 8.0,
            dt: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Horizontal saccades at natural speed, vertical ones slowed by `gamma`.
    pub fn orientation(vertical_gamma: f64, vertical_weight: f64) -> Self {
        Self {
            categories: vec![
                CategorySpec { label: CategoryLabel::horizontal(), gamma: 1.0, weight: 1.0 - vertical_weight },
                CategorySpec { label: CategoryLabel::vertical(), gamma: vertical_gamma, weight: vertical_weight },
            ],
            ..Self::default()
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.noise_sigma = 0.0;
        self.dropout = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.amplitude_min > 0.0 && self.amplitude_max >= self.amplitude_min && self.amplitude_max.is_finite()) {
            return bad("amplitude range must satisfy 0 < min <= max");
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad("rate must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative");
        }
        if !(self.speed_jitter >= 0.0 && self.speed_jitter.is_finite()) {
            return bad("speed_jitter must be non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.categories.is_empty() {
            return bad("at least one category is required");
        }
        for c in &self.categories {
            if !(c.gamma > 0.0 && c.gamma.is_finite()) || !(c.weight >= 0.0 && c.weight.is_finite()) {
                return bad("category gamma must be positive and weight non-negative");
            }
            if !c.label.is_none() {
                CategoryLabel::new(c.label.factor(), c.label.value())?;
            }
        }
        if self.categories.iter().map(|c| c.weight).sum::<f64>() <= 0.0 {
            return bad("category weights must not all be zero");
        }
        let shape = [
            self.duration_slope,
            self.duration_intercept,
            self.shape_exponent,
            self.rise_scale,
            self.tail_level,
            self.dt,
        ];
        if shape.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !self.rise_exponent.is_finite() {
            return bad("template constants must be positive and finite");
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1000.0 / self.rate
    }

    /// Undilated duration T(α) in ms.
    pub fn duration(&self, alpha: f64) -> f64 {
        self.duration_slope * alpha + self.duration_intercept
    }

    /// Noiseless displacement at time `t` after onset.
    pub fn displacement(&self, alpha: f64, gamma: f64, t: f64) -> f64 {
        Template::new(self, alpha).eval(t / gamma)
    }

    /// Noiseless profile sampled at `dt` up to the first grid point at or past γ·T.
    pub fn template_profile(&self, alpha: f64, gamma: f64) -> Result<SaccadeProfile> {
        let tpl = Template::new(self, alpha);
        let end = gamma * tpl.duration;
        let n = (end / self.dt - 1e-9).ceil() as usize;
        let d = (0..=n).map(|l| tpl.eval((l as f64 * self.dt).min(end) / gamma)).collect();
        SaccadeProfile::new(self.dt, d, CategoryLabel::none())
    }
}

/// The displacement template for one amplitude, in undilated time.
struct Template {
    alpha: f64,
    duration: f64,
    tau: f64,
    beta: f64,
    /// 1/c; zero when c is infinite.
    inv_c: f64,
    norm: f64,
}

impl Template {
    fn new(cfg: &SynthConfig, alpha: f64) -> Self {
        let duration = cfg.duration(alpha);
        let tau = cfg.rise_scale * (alpha / 10.0).powf(cfg.rise_exponent);
        let beta = cfg.shape_exponent;
        let u = duration / tau;
        let ub = u.powf(beta);
        // Φ(T) = u^β / (1 + u/c) = K  ⇒  1/c = (u^β/K − 1)/u.
        let inv_c = (ub / cfg.tail_level - 1.0) / u;
        let phi_end = ub / (1.0 + u * inv_c);
        Self { alpha, duration, tau, beta, inv_c, norm: 1.0 - (-phi_end).exp() }
    }

    fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= self.duration {
            return self.alpha;
        }
        let v = s / self.tau;
        let phi = v.powf(self.beta) / (1.0 + v * self.inv_c);
        self.alpha * (1.0 - (-phi).exp()) / self.norm
    }
}

/// Ground truth for one generated saccade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub index: usize,
    /// Onset time within the trace or stream, in ms.
    pub onset: f64,
    pub amplitude: f64,
    /// Dilated duration γ·T, in ms.
    pub duration: f64,
    /// Effective dilation: the category's times this saccade's speed factor.
    pub gamma: f64,
    pub category: CategoryLabel,
    pub direction: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub records: Vec<TruthRecord>,
}

impl GroundTruth {
    pub fn onsets(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.onset).collect()
    }
    pub fn amplitudes(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.amplitude).collect()
    }
    pub fn durations(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.duration).collect()
    }
}

/// Output of [`generate`].
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub dataset: SaccadeDataset,
    pub traces: Vec<SaccadeTrace>,
    pub truth: GroundTruth,
}

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn pick_category<'a>(cfg: &'a SynthConfig, rng: &mut impl Rng) -> &'a CategorySpec {
    let total: f64 = cfg.categories.iter().map(|c| c.weight).sum();
    let mut u = rng.gen::<f64>() * total;
    for c in &cfg.categories {
        if u < c.weight {
            return c;
        }
        u -= c.weight;
    }
    cfg.categories.iter().rev().find(|c| c.weight > 0.0).expect("validated weights")
}

/// Unit direction: ±x for horizontal, ±y for vertical, any angle otherwise.
fn pick_direction(label: &CategoryLabel, rng: &mut impl Rng) -> [f64; 2] {
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    match label.value() {
        "horizontal" => [sign, 0.0],
        "vertical" => [0.0, sign],
        _ => {
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            [theta.cos(), theta.sin()]
        }
    }
}

/// The category's dilation scaled by this saccade's own speed factor.
fn draw_gamma(cfg: &SynthConfig, cat: &CategorySpec, rng: &mut impl Rng) -> f64 {
    if cfg.speed_jitter > 0.0 {
        let z: f64 = rand_distr::StandardNormal.sample(rng);
        cat.gamma * (cfg.speed_jitter * z).exp()
    } else {
        cat.gamma
    }
}

fn draw_amplitude(cfg: &SynthConfig, rng: &mut impl Rng) -> f64 {
    if cfg.amplitude_max > cfg.amplitude_min {
        rng.gen_range(cfg.amplitude_min..cfg.amplitude_max)
    } else {
        cfg.amplitude_min
    }
}

struct Noise {
    normal: Option<Normal<f64>>,
    dropout: f64,
}

impl Noise {
    fn new(cfg: &SynthConfig) -> Self {
        let normal = (cfg.noise_sigma > 0.0).then(|| Normal::new(0.0, cfg.noise_sigma).expect("validated sigma"));
        Self { normal, dropout: cfg.dropout }
    }

    fn sample(&self, rng: &mut impl Rng, t: f64, pos: [f64; 2], protect: bool) -> GazeSample {
        let (nx, ny) = match &self.normal {
            Some(n) => (n.sample(rng), n.sample(rng)),
            None => (0.0, 0.0),
        };
        let dropped = self.dropout > 0.0 && rng.gen::<f64>() < self.dropout;
        GazeSample { t, x: pos[0] + nx, y: pos[1] + ny, valid: protect || !dropped }
    }
}

fn one_saccade(cfg: &SynthConfig, index: usize) -> Result<(SaccadeTrace, SaccadeProfile, TruthRecord)> {
    let mut rng = rng_for(cfg.seed, index);
    let cat = pick_category(cfg, &mut rng);
    let alpha = draw_amplitude(cfg, &mut rng);
    let dir = pick_direction(&cat.label, &mut rng);
    let tpl = Template::new(cfg, alpha);
    let gamma = draw_gamma(cfg, cat, &mut rng);
    let end = gamma * tpl.duration;
    let period = cfg.period();
    let noise = Noise::new(cfg);
    let onset = 100.0;

    let lead = (30.0 / period).ceil() as usize;
    let mut offsets: Vec<f64> = (1..=lead).rev().map(|k| -(k as f64) * period).collect();
    let mut k = 0;
    while (k as f64) * period < end {
        offsets.push(k as f64 * period);
        k += 1;
    }
    // The endpoint sample lands on the profile grid, so the resampled
    // profile ends exactly at the amplitude.
    let last = (end / cfg.dt - 1e-9).ceil() * cfg.dt;
    if last > offsets[offsets.len() - 1] + 1e-9 {
        offsets.push(last);
    }
    let anchor_index = lead;
    let final_index = offsets.len() - 1;
    let samples: Vec<GazeSample> = offsets
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let d = tpl.eval(s / gamma);
            let protect = i == anchor_index || i == final_index;
            noise.sample(&mut rng, onset + s, [d * dir[0], d * dir[1]], protect)
        })
        .collect();
    let (a, e) = (samples[anchor_index], samples[final_index]);
    let len = (e.x - a.x).hypot(e.y - a.y);
    let direction = if len > 0.0 { [(e.x - a.x) / len, (e.y - a.y) / len] } else { dir };
    let trace = SaccadeTrace { samples, anchor_index, detection_index: anchor_index + 1, direction };
    let mut profile = trace_to_profile(&trace, cfg.dt)?;
    profile.category = cat.label.clone();
    let truth = TruthRecord {
        index,
        onset,
        amplitude: alpha,
        duration: end,
        gamma,
        category: cat.label.clone(),
        direction: dir,
    };
    Ok((trace, profile, truth))
}

/// Generates `n` independent saccades, each sampled at the tracker rate from
/// 30 ms before onset to its end, then resampled into a profile anchored at
/// the onset sample. Deterministic for a fixed seed; saccade `i` depends only
/// on the seed and `i`.
pub fn generate(cfg: &SynthConfig, n: usize) -> Result<SynthCorpus> {
    cfg.validate()?;
    let items = (0..n).into_par_iter().map(|i| one_saccade(cfg, i)).collect::<Result<Vec<_>>>()?;
    let metadata = DatasetMetadata {
        source: format!("synthetic (seed {}, {} saccades)", cfg.seed, n),
        tracker_rate_hz: cfg.rate,
        units: "ms,deg".into(),
        dt: cfg.dt,
    };
    let mut dataset = SaccadeDataset::new(metadata);
    let mut traces = Vec::with_capacity(n);
    let mut truth = GroundTruth::default();
    for (trace, profile, record) in items {
        dataset.push(profile)?;
        traces.push(trace);
        truth.records.push(record);
    }
    Ok(SynthCorpus { dataset, traces, truth })
}

/// Noiseless 1-sample-per-dt profiles straight from the template.
pub fn generator_profiles(cfg: &SynthConfig, n: usize) -> Result<(SaccadeDataset, GroundTruth)> {
    cfg.validate()?;
    let mut dataset = SaccadeDataset::new(DatasetMetadata { dt: cfg.dt, ..DatasetMetadata::default() });
    let mut truth = GroundTruth::default();
    for i in 0..n {
        let mut rng = rng_for(cfg.seed, i);
        let cat = pick_category(cfg, &mut rng);
        let alpha = draw_amplitude(cfg, &mut rng);
        let dir = pick_direction(&cat.label, &mut rng);
        let gamma = draw_gamma(cfg, cat, &mut rng);
        let profile = cfg.template_profile(alpha, gamma)?.with_category(cat.label.clone());
        dataset.push(profile)?;
        truth.records.push(TruthRecord {
            index: i,
            onset: 0.0,
            amplitude: alpha,
            duration: gamma * cfg.duration(alpha),
            gamma,
            category: cat.label.clone(),
            direction: dir,
        });
    }
    Ok((dataset, truth))
}

/// A continuous stream of `n` saccades separated by fixations of
/// `fixation_ms`, with consecutive saccades along an axis alternating in
/// sign so the gaze stays near the origin. The sampling phase relative to
/// each onset is random.
pub fn generate_stream(cfg: &SynthConfig, n: usize, fixation_ms: f64) -> Result<(Vec<GazeSample>, GroundTruth)> {
    cfg.validate()?;
    if !(fixation_ms >= 0.0 && fixation_ms.is_finite()) {
        return Err(Error::InvalidParameter("fixation duration must be non-negative".into()));
    }
    let mut rng = rng_for(cfg.seed, usize::MAX);
    let noise = Noise::new(cfg);
    let period = cfg.period();

    let mut plan: Vec<(Template, f64, [f64; 2])> = Vec::with_capacity(n);
    let mut truth = GroundTruth::default();
    let mut pos = [0.0, 0.0];
    let mut t = fixation_ms;
    let mut last_dir: Option<[f64; 2]> = None;
    for i in 0..n {
        let cat = pick_category(cfg, &mut rng);
        let alpha = draw_amplitude(cfg, &mut rng);
        let mut dir = pick_direction(&cat.label, &mut rng);
        if let Some(prev) = last_dir {
            if dir[0] * prev[0] + dir[1] * prev[1] > 0.0 {
                dir = [-dir[0], -dir[1]];
            }
        }
        last_dir = Some(dir);
        let gamma = draw_gamma(cfg, cat, &mut rng);
        let onset = t + rng.gen_range(0.0..period);
        let tpl = Template::new(cfg, alpha);
        let duration = gamma * tpl.duration;
        truth.records.push(TruthRecord {
            index: i,
            onset,
            amplitude: alpha,
            duration,
            gamma,
            category: cat.label.clone(),
            direction: dir,
        });
        plan.push((tpl, gamma, pos));
        pos = [pos[0] + alpha * dir[0], pos[1] + alpha * dir[1]];
        t = onset + duration + fixation_ms;
    }

    let position = |time: f64| -> [f64; 2] {
        // Last saccade whose onset is at or before `time`.
        let k = truth.records.partition_point(|r| r.onset <= time);
        if k == 0 {
            return [0.0, 0.0];
        }
        let (tpl, gamma, start) = &plan[k - 1];
        let rec = &truth.records[k - 1];
        let d = tpl.eval((time - rec.onset) / gamma);
        [start[0] + d * rec.direction[0], start[1] + d * rec.direction[1]]
    };
    let total = (t / period).ceil() as usize;
    let samples = (0..=total)
        .map(|k| {
            let time = k as f64 * period;
            noise.sample(&mut rng, time, position(time), false)
        })
        .collect();
    Ok((samples, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{detect_saccades, DetectionParams};
    use proptest::prelude::*;

    #[test]
    fn template_reaches_amplitude_at_duration() {
        let cfg = SynthConfig::default();
        for alpha in [5.0, 12.5, 30.0, 45.0] {
            for gamma in [1.0, 1.15] {
                let p = cfg.template_profile(alpha, gamma).unwrap();
                assert_eq!(p.displacement()[0], 0.0);
                assert!((p.amplitude() - alpha).abs() < 1e-9);
                let expected = (gamma * cfg.duration(alpha) - 1e-9).ceil();
                assert_eq!(p.len() as f64 - 1.0, expected);
                assert!(p.displacement().windows(2).all(|w| w[1] >= w[0]));
            }
        }
    }

    #[test]
    fn larger_saccades_lead_at_every_time() {
        let cfg = SynthConfig::default();
        let rows: Vec<SaccadeProfile> = (5..=45).map(|a| cfg.template_profile(a as f64, 1.0).unwrap()).collect();
        for w in rows.windows(2) {
            let n = w[1].len();
            for l in 0..n {
                let lo = crate::interp::held(w[0].displacement(), l);
                let hi = crate::interp::held(w[1].displacement(), l);
                assert!(hi >= lo - 1e-12, "{} vs {} at {l}", w[0].amplitude(), w[1].amplitude());
            }
        }
    }

    #[test]
    fn dilation_stretches_time() {
        let cfg = SynthConfig::default();
        for s in [3.0, 10.0, 40.0] {
            let slow = cfg.displacement(20.0, 1.2, 1.2 * s);
            let fast = cfg.displacement(20.0, 1.0, s);
            assert!((slow - fast).abs() < 1e-12);
        }
    }

    #[test]
    fn generation_is_deterministic_and_indexed() {
        let cfg = SynthConfig { seed: 42, ..SynthConfig::orientation(1.15, 0.3) };
        let a = generate(&cfg, 40).unwrap();
        let b = generate(&cfg, 40).unwrap();
        assert_eq!(a.dataset.profiles(), b.dataset.profiles());
        assert_eq!(a.truth, b.truth);
        let prefix = generate(&cfg, 10).unwrap();
        assert_eq!(&a.dataset.profiles()[..10], prefix.dataset.profiles());
        let other = generate(&SynthConfig { seed: 43, ..cfg }, 40).unwrap();
        assert_ne!(a.truth, other.truth);
    }

    #[test]
    fn noiseless_profiles_follow_template() {
        let cfg = SynthConfig::default().noiseless();
        let corpus = generate(&cfg, 20).unwrap();
        for (p, r) in corpus.dataset.profiles().iter().zip(&corpus.truth.records) {
            assert!((p.amplitude() - r.amplitude).abs() < 1e-9);
            assert!((p.duration() - r.duration.ceil()).abs() < 1e-9);
            assert_eq!(p.displacement()[0], 0.0);
        }
    }

    #[test]
    fn categories_follow_weights() {
        let cfg = SynthConfig { seed: 7, ..SynthConfig::orientation(1.15, 0.3) };
        let corpus = generate(&cfg, 2000).unwrap();
        let vertical = corpus.truth.records.iter().filter(|r| r.category == CategoryLabel::vertical()).count();
        assert!((500..700).contains(&vertical), "{vertical}");
        for r in &corpus.truth.records {
            let axis = if r.category == CategoryLabel::vertical() { r.direction[0] } else { r.direction[1] };
            assert_eq!(axis, 0.0);
        }
    }

    #[test]
    fn stream_saccades_are_detected() {
        let cfg = SynthConfig { seed: 3, ..SynthConfig::default() };
        let (samples, truth) = generate_stream(&cfg, 30, 500.0).unwrap();
        assert!(samples.windows(2).all(|w| w[1].t > w[0].t));
        let events = detect_saccades(&samples, &DetectionParams::default());
        assert_eq!(events.len(), truth.records.len());
        for (e, r) in events.iter().zip(&truth.records) {
            assert!((e.anchor().t - r.onset).abs() <= cfg.period() + 1e-9);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            SynthConfig { amplitude_min: 0.0, ..SynthConfig::default() },
            SynthConfig { dropout: 1.0, ..SynthConfig::default() },
            SynthConfig { categories: vec![], ..SynthConfig::default() },
            SynthConfig { rate: -1.0, ..SynthConfig::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    proptest! {
        #[test]
        fn template_is_monotone_in_time(alpha in 5.0f64..45.0, gamma in 0.8f64..1.4) {
            let p = SynthConfig::default().template_profile(alpha, gamma).unwrap();
            prop_assert!(p.displacement().windows(2).all(|w| w[1] >= w[0] - 1e-12));
            prop_assert!((p.amplitude() - alpha).abs() < 1e-9);
        }

        #[test]
        fn saccade_depends_only_on_seed_and_index(seed in 0u64..1000, n in 2usize..12) {
            let cfg = SynthConfig { seed, ..SynthConfig::default() };
            let all = generate(&cfg, n).unwrap();
            let last = one_saccade(&cfg, n - 1).unwrap();
            prop_assert_eq!(&all.dataset.profiles()[n - 1], &last.1);
        }
    }
}
