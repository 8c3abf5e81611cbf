//! Finite-count coincidence experiments sampled from the exact detector
//! probabilities.
//!
//! Each shot is one emitted pair. The ideal outcome (one corroborative and
//! one test detector) is drawn first, then each signal click survives with
//! the detector efficiency, then every detector independently adds a dark
//! click. Only windows with exactly one corroborative and exactly one test
//! click count; everything else is reported as a discard.
//!
//! Shots are processed in fixed chunks of [`CHUNK_SHOTS`]. Chunk `k` draws
//! from the ChaCha8 stream `k` of the generator seeded with the model seed,
//! so totals do not depend on how chunks are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{
    joint_detector_probabilities, CoincidenceCategory, CorroborativeDetector, DetectorId, ExperimentSettings,
    JointTable, TestGroup,
};

pub const CHUNK_SHOTS: u64 = 1 << 14;
pub const DEFAULT_EFFICIENCY: f64 = 0.25;
/// Accidental share of valid coincidences, 3 noise events per 350.
pub const DEFAULT_NOISE_RATIO: f64 = 3.0 / 350.0;
pub const DEFAULT_WINDOW_NS: f64 = 1.0;
pub const DEFAULT_SEED: u64 = 20_120_101;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    /// Per detector, in [`DetectorId::ALL`] order.
    pub efficiency: [f64; 6],
    /// Dark-click probability per detector per window, same order.
    pub dark_probability: [f64; 6],
    pub seed: u64,
    pub window_ns: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        let dark = dark_for_noise_ratio(DEFAULT_EFFICIENCY, DEFAULT_NOISE_RATIO).expect("default ratio attainable");
        Self::uniform(DEFAULT_EFFICIENCY, dark, DEFAULT_SEED)
    }
}

impl DetectionModel {
    pub fn uniform(efficiency: f64, dark_probability: f64, seed: u64) -> Self {
        Self {
            efficiency: [efficiency; 6],
            dark_probability: [dark_probability; 6],
            seed,
            window_ns: DEFAULT_WINDOW_NS,
        }
    }

    pub fn ideal(seed: u64) -> Self {
        Self::uniform(1.0, 0.0, seed)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, values) in [
            ("efficiency", &self.efficiency),
            ("dark probability", &self.dark_probability),
        ] {
            if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidProbability { name, value: *v });
            }
        }
        Ok(())
    }

    fn click_probability(&self, detector: usize, signal: bool) -> f64 {
        let d = self.dark_probability[detector];
        if signal {
            1.0 - (1.0 - self.efficiency[detector]) * (1.0 - d)
        } else {
            d
        }
    }
}

/// Bitmask over [`DetectorId::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Clicks(pub u8);

impl Clicks {
    pub fn fired(self, d: DetectorId) -> bool {
        self.0 & (1 << d.index()) != 0
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn detectors(self) -> impl Iterator<Item = DetectorId> {
        DetectorId::ALL.into_iter().filter(move |d| self.fired(*d))
    }

    pub fn classify(self) -> WindowOutcome {
        let corr = self.0 & 0b11;
        let test = self.0 >> 2;
        if corr.count_ones() > 1 || test.count_ones() > 1 {
            return WindowOutcome::MultiClick;
        }
        if corr == 0 || test == 0 {
            return WindowOutcome::Missing;
        }
        let c = if corr == 1 {
            CorroborativeDetector::H
        } else {
            CorroborativeDetector::V
        };
        let t = DetectorId::TEST[test.trailing_zeros() as usize];
        WindowOutcome::Coincidence(CoincidenceCategory::new(c, TestGroup::of(t).expect("test detector")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowOutcome {
    Coincidence(CoincidenceCategory),
    /// No click on at least one side.
    Missing,
    /// Two or more clicks on one side, rejected by the XOR gate.
    MultiClick,
}

/// Pre-computed ideal outcome distribution for one setting.
#[derive(Debug, Clone)]
pub struct ShotSampler {
    cumulative: [f64; 8],
    model: DetectionModel,
}

impl ShotSampler {
    pub fn new(settings: &ExperimentSettings, model: DetectionModel) -> Result<Self> {
        model.validate()?;
        Ok(Self::from_joint(&joint_detector_probabilities::<f64>(settings)?, model))
    }

    pub fn from_joint(joint: &JointTable<f64>, model: DetectionModel) -> Self {
        let mut cumulative = [0.0; 8];
        let mut acc = 0.0;
        for (k, slot) in cumulative.iter_mut().enumerate() {
            acc += joint[k / 4][k % 4];
            *slot = acc;
        }
        // rescale so the last bin closes exactly at 1
        for slot in cumulative.iter_mut() {
            *slot /= acc;
        }
        Self { cumulative, model }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Clicks {
        let u: f64 = rng.random();
        let k = self.cumulative.iter().position(|c| u < *c).unwrap_or(7);
        let signal_c = k / 4;
        let signal_t = 2 + k % 4;
        let mut mask = 0u8;
        for d in [signal_c, signal_t] {
            if rng.random::<f64>() < self.model.efficiency[d] {
                mask |= 1 << d;
            }
        }
        for d in 0..6 {
            if rng.random::<f64>() < self.model.dark_probability[d] {
                mask |= 1 << d;
            }
        }
        Clicks(mask)
    }
}

/// One window for the given settings. Builds the sampler on every call;
/// use [`ShotSampler`] in loops.
pub fn sample_shot<R: Rng + ?Sized>(
    settings: &ExperimentSettings,
    model: &DetectionModel,
    rng: &mut R,
) -> Result<Clicks> {
    Ok(ShotSampler::new(settings, *model)?.sample(rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "CountTableRecord", try_from = "CountTableRecord")]
pub struct CountTable {
    pub settings: ExperimentSettings,
    pub model: DetectionModel,
    pub n_shots: u64,
    /// Indexed by [`CoincidenceCategory::index`].
    pub counts: [u64; 4],
    pub missing: u64,
    pub multi_click: u64,
}

impl CountTable {
    fn empty(settings: ExperimentSettings, model: DetectionModel) -> Self {
        Self {
            settings,
            model,
            n_shots: 0,
            counts: [0; 4],
            missing: 0,
            multi_click: 0,
        }
    }

    pub fn count(&self, category: CoincidenceCategory) -> u64 {
        self.counts[category.index()]
    }

    pub fn valid(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn discarded(&self) -> u64 {
        self.missing + self.multi_click
    }

    fn record(&mut self, outcome: WindowOutcome) {
        self.n_shots += 1;
        match outcome {
            WindowOutcome::Coincidence(c) => self.counts[c.index()] += 1,
            WindowOutcome::Missing => self.missing += 1,
            WindowOutcome::MultiClick => self.multi_click += 1,
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        self.n_shots += other.n_shots;
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.missing += other.missing;
        self.multi_click += other.multi_click;
        self
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CountTableRecord {
    settings: ExperimentSettings,
    model: DetectionModel,
    n_shots: u64,
    counts: std::collections::BTreeMap<String, u64>,
    valid: u64,
    discards: Discards,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Discards {
    missing: u64,
    multi_click: u64,
}

impl From<CountTable> for CountTableRecord {
    fn from(t: CountTable) -> Self {
        Self {
            counts: CoincidenceCategory::ALL
                .iter()
                .map(|c| (c.label().to_string(), t.count(*c)))
                .collect(),
            valid: t.valid(),
            discards: Discards {
                missing: t.missing,
                multi_click: t.multi_click,
            },
            seed: t.model.seed,
            settings: t.settings,
            model: t.model,
            n_shots: t.n_shots,
        }
    }
}

impl TryFrom<CountTableRecord> for CountTable {
    type Error = String;

    fn try_from(r: CountTableRecord) -> std::result::Result<Self, String> {
        let mut counts = [0; 4];
        for c in CoincidenceCategory::ALL {
            counts[c.index()] = *r
                .counts
                .get(c.label())
                .ok_or_else(|| format!("missing count `{}`", c.label()))?;
        }
        let t = CountTable {
            settings: r.settings,
            model: r.model,
            n_shots: r.n_shots,
            counts,
            missing: r.discards.missing,
            multi_click: r.discards.multi_click,
        };
        if t.valid() + t.discarded() != t.n_shots {
            return Err("valid + discarded != nShots".into());
        }
        Ok(t)
    }
}

fn run_chunk(sampler: &ShotSampler, table: CountTable, chunk: u64, shots: u64) -> CountTable {
    let mut rng = ChaCha8Rng::seed_from_u64(table.model.seed);
    rng.set_stream(chunk);
    let mut t = table;
    for _ in 0..shots {
        t.record(sampler.sample(&mut rng).classify());
    }
    t
}

/// Runs `n_shots` windows on the current rayon pool.
pub fn run(settings: &ExperimentSettings, model: &DetectionModel, n_shots: u64) -> Result<CountTable> {
    if n_shots == 0 {
        return Err(Error::ZeroShots);
    }
    let sampler = ShotSampler::new(settings, *model)?;
    let blank = CountTable::empty(*settings, *model);
    let chunks = n_shots.div_ceil(CHUNK_SHOTS);
    let total = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let shots = CHUNK_SHOTS.min(n_shots - k * CHUNK_SHOTS);
            run_chunk(&sampler, blank.clone(), k, shots)
        })
        .reduce(|| blank.clone(), |a, b| a.merge(&b));
    Ok(total)
}

/// [`run`] on a dedicated pool of `threads` workers.
pub fn run_with_threads(
    settings: &ExperimentSettings,
    model: &DetectionModel,
    n_shots: u64,
    threads: usize,
) -> Result<CountTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    pool.install(|| run(settings, model, n_shots))
}

/// Seed of grid point `index` in a multi-point run.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// One table per setting, `n_shots` each, in input order. Point `i` uses
/// [`point_seed`]`(model.seed, i)`.
pub fn run_grid(settings: &[ExperimentSettings], model: &DetectionModel, n_shots: u64) -> Result<Vec<CountTable>> {
    settings
        .par_iter()
        .enumerate()
        .map(|(i, s)| run(s, &model.with_seed(point_seed(model.seed, i)), n_shots))
        .collect()
}

/// Binomial estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    /// Number of heralded coincidences the fraction is taken over.
    pub conditioned: u64,
}

pub fn estimate_from_counts(hits: u64, misses: u64) -> Result<Estimate> {
    let n = hits + misses;
    if n == 0 {
        return Err(Error::NoConditionedCounts);
    }
    let p = hits as f64 / n as f64;
    Ok(Estimate {
        value: p,
        stderr: (p * (1.0 - p) / n as f64).sqrt(),
        conditioned: n,
    })
}

/// `N(herald, group) / N(herald, any group)` for the category's herald.
pub fn estimate_category(table: &CountTable, category: CoincidenceCategory) -> Result<Estimate> {
    let hits = table.count(category);
    let misses = table.count(CoincidenceCategory::new(category.corroborative, category.group.other()));
    estimate_from_counts(hits, misses)
}

/// Estimate of the `(D_H, A)` correlation.
pub fn estimate(table: &CountTable) -> Result<Estimate> {
    estimate_category(table, CoincidenceCategory::HA)
}

/// Exact per-window probabilities under a detection model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowProbabilities {
    pub coincidence: [f64; 4],
    pub missing: f64,
    pub multi_click: f64,
    /// Valid windows where a click came from a non-signal detector.
    pub noise: f64,
}

impl WindowProbabilities {
    pub fn valid(&self) -> f64 {
        self.coincidence.iter().sum()
    }

    pub fn conditional(&self, category: CoincidenceCategory) -> f64 {
        let other = CoincidenceCategory::new(category.corroborative, category.group.other());
        let hit = self.coincidence[category.index()];
        hit / (hit + self.coincidence[other.index()])
    }
}

/// Enumerates all 2⁶ click patterns for each ideal outcome.
pub fn expected_window_probabilities(joint: &JointTable<f64>, model: &DetectionModel) -> WindowProbabilities {
    let mut out = WindowProbabilities {
        coincidence: [0.0; 4],
        missing: 0.0,
        multi_click: 0.0,
        noise: 0.0,
    };
    for k in 0..8 {
        let p_outcome = joint[k / 4][k % 4];
        if p_outcome == 0.0 {
            continue;
        }
        let signal = (1u8 << (k / 4)) | (1u8 << (2 + k % 4));
        for mask in 0u8..64 {
            let mut p = p_outcome;
            for d in 0..6 {
                let q = model.click_probability(d, signal & (1 << d) != 0);
                p *= if mask & (1 << d) != 0 { q } else { 1.0 - q };
            }
            match Clicks(mask).classify() {
                WindowOutcome::Coincidence(c) => {
                    out.coincidence[c.index()] += p;
                    if mask & !signal != 0 {
                        out.noise += p;
                    }
                }
                WindowOutcome::Missing => out.missing += p,
                WindowOutcome::MultiClick => out.multi_click += p,
            }
        }
    }
    out
}

/// Share of valid coincidences that contain a dark click, averaged over a
/// uniform ideal outcome distribution.
pub fn noise_ratio(model: &DetectionModel) -> f64 {
    let w = expected_window_probabilities(&[[0.125; 4]; 2], model);
    w.noise / w.valid()
}

fn bisect(mut lo: f64, mut hi: f64, target: f64, f: impl Fn(f64) -> f64) -> f64 {
    // f increasing on [lo, hi]
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Uniform dark-click probability giving the requested noise ratio at
/// uniform efficiency `efficiency`.
pub fn dark_for_noise_ratio(efficiency: f64, ratio: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidProbability {
            name: "noise ratio",
            value: ratio,
        });
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::InvalidProbability {
            name: "efficiency",
            value: efficiency,
        });
    }
    let f = |d: f64| noise_ratio(&DetectionModel::uniform(efficiency, d, 0));
    if f(0.5) < ratio {
        return Err(Error::InvalidProbability {
            name: "noise ratio",
            value: ratio,
        });
    }
    Ok(bisect(0.0, 0.5, ratio, f))
}

/// Fringe visibility of the fully heralded wave case (θ-scan at α = 90°,
/// H/V analysis) expected under `model`.
pub fn expected_wave_visibility(model: &DetectionModel) -> Result<f64> {
    let at = |theta: f64| -> Result<f64> {
        let joint = joint_detector_probabilities::<f64>(&ExperimentSettings::new(theta, 90.0))?;
        Ok(expected_window_probabilities(&joint, model).conditional(CoincidenceCategory::HA))
    };
    let (hi, lo) = (at(0.0)?, at(std::f64::consts::PI)?);
    Ok((hi - lo) / (hi + lo))
}

/// Uniform dark-click probability that brings the expected wave-limit
/// visibility down to `target` at the given efficiency.
pub fn dark_for_visibility(efficiency: f64, target: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidProbability {
            name: "target visibility",
            value: target,
        });
    }
    let f = |d: f64| -> f64 {
        let v = expected_wave_visibility(&DetectionModel::uniform(efficiency, d, 0)).unwrap_or(f64::NAN);
        1.0 - v
    };
    if !(f(0.5) >= 1.0 - target) {
        return Err(Error::InvalidProbability {
            name: "target visibility",
            value: target,
        });
    }
    Ok(bisect(0.0, 0.5, 1.0 - target, f))
}
