//! Monte Carlo simulation of realistic bit transmission.
//!
//! A bit trial draws one realisation of the interferometer phase errors, then
//! Poisson photon arrivals thinned by coupling, channel loss and detector
//! efficiency, a multinomial split over the detector outcomes of that
//! realisation, and Poisson dark counts on every detector.

mod trace;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{self, DetectionReport, ModeId, PureState, SwitchPattern};
use crate::protocol::{inner_structure, Bit, BuiltProtocol, ProtocolError};

pub use trace::{trace_audit, SegmentTrace, TraceReport, TRACE_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid imperfection model: {0}")]
    InvalidModel(String),
    #[error("duration must be positive and finite, got {0}")]
    InvalidDuration(f64),
    #[error("visibility {0} cannot be reached by phase jitter")]
    VisibilityUnreachable(f64),
    #[error("no trial results given")]
    EmptyInput,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

impl From<engine::EngineError> for ChannelError {
    fn from(e: engine::EngineError) -> Self {
        ChannelError::Protocol(e.into())
    }
}

/// Experimental imperfections. Defaults follow the on-chip experiment; the
/// dark-count rate is an assumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImperfectionModel {
    pub loss_bit0_db: f64,
    pub loss_bit1_db: f64,
    pub visibility: f64,
    /// Photons per second.
    pub source_rate: f64,
    pub coupling_eff: f64,
    pub detector_eff: f64,
    /// Counts per second per detector.
    pub dark_rate: f64,
}

impl Default for ImperfectionModel {
    fn default() -> Self {
        Self {
            loss_bit0_db: 11.0,
            loss_bit1_db: 17.0,
            visibility: 0.99,
            source_rate: 1.9e6,
            coupling_eff: 0.40,
            detector_eff: 0.90,
            dark_rate: 100.0,
        }
    }
}

impl ImperfectionModel {
    /// Lossless, perfectly interfering, dark-count-free channel at the default source rate.
    pub fn ideal() -> Self {
        Self {
            loss_bit0_db: 0.0,
            loss_bit1_db: 0.0,
            visibility: 1.0,
            coupling_eff: 1.0,
            detector_eff: 1.0,
            dark_rate: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let frac = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ChannelError::InvalidModel(format!("{name} = {v} not in [0, 1]")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ChannelError::InvalidModel(format!("{name} = {v} must be finite and >= 0")))
            }
        };
        frac("visibility", self.visibility)?;
        frac("coupling_eff", self.coupling_eff)?;
        frac("detector_eff", self.detector_eff)?;
        nonneg("loss_bit0_db", self.loss_bit0_db)?;
        nonneg("loss_bit1_db", self.loss_bit1_db)?;
        nonneg("source_rate", self.source_rate)?;
        nonneg("dark_rate", self.dark_rate)
    }

    pub fn loss_db(&self, bit: Bit) -> f64 {
        match bit {
            Bit::Zero => self.loss_bit0_db,
            Bit::One => self.loss_bit1_db,
        }
    }
}

pub fn db_to_transmittance(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Reproducible random stream; distinct `(seed, stream)` pairs are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Interference fringe visibility (I_max − I_min)/(I_max + I_min).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityEstimate {
    pub i_max: f64,
    pub i_min: f64,
    pub v: f64,
}

impl VisibilityEstimate {
    pub fn new(i_max: f64, i_min: f64) -> Self {
        let total = i_max + i_min;
        let v = if total > 0.0 { (i_max - i_min) / total } else { 0.0 };
        Self { i_max, i_min, v }
    }
}

const CALIBRATION_SAMPLES: usize = 2048;
const CALIBRATION_SEED: u64 = 0x5eed_cafe;

fn calibration_draws(n_couplers: usize) -> Vec<Vec<f64>> {
    let mut rng = RngStream::new(CALIBRATION_SEED, n_couplers as u64).rng();
    (0..CALIBRATION_SAMPLES)
        .map(|_| (0..n_couplers).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

/// Mean bright/dark port intensities of one ideal inner structure with phase
/// jitter `sigma` on every coupler, averaged over the fixed calibration draws.
pub fn structure_visibility(inner_n: usize, sigma: f64) -> Result<VisibilityEstimate, ChannelError> {
    let (net, slots) = inner_structure(inner_n)?;
    let draws = calibration_draws(slots.len());
    visibility_with_draws(&net, &slots, sigma, &draws)
}

fn visibility_with_draws(
    net: &engine::NetworkSpec,
    slots: &[usize],
    sigma: f64,
    draws: &[Vec<f64>],
) -> Result<VisibilityEstimate, ChannelError> {
    let input = PureState::basis(net.num_modes(), ModeId(0));
    let none = SwitchPattern::default();
    let (mut bright, mut dark) = (0.0, 0.0);
    for z in draws {
        let offsets: Vec<(usize, f64)> = slots.iter().zip(z).map(|(&s, &x)| (s, sigma * x)).collect();
        let (_, rep) = engine::propagate(&net.with_offsets(&offsets)?, &input, &none)?;
        bright += rep.detector("bright");
        dark += rep.detector("dark");
    }
    let n = draws.len() as f64;
    Ok(VisibilityEstimate::new(bright / n, dark / n))
}

/// Per-coupler phase jitter σ (radians) giving the requested visibility for
/// the inner structure of `inner_n` couplers per chain, found by bisection.
pub fn calibrate_jitter(visibility: f64, inner_n: usize) -> Result<f64, ChannelError> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(ChannelError::InvalidModel(format!("visibility {visibility}")));
    }
    if visibility >= 1.0 {
        return Ok(0.0);
    }
    let (net, slots) = inner_structure(inner_n)?;
    let draws = calibration_draws(slots.len());
    let vis = |s: f64| visibility_with_draws(&net, &slots, s, &draws).map(|v| v.v);
    let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
    if vis(hi)? > visibility {
        return Err(ChannelError::VisibilityUnreachable(visibility));
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if vis(mid)? > visibility {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Outcome of transmitting one bit for `duration_s` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitTrialResult {
    pub bit_sent: Bit,
    pub duration_s: f64,
    pub photons_emitted: u64,
    pub counts: BTreeMap<String, u64>,
    pub dark_counts: BTreeMap<String, u64>,
    /// D_f clicks heralded together with the signal photon.
    pub coincidence_df: u64,
    pub bit_decoded: Option<Bit>,
    pub no_signal: bool,
    pub success_prob_estimate: Option<f64>,
    /// 95 % normal-approximation interval of the estimate.
    pub success_ci95: Option<[f64; 2]>,
    pub df_conditional_rate: Option<f64>,
    /// Conditional success of the sampled phase-error realisation.
    pub model_success_prob: Option<f64>,
}

impl BitTrialResult {
    /// Derives estimates and decode from raw counts keyed by detector id.
    pub fn from_counts(
        bit_sent: Bit,
        duration_s: f64,
        counts: BTreeMap<String, u64>,
        coincidence_df: u64,
        d0: &str,
        d1: &str,
    ) -> Self {
        let c0 = counts.get(d0).copied().unwrap_or(0);
        let c1 = counts.get(d1).copied().unwrap_or(0);
        let alice = c0 + c1;
        let bit_decoded = match c0.cmp(&c1) {
            std::cmp::Ordering::Greater => Some(Bit::Zero),
            std::cmp::Ordering::Less => Some(Bit::One),
            std::cmp::Ordering::Equal => None,
        };
        let expected = if bit_sent == Bit::Zero { c0 } else { c1 };
        let (est, ci, rate) = if alice > 0 {
            let n = alice as f64;
            let p = expected as f64 / n;
            let half = 1.96 * (p * (1.0 - p) / n).sqrt();
            (Some(p), Some([p - half, p + half]), Some(coincidence_df as f64 / n))
        } else {
            (None, None, None)
        };
        Self {
            bit_sent,
            duration_s,
            photons_emitted: 0,
            counts,
            dark_counts: BTreeMap::new(),
            coincidence_df,
            bit_decoded,
            no_signal: bit_decoded.is_none(),
            success_prob_estimate: est,
            success_ci95: ci,
            df_conditional_rate: rate,
            model_success_prob: None,
        }
    }

    pub fn count(&self, id: &str) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BitsPerDetection {
    /// Mean success probability over trials with Alice clicks.
    pub achieved: f64,
    /// Mean D_f conditional rate: bits leaked per detection at most.
    pub leak_bound: f64,
    pub trials: usize,
}

pub fn bits_per_detection(results: &[BitTrialResult]) -> Result<BitsPerDetection, ChannelError> {
    if results.is_empty() {
        return Err(ChannelError::EmptyInput);
    }
    let mean = |vals: Vec<f64>| {
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    Ok(BitsPerDetection {
        achieved: mean(results.iter().filter_map(|r| r.success_prob_estimate).collect()),
        leak_bound: mean(results.iter().filter_map(|r| r.df_conditional_rate).collect()),
        trials: results.len(),
    })
}

fn poisson<R: rand::Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

fn binomial<R: rand::Rng>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// A protocol paired with an imperfection model and its calibrated jitter.
#[derive(Debug, Clone)]
pub struct Channel {
    pub built: BuiltProtocol,
    pub model: ImperfectionModel,
    /// Per-coupler phase jitter σ in radians.
    pub jitter_sigma: f64,
}

impl Channel {
    pub fn new(built: BuiltProtocol, model: ImperfectionModel) -> Result<Self, ChannelError> {
        model.validate()?;
        let jitter_sigma = calibrate_jitter(model.visibility, built.params.inner_n)?;
        Ok(Self {
            built,
            model,
            jitter_sigma,
        })
    }

    /// Draws one phase-error realisation and returns the perturbed protocol.
    pub fn perturbed_protocol<R: rand::Rng>(&self, rng: &mut R) -> Result<BuiltProtocol, ChannelError> {
        if self.jitter_sigma == 0.0 {
            return Ok(self.built.clone());
        }
        let normal = Normal::new(0.0, self.jitter_sigma).expect("finite sigma");
        let errors: Vec<f64> = self.built.ports.coupler_phase_slots.iter().map(|_| normal.sample(rng)).collect();
        Ok(self.built.with_phase_errors(&errors)?)
    }

    /// Per-photon detection probabilities for one phase-error realisation.
    pub fn perturbed_probs<R: rand::Rng>(&self, bit: Bit, rng: &mut R) -> Result<DetectionReport, ChannelError> {
        let p = self.perturbed_protocol(rng)?;
        Ok(p.ideal_detection_probs(bit)?)
    }

    /// Overall probability that an emitted photon reaches a detector.
    pub fn detection_efficiency(&self, bit: Bit) -> f64 {
        self.model.coupling_eff * db_to_transmittance(self.model.loss_db(bit)) * self.model.detector_eff
    }

    pub fn transmit_bit(&self, bit: Bit, duration_s: f64, stream: RngStream) -> Result<BitTrialResult, ChannelError> {
        if !(duration_s > 0.0 && duration_s.is_finite()) {
            return Err(ChannelError::InvalidDuration(duration_s));
        }
        let mut rng = stream.rng();
        let report = self.perturbed_probs(bit, &mut rng)?;
        let m = &self.model;

        let emitted = poisson(m.source_rate * duration_s, &mut rng);
        let coupled = binomial(emitted, m.coupling_eff, &mut rng);
        let transmitted = binomial(coupled, db_to_transmittance(m.loss_db(bit)), &mut rng);
        let detectable = binomial(transmitted, m.detector_eff, &mut rng);

        let ports = &self.built.ports;
        let mut detectors: Vec<&str> = vec![&ports.d0, &ports.d1];
        detectors.extend(ports.df.iter().map(String::as_str));

        let mut signal = BTreeMap::new();
        let (mut left, mut left_p) = (detectable, 1.0f64);
        for id in &detectors {
            let p = report.detector(id);
            let q = if left_p > 0.0 { (p / left_p).clamp(0.0, 1.0) } else { 0.0 };
            let k = binomial(left, q, &mut rng);
            left -= k;
            left_p -= p;
            signal.insert(id.to_string(), k);
        }

        let mut counts = BTreeMap::new();
        let mut darks = BTreeMap::new();
        for id in &detectors {
            let d = poisson(m.dark_rate * duration_s, &mut rng);
            darks.insert(id.to_string(), d);
            counts.insert(id.to_string(), signal[*id] + d);
        }
        let coincidence_df = ports.df.iter().map(|d| signal[d.as_str()]).sum();

        let mut result = BitTrialResult::from_counts(bit, duration_s, counts, coincidence_df, &ports.d0, &ports.d1);
        result.photons_emitted = emitted;
        result.dark_counts = darks;
        result.model_success_prob = self.built.conditional_success(&report, bit);
        Ok(result)
    }

    /// Weak-trace audit of one phase-error realisation (ideal when visibility is 1).
    pub fn trace_audit<R: rand::Rng>(&self, bit: Bit, rng: &mut R) -> Result<TraceReport, ChannelError> {
        let p = self.perturbed_protocol(rng)?;
        Ok(trace_audit(&p, bit)?)
    }
}
