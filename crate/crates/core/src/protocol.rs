//! Compiles (M, N) into the nested interferometer network.
//!
//! Four path modes: `P1` is Alice's outer arm, `P2` the inner arm of the outer
//! interferometers, `P3` the lower arm of the inner interferometers on Alice's
//! side and `P4` the transmission channel beyond Bob's switch.
//!
//! Layout, for outer cycle k = 0..M:
//!
//! ```text
//! COUPLER P1 P2 π/2M ; PHASE P2 (outer slot)
//! if k < M-1, two chains joined back to back, each N times:
//!     COUPLER P2 P3 π/2N ; PHASE P3 (PS1) ; PHASE P2 (PS2)
//!     SWITCH P3 P4 (Bob) ; MIRROR P4 P3 (return from Bob's side)
//!   DETECT P3 Df{k+1}
//! DETECT P1 D0 ; DETECT P2 D1
//! ```
//!
//! With every switch passing, each chain is a full π/2 transfer, so the pair
//! returns P2 with a sign flip and the outer couplers of neighbouring cycles
//! undo each other. With every switch blocking, each chain is a Zeno sequence
//! that keeps P2 with amplitude cos^N(π/2N) and the outer chain rotates the
//! photon towards D₁.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    self, switch_sink_id, DetectionReport, Element, EngineError, ModeId, NetworkSpec, PureState, SwitchPattern,
    SwitchState,
};

pub const P1: ModeId = ModeId(0);
pub const P2: ModeId = ModeId(1);
pub const P3: ModeId = ModeId(2);
pub const P4: ModeId = ModeId(3);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("parameters out of range: M={m}, N={n} (need 2 <= M, N <= {max})")]
    ParamsOutOfRange { m: usize, n: usize, max: usize },
    #[error("empty parameter range")]
    EmptyRange,
    #[error("inner coupler {0} does not exist")]
    NoSuchCoupler(usize),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub fn as_u8(self) -> u8 {
        match self {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }
}

impl From<Bit> for u8 {
    fn from(b: Bit) -> u8 {
        b.as_u8()
    }
}

impl TryFrom<u8> for Bit {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Bit::Zero),
            1 => Ok(Bit::One),
            other => Err(format!("bit must be 0 or 1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub outer_m: usize,
    pub inner_n: usize,
}

impl ProtocolParams {
    pub const DEFAULT_MAX: usize = 64;

    pub fn new(outer_m: usize, inner_n: usize) -> Result<Self, ProtocolError> {
        Self::with_max(outer_m, inner_n, Self::DEFAULT_MAX)
    }

    pub fn with_max(outer_m: usize, inner_n: usize, max: usize) -> Result<Self, ProtocolError> {
        if outer_m < 2 || inner_n < 2 || outer_m > max || inner_n > max {
            return Err(ProtocolError::ParamsOutOfRange {
                m: outer_m,
                n: inner_n,
                max,
            });
        }
        Ok(Self { outer_m, inner_n })
    }

    pub fn outer_theta(&self) -> f64 {
        PI / (2.0 * self.outer_m as f64)
    }

    pub fn inner_theta(&self) -> f64 {
        PI / (2.0 * self.inner_n as f64)
    }
}

/// Global phase convention of the beam splitters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplerConvention {
    /// `[[cos θ, i sin θ], [i sin θ, cos θ]]`
    #[default]
    Symmetric,
    /// `[[cos θ, −sin θ], [sin θ, cos θ]]`, realised with ±π/2 phases on mode b.
    Real,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub convention: CouplerConvention,
    /// Bit 0 blocks and bit 1 passes instead of the default mapping.
    pub invert_bit_mapping: bool,
}

/// One channel-side amplitude location audited for weak traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSegment {
    pub boundary: usize,
    pub mode: ModeId,
    pub outer_cycle: usize,
    pub chain: usize,
    pub inner_cycle: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortMap {
    pub d0: String,
    pub d1: String,
    pub df: Vec<String>,
    pub bob_sinks: Vec<String>,
    pub input: ModeId,
    pub channel_mode: ModeId,
    #[serde(skip)]
    pub segments: Vec<ChannelSegment>,
    /// Phase elements directly after each coupler (where phase errors land).
    #[serde(skip)]
    pub coupler_phase_slots: Vec<usize>,
    #[serde(skip)]
    pub outer_couplers: Vec<usize>,
    #[serde(skip)]
    pub inner_couplers: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementCounts {
    pub outer_couplers: usize,
    pub inner_couplers: usize,
    pub inner_couplers_per_outer_arm: usize,
    pub switches: usize,
    pub phases: usize,
    pub mirrors: usize,
    pub inner_cycles_per_chain: usize,
    /// (M − 1) × (N − 1) interferometers a photon crosses before detection.
    pub mzi_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltProtocol {
    pub net: NetworkSpec,
    pub ports: PortMap,
    pub params: ProtocolParams,
    pub counts: ElementCounts,
    pub options: BuildOptions,
}

pub fn build_protocol(p: ProtocolParams) -> Result<BuiltProtocol, ProtocolError> {
    build_protocol_with(p, BuildOptions::default())
}

struct Layout {
    els: Vec<Element>,
    slots: Vec<usize>,
    convention: CouplerConvention,
}

impl Layout {
    fn coupler(&mut self, a: ModeId, b: ModeId, theta: f64) -> usize {
        let real = self.convention == CouplerConvention::Real;
        if real {
            self.els.push(Element::PhaseShift { mode: b, phi: FRAC_PI_2 });
        }
        let idx = self.els.len();
        self.els.push(Element::Coupler { a, b, theta });
        self.slots.push(self.els.len());
        let phi = if real { -FRAC_PI_2 } else { 0.0 };
        self.els.push(Element::PhaseShift { mode: b, phi });
        idx
    }

    fn push(&mut self, el: Element) -> usize {
        self.els.push(el);
        self.els.len() - 1
    }
}

pub fn build_protocol_with(p: ProtocolParams, options: BuildOptions) -> Result<BuiltProtocol, ProtocolError> {
    let (m, n) = (p.outer_m, p.inner_n);
    let mut lay = Layout {
        els: Vec::new(),
        slots: Vec::new(),
        convention: options.convention,
    };
    let mut segments = Vec::new();
    let mut df = Vec::new();
    let mut bob_sinks = Vec::new();
    let mut outer_couplers = Vec::new();
    let mut inner_couplers = Vec::new();

    for k in 0..m {
        outer_couplers.push(lay.coupler(P1, P2, p.outer_theta()));
        if k == m - 1 {
            break;
        }
        for chain in 0..2 {
            for j in 0..n {
                let start = lay.els.len();
                inner_couplers.push(lay.coupler(P2, P3, p.inner_theta()));
                lay.push(Element::PhaseShift { mode: P2, phi: 0.0 });
                let id = format!("sw{}_{}_{}", k + 1, chain + 1, j + 1);
                bob_sinks.push(switch_sink_id(&id));
                lay.push(Element::Switch { a: P3, b: P4, id });
                lay.push(Element::Mirror { a: P4, b: P3 });
                for idx in start..lay.els.len() {
                    for mode in [P3, P4] {
                        segments.push(ChannelSegment {
                            boundary: idx + 1,
                            mode,
                            outer_cycle: k + 1,
                            chain: chain + 1,
                            inner_cycle: j + 1,
                        });
                    }
                }
            }
        }
        let id = format!("Df{}", k + 1);
        lay.push(Element::Detect { mode: P3, id: id.clone() });
        df.push(id);
    }
    lay.push(Element::Detect { mode: P1, id: "D0".into() });
    lay.push(Element::Detect { mode: P2, id: "D1".into() });

    let counts = ElementCounts {
        outer_couplers: m,
        inner_couplers: inner_couplers.len(),
        inner_couplers_per_outer_arm: 2 * n,
        switches: bob_sinks.len(),
        phases: lay.els.iter().filter(|e| matches!(e, Element::PhaseShift { .. })).count(),
        mirrors: lay.els.iter().filter(|e| matches!(e, Element::Mirror { .. })).count(),
        inner_cycles_per_chain: n - 1,
        mzi_count: (m - 1) * (n - 1),
    };
    let modes = ["P1", "P2", "P3", "P4"].iter().map(|s| s.to_string()).collect();
    let net = NetworkSpec::new(modes, lay.els)?;
    Ok(BuiltProtocol {
        net,
        ports: PortMap {
            d0: "D0".into(),
            d1: "D1".into(),
            df,
            bob_sinks,
            input: P1,
            channel_mode: P4,
            segments,
            coupler_phase_slots: lay.slots,
            outer_couplers,
            inner_couplers,
        },
        params: p,
        counts,
        options,
    })
}

impl BuiltProtocol {
    /// Switch state Bob uses for `bit`: PASS for 0 and BLOCK for 1, unless inverted.
    pub fn switch_state(&self, bit: Bit) -> SwitchState {
        match (bit, self.options.invert_bit_mapping) {
            (Bit::Zero, false) | (Bit::One, true) => SwitchState::Pass,
            (Bit::One, false) | (Bit::Zero, true) => SwitchState::Block,
        }
    }

    pub fn resolve_bit(&self, bit: Bit) -> SwitchPattern {
        SwitchPattern::uniform(self.net.switch_ids(), self.switch_state(bit))
    }

    /// Detector Alice reads for `bit`.
    pub fn expected_detector(&self, bit: Bit) -> &str {
        match bit {
            Bit::Zero => &self.ports.d0,
            Bit::One => &self.ports.d1,
        }
    }

    pub fn input_state(&self) -> PureState {
        PureState::basis(self.net.num_modes(), self.ports.input)
    }

    pub fn ideal_detection_probs(&self, bit: Bit) -> Result<DetectionReport, ProtocolError> {
        self.detection_probs_on(&self.net, bit)
    }

    /// Same as [`Self::ideal_detection_probs`] on a perturbed copy of the network.
    pub fn detection_probs_on(&self, net: &NetworkSpec, bit: Bit) -> Result<DetectionReport, ProtocolError> {
        let (_, report) = engine::propagate(net, &self.input_state(), &self.resolve_bit(bit))?;
        Ok(report)
    }

    pub fn ideal_success(&self, bit: Bit) -> Result<f64, ProtocolError> {
        let rep = self.ideal_detection_probs(bit)?;
        Ok(self.conditional_success(&rep, bit).unwrap_or(0.0))
    }

    /// P(expected detector) / (P(D₀) + P(D₁)); `None` when Alice never clicks.
    pub fn conditional_success(&self, report: &DetectionReport, bit: Bit) -> Option<f64> {
        let alice = report.detector(&self.ports.d0) + report.detector(&self.ports.d1);
        (alice > 0.0).then(|| report.detector(self.expected_detector(bit)) / alice)
    }

    pub fn df_probability(&self, report: &DetectionReport) -> f64 {
        self.ports.df.iter().map(|d| report.detector(d)).sum()
    }

    /// Copy with the angle of inner coupler `which` (counted from the input) shifted by `delta`.
    pub fn detuned(&self, which: usize, delta: f64) -> Result<Self, ProtocolError> {
        let idx = *self.ports.inner_couplers.get(which).ok_or(ProtocolError::NoSuchCoupler(which))?;
        Ok(Self {
            net: self.net.with_offsets(&[(idx, delta)])?,
            ..self.clone()
        })
    }

    /// Copy with per-coupler phase errors added to the phase slot after each coupler.
    pub fn with_phase_errors(&self, errors: &[f64]) -> Result<Self, ProtocolError> {
        assert_eq!(errors.len(), self.ports.coupler_phase_slots.len());
        let offsets: Vec<(usize, f64)> = self.ports.coupler_phase_slots.iter().copied().zip(errors.iter().copied()).collect();
        Ok(Self {
            net: self.net.with_offsets(&offsets)?,
            ..self.clone()
        })
    }
}

/// One outer cycle's pair of inner chains with every switch passing, on modes
/// (P2, P3). A passing switch followed by the return mirror acts as the
/// identity, so only couplers and their phase slots remain. Used to calibrate
/// interference visibility. Returns the network and the phase-slot indices.
pub fn inner_structure(inner_n: usize) -> Result<(NetworkSpec, Vec<usize>), ProtocolError> {
    let theta = PI / (2.0 * inner_n as f64);
    let (a, b) = (ModeId(0), ModeId(1));
    let mut els = Vec::new();
    let mut slots = Vec::new();
    for _ in 0..2 {
        for _ in 0..inner_n {
            els.push(Element::Coupler { a, b, theta });
            slots.push(els.len());
            els.push(Element::PhaseShift { mode: b, phi: 0.0 });
        }
    }
    els.push(Element::Detect { mode: a, id: "bright".into() });
    els.push(Element::Detect { mode: b, id: "dark".into() });
    let modes = ["P2", "P3"].iter().map(|s| s.to_string()).collect();
    Ok((NetworkSpec::new(modes, els)?, slots))
}
