//! Exact single-photon amplitude propagation through linear-optical networks.
//!
//! A network is an ordered list of [`Element`]s acting on a fixed set of path
//! modes. The photon is described by one complex amplitude per mode; elements
//! that remove light (sinks, blocked switches, detector taps) zero the affected
//! amplitude and credit its probability to a ledger instead of renormalizing, so
//! total probability is conserved and checkable at every step.

mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use text::ParseError;

/// Complex amplitude of the photon in one mode.
pub type Amp = Complex64;

/// Tolerance used for probability conservation checks.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("switch `{0}` has no state in the switch pattern")]
    UnresolvedSwitch(String),
    #[error("element {element} references unknown mode {mode}")]
    ModeMismatch { element: usize, mode: usize },
    #[error("unknown detector `{0}`")]
    UnknownDetector(String),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("input state has {got} modes, network has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input state norm {0} exceeds 1")]
    Unnormalized(f64),
    #[error("non-finite amplitude in input state")]
    NonFinite,
}

/// Index of a path mode inside a [`NetworkSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeId(pub usize);

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SwitchState {
    /// Light in mode `a` is absorbed at Bob's station.
    Block,
    /// Light in mode `a` is handed to mode `b` without loss.
    Pass,
}

/// Bob's setting for every switch in a network.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SwitchPattern {
    pub states: BTreeMap<String, SwitchState>,
}

impl SwitchPattern {
    pub fn uniform<'a>(ids: impl IntoIterator<Item = &'a str>, state: SwitchState) -> Self {
        Self {
            states: ids.into_iter().map(|id| (id.to_string(), state)).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<SwitchState> {
        self.states.get(id).copied()
    }
}

/// One optical element. Two-mode elements act on the ordered pair `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    /// Beam splitter `[[cos θ, i sin θ], [i sin θ, cos θ]]`; reflectivity cos²θ.
    Coupler { a: ModeId, b: ModeId, theta: f64 },
    PhaseShift { mode: ModeId, phi: f64 },
    /// Bob-controlled switch; see [`SwitchState`].
    Switch { a: ModeId, b: ModeId, id: String },
    /// Lossless redirection: amplitudes of `a` and `b` are exchanged.
    Mirror { a: ModeId, b: ModeId },
    Sink { mode: ModeId, id: String },
    /// Terminal detector tap: records |amp|² and zeroes the mode.
    Detect { mode: ModeId, id: String },
}

impl Element {
    fn modes(&self) -> Vec<ModeId> {
        match self {
            Element::Coupler { a, b, .. } | Element::Switch { a, b, .. } | Element::Mirror { a, b } => {
                vec![*a, *b]
            }
            Element::PhaseShift { mode, .. } | Element::Sink { mode, .. } | Element::Detect { mode, .. } => {
                vec![*mode]
            }
        }
    }
}

/// Sink receiving light absorbed by a blocked switch.
pub fn switch_sink_id(switch_id: &str) -> String {
    format!("bob:{switch_id}")
}

/// Returns the coupler transfer matrix for angle `theta`.
pub fn coupler_matrix(theta: f64) -> [[Amp; 2]; 2] {
    let c = Amp::new(theta.cos(), 0.0);
    let s = Amp::new(0.0, theta.sin());
    [[c, s], [s, c]]
}

/// Immutable, validated network description.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    modes: Vec<String>,
    elements: Vec<Element>,
    detectors: Vec<String>,
}

impl NetworkSpec {
    /// Validates and freezes a network. Mode labels are indexed by position.
    pub fn new(modes: Vec<String>, elements: Vec<Element>) -> Result<Self, EngineError> {
        let mut seen = BTreeSet::new();
        for label in &modes {
            if label.is_empty() || label.chars().any(char::is_whitespace) {
                return Err(EngineError::InvalidNetwork(format!("bad mode label `{label}`")));
            }
            if !seen.insert(label.as_str()) {
                return Err(EngineError::InvalidNetwork(format!("duplicate mode label `{label}`")));
            }
        }
        let mut detectors = Vec::new();
        let mut switch_ids = BTreeSet::new();
        for (i, el) in elements.iter().enumerate() {
            for m in el.modes() {
                if m.0 >= modes.len() {
                    return Err(EngineError::ModeMismatch { element: i, mode: m.0 });
                }
            }
            match el {
                Element::Coupler { a, b, theta } => {
                    if a == b {
                        return Err(EngineError::InvalidNetwork(format!("element {i}: coupler on a single mode")));
                    }
                    if !theta.is_finite() || *theta < -PROB_EPS || *theta > std::f64::consts::FRAC_PI_2 + PROB_EPS {
                        return Err(EngineError::InvalidNetwork(format!("element {i}: theta {theta} outside [0, pi/2]")));
                    }
                }
                Element::PhaseShift { phi, .. } => {
                    if !phi.is_finite() {
                        return Err(EngineError::InvalidNetwork(format!("element {i}: non-finite phase")));
                    }
                }
                Element::Switch { a, b, id } => {
                    if a == b {
                        return Err(EngineError::InvalidNetwork(format!("element {i}: switch on a single mode")));
                    }
                    check_id(i, id)?;
                    if !switch_ids.insert(id.clone()) {
                        return Err(EngineError::InvalidNetwork(format!("duplicate switch id `{id}`")));
                    }
                }
                Element::Mirror { a, b } => {
                    if a == b {
                        return Err(EngineError::InvalidNetwork(format!("element {i}: mirror on a single mode")));
                    }
                }
                Element::Sink { id, .. } => check_id(i, id)?,
                Element::Detect { id, .. } => {
                    check_id(i, id)?;
                    if detectors.contains(id) {
                        return Err(EngineError::InvalidNetwork(format!("duplicate detector id `{id}`")));
                    }
                    detectors.push(id.clone());
                }
            }
        }
        Ok(Self { modes, elements, detectors })
    }

    pub fn modes(&self) -> &[String] {
        &self.modes
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn detectors(&self) -> &[String] {
        &self.detectors
    }

    pub fn mode(&self, label: &str) -> Option<ModeId> {
        self.modes.iter().position(|m| m == label).map(ModeId)
    }

    pub fn label(&self, mode: ModeId) -> &str {
        &self.modes[mode.0]
    }

    pub fn switch_ids(&self) -> impl Iterator<Item = &str> {
        self.elements.iter().filter_map(|e| match e {
            Element::Switch { id, .. } => Some(id.as_str()),
            _ => None,
        })
    }

    /// Copy of this network with `delta` added to the phase of selected
    /// `PhaseShift` elements (or the angle of selected couplers).
    pub fn with_offsets(&self, offsets: &[(usize, f64)]) -> Result<Self, EngineError> {
        let mut elements = self.elements.clone();
        for &(idx, delta) in offsets {
            match elements.get_mut(idx) {
                Some(Element::PhaseShift { phi, .. }) => *phi += delta,
                Some(Element::Coupler { theta, .. }) => *theta += delta,
                _ => {
                    return Err(EngineError::InvalidNetwork(format!(
                        "element {idx} is not a phase shift or coupler"
                    )))
                }
            }
        }
        Self::new(self.modes.clone(), elements)
    }

    /// Serializes to the line-oriented text format.
    pub fn to_text(&self) -> String {
        text::write(self)
    }

    pub fn from_text(src: &str) -> Result<Self, ParseError> {
        text::parse(src)
    }
}

fn check_id(i: usize, id: &str) -> Result<(), EngineError> {
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(EngineError::InvalidNetwork(format!("element {i}: bad id `{id}`")));
    }
    Ok(())
}

/// Photon state: amplitudes per mode plus probability already absorbed by sinks.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    pub amplitudes: Vec<Amp>,
    pub loss_ledger: BTreeMap<String, f64>,
}

impl PureState {
    pub fn zeros(num_modes: usize) -> Self {
        Self {
            amplitudes: vec![Amp::new(0.0, 0.0); num_modes],
            loss_ledger: BTreeMap::new(),
        }
    }

    /// Photon with unit amplitude in `mode`.
    pub fn basis(num_modes: usize, mode: ModeId) -> Self {
        let mut s = Self::zeros(num_modes);
        s.amplitudes[mode.0] = Amp::new(1.0, 0.0);
        s
    }

    pub fn from_amplitudes(amplitudes: Vec<Amp>) -> Self {
        Self {
            amplitudes,
            loss_ledger: BTreeMap::new(),
        }
    }

    /// Probability still carried by the modes.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn absorbed(&self) -> f64 {
        self.loss_ledger.values().sum()
    }
}

/// Outcome probabilities of one propagation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub prob_by_detector: BTreeMap<String, f64>,
    pub prob_by_sink: BTreeMap<String, f64>,
    pub surviving_norm: f64,
}

impl DetectionReport {
    pub fn detector(&self, id: &str) -> f64 {
        self.prob_by_detector.get(id).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.prob_by_detector.values().sum::<f64>() + self.prob_by_sink.values().sum::<f64>() + self.surviving_norm
    }
}

// Linear action of one element on the amplitude vector. `removed` receives the
// probability taken out of the modes (sink/detector id and amount).
enum Removal<'a> {
    Sink(String, f64),
    Detector(&'a str, f64),
}

fn resolve(el: &Element, switches: &SwitchPattern) -> Result<Option<SwitchState>, EngineError> {
    match el {
        Element::Switch { id, .. } => switches
            .get(id)
            .map(Some)
            .ok_or_else(|| EngineError::UnresolvedSwitch(id.clone())),
        _ => Ok(None),
    }
}

fn take(amps: &mut [Amp], m: ModeId) -> f64 {
    let p = amps[m.0].norm_sqr();
    amps[m.0] = Amp::new(0.0, 0.0);
    p
}

fn apply_forward<'a>(
    el: &'a Element,
    state: Option<SwitchState>,
    amps: &mut [Amp],
) -> Option<Removal<'a>> {
    match el {
        Element::Coupler { a, b, theta } => {
            let m = coupler_matrix(*theta);
            let (x, y) = (amps[a.0], amps[b.0]);
            amps[a.0] = m[0][0] * x + m[0][1] * y;
            amps[b.0] = m[1][0] * x + m[1][1] * y;
            None
        }
        Element::PhaseShift { mode, phi } => {
            amps[mode.0] *= Amp::from_polar(1.0, *phi);
            None
        }
        Element::Switch { a, b, id } => match state.expect("switch state resolved") {
            SwitchState::Pass => {
                amps.swap(a.0, b.0);
                None
            }
            SwitchState::Block => Some(Removal::Sink(switch_sink_id(id), take(amps, *a))),
        },
        Element::Mirror { a, b } => {
            amps.swap(a.0, b.0);
            None
        }
        Element::Sink { mode, id } => Some(Removal::Sink(id.clone(), take(amps, *mode))),
        Element::Detect { mode, id } => Some(Removal::Detector(id, take(amps, *mode))),
    }
}

// Adjoint action used for the backward-evolving state. Projectors are
// self-adjoint, swaps are their own inverse.
fn apply_adjoint(el: &Element, state: Option<SwitchState>, amps: &mut [Amp]) {
    match el {
        Element::Coupler { a, b, theta } => {
            let m = coupler_matrix(*theta);
            let (x, y) = (amps[a.0], amps[b.0]);
            amps[a.0] = m[0][0].conj() * x + m[1][0].conj() * y;
            amps[b.0] = m[0][1].conj() * x + m[1][1].conj() * y;
        }
        Element::PhaseShift { mode, phi } => amps[mode.0] *= Amp::from_polar(1.0, -*phi),
        Element::Switch { a, b, .. } => match state.expect("switch state resolved") {
            SwitchState::Pass => amps.swap(a.0, b.0),
            SwitchState::Block => amps[a.0] = Amp::new(0.0, 0.0),
        },
        Element::Mirror { a, b } => amps.swap(a.0, b.0),
        Element::Sink { mode, .. } | Element::Detect { mode, .. } => amps[mode.0] = Amp::new(0.0, 0.0),
    }
}

fn check_input(net: &NetworkSpec, input: &PureState) -> Result<(), EngineError> {
    if input.amplitudes.len() != net.num_modes() {
        return Err(EngineError::DimensionMismatch {
            expected: net.num_modes(),
            got: input.amplitudes.len(),
        });
    }
    if input.amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(EngineError::NonFinite);
    }
    let total = input.norm_sqr() + input.absorbed();
    if total > 1.0 + PROB_EPS {
        return Err(EngineError::Unnormalized(total));
    }
    Ok(())
}

fn resolve_all(net: &NetworkSpec, switches: &SwitchPattern) -> Result<Vec<Option<SwitchState>>, EngineError> {
    net.elements.iter().map(|el| resolve(el, switches)).collect()
}

/// Propagates `input` through `net` with Bob's `switches` applied.
///
/// Deterministic: identical arguments give bit-identical results.
pub fn propagate(
    net: &NetworkSpec,
    input: &PureState,
    switches: &SwitchPattern,
) -> Result<(PureState, DetectionReport), EngineError> {
    check_input(net, input)?;
    let states = resolve_all(net, switches)?;
    let mut out = input.clone();
    let mut report = DetectionReport::default();
    for (el, st) in net.elements.iter().zip(states) {
        match apply_forward(el, st, &mut out.amplitudes) {
            Some(Removal::Sink(id, p)) => {
                *out.loss_ledger.entry(id.clone()).or_default() += p;
                *report.prob_by_sink.entry(id).or_default() += p;
            }
            Some(Removal::Detector(id, p)) => {
                *report.prob_by_detector.entry(id.to_string()).or_default() += p;
            }
            None => {}
        }
    }
    report.surviving_norm = out.norm_sqr();
    Ok((out, report))
}

/// Forward amplitudes at every element boundary; entry `k` is the state just
/// before element `k`, the last entry is the output.
pub fn forward_boundaries(
    net: &NetworkSpec,
    input: &PureState,
    switches: &SwitchPattern,
) -> Result<Vec<Vec<Amp>>, EngineError> {
    check_input(net, input)?;
    let states = resolve_all(net, switches)?;
    let mut amps = input.amplitudes.clone();
    let mut out = Vec::with_capacity(net.elements.len() + 1);
    out.push(amps.clone());
    for (el, st) in net.elements.iter().zip(states) {
        apply_forward(el, st, &mut amps);
        out.push(amps.clone());
    }
    Ok(out)
}

/// Backward-evolving state post-selected on `detector`, at every element
/// boundary (same indexing as [`forward_boundaries`]).
///
/// For any boundary at or before the detector tap, the overlap
/// ⟨backward|forward⟩ equals the amplitude that reaches the detector.
pub fn backward_propagate(
    net: &NetworkSpec,
    detector: &str,
    switches: &SwitchPattern,
) -> Result<Vec<Vec<Amp>>, EngineError> {
    if !net.detectors.iter().any(|d| d == detector) {
        return Err(EngineError::UnknownDetector(detector.to_string()));
    }
    let states = resolve_all(net, switches)?;
    let n = net.elements.len();
    let mut amps = vec![Amp::new(0.0, 0.0); net.num_modes()];
    let mut out = vec![Vec::new(); n + 1];
    out[n] = amps.clone();
    for k in (0..n).rev() {
        let el = &net.elements[k];
        apply_adjoint(el, states[k], &mut amps);
        if let Element::Detect { mode, id } = el {
            if id == detector {
                amps[mode.0] = Amp::new(1.0, 0.0);
            }
        }
        out[k] = amps.clone();
    }
    Ok(out)
}

/// ⟨bra|ket⟩ over all modes.
pub fn overlap(bra: &[Amp], ket: &[Amp]) -> Amp {
    bra.iter().zip(ket).map(|(b, k)| b.conj() * k).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn labels(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("P{i}")).collect()
    }

    fn chain(n: usize, blocked: bool) -> NetworkSpec {
        let theta = PI / (2.0 * n as f64);
        let mut els = Vec::new();
        for j in 0..n {
            els.push(Element::Coupler { a: ModeId(0), b: ModeId(1), theta });
            if blocked {
                els.push(Element::Sink { mode: ModeId(1), id: format!("blk{j}") });
            }
        }
        els.push(Element::Detect { mode: ModeId(0), id: "b".into() });
        els.push(Element::Detect { mode: ModeId(1), id: "c".into() });
        NetworkSpec::new(labels(2), els).unwrap()
    }

    #[test]
    fn coupler_matrix_cases() {
        let id = coupler_matrix(0.0);
        assert_eq!(id[0][0], Amp::new(1.0, 0.0));
        assert_eq!(id[0][1].norm(), 0.0);
        let full = coupler_matrix(FRAC_PI_2);
        assert!((full[0][1].norm_sqr() - 1.0).abs() < 1e-15);
        let half = coupler_matrix(FRAC_PI_4);
        assert!((half[0][0].norm_sqr() - 0.5).abs() < 1e-15);
        assert!((half[1][0].norm_sqr() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn coupler_matrix_is_unitary() {
        for k in 0..50 {
            let m = coupler_matrix(k as f64 * 0.07);
            for i in 0..2 {
                for j in 0..2 {
                    let dot: Amp = (0..2).map(|r| m[r][i].conj() * m[r][j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - want).norm() < 1e-15);
                }
            }
            assert!((m[0][0].norm_sqr() - (k as f64 * 0.07).cos().powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn blocked_chain_matches_closed_form() {
        let net = chain(6, true);
        let (_, rep) = propagate(&net, &PureState::basis(2, ModeId(0)), &SwitchPattern::default()).unwrap();
        let want = (PI / 12.0).cos().powi(12);
        assert!((rep.detector("b") - want).abs() < 1e-12);
        assert!((rep.detector("b") - 0.6597).abs() < 1e-4);
    }

    #[test]
    fn unblocked_chain_transfers_fully() {
        let net = chain(6, false);
        let (_, rep) = propagate(&net, &PureState::basis(2, ModeId(0)), &SwitchPattern::default()).unwrap();
        assert!((rep.detector("c") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_network_is_identity() {
        let net = NetworkSpec::new(labels(3), vec![]).unwrap();
        let input = PureState::from_amplitudes(vec![Amp::new(0.6, 0.0), Amp::new(0.0, 0.8), Amp::new(0.0, 0.0)]);
        let (out, rep) = propagate(&net, &input, &SwitchPattern::default()).unwrap();
        assert_eq!(out, input);
        assert!(rep.prob_by_detector.is_empty());
        assert!(rep.prob_by_sink.is_empty());
    }

    #[test]
    fn zero_state_is_legal() {
        let net = chain(3, true);
        let (out, rep) = propagate(&net, &PureState::zeros(2), &SwitchPattern::default()).unwrap();
        assert_eq!(out.norm_sqr(), 0.0);
        assert_eq!(rep.total(), 0.0);
    }

    #[test]
    fn switch_states() {
        let els = vec![
            Element::Switch { a: ModeId(0), b: ModeId(1), id: "sw".into() },
            Element::Detect { mode: ModeId(1), id: "far".into() },
        ];
        let net = NetworkSpec::new(labels(2), els).unwrap();
        let input = PureState::basis(2, ModeId(0));
        let pass = SwitchPattern::uniform(["sw"], SwitchState::Pass);
        let (_, rep) = propagate(&net, &input, &pass).unwrap();
        assert_eq!(rep.detector("far"), 1.0);
        let block = SwitchPattern::uniform(["sw"], SwitchState::Block);
        let (out, rep) = propagate(&net, &input, &block).unwrap();
        assert_eq!(rep.detector("far"), 0.0);
        assert_eq!(rep.prob_by_sink["bob:sw"], 1.0);
        assert_eq!(out.loss_ledger["bob:sw"], 1.0);
        assert_eq!(
            propagate(&net, &input, &SwitchPattern::default()).unwrap_err(),
            EngineError::UnresolvedSwitch("sw".into())
        );
    }

    #[test]
    fn validation_errors() {
        let bad_mode = vec![Element::PhaseShift { mode: ModeId(5), phi: 0.0 }];
        assert!(matches!(
            NetworkSpec::new(labels(2), bad_mode),
            Err(EngineError::ModeMismatch { element: 0, mode: 5 })
        ));
        let same = vec![Element::Coupler { a: ModeId(1), b: ModeId(1), theta: 0.1 }];
        assert!(NetworkSpec::new(labels(2), same).is_err());
        let wide = vec![Element::Coupler { a: ModeId(0), b: ModeId(1), theta: 2.0 }];
        assert!(NetworkSpec::new(labels(2), wide).is_err());
        assert!(NetworkSpec::new(vec!["A".into(), "A".into()], vec![]).is_err());
        let net = chain(2, false);
        assert_eq!(
            backward_propagate(&net, "nope", &SwitchPattern::default()).unwrap_err(),
            EngineError::UnknownDetector("nope".into())
        );
        let big = PureState::from_amplitudes(vec![Amp::new(1.0, 0.0), Amp::new(1.0, 0.0)]);
        assert!(matches!(
            propagate(&net, &big, &SwitchPattern::default()),
            Err(EngineError::Unnormalized(_))
        ));
    }

    #[test]
    fn backward_single_coupler_is_adjoint_column() {
        let theta = 0.3;
        let els = vec![
            Element::Coupler { a: ModeId(0), b: ModeId(1), theta },
            Element::Detect { mode: ModeId(0), id: "a".into() },
        ];
        let net = NetworkSpec::new(labels(2), els).unwrap();
        let back = backward_propagate(&net, "a", &SwitchPattern::default()).unwrap();
        let m = coupler_matrix(theta);
        // M† e_a = conj of row a of M
        assert!((back[0][0] - m[0][0].conj()).norm() < 1e-15);
        assert!((back[0][1] - m[0][1].conj()).norm() < 1e-15);
        let norm: f64 = back[0].iter().map(|a| a.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-15);
        assert!(back[2].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn backward_blocked_chain_lives_on_survival_mode() {
        let net = chain(6, true);
        let sw = SwitchPattern::default();
        let back = backward_propagate(&net, "b", &sw).unwrap();
        let fwd = forward_boundaries(&net, &PureState::basis(2, ModeId(0)), &sw).unwrap();
        let c = (PI / 12.0).cos();
        for j in 0..6 {
            // between coupler j and its absorber the backward wave is only on the survival mode
            let k = 2 * j + 1;
            assert_eq!(back[k][1].norm(), 0.0, "boundary {k}");
            assert!((back[k][0].norm() - c.powi(5 - j as i32)).abs() < 1e-12, "boundary {k}");
        }
        // the absorbed mode never carries forward and backward weight together
        for (f, b) in fwd.iter().zip(&back) {
            assert!((f[1] * b[1].conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn identity_network_backward_is_basis_state() {
        let els = vec![
            Element::Coupler { a: ModeId(0), b: ModeId(1), theta: 0.0 },
            Element::Coupler { a: ModeId(1), b: ModeId(2), theta: 0.0 },
            Element::Coupler { a: ModeId(0), b: ModeId(2), theta: 0.0 },
            Element::Detect { mode: ModeId(2), id: "d".into() },
        ];
        let net = NetworkSpec::new(labels(3), els).unwrap();
        let back = backward_propagate(&net, "d", &SwitchPattern::default()).unwrap();
        for amps in &back[..4] {
            assert_eq!(amps[0].norm(), 0.0);
            assert_eq!(amps[1].norm(), 0.0);
            assert_eq!(amps[2], Amp::new(1.0, 0.0));
        }
    }

    #[test]
    fn offsets_apply_to_phase_and_coupler() {
        let els = vec![
            Element::Coupler { a: ModeId(0), b: ModeId(1), theta: 0.1 },
            Element::PhaseShift { mode: ModeId(1), phi: 0.0 },
        ];
        let net = NetworkSpec::new(labels(2), els).unwrap();
        let moved = net.with_offsets(&[(0, 0.05), (1, 0.2)]).unwrap();
        assert_eq!(moved.elements()[0], Element::Coupler { a: ModeId(0), b: ModeId(1), theta: 0.1 + 0.05 });
        assert_eq!(moved.elements()[1], Element::PhaseShift { mode: ModeId(1), phi: 0.2 });
        let bad = NetworkSpec::new(labels(2), vec![Element::Mirror { a: ModeId(0), b: ModeId(1) }]).unwrap();
        assert!(bad.with_offsets(&[(0, 0.1)]).is_err());
    }
}
