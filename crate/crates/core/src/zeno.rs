//! Closed-form quantum Zeno formulas and network-defined success probabilities.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::Amp;
use crate::protocol::{build_protocol, Bit, ProtocolError, ProtocolParams};

/// Driven two-level system with `n_measurements` equally spaced projective
/// measurements over `total_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelParams {
    pub rabi_omega: f64,
    pub phi: f64,
    pub total_time: f64,
    pub n_measurements: u32,
}

impl TwoLevelParams {
    /// Drive tuned for a complete transition in `total_time = 1` (ΩT = π).
    pub fn resonant(n_measurements: u32) -> Self {
        Self {
            rabi_omega: PI,
            phi: 0.0,
            total_time: 1.0,
            n_measurements,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.rabi_omega > 0.0 && self.n_measurements >= 1 && self.total_time.is_finite()
    }

    /// Unmeasured state at time `t` as (ground, excited) amplitudes.
    pub fn state_at(&self, t: f64) -> (Amp, Amp) {
        let half = 0.5 * self.rabi_omega * t;
        (
            Amp::new(half.cos(), 0.0),
            Amp::from_polar(half.sin(), self.phi),
        )
    }

    /// Probability of finding the ground state at every one of the measurements.
    pub fn ground_survival(&self) -> f64 {
        let n = self.n_measurements as f64;
        let (g, _) = self.state_at(self.total_time / n);
        g.norm_sqr().powf(n)
    }
}

/// Ground-state probability after one measurement at T/n: cos²(π/2n).
pub fn ground_prob_single(n: u32) -> f64 {
    assert!(n >= 1, "n must be positive");
    (PI / (2.0 * n as f64)).cos().powi(2)
}

/// Survival probability after `n` measurements: cos^{2n}(π/2n).
///
/// Evaluated as exp(n·ln(1 − sin²θ)) so the rounding of cos θ near 1 is not
/// amplified by the 2n-th power.
pub fn zeno_survival(n: u32) -> f64 {
    assert!(n >= 1, "n must be positive");
    let s = (PI / (2.0 * n as f64)).sin();
    (n as f64 * (-s * s).ln_1p()).exp()
}

/// Bit-0 error of the outer chain, 1 − cos²(π/2m). For the reconstructed
/// network this is the exact error at odd `m` and an upper bound otherwise.
pub fn bit0_error_bound(m: u32) -> f64 {
    assert!(m >= 2, "m must be at least 2");
    (PI / (2.0 * m as f64)).sin().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessPoint {
    pub m: usize,
    pub n: usize,
    pub s0: f64,
    pub s1: f64,
}

/// Success probabilities obtained by propagating a photon through the built
/// protocol for both bits. Success is the fraction of Alice's clicks (D₀ or
/// D₁) landing on the detector assigned to the bit.
pub fn theoretical_success(p: ProtocolParams) -> Result<SuccessPoint, ProtocolError> {
    let built = build_protocol(p)?;
    let s0 = built.ideal_success(Bit::Zero)?;
    let s1 = built.ideal_success(Bit::One)?;
    Ok(SuccessPoint {
        m: p.outer_m,
        n: p.inner_n,
        s0,
        s1,
    })
}

/// Evaluates the Cartesian product of `m_range × n_range`, ordered by (m, n).
pub fn sweep(
    m_range: RangeInclusive<usize>,
    n_range: RangeInclusive<usize>,
    max: usize,
) -> Result<Vec<SuccessPoint>, ProtocolError> {
    let grid: Vec<(usize, usize)> = m_range
        .flat_map(|m| n_range.clone().map(move |n| (m, n)))
        .collect();
    if grid.is_empty() {
        return Err(ProtocolError::EmptyRange);
    }
    grid.into_par_iter()
        .map(|(m, n)| theoretical_success(ProtocolParams::with_max(m, n, max)?))
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "m,n,s0,s1";

pub fn sweep_csv(points: &[SuccessPoint]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for p in points {
        writeln!(out, "{},{},{:.6},{:.6}", p.m, p.n, p.s0, p.s1).unwrap();
    }
    out
}
