//! Two-state weak-trace audit of the channel-side modes.
//!
//! The photon leaves a trace on a segment only where the forward-evolving
//! state from the source and the backward-evolving state from the detector
//! Alice reads are both nonzero. The audit reports |⟨b|m⟩⟨m|f⟩| for every
//! channel-side segment recorded by the builder.

use serde::{Deserialize, Serialize};

use crate::engine::{backward_propagate, forward_boundaries};
use crate::protocol::{Bit, BuiltProtocol, ProtocolError};

/// Products below this are treated as zero.
pub const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTrace {
    pub boundary: usize,
    pub mode: String,
    pub outer_cycle: usize,
    pub chain: usize,
    pub inner_cycle: usize,
    pub forward: f64,
    pub backward: f64,
    pub weak_trace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub bit: Bit,
    pub postselected: String,
    pub postselected_probability: f64,
    pub max_trace: f64,
    pub nonzero_segments: usize,
    /// Largest forward amplitude seen on the channel mode at any boundary.
    pub max_channel_forward: f64,
    pub segments: Vec<SegmentTrace>,
}

pub fn trace_audit(built: &BuiltProtocol, bit: Bit) -> Result<TraceReport, ProtocolError> {
    let switches = built.resolve_bit(bit);
    let detector = built.expected_detector(bit).to_string();
    let fwd = forward_boundaries(&built.net, &built.input_state(), &switches)?;
    let bwd = backward_propagate(&built.net, &detector, &switches)?;

    let segments: Vec<SegmentTrace> = built
        .ports
        .segments
        .iter()
        .map(|seg| {
            let f = fwd[seg.boundary][seg.mode.0];
            let b = bwd[seg.boundary][seg.mode.0];
            SegmentTrace {
                boundary: seg.boundary,
                mode: built.net.label(seg.mode).to_string(),
                outer_cycle: seg.outer_cycle,
                chain: seg.chain,
                inner_cycle: seg.inner_cycle,
                forward: f.norm(),
                backward: b.norm(),
                weak_trace: (b.conj() * f).norm(),
            }
        })
        .collect();
    let channel = built.ports.channel_mode.0;
    let max_channel_forward = fwd.iter().map(|a| a[channel].norm()).fold(0.0, f64::max);
    let amp = crate::engine::overlap(&bwd[0], &fwd[0]);
    Ok(TraceReport {
        bit,
        postselected: detector,
        postselected_probability: amp.norm_sqr(),
        max_trace: segments.iter().map(|s| s.weak_trace).fold(0.0, f64::max),
        nonzero_segments: segments.iter().filter(|s| s.weak_trace > TRACE_TOL).count(),
        max_channel_forward,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{build_protocol, ProtocolParams};

    fn b36() -> BuiltProtocol {
        build_protocol(ProtocolParams::new(3, 6).unwrap()).unwrap()
    }

    #[test]
    fn blocked_bit_leaves_channel_empty() {
        let r = trace_audit(&b36(), Bit::One).unwrap();
        assert_eq!(r.max_channel_forward, 0.0);
        assert!(r.max_trace <= TRACE_TOL);
    }

    #[test]
    fn passing_bit_has_no_weak_trace() {
        let r = trace_audit(&b36(), Bit::Zero).unwrap();
        assert!(r.max_trace <= TRACE_TOL, "{}", r.max_trace);
        assert!(r.max_channel_forward > 0.1);
        assert!((r.postselected_probability - 0.75).abs() < 1e-12);
    }

    #[test]
    fn detuned_coupler_leaves_trace() {
        let r = trace_audit(&b36().detuned(0, 0.05).unwrap(), Bit::Zero).unwrap();
        assert!(r.nonzero_segments > 0);
        assert!(r.max_trace > TRACE_TOL);
    }
}
