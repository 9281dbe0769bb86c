//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zenocomm::engine::{Element, ModeId, NetworkSpec, PureState, SwitchPattern, SwitchState};

pub fn labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("M{i}")).collect()
}

pub struct RandomCase {
    pub net: NetworkSpec,
    pub switches: SwitchPattern,
    pub input: PureState,
}

/// Random network of couplers, phases, switches and mirrors; with `lossy`,
/// sinks and detector taps are mixed in as well. The input is a random
/// normalized superposition.
pub fn random_case(seed: u64, lossy: bool) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes = rng.random_range(2..=6usize);
    let len = rng.random_range(0..=40usize);
    let mut els = Vec::with_capacity(len);
    let mut switches = SwitchPattern::default();
    let pair = |rng: &mut ChaCha8Rng| {
        let a = rng.random_range(0..modes);
        let mut b = rng.random_range(0..modes - 1);
        if b >= a {
            b += 1;
        }
        (ModeId(a), ModeId(b))
    };
    for k in 0..len {
        let kind = rng.random_range(0..if lossy { 6 } else { 4 });
        let el = match kind {
            0 => {
                let (a, b) = pair(&mut rng);
                Element::Coupler { a, b, theta: rng.random_range(0.0..=FRAC_PI_2) }
            }
            1 => Element::PhaseShift {
                mode: ModeId(rng.random_range(0..modes)),
                phi: rng.random_range(-2.0 * PI..2.0 * PI),
            },
            2 => {
                let (a, b) = pair(&mut rng);
                let id = format!("sw{k}");
                let state = if lossy && rng.random_bool(0.5) { SwitchState::Block } else { SwitchState::Pass };
                switches.states.insert(id.clone(), state);
                Element::Switch { a, b, id }
            }
            3 => {
                let (a, b) = pair(&mut rng);
                Element::Mirror { a, b }
            }
            4 => Element::Sink { mode: ModeId(rng.random_range(0..modes)), id: format!("sink{k}") },
            _ => Element::Detect { mode: ModeId(rng.random_range(0..modes)), id: format!("det{k}") },
        };
        els.push(el);
    }
    let net = NetworkSpec::new(labels(modes), els).expect("generated network is valid");
    let mut amps: Vec<Complex64> = (0..modes)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt().max(1e-3);
    for a in &mut amps {
        *a /= norm;
    }
    RandomCase {
        net,
        switches,
        input: PureState::from_amplitudes(amps),
    }
}

/// Columns of the transfer matrix of a lossless network.
pub fn transfer_matrix(case: &RandomCase) -> Vec<Vec<Complex64>> {
    let n = case.net.num_modes();
    (0..n)
        .map(|j| {
            let (out, _) = zenocomm::engine::propagate(&case.net, &PureState::basis(n, ModeId(j)), &case.switches)
                .expect("propagates");
            out.amplitudes
        })
        .collect()
}

/// 3σ half-width of a binomial proportion.
pub fn three_sigma(p: f64, n: f64) -> f64 {
    3.0 * (p * (1.0 - p) / n).sqrt()
}
