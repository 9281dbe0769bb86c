//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use clap::Parser;
use zenocomm::cli::{self, Cli};
use zenocomm::channel::{bits_per_detection, trace_audit, BitTrialResult, Channel, ImperfectionModel, RngStream};
use zenocomm::engine::{forward_boundaries, propagate, Element, ModeId, NetworkSpec, PureState, SwitchPattern, SwitchState};
use zenocomm::image::{binarize, demo_logo, transmit_image, BitPlane, TransmissionJob};
use zenocomm::protocol::{build_protocol, Bit, BuiltProtocol, ProtocolParams};
use zenocomm::zeno::zeno_survival;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn built(m: usize, n: usize) -> BuiltProtocol {
    build_protocol(ProtocolParams::new(m, n).unwrap()).unwrap()
}

/// cos^{2n}(π/2n) from the Maclaurin series of ln cos x for small angles and
/// a direct power for the few large ones.
fn survival_reference(n: u32) -> f64 {
    let x = PI / (2.0 * n as f64);
    if n < 64 {
        return x.cos().powi(2 * n as i32);
    }
    let x2 = x * x;
    let coeffs = [1.0 / 2.0, 1.0 / 12.0, 1.0 / 45.0, 17.0 / 2520.0, 31.0 / 14175.0, 691.0 / 467775.0];
    let ln_cos = -coeffs.iter().rev().fold(0.0, |acc, c| acc * x2 + c) * x2;
    (2.0 * n as f64 * ln_cos).exp()
}

fn ac1() -> Outcome {
    let mut worst = 0.0f64;
    for n in 1..=1000u32 {
        worst = worst.max((zeno_survival(n) - survival_reference(n)).abs());
    }
    let limit = zeno_survival(2500);
    check(
        worst <= 1e-14 && 1.0 - limit <= 1e-3,
        format!("max |survival - cos^2n| = {worst:.1e} over n=1..1000; survival(2500) = {limit:.6}"),
    )
}

/// N couplers of angle π/2N on (a, b), each followed by a switch from b to a
/// side mode and a mirror that returns the side mode when the switch passes.
fn switched_chain(n: usize) -> NetworkSpec {
    let (a, b, side) = (ModeId(0), ModeId(1), ModeId(2));
    let theta = PI / (2.0 * n as f64);
    let mut els = Vec::new();
    for j in 0..n {
        els.push(Element::Coupler { a, b, theta });
        els.push(Element::Switch { a: b, b: side, id: format!("sw{j}") });
        els.push(Element::Mirror { a: side, b });
    }
    NetworkSpec::new(common::labels(3), els).unwrap()
}

fn ac2() -> Outcome {
    let (mut blocked_err, mut open_err) = (0.0f64, 0.0f64);
    for n in 1..=64usize {
        let net = switched_chain(n);
        let ids: Vec<String> = net.switch_ids().map(str::to_string).collect();
        let input = PureState::basis(3, ModeId(0));
        for state in [SwitchState::Block, SwitchState::Pass] {
            let sw = SwitchPattern::uniform(ids.iter().map(String::as_str), state);
            let (out, _) = propagate(&net, &input, &sw).unwrap();
            match state {
                SwitchState::Block => {
                    let closed = (PI / (2.0 * n as f64)).cos().powi(2 * n as i32);
                    blocked_err = blocked_err.max((out.amplitudes[0].norm_sqr() - closed).abs());
                }
                SwitchState::Pass => open_err = open_err.max((out.amplitudes[1].norm_sqr() - 1.0).abs()),
            }
        }
    }
    check(
        blocked_err <= 1e-12 && open_err <= 1e-12,
        format!("blocked chain vs cos^2N: {blocked_err:.1e}; open chain transfer: {open_err:.1e} (N=1..64)"),
    )
}

fn ac3() -> Outcome {
    let b = built(3, 6);
    let s0 = b.ideal_success(Bit::Zero).unwrap();
    let s1 = b.ideal_success(Bit::One).unwrap();
    check(
        (s0 - 0.750).abs() <= 0.005 && (s1 - 0.872).abs() <= 0.005,
        format!("(M,N)=(3,6): S0 = {s0:.4}, S1 = {s1:.4}"),
    )
}

fn ac4() -> Outcome {
    let (mut channel_amp, mut worst_trace) = (0.0f64, 0.0f64);
    let mut cases = 0;
    for m in 2..=7 {
        for n in 2..=12 {
            let b = built(m, n);
            let sw = b.resolve_bit(Bit::One);
            let fwd = forward_boundaries(&b.net, &b.input_state(), &sw).unwrap();
            for amps in &fwd {
                channel_amp = channel_amp.max(amps[b.ports.channel_mode.0].norm());
            }
            let (_, rep) = propagate(&b.net, &b.input_state(), &sw).unwrap();
            channel_amp = channel_amp.max(b.ports.df.iter().map(|d| rep.detector(d)).sum::<f64>());
            // bit 0 is audited where D0 is the expected outcome (odd M)
            if m % 2 == 1 {
                worst_trace = worst_trace.max(trace_audit(&b, Bit::Zero).unwrap().max_trace);
            }
            cases += 1;
        }
    }
    let anchor = trace_audit(&built(3, 6), Bit::Zero).unwrap();
    check(
        channel_amp <= 1e-12 && worst_trace <= 1e-10 && anchor.max_trace <= 1e-10,
        format!(
            "{cases} networks: bit-1 channel amplitude max {channel_amp:.1e}; bit-0 weak trace max {worst_trace:.1e} (odd M), (3,6) {:.1e} over {} segments",
            anchor.max_trace,
            anchor.segments.len()
        ),
    )
}

fn ac5() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..1000u64 {
        let case = common::random_case(seed, true);
        let (_, rep) = propagate(&case.net, &case.input, &case.switches).unwrap();
        worst = worst.max((rep.total() - case.input.norm_sqr()).abs());
    }
    check(worst <= 1e-12, format!("1000 random networks: max conservation error {worst:.1e}"))
}

fn pooled(ch: &Channel, bit: Bit, trials: u64, seed: u64) -> (f64, u64, u64) {
    let rs: Vec<BitTrialResult> = (0..trials)
        .map(|s| ch.transmit_bit(bit, 1.0, RngStream::new(seed, s)).unwrap())
        .collect();
    let p = &ch.built.ports;
    let alice: u64 = rs.iter().map(|r| r.count(&p.d0) + r.count(&p.d1)).sum();
    let hit: u64 = rs.iter().map(|r| r.count(ch.built.expected_detector(bit))).sum();
    let df: u64 = rs.iter().map(|r| r.coincidence_df).sum();
    (hit as f64 / alice as f64, alice, df)
}

fn ac6() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;

    let ideal = Channel::new(built(3, 6), ImperfectionModel::ideal()).unwrap();
    for bit in [Bit::Zero, Bit::One] {
        let exact = ideal.built.ideal_success(bit).unwrap();
        let (est, n, _) = pooled(&ideal, bit, 1, 7);
        let tol = common::three_sigma(exact, n as f64);
        ok &= n >= 1_000_000 && (est - exact).abs() <= tol;
        notes.push(format!("ideal bit {}: {est:.4} vs {exact:.4} (n={n}, 3σ={tol:.1e})", bit.as_u8()));
    }

    let mut matched = None;
    for v in [0.99, 0.98, 0.97, 0.96, 0.95, 0.90] {
        let ch = Channel::new(built(3, 6), ImperfectionModel { visibility: v, ..Default::default() }).unwrap();
        let (s0, a0, f0) = pooled(&ch, Bit::Zero, 20, 2024);
        let (s1, a1, f1) = pooled(&ch, Bit::One, 20, 2024);
        let df_rate = (f0 + f1) as f64 / (a0 + a1) as f64;
        if (0.838..=0.864).contains(&s1) && (0.726..=0.758).contains(&s0) {
            matched = Some((v, s0, s1, df_rate));
            break;
        }
    }
    match matched {
        Some((v, s0, s1, df)) => {
            ok &= (2e-4..=5e-3).contains(&df);
            notes.push(format!("V={v}: S0 {s0:.4}, S1 {s1:.4}, D_f rate {:.3}%", 100.0 * df));
        }
        None => {
            ok = false;
            notes.push("no visibility setting matched both bands".into());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 300.0;
    notes.push(format!("{secs:.1} s"));
    check(ok, notes.join("; "))
}

fn image_run(ch: &Channel, plane: &BitPlane, t: f64) -> zenocomm::image::TransmissionOutcome {
    transmit_image(&TransmissionJob {
        plane,
        per_bit_duration: t,
        channel: ch,
        seed: 2500,
    })
    .unwrap()
}

fn ac7() -> Outcome {
    let start = Instant::now();
    let plane = binarize(&demo_logo(50, 50), 128);
    let scaled = ImperfectionModel {
        source_rate: 1.9e6 / 100.0,
        ..Default::default()
    };
    let ch = Channel::new(built(3, 6), scaled).unwrap();
    let t1 = image_run(&ch, &plane, 1.0);
    let t5 = image_run(&ch, &plane, 5.0);
    let ideal = Channel::new(built(3, 6), ImperfectionModel { source_rate: 1.9e4, ..ImperfectionModel::ideal() }).unwrap();
    let ideal5 = image_run(&ideal, &plane, 5.0);
    let secs = start.elapsed().as_secs_f64();
    check(
        secs < 300.0
            && t1.metrics.simulated_time_s == 2500.0
            && ideal5.metrics.bit_errors == 0
            && t5.metrics.ber <= t1.metrics.ber,
        format!(
            "simulated {} s ({:.1} min); BER T=1 {:.4}, T=5 {:.4}; ideal T=5 errors {}; wall {secs:.1} s",
            t1.metrics.simulated_time_s, t1.metrics.simulated_time_min, t1.metrics.ber, t5.metrics.ber, ideal5.metrics.bit_errors
        ),
    )
}

fn ac8() -> Outcome {
    let trial = |success: f64, df: f64| {
        let n = 1_000_000u64;
        let hit = (success * n as f64).round() as u64;
        let counts = [("D0".to_string(), n - hit), ("D1".to_string(), hit)].into_iter().collect();
        BitTrialResult::from_counts(Bit::One, 1.0, counts, (df * n as f64).round() as u64, "D0", "D1")
    };
    let b = bits_per_detection(&[trial(0.742, 0.0009), trial(0.851, 0.0025)]).unwrap();
    check(
        (b.achieved - 0.80).abs() <= 0.01 && (b.leak_bound - 0.0017).abs() <= 0.01,
        format!("achieved {:.4} bit/detection, leak bound {:.4}", b.achieved, b.leak_bound),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn ac9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("logo.pgm");
    zenocomm::image::pgm::write_file(&input, &demo_logo(20, 20)).unwrap();
    let out = tmp.path().join("out");
    let (o, i) = (out.to_str().unwrap(), input.to_str().unwrap());
    let runs: [&[&str]; 6] = [
        &["build"],
        &["analytic"],
        &["sweep", "--m", "2..4", "--n", "2..8"],
        &["simulate-bit", "--bit", "0", "--trials", "3"],
        &["transmit-image", "--input", i, "--rate-scale", "0.01"],
        &["trace-audit"],
    ];
    let mut files = 0;
    for args in runs {
        let argv: Vec<&str> = ["zenocomm", "--seed", "17", "--out-dir", o].into_iter().chain(args.iter().copied()).collect();
        let cli = Cli::try_parse_from(&argv).map_err(|e| e.to_string())?;
        cli::run(&cli).map_err(|e| format!("{args:?}: {e}"))?;
        let first = snapshot(&out);
        cli::run(&cli).map_err(|e| format!("rerun {args:?}: {e}"))?;
        if first != snapshot(&out) {
            return Err(format!("{args:?} output differs on rerun"));
        }
        files = first.len();
    }
    Ok(format!("6 subcommands rerun byte-identical ({files} files)"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1", "Zeno closed forms", ac1),
        ("AC2", "oracle equivalence", ac2),
        ("AC3", "protocol anchor", ac3),
        ("AC4", "counterfactuality", ac4),
        ("AC5", "conservation suite", ac5),
        ("AC6", "Monte Carlo consistency", ac6),
        ("AC7", "image experiment", ac7),
        ("AC8", "metric reproduction", ac8),
        ("AC9", "determinism", ac9),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        match f() {
            Ok(detail) => println!("{id} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
