//! Command-line front end.
//!
//! Every subcommand writes its outputs plus a `<command>_manifest.json` into
//! the output directory. The manifest records the effective configuration,
//! the subcommand arguments, the seed and the tool version, which is enough
//! to rerun the command and get byte-identical files.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::channel::{self, bits_per_detection, BitTrialResult, Channel, ImperfectionModel, RngStream};
use crate::config::{ConfigError, RunConfig};
use crate::image::{self, pgm, TransmissionJob};
use crate::protocol::{build_protocol_with, Bit, BuiltProtocol, ProtocolParams};
use crate::zeno;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Unreadable or malformed input, or failed writes (exit 3).
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "zenocomm", version, about = "Counterfactual communication simulator")]
pub struct Cli {
    /// Base seed for every random stream (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files (created if missing).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProtocolArgs {
    /// Outer cycles M.
    #[arg(long)]
    pub m: Option<usize>,
    /// Inner cycles N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Bob blocks for bit 0 and passes for bit 1.
    #[arg(long)]
    pub invert_bit_mapping: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Lossless, visibility 1, unit efficiencies and no dark counts.
    #[arg(long)]
    pub ideal: bool,
    #[arg(long)]
    pub visibility: Option<f64>,
    #[arg(long)]
    pub loss_bit0_db: Option<f64>,
    #[arg(long)]
    pub loss_bit1_db: Option<f64>,
    #[arg(long)]
    pub source_rate: Option<f64>,
    #[arg(long)]
    pub coupling_eff: Option<f64>,
    #[arg(long)]
    pub detector_eff: Option<f64>,
    #[arg(long)]
    pub dark_rate: Option<f64>,
    /// Multiplies the source rate after all other settings.
    #[arg(long, default_value_t = 1.0)]
    pub rate_scale: f64,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Compile (M, N) into a network; writes network.txt and ports.json.
    Build {
        #[command(flatten)]
        protocol: ProtocolArgs,
    },
    /// Closed-form and exact-propagation figures for one (M, N).
    Analytic {
        #[command(flatten)]
        protocol: ProtocolArgs,
    },
    /// Success probabilities over a grid of (M, N); writes sweep.csv.
    Sweep {
        /// Outer cycle range, `a..b` inclusive or a single value.
        #[arg(long, value_parser = parse_range, default_value = "2..8")]
        #[serde(serialize_with = "ser_range")]
        m: RangeInclusive<usize>,
        /// Inner cycle range, `a..b` inclusive or a single value.
        #[arg(long, value_parser = parse_range, default_value = "2..24")]
        #[serde(serialize_with = "ser_range")]
        n: RangeInclusive<usize>,
        /// Largest M or N accepted.
        #[arg(long, default_value_t = ProtocolParams::DEFAULT_MAX)]
        max: usize,
    },
    /// Monte Carlo transmission of one bit.
    SimulateBit {
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_bit)]
        bit: Bit,
        /// Seconds per trial.
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        /// Independent trials, trial i using random stream i.
        #[arg(long, default_value_t = 1)]
        trials: u64,
    },
    /// Send a PGM image pixel by pixel; writes received.pgm and image_metrics.json.
    TransmitImage {
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        input: PathBuf,
        /// Seconds per pixel.
        #[arg(long, default_value_t = 1.0)]
        per_bit: f64,
        /// Binarization and decode threshold.
        #[arg(long, default_value_t = image::DEFAULT_THRESHOLD)]
        threshold: u8,
    },
    /// Forward/backward weak-trace audit of the channel segments for both bits.
    TraceAudit {
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Angle offset (radians) applied to one inner coupler for the perturbed audit.
        #[arg(long)]
        detune: Option<f64>,
        /// Inner coupler index (from the input) that `--detune` acts on.
        #[arg(long, default_value_t = 0)]
        detune_coupler: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Build { .. } => "build",
            Command::Analytic { .. } => "analytic",
            Command::Sweep { .. } => "sweep",
            Command::SimulateBit { .. } => "simulate-bit",
            Command::TransmitImage { .. } => "transmit-image",
            Command::TraceAudit { .. } => "trace-audit",
        }
    }
}

fn ser_range<S: serde::Serializer>(r: &RangeInclusive<usize>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}..{}", r.start(), r.end()))
}

pub fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let bad = || format!("expected `a..b` or a single integer, got `{s}`");
    match s.split_once("..") {
        Some((a, b)) => {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if a > b {
                return Err(format!("empty range `{s}`"));
            }
            Ok(a..=b)
        }
        None => {
            let v: usize = s.trim().parse().map_err(|_| bad())?;
            Ok(v..=v)
        }
    }
}

fn parse_bit(s: &str) -> Result<Bit, String> {
    match s {
        "0" => Ok(Bit::Zero),
        "1" => Ok(Bit::One),
        _ => Err(format!("bit must be 0 or 1, got `{s}`")),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Effective configuration: config file, then global flags, then subcommand flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.run.out_dir = d.clone();
    }
    let (proto, model) = match &cli.command {
        Command::Build { protocol } | Command::Analytic { protocol } => (Some(protocol), None),
        Command::SimulateBit { protocol, model, .. }
        | Command::TransmitImage { protocol, model, .. }
        | Command::TraceAudit { protocol, model, .. } => (Some(protocol), Some(model)),
        Command::Sweep { .. } => (None, None),
    };
    if let Some(p) = proto {
        if let Some(m) = p.m {
            cfg.protocol.m = m;
        }
        if let Some(n) = p.n {
            cfg.protocol.n = n;
        }
        cfg.protocol.invert_bit_mapping |= p.invert_bit_mapping;
    }
    if let Some(a) = model {
        apply_model_args(&mut cfg.model, a)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_model_args(model: &mut ImperfectionModel, a: &ModelArgs) -> Result<(), CliError> {
    if a.ideal {
        *model = ImperfectionModel {
            source_rate: model.source_rate,
            ..ImperfectionModel::ideal()
        };
    }
    let overrides = [
        (a.visibility, &mut model.visibility),
        (a.loss_bit0_db, &mut model.loss_bit0_db),
        (a.loss_bit1_db, &mut model.loss_bit1_db),
        (a.source_rate, &mut model.source_rate),
        (a.coupling_eff, &mut model.coupling_eff),
        (a.detector_eff, &mut model.detector_eff),
        (a.dark_rate, &mut model.dark_rate),
    ];
    for (v, slot) in overrides {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if !(a.rate_scale > 0.0 && a.rate_scale.is_finite()) {
        return Err(usage(format!("--rate-scale must be positive, got {}", a.rate_scale)));
    }
    model.source_rate *= a.rate_scale;
    Ok(())
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_owned(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(path)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("serializable");
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    args: &'a Command,
    config: &'a RunConfig,
    outputs: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    simulated_time_s: Option<f64>,
}

fn built(cfg: &RunConfig) -> Result<BuiltProtocol, CliError> {
    build_protocol_with(cfg.params()?, cfg.build_options()).map_err(usage)
}

fn channel_for(cfg: &RunConfig) -> Result<Channel, CliError> {
    Channel::new(built(cfg)?, cfg.model).map_err(usage)
}

fn probs_json(b: &BuiltProtocol, bit: Bit) -> Result<Value, CliError> {
    let rep = b.ideal_detection_probs(bit).map_err(usage)?;
    Ok(json!({
        "detectors": rep.prob_by_detector,
        "sinks_total": rep.prob_by_sink.values().sum::<f64>(),
        "surviving_norm": rep.surviving_norm,
        "conditional_success": b.conditional_success(&rep, bit),
        "df_probability": b.df_probability(&rep),
    }))
}

/// Runs a parsed command; returns the summary lines for stdout.
pub fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let cfg = resolve_config(cli)?;
    let mut out = Output::new(&cfg.run.out_dir)?;
    let seed = cfg.run.seed;
    let mut lines = Vec::new();
    let mut simulated_time_s = None;

    match &cli.command {
        Command::Build { .. } => {
            let b = built(&cfg)?;
            out.write("network.txt", b.net.to_text().as_bytes())?;
            out.json("ports.json", &json!({ "params": b.params, "ports": b.ports, "counts": b.counts }))?;
            lines.push(format!(
                "built M={} N={}: {} elements, {} switches, {} inner couplers",
                b.params.outer_m,
                b.params.inner_n,
                b.net.elements().len(),
                b.counts.switches,
                b.counts.inner_couplers
            ));
        }
        Command::Analytic { .. } => {
            let b = built(&cfg)?;
            let p = b.params;
            let s0 = b.ideal_success(Bit::Zero).map_err(usage)?;
            let s1 = b.ideal_success(Bit::One).map_err(usage)?;
            out.json(
                "analytic.json",
                &json!({
                    "m": p.outer_m,
                    "n": p.inner_n,
                    "outer_theta": p.outer_theta(),
                    "inner_theta": p.inner_theta(),
                    "zeno_survival_n": zeno::zeno_survival(p.inner_n as u32),
                    "bit0_error_bound": zeno::bit0_error_bound(p.outer_m as u32),
                    "s0": s0,
                    "s1": s1,
                    "bit0": probs_json(&b, Bit::Zero)?,
                    "bit1": probs_json(&b, Bit::One)?,
                    "counts": b.counts,
                }),
            )?;
            lines.push(format!("M={} N={}: S0 = {s0:.4}, S1 = {s1:.4}", p.outer_m, p.inner_n));
        }
        Command::Sweep { m, n, max } => {
            let points = zeno::sweep(m.clone(), n.clone(), *max).map_err(usage)?;
            out.write("sweep.csv", zeno::sweep_csv(&points).as_bytes())?;
            let anchor = zeno::theoretical_success(ProtocolParams::new(3, 6).map_err(usage)?).map_err(usage)?;
            let in_grid = points.iter().find(|p| p.m == 3 && p.n == 6).copied();
            out.json(
                "sweep_summary.json",
                &json!({
                    "rows": points.len(),
                    "m_range": [m.start(), m.end()],
                    "n_range": [n.start(), n.end()],
                    "anchor": {
                        "m": 3, "n": 6,
                        "s0": anchor.s0, "s1": anchor.s1,
                        "reference_s0": 0.750, "reference_s1": 0.872,
                        "abs_diff_s0": (anchor.s0 - 0.750).abs(),
                        "abs_diff_s1": (anchor.s1 - 0.872).abs(),
                        "row_in_grid": in_grid,
                    },
                }),
            )?;
            lines.push(format!("sweep: {} rows; (3,6) S0 = {:.4}, S1 = {:.4}", points.len(), anchor.s0, anchor.s1));
        }
        Command::SimulateBit { bit, duration, trials, .. } => {
            if !(*duration > 0.0 && duration.is_finite()) {
                return Err(usage(format!("--duration must be positive, got {duration}")));
            }
            if *trials == 0 {
                return Err(usage("--trials must be at least 1"));
            }
            let ch = channel_for(&cfg)?;
            let results: Vec<BitTrialResult> = (0..*trials)
                .map(|i| ch.transmit_bit(*bit, *duration, RngStream::new(seed, i)))
                .collect::<Result<_, _>>()
                .map_err(usage)?;
            let summary = pooled_summary(&ch, *bit, &results)?;
            lines.push(format!(
                "bit {}: success {} (95% CI {}), D_f conditional rate {}, decoded {}",
                bit.as_u8(),
                fmt_opt(summary.success_estimate, 4),
                summary
                    .success_ci95
                    .map(|[a, b]| format!("{a:.4}..{b:.4}"))
                    .unwrap_or_else(|| "n/a".into()),
                fmt_opt(summary.df_conditional_rate, 6),
                summary.decoded,
            ));
            out.json(
                "simulate_bit.json",
                &json!({
                    "bit": bit,
                    "duration_s": duration,
                    "model": cfg.model,
                    "jitter_sigma": ch.jitter_sigma,
                    "ideal_success": ch.built.ideal_success(*bit).map_err(usage)?,
                    "summary": summary,
                    "trials": results,
                }),
            )?;
            if *trials > 1 {
                out.write("simulate_bit.csv", trials_csv(&ch, &results).as_bytes())?;
            }
        }
        Command::TransmitImage { input, per_bit, threshold, .. } => {
            if !(*per_bit > 0.0 && per_bit.is_finite()) {
                return Err(usage(format!("--per-bit must be positive, got {per_bit}")));
            }
            let img = pgm::read_file(input).map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?;
            let plane = image::binarize(&img, *threshold);
            let ch = channel_for(&cfg)?;
            let job = TransmissionJob {
                plane: &plane,
                per_bit_duration: *per_bit,
                channel: &ch,
                seed,
            };
            let outcome = image::transmit_image(&job).map_err(usage)?;
            let report = image::error_report(&plane, &outcome.received, *threshold).map_err(usage)?;
            out.write("received.pgm", &pgm::encode(&outcome.received))?;
            out.json(
                "image_metrics.json",
                &json!({ "metrics": outcome.metrics, "gray_report": report, "jitter_sigma": ch.jitter_sigma }),
            )?;
            let m = &outcome.metrics;
            simulated_time_s = Some(m.simulated_time_s);
            lines.push(format!(
                "{}x{} image: {} bit errors (BER {:.6}), {} no-signal pixels, simulated time {} s ({:.1} min)",
                m.width,
                m.height,
                m.bit_errors,
                m.ber,
                m.no_signal_pixels.len(),
                m.simulated_time_s,
                m.simulated_time_min
            ));
        }
        Command::TraceAudit { detune, detune_coupler, .. } => {
            let ch = channel_for(&cfg)?;
            let b = &ch.built;
            let ideal = (
                channel::trace_audit(b, Bit::Zero).map_err(usage)?,
                channel::trace_audit(b, Bit::One).map_err(usage)?,
            );
            let (kind, perturbed) = match detune {
                Some(d) => {
                    let p = b.detuned(*detune_coupler, *d).map_err(usage)?;
                    (
                        json!({ "detune": d, "coupler": detune_coupler }),
                        (
                            channel::trace_audit(&p, Bit::Zero).map_err(usage)?,
                            channel::trace_audit(&p, Bit::One).map_err(usage)?,
                        ),
                    )
                }
                None => {
                    let audit = |bit| {
                        let mut rng = RngStream::new(seed, 0).rng();
                        ch.trace_audit(bit, &mut rng)
                    };
                    (
                        json!({ "jitter_sigma": ch.jitter_sigma, "visibility": cfg.model.visibility }),
                        (audit(Bit::Zero).map_err(usage)?, audit(Bit::One).map_err(usage)?),
                    )
                }
            };
            for (label, r) in [
                ("ideal bit 0", &ideal.0),
                ("ideal bit 1", &ideal.1),
                ("perturbed bit 0", &perturbed.0),
                ("perturbed bit 1", &perturbed.1),
            ] {
                lines.push(format!(
                    "{label}: max trace {:.3e}, nonzero segments {}/{}",
                    r.max_trace,
                    r.nonzero_segments,
                    r.segments.len()
                ));
            }
            out.json(
                "trace_audit.json",
                &json!({
                    "tolerance": channel::TRACE_TOL,
                    "ideal": { "bit0": ideal.0, "bit1": ideal.1 },
                    "perturbation": kind,
                    "perturbed": { "bit0": perturbed.0, "bit1": perturbed.1 },
                }),
            )?;
        }
    }

    let name = cli.command.name();
    let mut files = out.files.clone();
    let manifest_name = format!("{}_manifest.json", name.replace('-', "_"));
    files.push(manifest_name.clone());
    out.json(
        &manifest_name,
        &Manifest {
            tool: "zenocomm",
            version: env!("CARGO_PKG_VERSION"),
            command: name,
            seed,
            args: &cli.command,
            config: &cfg,
            outputs: &files,
            simulated_time_s,
        },
    )?;
    lines.push(format!("wrote {} files to {}", files.len(), cfg.run.out_dir.display()));
    Ok(lines)
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "n/a".into())
}

#[derive(Debug, Serialize)]
struct PooledSummary {
    trials: usize,
    alice_detections: u64,
    success_estimate: Option<f64>,
    success_ci95: Option<[f64; 2]>,
    df_conditional_rate: Option<f64>,
    decoded: String,
    decode_counts: BTreeMap<String, usize>,
    bits_per_detection: channel::BitsPerDetection,
}

/// Counts pooled over trials; the interval is the normal approximation.
fn pooled_summary(ch: &Channel, bit: Bit, results: &[BitTrialResult]) -> Result<PooledSummary, CliError> {
    let p = &ch.built.ports;
    let (mut alice, mut hit, mut df) = (0u64, 0u64, 0u64);
    let mut decode_counts = BTreeMap::new();
    for r in results {
        alice += r.count(&p.d0) + r.count(&p.d1);
        hit += r.count(ch.built.expected_detector(bit));
        df += r.coincidence_df;
        let key = match r.bit_decoded {
            Some(b) => b.as_u8().to_string(),
            None => "no-signal".to_string(),
        };
        *decode_counts.entry(key).or_insert(0) += 1;
    }
    let (est, ci, rate) = if alice > 0 {
        let n = alice as f64;
        let s = hit as f64 / n;
        let h = 1.96 * (s * (1.0 - s) / n).sqrt();
        (Some(s), Some([s - h, s + h]), Some(df as f64 / n))
    } else {
        (None, None, None)
    };
    let decoded = if results.len() == 1 {
        match results[0].bit_decoded {
            Some(b) => b.as_u8().to_string(),
            None => "no-signal".into(),
        }
    } else {
        format!("{decode_counts:?}")
    };
    Ok(PooledSummary {
        trials: results.len(),
        alice_detections: alice,
        success_estimate: est,
        success_ci95: ci,
        df_conditional_rate: rate,
        decoded,
        decode_counts,
        bits_per_detection: bits_per_detection(results).map_err(usage)?,
    })
}

fn trials_csv(ch: &Channel, results: &[BitTrialResult]) -> String {
    let p = &ch.built.ports;
    let mut s = String::from("trial,d0,d1,df,coincidence_df,decoded,success,df_rate\n");
    for (i, r) in results.iter().enumerate() {
        let df: u64 = p.df.iter().map(|d| r.count(d)).sum();
        s.push_str(&format!(
            "{i},{},{},{df},{},{},{},{}\n",
            r.count(&p.d0),
            r.count(&p.d1),
            r.coincidence_df,
            r.bit_decoded.map(|b| b.as_u8().to_string()).unwrap_or_default(),
            fmt_opt(r.success_prob_estimate, 6),
            fmt_opt(r.df_conditional_rate, 8),
        ));
    }
    s
}
