//! Pixel-by-pixel counterfactual image transmission.
//!
//! Each pixel of a binarized image is sent as one bit for `per_bit_duration`
//! seconds. The received gray level encodes the fraction of Alice's clicks on
//! D₁: all-D₀ maps to 0 and all-D₁ to 255.

pub mod pgm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{Channel, ChannelError, RngStream};
use crate::protocol::Bit;

/// Gray level written for pixels where D₀ and D₁ tie (including no clicks).
pub const NO_SIGNAL_GRAY: u8 = 128;
pub const DEFAULT_THRESHOLD: u8 = 128;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("per-bit duration must be positive, got {0}")]
    InvalidDuration(f64),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major samples.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, String> {
        if width == 0 || height == 0 {
            return Err(format!("{width}x{height} image"));
        }
        if pixels.len() != width * height {
            return Err(format!("{} samples for a {width}x{height} image", pixels.len()));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("nonzero size")
    }
}

/// Synthetic logo: a bright ring with a diagonal tail (a "Q") on a dark field.
pub fn demo_logo(width: usize, height: usize) -> GrayImage {
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let r = 0.36 * width.min(height) as f64;
    let thick = 0.09 * width.min(height) as f64;
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            let d = (dx * dx + dy * dy).sqrt();
            let ring = (d - r).abs() < thick / 2.0;
            // tail along the lower-right diagonal
            let along = (dx + dy) / std::f64::consts::SQRT_2;
            let across = (dx - dy) / std::f64::consts::SQRT_2;
            let tail = across.abs() < thick / 2.0 && along > 0.6 * r && along < 1.35 * r;
            pixels.push(if ring || tail { 255 } else { 0 });
        }
    }
    GrayImage { width, height, pixels }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlane {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<Bit>,
}

impl BitPlane {
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == Bit::One).count()
    }
}

/// Pixels at or above `threshold` become bit 1.
pub fn binarize(img: &GrayImage, threshold: u8) -> BitPlane {
    BitPlane {
        width: img.width,
        height: img.height,
        bits: img
            .pixels
            .iter()
            .map(|&p| if p >= threshold { Bit::One } else { Bit::Zero })
            .collect(),
    }
}

/// Linear map of Alice's click split to gray; `None` when D₀ and D₁ tie.
pub fn gray_for_counts(d0: u64, d1: u64) -> Option<u8> {
    if d0 == d1 {
        return None;
    }
    Some((255.0 * d1 as f64 / (d0 + d1) as f64).round() as u8)
}

pub struct TransmissionJob<'a> {
    pub plane: &'a BitPlane,
    pub per_bit_duration: f64,
    pub channel: &'a Channel,
    /// Pixel `i` uses stream `RngStream::new(seed, i)`.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub width: usize,
    pub height: usize,
    pub pixels: usize,
    pub per_bit_duration_s: f64,
    pub simulated_time_s: f64,
    pub simulated_time_min: f64,
    pub bit_errors: usize,
    pub ber: f64,
    pub no_signal_pixels: Vec<usize>,
    pub mean_success_bit0: Option<f64>,
    pub mean_success_bit1: Option<f64>,
    pub mean_df_conditional_rate: Option<f64>,
    pub total_alice_detections: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionOutcome {
    pub received: GrayImage,
    pub decoded: Vec<Option<Bit>>,
    pub metrics: ImageMetrics,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn transmit_image(job: &TransmissionJob<'_>) -> Result<TransmissionOutcome, ImageError> {
    if !(job.per_bit_duration > 0.0 && job.per_bit_duration.is_finite()) {
        return Err(ImageError::InvalidDuration(job.per_bit_duration));
    }
    let ch = job.channel;
    let (d0, d1) = (ch.built.ports.d0.clone(), ch.built.ports.d1.clone());
    let trials = job
        .plane
        .bits
        .par_iter()
        .enumerate()
        .map(|(i, &bit)| ch.transmit_bit(bit, job.per_bit_duration, RngStream::new(job.seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut pixels = Vec::with_capacity(trials.len());
    let mut decoded = Vec::with_capacity(trials.len());
    let mut no_signal = Vec::new();
    let (mut errors, mut alice) = (0, 0);
    let (mut s0, mut s1, mut rates) = (Vec::new(), Vec::new(), Vec::new());
    for (i, t) in trials.iter().enumerate() {
        let (c0, c1) = (t.count(&d0), t.count(&d1));
        alice += c0 + c1;
        match gray_for_counts(c0, c1) {
            Some(g) => pixels.push(g),
            None => {
                pixels.push(NO_SIGNAL_GRAY);
                no_signal.push(i);
            }
        }
        if t.bit_decoded != Some(t.bit_sent) {
            errors += 1;
        }
        decoded.push(t.bit_decoded);
        if let Some(p) = t.success_prob_estimate {
            match t.bit_sent {
                Bit::Zero => s0.push(p),
                Bit::One => s1.push(p),
            }
        }
        rates.extend(t.df_conditional_rate);
    }
    let n = trials.len();
    let simulated = n as f64 * job.per_bit_duration;
    Ok(TransmissionOutcome {
        received: GrayImage::new(job.plane.width, job.plane.height, pixels).map_err(ImageError::DimensionMismatch)?,
        decoded,
        metrics: ImageMetrics {
            width: job.plane.width,
            height: job.plane.height,
            pixels: n,
            per_bit_duration_s: job.per_bit_duration,
            simulated_time_s: simulated,
            simulated_time_min: simulated / 60.0,
            bit_errors: errors,
            ber: errors as f64 / n as f64,
            no_signal_pixels: no_signal,
            mean_success_bit0: mean(&s0),
            mean_success_bit1: mean(&s1),
            mean_df_conditional_rate: mean(&rates),
            total_alice_detections: alice,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub bit_errors: usize,
    pub ber: f64,
    pub mean_gray_bit0: Option<f64>,
    pub mean_gray_bit1: Option<f64>,
    pub histogram: Vec<u64>,
}

/// Compares a received gray chart with the sent bits; gray ≥ `threshold` reads as 1.
pub fn error_report(sent: &BitPlane, received: &GrayImage, threshold: u8) -> Result<ErrorReport, ImageError> {
    if sent.width != received.width || sent.height != received.height {
        return Err(ImageError::DimensionMismatch(format!(
            "sent {}x{}, received {}x{}",
            sent.width, sent.height, received.width, received.height
        )));
    }
    let mut histogram = vec![0u64; 256];
    let (mut g0, mut g1) = (Vec::new(), Vec::new());
    let mut errors = 0;
    for (&bit, &g) in sent.bits.iter().zip(&received.pixels) {
        histogram[g as usize] += 1;
        let read = if g >= threshold { Bit::One } else { Bit::Zero };
        if read != bit {
            errors += 1;
        }
        match bit {
            Bit::Zero => g0.push(g as f64),
            Bit::One => g1.push(g as f64),
        }
    }
    Ok(ErrorReport {
        bit_errors: errors,
        ber: errors as f64 / sent.bits.len() as f64,
        mean_gray_bit0: mean(&g0),
        mean_gray_bit1: mean(&g1),
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(n: usize) -> GrayImage {
        let px = (0..n * n).map(|i| if (i / n + i % n).is_multiple_of(2) { 0 } else { 255 }).collect();
        GrayImage::new(n, n, px).unwrap()
    }

    #[test]
    fn binarize_cases() {
        assert!(binarize(&GrayImage::filled(4, 3, 0), 128).bits.iter().all(|&b| b == Bit::Zero));
        assert!(binarize(&GrayImage::filled(4, 3, 255), 128).bits.iter().all(|&b| b == Bit::One));
        let plane = binarize(&checkerboard(6), 128);
        assert_eq!(plane.ones(), 18);
        assert_eq!(plane.bits[0], Bit::Zero);
        assert_eq!(plane.bits[1], Bit::One);
        assert_eq!(plane.bits[6], Bit::One);
    }

    #[test]
    fn gray_mapping() {
        assert_eq!(gray_for_counts(10, 0), Some(0));
        assert_eq!(gray_for_counts(0, 10), Some(255));
        assert_eq!(gray_for_counts(149, 851), Some(217));
        assert_eq!(gray_for_counts(3, 3), None);
        assert_eq!(gray_for_counts(0, 0), None);
    }

    #[test]
    fn error_report_cases() {
        let plane = binarize(&checkerboard(50), 128);
        let ideal: Vec<u8> = plane.bits.iter().map(|b| if *b == Bit::One { 222 } else { 64 }).collect();
        let mut rx = GrayImage::new(50, 50, ideal).unwrap();
        let r = error_report(&plane, &rx, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(r.bit_errors, 0);
        assert_eq!(r.ber, 0.0);
        assert_eq!(r.mean_gray_bit1, Some(222.0));
        assert_eq!(r.histogram[64], 1250);
        rx.pixels[7] = 255 - rx.pixels[7];
        let r = error_report(&plane, &rx, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(r.bit_errors, 1);
        assert!((r.ber - 4e-4).abs() < 1e-15);
        let small = GrayImage::filled(3, 3, 0);
        assert!(matches!(error_report(&plane, &small, 128), Err(ImageError::DimensionMismatch(_))));
    }

    #[test]
    fn gray_image_validation() {
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
        assert!(GrayImage::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn demo_logo_is_binary_and_nontrivial() {
        let img = demo_logo(50, 50);
        assert!(img.pixels.iter().all(|&p| p == 0 || p == 255));
        let ones = binarize(&img, 128).ones();
        assert!(ones > 200 && ones < 1500, "{ones}");
    }
}
