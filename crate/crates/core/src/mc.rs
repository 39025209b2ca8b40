//! Monte Carlo link simulation: random payloads, noisy capture at the
//! segment centroids, threshold demodulation and empirical BER.
//!
//! Frames carry `J` fresh equiprobable bits each. Noise for a frame is
//! drawn per sensor pixel from the counter-based stream, so the centroid
//! values produced here are the same ones a full-frame capture with the
//! same seed and frame index would contain.

use rayon::prelude::*;

use crate::camera::{self, NoiseModel, SensorFrame};
use crate::error::{Error, Result};
use crate::isi;
use crate::model::TrailModel;
use crate::render::TrailLayout;
use crate::rng::CounterRng;

pub const HISTOGRAM_BINS: usize = 256;
const FRAMES_PER_TASK: usize = 512;
const Z95: f64 = 1.959_963_984_540_054;

/// Decodes every segment: one iff the centroid pixel exceeds its threshold.
pub fn demodulate(frame: &SensorFrame, layout: &TrailLayout, thresholds: &[f64]) -> Result<Vec<bool>> {
    if thresholds.len() != layout.segments() {
        return Err(Error::Precondition(format!(
            "{} thresholds for {} segments",
            thresholds.len(),
            layout.segments()
        )));
    }
    layout
        .centroid_pixels
        .iter()
        .zip(thresholds)
        .enumerate()
        .map(|(j, (&(x, y), &th))| {
            let idx = frame.pv.index(x, y).ok_or_else(|| {
                Error::Precondition(format!("centroid {j} at ({x}, {y}) lies outside the frame"))
            })?;
            Ok(frame.pv.data[idx] > th)
        })
        .collect()
}

/// Histogram bin of a pixel value: unit-wide bins on `[0, 256)`.
pub fn histogram_bin(pv: f64) -> usize {
    (pv.max(0.0).floor() as usize).min(HISTOGRAM_BINS - 1)
}

/// Wilson score interval at 95 % confidence.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if errors == trials { 1.0 } else { (center + half).min(1.0) };
    (low, high)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseDomain {
    #[default]
    Pixel,
    Power,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct McOptions {
    pub noise: NoiseDomain,
    /// Per-segment thresholds; defaults to the adjacent-ISI midpoints.
    pub thresholds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub n_bits: u64,
    pub n_errors: u64,
    pub ber_hat: f64,
    pub ci95: (f64, f64),
    pub seed: u64,
    /// Centroid pixel-value histograms indexed by transmitted bit.
    pub histograms: [Vec<u64>; 2],
    /// Errors per segment.
    pub segment_errors: Vec<u64>,
}

#[derive(Clone)]
struct Partial {
    errors: u64,
    histograms: [Vec<u64>; 2],
    segment_errors: Vec<u64>,
}

impl Partial {
    fn new(segments: usize) -> Self {
        Partial {
            errors: 0,
            histograms: [vec![0; HISTOGRAM_BINS], vec![0; HISTOGRAM_BINS]],
            segment_errors: vec![0; segments],
        }
    }

    fn merge(mut self, other: Partial) -> Partial {
        self.errors += other.errors;
        for c in 0..2 {
            for (a, b) in self.histograms[c].iter_mut().zip(&other.histograms[c]) {
                *a += b;
            }
        }
        for (a, b) in self.segment_errors.iter_mut().zip(&other.segment_errors) {
            *a += b;
        }
        self
    }
}

/// Simulates `n_bits` bits and counts errors.
///
/// Every frame carries a full rotation of fresh bits; when `n_bits` is not a
/// multiple of `J`, only the first `n_bits mod J` segments of the last frame
/// are scored.
pub fn run_mc(model: &TrailModel, n_bits: u64, seed: u64, options: &McOptions) -> Result<McResult> {
    let segments = model.segments();
    if n_bits == 0 {
        return Err(Error::Precondition("n_bits must be positive".into()));
    }
    let thresholds = match &options.thresholds {
        Some(t) if t.len() == segments => t.clone(),
        Some(t) => {
            return Err(Error::Precondition(format!(
                "{} thresholds for {segments} segments",
                t.len()
            )))
        }
        None => isi::triplet_means(model)?.thresholds(),
    };
    let noise = match options.noise {
        NoiseDomain::Pixel => NoiseModel::PixelDomain {
            sigma: isi::effective_sigma(model)?,
            seed,
        },
        NoiseDomain::Power => NoiseModel::PowerDomain {
            sigma: isi::power_noise_sigma(model)?,
            seed,
        },
    };
    let rng = CounterRng::new(seed);
    let cam = &model.config.camera;
    let counters: Vec<u64> = model
        .layout
        .centroid_pixels
        .iter()
        .map(|&(x, y)| camera::pixel_counter(cam, x, y))
        .collect();
    let frames = n_bits.div_ceil(segments as u64);
    let tasks = frames.div_ceil(FRAMES_PER_TASK as u64);

    let total = (0..tasks)
        .into_par_iter()
        .map(|task| {
            let mut part = Partial::new(segments);
            let start = task * FRAMES_PER_TASK as u64;
            let end = (start + FRAMES_PER_TASK as u64).min(frames);
            for frame in start..end {
                let bits = rng.bits(frame, segments);
                let scored = (n_bits - frame * segments as u64).min(segments as u64) as usize;
                for j in 0..scored {
                    let energy = model.centroid_energy(j, &bits);
                    let pv = camera::capture_pixel(
                        energy,
                        &model.response,
                        model.photon_energy,
                        Some((&noise, &rng)),
                        frame,
                        counters[j],
                    );
                    let sent = bits[j];
                    if (pv > thresholds[j]) != sent {
                        part.errors += 1;
                        part.segment_errors[j] += 1;
                    }
                    part.histograms[sent as usize][histogram_bin(pv)] += 1;
                }
            }
            part
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Partial::new(segments), Partial::merge);

    Ok(McResult {
        n_bits,
        n_errors: total.errors,
        ber_hat: total.errors as f64 / n_bits as f64,
        ci95: wilson_interval(total.errors, n_bits),
        seed,
        histograms: total.histograms,
        segment_errors: total.segment_errors,
    })
}

/// Mode centers of a pixel-value histogram.
///
/// The counts are smoothed with a width-3 moving average; local maxima whose
/// topographic prominence reaches 1 % of the total mass are reported as bin
/// centers in ascending order.
pub fn histogram_modes(histogram: &[u64]) -> Result<Vec<f64>> {
    let mass: u64 = histogram.iter().sum();
    if mass == 0 {
        return Err(Error::Precondition("histogram is empty".into()));
    }
    let n = histogram.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            histogram[lo..=hi].iter().sum::<u64>() as f64 / 3.0
        })
        .collect();
    let min_prominence = 0.01 * mass as f64;

    let mut modes = Vec::new();
    let mut i = 0;
    while i < n {
        // Collapse plateaus to their middle.
        let mut end = i;
        while end + 1 < n && smooth[end + 1] == smooth[i] {
            end += 1;
        }
        let left_lower = i == 0 || smooth[i - 1] < smooth[i];
        let right_lower = end == n - 1 || smooth[end + 1] < smooth[i];
        if smooth[i] > 0.0 && left_lower && right_lower {
            let height = smooth[i];
            let left_base = base_towards(&smooth, i, height, -1);
            let right_base = base_towards(&smooth, end, height, 1);
            if height - left_base.max(right_base) >= min_prominence {
                modes.push((i + end) as f64 / 2.0 + 0.5);
            }
        }
        i = end + 1;
    }
    Ok(modes)
}

/// Lowest value between `from` and the nearest strictly higher sample in
/// direction `dir` (or the histogram edge).
fn base_towards(s: &[f64], from: usize, height: f64, dir: i64) -> f64 {
    let mut lowest = height;
    let mut k = from as i64 + dir;
    while k >= 0 && (k as usize) < s.len() {
        let v = s[k as usize];
        if v > height {
            break;
        }
        lowest = lowest.min(v);
        k += dir;
    }
    if k < 0 || k as usize >= s.len() {
        // Open side: the peak drains to zero outside the axis.
        lowest = lowest.min(0.0);
    }
    lowest
}
