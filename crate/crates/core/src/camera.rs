//! Camera response: photon counting, the photoelectric/ADC/gamma chain, its
//! derivative, noisy frame capture and pixel-domain noise estimation.

use crate::config::CameraConfig;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::render::EnergyGrid;
use crate::rng::CounterRng;

/// Full-scale pixel value.
pub const PV_MAX: f64 = 255.0;

/// Photon count `(R + N) / Q_p`, floored at zero.
pub fn photon_count(received: f64, noise: f64, photon_energy: f64) -> f64 {
    ((received + noise) / photon_energy).max(0.0)
}

/// The camera response `Φ` reduced to an affine pre-gamma ratio
/// `ratio(I) = offset + slope·I` followed by clipping and gamma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraResponse {
    offset: f64,
    slope: f64,
    inv_gamma: f64,
}

impl CameraResponse {
    pub fn new(cam: &CameraConfig) -> Self {
        let adc = if cam.normalize_adc {
            cam.adc_gain * cam.raw_max / cam.v_a_ref
        } else {
            cam.adc_gain
        };
        let gain = adc * cam.cds_gain / cam.raw_max;
        CameraResponse {
            offset: gain * (cam.v_a_ref - cam.source_follower_gain * cam.v_ref),
            slope: gain * cam.source_follower_gain * cam.quantum_efficiency * cam.sense_node_gain,
            inv_gamma: 1.0 / cam.gamma,
        }
    }

    /// Pre-clipping ADC ratio.
    #[inline]
    pub fn ratio(&self, photons: f64) -> f64 {
        self.offset + self.slope * photons
    }

    /// Pixel value on the 0–255 scale.
    #[inline]
    pub fn pixel_value(&self, photons: f64) -> f64 {
        PV_MAX * self.ratio(photons).clamp(0.0, 1.0).powf(self.inv_gamma)
    }

    /// `dΦ/dI`, pixel value per photon. Fails outside the unclipped range.
    pub fn derivative(&self, photons: f64) -> Result<f64> {
        let r = self.ratio(photons);
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Saturated { photons });
        }
        Ok(PV_MAX * self.inv_gamma * r.powf(self.inv_gamma - 1.0) * self.slope)
    }

    /// Photon count where the response leaves zero.
    pub fn dark_threshold(&self) -> f64 {
        (-self.offset / self.slope).max(0.0)
    }

    /// Photon count where the response reaches full scale.
    pub fn saturation(&self) -> f64 {
        (1.0 - self.offset) / self.slope
    }

    /// Inverse of [`pixel_value`](Self::pixel_value) on the open range.
    pub fn photons_for(&self, pv: f64) -> f64 {
        let r = (pv / PV_MAX).powf(1.0 / self.inv_gamma);
        (r - self.offset) / self.slope
    }
}

pub fn pixel_response(photons: f64, cam: &CameraConfig) -> f64 {
    CameraResponse::new(cam).pixel_value(photons)
}

pub fn response_derivative(photons: f64, cam: &CameraConfig) -> Result<f64> {
    CameraResponse::new(cam).derivative(photons)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Gaussian energy noise added before photon conversion, J.
    PowerDomain { sigma: f64, seed: u64 },
    /// Gaussian noise added to the noise-free pixel value.
    PixelDomain { sigma: f64, seed: u64 },
}

impl NoiseModel {
    pub fn seed(&self) -> u64 {
        match *self {
            NoiseModel::PowerDomain { seed, .. } | NoiseModel::PixelDomain { seed, .. } => seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMeta {
    pub seed: Option<u64>,
    pub frame: u64,
    pub bits: Vec<bool>,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    /// Pixel values on the 0–255 scale.
    pub pv: Grid,
    pub meta: FrameMeta,
}

/// Noise addressing for sensor pixel `(x, y)`.
#[inline]
pub fn pixel_counter(cam: &CameraConfig, x: i64, y: i64) -> u64 {
    y as u64 * cam.width as u64 + x as u64
}

/// One pixel of [`capture_frame`], for callers that only need a few pixels.
#[inline]
pub fn capture_pixel(
    received: f64,
    response: &CameraResponse,
    photon_energy: f64,
    noise: Option<(&NoiseModel, &CounterRng)>,
    frame: u64,
    counter: u64,
) -> f64 {
    match noise {
        None => response.pixel_value(photon_count(received, 0.0, photon_energy)),
        Some((NoiseModel::PowerDomain { sigma, .. }, rng)) => {
            let n = if *sigma > 0.0 { sigma * rng.normal(frame, counter) } else { 0.0 };
            response.pixel_value(photon_count(received, n, photon_energy))
        }
        Some((NoiseModel::PixelDomain { sigma, .. }, rng)) => {
            let clean = response.pixel_value(photon_count(received, 0.0, photon_energy));
            let n = if *sigma > 0.0 { sigma * rng.normal(frame, counter) } else { 0.0 };
            (clean + n).clamp(0.0, PV_MAX)
        }
    }
}

/// Converts a received-energy grid into a pixel-value frame. With
/// `noise = None` the frame is noise-free.
pub fn capture_frame(
    received: &EnergyGrid,
    noise: Option<&NoiseModel>,
    cam: &CameraConfig,
    frame: u64,
) -> SensorFrame {
    let response = CameraResponse::new(cam);
    let qp = cam.photon_energy();
    let rng = noise.map(|n| CounterRng::new(n.seed()));
    let src = &received.grid;
    let mut pv = src.same_extent();
    for (i, out) in pv.data.iter_mut().enumerate() {
        let (x, y) = src.coords(i);
        let stream = noise.zip(rng.as_ref());
        *out = capture_pixel(src.data[i], &response, qp, stream, frame, pixel_counter(cam, x, y));
    }
    SensorFrame {
        pv,
        meta: FrameMeta {
            seed: noise.map(NoiseModel::seed),
            frame,
            ..FrameMeta::default()
        },
    }
}

/// Anscombe-family variance-stabilizing transform `2·sqrt(x + 3/8)`.
pub fn anscombe(x: f64) -> f64 {
    2.0 * (x + 0.375).max(0.0).sqrt()
}

/// Pixel-domain noise level from repeated frames of one fixed blink pattern.
///
/// The brightest location of the frame-averaged image is taken as the trail
/// maximum and its value extracted from every frame. The samples go through
/// the Anscombe transform, are whitened by removing their mean, and the
/// sample standard deviation is mapped back through the transform slope at
/// the mean.
pub fn estimate_sigma_maxbright(frames: &[SensorFrame]) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::Precondition(
            "noise estimation needs at least two frames".into(),
        ));
    }
    let first = &frames[0].pv;
    if frames.iter().any(|f| !f.pv.same_window(first)) {
        return Err(Error::Precondition("frames cover different windows".into()));
    }
    let n = frames.len() as f64;
    let mut mean_img = vec![0.0; first.len()];
    for f in frames {
        for (m, v) in mean_img.iter_mut().zip(&f.pv.data) {
            *m += v / n;
        }
    }
    let (peak, _) = mean_img
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });

    let maxima: Vec<f64> = frames.iter().map(|f| f.pv.data[peak]).collect();
    let stabilized: Vec<f64> = maxima.iter().map(|&x| anscombe(x)).collect();
    let mu = stabilized.iter().sum::<f64>() / n;
    let whitened: Vec<f64> = stabilized.iter().map(|y| y - mu).collect();
    let sd = (whitened.iter().map(|w| w * w).sum::<f64>() / (n - 1.0)).sqrt();
    let level = maxima.iter().sum::<f64>() / n;
    // d/dx 2·sqrt(x + 3/8) = 1 / sqrt(x + 3/8)
    Ok(sd * (level + 0.375).sqrt())
}
