//! A rendered single-LED trail with everything downstream consumers need:
//! geometry, per-segment coverage, blur, channel gain and the
//! centroid-by-segment response matrix.

use crate::camera::{self, CameraResponse, NoiseModel, SensorFrame};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::render::{self, BlurKernel, EnergyGrid, SegmentCoverage, TrailLayout};

#[derive(Debug, Clone)]
pub struct TrailModel {
    pub config: SystemConfig,
    pub layout: TrailLayout,
    pub coverage: SegmentCoverage,
    pub kernel: BlurKernel,
    pub gain: Grid,
    pub response: CameraResponse,
    pub photon_energy: f64,
    pub exposure: f64,
    /// `matrix[j * J + s]`: received energy at centroid `j` when only
    /// segment `s` is on.
    matrix: Vec<f64>,
}

impl TrailModel {
    /// Builds the model for LED `led` (1-based).
    pub fn build(config: &SystemConfig, led: usize) -> Result<Self> {
        config.validate()?;
        let layout = render::project_geometry(config, led)?;
        let coverage = SegmentCoverage::compute(&layout, config.camera.supersample);
        let kernel = render::gaussian_kernel(config.channel.kernel_size, config.channel.blur_sigma())?;
        let gain = render::gain_field(config, &layout);
        let exposure = config.exposure_time();
        let segments = layout.segments();
        let segment_energy = config.tx.frame_power(1) * exposure;

        let mut matrix = vec![0.0; segments * segments];
        for (j, &(cx, cy)) in layout.centroid_pixels.iter().enumerate() {
            let row = &mut matrix[j * segments..(j + 1) * segments];
            for (a, b, w) in kernel.taps() {
                for (s, frac) in coverage.fractions_at(cx - a, cy - b) {
                    row[s] += w * frac;
                }
            }
            let h = gain.get(cx, cy);
            row.iter_mut().for_each(|v| *v *= h * segment_energy);
        }

        Ok(TrailModel {
            response: CameraResponse::new(&config.camera),
            photon_energy: config.camera.photon_energy(),
            config: config.clone(),
            layout,
            coverage,
            kernel,
            gain,
            exposure,
            matrix,
        })
    }

    /// Model for the scenario LED named in the analysis section.
    pub fn scenario(config: &SystemConfig) -> Result<Self> {
        Self::build(config, config.analysis.led_index)
    }

    pub fn segments(&self) -> usize {
        self.layout.segments()
    }

    pub fn led(&self) -> usize {
        self.layout.led
    }

    /// Received energy at centroid `j` from segment `s` alone.
    #[inline]
    pub fn response(&self, j: usize, s: usize) -> f64 {
        let n = self.segments();
        self.matrix[j * n + s]
    }

    pub fn response_row(&self, j: usize) -> &[f64] {
        let n = self.segments();
        &self.matrix[j * n..(j + 1) * n]
    }

    /// Noise-free received energy at centroid `j` for a bit pattern.
    pub fn centroid_energy(&self, j: usize, bits: &[bool]) -> f64 {
        self.response_row(j)
            .iter()
            .zip(bits)
            .filter(|(_, b)| **b)
            .map(|(r, _)| r)
            .sum()
    }

    /// Noise-free pixel value at centroid `j`.
    pub fn centroid_pixel_value(&self, j: usize, bits: &[bool]) -> f64 {
        self.response.pixel_value(self.centroid_energy(j, bits) / self.photon_energy)
    }

    /// Full-window received energy for a bit pattern, through every stage of
    /// the rendering chain.
    pub fn render_received(&self, bits: &[bool]) -> Result<EnergyGrid> {
        if bits.len() != self.segments() {
            return Err(Error::Precondition(format!(
                "bit vector has {} entries, trail has {} segments",
                bits.len(),
                self.segments()
            )));
        }
        let cfg = &self.config;
        let q = render::accumulate_with_coverage(cfg, &self.coverage, bits, self.exposure)?;
        let p = render::radiometric_distribution(
            &q,
            cfg.camera.luminous_efficacy,
            cfg.camera.luminous_efficiency,
        )?;
        let active = bits.iter().filter(|b| **b).count();
        let l = render::allocate_power(&p, cfg.tx.frame_power(active) * self.exposure)?;
        render::received_power(&l, &self.gain, &self.kernel)
    }

    pub fn capture(&self, bits: &[bool], noise: Option<&NoiseModel>, frame: u64) -> Result<SensorFrame> {
        let r = self.render_received(bits)?;
        let mut f = camera::capture_frame(&r, noise, &self.config.camera, frame);
        f.meta.bits = bits.to_vec();
        f.meta.config_hash = self.config.hash();
        Ok(f)
    }
}
