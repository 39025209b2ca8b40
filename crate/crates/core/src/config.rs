//! Scenario parameters.
//!
//! A [`SystemConfig`] is read from a flat `key = value` text file (SI units,
//! `#` comments). Every key is optional; omitted keys take the simulation
//! defaults listed in [`KEYS`]. Angles accept plain radians or the forms
//! `pi`, `pi/9`, `2*pi/9` and `15deg`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const ANGLE_TOL: f64 = 1e-9;

/// Recognized keys, in file order.
pub const KEYS: &[&str] = &[
    "led_chip_radius",
    "rotation_radii",
    "control_angle",
    "segments_per_rotation",
    "total_power",
    "rotations_per_second",
    "distance",
    "path_loss_exponent",
    "filter_transmittance",
    "fov",
    "lens_gain",
    "lambertian_order",
    "blur_sigma",
    "blur_sigma_near",
    "blur_sigma_far",
    "blur_distance_near",
    "blur_distance_far",
    "kernel_size",
    "pupil_area",
    "resolution_x",
    "resolution_y",
    "pixel_pitch",
    "focal_length",
    "quantum_efficiency",
    "v_ref",
    "v_a_ref",
    "sense_node_gain",
    "source_follower_gain",
    "adc_gain",
    "cds_gain",
    "raw_max",
    "gamma",
    "wavelength",
    "luminous_efficacy",
    "luminous_efficiency",
    "sigma_n_pixel",
    "sigma_n_power",
    "normalize_adc",
    "exposure_time",
    "supersample",
    "prior_one",
    "neighbor_prior_00",
    "neighbor_prior_01",
    "neighbor_prior_10",
    "neighbor_prior_11",
    "target_ber",
    "isi_neighborhood",
    "led_index",
    "variance_mode",
    "leakage_tolerance",
    "flat_h",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TxConfig {
    /// LED chip radius, m.
    pub led_chip_radius: f64,
    /// Rotation radius of each LED, m, innermost first.
    pub rotation_radii: Vec<f64>,
    /// Bits per rotation `J`; the control angle is `2π/J`.
    pub segments_per_rotation: usize,
    /// Emitted optical power under constant illumination, W.
    pub total_power: f64,
    pub rotations_per_second: f64,
}

impl TxConfig {
    pub fn control_angle(&self) -> f64 {
        2.0 * PI / self.segments_per_rotation as f64
    }

    /// Frame-level emitted power when `active` of the `J` segments are on.
    pub fn frame_power(&self, active: usize) -> f64 {
        active as f64 * self.total_power / self.segments_per_rotation as f64
    }
}

/// Defocus blur scale as a function of link distance.
#[derive(Debug, Clone, PartialEq)]
pub enum BlurModel {
    Fixed(f64),
    /// Linear in distance through two anchor points, floored at 1e-3 px.
    Linear {
        near_distance: f64,
        near_sigma: f64,
        far_distance: f64,
        far_sigma: f64,
    },
}

impl BlurModel {
    pub fn sigma_at(&self, distance: f64) -> f64 {
        match *self {
            BlurModel::Fixed(s) => s,
            BlurModel::Linear {
                near_distance,
                near_sigma,
                far_distance,
                far_sigma,
            } => {
                let t = (distance - near_distance) / (far_distance - near_distance);
                (near_sigma + t * (far_sigma - near_sigma)).max(1e-3)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub distance: f64,
    pub path_loss_exponent: f64,
    pub filter_transmittance: f64,
    /// Lens half field of view, rad.
    pub fov: f64,
    pub lens_gain: f64,
    pub lambertian_order: f64,
    pub blur: BlurModel,
    pub kernel_size: usize,
    /// Entrance pupil area, m². `None` derives it from the focal length at f/2.8.
    pub pupil_area: Option<f64>,
}

impl ChannelConfig {
    pub fn blur_sigma(&self) -> f64 {
        self.blur.sigma_at(self.distance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    pub pixel_pitch: f64,
    pub focal_length: f64,
    pub quantum_efficiency: f64,
    pub v_ref: f64,
    pub v_a_ref: f64,
    /// Sense node gain `A_n`, V per electron.
    pub sense_node_gain: f64,
    pub source_follower_gain: f64,
    pub adc_gain: f64,
    pub cds_gain: f64,
    pub raw_max: f64,
    pub gamma: f64,
    pub wavelength: f64,
    /// Maximum luminous efficacy `K`, lm/W.
    pub luminous_efficacy: f64,
    /// Relative luminous efficiency `V(λ)`.
    pub luminous_efficiency: f64,
    /// Pixel-domain noise standard deviation on the 0–255 scale.
    pub sigma_n_pixel: f64,
    /// Energy-domain noise standard deviation, J. Derived from
    /// `sigma_n_pixel` at the operating point when absent.
    pub sigma_n_power: Option<f64>,
    /// Scale the ADC gain by `raw_max / v_a_ref` so `v_a_ref` maps to full scale.
    pub normalize_adc: bool,
    /// Integration time, s. `None` means one rotation period.
    pub exposure_time: Option<f64>,
    /// Sub-pixel samples per axis for trail coverage integration.
    pub supersample: usize,
}

impl CameraConfig {
    /// Photon energy `h·c/λ`, J.
    pub fn photon_energy(&self) -> f64 {
        PLANCK * SPEED_OF_LIGHT / self.wavelength
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMode {
    /// One effective pixel-domain variance per scenario.
    Homoscedastic,
    /// Variance follows the local camera slope of each neighbor pattern.
    PerTriplet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub prior_one: f64,
    /// Joint prior of `(b_{j-1}, b_{j+1})`, indexed `[b_{j-1}][b_{j+1}]`.
    /// `None` means independent bits with marginal `prior_one`.
    pub neighbor_priors: Option<[[f64; 2]; 2]>,
    pub target_ber: f64,
    pub isi_neighborhood: usize,
    /// LED used by single-LED scenarios, 1-based (1 = innermost).
    pub led_index: usize,
    pub variance_mode: VarianceMode,
    pub leakage_tolerance: f64,
    /// Evaluate the channel gain once at the trail center.
    pub flat_h: bool,
}

impl AnalysisConfig {
    pub fn priors(&self) -> [f64; 2] {
        [1.0 - self.prior_one, self.prior_one]
    }

    pub fn neighbor_prior_table(&self) -> [[f64; 2]; 2] {
        self.neighbor_priors.unwrap_or_else(|| {
            let p = self.priors();
            [[p[0] * p[0], p[0] * p[1]], [p[1] * p[0], p[1] * p[1]]]
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub tx: TxConfig,
    pub channel: ChannelConfig,
    pub camera: CameraConfig,
    pub analysis: AnalysisConfig,
}

/// Quantities derived from a validated configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedSet {
    pub segments: usize,
    pub control_angle: f64,
    pub photon_energy: f64,
    pub exposure_time: f64,
    pub pupil_area: f64,
    pub blur_sigma: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            tx: TxConfig {
                led_chip_radius: 2.0e-3,
                rotation_radii: (0..12).map(|i| 17.5e-3 + 7.0e-3 * i as f64).collect(),
                segments_per_rotation: 18,
                total_power: 0.2,
                rotations_per_second: 3.0,
            },
            channel: ChannelConfig {
                distance: 52.0,
                path_loss_exponent: 2.0,
                filter_transmittance: 0.9,
                fov: 15f64.to_radians(),
                lens_gain: 1.0,
                lambertian_order: 1.0,
                blur: BlurModel::Linear {
                    near_distance: 46.0,
                    near_sigma: 1.0,
                    far_distance: 62.0,
                    far_sigma: 1.5,
                },
                kernel_size: 5,
                pupil_area: None,
            },
            camera: CameraConfig {
                width: 4000,
                height: 3000,
                pixel_pitch: 1.85e-6,
                focal_length: 30e-3,
                quantum_efficiency: 0.5,
                v_ref: 3.1,
                v_a_ref: 2.5,
                sense_node_gain: 2.8e-4,
                source_follower_gain: 1.0,
                adc_gain: 1.0,
                cds_gain: 1.0,
                raw_max: 4095.0,
                gamma: 2.2,
                wavelength: 620e-9,
                luminous_efficacy: 683.0,
                luminous_efficiency: 0.381,
                sigma_n_pixel: 4.065,
                sigma_n_power: None,
                normalize_adc: false,
                exposure_time: None,
                supersample: 8,
            },
            analysis: AnalysisConfig {
                prior_one: 0.5,
                neighbor_priors: None,
                target_ber: 1e-4,
                isi_neighborhood: 1,
                led_index: 2,
                variance_mode: VarianceMode::Homoscedastic,
                leakage_tolerance: 0.1,
                flat_h: false,
            },
        }
    }
}

impl SystemConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses config text, applies defaults for omitted keys and validates.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SystemConfig::default();
        let mut control_angle: Option<(usize, f64)> = None;
        let mut explicit_segments: Option<usize> = None;
        let mut blur_fixed: Option<f64> = None;
        let mut blur_linear = match cfg.channel.blur {
            BlurModel::Linear {
                near_distance,
                near_sigma,
                far_distance,
                far_sigma,
            } => [near_distance, near_sigma, far_distance, far_sigma],
            BlurModel::Fixed(_) => unreachable!(),
        };
        let mut nb: [Option<f64>; 4] = [None; 4];
        let mut seen: Vec<&str> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let known = KEYS.iter().find(|k| **k == key).ok_or_else(|| Error::Parse {
                line,
                msg: format!("unknown key `{key}`"),
            })?;
            if seen.contains(known) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            seen.push(known);

            let real = || parse_real(value).map_err(|msg| Error::Parse { line, msg: format!("{key}: {msg}") });
            let count = || parse_count(value).map_err(|msg| Error::Parse { line, msg: format!("{key}: {msg}") });
            let flag = || parse_bool(value).map_err(|msg| Error::Parse { line, msg: format!("{key}: {msg}") });

            match key {
                "led_chip_radius" => cfg.tx.led_chip_radius = real()?,
                "rotation_radii" => {
                    cfg.tx.rotation_radii = value
                        .split(',')
                        .map(|v| parse_real(v.trim()))
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|msg| Error::Parse { line, msg: format!("{key}: {msg}") })?
                }
                "control_angle" => {
                    let angle = real()?;
                    if !(angle > 0.0) {
                        return Err(Error::invalid(key, "must be positive"));
                    }
                    let j = (2.0 * PI / angle).round();
                    if j < 1.0 || ((j * angle - 2.0 * PI) / (2.0 * PI)).abs() > ANGLE_TOL {
                        return Err(Error::invalid(key, format!("{angle} does not divide 2π into whole segments")));
                    }
                    control_angle = Some((j as usize, angle));
                }
                "segments_per_rotation" => explicit_segments = Some(count()?),
                "total_power" => cfg.tx.total_power = real()?,
                "rotations_per_second" => cfg.tx.rotations_per_second = real()?,
                "distance" => cfg.channel.distance = real()?,
                "path_loss_exponent" => cfg.channel.path_loss_exponent = real()?,
                "filter_transmittance" => cfg.channel.filter_transmittance = real()?,
                "fov" => cfg.channel.fov = real()?,
                "lens_gain" => cfg.channel.lens_gain = real()?,
                "lambertian_order" => cfg.channel.lambertian_order = real()?,
                "blur_sigma" => blur_fixed = Some(real()?),
                "blur_distance_near" => blur_linear[0] = real()?,
                "blur_sigma_near" => blur_linear[1] = real()?,
                "blur_distance_far" => blur_linear[2] = real()?,
                "blur_sigma_far" => blur_linear[3] = real()?,
                "kernel_size" => cfg.channel.kernel_size = count()?,
                "pupil_area" => cfg.channel.pupil_area = Some(real()?),
                "resolution_x" => cfg.camera.width = count()?,
                "resolution_y" => cfg.camera.height = count()?,
                "pixel_pitch" => cfg.camera.pixel_pitch = real()?,
                "focal_length" => cfg.camera.focal_length = real()?,
                "quantum_efficiency" => cfg.camera.quantum_efficiency = real()?,
                "v_ref" => cfg.camera.v_ref = real()?,
                "v_a_ref" => cfg.camera.v_a_ref = real()?,
                "sense_node_gain" => cfg.camera.sense_node_gain = real()?,
                "source_follower_gain" => cfg.camera.source_follower_gain = real()?,
                "adc_gain" => cfg.camera.adc_gain = real()?,
                "cds_gain" => cfg.camera.cds_gain = real()?,
                "raw_max" => cfg.camera.raw_max = real()?,
                "gamma" => cfg.camera.gamma = real()?,
                "wavelength" => cfg.camera.wavelength = real()?,
                "luminous_efficacy" => cfg.camera.luminous_efficacy = real()?,
                "luminous_efficiency" => cfg.camera.luminous_efficiency = real()?,
                "sigma_n_pixel" => cfg.camera.sigma_n_pixel = real()?,
                "sigma_n_power" => cfg.camera.sigma_n_power = Some(real()?),
                "normalize_adc" => cfg.camera.normalize_adc = flag()?,
                "exposure_time" => cfg.camera.exposure_time = Some(real()?),
                "supersample" => cfg.camera.supersample = count()?,
                "prior_one" => cfg.analysis.prior_one = real()?,
                "neighbor_prior_00" => nb[0] = Some(real()?),
                "neighbor_prior_01" => nb[1] = Some(real()?),
                "neighbor_prior_10" => nb[2] = Some(real()?),
                "neighbor_prior_11" => nb[3] = Some(real()?),
                "target_ber" => cfg.analysis.target_ber = real()?,
                "isi_neighborhood" => cfg.analysis.isi_neighborhood = count()?,
                "led_index" => cfg.analysis.led_index = count()?,
                "variance_mode" => {
                    cfg.analysis.variance_mode = match value {
                        "homoscedastic" => VarianceMode::Homoscedastic,
                        "per_triplet" => VarianceMode::PerTriplet,
                        other => {
                            return Err(Error::Parse {
                                line,
                                msg: format!("variance_mode: expected homoscedastic|per_triplet, got `{other}`"),
                            })
                        }
                    }
                }
                "leakage_tolerance" => cfg.analysis.leakage_tolerance = real()?,
                "flat_h" => cfg.analysis.flat_h = flag()?,
                _ => unreachable!("key list and match arms out of sync: {key}"),
            }
        }

        match (control_angle, explicit_segments) {
            (Some((j, _)), Some(s)) if j != s => {
                return Err(Error::invalid(
                    "control_angle",
                    format!("implies J = {j} but segments_per_rotation = {s}"),
                ))
            }
            (Some((j, _)), _) => cfg.tx.segments_per_rotation = j,
            (None, Some(s)) => cfg.tx.segments_per_rotation = s,
            (None, None) => {}
        }

        cfg.channel.blur = match blur_fixed {
            Some(s) => BlurModel::Fixed(s),
            None => BlurModel::Linear {
                near_distance: blur_linear[0],
                near_sigma: blur_linear[1],
                far_distance: blur_linear[2],
                far_sigma: blur_linear[3],
            },
        };

        match nb {
            [None, None, None, None] => {}
            [Some(a), Some(b), Some(c), Some(d)] => cfg.analysis.neighbor_priors = Some([[a, b], [c, d]]),
            _ => return Err(Error::invalid("neighbor_prior_*", "all four entries must be given together")),
        }

        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every parameter invariant, naming the first offending key.
    pub fn validate(&self) -> Result<()> {
        fn positive(key: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(key, format!("must be positive and finite, got {v}")))
            }
        }
        fn unit(key: &str, v: f64, lo_open: bool) -> Result<()> {
            let ok = if lo_open { v > 0.0 && v <= 1.0 } else { (0.0..=1.0).contains(&v) };
            if ok {
                Ok(())
            } else {
                let range = if lo_open { "(0, 1]" } else { "[0, 1]" };
                Err(Error::invalid(key, format!("must lie in {range}, got {v}")))
            }
        }

        let tx = &self.tx;
        positive("led_chip_radius", tx.led_chip_radius)?;
        if tx.rotation_radii.is_empty() {
            return Err(Error::invalid("rotation_radii", "at least one LED required"));
        }
        for (i, r) in tx.rotation_radii.iter().enumerate() {
            positive("rotation_radii", *r)?;
            if i > 0 && *r <= tx.rotation_radii[i - 1] {
                return Err(Error::invalid("rotation_radii", "must be strictly increasing"));
            }
        }
        if tx.segments_per_rotation < 1 {
            return Err(Error::invalid("segments_per_rotation", "must be at least 1"));
        }
        positive("total_power", tx.total_power)?;
        positive("rotations_per_second", tx.rotations_per_second)?;

        let ch = &self.channel;
        positive("distance", ch.distance)?;
        positive("path_loss_exponent", ch.path_loss_exponent)?;
        unit("filter_transmittance", ch.filter_transmittance, false)?;
        positive("fov", ch.fov)?;
        positive("lens_gain", ch.lens_gain)?;
        if !(ch.lambertian_order.is_finite() && ch.lambertian_order >= 0.0) {
            return Err(Error::invalid("lambertian_order", "must be nonnegative"));
        }
        match ch.blur {
            BlurModel::Fixed(s) => positive("blur_sigma", s)?,
            BlurModel::Linear {
                near_distance,
                near_sigma,
                far_distance,
                far_sigma,
            } => {
                positive("blur_sigma_near", near_sigma)?;
                positive("blur_sigma_far", far_sigma)?;
                if !(far_distance > near_distance) {
                    return Err(Error::invalid("blur_distance_far", "must exceed blur_distance_near"));
                }
            }
        }
        if ch.kernel_size % 2 == 0 {
            return Err(Error::invalid("kernel_size", "kernel_size must be odd"));
        }
        if let Some(a) = ch.pupil_area {
            positive("pupil_area", a)?;
        }

        let cam = &self.camera;
        if cam.width == 0 || cam.height == 0 {
            return Err(Error::invalid("resolution_x", "resolution must be nonzero"));
        }
        positive("pixel_pitch", cam.pixel_pitch)?;
        positive("focal_length", cam.focal_length)?;
        unit("quantum_efficiency", cam.quantum_efficiency, true)?;
        positive("v_ref", cam.v_ref)?;
        positive("v_a_ref", cam.v_a_ref)?;
        positive("sense_node_gain", cam.sense_node_gain)?;
        positive("source_follower_gain", cam.source_follower_gain)?;
        positive("adc_gain", cam.adc_gain)?;
        positive("cds_gain", cam.cds_gain)?;
        if !(cam.raw_max >= 1.0) {
            return Err(Error::invalid("raw_max", "must be at least 1"));
        }
        positive("gamma", cam.gamma)?;
        positive("wavelength", cam.wavelength)?;
        positive("luminous_efficacy", cam.luminous_efficacy)?;
        unit("luminous_efficiency", cam.luminous_efficiency, true)?;
        if !(cam.sigma_n_pixel.is_finite() && cam.sigma_n_pixel >= 0.0) {
            return Err(Error::invalid("sigma_n_pixel", "must be nonnegative"));
        }
        if let Some(s) = cam.sigma_n_power {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::invalid("sigma_n_power", "must be nonnegative"));
            }
        }
        if let Some(t) = cam.exposure_time {
            positive("exposure_time", t)?;
        }
        if cam.supersample == 0 {
            return Err(Error::invalid("supersample", "must be at least 1"));
        }

        let an = &self.analysis;
        unit("prior_one", an.prior_one, false)?;
        if let Some(nb) = an.neighbor_priors {
            let flat = [nb[0][0], nb[0][1], nb[1][0], nb[1][1]];
            if flat.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid("neighbor_prior_*", "entries must lie in [0, 1]"));
            }
            let sum: f64 = flat.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("neighbor_prior_*", format!("must sum to 1, got {sum}")));
            }
        }
        if !(an.target_ber > 0.0 && an.target_ber < 0.5) {
            return Err(Error::invalid("target_ber", "must lie in (0, 0.5)"));
        }
        if an.led_index == 0 || an.led_index > tx.rotation_radii.len() {
            return Err(Error::invalid(
                "led_index",
                format!("must be in 1..={}", tx.rotation_radii.len()),
            ));
        }
        if !(an.leakage_tolerance >= 0.0) {
            return Err(Error::invalid("leakage_tolerance", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn derived(&self) -> DerivedSet {
        DerivedSet {
            segments: self.tx.segments_per_rotation,
            control_angle: self.tx.control_angle(),
            photon_energy: self.camera.photon_energy(),
            exposure_time: self.exposure_time(),
            pupil_area: self.pupil_area(),
            blur_sigma: self.channel.blur_sigma(),
        }
    }

    pub fn exposure_time(&self) -> f64 {
        self.camera
            .exposure_time
            .unwrap_or(1.0 / self.tx.rotations_per_second)
    }

    /// Entrance pupil area; defaults to an f/2.8 aperture, `π(f/5.6)²`.
    pub fn pupil_area(&self) -> f64 {
        self.channel
            .pupil_area
            .unwrap_or_else(|| PI * (self.camera.focal_length / 5.6).powi(2))
    }

    pub fn led_count(&self) -> usize {
        self.tx.rotation_radii.len()
    }

    /// Rotation radius of a 1-based LED index.
    pub fn rotation_radius(&self, led: usize) -> Result<f64> {
        led.checked_sub(1)
            .and_then(|i| self.tx.rotation_radii.get(i).copied())
            .ok_or_else(|| Error::invalid("led_index", format!("no LED {led}")))
    }

    pub fn with_distance(&self, distance: f64) -> Self {
        let mut c = self.clone();
        c.channel.distance = distance;
        c
    }

    pub fn with_segments(&self, segments: usize) -> Self {
        let mut c = self.clone();
        c.tx.segments_per_rotation = segments;
        c
    }

    pub fn with_led(&self, led: usize) -> Self {
        let mut c = self.clone();
        c.analysis.led_index = led;
        c
    }

    /// Writes the config back as `key = value` text that [`SystemConfig::parse`]
    /// reads to an equal value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let tx = &self.tx;
        put("led_chip_radius", real(tx.led_chip_radius));
        put(
            "rotation_radii",
            tx.rotation_radii.iter().map(|r| real(*r)).collect::<Vec<_>>().join(", "),
        );
        put("segments_per_rotation", tx.segments_per_rotation.to_string());
        put("total_power", real(tx.total_power));
        put("rotations_per_second", real(tx.rotations_per_second));

        let ch = &self.channel;
        put("distance", real(ch.distance));
        put("path_loss_exponent", real(ch.path_loss_exponent));
        put("filter_transmittance", real(ch.filter_transmittance));
        put("fov", real(ch.fov));
        put("lens_gain", real(ch.lens_gain));
        put("lambertian_order", real(ch.lambertian_order));
        match ch.blur {
            BlurModel::Fixed(sg) => put("blur_sigma", real(sg)),
            BlurModel::Linear {
                near_distance,
                near_sigma,
                far_distance,
                far_sigma,
            } => {
                put("blur_distance_near", real(near_distance));
                put("blur_sigma_near", real(near_sigma));
                put("blur_distance_far", real(far_distance));
                put("blur_sigma_far", real(far_sigma));
            }
        }
        put("kernel_size", ch.kernel_size.to_string());
        if let Some(a) = ch.pupil_area {
            put("pupil_area", real(a));
        }

        let cam = &self.camera;
        put("resolution_x", cam.width.to_string());
        put("resolution_y", cam.height.to_string());
        put("pixel_pitch", real(cam.pixel_pitch));
        put("focal_length", real(cam.focal_length));
        put("quantum_efficiency", real(cam.quantum_efficiency));
        put("v_ref", real(cam.v_ref));
        put("v_a_ref", real(cam.v_a_ref));
        put("sense_node_gain", real(cam.sense_node_gain));
        put("source_follower_gain", real(cam.source_follower_gain));
        put("adc_gain", real(cam.adc_gain));
        put("cds_gain", real(cam.cds_gain));
        put("raw_max", real(cam.raw_max));
        put("gamma", real(cam.gamma));
        put("wavelength", real(cam.wavelength));
        put("luminous_efficacy", real(cam.luminous_efficacy));
        put("luminous_efficiency", real(cam.luminous_efficiency));
        put("sigma_n_pixel", real(cam.sigma_n_pixel));
        if let Some(v) = cam.sigma_n_power {
            put("sigma_n_power", real(v));
        }
        put("normalize_adc", cam.normalize_adc.to_string());
        if let Some(t) = cam.exposure_time {
            put("exposure_time", real(t));
        }
        put("supersample", cam.supersample.to_string());

        let an = &self.analysis;
        put("prior_one", real(an.prior_one));
        if let Some(nb) = an.neighbor_priors {
            put("neighbor_prior_00", real(nb[0][0]));
            put("neighbor_prior_01", real(nb[0][1]));
            put("neighbor_prior_10", real(nb[1][0]));
            put("neighbor_prior_11", real(nb[1][1]));
        }
        put("target_ber", real(an.target_ber));
        put("isi_neighborhood", an.isi_neighborhood.to_string());
        put("led_index", an.led_index.to_string());
        put(
            "variance_mode",
            match an.variance_mode {
                VarianceMode::Homoscedastic => "homoscedastic",
                VarianceMode::PerTriplet => "per_triplet",
            }
            .to_string(),
        );
        put("leakage_tolerance", real(an.leakage_tolerance));
        put("flat_h", an.flat_h.to_string());
        s
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn real(v: f64) -> String {
    // Debug formatting of f64 is shortest round-trip.
    format!("{v:?}")
}

/// Parses a real number or an angle expression (`pi/9`, `2*pi/9`, `15deg`).
pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if let Some(deg) = s.strip_suffix("deg") {
        return parse_real(deg).map(f64::to_radians);
    }
    if s.contains("pi") {
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), Some(d.trim())),
            None => (s, None),
        };
        let factor = match num {
            "pi" => 1.0,
            other => {
                let k = other
                    .strip_suffix("pi")
                    .map(|k| k.trim().trim_end_matches('*').trim())
                    .ok_or_else(|| format!("cannot parse `{s}`"))?;
                k.parse::<f64>().map_err(|_| format!("cannot parse `{s}`"))?
            }
        };
        let den = match den {
            Some(d) => d.parse::<f64>().map_err(|_| format!("cannot parse `{s}`"))?,
            None => 1.0,
        };
        return Ok(factor * PI / den);
    }
    let v = s.parse::<f64>().map_err(|_| format!("cannot parse `{s}` as a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    s.parse::<usize>()
        .map_err(|_| format!("expected a nonnegative integer, got `{s}`"))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected true/false, got `{s}`")),
    }
}
