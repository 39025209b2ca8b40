//! Control-angle selection under a BER target and the resulting throughput.
//!
//! Candidates are the even segment counts `J = 2, 4, ..., J_max`, where
//! `J_max` is the largest even count whose segment arc on the sensor is at
//! least one pixel. Every candidate is evaluated with the adjacent-ISI
//! analytic BER; the search is exhaustive because BER is not guaranteed to be
//! monotone in `J` once pixel-grid resampling is taken into account.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::isi;
use crate::model::TrailModel;
use crate::render;

/// Data rate of a rotating transmitter, one bit per control angle.
pub fn throughput(control_angle: f64, rotations_per_second: f64) -> Result<f64> {
    if !(control_angle > 0.0) || !rotations_per_second.is_finite() || rotations_per_second < 0.0 {
        return Err(Error::Precondition(format!(
            "control angle {control_angle} and rotation rate {rotations_per_second} must be positive"
        )));
    }
    let j = TAU / control_angle;
    let rounded = j.round();
    if rounded < 1.0 || (j - rounded).abs() > 1e-9 * rounded {
        return Err(Error::Precondition(format!(
            "control angle {control_angle} does not divide a full turn (2π/Δθ = {j})"
        )));
    }
    Ok(rotations_per_second * rounded)
}

/// Largest even `J` whose per-segment arc spans at least one pixel.
pub fn max_segments(config: &SystemConfig, led: usize) -> Result<usize> {
    let layout = render::project_geometry(&config.with_segments(2), led)?;
    let j = (TAU * layout.image_radius).floor() as usize;
    Ok(j - j % 2)
}

/// Effective blur scale in pixels: kernel spread and the LED image disk
/// combined in quadrature.
pub fn effective_blur(config: &SystemConfig) -> f64 {
    let cam = &config.camera;
    let footprint = config.tx.led_chip_radius * cam.focal_length / (config.channel.distance * cam.pixel_pitch);
    config.channel.blur_sigma().hypot(footprint)
}

/// One evaluated segment count.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub segments: usize,
    pub control_angle: f64,
    pub ber: f64,
    pub throughput: f64,
    pub feasible: bool,
}

/// Analytic BER for every even `J` up to [`max_segments`], ascending in `J`.
pub fn candidates(config: &SystemConfig, led: usize, distance: f64, target_ber: f64) -> Result<Vec<Candidate>> {
    if !(target_ber > 0.0 && target_ber < 0.5) {
        return Err(Error::invalid("target_ber", "must lie in (0, 0.5)"));
    }
    let base = config.with_distance(distance);
    base.validate()?;
    let j_max = max_segments(&base, led)?;
    let rps = base.tx.rotations_per_second;
    (1..=j_max / 2)
        .into_par_iter()
        .map(|a| {
            let segments = 2 * a;
            let model = TrailModel::build(&base.with_segments(segments), led)?;
            let ber = isi::analytic_ber(&model)?.ber;
            Ok(Candidate {
                segments,
                control_angle: TAU / segments as f64,
                ber,
                throughput: rps * segments as f64,
                feasible: ber <= target_ber,
            })
        })
        .collect()
}

/// Segment counts that are infeasible although a larger count is feasible.
pub fn monotonicity_violations(candidates: &[Candidate]) -> Vec<usize> {
    let Some(largest) = candidates.iter().rev().find(|c| c.feasible) else {
        return Vec::new();
    };
    candidates
        .iter()
        .filter(|c| c.segments < largest.segments && !c.feasible)
        .map(|c| c.segments)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    /// 1-based LED index.
    pub led: usize,
    /// Rotation radius, m.
    pub radius: f64,
    pub distance: f64,
    /// Chosen `J`; when infeasible, the `J` with the lowest BER.
    pub segments: usize,
    pub control_angle: f64,
    pub ber: f64,
    /// Bits per second at the chosen `J`; zero when infeasible.
    pub throughput: f64,
    pub feasible: bool,
    /// `Δθ·r/σ_eff` with the image radius and blur scale in pixels.
    pub scaling_diag: f64,
}

fn design_point(config: &SystemConfig, led: usize, distance: f64, candidates: &[Candidate]) -> Result<DesignPoint> {
    let chosen = match candidates.iter().rev().find(|c| c.feasible) {
        Some(c) => c,
        None => candidates
            .iter()
            .min_by(|a, b| a.ber.total_cmp(&b.ber))
            .ok_or_else(|| Error::Precondition(format!("LED {led} has no admissible segment count")))?,
    };
    let cfg = config.with_distance(distance);
    let layout = render::project_geometry(&cfg.with_segments(2), led)?;
    Ok(DesignPoint {
        led,
        radius: cfg.rotation_radius(led)?,
        distance,
        segments: chosen.segments,
        control_angle: chosen.control_angle,
        ber: chosen.ber,
        throughput: if chosen.feasible { chosen.throughput } else { 0.0 },
        feasible: chosen.feasible,
        scaling_diag: chosen.control_angle * layout.image_radius / effective_blur(&cfg),
    })
}

/// Largest even `J` meeting `target_ber` for one LED at one distance.
pub fn optimal_control_angle(config: &SystemConfig, led: usize, distance: f64, target_ber: f64) -> Result<DesignPoint> {
    let cands = candidates(config, led, distance, target_ber)?;
    let violations = monotonicity_violations(&cands);
    if !violations.is_empty() {
        log::warn!("LED {led} at {distance} m: infeasible below the chosen J at J = {violations:?}");
    }
    design_point(config, led, distance, &cands)
}

/// Design points for every `(led, distance)` pair, sorted by LED then
/// distance.
pub fn design_sweep(
    config: &SystemConfig,
    distances: &[f64],
    leds: &[usize],
    target_ber: f64,
) -> Result<Vec<DesignPoint>> {
    let mut grid: Vec<(usize, f64)> = leds
        .iter()
        .flat_map(|&l| distances.iter().map(move |&d| (l, d)))
        .collect();
    grid.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    grid.dedup();
    grid.into_iter()
        .map(|(led, d)| optimal_control_angle(config, led, d, target_ber))
        .collect()
}

/// Coefficient of variation of the scaling diagnostic over feasible points.
pub fn scaling_spread(points: &[DesignPoint]) -> Option<f64> {
    let v: Vec<f64> = points.iter().filter(|p| p.feasible).map(|p| p.scaling_diag).collect();
    if v.len() < 2 {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(var.sqrt() / mean)
}
