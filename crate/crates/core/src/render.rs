//! Light-trail rendering: pinhole geometry, dwell-time energy accumulation,
//! radiometric conversion, power allocation, line-of-sight gain and defocus
//! blur.
//!
//! Pixel `(x, y)` is centered at integer sensor coordinates and covers
//! `[x-½, x+½) × [y-½, y+½)`. The optical axis meets the sensor at its
//! geometric center. Segment `j` spans rotation angles `[jΔθ, (j+1)Δθ)`
//! measured with `atan2(y - cy, x - cx)`.

use std::f64::consts::{PI, TAU};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridRole {
    /// Luminous energy accumulated along the trail, lm·s.
    BlinkEnergy,
    /// Radiometric distribution, J.
    RadiometricDistribution,
    /// Allocated incident energy, J.
    AllocatedEnergy,
    /// Received energy after channel gain and blur, J.
    Received,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrid {
    pub role: GridRole,
    pub grid: Grid,
}

/// Sensor-space placement of one LED's trail.
#[derive(Debug, Clone, PartialEq)]
pub struct TrailLayout {
    /// 1-based LED index.
    pub led: usize,
    pub center: (f64, f64),
    pub image_radius: f64,
    pub footprint_radius: f64,
    pub control_angle: f64,
    /// Continuous segment centroids at angles `(j+½)Δθ`.
    pub centroids: Vec<(f64, f64)>,
    /// Nearest pixel to each centroid, ties toward the smaller index.
    pub centroid_pixels: Vec<(i64, i64)>,
    /// Window `(x0, y0, width, height)` holding the blurred trail.
    pub window: (i64, i64, usize, usize),
}

impl TrailLayout {
    pub fn segments(&self) -> usize {
        self.centroids.len()
    }

    pub fn blank_grid(&self) -> Grid {
        let (x0, y0, w, h) = self.window;
        Grid::zeros(x0, y0, w, h)
    }
}

/// Nearest integer with halves rounded down.
pub fn nearest_pixel(v: f64) -> i64 {
    (v - 0.5).ceil() as i64
}

/// Sensor-plane principal point.
pub fn sensor_center(config: &SystemConfig) -> (f64, f64) {
    (
        (config.camera.width as f64 - 1.0) / 2.0,
        (config.camera.height as f64 - 1.0) / 2.0,
    )
}

/// Projects the circular trail of LED `led` (1-based) onto the sensor.
pub fn project_geometry(config: &SystemConfig, led: usize) -> Result<TrailLayout> {
    let r = config.rotation_radius(led)?;
    let cam = &config.camera;
    let d = config.channel.distance;
    let scale = cam.focal_length / (d * cam.pixel_pitch);
    let image_radius = r * scale;
    let footprint_radius = config.tx.led_chip_radius * scale;
    let segments = config.tx.segments_per_rotation;
    let dtheta = config.tx.control_angle();
    let center = sensor_center(config);

    let centroids: Vec<(f64, f64)> = (0..segments)
        .map(|j| {
            let a = (j as f64 + 0.5) * dtheta;
            (center.0 + image_radius * a.cos(), center.1 + image_radius * a.sin())
        })
        .collect();
    let centroid_pixels = centroids
        .iter()
        .map(|&(x, y)| (nearest_pixel(x), nearest_pixel(y)))
        .collect();

    let half_kernel = (config.channel.kernel_size / 2) as f64;
    let reach = image_radius + footprint_radius + half_kernel + 2.0;
    let x0 = (center.0 - reach).floor() as i64;
    let y0 = (center.1 - reach).floor() as i64;
    let x1 = (center.0 + reach).ceil() as i64;
    let y1 = (center.1 + reach).ceil() as i64;
    if x0 < 0 || y0 < 0 || x1 >= cam.width as i64 || y1 >= cam.height as i64 {
        return Err(Error::OutOfBounds { led });
    }

    Ok(TrailLayout {
        led,
        center,
        image_radius,
        footprint_radius,
        control_angle: dtheta,
        centroids,
        centroid_pixels,
        window: (x0, y0, (x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize),
    })
}

/// Per-pixel dwell weights of every segment of a trail.
///
/// The LED disk moves at constant angular velocity, so the time it covers a
/// point is proportional to the rotation angle over which the point lies
/// inside the disk. That angle is integrated exactly per sub-pixel sample.
#[derive(Debug, Clone)]
pub struct SegmentCoverage {
    segments: usize,
    template: Grid,
    cells: Vec<Vec<(u32, f64)>>,
    totals: Vec<f64>,
}

impl SegmentCoverage {
    pub fn compute(layout: &TrailLayout, supersample: usize) -> Self {
        let segments = layout.segments();
        let dtheta = layout.control_angle;
        let template = layout.blank_grid();
        let ring = layout.image_radius;
        let rf = layout.footprint_radius;
        let (cx, cy) = layout.center;
        let ss = supersample.max(1);
        let sub_area = 1.0 / (ss * ss) as f64;

        let mut cells: Vec<Vec<(u32, f64)>> = vec![Vec::new(); template.len()];
        let mut totals = vec![0.0; segments];
        let mut local = vec![0.0; segments];
        let mut touched: Vec<usize> = Vec::new();

        for (idx, cell) in cells.iter_mut().enumerate() {
            let (px, py) = template.coords(idx);
            let dcx = px as f64 - cx;
            let dcy = py as f64 - cy;
            if (dcx.hypot(dcy) - ring).abs() > rf + 0.75 {
                continue;
            }
            for v in 0..ss {
                let sy = dcy - 0.5 + (v as f64 + 0.5) / ss as f64;
                for u in 0..ss {
                    let sx = dcx - 0.5 + (u as f64 + 0.5) / ss as f64;
                    let rho = sx.hypot(sy);
                    let Some((start, len)) = covered_arc(rho, sy.atan2(sx), ring, rf) else {
                        continue;
                    };
                    split_into_segments(start, len, dtheta, segments, |seg, w| {
                        if local[seg] == 0.0 {
                            touched.push(seg);
                        }
                        local[seg] += w * sub_area;
                    });
                }
            }
            touched.sort_unstable();
            for &seg in &touched {
                cell.push((seg as u32, local[seg]));
                totals[seg] += local[seg];
                local[seg] = 0.0;
            }
            touched.clear();
        }

        SegmentCoverage {
            segments,
            template,
            cells,
            totals,
        }
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    /// Total dwell weight of a segment.
    pub fn total(&self, seg: usize) -> f64 {
        self.totals[seg]
    }

    /// Dwell weight of segment `seg` at sensor pixel `(x, y)`, normalized so
    /// each segment sums to one.
    pub fn fraction(&self, x: i64, y: i64, seg: usize) -> f64 {
        let Some(idx) = self.template.index(x, y) else {
            return 0.0;
        };
        self.cells[idx]
            .iter()
            .find(|(s, _)| *s as usize == seg)
            .map_or(0.0, |(_, w)| w / self.totals[seg])
    }

    /// All `(segment, normalized fraction)` pairs at a pixel.
    pub fn fractions_at(&self, x: i64, y: i64) -> impl Iterator<Item = (usize, f64)> + '_ {
        let cell = self.template.index(x, y).map(|i| &self.cells[i]);
        cell.into_iter()
            .flatten()
            .map(move |&(s, w)| (s as usize, w / self.totals[s as usize]))
    }

    pub fn template(&self) -> &Grid {
        &self.template
    }

    /// Weighted sum of normalized segment maps.
    pub fn combine(&self, weights: &[f64]) -> Grid {
        let mut g = self.template.same_extent();
        for (out, cell) in g.data.iter_mut().zip(&self.cells) {
            *out = cell
                .iter()
                .map(|&(s, w)| weights[s as usize] * w / self.totals[s as usize])
                .sum();
        }
        g
    }
}

/// Rotation angles `[start, start+len)` over which the LED disk covers a point
/// at polar position `(rho, phi)`.
fn covered_arc(rho: f64, phi: f64, ring: f64, rf: f64) -> Option<(f64, f64)> {
    if rho + ring <= rf {
        return Some((0.0, TAU));
    }
    if rho == 0.0 || ring == 0.0 {
        return None;
    }
    let kappa = (rho * rho + ring * ring - rf * rf) / (2.0 * rho * ring);
    if kappa >= 1.0 {
        None
    } else if kappa <= -1.0 {
        Some((0.0, TAU))
    } else {
        let alpha = kappa.acos();
        Some((phi - alpha, 2.0 * alpha))
    }
}

fn split_into_segments(start: f64, len: f64, dtheta: f64, segments: usize, mut emit: impl FnMut(usize, f64)) {
    let a = start.rem_euclid(TAU);
    let b = a + len;
    let mut k = (a / dtheta).floor() as usize;
    loop {
        let lo = k as f64 * dtheta;
        if lo >= b {
            break;
        }
        let hi = lo + dtheta;
        let overlap = b.min(hi) - a.max(lo);
        if overlap > 0.0 {
            emit(k % segments, overlap);
        }
        k += 1;
    }
}

/// Luminous energy of one active segment, lm·s.
pub fn segment_luminous_energy(config: &SystemConfig, exposure: f64) -> f64 {
    let cam = &config.camera;
    cam.luminous_efficacy * cam.luminous_efficiency * config.tx.total_power * exposure
        / config.tx.segments_per_rotation as f64
}

/// Luminous energy accumulated by the blinking trail over one exposure.
pub fn accumulate_blink_energy(
    config: &SystemConfig,
    layout: &TrailLayout,
    bits: &[bool],
    exposure: f64,
) -> Result<EnergyGrid> {
    let coverage = SegmentCoverage::compute(layout, config.camera.supersample);
    accumulate_with_coverage(config, &coverage, bits, exposure)
}

pub fn accumulate_with_coverage(
    config: &SystemConfig,
    coverage: &SegmentCoverage,
    bits: &[bool],
    exposure: f64,
) -> Result<EnergyGrid> {
    if bits.len() != coverage.segments() {
        return Err(Error::Precondition(format!(
            "bit vector has {} entries, trail has {} segments",
            bits.len(),
            coverage.segments()
        )));
    }
    let q = segment_luminous_energy(config, exposure);
    let weights: Vec<f64> = bits.iter().map(|&b| if b { q } else { 0.0 }).collect();
    Ok(EnergyGrid {
        role: GridRole::BlinkEnergy,
        grid: coverage.combine(&weights),
    })
}

/// Converts luminous energy to radiometric units, `P = Q / (K·V(λ))`.
pub fn radiometric_distribution(q: &EnergyGrid, efficacy: f64, efficiency: f64) -> Result<EnergyGrid> {
    if !(efficacy > 0.0) {
        return Err(Error::invalid("luminous_efficacy", "must be positive"));
    }
    if !(efficiency > 0.0) {
        return Err(Error::invalid("luminous_efficiency", "must be positive"));
    }
    let mut grid = q.grid.clone();
    let k = efficacy * efficiency;
    grid.data.iter_mut().for_each(|v| *v /= k);
    Ok(EnergyGrid {
        role: GridRole::RadiometricDistribution,
        grid,
    })
}

/// Distributes `total` over pixels in proportion to `p`.
pub fn allocate_power(p: &EnergyGrid, total: f64) -> Result<EnergyGrid> {
    let mut grid = p.grid.same_extent();
    if total == 0.0 {
        return Ok(EnergyGrid {
            role: GridRole::AllocatedEnergy,
            grid,
        });
    }
    let sum = p.grid.sum();
    if !(sum > 0.0) {
        return Err(Error::EmptyTrail);
    }
    for (o, v) in grid.data.iter_mut().zip(&p.grid.data) {
        *o = total * v / sum;
    }
    Ok(EnergyGrid {
        role: GridRole::AllocatedEnergy,
        grid,
    })
}

/// Lambertian radiant pattern `((m+1)/2π)·cos^m ψ`.
pub fn lambertian(order: f64, psi: f64) -> f64 {
    (order + 1.0) / (2.0 * PI) * psi.cos().powf(order)
}

/// Line-of-sight DC gain at sensor pixel `(x, y)`.
///
/// The pixel is back-projected through the pinhole to the transmitter plane
/// at range `D`; with parallel optical axes the irradiance and incidence
/// angles coincide.
pub fn los_gain(config: &SystemConfig, x: f64, y: f64) -> f64 {
    let ch = &config.channel;
    let cam = &config.camera;
    let (cx, cy) = sensor_center(config);
    let offset = (x - cx).hypot(y - cy) * cam.pixel_pitch;
    let lateral = offset * ch.distance / cam.focal_length;
    let range = ch.distance.hypot(lateral);
    let angle = lateral.atan2(ch.distance);
    let collection = if angle <= ch.fov {
        config.pupil_area() * ch.filter_transmittance * ch.lens_gain * angle.cos()
    } else {
        0.0
    };
    collection / range.powf(ch.path_loss_exponent) * lambertian(ch.lambertian_order, angle)
}

/// Channel gain over the layout window, or a constant evaluated at the
/// trail center when `flat_h` is set.
pub fn gain_field(config: &SystemConfig, layout: &TrailLayout) -> Grid {
    let mut g = layout.blank_grid();
    if config.analysis.flat_h {
        let h = los_gain(config, layout.center.0, layout.center.1);
        g.data.iter_mut().for_each(|v| *v = h);
    } else {
        for i in 0..g.len() {
            let (x, y) = g.coords(i);
            g.data[i] = los_gain(config, x as f64, y as f64);
        }
    }
    g
}

/// Normalized `q × q` discrete Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    pub size: usize,
    /// Row-major; entry `(a, b)` lives at `(b + h)·size + (a + h)`, `h = size/2`.
    pub weights: Vec<f64>,
}

impl BlurKernel {
    pub fn half(&self) -> i64 {
        (self.size / 2) as i64
    }

    pub fn at(&self, a: i64, b: i64) -> f64 {
        let h = self.half();
        self.weights[((b + h) as usize) * self.size + (a + h) as usize]
    }

    pub fn taps(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let h = self.half();
        (-h..=h).flat_map(move |b| (-h..=h).map(move |a| (a, b, self.at(a, b))))
    }
}

pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<BlurKernel> {
    if size % 2 == 0 {
        return Err(Error::invalid("kernel_size", "kernel_size must be odd"));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid("blur_sigma", "must be positive"));
    }
    let h = (size / 2) as i64;
    let mut weights = Vec::with_capacity(size * size);
    for b in -h..=h {
        for a in -h..=h {
            weights.push((-((a * a + b * b) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(BlurKernel { size, weights })
}

/// `R(x,y) = H(x,y) · Σ_{a,b} G(a,b) · L(x-a, y-b)`, zero outside the window.
pub fn received_power(l: &EnergyGrid, h: &Grid, kernel: &BlurKernel) -> Result<EnergyGrid> {
    if !l.grid.same_window(h) {
        return Err(Error::Precondition("gain field and energy grid windows differ".into()));
    }
    let src = &l.grid;
    let mut out = src.same_extent();
    let taps: Vec<(i64, i64, f64)> = kernel.taps().collect();
    for idx in 0..out.len() {
        let (x, y) = out.coords(idx);
        let acc: f64 = taps.iter().map(|&(a, b, w)| w * src.get(x - a, y - b)).sum();
        out.data[idx] = h.data[idx] * acc;
    }
    Ok(EnergyGrid {
        role: GridRole::Received,
        grid: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table_config() -> SystemConfig {
        SystemConfig::default()
    }

    #[test]
    fn image_and_footprint_radius() {
        let c = table_config();
        let l = project_geometry(&c, 12).unwrap();
        // 0.0945 * 0.03 / (52 * 1.85e-6)
        assert!((l.image_radius - 29.469_854_47).abs() < 1e-6, "{}", l.image_radius);
        assert!((l.footprint_radius - 0.623_700_62).abs() < 1e-7, "{}", l.footprint_radius);
        assert_eq!(l.segments(), 18);
        for (j, &(x, y)) in l.centroids.iter().enumerate() {
            let a = (y - l.center.1).atan2(x - l.center.0).rem_euclid(TAU);
            assert!((a - (j as f64 + 0.5) * PI / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nearest_pixel_ties_go_down() {
        assert_eq!(nearest_pixel(2.5), 2);
        assert_eq!(nearest_pixel(2.500_001), 3);
        assert_eq!(nearest_pixel(-0.5), -1);
        assert_eq!(nearest_pixel(3.49), 3);
    }

    #[test]
    fn trail_outside_sensor_names_led() {
        let mut c = table_config();
        c.camera.width = 40;
        c.camera.height = 40;
        match project_geometry(&c, 12) {
            Err(Error::OutOfBounds { led }) => assert_eq!(led, 12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn blink_energy_edge_cases() {
        let c = table_config();
        let l = project_geometry(&c, 6).unwrap();
        let cov = SegmentCoverage::compute(&l, 8);
        let zero = accumulate_with_coverage(&c, &cov, &[false; 18], 1.0).unwrap();
        assert_eq!(zero.grid.sum(), 0.0);

        let mut bits = [false; 18];
        bits[0] = true;
        let one = accumulate_with_coverage(&c, &cov, &bits, 1.0).unwrap();
        let reach = l.footprint_radius + 0.75;
        for i in 0..one.grid.len() {
            if one.grid.data[i] == 0.0 {
                continue;
            }
            let (x, y) = one.grid.coords(i);
            let dx = x as f64 - l.center.0;
            let dy = y as f64 - l.center.1;
            // Sector [0, Δθ) dilated by the disk and half a pixel diagonal.
            let a = dy.atan2(dx);
            let r = dx.hypot(dy);
            let slack = (reach / r).asin();
            assert!(a >= -slack - 1e-12 && a <= PI / 9.0 + slack + 1e-12, "angle {a}");
            assert!((r - l.image_radius).abs() <= reach);
        }
        let expected = segment_luminous_energy(&c, 1.0);
        assert!((one.grid.sum() - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn radiometric_scaling() {
        let mut g = Grid::zeros(0, 0, 2, 1);
        g.data[0] = 683.0 * 0.381;
        let q = EnergyGrid { role: GridRole::BlinkEnergy, grid: g };
        let p = radiometric_distribution(&q, 683.0, 0.381).unwrap();
        assert!((p.grid.data[0] - 1.0).abs() < 1e-15);
        assert_eq!(p.grid.data[1], 0.0);
        assert!(radiometric_distribution(&q, 683.0, 0.0).is_err());
        let mut q3 = q.clone();
        q3.grid.scale(3.0);
        let p3 = radiometric_distribution(&q3, 683.0, 0.381).unwrap();
        assert!((p3.grid.data[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn allocation_cases() {
        let p = EnergyGrid {
            role: GridRole::RadiometricDistribution,
            grid: Grid::filled(0, 0, 2, 2, 7.0),
        };
        let l = allocate_power(&p, 0.2).unwrap();
        for v in &l.grid.data {
            assert!((v - 0.05).abs() < 1e-15);
        }
        let z = allocate_power(&p, 0.0).unwrap();
        assert_eq!(z.grid.sum(), 0.0);
        let empty = EnergyGrid {
            role: GridRole::RadiometricDistribution,
            grid: Grid::zeros(0, 0, 2, 2),
        };
        assert!(matches!(allocate_power(&empty, 0.2), Err(Error::EmptyTrail)));
    }

    #[test]
    fn los_gain_cases() {
        let c = table_config();
        let (cx, cy) = sensor_center(&c);
        assert!((lambertian(1.0, 0.0) - 1.0 / PI).abs() < 1e-15);
        let h = los_gain(&c, cx, cy);
        let expected = c.pupil_area() * 0.9 / (52.0f64 * 52.0) / PI;
        assert!((h - expected).abs() / expected < 1e-12);
        let far = los_gain(&c.with_distance(104.0), cx, cy);
        assert!((far / h - 0.25).abs() < 1e-12);

        // A focal length short enough that a sensor corner sits beyond 15°.
        let mut wide = c.clone();
        wide.camera.focal_length = 1e-3;
        let corner = los_gain(&wide, 0.0, 0.0);
        let angle = ((cx * cx + cy * cy).sqrt() * 1.85e-6 / 1e-3).atan();
        assert!(angle > 15f64.to_radians());
        assert_eq!(corner, 0.0);
    }

    #[test]
    fn kernel_cases() {
        let k1 = gaussian_kernel(1, 0.7).unwrap();
        assert_eq!(k1.weights, vec![1.0]);
        let k = gaussian_kernel(5, 1.0).unwrap();
        let mut z = 0.0;
        for u in -2i32..=2 {
            for v in -2i32..=2 {
                z += (-((u * u + v * v) as f64) / 2.0).exp();
            }
        }
        assert!((k.at(0, 0) - 1.0 / z).abs() < 1e-15);
        assert!(gaussian_kernel(4, 1.0).is_err());
    }

    #[test]
    fn convolution_identity() {
        let k = gaussian_kernel(5, 1.3).unwrap();
        let mut l = Grid::zeros(100, 200, 11, 11);
        l.set(105, 205, 1.0);
        let h = Grid::filled(100, 200, 11, 11, 1.0);
        let r = received_power(&EnergyGrid { role: GridRole::AllocatedEnergy, grid: l.clone() }, &h, &k).unwrap();
        for (a, b, w) in k.taps() {
            assert!((r.grid.get(105 + a, 205 + b) - w).abs() < 1e-15);
        }
        assert!((r.grid.sum() - 1.0).abs() < 1e-12);
        let zero = received_power(
            &EnergyGrid { role: GridRole::AllocatedEnergy, grid: l.same_extent() },
            &h,
            &k,
        )
        .unwrap();
        assert_eq!(zero.grid.sum(), 0.0);
    }

    proptest! {
        #[test]
        fn kernel_normalized_and_symmetric(half in 0usize..6, sigma in 0.2f64..6.0) {
            let q = 2 * half + 1;
            let k = gaussian_kernel(q, sigma).unwrap();
            let s: f64 = k.weights.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            let h = half as i64;
            for a in -h..=h {
                for b in -h..=h {
                    let w = k.at(a, b);
                    prop_assert_eq!(w, k.at(-a, b));
                    prop_assert_eq!(w, k.at(a, -b));
                    prop_assert_eq!(w, k.at(b, a));
                }
            }
        }

        #[test]
        fn allocation_sums_to_total(vals in prop::collection::vec(0.0f64..10.0, 1..64), total in 1e-6f64..10.0) {
            let n = vals.len();
            prop_assume!(vals.iter().sum::<f64>() > 0.0);
            let p = EnergyGrid {
                role: GridRole::RadiometricDistribution,
                grid: Grid { x0: 0, y0: 0, width: n, height: 1, data: vals },
            };
            let l = allocate_power(&p, total).unwrap();
            prop_assert!((l.grid.sum() - total).abs() / total < 1e-12);
        }

        #[test]
        fn convolution_is_linear(
            a in prop::collection::vec(0.0f64..1.0, 81),
            b in prop::collection::vec(0.0f64..1.0, 81),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
            sigma in 0.5f64..2.0,
        ) {
            let k = gaussian_kernel(5, sigma).unwrap();
            let h = Grid::filled(0, 0, 9, 9, 0.37);
            let mk = |d: Vec<f64>| EnergyGrid {
                role: GridRole::AllocatedEnergy,
                grid: Grid { x0: 0, y0: 0, width: 9, height: 9, data: d },
            };
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
            let ra = received_power(&mk(a), &h, &k).unwrap();
            let rb = received_power(&mk(b), &h, &k).unwrap();
            let rm = received_power(&mk(mix), &h, &k).unwrap();
            for i in 0..81 {
                let lin = alpha * ra.grid.data[i] + beta * rb.grid.data[i];
                prop_assert!((rm.grid.data[i] - lin).abs() < 1e-12);
            }
        }

        #[test]
        fn flat_gain_conserves_interior_energy(
            vals in prop::collection::vec(0.0f64..1.0, 25),
            c in 0.1f64..5.0,
            sigma in 0.5f64..2.5,
        ) {
            // 5x5 support inside a 9x9 window: two pixels of margin for q = 5.
            let mut l = Grid::zeros(0, 0, 9, 9);
            for (i, v) in vals.iter().enumerate() {
                l.set(2 + (i % 5) as i64, 2 + (i / 5) as i64, *v);
            }
            prop_assume!(l.sum() > 0.0);
            let k = gaussian_kernel(5, sigma).unwrap();
            let h = Grid::filled(0, 0, 9, 9, c);
            let r = received_power(&EnergyGrid { role: GridRole::AllocatedEnergy, grid: l.clone() }, &h, &k).unwrap();
            prop_assert!((r.grid.sum() - c * l.sum()).abs() / (c * l.sum()) < 1e-12);
        }
    }
}
