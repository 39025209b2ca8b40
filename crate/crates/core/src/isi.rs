//! Finite-neighborhood ISI model and closed-form BER.
//!
//! The sampled pixel at segment `j` sees its own segment plus leakage from
//! the segments around it on the (circular) trail. Keeping `K` neighbors on
//! each side, the noise-free pixel value for every on/off pattern of the
//! `2K+1` segments is tabulated, the detector threshold is put halfway
//! between the two hardest patterns (all neighbors on with the center off,
//! and the center alone), and Gaussian pixel noise turns each pattern into
//! a conditional error probability.

use std::f64::consts::SQRT_2;

use log::warn;
use libm::erfc;

use crate::config::VarianceMode;
use crate::error::{Error, Result};
use crate::model::TrailModel;

/// Largest number of neighbor patterns evaluated per segment.
pub const MAX_PATTERNS: usize = 1 << 20;

/// Standard normal upper tail `Q(x) = ½·erfc(x/√2)`.
pub fn q_function(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 1.0;
    }
    0.5 * erfc(x / SQRT_2)
}

/// `Q(|PV_th − μ| / σ)`. With `σ = 0` this is 0, or ½ when `μ = PV_th`.
pub fn conditional_error(threshold: f64, mean: f64, sigma: f64) -> f64 {
    let gap = (threshold - mean).abs();
    if gap == 0.0 {
        return 0.5;
    }
    q_function(gap / sigma)
}

/// Probability that a bit of `class` with noise-free value `mean` lands on
/// the wrong side of `threshold` (`> threshold` decodes as one).
///
/// Equals [`conditional_error`] whenever the mean sits on its own side of
/// the threshold; otherwise it exceeds ½.
pub fn class_error(class: bool, threshold: f64, mean: f64, sigma: f64) -> f64 {
    let margin = if class { mean - threshold } else { threshold - mean };
    if margin == 0.0 {
        return 0.5;
    }
    q_function(margin / sigma)
}

/// Received energy at one centroid split by the offset of the emitting
/// segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentResponses {
    pub segment: usize,
    pub k: usize,
    /// Energy from offsets `-k..=k`; index `m + k`.
    pub taps: Vec<f64>,
    /// Energy from every segment beyond `±k`.
    pub tail: f64,
}

impl ComponentResponses {
    pub fn tap(&self, m: i64) -> f64 {
        self.taps[(m + self.k as i64) as usize]
    }

    /// Energy from all segments other than `j` and its two neighbors.
    pub fn beyond_adjacent(&self) -> f64 {
        let inner: f64 = (-(self.k as i64)..=self.k as i64)
            .filter(|m| m.abs() >= 2)
            .map(|m| self.tap(m))
            .sum();
        inner + self.tail
    }
}

/// Splits the response at centroid `j` into the `±k` neighborhood and the
/// remaining tail. When the ring has fewer than `2k+1` segments, offsets
/// that wrap onto an already counted segment get a zero tap.
pub fn component_responses(model: &TrailModel, j: usize, k: usize) -> ComponentResponses {
    let n = model.segments();
    let row = model.response_row(j);
    let mut counted = vec![false; n];
    let mut taps = vec![0.0; 2 * k + 1];
    // Nearest offsets claim a segment first: 0, -1, +1, -2, +2, ...
    let order = std::iter::once(0i64).chain((1..=k as i64).flat_map(|d| [-d, d]));
    for m in order {
        let s = (j as i64 + m).rem_euclid(n as i64) as usize;
        if !counted[s] {
            counted[s] = true;
            taps[(m + k as i64) as usize] = row[s];
        }
    }
    let tail = row
        .iter()
        .zip(&counted)
        .filter(|(_, c)| !**c)
        .map(|(r, _)| r)
        .sum();
    ComponentResponses {
        segment: j,
        k,
        taps,
        tail,
    }
}

/// Non-adjacent over adjacent leakage `Λ₂`. Returns 0 when there is no
/// leakage at all and `+∞` when only non-adjacent segments leak.
pub fn leakage_ratio(c: &ComponentResponses) -> f64 {
    assert!(c.k >= 1, "leakage ratio needs the adjacent taps");
    let adjacent = c.tap(-1) + c.tap(1);
    let far = c.beyond_adjacent();
    if adjacent == 0.0 {
        if far == 0.0 {
            return 0.0;
        }
        warn!("segment {}: no adjacent leakage, leakage ratio undefined", c.segment);
        return f64::INFINITY;
    }
    far / adjacent
}

/// Noise-free pixel values for every pattern of one segment's neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPatterns {
    pub segment: usize,
    /// Pattern `p` has the bit of offset `m` at position `m + k`.
    pub means: Vec<f64>,
    /// Pixel-domain noise standard deviation per pattern.
    pub sigmas: Vec<f64>,
    pub threshold: f64,
}

/// Pattern means, thresholds and noise levels for all segments of a trail.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternTable {
    pub k: usize,
    /// Effective pixel-domain noise level.
    pub sigma: f64,
    pub segments: Vec<SegmentPatterns>,
}

/// The `k = 1` table: eight means per segment.
pub type TripletTable = PatternTable;

/// Pattern index for a triplet `(b_{j-1}, b_j, b_{j+1})`.
pub fn triplet_index(prev: bool, center: bool, next: bool) -> usize {
    prev as usize | (center as usize) << 1 | (next as usize) << 2
}

impl PatternTable {
    pub fn patterns(&self) -> usize {
        1 << (2 * self.k + 1)
    }

    pub fn center_bit(&self, pattern: usize) -> bool {
        pattern >> self.k & 1 == 1
    }

    /// Mean for a triplet; only meaningful for `k = 1`.
    pub fn triplet(&self, j: usize, prev: bool, center: bool, next: bool) -> f64 {
        debug_assert_eq!(self.k, 1);
        self.segments[j].means[triplet_index(prev, center, next)]
    }

    /// Hardest pair `(all neighbors on, center off)` and `(center only)`.
    pub fn hardest_pair(&self) -> (usize, usize) {
        let full = self.patterns() - 1;
        let center = 1 << self.k;
        (full & !center, center)
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.threshold).collect()
    }

    /// Segment-averaged means by center bit and adjacent-neighbor state:
    /// `[class][state]` with states `00`, `01`/`10` (pooled) and `11`.
    pub fn neighbor_state_means(&self) -> [[f64; 3]; 2] {
        debug_assert_eq!(self.k, 1);
        let n = self.segments.len() as f64;
        let mut out = [[0.0; 3]; 2];
        for (class, row) in out.iter_mut().enumerate() {
            let c = class == 1;
            for seg in &self.segments {
                let m = |p: bool, q: bool| seg.means[triplet_index(p, c, q)];
                row[0] += m(false, false) / n;
                row[1] += 0.5 * (m(true, false) + m(false, true)) / n;
                row[2] += m(true, true) / n;
            }
        }
        out
    }
}

/// Midpoint of the hardest pair's means.
pub fn midpoint_threshold(means: &[f64], k: usize) -> f64 {
    let full = (1usize << (2 * k + 1)) - 1;
    let center = 1usize << k;
    0.5 * means[full & !center] + 0.5 * means[center]
}

/// Photon count at the operating point used for the noise conversion: the
/// midpoint of the hardest adjacent-ISI pair, averaged over segments.
pub fn operating_point(model: &TrailModel) -> f64 {
    let n = model.segments();
    let sum: f64 = (0..n)
        .map(|j| {
            let c = component_responses(model, j, 1);
            0.5 * (c.tap(-1) + c.tap(1)) + 0.5 * c.tap(0)
        })
        .sum();
    sum / n as f64 / model.photon_energy
}

/// Effective pixel-domain noise level.
///
/// An explicit energy-domain level is pushed through the local camera slope
/// at the operating point; otherwise the configured pixel-domain level is
/// used as is.
pub fn effective_sigma(model: &TrailModel) -> Result<f64> {
    match model.config.camera.sigma_n_power {
        Some(sigma_n) => {
            let slope = model.response.derivative(operating_point(model))?;
            Ok(slope / model.photon_energy * sigma_n)
        }
        None => Ok(model.config.camera.sigma_n_pixel),
    }
}

/// Energy-domain noise level consistent with the pixel-domain one.
pub fn power_noise_sigma(model: &TrailModel) -> Result<f64> {
    match model.config.camera.sigma_n_power {
        Some(s) => Ok(s),
        None => {
            let slope = model.response.derivative(operating_point(model))?;
            Ok(model.config.camera.sigma_n_pixel * model.photon_energy / slope)
        }
    }
}

/// Tabulates pattern means and the midpoint threshold for every segment.
pub fn pattern_table(model: &TrailModel, k: usize) -> Result<PatternTable> {
    let neighbors = 2 * k;
    if neighbors >= usize::BITS as usize - 1 || (1usize << neighbors) > MAX_PATTERNS {
        return Err(Error::Precondition(format!(
            "{k}-neighbor model needs 2^{neighbors} patterns per segment, limit is 2^20"
        )));
    }
    let sigma = effective_sigma(model)?;
    let per_triplet = model.config.analysis.variance_mode == VarianceMode::PerTriplet;
    let sigma_n = if per_triplet { Some(power_noise_sigma(model)?) } else { None };
    let qp = model.photon_energy;
    let patterns = 1usize << (2 * k + 1);

    let segments = (0..model.segments())
        .map(|j| {
            let c = component_responses(model, j, k);
            let means: Vec<f64> = (0..patterns)
                .map(|p| {
                    let energy: f64 = c
                        .taps
                        .iter()
                        .enumerate()
                        .filter(|(bit, _)| p >> bit & 1 == 1)
                        .map(|(_, t)| t)
                        .sum();
                    model.response.pixel_value(energy / qp)
                })
                .collect();
            let sigmas = match sigma_n {
                None => vec![sigma; patterns],
                Some(sn) => (0..patterns)
                    .map(|p| {
                        let energy: f64 = c
                            .taps
                            .iter()
                            .enumerate()
                            .filter(|(bit, _)| p >> bit & 1 == 1)
                            .map(|(_, t)| t)
                            .sum();
                        model
                            .response
                            .derivative(energy / qp)
                            .map_or(0.0, |d| d / qp * sn)
                    })
                    .collect(),
            };
            let threshold = midpoint_threshold(&means, k);
            SegmentPatterns {
                segment: j,
                means,
                sigmas,
                threshold,
            }
        })
        .collect();

    Ok(PatternTable { k, sigma, segments })
}

pub fn triplet_means(model: &TrailModel) -> Result<TripletTable> {
    pattern_table(model, 1)
}

/// Prior probability of a neighborhood pattern: the center bit, the joint
/// prior of the two adjacent bits and independent bits further out.
pub fn pattern_prior(pattern: usize, k: usize, priors: [f64; 2], neighbor: [[f64; 2]; 2]) -> f64 {
    let bit = |m: i64| pattern >> (m + k as i64) as usize & 1;
    let mut w = priors[bit(0)];
    if k >= 1 {
        w *= neighbor[bit(-1)][bit(1)];
    }
    for d in 2..=k as i64 {
        w *= priors[bit(-d)] * priors[bit(d)];
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentBer {
    pub segment: usize,
    pub threshold: f64,
    /// Conditional error per pattern, same indexing as the pattern table.
    pub conditional: Vec<f64>,
    pub ber: f64,
    /// `Λ₂` at this segment.
    pub leakage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerBreakdown {
    pub k: usize,
    pub sigma: f64,
    pub segments: Vec<SegmentBer>,
    /// Mean of the per-segment BERs.
    pub ber: f64,
}

impl BerBreakdown {
    pub fn max_leakage(&self) -> f64 {
        self.segments.iter().map(|s| s.leakage).fold(0.0, f64::max)
    }
}

/// BER of the table's own thresholds, optionally shifted by `offset`.
pub fn table_ber(model: &TrailModel, table: &PatternTable, offset: f64) -> BerBreakdown {
    let an = &model.config.analysis;
    let priors = an.priors();
    let neighbor = an.neighbor_prior_table();
    let k = table.k;
    let segments: Vec<SegmentBer> = table
        .segments
        .iter()
        .map(|seg| {
            let th = seg.threshold + offset;
            let conditional: Vec<f64> = seg
                .means
                .iter()
                .zip(&seg.sigmas)
                .enumerate()
                .map(|(p, (&mu, &sd))| class_error(table.center_bit(p), th, mu, sd))
                .collect();
            let ber = conditional
                .iter()
                .enumerate()
                .map(|(p, e)| pattern_prior(p, k, priors, neighbor) * e)
                .sum();
            let leakage = leakage_ratio(&component_responses(model, seg.segment, 1));
            SegmentBer {
                segment: seg.segment,
                threshold: th,
                conditional,
                ber,
                leakage,
            }
        })
        .collect();
    let ber = segments.iter().map(|s| s.ber).sum::<f64>() / segments.len() as f64;
    BerBreakdown {
        k,
        sigma: table.sigma,
        segments,
        ber,
    }
}

/// BER under the `k`-neighbor model; `k = 0` treats segments as isolated.
pub fn k_neighbor_ber(model: &TrailModel, k: usize) -> Result<BerBreakdown> {
    let table = pattern_table(model, k)?;
    Ok(table_ber(model, &table, 0.0))
}

/// Adjacent-only ISI BER.
pub fn analytic_ber(model: &TrailModel) -> Result<BerBreakdown> {
    k_neighbor_ber(model, 1)
}

/// Neighborhood covering the whole ring except the opposite segment.
pub fn all_segment_k(segments: usize) -> usize {
    segments.saturating_sub(1) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingViolation {
    pub segment: usize,
    pub worse: usize,
    pub better: usize,
}

impl std::fmt::Display for OrderingViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let t = |p: usize| format!("({},{},{})", p & 1, p >> 1 & 1, p >> 2 & 1);
        write!(
            f,
            "segment {}: error of {} exceeds that of {}",
            self.segment,
            t(self.better),
            t(self.worse)
        )
    }
}

/// Conditional errors of one segment sorted from worst to best.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentOrdering {
    pub segment: usize,
    pub ranked: Vec<(usize, f64)>,
}

/// Checks that conditional errors move monotonically with each neighbor
/// bit: up for a transmitted zero, down for a transmitted one, so the
/// worst neighbors are `(1,1)` and `(0,0)` respectively.
pub fn verify_worst_case(table: &TripletTable) -> std::result::Result<Vec<SegmentOrdering>, OrderingViolation> {
    assert_eq!(table.k, 1, "worst-case ordering is defined on triplet tables");
    let mut out = Vec::with_capacity(table.segments.len());
    for seg in &table.segments {
        let err = |p: usize| class_error(p >> 1 & 1 == 1, seg.threshold, seg.means[p], seg.sigmas[p]);
        for center in [false, true] {
            for other in [false, true] {
                for (lo, hi) in [
                    (triplet_index(false, center, other), triplet_index(true, center, other)),
                    (triplet_index(other, center, false), triplet_index(other, center, true)),
                ] {
                    // Turning a neighbor on must not help a zero or hurt a one.
                    let (worse, better) = if center { (lo, hi) } else { (hi, lo) };
                    if err(better) > err(worse) * (1.0 + 1e-12) + 1e-300 {
                        return Err(OrderingViolation {
                            segment: seg.segment,
                            worse,
                            better,
                        });
                    }
                }
            }
        }
        let mut ranked: Vec<(usize, f64)> = (0..8).map(|p| (p, err(p))).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out.push(SegmentOrdering {
            segment: seg.segment,
            ranked,
        });
    }
    Ok(out)
}
