//! Plain-text artifact writers: CSV tables and 16-bit ASCII graymaps.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! values always produce identical bytes.

use std::io::Write;

use crate::design::{Candidate, DesignPoint};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::isi::{BerBreakdown, PatternTable};
use crate::mc::McResult;
use crate::render::TrailLayout;

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Neighborhood bits of a pattern, lowest offset first, e.g. `"101"`.
pub fn pattern_bits(pattern: usize, k: usize) -> String {
    (0..=2 * k).map(|i| if pattern >> i & 1 == 1 { '1' } else { '0' }).collect()
}

/// `j, x_j, y_j, px_j, py_j`: continuous and pixel centroids.
pub fn write_layout<W: Write>(w: W, layout: &TrailLayout) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["j", "x_j", "y_j", "px_j", "py_j"]).map_err(csv_err)?;
    for (j, (&(x, y), &(px, py))) in layout.centroids.iter().zip(&layout.centroid_pixels).enumerate() {
        w.write_record([j.to_string(), x.to_string(), y.to_string(), px.to_string(), py.to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

/// Pattern means with the conditional error of each pattern at the segment
/// threshold.
pub fn write_ber_breakdown<W: Write>(w: W, table: &PatternTable, ber: &BerBreakdown) -> Result<()> {
    if table.k != ber.k || table.segments.len() != ber.segments.len() {
        return Err(Error::Precondition("pattern table and BER breakdown disagree".into()));
    }
    let mut w = writer(w);
    w.write_record(["segment", "bits", "mean", "sigma", "threshold", "conditional_error"])
        .map_err(csv_err)?;
    for (seg, b) in table.segments.iter().zip(&ber.segments) {
        for (p, (&mean, &sigma)) in seg.means.iter().zip(&seg.sigmas).enumerate() {
            w.write_record([
                seg.segment.to_string(),
                pattern_bits(p, table.k),
                mean.to_string(),
                sigma.to_string(),
                b.threshold.to_string(),
                b.conditional[p].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// `class, bin, count` for both symbol classes.
pub fn write_histograms<W: Write>(w: W, histograms: &[Vec<u64>; 2]) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["class", "bin", "count"]).map_err(csv_err)?;
    for (class, h) in histograms.iter().enumerate() {
        for (bin, count) in h.iter().enumerate() {
            w.write_record([class.to_string(), bin.to_string(), count.to_string()])
                .map_err(csv_err)?;
        }
    }
    finish(w)
}

pub fn write_mc_report<W: Write>(w: W, rows: &[(f64, McResult)]) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["distance", "n_bits", "errors", "ber", "ci_low", "ci_high"])
        .map_err(csv_err)?;
    for (d, r) in rows {
        w.write_record([
            d.to_string(),
            r.n_bits.to_string(),
            r.n_errors.to_string(),
            r.ber_hat.to_string(),
            r.ci95.0.to_string(),
            r.ci95.1.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// One row of a BER-versus-distance table.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRow {
    pub distance: f64,
    pub mode: String,
    pub ber: f64,
    /// Confidence bounds and counts, Monte Carlo rows only.
    pub ci: Option<(f64, f64)>,
    pub n_bits: Option<u64>,
    pub errors: Option<u64>,
    pub max_leakage: f64,
}

pub fn write_ber_table<W: Write>(w: W, rows: &[BerRow]) -> Result<()> {
    let opt = |v: Option<String>| v.unwrap_or_default();
    let mut w = writer(w);
    w.write_record(["distance", "mode", "ber", "ci_low", "ci_high", "n_bits", "errors", "max_leakage"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.distance.to_string(),
            r.mode.clone(),
            r.ber.to_string(),
            opt(r.ci.map(|c| c.0.to_string())),
            opt(r.ci.map(|c| c.1.to_string())),
            opt(r.n_bits.map(|v| v.to_string())),
            opt(r.errors.map(|v| v.to_string())),
            r.max_leakage.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_design<W: Write>(w: W, points: &[DesignPoint]) -> Result<()> {
    let mut w = writer(w);
    w.write_record([
        "led_index",
        "r_i",
        "D",
        "J_star",
        "dtheta_star",
        "ber",
        "throughput_bps",
        "feasible",
        "scaling_diag",
    ])
    .map_err(csv_err)?;
    for p in points {
        w.write_record([
            p.led.to_string(),
            p.radius.to_string(),
            p.distance.to_string(),
            p.segments.to_string(),
            p.control_angle.to_string(),
            p.ber.to_string(),
            p.throughput.to_string(),
            p.feasible.to_string(),
            p.scaling_diag.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Throughput and BER of every candidate segment count, per distance.
pub fn write_candidates<W: Write>(w: W, led: usize, rows: &[(f64, Vec<Candidate>)]) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["led_index", "D", "J", "dtheta", "ber", "throughput_bps", "feasible"])
        .map_err(csv_err)?;
    for (d, cands) in rows {
        for c in cands {
            w.write_record([
                led.to_string(),
                d.to_string(),
                c.segments.to_string(),
                c.control_angle.to_string(),
                c.ber.to_string(),
                c.throughput.to_string(),
                c.feasible.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// `n_frames, estimate, generator_sigma`.
pub fn write_noise_estimates<W: Write>(w: W, rows: &[(usize, f64, f64)]) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["n_frames", "estimate", "generator_sigma"]).map_err(csv_err)?;
    for (n, est, gen) in rows {
        w.write_record([n.to_string(), est.to_string(), gen.to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

/// Writes pixel values on the 0–255 scale as a 16-bit ASCII graymap
/// (`P2`, maxval 65535), scaling by 257 so full scale maps to 65535.
pub fn write_pgm<W: Write>(mut w: W, grid: &Grid) -> Result<()> {
    writeln!(w, "P2")?;
    writeln!(w, "# origin {} {}", grid.x0, grid.y0)?;
    writeln!(w, "{} {}", grid.width, grid.height)?;
    writeln!(w, "65535")?;
    for row in grid.data.chunks(grid.width.max(1)) {
        let line: Vec<String> = row
            .iter()
            .map(|v| ((v * 257.0).round().clamp(0.0, 65535.0) as u16).to_string())
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}
