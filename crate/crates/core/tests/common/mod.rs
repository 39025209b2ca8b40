#![allow(dead_code)]

use lighttrail::camera;
use lighttrail::config::BlurModel;
use lighttrail::grid::Grid;
use lighttrail::isi::q_function;
use lighttrail::{SystemConfig, TrailModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bilinear interpolation of a grid at a continuous sensor position.
pub fn bilinear(g: &Grid, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (xi, yi) = (x0 as i64, y0 as i64);
    g.get(xi, yi) * (1.0 - fx) * (1.0 - fy)
        + g.get(xi + 1, yi) * fx * (1.0 - fy)
        + g.get(xi, yi + 1) * (1.0 - fx) * fy
        + g.get(xi + 1, yi + 1) * fx * fy
}

/// Received energy at every centroid pixel for a single active segment,
/// from a full render.
pub fn single_segment_render(model: &TrailModel, s: usize) -> Grid {
    let mut bits = vec![false; model.segments()];
    bits[s] = true;
    model.render_received(&bits).unwrap().grid
}

/// Adjacent-ISI BER by explicit enumeration of the eight triplets of every
/// segment, with components taken from single-segment renders.
pub fn enumerated_ber(model: &TrailModel, sigma: f64) -> f64 {
    let n = model.segments();
    assert!(n >= 3);
    let renders: Vec<Grid> = (0..n).map(|s| single_segment_render(model, s)).collect();
    let cfg = &model.config;
    let p1 = cfg.analysis.prior_one;
    let prior = [1.0 - p1, p1];
    let nb = cfg
        .analysis
        .neighbor_priors
        .unwrap_or([[prior[0] * prior[0], prior[0] * prior[1]], [prior[1] * prior[0], prior[1] * prior[1]]]);
    let qp = cfg.camera.photon_energy();
    let mut sum = 0.0;
    for j in 0..n {
        let (x, y) = model.layout.centroid_pixels[j];
        let left = renders[(j + n - 1) % n].get(x, y);
        let mid = renders[j].get(x, y);
        let right = renders[(j + 1) % n].get(x, y);
        let pv = |a: u8, b: u8, c: u8| {
            let e = a as f64 * left + b as f64 * mid + c as f64 * right;
            camera::pixel_response(e / qp, &cfg.camera)
        };
        let th = (pv(1, 0, 1) + pv(0, 1, 0)) / 2.0;
        let mut seg = 0.0;
        for a in 0..2u8 {
            for b in 0..2u8 {
                for c in 0..2u8 {
                    let mu = pv(a, b, c);
                    let err = if b == 1 {
                        q_function((mu - th) / sigma)
                    } else {
                        q_function((th - mu) / sigma)
                    };
                    seg += prior[b as usize] * nb[a as usize][c as usize] * err;
                }
            }
        }
        sum += seg;
    }
    sum / n as f64
}

/// A randomized but valid scenario around the default geometry.
pub fn random_config(rng: &mut ChaCha8Rng) -> (SystemConfig, usize) {
    let mut cfg = SystemConfig::default();
    let led = rng.random_range(1..=12usize);
    cfg.channel.distance = rng.random_range(44.0..66.0);
    cfg.tx.segments_per_rotation = rng.random_range(3..=40usize);
    if rng.random_bool(0.5) {
        cfg.channel.blur = BlurModel::Fixed(rng.random_range(0.5..2.5));
    }
    cfg.camera.sigma_n_pixel = rng.random_range(1.0..30.0);
    cfg.analysis.prior_one = rng.random_range(0.2..0.8);
    if rng.random_bool(0.5) {
        let w: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.05..1.0));
        let s: f64 = w.iter().sum();
        cfg.analysis.neighbor_priors = Some([[w[0] / s, w[1] / s], [w[2] / s, w[3] / s]]);
    }
    (cfg, led)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
