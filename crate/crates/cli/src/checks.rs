//! Invariant suite behind `lighttrail validate`.

use lighttrail::grid::Grid;
use lighttrail::isi::{self, q_function};
use lighttrail::render;
use lighttrail::{SystemConfig, TrailModel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Advisory,
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Advisory => "advisory",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

fn check(name: &'static str, ok: bool, detail: String) -> Check {
    Check {
        name,
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn kernel_normalization(model: &TrailModel) -> Check {
    let k = &model.kernel;
    let sum: f64 = k.weights.iter().sum();
    let h = k.half();
    let asym = (-h..=h)
        .flat_map(|a| (-h..=h).map(move |b| (a, b)))
        .map(|(a, b)| (k.at(a, b) - k.at(-a, b)).abs().max((k.at(a, b) - k.at(b, a)).abs()))
        .fold(0.0, f64::max);
    check(
        "kernel_normalization",
        (sum - 1.0).abs() <= 1e-12 && asym <= 1e-15,
        format!("sum - 1 = {:e}, max asymmetry = {asym:e}", sum - 1.0),
    )
}

fn energy_conservation(model: &TrailModel) -> lighttrail::Result<Check> {
    let cfg = &model.config;
    let ones = vec![true; model.segments()];
    let q = render::accumulate_with_coverage(cfg, &model.coverage, &ones, model.exposure)?;
    let p = render::radiometric_distribution(&q, cfg.camera.luminous_efficacy, cfg.camera.luminous_efficiency)?;
    let total = cfg.tx.frame_power(model.segments()) * model.exposure;
    let l = render::allocate_power(&p, total)?;
    let gain = model.gain.get(model.layout.centroid_pixels[0].0, model.layout.centroid_pixels[0].1);
    let g = &l.grid;
    let flat = Grid::filled(g.x0, g.y0, g.width, g.height, gain);
    let r = render::received_power(&l, &flat, &model.kernel)?;
    let alloc_err = (l.grid.sum() - total).abs() / total;
    let conv_err = (r.grid.sum() - gain * l.grid.sum()).abs() / (gain * l.grid.sum());
    Ok(check(
        "energy_conservation",
        alloc_err <= 1e-12 && conv_err <= 1e-12,
        format!("allocation rel. error = {alloc_err:e}, flat-gain blur rel. error = {conv_err:e}"),
    ))
}

fn worst_case_ordering(model: &TrailModel) -> lighttrail::Result<Check> {
    let table = isi::triplet_means(model)?;
    Ok(match isi::verify_worst_case(&table) {
        Ok(_) => check("worst_case_ordering", true, format!("{} segments ordered", table.segments.len())),
        Err(v) => check("worst_case_ordering", false, v.to_string()),
    })
}

/// Adjacent-ISI BER recomputed directly from the response matrix.
pub fn brute_force_ber(model: &TrailModel) -> lighttrail::Result<f64> {
    let n = model.segments();
    let an = &model.config.analysis;
    let priors = an.priors();
    let nb = an.neighbor_prior_table();
    let sigma = isi::effective_sigma(model)?;
    let qp = model.photon_energy;
    let mut total = 0.0;
    for j in 0..n {
        let (l, r) = ((j + n - 1) % n, (j + 1) % n);
        let pv = |bp: bool, bc: bool, bn: bool| {
            let mut e = 0.0;
            if bp {
                e += model.response(j, l);
            }
            if bc {
                e += model.response(j, j);
            }
            if bn && r != l {
                e += model.response(j, r);
            }
            model.response.pixel_value(e / qp)
        };
        let th = 0.5 * (pv(true, false, true) + pv(false, true, false));
        for bits in 0..8u32 {
            let (bp, bc, bn) = (bits & 1 == 1, bits & 2 == 2, bits & 4 == 4);
            let mu = pv(bp, bc, bn);
            let err = if bc {
                q_function((mu - th) / sigma)
            } else {
                q_function((th - mu) / sigma)
            };
            total += priors[bc as usize] * nb[bp as usize][bn as usize] * err;
        }
    }
    Ok(total / n as f64)
}

fn oracle_equivalence(model: &TrailModel) -> lighttrail::Result<Check> {
    let analytic = isi::analytic_ber(model)?.ber;
    let oracle = brute_force_ber(model)?;
    let homoscedastic = model.config.analysis.variance_mode == lighttrail::config::VarianceMode::Homoscedastic;
    if !homoscedastic {
        return Ok(Check {
            name: "oracle_equivalence",
            status: Status::Advisory,
            detail: "skipped: oracle assumes a single noise level".into(),
        });
    }
    Ok(check(
        "oracle_equivalence",
        (analytic - oracle).abs() <= 1e-12,
        format!("analytic = {analytic:e}, enumeration = {oracle:e}"),
    ))
}

fn leakage(model: &TrailModel) -> lighttrail::Result<Check> {
    let tol = model.config.analysis.leakage_tolerance;
    let lam = isi::analytic_ber(model)?.max_leakage();
    Ok(if lam <= tol {
        check("leakage_ratio", true, format!("max leakage ratio {lam:.4} <= {tol}"))
    } else {
        Check {
            name: "leakage_ratio",
            status: Status::Advisory,
            detail: format!("max leakage ratio {lam:.4} > {tol}: K-neighbor model recommended"),
        }
    })
}

pub fn run_all(config: &SystemConfig, led: usize) -> lighttrail::Result<Vec<Check>> {
    let model = TrailModel::build(config, led)?;
    Ok(vec![
        kernel_normalization(&model),
        energy_conservation(&model)?,
        worst_case_ordering(&model)?,
        oracle_equivalence(&model)?,
        leakage(&model)?,
    ])
}
