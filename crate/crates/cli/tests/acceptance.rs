//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use lighttrail::camera;
use lighttrail::config::BlurModel;
use lighttrail::design;
use lighttrail::grid::Grid;
use lighttrail::isi::{self, q_function, PatternTable, SegmentPatterns};
use lighttrail::mc::{self, McOptions};
use lighttrail::render;
use lighttrail::{SystemConfig, TrailModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: [f64; 9] = [46.0, 48.0, 50.0, 52.0, 54.0, 56.0, 58.0, 60.0, 62.0];
const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn scenario(d: f64) -> TrailModel {
    TrailModel::scenario(&SystemConfig::default().with_distance(d)).unwrap()
}

// 1. Three histogram modes per class at the neighbor-state levels.
fn trimodal_histogram() -> Outcome {
    let m = scenario(52.0);
    let r = mc::run_mc(&m, 5000, SEEDS[0], &McOptions::default()).unwrap();
    let table = isi::triplet_means(&m).unwrap();
    let expected = table.neighbor_state_means();
    let tol = 2.0 * table.sigma;
    let mut ok = true;
    let mut parts = Vec::new();
    for class in 0..2 {
        let modes = mc::histogram_modes(&r.histograms[class]).unwrap();
        let matched = modes.len() == 3 && modes.iter().zip(&expected[class]).all(|(m, e)| (m - e).abs() <= tol);
        ok &= matched;
        parts.push(format!(
            "class {class}: modes {modes:?} vs expected {:.1?}",
            expected[class]
        ));
    }
    outcome(ok, parts.join("; "))
}

// 2. Analytic BER inside the Monte Carlo Wilson interval.
fn analytic_mc_agreement() -> Outcome {
    let models: Vec<TrailModel> = GRID.iter().map(|&d| scenario(d)).collect();
    let analytic: Vec<f64> = models.iter().map(|m| isi::analytic_ber(m).unwrap().ber).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in SEEDS {
        let mut good = 0;
        let mut misses = Vec::new();
        for ((m, &p), &d) in models.iter().zip(&analytic).zip(&GRID) {
            if p < 1e-5 {
                good += 1;
                continue;
            }
            let r = mc::run_mc(m, 1_000_000, seed, &McOptions::default()).unwrap();
            if r.ci95.0 <= p && p <= r.ci95.1 {
                good += 1;
            } else {
                misses.push(format!("{d} m ({:.4e} vs [{:.4e}, {:.4e}])", p, r.ci95.0, r.ci95.1));
            }
        }
        ok &= good >= 8;
        parts.push(format!("seed {seed}: {good}/9{}", if misses.is_empty() { String::new() } else { format!(" misses {}", misses.join(", ")) }));
    }
    outcome(ok, parts.join("; "))
}

fn single_segment(m: &TrailModel, s: usize) -> Grid {
    let mut bits = vec![false; m.segments()];
    bits[s] = true;
    m.render_received(&bits).unwrap().grid
}

/// Prior-weighted enumeration of all eight triplets per segment, using
/// pixel values of full single-segment renders.
fn enumerated_ber(m: &TrailModel) -> f64 {
    let n = m.segments();
    let renders: Vec<Grid> = (0..n).map(|s| single_segment(m, s)).collect();
    let cfg = &m.config;
    let p1 = cfg.analysis.prior_one;
    let prior = [1.0 - p1, p1];
    let nb = cfg
        .analysis
        .neighbor_priors
        .unwrap_or([[prior[0] * prior[0], prior[0] * prior[1]], [prior[1] * prior[0], prior[1] * prior[1]]]);
    let qp = cfg.camera.photon_energy();
    let sigma = cfg.camera.sigma_n_pixel;
    let mut sum = 0.0;
    for j in 0..n {
        let (x, y) = m.layout.centroid_pixels[j];
        let e = [renders[(j + n - 1) % n].get(x, y), renders[j].get(x, y), renders[(j + 1) % n].get(x, y)];
        let pv = |a: usize, b: usize, c: usize| {
            camera::pixel_response((a as f64 * e[0] + b as f64 * e[1] + c as f64 * e[2]) / qp, &cfg.camera)
        };
        let th = (pv(1, 0, 1) + pv(0, 1, 0)) / 2.0;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let mu = pv(a, b, c);
                    let err = if b == 1 { q_function((mu - th) / sigma) } else { q_function((th - mu) / sigma) };
                    sum += prior[b] * nb[a][c] * err;
                }
            }
        }
    }
    sum / n as f64
}

fn random_config(rng: &mut ChaCha8Rng) -> (SystemConfig, usize) {
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

// 3. Analytic BER equals brute-force enumeration.
fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 100 {
        let (cfg, led) = random_config(&mut rng);
        let Ok(m) = TrailModel::build(&cfg, led) else { continue };
        let diff = (isi::analytic_ber(&m).unwrap().ber - enumerated_ber(&m)).abs();
        worst = worst.max(diff);
        done += 1;
    }
    outcome(worst <= 1e-12, format!("100 configurations, max |diff| = {worst:e}"))
}

// 4. Ignoring ISI underestimates BER.
fn no_isi_underestimates() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for &d in &GRID {
        let m = scenario(d);
        let k0 = isi::k_neighbor_ber(&m, 0).unwrap().ber;
        let k1 = isi::analytic_ber(&m).unwrap().ber;
        ok &= k0 < k1;
        parts.push(format!("{d}: {k0:.2e} < {k1:.2e}"));
    }
    outcome(ok, parts.join(", "))
}

// 5. Adjacent-only model agrees with K = 2 when leakage is small.
fn adjacent_sufficiency() -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for &d in &GRID {
        let m = scenario(d);
        let k1 = isi::analytic_ber(&m).unwrap();
        if k1.max_leakage() > 0.1 {
            continue;
        }
        let k2 = isi::k_neighbor_ber(&m, 2).unwrap().ber;
        let rel = (k1.ber - k2).abs() / k1.ber;
        worst = worst.max(rel);
        ok &= rel <= 0.10;
        checked += 1;
    }
    outcome(ok, format!("{checked} distances with leakage <= 0.1, max relative gap {worst:.4}"))
}

fn synthetic_table(rng: &mut ChaCha8Rng, cam: &lighttrail::config::CameraConfig) -> PatternTable {
    let unit = cam.photon_energy() * 1e7;
    let n = rng.random_range(3..24);
    let sigma = rng.random_range(0.5..40.0);
    let segments = (0..n)
        .map(|j| {
            let taps = [rng.random_range(0.0..1.5), rng.random_range(0.0..3.0), rng.random_range(0.0..1.5)].map(|t| t * unit);
            let means: Vec<f64> = (0..8)
                .map(|p| {
                    let e: f64 = (0..3).filter(|b| p >> b & 1 == 1).map(|b| taps[b]).sum();
                    camera::pixel_response(e / cam.photon_energy(), cam)
                })
                .collect();
            SegmentPatterns {
                segment: j,
                threshold: isi::midpoint_threshold(&means, 1),
                means,
                sigmas: vec![sigma; 8],
            }
        })
        .collect();
    PatternTable { k: 1, sigma, segments }
}

// 6. Worst-case neighbor ordering.
fn worst_case_suite() -> Outcome {
    let mut failures = Vec::new();
    for &d in &GRID {
        if let Err(v) = isi::verify_worst_case(&isi::triplet_means(&scenario(d)).unwrap()) {
            failures.push(format!("{d} m: {v}"));
        }
    }
    let cam = SystemConfig::default().camera;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..1000 {
        if let Err(v) = isi::verify_worst_case(&synthetic_table(&mut rng, &cam)) {
            failures.push(format!("synthetic {i}: {v}"));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "9 rendered + 1000 synthetic tables ordered".to_string()
        } else {
            failures.join("; ")
        },
    )
}

// 7. Control-angle trends over distance and LED radius.
fn design_trends() -> (Outcome, Vec<design::DesignPoint>) {
    let cfg = SystemConfig::default();
    let leds: Vec<usize> = (1..=cfg.led_count()).collect();
    let points = design::design_sweep(&cfg, &GRID, &leds, cfg.analysis.target_ber).unwrap();
    let mut by_led: BTreeMap<usize, Vec<&design::DesignPoint>> = BTreeMap::new();
    for p in &points {
        by_led.entry(p.led).or_default().push(p);
    }
    let mut problems = Vec::new();
    if points.len() != 108 {
        problems.push(format!("{} rows", points.len()));
    }
    for p in points.iter().filter(|p| !p.feasible) {
        problems.push(format!("LED {} at {} m infeasible", p.led, p.distance));
    }
    for (led, row) in &by_led {
        for w in row.windows(2) {
            if w[1].control_angle < w[0].control_angle {
                problems.push(format!("LED {led}: angle shrinks {} -> {} m", w[0].distance, w[1].distance));
            }
        }
    }
    for (i, &d) in GRID.iter().enumerate() {
        let angles: Vec<f64> = by_led.values().map(|row| row[i].control_angle).collect();
        debug_assert!(by_led.values().all(|row| row[i].distance == d));
        if angles.windows(2).any(|w| w[1] > w[0]) {
            problems.push(format!("{d} m: outer LED needs a larger angle"));
        }
    }
    let js: Vec<String> = by_led
        .iter()
        .map(|(l, row)| format!("LED {l} J* {:?}", row.iter().map(|p| p.segments).collect::<Vec<_>>()))
        .collect();
    let detail = if problems.is_empty() {
        format!("108 rows; {}", js.join("; "))
    } else {
        problems.join("; ")
    };
    (outcome(problems.is_empty(), detail), points)
}

// 8. Throughput and optimality of the returned design.
fn throughput_check(points: &[design::DesignPoint]) -> Outcome {
    let cfg = SystemConfig::default();
    let base = design::throughput(PI / 9.0, 3.0).unwrap();
    let mut problems = Vec::new();
    if base != 54.0 {
        problems.push(format!("throughput(pi/9, 3) = {base}"));
    }
    for p in points.iter().filter(|p| [1, 2, 6, 12].contains(&p.led) && [46.0, 54.0, 62.0].contains(&p.distance)) {
        let c = cfg.with_distance(p.distance);
        let layout = render::project_geometry(&c, p.led).unwrap();
        let bound = (2.0 * PI * layout.image_radius).floor() as usize;
        let best = (2..=bound)
            .step_by(2)
            .filter(|&j| {
                let m = TrailModel::build(&c.with_segments(j), p.led).unwrap();
                isi::analytic_ber(&m).unwrap().ber <= cfg.analysis.target_ber
            })
            .max();
        let want = best.map(|j| 3.0 * j as f64).unwrap_or(0.0);
        if p.throughput != want || p.throughput != cfg.tx.rotations_per_second * p.segments as f64 {
            problems.push(format!("LED {} at {} m: {} bit/s, exhaustive best {want}", p.led, p.distance, p.throughput));
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "54 bit/s at pi/9; 12 designs match exhaustive search".to_string()
        } else {
            problems.join("; ")
        },
    )
}

// 9. Conservation and normalization.
fn conservation() -> Outcome {
    let mut worst = [0.0f64; 3];
    for &d in &GRID {
        for led in [1, 6, 12] {
            let m = TrailModel::build(&SystemConfig::default().with_distance(d), led).unwrap();
            let cfg = &m.config;
            let bits: Vec<bool> = (0..m.segments()).map(|j| j % 3 != 0).collect();
            let active = bits.iter().filter(|b| **b).count();
            let q = render::accumulate_with_coverage(cfg, &m.coverage, &bits, m.exposure).unwrap();
            let p = render::radiometric_distribution(&q, cfg.camera.luminous_efficacy, cfg.camera.luminous_efficiency).unwrap();
            let total = cfg.tx.frame_power(active) * m.exposure;
            let l = render::allocate_power(&p, total).unwrap();
            worst[0] = worst[0].max((l.grid.sum() - total).abs() / total);
            worst[1] = worst[1].max((m.kernel.weights.iter().sum::<f64>() - 1.0).abs());
            let g = &l.grid;
            let flat = Grid::filled(g.x0, g.y0, g.width, g.height, 0.37);
            let r = render::received_power(&l, &flat, &m.kernel).unwrap();
            worst[2] = worst[2].max((r.grid.sum() - 0.37 * g.sum()).abs() / (0.37 * g.sum()));
        }
    }
    outcome(
        worst.iter().all(|w| *w <= 1e-12),
        format!(
            "allocation {:e}, kernel sum {:e}, flat-gain blur {:e}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str], threads: Option<&str>) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lighttrail"));
    cmd.args(args).arg("--out").arg(dir);
    if let Some(t) = threads {
        cmd.args(["--threads", t]);
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn csv_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "pgm"))
        .map(|p| (PathBuf::from(p.file_name().unwrap()), std::fs::read(&p).unwrap()))
        .collect()
}

// 10. Byte-identical outputs across runs and worker counts.
fn determinism() -> Outcome {
    let commands: [&[&str]; 6] = [
        &["render", "--random", "--seed", "7"],
        &["histogram", "--seed", "7"],
        &["ber", "--seed", "7", "--distances", "56:62:2", "--modes", "analytic,mc,no_isi,k2,all_segment", "--n-bits", "100000"],
        &["optimize", "--seed", "7", "--distances", "46:62:8", "--throughput"],
        &["optimize", "--seed", "7", "--distances", "50,58", "--led", "3"],
        &["validate", "--seed", "7"],
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    let mut files = 0;
    for (i, args) in commands.iter().enumerate() {
        let runs = [None, None, Some("1"), Some("8")];
        let mut outputs = Vec::new();
        for (k, threads) in runs.iter().enumerate() {
            let dir = tmp.path().join(format!("{i}-{k}"));
            if let Err(e) = run_cli(&dir, args, *threads) {
                problems.push(e);
                break;
            }
            outputs.push(csv_files(&dir));
        }
        if outputs.len() < runs.len() {
            continue;
        }
        if outputs[0].is_empty() {
            problems.push(format!("{}: no CSV output", args[0]));
        }
        files += outputs[0].len();
        for (k, o) in outputs.iter().enumerate().skip(1) {
            if o != &outputs[0] {
                problems.push(format!("{} differs in run {k}", args[0]));
            }
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{} commands, {files} files identical over 4 runs each", commands.len())
        } else {
            problems.join("; ")
        },
    )
}

fn report(n: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if let Some(l) = limit {
        if took > l {
            o.pass = false;
            o.detail.push_str(&format!("; exceeded {} s", l.as_secs()));
        }
    }
    println!(
        "criterion {n:>2} {:<4} {name} ({:.1} s): {}",
        if o.pass { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        o.detail
    );
    o.pass
}

fn main() {
    let mut results = Vec::new();
    results.push(report(1, "trimodal histogram", Some(Duration::from_secs(120)), trimodal_histogram));
    results.push(report(2, "analytic vs Monte Carlo", Some(Duration::from_secs(1800)), analytic_mc_agreement));
    results.push(report(3, "oracle equivalence", Some(Duration::from_secs(60)), oracle_equivalence));
    results.push(report(4, "no-ISI underestimation", None, no_isi_underestimates));
    results.push(report(5, "adjacent-only sufficiency", None, adjacent_sufficiency));
    results.push(report(6, "worst-case neighbors", Some(Duration::from_secs(60)), worst_case_suite));
    let mut points = Vec::new();
    results.push(report(7, "design trends", Some(Duration::from_secs(600)), || {
        let (o, p) = design_trends();
        points = p;
        o
    }));
    results.push(report(8, "throughput", None, || throughput_check(&points)));
    results.push(report(9, "conservation", None, conservation));
    results.push(report(10, "determinism", None, determinism));
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
