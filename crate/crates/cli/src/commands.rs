use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use lighttrail::camera::NoiseModel;
use lighttrail::io::{self, BerRow};
use lighttrail::{design, isi, mc, SystemConfig, TrailModel};

use crate::checks::{self, Status};
use crate::manifest::RunManifest;
use crate::{BerArgs, BerMode, Common, Failure, HistogramArgs, OptimizeArgs, RenderArgs};

fn load_config(common: &Common) -> anyhow::Result<SystemConfig> {
    let cfg = match &common.config {
        Some(p) => SystemConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => SystemConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn scenario_led(common: &Common, cfg: &SystemConfig) -> anyhow::Result<usize> {
    let led = common.led.unwrap_or(cfg.analysis.led_index);
    cfg.rotation_radius(led)?;
    Ok(led)
}

fn require_seed(common: &Common, what: &str) -> anyhow::Result<u64> {
    common.seed.ok_or_else(|| anyhow!("{what} needs --seed"))
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_distances(arg: &str) -> anyhow::Result<Vec<f64>> {
    let num = |s: &str| -> anyhow::Result<f64> {
        let v: f64 = s.trim().parse().with_context(|| format!("bad distance {s:?}"))?;
        if !(v > 0.0 && v.is_finite()) {
            bail!("distance {v} must be positive");
        }
        Ok(v)
    };
    let parts: Vec<&str> = arg.split(':').collect();
    let out = match parts.as_slice() {
        [start, stop, step] => {
            let (a, b) = (num(start)?, num(stop)?);
            let s = num(step)?;
            if b < a {
                bail!("distance range {arg:?} is empty");
            }
            let n = ((b - a) / s + 1e-9).floor() as usize;
            (0..=n).map(|i| a + i as f64 * s).collect()
        }
        [_] => arg.split(',').map(num).collect::<anyhow::Result<Vec<_>>>()?,
        _ => bail!("distances must be start:stop:step or a comma list, got {arg:?}"),
    };
    Ok(out)
}

struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Outputs {
    fn new(common: &Common, command: &str, cfg: &SystemConfig) -> anyhow::Result<Self> {
        std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
        Ok(Outputs {
            dir: common.out.clone(),
            manifest: RunManifest::new(command, cfg.hash(), common.seed),
        })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> lighttrail::Result<()>) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush()?;
        self.manifest.outputs.push(path);
        Ok(())
    }

    fn finish(self) -> anyhow::Result<PathBuf> {
        self.manifest.write(&self.dir)
    }
}

fn parse_bits(s: &str, segments: usize) -> anyhow::Result<Vec<bool>> {
    let bits = s
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(anyhow!("bit string may only contain 0 and 1, found {other:?}")),
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    if bits.len() != segments {
        bail!("bit string has {} bits, the trail has J = {segments} segments", bits.len());
    }
    Ok(bits)
}

pub fn render(common: &Common, args: &RenderArgs) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let led = scenario_led(common, &cfg)?;
    let model = TrailModel::build(&cfg, led)?;
    let bits = match (&args.bits, args.random) {
        (Some(s), _) => parse_bits(s, model.segments())?,
        (None, true) => lighttrail::rng::CounterRng::new(require_seed(common, "render --random")?)
            .bits(0, model.segments()),
        (None, false) => return Err(anyhow!("render needs --bits or --random").into()),
    };
    let mut out = Outputs::new(common, "render", &cfg)?;
    let clean = model.capture(&bits, None, 0)?;
    out.write("frame_clean.pgm", |w| io::write_pgm(w, &clean.pv))?;
    if let Some(seed) = common.seed {
        let noise = NoiseModel::PixelDomain {
            sigma: isi::effective_sigma(&model)?,
            seed,
        };
        let noisy = model.capture(&bits, Some(&noise), 0)?;
        out.write("frame_noisy.pgm", |w| io::write_pgm(w, &noisy.pv))?;
    }
    out.write("layout.csv", |w| io::write_layout(w, &model.layout))?;
    let bit_string: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
    println!("LED {led}, J = {}, bits {bit_string}", model.segments());
    out.finish()?;
    Ok(())
}

pub fn histogram(common: &Common, args: &HistogramArgs) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let seed = require_seed(common, "histogram")?;
    let led = scenario_led(common, &cfg)?;
    let model = TrailModel::build(&cfg, led)?;
    let result = mc::run_mc(&model, args.n_bits, seed, &mc::McOptions::default())?;
    let table = isi::triplet_means(&model)?;
    let breakdown = isi::table_ber(&model, &table, 0.0);
    let expected = table.neighbor_state_means();
    let sigma = table.sigma;

    let mut rows = Vec::new();
    for class in 0..2 {
        let h = &result.histograms[class];
        if h.iter().sum::<u64>() == 0 {
            println!("class {class}: no samples");
            continue;
        }
        let modes = mc::histogram_modes(h)?;
        println!(
            "class {class}: {} modes at {:?}; expected (00, 01/10, 11) = {:.1?}, sigma' = {sigma:.3}",
            modes.len(),
            modes,
            expected[class]
        );
        for (i, m) in modes.iter().enumerate() {
            let nearest = expected[class]
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - m).abs().total_cmp(&(b.1 - m).abs()))
                .map(|(s, _)| s)
                .unwrap_or(0);
            rows.push((class, i, *m, nearest, expected[class][nearest]));
        }
    }

    let mut out = Outputs::new(common, "histogram", &cfg)?;
    out.write("histogram.csv", |w| io::write_histograms(w, &result.histograms))?;
    out.write("triplets.csv", |w| io::write_ber_breakdown(w, &table, &breakdown))?;
    out.write("modes.csv", |w| {
        writeln!(w, "class,mode,location,state,expected,within_2sigma")?;
        let states = ["00", "01/10", "11"];
        for (class, i, loc, s, e) in &rows {
            writeln!(w, "{class},{i},{loc},{},{e},{}", states[*s], (loc - e).abs() <= 2.0 * sigma)?;
        }
        Ok(())
    })?;
    out.finish()?;
    Ok(())
}

fn model_at(cfg: &SystemConfig, led: usize, d: f64) -> anyhow::Result<TrailModel> {
    Ok(TrailModel::build(&cfg.with_distance(d), led)?)
}

pub fn ber(common: &Common, args: &BerArgs) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let led = scenario_led(common, &cfg)?;
    let distances = parse_distances(&args.distances)?;
    let seed = if args.modes.contains(&BerMode::Mc) {
        Some(require_seed(common, "ber with mode mc")?)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut mc_rows = Vec::new();
    for &d in &distances {
        let model = model_at(&cfg, led, d)?;
        let leak = isi::analytic_ber(&model)?.max_leakage();
        for &mode in &args.modes {
            let mut row = BerRow {
                distance: d,
                mode: mode.name().to_string(),
                ber: 0.0,
                ci: None,
                n_bits: None,
                errors: None,
                max_leakage: leak,
            };
            match mode {
                BerMode::Analytic => row.ber = isi::analytic_ber(&model)?.ber,
                BerMode::NoIsi => row.ber = isi::k_neighbor_ber(&model, 0)?.ber,
                BerMode::K2 => row.ber = isi::k_neighbor_ber(&model, 2)?.ber,
                BerMode::AllSegment => {
                    row.ber = isi::k_neighbor_ber(&model, isi::all_segment_k(model.segments()))?.ber
                }
                BerMode::Mc => {
                    let r = mc::run_mc(&model, args.n_bits, seed.unwrap_or(0), &mc::McOptions::default())?;
                    row.ber = r.ber_hat;
                    row.ci = Some(r.ci95);
                    row.n_bits = Some(r.n_bits);
                    row.errors = Some(r.n_errors);
                    mc_rows.push((d, r));
                }
            }
            println!("D = {d} m  {:<12} BER = {:e}", row.mode, row.ber);
            rows.push(row);
        }
    }
    let mut out = Outputs::new(common, "ber", &cfg)?;
    out.write("ber.csv", |w| io::write_ber_table(w, &rows))?;
    if !mc_rows.is_empty() {
        out.write("mc_report.csv", |w| io::write_mc_report(w, &mc_rows))?;
    }
    out.finish()?;
    Ok(())
}

pub fn optimize(common: &Common, args: &OptimizeArgs) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let distances = parse_distances(&args.distances)?;
    let target = args.target_ber.unwrap_or(cfg.analysis.target_ber);
    let leds: Vec<usize> = match common.led {
        Some(l) => {
            cfg.rotation_radius(l)?;
            vec![l]
        }
        None => (1..=cfg.led_count()).collect(),
    };
    let points = design::design_sweep(&cfg, &distances, &leds, target)?;
    for p in &points {
        println!(
            "LED {:>2}  D = {:>5} m  J* = {:>3}  BER = {:.3e}  {:>6} bit/s{}",
            p.led,
            p.distance,
            p.segments,
            p.ber,
            p.throughput,
            if p.feasible { "" } else { "  (infeasible)" }
        );
    }
    let mut out = Outputs::new(common, "optimize", &cfg)?;
    out.write("design.csv", |w| io::write_design(w, &points))?;
    if args.throughput {
        let led = common.led.unwrap_or(1);
        let rows = distances
            .iter()
            .map(|&d| Ok((d, design::candidates(&cfg, led, d, target)?)))
            .collect::<lighttrail::Result<Vec<_>>>()?;
        out.write("throughput.csv", |w| io::write_candidates(w, led, &rows))?;
    }
    out.finish()?;
    Ok(())
}

pub fn validate(common: &Common) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let led = scenario_led(common, &cfg)?;
    let results = checks::run_all(&cfg, led)?;
    for c in &results {
        println!("{:<22} {:<8} {}", c.name, c.status.label(), c.detail);
    }
    let out_dir: &Path = &common.out;
    let mut out = Outputs::new(common, "validate", &cfg)?;
    out.write("validate.csv", |w| {
        writeln!(w, "check,status,detail")?;
        for c in &results {
            writeln!(w, "{},{},\"{}\"", c.name, c.status.label(), c.detail.replace('"', "'"))?;
        }
        Ok(())
    })?;
    out.finish()
        .with_context(|| format!("writing manifest to {}", out_dir.display()))?;
    let failed: Vec<&str> = results.iter().filter(|c| c.status == Status::Fail).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(failed.join(", ")))
    }
}
