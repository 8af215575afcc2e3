//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. `EVSR_ACCEPTANCE=1,2,9` restricts the run to the listed criteria.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use evsr::format::{self, Format};
use evsr_core::assemble::assemble;
use evsr_core::event::group_by_pixel;
use evsr_core::metrics::{bin, rmse};
use evsr_core::nn::{gradient_check, seeded_rng, uniform, LayerSpec, Network, NetworkSpec, Rng, Tensor};
use evsr_core::resample::Transform;
use evsr_core::spatial::SpatialConfig;
use evsr_core::synth::{downsample_stream, simulate, upsample_stream_nearest, SynthConfig};
use evsr_core::temporal::{predict_timestamps, train_temporal, TemporalConfig, TimestampField};
use evsr_core::voxel::{decode, encode, VoxelCoding};
use evsr_core::{Event, EventStream, SensorGeometry};

const BINS: usize = 16;
const VELOCITY: (f64, f64) = (0.75, 0.0);
const DURATION_MS: f64 = 10.0;
const REFRACTORY_US: u64 = 100;
const SEEDS: [u64; 3] = [0, 1, 2];
const MARGIN: f64 = 0.10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn bar(side: u32) -> EventStream {
    simulate(&SynthConfig::bar(SensorGeometry::new(side, side).unwrap(), VELOCITY, DURATION_MS)).unwrap()
}

fn random_stream(rng: &mut Rng) -> EventStream {
    let pick = |rng: &mut Rng, n: u64| (uniform(rng) * n as f64) as u64;
    let (w, h) = (1 + pick(rng, 24) as u32, 1 + pick(rng, 24) as u32);
    let n = pick(rng, 300) as usize;
    let events: Vec<Event> = (0..n)
        .map(|_| {
            let p = if uniform(rng) < 0.5 { -1 } else { 1 };
            Event::new(pick(rng, w as u64) as u16, pick(rng, h as u64) as u16, pick(rng, 50_000), p)
        })
        .collect();
    let t_end = events.iter().map(|e| e.t).max().unwrap_or(0) + pick(rng, 3);
    EventStream::new(events, SensorGeometry::new(w, h).unwrap(), Some(t_end)).unwrap()
}

fn corpus() -> Vec<EventStream> {
    let mut rng = seeded_rng(2024);
    let mut streams: Vec<EventStream> = (0..200).map(|_| random_stream(&mut rng)).collect();
    streams.push(bar(32));
    streams.push(downsample_stream(&bar(64), 2, REFRACTORY_US).unwrap());
    streams
}

struct Runner {
    dir: tempfile::TempDir,
}

impl Runner {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn evsr(&self, args: &[&str]) -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_evsr")).args(args).output().map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(format!("evsr {args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
        }
    }

    fn save(&self, stream: &EventStream, name: &str) -> PathBuf {
        let path = self.path(name);
        format::write(stream, &path, Format::Auto).unwrap();
        path
    }

    /// Default-configured SR of `input` through the command line; returns the output path.
    fn sr(&self, input: &Path, scale: usize, kernel: &str, seed: u64, out: &str) -> Result<PathBuf, String> {
        let path = self.path(out);
        let (scale, seed) = (scale.to_string(), seed.to_string());
        self.evsr(&[
            "sr",
            "--in",
            input.to_str().unwrap(),
            "--scale",
            &scale,
            "--kernel",
            kernel,
            "--seed",
            &seed,
            "--out",
            path.to_str().unwrap(),
        ])?;
        Ok(path)
    }

    /// SR against naive upsampling on the 64x64 bar at each scale and seed.
    fn beats_naive(&self, kernel: &str) -> Outcome {
        let hr = bar(64);
        let mut lines = Vec::new();
        let mut pass = true;
        for scale in [2usize, 4] {
            let lr = downsample_stream(&hr, scale, REFRACTORY_US).unwrap();
            let naive = rmse(&upsample_stream_nearest(&lr, scale).unwrap(), &hr, BINS).unwrap();
            let input = self.save(&lr, &format!("lr{scale}.evb"));
            for seed in SEEDS {
                let name = format!("sr_{kernel}_{scale}_{seed}.evb");
                let sr = match self.sr(&input, scale, kernel, seed, &name) {
                    Ok(p) => rmse(&format::read(&p, Format::Auto).unwrap(), &hr, BINS).unwrap(),
                    Err(e) => return outcome(false, e),
                };
                let margin = 1.0 - sr / naive;
                pass &= margin >= MARGIN;
                lines.push(format!("{scale}x seed {seed}: {sr:.4} vs {naive:.4} ({:+.1}%)", 100.0 * margin));
            }
        }
        outcome(pass, lines.join("; "))
    }
}

fn criterion_1() -> Outcome {
    let mut failures = Vec::new();
    let streams = corpus();
    for (i, s) in streams.iter().enumerate() {
        let grid = encode(s, VoxelCoding::default()).unwrap();
        let decoded = decode(&grid);
        let trains = group_by_pixel(s);
        if decoded.len() != trains.len()
            || trains.iter().any(|(px, t)| decoded.get(px) != Some(&t.polarities().collect::<Vec<_>>()))
        {
            failures.push(format!("voxel #{i}"));
        }
        let bytes = format::to_binary(s);
        let text = format::to_text(s);
        let b2 = format::from_binary(&bytes).map(|r| format::to_binary(&r));
        let t2 = format::from_text(&text).map(|r| format::to_text(&r));
        if b2.ok().as_ref() != Some(&bytes) || t2.ok().as_ref() != Some(&text) {
            failures.push(format!("format #{i}"));
        }
        let back = assemble(&grid, &TimestampField::from_stream(s), s.t_end(), s.geometry()).unwrap();
        if &back != s {
            failures.push(format!("assemble #{i}"));
        }
    }
    outcome(failures.is_empty(), format!("{} streams; failures: {failures:?}", streams.len()))
}

fn criterion_2() -> Outcome {
    let mut rng = seeded_rng(7);
    let mut random = |shape: Vec<usize>, lo: f64, hi: f64| {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| lo + (hi - lo) * uniform(&mut rng)).collect()).unwrap()
    };
    let conv = |i, o, padding| LayerSpec::Conv3d { in_channels: i, out_channels: o, kernel: 3, padding };
    let cases: Vec<(&str, Network, Tensor, Option<usize>)> = vec![
        ("conv3d", Network::new(NetworkSpec::new(vec![conv(2, 3, 1)]), 2, 1).unwrap(), random(vec![2, 3, 4, 5], -1.0, 1.0), None),
        ("conv3d valid", Network::new(NetworkSpec::new(vec![conv(1, 2, 0)]), 1, 2).unwrap(), random(vec![1, 4, 5, 4], -1.0, 1.0), None),
        (
            "dense+relu",
            Network::new(NetworkSpec::new(vec![LayerSpec::Dense { inputs: 5, outputs: 4 }, LayerSpec::Relu]), 5, 3).unwrap(),
            random(vec![4, 5], -1.0, 1.0),
            None,
        ),
        (
            "dense+leaky",
            Network::new(NetworkSpec::new(vec![LayerSpec::Dense { inputs: 5, outputs: 4 }, LayerSpec::LeakyRelu(0.1)]), 5, 4)
                .unwrap(),
            random(vec![4, 5], -1.0, 1.0),
            None,
        ),
        (
            "skip add/concat",
            Network::new(
                NetworkSpec::new(vec![
                    LayerSpec::SkipSave,
                    conv(2, 2, 1),
                    LayerSpec::SkipAdd,
                    LayerSpec::SkipSave,
                    conv(2, 1, 1),
                    LayerSpec::SkipConcat,
                ]),
                2,
                5,
            )
            .unwrap(),
            random(vec![2, 2, 3, 3], -1.0, 1.0),
            None,
        ),
        (
            "pool/upsample",
            Network::new(NetworkSpec::new(vec![conv(1, 2, 1), LayerSpec::AvgPool2, LayerSpec::Upsample2]), 1, 6).unwrap(),
            random(vec![1, 2, 4, 6], -1.0, 1.0),
            None,
        ),
        (
            "spatial 4x8x8",
            Network::new(SpatialConfig::default().network_spec(), 1, 21).unwrap(),
            random(vec![1, 4, 8, 8], 0.25, 0.75),
            Some(48),
        ),
        (
            "temporal L=4",
            Network::new(TemporalConfig::default().network_spec(4), 6, 22).unwrap(),
            random(vec![16, 6], 0.0, 1.0),
            Some(48),
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (name, net, x, limit)) in cases.iter().enumerate() {
        let r = gradient_check(net, x, 1e-5, *limit, 100 + i as u64).unwrap();
        pass &= r.max_rel_error <= 1e-4 && r.checked > 0 && r.kinks * 4 <= r.checked;
        parts.push(format!("{name} {:.1e} ({} probes, {} kinks)", r.max_rel_error, r.checked, r.kinks));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_3(run: &Runner) -> Outcome {
    let input = run.path("bar32.txt");
    if let Err(e) = run.evsr(&["synth", "--size", "32x32", "--out", input.to_str().unwrap()]) {
        return outcome(false, e);
    }
    let src = format::read(&input, Format::Auto).unwrap();
    match run.sr(&input, 1, "bicubic", 0, "identity.txt") {
        Ok(out) => {
            let e = rmse(&format::read(&out, Format::Auto).unwrap(), &src, BINS).unwrap();
            outcome(e <= 0.05, format!("rmse {e:.4} (limit 0.05)"))
        }
        Err(e) => outcome(false, e),
    }
}

fn criterion_5() -> Outcome {
    let lr = downsample_stream(&bar(64), 2, REFRACTORY_US).unwrap();
    let grid = encode(&lr, VoxelCoding::default()).unwrap();
    let model = train_temporal(&lr, &grid, &TemporalConfig::default()).unwrap();
    let truth = TimestampField::from_stream(&lr);
    let g = lr.geometry();

    // Prediction on the source grid queries exactly the LR pixel centres.
    let own = predict_timestamps(&model, &grid, lr.t_end()).unwrap();
    let (mut hit, mut total) = (0usize, 0usize);
    for y in 0..g.height() {
        for x in 0..g.width() {
            for k in 0..grid.fill_count(x, y) as usize {
                total += 1;
                hit += ((own.get(x, y, k) - truth.get(x, y, k)).abs() <= 0.05) as usize;
            }
        }
    }
    let a = hit as f64 / total as f64;

    let scale = 2;
    let sr_grid = encode(&upsample_stream_nearest(&lr, scale).unwrap(), VoxelCoding::default()).unwrap();
    let sr = predict_timestamps(&model, &sr_grid, lr.t_end()).unwrap();
    let sg = sr_grid.geometry();
    let span = |i: usize, extent: usize| {
        let u = ((i as f64 + 0.5) / scale as f64 - 0.5).clamp(0.0, (extent - 1) as f64);
        (u.floor() as usize, u.ceil() as usize)
    };
    let (mut inside, mut counted) = (0usize, 0usize);
    for y in 0..sg.height() {
        for x in 0..sg.width() {
            let (x0, x1) = span(x, g.width());
            let (y0, y1) = span(y, g.height());
            for k in 0..sr_grid.fill_count(x, y) as usize {
                let anchors: Vec<f64> = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)]
                    .iter()
                    .filter(|&&(ax, ay)| grid.fill_count(ax, ay) as usize > k)
                    .map(|&(ax, ay)| truth.get(ax, ay, k))
                    .collect();
                let lo = anchors.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = anchors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let v = sr.get(x, y, k);
                counted += 1;
                inside += (v >= lo - 0.1 && v <= hi + 0.1) as usize;
            }
        }
    }
    let b = inside as f64 / counted as f64;
    outcome(
        a >= 0.9 && b >= 0.8,
        format!(
            "(a) {:.1}% of {total} LR events within 0.05 (need 90%); (b) {:.1}% of {counted} subpixel events within anchors +-0.1 (need 80%)",
            100.0 * a,
            100.0 * b
        ),
    )
}

fn criterion_7(run: &Runner) -> Outcome {
    let input = run.path("lr2.evb");
    if !input.exists() {
        run.save(&downsample_stream(&bar(64), 2, REFRACTORY_US).unwrap(), "lr2.evb");
    }
    let a = run.sr(&input, 2, "bicubic", 0, "det_a.evb");
    let b = run.sr(&input, 2, "bicubic", 0, "det_b.evb");
    match (a, b) {
        (Ok(a), Ok(b)) => {
            let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
            outcome(a == b, format!("{} and {} bytes, identical: {}", a.len(), b.len(), a == b))
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}

fn criterion_8(run: &Runner) -> Outcome {
    let input = run.path("bar34.evb");
    let report = run.path("report34.txt");
    if let Err(e) = run.evsr(&["synth", "--size", "34x34", "--out", input.to_str().unwrap()]) {
        return outcome(false, e);
    }
    let t0 = Instant::now();
    let out = run.path("sr34.evb");
    let args = ["sr", "--in", input.to_str().unwrap(), "--scale", "2", "--out", out.to_str().unwrap(), "--report", report.to_str().unwrap()];
    if let Err(e) = run.evsr(&args) {
        return outcome(false, e);
    }
    let wall = t0.elapsed().as_secs_f64();
    let text = std::fs::read_to_string(report).unwrap();
    let field = |key: &str| {
        text.lines().find_map(|l| l.strip_prefix(key).and_then(|v| v.trim_start_matches(':').trim().parse::<f64>().ok()))
    };
    let (ts, tt) = (field("seconds_train_spatial").unwrap_or(f64::NAN), field("seconds_train_temporal").unwrap_or(f64::NAN));
    outcome(wall < 600.0, format!("spatial {ts:.1}s + temporal {tt:.1}s, whole run {wall:.1}s (limit 600s)"))
}

fn criterion_9() -> Outcome {
    let mut rng = seeded_rng(99);
    let mut bad = Vec::new();
    for i in 0..300 {
        let a = random_stream(&mut rng);
        let mut events = a.events().to_vec();
        let g = a.geometry();
        events.push(Event::new((g.width() - 1) as u16, 0, a.t_end() + 5, 1));
        let b = EventStream::new(events, g, None).unwrap();
        if rmse(&a, &a, BINS).unwrap() != 0.0 {
            bad.push(format!("identity #{i}"));
        }
        let (ab, ba) = (rmse(&a, &b, BINS).unwrap(), rmse(&b, &a, BINS).unwrap());
        if ab != ba || !(0.0..=1.0).contains(&ab) {
            bad.push(format!("symmetry #{i}"));
        }
        let bins = 1 + i % 32;
        if bin(&a, bins).unwrap().total() != a.len() as u64 {
            bad.push(format!("conservation #{i}"));
        }
        let (l, h, w) = (1 + i % 3, 1 + i % 7, 1 + i % 5);
        let t = Tensor::from_vec(vec![l, h, w], (0..l * h * w).map(|_| uniform(&mut rng)).collect()).unwrap();
        let twice = Transform::Rot180.apply(&Transform::Rot180.apply(&t).unwrap()).unwrap();
        if twice != t || Transform::ALL.iter().any(|tr| tr.inverse().apply(&tr.apply(&t).unwrap()).unwrap() != t) {
            bad.push(format!("group #{i}"));
        }
    }
    outcome(bad.is_empty(), format!("300 cases; failures: {bad:?}"))
}

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("EVSR_ACCEPTANCE").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let run = Runner { dir: tempfile::tempdir().unwrap() };
    type Check<'a> = (usize, &'a str, Option<f64>, Box<dyn Fn() -> Outcome + 'a>);
    let checks: Vec<Check> = vec![
        (1, "round trips", Some(10.0), Box::new(criterion_1)),
        (2, "gradient checks", Some(60.0), Box::new(criterion_2)),
        (3, "identity-scale fidelity", Some(300.0), Box::new(|| criterion_3(&run))),
        (4, "SR beats naive (bicubic)", Some(1200.0), Box::new(|| run.beats_naive("bicubic"))),
        (5, "temporal correlation", Some(600.0), Box::new(criterion_5)),
        (
            6,
            "kernel robustness (bilinear, random)",
            None,
            Box::new(|| {
                let (a, b) = (run.beats_naive("bilinear"), run.beats_naive("random"));
                outcome(a.pass && b.pass, format!("bilinear: {}; random: {}", a.detail, b.detail))
            }),
        ),
        (7, "determinism", None, Box::new(|| criterion_7(&run))),
        (8, "training cost at 34x34", None, Box::new(|| criterion_8(&run))),
        (9, "metric properties", Some(30.0), Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in &checks {
        if only.as_ref().is_some_and(|o| !o.contains(id)) {
            continue;
        }
        let t0 = Instant::now();
        let r = check();
        let secs = t0.elapsed().as_secs_f64();
        let in_time = limit.is_none_or(|l| secs < l);
        let pass = r.pass && in_time;
        failed += !pass as usize;
        let budget = limit.map_or(String::new(), |l| format!(" (limit {l:.0}s)"));
        println!("[{}] criterion {id}: {name}: {} [{secs:.1}s{budget}]", if pass { "PASS" } else { "FAIL" }, r.detail);
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
