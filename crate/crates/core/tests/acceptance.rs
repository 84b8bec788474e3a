//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use adaptive_restore::blend::aggregate;
use adaptive_restore::classify::{
    adam_step, sgd_momentum_step, train, Hyperparams, OptimizerState, OutputMode, ProbabilityVector, ResidualHead,
    INPUTS,
};
use adaptive_restore::imaging::{resize, save_image, Image, ResizeMethod};
use adaptive_restore::metrics::{accuracy, psnr, sensitivity, specificity, ConfusionMatrix};
use adaptive_restore::pipeline::{run_pipeline, Engine, FrameRecord, PipelineConfig};
use adaptive_restore::restore::{restore, RestoreError, RestorerRegistry};
use adaptive_restore::route::{band, decide, RouterConfig, SeverityBand, Verdict};
use adaptive_restore::synth::{
    apply_degradation, build_corpus_from_images, scene, stratified_split, DegradationKind, Recipe, K,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    ensure(start.elapsed() < limit, || format!("took {:.2?}, limit {limit:?}", start.elapsed()))
}

// 1. confusion-matrix formulas against counts over the underlying pairs
fn formulas() -> Outcome {
    let start = Instant::now();
    let c = ConfusionMatrix::from_rows(&[vec![8, 2], vec![1, 9]]);
    ensure(accuracy(&c) == Ok(0.85), || "worked accuracy".into())?;
    ensure(sensitivity(&c, 0) == Ok(0.8), || "worked sensitivity".into())?;
    ensure(specificity(&c, 1) == Ok(9.0 / 11.0), || "worked specificity".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..1000 {
        let rows: Vec<Vec<u64>> = (0..7).map(|_| (0..7).map(|_| rng.random_range(0..6)).collect()).collect();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (t, row) in rows.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                pairs.extend(std::iter::repeat_n((t, p), n as usize));
            }
        }
        pairs.shuffle(&mut rng);
        let c = ConfusionMatrix::from_rows(&rows);
        let count = |f: &dyn Fn(&(usize, usize)) -> bool| pairs.iter().filter(|p| f(p)).count();
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);

        let acc = ratio(count(&|&(t, p)| t == p), pairs.len());
        ensure(accuracy(&c).ok() == acc, || format!("case {case}: accuracy"))?;
        for k in 0..7 {
            let hit = count(&|&(t, p)| t == k && p == k);
            let sens = ratio(hit, count(&|&(t, _)| t == k));
            let spec = ratio(hit, count(&|&(_, p)| p == k));
            ensure(sensitivity(&c, k).ok() == sens, || format!("case {case}: sensitivity({k})"))?;
            ensure(specificity(&c, k).ok() == spec, || format!("case {case}: specificity({k})"))?;
        }
    }
    within(Duration::from_secs(5), start)?;
    Ok(format!("1000 matrices exact, {:.2?}", start.elapsed()))
}

// 2. verdict equals the count of classes at or above theta
fn router() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid = [0.0, 0.3, 0.5, 0.6, 0.84, 0.85, 0.86, 0.99, 1.0];
    for theta in [0.5, 0.85, 0.99] {
        let cfg = RouterConfig::with_theta(theta).map_err(|e| e.to_string())?;
        for case in 0..100_000 {
            // a third of the draws land exactly on or next to the boundary
            let p: [f64; K] = std::array::from_fn(|_| match rng.random_range(0..3) {
                0 => theta,
                1 => grid[rng.random_range(0..grid.len())],
                _ => rng.random_range(0.0..=1.0),
            });
            let expected = p.iter().filter(|&&v| v >= theta).count();
            let v = decide(&ProbabilityVector::sigmoid(p).unwrap(), &cfg).map_err(|e| e.to_string())?;
            let ok = match (&v, expected) {
                (Verdict::Undamaged, 0) => true,
                (Verdict::Single { kind, p: pk }, 1) => p[kind.index()] >= theta && *pk == p[kind.index()],
                (Verdict::Multiple(active), n) => n >= 2 && active.len() == n,
                _ => false,
            };
            ensure(ok, || format!("theta {theta}, case {case}: {p:?} gave {}", v.name()))?;
        }
    }
    within(Duration::from_secs(5), start)?;
    Ok(format!("3 x 100000 vectors, {:.2?}", start.elapsed()))
}

// 3. weighted blend against the per-pixel formula
fn aggregation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let theta = 0.85;
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let gain: [f64; K] = std::array::from_fn(|_| rng.random_range(0.2..1.2));
        let offset: [f64; K] = std::array::from_fn(|_| rng.random_range(-0.1..0.1));
        let stub = move |kind: DegradationKind, img: &Image| -> Result<Image, RestoreError> {
            Ok(img.map(|v| v * gain[kind.index()] + offset[kind.index()]))
        };
        // super-resolution stays inactive: it is composed after fusion, not blended
        let mut p: [f64; K] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        p[DegradationKind::SuperResolution.index()] = rng.random_range(0.0..theta);
        let forced = rng.random_range(0..K - 1);
        p[forced] = rng.random_range(theta..1.0);
        let img = scene::generate(rng.random_range(8..40), rng.random_range(8..40), case);
        let out = aggregate(&img, &ProbabilityVector::sigmoid(p).unwrap(), theta, &stub).map_err(|e| e.to_string())?;

        let mu: f64 = 1.0 / p.iter().filter(|&&v| v >= theta).sum::<f64>();
        // images hold samples in [0, 1], so each stub output is clamped
        let phi = |i: usize, x: f64| (x * gain[i] + offset[i]).clamp(0.0, 1.0);
        for (idx, (&x, &y)) in img.samples().iter().zip(out.samples()).enumerate() {
            let direct: f64 = (0..K).filter(|&i| p[i] >= theta).map(|i| p[i] * phi(i, x)).sum::<f64>() * mu;
            worst = worst.max((direct - y).abs());
            ensure((direct - y).abs() < 1e-12, || format!("case {case}, sample {idx}: {y} vs {direct}"))?;
        }
    }

    let reg = RestorerRegistry::default();
    let img = scene::generate(48, 32, 33);
    for kind in DegradationKind::ALL {
        let mut p = [0.1; K];
        p[kind.index()] = 0.93;
        let out = aggregate(&img, &ProbabilityVector::sigmoid(p).unwrap(), theta, &reg).map_err(|e| e.to_string())?;
        ensure(out == restore(kind, &img, &reg).unwrap(), || format!("single {kind} not bit-exact"))?;
    }

    let mut p = [0.2; K];
    p[0] = 0.9;
    p[4] = 0.85;
    let set = adaptive_restore::blend::weights(&ProbabilityVector::sigmoid(p).unwrap(), theta).map_err(|e| e.to_string())?;
    let w: Vec<f64> = set.weights.clone();
    ensure(
        (w[0] - 18.0 / 35.0).abs() < 1e-12 && (w[1] - 17.0 / 35.0).abs() < 1e-12,
        || format!("weights {w:?}"),
    )?;
    Ok(format!("20 fuzzed blends, max error {worst:.1e}; 7 single-active bit-exact; weights 18/35, 17/35"))
}

// 4. momentum and Adam updates
fn optimizers() -> Outcome {
    let mut s = OptimizerState::sgd_momentum(1, 0.1, 0.9).map_err(|e| e.to_string())?;
    let mut w = [0.0];
    sgd_momentum_step(&mut s, &mut w, &[1.0]).map_err(|e| e.to_string())?;
    ensure((w[0] + 0.01).abs() < 1e-15, || format!("single step moved to {}", w[0]))?;

    let mut s = OptimizerState::sgd_momentum(3, 0.03, 0.0).map_err(|e| e.to_string())?;
    let mut w = [0.5, -1.0, 2.0];
    let mut plain = w;
    for t in 0..100 {
        let grad = |v: &[f64; 3]| [v[0] - 0.2, (t as f64).cos() * v[1], v[2] * v[0]];
        let (g, gp) = (grad(&w), grad(&plain));
        sgd_momentum_step(&mut s, &mut w, &g).map_err(|e| e.to_string())?;
        for i in 0..3 {
            plain[i] -= 0.03 * gp[i];
        }
        ensure(w == plain, || format!("beta=0 diverged from SGD at step {t}"))?;
    }

    let mut s = OptimizerState::adam(2, 0.05);
    let mut w = [1.0, -0.5];
    let mut reached = None;
    for step in 1..=500 {
        let g = w;
        adam_step(&mut s, &mut w, &g).map_err(|e| e.to_string())?;
        if reached.is_none() && w[0].hypot(w[1]) < 1e-3 {
            reached = Some(step);
        }
    }
    let step = reached.ok_or_else(|| format!("Adam ended at |w| = {:.2e}", w[0].hypot(w[1])))?;
    Ok(format!("step -0.01; beta=0 equals SGD for 100 steps; Adam |w| < 1e-3 at step {step}"))
}

// 5. backprop against central differences
fn gradients() -> Outcome {
    let start = Instant::now();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for draw in 0..100u64 {
        let mode = if draw % 2 == 0 { OutputMode::Sigmoid } else { OutputMode::Softmax };
        let mut rng = ChaCha8Rng::seed_from_u64(500 + draw);
        let mut model = ResidualHead::init(32, draw);
        for p in model.params_mut().iter_mut() {
            *p += rng.random_range(-0.1..0.1);
        }
        let xs: Vec<[f64; INPUTS]> = (0..4).map(|_| std::array::from_fn(|_| rng.random_range(0.0..1.0))).collect();
        let ys: Vec<[f64; K]> = (0..4).map(|_| std::array::from_fn(|_| f64::from(rng.random_bool(0.3)))).collect();
        let batch: Vec<_> = xs.iter().zip(&ys).collect();
        let mut analytic = vec![0.0; model.params().len()];
        model.loss_and_grad(&batch, mode, &mut analytic);
        let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
        for i in 0..analytic.len() {
            let orig = model.params()[i];
            model.params_mut()[i] = orig + eps;
            let up = model.loss(&batch, mode);
            model.params_mut()[i] = orig - eps;
            let down = model.loss(&batch, mode);
            model.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            diff += (analytic[i] - numeric).powi(2);
            na += analytic[i].powi(2);
            nn += numeric.powi(2);
        }
        let rel = diff.sqrt() / (na.sqrt() + nn.sqrt());
        worst = worst.max(rel);
        ensure(rel < 1e-4, || format!("draw {draw} ({mode:?}): relative error {rel:.2e}"))?;
    }
    within(Duration::from_secs(30), start)?;
    Ok(format!("100 draws, worst relative error {worst:.2e}, {:.2?}", start.elapsed()))
}

// 6. desk-scale classifier on a 700-image corpus
fn classification(dir: &Path) -> Outcome {
    let build = Instant::now();
    let cleans: Vec<_> = (0..40).map(|i| (format!("s{i:02}"), scene::generate(128, 128, 40_000 + i))).collect();
    let recipe = Recipe { severity: [0.5, 0.9], ..Recipe::uniform(100) };
    let corpus = build_corpus_from_images(&cleans, &recipe, 7, &dir.join("corpus6")).map_err(|e| e.to_string())?;
    ensure(corpus.len() == 700, || format!("corpus has {} samples", corpus.len()))?;
    let (train_set, test_set) = stratified_split(&corpus, 0.2, 11).map_err(|e| e.to_string())?;
    let build = build.elapsed();

    let start = Instant::now();
    let hyper = Hyperparams { epochs: 35, batch_size: 64, learning_rate: 0.001, ..Default::default() };
    let (model, _) = train(&train_set, &hyper, OutputMode::Sigmoid).map_err(|e| e.to_string())?;
    let train_time = start.elapsed();

    let mut hits = 0;
    for s in &test_set.samples {
        let f = adaptive_restore::features::extract_features(&s.image).map_err(|e| e.to_string())?;
        let (_, p) = model.forward(&f, OutputMode::Sigmoid);
        hits += usize::from(s.labels.len() == 1 && s.labels.contains(&p.argmax()));
    }
    let acc = hits as f64 / test_set.len() as f64;
    let detail = format!(
        "test accuracy {acc:.3} ({hits}/{}), train {train_time:.2?}, corpus build {build:.2?}",
        test_set.len()
    );
    ensure(acc >= 0.85, || detail.clone())?;
    ensure(train_time < Duration::from_secs(300), || detail.clone())?;
    Ok(detail)
}

// 7. restorers improve PSNR on degraded scenes
fn restoration_quality() -> Outcome {
    let start = Instant::now();
    let reg = RestorerRegistry::default();
    let mut rates = Vec::new();
    let mut failed = Vec::new();
    for kind in DegradationKind::ALL {
        let mut wins = 0;
        for i in 0..50u64 {
            let clean = scene::generate(128, 128, 9000 + i);
            let deg = apply_degradation(&clean, kind, 0.6, 300 + i);
            let out = reg.builtin(kind, &deg).map_err(|e| e.to_string())?;
            let baseline = if kind == DegradationKind::SuperResolution {
                resize(&deg, 128, 128, ResizeMethod::Bicubic)
            } else {
                deg
            };
            let after = psnr(&out, &clean).map_err(|e| e.to_string())?.value();
            let before = psnr(&baseline, &clean).map_err(|e| e.to_string())?.value();
            let win = if kind == DegradationKind::SuperResolution { after >= before } else { after > before };
            wins += usize::from(win);
        }
        let need = if kind == DegradationKind::SuperResolution { 30 } else { 40 };
        if wins < need {
            failed.push(kind);
        }
        rates.push(format!("{kind} {wins}/50"));
    }
    let detail = format!("{}, {:.2?}", rates.join(", "), start.elapsed());
    ensure(failed.is_empty(), || detail.clone())?;
    within(Duration::from_secs(180), start)?;
    Ok(detail)
}

// 8. severity band boundaries
fn bands() -> Outcome {
    let cases = [
        (0.3, SeverityBand::None),
        (0.4999, SeverityBand::None),
        (0.5, SeverityBand::Tolerable),
        (0.6, SeverityBand::Tolerable),
        (0.8499, SeverityBand::Tolerable),
        (0.85, SeverityBand::Significant),
        (1.0, SeverityBand::Significant),
    ];
    for (p, expect) in cases {
        let got = band(p).map_err(|e| e.to_string())?;
        ensure(got == expect, || format!("{p} -> {got:?}, expected {expect:?}"))?;
    }
    Ok("0.3 None, 0.6 Tolerable, 0.85 Significant (and both edges)".into())
}

fn pass_through_model(dir: &Path) -> Result<ResidualHead, String> {
    let cleans: Vec<_> = (0..30).map(|i| (format!("c{i}"), scene::generate(128, 128, 700 + i))).collect();
    let recipe = Recipe { clean: 80, ..Recipe::uniform(60) };
    let corpus = build_corpus_from_images(&cleans, &recipe, 21, &dir.join("corpus9")).map_err(|e| e.to_string())?;
    let (model, _) = train(&corpus, &Hyperparams { seed: 2, ..Default::default() }, OutputMode::Sigmoid).map_err(|e| e.to_string())?;
    Ok(model)
}

// 9. identical logs across thread counts; undamaged frames copied verbatim
fn determinism(dir: &Path, model: &ResidualHead) -> Outcome {
    let model_path = dir.join("model9.adrm");
    adaptive_restore::classify::save_model(model, &model_path).map_err(|e| e.to_string())?;
    let frames = dir.join("frames9");
    std::fs::create_dir_all(&frames).map_err(|e| e.to_string())?;
    for i in 0..24u64 {
        let clean = scene::generate(128, 128, 60_000 + i);
        let img = match i % 3 {
            0 => clean,
            1 => apply_degradation(&clean, DegradationKind::Denoising, 0.9, i),
            _ => apply_degradation(&clean, DegradationKind::from_index((i % 7) as usize).unwrap(), 0.8, i),
        };
        save_image(&img, frames.join(format!("f{i:02}.ppm"))).map_err(|e| e.to_string())?;
    }
    let run = |jobs: usize| -> Result<Vec<serde_json::Value>, String> {
        let out = dir.join(format!("out9_{jobs}"));
        let cfg = PipelineConfig {
            model: Some(model_path.clone()),
            source: Some(frames.to_string_lossy().into_owned()),
            out: Some(out.clone()),
            jobs,
            ..Default::default()
        };
        run_pipeline(&cfg).map_err(|e| e.to_string())?;
        let log = std::fs::read_to_string(out.join("log.jsonl")).map_err(|e| e.to_string())?;
        let mut undamaged = 0;
        let mut values = Vec::new();
        for line in log.lines() {
            let rec: FrameRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
            if rec.verdict.as_ref().is_some_and(|v| v.verdict == "Undamaged") {
                let output = rec.output.as_ref().ok_or("undamaged frame without output")?;
                let same = std::fs::read(&rec.source).ok() == std::fs::read(output).ok();
                ensure(same, || format!("{} not byte-identical", rec.source))?;
                undamaged += 1;
            }
            let mut v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
            let obj = v.as_object_mut().unwrap();
            obj.remove("timings");
            obj.remove("output");
            values.push(v);
        }
        ensure(undamaged > 0, || format!("jobs {jobs}: no undamaged frames to check"))?;
        Ok(values)
    };
    let one = run(1)?;
    let eight = run(8)?;
    ensure(one == eight, || "logs differ between --jobs 1 and --jobs 8".into())?;
    let undamaged = one.iter().filter(|v| v["verdict"] == "Undamaged").count();
    Ok(format!("{} frames, logs equal at jobs 1 and 8, {undamaged} undamaged outputs byte-identical", one.len()))
}

// 10. throughput at 256x256, sequential, one thread
fn throughput(model: &ResidualHead) -> Outcome {
    let engine = Engine::new(model.clone(), &PipelineConfig::default()).map_err(|e| e.to_string())?;
    let frames: Vec<Image> = (0..30).map(|i| scene::generate(256, 256, 80_000 + i)).collect();
    for f in frames.iter().take(3) {
        engine.probabilities(f).map_err(|e| e.to_string())?;
    }
    let start = Instant::now();
    for f in &frames {
        engine.probabilities(f).map_err(|e| e.to_string())?;
    }
    let classify_fps = frames.len() as f64 / start.elapsed().as_secs_f64();

    // classify, then the single restorer for that frame's degradation
    let mut slowest = (f64::INFINITY, DegradationKind::Denoising);
    for kind in DegradationKind::ALL {
        let degraded: Vec<Image> = frames.iter().take(10).enumerate().map(|(i, f)| apply_degradation(f, kind, 0.6, i as u64)).collect();
        let start = Instant::now();
        for img in &degraded {
            engine.classify(img).map_err(|e| e.to_string())?;
            restore(kind, img, &engine.registry).map_err(|e| e.to_string())?;
        }
        let fps = degraded.len() as f64 / start.elapsed().as_secs_f64();
        if fps < slowest.0 {
            slowest = (fps, kind);
        }
    }
    let detail = format!("classify {classify_fps:.1} fps; single-restoration path {:.1} fps (slowest kind {})", slowest.0, slowest.1);
    ensure(classify_fps >= 30.0 && slowest.0 >= 5.0, || detail.clone())?;
    Ok(detail)
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    let model9 = catch_unwind(|| pass_through_model(d)).unwrap_or_else(|_| Err("training panicked".into()));

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("confusion-matrix formulas", Box::new(formulas)),
        ("router equivalence", Box::new(router)),
        ("aggregation fidelity", Box::new(aggregation)),
        ("optimizer fidelity", Box::new(optimizers)),
        ("gradient check", Box::new(gradients)),
        ("desk-scale classification", Box::new(|| classification(d))),
        ("restoration quality", Box::new(restoration_quality)),
        ("threshold bands", Box::new(bands)),
        ("determinism and pass-through", Box::new(|| determinism(d, model9.as_ref().map_err(Clone::clone)?))),
        ("throughput", Box::new(|| throughput(model9.as_ref().map_err(Clone::clone)?))),
    ];

    let mut failures = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", n + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {}: FAIL {name}: {detail}", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
