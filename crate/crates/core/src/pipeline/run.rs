use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blend::{aggregate_active, ActiveSet, BlendMode};
use crate::classify::{load_model, OutputMode, ProbabilityVector, ResidualHead};
use crate::features::extract_at_working_size;
use crate::imaging::{save_image, Image};
use crate::restore::RestorerRegistry;
use crate::route::{decide, RouterConfig, SeverityBand, Verdict, VerdictRecord};
use crate::synth::DegradationKind;

use super::source::{frames, FrameRef};
use super::{PipelineConfig, PipelineError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub classify_ms: f64,
    pub restore_ms: f64,
    pub blend_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindWeight {
    pub kind: DegradationKind,
    pub weight: f64,
}

/// Result of pushing one image through classify, route and restore.
#[derive(Clone, Debug, PartialEq)]
pub struct Processed {
    pub probs: ProbabilityVector,
    pub verdict: Verdict,
    /// `None` when the frame is undamaged and passes through untouched.
    pub output: Option<Image>,
    pub weights: Vec<KindWeight>,
    pub warnings: Vec<String>,
    pub timings: Timings,
}

/// Shared read-only state for processing frames.
#[derive(Clone, Debug)]
pub struct Engine {
    pub model: ResidualHead,
    pub router: RouterConfig,
    pub registry: RestorerRegistry,
    pub working_size: (usize, usize),
    pub blend_mode: BlendMode,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

impl Engine {
    pub fn new(model: ResidualHead, cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        Ok(Self {
            model,
            router: cfg.router()?,
            registry: cfg.registry()?,
            working_size: (cfg.working_size[0], cfg.working_size[1]),
            blend_mode: cfg.blend.mode,
        })
    }

    /// Loads the model named by `cfg.model`.
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let path = cfg.model.as_ref().ok_or(PipelineError::MissingSetting("model"))?;
        let model = load_model(path).map_err(|e| PipelineError::ModelLoadFailure(path.clone(), e))?;
        Self::new(model, cfg)
    }

    pub fn probabilities(&self, image: &Image) -> Result<ProbabilityVector, PipelineError> {
        let f = extract_at_working_size(image, self.working_size)?;
        Ok(self.model.forward(&f, OutputMode::Sigmoid).1)
    }

    pub fn classify(&self, image: &Image) -> Result<(ProbabilityVector, Verdict), PipelineError> {
        let probs = self.probabilities(image)?;
        let verdict = decide(&probs, &self.router)?;
        Ok((probs, verdict))
    }

    pub fn process(&self, image: &Image) -> Result<Processed, PipelineError> {
        let start = Instant::now();
        let (probs, verdict) = self.classify(image)?;
        let mut timings = Timings { classify_ms: ms(start), ..Timings::default() };
        let mut warnings = Vec::new();
        let mut weights = Vec::new();
        let output = match &verdict {
            Verdict::Undamaged => None,
            Verdict::Single { kind, .. } => {
                let t = Instant::now();
                let (out, warning) = self.registry.restore_reporting(*kind, image)?;
                timings.restore_ms = ms(t);
                warnings.extend(warning);
                weights.push(KindWeight { kind: *kind, weight: 1.0 });
                Some(out)
            }
            Verdict::Multiple(active) => {
                let set = ActiveSet::from_entries(active.clone())?;
                let t = Instant::now();
                let outcome = aggregate_active(image, &set, &self.registry, self.blend_mode)?;
                let elapsed = ms(t);
                timings.blend_ms = outcome.fuse_ms.min(elapsed);
                timings.restore_ms = elapsed - timings.blend_ms;
                warnings.extend(outcome.warnings);
                weights.extend(set.kinds().zip(&set.weights).map(|(kind, &weight)| KindWeight { kind, weight }));
                Some(outcome.image)
            }
        };
        timings.total_ms = ms(start);
        Ok(Processed { probs, verdict, output, weights, warnings, timings })
    }
}

/// One line of the JSON-lines run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: usize,
    pub source: String,
    #[serde(flatten)]
    pub verdict: Option<VerdictRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probabilities: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<KindWeight>,
    /// Kinds in the tolerable band; reported, not restored.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tolerable: Vec<DegradationKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timings: Timings,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
}

impl LatencyStats {
    pub fn of(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            p50_ms: percentile(&v, 0.5),
            p95_ms: percentile(&v, 0.95),
            mean_ms: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

/// Nearest-rank percentile of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub frames: usize,
    pub undamaged: usize,
    pub single: usize,
    pub multiple: usize,
    pub errors: usize,
    pub tolerable_flagged: usize,
    pub latency: LatencyStats,
    pub elapsed_s: f64,
    pub fps: f64,
}

fn process_frame(engine: &Engine, frame: &FrameRef, out_dir: &Path) -> FrameRecord {
    let start = Instant::now();
    let mut record = FrameRecord {
        frame_id: frame.index,
        source: frame.name(),
        verdict: None,
        probabilities: Vec::new(),
        weights: Vec::new(),
        tolerable: Vec::new(),
        warnings: Vec::new(),
        output: None,
        error: None,
        timings: Timings::default(),
    };
    let result = (|| -> Result<(), PipelineError> {
        let loaded = frame.load()?;
        let p = engine.process(&loaded.image)?;
        let out_path = out_dir.join(frame.output_name());
        match &p.output {
            None => {
                let bytes = frame.raw_bytes(&loaded)?;
                std::fs::write(&out_path, bytes).map_err(|e| PipelineError::Io(out_path.clone(), e))?;
            }
            Some(img) => save_image(img, &out_path)?,
        }
        record.verdict = Some(VerdictRecord::new(&p.verdict, &p.probs, &engine.router));
        record.probabilities = p.probs.values().to_vec();
        record.tolerable = DegradationKind::ALL
            .into_iter()
            .filter(|&k| engine.router.band(p.probs.get(k)) == Ok(SeverityBand::Tolerable))
            .collect();
        record.weights = p.weights;
        record.warnings = p.warnings;
        record.output = Some(out_path);
        record.timings = p.timings;
        Ok(())
    })();
    if let Err(e) = result {
        log::warn!("frame {} ({}): {e}", frame.index, record.source);
        record.error = Some(e.to_string());
    }
    record.timings.total_ms = ms(start);
    record
}

/// Processes `frames` on `jobs` threads, writing outputs into `out_dir` and
/// one JSON line per frame to `log`, in frame order.
pub fn run_frames(
    engine: &Engine,
    frames: &[FrameRef],
    out_dir: &Path,
    log: &mut dyn Write,
    jobs: usize,
) -> Result<Summary, PipelineError> {
    if frames.is_empty() {
        return Err(PipelineError::EmptySource);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| PipelineError::Io(out_dir.to_path_buf(), e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let log_err = |e| PipelineError::Io(PathBuf::from("<log>"), e);
    let start = Instant::now();
    let mut summary = Summary { frames: frames.len(), ..Summary::default() };
    let mut totals = Vec::with_capacity(frames.len());
    // bounded look-ahead keeps memory flat on long streams
    for batch in frames.chunks(jobs.max(1) * 4) {
        let records: Vec<FrameRecord> =
            pool.install(|| batch.par_iter().map(|f| process_frame(engine, f, out_dir)).collect());
        for r in records {
            match (&r.error, r.verdict.as_ref().map(|v| v.verdict.as_str())) {
                (Some(_), _) => summary.errors += 1,
                (_, Some("Undamaged")) => summary.undamaged += 1,
                (_, Some("Single")) => summary.single += 1,
                _ => summary.multiple += 1,
            }
            if !r.tolerable.is_empty() {
                summary.tolerable_flagged += 1;
            }
            totals.push(r.timings.total_ms);
            serde_json::to_writer(&mut *log, &r).map_err(|e| log_err(e.into()))?;
            log.write_all(b"\n").map_err(log_err)?;
        }
    }
    log.flush().map_err(log_err)?;
    summary.elapsed_s = start.elapsed().as_secs_f64();
    summary.latency = LatencyStats::of(&totals);
    summary.fps = frames.len() as f64 / summary.elapsed_s.max(1e-9);
    Ok(summary)
}

/// Runs the configured source end to end. The log goes to `cfg.log`, or
/// `<out>/log.jsonl` when unset.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Summary, PipelineError> {
    let engine = Engine::from_config(cfg)?;
    let source = cfg.source.as_deref().ok_or(PipelineError::MissingSetting("source"))?;
    let out = cfg.out.as_ref().ok_or(PipelineError::MissingSetting("out"))?;
    let list = frames(source)?;
    if list.is_empty() {
        return Err(PipelineError::EmptySource);
    }
    std::fs::create_dir_all(out).map_err(|e| PipelineError::Io(out.clone(), e))?;
    let log_path = cfg.log.clone().unwrap_or_else(|| out.join("log.jsonl"));
    if let Some(parent) = log_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| PipelineError::Io(parent.to_path_buf(), e))?;
    }
    let file = std::fs::File::create(&log_path).map_err(|e| PipelineError::Io(log_path.clone(), e))?;
    let mut writer = std::io::BufWriter::new(file);
    run_frames(&engine, &list, out, &mut writer, cfg.thread_count())
}
