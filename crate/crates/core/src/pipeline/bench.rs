use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::metrics::efficiency;
use crate::synth::LabelSet;

use super::run::{Engine, LatencyStats};
use super::source::{Frame, FrameRef};
use super::PipelineError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub stage: String,
    #[serde(flatten)]
    pub latency: LatencyStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub frames: usize,
    pub repetitions: usize,
    pub stages: Vec<StageStats>,
    /// Whole-pipeline frames per second.
    pub fps: f64,
    /// Frames per second of feature extraction plus the forward pass alone.
    pub classify_fps: f64,
    /// Mean wall time of one pass over all frames.
    pub elapsed_s: f64,
    /// Fraction of labelled frames whose active set equals the truth.
    pub accuracy: Option<f64>,
    /// `accuracy / elapsed_s`.
    pub efficiency: Option<f64>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,p50_ms,p95_ms,mean_ms\n");
        for st in &self.stages {
            s.push_str(&format!("{},{},{},{}\n", st.stage, st.latency.p50_ms, st.latency.p95_ms, st.latency.mean_ms));
        }
        s
    }
}

/// Times every stage over `repetitions` sequential passes. Frames are
/// decoded once up front and nothing is written to disk.
pub fn bench(engine: &Engine, frames: &[FrameRef], repetitions: usize) -> Result<BenchReport, PipelineError> {
    if frames.is_empty() {
        return Err(PipelineError::EmptySource);
    }
    let repetitions = repetitions.max(1);
    let loaded: Vec<Frame> = frames.iter().map(FrameRef::load).collect::<Result<_, _>>()?;
    let mut classify = Vec::new();
    let mut restore = Vec::new();
    let mut blend = Vec::new();
    let mut total = Vec::new();
    let mut correct = 0usize;
    let mut labelled = 0usize;
    let start = Instant::now();
    for rep in 0..repetitions {
        for frame in &loaded {
            let p = engine.process(&frame.image)?;
            classify.push(p.timings.classify_ms);
            total.push(p.timings.total_ms);
            if p.output.is_some() {
                restore.push(p.timings.restore_ms);
            }
            if p.weights.len() > 1 {
                blend.push(p.timings.blend_ms);
            }
            if let (0, Some(truth)) = (rep, &frame.truth) {
                labelled += 1;
                let predicted: LabelSet = p.verdict.active().iter().map(|a| a.kind).collect();
                correct += (&predicted == truth) as usize;
            }
        }
    }
    let wall = start.elapsed().as_secs_f64();
    let passes = (frames.len() * repetitions) as f64;
    let elapsed_s = wall / repetitions as f64;
    let accuracy = (labelled > 0).then(|| correct as f64 / labelled as f64);
    let efficiency = match accuracy {
        Some(a) => Some(efficiency(a, elapsed_s.max(f64::MIN_POSITIVE))?),
        None => None,
    };
    let stage = |name: &str, v: &[f64]| StageStats { stage: name.into(), latency: LatencyStats::of(v) };
    Ok(BenchReport {
        frames: frames.len(),
        repetitions,
        stages: vec![
            stage("classify", &classify),
            stage("restore", &restore),
            stage("blend", &blend),
            stage("total", &total),
        ],
        fps: passes / wall.max(1e-9),
        classify_fps: passes / (classify.iter().sum::<f64>() / 1e3).max(1e-9),
        elapsed_s,
        accuracy,
        efficiency,
    })
}
