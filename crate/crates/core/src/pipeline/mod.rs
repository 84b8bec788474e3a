//! Frame-by-frame orchestration: classify, route, restore or blend, log.

mod bench;
mod config;
mod eval;
mod run;
mod source;

use std::path::PathBuf;

pub use bench::{bench, BenchReport, StageStats};
pub use config::{BlendConfig, PipelineConfig};
pub use eval::{evaluate, ClassRow, EvalReport};
pub use run::{
    percentile, run_frames, run_pipeline, Engine, FrameRecord, KindWeight, LatencyStats, Processed, Summary, Timings,
};
pub use source::{frames, Frame, FrameOrigin, FrameRef, SynthSpec};

use crate::blend::BlendError;
use crate::classify::ClassifyError;
use crate::features::TooSmall;
use crate::imaging::ImageError;
use crate::metrics::MetricsError;
use crate::restore::RestoreError;
use crate::route::RouteError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("cannot load model {0}: {1}")]
    ModelLoadFailure(PathBuf, #[source] ClassifyError),
    #[error("frame source is empty")]
    EmptySource,
    #[error("no files match {0}")]
    NoMatches(String),
    #[error("bad frame source: {0}")]
    Source(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("missing setting `{0}`")]
    MissingSetting(&'static str),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Features(#[from] TooSmall),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Blend(#[from] BlendError),
    #[error(transparent)]
    Restore(#[from] RestoreError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}
