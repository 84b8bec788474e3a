//! Degradation-aware image restoration.
//!
//! A frame is diagnosed by a multi-label classifier over hand-crafted
//! features, routed by a global probability threshold to zero, one or
//! several per-degradation restorers, and the restorer outputs are blended
//! with weights proportional to the classifier's confidence.

pub mod blend;
pub mod classify;
pub mod features;
pub mod imaging;
pub mod metrics;
pub mod pipeline;
pub mod restore;
pub mod rng;
pub mod route;
pub mod synth;

pub use imaging::{Image, ImageError, Plane};
pub use synth::DegradationKind;
