//! Labeled degraded-image generation and stratified corpora.

mod corpus;
mod degrade;
mod kind;
pub mod scene;
mod split;

use std::path::PathBuf;

pub use corpus::{
    build_corpus, build_corpus_from_images, load_clean_dir, stratified_split, Combo, Corpus, LabelSet, LabeledSample,
    ManifestEntry, Recipe,
};
pub use degrade::{
    apply_degradation, apply_degradation_with, downsample_box2, motion_kernel, rain_streak_count, DegradeOptions,
    NOISE_SIGMA_MAX,
};
pub(crate) use degrade::interleave;
pub use kind::{DegradationKind, UnknownKind, K};
pub use split::{stratified_indices, test_counts, SplitError};

use crate::imaging::ImageError;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("no decodable images in {0}")]
    EmptyCleanSet(PathBuf),
    #[error("cannot write manifest {0}: {1}")]
    UnwritableManifest(PathBuf, #[source] std::io::Error),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Split(#[from] SplitError),
}

/// Writes `count` generated scenes as `scene_NNNN.ppm` into `dir`.
pub fn write_scene_set(dir: &std::path::Path, count: usize, width: usize, height: usize, seed: u64) -> Result<(), SynthError> {
    std::fs::create_dir_all(dir).map_err(|e| SynthError::Io(dir.to_path_buf(), e))?;
    for i in 0..count {
        let img = scene::generate(width, height, crate::rng::mix(seed, i as u64));
        crate::imaging::save_image(&img, dir.join(format!("scene_{i:04}.ppm")))?;
    }
    Ok(())
}
