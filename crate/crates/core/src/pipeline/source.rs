//! Frame sources: a directory, a glob pattern, an explicit comma-separated
//! file list, or `synth:` frames generated on the fly.
//!
//! Synthetic spec: `synth:n=10,kinds=Denoising+Deraining,severity=0.9,size=128,seed=3`.
//! `kinds` may be `clean` (the default) for undegraded frames; `size` is
//! `N` or `WxH`. Frame `i` uses scene seed `mix(seed, i)`.

use std::path::{Path, PathBuf};

use crate::imaging::{encode_ppm, load_image, Image};
use crate::rng::mix;
use crate::synth::{apply_degradation, scene, DegradationKind, LabelSet};

use super::PipelineError;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub count: usize,
    pub kinds: LabelSet,
    pub severity: f64,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn parse(spec: &str) -> Result<Self, PipelineError> {
        let bad = |msg: String| PipelineError::Source(format!("synth:{spec}: {msg}"));
        let mut out = SynthSpec { count: 10, kinds: LabelSet::new(), severity: 0.7, width: 128, height: 128, seed: 0 };
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| bad(format!("expected key=value, got {item:?}")))?;
            match k.trim() {
                "n" | "count" => out.count = v.parse().map_err(|_| bad(format!("count {v:?}")))?,
                "severity" => out.severity = v.parse().map_err(|_| bad(format!("severity {v:?}")))?,
                "seed" => out.seed = v.parse().map_err(|_| bad(format!("seed {v:?}")))?,
                "size" => {
                    let (w, h) = v.split_once('x').unwrap_or((v, v));
                    out.width = w.parse().map_err(|_| bad(format!("size {v:?}")))?;
                    out.height = h.parse().map_err(|_| bad(format!("size {v:?}")))?;
                }
                "kinds" | "kind" => {
                    out.kinds = if v.eq_ignore_ascii_case("clean") {
                        LabelSet::new()
                    } else {
                        v.split('+')
                            .map(|s| s.parse::<DegradationKind>().map_err(|e| bad(e.to_string())))
                            .collect::<Result<_, _>>()?
                    }
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        if out.width < crate::features::MIN_SIDE || out.height < crate::features::MIN_SIDE {
            return Err(bad("size must be at least 16".into()));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FrameOrigin {
    File(PathBuf),
    Synth { spec: SynthSpec, index: usize },
}

/// One entry of a frame stream; the image is read on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRef {
    pub index: usize,
    pub origin: FrameOrigin,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub image: Image,
    /// Ground-truth label set when the source knows it.
    pub truth: Option<LabelSet>,
    /// The undegraded frame when the source knows it.
    pub clean: Option<Image>,
}

impl FrameRef {
    /// Path for files, `synth:<index>` otherwise.
    pub fn name(&self) -> String {
        match &self.origin {
            FrameOrigin::File(p) => p.display().to_string(),
            FrameOrigin::Synth { index, .. } => format!("synth:{index}"),
        }
    }

    pub fn load(&self) -> Result<Frame, PipelineError> {
        match &self.origin {
            FrameOrigin::File(p) => Ok(Frame { image: load_image(p)?, truth: None, clean: None }),
            FrameOrigin::Synth { spec, index } => {
                let seed = mix(spec.seed, *index as u64);
                let clean = scene::generate(spec.width, spec.height, seed);
                let mut image = clean.clone();
                for &k in &spec.kinds {
                    image = apply_degradation(&image, k, spec.severity, mix(seed, 1 + k.index() as u64));
                }
                Ok(Frame { image, truth: Some(spec.kinds.clone()), clean: Some(clean) })
            }
        }
    }

    /// Bytes of the frame as it came in: the file itself or its PPM encoding.
    pub fn raw_bytes(&self, frame: &Frame) -> Result<Vec<u8>, PipelineError> {
        match &self.origin {
            FrameOrigin::File(p) => std::fs::read(p).map_err(|e| PipelineError::Io(p.clone(), e)),
            FrameOrigin::Synth { .. } => Ok(encode_ppm(&frame.image)),
        }
    }

    /// Output file name: index prefix keeps names unique across directories.
    pub fn output_name(&self) -> String {
        match &self.origin {
            FrameOrigin::File(p) => {
                let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                format!("{:06}_{name}", self.index)
            }
            FrameOrigin::Synth { index, .. } => format!("{:06}_synth_{index}.ppm", self.index),
        }
    }
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("ppm" | "png")
    )
}

fn indexed(paths: Vec<PathBuf>) -> Vec<FrameRef> {
    paths
        .into_iter()
        .enumerate()
        .map(|(index, p)| FrameRef { index, origin: FrameOrigin::File(p) })
        .collect()
}

/// Resolves a source spec to an ordered frame list.
pub fn frames(spec: &str) -> Result<Vec<FrameRef>, PipelineError> {
    if let Some(rest) = spec.strip_prefix("synth:") {
        let s = SynthSpec::parse(rest)?;
        return Ok((0..s.count)
            .map(|index| FrameRef { index, origin: FrameOrigin::Synth { spec: s.clone(), index } })
            .collect());
    }
    if spec.contains(['*', '?', '[']) {
        let mut paths: Vec<PathBuf> = glob::glob(spec)
            .map_err(|e| PipelineError::Source(format!("{spec}: {e}")))?
            .filter_map(Result::ok)
            .filter(|p| p.is_file())
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(PipelineError::NoMatches(spec.to_string()));
        }
        return Ok(indexed(paths));
    }
    let path = Path::new(spec);
    if path.is_dir() {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| PipelineError::Io(path.to_path_buf(), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_image(p))
            .collect();
        paths.sort();
        return Ok(indexed(paths));
    }
    let paths: Vec<PathBuf> = spec.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect();
    if let Some(missing) = paths.iter().find(|p| !p.is_file()) {
        return Err(PipelineError::Source(format!("no such file: {}", missing.display())));
    }
    Ok(indexed(paths))
}
