use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::degrade::{apply_degradation_with, DegradeOptions};
use super::split::{stratified_indices, SplitError};
use super::{DegradationKind, SynthError};
use crate::imaging::{load_image, resize, save_image, Image, ResizeMethod};
use crate::rng::{mix, seeded};

pub type LabelSet = BTreeSet<DegradationKind>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Combo {
    pub kinds: Vec<DegradationKind>,
    pub count: usize,
}

/// What to generate. Counts are exact; severities are drawn uniformly from
/// `severity` independently per label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Recipe {
    pub per_kind: BTreeMap<DegradationKind, usize>,
    pub combos: Vec<Combo>,
    /// Undegraded samples with an empty label set.
    pub clean: usize,
    pub severity: [f64; 2],
    pub working_size: [usize; 2],
    pub sr_upsample: bool,
}

impl Default for Recipe {
    fn default() -> Self {
        Self {
            per_kind: BTreeMap::new(),
            combos: Vec::new(),
            clean: 0,
            severity: [0.5, 0.9],
            working_size: [128, 128],
            sr_upsample: false,
        }
    }
}

impl Recipe {
    /// `count` single-label samples of every kind.
    pub fn uniform(count: usize) -> Self {
        Self {
            per_kind: DegradationKind::ALL.iter().map(|&k| (k, count)).collect(),
            ..Self::default()
        }
    }

    /// Parses a TOML recipe, e.g. `clean = 50` and `[per_kind] Denoising = 100`.
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let recipe: Self = toml::from_str(text).map_err(|e| SynthError::InvalidRecipe(e.to_string()))?;
        recipe.validate()?;
        Ok(recipe)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| SynthError::Io(path.to_path_buf(), e))?;
        Self::from_toml(&text)
    }

    /// Label sets of all samples in generation order.
    pub fn label_plan(&self) -> Vec<LabelSet> {
        let mut plan = Vec::new();
        for (&k, &n) in &self.per_kind {
            plan.extend(std::iter::repeat_n(LabelSet::from([k]), n));
        }
        for combo in &self.combos {
            let set: LabelSet = combo.kinds.iter().copied().collect();
            plan.extend(std::iter::repeat_n(set, combo.count));
        }
        plan.extend(std::iter::repeat_n(LabelSet::new(), self.clean));
        plan
    }

    fn validate(&self) -> Result<(), SynthError> {
        let [lo, hi] = self.severity;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(SynthError::InvalidRecipe(format!("severity range {lo}..{hi}")));
        }
        if self.working_size.iter().any(|&d| d < 16) {
            return Err(SynthError::InvalidRecipe("working size must be at least 16x16".into()));
        }
        if let Some(c) = self.combos.iter().find(|c| c.kinds.iter().collect::<BTreeSet<_>>().len() != c.kinds.len()) {
            return Err(SynthError::InvalidRecipe(format!("combo repeats a kind: {:?}", c.kinds)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub image: Image,
    pub labels: LabelSet,
    pub severities: BTreeMap<DegradationKind, f64>,
    pub clean_ref: Option<PathBuf>,
    pub seed: u64,
    /// Where the degraded image is stored, if it has been written.
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub samples: Vec<LabeledSample>,
    pub manifest_path: Option<PathBuf>,
}

/// One manifest line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub labels: Vec<DegradationKind>,
    pub severities: BTreeMap<DegradationKind, f64>,
    pub seed: u64,
    pub clean_ref: Option<String>,
}

fn relative_to(path: &Path, base: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).to_string_lossy().into_owned()
}

fn resolve(entry: &str, base: &Path) -> PathBuf {
    let p = Path::new(entry);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn strata(&self) -> BTreeMap<LabelSet, usize> {
        let mut m = BTreeMap::new();
        for s in &self.samples {
            *m.entry(s.labels.clone()).or_insert(0) += 1;
        }
        m
    }

    /// Number of samples carrying each kind (multi-label samples count once per label).
    pub fn label_counts(&self) -> BTreeMap<DegradationKind, usize> {
        let mut m = BTreeMap::new();
        for s in &self.samples {
            for &k in &s.labels {
                *m.entry(k).or_insert(0) += 1;
            }
        }
        m
    }

    pub fn manifest_entries(&self, base: &Path) -> Vec<ManifestEntry> {
        self.samples
            .iter()
            .map(|s| ManifestEntry {
                path: s.path.as_deref().map(|p| relative_to(p, base)).unwrap_or_default(),
                labels: s.labels.iter().copied().collect(),
                severities: s.severities.clone(),
                seed: s.seed,
                clean_ref: s.clean_ref.as_deref().map(|p| relative_to(p, base)),
            })
            .collect()
    }

    /// Writes a JSON-lines manifest. Paths under the manifest's directory are
    /// stored relative to it.
    pub fn write_manifest(&mut self, path: impl AsRef<Path>) -> Result<(), SynthError> {
        let path = path.as_ref();
        let unwritable = |e: std::io::Error| SynthError::UnwritableManifest(path.to_path_buf(), e);
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let mut out = BufWriter::new(fs::File::create(path).map_err(unwritable)?);
        for entry in self.manifest_entries(&base) {
            let line = serde_json::to_string(&entry).expect("manifest entries serialize");
            writeln!(out, "{line}").map_err(unwritable)?;
        }
        out.flush().map_err(unwritable)?;
        self.manifest_path = Some(path.to_path_buf());
        Ok(())
    }

    pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>, SynthError> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| SynthError::Io(path.to_path_buf(), e))?;
        let mut entries = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| SynthError::Io(path.to_path_buf(), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&line)
                .map_err(|e| SynthError::Manifest { line: n + 1, message: e.to_string() })?;
            entries.push(entry);
        }
        Ok(entries)
    }

    /// Loads a manifest and decodes every referenced image.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let entries = Self::read_manifest(path)?;
        let samples = entries
            .into_par_iter()
            .map(|e| {
                let img_path = resolve(&e.path, &base);
                let image = load_image(&img_path)?;
                Ok(LabeledSample {
                    image,
                    labels: e.labels.into_iter().collect(),
                    severities: e.severities,
                    clean_ref: e.clean_ref.map(|c| resolve(&c, &base)),
                    seed: e.seed,
                    path: Some(img_path),
                })
            })
            .collect::<Result<Vec<_>, SynthError>>()?;
        if samples.is_empty() {
            return Err(SynthError::EmptyCorpus);
        }
        Ok(Self { samples, manifest_path: Some(path.to_path_buf()) })
    }

    fn subset(&self, idx: &[usize]) -> Corpus {
        Corpus {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            manifest_path: None,
        }
    }
}

/// Stratifies on the full label set; returns `(train, test)`.
pub fn stratified_split(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus), SplitError> {
    let keys: Vec<&LabelSet> = corpus.samples.iter().map(|s| &s.labels).collect();
    let (train, test) = stratified_indices(&keys, test_fraction, seed)?;
    Ok((corpus.subset(&train), corpus.subset(&test)))
}

fn is_image_file(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("ppm" | "png")
    )
}

/// Decodable `.ppm`/`.png` files of a directory, in lexicographic order.
pub fn load_clean_dir(dir: &Path) -> Result<Vec<(String, Image)>, SynthError> {
    let rd = fs::read_dir(dir).map_err(|e| SynthError::Io(dir.to_path_buf(), e))?;
    let mut paths: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| is_image_file(p)).collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        match load_image(&p) {
            Ok(img) => {
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                out.push((stem, img));
            }
            Err(e) => log::warn!("skipping {}: {e}", p.display()),
        }
    }
    if out.is_empty() {
        return Err(SynthError::EmptyCleanSet(dir.to_path_buf()));
    }
    Ok(out)
}

pub fn build_corpus(clean_dir: &Path, recipe: &Recipe, seed: u64, out_dir: &Path) -> Result<Corpus, SynthError> {
    let cleans = load_clean_dir(clean_dir)?;
    build_corpus_from_images(&cleans, recipe, seed, out_dir)
}

/// Degrades `cleans` according to `recipe`, writes every image plus a
/// `manifest.jsonl` under `out_dir`, and returns the corpus.
///
/// Sample `i` draws all of its randomness from `mix(seed, i)`, so the result
/// is independent of how the work is scheduled.
pub fn build_corpus_from_images(
    cleans: &[(String, Image)],
    recipe: &Recipe,
    seed: u64,
    out_dir: &Path,
) -> Result<Corpus, SynthError> {
    if cleans.is_empty() {
        return Err(SynthError::EmptyCleanSet(out_dir.to_path_buf()));
    }
    recipe.validate()?;
    let plan = recipe.label_plan();
    if plan.is_empty() {
        return Err(SynthError::InvalidRecipe("recipe produces no samples".into()));
    }

    let manifest_path = out_dir.join("manifest.jsonl");
    let unwritable = |e| SynthError::UnwritableManifest(manifest_path.clone(), e);
    let clean_dir = out_dir.join("clean");
    let img_dir = out_dir.join("images");
    fs::create_dir_all(&clean_dir).map_err(unwritable)?;
    fs::create_dir_all(&img_dir).map_err(unwritable)?;

    let [ww, wh] = recipe.working_size;
    let resized: Vec<(PathBuf, Image)> = cleans
        .par_iter()
        .map(|(name, img)| {
            let path = clean_dir.join(format!("{name}.ppm"));
            let img = resize(img, ww, wh, ResizeMethod::Bicubic);
            save_image(&img, &path)?;
            Ok((path, img))
        })
        .collect::<Result<_, SynthError>>()?;

    let opts = DegradeOptions { sr_upsample: recipe.sr_upsample };
    let [lo, hi] = recipe.severity;
    let samples = plan
        .into_par_iter()
        .enumerate()
        .map(|(i, labels)| {
            let sample_seed = mix(seed, i as u64);
            let mut rng = seeded(sample_seed);
            let src = rng.random_range(0..resized.len());
            let (clean_path, clean) = &resized[src];
            let mut severities = BTreeMap::new();
            let mut image = clean.clone();
            // kind order; super-resolution (last index) shrinks the frame last
            for &k in &labels {
                let s = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                severities.insert(k, s);
                image = apply_degradation_with(&image, k, s, mix(sample_seed, 1 + k.index() as u64), opts);
            }
            let path = img_dir.join(format!("{i:06}.ppm"));
            save_image(&image, &path)?;
            Ok(LabeledSample {
                image,
                labels,
                severities,
                clean_ref: Some(clean_path.clone()),
                seed: sample_seed,
                path: Some(path),
            })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;

    let mut corpus = Corpus { samples, manifest_path: None };
    corpus.write_manifest(&manifest_path)?;
    Ok(corpus)
}
