use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::imaging::load_image;
use crate::metrics::{
    accuracy, confusion, conventional_specificity, psnr, sensitivity, specificity, ssim, ConfusionMatrix,
};
use crate::synth::{Corpus, DegradationKind, K};

use super::run::Engine;
use super::PipelineError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub kind: DegradationKind,
    pub samples: usize,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub conventional_specificity: Option<f64>,
    pub mean_psnr_input: Option<f64>,
    pub mean_psnr_output: Option<f64>,
    pub mean_ssim_output: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Argmax accuracy over single-label samples.
    pub accuracy: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub classes: Vec<ClassRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvalReport {
    /// One row per kind; the final `overall` row carries accuracy in the
    /// sensitivity column (accuracy is the prevalence-weighted mean sensitivity).
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "kind,samples,sensitivity,specificity,conventional_specificity,mean_psnr_input,mean_psnr_output,mean_ssim_output\n",
        );
        for r in &self.classes {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.kind,
                r.samples,
                cell(r.sensitivity),
                cell(r.specificity),
                cell(r.conventional_specificity),
                cell(r.mean_psnr_input),
                cell(r.mean_psnr_output),
                cell(r.mean_ssim_output),
            ));
        }
        let n: usize = self.classes.iter().map(|r| r.samples).sum();
        s.push_str(&format!("overall,{n},{},,,,,\n", cell(self.accuracy)));
        s
    }
}

struct SampleResult {
    truth: usize,
    predicted: usize,
    psnr_in: Option<f64>,
    psnr_out: Option<f64>,
    ssim_out: Option<f64>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Classification statistics over the single-label samples of `corpus`, and
/// restoration quality against each sample's clean reference when present.
/// Frames are processed exactly as in a pipeline run.
pub fn evaluate(engine: &Engine, corpus: &Corpus, with_quality: bool) -> Result<EvalReport, PipelineError> {
    let results: Vec<SampleResult> = corpus
        .samples
        .par_iter()
        .filter(|s| s.labels.len() == 1)
        .map(|s| -> Result<SampleResult, PipelineError> {
            let truth = s.labels.iter().next().expect("single label").index();
            let mut r = SampleResult { truth, predicted: 0, psnr_in: None, psnr_out: None, ssim_out: None };
            if !with_quality || s.clean_ref.is_none() {
                r.predicted = engine.probabilities(&s.image)?.argmax().index();
                return Ok(r);
            }
            let processed = engine.process(&s.image)?;
            r.predicted = processed.probs.argmax().index();
            let clean = load_image(s.clean_ref.as_ref().expect("checked"))?;
            let output = processed.output.as_ref().unwrap_or(&s.image);
            if s.image.dims() == clean.dims() {
                r.psnr_in = Some(psnr(&s.image, &clean)?.value());
            }
            if output.dims() == clean.dims() {
                r.psnr_out = Some(psnr(output, &clean)?.value());
                r.ssim_out = ssim(output, &clean).ok();
            }
            Ok(r)
        })
        .collect::<Result<_, _>>()?;

    let truth: Vec<usize> = results.iter().map(|r| r.truth).collect();
    let predicted: Vec<usize> = results.iter().map(|r| r.predicted).collect();
    let c = confusion(&truth, &predicted, K)?;
    let classes = DegradationKind::ALL
        .into_iter()
        .map(|kind| {
            let i = kind.index();
            let mine = || results.iter().filter(move |r| r.truth == i);
            ClassRow {
                kind,
                samples: mine().count(),
                sensitivity: sensitivity(&c, i).ok(),
                specificity: specificity(&c, i).ok(),
                conventional_specificity: conventional_specificity(&c, i).ok(),
                mean_psnr_input: mean(mine().filter_map(|r| r.psnr_in).filter(|v| v.is_finite())),
                mean_psnr_output: mean(mine().filter_map(|r| r.psnr_out).filter(|v| v.is_finite())),
                mean_ssim_output: mean(mine().filter_map(|r| r.ssim_out)),
            }
        })
        .collect();
    Ok(EvalReport { accuracy: accuracy(&c).ok(), confusion: c, classes })
}
