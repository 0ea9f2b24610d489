//! Calibrated zero-shot prediction and CZSL/GZSL metrics.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::data::{Dataset, TensorData, REGION_ATTRIBUTES};
use crate::error::{Error, Result};
use crate::losses::calibration_offsets;
use crate::model::{forward, ForwardTrace, ModelParams};
use crate::ndmath::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Candidates are the unseen classes only.
    #[default]
    Czsl,
    /// Candidates are all classes.
    Gzsl,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "czsl" => Ok(Mode::Czsl),
            "gzsl" => Ok(Mode::Gzsl),
            _ => Err(Error::Argument(format!(
                "mode must be czsl or gzsl, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Czsl => "czsl",
            Mode::Gzsl => "gzsl",
        })
    }
}

/// Fusion weights for the two embeddings plus the candidate set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub mode: Mode,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            alpha1: 0.9,
            alpha2: 0.1,
            mode: Mode::Czsl,
        }
    }
}

impl PredictConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha1 >= 0.0 && self.alpha2 >= 0.0) || (self.alpha1 == 0.0 && self.alpha2 == 0.0)
        {
            return Err(Error::Argument(format!(
                "fusion weights must be non-negative and not both zero, got ({}, {})",
                self.alpha1, self.alpha2
            )));
        }
        Ok(())
    }

    pub fn with_mode(self, mode: Mode) -> Self {
        Self { mode, ..self }
    }
}

/// `(α₁ψ + α₂Ψ)ᵀ z^c + 𝕀[c ∈ unseen]` for every class, with `𝕀 = ±1`.
pub fn calibrated_scores(
    psi: &[f64],
    psi_mapped: &[f64],
    z: &Matrix,
    unseen: &[usize],
    cfg: &PredictConfig,
) -> Result<Vec<f64>> {
    if psi.len() != psi_mapped.len() {
        return Err(Error::Shape {
            op: "calibrated_scores embeddings",
            lhs: (psi.len(), 1),
            rhs: (psi_mapped.len(), 1),
        });
    }
    let fused: Vec<f64> = psi
        .iter()
        .zip(psi_mapped)
        .map(|(a, b)| cfg.alpha1 * a + cfg.alpha2 * b)
        .collect();
    let raw = z.matvec(&fused)?;
    let offsets = calibration_offsets(z.rows(), unseen);
    Ok(raw.iter().zip(&offsets).map(|(s, o)| s + o).collect())
}

/// Index of the largest score among `candidates`; ties go to the smallest
/// class index.
pub fn argmax_over(scores: &[f64], candidates: &[usize]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for &c in candidates {
        if c >= scores.len() {
            return Err(Error::Argument(format!("candidate class {c} out of range")));
        }
        best = match best {
            Some(b) if scores[b] > scores[c] || (scores[b] == scores[c] && b < c) => Some(b),
            _ => Some(c),
        };
    }
    best.ok_or_else(|| Error::Argument("empty candidate set".into()))
}

/// Predicted class for one image.
pub fn predict(
    trace: &ForwardTrace,
    z: &Matrix,
    seen: &[usize],
    unseen: &[usize],
    cfg: &PredictConfig,
) -> Result<usize> {
    let scores = calibrated_scores(trace.psi(), trace.psi_mapped(), z, unseen, cfg)?;
    match cfg.mode {
        Mode::Czsl => argmax_over(&scores, unseen),
        Mode::Gzsl => {
            let all: Vec<usize> = seen.iter().chain(unseen).copied().collect();
            argmax_over(&scores, &all)
        }
    }
}

/// `2SU / (S + U)`, or 0 when both are 0.
pub fn harmonic_mean(seen: f64, unseen: f64) -> Result<f64> {
    for (name, v) in [("S", seen), ("U", unseen)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Argument(format!(
                "{name} must be in [0, 1], got {v}"
            )));
        }
    }
    if seen + unseen == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * seen * unseen / (seen + unseen))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassAccuracy {
    pub class_id: usize,
    /// `"unseen"` or `"seen"`.
    pub split: &'static str,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// CZSL per-class top-1 accuracy on unseen classes.
    pub acc: f64,
    /// GZSL per-class accuracy on unseen test samples.
    pub unseen: f64,
    /// GZSL per-class accuracy on seen test samples.
    pub seen: f64,
    pub harmonic: f64,
    /// Per-class accuracies for the report's mode.
    pub per_class: Vec<ClassAccuracy>,
    pub mode: Mode,
}

/// Mean over classes of per-class top-1 accuracy. Classes with no samples in
/// `idx` are skipped.
fn per_class_accuracy(
    idx: &[usize],
    labels: &[usize],
    split: &'static str,
    mut predict: impl FnMut(usize) -> Result<usize>,
) -> Result<(f64, Vec<ClassAccuracy>)> {
    let mut counts = std::collections::BTreeMap::<usize, (usize, usize)>::new();
    for &i in idx {
        let hit = predict(i)? == labels[i];
        let e = counts.entry(labels[i]).or_default();
        e.0 += usize::from(hit);
        e.1 += 1;
    }
    let table: Vec<ClassAccuracy> = counts
        .iter()
        .map(|(&class_id, &(hits, n))| ClassAccuracy {
            class_id,
            split,
            accuracy: hits as f64 / n as f64,
        })
        .collect();
    let mean = table.iter().map(|c| c.accuracy).sum::<f64>() / table.len() as f64;
    Ok((mean, table))
}

/// Evaluates an arbitrary predictor `(sample, mode) → class` with the
/// CZSL/GZSL protocol.
pub fn evaluate_with<F>(ds: &Dataset, mode: Mode, mut predictor: F) -> Result<EvalReport>
where
    F: FnMut(usize, Mode) -> Result<usize>,
{
    if ds.test_unseen_idx.is_empty() {
        return Err(Error::Argument("test_unseen_idx is empty".into()));
    }
    if ds.test_seen_idx.is_empty() {
        return Err(Error::Argument("test_seen_idx is empty".into()));
    }
    let (acc, czsl_table) = per_class_accuracy(&ds.test_unseen_idx, &ds.labels, "unseen", |i| {
        predictor(i, Mode::Czsl)
    })?;
    let (unseen, u_table) = per_class_accuracy(&ds.test_unseen_idx, &ds.labels, "unseen", |i| {
        predictor(i, Mode::Gzsl)
    })?;
    let (seen, s_table) = per_class_accuracy(&ds.test_seen_idx, &ds.labels, "seen", |i| {
        predictor(i, Mode::Gzsl)
    })?;
    let per_class = match mode {
        Mode::Czsl => czsl_table,
        Mode::Gzsl => s_table.into_iter().chain(u_table).collect(),
    };
    Ok(EvalReport {
        acc,
        unseen,
        seen,
        harmonic: harmonic_mean(seen, unseen)?,
        per_class,
        mode,
    })
}

/// Evaluates trained parameters on the dataset's test splits.
///
/// `acc` always uses CZSL candidates and `unseen`/`seen` always use GZSL
/// candidates; `cfg.mode` selects which per-class table is reported.
pub fn evaluate(params: &ModelParams, ds: &Dataset, cfg: &PredictConfig) -> Result<EvalReport> {
    cfg.validate()?;
    params.check_compatible(crate::model::Dims::of(ds))?;
    let mut cache: Vec<Option<ForwardTrace>> = vec![None; ds.labels.len()];
    evaluate_with(ds, cfg.mode, |i, mode| {
        if cache[i].is_none() {
            cache[i] = Some(forward(&ds.features.image(i), &ds.attributes, params)?);
        }
        let trace = cache[i].as_ref().expect("filled above");
        predict(
            trace,
            &ds.class_semantics,
            &ds.seen_classes,
            &ds.unseen_classes,
            &cfg.with_mode(mode),
        )
    })
}

/// Per-class top-1 accuracy on samples `idx`, choosing among `candidates`.
///
/// With only seen classes as candidates this is the plain seen-class
/// accuracy, e.g. on the training split.
pub fn accuracy_over(
    params: &ModelParams,
    ds: &Dataset,
    idx: &[usize],
    candidates: &[usize],
    cfg: &PredictConfig,
) -> Result<f64> {
    cfg.validate()?;
    if idx.is_empty() {
        return Err(Error::Argument("no samples to score".into()));
    }
    let (acc, _) = per_class_accuracy(idx, &ds.labels, "samples", |i| {
        let t = forward(&ds.features.image(i), &ds.attributes, params)?;
        let s = calibrated_scores(
            t.psi(),
            t.psi_mapped(),
            &ds.class_semantics,
            &ds.unseen_classes,
            cfg,
        )?;
        argmax_over(&s, candidates)
    })?;
    Ok(acc)
}

/// Fraction of regions whose row-wise argmax of τ is the attribute that
/// generated them, using the synthetic `region_attributes` ground truth.
pub fn tau_region_agreement(params: &ModelParams, ds: &Dataset) -> Result<f64> {
    let truth = match ds.extra(REGION_ATTRIBUTES).map(|t| &t.data) {
        Some(TensorData::I32(v)) => v,
        _ => return Err(Error::MissingTensor(REGION_ATTRIBUTES.into())),
    };
    let regions = ds.features.regions();
    if truth.len() != ds.features.images() * regions {
        return Err(Error::Malformed(format!(
            "{REGION_ATTRIBUTES} has {} entries, expected {}",
            truth.len(),
            ds.features.images() * regions
        )));
    }
    let all: Vec<usize> = (0..ds.attributes.rows()).collect();
    let mut hits = 0usize;
    for i in 0..ds.features.images() {
        let t = forward(&ds.features.image(i), &ds.attributes, params)?;
        for r in 0..regions {
            let k = argmax_over(t.tau().row(r), &all)?;
            hits += usize::from(i64::try_from(k).ok() == Some(i64::from(truth[i * regions + r])));
        }
    }
    Ok(hits as f64 / truth.len() as f64)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

impl EvalReport {
    pub fn metrics_csv(&self) -> String {
        format!(
            "metric,value\nacc,{}\nU,{}\nS,{}\nH,{}\n",
            self.acc, self.unseen, self.seen, self.harmonic
        )
    }

    pub fn per_class_csv(&self) -> String {
        let mut out = String::from("class_id,split,accuracy\n");
        for c in &self.per_class {
            out.push_str(&format!("{},{},{}\n", c.class_id, c.split, c.accuracy));
        }
        out
    }

    pub fn write_metrics(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.metrics_csv())
    }

    pub fn write_per_class(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.per_class_csv())
    }
}
