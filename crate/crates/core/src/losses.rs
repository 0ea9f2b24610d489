//! Training objectives and their analytic gradients.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{
    a2v_backward, a2v_forward, class_scores, v2a_backward, v2a_forward, ModelParams,
};
use crate::ndmath::{softmax, softmax_backward, Matrix};

/// How the self-calibration term enters the cross-entropy loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CalibrationSign {
    /// Adds `λ_cal · Σ_{u∈unseen} −log q_u`, which rewards probability mass on
    /// unseen classes.
    #[default]
    Prose,
    /// Subtracts the same quantity, so minimizing the loss pushes probability
    /// away from unseen classes.
    Literal,
}

/// Which parts of the distillation loss are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistillTerms {
    #[default]
    Both,
    /// Symmetric KL only.
    Jsd,
    /// Squared ℓ² only.
    L2,
}

/// Which sub-nets take part in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branches {
    #[default]
    Both,
    AttributeToVisual,
    VisualToAttribute,
}

impl Branches {
    pub fn a2v(self) -> bool {
        matches!(self, Branches::Both | Branches::AttributeToVisual)
    }

    pub fn v2a(self) -> bool {
        matches!(self, Branches::Both | Branches::VisualToAttribute)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub lambda_cal: f64,
    pub lambda_distill: f64,
    pub calibration_sign: CalibrationSign,
    /// Lower clamp applied to distillation probabilities before the logs.
    pub epsilon_kl: f64,
    pub distill_terms: DistillTerms,
    pub branches: Branches,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_cal: 0.1,
            lambda_distill: 0.001,
            calibration_sign: CalibrationSign::Prose,
            epsilon_kl: 1e-8,
            distill_terms: DistillTerms::Both,
            branches: Branches::Both,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_cal >= 0.0) || !(self.lambda_distill >= 0.0) {
            return Err(Error::Argument(format!(
                "loss weights must be non-negative: lambda_cal={}, lambda_distill={}",
                self.lambda_cal, self.lambda_distill
            )));
        }
        if !(self.epsilon_kl > 0.0 && self.epsilon_kl <= 1e-3) {
            return Err(Error::Argument(format!(
                "epsilon_kl must be in (0, 1e-3], got {}",
                self.epsilon_kl
            )));
        }
        Ok(())
    }
}

/// Per-batch loss values. `total = acec_a2v + acec_v2a + λ_distill · distill`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub acec_a2v: f64,
    pub acec_v2a: f64,
    pub distill: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(acec_a2v: f64, acec_v2a: f64, distill: f64, lambda_distill: f64) -> Self {
        Self {
            acec_a2v,
            acec_v2a,
            distill,
            total: acec_a2v + acec_v2a + lambda_distill * distill,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.acec_a2v, self.acec_v2a, self.distill, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `+1` for unseen classes, `−1` for seen ones.
pub(crate) fn calibration_offsets(num_classes: usize, unseen: &[usize]) -> Vec<f64> {
    let mut out = vec![-1.0; num_classes];
    for &u in unseen {
        out[u] = 1.0;
    }
    out
}

/// Attribute-based cross-entropy with self-calibration, averaged over the
/// batch.
///
/// `scores` is `batch × C` with global class columns. The first term is the
/// cross-entropy of the softmax restricted to seen classes; the second, scaled
/// by `λ_cal`, is the summed negative log-probability of every unseen class
/// under the softmax over all classes with `±1` offsets.
pub fn acec_loss(
    scores: &Matrix,
    labels: &[usize],
    seen: &[usize],
    unseen: &[usize],
    cfg: &LossConfig,
) -> Result<(f64, Matrix)> {
    let (batch, num_classes) = scores.shape();
    if labels.len() != batch {
        return Err(Error::Shape {
            op: "acec_loss labels vs scores",
            lhs: (labels.len(), 1),
            rhs: scores.shape(),
        });
    }
    if let Some(&c) = seen.iter().chain(unseen).find(|&&c| c >= num_classes) {
        return Err(Error::Argument(format!(
            "class {c} out of range for {num_classes} score columns"
        )));
    }
    let mut seen_pos = vec![None; num_classes];
    for (pos, &c) in seen.iter().enumerate() {
        seen_pos[c] = Some(pos);
    }
    let offsets = calibration_offsets(num_classes, unseen);
    let cal_sign = match cfg.calibration_sign {
        CalibrationSign::Prose => 1.0,
        CalibrationSign::Literal => -1.0,
    };
    let inv_batch = 1.0 / batch as f64;

    let mut loss = 0.0;
    let mut grad = Matrix::zeros(batch, num_classes);
    for (i, &label) in labels.iter().enumerate() {
        let label_pos = seen_pos.get(label).copied().flatten().ok_or_else(|| {
            Error::Argument(format!("label {label} of sample {i} is not a seen class"))
        })?;
        let s = scores.row(i);

        let seen_logits: Vec<f64> = seen.iter().map(|&c| s[c]).collect();
        let ce = log_sum_exp(seen_logits.iter().copied()) - seen_logits[label_pos];
        let p = softmax(&seen_logits);
        let g = grad.row_mut(i);
        for (pos, &c) in seen.iter().enumerate() {
            let target = if pos == label_pos { 1.0 } else { 0.0 };
            g[c] += (p[pos] - target) * inv_batch;
        }
        let mut sample_loss = ce;

        if cfg.lambda_cal != 0.0 && !unseen.is_empty() {
            let logits: Vec<f64> = s.iter().zip(&offsets).map(|(x, o)| x + o).collect();
            let lse = log_sum_exp(logits.iter().copied());
            let cal: f64 = unseen.iter().map(|&u| lse - logits[u]).sum();
            sample_loss += cal_sign * cfg.lambda_cal * cal;
            let q = softmax(&logits);
            let weight = cal_sign * cfg.lambda_cal * inv_batch;
            let n_unseen = unseen.len() as f64;
            for (gc, qc) in g.iter_mut().zip(&q) {
                *gc += weight * n_unseen * qc;
            }
            for &u in unseen {
                g[u] -= weight;
            }
        }
        loss += sample_loss;
    }
    Ok((loss * inv_batch, grad))
}

/// Softmax, clamp to `[eps, 1]`, renormalize.
fn clamped_probs(scores: &[f64], eps: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let p = softmax(scores);
    let clamped: Vec<f64> = p.iter().map(|&x| x.clamp(eps, 1.0)).collect();
    let total: f64 = clamped.iter().sum();
    let renorm = clamped.iter().map(|&x| x / total).collect();
    (p, renorm, total)
}

/// Gradient w.r.t. the raw scores given the gradient w.r.t. the clamped,
/// renormalized probabilities.
fn clamped_probs_backward(p: &[f64], renorm: &[f64], total: f64, eps: f64, g: &[f64]) -> Vec<f64> {
    let inner: f64 = g.iter().zip(renorm).map(|(a, b)| a * b).sum();
    let d_p: Vec<f64> = g
        .iter()
        .zip(p)
        .map(|(&gj, &pj)| if pj > eps { (gj - inner) / total } else { 0.0 })
        .collect();
    softmax_backward(p, &d_p)
}

/// Mutual distillation loss between two sets of seen-class scores.
///
/// Each row becomes a probability vector (softmax, clamp to `[ε, 1]`,
/// renormalize). The per-sample loss is `½(KL(p₁‖p₂) + KL(p₂‖p₁)) + ‖p₁ − p₂‖²`,
/// averaged over the batch. The symmetric KL is evaluated as
/// `½ Σ (p₁ − p₂)(ln p₁ − ln p₂)`, which makes the loss bit-exactly symmetric
/// in its arguments.
pub fn distill_loss(
    scores1: &Matrix,
    scores2: &Matrix,
    cfg: &LossConfig,
) -> Result<(f64, Matrix, Matrix)> {
    if scores1.shape() != scores2.shape() {
        return Err(Error::Shape {
            op: "distill_loss",
            lhs: scores1.shape(),
            rhs: scores2.shape(),
        });
    }
    let (batch, classes) = scores1.shape();
    let eps = cfg.epsilon_kl;
    let (use_jsd, use_l2) = match cfg.distill_terms {
        DistillTerms::Both => (true, true),
        DistillTerms::Jsd => (true, false),
        DistillTerms::L2 => (false, true),
    };
    let inv_batch = 1.0 / batch as f64;
    let mut loss = 0.0;
    let mut g1 = Matrix::zeros(batch, classes);
    let mut g2 = Matrix::zeros(batch, classes);
    for i in 0..batch {
        let (raw1, p1, t1) = clamped_probs(scores1.row(i), eps);
        let (raw2, p2, t2) = clamped_probs(scores2.row(i), eps);
        let mut jsd = 0.0;
        let mut l2 = 0.0;
        let mut dp1 = vec![0.0; classes];
        let mut dp2 = vec![0.0; classes];
        for c in 0..classes {
            let diff = p1[c] - p2[c];
            let log_ratio = p1[c].ln() - p2[c].ln();
            if use_jsd {
                jsd += diff * log_ratio;
                dp1[c] += 0.5 * (log_ratio + diff / p1[c]);
                dp2[c] += 0.5 * (-log_ratio - diff / p2[c]);
            }
            if use_l2 {
                l2 += diff * diff;
                dp1[c] += 2.0 * diff;
                dp2[c] -= 2.0 * diff;
            }
        }
        loss += 0.5 * jsd + l2;
        dp1.iter_mut()
            .chain(dp2.iter_mut())
            .for_each(|d| *d *= inv_batch);
        g1.row_mut(i)
            .copy_from_slice(&clamped_probs_backward(&raw1, &p1, t1, eps, &dp1));
        g2.row_mut(i)
            .copy_from_slice(&clamped_probs_backward(&raw2, &p2, t2, eps, &dp2));
    }
    Ok((loss * inv_batch, g1, g2))
}

/// Per-image class scores from both sub-nets (`None` for a disabled branch).
pub(crate) struct BatchScores {
    pub a2v: Option<Matrix>,
    pub v2a: Option<Matrix>,
}

fn seen_columns(scores: &Matrix, seen: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(scores.rows(), seen.len());
    for r in 0..scores.rows() {
        for (j, &c) in seen.iter().enumerate() {
            out[(r, j)] = scores[(r, c)];
        }
    }
    out
}

/// Full objective on a batch of sample indices, with gradients w.r.t. every
/// parameter matrix.
///
/// Each enabled sub-net gets its own cross-entropy term; the distillation
/// term is applied to the seen-class scores when both are enabled.
pub fn total_loss(
    params: &ModelParams,
    ds: &Dataset,
    batch: &[usize],
    cfg: &LossConfig,
) -> Result<(LossBreakdown, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let z = &ds.class_semantics;
    let a = &ds.attributes;
    let n_classes = z.rows();
    let labels: Vec<usize> = batch.iter().map(|&i| ds.labels[i]).collect();
    let images: Vec<Matrix> = batch.iter().map(|&i| ds.features.image(i)).collect();

    let mut a2v_traces = Vec::new();
    let mut v2a_traces = Vec::new();
    let mut scores = BatchScores {
        a2v: None,
        v2a: None,
    };
    if cfg.branches.a2v() {
        let mut s = Matrix::zeros(batch.len(), n_classes);
        for (row, v) in images.iter().enumerate() {
            let t = a2v_forward(v, a, params)?;
            s.row_mut(row).copy_from_slice(&class_scores(&t.psi, z)?);
            a2v_traces.push(t);
        }
        scores.a2v = Some(s);
    }
    if cfg.branches.v2a() {
        let mut s = Matrix::zeros(batch.len(), n_classes);
        for (row, v) in images.iter().enumerate() {
            let t = v2a_forward(v, a, params)?;
            s.row_mut(row)
                .copy_from_slice(&class_scores(&t.psi_mapped, z)?);
            v2a_traces.push(t);
        }
        scores.v2a = Some(s);
    }

    let mut acec = [0.0, 0.0];
    let mut d_scores: [Option<Matrix>; 2] = [None, None];
    for (slot, s) in [&scores.a2v, &scores.v2a].into_iter().enumerate() {
        if let Some(s) = s {
            let (l, g) = acec_loss(s, &labels, &ds.seen_classes, &ds.unseen_classes, cfg)?;
            acec[slot] = l;
            d_scores[slot] = Some(g);
        }
    }

    let mut distill = 0.0;
    if let (Some(s1), Some(s2)) = (&scores.a2v, &scores.v2a) {
        let seen = &ds.seen_classes;
        let (l, g1, g2) = distill_loss(&seen_columns(s1, seen), &seen_columns(s2, seen), cfg)?;
        distill = l;
        let [d1, d2] = &mut d_scores;
        for (d, g) in [(d1, g1), (d2, g2)] {
            let d = d.as_mut().expect("both branches active");
            for r in 0..g.rows() {
                for (j, &c) in seen.iter().enumerate() {
                    d[(r, c)] += cfg.lambda_distill * g[(r, j)];
                }
            }
        }
    }

    let mut grads = ModelParams::zeros(params.dims);
    if let Some(d) = &d_scores[0] {
        for (row, (v, t)) in images.iter().zip(&a2v_traces).enumerate() {
            let d_psi = z.tr_matvec(d.row(row))?;
            a2v_backward(v, a, params, t, &d_psi, &mut grads)?;
        }
    }
    if let Some(d) = &d_scores[1] {
        for (row, (v, t)) in images.iter().zip(&v2a_traces).enumerate() {
            let d_psi = z.tr_matvec(d.row(row))?;
            v2a_backward(v, a, params, t, &d_psi, &mut grads)?;
        }
    }
    Ok((
        LossBreakdown::new(acec[0], acec[1], distill, cfg.lambda_distill),
        grads,
    ))
}
