//! Component ablations: each sub-net alone, distillation on/off, single
//! distillation terms, and a global-pooling baseline.

use std::fmt;

use crate::data::Dataset;
use crate::error::Result;
use crate::eval::{
    argmax_over, calibrated_scores, evaluate, evaluate_with, EvalReport, Mode, PredictConfig,
};
use crate::losses::{acec_loss, Branches, DistillTerms, LossBreakdown};
use crate::model::{class_scores, Dims};
use crate::ndmath::{rng_uniform, Matrix, Rng};
use crate::training::{fit, train, ParamSet, TrainConfig};

/// The ablation rows, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Mean-pooled region features mapped to attribute space by one matrix.
    Baseline,
    V2aWithoutDistill,
    A2vWithoutDistill,
    V2aWithDistill,
    A2vWithDistill,
    JsdOnly,
    L2Only,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Baseline,
        Variant::V2aWithoutDistill,
        Variant::A2vWithoutDistill,
        Variant::V2aWithDistill,
        Variant::A2vWithDistill,
        Variant::JsdOnly,
        Variant::L2Only,
        Variant::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::V2aWithoutDistill => "v2a_without_distill",
            Variant::A2vWithoutDistill => "a2v_without_distill",
            Variant::V2aWithDistill => "v2a_with_distill",
            Variant::A2vWithDistill => "a2v_with_distill",
            Variant::JsdOnly => "distill_jsd_only",
            Variant::L2Only => "distill_l2_only",
            Variant::Full => "full",
        }
    }

    /// Training config and fusion weights for a two-sub-net variant.
    fn setup(self, base: &TrainConfig, fused: PredictConfig) -> (TrainConfig, PredictConfig) {
        let mut cfg = base.clone();
        let only_a2v = PredictConfig {
            alpha1: 1.0,
            alpha2: 0.0,
            ..fused
        };
        let only_v2a = PredictConfig {
            alpha1: 0.0,
            alpha2: 1.0,
            ..fused
        };
        let predict = match self {
            Variant::Baseline | Variant::Full => fused,
            Variant::V2aWithoutDistill => {
                cfg.loss.branches = Branches::VisualToAttribute;
                only_v2a
            }
            Variant::A2vWithoutDistill => {
                cfg.loss.branches = Branches::AttributeToVisual;
                only_a2v
            }
            Variant::V2aWithDistill => only_v2a,
            Variant::A2vWithDistill => only_a2v,
            Variant::JsdOnly => {
                cfg.loss.distill_terms = DistillTerms::Jsd;
                fused
            }
            Variant::L2Only => {
                cfg.loss.distill_terms = DistillTerms::L2;
                fused
            }
        };
        (cfg, predict)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub report: EvalReport,
    pub history: Vec<LossBreakdown>,
}

/// Single `K × d_v` projection of the mean region feature.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    pub projection: Matrix,
}

impl ParamSet for BaselineParams {
    fn tensors(&self) -> Vec<&Matrix> {
        vec![&self.projection]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.projection]
    }
}

fn pooled(ds: &Dataset, i: usize) -> Vec<f64> {
    let v = ds.features.image(i);
    let r = v.rows() as f64;
    v.col_sums().into_iter().map(|s| s / r).collect()
}

fn baseline_embedding(p: &BaselineParams, ds: &Dataset, i: usize) -> Result<Vec<f64>> {
    p.projection.matvec(&pooled(ds, i))
}

/// Trains the pooling baseline with the cross-entropy objective. Its loss is
/// reported in the `acec_a2v` slot of the history.
pub fn train_baseline(
    ds: &Dataset,
    cfg: &TrainConfig,
) -> Result<(BaselineParams, Vec<LossBreakdown>)> {
    let dims = Dims::of(ds);
    let limit = (6.0 / (dims.attributes + dims.visual_dim) as f64).sqrt();
    let init = BaselineParams {
        projection: rng_uniform(
            &mut Rng::new(cfg.seed),
            -limit,
            limit,
            dims.attributes,
            dims.visual_dim,
        )?,
    };
    let z = &ds.class_semantics;
    let out = fit(init, ds, cfg, |p, batch| {
        let mut scores = Matrix::zeros(batch.len(), z.rows());
        let mut pooled_rows = Vec::with_capacity(batch.len());
        for (row, &i) in batch.iter().enumerate() {
            let x = pooled(ds, i);
            let e = p.projection.matvec(&x)?;
            scores.row_mut(row).copy_from_slice(&class_scores(&e, z)?);
            pooled_rows.push(x);
        }
        let labels: Vec<usize> = batch.iter().map(|&i| ds.labels[i]).collect();
        let (loss, d_scores) = acec_loss(
            &scores,
            &labels,
            &ds.seen_classes,
            &ds.unseen_classes,
            &cfg.loss,
        )?;
        let mut grad = Matrix::zeros(dims.attributes, dims.visual_dim);
        for (row, x) in pooled_rows.iter().enumerate() {
            let d_e = z.tr_matvec(d_scores.row(row))?;
            for (k, &de) in d_e.iter().enumerate() {
                for (g, &xv) in grad.row_mut(k).iter_mut().zip(x) {
                    *g += de * xv;
                }
            }
        }
        Ok((
            LossBreakdown::new(loss, 0.0, 0.0, cfg.loss.lambda_distill),
            BaselineParams { projection: grad },
        ))
    })?;
    Ok((out.params, out.history))
}

fn evaluate_baseline(p: &BaselineParams, ds: &Dataset, mode: Mode) -> Result<EvalReport> {
    let k = ds.num_attributes();
    let cfg = PredictConfig {
        alpha1: 1.0,
        alpha2: 0.0,
        mode,
    };
    evaluate_with(ds, mode, |i, m| {
        let e = baseline_embedding(p, ds, i)?;
        let scores = calibrated_scores(
            &e,
            &vec![0.0; k],
            &ds.class_semantics,
            &ds.unseen_classes,
            &cfg,
        )?;
        match m {
            Mode::Czsl => argmax_over(&scores, &ds.unseen_classes),
            Mode::Gzsl => {
                let all: Vec<usize> = ds
                    .seen_classes
                    .iter()
                    .chain(&ds.unseen_classes)
                    .copied()
                    .collect();
                argmax_over(&scores, &all)
            }
        }
    })
}

/// Trains and evaluates one variant.
pub fn run_variant(
    variant: Variant,
    ds: &Dataset,
    cfg: &TrainConfig,
    fused: PredictConfig,
) -> Result<AblationRow> {
    fused.validate()?;
    if variant == Variant::Baseline {
        let (p, history) = train_baseline(ds, cfg)?;
        return Ok(AblationRow {
            variant,
            report: evaluate_baseline(&p, ds, fused.mode)?,
            history,
        });
    }
    let (train_cfg, predict_cfg) = variant.setup(cfg, fused);
    let out = train(ds, &train_cfg)?;
    Ok(AblationRow {
        variant,
        report: evaluate(&out.params, ds, &predict_cfg)?,
        history: out.history,
    })
}

/// Runs every variant sequentially with the same config and seed.
pub fn run_ablation(
    ds: &Dataset,
    cfg: &TrainConfig,
    fused: PredictConfig,
) -> Result<Vec<AblationRow>> {
    Variant::ALL
        .iter()
        .map(|&v| run_variant(v, ds, cfg, fused))
        .collect()
}

/// `variant,acc,H` table.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("variant,acc,H\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.variant, r.report.acc, r.report.harmonic
        ));
    }
    out
}
