//! RMSProp training loop.

use std::io::Write;
use std::path::Path;

use crate::data::{parse_kv, validate_dataset, Dataset};
use crate::error::{Error, Result};
use crate::losses::{total_loss, CalibrationSign, LossBreakdown, LossConfig};
use crate::model::{init_params, Dims, ModelParams};
use crate::ndmath::{Matrix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub rms_decay: f64,
    pub epsilon_opt: f64,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 50,
            momentum: 0.9,
            weight_decay: 1e-4,
            epochs: 200,
            seed: 1,
            rms_decay: 0.99,
            epsilon_opt: 1e-8,
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Argument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Argument(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(0.0..1.0).contains(&self.rms_decay) {
            return Err(Error::Argument(format!(
                "rms_decay must be in [0, 1), got {}",
                self.rms_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0) || !(self.epsilon_opt > 0.0) {
            return Err(Error::Argument(
                "weight_decay must be >= 0 and epsilon_opt > 0".into(),
            ));
        }
        self.loss.validate()
    }

    /// Parses a flat `key = value` file. Keys mirror the field names, with the
    /// loss settings flattened (`lambda_cal`, `lambda_distill`,
    /// `calibration_sign`, `epsilon_kl`). Missing keys keep their defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in parse_kv(text)? {
            let bad = || Error::Argument(format!("bad value for {key}: {value:?}"));
            match key.as_str() {
                "learning_rate" => cfg.learning_rate = value.parse().map_err(|_| bad())?,
                "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad())?,
                "momentum" => cfg.momentum = value.parse().map_err(|_| bad())?,
                "weight_decay" => cfg.weight_decay = value.parse().map_err(|_| bad())?,
                "epochs" => cfg.epochs = value.parse().map_err(|_| bad())?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
                "rms_decay" => cfg.rms_decay = value.parse().map_err(|_| bad())?,
                "epsilon_opt" => cfg.epsilon_opt = value.parse().map_err(|_| bad())?,
                "lambda_cal" => cfg.loss.lambda_cal = value.parse().map_err(|_| bad())?,
                "lambda_distill" => cfg.loss.lambda_distill = value.parse().map_err(|_| bad())?,
                "epsilon_kl" => cfg.loss.epsilon_kl = value.parse().map_err(|_| bad())?,
                "calibration_sign" => {
                    cfg.loss.calibration_sign = match value.as_str() {
                        "prose" => CalibrationSign::Prose,
                        "literal" => CalibrationSign::Literal,
                        _ => return Err(bad()),
                    }
                }
                _ => return Err(Error::Argument(format!("unknown config key {key:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Anything the optimizer can update: an ordered list of matrices.
pub trait ParamSet: Clone {
    fn tensors(&self) -> Vec<&Matrix>;
    fn tensors_mut(&mut self) -> Vec<&mut Matrix>;
}

impl ParamSet for ModelParams {
    fn tensors(&self) -> Vec<&Matrix> {
        self.matrices().to_vec()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.matrices_mut().into_iter().collect()
    }
}

/// RMSProp buffers, one pair per parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    /// Running average of squared gradients.
    pub square_avg: Vec<Matrix>,
    /// Momentum buffer.
    pub momentum: Vec<Matrix>,
    pub step: u64,
}

impl OptState {
    pub fn new<P: ParamSet>(params: &P) -> Self {
        let zeros: Vec<Matrix> = params
            .tensors()
            .iter()
            .map(|m| Matrix::zeros(m.rows(), m.cols()))
            .collect();
        Self {
            square_avg: zeros.clone(),
            momentum: zeros,
            step: 0,
        }
    }
}

/// One RMSProp update, elementwise:
///
/// ```text
/// g   ← grad + weight_decay · param
/// sq  ← rms_decay · sq + (1 − rms_decay) · g²
/// buf ← momentum · buf + g / (√sq + ε)
/// param ← param − lr · buf
/// ```
pub fn rmsprop_step<P: ParamSet>(
    params: &mut P,
    grads: &P,
    state: &mut OptState,
    cfg: &TrainConfig,
) -> Result<()> {
    let grads = grads.tensors();
    let mut params = params.tensors_mut();
    if params.len() != grads.len() || state.square_avg.len() != params.len() {
        return Err(Error::Argument(format!(
            "optimizer got {} params, {} grads, {} buffers",
            params.len(),
            grads.len(),
            state.square_avg.len()
        )));
    }
    for (i, (p, g)) in params.iter_mut().zip(&grads).enumerate() {
        let (sq, buf) = (&mut state.square_avg[i], &mut state.momentum[i]);
        for shape in [g.shape(), sq.shape(), buf.shape()] {
            if shape != p.shape() {
                return Err(Error::Shape {
                    op: "rmsprop_step",
                    lhs: p.shape(),
                    rhs: shape,
                });
            }
        }
        let iter = p
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(sq.as_mut_slice().iter_mut().zip(buf.as_mut_slice()));
        for ((w, &grad), (s, b)) in iter {
            let g = grad + cfg.weight_decay * *w;
            *s = cfg.rms_decay * *s + (1.0 - cfg.rms_decay) * g * g;
            *b = cfg.momentum * *b + g / (s.sqrt() + cfg.epsilon_opt);
            *w -= cfg.learning_rate * *b;
        }
    }
    state.step += 1;
    Ok(())
}

/// Shuffles `0..n` (Fisher–Yates) and cuts it into consecutive batches; the
/// last batch may be short.
pub fn make_batches(n: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order
        .chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

/// Result of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<P> {
    pub params: P,
    /// One sample-weighted mean breakdown per epoch.
    pub history: Vec<LossBreakdown>,
}

/// Seed offset for the batch-order generator, so it does not replay the
/// initialization stream.
const BATCH_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// Generic epoch loop over `ds.train_idx`.
pub fn fit<P, F>(
    init: P,
    ds: &Dataset,
    cfg: &TrainConfig,
    mut batch_loss: F,
) -> Result<TrainOutcome<P>>
where
    P: ParamSet,
    F: FnMut(&P, &[usize]) -> Result<(LossBreakdown, P)>,
{
    cfg.validate()?;
    if ds.train_idx.is_empty() {
        return Err(Error::Argument("training split is empty".into()));
    }
    let mut params = init;
    let mut state = OptState::new(&params);
    let mut rng = Rng::new(cfg.seed ^ BATCH_STREAM);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut sums = [0.0; 3];
        let batches = make_batches(ds.train_idx.len(), cfg.batch_size, &mut rng);
        for (b, positions) in batches.iter().enumerate() {
            let batch: Vec<usize> = positions.iter().map(|&p| ds.train_idx[p]).collect();
            let (loss, grads) = batch_loss(&params, &batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            rmsprop_step(&mut params, &grads, &mut state, cfg)?;
            if !params.tensors().iter().all(|m| m.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            let w = batch.len() as f64;
            sums[0] += w * loss.acec_a2v;
            sums[1] += w * loss.acec_v2a;
            sums[2] += w * loss.distill;
        }
        let n = ds.train_idx.len() as f64;
        history.push(LossBreakdown::new(
            sums[0] / n,
            sums[1] / n,
            sums[2] / n,
            cfg.loss.lambda_distill,
        ));
    }
    Ok(TrainOutcome { params, history })
}

/// Trains both sub-nets from a seeded initialization.
pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome<ModelParams>> {
    let violations = validate_dataset(ds);
    if !violations.is_empty() {
        return Err(Error::InvalidDataset(
            violations.iter().map(ToString::to_string).collect(),
        ));
    }
    let init = init_params(Dims::of(ds), cfg.seed)?;
    fit(init, ds, cfg, |p, batch| {
        total_loss(p, ds, batch, &cfg.loss)
    })
}

/// Writes the per-epoch history as CSV.
pub fn write_history_csv(path: impl AsRef<Path>, history: &[LossBreakdown]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch,acec_a2v,acec_v2a,distill,total\n");
    for (e, h) in history.iter().enumerate() {
        out.push_str(&format!(
            "{e},{},{},{},{}\n",
            h.acec_a2v, h.acec_v2a, h.distill, h.total
        ));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
