//! Finite-difference verification of the full objective on small random
//! instances.

use std::str::FromStr;

use crate::data::{Dataset, FeatureStack};
use crate::error::{Error, Result};
use crate::losses::{total_loss, LossConfig};
use crate::model::{init_params, Dims, ModelParams, PARAM_NAMES};
use crate::ndmath::{grad_check, rng_uniform, GradCheck, Rng, DEFAULT_STEP};

/// Pass threshold on the maximum relative error.
pub const GRAD_TOLERANCE: f64 = 1e-5;

/// Sizes of a random instance: `K, R, d_v, d_a, C_s, C_u` and batch size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceDims {
    pub attributes: usize,
    pub regions: usize,
    pub visual_dim: usize,
    pub attr_dim: usize,
    pub seen: usize,
    pub unseen: usize,
    pub batch: usize,
}

impl Default for InstanceDims {
    fn default() -> Self {
        Self {
            attributes: 5,
            regions: 4,
            visual_dim: 8,
            attr_dim: 6,
            seen: 3,
            unseen: 2,
            batch: 2,
        }
    }
}

impl FromStr for InstanceDims {
    type Err = Error;

    /// `k,r,dv,da,cs,cu`; the batch size stays at its default.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                Error::Argument(format!(
                    "dims must be six integers k,r,dv,da,cs,cu; got {s:?}"
                ))
            })?;
        let [attributes, regions, visual_dim, attr_dim, seen, unseen]: [usize; 6] =
            parts.try_into().map_err(|_| {
                Error::Argument(format!(
                    "dims must be six integers k,r,dv,da,cs,cu; got {s:?}"
                ))
            })?;
        if [attributes, regions, visual_dim, attr_dim, seen, unseen].contains(&0) {
            return Err(Error::Argument(format!(
                "all dims must be positive, got {s:?}"
            )));
        }
        Ok(Self {
            attributes,
            regions,
            visual_dim,
            attr_dim,
            seen,
            unseen,
            ..Self::default()
        })
    }
}

/// A random dataset whose samples all belong to the training split, plus
/// freshly initialized parameters.
pub fn random_instance(dims: InstanceDims, seed: u64) -> Result<(Dataset, ModelParams)> {
    let mut rng = Rng::new(seed);
    let n = dims.batch;
    let classes = dims.seen + dims.unseen;
    let features = rng_uniform(&mut rng, -1.0, 1.0, n * dims.regions, dims.visual_dim)?;
    let attributes = rng_uniform(&mut rng, -1.0, 1.0, dims.attributes, dims.attr_dim)?;
    let class_semantics = rng_uniform(&mut rng, 0.0, 1.0, classes, dims.attributes)?;
    let labels = (0..n).map(|i| i % dims.seen).collect();
    let ds = Dataset {
        features: FeatureStack::new(n, dims.regions, dims.visual_dim, features.into_vec())?,
        attributes,
        class_semantics,
        labels,
        seen_classes: (0..dims.seen).collect(),
        unseen_classes: (dims.seen..classes).collect(),
        train_idx: (0..n).collect(),
        test_seen_idx: vec![],
        test_unseen_idx: vec![],
        extras: vec![],
    };
    let params = init_params(Dims::of(&ds), seed.wrapping_add(1))?;
    Ok((ds, params))
}

/// Checks the analytic gradient of the total loss w.r.t. each parameter
/// matrix. With `corrupt_w2` the analytic W2 gradient is scaled by 1.1
/// before comparison, as a negative control.
pub fn check_total_loss(
    dims: InstanceDims,
    seed: u64,
    cfg: &LossConfig,
    corrupt_w2: bool,
) -> Result<Vec<(&'static str, GradCheck)>> {
    let (ds, params) = random_instance(dims, seed)?;
    let batch = ds.train_idx.clone();
    let (_, mut grads) = total_loss(&params, &ds, &batch, cfg)?;
    if corrupt_w2 {
        grads.w2 = grads.w2.scale(1.1);
    }
    let mut out = Vec::with_capacity(5);
    for (idx, name) in PARAM_NAMES.iter().enumerate() {
        let point = params.matrices()[idx].as_slice().to_vec();
        let objective = |x: &[f64]| {
            let mut q = params.clone();
            q.matrices_mut()[idx].as_mut_slice().copy_from_slice(x);
            total_loss(&q, &ds, &batch, cfg).map_or(f64::NAN, |(l, _)| l.total)
        };
        out.push((
            *name,
            grad_check(
                objective,
                &point,
                grads.matrices()[idx].as_slice(),
                DEFAULT_STEP,
            )?,
        ));
    }
    Ok(out)
}
