use std::collections::BTreeMap;

use super::container::Tensor;
use super::dataset::{Dataset, FeatureStack};
use crate::error::{Error, Result};
use crate::ndmath::{rng_uniform, Matrix, Rng};

/// Name of the extra tensor holding, for every image and region, the index
/// of the attribute that generated it (`N × R`, i32).
pub const REGION_ATTRIBUTES: &str = "region_attributes";
/// Name of the extra tensor holding the shared attribute-to-visual map
/// (`d_v × d_a`, f32).
pub const GENERATOR_MAP: &str = "generator_map";

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seen_classes: usize,
    pub unseen_classes: usize,
    pub attributes: usize,
    pub regions: usize,
    pub visual_dim: usize,
    pub attr_dim: usize,
    pub samples_per_class: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// Fraction of each seen class held out for the GZSL seen test split.
    pub test_seen_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seen_classes: 8,
            unseen_classes: 4,
            attributes: 12,
            regions: 9,
            visual_dim: 16,
            attr_dim: 10,
            samples_per_class: 50,
            noise_std: 0.1,
            seed: 1,
            test_seen_fraction: 0.2,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.unseen_classes == 0 {
            return Err(Error::Argument(
                "unseen_classes must be at least 1 for zero-shot data".into(),
            ));
        }
        let counts = [
            ("seen_classes", self.seen_classes),
            ("attributes", self.attributes),
            ("regions", self.regions),
            ("visual_dim", self.visual_dim),
            ("attr_dim", self.attr_dim),
            ("samples_per_class", self.samples_per_class),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Argument(format!("{name} must be at least 1")));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::Argument(format!(
                "noise_std must be finite and >= 0, got {}",
                self.noise_std
            )));
        }
        if !(0.0..1.0).contains(&self.test_seen_fraction) {
            return Err(Error::Argument(format!(
                "test_seen_fraction must be in [0, 1), got {}",
                self.test_seen_fraction
            )));
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep
    /// their defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (key, value) in parse_kv(text)? {
            let bad = || Error::Argument(format!("bad value for {key}: {value:?}"));
            match key.as_str() {
                "seen_classes" => spec.seen_classes = value.parse().map_err(|_| bad())?,
                "unseen_classes" => spec.unseen_classes = value.parse().map_err(|_| bad())?,
                "attributes" => spec.attributes = value.parse().map_err(|_| bad())?,
                "regions" => spec.regions = value.parse().map_err(|_| bad())?,
                "visual_dim" => spec.visual_dim = value.parse().map_err(|_| bad())?,
                "attr_dim" => spec.attr_dim = value.parse().map_err(|_| bad())?,
                "samples_per_class" => spec.samples_per_class = value.parse().map_err(|_| bad())?,
                "noise_std" => spec.noise_std = value.parse().map_err(|_| bad())?,
                "seed" => spec.seed = value.parse().map_err(|_| bad())?,
                "test_seen_fraction" => {
                    spec.test_seen_fraction = value.parse().map_err(|_| bad())?
                }
                _ => return Err(Error::Argument(format!("unknown synth spec key {key:?}"))),
            }
        }
        Ok(spec)
    }
}

/// Splits a flat `key = value` document into pairs, rejecting duplicates.
pub(crate) fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Argument(format!("line {}: expected key=value", n + 1)))?;
        let k = k.trim().to_string();
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Argument(format!(
                "line {}: duplicate key {k:?}",
                n + 1
            )));
        }
    }
    Ok(out)
}

fn round_f32(m: &mut Matrix) {
    for v in m.as_mut_slice() {
        *v = f64::from(*v as f32);
    }
}

/// Generates a dataset whose region features are noisy images of attribute
/// vectors under one shared linear map, so the visual/attribute
/// correspondence learned on seen classes carries over to unseen ones.
///
/// Classes `0..C_s` are seen and `C_s..C` unseen. Every stored value is
/// rounded to f32 so the result survives a container round-trip unchanged.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let k = spec.attributes;
    let c_total = spec.seen_classes + spec.unseen_classes;

    let mut attributes = rng_uniform(&mut rng, -1.0, 1.0, k, spec.attr_dim)?;
    round_f32(&mut attributes);
    let mut class_semantics = rng_uniform(&mut rng, 0.0, 1.0, c_total, k)?;
    round_f32(&mut class_semantics);
    let mut map = rng_uniform(&mut rng, -1.0, 1.0, spec.visual_dim, spec.attr_dim)?;
    round_f32(&mut map);

    // Clean region feature for each attribute: G · a_k, one per row.
    let prototypes = attributes.matmul(&map.transpose())?;

    let n = c_total * spec.samples_per_class;
    let mut features = Vec::with_capacity(n * spec.regions * spec.visual_dim);
    let mut region_attrs = Vec::with_capacity(n * spec.regions);
    let mut labels = Vec::with_capacity(n);
    for class in 0..c_total {
        let weights = class_semantics.row(class).to_vec();
        for _ in 0..spec.samples_per_class {
            labels.push(class);
            for _ in 0..spec.regions {
                let attr = rng.weighted_index(&weights);
                region_attrs.push(attr as i32);
                for &p in prototypes.row(attr) {
                    let noise = if spec.noise_std > 0.0 {
                        spec.noise_std * rng.standard_normal()
                    } else {
                        0.0
                    };
                    features.push(f64::from((p + noise) as f32));
                }
            }
        }
    }

    let n_test = (spec.samples_per_class as f64 * spec.test_seen_fraction).floor() as usize;
    let n_train = spec.samples_per_class - n_test;
    let mut train_idx = Vec::new();
    let mut test_seen_idx = Vec::new();
    let mut test_unseen_idx = Vec::new();
    for class in 0..c_total {
        let base = class * spec.samples_per_class;
        if class < spec.seen_classes {
            train_idx.extend(base..base + n_train);
            test_seen_idx.extend(base + n_train..base + spec.samples_per_class);
        } else {
            test_unseen_idx.extend(base..base + spec.samples_per_class);
        }
    }

    Ok(Dataset {
        features: FeatureStack::new(n, spec.regions, spec.visual_dim, features)?,
        attributes,
        class_semantics,
        labels,
        seen_classes: (0..spec.seen_classes).collect(),
        unseen_classes: (spec.seen_classes..c_total).collect(),
        train_idx,
        test_seen_idx,
        test_unseen_idx,
        extras: vec![
            Tensor::i32(
                REGION_ATTRIBUTES,
                vec![n as u32, spec.regions as u32],
                region_attrs,
            ),
            super::dataset::matrix_tensor(GENERATOR_MAP, &map),
        ],
    })
}
