use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use super::container::{Container, Tensor, TensorData};
use crate::error::{Error, Result};
use crate::ndmath::Matrix;

/// Region features for every image: an `N × R × d_v` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    images: usize,
    regions: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureStack {
    pub fn new(images: usize, regions: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != images * regions * dim {
            return Err(Error::Argument(format!(
                "feature stack {images}x{regions}x{dim} needs {} values, got {}",
                images * regions * dim,
                data.len()
            )));
        }
        Ok(Self {
            images,
            regions,
            dim,
            data,
        })
    }

    pub fn from_images(images: &[Matrix]) -> Result<Self> {
        let (regions, dim) = images.first().map_or((0, 0), Matrix::shape);
        let mut data = Vec::with_capacity(images.len() * regions * dim);
        for (i, m) in images.iter().enumerate() {
            if m.shape() != (regions, dim) {
                return Err(Error::Argument(format!(
                    "image {i} has shape {:?}, expected {:?}",
                    m.shape(),
                    (regions, dim)
                )));
            }
            data.extend_from_slice(m.as_slice());
        }
        Self::new(images.len(), regions, dim, data)
    }

    pub fn images(&self) -> usize {
        self.images
    }

    pub fn regions(&self) -> usize {
        self.regions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Regions of image `i` as an `R × d_v` matrix, one region per row.
    pub fn image(&self, i: usize) -> Matrix {
        let n = self.regions * self.dim;
        Matrix::from_vec(
            self.regions,
            self.dim,
            self.data[i * n..(i + 1) * n].to_vec(),
        )
        .expect("slice length matches")
    }
}

/// A zero-shot learning dataset.
///
/// Class indices are global in `[0, C)`; sample indices are in `[0, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: FeatureStack,
    /// `K × d_a`, one attribute word vector per row.
    pub attributes: Matrix,
    /// `C × K`, one class semantic vector per row.
    pub class_semantics: Matrix,
    pub labels: Vec<usize>,
    pub seen_classes: Vec<usize>,
    pub unseen_classes: Vec<usize>,
    pub train_idx: Vec<usize>,
    pub test_seen_idx: Vec<usize>,
    pub test_unseen_idx: Vec<usize>,
    /// Tensors without a dedicated field, kept verbatim for round-trips.
    pub extras: Vec<Tensor>,
}

/// One failed dataset invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

const REQUIRED: [&str; 9] = [
    "features",
    "attributes",
    "class_semantics",
    "labels",
    "seen_classes",
    "unseen_classes",
    "train_idx",
    "test_seen_idx",
    "test_unseen_idx",
];

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.class_semantics.rows()
    }

    pub fn num_attributes(&self) -> usize {
        self.attributes.rows()
    }

    pub fn extra(&self, name: &str) -> Option<&Tensor> {
        self.extras.iter().find(|t| t.name == name)
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        let f = &self.features;
        c.push(Tensor::f32(
            "features",
            vec![f.images as u32, f.regions as u32, f.dim as u32],
            narrow(&f.data),
        ));
        c.push(matrix_tensor("attributes", &self.attributes));
        c.push(matrix_tensor("class_semantics", &self.class_semantics));
        c.push(index_tensor("labels", &self.labels));
        c.push(index_tensor("seen_classes", &self.seen_classes));
        c.push(index_tensor("unseen_classes", &self.unseen_classes));
        c.push(index_tensor("train_idx", &self.train_idx));
        c.push(index_tensor("test_seen_idx", &self.test_seen_idx));
        c.push(index_tensor("test_unseen_idx", &self.test_unseen_idx));
        for t in &self.extras {
            c.push(t.clone());
        }
        c
    }

    /// Decodes a container. Structural problems are errors; the semantic
    /// invariants are then checked with [`validate_dataset`].
    pub fn from_container(c: &Container) -> Result<Self> {
        let features = {
            let t = c.require("features")?;
            let v = f32_payload(t)?;
            let [n, r, d] = dims::<3>(t)?;
            FeatureStack::new(n, r, d, v)?
        };
        let attributes = matrix_from(c.require("attributes")?)?;
        let class_semantics = matrix_from(c.require("class_semantics")?)?;
        let mut negatives = Vec::new();
        let mut idx = |name: &str| -> Result<Vec<usize>> {
            let t = c.require(name)?;
            let (v, neg) = index_payload(t)?;
            if neg > 0 {
                negatives.push(Violation {
                    invariant: "indices within bounds",
                    detail: format!("{name} has {neg} negative entries"),
                });
            }
            Ok(v)
        };
        let ds = Dataset {
            features,
            attributes,
            class_semantics,
            labels: idx("labels")?,
            seen_classes: idx("seen_classes")?,
            unseen_classes: idx("unseen_classes")?,
            train_idx: idx("train_idx")?,
            test_seen_idx: idx("test_seen_idx")?,
            test_unseen_idx: idx("test_unseen_idx")?,
            extras: c
                .tensors
                .iter()
                .filter(|t| !REQUIRED.contains(&t.name.as_str()))
                .cloned()
                .collect(),
        };
        if !negatives.is_empty() {
            return Err(Error::InvalidDataset(
                negatives.iter().map(ToString::to_string).collect(),
            ));
        }
        Ok(ds)
    }
}

/// Writes `ds` in the `ZSLD` container format. Values are narrowed to f32.
pub fn save_container(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    ds.to_container().save(path)
}

/// Reads and validates a dataset container.
pub fn load_container(path: impl AsRef<Path>) -> Result<Dataset> {
    let ds = Dataset::from_container(&Container::load(path)?)?;
    let violations = validate_dataset(&ds);
    if !violations.is_empty() {
        return Err(Error::InvalidDataset(
            violations.iter().map(ToString::to_string).collect(),
        ));
    }
    Ok(ds)
}

/// Returns every violated dataset invariant; empty means valid.
pub fn validate_dataset(ds: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push =
        |invariant: &'static str, detail: String| out.push(Violation { invariant, detail });

    let n = ds.features.images();
    let c = ds.num_classes();
    let k = ds.num_attributes();

    for (name, data, shape) in [
        (
            "features",
            ds.features.as_slice(),
            vec![n, ds.features.regions(), ds.features.dim()],
        ),
        (
            "attributes",
            ds.attributes.as_slice(),
            vec![k, ds.attributes.cols()],
        ),
        ("class_semantics", ds.class_semantics.as_slice(), vec![c, k]),
    ] {
        let bad: Vec<usize> = data
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_finite())
            .map(|(i, _)| i)
            .collect();
        if let Some(&first) = bad.first() {
            push(
                "finite values",
                format!(
                    "{name}{:?} is {} ({} non-finite entries)",
                    unravel(first, &shape),
                    data[first],
                    bad.len()
                ),
            );
        }
    }

    if ds.class_semantics.cols() != k {
        push(
            "consistent shapes",
            format!(
                "class_semantics has {} columns but there are {k} attributes",
                ds.class_semantics.cols()
            ),
        );
    }
    if ds.labels.len() != n {
        push(
            "consistent shapes",
            format!("{} labels for {n} images", ds.labels.len()),
        );
    }
    if let Some((i, &l)) = ds.labels.iter().enumerate().find(|(_, &l)| l >= c) {
        push(
            "labels within bounds",
            format!("labels[{i}] = {l} but there are {c} classes"),
        );
    }

    let mut class_sets_ok = true;
    for (name, set) in [
        ("seen_classes", &ds.seen_classes),
        ("unseen_classes", &ds.unseen_classes),
    ] {
        if let Some(&bad) = set.iter().find(|&&x| x >= c) {
            push(
                "indices within bounds",
                format!("{name} contains {bad} >= {c}"),
            );
            class_sets_ok = false;
        }
        if has_duplicates(set) {
            push("no duplicate indices", format!("{name} repeats a class"));
        }
    }
    let seen: BTreeSet<usize> = ds.seen_classes.iter().copied().collect();
    let unseen: BTreeSet<usize> = ds.unseen_classes.iter().copied().collect();
    let overlap: Vec<usize> = seen.intersection(&unseen).copied().collect();
    if !overlap.is_empty() {
        push(
            "seen/unseen disjoint",
            format!("classes {overlap:?} are both seen and unseen"),
        );
    }
    if class_sets_ok {
        let missing: Vec<usize> = (0..c)
            .filter(|x| !seen.contains(x) && !unseen.contains(x))
            .collect();
        if !missing.is_empty() {
            push(
                "seen/unseen cover all classes",
                format!("classes {missing:?} are neither seen nor unseen"),
            );
        }
    }

    let splits = [
        ("train_idx", &ds.train_idx, &seen, "seen"),
        ("test_seen_idx", &ds.test_seen_idx, &seen, "seen"),
        ("test_unseen_idx", &ds.test_unseen_idx, &unseen, "unseen"),
    ];
    let mut owner: Vec<Option<&str>> = vec![None; n];
    for (name, idx, allowed, kind) in splits {
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            push(
                "indices within bounds",
                format!("{name} contains {bad} >= {n}"),
            );
            continue;
        }
        for &i in idx.iter() {
            if let Some(prev) = owner[i] {
                push(
                    "disjoint sample splits",
                    format!("sample {i} appears in both {prev} and {name}"),
                );
                break;
            }
            owner[i] = Some(name);
        }
        if let Some(&i) = idx.iter().find(|&&i| {
            ds.labels
                .get(i)
                .is_some_and(|&l| l < c && !allowed.contains(&l))
        }) {
            push(
                "split labels match class split",
                format!(
                    "{name} sample {i} has label {} which is not {kind}",
                    ds.labels[i]
                ),
            );
        }
    }
    out
}

fn has_duplicates(v: &[usize]) -> bool {
    let mut s = BTreeSet::new();
    !v.iter().all(|x| s.insert(*x))
}

fn unravel(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for (slot, &d) in idx.iter_mut().zip(shape).rev() {
        if d > 0 {
            *slot = flat % d;
            flat /= d;
        }
    }
    idx
}

fn narrow(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

pub(crate) fn matrix_tensor(name: &str, m: &Matrix) -> Tensor {
    Tensor::f32(
        name,
        vec![m.rows() as u32, m.cols() as u32],
        narrow(m.as_slice()),
    )
}

fn index_tensor(name: &str, v: &[usize]) -> Tensor {
    Tensor::i32_vec(name, v.iter().map(|&x| x as i32).collect())
}

fn dims<const N: usize>(t: &Tensor) -> Result<[usize; N]> {
    if t.dims.len() != N {
        return Err(Error::Malformed(format!(
            "tensor {:?} must have {N} dims, has {:?}",
            t.name, t.dims
        )));
    }
    Ok(std::array::from_fn(|i| t.dims[i] as usize))
}

pub(crate) fn f32_payload(t: &Tensor) -> Result<Vec<f64>> {
    match &t.data {
        TensorData::F32(v) => Ok(v.iter().map(|&x| f64::from(x)).collect()),
        TensorData::I32(_) => Err(Error::Malformed(format!("tensor {:?} must be f32", t.name))),
    }
}

pub(crate) fn matrix_from(t: &Tensor) -> Result<Matrix> {
    let [r, c] = dims::<2>(t)?;
    Matrix::from_vec(r, c, f32_payload(t)?)
}

pub(crate) fn i32_payload(t: &Tensor) -> Result<&[i32]> {
    match &t.data {
        TensorData::I32(v) => Ok(v),
        TensorData::F32(_) => Err(Error::Malformed(format!("tensor {:?} must be i32", t.name))),
    }
}

/// Decodes a 1-D index tensor; returns the values and the count of negative
/// entries (which are mapped to `usize::MAX`).
fn index_payload(t: &Tensor) -> Result<(Vec<usize>, usize)> {
    dims::<1>(t)?;
    let v = i32_payload(t)?;
    let neg = v.iter().filter(|&&x| x < 0).count();
    Ok((
        v.iter()
            .map(|&x| usize::try_from(x).unwrap_or(usize::MAX))
            .collect(),
        neg,
    ))
}
