//! The two mutual attention sub-nets.
//!
//! Conventions for a single image: `v` is `R × d_v` (one region per row) and
//! `a` is `K × d_a` (one attribute vector per row).
//!
//! * attribute→visual: `β = softmax_k(A W₁ Vᵀ)` (each column sums to one),
//!   `F = β V`, `ψ_k = a_kᵀ W₂ F_k`.
//! * visual→attribute: `τ = softmax_r(V W₃ Aᵀ)` (each column sums to one),
//!   `S = τ A`, `Ψ̄_r = v_rᵀ W₄ S_r`, `Att = V W_att Aᵀ`, `Ψ = Attᵀ Ψ̄`.

use std::path::Path;

use crate::data::{i32_payload, matrix_from, matrix_tensor, Container, Tensor};
use crate::error::{Error, Result};
use crate::ndmath::{rng_uniform, softmax_backward, Axis, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub visual_dim: usize,
    pub attr_dim: usize,
    pub attributes: usize,
    pub regions: usize,
}

impl Dims {
    pub fn of(ds: &crate::data::Dataset) -> Self {
        Self {
            visual_dim: ds.features.dim(),
            attr_dim: ds.attributes.cols(),
            attributes: ds.attributes.rows(),
            regions: ds.features.regions(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.visual_dim == 0 || self.attr_dim == 0 || self.attributes == 0 || self.regions == 0 {
            return Err(Error::Argument(format!(
                "all dims must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Learnable matrices of both sub-nets.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: Dims,
    /// `d_a × d_v`, attribute/region similarity for the attribute→visual attention.
    pub w1: Matrix,
    /// `d_a × d_v`, embeds attended visual features against attribute vectors.
    pub w2: Matrix,
    /// `d_v × d_a`, region/attribute similarity for the visual→attribute attention.
    pub w3: Matrix,
    /// `d_v × d_a`, embeds attended attribute features against regions.
    pub w4: Matrix,
    /// `d_v × d_a`, maps region scores into attribute space.
    pub w_att: Matrix,
}

pub const PARAM_NAMES: [&str; 5] = ["W1", "W2", "W3", "W4", "W_att"];

impl ModelParams {
    pub fn zeros(dims: Dims) -> Self {
        let (dv, da) = (dims.visual_dim, dims.attr_dim);
        Self {
            dims,
            w1: Matrix::zeros(da, dv),
            w2: Matrix::zeros(da, dv),
            w3: Matrix::zeros(dv, da),
            w4: Matrix::zeros(dv, da),
            w_att: Matrix::zeros(dv, da),
        }
    }

    pub fn matrices(&self) -> [&Matrix; 5] {
        [&self.w1, &self.w2, &self.w3, &self.w4, &self.w_att]
    }

    pub fn matrices_mut(&mut self) -> [&mut Matrix; 5] {
        [
            &mut self.w1,
            &mut self.w2,
            &mut self.w3,
            &mut self.w4,
            &mut self.w_att,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().iter().all(|m| m.is_finite())
    }

    /// Checks that these parameters fit a dataset with the given dims.
    pub fn check_compatible(&self, dims: Dims) -> Result<()> {
        if self.dims.visual_dim != dims.visual_dim || self.dims.attr_dim != dims.attr_dim {
            return Err(Error::Shape {
                op: "checkpoint vs dataset (d_v, d_a)",
                lhs: (self.dims.visual_dim, self.dims.attr_dim),
                rhs: (dims.visual_dim, dims.attr_dim),
            });
        }
        if self.dims.attributes != dims.attributes || self.dims.regions != dims.regions {
            return Err(Error::Shape {
                op: "checkpoint vs dataset (K, R)",
                lhs: (self.dims.attributes, self.dims.regions),
                rhs: (dims.attributes, dims.regions),
            });
        }
        Ok(())
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        for (name, m) in PARAM_NAMES.iter().zip(self.matrices()) {
            c.push(matrix_tensor(name, m));
        }
        let d = self.dims;
        c.push(Tensor::i32_vec(
            "dims",
            [d.visual_dim, d.attr_dim, d.attributes, d.regions]
                .iter()
                .map(|&x| x as i32)
                .collect(),
        ));
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let raw = i32_payload(c.require("dims")?)?;
        let [dv, da, k, r]: [i32; 4] = raw.try_into().map_err(|_| {
            Error::Malformed(format!("dims must have 4 entries, has {}", raw.len()))
        })?;
        let to_usize =
            |x: i32| usize::try_from(x).map_err(|_| Error::Malformed(format!("negative dim {x}")));
        let dims = Dims {
            visual_dim: to_usize(dv)?,
            attr_dim: to_usize(da)?,
            attributes: to_usize(k)?,
            regions: to_usize(r)?,
        };
        let mut p = ModelParams::zeros(dims);
        for (name, slot) in PARAM_NAMES.iter().zip(p.matrices_mut()) {
            let m = matrix_from(c.require(name)?)?;
            if m.shape() != slot.shape() {
                return Err(Error::Shape {
                    op: "checkpoint tensor vs dims",
                    lhs: m.shape(),
                    rhs: slot.shape(),
                });
            }
            *slot = m;
        }
        Ok(p)
    }

    /// Writes a checkpoint. Entries are stored as f32.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

/// Glorot-uniform initialization of all five matrices, in the order
/// W1, W2, W3, W4, W_att.
pub fn init_params(dims: Dims, seed: u64) -> Result<ModelParams> {
    dims.validate()?;
    let mut rng = Rng::new(seed);
    let mut p = ModelParams::zeros(dims);
    for m in p.matrices_mut() {
        let (rows, cols) = m.shape();
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        *m = rng_uniform(&mut rng, -limit, limit, rows, cols)?;
    }
    Ok(p)
}

/// Intermediate values of the attribute→visual sub-net for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct A2vTrace {
    /// `K × R`; column `r` is a distribution over attributes.
    pub beta: Matrix,
    /// `K × d_v`, attribute-based visual features.
    pub features: Matrix,
    /// Length `K`.
    pub psi: Vec<f64>,
}

/// Intermediate values of the visual→attribute sub-net for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct V2aTrace {
    /// `R × K`; column `k` is a distribution over regions.
    pub tau: Matrix,
    /// `R × d_a`, visual-based attribute features.
    pub attr_features: Matrix,
    /// Length `R`.
    pub psi_bar: Vec<f64>,
    /// `R × K`, `V W_att Aᵀ`.
    pub att: Matrix,
    /// Length `K`.
    pub psi_mapped: Vec<f64>,
}

/// Both sub-nets' outputs for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub a2v: A2vTrace,
    pub v2a: V2aTrace,
}

impl ForwardTrace {
    pub fn beta(&self) -> &Matrix {
        &self.a2v.beta
    }

    pub fn tau(&self) -> &Matrix {
        &self.v2a.tau
    }

    /// Attribute→visual embedding ψ(x).
    pub fn psi(&self) -> &[f64] {
        &self.a2v.psi
    }

    /// Visual→attribute embedding Ψ(x).
    pub fn psi_mapped(&self) -> &[f64] {
        &self.v2a.psi_mapped
    }
}

fn check_inputs(v: &Matrix, a: &Matrix, p: &ModelParams) -> Result<()> {
    if v.cols() != p.dims.visual_dim || a.cols() != p.dims.attr_dim {
        return Err(Error::Shape {
            op: "forward (d_v, d_a) of inputs vs params",
            lhs: (v.cols(), a.cols()),
            rhs: (p.dims.visual_dim, p.dims.attr_dim),
        });
    }
    if v.rows() == 0 || a.rows() == 0 {
        return Err(Error::Shape {
            op: "forward (R, K)",
            lhs: (v.rows(), a.rows()),
            rhs: (1, 1),
        });
    }
    Ok(())
}

pub fn a2v_forward(v: &Matrix, a: &Matrix, p: &ModelParams) -> Result<A2vTrace> {
    check_inputs(v, a, p)?;
    let logits = a.matmul(&p.w1)?.matmul(&v.transpose())?;
    let beta = logits.softmax_stable(Axis::Column);
    let features = beta.matmul(v)?;
    let psi = a.matmul(&p.w2)?.row_dots(&features)?;
    Ok(A2vTrace {
        beta,
        features,
        psi,
    })
}

pub fn v2a_forward(v: &Matrix, a: &Matrix, p: &ModelParams) -> Result<V2aTrace> {
    check_inputs(v, a, p)?;
    let a_t = a.transpose();
    let logits = v.matmul(&p.w3)?.matmul(&a_t)?;
    let tau = logits.softmax_stable(Axis::Column);
    let attr_features = tau.matmul(a)?;
    let psi_bar = v.matmul(&p.w4)?.row_dots(&attr_features)?;
    let att = v.matmul(&p.w_att)?.matmul(&a_t)?;
    let psi_mapped = att.tr_matvec(&psi_bar)?;
    Ok(V2aTrace {
        tau,
        attr_features,
        psi_bar,
        att,
        psi_mapped,
    })
}

pub fn forward(v: &Matrix, a: &Matrix, p: &ModelParams) -> Result<ForwardTrace> {
    Ok(ForwardTrace {
        a2v: a2v_forward(v, a, p)?,
        v2a: v2a_forward(v, a, p)?,
    })
}

/// Compatibility of an embedding with every class: `score[c] = ⟨e, z^c⟩`.
pub fn class_scores(embedding: &[f64], class_semantics: &Matrix) -> Result<Vec<f64>> {
    class_semantics.matvec(embedding)
}

/// Backward of a column-wise softmax given its output and upstream gradient.
fn softmax_columns_backward(probs: &Matrix, upstream: &Matrix) -> Matrix {
    let p_t = probs.transpose();
    let g_t = upstream.transpose();
    let mut out = Matrix::zeros(p_t.rows(), p_t.cols());
    for c in 0..p_t.rows() {
        out.row_mut(c)
            .copy_from_slice(&softmax_backward(p_t.row(c), g_t.row(c)));
    }
    out.transpose()
}

/// Accumulates `∂L/∂W1` and `∂L/∂W2` into `grads` given `∂L/∂ψ`.
pub fn a2v_backward(
    v: &Matrix,
    a: &Matrix,
    p: &ModelParams,
    trace: &A2vTrace,
    d_psi: &[f64],
    grads: &mut ModelParams,
) -> Result<()> {
    // ψ_k = a_kᵀ W₂ F_k
    let aw2 = a.matmul(&p.w2)?;
    let d_features = aw2.scale_rows(d_psi)?;
    let d_w2 = a.transpose().matmul(&trace.features.scale_rows(d_psi)?)?;
    // F = β V
    let d_beta = d_features.matmul(&v.transpose())?;
    let d_logits = softmax_columns_backward(&trace.beta, &d_beta);
    // logits = A W₁ Vᵀ
    let d_w1 = a.transpose().matmul(&d_logits)?.matmul(v)?;
    grads.w1.axpy(1.0, &d_w1)?;
    grads.w2.axpy(1.0, &d_w2)?;
    Ok(())
}

/// Accumulates `∂L/∂W3`, `∂L/∂W4` and `∂L/∂W_att` into `grads` given `∂L/∂Ψ`.
pub fn v2a_backward(
    v: &Matrix,
    a: &Matrix,
    p: &ModelParams,
    trace: &V2aTrace,
    d_psi_mapped: &[f64],
    grads: &mut ModelParams,
) -> Result<()> {
    let v_t = v.transpose();
    // Ψ = Attᵀ Ψ̄
    let d_psi_bar = trace.att.matvec(d_psi_mapped)?;
    let mut d_att = Matrix::zeros(trace.att.rows(), trace.att.cols());
    for (r, &pb) in trace.psi_bar.iter().enumerate() {
        for (o, &g) in d_att.row_mut(r).iter_mut().zip(d_psi_mapped) {
            *o = pb * g;
        }
    }
    // Att = V W_att Aᵀ
    let d_w_att = v_t.matmul(&d_att)?.matmul(a)?;
    // Ψ̄_r = v_rᵀ W₄ S_r
    let vw4 = v.matmul(&p.w4)?;
    let d_attr_features = vw4.scale_rows(&d_psi_bar)?;
    let d_w4 = v_t.matmul(&trace.attr_features.scale_rows(&d_psi_bar)?)?;
    // S = τ A
    let d_tau = d_attr_features.matmul(&a.transpose())?;
    let d_logits = softmax_columns_backward(&trace.tau, &d_tau);
    // logits = V W₃ Aᵀ
    let d_w3 = v_t.matmul(&d_logits)?.matmul(a)?;
    grads.w3.axpy(1.0, &d_w3)?;
    grads.w4.axpy(1.0, &d_w4)?;
    grads.w_att.axpy(1.0, &d_w_att)?;
    Ok(())
}
