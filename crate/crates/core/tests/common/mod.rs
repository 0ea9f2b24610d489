//! Scalar-loop reference implementations and random tiny instances shared by
//! the integration tests. Nothing here calls the library's math routines.
#![allow(dead_code)]

use msdn_core::model::{Dims, ModelParams};
use msdn_core::ndmath::{Matrix, Rng};

pub type Grid = Vec<Vec<f64>>;

pub fn grid(m: &Matrix) -> Grid {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff_grid(a: &Matrix, b: &Grid) -> f64 {
    assert_eq!(a.rows(), b.len());
    (0..a.rows())
        .map(|r| max_abs_diff(a.row(r), &b[r]))
        .fold(0.0, f64::max)
}

/// `x_iᵀ W y_j` by explicit summation.
fn bilinear(x: &[f64], w: &Grid, y: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, xi) in x.iter().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            s += xi * w[i][j] * yj;
        }
    }
    s
}

fn naive_softmax(xs: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

pub struct A2vOracle {
    pub beta: Grid,
    pub features: Grid,
    pub psi: Vec<f64>,
}

pub fn a2v_oracle(v: &Grid, a: &Grid, w1: &Grid, w2: &Grid) -> A2vOracle {
    let (k_n, r_n, dv) = (a.len(), v.len(), v[0].len());
    let mut beta = vec![vec![0.0; r_n]; k_n];
    for r in 0..r_n {
        let logits: Vec<f64> = (0..k_n).map(|k| bilinear(&a[k], w1, &v[r])).collect();
        for (k, p) in naive_softmax(&logits).into_iter().enumerate() {
            beta[k][r] = p;
        }
    }
    let mut features = vec![vec![0.0; dv]; k_n];
    for k in 0..k_n {
        for j in 0..dv {
            for r in 0..r_n {
                features[k][j] += beta[k][r] * v[r][j];
            }
        }
    }
    let psi = (0..k_n)
        .map(|k| bilinear(&a[k], w2, &features[k]))
        .collect();
    A2vOracle {
        beta,
        features,
        psi,
    }
}

pub struct V2aOracle {
    pub tau: Grid,
    pub attr_features: Grid,
    pub psi_bar: Vec<f64>,
    pub psi_mapped: Vec<f64>,
}

pub fn v2a_oracle(v: &Grid, a: &Grid, w3: &Grid, w4: &Grid, w_att: &Grid) -> V2aOracle {
    let (k_n, r_n, da) = (a.len(), v.len(), a[0].len());
    let mut tau = vec![vec![0.0; k_n]; r_n];
    for k in 0..k_n {
        let logits: Vec<f64> = (0..r_n).map(|r| bilinear(&v[r], w3, &a[k])).collect();
        for (r, p) in naive_softmax(&logits).into_iter().enumerate() {
            tau[r][k] = p;
        }
    }
    let mut attr_features = vec![vec![0.0; da]; r_n];
    for r in 0..r_n {
        for i in 0..da {
            for k in 0..k_n {
                attr_features[r][i] += tau[r][k] * a[k][i];
            }
        }
    }
    let psi_bar: Vec<f64> = (0..r_n)
        .map(|r| bilinear(&v[r], w4, &attr_features[r]))
        .collect();
    let mut psi_mapped = vec![0.0; k_n];
    for (k, out) in psi_mapped.iter_mut().enumerate() {
        for r in 0..r_n {
            *out += bilinear(&v[r], w_att, &a[k]) * psi_bar[r];
        }
    }
    V2aOracle {
        tau,
        attr_features,
        psi_bar,
        psi_mapped,
    }
}

fn indicator(c: usize, unseen: &[usize]) -> f64 {
    if unseen.contains(&c) {
        1.0
    } else {
        -1.0
    }
}

/// Batch-mean cross-entropy over seen classes plus `λ` times the summed
/// negative log-probabilities of unseen classes under the offset softmax.
pub fn acec_oracle(
    scores: &Grid,
    labels: &[usize],
    seen: &[usize],
    unseen: &[usize],
    lambda: f64,
) -> f64 {
    let mut total = 0.0;
    for (s, &y) in scores.iter().zip(labels) {
        let z_seen: f64 = seen.iter().map(|&c| s[c].exp()).sum();
        total -= (s[y].exp() / z_seen).ln();
        let z_all: f64 = (0..s.len())
            .map(|c| (s[c] + indicator(c, unseen)).exp())
            .sum();
        for &u in unseen {
            total -= lambda * ((s[u] + 1.0).exp() / z_all).ln();
        }
    }
    total / scores.len() as f64
}

fn clamped(s: &[f64], eps: f64) -> Vec<f64> {
    let p: Vec<f64> = naive_softmax(s)
        .into_iter()
        .map(|x| x.max(eps).min(1.0))
        .collect();
    let z: f64 = p.iter().sum();
    p.iter().map(|x| x / z).collect()
}

/// Batch mean of `½(KL(p‖q) + KL(q‖p)) + ‖p − q‖²`.
pub fn distill_oracle(s1: &Grid, s2: &Grid, eps: f64) -> f64 {
    let mut total = 0.0;
    for (a, b) in s1.iter().zip(s2) {
        let p = clamped(a, eps);
        let q = clamped(b, eps);
        let mut kl_pq = 0.0;
        let mut kl_qp = 0.0;
        let mut l2 = 0.0;
        for c in 0..p.len() {
            kl_pq += p[c] * (p[c] / q[c]).ln();
            kl_qp += q[c] * (q[c] / p[c]).ln();
            l2 += (p[c] - q[c]).powi(2);
        }
        total += 0.5 * (kl_pq + kl_qp) + l2;
    }
    total / s1.len() as f64
}

/// First maximum of the calibrated fused scores over `candidates`
/// (candidates are visited in ascending order).
pub fn predict_oracle(
    psi: &[f64],
    psi_mapped: &[f64],
    z: &Grid,
    unseen: &[usize],
    candidates: &[usize],
    alpha: (f64, f64),
) -> usize {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    let mut best = sorted[0];
    let mut best_score = f64::NEG_INFINITY;
    for &c in &sorted {
        let mut s = 0.0;
        for k in 0..psi.len() {
            s += (alpha.0 * psi[k] + alpha.1 * psi_mapped[k]) * z[c][k];
        }
        s += indicator(c, unseen);
        if s > best_score {
            best = c;
            best_score = s;
        }
    }
    best
}

pub fn random_matrix(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.uniform(-scale, scale))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// One image, attribute table and parameter set with small random sizes.
pub struct Tiny {
    pub v: Matrix,
    pub a: Matrix,
    pub params: ModelParams,
}

pub fn tiny(rng: &mut Rng) -> Tiny {
    let dims = Dims {
        visual_dim: 1 + (rng.next_f64() * 5.0) as usize,
        attr_dim: 1 + (rng.next_f64() * 5.0) as usize,
        attributes: 1 + (rng.next_f64() * 6.0) as usize,
        regions: 1 + (rng.next_f64() * 6.0) as usize,
    };
    let mut params = ModelParams::zeros(dims);
    for m in params.matrices_mut() {
        let (r, c) = m.shape();
        *m = random_matrix(rng, r, c, 1.0);
    }
    Tiny {
        v: random_matrix(rng, dims.regions, dims.visual_dim, 1.0),
        a: random_matrix(rng, dims.attributes, dims.attr_dim, 1.0),
        params,
    }
}

/// Largest absolute deviation between library and oracle, per function.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleErrors {
    pub a2v: f64,
    pub v2a: f64,
    pub acec: f64,
    pub distill: f64,
    /// Number of disagreeing predictions.
    pub predict_mismatches: usize,
}

impl OracleErrors {
    pub fn max_value_error(&self) -> f64 {
        [self.a2v, self.v2a, self.acec, self.distill]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn oracle_sweep(instances: usize, seed: u64) -> OracleErrors {
    use msdn_core::eval::{predict, Mode, PredictConfig};
    use msdn_core::losses::{acec_loss, distill_loss, LossConfig};
    use msdn_core::model::{a2v_forward, forward, v2a_forward};

    let mut rng = Rng::new(seed);
    let mut err = OracleErrors::default();
    for _ in 0..instances {
        let t = tiny(&mut rng);
        let (v, a) = (grid(&t.v), grid(&t.a));
        let p = &t.params;

        let got = a2v_forward(&t.v, &t.a, p).unwrap();
        let want = a2v_oracle(&v, &a, &grid(&p.w1), &grid(&p.w2));
        err.a2v = err
            .a2v
            .max(max_abs_diff_grid(&got.beta, &want.beta))
            .max(max_abs_diff_grid(&got.features, &want.features))
            .max(max_abs_diff(&got.psi, &want.psi));

        let got = v2a_forward(&t.v, &t.a, p).unwrap();
        let want = v2a_oracle(&v, &a, &grid(&p.w3), &grid(&p.w4), &grid(&p.w_att));
        err.v2a = err
            .v2a
            .max(max_abs_diff_grid(&got.tau, &want.tau))
            .max(max_abs_diff_grid(&got.attr_features, &want.attr_features))
            .max(max_abs_diff(&got.psi_bar, &want.psi_bar))
            .max(max_abs_diff(&got.psi_mapped, &want.psi_mapped));

        let seen_n = 1 + (rng.next_f64() * 4.0) as usize;
        let unseen_n = 1 + (rng.next_f64() * 3.0) as usize;
        let classes = seen_n + unseen_n;
        let mut order: Vec<usize> = (0..classes).collect();
        rng.shuffle(&mut order);
        let (seen, unseen) = (order[..seen_n].to_vec(), order[seen_n..].to_vec());
        let batch = 1 + (rng.next_f64() * 4.0) as usize;
        let scores = random_matrix(&mut rng, batch, classes, 3.0);
        let labels: Vec<usize> = (0..batch).map(|i| seen[i % seen_n]).collect();
        let lambda = rng.uniform(0.0, 1.0);
        let cfg = LossConfig {
            lambda_cal: lambda,
            ..LossConfig::default()
        };
        let (got, _) = acec_loss(&scores, &labels, &seen, &unseen, &cfg).unwrap();
        let want = acec_oracle(&grid(&scores), &labels, &seen, &unseen, lambda);
        err.acec = err.acec.max((got - want).abs());

        let other = random_matrix(&mut rng, batch, classes, 3.0);
        let (got, _, _) = distill_loss(&scores, &other, &cfg).unwrap();
        let want = distill_oracle(&grid(&scores), &grid(&other), cfg.epsilon_kl);
        err.distill = err.distill.max((got - want).abs());

        let z = Matrix::from_vec(
            classes,
            t.a.rows(),
            (0..classes * t.a.rows()).map(|_| rng.next_f64()).collect(),
        )
        .unwrap();
        let trace = forward(&t.v, &t.a, p).unwrap();
        let alpha = (rng.next_f64(), rng.next_f64() + 0.01);
        for mode in [Mode::Czsl, Mode::Gzsl] {
            let pc = PredictConfig {
                alpha1: alpha.0,
                alpha2: alpha.1,
                mode,
            };
            let got = predict(&trace, &z, &seen, &unseen, &pc).unwrap();
            let candidates: Vec<usize> = match mode {
                Mode::Czsl => unseen.clone(),
                Mode::Gzsl => (0..classes).collect(),
            };
            let want = predict_oracle(
                trace.psi(),
                trace.psi_mapped(),
                &grid(&z),
                &unseen,
                &candidates,
                alpha,
            );
            err.predict_mismatches += usize::from(got != want);
        }
    }
    err
}
