mod common;

use common::*;
use msdn_core::ndmath::{matmul, Rng};

#[test]
fn library_matches_scalar_loops() {
    let err = oracle_sweep(100, 7);
    assert!(err.a2v <= 1e-12, "a2v {err:?}");
    assert!(err.v2a <= 1e-12, "v2a {err:?}");
    assert!(err.acec <= 1e-12, "acec {err:?}");
    assert!(err.distill <= 1e-12, "distill {err:?}");
    assert_eq!(err.predict_mismatches, 0);
}

#[test]
fn matmul_matches_triple_loop() {
    let mut rng = Rng::new(3);
    for _ in 0..50 {
        let (n, k, m) = (
            1 + (rng.next_f64() * 7.0) as usize,
            1 + (rng.next_f64() * 7.0) as usize,
            1 + (rng.next_f64() * 7.0) as usize,
        );
        let a = random_matrix(&mut rng, n, k, 2.0);
        let b = random_matrix(&mut rng, k, m, 2.0);
        let c = matmul(&a, &b).unwrap();
        for i in 0..n {
            for j in 0..m {
                let want: f64 = (0..k).map(|t| a[(i, t)] * b[(t, j)]).sum();
                assert!((c[(i, j)] - want).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn predict_breaks_ties_toward_smallest_index() {
    use msdn_core::eval::argmax_over;
    assert_eq!(argmax_over(&[1.0, 3.0, 3.0, 3.0], &[3, 2, 1]).unwrap(), 1);
    assert_eq!(argmax_over(&[0.0, 0.0], &[1, 0]).unwrap(), 0);
}
