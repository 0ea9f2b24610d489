mod common;

use common::*;
use msdn_core::data::{generate_synthetic, validate_dataset, Container, SynthSpec};
use msdn_core::eval::{calibrated_scores, harmonic_mean, predict, Mode, PredictConfig};
use msdn_core::losses::{acec_loss, distill_loss, LossBreakdown, LossConfig};
use msdn_core::model::forward;
use msdn_core::ndmath::{matmul, softmax_stable, Axis, Matrix, Rng};
use msdn_core::training::make_batches;
use proptest::prelude::*;

fn scores(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-8.0f64..8.0, rows * cols)
        .prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn score_pair() -> impl Strategy<Value = (Matrix, Matrix)> {
    (1usize..5, 1usize..7).prop_flat_map(|(r, c)| (scores(r, c), scores(r, c)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn attention_columns_are_distributions(seed in any::<u64>(), scale in 0.01f64..20.0) {
        let mut rng = Rng::new(seed);
        let mut t = tiny(&mut rng);
        for m in t.params.matrices_mut() {
            *m = m.scale(scale);
        }
        let trace = forward(&t.v, &t.a, &t.params).unwrap();
        for s in trace.beta().col_sums() {
            prop_assert!((s - 1.0).abs() <= 1e-10);
        }
        for s in trace.tau().col_sums() {
            prop_assert!((s - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn distill_is_symmetric_and_non_negative((a, b) in score_pair()) {
        let cfg = LossConfig::default();
        let (ab, _, _) = distill_loss(&a, &b, &cfg).unwrap();
        let (ba, _, _) = distill_loss(&b, &a, &cfg).unwrap();
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        prop_assert!(ab >= 0.0);
        let (aa, _, _) = distill_loss(&a, &a, &cfg).unwrap();
        prop_assert_eq!(aa, 0.0);
    }
}

proptest! {
    #[test]
    fn softmax_is_shift_invariant(m in scores(3, 5), c in -50.0f64..50.0) {
        for axis in [Axis::Row, Axis::Column] {
            let p = softmax_stable(&m, axis);
            let q = softmax_stable(&m.map(|x| x + c), axis);
            prop_assert!(max_abs_diff(p.as_slice(), q.as_slice()) <= 1e-12);
            let sums = match axis {
                Axis::Row => p.row_sums(),
                Axis::Column => p.col_sums(),
            };
            for s in sums {
                prop_assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn matmul_is_associative(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let a = random_matrix(&mut rng, 3, 4, 1.0);
        let b = random_matrix(&mut rng, 4, 2, 1.0);
        let c = random_matrix(&mut rng, 2, 5, 1.0);
        let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
        let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
        prop_assert!(max_abs_diff(left.as_slice(), right.as_slice()) <= 1e-9);
    }

    #[test]
    fn seen_cross_entropy_ignores_constant_shift(m in scores(2, 5), c in -20.0f64..20.0) {
        let cfg = LossConfig { lambda_cal: 0.0, ..LossConfig::default() };
        let (seen, unseen) = ([0usize, 2, 4], [1usize, 3]);
        let labels = [2, 4];
        let (l0, _) = acec_loss(&m, &labels, &seen, &unseen, &cfg).unwrap();
        let (l1, _) = acec_loss(&m.map(|x| x + c), &labels, &seen, &unseen, &cfg).unwrap();
        prop_assert!((l0 - l1).abs() <= 1e-12);
        let want = acec_oracle(&grid(&m), &labels, &seen, &unseen, 0.0);
        prop_assert!((l0 - want).abs() <= 1e-12);
    }

    #[test]
    fn breakdown_total_is_weighted_sum(a in 0.0f64..10.0, b in 0.0f64..10.0, d in 0.0f64..10.0, l in 0.0f64..1.0) {
        let t = LossBreakdown::new(a, b, d, l);
        prop_assert!((t.total - (a + b + l * d)).abs() <= 1e-12);
    }

    #[test]
    fn predict_ignores_constant_shift_and_czsl_ignores_indicator(seed in any::<u64>(), shift in -5.0f64..5.0) {
        let mut rng = Rng::new(seed);
        let t = tiny(&mut rng);
        let k = t.a.rows();
        let z = random_matrix(&mut rng, 5, k, 1.0);
        let (seen, unseen) = (vec![0, 1, 2], vec![3, 4]);
        let trace = forward(&t.v, &t.a, &t.params).unwrap();
        for mode in [Mode::Czsl, Mode::Gzsl] {
            let cfg = PredictConfig::default().with_mode(mode);
            let s = calibrated_scores(trace.psi(), trace.psi_mapped(), &z, &unseen, &cfg).unwrap();
            let shifted: Vec<f64> = s.iter().map(|x| x + shift).collect();
            let candidates: Vec<usize> = if mode == Mode::Czsl { unseen.clone() } else { (0..5).collect() };
            let got = predict(&trace, &z, &seen, &unseen, &cfg).unwrap();
            prop_assert_eq!(got, msdn_core::eval::argmax_over(&shifted, &candidates).unwrap());
        }
        // CZSL: dropping the indicator (raw scores) picks the same class.
        let cfg = PredictConfig::default();
        let fused: Vec<f64> = trace.psi().iter().zip(trace.psi_mapped()).map(|(a, b)| 0.9 * a + 0.1 * b).collect();
        let raw = z.matvec(&fused).unwrap();
        let got = predict(&trace, &z, &seen, &unseen, &cfg).unwrap();
        prop_assert_eq!(got, msdn_core::eval::argmax_over(&raw, &unseen).unwrap());
    }

    #[test]
    fn gzsl_indicator_shifts_by_exactly_one(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let psi: Vec<f64> = (0..4).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let psi_m: Vec<f64> = (0..4).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let z = random_matrix(&mut rng, 6, 4, 1.0);
        let unseen = [1usize, 4];
        let cfg = PredictConfig::default().with_mode(Mode::Gzsl);
        let s = calibrated_scores(&psi, &psi_m, &z, &unseen, &cfg).unwrap();
        let fused: Vec<f64> = psi.iter().zip(&psi_m).map(|(a, b)| 0.9 * a + 0.1 * b).collect();
        let raw = z.matvec(&fused).unwrap();
        for c in 0..6 {
            let want = if unseen.contains(&c) { raw[c] + 1.0 } else { raw[c] - 1.0 };
            prop_assert_eq!(s[c], want);
        }
    }

    #[test]
    fn harmonic_mean_bounds(s in 0.0f64..=1.0, u in 0.0f64..=1.0) {
        let h = harmonic_mean(s, u).unwrap();
        prop_assert!(h <= 2.0 * s.min(u) + 1e-15);
        prop_assert!(h <= s.max(u) + 1e-15);
        prop_assert_eq!(h == 0.0, s * u == 0.0);
    }

    #[test]
    fn batches_partition_the_index_range(n in 1usize..200, bs in 1usize..64, seed in any::<u64>()) {
        let batches = make_batches(n, bs, &mut Rng::new(seed));
        let mut all: Vec<usize> = batches.iter().flatten().copied().collect();
        prop_assert!(batches.iter().all(|b| !b.is_empty() && b.len() <= bs));
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}

fn small_spec() -> impl Strategy<Value = SynthSpec> {
    (
        1usize..4,
        1usize..4,
        1usize..6,
        1usize..5,
        1usize..6,
        1usize..5,
        1usize..8,
        0.0f64..0.5,
        any::<u64>(),
    )
        .prop_map(|(cs, cu, k, r, dv, da, n, noise, seed)| SynthSpec {
            seen_classes: cs,
            unseen_classes: cu,
            attributes: k,
            regions: r,
            visual_dim: dv,
            attr_dim: da,
            samples_per_class: n,
            noise_std: noise,
            seed,
            ..SynthSpec::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_datasets_are_valid_and_round_trip(spec in small_spec()) {
        let ds = generate_synthetic(&spec).unwrap();
        prop_assert!(validate_dataset(&ds).is_empty());
        prop_assert_eq!(&generate_synthetic(&spec).unwrap(), &ds);
        let bytes = ds.to_container().to_bytes().unwrap();
        let back = Container::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        let ds2 = msdn_core::data::Dataset::from_container(&back).unwrap();
        prop_assert_eq!(ds2, ds);
    }
}
