//! Property tests for the solver-facing invariants.

use proptest::prelude::*;

use qrk_core::linalg::{norm, row_normalize, sample_without_replacement, DenseMatrix};
use qrk_core::quantile::q_quantile;
use qrk_core::solvers::project;
use qrk_core::SeedRng;

fn sort_oracle(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = ((q * v.len() as f64).floor() as usize).max(1);
    v[k - 1]
}

proptest! {
    #[test]
    fn quantile_matches_sort_oracle(
        values in prop::collection::vec(-50i32..50, 1..400),
        q in 0.01f64..0.99,
    ) {
        // Integer-derived values force heavy ties.
        let v: Vec<f64> = values.iter().map(|&x| x as f64 / 4.0).collect();
        let k = (q * v.len() as f64).floor() as usize;
        prop_assume!(k >= 1 || v.len() == 1);
        prop_assert_eq!(q_quantile(&v, q).unwrap(), sort_oracle(&v, q));
    }

    #[test]
    fn quantile_permutation_invariant(
        values in prop::collection::vec(-1000f64..1000.0, 2..200),
        q in 0.01f64..0.99,
        rot in 0usize..199,
    ) {
        prop_assume!((q * values.len() as f64).floor() as usize >= 1);
        let mut rotated = values.clone();
        rotated.rotate_left(rot % values.len());
        prop_assert_eq!(q_quantile(&values, q).unwrap(), q_quantile(&rotated, q).unwrap());
    }

    #[test]
    fn quantile_monotone_in_q(
        values in prop::collection::vec(-1000f64..1000.0, 2..200),
        q1 in 0.01f64..0.99,
        q2 in 0.01f64..0.99,
    ) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        prop_assume!((lo * values.len() as f64).floor() as usize >= 1);
        prop_assert!(q_quantile(&values, lo).unwrap() <= q_quantile(&values, hi).unwrap());
    }

    #[test]
    fn normalize_idempotent_and_unit(seed in any::<u64>(), m in 1usize..20, n in 1usize..8) {
        let mut rng = SeedRng::new(seed);
        let raw = DenseMatrix::from_fn(m, n, |_, _| rng.gen_gaussian() + 0.1);
        prop_assume!((0..m).all(|i| norm(raw.row(i)) > 1e-12));
        let once = row_normalize(&raw).unwrap();
        for i in 0..m {
            prop_assert!((norm(once.row(i)) - 1.0).abs() < 1e-12);
        }
        let twice = row_normalize(once.inner()).unwrap();
        for (a, b) in once.inner().data().iter().zip(twice.inner().data()) {
            prop_assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn sampling_yields_k_distinct_in_range(seed in any::<u64>(), m in 1usize..300, frac in 0.01f64..1.0) {
        let k = ((frac * m as f64).ceil() as usize).clamp(1, m);
        let mut rng = SeedRng::new(seed);
        let s = sample_without_replacement(m, k, &mut rng).unwrap();
        prop_assert_eq!(s.len(), k);
        let mut prev = None;
        for i in s.iter() {
            prop_assert!(i < m);
            if let Some(p) = prev {
                prop_assert!(i > p);
            }
            prev = Some(i);
        }
    }

    #[test]
    fn projection_lands_on_hyperplane(
        seed in any::<u64>(),
        n in 1usize..10,
        b_hat in -100f64..100.0,
    ) {
        let mut rng = SeedRng::new(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_gaussian() * 10.0).collect();
        let mut a: Vec<f64> = (0..n).map(|_| rng.gen_gaussian()).collect();
        let nrm = norm(&a);
        prop_assume!(nrm > 1e-6);
        a.iter_mut().for_each(|v| *v /= nrm);
        let x2 = project(&x, &a, b_hat);
        let r: f64 = x2.iter().zip(&a).map(|(xi, ai)| xi * ai).sum::<f64>() - b_hat;
        prop_assert!(r.abs() < 1e-9, "residual {r}");
    }
}
