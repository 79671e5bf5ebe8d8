use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use super::*;
use crate::linalg::{RngStream, Tensor};

fn logistic(seed: u64) -> LogisticRegression {
    LogisticRegression::synthetic(200, 5, 0.01, 0.1, &mut RngStream::new(seed, 0)).unwrap()
}

#[test]
fn quadratic_lipschitz_is_top_eigenvalue() {
    let q = Quadratic::new(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 3.0]]).unwrap()).unwrap();
    let points: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, -1.0], vec![-2.0, 0.5]];
    let est = estimate_lipschitz(&q, &points, 10_000, 1.0, &mut RngStream::new(1, 0)).unwrap();
    assert!(est.raw <= 3.0 * (1.0 + 1e-9), "{}", est.raw);
    assert!(est.raw > 2.5);
    assert_eq!(est.value, est.raw * 1.5);
}

#[test]
fn zero_displacement_pairs_are_skipped() {
    let q = Quadratic::new(Tensor::identity(2)).unwrap();
    let est = estimate_lipschitz(&q, &[vec![1.0, 1.0]], 10, 0.0, &mut RngStream::new(1, 0)).unwrap();
    assert_eq!(est.skipped, 10);
    assert_eq!(est.raw, 0.0);
}

#[test]
fn analytic_logistic_bound_matches_eigen_solver() {
    let p = logistic(3);
    let x = DMatrix::from_row_slice(p.x.rows(), p.x.cols(), p.x.data());
    let gram = x.transpose() * &x;
    let top = SymmetricEigen::new(gram).eigenvalues.max();
    let expected = top / (4.0 * 200.0) + 0.01;
    let got = logistic_lipschitz(&p).unwrap();
    assert!((got - expected).abs() <= 1e-6 * expected, "{got} vs {expected}");
}

#[test]
fn analytic_bound_dominates_sampled_secants() {
    let p = logistic(4);
    let l = logistic_lipschitz(&p).unwrap();
    let est = estimate_lipschitz(&p, &[vec![0.0; 5]], 2000, 1.0, &mut RngStream::new(2, 0)).unwrap();
    assert!(est.raw <= l * (1.0 + 1e-9));
}

#[test]
fn second_moment_of_empty_data_is_zero() {
    let p = LogisticRegression::new(Tensor::zeros(&[0, 3]), vec![], 0.1).unwrap();
    assert_eq!(estimate_second_moment(&p, &[vec![1.0, 2.0, 3.0]]), 0.0);
}

#[test]
fn second_moment_within_envelope() {
    let p = logistic(5);
    let cfg = BoundCheckConfig {
        h: 0.05,
        k: 5,
        iterations: 500,
        slow_coords: 2,
        seeds: vec![1],
        fstar_steps: 0,
        moment_stride: 1,
    };
    let (_, iterates) = multirate_trajectory(&p, &cfg, 1);
    let m = estimate_second_moment(&p, &iterates);
    let max_x = (0..200).map(|r| p.x.row(r).iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let max_t = iterates.iter().map(|t| t.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
    assert!(m <= (max_x + 0.01 * max_t).powi(2) * 1.5 + 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn second_moment_is_monotone_in_iterates(seed in 0u64..1000, extra in prop::collection::vec(-3.0f64..3.0, 5)) {
        let p = LogisticRegression::synthetic(30, 5, 0.01, 0.1, &mut RngStream::new(seed, 0)).unwrap();
        let base = vec![vec![0.0; 5]];
        let mut more = base.clone();
        more.push(extra);
        prop_assert!(estimate_second_moment(&p, &more) >= estimate_second_moment(&p, &base));
    }

    #[test]
    fn multirate_bound_dominates_sgd_bound_when_expected(
        h in 0.001f64..1.0, lip in 0.1f64..10.0, m in 0.1f64..10.0, k in 1usize..10, groups in 1usize..4,
    ) {
        let b = BoundInputs { h, iterations: 10 * k, k, lipschitz: lip, second_moment: m, groups, f0: 1.0, fstar: 0.0 };
        let factor = groups as f64 * (h * lip * (k * k) as f64 / 3.0 + 1.0);
        prop_assume!(factor >= 0.5);
        prop_assert!(theorem1_bound(&b).unwrap() >= sgd_bound(&b).unwrap());
    }

    #[test]
    fn speedup_formula_is_between_one_and_two(k in 1usize..50, layers in 1usize..60, fast in 1usize..60) {
        prop_assume!(fast <= layers);
        let r = speedup_ratio(k, layers, fast).unwrap();
        prop_assert!((1.0..2.0).contains(&r));
    }
}

#[test]
fn verify_rejects_unstable_stepsize() {
    let p = logistic(6);
    let l = logistic_lipschitz(&p).unwrap();
    let cfg = BoundCheckConfig {
        h: 1.5 / l,
        k: 5,
        iterations: 100,
        slow_coords: 2,
        seeds: vec![0],
        fstar_steps: 10,
        moment_stride: 1,
    };
    assert!(verify_bound(&p, &cfg).is_err());
}

#[test]
fn small_bound_check_holds() {
    let p = logistic(7);
    let cfg = BoundCheckConfig {
        h: 0.05,
        k: 5,
        iterations: 1000,
        slow_coords: 2,
        seeds: vec![0, 1, 2],
        fstar_steps: 5000,
        moment_stride: 10,
    };
    let report = verify_bound(&p, &cfg).unwrap();
    assert!(report.holds, "{report:?}");
    assert!(report.fstar <= report.f0);
    let json = serde_json::to_value(&report).unwrap();
    for key in ["lhs", "rhs", "L", "M", "fstar", "seeds", "holds"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}
