mod common;

use common::{abs_target, four_piece_target, problem_family, random_regular, risk_oracle, rng, tent_density};
use proptest::prelude::*;
use rand::Rng;
use relulab::hessian::hessian_matrix;
use relulab::linalg::lu_det;
use relulab::minima::chart_to_params;
use relulab::verify::{central_gradient, central_jacobian, max_rel_err, GRADIENT_STEP, RISK_STEP};
use relulab::{
    entry_bound, generalized_gradient, hessian, pad_width, risk, witness, ManifoldChart, ParamVec,
    Problem, TargetSpec,
};

fn risk_of(p: &Problem<f64>, width: usize) -> impl Fn(&[f64]) -> f64 + '_ {
    move |x: &[f64]| risk(p, &ParamVec::new(width, x.to_vec()).unwrap())
}

#[test]
fn risk_matches_quadrature_oracle() {
    let mut r = rng(1);
    for h in [1, 2, 4] {
        for p in problem_family(h) {
            for _ in 0..10 {
                let theta = random_regular(&mut r, &p, 1.5);
                let exact = risk(&p, &theta);
                let oracle = risk_oracle(&p, &theta);
                assert!(
                    (exact - oracle).abs() <= 1e-11 * oracle.max(1.0),
                    "{exact} vs {oracle}"
                );
            }
        }
    }
}

#[test]
fn risk_vanishes_exactly_when_the_realization_matches() {
    let mut r = rng(2);
    for t in [abs_target(), four_piece_target()] {
        let p = Problem::uniform(t.clone(), t.n()).unwrap();
        let w = witness(&p).unwrap();
        let samples = std::iter::once(w).chain((0..50).map(|_| random_regular(&mut r, &p, 1.0)));
        for theta in samples {
            let risk_v = risk(&p, &theta);
            let per = 10 * (p.width() + t.n());
            let mut sup = 0.0f64;
            for seg in t.grid.windows(2) {
                for k in 0..=per {
                    let x = seg[0] + (seg[1] - seg[0]) * k as f64 / per as f64;
                    sup = sup.max((theta.realization(x) - t.eval(x)).abs());
                }
            }
            assert!(risk_v >= 0.0);
            // zero up to the roundoff of exact integration
            assert_eq!(risk_v <= 1e-18, sup <= 1e-9);
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut r = rng(3);
    for h in [1, 2, 4] {
        for p in problem_family(h) {
            for _ in 0..3 {
                let theta = random_regular(&mut r, &p, 1.0);
                let g = generalized_gradient(&p, &theta);
                let fd = central_gradient(risk_of(&p, h), theta.as_slice(), RISK_STEP);
                let err = max_rel_err(&g, &fd);
                assert!(err < 1e-6, "relative error {err:e}");
            }
        }
    }
}

#[test]
fn hessian_matches_jacobian_of_gradient() {
    let mut r = rng(4);
    for h in [1, 2, 3] {
        for p in problem_family(h) {
            for _ in 0..2 {
                let theta = random_regular(&mut r, &p, 1.0);
                let hm = hessian_matrix(&p, &theta).unwrap();
                let jac = central_jacobian(
                    |x: &[f64]| generalized_gradient(&p, &ParamVec::new(h, x.to_vec()).unwrap()),
                    theta.as_slice(),
                    GRADIENT_STEP,
                );
                let d = p.dim();
                let flat: Vec<f64> = (0..d).flat_map(|i| (0..d).map(move |k| (i, k))).map(|(i, k)| jac[i][k]).collect();
                let err = max_rel_err(&hm, &flat);
                assert!(err < 1e-5, "relative error {err:e}");
            }
        }
    }
}

#[test]
fn realization_bound_holds() {
    let mut r = rng(6);
    let t = four_piece_target();
    let p = Problem::uniform(t.clone(), 4).unwrap();
    let (a, b) = (t.a(), t.b());
    let big_a = 1f64.max(a.abs()).max(b.abs());
    for _ in 0..100 {
        let theta = random_regular(&mut r, &p, 2.0);
        let bound = theta.c().abs()
            + big_a
                * (0..4)
                    .map(|j| theta.v(j).abs() * (theta.w(j).abs() + theta.b(j).abs()))
                    .sum::<f64>();
        for k in 0..=1000 {
            let x = a + (b - a) * k as f64 / 1000.0;
            assert!(theta.realization(x).abs() <= bound * (1.0 + 1e-12));
        }
    }
}

#[test]
fn entry_bound_dominates_admissible_hessians() {
    let mut r = rng(7);
    for p in problem_family(3) {
        let bound = 2.5;
        let mut tested = 0;
        while tested < 20 {
            let theta: Vec<f64> = (0..p.dim()).map(|_| r.random_range(-bound..bound)).collect();
            let theta = ParamVec::new(3, theta).unwrap();
            let Ok(eb) = entry_bound(&p, &theta, bound) else {
                continue;
            };
            if !theta.in_region_v(p.a(), p.b()) {
                continue;
            }
            let hr = hessian(&p, &theta).unwrap();
            assert!(hr.max_abs_entry() <= eb);
            tested += 1;
        }
    }
}

#[test]
fn rank_counts_slope_runs_at_minima() {
    let t = TargetSpec::new(vec![0.0, 0.3, 0.5, 0.8, 1.0], vec![1.0, 1.0, -0.5, 2.0], 0.2).unwrap();
    let reduced = t.reduced();
    assert_eq!(reduced.n(), 3);
    let small = Problem::uniform(reduced.clone(), 3).unwrap();
    let star = witness(&small).unwrap();
    for h in [4, 5] {
        let p = Problem::uniform(t.clone(), h).unwrap();
        let padded = pad_width(&star, h, t.a()).unwrap();
        assert!(risk(&p, &padded) <= 1e-18);
        let hr = hessian(&p, &padded).unwrap();
        assert_eq!(hr.numerical_rank, 2 * reduced.n());
        assert_eq!(hr.dim - hr.numerical_rank, hr.dim - 2 * reduced.n());
    }
}

#[test]
fn leading_minor_is_positive_at_chart_points() {
    let mut r = rng(8);
    for t in [abs_target(), four_piece_target()] {
        let n = t.n();
        for dens in [None, Some(tent_density(t.a(), t.b()))] {
            let p = match dens {
                None => Problem::uniform(t.clone(), n).unwrap(),
                Some(d) => Problem::new(t.clone(), d, n).unwrap(),
            };
            for _ in 0..20 {
                let chart = ManifoldChart::random(&p, &mut r).unwrap();
                let theta = chart_to_params(&p, &chart).unwrap();
                let hr = hessian(&p, &theta).unwrap();
                let idx: Vec<usize> = (0..n).chain(n..2 * n).collect();
                assert!(lu_det(&hr.submatrix(&idx)).unwrap() > 0.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hessian_is_symmetric_and_lambda_below_frobenius(
        seed in any::<u64>(),
        h in 1usize..5,
        which in 0usize..4,
    ) {
        let p = &problem_family(h)[which];
        let theta = random_regular(&mut rng(seed), p, 1.5);
        let hr = hessian(p, &theta).unwrap();
        prop_assert!(hr.asymmetry() <= 1e-10);
        prop_assert!(hr.lambda_max <= hr.frobenius * (1.0 + 1e-12));
    }

    #[test]
    fn risk_is_nonnegative(seed in any::<u64>(), h in 1usize..5, which in 0usize..4) {
        let p = &problem_family(h)[which];
        let theta = random_regular(&mut rng(seed), p, 3.0);
        prop_assert!(risk(p, &theta) >= 0.0);
    }
}
