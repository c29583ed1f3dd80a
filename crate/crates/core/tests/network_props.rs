mod common;

use common::{random_regular, rng, tent_density};
use proptest::prelude::*;
use relulab::{ParamVec, Problem};

fn params(max_width: usize) -> impl Strategy<Value = ParamVec<f64>> {
    (1..=max_width).prop_flat_map(|h| {
        prop::collection::vec(-3.0f64..3.0, 3 * h + 1)
            .prop_map(move |theta| ParamVec::new(h, theta).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn realization_is_lipschitz(theta in params(4), x in -2.0f64..2.0) {
        let eps = 1e-7;
        let jump = (theta.realization(x + eps) - theta.realization(x)).abs();
        prop_assert!(jump <= theta.lipschitz() * eps * (1.0 + 1e-6) + 1e-15);
    }
}

proptest! {
    #[test]
    fn piecewise_form_matches_pointwise(theta in params(5)) {
        let (a, b) = (-1.5, 2.0);
        let f = theta.realization_as_piecewise(a, b);
        for i in 0..=500 {
            let x = a + (b - a) * i as f64 / 500.0;
            prop_assert!((f.eval(x) - theta.realization(x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn json_round_trip(theta in params(4)) {
        let s = serde_json::to_string(&theta).unwrap();
        let back: ParamVec<f64> = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, theta);
    }
}

/// ρ-measure of the symmetric difference of neuron `j`'s active sets at two parameters.
fn sym_diff_measure(p: &Problem<f64>, x: &ParamVec<f64>, y: &ParamVec<f64>, j: usize) -> f64 {
    let (a, b) = (p.a(), p.b());
    let mass = |bounds: Option<(f64, f64)>| {
        bounds.map_or(0.0, |(l, r)| p.density().integrate(l, r).unwrap())
    };
    let ix = x.active_interval(j, a, b);
    let iy = y.active_interval(j, a, b);
    mass(ix.bounds()) + mass(iy.bounds()) - 2.0 * mass(ix.intersect(&iy))
}

#[test]
fn active_set_measure_is_lipschitz_in_theta() {
    let t = common::four_piece_target();
    let p = Problem::new(t.clone(), tent_density(t.a(), t.b()), 3).unwrap();
    let mut r = rng(11);
    for _ in 0..10 {
        let theta = random_regular(&mut r, &p, 1.0);
        let dirs: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let d: Vec<f64> = (0..p.dim()).map(|_| rand::Rng::random_range(&mut r, -1.0..1.0)).collect();
                let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                d.into_iter().map(|x| x / n).collect()
            })
            .collect();
        let sizes: Vec<f64> = (0..200).map(|_| rand::Rng::random_range(&mut r, 1e-5..1e-3)).collect();
        let ratio = |scale: f64| {
            let mut c = 0.0f64;
            for (d, &s) in dirs.iter().zip(&sizes) {
                let moved = theta.offset(s * scale, d);
                for j in 0..p.width() {
                    c = c.max(sym_diff_measure(&p, &theta, &moved, j) / (s * scale));
                }
            }
            c
        };
        let c = ratio(1.0);
        let c_half = ratio(0.5);
        assert!(c.is_finite());
        assert!(c_half <= 1.5 * c + 1e-9, "c = {c}, after halving {c_half}");
    }
}

#[test]
fn kinks_and_active_sets_agree_with_pointwise_signs() {
    let mut r = rng(5);
    let p = Problem::uniform(common::abs_target(), 4).unwrap();
    for _ in 0..100 {
        let theta = random_regular(&mut r, &p, 2.0);
        for j in 0..4 {
            let iv = theta.active_interval(j, 0.0, 1.0);
            for k in 0..=200 {
                let x = k as f64 / 200.0;
                let z = theta.w(j) * x + theta.b(j);
                if z.abs() > 1e-12 {
                    assert_eq!(iv.contains(x), z > 0.0, "neuron {j} at {x}");
                }
            }
        }
    }
}
