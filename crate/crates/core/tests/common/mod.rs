//! Shared fixtures and independent numerical oracles for the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use relulab::{ParamVec, PiecewisePoly, Poly, Problem, TargetSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|x − ½|` on `[0, 1]`.
pub fn abs_target() -> TargetSpec<f64> {
    TargetSpec::new(vec![0.0, 0.5, 1.0], vec![-1.0, 1.0], 0.5).unwrap()
}

/// Four pieces on `[−1, 2]` with distinct consecutive slopes.
pub fn four_piece_target() -> TargetSpec<f64> {
    TargetSpec::new(vec![-1.0, -0.2, 0.5, 1.1, 2.0], vec![0.7, -1.3, 0.4, 1.6], 0.3).unwrap()
}

/// A positive piecewise-linear density on `[lo, hi]` with one interior break.
pub fn tent_density(lo: f64, hi: f64) -> PiecewisePoly<f64> {
    let mid = lo + 0.4 * (hi - lo);
    let left = Poly::linear(0.5, 1.5 / (mid - lo));
    let right = Poly::linear(2.0, -1.2 / (hi - mid));
    PiecewisePoly::new(vec![lo, mid, hi], vec![left, right]).unwrap()
}

/// Random positive piecewise-linear density with up to four pieces.
pub fn random_density<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> PiecewisePoly<f64> {
    let pieces = rng.random_range(1..=4usize);
    let mut breaks = vec![lo];
    let mut inner: Vec<f64> = (1..pieces).map(|_| rng.random_range(lo..hi)).collect();
    inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for x in inner {
        if x - breaks.last().unwrap() > 1e-3 * (hi - lo) && hi - x > 1e-3 * (hi - lo) {
            breaks.push(x);
        }
    }
    breaks.push(hi);
    let knots: Vec<f64> = (0..breaks.len()).map(|_| rng.random_range(0.2..3.0)).collect();
    let polys = breaks
        .windows(2)
        .zip(knots.windows(2))
        .map(|(x, y)| Poly::linear(y[0], (y[1] - y[0]) / (x[1] - x[0])))
        .collect();
    PiecewisePoly::new(breaks, polys).unwrap()
}

/// The eight (target, density) combinations used by the gradient checks, at width `h`.
pub fn problem_family(h: usize) -> Vec<Problem<f64>> {
    let mut out = Vec::new();
    for t in [abs_target(), four_piece_target()] {
        let (a, b) = (t.a(), t.b());
        out.push(Problem::uniform(t.clone(), h).unwrap());
        out.push(Problem::new(t, tent_density(a, b), h).unwrap());
    }
    out
}

/// Standard normal parameters scaled by `scale`, resampled until they lie in the regular region.
pub fn random_regular<R: Rng>(rng: &mut R, p: &Problem<f64>, scale: f64) -> ParamVec<f64> {
    loop {
        let theta: Vec<f64> = (0..p.dim())
            .map(|_| scale * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let theta = ParamVec::new(p.width(), theta).unwrap();
        if theta.in_region_v(p.a(), p.b()) {
            return theta;
        }
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss–Legendre quadrature of `f` over `[lo, hi]` split at `cuts`.
pub fn quad_split(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cuts: &[f64], panels: usize) -> f64 {
    let rule = gauss_legendre(10);
    let mut pts: Vec<f64> = cuts.iter().copied().filter(|&c| c > lo && c < hi).collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = 0.0;
    for seg in pts.windows(2) {
        let h = (seg[1] - seg[0]) / panels as f64;
        for k in 0..panels {
            let (l, r) = (seg[0] + k as f64 * h, seg[0] + (k + 1) as f64 * h);
            let (mid, half) = ((l + r) / 2.0, (r - l) / 2.0);
            total += rule.iter().map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half;
        }
    }
    total
}

/// Every point where the risk integrand may fail to be smooth.
pub fn risk_cuts(p: &Problem<f64>, theta: &ParamVec<f64>) -> Vec<f64> {
    let mut cuts = p.target().grid.clone();
    cuts.extend_from_slice(p.density().breakpoints());
    cuts.extend(theta.kinks().into_iter().filter_map(|k| k.finite()));
    cuts
}

/// Risk by pointwise evaluation and quadrature, without the piecewise-polynomial machinery.
pub fn risk_oracle(p: &Problem<f64>, theta: &ParamVec<f64>) -> f64 {
    let t = p.target();
    let d = p.density();
    let f = |x: f64| {
        let r = theta.realization(x) - t.eval(x);
        r * r * d.eval(x)
    };
    quad_split(f, p.a(), p.b(), &risk_cuts(p, theta), 2)
}

/// Central difference of a scalar function of one variable.
pub fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}
