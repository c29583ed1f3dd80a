//! Zero-risk parameters: the explicit witness, padding with inactive neurons, a chart of the
//! minima manifold, numerical distance to it, and the box and step-size constants.
//!
//! Chart coordinates are `(v_1, b_1, w_2, …, w_N)`. The remaining coordinates follow from
//! `w_1 = α_1 / v_1`, `c = f(a) − v_1(w_1 a + b_1)`, `b_j = −w_j 𝔵_{j−1}` and
//! `v_j = (α_j − α_{j−1}) / w_j`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ParamVec;
use crate::optim::NelderMead;
use crate::piecewise::TargetSpec;
use crate::risk::Problem;
use crate::scalar::Scalar;

/// Number of Nelder–Mead starts in [`distance_to_manifold`].
pub const DISTANCE_RESTARTS: usize = 8;

/// Free coordinates `(v_1, b_1, w_2, …, w_N)` of a point on the minima manifold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldChart<S> {
    pub free: Vec<S>,
}

fn reduced_target<S: Scalar>(p: &Problem<S>) -> TargetSpec<S> {
    p.target().reduced()
}

fn require_chart_problem<S: Scalar>(p: &Problem<S>) -> Result<()> {
    let t = p.target();
    if let Some((i, j)) = t.repeated_slope() {
        return Err(Error::RepeatedSlopes(i, j));
    }
    if p.width() != t.n() {
        return Err(Error::Width {
            got: p.width(),
            expected: t.n(),
        });
    }
    Ok(())
}

/// Explicit zero-risk parameter for `𝔥 = N` and distinct consecutive slopes.
pub fn witness<S: Scalar>(p: &Problem<S>) -> Result<ParamVec<S>> {
    require_chart_problem(p)?;
    let t = p.target();
    let (a, b) = (t.a(), t.b());
    let n = t.n();
    let al = &t.slopes;
    let mut theta = ParamVec::zeros(n);
    theta.set_w(0, al[0]);
    theta.set_b(0, al[0].abs() * (a.abs() + b.abs()) + S::one());
    theta.set_v(0, S::one());
    for i in 1..n {
        theta.set_w(i, S::one());
        theta.set_b(i, -t.grid[i]);
        theta.set_v(i, al[i] - al[i - 1]);
    }
    theta.set_c(t.anchor - theta.v(0) * (theta.w(0) * a + theta.b(0)));
    Ok(theta)
}

/// Appends neurons with `w = −1`, `b = a − 1`, `v = 0`, inactive on `[a, b]`.
pub fn pad_width<S: Scalar>(theta: &ParamVec<S>, target_width: usize, a: S) -> Result<ParamVec<S>> {
    let h = theta.width();
    if target_width <= h {
        return Err(Error::Precondition(format!(
            "target width {target_width} must exceed the current width {h}"
        )));
    }
    let extra = target_width - h;
    let pad = |src: &[S], fill: S| {
        let mut v = src.to_vec();
        v.extend(std::iter::repeat_n(fill, extra));
        v
    };
    let s = theta.as_slice();
    ParamVec::from_parts(
        &pad(&s[..h], -S::one()),
        &pad(&s[h..2 * h], a - S::one()),
        &pad(&s[2 * h..3 * h], S::zero()),
        theta.c(),
    )
}

impl<S: Scalar> ManifoldChart<S> {
    /// Reads the chart coordinates off a parameter vector.
    pub fn from_params(theta: &ParamVec<S>, n: usize) -> Result<Self> {
        if theta.width() < n || n == 0 {
            return Err(Error::Width {
                got: theta.width(),
                expected: n,
            });
        }
        let mut free = vec![theta.v(0), theta.b(0)];
        free.extend((1..n).map(|j| theta.w(j)));
        Ok(Self { free })
    }

    /// Violated invariant, if any, for the target `t`.
    fn violation(&self, t: &TargetSpec<S>) -> Option<String> {
        let n = t.n();
        if self.free.len() != n + 1 {
            return Some(format!(
                "expected {} coordinates, got {}",
                n + 1,
                self.free.len()
            ));
        }
        if self.free.iter().any(|x| !x.is_finite()) {
            return Some("non-finite coordinate".into());
        }
        let (v1, b1) = (self.free[0], self.free[1]);
        if !(v1 > S::zero()) {
            return Some(format!("v_1 = {v1} must be positive"));
        }
        let w1 = t.slopes[0] / v1;
        if !(w1 * t.a() + b1 > S::zero() && w1 * t.b() + b1 > S::zero()) {
            return Some("first neuron must be active on all of [a, b]".into());
        }
        if let Some(j) = self.free[2..].iter().position(|&w| !(w > S::of(0.5))) {
            return Some(format!("w_{} must exceed 1/2", j + 2));
        }
        None
    }

    /// Samples a chart point with `v_1 ∈ (½, 2)`, first-neuron margin in `(0.2, 1.5)` and
    /// `w_j ∈ (0.6, 2)`.
    pub fn random<R: Rng + ?Sized>(p: &Problem<S>, rng: &mut R) -> Result<Self> {
        require_chart_problem(p)?;
        let t = p.target();
        let v1: f64 = rng.random_range(0.5..2.0);
        let v1 = S::of(v1);
        let w1 = t.slopes[0] / v1;
        let margin = S::of(rng.random_range(0.2..1.5));
        let b1 = -(w1 * t.a()).min(w1 * t.b()) + margin;
        let mut free = vec![v1, b1];
        free.extend((1..t.n()).map(|_| S::of(rng.random_range(0.6..2.0))));
        Ok(Self { free })
    }
}

fn chart_blocks<S: Scalar>(t: &TargetSpec<S>, free: &[S]) -> (Vec<S>, Vec<S>, Vec<S>, S) {
    let n = t.n();
    let al = &t.slopes;
    let (v1, b1) = (free[0], free[1]);
    let w1 = al[0] / v1;
    let mut w = vec![w1];
    let mut b = vec![b1];
    let mut v = vec![v1];
    for j in 1..n {
        let wj = free[j + 1];
        w.push(wj);
        b.push(-wj * t.grid[j]);
        v.push((al[j] - al[j - 1]) / wj);
    }
    let c = t.anchor - v1 * (w1 * t.a() + b1);
    (w, b, v, c)
}

/// The point of the minima manifold with the given chart coordinates (`𝔥 = N`).
pub fn chart_to_params<S: Scalar>(p: &Problem<S>, chart: &ManifoldChart<S>) -> Result<ParamVec<S>> {
    require_chart_problem(p)?;
    if let Some(msg) = chart.violation(p.target()) {
        return Err(Error::Chart(msg));
    }
    let (w, b, v, c) = chart_blocks(p.target(), &chart.free);
    ParamVec::from_parts(&w, &b, &v, c)
}

/// Euclidean projection of `(w, b)` onto `{w a + b ≤ 0, w b_hi + b ≤ 0}`.
fn project_inactive<S: Scalar>(w: S, b: S, a: S, b_hi: S) -> (S, S) {
    let feasible = |w: S, b: S| w * a + b <= S::zero() && w * b_hi + b <= S::zero();
    if feasible(w, b) {
        return (w, b);
    }
    let mut best = (S::zero(), S::zero());
    let mut best_d = w * w + b * b;
    for x in [a, b_hi] {
        let s = (w * x + b) / (x * x + S::one());
        let (pw, pb) = (w - s * x, b - s);
        let d = (pw - w) * (pw - w) + (pb - b) * (pb - b);
        let slack = S::of(1e-12) * (pw.abs() + pb.abs() + S::one());
        let ok = pw * a + pb <= slack && pw * b_hi + pb <= slack;
        if ok && d < best_d {
            best = (pw, pb);
            best_d = d;
        }
    }
    best
}

/// Numerical distance to the minima manifold with its closest point.
///
/// The first `N` neurons (of the reduced target) follow the chart; any further neurons are
/// projected onto the set of parameters inactive on `[a, b]`, with free output weight.
pub fn distance_to_manifold<S: Scalar>(p: &Problem<S>, theta: &ParamVec<S>) -> Result<(S, ParamVec<S>)> {
    distance_from(p, theta, None)
}

/// As [`distance_to_manifold`], adding `warm` as an extra starting chart.
pub fn distance_from<S: Scalar>(
    p: &Problem<S>,
    theta: &ParamVec<S>,
    warm: Option<&ManifoldChart<S>>,
) -> Result<(S, ParamVec<S>)> {
    let t = reduced_target(p);
    let n = t.n();
    let h = p.width();
    if h < n || theta.width() != h {
        return Err(Error::Chart(format!(
            "no admissible chart: width {} against {} target segments",
            theta.width(),
            n
        )));
    }
    let (a, bh) = (t.a(), t.b());
    let mut pad_cost = S::zero();
    let mut pad_wb = Vec::new();
    for j in n..h {
        let (pw, pb) = project_inactive(theta.w(j), theta.b(j), a, bh);
        pad_cost += (pw - theta.w(j)).powi(2) + (pb - theta.b(j)).powi(2);
        pad_wb.push((pw, pb));
    }
    let objective = |c: &[S]| -> S {
        let chart = ManifoldChart { free: c.to_vec() };
        if chart.violation(&t).is_some() {
            return S::infinity();
        }
        let (w, b, v, cc) = chart_blocks(&t, c);
        let mut acc = (cc - theta.c()).powi(2);
        for j in 0..n {
            acc += (w[j] - theta.w(j)).powi(2)
                + (b[j] - theta.b(j)).powi(2)
                + (v[j] - theta.v(j)).powi(2);
        }
        acc
    };

    let mut starts = Vec::with_capacity(DISTANCE_RESTARTS + 1);
    if let Some(c) = warm {
        if c.free.len() == n + 1 && c.violation(&t).is_none() {
            starts.push(c.free.clone());
        }
    }
    let guess = initial_guess(&t, theta);
    starts.push(guess.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    while starts.len() < DISTANCE_RESTARTS + usize::from(warm.is_some()) {
        let mut c = guess.clone();
        for x in c.iter_mut() {
            let r: f64 = rng.random_range(-0.25..0.25);
            *x += S::of(r) * x.abs().max(S::one());
        }
        if (ManifoldChart { free: c.clone() }).violation(&t).is_none() {
            starts.push(c);
        }
    }

    let nm = NelderMead::default();
    let mut best: Option<(Vec<S>, S)> = None;
    for s in starts {
        let first = nm.minimize(objective, &s);
        let polished = nm.minimize(objective, &first.x);
        if best.as_ref().is_none_or(|(_, v)| polished.value < *v) {
            best = Some((polished.x, polished.value));
        }
    }
    let (c, value) = best.expect("at least one start");
    if !value.is_finite() {
        return Err(Error::Chart("no admissible chart point found".into()));
    }
    let (mut w, mut b, mut v, cc) = chart_blocks(&t, &c);
    for (k, j) in (n..h).enumerate() {
        w.push(pad_wb[k].0);
        b.push(pad_wb[k].1);
        v.push(theta.v(j));
    }
    let foot = ParamVec::from_parts(&w, &b, &v, cc)?;
    Ok(((value + pad_cost).max(S::zero()).sqrt(), foot))
}

fn initial_guess<S: Scalar>(t: &TargetSpec<S>, theta: &ParamVec<S>) -> Vec<S> {
    let n = t.n();
    let v1 = if theta.v(0) > S::zero() {
        theta.v(0)
    } else {
        S::one()
    };
    let w1 = t.slopes[0] / v1;
    let need = -(w1 * t.a()).min(w1 * t.b()) + S::of(1e-3);
    let mut free = vec![v1, theta.b(0).max(need)];
    for j in 1..n {
        let w = theta.w(j);
        free.push(if w > S::of(0.5) { w } else { S::one() });
    }
    free
}

/// Box bound `1 + |f(a)| + (1 + 2 max|α_j|)(|a| + |b| + 1)`.
pub fn bound_b<S: Scalar>(p: &Problem<S>) -> S {
    let t = p.target();
    S::one()
        + t.anchor.abs()
        + (S::one() + S::of(2.0) * t.max_abs_slope()) * (t.a().abs() + t.b().abs() + S::one())
}

/// `(3𝔥+1)(24𝔅⁵ + 16𝔥𝔅⁷)·sup ρ`, the bound on Λ near the minima manifold.
pub fn lambda_bound<S: Scalar>(p: &Problem<S>, h: usize) -> S {
    let bb = bound_b(p);
    let hs = S::of_usize(h);
    (S::of(3.0) * hs + S::one())
        * (S::of(24.0) * bb.powi(5) + S::of(16.0) * hs * bb.powi(7))
        * p.sup_density()
}

/// Largest admissible constant step size `1 / ((3N+1)(24𝔅⁵ + 16N𝔅⁷) sup ρ)`.
pub fn gamma_threshold<S: Scalar>(p: &Problem<S>) -> S {
    S::one() / lambda_bound(p, p.target().n())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{generalized_gradient, risk};
    use approx::assert_relative_eq;

    fn abs_problem(width: usize) -> Problem<f64> {
        let t = TargetSpec::new(vec![0.0, 0.5, 1.0], vec![-1.0, 1.0], 0.5).unwrap();
        Problem::uniform(t, width).unwrap()
    }

    #[test]
    fn witness_for_abs() {
        let p = abs_problem(2);
        let w = witness(&p).unwrap();
        assert_eq!(w.as_slice(), &[-1.0, 1.0, 2.0, -0.5, 1.0, 2.0, -1.5]);
        assert!(risk(&p, &w) <= 1e-20);
        let g = generalized_gradient(&p, &w);
        assert!(g.iter().all(|x| x.abs() <= 1e-12));
        let bb = bound_b(&p);
        assert!(w.as_slice().iter().all(|x| x.abs() < bb));
        for &x in &[0.0, 0.25, 0.5, 1.0] {
            assert_relative_eq!(w.realization(x), (x - 0.5f64).abs(), epsilon = 1e-15);
        }
    }

    #[test]
    fn witness_errors() {
        assert!(matches!(witness(&abs_problem(3)), Err(Error::Width { .. })));
        let t = TargetSpec::new(vec![0.0, 0.5, 1.0], vec![1.0, 1.0], 0.0).unwrap();
        let p = Problem::uniform(t, 2).unwrap();
        assert!(matches!(witness(&p), Err(Error::RepeatedSlopes(0, 1))));
    }

    #[test]
    fn witness_with_flat_first_segment() {
        let t = TargetSpec::new(vec![0.0, 0.4, 1.0], vec![0.0, 2.0], 1.0).unwrap();
        let p = Problem::uniform(t, 2).unwrap();
        let w = witness(&p).unwrap();
        assert_eq!((w.w(0), w.b(0), w.v(0)), (0.0, 1.0, 1.0));
        assert!(w.in_region_v(0.0, 1.0));
        assert!(risk(&p, &w) <= 1e-20);
    }

    #[test]
    fn padding_keeps_the_realization() {
        let p = abs_problem(2);
        let w = witness(&p).unwrap();
        let padded = pad_width(&w, 4, 0.0).unwrap();
        let p4 = abs_problem(4);
        assert!(risk(&p4, &padded) <= 1e-20);
        assert!(padded.in_region_v(0.0, 1.0));
        for i in 0..100 {
            let x = i as f64 / 99.0;
            assert_eq!(padded.realization(x), w.realization(x));
        }
        assert!(pad_width(&w, 2, 0.0).is_err());
    }

    #[test]
    fn chart_round_trip_and_violations() {
        let p = abs_problem(2);
        let w = witness(&p).unwrap();
        let c = ManifoldChart::from_params(&w, 2).unwrap();
        assert_eq!(chart_to_params(&p, &c).unwrap(), w);
        let bad = ManifoldChart {
            free: vec![1.0, 2.0, 0.4],
        };
        assert!(matches!(chart_to_params(&p, &bad), Err(Error::Chart(_))));
        let mut off = w.clone();
        off.set_c(w.c() + 1e-3);
        assert!(risk(&p, &off) > 0.0);
    }

    #[test]
    fn projection_onto_the_inactive_cone() {
        let (w, b) = project_inactive(0.0, 1.0, 0.0, 1.0);
        assert_relative_eq!(w * 0.0 + b, 0.0, epsilon = 1e-15);
        let (w, b) = project_inactive(-1.0, -2.0, 0.0, 1.0);
        assert_eq!((w, b), (-1.0, -2.0));
    }

    #[test]
    fn distance_examples() {
        let p = abs_problem(2);
        let w = witness(&p).unwrap();
        let (d, foot) = distance_to_manifold(&p, &w).unwrap();
        assert!(d <= 1e-9);
        assert!(foot.distance(&w) <= 1e-9);
        let dir = [0.3, -0.2, 0.5, 0.1, -0.4, 0.6, 0.3];
        let norm = dir.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        let moved = w.offset(1e-3 / norm, &dir);
        let (d, _) = distance_to_manifold(&p, &moved).unwrap();
        assert!(d <= 1e-3 + 1e-12 && d >= 0.0);
    }

    #[test]
    fn constants() {
        assert_eq!(bound_b(&abs_problem(2)), 7.5);
        let zero = TargetSpec::new(vec![0.0, 1.0], vec![0.0], 0.0).unwrap();
        let p = Problem::uniform(zero, 1).unwrap();
        assert_eq!(bound_b(&p), 3.0);
        assert_relative_eq!(gamma_threshold(&p), 1.0 / 163296.0, max_relative = 1e-15);
    }
}
