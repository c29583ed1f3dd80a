//! Polynomials and piecewise polynomials on a compact interval.
//!
//! Each piece of a [`PiecewisePoly`] stores its coefficients in the local variable
//! `t = x - left_breakpoint`, which keeps products and integrals well conditioned on short
//! segments far from the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Maximum polynomial degree accepted by [`PiecewisePoly`].
pub const DEGREE_CAP: usize = 8;

/// Breakpoints closer than this fraction of the domain length are fused.
pub const FUSE_REL: f64 = 1e-13;

/// Dense polynomial with ascending coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<S> {
    coeffs: Vec<S>,
}

impl<S: Scalar> Poly<S> {
    /// Builds a polynomial, dropping trailing zero coefficients.
    pub fn new(mut coeffs: Vec<S>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: S) -> Self {
        Self::new(vec![c])
    }

    pub fn linear(c0: S, c1: S) -> Self {
        Self::new(vec![c0, c1])
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, t: S) -> S {
        self.coeffs.iter().rev().fold(S::zero(), |acc, &c| acc * t + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * S::of_usize(k))
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..n)
                .map(|k| self.coeff(k) + other.coeff(k))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..n)
                .map(|k| self.coeff(k) - other.coeff(k))
                .collect(),
        )
    }

    pub fn scale(&self, s: S) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![S::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Returns `t -> p(t + d)`.
    pub fn shift(&self, d: S) -> Self {
        let mut c = self.coeffs.clone();
        let n = c.len();
        if d.is_zero() || n < 2 {
            return Self::new(c);
        }
        for i in 0..n - 1 {
            for j in (i..n - 1).rev() {
                let next = c[j + 1];
                c[j] += d * next;
            }
        }
        Self::new(c)
    }

    /// Returns `t -> p(s0 + w t)`.
    pub fn compose_affine(&self, s0: S, w: S) -> Self {
        let shifted = self.shift(s0);
        let mut pow = S::one();
        let mut out = Vec::with_capacity(shifted.coeffs.len());
        for &c in &shifted.coeffs {
            out.push(c * pow);
            pow *= w;
        }
        Self::new(out)
    }

    /// Exact `∫_{t0}^{t1} p(t) dt`.
    pub fn integral(&self, t0: S, t1: S) -> S {
        self.antiderivative_at(t1) - self.antiderivative_at(t0)
    }

    fn antiderivative_at(&self, t: S) -> S {
        let mut acc = S::zero();
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * t + c / S::of_usize(k + 1);
        }
        acc * t
    }

    fn coeff(&self, k: usize) -> S {
        self.coeffs.get(k).copied().unwrap_or_else(S::zero)
    }

    /// Real roots in the open interval `(lo, hi)`, found by isolating sign changes between
    /// consecutive critical points and bisecting.
    pub fn roots_in(&self, lo: S, hi: S) -> Vec<S> {
        match self.coeffs.len() {
            0 | 1 => Vec::new(),
            2 => {
                let r = -self.coeffs[0] / self.coeffs[1];
                if r > lo && r < hi {
                    vec![r]
                } else {
                    Vec::new()
                }
            }
            _ => {
                let mut knots = vec![lo];
                knots.extend(self.derivative().roots_in(lo, hi));
                knots.push(hi);
                let mut roots: Vec<S> = Vec::new();
                for w in knots.windows(2) {
                    let (u, v) = (w[0], w[1]);
                    let (pu, pv) = (self.eval(u), self.eval(v));
                    if pu.is_zero() && u > lo {
                        if roots.last().is_none_or(|&r| r < u) {
                            roots.push(u);
                        }
                    } else if pu * pv < S::zero() {
                        roots.push(self.bisect(u, v, pu));
                    }
                }
                roots
            }
        }
    }

    fn bisect(&self, mut u: S, mut v: S, mut pu: S) -> S {
        for _ in 0..200 {
            let m = (u + v) / S::of(2.0);
            if m <= u || m >= v {
                break;
            }
            let pm = self.eval(m);
            if pm.is_zero() {
                return m;
            }
            if (pm < S::zero()) == (pu < S::zero()) {
                u = m;
                pu = pm;
            } else {
                v = m;
            }
        }
        (u + v) / S::of(2.0)
    }

    /// Minimum and maximum of `p` over `[lo, hi]`.
    pub fn min_max_on(&self, lo: S, hi: S) -> (S, S) {
        let mut lo_v = self.eval(lo).min(self.eval(hi));
        let mut hi_v = self.eval(lo).max(self.eval(hi));
        for r in self.derivative().roots_in(lo, hi) {
            let v = self.eval(r);
            lo_v = lo_v.min(v);
            hi_v = hi_v.max(v);
        }
        (lo_v, hi_v)
    }
}

/// Piecewise polynomial on `[breaks[0], breaks[last]]`, right-continuous at interior
/// breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePoly<S> {
    breaks: Vec<S>,
    pieces: Vec<Poly<S>>,
}

impl<S: Scalar> PiecewisePoly<S> {
    /// Builds from breakpoints and pieces given in local coordinates.
    pub fn new(breaks: Vec<S>, pieces: Vec<Poly<S>>) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::Breakpoints("need at least two breakpoints".into()));
        }
        if pieces.len() + 1 != breaks.len() {
            return Err(Error::Breakpoints(format!(
                "{} breakpoints need {} pieces, got {}",
                breaks.len(),
                breaks.len() - 1,
                pieces.len()
            )));
        }
        if breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::Breakpoints("non-finite breakpoint".into()));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Breakpoints("not strictly increasing".into()));
        }
        for p in &pieces {
            if p.degree() > DEGREE_CAP {
                return Err(Error::DegreeCap {
                    degree: p.degree(),
                    cap: DEGREE_CAP,
                });
            }
            if p.coeffs().iter().any(|c| !c.is_finite()) {
                return Err(Error::Breakpoints("non-finite coefficient".into()));
            }
        }
        Ok(Self { breaks, pieces })
    }

    /// Builds from pieces whose coefficients refer to the global variable `x`.
    pub fn from_global(breaks: Vec<S>, pieces: Vec<Poly<S>>) -> Result<Self> {
        if pieces.len() + 1 != breaks.len() {
            return Self::new(breaks, pieces);
        }
        let local = pieces
            .iter()
            .zip(&breaks)
            .map(|(p, &b)| p.shift(b))
            .collect();
        Self::new(breaks, local)
    }

    /// Assembles without validation; callers guarantee sorted breaks and matching lengths.
    pub(crate) fn from_parts_unchecked(breaks: Vec<S>, pieces: Vec<Poly<S>>) -> Self {
        debug_assert_eq!(breaks.len(), pieces.len() + 1);
        Self { breaks, pieces }
    }

    pub fn constant(lo: S, hi: S, c: S) -> Result<Self> {
        Self::new(vec![lo, hi], vec![Poly::constant(c)])
    }

    pub fn zero(lo: S, hi: S) -> Result<Self> {
        Self::new(vec![lo, hi], vec![Poly::zero()])
    }

    /// The function `x` on `[lo, hi]`.
    pub fn identity(lo: S, hi: S) -> Result<Self> {
        Self::new(vec![lo, hi], vec![Poly::linear(lo, S::one())])
    }

    pub fn lo(&self) -> S {
        self.breaks[0]
    }

    pub fn hi(&self) -> S {
        self.breaks[self.breaks.len() - 1]
    }

    pub fn breakpoints(&self) -> &[S] {
        &self.breaks
    }

    /// Pieces in local coordinates `t = x - breakpoints()[i]`.
    pub fn pieces(&self) -> &[Poly<S>] {
        &self.pieces
    }

    /// Pieces converted back to the global variable `x`.
    pub fn global_pieces(&self) -> Vec<Poly<S>> {
        self.pieces
            .iter()
            .zip(&self.breaks)
            .map(|(p, &b)| p.shift(-b))
            .collect()
    }

    pub fn max_degree(&self) -> usize {
        self.pieces.iter().map(Poly::degree).max().unwrap_or(0)
    }

    fn fuse_tol(&self) -> S {
        S::of(FUSE_REL) * (self.hi() - self.lo())
    }

    /// Index of the segment used for evaluation at `x` (right-continuous).
    pub fn segment_index(&self, x: S) -> usize {
        let n = self.pieces.len();
        let k = self.breaks.partition_point(|&b| b <= x);
        k.saturating_sub(1).min(n - 1)
    }

    /// Right-continuous evaluation; the last piece is used at the right endpoint.
    pub fn eval(&self, x: S) -> S {
        let i = self.segment_index(x);
        self.pieces[i].eval(x - self.breaks[i])
    }

    /// Left limit at `x`; the first piece is used at the left endpoint.
    pub fn eval_left(&self, x: S) -> S {
        let k = self.breaks.partition_point(|&b| b < x);
        let i = k.saturating_sub(1).min(self.pieces.len() - 1);
        self.pieces[i].eval(x - self.breaks[i])
    }

    fn check_domain(&self, other: &Self) -> Result<()> {
        let tol = self.fuse_tol();
        if (self.lo() - other.lo()).abs() > tol || (self.hi() - other.hi()).abs() > tol {
            return Err(Error::DomainMismatch(
                self.lo().to_f64_lossy(),
                self.hi().to_f64_lossy(),
                other.lo().to_f64_lossy(),
                other.hi().to_f64_lossy(),
            ));
        }
        Ok(())
    }

    /// Sorted union of breakpoints with near-duplicates fused.
    pub fn merge_breaks(lo: S, hi: S, extra: &[S]) -> Vec<S> {
        let tol = S::of(FUSE_REL) * (hi - lo);
        let mut pts: Vec<S> = extra
            .iter()
            .copied()
            .filter(|&x| x > lo + tol && x < hi - tol)
            .collect();
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        let mut out = Vec::with_capacity(pts.len() + 2);
        out.push(lo);
        for x in pts {
            if x - *out.last().expect("nonempty") > tol {
                out.push(x);
            }
        }
        out.push(hi);
        out
    }

    /// The function `u ↦ self(u + c)` on `[lo − c, hi − c]`.
    pub fn recentered(&self, c: S) -> Self {
        Self {
            breaks: self.breaks.iter().map(|&x| x - c).collect(),
            pieces: self.pieces.clone(),
        }
    }

    /// Re-expresses the function on a finer breakpoint set with the same endpoints.
    pub fn refine(&self, breaks: &[S]) -> Self {
        let pieces = breaks
            .windows(2)
            .map(|w| {
                let mid = (w[0] + w[1]) / S::of(2.0);
                let i = self.segment_index(mid);
                self.pieces[i].shift(w[0] - self.breaks[i])
            })
            .collect();
        Self {
            breaks: breaks.to_vec(),
            pieces,
        }
    }

    fn combine(&self, other: &Self, f: impl Fn(&Poly<S>, &Poly<S>) -> Poly<S>) -> Result<Self> {
        self.check_domain(other)?;
        let mut all = self.breaks.clone();
        all.extend_from_slice(&other.breaks);
        let breaks = Self::merge_breaks(self.lo(), self.hi(), &all);
        let a = self.refine(&breaks);
        let b = other.refine(&breaks);
        let pieces = a.pieces.iter().zip(&b.pieces).map(|(p, q)| f(p, q)).collect();
        Ok(Self { breaks, pieces })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, Poly::add)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, Poly::sub)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        let out = self.combine(other, Poly::mul)?;
        let degree = out.max_degree();
        if degree > DEGREE_CAP {
            return Err(Error::DegreeCap {
                degree,
                cap: DEGREE_CAP,
            });
        }
        Ok(out)
    }

    pub fn scale(&self, s: S) -> Self {
        Self {
            breaks: self.breaks.clone(),
            pieces: self.pieces.iter().map(|p| p.scale(s)).collect(),
        }
    }

    /// Multiplies by the identity function `x`.
    pub fn mul_x(&self) -> Result<Self> {
        let pieces: Vec<Poly<S>> = self
            .pieces
            .iter()
            .zip(&self.breaks)
            .map(|(p, &b)| p.mul(&Poly::linear(b, S::one())))
            .collect();
        let degree = pieces.iter().map(Poly::degree).max().unwrap_or(0);
        if degree > DEGREE_CAP {
            return Err(Error::DegreeCap {
                degree,
                cap: DEGREE_CAP,
            });
        }
        Ok(Self {
            breaks: self.breaks.clone(),
            pieces,
        })
    }

    /// Exact `∫_lo^hi p(x) dx` for `[lo, hi]` inside the domain (either order).
    pub fn integrate(&self, lo: S, hi: S) -> Result<S> {
        if hi < lo {
            return self.integrate(hi, lo).map(|v| -v);
        }
        let tol = self.fuse_tol();
        if lo < self.lo() - tol || hi > self.hi() + tol || lo.is_nan() || hi.is_nan() {
            return Err(Error::OutsideDomain {
                lo: lo.to_f64_lossy(),
                hi: hi.to_f64_lossy(),
                a: self.lo().to_f64_lossy(),
                b: self.hi().to_f64_lossy(),
            });
        }
        Ok(self.integrate_clamped(lo, hi))
    }

    /// Integral over `[lo, hi] ∩ domain`; empty intersections give zero.
    pub fn integrate_clamped(&self, lo: S, hi: S) -> S {
        let lo = lo.max(self.lo());
        let hi = hi.min(self.hi());
        if hi <= lo {
            return S::zero();
        }
        let first = self.segment_index(lo);
        let mut acc = S::zero();
        for i in first..self.pieces.len() {
            let (l, r) = (self.breaks[i], self.breaks[i + 1]);
            if l >= hi {
                break;
            }
            let s = lo.max(l);
            let e = hi.min(r);
            if e > s {
                acc += self.pieces[i].integral(s - l, e - l);
            }
        }
        acc
    }

    pub fn integral(&self) -> S {
        self.integrate_clamped(self.lo(), self.hi())
    }

    /// Minimum and maximum over the closed domain, from critical points of every piece.
    pub fn min_max(&self) -> (S, S) {
        let mut lo = S::infinity();
        let mut hi = S::neg_infinity();
        for (i, p) in self.pieces.iter().enumerate() {
            let len = self.breaks[i + 1] - self.breaks[i];
            let (a, b) = p.min_max_on(S::zero(), len);
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo, hi)
    }

    pub fn sup_abs(&self) -> S {
        let (lo, hi) = self.min_max();
        lo.abs().max(hi.abs())
    }
}

/// Piecewise affine target given by a grid, per-segment slopes and the value at the left end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec<S> {
    pub grid: Vec<S>,
    pub slopes: Vec<S>,
    pub anchor: S,
}

impl<S: Scalar> TargetSpec<S> {
    pub fn new(grid: Vec<S>, slopes: Vec<S>, anchor: S) -> Result<Self> {
        let t = Self {
            grid,
            slopes,
            anchor,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slopes.is_empty() {
            return Err(Error::Target("need at least one segment".into()));
        }
        if self.grid.len() != self.slopes.len() + 1 {
            return Err(Error::Target(format!(
                "grid has {} points but there are {} slopes",
                self.grid.len(),
                self.slopes.len()
            )));
        }
        let finite = self.grid.iter().chain(&self.slopes).all(|v| v.is_finite());
        if !finite || !self.anchor.is_finite() {
            return Err(Error::Target("non-finite value".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Target("grid is not strictly increasing".into()));
        }
        Ok(())
    }

    /// Number of affine segments `N`.
    pub fn n(&self) -> usize {
        self.slopes.len()
    }

    pub fn a(&self) -> S {
        self.grid[0]
    }

    pub fn b(&self) -> S {
        self.grid[self.grid.len() - 1]
    }

    /// Values `f(𝔵_0), …, f(𝔵_N)`.
    pub fn grid_values(&self) -> Vec<S> {
        let mut vals = Vec::with_capacity(self.grid.len());
        vals.push(self.anchor);
        for i in 0..self.n() {
            let prev = vals[i];
            vals.push(prev + self.slopes[i] * (self.grid[i + 1] - self.grid[i]));
        }
        vals
    }

    pub fn eval(&self, x: S) -> S {
        self.as_piecewise().eval(x)
    }

    pub fn as_piecewise(&self) -> PiecewisePoly<S> {
        let vals = self.grid_values();
        let pieces = (0..self.n())
            .map(|i| Poly::linear(vals[i], self.slopes[i]))
            .collect();
        PiecewisePoly {
            breaks: self.grid.clone(),
            pieces,
        }
    }

    pub fn sup_abs(&self) -> S {
        self.grid_values()
            .into_iter()
            .fold(S::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_slope(&self) -> S {
        self.slopes.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    /// First index pair `(i, i+1)` of equal consecutive slopes, if any.
    pub fn repeated_slope(&self) -> Option<(usize, usize)> {
        self.slopes
            .windows(2)
            .position(|w| w[0] == w[1])
            .map(|i| (i, i + 1))
    }

    /// Same function with grid points between equal consecutive slopes removed.
    pub fn reduced(&self) -> Self {
        let mut grid = vec![self.grid[0]];
        let mut slopes: Vec<S> = Vec::new();
        for i in 0..self.n() {
            if slopes.last() == Some(&self.slopes[i]) {
                *grid.last_mut().expect("nonempty") = self.grid[i + 1];
            } else {
                slopes.push(self.slopes[i]);
                grid.push(self.grid[i + 1]);
            }
        }
        Self {
            grid,
            slopes,
            anchor: self.anchor,
        }
    }
}

/// JSON form of a density: breakpoints plus per-segment coefficients in the global variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec<S> {
    pub breakpoints: Vec<S>,
    pub pieces: Vec<Vec<S>>,
}

impl<S: Scalar> DensitySpec<S> {
    pub fn to_piecewise(&self) -> Result<PiecewisePoly<S>> {
        PiecewisePoly::from_global(
            self.breakpoints.clone(),
            self.pieces.iter().map(|c| Poly::new(c.clone())).collect(),
        )
    }

    pub fn from_piecewise(p: &PiecewisePoly<S>) -> Self {
        Self {
            breakpoints: p.breakpoints().to_vec(),
            pieces: p
                .global_pieces()
                .into_iter()
                .map(|q| {
                    if q.is_zero() {
                        vec![S::zero()]
                    } else {
                        q.coeffs().to_vec()
                    }
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pw(breaks: &[f64], global: &[&[f64]]) -> PiecewisePoly<f64> {
        PiecewisePoly::from_global(
            breaks.to_vec(),
            global.iter().map(|c| Poly::new(c.to_vec())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn poly_trims_and_evaluates() {
        let p = Poly::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), 1);
        assert_eq!(p.eval(3.0), 7.0);
        assert!(Poly::<f64>::new(vec![0.0]).is_zero());
    }

    #[test]
    fn shift_and_compose_match_direct_evaluation() {
        let p = Poly::new(vec![0.5, -1.0, 2.0, 3.0]);
        let q = p.shift(0.7);
        let r = p.compose_affine(0.2, -1.5);
        for &t in &[-1.0, 0.0, 0.3, 2.0] {
            assert_relative_eq!(q.eval(t), p.eval(t + 0.7), epsilon = 1e-12);
            assert_relative_eq!(r.eval(t), p.eval(0.2 - 1.5 * t), epsilon = 1e-12);
        }
    }

    #[test]
    fn roots_are_found_between_critical_points() {
        // (x - 0.2)(x - 0.5)(x - 0.9)
        let p = Poly::new(vec![-0.09, 0.73, -1.6, 1.0]);
        let r = p.roots_in(0.0, 1.0);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([0.2, 0.5, 0.9]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn add_constant_and_identity() {
        let one = PiecewisePoly::constant(0.0, 1.0, 1.0).unwrap();
        let x = PiecewisePoly::identity(0.0, 1.0).unwrap();
        let s = one.add(&x).unwrap();
        for &t in &[0.0, 0.25, 1.0] {
            assert_eq!(s.eval(t), 1.0 + t);
        }
        let z = PiecewisePoly::zero(0.0, 1.0).unwrap();
        let same = s.add(&z).unwrap();
        assert_eq!(same.eval(0.4), s.eval(0.4));
    }

    #[test]
    fn complementary_supports_sum_to_identity() {
        let p = pw(&[0.0, 0.5, 1.0], &[&[0.0, 1.0], &[0.0]]);
        let q = pw(&[0.0, 0.5, 1.0], &[&[0.0], &[0.0, 1.0]]);
        let s = p.add(&q).unwrap();
        for &t in &[0.1, 0.5, 0.75] {
            assert_relative_eq!(s.eval(t), t, epsilon = 1e-15);
        }
    }

    #[test]
    fn mul_examples() {
        let x = PiecewisePoly::identity(0.0, 1.0).unwrap();
        let xx = x.mul(&x).unwrap();
        assert_relative_eq!(xx.eval(0.3), 0.09, epsilon = 1e-15);
        let z = PiecewisePoly::zero(0.0, 1.0).unwrap();
        assert!(x.mul(&z).unwrap().pieces().iter().all(Poly::is_zero));
        let p = pw(&[-1.0, 1.0], &[&[1.0, 1.0]]);
        let q = pw(&[-1.0, 1.0], &[&[1.0, -1.0]]);
        let r = p.mul(&q).unwrap();
        for &t in &[-1.0, -0.2, 0.6] {
            assert_relative_eq!(r.eval(t), 1.0 - t * t, epsilon = 1e-14);
        }
    }

    #[test]
    fn mul_rejects_degree_above_cap() {
        let p = pw(&[0.0, 1.0], &[&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]]);
        assert!(matches!(p.mul(&p), Err(Error::DegreeCap { degree: 10, .. })));
    }

    #[test]
    fn domain_mismatch_is_reported() {
        let p = PiecewisePoly::constant(0.0, 1.0, 1.0).unwrap();
        let q = PiecewisePoly::constant(0.0, 2.0, 1.0).unwrap();
        assert!(matches!(p.add(&q), Err(Error::DomainMismatch(..))));
    }

    #[test]
    fn integrate_examples() {
        let one = PiecewisePoly::constant(0.0, 1.0, 1.0).unwrap();
        assert_eq!(one.integrate(0.0, 1.0).unwrap(), 1.0);
        let x = PiecewisePoly::identity(0.0, 1.0).unwrap();
        assert_relative_eq!(x.mul(&x).unwrap().integral(), 1.0 / 3.0, epsilon = 1e-16);
        let tent = pw(&[0.0, 0.5, 1.0], &[&[0.0, 1.0], &[1.0, -1.0]]);
        assert_relative_eq!(tent.integrate(0.0, 1.0).unwrap(), 0.25, epsilon = 1e-16);
        assert_relative_eq!(tent.integrate(0.25, 0.75).unwrap(), 0.1875, epsilon = 1e-16);
        assert!(matches!(
            tent.integrate(-0.5, 0.5),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn evaluation_is_right_continuous() {
        let step = pw(&[0.0, 0.5, 1.0], &[&[0.0], &[1.0]]);
        assert_eq!(step.eval(0.5), 1.0);
        assert_eq!(step.eval_left(0.5), 0.0);
        assert_eq!(step.eval(1.0), 1.0);
    }

    #[test]
    fn close_breakpoints_are_fused() {
        let merged = PiecewisePoly::<f64>::merge_breaks(0.0, 1.0, &[0.5, 0.5 + 1e-15, 1e-16]);
        assert_eq!(merged, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constructor_validation() {
        assert!(PiecewisePoly::new(vec![0.0, 0.0], vec![Poly::zero()]).is_err());
        assert!(PiecewisePoly::new(vec![0.0, 1.0], vec![]).is_err());
        let big = Poly::new(vec![1.0; 10]);
        assert!(PiecewisePoly::new(vec![0.0, 1.0], vec![big]).is_err());
    }

    #[test]
    fn min_max_uses_interior_critical_points() {
        let p = pw(&[0.0, 1.0], &[&[0.0, 1.0, -1.0]]);
        let (lo, hi) = p.min_max();
        assert_eq!(lo, 0.0);
        assert_relative_eq!(hi, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn target_examples() {
        let c = TargetSpec::new(vec![0.0, 1.0], vec![0.0], 3.0).unwrap();
        assert_eq!(c.as_piecewise().eval(0.7), 3.0);
        let abs = TargetSpec::new(vec![0.0, 0.5, 1.0], vec![-1.0, 1.0], 0.5).unwrap();
        let p = abs.as_piecewise();
        // max-sum identity f(a) + α₁(x−a) + (α₂−α₁)·max(x−𝔵₁, 0)
        for &x in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let want = 0.5 - x + 2.0 * f64::max(x - 0.5, 0.0);
            assert_relative_eq!(p.eval(x), want, epsilon = 1e-15);
            assert_relative_eq!(p.eval(x), (x - 0.5f64).abs(), epsilon = 1e-15);
        }
        let flat = TargetSpec::new(vec![0.0, 0.3, 0.6, 1.0], vec![2.0, 2.0, 2.0], -1.0).unwrap();
        let fp = flat.as_piecewise();
        for &x in &flat.grid[1..3] {
            assert_eq!(fp.eval(x), fp.eval_left(x));
        }
    }

    #[test]
    fn target_validation() {
        assert!(TargetSpec::new(vec![0.0], vec![], 0.0).is_err());
        assert!(TargetSpec::new(vec![0.0, 1.0], vec![1.0, 2.0], 0.0).is_err());
        assert!(TargetSpec::new(vec![1.0, 0.0], vec![1.0], 0.0).is_err());
    }

    #[test]
    fn reduce_collapses_equal_runs() {
        let t = TargetSpec::new(vec![0.0, 0.25, 0.5, 1.0], vec![1.0, 1.0, -1.0], 0.0).unwrap();
        let r = t.reduced();
        assert_eq!(r.grid, vec![0.0, 0.5, 1.0]);
        assert_eq!(r.slopes, vec![1.0, -1.0]);
        for &x in &[0.1, 0.4, 0.9] {
            assert_relative_eq!(r.eval(x), t.eval(x), epsilon = 1e-15);
        }
        assert_eq!(t.repeated_slope(), Some((0, 1)));
        assert_eq!(r.repeated_slope(), None);
    }

    #[test]
    fn density_spec_round_trip() {
        let spec = DensitySpec {
            breakpoints: vec![0.0, 0.5, 1.0],
            pieces: vec![vec![1.0, 0.5], vec![2.0, -1.5]],
        };
        let p = spec.to_piecewise().unwrap();
        assert_relative_eq!(p.eval(0.75), 2.0 - 1.5 * 0.75, epsilon = 1e-15);
        let back = DensitySpec::from_piecewise(&p);
        for (a, b) in back.pieces.iter().flatten().zip(spec.pieces.iter().flatten()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-15);
        }
        let json = serde_json::to_string(&spec).unwrap();
        let parsed: DensitySpec<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, spec);
    }

    #[test]
    fn works_in_single_precision() {
        let x = PiecewisePoly::<f32>::identity(0.0, 2.0).unwrap();
        let v = x.mul(&x).unwrap().integral();
        assert!((v - 8.0 / 3.0).abs() < 1e-6);
    }
}
