//! Parameter vectors of width-𝔥 networks, realizations, kinks and active intervals.
//!
//! Layout of θ ∈ ℝ^{3𝔥+1} (0-based): `w_j = θ[j]`, `b_j = θ[𝔥+j]`, `v_j = θ[2𝔥+j]`,
//! `c = θ[3𝔥]`. The network computes `c + Σ_j v_j·max(w_j x + b_j, 0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::piecewise::{PiecewisePoly, Poly};
use crate::scalar::Scalar;

/// Relative tolerance for membership in the regular region.
pub const REGION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams<S>", into = "RawParams<S>")]
#[serde(bound = "S: Scalar")]
pub struct ParamVec<S> {
    width: usize,
    theta: Vec<S>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct RawParams<S> {
    width: usize,
    theta: Vec<S>,
}

impl<S: Scalar> TryFrom<RawParams<S>> for ParamVec<S> {
    type Error = Error;

    fn try_from(raw: RawParams<S>) -> Result<Self> {
        ParamVec::new(raw.width, raw.theta)
    }
}

impl<S: Scalar> From<ParamVec<S>> for RawParams<S> {
    fn from(p: ParamVec<S>) -> Self {
        RawParams {
            width: p.width,
            theta: p.theta,
        }
    }
}

/// Kink location of a neuron; `Infinite` when the input weight is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kink<S> {
    At(S),
    Infinite,
}

impl<S: Scalar> Kink<S> {
    pub fn finite(self) -> Option<S> {
        match self {
            Kink::At(q) => Some(q),
            Kink::Infinite => None,
        }
    }
}

/// Where a neuron is active inside `[a, b]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActiveSet<S> {
    Empty,
    Full,
    /// `[a, q)`
    Left(S),
    /// `(q, b]`
    Right(S),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActiveInterval<S> {
    pub neuron: usize,
    pub set: ActiveSet<S>,
    pub a: S,
    pub b: S,
}

impl<S: Scalar> ActiveInterval<S> {
    /// Closure of the interval as `(lo, hi)`, or `None` when empty.
    pub fn bounds(&self) -> Option<(S, S)> {
        match self.set {
            ActiveSet::Empty => None,
            ActiveSet::Full => Some((self.a, self.b)),
            ActiveSet::Left(q) => Some((self.a, q)),
            ActiveSet::Right(q) => Some((q, self.b)),
        }
    }

    pub fn contains(&self, x: S) -> bool {
        if x < self.a || x > self.b {
            return false;
        }
        match self.set {
            ActiveSet::Empty => false,
            ActiveSet::Full => true,
            ActiveSet::Left(q) => x < q,
            ActiveSet::Right(q) => x > q,
        }
    }

    /// Closure of `self ∩ other`, or `None` when it has no interior.
    pub fn intersect(&self, other: &Self) -> Option<(S, S)> {
        let (l1, h1) = self.bounds()?;
        let (l2, h2) = other.bounds()?;
        let lo = l1.max(l2);
        let hi = h1.min(h2);
        (hi > lo).then_some((lo, hi))
    }
}

impl<S: Scalar> ParamVec<S> {
    pub fn new(width: usize, theta: Vec<S>) -> Result<Self> {
        if width == 0 {
            return Err(Error::Width {
                got: 0,
                expected: 1,
            });
        }
        if theta.len() != 3 * width + 1 {
            return Err(Error::ParamLength {
                got: theta.len(),
                expected: 3 * width + 1,
            });
        }
        Ok(Self { width, theta })
    }

    pub fn zeros(width: usize) -> Self {
        Self {
            width,
            theta: vec![S::zero(); 3 * width + 1],
        }
    }

    /// Builds θ from the four blocks.
    pub fn from_parts(w: &[S], b: &[S], v: &[S], c: S) -> Result<Self> {
        let h = w.len();
        if b.len() != h || v.len() != h {
            return Err(Error::ParamLength {
                got: 3 * h.max(b.len()).max(v.len()) + 1,
                expected: 3 * h + 1,
            });
        }
        let mut theta = Vec::with_capacity(3 * h + 1);
        theta.extend_from_slice(w);
        theta.extend_from_slice(b);
        theta.extend_from_slice(v);
        theta.push(c);
        Self::new(h, theta)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Parameter dimension 𝔡 = 3𝔥 + 1.
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.theta
    }

    pub fn into_vec(self) -> Vec<S> {
        self.theta
    }

    pub fn w(&self, j: usize) -> S {
        self.theta[j]
    }

    pub fn b(&self, j: usize) -> S {
        self.theta[self.width + j]
    }

    pub fn v(&self, j: usize) -> S {
        self.theta[2 * self.width + j]
    }

    pub fn c(&self) -> S {
        self.theta[3 * self.width]
    }

    pub fn set_w(&mut self, j: usize, x: S) {
        self.theta[j] = x;
    }

    pub fn set_b(&mut self, j: usize, x: S) {
        self.theta[self.width + j] = x;
    }

    pub fn set_v(&mut self, j: usize, x: S) {
        self.theta[2 * self.width + j] = x;
    }

    pub fn set_c(&mut self, x: S) {
        self.theta[3 * self.width] = x;
    }

    pub fn kink(&self, j: usize) -> Kink<S> {
        let w = self.w(j);
        if w.is_zero() {
            Kink::Infinite
        } else {
            Kink::At(-self.b(j) / w)
        }
    }

    pub fn kinks(&self) -> Vec<Kink<S>> {
        (0..self.width).map(|j| self.kink(j)).collect()
    }

    pub fn realization(&self, x: S) -> S {
        let mut acc = self.c();
        for j in 0..self.width {
            acc += self.v(j) * (self.w(j) * x + self.b(j)).max(S::zero());
        }
        acc
    }

    /// The realization on `[a, b]` as a piecewise affine function with breaks at the kinks.
    pub fn realization_as_piecewise(&self, a: S, b: S) -> PiecewisePoly<S> {
        let kinks: Vec<S> = self.kinks().into_iter().filter_map(Kink::finite).collect();
        let breaks = PiecewisePoly::merge_breaks(a, b, &kinks);
        let pieces = breaks
            .windows(2)
            .map(|seg| {
                let (l, r) = (seg[0], seg[1]);
                let mid = (l + r) / S::of(2.0);
                let mut value = self.c();
                let mut slope = S::zero();
                for j in 0..self.width {
                    let (w, bj, v) = (self.w(j), self.b(j), self.v(j));
                    if w * mid + bj > S::zero() {
                        value += v * (w * l + bj);
                        slope += v * w;
                    }
                }
                Poly::linear(value, slope)
            })
            .collect();
        PiecewisePoly::from_parts_unchecked(breaks, pieces)
    }

    pub fn active_interval(&self, j: usize, a: S, b: S) -> ActiveInterval<S> {
        let (w, bj) = (self.w(j), self.b(j));
        let set = if w.is_zero() {
            if bj > S::zero() {
                ActiveSet::Full
            } else {
                ActiveSet::Empty
            }
        } else {
            let q = -bj / w;
            if w > S::zero() {
                if q >= b {
                    ActiveSet::Empty
                } else if q < a {
                    ActiveSet::Full
                } else {
                    ActiveSet::Right(q)
                }
            } else if q <= a {
                ActiveSet::Empty
            } else if q > b {
                ActiveSet::Full
            } else {
                ActiveSet::Left(q)
            }
        };
        ActiveInterval {
            neuron: j,
            set,
            a,
            b,
        }
    }

    /// First neuron whose pre-activation vanishes (to relative tolerance) at `a` or `b`.
    pub fn first_irregular(&self, a: S, b: S) -> Option<usize> {
        let tol = S::of(REGION_TOL);
        (0..self.width).find(|&j| {
            let (w, bj) = (self.w(j), self.b(j));
            [a, b].iter().any(|&x| {
                let z = w * x + bj;
                let scale = (w * x).abs().max(bj.abs());
                z.is_zero() || z.abs() <= tol * scale
            })
        })
    }

    /// Membership in the regular region: no kink at `a` or `b`.
    pub fn in_region_v(&self, a: S, b: S) -> bool {
        self.first_irregular(a, b).is_none()
    }

    /// Lipschitz constant `Σ |v_j||w_j|` of the realization.
    pub fn lipschitz(&self) -> S {
        (0..self.width).map(|j| self.v(j).abs() * self.w(j).abs()).sum()
    }

    pub fn max_abs(&self) -> S {
        self.theta.iter().fold(S::zero(), |m, x| m.max(x.abs()))
    }

    pub fn norm(&self) -> S {
        self.theta.iter().map(|&x| x * x).sum::<S>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|x| x.is_finite())
    }

    /// Euclidean distance to another parameter vector of the same width.
    pub fn distance(&self, other: &Self) -> S {
        self.theta
            .iter()
            .zip(&other.theta)
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum::<S>()
            .sqrt()
    }

    /// `self + s·dir` for a direction of matching length.
    pub fn offset(&self, s: S, dir: &[S]) -> Self {
        let theta = self
            .theta
            .iter()
            .zip(dir)
            .map(|(&x, &d)| x + s * d)
            .collect();
        Self {
            width: self.width,
            theta,
        }
    }
}
