//! Exact risk, generalized gradient and the smoothed-activation family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ParamVec;
use crate::piecewise::{DensitySpec, PiecewisePoly, Poly, TargetSpec};
use crate::scalar::Scalar;

/// Densities of higher degree would push risk and Hessian integrands past the degree cap.
pub const MAX_DENSITY_DEGREE: usize = 4;

/// Target, density and network width.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem<S> {
    target: TargetSpec<S>,
    density: PiecewisePoly<S>,
    width: usize,
    target_pw: PiecewisePoly<S>,
    sup_density: S,
}

/// Serializable form of a [`Problem`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec<S> {
    pub target: TargetSpec<S>,
    pub density: DensitySpec<S>,
    pub width: usize,
}

impl<S: Scalar> Problem<S> {
    pub fn new(target: TargetSpec<S>, density: PiecewisePoly<S>, width: usize) -> Result<Self> {
        target.validate()?;
        if width == 0 {
            return Err(Error::Width {
                got: 0,
                expected: 1,
            });
        }
        let (a, b) = (target.a(), target.b());
        let tol = S::of(crate::piecewise::FUSE_REL) * (b - a);
        if (density.lo() - a).abs() > tol || (density.hi() - b).abs() > tol {
            return Err(Error::DomainMismatch(
                density.lo().to_f64_lossy(),
                density.hi().to_f64_lossy(),
                a.to_f64_lossy(),
                b.to_f64_lossy(),
            ));
        }
        if density.max_degree() > MAX_DENSITY_DEGREE {
            return Err(Error::DegreeCap {
                degree: density.max_degree(),
                cap: MAX_DENSITY_DEGREE,
            });
        }
        let (lo, hi) = density.min_max();
        if !(lo > S::zero()) {
            return Err(Error::NonPositiveDensity(lo.to_f64_lossy()));
        }
        let target_pw = target.as_piecewise();
        Ok(Self {
            target,
            density,
            width,
            target_pw,
            sup_density: hi,
        })
    }

    /// Uniform density `1` on the target's domain.
    pub fn uniform(target: TargetSpec<S>, width: usize) -> Result<Self> {
        let density = PiecewisePoly::constant(target.a(), target.b(), S::one())?;
        Self::new(target, density, width)
    }

    pub fn from_spec(spec: &ProblemSpec<S>) -> Result<Self> {
        Self::new(spec.target.clone(), spec.density.to_piecewise()?, spec.width)
    }

    pub fn to_spec(&self) -> ProblemSpec<S> {
        ProblemSpec {
            target: self.target.clone(),
            density: DensitySpec::from_piecewise(&self.density),
            width: self.width,
        }
    }

    /// Same target and density with another width.
    pub fn with_width(&self, width: usize) -> Result<Self> {
        Self::new(self.target.clone(), self.density.clone(), width)
    }

    pub fn target(&self) -> &TargetSpec<S> {
        &self.target
    }

    pub fn density(&self) -> &PiecewisePoly<S> {
        &self.density
    }

    pub fn target_piecewise(&self) -> &PiecewisePoly<S> {
        &self.target_pw
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Parameter dimension 3𝔥 + 1.
    pub fn dim(&self) -> usize {
        3 * self.width + 1
    }

    pub fn a(&self) -> S {
        self.target.a()
    }

    pub fn b(&self) -> S {
        self.target.b()
    }

    pub fn sup_density(&self) -> S {
        self.sup_density
    }

    /// Errors unless the width is at least the number of target segments.
    pub fn require_width_covers_target(&self) -> Result<()> {
        if self.width < self.target.n() {
            return Err(Error::Width {
                got: self.width,
                expected: self.target.n(),
            });
        }
        Ok(())
    }

    fn check_width(&self, theta: &ParamVec<S>) {
        assert_eq!(
            theta.width(),
            self.width,
            "parameter width does not match the problem"
        );
    }

    /// `N^θ − f` on `[a, b]`.
    pub fn residual(&self, theta: &ParamVec<S>) -> PiecewisePoly<S> {
        theta
            .realization_as_piecewise(self.a(), self.b())
            .sub(&self.target_pw)
            .expect("realization and target share the domain")
    }
}

/// Residual-weighted integrands shared by risk, gradient and Hessian.
pub(crate) struct Weighted<S> {
    pub residual: PiecewisePoly<S>,
    /// `(N − f)·ρ`
    pub w: PiecewisePoly<S>,
    /// `x·(N − f)·ρ`
    pub xw: PiecewisePoly<S>,
}

impl<S: Scalar> Weighted<S> {
    pub fn new(p: &Problem<S>, theta: &ParamVec<S>) -> Self {
        let residual = p.residual(theta);
        let w = residual
            .mul(p.density())
            .expect("density degree is capped at construction");
        let xw = w.mul_x().expect("density degree is capped at construction");
        Self { residual, w, xw }
    }

    pub fn risk(&self) -> S {
        self.residual
            .mul(&self.w)
            .expect("density degree is capped at construction")
            .integral()
            .max(S::zero())
    }
}

/// Exact `∫_a^b (N^θ − f)² ρ`.
pub fn risk<S: Scalar>(p: &Problem<S>, theta: &ParamVec<S>) -> S {
    p.check_width(theta);
    if !theta.is_finite() {
        return S::nan();
    }
    Weighted::new(p, theta).risk()
}

/// Generalized gradient: exact integrals over the active intervals.
pub fn generalized_gradient<S: Scalar>(p: &Problem<S>, theta: &ParamVec<S>) -> Vec<S> {
    risk_and_gradient(p, theta).1
}

/// Risk and generalized gradient from one residual construction.
pub fn risk_and_gradient<S: Scalar>(p: &Problem<S>, theta: &ParamVec<S>) -> (S, Vec<S>) {
    p.check_width(theta);
    let h = theta.width();
    if !theta.is_finite() {
        return (S::nan(), vec![S::nan(); theta.dim()]);
    }
    let wt = Weighted::new(p, theta);
    let two = S::of(2.0);
    let mut g = vec![S::zero(); theta.dim()];
    for j in 0..h {
        let Some((lo, hi)) = theta.active_interval(j, p.a(), p.b()).bounds() else {
            continue;
        };
        let m0 = wt.w.integrate_clamped(lo, hi);
        let m1 = wt.xw.integrate_clamped(lo, hi);
        let v = theta.v(j);
        g[j] = two * v * m1;
        g[h + j] = two * v * m0;
        g[2 * h + j] = two * (theta.w(j) * m1 + theta.b(j) * m0);
    }
    g[3 * h] = two * wt.w.integral();
    (wt.risk(), g)
}

/// C¹ piecewise-quadratic approximations χ_r of the ReLU.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    /// `χ_r(z) = 0` for `z ≤ 0`, `r z²/2` on `[0, 1/r]`, `z − 1/(2r)` beyond.
    /// Converges at rate `1/r`.
    ClampedQuadratic,
    /// `χ_r′` is a unit tent on `[−1/r, 0]` followed by the ramp `r z` on `[0, 1/r]`, so
    /// `χ_r(z) = z` for `z ≥ 1/r` and `χ_r = 0` for `z ≤ −1/r`. The difference `χ_r′ − 1_{z>0}`
    /// has zero mean, which gives gradient convergence at rate `1/r²`.
    #[default]
    Balanced,
}

impl Smoothing {
    fn knots<S: Scalar>(self, r: S) -> Vec<S> {
        let inv = S::one() / r;
        match self {
            Smoothing::ClampedQuadratic => vec![S::zero(), inv],
            Smoothing::Balanced => vec![-inv, -inv / S::of(2.0), S::zero(), inv],
        }
    }

    /// Pieces of χ_r (or χ_r′) between knots, each in the variable `s = z − anchor`, where the
    /// anchor is the interval's left knot (the first knot for the leftmost interval).
    fn pieces<S: Scalar>(self, r: S, derivative: bool) -> Vec<Poly<S>> {
        let half = S::of(0.5);
        let inv = S::one() / r;
        let zero = Poly::zero();
        match (self, derivative) {
            (Smoothing::ClampedQuadratic, false) => vec![
                zero,
                Poly::new(vec![S::zero(), S::zero(), half * r]),
                Poly::linear(half * inv, S::one()),
            ],
            (Smoothing::ClampedQuadratic, true) => vec![
                zero,
                Poly::linear(S::zero(), r),
                Poly::constant(S::one()),
            ],
            (Smoothing::Balanced, false) => vec![
                zero,
                Poly::new(vec![S::zero(), S::zero(), r]),
                Poly::new(vec![inv / S::of(4.0), S::one(), -r]),
                Poly::new(vec![half * inv, S::zero(), half * r]),
                Poly::linear(inv, S::one()),
            ],
            (Smoothing::Balanced, true) => vec![
                zero,
                Poly::linear(S::zero(), S::of(2.0) * r),
                Poly::linear(S::one(), -S::of(2.0) * r),
                Poly::linear(S::zero(), r),
                Poly::constant(S::one()),
            ],
        }
    }

    fn locate<S: Scalar>(knots: &[S], z: S) -> (usize, S) {
        let k = knots.partition_point(|&kn| kn <= z);
        (k, knots[k.saturating_sub(1)])
    }

    /// Pointwise χ_r(z).
    pub fn chi<S: Scalar>(self, r: S, z: S) -> S {
        let knots = self.knots(r);
        let (k, anchor) = Self::locate(&knots, z);
        self.pieces(r, false)[k].eval(z - anchor)
    }

    /// Pointwise χ_r′(z).
    pub fn chi_prime<S: Scalar>(self, r: S, z: S) -> S {
        let knots = self.knots(r);
        let (k, anchor) = Self::locate(&knots, z);
        self.pieces(r, true)[k].eval(z - anchor)
    }

    /// `x ↦ χ_r(w x + b)` (or its χ_r′ counterpart) as a piecewise polynomial on `[lo, hi]`.
    pub fn compose<S: Scalar>(
        self,
        r: S,
        w: S,
        b: S,
        lo: S,
        hi: S,
        derivative: bool,
    ) -> PiecewisePoly<S> {
        let knots = self.knots(r);
        let pieces = self.pieces(r, derivative);
        if w.is_zero() {
            let (k, anchor) = Self::locate(&knots, b);
            let c = pieces[k].eval(b - anchor);
            return PiecewisePoly::from_parts_unchecked(vec![lo, hi], vec![Poly::constant(c)]);
        }
        let xk: Vec<S> = knots.iter().map(|&kn| (kn - b) / w).collect();
        let breaks = PiecewisePoly::merge_breaks(lo, hi, &xk);
        let local = breaks
            .windows(2)
            .map(|seg| {
                let mid = (seg[0] + seg[1]) / S::of(2.0);
                let (k, anchor) = Self::locate(&knots, w * mid + b);
                pieces[k].compose_affine(w * seg[0] + b - anchor, w)
            })
            .collect();
        PiecewisePoly::from_parts_unchecked(breaks, local)
    }
}

fn smoothed_parts<S: Scalar>(
    p: &Problem<S>,
    theta: &ParamVec<S>,
    r: S,
    family: Smoothing,
) -> (Vec<PiecewisePoly<S>>, PiecewisePoly<S>) {
    let (a, b) = (p.a(), p.b());
    let chis: Vec<PiecewisePoly<S>> = (0..theta.width())
        .map(|j| family.compose(r, theta.w(j), theta.b(j), a, b, false))
        .collect();
    let mut net = PiecewisePoly::from_parts_unchecked(vec![a, b], vec![Poly::constant(theta.c())]);
    for (j, chi) in chis.iter().enumerate() {
        net = net
            .add(&chi.scale(theta.v(j)))
            .expect("shared domain");
    }
    let residual = net.sub(p.target_piecewise()).expect("shared domain");
    (chis, residual)
}

/// Exact smoothed risk `𝔏_r(θ)` with the default [`Smoothing`] family.
pub fn smoothed_risk<S: Scalar>(p: &Problem<S>, theta: &ParamVec<S>, r: S) -> S {
    smoothed_risk_with(p, theta, r, Smoothing::default())
}

pub fn smoothed_risk_with<S: Scalar>(
    p: &Problem<S>,
    theta: &ParamVec<S>,
    r: S,
    family: Smoothing,
) -> S {
    p.check_width(theta);
    assert!(r > S::zero(), "smoothing index must be positive");
    let (_, residual) = smoothed_parts(p, theta, r, family);
    residual
        .mul(&residual)
        .and_then(|sq| sq.mul(p.density()))
        .expect("degrees stay under the cap")
        .integral()
        .max(S::zero())
}

/// Exact gradient of `𝔏_r` with the default [`Smoothing`] family.
pub fn smoothed_gradient<S: Scalar>(p: &Problem<S>, theta: &ParamVec<S>, r: S) -> Vec<S> {
    smoothed_gradient_with(p, theta, r, Smoothing::default())
}

pub fn smoothed_gradient_with<S: Scalar>(
    p: &Problem<S>,
    theta: &ParamVec<S>,
    r: S,
    family: Smoothing,
) -> Vec<S> {
    p.check_width(theta);
    assert!(r > S::zero(), "smoothing index must be positive");
    let h = theta.width();
    let (a, b) = (p.a(), p.b());
    let (chis, residual) = smoothed_parts(p, theta, r, family);
    let w = residual.mul(p.density()).expect("degrees stay under the cap");
    let two = S::of(2.0);
    let mut g = vec![S::zero(); theta.dim()];
    for j in 0..h {
        let dchi = family.compose(r, theta.w(j), theta.b(j), a, b, true);
        let wd = w.mul(&dchi).expect("degrees stay under the cap");
        let v = theta.v(j);
        g[j] = two * v * wd.mul_x().expect("degrees stay under the cap").integral();
        g[h + j] = two * v * wd.integral();
        g[2 * h + j] = two * w.mul(&chis[j]).expect("degrees stay under the cap").integral();
    }
    g[3 * h] = two * w.integral();
    g
}
