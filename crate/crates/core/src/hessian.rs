//! Hessian of the risk on the regular region, eigen-extremes, entry bounds and the moment
//! determinants behind the rank statements at global minima.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::network::{ActiveInterval, ParamVec};
use crate::piecewise::PiecewisePoly;
use crate::risk::{Problem, Weighted};
use crate::scalar::Scalar;

/// Singular values at or below this fraction of Λ count as zero.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct HessianReport<S> {
    pub dim: usize,
    /// Row-major `dim × dim` matrix.
    pub matrix: Vec<S>,
    pub sigma_min_nonzero: S,
    pub lambda_max: S,
    pub numerical_rank: usize,
    pub frobenius: S,
    /// `σ_rank / σ_{rank+1}`; `None` at full rank.
    pub gap_ratio: Option<S>,
}

impl<S: Scalar> HessianReport<S> {
    pub fn entry(&self, i: usize, j: usize) -> S {
        self.matrix[i * self.dim + j]
    }

    pub fn max_abs_entry(&self) -> S {
        self.matrix.iter().fold(S::zero(), |m, x| m.max(x.abs()))
    }

    pub fn asymmetry(&self) -> S {
        linalg::asymmetry(&self.matrix).expect("square by construction")
    }

    /// Principal submatrix on the given indices, row-major.
    pub fn submatrix(&self, idx: &[usize]) -> Vec<S> {
        idx.iter()
            .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.entry(i, j))
            .collect()
    }
}

/// Moments `∫ x^k ρ` and residual moments over subintervals.
struct Moments<S> {
    m: [PiecewisePoly<S>; 3],
}

impl<S: Scalar> Moments<S> {
    fn new(density: &PiecewisePoly<S>) -> Self {
        let x1 = density.mul_x().expect("density degree is capped");
        let x2 = x1.mul_x().expect("density degree is capped");
        Self {
            m: [density.clone(), x1, x2],
        }
    }

    fn on(&self, k: usize, span: Option<(S, S)>) -> S {
        span.map_or(S::zero(), |(lo, hi)| self.m[k].integrate_clamped(lo, hi))
    }
}

/// Full Hessian on the regular region, including the kink boundary terms on the diagonal
/// of the `(w, w)`, `(w, b)` and `(b, b)` blocks.
pub fn hessian<S: Scalar>(p: &Problem<S>, theta: &ParamVec<S>) -> Result<HessianReport<S>> {
    let matrix = hessian_matrix(p, theta)?;
    report(theta.dim(), matrix)
}

pub fn hessian_matrix<S: Scalar>(p: &Problem<S>, theta: &ParamVec<S>) -> Result<Vec<S>> {
    if theta.width() != p.width() {
        return Err(Error::Width {
            got: theta.width(),
            expected: p.width(),
        });
    }
    let (a, b) = (p.a(), p.b());
    if let Some(j) = theta.first_irregular(a, b) {
        return Err(Error::NotRegular(j));
    }
    let h = theta.width();
    let d = theta.dim();
    let two = S::of(2.0);
    let mom = Moments::new(p.density());
    let wt = Weighted::new(p, theta);
    let act: Vec<ActiveInterval<S>> = (0..h).map(|j| theta.active_interval(j, a, b)).collect();
    let (wi, bi, vi, ci) = (|j| j, |j| h + j, |j| 2 * h + j, 3 * h);
    let mut m = vec![S::zero(); d * d];
    let mut put = |i: usize, j: usize, x: S| {
        m[i * d + j] = x;
        m[j * d + i] = x;
    };

    put(ci, ci, two * mom.on(0, Some((a, b))));
    for j in 0..h {
        let (w, bb, v) = (theta.w(j), theta.b(j), theta.v(j));
        let sj = act[j].bounds();
        let (m0, m1) = (mom.on(0, sj), mom.on(1, sj));
        put(wi(j), ci, two * v * m1);
        put(bi(j), ci, two * v * m0);
        put(vi(j), ci, two * (w * m1 + bb * m0));
    }

    for i in 0..h {
        for j in 0..h {
            let s = act[i].intersect(&act[j]);
            let (m0, m1, m2) = (mom.on(0, s), mom.on(1, s), mom.on(2, s));
            let (wi_, bi_, vi_) = (theta.w(i), theta.b(i), theta.v(i));
            let (wj_, bj_, vj_) = (theta.w(j), theta.b(j), theta.v(j));

            // derivatives of G_{v_i} with respect to w_j and b_j
            let mut wv = two * vj_ * (wi_ * m2 + bi_ * m1);
            let mut bv = two * vj_ * (wi_ * m1 + bi_ * m0);
            if i == j {
                let si = act[i].bounds();
                wv += two * si.map_or(S::zero(), |(lo, hi)| wt.xw.integrate_clamped(lo, hi));
                bv += two * si.map_or(S::zero(), |(lo, hi)| wt.w.integrate_clamped(lo, hi));
            }
            put(wi(j), vi(i), wv);
            put(bi(j), vi(i), bv);

            if j <= i {
                let vv = two * (wi_ * wj_ * m2 + (wi_ * bj_ + wj_ * bi_) * m1 + bi_ * bj_ * m0);
                put(vi(j), vi(i), vv);

                let mut ww = two * vi_ * vj_ * m2;
                let mut wb = two * vi_ * vj_ * m1;
                let mut bbv = two * vi_ * vj_ * m0;
                if i == j {
                    if let Some(q) = theta.kink(i).finite() {
                        if q >= a && q <= b {
                            let rr = wt.residual.eval(q) * p.density().eval(q);
                            let aw = wi_.abs();
                            ww = ww - two * vi_ * bi_ / (wi_ * aw) * q * rr;
                            wb = wb + two * vi_ / aw * q * rr;
                            bbv = bbv + two * vi_ / aw * rr;
                        }
                    }
                    put(wi(i), bi(i), wb);
                } else {
                    put(wi(j), bi(i), wb);
                    put(wi(i), bi(j), wb);
                }
                put(wi(j), wi(i), ww);
                put(bi(j), bi(i), bbv);
            }
        }
    }
    Ok(m)
}

fn report<S: Scalar>(dim: usize, matrix: Vec<S>) -> Result<HessianReport<S>> {
    let ex = eigen_extremes(&matrix)?;
    Ok(HessianReport {
        dim,
        frobenius: linalg::frobenius(&matrix),
        sigma_min_nonzero: ex.sigma,
        lambda_max: ex.lambda,
        numerical_rank: ex.rank,
        gap_ratio: ex.gap_ratio,
        matrix,
    })
}

#[derive(Clone, Debug)]
pub struct EigenExtremes<S> {
    /// Smallest singular value above the rank threshold.
    pub sigma: S,
    /// Largest absolute eigenvalue.
    pub lambda: S,
    pub rank: usize,
    pub gap_ratio: Option<S>,
    /// Absolute eigenvalues in decreasing order.
    pub singular_values: Vec<S>,
}

/// σ, Λ and the numerical rank of a nonzero symmetric matrix (row-major).
pub fn eigen_extremes<S: Scalar>(m: &[S]) -> Result<EigenExtremes<S>> {
    if m.iter().all(|x| x.is_zero()) {
        return Err(Error::ZeroMatrix);
    }
    let scale = m.iter().fold(S::zero(), |acc, x| acc.max(x.abs()));
    if linalg::asymmetry(m)? > S::of(1e-10) * scale.max(S::one()) {
        return Err(Error::Precondition("matrix is not symmetric".into()));
    }
    let eig = linalg::sym_eigen(m)?;
    let mut sv: Vec<S> = eig.values.iter().map(|x| x.abs()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let lambda = sv[0];
    let cut = S::of(RANK_TOL) * lambda;
    let rank = sv.iter().filter(|&&s| s > cut).count();
    let sigma = sv[rank - 1];
    let gap_ratio = (rank < sv.len()).then(|| sv[rank - 1] / sv[rank]);
    Ok(EigenExtremes {
        sigma,
        lambda,
        rank,
        gap_ratio,
        singular_values: sv,
    })
}

/// Upper bound on every Hessian entry for parameters in `[−B, B]^𝔡` whose kinks inside
/// `[a, b]` have input weight at least ½.
pub fn entry_bound<S: Scalar>(p: &Problem<S>, theta: &ParamVec<S>, bound: S) -> Result<S> {
    if bound < S::one() {
        return Err(Error::Precondition(format!("B = {bound} is below 1")));
    }
    if theta.max_abs() > bound {
        return Err(Error::Precondition(format!(
            "max |θ_i| = {} exceeds B = {bound}",
            theta.max_abs()
        )));
    }
    let (a, b) = (p.a(), p.b());
    for j in 0..theta.width() {
        if let Some(q) = theta.kink(j).finite() {
            if q >= a && q <= b && theta.w(j) < S::of(0.5) {
                return Err(Error::Precondition(format!(
                    "neuron {j} has its kink in the domain but w = {} < 1/2",
                    theta.w(j)
                )));
            }
        }
    }
    let big_a = S::one().max(a.abs()).max(b.abs()).max(b - a);
    let h = S::of_usize(theta.width());
    let a2 = big_a * big_a;
    let a3 = a2 * big_a;
    let b2 = bound * bound;
    let b3 = b2 * bound;
    let b4 = b3 * bound;
    let eight = S::of(8.0);
    let sum = eight * a3 * b2
        + eight * a2 * b3
        + S::of(16.0) * a3 * h * b4
        + eight * a2 * b2 * p.target().sup_abs();
    Ok(sum * p.sup_density())
}

/// The `2N × 2N` matrix of tail moments over `[𝔵_{max(i,j)}, 𝔵_{N+1}]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentMatrix<S> {
    pub n: usize,
    /// Row-major entries.
    pub entries: Vec<S>,
}

impl<S: Scalar> MomentMatrix<S> {
    pub fn entry(&self, i: usize, j: usize) -> S {
        self.entries[i * 2 * self.n + j]
    }

    pub fn determinant(&self) -> S {
        linalg::lu_det(&self.entries).expect("square by construction")
    }
}

fn check_grid<S: Scalar>(density: &PiecewisePoly<S>, grid: &[S]) -> Result<()> {
    if grid.len() < 2 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Grid);
    }
    if grid[0] < density.lo() || grid[grid.len() - 1] > density.hi() {
        return Err(Error::OutsideDomain {
            lo: grid[0].to_f64_lossy(),
            hi: grid[grid.len() - 1].to_f64_lossy(),
            a: density.lo().to_f64_lossy(),
            b: density.hi().to_f64_lossy(),
        });
    }
    Ok(())
}

/// Tail-moment matrix for the grid `𝔵_1 < … < 𝔵_{N+1}`.
pub fn moment_matrix<S: Scalar>(density: &PiecewisePoly<S>, grid: &[S]) -> Result<MomentMatrix<S>> {
    check_grid(density, grid)?;
    let n = grid.len() - 1;
    let mom = Moments::new(density);
    let end = grid[n];
    let tail = |k: usize, i: usize| mom.on(k, Some((grid[i], end)));
    let mut e = vec![S::zero(); 4 * n * n];
    let w = 2 * n;
    for i in 0..n {
        for j in 0..n {
            let k = i.max(j);
            let (m0, m1, m2) = (tail(0, k), tail(1, k), tail(2, k));
            e[i * w + j] = m2;
            e[(n + i) * w + j] = m1;
            e[i * w + n + j] = m1;
            e[(n + i) * w + n + j] = m0;
        }
    }
    Ok(MomentMatrix { n, entries: e })
}

/// `∏_i (∫x²ρ·∫ρ − (∫xρ)²)` over the grid segments.
///
/// Each factor is translation invariant and is evaluated with moments about the segment
/// midpoint, which avoids the cancellation of raw moments on short, off-center segments.
pub fn det_product_formula<S: Scalar>(density: &PiecewisePoly<S>, grid: &[S]) -> Result<S> {
    check_grid(density, grid)?;
    Ok(grid
        .windows(2)
        .map(|seg| {
            let mid = (seg[0] + seg[1]) / S::of(2.0);
            let mom = Moments::new(&density.recentered(mid));
            let s = Some((seg[0] - mid, seg[1] - mid));
            mom.on(2, s) * mom.on(0, s) - mom.on(1, s) * mom.on(1, s)
        })
        .fold(S::one(), |acc, e| acc * e))
}

/// The `2N × 2N` matrix with blocks `2 v_i v_j ∫_{I_i ∩ I_j} x^{2−k−l} ρ`, where
/// `I_j = [𝔵_{j−1}, 𝔵_N]`, for the grid `𝔵_0 < … < 𝔵_N`.
pub fn minor_matrix<S: Scalar>(v: &[S], grid: &[S], density: &PiecewisePoly<S>) -> Result<Vec<S>> {
    check_grid(density, grid)?;
    if grid.len() != v.len() + 1 {
        return Err(Error::Precondition(format!(
            "{} weights need {} grid points, got {}",
            v.len(),
            v.len() + 1,
            grid.len()
        )));
    }
    if let Some(i) = v.iter().position(|x| x.is_zero()) {
        return Err(Error::ZeroWeight(i));
    }
    let base = moment_matrix(density, grid)?;
    let n = v.len();
    let two = S::of(2.0);
    let mut e = base.entries;
    for r in 0..2 * n {
        for c in 0..2 * n {
            e[r * 2 * n + c] *= two * v[r % n] * v[c % n];
        }
    }
    Ok(e)
}

/// Determinant of [`minor_matrix`] by LU factorization.
pub fn minor_det_positive<S: Scalar>(v: &[S], grid: &[S], density: &PiecewisePoly<S>) -> Result<S> {
    linalg::lu_det(&minor_matrix(v, grid, density)?)
}
