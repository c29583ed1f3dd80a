//! Adaptive Simpson quadrature for smooth one-dimensional integrands.

use crate::scalar::Scalar;

pub fn adaptive_simpson<S: Scalar, F: Fn(S) -> S>(f: &F, a: S, b: S, tol: S, max_depth: u32) -> S {
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) / S::of(2.0);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

fn simpson<S: Scalar>(a: S, b: S, fa: S, fm: S, fb: S) -> S {
    (b - a) / S::of(6.0) * (fa + S::of(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<S: Scalar, F: Fn(S) -> S>(
    f: &F,
    a: S,
    b: S,
    fa: S,
    fm: S,
    fb: S,
    whole: S,
    tol: S,
    depth: u32,
) -> S {
    let m = (a + b) / S::of(2.0);
    let lm = (a + m) / S::of(2.0);
    let rm = (m + b) / S::of(2.0);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= S::of(15.0) * tol {
        return left + right + delta / S::of(15.0);
    }
    let half = tol / S::of(2.0);
    recurse(f, a, m, fa, flm, fm, left, half, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, half, depth - 1)
}
