//! Central finite differences and error measures used by the self-checks.

use crate::scalar::Scalar;

/// Default relative step for differentiating the risk.
pub const RISK_STEP: f64 = 1e-6;

/// Default relative step for differentiating the gradient.
pub const GRADIENT_STEP: f64 = 1e-5;

/// `|a − b| / max(|a|, |b|, 1)`.
pub fn rel_err<S: Scalar>(a: S, b: S) -> S {
    (a - b).abs() / a.abs().max(b.abs()).max(S::one())
}

pub fn max_rel_err<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |m, (&x, &y)| m.max(rel_err(x, y)))
}

fn steps<S: Scalar>(x: S, rel: S) -> (S, S) {
    let h = rel * x.abs().max(S::one());
    // representable displacements on both sides
    ((x + h) - x, x - (x - h))
}

/// Central-difference gradient of `f` with steps `rel·max(1, |x_i|)`.
pub fn central_gradient<S: Scalar, F: Fn(&[S]) -> S>(f: F, x: &[S], rel: S) -> Vec<S> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let (hp, hm) = steps(x[i], rel);
            y[i] = x[i] + hp;
            let fp = f(&y);
            y[i] = x[i] - hm;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (hp + hm)
        })
        .collect()
}

/// Central-difference Jacobian: `jac[i][k] = ∂g_i/∂x_k`.
pub fn central_jacobian<S: Scalar, F: Fn(&[S]) -> Vec<S>>(g: F, x: &[S], rel: S) -> Vec<Vec<S>> {
    let n = x.len();
    let mut y = x.to_vec();
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        let (hp, hm) = steps(x[k], rel);
        y[k] = x[k] + hp;
        let gp = g(&y);
        y[k] = x[k] - hm;
        let gm = g(&y);
        y[k] = x[k];
        cols.push(
            gp.iter()
                .zip(&gm)
                .map(|(&p, &m)| (p - m) / (hp + hm))
                .collect::<Vec<S>>(),
        );
    }
    let m = cols.first().map_or(0, Vec::len);
    (0..m).map(|i| (0..n).map(|k| cols[k][i]).collect()).collect()
}
