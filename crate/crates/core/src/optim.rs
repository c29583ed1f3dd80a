//! Derivative-free local minimization.

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    /// Edge length of the initial simplex relative to `max(1, |x0_i|)`.
    pub initial_step: f64,
    /// Stop once every vertex is within this distance of the best vertex.
    pub diameter_tol: f64,
    pub max_evals: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            initial_step: 0.05,
            diameter_tol: 1e-10,
            max_evals: 20_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum<S> {
    pub x: Vec<S>,
    pub value: S,
    pub evals: usize,
}

impl NelderMead {
    /// Minimizes `f` from `x0`. Non-finite objective values are treated as `+∞`.
    pub fn minimize<S: Scalar, F: FnMut(&[S]) -> S>(&self, mut f: F, x0: &[S]) -> Minimum<S> {
        let n = x0.len();
        let mut evals = 0usize;
        let mut eval = |x: &[S], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                S::infinity()
            } else {
                v
            }
        };
        let mut simplex: Vec<(Vec<S>, S)> = Vec::with_capacity(n + 1);
        let v0 = eval(x0, &mut evals);
        simplex.push((x0.to_vec(), v0));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += S::of(self.initial_step) * x0[i].abs().max(S::one());
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }
        let (alpha, gamma, rho, sigma) = (S::one(), S::of(2.0), S::of(0.5), S::of(0.5));
        let tol = S::of(self.diameter_tol);
        loop {
            simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
            let best = simplex[0].0.clone();
            let diameter = simplex[1..]
                .iter()
                .map(|(x, _)| {
                    x.iter()
                        .zip(&best)
                        .map(|(&a, &b)| (a - b) * (a - b))
                        .sum::<S>()
                        .sqrt()
                })
                .fold(S::zero(), S::max);
            if diameter <= tol || evals >= self.max_evals {
                break;
            }
            let mut centroid = vec![S::zero(); n];
            for (x, _) in &simplex[..n] {
                for (c, &xi) in centroid.iter_mut().zip(x) {
                    *c += xi / S::of_usize(n);
                }
            }
            let worst = simplex[n].clone();
            let along = |t: S| -> Vec<S> {
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(&c, &w)| c + t * (c - w))
                    .collect()
            };
            let xr = along(alpha);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(gamma);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < worst.1 {
                let xc = along(rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
                continue;
            }
            for k in 1..=n {
                let x: Vec<S> = best
                    .iter()
                    .zip(&simplex[k].0)
                    .map(|(&b, &xk)| b + sigma * (xk - b))
                    .collect();
                let v = eval(&x, &mut evals);
                simplex[k] = (x, v);
            }
        }
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let (x, value) = simplex.swap_remove(0);
        Minimum { x, value, evals }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_the_rosenbrock_minimum() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = NelderMead::default().minimize(f, &[-1.2, 1.0]);
        assert!((m.x[0] - 1.0).abs() < 1e-8 && (m.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn treats_nan_as_infinite() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) };
        let m = NelderMead::default().minimize(f, &[0.1]);
        assert!((m.x[0] - 0.5).abs() < 1e-9);
    }
}
