//! Small dense linear algebra on row-major square matrices.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigenvalues (ascending) and matching unit eigenvectors of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen<S> {
    pub values: Vec<S>,
    /// `vectors[k]` belongs to `values[k]`.
    pub vectors: Vec<Vec<S>>,
}

fn dim_of<S>(m: &[S]) -> Result<usize> {
    let n = (m.len() as f64).sqrt().round() as usize;
    if n * n != m.len() || n == 0 {
        return Err(Error::Shape);
    }
    Ok(n)
}

/// Largest `|m_ij − m_ji|`.
pub fn asymmetry<S: Scalar>(m: &[S]) -> Result<S> {
    let n = dim_of(m)?;
    let mut worst = S::zero();
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[i * n + j] - m[j * n + i]).abs());
        }
    }
    Ok(worst)
}

pub fn frobenius<S: Scalar>(m: &[S]) -> S {
    m.iter().map(|&x| x * x).sum::<S>().sqrt()
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
pub fn sym_eigen<S: Scalar>(m: &[S]) -> Result<SymEigen<S>> {
    let n = dim_of(m)?;
    let mut a = m.to_vec();
    let mut v = vec![S::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = S::one();
    }
    let scale = frobenius(m);
    let eps = S::epsilon();
    for _sweep in 0..100 {
        let mut off = S::zero();
        for i in 0..n {
            for j in 0..i {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off.sqrt() <= eps * eps.sqrt() * scale || off.is_zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.is_zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (S::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[i * n + i]
            .partial_cmp(&a[j * n + j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(SymEigen {
        values: order.iter().map(|&i| a[i * n + i]).collect(),
        vectors: order
            .iter()
            .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
            .collect(),
    })
}

/// Determinant by LU factorization with partial pivoting.
pub fn lu_det<S: Scalar>(m: &[S]) -> Result<S> {
    let n = dim_of(m)?;
    let mut a = m.to_vec();
    let mut det = S::one();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i * n + col]
                    .abs()
                    .partial_cmp(&a[j * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("nonempty range");
        if a[pivot * n + col].is_zero() {
            return Ok(S::zero());
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            det = -det;
        }
        let d = a[col * n + col];
        det *= d;
        for i in col + 1..n {
            let f = a[i * n + col] / d;
            if f.is_zero() {
                continue;
            }
            for k in col..n {
                let u = a[col * n + k];
                a[i * n + k] -= f * u;
            }
        }
    }
    Ok(det)
}

/// Product `m·x`.
pub fn mat_vec<S: Scalar>(m: &[S], x: &[S]) -> Vec<S> {
    let n = x.len();
    (0..n)
        .map(|i| (0..n).map(|k| m[i * n + k] * x[k]).sum())
        .collect()
}
