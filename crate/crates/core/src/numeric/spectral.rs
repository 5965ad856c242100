//! Symmetric eigendecomposition (cyclic Jacobi), adjacency normalization and
//! Laplacian spectral embeddings.

use super::Matrix;
use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix sorted by ascending eigenvalue (ties by
/// original diagonal position). Eigenvectors are the columns of the returned
/// matrix.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !m.is_square() {
        return Err(Error::arg("eigendecomposition needs a square matrix"));
    }
    if !m.all_finite() {
        return Err(Error::Numeric("non-finite matrix entry".into()));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let scale: f64 = a.data().iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, col)] = v[(r, src)];
        }
    }
    Ok((values, vectors))
}

fn check_adjacency(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::arg(format!(
            "adjacency must be square, got {:?}",
            a.shape()
        )));
    }
    if !a.is_symmetric(1e-12) {
        return Err(Error::arg("adjacency must be symmetric"));
    }
    if !a.all_finite() {
        return Err(Error::Numeric("non-finite adjacency entry".into()));
    }
    Ok(())
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃` the degree matrix of `A + I`.
pub fn normalize_adjacency(a: &Matrix) -> Result<Matrix> {
    check_adjacency(a)?;
    Ok(normalize_unchecked(a))
}

fn normalize_unchecked(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut b = a.clone();
    for i in 0..n {
        b[(i, i)] += 1.0;
    }
    let s: Vec<f64> = (0..n)
        .map(|i| 1.0 / b.row(i).iter().sum::<f64>().sqrt())
        .collect();
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] *= s[i] * s[j];
        }
    }
    b
}

/// Gradient of a scalar loss with respect to `A` given its gradient with
/// respect to `normalize_adjacency(A)`. Entries are treated as independent.
pub fn normalize_adjacency_backward(a: &Matrix, grad_norm: &Matrix) -> Matrix {
    let n = a.rows();
    let mut b = a.clone();
    for i in 0..n {
        b[(i, i)] += 1.0;
    }
    let d: Vec<f64> = (0..n).map(|i| b.row(i).iter().sum()).collect();
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    // ∂L/∂s_k = Σ_j G_kj B_kj s_j + Σ_i G_ik s_i B_ik
    let mut gs = vec![0.0; n];
    for k in 0..n {
        for j in 0..n {
            gs[k] += grad_norm[(k, j)] * b[(k, j)] * s[j];
            gs[k] += grad_norm[(j, k)] * s[j] * b[(j, k)];
        }
    }
    let gd: Vec<f64> = (0..n).map(|k| gs[k] * -0.5 * d[k].powf(-1.5)).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = grad_norm[(i, j)] * s[i] * s[j] + gd[i];
        }
    }
    out
}

/// Symmetric normalized Laplacian `I − D^{-1/2} A D^{-1/2}` (no self-loops;
/// isolated nodes get a unit diagonal).
pub fn normalized_laplacian(a: &Matrix) -> Result<Matrix> {
    check_adjacency(a)?;
    let n = a.rows();
    let s: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = a.row(i).iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut l = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            l[(i, j)] -= s[i] * a[(i, j)] * s[j];
        }
    }
    Ok(l)
}

/// `k` Laplacian eigenvectors after the smallest one, sign-fixed by
/// [`canonical_sign`] (entrywise absolute values where the sign is
/// ambiguous); zero-padded when the graph has fewer than `k + 1` nodes.
pub fn spectral_embedding(a: &Matrix, k: usize) -> Result<Matrix> {
    let n = a.rows();
    if n == 0 {
        return Err(Error::arg("spectral embedding of an empty graph"));
    }
    if k == 0 {
        return Err(Error::arg("embedding dimension must be at least 1"));
    }
    let l = normalized_laplacian(a)?;
    let (_, vecs) = symmetric_eigen(&l)?;
    let mut x = Matrix::zeros(n, k);
    for c in 0..k.min(n - 1) {
        let src = c + 1;
        let col: Vec<f64> = (0..n).map(|r| vecs[(r, src)]).collect();
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let fixed: Vec<f64> = match canonical_sign(&col) {
            Some(sign) => col.iter().map(|v| sign * v).collect(),
            None => col.iter().map(|v| v.abs()).collect(),
        };
        for r in 0..n {
            x[(r, c)] = fixed[r] / norm;
        }
    }
    Ok(x)
}

/// Entries closer than this are treated as equal when fixing signs.
const SIGN_TIE: f64 = 1e-9;

/// Sign that makes the descending-sorted entries of `sign · col`
/// lexicographically largest. It depends only on the multiset of entries, so
/// it does not change when nodes are reordered. `None` when `col` and `−col`
/// have the same entries: a graph automorphism then maps the eigenvector to
/// its negation and no sign rule can follow node reorderings.
fn canonical_sign(col: &[f64]) -> Option<f64> {
    let mut pos = col.to_vec();
    let mut neg: Vec<f64> = col.iter().map(|v| -v).collect();
    pos.sort_by(|a, b| b.total_cmp(a));
    neg.sort_by(|a, b| b.total_cmp(a));
    for (p, q) in pos.iter().zip(&neg) {
        if (p - q).abs() > SIGN_TIE {
            return Some(if p > q { 1.0 } else { -1.0 });
        }
    }
    None
}

/// Smallest gap between consecutive Laplacian eigenvalues; used to recognize
/// graphs whose embedding is uniquely defined.
pub fn laplacian_spectral_gap(a: &Matrix) -> Result<f64> {
    let (vals, _) = symmetric_eigen(&normalized_laplacian(a)?)?;
    Ok(vals.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min))
}
