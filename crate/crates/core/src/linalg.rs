//! Dense linear-algebra kernels for small networks.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::tolerance;

// Pade(13) coefficients and the scaling threshold theta_13.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

pub(crate) fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `reach[i * n + j]` is true when a chain of nonzero entries of `m` leads
/// from `j` to `i`; every index reaches itself.
pub(crate) fn reach_pattern(m: &DMatrix<f64>) -> Vec<bool> {
    let n = m.nrows();
    let mut reach: Vec<bool> = (0..n * n).map(|k| k / n == k % n || m[(k / n, k % n)] != 0.0).collect();
    for k in 0..n {
        for i in 0..n {
            if reach[i * n + k] {
                for j in 0..n {
                    if reach[k * n + j] {
                        reach[i * n + j] = true;
                    }
                }
            }
        }
    }
    reach
}

/// `e^{m}` by scaling and squaring with a degree-13 Pade approximant.
///
/// No eigendecomposition is involved, so defective matrices (repeated decay
/// rates) need no special treatment. Entries that no chain of nonzero
/// entries of `m` connects are exactly zero in the result; the pivoted
/// solve would otherwise leave rounding noise there.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "matrix exponential of a non-square matrix");
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm = norm1(m);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = m * 0.5f64.powi(squarings);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let inner_u = &a6 * (b[13] * &a6 + b[11] * &a4 + b[9] * &a2);
    let u = &a * (inner_u + b[7] * &a6 + b[5] * &a4 + b[3] * &a2 + b[1] * &id);
    let inner_v = &a6 * (b[12] * &a6 + b[10] * &a4 + b[8] * &a2);
    let v = inner_v + b[6] * &a6 + b[4] * &a4 + b[2] * &a2 + b[0] * &id;

    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .expect("Pade denominator is nonsingular for scaled arguments");
    let reach = reach_pattern(m);
    for (k, v) in r.iter_mut().enumerate() {
        // column-major storage
        if !reach[(k % n) * n + k / n] {
            *v = 0.0;
        }
    }
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// Solves `A S + S A^T + Q = 0` for lower-triangular `A` by forward
/// substitution over the entries of `S`.
///
/// Every step divides by `a_ii + a_jj`, which is strictly negative for a
/// stable triangular drift.
pub fn lyapunov_lower_triangular(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let denom = a[(i, i)] + a[(j, j)];
            if denom >= 0.0 || !denom.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "Lyapunov operator singular at ({i},{j})"
                )));
            }
            let mut acc = q[(i, j)];
            for k in 0..i {
                acc += a[(i, k)] * s[(k, j)];
            }
            for k in 0..j {
                acc += a[(j, k)] * s[(i, k)];
            }
            let v = -acc / denom;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

/// Result of conditioning a Gaussian block on a subset of its variables.
#[derive(Debug, Clone)]
pub struct Conditioned {
    /// `S_kk - S_kg S_gg^{-1} S_gk`.
    pub schur: DMatrix<f64>,
    /// `S_kg S_gg^{-1} S_gk`, accumulated from non-negative terms.
    pub explained: DMatrix<f64>,
    /// Numerical rank of the conditioning block.
    pub rank: usize,
}

/// Conditions the variables `keep` of the symmetric matrix `m` on the
/// variables `given`, by symmetric elimination with diagonal pivoting
/// restricted to `given`.
///
/// A conditioning variable whose residual variance has fallen to `eps` times
/// its own variance is linearly determined by the pivots already taken. Such
/// directions are dropped only when their covariance with `keep` is
/// negligible; otherwise the conditioning is reported as singular.
pub fn condition(m: &DMatrix<f64>, keep: &[usize], given: &[usize]) -> Result<Conditioned> {
    let ng = given.len();
    let nk = keep.len();
    let idx: Vec<usize> = given.iter().chain(keep.iter()).copied().collect();
    let mut w = DMatrix::<f64>::from_fn(ng + nk, ng + nk, |r, c| m[(idx[r], idx[c])]);
    let mut explained = DMatrix::<f64>::zeros(nk, nk);

    // Pivoting and the rank decision use each variable's residual variance
    // relative to its own variance, so they do not depend on units.
    let diag: Vec<f64> = (0..ng).map(|i| w[(i, i)].max(0.0)).collect();
    let eps = tolerance::singular_pivot();
    let mut remaining: Vec<usize> = (0..ng).filter(|&i| diag[i] > 0.0).collect();
    let mut dropped: Vec<usize> = (0..ng).filter(|&i| diag[i] <= 0.0).collect();
    let mut rank = 0;
    while !remaining.is_empty() {
        let (pos, &p) = remaining
            .iter()
            .enumerate()
            .max_by(|a, b| (w[(*a.1, *a.1)] / diag[*a.1]).total_cmp(&(w[(*b.1, *b.1)] / diag[*b.1])))
            .expect("non-empty");
        let d = w[(p, p)];
        if !(d > eps * diag[p]) {
            break;
        }
        remaining.swap_remove(pos);
        let sd = d.sqrt();
        let col: Vec<f64> = (0..ng + nk).map(|r| w[(r, p)] / sd).collect();
        for r in 0..ng + nk {
            if col[r] == 0.0 {
                continue;
            }
            for c in 0..ng + nk {
                w[(r, c)] -= col[r] * col[c];
            }
        }
        for r in 0..nk {
            for c in 0..nk {
                explained[(r, c)] += col[ng + r] * col[ng + c];
            }
        }
        // Exact zeros on the eliminated row keep later pivots clean.
        for r in 0..ng + nk {
            w[(r, p)] = 0.0;
            w[(p, r)] = 0.0;
        }
        rank += 1;
    }

    dropped.extend(remaining);
    for &g in &dropped {
        for k in 0..nk {
            let scale = (diag[g] * m[(keep[k], keep[k])].abs()).sqrt();
            if w[(g, ng + k)].abs() > tolerance::epsilon() * scale {
                return Err(Error::SingularConditioning(format!(
                    "conditioning block has rank {rank} of {ng} and its null space \
                     is correlated with the kept variables"
                )));
            }
        }
    }

    let mut schur = DMatrix::<f64>::from_fn(nk, nk, |r, c| w[(ng + r, ng + c)]);
    symmetrize(&mut schur);
    symmetrize(&mut explained);
    Ok(Conditioned {
        schur,
        explained,
        rank,
    })
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// A factor `F` with `F F^T = m` from a symmetric eigendecomposition,
/// clamping eigenvalues in `[-psd_slack * trace, 0)` to zero.
pub fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let trace: f64 = sym.diagonal().iter().map(|v| v.abs()).sum();
    let eig = SymmetricEigen::new(sym);
    let floor = -tolerance::psd_slack() * trace;
    let mut f = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < floor {
            return Err(Error::NumericalFailure(format!(
                "covariance has eigenvalue {lambda:e} below the PSD floor {floor:e}"
            )));
        }
        let s = lambda.max(0.0).sqrt();
        for i in 0..n {
            f[(i, j)] *= s;
        }
    }
    Ok(f)
}
