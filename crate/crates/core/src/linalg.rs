//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Build a matrix from row-major nested rows.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Dimension("matrix has no rows".into()));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged or empty matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Largest real part over the eigenvalues of a square matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let eig = a.clone().complex_eigenvalues();
    Ok(eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest singular value (0 for an empty matrix).
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Least-squares pseudo-inverse via SVD with a relative cutoff.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eps = f64::EPSILON * m.nrows().max(m.ncols()) as f64;
    let svd = m.clone().svd(true, true);
    let cutoff = eps * svd.singular_values.iter().copied().fold(0.0, f64::max);
    svd.pseudo_inverse(cutoff)
        .expect("both singular vector sets were requested")
}

/// Orthogonal projector onto the complement of the column space of `b`.
pub fn complement_projector(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    DMatrix::identity(n, n) - b * pinv(b)
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn sym_eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let ev = sym.symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Numerical rank from singular values with relative tolerance `rtol`.
pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * smax).count()
}

/// Affine solution set `{w : G w = h}` described as `w0 + Z y`.
#[derive(Debug, Clone)]
pub struct AffineSolution {
    pub particular: DVector<f64>,
    /// Orthonormal null-space basis of `G`, one column per free direction.
    pub null_basis: DMatrix<f64>,
    /// `‖G w0 − h‖`; large values mean the system is inconsistent.
    pub residual: f64,
    pub rank: usize,
}

/// Minimum-norm least-squares solution plus null space of `G`.
pub fn affine_solution(g: &DMatrix<f64>, h: &DVector<f64>, rtol: f64) -> AffineSolution {
    let ncols = g.ncols();
    // Pad to at least as many rows as columns so the thin SVD exposes a
    // complete right singular basis.
    let padded = if g.nrows() < ncols {
        let mut p = DMatrix::zeros(ncols, ncols);
        p.view_mut((0, 0), (g.nrows(), ncols)).copy_from(g);
        p
    } else {
        g.clone()
    };
    let svd = padded.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = if smax > 0.0 { rtol * smax } else { f64::INFINITY };
    let v_t = svd.v_t.as_ref().expect("requested");
    let u = svd.u.as_ref().expect("requested");

    let mut particular = DVector::zeros(ncols);
    let mut null_cols = Vec::new();
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let v = v_t.row(k).transpose();
        if s > cutoff {
            rank += 1;
            let uk = u.column(k);
            let coeff = uk.rows(0, g.nrows()).dot(h) / s;
            particular += v * coeff;
        } else {
            null_cols.push(v);
        }
    }
    let null_basis = if null_cols.is_empty() {
        DMatrix::zeros(ncols, 0)
    } else {
        DMatrix::from_columns(&null_cols)
    };
    let residual = (g * &particular - h).norm();
    AffineSolution {
        particular,
        null_basis,
        residual,
        rank,
    }
}

/// Row-reduce `[G | h]` to a set of linearly independent rows, greedily
/// keeping rows in order (modified Gram-Schmidt on the rows of `G`).
///
/// Returns `None` when a dropped row is inconsistent with the kept ones.
pub fn independent_rows(
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    tol: f64,
) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let ncols = g.ncols();
    let scale = g.amax().max(1.0);
    let mut basis: Vec<(DVector<f64>, f64)> = Vec::new(); // orthonormal rows + rhs
    let mut kept_rows = Vec::new();
    let mut kept_rhs = Vec::new();
    for i in 0..g.nrows() {
        let mut r = g.row(i).transpose();
        let mut rhs = h[i];
        for (q, qh) in &basis {
            let c = q.dot(&r);
            r -= q * c;
            rhs -= c * qh;
        }
        let nr = r.norm();
        if nr > tol * scale {
            basis.push((r / nr, rhs / nr));
            kept_rows.push(g.row(i).clone_owned());
            kept_rhs.push(h[i]);
        } else if rhs.abs() > tol.sqrt() * (1.0 + h[i].abs()) {
            return None;
        }
    }
    if kept_rows.is_empty() {
        return Some((DMatrix::zeros(0, ncols), DVector::zeros(0)));
    }
    Some((DMatrix::from_rows(&kept_rows), DVector::from_vec(kept_rhs)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abscissa_of_rotation_is_zero() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(spectral_abscissa(&a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn pinv_of_tall_matrix_is_left_inverse() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let bp = pinv(&b);
        assert!((bp * b - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn affine_solution_of_simplex_constraint() {
        let g = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let h = DVector::from_vec(vec![1.0]);
        let sol = affine_solution(&g, &h, 1e-12);
        assert_eq!(sol.rank, 1);
        assert_eq!(sol.null_basis.ncols(), 2);
        assert!(sol.residual < 1e-14);
        assert!((&g * &sol.null_basis).amax() < 1e-14);
    }

    #[test]
    fn independent_rows_drops_duplicates_and_detects_conflict() {
        let g = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 1.0, -1.0]);
        let h = DVector::from_vec(vec![1.0, 2.0, 0.0]);
        let (gr, hr) = independent_rows(&g, &h, 1e-12).unwrap();
        assert_eq!(gr.nrows(), 2);
        assert_eq!(hr.len(), 2);

        let bad = DVector::from_vec(vec![1.0, 3.0, 0.0]);
        assert!(independent_rows(&g, &bad, 1e-12).is_none());
    }
}
