//! Weight-space linear programs over `{w : G w = h}`.
//!
//! All polytope questions in this crate reduce to one program: over the
//! affine set of weight vectors satisfying a linear equality system,
//! maximize the smallest weight. The equality system is eliminated first
//! (particular solution plus null-space coordinates), so the LP handed to
//! the simplex solver has inequality rows only.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::affine_solution;

/// Relative singular-value cutoff when eliminating equalities.
const ELIM_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MaxMinWeight {
    /// Optimal value of `min_i w_i`.
    pub margin: f64,
    pub weights: DVector<f64>,
}

/// Maximize `min_i w_i` subject to `G w = h`.
///
/// Returns [`Error::NotInHull`] when the equality system is inconsistent
/// beyond `hull_tol`. Callers are expected to include a `Σ w = 1` row so
/// the program is bounded.
pub fn max_min_weight(g: &DMatrix<f64>, h: &DVector<f64>, hull_tol: f64) -> Result<MaxMinWeight> {
    let sol = affine_solution(g, h, ELIM_RTOL);
    let scale = 1.0 + h.amax();
    if sol.residual > hull_tol * scale {
        return Err(Error::NotInHull {
            residual: sol.residual,
        });
    }
    let n = g.ncols();
    let free = sol.null_basis.ncols();
    if free == 0 {
        let margin = sol.particular.min();
        return Ok(MaxMinWeight {
            margin,
            weights: sol.particular,
        });
    }

    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let ys: Vec<_> = (0..free)
        .map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    // The margin is bounded above by 1/N whenever Σw = 1 is in the system;
    // the explicit box only keeps the solver away from unbounded rays on
    // malformed input.
    let eps = lp.add_var(1.0, (-1e6, 1e6));
    for i in 0..n {
        // w0_i + Σ_l Z_il y_l − ε ≥ 0
        let mut row: Vec<_> = ys
            .iter()
            .enumerate()
            .map(|(l, &y)| (y, sol.null_basis[(i, l)]))
            .collect();
        row.push((eps, -1.0));
        lp.add_constraint(&row[..], ComparisonOp::Ge, -sol.particular[i]);
    }
    let solved = lp.solve().map_err(|e| Error::Lp(e.to_string()))?;
    let y = DVector::from_iterator(free, ys.iter().map(|&v| solved[v]));
    let weights = &sol.particular + &sol.null_basis * y;
    Ok(MaxMinWeight {
        margin: solved[eps],
        weights,
    })
}

/// Stack `vec(Θ_i)` as columns and append the `Σ w = 1` row.
pub fn hull_system(points: &[DVector<f64>], target: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let d = target.len();
    let n = points.len();
    let mut g = DMatrix::zeros(d + 1, n);
    for (j, p) in points.iter().enumerate() {
        g.view_mut((0, j), (d, 1)).copy_from(p);
        g[(d, j)] = 1.0;
    }
    let mut h = DVector::zeros(d + 1);
    h.rows_mut(0, d).copy_from(target);
    h[d] = 1.0;
    (g, h)
}

/// Whether `target` lies in the convex hull of `points` (within `tol`).
pub fn in_convex_hull(points: &[DVector<f64>], target: &DVector<f64>, tol: f64) -> Result<Option<DVector<f64>>> {
    let (g, h) = hull_system(points, target);
    match max_min_weight(&g, &h, tol) {
        Ok(r) if r.margin >= -tol => Ok(Some(r.weights)),
        Ok(_) | Err(Error::NotInHull { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[&[f64]]) -> Vec<DVector<f64>> {
        v.iter().map(|p| DVector::from_row_slice(p)).collect()
    }

    #[test]
    fn centroid_of_triangle_has_margin_one_third() {
        let p = pts(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let c = DVector::from_vec(vec![1.0 / 3.0, 1.0 / 3.0]);
        let (g, h) = hull_system(&p, &c);
        let r = max_min_weight(&g, &h, 1e-9).unwrap();
        assert!((r.margin - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn square_centre_uses_free_directions() {
        let p = pts(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        let c = DVector::from_vec(vec![0.5, 0.5]);
        let (g, h) = hull_system(&p, &c);
        let r = max_min_weight(&g, &h, 1e-9).unwrap();
        assert!((r.margin - 0.25).abs() < 1e-9);
        assert!((&g * &r.weights - &h).norm() < 1e-9);
    }

    #[test]
    fn outside_point_has_negative_margin() {
        let p = pts(&[&[0.0], &[1.0]]);
        let c = DVector::from_vec(vec![2.0]);
        assert!(in_convex_hull(&p, &c, 1e-9).unwrap().is_none());
        let (g, h) = hull_system(&p, &c);
        assert!(max_min_weight(&g, &h, 1e-9).unwrap().margin < -0.5);
    }

    #[test]
    fn off_affine_hull_is_reported() {
        let p = pts(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let c = DVector::from_vec(vec![0.5, 1.0]);
        let (g, h) = hull_system(&p, &c);
        assert!(matches!(max_min_weight(&g, &h, 1e-9), Err(Error::NotInHull { .. })));
    }
}
