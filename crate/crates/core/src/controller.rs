//! Blended-gain tracking control.
//!
//! Each corner carries matching gains `(K_i, L_i)`. With weight estimate
//! `ŵ`, the blended input matrix `B̂ = Σ ŵ_i B_i` and its left inverse give
//! `K̂ = B̂† Σ ŵ_i B_i K_i`, `L̂ = B̂† Σ ŵ_i B_i L_i` and the control
//! `u = K̂ x_p + L̂ r`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identifier::WeightEstimate;
use crate::linalg;
use crate::matpoly::{compute_corner_gains, CornerSet, GainPair, MatchingTarget};

/// Per-corner gains, computed once per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    gains: Vec<GainPair>,
    /// `B_i K_i` and `B_i L_i`, cached for blending.
    bk: Vec<DMatrix<f64>>,
    bl: Vec<DMatrix<f64>>,
}

impl GainSchedule {
    pub fn new(cs: &CornerSet, target: &MatchingTarget, tol_match: f64) -> Result<Self> {
        let gains = compute_corner_gains(cs, target, tol_match)?;
        let bk = cs.corners().iter().zip(&gains).map(|(c, g)| c.b() * &g.k).collect();
        let bl = cs.corners().iter().zip(&gains).map(|(c, g)| c.b() * &g.l).collect();
        Ok(Self { gains, bk, bl })
    }

    pub fn gains(&self) -> &[GainPair] {
        &self.gains
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub khat: DMatrix<f64>,
    pub lhat: DMatrix<f64>,
    pub bhat: DMatrix<f64>,
    pub bhat_pinv: DMatrix<f64>,
    pub sigma_min: f64,
}

/// `B̂ = Σ ŵ_i B_i` and `B̂† = (B̂ᵀB̂)⁻¹B̂ᵀ`.
pub fn blended_input_matrix(
    cs: &CornerSet,
    we: &WeightEstimate,
    tol_rank: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let bhat = cs.combine_b(we.full().as_slice());
    let (pinv, sigma_min) = normal_equation_pinv(&bhat, tol_rank)?;
    Ok((bhat, pinv, sigma_min))
}

/// Left inverse through the normal equations, with `σ_min` from the
/// Gram eigenvalues.
pub fn normal_equation_pinv(b: &DMatrix<f64>, tol_rank: f64) -> Result<(DMatrix<f64>, f64)> {
    let bt = b.transpose();
    let gram = &bt * b;
    let (lo, _) = linalg::sym_eig_range(&gram);
    let sigma_min = lo.max(0.0).sqrt();
    if !(sigma_min > tol_rank) {
        return Err(Error::RankCollapse { sigma_min });
    }
    let chol = gram
        .cholesky()
        .ok_or(Error::RankCollapse { sigma_min })?;
    Ok((chol.solve(&bt), sigma_min))
}

pub fn blended_gains(
    cs: &CornerSet,
    gs: &GainSchedule,
    we: &WeightEstimate,
    tol_rank: f64,
) -> Result<ControllerState> {
    let (bhat, bhat_pinv, sigma_min) = blended_input_matrix(cs, we, tol_rank)?;
    let w = we.full();
    let (n, m) = (cs.n(), cs.m());
    let mut sum_bk = DMatrix::zeros(n, n);
    let mut sum_bl = DMatrix::zeros(n, m);
    for (i, wi) in w.iter().enumerate() {
        sum_bk += &gs.bk[i] * *wi;
        sum_bl += &gs.bl[i] * *wi;
    }
    Ok(ControllerState {
        khat: &bhat_pinv * sum_bk,
        lhat: &bhat_pinv * sum_bl,
        bhat,
        bhat_pinv,
        sigma_min,
    })
}

/// `u = K̂ x_p + L̂ r`.
pub fn control(cstate: &ControllerState, x_p: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
    feedback(&cstate.khat, &cstate.lhat, x_p, r)
}

pub fn feedback(k: &DMatrix<f64>, l: &DMatrix<f64>, x_p: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
    k * x_p + l * r
}

pub fn reference_derivative(target: &MatchingTarget, x_r: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
    target.a_r() * x_r + target.b_r() * r
}

/// One sinusoid `amplitude · sin(omega·t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineTerm {
    pub amplitude: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputChannel {
    #[serde(default)]
    pub offset: f64,
    pub terms: Vec<SineTerm>,
}

impl InputChannel {
    pub fn eval(&self, t: f64) -> f64 {
        self.offset
            + self
                .terms
                .iter()
                .map(|s| s.amplitude * (s.omega * t + s.phase).sin())
                .sum::<f64>()
    }
}

/// Multisine reference (or open-loop input) signal, one channel per input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceInputSpec {
    pub channels: Vec<InputChannel>,
}

impl ReferenceInputSpec {
    pub fn new(channels: Vec<InputChannel>) -> Result<Self> {
        let finite = channels.iter().all(|c| {
            c.offset.is_finite()
                && c.terms
                    .iter()
                    .all(|s| s.amplitude.is_finite() && s.omega.is_finite() && s.phase.is_finite())
        });
        if channels.is_empty() || !finite {
            return Err(Error::InvalidConfig(
                "input needs at least one channel with finite terms".into(),
            ));
        }
        Ok(Self { channels })
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(self.channels.len(), self.channels.iter().map(|c| c.eval(t)))
    }
}

/// `(P, Q)` with `P A_r + A_rᵀ P + Q = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    pub q: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

impl LyapunovCertificate {
    pub fn residual(&self, a_r: &DMatrix<f64>) -> f64 {
        (&self.p * a_r + a_r.transpose() * &self.p + &self.q).norm()
    }

    /// `V(e) = eᵀ P e`.
    pub fn value(&self, e: &DVector<f64>) -> f64 {
        e.dot(&(&self.p * e))
    }
}

/// Solve `P A + Aᵀ P + Q = 0` through its `n² × n²` Kronecker form.
pub fn solve_lyapunov(a_r: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<LyapunovCertificate> {
    let n = a_r.nrows();
    if !a_r.is_square() || q.shape() != (n, n) {
        return Err(Error::Dimension("A_r and Q must be square of equal size".into()));
    }
    let abscissa = linalg::spectral_abscissa(a_r)?;
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz { abscissa });
    }
    if !linalg::is_symmetric(q, 1e-12) || !(linalg::sym_eig_range(q).0 > 0.0) {
        return Err(Error::NotPositiveDefinite("Q must be symmetric positive definite".into()));
    }
    // vec(P A) = (Aᵀ ⊗ I) vec P, vec(Aᵀ P) = (I ⊗ Aᵀ) vec P.
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a_r.transpose();
    let op = at.kronecker(&eye) + eye.kronecker(&at);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let vec_p = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NotPositiveDefinite("singular Lyapunov operator".into()))?;
    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    let p = (&p + p.transpose()) * 0.5;
    if !(linalg::sym_eig_range(&p).0 > 0.0) {
        return Err(Error::NotPositiveDefinite("Lyapunov solution is not positive definite".into()));
    }
    Ok(LyapunovCertificate { q: q.clone(), p })
}

/// Lyapunov-based direct MRAC update with a known matrix `b_in` standing
/// in for the unknown `B_p` (typically `B_r` or a nominal estimate):
/// `dK̂ = −γ_K b_inᵀ P e x_pᵀ`, `dL̂ = −γ_L b_inᵀ P e rᵀ`.
#[allow(clippy::too_many_arguments)]
pub fn baseline_mrac_update(
    e: &DVector<f64>,
    x_p: &DVector<f64>,
    r: &DVector<f64>,
    p: &DMatrix<f64>,
    b_in: &DMatrix<f64>,
    gamma_k: f64,
    gamma_l: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let s = b_in.transpose() * (p * e);
    (&s * x_p.transpose() * -gamma_k, &s * r.transpose() * -gamma_l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matpoly::SystemMatrices;
    use nalgebra::dvector;

    fn a_r3() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 1.0, -1.0])
    }

    fn b_r3() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    }

    #[test]
    fn lyapunov_identity_cases() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let c = solve_lyapunov(&a, &(DMatrix::identity(2, 2) * 2.0)).unwrap();
        assert!((c.p.clone() - DMatrix::identity(2, 2)).amax() < 1e-14);
        let q = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let c = solve_lyapunov(&a, &q).unwrap();
        assert!((c.p.clone() - &q * 0.5).amax() < 1e-14);
    }

    #[test]
    fn lyapunov_residual_for_lower_triangular_reference() {
        let c = solve_lyapunov(&a_r3(), &DMatrix::identity(3, 3)).unwrap();
        assert!(c.residual(&a_r3()) < 1e-10);
        assert!((c.p.clone() - c.p.transpose()).amax() == 0.0);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(
            solve_lyapunov(&a, &DMatrix::identity(2, 2)),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn control_examples() {
        let cs = ControllerState {
            khat: DMatrix::zeros(2, 3),
            lhat: DMatrix::identity(2, 2),
            bhat: b_r3(),
            bhat_pinv: linalg::pinv(&b_r3()),
            sigma_min: 1.0,
        };
        let r = dvector![0.3, -0.1];
        assert_eq!(control(&cs, &dvector![1.0, 2.0, 3.0], &r), r);
        assert_eq!(control(&cs, &DVector::zeros(3), &DVector::zeros(2)), DVector::zeros(2));
    }

    #[test]
    fn reference_derivative_examples() {
        let t = MatchingTarget::new(a_r3(), b_r3()).unwrap();
        assert_eq!(reference_derivative(&t, &DVector::zeros(3), &DVector::zeros(2)), DVector::zeros(3));
        let d = reference_derivative(&t, &dvector![1.0, 0.0, 0.0], &DVector::zeros(2));
        assert_eq!(d, dvector![-1.0, 0.0, 1.0]);
        let rbar = dvector![0.7, -0.4];
        let xeq = -a_r3().lu().solve(&(b_r3() * &rbar)).unwrap();
        assert!(reference_derivative(&t, &xeq, &rbar).amax() < 1e-14);
    }

    #[test]
    fn pinv_of_isometry_is_transpose() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let (p, s) = normal_equation_pinv(&b, 1e-9).unwrap();
        assert_eq!(p, b.transpose());
        assert!((s - 1.0).abs() < 1e-15);
        assert!(matches!(
            normal_equation_pinv(&DMatrix::zeros(3, 2), 1e-9),
            Err(Error::RankCollapse { .. })
        ));
    }

    #[test]
    fn shared_input_matrix_blends_gains_linearly() {
        let t = MatchingTarget::new(a_r3(), b_r3()).unwrap();
        let mk = |f: [f64; 6]| {
            let fm = DMatrix::from_row_slice(2, 3, &f);
            SystemMatrices::new(a_r3() - b_r3() * fm, b_r3()).unwrap()
        };
        let cs = CornerSet::new(vec![
            mk([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            mk([0.0, 2.0, 0.0, 1.0, 0.0, -1.0]),
            mk([-1.0, 0.5, 0.3, 0.0, 0.0, 2.0]),
        ])
        .unwrap();
        let gs = GainSchedule::new(&cs, &t, 1e-8).unwrap();
        let we = WeightEstimate::new(dvector![0.2, 0.5]).unwrap();
        let st = blended_gains(&cs, &gs, &we, 1e-9).unwrap();
        let w = we.full();
        let expect = gs.gains().iter().zip(w.iter()).fold(DMatrix::zeros(2, 3), |acc, (g, wi)| acc + &g.k * *wi);
        assert!((st.khat - expect).amax() < 1e-12);
        assert!((st.lhat - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn vertex_weight_recovers_corner_gains() {
        let t = MatchingTarget::new(a_r3(), b_r3()).unwrap();
        let m2 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, -0.3, 1.0]);
        let f = DMatrix::from_row_slice(2, 3, &[0.1, 0.2, 0.3, -0.4, 0.5, 0.6]);
        let c1 = SystemMatrices::new(a_r3() + b_r3() * &f, b_r3() * &m2).unwrap();
        let c2 = SystemMatrices::new(a_r3(), b_r3()).unwrap();
        let cs = CornerSet::new(vec![c1, c2]).unwrap();
        let gs = GainSchedule::new(&cs, &t, 1e-8).unwrap();
        let st = blended_gains(&cs, &gs, &WeightEstimate::new(dvector![1.0]).unwrap(), 1e-9).unwrap();
        assert!((&st.khat - &gs.gains()[0].k).amax() < 1e-12);
        assert!((&st.lhat - &gs.gains()[0].l).amax() < 1e-12);
        assert!((&st.bhat_pinv * &st.bhat - DMatrix::identity(2, 2)).amax() < 1e-8);
    }

    #[test]
    fn baseline_update_signs() {
        let (dk, dl) = baseline_mrac_update(
            &DVector::zeros(1),
            &dvector![1.0],
            &dvector![1.0],
            &DMatrix::identity(1, 1),
            &DMatrix::identity(1, 1),
            2.0,
            2.0,
        );
        assert_eq!((dk[(0, 0)], dl[(0, 0)]), (0.0, 0.0));
        let (dk, _) = baseline_mrac_update(
            &dvector![0.5],
            &dvector![2.0],
            &dvector![0.0],
            &DMatrix::from_element(1, 1, 0.7),
            &DMatrix::from_element(1, 1, 1.5),
            2.0,
            2.0,
        );
        assert!(dk[(0, 0)] < 0.0);
    }

    #[test]
    fn multisine_channel() {
        let spec = ReferenceInputSpec::new(vec![InputChannel {
            offset: 0.5,
            terms: vec![
                SineTerm { amplitude: 1.0, omega: 1.0, phase: 0.0 },
                SineTerm { amplitude: 0.5, omega: 2.0, phase: 0.0 },
            ],
        }])
        .unwrap();
        let t = 0.3f64;
        assert!((spec.eval(t)[0] - (0.5 + t.sin() + 0.5 * (2.0 * t).sin())).abs() < 1e-15);
        assert!(ReferenceInputSpec::new(vec![]).is_err());
    }
}
