//! Multiple-model parameter identification.
//!
//! The plant is filtered by `1/(s+λ)`, giving the regressor
//! `Φ = [φ₁; φ₂]` and the signal `z = −λφ₁ + x_p` with
//! `z − Θ_p Φ` decaying like `e^{−λt}`. Each corner predicts `z_i = Θ_i Φ`;
//! normalized errors `ε_i = (z − z_i)/m_s²` drive a gradient law on the first
//! `N−1` convex weights, kept inside
//! `Π = {w̄ ∈ [0,1]^{N−1} : Σ w̄_i ≤ 1}` by projection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matpoly::{CornerSet, SystemMatrices, WeightVector};

/// Tolerance for membership of `Π`.
pub const PI_TOL: f64 = 1e-10;
/// Activity threshold for the tangent-cone projection.
pub const ACTIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifierConfig {
    lambda: f64,
    alpha: f64,
    gamma: DMatrix<f64>,
}

impl IdentifierConfig {
    pub fn new(lambda: f64, alpha: f64, gamma: DMatrix<f64>) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be > 0, got {lambda}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be > 0, got {alpha}")));
        }
        if !linalg::is_symmetric(&gamma, 1e-12) {
            return Err(Error::NotPositiveDefinite("Gamma must be symmetric".into()));
        }
        let (lo, _) = linalg::sym_eig_range(&gamma);
        if !(lo > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "Gamma has minimum eigenvalue {lo}"
            )));
        }
        Ok(Self { lambda, alpha, gamma })
    }

    /// `Γ = γ I` of size `N−1`.
    pub fn scalar_gain(lambda: f64, alpha: f64, gamma: f64, corners: usize) -> Result<Self> {
        if corners < 2 {
            return Err(Error::DegeneratePolytope { corners });
        }
        Self::new(lambda, alpha, DMatrix::identity(corners - 1, corners - 1) * gamma)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }
}

/// Filter states `φ₁ ∈ R^n`, `φ₂ ∈ R^m`; zero at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub phi1: DVector<f64>,
    pub phi2: DVector<f64>,
}

impl Regressor {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            phi1: DVector::zeros(n),
            phi2: DVector::zeros(m),
        }
    }

    /// Stacked `Φ = [φ₁; φ₂]`.
    pub fn phi(&self) -> DVector<f64> {
        let (n, m) = (self.phi1.len(), self.phi2.len());
        let mut v = DVector::zeros(n + m);
        v.rows_mut(0, n).copy_from(&self.phi1);
        v.rows_mut(n, m).copy_from(&self.phi2);
        v
    }

    pub fn z(&self, x_p: &DVector<f64>, lambda: f64) -> DVector<f64> {
        compute_z(&self.phi1, x_p, lambda)
    }

    pub fn ms2(&self, alpha: f64) -> f64 {
        normalization(&self.phi(), alpha)
    }
}

/// `m_s² = 1 + α‖Φ‖²`.
pub fn normalization(phi: &DVector<f64>, alpha: f64) -> f64 {
    1.0 + alpha * phi.norm_squared()
}

pub fn filter_derivative(
    reg: &Regressor,
    x_p: &DVector<f64>,
    u: &DVector<f64>,
    lambda: f64,
) -> (DVector<f64>, DVector<f64>) {
    (x_p - &reg.phi1 * lambda, u - &reg.phi2 * lambda)
}

pub fn compute_z(phi1: &DVector<f64>, x_p: &DVector<f64>, lambda: f64) -> DVector<f64> {
    x_p - phi1 * lambda
}

/// `z_i = Θ_i Φ` for every corner.
pub fn corner_outputs(cs: &CornerSet, phi: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = cs.n();
    let (phi1, phi2) = (phi.rows(0, n), phi.rows(n, cs.m()));
    cs.corners()
        .iter()
        .map(|c| c.a() * phi1 + c.b() * phi2)
        .collect()
}

/// Normalized per-corner errors and `E = [ε_1 − ε_N, …, ε_{N−1} − ε_N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonMatrix {
    pub eps: Vec<DVector<f64>>,
    pub e: DMatrix<f64>,
}

impl EpsilonMatrix {
    pub fn eps_last(&self) -> &DVector<f64> {
        self.eps.last().expect("at least two corners")
    }
}

pub fn epsilons(z: &DVector<f64>, z_list: &[DVector<f64>], ms2: f64) -> EpsilonMatrix {
    let eps: Vec<DVector<f64>> = z_list.iter().map(|zi| (z - zi) / ms2).collect();
    let last = eps.len() - 1;
    let cols: Vec<DVector<f64>> = eps[..last].iter().map(|e| e - &eps[last]).collect();
    let e = if cols.is_empty() {
        DMatrix::zeros(z.len(), 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    EpsilonMatrix { eps, e }
}

/// Unprojected gradient direction `−Γ(EᵀE w̄ + Eᵀε_N)`.
pub fn raw_update(
    e: &DMatrix<f64>,
    eps_n: &DVector<f64>,
    wbar: &DVector<f64>,
    gamma: &DMatrix<f64>,
) -> DVector<f64> {
    let et = e.transpose();
    -(gamma * (&et * (e * wbar + eps_n)))
}

/// How far `wbar` lies outside `Π` (0 when inside).
pub fn pi_violation(wbar: &DVector<f64>) -> f64 {
    let neg = wbar.iter().map(|&x| (-x).max(0.0)).fold(0.0, f64::max);
    let over = wbar.iter().map(|&x| (x - 1.0).max(0.0)).fold(0.0, f64::max);
    let sum = (wbar.sum() - 1.0).max(0.0);
    neg.max(over).max(sum)
}

/// Euclidean projection of `v` onto the tangent cone of `Π` at `wbar`.
///
/// Active lower bounds impose `d_i ≥ 0`, active upper bounds `d_i ≤ 0`, an
/// active sum constraint `Σ d ≤ 0`. With `μ ≥ 0` the multiplier of the sum
/// constraint, the minimizer is the coordinate clamp of `v − μ·1`, and
/// `Σ d(μ)` is piecewise linear and non-increasing, so `μ` is located
/// exactly among the clamp breakpoints.
pub fn project_update(wbar: &DVector<f64>, v: &DVector<f64>, act_tol: f64) -> Result<DVector<f64>> {
    let violation = pi_violation(wbar);
    if violation > PI_TOL.max(act_tol) {
        return Err(Error::StateOutsidePi { violation });
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Bound {
        Free,
        Lower,
        Upper,
    }
    let bounds: Vec<Bound> = wbar
        .iter()
        .map(|&x| {
            if x <= act_tol {
                Bound::Lower
            } else if x >= 1.0 - act_tol {
                Bound::Upper
            } else {
                Bound::Free
            }
        })
        .collect();
    let sum_active = wbar.sum() >= 1.0 - act_tol;

    let clamp = |mu: f64| -> DVector<f64> {
        DVector::from_iterator(
            v.len(),
            v.iter().zip(&bounds).map(|(&vi, b)| {
                let d = vi - mu;
                match b {
                    Bound::Free => d,
                    Bound::Lower => d.max(0.0),
                    Bound::Upper => d.min(0.0),
                }
            }),
        )
    };

    let d0 = clamp(0.0);
    if !sum_active || d0.sum() <= 0.0 {
        return Ok(d0);
    }
    // Σ d(μ) changes slope only where v_i − μ crosses 0 on a bounded
    // coordinate.
    let mut breaks: Vec<f64> = v
        .iter()
        .zip(&bounds)
        .filter(|&(&vi, b)| *b != Bound::Free && vi > 0.0)
        .map(|(&vi, _)| vi)
        .collect();
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite update"));
    let mut lo = 0.0;
    let mut s_lo = d0.sum();
    for &bp in breaks.iter().chain(std::iter::once(&f64::INFINITY)) {
        let hi = if bp.is_finite() { bp } else { lo + s_lo.max(1.0) * 2.0 + 1.0 };
        let s_hi = clamp(hi).sum();
        if s_hi <= 0.0 {
            // Linear on [lo, hi].
            let mu = if s_lo == s_hi { hi } else { lo + s_lo * (hi - lo) / (s_lo - s_hi) };
            return Ok(clamp(mu));
        }
        lo = hi;
        s_lo = s_hi;
    }
    unreachable!("the final segment always terminates")
}

/// Exact Euclidean projection onto `Π`.
pub fn clip_to_pi(wbar: &DVector<f64>) -> DVector<f64> {
    let y = wbar.map(|x| x.max(0.0));
    if y.sum() <= 1.0 {
        return y;
    }
    // Project onto the probability simplex {x ≥ 0, Σx = 1}.
    let mut u: Vec<f64> = wbar.iter().copied().collect();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite weights"));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        css += uk;
        let t = (css - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    wbar.map(|x| (x - theta).max(0.0))
}

/// `ŵ̄ ∈ Π` with `ŵ_N = 1 − Σ ŵ̄_i` derived on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightEstimate {
    wbar: DVector<f64>,
}

impl WeightEstimate {
    pub fn new(wbar: DVector<f64>) -> Result<Self> {
        let violation = pi_violation(&wbar);
        if violation > PI_TOL {
            return Err(Error::StateOutsidePi { violation });
        }
        Ok(Self { wbar })
    }

    pub fn from_weights(w: &WeightVector) -> Result<Self> {
        let n = w.len();
        if n < 2 {
            return Err(Error::DegeneratePolytope { corners: n });
        }
        Self::new(w.as_vector().rows(0, n - 1).into_owned())
    }

    pub fn wbar(&self) -> &DVector<f64> {
        &self.wbar
    }

    pub fn w_n(&self) -> f64 {
        1.0 - self.wbar.sum()
    }

    /// Full `ŵ ∈ R^N`.
    pub fn full(&self) -> DVector<f64> {
        let k = self.wbar.len();
        let mut w = DVector::zeros(k + 1);
        w.rows_mut(0, k).copy_from(&self.wbar);
        w[k] = self.w_n();
        w
    }
}

/// `w̄ ← clip_Π(w̄ + dt·v)`.
pub fn step_weights(we: &WeightEstimate, v_proj: &DVector<f64>, dt: f64) -> WeightEstimate {
    let next = we.wbar() + v_proj * dt;
    let wbar = if pi_violation(&next) > 0.0 { clip_to_pi(&next) } else { next };
    WeightEstimate { wbar }
}

/// `Θ̂ = Σ ŵ_i Θ_i`.
pub fn blended_theta(cs: &CornerSet, we: &WeightEstimate) -> SystemMatrices {
    cs.combine(we.full().as_slice())
}

/// Windowed regressor Gram matrix extremes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PEReport {
    pub t0: f64,
    pub window: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

/// Trapezoid-rule `∫_{t0}^{t0+T} ΦΦᵀ dτ` on a uniform grid starting at
/// `t_first` with spacing `dt`.
pub fn pe_window_gram(
    samples: &[DVector<f64>],
    t_first: f64,
    dt: f64,
    t0: f64,
    window: f64,
) -> Result<PEReport> {
    if samples.is_empty() || !(dt > 0.0) || !(window > 0.0) {
        return Err(Error::Range("empty series or non-positive step/window".into()));
    }
    // Off-grid window ends snap to the nearest sample.
    let i0 = ((t0 - t_first) / dt).round();
    let k = (window / dt).round();
    if i0 < 0.0 || k < 1.0 || (i0 + k) as usize >= samples.len() {
        return Err(Error::Range(format!(
            "window [{t0}, {}] exceeds series extent [{t_first}, {}]",
            t0 + window,
            t_first + dt * (samples.len() - 1) as f64
        )));
    }
    let (i0, k) = (i0 as usize, k as usize);
    let d = samples[0].len();
    let mut gram = DMatrix::zeros(d, d);
    for j in 0..=k {
        let p = &samples[i0 + j];
        let w = if j == 0 || j == k { 0.5 } else { 1.0 };
        gram.ger(w * dt, p, p, 1.0);
    }
    let (lo, hi) = linalg::sym_eig_range(&gram);
    Ok(PEReport {
        t0,
        window,
        alpha1: lo.max(0.0),
        alpha2: hi.max(lo.max(0.0)),
    })
}
