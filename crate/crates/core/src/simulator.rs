//! Fixed-step closed-loop simulation.
//!
//! The integrated state is `[x_p; x_r; φ₁; φ₂; ŵ̄]`, extended with
//! `vec(K̂); vec(L̂)` for the single-model baseline. The identifier always
//! runs; in `single_model` and `identification_only` modes it is passive
//! and only the recorded weight estimates differ.

use nalgebra::{DMatrix, DVector};

use crate::controller::{
    baseline_mrac_update, feedback, normal_equation_pinv, solve_lyapunov, GainSchedule,
    LyapunovCertificate, ReferenceInputSpec,
};
use crate::error::{Error, Result};
use crate::identifier::{
    clip_to_pi, normalization, pe_window_gram, pi_violation, project_update, raw_update,
    step_weights, IdentifierConfig, WeightEstimate, ACTIVE_TOL,
};
use crate::matpoly::{
    relative_interior_margin, CornerSet, MatchingTarget, SystemMatrices, Tolerances, WeightVector,
};

/// Log-regression floor on `‖e‖`.
pub const FLOOR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControllerMode {
    Mmrac,
    SingleModel,
    IdentificationOnly,
}

impl ControllerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerMode::Mmrac => "mmrac",
            ControllerMode::SingleModel => "single_model",
            ControllerMode::IdentificationOnly => "identification_only",
        }
    }
}

impl std::str::FromStr for ControllerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmrac" => Ok(Self::Mmrac),
            "single_model" => Ok(Self::SingleModel),
            "identification_only" => Ok(Self::IdentificationOnly),
            other => Err(Error::InvalidConfig(format!(
                "unknown controller mode `{other}` (expected mmrac, single_model or identification_only)"
            ))),
        }
    }
}

/// Input matrix standing in for the unknown `B_p` in the baseline gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineDirection {
    /// `B_r`.
    Reference,
    /// The blended `B̂` at the initial weights.
    Nominal,
}

/// Adaptation settings of the single-model baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineGains {
    pub gamma_k: f64,
    pub gamma_l: f64,
    pub direction: BaselineDirection,
}

impl Default for BaselineGains {
    fn default() -> Self {
        Self {
            gamma_k: 2.0,
            gamma_l: 2.0,
            direction: BaselineDirection::Nominal,
        }
    }
}

/// Complete, validated simulation specification.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Ground truth; used only by the simulated plant and diagnostics.
    pub plant: SystemMatrices,
    pub target: MatchingTarget,
    pub corners: CornerSet,
    pub id_cfg: IdentifierConfig,
    pub mode: ControllerMode,
    /// Reference `r(t)`, or the plant input itself in identification-only mode.
    pub input: ReferenceInputSpec,
    pub x_p0: DVector<f64>,
    pub x_r0: DVector<f64>,
    pub w0: WeightVector,
    /// Sampling step of the recorded series.
    pub dt: f64,
    /// Minimum RK4 steps per sample.
    pub substeps: usize,
    /// Upper bound on `h·‖Γ‖·‖E‖_F²` for the RK4 step `h`; more substeps
    /// are taken when the weight dynamics get stiff.
    pub stiffness_limit: f64,
    pub t_end: f64,
    pub seed: u64,
    pub lyapunov_q: DMatrix<f64>,
    pub baseline: BaselineGains,
    pub regression_window: (f64, f64),
    pub pe_window: f64,
    pub tolerances: Tolerances,
    /// Externally reported `(mmrac, single_model)` slopes, echoed in comparisons.
    pub expected_slopes: Option<[f64; 2]>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let (n, m, big_n) = (self.corners.n(), self.corners.m(), self.corners.len());
        if self.plant.n() != n || self.plant.m() != m {
            return Err(Error::Dimension("plant and corner dimensions differ".into()));
        }
        if self.target.n() != n || self.target.m() != m {
            return Err(Error::Dimension("reference model and corner dimensions differ".into()));
        }
        if self.id_cfg.gamma().nrows() != big_n - 1 {
            return Err(Error::Dimension(format!(
                "Gamma must be {0}x{0} for {big_n} corners",
                big_n - 1
            )));
        }
        if self.input.dim() != m {
            return Err(Error::Dimension(format!(
                "input has {} channels, plant has {m} inputs",
                self.input.dim()
            )));
        }
        if self.x_p0.len() != n || self.x_r0.len() != n {
            return Err(Error::Dimension("initial states must have length n".into()));
        }
        if self.w0.len() != big_n {
            return Err(Error::Dimension(format!(
                "w0 has {} entries for {big_n} corners",
                self.w0.len()
            )));
        }
        if self.lyapunov_q.shape() != (n, n) {
            return Err(Error::Dimension("Lyapunov Q must be n x n".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_end >= self.dt) {
            return Err(Error::InvalidConfig("need dt > 0 and t_end >= dt".into()));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidConfig("substeps must be >= 1".into()));
        }
        if !(self.stiffness_limit > 0.0) {
            return Err(Error::InvalidConfig("stiffness_limit must be > 0".into()));
        }
        if !(self.pe_window > 0.0) {
            return Err(Error::InvalidConfig("pe_window must be > 0".into()));
        }
        let (a, b) = self.regression_window;
        if !(b > a) {
            return Err(Error::InvalidConfig("regression window must have t_end > t_start".into()));
        }
        Ok(())
    }

    /// Number of recorded samples, `floor(T_end/dt) + 1`.
    pub fn sample_count(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize + 1
    }
}

/// Recorded trajectories on the uniform grid `t_k = k·dt`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub dt: f64,
    pub t: Vec<f64>,
    pub x_p: Vec<DVector<f64>>,
    pub x_r: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub what: Vec<DVector<f64>>,
    pub err_norm: Vec<f64>,
    pub theta_err: Vec<f64>,
    pub sigma_min: Vec<f64>,
    pub v_e: Vec<f64>,
    pub v_1: Vec<f64>,
    /// Regressor `Φ = [φ₁; φ₂]`.
    pub phi: Vec<DVector<f64>>,
    /// `‖z − Θ_p Φ‖`.
    pub ez_norm: Vec<f64>,
    pub khat_norm: Vec<f64>,
    pub lhat_norm: Vec<f64>,
    /// `‖B̂†B̂ − I‖_F`.
    pub pinv_residual: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub final_err_norm: f64,
    pub final_theta_err: f64,
    /// `log10 ‖e‖` regression slope in decades per second (`NaN` when the
    /// window holds too few samples).
    pub slope: f64,
    pub slope_window: (f64, f64),
    pub peak_control_norm: f64,
    /// Smallest windowed regressor Gram eigenvalue over the run.
    pub pe_alpha1: f64,
}

/// Classical fourth-order Runge-Kutta step.
pub fn rk4_step<F>(mut f: F, y: &DVector<f64>, t: f64, h: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &(y + &k1 * (0.5 * h)))?;
    let k3 = f(t + 0.5 * h, &(y + &k2 * (0.5 * h)))?;
    let k4 = f(t + h, &(y + &k3 * h))?;
    let next = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalDivergence { t: t + h });
    }
    Ok(next)
}

/// Signals recorded at one sample.
struct Record {
    u: DVector<f64>,
    what: DVector<f64>,
    phi: DVector<f64>,
    sigma_min: f64,
    khat: DMatrix<f64>,
    lhat: DMatrix<f64>,
    pinv_residual: f64,
}

/// Upper bound on substeps per sample.
pub const MAX_SUBSTEPS: usize = 10_000;

/// Blended gains, `B̂†` and its smallest singular value at one weight vector.
struct Blended {
    khat: DMatrix<f64>,
    lhat: DMatrix<f64>,
    pinv: DMatrix<f64>,
    sigma_min: f64,
}

/// Precomputed, per-run model data.
struct Model<'a> {
    sc: &'a Scenario,
    n: usize,
    m: usize,
    big_n: usize,
    /// Corners stacked vertically: row block `i` is `Θ_i`.
    theta_stack: DMatrix<f64>,
    /// Row block `j` is `Θ_N − Θ_j`, so that `E = reshape(D Φ) / m_s²`.
    diff_stack: DMatrix<f64>,
    /// Columns are `vec(B_i)`, `vec(B_i K_i)`, `vec(B_i L_i)`.
    b_cols: DMatrix<f64>,
    bk_cols: DMatrix<f64>,
    bl_cols: DMatrix<f64>,
    theta_p: DMatrix<f64>,
    lyap: LyapunovCertificate,
    gamma_norm: f64,
    /// Input matrix used by the baseline gradient.
    b_adapt: DMatrix<f64>,
}

impl<'a> Model<'a> {
    fn new(sc: &'a Scenario) -> Result<Self> {
        let (n, m, big_n) = (sc.corners.n(), sc.corners.m(), sc.corners.len());
        let gs = GainSchedule::new(&sc.corners, &sc.target, sc.tolerances.matching)?;
        let mut theta_stack = DMatrix::zeros(big_n * n, n + m);
        let mut b_cols = DMatrix::zeros(n * m, big_n);
        let mut bk_cols = DMatrix::zeros(n * n, big_n);
        let mut bl_cols = DMatrix::zeros(n * m, big_n);
        for (i, (c, g)) in sc.corners.corners().iter().zip(gs.gains()).enumerate() {
            theta_stack.view_mut((i * n, 0), (n, n + m)).copy_from(&c.theta());
            b_cols.column_mut(i).copy_from_slice(c.b().as_slice());
            bk_cols.column_mut(i).copy_from_slice((c.b() * &g.k).as_slice());
            bl_cols.column_mut(i).copy_from_slice((c.b() * &g.l).as_slice());
        }
        let last = sc.corners.get(big_n - 1).theta();
        let mut diff_stack = DMatrix::zeros((big_n - 1) * n, n + m);
        for j in 0..big_n - 1 {
            diff_stack
                .view_mut((j * n, 0), (n, n + m))
                .copy_from(&(&last - sc.corners.get(j).theta()));
        }
        let lyap = solve_lyapunov(sc.target.a_r(), &sc.lyapunov_q)?;
        let b_adapt = match sc.baseline.direction {
            BaselineDirection::Reference => sc.target.b_r().clone(),
            BaselineDirection::Nominal => DMatrix::from_column_slice(n, m, (&b_cols * sc.w0.as_vector()).as_slice()),
        };
        Ok(Self {
            sc,
            n,
            m,
            big_n,
            theta_stack,
            diff_stack,
            b_cols,
            bk_cols,
            bl_cols,
            theta_p: sc.plant.theta(),
            lyap,
            gamma_norm: sc.id_cfg.gamma().norm(),
            b_adapt,
        })
    }

    fn state_len(&self) -> usize {
        let base = 3 * self.n + self.m + self.big_n - 1;
        match self.sc.mode {
            ControllerMode::SingleModel => base + self.m * self.n + self.m * self.m,
            _ => base,
        }
    }

    fn full_weights(&self, wbar: &DVector<f64>) -> DVector<f64> {
        let k = self.big_n - 1;
        let mut w = DVector::zeros(self.big_n);
        w.rows_mut(0, k).copy_from(wbar);
        w[k] = 1.0 - wbar.sum();
        w
    }

    fn bhat(&self, w: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.m, (&self.b_cols * w).as_slice())
    }

    fn blended(&self, w: &DVector<f64>) -> Result<Blended> {
        let (n, m) = (self.n, self.m);
        let (pinv, sigma_min) = normal_equation_pinv(&self.bhat(w), self.sc.tolerances.rank)?;
        let sum_bk = DMatrix::from_column_slice(n, n, (&self.bk_cols * w).as_slice());
        let sum_bl = DMatrix::from_column_slice(n, m, (&self.bl_cols * w).as_slice());
        Ok(Blended {
            khat: &pinv * sum_bk,
            lhat: &pinv * sum_bl,
            pinv,
            sigma_min,
        })
    }

    /// `u = B̂†(Σ ŵ_i B_i K_i x_p + Σ ŵ_i B_i L_i r)` without forming the gains.
    fn mmrac_input(&self, w: &DVector<f64>, x_p: &DVector<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
        let (n, m) = (self.n, self.m);
        let bhat = self.bhat(w);
        let chol = bhat
            .tr_mul(&bhat)
            .cholesky()
            .ok_or(Error::RankCollapse { sigma_min: 0.0 })?;
        let sum_bk = DMatrix::from_column_slice(n, n, (&self.bk_cols * w).as_slice());
        let sum_bl = DMatrix::from_column_slice(n, m, (&self.bl_cols * w).as_slice());
        let q = sum_bk * x_p + sum_bl * r;
        Ok(chol.solve(&bhat.tr_mul(&q)))
    }

    fn initial_state(&self) -> Result<DVector<f64>> {
        let (n, m, k) = (self.n, self.m, self.big_n - 1);
        let mut y = DVector::zeros(self.state_len());
        y.rows_mut(0, n).copy_from(&self.sc.x_p0);
        y.rows_mut(n, n).copy_from(&self.sc.x_r0);
        let wbar0 = WeightEstimate::from_weights(&self.sc.w0)?;
        y.rows_mut(3 * n + m, k).copy_from(wbar0.wbar());
        if self.sc.mode == ControllerMode::SingleModel {
            let Blended { khat, lhat, .. } = self.blended(self.sc.w0.as_vector())?;
            let off = 3 * n + m + k;
            y.rows_mut(off, m * n).copy_from_slice(khat.as_slice());
            y.rows_mut(off + m * n, m * m).copy_from_slice(lhat.as_slice());
        }
        Ok(y)
    }

    fn stage_weights(&self, y: &DVector<f64>) -> DVector<f64> {
        let (n, m, k) = (self.n, self.m, self.big_n - 1);
        clip_to_pi(&y.rows(3 * n + m, k).into_owned())
    }

    /// Gains stored in the state (single-model mode).
    fn state_gains(&self, y: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let (n, m, k) = (self.n, self.m, self.big_n - 1);
        let off = 3 * n + m + k;
        (
            DMatrix::from_column_slice(m, n, y.rows(off, m * n).as_slice()),
            DMatrix::from_column_slice(m, m, y.rows(off + m * n, m * m).as_slice()),
        )
    }

    fn control(&self, t: f64, y: &DVector<f64>, w: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.n;
        let x_p = y.rows(0, n).into_owned();
        let r = self.sc.input.eval(t);
        let u = match self.sc.mode {
            ControllerMode::Mmrac => self.mmrac_input(w, &x_p, &r)?,
            ControllerMode::SingleModel => {
                let (kb, lb) = self.state_gains(y);
                feedback(&kb, &lb, &x_p, &r)
            }
            ControllerMode::IdentificationOnly => r.clone(),
        };
        Ok((u, r))
    }

    /// State derivative and `‖E‖_F²` at `(t, y)`.
    fn deriv(&self, t: f64, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let (n, m, k) = (self.n, self.m, self.big_n - 1);
        let sc = self.sc;
        let lambda = sc.id_cfg.lambda();
        let x_p = y.rows(0, n);
        let x_r = y.rows(n, n);
        let phi = y.rows(2 * n, n + m).into_owned();
        let phi1 = phi.rows(0, n);
        let phi2 = phi.rows(n, m);
        let wbar = self.stage_weights(y);
        let w = self.full_weights(&wbar);
        let (u, r) = self.control(t, y, &w)?;

        let z = x_p - phi1 * lambda;
        let ms2 = normalization(&phi, sc.id_cfg.alpha());
        let e_mat = DMatrix::from_column_slice(n, k, (&self.diff_stack * &phi).as_slice()) / ms2;
        let eps_n = (&z - self.theta_stack.view(((self.big_n - 1) * n, 0), (n, n + m)) * &phi) / ms2;
        let v = raw_update(&e_mat, &eps_n, &wbar, sc.id_cfg.gamma());
        let dw = project_update(&wbar, &v, ACTIVE_TOL)?;

        let mut d = DVector::zeros(y.len());
        d.rows_mut(0, n).copy_from(&(sc.plant.a() * x_p + sc.plant.b() * &u));
        d.rows_mut(n, n).copy_from(&(sc.target.a_r() * x_r + sc.target.b_r() * &r));
        d.rows_mut(2 * n, n).copy_from(&z);
        d.rows_mut(3 * n, m).copy_from(&(&u - phi2 * lambda));
        d.rows_mut(3 * n + m, k).copy_from(&dw);
        if sc.mode == ControllerMode::SingleModel {
            let e = x_p - x_r;
            let (dk, dl) = baseline_mrac_update(
                &e,
                &x_p.into_owned(),
                &r,
                &self.lyap.p,
                &self.b_adapt,
                sc.baseline.gamma_k,
                sc.baseline.gamma_l,
            );
            let off = 3 * n + m + k;
            d.rows_mut(off, m * n).copy_from_slice(dk.as_slice());
            d.rows_mut(off + m * n, m * m).copy_from_slice(dl.as_slice());
        }
        Ok((d, e_mat.norm_squared()))
    }

    fn record(&self, t: f64, y: &DVector<f64>) -> Result<Record> {
        let (n, m) = (self.n, self.m);
        let w = self.full_weights(&self.stage_weights(y));
        let (u, _) = self.control(t, y, &w)?;
        let Blended { khat, lhat, pinv, sigma_min } = self.blended(&w)?;
        let (khat, lhat) = match self.sc.mode {
            ControllerMode::SingleModel => self.state_gains(y),
            _ => (khat, lhat),
        };
        let pinv_residual = (&pinv * self.bhat(&w) - DMatrix::identity(m, m)).norm();
        Ok(Record {
            u,
            what: w,
            phi: y.rows(2 * n, n + m).into_owned(),
            sigma_min,
            khat,
            lhat,
            pinv_residual,
        })
    }
}

/// Integrate the closed loop and collect the series and metrics.
pub fn run(sc: &Scenario) -> Result<(TimeSeries, Metrics)> {
    sc.validate()?;
    let model = Model::new(sc)?;
    let (n, m, k) = (model.n, model.m, model.big_n - 1);
    let lambda = sc.id_cfg.lambda();
    let gamma_inv = sc
        .id_cfg
        .gamma()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("Gamma is singular".into()))?;
    // Fixed comparison point for V₁; NaN when the plant is outside the hull.
    let wstar_bar = relative_interior_margin(&sc.plant, &sc.corners)
        .ok()
        .map(|r| r.weights.rows(0, k).into_owned());

    let samples = sc.sample_count();
    let mut ts = TimeSeries {
        dt: sc.dt,
        ..Default::default()
    };
    let mut y = model.initial_state()?;

    for step in 0..samples {
        let t = step as f64 * sc.dt;
        let ev = model.record(t, &y)?;
        let x_p = y.rows(0, n).into_owned();
        let x_r = y.rows(n, n).into_owned();
        let e = &x_p - &x_r;
        let theta_hat = model_theta(&model, &ev.what);
        let ez = &x_p - ev.phi.rows(0, n) * lambda - &model.theta_p * &ev.phi;
        let v1 = match &wstar_bar {
            Some(ws) => {
                let wt = ev.what.rows(0, k) - ws;
                0.5 * wt.dot(&(&gamma_inv * &wt)) + ez.norm_squared() / (2.0 * lambda)
            }
            None => f64::NAN,
        };
        ts.t.push(t);
        ts.err_norm.push(e.norm());
        ts.v_e.push(model.lyap.value(&e));
        ts.theta_err.push((theta_hat - &model.theta_p).norm());
        ts.sigma_min.push(ev.sigma_min);
        ts.v_1.push(v1);
        ts.ez_norm.push(ez.norm());
        ts.khat_norm.push(ev.khat.norm());
        ts.lhat_norm.push(ev.lhat.norm());
        ts.pinv_residual.push(ev.pinv_residual);
        ts.x_p.push(x_p);
        ts.x_r.push(x_r);
        ts.u.push(ev.u);
        ts.what.push(ev.what);
        ts.phi.push(ev.phi);

        if step + 1 == samples {
            break;
        }
        let (deriv, e_energy) = model.deriv(t, &y)?;
        let rho = model.gamma_norm * e_energy;
        let substeps = ((sc.dt * rho / sc.stiffness_limit).ceil() as usize).clamp(sc.substeps, MAX_SUBSTEPS);
        let h = sc.dt / substeps as f64;
        let mut deriv0 = Some(deriv);
        for sub in 0..substeps {
            let ts_sub = t + sub as f64 * h;
            let y_prev = y.clone();
            y = rk4_step(
                |tt, yy| match deriv0.take() {
                    Some(d) => Ok(d),
                    None => model.deriv(tt, yy).map(|d| d.0),
                },
                &y,
                ts_sub,
                h,
            )
            .map_err(|e| match e {
                Error::NumericalDivergence { .. } => Error::NumericalDivergence { t: ts_sub },
                other => other,
            })?;
            // Weight block: clip the RK4 increment back into Π.
            let wprev = WeightEstimate::new(clip_to_pi(&y_prev.rows(3 * n + m, k).into_owned()))?;
            let v_avg = (y.rows(3 * n + m, k) - y_prev.rows(3 * n + m, k)) / h;
            let wnext = step_weights(&wprev, &v_avg, h);
            y.rows_mut(3 * n + m, k).copy_from(wnext.wbar());
        }
    }

    let metrics = compute_metrics(sc, &ts)?;
    Ok((ts, metrics))
}

fn model_theta(model: &Model<'_>, w: &DVector<f64>) -> DMatrix<f64> {
    let (n, nm) = (model.n, model.n + model.m);
    let mut th = DMatrix::zeros(n, nm);
    for (i, wi) in w.iter().enumerate() {
        th += model.theta_stack.view((i * n, 0), (n, nm)) * *wi;
    }
    th
}

fn compute_metrics(sc: &Scenario, ts: &TimeSeries) -> Result<Metrics> {
    let last = ts.len() - 1;
    let t_last = ts.t[last];
    let window = (sc.regression_window.0.min(t_last), sc.regression_window.1.min(t_last));
    let slope = slope_regression(ts, window.0, window.1).unwrap_or(f64::NAN);
    let peak_control_norm = ts.u.iter().map(|u| u.norm()).fold(0.0, f64::max);

    let mut pe_alpha1 = f64::NAN;
    let mut t0 = 0.0;
    while t0 + sc.pe_window <= t_last + 1e-9 {
        if let Ok(r) = pe_window_gram(&ts.phi, 0.0, ts.dt, t0, sc.pe_window) {
            pe_alpha1 = if pe_alpha1.is_nan() { r.alpha1 } else { pe_alpha1.min(r.alpha1) };
        }
        t0 += sc.pe_window;
    }
    Ok(Metrics {
        final_err_norm: ts.err_norm[last],
        final_theta_err: ts.theta_err[last],
        slope,
        slope_window: window,
        peak_control_norm,
        pe_alpha1,
    })
}

/// Least-squares slope of `log10 ‖e(t)‖` on `[t_start, t_end]`.
pub fn slope_regression(series: &TimeSeries, t_start: f64, t_end: f64) -> Result<f64> {
    log10_slope(&series.t, &series.err_norm, t_start, t_end)
}

pub fn log10_slope(t: &[f64], values: &[f64], t_start: f64, t_end: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(values)
        .filter(|&(&ti, &v)| ti >= t_start - 1e-12 && ti <= t_end + 1e-12 && v > FLOOR_EPS)
        .map(|(&ti, &v)| (ti, v.log10()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::WindowTooSmall { samples: pts.len() });
    }
    let nf = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub first: Metrics,
    pub second: Metrics,
    /// `first.slope / second.slope`.
    pub slope_ratio: f64,
    pub initial_khat: DMatrix<f64>,
    pub initial_lhat: DMatrix<f64>,
    pub identical_initial_gains: bool,
}

/// Name of the first field (other than the mode) in which two scenarios differ.
pub fn scenario_difference(a: &Scenario, b: &Scenario) -> Option<&'static str> {
    let checks: [(&str, bool); 19] = [
        ("plant", a.plant == b.plant),
        ("reference", a.target == b.target),
        ("corners", a.corners == b.corners),
        ("identifier", a.id_cfg == b.id_cfg),
        ("input", a.input == b.input),
        ("x_p0", a.x_p0 == b.x_p0),
        ("x_r0", a.x_r0 == b.x_r0),
        ("w0", a.w0 == b.w0),
        ("dt", a.dt == b.dt),
        ("substeps", a.substeps == b.substeps),
        ("stiffness_limit", a.stiffness_limit == b.stiffness_limit),
        ("t_end", a.t_end == b.t_end),
        ("seed", a.seed == b.seed),
        ("lyapunov_q", a.lyapunov_q == b.lyapunov_q),
        ("baseline", a.baseline == b.baseline),
        ("regression_window", a.regression_window == b.regression_window),
        ("pe_window", a.pe_window == b.pe_window),
        ("tolerances", a.tolerances == b.tolerances),
        ("expected_slopes", a.expected_slopes == b.expected_slopes),
    ];
    checks.iter().find(|c| !c.1).map(|c| c.0)
}

/// Run two scenarios that differ only in controller mode and compare them.
pub fn compare(first: &Scenario, second: &Scenario) -> Result<(ComparisonReport, TimeSeries, TimeSeries)> {
    if let Some(field) = scenario_difference(first, second) {
        return Err(Error::ScenarioMismatch { field: field.into() });
    }
    #[cfg(not(target_arch = "wasm32"))]
    let (ra, rb) = std::thread::scope(|s| {
        let ha = s.spawn(|| run(first));
        let hb = s.spawn(|| run(second));
        (ha.join().expect("simulation thread"), hb.join().expect("simulation thread"))
    });
    #[cfg(target_arch = "wasm32")]
    let (ra, rb) = (run(first), run(second));
    let (ts_a, ma) = ra?;
    let (ts_b, mb) = rb?;
    let gains = |sc: &Scenario| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let model = Model::new(sc)?;
        let Blended { khat: k, lhat: l, .. } = model.blended(sc.w0.as_vector())?;
        Ok((k, l))
    };
    let (ka, la) = gains(first)?;
    let (kb, lb) = gains(second)?;
    let report = ComparisonReport {
        slope_ratio: ma.slope / mb.slope,
        first: ma,
        second: mb,
        identical_initial_gains: ka == kb && la == lb,
        initial_khat: ka,
        initial_lhat: la,
    };
    Ok((report, ts_a, ts_b))
}

/// One named post-run check.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

fn check(name: &'static str, value: f64, threshold: f64) -> InvariantCheck {
    InvariantCheck {
        name,
        value,
        threshold,
        passed: value <= threshold,
    }
}

/// Evaluate the identifier and controller invariants over a stored run.
///
/// Checks: weights sum to one, `Π`-invariance, `V₁` non-increasing after
/// `5/λ`, `e_z` decays at rate `λ` (relative rate error from a log fit),
/// `B̂†` is a left inverse, and blended gains stay finite.
pub fn invariant_suite(sc: &Scenario, ts: &TimeSeries) -> Vec<InvariantCheck> {
    let lambda = sc.id_cfg.lambda();
    let k = sc.corners.len() - 1;

    let sum_drift = ts
        .what
        .iter()
        .map(|w| (w.sum() - 1.0).abs())
        .fold(0.0, f64::max);
    let pi_viol = ts
        .what
        .iter()
        .map(|w| pi_violation(&w.rows(0, k).into_owned()))
        .fold(0.0, f64::max);

    let t_settle = 5.0 / lambda;
    let v1_rise = ts
        .v_1
        .windows(2)
        .zip(&ts.t[1..])
        .filter(|(_, &t)| t > t_settle)
        .map(|(v, _)| v[1] - v[0])
        .fold(0.0, f64::max);
    let v1_rise = if ts.v_1.iter().any(|v| v.is_nan()) { f64::NAN } else { v1_rise };

    // e_z decay rate from a natural-log fit over the samples still well
    // above rounding level.
    let ez0 = ts.ez_norm.first().copied().unwrap_or(0.0);
    let rate_err = if ez0 > 0.0 {
        let pts: Vec<(f64, f64)> = ts
            .t
            .iter()
            .zip(&ts.ez_norm)
            .filter(|&(_, &v)| v > 1e-8 * ez0)
            .map(|(&t, &v)| (t, v))
            .collect();
        let times: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let vals: Vec<f64> = pts.iter().map(|p| p.1).collect();
        match log10_slope(&times, &vals, 0.0, f64::INFINITY) {
            Ok(s) => ((-s * std::f64::consts::LN_10) - lambda).abs() / lambda,
            Err(_) => f64::NAN,
        }
    } else {
        0.0
    };
    let envelope = ts
        .t
        .iter()
        .zip(&ts.ez_norm)
        .map(|(&t, &v)| v - ez0 * (-lambda * t).exp())
        .fold(0.0, f64::max);

    let pinv = ts.pinv_residual.iter().copied().fold(0.0, f64::max);
    let gains_bounded = ts
        .khat_norm
        .iter()
        .chain(&ts.lhat_norm)
        .all(|v| v.is_finite())
        && ts.sigma_min.iter().all(|&s| s > sc.tolerances.rank);

    vec![
        check("weights_sum_to_one", sum_drift, 1e-12),
        check("pi_invariance", pi_viol, 1e-9),
        check("v1_non_increasing", nan_fail(v1_rise), 1e-6),
        check("ez_decay_rate", nan_fail(rate_err), 1e-2),
        check("ez_envelope", envelope, 1e-8),
        check("pinv_left_inverse", pinv, 1e-8),
        check("gains_bounded", if gains_bounded { 0.0 } else { 1.0 }, 0.0),
    ]
}

fn nan_fail(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}
