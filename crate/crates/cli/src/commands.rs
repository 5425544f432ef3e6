use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mmrac_core::identifier::pe_window_gram;
use mmrac_core::linalg::to_rows;
use mmrac_core::matpoly::{compute_gains, SystemMatrices};
use mmrac_core::nalgebra::DVector;
use mmrac_core::scenario::{emit_scenario, load_scenario_str, MatrixPair, ScenarioFile};
use mmrac_core::simulator::{compare, invariant_suite, run, ControllerMode, Metrics, Scenario, TimeSeries};
use mmrac_core::Error;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{self, write_json, RunSummary, SCHEMA_VERSION, SERIES_FILE, SUMMARY_FILE};

/// Command-line replacements for scenario values.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub mode: Option<ControllerMode>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
}

impl Overrides {
    fn apply(&self, sc: &mut Scenario) {
        if let Some(mode) = self.mode {
            sc.mode = mode;
        }
        if let Some(dt) = self.dt {
            sc.dt = dt;
        }
        if let Some(t_end) = self.t_end {
            sc.t_end = t_end;
        }
    }

    /// `self` with every unset field taken from `base`.
    fn over(&self, base: &Overrides) -> Overrides {
        Overrides {
            mode: self.mode.or(base.mode),
            dt: self.dt.or(base.dt),
            t_end: self.t_end.or(base.t_end),
        }
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

pub fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let text = read_text(path)?;
    load_scenario_str(&text).map_err(|e| match e {
        Error::Parse(msg) => CliError::Core(Error::Parse(format!("{}: {msg}", path.display()))),
        other => other.into(),
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

/// Divergence reported with the last sample that was recorded cleanly.
fn run_error(e: Error, dt: f64) -> CliError {
    match e {
        Error::NumericalDivergence { t } => {
            let k = ((t / dt) - 1e-9).ceil() - 1.0;
            CliError::Diverged {
                t,
                last_good: k.max(0.0) * dt,
            }
        }
        other => other.into(),
    }
}

fn fmt_matrix(rows: &[Vec<f64>]) -> String {
    let inner: Vec<String> = rows
        .iter()
        .map(|r| format!("[{}]", r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", inner.join(", "))
}

fn fmt_vector(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "))
}

fn write_line(out: &mut dyn Write, line: std::fmt::Arguments) -> CliResult<()> {
    out.write_fmt(line)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(CliError::io("<stdout>"))
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        write_line($out, format_args!($($arg)*))
    };
}

/// One refined corner as reported by `refine`.
#[derive(Debug, Clone)]
pub struct RefinedCorner {
    pub corner: SystemMatrices,
    pub witness: Vec<f64>,
    pub k: Vec<Vec<f64>>,
    pub l: Vec<Vec<f64>>,
}

pub fn default_refined_path(scenario: &Path) -> PathBuf {
    let stem = scenario.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    scenario.with_file_name(format!("{stem}.refined.toml"))
}

/// Refine the scenario's corners against its reference model, print the
/// result and write a scenario file listing the refined corners explicitly.
pub fn cmd_refine(path: &Path, out_path: Option<&Path>, out: &mut dyn Write) -> CliResult<(PathBuf, Vec<RefinedCorner>)> {
    let text = read_text(path)?;
    let file = ScenarioFile::parse(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let raw = file.raw_corners()?;
    let target = file.target()?;
    let tol = file.tolerances();
    let refinement = file.refinement()?;

    say!(out, "raw corners: {}", raw.len())?;
    say!(out, "refined corners: {}", refinement.corners.len())?;
    let mut report = Vec::new();
    for (i, (c, w)) in refinement.corners.corners().iter().zip(&refinement.witnesses).enumerate() {
        let g = compute_gains(c, &target, tol.matching)?;
        let rc = RefinedCorner {
            corner: c.clone(),
            witness: w.as_slice().to_vec(),
            k: to_rows(&g.k),
            l: to_rows(&g.l),
        };
        say!(out, "corner {}", i + 1)?;
        say!(out, "  A = {}", fmt_matrix(&to_rows(c.a())))?;
        say!(out, "  B = {}", fmt_matrix(&to_rows(c.b())))?;
        say!(out, "  witness = {}", fmt_vector(&rc.witness))?;
        say!(out, "  K = {}", fmt_matrix(&rc.k))?;
        say!(out, "  L = {}", fmt_matrix(&rc.l))?;
        report.push(rc);
    }

    let big_n = refinement.corners.len();
    let mut refined = file.clone();
    refined.corners.models = refinement
        .corners
        .corners()
        .iter()
        .map(|c| MatrixPair {
            a: to_rows(c.a()),
            b: to_rows(c.b()),
        })
        .collect();
    refined.corners.bounds = None;
    refined.corners.cap = None;
    refined.corners.refine = false;
    if refined.controller.w0.as_ref().is_some_and(|w| w.len() != big_n) {
        refined.controller.w0 = None;
    }
    if let Some(rows) = refined.identifier.gamma_matrix.take() {
        let scalar = !rows.is_empty() && rows.iter().enumerate().all(|(i, r)| {
            r.iter().enumerate().all(|(j, &x)| if i == j { x == rows[0][0] } else { x == 0.0 })
        });
        if rows.len() == big_n - 1 {
            refined.identifier.gamma_matrix = Some(rows);
        } else if scalar {
            refined.identifier.gamma = Some(rows[0][0]);
        } else {
            return Err(CliError::Input(format!(
                "gamma_matrix is {0}x{0} but the refined set needs {1}x{1}; give a scalar gamma",
                rows.len(),
                big_n - 1
            )));
        }
    }
    let body = refined.to_toml()?;
    // The written file must load and describe exactly the refined set.
    let reloaded = ScenarioFile::parse(&body)?.to_scenario()?;
    debug_assert_eq!(reloaded.corners, refinement.corners);
    let dest = out_path.map(Path::to_path_buf).unwrap_or_else(|| default_refined_path(path));
    let header = format!(
        "# Corners refined from {} against the reference model.\n\n",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("scenario")
    );
    fs::write(&dest, header + &body).map_err(CliError::io(&dest))?;
    say!(out, "wrote {}", dest.display())?;
    Ok((dest, report))
}

fn write_run(dir: &Path, sc: &Scenario, ts: &TimeSeries, m: &Metrics, wall: f64, svg: bool) -> CliResult<RunSummary> {
    create_dir(dir)?;
    let canonical = emit_scenario(sc)?;
    let checks = invariant_suite(sc, ts);
    let summary = RunSummary::new(sc, &canonical, ts, m, &checks, wall);
    output::write_series(&dir.join(SERIES_FILE), sc, ts)?;
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    if svg {
        output::write_plots(dir, ts)?;
    }
    Ok(summary)
}

fn report_run(out: &mut dyn Write, s: &RunSummary) -> CliResult<()> {
    let m = &s.metrics;
    say!(out, "mode: {}", s.mode)?;
    say!(out, "samples: {}", s.samples)?;
    say!(out, "final ||e||: {:.6e}", m.final_err_norm)?;
    say!(out, "final ||Theta_hat - Theta_p||_F: {:.6e}", m.final_theta_err_fro)?;
    say!(
        out,
        "log10 ||e|| slope on [{}, {}] s: {:.6}",
        m.slope_window[0],
        m.slope_window[1],
        m.slope_log10_err_per_s
    )?;
    say!(out, "peak ||u||: {:.6e}", m.peak_control_norm)?;
    for c in &s.invariants {
        let flag = if c.passed { "ok  " } else { "FAIL" };
        say!(out, "  [{flag}] {} = {:.3e} (threshold {:.1e})", c.name, c.value, c.threshold)?;
    }
    Ok(())
}

/// Simulate one scenario and write `series.csv`, `summary.json` and
/// optional plots to `out_dir`.
pub fn cmd_simulate(
    path: &Path,
    out_dir: &Path,
    overrides: Overrides,
    svg: bool,
    out: &mut dyn Write,
) -> CliResult<RunSummary> {
    let mut sc = load_scenario(path)?;
    overrides.apply(&mut sc);
    sc.validate()?;
    let start = Instant::now();
    let (ts, m) = run(&sc).map_err(|e| run_error(e, sc.dt))?;
    let wall = start.elapsed().as_secs_f64();
    let summary = write_run(out_dir, &sc, &ts, &m, wall, svg)?;
    report_run(out, &summary)?;
    say!(out, "wrote {}", out_dir.display())?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct ExpectedSlopes {
    pub mmrac: f64,
    pub single_model: f64,
    pub ratio: f64,
}

#[derive(Debug, Serialize)]
pub struct ComparisonRecord {
    pub schema_version: u32,
    pub scenario_sha256: String,
    pub slope_window: [f64; 2],
    pub mmrac_slope: f64,
    pub single_model_slope: f64,
    /// `mmrac_slope / single_model_slope`.
    pub slope_ratio: f64,
    pub mmrac_final_err_norm: f64,
    pub single_model_final_err_norm: f64,
    pub expected_slopes: Option<ExpectedSlopes>,
    pub identical_initial_gains: bool,
    pub initial_khat: Vec<Vec<f64>>,
    pub initial_lhat: Vec<Vec<f64>>,
    pub wall_clock_s: f64,
}

/// Per-mode overrides for `compare`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompareOverrides {
    pub both: Overrides,
    pub mmrac: Overrides,
    pub single_model: Overrides,
}

/// Run the MMRAC and single-model controllers on one scenario and write
/// `mmrac/`, `single_model/` and `comparison.json` to `out_dir`.
pub fn cmd_compare(
    path: &Path,
    out_dir: &Path,
    overrides: CompareOverrides,
    svg: bool,
    out: &mut dyn Write,
) -> CliResult<ComparisonRecord> {
    let base = load_scenario(path)?;
    let build = |mode: ControllerMode, own: &Overrides| -> CliResult<Scenario> {
        let mut sc = base.clone();
        own.over(&overrides.both).apply(&mut sc);
        sc.mode = mode;
        sc.validate()?;
        Ok(sc)
    };
    let first = build(ControllerMode::Mmrac, &overrides.mmrac)?;
    let second = build(ControllerMode::SingleModel, &overrides.single_model)?;
    let start = Instant::now();
    let (report, ts_a, ts_b) = compare(&first, &second).map_err(|e| run_error(e, first.dt))?;
    let wall = start.elapsed().as_secs_f64();

    let sa = write_run(&out_dir.join("mmrac"), &first, &ts_a, &report.first, wall, svg)?;
    let sb = write_run(&out_dir.join("single_model"), &second, &ts_b, &report.second, wall, svg)?;
    let record = ComparisonRecord {
        schema_version: SCHEMA_VERSION,
        scenario_sha256: sa.scenario_sha256.clone(),
        slope_window: [report.first.slope_window.0, report.first.slope_window.1],
        mmrac_slope: report.first.slope,
        single_model_slope: report.second.slope,
        slope_ratio: report.slope_ratio,
        mmrac_final_err_norm: report.first.final_err_norm,
        single_model_final_err_norm: report.second.final_err_norm,
        expected_slopes: first.expected_slopes.map(|[a, b]| ExpectedSlopes {
            mmrac: a,
            single_model: b,
            ratio: a / b,
        }),
        identical_initial_gains: report.identical_initial_gains,
        initial_khat: to_rows(&report.initial_khat),
        initial_lhat: to_rows(&report.initial_lhat),
        wall_clock_s: wall,
    };
    create_dir(out_dir)?;
    write_json(&out_dir.join("comparison.json"), &record)?;

    report_run(out, &sa)?;
    report_run(out, &sb)?;
    say!(out, "slope ratio (mmrac / single_model): {:.4}", record.slope_ratio)?;
    if let Some(e) = &record.expected_slopes {
        say!(
            out,
            "reference slopes: mmrac {}, single_model {} (ratio {:.4})",
            e.mmrac,
            e.single_model,
            e.ratio
        )?;
    }
    say!(out, "wrote {}", out_dir.display())?;
    Ok(record)
}

/// Windowed excitation levels reconstructed from a series file.
#[derive(Debug, Clone)]
pub struct PeScan {
    pub lambda: f64,
    pub window: f64,
    /// `(t0, α₁, α₂)` per window.
    pub windows: Vec<(f64, f64, f64)>,
    pub min_alpha1: f64,
    pub min_at: f64,
}

fn column_block(headers: &csv::StringRecord, prefix: &str) -> Vec<usize> {
    let mut found: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(col, h)| {
            let rest = h.strip_prefix(prefix)?;
            rest.parse::<usize>().ok().map(|k| (k, col))
        })
        .collect();
    found.sort();
    found.into_iter().map(|(_, col)| col).collect()
}

fn sidecar_lambda(series: &Path) -> CliResult<f64> {
    let path = series.with_file_name(SUMMARY_FILE);
    let text = read_text(&path)?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    v.get("lambda")
        .and_then(|l| l.as_f64())
        .ok_or_else(|| CliError::Input(format!("{}: no numeric `lambda` field", path.display())))
}

/// Regressor `Φ = [φ₁; φ₂]` from sampled `x_p`, `u`, assuming both vary
/// linearly between samples (exact first-order-hold discretization of
/// `φ̇ = −λφ + v`, `φ(0) = 0`).
pub fn reconstruct_regressor(x_p: &[Vec<f64>], u: &[Vec<f64>], lambda: f64, dt: f64) -> Vec<DVector<f64>> {
    let a = (-lambda * dt).exp();
    let b1 = (lambda * dt - 1.0 + a) / (lambda * lambda * dt);
    let b0 = (1.0 - a) / lambda - b1;
    let signal = |k: usize| -> Vec<f64> { x_p[k].iter().chain(&u[k]).copied().collect() };
    let dim = x_p.first().map_or(0, |x| x.len()) + u.first().map_or(0, |v| v.len());
    let mut phi = DVector::zeros(dim);
    let mut out = Vec::with_capacity(x_p.len());
    out.push(phi.clone());
    for k in 1..x_p.len() {
        let (prev, next) = (signal(k - 1), signal(k));
        for i in 0..dim {
            phi[i] = a * phi[i] + b0 * prev[i] + b1 * next[i];
        }
        out.push(phi.clone());
    }
    out
}

/// Sliding-window excitation check on a `series.csv`.
pub fn cmd_pe_check(
    series: &Path,
    window: f64,
    stride: Option<f64>,
    lambda: Option<f64>,
    out: &mut dyn Write,
) -> CliResult<PeScan> {
    if !(window > 0.0) {
        return Err(CliError::Input("--window must be positive".into()));
    }
    let stride = stride.unwrap_or(window);
    if !(stride > 0.0) {
        return Err(CliError::Input("--stride must be positive".into()));
    }
    let lambda = match lambda {
        Some(l) => l,
        None => sidecar_lambda(series)?,
    };
    if !(lambda > 0.0) {
        return Err(CliError::Input(format!("lambda must be positive, got {lambda}")));
    }
    let mut rdr = csv::Reader::from_path(series)?;
    let headers = rdr.headers()?.clone();
    let t_col = headers
        .iter()
        .position(|h| h == "t")
        .ok_or_else(|| CliError::Input(format!("{}: missing column `t`", series.display())))?;
    let xp_cols = column_block(&headers, "x_p");
    let u_cols = column_block(&headers, "u");
    if xp_cols.is_empty() || u_cols.is_empty() {
        return Err(CliError::Input(format!(
            "{}: need x_p<i> and u<j> columns to rebuild the regressor",
            series.display()
        )));
    }
    let (mut t, mut x_p, mut u) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let row = t.len() + 2;
        let num = |col: usize| -> CliResult<f64> {
            rec[col]
                .trim()
                .parse::<f64>()
                .map_err(|e| CliError::Input(format!("row {row}: {e}")))
        };
        t.push(num(t_col)?);
        x_p.push(xp_cols.iter().map(|&c| num(c)).collect::<CliResult<Vec<_>>>()?);
        u.push(u_cols.iter().map(|&c| num(c)).collect::<CliResult<Vec<_>>>()?);
    }
    if t.len() < 2 {
        return Err(CliError::Input("series has fewer than two rows".into()));
    }
    let dt = t[1] - t[0];
    let uniform = t.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1.0));
    if !(dt > 0.0) || !uniform {
        return Err(CliError::Input("time column is not a uniform increasing grid".into()));
    }
    let phi = reconstruct_regressor(&x_p, &u, lambda, dt);
    let t_last = *t.last().expect("non-empty");
    let mut windows = Vec::new();
    let mut j = 0usize;
    loop {
        let t0 = t[0] + j as f64 * stride;
        if t0 + window > t_last + 1e-9 * dt {
            break;
        }
        let r = pe_window_gram(&phi, t[0], dt, t0, window)?;
        windows.push((t0, r.alpha1, r.alpha2));
        j += 1;
    }
    if windows.is_empty() {
        return Err(CliError::Input(format!(
            "series spans {} s, shorter than the window {window} s",
            t_last - t[0]
        )));
    }
    let (min_at, min_alpha1) = windows
        .iter()
        .map(|&(t0, a1, _)| (t0, a1))
        .fold((f64::NAN, f64::INFINITY), |acc, (t0, a1)| if a1 < acc.1 { (t0, a1) } else { acc });

    say!(out, "lambda = {lambda}, window = {window} s, stride = {stride} s")?;
    say!(out, "{:>12} {:>24} {:>24}", "t0", "alpha1", "alpha2")?;
    for &(t0, a1, a2) in &windows {
        say!(out, "{t0:>12.4} {a1:>24.16e} {a2:>24.16e}")?;
    }
    say!(out, "min alpha1 = {min_alpha1:.16e} (window starting at t = {min_at:.4})")?;
    Ok(PeScan {
        lambda,
        window,
        windows,
        min_alpha1,
        min_at,
    })
}
