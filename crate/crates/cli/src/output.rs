//! Serialized run artifacts: `series.csv`, `summary.json` and SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mmrac_core::simulator::{InvariantCheck, Metrics, Scenario, TimeSeries};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const SERIES_FILE: &str = "series.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn series_columns(n: usize, m: usize, big_n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x_p{i}")));
    cols.extend((1..=n).map(|i| format!("x_r{i}")));
    cols.extend((1..=m).map(|i| format!("u{i}")));
    cols.extend((1..=big_n).map(|i| format!("what{i}")));
    for c in ["err_norm", "theta_err_fro", "sigma_min_bhat", "V_e", "V_1"] {
        cols.push(c.into());
    }
    cols
}

pub fn write_series(path: &Path, sc: &Scenario, ts: &TimeSeries) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(series_columns(sc.corners.n(), sc.corners.m(), sc.corners.len()))?;
    let mut row = Vec::new();
    for k in 0..ts.len() {
        row.clear();
        row.push(fmt_f64(ts.t[k]));
        for v in [&ts.x_p[k], &ts.x_r[k], &ts.u[k], &ts.what[k]] {
            row.extend(v.iter().map(|&x| fmt_f64(x)));
        }
        for x in [ts.err_norm[k], ts.theta_err[k], ts.sigma_min[k], ts.v_e[k], ts.v_1[k]] {
            row.push(fmt_f64(x));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

pub fn scenario_hash(canonical: &str) -> String {
    format!("{:x}", Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Serialize)]
pub struct MetricsRecord {
    pub final_err_norm: f64,
    pub final_theta_err_fro: f64,
    pub slope_log10_err_per_s: f64,
    pub slope_window: [f64; 2],
    pub peak_control_norm: f64,
    pub pe_alpha1_min: f64,
}

impl From<&Metrics> for MetricsRecord {
    fn from(m: &Metrics) -> Self {
        Self {
            final_err_norm: m.final_err_norm,
            final_theta_err_fro: m.final_theta_err,
            slope_log10_err_per_s: m.slope,
            slope_window: [m.slope_window.0, m.slope_window.1],
            peak_control_norm: m.peak_control_norm,
            pe_alpha1_min: m.pe_alpha1,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct InvariantRecord {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl From<&InvariantCheck> for InvariantRecord {
    fn from(c: &InvariantCheck) -> Self {
        Self {
            name: c.name.into(),
            value: c.value,
            threshold: c.threshold,
            passed: c.passed,
        }
    }
}

/// Contents of `summary.json`. Non-finite numbers serialize as `null`.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub scenario_sha256: String,
    pub mode: String,
    pub n: usize,
    pub m: usize,
    pub corners: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub dt: f64,
    pub t_end: f64,
    pub samples: usize,
    pub columns: Vec<String>,
    pub metrics: MetricsRecord,
    pub invariants: Vec<InvariantRecord>,
    pub all_invariants_passed: bool,
    pub wall_clock_s: f64,
}

impl RunSummary {
    pub fn new(
        sc: &Scenario,
        canonical: &str,
        ts: &TimeSeries,
        metrics: &Metrics,
        checks: &[InvariantCheck],
        wall_clock_s: f64,
    ) -> Self {
        let (n, m, big_n) = (sc.corners.n(), sc.corners.m(), sc.corners.len());
        Self {
            schema_version: SCHEMA_VERSION,
            scenario_sha256: scenario_hash(canonical),
            mode: sc.mode.as_str().into(),
            n,
            m,
            corners: big_n,
            lambda: sc.id_cfg.lambda(),
            alpha: sc.id_cfg.alpha(),
            dt: sc.dt,
            t_end: sc.t_end,
            samples: ts.len(),
            columns: series_columns(n, m, big_n),
            metrics: metrics.into(),
            invariants: checks.iter().map(Into::into).collect(),
            all_invariants_passed: checks.iter().all(|c| c.passed),
            wall_clock_s,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(path))
}

/// One named curve of a line chart.
pub struct Curve<'a> {
    pub label: String,
    pub y: Box<dyn Fn(usize) -> f64 + 'a>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Static SVG line chart of `curves` against `t`, at most ~1500 points per curve.
pub fn line_chart(title: &str, y_label: &str, t: &[f64], curves: &[Curve]) -> String {
    let (w, h) = (720.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let stride = (t.len() / 1500).max(1);
    let idx: Vec<usize> = (0..t.len()).step_by(stride).chain(t.len().checked_sub(1)).collect();

    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in curves {
        for &k in &idx {
            let y = (c.y)(k);
            if y.is_finite() {
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
        }
    }
    if !y_min.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    if y_max - y_min < 1e-12 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let (t0, t1) = (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(1.0));
    let t_span = if t1 > t0 { t1 - t0 } else { 1.0 };
    let sx = |x: f64| left + (x - t0) / t_span * pw;
    let sy = |y: f64| top + (y_max - y) / (y_max - y_min) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{title}</text>"#, left + pw / 2.0);
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xt, yt) = (t0 + f * t_span, y_min + f * (y_max - y_min));
        let (px, py) = (sx(xt), sy(yt));
        let _ = writeln!(s, r##"<line x1="{px:.1}" y1="{}" x2="{px:.1}" y2="{}" stroke="#ddd"/>"##, top, top + ph);
        let _ = writeln!(s, r##"<line x1="{left}" y1="{py:.1}" x2="{}" y2="{py:.1}" stroke="#ddd"/>"##, left + pw);
        let _ = writeln!(s, r#"<text x="{px:.1}" y="{}" text-anchor="middle">{}</text>"#, top + ph + 16.0, tick(xt));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, left - 6.0, py + 4.0, tick(yt));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">t [s]</text>"#, left + pw / 2.0, h - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{y_label}</text>"#,
        top + ph / 2.0
    );
    for (ci, c) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let mut points = String::new();
        for &k in &idx {
            let y = (c.y)(k);
            if y.is_finite() {
                let _ = write!(points, "{:.2},{:.2} ", sx(t[k]), sy(y));
            }
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            points.trim_end()
        );
        let ly = top + 14.0 + 18.0 * ci as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, c.label);
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// `err_norm.svg`, `weights.svg`, `theta_err.svg` in `dir`.
pub fn write_plots(dir: &Path, ts: &TimeSeries) -> CliResult<()> {
    let log = |v: &[f64], k: usize| v[k].max(1e-300).log10();
    let err = line_chart(
        "Tracking error",
        "log10 ||e||",
        &ts.t,
        &[Curve {
            label: "||e||".into(),
            y: Box::new(|k| log(&ts.err_norm, k)),
        }],
    );
    let theta = line_chart(
        "Model error",
        "log10 ||Theta_hat - Theta_p||_F",
        &ts.t,
        &[Curve {
            label: "||dTheta||_F".into(),
            y: Box::new(|k| log(&ts.theta_err, k)),
        }],
    );
    let big_n = ts.what.first().map_or(0, |w| w.len());
    let weights: Vec<Curve> = (0..big_n)
        .map(|i| Curve {
            label: format!("w{}", i + 1),
            y: Box::new(move |k| ts.what[k][i]),
        })
        .collect();
    let weights = line_chart("Blending weights", "w_hat", &ts.t, &weights);
    for (name, body) in [("err_norm.svg", err), ("theta_err.svg", theta), ("weights.svg", weights)] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(CliError::io(&path))?;
    }
    Ok(())
}
