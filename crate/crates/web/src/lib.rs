//! Browser bindings: scenario presets, single runs, comparisons and refinement.
//!
//! Each export takes scenario TOML and returns a JSON document. The plain
//! `*_json` functions carry the logic so they can be tested natively.

use mmrac_core::linalg::to_rows;
use mmrac_core::matpoly::compute_gains;
use mmrac_core::scenario::{load_scenario_str, ScenarioFile, INPUT_MATRIX_SEGMENT, THREE_STATE_TWO_INPUT};
use mmrac_core::simulator::{compare, invariant_suite, run, ControllerMode, Metrics, Scenario, TimeSeries};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const PRESETS: [(&str, &str); 2] = [
    ("three_state_two_input", THREE_STATE_TWO_INPUT),
    ("input_matrix_segment", INPUT_MATRIX_SEGMENT),
];

#[derive(Debug, Serialize)]
pub struct MetricsView {
    pub final_err_norm: f64,
    pub final_theta_err_fro: f64,
    pub slope_log10_err_per_s: f64,
    pub peak_control_norm: f64,
    pub pe_alpha1_min: f64,
}

impl From<&Metrics> for MetricsView {
    fn from(m: &Metrics) -> Self {
        Self {
            final_err_norm: m.final_err_norm,
            final_theta_err_fro: m.final_theta_err,
            slope_log10_err_per_s: m.slope,
            peak_control_norm: m.peak_control_norm,
            pe_alpha1_min: m.pe_alpha1,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct InvariantView {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Decimated trajectories plus run metrics.
#[derive(Debug, Serialize)]
pub struct RunView {
    pub mode: &'static str,
    pub t: Vec<f64>,
    pub err_norm: Vec<f64>,
    pub theta_err: Vec<f64>,
    /// One series per corner weight.
    pub what: Vec<Vec<f64>>,
    pub metrics: MetricsView,
    pub invariants: Vec<InvariantView>,
}

impl RunView {
    fn new(sc: &Scenario, ts: &TimeSeries, metrics: &Metrics, max_points: usize) -> Self {
        let idx = decimate(ts.len(), max_points);
        let pick = |v: &[f64]| idx.iter().map(|&k| v[k]).collect::<Vec<_>>();
        Self {
            mode: sc.mode.as_str(),
            t: pick(&ts.t),
            err_norm: pick(&ts.err_norm),
            theta_err: pick(&ts.theta_err),
            what: (0..sc.corners.len())
                .map(|i| idx.iter().map(|&k| ts.what[k][i]).collect())
                .collect(),
            metrics: metrics.into(),
            invariants: invariant_suite(sc, ts)
                .into_iter()
                .map(|c| InvariantView {
                    name: c.name,
                    value: c.value,
                    threshold: c.threshold,
                    passed: c.passed,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ComparisonView {
    pub mmrac: RunView,
    pub single_model: RunView,
    pub slope_ratio: f64,
    pub identical_initial_gains: bool,
}

#[derive(Debug, Serialize)]
pub struct RefinedCornerView {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub witness: Vec<f64>,
    pub k: Vec<Vec<f64>>,
    pub l: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct RefinementView {
    pub raw_corners: usize,
    pub corners: Vec<RefinedCornerView>,
}

/// Sample indices keeping at most about `max_points` points, always including the last.
pub fn decimate(len: usize, max_points: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    let stride = len.div_ceil(max_points.max(2)).max(1);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

fn load(text: &str, mode: Option<&str>, t_end: Option<f64>) -> Result<Scenario, String> {
    let mut sc = load_scenario_str(text).map_err(|e| e.to_string())?;
    if let Some(mode) = mode {
        sc.mode = mode.parse::<ControllerMode>().map_err(|e| e.to_string())?;
    }
    if let Some(t_end) = t_end {
        sc.t_end = t_end;
    }
    sc.validate().map_err(|e| e.to_string())?;
    Ok(sc)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn preset_text(name: &str) -> Result<&'static str, String> {
    PRESETS
        .iter()
        .find(|p| p.0 == name)
        .map(|p| p.1)
        .ok_or_else(|| format!("unknown preset `{name}`"))
}

/// Simulate in `mode` (the scenario's own mode when empty) up to `t_end` (scenario value when not positive).
pub fn simulate_json(scenario: &str, mode: &str, t_end: f64, max_points: usize) -> Result<String, String> {
    let sc = load(scenario, (!mode.is_empty()).then_some(mode), (t_end > 0.0).then_some(t_end))?;
    let (ts, metrics) = run(&sc).map_err(|e| e.to_string())?;
    to_json(&RunView::new(&sc, &ts, &metrics, max_points))
}

/// Blended adaptation against the single-model baseline on the same scenario.
pub fn compare_json(scenario: &str, t_end: f64, max_points: usize) -> Result<String, String> {
    let t_end = (t_end > 0.0).then_some(t_end);
    let a = load(scenario, Some("mmrac"), t_end)?;
    let b = load(scenario, Some("single_model"), t_end)?;
    let (report, ts_a, ts_b) = compare(&a, &b).map_err(|e| e.to_string())?;
    to_json(&ComparisonView {
        mmrac: RunView::new(&a, &ts_a, &report.first, max_points),
        single_model: RunView::new(&b, &ts_b, &report.second, max_points),
        slope_ratio: report.slope_ratio,
        identical_initial_gains: report.identical_initial_gains,
    })
}

/// Refined corners with their witnesses and matching gains.
pub fn refine_json(scenario: &str) -> Result<String, String> {
    let run = || -> mmrac_core::Result<RefinementView> {
        let file = ScenarioFile::parse(scenario)?;
        let target = file.target()?;
        let tol = file.tolerances();
        let raw = file.raw_corners()?.len();
        let refinement = file.refinement()?;
        let corners = refinement
            .corners
            .corners()
            .iter()
            .zip(&refinement.witnesses)
            .map(|(c, w)| {
                let g = compute_gains(c, &target, tol.matching)?;
                Ok(RefinedCornerView {
                    a: to_rows(c.a()),
                    b: to_rows(c.b()),
                    witness: w.as_slice().to_vec(),
                    k: to_rows(&g.k),
                    l: to_rows(&g.l),
                })
            })
            .collect::<mmrac_core::Result<Vec<_>>>()?;
        Ok(RefinementView { raw_corners: raw, corners })
    };
    to_json(&run().map_err(|e| e.to_string())?)
}

#[wasm_bindgen]
pub fn preset(name: &str) -> Result<String, JsError> {
    preset_text(name).map(str::to_owned).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(scenario: &str, mode: &str, t_end: f64, max_points: usize) -> Result<String, JsError> {
    simulate_json(scenario, mode, t_end, max_points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = compareModes)]
pub fn compare_modes(scenario: &str, t_end: f64, max_points: usize) -> Result<String, JsError> {
    compare_json(scenario, t_end, max_points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn refine(scenario: &str) -> Result<String, JsError> {
    refine_json(scenario).map_err(|e| JsError::new(&e))
}
