//! Plain-text scenario files.
//!
//! A scenario is a TOML document with the sections `[plant]`, `[reference]`,
//! `[corners]`, `[identifier]`, `[controller]`, `[simulation]` and `[input]`.
//! Matrices are row-major nested arrays. Unknown keys are rejected.
//!
//! ```toml
//! [plant]
//! a = [[-1.0, 0.0], [0.0, -2.0]]
//! b = [[1.0], [1.0]]
//! ```

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::controller::{InputChannel, ReferenceInputSpec, SineTerm};
use crate::error::{Error, Result};
use crate::identifier::IdentifierConfig;
use crate::linalg::{from_rows, spectral_abscissa, to_rows};
use crate::matpoly::{
    enumerate_corner_set, refine_matching_polytope, CornerSet, EntryBounds, MatchingTarget, Refinement,
    SystemMatrices, Tolerances, WeightVector,
};
use crate::simulator::{BaselineDirection, BaselineGains, ControllerMode, Scenario};

/// Three-state, two-input plant with five corner models.
pub const THREE_STATE_TWO_INPUT: &str = include_str!("../../../scenarios/three_state_two_input.toml");
/// Two-state, single-input example whose input-matrix corners need refinement.
pub const INPUT_MATRIX_SEGMENT: &str = include_str!("../../../scenarios/input_matrix_segment.toml");

/// Default cap on enumerated corners.
pub const DEFAULT_CORNER_CAP: usize = 4096;

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixPair {
    pub a: Rows,
    pub b: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub a_min: Rows,
    pub a_max: Rows,
    pub b_min: Rows,
    pub b_max: Rows,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesSection {
    pub matching: f64,
    pub rank: f64,
    pub dedupe: f64,
    pub hurwitz: f64,
}

impl From<Tolerances> for TolerancesSection {
    fn from(t: Tolerances) -> Self {
        Self {
            matching: t.matching,
            rank: t.rank,
            dedupe: t.dedupe,
            hurwitz: t.hurwitz,
        }
    }
}

impl From<TolerancesSection> for Tolerances {
    fn from(t: TolerancesSection) -> Self {
        Self {
            matching: t.matching,
            rank: t.rank,
            dedupe: t.dedupe,
            hurwitz: t.hurwitz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornersSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<MatrixPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    /// Replace the corners by the vertices of the matching polytope on load.
    #[serde(default)]
    pub refine: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifierSection {
    pub lambda: f64,
    pub alpha: f64,
    /// Scalar `γ` for `Γ = γ I`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_matrix: Option<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov_q: Option<Rows>,
    #[serde(default = "default_baseline_gamma")]
    pub baseline_gamma_k: f64,
    #[serde(default = "default_baseline_gamma")]
    pub baseline_gamma_l: f64,
    #[serde(default = "default_baseline_direction")]
    pub baseline_direction: String,
}

fn default_baseline_gamma() -> f64 {
    2.0
}

fn default_baseline_direction() -> String {
    "nominal".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub dt: f64,
    pub t_end: f64,
    pub x_p0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_r0: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "default_stiffness_limit")]
    pub stiffness_limit: f64,
    #[serde(default = "default_regression_window")]
    pub regression_window: [f64; 2],
    #[serde(default = "default_pe_window")]
    pub pe_window: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_slopes: Option<[f64; 2]>,
}

fn default_substeps() -> usize {
    1
}

fn default_stiffness_limit() -> f64 {
    2.0
}

fn default_regression_window() -> [f64; 2] {
    [20.0, 200.0]
}

fn default_pe_window() -> f64 {
    2.0 * std::f64::consts::PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub channels: Vec<InputChannel>,
}

/// Parsed but unvalidated scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub plant: MatrixPair,
    pub reference: MatrixPair,
    pub corners: CornersSection,
    pub identifier: IdentifierSection,
    pub controller: ControllerSection,
    pub simulation: SimulationSection,
    pub input: InputSection,
}

/// Validation failure tied to a key of the document.
struct FieldError {
    section: &'static str,
    key: &'static str,
    err: Error,
}

trait At<T> {
    fn at(self, section: &'static str, key: &'static str) -> std::result::Result<T, FieldError>;
}

impl<T> At<T> for Result<T> {
    fn at(self, section: &'static str, key: &'static str) -> std::result::Result<T, FieldError> {
        self.map_err(|err| FieldError { section, key, err })
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line of `key` inside `[section]`, falling back to the section header.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header_line = None;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            current = trimmed.trim_matches(|c| c == '[' || c == ']').to_string();
            if current == section && header_line.is_none() {
                header_line = Some(i + 1);
            }
            continue;
        }
        let in_section = current == section || current.starts_with(&format!("{section}."));
        if in_section {
            if let Some((k, _)) = trimmed.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header_line
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(text, s.start));
            let msg = e.message().to_string();
            match line {
                Some(l) => Error::Parse(format!("line {l}: {msg}")),
                None => Error::Parse(msg),
            }
        })
    }

    /// Canonical text form.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn tolerances(&self) -> Tolerances {
        self.corners.tolerances.map(Tolerances::from).unwrap_or_default()
    }

    pub fn target(&self) -> Result<MatchingTarget> {
        self.target_checked().map_err(|f| f.err)
    }

    /// Corner set as written (enumerated from bounds if given), before refinement.
    pub fn raw_corners(&self) -> Result<CornerSet> {
        self.raw_corners_checked().map_err(|f| f.err)
    }

    fn target_checked(&self) -> std::result::Result<MatchingTarget, FieldError> {
        let a = from_rows(&self.reference.a).at("reference", "a")?;
        let b = from_rows(&self.reference.b).at("reference", "b")?;
        MatchingTarget::with_tolerances(a, b, &self.tolerances()).at("reference", "a")
    }

    fn raw_corners_checked(&self) -> std::result::Result<CornerSet, FieldError> {
        let c = &self.corners;
        match (&c.bounds, c.models.is_empty()) {
            (Some(_), false) => Err(Error::InvalidConfig(
                "give either corner models or bounds, not both".into(),
            ))
            .at("corners", "bounds"),
            (None, true) => Err(Error::InvalidConfig("no corner models or bounds".into())).at("corners", "models"),
            (Some(bd), true) => {
                let bounds = EntryBounds::new(
                    from_rows(&bd.a_min).at("corners", "a_min")?,
                    from_rows(&bd.a_max).at("corners", "a_max")?,
                    from_rows(&bd.b_min).at("corners", "b_min")?,
                    from_rows(&bd.b_max).at("corners", "b_max")?,
                )
                .at("corners", "bounds")?;
                enumerate_corner_set(&bounds, c.cap.unwrap_or(DEFAULT_CORNER_CAP)).at("corners", "bounds")
            }
            (None, false) => {
                let models = c
                    .models
                    .iter()
                    .map(|p| SystemMatrices::new(from_rows(&p.a)?, from_rows(&p.b)?))
                    .collect::<Result<Vec<_>>>()
                    .at("corners", "a")?;
                CornerSet::new(models).at("corners", "models")
            }
        }
    }

    /// Refine the raw corners against the reference model.
    pub fn refinement(&self) -> Result<Refinement> {
        let cs = self.raw_corners()?;
        refine_matching_polytope(&cs, &self.target()?, &self.tolerances())
    }

    fn build(&self) -> std::result::Result<Scenario, FieldError> {
        let tolerances = self.tolerances();
        let plant = SystemMatrices::new(
            from_rows(&self.plant.a).at("plant", "a")?,
            from_rows(&self.plant.b).at("plant", "b")?,
        )
        .at("plant", "b")?;
        let target = self.target_checked()?;
        let mut corners = self.raw_corners_checked()?;
        if self.corners.refine {
            // Not field-specific: surfaced verbatim.
            corners = refine_matching_polytope(&corners, &target, &tolerances)
                .map_err(|err| FieldError {
                    section: "",
                    key: "",
                    err,
                })?
                .corners;
        }
        let big_n = corners.len();

        let id = &self.identifier;
        let id_cfg = match (id.gamma, &id.gamma_matrix) {
            (Some(g), None) => IdentifierConfig::scalar_gain(id.lambda, id.alpha, g, big_n).at("identifier", "gamma")?,
            (None, Some(rows)) => {
                let g = from_rows(rows).at("identifier", "gamma_matrix")?;
                IdentifierConfig::new(id.lambda, id.alpha, g).at("identifier", "gamma_matrix")?
            }
            _ => {
                return Err(Error::InvalidConfig("give exactly one of gamma or gamma_matrix".into()))
                    .at("identifier", "gamma")
            }
        };

        let ctl = &self.controller;
        let mode: ControllerMode = ctl.mode.parse().at("controller", "mode")?;
        let direction = match ctl.baseline_direction.as_str() {
            "nominal" => BaselineDirection::Nominal,
            "reference" => BaselineDirection::Reference,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown baseline_direction `{other}` (expected nominal or reference)"
                )))
                .at("controller", "baseline_direction")
            }
        };
        let w0 = match &ctl.w0 {
            Some(w) => WeightVector::new(DVector::from_column_slice(w)).at("controller", "w0")?,
            None => WeightVector::uniform(big_n),
        };
        let n = plant.n();
        let lyapunov_q = match &ctl.lyapunov_q {
            Some(q) => from_rows(q).at("controller", "lyapunov_q")?,
            None => DMatrix::identity(n, n),
        };

        let sim = &self.simulation;
        let x_r0 = match &sim.x_r0 {
            Some(x) => DVector::from_column_slice(x),
            None => DVector::zeros(n),
        };
        let input = ReferenceInputSpec::new(self.input.channels.clone()).at("input", "channels")?;
        let sc = Scenario {
            plant,
            target,
            corners,
            id_cfg,
            mode,
            input,
            x_p0: DVector::from_column_slice(&sim.x_p0),
            x_r0,
            w0,
            dt: sim.dt,
            substeps: sim.substeps,
            stiffness_limit: sim.stiffness_limit,
            t_end: sim.t_end,
            seed: sim.seed,
            lyapunov_q,
            baseline: BaselineGains {
                gamma_k: ctl.baseline_gamma_k,
                gamma_l: ctl.baseline_gamma_l,
                direction,
            },
            regression_window: (sim.regression_window[0], sim.regression_window[1]),
            pe_window: sim.pe_window,
            tolerances,
            expected_slopes: sim.expected_slopes,
        };
        sc.validate().at("simulation", "dt")?;
        Ok(sc)
    }

    /// Validated scenario; `text` is the source used for line numbers.
    pub fn to_scenario_with_source(&self, text: Option<&str>) -> Result<Scenario> {
        self.build().map_err(|f| {
            if f.section.is_empty() {
                return f.err;
            }
            let line = text.and_then(|t| locate(t, f.section, f.key));
            let exit_as_is = matches!(f.err, Error::AssumptionViolated(_));
            if exit_as_is {
                return f.err;
            }
            match line {
                Some(l) => Error::Parse(format!("line {l}: [{}] {}: {}", f.section, f.key, f.err)),
                None => Error::Parse(format!("[{}] {}: {}", f.section, f.key, f.err)),
            }
        })
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        self.to_scenario_with_source(None)
    }

    /// Document describing `sc` exactly, with explicit corner models.
    pub fn from_scenario(sc: &Scenario) -> Self {
        let pair = |s: &SystemMatrices| MatrixPair {
            a: to_rows(s.a()),
            b: to_rows(s.b()),
        };
        let k = sc.corners.len() - 1;
        let gamma = sc.id_cfg.gamma();
        let scalar = gamma == &(DMatrix::identity(k, k) * gamma[(0, 0)]);
        ScenarioFile {
            plant: pair(&sc.plant),
            reference: MatrixPair {
                a: to_rows(sc.target.a_r()),
                b: to_rows(sc.target.b_r()),
            },
            corners: CornersSection {
                models: sc.corners.corners().iter().map(pair).collect(),
                bounds: None,
                cap: None,
                refine: false,
                tolerances: Some(sc.tolerances.into()),
            },
            identifier: IdentifierSection {
                lambda: sc.id_cfg.lambda(),
                alpha: sc.id_cfg.alpha(),
                gamma: scalar.then(|| gamma[(0, 0)]),
                gamma_matrix: (!scalar).then(|| to_rows(gamma)),
            },
            controller: ControllerSection {
                mode: sc.mode.as_str().into(),
                w0: Some(sc.w0.as_slice().to_vec()),
                lyapunov_q: Some(to_rows(&sc.lyapunov_q)),
                baseline_gamma_k: sc.baseline.gamma_k,
                baseline_gamma_l: sc.baseline.gamma_l,
                baseline_direction: match sc.baseline.direction {
                    BaselineDirection::Nominal => "nominal".into(),
                    BaselineDirection::Reference => "reference".into(),
                },
            },
            simulation: SimulationSection {
                dt: sc.dt,
                t_end: sc.t_end,
                x_p0: sc.x_p0.as_slice().to_vec(),
                x_r0: Some(sc.x_r0.as_slice().to_vec()),
                seed: sc.seed,
                substeps: sc.substeps,
                stiffness_limit: sc.stiffness_limit,
                regression_window: [sc.regression_window.0, sc.regression_window.1],
                pe_window: sc.pe_window,
                expected_slopes: sc.expected_slopes,
            },
            input: InputSection {
                channels: sc.input.channels.clone(),
            },
        }
    }
}

/// Parse and validate scenario text.
pub fn load_scenario_str(text: &str) -> Result<Scenario> {
    ScenarioFile::parse(text)?.to_scenario_with_source(Some(text))
}

/// Canonical text of a validated scenario.
pub fn emit_scenario(sc: &Scenario) -> Result<String> {
    if sc.seed > i64::MAX as u64 {
        return Err(Error::InvalidConfig(format!(
            "seed {} exceeds the TOML integer range",
            sc.seed
        )));
    }
    ScenarioFile::from_scenario(sc).to_toml()
}

/// Smallest singular value of `[vec(Θ_j − Θ_N)]` accepted by [`random_scenario`].
pub const MIN_CORNER_SEPARATION: f64 = 0.25;

const MAX_REDRAWS: usize = 10_000;

/// Shape of a generated test scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub n: usize,
    pub m: usize,
    pub corners: usize,
    pub t_end: f64,
    /// Entries of the corner gains `K_i` are drawn from `[−gain_scale, gain_scale]`.
    pub gain_scale: f64,
}

impl RandomSpec {
    pub fn new(n: usize, m: usize, corners: usize, t_end: f64) -> Self {
        Self {
            n,
            m,
            corners,
            t_end,
            gain_scale: 1.0,
        }
    }
}

/// Random well-posed identification/control problem.
///
/// The reference model is Hurwitz, every corner matches it by construction
/// (`B_i = B_r M_i`, `A_i = A_r − B_i K_i`), the blended input matrix keeps
/// full rank (`‖M_i − I‖₂ < 1`), corners are well separated, the plant
/// sits at an interior weight and
/// each input channel is a three-tone multisine. In identification-only
/// mode corners are redrawn until the plant itself is Hurwitz.
pub fn random_scenario(seed: u64, spec: RandomSpec, mode: ControllerMode) -> Result<(Scenario, WeightVector)> {
    let RandomSpec {
        n,
        m,
        corners: big_n,
        t_end,
        gain_scale,
    } = spec;
    if m == 0 || m > n || big_n < 2 {
        return Err(Error::InvalidConfig("need 1 <= m <= n and at least 2 corners".into()));
    }
    // Matching corners span an affine set of dimension m(n+m).
    if big_n - 1 > m * (n + m) {
        return Err(Error::InvalidConfig(format!(
            "{big_n} corners cannot be affinely independent in a matching set of dimension {}",
            m * (n + m)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..big_n).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = draws.iter().sum();
    let wstar = WeightVector::new(DVector::from_iterator(
        big_n,
        draws.iter().map(|d| 0.5 * d / total + 0.5 / big_n as f64),
    ))?;

    let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let shift = spectral_abscissa(&raw)? + rng.gen_range(0.5..1.5);
    let a_r = raw - DMatrix::identity(n, n) * shift;
    let b_r = loop {
        let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.5..1.5));
        if b.clone().svd(false, false).singular_values.min() > 0.3 {
            break b;
        }
    };
    let pert = 0.45 / m as f64;
    let mut attempts = 0;
    let (corners, plant) = loop {
        attempts += 1;
        if attempts > MAX_REDRAWS {
            return Err(Error::InvalidConfig(format!(
                "no separated{} corner set found in {MAX_REDRAWS} draws",
                if mode == ControllerMode::IdentificationOnly { ", stable" } else { "" }
            )));
        }
        let models = (0..big_n)
            .map(|_| {
                let mi = DMatrix::identity(m, m) + DMatrix::from_fn(m, m, |_, _| rng.gen_range(-pert..pert));
                let bi = &b_r * mi;
                let ki = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-gain_scale..gain_scale));
                SystemMatrices::new(&a_r - &bi * ki, bi)
            })
            .collect::<Result<Vec<_>>>()?;
        let corners = CornerSet::new(models)?;
        let plant = corners.combine(wstar.as_slice());
        let last = corners.get(big_n - 1).vectorized();
        let diffs = DMatrix::from_columns(
            &(0..big_n - 1)
                .map(|j| corners.get(j).vectorized() - &last)
                .collect::<Vec<_>>(),
        );
        let separated = diffs.svd(false, false).singular_values.min() >= MIN_CORNER_SEPARATION;
        let stable = mode != ControllerMode::IdentificationOnly || spectral_abscissa(plant.a())? < -0.1;
        if separated && stable {
            break (corners, plant);
        }
    };

    let channels = (0..m)
        .map(|c| InputChannel {
            offset: 0.0,
            terms: (0..3)
                .map(|j| SineTerm {
                    amplitude: rng.gen_range(0.5..1.5),
                    omega: 0.4 + 0.9 * (3 * c + j) as f64 + rng.gen_range(0.0..0.3),
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                })
                .collect(),
        })
        .collect();
    let lambda = rng.gen_range(0.5..2.0);
    let x_p0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));

    let sc = Scenario {
        plant,
        target: MatchingTarget::new(a_r, b_r)?,
        corners,
        id_cfg: IdentifierConfig::scalar_gain(lambda, 0.01, 2.0, big_n)?,
        mode,
        input: ReferenceInputSpec::new(channels)?,
        x_p0,
        x_r0: DVector::zeros(n),
        w0: WeightVector::uniform(big_n),
        dt: 1e-3,
        substeps: 1,
        stiffness_limit: 2.0,
        t_end,
        seed,
        lyapunov_q: DMatrix::identity(n, n),
        baseline: BaselineGains::default(),
        regression_window: (0.1 * t_end, t_end),
        pe_window: 2.0 * std::f64::consts::PI,
        tolerances: Tolerances::default(),
        expected_slopes: None,
    };
    sc.validate()?;
    Ok((sc, wstar))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_load() {
        let sc = load_scenario_str(THREE_STATE_TWO_INPUT).unwrap();
        assert_eq!((sc.corners.n(), sc.corners.m(), sc.corners.len()), (3, 2, 5));
        assert_eq!(sc.sample_count(), 200_001);
        let seg = ScenarioFile::parse(INPUT_MATRIX_SEGMENT).unwrap();
        assert_eq!(seg.raw_corners().unwrap().len(), 4);
    }

    #[test]
    fn round_trip_is_exact() {
        let sc = load_scenario_str(THREE_STATE_TWO_INPUT).unwrap();
        let text = emit_scenario(&sc).unwrap();
        let again = load_scenario_str(&text).unwrap();
        assert_eq!(sc, again);
        assert_eq!(text, emit_scenario(&again).unwrap());
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = THREE_STATE_TWO_INPUT.replacen("lambda = ", "lamda = ", 1);
        let err = load_scenario_str(&text).unwrap_err().to_string();
        let line = text.lines().position(|l| l.starts_with("lamda")).unwrap() + 1;
        assert!(err.contains(&format!("line {line}")), "{err}");
    }

    #[test]
    fn dimension_error_reports_line() {
        let text = THREE_STATE_TWO_INPUT.replacen("x_p0 = [", "x_p0 = [0.0, ", 1);
        let err = load_scenario_str(&text).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn random_scenarios_are_valid() {
        for seed in 0..5 {
            let spec = RandomSpec::new(2 + (seed as usize % 2), 1 + (seed as usize % 2), 3, 1.0);
            let (sc, w) = random_scenario(seed, spec, ControllerMode::Mmrac).unwrap();
            let combined = sc.corners.combine(w.as_slice());
            assert!(combined.distance(&sc.plant) < 1e-14);
            assert!(w.as_slice().iter().all(|&x| x > 0.0));
        }
    }
}
