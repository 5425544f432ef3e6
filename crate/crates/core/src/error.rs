use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "corner enumeration would produce {count} corners (cap {cap}); supply an explicit corner list instead"
    )]
    Capacity { count: String, cap: usize },

    #[error("degenerate polytope: {corners} corner(s), at least 2 required")]
    DegeneratePolytope { corners: usize },

    #[error("matching infeasible: residual {residual:.3e} exceeds tolerance")]
    MatchingInfeasible { residual: f64 },

    #[error("corner {index} is not in the matching set (residual {residual:.3e})")]
    CornerNotMatching { index: usize, residual: f64 },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("point is not in the affine hull of the corner set (residual {residual:.3e})")]
    NotInHull { residual: f64 },

    #[error("weight state outside Pi by {violation:.3e}")]
    StateOutsidePi { violation: f64 },

    #[error("blended input matrix lost rank: sigma_min = {sigma_min:.3e}")]
    RankCollapse { sigma_min: f64 },

    #[error("matrix is not Hurwitz (spectral abscissa {abscissa:.3e})")]
    NotHurwitz { abscissa: f64 },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("numerical divergence at t = {t}")]
    NumericalDivergence { t: f64 },

    #[error("regression window has {samples} usable samples, at least 10 required")]
    WindowTooSmall { samples: usize },

    #[error("range error: {0}")]
    Range(String),

    #[error("scenarios differ in `{field}` (only controller mode may differ)")]
    ScenarioMismatch { field: String },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("{0}")]
    Parse(String),
}

impl Error {
    /// Process exit code: 1 for numerical failures, 2 for specification or
    /// assumption failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalDivergence { .. } | Error::RankCollapse { .. } | Error::Lp(_) => 1,
            _ => 2,
        }
    }
}
