use thiserror::Error;

/// Errors raised by the solvers and constructions in this crate.
///
/// Variants are split in spirit between input/validation failures and
/// numerical failures; [`Error::is_validation`] gives the CLI exit-code
/// classification.
#[derive(Debug, Error)]
pub enum Error {
    // -- potentials and profiles --
    #[error("potential is negative ({value:.3e}) at s = {at:.6}; sqrt(2 f) undefined")]
    NegativePotential { at: f64, value: f64 },
    #[error("no heteroclinic connection: f < 0 between the wells at s = {at:.6}")]
    NoHeteroclinic { at: f64 },
    #[error("degree-{degree} polynomial potential not supported (max 4)")]
    UnsupportedPotential { degree: usize },
    #[error("discrete profile operator is numerically singular")]
    SingularSystem,
    #[error("array length {got} does not match grid length {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    // -- geometry --
    #[error("degenerate curve: {reason}")]
    DegenerateCurve { reason: String },
    #[error("ambiguous projection at ({x:.6}, {y:.6}): two foot points tie within 1e-9")]
    AmbiguousProjection { x: f64, y: f64 },
    #[error("point at signed distance {r:.6} is outside the tube (half-width {tube:.6})")]
    OutsideTube { r: f64, tube: f64 },
    #[error("tube half-width {requested:.6} exceeds the reach {reach:.6} (J <= 0 somewhere)")]
    TubeTooWide { requested: f64, reach: f64 },

    // -- sharp flow --
    #[error("step too large: curve self-intersects after the update")]
    StepTooLarge,
    #[error("circle {index} vanished at t = {t:.6} before t_end")]
    CircleVanished { index: usize, t: f64 },
    #[error("CFL violation: dt = {dt:.3e} exceeds the stable limit {limit:.3e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("input array is not periodic-grid sized: {len}")]
    NonPeriodicInput { len: usize },

    // -- diffuse solver --
    #[error("resolution too coarse: hx = {hx:.4e} > eps/2 = {limit:.4e}")]
    ResolutionTooCoarse { hx: f64, limit: f64 },
    #[error("tube too narrow: eps = {eps:.4e} > delta/5 = {limit:.4e}")]
    TubeTooNarrow { eps: f64, limit: f64 },
    #[error("pressure projection diverged: residual {residual:.3e} after {iters} iterations")]
    ProjectionDiverged { residual: f64, iters: usize },
    #[error("field has no sign change; no interface to extract")]
    NoInterface,

    // -- asymptotics --
    #[error("interface-law bracket does not vanish on the curve: residual {residual:.3e}")]
    BracketNotVanishing { residual: f64 },
    #[error("time-derivative data unavailable: {0}")]
    MissingMotion(String),

    // -- harness --
    #[error("grid mismatch: ({anx}, {any}) vs ({bnx}, {bny})")]
    GridMismatch { anx: usize, any: usize, bnx: usize, bny: usize },
    #[error("rate fit requires positive errors; got {value:.3e}")]
    NonPositiveError { value: f64 },
    #[error("eigensolver did not converge within {iters} iterations")]
    NoConvergence { iters: usize },
    #[error("bad magic in snapshot file (expected NSAC1)")]
    BadMagic,
    #[error("snapshot file truncated: needed {needed} bytes, got {got}")]
    TruncatedFile { needed: usize, got: usize },
    #[error("snapshot header implausible (wrong endianness or version)")]
    VersionMismatch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for input/validation failures (CLI exit code 2); false for
    /// numerical failures (exit code 3).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::UnsupportedPotential { .. }
                | Error::ShapeMismatch { .. }
                | Error::NonPeriodicInput { .. }
                | Error::ResolutionTooCoarse { .. }
                | Error::TubeTooNarrow { .. }
                | Error::TubeTooWide { .. }
                | Error::GridMismatch { .. }
                | Error::NonPositiveError { .. }
                | Error::InvalidConfig(_)
                | Error::MissingMotion(_)
                | Error::BadMagic
                | Error::TruncatedFile { .. }
                | Error::VersionMismatch
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
