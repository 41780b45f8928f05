use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid barrier: {0}")]
    InvalidBarrier(String),

    #[error("packet spectrum reaches non-positive k; enlarge l0 or lower truncation")]
    SpectrumReachesZero,

    #[error("empty wavenumber grid")]
    EmptyGrid,

    #[error("grid does not contain the barrier midpoint x_c = {0} as a sample point")]
    MidpointNotOnGrid(f64),

    #[error("decomposition degenerate: R=0")]
    DegenerateDecomposition,

    #[error("degenerate reflection subensemble")]
    DegenerateReflection,

    #[error("azimuth undefined")]
    AzimuthUndefined,

    #[error("window too short: endpoint occupancy ratio {ratio:.3e} exceeds {threshold:.1e}")]
    WindowTooShort { ratio: f64, threshold: f64 },

    #[error("refine k-grid: phase step {step:.3} rad between samples exceeds pi/2")]
    RefineKGrid { step: f64 },

    #[error("domain too small: edge density {density:.3e} at t = {time:.3}")]
    DomainTooSmall { density: f64, time: f64 },

    #[error("not asymptotic: barrier-region density {0:.3e}")]
    NotAsymptotic(f64),

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),
}
