use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input model: {0}")]
    InvalidModel(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("mesh size {h_target} m cannot resolve the material interface at radius {radius} m")]
    UnresolvableInterface { h_target: f64, radius: f64 },

    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),

    #[error("degenerate triangle {index} (signed area {area:e} m^2)")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("region {0} has no material assigned")]
    MissingMaterial(u16),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("system is singular: {0}")]
    Singular(String),

    #[error("linear solve did not reach relative residual {target:e}; achieved {achieved:e}")]
    NotConverged { achieved: f64, target: f64 },

    #[error("skin depth {skin_depth:e} m is unresolved with {n_points} points; at least {required} points are needed")]
    UnresolvedSkinDepth {
        skin_depth: f64,
        n_points: usize,
        required: usize,
    },

    #[error("collocation over {dim} dimensions exceeds the tensor-grid limit of {max}")]
    TooManyDimensions { dim: usize, max: usize },

    #[error("need at least {needed} values, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no level up to {l_max} meets the weak-error bound {bound:e}; smallest indicator {achieved:e} at level {at_level}")]
    LevelSelection {
        l_max: usize,
        bound: f64,
        achieved: f64,
        at_level: usize,
    },

    #[error("level {level}, sample {sample}: {source}")]
    Sample {
        level: usize,
        sample: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("cost ceiling {ceiling:e} exceeded (would reach {required:e}); per-level samples so far {samples:?}")]
    BudgetExceeded {
        ceiling: f64,
        required: f64,
        samples: Vec<u64>,
    },

    #[error("regime undefined: {0}")]
    Regime(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn at_sample(self, level: usize, sample: u64) -> Self {
        Error::Sample {
            level,
            sample,
            source: Box::new(self),
        }
    }
}
