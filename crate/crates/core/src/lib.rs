//! Multilevel Monte Carlo estimation of magnetic energy for planar
//! low-frequency field problems with uniformly distributed inputs.

pub mod config;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod mlmc;
pub mod oracles;
pub mod problems;
pub mod random;
pub mod richardson;
pub mod stats;

pub use config::{ExperimentConfig, ProblemConfig, BENCHMARK_FREQUENCY_HZ};
pub use error::{Error, Result};
pub use fem::{assemble, magnetic_energy, solve, FeSystem, FieldSolution, MaterialField, MU0};
pub use mesh::{
    build_hierarchy, generate_polar_mesh, mesh_size, refine_nested, CoaxGeometry, HierarchySpec,
    Mesh, Region, Strategy,
};
pub use mlmc::{
    classify_regime, estimate_rates, level_correction_estimate, mc_baseline_cost, mc_estimate, mlmc_run,
    optimal_samples, LevelStatistics, MlmcConfig, MlmcResult, RateEstimate, Regime,
};
pub use problems::{CoaxProblem, FieldRegime, LayeredCableProblem, LevelProblem};
pub use random::{substream, RandomInputModel, SampleVector, SeededStream, UniformParam};
pub use richardson::{choose_finest_level, richardson_extrapolate, weak_error_indicator, NominalCache, RichardsonConfig};
