//! Richardson extrapolation between consecutive levels and the weak-error
//! indicator that picks the finest MLMC level.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::LevelProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RichardsonConfig {
    /// Assumed convergence order of the discretization.
    pub k0: f64,
    /// Mesh-size ratio between consecutive levels.
    pub delta: f64,
}

impl Default for RichardsonConfig {
    fn default() -> Self {
        Self { k0: 2.0, delta: 0.5 }
    }
}

impl RichardsonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k0 > 0.0 && self.k0.is_finite()) {
            return Err(Error::InvalidArgument(format!("k0 must be positive, got {}", self.k0)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    /// `delta^-k0`, the error reduction factor per level.
    pub fn gain(&self) -> f64 {
        self.delta.powf(-self.k0)
    }
}

/// `(delta^-k0 W_fine - W_coarse) / (delta^-k0 - 1)`.
pub fn richardson_extrapolate(w_coarse: f64, w_fine: f64, cfg: &RichardsonConfig) -> f64 {
    let g = cfg.gain();
    (g * w_fine - w_coarse) / (g - 1.0)
}

/// Deterministic solves at the mean input, computed once per level.
#[derive(Debug, Default)]
pub struct NominalCache {
    values: Mutex<BTreeMap<usize, f64>>,
    solves: AtomicUsize,
}

impl NominalCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, problem: &dyn LevelProblem, level: usize) -> Result<f64> {
        if let Some(&w) = self.values.lock().unwrap().get(&level) {
            return Ok(w);
        }
        let w = problem.evaluate(level, &problem.input_model().nominal())?;
        self.solves.fetch_add(1, Ordering::Relaxed);
        self.values.lock().unwrap().insert(level, w);
        Ok(w)
    }

    /// Number of solves performed so far.
    pub fn solves(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }
}

/// `|W_L(mu) - W~_L(mu)|^2`, the squared bias estimate of level `level`. Uses
/// the nominal solves on `level` and `level + 1`.
pub fn weak_error_indicator(
    problem: &dyn LevelProblem,
    cache: &NominalCache,
    level: usize,
    cfg: &RichardsonConfig,
) -> Result<f64> {
    cfg.validate()?;
    if level + 1 > problem.max_level() {
        return Err(Error::InvalidArgument(format!(
            "indicator at level {level} needs level {} but the hierarchy stops at {}",
            level + 1,
            problem.max_level()
        )));
    }
    let w = cache.get(problem, level)?;
    let w_next = cache.get(problem, level + 1)?;
    let d = w - richardson_extrapolate(w, w_next, cfg);
    Ok(d * d)
}

/// Indicators for levels `0..` until the first one at or below `eps^2 / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelChoice {
    pub level: usize,
    pub indicators: Vec<f64>,
}

/// Smallest `L <= l_max` whose indicator is at most `eps^2 / 2`.
pub fn choose_level(
    problem: &dyn LevelProblem,
    cache: &NominalCache,
    eps: f64,
    cfg: &RichardsonConfig,
    l_max: usize,
) -> Result<LevelChoice> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let bound = 0.5 * eps * eps;
    let top = l_max.min(problem.max_level().saturating_sub(1));
    let mut indicators = Vec::new();
    for level in 0..=top {
        let ind = weak_error_indicator(problem, cache, level, cfg)?;
        indicators.push(ind);
        if ind <= bound {
            return Ok(LevelChoice { level, indicators });
        }
    }
    let (at_level, &achieved) = indicators
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap_or((0, &f64::NAN));
    Err(Error::LevelSelection {
        l_max: top,
        bound,
        achieved,
        at_level,
    })
}

pub fn choose_finest_level(
    problem: &dyn LevelProblem,
    cache: &NominalCache,
    eps: f64,
    cfg: &RichardsonConfig,
    l_max: usize,
) -> Result<usize> {
    Ok(choose_level(problem, cache, eps, cfg, l_max)?.level)
}
