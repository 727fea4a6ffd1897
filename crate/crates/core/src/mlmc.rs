//! Monte Carlo and multilevel Monte Carlo estimators, sample allocation,
//! rate fits and the cost-regime table.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::LevelProblem;
use crate::random::substream;
use crate::richardson::{choose_level, NominalCache, RichardsonConfig};
use crate::stats::{compensated_sum, least_squares_slope, mean_and_variance};

/// Sample mean and unbiased variance.
pub fn mc_estimate(values: &[f64]) -> Result<(f64, f64)> {
    mean_and_variance(values)
}

/// Statistics of the corrections `W_l - W_{l-1}` (of `W_0` on level 0).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelStatistics {
    pub level: usize,
    pub n_samples: u64,
    pub mean_correction: f64,
    /// Unbiased variance of the correction.
    pub variance: f64,
    /// Cost of one correction sample, the degrees of freedom of the level.
    pub cost: f64,
    pub h: f64,
    /// Mean and variance of `W_l` itself on the same samples.
    pub fine_mean: f64,
    pub fine_variance: f64,
    #[serde(skip)]
    corrections: Vec<f64>,
    #[serde(skip)]
    fine: Vec<f64>,
}

impl LevelStatistics {
    fn from_values(level: usize, cost: f64, h: f64, corrections: Vec<f64>, fine: Vec<f64>) -> Result<Self> {
        let (mean_correction, variance) = mean_and_variance(&corrections)?;
        let (fine_mean, fine_variance) = mean_and_variance(&fine)?;
        Ok(Self {
            level,
            n_samples: corrections.len() as u64,
            mean_correction,
            variance: variance.max(0.0),
            cost,
            h,
            fine_mean,
            fine_variance: fine_variance.max(0.0),
            corrections,
            fine,
        })
    }

    /// Correction values in sample order.
    pub fn corrections(&self) -> &[f64] {
        &self.corrections
    }

    pub fn fine_values(&self) -> &[f64] {
        &self.fine
    }

    /// `N_l * C_l`.
    pub fn total_cost(&self) -> f64 {
        self.n_samples as f64 * self.cost
    }
}

/// `(W_l - W_{l-1}, W_l)` for samples `range` of `level`, in index order.
fn evaluate_samples(
    problem: &dyn LevelProblem,
    level: usize,
    seed: u64,
    range: std::ops::Range<u64>,
) -> Result<Vec<(f64, f64)>> {
    let model = problem.input_model();
    let out: Vec<Result<(f64, f64)>> = range
        .clone()
        .into_par_iter()
        .map(|i| {
            let y = model.sample(&substream(seed, level, i));
            let fine = problem.evaluate(level, &y)?;
            let coarse = if level == 0 { 0.0 } else { problem.evaluate(level - 1, &y)? };
            Ok((fine - coarse, fine))
        })
        .collect();
    out.into_iter()
        .zip(range)
        .map(|(r, i)| r.map_err(|e| e.at_sample(level, i)))
        .collect()
}

/// Correction statistics from samples `0..n` of `level`.
pub fn level_correction_estimate(problem: &dyn LevelProblem, level: usize, n: u64, seed: u64) -> Result<LevelStatistics> {
    let pairs = evaluate_samples(problem, level, seed, 0..n)?;
    let (corr, fine) = pairs.into_iter().unzip();
    LevelStatistics::from_values(level, problem.cost(level)?, problem.h(level)?, corr, fine)
}

/// Plain Monte Carlo mean and variance of `W_level` over samples `0..n`.
pub fn mc_level_estimate(problem: &dyn LevelProblem, level: usize, n: u64, seed: u64) -> Result<(f64, f64)> {
    let model = problem.input_model();
    let out: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|i| problem.evaluate(level, &model.sample(&substream(seed, level, i))))
        .collect();
    let values = out
        .into_iter()
        .zip(0..n)
        .map(|(r, i)| r.map_err(|e| e.at_sample(level, i)))
        .collect::<Result<Vec<f64>>>()?;
    mean_and_variance(&values)
}

/// `N_l = ceil(eps^-2 sqrt(V_l / C_l) sum_k sqrt(V_k C_k))`, at least `n_min`.
pub fn optimal_samples(v: &[f64], c: &[f64], eps: f64, n_min: u64) -> Result<Vec<u64>> {
    if v.len() != c.len() || v.is_empty() {
        return Err(Error::InvalidArgument("need one variance and one cost per level".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if v.iter().any(|&x| !(x >= 0.0)) || c.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument("variances must be nonnegative and costs positive".into()));
    }
    let s: f64 = v.iter().zip(c).map(|(v, c)| (v * c).sqrt()).sum();
    Ok(v.iter()
        .zip(c)
        .map(|(v, c)| {
            let n = ((v / c).sqrt() * s / (eps * eps)).ceil();
            (n as u64).max(n_min)
        })
        .collect())
}

/// `N = ceil(2 V_L / eps^2)` plain Monte Carlo samples and their cost.
pub fn mc_baseline_cost(v_l: f64, c_l: f64, eps: f64) -> (u64, f64) {
    let n = (2.0 * v_l / (eps * eps)).ceil() as u64;
    (n, n as f64 * c_l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlmcConfig {
    pub richardson: RichardsonConfig,
    pub n_pilot: u64,
    pub n_min: u64,
    /// Highest level the level selection may pick.
    pub l_max: usize,
    /// Skip the weak-error selection and use this finest level.
    pub fixed_level: Option<usize>,
    /// Abort when the projected `sum N_l C_l` exceeds this.
    pub cost_ceiling: Option<f64>,
    /// Size of the worker pool; `None` uses the global pool.
    pub workers: Option<usize>,
    pub max_rounds: usize,
}

impl Default for MlmcConfig {
    fn default() -> Self {
        Self {
            richardson: RichardsonConfig::default(),
            n_pilot: 50,
            n_min: 10,
            l_max: 6,
            fixed_level: None,
            cost_ceiling: None,
            workers: None,
            max_rounds: 10,
        }
    }
}

impl MlmcConfig {
    pub fn validate(&self) -> Result<()> {
        self.richardson.validate()?;
        if self.n_pilot < 2 || self.n_min < 2 {
            return Err(Error::InvalidArgument("pilot size and sample floor must be at least 2".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be positive".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidArgument("max_rounds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlmcResult {
    pub eps: f64,
    pub mean: f64,
    pub per_level: Vec<LevelStatistics>,
    pub total_cost: f64,
    pub estimator_variance: f64,
    /// Three standard deviations of the estimator.
    pub confidence_halfwidth: f64,
    pub finest_level: usize,
    pub seed: u64,
    /// Weak-error indicators evaluated during level selection.
    pub indicators: Vec<f64>,
    /// Sampling rounds including the pilot.
    pub rounds: usize,
}

impl MlmcResult {
    fn assemble(eps: f64, seed: u64, indicators: Vec<f64>, rounds: usize, per_level: Vec<LevelStatistics>) -> Self {
        let mean = compensated_sum(per_level.iter().map(|s| s.mean_correction));
        let total_cost = compensated_sum(per_level.iter().map(|s| s.total_cost()));
        let estimator_variance = compensated_sum(per_level.iter().map(|s| s.variance / s.n_samples as f64));
        Self {
            eps,
            mean,
            total_cost,
            estimator_variance,
            confidence_halfwidth: 3.0 * estimator_variance.sqrt(),
            finest_level: per_level.len() - 1,
            seed,
            indicators,
            rounds,
            per_level,
        }
    }

    pub fn samples(&self) -> Vec<u64> {
        self.per_level.iter().map(|s| s.n_samples).collect()
    }

    pub fn write_levels_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{LEVELS_HEADER}")?;
        for s in &self.per_level {
            writeln!(
                w,
                "{},{:.16e},{},{},{:.16e},{:.16e},{:.16e}",
                s.level,
                s.h,
                s.cost as u64,
                s.n_samples,
                s.mean_correction,
                s.variance,
                s.total_cost()
            )?;
        }
        Ok(())
    }

    pub fn write_summary_row<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{},{},{:.16e}",
            self.eps,
            self.mean,
            self.estimator_variance,
            self.total_cost,
            self.finest_level,
            self.seed,
            self.confidence_halfwidth
        )?;
        Ok(())
    }
}

pub const LEVELS_HEADER: &str = "level,h,n_dof,N,mean_corr,V,cost";
pub const SUMMARY_HEADER: &str = "eps,mean,var,cost,L,seed,3sigma";

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Adaptive MLMC estimate of `E[W]` with mean-square error about `eps^2`:
/// half of it for the bias (level selection), half for the estimator
/// variance (sample allocation).
pub fn mlmc_run(problem: &dyn LevelProblem, eps: f64, seed: u64, cfg: &MlmcConfig) -> Result<MlmcResult> {
    cfg.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    with_pool(cfg.workers, || run_inner(problem, eps, seed, cfg))?
}

fn run_inner(problem: &dyn LevelProblem, eps: f64, seed: u64, cfg: &MlmcConfig) -> Result<MlmcResult> {
    let (finest, indicators) = match cfg.fixed_level {
        Some(l) => {
            if l > problem.max_level() {
                return Err(Error::InvalidArgument(format!(
                    "fixed level {l} beyond the finest level {}",
                    problem.max_level()
                )));
            }
            (l, Vec::new())
        }
        None => {
            let choice = choose_level(problem, &NominalCache::new(), eps, &cfg.richardson, cfg.l_max)?;
            (choice.level, choice.indicators)
        }
    };
    let levels = finest + 1;
    let costs = (0..levels).map(|l| problem.cost(l)).collect::<Result<Vec<_>>>()?;
    let hs = (0..levels).map(|l| problem.h(l)).collect::<Result<Vec<_>>>()?;
    let mut values: Vec<Vec<(f64, f64)>> = vec![Vec::new(); levels];
    let mut target = vec![cfg.n_pilot.max(cfg.n_min); levels];
    let eps_stoch = eps / 2f64.sqrt();
    let mut rounds = 0;
    loop {
        let done: Vec<u64> = values.iter().map(|v| v.len() as u64).collect();
        if let Some(ceiling) = cfg.cost_ceiling {
            let required: f64 = target.iter().zip(&costs).map(|(&n, c)| n as f64 * c).sum();
            if required > ceiling {
                return Err(Error::BudgetExceeded {
                    ceiling,
                    required,
                    samples: done,
                });
            }
        }
        for l in 0..levels {
            if target[l] > done[l] {
                let extra = evaluate_samples(problem, l, seed, done[l]..target[l])?;
                values[l].extend(extra);
            }
        }
        rounds += 1;
        let v: Vec<f64> = values
            .iter()
            .map(|vals| {
                let corr: Vec<f64> = vals.iter().map(|p| p.0).collect();
                mean_and_variance(&corr).map(|(_, var)| var.max(0.0))
            })
            .collect::<Result<_>>()?;
        let wanted = optimal_samples(&v, &costs, eps_stoch, cfg.n_min)?;
        let have: Vec<u64> = values.iter().map(|v| v.len() as u64).collect();
        if wanted.iter().zip(&have).all(|(w, h)| w <= h) || rounds >= cfg.max_rounds {
            break;
        }
        target = wanted.iter().zip(&have).map(|(&w, &h)| w.max(h)).collect();
    }
    let per_level = values
        .into_iter()
        .enumerate()
        .map(|(l, vals)| {
            let (corr, fine) = vals.into_iter().unzip();
            LevelStatistics::from_values(l, costs[l], hs[l], corr, fine)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MlmcResult::assemble(eps, seed, indicators, rounds, per_level))
}

/// Fitted decay rates of the weak error (`alpha`) and of the correction
/// variance (`beta`) against `1/h`, with `gamma` the cost exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Intercepts `ln c1`, `ln c2` of the two fits.
    pub alpha_intercept: f64,
    pub beta_intercept: f64,
    pub alpha_residuals: Vec<f64>,
    pub beta_residuals: Vec<f64>,
    /// Levels left out because a value was not positive.
    pub excluded_alpha: Vec<usize>,
    pub excluded_beta: Vec<usize>,
}

fn power_fit(h: &[f64], y: &[f64], from: usize) -> Result<(f64, f64, Vec<f64>, Vec<usize>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    for l in from..h.len() {
        if h[l] > 0.0 && y[l] > 0.0 && y[l].is_finite() {
            xs.push((1.0 / h[l]).ln());
            ys.push(y[l].ln());
        } else {
            excluded.push(l);
        }
    }
    if xs.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: xs.len(),
        });
    }
    let (slope, intercept, res) = least_squares_slope(&xs, &ys)?;
    Ok((-slope, intercept, res, excluded))
}

/// Least-squares rates over all levels for `alpha` and over `l >= 1` for
/// `beta`.
pub fn estimate_rates(h: &[f64], weak_err: &[f64], v: &[f64]) -> Result<RateEstimate> {
    if h.len() != weak_err.len() || h.len() != v.len() {
        return Err(Error::InvalidArgument("h, weak error and variance lists differ in length".into()));
    }
    let weak: Vec<f64> = weak_err.iter().map(|e| e.abs()).collect();
    let (alpha, alpha_intercept, alpha_residuals, excluded_alpha) = power_fit(h, &weak, 0)?;
    let (beta, beta_intercept, beta_residuals, excluded_beta) = power_fit(h, v, 1)?;
    Ok(RateEstimate {
        alpha,
        beta,
        gamma: 2.0,
        alpha_intercept,
        beta_intercept,
        alpha_residuals,
        beta_residuals,
        excluded_alpha,
        excluded_beta,
    })
}

/// Asymptotic cost of MLMC at accuracy `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Regime {
    /// `eps^-2`
    BetaGtGamma { exponent: f64 },
    /// `eps^-2 (log eps)^2`
    BetaEqGamma { exponent: f64 },
    /// `eps^(-2 - (gamma - beta) / alpha)`
    BetaLtGamma { exponent: f64 },
}

impl Regime {
    /// Exponent of `eps` in the cost bound (the log factor aside).
    pub fn exponent(&self) -> f64 {
        match *self {
            Regime::BetaGtGamma { exponent } | Regime::BetaEqGamma { exponent } | Regime::BetaLtGamma { exponent } => {
                exponent
            }
        }
    }
}

pub fn classify_regime(alpha: f64, beta: f64, gamma: f64) -> Result<Regime> {
    if !(alpha > 0.0 && beta > 0.0 && gamma > 0.0) || !(alpha.is_finite() && beta.is_finite() && gamma.is_finite()) {
        return Err(Error::Regime(format!(
            "rates must be positive and finite: alpha={alpha}, beta={beta}, gamma={gamma}"
        )));
    }
    if alpha < 0.5 * beta.min(gamma) {
        return Err(Error::Regime(format!(
            "alpha={alpha} is below min(beta, gamma)/2 = {}",
            0.5 * beta.min(gamma)
        )));
    }
    let tie = 1e-9 * beta.abs().max(gamma.abs());
    Ok(if (beta - gamma).abs() <= tie {
        Regime::BetaEqGamma { exponent: -2.0 }
    } else if beta > gamma {
        Regime::BetaGtGamma { exponent: -2.0 }
    } else {
        Regime::BetaLtGamma {
            exponent: -2.0 - (gamma - beta) / alpha,
        }
    })
}
