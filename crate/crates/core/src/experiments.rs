//! Experiment drivers behind the command-line tool. Each writes CSV files to
//! the configured output directory and returns the bound checks it made.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, ProblemConfig};
use crate::error::{Error, Result};
use crate::mesh::Strategy;
use crate::mlmc::{
    estimate_rates, level_correction_estimate, mc_baseline_cost, mc_level_estimate, mlmc_run, with_pool,
    LevelStatistics, MlmcResult, RateEstimate, SUMMARY_HEADER,
};
use crate::oracles::{collocation_mean, static_coax_energy, CoaxParams, ReferenceCache, RadialProfile, radial_energy};
use crate::problems::{
    ConstantProblem, CoaxProblem, FieldRegime, LayeredCableProblem, LevelProblem, PowerLawProblem,
};
use crate::random::RandomInputModel;
use crate::richardson::{choose_level, richardson_extrapolate, NominalCache};
use crate::stats::least_squares_slope;

/// A bound evaluated by an experiment; `lower <= value <= upper` passes.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lower,
            upper,
        }
    }

    pub fn passed(&self) -> bool {
        self.value >= self.lower && self.value <= self.upper
    }
}

fn write_checks(dir: &Path, file: &str, checks: &[Check]) -> Result<PathBuf> {
    let path = dir.join(file);
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "check,value,lower,upper,pass")?;
    for c in checks {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{}",
            c.name,
            c.value,
            c.lower,
            c.upper,
            c.passed()
        )?;
    }
    w.flush()?;
    Ok(path)
}

fn create(dir: &Path, file: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(file))?))
}

fn prepare_out(cfg: &ExperimentConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::Io(format!("cannot create output directory {}: {e}", cfg.out_dir.display())))?;
    Ok(cfg.out_dir.clone())
}

/// A configured problem together with what is known about its exact values.
pub enum BuiltProblem {
    Coax(CoaxProblem),
    Layered(LayeredCableProblem),
    PowerLaw(PowerLawProblem),
    Constant(ConstantProblem),
}

impl BuiltProblem {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(match &cfg.problem {
            ProblemConfig::Coax {
                regime,
                inputs,
                geometry,
                current,
                mu_r,
                sigma_pipe,
            } => {
                let base = CoaxParams {
                    geometry: *geometry,
                    current: *current,
                    mu_r: *mu_r,
                    sigma_pipe: *sigma_pipe,
                    omega: regime.omega(),
                };
                let name = match regime {
                    FieldRegime::Static => "coax-static",
                    FieldRegime::Harmonic { .. } => "coax-harmonic",
                };
                BuiltProblem::Coax(CoaxProblem::new(
                    name,
                    RandomInputModel::new(inputs.clone())?,
                    base,
                    cfg.hierarchy,
                )?)
            }
            ProblemConfig::Layered { regime, n_layers, nu_r } => BuiltProblem::Layered(LayeredCableProblem::new(
                *n_layers,
                *nu_r,
                CoaxParams::nominal(regime.omega()),
                cfg.hierarchy,
            )?),
            ProblemConfig::PowerLaw { inputs, order } => BuiltProblem::PowerLaw(PowerLawProblem::new(
                RandomInputModel::new(inputs.clone())?,
                cfg.hierarchy.h0,
                cfg.hierarchy.delta,
                *order,
                cfg.hierarchy.levels,
            )?),
            ProblemConfig::Constant { value } => BuiltProblem::Constant(ConstantProblem::new(
                *value,
                RandomInputModel::new(Vec::new())?,
                cfg.hierarchy.levels,
            )),
        })
    }

    pub fn level_problem(&self) -> &dyn LevelProblem {
        match self {
            BuiltProblem::Coax(p) => p,
            BuiltProblem::Layered(p) => p,
            BuiltProblem::PowerLaw(p) => p,
            BuiltProblem::Constant(p) => p,
        }
    }

    /// Limit `h -> 0` of the quantity at the mean input.
    pub fn nominal_exact(&self, cfg: &ExperimentConfig) -> Result<Option<f64>> {
        let model = self.level_problem().input_model();
        Ok(match self {
            BuiltProblem::Coax(p) => {
                let params = p.params(&model.nominal())?;
                Some(if params.omega == 0.0 {
                    static_coax_energy(&params)
                } else {
                    radial_energy(&RadialProfile::from_coax(&params), params.omega, cfg.reference_points)?
                })
            }
            BuiltProblem::Layered(p) => {
                let profile = p.profile(&model.nominal())?;
                Some(radial_energy(&profile, p.omega(), cfg.reference_points)?)
            }
            BuiltProblem::PowerLaw(_) => Some(model.params()[0].mean),
            BuiltProblem::Constant(p) => Some(p.value),
        })
    }

    /// Exact or collocation mean of the limit quantity, when available.
    /// Collocation results are cached on disk.
    pub fn reference_mean(&self, cfg: &ExperimentConfig) -> Result<Option<f64>> {
        let model = self.level_problem().input_model();
        let p = cfg.collocation_degree;
        match self {
            BuiltProblem::Coax(prob) => {
                let mut cache = ReferenceCache::open(cfg.reference_cache_path())?;
                let desc = format!(
                    "coax;{};{};p={p}",
                    serde_json::to_string(model).map_err(|e| Error::Config(e.to_string()))?,
                    serde_json::to_string(prob.base()).map_err(|e| Error::Config(e.to_string()))?
                );
                if prob.base().omega == 0.0 {
                    let e = cache.get_or_compute(&desc, 0, || {
                        collocation_mean(|y| Ok(static_coax_energy(&prob.params(y)?)), model, p)
                    })?;
                    Ok(Some(e))
                } else {
                    let n = cfg.reference_points;
                    let e = cache.get_or_compute(&desc, n, || collocation_mean(|y| prob.oracle(y, n), model, p))?;
                    Ok(Some(e))
                }
            }
            BuiltProblem::Layered(prob) => {
                if prob.omega() == 0.0 {
                    Ok(Some(prob.static_mean()?))
                } else if model.dimension() <= crate::oracles::MAX_COLLOCATION_DIM {
                    let n = cfg.reference_points;
                    Ok(Some(collocation_mean(|y| prob.oracle(y, n), model, p)?))
                } else {
                    Ok(None)
                }
            }
            BuiltProblem::PowerLaw(_) => Ok(Some(model.params()[0].mean)),
            BuiltProblem::Constant(prob) => Ok(Some(prob.value)),
        }
    }
}

fn fit_order(h: &[f64], err: &[f64]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = h
        .iter()
        .zip(err)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0 && e.is_finite())
        .map(|(h, e)| ((1.0 / h).ln(), e.ln()))
        .unzip();
    if xs.len() < 3 {
        return None;
    }
    least_squares_slope(&xs, &ys).ok().map(|(s, _, _)| -s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub n_dof: f64,
    pub w_nominal: f64,
    pub w_richardson: f64,
    pub err_fem: f64,
    pub err_richardson: f64,
    pub v_level: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub exact: Option<f64>,
    /// Fitted order of `err_fem` over all levels.
    pub fem_order: Option<f64>,
    pub richardson_order: Option<f64>,
    /// Rates from sampled corrections, when enough levels were sampled.
    pub rates: Option<RateEstimate>,
    pub sampled: Vec<LevelStatistics>,
    pub checks: Vec<Check>,
}

/// Nominal energies, Richardson values and their errors on every level,
/// plus correction statistics from `rate_samples` samples per level up to
/// `rate_max_level`.
pub fn cmd_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let out = prepare_out(cfg)?;
    with_pool(cfg.mlmc.workers, || convergence_inner(cfg, &out))?
}

fn convergence_inner(cfg: &ExperimentConfig, out: &Path) -> Result<ConvergenceReport> {
    let built = BuiltProblem::build(cfg)?;
    let problem = built.level_problem();
    let levels = problem.max_level();
    let rich = cfg.mlmc.richardson;
    let exact = built.nominal_exact(cfg)?;
    let cache = NominalCache::new();
    let w = (0..=levels).map(|l| cache.get(problem, l)).collect::<Result<Vec<_>>>()?;
    let sample_top = cfg.rate_max_level.min(levels);
    let sampled = (0..=sample_top)
        .map(|l| level_correction_estimate(problem, l, cfg.rate_samples, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for l in 0..=levels {
        let w_r = if l < levels { richardson_extrapolate(w[l], w[l + 1], &rich) } else { f64::NAN };
        rows.push(ConvergenceRow {
            level: l,
            h: problem.h(l)?,
            n_dof: problem.cost(l)?,
            w_nominal: w[l],
            w_richardson: w_r,
            err_fem: exact.map_or(f64::NAN, |e| (w[l] - e).abs()),
            err_richardson: exact.map_or(f64::NAN, |e| (w_r - e).abs()),
            v_level: sampled.get(l).map_or(f64::NAN, |s| s.variance),
        });
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let fem_order = fit_order(&h, &rows.iter().map(|r| r.err_fem).collect::<Vec<_>>());
    let richardson_order = fit_order(
        &h[..levels],
        &rows[..levels].iter().map(|r| r.err_richardson).collect::<Vec<_>>(),
    );
    let hs: Vec<f64> = sampled.iter().map(|s| s.h).collect();
    let weak: Vec<f64> = sampled
        .iter()
        .map(|s| if s.level == 0 { f64::NAN } else { s.mean_correction.abs() })
        .collect();
    let v: Vec<f64> = sampled.iter().map(|s| s.variance).collect();
    let rates = estimate_rates(&hs, &weak, &v).ok();

    let k0 = rich.k0;
    let mut checks = Vec::new();
    if let Some(o) = fem_order {
        checks.push(Check::new("fem_order", o, k0 - 0.3, k0 + 0.3));
    }
    if let Some(o) = richardson_order {
        checks.push(Check::new("richardson_order", o, k0 + 0.6, f64::INFINITY));
    }
    if let Some(r) = &rates {
        checks.push(Check::new("alpha", r.alpha, k0 - 0.3, k0 + 0.3));
        checks.push(Check::new("beta", r.beta, 2.0 * k0 - 0.8, 2.0 * k0 + 0.8));
    }

    let mut f = create(out, "convergence.csv")?;
    writeln!(f, "level,h,n_dof,W_nominal,W_richardson,err_fem,err_richardson,V_level")?;
    for r in &rows {
        writeln!(
            f,
            "{},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.level, r.h, r.n_dof as u64, r.w_nominal, r.w_richardson, r.err_fem, r.err_richardson, r.v_level
        )?;
    }
    f.flush()?;
    let mut f = create(out, "rates.csv")?;
    writeln!(f, "rate,value,intercept,residuals")?;
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(";");
    match &rates {
        Some(r) => {
            writeln!(f, "alpha,{:.16e},{:.16e},{}", r.alpha, r.alpha_intercept, join(&r.alpha_residuals))?;
            writeln!(f, "beta,{:.16e},{:.16e},{}", r.beta, r.beta_intercept, join(&r.beta_residuals))?;
            writeln!(f, "gamma,{:.16e},,", r.gamma)?;
        }
        None => {
            writeln!(f, "alpha,NaN,,")?;
            writeln!(f, "beta,NaN,,")?;
            writeln!(f, "gamma,{:.16e},,", 2.0)?;
        }
    }
    writeln!(f, "fem_order,{:.16e},,", fem_order.unwrap_or(f64::NAN))?;
    writeln!(f, "richardson_order,{:.16e},,", richardson_order.unwrap_or(f64::NAN))?;
    f.flush()?;
    write_checks(out, "convergence_checks.csv", &checks)?;
    Ok(ConvergenceReport {
        rows,
        exact,
        fem_order,
        richardson_order,
        rates,
        sampled,
        checks,
    })
}

#[derive(Debug, Clone)]
pub struct MlmcReport {
    pub results: Vec<MlmcResult>,
    pub reference: Option<f64>,
    /// Estimated plain Monte Carlo cost for each tolerance.
    pub mc_cost: Vec<f64>,
    pub checks: Vec<Check>,
}

fn eps_tag(eps: f64) -> String {
    format!("{eps:e}")
}

fn loglog(x: &[f64], y: &[f64]) -> Option<f64> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    least_squares_slope(&lx, &ly).ok().map(|r| r.0)
}

/// One MLMC run per tolerance with per-level and summary tables and the
/// plain Monte Carlo cost estimate.
pub fn cmd_mlmc(cfg: &ExperimentConfig) -> Result<MlmcReport> {
    let out = prepare_out(cfg)?;
    let built = BuiltProblem::build(cfg)?;
    let problem = built.level_problem();
    let reference = built.reference_mean(cfg)?;
    let mut results = Vec::new();
    let mut mc_cost = Vec::new();
    let mut checks = Vec::new();
    let mut summary = create(&out, "summary.csv")?;
    writeln!(summary, "{SUMMARY_HEADER}")?;
    let mut comparison = create(&out, "cost_comparison.csv")?;
    writeln!(comparison, "eps,cost_mlmc,cost_mc_estimated")?;
    for &eps in &cfg.eps {
        let r = mlmc_run(problem, eps, cfg.seed, &cfg.mlmc)?;
        r.write_levels_csv(create(&out, &format!("levels_eps_{}.csv", eps_tag(eps)))?)?;
        r.write_summary_row(&mut summary)?;
        let top = r.per_level.last().unwrap();
        let (_, mc) = mc_baseline_cost(top.fine_variance, top.cost, eps);
        writeln!(comparison, "{:.16e},{:.16e},{:.16e}", eps, r.total_cost, mc)?;
        mc_cost.push(mc);
        if let Some(e_ref) = reference {
            let tag = eps_tag(eps);
            checks.push(Check::new(format!("abs_error_eps_{tag}"), (r.mean - e_ref).abs(), 0.0, eps));
            checks.push(Check::new(
                format!("interval_excess_eps_{tag}"),
                (r.mean - e_ref).abs() - r.confidence_halfwidth,
                f64::NEG_INFINITY,
                0.0,
            ));
        }
        let costs: Vec<f64> = r.per_level.iter().map(|s| s.total_cost()).collect();
        let argmax = costs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(l, _)| l);
        checks.push(Check::new(format!("costliest_level_eps_{}", eps_tag(eps)), argmax as f64, 0.0, 0.0));
        results.push(r);
    }
    summary.flush()?;
    comparison.flush()?;
    if cfg.eps.len() >= 3 {
        let eps: Vec<f64> = results.iter().map(|r| r.eps).collect();
        let ml: Vec<f64> = results.iter().map(|r| r.total_cost).collect();
        if let (Some(s_ml), Some(s_mc)) = (loglog(&eps, &ml), loglog(&eps, &mc_cost)) {
            checks.push(Check::new("mlmc_cost_slope", s_ml, -2.4, -1.6));
            checks.push(Check::new("mc_minus_mlmc_slope", s_mc - s_ml, f64::NEG_INFINITY, -0.6));
        }
    }
    write_checks(&out, "mlmc_checks.csv", &checks)?;
    Ok(MlmcReport {
        results,
        reference,
        mc_cost,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct McBaselineRow {
    pub eps: f64,
    pub level: usize,
    pub n: u64,
    pub mean: f64,
    pub estimator_variance: f64,
    pub cost: f64,
}

/// Plain Monte Carlo on the level selected by the weak-error indicator,
/// with `N = ceil(2 V_L / eps^2)` from a pilot variance.
pub fn cmd_mc_baseline(cfg: &ExperimentConfig) -> Result<(Vec<McBaselineRow>, Vec<Check>)> {
    let out = prepare_out(cfg)?;
    with_pool(cfg.mlmc.workers, || mc_baseline_inner(cfg, &out))?
}

fn mc_baseline_inner(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<McBaselineRow>, Vec<Check>)> {
    let built = BuiltProblem::build(cfg)?;
    let problem = built.level_problem();
    let reference = built.reference_mean(cfg)?;
    let cache = NominalCache::new();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut f = create(out, "mc_baseline.csv")?;
    writeln!(f, "eps,L,N,mean,var,cost,3sigma")?;
    for &eps in &cfg.eps {
        let level = match cfg.mlmc.fixed_level {
            Some(l) => l,
            None => choose_level(problem, &cache, eps, &cfg.mlmc.richardson, cfg.mlmc.l_max)?.level,
        };
        let (_, v_pilot) = mc_level_estimate(problem, level, cfg.mlmc.n_pilot, cfg.seed)?;
        let c = problem.cost(level)?;
        let (n, cost) = mc_baseline_cost(v_pilot, c, eps);
        let n = n.max(cfg.mlmc.n_pilot);
        if let Some(ceiling) = cfg.mlmc.cost_ceiling {
            if cost > ceiling {
                return Err(Error::BudgetExceeded {
                    ceiling,
                    required: cost,
                    samples: vec![n],
                });
            }
        }
        let (mean, var) = mc_level_estimate(problem, level, n, cfg.seed)?;
        let row = McBaselineRow {
            eps,
            level,
            n,
            mean,
            estimator_variance: var / n as f64,
            cost: n as f64 * c,
        };
        writeln!(
            f,
            "{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            row.eps,
            row.level,
            row.n,
            row.mean,
            row.estimator_variance,
            row.cost,
            3.0 * row.estimator_variance.sqrt()
        )?;
        if let Some(e_ref) = reference {
            checks.push(Check::new(format!("abs_error_eps_{}", eps_tag(eps)), (mean - e_ref).abs(), 0.0, eps));
        }
        rows.push(row);
    }
    f.flush()?;
    write_checks(out, "mc_baseline_checks.csv", &checks)?;
    Ok((rows, checks))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub strategy: Strategy,
    pub eps: f64,
    pub mse: f64,
    /// Estimates of the individual runs.
    pub means: Vec<f64>,
    /// Root of the average estimator variance.
    pub sigma: f64,
}

impl MseRow {
    pub fn passed(&self) -> bool {
        self.mse < self.eps * self.eps
    }
}

/// `repetitions` independent runs per tolerance for both hierarchy
/// strategies; the mean-square error is taken against the reference mean.
pub fn cmd_mse_study(cfg: &ExperimentConfig) -> Result<(Vec<MseRow>, Vec<Check>)> {
    if cfg.repetitions < 10 {
        return Err(Error::Config(format!(
            "field 'repetitions': the study needs at least 10 runs, got {}",
            cfg.repetitions
        )));
    }
    let out = prepare_out(cfg)?;
    let mut rows = Vec::new();
    let mut runs = create(&out, "mse_runs.csv")?;
    writeln!(runs, "strategy,eps,repetition,seed,mean,3sigma")?;
    for strategy in [Strategy::Nested, Strategy::Remeshed] {
        let scfg = cfg.clone().with_strategy(strategy);
        let built = BuiltProblem::build(&scfg)?;
        let problem = built.level_problem();
        let e_ref = built
            .reference_mean(&scfg)?
            .ok_or_else(|| Error::InvalidArgument("the study needs a reference mean for this problem".into()))?;
        for &eps in &cfg.eps {
            let mut means = Vec::new();
            let mut var = 0.0;
            for r in 0..cfg.repetitions {
                let seed = cfg.seed.wrapping_add(r as u64);
                let res = mlmc_run(problem, eps, seed, &scfg.mlmc)?;
                writeln!(
                    runs,
                    "{strategy},{:.16e},{r},{seed},{:.16e},{:.16e}",
                    eps, res.mean, res.confidence_halfwidth
                )?;
                means.push(res.mean);
                var += res.estimator_variance;
            }
            let mse = means.iter().map(|m| (m - e_ref).powi(2)).sum::<f64>() / means.len() as f64;
            rows.push(MseRow {
                strategy,
                eps,
                mse,
                sigma: (var / cfg.repetitions as f64).sqrt(),
                means,
            });
        }
    }
    runs.flush()?;
    let mut f = create(&out, "mse_study.csv")?;
    writeln!(f, "strategy,eps,mse,eps_sq,pass")?;
    let mut checks = Vec::new();
    for r in &rows {
        writeln!(f, "{},{:.16e},{:.16e},{:.16e},{}", r.strategy, r.eps, r.mse, r.eps * r.eps, r.passed())?;
        checks.push(Check::new(
            format!("mse_{}_eps_{}", r.strategy, eps_tag(r.eps)),
            r.mse,
            0.0,
            r.eps * r.eps,
        ));
    }
    f.flush()?;
    for &eps in &cfg.eps {
        let pick = |s: Strategy| rows.iter().find(|r| r.strategy == s && r.eps == eps).unwrap();
        let (n, m) = (pick(Strategy::Nested), pick(Strategy::Remeshed));
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        checks.push(Check::new(
            format!("strategy_gap_eps_{}", eps_tag(eps)),
            (avg(&n.means) - avg(&m.means)).abs(),
            0.0,
            3.0 * (n.sigma + m.sigma),
        ));
    }
    write_checks(&out, "mse_checks.csv", &checks)?;
    Ok((rows, checks))
}

/// Reference values of the configured problem, written as
/// `quantity,value` rows.
pub fn cmd_oracle(cfg: &ExperimentConfig) -> Result<Vec<(String, f64)>> {
    let out = prepare_out(cfg)?;
    let built = BuiltProblem::build(cfg)?;
    let mut values = Vec::new();
    if let BuiltProblem::Coax(p) = &built {
        let nominal = p.params(&p.input_model().nominal())?;
        values.push(("static_energy_nominal".to_string(), static_coax_energy(&nominal)));
        if nominal.omega > 0.0 {
            values.push(("skin_depth".to_string(), nominal.skin_depth()));
        }
    }
    if let Some(e) = built.nominal_exact(cfg)? {
        values.push(("energy_nominal".to_string(), e));
    }
    if let Some(e) = built.reference_mean(cfg)? {
        values.push(("energy_mean".to_string(), e));
    }
    let mut f = create(&out, "oracle.csv")?;
    writeln!(f, "quantity,value")?;
    for (k, v) in &values {
        writeln!(f, "{k},{v:.16e}")?;
    }
    f.flush()?;
    Ok(values)
}
