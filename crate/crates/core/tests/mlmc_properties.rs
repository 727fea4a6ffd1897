//! Estimator invariants on synthetic problems with known answers.

use magmlmc::mlmc::{
    estimate_rates, level_correction_estimate, mc_baseline_cost, mc_estimate, mlmc_run, optimal_samples, MlmcConfig,
};
use magmlmc::problems::{ConstantProblem, LevelProblem, PowerLawProblem};
use magmlmc::random::{substream, RandomInputModel, SampleVector, UniformParam};
use magmlmc::{Error, Result};
use proptest::prelude::*;

fn random_power_law(levels: usize) -> PowerLawProblem {
    let model = RandomInputModel::new(vec![UniformParam::new("c", 2.0, 1.0), UniformParam::new("a", 0.5, 0.5)]).unwrap();
    PowerLawProblem::new(model, 1.0, 0.5, 2.0, levels).unwrap()
}

/// Same quantity on every level, so all corrections vanish.
struct FlatLevels(RandomInputModel);

impl LevelProblem for FlatLevels {
    fn name(&self) -> &str {
        "flat"
    }
    fn input_model(&self) -> &RandomInputModel {
        &self.0
    }
    fn max_level(&self) -> usize {
        4
    }
    fn evaluate(&self, _level: usize, y: &SampleVector) -> Result<f64> {
        Ok(y.values[0].sin())
    }
    fn cost(&self, level: usize) -> Result<f64> {
        Ok(4f64.powi(level as i32))
    }
    fn h(&self, level: usize) -> Result<f64> {
        Ok(0.5f64.powi(level as i32))
    }
}

/// Fails on one chosen sample of level 1.
struct Faulty(PowerLawProblem);

impl LevelProblem for Faulty {
    fn name(&self) -> &str {
        "faulty"
    }
    fn input_model(&self) -> &RandomInputModel {
        self.0.input_model()
    }
    fn max_level(&self) -> usize {
        self.0.max_level()
    }
    fn evaluate(&self, level: usize, y: &SampleVector) -> Result<f64> {
        if level == 1 && y.index == 7 {
            return Err(Error::Singular("injected".into()));
        }
        self.0.evaluate(level, y)
    }
    fn cost(&self, level: usize) -> Result<f64> {
        self.0.cost(level)
    }
    fn h(&self, level: usize) -> Result<f64> {
        self.0.h(level)
    }
}

#[test]
fn uniform_draws_have_clt_scale_moments() {
    let model = RandomInputModel::new(vec![UniformParam::new("u", 0.5, 0.5)]).unwrap();
    let xs: Vec<f64> = (0..100_000).map(|i| model.sample(&substream(11, 0, i)).values[0]).collect();
    let (m, v) = mc_estimate(&xs).unwrap();
    assert!((m - 0.5).abs() < 0.004);
    assert!((v - 1.0 / 12.0).abs() < 0.003);
}

#[test]
fn identical_levels_give_zero_corrections() {
    let p = FlatLevels(RandomInputModel::new(vec![UniformParam::new("x", 0.0, 2.0)]).unwrap());
    let s = level_correction_estimate(&p, 2, 40, 3).unwrap();
    assert!(s.corrections().iter().all(|&c| c == 0.0));
    assert_eq!(s.variance, 0.0);
    assert!(s.fine_variance > 0.0);
}

#[test]
fn telescoping_with_exact_levels() {
    // zero-width inputs make every level estimate exact
    let p = PowerLawProblem::deterministic(1.0, 1.0, 0.5, 2.0, 8);
    let cfg = MlmcConfig {
        fixed_level: Some(5),
        ..Default::default()
    };
    let r = mlmc_run(&p, 1e-3, 1, &cfg).unwrap();
    assert!((r.mean - p.exact_mean(5)).abs() < 1e-15);
    assert_eq!(r.estimator_variance, 0.0);
    assert!(r.samples().iter().all(|&n| n == 50));
}

#[test]
fn selected_level_for_unit_power_law() {
    let p = PowerLawProblem::deterministic(1.0, 1.0, 0.5, 2.0, 8);
    let r = mlmc_run(&p, 1e-2, 1, &MlmcConfig::default()).unwrap();
    assert_eq!(r.finest_level, 4);
    assert_eq!(r.per_level[4].h, 0.0625);
}

#[test]
fn variance_budget_is_met() {
    let p = random_power_law(8);
    for eps in [3e-2, 1e-2, 5e-3] {
        let r = mlmc_run(&p, eps, 9, &MlmcConfig::default()).unwrap();
        assert!(r.estimator_variance <= 0.5 * eps * eps * 1.1, "{eps}: {}", r.estimator_variance);
        let book: f64 = r.per_level.iter().map(|s| s.variance / s.n_samples as f64).sum();
        assert!((book - r.estimator_variance).abs() <= 1e-14 * book);
        let cost: f64 = r.per_level.iter().map(|s| s.n_samples as f64 * s.cost).sum();
        assert_eq!(cost, r.total_cost);
        assert_eq!(r.confidence_halfwidth, 3.0 * r.estimator_variance.sqrt());
    }
}

#[test]
fn pilot_samples_are_kept() {
    let p = random_power_law(8);
    let r = mlmc_run(&p, 1e-2, 4, &MlmcConfig::default()).unwrap();
    let pilot = level_correction_estimate(&p, 0, 50, 4).unwrap();
    assert_eq!(&r.per_level[0].corrections()[..50], pilot.corrections());
}

#[test]
fn unbiased_over_repetitions() {
    let p = random_power_law(8);
    let cfg = MlmcConfig {
        fixed_level: Some(3),
        ..Default::default()
    };
    let runs: Vec<(f64, f64)> = (0..200)
        .map(|s| {
            let r = mlmc_run(&p, 5e-2, 100 + s, &cfg).unwrap();
            (r.mean, r.estimator_variance)
        })
        .collect();
    let avg = runs.iter().map(|r| r.0).sum::<f64>() / 200.0;
    let sigma = (runs.iter().map(|r| r.1).sum::<f64>() / 200.0).sqrt();
    let exact = p.exact_mean(3);
    assert!((avg - exact).abs() < 4.0 * sigma / 200f64.sqrt(), "{avg} {exact} {sigma}");
}

#[test]
fn worker_count_does_not_change_results() {
    let p = random_power_law(8);
    let base = mlmc_run(&p, 1e-2, 21, &MlmcConfig { workers: Some(1), ..Default::default() }).unwrap();
    for w in [2, 3, 8] {
        let r = mlmc_run(&p, 1e-2, 21, &MlmcConfig { workers: Some(w), ..Default::default() }).unwrap();
        assert_eq!(r, base, "{w} workers");
    }
    let other = mlmc_run(&p, 1e-2, 22, &MlmcConfig { workers: Some(1), ..Default::default() }).unwrap();
    assert_ne!(other.mean, base.mean);
}

#[test]
fn failing_sample_is_reported_with_its_index() {
    let p = Faulty(random_power_law(6));
    match mlmc_run(&p, 1e-2, 1, &MlmcConfig::default()) {
        Err(Error::Sample { level, sample, source }) => {
            assert_eq!((level, sample), (1, 7));
            assert!(matches!(*source, Error::Singular(_)));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn constant_quantity_has_zero_spread() {
    let model = RandomInputModel::new(vec![UniformParam::new("x", 1.0, 1.0)]).unwrap();
    let p = ConstantProblem::new(-4.25, model, 5);
    let r = mlmc_run(&p, 1e-6, 3, &MlmcConfig::default()).unwrap();
    assert_eq!((r.mean, r.finest_level, r.estimator_variance), (-4.25, 0, 0.0));
}

#[test]
fn baseline_halving_eps_quadruples_samples() {
    let (n1, _) = mc_baseline_cost(0.37, 10.0, 1e-2);
    let (n2, _) = mc_baseline_cost(0.37, 10.0, 5e-3);
    assert!(n2 >= 4 * n1 - 3 && n2 <= 4 * n1);
}

proptest! {
    #[test]
    fn allocation_meets_variance_target(
        v in prop::collection::vec(1e-8f64..10.0, 1..7),
        c in prop::collection::vec(1.0f64..1e5, 7),
        eps in 1e-3f64..1.0,
    ) {
        let c = &c[..v.len()];
        let n = optimal_samples(&v, c, eps, 10).unwrap();
        let var: f64 = v.iter().zip(&n).map(|(v, &n)| v / n as f64).sum();
        prop_assert!(var <= eps * eps * (1.0 + 1e-12));
        prop_assert!(n.iter().all(|&n| n >= 10));
    }

    #[test]
    fn allocation_decreases_with_level(
        v0 in 1e-4f64..1.0,
        decay in 2.0f64..20.0,
        growth in 2.0f64..8.0,
        levels in 2usize..6,
    ) {
        let v: Vec<f64> = (0..levels).map(|l| v0 / decay.powi(l as i32)).collect();
        let c: Vec<f64> = (0..levels).map(|l| 100.0 * growth.powi(l as i32)).collect();
        let n = optimal_samples(&v, &c, 1e-4, 0).unwrap();
        prop_assert!(n.windows(2).all(|w| w[1] < w[0]), "{:?}", n);
    }

    #[test]
    fn rates_of_exact_power_laws(
        c1 in 1e-6f64..1e3,
        c2 in 1e-9f64..1e3,
        alpha in 0.5f64..4.0,
        beta in 0.5f64..6.0,
        h0 in 1e-3f64..1.0,
    ) {
        let h: Vec<f64> = (0..5).map(|l| h0 * 0.5f64.powi(l)).collect();
        let e: Vec<f64> = h.iter().map(|h| c1 * h.powf(alpha)).collect();
        let v: Vec<f64> = h.iter().map(|h| c2 * h.powf(beta)).collect();
        let r = estimate_rates(&h, &e, &v).unwrap();
        prop_assert!((r.alpha - alpha).abs() < 1e-9);
        prop_assert!((r.beta - beta).abs() < 1e-9);
    }

    #[test]
    fn mc_estimate_is_shift_invariant(xs in prop::collection::vec(-1e3f64..1e3, 2..50), shift in -1e3f64..1e3) {
        let (m, v) = mc_estimate(&xs).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let (ms, vs) = mc_estimate(&shifted).unwrap();
        prop_assert!((ms - m - shift).abs() < 1e-9);
        prop_assert!((vs - v).abs() <= 1e-7 * v.max(1.0));
        prop_assert!(v >= 0.0);
    }
}
