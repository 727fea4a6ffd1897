//! Stochastic problems evaluated level by level: the cable benchmark, its
//! many-layer variant and synthetic problems with known answers.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_with_plan, magnetic_energy, solve, MaterialField, PlanCache, MU0};
use crate::mesh::{generate_layered_mesh, level_mesh_radii, level_mesh_with, HierarchySpec, Mesh, Region};
use crate::oracles::{radial_energy, CoaxParams, RadialProfile};
use crate::random::{RandomInputModel, SampleVector, UniformParam};

/// A quantity of interest `W_l(y)` on a hierarchy of discretizations.
pub trait LevelProblem: Sync {
    fn name(&self) -> &str;
    fn input_model(&self) -> &RandomInputModel;
    /// Finest level that can be evaluated.
    fn max_level(&self) -> usize;
    fn evaluate(&self, level: usize, y: &SampleVector) -> Result<f64>;
    /// Cost units of one evaluation (degrees of freedom of the level).
    fn cost(&self, level: usize) -> Result<f64>;
    /// Mesh size of the level.
    fn h(&self, level: usize) -> Result<f64>;
}

fn check_level(level: usize, max: usize) -> Result<()> {
    if level > max {
        Err(Error::InvalidArgument(format!("level {level} beyond the finest level {max}")))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FieldRegime {
    Static,
    Harmonic { frequency_hz: f64 },
}

impl FieldRegime {
    pub fn omega(&self) -> f64 {
        match *self {
            FieldRegime::Static => 0.0,
            FieldRegime::Harmonic { frequency_hz } => 2.0 * std::f64::consts::PI * frequency_hz,
        }
    }
}

/// Names of the cable inputs that may be random.
pub const R1: &str = "r1";
pub const CURRENT: &str = "current";
pub const MU_R: &str = "mu_r";

/// Default uniform inputs of the cable benchmark.
pub fn coax_input_model() -> RandomInputModel {
    RandomInputModel::new(vec![
        UniformParam::new(R1, 12.7e-3, 2.54e-3),
        UniformParam::new(CURRENT, 100.0, 10.0),
        UniformParam::new(MU_R, 1000.0, 400.0),
    ])
    .expect("default cable model is valid")
}

/// Per-level nominal data computed on first use.
struct LevelInfo {
    slots: Vec<OnceLock<std::result::Result<(usize, f64), Error>>>,
}

impl LevelInfo {
    fn new(levels: usize) -> Self {
        Self {
            slots: (0..=levels).map(|_| OnceLock::new()).collect(),
        }
    }

    fn get(&self, level: usize, build: impl FnOnce() -> Result<Mesh>) -> Result<(usize, f64)> {
        self.slots[level]
            .get_or_init(|| build().map(|m| (m.n_dof(), m.h())))
            .clone()
    }
}

fn region_area(mesh: &Mesh, region: Region) -> f64 {
    (0..mesh.n_triangles())
        .filter(|&t| mesh.regions()[t] == region)
        .map(|t| mesh.triangle_area(t))
        .sum()
}

fn fe_energy(
    plans: &PlanCache,
    mesh: &Mesh,
    nu: Vec<f64>,
    sigma: Vec<f64>,
    current: f64,
    l_z: f64,
    omega: f64,
) -> Result<f64> {
    // impose the total current on the discrete core, whatever its polygon
    let mut j_stat = vec![0.0; nu.len()];
    j_stat[0] = current / region_area(mesh, Region::WIRE);
    let mat = MaterialField {
        h_pm: vec![[0.0; 2]; nu.len()],
        nu,
        sigma,
        j_stat,
    };
    let sys = assemble_with_plan(plans.get(mesh), mesh, &mat, l_z)?;
    let sol = solve(&sys, omega)?;
    Ok(magnetic_energy(&sys, &sol))
}

/// The three-region cable with random inner pipe radius, current and pipe
/// permeability. Inputs missing from the model stay at `base`.
pub struct CoaxProblem {
    name: String,
    model: RandomInputModel,
    base: CoaxParams,
    hierarchy: HierarchySpec,
    idx: [Option<usize>; 3],
    plans: PlanCache,
    info: LevelInfo,
}

impl CoaxProblem {
    pub fn new(
        name: impl Into<String>,
        model: RandomInputModel,
        base: CoaxParams,
        hierarchy: HierarchySpec,
    ) -> Result<Self> {
        base.validate()?;
        hierarchy.validate()?;
        let idx = [model.index_of(R1), model.index_of(CURRENT), model.index_of(MU_R)];
        for p in model.params() {
            if ![R1, CURRENT, MU_R].contains(&p.name.as_str()) {
                return Err(Error::InvalidModel(format!("unknown cable input '{}'", p.name)));
            }
        }
        let g = base.geometry;
        if let Some(i) = idx[0] {
            let p = &model.params()[i];
            if !(p.lower() > g.r0 && p.upper() < g.r2) {
                return Err(Error::InvalidModel(format!(
                    "r1 support [{}, {}] must lie strictly inside ({}, {})",
                    p.lower(),
                    p.upper(),
                    g.r0,
                    g.r2
                )));
            }
        }
        if let Some(i) = idx[2] {
            if !(model.params()[i].lower() > 0.0) {
                return Err(Error::InvalidModel("mu_r support must be positive".into()));
            }
        }
        Ok(Self {
            name: name.into(),
            info: LevelInfo::new(hierarchy.levels),
            model,
            base,
            hierarchy,
            idx,
            plans: PlanCache::new(),
        })
    }

    /// Benchmark cable with the default inputs.
    pub fn benchmark(regime: FieldRegime, hierarchy: HierarchySpec) -> Result<Self> {
        let name = match regime {
            FieldRegime::Static => "coax-static",
            FieldRegime::Harmonic { .. } => "coax-harmonic",
        };
        Self::new(name, coax_input_model(), CoaxParams::nominal(regime.omega()), hierarchy)
    }

    pub fn hierarchy(&self) -> &HierarchySpec {
        &self.hierarchy
    }

    pub fn base(&self) -> &CoaxParams {
        &self.base
    }

    /// Cable parameters realized by `y`.
    pub fn params(&self, y: &SampleVector) -> Result<CoaxParams> {
        if y.values.len() != self.model.dimension() {
            return Err(Error::InvalidArgument(format!(
                "sample has {} values, model has {}",
                y.values.len(),
                self.model.dimension()
            )));
        }
        let mut p = self.base;
        if let Some(i) = self.idx[0] {
            p.geometry = p.geometry.with_r1(y.values[i])?;
        }
        if let Some(i) = self.idx[1] {
            p.current = y.values[i];
        }
        if let Some(i) = self.idx[2] {
            p.mu_r = y.values[i];
        }
        p.validate()?;
        Ok(p)
    }

    pub fn mesh(&self, level: usize, p: &CoaxParams) -> Result<Mesh> {
        check_level(level, self.hierarchy.levels)?;
        level_mesh_radii(&p.geometry.radii(), &self.hierarchy, level)
    }

    /// Radial reference for the same realization.
    pub fn oracle(&self, y: &SampleVector, n_points: usize) -> Result<f64> {
        let p = self.params(y)?;
        radial_energy(&RadialProfile::from_coax(&p), p.omega, n_points)
    }

    pub fn plan_count(&self) -> usize {
        self.plans.len()
    }
}

impl LevelProblem for CoaxProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_model(&self) -> &RandomInputModel {
        &self.model
    }

    fn max_level(&self) -> usize {
        self.hierarchy.levels
    }

    fn evaluate(&self, level: usize, y: &SampleVector) -> Result<f64> {
        let p = self.params(y)?;
        let mesh = self.mesh(level, &p)?;
        fe_energy(
            &self.plans,
            &mesh,
            vec![1.0 / MU0, 1.0 / MU0, 1.0 / (p.mu_r * MU0)],
            vec![0.0, 0.0, p.sigma_pipe],
            p.current,
            p.geometry.l_z,
            p.omega,
        )
    }

    fn cost(&self, level: usize) -> Result<f64> {
        check_level(level, self.hierarchy.levels)?;
        let g = self.base.geometry;
        Ok(self.info.get(level, || level_mesh_radii(&g.radii(), &self.hierarchy, level))?.0 as f64)
    }

    fn h(&self, level: usize) -> Result<f64> {
        check_level(level, self.hierarchy.levels)?;
        let g = self.base.geometry;
        Ok(self.info.get(level, || level_mesh_radii(&g.radii(), &self.hierarchy, level))?.1)
    }
}

/// Cable whose pipe is split into `n_layers` concentric layers of equal
/// width, each with its own uniform relative reluctivity `nu_r_k`
/// (reluctivity over that of vacuum).
pub struct LayeredCableProblem {
    name: String,
    model: RandomInputModel,
    base: CoaxParams,
    n_layers: usize,
    hierarchy: HierarchySpec,
    plans: PlanCache,
    info: LevelInfo,
}

impl LayeredCableProblem {
    pub fn new(
        n_layers: usize,
        nu_r: (f64, f64),
        base: CoaxParams,
        hierarchy: HierarchySpec,
    ) -> Result<Self> {
        if n_layers == 0 {
            return Err(Error::InvalidModel("need at least one layer".into()));
        }
        if !(nu_r.0 - nu_r.1 > 0.0) {
            return Err(Error::InvalidModel("layer reluctivities must stay positive".into()));
        }
        base.validate()?;
        hierarchy.validate()?;
        let model = RandomInputModel::new(
            (1..=n_layers)
                .map(|k| UniformParam::new(format!("nu_r_{k}"), nu_r.0, nu_r.1))
                .collect(),
        )?;
        Ok(Self {
            name: format!("layered-{n_layers}"),
            model,
            base,
            n_layers,
            info: LevelInfo::new(hierarchy.levels),
            hierarchy,
            plans: PlanCache::new(),
        })
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn omega(&self) -> f64 {
        self.base.omega
    }

    /// Interface radii: core, gap, then the layer boundaries.
    pub fn radii(&self) -> Vec<f64> {
        let g = self.base.geometry;
        let mut r = vec![g.r0, g.r1];
        for k in 1..self.n_layers {
            r.push(g.r1 + (g.r2 - g.r1) * k as f64 / self.n_layers as f64);
        }
        r.push(g.r2);
        r
    }

    fn nu(&self, y: &SampleVector) -> Result<Vec<f64>> {
        if y.values.len() != self.n_layers {
            return Err(Error::InvalidArgument(format!(
                "sample has {} values, expected {}",
                y.values.len(),
                self.n_layers
            )));
        }
        let mut nu = vec![1.0 / MU0, 1.0 / MU0];
        for &v in &y.values {
            if !(v > 0.0) {
                return Err(Error::InvalidMaterial(format!("layer reluctivity {v}")));
            }
            nu.push(v / MU0);
        }
        Ok(nu)
    }

    pub fn profile(&self, y: &SampleVector) -> Result<RadialProfile> {
        let nu = self.nu(y)?;
        let mut sigma = vec![0.0; nu.len()];
        sigma[2..].fill(self.base.sigma_pipe);
        Ok(RadialProfile {
            outer: self.radii(),
            nu,
            sigma,
            current: self.base.current,
            l_z: self.base.geometry.l_z,
        })
    }

    /// Radial reference for the same realization.
    pub fn oracle(&self, y: &SampleVector, n_points: usize) -> Result<f64> {
        radial_energy(&self.profile(y)?, self.base.omega, n_points)
    }

    /// Exact mean of the static energy. The energy is affine in every layer
    /// permeability `1/nu`, so each layer enters through `E[1/nu_r]`.
    pub fn static_mean(&self) -> Result<f64> {
        let mut profile = self.profile(&self.model.nominal())?;
        for (k, p) in self.model.params().iter().enumerate() {
            let inv_mean = if p.half_width == 0.0 {
                1.0 / p.mean
            } else {
                (p.upper() / p.lower()).ln() / (p.upper() - p.lower())
            };
            profile.nu[2 + k] = 1.0 / (inv_mean * MU0);
        }
        Ok(profile.static_energy())
    }
}

impl LevelProblem for LayeredCableProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_model(&self) -> &RandomInputModel {
        &self.model
    }

    fn max_level(&self) -> usize {
        self.hierarchy.levels
    }

    fn evaluate(&self, level: usize, y: &SampleVector) -> Result<f64> {
        check_level(level, self.hierarchy.levels)?;
        let nu = self.nu(y)?;
        let mesh = level_mesh_with(&self.radii(), &self.hierarchy, level, generate_layered_mesh)?;
        let mut sigma = vec![0.0; nu.len()];
        sigma[2..].fill(self.base.sigma_pipe);
        fe_energy(
            &self.plans,
            &mesh,
            nu,
            sigma,
            self.base.current,
            self.base.geometry.l_z,
            self.base.omega,
        )
    }

    fn cost(&self, level: usize) -> Result<f64> {
        check_level(level, self.hierarchy.levels)?;
        Ok(self.info.get(level, || level_mesh_with(&self.radii(), &self.hierarchy, level, generate_layered_mesh))?.0 as f64)
    }

    fn h(&self, level: usize) -> Result<f64> {
        check_level(level, self.hierarchy.levels)?;
        Ok(self.info.get(level, || level_mesh_with(&self.radii(), &self.hierarchy, level, generate_layered_mesh))?.1)
    }
}

/// `W_l(y) = y_0 + (1 + y_1) h_l^k` with `h_l = h0 delta^l` and cost
/// `h_l^-2`. With zero half-widths it is the deterministic pure power law.
pub struct PowerLawProblem {
    model: RandomInputModel,
    pub h0: f64,
    pub delta: f64,
    pub order: f64,
    pub levels: usize,
}

impl PowerLawProblem {
    pub fn new(model: RandomInputModel, h0: f64, delta: f64, order: f64, levels: usize) -> Result<Self> {
        if model.dimension() != 2 {
            return Err(Error::InvalidModel("power-law problem takes exactly two inputs".into()));
        }
        if !(h0 > 0.0 && delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument("need h0 > 0 and delta in (0, 1)".into()));
        }
        Ok(Self {
            model,
            h0,
            delta,
            order,
            levels,
        })
    }

    /// Deterministic `c + h^k`.
    pub fn deterministic(c: f64, h0: f64, delta: f64, order: f64, levels: usize) -> Self {
        let model = RandomInputModel::new(vec![UniformParam::new("c", c, 0.0), UniformParam::new("a", 0.0, 0.0)])
            .expect("zero-width model is valid");
        Self::new(model, h0, delta, order, levels).expect("valid power law")
    }

    /// `E[W_l]`.
    pub fn exact_mean(&self, level: usize) -> f64 {
        let p = self.model.params();
        p[0].mean + (1.0 + p[1].mean) * self.h_at(level).powf(self.order)
    }

    fn h_at(&self, level: usize) -> f64 {
        self.h0 * self.delta.powi(level as i32)
    }
}

impl LevelProblem for PowerLawProblem {
    fn name(&self) -> &str {
        "power-law"
    }

    fn input_model(&self) -> &RandomInputModel {
        &self.model
    }

    fn max_level(&self) -> usize {
        self.levels
    }

    fn evaluate(&self, level: usize, y: &SampleVector) -> Result<f64> {
        check_level(level, self.levels)?;
        Ok(y.values[0] + (1.0 + y.values[1]) * self.h_at(level).powf(self.order))
    }

    fn cost(&self, level: usize) -> Result<f64> {
        check_level(level, self.levels)?;
        Ok(self.h_at(level).powi(-2))
    }

    fn h(&self, level: usize) -> Result<f64> {
        check_level(level, self.levels)?;
        Ok(self.h_at(level))
    }
}

/// `W_l(y) = value` on every level; costs `4^l`.
pub struct ConstantProblem {
    model: RandomInputModel,
    pub value: f64,
    pub levels: usize,
}

impl ConstantProblem {
    pub fn new(value: f64, model: RandomInputModel, levels: usize) -> Self {
        Self { model, value, levels }
    }
}

impl LevelProblem for ConstantProblem {
    fn name(&self) -> &str {
        "constant"
    }

    fn input_model(&self) -> &RandomInputModel {
        &self.model
    }

    fn max_level(&self) -> usize {
        self.levels
    }

    fn evaluate(&self, level: usize, _y: &SampleVector) -> Result<f64> {
        check_level(level, self.levels)?;
        Ok(self.value)
    }

    fn cost(&self, level: usize) -> Result<f64> {
        check_level(level, self.levels)?;
        Ok(4f64.powi(level as i32))
    }

    fn h(&self, level: usize) -> Result<f64> {
        check_level(level, self.levels)?;
        Ok(0.5f64.powi(level as i32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{CoaxGeometry, Strategy};
    use crate::oracles::static_coax_energy;
    use crate::random::substream;

    fn spec(levels: usize, strategy: Strategy) -> HierarchySpec {
        HierarchySpec {
            h0: 25.4e-3 / 6.0,
            delta: 0.5,
            levels,
            strategy,
        }
    }

    #[test]
    fn nominal_sample_matches_deterministic_solve() {
        let prob = CoaxProblem::benchmark(FieldRegime::Static, spec(1, Strategy::Remeshed)).unwrap();
        let y = prob.input_model().nominal();
        let w = prob.evaluate(1, &y).unwrap();
        // same mesh, same materials, assembled without the plan cache
        let g = CoaxGeometry::nominal();
        let mesh = level_mesh_radii(&g.radii(), prob.hierarchy(), 1).unwrap();
        let wire = region_area(&mesh, Region::WIRE);
        let mat = MaterialField {
            nu: vec![1.0 / MU0, 1.0 / MU0, 1.0 / (1000.0 * MU0)],
            sigma: vec![0.0, 0.0, 58e6],
            j_stat: vec![100.0 / wire, 0.0, 0.0],
            h_pm: vec![[0.0; 2]; 3],
        };
        let sys = crate::fem::assemble(&mesh, &mat, 1.0).unwrap();
        let direct = magnetic_energy(&sys, &solve(&sys, 0.0).unwrap());
        assert_eq!(w.to_bits(), direct.to_bits());
    }

    #[test]
    fn energy_increases_with_permeability() {
        let prob = CoaxProblem::benchmark(FieldRegime::Static, spec(0, Strategy::Remeshed)).unwrap();
        let mut y = prob.input_model().nominal();
        let mut last = 0.0;
        for mu in [600.0, 800.0, 1000.0, 1200.0, 1400.0] {
            y.values[2] = mu;
            let w = prob.evaluate(0, &y).unwrap();
            assert!(w > last);
            last = w;
        }
    }

    #[test]
    fn r1_support_must_stay_inside() {
        let model = RandomInputModel::new(vec![UniformParam::new(R1, 12.7e-3, 12.0e-3)]).unwrap();
        let err = CoaxProblem::new("x", model, CoaxParams::nominal(0.0), spec(0, Strategy::Nested));
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn missing_inputs_stay_nominal() {
        let model = RandomInputModel::new(vec![UniformParam::new(MU_R, 1000.0, 0.0)]).unwrap();
        let prob = CoaxProblem::new("x", model, CoaxParams::nominal(0.0), spec(0, Strategy::Remeshed)).unwrap();
        let p = prob.params(&prob.input_model().nominal()).unwrap();
        assert_eq!(p, CoaxParams::nominal(0.0));
        let w = prob.evaluate(0, &prob.input_model().nominal()).unwrap();
        let exact = static_coax_energy(&p);
        assert!((w - exact).abs() / exact < 5e-3);
    }

    #[test]
    fn layered_nominal_matches_plain_cable() {
        let hs = spec(1, Strategy::Remeshed);
        let layered = LayeredCableProblem::new(4, (1e-3, 0.0), CoaxParams::nominal(0.0), hs).unwrap();
        let plain = CoaxProblem::benchmark(FieldRegime::Static, hs).unwrap();
        let wl = layered.evaluate(1, &layered.input_model().nominal()).unwrap();
        let wp = plain.evaluate(1, &plain.input_model().nominal()).unwrap();
        // extra rings change the discretization, not the continuous problem
        assert!((wl - wp).abs() / wp < 2e-3, "{wl} {wp}");
        let exact = layered.static_mean().unwrap();
        assert!((exact - static_coax_energy(&CoaxParams::nominal(0.0))).abs() < 1e-14);
    }

    #[test]
    fn power_law_levels() {
        let p = PowerLawProblem::deterministic(1.0, 0.5, 0.5, 2.0, 4);
        let y = p.input_model().nominal();
        assert_eq!(p.evaluate(0, &y).unwrap(), 1.25);
        assert_eq!(p.evaluate(1, &y).unwrap(), 1.0625);
        assert!(p.evaluate(5, &y).is_err());
    }

    #[test]
    fn support_samples_all_solve() {
        let prob = CoaxProblem::benchmark(FieldRegime::Harmonic { frequency_hz: 0.2 }, spec(0, Strategy::Nested)).unwrap();
        for i in 0..200 {
            let y = prob.input_model().sample(&substream(3, 0, i));
            assert!(prob.evaluate(0, &y).unwrap() > 0.0);
        }
    }
}
