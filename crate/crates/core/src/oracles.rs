//! Reference values for the cable benchmark that do not touch the 2D code
//! path: the closed-form static energy, a 1D radial eddy-current solver and
//! tensor Gauss-Legendre collocation over the uniform inputs.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::MU0;
use crate::mesh::CoaxGeometry;
use crate::random::{RandomInputModel, SampleVector};
use crate::stats::compensated_sum;

/// Largest input dimension accepted by tensor collocation.
pub const MAX_COLLOCATION_DIM: usize = 4;

/// Smallest grid accepted by the radial solver.
pub const MIN_RADIAL_POINTS: usize = 1000;

const POINTS_PER_SKIN_DEPTH: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoaxParams {
    pub geometry: CoaxGeometry,
    /// Total wire current in A.
    pub current: f64,
    pub mu_r: f64,
    /// Pipe conductivity in S/m.
    pub sigma_pipe: f64,
    /// Angular frequency in rad/s.
    pub omega: f64,
}

impl CoaxParams {
    /// Nominal cable: 100 A, relative permeability 1000, 58 MS/m.
    pub fn nominal(omega: f64) -> Self {
        Self {
            geometry: CoaxGeometry::nominal(),
            current: 100.0,
            mu_r: 1000.0,
            sigma_pipe: 58e6,
            omega,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !self.current.is_finite() || !(self.mu_r > 0.0) || !(self.sigma_pipe >= 0.0) || !self.omega.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid cable parameters {self:?}")));
        }
        Ok(())
    }

    /// Skin depth in the pipe, infinite without eddy currents.
    pub fn skin_depth(&self) -> f64 {
        skin_depth(self.omega, self.mu_r * MU0, self.sigma_pipe)
    }
}

pub fn skin_depth(omega: f64, mu: f64, sigma: f64) -> f64 {
    if omega == 0.0 || sigma == 0.0 {
        f64::INFINITY
    } else {
        (2.0 / (omega.abs() * mu * sigma)).sqrt()
    }
}

/// Static energy of the cable from the piecewise `1/r` field.
pub fn static_coax_energy(p: &CoaxParams) -> f64 {
    let g = &p.geometry;
    g.l_z * MU0 * p.current * p.current / (4.0 * PI)
        * (0.25 + (g.r1 / g.r0).ln() + p.mu_r * (g.r2 / g.r1).ln())
}

/// `E[ln x]` for `x` uniform on `[lo, hi]`.
pub fn mean_ln_uniform(lo: f64, hi: f64) -> f64 {
    if hi == lo {
        return lo.ln();
    }
    let f = |x: f64| x * x.ln() - x;
    (f(hi) - f(lo)) / (hi - lo)
}

/// Closed-form mean of the static energy over independent uniform current,
/// inner pipe radius and permeability, each given as `(mean, half_width)`.
pub fn static_coax_mean(geometry: &CoaxGeometry, current: (f64, f64), r1: (f64, f64), mu_r: (f64, f64)) -> f64 {
    let e_i2 = current.0 * current.0 + (2.0 * current.1).powi(2) / 12.0;
    let e_ln_r1 = mean_ln_uniform(r1.0 - r1.1, r1.0 + r1.1);
    geometry.l_z * MU0 * e_i2 / (4.0 * PI)
        * (0.25 + e_ln_r1 - geometry.r0.ln() + mu_r.0 * (geometry.r2.ln() - e_ln_r1))
}

/// Axisymmetric layered cross-section: region `k` spans
/// `outer[k-1]..outer[k]` (`0..outer[0]` for the core). The impressed
/// current flows uniformly through the core.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub outer: Vec<f64>,
    pub nu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub current: f64,
    pub l_z: f64,
}

impl RadialProfile {
    pub fn from_coax(p: &CoaxParams) -> Self {
        let g = &p.geometry;
        Self {
            outer: vec![g.r0, g.r1, g.r2],
            nu: vec![1.0 / MU0, 1.0 / MU0, 1.0 / (p.mu_r * MU0)],
            sigma: vec![0.0, 0.0, p.sigma_pipe],
            current: p.current,
            l_z: g.l_z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.outer.len();
        if n == 0 || self.nu.len() != n || self.sigma.len() != n {
            return Err(Error::InvalidArgument("radial profile tables differ in length".into()));
        }
        if self.outer[0] <= 0.0 || self.outer.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGeometry(format!("radii must increase: {:?}", self.outer)));
        }
        if self.nu.iter().any(|&v| !(v > 0.0)) || self.sigma.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::InvalidMaterial("need nu > 0 and sigma >= 0".into()));
        }
        if !(self.l_z > 0.0) {
            return Err(Error::InvalidArgument("l_z must be positive".into()));
        }
        Ok(())
    }

    /// Static energy from the closed-form piecewise `1/r` field.
    pub fn static_energy(&self) -> f64 {
        let i = self.current;
        let mut e = 0.25 / self.nu[0];
        for k in 1..self.outer.len() {
            e += (self.outer[k] / self.outer[k - 1]).ln() / self.nu[k];
        }
        self.l_z * i * i / (4.0 * PI) * e
    }

    /// Elements per region for a grid of about `n` elements: a fifth in
    /// the core, the rest proportional to width, at least two each.
    fn allocation(&self, n: usize) -> Vec<usize> {
        let shell = *self.outer.last().unwrap() - self.outer[0];
        let mut out = vec![(n / 5).max(2)];
        let rest = (n - n / 5) as f64;
        for k in 1..self.outer.len() {
            let w = self.outer[k] - self.outer[k - 1];
            out.push(((rest * w / shell).round() as usize).max(2));
        }
        out
    }

    /// Smallest grid size meeting the skin-depth resolution rule.
    pub fn required_points(&self, omega: f64) -> usize {
        let shell = *self.outer.last().unwrap() - self.outer[0];
        let mut need = MIN_RADIAL_POINTS;
        for k in 1..self.outer.len() {
            let delta = skin_depth(omega, 1.0 / self.nu[k], self.sigma[k]);
            if delta.is_finite() {
                let w = self.outer[k] - self.outer[k - 1];
                let elems = (POINTS_PER_SKIN_DEPTH * w / delta).ceil();
                // the region receives 4/5 * n * w / shell elements
                need = need.max((elems * shell / w * 1.25).ceil() as usize + 1);
            }
        }
        need
    }
}

/// Energy of the axisymmetric eddy-current problem on a graded 1D grid.
///
/// Finite volumes on `d/dr(r nu dA/dr)` with the exact logarithmic flux
/// between nodes, lumped conductivity and load over the half cells, and
/// `A(r_outer) = 0`. Returns `1/2 l_z sum_e k_e |A_{e+1} - A_e|^2`,
/// evaluated as `1/2 l_z sum_e |q_e|^2 / k_e` from the element fluxes.
pub fn radial_energy(profile: &RadialProfile, omega: f64, n_points: usize) -> Result<f64> {
    profile.validate()?;
    if n_points < MIN_RADIAL_POINTS {
        return Err(Error::InvalidArgument(format!(
            "radial solver needs at least {MIN_RADIAL_POINTS} points, got {n_points}"
        )));
    }
    let alloc = profile.allocation(n_points);
    for k in 1..profile.outer.len() {
        let delta = skin_depth(omega, 1.0 / profile.nu[k], profile.sigma[k]);
        let h = (profile.outer[k] - profile.outer[k - 1]) / alloc[k] as f64;
        if h * POINTS_PER_SKIN_DEPTH > delta {
            return Err(Error::UnresolvedSkinDepth {
                skin_depth: delta,
                n_points,
                required: profile.required_points(omega),
            });
        }
    }

    let mut r = vec![0.0];
    let mut region = Vec::new();
    let mut inner = 0.0;
    for (k, (&outer, &m)) in profile.outer.iter().zip(&alloc).enumerate() {
        for j in 1..=m {
            r.push(if j == m { outer } else { inner + (outer - inner) * j as f64 / m as f64 });
            region.push(k);
        }
        inner = outer;
    }
    let n_el = region.len();
    let j_core = profile.current / (PI * profile.outer[0] * profile.outer[0]);

    // Node balance: q_i = q_{i-1} + s_i A_i - f_i with the element flux
    // q_i = k_i (A_{i+1} - A_i). Eliminating outward keeps q_i = P_i A_{i+1}
    // + R_i, which is exact flux integration wherever s vanishes, so no
    // potential differences are ever formed by cancellation.
    let mut k_el = vec![0.0; n_el];
    let mut s_node = vec![Complex64::new(0.0, 0.0); n_el + 1];
    let mut f_node = vec![0.0; n_el + 1];
    for e in 0..n_el {
        let (a, b) = (r[e], r[e + 1]);
        let reg = region[e];
        let nu = profile.nu[reg];
        k_el[e] = if a == 0.0 {
            nu * PI * (a + b) / (b - a)
        } else {
            2.0 * PI * nu / (b / a).ln()
        };
        let mid = 0.5 * (a + b);
        let wa = PI * (mid * mid - a * a);
        let wb = PI * (b * b - mid * mid);
        let s = Complex64::new(0.0, omega * profile.sigma[reg]);
        let load = if reg == 0 { j_core } else { 0.0 };
        s_node[e] += s * wa;
        s_node[e + 1] += s * wb;
        f_node[e] += load * wa;
        f_node[e + 1] += load * wb;
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut p_coef = vec![zero; n_el];
    let mut r_coef = vec![zero; n_el];
    let (mut p_prev, mut r_prev) = (zero, zero);
    for i in 0..n_el {
        let t = p_prev + s_node[i];
        let u = r_prev - f_node[i];
        let den = 1.0 + t / k_el[i];
        if den.norm_sqr() == 0.0 {
            return Err(Error::Singular(format!("zero pivot in radial elimination at {i}")));
        }
        p_coef[i] = t / den;
        r_coef[i] = u / den;
        p_prev = p_coef[i];
        r_prev = r_coef[i];
    }
    let mut a_next = zero;
    let mut flux = vec![zero; n_el];
    for i in (0..n_el).rev() {
        flux[i] = p_coef[i] * a_next + r_coef[i];
        a_next -= flux[i] / k_el[i];
    }
    let terms = (0..n_el).map(|e| flux[e].norm_sqr() / k_el[e]);
    Ok(0.5 * profile.l_z * compensated_sum(terms))
}

/// Radial oracle for the three-region cable.
pub fn radial_harmonic_energy(p: &CoaxParams, n_points: usize) -> Result<f64> {
    p.validate()?;
    radial_energy(&RadialProfile::from_coax(p), p.omega, n_points)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Tensor Gauss-Legendre approximation of `E[oracle(Y)]` with `p + 1`
/// nodes per input dimension.
pub fn collocation_mean<F>(oracle: F, model: &RandomInputModel, p: usize) -> Result<f64>
where
    F: Fn(&SampleVector) -> Result<f64> + Sync,
{
    let m = model.dimension();
    if m > MAX_COLLOCATION_DIM {
        return Err(Error::TooManyDimensions {
            dim: m,
            max: MAX_COLLOCATION_DIM,
        });
    }
    let q = p + 1;
    let (x, w) = gauss_legendre(q);
    let total = q.pow(m as u32);
    let terms: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut rest = idx;
            let mut unit = Vec::with_capacity(m);
            let mut weight = 1.0;
            for _ in 0..m {
                let k = rest % q;
                rest /= q;
                unit.push(0.5 * (x[k] + 1.0));
                weight *= 0.5 * w[k];
            }
            let y = model.sample_from_unit(&unit, 0, idx as u64)?;
            Ok(weight * oracle(&y)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(compensated_sum(terms))
}

/// FNV-1a digest used to key cached reference values.
pub fn params_key(description: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in description.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Reference values persisted as `key,e_ref,n_points`.
#[derive(Debug, Clone, Default)]
pub struct ReferenceCache {
    path: Option<PathBuf>,
    entries: BTreeMap<String, (f64, usize)>,
}

impl ReferenceCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists; later `store` calls rewrite it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = BTreeMap::new();
        if path.exists() {
            let text = fs::read_to_string(&path)?;
            for (i, line) in text.lines().enumerate().skip(1) {
                let f: Vec<&str> = line.split(',').collect();
                let parsed = (f.len() == 3)
                    .then(|| Some((f[1].parse::<f64>().ok()?, f[2].parse::<usize>().ok()?)))
                    .flatten();
                match parsed {
                    Some(v) => {
                        entries.insert(f[0].to_string(), v);
                    }
                    None => {
                        return Err(Error::Config(format!("{}:{}: malformed cache row", path.display(), i + 1)))
                    }
                }
            }
        }
        Ok(Self {
            path: Some(path),
            entries,
        })
    }

    pub fn get(&self, key: &str) -> Option<(f64, usize)> {
        self.entries.get(key).copied()
    }

    pub fn store(&mut self, key: &str, e_ref: f64, n_points: usize) -> Result<()> {
        self.entries.insert(key.to_string(), (e_ref, n_points));
        if let Some(path) = &self.path {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)?;
            }
            let mut f = fs::File::create(path)?;
            writeln!(f, "key,e_ref,n_points")?;
            for (k, (e, n)) in &self.entries {
                writeln!(f, "{k},{e:.16e},{n}")?;
            }
        }
        Ok(())
    }

    /// Cached value for `description`, computing and storing it on a miss.
    pub fn get_or_compute(
        &mut self,
        description: &str,
        n_points: usize,
        compute: impl FnOnce() -> Result<f64>,
    ) -> Result<f64> {
        let key = params_key(&format!("{description};n={n_points}"));
        if let Some((e, _)) = self.get(&key) {
            return Ok(e);
        }
        let e = compute()?;
        self.store(&key, e, n_points)?;
        Ok(e)
    }
}
