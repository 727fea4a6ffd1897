//! Lowest-order finite elements for the planar curl-curl problem in the
//! out-of-plane vector potential.
//!
//! The test functions are `w_i = N_i / l_z * e_z`, so the unknowns are
//! `A_z * l_z` in Wb and the volume integrals carry the depth `l_z`.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_refined_with, CsrMatrix, SymbolicLdl};
use crate::mesh::Mesh;

/// Vacuum permeability in H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Relative residual every solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

const REFINEMENT_STEPS: usize = 6;

/// Per-region material data, indexed by `Region::index()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialField {
    /// Reluctivity in m/H.
    pub nu: Vec<f64>,
    /// Conductivity in S/m.
    pub sigma: Vec<f64>,
    /// Impressed current density (z-component) in A/m^2.
    pub j_stat: Vec<f64>,
    /// In-plane magnet field `nu_pm * B_r` in A/m.
    pub h_pm: Vec<[f64; 2]>,
}

impl MaterialField {
    /// Source-free, non-conducting materials with the given reluctivities.
    pub fn from_nu(nu: Vec<f64>) -> Self {
        let n = nu.len();
        Self {
            nu,
            sigma: vec![0.0; n],
            j_stat: vec![0.0; n],
            h_pm: vec![[0.0; 2]; n],
        }
    }

    pub fn n_regions(&self) -> usize {
        self.nu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nu.len();
        if self.sigma.len() != n || self.j_stat.len() != n || self.h_pm.len() != n {
            return Err(Error::InvalidMaterial(
                "per-region tables have different lengths".into(),
            ));
        }
        for (r, &nu) in self.nu.iter().enumerate() {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::InvalidMaterial(format!("region {r}: reluctivity {nu} is not positive")));
            }
        }
        for (r, &s) in self.sigma.iter().enumerate() {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidMaterial(format!("region {r}: conductivity {s} is negative")));
            }
        }
        Ok(())
    }
}

/// Topology-dependent assembly data: dof numbering, matrix pattern, element
/// scatter slots and the symbolic factorization. Every mesh with the same
/// triangles and Dirichlet set shares one plan, whatever its coordinates.
#[derive(Debug)]
pub struct FePlan {
    triangles: Vec<[usize; 3]>,
    dirichlet: Vec<bool>,
    dof_of: Vec<usize>,
    free_dofs: Vec<usize>,
    pattern: CsrMatrix<f64>,
    slots: Vec<[usize; 9]>,
    symbolic: Arc<SymbolicLdl>,
}

const FIXED: usize = usize::MAX;

impl FePlan {
    pub fn new(mesh: &Mesh) -> Self {
        let n_nodes = mesh.n_nodes();
        let dirichlet: Vec<bool> = (0..n_nodes).map(|i| mesh.is_dirichlet(i)).collect();
        let mut dof_of = vec![FIXED; n_nodes];
        let mut free_dofs = Vec::with_capacity(mesh.n_dof());
        for node in 0..n_nodes {
            if !dirichlet[node] {
                dof_of[node] = free_dofs.len();
                free_dofs.push(node);
            }
        }
        let n = free_dofs.len();
        let mut trip = Vec::with_capacity(9 * mesh.n_triangles());
        for tri in mesh.triangles() {
            for &a in tri {
                for &b in tri {
                    if dof_of[a] != FIXED && dof_of[b] != FIXED {
                        trip.push((dof_of[a], dof_of[b], 0.0));
                    }
                }
            }
        }
        let pattern = CsrMatrix::from_triplets(n, trip);
        let slots = mesh
            .triangles()
            .iter()
            .map(|tri| {
                let mut s = [FIXED; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        let (da, db) = (dof_of[tri[a]], dof_of[tri[b]]);
                        if da != FIXED && db != FIXED {
                            s[3 * a + b] = pattern.slot(da, db).unwrap();
                        }
                    }
                }
                s
            })
            .collect();
        let symbolic = Arc::new(SymbolicLdl::new(&pattern));
        Self {
            triangles: mesh.triangles().to_vec(),
            dirichlet,
            dof_of,
            free_dofs,
            pattern,
            slots,
            symbolic,
        }
    }

    /// Whether `mesh` has exactly the topology this plan was built for.
    pub fn matches(&self, mesh: &Mesh) -> bool {
        self.triangles == mesh.triangles()
            && self.dirichlet.len() == mesh.n_nodes()
            && self.dirichlet.iter().enumerate().all(|(i, &d)| d == mesh.is_dirichlet(i))
    }

    pub fn n_dof(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.dirichlet.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    pub fn factor_nnz(&self) -> usize {
        self.symbolic.factor_nnz()
    }

    pub fn symbolic(&self) -> &Arc<SymbolicLdl> {
        &self.symbolic
    }
}

fn topology_key(mesh: &Mesh) -> u64 {
    let mut h = DefaultHasher::new();
    mesh.triangles().hash(&mut h);
    for i in 0..mesh.n_nodes() {
        mesh.is_dirichlet(i).hash(&mut h);
    }
    h.finish()
}

/// Thread-safe store of assembly plans keyed by mesh topology.
#[derive(Debug, Default)]
pub struct PlanCache {
    plans: Mutex<HashMap<u64, Vec<Arc<FePlan>>>>,
}

impl PlanCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, mesh: &Mesh) -> Arc<FePlan> {
        let key = topology_key(mesh);
        if let Some(list) = self.plans.lock().unwrap().get(&key) {
            if let Some(p) = list.iter().find(|p| p.matches(mesh)) {
                return p.clone();
            }
        }
        // built outside the lock; a racing duplicate is identical anyway
        let plan = Arc::new(FePlan::new(mesh));
        let mut map = self.plans.lock().unwrap();
        let list = map.entry(key).or_default();
        if let Some(p) = list.iter().find(|p| p.matches(mesh)) {
            return p.clone();
        }
        list.push(plan.clone());
        plan
    }

    pub fn len(&self) -> usize {
        self.plans.lock().unwrap().values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Stiffness, mass and load restricted to the free (non-Dirichlet) nodes.
/// `k` and `m_sigma` share one sparsity pattern.
#[derive(Debug, Clone)]
pub struct FeSystem {
    pub k: CsrMatrix<f64>,
    pub m_sigma: CsrMatrix<f64>,
    pub j: Vec<f64>,
    plan: Arc<FePlan>,
}

impl FeSystem {
    pub fn n_dof(&self) -> usize {
        self.plan.n_dof()
    }

    pub fn n_nodes(&self) -> usize {
        self.plan.n_nodes()
    }

    /// Mesh node of every free dof.
    pub fn free_dofs(&self) -> &[usize] {
        self.plan.free_dofs()
    }

    pub fn plan(&self) -> &Arc<FePlan> {
        &self.plan
    }
}

/// Element gradients `(dN/dx, dN/dy)` and area of one triangle.
pub fn p1_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let two_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j][1] - p[k][1]) / two_area, (p[k][0] - p[j][0]) / two_area];
    }
    (g, 0.5 * two_area)
}

/// `nu / l_z * area * grad N_i . grad N_j` for one triangle.
pub fn element_stiffness(p: [[f64; 2]; 3], nu: f64, l_z: f64) -> [[f64; 3]; 3] {
    let (g, area) = p1_gradients(p);
    let mut ke = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            ke[i][j] = nu / l_z * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    ke
}

pub fn assemble(mesh: &Mesh, mat: &MaterialField, l_z: f64) -> Result<FeSystem> {
    assemble_with_plan(Arc::new(FePlan::new(mesh)), mesh, mat, l_z)
}

/// Assembly on a plan whose topology matches `mesh`.
pub fn assemble_with_plan(plan: Arc<FePlan>, mesh: &Mesh, mat: &MaterialField, l_z: f64) -> Result<FeSystem> {
    mat.validate()?;
    if !(l_z > 0.0) {
        return Err(Error::InvalidArgument(format!("depth l_z must be positive, got {l_z}")));
    }
    if plan.triangles.len() != mesh.n_triangles() || plan.n_nodes() != mesh.n_nodes() {
        return Err(Error::InvalidArgument("assembly plan does not match the mesh".into()));
    }
    let nnz = plan.pattern.nnz();
    let mut kv = vec![0.0; nnz];
    let mut mv = vec![0.0; nnz];
    let mut j = vec![0.0; plan.n_dof()];
    let nodes = mesh.nodes();
    for (t, ((tri, reg), slots)) in plan.triangles.iter().zip(mesh.regions()).zip(&plan.slots).enumerate() {
        let r = reg.index();
        if r >= mat.n_regions() {
            return Err(Error::MissingMaterial(reg.0));
        }
        let p = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
        let (g, area) = p1_gradients(p);
        if !(area > 0.0) {
            return Err(Error::DegenerateTriangle { index: t, area });
        }
        let (nu, sigma, js, hpm) = (mat.nu[r], mat.sigma[r], mat.j_stat[r], mat.h_pm[r]);
        for a in 0..3 {
            let da = plan.dof_of[tri[a]];
            if da == FIXED {
                continue;
            }
            j[da] += js * area / 3.0 - area * (hpm[0] * g[a][1] - hpm[1] * g[a][0]);
            for b in 0..3 {
                let slot = slots[3 * a + b];
                if slot == FIXED {
                    continue;
                }
                kv[slot] += nu / l_z * area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                if sigma > 0.0 {
                    let w = if a == b { 2.0 } else { 1.0 };
                    mv[slot] += sigma / l_z * area / 12.0 * w;
                }
            }
        }
    }
    Ok(FeSystem {
        k: plan.pattern.with_values(kv),
        m_sigma: plan.pattern.with_values(mv),
        j,
        plan,
    })
}

/// Potential coefficients on the free dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    pub a: Vec<Complex64>,
    pub omega: f64,
    pub relative_residual: f64,
    pub backward_error: f64,
}

impl FieldSolution {
    /// Coefficients on all mesh nodes, zero on the Dirichlet boundary.
    pub fn nodal(&self, system: &FeSystem) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); system.n_nodes()];
        for (&node, &v) in system.free_dofs().iter().zip(&self.a) {
            out[node] = v;
        }
        out
    }

    pub fn write_csv<W: Write>(&self, system: &FeSystem, mut w: W) -> Result<()> {
        writeln!(w, "node_id,re_a,im_a")?;
        for (i, v) in self.nodal(system).iter().enumerate() {
            writeln!(w, "{i},{:.16e},{:.16e}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Solves `(K + i omega M_sigma) a = j`; `omega = 0` takes the real path.
pub fn solve(system: &FeSystem, omega: f64) -> Result<FieldSolution> {
    let n = system.n_dof();
    if n == system.n_nodes() {
        return Err(Error::Singular("no Dirichlet constraints".into()));
    }
    if n == 0 {
        return Ok(FieldSolution {
            a: Vec::new(),
            omega,
            relative_residual: 0.0,
            backward_error: 0.0,
        });
    }
    if omega == 0.0 || system.m_sigma.is_zero() {
        let rep = solve_refined_with(system.plan.symbolic.clone(), &system.k, &system.j, SOLVE_TOLERANCE, REFINEMENT_STEPS)?;
        return Ok(FieldSolution {
            a: rep.x.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
            omega,
            relative_residual: rep.relative_residual,
            backward_error: rep.backward_error,
        });
    }
    let a_mat: CsrMatrix<Complex64> = system.k.add_scaled(Complex64::new(0.0, omega), &system.m_sigma);
    let rhs: Vec<Complex64> = system.j.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let rep = solve_refined_with(system.plan.symbolic.clone(), &a_mat, &rhs, SOLVE_TOLERANCE, REFINEMENT_STEPS)?;
    Ok(FieldSolution {
        a: rep.x,
        omega,
        relative_residual: rep.relative_residual,
        backward_error: rep.backward_error,
    })
}

/// `1/2 Re(a^H K a)` in J.
pub fn magnetic_energy(system: &FeSystem, sol: &FieldSolution) -> f64 {
    let re: Vec<f64> = sol.a.iter().map(|v| v.re).collect();
    let im: Vec<f64> = sol.a.iter().map(|v| v.im).collect();
    let mut e = system.k.bilinear(&re, &re);
    if im.iter().any(|&v| v != 0.0) {
        e += system.k.bilinear(&im, &im);
    }
    0.5 * e
}
