//! Structured polar triangulations of concentric-annulus cross-sections and
//! mesh hierarchies built from them.
//!
//! Node rings sit exactly on every material interface radius, so region
//! membership is resolved by construction at every mesh size. Ring spacing
//! and arc spacing are both capped at `h_target / sqrt(2)`, which keeps the
//! cell diagonals (the longest edges) at or below `h_target`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Concentric wire / air gap / pipe geometry, lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoaxGeometry {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub l_z: f64,
}

impl CoaxGeometry {
    pub fn new(r0: f64, r1: f64, r2: f64, l_z: f64) -> Result<Self> {
        let g = Self { r0, r1, r2, l_z };
        g.validate()?;
        Ok(g)
    }

    /// Nominal cable: r0 = 2.54 mm, r1 = 12.7 mm, r2 = 25.4 mm, unit depth.
    pub fn nominal() -> Self {
        Self {
            r0: 2.54e-3,
            r1: 12.7e-3,
            r2: 25.4e-3,
            l_z: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.r0 > 0.0
            && self.r0 < self.r1
            && self.r1 < self.r2
            && self.l_z > 0.0
            && self.r2.is_finite()
            && self.l_z.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGeometry(format!(
                "need 0 < r0 < r1 < r2 and l_z > 0, got r0={}, r1={}, r2={}, l_z={}",
                self.r0, self.r1, self.r2, self.l_z
            )))
        }
    }

    pub fn with_r1(&self, r1: f64) -> Result<Self> {
        Self::new(self.r0, r1, self.r2, self.l_z)
    }

    pub fn radii(&self) -> [f64; 3] {
        [self.r0, self.r1, self.r2]
    }
}

/// Material region tag. Regions are numbered outward by annulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Region(pub u16);

impl Region {
    pub const WIRE: Region = Region(0);
    pub const AIR: Region = Region(1);
    pub const PIPE: Region = Region(2);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => write!(f, "I"),
            1 => write!(f, "II"),
            2 => write!(f, "III"),
            k => write!(f, "III.{}", k - 2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Nested,
    Remeshed,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Nested => "nested",
            Strategy::Remeshed => "remeshed",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nested" => Ok(Strategy::Nested),
            "remeshed" => Ok(Strategy::Remeshed),
            other => Err(Error::InvalidArgument(format!(
                "unknown strategy '{other}' (expected nested|remeshed)"
            ))),
        }
    }
}

/// Geometric level sequence `h_l = h0 * delta^l`, `l = 0..=levels`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchySpec {
    pub h0: f64,
    pub delta: f64,
    pub levels: usize,
    pub strategy: Strategy,
}

impl HierarchySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.h0 > 0.0 && self.h0.is_finite()) {
            return Err(Error::InvalidHierarchy(format!("h0 must be positive, got {}", self.h0)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidHierarchy(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.strategy == Strategy::Nested && self.delta != 0.5 {
            return Err(Error::InvalidHierarchy(format!(
                "nested refinement halves h, so delta must be 0.5 (got {})",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn target_h(&self, level: usize) -> f64 {
        self.h0 * self.delta.powi(level as i32)
    }

    pub fn with_levels(mut self, levels: usize) -> Self {
        self.levels = levels;
        self
    }
}

/// Conforming triangulation with counterclockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<Region>,
    dirichlet: Vec<bool>,
    h: f64,
    level: usize,
}

impl Mesh {
    /// Assembles a mesh from raw tables; rejects non-positive triangles.
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
        dirichlet_nodes: &[usize],
        level: usize,
    ) -> Result<Self> {
        if regions.len() != triangles.len() {
            return Err(Error::InvalidArgument(format!(
                "{} region tags for {} triangles",
                regions.len(),
                triangles.len()
            )));
        }
        if triangles.is_empty() {
            return Err(Error::InvalidArgument("mesh has no triangles".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nodes.len()) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t} references a missing node"
                )));
            }
            let area = signed_area(&nodes, tri);
            if area <= 0.0 {
                return Err(Error::DegenerateTriangle { index: t, area });
            }
        }
        let mut dirichlet = vec![false; nodes.len()];
        for &d in dirichlet_nodes {
            if d >= nodes.len() {
                return Err(Error::InvalidArgument(format!("Dirichlet node {d} out of range")));
            }
            dirichlet[d] = true;
        }
        let mut mesh = Self {
            nodes,
            triangles,
            regions,
            dirichlet,
            h: 0.0,
            level,
        };
        mesh.h = mesh_size(&mesh);
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.dirichlet[node]
    }

    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.dirichlet[i]).collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Unknowns left after eliminating Dirichlet nodes.
    pub fn n_dof(&self) -> usize {
        self.dirichlet.iter().filter(|&&d| !d).count()
    }

    /// Maximum edge length.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.nodes, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Edges with the number of triangles using each, keyed `(min, max)`.
    pub fn edge_counts(&self) -> HashMap<(usize, usize), u8> {
        let mut counts = HashMap::with_capacity(self.triangles.len() * 2);
        for tri in &self.triangles {
            for k in 0..3 {
                *counts.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn write_nodes_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "node_id,x,y")?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(w, "{i},{:.16e},{:.16e}", p[0], p[1])?;
        }
        Ok(())
    }

    pub fn write_elements_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tri_id,n0,n1,n2,region")?;
        for (t, (tri, reg)) in self.triangles.iter().zip(&self.regions).enumerate() {
            writeln!(w, "{t},{},{},{},{reg}", tri[0], tri[1], tri[2])?;
        }
        Ok(())
    }
}

fn signed_area(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Maximum Euclidean edge length.
pub fn mesh_size(mesh: &Mesh) -> f64 {
    let mut h2: f64 = 0.0;
    for tri in &mesh.triangles {
        for k in 0..3 {
            let p = mesh.nodes[tri[k]];
            let q = mesh.nodes[tri[(k + 1) % 3]];
            h2 = h2.max((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2));
        }
    }
    h2.sqrt()
}

/// Polar triangulation of the disk of radius `radii.last()` with node rings on
/// every radius in `radii`. Annulus `k` (between `radii[k-1]` and `radii[k]`,
/// the central disk for `k = 0`) is tagged `Region(k)`.
pub fn generate_polar_mesh_radii(radii: &[f64], h_target: f64) -> Result<Mesh> {
    polar_mesh(radii, h_target, true)
}

/// Like [`generate_polar_mesh_radii`] but accepts annuli thinner than the
/// target size; each thin annulus gets a single layer of cells.
pub fn generate_layered_mesh(radii: &[f64], h_target: f64) -> Result<Mesh> {
    polar_mesh(radii, h_target, false)
}

fn polar_mesh(radii: &[f64], h_target: f64, check_width: bool) -> Result<Mesh> {
    if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGeometry(format!(
            "interface radii must be positive and strictly increasing: {radii:?}"
        )));
    }
    if !(h_target > 0.0) {
        return Err(Error::InvalidArgument(format!("h_target must be positive, got {h_target}")));
    }
    // every annulus (and the central disk, measured by its diameter) must be
    // at least half a cell wide
    let mut inner = 0.0;
    for &r in radii.iter().filter(|_| check_width) {
        let width = if inner == 0.0 { 2.0 * r } else { r - inner };
        if h_target >= 2.0 * width {
            return Err(Error::UnresolvableInterface { h_target, radius: r });
        }
        inner = r;
    }
    let spacing = h_target / 2f64.sqrt();
    let outer = *radii.last().unwrap();

    // Ring radii; interface radii are copied, not recomputed.
    let mut rings: Vec<f64> = Vec::new();
    let mut ring_region: Vec<u16> = Vec::new();
    let mut inner = 0.0;
    for (k, &r) in radii.iter().enumerate() {
        let n = ((r - inner) / spacing).ceil().max(1.0) as usize;
        for j in 1..n {
            rings.push(inner + (r - inner) * j as f64 / n as f64);
            ring_region.push(k as u16);
        }
        rings.push(r);
        ring_region.push(k as u16);
        inner = r;
    }
    let n_ang = ((2.0 * PI * outer / spacing).ceil() as usize).max(6);

    let mut nodes = Vec::with_capacity(1 + rings.len() * n_ang);
    nodes.push([0.0, 0.0]);
    let angles: Vec<(f64, f64)> = (0..n_ang)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / n_ang as f64;
            (theta.cos(), theta.sin())
        })
        .collect();
    for &r in &rings {
        for &(c, s) in &angles {
            nodes.push([r * c, r * s]);
        }
    }
    let id = |ring: usize, k: usize| 1 + ring * n_ang + (k % n_ang);

    let mut triangles = Vec::with_capacity((2 * rings.len() - 1) * n_ang);
    let mut regions = Vec::with_capacity(triangles.capacity());
    for k in 0..n_ang {
        triangles.push([0, id(0, k), id(0, k + 1)]);
        regions.push(Region(ring_region[0]));
    }
    for j in 0..rings.len() - 1 {
        // the cell between ring j and j+1 belongs to the outer ring's annulus
        let reg = Region(ring_region[j + 1]);
        for k in 0..n_ang {
            let (a, b, c, d) = (id(j, k), id(j + 1, k), id(j + 1, k + 1), id(j, k + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
            regions.push(reg);
            regions.push(reg);
        }
    }
    let last = rings.len() - 1;
    let dirichlet: Vec<usize> = (0..n_ang).map(|k| id(last, k)).collect();
    Mesh::from_parts(nodes, triangles, regions, &dirichlet, 0)
}

/// Geometry-conforming polar mesh of the cable cross-section.
pub fn generate_polar_mesh(geom: &CoaxGeometry, h_target: f64) -> Result<Mesh> {
    geom.validate()?;
    generate_polar_mesh_radii(&geom.radii(), h_target)
}

/// Splits every triangle into four through its edge midpoints. Boundary
/// midpoints stay on the coarse polygon.
pub fn refine_nested(mesh: &Mesh) -> Mesh {
    let counts = mesh.edge_counts();
    let mut nodes = mesh.nodes.clone();
    let mut dirichlet = mesh.dirichlet.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::with_capacity(counts.len());
    // deterministic midpoint numbering: walk triangles in order
    let mut mid = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>, dirichlet: &mut Vec<bool>| {
        let key = edge_key(a, b);
        *midpoint.entry(key).or_insert_with(|| {
            let (p, q) = (nodes[a], nodes[b]);
            nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            dirichlet.push(dirichlet[a] && dirichlet[b] && counts[&key] == 1);
            nodes.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(mesh.triangles.len() * 4);
    let mut regions = Vec::with_capacity(mesh.triangles.len() * 4);
    for (tri, &reg) in mesh.triangles.iter().zip(&mesh.regions) {
        let [a, b, c] = *tri;
        let ab = mid(a, b, &mut nodes, &mut dirichlet);
        let bc = mid(b, c, &mut nodes, &mut dirichlet);
        let ca = mid(c, a, &mut nodes, &mut dirichlet);
        triangles.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        regions.extend_from_slice(&[reg; 4]);
    }
    let mut out = Mesh {
        nodes,
        triangles,
        regions,
        dirichlet,
        h: 0.0,
        level: mesh.level + 1,
    };
    out.h = mesh_size(&out);
    out
}

/// Mesh of one level for a cross-section with the given interface radii.
pub fn level_mesh_radii(radii: &[f64], spec: &HierarchySpec, level: usize) -> Result<Mesh> {
    level_mesh_with(radii, spec, level, generate_polar_mesh_radii)
}

/// Level mesh built from `generate(radii, h)` for the coarse or remeshed grids.
pub fn level_mesh_with<F>(radii: &[f64], spec: &HierarchySpec, level: usize, generate: F) -> Result<Mesh>
where
    F: Fn(&[f64], f64) -> Result<Mesh>,
{
    spec.validate()?;
    let mut mesh = match spec.strategy {
        Strategy::Remeshed => generate(radii, spec.target_h(level))?,
        Strategy::Nested => {
            let mut m = generate(radii, spec.h0)?;
            for _ in 0..level {
                m = refine_nested(&m);
            }
            m
        }
    };
    mesh.level = level;
    Ok(mesh)
}

pub fn build_hierarchy_radii(radii: &[f64], spec: &HierarchySpec) -> Result<Vec<Mesh>> {
    spec.validate()?;
    match spec.strategy {
        Strategy::Remeshed => (0..=spec.levels)
            .map(|l| level_mesh_radii(radii, spec, l))
            .collect(),
        Strategy::Nested => {
            let mut out = vec![generate_polar_mesh_radii(radii, spec.h0)?];
            for _ in 0..spec.levels {
                let next = refine_nested(out.last().unwrap());
                out.push(next);
            }
            Ok(out)
        }
    }
}

/// Meshes for levels `0..=spec.levels`.
pub fn build_hierarchy(geom: &CoaxGeometry, spec: &HierarchySpec) -> Result<Vec<Mesh>> {
    geom.validate()?;
    build_hierarchy_radii(&geom.radii(), spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> Mesh {
        Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![Region::WIRE],
            &[],
            0,
        )
        .unwrap()
    }

    fn radius(p: [f64; 2]) -> f64 {
        p[0].hypot(p[1])
    }

    #[test]
    fn unit_triangle_size_is_hypotenuse() {
        assert!((mesh_size(&unit_triangle()) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn midpoint_refinement_of_unit_triangle() {
        let fine = refine_nested(&unit_triangle());
        assert_eq!(fine.n_triangles(), 4);
        assert_eq!(&fine.nodes()[3..], &[[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]);
        assert!((fine.h() - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((fine.total_area() - 0.5).abs() < 1e-15);
        assert_eq!(fine.level(), 1);
    }

    #[test]
    fn clockwise_triangle_rejected() {
        let err = Mesh::from_parts(
            vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]],
            vec![[0, 1, 2]],
            vec![Region::WIRE],
            &[],
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateTriangle { index: 0, .. }));
    }

    #[test]
    fn nominal_polar_mesh_conforms_to_interfaces() {
        let g = CoaxGeometry::nominal();
        let m = generate_polar_mesh(&g, 5e-3).unwrap();
        for d in m.dirichlet_nodes() {
            assert!((radius(m.nodes()[d]) - g.r2).abs() <= 1e-12);
        }
        let on = |r: f64| m.nodes().iter().any(|&p| (radius(p) - r).abs() < 1e-15);
        assert!(on(2.54e-3));
        assert!(on(12.7e-3));
        assert_eq!(m, generate_polar_mesh(&g, 5e-3).unwrap());
    }

    #[test]
    fn regions_follow_annuli() {
        let g = CoaxGeometry::nominal();
        let m = generate_polar_mesh(&g, 3e-3).unwrap();
        for (t, tri) in m.triangles().iter().enumerate() {
            let c = tri.iter().fold([0.0, 0.0], |acc, &v| {
                [acc[0] + m.nodes()[v][0] / 3.0, acc[1] + m.nodes()[v][1] / 3.0]
            });
            let r = radius(c);
            let expect = if r < g.r0 {
                Region::WIRE
            } else if r < g.r1 {
                Region::AIR
            } else {
                Region::PIPE
            };
            assert_eq!(m.regions()[t], expect);
        }
    }

    #[test]
    fn polar_mesh_is_conforming_and_positive() {
        let m = generate_polar_mesh(&CoaxGeometry::nominal(), 4e-3).unwrap();
        let counts = m.edge_counts();
        let mut boundary = 0;
        for (&(a, b), &c) in &counts {
            assert!(c == 1 || c == 2);
            if c == 1 {
                boundary += 1;
                assert!(m.is_dirichlet(a) && m.is_dirichlet(b));
            }
        }
        assert_eq!(boundary, m.dirichlet_nodes().len());
        assert!((0..m.n_triangles()).all(|t| m.triangle_area(t) > 0.0));
    }

    #[test]
    fn realized_size_tracks_target() {
        let g = CoaxGeometry::nominal();
        for &h in &[4.2e-3, 2.1e-3, 1.3e-3, 0.7e-3] {
            let m = generate_polar_mesh(&g, h).unwrap();
            assert!(m.h() <= 1.2 * h && m.h() >= h / 1.2, "h={h} got {}", m.h());
        }
    }

    #[test]
    fn disk_area_converges_quadratically() {
        let g = CoaxGeometry::nominal();
        let exact = PI * g.r2 * g.r2;
        let e1 = (generate_polar_mesh(&g, g.r2 / 20.0).unwrap().total_area() - exact).abs() / exact;
        let e2 = (generate_polar_mesh(&g, g.r2 / 40.0).unwrap().total_area() - exact).abs() / exact;
        assert!(e1 < 5e-3, "{e1}");
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn coarse_h_rejected() {
        let g = CoaxGeometry::nominal();
        assert!(matches!(
            generate_polar_mesh(&g, 4.0 * g.r0),
            Err(Error::UnresolvableInterface { .. })
        ));
    }

    #[test]
    fn nested_refinement_keeps_polygon() {
        let g = CoaxGeometry::nominal();
        let m0 = generate_polar_mesh(&g, g.r2 / 6.0).unwrap();
        let m1 = refine_nested(&m0);
        let max_r = |m: &Mesh| m.nodes().iter().map(|&p| radius(p)).fold(0.0, f64::max);
        assert_eq!(m1.n_triangles(), 4 * m0.n_triangles());
        assert!((m1.h() / m0.h() - 0.5).abs() < 1e-12);
        assert!((max_r(&m1) - max_r(&m0)).abs() < 1e-15);
        // boundary midpoints lie inside the circle and stay Dirichlet
        let n_bnd = m1.dirichlet_nodes().len();
        assert_eq!(n_bnd, 2 * m0.dirichlet_nodes().len());
        assert!(m1
            .dirichlet_nodes()
            .iter()
            .all(|&d| radius(m1.nodes()[d]) <= g.r2 * (1.0 + 1e-15)));
        assert_eq!(m1.regions()[..4], [m0.regions()[0]; 4]);
    }

    #[test]
    fn nested_hierarchy_counts() {
        let g = CoaxGeometry::nominal();
        let spec = HierarchySpec {
            h0: g.r2 / 6.0,
            delta: 0.5,
            levels: 2,
            strategy: Strategy::Nested,
        };
        let hs = build_hierarchy(&g, &spec).unwrap();
        let t = hs[0].n_triangles();
        assert_eq!(
            hs.iter().map(Mesh::n_triangles).collect::<Vec<_>>(),
            vec![t, 4 * t, 16 * t]
        );
        assert_eq!(hs.iter().map(Mesh::level).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn remeshed_hierarchy_halves_size() {
        let g = CoaxGeometry::nominal();
        let spec = HierarchySpec {
            h0: g.r2 / 6.0,
            delta: 0.5,
            levels: 2,
            strategy: Strategy::Remeshed,
        };
        let hs = build_hierarchy(&g, &spec).unwrap();
        for w in hs.windows(2) {
            let ratio = w[1].h() / w[0].h();
            assert!((0.4..=0.6).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn single_level_hierarchy() {
        let g = CoaxGeometry::nominal();
        for strategy in [Strategy::Nested, Strategy::Remeshed] {
            let spec = HierarchySpec {
                h0: g.r2 / 6.0,
                delta: 0.5,
                levels: 0,
                strategy,
            };
            assert_eq!(build_hierarchy(&g, &spec).unwrap().len(), 1);
        }
    }

    #[test]
    fn nested_requires_halving() {
        let spec = HierarchySpec {
            h0: 4e-3,
            delta: 0.6,
            levels: 2,
            strategy: Strategy::Nested,
        };
        assert!(matches!(
            build_hierarchy(&CoaxGeometry::nominal(), &spec),
            Err(Error::InvalidHierarchy(_))
        ));
    }

    #[test]
    fn dof_count_grows_like_inverse_square() {
        let g = CoaxGeometry::nominal();
        let spec = HierarchySpec {
            h0: g.r2 / 6.0,
            delta: 0.5,
            levels: 3,
            strategy: Strategy::Remeshed,
        };
        let hs = build_hierarchy(&g, &spec).unwrap();
        let xs: Vec<f64> = hs.iter().map(|m| (1.0 / m.h()).ln()).collect();
        let ys: Vec<f64> = hs.iter().map(|m| (m.n_dof() as f64).ln()).collect();
        let slope = crate::stats::least_squares_slope(&xs, &ys).unwrap().0;
        assert!((slope - 2.0).abs() <= 0.15, "slope {slope}");
    }

    #[test]
    fn csv_dump_has_headers() {
        let m = generate_polar_mesh(&CoaxGeometry::nominal(), 8e-3).unwrap();
        let mut nodes = Vec::new();
        let mut elems = Vec::new();
        m.write_nodes_csv(&mut nodes).unwrap();
        m.write_elements_csv(&mut elems).unwrap();
        let nodes = String::from_utf8(nodes).unwrap();
        let elems = String::from_utf8(elems).unwrap();
        assert!(nodes.starts_with("node_id,x,y\n0,"));
        assert!(elems.starts_with("tri_id,n0,n1,n2,region\n0,0,"));
        assert_eq!(nodes.lines().count(), m.n_nodes() + 1);
        assert!(elems.lines().last().unwrap().ends_with(",III"));
    }
}
