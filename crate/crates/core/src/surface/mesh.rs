//! Closed oriented triangle meshes in ℝ³ (the case `n = 2`).

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector, Matrix2, Matrix5, Vector5};
use rayon::prelude::*;

use super::ball::{closest_barycentric, compass_maximize, min_enclosing_ball, point_triangle_dist_sq, V3};
use super::{Geometry, GlobalGeometry, LocalStencil, NodeShape, RemeshParams, ShapeData};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<V3>,
    faces: Vec<[usize; 3]>,
    genus: usize,
    ring1: Vec<Vec<usize>>,
    vertex_faces: Vec<Vec<usize>>,
}

/// Coefficients, tangent frame and local coordinates of the stencil.
type QuadricFit = ([f64; 5], [V3; 2], Vec<[f64; 2]>);

impl PartialEq for TriMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.faces == other.faces
    }
}

/// Per-vertex result of the quadric fit.
#[derive(Debug, Clone)]
struct VertexFit {
    normal: V3,
    tangent: [V3; 2],
    kappa: [f64; 2],
    dirs: [V3; 2],
    stencil: LocalStencil,
}

fn arr(v: &V3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn orthonormal_frame(normal: &V3) -> [V3; 2] {
    let helper = if normal.x.abs() < 0.9 { V3::x() } else { V3::y() };
    let e1 = (helper - normal * normal.dot(&helper)).normalize();
    [e1, normal.cross(&e1)]
}

/// Equilibrated Cholesky factor of `AᵀA` for a five-column design given by
/// rows; `None` if rank deficient.
fn normal_factor(rows: &[Vector5<f64>]) -> Option<(nalgebra::Cholesky<f64, nalgebra::U5>, Vector5<f64>)> {
    let ata: Matrix5<f64> = rows.iter().map(|r| r * r.transpose()).sum();
    let scale = ata.diagonal().map(|x| 1.0 / x.sqrt());
    if scale.iter().any(|s| !s.is_finite()) {
        return None;
    }
    let chol = Matrix5::from_fn(|i, j| ata[(i, j)] * scale[i] * scale[j]).cholesky()?;
    let diag = chol.l_dirty().diagonal();
    if diag.min() < 1e-8 * diag.max() {
        return None;
    }
    Some((chol, scale))
}

/// Least-squares pseudo-inverse `(AᵀA)⁻¹Aᵀ` of a five-column design.
fn pseudo_inverse(rows: &[Vector5<f64>]) -> Option<DMatrix<f64>> {
    let (chol, scale) = normal_factor(rows)?;
    let mut pinv = DMatrix::zeros(5, rows.len());
    for (j, r) in rows.iter().enumerate() {
        let col = chol.solve(&r.component_mul(&scale)).component_mul(&scale);
        pinv.set_column(j, &col);
    }
    Some(pinv)
}

/// Eigen-decomposition of a real 2×2 matrix with real spectrum, ascending.
fn eigen2(m: &Matrix2<f64>) -> ([f64; 2], [[f64; 2]; 2]) {
    let (p, q, r, s) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let half = 0.5 * (p + s);
    let disc = (0.25 * (p - s) * (p - s) + q * r).max(0.0).sqrt();
    let lam = [half - disc, half + disc];
    if disc <= 1e-14 * (half.abs() + 1e-300) {
        return (lam, [[1.0, 0.0], [0.0, 1.0]]);
    }
    let vec_for = |l: f64| {
        let a = [q, l - p];
        let b = [l - s, r];
        let v = if a[0].hypot(a[1]) >= b[0].hypot(b[1]) { a } else { b };
        let len = v[0].hypot(v[1]);
        [v[0] / len, v[1] / len]
    };
    let v0 = vec_for(lam[0]);
    // the second direction is taken orthogonal so the frame stays orthonormal
    (lam, [v0, [-v0[1], v0[0]]])
}

impl TriMesh {
    /// Builds a closed oriented manifold mesh. Inward-oriented input is flipped.
    pub fn new(vertices: Vec<V3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        if nv < 4 || faces.len() < 4 {
            return Err(Error::InvalidMesh(
                "a closed mesh needs at least 4 vertices and 4 faces".into(),
            ));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite);
        }
        let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("face {fi} references a missing vertex")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} is degenerate")));
            }
            for k in 0..3 {
                if directed.insert((f[k], f[(k + 1) % 3]), fi).is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({}, {}) is used twice with the same orientation",
                        f[k],
                        f[(k + 1) % 3]
                    )));
                }
            }
        }
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                return Err(Error::InvalidMesh(format!(
                    "edge ({a}, {b}) is a boundary or non-manifold edge"
                )));
            }
        }
        let mut vertex_faces = vec![Vec::new(); nv];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vertex_faces[v].push(fi);
            }
        }
        let mut ring1 = vec![Vec::new(); nv];
        for v in 0..nv {
            if vertex_faces[v].is_empty() {
                return Err(Error::InvalidMesh(format!("vertex {v} is isolated")));
            }
            // the link of v must be a single cycle
            let mut next = BTreeMap::new();
            for &fi in &vertex_faces[v] {
                let f = faces[fi];
                let k = f.iter().position(|&w| w == v).unwrap();
                next.insert(f[(k + 1) % 3], f[(k + 2) % 3]);
            }
            let start = *next.keys().next().unwrap();
            let mut cur = start;
            let mut count = 0;
            loop {
                cur = match next.get(&cur) {
                    Some(&c) => c,
                    None => return Err(Error::InvalidMesh(format!("vertex {v} has an open link"))),
                };
                count += 1;
                if cur == start || count > next.len() {
                    break;
                }
            }
            if cur != start || count != next.len() {
                return Err(Error::InvalidMesh(format!("vertex {v} is not a manifold vertex")));
            }
            ring1[v] = next.keys().copied().collect();
        }
        // connectivity
        let mut seen = vec![false; nv];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &ring1[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidMesh("mesh is not connected".into()));
        }
        let edges = directed.len() / 2;
        let chi = nv as i64 - edges as i64 + faces.len() as i64;
        if chi > 2 || (2 - chi) % 2 != 0 {
            return Err(Error::InvalidMesh(format!(
                "Euler characteristic {chi} of a closed orientable surface"
            )));
        }
        let mut mesh = Self {
            vertices,
            faces,
            genus: ((2 - chi) / 2) as usize,
            ring1,
            vertex_faces,
        };
        let volume = mesh.volume();
        if !(volume.abs() > 0.0) {
            return Err(Error::InvalidMesh("mesh encloses no volume".into()));
        }
        if volume < 0.0 {
            for f in &mut mesh.faces {
                f.swap(1, 2);
            }
        }
        Ok(mesh)
    }

    /// Mesh whose genus must equal `genus`.
    pub fn with_genus(vertices: Vec<V3>, faces: Vec<[usize; 3]>, genus: usize) -> Result<Self> {
        let m = Self::new(vertices, faces)?;
        if m.genus != genus {
            return Err(Error::InvalidMesh(format!(
                "generator declared genus {genus}, mesh has genus {}",
                m.genus
            )));
        }
        Ok(m)
    }

    /// Icosahedral sphere with `10·4^level + 2` vertices.
    pub fn icosphere(level: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if level > 7 {
            return Err(Error::InvalidParameter(format!("icosphere level {level} exceeds 7")));
        }
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<V3> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|c| V3::new(c[0], c[1], c[2]).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut cache: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            let mut mid = |a: usize, b: usize, verts: &mut Vec<V3>| {
                *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for f in &faces {
                let ab = mid(f[0], f[1], &mut verts);
                let bc = mid(f[1], f[2], &mut verts);
                let ca = mid(f[2], f[0], &mut verts);
                next.push([f[0], ab, ca]);
                next.push([f[1], bc, ab]);
                next.push([f[2], ca, bc]);
                next.push([ab, bc, ca]);
            }
            faces = next;
        }
        for v in &mut verts {
            *v *= radius;
        }
        Self::with_genus(verts, faces, 0)
    }

    /// Ellipsoid with semi-axes `(a, b, c)` from a scaled icosphere.
    pub fn ellipsoid(a: f64, b: f64, c: f64, level: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ellipsoid semi-axes must be positive, got ({a}, {b}, {c})"
            )));
        }
        let s = Self::icosphere(level, 1.0)?;
        let verts = s.vertices.iter().map(|v| V3::new(a * v.x, b * v.y, c * v.z)).collect();
        Self::with_genus(verts, s.faces, 0)
    }

    /// Torus of revolution about the z-axis with radii `major > minor`.
    pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> Result<Self> {
        if !(minor > 0.0 && major > minor) {
            return Err(Error::InvalidParameter(format!(
                "torus needs 0 < minor < major, got ({major}, {minor})"
            )));
        }
        if nu < 3 || nv < 3 {
            return Err(Error::InvalidParameter(
                "torus needs at least 3 samples in each direction".into(),
            ));
        }
        let tau = std::f64::consts::TAU;
        let mut verts = Vec::with_capacity(nu * nv);
        for i in 0..nu {
            let u = tau * i as f64 / nu as f64;
            for j in 0..nv {
                let v = tau * j as f64 / nv as f64;
                let rho = major + minor * v.cos();
                verts.push(V3::new(rho * u.cos(), rho * u.sin(), minor * v.sin()));
            }
        }
        let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
        let mut faces = Vec::with_capacity(2 * nu * nv);
        for i in 0..nu {
            for j in 0..nv {
                faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Self::with_genus(verts, faces, 1)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[V3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    fn face_cross(&self, f: &[usize; 3]) -> V3 {
        let [a, b, c] = f.map(|i| self.vertices[i]);
        (b - a).cross(&(c - a))
    }

    fn face_area(&self, f: &[usize; 3]) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    pub fn area(&self) -> f64 {
        self.faces.iter().map(|f| self.face_area(f)).sum()
    }

    pub fn volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| self.vertices[f[0]].dot(&self.vertices[f[1]].cross(&self.vertices[f[2]])))
            .sum::<f64>()
            / 6.0
    }

    fn vertex_normal(&self, v: usize) -> V3 {
        self.vertex_faces[v]
            .iter()
            .map(|&fi| self.face_cross(&self.faces[fi]))
            .sum::<V3>()
            .normalize()
    }

    /// Vertices within two edges of `v`, excluding `v`.
    fn ring2(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.ring1[v].clone();
        for &w in &self.ring1[v] {
            out.extend(self.ring1[w].iter().copied());
        }
        out.sort_unstable();
        out.dedup();
        out.retain(|&w| w != v);
        out
    }

    /// Quadric fit over the 2-ring in the frame of `normal`, in chord form:
    /// `w/|d|² ≈ (a u² + b uv + c v²)/(u² + v²) + (d u + e v)/|d|²`, which is
    /// exact on round spheres. Returns the coefficients and local coordinates.
    fn quadric(&self, v: usize, nbrs: &[usize], normal: &V3) -> Result<QuadricFit> {
        let tangent = orthonormal_frame(normal);
        let p = self.vertices[v];
        let mut rows = Vec::with_capacity(nbrs.len());
        let mut rhs = Vec::with_capacity(nbrs.len());
        let mut coords = Vec::with_capacity(nbrs.len());
        for &w in nbrs {
            let d = self.vertices[w] - p;
            let (u, t) = (d.dot(&tangent[0]), d.dot(&tangent[1]));
            coords.push([u, t]);
            let (rho2, d2) = (u * u + t * t, d.norm_squared());
            if rho2 <= 0.0 {
                return Err(Error::DegenerateStencil(v));
            }
            rows.push(Vector5::new(u * u / rho2, u * t / rho2, t * t / rho2, u / d2, t / d2));
            rhs.push(d.dot(normal) / d2);
        }
        let (chol, scale) = normal_factor(&rows).ok_or(Error::DegenerateStencil(v))?;
        let atb: Vector5<f64> = rows.iter().zip(&rhs).map(|(r, b)| r * *b).sum();
        let c = chol.solve(&atb.component_mul(&scale)).component_mul(&scale);
        Ok(([c[0], c[1], c[2], c[3], c[4]], tangent, coords))
    }

    fn fit_vertex(&self, v: usize) -> Result<VertexFit> {
        let nbrs = self.ring2(v);
        if nbrs.len() < 5 {
            return Err(Error::DegenerateStencil(v));
        }
        let n0 = self.vertex_normal(v);
        let (mut c, mut tangent, mut coords) = self.quadric(v, &nbrs, &n0)?;
        let mut n1 = n0;
        for _ in 0..2 {
            if c[3].hypot(c[4]) < 1e-12 {
                break;
            }
            n1 = (n1 - tangent[0] * c[3] - tangent[1] * c[4]).normalize();
            (c, tangent, coords) = self.quadric(v, &nbrs, &n1)?;
        }
        let (a, b, cc, d, e) = (c[0], c[1], c[2], c[3], c[4]);
        let first = Matrix2::new(1.0 + d * d, d * e, d * e, 1.0 + e * e);
        let second = Matrix2::new(2.0 * a, b, b, 2.0 * cc) / (1.0 + d * d + e * e).sqrt();
        let shape = -(first.try_inverse().ok_or(Error::DegenerateStencil(v))? * second);
        let (kappa, vecs) = eigen2(&shape);
        let dirs = vecs.map(|w| (tangent[0] * w[0] + tangent[1] * w[1]).normalize());
        let design: Vec<Vector5<f64>> = coords
            .iter()
            .map(|&[u, t]| Vector5::new(u, t, 0.5 * u * u, u * t, 0.5 * t * t))
            .collect();
        let pinv = pseudo_inverse(&design).ok_or(Error::DegenerateStencil(v))?;
        Ok(VertexFit {
            normal: n1,
            tangent,
            kappa,
            dirs,
            stencil: LocalStencil {
                neighbors: nbrs,
                pinv,
                tangent: [arr(&tangent[0]), arr(&tangent[1])],
            },
        })
    }

    /// `|∇A|` from a least-squares fit of shape-operator differences over the 1-ring.
    fn gradient_a(&self, v: usize, fits: &[VertexFit]) -> f64 {
        let fit = &fits[v];
        let comps = |f: &VertexFit| -> [f64; 3] {
            let s = |x: &V3, y: &V3| -> f64 { (0..2).map(|k| f.kappa[k] * f.dirs[k].dot(x) * f.dirs[k].dot(y)).sum() };
            let [eu, ev] = &fit.tangent;
            [s(eu, eu), s(eu, ev), s(ev, ev)]
        };
        let base = comps(fit);
        let ring = &self.ring1[v];
        let mut ata = Matrix2::zeros();
        let mut atb = nalgebra::Matrix2x3::zeros();
        for &w in ring {
            let d = self.vertices[w] - self.vertices[v];
            let row = nalgebra::Vector2::new(d.dot(&fit.tangent[0]), d.dot(&fit.tangent[1]));
            let cw = comps(&fits[w]);
            ata += row * row.transpose();
            atb += row * nalgebra::RowVector3::new(cw[0] - base[0], cw[1] - base[1], cw[2] - base[2]);
        }
        let Some(inv) = ata.try_inverse() else {
            return f64::NAN;
        };
        let t = inv * atb;
        (0..2)
            .map(|a| t[(a, 0)].powi(2) + 2.0 * t[(a, 1)].powi(2) + t[(a, 2)].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn shape_data(&self) -> Result<ShapeData> {
        let fits: Vec<VertexFit> = (0..self.len())
            .into_par_iter()
            .map(|v| self.fit_vertex(v))
            .collect::<Result<_>>()?;
        let grad_a: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|v| self.gradient_a(v, &fits))
            .collect();
        let mut weights = vec![0.0; self.len()];
        let mut h_min = f64::INFINITY;
        for f in &self.faces {
            let a = self.face_area(f) / 3.0;
            for k in 0..3 {
                weights[f[k]] += a;
                h_min = h_min.min((self.vertices[f[k]] - self.vertices[f[(k + 1) % 3]]).norm());
            }
        }
        let exclusion = (0..self.len())
            .map(|v| {
                let ring = &self.ring1[v];
                let mut d: f64 = 0.0;
                for (i, &a) in ring.iter().enumerate() {
                    d = d.max((self.vertices[a] - self.vertices[v]).norm());
                    for &b in &ring[i + 1..] {
                        d = d.max((self.vertices[a] - self.vertices[b]).norm());
                    }
                }
                2.0 * d
            })
            .collect();
        let mut nodes = Vec::with_capacity(self.len());
        let mut stencils = Vec::with_capacity(self.len());
        for (v, fit) in fits.into_iter().enumerate() {
            nodes.push(NodeShape {
                position: arr(&self.vertices[v]).to_vec(),
                normal: arr(&fit.normal).to_vec(),
                frame_kappa: fit.kappa.to_vec(),
                frame: fit.dirs.iter().map(|d| arr(d).to_vec()).collect(),
            });
            stencils.push(fit.stencil);
        }
        Ok(ShapeData {
            nodes,
            grad_a,
            weights,
            h_min,
            exclusion,
            stencils,
        })
    }

    pub fn chord_extremes(&self, shape: &ShapeData, i: usize) -> Option<(f64, f64)> {
        let x = self.vertices[i];
        let nu = V3::from_column_slice(&shape.nodes[i].normal);
        let rho2 = shape.exclusion[i] * shape.exclusion[i];
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for y in &self.vertices {
            let d = x - y;
            let d2 = d.norm_squared();
            if d2 < rho2 || d2 == 0.0 {
                continue;
            }
            let k = 2.0 * d.dot(&nu) / d2;
            hi = hi.max(k);
            lo = lo.min(k);
        }
        (hi > f64::NEG_INFINITY).then_some((hi, lo))
    }

    fn solid_angle(&self, p: &V3, f: &[usize; 3]) -> f64 {
        let [a, b, c] = f.map(|i| self.vertices[i] - p);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
        2.0 * num.atan2(den)
    }

    /// Generalized winding number test.
    pub fn contains(&self, p: &V3) -> bool {
        let w: f64 = self.faces.iter().map(|f| self.solid_angle(p, f)).sum();
        w > 2.0 * std::f64::consts::PI
    }

    pub fn distance(&self, p: &V3) -> f64 {
        self.faces
            .iter()
            .map(|f| point_triangle_dist_sq(p, &self.vertices[f[0]], &self.vertices[f[1]], &self.vertices[f[2]]))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    fn bounding_box(&self) -> (V3, V3) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Largest inscribed ball radius: the best points of a regular interior
    /// grid refined by pattern search on the distance to the surface.
    pub fn inradius(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        let g = 10;
        let cell = (hi - lo) / g as f64;
        let objective = |v: &[f64]| {
            let p = V3::new(v[0], v[1], v[2]);
            self.contains(&p).then(|| self.distance(&p))
        };
        let points: Vec<[f64; 3]> = (0..g * g * g)
            .map(|k| {
                let (a, b, c) = (k % g, (k / g) % g, k / (g * g));
                [
                    lo.x + (a as f64 + 0.5) * cell.x,
                    lo.y + (b as f64 + 0.5) * cell.y,
                    lo.z + (c as f64 + 0.5) * cell.z,
                ]
            })
            .collect();
        let mut candidates: Vec<(f64, [f64; 3])> = points
            .par_iter()
            .filter_map(|p| objective(p).map(|d| (d, *p)))
            .collect();
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
        let scale = (hi - lo).max();
        let step = cell.max();
        candidates
            .par_iter()
            .take(4)
            .map(|(_, p)| compass_maximize(p, step, 1e-9 * scale, &objective).1)
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                self.vertices[i + 1..]
                    .iter()
                    .map(|w| (self.vertices[i] - w).norm())
                    .fold(0.0, f64::max)
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn global_geometry(&self) -> Result<GlobalGeometry> {
        Ok(GlobalGeometry {
            inradius: self.inradius(),
            ..self.extent()
        })
    }

    /// Global geometry without the (costly) inradius search, which is left NaN.
    pub fn extent(&self) -> GlobalGeometry {
        GlobalGeometry {
            area: self.area(),
            volume: self.volume(),
            inradius: f64::NAN,
            circumradius: min_enclosing_ball(&self.vertices).radius,
            diameter: self.diameter(),
        }
    }

    fn field_fit(shape: &ShapeData, u: &[f64], v: usize) -> DVector<f64> {
        let st = &shape.stencils[v];
        let diffs = DVector::from_iterator(st.neighbors.len(), st.neighbors.iter().map(|&w| u[w] - u[v]));
        &st.pinv * diffs
    }

    fn local(shape: &ShapeData, v: usize, dir: &[f64]) -> [f64; 2] {
        let t = &shape.stencils[v].tangent;
        [
            (0..3).map(|k| dir[k] * t[0][k]).sum(),
            (0..3).map(|k| dir[k] * t[1][k]).sum(),
        ]
    }

    pub fn gradient_components(&self, shape: &ShapeData, u: &[f64]) -> Vec<Vec<f64>> {
        (0..self.len())
            .into_par_iter()
            .map(|v| {
                let c = Self::field_fit(shape, u, v);
                shape.nodes[v]
                    .frame
                    .iter()
                    .map(|d| {
                        let l = Self::local(shape, v, d);
                        c[0] * l[0] + c[1] * l[1]
                    })
                    .collect()
            })
            .collect()
    }

    pub fn laplace_f(&self, geom: &Geometry, u: &[f64]) -> Vec<f64> {
        let shape = &geom.shape;
        (0..self.len())
            .into_par_iter()
            .map(|v| {
                let c = Self::field_fit(shape, u, v);
                let p = &geom.points[v];
                p.frame
                    .iter()
                    .zip(&p.fdot)
                    .map(|(d, fd)| {
                        let l = Self::local(shape, v, d);
                        fd * (c[2] * l[0] * l[0] + 2.0 * c[3] * l[0] * l[1] + c[4] * l[1] * l[1])
                    })
                    .sum()
            })
            .collect()
    }

    fn with_vertices(&self, vertices: Vec<V3>) -> Self {
        Self {
            vertices,
            faces: self.faces.clone(),
            genus: self.genus,
            ring1: self.ring1.clone(),
            vertex_faces: self.vertex_faces.clone(),
        }
    }

    pub fn advance(&self, geom: &Geometry, dt: f64) -> Result<Self> {
        let vertices: Vec<V3> = self
            .vertices
            .iter()
            .zip(&geom.points)
            .map(|(v, p)| v - V3::from_column_slice(&p.normal) * (p.speed * dt))
            .collect();
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite);
        }
        let m = self.with_vertices(vertices);
        if !(m.volume() > 0.0) {
            return Err(Error::InvalidMesh("mesh turned inside out".into()));
        }
        Ok(m)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        self.with_vertices(self.vertices.iter().map(|v| v * lambda).collect())
    }

    fn edge_lengths(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for f in &self.faces {
            for k in 0..3 {
                if f[k] < f[(k + 1) % 3] {
                    out.push((self.vertices[f[k]] - self.vertices[f[(k + 1) % 3]]).norm());
                }
            }
        }
        out
    }

    /// `4√3·area / Σ edge²`: 1 for equilateral triangles, 0 for degenerate ones.
    pub fn min_quality(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let e: f64 = (0..3)
                    .map(|k| (self.vertices[f[k]] - self.vertices[f[(k + 1) % 3]]).norm_squared())
                    .sum();
                4.0 * 3f64.sqrt() * self.face_area(f) / e
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn needs_remesh(&self, params: &RemeshParams) -> bool {
        let e = self.edge_lengths();
        let (lo, hi) = e
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        self.min_quality() < params.min_quality || hi / lo > 2.0 * params.spacing_ratio
    }

    /// Edge splits, edge collapses, valence flips and tangential smoothing
    /// toward the edge length of an equilateral mesh with the same vertex count.
    pub fn remeshed(&self) -> Result<Self> {
        let target = (2.0 * self.area() / (3f64.sqrt() * self.len() as f64)).sqrt();
        let mut verts = self.vertices.clone();
        let mut faces = self.faces.clone();
        let normals: Vec<V3> = (0..self.len()).map(|v| self.vertex_normal(v)).collect();
        for _ in 0..3 {
            split_long_edges(&mut verts, &mut faces, 4.0 / 3.0 * target);
            collapse_short_edges(&mut verts, &mut faces, 0.8 * target, 4.0 / 3.0 * target);
            flip_edges(&verts, &mut faces);
            let (v, f) = compact(&verts, &faces);
            verts = v;
            faces = f;
            let mesh = Self::with_genus(verts.clone(), faces.clone(), self.genus)?;
            verts = mesh
                .smoothed_vertices()
                .iter()
                .map(|p| self.closest_point(p, &normals))
                .collect();
        }
        Self::with_genus(verts, faces, self.genus)
    }

    /// One pass of tangential Laplacian smoothing.
    fn smoothed_vertices(&self) -> Vec<V3> {
        (0..self.len())
            .map(|v| {
                let ring = &self.ring1[v];
                let c = ring.iter().map(|&w| self.vertices[w]).sum::<V3>() / ring.len() as f64;
                let n = self.vertex_normal(v);
                let d = c - self.vertices[v];
                self.vertices[v] + (d - n * d.dot(&n)) * 0.5
            })
            .collect()
    }

    /// Closest point on the faces, lifted onto the Phong surface with blend ½
    /// (recovers the chord sagitta to second order).
    fn closest_point(&self, p: &V3, normals: &[V3]) -> V3 {
        let (fi, w) = self.locate(&[p.x, p.y, p.z]);
        let f = self.faces[fi];
        let q: V3 = (0..3).map(|k| self.vertices[f[k]] * w[k]).sum();
        let lift: V3 = (0..3)
            .map(|k| normals[f[k]] * (w[k] * (self.vertices[f[k]] - q).dot(&normals[f[k]])))
            .sum();
        q + lift * 0.5
    }

    /// Closest point on the mesh as a face index and barycentric weights.
    pub fn locate(&self, position: &[f64]) -> (usize, [f64; 3]) {
        let p = V3::new(position[0], position[1], position[2]);
        let (fi, _) = self
            .faces
            .iter()
            .enumerate()
            .map(|(i, f)| {
                (
                    i,
                    point_triangle_dist_sq(&p, &self.vertices[f[0]], &self.vertices[f[1]], &self.vertices[f[2]]),
                )
            })
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let f = self.faces[fi];
        (
            fi,
            closest_barycentric(&p, &self.vertices[f[0]], &self.vertices[f[1]], &self.vertices[f[2]]),
        )
    }

    pub fn interpolate(&self, position: &[f64], u: &[f64]) -> f64 {
        let (fi, w) = self.locate(position);
        let f = self.faces[fi];
        (0..3).map(|k| w[k] * u[f[k]]).sum()
    }
}

fn edge_faces(faces: &[[usize; 3]]) -> BTreeMap<(usize, usize), Vec<usize>> {
    let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            map.entry((a.min(b), a.max(b))).or_default().push(fi);
        }
    }
    map
}

fn opposite(f: &[usize; 3], a: usize, b: usize) -> usize {
    *f.iter().find(|&&v| v != a && v != b).unwrap()
}

/// Splits edges longer than `max_len` at their midpoints, in batches of
/// edges that share no face.
fn split_long_edges(verts: &mut Vec<V3>, faces: &mut Vec<[usize; 3]>, max_len: f64) {
    for _ in 0..8 {
        let map = edge_faces(faces);
        let mut long: Vec<((usize, usize), f64)> = map
            .keys()
            .map(|&(a, b)| ((a, b), (verts[a] - verts[b]).norm()))
            .filter(|(_, l)| *l > max_len)
            .collect();
        if long.is_empty() {
            return;
        }
        long.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        let mut used = vec![false; faces.len()];
        for ((a, b), _) in long {
            let fs = &map[&(a, b)];
            if fs.len() != 2 || fs.iter().any(|&f| used[f]) {
                continue;
            }
            let m = verts.len();
            verts.push((verts[a] + verts[b]) * 0.5);
            for &fi in fs {
                used[fi] = true;
                let f = faces[fi];
                let c = opposite(&f, a, b);
                // keep orientation: rotate so the face reads (p, q, c) with edge p→q
                let k = f.iter().position(|&v| v == c).unwrap();
                let (p, q) = (f[(k + 1) % 3], f[(k + 2) % 3]);
                faces[fi] = [p, m, c];
                faces.push([m, q, c]);
                used.push(true);
            }
        }
    }
}

/// Collapses edges shorter than `min_len` to their midpoints when the link
/// condition holds, no face flips and no edge grows beyond `max_len`.
fn collapse_short_edges(verts: &mut [V3], faces: &mut Vec<[usize; 3]>, min_len: f64, max_len: f64) {
    for _ in 0..8 {
        let nv = verts.len();
        let mut ring: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nv];
        let mut vf: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                ring[f[k]].insert(f[(k + 1) % 3]);
                ring[f[k]].insert(f[(k + 2) % 3]);
                vf[f[k]].push(fi);
            }
        }
        let mut short: Vec<((usize, usize), f64)> = edge_faces(faces)
            .keys()
            .map(|&(a, b)| ((a, b), (verts[a] - verts[b]).norm()))
            .filter(|(_, l)| *l < min_len)
            .collect();
        if short.is_empty() {
            return;
        }
        short.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
        let mut locked = vec![false; nv];
        let mut dead = vec![false; faces.len()];
        let mut changed = false;
        for ((a, b), _) in short {
            if locked[a] || locked[b] {
                continue;
            }
            if ring[a].intersection(&ring[b]).count() != 2 || ring[a].len() <= 3 || ring[b].len() <= 3 {
                continue;
            }
            let m = (verts[a] + verts[b]) * 0.5;
            let mut ok = true;
            for &fi in vf[a].iter().chain(&vf[b]) {
                let f = faces[fi];
                if f.contains(&a) && f.contains(&b) {
                    continue;
                }
                let old = {
                    let [p, q, r] = f.map(|i| verts[i]);
                    (q - p).cross(&(r - p))
                };
                let [p, q, r] = f.map(|i| if i == a || i == b { m } else { verts[i] });
                let new = (q - p).cross(&(r - p));
                if new.dot(&old) <= 0.0 || [p, q, r].iter().any(|x| (x - m).norm() > max_len) {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            verts[a] = m;
            for &fi in &vf[b] {
                let f = &mut faces[fi];
                if f.contains(&a) {
                    dead[fi] = true;
                } else {
                    for v in f.iter_mut() {
                        if *v == b {
                            *v = a;
                        }
                    }
                }
            }
            for &w in ring[a].iter().chain(&ring[b]) {
                locked[w] = true;
            }
            locked[a] = true;
            locked[b] = true;
            changed = true;
        }
        let mut k = 0;
        faces.retain(|_| {
            k += 1;
            !dead[k - 1]
        });
        if !changed {
            return;
        }
    }
}

/// Flips edges whose flip brings the four incident valences closer to 6,
/// unless the flip folds the surface.
fn flip_edges(verts: &[V3], faces: &mut [[usize; 3]]) {
    let normal = |f: [usize; 3]| {
        let [p, q, r] = f.map(|i| verts[i]);
        (q - p).cross(&(r - p))
    };
    let quality = |f: [usize; 3]| {
        let e: f64 = (0..3)
            .map(|k| (verts[f[k]] - verts[f[(k + 1) % 3]]).norm_squared())
            .sum();
        2.0 * 3f64.sqrt() * normal(f).norm() / e
    };
    for _ in 0..8 {
        let map = edge_faces(faces);
        let mut valence = vec![0i64; verts.len()];
        for &(a, b) in map.keys() {
            valence[a] += 1;
            valence[b] += 1;
        }
        let mut used = vec![false; faces.len()];
        let mut created = BTreeSet::new();
        let mut changed = false;
        for (&(a, b), fs) in &map {
            if fs.len() != 2 || used[fs[0]] || used[fs[1]] {
                continue;
            }
            // orient so that fs[0] reads a→b
            let (f1, f2) = {
                let f = faces[fs[0]];
                let k = f.iter().position(|&v| v == a).unwrap();
                if f[(k + 1) % 3] == b {
                    (fs[0], fs[1])
                } else {
                    (fs[1], fs[0])
                }
            };
            let c = opposite(&faces[f1], a, b);
            let d = opposite(&faces[f2], a, b);
            let cd = (c.min(d), c.max(d));
            if c == d || map.contains_key(&cd) || created.contains(&cd) || valence[a] <= 3 || valence[b] <= 3 {
                continue;
            }
            let dev = |v: usize, delta: i64| (valence[v] + delta - 6).abs();
            let before = dev(a, 0) + dev(b, 0) + dev(c, 0) + dev(d, 0);
            let after = dev(a, -1) + dev(b, -1) + dev(c, 1) + dev(d, 1);
            if after >= before {
                continue;
            }
            let (g1, g2) = ([c, a, d], [d, b, c]);
            let old = normal(faces[f1]) + normal(faces[f2]);
            let (n1, n2) = (normal(g1), normal(g2));
            if n1.dot(&old) <= 0.0 || n2.dot(&old) <= 0.0 || n1.dot(&n2) <= 0.0 {
                continue;
            }
            let q_old = quality(faces[f1]).min(quality(faces[f2]));
            if quality(g1).min(quality(g2)) < q_old.min(0.5) {
                continue;
            }
            created.insert(cd);
            faces[f1] = g1;
            faces[f2] = g2;
            used[f1] = true;
            used[f2] = true;
            for v in [a, b] {
                valence[v] -= 1;
            }
            for v in [c, d] {
                valence[v] += 1;
            }
            changed = true;
        }
        if !changed {
            return;
        }
    }
}

/// Drops unreferenced vertices and renumbers faces.
fn compact(verts: &[V3], faces: &[[usize; 3]]) -> (Vec<V3>, Vec<[usize; 3]>) {
    let mut map = vec![usize::MAX; verts.len()];
    let mut out = Vec::new();
    for f in faces {
        for &v in f {
            if map[v] == usize::MAX {
                map[v] = out.len();
                out.push(verts[v]);
            }
        }
    }
    (out, faces.iter().map(|f| f.map(|v| map[v])).collect())
}
