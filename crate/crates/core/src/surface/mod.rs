//! Discrete closed hypersurfaces and their pointwise and global geometry.

pub mod ball;
pub mod mesh;
pub mod profile;
pub mod shapes;
pub mod sphere;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{CurvatureTuple, SymmetricCone};
use crate::error::{Error, Result};
use crate::speed::Speed;
use crate::symmetric::SymmetricFunction;

pub use mesh::TriMesh;
pub use profile::ProfileSurface;
pub use shapes::{make_shape, Representation, Resolution, ShapeSpec, SHAPE_NAMES};
pub use sphere::RoundSphere;

/// Area of the unit sphere `S^k ⊂ ℝ^{k+1}`.
pub fn unit_sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI / (k as f64 - 1.0) * unit_sphere_area(k - 2),
    }
}

/// Volume of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    unit_sphere_area(n - 1) / n as f64
}

/// Speed-independent shape data of one node.
#[derive(Debug, Clone)]
pub struct NodeShape {
    pub position: Vec<f64>,
    pub normal: Vec<f64>,
    /// Principal curvatures in frame order (not sorted).
    pub frame_kappa: Vec<f64>,
    /// Principal directions aligned with `frame_kappa`.
    pub frame: Vec<Vec<f64>>,
}

/// Local least-squares stencil of a mesh vertex in its tangent coordinates.
#[derive(Debug, Clone)]
pub struct LocalStencil {
    pub neighbors: Vec<usize>,
    /// Maps neighbor differences to `(g_u, g_v, h_uu, h_uv, h_vv)`.
    pub pinv: DMatrix<f64>,
    pub tangent: [[f64; 3]; 2],
}

/// Shape data of a whole surface.
#[derive(Debug, Clone)]
pub struct ShapeData {
    pub nodes: Vec<NodeShape>,
    /// `|∇A|` per node.
    pub grad_a: Vec<f64>,
    /// Area quadrature weight per node; the weights sum to the surface area.
    pub weights: Vec<f64>,
    /// Smallest stencil spacing.
    pub h_min: f64,
    /// Diagonal-exclusion radius of the chord scan per node.
    pub exclusion: Vec<f64>,
    pub stencils: Vec<LocalStencil>,
}

impl ShapeData {
    pub fn sorted_kappa(&self, i: usize) -> Result<CurvatureTuple> {
        CurvatureTuple::from_slice(&self.nodes[i].frame_kappa)
    }
}

/// Pointwise geometry of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointGeometry {
    pub position: Vec<f64>,
    pub normal: Vec<f64>,
    /// Sorted principal curvatures.
    pub kappa: Vec<f64>,
    /// Principal curvatures in frame order.
    pub frame_kappa: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
    /// `ḟ` in frame order.
    pub fdot: Vec<f64>,
    pub speed: f64,
    pub grad_a: f64,
    pub mean: f64,
    pub norm: f64,
}

impl PointGeometry {
    pub fn tuple(&self) -> CurvatureTuple {
        CurvatureTuple::from_slice(&self.kappa).expect("validated at construction")
    }

    /// `|A|²_F = Σ ḟⁱ κᵢ²`.
    pub fn a2_f(&self) -> f64 {
        self.fdot.iter().zip(&self.frame_kappa).map(|(d, k)| d * k * k).sum()
    }
}

/// Shape data together with speed-dependent quantities.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub shape: ShapeData,
    pub points: Vec<PointGeometry>,
}

impl Geometry {
    /// Evaluates `speed` at every node. Fails with a cone violation (naming
    /// the node farthest outside) if any tuple leaves `cone ∩ Γ_speed`.
    pub fn new(shape: ShapeData, speed: &Speed, cone: Option<&SymmetricCone>) -> Result<Self> {
        let domain = match cone {
            Some(c) => c.intersect(&speed.cone().base())?,
            None => speed.cone().base(),
        };
        let tuples: Vec<CurvatureTuple> = (0..shape.nodes.len())
            .map(|i| shape.sorted_kappa(i))
            .collect::<Result<_>>()?;
        let mut worst: Option<(f64, usize)> = None;
        for (i, k) in tuples.iter().enumerate() {
            if !domain.contains(k)? {
                let d = domain.normalized_boundary_distance(k).unwrap_or(f64::NEG_INFINITY);
                if worst.is_none_or(|(w, _)| d < w) {
                    worst = Some((d, i));
                }
            }
        }
        if let Some((_, i)) = worst {
            return Err(Error::ConeViolation {
                kappa: tuples[i].values().to_vec(),
                cone: format!("{domain} at node {i}"),
            });
        }
        let points = shape
            .nodes
            .par_iter()
            .zip(tuples.par_iter())
            .zip(shape.grad_a.par_iter())
            .map(|((node, k), &grad_a)| {
                let z = &node.frame_kappa;
                PointGeometry {
                    position: node.position.clone(),
                    normal: node.normal.clone(),
                    kappa: k.values().to_vec(),
                    frame_kappa: z.clone(),
                    frame: node.frame.clone(),
                    fdot: speed.gradient(z),
                    speed: speed.value(z),
                    grad_a,
                    mean: k.trace(),
                    norm: k.norm(),
                }
            })
            .collect();
        Ok(Self { shape, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.speed).collect()
    }

    /// Quadrature `∫ u dμ`.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        self.shape.weights.iter().zip(u).map(|(w, v)| w * v).sum()
    }

    /// Largest `Σ ḟⁱ` over the surface.
    pub fn max_fdot_sum(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.fdot.iter().sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalGeometry {
    pub area: f64,
    pub volume: f64,
    pub inradius: f64,
    pub circumradius: f64,
    pub diameter: f64,
}

/// Remeshing triggers; both are dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemeshParams {
    /// Largest allowed ratio between the longest and shortest density-weighted spacing.
    pub spacing_ratio: f64,
    /// Smallest allowed triangle quality `4√3·area/Σ edge²`.
    pub min_quality: f64,
}

impl Default for RemeshParams {
    fn default() -> Self {
        Self {
            spacing_ratio: 1.5,
            min_quality: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    Profile(ProfileSurface),
    Mesh(TriMesh),
    Sphere(RoundSphere),
}

impl Surface {
    /// Curvature dimension `n` (the surface lives in ℝ^{n+1}).
    pub fn dim(&self) -> usize {
        match self {
            Surface::Profile(p) => p.dim(),
            Surface::Mesh(_) => 2,
            Surface::Sphere(s) => s.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Surface::Profile(p) => p.len(),
            Surface::Mesh(m) => m.len(),
            Surface::Sphere(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Surface::Profile(_) => "profile",
            Surface::Mesh(_) => "mesh",
            Surface::Sphere(_) => "sphere",
        }
    }

    pub fn shape_data(&self) -> Result<ShapeData> {
        match self {
            Surface::Profile(p) => p.shape_data(),
            Surface::Mesh(m) => m.shape_data(),
            Surface::Sphere(s) => Ok(s.shape_data()),
        }
    }

    pub fn geometry(&self, speed: &Speed) -> Result<Geometry> {
        self.check_speed(speed)?;
        Geometry::new(self.shape_data()?, speed, None)
    }

    fn check_speed(&self, speed: &Speed) -> Result<()> {
        if speed.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: speed.dim(),
            });
        }
        Ok(())
    }

    pub fn point_geometry(&self, index: usize, speed: &Speed) -> Result<PointGeometry> {
        if index >= self.len() {
            return Err(Error::PointIndex { index, len: self.len() });
        }
        Ok(self.geometry(speed)?.points.swap_remove(index))
    }

    /// Largest and smallest chord curvature `k(x, y) = 2⟨x − y, ν(x)⟩/|x − y|²`
    /// over sample points outside the exclusion radius, or `None` if every
    /// sample is excluded.
    fn chord_extremes(&self, shape: &ShapeData, index: usize) -> Option<(f64, f64)> {
        match self {
            Surface::Profile(p) => p.chord_extremes(shape, index),
            Surface::Mesh(m) => m.chord_extremes(shape, index),
            Surface::Sphere(s) => Some((1.0 / s.radius(), 1.0 / s.radius())),
        }
    }

    /// `(k̄, k̲)` at one node, with the `κₙ`/`κ₁` fallback for excluded pairs.
    pub fn inscribed_exscribed(&self, shape: &ShapeData, index: usize) -> Result<(f64, f64)> {
        if index >= shape.nodes.len() {
            return Err(Error::PointIndex {
                index,
                len: shape.nodes.len(),
            });
        }
        let k = shape.sorted_kappa(index)?;
        Ok(match self.chord_extremes(shape, index) {
            Some((hi, lo)) => (hi.max(k.max()), lo.min(k.min())),
            None => (k.max(), k.min()),
        })
    }

    pub fn inscribed_curvature(&self, shape: &ShapeData, index: usize) -> Result<f64> {
        Ok(self.inscribed_exscribed(shape, index)?.0)
    }

    pub fn exscribed_curvature(&self, shape: &ShapeData, index: usize) -> Result<f64> {
        Ok(self.inscribed_exscribed(shape, index)?.1)
    }

    /// `(k̄, k̲)` at every node (the parallel pair scan).
    pub fn inscribed_exscribed_all(&self, shape: &ShapeData) -> Result<Vec<(f64, f64)>> {
        (0..shape.nodes.len())
            .into_par_iter()
            .map(|i| self.inscribed_exscribed(shape, i))
            .collect()
    }

    pub fn curvature_gradient_norm(&self, shape: &ShapeData, index: usize) -> Result<f64> {
        shape.grad_a.get(index).copied().ok_or(Error::PointIndex {
            index,
            len: shape.grad_a.len(),
        })
    }

    pub fn global_geometry(&self) -> Result<GlobalGeometry> {
        match self {
            Surface::Profile(p) => Ok(p.global_geometry()),
            Surface::Mesh(m) => m.global_geometry(),
            Surface::Sphere(s) => Ok(s.global_geometry()),
        }
    }

    /// Global geometry with the inradius taken from the nodal inscribed
    /// curvatures: the largest inscribed ball is the largest interior tangent
    /// ball at the point where it touches, so `ρ₋ = 1/min k̄`.
    pub fn global_geometry_from_inscribed(&self, k_bar: &[f64]) -> Result<GlobalGeometry> {
        let min = k_bar.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "inscribed curvature must be positive, got {min}"
            )));
        }
        let mut g = match self {
            Surface::Profile(p) => p.extent(),
            Surface::Mesh(m) => m.extent(),
            Surface::Sphere(s) => s.global_geometry(),
        };
        g.inradius = 1.0 / min;
        Ok(g)
    }

    /// Gradient of a node field in the principal frame (frame order).
    pub fn gradient_components(&self, shape: &ShapeData, u: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_field(u)?;
        match self {
            Surface::Profile(p) => Ok(p.gradient_components(shape, u)),
            Surface::Mesh(m) => Ok(m.gradient_components(shape, u)),
            Surface::Sphere(s) => s.gradient_components(u),
        }
    }

    /// `|∇u|²` per node.
    pub fn gradient_norm_sq(&self, shape: &ShapeData, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .gradient_components(shape, u)?
            .iter()
            .map(|g| g.iter().map(|c| c * c).sum())
            .collect())
    }

    /// `Δ_F u = Ḟ^{ij}∇ᵢ∇ⱼu` per node.
    pub fn laplace_f(&self, geom: &Geometry, u: &[f64]) -> Result<Vec<f64>> {
        self.check_field(u)?;
        match self {
            Surface::Profile(p) => Ok(p.laplace_f(geom, u)),
            Surface::Mesh(m) => Ok(m.laplace_f(geom, u)),
            Surface::Sphere(s) => s.gradient_components(u).map(|g| vec![0.0; g.len()]),
        }
    }

    fn check_field(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Moves every node by `−F ν dt`.
    pub fn advance(&self, geom: &Geometry, dt: f64) -> Result<Surface> {
        Ok(match self {
            Surface::Profile(p) => Surface::Profile(p.advance(geom, dt)?),
            Surface::Mesh(m) => Surface::Mesh(m.advance(geom, dt)?),
            Surface::Sphere(s) => Surface::Sphere(s.advance(geom, dt)?),
        })
    }

    pub fn needs_remesh(&self, shape: &ShapeData, params: &RemeshParams) -> bool {
        match self {
            Surface::Profile(p) => p.spacing_ratio(shape) > params.spacing_ratio,
            Surface::Mesh(m) => m.needs_remesh(params),
            Surface::Sphere(_) => false,
        }
    }

    /// Tangential redistribution of the nodes.
    pub fn remesh(&self, shape: &ShapeData) -> Result<Surface> {
        Ok(match self {
            Surface::Profile(p) => Surface::Profile(p.redistribute(Some(&p.density(shape)))?),
            Surface::Mesh(m) => Surface::Mesh(m.remeshed()?),
            Surface::Sphere(s) => Surface::Sphere(s.clone()),
        })
    }

    /// Image under the dilation `x ↦ λx`.
    pub fn scaled(&self, lambda: f64) -> Surface {
        match self {
            Surface::Profile(p) => Surface::Profile(p.scaled(lambda)),
            Surface::Mesh(m) => Surface::Mesh(m.scaled(lambda)),
            Surface::Sphere(s) => Surface::Sphere(s.scaled(lambda)),
        }
    }

    /// Value at the closest surface point to `position` of the piecewise
    /// linear interpolant of the node field `u`.
    pub fn interpolate(&self, position: &[f64], u: &[f64]) -> Result<f64> {
        self.check_field(u)?;
        match self {
            Surface::Profile(p) => Ok(p.interpolate(position, u)),
            Surface::Mesh(m) => Ok(m.interpolate(position, u)),
            Surface::Sphere(_) => Ok(u.iter().sum::<f64>() / u.len() as f64),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_constants() {
        assert!((unit_sphere_area(2) - 4.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-13);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-14);
    }
}
