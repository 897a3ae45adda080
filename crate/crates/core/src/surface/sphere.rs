//! The analytic round sphere, represented by the `2(n+1)` axis points.

use super::{unit_ball_volume, unit_sphere_area, Geometry, GlobalGeometry, NodeShape, ShapeData};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RoundSphere {
    n: usize,
    radius: f64,
    center: Vec<f64>,
}

impl RoundSphere {
    pub fn new(n: usize, radius: f64, center: Option<Vec<f64>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive, got {radius}"
            )));
        }
        let center = center.unwrap_or_else(|| vec![0.0; n + 1]);
        if center.len() != n + 1 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                got: center.len(),
            });
        }
        Ok(Self { n, radius, center })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        2 * (self.n + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn shape_data(&self) -> ShapeData {
        let n = self.n;
        let k = 1.0 / self.radius;
        let area = unit_sphere_area(n) * self.radius.powi(n as i32);
        let nodes = (0..self.len())
            .map(|i| {
                let axis = i / 2;
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let mut normal = vec![0.0; n + 1];
                normal[axis] = sign;
                let position = self
                    .center
                    .iter()
                    .zip(&normal)
                    .map(|(c, v)| c + self.radius * v)
                    .collect();
                let frame = (0..=n)
                    .filter(|&a| a != axis)
                    .map(|a| {
                        let mut e = vec![0.0; n + 1];
                        e[a] = 1.0;
                        e
                    })
                    .collect();
                NodeShape {
                    position,
                    normal,
                    frame_kappa: vec![k; n],
                    frame,
                }
            })
            .collect();
        ShapeData {
            nodes,
            grad_a: vec![0.0; self.len()],
            weights: vec![area / self.len() as f64; self.len()],
            h_min: self.radius,
            exclusion: vec![0.0; self.len()],
            stencils: Vec::new(),
        }
    }

    pub fn global_geometry(&self) -> GlobalGeometry {
        let n = self.n as i32;
        GlobalGeometry {
            area: unit_sphere_area(self.n) * self.radius.powi(n),
            volume: unit_ball_volume(self.n + 1) * self.radius.powi(n + 1),
            inradius: self.radius,
            circumradius: self.radius,
            diameter: 2.0 * self.radius,
        }
    }

    /// Only rotation-invariant (constant) fields are representable.
    pub fn gradient_components(&self, u: &[f64]) -> Result<Vec<Vec<f64>>> {
        if u.iter().any(|v| *v != u[0]) {
            return Err(Error::Unsupported("a constant field on the analytic sphere"));
        }
        Ok(vec![vec![0.0; self.n]; u.len()])
    }

    /// Explicit Euler step of `dR/dt = −f(κ)`.
    pub fn advance(&self, geom: &Geometry, dt: f64) -> Result<Self> {
        let radius = self.radius - geom.points[0].speed * dt;
        if !(radius > 0.0) {
            return Err(Error::InvalidMesh(format!("sphere radius fell to {radius}")));
        }
        Self::new(self.n, radius, Some(self.center.clone()))
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.n, radius, Some(self.center.clone()))
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            n: self.n,
            radius: self.radius * lambda,
            center: self.center.iter().map(|c| c * lambda).collect(),
        }
    }
}
