//! Initial-surface generators with closed-form curvature where available.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ball::V3;
use super::{ProfileSurface, RoundSphere, Surface, TriMesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ShapeSpec {
    Sphere {
        radius: f64,
    },
    /// Semi-axis `a` along the first axis; profiles need `b = c`.
    Ellipsoid {
        a: f64,
        b: f64,
        c: f64,
    },
    /// `r² = (1 − x²/L²)(ρ² + A x²)` with `L = half_length`, `ρ = neck`, `A = bulge`.
    CappedDumbbell {
        half_length: f64,
        neck: f64,
        bulge: f64,
    },
    CappedCylinder {
        radius: f64,
        length: f64,
    },
    Torus {
        major: f64,
        minor: f64,
    },
    ObjInput {
        path: PathBuf,
    },
}

pub const SHAPE_NAMES: &str = "sphere, ellipsoid, capped_dumbbell, capped_cylinder, torus, obj_input";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Mesh for `n = 2` shapes without rotational symmetry, profile otherwise.
    #[default]
    Auto,
    Mesh,
    Profile,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resolution {
    pub representation: Representation,
    /// Icosphere subdivision level for meshes.
    pub level: usize,
    /// Profile segments; torus meshes use this many samples around the axis.
    pub segments: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            representation: Representation::Auto,
            level: 4,
            segments: 200,
        }
    }
}

impl ShapeSpec {
    fn representation(&self, n: usize, requested: Representation) -> Representation {
        if requested != Representation::Auto {
            return requested;
        }
        match self {
            ShapeSpec::Torus { .. } | ShapeSpec::ObjInput { .. } => Representation::Mesh,
            ShapeSpec::Sphere { .. } if n == 2 => Representation::Mesh,
            ShapeSpec::Ellipsoid { b, c, .. } if n == 2 && b != c => Representation::Mesh,
            _ => Representation::Profile,
        }
    }

    /// Principal curvatures (ascending) of the smooth shape at a point of it, if known.
    pub fn curvature_oracle(&self, n: usize, position: &[f64]) -> Option<Vec<f64>> {
        match *self {
            ShapeSpec::Sphere { radius } => Some(vec![1.0 / radius; n]),
            ShapeSpec::Ellipsoid { a, b, c } if n == 2 => {
                let p = V3::new(position[0], position[1], position[2]);
                let h = (p.x * p.x / a.powi(4) + p.y * p.y / b.powi(4) + p.z * p.z / c.powi(4)).sqrt();
                let abc2 = (a * b * c).powi(2);
                let k = 1.0 / (abc2 * h.powi(4));
                let mean = (a * a + b * b + c * c - p.norm_squared()) / (2.0 * abc2 * h.powi(3));
                let disc = (mean * mean - k).max(0.0).sqrt();
                Some(vec![mean - disc, mean + disc])
            }
            ShapeSpec::Ellipsoid { a, b, c } if b == c => {
                let t = (-position[0] / a).clamp(-1.0, 1.0).acos();
                let q = (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
                let mut k = vec![a / (b * q); n];
                k[0] = a * b / q.powi(3);
                k.sort_by(f64::total_cmp);
                Some(k)
            }
            ShapeSpec::Torus { major, minor } if n == 2 => {
                let rho = position[0].hypot(position[1]);
                let mut k = vec![1.0 / minor, (rho - major) / (minor * rho)];
                k.sort_by(f64::total_cmp);
                Some(k)
            }
            _ => None,
        }
    }
}

/// Builds the initial surface of curvature dimension `n`.
pub fn make_shape(spec: &ShapeSpec, n: usize, resolution: &Resolution) -> Result<Surface> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    let rep = spec.representation(n, resolution.representation);
    let need_n2 = |what: &str| -> Result<()> {
        if n != 2 {
            return Err(Error::InvalidParameter(format!(
                "{what} meshes exist only for n = 2, got n = {n}"
            )));
        }
        Ok(())
    };
    let unsupported = |what: &str| Err(Error::InvalidParameter(format!("{what} has no {rep:?} representation")));
    Ok(match (spec, rep) {
        (ShapeSpec::Sphere { radius }, Representation::Mesh) => {
            need_n2("sphere")?;
            Surface::Mesh(TriMesh::icosphere(resolution.level, *radius)?)
        }
        (ShapeSpec::Sphere { radius }, Representation::Profile) => {
            Surface::Profile(ProfileSurface::circle(n, *radius, resolution.segments)?)
        }
        (ShapeSpec::Sphere { radius }, Representation::Analytic) => {
            Surface::Sphere(RoundSphere::new(n, *radius, None)?)
        }
        (ShapeSpec::Ellipsoid { a, b, c }, Representation::Mesh) => {
            need_n2("ellipsoid")?;
            Surface::Mesh(TriMesh::ellipsoid(*a, *b, *c, resolution.level)?)
        }
        (ShapeSpec::Ellipsoid { a, b, c }, Representation::Profile) => {
            if b != c {
                return Err(Error::InvalidParameter(format!(
                    "profile ellipsoids need b = c (rotational symmetry), got b = {b}, c = {c}"
                )));
            }
            Surface::Profile(ProfileSurface::ellipsoid(n, *a, *b, resolution.segments)?)
        }
        (
            ShapeSpec::CappedDumbbell {
                half_length,
                neck,
                bulge,
            },
            Representation::Profile,
        ) => Surface::Profile(ProfileSurface::dumbbell(
            n,
            *half_length,
            *neck,
            *bulge,
            resolution.segments,
        )?),
        (ShapeSpec::CappedCylinder { radius, length }, Representation::Profile) => Surface::Profile(
            ProfileSurface::capped_cylinder(n, *radius, *length, resolution.segments)?,
        ),
        (ShapeSpec::Torus { major, minor }, Representation::Mesh) => {
            need_n2("torus")?;
            let nu = resolution.segments.max(3);
            let nv = ((nu as f64 * minor / major).round() as usize).max(8);
            Surface::Mesh(TriMesh::torus(*major, *minor, nu, nv)?)
        }
        (ShapeSpec::ObjInput { path }, Representation::Mesh) => {
            need_n2("OBJ")?;
            Surface::Mesh(crate::io::obj::read_obj(path)?)
        }
        (ShapeSpec::Sphere { .. }, _) => return unsupported("sphere"),
        (ShapeSpec::Ellipsoid { .. }, _) => return unsupported("ellipsoid"),
        (ShapeSpec::CappedDumbbell { .. }, _) => return unsupported("capped_dumbbell"),
        (ShapeSpec::CappedCylinder { .. }, _) => return unsupported("capped_cylinder"),
        (ShapeSpec::Torus { .. }, _) => return unsupported("torus"),
        (ShapeSpec::ObjInput { .. }, _) => return unsupported("obj_input"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_mesh_curvature() {
        let s = make_shape(&ShapeSpec::Sphere { radius: 2.0 }, 2, &Resolution::default()).unwrap();
        let shape = s.shape_data().unwrap();
        assert_eq!(s.kind(), "mesh");
        for nd in &shape.nodes {
            assert!(nd.frame_kappa.iter().all(|k| (k - 0.5).abs() < 2.5e-3));
        }
    }

    #[test]
    fn representations() {
        let res = Resolution::default();
        let e = ShapeSpec::Ellipsoid { a: 2.0, b: 1.0, c: 1.0 };
        assert_eq!(make_shape(&e, 3, &res).unwrap().kind(), "profile");
        let tri = ShapeSpec::Ellipsoid { a: 2.0, b: 1.0, c: 0.5 };
        assert_eq!(make_shape(&tri, 2, &res).unwrap().kind(), "mesh");
        assert!(make_shape(&tri, 3, &res).is_err());
        let torus = ShapeSpec::Torus { major: 3.0, minor: 1.0 };
        assert!(make_shape(&torus, 3, &res).is_err());
        let analytic = Resolution {
            representation: Representation::Analytic,
            ..res
        };
        assert_eq!(
            make_shape(&ShapeSpec::Sphere { radius: 1.0 }, 4, &analytic)
                .unwrap()
                .kind(),
            "sphere"
        );
        assert!(make_shape(&ShapeSpec::Sphere { radius: -1.0 }, 2, &res).is_err());
    }

    #[test]
    fn oracle_matches_generated_profile() {
        let e = ShapeSpec::Ellipsoid { a: 2.0, b: 1.0, c: 1.0 };
        let res = Resolution {
            segments: 400,
            ..Resolution::default()
        };
        let s = make_shape(&e, 3, &res).unwrap();
        let shape = s.shape_data().unwrap();
        for (i, nd) in shape.nodes.iter().enumerate() {
            let k = e.curvature_oracle(3, &nd.position).unwrap();
            let got = shape.sorted_kappa(i).unwrap();
            for (a, b) in got.values().iter().zip(&k) {
                assert!((a - b).abs() < 1e-3 * b, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn spec_json() {
        let s: ShapeSpec = serde_json::from_str(r#"{"shape": "torus", "major": 3, "minor": 1}"#).unwrap();
        assert_eq!(s, ShapeSpec::Torus { major: 3.0, minor: 1.0 });
        let err = serde_json::from_str::<ShapeSpec>(r#"{"shape": "cube"}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("unknown variant"), "{err}");
    }
}
