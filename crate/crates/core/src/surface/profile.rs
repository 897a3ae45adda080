//! Rotationally symmetric hypersurfaces generated by a meridian polyline.
//!
//! The profile runs from the left pole `(x₀, 0)` over the upper half-plane to
//! the right pole `(x_N, 0)`; the outward normal at tangent angle `θ` is
//! `(−sin θ, cos θ)`. Each node carries the profile curvature once and the
//! rotational curvature `cos θ / r` with multiplicity `n − 1`.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::ball::{compass_maximize, point_segment_2d};
use super::{unit_ball_volume, unit_sphere_area, Geometry, GlobalGeometry, NodeShape, ShapeData};
use crate::error::{Error, Result};

/// Five-point Gauss–Legendre rule on `[0, 1]`.
const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_0, 0.118_463_442_528_094_5),
    (0.230_765_344_947_158_5, 0.239_314_335_249_683_2),
    (0.5, 0.284_444_444_444_444_4),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_2),
    (0.953_089_922_969_332, 0.118_463_442_528_094_5),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSurface {
    n: usize,
    x: Vec<f64>,
    r: Vec<f64>,
}

/// Signed orientation of the triple `(a, b, c)`.
fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Nonuniform three-point first and second derivatives at an interior node.
fn stencil_derivatives(ha: f64, hb: f64, um: f64, u0: f64, up: f64) -> (f64, f64) {
    let den = ha * hb * (ha + hb);
    (
        (ha * ha * (up - u0) + hb * hb * (u0 - um)) / den,
        2.0 * (ha * (up - u0) - hb * (u0 - um)) / den,
    )
}

impl ProfileSurface {
    /// Validated profile: endpoints on the axis, interior strictly off it,
    /// simple, and oriented so that the enclosed volume is positive.
    pub fn new(n: usize, x: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        let p = Self::from_parts(n, x, r)?;
        let pts: Vec<[f64; 2]> = p.x.iter().zip(&p.r).map(|(&a, &b)| [a, b]).collect();
        let segs = pts.len() - 1;
        for i in 0..segs {
            for j in i + 2..segs {
                if segments_cross(pts[i], pts[i + 1], pts[j], pts[j + 1]) {
                    return Err(Error::InvalidMesh(format!("profile segments {i} and {j} intersect")));
                }
            }
        }
        if !(p.signed_volume() > 0.0) {
            return Err(Error::InvalidMesh(
                "profile must run from the left pole to the right pole through r > 0".into(),
            ));
        }
        Ok(p)
    }

    /// Cheap validation used after every step.
    pub(crate) fn from_parts(n: usize, x: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        if x.len() != r.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: r.len(),
            });
        }
        if x.len() < 5 {
            return Err(Error::InvalidMesh(format!(
                "profile needs at least 5 nodes, got {}",
                x.len()
            )));
        }
        if x.iter().chain(&r).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let last = r.len() - 1;
        if r[0] != 0.0 || r[last] != 0.0 {
            return Err(Error::InvalidMesh(
                "profile endpoints must lie on the axis (r = 0)".into(),
            ));
        }
        if let Some(i) = (1..last).find(|&i| !(r[i] > 0.0)) {
            return Err(Error::InvalidMesh(format!("profile node {i} has r = {} <= 0", r[i])));
        }
        for i in 0..last {
            if (x[i + 1] - x[i]).hypot(r[i + 1] - r[i]) == 0.0 {
                return Err(Error::DegenerateStencil(i));
            }
        }
        Ok(Self { n, x, r })
    }

    /// Samples a parametrized meridian `t ↦ (x(t), r(t))` on `[t0, t1]` at
    /// `segments + 1` nodes equally spaced in arclength. The curve must meet
    /// the axis at both ends.
    pub fn from_parametric(
        n: usize,
        segments: usize,
        t0: f64,
        t1: f64,
        curve: &dyn Fn(f64) -> (f64, f64),
    ) -> Result<Self> {
        if segments < 4 {
            return Err(Error::InvalidParameter(format!(
                "profile needs at least 4 segments, got {segments}"
            )));
        }
        let dense = 256 * segments;
        let ts: Vec<f64> = (0..=dense).map(|k| t0 + (t1 - t0) * k as f64 / dense as f64).collect();
        let pts: Vec<(f64, f64)> = ts.iter().map(|&t| curve(t)).collect();
        let mut cum = vec![0.0; dense + 1];
        for k in 0..dense {
            cum[k + 1] = cum[k] + (pts[k + 1].0 - pts[k].0).hypot(pts[k + 1].1 - pts[k].1);
        }
        let total = cum[dense];
        let mut x = Vec::with_capacity(segments + 1);
        let mut r = Vec::with_capacity(segments + 1);
        let mut k = 0;
        for i in 0..=segments {
            let target = total * i as f64 / segments as f64;
            while k + 1 < dense && cum[k + 1] < target {
                k += 1;
            }
            let span = cum[k + 1] - cum[k];
            let tau = if span > 0.0 {
                ((target - cum[k]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (px, pr) = curve(ts[k] + tau * (ts[k + 1] - ts[k]));
            x.push(px);
            r.push(pr);
        }
        r[0] = 0.0;
        r[segments] = 0.0;
        x[0] = pts[0].0;
        x[segments] = pts[dense].0;
        Self::new(n, x, r)
    }

    /// Round sphere of radius `radius` centred at the origin, nodes equally spaced in angle.
    pub fn circle(n: usize, radius: f64, segments: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive, got {radius}"
            )));
        }
        let mut x = Vec::with_capacity(segments + 1);
        let mut r = Vec::with_capacity(segments + 1);
        for i in 0..=segments {
            let t = PI * i as f64 / segments as f64;
            x.push(-radius * t.cos());
            r.push(radius * t.sin());
        }
        r[0] = 0.0;
        r[segments] = 0.0;
        Self::new(n, x, r)
    }

    /// Ellipsoid of revolution with semi-axis `a` along the axis and `b` across it.
    pub fn ellipsoid(n: usize, a: f64, b: f64, segments: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ellipsoid semi-axes must be positive, got ({a}, {b})"
            )));
        }
        Self::from_parametric(n, segments, 0.0, PI, &|t| (-a * t.cos(), b * t.sin()))
    }

    /// Cylinder of radius `radius` and length `length` closed by hemispherical caps.
    pub fn capped_cylinder(n: usize, radius: f64, length: f64, segments: usize) -> Result<Self> {
        if !(radius > 0.0 && length >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "capped cylinder needs radius > 0 and length >= 0, got ({radius}, {length})"
            )));
        }
        let cap = 0.5 * PI * radius;
        let half = 0.5 * length;
        Self::from_parametric(n, segments, 0.0, 2.0 * cap + length, &|s| {
            if s <= cap {
                let t = s / radius;
                (-half - radius * t.cos(), radius * t.sin())
            } else if s <= cap + length {
                (-half + (s - cap), radius)
            } else {
                let t = (s - cap - length) / radius;
                (half + radius * t.sin(), radius * t.cos())
            }
        })
    }

    /// Dumbbell `r² = (1 − x²/L²)(ρ² + A x²)` on `[−L, L]`: neck radius `ρ`
    /// at `x = 0`, bulbs growing with `A`.
    pub fn dumbbell(n: usize, half_length: f64, neck: f64, bulge: f64, segments: usize) -> Result<Self> {
        if !(half_length > 0.0 && neck > 0.0 && bulge > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dumbbell needs positive half_length, neck and bulge, got ({half_length}, {neck}, {bulge})"
            )));
        }
        let l = half_length;
        // parametrize by x = −L cos t, so that the poles are regular
        Self::from_parametric(n, segments, 0.0, PI, &|t| {
            let x = -l * t.cos();
            let s = t.sin();
            (x, s * (neck * neck + bulge * x * x).sqrt())
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    pub fn rs(&self) -> &[f64] {
        &self.r
    }

    fn last(&self) -> usize {
        self.x.len() - 1
    }

    fn point(&self, i: usize) -> [f64; 2] {
        [self.x[i], self.r[i]]
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        (0..self.last())
            .map(|j| (self.x[j + 1] - self.x[j]).hypot(self.r[j + 1] - self.r[j]))
            .collect()
    }

    /// Arclength coordinate of every node.
    pub fn arclength(&self) -> Vec<f64> {
        let mut s = vec![0.0];
        for l in self.segment_lengths() {
            s.push(s.last().unwrap() + l);
        }
        s
    }

    /// Tangent angle at every node (`π/2` and `−π/2` at the poles).
    pub fn tangent_angles(&self) -> Vec<f64> {
        let last = self.last();
        let len = self.segment_lengths();
        let mut alpha = Vec::with_capacity(last);
        for j in 0..last {
            let a = (self.r[j + 1] - self.r[j]).atan2(self.x[j + 1] - self.x[j]);
            if j == 0 {
                alpha.push(a);
            } else {
                let prev: f64 = alpha[j - 1];
                let mut d = a - prev;
                d -= 2.0 * PI * ((d + PI) / (2.0 * PI)).floor();
                alpha.push(prev + d);
            }
        }
        let mut theta = vec![0.0; last + 1];
        theta[0] = 0.5 * PI;
        theta[last] = -0.5 * PI;
        for i in 1..last {
            let w = len[i - 1] / (len[i - 1] + len[i]);
            theta[i] = alpha[i - 1] + (alpha[i] - alpha[i - 1]) * w;
        }
        theta
    }

    /// Profile and rotational curvature at every node.
    pub fn curvatures(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let last = self.last();
        let theta = self.tangent_angles();
        let three_point = |i: usize, a: [f64; 2], b: [f64; 2]| -> Result<f64> {
            let c = [a[0] + b[0], a[1] + b[1]];
            let den = a[0].hypot(a[1]) * b[0].hypot(b[1]) * c[0].hypot(c[1]);
            if !(den > 0.0) {
                return Err(Error::DegenerateStencil(i));
            }
            Ok(-2.0 * (a[0] * b[1] - a[1] * b[0]) / den)
        };
        let mut kp = vec![0.0; last + 1];
        let mut kr = vec![0.0; last + 1];
        for i in 1..last {
            let a = [self.x[i] - self.x[i - 1], self.r[i] - self.r[i - 1]];
            let b = [self.x[i + 1] - self.x[i], self.r[i + 1] - self.r[i]];
            kp[i] = three_point(i, a, b)?;
            kr[i] = theta[i].cos() / self.r[i];
        }
        // mirror the neighbour across the axis
        kp[0] = three_point(
            0,
            [self.x[0] - self.x[1], self.r[1]],
            [self.x[1] - self.x[0], self.r[1]],
        )?;
        kp[last] = three_point(
            last,
            [self.x[last] - self.x[last - 1], -self.r[last - 1]],
            [self.x[last - 1] - self.x[last], -self.r[last - 1]],
        )?;
        kr[0] = kp[0];
        kr[last] = kp[last];
        Ok((kp, kr))
    }

    /// First and second arclength derivatives of a node field; both poles are
    /// symmetry points, so `u′ = 0` and `u″ = 2(u₁ − u₀)/h²` there.
    fn derivatives(&self, len: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let last = self.last();
        let mut d1 = vec![0.0; last + 1];
        let mut d2 = vec![0.0; last + 1];
        for i in 1..last {
            let (a, b) = stencil_derivatives(len[i - 1], len[i], u[i - 1], u[i], u[i + 1]);
            d1[i] = a;
            d2[i] = b;
        }
        d2[0] = 2.0 * (u[1] - u[0]) / (len[0] * len[0]);
        d2[last] = 2.0 * (u[last - 1] - u[last]) / (len[last - 1] * len[last - 1]);
        (d1, d2)
    }

    /// Area quadrature weights (exact for the polyline surface).
    pub fn area_weights(&self) -> Vec<f64> {
        let last = self.last();
        let len = self.segment_lengths();
        let sphere = unit_sphere_area(self.n - 1);
        let mut w = vec![0.0; last + 1];
        for j in 0..last {
            let (ra, rb) = (self.r[j], self.r[j + 1]);
            for &(t, g) in &GAUSS5 {
                let rt = ra + t * (rb - ra);
                let dens = sphere * len[j] * g * rt.powi(self.n as i32 - 1);
                w[j] += (1.0 - t) * dens;
                w[j + 1] += t * dens;
            }
        }
        w
    }

    fn signed_volume(&self) -> f64 {
        let n = self.n as i32;
        let mut v = 0.0;
        for j in 0..self.last() {
            let (ra, rb) = (self.r[j], self.r[j + 1]);
            let mean: f64 = (0..=n).map(|k| ra.powi(k) * rb.powi(n - k)).sum::<f64>() / (n + 1) as f64;
            v += (self.x[j + 1] - self.x[j]) * mean;
        }
        unit_ball_volume(self.n) * v
    }

    pub fn shape_data(&self) -> Result<ShapeData> {
        let n = self.n;
        let last = self.last();
        let len = self.segment_lengths();
        let theta = self.tangent_angles();
        let (kp, kr) = self.curvatures()?;
        let (dkp, _) = self.derivatives(&len, &kp);
        let (dkr, _) = self.derivatives(&len, &kr);
        let mut nodes = Vec::with_capacity(last + 1);
        let mut grad_a = Vec::with_capacity(last + 1);
        let mut exclusion = Vec::with_capacity(last + 1);
        for i in 0..=last {
            let (s, c) = if i == 0 {
                (1.0, 0.0)
            } else if i == last {
                (-1.0, 0.0)
            } else {
                theta[i].sin_cos()
            };
            let mut position = vec![0.0; n + 1];
            position[0] = self.x[i];
            position[1] = self.r[i];
            let mut normal = vec![0.0; n + 1];
            normal[0] = -s;
            normal[1] = c;
            let mut tangent = vec![0.0; n + 1];
            tangent[0] = c;
            tangent[1] = s;
            let mut frame = vec![tangent];
            let mut frame_kappa = vec![kp[i]];
            for k in 2..=n {
                let mut e = vec![0.0; n + 1];
                e[k] = 1.0;
                frame.push(e);
                frame_kappa.push(kr[i]);
            }
            nodes.push(NodeShape {
                position,
                normal,
                frame_kappa,
                frame,
            });
            grad_a.push((dkp[i] * dkp[i] + 3.0 * (n as f64 - 1.0) * dkr[i] * dkr[i]).sqrt());
            let diameter = if i == 0 {
                2.0 * self.r[1]
            } else if i == last {
                2.0 * self.r[last - 1]
            } else {
                (self.x[i + 1] - self.x[i - 1]).hypot(self.r[i + 1] - self.r[i - 1])
            };
            exclusion.push(2.0 * diameter);
        }
        Ok(ShapeData {
            nodes,
            grad_a,
            weights: self.area_weights(),
            h_min: len.iter().copied().fold(f64::INFINITY, f64::min),
            exclusion,
            stencils: Vec::new(),
        })
    }

    /// Chord-curvature extremes over all (node, azimuth) samples. For fixed
    /// nodes the chord curvature is a linear-fractional function of the cosine
    /// of the azimuth, so its extremes sit at the ends of the admissible range.
    pub fn chord_extremes(&self, shape: &ShapeData, i: usize) -> Option<(f64, f64)> {
        let nu = &shape.nodes[i].normal;
        let rho2 = shape.exclusion[i] * shape.exclusion[i];
        let (xi, ri) = (self.x[i], self.r[i]);
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for j in 0..self.len() {
            let dx = xi - self.x[j];
            let rj = self.r[j];
            let a = dx * nu[0] + ri * nu[1];
            let b = rj * nu[1];
            let d = dx * dx + ri * ri + rj * rj;
            let e = 2.0 * ri * rj;
            let c_top = if e > 0.0 {
                ((d - rho2) / e).min(1.0)
            } else if d >= rho2 {
                1.0
            } else {
                continue;
            };
            if c_top < -1.0 {
                continue;
            }
            for c in [-1.0, c_top] {
                let k = 2.0 * (a - b * c) / (d - e * c);
                hi = hi.max(k);
                lo = lo.min(k);
            }
        }
        (hi > f64::NEG_INFINITY).then_some((hi, lo))
    }

    fn meridian_distance(&self, p: [f64; 2]) -> f64 {
        (0..self.last())
            .map(|j| point_segment_2d(p, self.point(j), self.point(j + 1)).0)
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// Whether a meridian point with `r > 0` lies inside the enclosed region.
    fn meridian_inside(&self, p: [f64; 2]) -> bool {
        let mut inside = false;
        for j in 0..self.last() {
            let (a, b) = (self.point(j), self.point(j + 1));
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn inradius(&self) -> f64 {
        let (xmin, xmax) = self
            .x
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let rmax = self.r.iter().copied().fold(0.0, f64::max);
        let objective = |v: &[f64]| -> Option<f64> {
            let p = [v[0], v[1].abs()];
            (p[1] > 0.0 && self.meridian_inside(p) || p[1] == 0.0 && v[0] > xmin && v[0] < xmax)
                .then(|| self.meridian_distance(p))
        };
        let (gx, gy) = (48, 24);
        let dx = (xmax - xmin) / gx as f64;
        let dy = rmax / gy as f64;
        let mut candidates: Vec<(f64, [f64; 2])> = (0..gx)
            .flat_map(|a| (0..gy).map(move |b| [xmin + (a as f64 + 0.5) * dx, (b as f64 + 0.5) * dy]))
            .collect::<Vec<_>>()
            .par_iter()
            .filter_map(|p| objective(p).map(|d| (d, *p)))
            .collect();
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
        let scale = (xmax - xmin).max(rmax);
        candidates
            .iter()
            .take(4)
            .map(|(_, p)| compass_maximize(p, dx.max(dy), 1e-10 * scale, &objective).1)
            .fold(0.0, f64::max)
    }

    pub fn circumradius(&self) -> f64 {
        let radius = |c: f64| {
            self.x
                .iter()
                .zip(&self.r)
                .map(|(x, r)| (x - c).hypot(*r))
                .fold(0.0, f64::max)
        };
        let (mut a, mut b) = self
            .x
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        for _ in 0..200 {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if radius(m1) <= radius(m2) {
                b = m2;
            } else {
                a = m1;
            }
        }
        radius(0.5 * (a + b))
    }

    pub fn diameter(&self) -> f64 {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                (i..self.len())
                    .map(|j| (self.x[i] - self.x[j]).hypot(self.r[i] + self.r[j]))
                    .fold(0.0, f64::max)
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn global_geometry(&self) -> GlobalGeometry {
        GlobalGeometry {
            inradius: self.inradius(),
            ..self.extent()
        }
    }

    /// Global geometry without the inradius search, which is left NaN.
    pub fn extent(&self) -> GlobalGeometry {
        GlobalGeometry {
            area: self.area_weights().iter().sum(),
            volume: self.signed_volume(),
            inradius: f64::NAN,
            circumradius: self.circumradius(),
            diameter: self.diameter(),
        }
    }

    pub fn gradient_components(&self, _shape: &ShapeData, u: &[f64]) -> Vec<Vec<f64>> {
        let (d1, _) = self.derivatives(&self.segment_lengths(), u);
        d1.iter()
            .map(|&g| {
                let mut v = vec![0.0; self.n];
                v[0] = g;
                v
            })
            .collect()
    }

    /// `Δ_F u = ḟ_p u″ + Σ_rot ḟ (sin θ / r) u′`; every direction sees `u″` at the poles.
    pub fn laplace_f(&self, geom: &Geometry, u: &[f64]) -> Vec<f64> {
        let last = self.last();
        let (d1, d2) = self.derivatives(&self.segment_lengths(), u);
        (0..=last)
            .map(|i| {
                let fdot = &geom.points[i].fdot;
                if i == 0 || i == last {
                    return fdot.iter().sum::<f64>() * d2[i];
                }
                let sin_theta = -geom.points[i].normal[0];
                fdot[0] * d2[i] + fdot[1..].iter().sum::<f64>() * sin_theta / self.r[i] * d1[i]
            })
            .collect()
    }

    pub fn advance(&self, geom: &Geometry, dt: f64) -> Result<Self> {
        let last = self.last();
        let mut x = self.x.clone();
        let mut r = self.r.clone();
        for i in 0..=last {
            let p = &geom.points[i];
            x[i] -= p.speed * p.normal[0] * dt;
            r[i] -= p.speed * p.normal[1] * dt;
        }
        r[0] = 0.0;
        r[last] = 0.0;
        Self::from_parts(self.n, x, r)
    }

    /// Node density `1 + |A|/Ā` (Ā the arclength mean of `|A|`).
    pub fn density(&self, shape: &ShapeData) -> Vec<f64> {
        let len = self.segment_lengths();
        let a: Vec<f64> = shape
            .nodes
            .iter()
            .map(|p| p.frame_kappa.iter().map(|k| k * k).sum::<f64>().sqrt())
            .collect();
        let total: f64 = len.iter().sum();
        let mean = len
            .iter()
            .enumerate()
            .map(|(j, l)| 0.5 * l * (a[j] + a[j + 1]))
            .sum::<f64>()
            / total;
        a.iter().map(|v| 1.0 + v / mean).collect()
    }

    /// Ratio of the largest to the smallest density-weighted segment length.
    pub fn spacing_ratio(&self, shape: &ShapeData) -> f64 {
        let m = self.density(shape);
        let (lo, hi) = self
            .segment_lengths()
            .iter()
            .enumerate()
            .map(|(j, l)| l * 0.5 * (m[j] + m[j + 1]))
            .fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
        hi / lo
    }

    /// Resamples the profile at the same node count, equally spaced in the
    /// measure `density · ds`, with cubic Hermite interpolation of positions.
    pub fn redistribute(&self, density: Option<&[f64]>) -> Result<Self> {
        let last = self.last();
        let len = self.segment_lengths();
        let theta = self.tangent_angles();
        let weight = |j: usize| density.map_or(1.0, |m| 0.5 * (m[j] + m[j + 1]));
        let mut cum = vec![0.0; last + 1];
        for j in 0..last {
            cum[j + 1] = cum[j] + len[j] * weight(j);
        }
        let total = cum[last];
        let mut x = self.x.clone();
        let mut r = self.r.clone();
        let mut j = 0;
        for i in 1..last {
            let target = total * i as f64 / last as f64;
            while j + 1 < last && cum[j + 1] <= target {
                j += 1;
            }
            let tau = ((target - cum[j]) / (cum[j + 1] - cum[j])).clamp(0.0, 1.0);
            let (t2, t3) = (tau * tau, tau * tau * tau);
            let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
            let h10 = t3 - 2.0 * t2 + tau;
            let h01 = -2.0 * t3 + 3.0 * t2;
            let h11 = t3 - t2;
            let (sa, ca) = theta[j].sin_cos();
            let (sb, cb) = theta[j + 1].sin_cos();
            let l = len[j];
            x[i] = h00 * self.x[j] + h10 * l * ca + h01 * self.x[j + 1] + h11 * l * cb;
            r[i] = h00 * self.r[j] + h10 * l * sa + h01 * self.r[j + 1] + h11 * l * sb;
        }
        Self::from_parts(self.n, x, r)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            n: self.n,
            x: self.x.iter().map(|v| v * lambda).collect(),
            r: self.r.iter().map(|v| v * lambda).collect(),
        }
    }

    /// Closest meridian segment and parameter for an ambient point.
    pub fn locate(&self, position: &[f64]) -> (usize, f64) {
        let p = [position[0], position[1..].iter().map(|v| v * v).sum::<f64>().sqrt()];
        let mut best = (f64::INFINITY, 0, 0.0);
        for j in 0..self.last() {
            let (d, t) = point_segment_2d(p, self.point(j), self.point(j + 1));
            if d < best.0 {
                best = (d, j, t);
            }
        }
        (best.1, best.2)
    }

    pub fn interpolate(&self, position: &[f64], u: &[f64]) -> f64 {
        let (j, t) = self.locate(position);
        (1.0 - t) * u[j] + t * u[j + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::speed::Speed;

    #[test]
    fn circle_has_umbilic_curvature() {
        for (n, segs) in [(2, 100), (3, 200), (4, 100)] {
            let p = ProfileSurface::circle(n, 2.0, segs).unwrap();
            let shape = p.shape_data().unwrap();
            let h = PI * 2.0 / segs as f64;
            for node in &shape.nodes {
                for k in &node.frame_kappa {
                    assert!((k - 0.5).abs() < h * h, "{k}");
                }
            }
            assert!(shape.grad_a.iter().all(|g| *g < 1e-6));
        }
    }

    #[test]
    fn cylinder_section_curvature() {
        let p = ProfileSurface::capped_cylinder(3, 1.0, 4.0, 400).unwrap();
        let shape = p.shape_data().unwrap();
        let mid = shape
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, nd)| nd.position[0].abs() < 1.0)
            .collect::<Vec<_>>();
        assert!(!mid.is_empty());
        for (i, nd) in mid {
            assert!(nd.frame_kappa[0].abs() < 1e-9);
            assert!((nd.frame_kappa[1] - 1.0).abs() < 1e-9 && (nd.frame_kappa[2] - 1.0).abs() < 1e-9);
            assert!(shape.grad_a[i] < 1e-6);
        }
    }

    #[test]
    fn ellipsoid_matches_closed_form_curvature() {
        // profile semi-axis a along the axis, b across; parameter t with (x, r) = (−a cos t, b sin t)
        let (a, b) = (2.0, 1.0);
        let closed = |x: f64| {
            let t = (-x / a).clamp(-1.0, 1.0).acos();
            let q = (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
            (a * b / q.powi(3), a / (b * q))
        };
        let mut errors = Vec::new();
        for segs in [100, 200, 400] {
            let p = ProfileSurface::ellipsoid(2, a, b, segs).unwrap();
            let shape = p.shape_data().unwrap();
            let mut worst: f64 = 0.0;
            for nd in &shape.nodes {
                let (kp, kr) = closed(nd.position[0]);
                worst = worst
                    .max((nd.frame_kappa[0] - kp).abs() / kp)
                    .max((nd.frame_kappa[1] - kr).abs() / kr);
            }
            errors.push(worst);
        }
        assert!(errors[0] < 5e-3, "{errors:?}");
        // at least first-order convergence over the ladder
        assert!(
            errors[1] < 0.55 * errors[0] && errors[2] < 0.55 * errors[1],
            "{errors:?}"
        );
        // the tip is umbilic with curvature a/b²
        let p = ProfileSurface::ellipsoid(2, a, b, 400).unwrap();
        let shape = p.shape_data().unwrap();
        assert!((shape.nodes[0].frame_kappa[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn sphere_global_geometry() {
        let p = ProfileSurface::circle(2, 2.0, 400).unwrap();
        let g = p.global_geometry();
        let tol = 1e-4;
        assert!((g.area / (16.0 * PI) - 1.0).abs() < tol);
        assert!((g.volume / (32.0 * PI / 3.0) - 1.0).abs() < tol);
        assert!((g.circumradius - 2.0).abs() < 1e-9);
        assert!((g.inradius / 2.0 - 1.0).abs() < tol);
        assert!((g.diameter - 4.0).abs() < 1e-9);
    }

    #[test]
    fn ellipsoid_global_geometry() {
        let p = ProfileSurface::ellipsoid(2, 2.0, 1.0, 400).unwrap();
        let g = p.global_geometry();
        assert!((g.circumradius - 2.0).abs() < 1e-9);
        assert!((g.inradius - 1.0).abs() < 1e-4, "{}", g.inradius);
        assert!((g.volume / (8.0 * PI / 3.0) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn sphere_chord_curvature_is_constant() {
        let p = ProfileSurface::circle(3, 1.5, 120).unwrap();
        let shape = p.shape_data().unwrap();
        let s = super::super::Surface::Profile(p);
        for i in 0..s.len() {
            let (hi, lo) = s.inscribed_exscribed(&shape, i).unwrap();
            assert!(
                (hi - 1.0 / 1.5).abs() < 1e-3 && (lo - 1.0 / 1.5).abs() < 1e-3,
                "{hi} {lo}"
            );
            let (chi, clo) = s.chord_extremes(&shape, i).unwrap();
            assert!((chi - 1.0 / 1.5).abs() < 1e-12 && (clo - 1.0 / 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn capped_cylinder_inscribed_ball() {
        let p = ProfileSurface::capped_cylinder(3, 1.0, 4.0, 300).unwrap();
        let shape = p.shape_data().unwrap();
        let i = (0..p.len())
            .min_by(|&a, &b| p.x[a].abs().total_cmp(&p.x[b].abs()))
            .unwrap();
        let s = super::super::Surface::Profile(p);
        let (kbar, _) = s.inscribed_exscribed(&shape, i).unwrap();
        assert!((kbar - 1.0).abs() < 1e-9, "{kbar}");
    }

    #[test]
    fn ellipsoid_tip_inscribed_matches_dense_scan() {
        // oracle: brute-force chord scan over a 4x finer profile with full azimuth sampling
        let coarse = ProfileSurface::ellipsoid(2, 2.0, 1.0, 100).unwrap();
        let fine = ProfileSurface::ellipsoid(2, 2.0, 1.0, 400).unwrap();
        let shape = coarse.shape_data().unwrap();
        let kbar = super::super::Surface::Profile(coarse.clone())
            .inscribed_curvature(&shape, 0)
            .unwrap();
        let x = [coarse.x[0], 0.0, 0.0];
        let nu = [-1.0, 0.0, 0.0];
        let mut oracle = f64::NEG_INFINITY;
        for j in 0..fine.len() {
            for k in 0..64 {
                let phi = 2.0 * PI * k as f64 / 64.0;
                let y = [fine.x[j], fine.r[j] * phi.cos(), fine.r[j] * phi.sin()];
                let d: Vec<f64> = (0..3).map(|c| x[c] - y[c]).collect();
                let d2: f64 = d.iter().map(|v| v * v).sum();
                if d2 > 1e-6 {
                    let k = 2.0 * (d[0] * nu[0] + d[1] * nu[1] + d[2] * nu[2]) / d2;
                    oracle = oracle.max(k);
                }
            }
        }
        // the osculating ball of radius b²/a at the tip is inscribed, so the scan approaches κ = 2
        assert!((kbar - 2.0).abs() < 5e-3, "{kbar}");
        assert!((oracle - kbar).abs() < 5e-3, "{oracle} vs {kbar}");
    }

    #[test]
    fn orientation_swaps_inscribed_and_exscribed() {
        // reversing orientation maps k(x, y) to −k(x, y), so (k̄, k̲) ↦ (−k̲, −k̄)
        let p = ProfileSurface::ellipsoid(2, 2.0, 1.0, 80).unwrap();
        let shape = p.shape_data().unwrap();
        let s = super::super::Surface::Profile(p);
        let mut flipped = shape.clone();
        for nd in &mut flipped.nodes {
            nd.normal.iter_mut().for_each(|v| *v = -*v);
            nd.frame_kappa.iter_mut().for_each(|v| *v = -*v);
        }
        for i in [0, 13, 40] {
            let (hi, lo) = s.inscribed_exscribed(&shape, i).unwrap();
            let (fhi, flo) = s.inscribed_exscribed(&flipped, i).unwrap();
            assert!((fhi + lo).abs() < 1e-12 && (flo + hi).abs() < 1e-12);
        }
    }

    #[test]
    fn redistribution_of_uniform_circle_is_identity() {
        let p = ProfileSurface::circle(3, 1.3, 64).unwrap();
        let q = p.redistribute(None).unwrap();
        let (ga, gb) = (p.global_geometry(), q.global_geometry());
        assert!((ga.area - gb.area).abs() < 1e-10 * ga.area);
        assert!((ga.volume - gb.volume).abs() < 1e-10 * ga.volume);
        let (ka, _) = p.curvatures().unwrap();
        let (kb, _) = q.curvatures().unwrap();
        for (a, b) in ka.iter().zip(&kb) {
            assert!((a - b).abs() < 1e-10 * a.abs());
        }
    }

    #[test]
    fn redistribution_of_nonuniform_ellipse_is_high_order() {
        let p = ProfileSurface::from_parametric(2, 120, 0.0, PI, &|t| (-2.0 * t.cos(), t.sin())).unwrap();
        let shape = p.shape_data().unwrap();
        let q = p.redistribute(Some(&p.density(&shape))).unwrap();
        let (ga, gb) = (p.global_geometry(), q.global_geometry());
        assert!((ga.volume - gb.volume).abs() < 1e-5 * ga.volume);
        assert!(q.spacing_ratio(&q.shape_data().unwrap()) < 1.1);
    }

    #[test]
    fn mean_curvature_laplacian_of_quadratic_field() {
        // u = x² on the unit circle profile (n = 2): Δu = 2 − 6x² on the unit sphere
        let p = ProfileSurface::circle(2, 1.0, 400).unwrap();
        let speed = Speed::mean(2);
        let geom = super::super::Surface::Profile(p.clone()).geometry(&speed).unwrap();
        let u: Vec<f64> = p.x.iter().map(|x| x * x).collect();
        let lap = p.laplace_f(&geom, &u);
        for (i, l) in lap.iter().enumerate() {
            let x = p.x[i];
            assert!((l - (2.0 - 6.0 * x * x)).abs() < 2e-3, "{i}: {l}");
        }
    }

    #[test]
    fn dumbbell_is_mean_convex_with_a_neck() {
        let p = ProfileSurface::dumbbell(3, 3.0, 0.3, 1.0, 400).unwrap();
        let shape = p.shape_data().unwrap();
        let mid = (0..p.len())
            .min_by(|&a, &b| p.x[a].abs().total_cmp(&p.x[b].abs()))
            .unwrap();
        assert!(shape.nodes[mid].frame_kappa[0] < 0.0);
        for nd in &shape.nodes {
            assert!(nd.frame_kappa.iter().sum::<f64>() > 0.0);
        }
    }

    #[test]
    fn rejects_bad_profiles() {
        assert!(ProfileSurface::new(2, vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![0.0, 1.0, 1.0, 1.0, 0.5]).is_err());
        assert!(ProfileSurface::new(2, vec![4.0, 3.0, 2.0, 1.0, 0.0], vec![0.0, 1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(ProfileSurface::new(2, vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![0.0, 1.0, -1.0, 1.0, 0.0]).is_err());
        assert!(ProfileSurface::new(2, vec![0.0, 2.0, 2.0, 0.5, 4.0], vec![0.0, 2.0, 0.5, 1.5, 0.0]).is_err());
    }
}
