//! Symmetric cones of principal-curvature tuples.
//!
//! Every cone used by the laboratory belongs to the nested family
//! `Γ₊ = Γ₁ ⊂ Γ₂ ⊂ … ⊂ Γₙ = {H > 0}`, where `Γ_k` holds the tuples whose
//! every k-element partial sum is positive. An optional normalized margin
//! turns a member of the family into an inner cone `Γ₀ ⋐ Γ_k`.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal curvatures `κ₁ ≤ … ≤ κₙ`, sorted on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTuple {
    values: Vec<f64>,
}

impl CurvatureTuple {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::DimensionTooSmall(values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(Self { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    /// The tuple `(1, …, 1)`.
    pub fn ones(n: usize) -> Self {
        Self { values: vec![1.0; n] }
    }

    /// The unit cylinder tuple `(0, …, 0, 1, …, 1)` with `m` zeros.
    pub fn cylinder(n: usize, m: usize) -> Self {
        let mut values = vec![1.0; n];
        values.iter_mut().take(m).for_each(|v| *v = 0.0);
        Self { values }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let mut values: Vec<f64> = self.values.iter().map(|v| v * lambda).collect();
        if lambda < 0.0 {
            values.reverse();
        }
        Self { values }
    }

    /// The tuple of the oppositely oriented hypersurface.
    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(Error::ZeroTuple);
        }
        Ok(self.scaled(1.0 / norm))
    }

    fn unit(&self) -> Result<Vec<f64>> {
        Ok(self.normalized()?.values)
    }
}

/// An open symmetric cone `Γ_k` (optionally shrunk by a normalized margin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricCone {
    n: usize,
    /// Number of smallest entries whose sum must be positive (`k` in `Γ_k`).
    order: usize,
    margin: f64,
}

impl SymmetricCone {
    /// `Γ₊`, the positive cone.
    pub fn positive(n: usize) -> Self {
        Self {
            n,
            order: 1,
            margin: 0.0,
        }
    }

    /// `Γ_{m+1}`, the cone of (m+1)-convex tuples.
    pub fn m_convex(n: usize, m: usize) -> Result<Self> {
        if m >= n {
            return Err(Error::IndexOutOfRange { m, n });
        }
        Ok(Self {
            n,
            order: m + 1,
            margin: 0.0,
        })
    }

    /// `{H > 0}`.
    pub fn mean_convex(n: usize) -> Self {
        Self {
            n,
            order: n,
            margin: 0.0,
        }
    }

    /// Inner cone of tuples whose normalized distance to the boundary of
    /// `self` exceeds `margin`.
    pub fn shrunken(self, margin: f64) -> Result<Self> {
        let cap = 1.0 / (self.order as f64).sqrt() * (self.order as f64 / self.n as f64).sqrt();
        if !(margin >= 0.0 && margin < cap) {
            return Err(Error::InvalidParameter(format!(
                "cone margin {margin} must lie in [0, {cap:.6}) for this cone"
            )));
        }
        Ok(Self { margin, ..self })
    }

    /// The same cone without margin.
    pub fn base(&self) -> Self {
        Self { margin: 0.0, ..*self }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `m` such that the base cone is `Γ_{m+1}`.
    pub fn m(&self) -> usize {
        self.order - 1
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn is_positive(&self) -> bool {
        self.order == 1
    }

    /// The smaller of two nested cones; margins combine by maximum.
    pub fn intersect(&self, other: &SymmetricCone) -> Result<Self> {
        self.check_dim(other.n)?;
        Ok(Self {
            n: self.n,
            order: self.order.min(other.order),
            margin: self.margin.max(other.margin),
        })
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got });
        }
        Ok(())
    }

    /// Signed distance of a unit vector (any order) to the boundary of the base cone.
    ///
    /// The base cone is the intersection of the half-spaces `Σ_{i∈S} z_i > 0`
    /// over all `k`-subsets `S`; for points inside, the distance to the
    /// boundary equals the smallest half-space distance, which is attained by
    /// the `k` smallest entries.
    fn base_distance_unit(&self, unit: &[f64]) -> f64 {
        let mut sorted = unit.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let partial: f64 = sorted.iter().take(self.order).sum();
        partial / (self.order as f64).sqrt()
    }

    pub fn contains(&self, kappa: &CurvatureTuple) -> Result<bool> {
        self.check_dim(kappa.dim())?;
        let partial: f64 = kappa.values().iter().take(self.order).sum();
        if partial <= 0.0 {
            return Ok(false);
        }
        if self.margin == 0.0 {
            return Ok(true);
        }
        Ok(self.base_distance_unit(&kappa.unit()?) > self.margin)
    }

    /// Signed distance of `κ/|κ|` to the boundary of the base cone, ignoring any margin.
    pub fn base_distance(&self, kappa: &CurvatureTuple) -> Result<f64> {
        self.check_dim(kappa.dim())?;
        Ok(self.base_distance_unit(&kappa.unit()?))
    }

    /// Signed distance of `κ/|κ|` to the cone boundary: exact inside, negative
    /// outside. For a shrunken cone this is the base distance minus the margin.
    pub fn normalized_boundary_distance(&self, kappa: &CurvatureTuple) -> Result<f64> {
        Ok(self.base_distance(kappa)? - self.margin)
    }

    /// Draws a unit tuple uniformly from the cone's slice of the unit sphere
    /// by rejection from isotropic Gaussian directions.
    pub fn sample_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CurvatureTuple> {
        const MAX_ATTEMPTS: usize = 1_000_000;
        for _ in 0..MAX_ATTEMPTS {
            let v: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                continue;
            }
            let t = CurvatureTuple::new(v.into_iter().map(|x| x / norm).collect())?;
            if self.contains(&t)? {
                return Ok(t);
            }
        }
        Err(Error::InvalidParameter(format!(
            "cone {self} is too narrow for rejection sampling"
        )))
    }

    pub fn name(&self) -> String {
        let base = match self.order {
            1 => "positive".to_string(),
            k if k == self.n => "mean_convex".to_string(),
            k => format!("gamma_m(m={})", k - 1),
        };
        if self.margin > 0.0 {
            format!("{base}[n={}, margin={}]", self.n, self.margin)
        } else {
            format!("{base}[n={}]", self.n)
        }
    }
}

impl fmt::Display for SymmetricCone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Unit point of `Cyl_m` on the sphere: `(0, …, 0, 1, …, 1)/√(n−m)`.
fn cylinder_unit(n: usize, m: usize) -> Vec<f64> {
    let scale = 1.0 / ((n - m) as f64).sqrt();
    (0..n).map(|i| if i < m { 0.0 } else { scale }).collect()
}

/// Distance from `κ/|κ|` to the normalized cylinder point of `Cyl_m`, or to
/// the nearest of all of them when `m` is `None`.
///
/// Both `κ` and the cylinder tuple are sorted ascending, which selects the
/// nearest permutation of the cylinder point.
pub fn cyl_distance(kappa: &CurvatureTuple, m: Option<usize>) -> Result<f64> {
    let n = kappa.dim();
    let unit = kappa.unit()?;
    let dist = |m: usize| -> f64 {
        cylinder_unit(n, m)
            .iter()
            .zip(&unit)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    match m {
        Some(m) if m >= n => Err(Error::IndexOutOfRange { m, n }),
        Some(m) => Ok(dist(m)),
        None => Ok((0..n).map(dist).fold(f64::INFINITY, f64::min)),
    }
}

#[derive(Serialize, Deserialize)]
struct ConeRecord {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    margin: Option<f64>,
}

impl Serialize for SymmetricCone {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let (kind, m) = match self.order {
            1 => ("positive", None),
            k if k == self.n => ("mean_convex", None),
            k => ("gamma_m", Some(k - 1)),
        };
        ConeRecord {
            kind: kind.to_string(),
            m,
            n: self.n,
            margin: (self.margin > 0.0).then_some(self.margin),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymmetricCone {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = ConeRecord::deserialize(deserializer)?;
        if rec.n < 2 {
            return Err(D::Error::custom(format!("cone dimension n = {} must be >= 2", rec.n)));
        }
        let base = match rec.kind.as_str() {
            "positive" => SymmetricCone::positive(rec.n),
            "mean_convex" => SymmetricCone::mean_convex(rec.n),
            "gamma_m" => {
                let m = rec
                    .m
                    .ok_or_else(|| D::Error::custom("cone kind `gamma_m` requires field `m`"))?;
                SymmetricCone::m_convex(rec.n, m).map_err(D::Error::custom)?
            }
            other => {
                return Err(D::Error::custom(format!(
                    "unknown cone kind `{other}`; available: positive, gamma_m, mean_convex"
                )))
            }
        };
        match rec.margin {
            Some(margin) => base.shrunken(margin).map_err(D::Error::custom),
            None => Ok(base),
        }
    }
}
