//! Catalog of admissible speeds and their eigenvalue derivatives.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cone::{CurvatureTuple, SymmetricCone};
use crate::error::{Error, Result};
use crate::symmetric::{self, SymmetricFunction};

/// Convexity class of a speed as a function of the eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    Linear,
    Concave,
    Convex,
    Unknown,
}

impl Convexity {
    pub fn is_concave(self) -> bool {
        matches!(self, Convexity::Linear | Convexity::Concave)
    }

    pub fn is_convex(self) -> bool {
        matches!(self, Convexity::Linear | Convexity::Convex)
    }
}

pub type CustomFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum SpeedKind {
    /// `H = Σ κᵢ`.
    Mean,
    /// `(n⁻¹ Σ κᵢʳ)^{1/r}`; `r = 0` is the geometric mean.
    PowerMean { r: f64 },
    /// `|A| = (Σ κᵢ²)^{1/2}`.
    Norm,
    /// `(σ_k/σ_l)^{1/(k−l)}` with unnormalized elementary symmetric polynomials.
    ElementaryRatio { k: usize, l: usize },
    /// `(Σ_{i<j} (κᵢ+κⱼ)⁻¹)⁻¹`.
    TwoHarmonic,
    /// `a·H + b·other`.
    Combination { a: f64, b: f64, other: Box<SpeedKind> },
    /// A user function; derivatives by finite differences, no coincident-eigenvalue rule.
    Custom {
        name: String,
        func: CustomFn,
        cone: SymmetricCone,
        convexity: Convexity,
    },
}

impl fmt::Debug for SpeedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpeedKind::Mean => write!(f, "Mean"),
            SpeedKind::PowerMean { r } => write!(f, "PowerMean {{ r: {r} }}"),
            SpeedKind::Norm => write!(f, "Norm"),
            SpeedKind::ElementaryRatio { k, l } => write!(f, "ElementaryRatio {{ k: {k}, l: {l} }}"),
            SpeedKind::TwoHarmonic => write!(f, "TwoHarmonic"),
            SpeedKind::Combination { a, b, other } => {
                write!(f, "Combination {{ a: {a}, b: {b}, other: {other:?} }}")
            }
            SpeedKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// An admissible speed `f` in a fixed dimension `n`.
#[derive(Debug, Clone)]
pub struct Speed {
    kind: SpeedKind,
    n: usize,
    cone: SymmetricCone,
}

/// Value and eigenvalue derivatives of a speed at one tuple.
#[derive(Debug, Clone)]
pub struct DerivativeBundle {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub eigen_hessian: DMatrix<f64>,
    /// `(ḟⁱ − ḟʲ)/(κᵢ − κⱼ)` with the coincident limit applied; `None` when two
    /// eigenvalues coincide and the speed has no limit rule.
    pub quotients: Option<DMatrix<f64>>,
}

impl DerivativeBundle {
    /// The matrix second-derivative form at `diag(κ)` in direction `V`.
    pub fn form(&self, v: &DMatrix<f64>) -> Result<f64> {
        let q = self
            .quotients
            .as_ref()
            .ok_or(Error::DegenerateEigenvalues { i: 0, j: 0, gap: 0.0 })?;
        Ok(symmetric::form_from_parts(&self.eigen_hessian, q, v))
    }
}

fn kind_cone(kind: &SpeedKind, n: usize) -> Result<SymmetricCone> {
    Ok(match kind {
        SpeedKind::Mean => SymmetricCone::mean_convex(n),
        SpeedKind::PowerMean { .. } | SpeedKind::Norm | SpeedKind::ElementaryRatio { .. } => SymmetricCone::positive(n),
        SpeedKind::TwoHarmonic => SymmetricCone::m_convex(n, 1)?,
        SpeedKind::Combination { other, .. } => kind_cone(other, n)?,
        SpeedKind::Custom { cone, .. } => *cone,
    })
}

fn validate(kind: &SpeedKind, n: usize) -> Result<()> {
    match kind {
        SpeedKind::PowerMean { r } if !r.is_finite() => Err(Error::InvalidParameter(format!(
            "power mean exponent r = {r} must be finite"
        ))),
        SpeedKind::ElementaryRatio { k, l } if !(l < k && *k <= n) => Err(Error::InvalidParameter(format!(
            "elementary ratio requires 0 <= l < k <= n, got k = {k}, l = {l}, n = {n}"
        ))),
        SpeedKind::Combination { a, b, other } => {
            if !(*a >= 0.0 && *b >= 0.0 && a + b > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "combination weights must satisfy a, b >= 0 and a + b > 0, got a = {a}, b = {b}"
                )));
            }
            validate(other, n)
        }
        SpeedKind::Custom { cone, .. } if cone.dim() != n => Err(Error::DimensionMismatch {
            expected: n,
            got: cone.dim(),
        }),
        _ => Ok(()),
    }
}

impl Speed {
    pub fn new(kind: SpeedKind, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        validate(&kind, n)?;
        let cone = kind_cone(&kind, n)?;
        Ok(Self { kind, n, cone })
    }

    pub fn mean(n: usize) -> Self {
        Self::new(SpeedKind::Mean, n).expect("valid")
    }

    pub fn power_mean(n: usize, r: f64) -> Result<Self> {
        Self::new(SpeedKind::PowerMean { r }, n)
    }

    pub fn harmonic_mean(n: usize) -> Self {
        Self::new(SpeedKind::PowerMean { r: -1.0 }, n).expect("valid")
    }

    pub fn norm(n: usize) -> Self {
        Self::new(SpeedKind::Norm, n).expect("valid")
    }

    pub fn elementary_ratio(n: usize, k: usize, l: usize) -> Result<Self> {
        Self::new(SpeedKind::ElementaryRatio { k, l }, n)
    }

    pub fn two_harmonic(n: usize) -> Self {
        Self::new(SpeedKind::TwoHarmonic, n).expect("valid")
    }

    pub fn combination(n: usize, a: f64, b: f64, other: SpeedKind) -> Result<Self> {
        Self::new(
            SpeedKind::Combination {
                a,
                b,
                other: Box::new(other),
            },
            n,
        )
    }

    pub fn custom(
        n: usize,
        name: impl Into<String>,
        cone: SymmetricCone,
        convexity: Convexity,
        func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(
            SpeedKind::Custom {
                name: name.into(),
                func: Arc::new(func),
                cone,
                convexity,
            },
            n,
        )
    }

    /// Every catalog entry in dimension `n`, one per family member used by the tests.
    pub fn catalog(n: usize) -> Vec<Speed> {
        let mut out = vec![
            Speed::mean(n),
            Speed::power_mean(n, 2.0).expect("valid"),
            Speed::power_mean(n, 0.5).expect("valid"),
            Speed::power_mean(n, 0.0).expect("valid"),
            Speed::harmonic_mean(n),
            Speed::power_mean(n, -2.0).expect("valid"),
            Speed::norm(n),
            Speed::two_harmonic(n),
            Speed::combination(n, 1.0, 1.0, SpeedKind::PowerMean { r: -1.0 }).expect("valid"),
            Speed::combination(n, 0.5, 1.0, SpeedKind::Norm).expect("valid"),
        ];
        for k in 1..=n {
            for l in 0..k {
                if (k, l) != (1, 0) {
                    out.push(Speed::elementary_ratio(n, k, l).expect("valid"));
                }
            }
        }
        out
    }

    pub fn kind(&self) -> &SpeedKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Natural domain of the speed.
    pub fn cone(&self) -> &SymmetricCone {
        &self.cone
    }

    pub fn name(&self) -> String {
        kind_name(&self.kind)
    }

    pub fn convexity(&self) -> Convexity {
        kind_convexity(&self.kind)
    }

    /// Whether the dual `1/f(1/z)` is concave on `Γ₊`, where known in closed
    /// form: convex speeds are, and the power mean of order `r` is iff `r ≥ −1`.
    pub fn inverse_concave(&self) -> Option<bool> {
        match &self.kind {
            SpeedKind::Mean | SpeedKind::Norm | SpeedKind::ElementaryRatio { .. } => Some(true),
            SpeedKind::PowerMean { r } => Some(*r >= -1.0),
            SpeedKind::Combination { b, .. } if *b == 0.0 => Some(true),
            _ if self.convexity().is_convex() => Some(true),
            _ => None,
        }
    }

    fn check(&self, kappa: &CurvatureTuple) -> Result<()> {
        if kappa.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: kappa.dim(),
            });
        }
        if !self.cone.base().contains(kappa)? {
            return Err(Error::ConeViolation {
                kappa: kappa.values().to_vec(),
                cone: self.cone.to_string(),
            });
        }
        Ok(())
    }

    /// `f(κ)`; a tuple outside the natural cone is a type-0 hazard.
    pub fn evaluate(&self, kappa: &CurvatureTuple) -> Result<f64> {
        self.check(kappa)?;
        Ok(self.value(kappa.values()))
    }

    pub fn derivatives(&self, kappa: &CurvatureTuple) -> Result<DerivativeBundle> {
        self.check(kappa)?;
        let z = kappa.values();
        let gradient = self.gradient(z);
        let eigen_hessian = self.hessian(z);
        let quotients = symmetric::difference_quotients(self, z, &gradient, &eigen_hessian).ok();
        Ok(DerivativeBundle {
            value: self.value(z),
            gradient,
            eigen_hessian,
            quotients,
        })
    }

    pub fn second_derivative_form(&self, kappa: &CurvatureTuple, v: &DMatrix<f64>) -> Result<f64> {
        self.check(kappa)?;
        if v.nrows() != self.n || v.ncols() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.nrows(),
            });
        }
        let sym = (v + v.transpose()) * 0.5;
        symmetric::second_derivative_form(self, kappa.values(), &sym)
    }

    /// `c_m = 1/f(0, …, 0, 1, …, 1)` with `m` zeros.
    pub fn cylinder_constant(&self, m: usize) -> Result<f64> {
        if m >= self.n {
            return Err(Error::IndexOutOfRange { m, n: self.n });
        }
        let tuple = CurvatureTuple::cylinder(self.n, m);
        // Cone membership of the closure: every partial sum of a nonnegative tuple is >= 0.
        let outside = || Error::CylinderOutsideDomain { m, speed: self.name() };
        let value = if m == 0 {
            self.value(tuple.values())
        } else {
            self.closure_value(tuple.values()).ok_or_else(outside)?
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(outside());
        }
        Ok(1.0 / value)
    }

    /// Value at a point on the boundary of the positive cone, or `None` when
    /// the formula has no finite positive limit there.
    fn closure_value(&self, z: &[f64]) -> Option<f64> {
        let v = match &self.kind {
            SpeedKind::Custom { func, .. } => func(z),
            _ => self.value(z),
        };
        (v.is_finite() && v > 0.0).then_some(v)
    }

    /// `Θ`: the maximum of the variant numerator over `f` on the cone slice,
    /// raised to every extra lower bound.
    pub fn theta_constant(
        &self,
        cone: &SymmetricCone,
        variant: ThetaVariant,
        extra_lower_bounds: &[f64],
    ) -> Result<f64> {
        let max = self.theta_slice_max(cone, variant, 20_000, 0x7e7a)?;
        Ok(extra_lower_bounds.iter().fold(max, |acc, &b| acc.max(b)))
    }

    /// Maximizes the Θ ratio over `cone ∩ Sⁿ⁻¹` by seeded sampling followed by
    /// compass search from the best samples.
    pub fn theta_slice_max(
        &self,
        cone: &SymmetricCone,
        variant: ThetaVariant,
        samples: usize,
        seed: u64,
    ) -> Result<f64> {
        const UNBOUNDED: f64 = 1e6;
        if cone.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: cone.dim(),
            });
        }
        let domain = cone.intersect(&self.cone.base())?;
        let ratio = |z: &[f64]| -> Option<f64> {
            let t = CurvatureTuple::from_slice(z).ok()?;
            if !domain.contains(&t).ok()? {
                return None;
            }
            let t = t.normalized().ok()?;
            let z = t.values();
            let f = self.value(z);
            let tr: f64 = z.iter().sum();
            let num = match variant {
                ThetaVariant::Concave => tr + 1.0,
                ThetaVariant::Convex => 1.0 - tr,
            };
            Some(num / f)
        };
        let unbounded = |z: &[f64]| Error::UnboundedRatio { direction: z.to_vec() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pool: Vec<(f64, Vec<f64>)> = Vec::with_capacity(samples);
        for _ in 0..samples {
            let t = domain.sample_unit(&mut rng)?;
            let z = t.values().to_vec();
            let f = self.value(&z);
            let r = ratio(&z).expect("sampled inside");
            if !(f > 1e-12) || !r.is_finite() || r.abs() > UNBOUNDED {
                return Err(unbounded(&z));
            }
            pool.push((r, z));
        }
        pool.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));
        let mut best = pool[0].0;
        for (start_value, start) in pool.iter().take(8) {
            let mut x = start.clone();
            let mut fx = *start_value;
            let mut step = 0.05;
            while step > 1e-12 {
                let mut improved = false;
                for i in 0..self.n {
                    for sign in [1.0, -1.0] {
                        let mut y = x.clone();
                        y[i] += sign * step;
                        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                        y.iter_mut().for_each(|v| *v /= norm);
                        if let Some(fy) = ratio(&y) {
                            if !fy.is_finite() || fy.abs() > UNBOUNDED || !(self.value(&sorted(&y)) > 1e-12) {
                                return Err(unbounded(&sorted(&y)));
                            }
                            if fy > fx {
                                x = y;
                                fx = fy;
                                improved = true;
                            }
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            best = best.max(fx);
        }
        Ok(best)
    }

    /// Samples a tuple from the slice of `cone ∩ domain`, deterministic in `(seed, index)`.
    pub fn sample_in(&self, cone: &SymmetricCone, seed: u64, index: u64) -> Result<CurvatureTuple> {
        let domain = cone.intersect(&self.cone.base())?;
        let mut rng = indexed_rng(seed, index);
        domain.sample_unit(&mut rng)
    }
}

fn sorted(z: &[f64]) -> Vec<f64> {
    let mut v = z.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    v
}

/// An RNG stream determined by `(seed, index)` only.
pub fn indexed_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Random symmetric matrix with unit Frobenius norm.
pub fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    use rand_distr::StandardNormal;
    let mut v = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let x: f64 = rng.sample(StandardNormal);
            v[(i, j)] = x;
            v[(j, i)] = x;
        }
    }
    let norm = v.norm();
    v / norm
}

/// Numerator of the Θ ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaVariant {
    /// `tr(z) + |z|`.
    Concave,
    /// `|z| − tr(z)`.
    Convex,
}

fn kind_name(kind: &SpeedKind) -> String {
    match kind {
        SpeedKind::Mean => "mean_curvature".into(),
        SpeedKind::PowerMean { r } if *r == -1.0 => "harmonic_mean".into(),
        SpeedKind::PowerMean { r } => format!("power_mean(r={r})"),
        SpeedKind::Norm => "norm".into(),
        SpeedKind::ElementaryRatio { k, l } => format!("elementary_ratio(k={k},l={l})"),
        SpeedKind::TwoHarmonic => "two_harmonic_mean".into(),
        SpeedKind::Combination { a, b, other } => format!("{a}*H+{b}*{}", kind_name(other)),
        SpeedKind::Custom { name, .. } => name.clone(),
    }
}

fn kind_convexity(kind: &SpeedKind) -> Convexity {
    match kind {
        SpeedKind::Mean => Convexity::Linear,
        SpeedKind::PowerMean { r } if *r == 1.0 => Convexity::Linear,
        SpeedKind::PowerMean { r } if *r < 1.0 => Convexity::Concave,
        SpeedKind::PowerMean { .. } | SpeedKind::Norm => Convexity::Convex,
        SpeedKind::ElementaryRatio { k, l } if *k == 1 && *l == 0 => Convexity::Linear,
        SpeedKind::ElementaryRatio { .. } | SpeedKind::TwoHarmonic => Convexity::Concave,
        SpeedKind::Combination { b, other, .. } => {
            if *b == 0.0 {
                Convexity::Linear
            } else {
                kind_convexity(other)
            }
        }
        SpeedKind::Custom { convexity, .. } => *convexity,
    }
}

/// `σ_k` of the entries of `z`, skipping the indices in `skip`.
fn elementary(z: &[f64], k: usize, skip: &[usize]) -> f64 {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (i, &x) in z.iter().enumerate() {
        if skip.contains(&i) {
            continue;
        }
        for j in (1..=k).rev() {
            e[j] += e[j - 1] * x;
        }
    }
    e[k]
}

fn kind_value(kind: &SpeedKind, n: usize, z: &[f64]) -> f64 {
    match kind {
        SpeedKind::Mean => z.iter().sum(),
        SpeedKind::PowerMean { r } => {
            if *r == 0.0 {
                (z.iter().map(|v| v.ln()).sum::<f64>() / n as f64).exp()
            } else {
                (z.iter().map(|v| v.powf(*r)).sum::<f64>() / n as f64).powf(1.0 / r)
            }
        }
        SpeedKind::Norm => z.iter().map(|v| v * v).sum::<f64>().sqrt(),
        SpeedKind::ElementaryRatio { k, l } => {
            (elementary(z, *k, &[]) / elementary(z, *l, &[])).powf(1.0 / (k - l) as f64)
        }
        SpeedKind::TwoHarmonic => {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..i {
                    s += 1.0 / (z[i] + z[j]);
                }
            }
            1.0 / s
        }
        SpeedKind::Combination { a, b, other } => a * z.iter().sum::<f64>() + b * kind_value(other, n, z),
        SpeedKind::Custom { func, .. } => func(z),
    }
}

const FD_STEP: f64 = 1e-3;

fn kind_gradient(kind: &SpeedKind, n: usize, z: &[f64]) -> Vec<f64> {
    match kind {
        SpeedKind::Mean => vec![1.0; n],
        SpeedKind::PowerMean { r } => {
            let f = kind_value(kind, n, z);
            if *r == 0.0 {
                z.iter().map(|v| f / (n as f64 * v)).collect()
            } else {
                z.iter().map(|v| f.powf(1.0 - r) * v.powf(r - 1.0) / n as f64).collect()
            }
        }
        SpeedKind::Norm => {
            let f = kind_value(kind, n, z);
            z.iter().map(|v| v / f).collect()
        }
        SpeedKind::ElementaryRatio { k, l } => {
            let f = kind_value(kind, n, z);
            log_gradient_elementary(z, *k, *l).iter().map(|w| f * w).collect()
        }
        SpeedKind::TwoHarmonic => {
            let f = kind_value(kind, n, z);
            (0..n)
                .map(|i| {
                    let s: f64 = (0..n).filter(|&j| j != i).map(|j| (z[i] + z[j]).powi(-2)).sum();
                    f * f * s
                })
                .collect()
        }
        SpeedKind::Combination { a, b, other } => kind_gradient(other, n, z).into_iter().map(|g| a + b * g).collect(),
        SpeedKind::Custom { func, .. } => symmetric::fd_gradient(&|w: &[f64]| func(w), z, FD_STEP),
    }
}

fn log_gradient_elementary(z: &[f64], k: usize, l: usize) -> Vec<f64> {
    let sk = elementary(z, k, &[]);
    let sl = elementary(z, l, &[]);
    let d = (k - l) as f64;
    (0..z.len())
        .map(|i| {
            let dk = if k == 0 { 0.0 } else { elementary(z, k - 1, &[i]) };
            let dl = if l == 0 { 0.0 } else { elementary(z, l - 1, &[i]) };
            (dk / sk - dl / sl) / d
        })
        .collect()
}

fn kind_hessian(kind: &SpeedKind, n: usize, z: &[f64]) -> DMatrix<f64> {
    match kind {
        SpeedKind::Mean => DMatrix::zeros(n, n),
        SpeedKind::PowerMean { r } => {
            let f = kind_value(kind, n, z);
            let g = kind_gradient(kind, n, z);
            DMatrix::from_fn(n, n, |i, j| {
                let diag = if i == j { g[i] / z[i] } else { 0.0 };
                if *r == 0.0 {
                    g[i] * g[j] / f - diag
                } else {
                    (r - 1.0) * (diag - g[i] * g[j] / f)
                }
            })
        }
        SpeedKind::Norm => symmetric::Norm(n).hessian(z),
        SpeedKind::ElementaryRatio { k, l } => {
            let f = kind_value(kind, n, z);
            let w = log_gradient_elementary(z, *k, *l);
            let log_hessian = |q: usize| -> DMatrix<f64> {
                if q == 0 {
                    return DMatrix::zeros(n, n);
                }
                let s = elementary(z, q, &[]);
                let d: Vec<f64> = (0..n).map(|i| elementary(z, q - 1, &[i])).collect();
                DMatrix::from_fn(n, n, |i, j| {
                    let second = if i == j || q < 2 {
                        0.0
                    } else {
                        elementary(z, q - 2, &[i, j])
                    };
                    second / s - d[i] * d[j] / (s * s)
                })
            };
            let big_w = (log_hessian(*k) - log_hessian(*l)) / (k - l) as f64;
            DMatrix::from_fn(n, n, |i, j| f * (big_w[(i, j)] + w[i] * w[j]))
        }
        SpeedKind::TwoHarmonic => {
            let f = kind_value(kind, n, z);
            let ds: Vec<f64> = (0..n)
                .map(|i| -(0..n).filter(|&j| j != i).map(|j| (z[i] + z[j]).powi(-2)).sum::<f64>())
                .collect();
            DMatrix::from_fn(n, n, |i, j| {
                let d2s = if i == j {
                    2.0 * (0..n).filter(|&q| q != i).map(|q| (z[i] + z[q]).powi(-3)).sum::<f64>()
                } else {
                    2.0 * (z[i] + z[j]).powi(-3)
                };
                2.0 * f * f * f * ds[i] * ds[j] - f * f * d2s
            })
        }
        SpeedKind::Combination { b, other, .. } => kind_hessian(other, n, z) * *b,
        SpeedKind::Custom { func, .. } => symmetric::fd_hessian(&|w: &[f64]| func(w), z, FD_STEP),
    }
}

fn kind_has_limit_rule(kind: &SpeedKind) -> bool {
    match kind {
        SpeedKind::Custom { .. } => false,
        SpeedKind::Combination { other, .. } => kind_has_limit_rule(other),
        _ => true,
    }
}

impl SymmetricFunction for Speed {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, z: &[f64]) -> f64 {
        kind_value(&self.kind, self.n, z)
    }
    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        kind_gradient(&self.kind, self.n, z)
    }
    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        kind_hessian(&self.kind, self.n, z)
    }
    fn has_limit_rule(&self) -> bool {
        kind_has_limit_rule(&self.kind)
    }
}

/// Speed as written in run configs, e.g. `{"speed": "power_mean", "r": -1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "speed", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpeedSpec {
    MeanCurvature,
    PowerMean { r: f64 },
    HarmonicMean,
    Norm,
    ElementaryRatio { k: usize, l: usize },
    TwoHarmonicMean,
    Combination { a: f64, b: f64, other: Box<SpeedSpec> },
}

pub const SPEED_NAMES: &str =
    "mean_curvature, power_mean, harmonic_mean, norm, elementary_ratio, two_harmonic_mean, combination";

impl SpeedSpec {
    pub fn kind(&self) -> SpeedKind {
        match self {
            SpeedSpec::MeanCurvature => SpeedKind::Mean,
            SpeedSpec::PowerMean { r } => SpeedKind::PowerMean { r: *r },
            SpeedSpec::HarmonicMean => SpeedKind::PowerMean { r: -1.0 },
            SpeedSpec::Norm => SpeedKind::Norm,
            SpeedSpec::ElementaryRatio { k, l } => SpeedKind::ElementaryRatio { k: *k, l: *l },
            SpeedSpec::TwoHarmonicMean => SpeedKind::TwoHarmonic,
            SpeedSpec::Combination { a, b, other } => SpeedKind::Combination {
                a: *a,
                b: *b,
                other: Box::new(other.kind()),
            },
        }
    }

    pub fn build(&self, n: usize) -> Result<Speed> {
        Speed::new(self.kind(), n)
    }
}
