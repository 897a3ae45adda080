//! Pinching functions and the quadratic gradient forms `Q_{g,f}`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{CurvatureTuple, SymmetricCone};
use crate::error::{Error, Result};
use crate::speed::{indexed_rng, Speed, ThetaVariant};
use crate::symmetric::{self, Combination, Norm, SymmetricFunction, Trace};

/// The cutoff `φ(r) = r⁴ e^{−1/r²}` for `r < 0`, zero otherwise, with `φ′` and `φ″`.
pub fn phi(r: f64) -> (f64, f64, f64) {
    if r >= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let e = (-1.0 / (r * r)).exp();
    if e == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let r2 = r * r;
    (
        r2 * r2 * e,
        e * (4.0 * r2 * r + 2.0 * r),
        e * (12.0 * r2 + 10.0 + 4.0 / r2),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PinchingKind {
    Cylindrical,
    Inscribed,
    Exscribed,
}

impl PinchingKind {
    pub fn theta_variant(self) -> ThetaVariant {
        match self {
            PinchingKind::Cylindrical | PinchingKind::Inscribed => ThetaVariant::Concave,
            PinchingKind::Exscribed => ThetaVariant::Convex,
        }
    }
}

/// Parameters shared by every pinching quantity of one estimate.
#[derive(Debug, Clone)]
pub struct PinchingContext {
    pub speed: Speed,
    pub kind: PinchingKind,
    pub m: usize,
    pub cone: SymmetricCone,
    pub theta: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub k_offset: f64,
    pub p: f64,
    /// `c_m`, or `None` when the cylinder tuple lies outside the speed's domain.
    pub c_m: Option<f64>,
}

/// User-facing parameters; Θ is computed from them.
#[derive(Debug, Clone)]
pub struct PinchingParams {
    pub kind: PinchingKind,
    pub m: usize,
    pub epsilon: f64,
    pub sigma: f64,
    pub k_offset: f64,
    pub p: f64,
    /// Extra lower bounds on Θ (`Λ` or `Υ`).
    pub theta_floor: Vec<f64>,
}

impl PinchingContext {
    pub fn new(speed: Speed, cone: SymmetricCone, params: PinchingParams) -> Result<Self> {
        let n = speed.dim();
        if params.m >= n {
            return Err(Error::IndexOutOfRange { m: params.m, n });
        }
        if !(params.sigma > 0.0 && params.sigma < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "sigma must lie in (0, 0.5), got {}",
                params.sigma
            )));
        }
        if !(params.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be >= 0, got {}",
                params.epsilon
            )));
        }
        if !(params.k_offset >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "K must be >= 0, got {}",
                params.k_offset
            )));
        }
        if !(params.p >= 2.0) {
            return Err(Error::InvalidParameter(format!("p must be >= 2, got {}", params.p)));
        }
        let theta = speed.theta_constant(&cone, params.kind.theta_variant(), &params.theta_floor)?;
        let c_m = speed.cylinder_constant(params.m).ok();
        if params.kind != PinchingKind::Exscribed && c_m.is_none() {
            return Err(Error::CylinderOutsideDomain {
                m: params.m,
                speed: speed.name(),
            });
        }
        Ok(Self {
            speed,
            kind: params.kind,
            m: params.m,
            cone,
            theta,
            epsilon: params.epsilon,
            sigma: params.sigma,
            k_offset: params.k_offset,
            p: params.p,
            c_m,
        })
    }

    fn c_m(&self) -> f64 {
        self.c_m.expect("checked at construction for kinds that use c_m")
    }

    /// The kind-appropriate `G₁ ≥ 0`.
    pub fn g1(&self, kappa: &CurvatureTuple, k_bar: Option<f64>, k_under: Option<f64>) -> Result<f64> {
        let f = self.speed.evaluate(kappa)?;
        match self.kind {
            PinchingKind::Cylindrical => Ok(CylindricalG1::new(&self.speed, self.c_m()).value(kappa.values())),
            PinchingKind::Inscribed => {
                let k_bar = k_bar.ok_or(Error::MissingInput("inscribed curvature"))?;
                Ok((k_bar - self.c_m() * f).max(0.0))
            }
            PinchingKind::Exscribed => {
                let k_under = k_under.ok_or(Error::MissingInput("exscribed curvature"))?;
                Ok((-k_under).max(0.0))
            }
        }
    }

    /// `G₂ = 2ΘF − H − |A|` (cylindrical and inscribed) or `2ΘF + H − |A|` (exscribed).
    pub fn g2(&self, kappa: &CurvatureTuple) -> Result<f64> {
        let f = self.speed.evaluate(kappa)?;
        let sign = if self.kind == PinchingKind::Exscribed {
            1.0
        } else {
            -1.0
        };
        let value = 2.0 * self.theta * f + sign * kappa.trace() - kappa.norm();
        if !(value > 0.0) {
            return Err(Error::ThetaMisconfigured { value });
        }
        Ok(value)
    }

    /// `G = G₁²/G₂`.
    pub fn g(&self, kappa: &CurvatureTuple, k_bar: Option<f64>, k_under: Option<f64>) -> Result<f64> {
        let g1 = self.g1(kappa, k_bar, k_under)?;
        Ok(g1 * g1 / self.g2(kappa)?)
    }

    /// `G_σ = (G − εF)F^{σ−1} − K`.
    pub fn g_sigma(&self, kappa: &CurvatureTuple, k_bar: Option<f64>, k_under: Option<f64>) -> Result<f64> {
        let f = self.speed.evaluate(kappa)?;
        let g = self.g(kappa, k_bar, k_under)?;
        Ok((g - self.epsilon * f) * f.powf(self.sigma - 1.0) - self.k_offset)
    }

    pub fn g_sigma_plus(&self, kappa: &CurvatureTuple, k_bar: Option<f64>, k_under: Option<f64>) -> Result<f64> {
        Ok(self.g_sigma(kappa, k_bar, k_under)?.max(0.0))
    }

    /// `G₂` as a smooth symmetric function (weights of `f`, `tr` and `|·|`).
    pub fn g2_weights(&self) -> (f64, f64, f64) {
        let sign = if self.kind == PinchingKind::Exscribed {
            1.0
        } else {
            -1.0
        };
        (2.0 * self.theta, sign, -1.0)
    }
}

/// `g₁(z) = f(z) Σᵢ φ((c_m f(z) − zᵢ)/f(z))`.
pub struct CylindricalG1<'a> {
    pub speed: &'a Speed,
    pub c_m: f64,
}

impl<'a> CylindricalG1<'a> {
    pub fn new(speed: &'a Speed, c_m: f64) -> Self {
        Self { speed, c_m }
    }

    fn parts(&self, z: &[f64]) -> (f64, Vec<(f64, f64, f64)>) {
        let f = self.speed.value(z);
        let phis = z.iter().map(|zi| phi((self.c_m * f - zi) / f)).collect();
        (f, phis)
    }
}

impl SymmetricFunction for CylindricalG1<'_> {
    fn dim(&self) -> usize {
        self.speed.dim()
    }

    fn value(&self, z: &[f64]) -> f64 {
        let (f, phis) = self.parts(z);
        f * phis.iter().map(|p| p.0).sum::<f64>()
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let (f, phis) = self.parts(z);
        let df = self.speed.gradient(z);
        let s: f64 = z.iter().zip(&phis).map(|(zi, p)| p.0 + zi / f * p.1).sum();
        (0..z.len()).map(|k| -phis[k].1 + df[k] * s).collect()
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = z.len();
        let (f, phis) = self.parts(z);
        let df = self.speed.gradient(z);
        let ddf = self.speed.hessian(z);
        let s: f64 = z.iter().zip(&phis).map(|(zi, p)| p.0 + zi / f * p.1).sum();
        DMatrix::from_fn(n, n, |k, l| {
            let mut acc = 0.0;
            for i in 0..n {
                if phis[i].2 == 0.0 {
                    continue;
                }
                let a_l = z[i] / f * df[l] - if i == l { 1.0 } else { 0.0 };
                let a_k = z[i] / f * df[k] - if i == k { 1.0 } else { 0.0 };
                acc += phis[i].2 * a_l * a_k;
            }
            acc / f + ddf[(k, l)] * s
        })
    }

    fn has_limit_rule(&self) -> bool {
        self.speed.has_limit_rule()
    }
}

/// A totally symmetric 3-tensor `T_{kpq}` on `ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor3 {
    n: usize,
    data: Vec<f64>,
}

impl SymTensor3 {
    /// Symmetrizes an arbitrary `n³` array (row-major in `(k, p, q)`).
    pub fn symmetrize(n: usize, raw: &[f64]) -> Result<Self> {
        if raw.len() != n * n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n * n,
                got: raw.len(),
            });
        }
        let at = |k: usize, p: usize, q: usize| raw[(k * n + p) * n + q];
        let mut data = vec![0.0; n * n * n];
        for k in 0..n {
            for p in 0..n {
                for q in 0..n {
                    data[(k * n + p) * n + q] =
                        (at(k, p, q) + at(k, q, p) + at(p, k, q) + at(p, q, k) + at(q, k, p) + at(q, p, k)) / 6.0;
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    /// Sets every permutation of `(k, p, q)` to `value`.
    pub fn set(&mut self, k: usize, p: usize, q: usize, value: f64) {
        let n = self.n;
        for (a, b, c) in [(k, p, q), (k, q, p), (p, k, q), (p, q, k), (q, k, p), (q, p, k)] {
            self.data[(a * n + b) * n + c] = value;
        }
    }

    pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        let raw: Vec<f64> = (0..n * n * n).map(|_| rng.sample(StandardNormal)).collect();
        let mut t = Self::symmetrize(n, &raw).expect("sized");
        let norm = t.norm_sq().sqrt();
        t.data.iter_mut().for_each(|v| *v /= norm);
        t
    }

    #[inline]
    pub fn get(&self, k: usize, p: usize, q: usize) -> f64 {
        self.data[(k * self.n + p) * self.n + q]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// The symmetric slice `(T_k)_{pq} = T_{kpq}`.
    pub fn slice(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |p, q| self.get(k, p, q))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }
}

struct Derivs {
    grad: Vec<f64>,
    hess: DMatrix<f64>,
    quot: DMatrix<f64>,
}

fn derivs(g: &dyn SymmetricFunction, z: &[f64]) -> Result<Derivs> {
    let grad = g.gradient(z);
    let hess = g.hessian(z);
    let quot = symmetric::difference_quotients(g, z, &grad, &hess)?;
    Ok(Derivs { grad, hess, quot })
}

/// `Q_{gA,gB}(T) = (ġ_A^{kl} g̈_B^{pq,rs} − ġ_B^{kl} g̈_A^{pq,rs}) T_{kpq} T_{lrs}` at `diag(z)`.
pub fn quadratic_form_q(
    ga: &dyn SymmetricFunction,
    gb: &dyn SymmetricFunction,
    z: &[f64],
    t: &SymTensor3,
) -> Result<f64> {
    let n = z.len();
    if t.dim() != n || ga.dim() != n || gb.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: t.dim(),
        });
    }
    let a = derivs(ga, z)?;
    let b = derivs(gb, z)?;
    let mut total = 0.0;
    for k in 0..n {
        let tk = t.slice(k);
        let form_a = symmetric::form_from_parts(&a.hess, &a.quot, &tk);
        let form_b = symmetric::form_from_parts(&b.hess, &b.quot, &tk);
        total += a.grad[k] * form_b - b.grad[k] * form_a;
    }
    Ok(total)
}

/// `|∇F|²_F = Σ_k ḟᵏ (Σ_p ḟᵖ T_{kpp})²`.
pub fn gradient_f_sq(grad: &[f64], t: &SymTensor3) -> f64 {
    let n = grad.len();
    (0..n)
        .map(|k| {
            let s: f64 = (0..n).map(|p| grad[p] * t.get(k, p, p)).sum();
            grad[k] * s * s
        })
        .sum()
}

/// The combined form `𝒬 = (σΘ)⁻¹ f Q_{g₂,f}(T) + |∇F|²_F` of the inscribed
/// gradient estimate, with `g₂ = 2Θf − tr − |·|`.
pub fn combined_form(ctx: &PinchingContext, kappa: &CurvatureTuple, t: &SymTensor3, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must lie in (0, 1], got {sigma}"
        )));
    }
    let f = ctx.speed.evaluate(kappa)?;
    let q = q_g2_f(ctx, kappa.values(), t)?;
    let grad = ctx.speed.gradient(kappa.values());
    Ok(f * q / (sigma * ctx.theta) + gradient_f_sq(&grad, t))
}

/// `Q_{G₂,F}/G₂ + (σ/2)|∇F|²_F/F² − 4γσ|T|²/F²`; non-negative when `γ` is
/// no larger than the empirical constant of the combined form.
pub fn combined_slack(
    ctx: &PinchingContext,
    kappa: &CurvatureTuple,
    t: &SymTensor3,
    sigma: f64,
    gamma: f64,
) -> Result<f64> {
    let f = ctx.speed.evaluate(kappa)?;
    let g2 = ctx.g2(kappa)?;
    let q = q_g2_f(ctx, kappa.values(), t)?;
    let grad = ctx.speed.gradient(kappa.values());
    Ok(q / g2 + 0.5 * sigma * gradient_f_sq(&grad, t) / (f * f) - 4.0 * gamma * sigma * t.norm_sq() / (f * f))
}

fn q_g2_f(ctx: &PinchingContext, z: &[f64], t: &SymTensor3) -> Result<f64> {
    let n = z.len();
    let (wf, wt, wn) = ctx.g2_weights();
    let tr = Trace(n);
    let nm = Norm(n);
    let g2 = Combination {
        terms: vec![(wf, &ctx.speed as &dyn SymmetricFunction), (wt, &tr), (wn, &nm)],
    };
    quadratic_form_q(&g2, &ctx.speed, z, t)
}

/// The sign configurations of the pinching estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "config", rename_all = "snake_case")]
pub enum QConfig {
    /// `Q_{g₁,f} ≤ 0` for concave `f`.
    CylindricalG1 { m: usize },
    /// `Q_{g₂,f} ≥ γ|T|²/F` on `Γ₀ ⋐ Γ_{m+1}`.
    ConcaveG2,
    /// `Q_{N,f} ≥ 0` with `N = tr − |·|` and convex `f`.
    ConvexN,
    /// `𝒬 > 0` (combined inscribed form).
    Combined { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QWitness {
    pub kappa: Vec<f64>,
    pub t_diag: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSignReport {
    pub config: QConfig,
    pub speed: String,
    pub cone: SymmetricCone,
    pub samples: usize,
    pub seed: u64,
    pub min_normalized: f64,
    pub max_normalized: f64,
    pub empirical_gamma: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub witnesses: Vec<QWitness>,
}

/// Samples `(κ, T)` with `|κ| = |T| = 1`, `κ` uniform on the slice of
/// `cone ∩ domain(f)`, and reports the extremes of the normalized form
/// `Q·F/|T|²` (or of `𝒬` for the combined configuration).
pub fn sample_q_extremes(
    speed: &Speed,
    cone: &SymmetricCone,
    config: QConfig,
    theta: f64,
    samples: usize,
    seed: u64,
) -> Result<QSignReport> {
    let n = speed.dim();
    let domain = cone.intersect(&speed.cone().base())?;
    let c_m = match config {
        QConfig::CylindricalG1 { m } => Some(speed.cylinder_constant(m)?),
        _ => None,
    };
    let ctx_for_combined = match config {
        QConfig::Combined { .. } => Some(PinchingContext {
            speed: speed.clone(),
            kind: PinchingKind::Inscribed,
            m: n - 1,
            cone: domain,
            theta,
            epsilon: 0.0,
            sigma: 0.25,
            k_offset: 0.0,
            p: 2.0,
            c_m: speed.cylinder_constant(n - 1).ok(),
        }),
        _ => None,
    };
    let values: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let mut rng = indexed_rng(seed, i);
            let kappa = domain.sample_unit(&mut rng)?;
            let t = SymTensor3::random_unit(&mut rng, n);
            let z = kappa.values();
            let f = speed.value(z);
            let tr = Trace(n);
            let nm = Norm(n);
            let value = match config {
                QConfig::CylindricalG1 { .. } => {
                    let g1 = CylindricalG1::new(speed, c_m.expect("set"));
                    quadratic_form_q(&g1, speed, z, &t)? * f
                }
                QConfig::ConcaveG2 => {
                    let g2 = Combination {
                        terms: vec![(2.0 * theta, speed as &dyn SymmetricFunction), (-1.0, &tr), (-1.0, &nm)],
                    };
                    quadratic_form_q(&g2, speed, z, &t)? * f
                }
                QConfig::ConvexN => {
                    let nf = Combination {
                        terms: vec![(1.0, &tr as &dyn SymmetricFunction), (-1.0, &nm)],
                    };
                    quadratic_form_q(&nf, speed, z, &t)? * f
                }
                QConfig::Combined { sigma } => {
                    combined_form(ctx_for_combined.as_ref().expect("set"), &kappa, &t, sigma)?
                }
            };
            let t_diag = (0..n).map(|k| t.get(k, k, k)).collect();
            Ok((value, z.to_vec(), t_diag))
        })
        .collect::<Result<_>>()?;
    let mut min = (f64::INFINITY, 0usize);
    let mut max = (f64::NEG_INFINITY, 0usize);
    for (i, (v, _, _)) in values.iter().enumerate() {
        if *v < min.0 {
            min = (*v, i);
        }
        if *v > max.0 {
            max = (*v, i);
        }
    }
    let tolerance = 1e-10;
    let (passed, gamma) = match config {
        QConfig::CylindricalG1 { .. } => (max.0 <= tolerance, None),
        QConfig::ConvexN => (min.0 >= -tolerance, None),
        QConfig::ConcaveG2 => (min.0 > 0.0, Some(min.0)),
        QConfig::Combined { .. } => (min.0 > 0.0, Some(min.0 / 4.0)),
    };
    let witness = |i: usize| QWitness {
        kappa: values[i].1.clone(),
        t_diag: values[i].2.clone(),
        value: values[i].0,
    };
    Ok(QSignReport {
        config,
        speed: speed.name(),
        cone: *cone,
        samples,
        seed,
        min_normalized: min.0,
        max_normalized: max.0,
        empirical_gamma: gamma,
        tolerance,
        passed,
        witnesses: if samples > 0 {
            vec![witness(min.1), witness(max.1)]
        } else {
            vec![]
        },
    })
}
