//! Checkable estimates evaluated over surfaces and flow histories.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cone::{cyl_distance, CurvatureTuple};
use crate::error::{Error, Result};
use crate::flow::{FlowHistory, Snapshot};
use crate::io::floats;
use crate::pinching::{PinchingContext, PinchingKind};
use crate::surface::{Geometry, Surface};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Informational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub quantity: String,
    #[serde(with = "floats::vec")]
    pub times: Vec<f64>,
    /// Per-snapshot values; `-inf` marks an empty support in log-domain series.
    #[serde(with = "floats::vec")]
    pub series: Vec<f64>,
    #[serde(with = "floats::option")]
    pub scalar: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// Snapshot indices the values were computed from.
    pub snapshots: Vec<usize>,
    pub parameters: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MonitorReport {
    fn new(quantity: impl Into<String>, history: &FlowHistory, series: Vec<f64>) -> Self {
        Self {
            quantity: quantity.into(),
            times: history.times(),
            series,
            scalar: None,
            tolerance: 0.0,
            verdict: Verdict::Informational,
            snapshots: (0..history.snapshots.len()).collect(),
            parameters: json!({}),
            note: None,
        }
    }
}

/// Largest rise `v[j] − v[i]` over `i < j` (zero for a non-increasing series).
pub fn max_rise(values: &[f64]) -> f64 {
    let mut low = f64::INFINITY;
    let mut rise: f64 = 0.0;
    for &v in values {
        if v.is_finite() && low.is_finite() {
            rise = rise.max(v - low);
        }
        if v < low {
            low = v;
        }
    }
    rise
}

/// Derivative at the middle of three samples (second order on uneven spacing).
pub fn central_difference(t: [f64; 3], f: [f64; 3]) -> f64 {
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    -h2 / (h1 * (h1 + h2)) * f[0] + (h2 - h1) / (h1 * h2) * f[1] + h1 / (h2 * (h1 + h2)) * f[2]
}

fn interior(history: &FlowHistory, i: usize) -> Result<()> {
    if i == 0 || i + 1 >= history.snapshots.len() {
        return Err(Error::Insufficient(format!(
            "snapshot {i} needs neighbours on both sides ({} snapshots)",
            history.snapshots.len()
        )));
    }
    Ok(())
}

/// `|dμ/dt + ∫FH dμ| / ∫FH dμ` at snapshot `i`.
pub fn area_decay_residual(history: &FlowHistory, i: usize) -> Result<f64> {
    interior(history, i)?;
    let s = &history.snapshots;
    let t = [s[i - 1].t, s[i].t, s[i + 1].t];
    let mu = [s[i - 1].summary.area, s[i].summary.area, s[i + 1].summary.area];
    let fh = s[i].summary.integral_fh;
    Ok((central_difference(t, mu) + fh).abs() / fh)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolvedQuantity {
    Speed,
    Inscribed,
    Exscribed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResidual {
    /// `∂ₜq − Δ_F q − (reaction and gradient terms)`; for `F` an equality,
    /// for `k̄` the inequality reads `raw ≤ 0`, for `k̲` it reads `raw ≥ 0`.
    pub raw: f64,
    /// `|A|²_F |q|`, the size of the reaction term.
    pub scale: f64,
    /// Signed slack divided by `scale`; the inequality holds when `≥ 0`.
    pub slack: f64,
}

/// Node field of `quantity` on one snapshot, with its geometry.
fn field(snapshot: &Snapshot, speed: &crate::speed::Speed, quantity: EvolvedQuantity) -> Result<(Geometry, Vec<f64>)> {
    let geom = snapshot.surface.geometry(speed)?;
    let values = match quantity {
        EvolvedQuantity::Speed => geom.speeds(),
        EvolvedQuantity::Inscribed | EvolvedQuantity::Exscribed => {
            let all = snapshot.surface.inscribed_exscribed_all(&geom.shape)?;
            all.iter()
                .map(|&(hi, lo)| if quantity == EvolvedQuantity::Inscribed { hi } else { lo })
                .collect()
        }
    };
    Ok((geom, values))
}

/// Residuals of the evolution law of `quantity` at the given nodes of
/// snapshot `i`. Time derivatives follow each node by closest-point
/// projection onto the neighbouring snapshots.
pub fn evolution_residuals(
    history: &FlowHistory,
    quantity: EvolvedQuantity,
    nodes: &[usize],
    i: usize,
    margin: f64,
) -> Result<Vec<EvolutionResidual>> {
    evolution_sweep(history, quantity, nodes, i, margin)?
        .into_iter()
        .collect()
}

/// Like [`evolution_residuals`] but with a separate outcome per node, so a
/// margin violation at one node does not discard the others.
pub fn evolution_sweep(
    history: &FlowHistory,
    quantity: EvolvedQuantity,
    nodes: &[usize],
    i: usize,
    margin: f64,
) -> Result<Vec<Result<EvolutionResidual>>> {
    interior(history, i)?;
    let s = &history.snapshots;
    let speed = &history.speed;
    let (geom, q) = field(&s[i], speed, quantity)?;
    let (_, q_prev) = field(&s[i - 1], speed, quantity)?;
    let (_, q_next) = field(&s[i + 1], speed, quantity)?;
    let surface = &s[i].surface;
    let lap = surface.laplace_f(&geom, &q)?;
    let grad = match quantity {
        EvolvedQuantity::Speed => None,
        _ => Some(surface.gradient_components(&geom.shape, &q)?),
    };
    let t = [s[i - 1].t, s[i].t, s[i + 1].t];
    Ok(nodes
        .iter()
        .map(|&node| {
            let p = geom.points.get(node).ok_or(Error::PointIndex {
                index: node,
                len: geom.len(),
            })?;
            let before = s[i - 1].surface.interpolate(&p.position, &q_prev)?;
            let after = s[i + 1].surface.interpolate(&p.position, &q_next)?;
            let dt = central_difference(t, [before, q[node], after]);
            let a2f = p.a2_f();
            let scale = a2f * q[node].abs();
            let heat = dt - lap[node];
            Ok(match quantity {
                EvolvedQuantity::Speed => {
                    let raw = heat - a2f * q[node];
                    EvolutionResidual {
                        raw,
                        scale,
                        slack: -raw.abs() / scale,
                    }
                }
                EvolvedQuantity::Inscribed => {
                    let kn = p.kappa[p.kappa.len() - 1];
                    let gap = (q[node] - kn) / p.speed;
                    if !(gap > margin) {
                        return Err(Error::MarginViolation { node, gap, margin });
                    }
                    let g = &grad.as_ref().expect("set for chord quantities")[node];
                    let s_term: f64 = (0..g.len())
                        .map(|k| p.fdot[k] * g[k] * g[k] / (q[node] - p.frame_kappa[k]))
                        .sum();
                    let raw = heat - a2f * q[node] + 2.0 * s_term;
                    EvolutionResidual {
                        raw,
                        scale,
                        slack: -raw / scale,
                    }
                }
                EvolvedQuantity::Exscribed => {
                    let gap = (p.kappa[0] - q[node]) / p.speed;
                    if !(gap > margin) {
                        return Err(Error::MarginViolation { node, gap, margin });
                    }
                    let g = &grad.as_ref().expect("set for chord quantities")[node];
                    let t_term: f64 = (0..g.len())
                        .map(|k| p.fdot[k] * g[k] * g[k] / (p.frame_kappa[k] - q[node]))
                        .sum();
                    let raw = heat - a2f * q[node] - 2.0 * t_term;
                    EvolutionResidual {
                        raw,
                        scale,
                        slack: raw / scale,
                    }
                }
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesKind {
    /// `max (κₙ − c_m F)/F`.
    Cylindrical { m: usize },
    /// `min κ₁/F`.
    Convexity,
    /// `max (k̄ − c_m F)/F`.
    Inscribed { m: usize },
    /// `min k̲/F`.
    Exscribed,
    /// `max k̄/F`.
    NoncollapseInterior,
    /// `min k̲/F`.
    NoncollapseExterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeriesOptions {
    /// Allowed rise (or drop) as a fraction of `|initial value|`; an absolute
    /// floor applies when the initial value vanishes.
    pub slack: f64,
    /// Leading snapshots excluded from monotonicity verdicts.
    pub transient: usize,
    /// Required final value for decreasing-after-transient kinds, if any.
    pub target: Option<f64>,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            slack: 1e-3,
            transient: 0,
            target: None,
        }
    }
}

pub fn pinching_series(history: &FlowHistory, kind: SeriesKind, options: &SeriesOptions) -> Result<MonitorReport> {
    let speed = &history.speed;
    let n = speed.dim();
    let column = |m: usize, insc: bool| -> Result<Vec<f64>> {
        if m >= n {
            return Err(Error::IndexOutOfRange { m, n });
        }
        history
            .snapshots
            .iter()
            .map(|s| {
                let v = if insc {
                    &s.summary.inscribed_cylindrical
                } else {
                    &s.summary.cylindrical
                };
                v[m].ok_or_else(|| Error::CylinderOutsideDomain { m, speed: speed.name() })
            })
            .collect()
    };
    let (name, series) = match kind {
        SeriesKind::Cylindrical { m } => (format!("cylindrical_m{m}"), column(m, false)?),
        SeriesKind::Inscribed { m } => (format!("inscribed_m{m}"), column(m, true)?),
        SeriesKind::Convexity => (
            "convexity".into(),
            history.snapshots.iter().map(|s| s.summary.convexity).collect(),
        ),
        SeriesKind::Exscribed => (
            "exscribed".into(),
            history.snapshots.iter().map(|s| s.summary.exscribed).collect(),
        ),
        SeriesKind::NoncollapseInterior => (
            "noncollapse_interior".into(),
            history.snapshots.iter().map(|s| s.summary.inscribed).collect(),
        ),
        SeriesKind::NoncollapseExterior => (
            "noncollapse_exterior".into(),
            history.snapshots.iter().map(|s| s.summary.exscribed).collect(),
        ),
    };
    let mut report = MonitorReport::new(name, history, series.clone());
    report.parameters = json!({ "kind": kind, "options": options, "speed": speed.name() });
    let tol = |v0: f64| options.slack * v0.abs().max(1e-12);
    let convex_run = history.snapshots.iter().all(|s| s.summary.convexity > 0.0);
    let tail = &series[options.transient.min(series.len())..];
    match kind {
        SeriesKind::NoncollapseInterior if speed.convexity().is_concave() => {
            report.tolerance = tol(series[0]);
            report.scalar = Some(max_rise(&series));
            report.verdict = verdict(max_rise(&series) <= report.tolerance);
        }
        SeriesKind::NoncollapseExterior
            if speed.convexity().is_convex()
                || (convex_run && speed.convexity().is_concave() && speed.inverse_concave() == Some(true)) =>
        {
            let negated: Vec<f64> = series.iter().map(|v| -v).collect();
            report.tolerance = tol(series[0]);
            report.scalar = Some(max_rise(&negated));
            report.verdict = verdict(max_rise(&negated) <= report.tolerance);
        }
        SeriesKind::Cylindrical { .. } | SeriesKind::Inscribed { .. } if !tail.is_empty() => {
            report.tolerance = tol(tail[0]);
            let rise = max_rise(tail);
            report.scalar = Some(rise);
            let reached = options.target.is_none_or(|target| tail[tail.len() - 1] <= target);
            report.verdict = verdict(rise <= report.tolerance && reached);
        }
        _ => {
            report.note = Some("no monotonicity claim for this kind and speed class".into());
        }
    }
    Ok(report)
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// `ln Σ exp(xᵢ)` with the maximum shifted out; `-inf` for an empty sum.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln ∫ G_{σ,+}^p dμ` on one surface.
pub fn log_lp_integral(surface: &Surface, ctx: &PinchingContext) -> Result<f64> {
    let geom = surface.geometry(&ctx.speed)?;
    let chords = match ctx.kind {
        PinchingKind::Cylindrical => None,
        _ => Some(surface.inscribed_exscribed_all(&geom.shape)?),
    };
    let mut terms = Vec::with_capacity(geom.len());
    for (i, p) in geom.points.iter().enumerate() {
        let k = p.tuple();
        let (kb, ku) = chords.as_ref().map_or((None, None), |c| (Some(c[i].0), Some(c[i].1)));
        let g = ctx.g_sigma_plus(&k, kb, ku)?;
        if !g.is_finite() {
            return Err(Error::Overflow(format!("G_sigma = {g} at node {i}")));
        }
        if g > 0.0 {
            let term = geom.shape.weights[i].ln() + ctx.p * g.ln();
            if !term.is_finite() {
                return Err(Error::Overflow(format!("log term {term} at node {i}")));
            }
            terms.push(term);
        }
    }
    Ok(log_sum_exp(&terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LpOptions {
    /// Allowed relative growth of the integral.
    pub slack: f64,
    /// The constant `C` of the augmented quantity `∫G^p + σK^p C μ`.
    pub offset_constant: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            slack: 0.02,
            offset_constant: 1.0,
        }
    }
}

/// Series of `ln ∫ G_{σ,+}^p dμ` with a non-increasing verdict; with `K > 0`
/// the verdict applies to `ln(∫G^p + σK^p C μ)` instead.
pub fn lp_pinching_norm(history: &FlowHistory, ctx: &PinchingContext, options: &LpOptions) -> Result<MonitorReport> {
    if ctx.speed.name() != history.speed.name() || ctx.speed.dim() != history.speed.dim() {
        return Err(Error::InvalidParameter(format!(
            "pinching context speed {} differs from the history speed {}",
            ctx.speed.name(),
            history.speed.name()
        )));
    }
    let series: Vec<f64> = history
        .snapshots
        .iter()
        .map(|s| log_lp_integral(&s.surface, ctx))
        .collect::<Result<_>>()?;
    let judged: Vec<f64> = if ctx.k_offset > 0.0 {
        history
            .snapshots
            .iter()
            .zip(&series)
            .map(|(s, &l)| {
                let extra = (ctx.sigma * ctx.k_offset.powf(ctx.p) * options.offset_constant * s.summary.area).ln();
                log_sum_exp(&[l, extra])
            })
            .collect()
    } else {
        series.clone()
    };
    let mut report = MonitorReport::new("lp_pinching", history, series);
    report.tolerance = (1.0 + options.slack).ln();
    let rise = max_rise(&judged);
    let revived = judged
        .windows(2)
        .any(|w| w[0] == f64::NEG_INFINITY && w[1] > f64::NEG_INFINITY);
    report.scalar = Some(rise);
    report.verdict = verdict(rise <= report.tolerance && !revived);
    report.parameters = json!({
        "kind": ctx.kind, "m": ctx.m, "epsilon": ctx.epsilon, "sigma": ctx.sigma,
        "p": ctx.p, "k_offset": ctx.k_offset, "theta": ctx.theta, "slack": options.slack,
    });
    if ctx.k_offset > 0.0 {
        report.note = Some(format!("augmented series: {:?}", judged));
    }
    Ok(report)
}

/// Both sides of `γ ∫u²|A|² ≤ r⁻¹∫|∇u|² + (1+r)∫u²|∇A|²/H²` and the
/// empirical `γ̂ = RHS/LHS`. The support of `u` must keep
/// `cyl_distance(κ, m) > margin` (`m = None`: distance to every `Cyl_m`).
pub fn poincare_check(surface: &Surface, u: &[f64], r: f64, m: Option<usize>, margin: f64) -> Result<MonitorReport> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("r must be positive, got {r}")));
    }
    let shape = surface.shape_data()?;
    if u.len() != shape.nodes.len() {
        return Err(Error::DimensionMismatch {
            expected: shape.nodes.len(),
            got: u.len(),
        });
    }
    for (i, &ui) in u.iter().enumerate() {
        if ui != 0.0 {
            let distance = cyl_distance(&shape.sorted_kappa(i)?, m)?;
            if !(distance > margin) {
                return Err(Error::SupportViolation {
                    node: i,
                    distance,
                    margin,
                });
            }
        }
    }
    let grad = surface.gradient_norm_sq(&shape, u)?;
    let (mut lhs, mut dirichlet, mut gradient) = (0.0, 0.0, 0.0);
    for (i, node) in shape.nodes.iter().enumerate() {
        let w = shape.weights[i];
        let a2: f64 = node.frame_kappa.iter().map(|k| k * k).sum();
        let h: f64 = node.frame_kappa.iter().sum();
        lhs += w * u[i] * u[i] * a2;
        dirichlet += w * grad[i];
        gradient += w * u[i] * u[i] * shape.grad_a[i] * shape.grad_a[i] / (h * h);
    }
    let rhs = dirichlet / r + (1.0 + r) * gradient;
    let mut report = MonitorReport {
        quantity: "poincare".into(),
        times: Vec::new(),
        series: vec![lhs, rhs],
        scalar: None,
        tolerance: 0.0,
        verdict: Verdict::Informational,
        snapshots: Vec::new(),
        parameters: json!({ "r": r, "m": m, "margin": margin }),
        note: None,
    };
    if lhs > 0.0 {
        report.scalar = Some(rhs / lhs);
    } else {
        report.note = Some("degenerate".into());
    }
    Ok(report)
}

/// `∂ₜF − A⁻¹(∇F, ∇F) + F/(2(t − t₀))` at a node of snapshot `i`;
/// `t0 = None` drops the last term (the `t₀ → −∞` limit).
pub fn harnack_quantity(history: &FlowHistory, node: usize, i: usize, t0: Option<f64>) -> Result<f64> {
    Ok(harnack_sweep(history, &[node], i, t0)?[0])
}

pub fn harnack_sweep(history: &FlowHistory, nodes: &[usize], i: usize, t0: Option<f64>) -> Result<Vec<f64>> {
    interior(history, i)?;
    let s = &history.snapshots;
    let speed = &history.speed;
    if let Some(t0) = t0 {
        if !(s[i].t > t0) {
            return Err(Error::InvalidParameter(format!("t = {} must exceed t0 = {t0}", s[i].t)));
        }
    }
    let (geom, f) = field(&s[i], speed, EvolvedQuantity::Speed)?;
    let (_, f_prev) = field(&s[i - 1], speed, EvolvedQuantity::Speed)?;
    let (_, f_next) = field(&s[i + 1], speed, EvolvedQuantity::Speed)?;
    let grad = s[i].surface.gradient_components(&geom.shape, &f)?;
    let t = [s[i - 1].t, s[i].t, s[i + 1].t];
    nodes
        .iter()
        .map(|&node| {
            let p = geom.points.get(node).ok_or(Error::PointIndex {
                index: node,
                len: geom.len(),
            })?;
            if !(p.kappa[0] > 0.0) {
                return Err(Error::Unsupported("a strictly convex point (A must be invertible)"));
            }
            let before = s[i - 1].surface.interpolate(&p.position, &f_prev)?;
            let after = s[i + 1].surface.interpolate(&p.position, &f_next)?;
            let dt = central_difference(t, [before, f[node], after]);
            let a_inv: f64 = grad[node].iter().zip(&p.frame_kappa).map(|(g, k)| g * g / k).sum();
            let tail = t0.map_or(0.0, |t0| f[node] / (2.0 * (s[i].t - t0)));
            Ok(dt - a_inv + tail)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AncientOptions {
    /// `k` of the gradient condition.
    pub k: f64,
    /// Exponent of `∫ H^p`.
    pub p: f64,
}

impl Default for AncientOptions {
    fn default() -> Self {
        Self { k: 0.0, p: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncientDiagnostics {
    pub extinction_time: f64,
    pub times: Vec<f64>,
    /// `√(T−t) max F`.
    pub type_one: Vec<f64>,
    /// `max F / min F`.
    pub speed_ratio: Vec<f64>,
    /// `ρ₊/ρ₋`.
    pub eccentricity: Vec<f64>,
    /// `diam/√(T−t)`.
    pub diameter_ratio: Vec<f64>,
    /// `μ^{n+1}/|Ω|^n`.
    pub isoperimetric: Vec<f64>,
    /// `max |∇A|²/F⁴`.
    pub gradient_ratio: Vec<f64>,
    /// `∫_t^T ∫F dμ dt`: trapezoid rule to the last snapshot plus its enclosed
    /// volume as the tail.
    pub cumulative_speed: Vec<f64>,
    /// Least-squares exponent of `cumulative_speed` against `T − t`.
    pub decay_exponent: f64,
    /// Worst `(RHS − LHS)/H²` of the gradient condition per snapshot.
    pub gradient_condition: Vec<f64>,
    /// `max |F|`.
    pub max_speed: Vec<f64>,
    /// `∫ H^p dμ`.
    pub integral_h_p: Vec<f64>,
}

pub fn ancient_diagnostics(
    history: &FlowHistory,
    extinction_time: f64,
    options: &AncientOptions,
) -> Result<AncientDiagnostics> {
    let s = &history.snapshots;
    if s.len() < 3 {
        return Err(Error::Insufficient(format!("{} snapshots, need at least 3", s.len())));
    }
    let t_last = s[s.len() - 1].t;
    if !(extinction_time > t_last) {
        return Err(Error::InvalidParameter(format!(
            "extinction time {extinction_time} must follow the last snapshot at {t_last}"
        )));
    }
    let n = history.speed.dim() as f64;
    let times = history.times();
    let sum = |f: &dyn Fn(&Snapshot) -> f64| -> Vec<f64> { s.iter().map(f).collect() };
    let tau = |t: f64| (extinction_time - t).sqrt();
    let mut cumulative = vec![0.0; s.len()];
    let last = s.len() - 1;
    cumulative[last] = s[last].summary.volume;
    for j in (0..last).rev() {
        let dt = s[j + 1].t - s[j].t;
        cumulative[j] = cumulative[j + 1] + 0.5 * dt * (s[j].summary.integral_f + s[j + 1].summary.integral_f);
    }
    let xs: Vec<f64> = times.iter().map(|t| (extinction_time - t).ln()).collect();
    let ys: Vec<f64> = cumulative.iter().map(|c| c.ln()).collect();
    let (mx, my) = (
        xs.iter().sum::<f64>() / xs.len() as f64,
        ys.iter().sum::<f64>() / ys.len() as f64,
    );
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let mut condition = Vec::with_capacity(s.len());
    let mut integral_h_p = Vec::with_capacity(s.len());
    for snap in s {
        let geom = snap.surface.geometry(&history.speed)?;
        let f = geom.speeds();
        let h: Vec<f64> = geom.points.iter().map(|p| p.mean).collect();
        let gf = snap.surface.gradient_components(&geom.shape, &f)?;
        let gh = snap.surface.gradient_components(&geom.shape, &h)?;
        let mut worst = f64::INFINITY;
        for (i, p) in geom.points.iter().enumerate() {
            let lhs: f64 = gh[i].iter().zip(&gf[i]).map(|(a, b)| a * b).sum::<f64>() / (p.mean * p.speed);
            let traceless = p.norm * p.norm - p.mean * p.mean / n;
            let rhs = (traceless + options.k / (n * (n + options.k)) * p.mean * p.mean) / (n + options.k - 1.0);
            worst = worst.min((rhs - lhs) / (p.mean * p.mean));
        }
        condition.push(worst);
        let hp: Vec<f64> = h.iter().map(|v| v.abs().powf(options.p)).collect();
        integral_h_p.push(geom.integrate(&hp));
    }
    Ok(AncientDiagnostics {
        extinction_time,
        type_one: sum(&|x| tau(x.t) * x.summary.max_speed),
        speed_ratio: sum(&|x| x.summary.max_speed / x.summary.min_speed),
        eccentricity: sum(&|x| x.summary.circumradius / x.summary.inradius),
        diameter_ratio: sum(&|x| x.summary.diameter / tau(x.t)),
        isoperimetric: sum(&|x| x.summary.area.powf(n + 1.0) / x.summary.volume.powf(n)),
        gradient_ratio: sum(&|x| x.summary.gradient_ratio),
        cumulative_speed: cumulative,
        decay_exponent: sxy / sxx,
        gradient_condition: condition,
        max_speed: sum(&|x| x.summary.max_speed.abs()),
        integral_h_p,
        times,
    })
}

impl AncientDiagnostics {
    /// One informational report per series.
    pub fn reports(&self, history: &FlowHistory) -> Vec<MonitorReport> {
        let mk = |name: &str, series: &[f64]| {
            let mut r = MonitorReport::new(format!("ancient_{name}"), history, series.to_vec());
            r.parameters = json!({ "extinction_time": self.extinction_time });
            r
        };
        let mut decay = mk("cumulative_speed", &self.cumulative_speed);
        decay.scalar = Some(self.decay_exponent);
        vec![
            mk("type_one", &self.type_one),
            mk("speed_ratio", &self.speed_ratio),
            mk("eccentricity", &self.eccentricity),
            mk("diameter_ratio", &self.diameter_ratio),
            mk("isoperimetric", &self.isoperimetric),
            mk("gradient_ratio", &self.gradient_ratio),
            decay,
            mk("gradient_condition", &self.gradient_condition),
            mk("max_speed", &self.max_speed),
            mk("integral_h_p", &self.integral_h_p),
        ]
    }
}

/// `∫ κ₁κ₂ dμ` on a closed mesh, with the Gauss–Bonnet value `4π(1 − genus)`.
pub fn gauss_integral(surface: &Surface) -> Result<(f64, f64)> {
    let Surface::Mesh(mesh) = surface else {
        return Err(Error::Unsupported("a closed triangle mesh (n = 2)"));
    };
    let shape = mesh.shape_data()?;
    let k: Vec<f64> = shape
        .nodes
        .iter()
        .map(|nd| nd.frame_kappa[0] * nd.frame_kappa[1])
        .collect();
    let value = shape.weights.iter().zip(&k).map(|(w, v)| w * v).sum();
    Ok((value, 4.0 * std::f64::consts::PI * (1.0 - mesh.genus() as f64)))
}

/// Whether a curvature tuple is within `tol` of the `m`-cylinder ratio.
pub fn cylinder_residual(speed: &crate::speed::Speed, kappa: &CurvatureTuple, m: usize) -> Result<f64> {
    let c = speed.cylinder_constant(m)?;
    Ok(kappa.max() - c * speed.evaluate(kappa)?)
}

fn d_area_tol() -> f64 {
    0.02
}
fn d_samples() -> usize {
    50
}
fn d_margin() -> f64 {
    0.01
}
fn d_evol_tol() -> f64 {
    0.05
}
fn d_harnack_tol() -> f64 {
    1e-3
}
fn d_poincare_margin() -> f64 {
    0.1
}
fn d_triples() -> usize {
    20
}

/// A monitor as selected in a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "monitor", rename_all = "snake_case", deny_unknown_fields)]
pub enum MonitorSpec {
    AreaDecay {
        #[serde(default = "d_area_tol")]
        tolerance: f64,
    },
    PinchingSeries {
        series: SeriesKind,
        #[serde(default)]
        options: SeriesOptions,
    },
    /// `context` indexes the config's pinching contexts.
    LpPinching {
        context: usize,
        #[serde(default)]
        options: LpOptions,
    },
    Evolution {
        quantity: EvolvedQuantity,
        #[serde(default = "d_samples")]
        samples: usize,
        #[serde(default = "d_margin")]
        margin: f64,
        #[serde(default = "d_evol_tol")]
        tolerance: f64,
        /// Snapshot indices; all interior snapshots when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        snapshots: Option<Vec<usize>>,
    },
    Harnack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t0: Option<f64>,
        #[serde(default = "d_samples")]
        samples: usize,
        #[serde(default = "d_harnack_tol")]
        tolerance: f64,
    },
    Ancient {
        extinction_time: f64,
        #[serde(default)]
        options: AncientOptions,
    },
    /// Seeded bump functions on one snapshot; needs the config seed.
    Poincare {
        r: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
        #[serde(default = "d_poincare_margin")]
        margin: f64,
        #[serde(default = "d_triples")]
        triples: usize,
        #[serde(default)]
        snapshot: usize,
    },
    GaussIntegral {
        #[serde(default)]
        snapshot: usize,
    },
}

pub const MONITOR_NAMES: &str =
    "area_decay, pinching_series, lp_pinching, evolution, harnack, ancient, poincare, gauss_integral";

impl MonitorSpec {
    /// Monitors run by `analyze` when the stored config selects none.
    pub fn defaults() -> Vec<MonitorSpec> {
        vec![
            MonitorSpec::AreaDecay {
                tolerance: d_area_tol(),
            },
            MonitorSpec::PinchingSeries {
                series: SeriesKind::NoncollapseInterior,
                options: SeriesOptions::default(),
            },
            MonitorSpec::PinchingSeries {
                series: SeriesKind::NoncollapseExterior,
                options: SeriesOptions::default(),
            },
        ]
    }

    pub fn needs_seed(&self) -> bool {
        matches!(self, MonitorSpec::Poincare { .. })
    }
}

/// Evenly strided node indices, at most `samples` of them.
pub fn strided_nodes(len: usize, samples: usize) -> Vec<usize> {
    let k = samples.min(len).max(1);
    let mut v: Vec<usize> = (0..k).map(|j| j * len / k).collect();
    v.dedup();
    v
}

fn interior_indices(history: &FlowHistory) -> Vec<usize> {
    (1..history.snapshots.len().saturating_sub(1)).collect()
}

/// Runs one configured monitor.
pub fn evaluate(
    history: &FlowHistory,
    spec: &MonitorSpec,
    contexts: &[PinchingContext],
    seed: Option<u64>,
) -> Result<Vec<MonitorReport>> {
    let s = &history.snapshots;
    Ok(match spec {
        MonitorSpec::AreaDecay { tolerance } => {
            let inner = interior_indices(history);
            if inner.is_empty() {
                return Err(Error::Insufficient(format!("{} snapshots, need at least 3", s.len())));
            }
            let mut series = vec![f64::NAN; s.len()];
            let mut worst: f64 = 0.0;
            let mut skipped = 0usize;
            for &i in &inner {
                // redistribution changes μ discontinuously
                if s[i - 1].remeshes != s[i + 1].remeshes {
                    skipped += 1;
                    continue;
                }
                series[i] = area_decay_residual(history, i)?;
                worst = worst.max(series[i]);
            }
            let mut r = MonitorReport::new("area_decay", history, series);
            r.tolerance = *tolerance;
            r.parameters = json!({ "tolerance": tolerance });
            if skipped < inner.len() {
                r.scalar = Some(worst);
                r.verdict = verdict(worst <= *tolerance);
            }
            if skipped > 0 {
                r.note = Some(format!("{skipped} windows across a redistribution skipped"));
            }
            vec![r]
        }
        MonitorSpec::PinchingSeries { series, options } => vec![pinching_series(history, *series, options)?],
        MonitorSpec::LpPinching { context, options } => {
            let ctx = contexts.get(*context).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "pinching context {context} does not exist ({} defined)",
                    contexts.len()
                ))
            })?;
            vec![lp_pinching_norm(history, ctx, options)?]
        }
        MonitorSpec::Evolution {
            quantity,
            samples,
            margin,
            tolerance,
            snapshots,
        } => {
            let which = snapshots.clone().unwrap_or_else(|| interior_indices(history));
            let mut series = Vec::with_capacity(which.len());
            let mut skipped = 0usize;
            let mut evaluated = 0usize;
            for &i in &which {
                let nodes = strided_nodes(s[i].surface.len(), *samples);
                let mut worst = f64::INFINITY;
                for outcome in evolution_sweep(history, *quantity, &nodes, i, *margin)? {
                    match outcome {
                        Ok(res) => {
                            evaluated += 1;
                            worst = worst.min(res.slack);
                        }
                        Err(Error::MarginViolation { .. }) => skipped += 1,
                        Err(e) => return Err(e),
                    }
                }
                series.push(if worst.is_finite() { worst } else { f64::NAN });
            }
            let worst = series
                .iter()
                .copied()
                .filter(|v| v.is_finite())
                .fold(f64::INFINITY, f64::min);
            let mut r = MonitorReport::new(format!("evolution_{}", quantity_name(*quantity)), history, series);
            r.times = which.iter().map(|&i| s[i].t).collect();
            r.snapshots = which;
            r.tolerance = *tolerance;
            r.parameters = json!({ "quantity": quantity, "samples": samples, "margin": margin });
            r.note = Some(format!("{evaluated} nodes evaluated, {skipped} outside the margin"));
            if evaluated > 0 {
                r.scalar = Some(worst);
                r.verdict = verdict(worst >= -tolerance);
            }
            vec![r]
        }
        MonitorSpec::Harnack { t0, samples, tolerance } => {
            let d0 = s.first().map_or(f64::NAN, |x| x.summary.diameter);
            let mut series = vec![f64::NAN; s.len()];
            for i in interior_indices(history) {
                if !(s[i].summary.convexity > 0.0) || t0.is_some_and(|t0| s[i].t <= t0) {
                    continue;
                }
                let nodes = strided_nodes(s[i].surface.len(), *samples);
                let values = harnack_sweep(history, &nodes, i, *t0)?;
                let scale = s[i].summary.max_speed.powi(2) / d0;
                series[i] = values.iter().copied().fold(f64::INFINITY, f64::min) / scale;
            }
            let worst = series
                .iter()
                .copied()
                .filter(|v| v.is_finite())
                .fold(f64::INFINITY, f64::min);
            let mut r = MonitorReport::new("harnack", history, series);
            r.tolerance = *tolerance;
            r.parameters = json!({ "t0": t0, "samples": samples, "normalization": "max F^2 / initial diameter" });
            let claimed = history.speed.convexity().is_convex() || history.speed.inverse_concave() == Some(true);
            if worst.is_finite() {
                r.scalar = Some(worst);
                if claimed {
                    r.verdict = verdict(worst >= -tolerance);
                } else {
                    r.note = Some("no sign claim for this speed class".into());
                }
            } else {
                r.note = Some("no strictly convex interior snapshot".into());
            }
            vec![r]
        }
        MonitorSpec::Ancient {
            extinction_time,
            options,
        } => ancient_diagnostics(history, *extinction_time, options)?.reports(history),
        MonitorSpec::Poincare {
            r,
            m,
            margin,
            triples,
            snapshot,
        } => {
            let seed = seed.ok_or(Error::MissingInput("seed (required by the poincare monitor)"))?;
            let snap = s.get(*snapshot).ok_or(Error::PointIndex {
                index: *snapshot,
                len: s.len(),
            })?;
            let gammas = poincare_triples(&snap.surface, *r, *m, *margin, *triples, seed)?;
            let min = gammas.iter().copied().fold(f64::INFINITY, f64::min);
            let mut rep = MonitorReport::new("poincare", history, gammas);
            rep.times = Vec::new();
            rep.snapshots = vec![*snapshot];
            rep.scalar = min.is_finite().then_some(min);
            rep.parameters = json!({ "r": r, "m": m, "margin": margin, "triples": triples, "seed": seed });
            rep.note = Some("series holds the empirical gamma of each bump".into());
            vec![rep]
        }
        MonitorSpec::GaussIntegral { snapshot } => {
            let snap = s.get(*snapshot).ok_or(Error::PointIndex {
                index: *snapshot,
                len: s.len(),
            })?;
            let (value, expected) = gauss_integral(&snap.surface)?;
            let tol = 0.01 * 4.0 * std::f64::consts::PI;
            let mut r = MonitorReport::new("gauss_integral", history, vec![value]);
            r.times = vec![snap.t];
            r.snapshots = vec![*snapshot];
            r.scalar = Some(value - expected);
            r.tolerance = tol;
            r.verdict = verdict((value - expected).abs() <= tol);
            r.parameters = json!({ "expected": expected });
            vec![r]
        }
    })
}

fn quantity_name(q: EvolvedQuantity) -> &'static str {
    match q {
        EvolvedQuantity::Speed => "speed",
        EvolvedQuantity::Inscribed => "inscribed",
        EvolvedQuantity::Exscribed => "exscribed",
    }
}

/// Empirical `γ̂` for seeded bumps `u = (1 − |x − c|²/w²)₊²` whose support
/// keeps the required distance from the cylinders; bumps that violate it are
/// redrawn.
pub fn poincare_triples(
    surface: &Surface,
    r: f64,
    m: Option<usize>,
    margin: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    use rand::Rng;
    let shape = surface.shape_data()?;
    let len = shape.nodes.len();
    let distances: Vec<f64> = (0..len)
        .map(|i| cyl_distance(&shape.sorted_kappa(i)?, m))
        .collect::<Result<_>>()?;
    let diameter = {
        let pts: Vec<&[f64]> = shape.nodes.iter().map(|nd| nd.position.as_slice()).collect();
        let c = pts.iter().fold(vec![0.0; pts[0].len()], |mut acc, p| {
            for (a, b) in acc.iter_mut().zip(p.iter()) {
                *a += b / len as f64;
            }
            acc
        });
        2.0 * pts.iter().map(|p| dist(p, &c)).fold(0.0, f64::max)
    };
    let mut out = Vec::with_capacity(count);
    let mut attempt = 0u64;
    while out.len() < count {
        if attempt >= 50 * count as u64 + 50 {
            return Err(Error::Insufficient(format!(
                "only {} of {count} bumps meet the support margin {margin}",
                out.len()
            )));
        }
        let mut rng = crate::speed::indexed_rng(seed, attempt);
        attempt += 1;
        let centre = rng.random_range(0..len);
        let width = diameter * rng.random_range(0.1..0.3);
        let c = &shape.nodes[centre].position;
        let u: Vec<f64> = shape
            .nodes
            .iter()
            .map(|nd| {
                let s = 1.0 - dist(&nd.position, c).powi(2) / (width * width);
                if s > 0.0 {
                    s * s
                } else {
                    0.0
                }
            })
            .collect();
        if u.iter().zip(&distances).any(|(ui, d)| *ui != 0.0 && !(*d > margin)) {
            continue;
        }
        let rep = poincare_check(surface, &u, r, m, margin)?;
        if let Some(g) = rep.scalar {
            out.push(g);
        }
    }
    Ok(out)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Combined CSV of every report whose series is a time series, keyed by `t`.
pub fn combined_csv(times: &[f64], reports: &[MonitorReport]) -> Result<String> {
    let columns: Vec<&MonitorReport> = reports
        .iter()
        .filter(|r| !r.times.is_empty() && r.times.len() == r.series.len())
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend(columns.iter().map(|r| r.quantity.clone()));
    w.write_record(&header).map_err(|e| Error::Parse(e.to_string()))?;
    for &t in times {
        let mut row = vec![floats::format(t)];
        for r in &columns {
            let cell = r
                .times
                .iter()
                .position(|x| *x == t)
                .map(|k| floats::format(r.series[k]))
                .unwrap_or_default();
            row.push(cell);
        }
        w.write_record(&row).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}
