//! Explicit time stepping of `∂ₜX = −F ν` with stability control,
//! redistribution and cone monitoring.

use serde::{Deserialize, Serialize};

use crate::cone::{cyl_distance, CurvatureTuple, SymmetricCone};
use crate::error::{Error, Result};
use crate::io::floats;
use crate::speed::Speed;
use crate::surface::{Geometry, RemeshParams, RoundSphere, Surface};

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub speed: Speed,
    /// Inner cone `Γ₀`; leaving it (or the speed's cone) stops the run.
    pub cone: Option<SymmetricCone>,
    pub c_cfl: f64,
    pub max_steps: usize,
    pub max_time: Option<f64>,
    /// Stop once `max F · (initial diameter)` exceeds this.
    pub blowup: f64,
    /// Stop once the inradius falls below this fraction of its initial value.
    pub min_inradius_fraction: f64,
    /// Snapshot every this many steps.
    pub snapshot_every: usize,
    pub remesh: RemeshParams,
    pub redistribute: bool,
}

impl FlowConfig {
    pub fn new(speed: Speed) -> Self {
        Self {
            speed,
            cone: None,
            c_cfl: 0.5,
            max_steps: 1_000_000,
            max_time: None,
            blowup: 1e3,
            min_inradius_fraction: 0.01,
            snapshot_every: 10,
            remesh: RemeshParams::default(),
            redistribute: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_cfl > 0.0 && self.c_cfl < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "c_cfl must lie in (0, 1), got {}",
                self.c_cfl
            )));
        }
        if self.snapshot_every == 0 || self.max_steps == 0 {
            return Err(Error::InvalidParameter(
                "snapshot_every and max_steps must be positive".into(),
            ));
        }
        if let Some(t) = self.max_time {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("max_time must be positive, got {t}")));
            }
        }
        if !(self.blowup > 0.0) || !(self.min_inradius_fraction >= 0.0 && self.min_inradius_fraction < 1.0) {
            return Err(Error::InvalidParameter(
                "blowup must be positive and min_inradius_fraction in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// The same run under the parabolic rescaling (time × λ²).
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            max_time: self.max_time.map(|t| t * lambda * lambda),
            ..self.clone()
        }
    }
}

/// Scalar summary of one snapshot; every ratio is dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSummary {
    #[serde(with = "floats::scalar")]
    pub t: f64,
    pub step: usize,
    pub nodes: usize,
    #[serde(with = "floats::scalar")]
    pub max_speed: f64,
    #[serde(with = "floats::scalar")]
    pub min_speed: f64,
    /// `max (κₙ − c_m F)/F` for `m = 0, …, n−1` (`None` where `c_m` is undefined).
    #[serde(with = "floats::option_vec")]
    pub cylindrical: Vec<Option<f64>>,
    /// `min κ₁/F`.
    #[serde(with = "floats::scalar")]
    pub convexity: f64,
    /// `max k̄/F`.
    #[serde(with = "floats::scalar")]
    pub inscribed: f64,
    /// `min k̲/F`.
    #[serde(with = "floats::scalar")]
    pub exscribed: f64,
    /// `max (k̄ − c_m F)/F` per `m`.
    #[serde(with = "floats::option_vec")]
    pub inscribed_cylindrical: Vec<Option<f64>>,
    #[serde(with = "floats::scalar")]
    pub area: f64,
    #[serde(with = "floats::scalar")]
    pub volume: f64,
    #[serde(with = "floats::scalar")]
    pub inradius: f64,
    #[serde(with = "floats::scalar")]
    pub circumradius: f64,
    #[serde(with = "floats::scalar")]
    pub diameter: f64,
    /// `max |∇A|²/F⁴`.
    #[serde(with = "floats::scalar")]
    pub gradient_ratio: f64,
    /// `∫ F H dμ`.
    #[serde(with = "floats::scalar")]
    pub integral_fh: f64,
    /// `∫ F dμ`.
    #[serde(with = "floats::scalar")]
    pub integral_f: f64,
    pub argmax_speed: usize,
    /// `cyl_distance(κ, m)` at the node of largest speed, per `m`.
    #[serde(with = "floats::vec")]
    pub cyl_distance_at_max: Vec<f64>,
}

/// Speed-dependent snapshot summary (pure function of surface and speed).
pub fn summarize(surface: &Surface, speed: &Speed, t: f64, step: usize) -> Result<SnapshotSummary> {
    let geom = surface.geometry(speed)?;
    summarize_geometry(surface, speed, &geom, t, step)
}

fn summarize_geometry(
    surface: &Surface,
    speed: &Speed,
    geom: &Geometry,
    t: f64,
    step: usize,
) -> Result<SnapshotSummary> {
    let n = surface.dim();
    let c: Vec<Option<f64>> = (0..n).map(|m| speed.cylinder_constant(m).ok()).collect();
    let chords = surface.inscribed_exscribed_all(&geom.shape)?;
    let mut max_speed = f64::NEG_INFINITY;
    let mut min_speed = f64::INFINITY;
    let mut argmax = 0;
    let mut cyl = vec![f64::NEG_INFINITY; n];
    let mut insc_cyl = vec![f64::NEG_INFINITY; n];
    let (mut convexity, mut inscribed, mut exscribed, mut gradient_ratio) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, 0.0f64);
    for (i, (p, &(kb, ku))) in geom.points.iter().zip(&chords).enumerate() {
        let f = p.speed;
        if f > max_speed {
            max_speed = f;
            argmax = i;
        }
        min_speed = min_speed.min(f);
        let kn = p.kappa[n - 1];
        for m in 0..n {
            if let Some(cm) = c[m] {
                cyl[m] = cyl[m].max((kn - cm * f) / f);
                insc_cyl[m] = insc_cyl[m].max((kb - cm * f) / f);
            }
        }
        convexity = convexity.min(p.kappa[0] / f);
        inscribed = inscribed.max(kb / f);
        exscribed = exscribed.min(ku / f);
        gradient_ratio = gradient_ratio.max(p.grad_a * p.grad_a / f.powi(4));
    }
    let fh: Vec<f64> = geom.points.iter().map(|p| p.speed * p.mean).collect();
    let k_bar: Vec<f64> = chords.iter().map(|c| c.0).collect();
    let global = surface.global_geometry_from_inscribed(&k_bar)?;
    let at_max = CurvatureTuple::from_slice(&geom.points[argmax].kappa)?;
    let opt = |v: &[f64]| v.iter().zip(&c).map(|(x, cm)| cm.map(|_| *x)).collect();
    Ok(SnapshotSummary {
        t,
        step,
        nodes: surface.len(),
        max_speed,
        min_speed,
        cylindrical: opt(&cyl),
        convexity,
        inscribed,
        exscribed,
        inscribed_cylindrical: opt(&insc_cyl),
        area: global.area,
        volume: global.volume,
        inradius: global.inradius,
        circumradius: global.circumradius,
        diameter: global.diameter,
        gradient_ratio,
        integral_fh: geom.integrate(&fh),
        integral_f: geom.integrate(&geom.speeds()),
        argmax_speed: argmax,
        cyl_distance_at_max: (0..n).map(|m| cyl_distance(&at_max, Some(m))).collect::<Result<_>>()?,
    })
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub step: usize,
    pub surface: Surface,
    pub summary: SnapshotSummary,
    /// Redistributions performed up to this snapshot.
    pub remeshes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cause", rename_all = "snake_case")]
pub enum Termination {
    /// The curvature tuple left the cone (a type-0 singularity).
    ConeExit {
        t: f64,
        step: usize,
        node: String,
        kappa: Vec<f64>,
        flag: String,
    },
    CurvatureBlowup {
        t: f64,
        step: usize,
        scaled_max_speed: f64,
    },
    MinInradius {
        t: f64,
        step: usize,
        fraction: f64,
    },
    StepBudget {
        t: f64,
        step: usize,
    },
    MaxTime {
        t: f64,
        step: usize,
    },
    /// The discrete surface became invalid (self-intersection, degenerate stencil).
    SurfaceFailure {
        t: f64,
        step: usize,
        message: String,
    },
    /// Closed-form history; no stepping took place.
    Exact,
}

#[derive(Debug, Clone)]
pub struct FlowHistory {
    pub speed: Speed,
    pub snapshots: Vec<Snapshot>,
    pub termination: Termination,
}

impl FlowHistory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn summaries(&self) -> Vec<&SnapshotSummary> {
        self.snapshots.iter().map(|s| &s.summary).collect()
    }

    /// The shrinking sphere `R(t) = √(R₀² − 2f(𝟙)t)` of curvature dimension `n`
    /// sampled at `times`, as analytic snapshots.
    pub fn exact_sphere(speed: &Speed, r0: f64, times: &[f64]) -> Result<Self> {
        let n = speed.dim();
        let f1 = speed.evaluate(&CurvatureTuple::ones(n))?;
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("fixture times must increase strictly".into()));
        }
        let snapshots = times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let r2 = r0 * r0 - 2.0 * f1 * t;
                if !(r2 > 0.0) {
                    return Err(Error::InvalidParameter(format!("time {t} is past extinction")));
                }
                let surface = Surface::Sphere(RoundSphere::new(n, r2.sqrt(), None)?);
                let summary = summarize(&surface, speed, t, k)?;
                Ok(Snapshot {
                    t,
                    step: k,
                    surface,
                    summary,
                    remeshes: 0,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            speed: speed.clone(),
            snapshots,
            termination: Termination::Exact,
        })
    }
}

/// `dt = c_cfl h_min² / (2 max Σ ḟⁱ)`.
pub fn stable_dt_geometry(geom: &Geometry, c_cfl: f64) -> f64 {
    c_cfl * geom.shape.h_min * geom.shape.h_min / (2.0 * geom.max_fdot_sum())
}

pub fn stable_dt(surface: &Surface, speed: &Speed, c_cfl: f64, cone: Option<&SymmetricCone>) -> Result<f64> {
    let geom = Geometry::new(surface.shape_data()?, speed, cone)?;
    Ok(stable_dt_geometry(&geom, c_cfl))
}

/// One explicit Euler step, then redistribution if the trigger fires. The
/// flag reports whether redistribution happened.
pub fn step(surface: &Surface, geom: &Geometry, dt: f64, remesh: Option<&RemeshParams>) -> Result<(Surface, bool)> {
    let next = surface.advance(geom, dt)?;
    match remesh {
        Some(params) => {
            let shape = next.shape_data()?;
            if next.needs_remesh(&shape, params) {
                Ok((next.remesh(&shape)?, true))
            } else {
                Ok((next, false))
            }
        }
        None => Ok((next, false)),
    }
}

fn cone_exit(e: &Error, t: f64, step: usize) -> Option<Termination> {
    match e {
        Error::ConeViolation { kappa, cone } => Some(Termination::ConeExit {
            t,
            step,
            node: cone.clone(),
            kappa: kappa.clone(),
            flag: "type-0".into(),
        }),
        _ => None,
    }
}

/// Runs the flow from `initial` until a stop condition. Errors only if the
/// configuration or the initial surface is invalid.
pub fn run(config: &FlowConfig, initial: Surface) -> Result<FlowHistory> {
    config.validate()?;
    let speed = &config.speed;
    let cone = config.cone.as_ref();
    let mut geom = initial
        .geometry(speed)
        .and_then(|g| Geometry::new(g.shape, speed, cone))?;
    let first = summarize_geometry(&initial, speed, &geom, 0.0, 0)?;
    let d0 = first.diameter;
    let rho0 = first.inradius;
    let mut snapshots = vec![Snapshot {
        t: 0.0,
        step: 0,
        surface: initial.clone(),
        summary: first,
        remeshes: 0,
    }];
    let mut remeshes = 0;
    let mut surface = initial;
    let (mut t, mut k) = (0.0f64, 0usize);
    let remesh = config.redistribute.then_some(&config.remesh);
    let termination = loop {
        let mut dt = stable_dt_geometry(&geom, config.c_cfl);
        let mut last = false;
        if let Some(tmax) = config.max_time {
            if t + dt >= tmax {
                dt = tmax - t;
                last = true;
            }
        }
        let next = match step(&surface, &geom, dt, remesh) {
            Ok((s, redistributed)) => {
                remeshes += usize::from(redistributed);
                s
            }
            Err(e) => {
                break Termination::SurfaceFailure {
                    t,
                    step: k,
                    message: e.to_string(),
                }
            }
        };
        t = if last {
            config.max_time.unwrap_or(t + dt)
        } else {
            t + dt
        };
        k += 1;
        geom = match next.shape_data().and_then(|s| Geometry::new(s, speed, cone)) {
            Ok(g) => g,
            Err(e) => {
                break cone_exit(&e, t, k).unwrap_or(Termination::SurfaceFailure {
                    t,
                    step: k,
                    message: e.to_string(),
                })
            }
        };
        surface = next;
        let max_f = geom.points.iter().map(|p| p.speed).fold(f64::NEG_INFINITY, f64::max);
        let blown = max_f * d0 > config.blowup;
        let budget = k >= config.max_steps;
        if !(blown || budget || last || k % config.snapshot_every == 0) {
            continue;
        }
        let summary = match summarize_geometry(&surface, speed, &geom, t, k) {
            Ok(s) => s,
            Err(e) => {
                break Termination::SurfaceFailure {
                    t,
                    step: k,
                    message: e.to_string(),
                }
            }
        };
        let fraction = summary.inradius / rho0;
        snapshots.push(Snapshot {
            t,
            step: k,
            surface: surface.clone(),
            summary,
            remeshes,
        });
        if blown {
            break Termination::CurvatureBlowup {
                t,
                step: k,
                scaled_max_speed: max_f * d0,
            };
        }
        if fraction < config.min_inradius_fraction {
            break Termination::MinInradius { t, step: k, fraction };
        }
        if last {
            break Termination::MaxTime { t, step: k };
        }
        if budget {
            break Termination::StepBudget { t, step: k };
        }
    };
    Ok(FlowHistory {
        speed: speed.clone(),
        snapshots,
        termination,
    })
}
