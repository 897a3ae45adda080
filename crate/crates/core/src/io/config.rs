//! JSON run configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::certify::Property;
use crate::cone::SymmetricCone;
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::monitors::MonitorSpec;
use crate::pinching::{PinchingContext, PinchingKind, PinchingParams, QConfig};
use crate::speed::{Speed, SpeedSpec};
use crate::surface::{RemeshParams, Resolution, ShapeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    CertifySpeed,
    ProbeQ,
    Analyze,
}

/// Flow parameters of a `simulate` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    pub c_cfl: f64,
    pub max_steps: usize,
    pub max_time: Option<f64>,
    pub blowup: f64,
    pub min_inradius_fraction: f64,
    pub snapshot_every: usize,
    pub remesh: RemeshParams,
    pub redistribute: bool,
}

impl Default for FlowParams {
    fn default() -> Self {
        let d = FlowConfig::new(Speed::mean(2));
        Self {
            c_cfl: d.c_cfl,
            max_steps: d.max_steps,
            max_time: d.max_time,
            blowup: d.blowup,
            min_inradius_fraction: d.min_inradius_fraction,
            snapshot_every: d.snapshot_every,
            remesh: d.remesh,
            redistribute: d.redistribute,
        }
    }
}

/// One pinching context, referenced by index from `lp_pinching` monitors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinchingSpec {
    pub kind: PinchingKind,
    #[serde(default)]
    pub m: usize,
    pub epsilon: f64,
    pub sigma: f64,
    pub p: f64,
    /// `K` of the offset variants; zero disables the offset.
    #[serde(default)]
    pub k_offset: f64,
    #[serde(default)]
    pub theta_floor: Vec<f64>,
}

impl PinchingSpec {
    pub fn params(&self) -> PinchingParams {
        PinchingParams {
            kind: self.kind,
            m: self.m,
            epsilon: self.epsilon,
            sigma: self.sigma,
            k_offset: self.k_offset,
            p: self.p,
            theta_floor: self.theta_floor.clone(),
        }
    }
}

fn d_cert_samples() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    #[serde(default = "all_properties")]
    pub properties: Vec<Property>,
    #[serde(default = "d_cert_samples")]
    pub samples: usize,
}

fn all_properties() -> Vec<Property> {
    Property::ALL.to_vec()
}

impl Default for CertifySpec {
    fn default() -> Self {
        Self {
            properties: all_properties(),
            samples: d_cert_samples(),
        }
    }
}

fn d_q_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub form: QConfig,
    /// Sampling cone; the config cone (or the speed's cone) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<SymmetricCone>,
    #[serde(default = "d_q_samples")]
    pub samples: usize,
    /// Θ; computed on the cone when the form needs it and this is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    pub speed: SpeedSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<SymmetricCone>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeSpec>,
    #[serde(default)]
    pub resolution: Resolution,
    #[serde(default)]
    pub flow: FlowParams,
    #[serde(default)]
    pub pinching: Vec<PinchingSpec>,
    #[serde(default)]
    pub monitors: Vec<MonitorSpec>,
    #[serde(default)]
    pub certify: CertifySpec,
    #[serde(default)]
    pub probe_q: Vec<ProbeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Parses and validates a config. Errors name the offending field path.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        Error::config(path.clone(), with_catalog(&path, inner))
    })?;
    de.end().map_err(|e| Error::config(".", e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn with_catalog(path: &str, message: String) -> String {
    if !message.contains("unknown variant") {
        return message;
    }
    let last = path.rsplit('.').next().unwrap_or(path);
    let catalog = match last {
        "speed" | "other" => crate::speed::SPEED_NAMES,
        "shape" => crate::surface::SHAPE_NAMES,
        "monitors" => crate::monitors::MONITOR_NAMES,
        _ => return message,
    };
    format!("{message}; available: {catalog}")
}

impl RunConfig {
    /// The effective config with every default filled in.
    pub fn echo(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn speed(&self) -> Result<Speed> {
        self.speed.build(self.n)
    }

    /// The cone configured for the run, or the speed's own cone.
    pub fn cone_or_default(&self) -> Result<SymmetricCone> {
        Ok(match &self.cone {
            Some(c) => *c,
            None => *self.speed()?.cone(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n < 2 {
            return Err(Error::config("n", format!("n must be at least 2, got {n}")));
        }
        let speed = self.speed().map_err(|e| Error::config("speed", e.to_string()))?;
        if let Some(c) = &self.cone {
            if c.dim() != n {
                return Err(Error::config(
                    "cone.n",
                    format!("cone dimension {} differs from n = {n}", c.dim()),
                ));
            }
        }
        self.flow_config(speed)?;
        for (i, p) in self.pinching.iter().enumerate() {
            let at = |f: &str| format!("pinching[{i}].{f}");
            if !(p.sigma > 0.0 && p.sigma < 0.5) {
                return Err(Error::config(at("sigma"), "sigma must lie in (0, 0.5)"));
            }
            if !(p.p >= 2.0) {
                return Err(Error::config(at("p"), "p must be at least 2"));
            }
            if p.m >= n {
                return Err(Error::config(at("m"), "m must satisfy 0 <= m <= n-1"));
            }
            if !(p.epsilon >= 0.0) {
                return Err(Error::config(at("epsilon"), "epsilon must be non-negative"));
            }
            if !(p.k_offset >= 0.0) {
                return Err(Error::config(at("k_offset"), "k_offset must be non-negative"));
            }
        }
        for (i, mon) in self.monitors.iter().enumerate() {
            if let MonitorSpec::LpPinching { context, .. } = mon {
                if *context >= self.pinching.len() {
                    return Err(Error::config(
                        format!("monitors[{i}].context"),
                        format!("context {context} does not exist ({} defined)", self.pinching.len()),
                    ));
                }
            }
            if mon.needs_seed() && self.seed.is_none() {
                return Err(Error::config(
                    "seed",
                    format!("monitors[{i}] is stochastic and needs a seed"),
                ));
            }
        }
        match self.command {
            Command::Simulate if self.shape.is_none() => {
                return Err(Error::config("shape", "simulate needs an initial shape"));
            }
            Command::CertifySpeed | Command::ProbeQ if self.seed.is_none() => {
                return Err(Error::config("seed", "sampling commands need a seed"));
            }
            _ => {}
        }
        for (i, probe) in self.probe_q.iter().enumerate() {
            if let Some(c) = &probe.cone {
                if c.dim() != n {
                    return Err(Error::config(
                        format!("probe_q[{i}].cone.n"),
                        "cone dimension differs from n",
                    ));
                }
            }
            if let QConfig::CylindricalG1 { m } = probe.form {
                if m >= n {
                    return Err(Error::config(
                        format!("probe_q[{i}].form.m"),
                        "m must satisfy 0 <= m <= n-1",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn flow_config(&self, speed: Speed) -> Result<FlowConfig> {
        let f = &self.flow;
        let cfg = FlowConfig {
            speed,
            cone: self.cone,
            c_cfl: f.c_cfl,
            max_steps: f.max_steps,
            max_time: f.max_time,
            blowup: f.blowup,
            min_inradius_fraction: f.min_inradius_fraction,
            snapshot_every: f.snapshot_every,
            remesh: f.remesh,
            redistribute: f.redistribute,
        };
        cfg.validate().map_err(|e| Error::config("flow", e.to_string()))?;
        Ok(cfg)
    }

    pub fn contexts(&self) -> Result<Vec<PinchingContext>> {
        let speed = self.speed()?;
        let cone = self.cone_or_default()?;
        self.pinching
            .iter()
            .map(|p| PinchingContext::new(speed.clone(), cone, p.params()))
            .collect()
    }

    /// The same run with lengths scaled by `λ` and times by `λ²`.
    pub fn scaled(&self, lambda: f64) -> Result<RunConfig> {
        let mut out = self.clone();
        out.flow.max_time = self.flow.max_time.map(|t| t * lambda * lambda);
        out.shape = self.shape.as_ref().map(|s| scale_shape(s, lambda)).transpose()?;
        for mon in &mut out.monitors {
            match mon {
                MonitorSpec::Harnack { t0: Some(t0), .. } => *t0 *= lambda * lambda,
                MonitorSpec::Ancient { extinction_time, .. } => *extinction_time *= lambda * lambda,
                _ => {}
            }
        }
        Ok(out)
    }
}

fn scale_shape(spec: &ShapeSpec, l: f64) -> Result<ShapeSpec> {
    Ok(match spec.clone() {
        ShapeSpec::Sphere { radius } => ShapeSpec::Sphere { radius: radius * l },
        ShapeSpec::Ellipsoid { a, b, c } => ShapeSpec::Ellipsoid {
            a: a * l,
            b: b * l,
            c: c * l,
        },
        ShapeSpec::CappedDumbbell {
            half_length,
            neck,
            bulge,
        } => ShapeSpec::CappedDumbbell {
            half_length: half_length * l,
            neck: neck * l,
            bulge,
        },
        ShapeSpec::CappedCylinder { radius, length } => ShapeSpec::CappedCylinder {
            radius: radius * l,
            length: length * l,
        },
        ShapeSpec::Torus { major, minor } => ShapeSpec::Torus {
            major: major * l,
            minor: minor * l,
        },
        ShapeSpec::ObjInput { .. } => {
            return Err(Error::Unsupported(
                "a generated shape (OBJ inputs cannot be rescaled in the config)",
            ))
        }
    })
}
