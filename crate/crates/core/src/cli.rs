//! Command dispatch shared by the binary and the integration tests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::certify::{certify, CertificationReport};
use crate::error::{Error, Result};
use crate::flow::{run, FlowHistory};
use crate::io::config::{Command, RunConfig};
use crate::io::history::{read_history, reports_dir, to_json, write_history, write_sphere_fixture};
use crate::monitors::{combined_csv, evaluate, MonitorReport, MonitorSpec, Verdict};
use crate::pinching::{sample_q_extremes, QConfig, QSignReport};
use crate::speed::ThetaVariant;
use crate::surface::make_shape;

/// What a command produced and whether any verdict failed.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub failures: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    /// JSON printed to stdout by the binary.
    pub stdout: String,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn write(path: &Path, text: &str, out: &mut Outcome) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    out.artifacts.push(path.to_path_buf());
    Ok(())
}

fn check_command(cfg: &RunConfig, expected: Command) -> Result<()> {
    if cfg.command != expected {
        return Err(Error::config(
            "command",
            format!("config is for {:?}, but {:?} was invoked", cfg.command, expected),
        ));
    }
    Ok(())
}

/// Runs every selected monitor (or the default set) and writes one JSON file
/// per report plus `monitors.csv` into `dir`. A monitor that errors is
/// recorded as a failed report carrying the error text.
pub fn run_monitors(
    history: &FlowHistory,
    cfg: &RunConfig,
    dir: &Path,
    out: &mut Outcome,
) -> Result<Vec<MonitorReport>> {
    let specs = if cfg.monitors.is_empty() {
        MonitorSpec::defaults()
    } else {
        cfg.monitors.clone()
    };
    let contexts = if cfg.pinching.is_empty() {
        Vec::new()
    } else {
        cfg.contexts()?
    };
    let mut reports = Vec::new();
    for spec in &specs {
        match evaluate(history, spec, &contexts, cfg.seed) {
            Ok(rs) => reports.extend(rs),
            Err(e) => reports.push(MonitorReport {
                quantity: monitor_name(spec).into(),
                times: Vec::new(),
                series: Vec::new(),
                scalar: None,
                tolerance: 0.0,
                verdict: Verdict::Fail,
                snapshots: Vec::new(),
                parameters: serde_json::to_value(spec).expect("spec serializes"),
                note: Some(format!("error: {e}")),
            }),
        }
    }
    for (k, r) in reports.iter().enumerate() {
        write(&dir.join(format!("{k:02}_{}.json", r.quantity)), &to_json(r), out)?;
        if r.verdict == Verdict::Fail {
            out.failures.push(format!(
                "{}: {}",
                r.quantity,
                r.note.as_deref().unwrap_or("verdict fail")
            ));
        }
    }
    write(
        &dir.join("monitors.csv"),
        &combined_csv(&history.times(), &reports)?,
        out,
    )?;
    Ok(reports)
}

fn monitor_name(spec: &MonitorSpec) -> &'static str {
    match spec {
        MonitorSpec::AreaDecay { .. } => "area_decay",
        MonitorSpec::PinchingSeries { .. } => "pinching_series",
        MonitorSpec::LpPinching { .. } => "lp_pinching",
        MonitorSpec::Evolution { .. } => "evolution",
        MonitorSpec::Harnack { .. } => "harnack",
        MonitorSpec::Ancient { .. } => "ancient",
        MonitorSpec::Poincare { .. } => "poincare",
        MonitorSpec::GaussIntegral { .. } => "gauss_integral",
    }
}

pub fn simulate(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    check_command(cfg, Command::Simulate)?;
    let mut out = Outcome {
        stdout: cfg.echo(),
        ..Outcome::default()
    };
    let speed = cfg.speed()?;
    let shape = cfg.shape.as_ref().ok_or(Error::MissingInput("shape"))?;
    let initial = make_shape(shape, cfg.n, &cfg.resolution)?;
    let history = run(&cfg.flow_config(speed)?, initial)?;
    write_history(out_dir, cfg, &history)?;
    out.artifacts.push(out_dir.join("manifest.json"));
    run_monitors(&history, cfg, &reports_dir(out_dir), &mut out)?;
    Ok(out)
}

pub fn analyze(dir: &Path) -> Result<Outcome> {
    let (cfg, history) = read_history(dir)?;
    let mut out = Outcome {
        stdout: cfg.echo(),
        ..Outcome::default()
    };
    run_monitors(&history, &cfg, &reports_dir(dir), &mut out)?;
    Ok(out)
}

#[derive(Serialize)]
struct Reports<'a, T> {
    config: &'a RunConfig,
    reports: Vec<T>,
}

pub fn certify_speed(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<Outcome> {
    check_command(cfg, Command::CertifySpeed)?;
    let speed = cfg.speed()?;
    let cone = cfg.cone_or_default()?;
    let seed = cfg.seed.ok_or(Error::MissingInput("seed"))?;
    let reports: Vec<CertificationReport> = cfg
        .certify
        .properties
        .iter()
        .map(|&p| certify(&speed, &cone, p, cfg.certify.samples, seed))
        .collect::<Result<_>>()?;
    let mut out = Outcome::default();
    for r in &reports {
        if !r.passed {
            out.failures
                .push(format!("{:?}: worst margin {}", r.property, r.worst_margin));
        }
    }
    finish(cfg, reports, out_dir.map(|d| d.join("certify.json")), out)
}

pub fn probe_q(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<Outcome> {
    check_command(cfg, Command::ProbeQ)?;
    let speed = cfg.speed()?;
    let seed = cfg.seed.ok_or(Error::MissingInput("seed"))?;
    let mut reports: Vec<QSignReport> = Vec::new();
    for probe in &cfg.probe_q {
        let cone = match &probe.cone {
            Some(c) => *c,
            None => cfg.cone_or_default()?,
        };
        let theta = match (probe.theta, probe.form) {
            (Some(t), _) => t,
            (None, QConfig::ConcaveG2 | QConfig::Combined { .. }) => {
                speed.theta_constant(&cone, ThetaVariant::Concave, &[])?
            }
            (None, _) => 0.0,
        };
        reports.push(sample_q_extremes(
            &speed,
            &cone,
            probe.form,
            theta,
            probe.samples,
            seed,
        )?);
    }
    let mut out = Outcome::default();
    for r in &reports {
        if !r.passed {
            out.failures.push(format!(
                "{:?}: extremes [{}, {}]",
                r.config, r.min_normalized, r.max_normalized
            ));
        }
    }
    finish(cfg, reports, out_dir.map(|d| d.join("probe_q.json")), out)
}

fn finish<T: Serialize>(cfg: &RunConfig, reports: Vec<T>, path: Option<PathBuf>, mut out: Outcome) -> Result<Outcome> {
    let text = to_json(&Reports { config: cfg, reports });
    if let Some(p) = path {
        write(&p, &text, &mut out)?;
    }
    out.stdout = text;
    Ok(out)
}

/// Writes an exact shrinking-sphere history whose stored config selects the
/// monitors that have closed-form answers on it.
pub fn sphere_fixture(
    cfg: &RunConfig,
    r0: f64,
    snapshots: usize,
    end_fraction: f64,
    out_dir: &Path,
) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    cfg.command = Command::Analyze;
    if cfg.monitors.is_empty() {
        let t_ext = crate::io::history::extinction_time(&cfg.speed()?, r0)?;
        let mut mons = MonitorSpec::defaults();
        mons.push(MonitorSpec::PinchingSeries {
            series: crate::monitors::SeriesKind::Cylindrical { m: 0 },
            options: Default::default(),
        });
        mons.push(MonitorSpec::Harnack {
            t0: None,
            samples: 1,
            tolerance: 1e-3,
        });
        mons.push(MonitorSpec::Ancient {
            extinction_time: t_ext,
            options: Default::default(),
        });
        cfg.monitors = mons;
    }
    cfg.validate()?;
    write_sphere_fixture(out_dir, &cfg, r0, snapshots, end_fraction)?;
    Ok(Outcome {
        stdout: cfg.echo(),
        artifacts: vec![out_dir.join("manifest.json")],
        failures: Vec::new(),
    })
}
