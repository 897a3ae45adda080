//! History directories: `manifest.json`, `series.csv`, and
//! `snapshots/NNNN.{obj|csv}` with `NNNN.meta.json` beside each.
//! Analytic sphere snapshots have a meta file only.

use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::floats;
use super::obj::{format_obj, parse_obj};
use super::profile_csv::{format_profile_csv, parse_profile_csv};
use crate::error::{Error, Result};
use crate::flow::{FlowHistory, Snapshot, SnapshotSummary, Termination};
use crate::surface::{RoundSphere, Surface};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotEntry {
    #[serde(with = "floats::scalar")]
    pub t: f64,
    pub step: usize,
    /// Relative path of the geometry file; absent for analytic spheres.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<String>,
    pub meta: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: u32,
    pub config: RunConfig,
    pub termination: Termination,
    pub snapshots: Vec<SnapshotEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotKind {
    Mesh,
    Profile,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereRecord {
    #[serde(with = "floats::scalar")]
    pub radius: f64,
    #[serde(with = "floats::vec")]
    pub center: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMeta {
    #[serde(with = "floats::scalar")]
    pub t: f64,
    pub step: usize,
    pub n: usize,
    pub kind: SnapshotKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere: Option<SphereRecord>,
    pub summary: SnapshotSummary,
    #[serde(default)]
    pub remeshes: usize,
}

pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let mut de = serde_json::Deserializer::from_str(text);
    let m: Manifest = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(format!("manifest.{path}"), e.into_inner().to_string())
    })?;
    if m.format != FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported manifest format {}", m.format)));
    }
    m.config.validate()?;
    if m.snapshots.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::Parse("manifest snapshot times must increase strictly".into()));
    }
    for e in &m.snapshots {
        for p in e.geometry.iter().chain(std::iter::once(&e.meta)) {
            check_relative(p)?;
        }
    }
    Ok(m)
}

pub fn parse_meta(text: &str) -> Result<SnapshotMeta> {
    let meta: SnapshotMeta = serde_json::from_str(text).map_err(|e| Error::Parse(format!("snapshot meta: {e}")))?;
    if meta.n < 2 {
        return Err(Error::DimensionTooSmall(meta.n));
    }
    match (meta.kind, &meta.sphere) {
        (SnapshotKind::Sphere, None) => return Err(Error::Parse("sphere snapshot meta lacks `sphere`".into())),
        (SnapshotKind::Sphere, Some(_)) => {}
        (_, Some(_)) => return Err(Error::Parse("only sphere snapshots carry `sphere`".into())),
        _ => {}
    }
    Ok(meta)
}

fn check_relative(p: &str) -> Result<()> {
    let ok = Path::new(p).components().all(|c| matches!(c, Component::Normal(_)));
    if ok && !p.is_empty() {
        Ok(())
    } else {
        Err(Error::Parse(format!(
            "snapshot path {p:?} must be relative and stay inside the history directory"
        )))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn kind_of(surface: &Surface) -> SnapshotKind {
    match surface {
        Surface::Mesh(_) => SnapshotKind::Mesh,
        Surface::Profile(_) => SnapshotKind::Profile,
        Surface::Sphere(_) => SnapshotKind::Sphere,
    }
}

/// Writes a history directory, creating it if needed.
pub fn write_history(dir: &Path, config: &RunConfig, history: &FlowHistory) -> Result<Manifest> {
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir).map_err(|e| Error::io(&snap_dir, e))?;
    let mut entries = Vec::with_capacity(history.snapshots.len());
    for (k, s) in history.snapshots.iter().enumerate() {
        let stem = format!("{k:04}");
        let geometry = match &s.surface {
            Surface::Mesh(m) => {
                let name = format!("snapshots/{stem}.obj");
                write(&dir.join(&name), &format_obj(m))?;
                Some(name)
            }
            Surface::Profile(p) => {
                let name = format!("snapshots/{stem}.csv");
                write(&dir.join(&name), &format_profile_csv(p)?)?;
                Some(name)
            }
            Surface::Sphere(_) => None,
        };
        let meta = SnapshotMeta {
            t: s.t,
            step: s.step,
            n: s.surface.dim(),
            kind: kind_of(&s.surface),
            sphere: match &s.surface {
                Surface::Sphere(sp) => Some(SphereRecord {
                    radius: sp.radius(),
                    center: sp.center().to_vec(),
                }),
                _ => None,
            },
            summary: s.summary.clone(),
            remeshes: s.remeshes,
        };
        let meta_name = format!("snapshots/{stem}.meta.json");
        write(&dir.join(&meta_name), &to_json(&meta))?;
        entries.push(SnapshotEntry {
            t: s.t,
            step: s.step,
            geometry,
            meta: meta_name,
        });
    }
    let manifest = Manifest {
        format: FORMAT_VERSION,
        config: config.clone(),
        termination: history.termination.clone(),
        snapshots: entries,
    };
    write(&dir.join("manifest.json"), &to_json(&manifest))?;
    let summaries: Vec<&SnapshotSummary> = history.summaries();
    write(&dir.join("series.csv"), &series_csv(&summaries)?)?;
    Ok(manifest)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

/// Reads a history directory written by [`write_history`].
pub fn read_history(dir: &Path) -> Result<(RunConfig, FlowHistory)> {
    let manifest =
        parse_manifest(&read(&dir.join("manifest.json"))?).map_err(|e| with_path(e, &dir.join("manifest.json")))?;
    let speed = manifest.config.speed()?;
    let n = manifest.config.n;
    let mut snapshots = Vec::with_capacity(manifest.snapshots.len());
    for entry in &manifest.snapshots {
        let meta_path = dir.join(&entry.meta);
        let meta = parse_meta(&read(&meta_path)?).map_err(|e| with_path(e, &meta_path))?;
        if meta.t != entry.t || meta.step != entry.step || meta.n != n {
            return Err(Error::Parse(format!(
                "{}: time, step or dimension disagrees with the manifest",
                meta_path.display()
            )));
        }
        let surface = match (meta.kind, &entry.geometry) {
            (SnapshotKind::Sphere, None) => {
                let sp = meta.sphere.as_ref().expect("checked by parse_meta");
                Surface::Sphere(RoundSphere::new(n, sp.radius, Some(sp.center.clone()))?)
            }
            (SnapshotKind::Mesh, Some(g)) => {
                let path = dir.join(g);
                Surface::Mesh(parse_obj(&read(&path)?).map_err(|e| with_path(e, &path))?)
            }
            (SnapshotKind::Profile, Some(g)) => {
                let path = dir.join(g);
                Surface::Profile(parse_profile_csv(&read(&path)?, n).map_err(|e| with_path(e, &path))?)
            }
            _ => {
                return Err(Error::Parse(format!(
                    "{}: geometry file presence does not match kind {:?}",
                    meta_path.display(),
                    meta.kind
                )))
            }
        };
        if surface.dim() != n {
            return Err(Error::Parse(format!(
                "{}: surface dimension differs from n = {n}",
                meta_path.display()
            )));
        }
        snapshots.push(Snapshot {
            t: meta.t,
            step: meta.step,
            surface,
            summary: meta.summary,
            remeshes: meta.remeshes,
        });
    }
    Ok((
        manifest.config,
        FlowHistory {
            speed,
            snapshots,
            termination: manifest.termination,
        },
    ))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        Error::InvalidMesh(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// One row per snapshot with every scalar summary.
pub fn series_csv(summaries: &[&SnapshotSummary]) -> Result<String> {
    let n = summaries.first().map_or(0, |s| s.cylindrical.len());
    let mut header: Vec<String> = ["t", "step", "nodes", "max_speed", "min_speed"]
        .map(String::from)
        .to_vec();
    header.extend((0..n).map(|m| format!("cylindrical_m{m}")));
    header.extend(["convexity", "inscribed", "exscribed"].map(String::from));
    header.extend((0..n).map(|m| format!("inscribed_cylindrical_m{m}")));
    header.extend(
        [
            "area",
            "volume",
            "inradius",
            "circumradius",
            "diameter",
            "gradient_ratio",
            "integral_fh",
            "integral_f",
            "argmax_speed",
        ]
        .map(String::from),
    );
    header.extend((0..n).map(|m| format!("cyl_distance_at_max_m{m}")));
    let f = floats::format;
    let opt = |v: &Option<f64>| v.map(f).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(&header).map_err(err)?;
    for s in summaries {
        let mut row = vec![
            f(s.t),
            s.step.to_string(),
            s.nodes.to_string(),
            f(s.max_speed),
            f(s.min_speed),
        ];
        row.extend(s.cylindrical.iter().map(opt));
        row.extend([f(s.convexity), f(s.inscribed), f(s.exscribed)]);
        row.extend(s.inscribed_cylindrical.iter().map(opt));
        row.extend([
            f(s.area),
            f(s.volume),
            f(s.inradius),
            f(s.circumradius),
            f(s.diameter),
            f(s.gradient_ratio),
            f(s.integral_fh),
            f(s.integral_f),
            s.argmax_speed.to_string(),
        ]);
        row.extend(s.cyl_distance_at_max.iter().map(|v| f(*v)));
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

/// Writes an exact shrinking-sphere history with `snapshots` samples on
/// `[0, end_fraction·T]`, `T = R₀²/(2f(𝟙))`.
pub fn write_sphere_fixture(
    dir: &Path,
    config: &RunConfig,
    r0: f64,
    snapshots: usize,
    end_fraction: f64,
) -> Result<FlowHistory> {
    let history = sphere_fixture(config, r0, snapshots, end_fraction)?;
    write_history(dir, config, &history)?;
    Ok(history)
}

pub fn sphere_fixture(config: &RunConfig, r0: f64, snapshots: usize, end_fraction: f64) -> Result<FlowHistory> {
    if snapshots < 3 || !(end_fraction > 0.0 && end_fraction < 1.0) {
        return Err(Error::InvalidParameter(
            "a sphere fixture needs at least 3 snapshots and an end fraction in (0, 1)".into(),
        ));
    }
    let speed = config.speed()?;
    let t_ext = extinction_time(&speed, r0)?;
    let times: Vec<f64> = (0..snapshots)
        .map(|k| end_fraction * t_ext * k as f64 / (snapshots - 1) as f64)
        .collect();
    FlowHistory::exact_sphere(&speed, r0, &times)
}

/// `R₀²/(2f(𝟙))`.
pub fn extinction_time(speed: &crate::speed::Speed, r0: f64) -> Result<f64> {
    let f1 = speed.evaluate(&crate::cone::CurvatureTuple::ones(speed.dim()))?;
    Ok(r0 * r0 / (2.0 * f1))
}

/// Default location of reports inside a history directory.
pub fn reports_dir(dir: &Path) -> PathBuf {
    dir.join("reports")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::parse_config;

    fn cfg(n: usize) -> RunConfig {
        parse_config(&format!(
            r#"{{"command": "analyze", "n": {n}, "speed": {{"speed": "harmonic_mean"}}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn sphere_fixture_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let config = cfg(3);
        let h = write_sphere_fixture(dir.path(), &config, 1.0, 5, 0.9).unwrap();
        assert!(!dir.path().join("snapshots/0000.obj").exists());
        assert!(dir.path().join("snapshots/0004.meta.json").exists());
        let (c2, h2) = read_history(dir.path()).unwrap();
        assert_eq!(c2, config);
        assert_eq!(h2.times(), h.times());
        assert_eq!(h2.summaries(), h.summaries());
        assert_eq!(h2.snapshots[3].surface, h.snapshots[3].surface);
        let csv = fs::read_to_string(dir.path().join("series.csv")).unwrap();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("t,step,nodes,max_speed,min_speed,cylindrical_m0,"));
    }

    #[test]
    fn geometry_files_round_trip() {
        use crate::flow::summarize;
        use crate::surface::{ProfileSurface, TriMesh};
        let dir = tempfile::tempdir().unwrap();
        let speed = crate::speed::Speed::harmonic_mean(2);
        let surfaces = [
            Surface::Mesh(TriMesh::icosphere(1, 1.0).unwrap()),
            Surface::Profile(ProfileSurface::ellipsoid(2, 1.5, 1.0, 30).unwrap()),
        ];
        let snapshots = surfaces
            .into_iter()
            .enumerate()
            .map(|(k, surface)| {
                let summary = summarize(&surface, &speed, k as f64, k).unwrap();
                Snapshot {
                    t: k as f64,
                    step: k,
                    surface,
                    summary,
                    remeshes: k,
                }
            })
            .collect();
        let h = FlowHistory {
            speed,
            snapshots,
            termination: Termination::StepBudget { t: 1.0, step: 1 },
        };
        write_history(dir.path(), &cfg(2), &h).unwrap();
        let (_, back) = read_history(dir.path()).unwrap();
        for (a, b) in h.snapshots.iter().zip(&back.snapshots) {
            assert_eq!(a.surface, b.surface);
            assert_eq!(a.summary, b.summary);
            assert_eq!(a.remeshes, b.remeshes);
        }
        assert_eq!(back.termination, h.termination);
    }

    #[test]
    fn rejects_escaping_paths_and_bad_order() {
        let dir = tempfile::tempdir().unwrap();
        write_sphere_fixture(dir.path(), &cfg(2), 1.0, 3, 0.5).unwrap();
        let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let bad = text.replace("snapshots/0001.meta.json", "../0001.meta.json");
        assert!(parse_manifest(&bad).is_err());
        let mut m = parse_manifest(&text).unwrap();
        m.snapshots.swap(0, 1);
        assert!(parse_manifest(&to_json(&m)).is_err());
    }
}
