//! Profile snapshots as CSV with columns `s, x, r, kappa_profile, kappa_rot`.

use crate::error::{Error, Result};
use crate::surface::ProfileSurface;

pub const HEADER: [&str; 5] = ["s", "x", "r", "kappa_profile", "kappa_rot"];

pub fn format_profile_csv(profile: &ProfileSurface) -> Result<String> {
    let (kp, kr) = profile.curvatures()?;
    let s = profile.arclength();
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(HEADER).map_err(csv_err)?;
    for i in 0..profile.len() {
        let row = [s[i], profile.xs()[i], profile.rs()[i], kp[i], kr[i]];
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

/// Reads the `x` and `r` columns; the curvature columns are recomputed.
pub fn parse_profile_csv(text: &str, n: usize) -> Result<ProfileSurface> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("profile CSV lacks column {name:?}")))
    };
    let (cx, cr) = (col("x")?, col("r")?);
    let mut x = Vec::new();
    let mut r = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let get = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("row {}: bad number in column {c}", k + 2)))
        };
        x.push(get(cx)?);
        r.push(get(cr)?);
    }
    ProfileSurface::new(n, x, r)
}
