//! Sweep CSV schema: one row per (snr_db, evaluator).
//!
//! Columns: snr_db, method, p_e, std_err, samples, wall_time_s, p_e_raw.
//! For bound rows p_e is the clamped value and p_e_raw the raw union sum;
//! for every other method p_e_raw equals p_e. All fields except wall_time_s
//! are deterministic for a fixed config and seed.

use anyhow::{bail, Context, Result};

pub const HEADER: &str = "snr_db,method,p_e,std_err,samples,wall_time_s,p_e_raw";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub snr_db: f64,
    pub method: String,
    pub p_e: f64,
    pub std_err: f64,
    pub samples: u64,
    pub wall_time_s: f64,
    pub p_e_raw: f64,
}

impl Row {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:e},{:e},{},{:.3},{:e}",
            self.snr_db, self.method, self.p_e, self.std_err, self.samples,
            self.wall_time_s, self.p_e_raw
        )
    }
}

pub fn write_rows(path: &std::path::Path, rows: &[Row]) -> Result<()> {
    let mut text = String::from(HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row.to_csv());
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn parse_rows(text: &str) -> Result<Vec<Row>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == HEADER => {}
        other => bail!("unrecognized sweep CSV header: {other:?}"),
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            bail!("line {}: expected 7 fields, found {}", n + 2, fields.len());
        }
        rows.push(Row {
            snr_db: fields[0].parse().with_context(|| format!("line {}: snr_db", n + 2))?,
            method: fields[1].to_string(),
            p_e: fields[2].parse()?,
            std_err: fields[3].parse()?,
            samples: fields[4].parse()?,
            wall_time_s: fields[5].parse()?,
            p_e_raw: fields[6].parse()?,
        });
    }
    Ok(rows)
}

/// SNR (dB) at which the log-linear interpolation of (snr_db, log10 p_e)
/// crosses `target`. Points must be sorted by snr_db. Returns None when the
/// target is outside the curve's range.
pub fn interp_db_at(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let lt = target.log10();
    for w in points.windows(2) {
        let (d0, p0) = w[0];
        let (d1, p1) = w[1];
        if p0 <= 0.0 || p1 <= 0.0 {
            continue;
        }
        let (l0, l1) = (p0.log10(), p1.log10());
        if (l0 - lt) * (l1 - lt) <= 0.0 && l0 != l1 {
            return Some(d0 + (lt - l0) * (d1 - d0) / (l1 - l0));
        }
    }
    None
}
