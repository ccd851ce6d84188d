//! The `compare` subcommand: per-SNR ratio/difference table for two sweep
//! CSVs plus interpolated dB gaps at requested error-rate targets.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use crate::csvio::{interp_db_at, parse_rows, Row};

#[derive(Args)]
pub struct CompareArgs {
    file_a: PathBuf,
    file_b: PathBuf,
    /// SER targets for the interpolated dB gap, comma separated.
    #[arg(long = "at-pe", default_value = "1e-4")]
    at_pe: String,
    /// Method to read from file A (default: best available).
    #[arg(long)]
    method_a: Option<String>,
    /// Method to read from file B (default: best available).
    #[arg(long)]
    method_b: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

/// Preference order when no method is requested explicitly.
const METHOD_PRIORITY: [&str; 4] = ["quadrature", "mc", "simulation", "bound"];

fn select_curve(rows: &[Row], wanted: Option<&str>) -> Result<(String, Vec<(f64, f64)>)> {
    let method = match wanted {
        Some(m) => {
            if !rows.iter().any(|r| r.method == m) {
                bail!("method {m:?} not present in file");
            }
            m.to_string()
        }
        None => METHOD_PRIORITY
            .iter()
            .find(|m| rows.iter().any(|r| &r.method == *m))
            .map(|m| m.to_string())
            .ok_or_else(|| anyhow::anyhow!("no known method column in file"))?,
    };
    let mut pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.method == method)
        .map(|r| (r.snr_db, r.p_e))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok((method, pts))
}

pub fn run_compare(args: CompareArgs) -> Result<()> {
    let targets: Vec<f64> = args
        .at_pe
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(Into::into))
        .collect::<Result<_>>()?;
    let rows_a = parse_rows(
        &std::fs::read_to_string(&args.file_a)
            .with_context(|| format!("reading {}", args.file_a.display()))?,
    )?;
    let rows_b = parse_rows(
        &std::fs::read_to_string(&args.file_b)
            .with_context(|| format!("reading {}", args.file_b.display()))?,
    )?;
    let (method_a, curve_a) = select_curve(&rows_a, args.method_a.as_deref())?;
    let (method_b, curve_b) = select_curve(&rows_b, args.method_b.as_deref())?;

    let common: Vec<f64> = curve_a
        .iter()
        .map(|&(db, _)| db)
        .filter(|db| curve_b.iter().any(|&(d, _)| d == *db))
        .collect();
    if common.is_empty() {
        bail!("disjoint SNR grids: no common snr_db between the two files");
    }

    let mut report = String::new();
    report.push_str(&format!("# a: {} ({method_a}), b: {} ({method_b})\n",
        args.file_a.display(), args.file_b.display()));
    report.push_str("snr_db,p_a,p_b,ratio_a_over_b,diff_a_minus_b\n");
    for &db in &common {
        let pa = curve_a.iter().find(|&&(d, _)| d == db).unwrap().1;
        let pb = curve_b.iter().find(|&&(d, _)| d == db).unwrap().1;
        report.push_str(&format!("{db},{pa:e},{pb:e},{:e},{:e}\n", pa / pb, pa - pb));
    }
    for &target in &targets {
        let gap = match (interp_db_at(&curve_a, target), interp_db_at(&curve_b, target)) {
            (Some(a), Some(b)) => format!("{:.4}", a - b),
            _ => "unreachable-on-grid".to_string(),
        };
        report.push_str(&format!("# gap_db at p_e={target:e} (a minus b): {gap}\n"));
    }

    match &args.out {
        Some(path) => std::fs::write(path, &report)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{report}"),
    }
    Ok(())
}
