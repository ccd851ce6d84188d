//! The `sensitivity` subcommand: tables of the union-bound Taylor
//! sensitivity over SNR and correlation grids.
//!
//! Each row evaluates the bound with every pair correlation set to the same
//! kappa, together with the second-order prediction from the expansion
//! around the orthogonal point.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use mcser_core::bounds::{pub_of_kappa, taylor_sensitivity};
use mcser_core::closed_form::SnrPoint;

use crate::parse_snr_grid;

pub const HEADER: &str =
    "snr_db,m,kappa,p_ub_exact,p_ub_predicted,p_ub_at_zero,alpha,curvature,ratio,ratio_approx";

#[derive(Args)]
pub struct SensitivityArgs {
    /// Number of code vectors M.
    #[arg(long)]
    m: usize,
    /// SNR grid in dB: "8,10,12" or "8:14:2".
    #[arg(long = "snr-db")]
    snr_db: String,
    /// Common pair correlation values to evaluate, comma separated.
    #[arg(long, default_value = "0,0.02,0.05", allow_hyphen_values = true)]
    kappa: String,
    /// Output CSV path (stdout when omitted).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

pub fn run_sensitivity(args: SensitivityArgs) -> Result<()> {
    if args.m < 2 {
        bail!("sensitivity needs M >= 2");
    }
    let grid = parse_snr_grid(&args.snr_db)?;
    let kappas: Vec<f64> = args
        .kappa
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(Into::into))
        .collect::<Result<_>>()?;
    let pairs = args.m * (args.m - 1) / 2;

    let mut text = String::from(HEADER);
    text.push('\n');
    for &db in &grid {
        let snr = SnrPoint::from_db(db)?;
        for &k in &kappas {
            let kappa_vec = vec![k; pairs];
            let ts = taylor_sensitivity(args.m, snr, &kappa_vec)?;
            let exact = pub_of_kappa(&kappa_vec, args.m, snr)?;
            text.push_str(&format!(
                "{db},{},{k},{exact:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                args.m,
                ts.second_order_prediction,
                ts.p_ub_at_zero,
                ts.alpha,
                ts.curvature,
                ts.ratio,
                ts.ratio_approx
            ));
        }
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, &text)
                .with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}
