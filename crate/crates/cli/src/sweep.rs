//! The `sweep` and `bound` subcommands.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use mcser_core::bounds::{ub_quasi_biortho, ub_quasi_ortho};
use mcser_core::closed_form::{
    ser_biorthogonal, ser_equicorrelated, ser_orthogonal, SnrPoint,
};
use mcser_core::codeset::{self, CodeSet, SignalingMode};
use mcser_core::link_sim::simulate_ser;
use mcser_core::mc_ser::{budget_infeasible, estimate_ser, required_samples, BudgetPolicy};

use crate::csvio::{self, Row};
use crate::{parse_snr_grid, InfeasibleBudget, ModeArg};

/// Gram tolerance for detecting orthogonal / equi-correlated structure.
const STRUCTURE_TOL: f64 = 1e-9;

#[derive(Args)]
pub struct SweepArgs {
    /// Code-set file to evaluate.
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    codeset: Option<PathBuf>,
    /// SNR grid in dB: "8,9,10" or "8:14:0.5".
    #[arg(long = "snr-db", required_unless_present = "config", conflicts_with = "config")]
    snr_db: Option<String>,
    /// Comma list of evaluators: auto, quadrature, mc, bound, simulation.
    #[arg(long, default_value = "auto", conflicts_with = "config")]
    evaluators: String,
    /// Chebyshev miss probability delta.
    #[arg(long, default_value_t = 0.05, conflicts_with = "config")]
    delta: f64,
    /// Chebyshev relative error epsilon.
    #[arg(long, default_value_t = 0.1, conflicts_with = "config")]
    epsilon: f64,
    /// Cap on total Monte Carlo samples per point.
    #[arg(long, default_value_t = 1_000_000_000, conflicts_with = "config")]
    cap: u64,
    /// Trials per point for the simulation evaluator.
    #[arg(long, default_value_t = 1_000_000, conflicts_with = "config")]
    trials: u64,
    #[arg(long, default_value_t = 0, conflicts_with = "config")]
    seed: u64,
    /// Override the signaling mode stored in the code-set file.
    #[arg(long, value_enum, conflicts_with = "config")]
    mode: Option<ModeArg>,
    /// Output CSV path.
    #[arg(short, long, required_unless_present = "config", conflicts_with = "config")]
    out: Option<PathBuf>,
    /// Metadata JSON path; defaults to the CSV path with extension .json.
    #[arg(long, conflicts_with = "config")]
    meta: Option<PathBuf>,
    /// Read the whole run configuration from a JSON file instead of flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// The sweep configuration, as accepted in a `--config` JSON file.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    codeset: PathBuf,
    snr_db: Vec<f64>,
    #[serde(default = "default_evaluators")]
    evaluators: Vec<String>,
    #[serde(default = "default_delta")]
    delta: f64,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
    #[serde(default = "default_cap")]
    cap: u64,
    #[serde(default = "default_trials")]
    trials: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    mode: Option<SignalingMode>,
    out: PathBuf,
    #[serde(default)]
    meta: Option<PathBuf>,
}

fn default_evaluators() -> Vec<String> {
    vec!["auto".into()]
}
fn default_delta() -> f64 {
    0.05
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_cap() -> u64 {
    1_000_000_000
}
fn default_trials() -> u64 {
    1_000_000
}

impl SweepArgs {
    fn into_config(self) -> Result<RunConfig> {
        if let Some(path) = self.config {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let cfg: RunConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            return Ok(cfg);
        }
        Ok(RunConfig {
            codeset: self.codeset.expect("clap guarantees presence"),
            snr_db: parse_snr_grid(&self.snr_db.expect("clap guarantees presence"))?,
            evaluators: self.evaluators.split(',').map(|s| s.trim().to_string()).collect(),
            delta: self.delta,
            epsilon: self.epsilon,
            cap: self.cap,
            trials: self.trials,
            seed: self.seed,
            mode: self.mode.map(Into::into),
            out: self.out.expect("clap guarantees presence"),
            meta: self.meta,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Evaluator {
    Quadrature,
    Mc,
    Bound,
    Simulation,
}

impl Evaluator {
    fn name(self) -> &'static str {
        match self {
            Evaluator::Quadrature => "quadrature",
            Evaluator::Mc => "mc",
            Evaluator::Bound => "bound",
            Evaluator::Simulation => "simulation",
        }
    }
}

/// Structure detected from the Gram matrix, deciding whether a 1-D
/// quadrature form applies.
#[derive(Debug, Clone, Copy, PartialEq)]
enum GramStructure {
    Orthogonal,
    EquiCorrelated(f64),
    General,
}

fn detect_structure(set: &CodeSet) -> GramStructure {
    let kappa = codeset::gram(set).kappa_vec();
    if kappa.is_empty() || kappa.iter().all(|k| k.abs() <= STRUCTURE_TOL) {
        return GramStructure::Orthogonal;
    }
    let first = kappa[0];
    if kappa.iter().all(|k| (k - first).abs() <= STRUCTURE_TOL) {
        return GramStructure::EquiCorrelated(first);
    }
    GramStructure::General
}

fn resolve_evaluators(
    names: &[String],
    set: &CodeSet,
    structure: GramStructure,
) -> Result<Vec<Evaluator>> {
    let mut out = Vec::new();
    let push = |e: Evaluator, out: &mut Vec<Evaluator>| {
        if !out.contains(&e) {
            out.push(e);
        }
    };
    for name in names {
        match name.as_str() {
            "auto" => {
                let quadrature_applies = matches!(
                    (structure, set.mode()),
                    (GramStructure::Orthogonal, _)
                        | (GramStructure::EquiCorrelated(_), SignalingMode::QuasiOrthogonal)
                );
                push(
                    if quadrature_applies { Evaluator::Quadrature } else { Evaluator::Mc },
                    &mut out,
                );
                push(Evaluator::Bound, &mut out);
            }
            "quadrature" => push(Evaluator::Quadrature, &mut out),
            "mc" => push(Evaluator::Mc, &mut out),
            "bound" => push(Evaluator::Bound, &mut out),
            "simulation" => push(Evaluator::Simulation, &mut out),
            other => bail!("unknown evaluator {other:?}"),
        }
    }
    if out.is_empty() {
        bail!("no evaluator selected");
    }
    // Fixed output order keeps the CSV deterministic.
    let order = [Evaluator::Quadrature, Evaluator::Mc, Evaluator::Bound, Evaluator::Simulation];
    Ok(order.into_iter().filter(|e| out.contains(e)).collect())
}

fn quadrature_ser(set: &CodeSet, structure: GramStructure, snr: SnrPoint) -> Result<f64> {
    match (structure, set.mode()) {
        (GramStructure::Orthogonal, SignalingMode::QuasiOrthogonal) => {
            Ok(ser_orthogonal(set.m().max(2), snr))
        }
        (GramStructure::Orthogonal, SignalingMode::QuasiBiorthogonal) => {
            Ok(ser_biorthogonal(set.m(), snr))
        }
        (GramStructure::EquiCorrelated(eta), SignalingMode::QuasiOrthogonal) => {
            Ok(ser_equicorrelated(set.m(), eta, snr)?)
        }
        _ => bail!(
            "quadrature evaluator needs an orthogonal or equi-correlated \
             (quasi-orthogonal mode) set; use mc instead"
        ),
    }
}

pub fn run_sweep(args: SweepArgs) -> Result<()> {
    let cfg = args.into_config()?;
    if cfg.snr_db.is_empty() || cfg.snr_db.windows(2).any(|w| w[1] <= w[0]) {
        bail!("SNR grid must be non-empty and strictly increasing");
    }
    let mut set = codeset::load(&cfg.codeset)
        .with_context(|| format!("loading {}", cfg.codeset.display()))?;
    if let Some(mode) = cfg.mode {
        set = set.with_mode(mode);
    }
    let structure = detect_structure(&set);
    let evaluators = resolve_evaluators(&cfg.evaluators, &set, structure)?;

    // Refuse up front if any requested MC point cannot meet its accuracy
    // target within the cap; the bound evaluator covers that regime.
    if evaluators.contains(&Evaluator::Mc) {
        for &db in &cfg.snr_db {
            let snr = SnrPoint::from_db(db)?;
            let p_ref = BudgetPolicy::reference_for(set.mode(), set.m(), snr);
            let policy = policy_at(&cfg, set.mode(), set.m(), snr)?;
            if budget_infeasible(&policy) {
                return Err(anyhow!(InfeasibleBudget(format!(
                    "MC needs {:.2e} samples at {db} dB (reference p_e = {p_ref:.2e}) but the \
                     cap is {:.2e}; evaluate this regime with the bound evaluator instead",
                    1.0 / (cfg.delta * cfg.epsilon * cfg.epsilon * p_ref),
                    cfg.cap as f64
                ))));
            }
        }
    }

    let started = Instant::now();
    let mut rows = Vec::new();
    for &db in &cfg.snr_db {
        let snr = SnrPoint::from_db(db)?;
        for &ev in &evaluators {
            let t = Instant::now();
            let row = match ev {
                Evaluator::Quadrature => {
                    let p = quadrature_ser(&set, structure, snr)?;
                    Row {
                        snr_db: db,
                        method: ev.name().into(),
                        p_e: p,
                        std_err: 0.0,
                        samples: 0,
                        wall_time_s: 0.0,
                        p_e_raw: p,
                    }
                }
                Evaluator::Mc => {
                    let policy = policy_at(&cfg, set.mode(), set.m(), snr)?;
                    let est = estimate_ser(&set, snr, &policy, cfg.seed)?;
                    Row {
                        snr_db: db,
                        method: ev.name().into(),
                        p_e: est.p_e,
                        std_err: est.std_err,
                        samples: est.samples_total,
                        wall_time_s: 0.0,
                        p_e_raw: est.p_e,
                    }
                }
                Evaluator::Bound => {
                    let b = match set.mode() {
                        SignalingMode::QuasiOrthogonal => ub_quasi_ortho(&set, snr)?,
                        SignalingMode::QuasiBiorthogonal => ub_quasi_biortho(&set, snr)?,
                    };
                    Row {
                        snr_db: db,
                        method: ev.name().into(),
                        p_e: b.clamped,
                        std_err: 0.0,
                        samples: 0,
                        wall_time_s: 0.0,
                        p_e_raw: b.raw,
                    }
                }
                Evaluator::Simulation => {
                    let sim = simulate_ser(&set, snr, cfg.trials, cfg.seed);
                    Row {
                        snr_db: db,
                        method: ev.name().into(),
                        p_e: sim.p_e_hat,
                        std_err: sim.std_err,
                        samples: sim.trials,
                        wall_time_s: 0.0,
                        p_e_raw: sim.p_e_hat,
                    }
                }
            };
            let mut row = row;
            row.wall_time_s = t.elapsed().as_secs_f64();
            rows.push(row);
        }
    }
    csvio::write_rows(&cfg.out, &rows)?;
    write_metadata(&cfg, &set, &evaluators, rows.len(), started.elapsed().as_secs_f64())?;
    println!("wrote {} rows to {}", rows.len(), cfg.out.display());
    Ok(())
}

fn policy_at(
    cfg: &RunConfig,
    mode: SignalingMode,
    m: usize,
    snr: SnrPoint,
) -> Result<BudgetPolicy> {
    let p_ref = BudgetPolicy::reference_for(mode, m, snr).max(1e-300);
    Ok(BudgetPolicy::new(cfg.delta, cfg.epsilon, p_ref.min(1.0), cfg.cap)?)
}

fn write_metadata(
    cfg: &RunConfig,
    set: &CodeSet,
    evaluators: &[Evaluator],
    rows: usize,
    wall_time_s: f64,
) -> Result<()> {
    let w = codeset::gram(set);
    let meta_path = cfg
        .meta
        .clone()
        .unwrap_or_else(|| cfg.out.with_extension("json"));
    let snr = &cfg.snr_db;
    let meta = serde_json::json!({
        "tool": "mcser",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "sweep",
        "seed": cfg.seed,
        "policy": { "delta": cfg.delta, "epsilon": cfg.epsilon, "cap": cfg.cap },
        "trials": cfg.trials,
        "evaluators": evaluators.iter().map(|e| e.name()).collect::<Vec<_>>(),
        "snr_db": snr,
        "rows": rows,
        "wall_time_s": wall_time_s,
        "codeset": {
            "path": cfg.codeset.display().to_string(),
            "mode": set.mode().to_string(),
            "m": set.m(),
            "l": set.l(),
            "generator": set.provenance(),
            "max_abs_corr": w.max_abs_off_diagonal(),
            "mean_abs_corr": w.mean_abs_off_diagonal(),
            "min_eigenvalue": w.min_eigenvalue(),
        },
    });
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)
        .with_context(|| format!("writing {}", meta_path.display()))?;
    Ok(())
}

#[derive(Args)]
pub struct BoundArgs {
    #[arg(long)]
    codeset: PathBuf,
    #[arg(long = "snr-db")]
    snr_db: String,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(short, long)]
    out: PathBuf,
}

pub fn run_bound(args: BoundArgs) -> Result<()> {
    let grid = parse_snr_grid(&args.snr_db)?;
    let mut set = codeset::load(&args.codeset)
        .with_context(|| format!("loading {}", args.codeset.display()))?;
    if let Some(mode) = args.mode {
        set = set.with_mode(mode.into());
    }
    let mut rows = Vec::new();
    for &db in &grid {
        let snr = SnrPoint::from_db(db)?;
        let t = Instant::now();
        let b = match set.mode() {
            SignalingMode::QuasiOrthogonal => ub_quasi_ortho(&set, snr)?,
            SignalingMode::QuasiBiorthogonal => ub_quasi_biortho(&set, snr)?,
        };
        rows.push(Row {
            snr_db: db,
            method: "bound".into(),
            p_e: b.clamped,
            std_err: 0.0,
            samples: 0,
            wall_time_s: t.elapsed().as_secs_f64(),
            p_e_raw: b.raw,
        });
    }
    csvio::write_rows(&args.out, &rows)?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

/// Sanity used by tests: the required sample count the sweep would size.
#[allow(dead_code)]
pub fn sized_samples(delta: f64, epsilon: f64, p_ref: f64, cap: u64, m: usize) -> Result<u64> {
    Ok(required_samples(&BudgetPolicy::new(delta, epsilon, p_ref, cap)?, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mcser_core::codeset::{make_equicorrelated, make_orthogonal, make_random_quasi};

    #[test]
    fn structure_detection() {
        assert_eq!(detect_structure(&make_orthogonal(4, 4).unwrap()), GramStructure::Orthogonal);
        match detect_structure(&make_equicorrelated(4, 0.3).unwrap()) {
            GramStructure::EquiCorrelated(eta) => assert!((eta - 0.3).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            detect_structure(&make_random_quasi(5, 5, 0.3, 1).unwrap()),
            GramStructure::General
        );
    }

    #[test]
    fn auto_picks_quadrature_only_where_valid() {
        let ortho = make_orthogonal(4, 4).unwrap();
        let evs = resolve_evaluators(&["auto".into()], &ortho, detect_structure(&ortho)).unwrap();
        assert_eq!(evs, vec![Evaluator::Quadrature, Evaluator::Bound]);

        let equi = make_equicorrelated(4, 0.2)
            .unwrap()
            .with_mode(SignalingMode::QuasiBiorthogonal);
        let evs = resolve_evaluators(&["auto".into()], &equi, detect_structure(&equi)).unwrap();
        assert_eq!(evs, vec![Evaluator::Mc, Evaluator::Bound]);

        let general = make_random_quasi(4, 4, 0.2, 3).unwrap();
        let evs =
            resolve_evaluators(&["auto".into()], &general, detect_structure(&general)).unwrap();
        assert_eq!(evs, vec![Evaluator::Mc, Evaluator::Bound]);
    }

    #[test]
    fn evaluator_order_is_fixed() {
        let set = make_orthogonal(4, 4).unwrap();
        let evs = resolve_evaluators(
            &["simulation".into(), "mc".into(), "quadrature".into()],
            &set,
            GramStructure::Orthogonal,
        )
        .unwrap();
        assert_eq!(evs, vec![Evaluator::Quadrature, Evaluator::Mc, Evaluator::Simulation]);
        assert!(resolve_evaluators(&["bogus".into()], &set, GramStructure::Orthogonal).is_err());
    }
}
