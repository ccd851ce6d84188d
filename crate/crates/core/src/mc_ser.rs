//! Monte Carlo integration of the correct-decision probabilities for
//! arbitrary code sets.
//!
//! Each per-symbol probability P(correct | s_i) is the mass of the standard
//! normal distribution inside the decision region of [`QrPair`], estimated
//! as the hit fraction of i.i.d. N(0, I) draws. Sample budgets follow the
//! Chebyshev rule KM = 1/(delta epsilon^2 p_e): with that many total samples
//! the relative error of the estimate exceeds epsilon with probability at
//! most delta.
//!
//! Draws are organized into [`seeding::BLOCK_SIZE`] blocks with
//! counter-derived RNGs and combined as integer hit counts, so estimates are
//! identical under any parallel schedule.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::closed_form::{ser_biorthogonal, ser_orthogonal, SnrPoint};
use crate::codeset::{CodeSet, SignalingMode};
use crate::geometry::{GeometryError, QrPair};
use crate::seeding;

#[derive(Debug, Error)]
pub enum McSerError {
    #[error("invalid budget policy: {0}")]
    InvalidPolicy(String),
    #[error("budget cap {cap} yields zero samples per symbol for M = {m}")]
    Sizing { cap: u64, m: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Chebyshev sample-budget policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetPolicy {
    /// Probability that the relative error exceeds `epsilon`.
    pub delta: f64,
    /// Target relative error of the estimate.
    pub epsilon: f64,
    /// Reference error probability used for sizing, normally the SER of the
    /// equivalent orthogonal (or biorthogonal) code set, which under-states
    /// the true value and therefore over-states the budget.
    pub p_e_ref: f64,
    /// Hard cap on the total number of samples KM.
    pub cap: u64,
}

impl BudgetPolicy {
    pub fn new(delta: f64, epsilon: f64, p_e_ref: f64, cap: u64) -> Result<Self, McSerError> {
        if !(0.0..1.0).contains(&delta) || delta == 0.0 {
            return Err(McSerError::InvalidPolicy(format!("delta = {delta} not in (0,1)")));
        }
        if !(0.0..1.0).contains(&epsilon) || epsilon == 0.0 {
            return Err(McSerError::InvalidPolicy(format!("epsilon = {epsilon} not in (0,1)")));
        }
        if !p_e_ref.is_finite() || p_e_ref <= 0.0 || p_e_ref > 1.0 {
            return Err(McSerError::InvalidPolicy(format!("p_e_ref = {p_e_ref} not in (0,1]")));
        }
        if cap == 0 {
            return Err(McSerError::InvalidPolicy("cap must be >= 1".into()));
        }
        Ok(Self { delta, epsilon, p_e_ref, cap })
    }

    /// Desk-scale defaults: delta = 0.05, epsilon = 0.1, cap 1e9.
    pub fn desk_scale(p_e_ref: f64) -> Result<Self, McSerError> {
        Self::new(0.05, 0.1, p_e_ref, 1_000_000_000)
    }

    /// delta = epsilon = 0.01, giving KM = 1e6/p_e. Accurate and expensive.
    pub fn publication_scale(p_e_ref: f64) -> Result<Self, McSerError> {
        Self::new(0.01, 0.01, p_e_ref, 1_000_000_000_000)
    }

    /// Reference error probability for sizing: the closed-form SER of the
    /// orthogonal (or biorthogonal) set of the same size at the same SNR.
    pub fn reference_for(mode: SignalingMode, m: usize, snr: SnrPoint) -> f64 {
        match mode {
            SignalingMode::QuasiOrthogonal => ser_orthogonal(m.max(2), snr),
            SignalingMode::QuasiBiorthogonal => ser_biorthogonal(m, snr),
        }
    }
}

/// Total sample budget: min(ceil(1/(delta epsilon^2 p_e_ref)), cap), rounded
/// up to a multiple of `m` so it divides evenly across symbols.
pub fn required_samples(policy: &BudgetPolicy, m: usize) -> u64 {
    let raw = 1.0 / (policy.delta * policy.epsilon * policy.epsilon * policy.p_e_ref);
    let km = if raw >= u64::MAX as f64 { u64::MAX } else { raw.ceil() as u64 };
    let km = km.min(policy.cap);
    let m = m.max(1) as u64;
    km.div_ceil(m).saturating_mul(m)
}

/// True when the un-capped Chebyshev requirement exceeds the policy cap, in
/// which case the estimate cannot reach the requested accuracy.
pub fn budget_infeasible(policy: &BudgetPolicy) -> bool {
    let raw = 1.0 / (policy.delta * policy.epsilon * policy.epsilon * policy.p_e_ref);
    raw > policy.cap as f64
}

/// Monte Carlo estimate of P(correct | s_i) from `k` standardized draws.
///
/// Samples are standard normal M-vectors; the standardization already folds
/// the noise variance N0/2 into the region geometry. Deterministic in
/// (qr.index(), k, seed) for any parallel schedule.
pub fn estimate_pc_given_si(
    qr: &QrPair,
    snr: SnrPoint,
    mode: SignalingMode,
    k: u64,
    seed: u64,
) -> f64 {
    assert!(k >= 1, "need at least one sample");
    let hits = count_region_hits(qr, snr, mode, k, seed);
    hits as f64 / k as f64
}

fn count_region_hits(qr: &QrPair, snr: SnrPoint, mode: SignalingMode, k: u64, seed: u64) -> u64 {
    let rt = qr.r().transpose();
    let stream = qr.index() as u64;
    let (nblocks, _) = seeding::blocks_of(k);
    (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = seeding::block_rng(seed, stream, b);
            let n = seeding::block_len(k, b) as usize;
            count_block(&rt, snr, mode, &mut rng, n)
        })
        .sum()
}

/// Evaluate one block of samples with a single matrix product
/// Z = R^T Vt, where column c of Vt is the sample with sqrt(2 Es/N0) added
/// to its first coordinate. Column c is a hit when z_j < vt_0 for all j >= 1
/// (biorthogonal mode: also -z_j < vt_0 and vt_0 > 0), identical to
/// `QrPair::in_region`.
fn count_block(
    rt: &DMatrix<f64>,
    snr: SnrPoint,
    mode: SignalingMode,
    rng: &mut ChaCha8Rng,
    n: usize,
) -> u64 {
    let m = rt.ncols();
    let s2 = snr.mean_offset();
    let mut vt = DMatrix::<f64>::zeros(m, n);
    for c in 0..n {
        let mut col = vt.column_mut(c);
        for r in 0..m {
            col[r] = rng.sample::<f64, _>(StandardNormal);
        }
        col[0] += s2;
    }
    let z = rt * &vt;
    let biortho = mode == SignalingMode::QuasiBiorthogonal;
    let mut hits = 0u64;
    for c in 0..n {
        let vt0 = vt[(0, c)];
        let mut inside = !biortho || vt0 > 0.0;
        if inside {
            let zc = z.column(c);
            for j in 1..m {
                let zj = zc[j];
                inside = zj < vt0 && (!biortho || -zj < vt0);
                if !inside {
                    break;
                }
            }
        }
        hits += inside as u64;
    }
    hits
}

/// How an estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mc,
    Quadrature,
    Simulation,
    Bound,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Mc => "mc",
            Method::Quadrature => "quadrature",
            Method::Simulation => "simulation",
            Method::Bound => "bound",
        })
    }
}

/// A symbol error probability estimate with its uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SerEstimate {
    pub p_e: f64,
    /// Plug-in standard error sqrt(sum_i pe_i (1 - pe_i) / (K M^2)).
    pub std_err: f64,
    /// Total samples drawn, K per symbol times M symbols.
    pub samples_total: u64,
    /// Per-symbol correct-decision estimates G_i.
    pub per_symbol_pc: Vec<f64>,
    pub method: Method,
    pub seed: u64,
}

/// Full Monte Carlo SER estimate: fresh draws per symbol, budget from
/// `policy`, mode taken from the code set.
pub fn estimate_ser(
    set: &CodeSet,
    snr: SnrPoint,
    policy: &BudgetPolicy,
    seed: u64,
) -> Result<SerEstimate, McSerError> {
    let m = set.m();
    let km = required_samples(policy, m);
    let k = km / m as u64;
    if k == 0 {
        return Err(McSerError::Sizing { cap: policy.cap, m });
    }
    let mut per_symbol_pc = Vec::with_capacity(m);
    for i in 0..m {
        let qr = QrPair::for_symbol_rank_tolerant(set.matrix(), i)?;
        per_symbol_pc.push(estimate_pc_given_si(&qr, snr, set.mode(), k, seed));
    }
    Ok(assemble(per_symbol_pc, k, seed))
}

fn assemble(per_symbol_pc: Vec<f64>, k: u64, seed: u64) -> SerEstimate {
    let m = per_symbol_pc.len();
    let p_e = 1.0 - per_symbol_pc.iter().sum::<f64>() / m as f64;
    let var: f64 = per_symbol_pc
        .iter()
        .map(|&pc| {
            let pe = 1.0 - pc;
            pe * (1.0 - pe)
        })
        .sum::<f64>()
        / (k as f64 * (m as f64) * (m as f64));
    SerEstimate {
        p_e,
        std_err: var.sqrt(),
        samples_total: k * m as u64,
        per_symbol_pc,
        method: Method::Mc,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{q_func, ser_equicorrelated};
    use crate::codeset::{make_equicorrelated, make_orthogonal, make_random_quasi};

    fn snr(x: f64) -> SnrPoint {
        SnrPoint::new(x).unwrap()
    }

    #[test]
    fn required_samples_paper_values() {
        let p = BudgetPolicy::new(0.01, 0.01, 0.01, u64::MAX / 2).unwrap();
        assert_eq!(required_samples(&p, 1), 100_000_000);
        let p = BudgetPolicy::new(0.01, 0.01, 1e-3, u64::MAX / 2).unwrap();
        assert_eq!(required_samples(&p, 1), 1_000_000_000);
        let p = BudgetPolicy::new(0.05, 0.1, 1e-4, u64::MAX / 2).unwrap();
        assert_eq!(required_samples(&p, 1), 20_000_000);
    }

    #[test]
    fn required_samples_rounds_and_caps() {
        let p = BudgetPolicy::new(0.5, 0.5, 0.5, 1_000).unwrap();
        // raw = 16; round up to multiple of 7 -> 21
        assert_eq!(required_samples(&p, 7), 21);
        let p = BudgetPolicy::new(0.01, 0.01, 1e-6, 1_000).unwrap();
        assert_eq!(required_samples(&p, 8), 1_000usize.div_ceil(8) as u64 * 8);
        assert!(budget_infeasible(&p));
    }

    #[test]
    fn policy_validation() {
        assert!(BudgetPolicy::new(0.0, 0.1, 0.1, 10).is_err());
        assert!(BudgetPolicy::new(0.1, 1.0, 0.1, 10).is_err());
        assert!(BudgetPolicy::new(0.1, 0.1, 0.0, 10).is_err());
        assert!(BudgetPolicy::new(0.1, 0.1, 0.1, 0).is_err());
    }

    #[test]
    fn pc_saturates_at_extreme_snr() {
        let set = make_random_quasi(4, 4, 0.2, 9).unwrap();
        let qr = QrPair::for_symbol(set.matrix(), 0).unwrap();
        let pc = estimate_pc_given_si(&qr, snr(1e4), SignalingMode::QuasiOrthogonal, 20_000, 1);
        assert_eq!(pc, 1.0);
    }

    #[test]
    fn pc_matches_binary_orthogonal_closed_form() {
        let set = make_orthogonal(2, 2).unwrap();
        let qr = QrPair::for_symbol(set.matrix(), 0).unwrap();
        let g = snr(1.0);
        let k = 400_000u64;
        let pc = estimate_pc_given_si(&qr, g, SignalingMode::QuasiOrthogonal, k, 11);
        let want = 1.0 - q_func(1.0);
        let se = (want * (1.0 - want) / k as f64).sqrt();
        assert!((pc - want).abs() < 4.0 * se, "pc = {pc}, want {want} +- {se}");
    }

    #[test]
    fn pc_low_snr_orthogonal_m4_is_quarter() {
        let set = make_orthogonal(4, 4).unwrap();
        let qr = QrPair::for_symbol(set.matrix(), 0).unwrap();
        let k = 200_000u64;
        let pc = estimate_pc_given_si(&qr, snr(1e-9), SignalingMode::QuasiOrthogonal, k, 3);
        let se = (0.25 * 0.75 / k as f64).sqrt();
        assert!((pc - 0.25).abs() < 4.0 * se, "pc = {pc}");
    }

    #[test]
    fn estimate_matches_orthogonal_quadrature() {
        let set = make_orthogonal(16, 16).unwrap();
        let g = snr(6.0);
        let truth = crate::closed_form::ser_orthogonal(16, g);
        let policy = BudgetPolicy::desk_scale(truth).unwrap();
        let est = estimate_ser(&set, g, &policy, 21).unwrap();
        assert!(
            (est.p_e - truth).abs() < 3.0 * est.std_err,
            "mc {} vs quadrature {truth} (3se = {})",
            est.p_e,
            3.0 * est.std_err
        );
    }

    #[test]
    fn estimate_matches_equicorrelated_quadrature() {
        let (m, eta) = (8, 0.3);
        let set = make_equicorrelated(m, eta).unwrap();
        let g = snr(8.0);
        let truth = ser_equicorrelated(m, eta, g).unwrap();
        let policy = BudgetPolicy::desk_scale(truth).unwrap();
        let est = estimate_ser(&set, g, &policy, 5).unwrap();
        assert!((est.p_e - truth).abs() < 3.0 * est.std_err);
    }

    #[test]
    fn estimate_is_deterministic_and_consistent() {
        let set = make_random_quasi(4, 4, 0.25, 17).unwrap();
        let policy = BudgetPolicy::new(0.05, 0.1, 0.05, 2_000_000).unwrap();
        let a = estimate_ser(&set, snr(2.0), &policy, 7).unwrap();
        let b = estimate_ser(&set, snr(2.0), &policy, 7).unwrap();
        assert_eq!(a, b);
        // estimate invariants
        let mean_pc = a.per_symbol_pc.iter().sum::<f64>() / 4.0;
        assert!((a.p_e - (1.0 - mean_pc)).abs() < 1e-15);
        assert_eq!(a.samples_total, required_samples(&policy, 4));
        // a different seed moves the estimate
        let c = estimate_ser(&set, snr(2.0), &policy, 8).unwrap();
        assert_ne!(a.per_symbol_pc, c.per_symbol_pc);
    }

    #[test]
    fn estimate_biortho_invariant_to_column_negation() {
        let g = snr(3.0);
        let set = make_random_quasi(4, 4, 0.3, 23)
            .unwrap()
            .with_mode(SignalingMode::QuasiBiorthogonal);
        let mut flipped_m = set.matrix().clone();
        flipped_m.column_mut(2).neg_mut();
        let flipped = CodeSet::from_matrix(flipped_m, SignalingMode::QuasiBiorthogonal).unwrap();
        let policy = BudgetPolicy::new(0.05, 0.1, 0.02, 4_000_000).unwrap();
        let a = estimate_ser(&set, g, &policy, 31).unwrap();
        let b = estimate_ser(&flipped, g, &policy, 77).unwrap();
        let combined = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
        assert!(
            (a.p_e - b.p_e).abs() < 3.0 * combined,
            "negation moved the estimate: {} vs {}",
            a.p_e,
            b.p_e
        );
    }

    #[test]
    fn batched_predicate_agrees_with_scalar_in_region() {
        let set = make_random_quasi(5, 5, 0.3, 41).unwrap();
        let g = snr(1.5);
        for mode in [SignalingMode::QuasiOrthogonal, SignalingMode::QuasiBiorthogonal] {
            let qr = QrPair::for_symbol(set.matrix(), 2).unwrap();
            let k = 50_000u64;
            let batched = count_region_hits(&qr, g, mode, k, 13);
            // Scalar recount over the identical draw sequence.
            let mut scalar = 0u64;
            let (nblocks, _) = seeding::blocks_of(k);
            for b in 0..nblocks {
                let mut rng = seeding::block_rng(13, qr.index() as u64, b);
                let n = seeding::block_len(k, b);
                for _ in 0..n {
                    let v: Vec<f64> =
                        (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    scalar += qr.in_region(&v, g, mode) as u64;
                }
            }
            assert_eq!(batched, scalar, "mode {mode:?}");
        }
    }

    #[test]
    fn mc_handles_simplex_rank_deficiency() {
        let (m, eta) = (4, -1.0 / 3.0);
        let set = make_equicorrelated(m, eta).unwrap();
        let g = snr(4.0);
        let truth = ser_equicorrelated(m, eta, g).unwrap();
        let policy = BudgetPolicy::desk_scale(truth).unwrap();
        let est = estimate_ser(&set, g, &policy, 3).unwrap();
        assert!(
            (est.p_e - truth).abs() < 3.0 * est.std_err,
            "simplex mc {} vs closed form {truth}",
            est.p_e
        );
    }
}
