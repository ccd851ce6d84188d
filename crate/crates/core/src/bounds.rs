//! Pairwise-error results and union upper bounds.
//!
//! For two unit-norm codes the error probability has an exact two-sided
//! (biorthogonal) or one-sided (orthogonal) form in terms of the projections
//! of the transmitted code onto the normalized difference and sum vectors.
//! Summing the pairwise terms over all code pairs gives upper bounds that
//! tighten as the SNR grows, and rearranging the biorthogonal bound as a
//! function of the cross-correlations kappa_{i,j} exposes how the error
//! probability responds to small departures from orthogonality.

use nalgebra::DVector;
use thiserror::Error;

use crate::closed_form::SnrPoint;
use crate::codeset::{CodeSet, SignalingMode};
use crate::numeric::{f_std, phi, q_func};

/// Pairs with |kappa| at or above 1 - COLLINEAR_TOL have no usable pair
/// geometry.
pub const COLLINEAR_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("code vectors are collinear: |kappa| = {kappa_abs}")]
    Collinear { kappa_abs: f64 },
    #[error("vector is not unit norm: |s| = {norm}")]
    NotUnitNorm { norm: f64 },
    #[error("kappa vector has length {found}, expected M(M-1)/2 = {expected}")]
    KappaLength { found: usize, expected: usize },
    #[error("kappa entry {value} outside (-1, 1)")]
    KappaRange { value: f64 },
    #[error("code set is in {found} mode, but this bound applies to {expected} signaling")]
    ModeMismatch { found: SignalingMode, expected: SignalingMode },
}

/// Geometry of one code pair: projections of the transmitted code onto the
/// normalized difference/sum directions, the constellation rotation angle,
/// and the pair correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    /// (s_i - s_j)^T s_j / |s_i - s_j| = -sqrt((1 - kappa)/2).
    pub rho0: f64,
    /// (s_i + s_j)^T s_j / |s_i + s_j| = sqrt((1 + kappa)/2).
    pub rho1: f64,
    /// Angle between s_i and the bisector of the decision boundaries, in
    /// degrees; 0 for an orthogonal pair.
    pub theta_deg: f64,
    /// Inner product s_i^T s_j.
    pub kappa: f64,
}

/// Projections and rotation angle of the pair (s_i, s_j), computed from the
/// vectors themselves (not from kappa).
pub fn pair_geometry(s_i: &DVector<f64>, s_j: &DVector<f64>) -> Result<PairGeometry, BoundsError> {
    for v in [s_i, s_j] {
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(BoundsError::NotUnitNorm { norm });
        }
    }
    let kappa = s_i.dot(s_j);
    if kappa.abs() >= 1.0 - COLLINEAR_TOL {
        return Err(BoundsError::Collinear { kappa_abs: kappa.abs() });
    }
    let diff = s_i - s_j;
    let sum = s_i + s_j;
    let d0 = &diff / diff.norm();
    let d1 = &sum / sum.norm();
    let rho0 = d0.dot(s_j);
    let rho1 = d1.dot(s_j);
    let cos_theta = ((&d0 + &d1).dot(s_i) / std::f64::consts::SQRT_2).clamp(-1.0, 1.0);
    Ok(PairGeometry {
        rho0,
        rho1,
        theta_deg: cos_theta.acos().to_degrees(),
        kappa,
    })
}

/// One biorthogonal pair term: 1 - prod_k [1 - Q(sqrt(2 Es rho_k^2 / N0))].
fn pair_term_biortho(pg: &PairGeometry, snr: SnrPoint) -> f64 {
    let g = snr.ratio();
    let q0 = q_func((2.0 * g * pg.rho0 * pg.rho0).sqrt());
    let q1 = q_func((2.0 * g * pg.rho1 * pg.rho1).sqrt());
    1.0 - (1.0 - q0) * (1.0 - q1)
}

/// Exact symbol error probability of the 4-symbol set {+/- s_0, +/- s_1}.
pub fn exact_pe_m2_biortho(
    s_0: &DVector<f64>,
    s_1: &DVector<f64>,
    snr: SnrPoint,
) -> Result<f64, BoundsError> {
    Ok(pair_term_biortho(&pair_geometry(s_0, s_1)?, snr))
}

/// Exact symbol error probability of the 2-symbol set {s_0, s_1}: the
/// decision boundary is the bisector, so P_e = Q(sqrt(2 Es rho_0^2 / N0)).
pub fn exact_pe_m2_ortho(
    s_0: &DVector<f64>,
    s_1: &DVector<f64>,
    snr: SnrPoint,
) -> Result<f64, BoundsError> {
    let pg = pair_geometry(s_0, s_1)?;
    Ok(q_func((2.0 * snr.ratio() * pg.rho0 * pg.rho0).sqrt()))
}

/// A union bound, reported raw and clamped to 1. The raw value legitimately
/// exceeds 1 at low SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub raw: f64,
    pub clamped: f64,
}

impl BoundValue {
    fn new(raw: f64) -> Self {
        Self { raw, clamped: raw.min(1.0) }
    }
}

/// Union upper bound for quasi-biorthogonal signaling:
/// (1/M) sum_i sum_{j != i} of the exact pair error terms.
pub fn ub_quasi_biortho(set: &CodeSet, snr: SnrPoint) -> Result<BoundValue, BoundsError> {
    if set.mode() != SignalingMode::QuasiBiorthogonal {
        return Err(BoundsError::ModeMismatch {
            found: set.mode(),
            expected: SignalingMode::QuasiBiorthogonal,
        });
    }
    sum_pairs(set, snr, pair_term_biortho)
}

/// Union upper bound for quasi-orthogonal signaling:
/// (1/M) sum_i sum_{j != i} Q(sqrt(2 Es rho_{i,j,0}^2 / N0)).
pub fn ub_quasi_ortho(set: &CodeSet, snr: SnrPoint) -> Result<BoundValue, BoundsError> {
    if set.mode() != SignalingMode::QuasiOrthogonal {
        return Err(BoundsError::ModeMismatch {
            found: set.mode(),
            expected: SignalingMode::QuasiOrthogonal,
        });
    }
    sum_pairs(set, snr, |pg, g| q_func((2.0 * g.ratio() * pg.rho0 * pg.rho0).sqrt()))
}

fn sum_pairs(
    set: &CodeSet,
    snr: SnrPoint,
    term: impl Fn(&PairGeometry, SnrPoint) -> f64,
) -> Result<BoundValue, BoundsError> {
    let m = set.m();
    let mut acc = 0.0;
    for i in 0..m {
        let s_i = set.column(i);
        for j in (i + 1)..m {
            let s_j = set.column(j);
            // rho_{i,j,k}^2 is symmetric in (i, j): count each pair twice.
            acc += 2.0 * term(&pair_geometry(&s_i, &s_j)?, snr);
        }
    }
    Ok(BoundValue::new(acc / m as f64))
}

/// The quasi-biorthogonal union bound as an explicit function of the
/// cross-correlation vector kappa = [k01, k02, .., k0(M-1), k12, ..]:
///
/// P_ub(kappa) = M - 1
///   - (2/M) sum_{i<j} Phi(sqrt(g (1 - k_ij))) Phi(sqrt(g (1 + k_ij))),
///
/// with g = Es/N0. Each term 1 - Phi(a) Phi(b) is accumulated in the
/// equivalent tail form Q(a) + Q(b) - Q(a) Q(b), which stays accurate when
/// the Phi product approaches 1 (high SNR) and avoids the large cancelling
/// sum against M - 1 (low SNR). Agrees with [`ub_quasi_biortho`] of any
/// code set realizing those correlations.
pub fn pub_of_kappa(kappa: &[f64], m: usize, snr: SnrPoint) -> Result<f64, BoundsError> {
    let expected = m * (m - 1) / 2;
    if kappa.len() != expected {
        return Err(BoundsError::KappaLength { found: kappa.len(), expected });
    }
    let g = snr.ratio();
    let mut acc = 0.0;
    for &k in kappa {
        if !(-1.0..1.0).contains(&k) || k == -1.0 {
            return Err(BoundsError::KappaRange { value: k });
        }
        let qa = q_func((g * (1.0 - k)).sqrt());
        let qb = q_func((g * (1.0 + k)).sqrt());
        acc += qa + qb - qa * qb;
    }
    Ok(2.0 / m as f64 * acc)
}

/// The bound at the orthogonal point: P_ub(0) = (M-1) Q(sqrt(g)) [2 - Q(sqrt(g))].
pub fn pub_at_zero(m: usize, snr: SnrPoint) -> f64 {
    let q = q_func(snr.ratio().sqrt());
    (m as f64 - 1.0) * q * (2.0 - q)
}

/// Second-order sensitivity of the union bound to correlation.
///
/// Around kappa = 0 the bound is stationary and isotropic:
/// P_ub(kappa) = P_ub(0) + alpha kappa^T kappa + O(kappa^4), so `alpha` is
/// the quadratic coefficient and the second derivative along any single
/// kappa coordinate is `curvature` = 2 alpha, with the closed form
///
/// curvature = (1/M) sqrt(g) [ sqrt(g) f(sqrt(g))^2
///             + f(sqrt(g)) Phi(sqrt(g)) (g + 1) ].
///
/// `ratio` = curvature / P_ub(0) is the sensitivity ratio whose moderate-
/// to-high-SNR approximation is `ratio_approx` = g^2 / (2 M^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorSensitivity {
    pub p_ub_at_zero: f64,
    /// Coefficient of kappa^T kappa in the second-order expansion.
    pub alpha: f64,
    /// Per-coordinate second derivative of P_ub at kappa = 0 (= 2 alpha).
    pub curvature: f64,
    /// curvature / p_ub_at_zero.
    pub ratio: f64,
    /// (Es/N0)^2 / (2 M^2).
    pub ratio_approx: f64,
    /// P_ub(0) + alpha kappa^T kappa for the supplied kappa.
    pub second_order_prediction: f64,
}

/// Evaluate the sensitivity quantities at kappa = 0 and the second-order
/// prediction for the supplied kappa vector.
pub fn taylor_sensitivity(
    m: usize,
    snr: SnrPoint,
    kappa: &[f64],
) -> Result<TaylorSensitivity, BoundsError> {
    let expected = m * (m - 1) / 2;
    if kappa.len() != expected {
        return Err(BoundsError::KappaLength { found: kappa.len(), expected });
    }
    let g = snr.ratio();
    let root = g.sqrt();
    let f = f_std(root);
    let curvature = (root / m as f64) * (root * f * f + f * phi(root) * (g + 1.0));
    let alpha = 0.5 * curvature;
    let p0 = pub_at_zero(m, snr);
    let ktk: f64 = kappa.iter().map(|k| k * k).sum();
    Ok(TaylorSensitivity {
        p_ub_at_zero: p0,
        alpha,
        curvature,
        ratio: curvature / p0,
        ratio_approx: g * g / (2.0 * (m * m) as f64),
        second_order_prediction: p0 + alpha * ktk,
    })
}
