//! Quadrature-based SER formulas for the orthogonal, biorthogonal, and
//! equi-correlated code sets.
//!
//! These are the special cases with one-dimensional integral forms; they
//! serve both as fast evaluators and as reference oracles for the Monte
//! Carlo machinery on general code sets.

use thiserror::Error;

pub use crate::numeric::{f_std, phi, q_func};
use crate::numeric::integrate;

/// Absolute tolerance requested from the adaptive quadrature.
const QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ClosedFormError {
    #[error("Es/N0 must be finite and positive, got {0}")]
    InvalidSnr(f64),
    #[error("correlation {eta} outside [-1/(M-1), 1) = [{min}, 1) for M = {m}")]
    InvalidCorrelation { eta: f64, m: usize, min: f64 },
}

/// A single signal-to-noise operating point, stored as the linear energy
/// ratio Es/N0. Only the ratio ever enters a result, so absolute Es and N0
/// are never represented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint(f64);

impl SnrPoint {
    pub fn new(es_over_n0: f64) -> Result<Self, ClosedFormError> {
        if !es_over_n0.is_finite() || es_over_n0 <= 0.0 {
            return Err(ClosedFormError::InvalidSnr(es_over_n0));
        }
        Ok(Self(es_over_n0))
    }

    /// Construct from a value in dB.
    pub fn from_db(db: f64) -> Result<Self, ClosedFormError> {
        Self::new(10f64.powf(db / 10.0))
    }

    /// Linear Es/N0.
    #[inline]
    pub fn ratio(self) -> f64 {
        self.0
    }

    /// Es/N0 in dB.
    pub fn db(self) -> f64 {
        10.0 * self.0.log10()
    }

    /// sqrt(2 Es/N0), the mean offset of the standardized outer variable.
    #[inline]
    pub fn mean_offset(self) -> f64 {
        (2.0 * self.0).sqrt()
    }
}

/// Symbol error probability of M orthogonal codes under ML detection.
///
/// Evaluates 1 - E[Phi(V + sqrt(2 Es/N0))^(M-1)] as a single integral of the
/// complementary integrand, so no precision is lost when the result is tiny.
pub fn ser_orthogonal(m: usize, snr: SnrPoint) -> f64 {
    assert!(m >= 2, "orthogonal signaling needs M >= 2, got {m}");
    let s = snr.mean_offset();
    let pow = (m - 1) as f64;
    // 1 - Phi(t)^(M-1) = -expm1((M-1) ln(1 - Q(t))), stable for Q near 0.
    let integrand = move |v: f64| f_std(v) * -(pow * (-q_func(v + s)).ln_1p()).exp_m1();
    integrate(integrand, -10.0, 10.0 + s, QUAD_TOL)
}

/// Symbol error probability of the biorthogonal set built from M orthogonal
/// codes and their negatives (2M symbols). `m = 1` is antipodal signaling.
pub fn ser_biorthogonal(m: usize, snr: SnrPoint) -> f64 {
    assert!(m >= 1, "biorthogonal signaling needs M >= 1");
    let s = snr.mean_offset();
    if m == 1 {
        return q_func(s);
    }
    let pow = (m - 1) as f64;
    // Bracket term Phi(v+s) - Phi(-v-s) = 1 - 2Q(v+s) on v >= -s.
    let integrand = move |v: f64| {
        f_std(v) * -(pow * (-2.0 * q_func(v + s)).ln_1p()).exp_m1()
    };
    let lo = (-s).max(-40.0);
    q_func(s) + integrate(integrand, lo, 10.0 + s, QUAD_TOL)
}

/// Symbol error probability of M equi-correlated codes (common pairwise
/// correlation `eta`), which reduces to the orthogonal case at the energy
/// ratio scaled by (1 - eta).
pub fn ser_equicorrelated(m: usize, eta: f64, snr: SnrPoint) -> Result<f64, ClosedFormError> {
    assert!(m >= 2, "equi-correlated signaling needs M >= 2, got {m}");
    let min = -1.0 / (m as f64 - 1.0);
    if !(min..1.0).contains(&eta) {
        return Err(ClosedFormError::InvalidCorrelation { eta, m, min });
    }
    let scaled = SnrPoint::new(snr.ratio() * (1.0 - eta))?;
    Ok(ser_orthogonal(m, scaled))
}
