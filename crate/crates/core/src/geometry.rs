//! Decision-region geometry for a transmitted symbol: the rotated code
//! matrix, its QR factorization normalized so r_00 = 1, and the membership
//! predicate the Monte Carlo integrator evaluates.
//!
//! With columns reordered so the transmitted code comes first, S_i = Q R puts
//! the correct-decision region into triangular form: in the standardized
//! coordinates v, the ML test against rotated symbol j reads r_j^T vt < vt_0
//! (and additionally -r_j^T vt < vt_0 plus vt_0 > 0 in biorthogonal mode),
//! where vt is v with sqrt(2 Es/N0) added to its first entry. Dividing by
//! r_jj turns these into the nested integral limits `upper_limit` and
//! `lower_limit`; the predicate itself never divides, so it stays valid for
//! rank-deficient sets (simplex) where the trailing r_jj vanishes.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::closed_form::SnrPoint;
use crate::codeset::SignalingMode;

/// Hard lower bound on usable diagonal entries of R; below this the nested
/// integral limits are ill-defined.
pub const DIAG_TOL: f64 = 1e-8;
/// Tolerance for r_00 against its exact value 1 (unit-norm first column).
const R00_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("rotation index {index} out of range for M = {m}")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("{l} rows cannot hold {m} independent columns")]
    Shape { l: usize, m: usize },
    #[error("near-dependent column {column}: r_jj = {r_jj:.3e} (threshold {DIAG_TOL:e})")]
    NearDependence { column: usize, r_jj: f64 },
    #[error("first column is not unit norm: r_00 = {r00}")]
    NotUnitNorm { r00: f64 },
}

/// Columns of `s` rotated so column `i` comes first:
/// [s_i, s_{i+1}, .., s_{M-1}, s_0, .., s_{i-1}].
pub fn rotate_columns(s: &DMatrix<f64>, i: usize) -> Result<DMatrix<f64>, GeometryError> {
    let m = s.ncols();
    if i >= m {
        return Err(GeometryError::IndexOutOfRange { index: i, m });
    }
    let mut out = DMatrix::<f64>::zeros(s.nrows(), m);
    for j in 0..m {
        out.set_column(j, &s.column((i + j) % m));
    }
    Ok(out)
}

/// QR factorization of a rotated code matrix, normalized for SER analysis:
/// all diagonal entries of R non-negative and r_00 = 1, so the first column
/// of Q equals the transmitted code vector and every column of R is unit
/// norm.
#[derive(Debug, Clone)]
pub struct QrPair {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    index: usize,
}

/// Householder QR of `s_i` with post-hoc sign correction. Errors when any
/// r_jj falls below [`DIAG_TOL`].
pub fn qr_nonneg(s_i: &DMatrix<f64>, index: usize) -> Result<QrPair, GeometryError> {
    factorize(s_i, index, true)
}

/// As [`qr_nonneg`] but tolerating rank deficiency: diagonal entries below
/// [`DIAG_TOL`] are clamped to exactly zero instead of rejected. The
/// membership predicate handles the clamped columns; the division-based
/// limit functions must not be called for them.
pub fn qr_nonneg_rank_tolerant(s_i: &DMatrix<f64>, index: usize) -> Result<QrPair, GeometryError> {
    factorize(s_i, index, false)
}

fn factorize(s_i: &DMatrix<f64>, index: usize, strict: bool) -> Result<QrPair, GeometryError> {
    let (l, m) = s_i.shape();
    if m == 0 || l < m {
        return Err(GeometryError::Shape { l, m });
    }
    let qr = s_i.clone().qr();
    let mut q = qr.q();
    let mut r = qr.unpack_r();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            for k in j..m {
                r[(j, k)] = -r[(j, k)];
            }
            for k in 0..l {
                q[(k, j)] = -q[(k, j)];
            }
        }
        if r[(j, j)] < DIAG_TOL {
            if strict {
                return Err(GeometryError::NearDependence { column: j, r_jj: r[(j, j)] });
            }
            r[(j, j)] = 0.0;
        }
    }
    if (r[(0, 0)] - 1.0).abs() > R00_TOL {
        return Err(GeometryError::NotUnitNorm { r00: r[(0, 0)] });
    }
    r[(0, 0)] = 1.0;
    Ok(QrPair { q, r, index })
}

impl QrPair {
    /// Rotate the code matrix for symbol `i` and factorize (strict).
    pub fn for_symbol(s: &DMatrix<f64>, i: usize) -> Result<Self, GeometryError> {
        qr_nonneg(&rotate_columns(s, i)?, i)
    }

    /// Rotate and factorize, tolerating rank deficiency.
    pub fn for_symbol_rank_tolerant(s: &DMatrix<f64>, i: usize) -> Result<Self, GeometryError> {
        qr_nonneg_rank_tolerant(&rotate_columns(s, i)?, i)
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Transmitted-symbol index this factorization belongs to.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn m(&self) -> usize {
        self.r.ncols()
    }

    pub fn l(&self) -> usize {
        self.q.nrows()
    }

    /// Upper integration limit u'_j(v_0, .., v_{j-1}) of the j-th nested
    /// integral:
    /// (1/r_jj) [ (1 - r_0j)(v_0 + sqrt(2 Es/N0)) - sum_{k=1}^{j-1} r_kj v_k ].
    pub fn upper_limit(&self, j: usize, v_prefix: &[f64], snr: SnrPoint) -> f64 {
        assert!(j >= 1 && j < self.m(), "j = {j} out of range");
        assert_eq!(v_prefix.len(), j, "prefix must hold v_0..v_(j-1)");
        let r = &self.r;
        let mut acc = (1.0 - r[(0, j)]) * (v_prefix[0] + snr.mean_offset());
        for (k, &v) in v_prefix.iter().enumerate().skip(1) {
            acc -= r[(k, j)] * v;
        }
        acc / r[(j, j)]
    }

    /// Lower integration limit l'_j, present only in biorthogonal mode:
    /// (1/r_jj) [ -(1 + r_0j)(v_0 + sqrt(2 Es/N0)) - sum_{k=1}^{j-1} r_kj v_k ].
    pub fn lower_limit(&self, j: usize, v_prefix: &[f64], snr: SnrPoint) -> f64 {
        assert!(j >= 1 && j < self.m(), "j = {j} out of range");
        assert_eq!(v_prefix.len(), j, "prefix must hold v_0..v_(j-1)");
        let r = &self.r;
        let mut acc = -(1.0 + r[(0, j)]) * (v_prefix[0] + snr.mean_offset());
        for (k, &v) in v_prefix.iter().enumerate().skip(1) {
            acc -= r[(k, j)] * v;
        }
        acc / r[(j, j)]
    }

    /// Correct-decision region membership for a standardized sample `v`.
    ///
    /// Quasi-orthogonal: v_j < u'_j for all j >= 1 (v_0 unconstrained).
    /// Quasi-biorthogonal: additionally v_j > l'_j and
    /// v_0 > -sqrt(2 Es/N0).
    pub fn in_region(&self, v: &[f64], snr: SnrPoint, mode: SignalingMode) -> bool {
        let m = self.m();
        assert_eq!(v.len(), m);
        let vt0 = v[0] + snr.mean_offset();
        if mode == SignalingMode::QuasiBiorthogonal && vt0 <= 0.0 {
            return false;
        }
        for j in 1..m {
            let col = self.r.column(j);
            let mut z = col[0] * vt0;
            for k in 1..=j {
                z += col[k] * v[k];
            }
            let inside = match mode {
                SignalingMode::QuasiOrthogonal => z < vt0,
                SignalingMode::QuasiBiorthogonal => z < vt0 && -z < vt0,
            };
            if !inside {
                return false;
            }
        }
        true
    }
}

/// A received vector mapped to the standardized coordinates of one QrPair.
#[derive(Debug, Clone)]
pub struct StandardizedSample {
    pub v: Vec<f64>,
}

impl StandardizedSample {
    /// Project a received vector x onto the Q basis and standardize
    /// (Es = 1, N0 = 1/snr): v_0 = (y_0 - 1)/sqrt(N0/2), v_k = y_k/sqrt(N0/2).
    pub fn from_received(x: &DVector<f64>, qr: &QrPair, snr: SnrPoint) -> Self {
        let y = qr.q().transpose() * x;
        let sigma = (0.5 / snr.ratio()).sqrt();
        let mut v: Vec<f64> = y.iter().map(|&yi| yi / sigma).collect();
        v[0] = (y[0] - 1.0) / sigma;
        Self { v }
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::codeset::{gram, make_equicorrelated, make_orthogonal, make_random_quasi};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn snr(x: f64) -> SnrPoint {
        SnrPoint::new(x).unwrap()
    }

    fn two_column_correlated(kappa: f64) -> DMatrix<f64> {
        DMatrix::from_columns(&[
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![kappa, (1.0 - kappa * kappa).sqrt()]),
        ])
    }

    #[test]
    fn rotate_examples() {
        let s = DMatrix::from_fn(3, 3, |r, c| (10 * c + r) as f64);
        let r0 = rotate_columns(&s, 0).unwrap();
        assert_eq!(r0, s);
        let r1 = rotate_columns(&s, 1).unwrap();
        assert_eq!(r1.column(0), s.column(1));
        assert_eq!(r1.column(1), s.column(2));
        assert_eq!(r1.column(2), s.column(0));
        let r2 = rotate_columns(&s, 2).unwrap();
        assert_eq!(r2.column(0), s.column(2));
        assert_eq!(r2.column(1), s.column(0));
        assert!(matches!(
            rotate_columns(&s, 3),
            Err(GeometryError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn qr_of_orthonormal_is_trivial() {
        let set = make_orthogonal(4, 6).unwrap();
        let qr = QrPair::for_symbol(set.matrix(), 0).unwrap();
        assert!((qr.r() - DMatrix::<f64>::identity(4, 4)).abs().max() < 1e-12);
        assert!((qr.q() - set.matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn qr_two_column_hand_computed() {
        let s = two_column_correlated(0.25);
        let qr = qr_nonneg(&s, 0).unwrap();
        let want_r11 = (1.0f64 - 0.0625).sqrt();
        assert!((qr.r()[(0, 0)] - 1.0).abs() == 0.0);
        assert!((qr.r()[(0, 1)] - 0.25).abs() < 1e-14);
        assert!(qr.r()[(1, 0)] == 0.0);
        assert!((qr.r()[(1, 1)] - want_r11).abs() < 1e-14);
    }

    #[test]
    fn qr_invariants_on_random_sets() {
        for seed in 0..6 {
            let set = make_random_quasi(6, 8, 0.3, seed).unwrap();
            for i in 0..set.m() {
                let s_i = rotate_columns(set.matrix(), i).unwrap();
                let qr = qr_nonneg(&s_i, i).unwrap();
                let m = qr.m();
                // Q^T Q = I
                let qtq = qr.q().transpose() * qr.q();
                assert!((qtq - DMatrix::<f64>::identity(m, m)).abs().max() < 1e-10);
                // reconstruction, unit R columns, first Q column = s_i
                assert!((qr.q() * qr.r() - &s_i).abs().max() < 1e-10);
                for j in 0..m {
                    assert!((qr.r().column(j).norm() - 1.0).abs() < 1e-10);
                    assert!(qr.r()[(j, j)] >= 0.0);
                }
                assert!((qr.q().column(0) - s_i.column(0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn qr_simplex_rotated_reconstructs() {
        let set = make_equicorrelated(3, -0.5).unwrap();
        let s_1 = rotate_columns(set.matrix(), 1).unwrap();
        // Strict factorization refuses the rank-2 set...
        assert!(matches!(
            qr_nonneg(&s_1, 1),
            Err(GeometryError::NearDependence { column: 2, .. })
        ));
        // ...the tolerant one reproduces it.
        let qr = qr_nonneg_rank_tolerant(&s_1, 1).unwrap();
        assert!((qr.q() * qr.r() - &s_1).abs().max() < 1e-10);
        for j in 0..3 {
            assert!((qr.r().column(j).norm() - 1.0).abs() < 1e-10);
        }
        assert_eq!(qr.r()[(2, 2)], 0.0);
    }

    #[test]
    fn upper_limit_orthogonal_and_hand_value() {
        let set = make_orthogonal(3, 3).unwrap();
        let qr = QrPair::for_symbol(set.matrix(), 0).unwrap();
        let g = snr(2.0);
        for j in 1..3 {
            let u = qr.upper_limit(j, &vec![0.4; j], g);
            assert!((u - (0.4 + g.mean_offset())).abs() < 1e-12);
        }
        // Correlated pair, j = 1, v_0 = 0, Es/N0 = 1:
        // (0.75 sqrt 2)/sqrt(0.9375).
        let qr = qr_nonneg(&two_column_correlated(0.25), 0).unwrap();
        let u = qr.upper_limit(1, &[0.0], snr(1.0));
        assert!((u - 1.0954451150103322269).abs() < 1e-12);
        // snr -> 0 with v_0 = 0 and R = I drives the limit to 0.
        let set = make_orthogonal(2, 2).unwrap();
        let qr = QrPair::for_symbol(set.matrix(), 0).unwrap();
        assert!(qr.upper_limit(1, &[0.0], snr(1e-30)).abs() < 1e-14);
    }

    #[test]
    fn lower_limit_orthogonal_and_symmetry() {
        let set = make_orthogonal(3, 3).unwrap();
        let qr = QrPair::for_symbol(set.matrix(), 0).unwrap();
        let g = snr(2.0);
        let l = qr.lower_limit(1, &[0.3], g);
        assert!((l - (-0.3 - g.mean_offset())).abs() < 1e-12);
        // With zero prefix and r_0j = 0, l'_j = -u'_j.
        let u = qr.upper_limit(2, &[0.0, 0.0], g);
        let low = qr.lower_limit(2, &[0.0, 0.0], g);
        assert!((low + u).abs() < 1e-12);
        // Correlated pair by hand: -(1.25 sqrt 2)/sqrt(0.9375).
        let qr = qr_nonneg(&two_column_correlated(0.25), 0).unwrap();
        let l = qr.lower_limit(1, &[0.0], snr(1.0));
        let want = -(1.25 * 2f64.sqrt()) / 0.9375f64.sqrt();
        assert!((l - want).abs() < 1e-12);
    }

    #[test]
    fn region_contains_mean_point() {
        let sets = [
            make_random_quasi(4, 4, 0.3, 3).unwrap(),
            make_orthogonal(5, 5).unwrap(),
        ];
        for set in &sets {
            let qr = QrPair::for_symbol(set.matrix(), 0).unwrap();
            let v = vec![0.0; set.m()];
            for mode in [SignalingMode::QuasiOrthogonal, SignalingMode::QuasiBiorthogonal] {
                assert!(qr.in_region(&v, snr(2.0), mode));
            }
        }
    }

    #[test]
    fn region_rejects_upper_violation() {
        let set = make_orthogonal(4, 4).unwrap();
        let qr = QrPair::for_symbol(set.matrix(), 0).unwrap();
        let g = snr(2.0);
        let mut v = vec![0.0; 4];
        v[1] = g.mean_offset() + 0.1;
        assert!(!qr.in_region(&v, g, SignalingMode::QuasiOrthogonal));
    }

    /// Independent half-space oracle: evaluate (r_0 -+ r_j)^T y > 0 on the
    /// unstandardized y recovered from v.
    fn oracle_in_region(qr: &QrPair, v: &[f64], g: SnrPoint, mode: SignalingMode) -> bool {
        let m = qr.m();
        let sigma = (0.5 / g.ratio()).sqrt();
        let mut y = DVector::<f64>::zeros(m);
        y[0] = sigma * v[0] + 1.0;
        for k in 1..m {
            y[k] = sigma * v[k];
        }
        let r0 = qr.r().column(0);
        for j in 1..m {
            let rj = qr.r().column(j);
            if (r0 - rj).dot(&y) <= 0.0 {
                return false;
            }
            if mode == SignalingMode::QuasiBiorthogonal && (r0 + rj).dot(&y) <= 0.0 {
                return false;
            }
        }
        if mode == SignalingMode::QuasiBiorthogonal && y[0] <= 0.0 {
            return false;
        }
        true
    }

    #[test]
    fn region_matches_half_space_oracle_m2() {
        let qr = qr_nonneg(&two_column_correlated(0.25), 0).unwrap();
        let g = snr(1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut inside = 0usize;
        for _ in 0..100_000 {
            let v: Vec<f64> = (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            for mode in [SignalingMode::QuasiOrthogonal, SignalingMode::QuasiBiorthogonal] {
                let got = qr.in_region(&v, g, mode);
                assert_eq!(got, oracle_in_region(&qr, &v, g, mode));
                inside += got as usize;
            }
        }
        assert!(inside > 0);
    }

    #[test]
    fn region_matches_half_space_oracle_random_sets() {
        let g = snr(1.0);
        for seed in 0..8 {
            let set = make_random_quasi(5, 5, 0.35, 100 + seed).unwrap();
            let i = (seed % 5) as usize;
            let qr = QrPair::for_symbol(set.matrix(), i).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20_000 {
                let v: Vec<f64> =
                    (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                for mode in [SignalingMode::QuasiOrthogonal, SignalingMode::QuasiBiorthogonal] {
                    assert_eq!(
                        qr.in_region(&v, g, mode),
                        oracle_in_region(&qr, &v, g, mode),
                        "seed {seed} mode {mode:?}"
                    );
                }
            }
        }
        // Gram of these sets is what the oracle trusts; sanity-check one.
        let set = make_random_quasi(5, 5, 0.35, 100).unwrap();
        assert!(gram(&set).max_abs_off_diagonal() <= 0.35);
    }

    #[test]
    fn standardized_sample_recovers_mean() {
        let set = make_random_quasi(3, 4, 0.2, 5).unwrap();
        let qr = QrPair::for_symbol(set.matrix(), 0).unwrap();
        let g = snr(4.0);
        // Noiseless receive of s_0: y = e_0, so v = 0.
        let x = set.column(0);
        let v = StandardizedSample::from_received(&x, &qr, g);
        for (k, &vk) in v.v.iter().enumerate() {
            assert!(vk.abs() < 1e-8, "v[{k}] = {vk}");
        }
    }
}
