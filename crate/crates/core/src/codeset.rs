//! Code-set construction, validation, and persistence.
//!
//! A code set is an L x M matrix of unit-norm columns; in quasi-biorthogonal
//! mode the stored M columns implicitly stand for the 2M symbols {+/- s_i}.
//! Generators are pure functions of their arguments (including the seed), so
//! every set is reproducible bit-for-bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unit-norm tolerance for columns.
pub const NORM_TOL: f64 = 1e-10;
/// Linear-independence threshold on singular values.
pub const RANK_TOL: f64 = 1e-8;
/// Eigenvalues of a correlation matrix above this are accepted; anything in
/// [-EIG_TOL, 0) is clamped to zero before taking square roots.
pub const EIG_TOL: f64 = 1e-10;
/// Top eigenvalue 1 + (M-1) eta at or below this marks the simplex point,
/// where the set legitimately spans only M-1 dimensions.
const SIMPLEX_EIG_TOL: f64 = 1e-12;

const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum CodeSetError {
    #[error("M = {m} must satisfy 1 <= M <= L = {l}")]
    Dimension { m: usize, l: usize },
    #[error(
        "correlation {eta} outside [-1/(M-1), 1) for M = {m}: W would have a negative eigenvalue"
    )]
    InvalidCorrelation { eta: f64, m: usize },
    #[error("no positive semidefinite correlation matrix found within {attempts} draws")]
    GenerationFailure { attempts: u64 },
    #[error("column {index} has norm {norm}, expected 1 within {NORM_TOL:e}")]
    ColumnNorm { index: usize, norm: f64 },
    #[error(
        "columns nearly dependent: singular value {sigma:.3e} at rank {required_rank} \
         (threshold {RANK_TOL:e})"
    )]
    RankDeficient { sigma: f64, required_rank: usize },
    #[error("invalid correlation matrix: {0}")]
    InvalidGram(String),
    #[error("unsupported code-set schema version {0}")]
    SchemaVersion(u64),
    #[error("malformed code-set file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which symbol alphabet the stored columns represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalingMode {
    /// M symbols, one per column.
    QuasiOrthogonal,
    /// 2M symbols: every column and its negative.
    QuasiBiorthogonal,
}

impl std::fmt::Display for SignalingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SignalingMode::QuasiOrthogonal => f.write_str("quasi_orthogonal"),
            SignalingMode::QuasiBiorthogonal => f.write_str("quasi_biorthogonal"),
        }
    }
}

/// How a code set came to be: generator name, seed, and numeric parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub name: String,
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl Provenance {
    fn new(name: &str, seed: Option<u64>) -> Self {
        Self { name: name.to_string(), seed, params: BTreeMap::new() }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

/// An immutable set of M unit-norm code vectors of length L.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSet {
    s: DMatrix<f64>,
    mode: SignalingMode,
    provenance: Provenance,
}

impl CodeSet {
    /// Validate and wrap a raw code matrix. Columns must be unit norm and
    /// linearly independent.
    pub fn from_matrix(s: DMatrix<f64>, mode: SignalingMode) -> Result<Self, CodeSetError> {
        Self::from_matrix_with_rank(s, mode, Provenance::new("external", None), None)
    }

    fn from_matrix_with_rank(
        s: DMatrix<f64>,
        mode: SignalingMode,
        provenance: Provenance,
        min_rank: Option<usize>,
    ) -> Result<Self, CodeSetError> {
        let (l, m) = s.shape();
        if m == 0 || m > l {
            return Err(CodeSetError::Dimension { m, l });
        }
        for j in 0..m {
            let norm = s.column(j).norm();
            if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
                return Err(CodeSetError::ColumnNorm { index: j, norm });
            }
        }
        let required_rank = min_rank.unwrap_or(m).min(m);
        let mut singular = s.clone().svd(false, false).singular_values;
        singular.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
        let sigma = singular[required_rank - 1];
        if sigma <= RANK_TOL {
            return Err(CodeSetError::RankDeficient { sigma, required_rank });
        }
        Ok(Self { s, mode, provenance })
    }

    /// Code length L.
    pub fn l(&self) -> usize {
        self.s.nrows()
    }

    /// Number of stored code vectors M.
    pub fn m(&self) -> usize {
        self.s.ncols()
    }

    /// Size of the symbol alphabet: M, or 2M in biorthogonal mode.
    pub fn num_symbols(&self) -> usize {
        match self.mode {
            SignalingMode::QuasiOrthogonal => self.m(),
            SignalingMode::QuasiBiorthogonal => 2 * self.m(),
        }
    }

    pub fn mode(&self) -> SignalingMode {
        self.mode
    }

    /// Same columns, tagged with a different signaling mode.
    pub fn with_mode(mut self, mode: SignalingMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.s.column(j).into_owned()
    }
}

/// Symmetric M x M Gram matrix of cross-correlations with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    w: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Validate a candidate correlation matrix: exactly symmetric, unit
    /// diagonal, eigenvalues >= -EIG_TOL.
    pub fn from_matrix(w: DMatrix<f64>) -> Result<Self, CodeSetError> {
        if !w.is_square() {
            return Err(CodeSetError::InvalidGram(format!(
                "not square: {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        let m = w.nrows();
        for i in 0..m {
            if w[(i, i)] != 1.0 {
                return Err(CodeSetError::InvalidGram(format!(
                    "diagonal entry ({i},{i}) = {} != 1",
                    w[(i, i)]
                )));
            }
            for j in (i + 1)..m {
                if w[(i, j)] != w[(j, i)] {
                    return Err(CodeSetError::InvalidGram(format!(
                        "asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        let min = min_symmetric_eigenvalue(&w);
        if min < -EIG_TOL {
            return Err(CodeSetError::InvalidGram(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { w })
    }

    pub fn m(&self) -> usize {
        self.w.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Cross-correlation kappa_{i,j}.
    pub fn kappa(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    /// Upper-triangular entries flattened row-major:
    /// [k01, k02, .., k0(M-1), k12, ..].
    pub fn kappa_vec(&self) -> Vec<f64> {
        let m = self.m();
        let mut out = Vec::with_capacity(m * (m - 1) / 2);
        for i in 0..m {
            for j in (i + 1)..m {
                out.push(self.w[(i, j)]);
            }
        }
        out
    }

    pub fn max_abs_off_diagonal(&self) -> f64 {
        self.kappa_vec().iter().fold(0.0, |a, k| a.max(k.abs()))
    }

    pub fn mean_abs_off_diagonal(&self) -> f64 {
        let v = self.kappa_vec();
        if v.is_empty() {
            return 0.0;
        }
        v.iter().map(|k| k.abs()).sum::<f64>() / v.len() as f64
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_symmetric_eigenvalue(&self.w)
    }
}

fn min_symmetric_eigenvalue(w: &DMatrix<f64>) -> f64 {
    let eig = w.clone().symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Gram matrix S^T S of a code set, symmetrized exactly and with the
/// diagonal clamped to 1.
pub fn gram(set: &CodeSet) -> CorrelationMatrix {
    let m = set.m();
    let raw = set.matrix().transpose() * set.matrix();
    let mut w = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        w[(i, i)] = 1.0; // column norms are 1 within NORM_TOL by invariant
        for j in (i + 1)..m {
            w[(i, j)] = raw[(i, j)];
            w[(j, i)] = raw[(i, j)];
        }
    }
    CorrelationMatrix { w }
}

/// First M standard basis vectors of length L: an orthonormal code set.
pub fn make_orthogonal(m: usize, l: usize) -> Result<CodeSet, CodeSetError> {
    if m == 0 || m > l {
        return Err(CodeSetError::Dimension { m, l });
    }
    let mut s = DMatrix::<f64>::zeros(l, m);
    for j in 0..m {
        s[(j, j)] = 1.0;
    }
    CodeSet::from_matrix_with_rank(s, SignalingMode::QuasiOrthogonal, Provenance::new("orthogonal", None), None)
}

/// Equi-correlated code set: every pair of columns has inner product `eta`.
///
/// Built from the closed-form square root of W = eta 11^T + (1 - eta) I,
/// which is the constant-diagonal matrix with entries d (diagonal) and c
/// (off-diagonal). At the simplex point eta = -1/(M-1) the top eigenvalue of
/// W vanishes and the set spans an (M-1)-dimensional subspace.
pub fn make_equicorrelated(m: usize, eta: f64) -> Result<CodeSet, CodeSetError> {
    if m < 2 {
        return Err(CodeSetError::Dimension { m, l: m });
    }
    let min = -1.0 / (m as f64 - 1.0);
    if !eta.is_finite() || eta < min || eta >= 1.0 {
        return Err(CodeSetError::InvalidCorrelation { eta, m });
    }
    let lambda_top = 1.0 + (m as f64 - 1.0) * eta;
    let c = (lambda_top.max(0.0).sqrt() - (1.0 - eta).sqrt()) / m as f64;
    let d = (1.0 - eta).sqrt() + c;
    let mut s = DMatrix::<f64>::from_element(m, m, c);
    for j in 0..m {
        s[(j, j)] = d;
    }
    let min_rank = if lambda_top <= SIMPLEX_EIG_TOL { m - 1 } else { m };
    CodeSet::from_matrix_with_rank(
        s,
        SignalingMode::QuasiOrthogonal,
        Provenance::new("equicorrelated", None).with("eta", eta),
        Some(min_rank),
    )
}

/// Default retry budget for the PSD rejection sampler.
pub const DEFAULT_PSD_RETRY_CAP: u64 = 10_000;

/// Random quasi-orthogonal code set with off-diagonal correlations drawn
/// uniformly from [-rho_max, rho_max], rejection-sampled until the
/// correlation matrix is positive semidefinite, then realized through the
/// symmetric square root S = V Lambda^(1/2) V^T embedded into L rows.
pub fn make_random_quasi(
    m: usize,
    l: usize,
    rho_max: f64,
    seed: u64,
) -> Result<CodeSet, CodeSetError> {
    make_random_quasi_with_cap(m, l, rho_max, seed, DEFAULT_PSD_RETRY_CAP)
}

/// As [`make_random_quasi`] with an explicit retry cap.
pub fn make_random_quasi_with_cap(
    m: usize,
    l: usize,
    rho_max: f64,
    seed: u64,
    retry_cap: u64,
) -> Result<CodeSet, CodeSetError> {
    if m == 0 || m > l {
        return Err(CodeSetError::Dimension { m, l });
    }
    if !(0.0..1.0).contains(&rho_max) {
        return Err(CodeSetError::InvalidCorrelation { eta: rho_max, m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..retry_cap {
        let mut w = DMatrix::<f64>::identity(m, m);
        for i in 0..m {
            for j in (i + 1)..m {
                let k = if rho_max > 0.0 { rng.gen_range(-rho_max..rho_max) } else { 0.0 };
                w[(i, j)] = k;
                w[(j, i)] = k;
            }
        }
        let eig = w.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&lam| lam < -EIG_TOL) {
            continue;
        }
        let sqrt_vals =
            DVector::from_iterator(m, eig.eigenvalues.iter().map(|&lam| lam.max(0.0).sqrt()));
        let sm = &eig.eigenvectors
            * DMatrix::from_diagonal(&sqrt_vals)
            * eig.eigenvectors.transpose();
        let mut s = DMatrix::<f64>::zeros(l, m);
        s.view_mut((0, 0), (m, m)).copy_from(&sm);
        let provenance =
            Provenance::new("random_quasi", Some(seed)).with("rho_max", rho_max);
        match CodeSet::from_matrix_with_rank(s, SignalingMode::QuasiOrthogonal, provenance, None)
        {
            Ok(set) => return Ok(set),
            // A PSD-accepted draw can still be numerically rank deficient;
            // treat it as one more rejection.
            Err(_) => continue,
        }
    }
    Err(CodeSetError::GenerationFailure { attempts: retry_cap })
}

/// Circular-shift code set with chip values +/- 1/sqrt(L): M = L and column
/// j is the j-step circular shift of s_0. The base pattern s_0 is found by a
/// random-restart greedy bit-flip search minimizing, lexicographically, the
/// maximum and then the mean absolute off-peak periodic autocorrelation.
pub fn make_circular_shift_pm1(
    l: usize,
    n_restarts: usize,
    seed: u64,
) -> Result<CodeSet, CodeSetError> {
    if l < 2 {
        return Err(CodeSetError::Dimension { m: l, l });
    }
    if n_restarts == 0 {
        return Err(CodeSetError::Malformed("n_restarts must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_bits: Option<Vec<i64>> = None;
    let mut best_obj = (i64::MAX, i64::MAX);

    let mut corr = vec![0i64; l];
    let mut cand = vec![0i64; l];
    for _ in 0..n_restarts {
        let mut bits: Vec<i64> =
            (0..l).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
        periodic_autocorr(&bits, &mut corr);
        let mut obj = corr_objective(&corr);
        loop {
            let mut improved = false;
            for t in 0..l {
                for (j, c) in cand.iter_mut().enumerate().skip(1) {
                    *c = corr[j] - 2 * bits[t] * (bits[(t + j) % l] + bits[(t + l - j) % l]);
                }
                let cand_obj = corr_objective(&cand);
                if cand_obj < obj {
                    bits[t] = -bits[t];
                    corr[1..].copy_from_slice(&cand[1..]);
                    obj = cand_obj;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        if obj < best_obj {
            best_obj = obj;
            best_bits = Some(bits);
        }
    }

    let bits = best_bits.expect("n_restarts >= 1");
    let scale = 1.0 / (l as f64).sqrt();
    let mut s = DMatrix::<f64>::zeros(l, l);
    for j in 0..l {
        for t in 0..l {
            s[(t, j)] = bits[(t + l - j) % l] as f64 * scale;
        }
    }
    let provenance = Provenance::new("circular_shift_pm1", Some(seed))
        .with("n_restarts", n_restarts as f64);
    CodeSet::from_matrix_with_rank(s, SignalingMode::QuasiBiorthogonal, provenance, None)
}

/// Off-peak periodic autocorrelation c[j] = sum_t b_t b_{t+j}, j = 1..L-1.
fn periodic_autocorr(bits: &[i64], out: &mut [i64]) {
    let l = bits.len();
    out[0] = l as i64;
    for j in 1..l {
        out[j] = (0..l).map(|t| bits[t] * bits[(t + j) % l]).sum();
    }
}

fn corr_objective(corr: &[i64]) -> (i64, i64) {
    let mut max = 0i64;
    let mut sum = 0i64;
    for &c in &corr[1..] {
        max = max.max(c.abs());
        sum += c.abs();
    }
    (max, sum)
}

// --- persistence ----------------------------------------------------------

#[derive(Deserialize)]
struct CodeSetFile {
    schema_version: u64,
    mode: SignalingMode,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "M")]
    m: usize,
    generator: Provenance,
    columns: Vec<Vec<f64>>,
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serialize a code set to the self-describing text format. Floats carry 17
/// significant digits, enough for a bit-exact round trip.
pub fn to_string(set: &CodeSet) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"schema_version\": {SCHEMA_VERSION},");
    let _ = writeln!(out, "  \"mode\": \"{}\",", set.mode());
    let _ = writeln!(out, "  \"L\": {},", set.l());
    let _ = writeln!(out, "  \"M\": {},", set.m());
    let p = set.provenance();
    let seed = match p.seed {
        Some(s) => s.to_string(),
        None => "null".to_string(),
    };
    let params: Vec<String> = p
        .params
        .iter()
        .map(|(k, v)| format!("{}: {}", serde_json::to_string(k).unwrap(), fmt_float(*v)))
        .collect();
    let _ = writeln!(
        out,
        "  \"generator\": {{ \"name\": {}, \"seed\": {}, \"params\": {{ {} }} }},",
        serde_json::to_string(&p.name).unwrap(),
        seed,
        params.join(", ")
    );
    out.push_str("  \"columns\": [\n");
    for j in 0..set.m() {
        let entries: Vec<String> = set.matrix().column(j).iter().map(|&x| fmt_float(x)).collect();
        let _ = write!(out, "    [{}]", entries.join(", "));
        out.push_str(if j + 1 < set.m() { ",\n" } else { "\n" });
    }
    out.push_str("  ]\n}\n");
    out
}

/// Write a code set to `path`.
pub fn save(set: &CodeSet, path: impl AsRef<Path>) -> Result<(), CodeSetError> {
    std::fs::write(path, to_string(set))?;
    Ok(())
}

/// Parse a code set from its text form, re-validating every invariant.
pub fn from_str(text: &str) -> Result<CodeSet, CodeSetError> {
    let file: CodeSetFile =
        serde_json::from_str(text).map_err(|e| CodeSetError::Malformed(e.to_string()))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CodeSetError::SchemaVersion(file.schema_version));
    }
    if file.columns.len() != file.m {
        return Err(CodeSetError::Malformed(format!(
            "expected {} columns, found {}",
            file.m,
            file.columns.len()
        )));
    }
    for (j, col) in file.columns.iter().enumerate() {
        if col.len() != file.l {
            return Err(CodeSetError::Malformed(format!(
                "column {j} has {} entries, expected {}",
                col.len(),
                file.l
            )));
        }
    }
    let s = DMatrix::from_fn(file.l, file.m, |i, j| file.columns[j][i]);
    // The simplex point is the one legitimate rank-(M-1) set; recognize it
    // from the recorded generator so the round trip validates.
    let min_rank = simplex_rank(&file.generator, file.m);
    CodeSet::from_matrix_with_rank(s, file.mode, file.generator, min_rank)
}

fn simplex_rank(p: &Provenance, m: usize) -> Option<usize> {
    if p.name != "equicorrelated" || m < 2 {
        return None;
    }
    let eta = *p.params.get("eta")?;
    let lambda_top = 1.0 + (m as f64 - 1.0) * eta;
    (lambda_top <= SIMPLEX_EIG_TOL).then(|| m - 1)
}

/// Load a code set from `path`.
pub fn load(path: impl AsRef<Path>) -> Result<CodeSet, CodeSetError> {
    from_str(&std::fs::read_to_string(path)?)
}
