//! Exact, Monte Carlo, and bounded symbol error probabilities for
//! multi-code signaling over AWGN with arbitrary code correlations.
//!
//! The crate is organized around the analysis pipeline:
//!
//! - [`codeset`]: construct, validate, and persist code sets and their
//!   correlation matrices.
//! - [`geometry`]: per-symbol QR decision-region geometry.
//! - [`closed_form`]: 1-D quadrature SER formulas for the orthogonal,
//!   biorthogonal, and equi-correlated special cases.
//! - [`mc_ser`]: Monte Carlo integration of the general-case error
//!   probability with Chebyshev sample budgeting.
//! - [`bounds`]: pairwise-error exact results, union upper bounds, and the
//!   correlation sensitivity analysis.
//! - [`link_sim`]: brute-force AWGN link simulator, the independent oracle
//!   for everything above.

pub mod bounds;
pub mod closed_form;
pub mod codeset;
pub mod geometry;
pub mod link_sim;
pub mod mc_ser;
pub mod numeric;
pub mod seeding;

pub use closed_form::SnrPoint;
pub use codeset::{CodeSet, CorrelationMatrix, Provenance, SignalingMode};
pub use geometry::QrPair;
pub use mc_ser::{BudgetPolicy, Method, SerEstimate};
