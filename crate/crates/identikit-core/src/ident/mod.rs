//! Structural and practical identifiability diagnostics.
//!
//! Structural: a fixed catalogue of input–output coefficient maps with
//! inversion ([`structural`]), verified numerically by trajectory
//! indistinguishability. Practical: profile likelihood with chi-square
//! thresholds ([`profile`]), bootstrap average relative errors, correlation
//! matrices and Fisher-matrix rank diagnostics ([`practical`]).

pub mod practical;
pub mod profile;
pub mod structural;

pub use practical::{bootstrap_are, correlation_matrix, fim_diagnostics, AreTable, FimDiagnostics};
pub use profile::{
    pl_interval, profile_likelihood, GridSpec, PlInterval, ProfileCurve, ProfileSpan, REOPT_TOL,
};
pub use structural::{
    indistinguishable, invert_coefficients, structural_coefficients, Knowns, StructuralCase,
    StructuralCaseId, Verdict,
};
