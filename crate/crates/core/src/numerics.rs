//! Process-wide numerical tolerances.

use std::sync::RwLock;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericsSettings {
    /// Max entrywise |A - A^H| accepted as Hermitian.
    pub hermitian_tol: f64,
    /// Residual tolerance for solves and eigendecompositions.
    pub residual_tol: f64,
    /// Imaginary residue dropped when a quantity must be real.
    pub imaginary_tol: f64,
    /// Duality residual checked when a quorum is built.
    pub duality_tol: f64,
    /// Identity-expansion residual checked when a quorum is built.
    pub identity_tol: f64,
    /// Gram is treated as singular when lambda_min <= this * lambda_max.
    pub singular_gram_ratio: f64,
    /// Condition number above which a quorum is flagged ill-conditioned.
    pub ill_conditioned_above: f64,
    /// Largest ||tM||_1 accepted by the matrix exponential.
    pub expm_norm_limit: f64,
    /// Relative eigenvalue gap below which a spectrum counts as degenerate.
    pub degeneracy_tol: f64,
}

impl NumericsSettings {
    pub const DEFAULT: NumericsSettings = NumericsSettings {
        hermitian_tol: 1e-12,
        residual_tol: 1e-10,
        imaginary_tol: 1e-10,
        duality_tol: 1e-9,
        identity_tol: 1e-8,
        singular_gram_ratio: 1e-12,
        ill_conditioned_above: 1e8,
        expm_norm_limit: 1e7,
        degeneracy_tol: 1e-9,
    };
}

impl Default for NumericsSettings {
    fn default() -> Self {
        Self::DEFAULT
    }
}

static SETTINGS: RwLock<NumericsSettings> = RwLock::new(NumericsSettings::DEFAULT);

/// Current settings.
pub fn numerics() -> NumericsSettings {
    *SETTINGS.read().unwrap_or_else(|e| e.into_inner())
}

/// Replace the settings for the whole process.
pub fn set_numerics(settings: NumericsSettings) {
    *SETTINGS.write().unwrap_or_else(|e| e.into_inner()) = settings;
}
