//! Numerical tolerances shared by every validating operation.

/// Environment variable that overrides the base tolerances.
pub const TOL_ENV: &str = "QHIST_TOL";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Ket normalization.
    pub norm: f64,
    /// `max |A†A - I|` for unitaries.
    pub unitary: f64,
    /// `max |A - A†|` for Hermitian operators.
    pub herm: f64,
    /// Idempotence, orthogonality and commutation of projectors.
    pub proj: f64,
    /// Off-diagonal decoherence matrix entries. Chain products accumulate more
    /// rounding than single projectors, hence the looser default.
    pub cons: f64,
    /// Probability sums, clamping and the conditioning threshold.
    pub prob: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            norm: 1e-10,
            unitary: 1e-10,
            herm: 1e-10,
            proj: 1e-10,
            cons: 1e-8,
            prob: 1e-9,
        }
    }
}

impl Tolerances {
    /// Sets the four base tolerances to `eps`. The consistency and probability
    /// tolerances never drop below their defaults.
    pub fn uniform(eps: f64) -> Self {
        let d = Tolerances::default();
        Tolerances {
            norm: eps,
            unitary: eps,
            herm: eps,
            proj: eps,
            cons: d.cons.max(eps),
            prob: d.prob.max(eps),
        }
    }

    /// Defaults, overridden by `QHIST_TOL` when it holds a positive number.
    pub fn from_env() -> Self {
        std::env::var(TOL_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|eps| eps.is_finite() && *eps > 0.0)
            .map(Tolerances::uniform)
            .unwrap_or_default()
    }
}
