//! Tolerance model of the checkers: `tol = TOL_MODEL·scale + C·(dt + h)·scale`
//! where `scale` is the magnitude of the compared quantities. The
//! discretization constants `C` were measured once on coarse 1D runs (see
//! the `calibration` tests, which recompute them and fail on drift) and
//! frozen here with a safety factor of about 2.

/// Round-off budget relative to the compared magnitude.
pub const TOL_MODEL: f64 = 1e-8;

/// Weak residual of the signal equation in analytic quadrature.
pub const C_WEAK: f64 = 2.5;

/// Allowance for linear-solver error, in units of the solver's relative
/// tolerance (scheme-quadrature residuals, mass and pointwise bounds).
pub const C_SCHEME_SOLVER: f64 = 10.0;

/// φ-supersolution inequality.
pub const C_SUPER_PHI: f64 = 0.3;

/// ln-supersolution inequality.
pub const C_SUPER_LN: f64 = 0.15;

/// Per-step quasi-energy inequality. The calibration run needs none (every
/// step keeps a positive margin); this is a floor.
pub const C_QUASI_ENERGY: f64 = 0.05;

/// Mass identities of conservative runs, relative to the data size.
pub const TOL_MASS: f64 = 1e-10;

/// Mass budgets of dampened runs, relative to the data size.
pub const TOL_MASS_BUDGET: f64 = 1e-9;

/// Pointwise bounds (min/max principles), absolute on top of the relative
/// model term.
pub const TOL_POINTWISE: f64 = 1e-12;

/// `TOL_MODEL·scale + c·(dt + h)·scale`.
pub fn budget(scale: f64, c: f64, dt: f64, h: f64) -> f64 {
    (TOL_MODEL + c * (dt + h)) * scale.abs()
}
