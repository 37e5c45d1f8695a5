//! Computable pass/fail reports for the a-priori estimates, weak forms and
//! generalized-solution inequalities.

mod chemo;
mod supersol;

pub use chemo::{check_dissipation_bounds, check_mass_budget, mass_budget_defects, run_digest};
pub use supersol::{check_ln_supersolution, check_phi_supersolution, PhiMember, PhiSupersolFamily};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::functionals::{
    dual_surrogate_bound, dual_time_derivative_surrogate, grad_lambda_norm,
    truncated_gradient_energy, weighted_energy_constant, weighted_gradient_energy,
};
use crate::grid::{l1_norm, FieldTrajectory, Grid};
use crate::heat::{HeatProblem, HeatSource};
use crate::tolerances::{self, budget};
use crate::weak::{weak_terms, SignalEquation, TestFunctionSet, WeakQuadrature};

/// Which way a report compares its two sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `lhs <= rhs`, margin `rhs - lhs`.
    Le,
    /// `lhs >= rhs`, margin `lhs - rhs`.
    Ge,
    /// `lhs == rhs`, margin `-|lhs - rhs|`.
    Eq,
    /// A computed value without a computable bound; `rhs` holds the shape
    /// factor if any and the margin is `+∞` whenever the value is finite.
    Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub id: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    pub tolerance: f64,
    /// SHA-256 of the inputs the report was computed from.
    pub digest: String,
    pub note: Option<String>,
}

impl EstimateReport {
    pub fn new(
        id: impl Into<String>,
        relation: Relation,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
        digest: String,
    ) -> Self {
        let margin = match relation {
            Relation::Le => rhs - lhs,
            Relation::Ge => lhs - rhs,
            Relation::Eq => -(lhs - rhs).abs(),
            Relation::Value => {
                if lhs.is_finite() {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
        };
        // NaN margins fail.
        let pass = margin >= -tolerance;
        Self {
            id: id.into(),
            relation,
            lhs,
            rhs,
            margin,
            pass,
            tolerance,
            digest,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Incremental digest over the numeric inputs of a check.
#[derive(Clone, Default)]
pub struct InputDigest(Sha256);

impl InputDigest {
    pub fn new() -> Self {
        Self(Sha256::new())
    }

    pub fn text(mut self, s: &str) -> Self {
        self.0.update((s.len() as u64).to_le_bytes());
        self.0.update(s.as_bytes());
        self
    }

    pub fn numbers(mut self, xs: &[f64]) -> Self {
        self.0.update((xs.len() as u64).to_le_bytes());
        for x in xs {
            self.0.update(x.to_le_bytes());
        }
        self
    }

    pub fn grid(self, g: &Grid) -> Self {
        let cells: Vec<f64> = g.cells().iter().map(|&c| c as f64).collect();
        self.numbers(&[g.dim() as f64])
            .numbers(g.extents())
            .numbers(&cells)
    }

    pub fn trajectory(self, t: &FieldTrajectory) -> Self {
        let mut d = self.grid(t.grid()).numbers(&[t.dt()]);
        for f in t.frames() {
            d = d.numbers(f.values());
        }
        d
    }

    pub fn hex(self) -> String {
        self.0
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn sign_definite(problem: &HeatProblem, steps: usize) -> bool {
    let g = *problem.grid();
    let frames: Vec<_> = match &problem.source {
        HeatSource::Zero => vec![],
        HeatSource::Steady(f) => vec![f.clone()],
        HeatSource::Frames(_) => (0..=steps)
            .map(|n| problem.source.frame(&g, n).into_owned())
            .collect(),
    };
    let all = |pred: &dyn Fn(f64) -> bool| {
        problem.v0.values().iter().all(|&x| pred(x))
            && frames.iter().all(|f| f.values().iter().all(|&x| pred(x)))
    };
    all(&|x| x >= 0.0) || all(&|x| x <= 0.0)
}

pub const TRUNCATION_LEVELS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
pub const WEIGHT_EXPONENTS: [f64; 3] = [0.5, 1.0, 2.0];
pub const LQ_EXPONENT: f64 = 1.25;
pub const LAMBDA_EXPONENT: f64 = 1.1;
const SHAPE_NOTE: &str = "constant unverifiable, inequality shape only";

/// Reports for the heat equation without decay: mass identity, truncated
/// and weighted gradient bounds, integrability shapes and the dual bound.
pub fn check_heat_apriori(
    traj: &FieldTrajectory,
    problem: &HeatProblem,
    theta: f64,
) -> Result<Vec<EstimateReport>> {
    if problem.kappa != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "a-priori checks need κ = 0 (got {}); substitute z = e^{{κt}} v first",
            problem.kappa
        )));
    }
    if !traj.grid().same_shape(problem.grid()) {
        return Err(Error::FieldMismatch(
            "trajectory and problem live on different grids".into(),
        ));
    }
    let g = *traj.grid();
    let steps = traj.steps();
    let m = l1_norm(&problem.v0) + problem.source.l1_norm(&g, traj.dt(), steps, theta);
    let base = InputDigest::new().trajectory(traj).numbers(&[theta, m]);
    let digest = |id: &str, p: f64| base.clone().text(id).numbers(&[p]).hex();
    let mut out = Vec::new();

    let sup_mass = traj.frames().iter().map(l1_norm).fold(0.0, f64::max);
    let exact = sign_definite(problem, steps);
    out.push(
        EstimateReport::new(
            "mass_identity",
            if exact { Relation::Eq } else { Relation::Le },
            sup_mass,
            m,
            tolerances::TOL_MASS * m.max(1.0),
            digest("mass_identity", 0.0),
        )
        .with_note(if exact {
            "sign-definite data: equality"
        } else {
            "signed data: upper bound"
        }),
    );
    for k in TRUNCATION_LEVELS {
        let lhs = truncated_gradient_energy(traj, k)?;
        let rhs = 2.0 * k * m;
        out.push(EstimateReport::new(
            format!("truncated_gradient_bound[k={k}]"),
            Relation::Le,
            lhs,
            rhs,
            tolerances::TOL_MODEL * rhs,
            digest("truncated_gradient_bound", k),
        ));
    }
    for a in WEIGHT_EXPONENTS {
        let lhs = weighted_gradient_energy(traj, a)?;
        let rhs = weighted_energy_constant(a) * m;
        out.push(EstimateReport::new(
            format!("weighted_gradient_bound[alpha={a}]"),
            Relation::Le,
            lhs,
            rhs,
            tolerances::TOL_MODEL * rhs,
            digest("weighted_gradient_bound", a),
        ));
    }
    let q = LQ_EXPONENT;
    let lq = {
        let s: f64 = traj.frames()[1..]
            .iter()
            .map(|z| {
                z.values()
                    .iter()
                    .map(|x| (x.abs() + 1.0).powf(q))
                    .sum::<f64>()
            })
            .sum::<f64>()
            * g.cell_volume()
            * traj.dt();
        s.powf(1.0 / q)
    };
    let shape = (m + 1.0).powf(1.0 + 1.0 / q);
    out.push(
        EstimateReport::new(
            format!("lq_integrability[q={q}]"),
            Relation::Value,
            lq,
            shape,
            0.0,
            digest("lq", q),
        )
        .with_note(format!("{SHAPE_NOTE}; measured constant {:?}", lq / shape)),
    );
    let lam = LAMBDA_EXPONENT;
    let gl = grad_lambda_norm(traj, lam)?;
    let shape = (m + 1.0).powi(2);
    out.push(
        EstimateReport::new(
            format!("gradient_lambda_norm[lambda={lam}]"),
            Relation::Value,
            gl,
            shape,
            0.0,
            digest("lambda", lam),
        )
        .with_note(format!("{SHAPE_NOTE}; measured constant {:?}", gl / shape)),
    );
    let lhs = dual_time_derivative_surrogate(traj);
    let rhs = dual_surrogate_bound(traj, problem, theta);
    out.push(
        EstimateReport::new(
            "dual_time_derivative_bound",
            Relation::Le,
            lhs,
            rhs,
            tolerances::TOL_MODEL * rhs,
            digest("dual", 0.0),
        )
        .with_note("dictionary surrogate of the (W^{1,∞})* norm"),
    );
    Ok(out)
}

/// Largest relative weak residual of `v_t = Δv - r v + s` over a signed test
/// set. `solver_tol` is the relative tolerance the trajectory's linear
/// solves were run at; it only enters the scheme-quadrature budget.
pub fn check_weak_solution_v(
    traj: &FieldTrajectory,
    eq: &SignalEquation,
    tests: &TestFunctionSet,
    quad: WeakQuadrature,
    solver_tol: f64,
) -> Result<EstimateReport> {
    let terms = weak_terms(traj, eq, tests, quad)?;
    // Residuals are measured against the larger of the individual term
    // magnitudes and the data size sup_t ‖v‖₁·‖X‖∞, so that tests orthogonal
    // to the solution do not divide round-off by round-off.
    let data = traj.frames().iter().map(l1_norm).fold(0.0, f64::max);
    let rel = terms
        .iter()
        .zip(tests.members())
        .map(|(t, tf)| {
            let xmax = tf
                .cells(traj.grid())
                .values()
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()));
            let scale = t.scale.max(data * xmax);
            if scale > 0.0 {
                t.residual().abs() / scale
            } else {
                t.residual().abs()
            }
        })
        .fold(0.0, f64::max);
    let (dt, h) = (traj.dt(), traj.grid().h_max());
    let tol = match quad {
        WeakQuadrature::Scheme => tolerances::TOL_MODEL + tolerances::C_SCHEME_SOLVER * solver_tol,
        WeakQuadrature::Analytic => budget(1.0, tolerances::C_WEAK, dt, h),
    };
    let quad_name = match quad {
        WeakQuadrature::Scheme => "scheme",
        WeakQuadrature::Analytic => "analytic",
    };
    let id = format!("weak_solution_signal[{quad_name}]");
    let digest = InputDigest::new()
        .trajectory(traj)
        .text(&id)
        .numbers(&[tests.len() as f64, solver_tol])
        .hex();
    Ok(
        EstimateReport::new(id, Relation::Le, rel, 0.0, tol, digest).with_note(format!(
            "max relative residual over {} test functions",
            tests.len()
        )),
    )
}
