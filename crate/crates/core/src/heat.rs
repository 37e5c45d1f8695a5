//! Implicit θ-scheme for `v_t = Δv - κv + f` with homogeneous Neumann data.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{l1_norm, laplacian_neumann, FieldTrajectory, Grid, ScalarField};
use crate::linsolve::solve_shifted_laplacian;
use crate::weak::{self, Coupling, SignalEquation, TestFunctionSet, WeakQuadrature};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub dt: f64,
    pub theta: f64,
    pub linear_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            theta: 1.0,
            linear_tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

impl SolverConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::InvalidConfig(format!(
                "theta must lie in [1/2, 1], got {}",
                self.theta
            )));
        }
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "linear_tol must lie in (0, 1), got {}",
                self.linear_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Number of steps to reach `t_end`, i.e. `ceil(t_end/dt)` with a small
/// guard against round-off in the quotient.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    let q = t_end / dt;
    let r = q.round();
    let m = if (q - r).abs() <= 1e-9 * q.max(1.0) {
        r
    } else {
        q.ceil()
    };
    (m as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeatSource {
    Zero,
    Steady(ScalarField),
    /// Source sampled at the solver's frame times `n·dt`.
    Frames(FieldTrajectory),
}

impl HeatSource {
    pub fn frame<'a>(&'a self, grid: &Grid, n: usize) -> Cow<'a, ScalarField> {
        match self {
            HeatSource::Zero => Cow::Owned(ScalarField::zeros(*grid)),
            HeatSource::Steady(f) => Cow::Borrowed(f),
            HeatSource::Frames(t) => Cow::Borrowed(t.frame(n)),
        }
    }

    fn validate(&self, grid: &Grid, dt: f64, steps: usize) -> Result<()> {
        match self {
            HeatSource::Zero => Ok(()),
            HeatSource::Steady(f) => {
                if !f.grid().same_shape(grid) {
                    return Err(Error::FieldMismatch(
                        "source lives on a different grid".into(),
                    ));
                }
                Ok(())
            }
            HeatSource::Frames(t) => {
                if !t.grid().same_shape(grid) {
                    return Err(Error::FieldMismatch(
                        "source lives on a different grid".into(),
                    ));
                }
                if (t.dt() - dt).abs() > 1e-12 * dt {
                    return Err(Error::InvalidConfig(
                        "source frames use a different time step".into(),
                    ));
                }
                if t.steps() < steps {
                    return Err(Error::InvalidConfig(format!(
                        "source has {} frames, run needs {}",
                        t.frames().len(),
                        steps + 1
                    )));
                }
                Ok(())
            }
        }
    }

    /// `Σ_n dt·(θ‖f_{n+1}‖₁ + (1-θ)‖f_n‖₁)`, the discrete `‖f‖_{L¹(Ω×(0,T))}`
    /// seen by a θ-scheme run of `steps` steps.
    pub fn l1_norm(&self, grid: &Grid, dt: f64, steps: usize, theta: f64) -> f64 {
        match self {
            HeatSource::Zero => 0.0,
            HeatSource::Steady(f) => l1_norm(f) * dt * steps as f64,
            HeatSource::Frames(_) => {
                let norms: Vec<f64> = (0..=steps).map(|n| l1_norm(&self.frame(grid, n))).collect();
                (0..steps)
                    .map(|n| theta * norms[n + 1] + (1.0 - theta) * norms[n])
                    .sum::<f64>()
                    * dt
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, HeatSource::Zero)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatProblem {
    pub kappa: f64,
    pub v0: ScalarField,
    pub source: HeatSource,
}

impl HeatProblem {
    pub fn new(kappa: f64, v0: ScalarField, source: HeatSource) -> Self {
        Self { kappa, v0, source }
    }

    pub fn grid(&self) -> &Grid {
        self.v0.grid()
    }

    /// The linear signal-equation description used by weak-form checks.
    pub fn signal_equation(&self, steps: usize, theta: f64) -> SignalEquation {
        let g = *self.grid();
        let source = match &self.source {
            HeatSource::Zero => weak::Coefficient::Uniform(0.0),
            HeatSource::Steady(f) => weak::Coefficient::Steady(f.clone()),
            HeatSource::Frames(_) => weak::Coefficient::Frames(
                (0..=steps)
                    .map(|n| self.source.frame(&g, n).into_owned())
                    .collect(),
            ),
        };
        SignalEquation {
            decay: weak::Coefficient::Uniform(self.kappa),
            source,
            coupling: Coupling::Blend { theta },
        }
    }
}

/// One θ-step: solves
/// `(I/dt + θκ - θΔ) z_{n+1} = z_n/dt + (1-θ)(Δ - κ)z_n + θ f_{n+1} + (1-θ) f_n`.
pub fn step_theta(
    z: &ScalarField,
    f_now: &ScalarField,
    f_next: &ScalarField,
    kappa: f64,
    cfg: &SolverConfig,
) -> Result<ScalarField> {
    let g = *z.grid();
    let (dt, th) = (cfg.dt, cfg.theta);
    let shift = 1.0 / dt + th * kappa;
    if !(shift > 0.0) {
        return Err(Error::StepTooLarge {
            dt,
            limit: 1.0 / (th * kappa.abs()),
            reason: "implicit operator loses positivity for negative kappa".into(),
        });
    }
    let mut rhs: Vec<f64> = z
        .values()
        .iter()
        .zip(f_now.values().iter().zip(f_next.values()))
        .map(|(&zi, (&fa, &fb))| zi / dt + th * fb + (1.0 - th) * fa)
        .collect();
    if th < 1.0 {
        let lap = laplacian_neumann(z);
        for i in 0..rhs.len() {
            rhs[i] += (1.0 - th) * (lap.values()[i] - kappa * z.values()[i]);
        }
    }
    let x = solve_shifted_laplacian(
        &g,
        &vec![shift; g.n_cells()],
        th,
        &rhs,
        z.values(),
        cfg.linear_tol,
        cfg.max_iter,
    )?;
    ScalarField::new(g, x).map_err(|_| Error::NonFinite("heat step".into()))
}

/// Runs the θ-scheme to `t_end`, returning frames `0..=ceil(t_end/dt)`.
pub fn solve_heat(
    problem: &HeatProblem,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<FieldTrajectory> {
    cfg.validate()?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "horizon must be positive, got {t_end}"
        )));
    }
    let g = *problem.grid();
    let steps = step_count(t_end, cfg.dt);
    problem.source.validate(&g, cfg.dt, steps)?;
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(problem.v0.clone());
    for n in 0..steps {
        let f_now = problem.source.frame(&g, n);
        let f_next = problem.source.frame(&g, n + 1);
        let next = step_theta(&frames[n], &f_now, &f_next, problem.kappa, cfg)?;
        frames.push(next);
    }
    FieldTrajectory::new(cfg.dt, frames)
}

/// Weak-form residual `LHS - RHS` of a heat trajectory against each test
/// function, using the quadrature the stepper is consistent with.
pub fn weak_residual(
    traj: &FieldTrajectory,
    problem: &HeatProblem,
    theta: f64,
    tests: &TestFunctionSet,
) -> Result<Vec<f64>> {
    let eq = problem.signal_equation(traj.steps(), theta);
    Ok(weak::weak_terms(traj, &eq, tests, WeakQuadrature::Scheme)?
        .iter()
        .map(|t| t.residual())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::integrate;
    use std::f64::consts::PI;

    #[test]
    fn step_count_rounding() {
        assert_eq!(step_count(1.0, 1e-3), 1000);
        assert_eq!(step_count(1.0, 0.3), 4);
        assert_eq!(step_count(0.1, 0.1), 1);
    }

    #[test]
    fn constant_source_adds_linearly() {
        let g = Grid::uniform_1d(1.0, 8).unwrap();
        let z = ScalarField::constant(g, 0.4);
        let f = ScalarField::constant(g, 3.0);
        for theta in [0.5, 0.75, 1.0] {
            let cfg = SolverConfig {
                dt: 0.01,
                theta,
                ..Default::default()
            };
            let next = step_theta(&z, &f, &f, 0.0, &cfg).unwrap();
            for v in next.values() {
                assert!((v - 0.43).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eigenmode_decays_at_discrete_rate() {
        let n = 32;
        let g = Grid::uniform_1d(1.0, n).unwrap();
        let h = g.spacing()[0];
        let lam = (2.0 - 2.0 * (PI * h).cos()) / (h * h);
        let v0 = ScalarField::from_fn(g, |x| (PI * x[0]).cos());
        let cfg = SolverConfig::with_dt(0.01);
        let traj = solve_heat(
            &HeatProblem::new(0.0, v0.clone(), HeatSource::Zero),
            0.2,
            &cfg,
        )
        .unwrap();
        let m = traj.steps();
        let factor = (1.0 + cfg.dt * lam).powi(-(m as i32));
        for (a, b) in traj.last().values().iter().zip(v0.values()) {
            assert!((a - factor * b).abs() < 1e-8);
        }
    }

    #[test]
    fn eigenmode_2d_through_cg() {
        let g = Grid::new(2, &[1.0, 2.0], &[16, 16]).unwrap();
        let h = g.spacing();
        let lam = (2.0 - 2.0 * (PI * h[0]).cos()) / (h[0] * h[0])
            + (2.0 - 2.0 * (PI * h[1] / 2.0).cos()) / (h[1] * h[1]);
        let v0 = ScalarField::from_fn(g, |x| (PI * x[0]).cos() * (PI * x[1] / 2.0).cos());
        let cfg = SolverConfig::with_dt(0.02);
        let traj = solve_heat(
            &HeatProblem::new(0.0, v0.clone(), HeatSource::Zero),
            0.1,
            &cfg,
        )
        .unwrap();
        let factor = (1.0 + cfg.dt * lam).powi(-(traj.steps() as i32));
        for (a, b) in traj.last().values().iter().zip(v0.values()) {
            assert!((a - factor * b).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_data_and_source() {
        let g = Grid::uniform_1d(1.0, 16).unwrap();
        let p = HeatProblem::new(
            0.0,
            ScalarField::constant(g, 1.0),
            HeatSource::Steady(ScalarField::constant(g, 2.0)),
        );
        let traj = solve_heat(&p, 1.0, &SolverConfig::with_dt(1e-3)).unwrap();
        assert_eq!(traj.steps(), 1000);
        for v in traj.last().values() {
            assert!((v - 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn spike_mass_is_conserved() {
        let g = Grid::uniform_1d(1.0, 64).unwrap();
        let mut v = vec![0.0; 64];
        v[10] = 1.0 / g.spacing()[0];
        let p = HeatProblem::new(0.0, ScalarField::new(g, v).unwrap(), HeatSource::Zero);
        let traj = solve_heat(&p, 0.5, &SolverConfig::with_dt(1e-2)).unwrap();
        for f in traj.frames() {
            assert!((integrate(f) - 1.0).abs() < 1e-10);
            assert!(f.min() >= 0.0);
        }
    }

    #[test]
    fn negative_kappa_step_limit() {
        let g = Grid::uniform_1d(1.0, 8).unwrap();
        let z = ScalarField::constant(g, 1.0);
        let f = ScalarField::zeros(g);
        let cfg = SolverConfig::with_dt(0.5);
        assert!(matches!(
            step_theta(&z, &f, &f, -4.0, &cfg),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig {
            theta: 0.4,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            dt: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }
}
