//! Semi-implicit finite-volume solvers for three regularized chemotaxis
//! systems with homogeneous Neumann data:
//!
//! * A: `u_t = Δu - ∇·(u∇v) + g(u)`, `v_t = Δv - v + u/(1+εu)`
//! * B: `u_t = Δu - χ∇·(u/((1+εu)v) ∇v)`, `v_t = Δv - v + u`
//! * C: `u_t = Δu - χ∇·(u/((1+εu)v) ∇v) + g(u)`,
//!   `v_t = Δv - uv/((1+εu)(1+εv))`
//!
//! Each step updates `v` implicitly with coefficients frozen at the old
//! state, then `u` with implicit diffusion, explicit upwind taxis driven by
//! the new `v`, and explicit dampening.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{divergence, face_gradient, integrate, FaceField, FieldTrajectory, ScalarField};
use crate::linsolve::solve_shifted_laplacian;
use crate::weak::{Coefficient, Coupling, SignalEquation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    A,
    B,
    C,
}

/// `g(s) = λs - μs^β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampeningSpec {
    pub lambda: f64,
    pub mu: f64,
    pub beta: f64,
}

impl DampeningSpec {
    pub fn new(lambda: f64, mu: f64, beta: f64) -> Result<Self> {
        let g = Self { lambda, mu, beta };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite()
            || !(self.mu > 0.0 && self.mu.is_finite())
            || !(self.beta > 1.0 && self.beta.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "dampening needs finite λ, μ > 0 and β > 1, got λ={}, μ={}, β={}",
                self.lambda, self.mu, self.beta
            )));
        }
        Ok(())
    }

    pub fn g(&self, s: f64) -> f64 {
        self.lambda * s - self.mu * s.max(0.0).powf(self.beta)
    }

    pub fn g_prime(&self, s: f64) -> f64 {
        self.lambda - self.mu * self.beta * s.max(0.0).powf(self.beta - 1.0)
    }

    /// `max |g'|` on `[0, upper]`; `g'` is monotone there.
    pub fn max_abs_g_prime(&self, upper: f64) -> f64 {
        self.g_prime(0.0)
            .abs()
            .max(self.g_prime(upper.max(0.0)).abs())
    }

    /// `sup{s >= 0 : g(s) >= 0}`.
    pub fn zero_crossing(&self) -> f64 {
        if self.lambda <= 0.0 {
            0.0
        } else {
            (self.lambda / self.mu).powf(1.0 / (self.beta - 1.0))
        }
    }

    /// `max_{s >= 0} g(s)`.
    pub fn max_positive(&self) -> f64 {
        if self.lambda <= 0.0 {
            0.0
        } else {
            let s = (self.lambda / (self.mu * self.beta)).powf(1.0 / (self.beta - 1.0));
            self.g(s)
        }
    }

    /// `max |g|` on `[0, upper]`.
    pub fn max_abs_on(&self, upper: f64) -> f64 {
        let mut m = self.g(upper).abs();
        if self.lambda > 0.0 {
            let s = (self.lambda / (self.mu * self.beta)).powf(1.0 / (self.beta - 1.0));
            if s <= upper {
                m = m.max(self.g(s).abs());
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChemoSystem {
    pub variant: Variant,
    pub chi: f64,
    pub eps: f64,
    #[serde(default)]
    pub g: Option<DampeningSpec>,
}

impl ChemoSystem {
    pub fn new(variant: Variant, chi: f64, eps: f64, g: Option<DampeningSpec>) -> Result<Self> {
        let s = Self {
            variant,
            chi,
            eps,
            g,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "ε must lie in (0, 1), got {}",
                self.eps
            )));
        }
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "χ must be positive, got {}",
                self.chi
            )));
        }
        match (self.variant, &self.g) {
            (Variant::B, Some(_)) => Err(Error::InvalidConfig(
                "variant B takes no dampening term".into(),
            )),
            (Variant::A | Variant::C, None) => Err(Error::InvalidConfig(
                "variants A and C need a dampening term".into(),
            )),
            (_, Some(g)) => g.validate(),
            _ => Ok(()),
        }
    }

    fn needs_positive_v(&self) -> bool {
        matches!(self.variant, Variant::B | Variant::C)
    }

    pub fn g(&self, s: f64) -> f64 {
        self.g.map_or(0.0, |g| g.g(s))
    }

    /// Taxis velocity per unit `∇v` with donor state `(u, v)`.
    fn speed(&self, u: f64, v: f64) -> f64 {
        match self.variant {
            Variant::A => 1.0,
            Variant::B | Variant::C => self.chi / ((1.0 + self.eps * u) * v),
        }
    }

    /// `(r, s)` of the signal equation `v_t = Δv - r v + s` at state `(u, v)`.
    pub fn signal_coefficients(
        &self,
        u: &ScalarField,
        v: &ScalarField,
    ) -> (ScalarField, ScalarField) {
        let e = self.eps;
        match self.variant {
            Variant::A => (
                ScalarField::constant(*u.grid(), 1.0),
                u.map(|x| x / (1.0 + e * x)),
            ),
            Variant::B => (ScalarField::constant(*u.grid(), 1.0), u.clone()),
            Variant::C => (
                u.zip_map(v, |x, y| x / ((1.0 + e * x) * (1.0 + e * y))),
                ScalarField::zeros(*u.grid()),
            ),
        }
    }
}

fn check_positive_v(v: &ScalarField) -> Result<()> {
    if let Some((c, x)) = v.values().iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
        return Err(Error::Positivity(format!("v = {x:e} <= 0 at cell {c}")));
    }
    Ok(())
}

/// Upwind taxis flux: `∇v` on each face times the mobility of the donor
/// cell, the donor being the cell `∇v` points away from.
pub fn taxis_face_flux(
    u: &ScalarField,
    v: &ScalarField,
    system: &ChemoSystem,
) -> Result<FaceField> {
    if system.needs_positive_v() {
        check_positive_v(v)?;
    }
    let g = *u.grid();
    let (uv, vv) = (u.values(), v.values());
    Ok(face_gradient(v).map_faces(|a, k, dv| {
        let (l, r) = g.face_cells(a, k);
        let d = if dv > 0.0 { l } else { r };
        dv * uv[d] * system.speed(uv[d], vv[d])
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChemoConfig {
    pub dt: f64,
    pub linear_tol: f64,
    pub max_iter: usize,
}

impl Default for ChemoConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            linear_tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

impl ChemoConfig {
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
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig(
                "linear solver settings out of range".into(),
            ));
        }
        Ok(())
    }
}

/// Largest admissible step for the explicit parts at state `(u, v_next)`:
/// total upwind outflow of each cell and the dampening slope are both kept
/// below `1/(2dt)`. Returns `(limit, reason)`.
pub fn stable_step(
    u: &ScalarField,
    v_next: &ScalarField,
    system: &ChemoSystem,
) -> (f64, &'static str) {
    let g = *u.grid();
    let (uv, vv) = (u.values(), v_next.values());
    let grad = face_gradient(v_next);
    let mut out = vec![0.0f64; g.n_cells()];
    for a in 0..g.dim() {
        let h = g.spacing()[a];
        for (k, &dv) in grad.axis(a).iter().enumerate() {
            let (l, r) = g.face_cells(a, k);
            let d = if dv > 0.0 { l } else { r };
            out[d] += (dv * system.speed(uv[d], vv[d])).abs() / h;
        }
    }
    let worst_out = out.iter().copied().fold(0.0, f64::max);
    let taxis = if worst_out > 0.0 {
        0.5 / worst_out
    } else {
        f64::INFINITY
    };
    let damp = match system.g {
        Some(gs) => {
            let m = gs.max_abs_g_prime(u.max());
            if m > 0.0 {
                0.5 / m
            } else {
                f64::INFINITY
            }
        }
        None => f64::INFINITY,
    };
    if taxis <= damp {
        (taxis, "upwind taxis outflow")
    } else {
        (damp, "dampening slope")
    }
}

fn positivity_floor(z: &ScalarField) -> f64 {
    -1e-12 * z.max().abs().max(1.0)
}

/// One semi-implicit step.
pub fn step_chemo(
    u: &ScalarField,
    v: &ScalarField,
    system: &ChemoSystem,
    cfg: &ChemoConfig,
) -> Result<(ScalarField, ScalarField)> {
    let g = *u.grid();
    let dt = cfg.dt;
    if system.needs_positive_v() {
        check_positive_v(v)?;
    }
    let (r, s) = system.signal_coefficients(u, v);
    let shift: Vec<f64> = r.values().iter().map(|x| 1.0 / dt + x).collect();
    let rhs: Vec<f64> = v
        .values()
        .iter()
        .zip(s.values())
        .map(|(a, b)| a / dt + b)
        .collect();
    let v_next = ScalarField::new(
        g,
        solve_shifted_laplacian(
            &g,
            &shift,
            1.0,
            &rhs,
            v.values(),
            cfg.linear_tol,
            cfg.max_iter,
        )?,
    )
    .map_err(|_| Error::NonFinite("signal update".into()))?;
    if system.needs_positive_v() {
        check_positive_v(&v_next)?;
    } else if v_next.min() < positivity_floor(&v_next) {
        return Err(Error::Positivity(format!(
            "v dropped to {:e}",
            v_next.min()
        )));
    }

    let (limit, reason) = stable_step(u, &v_next, system);
    if dt > limit {
        return Err(Error::StepTooLarge {
            dt,
            limit,
            reason: format!("{reason}; reduce dt"),
        });
    }
    let div = divergence(&taxis_face_flux(u, &v_next, system)?);
    let rhs: Vec<f64> = (0..g.n_cells())
        .map(|c| {
            let x = u.values()[c];
            x / dt - div.values()[c] + system.g(x)
        })
        .collect();
    let u_next = ScalarField::new(
        g,
        solve_shifted_laplacian(
            &g,
            &vec![1.0 / dt; g.n_cells()],
            1.0,
            &rhs,
            u.values(),
            cfg.linear_tol,
            cfg.max_iter,
        )?,
    )
    .map_err(|_| Error::NonFinite("cell density update".into()))?;
    let floor = positivity_floor(&u_next);
    if let Some((c, x)) = u_next
        .values()
        .iter()
        .enumerate()
        .find(|(_, x)| **x < floor)
    {
        return Err(Error::Positivity(format!("u = {x:e} at cell {c}")));
    }
    Ok((u_next, v_next))
}

/// `-(∫ln(u+1) + χ²∫ln v)`.
pub fn quasi_energy(u: &ScalarField, v: &ScalarField, chi: f64) -> Result<f64> {
    check_positive_v(v)?;
    let vol = u.grid().cell_volume();
    let s: f64 = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| a.ln_1p() + chi * chi * b.ln())
        .sum();
    Ok(-s * vol)
}

/// `∫ u^p v^q`.
pub fn functional_upvq(u: &ScalarField, v: &ScalarField, p: f64, q: f64) -> f64 {
    u.values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| a.max(0.0).powf(p) * b.powf(q))
        .sum::<f64>()
        * u.grid().cell_volume()
}

/// `∫ |∇u|²/(u+1)²` with face-averaged weights.
pub fn log_dissipation_u(u: &ScalarField) -> f64 {
    crate::functionals::weighted_energy(u, |s| 1.0 / ((s + 1.0) * (s + 1.0)))
}

/// `∫ |∇v|²/v²` with face-averaged weights.
pub fn log_dissipation_v(v: &ScalarField) -> f64 {
    crate::functionals::weighted_energy(v, |s| 1.0 / (s * s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub t: f64,
    pub mass_u: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub quasi_energy: Option<f64>,
    pub dissipation_u: f64,
    pub dissipation_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChemoRun {
    pub system: ChemoSystem,
    pub config: ChemoConfig,
    pub u: FieldTrajectory,
    pub v: FieldTrajectory,
    pub diagnostics: Vec<FrameDiagnostics>,
}

impl ChemoRun {
    /// Signal equation of the run as used by weak-form checks, with the
    /// coefficients frozen at each old frame.
    pub fn signal_equation(&self) -> SignalEquation {
        let (mut r, mut s) = (Vec::new(), Vec::new());
        for (u, v) in self.u.frames().iter().zip(self.v.frames()) {
            let (a, b) = self.system.signal_coefficients(u, v);
            r.push(a);
            s.push(b);
        }
        let decay = match self.system.variant {
            Variant::A | Variant::B => Coefficient::Uniform(1.0),
            Variant::C => Coefficient::Frames(r),
        };
        let source = match self.system.variant {
            Variant::C => Coefficient::Uniform(0.0),
            _ => Coefficient::Frames(s),
        };
        SignalEquation {
            decay,
            source,
            coupling: Coupling::Lagged,
        }
    }

    pub fn dt(&self) -> f64 {
        self.u.dt()
    }
}

fn diagnostics(t: f64, u: &ScalarField, v: &ScalarField, system: &ChemoSystem) -> FrameDiagnostics {
    let positive = v.min() > 0.0;
    FrameDiagnostics {
        t,
        mass_u: integrate(u),
        min_u: u.min(),
        max_u: u.max(),
        min_v: v.min(),
        max_v: v.max(),
        quasi_energy: (system.variant == Variant::C && positive)
            .then(|| quasi_energy(u, v, system.chi).unwrap_or(f64::NAN)),
        dissipation_u: log_dissipation_u(u),
        dissipation_v: (system.variant != Variant::A && positive).then(|| log_dissipation_v(v)),
    }
}

pub fn solve_chemo(
    system: &ChemoSystem,
    u0: &ScalarField,
    v0: &ScalarField,
    t_end: f64,
    cfg: &ChemoConfig,
) -> Result<ChemoRun> {
    system.validate()?;
    cfg.validate()?;
    if !u0.grid().same_shape(v0.grid()) {
        return Err(Error::FieldMismatch(
            "u0 and v0 live on different grids".into(),
        ));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "horizon must be positive, got {t_end}"
        )));
    }
    if u0.min() < 0.0 {
        return Err(Error::Positivity(format!(
            "initial density has minimum {:e}",
            u0.min()
        )));
    }
    if system.needs_positive_v() {
        check_positive_v(v0)?;
    } else if v0.min() < 0.0 {
        return Err(Error::Positivity(format!(
            "initial signal has minimum {:e}",
            v0.min()
        )));
    }
    let steps = crate::heat::step_count(t_end, cfg.dt);
    let mut us = vec![u0.clone()];
    let mut vs = vec![v0.clone()];
    let mut diags = vec![diagnostics(0.0, u0, v0, system)];
    for n in 0..steps {
        let (u1, v1) = step_chemo(&us[n], &vs[n], system, cfg)?;
        diags.push(diagnostics((n + 1) as f64 * cfg.dt, &u1, &v1, system));
        us.push(u1);
        vs.push(v1);
    }
    Ok(ChemoRun {
        system: *system,
        config: *cfg,
        u: FieldTrajectory::new(cfg.dt, us)?,
        v: FieldTrajectory::new(cfg.dt, vs)?,
        diagnostics: diags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::E;

    fn sys(variant: Variant) -> ChemoSystem {
        let g = (variant != Variant::B).then(|| DampeningSpec::new(1.0, 1.0, 2.0).unwrap());
        ChemoSystem::new(variant, 1.0, 0.1, g).unwrap()
    }

    #[test]
    fn system_validation() {
        assert!(ChemoSystem::new(
            Variant::B,
            1.0,
            0.1,
            Some(DampeningSpec {
                lambda: 0.0,
                mu: 1.0,
                beta: 2.0
            })
        )
        .is_err());
        assert!(ChemoSystem::new(Variant::A, 1.0, 0.1, None).is_err());
        assert!(ChemoSystem::new(Variant::B, 1.0, 1.0, None).is_err());
        assert!(ChemoSystem::new(
            Variant::C,
            0.0,
            0.1,
            Some(DampeningSpec {
                lambda: 0.0,
                mu: 1.0,
                beta: 2.0
            })
        )
        .is_err());
        assert!(DampeningSpec::new(1.0, 0.0, 2.0).is_err());
        assert!(DampeningSpec::new(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn dampening_extrema() {
        let g = DampeningSpec::new(2.0, 1.0, 2.0).unwrap();
        assert_eq!(g.zero_crossing(), 2.0);
        assert_eq!(g.max_positive(), 1.0);
        assert_eq!(g.max_abs_on(4.0), 8.0);
        assert_eq!(g.max_abs_g_prime(3.0), 4.0);
    }

    #[test]
    fn flux_trivial_cases() {
        let g = Grid::uniform_1d(1.0, 6).unwrap();
        let s = sys(Variant::B);
        let u = ScalarField::zeros(g);
        let v = ScalarField::from_fn(g, |x| 1.0 + x[0]);
        assert_eq!(taxis_face_flux(&u, &v, &s).unwrap().linf(), 0.0);
        let u = ScalarField::constant(g, 2.0);
        assert_eq!(
            taxis_face_flux(&u, &ScalarField::constant(g, 3.0), &s)
                .unwrap()
                .linf(),
            0.0
        );
    }

    #[test]
    fn flux_upwinds_from_lower_signal() {
        // v increases to the right, so every face takes the left cell as donor.
        let g = Grid::uniform_1d(1.0, 4).unwrap();
        let u = ScalarField::new(g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let v = ScalarField::new(g, vec![1.0, 2.0, 2.5, 4.5]).unwrap();
        let s = ChemoSystem::new(
            Variant::C,
            2.0,
            0.5,
            Some(DampeningSpec::new(0.0, 1.0, 2.0).unwrap()),
        )
        .unwrap();
        let f = taxis_face_flux(&u, &v, &s).unwrap();
        let h = 0.25;
        for k in 0..3 {
            let dv = (v.values()[k + 1] - v.values()[k]) / h;
            let (ul, vl) = (u.values()[k], v.values()[k]);
            let want = dv * 2.0 * ul / ((1.0 + 0.5 * ul) * vl);
            assert!(f.axis(0)[k] > 0.0);
            assert!((f.axis(0)[k] - want).abs() < 1e-14);
        }
        let fa = taxis_face_flux(&u, &v, &sys(Variant::A)).unwrap();
        assert!((fa.axis(0)[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_signal_rejected() {
        let g = Grid::uniform_1d(1.0, 4).unwrap();
        let u = ScalarField::constant(g, 1.0);
        let v = ScalarField::new(g, vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        let e = taxis_face_flux(&u, &v, &sys(Variant::B)).unwrap_err();
        assert!(e.to_string().contains("cell 1"));
    }

    #[test]
    fn zero_density_decouples() {
        let g = Grid::uniform_1d(1.0, 16).unwrap();
        let u0 = ScalarField::zeros(g);
        let v0 = ScalarField::constant(g, 0.7);
        let run =
            solve_chemo(&sys(Variant::C), &u0, &v0, 0.2, &ChemoConfig::with_dt(0.01)).unwrap();
        for (u, v) in run.u.frames().iter().zip(run.v.frames()) {
            assert_eq!(u.max(), 0.0);
            for x in v.values() {
                assert!((x - 0.7).abs() < 1e-14);
            }
        }
    }

    fn rk4(mut y: [f64; 2], t: f64, n: usize, f: impl Fn([f64; 2]) -> [f64; 2]) -> [f64; 2] {
        let h = t / n as f64;
        let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
        for _ in 0..n {
            let k1 = f(y);
            let k2 = f(add(y, k1, h / 2.0));
            let k3 = f(add(y, k2, h / 2.0));
            let k4 = f(add(y, k3, h));
            y = [
                y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
        }
        y
    }

    #[test]
    fn constant_state_matches_ode() {
        let eps = 0.1;
        let s = ChemoSystem::new(
            Variant::A,
            1.0,
            eps,
            Some(DampeningSpec::new(0.0, 1.0, 2.0).unwrap()),
        )
        .unwrap();
        let g = Grid::uniform_1d(1.0, 4).unwrap();
        let run = solve_chemo(
            &s,
            &ScalarField::constant(g, 1.0),
            &ScalarField::constant(g, 0.5),
            1.0,
            &ChemoConfig::with_dt(2e-5),
        )
        .unwrap();
        let want = rk4([1.0, 0.5], 1.0, 10_000, |y| {
            [-y[0] * y[0], -y[1] + y[0] / (1.0 + eps * y[0])]
        });
        assert!((run.u.last().values()[0] - want[0]).abs() < 1e-4);
        assert!((run.v.last().values()[0] - want[1]).abs() < 1e-4);
    }

    fn smooth_data(g: Grid) -> (ScalarField, ScalarField) {
        (
            ScalarField::from_fn(g, |x| 1.0 + 0.5 * (std::f64::consts::PI * x[0]).cos()),
            ScalarField::from_fn(g, |x| 1.0 + 0.2 * (std::f64::consts::PI * x[0]).cos()),
        )
    }

    #[test]
    fn variant_b_conserves_mass() {
        let g = Grid::uniform_1d(1.0, 64).unwrap();
        let (u0, v0) = smooth_data(g);
        let run =
            solve_chemo(&sys(Variant::B), &u0, &v0, 0.5, &ChemoConfig::with_dt(1e-3)).unwrap();
        let m0 = integrate(&u0);
        for d in &run.diagnostics {
            assert!((d.mass_u - m0).abs() <= 1e-10 * m0);
        }
        let lower = v0.min() * (-0.5f64).exp();
        assert!(run.diagnostics.iter().all(|d| d.min_v >= lower - 1e-12));
    }

    #[test]
    fn variant_c_signal_bounded_by_initial_max() {
        let g = Grid::uniform_1d(1.0, 64).unwrap();
        let (u0, v0) = smooth_data(g);
        let run =
            solve_chemo(&sys(Variant::C), &u0, &v0, 0.5, &ChemoConfig::with_dt(1e-3)).unwrap();
        assert!(run.diagnostics.iter().all(|d| d.max_v <= v0.max() + 1e-12));
    }

    #[test]
    fn mass_changes_by_dampening_only() {
        let g = Grid::unit_square(12).unwrap();
        let u0 = ScalarField::from_fn(g, |x| 1.0 + 0.5 * (3.0 * x[0]).cos() * x[1]);
        let v0 = ScalarField::from_fn(g, |x| 1.0 + 0.2 * (2.0 * x[1]).cos());
        let s = sys(Variant::A);
        let cfg = ChemoConfig {
            linear_tol: 1e-13,
            ..ChemoConfig::with_dt(2e-3)
        };
        let run = solve_chemo(&s, &u0, &v0, 0.1, &cfg).unwrap();
        for n in 0..run.u.steps() {
            let want =
                integrate(run.u.frame(n)) + cfg.dt * integrate(&run.u.frame(n).map(|x| s.g(x)));
            assert!((integrate(run.u.frame(n + 1)) - want).abs() < 1e-10);
        }
        let bound = s.g.unwrap().max_positive();
        assert!(run
            .diagnostics
            .iter()
            .all(|d| d.mass_u <= integrate(&u0) + d.t * bound + 1e-12));
    }

    #[test]
    fn cfl_violation_reports_limit() {
        let g = Grid::uniform_1d(1.0, 64).unwrap();
        let u0 = ScalarField::from_fn(g, |x| 5.0 + x[0]);
        let v0 = ScalarField::from_fn(g, |x| 1.0 + 30.0 * x[0] * x[0]);
        let e =
            solve_chemo(&sys(Variant::A), &u0, &v0, 0.1, &ChemoConfig::with_dt(0.05)).unwrap_err();
        assert!(matches!(e, Error::StepTooLarge { .. }), "{e}");
        assert!(e.to_string().contains("reduce dt"));
    }

    #[test]
    fn quasi_energy_values() {
        let g = Grid::uniform_1d(1.0, 8).unwrap();
        let q = |u: f64, v: f64, chi: f64| {
            quasi_energy(
                &ScalarField::constant(g, u),
                &ScalarField::constant(g, v),
                chi,
            )
            .unwrap()
        };
        assert_eq!(q(0.0, 1.0, 1.0), 0.0);
        assert!((q(E - 1.0, 1.0, 1.0) + 1.0).abs() < 1e-14);
        assert!((q(0.0, (-1.0f64).exp(), 2.0) - 4.0).abs() < 1e-14);
        assert!(quasi_energy(&ScalarField::constant(g, 1.0), &ScalarField::zeros(g), 1.0).is_err());
    }

    #[test]
    fn upvq_values() {
        let g = Grid::uniform_1d(1.0, 8).unwrap();
        let one = ScalarField::constant(g, 1.0);
        assert!((functional_upvq(&one, &one, 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!(
            (functional_upvq(&ScalarField::constant(g, 4.0), &one, 0.5, 1.0) - 2.0).abs() < 1e-15
        );
        let u = ScalarField::from_fn(g, |x| 1.0 + x[0]);
        let v = ScalarField::from_fn(g, |x| 2.0 - x[0]);
        let a = functional_upvq(&u.scaled(4.0), &v, 0.5, 0.3);
        let b = functional_upvq(&u, &v, 0.5, 0.3);
        assert!((a - 2.0 * b).abs() <= 1e-15 * a);
    }
}
