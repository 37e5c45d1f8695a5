//! Truncations, weighted gradient energies and dual-norm surrogates over
//! trajectories. Gradient energies integrate the frames `1..=M` (the frames a
//! backward-Euler step dissipates on); face weights are evaluated at the
//! face average of the two neighbouring cell values.

mod landes;
mod phi;

pub use landes::{landes_apply, landes_sigma_ladder, verify_landes, LandesReport};
pub use phi::{
    build_dlvp_phi, check_knots, young_constant, young_margin, KnotCheck, OrliczFamily, PhiBuild,
    PhiFunction, YoungConstant, DLVP_LADDER,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{face_gradient, l1_norm, FaceField, FieldTrajectory, Grid, ScalarField};
use crate::heat::HeatProblem;

/// `T_k(s) = max(-k, min(k, s))`.
pub fn truncate(s: f64, k: f64) -> f64 {
    s.clamp(-k, k)
}

/// `S_k(s) = ∫_0^s T_k`.
pub fn sk(s: f64, k: f64) -> f64 {
    let a = s.abs();
    if a <= k {
        0.5 * s * s
    } else {
        k * a - 0.5 * k * k
    }
}

pub fn truncate_field(z: &ScalarField, k: f64) -> ScalarField {
    z.map(|s| truncate(s, k))
}

/// `∫ S_k(z)`.
pub fn sk_integral(z: &ScalarField, k: f64) -> f64 {
    z.values().iter().map(|&s| sk(s, k)).sum::<f64>() * z.grid().cell_volume()
}

fn check_level(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "truncation level must be positive, got {k}"
        )))
    }
}

/// Average of the two cell values adjacent to each face.
pub(crate) fn face_average(z: &ScalarField) -> FaceField {
    let g = *z.grid();
    let v = z.values();
    FaceField::zeros(g).map_faces(|a, k, _| {
        let (l, r) = g.face_cells(a, k);
        0.5 * (v[l] + v[r])
    })
}

impl FaceField {
    pub(crate) fn map_faces(mut self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        for a in 0..self.grid().dim() {
            let vals = self.axis_mut(a);
            for (k, x) in vals.iter_mut().enumerate() {
                *x = f(a, k, *x);
            }
        }
        self
    }
}

/// `∫ w(z_f)·|∇z|²` for one frame, `w` evaluated at face averages.
pub(crate) fn weighted_energy(z: &ScalarField, w: impl Fn(f64) -> f64) -> f64 {
    let grad = face_gradient(z);
    let avg = face_average(z);
    grad.weighted_sum(|a, k, g| w(avg.axis(a)[k]) * g * g)
}

fn implicit_sum(traj: &FieldTrajectory, f: impl Fn(&ScalarField) -> f64) -> f64 {
    traj.frames()[1..].iter().map(f).sum::<f64>() * traj.dt()
}

/// `∫∫ |∇T_k v|²`.
pub fn truncated_gradient_energy(traj: &FieldTrajectory, k: f64) -> Result<f64> {
    check_level(k)?;
    Ok(implicit_sum(traj, |z| {
        face_gradient(&truncate_field(z, k)).energy()
    }))
}

/// `∫∫ |∇v|² / (1 + |v|)^{1+α}`.
pub fn weighted_gradient_energy(traj: &FieldTrajectory, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    Ok(implicit_sum(traj, |z| {
        weighted_energy(z, |s| (1.0 + s.abs()).powf(-1.0 - alpha))
    }))
}

/// Convex weight `ψ` used in the Orlicz-type gradient estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsiSpec {
    /// `ψ(s) = (s + shift)^p`, `p >= 1`, `shift >= 0`.
    Power { exponent: f64, shift: f64 },
    /// `ψ''` piecewise linear through `(knots[i], second[i])`, constant beyond
    /// the last knot; `ψ(0)` and `ψ'(0)` fix the integration constants.
    Tabulated {
        knots: Vec<f64>,
        second: Vec<f64>,
        value0: f64,
        slope0: f64,
    },
}

impl PsiSpec {
    pub fn quadratic_shifted() -> Self {
        PsiSpec::Power {
            exponent: 2.0,
            shift: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PsiSpec::Power { exponent, shift } => {
                if !(*exponent >= 1.0 && exponent.is_finite()) || !(*shift >= 0.0) {
                    return Err(Error::InvalidArgument(
                        "power psi needs exponent >= 1 and shift >= 0".into(),
                    ));
                }
                if *exponent < 2.0 && *shift == 0.0 && *exponent != 1.0 {
                    return Err(Error::InvalidArgument(
                        "power psi with exponent in (1,2) needs a positive shift".into(),
                    ));
                }
                Ok(())
            }
            PsiSpec::Tabulated { knots, second, .. } => {
                if knots.len() < 2 || knots.len() != second.len() {
                    return Err(Error::InvalidArgument(
                        "tabulated psi needs matching knots and values".into(),
                    ));
                }
                if knots[0] != 0.0 || knots.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidArgument(
                        "tabulated psi knots must start at 0 and increase".into(),
                    ));
                }
                if second.iter().any(|&s| !(s >= 0.0)) {
                    return Err(Error::InvalidArgument(
                        "tabulated psi must be convex".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// `(ψ, ψ', ψ'')` at `s >= 0`; negative arguments are clamped to zero.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        let s = s.max(0.0);
        match self {
            PsiSpec::Power { exponent: p, shift } => {
                let b = s + shift;
                let d2 = if *p == 1.0 {
                    0.0
                } else {
                    p * (p - 1.0) * b.powf(p - 2.0)
                };
                (b.powf(*p), p * b.powf(p - 1.0), d2)
            }
            PsiSpec::Tabulated {
                knots,
                second,
                value0,
                slope0,
            } => {
                let (mut v, mut d) = (*value0, *slope0);
                for i in 0..knots.len() {
                    let (x0, f0) = (knots[i], second[i]);
                    let (x1, f1) = if i + 1 < knots.len() {
                        (knots[i + 1], second[i + 1])
                    } else {
                        (f64::INFINITY, f0)
                    };
                    let slope = if x1.is_finite() {
                        (f1 - f0) / (x1 - x0)
                    } else {
                        0.0
                    };
                    let t = s.min(x1) - x0;
                    // ψ'' = f0 + slope·τ on [x0, x1].
                    let dd = f0 + slope * t;
                    let nv = v + d * t + 0.5 * f0 * t * t + slope * t * t * t / 6.0;
                    let nd = d + f0 * t + 0.5 * slope * t * t;
                    if s <= x1 {
                        return (nv, nd, dd);
                    }
                    v = nv;
                    d = nd;
                }
                unreachable!()
            }
        }
    }
}

/// `∫∫ ψ''(v)|∇v|²`.
pub fn psi_weighted_energy(traj: &FieldTrajectory, psi: &PsiSpec) -> Result<f64> {
    psi.validate()?;
    Ok(implicit_sum(traj, |z| {
        weighted_energy(z, |s| psi.eval(s).2)
    }))
}

/// Upper end of the admissible range `[1, (d+2)/(d+1))` for gradient norms.
pub fn lambda_limit(dim: usize) -> f64 {
    (dim as f64 + 2.0) / (dim as f64 + 1.0)
}

pub fn check_lambda(lambda: f64, dim: usize) -> Result<()> {
    if lambda >= 1.0 && lambda < lambda_limit(dim) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "λ = {lambda} outside λ ∈ [1, (n+2)/(n+1)) = [1, {:.6}) for n = {dim}",
            lambda_limit(dim)
        )))
    }
}

/// `‖∇v‖_{L^λ(Ω×(0,T))}` with the per-cell magnitude reconstructed from the
/// bounding faces.
pub fn grad_lambda_norm(traj: &FieldTrajectory, lambda: f64) -> Result<f64> {
    check_lambda(lambda, traj.grid().dim())?;
    let vol = traj.grid().cell_volume();
    let s = implicit_sum(traj, |z| {
        face_gradient(z)
            .cell_magnitude_sq()
            .iter()
            .map(|m| m.powf(0.5 * lambda))
            .sum::<f64>()
            * vol
    });
    Ok(s.powf(1.0 / lambda))
}

/// Dictionary of Lipschitz test functions: constants, coordinate ramps and
/// cosine modes up to 8 per axis, each sampled at cells.
pub fn dual_dictionary(grid: &Grid) -> Vec<ScalarField> {
    let d = grid.dim();
    let ext = grid.extents().to_vec();
    let mut out = vec![ScalarField::constant(*grid, 1.0)];
    for a in 0..d {
        let l = ext[a];
        out.push(ScalarField::from_fn(*grid, move |x| x[a] / l));
        for m in 1..=8 {
            let k = m as f64 * std::f64::consts::PI / l;
            out.push(ScalarField::from_fn(*grid, move |x| (k * x[a]).cos()));
        }
    }
    if d == 2 {
        for m in 1..=4 {
            let kx = m as f64 * std::f64::consts::PI / ext[0];
            let ky = m as f64 * std::f64::consts::PI / ext[1];
            out.push(ScalarField::from_fn(*grid, move |x| {
                (kx * x[0]).cos() * (ky * x[1]).cos()
            }));
        }
    }
    // Normalize to unit W^{1,∞} size measured on the discrete grid.
    out.into_iter()
        .map(|phi| {
            let n = phi
                .values()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(face_gradient(&phi).linf());
            phi.scaled(1.0 / n)
        })
        .collect()
}

/// `Σ_n dt · max_φ |∫ (z_{n+1} - z_n)/dt · φ|`, a lower surrogate for the
/// `L¹(0,T; (W^{1,∞})*)` norm of `z_t`.
pub fn dual_time_derivative_surrogate(traj: &FieldTrajectory) -> f64 {
    let dict = dual_dictionary(traj.grid());
    let vol = traj.grid().cell_volume();
    (0..traj.steps())
        .map(|n| {
            let (a, b) = (traj.frame(n).values(), traj.frame(n + 1).values());
            dict.iter()
                .map(|phi| {
                    (0..a.len())
                        .map(|c| (b[c] - a[c]) * phi.values()[c])
                        .sum::<f64>()
                        .abs()
                        * vol
                })
                .fold(0.0, f64::max)
        })
        .sum()
}

/// `‖∇z‖_{L¹} + ‖f‖_{L¹} + |κ|‖z‖_{L¹}` over the run, θ-blended like the
/// stepper, with the anisotropic face `L¹` norm of the gradient.
pub fn dual_surrogate_bound(traj: &FieldTrajectory, problem: &HeatProblem, theta: f64) -> f64 {
    let g = *traj.grid();
    let m = traj.steps();
    let grad: Vec<f64> = traj
        .frames()
        .iter()
        .map(|z| face_gradient(z).l1())
        .collect();
    let l1: Vec<f64> = traj.frames().iter().map(l1_norm).collect();
    let blend = |v: &[f64]| {
        (0..m)
            .map(|n| theta * v[n + 1] + (1.0 - theta) * v[n])
            .sum::<f64>()
            * traj.dt()
    };
    blend(&grad)
        + problem.source.l1_norm(&g, traj.dt(), m, theta)
        + problem.kappa.abs() * blend(&l1)
}

/// Bound `4/(1 - 2^{-α})` multiplying the data size in the weighted
/// gradient estimate.
pub fn weighted_energy_constant(alpha: f64) -> f64 {
    4.0 / (1.0 - 2f64.powf(-alpha))
}
