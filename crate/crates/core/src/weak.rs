//! Space-time test functions and weak-form residuals of linear signal
//! equations `v_t = Δv - r·v + s` with homogeneous Neumann data.

use crate::error::{Error, Result};
use crate::grid::{face_gradient, FaceField, FieldTrajectory, Grid, ScalarField};

/// Polynomial C² bump `(1 - t²)³` on `[-1, 1]`, zero outside.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - t * t).powi(3)
    }
}

pub fn bump_prime(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        -6.0 * t * (1.0 - t * t).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpatialProfile {
    Constant,
    /// Tensor product of `bump((x_a - c_a)/r_a)`; may overlap the boundary.
    Bump {
        center: [f64; 2],
        radius: [f64; 2],
    },
    /// `Π cos(m_a π x_a / L_a)`; Neumann-compatible and sign-changing.
    Cosine {
        modes: [u32; 2],
        extents: [f64; 2],
    },
}

impl SpatialProfile {
    fn factor(&self, a: usize, x: f64) -> f64 {
        match self {
            SpatialProfile::Constant => 1.0,
            SpatialProfile::Bump { center, radius } => bump((x - center[a]) / radius[a]),
            SpatialProfile::Cosine { modes, extents } => {
                (modes[a] as f64 * std::f64::consts::PI * x / extents[a]).cos()
            }
        }
    }

    fn factor_prime(&self, a: usize, x: f64) -> f64 {
        match self {
            SpatialProfile::Constant => 0.0,
            SpatialProfile::Bump { center, radius } => {
                bump_prime((x - center[a]) / radius[a]) / radius[a]
            }
            SpatialProfile::Cosine { modes, extents } => {
                let k = modes[a] as f64 * std::f64::consts::PI / extents[a];
                -k * (k * x).sin()
            }
        }
    }

    pub fn value(&self, dim: usize, x: [f64; 2]) -> f64 {
        (0..dim).map(|a| self.factor(a, x[a])).product()
    }

    pub fn partial(&self, dim: usize, axis: usize, x: [f64; 2]) -> f64 {
        (0..dim)
            .map(|a| {
                if a == axis {
                    self.factor_prime(a, x[a])
                } else {
                    self.factor(a, x[a])
                }
            })
            .product()
    }

    fn nonnegative(&self) -> bool {
        match self {
            SpatialProfile::Constant | SpatialProfile::Bump { .. } => true,
            SpatialProfile::Cosine { modes, .. } => modes.iter().all(|&m| m == 0),
        }
    }
}

/// `bump((t - center)/radius)`, supported in `[center - radius, center + radius]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeProfile {
    pub center: f64,
    pub radius: f64,
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        bump((t - self.center) / self.radius)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        bump_prime((t - self.center) / self.radius) / self.radius
    }

    pub fn support_end(&self) -> f64 {
        self.center + self.radius
    }
}

/// `φ(x, t) = amplitude · X(x) · τ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub spatial: SpatialProfile,
    pub temporal: TimeProfile,
    pub amplitude: f64,
}

impl TestFunction {
    pub fn is_nonnegative(&self) -> bool {
        self.amplitude >= 0.0 && self.spatial.nonnegative()
    }

    pub fn value(&self, dim: usize, x: [f64; 2], t: f64) -> f64 {
        self.amplitude * self.spatial.value(dim, x) * self.temporal.value(t)
    }

    pub(crate) fn cells(&self, g: &Grid) -> ScalarField {
        ScalarField::from_fn(*g, |x| self.amplitude * self.spatial.value(g.dim(), x))
    }

    pub(crate) fn analytic_gradient(&self, g: &Grid) -> FaceField {
        FaceField::from_fn(*g, |a, x| {
            self.amplitude * self.spatial.partial(g.dim(), a, x)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionSet {
    members: Vec<TestFunction>,
    t_end: f64,
}

impl TestFunctionSet {
    /// Every member must vanish for `t >= t_end - dt`.
    pub fn new(members: Vec<TestFunction>, t_end: f64, dt: f64) -> Result<Self> {
        for (i, m) in members.iter().enumerate() {
            if !(m.temporal.radius > 0.0) || m.temporal.support_end() > t_end - dt + 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "test function {i} does not vanish for t >= T - dt"
                )));
            }
        }
        Ok(Self { members, t_end })
    }

    /// A deterministic mix of sign-changing cosine modes and nonnegative
    /// bumps, paired with start-anchored and interior time profiles.
    pub fn standard(grid: &Grid, t_end: f64, dt: f64, count: usize) -> Result<Self> {
        Self::build(grid, t_end, dt, count, false)
    }

    /// Nonnegative members only, as required by supersolution checks.
    pub fn nonnegative(grid: &Grid, t_end: f64, dt: f64, count: usize) -> Result<Self> {
        Self::build(grid, t_end, dt, count, true)
    }

    fn build(grid: &Grid, t_end: f64, dt: f64, count: usize, nonneg: bool) -> Result<Self> {
        let span = t_end - dt;
        if !(span > 0.0) {
            return Err(Error::InvalidArgument(
                "horizon shorter than one step".into(),
            ));
        }
        let d = grid.dim();
        let ext = [
            grid.extents()[0],
            if d == 2 { grid.extents()[1] } else { 1.0 },
        ];
        let times = [
            TimeProfile {
                center: 0.0,
                radius: span,
            },
            TimeProfile {
                center: 0.5 * span,
                radius: 0.5 * span,
            },
            TimeProfile {
                center: 0.0,
                radius: 0.5 * span,
            },
            TimeProfile {
                center: 0.6 * span,
                radius: 0.4 * span,
            },
        ];
        let fractions = [0.0, 0.5, 0.25, 0.8, 1.0, 0.6, 0.35, 0.1];
        let mut spatial = Vec::new();
        spatial.push(SpatialProfile::Constant);
        let mut k = 0usize;
        while spatial.len() < count {
            let fx = fractions[k % fractions.len()];
            let fy = fractions[(k * 3 + 1) % fractions.len()];
            let r = 0.3 + 0.2 * ((k % 3) as f64);
            spatial.push(SpatialProfile::Bump {
                center: [fx * ext[0], fy * ext[1]],
                radius: [r * ext[0], r * ext[1]],
            });
            if !nonneg && spatial.len() < count {
                let m = (k as u32 % 3) + 1;
                let modes = if d == 2 { [m, (k as u32) % 2] } else { [m, 0] };
                spatial.push(SpatialProfile::Cosine {
                    modes,
                    extents: ext,
                });
            }
            k += 1;
        }
        spatial.truncate(count);
        let members = spatial
            .into_iter()
            .enumerate()
            .map(|(i, s)| TestFunction {
                spatial: s,
                temporal: times[i % times.len()],
                amplitude: 1.0,
            })
            .collect();
        Self::new(members, t_end, dt)
    }

    pub fn members(&self) -> &[TestFunction] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn scaled(&self, a: f64) -> Self {
        let members = self
            .members
            .iter()
            .map(|m| TestFunction {
                amplitude: m.amplitude * a,
                ..m.clone()
            })
            .collect();
        Self {
            members,
            t_end: self.t_end,
        }
    }

    pub fn all_nonnegative(&self) -> bool {
        self.members.iter().all(TestFunction::is_nonnegative)
    }
}

/// Coefficient of a linear equation, constant or given per frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Uniform(f64),
    Steady(ScalarField),
    Frames(Vec<ScalarField>),
}

impl Coefficient {
    fn at(&self, n: usize, c: usize) -> f64 {
        match self {
            Coefficient::Uniform(a) => *a,
            Coefficient::Steady(f) => f.values()[c],
            Coefficient::Frames(fr) => fr[n].values()[c],
        }
    }

    /// `∫ coef_n · w · X`.
    fn weighted(&self, n: usize, w: &[f64], x: &[f64], vol: f64) -> f64 {
        (0..w.len())
            .map(|c| self.at(n, c) * w[c] * x[c])
            .sum::<f64>()
            * vol
    }

    fn integral(&self, n: usize, x: &[f64], vol: f64) -> f64 {
        (0..x.len()).map(|c| self.at(n, c) * x[c]).sum::<f64>() * vol
    }
}

/// How a time step couples the unknown to the coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// θ-blend of frames `n` and `n+1` for every term (linear heat scheme).
    Blend { theta: f64 },
    /// Coefficients frozen at frame `n`, unknown taken at frame `n+1`
    /// (the semi-implicit chemotaxis signal update).
    Lagged,
}

/// `v_t = Δv - decay·v + source`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalEquation {
    pub decay: Coefficient,
    pub source: Coefficient,
    pub coupling: Coupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakQuadrature {
    /// Summation by parts in time with the stepper's own coupling and the
    /// face gradient of the sampled test function. A trajectory produced by
    /// the matching scheme satisfies it up to round-off.
    Scheme,
    /// Left-endpoint quadrature with analytic derivatives of the test
    /// function; consistent with the continuum weak form to `O(dt + h²)`.
    Analytic,
}

/// Both sides of the weak identity for one test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakTerms {
    pub lhs: f64,
    pub rhs: f64,
    /// Magnitude of the individual contributions; residuals are judged
    /// relative to it.
    pub scale: f64,
}

impl WeakTerms {
    pub fn residual(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Weak identity
/// `-∫∫ v φ_t - ∫ v₀ φ(0) = ∫∫ (-∇v·∇φ - r v φ + s φ)`
/// evaluated on a trajectory for every member of `tests`.
pub fn weak_terms(
    traj: &FieldTrajectory,
    eq: &SignalEquation,
    tests: &TestFunctionSet,
    quad: WeakQuadrature,
) -> Result<Vec<WeakTerms>> {
    let g = *traj.grid();
    let m = traj.steps();
    if let Coefficient::Frames(f) = &eq.decay {
        if f.len() < m + 1 {
            return Err(Error::FieldMismatch(
                "decay coefficient has too few frames".into(),
            ));
        }
    }
    if let Coefficient::Frames(f) = &eq.source {
        if f.len() < m + 1 {
            return Err(Error::FieldMismatch(
                "source coefficient has too few frames".into(),
            ));
        }
    }
    let grads: Vec<FaceField> = traj.frames().iter().map(face_gradient).collect();
    let dt = traj.dt();
    let vol = g.cell_volume();
    Ok(tests
        .members()
        .iter()
        .map(|tf| {
            let x = tf.cells(&g);
            let xv = x.values();
            let gx = match quad {
                WeakQuadrature::Scheme => face_gradient(&x),
                WeakQuadrature::Analytic => tf.analytic_gradient(&g),
            };
            let tau: Vec<f64> = (0..=m).map(|n| tf.temporal.value(traj.time(n))).collect();
            let l: Vec<f64> = traj
                .frames()
                .iter()
                .map(|v| inner_raw(v.values(), xv) * vol)
                .collect();
            let d: Vec<f64> = grads
                .iter()
                .map(|gv| gv.weighted_sum(|a, k, val| val * gx.axis(a)[k]))
                .collect();
            let s: Vec<f64> = (0..=m).map(|n| eq.source.integral(n, xv, vol)).collect();
            let mut lhs = -l[0] * tau[0];
            let mut lhs_scale = lhs.abs();
            let mut rhs = 0.0;
            let mut rhs_scale = 0.0;
            for n in 0..m {
                match quad {
                    WeakQuadrature::Scheme => {
                        let dl = -l[n] * (tau[n + 1] - tau[n]);
                        lhs += dl;
                        lhs_scale += dl.abs();
                        if tau[n + 1] == 0.0 {
                            continue;
                        }
                        let (diff, reac, src) = match eq.coupling {
                            Coupling::Blend { theta } => {
                                let r_new =
                                    eq.decay
                                        .weighted(n + 1, traj.frame(n + 1).values(), xv, vol);
                                let r_old = eq.decay.weighted(n, traj.frame(n).values(), xv, vol);
                                (
                                    theta * d[n + 1] + (1.0 - theta) * d[n],
                                    theta * r_new + (1.0 - theta) * r_old,
                                    theta * s[n + 1] + (1.0 - theta) * s[n],
                                )
                            }
                            Coupling::Lagged => (
                                d[n + 1],
                                eq.decay.weighted(n, traj.frame(n + 1).values(), xv, vol),
                                s[n],
                            ),
                        };
                        let w = dt * tau[n + 1];
                        rhs += w * (-diff - reac + src);
                        rhs_scale += w.abs() * (diff.abs() + reac.abs() + src.abs());
                    }
                    WeakQuadrature::Analytic => {
                        let t = traj.time(n);
                        let dl = -dt * l[n] * tf.temporal.derivative(t);
                        lhs += dl;
                        lhs_scale += dl.abs();
                        let reac = eq.decay.weighted(n, traj.frame(n).values(), xv, vol);
                        let w = dt * tau[n];
                        rhs += w * (-d[n] - reac + s[n]);
                        rhs_scale += w.abs() * (d[n].abs() + reac.abs() + s[n].abs());
                    }
                }
            }
            WeakTerms {
                lhs,
                rhs,
                scale: lhs_scale.max(rhs_scale),
            }
        })
        .collect())
}

fn inner_raw(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_is_c2_at_edge() {
        let e = 1e-6;
        assert!(bump(1.0 - e) < 1e-15);
        assert!(bump_prime(1.0 - e).abs() < 1e-10);
        // Central difference of the derivative oracle.
        for t in [-0.7, -0.2, 0.0, 0.4, 0.9] {
            let fd = (bump(t + 1e-6) - bump(t - 1e-6)) / 2e-6;
            assert!((fd - bump_prime(t)).abs() < 1e-8);
        }
    }

    #[test]
    fn standard_set_vanishes_near_horizon() {
        let g = Grid::unit_square(8).unwrap();
        let set = TestFunctionSet::standard(&g, 1.0, 0.01, 10).unwrap();
        assert_eq!(set.len(), 10);
        for m in set.members() {
            assert_eq!(m.value(2, [0.3, 0.3], 0.99), 0.0);
        }
        assert!(!set.all_nonnegative());
        let pos = TestFunctionSet::nonnegative(&g, 1.0, 0.01, 7).unwrap();
        assert!(pos.all_nonnegative());
    }

    #[test]
    fn rejects_late_support() {
        let tf = TestFunction {
            spatial: SpatialProfile::Constant,
            temporal: TimeProfile {
                center: 0.5,
                radius: 0.5,
            },
            amplitude: 1.0,
        };
        assert!(TestFunctionSet::new(vec![tf], 1.0, 0.1).is_err());
    }
}
