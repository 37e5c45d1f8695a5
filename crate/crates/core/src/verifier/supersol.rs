//! Generalized-supersolution inequalities of the chemotaxis systems,
//! evaluated with the same time coupling as the stepper: gradient terms at
//! the new frame, reaction and production terms at the old one.

use rayon::prelude::*;
use serde::Serialize;

use super::{EstimateReport, InputDigest, Relation};
use crate::chemotaxis::{ChemoRun, Variant};
use crate::error::{Error, Result};
use crate::functionals::face_average;
use crate::grid::{face_gradient, FaceField, Grid, ScalarField};
use crate::tolerances::{self, budget};
use crate::weak::{TestFunction, TestFunctionSet};

const K: f64 = 35.0 / 32.0;

/// Smooth step `P(t) = ∫_{-1}^t (35/32)(1 - s²)³ ds`, 0 below -1, 1 above 1.
fn step(t: f64) -> f64 {
    if t <= -1.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let t2 = t * t;
        K * t * (1.0 - t2 + 0.6 * t2 * t2 - t2 * t2 * t2 / 7.0) + 0.5
    }
}

fn step_d1(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        K * (1.0 - t * t).powi(3)
    }
}

fn step_d2(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        -6.0 * K * t * (1.0 - t * t).powi(2)
    }
}

/// `Q(t) = ∫_{-1}^t P`, so that `Q(t) = t` for `t >= 1`.
fn step_integral(t: f64) -> f64 {
    if t <= -1.0 {
        0.0
    } else if t >= 1.0 {
        t
    } else {
        let t2 = t * t;
        K * (0.5 * t2 - 0.25 * t2 * t2 + 0.1 * t2 * t2 * t2 - t2 * t2 * t2 * t2 / 56.0
            + 16.0 * t / 35.0)
            + 35.0 / 256.0
    }
}

/// `φ(u, v) = B(u)·C(v)` where `B'' = -ρ` with `ρ` a unit-mass bump on
/// `[u_center ± u_width]`, `B(s) = s - u_center` below the bump and `0`
/// above it, and `C(v) = 1 - P((v - v_center)/v_width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiMember {
    pub u_center: f64,
    pub u_width: f64,
    pub v_center: f64,
    pub v_width: f64,
}

/// `(φ, φ_u, φ_v, φ_uu, φ_uv, φ_vv)`.
pub type PhiJet = [f64; 6];

impl PhiMember {
    fn b(&self, s: f64) -> (f64, f64, f64) {
        let w = self.u_width;
        let t = (s - self.u_center) / w;
        (-w * (step_integral(t) - t), 1.0 - step(t), -step_d1(t) / w)
    }

    fn c(&self, v: f64) -> (f64, f64, f64) {
        let w = self.v_width;
        let t = (v - self.v_center) / w;
        (1.0 - step(t), -step_d1(t) / w, -step_d2(t) / (w * w))
    }

    pub fn jet(&self, u: f64, v: f64) -> PhiJet {
        let (b, b1, b2) = self.b(u);
        let (c, c1, c2) = self.c(v);
        [b * c, b1 * c, b * c1, b2 * c, b1 * c1, b * c2]
    }

    pub fn value(&self, u: f64, v: f64) -> f64 {
        self.b(u).0 * self.c(v).0
    }

    /// Corner beyond which `Dφ` vanishes.
    pub fn support_corner(&self) -> (f64, f64) {
        (self.u_center + self.u_width, self.v_center + self.v_width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiSupersolFamily {
    members: Vec<PhiMember>,
}

impl PhiSupersolFamily {
    /// Validates `φ_uu <= 0` on a 200² sample of `[0, 2a]×[0, 2b]` and that
    /// `Dφ` vanishes at and beyond the support corner `(a, b)`.
    pub fn new(members: Vec<PhiMember>) -> Result<Self> {
        for (i, m) in members.iter().enumerate() {
            if !(m.u_width > 0.0 && m.v_width > 0.0)
                || ![m.u_center, m.v_center].iter().all(|x| x.is_finite())
            {
                return Err(Error::InvalidArgument(format!(
                    "member {i}: widths must be positive"
                )));
            }
            let (a, b) = m.support_corner();
            for p in 0..200 {
                for q in 0..200 {
                    let j = m.jet(
                        2.0 * a.max(0.0) * p as f64 / 199.0,
                        2.0 * b.max(0.0) * q as f64 / 199.0,
                    );
                    if j[3] > 0.0 {
                        return Err(Error::InvalidArgument(format!("member {i}: φ_uu > 0")));
                    }
                }
            }
            for (x, y) in [
                (a, b),
                (a + 1.0, b),
                (a, b + 1.0),
                (2.0 * a + 1.0, 2.0 * b + 1.0),
            ] {
                if m.jet(x, y)[1..].iter().any(|d| *d != 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "member {i}: Dφ does not vanish at ({x}, {y})"
                    )));
                }
            }
        }
        Ok(Self { members })
    }

    /// Six members scaled to a solution range `[0, u_max]×[0, v_max]`: two
    /// with `C ≡ 1` on the range and four whose `C` varies across it.
    pub fn standard(u_max: f64, v_max: f64) -> Result<Self> {
        let (u, v) = (u_max.max(0.1), v_max.max(0.1));
        let plateau = (2.0 * v + 1.0, v + 0.5);
        let m = |uc: f64, uw: f64, (vc, vw): (f64, f64)| PhiMember {
            u_center: uc,
            u_width: uw,
            v_center: vc,
            v_width: vw,
        };
        Self::new(vec![
            m(0.5 * u, 0.5 * u, plateau),
            m(u, 0.5 * u, plateau),
            m(0.5 * u, 0.5 * u, (0.5 * v, 0.5 * v)),
            m(u, u, (v, 0.5 * v)),
            m(0.25 * u, 0.25 * u, (0.75 * v, 0.5 * v)),
            m(1.5 * u, u, (v, v)),
        ])
    }

    /// Members with `C ≡ 1` on `[0, v_max]`; `φ` is then concave.
    pub fn plateau(u_max: f64, v_max: f64) -> Result<Self> {
        let (u, v) = (u_max.max(0.1), v_max.max(0.1));
        Self::new(
            [(0.5, 0.5), (1.0, 0.5), (1.0, 1.0)]
                .iter()
                .map(|&(c, w)| PhiMember {
                    u_center: c * u,
                    u_width: w * u,
                    v_center: 2.0 * v + 1.0,
                    v_width: v + 0.5,
                })
                .collect(),
        )
    }

    pub fn members(&self) -> &[PhiMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Per-frame geometry shared by all members and tests.
struct Frame {
    u: ScalarField,
    v: ScalarField,
    uf: FaceField,
    vf: FaceField,
    gu: FaceField,
    gv: FaceField,
}

impl Frame {
    fn new(u: &ScalarField, v: &ScalarField) -> Self {
        Self {
            u: u.clone(),
            v: v.clone(),
            uf: face_average(u),
            vf: face_average(v),
            gu: face_gradient(u),
            gv: face_gradient(v),
        }
    }
}

/// Step integrand split as `∫_faces (A·X + B·∂X) + ∫_cells C·X`.
struct StepTerms {
    a: FaceField,
    b: FaceField,
    c: Vec<f64>,
}

/// Test function sampled at cells, faces, and its face-normal derivative.
struct SampledTest {
    cells: Vec<f64>,
    faces: FaceField,
    grad: FaceField,
}

impl SampledTest {
    fn new(tf: &TestFunction, g: &Grid) -> Self {
        let d = g.dim();
        Self {
            cells: tf.cells(g).into_values(),
            faces: FaceField::from_fn(*g, |_, x| tf.amplitude * tf.spatial.value(d, x)),
            grad: tf.analytic_gradient(g),
        }
    }

    /// `(∫A·X + ∫B·∂X + ∫C·X, |∫A·X| + |∫B·∂X| + |∫C·X|)`.
    fn pair(&self, t: &StepTerms, vol: f64) -> (f64, f64) {
        let fa = t.a.weighted_sum(|a, k, x| x * self.faces.axis(a)[k]);
        let fb = t.b.weighted_sum(|a, k, x| x * self.grad.axis(a)[k]);
        let fc = t.c.iter().zip(&self.cells).map(|(x, y)| x * y).sum::<f64>() * vol;
        (fa + fb + fc, fa.abs() + fb.abs() + fc.abs())
    }
}

/// Both sides of `-Σ∫Φ_n X Δτ - ∫Φ_0 X τ_0 >= Σ dt τ_{n+1} R_{n+1}` for one
/// test, where `Φ_n` are cell values of the composed quantity.
fn sides(
    run: &ChemoRun,
    tf: &TestFunction,
    st: &SampledTest,
    composed: &[Vec<f64>],
    steps: &[StepTerms],
) -> (f64, f64, f64) {
    let g = run.u.grid();
    let vol = g.cell_volume();
    let dt = run.dt();
    let m = run.u.steps();
    let tau: Vec<f64> = (0..=m).map(|n| tf.temporal.value(run.u.time(n))).collect();
    let ints: Vec<f64> = composed
        .iter()
        .map(|p| p.iter().zip(&st.cells).map(|(a, b)| a * b).sum::<f64>() * vol)
        .collect();
    let mut lhs = -ints[0] * tau[0];
    let mut scale = lhs.abs();
    let mut rhs = 0.0;
    for n in 0..m {
        let d = -ints[n] * (tau[n + 1] - tau[n]);
        lhs += d;
        scale += d.abs();
        if tau[n + 1] != 0.0 {
            let (r, s) = st.pair(&steps[n], vol);
            rhs += dt * tau[n + 1] * r;
            scale += dt * tau[n + 1].abs() * s;
        }
    }
    (lhs, rhs, scale)
}

fn require_nonnegative(tests: &TestFunctionSet) -> Result<()> {
    if tests.all_nonnegative() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "supersolution checks need nonnegative test functions".into(),
        ))
    }
}

fn frames(run: &ChemoRun) -> Vec<Frame> {
    run.u
        .frames()
        .par_iter()
        .zip(run.v.frames().par_iter())
        .map(|(u, v)| Frame::new(u, v))
        .collect()
}

/// `φ`-supersolution inequality of system A for every (member, test) pair.
pub fn check_phi_supersolution(
    run: &ChemoRun,
    family: &PhiSupersolFamily,
    tests: &TestFunctionSet,
) -> Result<Vec<EstimateReport>> {
    if run.system.variant != Variant::A {
        return Err(Error::InvalidArgument(
            "φ-supersolution checks apply to system A runs".into(),
        ));
    }
    require_nonnegative(tests)?;
    let g = *run.u.grid();
    let eps = run.system.eps;
    let fr = frames(run);
    let sampled: Vec<SampledTest> = tests
        .members()
        .iter()
        .map(|t| SampledTest::new(t, &g))
        .collect();
    let base = super::chemo::run_digest(run);
    let (dt, h) = (run.dt(), g.h_max());

    let per_member: Vec<Vec<EstimateReport>> = family
        .members()
        .par_iter()
        .enumerate()
        .map(|(i, phi)| {
            let composed: Vec<Vec<f64>> = fr
                .iter()
                .map(|f| {
                    f.u.values()
                        .iter()
                        .zip(f.v.values())
                        .map(|(&a, &b)| phi.value(a, b))
                        .collect()
                })
                .collect();
            let steps: Vec<StepTerms> = (0..run.u.steps())
                .map(|n| {
                    let (old, new) = (&fr[n], &fr[n + 1]);
                    let jet = |a: usize, k: usize| phi.jet(new.uf.axis(a)[k], new.vf.axis(a)[k]);
                    let a_terms = new.gu.clone().map_faces(|a, k, du| {
                        let [_, _, _, puu, puv, pvv] = jet(a, k);
                        let (uf, dv) = (new.uf.axis(a)[k], new.gv.axis(a)[k]);
                        -puu * du * du
                            - (pvv - uf * puv) * dv * dv
                            - (2.0 * puv - uf * puu) * du * dv
                    });
                    let b_terms = new.gu.clone().map_faces(|a, k, du| {
                        let [_, pu, pv, ..] = jet(a, k);
                        let (uf, dv) = (new.uf.axis(a)[k], new.gv.axis(a)[k]);
                        -pu * du - (pv - uf * pu) * dv
                    });
                    let c_terms = (0..g.n_cells())
                        .map(|c| {
                            let (un, uu, vv) =
                                (old.u.values()[c], new.u.values()[c], new.v.values()[c]);
                            let j = phi.jet(uu, vv);
                            run.system.g(un) * j[1] - vv * j[2] + un / (1.0 + eps * un) * j[2]
                        })
                        .collect();
                    StepTerms {
                        a: a_terms,
                        b: b_terms,
                        c: c_terms,
                    }
                })
                .collect();
            tests
                .members()
                .iter()
                .zip(&sampled)
                .enumerate()
                .map(|(j, (tf, st))| {
                    let (lhs, rhs, scale) = sides(run, tf, st, &composed, &steps);
                    let id = format!("phi_supersolution[member={i},test={j}]");
                    let digest = InputDigest::new()
                        .text(&base)
                        .text(&id)
                        .numbers(&[
                            phi.u_center,
                            phi.u_width,
                            phi.v_center,
                            phi.v_width,
                            tf.amplitude,
                        ])
                        .hex();
                    EstimateReport::new(
                        id,
                        Relation::Ge,
                        lhs,
                        rhs,
                        budget(scale, tolerances::C_SUPER_PHI, dt, h),
                        digest,
                    )
                    .with_note(format!(
                        "B bump [{:?} ± {:?}], C step [{:?} ± {:?}]",
                        phi.u_center, phi.u_width, phi.v_center, phi.v_width
                    ))
                })
                .collect()
        })
        .collect();
    Ok(per_member.into_iter().flatten().collect())
}

/// `ln(u+1)`-supersolution inequality of systems B and C, one report per
/// test function.
pub fn check_ln_supersolution(
    run: &ChemoRun,
    tests: &TestFunctionSet,
) -> Result<Vec<EstimateReport>> {
    if run.system.variant == Variant::A {
        return Err(Error::InvalidArgument(
            "ln-supersolution checks apply to system B and C runs".into(),
        ));
    }
    require_nonnegative(tests)?;
    let g = *run.u.grid();
    let (chi, eps) = (run.system.chi, run.system.eps);
    let fr = frames(run);
    let composed: Vec<Vec<f64>> = fr
        .iter()
        .map(|f| f.u.values().iter().map(|x| x.ln_1p()).collect())
        .collect();
    let steps: Vec<StepTerms> = (0..run.u.steps())
        .into_par_iter()
        .map(|n| {
            let (old, new) = (&fr[n], &fr[n + 1]);
            let taxis = |a: usize, k: usize| {
                let (uf, vf) = (new.uf.axis(a)[k], new.vf.axis(a)[k]);
                chi * uf / ((1.0 + eps * uf) * (uf + 1.0) * vf)
            };
            let a_terms = new.gu.clone().map_faces(|a, k, du| {
                let w = 1.0 / (new.uf.axis(a)[k] + 1.0);
                du * du * w * w - taxis(a, k) * w * du * new.gv.axis(a)[k]
            });
            let b_terms = new.gu.clone().map_faces(|a, k, du| {
                let w = 1.0 / (new.uf.axis(a)[k] + 1.0);
                -du * w + taxis(a, k) * new.gv.axis(a)[k]
            });
            let c_terms = (0..g.n_cells())
                .map(|c| run.system.g(old.u.values()[c]) / (new.u.values()[c] + 1.0))
                .collect();
            StepTerms {
                a: a_terms,
                b: b_terms,
                c: c_terms,
            }
        })
        .collect();
    let base = super::chemo::run_digest(run);
    let (dt, h) = (run.dt(), g.h_max());
    Ok(tests
        .members()
        .iter()
        .enumerate()
        .map(|(j, tf)| {
            let st = SampledTest::new(tf, &g);
            let (lhs, rhs, scale) = sides(run, tf, &st, &composed, &steps);
            let id = format!("ln_supersolution[test={j}]");
            let digest = InputDigest::new()
                .text(&base)
                .text(&id)
                .numbers(&[tf.amplitude])
                .hex();
            EstimateReport::new(
                id,
                Relation::Ge,
                lhs,
                rhs,
                budget(scale, tolerances::C_SUPER_LN, dt, h),
                digest,
            )
        })
        .collect())
}
