//! Mass budgets, pointwise bounds and dissipation functionals of chemotaxis
//! runs.

use super::{EstimateReport, InputDigest, Relation};
use crate::chemotaxis::{ChemoRun, Variant};
use crate::grid::{face_gradient, integrate, ScalarField};
use crate::tolerances::{self, budget};

/// Digest of a run's parameters and every frame of both components.
pub fn run_digest(run: &ChemoRun) -> String {
    run_input(run).hex()
}

fn run_input(run: &ChemoRun) -> InputDigest {
    let s = &run.system;
    let g = s.g.map_or([0.0; 3], |g| [g.lambda, g.mu, g.beta]);
    InputDigest::new()
        .text(&format!("{:?}", s.variant))
        .numbers(&[s.chi, s.eps, g[0], g[1], g[2], run.config.linear_tol])
        .trajectory(&run.u)
        .trajectory(&run.v)
}

fn g_integral(run: &ChemoRun, u: &ScalarField, abs: bool) -> f64 {
    let vol = u.grid().cell_volume();
    u.values()
        .iter()
        .map(|&x| {
            let y = run.system.g(x);
            if abs {
                y.abs()
            } else {
                y
            }
        })
        .sum::<f64>()
        * vol
}

/// `∫u₀ + Σ_{m<n} dt ∫g(u_m) - ∫u_n` for every frame `n`.
pub fn mass_budget_defects(run: &ChemoRun) -> Vec<f64> {
    let dt = run.dt();
    let m0 = integrate(run.u.frame(0));
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(run.u.frames().len());
    for (n, u) in run.u.frames().iter().enumerate() {
        out.push(m0 + acc - integrate(u));
        if n < run.u.steps() {
            acc += dt * g_integral(run, u, false);
        }
    }
    out
}

/// Mass equality for the conservative system B, the budget inequality
/// `∫u(t) <= ∫u₀ + ∫₀ᵗ∫g(u)` for the dampened systems. Reports the worst
/// frame.
pub fn check_mass_budget(run: &ChemoRun) -> EstimateReport {
    let dt = run.dt();
    let m0 = integrate(run.u.frame(0));
    let defects = mass_budget_defects(run);
    let scale = m0.abs()
        + (0..run.u.steps())
            .map(|n| dt * g_integral(run, run.u.frame(n), true))
            .sum::<f64>();
    let solver = tolerances::C_SCHEME_SOLVER * run.config.linear_tol;
    let (relation, tol, worst) = if run.system.variant == Variant::B {
        let w = (0..defects.len())
            .max_by(|&a, &b| defects[a].abs().total_cmp(&defects[b].abs()))
            .unwrap_or(0);
        (Relation::Eq, (tolerances::TOL_MASS + solver) * scale, w)
    } else {
        let w = (0..defects.len())
            .min_by(|&a, &b| defects[a].total_cmp(&defects[b]))
            .unwrap_or(0);
        (
            Relation::Le,
            (tolerances::TOL_MASS_BUDGET + solver) * scale,
            w,
        )
    };
    let lhs = integrate(run.u.frame(worst));
    let rhs = lhs + defects[worst];
    let digest = run_input(run).text("mass_budget").hex();
    EstimateReport::new("mass_budget", relation, lhs, rhs, tol, digest)
        .with_note(format!("worst frame t = {:?}", run.u.time(worst)))
}

/// Indicator-weighted gradient energy `∫∫ 1{u <= h, v <= h} |∇u|²` over the
/// implicit frames, the indicator taken on both cells of a face.
fn indicator_gradient(run: &ChemoRun, h: f64) -> f64 {
    let g = *run.u.grid();
    (1..run.u.frames().len())
        .map(|n| {
            let (u, v) = (run.u.frame(n).values(), run.v.frame(n).values());
            let gu = face_gradient(run.u.frame(n));
            gu.weighted_sum(|a, k, d| {
                let (l, r) = g.face_cells(a, k);
                if u[l] <= h && u[r] <= h && v[l] <= h && v[r] <= h {
                    d * d
                } else {
                    0.0
                }
            })
        })
        .sum::<f64>()
        * run.dt()
}

fn implicit_integral(run: &ChemoRun, f: impl Fn(&ScalarField, &ScalarField) -> f64) -> f64 {
    (1..run.u.frames().len())
        .map(|n| f(run.u.frame(n), run.v.frame(n)))
        .sum::<f64>()
        * run.dt()
}

pub const INDICATOR_LEVELS: [f64; 3] = [1.0, 2.0, 4.0];
pub const DECAY_EXPONENTS: [(f64, f64); 4] = [(0.5, 0.5), (0.5, 1.0), (1.0, 0.5), (1.0, 1.0)];
pub const POWER_EXPONENT: f64 = 1.5;

/// Dissipation functionals of a run, with bound checks where a computable
/// right-hand side exists.
pub fn check_dissipation_bounds(run: &ChemoRun) -> Vec<EstimateReport> {
    let base = run_input(run);
    let digest = |id: &str| base.clone().text(id).hex();
    let dt = run.dt();
    let h = run.u.grid().h_max();
    let steps = run.u.steps();
    let t_end = run.u.horizon();
    let measure = run.u.grid().measure();
    let u0 = run.u.frame(0);
    let v0 = run.v.frame(0);
    let solver = tolerances::C_SCHEME_SOLVER * run.config.linear_tol;
    let mut out = Vec::new();

    if let Some(gs) = run.system.g {
        let lhs: f64 = (0..steps)
            .map(|n| dt * g_integral(run, run.u.frame(n), true))
            .sum();
        let rhs = integrate(u0) + 2.0 * measure * t_end * gs.max_abs_on(gs.zero_crossing());
        out.push(
            EstimateReport::new(
                "dampening_mass_bound",
                Relation::Le,
                lhs,
                rhs,
                (tolerances::TOL_MASS_BUDGET + solver) * rhs.abs(),
                digest("dampening_mass_bound"),
            )
            .with_note("∫∫|g(u)| <= ∫u₀ + 2|Ω|T max|g| on [0, s₀], s₀ the last zero of g"),
        );
    }
    out.push(EstimateReport::new(
        "log_gradient_u",
        Relation::Value,
        run.diagnostics[1..]
            .iter()
            .map(|d| d.dissipation_u)
            .sum::<f64>()
            * dt,
        f64::NAN,
        0.0,
        digest("log_gradient_u"),
    ));

    match run.system.variant {
        Variant::A => {
            for lvl in INDICATOR_LEVELS {
                out.push(EstimateReport::new(
                    format!("indicator_gradient_u[h={lvl}]"),
                    Relation::Value,
                    indicator_gradient(run, lvl),
                    f64::NAN,
                    0.0,
                    digest(&format!("indicator_gradient_u{lvl}")),
                ));
            }
            for (p, kappa) in DECAY_EXPONENTS {
                let val = implicit_integral(run, |u, v| {
                    face_gradient(&u.zip_map(v, |a, b| (a + 1.0).powf(-p) * (-kappa * b).exp()))
                        .energy()
                });
                out.push(EstimateReport::new(
                    format!("decay_weight_gradient[p={p},kappa={kappa}]"),
                    Relation::Value,
                    val,
                    f64::NAN,
                    0.0,
                    digest(&format!("decay_weight_gradient{p},{kappa}")),
                ));
            }
        }
        Variant::B => {
            let vmin0 = v0.min();
            let (w, lhs, rhs) = (0..run.v.frames().len())
                .map(|n| (n, run.v.frame(n).min(), vmin0 * (-run.v.time(n)).exp()))
                .min_by(|a, b| (a.1 - a.2).total_cmp(&(b.1 - b.2)))
                .unwrap();
            let tol = tolerances::TOL_POINTWISE * vmin0.max(1.0) + solver * v0.max();
            out.push(
                EstimateReport::new(
                    "signal_lower_bound",
                    Relation::Ge,
                    lhs,
                    rhs,
                    tol,
                    digest("signal_lower_bound"),
                )
                .with_note(format!(
                    "min v(t) >= min v₀·e^(-t); worst frame t = {:?}",
                    run.v.time(w)
                )),
            );
            out.push(EstimateReport::new(
                format!("u_power_integral[r={POWER_EXPONENT}]"),
                Relation::Value,
                implicit_integral(run, |u, _| {
                    u.values()
                        .iter()
                        .map(|x| x.max(0.0).powf(POWER_EXPONENT))
                        .sum::<f64>()
                        * u.grid().cell_volume()
                }),
                f64::NAN,
                0.0,
                digest("u_power_integral"),
            ));
            out.push(log_gradient_v(run, &digest("log_gradient_v")));
        }
        Variant::C => {
            let vmax0 = v0.max();
            let (w, lhs) = (0..run.v.frames().len())
                .map(|n| (n, run.v.frame(n).max()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            let tol = tolerances::TOL_POINTWISE * vmax0.max(1.0) + solver * vmax0;
            out.push(
                EstimateReport::new(
                    "signal_upper_bound",
                    Relation::Le,
                    lhs,
                    vmax0,
                    tol,
                    digest("signal_upper_bound"),
                )
                .with_note(format!(
                    "max v(t) <= ‖v₀‖∞; worst frame t = {:?}",
                    run.v.time(w)
                )),
            );
            out.push(quasi_energy_report(
                run,
                dt,
                h,
                &digest("quasi_energy_inequality"),
            ));
            out.push(log_gradient_v(run, &digest("log_gradient_v")));
        }
    }
    out
}

fn log_gradient_v(run: &ChemoRun, digest: &str) -> EstimateReport {
    let val = run.diagnostics[1..]
        .iter()
        .map(|d| d.dissipation_v.unwrap_or(f64::NAN))
        .sum::<f64>()
        * run.dt();
    EstimateReport::new(
        "log_gradient_v",
        Relation::Value,
        val,
        f64::NAN,
        0.0,
        digest.to_string(),
    )
}

/// Per-step terms `(lhs, rhs, scale)` of
/// `Q_{n+1} - Q_n <= dt(-½D_u - χ²/2·D_v + ∫|g(u_n)| + χ²∫u_n)`,
/// dissipations taken at the new frame.
pub(crate) fn quasi_energy_steps(run: &ChemoRun) -> Vec<(f64, f64, f64)> {
    let chi2 = run.system.chi * run.system.chi;
    let dt = run.dt();
    let d = &run.diagnostics;
    (0..run.u.steps())
        .map(|n| {
            let q0 = d[n].quasi_energy.unwrap_or(f64::NAN);
            let q1 = d[n + 1].quasi_energy.unwrap_or(f64::NAN);
            let du = 0.5 * d[n + 1].dissipation_u;
            let dv = 0.5 * chi2 * d[n + 1].dissipation_v.unwrap_or(f64::NAN);
            let gabs = g_integral(run, run.u.frame(n), true);
            let mass = chi2 * integrate(run.u.frame(n));
            let lhs = q1 - q0;
            let rhs = dt * (-du - dv + gabs + mass);
            (lhs, rhs, lhs.abs() + dt * (du + dv + gabs + mass.abs()))
        })
        .collect()
}

fn quasi_energy_report(run: &ChemoRun, dt: f64, h: f64, digest: &str) -> EstimateReport {
    let steps = quasi_energy_steps(run);
    let tol_of = |s: f64| budget(s, tolerances::C_QUASI_ENERGY, dt, h);
    let (w, &(lhs, rhs, scale)) = steps
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 .1 - a.1 .0 + tol_of(a.1 .2)).total_cmp(&(b.1 .1 - b.1 .0 + tol_of(b.1 .2)))
        })
        .expect("run has at least one step");
    EstimateReport::new(
        "quasi_energy_inequality",
        Relation::Le,
        lhs,
        rhs,
        tol_of(scale),
        digest.to_string(),
    )
    .with_note(format!(
        "worst of {} steps at t = {:?}",
        steps.len(),
        run.u.time(w)
    ))
}
