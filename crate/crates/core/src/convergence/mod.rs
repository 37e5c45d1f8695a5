//! ε-sweeps over data families and Cauchy ladders of the quantities whose
//! strong convergence the compactness results assert.

mod families;

pub use families::{
    limit_data, make_data_family, DataFamilySpec, DataMember, FamilyKind, Mollifier,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chemotaxis::{solve_chemo, ChemoConfig, ChemoRun, ChemoSystem};
use crate::error::{Error, Result};
use crate::functionals::{
    build_dlvp_phi, check_lambda, face_average, grad_lambda_norm, truncate_field,
    truncated_gradient_energy, weighted_energy, weighted_gradient_energy, OrliczFamily,
    PhiFunction, PsiSpec,
};
use crate::grid::{
    face_gradient, integrate, l1_distance, l1_norm, spacetime_l1_distance, FaceField,
    FieldTrajectory, Grid, ScalarField,
};
use crate::heat::{solve_heat, HeatProblem, SolverConfig};
use crate::verifier::{check_dissipation_bounds, mass_budget_defects};

/// Rungs `j = first..=last`, `ε_j = 2^{-j}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    pub first: u32,
    pub last: u32,
}

impl Ladder {
    pub fn new(first: u32, last: u32) -> Result<Self> {
        let l = Self { first, last };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.last <= self.first || self.last > 40 {
            return Err(Error::InvalidConfig(format!(
                "ladder needs first < last <= 40, got {}..={}",
                self.first, self.last
            )));
        }
        Ok(())
    }

    pub fn js(&self) -> Vec<u32> {
        (self.first..=self.last).collect()
    }

    pub fn eps(&self) -> Vec<f64> {
        self.js().iter().map(|&j| (-(j as f64)).exp2()).collect()
    }
}

/// Named per-member columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FunctionalTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// `max/min` of a column of positive values.
    pub fn spread(&self, name: &str) -> Option<f64> {
        let c = self.column(name)?;
        let max = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = c.iter().copied().fold(f64::INFINITY, f64::min);
        Some(max / min)
    }
}

pub const TABLE_LEVELS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
pub const TABLE_ALPHAS: [f64; 3] = [0.5, 1.0, 2.0];
pub const TABLE_LAMBDAS: [f64; 2] = [1.0, 1.1];

#[derive(Debug, Clone, PartialEq)]
pub struct HeatTemplate {
    pub grid: Grid,
    pub kappa: f64,
    pub t_end: f64,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatMember {
    pub j: u32,
    pub eps: f64,
    pub width: Option<f64>,
    pub problem: HeatProblem,
    pub traj: FieldTrajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub family: DataFamilySpec,
    pub template: HeatTemplate,
    pub members: Vec<HeatMember>,
    pub table: FunctionalTable,
    /// Every member produced the same trajectory.
    pub degenerate: bool,
}

impl SweepResult {
    pub fn eps(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.eps).collect()
    }

    /// Finest member.
    pub fn reference(&self) -> &HeatMember {
        self.members.last().expect("sweep has members")
    }

    /// Direct solve of the limit problem on the sweep's grid.
    pub fn solve_limit(&self) -> Result<FieldTrajectory> {
        let (v0, source) = limit_data(&self.family, &self.template.grid)?;
        let p = HeatProblem::new(self.template.kappa, v0, source);
        solve_heat(&p, self.template.t_end, &self.template.solver)
    }
}

fn heat_table(members: &[HeatMember], theta: f64) -> Result<FunctionalTable> {
    let mut columns = vec!["data_l1".to_string(), "source_l1".into(), "sup_l1".into()];
    columns.extend(
        TABLE_LEVELS
            .iter()
            .map(|k| format!("truncated_energy[k={k}]")),
    );
    columns.extend(
        TABLE_ALPHAS
            .iter()
            .map(|a| format!("weighted_energy[alpha={a}]")),
    );
    columns.extend(
        TABLE_LAMBDAS
            .iter()
            .map(|l| format!("grad_lambda_norm[lambda={l}]")),
    );
    let rows = members
        .par_iter()
        .map(|m| -> Result<Vec<f64>> {
            let t = &m.traj;
            let mut row = vec![
                l1_norm(&m.problem.v0),
                m.problem.source.l1_norm(t.grid(), t.dt(), t.steps(), theta),
                t.frames().iter().map(l1_norm).fold(0.0, f64::max),
            ];
            for k in TABLE_LEVELS {
                row.push(truncated_gradient_energy(t, k)?);
            }
            for a in TABLE_ALPHAS {
                row.push(weighted_gradient_energy(t, a)?);
            }
            for l in TABLE_LAMBDAS {
                row.push(grad_lambda_norm(t, l)?);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FunctionalTable { columns, rows })
}

/// One heat solve per rung, in parallel.
pub fn run_eps_sweep(
    family: &DataFamilySpec,
    template: &HeatTemplate,
    ladder: &Ladder,
) -> Result<SweepResult> {
    ladder.validate()?;
    let data = make_data_family(family, &template.grid, &ladder.js())?;
    let members = data
        .into_par_iter()
        .map(|d| {
            let problem = HeatProblem::new(template.kappa, d.v0, d.source);
            let traj = solve_heat(&problem, template.t_end, &template.solver)?;
            Ok(HeatMember {
                j: d.j,
                eps: d.eps,
                width: d.width,
                problem,
                traj,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let degenerate = members.windows(2).all(|w| w[0].traj == w[1].traj);
    let table = heat_table(&members, template.solver.theta)?;
    Ok(SweepResult {
        family: family.clone(),
        template: template.clone(),
        members,
        table,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CauchyDecreasing,
    Stagnant,
    Diverging,
}

pub const VERDICT_FACTOR: f64 = 0.2;
pub const VERDICT_POLICY: &str = "cauchy-decreasing iff the last ceil(J/2) differences decrease and d_J <= 0.2*d_0; \
     the full built-in sequence is tested, so a stagnant verdict does not exclude convergent subsequences";

/// Verdict on successive differences `d_0..d_{J-1}`.
pub fn verdict(d: &[f64]) -> Verdict {
    let Some((&first, &last)) = d.first().zip(d.last()) else {
        return Verdict::Stagnant;
    };
    if d.iter().any(|x| !x.is_finite()) {
        return Verdict::Diverging;
    }
    let half = d.len().div_ceil(2);
    let tail_decreasing = (d.len() - half..d.len())
        .filter(|&i| i > 0)
        .all(|i| d[i] < d[i - 1] || (d[i] == 0.0 && d[i - 1] == 0.0));
    if tail_decreasing && last <= VERDICT_FACTOR * first {
        Verdict::CauchyDecreasing
    } else if last >= first / VERDICT_FACTOR {
        Verdict::Diverging
    } else {
        Verdict::Stagnant
    }
}

/// Least-squares slope of `log d_j` against `j` over the positive entries.
pub fn fitted_rate(d: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = d
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .map(|(j, &x)| (j as f64, x.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub quantity: String,
    pub eps: Vec<f64>,
    /// Width exponent of the family, if it is mollified.
    pub gamma: Option<f64>,
    pub differences: Vec<f64>,
    pub rate: Option<f64>,
    pub verdict: Verdict,
    pub note: String,
}

impl ConvergenceReport {
    pub fn new(
        quantity: impl Into<String>,
        eps: Vec<f64>,
        gamma: Option<f64>,
        differences: Vec<f64>,
    ) -> Self {
        Self {
            quantity: quantity.into(),
            eps,
            gamma,
            rate: fitted_rate(&differences),
            verdict: verdict(&differences),
            differences,
            note: VERDICT_POLICY.into(),
        }
    }

    pub fn is_cauchy(&self) -> bool {
        self.verdict == Verdict::CauchyDecreasing
    }

    fn of(sweep: &SweepResult, quantity: impl Into<String>, d: Vec<f64>) -> Self {
        let gamma = (sweep.family.kind == FamilyKind::MollifiedSpike).then_some(sweep.family.gamma);
        Self::new(quantity, sweep.eps(), gamma, d)
    }
}

const MIN_MEMBERS: usize = 4;

fn check_rungs(sweep: &SweepResult) -> Result<()> {
    if sweep.members.len() < MIN_MEMBERS {
        return Err(Error::InvalidArgument(format!(
            "Cauchy ladders need at least {MIN_MEMBERS} members, sweep has {}",
            sweep.members.len()
        )));
    }
    Ok(())
}

/// Adjacent-pair map in parallel, collected in ladder order.
fn pairs<T: Send>(sweep: &SweepResult, f: impl Fn(&HeatMember, &HeatMember) -> T + Sync) -> Vec<T> {
    (0..sweep.members.len() - 1)
        .into_par_iter()
        .map(|j| f(&sweep.members[j], &sweep.members[j + 1]))
        .collect()
}

/// `(Σ_{n=1..M} dt ∫|F(a_n) - F(b_n)|²)^{1/2}` for a face-field transform `F`.
fn face_l2_distance(
    a: &FieldTrajectory,
    b: &FieldTrajectory,
    f: &(dyn Fn(&ScalarField) -> FaceField + Sync),
) -> f64 {
    let s: f64 = (1..a.frames().len())
        .map(|n| {
            let (fa, fb) = (f(a.frame(n)), f(b.frame(n)));
            fa.weighted_sum(|ax, k, x| {
                let d = x - fb.axis(ax)[k];
                d * d
            })
        })
        .sum();
    (s * a.dt()).sqrt()
}

fn gradient_ladder(
    sweep: &SweepResult,
    f: &(dyn Fn(&ScalarField) -> FaceField + Sync),
) -> Vec<f64> {
    pairs(sweep, |a, b| face_l2_distance(&a.traj, &b.traj, f))
}

/// `‖∇v_j - ∇v_{j+1}‖_{L²(Ω×(0,T))}`.
pub fn cauchy_plain_gradients(sweep: &SweepResult) -> Result<ConvergenceReport> {
    check_rungs(sweep)?;
    Ok(ConvergenceReport::of(
        sweep,
        "gradient_l2",
        gradient_ladder(sweep, &face_gradient),
    ))
}

/// `‖∇T_k v_j - ∇T_k v_{j+1}‖_{L²(Ω×(0,T))}`.
pub fn cauchy_truncated_gradients(sweep: &SweepResult, k: f64) -> Result<ConvergenceReport> {
    check_rungs(sweep)?;
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "truncation level must be positive, got {k}"
        )));
    }
    let d = gradient_ladder(sweep, &|z| face_gradient(&truncate_field(z, k)));
    Ok(ConvergenceReport::of(
        sweep,
        format!("truncated_gradient[k={k}]"),
        d,
    ))
}

/// Face gradient multiplied by `w(face average)`.
fn weighted_gradient(z: &ScalarField, w: impl Fn(f64) -> f64) -> FaceField {
    let avg = face_average(z);
    let mut g = face_gradient(z);
    for a in 0..g.grid().dim() {
        for (k, x) in g.axis_mut(a).iter_mut().enumerate() {
            *x *= w(avg.axis(a)[k]);
        }
    }
    g
}

/// `‖(|v|+1)^{-r}∇v` ladder, `r > 1/2`.
pub fn cauchy_weighted_gradients(sweep: &SweepResult, r: f64) -> Result<ConvergenceReport> {
    check_rungs(sweep)?;
    if !(r > 0.5 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "weighted gradients converge only for r > 1/2 (weight (|v|+1)^(-r)); got r = {r}"
        )));
    }
    let d = gradient_ladder(sweep, &|z| {
        weighted_gradient(z, |s| (s.abs() + 1.0).powf(-r))
    });
    Ok(ConvergenceReport::of(
        sweep,
        format!("weighted_gradient[r={r}]"),
        d,
    ))
}

/// `‖∇v_j - ∇v_{j+1}‖_{L^λ(Ω×(0,T))}` with the λ-norm's cell reconstruction.
pub fn cauchy_lambda_gradients(sweep: &SweepResult, lambda: f64) -> Result<ConvergenceReport> {
    check_rungs(sweep)?;
    check_lambda(lambda, sweep.template.grid.dim())?;
    let d = pairs(sweep, |a, b| {
        let diff: Vec<ScalarField> = a
            .traj
            .frames()
            .iter()
            .zip(b.traj.frames())
            .map(|(x, y)| x.zip_map(y, |p, q| p - q))
            .collect();
        let t = FieldTrajectory::new(a.traj.dt(), diff).expect("same shape");
        grad_lambda_norm(&t, lambda).expect("λ checked")
    });
    Ok(ConvergenceReport::of(
        sweep,
        format!("lambda_gradient[lambda={lambda}]"),
        d,
    ))
}

fn source_l1_distance(a: &HeatMember, b: &HeatMember) -> f64 {
    let g = *a.traj.grid();
    let dt = a.traj.dt();
    (0..a.traj.steps())
        .map(|n| {
            l1_distance(
                &a.problem.source.frame(&g, n),
                &b.problem.source.frame(&g, n),
            )
        })
        .sum::<f64>()
        * dt
}

/// `‖v0_j - v0_{j+1}‖₁ + ‖f_j - f_{j+1}‖_{L¹(Ω×(0,T))}`.
pub fn data_ladder(sweep: &SweepResult) -> ConvergenceReport {
    let d = pairs(sweep, |a, b| {
        l1_distance(&a.problem.v0, &b.problem.v0) + source_l1_distance(a, b)
    });
    ConvergenceReport::of(sweep, "data_l1", d)
}

/// `‖v_j - v_{j+1}‖_{L¹(Ω×(0,T))}`.
pub fn cauchy_spacetime_l1(sweep: &SweepResult) -> ConvergenceReport {
    ConvergenceReport::of(
        sweep,
        "spacetime_l1",
        pairs(sweep, |a, b| spacetime_l1_distance(&a.traj, &b.traj)),
    )
}

/// `max_n ‖v_j(t_n) - v_{j+1}(t_n)‖₁`. Refuses unless the data ladder is
/// itself cauchy-decreasing.
pub fn cauchy_c0l1(sweep: &SweepResult) -> Result<ConvergenceReport> {
    check_rungs(sweep)?;
    let data = data_ladder(sweep);
    if !data.is_cauchy() {
        return Err(Error::Refused(format!(
            "C⁰L¹ ladder needs data converging strongly in L¹; data ladder is {:?}: {:?}",
            data.verdict, data.differences
        )));
    }
    let d = pairs(sweep, |a, b| {
        a.traj
            .frames()
            .iter()
            .zip(b.traj.frames())
            .map(|(x, y)| l1_distance(x, y))
            .fold(0.0, f64::max)
    });
    Ok(ConvergenceReport::of(sweep, "c0l1", d))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiConvergence {
    /// Ladders of `ψ(v0_ε)` in L¹ and `ψ'(v_ε)f_ε` in L¹(Ω×(0,T)).
    pub hypotheses: Vec<ConvergenceReport>,
    pub gradient: ConvergenceReport,
    pub phi: PhiFunction,
    /// `∫∫Φ'(ψ(v_ε))ψ''(v_ε)|∇v_ε|²` per member.
    pub phi_bound: Vec<f64>,
    /// `max/min` of `phi_bound`.
    pub phi_bound_spread: f64,
}

fn psi_data(m: &HeatMember, psi: &PsiSpec) -> Vec<f64> {
    m.problem
        .v0
        .values()
        .iter()
        .map(|&s| psi.eval(s).0)
        .collect()
}

/// `ψ'(v_n) f_n` over frames `0..M`, flattened.
fn psi_source(m: &HeatMember, psi: &PsiSpec) -> Vec<f64> {
    let g = *m.traj.grid();
    (0..m.traj.steps())
        .flat_map(|n| {
            let f = m.problem.source.frame(&g, n).into_owned();
            m.traj
                .frame(n)
                .values()
                .iter()
                .zip(f.values())
                .map(|(&v, &s)| psi.eval(v).1 * s)
                .collect::<Vec<_>>()
        })
        .collect()
}

fn l1_vec(a: &[f64], b: &[f64], measure: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * measure
}

/// Ladder of `(ψ''(v))^{1/2}∇v` after checking the two data hypotheses, and
/// the Φ-weighted energy across members.
pub fn cauchy_psi_gradients(sweep: &SweepResult, psi: &PsiSpec) -> Result<PsiConvergence> {
    check_rungs(sweep)?;
    psi.validate()?;
    let vol = sweep.template.grid.cell_volume();
    let dt = sweep.template.solver.dt;
    let data: Vec<Vec<f64>> = sweep.members.iter().map(|m| psi_data(m, psi)).collect();
    let sources: Vec<Vec<f64>> = sweep
        .members
        .par_iter()
        .map(|m| psi_source(m, psi))
        .collect();
    let h0 = (0..data.len() - 1)
        .map(|j| l1_vec(&data[j], &data[j + 1], vol))
        .collect();
    let h1 = (0..sources.len() - 1)
        .map(|j| l1_vec(&sources[j], &sources[j + 1], vol * dt))
        .collect();
    let hypotheses = vec![
        ConvergenceReport::of(sweep, "psi_data_l1", h0),
        ConvergenceReport::of(sweep, "psi_prime_source_l1", h1),
    ];
    if let Some(bad) = hypotheses.iter().find(|h| !h.is_cauchy()) {
        return Err(Error::Refused(format!(
            "ψ-gradient convergence not reported: hypothesis ladder '{}' is {:?}: {:?}",
            bad.quantity, bad.verdict, bad.differences
        )));
    }
    let d = gradient_ladder(sweep, &|z| weighted_gradient(z, |s| psi.eval(s).2.sqrt()));
    let gradient = ConvergenceReport::of(sweep, "psi_gradient", d);

    let mut families = vec![OrliczFamily {
        name: "psi(v0_eps)".into(),
        cell_measure: vol,
        members: data,
    }];
    if sources.iter().any(|s| s.iter().any(|&x| x != 0.0)) {
        families.push(OrliczFamily {
            name: "psi'(v_eps) f_eps".into(),
            cell_measure: vol * dt,
            members: sources,
        });
    }
    let budget = 2.0
        * families
            .iter()
            .map(OrliczFamily::measure)
            .fold(0.0, f64::max);
    let phi = build_dlvp_phi(&families, budget)?.phi;
    let phi_bound: Vec<f64> = sweep
        .members
        .par_iter()
        .map(|m| {
            m.traj.frames()[1..]
                .iter()
                .map(|z| {
                    weighted_energy(z, |s| {
                        let (p, _, p2) = psi.eval(s);
                        phi.d1(p) * p2
                    })
                })
                .sum::<f64>()
                * m.traj.dt()
        })
        .collect();
    let max = phi_bound.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = phi_bound.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PsiConvergence {
        hypotheses,
        gradient,
        phi,
        phi_bound,
        phi_bound_spread: max / min,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    /// `‖finest(A) - finest(B)‖_{L¹(Ω×(0,T))}`.
    pub distance: f64,
    /// `3·(d_J^A + d_J^B)` from the space-time L¹ ladders.
    pub bound: f64,
    /// Distance above the bound: the two sweeps have different limits.
    pub expected_distinct: bool,
}

pub const AGREEMENT_FACTOR: f64 = 3.0;

/// Distance between the finest members of two sweeps on the same grid and
/// time step.
pub fn cross_sequence_agreement(a: &SweepResult, b: &SweepResult) -> Result<Agreement> {
    let (ra, rb) = (&a.reference().traj, &b.reference().traj);
    if !ra.grid().same_shape(rb.grid()) || ra.dt() != rb.dt() || ra.steps() != rb.steps() {
        return Err(Error::FieldMismatch(
            "sweeps differ in grid, time step or horizon".into(),
        ));
    }
    let distance = spacetime_l1_distance(ra, rb);
    let last = |s: &SweepResult| {
        cauchy_spacetime_l1(s)
            .differences
            .last()
            .copied()
            .unwrap_or(0.0)
    };
    let bound = AGREEMENT_FACTOR * (last(a) + last(b));
    Ok(Agreement {
        distance,
        bound,
        expected_distinct: distance > bound,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChemoTemplate {
    pub system: ChemoSystem,
    pub u0: ScalarField,
    pub v0: ScalarField,
    pub t_end: f64,
    pub config: ChemoConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChemoSweep {
    pub js: Vec<u32>,
    pub eps: Vec<f64>,
    pub runs: Vec<ChemoRun>,
    pub table: FunctionalTable,
}

/// Sweep over the regularization parameter `ε` of the system with fixed
/// data. Table columns: final mass, worst relative mass-budget defect,
/// extrema, and every dissipation functional of the run.
pub fn run_chemo_eps_sweep(template: &ChemoTemplate, ladder: &Ladder) -> Result<ChemoSweep> {
    ladder.validate()?;
    let eps = ladder.eps();
    let runs = eps
        .par_iter()
        .map(|&e| {
            let system = ChemoSystem {
                eps: e,
                ..template.system
            };
            solve_chemo(
                &system,
                &template.u0,
                &template.v0,
                template.t_end,
                &template.config,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut columns: Vec<String> = [
        "mass_final",
        "mass_defect_rel",
        "min_u",
        "max_u",
        "min_v",
        "max_v",
    ]
    .map(String::from)
    .to_vec();
    let reports: Vec<_> = runs.par_iter().map(check_dissipation_bounds).collect();
    columns.extend(reports[0].iter().map(|r| r.id.clone()));
    let rows = runs
        .iter()
        .zip(&reports)
        .map(|(run, reps)| {
            let m0 = integrate(run.u.frame(0));
            let defect = mass_budget_defects(run)
                .iter()
                .fold(0.0f64, |m, d| m.max(d.abs()))
                / m0.abs().max(f64::MIN_POSITIVE);
            let d = &run.diagnostics;
            let mut row = vec![
                integrate(run.u.last()),
                defect,
                d.iter().map(|x| x.min_u).fold(f64::INFINITY, f64::min),
                d.iter().map(|x| x.max_u).fold(f64::NEG_INFINITY, f64::max),
                d.iter().map(|x| x.min_v).fold(f64::INFINITY, f64::min),
                d.iter().map(|x| x.max_v).fold(f64::NEG_INFINITY, f64::max),
            ];
            row.extend(reps.iter().map(|r| r.lhs));
            row
        })
        .collect();
    Ok(ChemoSweep {
        js: ladder.js(),
        eps,
        runs,
        table: FunctionalTable { columns, rows },
    })
}
