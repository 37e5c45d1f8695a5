//! Experiment execution and the on-disk run archive.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ChemoSpec, ExperimentConfig, ExperimentKind, HeatSpec};
use super::snapshot::write_snapshot;
use crate::chemotaxis::{solve_chemo, ChemoRun, Variant};
use crate::convergence::{
    cauchy_c0l1, cauchy_lambda_gradients, cauchy_psi_gradients, cauchy_spacetime_l1,
    cauchy_truncated_gradients, cauchy_weighted_gradients, data_ladder, run_chemo_eps_sweep,
    run_eps_sweep, ChemoSweep, ChemoTemplate, ConvergenceReport, FunctionalTable, HeatTemplate,
    SweepResult, VERDICT_POLICY,
};
use crate::error::{Error, Result};
use crate::grid::{
    face_gradient, integrate, l1_norm, spacetime_l1_distance, FieldTrajectory, Grid, ScalarField,
};
use crate::heat::{solve_heat, HeatProblem, HeatSource};
use crate::verifier::{
    check_dissipation_bounds, check_heat_apriori, check_ln_supersolution, check_mass_budget,
    check_phi_supersolution, check_weak_solution_v, EstimateReport, InputDigest, PhiSupersolFamily,
    Relation,
};
use crate::weak::{TestFunctionSet, WeakQuadrature};

/// A ladder or construction that declined to report because its
/// hypotheses failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refusal {
    pub quantity: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Two-column series for external plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub description: String,
    pub x: String,
    pub y: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub solve_seconds: f64,
    pub check_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunArchive {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub reports: Vec<EstimateReport>,
    pub convergence: Vec<ConvergenceReport>,
    pub refusals: Vec<Refusal>,
    pub tables: Vec<CsvTable>,
    pub plots: Vec<PlotSeries>,
    pub snapshots: Vec<(String, ScalarField)>,
    pub timings: Timings,
}

impl RunArchive {
    pub fn failed_reports(&self) -> impl Iterator<Item = &EstimateReport> {
        self.reports.iter().filter(|r| !r.pass)
    }

    /// Failed reports, ladders that are not cauchy-decreasing, and refusals.
    pub fn failures(&self) -> usize {
        self.failed_reports().count()
            + self.convergence.iter().filter(|c| !c.is_cauchy()).count()
            + self.refusals.len()
    }
}

/// Shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Plain-language statement of what a report or ladder id measures.
pub fn describe(id: &str) -> &'static str {
    let base = id.rsplit('.').next().unwrap_or(id);
    let base = base.split('[').next().unwrap_or(base);
    match base {
        "mass_identity" => {
            "sup_t ∫|v| against ‖v₀‖₁ + ‖f‖_{L¹(Ω×(0,T))} (equality for sign-definite data)"
        }
        "truncated_gradient_bound" => "LHS ∫∫|∇T_k v|², RHS 2k(‖v₀‖₁ + ‖f‖₁)",
        "weighted_gradient_bound" => "LHS ∫∫|∇v|²/(1+|v|)^(1+α), RHS 4Σ_j 2^(-αj)·(‖v₀‖₁ + ‖f‖₁)",
        "lq_integrability" => "‖v‖_{L^q(Ω×(0,T))} against the shape (M+1)^(1+1/q)",
        "gradient_lambda_norm" => "‖∇v‖_{L^λ(Ω×(0,T))} against the shape (M+1)²",
        "dual_time_derivative_bound" => {
            "dictionary surrogate of ‖v_t‖_{L¹((W^{1,∞})*)} against its data bound"
        }
        "weak_solution_signal" => {
            "largest relative weak residual of the signal equation over the test set"
        }
        "mass_budget" => "∫u(t) against ∫u₀ + ∫₀ᵗ∫g(u) (equality for the conservative system)",
        "dampening_mass_bound" => "LHS ∫∫|g(u)|, RHS ∫u₀ + 2|Ω|T max|g| on [0, s₀]",
        "log_gradient_u" => "∫∫|∇u|²/(u+1)²",
        "log_gradient_v" => "∫∫|∇v|²/v²",
        "indicator_gradient_u" => "∫∫ 1{u <= h, v <= h}|∇u|²",
        "decay_weight_gradient" => "∫∫|∇((u+1)^(-p) e^(-κv))|²",
        "signal_lower_bound" => "min v(t) against min v₀·e^(-t)",
        "u_power_integral" => "∫∫ u^r",
        "signal_upper_bound" => "max v(t) against ‖v₀‖∞",
        "quasi_energy_inequality" => "per-step quasi-energy dissipation inequality, worst step",
        "phi_supersolution" => {
            "concave-composition supersolution inequality, LHS time term against RHS"
        }
        "ln_supersolution" => "ln(u+1) supersolution inequality, LHS time term against RHS",
        "limit_distance" => {
            "‖v_finest - v_limit‖_{L¹(Ω×(0,T))} against the directly solved limit problem"
        }
        "psi_phi_bound_spread" => "max/min across ε of ∫∫Φ'(ψ(v))ψ''(v)|∇v|²",
        "spread" => "max/min of a dissipation functional across the ε-ladder",
        "data_l1" => "Cauchy ladder of ‖v0_ε - v0_ε'‖₁ + ‖f_ε - f_ε'‖_{L¹(Ω×(0,T))}",
        "spacetime_l1" => "Cauchy ladder of ‖v_ε - v_ε'‖_{L¹(Ω×(0,T))}",
        "c0l1" => "Cauchy ladder of max_t ‖v_ε(t) - v_ε'(t)‖₁",
        "truncated_gradient" => "Cauchy ladder of ‖∇T_k v_ε - ∇T_k v_ε'‖_{L²(Ω×(0,T))}",
        "weighted_gradient" => "Cauchy ladder of ‖(|v|+1)^(-r)∇v‖ differences in L²(Ω×(0,T))",
        "lambda_gradient" => "Cauchy ladder of ‖∇v_ε - ∇v_ε'‖_{L^λ(Ω×(0,T))}",
        "gradient_l2" => "Cauchy ladder of ‖∇v_ε - ∇v_ε'‖_{L²(Ω×(0,T))}",
        "psi_data_l1" => "hypothesis ladder ‖ψ(v0_ε) - ψ(v0_ε')‖₁",
        "psi_prime_source_l1" => "hypothesis ladder ‖ψ'(v_ε)f_ε - ψ'(v_ε')f_ε'‖_{L¹(Ω×(0,T))}",
        "psi_gradient" => "Cauchy ladder of (ψ''(v))^(1/2)∇v in L²(Ω×(0,T))",
        _ => "",
    }
}

fn heat_problem(spec: &HeatSpec, grid: &Grid) -> Result<HeatProblem> {
    let v0 = spec.v0.build(grid)?;
    let source = match &spec.source {
        None => HeatSource::Zero,
        Some(f) => HeatSource::Steady(f.build(grid)?),
    };
    Ok(HeatProblem::new(spec.kappa, v0, source))
}

fn prefixed(
    reports: Vec<EstimateReport>,
    prefix: &str,
) -> impl Iterator<Item = EstimateReport> + '_ {
    reports.into_iter().map(move |mut r| {
        r.id = format!("{prefix}.{}", r.id);
        r
    })
}

fn weak_reports(
    traj: &FieldTrajectory,
    eq: &crate::weak::SignalEquation,
    cfg: &ExperimentConfig,
    full: bool,
    out: &mut Vec<EstimateReport>,
) -> Result<()> {
    if !cfg.checks.weak {
        return Ok(());
    }
    let tests = TestFunctionSet::standard(
        traj.grid(),
        traj.horizon(),
        traj.dt(),
        cfg.checks.test_functions,
    )?;
    out.push(check_weak_solution_v(
        traj,
        eq,
        &tests,
        WeakQuadrature::Scheme,
        cfg.solver.linear_tol,
    )?);
    if full {
        out.push(check_weak_solution_v(
            traj,
            eq,
            &tests,
            WeakQuadrature::Analytic,
            cfg.solver.linear_tol,
        )?);
    }
    Ok(())
}

struct Outcome {
    reports: Vec<EstimateReport>,
    convergence: Vec<ConvergenceReport>,
    refusals: Vec<Refusal>,
    tables: Vec<CsvTable>,
    plots: Vec<PlotSeries>,
    snapshots: Vec<(String, ScalarField)>,
    timings: Timings,
}

impl Outcome {
    fn new() -> Self {
        Self {
            reports: vec![],
            convergence: vec![],
            refusals: vec![],
            tables: vec![],
            plots: vec![],
            snapshots: vec![],
            timings: Timings::default(),
        }
    }
}

fn frames_table(traj: &FieldTrajectory) -> CsvTable {
    let rows = traj
        .frames()
        .iter()
        .enumerate()
        .map(|(n, z)| {
            [
                traj.time(n),
                integrate(z),
                l1_norm(z),
                z.min(),
                z.max(),
                face_gradient(z).energy(),
            ]
            .map(fmt_f64)
            .to_vec()
        })
        .collect();
    CsvTable {
        file: "frames.csv".into(),
        header: ["t", "integral", "l1", "min", "max", "gradient_energy"]
            .map(String::from)
            .to_vec(),
        rows,
    }
}

fn time_series(
    name: &str,
    description: &str,
    traj: &FieldTrajectory,
    f: impl Fn(&ScalarField) -> f64,
) -> PlotSeries {
    PlotSeries {
        name: name.into(),
        description: description.into(),
        x: "t".into(),
        y: name.into(),
        points: traj
            .frames()
            .iter()
            .enumerate()
            .map(|(n, z)| (traj.time(n), f(z)))
            .collect(),
    }
}

fn run_heat(cfg: &ExperimentConfig, spec: &HeatSpec, full: bool) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let problem = heat_problem(spec, &grid)?;
    let mut o = Outcome::new();
    let t0 = Instant::now();
    let traj = solve_heat(&problem, cfg.t_end, &cfg.solver)?;
    o.timings.solve_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    if problem.kappa == 0.0 {
        o.reports
            .extend(check_heat_apriori(&traj, &problem, cfg.solver.theta)?);
    }
    let eq = problem.signal_equation(traj.steps(), cfg.solver.theta);
    weak_reports(&traj, &eq, cfg, full, &mut o.reports)?;
    o.timings.check_seconds = t1.elapsed().as_secs_f64();
    o.tables.push(frames_table(&traj));
    o.plots
        .push(time_series("integral", "∫v over time", &traj, integrate));
    o.plots.push(time_series(
        "gradient_energy",
        "∫|∇v|² over time",
        &traj,
        |z| face_gradient(z).energy(),
    ));
    o.snapshots
        .push(("v_initial".into(), traj.frame(0).clone()));
    o.snapshots.push(("v_final".into(), traj.last().clone()));
    Ok(o)
}

fn chemo_fields(spec: &ChemoSpec, grid: &Grid) -> Result<(ScalarField, ScalarField)> {
    Ok((spec.u0.build(grid)?, spec.v0.build(grid)?))
}

fn diagnostics_table(run: &ChemoRun) -> CsvTable {
    let opt = |x: Option<f64>| x.map_or_else(String::new, fmt_f64);
    let rows = run
        .diagnostics
        .iter()
        .map(|d| {
            let mut r = [d.t, d.mass_u, d.min_u, d.max_u, d.min_v, d.max_v]
                .map(fmt_f64)
                .to_vec();
            r.push(opt(d.quasi_energy));
            r.push(fmt_f64(d.dissipation_u));
            r.push(opt(d.dissipation_v));
            r
        })
        .collect();
    CsvTable {
        file: "diagnostics.csv".into(),
        header: [
            "t",
            "mass_u",
            "min_u",
            "max_u",
            "min_v",
            "max_v",
            "quasi_energy",
            "dissipation_u",
            "dissipation_v",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    }
}

fn chemo_checks(
    run: &ChemoRun,
    cfg: &ExperimentConfig,
    full: bool,
    out: &mut Vec<EstimateReport>,
) -> Result<()> {
    out.push(check_mass_budget(run));
    out.extend(check_dissipation_bounds(run));
    weak_reports(&run.v, &run.signal_equation(), cfg, full, out)?;
    if full && cfg.checks.supersolution {
        let tests = TestFunctionSet::nonnegative(
            run.u.grid(),
            run.u.horizon(),
            run.dt(),
            cfg.checks.test_functions,
        )?;
        match run.system.variant {
            Variant::A => {
                let umax = run.diagnostics.iter().map(|d| d.max_u).fold(0.0, f64::max);
                let vmax = run.diagnostics.iter().map(|d| d.max_v).fold(0.0, f64::max);
                let family = PhiSupersolFamily::standard(umax, vmax)?;
                out.extend(check_phi_supersolution(run, &family, &tests)?);
            }
            Variant::B | Variant::C => out.extend(check_ln_supersolution(run, &tests)?),
        }
    }
    Ok(())
}

fn run_chemo(cfg: &ExperimentConfig, spec: &ChemoSpec, full: bool) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let (u0, v0) = chemo_fields(spec, &grid)?;
    let mut o = Outcome::new();
    let t0 = Instant::now();
    let run = solve_chemo(&spec.system, &u0, &v0, cfg.t_end, &cfg.chemo_config())?;
    o.timings.solve_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    chemo_checks(&run, cfg, full, &mut o.reports)?;
    o.timings.check_seconds = t1.elapsed().as_secs_f64();
    o.tables.push(diagnostics_table(&run));
    o.plots
        .push(time_series("mass_u", "∫u over time", &run.u, integrate));
    o.plots.push(time_series(
        "min_v",
        "min v over time",
        &run.v,
        ScalarField::min,
    ));
    o.snapshots.push(("u_final".into(), run.u.last().clone()));
    o.snapshots.push(("v_final".into(), run.v.last().clone()));
    Ok(o)
}

fn table_csv(
    file: &str,
    js: &[u32],
    eps: &[f64],
    extra: Option<(&str, Vec<Option<f64>>)>,
    t: &FunctionalTable,
) -> CsvTable {
    let mut header = vec!["j".to_string(), "eps".into()];
    if let Some((name, _)) = &extra {
        header.push(name.to_string());
    }
    header.extend(t.columns.iter().cloned());
    let rows = t
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![js[i].to_string(), fmt_f64(eps[i])];
            if let Some((_, vals)) = &extra {
                row.push(vals[i].map_or_else(String::new, fmt_f64));
            }
            row.extend(r.iter().copied().map(fmt_f64));
            row
        })
        .collect();
    CsvTable {
        file: file.into(),
        header,
        rows,
    }
}

fn member_series(js: &[u32], t: &FunctionalTable) -> Vec<PlotSeries> {
    t.columns
        .iter()
        .enumerate()
        .map(|(c, name)| PlotSeries {
            name: format!("member_{name}"),
            description: format!("{name} per ladder member"),
            x: "j".into(),
            y: name.clone(),
            points: js
                .iter()
                .zip(&t.rows)
                .map(|(&j, r)| (j as f64, r[c]))
                .collect(),
        })
        .collect()
}

fn ladder_series(first: u32, r: &ConvergenceReport) -> PlotSeries {
    PlotSeries {
        name: format!("ladder_{}", r.quantity),
        description: format!(
            "{}; d_j between rungs j and j+1; verdict {}",
            describe(&r.quantity),
            verdict_name(r)
        ),
        x: "j".into(),
        y: "d_j".into(),
        points: r
            .differences
            .iter()
            .enumerate()
            .map(|(i, &d)| ((first + i as u32) as f64, d))
            .collect(),
    }
}

fn refusal_or(o: &mut Outcome, quantity: &str, r: Result<ConvergenceReport>) -> Result<()> {
    match r {
        Ok(c) => o.convergence.push(c),
        Err(Error::Refused(reason)) => o.refusals.push(Refusal {
            quantity: quantity.into(),
            reason,
        }),
        Err(e) => return Err(e),
    }
    Ok(())
}

fn sweep_ladders(cfg: &ExperimentConfig, sweep: &SweepResult, o: &mut Outcome) -> Result<()> {
    o.convergence.push(data_ladder(sweep));
    o.convergence.push(cauchy_spacetime_l1(sweep));
    refusal_or(o, "c0l1", cauchy_c0l1(sweep))?;
    for &k in &cfg.checks.truncation_levels {
        o.convergence.push(cauchy_truncated_gradients(sweep, k)?);
    }
    for &r in &cfg.checks.weights {
        o.convergence.push(cauchy_weighted_gradients(sweep, r)?);
    }
    for &l in &cfg.checks.lambdas {
        o.convergence.push(cauchy_lambda_gradients(sweep, l)?);
    }
    if let Some(psi) = &cfg.checks.psi {
        match cauchy_psi_gradients(sweep, psi) {
            Ok(p) => {
                o.convergence.extend(p.hypotheses);
                o.convergence.push(p.gradient);
                let digest = InputDigest::new().numbers(&p.phi_bound).hex();
                o.reports.push(
                    EstimateReport::new(
                        "psi_phi_bound_spread",
                        Relation::Value,
                        p.phi_bound_spread,
                        f64::NAN,
                        0.0,
                        digest,
                    )
                    .with_note(format!(
                        "Φ = 1 + c[(1+s)ln(1+s) - s], c = {:?}; values {:?}",
                        p.phi.c, p.phi_bound
                    )),
                );
            }
            Err(Error::Refused(reason)) => o.refusals.push(Refusal {
                quantity: "psi_gradient".into(),
                reason,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

fn run_heat_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let s = cfg.sweep.as_ref().expect("validated");
    let family = s.family.as_ref().expect("validated");
    let template = HeatTemplate {
        grid: cfg.grid()?,
        kappa: s.kappa,
        t_end: cfg.t_end,
        solver: cfg.solver,
    };
    let mut o = Outcome::new();
    let t0 = Instant::now();
    let sweep = run_eps_sweep(family, &template, &s.ladder)?;
    o.timings.solve_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    if s.kappa == 0.0 {
        for m in &sweep.members {
            let reps = check_heat_apriori(&m.traj, &m.problem, cfg.solver.theta)?;
            o.reports
                .extend(prefixed(reps, &format!("member[j={}]", m.j)));
        }
    }
    sweep_ladders(cfg, &sweep, &mut o)?;
    match sweep.solve_limit() {
        Ok(lim) => {
            let near = spacetime_l1_distance(&sweep.reference().traj, &lim);
            let far = spacetime_l1_distance(&sweep.members[0].traj, &lim);
            let digest = InputDigest::new()
                .trajectory(&lim)
                .numbers(&[near, far])
                .hex();
            o.reports.push(
                EstimateReport::new(
                    "limit_distance",
                    Relation::Value,
                    near,
                    f64::NAN,
                    0.0,
                    digest,
                )
                .with_note(format!("coarsest member at distance {far:?}")),
            );
        }
        Err(Error::Refused(reason)) => o.refusals.push(Refusal {
            quantity: "limit_distance".into(),
            reason,
        }),
        Err(e) => return Err(e),
    }
    o.timings.check_seconds = t1.elapsed().as_secs_f64();
    let js: Vec<u32> = sweep.members.iter().map(|m| m.j).collect();
    let widths = sweep.members.iter().map(|m| m.width).collect();
    o.tables.push(table_csv(
        "sweep_table.csv",
        &js,
        &sweep.eps(),
        Some(("width", widths)),
        &sweep.table,
    ));
    o.plots.extend(
        o.convergence
            .iter()
            .map(|c| ladder_series(s.ladder.first, c)),
    );
    o.plots.extend(member_series(&js, &sweep.table));
    o.snapshots.push((
        "finest_v_initial".into(),
        sweep.reference().traj.frame(0).clone(),
    ));
    o.snapshots.push((
        "finest_v_final".into(),
        sweep.reference().traj.last().clone(),
    ));
    Ok(o)
}

/// Dissipation columns whose spread across ε is reported.
const SPREAD_COLUMNS: [&str; 3] = [
    "log_gradient_u",
    "log_gradient_v",
    "u_power_integral[r=1.5]",
];

fn chemo_sweep_reports(cs: &ChemoSweep, o: &mut Outcome) {
    for (j, run) in cs.js.iter().zip(&cs.runs) {
        let mut reps = vec![check_mass_budget(run)];
        reps.extend(check_dissipation_bounds(run));
        o.reports.extend(prefixed(reps, &format!("member[j={j}]")));
    }
    for name in SPREAD_COLUMNS {
        if let (Some(col), Some(spread)) = (cs.table.column(name), cs.table.spread(name)) {
            let digest = InputDigest::new().text(name).numbers(&col).hex();
            o.reports.push(
                EstimateReport::new(
                    format!("spread[{name}]"),
                    Relation::Value,
                    spread,
                    f64::NAN,
                    0.0,
                    digest,
                )
                .with_note(format!("values {col:?}")),
            );
        }
    }
}

fn run_chemo_sweep(cfg: &ExperimentConfig, spec: &ChemoSpec) -> Result<Outcome> {
    let s = cfg.sweep.as_ref().expect("validated");
    let (u0, v0) = chemo_fields(spec, &cfg.grid()?)?;
    let template = ChemoTemplate {
        system: spec.system,
        u0,
        v0,
        t_end: cfg.t_end,
        config: cfg.chemo_config(),
    };
    let mut o = Outcome::new();
    let t0 = Instant::now();
    let cs = run_chemo_eps_sweep(&template, &s.ladder)?;
    o.timings.solve_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    chemo_sweep_reports(&cs, &mut o);
    o.timings.check_seconds = t1.elapsed().as_secs_f64();
    o.tables.push(table_csv(
        "sweep_table.csv",
        &cs.js,
        &cs.eps,
        None,
        &cs.table,
    ));
    o.plots.extend(member_series(&cs.js, &cs.table));
    let finest = cs.runs.last().expect("ladder has members");
    o.snapshots
        .push(("finest_u_final".into(), finest.u.last().clone()));
    o.snapshots
        .push(("finest_v_final".into(), finest.v.last().clone()));
    Ok(o)
}

/// Run a validated experiment and write its archive to `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<RunArchive> {
    cfg.validate()?;
    let o = match cfg.kind {
        ExperimentKind::Heat => run_heat(cfg, cfg.heat.as_ref().expect("validated"), false)?,
        ExperimentKind::Chemo => run_chemo(cfg, cfg.chemo.as_ref().expect("validated"), false)?,
        ExperimentKind::Verify => match (&cfg.heat, &cfg.chemo) {
            (Some(h), _) => run_heat(cfg, h, true)?,
            (_, Some(c)) => run_chemo(cfg, c, true)?,
            _ => unreachable!("validated"),
        },
        ExperimentKind::Sweep => match &cfg.chemo {
            Some(c) => run_chemo_sweep(cfg, c)?,
            None => run_heat_sweep(cfg)?,
        },
        ExperimentKind::Report => {
            return Err(Error::InvalidConfig(
                "report experiments read an existing archive; see `report_archive`".into(),
            ))
        }
    };
    let archive = RunArchive {
        dir: dir.to_path_buf(),
        config: cfg.clone(),
        reports: o.reports,
        convergence: o.convergence,
        refusals: o.refusals,
        tables: o.tables,
        plots: o.plots,
        snapshots: o.snapshots,
        timings: o.timings,
    };
    write_archive(&archive)?;
    Ok(archive)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(Error::io(path))
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .filter(|&c| c != ']')
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._=-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Write one plot file under `plots/` and return its path.
pub fn emit_plot_data(archive: &RunArchive, series: &PlotSeries) -> Result<PathBuf> {
    let dir = archive.dir.join("plots");
    fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    let path = dir.join(format!("{}.dat", sanitize(&series.name)));
    let mut s = format!(
        "# {}\n# {}\n# columns: {} {}\n",
        series.name, series.description, series.x, series.y
    );
    for (x, y) in &series.points {
        s.push_str(&format!("{} {}\n", fmt_f64(*x), fmt_f64(*y)));
    }
    write(&path, s.as_bytes())?;
    Ok(path)
}

fn report_rows(archive: &RunArchive) -> Vec<Vec<String>> {
    archive
        .reports
        .iter()
        .map(|r| {
            vec![
                r.id.clone(),
                describe(&r.id).into(),
                format!("{:?}", r.relation).to_lowercase(),
                fmt_f64(r.lhs),
                fmt_f64(r.rhs),
                fmt_f64(r.margin),
                fmt_f64(r.tolerance),
                r.pass.to_string(),
                r.digest.clone(),
                r.note.clone().unwrap_or_default(),
            ]
        })
        .collect()
}

fn verdict_name(c: &ConvergenceReport) -> String {
    serde_json::to_value(c.verdict)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn convergence_rows(archive: &RunArchive) -> Vec<Vec<String>> {
    let opt = |x: Option<f64>| x.map_or_else(String::new, fmt_f64);
    let mut rows = Vec::new();
    for c in &archive.convergence {
        for (i, d) in c.differences.iter().enumerate() {
            rows.push(vec![
                c.quantity.clone(),
                describe(&c.quantity).into(),
                verdict_name(c),
                opt(c.rate),
                opt(c.gamma),
                i.to_string(),
                fmt_f64(c.eps[i]),
                fmt_f64(c.eps[i + 1]),
                fmt_f64(*d),
                String::new(),
            ]);
        }
    }
    for r in &archive.refusals {
        let mut row = vec![
            r.quantity.clone(),
            describe(&r.quantity).into(),
            "refused".into(),
        ];
        row.extend(std::iter::repeat(String::new()).take(6));
        row.push(r.reason.clone());
        rows.push(row);
    }
    rows
}

/// Human-readable summary of every report, ladder and refusal.
pub fn summary(archive: &RunArchive) -> String {
    let c = &archive.config;
    let mut s = format!(
        "gradlab {} run{}\nconfig digest: {}\n\n",
        c.kind.name(),
        c.name
            .as_ref()
            .map(|n| format!(" '{n}'"))
            .unwrap_or_default(),
        config_digest(c)
    );
    let failed = archive.failed_reports().count();
    s.push_str(&format!(
        "estimate reports: {} ({} failed)\n",
        archive.reports.len(),
        failed
    ));
    for r in &archive.reports {
        s.push_str(&format!(
            "  {} {} [{}] lhs={} rhs={} margin={} tol={}\n",
            if r.pass { "PASS" } else { "FAIL" },
            r.id,
            format!("{:?}", r.relation).to_lowercase(),
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
            fmt_f64(r.margin),
            fmt_f64(r.tolerance)
        ));
    }
    if !archive.convergence.is_empty() || !archive.refusals.is_empty() {
        let bad = archive
            .convergence
            .iter()
            .filter(|c| !c.is_cauchy())
            .count();
        s.push_str(&format!(
            "\nconvergence ladders: {} ({} not cauchy-decreasing, {} refused)\n",
            archive.convergence.len() + archive.refusals.len(),
            bad,
            archive.refusals.len()
        ));
        for r in &archive.convergence {
            let d: Vec<String> = r.differences.iter().map(|x| format!("{x:.3e}")).collect();
            s.push_str(&format!(
                "  {} {} rate={} d=[{}]\n",
                verdict_name(r).to_uppercase(),
                r.quantity,
                r.rate.map_or_else(|| "n/a".into(), |x| format!("{x:.4}")),
                d.join(", ")
            ));
        }
        for r in &archive.refusals {
            s.push_str(&format!("  REFUSED {}: {}\n", r.quantity, r.reason));
        }
        s.push_str(&format!("  policy: {VERDICT_POLICY}\n"));
    }
    s.push_str(&format!("\nfailures: {}\n", archive.failures()));
    s
}

/// Write `reports.csv`, `convergence.csv` and `summary.txt`; returns the
/// summary.
pub fn emit_reports(archive: &RunArchive) -> Result<String> {
    let header = |h: &[&str]| h.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let reports = csv_bytes(
        &header(&[
            "id",
            "quantity",
            "relation",
            "lhs",
            "rhs",
            "margin",
            "tolerance",
            "pass",
            "digest",
            "note",
        ]),
        &report_rows(archive),
    )?;
    write(&archive.dir.join("reports.csv"), &reports)?;
    let conv = csv_bytes(
        &header(&[
            "quantity",
            "description",
            "verdict",
            "rate",
            "gamma",
            "rung",
            "eps",
            "eps_next",
            "difference",
            "note",
        ]),
        &convergence_rows(archive),
    )?;
    write(&archive.dir.join("convergence.csv"), &conv)?;
    let s = summary(archive);
    write(&archive.dir.join("summary.txt"), s.as_bytes())?;
    Ok(s)
}

pub fn config_digest(cfg: &ExperimentConfig) -> String {
    hex(&Sha256::digest(cfg.to_json().as_bytes()))
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub package: String,
    pub version: String,
    pub kind: ExperimentKind,
    pub config_digest: String,
    pub timings: Timings,
    pub files: Vec<ManifestFile>,
}

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for e in fs::read_dir(dir).map_err(Error::io(dir))? {
        let p = e.map_err(Error::io(dir))?.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else if p.file_name().is_some_and(|n| n != MANIFEST) {
            out.push(p.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}

fn manifest_files(dir: &Path) -> Result<Vec<ManifestFile>> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.sort();
    files
        .into_iter()
        .map(|rel| {
            let p = dir.join(&rel);
            let bytes = fs::read(&p).map_err(Error::io(&p))?;
            Ok(ManifestFile {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: hex(&Sha256::digest(&bytes)),
                bytes: bytes.len() as u64,
            })
        })
        .collect()
}

/// Write the config, tables, snapshots, reports, plots and, last, the
/// manifest with a digest of every file.
pub fn write_archive(archive: &RunArchive) -> Result<()> {
    let dir = &archive.dir;
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    write(&dir.join(CONFIG_FILE), archive.config.to_json().as_bytes())?;
    for t in &archive.tables {
        write(&dir.join(&t.file), &csv_bytes(&t.header, &t.rows)?)?;
    }
    if !archive.snapshots.is_empty() {
        let sd = dir.join("snapshots");
        fs::create_dir_all(&sd).map_err(Error::io(&sd))?;
        for (name, z) in &archive.snapshots {
            write_snapshot(&sd.join(format!("{}.gflx", sanitize(name))), z)?;
        }
    }
    emit_reports(archive)?;
    for p in &archive.plots {
        emit_plot_data(archive, p)?;
    }
    let manifest = Manifest {
        format: 1,
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: archive.config.kind,
        config_digest: config_digest(&archive.config),
        timings: archive.timings,
        files: manifest_files(dir)?,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(&dir.join(MANIFEST), text.as_bytes())
}

/// Result of re-reading an archive.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveCheck {
    pub manifest: Manifest,
    pub summary: String,
    /// Files whose digest no longer matches, or that are missing.
    pub mismatched: Vec<String>,
    /// Failed reports recorded in `reports.csv`.
    pub failed_reports: usize,
}

/// Read an archive back: verify every file digest and return the stored
/// summary.
pub fn report_archive(dir: &Path) -> Result<ArchiveCheck> {
    let mp = dir.join(MANIFEST);
    let text = fs::read_to_string(&mp).map_err(Error::io(&mp))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", mp.display())))?;
    let mut mismatched = Vec::new();
    for f in &manifest.files {
        let p = dir.join(&f.path);
        match fs::read(&p) {
            Ok(b) if hex(&Sha256::digest(&b)) == f.sha256 => {}
            _ => mismatched.push(f.path.clone()),
        }
    }
    let sp = dir.join("summary.txt");
    let summary = fs::read_to_string(&sp).map_err(Error::io(&sp))?;
    let rp = dir.join("reports.csv");
    let mut rd = csv::Reader::from_path(&rp)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", rp.display())))?;
    let pass_col = rd
        .headers()
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", rp.display())))?
        .iter()
        .position(|h| h == "pass")
        .ok_or_else(|| Error::InvalidArgument(format!("{}: no pass column", rp.display())))?;
    let mut failed_reports = 0;
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::InvalidArgument(format!("{}: {e}", rp.display())))?;
        if rec.get(pass_col) != Some("true") {
            failed_reports += 1;
        }
    }
    Ok(ArchiveCheck {
        manifest,
        summary,
        mismatched,
        failed_reports,
    })
}

/// The resolved config stored in an archive.
pub fn load_archived_config(dir: &Path) -> Result<ExperimentConfig> {
    let p = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&p).map_err(Error::io(&p))?;
    super::config::parse_config(&text)
}
