//! Acceptance gate. Runs every criterion at desk scale, prints one line per
//! criterion and exits non-zero if any fails.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use gradlab::chemotaxis::{
    solve_chemo, ChemoConfig, ChemoRun, ChemoSystem, DampeningSpec, Variant,
};
use gradlab::convergence::{
    cauchy_c0l1, cauchy_lambda_gradients, cauchy_psi_gradients, cauchy_spacetime_l1,
    cauchy_truncated_gradients, cauchy_weighted_gradients, data_ladder, make_data_family,
    run_chemo_eps_sweep, run_eps_sweep, ChemoTemplate, ConvergenceReport, DataFamilySpec,
    HeatTemplate, Ladder, SweepResult, Verdict,
};
use gradlab::error::Error;
use gradlab::functionals::{
    build_dlvp_phi, check_knots, landes_apply, landes_sigma_ladder, truncate,
    truncated_gradient_energy, verify_landes, weighted_gradient_energy, young_constant,
    OrliczFamily, PsiSpec,
};
use gradlab::grid::{integrate, l1_norm, Grid, ScalarField};
use gradlab::heat::{solve_heat, HeatProblem, HeatSource, SolverConfig};
use gradlab::io::{load_archived_config, parse_config, run_experiment};
use gradlab::verifier::{
    check_dissipation_bounds, check_heat_apriori, check_ln_supersolution, check_mass_budget,
    check_phi_supersolution, check_weak_solution_v, mass_budget_defects, PhiSupersolFamily,
};
use gradlab::weak::{TestFunctionSet, WeakQuadrature};

// Pinned tolerances and constants of the criteria.
const TOL_MASS_IDENTITY: f64 = 1e-9;
const TOL_LANDES_STEP: f64 = 1e-10;
const TOL_MASS_B: f64 = 1e-9;
const TOL_LOWER_B: f64 = 1e-9;
const TOL_UPPER_C: f64 = 1e-12;
const TOL_MASS_MARGIN_C: f64 = 1e-9;
const TOL_BUDGET_A: f64 = 1e-9;
const SPREAD_LIMIT: f64 = 2.0;
const INCREMENT_RATIO: f64 = 0.2;
const DEFECT: f64 = 1e-3;
const HALVING_SHRINK: f64 = 0.6;

// Desk scale.
const N: usize = 256;
const DT: f64 = 1e-3;
const T: f64 = 1.0;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn line(grid_n: usize) -> Grid {
    Grid::uniform_1d(1.0, grid_n).unwrap()
}

/// Mass-one data concentrated in a single cell.
fn spike(n: usize) -> ScalarField {
    let mut v = vec![0.0; n];
    v[n / 3] = n as f64;
    ScalarField::new(line(n), v).unwrap()
}

fn spike_run(n: usize) -> (HeatProblem, gradlab::grid::FieldTrajectory) {
    let p = HeatProblem::new(0.0, spike(n), HeatSource::Zero);
    let traj = solve_heat(&p, T, &SolverConfig::with_dt(DT)).unwrap();
    (p, traj)
}

fn c1_mass_identity() -> Outcome {
    let g = line(N);
    let p = HeatProblem::new(
        0.0,
        ScalarField::constant(g, 1.0),
        HeatSource::Steady(ScalarField::constant(g, 2.0)),
    );
    let traj = solve_heat(&p, T, &SolverConfig::with_dt(DT)).unwrap();
    // ‖v₀‖₁ + ‖f‖_{L¹(Ω×(0,T))} = 1 + 2T.
    let expected = 1.0 + 2.0 * T;
    let sup = traj.frames().iter().map(l1_norm).fold(0.0, f64::max);
    let err = (sup - expected).abs();
    let rep = check_heat_apriori(&traj, &p, 1.0).unwrap();
    let checker = rep.iter().find(|r| r.id == "mass_identity").unwrap();
    ensure(
        err <= TOL_MASS_IDENTITY && checker.pass,
        format!("sup_t ∫|v| = {sup:?}, |error| = {err:.2e} (limit {TOL_MASS_IDENTITY:e}), checker pass = {}", checker.pass),
    )
}

fn c2_truncated() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut msg = Vec::new();
    for n in [128, 256] {
        let (p, traj) = spike_run(n);
        assert!((integrate(&p.v0) - 1.0).abs() < 1e-12);
        for k in [1.0, 2.0, 4.0, 8.0] {
            let lhs = truncated_gradient_energy(&traj, k).unwrap();
            let margin = 2.0 * k - lhs;
            worst = worst.min(margin);
            msg.push(format!("N={n} k={k}: {lhs:.4}"));
        }
    }
    ensure(
        worst >= 0.0,
        format!("LHS vs 2k: {}; smallest margin {worst:.4}", msg.join(", ")),
    )
}

fn c3_weighted() -> Outcome {
    // 4·Σ_j 2^{-αj} = 4/(1 - 2^{-α}).
    let bounds = [(1.0, 8.0), (0.5, 4.0 / (1.0 - 2f64.powf(-0.5)))];
    let mut ok = (bounds[1].1 - 13.657).abs() < 1e-3;
    let mut msg = Vec::new();
    for n in [128, 256] {
        let (_, traj) = spike_run(n);
        for (a, b) in bounds {
            let lhs = weighted_gradient_energy(&traj, a).unwrap();
            ok &= lhs <= b;
            msg.push(format!("N={n} α={a}: {lhs:.4} <= {b:.4}"));
        }
    }
    ensure(ok, msg.join(", "))
}

fn c4_landes() -> Outcome {
    let g = line(N);
    let v0 = ScalarField::from_fn(g, |x| 1.0 + 0.5 * (PI * x[0]).cos());
    let f = ScalarField::from_fn(g, |x| 0.5 + 0.5 * (2.0 * PI * x[0]).cos());
    let traj = solve_heat(
        &HeatProblem::new(0.0, v0.clone(), HeatSource::Steady(f)),
        T,
        &SolverConfig::with_dt(DT),
    )
    .unwrap();
    let k = 1.2;
    let mut ok = true;
    let mut worst_res = 0.0f64;
    let mut worst_linf = 0.0f64;
    for sigma in [1.0, 4.0, 16.0, 64.0] {
        let eta = landes_apply(&traj, &v0, sigma, k).unwrap();
        let init = eta
            .frame(0)
            .values()
            .iter()
            .zip(v0.values())
            .all(|(e, z)| e.to_bits() == truncate(*z, k).to_bits());
        let rep = verify_landes(&eta, &traj, sigma, k);
        ok &= init
            && rep.linf <= k
            && rep.ode_residual <= TOL_LANDES_STEP
            && rep.l2h1_norm.is_finite();
        worst_res = worst_res.max(rep.ode_residual);
        worst_linf = worst_linf.max(rep.linf);
    }
    let ladder = landes_sigma_ladder(&traj, &v0, k, &[1.0, 4.0, 16.0, 64.0]).unwrap();
    let decreasing = ladder.windows(2).all(|w| w[1] < w[0]);
    ensure(
        ok && decreasing,
        format!(
            "initial value bit-exact, max ‖η‖∞ = {worst_linf} <= k = {k}, step residual {worst_res:.2e}, \
             σ-ladder ‖η - T_k v‖ = {}",
            ladder.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(" > ")
        ),
    )
}

fn c5_dlvp_young() -> Outcome {
    let g = line(N);
    let members = make_data_family(
        &DataFamilySpec::mollified_spike(1.0),
        &g,
        &[0, 1, 2, 3, 4, 5, 6],
    )
    .unwrap();
    let fam = OrliczFamily {
        name: "mollified spike data".into(),
        cell_measure: g.cell_volume(),
        members: members.iter().map(|m| m.v0.values().to_vec()).collect(),
    };
    let build = build_dlvp_phi(&[fam], 4.0).unwrap();
    let phi = build.phi;
    let knots = check_knots(&phi);
    let knots_ok = knots.knots == 10_000
        && knots.min_value >= 1.0
        && knots.min_d2 >= 0.0
        && knots.max_s_d2 <= 1.0;

    // Brute-force scan with Φ written out independently of the library.
    let c = phi.c;
    let big_phi = |s: f64| 1.0 + c * ((1.0 + s) * (1.0 + s).ln() - s);
    let dphi = |s: f64| c * (1.0 + s).ln();
    let c2 = young_constant(&phi, 100.0, 400).unwrap().c2;
    let mut worst = f64::INFINITY;
    for i in 0..400 {
        let a = 100.0 * i as f64 / 399.0;
        for j in 0..400 {
            let b = 100.0 * j as f64 / 399.0;
            worst = worst.min(big_phi(a) + c2 * big_phi(b) - a * dphi(b));
        }
    }

    // z_m = m on (0, 1/m) over 4096 cells, m = 1, 2, ..., 1024.
    let n = 4096;
    let spikes = OrliczFamily {
        name: "z_m".into(),
        cell_measure: 1.0 / n as f64,
        members: (0..=10)
            .map(|p| {
                let m = 2f64.powi(p);
                (0..n)
                    .map(|i| {
                        if (i as f64 + 0.5) / (n as f64) < 1.0 / m {
                            m
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect(),
    };
    let rejected = matches!(build_dlvp_phi(&[spikes], 4.0), Err(Error::Refused(_)));
    ensure(
        knots_ok && worst >= 0.0 && rejected,
        format!(
            "c = {c:e}, knots {} (min Φ {:.3}, min Φ'' {:.3e}, max sΦ'' {:.4}), c₂ = {c2:.4}, worst scan margin {worst:.4e}, \
             z_m rejected = {rejected}",
            knots.knots, knots.min_value, knots.min_d2, knots.max_s_d2
        ),
    )
}

fn heat_template() -> HeatTemplate {
    HeatTemplate {
        grid: line(N),
        kappa: 0.0,
        t_end: T,
        solver: SolverConfig::with_dt(DT),
    }
}

fn verdict_line(r: &ConvergenceReport) -> String {
    let d = &r.differences;
    format!(
        "{} {:?} d0={:.3e} dJ={:.3e}",
        r.quantity,
        r.verdict,
        d[0],
        d[d.len() - 1]
    )
}

fn c6_heat_sweep(sweep: &SweepResult) -> Outcome {
    let reports = vec![
        cauchy_c0l1(sweep).unwrap(),
        cauchy_spacetime_l1(sweep),
        cauchy_lambda_gradients(sweep, 1.0).unwrap(),
        cauchy_truncated_gradients(sweep, 1.0).unwrap(),
        cauchy_truncated_gradients(sweep, 4.0).unwrap(),
        cauchy_weighted_gradients(sweep, 1.0).unwrap(),
    ];
    let mut ok = sweep.members.len() == 7;
    for r in &reports {
        let d = &r.differences;
        ok &= r.verdict == Verdict::CauchyDecreasing && d[d.len() - 1] <= INCREMENT_RATIO * d[0];
    }
    let osc = run_eps_sweep(
        &DataFamilySpec::oscillating(1.0, 1.0),
        &heat_template(),
        &Ladder::new(0, 6).unwrap(),
    )
    .unwrap();
    let osc_reports = [
        data_ladder(&osc),
        cauchy_spacetime_l1(&osc),
        cauchy_truncated_gradients(&osc, 1.0).unwrap(),
    ];
    let stagnant: Vec<&str> = osc_reports
        .iter()
        .filter(|r| r.verdict == Verdict::Stagnant)
        .map(|r| r.quantity.as_str())
        .collect();
    ensure(
        ok && !stagnant.is_empty(),
        format!(
            "{}; oscillating family stagnant for [{}]",
            reports
                .iter()
                .map(verdict_line)
                .collect::<Vec<_>>()
                .join("; "),
            stagnant.join(", ")
        ),
    )
}

fn c7_psi(sweep: &SweepResult) -> Outcome {
    let psi = PsiSpec::quadratic_shifted();
    let (v, d, dd) = psi.eval(2.0);
    assert!(v == 9.0 && d == 6.0 && dd == 2.0);
    let p = cauchy_psi_gradients(sweep, &psi).unwrap();
    let hyp = p
        .hypotheses
        .iter()
        .all(|h| h.verdict == Verdict::CauchyDecreasing);
    let (lo, hi) = p
        .phi_bound
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    let spread = hi / lo;
    ensure(
        hyp && p.gradient.verdict == Verdict::CauchyDecreasing && spread <= SPREAD_LIMIT && lo > 0.0,
        format!(
            "hypotheses [{}]; {}; Φ-bound in [{lo:.4}, {hi:.4}], spread {spread:.4} <= {SPREAD_LIMIT}",
            p.hypotheses.iter().map(|h| format!("{:?}", h.verdict)).collect::<Vec<_>>().join(", "),
            verdict_line(&p.gradient)
        ),
    )
}

fn logistic() -> DampeningSpec {
    DampeningSpec::new(1.0, 1.0, 2.0).unwrap()
}

fn c8_system_b() -> Outcome {
    let g = line(N);
    let template = ChemoTemplate {
        system: ChemoSystem::new(Variant::B, 1.0, 0.5, None).unwrap(),
        u0: ScalarField::from_fn(g, |x| 1.0 + 0.5 * (PI * x[0]).cos()),
        v0: ScalarField::from_fn(g, |x| 1.0 + 0.2 * (PI * x[0]).cos()),
        t_end: T,
        config: ChemoConfig::with_dt(DT),
    };
    let sweep = run_chemo_eps_sweep(&template, &Ladder::new(1, 5).unwrap()).unwrap();
    let mut mass = 0.0f64;
    let mut lower = f64::INFINITY;
    for run in &sweep.runs {
        let m0 = integrate(run.u.frame(0));
        for u in run.u.frames() {
            mass = mass.max((integrate(u) - m0).abs() / m0);
        }
        let floor = run.v.frame(0).min() * (-T).exp();
        for v in run.v.frames() {
            lower = lower.min(v.min() - floor);
        }
    }
    let mut ok = mass <= TOL_MASS_B && lower >= -TOL_LOWER_B;
    let mut spreads = Vec::new();
    for name in [
        "log_gradient_u",
        "log_gradient_v",
        "u_power_integral[r=1.5]",
    ] {
        let col = sweep.table.column(name).unwrap();
        let finite = col.iter().all(|x| x.is_finite() && *x > 0.0);
        let s = col.iter().copied().fold(0.0, f64::max)
            / col.iter().copied().fold(f64::INFINITY, f64::min);
        ok &= finite && s <= SPREAD_LIMIT;
        spreads.push(format!("{name} {s:.4}"));
    }
    ensure(
        ok,
        format!(
            "ε = 2^-1..2^-5: max relative mass drift {mass:.2e}, min(v - min v₀·e^-T) = {lower:.3e}, spreads {}",
            spreads.join(", ")
        ),
    )
}

fn c9_system_c() -> Outcome {
    let g = line(N);
    let sys = ChemoSystem::new(Variant::C, 1.0, 0.01, Some(logistic())).unwrap();
    let u0 = ScalarField::from_fn(g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos());
    let v0 = ScalarField::from_fn(g, |x| 1.0 + 0.3 * (PI * x[0]).cos());
    let run = solve_chemo(&sys, &u0, &v0, T, &ChemoConfig::with_dt(DT)).unwrap();
    let vmax0 = v0.max();
    let over = run
        .v
        .frames()
        .iter()
        .map(|v| v.max() - vmax0)
        .fold(f64::NEG_INFINITY, f64::max);
    let reps = check_dissipation_bounds(&run);
    let qe = reps
        .iter()
        .find(|r| r.id == "quasi_energy_inequality")
        .unwrap();
    let mass = check_mass_budget(&run);
    ensure(
        over <= TOL_UPPER_C && qe.pass && mass.margin >= -TOL_MASS_MARGIN_C,
        format!(
            "max_t (max v - ‖v₀‖∞) = {over:.3e}, quasi-energy worst step margin {:.3e} (tol {:.3e}), mass margin {:.3e}",
            qe.margin, qe.tolerance, mass.margin
        ),
    )
}

fn system_a_run(n: usize, dt: f64) -> ChemoRun {
    let g = line(n);
    let sys = ChemoSystem::new(Variant::A, 1.0, 0.01, Some(logistic())).unwrap();
    let u0 = ScalarField::from_fn(g, |x| 0.5 + 0.2 * (PI * x[0]).cos());
    let v0 = ScalarField::from_fn(g, |x| 0.5 + 0.1 * (PI * x[0]).cos());
    solve_chemo(&sys, &u0, &v0, T, &ChemoConfig::with_dt(dt)).unwrap()
}

fn c10_system_a() -> Outcome {
    let mut ok = true;
    let mut worst = Vec::new();
    let mut budget = 0.0f64;
    let mut min_uv = f64::INFINITY;
    for (n, dt) in [(N / 2, 2.0 * DT), (N, DT)] {
        let run = system_a_run(n, dt);
        budget = budget.max(
            mass_budget_defects(&run)
                .iter()
                .fold(0.0, |m, d| m.max(d.abs())),
        );
        for (u, v) in run.u.frames().iter().zip(run.v.frames()) {
            min_uv = min_uv.min(u.min()).min(v.min());
        }
        let umax = run.u.frames().iter().map(|f| f.max()).fold(0.0, f64::max);
        let vmax = run.v.frames().iter().map(|f| f.max()).fold(0.0, f64::max);
        let fam = PhiSupersolFamily::standard(umax, vmax).unwrap();
        let tests = TestFunctionSet::nonnegative(run.u.grid(), T, dt, 8).unwrap();
        let reps = check_phi_supersolution(&run, &fam, &tests).unwrap();
        ok &= fam.len() == 6 && tests.len() == 8 && reps.len() == 48 && reps.iter().all(|r| r.pass);
        worst.push(reps.iter().map(|r| r.margin.abs()).fold(0.0, f64::max));
    }
    ok &= budget <= TOL_BUDGET_A && min_uv >= 0.0 && worst[1] <= HALVING_SHRINK * worst[0];
    ensure(
        ok,
        format!(
            "max budget defect {budget:.2e}, min(u, v) = {min_uv:.3e}, 48 (φ, test) pairs pass, max |margin| {:.3e} -> {:.3e} under halving",
            worst[0], worst[1]
        ),
    )
}

fn c11_sensitivity() -> Outcome {
    let g = line(N);
    let sys = ChemoSystem::new(Variant::B, 1.0, 0.1, None).unwrap();
    let u0 = ScalarField::from_fn(g, |x| 1.0 + 0.5 * (PI * x[0]).cos());
    let v0 = ScalarField::from_fn(g, |x| 1.0 + 0.3 * (2.0 * PI * x[0]).cos());
    let cfg = ChemoConfig::with_dt(DT);
    let run = solve_chemo(&sys, &u0, &v0, T, &cfg).unwrap();
    let tests = TestFunctionSet::standard(&g, T, DT, 8).unwrap();
    let positive = TestFunctionSet::nonnegative(&g, T, DT, 8).unwrap();
    let mid = run.u.steps() / 2;

    let weak = |r: &ChemoRun| {
        check_weak_solution_v(
            &r.v,
            &r.signal_equation(),
            &tests,
            WeakQuadrature::Scheme,
            cfg.linear_tol,
        )
        .unwrap()
        .pass
    };
    let ln = |r: &ChemoRun| {
        check_ln_supersolution(r, &positive)
            .unwrap()
            .iter()
            .all(|x| x.pass)
    };

    let mut bad_v = run.clone();
    bad_v.v = run.v.with_frame(mid, run.v.frame(mid).scaled(1.0 + DEFECT));
    let mut bad_u = run.clone();
    bad_u.u = run.u.with_frame(mid, run.u.frame(mid).scaled(1.0 + DEFECT));

    let clean = weak(&run) && ln(&run);
    let flips = [
        ("weak signal form, v defect", !weak(&bad_v)),
        ("ln-supersolution, u defect", !ln(&bad_u)),
    ];
    let flipped: Vec<&str> = flips.iter().filter(|f| f.1).map(|f| f.0).collect();
    ensure(
        clean && !flipped.is_empty(),
        format!(
            "clean run passes = {clean}; defect {DEFECT:e} at frame {mid} flips [{}]",
            flipped.join(", ")
        ),
    )
}

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn c12_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut names: Vec<PathBuf> = fs::read_dir(config_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    let one_thread = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let mut ok = !names.is_empty();
    let mut checked = 0;
    for path in &names {
        let cfg = parse_config(&fs::read_to_string(path).unwrap()).unwrap();
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let (a, b) = (
            root.path().join(format!("{stem}-a")),
            root.path().join(format!("{stem}-b")),
        );
        run_experiment(&cfg, &a).unwrap();
        let again = load_archived_config(&a).unwrap();
        one_thread.install(|| run_experiment(&again, &b)).unwrap();
        let (x, y) = (csv_files(&a), csv_files(&b));
        ok &= !x.is_empty() && x == y;
        checked += x.len();
    }
    ensure(
        ok,
        format!("{} configs, {checked} CSV files byte-identical after rerun from archived config.json on one thread", names.len()),
    )
}

fn main() {
    let spike_sweep = run_eps_sweep(
        &DataFamilySpec::mollified_spike(1.0),
        &heat_template(),
        &Ladder::new(0, 6).unwrap(),
    )
    .unwrap();

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("mass identity", Box::new(c1_mass_identity)),
        ("truncated gradient bound", Box::new(c2_truncated)),
        ("weighted gradient bound", Box::new(c3_weighted)),
        ("Landes regularization", Box::new(c4_landes)),
        ("Orlicz weight and Young constant", Box::new(c5_dlvp_young)),
        (
            "heat ε-sweep verdicts",
            Box::new(|| c6_heat_sweep(&spike_sweep)),
        ),
        (
            "ψ-weighted gradient ladder",
            Box::new(|| c7_psi(&spike_sweep)),
        ),
        ("conservative system", Box::new(c8_system_b)),
        ("consumption system", Box::new(c9_system_c)),
        ("production system supersolutions", Box::new(c10_system_a)),
        ("checker sensitivity", Box::new(c11_sensitivity)),
        ("determinism", Box::new(c12_determinism)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} [{tag}] {name}: {detail}", i + 1);
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
