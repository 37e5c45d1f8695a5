//! Experiment configuration: JSON schema, defaults and validation.

use serde::{Deserialize, Serialize};

use crate::chemotaxis::{ChemoConfig, ChemoSystem};
use crate::convergence::{DataFamilySpec, Ladder};
use crate::error::{Error, Result};
use crate::functionals::{lambda_limit, PsiSpec};
use crate::grid::{integrate, Grid, ScalarField};
use crate::heat::SolverConfig;
use crate::weak::bump;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Heat,
    Chemo,
    Sweep,
    Verify,
    Report,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Heat => "heat",
            ExperimentKind::Chemo => "chemo",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Verify => "verify",
            ExperimentKind::Report => "report",
        }
    }
}

/// Dimension is the number of extents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub extents: Vec<f64>,
    pub cells: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.extents.len(), &self.extents, &self.cells)
    }

    fn violations(&self, out: &mut Vec<String>) {
        let d = self.extents.len();
        if !(1..=2).contains(&d) {
            out.push(format!("grid.extents: need 1 or 2 entries, got {d}"));
        }
        if self.cells.len() != d {
            out.push(format!(
                "grid.cells: need {d} entries to match grid.extents, got {}",
                self.cells.len()
            ));
        }
        for (i, e) in self.extents.iter().enumerate() {
            if !(*e > 0.0 && e.is_finite()) {
                out.push(format!("grid.extents[{i}]: must be positive, got {e}"));
            }
        }
        for (i, c) in self.cells.iter().enumerate() {
            if *c < 4 {
                out.push(format!("grid.cells[{i}]: need at least 4 cells, got {c}"));
            }
        }
    }
}

fn default_modes() -> Vec<u32> {
    vec![1]
}

/// Initial or source field, evaluated at cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    /// `mean + amplitude·Π cos(m_a π x_a / L_a)`.
    Cosine {
        mean: f64,
        amplitude: f64,
        #[serde(default = "default_modes")]
        modes: Vec<u32>,
    },
    /// Tensor `(1-t²)³` bump rescaled to `mass`; `center` and `radius` are
    /// fractions of the extents.
    Bump {
        mass: f64,
        center: Vec<f64>,
        radius: Vec<f64>,
    },
    /// Cell values in storage order (x fastest).
    Values {
        values: Vec<f64>,
    },
}

impl FieldSpec {
    pub fn build(&self, grid: &Grid) -> Result<ScalarField> {
        let d = grid.dim();
        let ext = grid.extents().to_vec();
        match self {
            FieldSpec::Constant { value } => Ok(ScalarField::constant(*grid, *value)),
            FieldSpec::Cosine {
                mean,
                amplitude,
                modes,
            } => Ok(ScalarField::from_fn(*grid, |x| {
                let p: f64 = (0..d)
                    .map(|a| {
                        (modes.get(a).copied().unwrap_or(0) as f64 * std::f64::consts::PI * x[a]
                            / ext[a])
                            .cos()
                    })
                    .product();
                mean + amplitude * p
            })),
            FieldSpec::Bump {
                mass,
                center,
                radius,
            } => {
                let z = ScalarField::from_fn(*grid, |x| {
                    (0..d)
                        .map(|a| bump((x[a] - center[a] * ext[a]) / (radius[a] * ext[a])))
                        .product()
                });
                let m = integrate(&z);
                if !(m > 0.0) {
                    return Err(Error::InvalidConfig(
                        "bump does not cover any cell center".into(),
                    ));
                }
                Ok(z.scaled(mass / m))
            }
            FieldSpec::Values { values } => ScalarField::new(*grid, values.clone()),
        }
    }

    fn violations(&self, path: &str, dim: usize, n_cells: Option<usize>, out: &mut Vec<String>) {
        match self {
            FieldSpec::Constant { value } => {
                if !value.is_finite() {
                    out.push(format!("{path}.value: must be finite"));
                }
            }
            FieldSpec::Cosine {
                mean,
                amplitude,
                modes,
            } => {
                if !(mean.is_finite() && amplitude.is_finite()) {
                    out.push(format!("{path}: mean and amplitude must be finite"));
                }
                if modes.len() > dim.max(1) {
                    out.push(format!("{path}.modes: at most {dim} entries"));
                }
            }
            FieldSpec::Bump {
                mass,
                center,
                radius,
            } => {
                if !(*mass >= 0.0 && mass.is_finite()) {
                    out.push(format!("{path}.mass: must be nonnegative"));
                }
                if center.len() != dim || radius.len() != dim {
                    out.push(format!("{path}: center and radius need {dim} entries"));
                }
                if radius.iter().any(|r| !(*r > 0.0)) {
                    out.push(format!("{path}.radius: entries must be positive"));
                }
            }
            FieldSpec::Values { values } => {
                if let Some(n) = n_cells {
                    if values.len() != n {
                        out.push(format!(
                            "{path}.values: need {n} entries, got {}",
                            values.len()
                        ));
                    }
                }
                if values.iter().any(|v| !v.is_finite()) {
                    out.push(format!("{path}.values: entries must be finite"));
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatSpec {
    #[serde(default)]
    pub kappa: f64,
    pub v0: FieldSpec,
    #[serde(default)]
    pub source: Option<FieldSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChemoSpec {
    pub system: ChemoSystem,
    pub u0: FieldSpec,
    pub v0: FieldSpec,
}

/// A heat ε-sweep over `family`, or, when the experiment has a `chemo`
/// block, a sweep of the system's regularization parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub family: Option<DataFamilySpec>,
    pub ladder: Ladder,
    #[serde(default)]
    pub kappa: f64,
}

mod defaults {
    use crate::functionals::PsiSpec;

    pub fn levels() -> Vec<f64> {
        vec![1.0, 4.0]
    }
    pub fn weights() -> Vec<f64> {
        vec![1.0]
    }
    pub fn lambdas() -> Vec<f64> {
        vec![1.0, 1.1]
    }
    pub fn psi() -> Option<PsiSpec> {
        Some(PsiSpec::quadratic_shifted())
    }
    pub fn tests() -> usize {
        8
    }
    pub fn yes() -> bool {
        true
    }
    pub fn t_end() -> f64 {
        1.0
    }
}

/// Which checks and ladders to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    #[serde(default = "defaults::levels")]
    pub truncation_levels: Vec<f64>,
    #[serde(default = "defaults::weights")]
    pub weights: Vec<f64>,
    #[serde(default = "defaults::lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "defaults::psi")]
    pub psi: Option<PsiSpec>,
    #[serde(default = "defaults::tests")]
    pub test_functions: usize,
    #[serde(default = "defaults::yes")]
    pub weak: bool,
    #[serde(default = "defaults::yes")]
    pub supersolution: bool,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self {
            truncation_levels: defaults::levels(),
            weights: defaults::weights(),
            lambdas: defaults::lambdas(),
            psi: defaults::psi(),
            test_functions: defaults::tests(),
            weak: true,
            supersolution: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    pub archive: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "defaults::t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub heat: Option<HeatSpec>,
    #[serde(default)]
    pub chemo: Option<ChemoSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub checks: CheckSpec,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub report: Option<ReportSpec>,
}

impl ExperimentConfig {
    pub fn chemo_config(&self) -> ChemoConfig {
        ChemoConfig {
            dt: self.solver.dt,
            linear_tol: self.solver.linear_tol,
            max_iter: self.solver.max_iter,
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        self.grid
            .as_ref()
            .ok_or_else(|| Error::Config(vec!["grid: required".into()]))?
            .build()
    }

    /// Every violated constraint, each prefixed with its path.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.kind == ExperimentKind::Report {
            return out;
        }
        let Some(grid) = &self.grid else {
            out.push("grid: required".into());
            return out;
        };
        grid.violations(&mut out);
        let dim = grid.extents.len();
        let n_cells = (grid.cells.len() == dim).then(|| grid.cells.iter().product());
        if let Err(e) = self.solver.validate() {
            out.push(format!("solver: {e}"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            out.push(format!("t_end: must be positive, got {}", self.t_end));
        }
        let need = |present: bool, key: &str, out: &mut Vec<String>| {
            if !present {
                out.push(format!(
                    "{key}: required for a {} experiment",
                    self.kind.name()
                ));
            }
        };
        match self.kind {
            ExperimentKind::Heat => need(self.heat.is_some(), "heat", &mut out),
            ExperimentKind::Chemo => need(self.chemo.is_some(), "chemo", &mut out),
            ExperimentKind::Sweep => {
                need(self.sweep.is_some(), "sweep", &mut out);
                if let Some(s) = &self.sweep {
                    if s.family.is_none() && self.chemo.is_none() {
                        out.push("sweep.family: required unless a chemo block selects an ε-sweep of the system".into());
                    }
                }
            }
            ExperimentKind::Verify => {
                if self.heat.is_some() == self.chemo.is_some() {
                    out.push("heat, chemo: a verify experiment needs exactly one of them".into());
                }
            }
            ExperimentKind::Report => {}
        }
        if let Some(h) = &self.heat {
            if !(h.kappa >= 0.0 && h.kappa.is_finite()) {
                out.push(format!("heat.kappa: must be nonnegative, got {}", h.kappa));
            }
            h.v0.violations("heat.v0", dim, n_cells, &mut out);
            if let Some(f) = &h.source {
                f.violations("heat.source", dim, n_cells, &mut out);
            }
        }
        if let Some(c) = &self.chemo {
            if let Err(e) = c.system.validate() {
                out.push(format!("chemo.system: {e}"));
            }
            c.u0.violations("chemo.u0", dim, n_cells, &mut out);
            c.v0.violations("chemo.v0", dim, n_cells, &mut out);
        }
        if let Some(s) = &self.sweep {
            if let Err(e) = s.ladder.validate() {
                out.push(format!("sweep.ladder: {e}"));
            }
            if !(s.kappa >= 0.0 && s.kappa.is_finite()) {
                out.push(format!("sweep.kappa: must be nonnegative, got {}", s.kappa));
            }
            if let Some(f) = &s.family {
                out.extend(
                    f.violations()
                        .into_iter()
                        .map(|v| format!("sweep.family.{v}")),
                );
            }
        }
        let c = &self.checks;
        for (i, k) in c.truncation_levels.iter().enumerate() {
            if !(*k > 0.0 && k.is_finite()) {
                out.push(format!(
                    "checks.truncation_levels[{i}]: must be positive, got {k}"
                ));
            }
        }
        for (i, r) in c.weights.iter().enumerate() {
            if !(*r > 0.5 && r.is_finite()) {
                out.push(format!(
                    "checks.weights[{i}]: weighted gradients need r > 1/2, got {r}"
                ));
            }
        }
        for (i, l) in c.lambdas.iter().enumerate() {
            if !(*l >= 1.0 && *l < lambda_limit(dim)) {
                out.push(format!(
                    "checks.lambdas[{i}]: λ = {l} outside λ ∈ [1, (n+2)/(n+1)) = [1, {}) for n = {dim}",
                    lambda_limit(dim)
                ));
            }
        }
        if let Some(p) = &c.psi {
            if let Err(e) = p.validate() {
                out.push(format!("checks.psi: {e}"));
            }
        }
        if c.test_functions == 0 {
            out.push("checks.test_functions: must be positive".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Pretty JSON with every default filled in.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parse and validate. Syntax and schema errors carry the path of the
/// offending key; validation reports every violation at once.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." {
            "(root)".to_string()
        } else {
            path
        };
        Error::Config(vec![format!("{path}: {}", e.into_inner())])
    })?;
    cfg.validate()?;
    Ok(cfg)
}
