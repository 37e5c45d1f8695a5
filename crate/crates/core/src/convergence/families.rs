//! Data families `(v0_ε, f_ε)` on the dyadic ladder `ε_j = 2^{-j}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{integrate, Grid, ScalarField};
use crate::heat::HeatSource;
use crate::weak::bump;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Fixed compact spike profile mollified at width `w₀·ε^γ`, `f ≡ 0`.
    MollifiedSpike,
    /// `min(C x^{-a}, L_ε)` on `(0, L)`, 1D only, `f ≡ 0`.
    TruncatedPower,
    /// Fixed spike data with source `(-1)^j·A·bump`: no limit.
    Oscillating,
    /// Constant data `mass/|Ω|` and constant source, the same for every ε.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mollifier {
    #[default]
    Gaussian,
    TopHat,
}

mod defaults {
    pub fn mass() -> f64 {
        1.0
    }
    pub fn gamma() -> f64 {
        0.5
    }
    pub fn width0() -> f64 {
        0.0625
    }
    pub fn center() -> f64 {
        0.35
    }
    pub fn radius() -> f64 {
        0.15
    }
    pub fn exponent() -> f64 {
        0.5
    }
    pub fn amplitude() -> f64 {
        1.0
    }
}

/// Recipe for a family. Lengths (`width0`) are absolute; `center` and
/// `radius` of the spike are fractions of each extent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFamilySpec {
    pub kind: FamilyKind,
    #[serde(default = "defaults::mass")]
    pub mass: f64,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub mollifier: Mollifier,
    #[serde(default = "defaults::width0")]
    pub width0: f64,
    #[serde(default = "defaults::center")]
    pub center: f64,
    #[serde(default = "defaults::radius")]
    pub radius: f64,
    #[serde(default = "defaults::exponent")]
    pub exponent: f64,
    #[serde(default = "defaults::amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub source: f64,
}

impl DataFamilySpec {
    pub fn new(kind: FamilyKind) -> Self {
        Self {
            kind,
            mass: defaults::mass(),
            gamma: defaults::gamma(),
            mollifier: Mollifier::default(),
            width0: defaults::width0(),
            center: defaults::center(),
            radius: defaults::radius(),
            exponent: defaults::exponent(),
            amplitude: defaults::amplitude(),
            source: 0.0,
        }
    }

    pub fn mollified_spike(mass: f64) -> Self {
        Self {
            mass,
            ..Self::new(FamilyKind::MollifiedSpike)
        }
    }

    pub fn truncated_power(mass: f64, exponent: f64) -> Self {
        Self {
            mass,
            exponent,
            ..Self::new(FamilyKind::TruncatedPower)
        }
    }

    pub fn oscillating(mass: f64, amplitude: f64) -> Self {
        Self {
            mass,
            amplitude,
            ..Self::new(FamilyKind::Oscillating)
        }
    }

    pub fn custom(mass: f64, source: f64) -> Self {
        Self {
            mass,
            source,
            ..Self::new(FamilyKind::Custom)
        }
    }

    pub fn with_mollifier(mut self, m: Mollifier) -> Self {
        self.mollifier = m;
        self
    }

    /// Every violated constraint, with its field name.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                out.push(msg.to_string());
            }
        };
        need(
            self.mass > 0.0 && self.mass.is_finite(),
            "mass: must be positive and finite",
        );
        need(
            self.gamma > 0.0 && self.gamma <= 1.0,
            "gamma: must lie in (0, 1]",
        );
        need(
            self.width0 > 0.0 && self.width0.is_finite(),
            "width0: must be positive",
        );
        need(
            self.center > 0.0 && self.center < 1.0,
            "center: must lie in (0, 1)",
        );
        need(
            self.radius > 0.0 && self.radius <= 0.5,
            "radius: must lie in (0, 1/2]",
        );
        need(self.amplitude.is_finite(), "amplitude: must be finite");
        need(self.source.is_finite(), "source: must be finite");
        if self.kind == FamilyKind::TruncatedPower {
            need(
                self.exponent > 0.0 && self.exponent < 1.0,
                "exponent: must lie in (0, 1)",
            );
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v.join("; ")))
        }
    }

    /// Mollification width at rung `j`, `w₀·2^{-jγ}`.
    pub fn width(&self, j: u32) -> f64 {
        self.width0 * (-(j as f64) * self.gamma).exp2()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataMember {
    pub j: u32,
    pub eps: f64,
    /// Mollification width, for the mollified family.
    pub width: Option<f64>,
    pub v0: ScalarField,
    pub source: HeatSource,
}

fn reflect(mut i: i64, n: i64) -> usize {
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Kernel weights at integer cell offsets `-K..=K`, summing to one.
fn kernel(m: Mollifier, width: f64, h: f64) -> Vec<f64> {
    let w: Vec<f64> = match m {
        Mollifier::Gaussian => {
            let k = (4.0 * width / h).floor() as i64;
            (-k..=k)
                .map(|o| (-0.5 * (o as f64 * h / width).powi(2)).exp())
                .collect()
        }
        Mollifier::TopHat => {
            // Exact overlap of each cell with [-w, w].
            let k = (width / h + 0.5).ceil() as i64;
            (-k..=k)
                .map(|o| {
                    let (a, b) = ((o as f64 - 0.5) * h, (o as f64 + 0.5) * h);
                    (b.min(width) - a.max(-width)).max(0.0)
                })
                .collect()
        }
    };
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Scatter every cell's content along `axis` with reflection at the walls.
/// Mass-exact up to round-off.
fn scatter_axis(z: &ScalarField, axis: usize, k: &[f64]) -> ScalarField {
    let g = *z.grid();
    let n = g.cells()[axis] as i64;
    let half = (k.len() / 2) as i64;
    let mut out = vec![0.0; g.n_cells()];
    for (idx, &val) in z.values().iter().enumerate() {
        if val == 0.0 {
            continue;
        }
        let c = g.coords(idx);
        for (o, &w) in k.iter().enumerate() {
            let t = reflect(c[axis] as i64 + o as i64 - half, n);
            let mut d = c;
            d[axis] = t;
            out[g.index(d[0], d[1])] += val * w;
        }
    }
    ScalarField::new(g, out).expect("same grid")
}

fn renormalize(z: ScalarField, mass: f64) -> Result<ScalarField> {
    let m = integrate(&z);
    if !(m > 0.0) {
        return Err(Error::InvalidArgument(
            "profile has no mass on this grid".into(),
        ));
    }
    Ok(z.scaled(mass / m))
}

fn spike_profile(spec: &DataFamilySpec, grid: &Grid) -> Result<ScalarField> {
    let ext = grid.extents().to_vec();
    for (a, &e) in ext.iter().enumerate() {
        if spec.radius * e < 2.0 * grid.spacing()[a] {
            return Err(Error::InvalidArgument(format!(
                "grid cannot resolve the spike profile (radius {} < 2h); refine the grid",
                spec.radius * e
            )));
        }
    }
    let dim = grid.dim();
    let z = ScalarField::from_fn(*grid, |x| {
        (0..dim)
            .map(|a| bump((x[a] - spec.center * ext[a]) / (spec.radius * ext[a])))
            .product()
    });
    renormalize(z, spec.mass)
}

fn mollify(spec: &DataFamilySpec, base: &ScalarField, width: f64) -> Result<ScalarField> {
    let g = *base.grid();
    let h = g.h_max();
    if width < 2.0 * h * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "grid cannot resolve this ε; refine or shorten ladder (width {width:e} < 2h = {:e})",
            2.0 * h
        )));
    }
    let mut z = base.clone();
    for a in 0..g.dim() {
        z = scatter_axis(&z, a, &kernel(spec.mollifier, width, g.spacing()[a]));
    }
    renormalize(z, spec.mass)
}

/// Cell averages of `min(C x^{-a}, level)` on a 1D grid, exact.
fn power_cells(grid: &Grid, c: f64, a: f64, level: Option<f64>) -> ScalarField {
    let xs = level.map_or(0.0, |l| (c / l).powf(1.0 / a));
    let prim = |x: f64| -> f64 {
        let tail = |y: f64| c * y.powf(1.0 - a) / (1.0 - a);
        match level {
            Some(l) if x <= xs => l * x,
            Some(l) => l * xs + tail(x) - tail(xs),
            None => tail(x),
        }
    };
    let h = grid.spacing()[0];
    let vals = (0..grid.n_cells())
        .map(|i| (prim((i + 1) as f64 * h) - prim(i as f64 * h)) / h)
        .collect();
    ScalarField::new(*grid, vals).expect("same grid")
}

fn power_constant(spec: &DataFamilySpec, grid: &Grid) -> Result<(f64, f64)> {
    if grid.dim() != 1 {
        return Err(Error::InvalidArgument(
            "the truncated-power family is implemented for 1D grids".into(),
        ));
    }
    let a = spec.exponent;
    let len = grid.extents()[0];
    Ok((spec.mass * (1.0 - a) / len.powf(1.0 - a), a))
}

/// `min(C x^{-a}, L)` with mass defect `ε·mass/2`.
fn truncated_power(spec: &DataFamilySpec, grid: &Grid, eps: f64) -> Result<ScalarField> {
    let (c, a) = power_constant(spec, grid)?;
    let defect = 0.5 * eps * spec.mass;
    // defect = a/(1-a)·C^{1/a}·L^{1-1/a}
    let level = (defect * (1.0 - a) / (a * c.powf(1.0 / a))).powf(a / (a - 1.0));
    let xs = (c / level).powf(1.0 / a);
    let (len, h) = (grid.extents()[0], grid.spacing()[0]);
    if xs >= len {
        return Err(Error::InvalidArgument(format!(
            "ε = {eps} too large for the truncated-power exponent {a}"
        )));
    }
    if xs < h {
        return Err(Error::InvalidArgument(format!(
            "grid cannot resolve this ε; refine or shorten ladder (truncation point {xs:e} < h = {h:e})"
        )));
    }
    Ok(power_cells(grid, c, a, Some(level)))
}

fn oscillating_source(spec: &DataFamilySpec, grid: &Grid, j: u32) -> HeatSource {
    let ext = grid.extents().to_vec();
    let dim = grid.dim();
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    let f = ScalarField::from_fn(*grid, |x| {
        sign * spec.amplitude
            * (0..dim)
                .map(|a| bump((x[a] - 0.5 * ext[a]) / (0.25 * ext[a])))
                .product::<f64>()
    });
    HeatSource::Steady(f)
}

fn constant_source(spec: &DataFamilySpec, grid: &Grid) -> HeatSource {
    if spec.source == 0.0 {
        HeatSource::Zero
    } else {
        HeatSource::Steady(ScalarField::constant(*grid, spec.source))
    }
}

/// Members for the rungs `js`, in order.
pub fn make_data_family(spec: &DataFamilySpec, grid: &Grid, js: &[u32]) -> Result<Vec<DataMember>> {
    spec.validate()?;
    let base = match spec.kind {
        FamilyKind::MollifiedSpike | FamilyKind::Oscillating => Some(spike_profile(spec, grid)?),
        _ => None,
    };
    js.iter()
        .map(|&j| {
            let eps = (-(j as f64)).exp2();
            let (v0, source, width) = match spec.kind {
                FamilyKind::MollifiedSpike => {
                    let w = spec.width(j);
                    (
                        mollify(spec, base.as_ref().expect("spike"), w)?,
                        HeatSource::Zero,
                        Some(w),
                    )
                }
                FamilyKind::TruncatedPower => {
                    (truncated_power(spec, grid, eps)?, HeatSource::Zero, None)
                }
                FamilyKind::Oscillating => (
                    base.clone().expect("spike"),
                    oscillating_source(spec, grid, j),
                    None,
                ),
                FamilyKind::Custom => (
                    ScalarField::constant(*grid, spec.mass / grid.measure()),
                    constant_source(spec, grid),
                    None,
                ),
            };
            Ok(DataMember {
                j,
                eps,
                width,
                v0,
                source,
            })
        })
        .collect()
}

/// The limit data `(v₀, f)` as cell averages on `grid`.
pub fn limit_data(spec: &DataFamilySpec, grid: &Grid) -> Result<(ScalarField, HeatSource)> {
    spec.validate()?;
    match spec.kind {
        FamilyKind::MollifiedSpike => Ok((spike_profile(spec, grid)?, HeatSource::Zero)),
        FamilyKind::TruncatedPower => {
            let (c, a) = power_constant(spec, grid)?;
            Ok((power_cells(grid, c, a, None), HeatSource::Zero))
        }
        FamilyKind::Oscillating => Err(Error::Refused(
            "the oscillating family has no L¹ limit".into(),
        )),
        FamilyKind::Custom => Ok((
            ScalarField::constant(*grid, spec.mass / grid.measure()),
            constant_source(spec, grid),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::l1_distance;

    fn grid(n: usize) -> Grid {
        Grid::uniform_1d(1.0, n).unwrap()
    }

    #[test]
    fn spike_members_carry_the_target_mass() {
        for m in [Mollifier::Gaussian, Mollifier::TopHat] {
            let spec = DataFamilySpec::mollified_spike(1.0).with_mollifier(m);
            for d in make_data_family(&spec, &grid(256), &[0, 2, 5]).unwrap() {
                assert!((integrate(&d.v0) - 1.0).abs() <= 1e-10);
                assert!(d.v0.min() >= 0.0);
            }
        }
        let g2 = Grid::unit_square(64).unwrap();
        let d = make_data_family(&DataFamilySpec::mollified_spike(2.0), &g2, &[0]).unwrap();
        assert!((integrate(&d[0].v0) - 2.0).abs() <= 1e-10);
    }

    #[test]
    fn unresolvable_width_is_an_error() {
        let spec = DataFamilySpec::mollified_spike(1.0);
        let e = make_data_family(&spec, &grid(64), &[0, 4])
            .unwrap_err()
            .to_string();
        assert!(
            e.contains("grid cannot resolve this ε; refine or shorten ladder"),
            "{e}"
        );
        // Finest admissible rung at N = 256 and w₀ = 1/16 is j = 6 (width exactly 2h).
        assert!(make_data_family(&spec, &grid(256), &[6]).is_ok());
        assert!(make_data_family(&spec, &grid(256), &[7]).is_err());
    }

    /// `S * G_w - S` is `½w²S'' + O(w⁴)` for a C² profile `S`, so successive
    /// distances along `w_j = w₀2^{-j/2}` shrink by a factor tending to 1/2.
    #[test]
    fn successive_data_distances_decrease() {
        let spec = DataFamilySpec::mollified_spike(1.0);
        let fam = make_data_family(&spec, &grid(256), &[0, 1, 2, 3, 4, 5]).unwrap();
        let d: Vec<f64> = fam
            .windows(2)
            .map(|w| l1_distance(&w[0].v0, &w[1].v0))
            .collect();
        assert!(d.windows(2).all(|p| p[1] < p[0]), "{d:?}");
        let r = d[4] / d[3];
        assert!((0.4..0.6).contains(&r), "{d:?}");
    }

    #[test]
    fn truncated_power_mass_defect_is_half_eps() {
        let spec = DataFamilySpec::truncated_power(1.0, 0.5);
        let fam = make_data_family(&spec, &grid(256), &[1, 2, 3, 4]).unwrap();
        for d in &fam {
            let defect = 1.0 - integrate(&d.v0);
            assert!(
                (defect - 0.5 * d.eps).abs() <= 1e-12,
                "{defect} vs {}",
                d.eps
            );
        }
        let (lim, _) = limit_data(&spec, &grid(256)).unwrap();
        assert!((integrate(&lim) - 1.0).abs() <= 1e-12);
        assert!(make_data_family(&spec, &grid(256), &[6]).is_err());
        assert!(make_data_family(&spec, &Grid::unit_square(16).unwrap(), &[1]).is_err());
    }

    #[test]
    fn custom_family_is_eps_independent() {
        let spec = DataFamilySpec::custom(2.0, 0.5);
        let fam = make_data_family(&spec, &grid(32), &[0, 3, 7]).unwrap();
        assert!(fam
            .windows(2)
            .all(|w| w[0].v0 == w[1].v0 && w[0].source == w[1].source));
    }

    #[test]
    fn oscillating_source_alternates() {
        let spec = DataFamilySpec::oscillating(1.0, 1.0);
        let fam = make_data_family(&spec, &grid(64), &[0, 1]).unwrap();
        let f = |d: &DataMember| match &d.source {
            HeatSource::Steady(f) => f.clone(),
            _ => panic!(),
        };
        assert_eq!(f(&fam[0]).values(), f(&fam[1]).scaled(-1.0).values());
        assert!(limit_data(&spec, &grid(64)).is_err());
    }

    #[test]
    fn reflection_stays_inside() {
        for i in -20..40 {
            assert!(reflect(i, 7) < 7);
        }
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(5, 5), 4);
    }
}
