//! Uniform cell-centered grids on boxes, cell and face fields, and the
//! discrete calculus used by every solver in the crate.
//!
//! Cells are stored row-major with axis 0 fastest. Faces are interior
//! faces only: along axis `a` there are `cells[a] - 1` faces per line, and
//! the face between cells `i` and `i + e_a` is labelled by `i`. Boundary
//! faces carry zero flux (homogeneous Neumann) and never appear in storage.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    extents: [f64; 2],
    cells: [usize; 2],
    spacing: [f64; 2],
}

impl Grid {
    pub const MIN_CELLS: usize = 4;

    pub fn new(dim: usize, extents: &[f64], cells: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if extents.len() != dim || cells.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} extents and cell counts, got {} and {}",
                extents.len(),
                cells.len()
            )));
        }
        let mut e = [1.0; 2];
        let mut c = [1usize; 2];
        let mut h = [1.0; 2];
        for a in 0..dim {
            if !(extents[a].is_finite() && extents[a] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "extent {} must be positive",
                    extents[a]
                )));
            }
            if cells[a] < Self::MIN_CELLS {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} has {} cells, need at least {}",
                    cells[a],
                    Self::MIN_CELLS
                )));
            }
            e[a] = extents[a];
            c[a] = cells[a];
            h[a] = extents[a] / cells[a] as f64;
        }
        Ok(Self {
            dim,
            extents: e,
            cells: c,
            spacing: h,
        })
    }

    pub fn uniform_1d(length: f64, n: usize) -> Result<Self> {
        Self::new(1, &[length], &[n])
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(2, &[1.0, 1.0], &[n, n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    /// Largest mesh width over the axes.
    pub fn h_max(&self) -> f64 {
        self.spacing().iter().copied().fold(0.0, f64::max)
    }

    pub fn n_cells(&self) -> usize {
        self.cells().iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn measure(&self) -> f64 {
        self.extents().iter().product()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.cells[0] * j
    }

    pub fn coords(&self, idx: usize) -> [usize; 2] {
        [idx % self.cells[0], idx / self.cells[0]]
    }

    pub fn cell_center(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.coords(idx);
        let mut x = [0.0; 2];
        x[0] = (i as f64 + 0.5) * self.spacing[0];
        if self.dim == 2 {
            x[1] = (j as f64 + 0.5) * self.spacing[1];
        }
        x
    }

    /// Number of interior faces normal to `axis`.
    pub fn face_count(&self, axis: usize) -> usize {
        let mut n = 1;
        for a in 0..self.dim {
            n *= if a == axis {
                self.cells[a] - 1
            } else {
                self.cells[a]
            };
        }
        n
    }

    /// Cells on either side of face `f` normal to `axis`.
    pub fn face_cells(&self, axis: usize, f: usize) -> (usize, usize) {
        if axis == 0 {
            let m = self.cells[0] - 1;
            let (i, j) = (f % m, f / m);
            let l = self.index(i, j);
            (l, l + 1)
        } else {
            let l = f;
            (l, l + self.cells[0])
        }
    }

    pub fn face_center(&self, axis: usize, f: usize) -> [f64; 2] {
        let (l, _) = self.face_cells(axis, f);
        let mut x = self.cell_center(l);
        x[axis] += 0.5 * self.spacing[axis];
        x
    }

    /// Face index of the face on the `+axis` side of cell `c`, if interior.
    pub fn face_plus(&self, axis: usize, c: usize) -> Option<usize> {
        let [i, j] = self.coords(c);
        if axis == 0 {
            (i + 1 < self.cells[0]).then(|| i + (self.cells[0] - 1) * j)
        } else {
            (j + 1 < self.cells[1]).then_some(c)
        }
    }

    /// Face index of the face on the `-axis` side of cell `c`, if interior.
    pub fn face_minus(&self, axis: usize, c: usize) -> Option<usize> {
        let [i, j] = self.coords(c);
        if axis == 0 {
            (i > 0).then(|| i - 1 + (self.cells[0] - 1) * j)
        } else {
            (j > 0).then(|| c - self.cells[0])
        }
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.dim == other.dim && self.cells == other.cells && self.extents == other.extents
    }
}

/// Scalar field with one value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::FieldMismatch(format!(
                "field has {} values for {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field".into()));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_cells());
        Self { grid, values }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_cells()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.n_cells())
            .map(|c| f(grid.cell_center(c)))
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert!(self.grid.same_shape(&other.grid));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_vec(self.grid, values)
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn check_grid(&self, other: &Grid) -> Result<()> {
        if self.grid.same_shape(other) {
            Ok(())
        } else {
            Err(Error::FieldMismatch(
                "fields live on different grids".into(),
            ))
        }
    }
}

/// Values on interior faces, one vector per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    grid: Grid,
    axes: Vec<Vec<f64>>,
}

impl FaceField {
    pub fn zeros(grid: Grid) -> Self {
        let axes = (0..grid.dim())
            .map(|a| vec![0.0; grid.face_count(a)])
            .collect();
        Self { grid, axes }
    }

    /// Samples `f(axis, x)` at face centers.
    pub fn from_fn(grid: Grid, f: impl Fn(usize, [f64; 2]) -> f64) -> Self {
        let axes = (0..grid.dim())
            .map(|a| {
                (0..grid.face_count(a))
                    .map(|k| f(a, grid.face_center(a, k)))
                    .collect()
            })
            .collect();
        Self { grid, axes }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    pub fn axis_mut(&mut self, a: usize) -> &mut [f64] {
        &mut self.axes[a]
    }

    /// `Σ_faces w(axis, face, value) · cellvol`.
    pub fn weighted_sum(&self, w: impl Fn(usize, usize, f64) -> f64) -> f64 {
        let vol = self.grid.cell_volume();
        let mut s = 0.0;
        for (a, vals) in self.axes.iter().enumerate() {
            for (k, &g) in vals.iter().enumerate() {
                s += w(a, k, g);
            }
        }
        s * vol
    }

    /// `Σ_faces g² · cellvol`, the discrete `∫|∇z|²`.
    pub fn energy(&self) -> f64 {
        self.weighted_sum(|_, _, g| g * g)
    }

    /// Anisotropic `Σ_faces |g| · cellvol`.
    pub fn l1(&self) -> f64 {
        self.weighted_sum(|_, _, g| g.abs())
    }

    pub fn linf(&self) -> f64 {
        self.axes.iter().flatten().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// Per-cell `|∇z|²` reconstructed as the mean of the squared values on
    /// the two faces bounding the cell along each axis; boundary faces count
    /// as zero.
    pub fn cell_magnitude_sq(&self) -> Vec<f64> {
        let g = &self.grid;
        (0..g.n_cells())
            .map(|c| {
                let mut s = 0.0;
                for a in 0..g.dim() {
                    let m = g.face_minus(a, c).map_or(0.0, |f| self.axes[a][f].powi(2));
                    let p = g.face_plus(a, c).map_or(0.0, |f| self.axes[a][f].powi(2));
                    s += 0.5 * (m + p);
                }
                s
            })
            .collect()
    }
}

/// Two-point differences `(right - left)/h` on interior faces.
pub fn face_gradient(z: &ScalarField) -> FaceField {
    let g = *z.grid();
    let v = z.values();
    let axes = (0..g.dim())
        .map(|a| {
            let inv_h = 1.0 / g.spacing()[a];
            (0..g.face_count(a))
                .map(|k| {
                    let (l, r) = g.face_cells(a, k);
                    (v[r] - v[l]) * inv_h
                })
                .collect()
        })
        .collect();
    FaceField { grid: g, axes }
}

/// Discrete divergence of a face flux with zero flux through the boundary.
pub fn divergence(flux: &FaceField) -> ScalarField {
    let g = *flux.grid();
    let mut out = vec![0.0; g.n_cells()];
    for a in 0..g.dim() {
        let inv_h = 1.0 / g.spacing()[a];
        for (k, &q) in flux.axis(a).iter().enumerate() {
            let (l, r) = g.face_cells(a, k);
            out[l] += q * inv_h;
            out[r] -= q * inv_h;
        }
    }
    ScalarField::from_vec(g, out)
}

/// Cell-centered Laplacian with mirror ghost cells (homogeneous Neumann).
pub fn laplacian_neumann(z: &ScalarField) -> ScalarField {
    divergence(&face_gradient(z))
}

/// Applies the Neumann Laplacian to a raw cell vector; used by iterative
/// solvers to avoid allocating fields.
pub(crate) fn laplacian_into(g: &Grid, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for a in 0..g.dim() {
        let inv_h2 = 1.0 / (g.spacing()[a] * g.spacing()[a]);
        for k in 0..g.face_count(a) {
            let (l, r) = g.face_cells(a, k);
            let q = (x[r] - x[l]) * inv_h2;
            out[l] += q;
            out[r] -= q;
        }
    }
}

pub fn integrate(z: &ScalarField) -> f64 {
    z.values().iter().sum::<f64>() * z.grid().cell_volume()
}

/// `∫ a·b`.
pub fn inner(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x * y)
        .sum::<f64>()
        * a.grid().cell_volume()
}

pub fn lp_norm(z: &ScalarField, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "L^p norm needs 1 <= p < inf, got {p}"
        )));
    }
    let vol = z.grid().cell_volume();
    let s: f64 = if p == 1.0 {
        z.values().iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        z.values().iter().map(|v| v * v).sum()
    } else {
        z.values().iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((s * vol).powf(1.0 / p))
}

pub fn l1_norm(z: &ScalarField) -> f64 {
    z.values().iter().map(|v| v.abs()).sum::<f64>() * z.grid().cell_volume()
}

pub fn l1_distance(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        * a.grid().cell_volume()
}

pub fn linf_norm(z: &ScalarField) -> f64 {
    z.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Frames `z_0, ..., z_M` at times `n·dt` on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrajectory {
    grid: Grid,
    dt: f64,
    frames: Vec<ScalarField>,
}

impl FieldTrajectory {
    pub fn new(dt: f64, frames: Vec<ScalarField>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidArgument("trajectory needs at least one frame".into()))?;
        let grid = *first.grid();
        for f in &frames {
            f.check_grid(&grid)?;
        }
        Ok(Self { grid, dt, frames })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn frames(&self) -> &[ScalarField] {
        &self.frames
    }

    pub fn frame(&self, n: usize) -> &ScalarField {
        &self.frames[n]
    }

    /// Number of time steps `M` (one less than the number of frames).
    pub fn steps(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.steps())
    }

    pub fn last(&self) -> &ScalarField {
        self.frames.last().expect("non-empty")
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> Self {
        Self {
            grid: self.grid,
            dt: self.dt,
            frames: self.frames.iter().map(|z| z.map(f)).collect(),
        }
    }

    /// Copy of the trajectory with frame `n` replaced.
    pub fn with_frame(&self, n: usize, frame: ScalarField) -> Self {
        let mut out = self.clone();
        out.frames[n] = frame;
        out
    }
}

/// Left-endpoint rule `Σ_{n<M} dt · I(n, z_n)` where `I` returns the spatial
/// integral of the integrand at frame `n`.
pub fn spacetime_integral(
    traj: &FieldTrajectory,
    integrand: impl Fn(usize, &ScalarField) -> f64,
) -> f64 {
    (0..traj.steps())
        .map(|n| integrand(n, traj.frame(n)))
        .sum::<f64>()
        * traj.dt()
}

/// Implicit-endpoint rule `Σ_{n=1..M} dt · I(n, z_n)`. Gradient energies of
/// backward-Euler runs are accumulated this way, matching the frames the
/// scheme dissipates on.
pub fn spacetime_integral_implicit(
    traj: &FieldTrajectory,
    integrand: impl Fn(usize, &ScalarField) -> f64,
) -> f64 {
    (1..=traj.steps())
        .map(|n| integrand(n, traj.frame(n)))
        .sum::<f64>()
        * traj.dt()
}

/// `‖a - b‖_{L¹(Ω×(0,T))}` with the left-endpoint rule.
pub fn spacetime_l1_distance(a: &FieldTrajectory, b: &FieldTrajectory) -> f64 {
    let m = a.steps().min(b.steps());
    (0..m)
        .map(|n| l1_distance(a.frame(n), b.frame(n)))
        .sum::<f64>()
        * a.dt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn make_grid_spacing() {
        let g = Grid::new(1, &[1.0], &[4]).unwrap();
        assert_eq!(g.spacing(), &[0.25]);
        assert_eq!(g.n_cells(), 4);
        assert!(Grid::new(1, &[1.0], &[3]).is_err());
        assert!(Grid::new(2, &[1.0, 2.0], &[8, 3]).is_err());
        assert!(Grid::new(3, &[1.0; 3], &[4; 3]).is_err());
        assert!(Grid::new(1, &[-1.0], &[8]).is_err());
    }

    #[test]
    fn face_layout_2d() {
        let g = Grid::new(2, &[1.0, 2.0], &[4, 5]).unwrap();
        assert_eq!(g.face_count(0), 3 * 5);
        assert_eq!(g.face_count(1), 4 * 4);
        for a in 0..2 {
            for k in 0..g.face_count(a) {
                let (l, r) = g.face_cells(a, k);
                assert_eq!(g.face_plus(a, l), Some(k));
                assert_eq!(g.face_minus(a, r), Some(k));
            }
        }
        assert_eq!(g.face_minus(0, g.index(0, 2)), None);
        assert_eq!(g.face_plus(1, g.index(1, 4)), None);
    }

    #[test]
    fn constant_has_zero_gradient_and_laplacian() {
        let g = Grid::unit_square(6).unwrap();
        let z = ScalarField::constant(g, 3.5);
        assert_eq!(face_gradient(&z).linf(), 0.0);
        assert_eq!(linf_norm(&laplacian_neumann(&z)), 0.0);
    }

    #[test]
    fn linear_profile_gradient_is_slope() {
        let g = Grid::uniform_1d(2.0, 16).unwrap();
        let z = ScalarField::from_fn(g, |x| 3.0 * x[0] - 1.0);
        for &d in face_gradient(&z).axis(0) {
            assert!((d - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_is_discrete_eigenfunction() {
        // cos(πx/L) at cell centers is mapped to -μ·cos with
        // μ = (2 - 2cos(πh/L))/h² by the mirror-ghost Laplacian.
        for n in [4usize, 8, 33] {
            let l = 1.7;
            let g = Grid::uniform_1d(l, n).unwrap();
            let h = g.spacing()[0];
            let z = ScalarField::from_fn(g, |x| (PI * x[0] / l).cos());
            let mu = (2.0 - 2.0 * (PI * h / l).cos()) / (h * h);
            let lap = laplacian_neumann(&z);
            for (a, b) in lap.values().iter().zip(z.values()) {
                assert!((a + mu * b).abs() < 1e-10 * mu);
            }
        }
    }

    #[test]
    fn face_gradient_of_cosine_second_order() {
        for n in [32usize, 64, 128] {
            let g = Grid::uniform_1d(1.0, n).unwrap();
            let h = g.spacing()[0];
            let z = ScalarField::from_fn(g, |x| (PI * x[0]).cos());
            let grad = face_gradient(&z);
            let err = (0..g.face_count(0))
                .map(|k| (grad.axis(0)[k] + PI * (PI * g.face_center(0, k)[0]).sin()).abs())
                .fold(0.0, f64::max);
            assert!(err <= 2.0 * h * h, "n={n} err={err}");
        }
    }

    #[test]
    fn laplacian_second_order_ratio() {
        let err = |n: usize| {
            let g = Grid::uniform_1d(1.0, n).unwrap();
            let z = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos());
            let lap = laplacian_neumann(&z);
            lap.values()
                .iter()
                .zip(z.values())
                .map(|(a, b)| (a + 4.0 * PI * PI * b).abs())
                .fold(0.0, f64::max)
        };
        let r = err(32) / err(64);
        assert!((3.5..=4.5).contains(&r), "ratio {r}");
    }

    #[test]
    fn green_identity_2d() {
        let g = Grid::new(2, &[1.0, 0.5], &[9, 7]).unwrap();
        let z = ScalarField::from_fn(g, |x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let phi = ScalarField::from_fn(g, |x| (x[0] * x[1]).exp());
        let lhs = inner(&laplacian_neumann(&z), &phi);
        let gz = face_gradient(&z);
        let gp = face_gradient(&phi);
        let rhs = -gz.weighted_sum(|a, k, v| v * gp.axis(a)[k]);
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn laplacian_integrates_to_zero() {
        let g = Grid::unit_square(8).unwrap();
        let z = ScalarField::from_fn(g, |x| (5.0 * x[0] * x[1]).exp());
        assert!(integrate(&laplacian_neumann(&z)).abs() < 1e-10);
    }

    #[test]
    fn norms() {
        let g = Grid::uniform_1d(1.0, 4).unwrap();
        let z = ScalarField::new(g, vec![1.0, -2.0, 3.0, -4.0]).unwrap();
        assert!((integrate(&z) + 0.5).abs() < 1e-15);
        assert!((l1_norm(&z) - 2.5).abs() < 1e-15);
        assert!((lp_norm(&z, 2.0).unwrap() - (30.0f64 / 4.0).sqrt()).abs() < 1e-14);
        assert_eq!(linf_norm(&z), 4.0);
        assert!(lp_norm(&z, 0.5).is_err());
        assert!(ScalarField::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(ScalarField::new(g, vec![0.0; 3]).is_err());
    }

    #[test]
    fn spacetime_left_endpoint() {
        // ∫_0^1 t dt with dt = 0.25 and the left rule: 0.25·(0+0.25+0.5+0.75).
        let g = Grid::uniform_1d(1.0, 4).unwrap();
        let frames = (0..=4)
            .map(|n| ScalarField::constant(g, n as f64 * 0.25))
            .collect();
        let traj = FieldTrajectory::new(0.25, frames).unwrap();
        let v = spacetime_integral(&traj, |_, z| integrate(z));
        assert!((v - 0.375).abs() < 1e-15);
        let w = spacetime_integral_implicit(&traj, |_, z| integrate(z));
        assert!((w - 0.625).abs() < 1e-15);
    }

    #[test]
    fn trajectory_rejects_mixed_grids() {
        let a = ScalarField::zeros(Grid::uniform_1d(1.0, 4).unwrap());
        let b = ScalarField::zeros(Grid::uniform_1d(1.0, 5).unwrap());
        assert!(FieldTrajectory::new(0.1, vec![a, b]).is_err());
    }
}
