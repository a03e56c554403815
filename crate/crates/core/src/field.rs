//! Periodic grids, scalar fields and the operations the solvers build on:
//! L^p norms, periodic interpolation, sub-grid shifts and mollification.
//!
//! The computational domain is the periodic box `[-L, L)^d` with `N` nodes
//! per axis. Node `i` along an axis sits at `x_i = -L + i h` with
//! `h = 2L / N`. Multi-dimensional fields are stored row-major with the
//! first coordinate varying slowest.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest spatial dimension the solvers support.
pub const MAX_DIM: usize = 2;

/// A point (or vector) in the box. Components past the grid dimension are
/// ignored and kept at zero.
pub type Point = [f64; MAX_DIM];

/// Positions closer than this (in cell units) to a node are treated as the
/// node itself, so lattice shifts and zero displacements stay bit-exact.
const NODE_SNAP: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
}

impl SpatialGrid {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} not supported (expected 1 or 2)"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if points_per_axis < 8 {
            return Err(Error::InvalidGrid(format!(
                "need at least 8 points per axis, got {points_per_axis}"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            points_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    /// Quadrature weight of one node, `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of nodes, `N^d`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coordinate(&self, index: usize) -> f64 {
        -self.half_width + index as f64 * self.spacing()
    }

    /// Index of the node nearest to coordinate `x` (no wrapping).
    pub fn nearest_index(&self, x: f64) -> isize {
        ((x + self.half_width) / self.spacing()).round() as isize
    }

    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        let n = self.points_per_axis;
        match self.dim {
            1 => [flat, 0],
            _ => [flat / n, flat % n],
        }
    }

    pub fn flat_index(&self, idx: [usize; MAX_DIM]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.points_per_axis + idx[1],
        }
    }

    pub fn node(&self, flat: usize) -> Point {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for (axis, xc) in x.iter_mut().enumerate().take(self.dim) {
            *xc = self.coordinate(idx[axis]);
        }
        x
    }

    /// Maps a coordinate into `[-L, L)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let period = 2.0 * self.half_width;
        let y = (x + self.half_width).rem_euclid(period) - self.half_width;
        if y >= self.half_width {
            -self.half_width
        } else {
            y
        }
    }

    pub fn wrap_point(&self, x: Point) -> Point {
        let mut y = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            y[axis] = self.wrap(x[axis]);
        }
        y
    }

    fn wrap_index(&self, i: isize) -> usize {
        i.rem_euclid(self.points_per_axis as isize) as usize
    }
}

/// A Lebesgue exponent `p` together with its conjugate `q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LebesgueExponent {
    p: f64,
    q: f64,
}

impl LebesgueExponent {
    pub fn new(p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::Config(format!(
                "Lebesgue exponent must be finite and >= 1, got {p}"
            )));
        }
        let q = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
        Ok(Self { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// The conjugate exponent, infinite when `p = 1`.
    pub fn q(&self) -> f64 {
        self.q
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Interpolation {
    Linear,
    #[default]
    Cubic,
    /// Cubic Lagrange interpolation clamped to the range of its 4-point
    /// stencil along each axis. Never creates new extrema.
    ClampedCubic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "non-finite value {} at node {i}",
                values[i]
            )));
        }
        Ok(Self { grid, values })
    }

    /// Construction without the finiteness scan; callers check for blow-up
    /// themselves.
    pub(crate) fn from_raw(grid: SpatialGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f` at every node. Non-finite samples are rejected.
    pub fn from_fn<F>(grid: SpatialGrid, f: F) -> Result<Self>
    where
        F: Fn(Point) -> f64,
    {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &SpatialGrid {
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

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|v| c * v).collect())
    }

    /// `a * self + b * other` on the same grid.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self::from_raw(self.grid, values))
    }

    pub fn difference(&self, other: &ScalarField) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    pub(crate) fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvalidField(format!(
                "grid mismatch: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Rectangle-rule integral `sum f_i h^d`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(sum |f_i|^p h^d)^(1/p)`.
    pub fn lp_norm(&self, p: LebesgueExponent) -> Result<f64> {
        if !self.is_finite() {
            return Err(Error::InvalidField(
                "cannot take the norm of a non-finite field".into(),
            ));
        }
        let p = p.p();
        let sum: f64 = if p == 1.0 {
            self.values.iter().map(|v| v.abs()).sum()
        } else if p == 2.0 {
            self.values.iter().map(|v| v * v).sum()
        } else {
            self.values.iter().map(|v| v.abs().powf(p)).sum()
        };
        Ok((sum * self.grid.cell_volume()).powf(1.0 / p))
    }

    /// True when the field is negligible (relative to its sup norm) on
    /// every node within `fraction * L` of the periodic boundary.
    pub fn support_margin_ok(&self, fraction: f64, rel_tol: f64) -> bool {
        let sup = self.sup_norm();
        if sup == 0.0 {
            return true;
        }
        let band = (1.0 - fraction) * self.grid.half_width;
        let dim = self.grid.dim;
        self.values.iter().enumerate().all(|(i, v)| {
            let x = self.grid.node(i);
            let in_band = x[..dim].iter().any(|c| c.abs() > band);
            !in_band || v.abs() <= rel_tol * sup
        })
    }

    fn at(&self, idx: [isize; MAX_DIM]) -> f64 {
        let g = &self.grid;
        match g.dim {
            1 => self.values[g.wrap_index(idx[0])],
            _ => {
                self.values[g.wrap_index(idx[0]) * g.points_per_axis + g.wrap_index(idx[1])]
            }
        }
    }

    /// Interpolates at a position given in fractional index coordinates
    /// (`s = (x + L) / h` per axis), wrapping periodically.
    pub fn interpolate_index(&self, s: Point, order: Interpolation) -> f64 {
        let mut base = [0isize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for axis in 0..self.grid.dim {
            let (b, t) = split_index(s[axis]);
            base[axis] = b;
            frac[axis] = t;
        }
        match self.grid.dim {
            1 => interp_1d(|k| self.at([base[0] + k, 0]), frac[0], order),
            _ => interp_1d(
                |k| {
                    interp_1d(
                        |m| self.at([base[0] + k, base[1] + m]),
                        frac[1],
                        order,
                    )
                },
                frac[0],
                order,
            ),
        }
    }

    /// Periodic tensor-product interpolation at a physical point.
    pub fn interpolate(&self, x: Point, order: Interpolation) -> f64 {
        let h = self.grid.spacing();
        let l = self.grid.half_width;
        let mut s = [0.0; MAX_DIM];
        for axis in 0..self.grid.dim {
            s[axis] = (x[axis] + l) / h;
        }
        self.interpolate_index(s, order)
    }

    /// Returns `g` with `g(x) = f(x - delta)`. Shifts by whole cells are exact
    /// index rotations.
    pub fn shift(&self, delta: Point, order: Interpolation) -> ScalarField {
        let g = self.grid;
        let h = g.spacing();
        let mut cells = [0.0; MAX_DIM];
        for axis in 0..g.dim {
            cells[axis] = delta[axis] / h;
        }
        let lattice = cells[..g.dim]
            .iter()
            .all(|c| (c - c.round()).abs() < NODE_SNAP);
        if lattice {
            let mut rot = [0isize; MAX_DIM];
            for axis in 0..g.dim {
                rot[axis] = cells[axis].round() as isize;
            }
            let values = (0..g.len())
                .map(|i| {
                    let idx = g.multi_index(i);
                    self.at([idx[0] as isize - rot[0], idx[1] as isize - rot[1]])
                })
                .collect();
            return ScalarField::from_raw(g, values);
        }
        let values = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let idx = g.multi_index(i);
                let mut s = [0.0; MAX_DIM];
                for axis in 0..g.dim {
                    s[axis] = idx[axis] as f64 - cells[axis];
                }
                self.interpolate_index(s, order)
            })
            .collect();
        ScalarField::from_raw(g, values)
    }

    /// Periodic convolution with the discrete mollifier kernel.
    pub fn mollify(&self, spec: &MollifierSpec) -> Result<ScalarField> {
        let kernel = spec.discretize(&self.grid)?;
        let g = self.grid;
        let values = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let idx = g.multi_index(i);
                kernel
                    .taps
                    .iter()
                    .map(|(off, w)| {
                        w * self.at([idx[0] as isize - off[0], idx[1] as isize - off[1]])
                    })
                    .sum::<f64>()
            })
            .collect();
        Ok(ScalarField::from_raw(g, values))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let g = &self.grid;
        writeln!(
            out,
            "# grid d={} L={} N={}",
            g.dim, g.half_width, g.points_per_axis
        )?;
        match g.dim {
            1 => writeln!(out, "index,x1,value")?,
            _ => writeln!(out, "index,x1,x2,value")?,
        }
        for (i, v) in self.values.iter().enumerate() {
            let x = g.node(i);
            write!(out, "{i}")?;
            for xc in &x[..g.dim] {
                write!(out, ",{}", fmt_f64(*xc))?;
            }
            writeln!(out, ",{}", fmt_f64(*v))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<ScalarField> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty field file".into()))??;
        let grid = parse_grid_header(&header)?;
        let mut values = vec![0.0; grid.len()];
        let mut seen = 0usize;
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with("index") || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != grid.dim + 2 {
                return Err(Error::Parse(format!("bad field row: {line}")));
            }
            let index: usize = cols[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad node index: {}", cols[0])))?;
            let value: f64 = cols[cols.len() - 1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad value: {line}")))?;
            if index >= values.len() {
                return Err(Error::Parse(format!("node index {index} out of range")));
            }
            values[index] = value;
            seen += 1;
        }
        if seen != grid.len() {
            return Err(Error::Parse(format!(
                "expected {} rows, found {seen}",
                grid.len()
            )));
        }
        ScalarField::new(grid, values)
    }
}

fn parse_grid_header(line: &str) -> Result<SpatialGrid> {
    let rest = line
        .strip_prefix("# grid")
        .ok_or_else(|| Error::Parse(format!("missing grid header: {line}")))?;
    let (mut d, mut l, mut n) = (None, None, None);
    for tok in rest.split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header token: {tok}")))?;
        let bad = |_| Error::Parse(format!("bad header value: {tok}"));
        match key {
            "d" => d = Some(val.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "L" => l = Some(val.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "N" => n = Some(val.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            _ => {}
        }
    }
    match (d, l, n) {
        (Some(d), Some(l), Some(n)) => SpatialGrid::new(d, l, n),
        _ => Err(Error::Parse(format!("incomplete grid header: {line}"))),
    }
}

/// Shortest round-trip formatting; negative zero is written as zero.
pub fn fmt_f64(x: f64) -> String {
    format!("{:e}", x + 0.0)
}

fn split_index(s: f64) -> (isize, f64) {
    let r = s.round();
    if (s - r).abs() < NODE_SNAP {
        return (r as isize, 0.0);
    }
    let b = s.floor();
    (b as isize, s - b)
}

fn interp_1d<F: Fn(isize) -> f64>(at: F, t: f64, order: Interpolation) -> f64 {
    if t == 0.0 {
        return at(0);
    }
    match order {
        Interpolation::Linear => (1.0 - t) * at(0) + t * at(1),
        Interpolation::Cubic | Interpolation::ClampedCubic => {
            let (fm, f0, f1, f2) = (at(-1), at(0), at(1), at(2));
            let wm = -t * (t - 1.0) * (t - 2.0) / 6.0;
            let w0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
            let w1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
            let w2 = (t + 1.0) * t * (t - 1.0) / 6.0;
            let v = wm * fm + w0 * f0 + w1 * f1 + w2 * f2;
            if order == Interpolation::ClampedCubic {
                let lo = fm.min(f0).min(f1).min(f2);
                let hi = fm.max(f0).max(f1).max(f2);
                v.clamp(lo, hi)
            } else {
                v
            }
        }
    }
}

/// The standard bump `exp(1 / (r2 - 1))` for `r2 < 1`, zero otherwise, where
/// `r2` is the squared normalized radius.
pub fn standard_bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (1.0 / (r2 - 1.0)).exp()
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierSpec {
    epsilon: f64,
}

/// Grid-discretized mollifier: integer offsets and weights summing to one.
#[derive(Clone, Debug)]
pub struct DiscreteKernel {
    pub taps: Vec<([isize; MAX_DIM], f64)>,
}

impl DiscreteKernel {
    /// Discrete integral of the kernel density, `sum w_j` (the weights
    /// already carry the `h^d` factor).
    pub fn mass(&self) -> f64 {
        self.taps.iter().map(|(_, w)| w).sum()
    }
}

impl MollifierSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Config(format!(
                "mollifier epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Samples the bump `exp(1/((|x|/eps)^2 - 1))` on the grid offsets inside
    /// the ball of radius `eps` and renormalizes to unit mass.
    pub fn discretize(&self, grid: &SpatialGrid) -> Result<DiscreteKernel> {
        let h = grid.spacing();
        if self.epsilon < h {
            return Err(Error::UnderResolvedKernel {
                epsilon: self.epsilon,
                spacing: h,
            });
        }
        let reach = (self.epsilon / h).floor() as isize;
        let mut taps = Vec::new();
        let second = if grid.dim() == 2 { reach } else { 0 };
        for a in -reach..=reach {
            for b in -second..=second {
                let r2 = ((a * a + b * b) as f64) * h * h / (self.epsilon * self.epsilon);
                let w = standard_bump(r2);
                if w > 0.0 {
                    taps.push(([a, b], w));
                }
            }
        }
        let total: f64 = taps.iter().map(|(_, w)| w).sum();
        for (_, w) in taps.iter_mut() {
            *w /= total;
        }
        Ok(DiscreteKernel { taps })
    }
}
