//! Deterministic solver for the auxiliary transport problem
//!
//! ```text
//! v_t + b(t, x + W(t)) . grad v = 0,    v(0) = u0,
//! ```
//!
//! where `W` is a sample path (Brownian, a bounded-variation approximant,
//! or zero). Two independent schemes are provided, a semi-Lagrangian scheme
//! (RK4 feet, clamped cubic interpolation) and a first-order upwind scheme,
//! plus an RK4 characteristics integrator used as an oracle.
//!
//! The advective (non-conservative) form is discretized; the divergence
//! term of the weak formulation appears only in the verifier.

use std::fmt;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::DriftField;
use crate::error::{Error, Result};
use crate::field::{Interpolation, Point, ScalarField, SpatialGrid, MAX_DIM};
use crate::path::{mesh_time, PathKind, SamplePath};

/// Upwind stability limit on `dt * max_x sum_c |b_c| / h`.
pub const CFL_LIMIT: f64 = 0.9;
/// Feet beyond this fraction of `L` are outside the trusted band.
const TRUSTED_BAND: f64 = 0.9;
/// Relative magnitude below which values near the boundary are ignored.
const MARGIN_REL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    SemiLagrangian,
    UpwindFv,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::SemiLagrangian => "semi_lagrangian",
            Scheme::UpwindFv => "upwind_fv",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How rough drifts are regularized before stepping.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum MollifyPolicy {
    /// Mollify with `epsilon = 2h` unless the drift is tagged smooth.
    #[default]
    Auto,
    Never,
    Epsilon(f64),
}

impl MollifyPolicy {
    pub fn apply(&self, drift: &DriftField, grid: &SpatialGrid) -> Result<DriftField> {
        match *self {
            MollifyPolicy::Auto if !drift.is_smooth() => drift.mollified(grid, 2.0 * grid.spacing()),
            MollifyPolicy::Epsilon(eps) => drift.mollified(grid, eps),
            _ => Ok(drift.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportOptions {
    pub dt: f64,
    pub horizon: f64,
    /// Number of snapshot intervals `M`; the snapshot spacing `T / M` must be
    /// a whole number of time steps.
    pub snapshots: usize,
    pub scheme: Scheme,
    pub mollify: MollifyPolicy,
}

impl TransportOptions {
    pub fn new(dt: f64, horizon: f64, snapshots: usize, scheme: Scheme) -> Self {
        Self {
            dt,
            horizon,
            snapshots,
            scheme,
            mollify: MollifyPolicy::Auto,
        }
    }

    pub fn with_mollify(mut self, policy: MollifyPolicy) -> Self {
        self.mollify = policy;
        self
    }

    /// Number of time steps, checking that `dt` divides the horizon and the
    /// snapshot spacing.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0 && self.horizon.is_finite() && self.horizon > 0.0)
        {
            return Err(Error::Config(format!(
                "dt ({}) and T ({}) must be positive",
                self.dt, self.horizon
            )));
        }
        let steps = (self.horizon / self.dt).round() as usize;
        if steps == 0 || (steps as f64 * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(Error::MeshMismatch(format!(
                "dt = {} does not divide T = {}",
                self.dt, self.horizon
            )));
        }
        if self.snapshots == 0 || steps % self.snapshots != 0 {
            return Err(Error::MeshMismatch(format!(
                "{} snapshots do not divide {steps} time steps",
                self.snapshots
            )));
        }
        Ok(steps)
    }
}

/// `b_W(t, x) = b(t, x + W(t))`.
#[derive(Clone, Copy, Debug)]
pub struct ComposedDrift<'a> {
    drift: &'a DriftField,
    path: &'a SamplePath,
}

impl<'a> ComposedDrift<'a> {
    pub fn new(drift: &'a DriftField, path: &'a SamplePath) -> Result<Self> {
        if drift.dim() != path.dim() {
            return Err(Error::Config(format!(
                "drift dimension {} differs from path dimension {}",
                drift.dim(),
                path.dim()
            )));
        }
        Ok(Self { drift, path })
    }

    pub fn drift(&self) -> &DriftField {
        self.drift
    }

    pub fn path(&self) -> &SamplePath {
        self.path
    }

    pub fn eval(&self, t: f64, x: Point) -> Result<Point> {
        let w = self.path.eval(t)?;
        self.drift.eval(t, add(x, w))
    }

    fn frozen(&self, t: f64) -> Result<FrozenDrift<'a>> {
        Ok(FrozenDrift {
            drift: self.drift,
            t,
            shift: self.path.eval(t)?,
        })
    }
}

/// Composed drift with the path value at one time precomputed.
struct FrozenDrift<'a> {
    drift: &'a DriftField,
    t: f64,
    shift: Point,
}

impl FrozenDrift<'_> {
    fn eval(&self, x: Point) -> Result<Point> {
        self.drift.eval(self.t, add(x, self.shift))
    }
}

fn add(a: Point, b: Point) -> Point {
    let mut c = [0.0; MAX_DIM];
    for i in 0..MAX_DIM {
        c[i] = a[i] + b[i];
    }
    c
}

fn axpy(x: Point, a: f64, k: Point) -> Point {
    let mut c = [0.0; MAX_DIM];
    for i in 0..MAX_DIM {
        c[i] = x[i] + a * k[i];
    }
    c
}

/// Displacement `x - foot` of the backward RK4 characteristic step from
/// `(t + dt, x)` to time `t`.
fn rk4_backward_displacement(
    x: Point,
    dt: f64,
    start: &FrozenDrift<'_>,
    half: &FrozenDrift<'_>,
    end: &FrozenDrift<'_>,
) -> Result<Point> {
    let k1 = start.eval(x)?;
    let k2 = half.eval(axpy(x, -0.5 * dt, k1))?;
    let k3 = half.eval(axpy(x, -0.5 * dt, k2))?;
    let k4 = end.eval(axpy(x, -dt, k3))?;
    let mut d = [0.0; MAX_DIM];
    for i in 0..MAX_DIM {
        d[i] = dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(d)
}

/// Foot of the backward characteristic through `(t + dt, x)`.
pub fn semi_lagrangian_foot(b: &ComposedDrift<'_>, x: Point, t: f64, dt: f64) -> Result<Point> {
    let start = b.frozen(t + dt)?;
    let half = b.frozen(t + 0.5 * dt)?;
    let end = b.frozen(t)?;
    let d = rk4_backward_displacement(x, dt, &start, &half, &end)?;
    Ok(axpy(x, -1.0, d))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub field: ScalarField,
    /// Nodes whose foot left the trusted band while carrying non-negligible
    /// values (possible wrap-around contamination).
    pub flagged_feet: usize,
}

/// One semi-Lagrangian step from `t` to `t + dt`: each node takes the
/// clamped-cubic interpolant of `v` at its RK4 foot.
pub fn semi_lagrangian_step(
    v: &ScalarField,
    b: &ComposedDrift<'_>,
    t: f64,
    dt: f64,
) -> Result<StepOutput> {
    let grid = *v.grid();
    let h = grid.spacing();
    let band = TRUSTED_BAND * grid.half_width();
    let sup = v.sup_norm();
    let start = b.frozen(t + dt)?;
    let half = b.frozen(t + 0.5 * dt)?;
    let end = b.frozen(t)?;
    let dim = grid.dim();
    let out: Vec<(f64, bool)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let idx = grid.multi_index(i);
            let d = rk4_backward_displacement(x, dt, &start, &half, &end)?;
            let mut s = [0.0; MAX_DIM];
            let mut outside = false;
            for c in 0..dim {
                s[c] = idx[c] as f64 - d[c] / h;
                outside |= (x[c] - d[c]).abs() > band;
            }
            let value = v.interpolate_index(s, Interpolation::ClampedCubic);
            Ok((value, outside && value.abs() > MARGIN_REL_TOL * sup))
        })
        .collect::<Result<Vec<_>>>()?;
    let flagged_feet = out.iter().filter(|(_, f)| *f).count();
    let values = out.into_iter().map(|(v, _)| v).collect();
    Ok(StepOutput {
        field: ScalarField::from_raw(grid, values),
        flagged_feet,
    })
}

/// Largest `dt * sum_c |b_c(t, x_i)| / h` over the nodes.
pub fn cfl_number(v_grid: &SpatialGrid, b: &ComposedDrift<'_>, t: f64, dt: f64) -> Result<f64> {
    let frozen = b.frozen(t)?;
    let dim = v_grid.dim();
    let mut worst: f64 = 0.0;
    for i in 0..v_grid.len() {
        let a = frozen.eval(v_grid.node(i))?;
        worst = worst.max(a[..dim].iter().map(|c| c.abs()).sum::<f64>());
    }
    Ok(worst * dt / v_grid.spacing())
}

/// One explicit first-order upwind step of the advective form, with the
/// velocity frozen at time `t`.
pub fn upwind_fv_step(v: &ScalarField, b: &ComposedDrift<'_>, t: f64, dt: f64) -> Result<ScalarField> {
    upwind_step_indexed(v, b, t, dt, 0)
}

fn upwind_step_indexed(
    v: &ScalarField,
    b: &ComposedDrift<'_>,
    t: f64,
    dt: f64,
    step: usize,
) -> Result<ScalarField> {
    let grid = *v.grid();
    let h = grid.spacing();
    let n = grid.points_per_axis();
    let dim = grid.dim();
    let frozen = b.frozen(t)?;
    let vals = v.values();
    let velocities: Vec<Point> = (0..grid.len())
        .into_par_iter()
        .map(|i| frozen.eval(grid.node(i)))
        .collect::<Result<_>>()?;
    let number = velocities
        .iter()
        .map(|a| a[..dim].iter().map(|c| c.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        * dt
        / h;
    if number > CFL_LIMIT {
        return Err(Error::Cfl {
            step,
            number,
            limit: CFL_LIMIT,
        });
    }
    let stride = |axis: usize| if dim == 1 || axis == 1 { 1 } else { n };
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let idx = grid.multi_index(i);
            let a = velocities[i];
            let mut update = 0.0;
            for c in 0..dim {
                let s = stride(c);
                let prev = if idx[c] == 0 { i + (n - 1) * s } else { i - s };
                let next = if idx[c] == n - 1 { i - (n - 1) * s } else { i + s };
                let back = vals[i] - vals[prev];
                let fwd = vals[next] - vals[i];
                update += a[c].max(0.0) * back + a[c].min(0.0) * fwd;
            }
            vals[i] - dt / h * update
        })
        .collect();
    Ok(ScalarField::from_raw(grid, values))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportSolution {
    pub grid: SpatialGrid,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<ScalarField>,
    pub scheme: Scheme,
    pub drift_id: String,
    pub path_kind: PathKind,
    pub path_seed: Option<u64>,
    pub dt: f64,
    pub mollifier_epsilon: Option<f64>,
    /// Semi-Lagrangian feet flagged outside the trusted band, summed over
    /// all steps.
    pub flagged_feet: usize,
    /// Snapshot indices whose field reaches into the outer 10% of the box.
    pub margin_warnings: Vec<usize>,
}

impl TransportSolution {
    pub fn last(&self) -> &ScalarField {
        self.snapshots.last().expect("solutions hold the initial snapshot")
    }

    pub fn write_snapshots(&self, dir: &Path, prefix: &str) -> Result<()> {
        write_snapshot_files(&self.snapshots, dir, prefix)
    }
}

pub(crate) fn write_snapshot_files(fields: &[ScalarField], dir: &Path, prefix: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (m, f) in fields.iter().enumerate() {
        let file = std::fs::File::create(dir.join(format!("{prefix}_t{m}.csv")))?;
        f.write_csv(std::io::BufWriter::new(file))?;
    }
    Ok(())
}

/// Marches `v_t + b(t, x + W(t)) . grad v = 0` from `u0` to `T`.
pub fn solve_transport(
    b: &DriftField,
    path: &SamplePath,
    u0: &ScalarField,
    opts: &TransportOptions,
) -> Result<TransportSolution> {
    let steps = opts.steps()?;
    let grid = *u0.grid();
    if b.dim() != grid.dim() {
        return Err(Error::Config(format!(
            "drift dimension {} differs from grid dimension {}",
            b.dim(),
            grid.dim()
        )));
    }
    if path.horizon() < opts.horizon * (1.0 - 1e-12) {
        return Err(Error::MeshMismatch(format!(
            "path horizon {} shorter than T = {}",
            path.horizon(),
            opts.horizon
        )));
    }
    let drift = opts.mollify.apply(b, &grid)?;
    let composed = ComposedDrift::new(&drift, path)?;
    let stride = steps / opts.snapshots;

    let mut snapshots = vec![u0.clone()];
    let mut snapshot_times = vec![0.0];
    let mut margin_warnings = Vec::new();
    if !u0.support_margin_ok(1.0 - TRUSTED_BAND, MARGIN_REL_TOL) {
        margin_warnings.push(0);
    }
    let mut flagged_feet = 0;
    let mut v = u0.clone();
    for n in 0..steps {
        let t = mesh_time(n, steps, opts.horizon);
        let dt = mesh_time(n + 1, steps, opts.horizon) - t;
        v = match opts.scheme {
            Scheme::SemiLagrangian => {
                let out = semi_lagrangian_step(&v, &composed, t, dt)?;
                flagged_feet += out.flagged_feet;
                out.field
            }
            Scheme::UpwindFv => upwind_step_indexed(&v, &composed, t, dt, n)?,
        };
        if !v.is_finite() {
            return Err(Error::BlowUp { step: n + 1 });
        }
        if (n + 1) % stride == 0 {
            if !v.support_margin_ok(1.0 - TRUSTED_BAND, MARGIN_REL_TOL) {
                margin_warnings.push(snapshots.len());
            }
            snapshot_times.push(mesh_time(n + 1, steps, opts.horizon));
            snapshots.push(v.clone());
        }
    }
    if flagged_feet > 0 || !margin_warnings.is_empty() {
        warn!(
            "support near the periodic boundary: {flagged_feet} flagged feet, {} snapshots inside the margin",
            margin_warnings.len()
        );
    }
    Ok(TransportSolution {
        grid,
        snapshot_times,
        snapshots,
        scheme: opts.scheme,
        drift_id: drift.id(),
        path_kind: path.kind(),
        path_seed: path.seed(),
        dt: opts.dt,
        mollifier_epsilon: drift.mollifier_epsilon(),
        flagged_feet,
        margin_warnings,
    })
}

/// RK4 integrator for `dX/ds = b(s, X + W(s))` from `(t0, x)` to `t1`
/// (either direction), splitting at path knots so each RK4 step sees a
/// linear path segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharacteristicsOracle {
    pub max_step: f64,
    /// Integration fails once `|X|` exceeds this radius.
    pub blowup_radius: f64,
}

impl CharacteristicsOracle {
    pub fn new(max_step: f64, half_width: f64) -> Self {
        Self {
            max_step,
            blowup_radius: 10.0 * half_width,
        }
    }

    pub fn solve(
        &self,
        b: &DriftField,
        path: &SamplePath,
        x: Point,
        t0: f64,
        t1: f64,
    ) -> Result<Point> {
        let composed = ComposedDrift::new(b, path)?;
        let (lo, hi) = (t0.min(t1), t0.max(t1));
        let mut marks: Vec<f64> = vec![t0];
        let inner = path.times().iter().copied().filter(|s| *s > lo && *s < hi);
        if t1 >= t0 {
            marks.extend(inner);
        } else {
            let mut rev: Vec<f64> = inner.collect();
            rev.reverse();
            marks.extend(rev);
        }
        marks.push(t1);
        let dim = b.dim();
        let mut xs = x;
        for seg in marks.windows(2) {
            let (s0, s1) = (seg[0], seg[1]);
            let m = ((s1 - s0).abs() / self.max_step).ceil().max(1.0) as usize;
            let step = (s1 - s0) / m as f64;
            for j in 0..m {
                let s = s0 + j as f64 * step;
                let k1 = composed.eval(s, xs)?;
                let k2 = composed.eval(s + 0.5 * step, axpy(xs, 0.5 * step, k1))?;
                let k3 = composed.eval(s + 0.5 * step, axpy(xs, 0.5 * step, k2))?;
                let k4 = composed.eval(s + step, axpy(xs, step, k3))?;
                for i in 0..dim {
                    xs[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                let radius = xs[..dim].iter().map(|c| c * c).sum::<f64>().sqrt();
                if !(radius <= self.blowup_radius) {
                    return Err(Error::CharacteristicDiverged {
                        radius,
                        s: s + step,
                    });
                }
            }
        }
        Ok(xs)
    }
}

/// Convenience wrapper around [`CharacteristicsOracle::solve`].
pub fn characteristics_solve(
    b: &DriftField,
    path: &SamplePath,
    x: Point,
    t0: f64,
    t1: f64,
    max_step: f64,
    half_width: f64,
) -> Result<Point> {
    CharacteristicsOracle::new(max_step, half_width).solve(b, path, x, t0, t1)
}
