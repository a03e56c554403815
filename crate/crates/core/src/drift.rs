//! Drift fields `b(t, x)` with analytic metadata, and the numerical audit of
//! the integrability/regularity conditions the uniqueness theory places on
//! them.
//!
//! Every catalog drift is separable, `b(t, x) = g(t) b0(x)`. Rough profiles
//! can be replaced by a grid-mollified copy before they are handed to a
//! solver; the mollified drift has no analytic derivatives and falls back to
//! centered differences.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::field::{
    fmt_f64, Interpolation, MollifierSpec, Point, ScalarField, SpatialGrid, MAX_DIM,
};

pub type Jacobian = [[f64; MAX_DIM]; MAX_DIM];

/// Relative step of the centered-difference fallback, `h_b = 1e-4 L`.
const FD_RELATIVE_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RegularityTag {
    Smooth,
    DivergenceFree,
    Periodic,
    /// Locally W^{1,q} for the exponents the catalog documents, but not C^1.
    Sobolev,
    /// Derivatives blow up somewhere in the box.
    Rough,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DriftProfile {
    Zero,
    Constant(Point),
    /// `b(x) = A x`.
    Linear(Jacobian),
    /// `(-d psi / d x2, d psi / d x1)` for `psi = a cos(pi x1 / L) cos(pi x2 / L)`.
    StreamFunction { amplitude: f64, half_width: f64 },
    /// `(a sin(pi x2 / L), 0)`.
    Shear { amplitude: f64, half_width: f64 },
    /// `a sin(pi x1 / L)` along the first axis.
    Sine { amplitude: f64, half_width: f64 },
    /// One-dimensional `sign(x) |x|^alpha`.
    Power { alpha: f64 },
}

/// Time factor `g(t)` of a separable drift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Modulation {
    Steady,
    Cosine { omega: f64 },
}

impl Modulation {
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            Modulation::Steady => 1.0,
            Modulation::Cosine { omega } => (omega * t).cos(),
        }
    }
}

/// Spatial profile sampled on a grid and mollified, evaluated by periodic
/// cubic interpolation.
#[derive(Clone, Debug, PartialEq)]
struct SmoothedProfile {
    epsilon: f64,
    components: Vec<ScalarField>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftField {
    dim: usize,
    profile: DriftProfile,
    modulation: Modulation,
    smoothed: Option<SmoothedProfile>,
    analytic_derivatives: bool,
}

/// Divergence value with a flag telling whether it came from the
/// finite-difference fallback.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Divergence {
    pub value: f64,
    pub approximate: bool,
}

impl DriftField {
    fn new(dim: usize, profile: DriftProfile) -> Self {
        Self {
            dim,
            profile,
            modulation: Modulation::Steady,
            smoothed: None,
            analytic_derivatives: true,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, DriftProfile::Zero)
    }

    pub fn constant(c: &[f64]) -> Result<Self> {
        let dim = check_dim(c.len())?;
        let mut v = [0.0; MAX_DIM];
        v[..dim].copy_from_slice(c);
        Ok(Self::new(dim, DriftProfile::Constant(v)))
    }

    /// `b(x) = A x` with `A` given row by row.
    pub fn linear(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = check_dim(rows.len())?;
        let mut a = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Config(format!(
                    "linear drift matrix must be {dim}x{dim}"
                )));
            }
            a[i][..dim].copy_from_slice(row);
        }
        Ok(Self::new(dim, DriftProfile::Linear(a)))
    }

    pub fn stream_function(amplitude: f64, half_width: f64) -> Self {
        Self::new(
            2,
            DriftProfile::StreamFunction {
                amplitude,
                half_width,
            },
        )
    }

    pub fn shear(amplitude: f64, half_width: f64) -> Self {
        Self::new(
            2,
            DriftProfile::Shear {
                amplitude,
                half_width,
            },
        )
    }

    pub fn sine(dim: usize, amplitude: f64, half_width: f64) -> Result<Self> {
        let dim = check_dim(dim)?;
        Ok(Self::new(
            dim,
            DriftProfile::Sine {
                amplitude,
                half_width,
            },
        ))
    }

    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Config(format!(
                "power drift exponent must be positive, got {alpha}"
            )));
        }
        Ok(Self::new(1, DriftProfile::Power { alpha }))
    }

    pub fn with_modulation(mut self, modulation: Modulation) -> Self {
        self.modulation = modulation;
        self
    }

    /// Forces the centered-difference fallback for divergence and Jacobian.
    pub fn without_analytic_derivatives(mut self) -> Self {
        self.analytic_derivatives = false;
        self
    }

    /// Replaces the spatial profile by its periodic mollification on `grid`
    /// with kernel radius `epsilon`.
    pub fn mollified(&self, grid: &SpatialGrid, epsilon: f64) -> Result<Self> {
        if grid.dim() != self.dim {
            return Err(Error::Config(format!(
                "drift dimension {} does not match grid dimension {}",
                self.dim,
                grid.dim()
            )));
        }
        let spec = MollifierSpec::new(epsilon)?;
        let mut components = Vec::with_capacity(self.dim);
        for axis in 0..self.dim {
            let sampled = ScalarField::new(
                *grid,
                (0..grid.len())
                    .map(|i| self.profile_value(grid.node(i)).map(|v| v[axis]))
                    .collect::<Result<Vec<_>>>()?,
            )?;
            components.push(sampled.mollify(&spec)?);
        }
        Ok(Self {
            dim: self.dim,
            profile: self.profile.clone(),
            modulation: self.modulation,
            smoothed: Some(SmoothedProfile {
                epsilon,
                components,
            }),
            analytic_derivatives: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn profile(&self) -> &DriftProfile {
        &self.profile
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    /// Mollifier radius when the drift has been smoothed.
    pub fn mollifier_epsilon(&self) -> Option<f64> {
        self.smoothed.as_ref().map(|s| s.epsilon)
    }

    pub fn id(&self) -> String {
        let base = match self.profile {
            DriftProfile::Zero => "zero",
            DriftProfile::Constant(_) => "constant",
            DriftProfile::Linear(_) => "linear",
            DriftProfile::StreamFunction { .. } => "stream",
            DriftProfile::Shear { .. } => "shear",
            DriftProfile::Sine { .. } => "sine",
            DriftProfile::Power { .. } => "power1d",
        };
        match &self.smoothed {
            Some(s) => format!("{base}~eps{}", fmt_f64(s.epsilon)),
            None => base.to_string(),
        }
    }

    pub fn regularity(&self) -> Vec<RegularityTag> {
        use RegularityTag::*;
        if self.smoothed.is_some() {
            return vec![Smooth];
        }
        match self.profile {
            DriftProfile::Zero | DriftProfile::Constant(_) => vec![Smooth, DivergenceFree, Periodic],
            DriftProfile::Linear(_) => vec![Smooth],
            DriftProfile::StreamFunction { .. } | DriftProfile::Shear { .. } => {
                vec![Smooth, DivergenceFree, Periodic]
            }
            DriftProfile::Sine { .. } => vec![Smooth, Periodic],
            DriftProfile::Power { alpha } if alpha >= 1.0 => vec![Sobolev],
            DriftProfile::Power { .. } => vec![Sobolev, Rough],
        }
    }

    pub fn is_smooth(&self) -> bool {
        self.regularity().contains(&RegularityTag::Smooth)
    }

    /// True for the zero drift and constant drifts without time modulation.
    pub fn as_constant(&self) -> Option<Point> {
        if self.modulation != Modulation::Steady || self.smoothed.is_some() {
            return None;
        }
        match self.profile {
            DriftProfile::Zero => Some([0.0; MAX_DIM]),
            DriftProfile::Constant(c) => Some(c),
            _ => None,
        }
    }

    fn profile_value(&self, x: Point) -> Result<Point> {
        let mut b = [0.0; MAX_DIM];
        match self.profile {
            DriftProfile::Zero => {}
            DriftProfile::Constant(c) => b = c,
            DriftProfile::Linear(a) => {
                for i in 0..self.dim {
                    b[i] = (0..self.dim).map(|j| a[i][j] * x[j]).sum();
                }
            }
            DriftProfile::StreamFunction {
                amplitude,
                half_width,
            } => {
                let k = std::f64::consts::PI / half_width;
                let (s1, c1) = (k * x[0]).sin_cos();
                let (s2, c2) = (k * x[1]).sin_cos();
                b[0] = amplitude * k * c1 * s2;
                b[1] = -amplitude * k * s1 * c2;
            }
            DriftProfile::Shear {
                amplitude,
                half_width,
            } => {
                b[0] = amplitude * (std::f64::consts::PI * x[1] / half_width).sin();
            }
            DriftProfile::Sine {
                amplitude,
                half_width,
            } => {
                b[0] = amplitude * (std::f64::consts::PI * x[0] / half_width).sin();
            }
            DriftProfile::Power { alpha } => {
                b[0] = x[0].signum() * x[0].abs().powf(alpha);
                if x[0] == 0.0 {
                    b[0] = 0.0;
                }
            }
        }
        Ok(b)
    }

    fn spatial_value(&self, x: Point) -> Result<Point> {
        match &self.smoothed {
            Some(s) => {
                let mut b = [0.0; MAX_DIM];
                for (axis, comp) in s.components.iter().enumerate() {
                    b[axis] = comp.interpolate(x, Interpolation::Cubic);
                }
                Ok(b)
            }
            None => self.profile_value(x),
        }
    }

    pub fn eval(&self, t: f64, x: Point) -> Result<Point> {
        let g = self.modulation.factor(t);
        let mut b = self.spatial_value(x)?;
        for v in b.iter_mut().take(self.dim) {
            *v *= g;
        }
        if b[..self.dim].iter().any(|v| !v.is_finite()) {
            return Err(self.eval_error(t, x, format!("non-finite drift {:?}", &b[..self.dim])));
        }
        Ok(b)
    }

    fn eval_error(&self, t: f64, x: Point, detail: String) -> Error {
        Error::DriftEvaluation {
            t,
            x: x[..self.dim].to_vec(),
            detail,
        }
    }

    fn analytic_jacobian(&self, x: Point) -> Option<Jacobian> {
        if !self.analytic_derivatives || self.smoothed.is_some() {
            return None;
        }
        let mut j = [[0.0; MAX_DIM]; MAX_DIM];
        match self.profile {
            DriftProfile::Zero | DriftProfile::Constant(_) => {}
            DriftProfile::Linear(a) => j = a,
            DriftProfile::StreamFunction {
                amplitude,
                half_width,
            } => {
                let k = std::f64::consts::PI / half_width;
                let (s1, c1) = (k * x[0]).sin_cos();
                let (s2, c2) = (k * x[1]).sin_cos();
                let ak2 = amplitude * k * k;
                j[0][0] = -(ak2 * s1 * s2);
                j[0][1] = ak2 * c1 * c2;
                j[1][0] = -(ak2 * c1 * c2);
                j[1][1] = ak2 * s1 * s2;
            }
            DriftProfile::Shear {
                amplitude,
                half_width,
            } => {
                let k = std::f64::consts::PI / half_width;
                j[0][1] = amplitude * k * (k * x[1]).cos();
            }
            DriftProfile::Sine {
                amplitude,
                half_width,
            } => {
                let k = std::f64::consts::PI / half_width;
                j[0][0] = amplitude * k * (k * x[0]).cos();
            }
            DriftProfile::Power { alpha } => {
                j[0][0] = alpha * x[0].abs().powf(alpha - 1.0);
            }
        }
        Some(j)
    }

    fn fd_step(&self) -> f64 {
        let scale = match (&self.smoothed, &self.profile) {
            (Some(s), _) => s.components[0].grid().half_width(),
            (None, DriftProfile::StreamFunction { half_width, .. })
            | (None, DriftProfile::Shear { half_width, .. })
            | (None, DriftProfile::Sine { half_width, .. }) => *half_width,
            _ => 1.0,
        };
        FD_RELATIVE_STEP * scale
    }

    fn fd_jacobian(&self, t: f64, x: Point) -> Result<Jacobian> {
        let h = self.fd_step();
        let mut j = [[0.0; MAX_DIM]; MAX_DIM];
        for col in 0..self.dim {
            let (mut xp, mut xm) = (x, x);
            xp[col] += h;
            xm[col] -= h;
            let bp = self.eval(t, xp)?;
            let bm = self.eval(t, xm)?;
            for row in 0..self.dim {
                j[row][col] = (bp[row] - bm[row]) / (2.0 * h);
            }
        }
        Ok(j)
    }

    /// Jacobian `d b_i / d x_j` and whether it is a finite-difference estimate.
    pub fn jacobian(&self, t: f64, x: Point) -> Result<(Jacobian, bool)> {
        match self.analytic_jacobian(x) {
            Some(mut j) => {
                let g = self.modulation.factor(t);
                for row in j.iter_mut() {
                    for v in row.iter_mut() {
                        *v *= g;
                    }
                }
                if j.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(self.eval_error(t, x, "non-finite Jacobian".into()));
                }
                Ok((j, false))
            }
            None => Ok((self.fd_jacobian(t, x)?, true)),
        }
    }

    pub fn divergence(&self, t: f64, x: Point) -> Result<Divergence> {
        let (j, approximate) = self.jacobian(t, x)?;
        let value = (0..self.dim).map(|i| j[i][i]).sum();
        Ok(Divergence { value, approximate })
    }

    /// `sup |b|` (Euclidean) over the nodes of `grid` at time `t`.
    pub fn max_speed_on(&self, grid: &SpatialGrid, t: f64) -> Result<f64> {
        let mut m: f64 = 0.0;
        for i in 0..grid.len() {
            let b = self.eval(t, grid.node(i))?;
            m = m.max(b[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        Ok(m)
    }
}

impl fmt::Display for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

fn check_dim(dim: usize) -> Result<usize> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(dim)
    } else {
        Err(Error::Config(format!("unsupported drift dimension {dim}")))
    }
}

/// Axis-aligned box `[lo, hi]` used as the "local" window of the checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub dim: usize,
    pub lo: Point,
    pub hi: Point,
}

impl Window {
    pub fn cube(dim: usize, half_width: f64) -> Self {
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for axis in 0..dim {
            lo[axis] = -half_width;
            hi[axis] = half_width;
        }
        Self { dim, lo, hi }
    }

    pub fn of_grid(grid: &SpatialGrid) -> Self {
        Self::cube(grid.dim(), grid.half_width())
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.hi[a] - self.lo[a]).product()
    }

    fn scale(&self) -> f64 {
        (0..self.dim)
            .map(|a| self.lo[a].abs().max(self.hi[a].abs()))
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in 0..self.dim {
            if a > 0 {
                f.write_str("x")?;
            }
            write!(f, "[{},{}]", self.lo[a], self.hi[a])?;
        }
        Ok(())
    }
}

/// Evidence above this is treated as infinite.
pub const FINITENESS_THRESHOLD: f64 = 1e12;
/// Maximal relative change of passing evidence under sample doubling.
pub const STABILITY_TOLERANCE: f64 = 0.05;
/// Number of uniform time slices used for the trapezoid rule in `t`.
const TIME_SLICES: usize = 32;

/// Evidence number for one check at the requested and doubled sample counts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evidence {
    pub value: f64,
    pub doubled: f64,
    pub ok: bool,
}

impl Evidence {
    fn judge(value: f64, doubled: f64) -> Self {
        let finite = value.is_finite()
            && doubled.is_finite()
            && value.abs() < FINITENESS_THRESHOLD
            && doubled.abs() < FINITENESS_THRESHOLD;
        let stable =
            (doubled - value).abs() <= STABILITY_TOLERANCE * value.abs().max(doubled.abs());
        Self {
            value,
            doubled,
            ok: finite && stable,
        }
    }

    /// Relative change under sample doubling.
    pub fn relative_change(&self) -> f64 {
        let scale = self.value.abs().max(self.doubled.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.doubled - self.value).abs() / scale
        }
    }
}

/// Outcome of the hypothesis audit. All booleans follow the finiteness and
/// stability thresholds above; they are heuristics, since finiteness of an
/// integral cannot be decided from samples.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisReport {
    pub drift_id: String,
    pub q_used: f64,
    pub window: Window,
    pub horizon: f64,
    pub samples: usize,
    /// `C = int_0^T sup_x |div b| dt`.
    pub div_bound: Evidence,
    /// `(t, sup_x |div b(t, .)|)` per time slice, for cumulative envelopes.
    pub div_profile: Vec<(f64, f64)>,
    pub lq_loc: Evidence,
    pub w1q_loc: Evidence,
    pub growth: Evidence,
    pub approximate_derivatives: bool,
}

impl HypothesisReport {
    pub fn c(&self) -> f64 {
        self.div_bound.value
    }

    pub fn div_ok(&self) -> bool {
        self.div_bound.ok
    }

    pub fn lq_loc_ok(&self) -> bool {
        self.lq_loc.ok
    }

    pub fn w1q_loc_ok(&self) -> bool {
        self.w1q_loc.ok
    }

    pub fn growth_ok(&self) -> bool {
        self.growth.ok
    }

    pub fn all_ok(&self) -> bool {
        self.div_ok() && self.lq_loc_ok() && self.w1q_loc_ok() && self.growth_ok()
    }

    /// `int_0^t sup_x |div b(s, .)| ds`, trapezoid on the time slices.
    pub fn cumulative_div(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for w in self.div_profile.windows(2) {
            let (t0, r0) = w[0];
            let (t1, r1) = w[1];
            if t <= t0 {
                break;
            }
            let te = t.min(t1);
            let re = r0 + (r1 - r0) * (te - t0) / (t1 - t0);
            acc += 0.5 * (r0 + re) * (te - t0);
        }
        acc
    }

    pub fn rows(&self) -> [(&'static str, Evidence); 4] {
        [
            ("div_linf", self.div_bound),
            ("lq_loc", self.lq_loc),
            ("w1q_loc", self.w1q_loc),
            ("growth", self.growth),
        ]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "check,ok,evidence,threshold")?;
        for (name, ev) in self.rows() {
            writeln!(
                out,
                "{name},{},{},{}",
                ev.ok,
                fmt_f64(ev.value),
                fmt_f64(FINITENESS_THRESHOLD)
            )?;
        }
        Ok(())
    }
}

/// Kronecker (additive recurrence) low-discrepancy points in `[0,1)^d`.
fn kronecker_point(k: usize, dim: usize) -> Point {
    // Inverse powers of the generalized golden ratio for d = 1, 2.
    const ALPHA_1: [f64; 1] = [0.618_033_988_749_894_9];
    const ALPHA_2: [f64; 2] = [0.754_877_666_246_692_8, 0.569_840_290_998_053_3];
    let mut u = [0.0; MAX_DIM];
    for axis in 0..dim {
        let a = if dim == 1 { ALPHA_1[0] } else { ALPHA_2[axis] };
        u[axis] = (0.5 + k as f64 * a).fract();
    }
    u
}

#[derive(Default)]
struct SliceStats {
    sup_div: f64,
    mean_bq: f64,
    mean_jq: f64,
    max_growth: f64,
    approximate: bool,
}

fn slice_stats(b: &DriftField, t: f64, points: &[Point], q: f64) -> Result<SliceStats> {
    let dim = b.dim();
    let mut s = SliceStats::default();
    let (mut sum_bq, mut sum_jq) = (0.0, 0.0);
    for &x in points {
        let v = b.eval(t, x)?;
        let (j, approx) = b.jacobian(t, x)?;
        s.approximate |= approx;
        let div: f64 = (0..dim).map(|i| j[i][i]).sum();
        let bn = v[..dim].iter().map(|c| c * c).sum::<f64>().sqrt();
        let jn = j[..dim]
            .iter()
            .flat_map(|row| row[..dim].iter())
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt();
        let xn = x[..dim].iter().map(|c| c * c).sum::<f64>().sqrt();
        s.sup_div = s.sup_div.max(div.abs());
        s.max_growth = s.max_growth.max(bn / (1.0 + xn));
        if q.is_infinite() {
            sum_bq = f64::max(sum_bq, bn);
            sum_jq = f64::max(sum_jq, jn);
        } else {
            sum_bq += bn.powf(q);
            sum_jq += jn.powf(q);
        }
    }
    if q.is_infinite() {
        s.mean_bq = sum_bq;
        s.mean_jq = sum_jq;
    } else {
        s.mean_bq = sum_bq / points.len() as f64;
        s.mean_jq = sum_jq / points.len() as f64;
    }
    Ok(s)
}

struct RawEvidence {
    c: f64,
    profile: Vec<(f64, f64)>,
    lq: f64,
    w1q: f64,
    growth: f64,
    approximate: bool,
}

fn raw_evidence(
    b: &DriftField,
    q: f64,
    window: &Window,
    horizon: f64,
    samples: usize,
) -> Result<RawEvidence> {
    let dim = window.dim;
    let jitter = 1e-9 * window.scale();
    let points: Vec<Point> = (1..=samples)
        .map(|k| {
            let u = kronecker_point(k, dim);
            let mut x = [0.0; MAX_DIM];
            for a in 0..dim {
                x[a] = window.lo[a] + (window.hi[a] - window.lo[a]) * u[a];
                // Singular sets of the catalog sit on coordinate hyperplanes.
                if x[a].abs() < jitter {
                    x[a] = jitter;
                }
            }
            x
        })
        .collect();
    let dt = horizon / TIME_SLICES as f64;
    let mut stats = Vec::with_capacity(TIME_SLICES + 1);
    for j in 0..=TIME_SLICES {
        stats.push(slice_stats(b, j as f64 * dt, &points, q)?);
    }
    let trapezoid = |f: &dyn Fn(&SliceStats) -> f64| -> f64 {
        let n = stats.len();
        let inner: f64 = stats[1..n - 1].iter().map(f).sum();
        dt * (inner + 0.5 * (f(&stats[0]) + f(&stats[n - 1])))
    };
    let vol = window.volume();
    let (lq, w1q) = if q.is_infinite() {
        (
            trapezoid(&|s: &SliceStats| s.mean_bq),
            trapezoid(&|s: &SliceStats| s.mean_jq),
        )
    } else {
        (
            vol * trapezoid(&|s: &SliceStats| s.mean_bq),
            vol * trapezoid(&|s: &SliceStats| s.mean_jq),
        )
    };
    Ok(RawEvidence {
        c: trapezoid(&|s: &SliceStats| s.sup_div),
        profile: stats
            .iter()
            .enumerate()
            .map(|(j, s)| (j as f64 * dt, s.sup_div))
            .collect(),
        lq,
        w1q,
        growth: stats.iter().map(|s| s.max_growth).fold(0.0, f64::max),
        approximate: stats.iter().any(|s| s.approximate),
    })
}

/// Audits the drift over `window x [0, horizon]` with `samples` spatial
/// low-discrepancy points per time slice, repeated with `2 * samples` for
/// the stability verdicts.
///
/// For `q = inf` the integral evidence becomes time-integrated sup norms.
pub fn check_hypotheses(
    b: &DriftField,
    q: f64,
    window: &Window,
    horizon: f64,
    samples: usize,
) -> Result<HypothesisReport> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::Config(format!("q must be >= 1, got {q}")));
    }
    if samples < 1000 {
        return Err(Error::Config(format!(
            "hypothesis check needs at least 1000 samples, got {samples}"
        )));
    }
    if window.dim != b.dim() {
        return Err(Error::Config("window and drift dimensions differ".into()));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
    }
    let base = raw_evidence(b, q, window, horizon, samples)?;
    let fine = raw_evidence(b, q, window, horizon, 2 * samples)?;
    Ok(HypothesisReport {
        drift_id: b.id(),
        q_used: q,
        window: *window,
        horizon,
        samples,
        div_bound: Evidence::judge(base.c, fine.c),
        div_profile: base.profile,
        lq_loc: Evidence::judge(base.lq, fine.lq),
        w1q_loc: Evidence::judge(base.w1q, fine.w1q),
        growth: Evidence::judge(base.growth, fine.growth),
        approximate_derivatives: base.approximate,
    })
}
