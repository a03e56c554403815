//! Checks a candidate trajectory against the weak formulation
//!
//! ```text
//! int u(t) phi = int u0 phi + int_0^t int (b . grad phi) u + int_0^t int (div b) phi u
//!              + sum_i int_0^t int D_i phi u  o dW^i
//! ```
//!
//! with the stochastic integral taken in the Stratonovich sense for
//! Brownian paths and in the Riemann-Stieltjes sense for bounded-variation
//! approximants.

use std::io::Write;

use rayon::prelude::*;

use crate::drift::DriftField;
use crate::error::{Error, Result};
use crate::field::{fmt_f64, Point, ScalarField, SpatialGrid, MAX_DIM};
use crate::path::{CounterRng, PathKind, SamplePath};
use crate::profile::InitialProfile;

/// RNG stream reserved for test-function sampling.
const TEST_FUNCTION_STREAM: u64 = 0x7e57_f00d;
/// Minimum radius in grid spacings.
const MIN_RADIUS_CELLS: f64 = 8.0;
/// Minimum distance from the support to the box boundary, in grid spacings.
const MARGIN_CELLS: f64 = 2.0;

/// Smooth compactly supported bump `a exp(1 / (|x - c|^2 / r^2 - 1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    dim: usize,
    bump: InitialProfile,
    center: Point,
    radius: f64,
    amplitude: f64,
}

impl TestFunction {
    pub fn new(dim: usize, center: Point, radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && amplitude.is_finite()) {
            return Err(Error::Config(format!(
                "test function needs a positive radius, got {radius}"
            )));
        }
        Ok(Self {
            dim,
            bump: InitialProfile::bump(center, radius, amplitude),
            center,
            radius,
            amplitude,
        })
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.bump.eval(x, self.dim)
    }

    pub fn gradient(&self, x: Point) -> Point {
        self.bump.gradient(x, self.dim)
    }

    /// `sup |phi| = |a| / e`, attained at the center.
    pub fn sup_norm(&self) -> f64 {
        self.amplitude.abs() * (-1.0f64).exp()
    }
}

/// Deterministic bumps with radii in `[8h, L/4]` whose supports stay at
/// least `2h` away from the boundary of the box.
pub fn make_test_functions(grid: &SpatialGrid, count: usize, seed: u64) -> Result<Vec<TestFunction>> {
    if count == 0 {
        return Err(Error::Config("phi_count must be at least 1".into()));
    }
    let h = grid.spacing();
    let l = grid.half_width();
    let r_min = MIN_RADIUS_CELLS * h;
    let room = l - MARGIN_CELLS * h;
    if r_min >= room {
        return Err(Error::Config(format!(
            "box half-width {l} too small for test functions of radius {r_min}"
        )));
    }
    let r_max = (0.25 * l).clamp(r_min, room);
    let rng = CounterRng::new(seed, TEST_FUNCTION_STREAM);
    (0..count)
        .map(|j| {
            let base = (j * (1 + MAX_DIM)) as u64;
            let r = r_min + rng.uniform(base) * (r_max - r_min);
            let mut center = [0.0; MAX_DIM];
            for c in 0..grid.dim() {
                center[c] = (room - r) * (2.0 * rng.uniform(base + 1 + c as u64) - 1.0);
            }
            TestFunction::new(grid.dim(), center, r, 1.0)
        })
        .collect()
}

/// Rule for the stochastic term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StochasticRule {
    /// Average of the endpoint integrands (Fisk-Stratonovich).
    Stratonovich,
    /// Left-point integrand (Ito); used only as a witness that the
    /// Stratonovich choice matters.
    Ito,
    /// Trapezoid Riemann-Stieltjes sum against a bounded-variation path.
    RiemannStieltjes,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakResidualRow {
    pub phi_index: usize,
    pub t: f64,
    pub residual: f64,
    /// `int u0 phi`.
    pub term_initial: f64,
    pub term_drift: f64,
    pub term_div: f64,
    pub term_stoch: f64,
    /// `||u0||_p (||phi||_inf + ||grad phi||_inf)`.
    pub normalizer: f64,
}

impl WeakResidualRow {
    pub fn normalized(&self) -> f64 {
        if self.normalizer > 0.0 {
            self.residual.abs() / self.normalizer
        } else {
            self.residual.abs()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakResidualReport {
    pub rule: StochasticRule,
    pub rows: Vec<WeakResidualRow>,
}

impl WeakResidualReport {
    pub fn max_abs(&self) -> f64 {
        self.rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max)
    }

    pub fn rms(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        (self.rows.iter().map(|r| r.residual * r.residual).sum::<f64>() / self.rows.len() as f64).sqrt()
    }

    /// Largest `|r| / normalizer`.
    pub fn max_normalized(&self) -> f64 {
        self.rows.iter().map(|r| r.normalized()).fold(0.0, f64::max)
    }

    /// Residual series of one test function.
    pub fn series(&self, phi_index: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.phi_index == phi_index)
            .map(|r| r.residual)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "phi_index,t,residual,term_initial,term_drift,term_div,term_stoch,normalizer"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.phi_index,
                fmt_f64(r.t),
                fmt_f64(r.residual),
                fmt_f64(r.term_initial),
                fmt_f64(r.term_drift),
                fmt_f64(r.term_div),
                fmt_f64(r.term_stoch),
                fmt_f64(r.normalizer)
            )?;
        }
        Ok(())
    }
}

/// A trajectory `u(s_m)` on snapshot times `s_m`.
#[derive(Clone, Copy, Debug)]
pub struct Trajectory<'a> {
    pub times: &'a [f64],
    pub fields: &'a [ScalarField],
}

impl<'a> Trajectory<'a> {
    pub fn new(times: &'a [f64], fields: &'a [ScalarField]) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(Error::MeshMismatch(format!(
                "{} snapshot times for {} fields",
                times.len(),
                fields.len()
            )));
        }
        for f in &fields[1..] {
            fields[0].check_same_grid(f)?;
        }
        Ok(Self { times, fields })
    }

    fn grid(&self) -> &SpatialGrid {
        self.fields[0].grid()
    }
}

/// Every snapshot time must be a knot of the path.
fn check_alignment(times: &[f64], path: &SamplePath) -> Result<()> {
    let knots = path.times();
    let tol = 1e-12 * path.horizon().max(1.0);
    for &t in times {
        let k = knots.partition_point(|&s| s < t - tol);
        if k >= knots.len() || (knots[k] - t).abs() > tol {
            return Err(Error::MeshMismatch(format!(
                "snapshot time {t} is not a knot of the path mesh"
            )));
        }
    }
    Ok(())
}

/// Per-snapshot spatial quadratures for one test function.
struct Quadratures {
    mass: Vec<f64>,
    drift: Vec<f64>,
    div: Vec<f64>,
    grad: Vec<Point>,
}

/// Residuals of every test function against the trajectory. Snapshots must
/// sit on path knots, and the stochastic sum is taken over consecutive
/// snapshots, so dense snapshots (one per path step) are needed for the
/// residual to be small.
pub fn weak_residuals(
    traj: Trajectory<'_>,
    b: &DriftField,
    path: &SamplePath,
    phis: &[TestFunction],
    p: f64,
    rule: StochasticRule,
) -> Result<WeakResidualReport> {
    match (rule, path.kind()) {
        (StochasticRule::RiemannStieltjes, PathKind::Brownian) => {
            return Err(Error::Config(
                "Riemann-Stieltjes residual needs a bounded-variation path".into(),
            ))
        }
        (StochasticRule::Stratonovich | StochasticRule::Ito, PathKind::PiecewiseLinearBv) => {
            return Err(Error::Config(
                "Stratonovich and Ito residuals need a Brownian path".into(),
            ))
        }
        _ => {}
    }
    if b.dim() != traj.grid().dim() || path.dim() != traj.grid().dim() {
        return Err(Error::Config("dimension mismatch between drift, path and grid".into()));
    }
    check_alignment(traj.times, path)?;
    let grid = *traj.grid();
    let dim = grid.dim();
    let dv = grid.cell_volume();
    let u0_norm = traj.fields[0].lp_norm(crate::field::LebesgueExponent::new(p)?)?;

    // Drift and divergence at every node and snapshot.
    let mut drift_at = Vec::with_capacity(traj.times.len());
    for &t in traj.times {
        let (vel, div): (Vec<Point>, Vec<f64>) = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = grid.node(i);
                Ok((b.eval(t, x)?, b.divergence(t, x)?.value))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        drift_at.push((vel, div));
    }
    let increments: Vec<Point> = traj
        .times
        .windows(2)
        .map(|w| {
            let (a, c) = (path.eval(w[0])?, path.eval(w[1])?);
            Ok([c[0] - a[0], c[1] - a[1]])
        })
        .collect::<Result<_>>()?;

    let per_phi: Vec<Vec<WeakResidualRow>> = phis
        .par_iter()
        .enumerate()
        .map(|(j, phi)| {
            let values: Vec<f64> = (0..grid.len()).map(|i| phi.eval(grid.node(i))).collect();
            let grads: Vec<Point> = (0..grid.len()).map(|i| phi.gradient(grid.node(i))).collect();
            let support: Vec<usize> = (0..grid.len())
                .filter(|&i| values[i] != 0.0 || grads[i] != [0.0; MAX_DIM])
                .collect();
            let grad_sup = grads
                .iter()
                .map(|g| g[..dim].iter().map(|c| c * c).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            let normalizer = u0_norm * (phi.sup_norm() + grad_sup);

            let mut q = Quadratures {
                mass: Vec::with_capacity(traj.times.len()),
                drift: Vec::with_capacity(traj.times.len()),
                div: Vec::with_capacity(traj.times.len()),
                grad: Vec::with_capacity(traj.times.len()),
            };
            for (u, (vel, div)) in traj.fields.iter().zip(&drift_at) {
                let u = u.values();
                let (mut m, mut d, mut v, mut g) = (0.0, 0.0, 0.0, [0.0; MAX_DIM]);
                for &i in &support {
                    let ui = u[i];
                    m += ui * values[i];
                    let mut bg = 0.0;
                    for c in 0..dim {
                        bg += vel[i][c] * grads[i][c];
                        g[c] += ui * grads[i][c];
                    }
                    d += ui * bg;
                    v += ui * div[i] * values[i];
                }
                q.mass.push(m * dv);
                q.drift.push(d * dv);
                q.div.push(v * dv);
                q.grad.push([g[0] * dv, g[1] * dv]);
            }

            let mut rows = Vec::with_capacity(traj.times.len());
            let (mut drift, mut divt, mut stoch) = (0.0, 0.0, 0.0);
            for m in 0..traj.times.len() {
                if m > 0 {
                    let ds = traj.times[m] - traj.times[m - 1];
                    drift += 0.5 * ds * (q.drift[m - 1] + q.drift[m]);
                    divt += 0.5 * ds * (q.div[m - 1] + q.div[m]);
                    let db = increments[m - 1];
                    for c in 0..dim {
                        let g = match rule {
                            StochasticRule::Ito => q.grad[m - 1][c],
                            _ => 0.5 * (q.grad[m - 1][c] + q.grad[m][c]),
                        };
                        stoch += g * db[c];
                    }
                }
                let residual = q.mass[m] - q.mass[0] - drift - divt - stoch;
                rows.push(WeakResidualRow {
                    phi_index: j,
                    t: traj.times[m],
                    residual,
                    term_initial: q.mass[0],
                    term_drift: drift,
                    term_div: divt,
                    term_stoch: stoch,
                    normalizer,
                });
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(WeakResidualReport {
        rule,
        rows: per_phi.into_iter().flatten().collect(),
    })
}

/// Stratonovich (or, with [`StochasticRule::Ito`], left-point) residual of
/// one test function.
pub fn weak_residual(
    traj: Trajectory<'_>,
    b: &DriftField,
    path: &SamplePath,
    phi: &TestFunction,
    p: f64,
) -> Result<WeakResidualReport> {
    let rule = match path.kind() {
        PathKind::PiecewiseLinearBv => StochasticRule::RiemannStieltjes,
        _ => StochasticRule::Stratonovich,
    };
    weak_residuals(traj, b, path, std::slice::from_ref(phi), p, rule)
}

/// Residual against a bounded-variation approximant.
pub fn weak_residual_bv(
    traj: Trajectory<'_>,
    b: &DriftField,
    approximant: &SamplePath,
    phi: &TestFunction,
    p: f64,
) -> Result<WeakResidualReport> {
    weak_residuals(
        traj,
        b,
        approximant,
        std::slice::from_ref(phi),
        p,
        StochasticRule::RiemannStieltjes,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::mesh_time;
    use crate::spde::exact_solution;
    use proptest::prelude::*;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(1, 4.0, 128).unwrap()
    }

    fn closed_form(
        path: &SamplePath,
        grid: &SpatialGrid,
    ) -> (Vec<f64>, Vec<ScalarField>, InitialProfile) {
        let prof = InitialProfile::bump([0.0; 2], 1.5, 1.0);
        let times: Vec<f64> = path.times().to_vec();
        let fields = times
            .iter()
            .map(|&t| exact_solution(&DriftField::zero(grid.dim()), path, &prof, grid, t).unwrap())
            .collect();
        (times, fields, prof)
    }

    #[test]
    fn test_functions_are_deterministic_and_supported() {
        let g = grid();
        let a = make_test_functions(&g, 5, 9).unwrap();
        assert_eq!(a, make_test_functions(&g, 5, 9).unwrap());
        assert_ne!(a, make_test_functions(&g, 5, 10).unwrap());
        for phi in &a {
            let c = phi.center()[0];
            let r = phi.radius();
            assert!(r >= 8.0 * g.spacing());
            assert!(c.abs() + r <= g.half_width() - 2.0 * g.spacing());
            assert_eq!(phi.eval([c + r, 0.0]), 0.0);
            assert_eq!(phi.eval([c - 1.5 * r, 0.0]), 0.0);
            let integral = ScalarField::from_fn(g, |x| phi.eval(x)).unwrap().integral();
            assert!(integral > 0.0 && integral.is_finite());
        }
        let tiny = SpatialGrid::new(1, 1.0, 8).unwrap();
        assert!(make_test_functions(&tiny, 1, 0).is_err());
        assert!(make_test_functions(&g, 0, 0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = SpatialGrid::new(2, 4.0, 64).unwrap();
        let phi = &make_test_functions(&g, 1, 4).unwrap()[0];
        let rng = CounterRng::new(1, 2);
        let e = 1e-6;
        for k in 0..100u64 {
            let mut x = phi.center();
            x[0] += phi.radius() * (2.0 * rng.uniform(2 * k) - 1.0);
            x[1] += phi.radius() * (2.0 * rng.uniform(2 * k + 1) - 1.0);
            let grad = phi.gradient(x);
            for c in 0..2 {
                let (mut xp, mut xm) = (x, x);
                xp[c] += e;
                xm[c] -= e;
                let fd = (phi.eval(xp) - phi.eval(xm)) / (2.0 * e);
                let scale = grad[0].abs().max(grad[1].abs()).max(1e-3);
                assert!((fd - grad[c]).abs() <= 1e-6 * scale, "{fd} vs {}", grad[c]);
            }
        }
    }

    #[test]
    fn zero_trajectory_has_zero_residual() {
        let g = grid();
        let w = SamplePath::sample_brownian(1, 1.0, 32, 1).unwrap();
        let fields = vec![ScalarField::zeros(g); 33];
        let phis = make_test_functions(&g, 3, 0).unwrap();
        let b = DriftField::sine(1, 1.0, 4.0).unwrap();
        let r = weak_residuals(Trajectory::new(w.times(), &fields).unwrap(), &b, &w, &phis, 1.0, StochasticRule::Stratonovich)
            .unwrap();
        assert!(r.rows.iter().all(|row| row.residual == 0.0));
        let wn = w.piecewise_linear_approx(8).unwrap();
        let r = weak_residual_bv(Trajectory::new(w.times(), &fields).unwrap(), &b, &wn, &phis[0], 1.0).unwrap();
        assert!(r.rows.iter().all(|row| row.residual == 0.0));
    }

    #[test]
    fn misaligned_snapshots_are_rejected() {
        let g = grid();
        let w = SamplePath::sample_brownian(1, 1.0, 8, 1).unwrap();
        let times = [0.0, 0.1];
        let fields = vec![ScalarField::zeros(g); 2];
        let phi = &make_test_functions(&g, 1, 0).unwrap()[0];
        assert!(matches!(
            weak_residual(Trajectory::new(&times, &fields).unwrap(), &DriftField::zero(1), &w, phi, 1.0),
            Err(Error::MeshMismatch(_))
        ));
    }

    #[test]
    fn translated_solution_has_small_residual_and_ito_does_not() {
        let g = SpatialGrid::new(1, 4.0, 256).unwrap();
        let w = SamplePath::sample_brownian(42, 1.0, 1024, 1).unwrap();
        let (times, fields, _) = closed_form(&w, &g);
        let phis = make_test_functions(&g, 4, 1).unwrap();
        let traj = Trajectory::new(&times, &fields).unwrap();
        let zero = DriftField::zero(1);
        let s = weak_residuals(traj, &zero, &w, &phis, 1.0, StochasticRule::Stratonovich).unwrap();
        let i = weak_residuals(traj, &zero, &w, &phis, 1.0, StochasticRule::Ito).unwrap();
        assert!(s.max_normalized() < 1e-2);
        assert!(i.max_normalized() > 5.0 * s.max_normalized());
    }

    #[test]
    fn injected_defect_is_detected() {
        let g = SpatialGrid::new(1, 4.0, 256).unwrap();
        let w = SamplePath::sample_brownian(42, 1.0, 256, 1).unwrap();
        let (times, mut fields, _) = closed_form(&w, &g);
        let phi = make_test_functions(&g, 1, 3).unwrap().remove(0);
        let bump = ScalarField::from_fn(g, |x| phi.eval(x)).unwrap();
        let phi_sq: f64 = bump.values().iter().map(|v| v * v).sum::<f64>() * g.cell_volume();
        for (f, &t) in fields.iter_mut().zip(&times) {
            if t > 0.5 {
                *f = f.combine(1.0, &bump, 0.1).unwrap();
            }
        }
        let r = weak_residual(Trajectory::new(&times, &fields).unwrap(), &DriftField::zero(1), &w, &phi, 1.0)
            .unwrap();
        assert!(r.max_abs() >= 0.05 * phi_sq);
    }

    #[test]
    fn deterministic_weak_form_with_zero_path() {
        // v(t, x) = u0(x - c t) on a zero path: the stochastic term vanishes.
        let g = SpatialGrid::new(1, 4.0, 256).unwrap();
        let z = SamplePath::zero(1, 1.0, 256).unwrap();
        let c = DriftField::constant(&[0.7]).unwrap();
        let prof = InitialProfile::bump([0.0; 2], 1.5, 1.0);
        let times: Vec<f64> = (0..=256).map(|k| mesh_time(k, 256, 1.0)).collect();
        let fields: Vec<ScalarField> = times
            .iter()
            .map(|&t| exact_solution(&c, &z, &prof, &g, t).unwrap())
            .collect();
        let phi = make_test_functions(&g, 1, 5).unwrap().remove(0);
        let r = weak_residual_bv(Trajectory::new(&times, &fields).unwrap(), &c, &z, &phi, 1.0).unwrap();
        assert!(r.rows.iter().all(|row| row.term_stoch == 0.0));
        assert!(r.max_normalized() < 1e-4);
    }

    #[test]
    fn bv_residual_decreases_under_refinement() {
        let prof = InitialProfile::bump([0.0; 2], 1.5, 1.0);
        let w = SamplePath::sample_brownian(8, 1.0, 1024, 1).unwrap();
        let mut errors = Vec::new();
        for (n, k) in [(128usize, 16usize), (256, 32), (512, 64)] {
            let g = SpatialGrid::new(1, 4.0, n).unwrap();
            let wn = w.piecewise_linear_approx(16).unwrap();
            // The approximant re-sampled on a k-step snapshot mesh.
            let times: Vec<f64> = (0..=k).map(|m| mesh_time(m, k, 1.0)).collect();
            let dense = SamplePath::new(
                1,
                times.clone(),
                times.iter().map(|&t| wn.eval(t).unwrap()).collect(),
                PathKind::PiecewiseLinearBv,
            )
            .unwrap();
            let fields: Vec<ScalarField> = times
                .iter()
                .map(|&t| exact_solution(&DriftField::zero(1), &dense, &prof, &g, t).unwrap())
                .collect();
            let phi = make_test_functions(&g, 1, 2).unwrap().remove(0);
            let r = weak_residual_bv(Trajectory::new(&times, &fields).unwrap(), &DriftField::zero(1), &dense, &phi, 1.0)
                .unwrap();
            errors.push(r.max_abs());
        }
        assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn residual_is_linear_in_the_solution(a in -5.0f64..5.0, seed in 0u64..1000) {
            let g = SpatialGrid::new(1, 4.0, 64).unwrap();
            let w = SamplePath::sample_brownian(seed, 1.0, 32, 1).unwrap();
            let (times, fields, _) = closed_form(&w, &g);
            let scaled: Vec<ScalarField> = fields.iter().map(|f| f.scaled(a)).collect();
            let phi = make_test_functions(&g, 1, seed).unwrap().remove(0);
            let b = DriftField::sine(1, 0.5, 4.0).unwrap();
            let r1 = weak_residual(Trajectory::new(&times, &fields).unwrap(), &b, &w, &phi, 1.0).unwrap();
            let r2 = weak_residual(Trajectory::new(&times, &scaled).unwrap(), &b, &w, &phi, 1.0).unwrap();
            for (x, y) in r1.rows.iter().zip(&r2.rows) {
                let scale = x.term_initial.abs() + x.term_stoch.abs() + x.term_drift.abs() + x.term_div.abs() + 1e-300;
                prop_assert!((y.residual - a * x.residual).abs() <= 1e-12 * a.abs().max(1.0) * scale);
            }
        }
    }
}
