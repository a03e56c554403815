//! The stochastic transport equation through its pathwise representation
//! `u(t, x) = v(t, x - W(t))`, where `v` solves the auxiliary transport
//! problem driven by the same path `W` (Brownian, or a bounded-variation
//! approximant for the Wong-Zakai analogue).

use crate::drift::{check_hypotheses, DriftField, HypothesisReport, Window};
use crate::error::{Error, Result};
use crate::field::{Interpolation, LebesgueExponent, Point, ScalarField, SpatialGrid, MAX_DIM};
use crate::path::{PathKind, SamplePath};
use crate::profile::InitialProfile;
use crate::transport::{solve_transport, TransportOptions, TransportSolution};

/// Interpolation used when composing `v` with the path shift.
pub const SHIFT_INTERPOLATION: Interpolation = Interpolation::Cubic;

#[derive(Clone, Debug, PartialEq)]
pub struct SpdeSolution {
    snapshots: Vec<ScalarField>,
    path: SamplePath,
    transport: TransportSolution,
    p: LebesgueExponent,
}

impl SpdeSolution {
    pub fn times(&self) -> &[f64] {
        &self.transport.snapshot_times
    }

    /// Snapshots of `u`.
    pub fn u(&self) -> &[ScalarField] {
        &self.snapshots
    }

    /// Snapshots of the auxiliary solution `v`.
    pub fn v(&self) -> &[ScalarField] {
        &self.transport.snapshots
    }

    pub fn path(&self) -> &SamplePath {
        &self.path
    }

    pub fn transport(&self) -> &TransportSolution {
        &self.transport
    }

    pub fn exponent(&self) -> LebesgueExponent {
        self.p
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.transport.grid
    }

    pub fn last(&self) -> &ScalarField {
        self.snapshots.last().expect("solutions hold the initial snapshot")
    }

    /// `||u(s_m)||_p` for every snapshot.
    pub fn norm_series(&self) -> Result<Vec<f64>> {
        self.snapshots.iter().map(|u| u.lp_norm(self.p)).collect()
    }

    /// Keeps every `stride`-th snapshot (the first and last are always kept
    /// when `stride` divides the snapshot count).
    pub fn subsampled(&self, stride: usize) -> Result<SpdeSolution> {
        let m = self.snapshots.len() - 1;
        if stride == 0 || m % stride != 0 {
            return Err(Error::MeshMismatch(format!(
                "stride {stride} does not divide {m} snapshot intervals"
            )));
        }
        let pick = |v: &[ScalarField]| v.iter().step_by(stride).cloned().collect::<Vec<_>>();
        let mut transport = self.transport.clone();
        transport.snapshots = pick(&self.transport.snapshots);
        transport.snapshot_times = self.transport.snapshot_times.iter().step_by(stride).copied().collect();
        transport.margin_warnings.retain(|i| i % stride == 0);
        for i in transport.margin_warnings.iter_mut() {
            *i /= stride;
        }
        Ok(SpdeSolution {
            snapshots: pick(&self.snapshots),
            path: self.path.clone(),
            transport,
            p: self.p,
        })
    }
}

fn represent(
    b: &DriftField,
    path: &SamplePath,
    u0: &ScalarField,
    opts: &TransportOptions,
    p: LebesgueExponent,
) -> Result<SpdeSolution> {
    let transport = solve_transport(b, path, u0, opts)?;
    let snapshots = transport
        .snapshots
        .iter()
        .zip(&transport.snapshot_times)
        .enumerate()
        .map(|(m, (v, &t))| {
            if m == 0 {
                // W(0) = 0, so the first snapshot is u0 itself.
                return Ok(v.clone());
            }
            Ok(v.shift(path.eval(t)?, SHIFT_INTERPOLATION))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpdeSolution {
        snapshots,
        path: path.clone(),
        transport,
        p,
    })
}

/// Solves the equation driven by a Brownian (or zero) path.
pub fn solve_spde(
    b: &DriftField,
    path: &SamplePath,
    u0: &ScalarField,
    opts: &TransportOptions,
    p: LebesgueExponent,
) -> Result<SpdeSolution> {
    match path.kind() {
        PathKind::Brownian | PathKind::Zero => represent(b, path, u0, opts, p),
        PathKind::PiecewiseLinearBv => Err(Error::Config(
            "solve_spde expects a Brownian or zero path; use solve_spde_wong_zakai".into(),
        )),
    }
}

/// Solves the equation driven by a bounded-variation approximant.
pub fn solve_spde_wong_zakai(
    b: &DriftField,
    approximant: &SamplePath,
    u0: &ScalarField,
    opts: &TransportOptions,
    p: LebesgueExponent,
) -> Result<SpdeSolution> {
    match approximant.kind() {
        PathKind::PiecewiseLinearBv | PathKind::Zero => represent(b, approximant, u0, opts, p),
        PathKind::Brownian => Err(Error::Config(
            "solve_spde_wong_zakai expects a piecewise-linear approximant".into(),
        )),
    }
}

/// Closed-form `u(t, x) = u0(x - c t - W(t))` for zero or constant drift.
pub fn exact_solution(
    b: &DriftField,
    path: &SamplePath,
    u0: &InitialProfile,
    grid: &SpatialGrid,
    t: f64,
) -> Result<ScalarField> {
    let c = b.as_constant().ok_or_else(|| {
        Error::UnsupportedDrift(format!("no closed form for drift '{}'", b.id()))
    })?;
    let w = path.eval(t)?;
    let mut shift = [0.0; MAX_DIM];
    for i in 0..grid.dim() {
        shift[i] = c[i] * t + w[i];
    }
    let h = grid.spacing();
    let on_lattice = shift[..grid.dim()]
        .iter()
        .all(|s| (s / h - (s / h).round()).abs() < 1e-10);
    if on_lattice {
        return Ok(u0.sample(grid)?.shift(shift, Interpolation::Cubic));
    }
    u0.sample_shifted(grid, shift)
}

/// `beta` functions used in the renormalization check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RenormalizationFn {
    /// `|s|^p`.
    Power { p: f64 },
    /// `(min(|s|, M))^p` with a C^1 blend of half-width `delta` around
    /// `|s| = M` and, for `p = 1`, a quadratic (Huber) blend on `|s| < delta`.
    SmoothedTruncated { m: f64, p: f64, delta: f64 },
}

impl RenormalizationFn {
    pub fn power(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Config(format!("renormalization exponent {p} must be >= 1")));
        }
        Ok(RenormalizationFn::Power { p })
    }

    /// Smoothed truncation with blend width `1e-3 M`.
    pub fn smoothed_truncated(m: f64, p: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite() && p >= 1.0 && p.is_finite()) {
            return Err(Error::Config(format!("invalid truncation M = {m}, p = {p}")));
        }
        Ok(RenormalizationFn::SmoothedTruncated {
            m,
            p,
            delta: 1e-3 * m,
        })
    }

    pub fn id(&self) -> String {
        match self {
            RenormalizationFn::Power { p } => format!("power_p{p}"),
            RenormalizationFn::SmoothedTruncated { m, p, .. } => format!("truncated_M{m}_p{p}"),
        }
    }

    /// Bound on `|beta'|`, if it is bounded.
    pub fn derivative_bound(&self) -> Option<f64> {
        match *self {
            RenormalizationFn::Power { p } if p == 1.0 => Some(1.0),
            RenormalizationFn::Power { .. } => None,
            RenormalizationFn::SmoothedTruncated { m, p, delta } => Some(p * (m - delta).powf(p - 1.0)),
        }
    }

    pub fn beta(&self, s: f64) -> f64 {
        let r = s.abs();
        match *self {
            RenormalizationFn::Power { p } => r.powf(p),
            RenormalizationFn::SmoothedTruncated { m, p, delta } => {
                let knee = m - delta;
                let slope = p * knee.powf(p - 1.0);
                if r >= m + delta {
                    core_power(knee, p, delta) + slope * delta
                } else if r > knee {
                    let w = m + delta - r;
                    core_power(knee, p, delta) + slope * (4.0 * delta * delta - w * w) / (4.0 * delta)
                } else {
                    core_power(r, p, delta)
                }
            }
        }
    }

    pub fn beta_prime(&self, s: f64) -> f64 {
        let r = s.abs();
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        let d = match *self {
            RenormalizationFn::Power { p } => {
                if r == 0.0 {
                    0.0
                } else {
                    p * r.powf(p - 1.0)
                }
            }
            RenormalizationFn::SmoothedTruncated { m, p, delta } => {
                let knee = m - delta;
                if r >= m + delta {
                    0.0
                } else if r > knee {
                    p * knee.powf(p - 1.0) * (m + delta - r) / (2.0 * delta)
                } else if p == 1.0 && r < delta {
                    r / delta
                } else {
                    p * r.powf(p - 1.0)
                }
            }
        };
        sign * d
    }

    pub fn integral(&self, f: &ScalarField) -> f64 {
        f.values().iter().map(|&s| self.beta(s)).sum::<f64>() * f.grid().cell_volume()
    }
}

/// `r^p`, replaced for `p = 1` by the Huber blend near the origin.
fn core_power(r: f64, p: f64, delta: f64) -> f64 {
    if p == 1.0 {
        if r < delta {
            r * r / (2.0 * delta)
        } else {
            r - 0.5 * delta
        }
    } else {
        r.powf(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The divergence bound is not finite, so the envelope is undefined.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenormalizationReport {
    pub beta_id: String,
    pub times: Vec<f64>,
    /// `I(s_m) = int beta(v(s_m, x)) dx`.
    pub integrals: Vec<f64>,
    /// Gronwall envelope at each snapshot (empty when inconclusive).
    pub envelope: Vec<f64>,
    /// `C = int_0^T sup |div b| dt`.
    pub divergence_bound: f64,
    /// Largest `I(s_m) - envelope(s_m)`; non-positive on a pass.
    pub max_violation: f64,
    pub status: CheckStatus,
}

/// Samples used for the divergence bound in [`renormalize_check`].
const RENORMALIZATION_SAMPLES: usize = 2048;

/// Checks the discrete Gronwall inequality
/// `I(t) <= I(0) exp(1.1 Lambda(t) + (h + dt) t)` on the auxiliary solution,
/// with `Lambda(t) = int_0^t sup |div b| ds`.
pub fn renormalize_check(
    sol: &SpdeSolution,
    beta: &RenormalizationFn,
    b: &DriftField,
) -> Result<RenormalizationReport> {
    let grid = sol.grid();
    let horizon = *sol.times().last().unwrap_or(&0.0);
    let integrals: Vec<f64> = sol.v().iter().map(|v| beta.integral(v)).collect();
    let report = check_hypotheses(
        b,
        f64::INFINITY,
        &Window::of_grid(grid),
        horizon,
        RENORMALIZATION_SAMPLES,
    )?;
    renormalize_check_with(sol, beta, &report, integrals)
}

fn renormalize_check_with(
    sol: &SpdeSolution,
    beta: &RenormalizationFn,
    report: &HypothesisReport,
    integrals: Vec<f64>,
) -> Result<RenormalizationReport> {
    let c = report.c();
    let times = sol.times().to_vec();
    let mut out = RenormalizationReport {
        beta_id: beta.id(),
        times,
        integrals,
        envelope: Vec::new(),
        divergence_bound: c,
        max_violation: f64::NAN,
        status: CheckStatus::Inconclusive,
    };
    if !report.div_ok() || !c.is_finite() {
        return Ok(out);
    }
    let dt = sol.transport().dt;
    if dt * c >= 0.1 {
        return Err(Error::Config(format!(
            "time step {dt} too coarse for divergence bound {c} (need dt C < 0.1)"
        )));
    }
    let slack = sol.grid().spacing() + dt;
    let i0 = out.integrals[0];
    out.envelope = out
        .times
        .iter()
        .map(|&t| i0 * (1.1 * report.cumulative_div(t) + slack * t).exp())
        .collect();
    out.max_violation = out
        .integrals
        .iter()
        .zip(&out.envelope)
        .map(|(i, e)| i - e)
        .fold(f64::NEG_INFINITY, f64::max);
    out.status = if out.max_violation <= 0.0 {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(out)
}

/// Largest `||u(s_{m+1}) - u(s_m)||_p` over adjacent snapshots.
pub fn time_continuity_modulus(sol: &SpdeSolution, p: LebesgueExponent) -> Result<f64> {
    let u = sol.u();
    if u.len() < 3 {
        return Err(Error::Config(format!(
            "time continuity needs at least 3 snapshots, got {}",
            u.len()
        )));
    }
    let mut worst: f64 = 0.0;
    for pair in u.windows(2) {
        worst = worst.max(pair[1].difference(&pair[0])?.lp_norm(p)?);
    }
    Ok(worst)
}

/// `||u0(. - a) - u0||_p <= |a| ||grad u0||_p`, the translation bound.
pub fn translation_bound(u0: &InitialProfile, grid: &SpatialGrid, a: Point, p: f64) -> f64 {
    let norm = a[..grid.dim()].iter().map(|c| c * c).sum::<f64>().sqrt();
    norm * u0.gradient_lp_norm(grid, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::Scheme;

    fn setup(n: usize) -> (SpatialGrid, InitialProfile, ScalarField) {
        let g = SpatialGrid::new(1, 4.0, n).unwrap();
        let prof = InitialProfile::bump([0.0; 2], 1.5, 1.0);
        let u0 = prof.sample(&g).unwrap();
        (g, prof, u0)
    }

    fn l1() -> LebesgueExponent {
        LebesgueExponent::new(1.0).unwrap()
    }

    #[test]
    fn zero_initial_data_stays_zero_bit_exactly() {
        let g = SpatialGrid::new(1, 4.0, 64).unwrap();
        let u0 = ScalarField::zeros(g);
        let w = SamplePath::sample_brownian(7, 1.0, 64, 1).unwrap();
        let b = DriftField::sine(1, 1.0, 4.0).unwrap();
        for scheme in [Scheme::SemiLagrangian, Scheme::UpwindFv] {
            let s = solve_spde(&b, &w, &u0, &TransportOptions::new(1.0 / 64.0, 1.0, 8, scheme), l1())
                .unwrap();
            assert!(s.u().iter().all(|f| f.values().iter().all(|&v| v == 0.0)));
        }
    }

    #[test]
    fn zero_drift_is_pure_translation() {
        let (g, prof, u0) = setup(256);
        let w = SamplePath::sample_brownian(11, 1.0, 256, 1).unwrap();
        let s = solve_spde(
            &DriftField::zero(1),
            &w,
            &u0,
            &TransportOptions::new(1.0 / 256.0, 1.0, 8, Scheme::SemiLagrangian),
            l1(),
        )
        .unwrap();
        assert_eq!(s.u()[0], u0);
        let norm = u0.lp_norm(l1()).unwrap();
        for (u, &t) in s.u().iter().zip(s.times()) {
            let exact = exact_solution(&DriftField::zero(1), &w, &prof, &g, t).unwrap();
            let e = u.difference(&exact).unwrap().lp_norm(l1()).unwrap();
            assert!(e < 1e-4 * norm, "t={t}: {e}");
        }
    }

    #[test]
    fn wong_zakai_at_the_finest_level_matches_bit_exactly() {
        let (_, _, u0) = setup(64);
        let w = SamplePath::sample_brownian(5, 1.0, 32, 1).unwrap();
        let wn = w.piecewise_linear_approx(32).unwrap();
        let b = DriftField::sine(1, 0.7, 4.0).unwrap();
        let opts = TransportOptions::new(1.0 / 64.0, 1.0, 4, Scheme::SemiLagrangian);
        let a = solve_spde(&b, &w, &u0, &opts, l1()).unwrap();
        let c = solve_spde_wong_zakai(&b, &wn, &u0, &opts, l1()).unwrap();
        assert_eq!(a.u(), c.u());
        assert!(solve_spde(&b, &wn, &u0, &opts, l1()).is_err());
        assert!(solve_spde_wong_zakai(&b, &w, &u0, &opts, l1()).is_err());
    }

    #[test]
    fn exact_solution_cases() {
        let g = SpatialGrid::new(2, 4.0, 64).unwrap();
        let prof = InitialProfile::bump([0.2, -0.3], 1.0, 1.0);
        let z = SamplePath::zero(2, 1.0, 4).unwrap();
        let zero = DriftField::zero(2);
        assert_eq!(exact_solution(&zero, &z, &prof, &g, 0.0).unwrap(), prof.sample(&g).unwrap());

        // Path value (0.3, -0.2) at t = 1 and drift (1, 0).
        let w = SamplePath::new(
            2,
            vec![0.0, 1.0],
            vec![[0.0, 0.0], [0.3, -0.2]],
            PathKind::PiecewiseLinearBv,
        )
        .unwrap();
        let c = DriftField::constant(&[1.0, 0.0]).unwrap();
        let u = exact_solution(&c, &w, &prof, &g, 1.0).unwrap();
        for i in (0..g.len()).step_by(97) {
            let x = g.node(i);
            let expected = prof.eval(g.wrap_point([x[0] - 1.3, x[1] + 0.2]), 2);
            assert!((u.values()[i] - expected).abs() < 1e-12);
        }

        // Lattice path value: exact index rotation of the sampled field.
        let h = g.spacing();
        let w = SamplePath::new(
            2,
            vec![0.0, 1.0],
            vec![[0.0, 0.0], [3.0 * h, -2.0 * h]],
            PathKind::PiecewiseLinearBv,
        )
        .unwrap();
        let u = exact_solution(&zero, &w, &prof, &g, 1.0).unwrap();
        let sampled = prof.sample(&g).unwrap();
        let mut a = u.values().to_vec();
        let mut b = sampled.values().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);

        let lin = DriftField::linear(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            exact_solution(&lin, &z, &prof, &g, 0.5),
            Err(Error::UnsupportedDrift(_))
        ));
    }

    #[test]
    fn smoothed_truncation_is_c1_with_bounded_derivative() {
        for p in [1.0, 2.0, 3.5] {
            let beta = RenormalizationFn::smoothed_truncated(2.0, p).unwrap();
            let bound = beta.derivative_bound().unwrap();
            let mut s: f64 = -5.0;
            while s < 5.0 {
                let d = beta.beta_prime(s);
                assert!(d.abs() <= bound * (1.0 + 1e-12), "beta'({s}) = {d} exceeds {bound}");
                let e = 1e-7;
                let fd = (beta.beta(s + e) - beta.beta(s - e)) / (2.0 * e);
                assert!((fd - d).abs() < 1e-4 * (1.0 + d.abs()), "p={p} s={s}: {fd} vs {d}");
                s += 0.000_731;
            }
            // Continuity across the blend boundaries.
            for r in [0.002, 2.0 - 0.002, 2.0 + 0.002] {
                let a = beta.beta(r - 1e-12);
                let b = beta.beta(r + 1e-12);
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn plain_power_matches_norm() {
        let (_, _, u0) = setup(128);
        let beta = RenormalizationFn::power(2.0).unwrap();
        let n = u0.lp_norm(LebesgueExponent::new(2.0).unwrap()).unwrap();
        assert!((beta.integral(&u0) - n * n).abs() < 1e-12 * n * n);
        assert_eq!(beta.derivative_bound(), None);
    }

    #[test]
    fn contraction_satisfies_the_gronwall_envelope() {
        let g = SpatialGrid::new(1, 4.0, 256).unwrap();
        let u0 = InitialProfile::bump([0.0; 2], 1.5, 1.0).sample(&g).unwrap();
        let z = SamplePath::zero(1, 1.0, 4).unwrap();
        let b = DriftField::linear(&[vec![-1.0]]).unwrap();
        let s = solve_spde(&b, &z, &u0, &TransportOptions::new(1.0 / 128.0, 1.0, 8, Scheme::SemiLagrangian), l1())
            .unwrap();
        let beta = RenormalizationFn::smoothed_truncated(10.0, 1.0).unwrap();
        let r = renormalize_check(&s, &beta, &b).unwrap();
        assert_eq!(r.status, CheckStatus::Pass);
        assert!((r.divergence_bound - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rough_divergence_is_inconclusive() {
        let g = SpatialGrid::new(1, 4.0, 64).unwrap();
        let u0 = InitialProfile::bump([0.0; 2], 1.0, 1.0).sample(&g).unwrap();
        let z = SamplePath::zero(1, 0.5, 4).unwrap();
        let b = DriftField::power(0.75).unwrap();
        let s = solve_spde(&b, &z, &u0, &TransportOptions::new(1.0 / 64.0, 0.5, 4, Scheme::SemiLagrangian), l1())
            .unwrap();
        let r = renormalize_check(&s, &RenormalizationFn::power(1.0).unwrap(), &b).unwrap();
        assert_eq!(r.status, CheckStatus::Inconclusive);
    }

    #[test]
    fn continuity_modulus_cases() {
        let (g, prof, u0) = setup(128);
        let z = SamplePath::zero(1, 1.0, 16).unwrap();
        let opts = TransportOptions::new(1.0 / 16.0, 1.0, 16, Scheme::SemiLagrangian);
        let s = solve_spde(&DriftField::zero(1), &z, &u0, &opts, l1()).unwrap();
        assert_eq!(time_continuity_modulus(&s, l1()).unwrap(), 0.0);

        let w = SamplePath::sample_brownian(3, 1.0, 64, 1).unwrap();
        let opts = TransportOptions::new(1.0 / 64.0, 1.0, 64, Scheme::SemiLagrangian);
        let s = solve_spde(&DriftField::zero(1), &w, &u0, &opts, l1()).unwrap();
        let modulus = time_continuity_modulus(&s, l1()).unwrap();
        let max_jump = w
            .values()
            .windows(2)
            .map(|p| (p[1][0] - p[0][0]).abs())
            .fold(0.0, f64::max);
        let bound = translation_bound(&prof, &g, [max_jump, 0.0], 1.0);
        assert!(modulus <= bound * 1.01 + 1e-6, "{modulus} vs {bound}");
        assert!(modulus >= 0.5 * bound);

        // Sub-sampling a Brownian trajectory can lower the modulus (adjacent
        // increments may cancel), so only the triangle inequality is exact.
        let coarse = s.subsampled(2).unwrap();
        let coarse_modulus = time_continuity_modulus(&coarse, l1()).unwrap();
        assert!(coarse_modulus <= 2.0 * modulus * (1.0 + 1e-12));

        // On a path moving at constant speed the modulus halves with the spacing.
        let ramp = SamplePath::new(1, vec![0.0, 1.0], vec![[0.0; 2], [0.8, 0.0]], PathKind::PiecewiseLinearBv)
            .unwrap();
        let r = solve_spde_wong_zakai(&DriftField::zero(1), &ramp, &u0, &opts, l1()).unwrap();
        let fine = time_continuity_modulus(&r, l1()).unwrap();
        let coarse = time_continuity_modulus(&r.subsampled(2).unwrap(), l1()).unwrap();
        assert!(fine <= 1.05 * coarse);
        assert!((coarse / fine - 2.0).abs() < 0.05);
        assert!(time_continuity_modulus(&s.subsampled(64).unwrap(), l1()).is_err());
    }
}
