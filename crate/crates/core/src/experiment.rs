//! Experiment commands behind the `stlab` binary: plain solves, weak-form
//! verification, the two-scheme uniqueness cross-check, the Wong-Zakai
//! study and the hypothesis audit. Every command writes tidy CSV into the
//! output directory and reports a pass/fail verdict.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::drift::{check_hypotheses, DriftField, Window};
use crate::error::{Error, Result};
use crate::field::{fmt_f64, LebesgueExponent, ScalarField, SpatialGrid};
use crate::path::{sup_distance, PathKind, SamplePath};
use crate::profile::InitialProfile;
use crate::spde::{solve_spde, solve_spde_wong_zakai, SpdeSolution};
use crate::transport::{write_snapshot_files, Scheme};
use crate::weak::{make_test_functions, weak_residuals, StochasticRule, Trajectory};

/// Bumped whenever a verdict threshold changes.
pub const TOLERANCE_VERSION: &str = "1";
/// Default weak-residual tolerance, relative to the normalizer.
pub const WEAK_TOLERANCE: f64 = 1e-2;
/// Wong-Zakai error budget at the finest level, relative to `||u0||_p`.
pub const WONG_ZAKAI_TOLERANCE: f64 = 0.05;
/// Spatial samples per time slice in the hypothesis audit.
pub const HYPOTHESIS_SAMPLES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Order {
    Rate(f64),
    /// The error hit zero.
    Exact,
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Rate(r) => f.write_str(&fmt_f64(*r)),
            Order::Exact => f.write_str("exact"),
        }
    }
}

/// Pairwise `log2(e_{k-1} / e_k)`. Zero entries may only form a tail and are
/// reported as [`Order::Exact`].
pub fn estimate_order(errors: &[f64]) -> Result<Vec<Order>> {
    if errors.len() < 2 {
        return Err(Error::Config(format!(
            "order estimation needs at least 2 errors, got {}",
            errors.len()
        )));
    }
    if let Some(e) = errors.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
        return Err(Error::Config(format!("errors must be finite and non-negative, got {e}")));
    }
    if let Some(z) = errors.iter().position(|&e| e == 0.0) {
        if errors[z..].iter().any(|&e| e != 0.0) {
            return Err(Error::Config(
                "a zero error must be followed only by zeros".into(),
            ));
        }
    }
    Ok(errors
        .windows(2)
        .map(|w| {
            if w[1] == 0.0 {
                Order::Exact
            } else {
                Order::Rate((w[0] / w[1]).log2())
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub level_name: String,
    pub levels: Vec<usize>,
    pub errors: Vec<f64>,
    /// One entry per level; the first is `None`.
    pub orders: Vec<Option<Order>>,
    pub extra: Vec<(String, Vec<f64>)>,
}

impl ConvergenceTable {
    pub fn new(level_name: &str, levels: Vec<usize>, errors: Vec<f64>) -> Result<Self> {
        if levels.len() != errors.len() {
            return Err(Error::Config("levels and errors differ in length".into()));
        }
        let mut orders = vec![None];
        if errors.len() >= 2 {
            orders.extend(estimate_order(&errors)?.into_iter().map(Some));
        }
        Ok(Self {
            level_name: level_name.to_string(),
            levels,
            errors,
            orders,
            extra: Vec::new(),
        })
    }

    pub fn with_column(mut self, name: &str, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.levels.len(), "column length");
        self.extra.push((name.to_string(), values));
        self
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.extra.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Numeric orders (skipping the first row and exact hits).
    pub fn rates(&self) -> Vec<f64> {
        self.orders
            .iter()
            .filter_map(|o| match o {
                Some(Order::Rate(r)) => Some(*r),
                _ => None,
            })
            .collect()
    }

    /// Errors over the last `k` levels never increase.
    pub fn non_increasing_tail(&self, k: usize) -> bool {
        let start = self.errors.len().saturating_sub(k);
        self.errors[start..].windows(2).all(|w| w[1] <= w[0])
    }

    /// Errors over the last `k` levels strictly decrease (or sit at zero).
    pub fn decreasing_tail(&self, k: usize) -> bool {
        let start = self.errors.len().saturating_sub(k);
        self.errors[start..].windows(2).all(|w| w[1] < w[0] || w[1] == 0.0)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "{},error,order", self.level_name)?;
        for (name, _) in &self.extra {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for i in 0..self.levels.len() {
            let order = self.orders[i].map(|o| o.to_string()).unwrap_or_default();
            write!(out, "{},{},{}", self.levels[i], fmt_f64(self.errors[i]), order)?;
            for (_, v) in &self.extra {
                write!(out, ",{}", fmt_f64(v[i]))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Verdict and summary lines of a command.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandOutcome {
    pub pass: bool,
    pub lines: Vec<String>,
}

/// Everything a command needs: the validated config, output directory and
/// the driving path.
#[derive(Clone, Debug)]
pub struct RunSetup {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    pub grid: SpatialGrid,
    pub drift: DriftField,
    pub profile: InitialProfile,
    pub u0: ScalarField,
    pub p: LebesgueExponent,
    pub path: SamplePath,
}

impl RunSetup {
    /// Applies command-line overrides, re-validates, and samples the
    /// Brownian path unless one is supplied.
    pub fn new(
        mut config: ExperimentConfig,
        out_dir: Option<PathBuf>,
        seed: Option<u64>,
        path_file: Option<&Path>,
    ) -> Result<Self> {
        if let Some(seed) = seed {
            config.seed = seed;
        }
        if let Some(dir) = out_dir {
            config.out_dir = dir;
        }
        config.validate()?;
        let grid = config.grid()?;
        let drift = config.drift_field()?;
        let profile = config.profile()?;
        let u0 = profile.sample(&grid)?;
        let p = config.exponent()?;
        let steps = config.path_steps()?;
        let path = match path_file {
            Some(file) => {
                let reader = BufReader::new(File::open(file).map_err(|e| {
                    Error::Config(format!("cannot open path file {}: {e}", file.display()))
                })?);
                let path = SamplePath::read_csv(reader)?;
                if path.dim() != config.d {
                    return Err(Error::Config(format!(
                        "path file has dimension {}, config has d = {}",
                        path.dim(),
                        config.d
                    )));
                }
                if path.horizon() < config.horizon * (1.0 - 1e-12) {
                    return Err(Error::Config(format!(
                        "path file ends at {}, before T = {}",
                        path.horizon(),
                        config.horizon
                    )));
                }
                path
            }
            None => SamplePath::sample_brownian(config.seed, config.horizon, steps, config.d)?,
        };
        Ok(Self {
            out_dir: config.out_dir.clone(),
            config,
            grid,
            drift,
            profile,
            u0,
            p,
            path,
        })
    }

    pub fn steps(&self) -> usize {
        self.config.path_steps().expect("validated config")
    }

    fn create_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir)?;
        Ok(())
    }

    fn csv(&self, name: &str) -> Result<BufWriter<File>> {
        self.create_out_dir()?;
        Ok(BufWriter::new(File::create(self.out_dir.join(name))?))
    }

    fn write_manifest(&self, name: &str, rows: &[ManifestRow]) -> Result<()> {
        let mut out = self.csv(name)?;
        writeln!(
            out,
            "seed,scheme,N,dt,p,drift_id,path_kind,n_level,config_hash,tolerance_version"
        )?;
        let hash = self.config.hash();
        for r in rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.seed,
                r.scheme,
                r.n,
                fmt_f64(self.config.dt),
                fmt_f64(self.config.p),
                r.drift_id,
                r.path_kind.as_str(),
                r.n_level,
                hash,
                TOLERANCE_VERSION
            )?;
        }
        Ok(())
    }

    fn solve(&self, grid: &SpatialGrid, scheme: Scheme, snapshots: usize, path: &SamplePath) -> Result<SpdeSolution> {
        let u0 = if grid == &self.grid {
            self.u0.clone()
        } else {
            self.profile.sample(grid)?
        };
        let mut opts = self.config.transport_options(snapshots);
        opts.scheme = scheme;
        match path.kind() {
            PathKind::PiecewiseLinearBv => solve_spde_wong_zakai(&self.drift, path, &u0, &opts, self.p),
            _ => solve_spde(&self.drift, path, &u0, &opts, self.p),
        }
    }
}

struct ManifestRow {
    seed: u64,
    scheme: Scheme,
    n: usize,
    drift_id: String,
    path_kind: PathKind,
    n_level: usize,
}

impl ManifestRow {
    fn of(setup: &RunSetup, sol: &SpdeSolution, n_level: usize) -> Self {
        let t = sol.transport();
        Self {
            seed: setup.config.seed,
            scheme: t.scheme,
            n: t.grid.points_per_axis(),
            drift_id: t.drift_id.clone(),
            path_kind: t.path_kind,
            n_level,
        }
    }
}

fn ok_or_fail(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Samples (or loads) the path, solves, and writes `u/`, `v/`, `path.csv`,
/// `norms.csv` and `manifest.csv`.
pub fn cmd_solve(setup: &RunSetup, snapshots: usize) -> Result<CommandOutcome> {
    let sol = setup.solve(&setup.grid, setup.config.scheme, snapshots, &setup.path)?;
    write_snapshot_files(sol.u(), &setup.out_dir.join("u"), "u")?;
    sol.transport().write_snapshots(&setup.out_dir.join("v"), "v")?;
    setup.path.write_csv(setup.csv("path.csv")?)?;
    let mut norms = setup.csv("norms.csv")?;
    writeln!(norms, "m,t,norm_u,norm_v")?;
    let norm_u = sol.norm_series()?;
    for (m, ((t, nu), v)) in sol.times().iter().zip(&norm_u).zip(sol.v()).enumerate() {
        writeln!(norms, "{m},{},{},{}", fmt_f64(*t), fmt_f64(*nu), fmt_f64(v.lp_norm(setup.p)?))?;
    }
    norms.flush()?;
    setup.write_manifest("manifest.csv", &[ManifestRow::of(setup, &sol, setup.steps())])?;
    let t = sol.transport();
    let mut lines = vec![format!(
        "solve: {} steps, {} snapshots, final ||u||_{} = {}",
        setup.steps(),
        snapshots,
        setup.config.p,
        fmt_f64(*norm_u.last().unwrap_or(&0.0))
    )];
    if let Some(eps) = t.mollifier_epsilon {
        lines.push(format!("solve: drift mollified with epsilon = {}", fmt_f64(eps)));
    }
    if t.flagged_feet > 0 || !t.margin_warnings.is_empty() {
        lines.push(format!(
            "solve: warning: support near the periodic boundary ({} flagged feet, {} snapshots)",
            t.flagged_feet,
            t.margin_warnings.len()
        ));
    }
    Ok(CommandOutcome { pass: true, lines })
}

/// Loads `u/u_t<m>.csv` snapshots and `path.csv` from a previous solve.
pub fn load_run(dir: &Path) -> Result<(SamplePath, Vec<f64>, Vec<ScalarField>)> {
    let path_file = dir.join("path.csv");
    let path = SamplePath::read_csv(BufReader::new(File::open(&path_file).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path_file.display())))
    })?))?;
    let mut fields = Vec::new();
    loop {
        let file = dir.join("u").join(format!("u_t{}.csv", fields.len()));
        if !file.exists() {
            break;
        }
        fields.push(ScalarField::read_csv(BufReader::new(File::open(file)?))?);
    }
    if fields.len() < 2 {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no snapshot series under {}", dir.join("u").display()),
        )));
    }
    let intervals = fields.len() - 1;
    let k = path.steps();
    if k % intervals != 0 {
        return Err(Error::MeshMismatch(format!(
            "{intervals} snapshot intervals do not divide the path mesh K = {k}"
        )));
    }
    let times = (0..fields.len()).map(|m| path.times()[m * k / intervals]).collect();
    Ok((path, times, fields))
}

/// Weak-form residuals of a dense in-config run (or of a saved run) against
/// `phi_count` test functions; writes `weak_residual.csv`.
pub fn cmd_verify_weak(setup: &RunSetup, run_dir: Option<&Path>, tolerance: f64) -> Result<CommandOutcome> {
    let (path, times, fields, drift) = match run_dir {
        Some(dir) => {
            let (path, times, fields) = load_run(dir)?;
            if fields[0].grid() != &setup.grid {
                return Err(Error::Config("saved run grid differs from the config grid".into()));
            }
            let drift = setup.config.mollify_eps.policy().apply(&setup.drift, &setup.grid)?;
            (path, times, fields, drift)
        }
        None => {
            let sol = setup.solve(&setup.grid, setup.config.scheme, setup.steps(), &setup.path)?;
            let drift = setup.config.mollify_eps.policy().apply(&setup.drift, &setup.grid)?;
            (sol.path().clone(), sol.times().to_vec(), sol.u().to_vec(), drift)
        }
    };
    let rule = match path.kind() {
        PathKind::PiecewiseLinearBv => StochasticRule::RiemannStieltjes,
        _ => StochasticRule::Stratonovich,
    };
    let phis = make_test_functions(&setup.grid, setup.config.phi_count, setup.config.seed)?;
    let report = weak_residuals(
        Trajectory::new(&times, &fields)?,
        &drift,
        &path,
        &phis,
        setup.config.p,
        rule,
    )?;
    report.write_csv(setup.csv("weak_residual.csv")?)?;
    let worst = report.max_normalized();
    let pass = worst <= tolerance;
    Ok(CommandOutcome {
        pass,
        lines: vec![format!(
            "verify-weak: max |r|/normalizer = {} over {} test functions (tolerance {}): {}",
            fmt_f64(worst),
            phis.len(),
            fmt_f64(tolerance),
            ok_or_fail(pass)
        )],
    })
}

/// Largest `||a(s_m) - b(s_m)||_p` over the snapshots.
pub fn max_snapshot_distance(a: &[ScalarField], b: &[ScalarField], p: LebesgueExponent) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        worst = worst.max(x.difference(y)?.lp_norm(p)?);
    }
    Ok(worst)
}

/// Grid ladder `N/8, N/4, N/2, N` (coarse levels below 8 points dropped).
pub fn refinement_ladder(n: usize) -> Vec<usize> {
    [8, 4, 2, 1]
        .iter()
        .filter(|&&f| n % f == 0 && n / f >= 8)
        .map(|f| n / f)
        .collect()
}

/// Semi-Lagrangian versus upwind on the same path over a grid ladder;
/// writes `uniqueness.csv`.
pub fn cmd_uniqueness(setup: &RunSetup, snapshots: usize) -> Result<CommandOutcome> {
    let q = setup.p.q();
    let report = check_hypotheses(
        &setup.drift,
        q,
        &Window::of_grid(&setup.grid),
        setup.config.horizon,
        HYPOTHESIS_SAMPLES,
    )?;
    let exploratory = !report.all_ok();
    let ladder = refinement_ladder(setup.grid.points_per_axis());
    let mut discrepancies = Vec::with_capacity(ladder.len());
    let mut manifest = Vec::new();
    for &n in &ladder {
        let grid = SpatialGrid::new(setup.config.d, setup.config.half_width, n)?;
        let sl = setup.solve(&grid, Scheme::SemiLagrangian, snapshots, &setup.path)?;
        let fv = setup.solve(&grid, Scheme::UpwindFv, snapshots, &setup.path)?;
        let d = max_snapshot_distance(sl.u(), fv.u(), setup.p)?;
        info!("uniqueness: N = {n}, discrepancy {d:e}");
        manifest.push(ManifestRow::of(setup, &sl, setup.steps()));
        manifest.push(ManifestRow::of(setup, &fv, setup.steps()));
        discrepancies.push(d);
    }
    let table = ConvergenceTable::new("N", ladder, discrepancies)?;
    table.write_csv(setup.csv("uniqueness.csv")?)?;
    setup.write_manifest("uniqueness_manifest.csv", &manifest)?;
    let pass = table.decreasing_tail(3);
    let mut lines = vec![format!(
        "uniqueness: sup_t ||u_SL - u_FV||_{} = {} at N = {}: {}",
        setup.config.p,
        fmt_f64(*table.errors.last().unwrap_or(&0.0)),
        table.levels.last().copied().unwrap_or(0),
        ok_or_fail(pass)
    )];
    if exploratory {
        lines.push(format!(
            "uniqueness: drift '{}' fails the uniqueness hypotheses for q = {q}; results are exploratory",
            setup.drift.id()
        ));
    }
    Ok(CommandOutcome { pass, lines })
}

/// One Wong-Zakai table for a fixed path.
pub fn wong_zakai_table(setup: &RunSetup, path: &SamplePath, levels: &[usize], snapshots: usize) -> Result<ConvergenceTable> {
    let reference = setup.solve(&setup.grid, setup.config.scheme, snapshots, path)?;
    let rows: Vec<(f64, f64)> = levels
        .par_iter()
        .map(|&n| {
            let approx = path.piecewise_linear_approx(n)?;
            let sol = setup.solve(&setup.grid, setup.config.scheme, snapshots, &approx)?;
            Ok((
                max_snapshot_distance(sol.u(), reference.u(), setup.p)?,
                sup_distance(&approx, path)?,
            ))
        })
        .collect::<Result<_>>()?;
    let (errors, distances): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let grad = setup.profile.gradient_lp_norm(&setup.grid, setup.config.p);
    let bounds = distances.iter().map(|d| grad * d).collect();
    Ok(ConvergenceTable::new("n", levels.to_vec(), errors)?
        .with_column("sup_distance", distances)
        .with_column("translation_bound", bounds))
}

/// Wong-Zakai study over `seeds` consecutive seeds (worst case per level);
/// writes `wong_zakai.csv`.
pub fn cmd_wong_zakai(setup: &RunSetup, seeds: usize, snapshots: usize) -> Result<CommandOutcome> {
    if seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()));
    }
    let levels = setup.config.wong_zakai_levels()?;
    let k = setup.path.steps();
    let mut worst: Option<ConvergenceTable> = None;
    for s in 0..seeds {
        let path = if s == 0 {
            setup.path.clone()
        } else {
            SamplePath::sample_brownian(
                setup.config.seed + s as u64,
                setup.config.horizon,
                setup.steps(),
                setup.config.d,
            )?
        };
        let table = wong_zakai_table(setup, &path, &levels, snapshots)?;
        worst = Some(match worst {
            None => table,
            Some(w) => {
                let errors = w.errors.iter().zip(&table.errors).map(|(a, b)| a.max(*b)).collect();
                let merge = |name: &str| -> Vec<f64> {
                    let a = w.column(name).unwrap_or(&[]);
                    let b = table.column(name).unwrap_or(&[]);
                    a.iter().zip(b).map(|(x, y)| x.max(*y)).collect()
                };
                ConvergenceTable::new("n", levels.clone(), errors)?
                    .with_column("sup_distance", merge("sup_distance"))
                    .with_column("translation_bound", merge("translation_bound"))
            }
        });
    }
    let table = worst.expect("at least one seed");
    table.write_csv(setup.csv("wong_zakai.csv")?)?;
    let drift_id = setup
        .config
        .mollify_eps
        .policy()
        .apply(&setup.drift, &setup.grid)?
        .id();
    let manifest: Vec<ManifestRow> = (0..seeds)
        .flat_map(|s| {
            let reference = (PathKind::Brownian, k);
            std::iter::once(reference)
                .chain(levels.iter().map(|&n| (PathKind::PiecewiseLinearBv, n)))
                .map(move |(path_kind, n_level)| (s, path_kind, n_level))
        })
        .map(|(s, path_kind, n_level)| ManifestRow {
            seed: setup.config.seed + s as u64,
            scheme: setup.config.scheme,
            n: setup.grid.points_per_axis(),
            drift_id: drift_id.clone(),
            path_kind,
            n_level,
        })
        .collect();
    setup.write_manifest("wong_zakai_manifest.csv", &manifest)?;
    let u0_norm = setup.u0.lp_norm(setup.p)?;
    let finest = *table.errors.last().expect("non-empty levels");
    let monotone = table.non_increasing_tail(4);
    let small = finest <= WONG_ZAKAI_TOLERANCE * u0_norm;
    let exact = *levels.last().expect("non-empty levels") != k || finest == 0.0;
    let pass = monotone && small && exact;
    Ok(CommandOutcome {
        pass,
        lines: vec![format!(
            "wong-zakai: E_n = {} at n = {} ({} seed(s), tail non-increasing: {}, within {} ||u0||: {}): {}",
            fmt_f64(finest),
            levels.last().unwrap(),
            seeds,
            monotone,
            WONG_ZAKAI_TOLERANCE,
            small,
            ok_or_fail(pass)
        )],
    })
}

/// Hypothesis audit of the configured drift for `q` conjugate to `p`;
/// writes `hypotheses.csv`.
pub fn cmd_hypotheses(setup: &RunSetup, samples: usize) -> Result<CommandOutcome> {
    let q = setup.p.q();
    let report = check_hypotheses(
        &setup.drift,
        q,
        &Window::of_grid(&setup.grid),
        setup.config.horizon,
        samples,
    )?;
    report.write_csv(setup.csv("hypotheses.csv")?)?;
    let mut lines: Vec<String> = report
        .rows()
        .iter()
        .map(|(name, e)| {
            format!(
                "hypotheses: {name} evidence {} (doubled {}): {}",
                fmt_f64(e.value),
                fmt_f64(e.doubled),
                ok_or_fail(e.ok)
            )
        })
        .collect();
    lines.push(format!("hypotheses: C = {}", fmt_f64(report.c())));
    Ok(CommandOutcome {
        pass: report.all_ok(),
        lines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_of_geometric_errors() {
        assert_eq!(estimate_order(&[0.4, 0.2, 0.1]).unwrap(), vec![Order::Rate(1.0), Order::Rate(1.0)]);
        match estimate_order(&[0.9, 0.1]).unwrap()[0] {
            Order::Rate(r) => assert!((r - 9f64.log2()).abs() < 1e-12 && (r - 3.17).abs() < 0.01),
            Order::Exact => panic!("expected a rate"),
        }
        assert_eq!(estimate_order(&[0.4, 0.2, 0.0]).unwrap()[1], Order::Exact);
        assert_eq!(estimate_order(&[0.0, 0.0]).unwrap(), vec![Order::Exact]);
        assert!(estimate_order(&[0.4, 0.0, 0.1]).is_err());
        assert!(estimate_order(&[0.4, -0.1]).is_err());
        assert!(estimate_order(&[0.4]).is_err());
    }

    #[test]
    fn table_csv_layout() {
        let t = ConvergenceTable::new("N", vec![64, 128, 256], vec![0.4, 0.1, 0.0])
            .unwrap()
            .with_column("bound", vec![1.0, 0.5, 0.25]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "N,error,order,bound");
        assert_eq!(lines[1], "64,4e-1,,1e0");
        assert_eq!(lines[2], "128,1e-1,2e0,5e-1");
        assert_eq!(lines[3], "256,0e0,exact,2.5e-1");
        assert!(t.non_increasing_tail(3) && t.decreasing_tail(3));
        assert_eq!(t.rates(), vec![2.0]);
    }

    #[test]
    fn ladder_levels() {
        assert_eq!(refinement_ladder(1024), vec![128, 256, 512, 1024]);
        assert_eq!(refinement_ladder(32), vec![8, 16, 32]);
    }
}
