//! Brownian sample paths on uniform time meshes, their piecewise-linear
//! bounded-variation approximants, and path utilities.
//!
//! Gaussian increments come from a counter-based generator: the normal
//! variate for `(seed, component, step)` is a pure function of that triple,
//! so paths are reproducible regardless of generation order or thread
//! count.
//!
//! Algorithm: a key is derived with the SplitMix64 finalizer,
//!
//! ```text
//! key  = mix(mix(seed ^ 0x9E3779B97F4A7C15) ^ (stream + 1) * 0xD1B54A32D192ED03)
//! u_j  = ((mix(key ^ j) >> 11) + 1/2) * 2^-53            in (0, 1)
//! Z    = sqrt(-2 ln u_{2k}) * cos(2 pi u_{2k+1})          (Box-Muller)
//! ```
//!
//! The transcendental functions come from `libm`, a pure-Rust port of the
//! musl routines, so the bit patterns do not depend on the platform libm.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::field::{fmt_f64, Point, MAX_DIM};

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stateless keyed generator: every draw is addressed by a counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let key = mix64(
            mix64(seed ^ 0x9e37_79b9_7f4a_7c15)
                ^ stream.wrapping_add(1).wrapping_mul(0xd1b5_4a32_d192_ed03),
        );
        Self { key }
    }

    pub fn bits(&self, counter: u64) -> u64 {
        mix64(self.key ^ mix64(counter))
    }

    /// Uniform in the open interval `(0, 1)`.
    pub fn uniform(&self, counter: u64) -> f64 {
        ((self.bits(counter) >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal variate number `index` of this stream.
    pub fn normal(&self, index: u64) -> f64 {
        let u1 = self.uniform(2 * index);
        let u2 = self.uniform(2 * index + 1);
        (-2.0 * libm::log(u1)).sqrt() * libm::cos(2.0 * std::f64::consts::PI * u2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathKind {
    Brownian,
    PiecewiseLinearBv,
    Zero,
}

impl PathKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PathKind::Brownian => "brownian",
            PathKind::PiecewiseLinearBv => "piecewise_linear_bv",
            PathKind::Zero => "zero",
        }
    }
}

/// Node `k` of the uniform mesh with `steps` intervals on `[0, horizon]`.
pub fn mesh_time(k: usize, steps: usize, horizon: f64) -> f64 {
    if k == steps {
        horizon
    } else {
        k as f64 * horizon / steps as f64
    }
}

/// Continuous path `W: [0, T] -> R^d`, linear between knots, `W(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    dim: usize,
    times: Vec<f64>,
    values: Vec<Point>,
    kind: PathKind,
    seed: Option<u64>,
}

impl SamplePath {
    pub fn new(dim: usize, times: Vec<f64>, values: Vec<Point>, kind: PathKind) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Config(format!("unsupported path dimension {dim}")));
        }
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::MeshMismatch(format!(
                "path needs matching times/values with at least two knots ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::MeshMismatch("path mesh must start at t = 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
            return Err(Error::MeshMismatch("path times must increase strictly".into()));
        }
        if values[0][..dim].iter().any(|v| *v != 0.0) {
            return Err(Error::Config("path must start at the origin".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("path values must be finite".into()));
        }
        if kind == PathKind::Zero && values.iter().flatten().any(|v| *v != 0.0) {
            return Err(Error::Config("zero path with non-zero values".into()));
        }
        Ok(Self {
            dim,
            times,
            values,
            kind,
            seed: None,
        })
    }

    pub fn zero(dim: usize, horizon: f64, steps: usize) -> Result<Self> {
        check_mesh(horizon, steps)?;
        let times = (0..=steps).map(|k| mesh_time(k, steps, horizon)).collect();
        Self::new(dim, times, vec![[0.0; MAX_DIM]; steps + 1], PathKind::Zero)
    }

    /// Standard Brownian motion on the uniform mesh `t_k = k T / K`, built
    /// from cumulative sums of `N(0, T/K)` increments per component.
    pub fn sample_brownian(seed: u64, horizon: f64, steps: usize, dim: usize) -> Result<Self> {
        check_mesh(horizon, steps)?;
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Config(format!("unsupported path dimension {dim}")));
        }
        let sd = (horizon / steps as f64).sqrt();
        let streams: Vec<CounterRng> = (0..dim).map(|c| CounterRng::new(seed, c as u64)).collect();
        let mut values = Vec::with_capacity(steps + 1);
        let mut w = [0.0; MAX_DIM];
        values.push(w);
        for k in 0..steps {
            for (c, rng) in streams.iter().enumerate() {
                w[c] += sd * rng.normal(k as u64);
            }
            values.push(w);
        }
        let times = (0..=steps).map(|k| mesh_time(k, steps, horizon)).collect();
        let mut path = Self::new(dim, times, values, PathKind::Brownian)?;
        path.seed = Some(seed);
        Ok(path)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Point] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("paths have at least two knots")
    }

    /// Number of mesh intervals `K`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn eval(&self, t: f64) -> Result<Point> {
        let horizon = self.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::OutOfRange { t, horizon });
        }
        let k = self.times.partition_point(|s| *s <= t);
        // times[k - 1] <= t < times[k], or t == T.
        if k == self.times.len() || self.times[k - 1] == t {
            return Ok(self.values[k - 1]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (self.values[k - 1], self.values[k]);
        let mut out = [0.0; MAX_DIM];
        for c in 0..self.dim {
            out[c] = a[c] + w * (b[c] - a[c]);
        }
        Ok(out)
    }

    /// Piecewise-linear interpolant through the `n + 1` knots
    /// `t_{j K / n}`, evaluated back on this path's mesh.
    pub fn piecewise_linear_approx(&self, n: usize) -> Result<SamplePath> {
        if self.kind != PathKind::Brownian {
            return Err(Error::Config(format!(
                "approximants are built from brownian paths, got {}",
                self.kind.as_str()
            )));
        }
        let k_fine = self.steps();
        if n == 0 || k_fine % n != 0 {
            return Err(Error::MeshMismatch(format!(
                "level {n} does not divide the path mesh K = {k_fine}"
            )));
        }
        let stride = k_fine / n;
        let mut values = Vec::with_capacity(k_fine + 1);
        for k in 0..=k_fine {
            let j = k / stride;
            let r = k % stride;
            if r == 0 {
                values.push(self.values[k]);
                continue;
            }
            let (ka, kb) = (j * stride, (j + 1) * stride);
            let (ta, tb) = (self.times[ka], self.times[kb]);
            let w = (self.times[k] - ta) / (tb - ta);
            let (a, b) = (self.values[ka], self.values[kb]);
            let mut v = [0.0; MAX_DIM];
            for c in 0..self.dim {
                v[c] = a[c] + w * (b[c] - a[c]);
            }
            values.push(v);
        }
        let mut out = Self::new(self.dim, self.times.clone(), values, PathKind::PiecewiseLinearBv)?;
        out.seed = self.seed;
        Ok(out)
    }

    /// Sub-samples the knots with the given stride. A Brownian path
    /// sub-sampled this way is a Brownian path on the coarser mesh.
    pub fn coarsened(&self, stride: usize) -> Result<SamplePath> {
        if stride == 0 || self.steps() % stride != 0 {
            return Err(Error::MeshMismatch(format!(
                "stride {stride} does not divide K = {}",
                self.steps()
            )));
        }
        let times = self.times.iter().step_by(stride).copied().collect();
        let values = self.values.iter().step_by(stride).copied().collect();
        let mut out = Self::new(self.dim, times, values, self.kind)?;
        out.seed = self.seed;
        Ok(out)
    }

    /// Sum of Euclidean chord lengths between consecutive knots.
    pub fn total_variation(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| {
                (0..self.dim)
                    .map(|c| (w[1][c] - w[0][c]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "k,t")?;
        for c in 1..=self.dim {
            write!(out, ",W{c}")?;
        }
        writeln!(out)?;
        for (k, (t, w)) in self.times.iter().zip(&self.values).enumerate() {
            write!(out, "{k},{}", fmt_f64(*t))?;
            for v in &w[..self.dim] {
                write!(out, ",{}", fmt_f64(*v))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads a path dump back for replay. The result is labeled brownian.
    pub fn read_csv<R: BufRead>(input: R) -> Result<SamplePath> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty path file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 3 || cols[0] != "k" || cols[1] != "t" {
            return Err(Error::Parse(format!("bad path header: {header}")));
        }
        let dim = cols.len() - 2;
        let (mut times, mut values) = (Vec::new(), Vec::new());
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != dim + 2 {
                return Err(Error::Parse(format!("bad path row: {line}")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number {s:?} in path row")))
            };
            times.push(num(parts[1])?);
            let mut w = [0.0; MAX_DIM];
            for c in 0..dim.min(MAX_DIM) {
                w[c] = num(parts[2 + c])?;
            }
            values.push(w);
        }
        Self::new(dim, times, values, PathKind::Brownian)
    }
}

fn check_mesh(horizon: f64, steps: usize) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
    }
    if steps == 0 {
        return Err(Error::Config("path mesh needs at least one step".into()));
    }
    Ok(())
}

/// `max_t max_c |a(t) - b(t)|` over the union of both meshes.
pub fn sup_distance(a: &SamplePath, b: &SamplePath) -> Result<f64> {
    let (ta, tb) = (a.horizon(), b.horizon());
    if (ta - tb).abs() > 1e-12 * ta.max(tb) {
        return Err(Error::MeshMismatch(format!(
            "path horizons differ: {ta} vs {tb}"
        )));
    }
    let dim = a.dim.max(b.dim);
    let mut union: Vec<f64> = a.times.iter().chain(&b.times).map(|t| t.min(ta)).collect();
    union.sort_by(f64::total_cmp);
    union.dedup();
    let mut worst: f64 = 0.0;
    for t in union {
        let (va, vb) = (a.eval(t.min(ta))?, b.eval(t.min(tb))?);
        for c in 0..dim {
            worst = worst.max((va[c] - vb[c]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_starts_at_origin_and_is_deterministic() {
        let a = SamplePath::sample_brownian(7, 1.0, 500, 2).unwrap();
        let b = SamplePath::sample_brownian(7, 1.0, 500, 2).unwrap();
        assert_eq!(a.values()[0], [0.0, 0.0]);
        assert_eq!(a, b);
        let c = SamplePath::sample_brownian(8, 1.0, 500, 2).unwrap();
        assert_ne!(a.values(), c.values());
        assert_eq!(a.seed(), Some(7));
        assert_eq!(a.kind(), PathKind::Brownian);
    }

    #[test]
    fn components_are_independent_streams() {
        let p = SamplePath::sample_brownian(3, 1.0, 4000, 2).unwrap();
        let inc: Vec<(f64, f64)> = p
            .values()
            .windows(2)
            .map(|w| (w[1][0] - w[0][0], w[1][1] - w[0][1]))
            .collect();
        let n = inc.len() as f64;
        let dt = 1.0 / 4000.0;
        let corr = inc.iter().map(|(a, b)| a * b).sum::<f64>() / (n * dt);
        // Sample correlation of 4000 independent pairs: sd ~ 0.016.
        assert!(corr.abs() < 0.06, "{corr}");
    }

    #[test]
    fn uniforms_lie_in_open_unit_interval() {
        let r = CounterRng::new(0, 0);
        for k in 0..10_000 {
            let u = r.uniform(k);
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn eval_at_knots_and_midpoints() {
        let p = SamplePath::sample_brownian(11, 2.0, 64, 1).unwrap();
        for k in 0..=64 {
            assert_eq!(p.eval(p.times()[k]).unwrap(), p.values()[k]);
        }
        assert_eq!(p.eval(0.0).unwrap(), [0.0, 0.0]);
        let mid = 0.5 * (p.times()[5] + p.times()[6]);
        let v = p.eval(mid).unwrap()[0];
        let avg = 0.5 * (p.values()[5][0] + p.values()[6][0]);
        assert!((v - avg).abs() < 1e-15);
        assert!(matches!(p.eval(2.5), Err(Error::OutOfRange { .. })));
        assert!(p.eval(-0.1).is_err());
    }

    #[test]
    fn finest_approximant_is_the_path() {
        let p = SamplePath::sample_brownian(1, 1.0, 128, 1).unwrap();
        let a = p.piecewise_linear_approx(128).unwrap();
        assert_eq!(a.values(), p.values());
        assert_eq!(a.kind(), PathKind::PiecewiseLinearBv);
    }

    #[test]
    fn approximant_matches_coarse_knots_exactly() {
        let p = SamplePath::sample_brownian(2, 1.0, 256, 2).unwrap();
        for n in [1, 4, 32, 64] {
            let a = p.piecewise_linear_approx(n).unwrap();
            let stride = 256 / n;
            for j in 0..=n {
                assert_eq!(a.values()[j * stride], p.values()[j * stride]);
            }
        }
        assert!(matches!(
            p.piecewise_linear_approx(3),
            Err(Error::MeshMismatch(_))
        ));
    }

    #[test]
    fn approximant_reproduces_piecewise_linear_input() {
        let coarse = SamplePath::sample_brownian(5, 1.0, 256, 1).unwrap();
        let lin = coarse.piecewise_linear_approx(16).unwrap();
        let relabeled =
            SamplePath::new(1, lin.times().to_vec(), lin.values().to_vec(), PathKind::Brownian)
                .unwrap();
        let again = relabeled.piecewise_linear_approx(16).unwrap();
        for (a, b) in again.values().iter().zip(lin.values()) {
            assert!((a[0] - b[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn sup_distance_basics() {
        let p = SamplePath::sample_brownian(9, 1.0, 100, 1).unwrap();
        assert_eq!(sup_distance(&p, &p).unwrap(), 0.0);
        let z = SamplePath::zero(1, 1.0, 37).unwrap();
        let m = p.values().iter().map(|v| v[0].abs()).fold(0.0, f64::max);
        assert_eq!(sup_distance(&p, &z).unwrap(), m);
        let other = SamplePath::zero(1, 2.0, 10).unwrap();
        assert!(sup_distance(&p, &other).is_err());
    }

    #[test]
    fn sup_distance_to_half_resolution_chords() {
        let p = SamplePath::sample_brownian(4, 1.0, 512, 1).unwrap();
        let a = p.piecewise_linear_approx(256).unwrap();
        // Oracle: deviation of odd knots from the chord midpoint.
        let v = p.values();
        let oracle = (1..512)
            .step_by(2)
            .map(|k| (v[k][0] - 0.5 * (v[k - 1][0] + v[k + 1][0])).abs())
            .fold(0.0, f64::max);
        let d = sup_distance(&p, &a).unwrap();
        assert!((d - oracle).abs() < 1e-14, "{d} vs {oracle}");
    }

    #[test]
    fn total_variation_of_approximant_is_sum_of_chords() {
        let p = SamplePath::sample_brownian(6, 1.0, 1024, 1).unwrap();
        let a = p.piecewise_linear_approx(8).unwrap();
        let v = p.values();
        let chords: f64 = (0..8).map(|j| (v[(j + 1) * 128][0] - v[j * 128][0]).abs()).sum();
        assert!((a.total_variation() - chords).abs() < 1e-12);
    }

    #[test]
    fn coarsening_keeps_knots() {
        let p = SamplePath::sample_brownian(6, 1.0, 64, 1).unwrap();
        let c = p.coarsened(4).unwrap();
        assert_eq!(c.steps(), 16);
        assert_eq!(c.values()[3], p.values()[12]);
        assert!(p.coarsened(5).is_err());
    }

    #[test]
    fn zero_path_is_zero() {
        let z = SamplePath::zero(2, 1.0, 10).unwrap();
        assert!(z.values().iter().all(|v| *v == [0.0, 0.0]));
        assert_eq!(z.kind(), PathKind::Zero);
    }

    #[test]
    fn rejects_bad_paths() {
        assert!(SamplePath::new(1, vec![0.0, 0.5, 0.5], vec![[0.0; 2]; 3], PathKind::Brownian).is_err());
        assert!(SamplePath::new(1, vec![0.0, 1.0], vec![[1.0, 0.0], [0.0; 2]], PathKind::Brownian).is_err());
        assert!(SamplePath::sample_brownian(0, 0.0, 10, 1).is_err());
        assert!(SamplePath::sample_brownian(0, 1.0, 0, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = SamplePath::sample_brownian(12, 1.0, 20, 2).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("k,t,W1,W2\n0,0e0,0e0,0e0\n"));
        let back = SamplePath::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values(), p.values());
        assert_eq!(back.times(), p.times());
    }
}
