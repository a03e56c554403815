//! JSON experiment configuration.
//!
//! ```json
//! {"d": 1, "L": 4.0, "N": 512, "T": 1.0, "dt": 0.00048828125,
//!  "scheme": "semi_lagrangian", "p": 1.0, "seed": 42,
//!  "drift": {"id": "constant", "c": [1.0]},
//!  "u0": {"id": "bump", "radius": 1.5},
//!  "phi_count": 10, "wz_levels": [4, 8, 16], "mollify_eps": "auto",
//!  "out_dir": "out"}
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::drift::{DriftField, Modulation};
use crate::error::{Error, Result};
use crate::field::{LebesgueExponent, Point, SpatialGrid, MAX_DIM};
use crate::profile::InitialProfile;
use crate::transport::{MollifyPolicy, Scheme, TransportOptions, CFL_LIMIT};

fn default_p() -> f64 {
    1.0
}

fn default_phi_count() -> usize {
    10
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub points_per_axis: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
    pub drift: DriftSpec,
    pub u0: ProfileSpec,
    #[serde(default = "default_phi_count")]
    pub phi_count: usize,
    /// Empty means the dyadic ladder `4, 8, ..., K`.
    #[serde(default)]
    pub wz_levels: Vec<usize>,
    #[serde(default)]
    pub mollify_eps: MollifyEps,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    Zero,
    Constant {
        c: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
    },
    Linear {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
    },
    Stream {
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
    },
    Shear {
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
    },
    Sine {
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
    },
    Power1d {
        alpha: f64,
    },
}

impl DriftSpec {
    /// Builds the drift on the box `[-L, L)^d`; `omega` switches on the
    /// `cos(omega t)` time modulation.
    pub fn build(&self, d: usize, half_width: f64) -> Result<DriftField> {
        let wrap = |e: Error| Error::Config(format!("drift: {e}"));
        let (field, omega) = match self {
            DriftSpec::Zero => (Ok(DriftField::zero(d)), None),
            DriftSpec::Constant { c, omega } => {
                if c.len() != d {
                    return Err(Error::Config(format!("drift.c needs {d} components, got {}", c.len())));
                }
                (DriftField::constant(c), *omega)
            }
            DriftSpec::Linear { matrix, omega } => {
                if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                    return Err(Error::Config(format!("drift.matrix must be {d}x{d}")));
                }
                (DriftField::linear(matrix), *omega)
            }
            DriftSpec::Stream { amplitude, omega } => {
                require_dim("stream", d, 2)?;
                (Ok(DriftField::stream_function(*amplitude, half_width)), *omega)
            }
            DriftSpec::Shear { amplitude, omega } => {
                require_dim("shear", d, 2)?;
                (Ok(DriftField::shear(*amplitude, half_width)), *omega)
            }
            DriftSpec::Sine { amplitude, omega } => (DriftField::sine(d, *amplitude, half_width), *omega),
            DriftSpec::Power1d { alpha } => {
                require_dim("power1d", d, 1)?;
                (DriftField::power(*alpha), None)
            }
        };
        let field = field.map_err(wrap)?;
        Ok(match omega {
            Some(omega) if omega.is_finite() => field.with_modulation(Modulation::Cosine { omega }),
            Some(omega) => return Err(Error::Config(format!("drift.omega must be finite, got {omega}"))),
            None => field,
        })
    }
}

fn require_dim(id: &str, d: usize, needed: usize) -> Result<()> {
    if d != needed {
        return Err(Error::Config(format!("drift '{id}' requires d = {needed}, got d = {d}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Zero,
    Bump {
        #[serde(default)]
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    DoubleBump {
        centers: Vec<Vec<f64>>,
        radius: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    Step {
        lo: Vec<f64>,
        hi: Vec<f64>,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    Sinusoid {
        k: u32,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
}

fn point(name: &str, v: &[f64], d: usize, allow_empty: bool) -> Result<Point> {
    let mut out = [0.0; MAX_DIM];
    if v.is_empty() && allow_empty {
        return Ok(out);
    }
    if v.len() != d || v.iter().any(|c| !c.is_finite()) {
        return Err(Error::Config(format!("{name} needs {d} finite components, got {v:?}")));
    }
    out[..d].copy_from_slice(v);
    Ok(out)
}

impl ProfileSpec {
    pub fn build(&self, d: usize, half_width: f64) -> Result<InitialProfile> {
        let positive = |name: &str, r: f64| {
            if r > 0.0 && r.is_finite() {
                Ok(r)
            } else {
                Err(Error::Config(format!("{name} must be positive, got {r}")))
            }
        };
        Ok(match self {
            ProfileSpec::Zero => InitialProfile::Zero,
            ProfileSpec::Bump {
                center,
                radius,
                amplitude,
            } => InitialProfile::Bump {
                center: point("u0.center", center, d, true)?,
                radius: positive("u0.radius", *radius)?,
                amplitude: *amplitude,
            },
            ProfileSpec::DoubleBump {
                centers,
                radius,
                amplitude,
            } => {
                if centers.len() != 2 {
                    return Err(Error::Config(format!(
                        "u0.centers needs exactly 2 points, got {}",
                        centers.len()
                    )));
                }
                InitialProfile::DoubleBump {
                    centers: [
                        point("u0.centers[0]", &centers[0], d, false)?,
                        point("u0.centers[1]", &centers[1], d, false)?,
                    ],
                    radius: positive("u0.radius", *radius)?,
                    amplitude: *amplitude,
                }
            }
            ProfileSpec::Step { lo, hi, amplitude } => InitialProfile::Step {
                lo: point("u0.lo", lo, d, false)?,
                hi: point("u0.hi", hi, d, false)?,
                amplitude: *amplitude,
            },
            ProfileSpec::Sinusoid { k, amplitude } => InitialProfile::Sinusoid {
                wavenumber: *k,
                amplitude: *amplitude,
                half_width,
            },
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MollifyWord {
    Auto,
    None,
}

/// `"auto"` (mollify rough drifts with `2h`), `"none"`, or an explicit width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MollifyEps {
    Word(MollifyWord),
    Value(f64),
}

impl Default for MollifyEps {
    fn default() -> Self {
        MollifyEps::Word(MollifyWord::Auto)
    }
}

impl MollifyEps {
    pub fn policy(&self) -> MollifyPolicy {
        match *self {
            MollifyEps::Word(MollifyWord::Auto) => MollifyPolicy::Auto,
            MollifyEps::Word(MollifyWord::None) => MollifyPolicy::Never,
            MollifyEps::Value(eps) => MollifyPolicy::Epsilon(eps),
        }
    }
}

/// Fraction of the box kept clear of initial data.
pub const SUPPORT_MARGIN: f64 = 0.1;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.d, self.half_width, self.points_per_axis)
    }

    pub fn exponent(&self) -> Result<LebesgueExponent> {
        LebesgueExponent::new(self.p).map_err(|e| Error::Config(format!("p: {e}")))
    }

    pub fn drift_field(&self) -> Result<DriftField> {
        self.drift.build(self.d, self.half_width)
    }

    pub fn profile(&self) -> Result<InitialProfile> {
        self.u0.build(self.d, self.half_width)
    }

    /// Number of path steps `K = T / dt`.
    pub fn path_steps(&self) -> Result<usize> {
        TransportOptions::new(self.dt, self.horizon, 1, self.scheme).steps()
    }

    /// Wong-Zakai levels, defaulting to the powers of two from 4 up to `K`
    /// that divide `K`.
    pub fn wong_zakai_levels(&self) -> Result<Vec<usize>> {
        if !self.wz_levels.is_empty() {
            return Ok(self.wz_levels.clone());
        }
        let k = self.path_steps()?;
        let levels: Vec<usize> = (2..usize::BITS)
            .map(|e| 1usize << e)
            .take_while(|&n| n <= k)
            .filter(|n| k % n == 0)
            .collect();
        if levels.is_empty() {
            return Err(Error::Config(format!("no dyadic Wong-Zakai level divides K = {k}")));
        }
        Ok(levels)
    }

    pub fn transport_options(&self, snapshots: usize) -> TransportOptions {
        TransportOptions::new(self.dt, self.horizon, snapshots, self.scheme)
            .with_mollify(self.mollify_eps.policy())
    }

    /// SHA-256 of the canonical JSON serialization, ignoring `out_dir` so
    /// that identical runs in different directories agree.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        let text = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Field-level validation plus the CFL and support-margin prechecks.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid().map_err(|e| Error::Config(format!("d/L/N: {e}")))?;
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config(format!("T must be positive, got {}", self.horizon)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        let steps = self.path_steps().map_err(|e| Error::Config(format!("dt: {e}")))?;
        self.exponent()?;
        if self.phi_count == 0 {
            return Err(Error::Config("phi_count must be at least 1".into()));
        }
        for &n in &self.wz_levels {
            if n == 0 || steps % n != 0 {
                return Err(Error::Config(format!(
                    "wz_levels entry {n} does not divide K = T/dt = {steps}"
                )));
            }
        }
        if let MollifyEps::Value(eps) = self.mollify_eps {
            if !(eps.is_finite() && eps >= grid.spacing()) {
                return Err(Error::Config(format!(
                    "mollify_eps {eps} must be at least the grid spacing {}",
                    grid.spacing()
                )));
            }
        }
        let drift = self.drift_field()?;
        let profile = self.profile()?;
        if self.scheme == Scheme::UpwindFv {
            let smoothed = self.mollify_eps.policy().apply(&drift, &grid)?;
            let speed = smoothed.max_speed_on(&grid, 0.0)?;
            let number = speed * self.d as f64 * self.dt / grid.spacing();
            if number > CFL_LIMIT {
                return Err(Error::Config(format!(
                    "dt: CFL number {number:.3} exceeds {CFL_LIMIT} for the upwind scheme"
                )));
            }
        }
        if !profile.is_periodic() {
            let u0 = profile.sample(&grid)?;
            if !u0.support_margin_ok(SUPPORT_MARGIN, 1e-8) {
                return Err(Error::Config(format!(
                    "u0: initial data reaches into the outer {}% of the box",
                    SUPPORT_MARGIN * 100.0
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> String {
        r#"{"d": 1, "L": 4.0, "N": 64, "T": 1.0, "dt": 0.0625, "seed": 42,
            "drift": {"id": "constant", "c": [1.0]},
            "u0": {"id": "bump", "radius": 1.5}}"#
            .to_string()
    }

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(&base()).unwrap();
        assert_eq!(cfg.scheme, Scheme::SemiLagrangian);
        assert_eq!(cfg.p, 1.0);
        assert_eq!(cfg.mollify_eps, MollifyEps::Word(MollifyWord::Auto));
        assert_eq!(cfg.path_steps().unwrap(), 16);
        assert_eq!(cfg.drift_field().unwrap().id(), "constant");
        assert_eq!(cfg.wong_zakai_levels().unwrap(), vec![4, 8, 16]);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = base().replace("\"seed\"", "\"sed\"");
        assert!(matches!(ExperimentConfig::from_json(&text), Err(Error::Json(_))));
        let text = base().replace("\"c\": [1.0]", "\"c\": [1.0], \"speed\": 2");
        assert!(ExperimentConfig::from_json(&text).is_err());
        let text = base().replace("\"radius\": 1.5", "\"radius\": 1.5, \"width\": 1");
        assert!(ExperimentConfig::from_json(&text).is_err());
        let text = base().replace("\"constant\"", "\"swirl\"");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn mollify_eps_forms() {
        for (v, expected) in [
            ("\"auto\"", MollifyPolicy::Auto),
            ("\"none\"", MollifyPolicy::Never),
            ("0.25", MollifyPolicy::Epsilon(0.25)),
        ] {
            let text = base().replace("\"seed\"", &format!("\"mollify_eps\": {v}, \"seed\""));
            assert_eq!(ExperimentConfig::from_json(&text).unwrap().mollify_eps.policy(), expected);
        }
        let text = base().replace("\"seed\"", "\"mollify_eps\": \"sometimes\", \"seed\"");
        assert!(ExperimentConfig::from_json(&text).is_err());
        let text = base().replace("\"seed\"", "\"mollify_eps\": 0.01, \"seed\"");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn prechecks() {
        // CFL: speed 1, dt = 0.0625, h = 0.125 gives 0.5 (fine); 10x speed fails.
        let ok = base().replace("\"seed\"", "\"scheme\": \"upwind_fv\", \"seed\"");
        assert!(ExperimentConfig::from_json(&ok).is_ok());
        let bad = ok.replace("[1.0]", "[10.0]");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("CFL"), "{err}");
        // Support margin.
        let wide = base().replace("\"radius\": 1.5", "\"radius\": 3.9");
        assert!(ExperimentConfig::from_json(&wide).unwrap_err().to_string().contains("u0"));
        // Level not dividing K.
        let lv = base().replace("\"seed\"", "\"wz_levels\": [3], \"seed\"");
        assert!(ExperimentConfig::from_json(&lv).is_err());
        // Dimension mismatches.
        let dm = base().replace("[1.0]", "[1.0, 2.0]");
        assert!(ExperimentConfig::from_json(&dm).is_err());
        let st = base().replace("{\"id\": \"constant\", \"c\": [1.0]}", "{\"id\": \"stream\", \"amplitude\": 1.0}");
        assert!(ExperimentConfig::from_json(&st).is_err());
        let dtb = base().replace("0.0625", "0.3");
        assert!(ExperimentConfig::from_json(&dtb).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::from_json(&base()).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 43;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn round_trips_through_json() {
        let a = ExperimentConfig::from_json(&base()).unwrap();
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), a);
    }
}
