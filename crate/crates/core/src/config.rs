//! Run configuration: a TOML file with nested sections describing the metric,
//! the physics, the data source, resolutions and the experiment to run.
//! The full schema is documented in `docs/config.md`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{PhysicsParams, PotentialSpec};
use crate::geometry::{build_metric, GeometryError, MetricKind, MetricModel, MetricSpec, RadialPoly};
use crate::oracle::{ExactSolution, OracleError};
use crate::Half;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("[{section}] {message}")]
    Invalid { section: &'static str, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

fn invalid(section: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { section, message: message.into() }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub datum: Option<DatumConfig>,
    pub resolution: ResolutionConfig,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub convergence: Option<ConvergenceConfig>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Constraints,
    Goursat,
    Cauchy,
    Spincoeffs,
    Convergence,
    OracleCheck,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    #[serde(default = "default_kind")]
    pub kind: String,
    /// polynomial coefficients of A in r^2 (static-spherical only)
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
}

fn default_kind() -> String {
    "minkowski".into()
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { kind: default_kind(), a: None, b: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(default)]
    pub mass: f64,
    #[serde(default)]
    pub charge: f64,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub coeffs_r2: Vec<f64>,
    #[serde(default)]
    pub t_freq: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// "constant" or "plane-wave"
    pub kind: String,
    /// lower-index Weyl components (phi_0, phi_1) as [re, im] pairs
    pub phi: [[f64; 2]; 2],
    /// upper-index components (chi^0', chi^1'); constant spinors only
    #[serde(default)]
    pub chi: Option<[[f64; 2]; 2]>,
    /// spatial momentum; plane waves only
    #[serde(default)]
    pub momentum: Option<[f64; 3]>,
}

/// Explicit transverse datum: mode lists `[2l, 2m, re, im]`, constant in `v`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatumConfig {
    pub psi1_modes: Vec<[f64; 4]>,
    #[serde(default)]
    pub psi4_modes: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ResolutionConfig {
    pub n_v: usize,
    pub n_r: usize,
    /// doubled band limit 2 l_max (odd)
    pub lmax2: Half,
    pub t_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_dissipation")]
    pub dissipation: f64,
    #[serde(default = "default_out")]
    pub out_dir: String,
    #[serde(default)]
    pub repro: bool,
    /// blend target of the beyond-cone extension (fraction of the edge value)
    #[serde(default)]
    pub extension_blend_target: f64,
}

fn default_lambdas() -> Vec<f64> {
    vec![0.9, 0.95, 0.975]
}

fn default_cfl() -> f64 {
    0.8
}

fn default_dissipation() -> f64 {
    0.02
}

fn default_out() -> String {
    "out".into()
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            lambdas: default_lambdas(),
            cfl: default_cfl(),
            dissipation: default_dissipation(),
            out_dir: default_out(),
            repro: false,
            extension_blend_target: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "tol_isometry")]
    pub isometry_gap: f64,
    #[serde(default = "tol_matching")]
    pub matching: f64,
    #[serde(default = "tol_constraint")]
    pub constraint_sup: f64,
    #[serde(default = "tol_roundtrip")]
    pub goursat_roundtrip: f64,
}

fn tol_isometry() -> f64 {
    1e-5
}
fn tol_matching() -> f64 {
    1e-5
}
fn tol_constraint() -> f64 {
    1e-6
}
fn tol_roundtrip() -> f64 {
    5e-4
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            isometry_gap: tol_isometry(),
            matching: tol_matching(),
            constraint_sup: tol_constraint(),
            goursat_roundtrip: tol_roundtrip(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// at least three resolutions, strictly increasing
    pub resolutions: Vec<usize>,
    /// "constraints" | "isometry" | "goursat-lambda"
    pub target: String,
}

impl RunConfig {
    pub fn from_path(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let cfg: RunConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.resolution;
        if r.t_max <= 0.0 {
            return Err(invalid("resolution", format!("t_max must be positive, got {}", r.t_max)));
        }
        if r.n_v < 8 || r.n_v % 2 != 0 {
            return Err(invalid("resolution", format!("n_v must be even and >= 8, got {}", r.n_v)));
        }
        if r.n_r < 12 {
            return Err(invalid("resolution", format!("n_r must be >= 12, got {}", r.n_r)));
        }
        if r.lmax2 < 1 || r.lmax2 % 2 == 0 {
            return Err(invalid(
                "resolution",
                format!("lmax2 is the doubled half-integer band limit and must be odd and >= 1, got {}", r.lmax2),
            ));
        }
        let ls = &self.run.lambdas;
        if ls.is_empty() || !ls.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("run", format!("lambdas must be strictly increasing, got {ls:?}")));
        }
        if ls.iter().any(|&l| l <= 0.5 || l >= 1.0) {
            return Err(invalid("run", format!("lambdas must lie in (0.5, 1), got {ls:?}")));
        }
        if matches!(self.experiment, Experiment::Goursat) && ls.len() < 2 {
            return Err(invalid(
                "run",
                "lambda extrapolation needs at least two opened cones".to_string(),
            ));
        }
        if !(0.0 < self.run.cfl && self.run.cfl <= 1.4) {
            return Err(invalid("run", format!("cfl must lie in (0, 1.4], got {}", self.run.cfl)));
        }
        if self.run.dissipation < 0.0 || self.run.dissipation > 0.5 {
            return Err(invalid("run", format!("dissipation must lie in [0, 0.5], got {}", self.run.dissipation)));
        }
        match &self.metric.kind[..] {
            "minkowski" => {}
            "static-spherical" => {
                if self.metric.a.is_none() || self.metric.b.is_none() {
                    return Err(invalid("metric", "static-spherical needs a and b coefficient lists".to_string()));
                }
            }
            other => {
                return Err(invalid("metric", format!("unknown metric kind {other:?}")));
            }
        }
        if let Some(o) = &self.oracle {
            match &o.kind[..] {
                "constant" => {
                    if o.chi.is_none() {
                        return Err(invalid("oracle", "constant spinors need chi".to_string()));
                    }
                    if self.physics.mass != 0.0 || self.physics.charge != 0.0 {
                        return Err(invalid(
                            "oracle",
                            "constant spinors solve the system only with m = q = 0".to_string(),
                        ));
                    }
                }
                "plane-wave" => {}
                other => return Err(invalid("oracle", format!("unknown oracle kind {other:?}"))),
            }
        }
        if matches!(self.experiment, Experiment::Convergence) {
            let conv = self
                .convergence
                .as_ref()
                .ok_or_else(|| invalid("convergence", "missing [convergence] section".to_string()))?;
            if conv.resolutions.len() < 3 {
                return Err(invalid("convergence", "need at least 3 resolutions".to_string()));
            }
            if !conv.resolutions.windows(2).all(|w| w[0] < w[1]) {
                return Err(invalid("convergence", "resolution ladder must be strictly increasing".to_string()));
            }
            if !matches!(&conv.target[..], "constraints" | "isometry" | "goursat-lambda") {
                return Err(invalid("convergence", format!("unknown target {:?}", conv.target)));
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<MetricModel, ConfigError> {
        let kind = match &self.metric.kind[..] {
            "minkowski" => MetricKind::Minkowski,
            _ => MetricKind::StaticSpherical {
                a: RadialPoly::new(self.metric.a.clone().unwrap_or_else(|| vec![1.0])),
                b: RadialPoly::new(self.metric.b.clone().unwrap_or_else(|| vec![1.0])),
            },
        };
        Ok(build_metric(&MetricSpec { kind, t_max: self.resolution.t_max })?)
    }

    pub fn physics_params(&self) -> PhysicsParams {
        PhysicsParams {
            mass: self.physics.mass,
            charge: self.physics.charge,
            potential: self
                .physics
                .potential
                .as_ref()
                .map(|p| PotentialSpec { coeffs_r2: p.coeffs_r2.clone(), t_freq: p.t_freq })
                .unwrap_or_default(),
        }
    }

    pub fn build_oracle(&self) -> Result<Option<ExactSolution>, ConfigError> {
        let Some(o) = &self.oracle else { return Ok(None) };
        let phi = [
            Complex64::new(o.phi[0][0], o.phi[0][1]),
            Complex64::new(o.phi[1][0], o.phi[1][1]),
        ];
        let sol = match &o.kind[..] {
            "constant" => {
                let chi = o.chi.expect("validated");
                ExactSolution::constant(
                    phi,
                    [Complex64::new(chi[0][0], chi[0][1]), Complex64::new(chi[1][0], chi[1][1])],
                )
            }
            _ => ExactSolution::plane_wave(
                self.physics.mass,
                o.momentum.unwrap_or([0.0; 3]),
                phi,
            )?,
        };
        Ok(Some(sol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
experiment = "oracle-check"

[metric]
kind = "minkowski"

[oracle]
kind = "constant"
phi = [[0.3, 0.1], [-0.7, 0.2]]
chi = [[0.11, -0.5], [0.45, 0.25]]

[resolution]
n_v = 64
n_r = 64
lmax2 = 3
t_max = 0.5
"#;

    #[test]
    fn parses_and_validates() {
        let cfg: RunConfig = toml::from_str(GOOD).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.run.lambdas, vec![0.9, 0.95, 0.975]);
        assert!(cfg.build_model().unwrap().is_flat());
        assert!(cfg.build_oracle().unwrap().is_some());
    }

    #[test]
    fn rejects_bad_band_limit() {
        let text = GOOD.replace("lmax2 = 3", "lmax2 = 4");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid { section: "resolution", .. })));
    }

    #[test]
    fn rejects_unknown_fields_with_path() {
        let text = GOOD.replace("kind = \"minkowski\"", "kind = \"minkowski\"\nbogus = 1");
        let parsed: Result<RunConfig, _> = toml::from_str(&text);
        assert!(parsed.is_err());
        let msg = format!("{}", parsed.unwrap_err());
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn rejects_massive_constant_oracle() {
        let text = GOOD.replace("[resolution]", "[physics]\nmass = 1.0\n\n[resolution]");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_short_lambda_list_for_goursat() {
        let text = GOOD
            .replace("experiment = \"oracle-check\"", "experiment = \"goursat\"")
            .replace("[metric]", "[run]\nlambdas = [0.9]\n\n[metric]");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid { section: "run", .. })));
    }
}
