//! Run configuration: tolerances, sample counts, quadrature strengths and
//! degree caps, read from TOML. Every field has a default.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Multiplies every tolerance.
    pub tol_scale: f64,
    pub core: CoreCfg,
    pub exterior: ExteriorCfg,
    pub flow: FlowCfg,
    pub skeleton: SkeletonCfg,
    pub homotopy: HomotopyCfg,
    pub flat: FlatCfg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoreCfg {
    /// Polynomial degrees 0..=max_degree enter the formal cohomology check.
    pub max_degree: u32,
    pub degree_cap: u32,
    pub schouten_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExteriorCfg {
    pub samples: usize,
    pub r_max: f64,
    pub tol: f64,
    pub theta_max_order: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowCfg {
    pub samples: usize,
    pub r_max: f64,
    pub times: Vec<f64>,
    pub rk4_steps_per_unit: usize,
    pub tol_matrix: f64,
    pub tol_rel: f64,
    pub retract_samples: usize,
    pub retract_min_f: f64,
    pub tol_retract_limit: f64,
    pub tol_retract: f64,
    pub sweep_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkeletonCfg {
    pub samples: usize,
    pub lambda_max: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomotopyCfg {
    /// Finite-time configurations per canonical form.
    pub finite_per_form: usize,
    pub t_max: f64,
    pub r_max: f64,
    pub tol_finite: f64,
    /// Infinite-time configurations per canonical form.
    pub infinite_per_form: usize,
    pub skeleton_min_f: f64,
    pub quad_tol: f64,
    pub su2_configs: usize,
    pub su2_n_quad: usize,
    pub tol_su2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlatCfg {
    pub ring_samples: usize,
    pub numeric_points: usize,
    /// Directions of the 6-dimensional grid; the refined grid doubles them.
    pub slb_dirs: usize,
    pub slb_tol: f64,
    pub max_growth: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 42,
            tol_scale: 1.0,
            core: CoreCfg::default(),
            exterior: ExteriorCfg::default(),
            flow: FlowCfg::default(),
            skeleton: SkeletonCfg::default(),
            homotopy: HomotopyCfg::default(),
            flat: FlatCfg::default(),
        }
    }
}

impl Default for CoreCfg {
    fn default() -> Self {
        CoreCfg { max_degree: 3, degree_cap: 8, schouten_samples: 5 }
    }
}

impl Default for ExteriorCfg {
    fn default() -> Self {
        ExteriorCfg { samples: 200, r_max: 2.0, tol: 1e-10, theta_max_order: 4 }
    }
}

impl Default for FlowCfg {
    fn default() -> Self {
        FlowCfg {
            samples: 200,
            r_max: 2.0,
            times: vec![0.5, 1.0, 2.0, 5.0],
            rk4_steps_per_unit: 2000,
            tol_matrix: 1e-8,
            tol_rel: 1e-10,
            retract_samples: 500,
            retract_min_f: 0.1,
            tol_retract_limit: 1e-6,
            tol_retract: 1e-10,
            sweep_samples: 2000,
        }
    }
}

impl Default for SkeletonCfg {
    fn default() -> Self {
        SkeletonCfg { samples: 1000, lambda_max: 2.0, tol: 1e-10 }
    }
}

impl Default for HomotopyCfg {
    fn default() -> Self {
        HomotopyCfg {
            finite_per_form: 4,
            t_max: 4.0,
            r_max: 1.5,
            tol_finite: 1e-5,
            infinite_per_form: 1,
            skeleton_min_f: 0.2,
            quad_tol: 1e-6,
            su2_configs: 2,
            su2_n_quad: 8,
            tol_su2: 1e-4,
        }
    }
}

impl Default for FlatCfg {
    fn default() -> Self {
        FlatCfg { ring_samples: 20, numeric_points: 1000, slb_dirs: 3, slb_tol: 1e-7, max_growth: 2.0 }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let c: Config = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("tol_scale", self.tol_scale),
            ("exterior.r_max", self.exterior.r_max),
            ("exterior.tol", self.exterior.tol),
            ("flow.r_max", self.flow.r_max),
            ("flow.tol_matrix", self.flow.tol_matrix),
            ("flow.tol_rel", self.flow.tol_rel),
            ("flow.retract_min_f", self.flow.retract_min_f),
            ("flow.tol_retract_limit", self.flow.tol_retract_limit),
            ("flow.tol_retract", self.flow.tol_retract),
            ("skeleton.lambda_max", self.skeleton.lambda_max),
            ("skeleton.tol", self.skeleton.tol),
            ("homotopy.t_max", self.homotopy.t_max),
            ("homotopy.r_max", self.homotopy.r_max),
            ("homotopy.tol_finite", self.homotopy.tol_finite),
            ("homotopy.skeleton_min_f", self.homotopy.skeleton_min_f),
            ("homotopy.quad_tol", self.homotopy.quad_tol),
            ("homotopy.tol_su2", self.homotopy.tol_su2),
            ("flat.slb_tol", self.flat.slb_tol),
            ("flat.max_growth", self.flat.max_growth),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError(format!("{name} must be a positive number, got {v}")));
            }
        }
        if self.flow.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(ConfigError("flow.times must be non-negative".into()));
        }
        if self.core.max_degree > self.core.degree_cap {
            return Err(ConfigError(format!(
                "core.max_degree {} exceeds core.degree_cap {}",
                self.core.max_degree, self.core.degree_cap
            )));
        }
        // an empty sample set would pass vacuously
        let counts = [
            ("core.schouten_samples", self.core.schouten_samples),
            ("exterior.samples", self.exterior.samples),
            ("flow.samples", self.flow.samples),
            ("flow.retract_samples", self.flow.retract_samples),
            ("flow.sweep_samples", self.flow.sweep_samples),
            ("flow.times", self.flow.times.len()),
            ("skeleton.samples", self.skeleton.samples),
            ("homotopy.finite_per_form", self.homotopy.finite_per_form),
            ("homotopy.infinite_per_form", self.homotopy.infinite_per_form),
            ("homotopy.su2_configs", self.homotopy.su2_configs),
            ("flat.ring_samples", self.flat.ring_samples),
            ("flat.numeric_points", self.flat.numeric_points),
            ("flat.slb_dirs", self.flat.slb_dirs),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, n)| *n == 0) {
            return Err(ConfigError(format!("{name} must be at least 1")));
        }
        if self.homotopy.su2_n_quad < 2 || self.flow.rk4_steps_per_unit == 0 {
            return Err(ConfigError("quadrature strengths and step counts must be positive".into()));
        }
        Ok(())
    }

    /// Scaled tolerance.
    pub fn tol(&self, t: f64) -> f64 {
        t * self.tol_scale
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn partial_override() {
        let c = Config::parse("seed = 7\n[flow]\nsamples = 10\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.flow.samples, 10);
        assert_eq!(c.flow.r_max, 2.0);
        assert_ne!(c.hash(), Config::default().hash());
    }

    #[test]
    fn rejects_unknown_and_bad_values() {
        assert!(Config::parse("bogus = 1").is_err());
        assert!(Config::parse("tol_scale = -1.0").is_err());
        assert!(Config::parse("[core]\nmax_degree = 9\n").is_err());
        assert!(Config::parse("seed = \"x\"").is_err());
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(Config::default().hash(), Config::default().hash());
        assert_eq!(Config::default().hash().len(), 16);
    }
}
