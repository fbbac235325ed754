use std::path::{Path, PathBuf};

use anyhow::Context;
use polyshoot_core::{EquationSpec, IntegratorConfig, Precision, ShootingConfig};
use serde::{Deserialize, Serialize};

use crate::Usage;

pub const CONFIG_SCHEMA: u32 = 1;

/// Everything a command needs, loadable from `--config` and overridable by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub m: u32,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Horizon; `None` picks 1000 for m = 2 and 100 for m = 3.
    pub r_max: Option<f64>,
    pub max_steps: usize,
    pub u_floor: f64,
    pub launch_radius: f64,
    pub dense_output_stride: f64,
    pub precision: Precision,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = IntegratorConfig::default();
        RunConfig {
            schema: CONFIG_SCHEMA,
            m: 2,
            rel_tol: base.rel_tol,
            abs_tol: base.abs_tol,
            r_max: None,
            max_steps: base.max_steps,
            u_floor: base.u_floor,
            launch_radius: base.launch_radius,
            dense_output_stride: base.dense_output_stride,
            precision: base.precision,
            out: None,
            cache_dir: None,
        }
    }
}

/// Flag values that override the config file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub m: Option<u32>,
    pub rel_tol: Option<f64>,
    pub r_max: Option<f64>,
    pub precision: Option<Precision>,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: Overrides) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                let cfg: RunConfig = serde_json::from_str(&text)
                    .map_err(|e| Usage(format!("config {}: {e}", p.display())))?;
                if cfg.schema != CONFIG_SCHEMA {
                    return Err(Usage(format!(
                        "config {}: schema {} is not supported (expected {CONFIG_SCHEMA})",
                        p.display(),
                        cfg.schema
                    ))
                    .into());
                }
                cfg
            }
            None => RunConfig::default(),
        };
        let Overrides {
            m,
            rel_tol,
            r_max,
            precision,
            out,
            cache_dir,
        } = overrides;
        cfg.m = m.unwrap_or(cfg.m);
        cfg.rel_tol = rel_tol.unwrap_or(cfg.rel_tol);
        cfg.r_max = r_max.or(cfg.r_max);
        cfg.precision = precision.unwrap_or(cfg.precision);
        cfg.out = out.or(cfg.out);
        cfg.cache_dir = cache_dir.or(cfg.cache_dir);
        cfg.spec()?;
        cfg.integrator().validate()?;
        Ok(cfg)
    }

    pub fn spec(&self) -> anyhow::Result<EquationSpec> {
        EquationSpec::new(self.m).map_err(|e| Usage(e.to_string()).into())
    }

    pub fn integrator(&self) -> IntegratorConfig {
        let spec = EquationSpec::new(self.m).unwrap_or(EquationSpec::BIHARMONIC);
        let base = IntegratorConfig::for_spec(spec);
        IntegratorConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            r_max: self.r_max.unwrap_or(base.r_max),
            max_steps: self.max_steps,
            u_floor: self.u_floor,
            launch_radius: self.launch_radius,
            dense_output_stride: self.dense_output_stride,
            precision: self.precision,
        }
    }

    pub fn shooting(&self) -> ShootingConfig {
        ShootingConfig {
            integrator: self.integrator(),
            cache_dir: self.cache_dir.clone(),
            ..ShootingConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn horizon_follows_order() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.integrator().r_max, 1e3);
        cfg.m = 3;
        assert_eq!(cfg.integrator().r_max, 1e2);
        cfg.r_max = Some(50.0);
        assert_eq!(cfg.integrator().r_max, 50.0);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"schema": 1, "m": 3, "rel_tol": 1e-9}"#).unwrap();
        let cfg = RunConfig::load(
            Some(&path),
            Overrides {
                rel_tol: Some(1e-11),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((cfg.m, cfg.rel_tol), (3, 1e-11));
    }

    #[test]
    fn rejects_unknown_fields_and_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"schema": 1, "tolerance": 1e-9}"#).unwrap();
        assert!(RunConfig::load(Some(&path), Overrides::default()).is_err());
        std::fs::write(&path, r#"{"schema": 2}"#).unwrap();
        assert!(RunConfig::load(Some(&path), Overrides::default()).is_err());
    }
}
