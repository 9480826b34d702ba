use std::path::Path;

use serde::{Deserialize, Serialize};
use vanity_core::dataset::{BuildConfig, FilterThresholds};
use vanity_core::recommender::TrainConfig;
use vanity_core::synthesis::SynthesisConfig;
use vanity_service::ServiceConfig;

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// Every tunable, loadable from a TOML file. Flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub version: u32,
    #[serde(default)]
    pub filter: FilterThresholds,
    #[serde(default)]
    pub build: BuildConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub service: ServiceConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            filter: FilterThresholds::default(),
            build: BuildConfig::default(),
            train: TrainConfig::default(),
            synthesis: SynthesisConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

impl CliConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let cfg: CliConfig =
            toml::from_str(text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Validation(format!(
                "{}: unsupported config version {}, supported {CONFIG_VERSION}",
                path.display(),
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => Self::parse(&vanity_core::io::read_text(p)?, p),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.build.matting.validate()?;
        self.synthesis.validate()?;
        self.service.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = CliConfig::default();
        let back = CliConfig::parse(&cfg.to_toml(), Path::new("x.toml")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in
            ["version = 1\nbogus = 2\n", "version = 1\n[train]\ncc = 3.0\n", "version = 1\n[build.matting]\nk = 3\n"]
        {
            let err = CliConfig::parse(text, Path::new("c.toml")).unwrap_err();
            assert!(matches!(err, CliError::Validation(_)), "{text}");
        }
    }

    #[test]
    fn version_is_required_and_checked() {
        assert!(CliConfig::parse("[train]\nc = 1.0\n", Path::new("c.toml")).is_err());
        let err = CliConfig::parse("version = 2\n", Path::new("c.toml")).unwrap_err();
        assert!(err.to_string().contains("version 2"), "{err}");
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg = CliConfig::parse("version = 1\n[train]\nc = 3.0\n", Path::new("c.toml")).unwrap();
        assert_eq!(cfg.train.c, 3.0);
        assert_eq!(cfg.train.outer_iters, TrainConfig::default().outer_iters);
        assert_eq!(cfg.build, BuildConfig::default());
    }
}
