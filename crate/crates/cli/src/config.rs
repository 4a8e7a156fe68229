//! JSON run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use reach_core::dataset::{Episode, GenConfig};
use reach_core::seed::derive_seed;
use reach_core::streaming::CampaignConfig;
use reach_core::training::{AblationCell, GammaSetup, PhiSetup};
use serde::{Deserialize, Serialize};

/// Environment variable that replaces `seed`.
pub const SEED_ENV: &str = "REACH_SEED";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub gamma: Option<PathBuf>,
    pub phi: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. Data, initialisation and shuffling seeds derive from it.
    pub seed: u64,
    pub data: GenConfig,
    /// Feature mask name.
    pub mask: String,
    /// Share of the training episodes held out for validation.
    pub validation_fraction: f64,
    pub gamma: GammaSetup,
    pub phi: PhiSetup,
    pub h_sweep: Vec<usize>,
    /// Ablation cells; the full default table when absent.
    pub ablation: Option<Vec<AblationCell>>,
    pub rendezvous: CampaignConfig,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data: GenConfig::default(),
            mask: "all".into(),
            validation_fraction: 0.1,
            gamma: GammaSetup::default(),
            phi: PhiSetup::default(),
            h_sweep: vec![5, 10, 20, 30, 40, 50, 60],
            ablation: None,
            rendezvous: CampaignConfig::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Applies `REACH_SEED` and derives every component seed from the
    /// master seed. Idempotent, so a written snapshot resolves to itself.
    pub fn resolve(mut self, env_seed: Option<&str>) -> Result<Self> {
        if let Some(s) = env_seed {
            self.seed = s
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}={s:?} is not an unsigned integer"))?;
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            bail!("validation_fraction must lie in [0, 1)");
        }
        let s = self.seed;
        self.data.seed = derive_seed(s, 1);
        self.gamma.model.seed = derive_seed(s, 2);
        self.gamma.train.seed = derive_seed(s, 3);
        self.phi.model.seed = derive_seed(s, 4);
        self.phi.train.seed = derive_seed(s, 5);
        Ok(self)
    }

    /// Writes the snapshot `<dir>/<command>.config.json`.
    pub fn write_snapshot(&self, dir: &Path, command: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{command}.config.json"));
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Splits training episodes into `(fit, validation)`; the validation
    /// part is the trailing `validation_fraction` of the list.
    pub fn validation_split<'a>(&self, train: &'a [Episode]) -> (&'a [Episode], &'a [Episode]) {
        let n_val = (train.len() as f64 * self.validation_fraction).ceil() as usize;
        let n_val = n_val.min(train.len().saturating_sub(1));
        train.split_at(train.len() - n_val)
    }
}
