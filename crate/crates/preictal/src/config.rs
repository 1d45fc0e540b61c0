//! Experiment configuration file (TOML). Every field has a documented
//! default except the manifest path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use preictal_core::models::ArchTag;
use preictal_core::segmentation::LabelParams;
use preictal_core::train::{Cell, InputOptions, Mode, PipelineConfig, TrainConfig};

use crate::error::{self, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl Default for OneOrMany {
    fn default() -> Self {
        OneOrMany::One("cnn".into())
    }
}

/// Labeling parameters. `window_size_s` and `ppl_s` are the fixed cell used
/// when the grid search is off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelSection {
    pub window_size_s: f64,
    pub ppl_s: f64,
    pub it_s: f64,
    pub d_s: f64,
    pub postictal_s: f64,
    pub interictal_downsample: usize,
}

impl Default for LabelSection {
    fn default() -> Self {
        let d = LabelParams::default();
        Self {
            window_size_s: d.window_size_s,
            ppl_s: d.ppl_s,
            it_s: d.it_s,
            d_s: d.d_s,
            postictal_s: d.postictal_s,
            interictal_downsample: d.interictal_downsample,
        }
    }
}

/// Overrides of the per-mode training defaults (supervised: 100 epochs,
/// batch 128, lr 1e-4; unsupervised: 500 epochs, batch 128, lr 5e-4).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub max_batches_per_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub image_size: usize,
    pub sub_window_s: f64,
    pub sub_image_size: usize,
    pub downsample: usize,
}

impl Default for InputSection {
    fn default() -> Self {
        let d = InputOptions::default();
        Self { image_size: d.image_size, sub_window_s: d.sub_window_s, sub_image_size: d.sub_image_size, downsample: d.downsample }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset manifest; relative to the config file.
    pub manifest: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; relative to the config file. `--out` overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// One tag or a list: cnn, cnn_lstm, tcn, cnn_ae, cnn_lstm_ae, tcn_ae.
    #[serde(default, alias = "architectures")]
    pub architecture: OneOrMany,
    /// When set, every architecture must be of this mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Window-size × PPL grid search; off trains the fixed cell only.
    #[serde(default)]
    pub grid: bool,
    #[serde(default)]
    pub labels: LabelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub input: InputSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = String::from_utf8(error::read(path)?)
            .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn architectures(&self) -> Result<Vec<ArchTag>> {
        let names = match &self.architecture {
            OneOrMany::One(s) => vec![s.clone()],
            OneOrMany::Many(v) => v.clone(),
        };
        if names.is_empty() {
            return Err(Error::Config("no architecture given".into()));
        }
        let mut tags = Vec::new();
        for n in names {
            let t: ArchTag = n.parse().map_err(|e: preictal_core::Error| Error::Config(e.to_string()))?;
            if tags.contains(&t) {
                return Err(Error::Config(format!("architecture {t} listed twice")));
            }
            tags.push(t);
        }
        Ok(tags)
    }

    pub fn fixed_cell(&self) -> Cell {
        Cell { window_s: self.labels.window_size_s, ppl_s: self.labels.ppl_s }
    }

    pub fn pipeline(&self, tag: ArchTag) -> PipelineConfig {
        let mut p = PipelineConfig::new(tag);
        let d = TrainConfig::for_mode(Mode::of(tag));
        let t = &self.train;
        p.train = TrainConfig {
            epochs: t.epochs.unwrap_or(d.epochs),
            batch_size: t.batch_size.unwrap_or(d.batch_size),
            learning_rate: t.learning_rate.unwrap_or(d.learning_rate),
            max_batches_per_epoch: t.max_batches_per_epoch,
        };
        let l = &self.labels;
        p.labels = LabelParams {
            window_size_s: l.window_size_s,
            ppl_s: l.ppl_s,
            it_s: l.it_s,
            d_s: l.d_s,
            postictal_s: l.postictal_s,
            interictal_downsample: l.interictal_downsample,
            ..LabelParams::default()
        };
        let i = &self.input;
        p.input = InputOptions {
            image_size: i.image_size,
            sub_window_s: i.sub_window_s,
            sub_image_size: i.sub_image_size,
            downsample: i.downsample,
        };
        p
    }

    pub fn validate(&self) -> Result<()> {
        let tags = self.architectures()?;
        if let Some(m) = &self.mode {
            let mode: Mode = m.parse().map_err(|e: preictal_core::Error| Error::Config(e.to_string()))?;
            if let Some(t) = tags.iter().find(|t| Mode::of(**t) != mode) {
                return Err(Error::Config(format!("{t} is not a {mode} architecture")));
            }
        }
        let cfg_err = |e: preictal_core::Error| Error::Config(e.to_string());
        for &t in &tags {
            let p = self.pipeline(t);
            p.train.validate().map_err(cfg_err)?;
            p.labels.validate().map_err(cfg_err)?;
        }
        let i = &self.input;
        if i.image_size == 0 || i.image_size % 8 != 0 {
            return Err(Error::Config(format!("input.image_size {} must be a positive multiple of 8", i.image_size)));
        }
        if i.sub_image_size == 0 || i.sub_image_size % 4 != 0 {
            return Err(Error::Config(format!("input.sub_image_size {} must be a positive multiple of 4", i.sub_image_size)));
        }
        if !(i.sub_window_s > 0.0) || i.downsample == 0 {
            return Err(Error::Config("input.sub_window_s and input.downsample must be positive".into()));
        }
        Ok(())
    }
}
