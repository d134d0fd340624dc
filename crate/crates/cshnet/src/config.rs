//! Run configuration: one TOML file describes models, optimizer, data,
//! loss options, and outputs for every command. Validation happens up
//! front so a bad file fails before any work starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversarial::{ContentMode, DiscriminatorConfig};
use crate::aepl::{ThresholdPolicy, GAUSSIAN_SIGMA};
use crate::data::DatasetSpec;
use crate::generator::{BottleneckVariant, GeneratorConfig, IgcForm};
use crate::train::{TrainConfig, TrainSetup};
use crate::{Error, Result};

/// Edge-loss options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeOptions {
    pub threshold_policy: ThresholdPolicy,
    pub gaussian_sigma: f64,
}

impl Default for EdgeOptions {
    fn default() -> Self {
        Self {
            threshold_policy: ThresholdPolicy::PerImage,
            gaussian_sigma: GAUSSIAN_SIGMA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentKind {
    Pixel,
    Feature,
}

/// Content-loss selection. Feature mode compares activations of a frozen
/// conv stack loaded from `checkpoint`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContentOptions {
    pub mode: ContentKind,
    pub checkpoint: Option<PathBuf>,
}

impl Default for ContentOptions {
    fn default() -> Self {
        Self {
            mode: ContentKind::Pixel,
            checkpoint: None,
        }
    }
}

impl ContentOptions {
    pub fn to_mode(&self) -> Result<ContentMode> {
        match (self.mode, &self.checkpoint) {
            (ContentKind::Pixel, _) => Ok(ContentMode::Pixel),
            (ContentKind::Feature, Some(p)) => Ok(ContentMode::Feature(Some(p.clone()))),
            (ContentKind::Feature, None) => Err(Error::Config(
                "content.checkpoint is required when content.mode = \"feature\"".into(),
            )),
        }
    }
}

/// Step bookkeeping around the training loop itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    /// Overrides the epoch-derived step count when set.
    pub steps: Option<u64>,
    /// Checkpoint cadence in steps; 0 writes only the final checkpoint.
    pub checkpoint_every: u64,
    /// Held-out pairs evaluated after training.
    pub eval_count: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            steps: None,
            checkpoint_every: 0,
            eval_count: 8,
        }
    }
}

/// Variant sweep for the ablation command: the cross product of the three
/// lists is trained and evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateOptions {
    pub bottlenecks: Vec<BottleneckVariant>,
    pub igc_forms: Vec<IgcForm>,
    pub aepl: Vec<bool>,
    pub steps: u64,
}

impl Default for AblateOptions {
    fn default() -> Self {
        Self {
            bottlenecks: BottleneckVariant::ALL.to_vec(),
            igc_forms: vec![IgcForm::Axb],
            aepl: vec![true],
            steps: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: Option<PathBuf>,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub train: TrainConfig,
    pub dataset: DatasetSpec,
    pub edges: EdgeOptions,
    pub content: ContentOptions,
    pub run: RunOptions,
    pub ablate: AblateOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: None,
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            train: TrainConfig::default(),
            dataset: DatasetSpec::default(),
            edges: EdgeOptions::default(),
            content: ContentOptions::default(),
            run: RunOptions::default(),
            ablate: AblateOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Component invariants plus the cross-component constraints that the
    /// pieces cannot see on their own.
    pub fn validate(&self) -> Result<()> {
        self.to_setup()?.validate()?;
        self.dataset.validate(self.generator.n_downsample)?;
        if !self.edges.gaussian_sigma.is_finite() || self.edges.gaussian_sigma <= 0.0 {
            return Err(Error::Config(format!(
                "edges.gaussian_sigma must be finite and positive, got {}",
                self.edges.gaussian_sigma
            )));
        }

        let min_edge = self.discriminator.min_input_edge();
        if self.dataset.size < min_edge {
            return Err(Error::Config(format!(
                "dataset.size {} is below the discriminator's minimum input edge {} \
                 (lower discriminator.scale_count or discriminator.conv_layers)",
                self.dataset.size, min_edge
            )));
        }

        let side = self.dataset.size >> self.generator.n_downsample;
        let windowed =
            self.generator.bottleneck.uses_attention() || self.generator.igc_form != IgcForm::None;
        if windowed && side % self.generator.window_size != 0 {
            return Err(Error::Config(format!(
                "bottleneck side {side} (dataset.size {} after {} halvings) must be a \
                 multiple of generator.window_size {}",
                self.dataset.size, self.generator.n_downsample, self.generator.window_size
            )));
        }

        if self.content.mode == ContentKind::Pixel && self.dataset.size % 4 != 0 {
            return Err(Error::Config(format!(
                "pixel content loss needs dataset.size divisible by 4, got {}",
                self.dataset.size
            )));
        }

        if self.run.eval_count == 0 {
            return Err(Error::Config("run.eval_count must be at least 1".into()));
        }
        if self.run.steps == Some(0) {
            return Err(Error::Config("run.steps must be at least 1 when set".into()));
        }

        for (name, empty) in [
            ("ablate.bottlenecks", self.ablate.bottlenecks.is_empty()),
            ("ablate.igc_forms", self.ablate.igc_forms.is_empty()),
            ("ablate.aepl", self.ablate.aepl.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("{name} must not be empty")));
            }
        }
        if self.ablate.steps == 0 {
            return Err(Error::Config("ablate.steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_setup(&self) -> Result<TrainSetup> {
        Ok(TrainSetup {
            train: self.train.clone(),
            generator: self.generator.clone(),
            discriminator: self.discriminator.clone(),
            content_mode: self.content.to_mode()?,
            threshold_policy: self.edges.threshold_policy,
            gaussian_sigma: self.edges.gaussian_sigma,
        })
    }

    /// Total training steps: the explicit cap when set, otherwise enough
    /// full passes over the dataset for the configured epoch count.
    pub fn total_steps(&self, n_pairs: usize) -> u64 {
        match self.run.steps {
            Some(s) => s,
            None => {
                let per_epoch = n_pairs.div_ceil(self.train.batch_size) as u64;
                self.train.epochs as u64 * per_epoch
            }
        }
    }

    /// Output directory: a command-line override wins over the file.
    pub fn resolve_out(&self, cli_out: Option<&Path>) -> Result<PathBuf> {
        cli_out
            .map(Path::to_path_buf)
            .or_else(|| self.out_dir.clone())
            .ok_or_else(|| {
                Error::Config("no output directory: set out_dir in the config or pass --out".into())
            })
    }
}
