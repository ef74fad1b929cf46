//! The TOML pipeline configuration and command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serpent_core::augment::AugmentConfig;
use serpent_core::diarize::DiarizeConfig;
use serpent_core::dsp::FrameConfig;
use serpent_core::nn::ModelConfig;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "SERPENT_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusRoots {
    pub ravdess_dir: Option<PathBuf>,
    pub cremad_dir: Option<PathBuf>,
    pub tess_dir: Option<PathBuf>,
    pub savee_dir: Option<PathBuf>,
    pub movieclips_manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropConfig {
    pub offset_s: f64,
    pub duration_s: f64,
    pub pad_to_duration: bool,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self { offset_s: 0.6, duration_s: 2.5, pad_to_duration: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Keep every augmented variant of a clip on the same side of the split.
    pub by_clip: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { test_fraction: 0.2, seed: 42, shuffle: true, by_clip: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    pub sample_rate_hz: u32,
    pub corpora: CorpusRoots,
    pub crop: CropConfig,
    pub frame: FrameConfig,
    pub augment: AugmentConfig,
    pub model: ModelConfig,
    pub split: SplitConfig,
    pub diarize: DiarizeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("serpent-out"),
            sample_rate_hz: 22050,
            corpora: CorpusRoots::default(),
            crop: CropConfig::default(),
            frame: FrameConfig::default(),
            augment: AugmentConfig::default(),
            model: ModelConfig::default(),
            split: SplitConfig::default(),
            diarize: DiarizeConfig::default(),
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing pipeline config")?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.out_dir);
        let roots = &mut cfg.corpora;
        for p in [
            &mut roots.ravdess_dir,
            &mut roots.cremad_dir,
            &mut roots.tess_dir,
            &mut roots.savee_dir,
            &mut roots.movieclips_manifest,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, p);
        }
        Ok(cfg)
    }

    /// Loads `path`, else the file named by `SERPENT_CONFIG`, else the
    /// defaults; then applies the overrides and validates.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let mut cfg = match path.map(Path::to_path_buf).or(env_path) {
            Some(p) => Self::load(&p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.augment.rng_seed = seed;
            self.model.rng_seed = seed;
            self.split.seed = seed;
        }
        if let Some(epochs) = o.epochs {
            self.model.epochs = epochs;
        }
        if let Some(b) = o.batch_size {
            self.model.batch_size = b;
        }
        if let Some(dir) = &o.out_dir {
            self.out_dir = dir.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            bail!("sample_rate_hz must be positive");
        }
        if !(self.crop.offset_s >= 0.0 && self.crop.duration_s > 0.0) {
            bail!("crop needs offset_s >= 0 and duration_s > 0");
        }
        if !(0.0..1.0).contains(&self.split.test_fraction) {
            bail!("split.test_fraction must lie in [0, 1)");
        }
        self.frame.validate()?;
        self.augment.validate()?;
        self.model.validate()?;
        self.diarize.validate()?;
        Ok(())
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.out_dir.join("manifest.csv")
    }

    pub fn features_path(&self) -> PathBuf {
        self.out_dir.join("features.csv")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.out_dir.join("model.json")
    }
}
