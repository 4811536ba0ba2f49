//! Experiment configuration: defaults, presets, a line-based `key = value`
//! config file, and command-line overrides applied on top.

use std::path::{Path, PathBuf};

use fedsmooth::attack::{AttackConfig, Estimator};
use fedsmooth::error::{Error, Result};
use fedsmooth::federation::{Ablation, FederationConfig, TrainingMode};
use fedsmooth::smoothing::SmoothingConfig;

/// Scale preset: `desk` finishes end-to-end in minutes on a laptop; `paper`
/// restores the full-scale federation defaults (1000 devices, 500 samples
/// each, 150 rounds).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::Config(format!(
                "unknown preset {other:?}; expected desk or paper"
            ))),
        }
    }
}

/// Which dataset feeds training and certification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    /// Synthetic Gaussian blobs (no files needed).
    Synth,
    /// IDX image/label files given by the `mnist_*` keys.
    Mnist,
}

impl std::str::FromStr for DataSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synth" => Ok(DataSource::Synth),
            "mnist" => Ok(DataSource::Mnist),
            other => Err(Error::Config(format!(
                "unknown dataset {other:?}; expected synth or mnist"
            ))),
        }
    }
}

/// Full experiment configuration. Every field has a documented default;
/// `parse` layers preset, config file, and flag overrides on top.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub mode: TrainingMode,
    pub ablation: Ablation,
    /// Smoothing noise standard deviation, input units.
    pub sigma: f64,
    /// Attack budget as a pixel-scale integer; the effective ℓ₂ budget is
    /// `epsilon / 256` on `[0,1]` features.
    pub epsilon: f64,
    pub estimator: Estimator,
    pub gamma: f64,
    pub seed: u64,

    pub attack_steps: usize,
    pub inner_lr: f64,
    /// Noise samples per example for attacks and augmentation.
    pub m: usize,

    pub n0: usize,
    pub n: usize,
    pub alpha: f64,

    pub devices: usize,
    pub participation: f64,
    pub samples_per_device: usize,
    pub batch_size: usize,
    pub local_batches: usize,
    pub rounds: usize,
    pub outer_lr: f64,

    pub hidden_layers: Vec<usize>,

    pub dataset: DataSource,
    pub synth_classes: usize,
    pub synth_train_per_class: usize,
    pub synth_test_per_class: usize,
    pub synth_dim: usize,
    pub synth_spread: f64,
    pub mnist_images: Option<PathBuf>,
    pub mnist_labels: Option<PathBuf>,
    pub mnist_test_images: Option<PathBuf>,
    pub mnist_test_labels: Option<PathBuf>,
    /// Cap on training examples taken from an IDX dataset.
    pub train_limit: usize,

    pub test_points: usize,
    pub radius_max: f64,
    pub radius_step: f64,
    pub bench_attacks: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut cfg = ExperimentConfig {
            preset: Preset::Desk,
            mode: TrainingMode::Federated,
            ablation: Ablation::AdvSmooth,
            sigma: 0.25,
            epsilon: 128.0,
            estimator: Estimator::Stochastic,
            gamma: 0.1,
            seed: 0,
            attack_steps: 2,
            inner_lr: 0.01,
            m: 2,
            n0: 100,
            n: 1000,
            alpha: 0.001,
            devices: 0,
            participation: 0.1,
            samples_per_device: 0,
            batch_size: 30,
            local_batches: 20,
            rounds: 0,
            outer_lr: 0.01,
            hidden_layers: vec![256, 128],
            dataset: DataSource::Synth,
            synth_classes: 3,
            synth_train_per_class: 667,
            synth_test_per_class: 100,
            synth_dim: 32,
            synth_spread: 0.25,
            mnist_images: None,
            mnist_labels: None,
            mnist_test_images: None,
            mnist_test_labels: None,
            train_limit: 2000,
            test_points: 200,
            radius_max: 1.5,
            radius_step: 0.05,
            bench_attacks: 500,
            out_dir: PathBuf::from("out"),
        };
        cfg.apply_preset(Preset::Desk);
        cfg
    }
}

impl ExperimentConfig {
    fn apply_preset(&mut self, preset: Preset) {
        self.preset = preset;
        match preset {
            Preset::Desk => {
                self.devices = 20;
                self.samples_per_device = 100;
                self.rounds = 30;
            }
            Preset::Paper => {
                self.devices = 1000;
                self.samples_per_device = 500;
                self.rounds = 150;
            }
        }
    }

    /// Effective ℓ₂ attack budget on `[0,1]` features.
    pub fn epsilon_budget(&self) -> f64 {
        self.epsilon / 256.0
    }

    /// Strictly increasing certification radius grid starting at 0.
    pub fn radius_grid(&self) -> Vec<f64> {
        let mut grid = Vec::new();
        let mut r = 0.0;
        while r <= self.radius_max + 1e-12 {
            grid.push(r);
            r += self.radius_step;
        }
        grid
    }

    pub fn federation(&self) -> FederationConfig {
        FederationConfig {
            num_devices: self.devices,
            participation: self.participation,
            samples_per_device: self.samples_per_device,
            gamma_device: self.gamma,
            local_batches: self.local_batches,
            batch_size: self.batch_size,
            rounds: self.rounds,
            outer_lr: self.outer_lr,
            seed: self.seed,
        }
    }

    pub fn attack(&self) -> AttackConfig {
        AttackConfig {
            epsilon: self.epsilon_budget(),
            steps: self.attack_steps,
            inner_lr: self.inner_lr,
            estimator: self.estimator,
            m: self.m,
        }
    }

    pub fn smoothing(&self) -> SmoothingConfig {
        SmoothingConfig {
            sigma: self.sigma,
            m: self.m,
            n0: self.n0,
            n: self.n,
            alpha: self.alpha,
        }
    }

    /// Loads the configuration: defaults, then the preset (a `preset`
    /// override wins over one in the file), then file keys, then overrides.
    /// Overrides are `(key, value)` pairs in config-file syntax.
    pub fn parse(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let file_pairs = match path {
            Some(p) => read_config_file(p)?,
            None => Vec::new(),
        };

        let mut unknown: Vec<String> = Vec::new();
        for (key, _) in file_pairs.iter().chain(overrides.iter()) {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                unknown.push(key.clone());
            }
        }
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "unknown configuration keys: {}",
                unknown.join(", ")
            )));
        }

        let mut cfg = ExperimentConfig::default();
        let preset_value = overrides
            .iter()
            .rev()
            .find(|(k, _)| k == "preset")
            .or_else(|| file_pairs.iter().rev().find(|(k, _)| k == "preset"));
        if let Some((_, v)) = preset_value {
            cfg.apply_preset(v.parse()?);
        }
        for (key, value) in file_pairs.iter().chain(overrides.iter()) {
            if key != "preset" {
                cfg.set(key, value)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str, ty: &str) -> Result<T> {
            value.parse().map_err(|_| {
                Error::Config(format!("key {key}: expected {ty}, got {value:?}"))
            })
        }
        match key {
            "mode" => self.mode = value.parse()?,
            "ablation" => self.ablation = value.parse()?,
            "sigma" => self.sigma = num(key, value, "a real number")?,
            "epsilon" => self.epsilon = num(key, value, "a real number")?,
            "estimator" => self.estimator = value.parse()?,
            "gamma" => self.gamma = num(key, value, "a real number")?,
            "seed" => self.seed = num(key, value, "an integer")?,
            "attack_steps" => self.attack_steps = num(key, value, "an integer")?,
            "inner_lr" => self.inner_lr = num(key, value, "a real number")?,
            "m" => self.m = num(key, value, "an integer")?,
            "n0" => self.n0 = num(key, value, "an integer")?,
            "n" => self.n = num(key, value, "an integer")?,
            "alpha" => self.alpha = num(key, value, "a real number")?,
            "devices" => self.devices = num(key, value, "an integer")?,
            "participation" => self.participation = num(key, value, "a real number")?,
            "samples_per_device" => self.samples_per_device = num(key, value, "an integer")?,
            "batch_size" => self.batch_size = num(key, value, "an integer")?,
            "local_batches" => self.local_batches = num(key, value, "an integer")?,
            "rounds" => self.rounds = num(key, value, "an integer")?,
            "outer_lr" => self.outer_lr = num(key, value, "a real number")?,
            "hidden_layers" => {
                self.hidden_layers = value
                    .split(',')
                    .map(|s| num(key, s.trim(), "a comma-separated integer list"))
                    .collect::<Result<_>>()?;
            }
            "dataset" => self.dataset = value.parse()?,
            "synth_classes" => self.synth_classes = num(key, value, "an integer")?,
            "synth_train_per_class" => {
                self.synth_train_per_class = num(key, value, "an integer")?
            }
            "synth_test_per_class" => self.synth_test_per_class = num(key, value, "an integer")?,
            "synth_dim" => self.synth_dim = num(key, value, "an integer")?,
            "synth_spread" => self.synth_spread = num(key, value, "a real number")?,
            "mnist_images" => self.mnist_images = Some(PathBuf::from(value)),
            "mnist_labels" => self.mnist_labels = Some(PathBuf::from(value)),
            "mnist_test_images" => self.mnist_test_images = Some(PathBuf::from(value)),
            "mnist_test_labels" => self.mnist_test_labels = Some(PathBuf::from(value)),
            "train_limit" => self.train_limit = num(key, value, "an integer")?,
            "test_points" => self.test_points = num(key, value, "an integer")?,
            "radius_max" => self.radius_max = num(key, value, "a real number")?,
            "radius_step" => self.radius_step = num(key, value, "a real number")?,
            "bench_attacks" => self.bench_attacks = num(key, value, "an integer")?,
            "out" => self.out_dir = PathBuf::from(value),
            other => {
                return Err(Error::Config(format!("unknown configuration key {other}")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.radius_step > 0.0) {
            return Err(Error::Config(format!(
                "radius_step must be positive, got {}",
                self.radius_step
            )));
        }
        if self.radius_max < 0.0 {
            return Err(Error::Config(format!(
                "radius_max must be nonnegative, got {}",
                self.radius_max
            )));
        }
        if self.test_points == 0 {
            return Err(Error::Config("test_points must be positive".into()));
        }
        self.smoothing().validate()?;
        self.attack().validate()?;
        self.federation().validate()?;
        if self.dataset == DataSource::Mnist
            && (self.mnist_images.is_none() || self.mnist_labels.is_none())
        {
            return Err(Error::Config(
                "dataset = mnist requires mnist_images and mnist_labels".into(),
            ));
        }
        Ok(())
    }
}

const KNOWN_KEYS: &[&str] = &[
    "preset",
    "mode",
    "ablation",
    "sigma",
    "epsilon",
    "estimator",
    "gamma",
    "seed",
    "attack_steps",
    "inner_lr",
    "m",
    "n0",
    "n",
    "alpha",
    "devices",
    "participation",
    "samples_per_device",
    "batch_size",
    "local_batches",
    "rounds",
    "outer_lr",
    "hidden_layers",
    "dataset",
    "synth_classes",
    "synth_train_per_class",
    "synth_test_per_class",
    "synth_dim",
    "synth_spread",
    "mnist_images",
    "mnist_labels",
    "mnist_test_images",
    "mnist_test_labels",
    "train_limit",
    "test_points",
    "radius_max",
    "radius_step",
    "bench_attacks",
    "out",
];

/// Reads `key = value` lines; blank lines and `#` comments are skipped.
fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{}:{}: expected `key = value`, got {raw:?}",
                path.display(),
                lineno + 1
            )));
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(contents: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn empty_file_gives_defaults() {
        let (_dir, path) = write_config("");
        let cfg = ExperimentConfig::parse(Some(&path), &[]).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.devices, 20);
        assert_eq!(cfg.rounds, 30);
    }

    #[test]
    fn paper_preset_restores_full_scale() {
        let (_dir, path) = write_config("preset = paper\n");
        let cfg = ExperimentConfig::parse(Some(&path), &[]).unwrap();
        assert_eq!(cfg.devices, 1000);
        assert_eq!(cfg.samples_per_device, 500);
        assert_eq!(cfg.rounds, 150);
        assert_eq!(cfg.participation, 0.1);
        assert_eq!(cfg.batch_size, 30);
        assert_eq!(cfg.local_batches, 20);
        assert_eq!(cfg.outer_lr, 0.01);
        assert_eq!(cfg.inner_lr, 0.01);
        assert_eq!(cfg.m, 2);
        assert_eq!(cfg.attack_steps, 2);
        assert_eq!(cfg.alpha, 0.001);
    }

    #[test]
    fn flags_override_file() {
        let (_dir, path) = write_config("sigma = 0.12\nseed = 5\n");
        let cfg = ExperimentConfig::parse(
            Some(&path),
            &[("sigma".into(), "0.5".into())],
        )
        .unwrap();
        assert_eq!(cfg.sigma, 0.5);
        assert_eq!(cfg.seed, 5);
    }

    #[test]
    fn unknown_keys_are_listed() {
        let (_dir, path) = write_config("sgima = 0.1\nbogus = 2\n");
        let err = ExperimentConfig::parse(Some(&path), &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sgima") && msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn validation_names_offending_key() {
        let (_dir, path) = write_config("sigma = -1\n");
        let err = ExperimentConfig::parse(Some(&path), &[]).unwrap_err();
        assert!(err.to_string().contains("sigma"), "{err}");
    }

    #[test]
    fn type_errors_name_key_and_type() {
        let (_dir, path) = write_config("rounds = soon\n");
        let err = ExperimentConfig::parse(Some(&path), &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rounds") && msg.contains("integer"), "{msg}");
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let (_dir, path) = write_config("# a comment\n\nsigma = 0.5\n");
        let cfg = ExperimentConfig::parse(Some(&path), &[]).unwrap();
        assert_eq!(cfg.sigma, 0.5);
    }

    #[test]
    fn malformed_line_is_rejected() {
        let (_dir, path) = write_config("sigma 0.5\n");
        let err = ExperimentConfig::parse(Some(&path), &[]).unwrap_err();
        assert!(err.to_string().contains("key = value"), "{err}");
    }

    #[test]
    fn epsilon_maps_to_budget() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.epsilon, 128.0);
        assert_eq!(cfg.epsilon_budget(), 0.5);
    }

    #[test]
    fn radius_grid_is_strictly_increasing_from_zero() {
        let cfg = ExperimentConfig::default();
        let grid = cfg.radius_grid();
        assert_eq!(grid[0], 0.0);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
        assert!((grid.last().unwrap() - 1.5).abs() < 1e-9);
        assert_eq!(grid.len(), 31);
    }

    #[test]
    fn mnist_requires_paths() {
        let (_dir, path) = write_config("dataset = mnist\n");
        assert!(ExperimentConfig::parse(Some(&path), &[]).is_err());
    }
}
