//! Simulated synchronous federated adversarial training.
//!
//! Each learning round samples a client subset, runs local adversarial
//! training on every sampled device in parallel over an immutable copy of
//! the global parameters, and aggregates the local results weighted by
//! device data counts. A centralized mode runs the equivalent batch budget
//! on pooled data through the same local-training routine, so the two modes
//! coincide exactly in the degenerate single-device configuration.
//!
//! Device data is assigned by a heterogeneous partition: each device draws
//! one major class and fills a γ fraction of its samples from it, the rest
//! uniformly from the other classes.

use std::time::Instant;

use rand::Rng;

use crate::attack::{smoothadv_attack, AttackConfig, Estimator, NoisePack};
use crate::data::{Dataset, ExampleSource};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{self, Batch, NetworkSpec, ParamVector};
use crate::parallel::par_map;
use crate::rng::{tag, StreamFactory};
use crate::smoothing::SmoothingConfig;

/// Federated loop parameters. Defaults follow the full-scale experimental
/// setup; [`FederationConfig::desk_preset`] shrinks them so an end-to-end
/// run finishes in minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    pub num_devices: usize,
    /// Fraction of devices sampled per round, in (0, 1].
    pub participation: f64,
    pub samples_per_device: usize,
    /// Fraction of each device's data drawn from its major class.
    pub gamma_device: f64,
    /// Minibatches per local training call.
    pub local_batches: usize,
    pub batch_size: usize,
    pub rounds: usize,
    pub outer_lr: f64,
    pub seed: u64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            num_devices: 1000,
            participation: 0.1,
            samples_per_device: 500,
            gamma_device: 0.1,
            local_batches: 20,
            batch_size: 30,
            rounds: 150,
            outer_lr: 0.01,
            seed: 0,
        }
    }
}

impl FederationConfig {
    /// Desk-scale preset: 20 devices of 100 samples for 30 rounds.
    pub fn desk_preset() -> Self {
        FederationConfig {
            num_devices: 20,
            samples_per_device: 100,
            rounds: 30,
            ..FederationConfig::default()
        }
    }

    /// Number of clients sampled each round.
    pub fn sampled_clients(&self) -> usize {
        (self.num_devices as f64 * self.participation).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_devices == 0 {
            return Err(Error::Config("need at least one device".into()));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::Domain {
                what: "participation",
                value: self.participation,
                range: "(0, 1]",
            });
        }
        if self.samples_per_device == 0 {
            return Err(Error::Config("samples_per_device must be positive".into()));
        }
        if !(self.gamma_device > 0.0 && self.gamma_device < 1.0) {
            return Err(Error::Domain {
                what: "gamma_device",
                value: self.gamma_device,
                range: "(0, 1)",
            });
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.outer_lr > 0.0) {
            return Err(Error::Domain {
                what: "outer_lr",
                value: self.outer_lr,
                range: "(0, inf)",
            });
        }
        Ok(())
    }
}

/// One device's slice of the dataset.
#[derive(Debug, Clone)]
pub struct Partition {
    pub device_id: usize,
    pub major_class: usize,
    pub indices: Vec<usize>,
}

impl Partition {
    /// Degenerate partition holding the whole dataset; used by the
    /// centralized mode and by the single-device equivalence configuration.
    pub fn pooled(device_id: usize, dataset_len: usize) -> Self {
        Partition {
            device_id,
            major_class: 0,
            indices: (0..dataset_len).collect(),
        }
    }
}

/// Assigns each device ⌊γ·n_k⌋ samples of a uniformly drawn major class and
/// fills the rest uniformly from the pooled non-major examples. Draws are
/// without replacement within a device, with replacement across devices.
pub fn partition_heterogeneous<R: Rng>(
    labels: &[usize],
    num_classes: usize,
    cfg: &FederationConfig,
    rng: &mut R,
) -> Result<Vec<Partition>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let n_k = cfg.samples_per_device;
    let major_count = (cfg.gamma_device * n_k as f64).floor() as usize;
    let other_count = n_k - major_count;

    let mut partitions = Vec::with_capacity(cfg.num_devices);
    for device_id in 0..cfg.num_devices {
        let major_class = rng.gen_range(0..num_classes);
        let pool = &by_class[major_class];
        if pool.is_empty() {
            return Err(Error::EmptyClass { class: major_class });
        }
        if pool.len() < major_count {
            return Err(Error::Config(format!(
                "class {major_class} has {} examples, device {device_id} needs {major_count} major-class samples",
                pool.len()
            )));
        }
        let mut indices: Vec<usize> = rand::seq::index::sample(rng, pool.len(), major_count)
            .iter()
            .map(|i| pool[i])
            .collect();

        let others: Vec<usize> = (0..labels.len())
            .filter(|&i| labels[i] != major_class)
            .collect();
        if others.len() < other_count {
            return Err(Error::Config(format!(
                "only {} non-major examples available, device {device_id} needs {other_count}",
                others.len()
            )));
        }
        indices.extend(
            rand::seq::index::sample(rng, others.len(), other_count)
                .iter()
                .map(|i| others[i]),
        );
        partitions.push(Partition {
            device_id,
            major_class,
            indices,
        });
    }
    Ok(partitions)
}

/// Uniform sample of ⌈K·participation⌉ distinct device ids.
pub fn sample_clients<R: Rng>(
    num_devices: usize,
    participation: f64,
    rng: &mut R,
) -> Vec<usize> {
    let count = ((num_devices as f64 * participation).ceil() as usize).clamp(1, num_devices);
    let mut ids: Vec<usize> = rand::seq::index::sample(rng, num_devices, count).into_vec();
    ids.sort_unstable();
    ids
}

/// Which parts of the adversarial pipeline local training runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    /// Plain training on clean minibatches.
    Standard,
    /// PGD against the base classifier (single zero-noise sample), training
    /// on the adversarial points without Gaussian augmentation.
    AdvOnly,
    /// The full smoothed-classifier attack plus noise-augmented training.
    AdvSmooth,
}

impl Ablation {
    pub fn name(&self) -> &'static str {
        match self {
            Ablation::Standard => "standard",
            Ablation::AdvOnly => "adv_only",
            Ablation::AdvSmooth => "adv_smooth",
        }
    }

    /// Estimator label for round logs; standard training uses none.
    pub fn estimator_name(&self, estimator: Estimator) -> &'static str {
        match self {
            Ablation::Standard => "none",
            _ => estimator.name(),
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Ablation::Standard),
            "adv_only" => Ok(Ablation::AdvOnly),
            "adv_smooth" => Ok(Ablation::AdvSmooth),
            other => Err(Error::Config(format!(
                "unknown ablation {other:?}; expected standard, adv_only or adv_smooth"
            ))),
        }
    }
}

/// Result of one local training call.
#[derive(Debug, Clone)]
pub struct LocalTrainOutput {
    pub params: ParamVector,
    pub mean_loss: f64,
}

/// Runs `local_batches` minibatches of adversarial training on one device's
/// partition and returns the updated parameters without touching the input.
///
/// Per minibatch: every example draws a fresh noise pack, is attacked with
/// it, and contributes its noise-shifted adversarial copies to the training
/// list; one SGD step on the mean cross-entropy over that list follows.
#[allow(clippy::too_many_arguments)]
pub fn local_train<S: ExampleSource + ?Sized, R: Rng>(
    theta: &ParamVector,
    partition: &Partition,
    dataset: &S,
    acfg: &AttackConfig,
    scfg: &SmoothingConfig,
    fcfg: &FederationConfig,
    ablation: Ablation,
    rng: &mut R,
) -> Result<LocalTrainOutput> {
    let dim = dataset.feature_dim();
    if partition.indices.len() < fcfg.batch_size {
        return Err(Error::Config(format!(
            "device {} holds {} samples, batch size {} requested",
            partition.device_id,
            partition.indices.len(),
            fcfg.batch_size
        )));
    }
    let mut params = theta.clone();
    let mut loss_sum = 0.0;
    for _ in 0..fcfg.local_batches {
        let picks = rand::seq::index::sample(rng, partition.indices.len(), fcfg.batch_size);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut labels: Vec<usize> = Vec::new();
        for pick in picks.iter() {
            let (x, y) = dataset.example(partition.indices[pick]);
            match ablation {
                Ablation::Standard => {
                    rows.push(x.to_vec());
                    labels.push(y);
                }
                Ablation::AdvOnly => {
                    let noise = NoisePack::zero(dim);
                    let base_cfg = AttackConfig {
                        estimator: Estimator::Stochastic,
                        m: 1,
                        ..*acfg
                    };
                    let xhat = smoothadv_attack(&params, x, y, &base_cfg, scfg.sigma, &noise)?;
                    rows.push(xhat);
                    labels.push(y);
                }
                Ablation::AdvSmooth => {
                    let noise = NoisePack::draw(acfg.m, dim, scfg.sigma, rng);
                    let xhat = smoothadv_attack(&params, x, y, acfg, scfg.sigma, &noise)?;
                    for delta in noise.deltas() {
                        rows.push(xhat.iter().zip(delta).map(|(a, d)| a + d).collect());
                        labels.push(y);
                    }
                }
            }
        }
        let batch = Batch::new(Matrix::from_rows(&rows)?, labels)?;
        let (loss, grad) = nn::loss_and_param_grad(&params, &batch)?;
        params = nn::sgd_step(&params, &grad, fcfg.outer_lr);
        loss_sum += loss;
    }
    let mean_loss = if fcfg.local_batches == 0 {
        0.0
    } else {
        loss_sum / fcfg.local_batches as f64
    };
    Ok(LocalTrainOutput { params, mean_loss })
}

/// Weighted federated average: Σ (n_k/n)·θ_k with n = Σ n_k over the given
/// updates.
pub fn aggregate(updates: &[(ParamVector, usize)]) -> Result<ParamVector> {
    let (first, _) = updates
        .first()
        .ok_or_else(|| Error::InvalidArgument("aggregate of zero updates".into()))?;
    let total: f64 = updates.iter().map(|(_, n)| *n as f64).sum();
    if total == 0.0 {
        return Err(Error::InvalidArgument(
            "aggregate weights sum to zero".into(),
        ));
    }
    let mut values = vec![0.0; first.len()];
    for (params, n_k) in updates {
        if params.spec() != first.spec() {
            return Err(Error::InvalidArgument(
                "aggregate over mismatched parameter shapes".into(),
            ));
        }
        let w = *n_k as f64 / total;
        for (acc, v) in values.iter_mut().zip(params.values()) {
            *acc += w * v;
        }
    }
    ParamVector::new(first.spec().clone(), values)
}

/// Orchestration mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingMode {
    Federated,
    Centralized,
}

impl TrainingMode {
    pub fn name(&self) -> &'static str {
        match self {
            TrainingMode::Federated => "fed",
            TrainingMode::Centralized => "central",
        }
    }
}

impl std::str::FromStr for TrainingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fed" => Ok(TrainingMode::Federated),
            "central" => Ok(TrainingMode::Centralized),
            other => Err(Error::Config(format!(
                "unknown mode {other:?}; expected fed or central"
            ))),
        }
    }
}

/// How device data is assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionScheme {
    /// Major-class partition driven by `gamma_device`.
    Heterogeneous,
    /// Every device sees the whole dataset. Degenerate scheme for the
    /// single-device federated/centralized equivalence configuration.
    Pooled,
}

/// Run-level options beyond the federation config.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: TrainingMode,
    pub ablation: Ablation,
    pub partition: PartitionScheme,
    /// Centralized-mode batch size.
    pub central_batch_size: usize,
    /// Centralized-mode batches per round; defaults to the budget matching
    /// one federated round, ⌈sampled·E_b·b / central_batch_size⌉.
    pub central_batches: Option<usize>,
    /// Record the global parameters after every round.
    pub record_params: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: TrainingMode::Federated,
            ablation: Ablation::AdvSmooth,
            partition: PartitionScheme::Heterogeneous,
            central_batch_size: 60,
            central_batches: None,
            record_params: false,
        }
    }
}

/// One round-log entry.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub mode: &'static str,
    pub estimator: &'static str,
    pub mean_loss: f64,
    pub seconds: f64,
}

/// A finished training run.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub params: ParamVector,
    pub rounds: Vec<RoundRecord>,
    /// Per-round parameter snapshots, when requested.
    pub snapshots: Vec<ParamVector>,
}

/// Runs the full training loop in the requested mode and returns the final
/// parameters plus a per-round log.
pub fn run_training(
    dataset: &Dataset,
    net: &NetworkSpec,
    fcfg: &FederationConfig,
    acfg: &AttackConfig,
    scfg: &SmoothingConfig,
    options: &RunOptions,
) -> Result<TrainingRun> {
    fcfg.validate()?;
    scfg.validate()?;
    if options.ablation != Ablation::Standard {
        acfg.validate()?;
    }
    if net.input_dim() != dataset.feature_dim() {
        return Err(Error::Shape {
            context: "run_training input dim",
            expected: dataset.feature_dim(),
            actual: net.input_dim(),
        });
    }
    let factory = StreamFactory::new(fcfg.seed);
    let mut params = nn::init_params(net, fcfg.seed);
    let estimator = options.ablation.estimator_name(acfg.estimator);

    let partitions: Vec<Partition> = match (options.mode, options.partition) {
        (TrainingMode::Centralized, _) => vec![Partition::pooled(0, dataset.len())],
        (TrainingMode::Federated, PartitionScheme::Pooled) => (0..fcfg.num_devices)
            .map(|id| Partition::pooled(id, dataset.len()))
            .collect(),
        (TrainingMode::Federated, PartitionScheme::Heterogeneous) => partition_heterogeneous(
            dataset.labels(),
            dataset.num_classes(),
            fcfg,
            &mut factory.stream(&[tag::PARTITION]),
        )?,
    };

    let central_cfg = FederationConfig {
        batch_size: options.central_batch_size,
        local_batches: options.central_batches.unwrap_or_else(|| {
            let budget = fcfg.sampled_clients() * fcfg.local_batches * fcfg.batch_size;
            budget.div_ceil(options.central_batch_size)
        }),
        ..fcfg.clone()
    };

    let mut rounds = Vec::with_capacity(fcfg.rounds);
    let mut snapshots = Vec::new();
    for round in 0..fcfg.rounds {
        let started = Instant::now();
        let mean_loss = match options.mode {
            TrainingMode::Federated => {
                let ids = sample_clients(
                    fcfg.num_devices,
                    fcfg.participation,
                    &mut factory.client_sampling_stream(round),
                );
                let outcomes = par_map(&ids, |&id| {
                    let mut rng = factory.device_stream(id, round);
                    local_train(
                        &params,
                        &partitions[id],
                        dataset,
                        acfg,
                        scfg,
                        fcfg,
                        options.ablation,
                        &mut rng,
                    )
                    .map_err(|e| e.in_training(round, id))
                });
                let mut updates = Vec::with_capacity(ids.len());
                let mut loss_sum = 0.0;
                for (id, outcome) in ids.iter().zip(outcomes) {
                    let out = outcome?;
                    loss_sum += out.mean_loss;
                    updates.push((out.params, partitions[*id].indices.len()));
                }
                params = aggregate(&updates)?;
                loss_sum / ids.len() as f64
            }
            TrainingMode::Centralized => {
                let mut rng = factory.device_stream(0, round);
                let out = local_train(
                    &params,
                    &partitions[0],
                    dataset,
                    acfg,
                    scfg,
                    &central_cfg,
                    options.ablation,
                    &mut rng,
                )
                .map_err(|e| e.in_training(round, 0))?;
                params = out.params;
                out.mean_loss
            }
        };
        rounds.push(RoundRecord {
            round,
            mode: options.mode.name(),
            estimator,
            mean_loss,
            seconds: started.elapsed().as_secs_f64(),
        });
        if options.record_params {
            snapshots.push(params.clone());
        }
    }
    Ok(TrainingRun {
        params,
        rounds,
        snapshots,
    })
}
