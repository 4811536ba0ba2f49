//! The four experiment commands: train, certify, bench, ablate.

use std::path::{Path, PathBuf};
use std::time::Instant;

use fedsmooth::attack::{smoothadv_attack, AttackConfig, Estimator, NoisePack};
use fedsmooth::data::{load_idx, split, synth_blobs, Dataset};
use fedsmooth::error::{Error, Result};
use fedsmooth::federation::{run_training, Ablation, RunOptions, TrainingRun};
use fedsmooth::nn::{self, Classifier, NetworkSpec, ParamVector};
use fedsmooth::parallel::par_map;
use fedsmooth::rng::{tag, StreamFactory};
use fedsmooth::smoothing::{certify, CertificationOutcome};

use crate::config::{DataSource, ExperimentConfig};
use crate::curve::{
    certification_curve, correct_certified_fraction, is_nonincreasing, write_curve_csv,
    write_rounds_csv, CurvePoint, CurveRow,
};

/// Train and test splits for one experiment.
pub struct Datasets {
    pub train: Dataset,
    pub test: Dataset,
}

/// Assembles the configured dataset pair.
///
/// Synthetic blobs are drawn as one pool per class and split block-wise, so
/// train and test share class centers but no samples. IDX datasets load the
/// given files, or split the training pair 80/20 when no test files are
/// named.
pub fn load_datasets(cfg: &ExperimentConfig) -> Result<Datasets> {
    match cfg.dataset {
        DataSource::Synth => {
            let per_class = cfg.synth_train_per_class + cfg.synth_test_per_class;
            let full = synth_blobs(
                cfg.synth_classes,
                per_class,
                cfg.synth_dim,
                cfg.synth_spread,
                cfg.seed,
            )?;
            let mut train_idx = Vec::new();
            let mut test_idx = Vec::new();
            for class in 0..cfg.synth_classes {
                let base = class * per_class;
                train_idx.extend(base..base + cfg.synth_train_per_class);
                test_idx.extend(base + cfg.synth_train_per_class..base + per_class);
            }
            Ok(Datasets {
                train: full.subset(&train_idx)?,
                test: full.subset(&test_idx)?,
            })
        }
        DataSource::Mnist => {
            let images = cfg.mnist_images.as_ref().expect("validated");
            let labels = cfg.mnist_labels.as_ref().expect("validated");
            let full = load_idx(images, labels)?;
            let (train, test) = match (&cfg.mnist_test_images, &cfg.mnist_test_labels) {
                (Some(ti), Some(tl)) => (full, load_idx(ti, tl)?),
                _ => split(&full, 0.8, cfg.seed)?,
            };
            let train = if train.len() > cfg.train_limit {
                train.subset(&(0..cfg.train_limit).collect::<Vec<_>>())?
            } else {
                train
            };
            Ok(Datasets { train, test })
        }
    }
}

/// Network architecture for a dataset: input dim, configured hidden widths,
/// class count.
pub fn network_spec(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<NetworkSpec> {
    let mut sizes = vec![dataset.feature_dim()];
    sizes.extend_from_slice(&cfg.hidden_layers);
    sizes.push(dataset.num_classes());
    NetworkSpec::new(sizes)
}

fn ensure_out_dir(cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|source| Error::Io {
        path: cfg.out_dir.clone(),
        source,
    })
}

pub fn checkpoint_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.join("model.params")
}

/// Result of a training command.
pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub rounds_csv: PathBuf,
    pub run: TrainingRun,
}

/// Trains in the configured mode/ablation and writes the checkpoint plus
/// the round log.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainArtifacts> {
    let datasets = load_datasets(cfg)?;
    let net = network_spec(cfg, &datasets.train)?;
    let options = RunOptions {
        mode: cfg.mode,
        ablation: cfg.ablation,
        ..RunOptions::default()
    };
    let run = run_training(
        &datasets.train,
        &net,
        &cfg.federation(),
        &cfg.attack(),
        &cfg.smoothing(),
        &options,
    )?;
    ensure_out_dir(cfg)?;
    let checkpoint = checkpoint_path(cfg);
    nn::save_params(&checkpoint, &run.params)?;
    let rounds_csv = cfg.out_dir.join("rounds.csv");
    write_rounds_csv(&rounds_csv, &run.rounds)?;
    Ok(TrainArtifacts {
        checkpoint,
        rounds_csv,
        run,
    })
}

/// Result of a certification command.
pub struct CertifyArtifacts {
    pub curve_csv: PathBuf,
    pub curve: Vec<CurvePoint>,
    pub outcomes: Vec<(CertificationOutcome, usize)>,
    pub points: usize,
}

/// Certifies the leading test points of the configured dataset with the
/// given checkpoint and writes the certified-accuracy curve.
pub fn cmd_certify(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<CertifyArtifacts> {
    let default_path = checkpoint_path(cfg);
    let path = checkpoint.unwrap_or(&default_path);
    let params = nn::load_params(path)?;
    let datasets = load_datasets(cfg)?;
    if params.spec().input_dim() != datasets.test.feature_dim() {
        return Err(Error::Shape {
            context: "certify checkpoint input dim",
            expected: datasets.test.feature_dim(),
            actual: params.spec().input_dim(),
        });
    }
    let outcomes = certify_points(cfg, &params, &datasets.test)?;
    let curve = certification_curve(&outcomes, &cfg.radius_grid());
    debug_assert!(is_nonincreasing(&curve));
    debug_assert!(
        (curve[0].certified_accuracy - correct_certified_fraction(&outcomes)).abs() < 1e-12
    );

    ensure_out_dir(cfg)?;
    let curve_csv = cfg.out_dir.join("curve.csv");
    write_curve_csv(&curve_csv, &curve_rows(cfg, &curve))?;
    Ok(CertifyArtifacts {
        curve_csv,
        points: outcomes.len(),
        curve,
        outcomes,
    })
}

/// Certification loop over the leading test points, fanned out across
/// workers with one derived random stream per point.
pub fn certify_points(
    cfg: &ExperimentConfig,
    params: &ParamVector,
    test: &Dataset,
) -> Result<Vec<(CertificationOutcome, usize)>> {
    let classifier = Classifier::new(params);
    let scfg = cfg.smoothing();
    let factory = StreamFactory::new(cfg.seed);
    let indices: Vec<usize> = (0..cfg.test_points.min(test.len())).collect();
    let results = par_map(&indices, |&i| {
        let (x, y) = test.example(i);
        let mut rng = factory.certify_stream(i);
        certify(&classifier, x, &scfg, &mut rng).map(|outcome| (outcome, y))
    });
    results.into_iter().collect()
}

/// Tags every curve point with the experiment coordinates.
pub fn curve_rows(cfg: &ExperimentConfig, curve: &[CurvePoint]) -> Vec<CurveRow> {
    curve
        .iter()
        .map(|p| CurveRow {
            method: cfg.mode.name().to_string(),
            ablation: cfg.ablation.name().to_string(),
            estimator: cfg.ablation.estimator_name(cfg.estimator).to_string(),
            sigma: cfg.sigma,
            epsilon: cfg.epsilon,
            gamma: cfg.gamma,
            radius: p.radius,
            certified_accuracy: p.certified_accuracy,
        })
        .collect()
}

/// Estimator timing comparison.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub attacks: usize,
    pub mean_stochastic_seconds: f64,
    pub mean_one_point_seconds: f64,
    /// stochastic time over one-point time.
    pub ratio: f64,
    pub report_path: PathBuf,
}

/// Times the two gradient estimators over identical inputs and noise packs.
pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<BenchReport> {
    let datasets = load_datasets(cfg)?;
    let net = network_spec(cfg, &datasets.train)?;
    let params = nn::init_params(&net, cfg.seed);
    let scfg = cfg.smoothing();
    let factory = StreamFactory::new(cfg.seed);
    let mut rng = factory.stream(&[tag::NOISE]);

    let attacks = cfg.bench_attacks;
    let dim = datasets.train.feature_dim();
    let cases: Vec<(Vec<f64>, usize, NoisePack)> = (0..attacks)
        .map(|i| {
            let (x, y) = datasets.train.example(i % datasets.train.len());
            (
                x.to_vec(),
                y,
                NoisePack::draw(cfg.m, dim, scfg.sigma, &mut rng),
            )
        })
        .collect();

    let time_estimator = |estimator: Estimator| -> Result<f64> {
        let acfg = AttackConfig {
            estimator,
            ..cfg.attack()
        };
        let started = Instant::now();
        for (x, y, noise) in &cases {
            smoothadv_attack(&params, x, *y, &acfg, scfg.sigma, noise)?;
        }
        Ok(started.elapsed().as_secs_f64() / attacks as f64)
    };
    let mean_stochastic_seconds = time_estimator(Estimator::Stochastic)?;
    let mean_one_point_seconds = time_estimator(Estimator::OnePoint)?;
    let ratio = mean_stochastic_seconds / mean_one_point_seconds;

    ensure_out_dir(cfg)?;
    let report_path = cfg.out_dir.join("bench.txt");
    let text = format!(
        "attacks = {attacks}\nnetwork = {:?}\nsteps = {}\nm = {}\n\
         mean_stochastic_seconds = {mean_stochastic_seconds}\n\
         mean_one_point_seconds = {mean_one_point_seconds}\n\
         ratio_stochastic_over_one_point = {ratio}\n",
        net.layer_sizes(),
        cfg.attack_steps,
        cfg.m,
    );
    std::fs::write(&report_path, text).map_err(|source| Error::Io {
        path: report_path.clone(),
        source,
    })?;
    Ok(BenchReport {
        attacks,
        mean_stochastic_seconds,
        mean_one_point_seconds,
        ratio,
        report_path,
    })
}

/// Runs the three training ablations back-to-back with shared data and
/// seeds, certifies each, and writes one combined curve CSV.
pub fn cmd_ablate(cfg: &ExperimentConfig) -> Result<PathBuf> {
    ensure_out_dir(cfg)?;
    let mut rows = Vec::new();
    for ablation in [Ablation::Standard, Ablation::AdvOnly, Ablation::AdvSmooth] {
        let mut sub = cfg.clone();
        sub.ablation = ablation;
        let datasets = load_datasets(&sub)?;
        let net = network_spec(&sub, &datasets.train)?;
        let options = RunOptions {
            mode: sub.mode,
            ablation,
            ..RunOptions::default()
        };
        let run = run_training(
            &datasets.train,
            &net,
            &sub.federation(),
            &sub.attack(),
            &sub.smoothing(),
            &options,
        )?;
        let checkpoint = sub.out_dir.join(format!("model_{}.params", ablation.name()));
        nn::save_params(&checkpoint, &run.params)?;
        write_rounds_csv(
            &sub.out_dir.join(format!("rounds_{}.csv", ablation.name())),
            &run.rounds,
        )?;
        let outcomes = certify_points(&sub, &run.params, &datasets.test)?;
        let curve = certification_curve(&outcomes, &sub.radius_grid());
        rows.extend(curve_rows(&sub, &curve));
    }
    let path = cfg.out_dir.join("ablation.csv");
    write_curve_csv(&path, &rows)?;
    Ok(path)
}
