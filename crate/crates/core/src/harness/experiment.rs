use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Pipeline, Scope};
use super::dataset::{load_dataset, Sample};
use super::folds::{make_folds, make_subject_folds, FoldKey, FoldSplit};
use crate::decode::{segments_from_binary, segments_from_density, SegmentFile, SegmentPrediction};
use crate::error::{Error, Result, ResultExt};
use crate::features::{apply_standardize, fit_standardize, FeatureSequence, StandardizationStats};
use crate::labels::LabelBundle;
use crate::metrics::{aggregate, report_csv, Grouping, MetricsReport, SampleMetrics};
use crate::neural::{train, Checkpoint, Head, Schedule, SequenceModel, TrainingLog};
use crate::skeleton::{Population, Segment, SkeletonSequence};

/// A sample after feature extraction and labelling.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub id: String,
    pub exercise: String,
    pub subject: String,
    pub population: Population,
    pub length: usize,
    /// Unstandardized features.
    pub features: FeatureSequence,
    pub labels: LabelBundle,
    pub segments: Vec<Segment>,
}

pub fn prepare(samples: &[Sample], pipeline: &Pipeline) -> Result<Vec<PreparedSample>> {
    samples
        .par_iter()
        .map(|s| {
            let features = pipeline.features(&s.skeleton).context_with(|| format!("sample {}", s.id))?;
            let labels = LabelBundle::from_annotation(&s.annotation, pipeline.sigma_fraction)
                .context_with(|| format!("sample {}", s.id))?;
            Ok(PreparedSample {
                id: s.id.clone(),
                exercise: s.exercise().to_string(),
                subject: s.subject().to_string(),
                population: s.population(),
                length: s.skeleton.num_frames(),
                features,
                labels,
                segments: s.annotation.segments.clone(),
            })
        })
        .collect()
}

/// A model together with the preprocessing it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: SequenceModel,
    pub standardization: Option<StandardizationStats>,
    pub pipeline: Pipeline,
    pub log: TrainingLog,
}

impl TrainedModel {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(&self.model, self.standardization.clone(), Some(self.pipeline.clone()))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Ok(Self {
            model: ck.to_model()?,
            standardization: ck.standardization.clone(),
            pipeline: ck.pipeline.clone().unwrap_or_default(),
            log: TrainingLog::default(),
        })
    }

    pub fn head(&self) -> Head {
        self.model.head()
    }

    /// Predicts from unstandardized features.
    pub fn predict_features(&self, feats: &FeatureSequence) -> Result<SegmentPrediction> {
        let standardized;
        let input = match &self.standardization {
            Some(stats) => {
                standardized = apply_standardize(stats, feats)?;
                &standardized
            }
            None => feats,
        };
        let out = self.model.forward(input)?;
        let decode = &self.pipeline.decode;
        Ok(match self.model.head() {
            Head::Density => segments_from_density(&out, decode),
            Head::Binary => segments_from_binary(&out, decode),
            Head::Count => SegmentPrediction::from_scalar(out.iter().sum()),
        })
    }

    pub fn predict(&self, seq: &SkeletonSequence) -> Result<SegmentPrediction> {
        self.predict_features(&self.pipeline.features(seq)?)
    }
}

/// SplitMix64 finalizer over the combined inputs.
fn derive_seed(parts: &[u64]) -> u64 {
    let mut z = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        z = z.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Fits standardization on `train_set`, then trains a fresh model. `slot`
/// distinguishes folds so each gets its own init and shuffle seeds.
pub fn train_on(train_set: &[&PreparedSample], cfg: &ExperimentConfig, slot: u64) -> Result<TrainedModel> {
    let first = train_set.first().ok_or(Error::EmptyInput("training set"))?;
    let standardization = if cfg.pipeline.standardize {
        Some(fit_standardize(train_set.iter().map(|s| &s.features))?)
    } else {
        None
    };
    let inputs: Vec<FeatureSequence> = match &standardization {
        Some(stats) => train_set.iter().map(|s| apply_standardize(stats, &s.features)).collect::<Result<_>>()?,
        None => train_set.iter().map(|s| s.features.clone()).collect(),
    };
    let mut model_cfg = cfg.model.build(first.features.dim(), cfg.head);
    model_cfg.seed = derive_seed(&[cfg.seed, cfg.model.seed, slot]);
    let mut model = SequenceModel::new(model_cfg)?;
    let schedule = Schedule { shuffle_seed: derive_seed(&[cfg.seed, cfg.schedule.shuffle_seed, slot, 1]), ..cfg.schedule };
    let dataset: Vec<(&FeatureSequence, &LabelBundle)> =
        inputs.iter().zip(train_set).map(|(f, s)| (f, &s.labels)).collect();
    let log = train(&mut model, &dataset, &schedule, &cfg.loss)?;
    Ok(TrainedModel { model, standardization, pipeline: cfg.pipeline.clone(), log })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub fold: usize,
    pub n_train: usize,
    pub trained: TrainedModel,
    pub predictions: Vec<(String, SegmentPrediction)>,
    pub metrics: Vec<SampleMetrics>,
}

pub fn split_samples(samples: &[PreparedSample], cfg: &ExperimentConfig) -> Result<FoldSplit> {
    let keys: Vec<FoldKey> = samples
        .iter()
        .map(|s| FoldKey { id: s.id.clone(), exercise: s.exercise.clone(), subject: s.subject.clone() })
        .collect();
    if cfg.subject_disjoint {
        make_subject_folds(&keys, cfg.folds, cfg.seed)
    } else {
        make_folds(&keys, cfg.folds, cfg.seed)
    }
}

/// Trains on every fold but `fold` and scores the held-out samples.
pub fn run_fold(samples: &[PreparedSample], split: &FoldSplit, fold: usize, cfg: &ExperimentConfig) -> Result<FoldOutcome> {
    let train_set: Vec<&PreparedSample> = split.train_indices(fold).into_iter().map(|i| &samples[i]).collect();
    let trained = train_on(&train_set, cfg, fold as u64).context_with(|| format!("fold {fold}"))?;
    let mut predictions = Vec::new();
    let mut metrics = Vec::new();
    for i in split.test_indices(fold) {
        let s = &samples[i];
        let pred = trained.predict_features(&s.features).context_with(|| format!("sample {}", s.id))?;
        metrics.push(SampleMetrics::score(&s.id, &s.exercise, s.population, &s.segments, &pred));
        predictions.push((s.id.clone(), pred));
    }
    Ok(FoldOutcome { fold, n_train: train_set.len(), trained, predictions, metrics })
}

pub fn cross_validate(samples: &[PreparedSample], cfg: &ExperimentConfig) -> Result<Vec<FoldOutcome>> {
    let split = split_samples(samples, cfg)?;
    (0..cfg.folds).into_par_iter().map(|f| run_fold(samples, &split, f, cfg)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    /// `"all"` or, for exercise-specific runs, the exercise id.
    pub group: String,
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub head: Head,
    pub scope: Scope,
    pub n_samples: usize,
    pub overall: MetricsReport,
    pub per_exercise: Vec<MetricsReport>,
    pub folds: Vec<FoldSummary>,
    pub samples: Vec<SampleMetrics>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    /// Outcomes keyed by group, in report order.
    pub outcomes: Vec<(String, FoldOutcome)>,
    pub samples: Vec<PreparedSample>,
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Cross-validation over in-memory samples. Nothing is written to disk.
pub fn run_experiment_on(samples: &[Sample], cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    with_pool(cfg.threads, || run_inner(samples, cfg))?
}

fn run_inner(samples: &[Sample], cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let prepared = prepare(samples, &cfg.pipeline)?;
    let groups: Vec<(String, Vec<PreparedSample>)> = match cfg.scope {
        Scope::General => vec![("all".to_string(), prepared.clone())],
        Scope::ExerciseSpecific => {
            let mut by_ex: BTreeMap<String, Vec<PreparedSample>> = BTreeMap::new();
            for s in &prepared {
                by_ex.entry(s.exercise.clone()).or_default().push(s.clone());
            }
            by_ex.into_iter().collect()
        }
    };
    let mut outcomes = Vec::new();
    let mut folds = Vec::new();
    for (group, members) in &groups {
        for outcome in cross_validate(members, cfg).context_with(|| format!("group {group}"))? {
            folds.push(FoldSummary {
                group: group.clone(),
                fold: outcome.fold,
                n_train: outcome.n_train,
                n_test: outcome.metrics.len(),
                epoch_losses: outcome.trained.log.epoch_losses.clone(),
            });
            outcomes.push((group.clone(), outcome));
        }
    }
    let mut sample_metrics: Vec<SampleMetrics> =
        outcomes.iter().flat_map(|(_, o)| o.metrics.iter().cloned()).collect();
    sample_metrics.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let overall = aggregate(&sample_metrics, Grouping::Overall)?.remove(0);
    let per_exercise = aggregate(&sample_metrics, Grouping::PerExercise)?;
    let report = ExperimentReport {
        config_hash: cfg.hash(),
        head: cfg.head,
        scope: cfg.scope,
        n_samples: sample_metrics.len(),
        overall,
        per_exercise,
        folds,
        samples: sample_metrics,
    };
    Ok(ExperimentOutput { report, outcomes, samples: prepared })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `run.json`, `report.json`, `report.csv`, `counts_scatter.csv`,
/// `segments/<id>.json` and `checkpoints/<group>_fold<k>.json` under `dir`.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, output: &ExperimentOutput) -> Result<()> {
    let seg_dir = dir.join("segments");
    let ck_dir = dir.join("checkpoints");
    for d in [dir, &seg_dir, &ck_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    write_file(&dir.join("run.json"), serde_json::to_string_pretty(cfg)?)?;
    let report = &output.report;
    write_file(&dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    let method = format!("{}_{}", cfg.pipeline.feature_variant.as_str(), cfg.head.as_str());
    write_file(&dir.join("report.csv"), report_csv(&method, &report.overall, &report.per_exercise))?;

    let mut scatter = String::from("sample_id,exercise,gt_count,pred_count,population_tag\n");
    for s in &report.samples {
        writeln!(scatter, "{},{},{},{},{}", s.sample_id, s.exercise, s.gt_count, s.pred_count, s.population.as_str())
            .unwrap();
    }
    write_file(&dir.join("counts_scatter.csv"), scatter)?;

    let by_id: BTreeMap<&str, &PreparedSample> = output.samples.iter().map(|s| (s.id.as_str(), s)).collect();
    for (group, outcome) in &output.outcomes {
        for (id, pred) in &outcome.predictions {
            let s = by_id[id.as_str()];
            let file = SegmentFile::new(pred, s.length, &s.exercise, &s.subject);
            write_file(&seg_dir.join(format!("{id}.json")), serde_json::to_string_pretty(&file)?)?;
        }
        outcome.trained.checkpoint().save(&ck_dir.join(format!("{group}_fold{}.json", outcome.fold)))?;
    }
    Ok(())
}

/// Loads `cfg.dataset_path`, cross-validates and writes the run directory.
/// Returns the report and the directory it was written to.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(ExperimentReport, PathBuf)> {
    cfg.validate()?;
    let samples = load_dataset(&cfg.dataset_path)?;
    let output = run_experiment_on(&samples, cfg)?;
    let dir = cfg.run_dir();
    write_run(&dir, cfg, &output)?;
    Ok((output.report, dir))
}

/// Trains one model on every sample, for deployment.
pub fn train_final(samples: &[Sample], cfg: &ExperimentConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    with_pool(cfg.threads, || {
        let prepared = prepare(samples, &cfg.pipeline)?;
        let refs: Vec<&PreparedSample> = prepared.iter().collect();
        train_on(&refs, cfg, u64::MAX)
    })?
}
