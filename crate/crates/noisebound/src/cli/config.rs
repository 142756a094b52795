//! The TOML experiment configuration: typed sections with dotted paths,
//! unknown keys rejected, and `parse(serialize(c)) == c`.
//!
//! A config file holds up to one section per concern; each command reads
//! the sections it needs and rejects contradictions with a field-path
//! error. See `configs/` for commented presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{synth_blobs, LabeledDataset, ModelSpec};
use crate::noise::{DivergenceKind, NoiseModel, ALL_DIVERGENCES, ALL_NOISE};
use crate::optim::{
    Algorithm, BatchSchedule, DomainSpec, OutputSelector, RunSpec, ScheduleSpec, StatsMode,
};
use crate::seeding::derive_seed;
use crate::stats::LossAssumption;

/// Which command a config file is written for; optional, but when present
/// it must match the subcommand that loads the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Divergence,
    Train,
    Fed,
    Sweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Divergence => "divergence",
            ExperimentKind::Train => "train",
            ExperimentKind::Fed => "fed",
            ExperimentKind::Sweep => "sweep",
        }
    }
}

/// Root of the configuration file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerSection>,
    /// Bound columns to evaluate, in column order (`[[bounds]]` tables).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<BoundSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fed: Option<FedSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl RootConfig {
    pub fn parse(text: &str) -> Result<RootConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))
    }

    /// Reject a config written for a different command.
    pub fn check_kind(&self, invoked: ExperimentKind) -> Result<()> {
        match self.experiment {
            Some(declared) if declared != invoked => Err(Error::Config(format!(
                "config declares experiment = \"{}\" but the {} command was invoked",
                declared.name(),
                invoked.name()
            ))),
            _ => Ok(()),
        }
    }

    pub fn data(&self) -> Result<&DataSection> {
        self.data
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a [data] section".into()))
    }

    pub fn model(&self) -> Result<&ModelSection> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a [model] section".into()))
    }

    pub fn optimizer(&self) -> Result<&OptimizerSection> {
        self.optimizer
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs an [optimizer] section".into()))
    }

    pub fn run(&self) -> RunSection {
        self.run.clone().unwrap_or_default()
    }

    pub fn fed(&self) -> Result<&FedSection> {
        self.fed
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a [fed] section".into()))
    }

    pub fn sweep(&self) -> Result<&SweepSection> {
        self.sweep
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a [sweep] section".into()))
    }
}

fn all_noises() -> Vec<NoiseModel> {
    ALL_NOISE.to_vec()
}

fn all_divergences() -> Vec<DivergenceKind> {
    ALL_DIVERGENCES.to_vec()
}

/// Grid for the `divergence` command: the cross product of the four lists,
/// iterated noise-major. An empty `shifts` or `mags` yields a header-only
/// table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceSection {
    #[serde(default = "all_noises")]
    pub noises: Vec<NoiseModel>,
    #[serde(default = "all_divergences")]
    pub divergences: Vec<DivergenceKind>,
    pub shifts: Vec<f64>,
    pub mags: Vec<f64>,
}

impl DivergenceSection {
    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.shifts.iter().find(|s| !s.is_finite()) {
            return Err(Error::Config(format!(
                "divergence.shifts must be finite, got {bad}"
            )));
        }
        if let Some(bad) = self.mags.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::Config(format!(
                "divergence.mags must be positive and finite, got {bad}"
            )));
        }
        Ok(())
    }
}

fn default_classes() -> usize {
    2
}

fn default_separation() -> f64 {
    6.0
}

/// Synthetic-data settings. Per run seed `s`, the train, test, and stats
/// pool sets are drawn from the same blob population with independent
/// derived seeds, and each is label-corrupted at the same rate (again with
/// independent seeds), so the measured gap refers to the corrupted
/// population the learner actually faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub n_train: usize,
    pub n_test: usize,
    pub dim: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    /// Fraction of labels flipped to a random different class.
    #[serde(default)]
    pub corruption: f64,
    /// Size of the held-out statistics pool (needed iff the optimizer uses
    /// hold-out statistics).
    #[serde(default)]
    pub stats_pool: usize,
}

/// Tags under which per-dataset seeds are derived from the run seed.
mod seed_tag {
    pub const TRAIN: u64 = 1;
    pub const TEST: u64 = 2;
    pub const POOL: u64 = 3;
    pub const TRAIN_CORRUPT: u64 = 4;
    pub const TEST_CORRUPT: u64 = 5;
    pub const POOL_CORRUPT: u64 = 6;
    pub const REPEAT: u64 = 1000;
    pub const FED_TRAIN: u64 = 100;
    pub const FED_TEST: u64 = 200;
}

impl DataSection {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 || self.dim == 0 {
            return Err(Error::Config(
                "data.n_train, data.n_test, data.dim must be positive".into(),
            ));
        }
        if self.classes < 2 {
            return Err(Error::Config("data.classes must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.corruption) {
            return Err(Error::Config(format!(
                "data.corruption must be in [0, 1], got {}",
                self.corruption
            )));
        }
        Ok(())
    }

    fn blob(&self, n: usize, data_seed: u64, corrupt_seed: u64) -> Result<LabeledDataset> {
        let clean = synth_blobs(n, self.dim, self.classes, self.separation, data_seed)?;
        crate::learn::corrupt_labels(&clean, self.corruption, corrupt_seed)
    }

    pub fn train_set(&self, seed: u64) -> Result<LabeledDataset> {
        self.blob(
            self.n_train,
            derive_seed(seed, seed_tag::TRAIN),
            derive_seed(seed, seed_tag::TRAIN_CORRUPT),
        )
    }

    pub fn test_set(&self, seed: u64) -> Result<LabeledDataset> {
        self.blob(
            self.n_test,
            derive_seed(seed, seed_tag::TEST),
            derive_seed(seed, seed_tag::TEST_CORRUPT),
        )
    }

    /// The hold-out statistics pool, when one is configured.
    pub fn stats_pool_set(&self, seed: u64) -> Result<Option<LabeledDataset>> {
        if self.stats_pool == 0 {
            return Ok(None);
        }
        self.blob(
            self.stats_pool,
            derive_seed(seed, seed_tag::POOL),
            derive_seed(seed, seed_tag::POOL_CORRUPT),
        )
        .map(Some)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Mlp,
}

/// Classifier architecture; `dim` and `classes` come from the data (or
/// fed) section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// Hidden-layer widths; required nonempty for `mlp`, forbidden for
    /// `logistic`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hidden: Vec<usize>,
}

impl ModelSection {
    pub fn build(&self, dim: usize, classes: usize) -> Result<ModelSpec> {
        match self.kind {
            ModelKind::Logistic => {
                if !self.hidden.is_empty() {
                    return Err(Error::Config(
                        "model.hidden is only meaningful for kind = \"mlp\"".into(),
                    ));
                }
                Ok(ModelSpec::Logistic { dim, classes })
            }
            ModelKind::Mlp => {
                if self.hidden.is_empty() || self.hidden.contains(&0) {
                    return Err(Error::Config(
                        "model.hidden must list positive widths for kind = \"mlp\"".into(),
                    ));
                }
                Ok(ModelSpec::Mlp {
                    dim,
                    hidden: self.hidden.clone(),
                    classes,
                })
            }
        }
    }
}

/// Inverse-temperature setting for SGLD: either an explicit schedule or
/// the preset string `"table2"`, which expands to β_t = 10⁶ / (2·η_t)
/// tied to the learning-rate schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSection {
    Preset(String),
    Schedule(ScheduleSpec),
}

impl BetaSection {
    fn expand(&self, eta: &ScheduleSpec) -> Result<ScheduleSpec> {
        match self {
            BetaSection::Preset(name) if name == "table2" => Ok(match *eta {
                ScheduleSpec::Constant { value } => ScheduleSpec::Constant {
                    value: 1e6 / (2.0 * value),
                },
                ScheduleSpec::StepDecay { init, rate, every } => ScheduleSpec::StepDecay {
                    init: 1e6 / (2.0 * init),
                    rate: 1.0 / rate,
                    every,
                },
            }),
            BetaSection::Preset(name) => Err(Error::Config(format!(
                "optimizer.beta preset must be \"table2\", got \"{name}\""
            ))),
            BetaSection::Schedule(s) => Ok(*s),
        }
    }
}

fn default_noise() -> NoiseModel {
    NoiseModel::Gaussian
}

fn default_domain() -> DomainSpec {
    DomainSpec::None
}

fn default_output() -> OutputSelector {
    OutputSelector::LastIterate
}

fn default_stats() -> StatsMode {
    StatsMode::InBatch
}

/// Training-algorithm settings. Exactly one of `epochs` (fixed-partition
/// passes) or `iterations` (single-pass sampling) selects the minibatch
/// discipline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub algorithm: Algorithm,
    #[serde(default = "default_noise")]
    pub noise: NoiseModel,
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    pub eta: ScheduleSpec,
    /// Noise-magnitude schedule; required for `noisy_gd`, forbidden
    /// otherwise (`dp_sgd` uses η_t, `sgld` uses √(2η_t/β_t)).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_mag: Option<ScheduleSpec>,
    /// Required for `sgld`, forbidden otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaSection>,
    /// Per-example gradient clipping threshold (required for `dp_sgd`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
    #[serde(default = "default_domain")]
    pub domain: DomainSpec,
    #[serde(default = "default_output")]
    pub output: OutputSelector,
    #[serde(default = "default_stats")]
    pub stats: StatsMode,
    #[serde(default)]
    pub projected_sgld: bool,
}

impl OptimizerSection {
    fn batch_schedule(&self) -> Result<BatchSchedule> {
        if self.batch_size == 0 {
            return Err(Error::Config(
                "optimizer.batch_size must be positive".into(),
            ));
        }
        match (self.epochs, self.iterations) {
            (Some(epochs), None) => Ok(BatchSchedule::WithReplacement {
                epochs,
                batch_size: self.batch_size,
            }),
            (None, Some(iterations)) => Ok(BatchSchedule::WithoutReplacement {
                iterations,
                batch_size: self.batch_size,
            }),
            _ => Err(Error::Config(
                "optimizer needs exactly one of `epochs` (fixed partition) or `iterations` \
                 (single-pass)"
                    .into(),
            )),
        }
    }

    /// Resolve into a full run specification for one seed.
    pub fn build_run_spec(&self, seed: u64, checkpoint_every: usize) -> Result<RunSpec> {
        let schedule = self.batch_schedule()?;
        self.eta.validate_positive("optimizer.eta")?;

        let noise_mag =
            match (self.algorithm, &self.noise_mag) {
                (Algorithm::NoisyGd, Some(s)) => {
                    s.validate_positive("optimizer.noise_mag")?;
                    *s
                }
                (Algorithm::NoisyGd, None) => {
                    return Err(Error::Config(
                        "optimizer.noise_mag is required for algorithm = \"noisy_gd\"".into(),
                    ))
                }
                (_, Some(_)) => return Err(Error::Config(
                    "optimizer.noise_mag only applies to noisy_gd (dp_sgd injects at η_t, sgld \
                     at √(2η_t/β_t))"
                        .into(),
                )),
                (_, None) => ScheduleSpec::Constant { value: 0.0 },
            };

        let beta = match (self.algorithm, &self.beta) {
            (Algorithm::Sgld, Some(b)) => {
                let expanded = b.expand(&self.eta)?;
                expanded.validate_positive("optimizer.beta")?;
                expanded
            }
            (Algorithm::Sgld, None) => {
                return Err(Error::Config(
                    "optimizer.beta is required for algorithm = \"sgld\"".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(Error::Config(
                    "optimizer.beta only applies to algorithm = \"sgld\"".into(),
                ))
            }
            (_, None) => ScheduleSpec::Constant { value: 1.0 },
        };

        if self.algorithm == Algorithm::DpSgd && self.clip.is_none() {
            return Err(Error::Config(
                "optimizer.clip is required for algorithm = \"dp_sgd\"".into(),
            ));
        }
        if let Some(k) = self.clip {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::Config(format!(
                    "optimizer.clip must be positive and finite, got {k}"
                )));
            }
        }

        Ok(RunSpec {
            algorithm: self.algorithm,
            noise: self.noise,
            schedule,
            eta: self.eta,
            noise_mag,
            beta,
            clip: self.clip,
            domain: self.domain,
            stats: self.stats,
            output: self.output,
            projected_sgld: self.projected_sgld,
            seed,
            checkpoint_every: Some(checkpoint_every),
        })
    }

    /// Number of partition cells for a fixed-partition run (1 otherwise).
    pub fn iterations_per_epoch(&self, n_train: usize) -> usize {
        match self.epochs {
            Some(_) if self.batch_size > 0 => (n_train / self.batch_size).max(1),
            _ => 1,
        }
    }

    /// Checkpoint cadence in iterations: `log_every` epochs for
    /// fixed-partition runs, `log_every` iterations for single-pass runs
    /// (0 means 1).
    pub fn checkpoint_every(&self, n_train: usize, log_every: usize) -> usize {
        let stride = log_every.max(1);
        match self.epochs {
            Some(_) => stride * self.iterations_per_epoch(n_train),
            None => stride,
        }
    }

    /// Convert an iteration index to the epoch number reported in CSV
    /// output: completed passes for fixed-partition runs, the iteration
    /// index itself for single-pass runs.
    pub fn epoch_of(&self, t: usize, n_train: usize) -> usize {
        match self.epochs {
            Some(_) => t / self.iterations_per_epoch(n_train),
            None => t,
        }
    }
}

/// Bound family selector for a `[[bounds]]` entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    /// Channel-cost bound from recorded pair costs (single-pass runs).
    Generic,
    /// Specialized constant-step bound (dispatches on the run's noise).
    DpSgd,
    /// Information-theoretic SGLD bound over partition cells.
    Sgld,
    /// Whole-trajectory SGLD bound (minimum of its two branches).
    SgldTrajectory,
}

impl BoundFamily {
    pub fn name(self) -> &'static str {
        match self {
            BoundFamily::Generic => "generic",
            BoundFamily::DpSgd => "dp_sgd",
            BoundFamily::Sgld => "sgld",
            BoundFamily::SgldTrajectory => "sgld_trajectory",
        }
    }
}

/// One bound column: which estimate to run, under which divergence and
/// loss assumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSection {
    pub family: BoundFamily,
    pub divergence: DivergenceKind,
    pub assumption: LossAssumption,
    #[serde(default)]
    pub use_decay: bool,
    /// Column name override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl BoundSection {
    pub fn column_name(&self) -> String {
        match &self.label {
            Some(l) => l.clone(),
            None => format!(
                "bound_{}_{}{}",
                self.family.name(),
                self.divergence.name(),
                if self.use_decay { "_decay" } else { "" }
            ),
        }
    }

    /// Evaluate this bound on a finished (or prefix) record.
    pub fn evaluate(&self, record: &crate::optim::TrajectoryRecord) -> Result<f64> {
        use crate::bounds::{
            dp_sgd_bound_gaussian, dp_sgd_bound_laplace, generic_bound, sgld_bound,
            sgld_trajectory_bound, BoundSpec,
        };
        let spec = BoundSpec::for_record(record, self.divergence, self.assumption, self.use_decay);
        let report = match self.family {
            BoundFamily::Generic => generic_bound(record, &spec)?,
            BoundFamily::DpSgd => match record.noise {
                NoiseModel::Gaussian => dp_sgd_bound_gaussian(record, &spec)?,
                NoiseModel::Laplace => dp_sgd_bound_laplace(record, &spec)?,
                NoiseModel::Uniform => {
                    return Err(Error::NoiseMismatch {
                        required: "gaussian or laplace",
                        got: "uniform",
                    })
                }
            },
            BoundFamily::Sgld => sgld_bound(record, &spec)?,
            BoundFamily::SgldTrajectory => sgld_trajectory_bound(record, &spec)?,
        };
        Ok(report.total)
    }
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4]
}

fn default_repeats() -> usize {
    1
}

/// Seed list and logging cadence shared by train, fed, and sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Rows are emitted every `log_every` epochs (fixed partition) or
    /// iterations (single-pass); 0 means every epoch/iteration.
    #[serde(default)]
    pub log_every: usize,
    /// Nested repetitions: each seed expands into `repeats` derived
    /// child seeds. 1 keeps the seed list as-is.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seeds: default_seeds(),
            log_every: 0,
            repeats: default_repeats(),
        }
    }
}

impl RunSection {
    /// The seed list actually executed, after repeat expansion.
    pub fn effective_seeds(&self) -> Result<Vec<u64>> {
        if self.seeds.is_empty() {
            return Err(Error::Config("run.seeds must not be empty".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("run.repeats must be at least 1".into()));
        }
        if self.repeats == 1 {
            return Ok(self.seeds.clone());
        }
        Ok(self
            .seeds
            .iter()
            .flat_map(|&s| {
                (0..self.repeats as u64).map(move |r| derive_seed(s, seed_tag::REPEAT + r))
            })
            .collect())
    }
}

fn default_bound_a() -> f64 {
    1.0
}

/// Federated-averaging experiment: client populations are blobs whose
/// means drift by `client_shift · k` along every coordinate for client k,
/// so client 0 matches the unshifted population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FedSection {
    pub clients: usize,
    pub per_round: usize,
    pub rounds: usize,
    pub local_steps: usize,
    pub eta: f64,
    pub batch_size: usize,
    pub clip: f64,
    #[serde(default = "default_domain")]
    pub domain: DomainSpec,
    /// Per-client training examples (on-device data).
    pub n_client: usize,
    /// Per-client test examples for the gap measurement.
    pub n_test_client: usize,
    pub dim: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default)]
    pub client_shift: f64,
    /// Loss range A used in the per-client bound.
    #[serde(default = "default_bound_a")]
    pub bound_a: f64,
}

impl FedSection {
    pub fn fed_config(&self, seed: u64) -> crate::fed::FedConfig {
        crate::fed::FedConfig {
            clients: self.clients,
            per_round: self.per_round,
            rounds: self.rounds,
            local_steps: self.local_steps,
            eta: self.eta,
            batch_size: self.batch_size,
            clip: self.clip,
            domain: self.domain,
            seed,
        }
    }

    fn client_blob(&self, n: usize, k: usize, data_seed: u64) -> Result<LabeledDataset> {
        let mut ds = synth_blobs(n, self.dim, self.classes, self.separation, data_seed)?;
        let shift = self.client_shift * k as f64;
        if shift != 0.0 {
            for row in &mut ds.features {
                for v in row.iter_mut() {
                    *v += shift;
                }
            }
        }
        Ok(ds)
    }

    pub fn client_train_set(&self, seed: u64, k: usize) -> Result<LabeledDataset> {
        self.client_blob(
            self.n_client,
            k,
            derive_seed(seed, seed_tag::FED_TRAIN + k as u64),
        )
    }

    pub fn client_test_set(&self, seed: u64, k: usize) -> Result<LabeledDataset> {
        self.client_blob(
            self.n_test_client,
            k,
            derive_seed(seed, seed_tag::FED_TEST + k as u64),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.clients > 100 {
            return Err(Error::Config(format!(
                "fed.clients must be at most 100 so client seed tags stay distinct, got {}",
                self.clients
            )));
        }
        if self.n_client == 0 || self.n_test_client == 0 || self.dim == 0 {
            return Err(Error::Config(
                "fed.n_client, fed.n_test_client, fed.dim must be positive".into(),
            ));
        }
        if !(self.bound_a > 0.0 && self.bound_a.is_finite()) {
            return Err(Error::Config(format!(
                "fed.bound_a must be positive and finite, got {}",
                self.bound_a
            )));
        }
        if !(self.client_shift.is_finite()) {
            return Err(Error::Config("fed.client_shift must be finite".into()));
        }
        Ok(())
    }
}

/// The axis a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Label-corruption fraction α ∈ [0, 1].
    Corruption,
    /// Hidden width of a single-hidden-layer MLP (positive integer).
    Width,
    /// Training-set size (positive integer).
    N,
    /// Constant noise magnitude for `noisy_gd` (positive).
    NoiseScale,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Corruption => "corruption",
            SweepAxis::Width => "width",
            SweepAxis::N => "n",
            SweepAxis::NoiseScale => "noise_scale",
        }
    }
}

fn as_positive_integer(v: f64, what: &str) -> Result<usize> {
    if v.fract() != 0.0 || v < 1.0 || v > u32::MAX as f64 {
        return Err(Error::Config(format!(
            "{what} values must be positive integers, got {v}"
        )));
    }
    Ok(v as usize)
}

/// Sweep settings: the axis and the points, executed in listed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl SweepSection {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep.values must not be empty".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep.values must be finite".into()));
        }
        Ok(())
    }

    /// Specialize the base sections to one sweep point. Returns the
    /// (data, model, optimizer) triple actually run at this value.
    pub fn apply(
        &self,
        value: f64,
        data: &DataSection,
        model: &ModelSection,
        optimizer: &OptimizerSection,
    ) -> Result<(DataSection, ModelSection, OptimizerSection)> {
        let mut data = data.clone();
        let mut model = model.clone();
        let mut optimizer = optimizer.clone();
        match self.axis {
            SweepAxis::Corruption => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::Config(format!(
                        "sweep corruption values must be in [0, 1], got {value}"
                    )));
                }
                data.corruption = value;
            }
            SweepAxis::Width => {
                let w = as_positive_integer(value, "sweep width")?;
                if model.kind != ModelKind::Mlp {
                    return Err(Error::Config(
                        "sweep axis = \"width\" needs model.kind = \"mlp\"".into(),
                    ));
                }
                model.hidden = vec![w];
            }
            SweepAxis::N => {
                data.n_train = as_positive_integer(value, "sweep n")?;
            }
            SweepAxis::NoiseScale => {
                if value <= 0.0 {
                    return Err(Error::Config(format!(
                        "sweep noise_scale values must be positive, got {value}"
                    )));
                }
                if optimizer.algorithm != Algorithm::NoisyGd {
                    return Err(Error::Config(
                        "sweep axis = \"noise_scale\" needs optimizer.algorithm = \"noisy_gd\""
                            .into(),
                    ));
                }
                optimizer.noise_mag = Some(ScheduleSpec::Constant { value });
            }
        }
        Ok((data, model, optimizer))
    }
}
