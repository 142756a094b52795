//! Projection domains, gradient clipping, noisy update steps, and the
//! recording training loop.
//!
//! One iteration of every algorithm here has the shape
//!
//! ```text
//! W_t = Proj( W_{t-1} − η_t · mean(g) + m_t · N_t ),
//! ```
//!
//! with per-example gradients g at W_{t-1} (clipped to K when configured),
//! standard channel noise N_t, and magnitude m_t depending on the
//! algorithm: a free schedule for noisy GD, m_t = η_t for DP-SGD (the
//! mechanism adds noise to the averaged gradient before the learning rate
//! multiplies it), and m_t = √(2η_t/β_t) for SGLD, which skips the
//! projection unless explicitly enabled.
//!
//! [`run_training`] drives the loop, records an [`IterationRecord`] per
//! step — configuration plus the gradient statistics measured **before**
//! the update consumes the batch — and returns the selected output
//! parameter together with the full [`TrajectoryRecord`] the bound engine
//! evaluates. All randomness is drawn from named streams derived from the
//! run seed (see [`crate::seeding`]), addressed as client 0; the federated
//! simulator addresses its clients the same way, which is what makes a
//! one-client federated run reproduce a DP-SGD run bit-for-bit.

use crate::error::{Error, Result};
use crate::learn::{surrogate_loss_mean, LabeledDataset, ModelSpec};
use crate::noise::{sample_noise, NoiseModel, NormKind};
use crate::seeding::{stream_rng, Stream};
use crate::stats::{self, Center, GradientSampleSet, PairCostMeans};
use rand::seq::SliceRandom;
use rand::Rng;

/// Where iterates are allowed to live; projections are Euclidean
/// (radial scaling for the ℓ2 ball, sorted soft-thresholding for the ℓ1
/// ball, per-coordinate clamping for the box).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    L2Ball { radius: f64 },
    L1Ball { radius: f64 },
    Box { lo: f64, hi: f64 },
    None,
}

impl DomainSpec {
    /// Diameter sup ‖w − w'‖ over the domain in the given norm, for a
    /// `dim`-dimensional parameter. Balls have diameter 2r in their own
    /// norm; cross-norm and box diameters pick up dimension factors.
    /// `None` is unbounded.
    pub fn diameter(&self, dim: usize, norm: NormKind) -> f64 {
        let d = dim as f64;
        match (self, norm) {
            (DomainSpec::None, _) => f64::INFINITY,
            (DomainSpec::L2Ball { radius }, NormKind::L2) => 2.0 * radius,
            (DomainSpec::L2Ball { radius }, NormKind::L1) => 2.0 * radius * d.sqrt(),
            (DomainSpec::L1Ball { radius }, NormKind::L1) => 2.0 * radius,
            (DomainSpec::L1Ball { radius }, NormKind::L2) => 2.0 * radius,
            (DomainSpec::Box { lo, hi }, NormKind::L2) => (hi - lo).abs() * d.sqrt(),
            (DomainSpec::Box { lo, hi }, NormKind::L1) => (hi - lo).abs() * d,
        }
    }

    pub fn project_in_place(&self, w: &mut [f64]) {
        match *self {
            DomainSpec::None => {}
            DomainSpec::L2Ball { radius } => {
                let n = NormKind::L2.of(w);
                if n > radius {
                    let s = radius / n;
                    w.iter_mut().for_each(|x| *x *= s);
                }
            }
            DomainSpec::Box { lo, hi } => {
                w.iter_mut().for_each(|x| *x = x.clamp(lo, hi));
            }
            DomainSpec::L1Ball { radius } => {
                if NormKind::L1.of(w) <= radius {
                    return;
                }
                // Euclidean projection onto the ℓ1 ball: soft-threshold at
                // the level that lands the ℓ1 norm exactly on the radius.
                let mut mags: Vec<f64> = w.iter().map(|x| x.abs()).collect();
                mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
                let mut cumsum = 0.0;
                let mut theta = 0.0;
                for (i, &u) in mags.iter().enumerate() {
                    cumsum += u;
                    let candidate = (cumsum - radius) / (i + 1) as f64;
                    if u - candidate > 0.0 {
                        theta = candidate;
                    } else {
                        break;
                    }
                }
                w.iter_mut()
                    .for_each(|x| *x = x.signum() * (x.abs() - theta).max(0.0));
            }
        }
    }

    /// Uniform draw over the domain, or `None` for an unconstrained domain
    /// (callers fall back to the model's own initializer).
    pub fn sample_uniform<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Option<Vec<f64>> {
        match *self {
            DomainSpec::None => None,
            DomainSpec::Box { lo, hi } => {
                Some((0..dim).map(|_| rng.random_range(lo..=hi)).collect())
            }
            DomainSpec::L2Ball { radius } => {
                // Gaussian direction, radius scaled by u^{1/d}.
                let g = sample_noise(NoiseModel::Gaussian, dim, rng);
                let n = NormKind::L2.of(&g).max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
                Some(g.into_iter().map(|x| x * r / n).collect())
            }
            DomainSpec::L1Ball { radius } => {
                // Signed exponential direction is uniform on the ℓ1 sphere.
                let g = sample_noise(NoiseModel::Laplace, dim, rng);
                let n = NormKind::L1.of(&g).max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
                Some(g.into_iter().map(|x| x * r / n).collect())
            }
        }
    }
}

/// Projection as a pure function (the loop uses the in-place form).
pub fn project(w: &[f64], domain: &DomainSpec) -> Vec<f64> {
    let mut out = w.to_vec();
    domain.project_in_place(&mut out);
    out
}

/// Norm clipping: g unchanged when ‖g‖ ≤ k, else rescaled onto the sphere
/// of radius k.
pub fn clip_gradient(g: &[f64], k: f64, norm: NormKind) -> Vec<f64> {
    let n = norm.of(g);
    if n <= k {
        g.to_vec()
    } else {
        g.iter().map(|x| x * k / n).collect()
    }
}

/// One generic noisy step: Proj(w − η·mean(grads) + m·N) with N drawn from
/// the channel family.
pub fn noisy_step<R: Rng + ?Sized>(
    w: &[f64],
    grads: &[Vec<f64>],
    eta: f64,
    noise_mag: f64,
    noise: NoiseModel,
    domain: &DomainSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mean = mean_of_rows(grads, w.len())?;
    let n = sample_noise(noise, w.len(), rng);
    let mut out: Vec<f64> = w
        .iter()
        .zip(mean.iter().zip(&n))
        .map(|(wi, (gi, ni))| wi - eta * gi + noise_mag * ni)
        .collect();
    domain.project_in_place(&mut out);
    Ok(out)
}

/// One DP-SGD step: per-example clipping to k, then exactly
/// [`noisy_step`] with noise magnitude m = η. Identical seeds give
/// bit-identical results to that composition.
pub fn dp_sgd_step<R: Rng + ?Sized>(
    w: &[f64],
    raw_grads: &[Vec<f64>],
    eta: f64,
    k: f64,
    noise: NoiseModel,
    domain: &DomainSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let clipped: Vec<Vec<f64>> = raw_grads
        .iter()
        .map(|g| clip_gradient(g, k, noise.norm()))
        .collect();
    noisy_step(w, &clipped, eta, eta, noise, domain, rng)
}

/// One SGLD step: w − η·mean(grads) + √(2η/β)·N with Gaussian N and no
/// projection.
pub fn sgld_step<R: Rng + ?Sized>(
    w: &[f64],
    grads: &[Vec<f64>],
    eta: f64,
    beta: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if beta <= 0.0 || eta <= 0.0 {
        return Err(Error::Config(format!(
            "sgld needs positive eta and beta (got eta={eta}, beta={beta})"
        )));
    }
    let mean = mean_of_rows(grads, w.len())?;
    let mag = (2.0 * eta / beta).sqrt();
    let n = sample_noise(NoiseModel::Gaussian, w.len(), rng);
    Ok(w.iter()
        .zip(mean.iter().zip(&n))
        .map(|(wi, (gi, ni))| wi - eta * gi + mag * ni)
        .collect())
}

fn mean_of_rows(rows: &[Vec<f64>], dim: usize) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::TooFewSamples { got: 0 });
    }
    let mut mean = vec![0.0; dim];
    for r in rows {
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                left: r.len(),
                right: dim,
            });
        }
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    let k = rows.len() as f64;
    mean.iter_mut().for_each(|m| *m /= k);
    Ok(mean)
}

/// A value schedule over iterations t = 1, 2, … .
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant {
        value: f64,
    },
    /// init · rate^⌊(t−1)/every⌋
    StepDecay {
        init: f64,
        rate: f64,
        every: usize,
    },
}

impl ScheduleSpec {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            ScheduleSpec::Constant { value } => value,
            ScheduleSpec::StepDecay { init, rate, every } => {
                init * rate.powi(((t - 1) / every.max(1)) as i32)
            }
        }
    }

    /// Errors unless every value the schedule can produce is positive.
    pub fn validate_positive(&self, what: &str) -> Result<()> {
        let ok = match *self {
            ScheduleSpec::Constant { value } => value > 0.0,
            ScheduleSpec::StepDecay { init, rate, .. } => init > 0.0 && rate > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("{what} schedule must stay positive")))
        }
    }
}

/// Minibatch sampling discipline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BatchSchedule {
    /// Single-pass sampling: a seeded shuffle of the dataset consumed in
    /// consecutive chunks; requires iterations · batch_size ≤ n.
    WithoutReplacement {
        iterations: usize,
        batch_size: usize,
    },
    /// A fixed disjoint partition into n/b minibatches; each epoch visits
    /// every cell once in a seeded order. Requires b | n.
    WithReplacement { epochs: usize, batch_size: usize },
}

/// Which iterate the run reports as its output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputSelector {
    LastIterate,
    /// Mean of W_1 … W_T.
    Average,
    /// The iterate with the smallest training surrogate loss; earliest wins
    /// ties.
    ArgminLoss,
}

/// Where the per-iteration statistics sample comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StatsMode {
    /// Reuse the gradients already computed for the update.
    InBatch,
    /// Draw `samples` unseen examples from a held-out pool each iteration.
    HoldOut { samples: usize },
}

pub const DEFAULT_HOLDOUT_SAMPLES: usize = 64;

/// Training algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Projected noisy minibatch GD with a free noise-magnitude schedule.
    NoisyGd,
    /// Projected DP-SGD: per-example clipping, m_t = η_t.
    DpSgd,
    /// SGLD: Gaussian noise at m_t = √(2η_t/β_t), unprojected by default.
    Sgld,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::NoisyGd => "noisy_gd",
            Algorithm::DpSgd => "dp_sgd",
            Algorithm::Sgld => "sgld",
        }
    }
}

/// Full specification of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub noise: NoiseModel,
    pub schedule: BatchSchedule,
    pub eta: ScheduleSpec,
    /// Noise magnitude schedule; consulted only by [`Algorithm::NoisyGd`].
    pub noise_mag: ScheduleSpec,
    /// Inverse temperature schedule; consulted only by [`Algorithm::Sgld`].
    pub beta: ScheduleSpec,
    pub clip: Option<f64>,
    pub domain: DomainSpec,
    pub stats: StatsMode,
    pub output: OutputSelector,
    /// Apply the projection after SGLD steps (off by default: plain SGLD
    /// is unprojected).
    pub projected_sgld: bool,
    pub seed: u64,
    /// Record (t, W_t) snapshots every k iterations when set.
    pub checkpoint_every: Option<usize>,
}

impl RunSpec {
    /// A conservative default: Gaussian DP-SGD, unit ℓ2 ball, clip 1/2.
    pub fn dp_sgd_defaults(iterations: usize, batch_size: usize, seed: u64) -> RunSpec {
        RunSpec {
            algorithm: Algorithm::DpSgd,
            noise: NoiseModel::Gaussian,
            schedule: BatchSchedule::WithoutReplacement {
                iterations,
                batch_size,
            },
            eta: ScheduleSpec::Constant { value: 0.05 },
            noise_mag: ScheduleSpec::Constant { value: 0.05 },
            beta: ScheduleSpec::Constant { value: 1.0 },
            clip: Some(0.5),
            domain: DomainSpec::L2Ball { radius: 1.0 },
            stats: StatsMode::InBatch,
            output: OutputSelector::LastIterate,
            projected_sgld: false,
            seed,
            checkpoint_every: None,
        }
    }
}

/// Per-iteration configuration as it was actually executed.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationConfig {
    /// 1-based iteration index.
    pub t: usize,
    pub eta: f64,
    pub noise_mag: f64,
    pub batch_size: usize,
    /// SGLD inverse temperature, when the algorithm has one.
    pub beta: Option<f64>,
    /// Dataset indices consumed by the update.
    pub batch_ids: Vec<usize>,
    /// Partition cell used (with-replacement schedules).
    pub minibatch_index: Option<usize>,
}

/// Gradient statistics measured before the update. Entries are `None` when
/// the run was configured not to record them (Laplace moments under
/// non-Laplace noise, pair costs under with-replacement sampling).
#[derive(Debug, Clone, PartialEq)]
pub struct GradStats {
    pub sample_count: usize,
    /// Population variance of per-example gradients, summed over coords.
    pub variance: f64,
    /// Variance of the batch-averaged gradient: `variance / batch_size`.
    pub batch_variance: f64,
    /// Mean centered ℓ2 norm E‖g − ḡ‖₂.
    pub centered_l2_mean: f64,
    /// E exp(4‖g − ḡ‖₂²) − 1 (may be +∞).
    pub exp4_sq_l2: f64,
    /// Mean ℓ1 distance to the coordinate median.
    pub mmae: Option<f64>,
    /// E √‖g − med‖₁.
    pub sqrt_l1_median: Option<f64>,
    /// E exp(2‖g − med‖₁) − 1 (may be +∞).
    pub exp2_l1_median: Option<f64>,
    /// Mean closed-form channel cost over gradient pairs at magnitude
    /// m_t·b_t/η_t.
    pub pair_costs: Option<PairCostMeans>,
}

/// One executed iteration: its configuration and its statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub config: IterationConfig,
    pub stats: GradStats,
}

/// The sampling discipline a record was produced under; with-replacement
/// records carry the partition so bound evaluation can group iterations by
/// minibatch.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleSchedule {
    WithoutReplacement,
    WithReplacement { partition: Vec<Vec<usize>> },
}

/// Everything the bound engine needs to know about a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub model: ModelSpec,
    pub algorithm: Algorithm,
    pub noise: NoiseModel,
    pub domain: DomainSpec,
    pub clip: Option<f64>,
    pub n: usize,
    pub schedule: SampleSchedule,
    pub output: OutputSelector,
    pub seed: u64,
    pub iterations: Vec<IterationRecord>,
    /// (t, W_t) snapshots when checkpointing was requested.
    pub checkpoints: Vec<(usize, Vec<f64>)>,
}

impl TrajectoryRecord {
    /// Number of executed iterations.
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    /// A prefix view: the record truncated to the first `upto` iterations,
    /// for evaluating bounds along the trajectory.
    pub fn prefix(&self, upto: usize) -> TrajectoryRecord {
        let mut out = self.clone();
        out.iterations.truncate(upto);
        out.checkpoints.retain(|(t, _)| *t <= upto);
        out
    }
}

/// A parameter vector together with the domain it was projected onto.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub domain: DomainSpec,
}

impl ParamVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// The seeded single-pass consumption order of a dataset for one client;
/// shared between the training loop, the federated simulator, and tests
/// that reconstruct reference trajectories.
pub fn single_pass_order(seed: u64, client: u64, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Data, client, 0));
    order
}

/// The initial parameter vector a run starts from when no explicit
/// override is given: a uniform draw over the domain, falling back to the
/// model initializer for an unconstrained domain. Deterministic in
/// `spec.seed`, so callers can recover W₀ of a finished run.
pub fn initial_params(model: &ModelSpec, spec: &RunSpec) -> Vec<f64> {
    let mut rng = stream_rng(spec.seed, Stream::Init, 0, 0);
    spec.domain
        .sample_uniform(model.param_count(), &mut rng)
        .unwrap_or_else(|| model.init_params(&mut rng))
}

/// Run one training trajectory.
///
/// Gradients, statistics, noise, and batch order are all derived from
/// `spec.seed` (as client 0); `init` overrides the initial parameter (the
/// default is a uniform draw over the domain, or the model initializer for
/// an unconstrained domain). `holdout` must be given iff the stats mode is
/// [`StatsMode::HoldOut`]. Statistics are recorded at W_{t−1}, before the
/// update that consumes the batch.
pub fn run_training(
    model: &ModelSpec,
    data: &LabeledDataset,
    spec: &RunSpec,
    holdout: Option<&LabeledDataset>,
    init: Option<&[f64]>,
) -> Result<(ParamVector, TrajectoryRecord)> {
    let dim = model.param_count();
    if data.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            left: data.dim(),
            right: model.dim(),
        });
    }
    spec.eta.validate_positive("eta")?;
    if spec.algorithm == Algorithm::Sgld {
        spec.beta.validate_positive("beta")?;
        if spec.noise != NoiseModel::Gaussian {
            return Err(Error::NoiseMismatch {
                required: "gaussian",
                got: spec.noise.name(),
            });
        }
    }
    if spec.algorithm == Algorithm::DpSgd && spec.clip.is_none() {
        return Err(Error::Config("dp_sgd requires a clipping threshold".into()));
    }

    // Batch plan.
    let n = data.n();
    let (total_iters, batch_size, partition) = match spec.schedule {
        BatchSchedule::WithoutReplacement {
            iterations,
            batch_size,
        } => {
            if batch_size == 0 {
                return Err(Error::Config("batch size must be positive".into()));
            }
            if iterations * batch_size > n {
                return Err(Error::DataExhausted {
                    needed: iterations * batch_size,
                    available: n,
                });
            }
            (iterations, batch_size, None)
        }
        BatchSchedule::WithReplacement { epochs, batch_size } => {
            if batch_size == 0 {
                return Err(Error::Config("batch size must be positive".into()));
            }
            if !n.is_multiple_of(batch_size) {
                return Err(Error::UnevenPartition { n, b: batch_size });
            }
            let order = single_pass_order(spec.seed, 0, n);
            let cells: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
            (epochs * (n / batch_size), batch_size, Some(cells))
        }
    };
    if matches!(spec.stats, StatsMode::InBatch) && batch_size < 2 && total_iters > 0 {
        return Err(Error::TooFewSamples { got: batch_size });
    }
    if let StatsMode::HoldOut { samples } = spec.stats {
        let pool = holdout
            .ok_or_else(|| Error::Config("hold-out stats mode needs a held-out dataset".into()))?;
        if samples < 2 || pool.n() < samples {
            return Err(Error::Config(format!(
                "hold-out stats need 2 ≤ samples ≤ pool size (samples={samples}, pool={})",
                pool.n()
            )));
        }
        if pool.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                left: pool.dim(),
                right: model.dim(),
            });
        }
    }

    // Initial parameter: uniform over the domain when one exists.
    let mut w: Vec<f64> = match init {
        Some(p) => {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: p.len(),
                    right: dim,
                });
            }
            p.to_vec()
        }
        None => initial_params(model, spec),
    };

    // Per-epoch visit order for the partition cells.
    let cell_visits: Vec<usize> = match &partition {
        Some(cells) => {
            let m = cells.len();
            let mut rng = stream_rng(spec.seed, Stream::Data, 0, 1);
            let mut visits = Vec::with_capacity(total_iters);
            while visits.len() < total_iters {
                let mut epoch: Vec<usize> = (0..m).collect();
                epoch.shuffle(&mut rng);
                visits.extend(epoch);
            }
            visits.truncate(total_iters);
            visits
        }
        None => Vec::new(),
    };
    let pass_order = if partition.is_none() {
        single_pass_order(spec.seed, 0, n)
    } else {
        Vec::new()
    };

    let record_laplace = spec.noise == NoiseModel::Laplace;
    let record_pairs = partition.is_none() && (spec.noise != NoiseModel::Uniform || dim == 1);

    let mut ws = model.workspace();
    let mut grad_buf = vec![0.0; dim];
    let mut iterations = Vec::with_capacity(total_iters);
    let mut checkpoints = Vec::new();
    let mut avg = vec![0.0; dim];
    let mut best: Option<(f64, Vec<f64>)> = None;

    for t in 1..=total_iters {
        let eta = spec.eta.at(t);
        let (noise_mag, beta) = match spec.algorithm {
            Algorithm::NoisyGd => (spec.noise_mag.at(t).max(0.0), None),
            Algorithm::DpSgd => (eta, None),
            Algorithm::Sgld => {
                let b = spec.beta.at(t);
                ((2.0 * eta / b).sqrt(), Some(b))
            }
        };

        let (batch_ids, minibatch_index) = match &partition {
            None => (
                pass_order[(t - 1) * batch_size..t * batch_size].to_vec(),
                None,
            ),
            Some(cells) => {
                let j = cell_visits[t - 1];
                (cells[j].clone(), Some(j))
            }
        };

        // Per-example (clipped) gradients at W_{t-1}.
        let update_grads = batch_gradients(
            model,
            data,
            &batch_ids,
            &w,
            spec.clip,
            spec.noise.norm(),
            &mut ws,
            &mut grad_buf,
        )?;

        // Statistics sample: the update gradients, or a fresh held-out draw.
        let stats_set = match spec.stats {
            StatsMode::InBatch => GradientSampleSet::new(update_grads.clone())?,
            StatsMode::HoldOut { samples } => {
                let pool = holdout.unwrap();
                let mut rng = stream_rng(spec.seed, Stream::Stats, 0, t as u64);
                let idx = rand::seq::index::sample(&mut rng, pool.n(), samples).into_vec();
                GradientSampleSet::new(batch_gradients(
                    model,
                    pool,
                    &idx,
                    &w,
                    spec.clip,
                    spec.noise.norm(),
                    &mut ws,
                    &mut grad_buf,
                )?)?
            }
        };

        let pair_costs = if record_pairs {
            let mut rng = stream_rng(spec.seed, Stream::Pairs, 0, t as u64);
            let cost_mag = noise_mag * batch_size as f64 / eta;
            Some(stats::pair_cost_means(
                &stats_set, spec.noise, cost_mag, &mut rng,
            )?)
        } else {
            None
        };
        let variance = stats::variance(&stats_set);
        let stats_rec = GradStats {
            sample_count: stats_set.n(),
            variance,
            batch_variance: variance / batch_size as f64,
            centered_l2_mean: stats::centered_norm_mean(&stats_set, NormKind::L2, Center::Mean),
            exp4_sq_l2: stats::exp_moment(&stats_set, NormKind::L2, 4.0, true, Center::Mean),
            mmae: record_laplace.then(|| stats::mmae(&stats_set)),
            sqrt_l1_median: record_laplace.then(|| {
                stats::centered_norm_power_mean(&stats_set, NormKind::L1, Center::Median, 0.5)
            }),
            exp2_l1_median: record_laplace
                .then(|| stats::exp_moment(&stats_set, NormKind::L1, 2.0, false, Center::Median)),
            pair_costs,
        };
        iterations.push(IterationRecord {
            config: IterationConfig {
                t,
                eta,
                noise_mag,
                batch_size,
                beta,
                batch_ids,
                minibatch_index,
            },
            stats: stats_rec,
        });

        // The update itself.
        let mut rng = stream_rng(spec.seed, Stream::Noise, 0, t as u64);
        w = match spec.algorithm {
            Algorithm::NoisyGd | Algorithm::DpSgd => noisy_step(
                &w,
                &update_grads,
                eta,
                noise_mag,
                spec.noise,
                &spec.domain,
                &mut rng,
            )?,
            Algorithm::Sgld => {
                let mut next = sgld_step(&w, &update_grads, eta, beta.unwrap(), &mut rng)?;
                if spec.projected_sgld {
                    spec.domain.project_in_place(&mut next);
                }
                next
            }
        };

        for (a, wi) in avg.iter_mut().zip(&w) {
            *a += wi;
        }
        if spec.output == OutputSelector::ArgminLoss {
            let loss = surrogate_loss_mean(model, &w, data)?;
            // strict inequality keeps the earliest minimizer on ties
            if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                best = Some((loss, w.clone()));
            }
        }
        if let Some(k) = spec.checkpoint_every {
            if k > 0 && t % k == 0 {
                checkpoints.push((t, w.clone()));
            }
        }
    }

    let selected = match spec.output {
        OutputSelector::LastIterate => w,
        OutputSelector::Average => {
            if total_iters == 0 {
                w
            } else {
                avg.iter().map(|a| a / total_iters as f64).collect()
            }
        }
        OutputSelector::ArgminLoss => best.map_or(w, |(_, p)| p),
    };

    let record = TrajectoryRecord {
        model: model.clone(),
        algorithm: spec.algorithm,
        noise: spec.noise,
        domain: spec.domain,
        clip: spec.clip,
        n,
        schedule: match partition {
            None => SampleSchedule::WithoutReplacement,
            Some(cells) => SampleSchedule::WithReplacement { partition: cells },
        },
        output: spec.output,
        seed: spec.seed,
        iterations,
        checkpoints,
    };
    Ok((
        ParamVector {
            values: selected,
            domain: spec.domain,
        },
        record,
    ))
}

/// Per-example gradients for the given rows, clipped in `norm` when `clip`
/// is set (the norm paired with the run's noise family).
#[allow(clippy::too_many_arguments)]
fn batch_gradients(
    model: &ModelSpec,
    data: &LabeledDataset,
    ids: &[usize],
    w: &[f64],
    clip: Option<f64>,
    norm: NormKind,
    ws: &mut crate::learn::Workspace,
    grad_buf: &mut [f64],
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(ids.len());
    for &i in ids {
        model.loss_and_grad(w, &data.features[i], data.labels[i], ws, grad_buf)?;
        out.push(grad_buf.to_vec());
    }
    if let Some(k) = clip {
        for g in &mut out {
            let clipped = clip_gradient(g, k, norm);
            *g = clipped;
        }
    }
    Ok(out)
}
