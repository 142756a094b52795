//! Federated averaging with local DP-SGD, and the per-client
//! generalization bound.
//!
//! One global round broadcasts the server parameter to a uniformly
//! selected subset of C clients; each runs M local projected DP-SGD steps
//! (per-example clipping to K, Gaussian noise at magnitude η), drawing b
//! *fresh* — previously unused — points from its own dataset per local
//! step; the server then averages the C local results. No projection is
//! applied after aggregation (for a convex domain the mean stays inside).
//!
//! Every client owns independent generator streams derived from
//! (seed, stream, client, step), so clients within a round can execute in
//! parallel with schedule-independent results, and a 1-client federation
//! reproduces a plain DP-SGD run bit-for-bit (the plain training loop
//! addresses its streams as client 0).
//!
//! The bound for client k with loss range A and n_k local examples is
//!
//! ```text
//! (A/n_k) · Σ_{t ∈ T_k} Σ_{j=1}^{M} Ê‖g(W^k_{t,j−1}, Z^k) − ḡ‖₂ · q^{M(T+1−t)−j},
//! q = 1 − 2Φ̄(√C (D + 2ηK) / (2η)),
//! ```
//!
//! where T_k are the rounds in which k participated. A client that was
//! never selected gets bound 0: no information about its data entered the
//! served parameter.

use crate::bounds::BoundReport;
use crate::error::{Error, Result};
use crate::learn::{LabeledDataset, ModelSpec};
use crate::noise::{delta, Exactness, NoiseModel, NormKind};
use crate::optim::{clip_gradient, noisy_step, single_pass_order, DomainSpec};
use crate::seeding::{stream_rng, Stream};
use crate::stats::{self, Center, GradientSampleSet};
use rayon::prelude::*;

/// Federation shape and local-step hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FedConfig {
    /// Total number of clients N.
    pub clients: usize,
    /// Clients selected per round, C.
    pub per_round: usize,
    /// Global rounds T.
    pub rounds: usize,
    /// Local steps per selected client per round, M.
    pub local_steps: usize,
    pub eta: f64,
    /// Fresh points drawn per local step, b.
    pub batch_size: usize,
    /// Per-example clipping threshold K.
    pub clip: f64,
    pub domain: DomainSpec,
    pub seed: u64,
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_round < 1 || self.per_round > self.clients {
            return Err(Error::Config(format!(
                "need 1 ≤ per_round ≤ clients (got {} of {})",
                self.per_round, self.clients
            )));
        }
        if self.rounds < 1 || self.local_steps < 1 || self.batch_size < 1 {
            return Err(Error::Config(
                "rounds, local_steps, and batch_size must all be ≥ 1".into(),
            ));
        }
        if self.eta < 0.0 || self.clip <= 0.0 {
            return Err(Error::Config("need eta ≥ 0 and clip > 0".into()));
        }
        Ok(())
    }

    /// The contraction coefficient q = 1 − 2Φ̄(√C (D + 2ηK)/(2η)), or 1
    /// when the domain is unbounded.
    pub fn q(&self, param_count: usize) -> f64 {
        let d = self.domain.diameter(param_count, NormKind::L2);
        if !d.is_finite() || self.eta == 0.0 {
            return 1.0;
        }
        let scaled = (self.per_round as f64).sqrt() * (d + 2.0 * self.eta * self.clip);
        delta(NoiseModel::Gaussian, scaled, self.eta)
    }

    /// Decay exponent M(T+1−t) − j for local step j of round t; zero
    /// exactly at the last local step of the last round.
    pub fn q_exponent(&self, round: usize, local_step: usize) -> i64 {
        (self.local_steps * (self.rounds + 1 - round) - local_step) as i64
    }
}

/// One local step's recorded statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct FedStep {
    /// Global round t (1-based).
    pub round: usize,
    pub client: usize,
    /// Local step j within the round (1-based).
    pub local_step: usize,
    /// Ê‖g − ḡ‖₂ over the b clipped per-example gradients at W^k_{t,j−1}.
    pub centered_l2_mean: f64,
}

/// One completed global round.
#[derive(Debug, Clone, PartialEq)]
pub struct FedRound {
    pub t: usize,
    /// Selected clients S_t, ascending.
    pub selected: Vec<usize>,
    /// Aggregated server parameter W_t.
    pub params: Vec<f64>,
}

/// A finished federated run.
#[derive(Debug, Clone, PartialEq)]
pub struct FedTrajectory {
    pub config: FedConfig,
    pub model: ModelSpec,
    pub client_sizes: Vec<usize>,
    pub init: Vec<f64>,
    pub rounds: Vec<FedRound>,
    /// All local-step statistics, ordered by round, then client rank
    /// within the sorted selection, then local step.
    pub steps: Vec<FedStep>,
}

impl FedTrajectory {
    pub fn final_params(&self) -> &[f64] {
        self.rounds.last().map_or(&self.init, |r| &r.params)
    }

    /// Rounds in which client k was selected (T_k), ascending.
    pub fn participation(&self, k: usize) -> Vec<usize> {
        self.rounds
            .iter()
            .filter(|r| r.selected.contains(&k))
            .map(|r| r.t)
            .collect()
    }
}

/// Executes the federation: per round, select C of N clients uniformly
/// without replacement, run M local projected DP-SGD steps on each over
/// fresh local data, and average. Deterministic in `config.seed`.
pub fn run_fed(
    model: &ModelSpec,
    config: &FedConfig,
    client_datasets: &[LabeledDataset],
) -> Result<FedTrajectory> {
    config.validate()?;
    if client_datasets.len() != config.clients {
        return Err(Error::Config(format!(
            "{} client datasets supplied for {} clients",
            client_datasets.len(),
            config.clients
        )));
    }
    for data in client_datasets {
        if data.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                left: data.dim(),
                right: model.dim(),
            });
        }
    }
    let dim = model.param_count();

    let mut w: Vec<f64> = {
        let mut rng = stream_rng(config.seed, Stream::Init, 0, 0);
        config
            .domain
            .sample_uniform(dim, &mut rng)
            .unwrap_or_else(|| model.init_params(&mut rng))
    };

    // Per-client single-pass orders and fresh-data cursors.
    let orders: Vec<Vec<usize>> = (0..config.clients)
        .map(|k| single_pass_order(config.seed, k as u64, client_datasets[k].n()))
        .collect();
    let mut cursors = vec![0usize; config.clients];

    let mut rounds = Vec::with_capacity(config.rounds);
    let mut steps = Vec::new();
    for t in 1..=config.rounds {
        let mut selected = {
            let mut rng = stream_rng(config.seed, Stream::Select, 0, t as u64);
            rand::seq::index::sample(&mut rng, config.clients, config.per_round).into_vec()
        };
        selected.sort_unstable();

        // Clients are independent within the round: each reads only its
        // own order/cursor and writes its own local result.
        let locals: Vec<(Vec<f64>, Vec<FedStep>)> = selected
            .par_iter()
            .map(|&k| {
                run_local(
                    model,
                    config,
                    &client_datasets[k],
                    &orders[k],
                    cursors[k],
                    &w,
                    k,
                    t,
                )
            })
            .collect::<Result<_>>()?;

        // Ordered mean over the sorted selection.
        let mut agg = vec![0.0; dim];
        for (local_w, _) in &locals {
            for (a, x) in agg.iter_mut().zip(local_w) {
                *a += x;
            }
        }
        agg.iter_mut().for_each(|a| *a /= config.per_round as f64);
        w = agg;

        for (&k, (_, local_steps)) in selected.iter().zip(&locals) {
            cursors[k] += config.batch_size * config.local_steps;
            steps.extend(local_steps.iter().cloned());
        }
        rounds.push(FedRound {
            t,
            selected,
            params: w.clone(),
        });
    }

    Ok(FedTrajectory {
        config: *config,
        model: model.clone(),
        client_sizes: client_datasets.iter().map(LabeledDataset::n).collect(),
        init: {
            let mut rng = stream_rng(config.seed, Stream::Init, 0, 0);
            config
                .domain
                .sample_uniform(dim, &mut rng)
                .unwrap_or_else(|| model.init_params(&mut rng))
        },
        rounds,
        steps,
    })
}

/// M local DP-SGD steps for client k in round t, starting from the
/// broadcast parameter.
#[allow(clippy::too_many_arguments)]
fn run_local(
    model: &ModelSpec,
    config: &FedConfig,
    data: &LabeledDataset,
    order: &[usize],
    cursor: usize,
    broadcast: &[f64],
    k: usize,
    t: usize,
) -> Result<(Vec<f64>, Vec<FedStep>)> {
    let m = config.local_steps;
    let b = config.batch_size;
    if cursor + b * m > data.n() {
        return Err(Error::DataExhausted {
            needed: cursor + b * m,
            available: data.n(),
        });
    }
    let mut w = broadcast.to_vec();
    let mut ws = model.workspace();
    let mut grad = vec![0.0; model.param_count()];
    let mut out_steps = Vec::with_capacity(m);
    for j in 1..=m {
        let lo = cursor + (j - 1) * b;
        let mut grads = Vec::with_capacity(b);
        for &i in &order[lo..lo + b] {
            model.loss_and_grad(&w, &data.features[i], data.labels[i], &mut ws, &mut grad)?;
            grads.push(clip_gradient(&grad, config.clip, NormKind::L2));
        }
        let set = GradientSampleSet::new(grads.clone())?;
        out_steps.push(FedStep {
            round: t,
            client: k,
            local_step: j,
            centered_l2_mean: stats::centered_norm_mean(&set, NormKind::L2, Center::Mean),
        });
        let step_index = ((t - 1) * m + j) as u64;
        let mut rng = stream_rng(config.seed, Stream::Noise, k as u64, step_index);
        w = noisy_step(
            &w,
            &grads,
            config.eta,
            config.eta,
            NoiseModel::Gaussian,
            &config.domain,
            &mut rng,
        )?;
    }
    Ok((w, out_steps))
}

/// The generalization bound for client k under a loss bounded by `a`,
/// with n_k local examples. Never-selected clients get total 0.
pub fn client_bound(traj: &FedTrajectory, k: usize, a: f64, n_k: usize) -> Result<BoundReport> {
    if k >= traj.config.clients {
        return Err(Error::Config(format!(
            "client {k} out of range (federation has {})",
            traj.config.clients
        )));
    }
    if n_k == 0 {
        return Err(Error::Config("client bound needs n_k ≥ 1".into()));
    }
    let q = traj.config.q(traj.model.param_count());
    let mut terms = Vec::new();
    let mut decays = Vec::new();
    for step in traj.steps.iter().filter(|s| s.client == k) {
        let qe = q.powi(traj.config.q_exponent(step.round, step.local_step) as i32);
        decays.push(qe);
        terms.push(a / n_k as f64 * step.centered_l2_mean * qe);
    }
    Ok(BoundReport {
        total: terms.iter().sum(),
        per_iteration_terms: terms,
        decay_factors: decays,
        exactness: Exactness::Exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::synth_blobs;
    use crate::optim::{
        run_training, BatchSchedule, OutputSelector, RunSpec, ScheduleSpec, StatsMode,
    };

    fn small_config(seed: u64) -> FedConfig {
        FedConfig {
            clients: 1,
            per_round: 1,
            rounds: 4,
            local_steps: 3,
            eta: 0.05,
            batch_size: 4,
            clip: 0.5,
            domain: DomainSpec::L2Ball { radius: 1.0 },
            seed,
        }
    }

    #[test]
    fn one_client_federation_reproduces_dp_sgd_bit_for_bit() {
        let data = synth_blobs(60, 2, 2, 4.0, 9).unwrap();
        let model = ModelSpec::Logistic { dim: 2, classes: 2 };
        let config = small_config(77);
        let traj = run_fed(&model, &config, std::slice::from_ref(&data)).unwrap();

        let spec = RunSpec {
            algorithm: crate::optim::Algorithm::DpSgd,
            noise: NoiseModel::Gaussian,
            schedule: BatchSchedule::WithoutReplacement {
                iterations: 12, // rounds · local_steps
                batch_size: 4,
            },
            eta: ScheduleSpec::Constant { value: 0.05 },
            noise_mag: ScheduleSpec::Constant { value: 0.05 },
            beta: ScheduleSpec::Constant { value: 1.0 },
            clip: Some(0.5),
            domain: DomainSpec::L2Ball { radius: 1.0 },
            stats: StatsMode::InBatch,
            output: OutputSelector::LastIterate,
            projected_sgld: false,
            seed: 77,
            checkpoint_every: Some(3), // one checkpoint per federated round
        };
        let (params, record) = run_training(&model, &data, &spec, None, None).unwrap();

        assert_eq!(
            traj.final_params(),
            params.as_slice(),
            "C=N=1 federation must equal plain DP-SGD exactly"
        );
        assert_eq!(traj.rounds.len(), record.checkpoints.len());
        for (round, (ct, cp)) in traj.rounds.iter().zip(&record.checkpoints) {
            assert_eq!(round.t * 3, *ct);
            assert_eq!(&round.params, cp, "round {} parameter mismatch", round.t);
        }
        // the recorded statistics coincide iteration by iteration too
        assert_eq!(traj.steps.len(), record.len());
        for (step, it) in traj.steps.iter().zip(&record.iterations) {
            assert_eq!(
                step.centered_l2_mean, it.stats.centered_l2_mean,
                "round {} step {}",
                step.round, step.local_step
            );
        }
    }

    #[test]
    fn zero_learning_rate_freezes_the_server_parameter() {
        let data = synth_blobs(60, 2, 2, 4.0, 9).unwrap();
        let model = ModelSpec::Logistic { dim: 2, classes: 2 };
        let mut config = small_config(5);
        config.eta = 0.0;
        let traj = run_fed(&model, &config, std::slice::from_ref(&data)).unwrap();
        for round in &traj.rounds {
            assert_eq!(round.params, traj.init, "η = 0 must keep W_t = W_0");
        }
    }

    #[test]
    fn selection_is_uniform_without_replacement_and_audited() {
        let model = ModelSpec::Logistic { dim: 2, classes: 2 };
        let datasets: Vec<_> = (0..5)
            .map(|k| synth_blobs(60, 2, 2, 4.0, 100 + k).unwrap())
            .collect();
        let config = FedConfig {
            clients: 5,
            per_round: 2,
            rounds: 6,
            local_steps: 2,
            eta: 0.05,
            batch_size: 3,
            clip: 0.5,
            domain: DomainSpec::L2Ball { radius: 1.0 },
            seed: 123,
        };
        let traj = run_fed(&model, &config, &datasets).unwrap();
        let mut total = 0;
        for round in &traj.rounds {
            assert_eq!(round.selected.len(), 2, "|S_t| = C");
            assert!(
                round.selected.windows(2).all(|w| w[0] < w[1]),
                "distinct, sorted"
            );
            assert!(round.selected.iter().all(|&k| k < 5));
            total += round.selected.len();
        }
        assert_eq!(total, 12, "Σ_t |S_t| = C·T");

        let again = run_fed(&model, &config, &datasets).unwrap();
        assert_eq!(traj, again, "federated runs are deterministic per seed");
    }

    #[test]
    fn exhausted_clients_error() {
        let data = synth_blobs(20, 2, 2, 4.0, 9).unwrap();
        let model = ModelSpec::Logistic { dim: 2, classes: 2 };
        let mut config = small_config(5);
        config.rounds = 2; // needs 2·3·4 = 24 > 20 fresh points
        let err = run_fed(&model, &config, std::slice::from_ref(&data)).unwrap_err();
        assert!(
            matches!(err, Error::DataExhausted { available: 20, .. }),
            "{err}"
        );
    }

    #[test]
    fn client_bound_matches_the_frozen_example() {
        // T = M = C = N = 1, one recorded step with Ê‖g−ḡ‖₂ = 0.5 at
        // exponent 0, A = 1, n_k = 100 → 0.005.
        let config = FedConfig {
            clients: 1,
            per_round: 1,
            rounds: 1,
            local_steps: 1,
            eta: 0.1,
            batch_size: 4,
            clip: 0.5,
            domain: DomainSpec::L2Ball { radius: 1.0 },
            seed: 0,
        };
        let traj = FedTrajectory {
            config,
            model: ModelSpec::Logistic { dim: 2, classes: 2 },
            client_sizes: vec![100],
            init: vec![0.0; 6],
            rounds: vec![FedRound {
                t: 1,
                selected: vec![0],
                params: vec![0.0; 6],
            }],
            steps: vec![FedStep {
                round: 1,
                client: 0,
                local_step: 1,
                centered_l2_mean: 0.5,
            }],
        };
        assert_eq!(
            config.q_exponent(1, 1),
            0,
            "last step of last round has exponent 0"
        );
        let report = client_bound(&traj, 0, 1.0, 100).unwrap();
        assert!(
            (report.total - 0.005).abs() < 1e-17,
            "(1/100)·0.5·q⁰ = 0.005, got {}",
            report.total
        );
        assert_eq!(report.decay_factors, vec![1.0]);
    }

    #[test]
    fn longer_horizons_shrink_a_fixed_participation_bound() {
        // η of the same order as the diameter keeps q numerically inside
        // (0,1): here q = 1 − 2Φ̄(1.5) ≈ 0.866.
        let config = FedConfig {
            clients: 1,
            per_round: 1,
            rounds: 1,
            local_steps: 2,
            eta: 1.0,
            batch_size: 4,
            clip: 0.5,
            domain: DomainSpec::L2Ball { radius: 1.0 },
            seed: 0,
        };
        let q = config.q(6);
        assert!(
            q > 0.0 && q < 1.0,
            "finite D and K give q strictly inside (0,1), got {q}"
        );

        let steps = vec![
            FedStep {
                round: 1,
                client: 0,
                local_step: 1,
                centered_l2_mean: 0.5,
            },
            FedStep {
                round: 1,
                client: 0,
                local_step: 2,
                centered_l2_mean: 0.5,
            },
        ];
        let make = |rounds| FedTrajectory {
            config: FedConfig { rounds, ..config },
            model: ModelSpec::Logistic { dim: 2, classes: 2 },
            client_sizes: vec![100],
            init: vec![0.0; 6],
            rounds: Vec::new(),
            steps: steps.clone(),
        };
        let short = client_bound(&make(1), 0, 1.0, 100).unwrap().total;
        let long = client_bound(&make(3), 0, 1.0, 100).unwrap().total;
        assert!(
            long < short,
            "same participation, larger T must decay harder: {long} !< {short}"
        );
        // exponents stay nonnegative
        for t in 1..=3 {
            for j in 1..=2 {
                assert!(
                    FedConfig {
                        rounds: 3,
                        ..config
                    }
                    .q_exponent(t, j)
                        >= 0
                );
            }
        }
    }

    #[test]
    fn never_selected_clients_get_zero_bound() {
        let model = ModelSpec::Logistic { dim: 2, classes: 2 };
        let datasets: Vec<_> = (0..3)
            .map(|k| synth_blobs(40, 2, 2, 4.0, 200 + k).unwrap())
            .collect();
        let config = FedConfig {
            clients: 3,
            per_round: 1,
            rounds: 1,
            local_steps: 2,
            eta: 0.05,
            batch_size: 4,
            clip: 0.5,
            domain: DomainSpec::L2Ball { radius: 1.0 },
            seed: 31,
        };
        let traj = run_fed(&model, &config, &datasets).unwrap();
        let chosen = traj.rounds[0].selected[0];
        for k in 0..3 {
            let report = client_bound(&traj, k, 1.0, 40).unwrap();
            if k == chosen {
                assert!(
                    report.total > 0.0,
                    "participant {k} must have a positive bound"
                );
                assert_eq!(traj.participation(k), vec![1]);
            } else {
                assert_eq!(report.total, 0.0, "bystander {k} must have bound 0");
                assert!(traj.participation(k).is_empty());
            }
        }
        assert!(
            client_bound(&traj, 7, 1.0, 40).is_err(),
            "out-of-range client"
        );
    }
}
