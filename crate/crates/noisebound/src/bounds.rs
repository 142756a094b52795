//! The bound engine: turns a [`TrajectoryRecord`] into numerical
//! generalization bounds.
//!
//! Three families are implemented, each with its per-divergence variants:
//!
//! * **Generic channel bounds** ([`generic_bound`]) for single-pass
//!   (without-replacement) runs, driven by the recorded mean pair costs
//!   Ĉ_t = Ê C_f(g, g′; m_t b_t / η_t):
//!
//!   ```text
//!   KL : (√2 σ / n) Σ_t b_t √(Ĉ_t Q_t)
//!   TV : (A / n)    Σ_t b_t  Ĉ_t Q_t
//!   χ² : (σ̂ / n)    Σ_t b_t √(Ĉ_t Q_t)
//!   ```
//!
//!   where Q_t = ∏_{t′>t} δ(D + 2η_{t′}K, m_{t′}) is the projection
//!   decay product ([`decay_product`]), active when the domain has finite
//!   diameter D and gradients are clipped to K.
//!
//! * **DP-SGD mechanism bounds** ([`dp_sgd_bound_gaussian`],
//!   [`dp_sgd_bound_laplace`]) for constant-rate runs with m_t = η,
//!   using a scalar contraction coefficient q and the per-iteration
//!   moment statistics instead of pair costs.
//!
//! * **SGLD bounds** ([`sgld_bound`], [`sgld_trajectory_bound`]) for
//!   partitioned (with-replacement) runs, built from the per-iteration
//!   mutual-information surrogate β_t η_t Var_t / (4b²)
//!   ([`mi_surrogate`]).
//!
//! Every function returns a [`BoundReport`] carrying the total, the
//! per-term decomposition, the decay coefficients, and whether the value
//! evaluates its reference expression exactly or upper-bounds it.

use crate::error::{Error, Result};
use crate::noise::{delta, DivergenceKind, Exactness, NoiseModel};
use crate::optim::{SampleSchedule, TrajectoryRecord};
use crate::stats::LossAssumption;

/// What to evaluate: the divergence variant, the loss assumption carrying
/// its constant (A, σ, or σ̂), the sample size n, and whether decay
/// products are applied.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSpec {
    pub divergence: DivergenceKind,
    pub assumption: LossAssumption,
    pub n: usize,
    pub use_decay: bool,
}

impl BoundSpec {
    pub fn new(
        divergence: DivergenceKind,
        assumption: LossAssumption,
        n: usize,
        use_decay: bool,
    ) -> BoundSpec {
        BoundSpec {
            divergence,
            assumption,
            n,
            use_decay,
        }
    }

    /// Spec with `n` taken from the record itself.
    pub fn for_record(
        record: &TrajectoryRecord,
        divergence: DivergenceKind,
        assumption: LossAssumption,
        use_decay: bool,
    ) -> BoundSpec {
        BoundSpec::new(divergence, assumption, record.n, use_decay)
    }

    /// Validates the divergence–assumption pairing and returns the
    /// constant the bound multiplies by: A for TV, σ for KL, σ̂ for χ².
    pub fn constant(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::Config("bound spec needs n ≥ 1".into()));
        }
        bound_constant(self.divergence, &self.assumption)
    }
}

/// The constant each divergence variant needs: TV needs a bounded range A,
/// KL a sub-Gaussian constant σ (a bounded loss implies σ = A/2), χ² a
/// variance proxy σ̂ (a bounded loss implies σ̂ = A/2).
pub fn bound_constant(divergence: DivergenceKind, assumption: &LossAssumption) -> Result<f64> {
    let mismatch = |required: &'static str| Error::AssumptionMismatch {
        divergence: divergence.name(),
        required,
        got: assumption.name(),
    };
    match divergence {
        DivergenceKind::Tv => match *assumption {
            LossAssumption::Bounded { a } => Ok(a),
            _ => Err(mismatch("bounded")),
        },
        DivergenceKind::Kl => match *assumption {
            LossAssumption::SubGaussian { sigma } => Ok(sigma),
            LossAssumption::Bounded { a } => Ok(a / 2.0),
            LossAssumption::FiniteVariance { .. } => Err(mismatch("sub_gaussian or bounded")),
        },
        DivergenceKind::Chi2 => match *assumption {
            LossAssumption::FiniteVariance { sigma_hat } => Ok(sigma_hat),
            LossAssumption::Bounded { a } => Ok(a / 2.0),
            LossAssumption::SubGaussian { .. } => Err(mismatch("finite_variance or bounded")),
        },
    }
}

/// An evaluated bound: the total, its per-term decomposition (the total is
/// the sum of the terms, except for the trajectory bound where it is their
/// min), the decay coefficients applied, and whether the evaluation equals
/// its reference expression exactly or upper-bounds it (approximate
/// channel-cost closed forms and Laplace decay coefficients are one-sided).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub total: f64,
    pub per_iteration_terms: Vec<f64>,
    pub decay_factors: Vec<f64>,
    pub exactness: Exactness,
}

impl BoundReport {
    fn empty() -> BoundReport {
        BoundReport {
            total: 0.0,
            per_iteration_terms: Vec::new(),
            decay_factors: Vec::new(),
            exactness: Exactness::Exact,
        }
    }
}

/// Decay product Q_t = ∏_{t′=t+1}^{T} δ(D + 2η_{t′} K, m_{t′}) for a
/// 1-based iteration index t; the empty product (t = T) is 1, and records
/// without a finite domain diameter or a clipping threshold contract
/// nothing (Q_t = 1).
pub fn decay_product(record: &TrajectoryRecord, t: usize) -> f64 {
    let Some(k) = record.clip else { return 1.0 };
    let d = record
        .domain
        .diameter(record.model.param_count(), record.noise.norm());
    if !d.is_finite() {
        return 1.0;
    }
    record.iterations[t..]
        .iter()
        .map(|it| {
            delta(
                record.noise,
                d + 2.0 * it.config.eta * k,
                it.config.noise_mag,
            )
        })
        .product()
}

fn decay_exactness(record: &TrajectoryRecord, use_decay: bool) -> Exactness {
    // Laplace δ is itself an upper bound; applying it keeps the bound
    // valid but one-sided.
    if use_decay && record.noise == NoiseModel::Laplace && record.clip.is_some() {
        Exactness::UpperBound
    } else {
        Exactness::Exact
    }
}

/// The generic channel bound for a single-pass record, in the requested
/// divergence. The per-iteration channel costs are read from the recorded
/// pair-cost means, which were measured at magnitude m_t b_t / η_t.
pub fn generic_bound(record: &TrajectoryRecord, spec: &BoundSpec) -> Result<BoundReport> {
    let c = spec.constant()?;
    if !matches!(record.schedule, SampleSchedule::WithoutReplacement) {
        return Err(Error::ScheduleMismatch {
            required: "without_replacement",
            detail: "partitioned records are covered by sgld_bound".into(),
        });
    }
    if record.is_empty() {
        return Ok(BoundReport::empty());
    }

    let n = spec.n as f64;
    let prefactor = match spec.divergence {
        DivergenceKind::Kl => std::f64::consts::SQRT_2 * c / n,
        DivergenceKind::Tv => c / n,
        DivergenceKind::Chi2 => c / n,
    };

    let mut terms = Vec::with_capacity(record.len());
    let mut decays = Vec::with_capacity(record.len());
    let mut exactness = decay_exactness(record, spec.use_decay);
    for (i, it) in record.iterations.iter().enumerate() {
        let costs = it
            .stats
            .pair_costs
            .as_ref()
            .ok_or(Error::MissingStatistic {
                context: "generic_bound",
                stat: "pair_costs",
            })?;
        let cost = match spec.divergence {
            DivergenceKind::Kl => costs.kl,
            DivergenceKind::Tv => costs.tv,
            DivergenceKind::Chi2 => costs.chi2,
        };
        exactness = exactness.and(cost.exactness);
        let q = if spec.use_decay {
            decay_product(record, i + 1)
        } else {
            1.0
        };
        decays.push(q);
        let b = it.config.batch_size as f64;
        let term = match spec.divergence {
            DivergenceKind::Tv => prefactor * b * cost.value * q,
            DivergenceKind::Kl | DivergenceKind::Chi2 => prefactor * b * (cost.value * q).sqrt(),
        };
        terms.push(term);
    }
    Ok(BoundReport {
        total: terms.iter().sum(),
        per_iteration_terms: terms,
        decay_factors: decays,
        exactness,
    })
}

/// Shared preconditions of the DP-SGD mechanism bounds: the right noise
/// family, a constant learning rate with m_t = η, and a clipping
/// threshold. Returns (η, K, q) where q = δ(D + 2ηK, η) is the scalar
/// contraction coefficient.
fn dp_sgd_preamble(record: &TrajectoryRecord, required: NoiseModel) -> Result<(f64, f64, f64)> {
    if record.noise != required {
        return Err(Error::NoiseMismatch {
            required: required.name(),
            got: record.noise.name(),
        });
    }
    let eta = record.iterations[0].config.eta;
    for it in &record.iterations {
        if it.config.eta != eta || it.config.noise_mag != eta {
            return Err(Error::ScheduleMismatch {
                required: "constant learning rate with noise magnitude m_t = eta",
                detail: format!(
                    "iteration {} has eta={}, m={}",
                    it.config.t, it.config.eta, it.config.noise_mag
                ),
            });
        }
    }
    let k = record.clip.ok_or_else(|| {
        Error::Config("dp-sgd bounds need a clipping threshold on the record".into())
    })?;
    let d = record
        .domain
        .diameter(record.model.param_count(), required.norm());
    let q = if d.is_finite() {
        delta(required, d + 2.0 * eta * k, eta)
    } else {
        1.0
    };
    Ok((eta, k, q))
}

/// The Gaussian DP-SGD bound in the requested divergence, with
/// q = 1 − 2Φ̄((D + 2ηK)/(2η)):
///
/// ```text
/// KL : (2σ / n) Σ_t √(Var_t · q^{T−t})
/// TV : (A / n)  Σ_t Ê‖g − ḡ‖₂ · q^{T−t}
/// χ² : (σ̂ / n)  Σ_t √((Ê e^{4‖g−ḡ‖₂²} − 1) · q^{T−t})
/// ```
pub fn dp_sgd_bound_gaussian(record: &TrajectoryRecord, spec: &BoundSpec) -> Result<BoundReport> {
    let c = spec.constant()?;
    if record.is_empty() {
        return Ok(BoundReport::empty());
    }
    let (_, _, q_raw) = dp_sgd_preamble(record, NoiseModel::Gaussian)?;
    let q = if spec.use_decay { q_raw } else { 1.0 };
    let n = spec.n as f64;
    let big_t = record.len() as i32;

    let mut terms = Vec::with_capacity(record.len());
    let mut decays = Vec::with_capacity(record.len());
    for (i, it) in record.iterations.iter().enumerate() {
        let qe = q.powi(big_t - 1 - i as i32);
        decays.push(qe);
        let s = &it.stats;
        let term = match spec.divergence {
            DivergenceKind::Kl => 2.0 * c / n * (s.variance * qe).sqrt(),
            DivergenceKind::Tv => c / n * s.centered_l2_mean * qe,
            DivergenceKind::Chi2 => c / n * (s.exp4_sq_l2 * qe).sqrt(),
        };
        terms.push(term);
    }
    Ok(BoundReport {
        total: terms.iter().sum(),
        per_iteration_terms: terms,
        decay_factors: decays,
        exactness: Exactness::Exact,
    })
}

/// The Laplace DP-SGD bound in the requested divergence, with
/// q = 1 − e^{−(D + 2ηK)/η} and median-centered ℓ1 statistics:
///
/// ```text
/// KL : (2σ / n)  Σ_t √(b_t · mmae_t · q^{T−t})
/// TV : (√2 A / n) Σ_t √b_t · Ê√‖g − med‖₁ · q^{T−t}
/// χ² : (σ̂ / n)   Σ_t √(b_t · (Ê e^{2‖g−med‖₁} − 1) · q^{T−t})
/// ```
pub fn dp_sgd_bound_laplace(record: &TrajectoryRecord, spec: &BoundSpec) -> Result<BoundReport> {
    let c = spec.constant()?;
    if record.is_empty() {
        return Ok(BoundReport::empty());
    }
    let (_, _, q_raw) = dp_sgd_preamble(record, NoiseModel::Laplace)?;
    let q = if spec.use_decay { q_raw } else { 1.0 };
    let n = spec.n as f64;
    let big_t = record.len() as i32;

    let missing = |stat: &'static str| Error::MissingStatistic {
        context: "dp_sgd_bound_laplace",
        stat,
    };
    let mut terms = Vec::with_capacity(record.len());
    let mut decays = Vec::with_capacity(record.len());
    for (i, it) in record.iterations.iter().enumerate() {
        let qe = q.powi(big_t - 1 - i as i32);
        decays.push(qe);
        let s = &it.stats;
        let b = it.config.batch_size as f64;
        let term = match spec.divergence {
            DivergenceKind::Kl => {
                let mmae = s.mmae.ok_or_else(|| missing("mmae"))?;
                2.0 * c / n * (b * mmae * qe).sqrt()
            }
            DivergenceKind::Tv => {
                let m = s.sqrt_l1_median.ok_or_else(|| missing("sqrt_l1_median"))?;
                std::f64::consts::SQRT_2 * c / n * b.sqrt() * m * qe
            }
            DivergenceKind::Chi2 => {
                let e = s.exp2_l1_median.ok_or_else(|| missing("exp2_l1_median"))?;
                c / n * (b * e * qe).sqrt()
            }
        };
        terms.push(term);
    }
    Ok(BoundReport {
        total: terms.iter().sum(),
        per_iteration_terms: terms,
        decay_factors: decays,
        exactness: Exactness::Exact,
    })
}

/// The per-iteration mutual-information surrogate of an SGLD step:
/// β η Var / (4 b²), where Var is the per-example gradient variance and b
/// the batch size. [`sgld_bound`] is its composition over partition cells.
pub fn mi_surrogate(beta: f64, eta: f64, per_example_variance: f64, batch_size: usize) -> f64 {
    let b = batch_size as f64;
    beta * eta * per_example_variance / (4.0 * b * b)
}

/// Iterations grouped by partition cell, with β_t read off the record.
fn sgld_preamble(
    record: &TrajectoryRecord,
    context: &'static str,
) -> Result<(usize, Vec<Vec<usize>>)> {
    let SampleSchedule::WithReplacement { partition } = &record.schedule else {
        return Err(Error::ScheduleMismatch {
            required: "with_replacement",
            detail: format!("{context} needs a partitioned record; single-pass records are covered by generic_bound"),
        });
    };
    if record.noise != NoiseModel::Gaussian {
        return Err(Error::NoiseMismatch {
            required: "gaussian",
            got: record.noise.name(),
        });
    }
    let mut cells = vec![Vec::new(); partition.len()];
    for (i, it) in record.iterations.iter().enumerate() {
        if it.config.beta.is_none() {
            return Err(Error::MissingStatistic {
                context,
                stat: "beta",
            });
        }
        let j = it.config.minibatch_index.ok_or(Error::MissingStatistic {
            context,
            stat: "minibatch_index",
        })?;
        cells[j].push(i);
    }
    let b = partition.first().map_or(0, Vec::len);
    Ok((b, cells))
}

/// The SGLD bound for a partitioned record:
///
/// ```text
/// (√(2b) σ / (2n)) · Σ_{j=1}^{m} √( Σ_{t ∈ T_j} β_t η_t Var_t^batch )
/// ```
///
/// where T_j collects the iterations that consumed cell S_j and
/// Var_t^batch is the recorded batch-averaged gradient variance. This is a
/// mutual-information (KL) bound: `spec.divergence` must be KL, and the
/// assumption must supply a sub-Gaussian constant.
pub fn sgld_bound(record: &TrajectoryRecord, spec: &BoundSpec) -> Result<BoundReport> {
    if spec.divergence != DivergenceKind::Kl {
        return Err(Error::AssumptionMismatch {
            divergence: spec.divergence.name(),
            required: "kl (sgld bounds are mutual-information bounds)",
            got: spec.assumption.name(),
        });
    }
    let sigma = spec.constant()?;
    if record.is_empty() {
        return Ok(BoundReport::empty());
    }
    let (b, cells) = sgld_preamble(record, "sgld_bound")?;
    let n = spec.n as f64;
    let prefactor = (2.0 * b as f64).sqrt() * sigma / (2.0 * n);
    let terms: Vec<f64> = cells
        .iter()
        .map(|idxs| {
            let inner: f64 = idxs
                .iter()
                .map(|&i| {
                    let it = &record.iterations[i];
                    it.config.beta.unwrap() * it.config.eta * it.stats.batch_variance
                })
                .sum();
            prefactor * inner.sqrt()
        })
        .collect();
    Ok(BoundReport {
        total: terms.iter().sum(),
        per_iteration_terms: terms,
        decay_factors: Vec::new(),
        exactness: Exactness::Exact,
    })
}

/// The SGLD trajectory bound, the min of a per-iteration and a pooled
/// composition of the per-example gradient variances:
///
/// ```text
/// (√2 σ / 2) · min{ (1/n) Σ_t √(β_t η_t Var_t),
///                   √( (1/(bn)) Σ_t β_t η_t Var_t ) }
/// ```
///
/// The report's two terms are the two branches; the total is their min.
pub fn sgld_trajectory_bound(record: &TrajectoryRecord, spec: &BoundSpec) -> Result<BoundReport> {
    if spec.divergence != DivergenceKind::Kl {
        return Err(Error::AssumptionMismatch {
            divergence: spec.divergence.name(),
            required: "kl (sgld bounds are mutual-information bounds)",
            got: spec.assumption.name(),
        });
    }
    let sigma = spec.constant()?;
    if record.is_empty() {
        return Ok(BoundReport::empty());
    }
    let (b, _) = sgld_preamble(record, "sgld_trajectory_bound")?;
    let n = spec.n as f64;
    let mut sum_sqrt = 0.0;
    let mut sum_raw = 0.0;
    for it in &record.iterations {
        let v = it.config.beta.unwrap() * it.config.eta * it.stats.variance;
        sum_sqrt += v.sqrt();
        sum_raw += v;
    }
    let prefactor = std::f64::consts::SQRT_2 * sigma / 2.0;
    let branch_per_iter = prefactor * sum_sqrt / n;
    let branch_pooled = prefactor * (sum_raw / (b as f64 * n)).sqrt();
    Ok(BoundReport {
        total: branch_per_iter.min(branch_pooled),
        per_iteration_terms: vec![branch_per_iter, branch_pooled],
        decay_factors: Vec::new(),
        exactness: Exactness::Exact,
    })
}

/// The three Gaussian DP-SGD variants under a bounded loss of range `a`,
/// in their theoretical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderingReport {
    pub tv: f64,
    pub kl: f64,
    pub chi2: f64,
}

/// Evaluates the TV, KL, and χ² Gaussian DP-SGD bounds for a bounded loss
/// in [0, a] — pairing TV with A = a and KL/χ² with σ = σ̂ = a/2 — and
/// checks the chain TV ≤ KL ≤ χ² within 1e−12 relative slack.
pub fn bound_ordering_check(
    record: &TrajectoryRecord,
    a: f64,
    n: usize,
    use_decay: bool,
) -> Result<OrderingReport> {
    let assumption = LossAssumption::Bounded { a };
    let eval = |divergence| {
        dp_sgd_bound_gaussian(
            record,
            &BoundSpec::new(divergence, assumption, n, use_decay),
        )
        .map(|r| r.total)
    };
    let report = OrderingReport {
        tv: eval(DivergenceKind::Tv)?,
        kl: eval(DivergenceKind::Kl)?,
        chi2: eval(DivergenceKind::Chi2)?,
    };
    let slack = |x: f64| 1e-12 * (1.0 + x.abs());
    if report.tv > report.kl + slack(report.kl) || report.kl > report.chi2 + slack(report.chi2) {
        return Err(Error::Config(format!(
            "divergence ordering violated: tv={} kl={} chi2={}",
            report.tv, report.kl, report.chi2
        )));
    }
    Ok(report)
}
