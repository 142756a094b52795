//! Estimators over sets of per-example gradient vectors.
//!
//! A [`GradientSampleSet`] is n ≥ 2 vectors of one common dimension,
//! typically the per-example gradients observed at one iteration. The
//! estimators here are the quantities the bound engine consumes:
//!
//! * [`variance`] — population variance about the mean, summed over
//!   coordinates: (1/n)·Σᵢ ‖gᵢ − ḡ‖₂². Equivalently min_a (1/n)Σ‖gᵢ − a‖₂².
//! * [`mmae`] — minimum mean absolute error: (1/n)·Σᵢ ‖gᵢ − med‖₁ with the
//!   per-coordinate (lower) median. Equivalently min_a (1/n)Σ‖gᵢ − a‖₁.
//! * [`centered_norm_mean`] — (1/n)·Σᵢ ‖gᵢ − e‖ for a chosen norm and
//!   center (mean or per-coordinate lower median).
//! * [`exp_moment`] — (1/n)·Σᵢ exp(scale·‖gᵢ − e‖^p) − 1 with p ∈ {1, 2};
//!   overflow propagates as +∞ rather than failing.
//! * [`loss_variance`] — population variance of scalar losses.
//! * [`pair_cost_means`] — mean closed-form divergence kernel over pairs of
//!   distinct samples (the per-iteration channel-cost estimate).
//! * [`spearman`] — rank correlation with tie averaging, used to check
//!   monotone trends across experiment sweeps.
//!
//! [`implied_subgaussian`] converts a loss assumption into the sub-Gaussian
//! constant the KL-type bounds need: a Bounded(A) loss is A/2-sub-Gaussian.

use crate::error::{Error, Result};
use crate::noise::{cost, Cost, DivergenceKind, Exactness, NoiseModel, NormKind};
use rand::Rng;

/// A set of n ≥ 2 same-dimension sample vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSampleSet {
    rows: Vec<Vec<f64>>,
    dim: usize,
}

impl GradientSampleSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::TooFewSamples { got: rows.len() });
        }
        let dim = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::RaggedSamples {
                    row: i,
                    got: r.len(),
                    expected: dim,
                });
            }
        }
        Ok(GradientSampleSet { rows, dim })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Coordinate-wise mean vector.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in &self.rows {
            for (mi, ri) in m.iter_mut().zip(r) {
                *mi += ri;
            }
        }
        let n = self.rows.len() as f64;
        m.iter_mut().for_each(|mi| *mi /= n);
        m
    }

    /// Coordinate-wise lower median: for an even count the smaller of the
    /// two middle order statistics, so the center is always a data value.
    pub fn median(&self) -> Vec<f64> {
        let mut med = vec![0.0; self.dim];
        let mut col = vec![0.0; self.rows.len()];
        for c in 0..self.dim {
            for (v, row) in col.iter_mut().zip(&self.rows) {
                *v = row[c];
            }
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            med[c] = col[(col.len() - 1) / 2];
        }
        med
    }
}

/// Choice of centering vector for the centered moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Center {
    Mean,
    Median,
}

fn center_of(set: &GradientSampleSet, center: Center) -> Vec<f64> {
    match center {
        Center::Mean => set.mean(),
        Center::Median => set.median(),
    }
}

/// Population variance about the mean, summed over coordinates:
/// (1/n)·Σᵢ ‖gᵢ − ḡ‖₂². This is the minimum over all centers a of
/// (1/n)·Σᵢ ‖gᵢ − a‖₂².
pub fn variance(set: &GradientSampleSet) -> f64 {
    let mean = set.mean();
    set.rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&mean)
                .map(|(x, m)| (x - m) * (x - m))
                .sum::<f64>()
        })
        .sum::<f64>()
        / set.n() as f64
}

/// Minimum mean absolute error: (1/n)·Σᵢ ‖gᵢ − med‖₁ with the per-coordinate
/// lower median, which attains min_a (1/n)·Σᵢ ‖gᵢ − a‖₁.
pub fn mmae(set: &GradientSampleSet) -> f64 {
    let med = set.median();
    set.rows
        .iter()
        .map(|r| r.iter().zip(&med).map(|(x, m)| (x - m).abs()).sum::<f64>())
        .sum::<f64>()
        / set.n() as f64
}

/// Mean centered norm (1/n)·Σᵢ ‖gᵢ − e‖ in the given norm.
pub fn centered_norm_mean(set: &GradientSampleSet, norm: NormKind, center: Center) -> f64 {
    centered_norm_power_mean(set, norm, center, 1.0)
}

/// Mean power of the centered norm, (1/n)·Σᵢ ‖gᵢ − e‖^p. The TV-type
/// Laplace bound consumes p = 1/2.
pub fn centered_norm_power_mean(
    set: &GradientSampleSet,
    norm: NormKind,
    center: Center,
    p: f64,
) -> f64 {
    let e = center_of(set, center);
    set.rows
        .iter()
        .map(|r| {
            let d: Vec<f64> = r.iter().zip(&e).map(|(x, c)| x - c).collect();
            norm.of(&d).powf(p)
        })
        .sum::<f64>()
        / set.n() as f64
}

/// Centered exponential moment (1/n)·Σᵢ exp(scale·‖gᵢ − e‖^p) − 1 with
/// p = 2 when `squared`, else p = 1. Overflow is reported as +∞, not an
/// error, and downstream bound evaluation propagates it.
pub fn exp_moment(
    set: &GradientSampleSet,
    norm: NormKind,
    scale: f64,
    squared: bool,
    center: Center,
) -> f64 {
    let e = center_of(set, center);
    let mean = set
        .rows
        .iter()
        .map(|r| {
            let d: Vec<f64> = r.iter().zip(&e).map(|(x, c)| x - c).collect();
            let nv = norm.of(&d);
            (scale * if squared { nv * nv } else { nv }).exp()
        })
        .sum::<f64>()
        / set.n() as f64;
    mean - 1.0
}

/// Loss-tail assumption attached to a bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LossAssumption {
    /// Loss values lie in an interval of width `a` (e.g. 0–1 loss: a = 1).
    Bounded { a: f64 },
    /// Loss is σ-sub-Gaussian under the data distribution.
    SubGaussian { sigma: f64 },
    /// Loss has finite variance with standard deviation `sigma_hat`.
    FiniteVariance { sigma_hat: f64 },
}

impl LossAssumption {
    pub fn name(self) -> &'static str {
        match self {
            LossAssumption::Bounded { .. } => "bounded",
            LossAssumption::SubGaussian { .. } => "sub_gaussian",
            LossAssumption::FiniteVariance { .. } => "finite_variance",
        }
    }
}

/// The sub-Gaussian constant implied by an assumption: a loss bounded in an
/// interval of width A is A/2-sub-Gaussian; a finite-variance assumption
/// implies none and errors.
pub fn implied_subgaussian(assumption: LossAssumption) -> Result<f64> {
    match assumption {
        LossAssumption::Bounded { a } => Ok(a / 2.0),
        LossAssumption::SubGaussian { sigma } => Ok(sigma),
        LossAssumption::FiniteVariance { .. } => Err(Error::NoSubGaussianConstant {
            assumption: "finite_variance",
        }),
    }
}

/// Population variance of scalar losses (needs ≥ 2 values).
pub fn loss_variance(losses: &[f64]) -> Result<f64> {
    if losses.len() < 2 {
        return Err(Error::TooFewSamples { got: losses.len() });
    }
    let n = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / n;
    Ok(losses.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
}

/// Mean closed-form channel cost over pairs of distinct samples, for the
/// three divergences at a common magnitude, estimating
/// E C_f(g(W, Z), g(W, Z'); m) from one sample set.
///
/// Up to 64 samples every ordered pair of distinct rows enters (the kernel
/// is symmetric, so unordered enumeration is equivalent); above that, 2048
/// pairs are drawn uniformly from the rng to keep wide models cheap. An
/// infinite kernel value makes the mean +∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCostMeans {
    pub kl: Cost,
    pub tv: Cost,
    pub chi2: Cost,
}

pub fn pair_cost_means<R: Rng + ?Sized>(
    set: &GradientSampleSet,
    noise: NoiseModel,
    m: f64,
    rng: &mut R,
) -> Result<PairCostMeans> {
    let n = set.n();
    let mut acc = [(0.0f64, Exactness::Exact); 3];
    let mut count = 0usize;
    let mut add = |set: &GradientSampleSet, i: usize, j: usize| -> Result<()> {
        for (slot, f) in
            acc.iter_mut()
                .zip([DivergenceKind::Kl, DivergenceKind::Tv, DivergenceKind::Chi2])
        {
            let c = cost(f, noise, &set.rows[i], &set.rows[j], m)?;
            slot.0 += c.value;
            slot.1 = slot.1.and(c.exactness);
        }
        count += 1;
        Ok(())
    };
    if n <= 64 {
        for i in 0..n {
            for j in (i + 1)..n {
                add(set, i, j)?;
            }
        }
    } else {
        for _ in 0..2048 {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            add(set, i, j)?;
        }
    }
    let k = count as f64;
    Ok(PairCostMeans {
        kl: Cost {
            value: acc[0].0 / k,
            exactness: acc[0].1,
        },
        tv: Cost {
            value: acc[1].0 / k,
            exactness: acc[1].1,
        },
        chi2: Cost {
            value: acc[2].0 / k,
            exactness: acc[2].1,
        },
    })
}

/// Ranks with ties averaged: the rank of a value is the mean of the
/// positions its ties would occupy in sorted order (1-based).
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of the tie-averaged
/// ranks. Returns an error for mismatched lengths, fewer than two points,
/// non-finite inputs, or a constant sequence (undefined correlation).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::TooFewSamples { got: xs.len() });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Config(
            "spearman correlation needs finite inputs".into(),
        ));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Config(
            "spearman correlation is undefined for a constant sequence".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}
