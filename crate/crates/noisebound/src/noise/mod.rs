//! Additive-noise channels and their divergence kernels.
//!
//! A channel maps an input vector x to Y = x + m·N, where N has i.i.d.
//! standard coordinates (Gaussian, Laplace, or Uniform on [-1, 1]) and
//! m > 0 is the noise magnitude. For two inputs x, x' the channel-output
//! divergence D_f(P_{x+mN} ‖ P_{x'+mN}) has closed forms that depend on the
//! inputs only through ‖x − x'‖ in the geometry matched to the family:
//!
//! | family   | norm | KL                    | TV                      | χ²                     |
//! |----------|------|-----------------------|-------------------------|------------------------|
//! | Gaussian | ℓ2   | d²/(2m²)  (exact)     | d/(2m)        (bound)   | e^{d²/m²} − 1  (exact) |
//! | Laplace  | ℓ1   | d/m       (bound)     | √(d/(2m))     (bound)   | e^{d/m} − 1    (bound) |
//! | Uniform  | |·|  | ∞·1[x≠x'] (exact)     | min{1, d/(2m)} (exact)  | ∞·1[x≠x']      (exact) |
//!
//! with d = ‖x − x'‖ in the family norm; TV values are clamped to 1 (TV
//! never exceeds 1). Uniform closed forms are one-dimensional. Exact
//! one-dimensional forms for a scalar shift are in [`cost_exact_1d`]; an
//! independent quadrature oracle lives in [`oracle_divergence_1d`].
//!
//! [`delta`] gives the overlap mass δ(A, m) = P{‖mN‖ ≤ A/2 ... } used by the
//! time-decay factors: the probability that a draw of the channel noise
//! keeps two inputs at distance ≤ A indistinguishable enough to contract;
//! δ is exact for Gaussian and Uniform and an upper bound for Laplace.

mod oracle;

pub use oracle::{oracle_divergence_1d, QuadratureSpec};

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Noise family of an additive channel. Each family is paired with the norm
/// in which its divergence kernels are measured: ℓ2 for Gaussian, ℓ1 for
/// Laplace, and the scalar absolute value for Uniform (whose closed forms
/// are defined only in dimension 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    Gaussian,
    Laplace,
    Uniform,
}

/// Vector norm selector used by estimators and clipping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L1,
    L2,
}

impl NormKind {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => v.iter().map(|a| a.abs()).sum(),
            NormKind::L2 => v.iter().map(|a| a * a).sum::<f64>().sqrt(),
        }
    }

    pub fn distance(self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        Ok(match self {
            NormKind::L1 => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
            NormKind::L2 => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        })
    }
}

impl NoiseModel {
    /// The norm in which this family's kernels measure input separation.
    pub fn norm(self) -> NormKind {
        match self {
            NoiseModel::Gaussian => NormKind::L2,
            NoiseModel::Laplace => NormKind::L1,
            NoiseModel::Uniform => NormKind::L2, // scalar: |·| = ℓ1 = ℓ2 in 1-D
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseModel::Gaussian => "gaussian",
            NoiseModel::Laplace => "laplace",
            NoiseModel::Uniform => "uniform",
        }
    }
}

/// Divergence selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    Kl,
    Tv,
    Chi2,
}

impl DivergenceKind {
    pub fn name(self) -> &'static str {
        match self {
            DivergenceKind::Kl => "kl",
            DivergenceKind::Tv => "tv",
            DivergenceKind::Chi2 => "chi2",
        }
    }
}

/// Whether a returned value is the exact divergence or only an upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    Exact,
    UpperBound,
}

impl Exactness {
    pub fn name(self) -> &'static str {
        match self {
            Exactness::Exact => "exact",
            Exactness::UpperBound => "upper_bound",
        }
    }
    /// Combine: a quantity built from several parts is exact only if every
    /// part is.
    pub fn and(self, other: Exactness) -> Exactness {
        if self == Exactness::Exact && other == Exactness::Exact {
            Exactness::Exact
        } else {
            Exactness::UpperBound
        }
    }
}

/// A divergence value together with its exactness flag. `value` may be
/// `f64::INFINITY` (uniform noise with distinct inputs, or an overflowing
/// exponential moment); infinity is an answer, not an error, and is flagged
/// `UpperBound` when it arises from overflow of a finite formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cost {
    pub value: f64,
    pub exactness: Exactness,
}

impl Cost {
    fn exact(value: f64) -> Cost {
        Cost {
            value,
            exactness: Exactness::Exact,
        }
    }
    fn bound(value: f64) -> Cost {
        Cost {
            value,
            exactness: Exactness::UpperBound,
        }
    }
}

/// Standard Gaussian upper tail Φ̄(x) = P{N(0,1) > x}.
///
/// Saturates cleanly: Φ̄(0) = 1/2, Φ̄(40) underflows to 0.
pub fn gaussian_ccdf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Overlap mass δ(A, m): the contraction weight contributed by one noisy
/// iteration when consecutive inputs are at most A apart in the family norm
/// and the noise magnitude is m.
///
/// Gaussian: 1 − 2Φ̄(A/(2m)) (exact). Laplace: 1 − e^{−A/m} (upper bound).
/// Uniform: min{1, A/(2m)} (exact, one-dimensional channel).
///
/// Monotone: nondecreasing in A, nonincreasing in m; δ(0, m) = 0; δ → 1 as
/// A/m → ∞.
pub fn delta(noise: NoiseModel, a: f64, m: f64) -> f64 {
    debug_assert!(a >= 0.0, "separation must be nonnegative");
    debug_assert!(m > 0.0, "noise magnitude must be positive");
    match noise {
        NoiseModel::Gaussian => 1.0 - 2.0 * gaussian_ccdf(a / (2.0 * m)),
        NoiseModel::Laplace => 1.0 - (-a / m).exp(),
        NoiseModel::Uniform => (a / (2.0 * m)).min(1.0),
    }
}

/// Closed-form divergence kernel C_f(x, x'; m) between the channel outputs
/// for inputs `x` and `x'` at noise magnitude `m` (see the module table).
///
/// Errors on mismatched dimensions and on uniform noise outside dimension 1;
/// requires m > 0.
pub fn cost(
    f: DivergenceKind,
    noise: NoiseModel,
    x: &[f64],
    x_prime: &[f64],
    m: f64,
) -> Result<Cost> {
    if x.len() != x_prime.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: x_prime.len(),
        });
    }
    if m <= 0.0 || !m.is_finite() {
        return Err(Error::Config(format!(
            "noise magnitude must be positive and finite (got {m})"
        )));
    }
    match noise {
        NoiseModel::Gaussian => {
            let d = NormKind::L2.distance(x, x_prime)?;
            Ok(match f {
                DivergenceKind::Kl => Cost::exact(d * d / (2.0 * m * m)),
                DivergenceKind::Chi2 => {
                    let v = (d * d / (m * m)).exp() - 1.0;
                    if v.is_finite() {
                        Cost::exact(v)
                    } else {
                        Cost::bound(f64::INFINITY) // overflow of a finite exact form
                    }
                }
                DivergenceKind::Tv => Cost::bound((d / (2.0 * m)).min(1.0)),
            })
        }
        NoiseModel::Laplace => {
            let d = NormKind::L1.distance(x, x_prime)?;
            Ok(match f {
                DivergenceKind::Kl => Cost::bound(d / m),
                DivergenceKind::Chi2 => Cost::bound((d / m).exp() - 1.0),
                DivergenceKind::Tv => Cost::bound((d / (2.0 * m)).sqrt().min(1.0)),
            })
        }
        NoiseModel::Uniform => {
            if x.len() != 1 {
                return Err(Error::UniformNeedsDim1 { dim: x.len() });
            }
            let d = (x[0] - x_prime[0]).abs();
            Ok(match f {
                DivergenceKind::Kl | DivergenceKind::Chi2 => {
                    // Disjoint support slivers whenever the inputs differ.
                    Cost::exact(if d == 0.0 { 0.0 } else { f64::INFINITY })
                }
                DivergenceKind::Tv => Cost::exact((d / (2.0 * m)).min(1.0)),
            })
        }
    }
}

/// Exact one-dimensional divergence between channel outputs for scalar
/// inputs 0 and `shift`, i.e. between the laws of m·N and shift + m·N.
/// With v = shift/m:
///
/// * Gaussian: KL = v²/2, χ² = e^{v²} − 1, TV = 1 − 2Φ̄(|v|/2)
/// * Laplace: KL = |v| + e^{−|v|} − 1, χ² = (2/3)e^{|v|} + (1/3)e^{−2|v|} − 1
/// * Uniform: TV = min{1, |v|/2}
///
/// Any other combination has no exact form here and errors.
pub fn cost_exact_1d(f: DivergenceKind, noise: NoiseModel, shift: f64, m: f64) -> Result<f64> {
    if m <= 0.0 || !m.is_finite() {
        return Err(Error::Config(format!(
            "noise magnitude must be positive and finite (got {m})"
        )));
    }
    let v = (shift / m).abs();
    match (noise, f) {
        (NoiseModel::Gaussian, DivergenceKind::Kl) => Ok(v * v / 2.0),
        (NoiseModel::Gaussian, DivergenceKind::Chi2) => Ok((v * v).exp() - 1.0),
        (NoiseModel::Gaussian, DivergenceKind::Tv) => Ok(1.0 - 2.0 * gaussian_ccdf(v / 2.0)),
        (NoiseModel::Laplace, DivergenceKind::Kl) => Ok(v + (-v).exp() - 1.0),
        (NoiseModel::Laplace, DivergenceKind::Chi2) => {
            Ok(2.0 / 3.0 * v.exp() + (-2.0 * v).exp() / 3.0 - 1.0)
        }
        (NoiseModel::Uniform, DivergenceKind::Tv) => Ok((v / 2.0).min(1.0)),
        (noise, f) => Err(Error::NoExactForm {
            divergence: f.name(),
            noise: noise.name(),
        }),
    }
}

/// Draw one standard noise vector with `dim` i.i.d. coordinates:
/// N(0,1) for Gaussian, scale-1 Laplace (variance 2) for Laplace,
/// Uniform on [-1, 1] for Uniform.
pub fn sample_noise<R: Rng + ?Sized>(noise: NoiseModel, dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|_| match noise {
            NoiseModel::Gaussian => StandardNormal.sample(rng),
            NoiseModel::Laplace => {
                // magnitude ~ Exp(1), independent fair sign
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    e
                } else {
                    -e
                }
            }
            NoiseModel::Uniform => rng.random_range(-1.0..=1.0),
        })
        .collect()
}

pub const ALL_NOISE: [NoiseModel; 3] = [
    NoiseModel::Gaussian,
    NoiseModel::Laplace,
    NoiseModel::Uniform,
];
pub const ALL_DIVERGENCES: [DivergenceKind; 3] =
    [DivergenceKind::Kl, DivergenceKind::Tv, DivergenceKind::Chi2];
