//! Datasets, losses, synthetic data, label corruption, and gap measurement.
//!
//! The evaluation loss throughout is the 0–1 loss (bounded in [0, 1], so
//! the default tail assumption downstream is Bounded(A = 1), implying a
//! 1/2-sub-Gaussian loss); training optimizes the cross-entropy surrogate
//! from [`model`]. The generalization gap of a trained parameter is the
//! test-minus-train difference of the 0–1 loss.
//!
//! Synthetic data comes from [`synth_blobs`]: class-balanced Gaussian
//! clusters with deterministically placed means, so two seeds draw
//! independent samples of the *same* population — a train set and a test
//! set generated with different seeds are honestly i.i.d. from one
//! distribution, and their disjointness is auditable through stable
//! example ids.

pub mod model;

pub use model::{ModelSpec, Workspace};

use crate::error::{Error, Result};
use crate::seeding::{stream_rng, Stream};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

/// Where a dataset came from; synthetic sets carry the generator seed.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Provenance {
    Synthetic { seed: u64 },
    Csv { path: String },
}

/// A labeled classification dataset. `ids` are stable per-example
/// identities (synthetic data only) used to audit that two splits are
/// disjoint; `corrupted` lists indices whose labels were flipped by
/// [`corrupt_labels`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub provenance: Provenance,
    pub ids: Option<Vec<u64>>,
    pub corrupted: Vec<usize>,
}

impl LabeledDataset {
    pub fn n(&self) -> usize {
        self.features.len()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, |f| f.len())
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dim();
        for (i, f) in self.features.iter().enumerate() {
            if f.len() != dim {
                return Err(Error::RaggedSamples {
                    row: i,
                    got: f.len(),
                    expected: dim,
                });
            }
        }
        if self.labels.len() != self.features.len() {
            return Err(Error::DimensionMismatch {
                left: self.labels.len(),
                right: self.features.len(),
            });
        }
        if let Some(bad) = self.labels.iter().position(|l| *l >= self.classes) {
            return Err(Error::Config(format!(
                "label {} at row {bad} out of range for {} classes",
                self.labels[bad], self.classes
            )));
        }
        Ok(())
    }
}

/// Stable example identity: a bijective mix of (generator seed, row index).
fn example_id(seed: u64, idx: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(idx.wrapping_mul(0xd134_2543_de82_ef95));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^ (z >> 31)
}

/// Deterministic, well-separated unit directions for cluster means: the
/// signed coordinate axes first, then diagonal combinations.
fn mean_direction(c: usize, dim: usize) -> Vec<f64> {
    let mut dir = vec![0.0; dim];
    if c < 2 * dim {
        dir[c / 2] = if c.is_multiple_of(2) { 1.0 } else { -1.0 };
    } else {
        // beyond the axes: spread over two axes with alternating signs
        let a = (c / 2) % dim;
        let b = (c / 2 + 1 + c % 2) % dim;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        dir[a] = s;
        dir[b] = if c.is_multiple_of(2) { s } else { -s };
    }
    dir
}

/// Class-balanced Gaussian blobs: class c is N(μ_c, I) with
/// ‖μ_c‖ = separation/2 along a deterministic direction, so `separation`
/// is the distance scale between opposing cluster centers. Counts are as
/// equal as possible (the first n mod classes classes get one extra).
/// Example order is shuffled by the seed; feature draws and the shuffle are
/// the only randomness — the population itself is seed-independent.
pub fn synth_blobs(
    n: usize,
    dim: usize,
    classes: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if dim == 0 || classes == 0 || n == 0 {
        return Err(Error::Config(format!(
            "synth_blobs needs positive n, dim, classes (got n={n}, dim={dim}, classes={classes})"
        )));
    }
    let mut rng = stream_rng(seed, Stream::Data, 0, 0);
    let mut labels = Vec::with_capacity(n);
    for c in 0..classes {
        let count = n / classes + usize::from(c < n % classes);
        labels.extend(std::iter::repeat_n(c, count));
    }
    labels.shuffle(&mut rng);

    let means: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            mean_direction(c, dim)
                .into_iter()
                .map(|d| d * separation / 2.0)
                .collect()
        })
        .collect();

    let features: Vec<Vec<f64>> = labels
        .iter()
        .map(|&c| {
            means[c]
                .iter()
                .map(|mu| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    mu + noise
                })
                .collect()
        })
        .collect();

    let ids = (0..n as u64).map(|i| example_id(seed, i)).collect();
    let ds = LabeledDataset {
        features,
        labels,
        classes,
        provenance: Provenance::Synthetic { seed },
        ids: Some(ids),
        corrupted: Vec::new(),
    };
    ds.validate()?;
    Ok(ds)
}

/// Flip exactly ⌊alpha·n⌋ labels, chosen uniformly without replacement, to
/// a uniformly random *different* class. The returned dataset records the
/// corrupted indices (sorted); ids are unchanged, because the examples are
/// the same points with relabeled targets.
pub fn corrupt_labels(dataset: &LabeledDataset, alpha: f64, seed: u64) -> Result<LabeledDataset> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!(
            "corruption fraction must be in [0,1], got {alpha}"
        )));
    }
    let count = (alpha * dataset.n() as f64).floor() as usize;
    if count == 0 {
        let mut out = dataset.clone();
        out.corrupted = Vec::new();
        return Ok(out);
    }
    if dataset.classes < 2 {
        return Err(Error::CorruptionNeedsClasses);
    }
    let mut rng = stream_rng(seed, Stream::Data, 1, 0);
    let mut indices: Vec<usize> = (0..dataset.n()).collect();
    indices.shuffle(&mut rng);
    indices.truncate(count);
    indices.sort_unstable();

    let mut out = dataset.clone();
    for &i in &indices {
        // uniform over the classes-1 labels that differ from the current one
        let r = rng.random_range(0..dataset.classes - 1);
        out.labels[i] = if r >= out.labels[i] { r + 1 } else { r };
    }
    out.corrupted = indices;
    Ok(out)
}

/// Mean 0–1 loss of the model's argmax prediction on a dataset.
pub fn zero_one_loss(model: &ModelSpec, params: &[f64], data: &LabeledDataset) -> Result<f64> {
    data.validate()?;
    if data.n() == 0 {
        return Err(Error::Config("0-1 loss of an empty dataset".into()));
    }
    let mut ws = model.workspace();
    let mut wrong = 0usize;
    for (x, y) in data.features.iter().zip(&data.labels) {
        if model.predict(params, x, &mut ws)? != *y {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / data.n() as f64)
}

/// Mean cross-entropy surrogate loss on a dataset.
pub fn surrogate_loss_mean(
    model: &ModelSpec,
    params: &[f64],
    data: &LabeledDataset,
) -> Result<f64> {
    let mut ws = model.workspace();
    let mut total = 0.0;
    for (x, y) in data.features.iter().zip(&data.labels) {
        total += model.surrogate_loss(params, x, *y, &mut ws)?;
    }
    Ok(total / data.n() as f64)
}

/// Train/test 0–1 losses and their difference for one parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub train_loss: f64,
    pub test_loss: f64,
    /// test − train
    pub gap: f64,
}

/// Measure the generalization gap (test − train 0–1 loss). When both sets
/// carry example ids the split is audited: any shared id is an error, since
/// a leaking split makes the gap meaningless.
pub fn measure_gap(
    model: &ModelSpec,
    params: &[f64],
    train: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<GapReport> {
    if let (Some(a), Some(b)) = (&train.ids, &test.ids) {
        let seen: HashSet<u64> = a.iter().cloned().collect();
        if let Some(shared) = b.iter().find(|id| seen.contains(id)) {
            return Err(Error::OverlappingSplits { id: *shared });
        }
    }
    let train_loss = zero_one_loss(model, params, train)?;
    let test_loss = zero_one_loss(model, params, test)?;
    Ok(GapReport {
        train_loss,
        test_loss,
        gap: test_loss - train_loss,
    })
}

/// Header handling for [`load_csv`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeaderMode {
    /// Treat the first row as a header iff its first field is non-numeric.
    #[default]
    Auto,
    Always,
    Never,
}

/// Expectations for a CSV dataset; `classes` overrides the inferred count
/// (max label + 1) and is validated against the data.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub header: HeaderMode,
    pub classes: Option<usize>,
}

/// Load a numeric CSV whose final column is an integer class label.
/// Parse failures report the 1-based line number.
pub fn load_csv(path: impl AsRef<Path>, schema: CsvSchema) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let pstr = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: pstr.clone(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);

    let mut features = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| Error::Io {
            path: pstr.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 1 {
            let is_header = match schema.header {
                HeaderMode::Always => true,
                HeaderMode::Never => false,
                HeaderMode::Auto => fields[0].parse::<f64>().is_err(),
            };
            if is_header {
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(Error::CsvParse {
                path: pstr,
                line: lineno,
                detail: format!(
                    "need at least one feature and a label, got {} fields",
                    fields.len()
                ),
            });
        }
        if let Some(w) = width {
            if fields.len() != w {
                return Err(Error::CsvParse {
                    path: pstr,
                    line: lineno,
                    detail: format!("expected {w} fields, got {}", fields.len()),
                });
            }
        } else {
            width = Some(fields.len());
        }
        let mut row = Vec::with_capacity(fields.len() - 1);
        for f in &fields[..fields.len() - 1] {
            row.push(f.parse::<f64>().map_err(|e| Error::CsvParse {
                path: pstr.clone(),
                line: lineno,
                detail: format!("bad feature value {f:?}: {e}"),
            })?);
        }
        let label = fields[fields.len() - 1]
            .parse::<usize>()
            .map_err(|e| Error::CsvParse {
                path: pstr.clone(),
                line: lineno,
                detail: format!("bad label {:?}: {e}", fields[fields.len() - 1]),
            })?;
        features.push(row);
        labels.push(label);
    }
    if features.is_empty() {
        return Err(Error::CsvParse {
            path: pstr,
            line: 0,
            detail: "no data rows".into(),
        });
    }
    let inferred = labels.iter().max().unwrap() + 1;
    let classes = match schema.classes {
        Some(c) if c < inferred => {
            return Err(Error::Config(format!(
                "schema declares {c} classes but data holds label {}",
                inferred - 1
            )))
        }
        Some(c) => c,
        None => inferred,
    };
    let ds = LabeledDataset {
        features,
        labels,
        classes,
        provenance: Provenance::Csv { path: pstr },
        ids: None,
        corrupted: Vec::new(),
    };
    ds.validate()?;
    Ok(ds)
}

/// Write a dataset as numeric CSV (features then the integer label), using
/// shortest-round-trip float formatting so load(save(d)) reproduces the
/// feature values bit-exactly.
pub fn save_csv(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let pstr = path.display().to_string();
    let mut out =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|source| Error::Io {
            path: pstr.clone(),
            source,
        })?);
    let write = |out: &mut dyn Write, s: String| -> Result<()> {
        out.write_all(s.as_bytes()).map_err(|source| Error::Io {
            path: pstr.clone(),
            source,
        })
    };
    for (x, y) in dataset.features.iter().zip(&dataset.labels) {
        let mut line = String::new();
        for v in x {
            line.push_str(&format!("{v}"));
            line.push(',');
        }
        line.push_str(&format!("{y}\n"));
        write(&mut out, line)?;
    }
    Ok(())
}
