//! The four experiment commands, each producing a [`Table`].
//!
//! Independent (seed, sweep-point) units run on the rayon pool; results
//! are collected in input order, so output is deterministic regardless of
//! scheduling. All randomness is derived from the per-run seeds.

use rayon::prelude::*;

use crate::cli::config::{
    BoundSection, DataSection, ExperimentKind, ModelSection, OptimizerSection, RootConfig,
};
use crate::error::{Error, Result};
use crate::learn::measure_gap;
use crate::noise::{cost, oracle_divergence_1d, QuadratureSpec};
use crate::optim::{initial_params, run_training};
use crate::stats::spearman;

/// One CSV cell. Integers and text print verbatim; floats print with 9
/// significant digits (`inf` / `nan` spelled out).
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// 9 significant digits, scientific: enough to reconstruct the run, stable
/// across platforms. Zero drops its sign bit (an empty sum is −0.0 in
/// IEEE arithmetic, which would leak a distracting minus into the CSV).
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if v == 0.0 {
        "0.00000000e0".to_string()
    } else {
        format!("{v:.8e}")
    }
}

/// An in-memory result table with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Table {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Column-wise mean and sample standard deviation (ddof = 1; a single row
/// has deviation 0) over a slice of equal-length metric vectors.
fn mean_std(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; width];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= k as f64;
    }
    let mut std = vec![0.0; width];
    if k > 1 {
        for row in rows {
            for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut std {
            *s = (*s / (k - 1) as f64).sqrt();
        }
    }
    (mean, std)
}

// ---------------------------------------------------------------------
// divergence
// ---------------------------------------------------------------------

/// Tabulate every (noise, divergence, shift, m) grid point: the
/// closed-form kernel next to the quadrature oracle.
pub fn cmd_divergence(config: &RootConfig) -> Result<Table> {
    config.check_kind(ExperimentKind::Divergence)?;
    let section = config.divergence.as_ref().ok_or_else(|| {
        Error::Config("the divergence command needs a [divergence] section".into())
    })?;
    section.validate()?;

    let mut grid = Vec::new();
    for &noise in &section.noises {
        for &f in &section.divergences {
            for &shift in &section.shifts {
                for &m in &section.mags {
                    grid.push((noise, f, shift, m));
                }
            }
        }
    }

    let rows: Vec<Vec<Cell>> = grid
        .par_iter()
        .map(|&(noise, f, shift, m)| -> Result<Vec<Cell>> {
            let closed = cost(f, noise, &[shift], &[0.0], m)?;
            let oracle = oracle_divergence_1d(f, noise, shift, m, QuadratureSpec::default())?;
            let abs_diff = if closed.value.is_infinite() && oracle.is_infinite() {
                0.0
            } else {
                (closed.value - oracle).abs()
            };
            Ok(vec![
                Cell::Text(noise.name().to_string()),
                Cell::Text(f.name().to_string()),
                Cell::Float(shift),
                Cell::Float(m),
                Cell::Float(closed.value),
                Cell::Float(oracle),
                Cell::Float(abs_diff),
                Cell::Text(closed.exactness.name().to_string()),
            ])
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new(
        [
            "noise",
            "divergence",
            "shift",
            "m",
            "closed_form",
            "oracle",
            "abs_diff",
            "exactness",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
    );
    table.rows = rows;
    Ok(table)
}

// ---------------------------------------------------------------------
// train
// ---------------------------------------------------------------------

/// One logged row of a single seed's run: the epoch number and the metric
/// vector `[train01, test01, gap, bounds…, grad_var_mean]`.
#[derive(Debug, Clone)]
pub struct EpochRow {
    pub epoch: usize,
    pub metrics: Vec<f64>,
}

/// All logged rows of one seed's run, in epoch order (epoch 0 first).
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<EpochRow>,
}

/// Train one seed and evaluate every configured bound at each checkpoint.
/// This is the unit of work behind both `train` and `sweep`; it is public
/// so programs can drive the same pipeline without going through CSV.
pub fn run_one_seed(
    data: &DataSection,
    model_section: &ModelSection,
    optimizer: &OptimizerSection,
    bounds: &[BoundSection],
    log_every: usize,
    seed: u64,
) -> Result<SeedRun> {
    data.validate()?;
    let train = data.train_set(seed)?;
    let test = data.test_set(seed)?;
    let pool = data.stats_pool_set(seed)?;
    if matches!(optimizer.stats, crate::optim::StatsMode::HoldOut { .. }) && pool.is_none() {
        return Err(Error::Config(
            "data.stats_pool must be positive when optimizer.stats = hold_out".into(),
        ));
    }
    let model = model_section.build(data.dim, data.classes)?;
    let checkpoint = optimizer.checkpoint_every(data.n_train, log_every);
    let spec = optimizer.build_run_spec(seed, checkpoint)?;

    let (_params, record) = run_training(&model, &train, &spec, pool.as_ref(), None)?;

    let mut rows = Vec::with_capacity(record.checkpoints.len() + 1);
    // Epoch 0: losses at the initial parameters; no iterations have run,
    // so every bound and the gradient-variance summary are zero.
    let w0 = initial_params(&model, &spec);
    let at_init = measure_gap(&model, &w0, &train, &test)?;
    rows.push(EpochRow {
        epoch: 0,
        metrics: [at_init.train_loss, at_init.test_loss, at_init.gap]
            .into_iter()
            .chain(std::iter::repeat_n(0.0, bounds.len()))
            .chain([0.0])
            .collect(),
    });

    let mut prev_t = 0usize;
    for (t, params) in &record.checkpoints {
        let gap = measure_gap(&model, params, &train, &test)?;
        let prefix = record.prefix(*t);
        let mut metrics = vec![gap.train_loss, gap.test_loss, gap.gap];
        for b in bounds {
            metrics.push(b.evaluate(&prefix)?);
        }
        let window = &record.iterations[prev_t..*t];
        let grad_var_mean =
            window.iter().map(|it| it.stats.variance).sum::<f64>() / window.len().max(1) as f64;
        metrics.push(grad_var_mean);
        rows.push(EpochRow {
            epoch: optimizer.epoch_of(*t, data.n_train),
            metrics,
        });
        prev_t = *t;
    }

    Ok(SeedRun { seed, rows })
}

fn metric_columns(bounds: &[BoundSection]) -> Vec<String> {
    let mut cols = vec![
        "train_loss01".to_string(),
        "test_loss01".to_string(),
        "gap".to_string(),
    ];
    cols.extend(bounds.iter().map(BoundSection::column_name));
    cols.push("grad_var_mean".to_string());
    cols
}

fn float_cells(metrics: &[f64]) -> impl Iterator<Item = Cell> + '_ {
    metrics.iter().map(|&v| Cell::Float(v))
}

/// Train every seed, then append per-epoch mean and sample-std rows (the
/// `seed` column reads `mean` / `std` there).
pub fn cmd_train(config: &RootConfig, seed_override: Option<&[u64]>) -> Result<Table> {
    config.check_kind(ExperimentKind::Train)?;
    let data = config.data()?;
    let model = config.model()?;
    let optimizer = config.optimizer()?;
    let mut run = config.run();
    if let Some(seeds) = seed_override {
        run.seeds = seeds.to_vec();
    }
    let seeds = run.effective_seeds()?;

    let runs: Vec<SeedRun> = seeds
        .par_iter()
        .map(|&s| run_one_seed(data, model, optimizer, &config.bounds, run.log_every, s))
        .collect::<Result<_>>()?;

    let mut columns = vec!["seed".to_string(), "epoch".to_string()];
    columns.extend(metric_columns(&config.bounds));
    let mut table = Table::new(columns);

    for sr in &runs {
        for row in &sr.rows {
            let mut cells = vec![Cell::Int(sr.seed), Cell::Int(row.epoch as u64)];
            cells.extend(float_cells(&row.metrics));
            table.push(cells);
        }
    }

    // Aggregates: every seed logs the same epoch grid (same config), so
    // aggregate positionally and report the first run's epoch numbers.
    let epochs = runs[0].rows.len();
    for (label, pick) in [("mean", 0usize), ("std", 1usize)] {
        for i in 0..epochs {
            let at_epoch: Vec<Vec<f64>> =
                runs.iter().map(|sr| sr.rows[i].metrics.clone()).collect();
            let (mean, std) = mean_std(&at_epoch);
            let stats = if pick == 0 { mean } else { std };
            let mut cells = vec![
                Cell::Text(label.to_string()),
                Cell::Int(runs[0].rows[i].epoch as u64),
            ];
            cells.extend(float_cells(&stats));
            table.push(cells);
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------
// fed
// ---------------------------------------------------------------------

/// Run the federation per seed and report one row per (seed, client),
/// then per-client mean/std rows across seeds.
pub fn cmd_fed(config: &RootConfig, seed_override: Option<&[u64]>) -> Result<Table> {
    config.check_kind(ExperimentKind::Fed)?;
    let fed = config.fed()?;
    fed.validate()?;
    let model_section = config.model()?;
    let model = model_section.build(fed.dim, fed.classes)?;
    let mut run = config.run();
    if let Some(seeds) = seed_override {
        run.seeds = seeds.to_vec();
    }
    let seeds = run.effective_seeds()?;

    // metrics per (seed, client): [n_k, rounds_participated, bound, gap]
    let per_seed: Vec<Vec<Vec<f64>>> = seeds
        .par_iter()
        .map(|&s| -> Result<Vec<Vec<f64>>> {
            let clients: Vec<_> = (0..fed.clients)
                .map(|k| fed.client_train_set(s, k))
                .collect::<Result<_>>()?;
            let traj = crate::fed::run_fed(&model, &fed.fed_config(s), &clients)?;
            let final_params = traj.final_params();
            (0..fed.clients)
                .map(|k| -> Result<Vec<f64>> {
                    let test = fed.client_test_set(s, k)?;
                    let gap = measure_gap(&model, final_params, &clients[k], &test)?;
                    let bound =
                        crate::fed::client_bound(&traj, k, fed.bound_a, fed.n_client)?.total;
                    Ok(vec![
                        fed.n_client as f64,
                        traj.participation(k).len() as f64,
                        bound,
                        gap.gap,
                    ])
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new(
        [
            "seed",
            "client",
            "n_k",
            "rounds_participated",
            "bound",
            "gap",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
    );
    for (s, rows) in seeds.iter().zip(&per_seed) {
        for (k, metrics) in rows.iter().enumerate() {
            let mut cells = vec![Cell::Int(*s), Cell::Int(k as u64)];
            cells.extend(float_cells(metrics));
            table.push(cells);
        }
    }
    for (label, pick) in [("mean", 0usize), ("std", 1usize)] {
        for k in 0..fed.clients {
            let across: Vec<Vec<f64>> = per_seed.iter().map(|rows| rows[k].clone()).collect();
            let (mean, std) = mean_std(&across);
            let stats = if pick == 0 { mean } else { std };
            let mut cells = vec![Cell::Text(label.to_string()), Cell::Int(k as u64)];
            cells.extend(float_cells(&stats));
            table.push(cells);
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------

/// Sweep one axis: per point, run every seed and keep the final logged
/// row. Per-point mean/std rows follow each point's seed rows; the last
/// row reports, per metric column, the rank correlation between the
/// per-point means and the axis values.
pub fn cmd_sweep(config: &RootConfig, seed_override: Option<&[u64]>) -> Result<Table> {
    config.check_kind(ExperimentKind::Sweep)?;
    let sweep = config.sweep()?;
    sweep.validate()?;
    let data = config.data()?;
    let model = config.model()?;
    let optimizer = config.optimizer()?;
    let mut run = config.run();
    if let Some(seeds) = seed_override {
        run.seeds = seeds.to_vec();
    }
    let seeds = run.effective_seeds()?;

    // Validate every point before spending compute on any of them.
    let points: Vec<(f64, DataSection, ModelSection, OptimizerSection)> = sweep
        .values
        .iter()
        .map(|&v| {
            let (d, m, o) = sweep.apply(v, data, model, optimizer)?;
            Ok((v, d, m, o))
        })
        .collect::<Result<_>>()?;

    let units: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();

    // Final logged row of each (point, seed) run.
    let finals: Vec<Vec<f64>> = units
        .par_iter()
        .map(|&(p, s)| -> Result<Vec<f64>> {
            let (_, ref d, ref m, ref o) = points[p];
            let sr = run_one_seed(d, m, o, &config.bounds, run.log_every, s)?;
            Ok(sr
                .rows
                .last()
                .expect("runs log at least epoch 0")
                .metrics
                .clone())
        })
        .collect::<Result<_>>()?;

    let mut columns = vec![sweep.axis.name().to_string(), "seed".to_string()];
    columns.extend(metric_columns(&config.bounds));
    let width = columns.len() - 2;
    let mut table = Table::new(columns);

    let mut point_means: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for (p, &(value, ..)) in points.iter().enumerate() {
        let rows: Vec<Vec<f64>> = units
            .iter()
            .zip(&finals)
            .filter(|((up, _), _)| *up == p)
            .map(|(_, metrics)| metrics.clone())
            .collect();
        for (&(_, s), metrics) in units.iter().filter(|(up, _)| *up == p).zip(&rows) {
            let mut cells = vec![Cell::Float(value), Cell::Int(s)];
            cells.extend(float_cells(metrics));
            table.push(cells);
        }
        let (mean, std) = mean_std(&rows);
        for (label, stats) in [("mean", &mean), ("std", &std)] {
            let mut cells = vec![Cell::Float(value), Cell::Text(label.to_string())];
            cells.extend(float_cells(stats));
            table.push(cells);
        }
        point_means.push(mean);
    }

    // Rank correlation of each column's per-point means against the axis.
    let axis: Vec<f64> = points.iter().map(|&(v, ..)| v).collect();
    let mut cells = vec![
        Cell::Text("all".to_string()),
        Cell::Text("spearman".to_string()),
    ];
    for c in 0..width {
        let col: Vec<f64> = point_means.iter().map(|m| m[c]).collect();
        cells.push(Cell::Float(spearman(&axis, &col).unwrap_or(f64::NAN)));
    }
    table.push(cells);
    Ok(table)
}
