//! Epoch driver: shuffled minibatches, linear learning-rate annealing,
//! data-parallel delta accumulation with a deterministic reduction order,
//! and per-epoch energy/throughput reports.
//!
//! Within a minibatch every per-sample delta is computed against the
//! minibatch-start weights. Samples are accumulated in fixed-size chunks
//! (independent of worker count) and the chunk accumulators are merged in
//! ascending chunk order, so the final bits never depend on how many
//! workers ran.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{shuffle_epoch, EncodedSample, ProbabilityVector};
use crate::error::{Error, Result};
use crate::model::{init_weights, update_delta, sample_energy, WeightMatrix};

/// Fixed accumulation granularity; chunk boundaries must not move with the
/// worker count or determinism across worker counts is lost.
const REDUCTION_CHUNK: usize = 1024;

/// Abort threshold on any single weight magnitude.
const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Serialize)]
pub struct TrainingConfig {
    pub k_units: usize,
    pub window: usize,
    pub n_voc: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub minibatch: usize,
    pub seed: u64,
    /// 0 = use all available cores.
    pub workers: usize,
    /// Held-out probe set size for energy monitoring.
    pub probe_size: usize,
    /// First epoch index to run; nonzero when resuming from a checkpoint.
    pub start_epoch: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            k_units: 400,
            window: 11,
            n_voc: 20000,
            epochs: 15,
            lr0: 3e-4,
            minibatch: 10000,
            seed: 42,
            workers: 0,
            probe_size: 10000,
            start_epoch: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub energy: f64,
    pub samples_per_sec: f64,
    pub seconds: f64,
    pub lr: f64,
}

/// Linearly annealed learning rate: `lr0 * (1 - epoch / epochs)`.
/// Strictly positive for every scheduled epoch.
pub fn learning_rate(epoch: usize, cfg: &TrainingConfig) -> Result<f64> {
    if epoch >= cfg.epochs {
        return Err(Error::Config(format!(
            "epoch {epoch} out of range 0..{}",
            cfg.epochs
        )));
    }
    Ok(cfg.lr0 * (1.0 - epoch as f64 / cfg.epochs as f64))
}

/// Per-unit minibatch accumulator: the full update for a row is
/// `row * (1 - scale) + sparse`.
#[derive(Debug, Default, Clone)]
struct UnitAcc {
    scale: f64,
    sparse: BTreeMap<u32, f64>,
}

fn merge_acc(into: &mut BTreeMap<u32, UnitAcc>, from: BTreeMap<u32, UnitAcc>) {
    for (unit, acc) in from {
        let slot = into.entry(unit).or_default();
        slot.scale += acc.scale;
        for (col, v) in acc.sparse {
            *slot.sparse.entry(col).or_insert(0.0) += v;
        }
    }
}

fn chunk_deltas(
    weights: &WeightMatrix,
    samples: &[EncodedSample],
    indices: &[u32],
    p: &ProbabilityVector,
    eps: f64,
) -> Result<BTreeMap<u32, UnitAcc>> {
    let mut acc: BTreeMap<u32, UnitAcc> = BTreeMap::new();
    for &idx in indices {
        let (mu, d) = update_delta(weights, &samples[idx as usize], p, eps)?;
        let slot = acc.entry(mu as u32).or_default();
        slot.scale += d.scale;
        for (col, v) in d.sparse {
            *slot.sparse.entry(col).or_insert(0.0) += v;
        }
    }
    Ok(acc)
}

fn apply_minibatch(
    weights: &mut WeightMatrix,
    samples: &[EncodedSample],
    indices: &[u32],
    p: &ProbabilityVector,
    eps: f64,
) -> Result<()> {
    let chunks: Vec<BTreeMap<u32, UnitAcc>> = indices
        .par_chunks(REDUCTION_CHUNK)
        .map(|chunk| chunk_deltas(weights, samples, chunk, p, eps))
        .collect::<Result<Vec<_>>>()?;
    let mut merged: BTreeMap<u32, UnitAcc> = BTreeMap::new();
    for c in chunks {
        merge_acc(&mut merged, c);
    }
    for (unit, acc) in merged {
        let row = weights.row_mut(unit as usize);
        let factor = 1.0 - acc.scale;
        for x in row.iter_mut() {
            *x = (*x as f64 * factor) as f32;
        }
        for (col, v) in acc.sparse {
            row[col as usize] = (row[col as usize] as f64 + v) as f32;
        }
        for &x in row.iter() {
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    unit: unit as usize,
                });
            }
            if x.abs() as f64 > DIVERGENCE_LIMIT {
                return Err(Error::Diverged {
                    unit: unit as usize,
                    limit: DIVERGENCE_LIMIT,
                });
            }
        }
    }
    Ok(())
}

/// Mean per-sample energy over a fixed probe set.
pub fn probe_energy(
    weights: &WeightMatrix,
    probe: &[EncodedSample],
    p: &ProbabilityVector,
) -> Result<f64> {
    if probe.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0f64;
    for s in probe {
        total += sample_energy(weights, s, p)?;
    }
    Ok(total / probe.len() as f64)
}

/// Runs the full training schedule from freshly initialized weights.
pub fn train(
    samples: &[EncodedSample],
    p: &ProbabilityVector,
    cfg: &TrainingConfig,
) -> Result<(WeightMatrix, Vec<EpochReport>)> {
    let mut weights = init_weights(cfg.k_units, cfg.n_voc, cfg.seed);
    let reports = train_into(&mut weights, samples, p, cfg, |_, _, _| Ok(()))?;
    Ok((weights, reports))
}

/// Runs epochs `cfg.start_epoch..cfg.epochs` on existing weights, invoking
/// `on_epoch(epoch, weights, report)` after each epoch (checkpointing hook).
pub fn train_into(
    weights: &mut WeightMatrix,
    samples: &[EncodedSample],
    p: &ProbabilityVector,
    cfg: &TrainingConfig,
    mut on_epoch: impl FnMut(usize, &WeightMatrix, &EpochReport) -> Result<()>,
) -> Result<Vec<EpochReport>> {
    if samples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if cfg.epochs == 0 || cfg.start_epoch >= cfg.epochs {
        return Err(Error::Config("nothing to train: no epochs scheduled".into()));
    }
    if cfg.minibatch == 0 {
        return Err(Error::Config("minibatch size must be >= 1".into()));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    // Probe set: fixed prefix of the first epoch's shuffle.
    let first_perm = shuffle_epoch(samples.len(), cfg.start_epoch as u64, cfg.seed);
    let probe: Vec<EncodedSample> = first_perm
        .iter()
        .take(cfg.probe_size.min(samples.len()))
        .map(|&i| samples[i as usize].clone())
        .collect();

    let mut reports = Vec::new();
    for epoch in cfg.start_epoch..cfg.epochs {
        let eps = learning_rate(epoch, cfg)?;
        let start = Instant::now();
        let perm = if epoch == cfg.start_epoch {
            first_perm.clone()
        } else {
            shuffle_epoch(samples.len(), epoch as u64, cfg.seed)
        };
        pool.install(|| -> Result<()> {
            for batch in perm.chunks(cfg.minibatch) {
                apply_minibatch(weights, samples, batch, p, eps)?;
            }
            Ok(())
        })?;
        let seconds = start.elapsed().as_secs_f64();
        let report = EpochReport {
            epoch,
            energy: probe_energy(weights, &probe, p)?,
            samples_per_sec: samples.len() as f64 / seconds.max(1e-12),
            seconds,
            lr: eps,
        };
        on_epoch(epoch, weights, &report)?;
        reports.push(report);
    }
    Ok(reports)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub k_units: usize,
    pub n_voc: usize,
    pub sample_count: usize,
    pub seconds_per_epoch: f64,
}

/// Measures one-epoch CPU time across a configuration grid. Samples are
/// synthesized to the requested count and vocabulary size from the given
/// window, so axes can be varied independently of any real corpus.
///
/// Each epoch is timed minibatch by minibatch and the per-epoch figure is
/// the median minibatch time scaled by the batch count. On shared machines
/// competing load arrives in bursts; individual minibatches are a few
/// milliseconds, so most land in quiet slices and the median discards the
/// contaminated ones.
pub fn benchmark_scaling(
    grid: &[(usize, usize, usize)], // (k_units, n_voc, sample_count)
    window: usize,
    minibatch: usize,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rows = Vec::new();
    for &(k_units, n_voc, sample_count) in grid {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<EncodedSample> = (0..sample_count)
            .map(|_| {
                let target = rng.gen_range(0..n_voc as u32);
                let mut idx: Vec<u32> = (0..window - 1)
                    .map(|_| rng.gen_range(0..n_voc as u32))
                    .collect();
                idx.push(n_voc as u32 + target);
                EncodedSample::from_indices(idx)
            })
            .collect();
        let p = ProbabilityVector::uniform(n_voc);
        let cfg = TrainingConfig {
            k_units,
            window,
            n_voc,
            epochs: 1,
            // Timing does not depend on the step size, and a near-zero rate
            // keeps the synthetic uniform-probability setup stable for any
            // grid point.
            lr0: 1e-10,
            minibatch,
            seed,
            workers: 1,
            probe_size: 0,
            start_epoch: 0,
        };
        let mut weights = init_weights(k_units, n_voc, seed);
        // full minibatches only; a short tail would skew the median
        let chunks: Vec<&[EncodedSample]> = samples
            .chunks(minibatch)
            .filter(|c| c.len() == minibatch)
            .collect();
        let mut per_batch: Vec<f64> = Vec::with_capacity(chunks.len());
        for chunk in &chunks {
            let chunk_cfg = TrainingConfig {
                minibatch: chunk.len(),
                ..cfg.clone()
            };
            let start = cpu_time::ProcessTime::now();
            train_into(&mut weights, chunk, &p, &chunk_cfg, |_, _, _| Ok(()))?;
            per_batch.push(start.elapsed().as_secs_f64());
        }
        per_batch.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = per_batch[per_batch.len() / 2];
        rows.push(ScalingRow {
            k_units,
            n_voc,
            sample_count,
            seconds_per_epoch: median * chunks.len() as f64,
        });
    }
    Ok(rows)
}
