//! GloVe trainer: AdaGrad descent on the weighted least-squares log-bilinear
//! objective J = sum f(X_ij) (w_i.w'_j + b_i + b'_j - ln X_ij)^2, where the
//! sum runs over both directions of every stored cell.
//!
//! Determinism: with one thread, the entire run is a pure function of the
//! matrix and the seed. Each epoch's visit order is a sort by keyed hash of
//! the cell pair, not a sequential shuffle, so adding cells to the matrix
//! cannot permute the relative order in which surviving cells are visited.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cooccur::CooccurrenceMatrix;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, derive_seed_indexed, splitmix64};

/// Clip bound on the weighted residual f(x) * diff.
const CLIP: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub dim: usize,
    pub x_max: f64,
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub rng_seed: u64,
}

impl HyperParams {
    pub fn with_seed(rng_seed: u64) -> Self {
        Self {
            dim: 100,
            x_max: 100.0,
            alpha: 0.75,
            learning_rate: 0.05,
            epochs: 25,
            rng_seed,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.dim < 1 {
            v.push("dim must satisfy dim >= 1".to_string());
        }
        if !(self.x_max > 0.0) {
            v.push("x_max must satisfy x_max > 0".to_string());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            v.push("alpha must satisfy 0 < alpha <= 1".to_string());
        }
        if !(self.learning_rate > 0.0) {
            v.push("learning_rate must satisfy learning_rate > 0".to_string());
        }
        if self.epochs < 1 {
            v.push("epochs must satisfy epochs >= 1".to_string());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }
}

/// f(x) = (x/x_max)^alpha below the cutoff, 1 at and above it.
pub fn weight_fn(x: f64, x_max: f64, alpha: f64) -> f64 {
    if x < x_max {
        (x / x_max).powf(alpha)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub dim: usize,
    /// vocab_size x dim, row-major.
    pub main_vectors: Vec<f64>,
    pub context_vectors: Vec<f64>,
    pub main_bias: Vec<f64>,
    pub context_bias: Vec<f64>,
}

impl EmbeddingModel {
    /// Vectors uniform in (-0.5/dim, +0.5/dim) from the seed's "init"
    /// substream; biases zero.
    pub fn init(vocab_size: usize, dim: usize, rng_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, "init"));
        let fill = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| (rng.gen::<f64>() - 0.5) / dim as f64).collect()
        };
        let main_vectors = fill(vocab_size * dim, &mut rng);
        let context_vectors = fill(vocab_size * dim, &mut rng);
        Self {
            dim,
            main_vectors,
            context_vectors,
            main_bias: vec![0.0; vocab_size],
            context_bias: vec![0.0; vocab_size],
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.main_bias.len()
    }

    pub fn main(&self, i: u32) -> &[f64] {
        let s = i as usize * self.dim;
        &self.main_vectors[s..s + self.dim]
    }

    pub fn context(&self, j: u32) -> &[f64] {
        let s = j as usize * self.dim;
        &self.context_vectors[s..s + self.dim]
    }

    /// The model's prediction of ln X_ij.
    pub fn predict(&self, i: u32, j: u32) -> f64 {
        let dot: f64 = self
            .main(i)
            .iter()
            .zip(self.context(j))
            .map(|(a, b)| a * b)
            .sum();
        dot + self.main_bias[i as usize] + self.context_bias[j as usize]
    }

    /// Final embedding: main + context vector, elementwise.
    pub fn final_vector(&self, i: u32) -> Vec<f64> {
        self.main(i)
            .iter()
            .zip(self.context(i))
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// f(X_ij) (prediction - ln X_ij)^2 for one directed cell.
pub fn cell_loss(
    model: &EmbeddingModel,
    i: u32,
    j: u32,
    x_ij: f64,
    hp: &HyperParams,
) -> Result<f64> {
    if !(x_ij > 0.0) {
        return Err(Error::NonPositiveWeight {
            i,
            j,
            value: x_ij,
        });
    }
    let diff = model.predict(i, j) - x_ij.ln();
    Ok(weight_fn(x_ij, hp.x_max, hp.alpha) * diff * diff)
}

/// Analytic gradients of `cell_loss` with respect to every parameter the cell
/// touches.
#[derive(Debug, Clone)]
pub struct CellGradients {
    pub main: Vec<f64>,
    pub context: Vec<f64>,
    pub main_bias: f64,
    pub context_bias: f64,
}

pub fn cell_gradients(
    model: &EmbeddingModel,
    i: u32,
    j: u32,
    x_ij: f64,
    hp: &HyperParams,
) -> Result<CellGradients> {
    if !(x_ij > 0.0) {
        return Err(Error::NonPositiveWeight {
            i,
            j,
            value: x_ij,
        });
    }
    let diff = model.predict(i, j) - x_ij.ln();
    let g = 2.0 * weight_fn(x_ij, hp.x_max, hp.alpha) * diff;
    Ok(CellGradients {
        main: model.context(j).iter().map(|&wj| g * wj).collect(),
        context: model.main(i).iter().map(|&wi| g * wi).collect(),
        main_bias: g,
        context_bias: g,
    })
}

/// One directed training record with its weight terms precomputed.
#[derive(Debug, Clone, Copy)]
struct Record {
    i: u32,
    j: u32,
    fx: f64,
    lnx: f64,
}

fn build_records(matrix: &CooccurrenceMatrix, hp: &HyperParams) -> Result<Vec<Record>> {
    let mut records = Vec::with_capacity(matrix.len() * 2);
    for ((i, j), x) in matrix.cells() {
        if !(x > 0.0) {
            return Err(Error::NonPositiveWeight { i, j, value: x });
        }
        let fx = weight_fn(x, hp.x_max, hp.alpha);
        let lnx = x.ln();
        records.push(Record { i, j, fx, lnx });
        records.push(Record { i: j, j: i, fx, lnx });
    }
    Ok(records)
}

/// Total objective over all records; errors with the offending record index
/// when any term is non-finite.
fn objective_checked(model: &EmbeddingModel, records: &[Record], epoch: usize) -> Result<f64> {
    let mut sum = 0.0;
    for (idx, r) in records.iter().enumerate() {
        let diff = model.predict(r.i, r.j) - r.lnx;
        let loss = r.fx * diff * diff;
        if !loss.is_finite() {
            return Err(Error::NonFinite { epoch, cell: idx });
        }
        sum += loss;
    }
    Ok(sum)
}

/// Epoch visit order: ascending sort of per-record keys whose high half is a
/// keyed hash of the (i, j) pair and low half is the record index. The hash
/// depends only on the pair and the epoch seed, so two matrices sharing cells
/// visit the shared cells in the same relative order.
fn fill_epoch_order(order: &mut Vec<u64>, records: &[Record], rng_seed: u64, epoch: usize) {
    let epoch_seed = derive_seed_indexed(rng_seed, "epoch-shuffle", epoch as u64);
    order.clear();
    order.extend(records.iter().enumerate().map(|(idx, r)| {
        let pair = (u64::from(r.i) << 32) | u64::from(r.j);
        let h = splitmix64(epoch_seed ^ splitmix64(pair));
        (h & 0xFFFF_FFFF_0000_0000) | idx as u64
    }));
    order.sort_unstable();
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLog {
    pub initial_j: f64,
    pub final_j: f64,
    pub clip_events: u64,
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    /// JSON lines, one object per epoch: {"epoch": e, "J": j, "seconds": s}.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for stats in &self.epochs {
            let line = serde_json::to_string(stats).expect("epoch stats serialize");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Deterministic single-threaded training.
pub fn train(matrix: &CooccurrenceMatrix, hp: &HyperParams) -> Result<(EmbeddingModel, TrainLog)> {
    train_with_threads(matrix, hp, 1)
}

/// Training with `threads` concurrent updaters. One thread is bit-reproducible;
/// more than one uses lock-free asynchronous updates and is not.
pub fn train_with_threads(
    matrix: &CooccurrenceMatrix,
    hp: &HyperParams,
    threads: usize,
) -> Result<(EmbeddingModel, TrainLog)> {
    hp.validate()?;
    if matrix.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let records = build_records(matrix, hp)?;
    let mut model = EmbeddingModel::init(matrix.vocab_size(), hp.dim, hp.rng_seed);
    let initial_j = objective_checked(&model, &records, 0)?;

    let mut epochs_log = Vec::with_capacity(hp.epochs);
    let mut clip_events = 0u64;
    let mut order: Vec<u64> = Vec::new();
    if threads <= 1 {
        let mut gradsq = GradSquares::ones(matrix.vocab_size(), hp.dim);
        for epoch in 0..hp.epochs {
            let started = Instant::now();
            fill_epoch_order(&mut order, &records, hp.rng_seed, epoch);
            let j = epoch_serial(&mut model, &mut gradsq, &records, &order, hp, epoch, &mut clip_events)?;
            epochs_log.push(EpochStats {
                epoch,
                j,
                seconds: started.elapsed().as_secs_f64(),
            });
        }
    } else {
        let shared = SharedModel::from_model(&model, matrix.vocab_size(), hp.dim);
        for epoch in 0..hp.epochs {
            let started = Instant::now();
            fill_epoch_order(&mut order, &records, hp.rng_seed, epoch);
            let (j, clips) = epoch_parallel(&shared, &records, &order, hp, epoch, threads)?;
            clip_events += clips;
            epochs_log.push(EpochStats {
                epoch,
                j,
                seconds: started.elapsed().as_secs_f64(),
            });
        }
        shared.write_back(&mut model);
    }

    let final_j = objective_checked(&model, &records, hp.epochs)?;
    Ok((
        model,
        TrainLog {
            initial_j,
            final_j,
            clip_events,
            epochs: epochs_log,
        },
    ))
}

/// AdaGrad accumulators, initialized to 1 so early steps equal the base
/// learning rate.
struct GradSquares {
    main: Vec<f64>,
    context: Vec<f64>,
    main_bias: Vec<f64>,
    context_bias: Vec<f64>,
}

impl GradSquares {
    fn ones(vocab_size: usize, dim: usize) -> Self {
        Self {
            main: vec![1.0; vocab_size * dim],
            context: vec![1.0; vocab_size * dim],
            main_bias: vec![1.0; vocab_size],
            context_bias: vec![1.0; vocab_size],
        }
    }
}

fn epoch_serial(
    model: &mut EmbeddingModel,
    gradsq: &mut GradSquares,
    records: &[Record],
    order: &[u64],
    hp: &HyperParams,
    epoch: usize,
    clip_events: &mut u64,
) -> Result<f64> {
    let dim = hp.dim;
    let eta = hp.learning_rate;
    let mut j_sum = 0.0;
    for &key in order {
        let idx = (key & 0xFFFF_FFFF) as usize;
        let r = records[idx];
        let (bi, bj) = (r.i as usize, r.j as usize);
        let w1 = &mut model.main_vectors[bi * dim..(bi + 1) * dim];
        let w2 = &mut model.context_vectors[bj * dim..(bj + 1) * dim];
        let g1 = &mut gradsq.main[bi * dim..(bi + 1) * dim];
        let g2 = &mut gradsq.context[bj * dim..(bj + 1) * dim];

        let mut dot = 0.0;
        for d in 0..dim {
            dot += w1[d] * w2[d];
        }
        let diff = dot + model.main_bias[bi] + model.context_bias[bj] - r.lnx;
        let mut fdiff = r.fx * diff;
        if !fdiff.is_finite() {
            return Err(Error::NonFinite { epoch, cell: idx });
        }
        j_sum += fdiff * diff;
        if fdiff > CLIP {
            fdiff = CLIP;
            *clip_events += 1;
        } else if fdiff < -CLIP {
            fdiff = -CLIP;
            *clip_events += 1;
        }
        fdiff *= eta;

        for d in 0..dim {
            // Both temps read the pre-update vectors; accumulators grow after
            // the step, as in AdaGrad with a one-step delay.
            let temp1 = fdiff * w2[d];
            let temp2 = fdiff * w1[d];
            w1[d] -= temp1 / g1[d].sqrt();
            w2[d] -= temp2 / g2[d].sqrt();
            g1[d] += temp1 * temp1;
            g2[d] += temp2 * temp2;
        }
        model.main_bias[bi] -= fdiff / gradsq.main_bias[bi].sqrt();
        model.context_bias[bj] -= fdiff / gradsq.context_bias[bj].sqrt();
        gradsq.main_bias[bi] += fdiff * fdiff;
        gradsq.context_bias[bj] += fdiff * fdiff;
    }
    Ok(j_sum)
}

/// Parameters and accumulators as atomic bit-patterns for lock-free parallel
/// updates. Races lose individual writes but never produce torn values.
struct SharedModel {
    dim: usize,
    main: Vec<AtomicU64>,
    context: Vec<AtomicU64>,
    main_bias: Vec<AtomicU64>,
    context_bias: Vec<AtomicU64>,
    gs_main: Vec<AtomicU64>,
    gs_context: Vec<AtomicU64>,
    gs_main_bias: Vec<AtomicU64>,
    gs_context_bias: Vec<AtomicU64>,
}

fn to_atomic(values: &[f64]) -> Vec<AtomicU64> {
    values.iter().map(|&v| AtomicU64::new(v.to_bits())).collect()
}

fn load(a: &AtomicU64) -> f64 {
    f64::from_bits(a.load(Ordering::Relaxed))
}

fn store(a: &AtomicU64, v: f64) {
    a.store(v.to_bits(), Ordering::Relaxed);
}

impl SharedModel {
    fn from_model(model: &EmbeddingModel, vocab_size: usize, dim: usize) -> Self {
        Self {
            dim,
            main: to_atomic(&model.main_vectors),
            context: to_atomic(&model.context_vectors),
            main_bias: to_atomic(&model.main_bias),
            context_bias: to_atomic(&model.context_bias),
            gs_main: to_atomic(&vec![1.0; vocab_size * dim]),
            gs_context: to_atomic(&vec![1.0; vocab_size * dim]),
            gs_main_bias: to_atomic(&vec![1.0; vocab_size]),
            gs_context_bias: to_atomic(&vec![1.0; vocab_size]),
        }
    }

    fn write_back(&self, model: &mut EmbeddingModel) {
        model.main_vectors = self.main.iter().map(load).collect();
        model.context_vectors = self.context.iter().map(load).collect();
        model.main_bias = self.main_bias.iter().map(load).collect();
        model.context_bias = self.context_bias.iter().map(load).collect();
    }
}

fn epoch_parallel(
    shared: &SharedModel,
    records: &[Record],
    order: &[u64],
    hp: &HyperParams,
    epoch: usize,
    threads: usize,
) -> Result<(f64, u64)> {
    let chunk = order.len().div_ceil(threads.max(1));
    let results: Vec<Result<(f64, u64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = order
            .chunks(chunk.max(1))
            .map(|part| {
                scope.spawn(move || update_span(shared, records, part, hp, epoch))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("updater thread panicked"))
            .collect()
    });
    let mut j_sum = 0.0;
    let mut clips = 0;
    for r in results {
        let (j, c) = r?;
        j_sum += j;
        clips += c;
    }
    Ok((j_sum, clips))
}

fn update_span(
    shared: &SharedModel,
    records: &[Record],
    span: &[u64],
    hp: &HyperParams,
    epoch: usize,
) -> Result<(f64, u64)> {
    let dim = shared.dim;
    let eta = hp.learning_rate;
    let mut w1 = vec![0.0; dim];
    let mut w2 = vec![0.0; dim];
    let mut j_sum = 0.0;
    let mut clips = 0u64;
    for &key in span {
        let idx = (key & 0xFFFF_FFFF) as usize;
        let r = records[idx];
        let (bi, bj) = (r.i as usize * dim, r.j as usize * dim);
        for d in 0..dim {
            w1[d] = load(&shared.main[bi + d]);
            w2[d] = load(&shared.context[bj + d]);
        }
        let b1 = load(&shared.main_bias[r.i as usize]);
        let b2 = load(&shared.context_bias[r.j as usize]);
        let dot: f64 = w1.iter().zip(&w2).map(|(a, b)| a * b).sum();
        let diff = dot + b1 + b2 - r.lnx;
        let mut fdiff = r.fx * diff;
        if !fdiff.is_finite() {
            return Err(Error::NonFinite { epoch, cell: idx });
        }
        j_sum += fdiff * diff;
        if fdiff.abs() > CLIP {
            fdiff = fdiff.clamp(-CLIP, CLIP);
            clips += 1;
        }
        fdiff *= eta;
        for d in 0..dim {
            let temp1 = fdiff * w2[d];
            let temp2 = fdiff * w1[d];
            let gs1 = load(&shared.gs_main[bi + d]);
            let gs2 = load(&shared.gs_context[bj + d]);
            store(&shared.main[bi + d], w1[d] - temp1 / gs1.sqrt());
            store(&shared.context[bj + d], w2[d] - temp2 / gs2.sqrt());
            store(&shared.gs_main[bi + d], gs1 + temp1 * temp1);
            store(&shared.gs_context[bj + d], gs2 + temp2 * temp2);
        }
        let gb1 = load(&shared.gs_main_bias[r.i as usize]);
        let gb2 = load(&shared.gs_context_bias[r.j as usize]);
        store(&shared.main_bias[r.i as usize], b1 - fdiff / gb1.sqrt());
        store(&shared.context_bias[r.j as usize], b2 - fdiff / gb2.sqrt());
        store(&shared.gs_main_bias[r.i as usize], gb1 + fdiff * fdiff);
        store(&shared.gs_context_bias[r.j as usize], gb2 + fdiff * fdiff);
    }
    Ok((j_sum, clips))
}
