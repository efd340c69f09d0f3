//! The Kenyon-cell layer: weight storage, activations, energy, the
//! per-sample learning update, top-k bio-hashing, embedding generation,
//! weight probing, and model persistence.
//!
//! Weights are stored and updated in f32; dot products and energy are
//! accumulated in f64.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{
    encode_wgram, read_u32, read_u64, EncodedSample, ProbabilityVector, Vocabulary, WGram,
};
use crate::error::{Error, Result};

/// K x 2*n_voc synapse matrix projecting the input layer onto the K
/// Kenyon-cell units, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    k_units: usize,
    n_voc: usize,
    w: Vec<f32>,
}

impl WeightMatrix {
    pub fn new(k_units: usize, n_voc: usize, w: Vec<f32>) -> Result<Self> {
        if w.len() != k_units * 2 * n_voc {
            return Err(Error::DimensionMismatch(format!(
                "expected {} weights, got {}",
                k_units * 2 * n_voc,
                w.len()
            )));
        }
        Ok(WeightMatrix { k_units, n_voc, w })
    }

    pub fn k_units(&self) -> usize {
        self.k_units
    }

    pub fn n_voc(&self) -> usize {
        self.n_voc
    }

    pub fn cols(&self) -> usize {
        2 * self.n_voc
    }

    pub fn row(&self, unit: usize) -> &[f32] {
        let c = self.cols();
        &self.w[unit * c..(unit + 1) * c]
    }

    pub fn row_mut(&mut self, unit: usize) -> &mut [f32] {
        let c = self.cols();
        &mut self.w[unit * c..(unit + 1) * c]
    }

    pub fn raw(&self) -> &[f32] {
        &self.w
    }
}

/// Sparse binary code: sorted active positions out of `len` total.
/// Produced by bio-hashing (then `len == K`, exactly k active) and by the
/// naive top-k discretizer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashCode {
    len: u32,
    ones: Vec<u32>,
}

impl HashCode {
    pub fn new(len: u32, mut ones: Vec<u32>) -> Self {
        ones.sort_unstable();
        HashCode { len, ones }
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.ones.is_empty()
    }

    pub fn ones(&self) -> &[u32] {
        &self.ones
    }

    pub fn cardinality(&self) -> usize {
        self.ones.len()
    }

    /// Number of positions active in both codes.
    pub fn intersection_count(&self, other: &HashCode) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.ones.len() && j < other.ones.len() {
            match self.ones[i].cmp(&other.ones[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

/// Gaussian rows scaled to unit Euclidean norm, deterministic in the seed.
pub fn init_weights(k_units: usize, n_voc: usize, seed: u64) -> WeightMatrix {
    let cols = 2 * n_voc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0f32; k_units * cols];
    for row in w.chunks_mut(cols) {
        let mut norm2 = 0.0f64;
        for x in row.iter_mut() {
            let v: f64 = StandardNormal.sample(&mut rng);
            *x = v as f32;
            norm2 += (*x as f64) * (*x as f64);
        }
        let inv = (1.0 / norm2.sqrt()) as f32;
        for x in row.iter_mut() {
            *x *= inv;
        }
    }
    WeightMatrix { k_units, n_voc, w }
}

/// Sparse dot product of every unit row with the binary sample,
/// accumulated in f64.
pub fn activations(weights: &WeightMatrix, sample: &EncodedSample) -> Result<Vec<f64>> {
    let cols = weights.cols() as u32;
    for &i in sample.active_indices() {
        if i >= cols {
            return Err(Error::IdOutOfRange { id: i, limit: cols });
        }
    }
    let mut acts = vec![0.0f64; weights.k_units()];
    for (mu, act) in acts.iter_mut().enumerate() {
        let row = weights.row(mu);
        let mut s = 0.0f64;
        for &i in sample.active_indices() {
            s += row[i as usize] as f64;
        }
        *act = s;
    }
    Ok(acts)
}

/// Index of the maximum activation; ties go to the smallest index.
pub fn winner(acts: &[f64]) -> usize {
    let mut best = 0;
    for (i, &a) in acts.iter().enumerate().skip(1) {
        if a > acts[best] {
            best = i;
        }
    }
    best
}

/// Energy over a sample set: each sample contributes
/// `-<W_mu, v/p> / ||W_mu||` for its winning unit. Winner selection does
/// not involve p.
pub fn energy(
    weights: &WeightMatrix,
    samples: &[EncodedSample],
    p: &ProbabilityVector,
) -> Result<f64> {
    let mut total = 0.0f64;
    for s in samples {
        total += sample_energy(weights, s, p)?;
    }
    Ok(total)
}

pub fn sample_energy(
    weights: &WeightMatrix,
    sample: &EncodedSample,
    p: &ProbabilityVector,
) -> Result<f64> {
    let acts = activations(weights, sample)?;
    let mu = winner(&acts);
    let row = weights.row(mu);
    let mut norm2 = 0.0f64;
    for &x in row {
        norm2 += x as f64 * x as f64;
    }
    if norm2 == 0.0 {
        return Err(Error::DegenerateUnit(mu));
    }
    let mut num = 0.0f64;
    for &i in sample.active_indices() {
        num += row[i as usize] as f64 / p.get(i as usize);
    }
    Ok(-num / norm2.sqrt())
}

/// The two parts of a single-sample weight update: the full delta for the
/// winning row is `sparse[i] - scale * W[mu][i]`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDelta {
    /// `eps * v_i / p_i` at each active index.
    pub sparse: Vec<(u32, f64)>,
    /// `eps * <W_mu, v/p>`, multiplying the whole winning row.
    pub scale: f64,
}

/// Computes the learning-rule update for one sample: only the winning row
/// changes, pulled toward the probability-reweighted input direction.
pub fn update_delta(
    weights: &WeightMatrix,
    sample: &EncodedSample,
    p: &ProbabilityVector,
    eps: f64,
) -> Result<(usize, SampleDelta)> {
    let acts = activations(weights, sample)?;
    let mu = winner(&acts);
    let row = weights.row(mu);
    let mut inner = 0.0f64;
    for &i in sample.active_indices() {
        inner += row[i as usize] as f64 / p.get(i as usize);
    }
    let sparse = sample
        .active_indices()
        .iter()
        .map(|&i| (i, eps / p.get(i as usize)))
        .collect();
    Ok((
        mu,
        SampleDelta {
            sparse,
            scale: eps * inner,
        },
    ))
}

/// Applies a single-sample delta in place (used by tests and single-threaded
/// paths; the trainer merges deltas per minibatch instead).
pub fn apply_delta(weights: &mut WeightMatrix, unit: usize, delta: &SampleDelta) {
    let row = weights.row_mut(unit);
    let factor = 1.0 - delta.scale;
    for x in row.iter_mut() {
        *x = (*x as f64 * factor) as f32;
    }
    for &(i, v) in &delta.sparse {
        row[i as usize] = (row[i as usize] as f64 + v) as f32;
    }
}

fn top_k_units(acts: &[f64], k: usize) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..acts.len() as u32).collect();
    idx.sort_by(|&a, &b| {
        acts[b as usize]
            .partial_cmp(&acts[a as usize])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// Bio-hashing: the k most activated units become the active bits.
/// Ties at rank k go to smaller indices; exactly k bits are set.
pub fn hash(weights: &WeightMatrix, sample: &EncodedSample, k: usize) -> Result<HashCode> {
    if k == 0 || k > weights.k_units() {
        return Err(Error::Config(format!(
            "hash length k={k} out of range 1..={}",
            weights.k_units()
        )));
    }
    let acts = activations(weights, sample)?;
    Ok(HashCode::new(
        weights.k_units() as u32,
        top_k_units(&acts, k),
    ))
}

/// Hash of the probe sample with empty context and a one-hot target.
pub fn static_embedding(weights: &WeightMatrix, word_id: u32, k: usize) -> Result<HashCode> {
    if word_id as usize >= weights.n_voc() {
        return Err(Error::IdOutOfRange {
            id: word_id,
            limit: weights.n_voc() as u32,
        });
    }
    let sample = EncodedSample::from_indices(vec![weights.n_voc() as u32 + word_id]);
    hash(weights, &sample, k)
}

/// Hash of a full context-target sample; lives in the same K-dimensional
/// binary space as static embeddings.
pub fn context_embedding(weights: &WeightMatrix, g: &WGram, k: usize) -> Result<HashCode> {
    let sample = encode_wgram(g, weights.n_voc())?;
    hash(weights, &sample, k)
}

/// Which half of a weight row to probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Context,
    Target,
}

/// Softmax over one block of a unit's weight row: the word distribution
/// that unit has learned.
pub fn kc_word_distribution(weights: &WeightMatrix, unit: usize, block: Block) -> Result<Vec<f64>> {
    if unit >= weights.k_units() {
        return Err(Error::Config(format!(
            "unit {unit} out of range 0..{}",
            weights.k_units()
        )));
    }
    let n = weights.n_voc();
    let row = weights.row(unit);
    let slice = match block {
        Block::Context => &row[..n],
        Block::Target => &row[n..],
    };
    let max = slice.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exps: Vec<f64> = slice.iter().map(|&x| (x as f64 - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Training provenance carried in the model file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelMeta {
    pub window: u32,
    pub seed: u64,
    pub epochs_trained: u32,
    pub prng_id: u32,
}

/// A trained model: weights, the vocabulary they index, and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub weights: WeightMatrix,
    pub vocab: Vocabulary,
    pub meta: ModelMeta,
}

const MODEL_MAGIC: &[u8; 4] = b"FLYW";
const MODEL_VERSION: u32 = 1;

impl Model {
    pub fn save_bytes(&self) -> Result<Vec<u8>> {
        if self.vocab.len() != self.weights.n_voc() {
            return Err(Error::DimensionMismatch(format!(
                "vocabulary has {} tokens but weights expect n_voc={}",
                self.vocab.len(),
                self.weights.n_voc()
            )));
        }
        let mut buf = Vec::new();
        buf.extend_from_slice(MODEL_MAGIC);
        buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.weights.k_units() as u32).to_le_bytes());
        buf.extend_from_slice(&(self.weights.n_voc() as u32).to_le_bytes());
        buf.extend_from_slice(&self.meta.window.to_le_bytes());
        buf.extend_from_slice(&self.meta.seed.to_le_bytes());
        buf.extend_from_slice(&self.meta.epochs_trained.to_le_bytes());
        buf.extend_from_slice(&self.meta.prng_id.to_le_bytes());
        for &x in self.weights.raw() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        buf.extend_from_slice(&(self.vocab.len() as u32).to_le_bytes());
        for (t, &c) in self.vocab.tokens().iter().zip(self.vocab.counts()) {
            let bytes = t.as_bytes();
            buf.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
            buf.extend_from_slice(bytes);
            buf.extend_from_slice(&c.to_le_bytes());
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        Ok(buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.save_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn load_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Truncated);
        }
        if &bytes[..4] != MODEL_MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < 8 {
            return Err(Error::Truncated);
        }
        let payload_len = bytes.len() - 4;
        let (payload, crc_bytes) = bytes.split_at(payload_len);
        let mut r = &payload[4..];
        let version = read_u32(&mut r)?;
        if version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let k_units = read_u32(&mut r)? as usize;
        let n_voc = read_u32(&mut r)? as usize;
        let window = read_u32(&mut r)?;
        let seed = read_u64(&mut r)?;
        let epochs_trained = read_u32(&mut r)?;
        let prng_id = read_u32(&mut r)?;
        let count = k_units * 2 * n_voc;
        let mut w = Vec::with_capacity(count);
        for _ in 0..count {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| Error::Truncated)?;
            w.push(f32::from_le_bytes(b));
        }
        let token_count = read_u32(&mut r)? as usize;
        if token_count != n_voc {
            return Err(Error::DimensionMismatch(format!(
                "vocabulary block has {token_count} tokens, header says n_voc={n_voc}"
            )));
        }
        let mut tokens = Vec::with_capacity(token_count);
        let mut counts = Vec::with_capacity(token_count);
        for _ in 0..token_count {
            let len = read_u32(&mut r)? as usize;
            let mut s = vec![0u8; len];
            r.read_exact(&mut s).map_err(|_| Error::Truncated)?;
            tokens.push(String::from_utf8(s).map_err(|_| Error::ChecksumMismatch)?);
            counts.push(read_u64(&mut r)?);
        }
        let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
        if crc32fast::hash(payload) != stored_crc {
            return Err(Error::ChecksumMismatch);
        }
        Ok(Model {
            weights: WeightMatrix::new(k_units, n_voc, w)?,
            vocab: Vocabulary::from_sorted(tokens, counts),
            meta: ModelMeta {
                window,
                seed,
                epochs_trained,
                prng_id,
            },
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::load_bytes(&bytes)
    }
}
