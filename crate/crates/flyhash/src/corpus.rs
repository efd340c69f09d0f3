//! Corpus ingestion: vocabulary construction, tokenization, w-gram
//! extraction, sparse binary encoding, and the deterministic epoch shuffle.
//!
//! A training sample is a context-target vector of conceptual length
//! `2 * n_voc`: the first block is a bag of context words, the second block
//! one-hot encodes the target word. Samples are kept sparse as sorted
//! active-index sets.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Token-to-id mapping with corpus counts, sorted by descending count
/// (lexicographic tie-break). Line number in the vocabulary file = id.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_sorted(tokens: Vec<String>, counts: Vec<u64>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            tokens,
            counts,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Writes `token<TAB>count` lines in id order.
    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        for (t, c) in self.tokens.iter().zip(&self.counts) {
            writeln!(out, "{t}\t{c}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from(input: impl Read) -> Result<Self> {
        let reader = BufReader::new(input);
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (tok, cnt) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: "expected token<TAB>count".into(),
            })?;
            let cnt: u64 = cnt.parse().map_err(|e| Error::Parse {
                line: i + 1,
                msg: format!("bad count: {e}"),
            })?;
            tokens.push(tok.to_string());
            counts.push(cnt);
        }
        if tokens.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Vocabulary::from_sorted(tokens, counts))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

/// Per-word occurrence probabilities duplicated over the context and target
/// blocks: `p[i] = p[i + n_voc] = counts[i] / total`.
#[derive(Debug, Clone)]
pub struct ProbabilityVector {
    p: Vec<f64>,
    n_voc: usize,
}

impl ProbabilityVector {
    pub fn n_voc(&self) -> usize {
        self.n_voc
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.p[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    /// Uniform probabilities 1/n_voc in both blocks (spherical K-means limit).
    pub fn uniform(n_voc: usize) -> Self {
        ProbabilityVector {
            p: vec![1.0 / n_voc as f64; 2 * n_voc],
            n_voc,
        }
    }

    pub fn from_raw(p: Vec<f64>) -> Self {
        let n_voc = p.len() / 2;
        ProbabilityVector { p, n_voc }
    }
}

/// A window of `w` consecutive in-vocabulary tokens: the center word is the
/// target, the `w - 1` flanks are the context (a multiset until encoding).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WGram {
    pub context_ids: Vec<u32>,
    pub target_id: u32,
}

/// Sparse binary context-target vector: sorted distinct active indices in
/// `[0, 2 * n_voc)`, with exactly one index in the target block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSample {
    active: Vec<u32>,
}

impl EncodedSample {
    /// Builds a sample from raw active indices (deduplicated and sorted).
    pub fn from_indices(mut indices: Vec<u32>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        EncodedSample { active: indices }
    }

    pub fn active_indices(&self) -> &[u32] {
        &self.active
    }

    pub fn nnz(&self) -> usize {
        self.active.len()
    }
}

/// Counts tokens and keeps the `n_voc` most frequent, descending count with
/// lexicographic tie-break.
pub fn build_vocabulary<I, S>(token_stream: I, n_voc: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if n_voc == 0 {
        return Err(Error::Config("n_voc must be >= 1".into()));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for tok in token_stream {
        *counts.entry(tok.as_ref().to_string()).or_insert(0) += 1;
    }
    if counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut pairs: Vec<(String, u64)> = counts.into_iter().collect();
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    pairs.truncate(n_voc);
    let (tokens, counts): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(Vocabulary::from_sorted(tokens, counts))
}

/// Merges per-shard token counts into one vocabulary. Shards may be counted
/// in parallel; the merge (sum, then global sort) is deterministic.
pub fn merge_counts(shards: Vec<HashMap<String, u64>>, n_voc: usize) -> Result<Vocabulary> {
    let mut total: HashMap<String, u64> = HashMap::new();
    for shard in shards {
        for (t, c) in shard {
            *total.entry(t).or_insert(0) += c;
        }
    }
    if total.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut pairs: Vec<(String, u64)> = total.into_iter().collect();
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    pairs.truncate(n_voc);
    let (tokens, counts): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(Vocabulary::from_sorted(tokens, counts))
}

/// Lowercases, splits on whitespace, strips flanking non-alphanumeric
/// characters, drops empty results. Internal punctuation is retained.
pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace()
        .filter_map(|raw| {
            let t = raw
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase();
            if t.is_empty() {
                None
            } else {
                Some(t)
            }
        })
        .collect()
}

/// Splits a paragraph into sentences on `.`, `?` or `!` runs followed by
/// whitespace (or end of input).
pub fn split_sentences(paragraph: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = paragraph.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '?' | '!') {
            while let Some(&n) = chars.peek() {
                if matches!(n, '.' | '?' | '!') {
                    current.push(n);
                    chars.next();
                } else {
                    break;
                }
            }
            let boundary = match chars.peek() {
                None => true,
                Some(&n) => n.is_whitespace(),
            };
            if boundary {
                let s = current.trim();
                if !s.is_empty() {
                    out.push(s.to_string());
                }
                current.clear();
            }
        }
    }
    let s = current.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
    out
}

/// Slides a window of size `w` along the in-vocabulary tokens of a sentence.
/// Out-of-vocabulary tokens are dropped first; sentences shorter than `w`
/// after that yield no w-grams.
pub fn sentence_to_wgrams(
    sentence_tokens: &[String],
    w: usize,
    vocab: &Vocabulary,
) -> Result<Vec<WGram>> {
    if w % 2 == 0 || w < 3 {
        return Err(Error::Config(format!("window w must be odd and >= 3, got {w}")));
    }
    let ids: Vec<u32> = sentence_tokens
        .iter()
        .filter_map(|t| vocab.id_of(t))
        .collect();
    if ids.len() < w {
        return Ok(Vec::new());
    }
    let half = w / 2;
    Ok(ids
        .windows(w)
        .map(|win| WGram {
            context_ids: win
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != half)
                .map(|(_, &id)| id)
                .collect(),
            target_id: win[half],
        })
        .collect())
}

/// Encodes a w-gram as active indices: distinct context ids in the first
/// block, `n_voc + target_id` in the second. Repeated context words
/// contribute a single bit.
pub fn encode_wgram(g: &WGram, n_voc: usize) -> Result<EncodedSample> {
    let limit = n_voc as u32;
    for &id in g.context_ids.iter().chain(std::iter::once(&g.target_id)) {
        if id >= limit {
            return Err(Error::IdOutOfRange { id, limit });
        }
    }
    let mut active: Vec<u32> = g.context_ids.clone();
    active.sort_unstable();
    active.dedup();
    active.push(limit + g.target_id);
    Ok(EncodedSample { active })
}

/// Normalized duplicated word frequencies; strictly positive by the
/// most-frequent-tokens construction of the vocabulary.
pub fn occurrence_probabilities(vocab: &Vocabulary) -> ProbabilityVector {
    let total: u64 = vocab.counts().iter().sum();
    let n_voc = vocab.len();
    let mut p = Vec::with_capacity(2 * n_voc);
    for &c in vocab.counts() {
        p.push(c as f64 / total as f64);
    }
    for i in 0..n_voc {
        let v = p[i];
        p.push(v);
    }
    ProbabilityVector { p, n_voc }
}

/// PRNG identifier stored in model headers: ChaCha8 with the epoch as the
/// stream counter.
pub const SHUFFLE_PRNG_ID: u32 = 1;

/// Deterministic per-epoch permutation of `0..sample_count`. The epoch is
/// mixed in as the ChaCha stream so epochs draw from disjoint keystreams.
pub fn shuffle_epoch(sample_count: usize, epoch: u64, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut perm: Vec<u32> = (0..sample_count as u32).collect();
    perm.shuffle(&mut rng);
    perm
}

const CACHE_MAGIC: &[u8; 4] = b"FLYG";
const CACHE_VERSION: u32 = 1;

/// Writes the binary encoded-sample cache (little-endian, "FLYG" header).
pub fn write_sample_cache(
    mut out: impl Write,
    n_voc: u32,
    w: u32,
    samples: &[EncodedSample],
) -> Result<()> {
    out.write_all(CACHE_MAGIC)?;
    out.write_all(&CACHE_VERSION.to_le_bytes())?;
    out.write_all(&n_voc.to_le_bytes())?;
    out.write_all(&w.to_le_bytes())?;
    out.write_all(&(samples.len() as u64).to_le_bytes())?;
    for s in samples {
        out.write_all(&[s.nnz() as u8])?;
        for &i in s.active_indices() {
            out.write_all(&i.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a sample cache written by [`write_sample_cache`].
pub fn read_sample_cache(mut input: impl Read) -> Result<(u32, u32, Vec<EncodedSample>)> {
    let mut magic = [0u8; 4];
    read_exact(&mut input, &mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = read_u32(&mut input)?;
    if version != CACHE_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n_voc = read_u32(&mut input)?;
    let w = read_u32(&mut input)?;
    let count = read_u64(&mut input)?;
    let mut samples = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut nnz = [0u8; 1];
        read_exact(&mut input, &mut nnz)?;
        let mut active = Vec::with_capacity(nnz[0] as usize);
        for _ in 0..nnz[0] {
            active.push(read_u32(&mut input)?);
        }
        samples.push(EncodedSample { active });
    }
    Ok((n_voc, w, samples))
}

fn read_exact(input: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    input.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated
        } else {
            Error::Io(e)
        }
    })
}

pub(crate) fn read_u32(input: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64(input: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(input, &mut b)?;
    Ok(u64::from_le_bytes(b))
}
