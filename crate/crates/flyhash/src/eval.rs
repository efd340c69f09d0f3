//! Evaluation harnesses: binary similarity, Spearman rank correlation,
//! word-similarity scoring, nearest neighbors in hash space, word-in-context
//! disambiguation (accuracy and rank-correlation protocols), complete-link
//! agglomerative clustering with cluster-quality axes, and the naive top-k
//! discretization baseline.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Vocabulary, WGram};
use crate::error::{Error, Result};
use crate::model::{context_embedding, static_embedding, HashCode, WeightMatrix};

/// Fraction of matching bits (both one or both zero) between two binary
/// codes of equal length.
pub fn binary_similarity(a: &HashCode, b: &HashCode) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len() as f64;
    let n11 = a.intersection_count(b) as f64;
    let n00 = n - (a.cardinality() as f64 + b.cardinality() as f64 - n11);
    Ok((n11 + n00) / n)
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // ranks are 1-based; tied values share the average rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantSequence);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation: Pearson correlation of average-ranked values.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len() as u32,
            right: y.len() as u32,
        });
    }
    if x.len() < 2 {
        return Err(Error::Config("spearman needs at least 2 points".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// A human-scored word pair from a similarity benchmark.
#[derive(Debug, Clone)]
pub struct WordPairRecord {
    pub word1: String,
    pub word2: String,
    pub human_score: f64,
}

/// Parses `word1<TAB>word2<TAB>score` lines; `#` comments and blank lines
/// are skipped.
pub fn read_word_pairs(input: impl Read) -> Result<Vec<WordPairRecord>> {
    let reader = BufReader::new(input);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 3 tab-separated fields, got {}", parts.len()),
            });
        }
        out.push(WordPairRecord {
            word1: parts[0].to_lowercase(),
            word2: parts[1].to_lowercase(),
            human_score: parts[2].parse().map_err(|e| Error::Parse {
                line: i + 1,
                msg: format!("bad score: {e}"),
            })?,
        });
    }
    Ok(out)
}

/// A sentence-pair instance for word-in-context evaluation. The label is
/// 0/1 for same/different-sense benchmarks, or a real human score for
/// rank-correlation benchmarks.
#[derive(Debug, Clone)]
pub struct ContextPairRecord {
    pub sentence1: Vec<String>,
    pub sentence2: Vec<String>,
    pub target_index1: usize,
    pub target_index2: usize,
    pub label: f64,
}

/// Parses `sentence1<TAB>idx1<TAB>sentence2<TAB>idx2<TAB>label` lines.
pub fn read_context_pairs(input: impl Read) -> Result<Vec<ContextPairRecord>> {
    let reader = BufReader::new(input);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 5 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 5 tab-separated fields, got {}", parts.len()),
            });
        }
        let parse_idx = |s: &str| -> Result<usize> {
            s.parse().map_err(|e| Error::Parse {
                line: i + 1,
                msg: format!("bad target index: {e}"),
            })
        };
        let rec = ContextPairRecord {
            sentence1: crate::corpus::tokenize(parts[0]),
            target_index1: parse_idx(parts[1])?,
            sentence2: crate::corpus::tokenize(parts[2]),
            target_index2: parse_idx(parts[3])?,
            label: parts[4].parse().map_err(|e| Error::Parse {
                line: i + 1,
                msg: format!("bad label: {e}"),
            })?,
        };
        if rec.target_index1 >= rec.sentence1.len() || rec.target_index2 >= rec.sentence2.len() {
            return Err(Error::Parse {
                line: i + 1,
                msg: "target index out of sentence range".into(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Static hash codes for the whole vocabulary at one hash length, computed
/// in parallel over vocabulary shards.
pub fn all_static_embeddings(weights: &WeightMatrix, k: usize) -> Result<Vec<HashCode>> {
    (0..weights.n_voc() as u32)
        .into_par_iter()
        .map(|id| static_embedding(weights, id, k))
        .collect()
}

/// Word-similarity evaluation: model score is the binary similarity of
/// static embeddings; returns Spearman rho against the human scores plus
/// the fraction of pairs that were in-vocabulary.
pub fn evaluate_wordsim(
    weights: &WeightMatrix,
    vocab: &Vocabulary,
    records: &[WordPairRecord],
    k: usize,
) -> Result<(f64, f64)> {
    let mut model_scores = Vec::new();
    let mut human_scores = Vec::new();
    for rec in records {
        let (Some(id1), Some(id2)) = (vocab.id_of(&rec.word1), vocab.id_of(&rec.word2)) else {
            continue;
        };
        let h1 = static_embedding(weights, id1, k)?;
        let h2 = static_embedding(weights, id2, k)?;
        model_scores.push(binary_similarity(&h1, &h2)?);
        human_scores.push(rec.human_score);
    }
    if model_scores.is_empty() {
        return Err(Error::NoScorableRecords);
    }
    let rho = spearman(&model_scores, &human_scores)?;
    Ok((rho, model_scores.len() as f64 / records.len() as f64))
}

/// Ranks all vocabulary words against a query's context-dependent hash and
/// returns the top `q` word ids, excluding the query's own target word.
/// Ties are broken by word id.
pub fn nearest_neighbors(
    weights: &WeightMatrix,
    query: &WGram,
    q: usize,
    k: usize,
    static_codes: &[HashCode],
) -> Result<Vec<u32>> {
    let query_hash = context_embedding(weights, query, k)?;
    neighbors_of_hash(&query_hash, Some(query.target_id), q, static_codes)
}

fn neighbors_of_hash(
    query_hash: &HashCode,
    exclude: Option<u32>,
    q: usize,
    static_codes: &[HashCode],
) -> Result<Vec<u32>> {
    let mut scored: Vec<(f64, u32)> = Vec::with_capacity(static_codes.len());
    for (id, code) in static_codes.iter().enumerate() {
        let id = id as u32;
        if Some(id) == exclude {
            continue;
        }
        scored.push((binary_similarity(query_hash, code)?, id));
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    scored.truncate(q);
    Ok(scored.into_iter().map(|(_, id)| id).collect())
}

/// Hyperparameters of the word-in-context scoring function
/// `J = alpha * J_dot + (1 - alpha) * J_nn`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisambiguationConfig {
    /// Mixing weight between the hash dot product and the neighbor overlap.
    pub alpha: f64,
    /// Neighbor count for the overlap component.
    pub q: usize,
    /// Decision threshold.
    pub theta: f64,
    /// Hash length.
    pub k: usize,
    /// Context window; 0 = context-independent (static) embeddings.
    pub window: usize,
}

/// Builds the evaluation w-gram around a target token: a window of
/// `window` tokens centered on the target, truncated at sentence edges,
/// with out-of-vocabulary context words dropped. Returns None when the
/// target itself is out of vocabulary.
pub fn eval_wgram(
    sentence: &[String],
    target_index: usize,
    window: usize,
    vocab: &Vocabulary,
) -> Option<WGram> {
    let target_id = vocab.id_of(&sentence[target_index])?;
    if window == 0 {
        return Some(WGram {
            context_ids: Vec::new(),
            target_id,
        });
    }
    let half = window / 2;
    let lo = target_index.saturating_sub(half);
    let hi = (target_index + half + 1).min(sentence.len());
    let context_ids = sentence[lo..hi]
        .iter()
        .enumerate()
        .filter(|(i, _)| lo + i != target_index)
        .filter_map(|(_, t)| vocab.id_of(t))
        .collect();
    Some(WGram {
        context_ids,
        target_id,
    })
}

/// Scores one sentence pair: `J_dot` is the normalized dot product of the
/// two context hashes, `J_nn` the top-q neighbor overlap. Returns None when
/// either target word is out of vocabulary.
pub fn disambiguation_score(
    weights: &WeightMatrix,
    vocab: &Vocabulary,
    rec: &ContextPairRecord,
    cfg: &DisambiguationConfig,
    static_codes: &[HashCode],
) -> Result<Option<f64>> {
    let Some(g1) = eval_wgram(&rec.sentence1, rec.target_index1, cfg.window, vocab) else {
        return Ok(None);
    };
    let Some(g2) = eval_wgram(&rec.sentence2, rec.target_index2, cfg.window, vocab) else {
        return Ok(None);
    };
    let h1 = context_embedding(weights, &g1, cfg.k)?;
    let h2 = context_embedding(weights, &g2, cfg.k)?;
    let j_dot = h1.intersection_count(&h2) as f64 / cfg.k as f64;
    let j_nn = if cfg.alpha < 1.0 {
        let n1 = neighbors_of_hash(&h1, Some(g1.target_id), cfg.q, static_codes)?;
        let n2 = neighbors_of_hash(&h2, Some(g2.target_id), cfg.q, static_codes)?;
        let set1: HashSet<u32> = n1.into_iter().collect();
        let common = n2.iter().filter(|id| set1.contains(id)).count();
        common as f64 / cfg.q as f64
    } else {
        0.0
    };
    Ok(Some(cfg.alpha * j_dot + (1.0 - cfg.alpha) * j_nn))
}

/// Accuracy of the thresholded score `J > theta` against 0/1 labels,
/// over the records with in-vocabulary targets.
pub fn evaluate_wic(
    weights: &WeightMatrix,
    vocab: &Vocabulary,
    records: &[ContextPairRecord],
    cfg: &DisambiguationConfig,
    static_codes: &[HashCode],
) -> Result<f64> {
    let mut correct = 0usize;
    let mut scored = 0usize;
    for rec in records {
        let Some(j) = disambiguation_score(weights, vocab, rec, cfg, static_codes)? else {
            continue;
        };
        scored += 1;
        let predicted = j > cfg.theta;
        if predicted == (rec.label > 0.5) {
            correct += 1;
        }
    }
    if scored == 0 {
        return Err(Error::NoScorableRecords);
    }
    Ok(correct as f64 / scored as f64)
}

/// Rank-correlation protocol: the model score is J above the threshold and
/// zero otherwise; returns Spearman rho against the real-valued labels.
pub fn evaluate_scws(
    weights: &WeightMatrix,
    vocab: &Vocabulary,
    records: &[ContextPairRecord],
    cfg: &DisambiguationConfig,
    static_codes: &[HashCode],
) -> Result<f64> {
    let mut model_scores = Vec::new();
    let mut human_scores = Vec::new();
    for rec in records {
        let Some(j) = disambiguation_score(weights, vocab, rec, cfg, static_codes)? else {
            continue;
        };
        model_scores.push(if j > cfg.theta { j } else { 0.0 });
        human_scores.push(rec.label);
    }
    if model_scores.is_empty() {
        return Err(Error::NoScorableRecords);
    }
    spearman(&model_scores, &human_scores)
}

/// Which disambiguation metric a grid search maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DisambiguationTask {
    WicAccuracy,
    ScwsRho,
}

fn task_metric(
    weights: &WeightMatrix,
    vocab: &Vocabulary,
    records: &[ContextPairRecord],
    cfg: &DisambiguationConfig,
    task: DisambiguationTask,
    static_codes: &[HashCode],
) -> Result<f64> {
    match task {
        DisambiguationTask::WicAccuracy => {
            evaluate_wic(weights, vocab, records, cfg, static_codes)
        }
        DisambiguationTask::ScwsRho => {
            // Degenerate configurations (all scores constant) simply lose
            // the grid search rather than aborting it.
            match evaluate_scws(weights, vocab, records, cfg, static_codes) {
                Ok(rho) => Ok(rho),
                Err(Error::ConstantSequence) => Ok(f64::NEG_INFINITY),
                Err(e) => Err(e),
            }
        }
    }
}

fn codes_for<'a>(
    weights: &WeightMatrix,
    k: usize,
    cache: &'a mut std::collections::HashMap<usize, Vec<HashCode>>,
) -> Result<&'a Vec<HashCode>> {
    if !cache.contains_key(&k) {
        cache.insert(k, all_static_embeddings(weights, k)?);
    }
    Ok(&cache[&k])
}

/// Exhaustive grid search maximizing the task metric on a development set;
/// metric-equal grid points resolve to the earlier one in grid order.
pub fn tune(
    weights: &WeightMatrix,
    vocab: &Vocabulary,
    dev: &[ContextPairRecord],
    grid: &[DisambiguationConfig],
    task: DisambiguationTask,
) -> Result<DisambiguationConfig> {
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    if dev.is_empty() {
        return Err(Error::Config("empty development set".into()));
    }
    let mut cache = std::collections::HashMap::new();
    let mut best: Option<(f64, DisambiguationConfig)> = None;
    for cfg in grid {
        let codes = codes_for(weights, cfg.k, &mut cache)?;
        let metric = task_metric(weights, vocab, dev, cfg, task, codes)?;
        if best.as_ref().map_or(true, |(m, _)| metric > *m) {
            best = Some((metric, *cfg));
        }
    }
    Ok(best.unwrap().1)
}

/// 5-fold style protocol: fold `f` (record index mod folds) is the
/// development set used for tuning, the complement is the test set.
/// Returns mean and standard deviation of the test metric across folds.
pub fn cross_validate(
    weights: &WeightMatrix,
    vocab: &Vocabulary,
    records: &[ContextPairRecord],
    folds: usize,
    grid: &[DisambiguationConfig],
    task: DisambiguationTask,
) -> Result<(f64, f64, Vec<f64>)> {
    if records.len() < folds || folds == 0 {
        return Err(Error::Config(format!(
            "need at least {folds} records for {folds} folds, got {}",
            records.len()
        )));
    }
    let mut cache = std::collections::HashMap::new();
    let mut per_fold = Vec::with_capacity(folds);
    for f in 0..folds {
        let dev: Vec<ContextPairRecord> = records
            .iter()
            .enumerate()
            .filter(|(i, _)| i % folds == f)
            .map(|(_, r)| r.clone())
            .collect();
        let test: Vec<ContextPairRecord> = records
            .iter()
            .enumerate()
            .filter(|(i, _)| i % folds != f)
            .map(|(_, r)| r.clone())
            .collect();
        let cfg = tune(weights, vocab, &dev, grid, task)?;
        let codes = codes_for(weights, cfg.k, &mut cache)?;
        per_fold.push(task_metric(weights, vocab, &test, &cfg, task, codes)?);
    }
    let mean = per_fold.iter().sum::<f64>() / folds as f64;
    let var = per_fold.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / folds as f64;
    Ok((mean, var.sqrt(), per_fold))
}

fn cosine_sim(a: &HashCode, b: &HashCode) -> f64 {
    let n11 = a.intersection_count(b) as f64;
    n11 / ((a.cardinality() as f64).sqrt() * (b.cardinality() as f64).sqrt())
}

/// Complete-linkage agglomerative clustering on cosine distance, halted at
/// `target_clusters` clusters. Merge ties resolve to the smallest pair of
/// cluster ids. Returns a cluster label per input code.
pub fn agglomerative_cluster(codes: &[HashCode], target_clusters: usize) -> Result<Vec<usize>> {
    let n = codes.len();
    if target_clusters == 0 || target_clusters > n {
        return Err(Error::Config(format!(
            "cluster count {target_clusters} out of range 1..={n}"
        )));
    }
    for (i, c) in codes.iter().enumerate() {
        if c.cardinality() == 0 {
            return Err(Error::ZeroVector(i));
        }
    }
    // Complete-link distance matrix, updated with the max rule on merge.
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = 1.0 - cosine_sim(&codes[i], &codes[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut active: Vec<bool> = vec![true; n];
    let mut labels: Vec<usize> = (0..n).collect();
    let mut cluster_count = n;
    while cluster_count > target_clusters {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                let d = dist[i * n + j];
                if best.map_or(true, |(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let (_, i, j) = best.expect("at least two active clusters");
        // merged cluster keeps the smaller id
        for l in labels.iter_mut() {
            if *l == j {
                *l = i;
            }
        }
        active[j] = false;
        for x in 0..n {
            if x != i && active[x] {
                let d = dist[i * n + x].max(dist[j * n + x]);
                dist[i * n + x] = d;
                dist[x * n + i] = d;
            }
        }
        cluster_count -= 1;
    }
    // compact labels to 0..cluster_count in order of first appearance
    let mut remap = std::collections::HashMap::new();
    let mut next = 0usize;
    Ok(labels
        .into_iter()
        .map(|l| {
            *remap.entry(l).or_insert_with(|| {
                let v = next;
                next += 1;
                v
            })
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterQuality {
    /// Mean pairwise cosine similarity inside each cluster (1.0 for
    /// singletons).
    pub intra: Vec<f64>,
    /// Max cosine similarity from any member to a point of another cluster.
    pub inter: Vec<f64>,
    pub intra_mean: f64,
    pub intra_std: f64,
    pub inter_mean: f64,
    pub inter_std: f64,
}

/// The two cluster-quality axes per cluster, plus means and standard
/// deviations across clusters.
pub fn cluster_quality(codes: &[HashCode], assignment: &[usize]) -> ClusterQuality {
    let n_clusters = assignment.iter().copied().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    for (i, &c) in assignment.iter().enumerate() {
        members[c].push(i);
    }
    let mut intra = Vec::with_capacity(n_clusters);
    let mut inter = Vec::with_capacity(n_clusters);
    for c in 0..n_clusters {
        let m = &members[c];
        if m.len() < 2 {
            intra.push(1.0);
        } else {
            let mut s = 0.0;
            let mut pairs = 0usize;
            for a in 0..m.len() {
                for b in (a + 1)..m.len() {
                    s += cosine_sim(&codes[m[a]], &codes[m[b]]);
                    pairs += 1;
                }
            }
            intra.push(s / pairs as f64);
        }
        let mut max_sim = 0.0f64;
        let mut seen_other = false;
        for &a in m {
            for (b, &cb) in assignment.iter().enumerate() {
                if cb != c {
                    seen_other = true;
                    max_sim = max_sim.max(cosine_sim(&codes[a], &codes[b]));
                }
            }
        }
        inter.push(if seen_other { max_sim } else { 0.0 });
    }
    let stats = |v: &[f64]| -> (f64, f64) {
        if v.is_empty() {
            return (0.0, 0.0);
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64;
        (mean, var.sqrt())
    };
    let (intra_mean, intra_std) = stats(&intra);
    let (inter_mean, inter_std) = stats(&inter);
    ClusterQuality {
        intra,
        inter,
        intra_mean,
        intra_std,
        inter_mean,
        inter_std,
    }
}

/// Naive discretization baseline: per row, the largest k entries become 1.
/// Ties at rank k resolve to the smallest index.
pub fn binarize_topk(vectors: &[Vec<f64>], k: usize) -> Result<Vec<HashCode>> {
    let mut out = Vec::with_capacity(vectors.len());
    for v in vectors {
        if k > v.len() {
            return Err(Error::Config(format!(
                "k={k} exceeds vector length {}",
                v.len()
            )));
        }
        let mut idx: Vec<u32> = (0..v.len() as u32).collect();
        idx.sort_by(|&a, &b| {
            v[b as usize]
                .partial_cmp(&v[a as usize])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx.truncate(k);
        out.push(HashCode::new(v.len() as u32, idx));
    }
    Ok(out)
}
