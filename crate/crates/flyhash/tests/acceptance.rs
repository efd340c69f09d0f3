//! Acceptance suite: runs every criterion sequentially and prints one
//! pass/fail line per criterion. Fails the test target if any criterion
//! fails.

use std::collections::BTreeSet;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flyhash::corpus::{
    build_vocabulary, encode_wgram, occurrence_probabilities, sentence_to_wgrams, tokenize,
    EncodedSample, ProbabilityVector, Vocabulary, WGram,
};
use flyhash::eval::{
    agglomerative_cluster, binary_similarity, cluster_quality, evaluate_wordsim, spearman,
};
use flyhash::model::{
    energy, hash, init_weights, static_embedding, update_delta, winner, HashCode, WeightMatrix,
};
use flyhash::trainer::{benchmark_scaling, train, TrainingConfig};

fn main() {
    let criteria: Vec<(&str, fn() -> Result<String, String>)> = vec![
        ("1 hash cardinality", c01_hash_cardinality),
        ("2 update-rule oracle", c02_update_oracle),
        ("3 energy oracle", c03_energy_oracle),
        ("4 spherical k-means limit", c04_kmeans_limit),
        ("5 energy descent", c05_energy_descent),
        ("6 synthetic topic separation", c06_topic_separation),
        ("7 scaling claims", c07_scaling),
        ("8 determinism across workers", c08_determinism),
        ("9 spearman oracle", c09_spearman_oracle),
        ("10 complete-link oracle", c10_complete_link_oracle),
        ("11 real-text comparative (optional)", c11_real_text),
        ("12 cluster pipeline quality", c12_cluster_pipeline),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("ACCEPTANCE {name}: PASS {detail}"),
            Err(e) => {
                failed += 1;
                println!("ACCEPTANCE {name}: FAIL {e}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn random_sample(rng: &mut ChaCha8Rng, n_voc: usize, max_ctx: usize) -> EncodedSample {
    let ctx_len = rng.gen_range(0..=max_ctx);
    let g = WGram {
        context_ids: (0..ctx_len).map(|_| rng.gen_range(0..n_voc as u32)).collect(),
        target_id: rng.gen_range(0..n_voc as u32),
    };
    encode_wgram(&g, n_voc).unwrap()
}

// ---------------------------------------------------------------- 1
fn c01_hash_cardinality() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..1000 {
        let k_units = rng.gen_range(1..=512);
        let n_voc = rng.gen_range(1..=24);
        let w = init_weights(k_units, n_voc, rng.gen());
        let sample = random_sample(&mut rng, n_voc, 8);
        let k = rng.gen_range(1..=k_units);
        let code = hash(&w, &sample, k).map_err(|e| e.to_string())?;
        if code.cardinality() != k {
            return Err(format!(
                "trial {trial}: got {} active units, expected {k}",
                code.cardinality()
            ));
        }
    }
    Ok("(1000 random triples, K <= 512)".into())
}

// ---------------------------------------------------------------- 2
// Dense brute-force evaluation of the learning rule over all (unit, input)
// pairs, independent of the sparse implementation path.
fn dense_update_oracle(
    w: &WeightMatrix,
    sample: &EncodedSample,
    p: &ProbabilityVector,
    eps: f64,
) -> Vec<Vec<f64>> {
    let cols = w.cols();
    let mut v = vec![0.0f64; cols];
    for &i in sample.active_indices() {
        v[i as usize] = 1.0;
    }
    // winner from dense activations
    let mut best = 0;
    let mut best_act = f64::NEG_INFINITY;
    for mu in 0..w.k_units() {
        let act: f64 = (0..cols).map(|i| w.row(mu)[i] as f64 * v[i]).sum();
        if act > best_act {
            best_act = act;
            best = mu;
        }
    }
    let mut delta = vec![vec![0.0f64; cols]; w.k_units()];
    for mu in 0..w.k_units() {
        let g = if mu == best { 1.0 } else { 0.0 };
        if g == 0.0 {
            continue;
        }
        let inner: f64 = (0..cols)
            .map(|j| w.row(mu)[j] as f64 * v[j] / p.get(j))
            .sum();
        for i in 0..cols {
            delta[mu][i] = eps * (v[i] / p.get(i) - inner * w.row(mu)[i] as f64);
        }
    }
    delta
}

fn random_probabilities(rng: &mut ChaCha8Rng, n_voc: usize) -> ProbabilityVector {
    let raw: Vec<f64> = (0..n_voc).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|x| x / total).collect();
    p.extend(p.clone());
    ProbabilityVector::from_raw(p)
}

fn c02_update_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for trial in 0..200 {
        let k_units = rng.gen_range(1..=8);
        let n_voc = rng.gen_range(1..=16);
        let w = init_weights(k_units, n_voc, rng.gen());
        let p = random_probabilities(&mut rng, n_voc);
        let sample = random_sample(&mut rng, n_voc, 6);
        let eps = rng.gen_range(1e-4..1e-2);
        let oracle = dense_update_oracle(&w, &sample, &p, eps);
        let (mu, d) = update_delta(&w, &sample, &p, eps).map_err(|e| e.to_string())?;
        let mut got = vec![vec![0.0f64; w.cols()]; k_units];
        for i in 0..w.cols() {
            got[mu][i] = -d.scale * w.row(mu)[i] as f64;
        }
        for &(i, v) in &d.sparse {
            got[mu][i as usize] += v;
        }
        for m in 0..k_units {
            for i in 0..w.cols() {
                let diff = (got[m][i] - oracle[m][i]).abs();
                if diff > 1e-10 {
                    return Err(format!(
                        "trial {trial}: delta[{m}][{i}] differs by {diff:e}"
                    ));
                }
            }
        }
    }
    Ok("(200 random instances, |diff| <= 1e-10)".into())
}

// ---------------------------------------------------------------- 3
fn dense_energy_oracle(
    w: &WeightMatrix,
    samples: &[EncodedSample],
    p: &ProbabilityVector,
) -> f64 {
    let cols = w.cols();
    let mut total = 0.0;
    for s in samples {
        let mut v = vec![0.0f64; cols];
        for &i in s.active_indices() {
            v[i as usize] = 1.0;
        }
        let mut best = 0;
        let mut best_act = f64::NEG_INFINITY;
        for mu in 0..w.k_units() {
            let act: f64 = (0..cols).map(|i| w.row(mu)[i] as f64 * v[i]).sum();
            if act > best_act {
                best_act = act;
                best = mu;
            }
        }
        let num: f64 = (0..cols)
            .map(|i| w.row(best)[i] as f64 * v[i] / p.get(i))
            .sum();
        let norm: f64 = (0..cols)
            .map(|i| w.row(best)[i] as f64 * w.row(best)[i] as f64)
            .sum::<f64>()
            .sqrt();
        total += -num / norm;
    }
    total
}

fn c03_energy_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for trial in 0..200 {
        let k_units = rng.gen_range(1..=8);
        let n_voc = rng.gen_range(1..=16);
        let w = init_weights(k_units, n_voc, rng.gen());
        let p = random_probabilities(&mut rng, n_voc);
        let samples: Vec<EncodedSample> = (0..rng.gen_range(1..10))
            .map(|_| random_sample(&mut rng, n_voc, 6))
            .collect();
        let got = energy(&w, &samples, &p).map_err(|e| e.to_string())?;
        let expect = dense_energy_oracle(&w, &samples, &p);
        if (got - expect).abs() > 1e-10 {
            return Err(format!(
                "trial {trial}: energy {got} vs oracle {expect}"
            ));
        }
    }
    Ok("(200 random instances, |diff| <= 1e-10)".into())
}

// ---------------------------------------------------------------- 4
fn c04_kmeans_limit() -> Result<String, String> {
    let n_voc = 6;
    let sample = EncodedSample::from_indices(vec![0, 2, n_voc as u32 + 4]);
    let samples = vec![sample.clone(); 64];
    let p = ProbabilityVector::uniform(n_voc);
    let cfg = TrainingConfig {
        k_units: 3,
        window: 3,
        n_voc,
        epochs: 600,
        lr0: 0.01,
        minibatch: 8,
        seed: 11,
        workers: 1,
        probe_size: 4,
        start_epoch: 0,
    };
    let (w, _) = train(&samples, &p, &cfg).map_err(|e| e.to_string())?;
    let acts = flyhash::model::activations(&w, &sample).map_err(|e| e.to_string())?;
    let mu = winner(&acts);
    let row = w.row(mu);
    let expect = 1.0 / 3.0f64.sqrt();
    for &i in sample.active_indices() {
        let diff = (row[i as usize] as f64 - expect).abs();
        if diff > 1e-6 {
            return Err(format!("row[{i}] off the normalized input by {diff:e}"));
        }
    }
    let norm: f64 = row.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(format!("winner row norm {norm}, expected 1 within 1e-6"));
    }
    Ok(format!("(winner row norm {norm:.9})"))
}

// ------------------------------------------------- synthetic corpus
// Two disjoint 50-word topics; each sentence samples one topic and is
// built from a small per-sentence word set (4 draws from the topic,
// cycled to fill the sentence), so that sentences within a topic are
// varied enough to keep a couple dozen units in play.
fn synthetic_corpus(sentences: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(sentences);
    for _ in 0..sentences {
        let topic = rng.gen_range(0..2);
        let set: Vec<u32> = (0..4).map(|_| rng.gen_range(0..50)).collect();
        let len = rng.gen_range(10..=14);
        let words: Vec<String> = (0..len)
            .map(|i| {
                let w = set[i % set.len()];
                if topic == 0 {
                    format!("alpha{w}")
                } else {
                    format!("beta{w}")
                }
            })
            .collect();
        out.push(words.join(" "));
    }
    out
}

// Declared vocabulary-table width for the synthetic model. Only 100 word
// ids are ever observed; the remaining columns stay untouched, exactly as
// rare tail words would in a realistically sized table. The padding
// matters for the toy setup: unit-norm random rows spread their mass over
// 2 * n_voc columns, so a 100-word table leaves untrained rows with
// per-column noise around 0.18 -- larger than any achievable topic-wide
// weight -- whereas at 40k the noise floor drops to ~0.01.
const SYNTH_TABLE: usize = 40000;

fn corpus_to_samples(
    lines: &[String],
    vocab: &Vocabulary,
    w: usize,
    n_voc: usize,
) -> Vec<EncodedSample> {
    let mut samples = Vec::new();
    for line in lines {
        let toks = tokenize(line);
        for g in sentence_to_wgrams(&toks, w, vocab).unwrap() {
            samples.push(encode_wgram(&g, n_voc).unwrap());
        }
    }
    samples
}

// Occurrence probabilities laid out over a table wider than the observed
// vocabulary: observed words keep their corpus frequencies, unused
// columns get a tiny positive floor (never referenced by any sample).
fn padded_probabilities(vocab: &Vocabulary, n_voc: usize) -> ProbabilityVector {
    let observed = occurrence_probabilities(vocab);
    let mut raw = vec![1e-9f64; 2 * n_voc];
    for i in 0..vocab.len() {
        raw[i] = observed.get(i);
        raw[n_voc + i] = observed.get(vocab.len() + i);
    }
    ProbabilityVector::from_raw(raw)
}

fn train_synthetic(
    sentences: usize,
    epochs: usize,
    seed: u64,
) -> (WeightMatrix, Vocabulary, Vec<flyhash::trainer::EpochReport>) {
    let lines = synthetic_corpus(sentences, seed);
    let tokens: Vec<String> = lines.iter().flat_map(|l| tokenize(l)).collect();
    let vocab = build_vocabulary(tokens, 100).unwrap();
    let samples = corpus_to_samples(&lines, &vocab, 9, SYNTH_TABLE);
    let p = padded_probabilities(&vocab, SYNTH_TABLE);
    // A 100-word vocabulary makes v/p an order of magnitude larger than in
    // a realistic 20k-word setup, so the learning rate comes down
    // accordingly to keep summed per-unit deltas in the stable range. The
    // 5000-sample minibatch keeps within-batch winner assignments diverse
    // enough that winner-take-all does not collapse onto a handful of rows.
    let cfg = TrainingConfig {
        k_units: 200,
        window: 9,
        n_voc: SYNTH_TABLE,
        epochs,
        lr0: 3e-5,
        minibatch: 5000,
        seed,
        workers: 0,
        probe_size: 10000,
        start_epoch: 0,
    };
    let (w, reports) = train(&samples, &p, &cfg).unwrap();
    (w, vocab, reports)
}

// ---------------------------------------------------------------- 5
fn c05_energy_descent() -> Result<String, String> {
    let (_, _, reports) = train_synthetic(20000, 5, 55);
    let first = reports.first().unwrap().energy;
    let last = reports.last().unwrap().energy;
    if last < first {
        Ok(format!("(probe energy {first:.4} -> {last:.4})"))
    } else {
        Err(format!("probe energy did not descend: {first:.4} -> {last:.4}"))
    }
}

// ---------------------------------------------------------------- 6
fn c06_topic_separation() -> Result<String, String> {
    let (w, vocab, _) = train_synthetic(100000, 5, 66);
    let k = 16;
    let mut topic_ids: [Vec<u32>; 2] = [Vec::new(), Vec::new()];
    for id in 0..vocab.len() as u32 {
        if vocab.token(id).starts_with("alpha") {
            topic_ids[0].push(id);
        } else {
            topic_ids[1].push(id);
        }
    }
    let codes: Vec<HashCode> = (0..vocab.len() as u32)
        .map(|id| static_embedding(&w, id, k).unwrap())
        .collect();
    let mut within = (0.0, 0usize);
    let mut across = (0.0, 0usize);
    for a in 0..codes.len() {
        for b in (a + 1)..codes.len() {
            let sim = binary_similarity(&codes[a], &codes[b]).unwrap();
            let same = vocab.token(a as u32).starts_with("alpha")
                == vocab.token(b as u32).starts_with("alpha");
            if same {
                within.0 += sim;
                within.1 += 1;
            } else {
                across.0 += sim;
                across.1 += 1;
            }
        }
    }
    let within_mean = within.0 / within.1 as f64;
    let across_mean = across.0 / across.1 as f64;
    let gap = within_mean - across_mean;
    if gap >= 0.05 {
        Ok(format!(
            "(within {within_mean:.4}, across {across_mean:.4}, gap {gap:.4})"
        ))
    } else {
        Err(format!(
            "separation gap {gap:.4} below 0.05 (within {within_mean:.4}, across {across_mean:.4})"
        ))
    }
}

// ---------------------------------------------------------------- 7
fn c07_scaling() -> Result<String, String> {
    // Base sizes chosen so the unit-count work dominates fixed per-sample
    // overhead (large K) while both weight matrices stay cache-resident
    // (small vocabulary): otherwise the measurement reflects the memory
    // hierarchy rather than the algorithm.
    let base_k = 1024;
    let base_n = 64;
    let base_s = 30720;
    let minibatch = 2048; // >= n_voc for both vocabulary sizes
    let grid = [
        (base_k, base_n, base_s),
        (2 * base_k, base_n, base_s),
        (base_k, base_n, 2 * base_s),
        (base_k, 2 * base_n, base_s),
    ];
    // Per-rep ratios with a median across reps: repeats suppress scheduler
    // and frequency noise on shared machines.
    let mut ratios: [Vec<f64>; 3] = Default::default();
    for rep in 0..7 {
        let rows = benchmark_scaling(&grid, 9, minibatch, 700 + rep).map_err(|e| e.to_string())?;
        for i in 0..3 {
            ratios[i].push(rows[i + 1].seconds_per_epoch / rows[0].seconds_per_epoch);
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let k_ratio = median(&mut ratios[0]);
    let s_ratio = median(&mut ratios[1]);
    let n_ratio = median(&mut ratios[2]);
    let detail = format!(
        "(2x K -> {k_ratio:.2}, 2x samples -> {s_ratio:.2}, 2x vocab -> {n_ratio:.2})"
    );
    if !(1.6..=2.4).contains(&k_ratio) {
        return Err(format!("K scaling ratio {k_ratio:.2} outside [1.6, 2.4] {detail}"));
    }
    if !(1.6..=2.4).contains(&s_ratio) {
        return Err(format!(
            "sample scaling ratio {s_ratio:.2} outside [1.6, 2.4] {detail}"
        ));
    }
    if n_ratio > 1.5 {
        return Err(format!("vocabulary scaling ratio {n_ratio:.2} above 1.5 {detail}"));
    }
    Ok(detail)
}

// ---------------------------------------------------------------- 8
fn c08_determinism() -> Result<String, String> {
    let bin = env!("CARGO_BIN_EXE_flyhash");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus.txt");
    std::fs::write(&corpus, synthetic_corpus(3000, 88).join("\n")).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let model = dir.path().join(format!("model-w{workers}.flyw"));
        let status = Command::new(bin)
            .args([
                "train",
                corpus.to_str().unwrap(),
                "--K",
                "64",
                "--w",
                "9",
                "--epochs",
                "3",
                "--lr0",
                "1e-4",
                "--batch",
                "200",
                "--vocab-size",
                "100",
                "--seed",
                "42",
                "--workers",
                workers,
                "-o",
                model.to_str().unwrap(),
            ])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "train failed: {}",
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        outputs.push(std::fs::read(&model).map_err(|e| e.to_string())?);
    }
    if outputs[0] == outputs[1] {
        Ok(format!("(model files byte-identical, {} bytes)", outputs[0].len()))
    } else {
        Err("model files differ across worker counts".into())
    }
}

// ---------------------------------------------------------------- 9
// Brute-force average-rank Spearman, independent of the library path.
fn brute_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&a| {
                let less = v.iter().filter(|&&b| b < a).count() as f64;
                let equal = v.iter().filter(|&&b| b == a).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let rx = rank(x);
    let ry = rank(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

fn c09_spearman_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for trial in 0..100 {
        let n = rng.gen_range(2..40);
        // coarse values produce plenty of ties
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
        let got = spearman(&x, &y).ok();
        let expect = brute_spearman(&x, &y);
        match (got, expect) {
            (Some(a), Some(b)) => {
                if (a - b).abs() > 1e-12 {
                    return Err(format!("trial {trial}: {a} vs oracle {b}"));
                }
            }
            (None, None) => {}
            (a, b) => {
                return Err(format!("trial {trial}: definedness mismatch {a:?} vs {b:?}"))
            }
        }
    }
    Ok("(100 random tied/untied sequences, |diff| <= 1e-12)".into())
}

// ---------------------------------------------------------------- 10
// Exhaustive complete-link oracle: recomputes every cluster distance from
// the raw pairwise matrix at each merge step.
fn oracle_complete_link(codes: &[HashCode], target: usize) -> Vec<usize> {
    let n = codes.len();
    let cos = |a: &HashCode, b: &HashCode| -> f64 {
        a.intersection_count(b) as f64
            / ((a.cardinality() as f64).sqrt() * (b.cardinality() as f64).sqrt())
    };
    let mut d = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d[i][j] = 1.0 - cos(&codes[i], &codes[j]);
            }
        }
    }
    // clusters keyed by smallest member index
    let mut clusters: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut count = n;
    while count > target {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            let Some(a) = &clusters[i] else { continue };
            for j in (i + 1)..n {
                let Some(b) = &clusters[j] else { continue };
                let mut dist = f64::NEG_INFINITY;
                for &x in a {
                    for &y in b {
                        dist = dist.max(d[x][y]);
                    }
                }
                if best.map_or(true, |(bd, _, _)| dist < bd) {
                    best = Some((dist, i, j));
                }
            }
        }
        let (_, i, j) = best.unwrap();
        let b = clusters[j].take().unwrap();
        clusters[i].as_mut().unwrap().extend(b);
        count -= 1;
    }
    let mut label = vec![0usize; n];
    let mut next = 0;
    let mut order: Vec<(usize, Vec<usize>)> = clusters
        .into_iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| (i, c)))
        .collect();
    order.sort_by_key(|(i, _)| *i);
    // label by first appearance over original indices, matching the
    // implementation's compaction rule
    let mut assignment_by_cluster = vec![usize::MAX; n];
    for (key, members) in &order {
        for &m in members {
            assignment_by_cluster[m] = *key;
        }
    }
    let mut remap = std::collections::HashMap::new();
    for a in assignment_by_cluster.iter_mut() {
        let l = *remap.entry(*a).or_insert_with(|| {
            let v = next;
            next += 1;
            v
        });
        *a = l;
    }
    label.copy_from_slice(&assignment_by_cluster);
    label
}

fn c10_complete_link_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    for trial in 0..100 {
        let n = rng.gen_range(2..=8);
        let len = 12u32;
        let codes: Vec<HashCode> = (0..n)
            .map(|_| {
                let card = rng.gen_range(1..=4);
                let mut set = BTreeSet::new();
                while set.len() < card {
                    set.insert(rng.gen_range(0..len));
                }
                HashCode::new(len, set.into_iter().collect())
            })
            .collect();
        let target = rng.gen_range(1..=n);
        let got = agglomerative_cluster(&codes, target).map_err(|e| e.to_string())?;
        let expect = oracle_complete_link(&codes, target);
        if got != expect {
            return Err(format!(
                "trial {trial}: assignment {got:?} vs oracle {expect:?} (n={n}, target={target})"
            ));
        }
    }
    Ok("(100 random code sets, n <= 8, exact match)".into())
}

// ---------------------------------------------------------------- 11
// Optional hours-scale check on real text; runs only when a corpus and a
// word-pair file are supplied via environment variables.
fn c11_real_text() -> Result<String, String> {
    let (Ok(corpus_path), Ok(pairs_path)) = (
        std::env::var("FLYHASH_REALTEXT_CORPUS"),
        std::env::var("FLYHASH_REALTEXT_PAIRS"),
    ) else {
        return Ok(
            "(SKIPPED: set FLYHASH_REALTEXT_CORPUS and FLYHASH_REALTEXT_PAIRS to run)".into(),
        );
    };
    let text = std::fs::read_to_string(&corpus_path).map_err(|e| e.to_string())?;
    let lines: Vec<String> = text.lines().map(str::to_string).collect();
    let tokens: Vec<String> = lines.iter().flat_map(|l| tokenize(l)).collect();
    let vocab = build_vocabulary(tokens, 20000).map_err(|e| e.to_string())?;
    let samples = corpus_to_samples(&lines, &vocab, 11, vocab.len());
    let p = occurrence_probabilities(&vocab);
    let cfg = TrainingConfig {
        k_units: 400,
        window: 11,
        n_voc: vocab.len(),
        epochs: 15,
        lr0: 3e-4,
        minibatch: 10000,
        seed: 42,
        workers: 0,
        probe_size: 10000,
        start_epoch: 0,
    };
    let records =
        flyhash::eval::read_word_pairs(std::fs::File::open(&pairs_path).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let untrained = init_weights(cfg.k_units, vocab.len(), cfg.seed);
    let (rho_untrained, _) =
        evaluate_wordsim(&untrained, &vocab, &records, 51).map_err(|e| e.to_string())?;
    let (trained, _) = train(&samples, &p, &cfg).map_err(|e| e.to_string())?;
    let (rho_trained, _) =
        evaluate_wordsim(&trained, &vocab, &records, 51).map_err(|e| e.to_string())?;
    if rho_trained > rho_untrained {
        Ok(format!("(trained {rho_trained:.4} > untrained {rho_untrained:.4})"))
    } else {
        Err(format!(
            "trained rho {rho_trained:.4} not above untrained {rho_untrained:.4}"
        ))
    }
}

// ---------------------------------------------------------------- 12
fn c12_cluster_pipeline() -> Result<String, String> {
    let (w, vocab, _) = train_synthetic(20000, 5, 120);
    let codes: Vec<HashCode> = (0..vocab.len() as u32)
        .map(|id| static_embedding(&w, id, 16).unwrap())
        .collect();
    let assignment = agglomerative_cluster(&codes, 20).map_err(|e| e.to_string())?;
    let quality = cluster_quality(&codes, &assignment);
    if quality.intra_mean > quality.inter_mean {
        Ok(format!(
            "(intra mean {:.4} > inter mean {:.4}, C=20)",
            quality.intra_mean, quality.inter_mean
        ))
    } else {
        Err(format!(
            "intra mean {:.4} not above inter mean {:.4}",
            quality.intra_mean, quality.inter_mean
        ))
    }
}
