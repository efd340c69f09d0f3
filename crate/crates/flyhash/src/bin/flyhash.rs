//! Command-line surface: preprocessing, vocabulary building, training,
//! embedding, neighbor queries, evaluation, clustering, unit probing, and
//! scaling benchmarks. Every command with file outputs writes a run
//! manifest next to them; report commands embed the manifest in their JSON.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use flyhash::corpus::{
    build_vocabulary, encode_wgram, occurrence_probabilities, sentence_to_wgrams,
    split_sentences, tokenize, EncodedSample, Vocabulary, SHUFFLE_PRNG_ID,
};
use flyhash::error::{Error, Result};
use flyhash::eval::{
    agglomerative_cluster, all_static_embeddings, binary_similarity, cluster_quality,
    cross_validate, evaluate_wordsim, eval_wgram, nearest_neighbors, read_context_pairs,
    read_word_pairs, DisambiguationConfig, DisambiguationTask,
};
use flyhash::manifest::RunManifest;
use flyhash::model::{
    activations, hash, init_weights, kc_word_distribution, static_embedding, Block, Model,
    ModelMeta,
};
use flyhash::trainer::{benchmark_scaling, train_into, TrainingConfig};

#[derive(Parser)]
#[command(name = "flyhash", version, about = "Sparse binary word embeddings from raw text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct WorkerOpts {
    /// Worker threads (0 = all cores); FLYHASH_WORKERS overrides the default.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
}

fn default_workers() -> usize {
    std::env::var("FLYHASH_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

#[derive(Subcommand)]
enum Command {
    /// Concatenate raw text files and split them into one sentence per line
    Preprocess {
        /// Input text files
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Build a vocabulary file from a sentence-per-line corpus
    Vocab {
        corpus: PathBuf,
        #[arg(long = "vocab-size", default_value_t = 20000)]
        vocab_size: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Train a model on a sentence-per-line corpus
    Train {
        corpus: PathBuf,
        /// Vocabulary file; built from the corpus when omitted
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long = "K", default_value_t = 400)]
        k_units: usize,
        #[arg(long = "w", default_value_t = 11)]
        window: usize,
        #[arg(long, default_value_t = 15)]
        epochs: usize,
        #[arg(long, default_value_t = 3e-4)]
        lr0: f64,
        #[arg(long = "batch", default_value_t = 10000)]
        minibatch: usize,
        #[arg(long = "vocab-size", default_value_t = 20000)]
        vocab_size: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long = "probe-size", default_value_t = 10000)]
        probe_size: usize,
        /// Write a checkpoint model.epochNN.flyw into this directory each epoch
        #[arg(long = "checkpoint-dir")]
        checkpoint_dir: Option<PathBuf>,
        /// Continue the annealing schedule from a saved checkpoint
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        workers: WorkerOpts,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the hash code of a word or a context-target query
    Embed {
        model: PathBuf,
        /// Target word (static embedding)
        word: Option<String>,
        /// Sentence for a context-dependent embedding
        #[arg(long)]
        context: Option<String>,
        /// Token index of the target word within --context
        #[arg(long = "target-index")]
        target_index: Option<usize>,
        #[arg(long = "hash-length", default_value_t = 51)]
        hash_length: usize,
        /// Context window used around --target-index (0 = static)
        #[arg(long = "w", default_value_t = 11)]
        window: usize,
    },
    /// Rank the vocabulary by similarity to a query in hash space
    Neighbors {
        model: PathBuf,
        word: Option<String>,
        #[arg(long)]
        context: Option<String>,
        #[arg(long = "target-index")]
        target_index: Option<usize>,
        #[arg(short, default_value_t = 10)]
        q: usize,
        #[arg(long = "hash-length", default_value_t = 51)]
        hash_length: usize,
        #[arg(long = "w", default_value_t = 11)]
        window: usize,
    },
    /// Word-similarity evaluation against a word-pair file
    EvalSim {
        model: PathBuf,
        pairs: PathBuf,
        #[arg(long = "hash-length", default_value_t = 51)]
        hash_length: usize,
    },
    /// Word-in-context accuracy with cross-validated hyperparameter tuning
    EvalWic {
        model: PathBuf,
        pairs: PathBuf,
        #[command(flatten)]
        grid: GridOpts,
        #[arg(long, default_value_t = 5)]
        folds: usize,
    },
    /// Contextual rank-correlation evaluation (real-valued labels)
    EvalScws {
        model: PathBuf,
        pairs: PathBuf,
        #[command(flatten)]
        grid: GridOpts,
        #[arg(long, default_value_t = 5)]
        folds: usize,
    },
    /// Complete-link clustering of static hash codes with quality axes
    Cluster {
        model: PathBuf,
        #[arg(long = "clusters", default_value_t = 200)]
        clusters: usize,
        #[arg(long = "hash-length", default_value_t = 51)]
        hash_length: usize,
        /// Cluster only the most frequent N words (0 = whole vocabulary)
        #[arg(long = "top-words", default_value_t = 0)]
        top_words: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Show the word distributions learned by the top activated units
    ProbeKc {
        model: PathBuf,
        /// Probe one unit directly
        #[arg(long)]
        unit: Option<usize>,
        /// Or activate units with a bag-of-words query sentence
        #[arg(long)]
        query: Option<String>,
        #[arg(long = "top-m", default_value_t = 10)]
        top_m: usize,
    },
    /// Measure per-epoch training time across a configuration grid
    Bench {
        #[arg(long = "k-grid", value_delimiter = ',', default_value = "100,200")]
        k_grid: Vec<usize>,
        #[arg(long = "nvoc-grid", value_delimiter = ',', default_value = "1000,2000")]
        nvoc_grid: Vec<usize>,
        #[arg(long = "samples-grid", value_delimiter = ',', default_value = "20000,40000")]
        samples_grid: Vec<usize>,
        #[arg(long = "w", default_value_t = 11)]
        window: usize,
        #[arg(long = "batch", default_value_t = 2000)]
        minibatch: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct GridOpts {
    #[arg(long = "theta-grid", value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7")]
    theta_grid: Vec<f64>,
    #[arg(long = "alpha-grid", value_delimiter = ',', default_value = "0.0,0.5,1.0")]
    alpha_grid: Vec<f64>,
    #[arg(long = "q-grid", value_delimiter = ',', default_value = "10")]
    q_grid: Vec<usize>,
    #[arg(long = "k-grid", value_delimiter = ',', default_value = "51")]
    k_grid: Vec<usize>,
    #[arg(long = "w-grid", value_delimiter = ',', default_value = "0,11")]
    w_grid: Vec<usize>,
}

impl GridOpts {
    fn expand(&self) -> Vec<DisambiguationConfig> {
        let mut grid = Vec::new();
        for &theta in &self.theta_grid {
            for &alpha in &self.alpha_grid {
                for &q in &self.q_grid {
                    for &k in &self.k_grid {
                        for &window in &self.w_grid {
                            grid.push(DisambiguationConfig {
                                alpha,
                                q,
                                theta,
                                k,
                                window,
                            });
                        }
                    }
                }
            }
        }
        grid
    }

    fn as_json(&self) -> serde_json::Value {
        json!({
            "theta_grid": self.theta_grid,
            "alpha_grid": self.alpha_grid,
            "q_grid": self.q_grid,
            "k_grid": self.k_grid,
            "w_grid": self.w_grid,
        })
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("{}", json!({"error": e.to_string()}));
        std::process::exit(1);
    }
}

fn read_corpus_samples(
    corpus: &Path,
    vocab: &Vocabulary,
    window: usize,
) -> Result<Vec<EncodedSample>> {
    let file = std::fs::File::open(corpus)?;
    let mut samples = Vec::new();
    for line in BufReader::new(file).lines() {
        let tokens = tokenize(&line?);
        for g in sentence_to_wgrams(&tokens, window, vocab)? {
            samples.push(encode_wgram(&g, vocab.len())?);
        }
    }
    Ok(samples)
}

fn corpus_tokens(corpus: &Path) -> Result<Vec<String>> {
    let file = std::fs::File::open(corpus)?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        out.extend(tokenize(&line?));
    }
    Ok(out)
}

fn query_wgram(
    vocab: &Vocabulary,
    word: &Option<String>,
    context: &Option<String>,
    target_index: Option<usize>,
    window: usize,
) -> Result<flyhash::corpus::WGram> {
    match (word, context) {
        (Some(w), None) => {
            let token = w.to_lowercase();
            let target_id = vocab
                .id_of(&token)
                .ok_or_else(|| Error::Config(format!("word '{token}' not in vocabulary")))?;
            Ok(flyhash::corpus::WGram {
                context_ids: Vec::new(),
                target_id,
            })
        }
        (None, Some(sentence)) => {
            let idx = target_index
                .ok_or_else(|| Error::Config("--context requires --target-index".into()))?;
            let tokens = tokenize(sentence);
            if idx >= tokens.len() {
                return Err(Error::Config(format!(
                    "--target-index {idx} out of range for {} tokens",
                    tokens.len()
                )));
            }
            eval_wgram(&tokens, idx, window, vocab)
                .ok_or_else(|| Error::Config(format!("target '{}' not in vocabulary", tokens[idx])))
        }
        _ => Err(Error::Config(
            "provide either a word or --context with --target-index".into(),
        )),
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Preprocess { inputs, output } => {
            let mut manifest = RunManifest::new(
                "preprocess",
                json!({"inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()}),
                0,
            );
            let mut out = std::io::BufWriter::new(std::fs::File::create(&output)?);
            let mut wrote = false;
            for input in &inputs {
                manifest.add_input(input)?;
                let text = std::fs::read_to_string(input)?;
                for paragraph in text.lines() {
                    for sentence in split_sentences(paragraph) {
                        writeln!(out, "{sentence}")?;
                        wrote = true;
                    }
                }
            }
            out.flush()?;
            if !wrote {
                eprintln!("warning: no sentences produced; output is empty");
            }
            manifest.add_artifact(&output);
            manifest.write_next_to(&output)?;
            Ok(())
        }

        Command::Vocab {
            corpus,
            vocab_size,
            output,
        } => {
            let mut manifest =
                RunManifest::new("vocab", json!({"vocab_size": vocab_size}), 0);
            manifest.add_input(&corpus)?;
            let vocab = build_vocabulary(corpus_tokens(&corpus)?, vocab_size)?;
            vocab.save(&output)?;
            manifest.add_artifact(&output);
            manifest.write_next_to(&output)?;
            Ok(())
        }

        Command::Train {
            corpus,
            vocab,
            k_units,
            window,
            epochs,
            lr0,
            minibatch,
            vocab_size,
            seed,
            probe_size,
            checkpoint_dir,
            resume,
            workers,
            output,
        } => {
            if epochs == 0 {
                return Err(Error::Config("nothing to train: --epochs 0".into()));
            }
            let mut manifest = RunManifest::new(
                "train",
                json!({
                    "K": k_units, "w": window, "epochs": epochs, "lr0": lr0,
                    "batch": minibatch, "vocab_size": vocab_size, "seed": seed,
                    "probe_size": probe_size, "workers": workers.workers,
                    "resume": resume.as_ref().map(|p| p.display().to_string()),
                }),
                seed,
            );
            manifest.add_input(&corpus)?;

            let (mut weights, vocabulary, start_epoch, seed, window) = match &resume {
                Some(ckpt) => {
                    manifest.add_input(ckpt)?;
                    let m = Model::load(ckpt)?;
                    let window = m.meta.window as usize;
                    let start = m.meta.epochs_trained as usize;
                    (m.weights, m.vocab, start, m.meta.seed, window)
                }
                None => {
                    let vocabulary = match &vocab {
                        Some(path) => {
                            manifest.add_input(path)?;
                            Vocabulary::load(path)?
                        }
                        None => build_vocabulary(corpus_tokens(&corpus)?, vocab_size)?,
                    };
                    let weights = init_weights(k_units, vocabulary.len(), seed);
                    (weights, vocabulary, 0, seed, window)
                }
            };

            let samples = read_corpus_samples(&corpus, &vocabulary, window)?;
            if samples.is_empty() {
                return Err(Error::EmptyCorpus);
            }
            let p = occurrence_probabilities(&vocabulary);
            let cfg = TrainingConfig {
                k_units: weights.k_units(),
                window,
                n_voc: vocabulary.len(),
                epochs,
                lr0,
                minibatch,
                seed,
                workers: workers.workers,
                probe_size,
                start_epoch,
            };

            let stdout = std::io::stdout();
            let ckpt_dir = checkpoint_dir.clone();
            let vocab_ref = &vocabulary;
            let reports = train_into(&mut weights, &samples, &p, &cfg, |epoch, w, report| {
                let mut lock = stdout.lock();
                writeln!(
                    lock,
                    "{}",
                    json!({
                        "epoch": report.epoch,
                        "energy": report.energy,
                        "samples_per_sec": report.samples_per_sec,
                        "seconds": report.seconds,
                        "lr": report.lr,
                    })
                )?;
                if let Some(dir) = &ckpt_dir {
                    std::fs::create_dir_all(dir)?;
                    let model = Model {
                        weights: w.clone(),
                        vocab: vocab_ref.clone(),
                        meta: ModelMeta {
                            window: window as u32,
                            seed,
                            epochs_trained: epoch as u32 + 1,
                            prng_id: SHUFFLE_PRNG_ID,
                        },
                    };
                    model.save(dir.join(format!("model.epoch{epoch:02}.flyw")))?;
                }
                Ok(())
            })?;
            let _ = reports;

            let model = Model {
                weights,
                vocab: vocabulary,
                meta: ModelMeta {
                    window: window as u32,
                    seed,
                    epochs_trained: epochs as u32,
                    prng_id: SHUFFLE_PRNG_ID,
                },
            };
            model.save(&output)?;
            manifest.add_artifact(&output);
            manifest.write_next_to(&output)?;
            Ok(())
        }

        Command::Embed {
            model,
            word,
            context,
            target_index,
            hash_length,
            window,
        } => {
            let m = Model::load(&model)?;
            let g = query_wgram(&m.vocab, &word, &context, target_index, window)?;
            let sample = encode_wgram(&g, m.vocab.len())?;
            let code = hash(&m.weights, &sample, hash_length)?;
            let indices: Vec<String> = code.ones().iter().map(|u| u.to_string()).collect();
            println!("{}", indices.join(" "));
            Ok(())
        }

        Command::Neighbors {
            model,
            word,
            context,
            target_index,
            q,
            hash_length,
            window,
        } => {
            let m = Model::load(&model)?;
            let g = query_wgram(&m.vocab, &word, &context, target_index, window)?;
            let static_codes = all_static_embeddings(&m.weights, hash_length)?;
            let ids = nearest_neighbors(&m.weights, &g, q, hash_length, &static_codes)?;
            let query_code =
                hash(&m.weights, &encode_wgram(&g, m.vocab.len())?, hash_length)?;
            let mut rows = Vec::new();
            for id in ids {
                let sim = binary_similarity(&query_code, &static_codes[id as usize])?;
                rows.push(json!({"token": m.vocab.token(id), "similarity": sim}));
            }
            println!("{}", serde_json::to_string_pretty(&json!({"neighbors": rows}))?);
            Ok(())
        }

        Command::EvalSim {
            model,
            pairs,
            hash_length,
        } => {
            let mut manifest = RunManifest::new("eval-sim", json!({"hash_length": hash_length}), 0);
            manifest.add_input(&model)?;
            manifest.add_input(&pairs)?;
            let m = Model::load(&model)?;
            let records = read_word_pairs(std::fs::File::open(&pairs)?)?;
            let (rho, coverage) = evaluate_wordsim(&m.weights, &m.vocab, &records, hash_length)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "metric": "spearman_rho",
                    "value": rho,
                    "coverage": coverage,
                    "config": {"hash_length": hash_length},
                    "manifest": manifest,
                }))?
            );
            Ok(())
        }

        Command::EvalWic {
            model,
            pairs,
            grid,
            folds,
        } => run_context_eval(model, pairs, grid, folds, DisambiguationTask::WicAccuracy),

        Command::EvalScws {
            model,
            pairs,
            grid,
            folds,
        } => run_context_eval(model, pairs, grid, folds, DisambiguationTask::ScwsRho),

        Command::Cluster {
            model,
            clusters,
            hash_length,
            top_words,
            output,
        } => {
            let mut manifest = RunManifest::new(
                "cluster",
                json!({"clusters": clusters, "hash_length": hash_length, "top_words": top_words}),
                0,
            );
            manifest.add_input(&model)?;
            let m = Model::load(&model)?;
            let n = if top_words == 0 {
                m.vocab.len()
            } else {
                top_words.min(m.vocab.len())
            };
            let codes: Vec<_> = (0..n as u32)
                .map(|id| static_embedding(&m.weights, id, hash_length))
                .collect::<Result<_>>()?;
            let assignment = agglomerative_cluster(&codes, clusters)?;
            let quality = cluster_quality(&codes, &assignment);
            {
                let mut out = std::io::BufWriter::new(std::fs::File::create(&output)?);
                for (id, c) in assignment.iter().enumerate() {
                    writeln!(out, "{}\t{}", m.vocab.token(id as u32), c)?;
                }
                out.flush()?;
            }
            manifest.add_artifact(&output);
            manifest.write_next_to(&output)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "clusters": clusters,
                    "intra_mean": quality.intra_mean,
                    "intra_std": quality.intra_std,
                    "inter_mean": quality.inter_mean,
                    "inter_std": quality.inter_std,
                }))?
            );
            Ok(())
        }

        Command::ProbeKc {
            model,
            unit,
            query,
            top_m,
        } => {
            let m = Model::load(&model)?;
            let units: Vec<usize> = match (unit, &query) {
                (Some(u), None) => vec![u],
                (None, Some(sentence)) => {
                    // bag-of-words query in the context block
                    let ids: Vec<u32> = tokenize(sentence)
                        .iter()
                        .filter_map(|t| m.vocab.id_of(t))
                        .collect();
                    if ids.is_empty() {
                        return Err(Error::Config("query has no in-vocabulary words".into()));
                    }
                    let sample = EncodedSample::from_indices(ids);
                    let acts = activations(&m.weights, &sample)?;
                    let mut order: Vec<usize> = (0..acts.len()).collect();
                    order.sort_by(|&a, &b| {
                        acts[b].partial_cmp(&acts[a]).unwrap().then(a.cmp(&b))
                    });
                    order.truncate(4);
                    order
                }
                _ => {
                    return Err(Error::Config(
                        "provide either --unit or --query".into(),
                    ))
                }
            };
            let mut report = Vec::new();
            for u in units {
                let dist = kc_word_distribution(&m.weights, u, Block::Target)?;
                let mut order: Vec<usize> = (0..dist.len()).collect();
                order.sort_by(|&a, &b| dist[b].partial_cmp(&dist[a]).unwrap().then(a.cmp(&b)));
                order.truncate(top_m);
                let words: Vec<_> = order
                    .into_iter()
                    .map(|i| json!({"token": m.vocab.token(i as u32), "prob": dist[i]}))
                    .collect();
                report.push(json!({"unit": u, "top_words": words}));
            }
            println!("{}", serde_json::to_string_pretty(&json!({"units": report}))?);
            Ok(())
        }

        Command::Bench {
            k_grid,
            nvoc_grid,
            samples_grid,
            window,
            minibatch,
            seed,
        } => {
            let mut grid = Vec::new();
            let k0 = k_grid[0];
            let n0 = nvoc_grid[0];
            let s0 = samples_grid[0];
            for &k in &k_grid {
                grid.push((k, n0, s0));
            }
            for &n in nvoc_grid.iter().skip(1) {
                grid.push((k0, n, s0));
            }
            for &s in samples_grid.iter().skip(1) {
                grid.push((k0, n0, s));
            }
            let rows = benchmark_scaling(&grid, window, minibatch, seed)?;
            println!("{}", serde_json::to_string_pretty(&json!({"rows": rows}))?);
            Ok(())
        }
    }
}

fn run_context_eval(
    model: PathBuf,
    pairs: PathBuf,
    grid: GridOpts,
    folds: usize,
    task: DisambiguationTask,
) -> Result<()> {
    let name = match task {
        DisambiguationTask::WicAccuracy => "eval-wic",
        DisambiguationTask::ScwsRho => "eval-scws",
    };
    let mut manifest = RunManifest::new(name, grid.as_json(), 0);
    manifest.add_input(&model)?;
    manifest.add_input(&pairs)?;
    let m = Model::load(&model)?;
    let records = read_context_pairs(std::fs::File::open(&pairs)?)?;
    let expanded = grid.expand();
    let (mean, std, per_fold) =
        cross_validate(&m.weights, &m.vocab, &records, folds, &expanded, task)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "metric": match task {
                DisambiguationTask::WicAccuracy => "accuracy",
                DisambiguationTask::ScwsRho => "spearman_rho",
            },
            "mean": mean,
            "std": std,
            "per_fold": per_fold,
            "folds": folds,
            "grid_size": expanded.len(),
            "manifest": manifest,
        }))?
    );
    Ok(())
}
