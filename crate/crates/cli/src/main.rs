//! `sgp`: train, decode, and evaluate string-to-graph predictors.
//!
//! The workflow mirrors the library's three stages. `gen-data` writes a
//! synthetic corpus; `pretrain-output` / `train-output` fit the graph
//! embedder contrastively; `train-regressor` fits the string encoder against
//! the frozen embedder; `decode` turns inputs into graphs; `evaluate` scores
//! predictions by edit distance; `run-experiment` sweeps the whole grid from
//! a TOML config.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sgp_core::checkpoint::Checkpoint;
use sgp_core::contrastive::{pretrain_output, train_contrastive, ContrastiveConfig, ProgressRow};
use sgp_core::corpus::gen_synthetic_corpus;
use sgp_core::dataset::{holdout_split, Dataset};
use sgp_core::decoder::{decode, CandidateIndex, DecodeStrategy, PgdConfig};
use sgp_core::embedder::{embed_batch, EmbedderConfig, EmbedderParams};
use sgp_core::evaluate::evaluate;
use sgp_core::experiment::{run_experiment, ExperimentConfig};
use sgp_core::ged::EditCosts;
use sgp_core::graph::{PaddedGraph, VariableGraph};
use sgp_core::regressor::{train_regressor, RegressorConfig, RegressorTrainConfig};

#[derive(Parser)]
#[command(name = "sgp", version, about = "String-to-graph prediction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus of strings paired with graphs.
    GenData(GenDataArgs),
    /// Contrastively pre-train the graph embedder on auxiliary output graphs.
    PretrainOutput(ContrastiveArgs),
    /// Contrastively train (or fine-tune) the graph embedder on output graphs.
    TrainOutput(ContrastiveArgs),
    /// Train the string encoder against a frozen graph embedder.
    TrainRegressor(TrainRegressorArgs),
    /// Embed a dataset's output graphs and dump them as a named-tensor file.
    Embed(EmbedArgs),
    /// Decode input strings into graphs.
    Decode(DecodeArgs),
    /// Score predictions against references by graph edit distance.
    Evaluate(EvaluateArgs),
    /// Run the full strategy × candidate-ratio grid from a TOML config.
    RunExperiment(RunExperimentArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Number of records to generate.
    #[arg(long, default_value_t = 2700)]
    n: usize,
    /// Maximum real nodes per graph (2–9).
    #[arg(long, default_value_t = 6)]
    m_max: usize,
    /// Node label count.
    #[arg(long, default_value_t = 3)]
    node_labels: usize,
    /// Edge label count, counting the no-edge label.
    #[arg(long, default_value_t = 3)]
    edge_labels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ContrastiveArgs {
    /// Training dataset (its output graphs are the training set).
    #[arg(long)]
    data: PathBuf,
    /// Warm-start checkpoint (train-output only).
    #[arg(long)]
    pretrain_ckpt: Option<PathBuf>,
    /// Padded graph size; defaults to the largest graph in the data.
    #[arg(long)]
    m_max: Option<usize>,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Loss temperature.
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    /// Constant added inside the loss logarithm.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Node-dropping augmentation rate.
    #[arg(long, default_value_t = 0.05)]
    drop_rate: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Optimization step budget.
    #[arg(long, default_value_t = 2000)]
    steps: u64,
    /// Validation evaluations without improvement before stopping
    /// (train-output only; pre-training runs its full budget).
    #[arg(long, default_value_t = 10)]
    patience: u32,
    /// Steps between validation evaluations.
    #[arg(long, default_value_t = 100)]
    eval_every: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Progress CSV path; defaults to the checkpoint path with a .progress.csv suffix.
    #[arg(long)]
    progress: Option<PathBuf>,
}

#[derive(Args)]
struct TrainRegressorArgs {
    /// Training dataset.
    #[arg(long)]
    data: PathBuf,
    /// Validation dataset; when omitted, a tenth of the training data is
    /// held out instead.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Frozen graph-embedder checkpoint.
    #[arg(long)]
    embedder_ckpt: PathBuf,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    /// Token capacity per input; 0 measures the longest training or
    /// validation string.
    #[arg(long, default_value_t = 0)]
    max_len: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 2000)]
    steps: u64,
    /// Validation evaluations without improvement before stopping.
    #[arg(long, default_value_t = 10)]
    patience: u32,
    /// Steps between validation evaluations.
    #[arg(long, default_value_t = 200)]
    eval_every: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Progress CSV path; defaults to the checkpoint path with a .progress.csv suffix.
    #[arg(long)]
    progress: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Graph-embedder checkpoint.
    #[arg(long)]
    embedder_ckpt: PathBuf,
    /// Dataset whose output graphs are embedded.
    #[arg(long)]
    data: PathBuf,
    /// Named-tensor output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    /// Dataset providing the input strings (and the label alphabets for the
    /// prediction file).
    #[arg(long)]
    input_data: PathBuf,
    #[arg(long)]
    regressor_ckpt: PathBuf,
    #[arg(long)]
    embedder_ckpt: PathBuf,
    /// Dataset whose output graphs form the candidate set.
    #[arg(long)]
    candidates: PathBuf,
    /// candidate, pgd-random, or pgd-best.
    #[arg(long, default_value = "candidate")]
    strategy: String,
    /// Descent step size.
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Descent iteration count.
    #[arg(long, default_value_t = 150)]
    steps: usize,
    /// Return the final iterate instead of the best one seen.
    #[arg(long)]
    last_iterate: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Predictions output path (dataset format, one record per input).
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV of per-example objective traces (example, iter, objective).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predictions in dataset format.
    #[arg(long)]
    predictions: PathBuf,
    /// References in dataset format, aligned with the predictions.
    #[arg(long)]
    references: PathBuf,
    /// Compare edge presence only, ignoring edge labels.
    #[arg(long)]
    no_edge_labels: bool,
    /// Optional CSV of per-example distances (example, ged).
    #[arg(long)]
    per_example: Option<PathBuf>,
}

#[derive(Args)]
struct RunExperimentArgs {
    /// Experiment TOML config.
    #[arg(long)]
    config: PathBuf,
    /// Report output directory.
    #[arg(long, default_value = "experiment-out")]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenData(args) => gen_data(args),
        Command::PretrainOutput(args) => contrastive(args, true),
        Command::TrainOutput(args) => contrastive(args, false),
        Command::TrainRegressor(args) => regressor(args),
        Command::Embed(args) => embed_graphs(args),
        Command::Decode(args) => decode_inputs(args),
        Command::Evaluate(args) => evaluate_predictions(args),
        Command::RunExperiment(args) => experiment(args),
    }
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let ds = gen_synthetic_corpus(args.n, args.m_max, args.node_labels, args.edge_labels, args.seed)
        .context("corpus generation failed")?;
    ds.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} records to {} ({} node labels, {} edge labels, graphs up to {} nodes)",
        ds.len(),
        args.out.display(),
        args.node_labels,
        args.edge_labels,
        args.m_max
    );
    Ok(())
}

/// Pad a dataset's graphs to one shared size, defaulting to the largest
/// graph present.
fn padded_outputs(ds: &Dataset, m_max: Option<usize>) -> Result<(usize, Vec<PaddedGraph>)> {
    let largest = ds.graphs().map(|g| g.n()).max().unwrap_or(0);
    let m_max = m_max.unwrap_or(largest.max(2));
    if largest > m_max {
        bail!("a graph has {} nodes but the padded size is {}", largest, m_max);
    }
    Ok((m_max, ds.padded_graphs(m_max)?))
}

fn progress_path(out: &Path, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".progress.csv");
        out.with_file_name(name)
    })
}

fn write_progress(path: &Path, log: &[ProgressRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "step,train_loss,val_loss")?;
    for row in log {
        match row.val_loss {
            Some(v) => writeln!(w, "{},{:.6},{:.6}", row.step, row.train_loss, v)?,
            None => writeln!(w, "{},{:.6},", row.step, row.train_loss)?,
        }
    }
    w.flush()?;
    Ok(())
}

fn contrastive(args: ContrastiveArgs, pretrain: bool) -> Result<()> {
    let ds = Dataset::load(&args.data)?;
    let (m_max, graphs) = padded_outputs(&ds, args.m_max)?;
    let cfg = EmbedderConfig { layers: args.layers, hidden: args.hidden, dim: args.dim };
    let ccfg = ContrastiveConfig {
        temperature: args.tau,
        epsilon: args.epsilon,
        drop_rate: args.drop_rate,
        batch_size: args.batch,
        learning_rate: args.lr,
        max_steps: args.steps,
        pretrain_steps: args.steps,
        patience: args.patience,
        eval_every: args.eval_every,
        seed: args.seed,
    };

    let outcome = if pretrain {
        if args.pretrain_ckpt.is_some() {
            bail!("--pretrain-ckpt only applies to train-output");
        }
        pretrain_output(&graphs, cfg, &ccfg)?
    } else {
        let init = match &args.pretrain_ckpt {
            Some(path) => {
                let params = EmbedderParams::from_checkpoint(&Checkpoint::load(path)?)?;
                if params.space != ds.space(m_max) {
                    bail!(
                        "warm-start checkpoint was trained on a different graph space \
                         (padded size or alphabet sizes differ)"
                    );
                }
                Some(params)
            }
            None => None,
        };
        train_contrastive(&graphs, cfg, &ccfg, init)?
    };

    outcome.params.to_checkpoint()?.save(&args.out)?;
    let progress = progress_path(&args.out, args.progress);
    write_progress(&progress, &outcome.log)?;
    let last = outcome.log.last().context("training produced no progress rows")?;
    println!(
        "{} embedder on {} graphs: step {} train loss {:.4}{} -> {} (progress: {})",
        if pretrain { "pre-trained" } else { "trained" },
        graphs.len(),
        last.step,
        last.train_loss,
        last.val_loss.map(|v| format!(" val loss {:.4}", v)).unwrap_or_default(),
        args.out.display(),
        progress.display()
    );
    Ok(())
}

fn regressor(args: TrainRegressorArgs) -> Result<()> {
    let embedder = EmbedderParams::from_checkpoint(&Checkpoint::load(&args.embedder_ckpt)?)?;
    let ds = Dataset::load(&args.data)?;
    let m_max = embedder.space.m_max;

    let pad_pairs = |pairs: &[(String, VariableGraph)]| -> Result<Vec<(String, PaddedGraph)>> {
        pairs
            .iter()
            .map(|(s, g)| {
                Ok((s.clone(), PaddedGraph::from_variable(embedder.space, g)?))
            })
            .collect()
    };

    let (train, val) = match &args.val {
        Some(path) => {
            let vds = Dataset::load(path)?;
            if vds.alphabets().node_names() != ds.alphabets().node_names()
                || vds.alphabets().edge_names() != ds.alphabets().edge_names()
            {
                bail!("training and validation datasets use different label alphabets");
            }
            (pad_pairs(ds.pairs())?, pad_pairs(vds.pairs())?)
        }
        None => {
            let (train_idx, val_idx) = holdout_split(ds.len(), 0.1, args.seed)?;
            let pick = |idx: &[usize]| -> Vec<(String, VariableGraph)> {
                idx.iter().map(|&i| ds.pairs()[i].clone()).collect()
            };
            (pad_pairs(&pick(&train_idx))?, pad_pairs(&pick(&val_idx))?)
        }
    };

    let max_len = if args.max_len > 0 {
        args.max_len
    } else {
        let longest = train
            .iter()
            .chain(&val)
            .map(|(s, _)| s.chars().count())
            .max()
            .unwrap_or(0);
        longest + 1 // room for the start-of-sequence token
    };
    let cfg = RegressorConfig {
        layers: args.layers,
        width: args.width,
        heads: args.heads,
        max_len,
        dim: embedder.cfg.dim,
    };
    let tcfg = RegressorTrainConfig {
        batch_size: args.batch,
        learning_rate: args.lr,
        max_steps: args.steps,
        patience: args.patience,
        eval_every: args.eval_every,
        seed: args.seed,
    };
    let outcome = train_regressor(&train, &val, &embedder, cfg, &tcfg)?;

    outcome.params.to_checkpoint()?.save(&args.out)?;
    let progress = progress_path(&args.out, args.progress);
    write_progress(&progress, &outcome.log)?;
    let last = outcome.log.last().context("training produced no progress rows")?;
    println!(
        "trained encoder on {} inputs (padded size {}, token capacity {}): step {} train loss {:.5}{} -> {} (progress: {})",
        train.len(),
        m_max,
        max_len,
        last.step,
        last.train_loss,
        last.val_loss.map(|v| format!(" val loss {:.5}", v)).unwrap_or_default(),
        args.out.display(),
        progress.display()
    );
    Ok(())
}

fn embed_graphs(args: EmbedArgs) -> Result<()> {
    let params = EmbedderParams::from_checkpoint(&Checkpoint::load(&args.embedder_ckpt)?)?;
    let ds = Dataset::load(&args.data)?;
    let relaxed: Vec<_> = ds
        .padded_graphs(params.space.m_max)?
        .iter()
        .map(|g| g.relax())
        .collect();
    let embeddings = embed_batch(&relaxed, &params)?;

    let dim = params.cfg.dim;
    let mut data = Vec::with_capacity(embeddings.len() * dim);
    for e in &embeddings {
        data.extend_from_slice(e.as_slice());
    }
    let stacked = sgp_core::Tensor::new(vec![embeddings.len(), dim], data)?;
    let mut ck = Checkpoint::with_meta(
        "embedding-targets",
        serde_json::json!({ "count": embeddings.len(), "dim": dim }),
    );
    ck.add("targets", stacked)?;
    ck.save(&args.out)?;
    println!(
        "embedded {} graphs into {}-dimensional targets -> {}",
        embeddings.len(),
        dim,
        args.out.display()
    );
    Ok(())
}

fn decode_inputs(args: DecodeArgs) -> Result<()> {
    let strategy: DecodeStrategy = args.strategy.parse()?;
    let embedder = EmbedderParams::from_checkpoint(&Checkpoint::load(&args.embedder_ckpt)?)?;
    let regressor = sgp_core::regressor::RegressorParams::from_checkpoint(&Checkpoint::load(
        &args.regressor_ckpt,
    )?)?;
    if regressor.cfg.dim != embedder.cfg.dim {
        bail!(
            "encoder outputs {} dimensions but the embedder expects {}",
            regressor.cfg.dim,
            embedder.cfg.dim
        );
    }
    let inputs = Dataset::load(&args.input_data)?;
    let candidates = Dataset::load(&args.candidates)?;
    let index = CandidateIndex::build(
        candidates.padded_graphs(embedder.space.m_max)?,
        &embedder,
    )?;
    let pgd = PgdConfig { eta: args.eta, steps: args.steps, best_iterate: !args.last_iterate };
    pgd.validate()?;

    let mut predictions = Vec::with_capacity(inputs.len());
    let mut traces = Vec::with_capacity(inputs.len());
    for (i, (x, _)) in inputs.pairs().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed + 1 + i as u64);
        let out = decode(x, &regressor, &embedder, &index, strategy, &pgd, &mut rng)
            .with_context(|| format!("decoding input {} ({:?})", i, x))?;
        predictions.push((x.clone(), out.graph));
        traces.push(out.trace);
    }

    Dataset::new(inputs.alphabets().clone(), predictions)?.save(&args.out)?;
    if let Some(trace_path) = &args.trace {
        let mut w = BufWriter::new(File::create(trace_path)?);
        writeln!(w, "example,iter,objective")?;
        for (i, trace) in traces.iter().enumerate() {
            for (iter, objective) in trace.iter().enumerate() {
                writeln!(w, "{},{},{:.6}", i, iter, objective)?;
            }
        }
        w.flush()?;
    }
    println!(
        "decoded {} inputs with {} over {} candidates -> {}",
        inputs.len(),
        strategy,
        index.len(),
        args.out.display()
    );
    Ok(())
}

fn evaluate_predictions(args: EvaluateArgs) -> Result<()> {
    let preds = Dataset::load(&args.predictions)?;
    let refs = Dataset::load(&args.references)?;
    if preds.alphabets().node_names() != refs.alphabets().node_names()
        || preds.alphabets().edge_names() != refs.alphabets().edge_names()
    {
        bail!("prediction and reference datasets use different label alphabets");
    }
    let pred_graphs: Vec<VariableGraph> = preds.graphs().cloned().collect();
    let ref_graphs: Vec<VariableGraph> = refs.graphs().cloned().collect();
    let costs = EditCosts { use_edge_labels: !args.no_edge_labels };
    let metrics = evaluate(&pred_graphs, &ref_graphs, costs)?;

    if let Some(path) = &args.per_example {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "example,ged")?;
        for (i, g) in metrics.geds.iter().enumerate() {
            writeln!(w, "{},{}", i, g)?;
        }
        w.flush()?;
    }
    println!(
        "mean GED {:.3} ± {:.3} over {} examples, {} perfect ({})",
        metrics.mean_ged,
        metrics.std_ged,
        metrics.count,
        metrics.perfect,
        if args.no_edge_labels { "edge presence only" } else { "with edge labels" }
    );
    Ok(())
}

fn experiment(args: RunExperimentArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&args.config)?;
    std::fs::create_dir_all(&args.out)?;
    let report = run_experiment(&cfg, &args.out)?;
    print!("{}", report.summary);
    if !report.failures.is_empty() {
        bail!("{} grid cells failed; see the summary above", report.failures.len());
    }
    println!("reports written to {}", args.out.display());
    Ok(())
}
