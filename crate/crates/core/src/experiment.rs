//! Experiment orchestration: run the full train-and-decode pipeline over a
//! grid of seeds, decoding strategies, and candidate-set ratios, and write a
//! reproducible report.
//!
//! Per seed: generate a corpus split, train the graph embedder contrastively
//! (optionally after a pre-training phase on the same outputs), train the
//! string regressor against the frozen embedder, then decode the test split
//! once per strategy × ratio cell. All randomness derives from the cell's
//! seed, so identical configs produce byte-identical reports. A failing cell
//! is recorded and the run continues.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrastive::{pretrain_output, train_contrastive, ContrastiveConfig};
use crate::corpus::gen_synthetic_corpus;
use crate::decoder::{decode, CandidateIndex, DecodeStrategy, PgdConfig};
use crate::embedder::{EmbedderConfig, EmbedderParams};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate, mean_std, modal_graph};
use crate::ged::EditCosts;
use crate::graph::{PaddedGraph, VariableGraph};
use crate::regressor::{
    train_regressor, RegressorConfig, RegressorParams, RegressorTrainConfig,
};

/// Full-scale reference numbers printed in the summary for orientation.
/// They come from a much larger dataset and compute budget and are not
/// comparable to desk-scale results, so they are never asserted against.
pub const REFERENCE_MEAN_GED: f64 = 2.252;
pub const REFERENCE_STD_GED: f64 = 0.102;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Maximum real nodes per generated graph; also the padded size.
    pub m_max: usize,
    /// Node label count.
    pub node_labels: usize,
    /// Edge label count including the no-edge label.
    pub edge_labels: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            n_train: 2000,
            n_val: 200,
            n_test: 500,
            m_max: 6,
            node_labels: 3,
            edge_labels: 3,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressorSettings {
    pub layers: usize,
    pub width: usize,
    pub heads: usize,
    /// 0 means "measure the longest corpus string".
    pub max_len: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_steps: u64,
    pub patience: u32,
    pub eval_every: u64,
}

impl Default for RegressorSettings {
    fn default() -> Self {
        RegressorSettings {
            layers: 2,
            width: 64,
            heads: 4,
            max_len: 0,
            batch_size: 32,
            learning_rate: 1e-3,
            max_steps: 2000,
            patience: 10,
            eval_every: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeSettings {
    pub eta: f64,
    pub steps: usize,
    pub best_iterate: bool,
}

impl Default for DecodeSettings {
    fn default() -> Self {
        let d = PgdConfig::default();
        DecodeSettings { eta: d.eta, steps: d.steps, best_iterate: d.best_iterate }
    }
}

impl From<DecodeSettings> for PgdConfig {
    fn from(s: DecodeSettings) -> PgdConfig {
        PgdConfig { eta: s.eta, steps: s.steps, best_iterate: s.best_iterate }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub seeds: Vec<u64>,
    /// Strategy names as accepted by the decoder ("candidate", "pgd-random",
    /// "pgd-best").
    pub strategies: Vec<String>,
    pub candidate_ratios: Vec<f64>,
    /// Whether edit distance compares edge labels or only edge presence.
    pub use_edge_labels: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            seeds: vec![0],
            strategies: vec!["candidate".into(), "pgd-best".into()],
            candidate_ratios: vec![1.0],
            use_edge_labels: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub embedder: EmbedderConfig,
    pub contrastive: ContrastiveConfig,
    pub regressor: RegressorSettings,
    pub decode: DecodeSettings,
    pub experiment: RunSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataConfig::default(),
            embedder: EmbedderConfig::default(),
            contrastive: ContrastiveConfig::default(),
            regressor: RegressorSettings::default(),
            decode: DecodeSettings::default(),
            experiment: RunSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.n_train == 0 || self.data.n_test == 0 {
            return Err(Error::Config("train and test splits must be non-empty".into()));
        }
        if self.experiment.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.experiment.strategies.is_empty() || self.experiment.candidate_ratios.is_empty() {
            return Err(Error::Config("strategy and ratio grids must be non-empty".into()));
        }
        for s in &self.experiment.strategies {
            s.parse::<DecodeStrategy>()?;
        }
        for &r in &self.experiment.candidate_ratios {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Config(format!("candidate ratio {} outside (0, 1]", r)));
            }
        }
        Ok(())
    }
}

/// One grid cell's results.
#[derive(Clone, Debug)]
pub struct ReportRow {
    pub seed: u64,
    pub strategy: String,
    pub ratio: f64,
    pub mean_ged: f64,
    pub std_ged: f64,
    pub perfect: usize,
    pub count: usize,
    pub mean_objective: f64,
}

/// Cross-seed aggregate for one strategy × ratio cell.
#[derive(Clone, Debug)]
pub struct AggregateRow {
    pub strategy: String,
    pub ratio: f64,
    pub mean_ged: f64,
    pub std_ged_across_seeds: f64,
    pub mean_perfect: f64,
    pub std_perfect_across_seeds: f64,
    pub mean_objective: f64,
    pub seeds: usize,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<AggregateRow>,
    /// Modal-graph constant-predictor baseline mean GED per seed.
    pub baseline_mean_ged: Vec<(u64, f64)>,
    pub failures: Vec<String>,
    pub summary: String,
}

/// Models trained for one seed, reused across every strategy × ratio cell.
struct SeedArtifacts {
    embedder: EmbedderParams,
    regressor: RegressorParams,
    index: CandidateIndex,
    test_inputs: Vec<String>,
    test_refs: Vec<VariableGraph>,
    baseline_mean_ged: f64,
}

fn train_for_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedArtifacts> {
    let d = &cfg.data;
    let total = d.n_train + d.n_val + d.n_test;
    let corpus =
        gen_synthetic_corpus(total, d.m_max, d.node_labels, d.edge_labels, seed)?;
    let pairs = corpus.pairs();
    let train = &pairs[..d.n_train];
    let val = &pairs[d.n_train..d.n_train + d.n_val];
    let test = &pairs[d.n_train + d.n_val..];
    let space = corpus.space(d.m_max);

    let pad = |gs: &[(String, VariableGraph)]| -> Result<Vec<(String, PaddedGraph)>> {
        gs.iter()
            .map(|(s, g)| Ok((s.clone(), PaddedGraph::from_variable(space, g)?)))
            .collect()
    };
    let train_padded = pad(train)?;
    let val_padded = pad(val)?;
    let train_outputs: Vec<PaddedGraph> =
        train_padded.iter().map(|(_, g)| g.clone()).collect();

    // Graph embedder: optional pre-training phase, then contrastive training
    // with early stopping.
    let mut ccfg = cfg.contrastive;
    ccfg.seed = seed;
    let init = if ccfg.pretrain_steps > 0 {
        Some(pretrain_output(&train_outputs, cfg.embedder, &ccfg)?.params)
    } else {
        None
    };
    let embedder = train_contrastive(&train_outputs, cfg.embedder, &ccfg, init)?.params;

    // String regressor against the frozen embedder.
    let r = &cfg.regressor;
    let max_len = if r.max_len == 0 { corpus.max_input_len() } else { r.max_len };
    let rcfg = RegressorConfig {
        layers: r.layers,
        width: r.width,
        heads: r.heads,
        max_len,
        dim: cfg.embedder.dim,
    };
    let tcfg = RegressorTrainConfig {
        batch_size: r.batch_size,
        learning_rate: r.learning_rate,
        max_steps: r.max_steps,
        patience: r.patience,
        eval_every: r.eval_every,
        seed,
    };
    let regressor = train_regressor(&train_padded, &val_padded, &embedder, rcfg, &tcfg)?.params;

    let index = CandidateIndex::build(train_outputs, &embedder)?;
    let test_refs: Vec<VariableGraph> = test.iter().map(|(_, g)| g.clone()).collect();
    let train_refs: Vec<VariableGraph> = train.iter().map(|(_, g)| g.clone()).collect();
    let modal = modal_graph(&train_refs)?;
    let costs = EditCosts { use_edge_labels: cfg.experiment.use_edge_labels };
    let baseline_preds: Vec<VariableGraph> = vec![modal; test_refs.len()];
    let baseline = evaluate(&baseline_preds, &test_refs, costs)?;

    Ok(SeedArtifacts {
        embedder,
        regressor,
        index,
        test_inputs: test.iter().map(|(s, _)| s.clone()).collect(),
        test_refs,
        baseline_mean_ged: baseline.mean_ged,
    })
}

/// Deterministic per-cell seed derivation.
fn cell_seed(seed: u64, strategy_idx: usize, ratio_idx: usize) -> u64 {
    seed.wrapping_mul(1_000_003)
        .wrapping_add(strategy_idx as u64 * 1009)
        .wrapping_add(ratio_idx as u64 + 1)
}

fn run_cell(
    cfg: &ExperimentConfig,
    art: &SeedArtifacts,
    seed: u64,
    strategy_idx: usize,
    ratio_idx: usize,
) -> Result<ReportRow> {
    use rand::SeedableRng;
    let strategy_name = &cfg.experiment.strategies[strategy_idx];
    let strategy: DecodeStrategy = strategy_name.parse()?;
    let ratio = cfg.experiment.candidate_ratios[ratio_idx];
    let base = cell_seed(seed, strategy_idx, ratio_idx);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(base);
    let index = art.index.subsample(ratio, &mut rng)?;
    let pgd: PgdConfig = cfg.decode.into();

    // Each example gets its own derived seed so decoding parallelizes
    // without losing determinism.
    let outcomes: Vec<(VariableGraph, f64)> = art
        .test_inputs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut ex_rng =
                rand_chacha::ChaCha8Rng::seed_from_u64(base.wrapping_add(1 + i as u64));
            let out =
                decode(x, &art.regressor, &art.embedder, &index, strategy, &pgd, &mut ex_rng)?;
            Ok((out.graph, out.objective))
        })
        .collect::<Result<_>>()?;
    let predictions: Vec<VariableGraph> = outcomes.iter().map(|(g, _)| g.clone()).collect();
    let objectives: Vec<f64> = outcomes.iter().map(|(_, o)| *o).collect();
    let costs = EditCosts { use_edge_labels: cfg.experiment.use_edge_labels };
    let metrics = evaluate(&predictions, &art.test_refs, costs)?;
    let (mean_objective, _) = mean_std(&objectives)?;
    Ok(ReportRow {
        seed,
        strategy: strategy_name.clone(),
        ratio,
        mean_ged: metrics.mean_ged,
        std_ged: metrics.std_ged,
        perfect: metrics.perfect,
        count: metrics.count,
        mean_objective,
    })
}

fn aggregate_rows(cfg: &ExperimentConfig, rows: &[ReportRow]) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for strategy in &cfg.experiment.strategies {
        for &ratio in &cfg.experiment.candidate_ratios {
            let cell: Vec<&ReportRow> = rows
                .iter()
                .filter(|r| &r.strategy == strategy && r.ratio == ratio)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let geds: Vec<f64> = cell.iter().map(|r| r.mean_ged).collect();
            let perfects: Vec<f64> = cell.iter().map(|r| r.perfect as f64).collect();
            let objectives: Vec<f64> = cell.iter().map(|r| r.mean_objective).collect();
            let (mean_ged, std_ged) = mean_std(&geds).expect("non-empty");
            let (mean_perfect, std_perfect) = mean_std(&perfects).expect("non-empty");
            let (mean_objective, _) = mean_std(&objectives).expect("non-empty");
            out.push(AggregateRow {
                strategy: strategy.clone(),
                ratio,
                mean_ged,
                std_ged_across_seeds: std_ged,
                mean_perfect,
                std_perfect_across_seeds: std_perfect,
                mean_objective,
                seeds: cell.len(),
            });
        }
    }
    out
}

fn render_report_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from("seed,strategy,ratio,mean_ged,std_ged,perfect,count,mean_objective\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{:.6},{},{},{:.6}",
            r.seed, r.strategy, r.ratio, r.mean_ged, r.std_ged, r.perfect, r.count,
            r.mean_objective
        );
    }
    s
}

fn render_aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut s = String::from(
        "strategy,ratio,mean_ged,std_ged_across_seeds,mean_perfect,std_perfect_across_seeds,mean_objective,seeds\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            r.strategy,
            r.ratio,
            r.mean_ged,
            r.std_ged_across_seeds,
            r.mean_perfect,
            r.std_perfect_across_seeds,
            r.mean_objective,
            r.seeds
        );
    }
    s
}

/// Plot-ready series: candidate ratio on the x axis, one row per strategy ×
/// ratio with the aggregated y value and its spread.
fn render_plot_csv(rows: &[AggregateRow], which: &str) -> String {
    let mut s = String::from("strategy,ratio,value,std\n");
    for r in rows {
        let (v, sd) = match which {
            "ged" => (r.mean_ged, r.std_ged_across_seeds),
            _ => (r.mean_perfect, r.std_perfect_across_seeds),
        };
        let _ = writeln!(s, "{},{:.6},{:.6},{:.6}", r.strategy, r.ratio, v, sd);
    }
    s
}

fn render_summary(
    cfg: &ExperimentConfig,
    aggregates: &[AggregateRow],
    baseline: &[(u64, f64)],
    failures: &[String],
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Decoding-strategy grid over candidate ratios");
    let _ = writeln!(
        s,
        "corpus: {} train / {} val / {} test, up to {} nodes",
        cfg.data.n_train, cfg.data.n_val, cfg.data.n_test, cfg.data.m_max
    );
    let _ = writeln!(s, "seeds: {:?}", cfg.experiment.seeds);
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<12} {:>6} {:>22} {:>22} {:>12}",
        "strategy", "ratio", "mean GED ± std", "perfect ± std", "objective"
    );
    for r in aggregates {
        let _ = writeln!(
            s,
            "{:<12} {:>6.2} {:>12.4} ± {:<7.4} {:>12.2} ± {:<7.2} {:>12.6}",
            r.strategy,
            r.ratio,
            r.mean_ged,
            r.std_ged_across_seeds,
            r.mean_perfect,
            r.std_perfect_across_seeds,
            r.mean_objective
        );
    }
    let _ = writeln!(s);
    if let Ok((mean, std)) = mean_std(&baseline.iter().map(|&(_, g)| g).collect::<Vec<_>>()) {
        let _ = writeln!(
            s,
            "constant-predictor baseline (modal training graph): mean GED {:.4} ± {:.4}",
            mean, std
        );
    }
    let _ = writeln!(
        s,
        "full-scale reference (different data and compute scale; for orientation only, \
         not comparable and not asserted): mean GED {:.3} ± {:.3}",
        REFERENCE_MEAN_GED, REFERENCE_STD_GED
    );
    if !failures.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "failed cells ({}):", failures.len());
        for f in failures {
            let _ = writeln!(s, "  {}", f);
        }
    }
    s
}

/// Run the whole grid and write `report.csv`, `aggregate.csv`,
/// `plot_ged.csv`, `plot_perfect.csv`, and `summary.txt` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut baseline_mean_ged = Vec::new();

    for &seed in &cfg.experiment.seeds {
        let art = match train_for_seed(cfg, seed) {
            Ok(a) => a,
            Err(e) => {
                failures.push(format!("seed {}: training failed: {}", seed, e));
                continue;
            }
        };
        baseline_mean_ged.push((seed, art.baseline_mean_ged));
        for strategy_idx in 0..cfg.experiment.strategies.len() {
            for ratio_idx in 0..cfg.experiment.candidate_ratios.len() {
                match run_cell(cfg, &art, seed, strategy_idx, ratio_idx) {
                    Ok(row) => rows.push(row),
                    Err(e) => failures.push(format!(
                        "seed {} strategy {} ratio {}: {}",
                        seed,
                        cfg.experiment.strategies[strategy_idx],
                        cfg.experiment.candidate_ratios[ratio_idx],
                        e
                    )),
                }
            }
        }
    }

    let aggregates = aggregate_rows(cfg, &rows);
    let summary = render_summary(cfg, &aggregates, &baseline_mean_ged, &failures);
    std::fs::write(out_dir.join("report.csv"), render_report_csv(&rows))?;
    std::fs::write(out_dir.join("aggregate.csv"), render_aggregate_csv(&aggregates))?;
    std::fs::write(out_dir.join("plot_ged.csv"), render_plot_csv(&aggregates, "ged"))?;
    std::fs::write(out_dir.join("plot_perfect.csv"), render_plot_csv(&aggregates, "perfect"))?;
    std::fs::write(out_dir.join("summary.txt"), &summary)?;

    Ok(ExperimentReport { rows, aggregates, baseline_mean_ged, failures, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.data = DataConfig {
            n_train: 24,
            n_val: 6,
            n_test: 8,
            m_max: 4,
            node_labels: 2,
            edge_labels: 2,
        };
        cfg.embedder = EmbedderConfig { layers: 1, hidden: 8, dim: 8 };
        cfg.contrastive = ContrastiveConfig {
            batch_size: 8,
            max_steps: 12,
            eval_every: 6,
            seed: 0,
            ..Default::default()
        };
        cfg.regressor = RegressorSettings {
            layers: 1,
            width: 8,
            heads: 2,
            max_len: 0,
            batch_size: 8,
            learning_rate: 1e-3,
            max_steps: 12,
            patience: 5,
            eval_every: 6,
        };
        cfg.decode = DecodeSettings { eta: 1.0, steps: 3, best_iterate: true };
        cfg.experiment = RunSettings {
            seeds: vec![1],
            strategies: vec!["candidate".into(), "pgd-best".into()],
            candidate_ratios: vec![0.5, 1.0],
            use_edge_labels: true,
        };
        cfg
    }

    #[test]
    fn toml_roundtrip_and_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [data]
            n_train = 10
            n_val = 2
            n_test = 3
            m_max = 4
            node_labels = 2
            edge_labels = 2

            [experiment]
            seeds = [7, 8]
            strategies = ["candidate"]
            candidate_ratios = [1.0]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.data.n_train, 10);
        assert_eq!(cfg.experiment.seeds, vec![7, 8]);
        // Unspecified sections fall back to defaults.
        assert_eq!(cfg.embedder.dim, 64);
        assert_eq!(cfg.regressor.width, 64);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("[experiment]\nseeds = []").is_err());
        assert!(ExperimentConfig::from_toml_str(
            "[experiment]\nstrategies = [\"beam\"]"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml_str(
            "[experiment]\ncandidate_ratios = [2.0]"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml_str("[data]\nbogus_field = 3").is_err());
    }

    #[test]
    fn tiny_grid_produces_a_full_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config();
        let report = run_experiment(&cfg, dir.path()).unwrap();
        assert!(report.failures.is_empty(), "failures: {:?}", report.failures);
        // 1 seed × 2 strategies × 2 ratios.
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.aggregates.len(), 4);
        assert_eq!(report.baseline_mean_ged.len(), 1);
        for name in ["report.csv", "aggregate.csv", "plot_ged.csv", "plot_perfect.csv", "summary.txt"]
        {
            assert!(dir.path().join(name).exists(), "{} missing", name);
        }
        let report_csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert_eq!(report_csv.lines().count(), 5); // header + 4 rows
        assert!(report.summary.contains("2.252"));
    }

    #[test]
    fn identical_runs_write_identical_bytes() {
        let cfg = tiny_config();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run_experiment(&cfg, d1.path()).unwrap();
        run_experiment(&cfg, d2.path()).unwrap();
        for name in ["report.csv", "aggregate.csv", "plot_ged.csv", "plot_perfect.csv", "summary.txt"]
        {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{} differs between identical runs", name);
        }
    }

    #[test]
    fn pgd_best_objective_never_exceeds_candidate_objective() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config();
        let report = run_experiment(&cfg, dir.path()).unwrap();
        for &ratio in &cfg.experiment.candidate_ratios {
            let find = |strategy: &str| {
                report
                    .rows
                    .iter()
                    .find(|r| r.strategy == strategy && r.ratio == ratio)
                    .unwrap()
                    .mean_objective
            };
            assert!(find("pgd-best") <= find("candidate") + 1e-12, "ratio {}", ratio);
        }
    }

    #[test]
    fn failed_cells_are_recorded_and_skipped() {
        // An oversized regressor head split fails per-seed training.
        let mut cfg = tiny_config();
        cfg.regressor.heads = 3;
        let dir = tempfile::tempdir().unwrap();
        let report = run_experiment(&cfg, dir.path()).unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.failures.len(), 1);
        assert!(report.summary.contains("failed cells"));
    }
}
