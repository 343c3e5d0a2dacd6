//! The end-to-end correlation study over a toy world: one model per
//! corruption rate, every model scored on every stratum, then correlations
//! and rankings of the 504 pre-gen metrics against each post-gen metric.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::datamodel::{Dataset, Token, TraceSet};
use crate::error::{Error, Result};
use crate::postgen::IdfTable;
use crate::pregen::{enumerate_metrics, PregenConfig, PregenMetricId};
use crate::stats::CorrelationResult;
use crate::strat::{
    self, correlate, expand_strata, postgen_metrics_in, rank_pregen, ModelRun, Ranking, ScoreTable,
};
use crate::toyworld::{beam_search, emit_traces, gen_world, toy_embeddings, ToyModel, ToyWorld};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub seed: u64,
    pub num_images: usize,
    pub refs_per_image: usize,
    pub epsilon_grid: Vec<f64>,
    pub alpha: f64,
    pub k_values: Vec<usize>,
    pub beam_width: usize,
    pub max_len: usize,
    pub embedding_dim: usize,
    pub pregen: PregenConfig,
    pub top_k: usize,
    /// Worker threads; `None` lets rayon decide.
    pub threads: Option<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            seed: 42,
            num_images: 100,
            refs_per_image: 3,
            epsilon_grid: (0..10).map(|i| i as f64 / 10.0).collect(),
            alpha: 0.05,
            k_values: vec![1, 2, 3, 4, 5],
            beam_width: 3,
            max_len: 16,
            embedding_dim: 16,
            pregen: PregenConfig::default(),
            top_k: 5,
            threads: None,
        }
    }
}

pub fn model_id(epsilon: f64) -> String {
    format!("eps{epsilon:.2}")
}

/// Decodes every image of the world with beam search.
pub fn decode_world(model: &ToyModel, world: &ToyWorld, width: usize, max_len: usize) -> Result<Dataset> {
    let captions: BTreeMap<String, Vec<Token>> = world
        .images()
        .iter()
        .map(|img| {
            (
                img.image_id.clone(),
                beam_search(model, &img.attributes, width, max_len),
            )
        })
        .collect();
    world.dataset().with_generated(&captions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    pub table: ScoreTable,
    pub analysis: Analysis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    /// Every pre-gen × post-gen pair over its finite samples.
    pub correlations: Vec<CorrelationResult>,
    pub rankings: Vec<Ranking>,
}

pub fn run_study(config: &StudyConfig) -> Result<StudyOutput> {
    if config.epsilon_grid.len() < 3 {
        return Err(Error::Config(format!(
            "degenerate correlation sample: epsilon grid needs at least 3 values, got {}",
            config.epsilon_grid.len()
        )));
    }
    let world = gen_world(config.seed, config.num_images, config.refs_per_image)?;
    let emb = toy_embeddings(config.seed, config.embedding_dim)?;
    let idf = IdfTable::build(world.dataset());
    let train_seed = config.seed.wrapping_add(1);

    let evaluate = |&eps: &f64| -> Result<Vec<_>> {
        let model = ToyModel::train(&world, eps, config.alpha, train_seed)?;
        let decoded = decode_world(&model, &world, config.beam_width, config.max_len)?;
        let traces = TraceSet::from_traces(emit_traces(&model, &world)?)?;
        let id = model_id(eps);
        let run = ModelRun {
            model_id: &id,
            traces: &traces,
            dataset: &decoded,
        };
        expand_strata(&run, &idf, &emb, &config.k_values, &config.pregen)
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_model: Vec<Result<Vec<_>>> =
        pool.install(|| config.epsilon_grid.par_iter().map(evaluate).collect());

    let mut table = ScoreTable::new();
    for rows in per_model {
        table.extend(rows?)?;
    }
    let analysis = analyze(&table)?;
    Ok(StudyOutput { table, analysis })
}

/// Correlations and rankings from an assembled score table.
pub fn analyze(table: &ScoreTable) -> Result<Analysis> {
    let postgen = postgen_metrics_in(table);
    if postgen.is_empty() {
        return Err(Error::Config("score table has no post-gen metrics".into()));
    }
    let mut correlations = Vec::new();
    for id in enumerate_metrics() {
        let name = id.canonical_name();
        if table.column(&name).is_none() {
            continue;
        }
        for y in &postgen {
            match correlate(table, &name, y, true) {
                Ok(c) => correlations.push(c),
                Err(Error::DegenerateSample(_) | Error::NonFinite(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let rankings = postgen
        .iter()
        .map(|y| rank_pregen(table, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(Analysis {
        correlations,
        rankings,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes `correlations.csv`, `ranking.csv` and `scatter/*.csv`.
pub fn write_analysis(out_dir: &Path, table: &ScoreTable, analysis: &Analysis, top_k: usize) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    strat::write_correlations_csv(create(&out_dir.join("correlations.csv"))?, &analysis.correlations)?;
    strat::write_ranking_csv(create(&out_dir.join("ranking.csv"))?, &analysis.rankings, top_k)?;

    let scatter_dir = out_dir.join("scatter");
    fs::create_dir_all(&scatter_dir).map_err(|e| Error::io(&scatter_dir, e))?;
    let mut pairs: Vec<(String, String)> = Vec::new();
    for ranking in &analysis.rankings {
        let y = &ranking.postgen_metric;
        let mut xs = vec![
            PregenMetricId::best_reported().canonical_name(),
            PregenMetricId::perplexity().canonical_name(),
        ];
        xs.extend(ranking.top(top_k).iter().map(|c| c.x_metric.clone()));
        for x in xs {
            if table.column(&x).is_some() {
                pairs.push((x, y.clone()));
            }
        }
    }
    pairs.sort();
    pairs.dedup();
    for (x, y) in pairs {
        let path = scatter_dir.join(format!("{x}__{y}.csv"));
        strat::write_scatter_csv(create(&path)?, table, &x, &y)?;
    }
    Ok(())
}

pub fn write_outputs(out_dir: &Path, output: &StudyOutput, top_k: usize) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = out_dir.join("scores.csv");
    let mut w = create(&path)?;
    output.table.write_csv(&mut w)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_analysis(out_dir, &output.table, &output.analysis, top_k)
}

/// Plain-text top-k table per post-gen metric.
pub fn format_rankings(rankings: &[Ranking], top_k: usize) -> String {
    let mut s = String::new();
    for ranking in rankings {
        let _ = writeln!(s, "{} (top {top_k}):", ranking.postgen_metric);
        let _ = writeln!(s, "  {:<4} {:<34} {:>8} {:>9} {:>10}", "rank", "pregen_metric", "r2", "r", "p");
        for (i, c) in ranking.top(top_k).iter().enumerate() {
            let _ = writeln!(
                s,
                "  {:<4} {:<34} {:>8.4} {:>9.4} {:>10.3e}",
                i + 1,
                c.x_metric,
                c.r_squared,
                c.r,
                c.p_value
            );
        }
        if !ranking.skipped.is_empty() {
            let _ = writeln!(s, "  ({} metrics skipped for non-finite or degenerate samples)", ranking.skipped.len());
        }
    }
    s
}
