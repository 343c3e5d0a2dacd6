//! `pregen` command-line front end.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pregen_core::datamodel::{load_dataset, load_traces, save_dataset, save_traces};
use pregen_core::postgen::{self, cider_d, EmbeddingTable, IdfTable};
use pregen_core::pregen::{compute_all, write_scores_csv, PregenConfig};
use pregen_core::strat::{self, correlate, postgen_metrics_in, rank_pregen, ScoreTable};
use pregen_core::study::{self, StudyConfig};
use pregen_core::toyworld::{self, ToyModel, ToyWorld};
use pregen_core::{stratify, TraceSet};

#[derive(Parser)]
#[command(name = "pregen", version, about = "Pre-gen and post-gen caption metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute all 504 pre-gen metrics from a traces file.
    Pregen {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Exclude the end-token prediction from every metric.
        #[arg(long)]
        no_end_token: bool,
    },
    /// Score generated captions: writes per_image.csv and corpus.csv.
    Postgen {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Split images into strata by per-image CIDEr-D.
    Stratify {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        k: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pearson correlations from a scores.csv table.
    Correlate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to one x metric.
        #[arg(long)]
        x: Option<String>,
        /// Restrict to one y metric.
        #[arg(long)]
        y: Option<String>,
    },
    /// Rank pre-gen metrics by R² against each post-gen metric.
    Rank {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        /// Only rank against this post-gen metric.
        #[arg(long)]
        postgen: Option<String>,
    },
    /// Synthetic world utilities.
    Toy {
        #[command(subcommand)]
        command: ToyCommand,
    },
    /// Run the whole correlation study on a toy world.
    Study {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        epsilon_grid: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        images: usize,
        #[arg(long, default_value_t = 3)]
        refs: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        beam_width: usize,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        #[arg(long)]
        no_end_token: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild correlations, rankings and scatter files from scores.csv.
    Report {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
    },
}

#[derive(Args)]
struct WorldArgs {
    /// World attributes file written by `toy gen`.
    #[arg(long)]
    world: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Subcommand)]
enum ToyCommand {
    /// Generate world.json, dataset.json and embeddings.txt.
    Gen {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        images: usize,
        #[arg(long, default_value_t = 3)]
        refs: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a bigram model with corruption rate epsilon.
    Train {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 43)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Beam-decode every image; writes a dataset with `gen` filled.
    Decode {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 3)]
        beam_width: usize,
        #[arg(long, default_value_t = 16)]
        max_len: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Teacher-forced traces of every reference.
    Trace {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("input file not found: {}", path.display());
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("PREGEN_THREADS") {
        Ok(v) => {
            let n: usize = v
                .parse()
                .with_context(|| format!("PREGEN_THREADS must be a positive integer, got `{v}`"))?;
            if n == 0 {
                bail!("PREGEN_THREADS must be a positive integer, got `{v}`");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn load_world(args: &WorldArgs) -> Result<ToyWorld> {
    require_file(&args.world)?;
    require_file(&args.dataset)?;
    let dataset = load_dataset(&args.dataset)?;
    Ok(ToyWorld::load(&args.world, dataset)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pregen {
            traces,
            out,
            no_end_token,
        } => {
            require_file(&traces)?;
            let set = TraceSet::from_traces(load_traces(&traces)?)?;
            let config = PregenConfig {
                include_end_token: !no_end_token,
            };
            let scores = compute_all(&set, &config)?;
            let mut w = create(&out)?;
            write_scores_csv(&mut w, &scores)?;
            finish(w, &out)?;
        }
        Command::Postgen {
            dataset,
            embeddings,
            out,
        } => {
            require_file(&dataset)?;
            require_file(&embeddings)?;
            let ds = load_dataset(&dataset)?;
            let emb = EmbeddingTable::load(&embeddings)?;
            let idf = IdfTable::build(&ds);
            let per_image = postgen::score_images(&ds, &idf, &emb)?;
            let corpus = postgen::corpus_from_images(per_image.values())?;
            postgen::write_per_image_csv(create(&out.join("per_image.csv"))?, &per_image)?;
            postgen::write_corpus_csv(create(&out.join("corpus.csv"))?, &corpus)?;
        }
        Command::Stratify { dataset, k, out } => {
            require_file(&dataset)?;
            let ds = load_dataset(&dataset)?;
            let idf = IdfTable::build(&ds);
            let cider = ds
                .images()
                .iter()
                .map(|img| Ok((img.image_id.clone(), cider_d(img.generated()?, &img.references, &idf))))
                .collect::<pregen_core::Result<_>>()?;
            let strata = k
                .iter()
                .map(|&k| stratify(&cider, k))
                .collect::<pregen_core::Result<Vec<_>>>()?;
            strat::write_assignment_csv(create(&out)?, &strata)?;
        }
        Command::Correlate { scores, out, x, y } => {
            require_file(&scores)?;
            let table = ScoreTable::read_csv(File::open(&scores)?)?;
            let results = match (x, y) {
                (Some(x), Some(y)) => vec![correlate(&table, &x, &y, true)?],
                (x, y) => {
                    let analysis = study::analyze(&table)?;
                    analysis
                        .correlations
                        .into_iter()
                        .filter(|c| x.as_ref().is_none_or(|x| &c.x_metric == x))
                        .filter(|c| y.as_ref().is_none_or(|y| &c.y_metric == y))
                        .collect()
                }
            };
            strat::write_correlations_csv(create(&out)?, &results)?;
        }
        Command::Rank {
            scores,
            out,
            top_k,
            postgen,
        } => {
            require_file(&scores)?;
            let table = ScoreTable::read_csv(File::open(&scores)?)?;
            let targets: Vec<String> = match postgen {
                Some(p) => vec![p],
                None => postgen_metrics_in(&table).into_iter().map(str::to_owned).collect(),
            };
            let rankings = targets
                .iter()
                .map(|y| rank_pregen(&table, y))
                .collect::<pregen_core::Result<Vec<_>>>()?;
            strat::write_ranking_csv(create(&out)?, &rankings, top_k)?;
            print!("{}", study::format_rankings(&rankings, top_k));
        }
        Command::Toy { command } => run_toy(command)?,
        Command::Study {
            seed,
            epsilon_grid,
            images,
            refs,
            k,
            beam_width,
            top_k,
            no_end_token,
            out,
        } => {
            let config = StudyConfig {
                seed,
                num_images: images,
                refs_per_image: refs,
                epsilon_grid,
                k_values: k,
                beam_width,
                top_k,
                pregen: PregenConfig {
                    include_end_token: !no_end_token,
                },
                threads: threads_from_env()?,
                ..StudyConfig::default()
            };
            let output = study::run_study(&config)?;
            study::write_outputs(&out, &output, top_k)?;
            print!("{}", study::format_rankings(&output.analysis.rankings, top_k));
        }
        Command::Report { scores, out, top_k } => {
            require_file(&scores)?;
            let table = ScoreTable::read_csv(File::open(&scores)?)?;
            let analysis = study::analyze(&table)?;
            study::write_analysis(&out, &table, &analysis, top_k)?;
            print!("{}", study::format_rankings(&analysis.rankings, top_k));
        }
    }
    Ok(())
}

fn run_toy(command: ToyCommand) -> Result<()> {
    match command {
        ToyCommand::Gen {
            seed,
            images,
            refs,
            dim,
            out,
        } => {
            let world = toyworld::gen_world(seed, images, refs)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            world.save_attributes(out.join("world.json"))?;
            save_dataset(out.join("dataset.json"), world.dataset())?;
            toyworld::toy_embeddings(seed, dim)?.save(out.join("embeddings.txt"))?;
        }
        ToyCommand::Train {
            world,
            epsilon,
            alpha,
            seed,
            out,
        } => {
            let world = load_world(&world)?;
            ToyModel::train(&world, epsilon, alpha, seed)?.save(&out)?;
        }
        ToyCommand::Decode {
            world,
            model,
            beam_width,
            max_len,
            out,
        } => {
            let world = load_world(&world)?;
            require_file(&model)?;
            let model = ToyModel::load(&model)?;
            let decoded = study::decode_world(&model, &world, beam_width, max_len)?;
            save_dataset(&out, &decoded)?;
        }
        ToyCommand::Trace { world, model, out } => {
            let world = load_world(&world)?;
            require_file(&model)?;
            let model = ToyModel::load(&model)?;
            let traces = toyworld::emit_traces(&model, &world)?;
            save_traces(&out, &traces)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
