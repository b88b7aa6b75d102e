//! The `convqa` command line.
//!
//! ```text
//! convqa [--config FILE] [--set KEY=VALUE]... [--jobs N] [--quiet] <index|run|eval|analyze>
//! ```
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 model service unreachable after retries.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use convqa_core::metrics::score_run;
use convqa_core::{IndexedCollection, ScoreTable};
use serde::Serialize;

use crate::client::ModelClient;
use crate::config::RunConfig;
use crate::data::{self, Header};
use crate::error::Result;
use crate::{report, runner, snapshot};

#[derive(Debug, Parser)]
#[command(name = "convqa", version, about = "Conversational QA pipeline: rewrite, retrieve, generate, evaluate")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set rewrite.mode=oracle`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Worker threads for `run` (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the BM25 index snapshot from the passage collection.
    Index,
    /// Run the pipeline over every conversation and write run.jsonl.
    Run,
    /// Score a run against the conversations; writes scores.jsonl and means.json.
    Eval {
        /// Run file (default: OUTPUT_DIR/run.jsonl).
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Split analysis of a score file; writes analysis.json and histograms.csv.
    Analyze {
        /// Score file (default: OUTPUT_DIR/scores.jsonl).
        #[arg(long)]
        scores: Option<PathBuf>,
    },
}

pub const RUN_FILE: &str = "run.jsonl";
pub const SCORES_FILE: &str = "scores.jsonl";
pub const MEANS_FILE: &str = "means.json";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const HISTOGRAMS_FILE: &str = "histograms.csv";

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit(out: &mut dyn Write, quiet: bool, text: &str) {
    if !quiet {
        let _ = out.write_all(text.as_bytes());
    }
}

fn json_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable") + "\n"
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let config = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let hash = config.hash();
    let dir = &config.paths.output_dir;
    match &cli.command {
        Command::Index => {
            let collection = IndexedCollection::build(
                data::load_passages(&config.paths.passages)?.collect::<Result<Vec<_>>>()?,
            )?;
            snapshot::write(&config.paths.index, &collection)?;
            let ix = &collection.index;
            emit(out, cli.quiet, &json_line(&IndexSummary {
                index: &config.paths.index,
                n_docs: ix.n_docs(),
                avgdl: ix.avgdl(),
                vocabulary_size: ix.vocabulary_size(),
                total_tokens: ix.total_len(),
            }));
            Ok(0)
        }
        Command::Run => {
            let collection = snapshot::read(&config.paths.index)?;
            let conversations = data::load_conversations(&config.paths.conversations)?;
            let client = if config.needs_model() {
                Some(ModelClient::new(config.endpoint()?))
            } else {
                None
            };
            let jobs = cli
                .jobs
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let (records, summary) =
                runner::run_all(&conversations, &collection, &config.pipeline(), client.as_ref(), jobs)?;
            let path = dir.join(RUN_FILE);
            data::write_jsonl(&path, Some(&Header::new("run", &hash)), &records)?;
            emit(out, cli.quiet, &json_line(&summary));
            Ok(if summary.transport_failures > 0 { 3 } else { 0 })
        }
        Command::Eval { run } => {
            let run_path = run.clone().unwrap_or_else(|| dir.join(RUN_FILE));
            let records = data::read_run(&run_path)?;
            let table = if records.is_empty() {
                ScoreTable::from_samples(Vec::new())
            } else {
                let conversations = data::load_conversations(&config.paths.conversations)?;
                score_run(&records, &conversations)?
            };
            let header = Header::new("eval", &hash);
            data::write_jsonl(dir.join(SCORES_FILE), Some(&header), &table.samples)?;
            report::write_text(&dir.join(MEANS_FILE), &report::means_json(&header, &table))?;
            emit(out, cli.quiet, &report::means_table(&table));
            Ok(0)
        }
        Command::Analyze { scores } => {
            let path = scores.clone().unwrap_or_else(|| dir.join(SCORES_FILE));
            let samples = data::read_scores(&path)?;
            if samples.is_empty() {
                return Err(convqa_core::AnalysisError::Empty.into());
            }
            let analysis = convqa_core::analysis::analyze(&samples, &config.analysis_config())?;
            let header = Header::new("analyze", &hash);
            report::write_text(&dir.join(ANALYSIS_FILE), &report::analysis_json(&header, &analysis))?;
            report::write_text(&dir.join(HISTOGRAMS_FILE), &report::histograms_csv(&analysis))?;
            let counts: Vec<SplitCount> = analysis
                .splits
                .iter()
                .map(|s| SplitCount {
                    split: s.split.key(),
                    n: s.n,
                })
                .collect();
            emit(out, cli.quiet, &json_line(&AnalyzeSummary {
                rewrite_threshold: analysis.rewrite_threshold,
                retrieval_threshold: analysis.retrieval_threshold,
                classified: analysis.classified,
                excluded: analysis.excluded,
                splits: counts,
            }));
            for r in &analysis.ratios {
                emit(out, cli.quiet, &format!("{}\n", r.statement));
            }
            Ok(0)
        }
    }
}

#[derive(Serialize)]
struct IndexSummary<'a> {
    index: &'a std::path::Path,
    n_docs: usize,
    avgdl: f64,
    vocabulary_size: usize,
    total_tokens: u64,
}

#[derive(Serialize)]
struct SplitCount {
    split: &'static str,
    n: usize,
}

#[derive(Serialize)]
struct AnalyzeSummary {
    rewrite_threshold: f64,
    retrieval_threshold: f64,
    classified: usize,
    excluded: usize,
    splits: Vec<SplitCount>,
}

