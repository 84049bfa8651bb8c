use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use axe_core::evalkit::{self, swde, synth, Dataset, SWEEP_SIZES};
use axe_core::extractor::ExtractionQuery;
use axe_core::gxr::{find_closest_node_with, TextChunkIndex};
use axe_core::pipeline::{ClientKind, ConfigLayer, Pipeline, PipelineConfig};
use axe_core::preprocess::preprocess;
use axe_core::{parse_html, AxeError, WordTokenizer};

/// Query-driven extraction from HTML pages.
#[derive(Debug, Parser)]
#[command(name = "axe", version)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML file with pipeline settings.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base URL of an OpenAI-compatible server, e.g. http://localhost:8000/v1.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Backbone model id.
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    pruner_model: Option<String>,
    #[arg(long, global = true)]
    schema_model: Option<String>,
    #[arg(long, global = true)]
    qa_model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, global = true, value_name = "NAME")]
    api_key_env: Option<String>,
    #[arg(long, global = true, value_parser = ["live", "oracle", "scripted"])]
    client: Option<String>,
    /// Replay file for the scripted client.
    #[arg(long, global = true, value_name = "FILE")]
    fixture: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    chunk_budget: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pruner_budget: Option<usize>,
    #[arg(long, global = true, value_name = "X")]
    gxr_threshold: Option<f64>,
    #[arg(long, global = true)]
    no_pruner: bool,
    #[arg(long, global = true)]
    no_gxr: bool,
    /// Send every task to the backbone model instead of its adaptor.
    #[arg(long, global = true)]
    no_adaptor_prompting: bool,
    /// Accept grounding candidates by (similarity, overlap) order.
    #[arg(long, global = true)]
    gxr_lexicographic: bool,
    #[arg(long, global = true, value_name = "N")]
    concurrency: Option<usize>,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    /// Output file (directory for `eval` and `synth-corpus`).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fill a flat JSON schema from a page.
    Extract {
        page: PathBuf,
        /// Schema file, or an inline JSON object.
        schema: String,
    },
    /// Answer a question about a page.
    Qa { page: PathBuf, question: String },
    /// Print the distilled page for a query.
    Prune { page: PathBuf, query: String },
    /// Locate the source node that best matches a text.
    Ground { page: PathBuf, text: String },
    /// Evaluate a JSONL dataset.
    Eval {
        dataset: PathBuf,
        /// Also evaluate each chunk budget in 500..5000 and write sweep.csv.
        #[arg(long)]
        sweep: bool,
    },
    /// Write the synthetic evaluation corpus.
    SynthCorpus {
        #[arg(long, default_value_t = synth::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = synth::DEFAULT_PAGES)]
        pages: usize,
    },
    /// Convert one SWDE site's ground-truth files to a JSONL dataset.
    SwdeConvert {
        groundtruth: PathBuf,
        /// Prefix joined to `<page id>.htm` for each record's page path.
        #[arg(long, default_value = "")]
        page_prefix: String,
    },
}

impl ConfigArgs {
    fn layer(&self) -> Result<ConfigLayer, AxeError> {
        let flag = |b: bool| b.then_some(true);
        Ok(ConfigLayer {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            pruner_model: self.pruner_model.clone(),
            schema_model: self.schema_model.clone(),
            qa_model: self.qa_model.clone(),
            api_key_env: self.api_key_env.clone(),
            chunk_budget: self.chunk_budget,
            pruner_budget: self.pruner_budget,
            gxr_threshold: self.gxr_threshold,
            no_pruner: flag(self.no_pruner),
            no_gxr: flag(self.no_gxr),
            no_adaptor_prompting: flag(self.no_adaptor_prompting),
            gxr_lexicographic: flag(self.gxr_lexicographic),
            client: self.client.as_deref().map(str::parse::<ClientKind>).transpose()?,
            fixture: self.fixture.clone(),
            concurrency: self.concurrency,
            temperature: self.temperature,
            timeout_secs: None,
            max_retries: None,
        })
    }

    fn resolve(&self) -> Result<PipelineConfig, AxeError> {
        let mut layers = vec![ConfigLayer::from_env()?];
        if let Some(path) = &self.config {
            layers.push(ConfigLayer::from_file(path)?);
        }
        layers.push(self.layer()?);
        PipelineConfig::resolve(layers)
    }
}

enum Status {
    Ok,
    Degraded,
}

fn read(path: &Path) -> Result<String, AxeError> {
    std::fs::read_to_string(path).map_err(|e| AxeError::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), AxeError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| AxeError::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON value serializes") + "\n"
}

fn schema_query(arg: &str) -> Result<ExtractionQuery, AxeError> {
    let path = Path::new(arg);
    if path.is_file() {
        return ExtractionQuery::schema_from_json(&read(path)?);
    }
    if arg.trim_start().starts_with('{') {
        return ExtractionQuery::schema_from_json(arg);
    }
    Err(AxeError::Io(format!("{arg}: schema file not found")))
}

fn run(cli: Cli) -> Result<Status, AxeError> {
    let out = cli.config.out.as_deref();
    match cli.command {
        Command::Extract { page, schema } => {
            let config = cli.config.resolve()?;
            let html = read(&page)?;
            let query = schema_query(&schema)?;
            let run = Pipeline::new(config)?.run(&html, &query)?;
            emit(out, &pretty(&run.output_json()))?;
            Ok(if run.degraded() { Status::Degraded } else { Status::Ok })
        }
        Command::Qa { page, question } => {
            let config = cli.config.resolve()?;
            let html = read(&page)?;
            let run = Pipeline::new(config)?.run(&html, &ExtractionQuery::qa(question)?)?;
            emit(out, &pretty(&run.output_json()))?;
            Ok(if run.degraded() { Status::Degraded } else { Status::Ok })
        }
        Command::Prune { page, query } => {
            let config = cli.config.resolve()?;
            let html = read(&page)?;
            let (_, pruned) = Pipeline::new(config)?.prune(&html, &query)?;
            let reduced = if pruned.tokens_before == 0 {
                0.0
            } else {
                100.0 * (1.0 - pruned.tokens_after as f64 / pruned.tokens_before as f64)
            };
            eprintln!("tokens: {} -> {} (-{reduced:.1}%)", pruned.tokens_before, pruned.tokens_after);
            emit(out, &(pruned.distilled_html + "\n"))?;
            Ok(if pruned.fail_open_batches > 0 { Status::Degraded } else { Status::Ok })
        }
        Command::Ground { page, text } => {
            let config = cli.config.resolve()?;
            let tree = parse_html(&read(&page)?)?;
            let source = preprocess(&tree, &WordTokenizer).stripped;
            let index = TextChunkIndex::build(&source);
            let rule = config.grounding_options().rule;
            let m = find_closest_node_with(&source, &index, &text, rule);
            emit(out, &pretty(&serde_json::to_value(&m)?))?;
            Ok(Status::Ok)
        }
        Command::Eval { dataset, sweep } => {
            let config = cli.config.resolve()?;
            let ds = Dataset::load(&dataset)?;
            let pipeline = Pipeline::new(config.clone())?;
            let report = evalkit::run_eval(&ds, &pipeline);
            eprint!("{}", report.to_table());
            let json = report.to_json();
            match out {
                Some(dir) => {
                    let io = |e: std::io::Error| AxeError::Io(format!("{}: {e}", dir.display()));
                    std::fs::create_dir_all(dir).map_err(io)?;
                    std::fs::write(dir.join("report.json"), &json).map_err(io)?;
                    std::fs::write(dir.join("report.txt"), report.to_table()).map_err(io)?;
                    if sweep {
                        let rows = evalkit::chunk_size_sweep(&ds, &config, &SWEEP_SIZES, Pipeline::new)?;
                        std::fs::write(dir.join("sweep.csv"), evalkit::sweep_csv(&rows)?).map_err(io)?;
                    }
                    emit(None, &json)?;
                }
                None => {
                    if sweep {
                        let rows = evalkit::chunk_size_sweep(&ds, &config, &SWEEP_SIZES, Pipeline::new)?;
                        eprint!("{}", evalkit::sweep_csv(&rows)?);
                    }
                    emit(None, &json)?;
                }
            }
            let a = &report.aggregate;
            Ok(if a.errors + a.degraded > 0 { Status::Degraded } else { Status::Ok })
        }
        Command::SynthCorpus { seed, pages } => {
            let dir = out.ok_or_else(|| AxeError::Config("synth-corpus needs --out DIR".into()))?;
            synth::generate(seed, pages).write(dir)?;
            eprintln!("wrote {pages} pages to {}", dir.display());
            Ok(Status::Ok)
        }
        Command::SwdeConvert { groundtruth, page_prefix } => {
            let records = swde::convert_site(&groundtruth, &page_prefix)?;
            let ds = Dataset {
                root: PathBuf::new(),
                records,
            };
            emit(out, &ds.to_jsonl())?;
            Ok(Status::Ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Degraded) => ExitCode::from(2),
        Err(e) => {
            eprintln!("axe: {e}");
            ExitCode::from(1)
        }
    }
}
