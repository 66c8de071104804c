//! `judgekit` — CLI over the evaluation harness.
//!
//! Subcommands: `validate` (check a dataset and print its shape), `run`
//! (judge every record with each configured provider), `stats` (ANOVA +
//! Tukey HSD over saved runs), and `report` (markdown + violin data).
//!
//! Exit codes are stable per failure class:
//! 0 success · 1 file I/O · 2 invalid input data · 3 provider/gateway ·
//! 4 statistics · 5 configuration · 64 usage.

use clap::{Args, Parser, Subcommand, ValueEnum};
use judgekit_core::dataset::{
    apply_labels, load_eval_set, load_human_labels, summarize_dataset, DatasetError, DatasetFormat,
};
use judgekit_core::gateway::{load_provider_configs, CallCache, GatewayError};
use judgekit_core::metrics::MetricsError;
use judgekit_core::model::{DecisionPolicy, ModelError, PromptKind};
use judgekit_core::pipeline::{run_evaluation, JudgePolicies, PipelineError};
use judgekit_core::prompt::builtin_template;
use judgekit_core::report::{
    build_run_file, markdown_report, read_run_file, score_groups, stats_json, stats_markdown,
    violin_data, violin_json, ReportError, RunFile, StatsReport,
};
use judgekit_core::stats::{one_way_anova, tukey_hsd, StatsError};
use judgekit_core::verdict::ValidationPolicy;
use std::collections::HashSet;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "judgekit",
    version,
    about = "Judge AI responses against gold answers with an LLM judge",
    after_help = "Exit codes: 0 success, 1 file I/O, 2 invalid input data, \
                  3 provider/gateway, 4 statistics, 5 configuration, 64 usage."
)]
pub struct Cli {
    /// Report errors as a JSON object on stderr.
    #[arg(long, global = true)]
    pub errors_json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Check an evaluation set and print summary statistics.
    Validate(ValidateArgs),
    /// Judge every record with each provider in the providers file.
    Run(RunArgs),
    /// Compare run score distributions: one-way ANOVA plus Tukey HSD.
    Stats(StatsArgs),
    /// Render a markdown report and violin-plot data from saved runs.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
}

impl From<FormatArg> for DatasetFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => DatasetFormat::Jsonl,
            FormatArg::Csv => DatasetFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PromptArg {
    Weighted,
    Baseline,
}

impl From<PromptArg> for PromptKind {
    fn from(p: PromptArg) -> Self {
        match p {
            PromptArg::Weighted => PromptKind::Weighted,
            PromptArg::Baseline => PromptKind::Baseline,
        }
    }
}

#[derive(Args)]
pub struct ValidateArgs {
    /// Evaluation set to check.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "jsonl")]
    pub format: FormatArg,
    /// Optional request_id,human_label CSV to merge before summarizing.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "jsonl")]
    pub format: FormatArg,
    /// Providers file (TOML with [[providers]] blocks, or JSON).
    #[arg(long)]
    pub providers: PathBuf,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Which builtin judging prompt to send.
    #[arg(long, value_enum, default_value = "weighted")]
    pub prompt: PromptArg,
    /// Decision policy: strict, threshold:T, or hybrid:T.
    #[arg(long, default_value = "strict")]
    pub policy: String,
    /// Worker threads for judging.
    #[arg(long, default_value_t = 4)]
    pub parallel: usize,
    /// JSONL call cache; re-runs replay cached responses instead of
    /// calling providers.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Directory for run files.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct StatsArgs {
    /// Run files to compare (two or more with parsed scores).
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Directory for stats.json and stats.md (default: current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    /// Directory for report.md and violin.json (default: current
    /// directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Data(String),
    Gateway(String),
    Stats(String),
    Config(String),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Data(_) => 2,
            CliError::Gateway(_) => 3,
            CliError::Stats(_) => 4,
            CliError::Config(_) => 5,
            CliError::Usage(_) => 64,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Data(_) => "data",
            CliError::Gateway(_) => "gateway",
            CliError::Stats(_) => "stats",
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Io(m)
            | CliError::Data(m)
            | CliError::Gateway(m)
            | CliError::Stats(m)
            | CliError::Config(m)
            | CliError::Usage(m) => m,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match &e {
            DatasetError::Io { .. } => CliError::Io(e.to_string()),
            DatasetError::UnknownFormat(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        match &e {
            GatewayError::Io { .. } => CliError::Io(e.to_string()),
            GatewayError::Config(_) | GatewayError::MissingApiKey { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Gateway(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::EmptyDataset | PipelineError::InvalidRecord { .. } => {
                CliError::Data(e.to_string())
            }
            PipelineError::NoProviders => CliError::Config(e.to_string()),
            PipelineError::ThreadPool(_) => CliError::Gateway(e.to_string()),
            PipelineError::Gateway(inner) => inner.into(),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Stats(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Stats(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match &e {
            ReportError::Io { .. } | ReportError::WriteFailed { .. } => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// Parse args, dispatch, and translate the outcome into an exit code.
pub fn main_impl<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = err.print();
            return code;
        }
    };
    let errors_json = cli.errors_json;
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            if errors_json {
                let payload = serde_json::json!({
                    "error": {
                        "kind": err.kind(),
                        "message": err.message(),
                        "exit_code": err.exit_code(),
                    }
                });
                eprintln!("{payload}");
            } else {
                eprintln!("error: {}", err.message());
            }
            err.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate(args) => cmd_validate(args),
        Command::Run(args) => cmd_run(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn load_dataset_with_labels(
    dataset: &Path,
    format: FormatArg,
    labels: Option<&Path>,
) -> Result<Vec<judgekit_core::EvalRecord>, CliError> {
    let mut records = load_eval_set(dataset, format.into())?;
    if let Some(labels_path) = labels {
        let labels = load_human_labels(labels_path)?;
        let applied = apply_labels(&mut records, &labels);
        println!("applied {applied} of {} human labels", labels.len());
    }
    Ok(records)
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let records = load_dataset_with_labels(&args.dataset, args.format, args.labels.as_deref())?;
    let stats = summarize_dataset(&records)?;
    println!("dataset OK: {} records, {} labeled", stats.records, stats.labeled);
    for (name, field) in [
        ("request", &stats.request),
        ("expected_response", &stats.expected_response),
        ("response", &stats.response),
    ] {
        println!(
            "  {name}: avg {:.1} chars ({}..{}), avg {:.1} words",
            field.avg_chars, field.min_chars, field.max_chars, field.avg_words
        );
    }
    Ok(())
}

fn sanitize_for_filename(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let records = load_dataset_with_labels(&args.dataset, args.format, args.labels.as_deref())?;
    let decision: DecisionPolicy = args.policy.parse()?;
    let providers = load_provider_configs(&args.providers)?;
    let cache = match &args.cache {
        Some(path) => Some(CallCache::open(path)?),
        None => None,
    };
    let template = builtin_template(args.prompt.into());
    let policies = JudgePolicies {
        decision,
        validation: ValidationPolicy::default(),
    };
    std::fs::create_dir_all(&args.out).map_err(|e| {
        CliError::Io(format!("cannot create {}: {e}", args.out.display()))
    })?;

    let mut run_files = Vec::new();
    let mut taken = HashSet::new();
    for provider in &providers {
        let result = run_evaluation(
            &records,
            &template,
            provider,
            &policies,
            args.parallel,
            cache.as_ref(),
        )?;
        let run_file = build_run_file(result, provider, &decision.to_string(), args.parallel);

        let base = format!(
            "run_{}_{}",
            sanitize_for_filename(&run_file.judge_model),
            run_file.config.prompt_kind
        );
        let mut stem = base.clone();
        let mut n = 2;
        while !taken.insert(stem.clone()) {
            stem = format!("{base}_{n}");
            n += 1;
        }
        let path = args.out.join(format!("{stem}.json"));
        judgekit_core::report::write_run_file(&path, &run_file)?;
        println!("wrote {}", path.display());
        run_files.push(run_file);
    }
    print!("{}", markdown_report(&run_files)?);
    Ok(())
}

fn read_runs(paths: &[PathBuf]) -> Result<Vec<RunFile>, CliError> {
    paths
        .iter()
        .map(|p| read_run_file(p).map_err(CliError::from))
        .collect()
}

fn out_dir(out: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = out.unwrap_or_else(|| Path::new(".")).to_path_buf();
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn cmd_stats(args: StatsArgs) -> Result<(), CliError> {
    let runs = read_runs(&args.runs)?;
    let groups = score_groups(&runs);
    if groups.len() < 2 {
        return Err(CliError::Stats(format!(
            "need at least two runs with parsed scores, got {}",
            groups.len()
        )));
    }
    let score_vectors: Vec<&[f64]> = groups.iter().map(|(_, v)| v.as_slice()).collect();
    let anova = one_way_anova(&score_vectors)?;
    let comparisons = tukey_hsd(&groups, args.alpha)?;
    let report = StatsReport {
        alpha: args.alpha,
        groups: groups.iter().map(|(l, _)| l.clone()).collect(),
        anova,
        comparisons,
    };

    let dir = out_dir(args.out.as_deref())?;
    let md = stats_markdown(&report);
    write_text(&dir.join("stats.json"), &stats_json(&report))?;
    write_text(&dir.join("stats.md"), &md)?;
    print!("{md}");
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let runs = read_runs(&args.runs)?;
    let md = markdown_report(&runs)?;
    let violin = violin_data(&runs)?;
    let dir = out_dir(args.out.as_deref())?;
    write_text(&dir.join("report.md"), &md)?;
    write_text(&dir.join("violin.json"), &violin_json(&violin))?;
    print!("{md}");
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
