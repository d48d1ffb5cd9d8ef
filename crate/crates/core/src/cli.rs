//! Command-line entry point: argument parsing, configuration loading, and
//! orchestration across generation, checking, augmentation, scoring, and
//! sampling.
//!
//! Exit codes: 0 on success, 1 when per-item failures occurred (the run
//! finished and wrote its outputs), 2 on configuration errors. Every failure
//! path prints a human message and a one-line JSON error object to stderr.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::augment::variant_fanout;
use crate::checker::{validate_table, Defect, FillingChecker, QualityRanker, SurrogateRanker};
use crate::corr::{kendall_tau_b, pearson, spearman};
use crate::disturb::{disturbance_study, Dimension};
use crate::generate::{generate_batch, Complexity, GenerateError, GenerationRequest};
use crate::html::{html_to_grid, structure_tokens};
use crate::infill::{
    ContentProvider, LlmProvider, LlmProviderConfig, LlmRanker, ReplayTransport, TemplateProvider,
    Transcript,
};
use crate::manifest::{load_manifest, write_manifest, ManifestError};
use crate::model::{AnnotationRecord, Language};
use crate::sampler::{
    baseline_select, k_center_greedy, read_npy_matrix, run_al_loop, standardize_pool,
    structural_features, ActiveLearningState, BaselineStrategy, EmbeddingVector, LoopStrategy,
    MapAnnotator, Metric, NnTrainer, PoolSample, SampleLabel, SelectionProblem,
};
use crate::teds::{teds_grids, TedsOptions};

const MANIFEST_SCHEMA: &str = include_str!("../assets/manifest.schema.json");

const EXIT_OK: i32 = 0;
const EXIT_ITEMS: i32 = 1;
const EXIT_CONFIG: i32 = 2;

/// A failed run: `kind` keys the machine-readable stderr object and `code`
/// becomes the process exit status.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
    code: i32,
}

impl Failure {
    fn config(message: impl Into<String>) -> Failure {
        Failure { kind: "config", message: message.into(), code: EXIT_CONFIG }
    }

    fn items(message: impl Into<String>) -> Failure {
        Failure { kind: "items", message: message.into(), code: EXIT_ITEMS }
    }
}

impl From<ManifestError> for Failure {
    fn from(e: ManifestError) -> Failure {
        Failure::config(e.to_string())
    }
}

fn emit_error_object(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
}

/// Writes payload output to stdout. A closed pipe means the consumer has all
/// it wants; that is a finished run, not an error.
fn print_out(text: &str) -> Result<(), Failure> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(Failure::config(format!("cannot write to stdout: {e}"))),
    }
}

/// Prints a human summary line, ignoring a consumer that went away.
fn say(line: String) {
    let _ = print_out(&format!("{line}\n"));
}

/// Parses `argv` and runs the selected command, returning the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion) => {
            let _ = print_out(&e.to_string());
            return EXIT_OK;
        }
        Err(e) => {
            eprint!("{e}");
            emit_error_object("usage", &e.to_string());
            return EXIT_CONFIG;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            emit_error_object(f.kind, &f.message);
            f.code
        }
    }
}

#[derive(Parser)]
#[command(
    name = "tabgen",
    version,
    about = "Synthesizes, validates, augments, scores, and samples annotated HTML tables"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all hardware threads).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Print the manifest JSON schema and exit.
    #[arg(long)]
    schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a batch of annotated tables.
    Generate(GenerateArgs),
    /// Check every record's markup and annotations, reporting defects.
    Validate(ValidateArgs),
    /// Rank records for structure, topic fit, and semantic coherence.
    Rank(RankArgs),
    /// Correlate two rank files (Spearman, Pearson, Kendall tau-b).
    Corr(CorrArgs),
    /// Expand each record into nine labeled variants.
    Augment(AugmentArgs),
    /// Score predicted tables against gold tables with TEDS.
    Teds(TedsArgs),
    /// Select a subset of a pool manifest by a sampling strategy.
    Sample(SampleArgs),
    /// Run the select/annotate/retrain loop from a config file.
    #[command(name = "al-run")]
    AlRun(AlRunArgs),
    /// Measure how checker ranks react to controlled corruptions.
    Disturb(DisturbArgs),
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.schema {
        return print_out(&format!("{}\n", MANIFEST_SCHEMA.trim_end()));
    }
    let Some(command) = cli.command else {
        return Err(Failure::config("missing subcommand; run with --help for usage"));
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Failure::config("--workers must be at least 1"));
        }
        // First initialization wins; a pool already built at the same size is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match command {
        Command::Generate(args) => cmd_generate(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Rank(args) => cmd_rank(args),
        Command::Corr(args) => cmd_corr(args),
        Command::Augment(args) => cmd_augment(args),
        Command::Teds(args) => cmd_teds(args),
        Command::Sample(args) => cmd_sample(args),
        Command::AlRun(args) => cmd_al_run(args),
        Command::Disturb(args) => cmd_disturb(args),
    }
}

// ---------------------------------------------------------------------------
// Flag value types

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ComplexityArg {
    Simple,
    Complex,
    Mixed,
}

impl From<ComplexityArg> for Complexity {
    fn from(v: ComplexityArg) -> Complexity {
        match v {
            ComplexityArg::Simple => Complexity::Simple,
            ComplexityArg::Complex => Complexity::Complex,
            ComplexityArg::Mixed => Complexity::Mixed,
        }
    }
}

/// yes/no pins a boolean attribute; any lets the batch cover both values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TriState {
    Yes,
    No,
    Any,
}

impl TriState {
    fn pin(self) -> Option<bool> {
        match self {
            TriState::Yes => Some(true),
            TriState::No => Some(false),
            TriState::Any => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LangArg {
    Zh,
    En,
}

impl From<LangArg> for Language {
    fn from(v: LangArg) -> Language {
        match v {
            LangArg::Zh => Language::Zh,
            LangArg::En => Language::En,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderArg {
    Template,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RankerArg {
    Surrogate,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Euclidean,
    Cosine,
}

impl From<MetricArg> for Metric {
    fn from(v: MetricArg) -> Metric {
        match v {
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Cosine => Metric::Cosine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DimensionArg {
    Structure,
    Topic,
    Semantics,
}

impl From<DimensionArg> for Dimension {
    fn from(v: DimensionArg) -> Dimension {
        match v {
            DimensionArg::Structure => Dimension::Structure,
            DimensionArg::Topic => Dimension::Topic,
            DimensionArg::Semantics => Dimension::Semantics,
        }
    }
}

/// Parses an inclusive "MIN,MAX" range.
fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected MIN,MAX, got {s:?}"))?;
    let lo: usize = lo.trim().parse().map_err(|e| format!("bad minimum {lo:?}: {e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("bad maximum {hi:?}: {e}"))?;
    if lo == 0 || lo > hi {
        return Err(format!("range must be non-empty and start at 1, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

// ---------------------------------------------------------------------------
// Shared helpers

fn read_to_string(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::config(format!("bad {what} in {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

/// Reads a JSONL file into typed lines, citing 1-based line numbers on error.
fn read_jsonl<T: DeserializeOwned>(path: &Path, what: &str) -> Result<Vec<T>, Failure> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| {
            Failure::config(format!("bad {what} at {}:{}: {e}", path.display(), i + 1))
        })?;
        out.push(item);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, lines: &[T]) -> Result<(), Failure> {
    let mut text = String::new();
    for line in lines {
        text.push_str(&serde_json::to_string(line).expect("lines serialize"));
        text.push('\n');
    }
    std::fs::write(path, text)
        .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

/// Builds the content provider a generation-style command will use, plus the
/// live transcript to save afterwards when recording was requested.
fn build_content_provider(
    kind: ProviderArg,
    config_path: Option<&Path>,
    record: Option<&Path>,
    replay: Option<&Path>,
) -> Result<(Box<dyn ContentProvider>, Option<(Arc<Transcript>, PathBuf)>), Failure> {
    match kind {
        ProviderArg::Template => {
            if config_path.is_some() || record.is_some() || replay.is_some() {
                return Err(Failure::config(
                    "provider config and transcript flags apply only to --provider http",
                ));
            }
            Ok((Box::new(TemplateProvider), None))
        }
        ProviderArg::Http => {
            let path = config_path
                .ok_or_else(|| Failure::config("--provider http needs --provider-config"))?;
            let config: LlmProviderConfig = read_json(path, "provider config")?;
            let mut provider = match replay {
                Some(t) => {
                    let transcript = Transcript::load(t).map_err(|e| {
                        Failure::config(format!("cannot load transcript {}: {e}", t.display()))
                    })?;
                    LlmProvider::new(config, Box::new(ReplayTransport::from_transcript(&transcript)))
                }
                None => LlmProvider::over_http(config),
            };
            let recording = match record {
                Some(p) => {
                    let transcript = Arc::new(Transcript::new());
                    provider = provider.with_transcript(transcript.clone());
                    Some((transcript, p.to_path_buf()))
                }
                None => None,
            };
            Ok((Box::new(provider), recording))
        }
    }
}

fn build_ranker(kind: RankerArg, config_path: Option<&Path>) -> Result<Box<dyn QualityRanker>, Failure> {
    match kind {
        RankerArg::Surrogate => {
            if config_path.is_some() {
                return Err(Failure::config("--provider-config applies only to --ranker http"));
            }
            Ok(Box::new(SurrogateRanker))
        }
        RankerArg::Http => {
            let path = config_path
                .ok_or_else(|| Failure::config("--ranker http needs --provider-config"))?;
            let config: LlmProviderConfig = read_json(path, "provider config")?;
            Ok(Box::new(LlmRanker::new(LlmProvider::over_http(config))))
        }
    }
}

fn save_transcript(recording: Option<(Arc<Transcript>, PathBuf)>) -> Result<(), Failure> {
    if let Some((transcript, path)) = recording {
        transcript
            .save(&path)
            .map_err(|e| Failure::config(format!("cannot write transcript {}: {e}", path.display())))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// generate

#[derive(Args)]
struct GenerateArgs {
    /// Number of tables to produce.
    #[arg(long, default_value_t = 8)]
    count: usize,
    #[arg(long, value_enum, default_value_t = ComplexityArg::Mixed)]
    complexity: ComplexityArg,
    /// Colored styling: yes, no, or any (the batch covers both).
    #[arg(long, value_enum, default_value_t = TriState::Any)]
    colored: TriState,
    /// Fully lined borders: yes, no, or any (the batch covers both).
    #[arg(long, value_enum, default_value_t = TriState::Any)]
    lined: TriState,
    /// Content domain the topics and filler text come from.
    #[arg(long, default_value = "telecom")]
    domain: String,
    #[arg(long, value_enum, default_value_t = LangArg::En)]
    lang: LangArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ProviderArg::Template)]
    provider: ProviderArg,
    /// JSON provider settings (endpoint, model, api_key_env, ...); the API
    /// key itself is read from that environment variable, never from a file.
    #[arg(long, value_name = "PATH")]
    provider_config: Option<PathBuf>,
    /// Inclusive row count range.
    #[arg(long, value_parser = parse_range, default_value = "2,12", value_name = "MIN,MAX")]
    rows: (usize, usize),
    /// Inclusive column count range.
    #[arg(long, value_parser = parse_range, default_value = "2,8", value_name = "MIN,MAX")]
    cols: (usize, usize),
    /// Output manifest (JSONL); "-" writes to stdout.
    #[arg(long, default_value = "-", value_name = "PATH")]
    out: String,
    /// Batch report JSON (default: <out>.report.json for file outputs).
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// File of already-used topics (one per line) new topics must not repeat.
    #[arg(long, value_name = "PATH")]
    used_topics: Option<PathBuf>,
    /// Record every provider exchange into this JSONL transcript.
    #[arg(long, value_name = "PATH")]
    record_transcript: Option<PathBuf>,
    /// Serve provider calls from a recorded transcript instead of HTTP.
    #[arg(long, value_name = "PATH")]
    replay_transcript: Option<PathBuf>,
    /// Shell command run once per produced record with the record JSON on
    /// stdin (external rendering hook; not exercised by the test suite).
    #[arg(long, value_name = "CMD")]
    render_cmd: Option<String>,
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Failure> {
    let used_topics = match &args.used_topics {
        Some(path) => read_to_string(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect(),
        None => Vec::new(),
    };
    let request = GenerationRequest {
        count: args.count,
        complexity: args.complexity.into(),
        colored: args.colored.pin(),
        lined: args.lined.pin(),
        row_range: args.rows,
        col_range: args.cols,
        header_layout_weights: [1, 1, 1],
        domain: args.domain.clone(),
        language: args.lang.into(),
        seed: args.seed,
        used_topics,
    };
    let (provider, recording) = build_content_provider(
        args.provider,
        args.provider_config.as_deref(),
        args.record_transcript.as_deref(),
        args.replay_transcript.as_deref(),
    )?;
    let checker = FillingChecker::surrogate();

    let (records, report, provider_error) = match generate_batch(&request, provider.as_ref(), &checker) {
        Ok((records, report)) => (records, report, None),
        Err(GenerateError::Config { detail }) => return Err(Failure::config(detail)),
        // Keep what finished: the partial manifest and report are still written.
        Err(GenerateError::Provider { message, records, report }) => (records, report, Some(message)),
    };
    save_transcript(recording)?;

    let to_stdout = args.out == "-";
    if to_stdout {
        print_out(&crate::manifest::records_to_jsonl(&records))?;
    } else {
        write_manifest(&records, Path::new(&args.out))?;
    }
    let report_path = match (&args.report, to_stdout) {
        (Some(p), _) => Some(p.clone()),
        (None, false) => Some(PathBuf::from(format!("{}.report.json", args.out))),
        (None, true) => None,
    };
    if let Some(p) = &report_path {
        write_json(p, &report)?;
    }

    let render_failures = match &args.render_cmd {
        Some(cmd) => render_hook(cmd, &records)?,
        None => 0,
    };

    let summary = format!("generated {} of {} records -> {}", report.produced, report.requested, args.out);
    if to_stdout {
        eprintln!("{summary}");
    } else {
        say(summary);
    }
    if let Some(message) = provider_error {
        return Err(Failure::items(format!(
            "provider failed after {} of {} items: {message}",
            report.produced, report.requested
        )));
    }
    if report.failed > 0 {
        return Err(Failure::items(format!("{} of {} items failed", report.failed, report.requested)));
    }
    if render_failures > 0 {
        return Err(Failure::items(format!("render command failed for {render_failures} records")));
    }
    Ok(())
}

/// Pipes each record's JSON into `cmd` via the shell; returns the number of
/// failed invocations. External hook, intentionally not covered by tests.
fn render_hook(cmd: &str, records: &[AnnotationRecord]) -> Result<usize, Failure> {
    let mut failures = 0usize;
    for record in records {
        let mut child = std::process::Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(std::process::Stdio::piped())
            .spawn()
            .map_err(|e| Failure::config(format!("cannot spawn render command: {e}")))?;
        let payload = serde_json::to_string(record).expect("records serialize");
        let ok = child
            .stdin
            .take()
            .map(|mut stdin| stdin.write_all(payload.as_bytes()).is_ok())
            .unwrap_or(false);
        let status = child
            .wait()
            .map_err(|e| Failure::config(format!("render command did not run: {e}")))?;
        if !ok || !status.success() {
            failures += 1;
        }
    }
    Ok(failures)
}

// ---------------------------------------------------------------------------
// validate

#[derive(Args)]
struct ValidateArgs {
    /// Input manifest (JSONL).
    manifest: PathBuf,
    /// Validation report JSON.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ValidateItem {
    id: String,
    defects: Vec<Defect>,
    /// True when the markup is valid but disagrees with the record's cell
    /// or token annotations.
    annotation_drift: bool,
}

#[derive(Debug, Serialize)]
struct ValidateReport {
    total: usize,
    valid: usize,
    invalid: usize,
    items: Vec<ValidateItem>,
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let records = load_manifest(&args.manifest)?;
    let mut items = Vec::new();
    for record in &records {
        let defects = validate_table(&record.html);
        let annotation_drift = defects.is_empty() && {
            let grid = html_to_grid(&record.html).expect("no defects implies parseable");
            grid.cells != record.cells || structure_tokens(&grid) != record.structure_tokens
        };
        if !defects.is_empty() || annotation_drift {
            items.push(ValidateItem { id: record.id.clone(), defects, annotation_drift });
        }
    }
    let report = ValidateReport {
        total: records.len(),
        valid: records.len() - items.len(),
        invalid: items.len(),
        items,
    };
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    say(format!("{} of {} records valid", report.valid, report.total));
    if report.invalid > 0 {
        return Err(Failure::items(format!("{} of {} records have defects", report.invalid, report.total)));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// rank and corr

/// One line of a rank file, as written by `rank` and read by `corr`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankLine {
    pub id: String,
    pub structure: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic: Option<u8>,
    pub overall: u8,
    pub accepted: bool,
}

#[derive(Args)]
struct RankArgs {
    /// Input manifest (JSONL).
    manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = RankerArg::Surrogate)]
    ranker: RankerArg,
    /// JSON provider settings for --ranker http.
    #[arg(long, value_name = "PATH")]
    provider_config: Option<PathBuf>,
    /// Output rank file (JSONL).
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

fn cmd_rank(args: RankArgs) -> Result<(), Failure> {
    let records = load_manifest(&args.manifest)?;
    let ranker = build_ranker(args.ranker, args.provider_config.as_deref())?;
    let checker = FillingChecker::with_ranker(ranker);
    let mut lines = Vec::with_capacity(records.len());
    let mut accepted = 0usize;
    for record in &records {
        let outcome = checker.check(&record.html, Some(&record.topic));
        accepted += usize::from(outcome.accepted);
        lines.push(RankLine {
            id: record.id.clone(),
            structure: outcome.report.structure,
            topic: outcome.report.topic,
            semantic: outcome.report.semantic,
            overall: outcome.report.overall,
            accepted: outcome.accepted,
        });
    }
    write_jsonl(&args.out, &lines)?;
    say(format!("ranked {} records ({} accepted) -> {}", lines.len(), accepted, args.out.display()));
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RankField {
    Structure,
    Topic,
    Semantic,
    Overall,
}

#[derive(Args)]
struct CorrArgs {
    /// First rank file (JSONL).
    ranks_a: PathBuf,
    /// Second rank file (JSONL).
    ranks_b: PathBuf,
    /// Which rank column to correlate.
    #[arg(long, value_enum, default_value_t = RankField::Overall)]
    field: RankField,
}

fn rank_field(line: &RankLine, field: RankField) -> Option<f64> {
    match field {
        RankField::Structure => Some(f64::from(line.structure)),
        RankField::Topic => line.topic.map(f64::from),
        RankField::Semantic => line.semantic.map(f64::from),
        RankField::Overall => Some(f64::from(line.overall)),
    }
}

fn cmd_corr(args: CorrArgs) -> Result<(), Failure> {
    let a: Vec<RankLine> = read_jsonl(&args.ranks_a, "rank line")?;
    let b: Vec<RankLine> = read_jsonl(&args.ranks_b, "rank line")?;
    let by_id: HashMap<&str, &RankLine> = b.iter().map(|l| (l.id.as_str(), l)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for line in &a {
        let Some(other) = by_id.get(line.id.as_str()) else { continue };
        let (Some(x), Some(y)) = (rank_field(line, args.field), rank_field(other, args.field)) else {
            return Err(Failure::config(format!(
                "record {} lacks the requested rank column; re-run rank with a content ranker",
                line.id
            )));
        };
        xs.push(x);
        ys.push(y);
    }
    if xs.is_empty() {
        return Err(Failure::config("the two rank files share no record ids"));
    }
    let fail = |e: crate::corr::CorrError| Failure::config(format!("correlation undefined: {e}"));
    let s = spearman(&xs, &ys).map_err(fail)?;
    let p = pearson(&xs, &ys).map_err(fail)?;
    let k = kendall_tau_b(&xs, &ys).map_err(fail)?;
    print_out(&format!("pairs {}\nspearman {s:.6}\npearson {p:.6}\nkendall {k:.6}\n", xs.len()))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// augment

#[derive(Args)]
struct AugmentArgs {
    /// Input manifest (JSONL).
    manifest: PathBuf,
    /// Output manifest of variants (JSONL).
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Content domain for freshly filled cells.
    #[arg(long, default_value = "telecom")]
    domain: String,
    #[arg(long, value_enum, default_value_t = ProviderArg::Template)]
    provider: ProviderArg,
    /// JSON provider settings for --provider http.
    #[arg(long, value_name = "PATH")]
    provider_config: Option<PathBuf>,
}

fn cmd_augment(args: AugmentArgs) -> Result<(), Failure> {
    let records = load_manifest(&args.manifest)?;
    let (provider, _) =
        build_content_provider(args.provider, args.provider_config.as_deref(), None, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut variants = Vec::new();
    let mut failed = Vec::new();
    for record in &records {
        match variant_fanout(record, &args.domain, provider.as_ref(), &mut rng) {
            Ok(mut v) => variants.append(&mut v),
            Err(e) => {
                log::warn!("fanout failed for {}: {e}", record.id);
                failed.push(record.id.clone());
            }
        }
    }
    write_manifest(&variants, &args.out)?;
    say(format!(
        "augmented {} records into {} variants -> {}",
        records.len() - failed.len(),
        variants.len(),
        args.out.display()
    ));
    if !failed.is_empty() {
        return Err(Failure::items(format!(
            "fanout failed for {} of {} records ({})",
            failed.len(),
            records.len(),
            failed.join(", ")
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// teds

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TedsMode {
    Full,
    Structure,
}

#[derive(Args)]
struct TedsArgs {
    /// Predictions: JSONL with at least {id, html} per line.
    #[arg(long, value_name = "PATH")]
    pred: PathBuf,
    /// Gold manifest (JSONL) carrying the subset labels.
    #[arg(long, value_name = "PATH")]
    gold: PathBuf,
    #[arg(long, value_enum, default_value_t = TedsMode::Full)]
    mode: TedsMode,
    /// Score th and td as the same tag.
    #[arg(long)]
    merge_th_td: bool,
    /// Score report JSON.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct PredLine {
    id: String,
    html: String,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct ColumnScore {
    count: usize,
    mean: Option<f64>,
}

/// Mean scores over the standard evaluation subsets, keyed by gold labels.
#[derive(Debug, Serialize)]
struct TedsColumns {
    all: ColumnScore,
    simple: ColumnScore,
    complex: ColumnScore,
    colored: ColumnScore,
    colorless: ColumnScore,
    lined: ColumnScore,
    lineless: ColumnScore,
}

#[derive(Debug, Serialize)]
struct TedsReport {
    mode: String,
    merge_th_td: bool,
    records: usize,
    missing_predictions: Vec<String>,
    unparseable_predictions: Vec<String>,
    columns: TedsColumns,
    per_item: Vec<TedsItem>,
}

#[derive(Debug, Serialize)]
struct TedsItem {
    id: String,
    score: f64,
}

fn column_score<F: Fn(&AnnotationRecord) -> bool>(
    records: &[AnnotationRecord],
    scores: &[f64],
    keep: F,
) -> ColumnScore {
    let subset: Vec<f64> = records
        .iter()
        .zip(scores)
        .filter(|(r, _)| keep(r))
        .map(|(_, &s)| s)
        .collect();
    let count = subset.len();
    let mean = (count > 0).then(|| subset.iter().sum::<f64>() / count as f64);
    ColumnScore { count, mean }
}

fn cmd_teds(args: TedsArgs) -> Result<(), Failure> {
    let gold = load_manifest(&args.gold)?;
    let preds: Vec<PredLine> = read_jsonl(&args.pred, "prediction")?;
    let mut by_id: HashMap<&str, &str> = HashMap::new();
    for p in &preds {
        if by_id.insert(p.id.as_str(), p.html.as_str()).is_some() {
            return Err(Failure::config(format!("duplicate prediction id {}", p.id)));
        }
    }
    let opts = TedsOptions {
        structure_only: args.mode == TedsMode::Structure,
        merge_th_td: args.merge_th_td,
    };

    let mut scores = Vec::with_capacity(gold.len());
    let mut missing = Vec::new();
    let mut unparseable = Vec::new();
    for record in &gold {
        let gold_grid = html_to_grid(&record.html).map_err(|e| {
            Failure::config(format!("gold record {} does not parse: {e}", record.id))
        })?;
        let score = match by_id.get(record.id.as_str()) {
            None => {
                missing.push(record.id.clone());
                0.0
            }
            Some(html) => match html_to_grid(html) {
                Ok(pred_grid) => teds_grids(&pred_grid, &gold_grid, &opts),
                Err(_) => {
                    unparseable.push(record.id.clone());
                    0.0
                }
            },
        };
        scores.push(score);
    }

    let columns = TedsColumns {
        all: column_score(&gold, &scores, |_| true),
        simple: column_score(&gold, &scores, |r| r.labels.is_simple),
        complex: column_score(&gold, &scores, |r| !r.labels.is_simple),
        colored: column_score(&gold, &scores, |r| r.labels.is_colored),
        colorless: column_score(&gold, &scores, |r| !r.labels.is_colored),
        lined: column_score(&gold, &scores, |r| r.labels.is_lined),
        lineless: column_score(&gold, &scores, |r| !r.labels.is_lined),
    };
    let failures = missing.len() + unparseable.len();
    let report = TedsReport {
        mode: match args.mode {
            TedsMode::Full => "full".to_string(),
            TedsMode::Structure => "structure".to_string(),
        },
        merge_th_td: args.merge_th_td,
        records: gold.len(),
        missing_predictions: missing,
        unparseable_predictions: unparseable,
        columns,
        per_item: gold
            .iter()
            .zip(&scores)
            .map(|(r, &s)| TedsItem { id: r.id.clone(), score: s })
            .collect(),
    };
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    let show = |name: &str, c: ColumnScore| match c.mean {
        Some(m) => say(format!("{name} {m:.6} ({})", c.count)),
        None => say(format!("{name} - (0)")),
    };
    show("all", report.columns.all);
    show("simple", report.columns.simple);
    show("complex", report.columns.complex);
    show("colored", report.columns.colored);
    show("colorless", report.columns.colorless);
    show("lined", report.columns.lined);
    show("lineless", report.columns.lineless);
    if failures > 0 {
        return Err(Failure::items(format!(
            "{failures} of {} predictions missing or unparseable (scored 0)",
            gold.len()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sample

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Coreset,
    Random,
    Ppl,
    Hard,
}

#[derive(Args)]
struct SampleArgs {
    /// Pool manifest (JSONL).
    #[arg(long, value_name = "PATH")]
    pool: PathBuf,
    /// Feature source: "structural" (derived from annotations) or
    /// "file:PATH" pointing at a 2-D .npy embedding matrix in pool order.
    #[arg(long, default_value = "structural")]
    features: String,
    #[arg(long, value_enum, default_value_t = StrategyArg::Coreset)]
    strategy: StrategyArg,
    /// Number of records to select.
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    metric: MetricArg,
    /// JSONL of {id, score} required by the ppl and hard strategies.
    #[arg(long, value_name = "PATH")]
    scores: Option<PathBuf>,
    /// Output manifest of selected records, in selection order.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Debug, Deserialize)]
struct ScoreLine {
    id: String,
    score: f64,
}

fn pool_features(records: &[AnnotationRecord], spec: &str) -> Result<Vec<EmbeddingVector>, Failure> {
    let raw = if spec == "structural" {
        records.iter().map(structural_features).collect()
    } else if let Some(path) = spec.strip_prefix("file:") {
        let matrix = read_npy_matrix(Path::new(path))
            .map_err(|e| Failure::config(format!("cannot load features {path}: {e}")))?;
        if matrix.len() != records.len() {
            return Err(Failure::config(format!(
                "feature matrix has {} rows but the pool has {} records",
                matrix.len(),
                records.len()
            )));
        }
        matrix
    } else {
        return Err(Failure::config(format!(
            "unknown --features {spec:?}; expected \"structural\" or \"file:PATH\""
        )));
    };
    standardize_pool(&raw).map_err(|e| Failure::config(e.to_string()))
}

fn cmd_sample(args: SampleArgs) -> Result<(), Failure> {
    let records = load_manifest(&args.pool)?;
    if records.is_empty() {
        return Err(Failure::config("the pool manifest is empty"));
    }
    let points = pool_features(&records, &args.features)?;
    let budget = args.budget.min(records.len());
    let metric = Metric::from(args.metric);

    let scores: Option<Vec<f64>> = match &args.scores {
        Some(path) => {
            let lines: Vec<ScoreLine> = read_jsonl(path, "score line")?;
            let by_id: HashMap<&str, f64> = lines.iter().map(|l| (l.id.as_str(), l.score)).collect();
            let mut out = Vec::with_capacity(records.len());
            for r in &records {
                match by_id.get(r.id.as_str()) {
                    Some(&s) => out.push(s),
                    None => return Err(Failure::config(format!("no score for record {}", r.id))),
                }
            }
            Some(out)
        }
        None => None,
    };

    let sample_failure = |e: crate::sampler::SamplerError| Failure::config(e.to_string());
    let picked: Vec<usize> = match args.strategy {
        StrategyArg::Coreset => k_center_greedy(&SelectionProblem {
            points: &points,
            s0: &[],
            budget,
            metric,
        })
        .map_err(sample_failure)?,
        StrategyArg::Random => {
            let candidates: Vec<usize> = (0..records.len()).collect();
            baseline_select(BaselineStrategy::Random, &candidates, None, budget, args.seed)
                .map_err(sample_failure)?
        }
        StrategyArg::Ppl | StrategyArg::Hard => {
            let strategy = if args.strategy == StrategyArg::Ppl {
                BaselineStrategy::Ppl
            } else {
                BaselineStrategy::HardExample
            };
            let candidates: Vec<usize> = (0..records.len()).collect();
            baseline_select(strategy, &candidates, scores.as_deref(), budget, args.seed)
                .map_err(sample_failure)?
        }
    };

    let selected: Vec<AnnotationRecord> = picked.iter().map(|&i| records[i].clone()).collect();
    write_manifest(&selected, &args.out)?;
    say(format!("selected {} of {} records -> {}", selected.len(), records.len(), args.out.display()));
    Ok(())
}

// ---------------------------------------------------------------------------
// al-run

#[derive(Args)]
struct AlRunArgs {
    /// Pipeline config JSON.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
}

/// Config file for `al-run`. The global seed drives generation, splits, and
/// every seeded module; API keys come only from the environment variable the
/// provider block names.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub generation: GenerationBlock,
    #[serde(default)]
    pub provider: ProviderBlock,
    #[serde(default)]
    pub checker: CheckerBlock,
    #[serde(default)]
    pub augmentation: AugmentationBlock,
    pub sampler: SamplerBlock,
    pub paths: PathsBlock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationBlock {
    pub count: usize,
    #[serde(default = "default_complexity")]
    pub complexity: Complexity,
    #[serde(default)]
    pub colored: Option<bool>,
    #[serde(default)]
    pub lined: Option<bool>,
    #[serde(default = "default_rows")]
    pub rows: (usize, usize),
    #[serde(default = "default_cols")]
    pub cols: (usize, usize),
    #[serde(default = "default_domain")]
    pub domain: String,
    #[serde(default = "default_language")]
    pub language: Language,
}

fn default_complexity() -> Complexity {
    Complexity::Mixed
}
fn default_rows() -> (usize, usize) {
    (2, 12)
}
fn default_cols() -> (usize, usize) {
    (2, 8)
}
fn default_domain() -> String {
    "telecom".to_string()
}
fn default_language() -> Language {
    Language::En
}

/// Flat provider block: {"kind": "template"} or {"kind": "http", endpoint,
/// model, api_key_env, ...}.
#[derive(Debug, Default)]
pub enum ProviderBlock {
    #[default]
    Template,
    Http(LlmProviderConfig),
}

impl<'de> Deserialize<'de> for ProviderBlock {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<ProviderBlock, D::Error> {
        use serde::de::Error as _;
        let mut value = serde_json::Map::deserialize(deserializer)?;
        let kind = match value.remove("kind") {
            Some(serde_json::Value::String(s)) => s,
            Some(_) => return Err(D::Error::custom("provider kind must be a string")),
            None => return Err(D::Error::custom("provider block needs a kind")),
        };
        match kind.as_str() {
            "template" => {
                if let Some(key) = value.keys().next() {
                    return Err(D::Error::custom(format!(
                        "unknown field {key:?} for the template provider"
                    )));
                }
                Ok(ProviderBlock::Template)
            }
            "http" => serde_json::from_value(serde_json::Value::Object(value))
                .map(ProviderBlock::Http)
                .map_err(D::Error::custom),
            other => Err(D::Error::custom(format!(
                "unknown provider kind {other:?}; expected template or http"
            ))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckerBlock {
    #[serde(default = "default_min_overall")]
    pub min_overall: u8,
}

fn default_min_overall() -> u8 {
    3
}

impl Default for CheckerBlock {
    fn default() -> CheckerBlock {
        CheckerBlock { min_overall: default_min_overall() }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationBlock {
    /// When true, every generated record is fanned out into its nine
    /// variants before the pool is sampled.
    #[serde(default)]
    pub enabled: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerBlock {
    /// Selection strategy, e.g. {"strategy": "coreset", "metric": "euclidean"}.
    pub selection: LoopStrategy,
    pub step_size: usize,
    pub budget: usize,
    #[serde(default = "default_initial_labels")]
    pub initial_labels: usize,
    /// Fraction of the pool held out to score the model after each round.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

fn default_initial_labels() -> usize {
    3
}
fn default_test_fraction() -> f64 {
    0.25
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsBlock {
    /// Directory receiving pool.jsonl, curve.csv, selected.jsonl, and the
    /// batch report; created if missing.
    pub out_dir: PathBuf,
    /// Directory receiving the provider transcript (http provider only).
    #[serde(default)]
    pub transcript_dir: Option<PathBuf>,
}

fn curve_csv(points: &[crate::sampler::CurvePoint]) -> String {
    let mut out = String::from("round,labeled_count,score\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.round, p.labeled, p.score));
    }
    out
}

fn cmd_al_run(args: AlRunArgs) -> Result<(), Failure> {
    let config: PipelineConfig = read_json(&args.config, "pipeline config")?;
    std::fs::create_dir_all(&config.paths.out_dir).map_err(|e| {
        Failure::config(format!("cannot create {}: {e}", config.paths.out_dir.display()))
    })?;
    if let Some(dir) = &config.paths.transcript_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
    }

    // Generation. The pool and report always land in out_dir, even when a
    // later stage fails, so partial runs stay inspectable.
    let request = GenerationRequest {
        count: config.generation.count,
        complexity: config.generation.complexity,
        colored: config.generation.colored,
        lined: config.generation.lined,
        row_range: config.generation.rows,
        col_range: config.generation.cols,
        header_layout_weights: [1, 1, 1],
        domain: config.generation.domain.clone(),
        language: config.generation.language,
        seed: config.seed,
        used_topics: Vec::new(),
    };
    let mut recording: Option<(Arc<Transcript>, PathBuf)> = None;
    let provider: Box<dyn ContentProvider> = match &config.provider {
        ProviderBlock::Template => Box::new(TemplateProvider),
        ProviderBlock::Http(c) => {
            let mut p = LlmProvider::over_http(c.clone());
            if let Some(dir) = &config.paths.transcript_dir {
                let transcript = Arc::new(Transcript::new());
                p = p.with_transcript(transcript.clone());
                recording = Some((transcript, dir.join("al-run.jsonl")));
            }
            Box::new(p)
        }
    };
    let checker = FillingChecker::surrogate().min_overall(config.checker.min_overall);
    let batch = generate_batch(&request, provider.as_ref(), &checker);
    save_transcript(recording)?;
    let (mut records, report) = match batch {
        Ok(pair) => pair,
        Err(GenerateError::Config { detail }) => return Err(Failure::config(detail)),
        Err(GenerateError::Provider { message, .. }) => {
            return Err(Failure::items(format!("provider failed during pool generation: {message}")))
        }
    };
    write_json(&config.paths.out_dir.join("report.json"), &report)?;

    if config.augmentation.enabled {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xa0a0_a0a0_a0a0_a0a0);
        let mut variants = Vec::new();
        for record in &records {
            let mut v = variant_fanout(record, &config.generation.domain, provider.as_ref(), &mut rng)
                .map_err(|e| Failure::items(format!("fanout failed for {}: {e}", record.id)))?;
            variants.append(&mut v);
        }
        records.append(&mut variants);
    }
    write_manifest(&records, &config.paths.out_dir.join("pool.jsonl"))?;
    if records.len() < 4 {
        return Err(Failure::config(format!(
            "the pool has only {} records; the loop needs at least 4",
            records.len()
        )));
    }

    // Deterministic split: shuffle indices by the global seed, hold out the
    // test slice, seed the labeled set from the front of the rest.
    let features = {
        let raw: Vec<EmbeddingVector> = records.iter().map(structural_features).collect();
        standardize_pool(&raw).map_err(|e| Failure::config(e.to_string()))?
    };
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed_5eed_5eed);
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let test_count = ((records.len() as f64 * config.sampler.test_fraction).round() as usize)
        .clamp(1, records.len() - 2);
    let (test_idx, pool_idx) = order.split_at(test_count);
    if config.sampler.initial_labels == 0 || config.sampler.initial_labels >= pool_idx.len() {
        return Err(Failure::config(format!(
            "initial_labels must be in 1..{} (pool after the test split), got {}",
            pool_idx.len(),
            config.sampler.initial_labels
        )));
    }

    let label_of = |i: usize| SampleLabel::from(&records[i].labels);
    let test: Vec<(EmbeddingVector, SampleLabel)> =
        test_idx.iter().map(|&i| (features[i].clone(), label_of(i))).collect();
    let pool: Vec<PoolSample> = pool_idx
        .iter()
        .map(|&i| PoolSample { id: records[i].id.clone(), features: features[i].clone() })
        .collect();
    let initial: Vec<(usize, SampleLabel)> =
        (0..config.sampler.initial_labels).map(|p| (p, label_of(pool_idx[p]))).collect();
    let annotator = MapAnnotator::new(
        pool_idx.iter().map(|&i| (records[i].id.clone(), label_of(i))),
    );
    // Score-driven strategies rate a record's difficulty by inverting the
    // checker's overall rank for it.
    let scores: Vec<f64> = pool_idx
        .iter()
        .map(|&i| {
            let outcome = checker.check(&records[i].html, Some(&records[i].topic));
            6.0 - f64::from(outcome.report.overall)
        })
        .collect();

    let state = ActiveLearningState::new(pool, initial, config.sampler.budget)
        .map_err(|e| Failure::config(e.to_string()))?;
    let trainer = NnTrainer::default();
    let outcome = run_al_loop(
        state,
        config.sampler.selection,
        config.sampler.step_size,
        Some(&scores),
        &trainer,
        &annotator,
        &test,
    )
    .map_err(|e| Failure::config(e.to_string()))?;

    std::fs::write(config.paths.out_dir.join("curve.csv"), curve_csv(&outcome.curve))
        .map_err(|e| Failure::config(format!("cannot write curve.csv: {e}")))?;
    let picked_ids: Vec<&str> = outcome
        .labeled
        .iter()
        .skip(config.sampler.initial_labels)
        .map(|(id, _)| id.as_str())
        .collect();
    let selected: Vec<AnnotationRecord> = picked_ids
        .iter()
        .map(|id| records.iter().find(|r| r.id == *id).expect("labeled ids come from the pool").clone())
        .collect();
    write_manifest(&selected, &config.paths.out_dir.join("selected.jsonl"))?;

    let last = outcome.curve.last().expect("the curve has a round-zero point");
    say(format!(
        "{} rounds, {} labeled, final score {:.4} -> {}",
        last.round,
        last.labeled,
        last.score,
        config.paths.out_dir.display()
    ));
    if let Some(e) = outcome.error {
        return Err(Failure::items(format!("loop stopped early: {e}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// disturb

#[derive(Args)]
struct DisturbArgs {
    /// Input manifest (JSONL).
    manifest: PathBuf,
    /// Comma-separated subset of structure,topic,semantics.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [DimensionArg::Structure, DimensionArg::Topic, DimensionArg::Semantics])]
    dimensions: Vec<DimensionArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[arg(long, value_enum, default_value_t = RankerArg::Surrogate)]
    ranker: RankerArg,
    /// JSON provider settings for --ranker http.
    #[arg(long, value_name = "PATH")]
    provider_config: Option<PathBuf>,
    /// Study report JSON.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

fn cmd_disturb(args: DisturbArgs) -> Result<(), Failure> {
    let records = load_manifest(&args.manifest)?;
    let mut dimensions: Vec<Dimension> = args.dimensions.iter().map(|&d| d.into()).collect();
    dimensions.dedup();
    let ranker = build_ranker(args.ranker, args.provider_config.as_deref())?;
    let study = disturbance_study(&records, &dimensions, ranker.as_ref(), args.seed, args.repetitions)
        .map_err(|e| Failure::config(e.to_string()))?;
    if let Some(path) = &args.report {
        write_json(path, &study)?;
    }
    say(format!("{} records, {} repetitions", study.records, study.repetitions));
    for d in &study.dimensions {
        say(format!(
            "{}: spearman {:.3} ± {:.3}, pearson {:.3} ± {:.3}, kendall {:.3} ± {:.3}, strict drops {:.0}%",
            d.dimension,
            d.spearman.mean,
            d.spearman.half_std,
            d.pearson.mean,
            d.pearson.half_std,
            d.kendall.mean,
            d.kendall.half_std,
            d.strict_drop_fraction * 100.0
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
