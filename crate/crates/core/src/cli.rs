//! Command-line front end chaining the pipeline stages.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::corpus::{self, Channel, CorpusError, ForCode, LabeledRecord};
use crate::embedder::{self, EmbedderError, Loss, ModelParams};
use crate::ensemble::{self, ChannelModels, DecisionLine, EnsembleError, EnsemblePolicy};
use crate::evaluate::{self, EvaluateError};
use crate::fields::{self, DistributionSet, FieldScheme, FieldsError, SelectionConfig};
use crate::report;
use crate::sampler::{self, SamplerError, SamplingSpec, Strategy};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Fields(#[from] FieldsError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Embedder(#[from] EmbedderError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Evaluate(#[from] EvaluateError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "fortag", version, about = "Research-field classification of publications")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Join publications to journal FoR codes on ISSN
    Match(MatchArgs),
    /// Choose the flat set of fields used as classes
    SelectFields(SelectArgs),
    /// Build a training/test dataset for one channel
    Sample(SampleArgs),
    /// Train one channel model
    Train(TrainArgs),
    /// Classify publications with the channel ensemble
    Predict(PredictArgs),
    /// Score predictions
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Query a trained model
    #[command(subcommand)]
    Explore(ExploreCommand),
}

#[derive(Debug, Args)]
struct MatchArgs {
    /// Publications, one JSON object per line
    #[arg(long)]
    publications: PathBuf,
    /// Journal list (CSV)
    #[arg(long)]
    journals: PathBuf,
    /// Labeled publications (JSON lines)
    #[arg(long)]
    out: PathBuf,
    /// Histogram of FoR codes per publication (CSV)
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Abstract/keywords/MeSH availability (CSV)
    #[arg(long)]
    availability: Option<PathBuf>,
    /// Field scheme enabling per-field availability and coverage
    #[arg(long)]
    scheme: Option<PathBuf>,
    /// Histogram of selected fields per publication (CSV); needs --scheme
    #[arg(long, requires = "scheme")]
    coverage: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["publications", "labeled", "distributions"])))]
struct SelectArgs {
    /// Publications (needs --journals)
    #[arg(long, requires = "journals")]
    publications: Option<PathBuf>,
    /// Journal list (CSV)
    #[arg(long)]
    journals: Option<PathBuf>,
    /// Labeled publications written by `match`
    #[arg(long)]
    labeled: Option<PathBuf>,
    /// Precomputed code distributions (JSON)
    #[arg(long)]
    distributions: Option<PathBuf>,
    /// Field scheme (JSON)
    #[arg(long)]
    out: PathBuf,
    /// Minimum share (exclusive) for a 2-digit code
    #[arg(long, default_value_t = 0.03)]
    threshold_2digit: f64,
    /// Minimum share (exclusive) for a 4-digit code under a drill-down division
    #[arg(long, default_value_t = 0.02)]
    threshold_4digit: f64,
    /// Divisions split into 4-digit groups
    #[arg(long = "drill-down", value_delimiter = ',', default_value = "11,06")]
    drill_down: Vec<String>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Labeled publications written by `match`
    #[arg(long)]
    labeled: PathBuf,
    /// Field scheme (JSON)
    #[arg(long)]
    scheme: PathBuf,
    #[arg(long, value_parser = parse_channel)]
    channel: Channel,
    #[arg(long, value_enum, default_value_t = Strategy::Stratified)]
    strategy: Strategy,
    /// Documents to draw before splitting [default: all]
    #[arg(long)]
    size: Option<usize>,
    /// Training share of articles
    #[arg(long, default_value_t = 0.9)]
    split: f64,
    #[arg(long)]
    seed: u64,
    /// Training set (labeled text lines)
    #[arg(long)]
    train_out: PathBuf,
    /// Test set (labeled text lines)
    #[arg(long)]
    test_out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_parser = parse_channel)]
    channel: Channel,
    /// Training set (labeled text lines)
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 50)]
    epoch: usize,
    #[arg(long, default_value_t = 2)]
    word_ngrams: usize,
    #[arg(long, value_enum, default_value_t = Loss::Ova)]
    loss: Loss,
    #[arg(long, default_value_t = 20)]
    min_count: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 2_000_000)]
    buckets: usize,
    #[arg(long)]
    seed: u64,
    /// Training threads; more than one gives up reproducibility
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Model file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Publications, one JSON object per line
    #[arg(long)]
    publications: PathBuf,
    /// Channel model as CHANNEL=PATH; repeat for each channel
    #[arg(long = "model", value_parser = parse_model_spec, required = true)]
    models: Vec<(Channel, PathBuf)>,
    /// Field scheme the models must agree with
    #[arg(long)]
    scheme: Option<PathBuf>,
    /// A channel votes only when its top probability exceeds this
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Decisions (JSON lines)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Precision, recall and F1 of a model on a test set, or of ensemble decisions
    Metrics(MetricsArgs),
    /// Journal-level to article-level transition matrix
    Transition(TransitionArgs),
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["model", "decisions"])))]
struct MetricsArgs {
    /// Channel model, scored on --dataset
    #[arg(long, requires = "dataset")]
    model: Option<PathBuf>,
    /// Test set (labeled text lines)
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Decisions written by `predict`, scored against --labeled
    #[arg(long, requires_all = ["labeled", "scheme"])]
    decisions: Option<PathBuf>,
    /// Labeled publications holding the gold codes
    #[arg(long)]
    labeled: Option<PathBuf>,
    /// Field scheme mapping gold codes to fields
    #[arg(long)]
    scheme: Option<PathBuf>,
    /// Model predictions at or below this probability count as none
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Metrics table (CSV); a JSON copy is written beside it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TransitionArgs {
    /// Decisions written by `predict`
    #[arg(long)]
    decisions: PathBuf,
    /// Count matrix (CSV); normalized and JSON variants are written beside it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum ExploreCommand {
    /// Nearest neighbors of a word
    Nn {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Words w maximizing cos(w, a - b + c)
    Analogies {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        c: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Most probable labels for a text
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
    },
}

fn parse_channel(s: &str) -> std::result::Result<Channel, String> {
    s.parse::<Channel>().map_err(|e| e.to_string())
}

fn parse_model_spec(s: &str) -> std::result::Result<(Channel, PathBuf), String> {
    let (channel, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected CHANNEL=PATH, got {s:?}"))?;
    Ok((parse_channel(channel)?, PathBuf::from(path)))
}

/// Runs the command line `argv` (program name first) and returns the exit
/// status: 0 on success, 2 on usage errors, 1 when a stage fails.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Match(a) => run_match(a),
        Command::SelectFields(a) => run_select(a),
        Command::Sample(a) => run_sample(a),
        Command::Train(a) => run_train(a),
        Command::Predict(a) => run_predict(a),
        Command::Eval(EvalCommand::Metrics(a)) => run_metrics(a),
        Command::Eval(EvalCommand::Transition(a)) => run_transition(a),
        Command::Explore(e) => run_explore(e),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn create(path: &Path) -> Result<io::BufWriter<File>> {
    report::create(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn read_scheme(path: &Path) -> Result<FieldScheme> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CliError::File { path: path.to_path_buf(), source })?;
    FieldScheme::from_json(&text)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn read_labeled(path: &Path) -> Result<Vec<LabeledRecord>> {
    Ok(corpus::parse_labeled(open(path)?)?)
}

fn join(publications: &Path, journals: &Path) -> Result<Vec<LabeledRecord>> {
    let records = corpus::parse_publications(open(publications)?)?;
    let list = corpus::parse_journal_list(open(journals)?)?;
    if list.dropped_rows > 0 {
        eprintln!("warning: dropped {} journal rows without a valid ISSN", list.dropped_rows);
    }
    Ok(corpus::match_for_codes(&records, &list.entries)?)
}

fn run_match(a: MatchArgs) -> Result<()> {
    let labeled = join(&a.publications, &a.journals)?;
    let mut w = create(&a.out)?;
    corpus::write_labeled(&labeled, &mut w)?;
    w.flush()?;
    let matched = labeled.iter().filter(|r| !r.for_codes.is_empty()).count();
    eprintln!("matched {matched} of {} publications", labeled.len());

    if let Some(path) = &a.stats {
        let mut w = create(path)?;
        corpus::for_match_stats(&labeled)?.write_csv(&mut w, "for_codes")?;
        w.flush()?;
    }
    let scheme = a.scheme.as_deref().map(read_scheme).transpose()?;
    if let Some(path) = &a.availability {
        let mut w = create(path)?;
        corpus::metadata_availability(&labeled, scheme.as_ref())?.write_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(scheme) = &scheme {
        eprintln!(
            "publications losing every code to the field selection: {}",
            report::decimal(fields::selection_loss(&labeled, scheme))
        );
        if let Some(path) = &a.coverage {
            let mut w = create(path)?;
            fields::field_coverage(&labeled, scheme)?.write_csv(&mut w, "fields")?;
            w.flush()?;
        }
    }
    Ok(())
}

fn run_select(a: SelectArgs) -> Result<()> {
    let drill_down_parents = a
        .drill_down
        .iter()
        .map(|c| ForCode::parse(c).map_err(|e| CliError::Invalid(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let config = SelectionConfig {
        threshold_2digit: a.threshold_2digit,
        threshold_4digit: a.threshold_4digit,
        drill_down_parents,
        ..Default::default()
    };
    let distributions = if let Some(path) = &a.distributions {
        serde_json::from_reader(open(path)?)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?
    } else {
        let labeled = match (&a.labeled, &a.publications, &a.journals) {
            (Some(path), _, _) => read_labeled(path)?,
            (None, Some(p), Some(j)) => join(p, j)?,
            _ => unreachable!("clap enforces one input"),
        };
        DistributionSet::from_records(&labeled, &config.drill_down_parents)?
    };
    let scheme = distributions.select(&config)?;
    let mut w = create(&a.out)?;
    w.write_all(scheme.to_json().as_bytes())?;
    w.flush()?;
    eprintln!("selected {} fields", scheme.len());
    Ok(())
}

fn run_sample(a: SampleArgs) -> Result<()> {
    let labeled = read_labeled(&a.labeled)?;
    let scheme = read_scheme(&a.scheme)?;
    let docs = sampler::build_channel_documents(&labeled, &scheme, a.channel);
    let classes: Vec<String> = scheme.labels().map(str::to_string).collect();
    let spec = SamplingSpec {
        split_ratio: a.split,
        ..SamplingSpec::new(a.strategy, a.size.unwrap_or(docs.len()), a.seed)
    };
    let drawn = sampler::sample(&docs, &classes, &spec)?;
    let split = sampler::split_train_test(&drawn, &spec)?;
    for (path, part) in [(&a.train_out, &split.train), (&a.test_out, &split.test)] {
        sampler::write_training_text(part, create(path)?)?;
    }
    eprintln!(
        "{} channel: {} documents available, {} train, {} test",
        a.channel,
        docs.len(),
        split.train.len(),
        split.test.len()
    );
    Ok(())
}

fn run_train(a: TrainArgs) -> Result<()> {
    let examples = embedder::parse_training_text(open(&a.dataset)?)?;
    let params = ModelParams {
        dim: a.dim,
        epoch: a.epoch,
        word_ngrams: a.word_ngrams,
        min_count: a.min_count,
        loss: a.loss,
        learning_rate: a.lr,
        buckets: a.buckets,
        seed: a.seed,
    };
    if a.workers == 0 {
        return Err(CliError::Invalid("--workers must be at least 1".into()));
    }
    let (model, report) = embedder::train_hogwild(&examples, &params, a.workers)?;
    embedder::save_model(&model, &a.out)?;
    eprintln!(
        "{} channel: {} documents, {} words, {} labels, final loss {}",
        a.channel,
        examples.len(),
        model.vocab().num_words(),
        model.labels().len(),
        report.epoch_losses.last().map(|l| report::decimal(*l)).unwrap_or_default()
    );
    Ok(())
}

fn run_predict(a: PredictArgs) -> Result<()> {
    let mut models = BTreeMap::new();
    for (channel, path) in &a.models {
        if models.insert(*channel, embedder::load_model(path)?).is_some() {
            return Err(EnsembleError::DuplicateChannel(*channel).into());
        }
    }
    let scheme = a.scheme.as_deref().map(read_scheme).transpose()?;
    let models = ChannelModels::new(models, scheme.as_ref())?;
    let policy = EnsemblePolicy { threshold: a.threshold, ..Default::default() };
    let records = corpus::parse_publications(open(&a.publications)?)?;
    let mut w = create(&a.out)?;
    let mut decided = 0usize;
    for record in &records {
        let decision = ensemble::classify_record(&models, record, &policy)?;
        decided += decision.final_label.is_some() as usize;
        let line = serde_json::to_string(&DecisionLine::new(&record.pmid, &decision))
            .map_err(io::Error::other)?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    eprintln!("classified {decided} of {} publications", records.len());
    Ok(())
}

fn read_decisions(path: &Path) -> Result<Vec<DecisionLine>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            CliError::Invalid(format!("{}: line {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

fn run_metrics(a: MetricsArgs) -> Result<()> {
    let (predicted, gold): (Vec<Option<String>>, Vec<Vec<String>>) = if let Some(model_path) = &a.model {
        let model = embedder::load_model(model_path)?;
        let dataset = a.dataset.as_deref().expect("clap requires --dataset");
        let examples = embedder::parse_training_text(open(dataset)?)?;
        let mut pairs = Vec::with_capacity(examples.len());
        for ex in examples {
            let top = model.predict(&ex.text, 1, a.threshold)?.into_iter().next();
            pairs.push((top.map(|p| p.label), ex.labels));
        }
        pairs.into_iter().unzip()
    } else {
        let decisions = read_decisions(a.decisions.as_deref().expect("clap enforces one input"))?;
        let labeled = read_labeled(a.labeled.as_deref().expect("clap requires --labeled"))?;
        let scheme = read_scheme(a.scheme.as_deref().expect("clap requires --scheme"))?;
        let gold_by_pmid: BTreeMap<&str, Vec<String>> = labeled
            .iter()
            .map(|r| (r.record.pmid.as_str(), fields::assign_fields(&r.for_codes, &scheme)))
            .collect();
        let mut skipped = 0usize;
        let mut pairs = Vec::new();
        for d in &decisions {
            match gold_by_pmid.get(d.pmid.as_str()) {
                Some(g) if !g.is_empty() => pairs.push((d.final_label.clone(), g.clone())),
                _ => skipped += 1,
            }
        }
        if skipped > 0 {
            eprintln!("skipped {skipped} decisions without gold fields");
        }
        pairs.into_iter().unzip()
    };
    let report = evaluate::score_predictions(&predicted, &gold)?;
    evaluate::emit_metrics(&report, &a.out)?;
    eprintln!(
        "micro f1 {}, macro f1 {} over {} records",
        report::decimal(report.micro.f1),
        report::decimal(report.macro_avg.f1),
        report.records
    );
    Ok(())
}

fn run_transition(a: TransitionArgs) -> Result<()> {
    let decisions: Vec<_> = read_decisions(&a.decisions)?.iter().map(DecisionLine::to_decision).collect();
    let matrix = evaluate::build_transition_matrix(&decisions)?;
    evaluate::emit_transition(&matrix, &a.out)?;
    Ok(())
}

fn run_explore(command: ExploreCommand) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match command {
        ExploreCommand::Nn { model, word, k } => {
            let model = embedder::load_model(&model)?;
            for n in embedder::nearest_neighbors(&model, &word, k)? {
                writeln!(out, "{}\t{:.6}", n.word, n.similarity)?;
            }
        }
        ExploreCommand::Analogies { model, a, b, c, k } => {
            let model = embedder::load_model(&model)?;
            for n in embedder::analogies(&model, &a, &b, &c, k)? {
                writeln!(out, "{}\t{:.6}", n.word, n.similarity)?;
            }
        }
        ExploreCommand::Predict { model, text, k, threshold } => {
            let model = embedder::load_model(&model)?;
            for p in model.predict(&text, k, threshold)? {
                writeln!(out, "{}\t{:.6}", p.label, p.probability)?;
            }
        }
    }
    Ok(())
}
