//! Command-line entry point: training, inference, evaluation and the review
//! service.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use mdt_core::augment::{
    augment_positive_windows, AugmentationConfig, CachedTranslator, IdentityTranslator, TranslatorClient,
};
use mdt_core::corpus::{
    cohen_kappa, parse_labels, parse_transcript, partition, read_corpus_dir, split_by_meeting, write_corpus_dir,
    write_labels, DecisionLabel, DecisionTag, LabelSource, LabeledMeeting, Meeting, MeetingMeta, TranscriptFormat, DEFAULT_SPLIT_RATIOS,
};
use mdt_core::detector::{
    build_windows, detector_eval, evaluate_meetings, predict_tags, train_detector, DetectorConfig, DetectorModel,
    Window,
};
use mdt_core::metrics::{aggregate_scores, evaluate, EvalSample, ScoreSheet};
use mdt_core::pipeline::{
    CopyRewriter, DetectorPredictor, KeywordTagger, ModelRewriter, TagPredictor, UtteranceRewriter,
};
use mdt_core::rewriter::{
    evaluate_examples, examples, read_records, rewrite, train_rewriter, write_records, PointerGenerator,
    RewriterConfig, RewriterMode, Seq2SeqBackend,
};
use mdt_core::service::{router, serve, AppState, Store};
use mdt_core::synth::{detector_corpus, ellipsis_corpus, DetectorCorpusConfig};
use mdt_core::text::WhitespaceTokenizer;
use mdt_core::{Error, Result};

#[derive(Parser)]
#[command(name = "mdt", version, about = "Meeting decision tracker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decision utterance detection.
    #[command(subcommand)]
    Detector(DetectorCmd),
    /// Back-translate positive training windows.
    Augment(AugmentArgs),
    /// Decision utterance rewriting.
    #[command(subcommand)]
    Rewriter(RewriterCmd),
    /// Automatic and human evaluation.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Corpus utilities.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Generate synthetic corpora.
    #[command(subcommand)]
    Toy(ToyCmd),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum DetectorCmd {
    /// Train from a corpus directory described by a TOML config.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the training-split windows, e.g. as input to `augment`.
    Windows {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tag every utterance of a transcript.
    Predict {
        /// Transcript JSONL.
        #[arg(long)]
        meeting: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Output label file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precision, recall and F1 of predicted against gold labels.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Transcript the label files refer to. Without it, labels are
        /// matched by utterance index.
        #[arg(long)]
        meeting: Option<PathBuf>,
    },
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "vi,en,zh-CN,zh-TW,fr,de,ko")]
    pivots: Vec<String>,
    #[arg(long, default_value = "ja")]
    source_lang: String,
    /// On-disk translation cache.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Joint,
    #[value(name = "writer_only")]
    WriterOnly,
}

impl From<ModeArg> for RewriterMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Joint => RewriterMode::JointPickerWriter,
            ModeArg::WriterOnly => RewriterMode::WriterOnly,
        }
    }
}

#[derive(Subcommand)]
enum RewriterCmd {
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "joint")]
        mode: ModeArg,
    },
    /// Rewrite the TD-labeled utterances of a transcript.
    Run {
        #[arg(long)]
        meeting: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        beam_width: Option<usize>,
    },
    /// Score a trained model on rewrite records.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        beam_width: Option<usize>,
    },
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// Score predictions against references. Each file holds
    /// `{"id": …, "text": …}` lines.
    Score {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        orig: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Aggregate a `sample_id,evaluator_id,criterion,score` sheet.
    Human {
        #[arg(long)]
        sheet: PathBuf,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Meeting-level train/validation/test split of a corpus directory.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        /// Train, validation and test shares, e.g. `0.8,0.1,0.1`.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cohen's kappa between two label files of one transcript.
    Kappa {
        #[arg(long)]
        meeting: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

#[derive(Subcommand)]
enum ToyCmd {
    /// Templated meetings with gold labels, written as a corpus directory.
    Detector {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        meetings: usize,
        #[arg(long, default_value_t = 50)]
        utterances: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Ellipsis rewrite records (JSONL).
    Ellipsis {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 11)]
        seed: u64,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    #[arg(long, default_value = "mdt.sqlite")]
    db: PathBuf,
    /// Trained detector directory. Without it, utterances containing any
    /// `--keywords` entry are tagged.
    #[arg(long)]
    detector: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "decide,decided,agreed")]
    keywords: Vec<String>,
    /// Trained rewriter directory. Without it, original texts are copied.
    #[arg(long)]
    rewriter: Option<PathBuf>,
    /// Built review UI to serve at `/`.
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
    /// Shared bearer token; also read from `MDT_TOKEN`.
    #[arg(long, env = "MDT_TOKEN")]
    token: Option<String>,
}

fn default_ratios() -> [f64; 3] {
    DEFAULT_SPLIT_RATIOS
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectorRun {
    corpus: PathBuf,
    output: PathBuf,
    #[serde(default = "default_ratios")]
    split_ratios: [f64; 3],
    #[serde(default)]
    split_seed: u64,
    /// Replaces the windows built from the training split.
    train_windows: Option<PathBuf>,
    #[serde(default)]
    detector: DetectorConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RewriterRun {
    train: PathBuf,
    validation: Option<PathBuf>,
    output: PathBuf,
    #[serde(default)]
    rewriter: RewriterConfig,
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::File {
        path: path.into(),
        source: e,
    })?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::File {
        path: path.into(),
        source: e,
    })?))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::File {
        path: path.into(),
        source: e,
    })
}

fn read_meeting(path: &Path) -> Result<Meeting> {
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("meeting")
        .to_owned();
    parse_transcript(open(path)?, TranscriptFormat::Jsonl, MeetingMeta::new(id))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("{}: {e}", path.display()),
        })?);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct IndexedLabel {
    utterance_index: usize,
    tag: DecisionTag,
}

fn indexed_labels(path: &Path) -> Result<Vec<DecisionLabel>> {
    let lines: Vec<IndexedLabel> = read_jsonl(path)?;
    Ok(lines
        .into_iter()
        .map(|l| DecisionLabel {
            utterance_id: l.utterance_index.to_string(),
            tag: l.tag,
            source: LabelSource::Predicted,
        })
        .collect())
}

fn windows_jsonl(windows: &[Window]) -> Result<String> {
    let mut out = String::new();
    for w in windows {
        out.push_str(&serde_json::to_string(w)?);
        out.push('\n');
    }
    Ok(out)
}

fn split_corpus(run: &DetectorRun) -> Result<(Vec<LabeledMeeting>, [Vec<LabeledMeeting>; 3])> {
    let corpus = read_corpus_dir(&run.corpus)?;
    let ids: Vec<String> = corpus.iter().map(|m| m.meeting.id.clone()).collect();
    let split = split_by_meeting(&ids, run.split_ratios, run.split_seed)?;
    let parts = partition(&corpus, &split).map(|p| p.into_iter().cloned().collect::<Vec<_>>());
    Ok((corpus, parts))
}

fn training_windows(meetings: &[LabeledMeeting], config: &DetectorConfig) -> Result<Vec<Window>> {
    let mut out = Vec::new();
    for m in meetings {
        out.extend(build_windows(&m.meeting, Some(&m.labels), config.window_size, config.stride)?);
    }
    Ok(out)
}

fn detector(cmd: DetectorCmd) -> Result<()> {
    match cmd {
        DetectorCmd::Train { config } => {
            let run: DetectorRun = read_toml(&config)?;
            run.detector.validate()?;
            let (_, [train, val, test]) = split_corpus(&run)?;
            let windows = match &run.train_windows {
                Some(p) => read_jsonl(p)?,
                None => training_windows(&train, &run.detector)?,
            };
            eprintln!(
                "training on {} windows from {} meetings ({} validation, {} test)",
                windows.len(),
                train.len(),
                val.len(),
                test.len()
            );
            let trained = train_detector(&windows, &val, &run.detector)?;
            trained.model.save(&run.output)?;
            write_file(&run.output.join("training_log.json"), &serde_json::to_string_pretty(&trained.log)?)?;
            for e in &trained.log.epochs {
                eprintln!(
                    "epoch {:>3}  loss {:.4}  val F1 {}",
                    e.epoch,
                    e.train_loss,
                    e.validation.map_or("-".into(), |v| format!("{:.4}", v.f1))
                );
            }
            if !test.is_empty() {
                let s = evaluate_meetings(&trained.model, &test, &run.detector)?;
                println!("test P {:.4} R {:.4} F1 {:.4}", s.precision, s.recall, s.f1);
            }
            eprintln!("saved to {}", run.output.display());
        }
        DetectorCmd::Windows { config, out } => {
            let run: DetectorRun = read_toml(&config)?;
            let (_, [train, _, _]) = split_corpus(&run)?;
            let windows = training_windows(&train, &run.detector)?;
            write_file(&out, &windows_jsonl(&windows)?)?;
            eprintln!(
                "{} windows, {} positive",
                windows.len(),
                windows.iter().filter(|w| w.is_positive()).count()
            );
        }
        DetectorCmd::Predict { meeting, model, out } => {
            let meeting = read_meeting(&meeting)?;
            let model = DetectorModel::load(&model)?;
            let meta = model.meta();
            let config = DetectorConfig {
                window_size: meta.window_size,
                mode: meta.mode,
                threshold: meta.threshold,
                ..DetectorConfig::default()
            };
            let labels = predict_tags(&meeting, &model, &config)?;
            let text = write_labels(&meeting, &labels)?;
            match out {
                Some(p) => write_file(&p, &text)?,
                None => print!("{text}"),
            }
        }
        DetectorCmd::Eval { pred, gold, meeting } => {
            let (p, g) = match meeting {
                Some(m) => {
                    let meeting = read_meeting(&m)?;
                    (parse_labels(open(&pred)?, &meeting)?, parse_labels(open(&gold)?, &meeting)?)
                }
                None => (indexed_labels(&pred)?, indexed_labels(&gold)?),
            };
            let s = detector_eval(&p, &g)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
    }
    Ok(())
}

fn augment(args: AugmentArgs) -> Result<()> {
    let windows: Vec<Window> = read_jsonl(&args.input)?;
    let config = AugmentationConfig {
        pivot_langs: args.pivots,
        source_lang: args.source_lang,
        parallelism: args.parallelism,
        ..AugmentationConfig::default()
    };
    // Only the identity client ships; plug a real one in through the library.
    let client: Box<dyn TranslatorClient> = match args.cache {
        Some(dir) => Box::new(CachedTranslator::new(IdentityTranslator, dir)?),
        None => Box::new(IdentityTranslator),
    };
    let out = augment_positive_windows(&windows, &config, client.as_ref())?;
    write_file(&args.out, &windows_jsonl(&out.windows)?)?;
    for s in &out.skips {
        eprintln!("skipped {} via {}: {}", s.window_id, s.pivot, s.reason);
    }
    eprintln!("{} windows in, {} added, {} skipped", windows.len(), out.added, out.skips.len());
    Ok(())
}

fn rewriter(cmd: RewriterCmd) -> Result<()> {
    match cmd {
        RewriterCmd::Train { config, mode } => {
            let run: RewriterRun = read_toml(&config)?;
            run.rewriter.validate()?;
            let train = read_records(open(&run.train)?)?;
            let val = match &run.validation {
                Some(p) => read_records(open(p)?)?,
                None => Vec::new(),
            };
            let trained = train_rewriter(&train, &val, &run.rewriter, mode.into())?;
            trained.model.save(&run.output)?;
            write_file(&run.output.join("training_log.json"), &serde_json::to_string_pretty(&trained.log)?)?;
            for e in &trained.log.epochs {
                eprintln!(
                    "epoch {:>3}  loss {:.4}  val RG-1 {}",
                    e.epoch,
                    e.total_loss,
                    e.validation_rouge1.map_or("-".into(), |v| format!("{:.4}", v))
                );
            }
            eprintln!("best epoch {}; saved to {}", trained.log.best_epoch, run.output.display());
        }
        RewriterCmd::Run {
            meeting,
            labels,
            model,
            beam_width,
        } => {
            let meeting = read_meeting(&meeting)?;
            let labels = parse_labels(open(&labels)?, &meeting)?;
            let model = PointerGenerator::load(&model)?;
            let mut config = RewriterConfig::default();
            if let Some(b) = beam_width {
                config.beam_width = b;
            }
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for label in labels.iter().filter(|l| l.tag.is_decision()) {
                let item = rewrite(&meeting, label, &model, &config)?;
                writeln!(out, "{}", serde_json::to_string(&item)?)?;
            }
        }
        RewriterCmd::Eval { model, data, beam_width } => {
            let model = PointerGenerator::load(&model)?;
            let mut config = RewriterConfig::default();
            if let Some(b) = beam_width {
                config.beam_width = b;
            }
            let records = read_records(open(&data)?)?;
            let ex = examples(&records, model.vocab(), &config)?;
            let report = evaluate_examples(&model, &ex, &config)?;
            print_report(&report);
        }
    }
    Ok(())
}

fn print_report(report: &mdt_core::metrics::EvalReport) {
    let [r1, r2, bl, f1, f2] = report.display_row();
    println!("RG-1 {r1:.2}  RG-2 {r2:.2}  BL {bl:.2}  f1 {f1:.2}  f2 {f2:.2}");
}

#[derive(Deserialize)]
struct TextLine {
    id: Option<String>,
    text: String,
}

fn keyed(path: &Path) -> Result<Vec<(String, String)>> {
    let lines: Vec<TextLine> = read_jsonl(path)?;
    Ok(lines
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l.id.unwrap_or_else(|| i.to_string()), l.text))
        .collect())
}

fn metrics(cmd: MetricsCmd) -> Result<()> {
    match cmd {
        MetricsCmd::Score {
            pred,
            reference,
            orig,
            report,
        } => {
            let preds = keyed(&pred)?;
            let refs: HashMap<String, String> = keyed(&reference)?.into_iter().collect();
            let origs: HashMap<String, String> = keyed(&orig)?.into_iter().collect();
            let samples = preds
                .into_iter()
                .map(|(id, prediction)| {
                    let missing = |what: &str| Error::Validation(format!("no {what} for sample {id}"));
                    Ok(EvalSample {
                        reference: refs.get(&id).cloned().ok_or_else(|| missing("reference"))?,
                        original: origs.get(&id).cloned().ok_or_else(|| missing("original"))?,
                        prediction,
                        id,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let r = evaluate(&samples, &WhitespaceTokenizer)?;
            print_report(&r);
            if let Some(p) = report {
                write_file(&p, &serde_json::to_string_pretty(&r)?)?;
            }
        }
        MetricsCmd::Human { sheet } => {
            let sheet = ScoreSheet::from_csv(open(&sheet)?)?;
            let summaries = aggregate_scores(&sheet)?;
            println!("{}", serde_json::to_string_pretty(&summaries)?);
        }
    }
    Ok(())
}

fn corpus(cmd: CorpusCmd) -> Result<()> {
    match cmd {
        CorpusCmd::Split { corpus, ratios, seed } => {
            let meetings = read_corpus_dir(&corpus)?;
            let ids: Vec<String> = meetings.iter().map(|m| m.meeting.id.clone()).collect();
            let ratios = match ratios {
                Some(r) => r
                    .try_into()
                    .map_err(|r: Vec<f64>| Error::Config(format!("--ratios needs 3 values, got {}", r.len())))?,
                None => DEFAULT_SPLIT_RATIOS,
            };
            println!("{}", serde_json::to_string_pretty(&split_by_meeting(&ids, ratios, seed)?)?);
        }
        CorpusCmd::Kappa { meeting, a, b } => {
            let meeting = read_meeting(&meeting)?;
            let tags = |p: &Path| -> Result<Vec<_>> {
                Ok(parse_labels(open(p)?, &meeting)?.iter().map(|l: &DecisionLabel| l.tag).collect())
            };
            println!("{:.6}", cohen_kappa(&tags(&a)?, &tags(&b)?)?);
        }
    }
    Ok(())
}

fn toy(cmd: ToyCmd) -> Result<()> {
    match cmd {
        ToyCmd::Detector {
            out,
            meetings,
            utterances,
            seed,
        } => {
            let corpus = detector_corpus(&DetectorCorpusConfig {
                meetings,
                utterances_per_meeting: utterances,
                seed,
                ..DetectorCorpusConfig::default()
            });
            write_corpus_dir(&out, &corpus)?;
            eprintln!("wrote {} meetings to {}", corpus.len(), out.display());
        }
        ToyCmd::Ellipsis { out, count, seed } => {
            write_file(&out, &write_records(&ellipsis_corpus(count, seed))?)?;
        }
    }
    Ok(())
}

fn serve_cmd(args: ServeArgs) -> Result<()> {
    let detector: Arc<dyn TagPredictor> = match &args.detector {
        Some(dir) => {
            let model = DetectorModel::load(dir)?;
            let meta = model.meta().clone();
            Arc::new(DetectorPredictor {
                scorer: Box::new(model),
                config: DetectorConfig {
                    window_size: meta.window_size,
                    mode: meta.mode,
                    threshold: meta.threshold,
                    ..DetectorConfig::default()
                },
            })
        }
        None => Arc::new(KeywordTagger { keywords: args.keywords }),
    };
    let rewriter: Arc<dyn UtteranceRewriter> = match &args.rewriter {
        Some(dir) => Arc::new(ModelRewriter {
            model: Box::new(PointerGenerator::load(dir)?),
            config: RewriterConfig::default(),
        }),
        None => Arc::new(CopyRewriter::default()),
    };
    let store = Store::open(&args.db)?;
    let app = router(AppState::new(store, detector, rewriter, args.token), args.static_dir);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.addr).await?;
        tracing::info!(addr = %args.addr, "listening");
        serve(listener, app).await
    })?;
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detector(c) => detector(c),
        Command::Augment(a) => augment(a),
        Command::Rewriter(c) => rewriter(c),
        Command::Metrics(c) => metrics(c),
        Command::Corpus(c) => corpus(c),
        Command::Toy(c) => toy(c),
        Command::Serve(a) => serve_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
