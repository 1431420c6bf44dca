//! Command-line surface: `train`, `eval`, `predict`, `baseline`, `gradcheck`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use polyphone_core::corpus::{split_dataset, Sample, SplitRule};
use polyphone_core::eval::{accuracy, majority_baseline, predict_pinyin, ClassCounts};
use polyphone_core::features::{CharVocab, Featurizer, MaxMatchSegmenter, Segmenter, WordVecStore};
use polyphone_core::model::{Model, ModelParams, Variant};
use polyphone_core::train::fit;
use polyphone_core::Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::history::HistoryWriter;
use crate::{checkpoint, diagnostics, formats, report};

#[derive(Debug, Parser)]
#[command(name = "polyphone", version, about = "Polyphonic character pronunciation prediction for Mandarin text")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a corpus, train one variant and save the best checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on an annotated corpus.
    Eval(EvalArgs),
    /// Predict the pinyin of one character in a sentence.
    Predict(PredictArgs),
    /// Most-frequent-pinyin baseline.
    Baseline(BaselineArgs),
    /// Compare analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct WordArgs {
    /// Word vectors in word2vec text format (needed by cw and cwc).
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Segmentation dictionary, one word per line; defaults to the vector vocabulary.
    #[arg(long)]
    pub dict: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    #[arg(long)]
    pub variant: Variant,
    /// JSON file; omitted fields keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub words: WordArgs,
    /// Defaults to `<out>.history.jsonl`.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Also write the held-out split as JSONL.
    #[arg(long)]
    pub eval_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Training corpus; its majority pinyins fill the high-frequency columns.
    #[arg(long)]
    pub train_corpus: Option<PathBuf>,
    #[command(flatten)]
    pub words: WordArgs,
    /// Write the report as JSON here.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub text: String,
    /// Character index (not byte offset) of the target.
    #[arg(long)]
    pub index: usize,
    /// Choose only among the character's lexicon candidates.
    #[arg(long)]
    pub restrict: bool,
    #[command(flatten)]
    pub words: WordArgs,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Training corpus, or the full corpus when `--eval-corpus` is absent.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    #[arg(long)]
    pub eval_corpus: Option<PathBuf>,
    /// Split seed when the corpus is split here.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also run a sampled check at the standard layer widths.
    #[arg(long)]
    pub full: bool,
}

struct WordResources {
    store: WordVecStore,
    segmenter: MaxMatchSegmenter,
}

impl WordResources {
    fn load(args: &WordArgs, variant: Variant) -> Result<Option<Self>> {
        if !variant.uses_word() {
            return Ok(None);
        }
        let Some(path) = &args.vectors else {
            return Err(Error::Usage(format!("variant {variant} needs --vectors")));
        };
        let store = formats::load_word_vectors(path)?;
        let segmenter = match &args.dict {
            Some(dict) => MaxMatchSegmenter::new(formats::load_word_list(dict)?),
            None => MaxMatchSegmenter::from_store(&store),
        };
        Ok(Some(Self { store, segmenter }))
    }

    fn pair(this: &Option<Self>) -> Option<(&WordVecStore, &dyn Segmenter)> {
        this.as_ref().map(|w| (&w.store, &w.segmenter as &dyn Segmenter))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn train(args: &TrainArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let lexicon = formats::load_lexicon(&args.lexicon)?;
    if let Some(k) = cfg.expect_classes.filter(|&k| k != lexicon.num_classes()) {
        return Err(polyphone_core::Error::Config(format!("lexicon defines {} pinyin classes, config expects {k}", lexicon.num_classes())).into());
    }
    let samples = formats::load_corpus(&args.corpus, &lexicon)?;
    let words = WordResources::load(&args.words, args.variant)?;
    let (train, eval) = split_dataset(&samples, &cfg.split(), cfg.seed)?;
    log::info!("{} samples: {} train, {} eval", samples.len(), train.len(), eval.len());
    if let Some(path) = &args.eval_out {
        formats::write_corpus(path, &eval, &lexicon)?;
    }
    let vocab = CharVocab::build(&train);
    let featurizer = Featurizer { vocab: &vocab, words: WordResources::pair(&words) };
    let (train_enc, eval_enc) = (featurizer.encode_all(&train), featurizer.encode_all(&eval));
    let mut params = ModelParams::init(args.variant, cfg.model_dims(lexicon.num_classes()), vocab.len(), &mut Rng::new(cfg.seed))?;
    params.dropout = cfg.dropout();
    let model = Model::new(params, vocab, lexicon)?;
    let history_path = args.history.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".history.jsonl");
        p.into()
    });
    let mut history = HistoryWriter::create(&history_path)?;
    let mut write_err = None;
    let outcome = fit(model, &train_enc, &eval_enc, words.as_ref().map(|w| &w.store), &cfg.train(), |row| {
        log::info!("epoch {} lr {:.2e} loss {:.4} eval {:.2}%", row.epoch, row.lr, row.loss, row.eval_acc * 100.0);
        if let Err(e) = history.write(row) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    checkpoint::save(&outcome.best, &args.out)?;
    match outcome.best_epoch {
        Some(epoch) => {
            let acc = outcome.history[epoch].eval_acc;
            println!("saved {} (epoch {epoch}, eval accuracy {})", args.out.display(), report::percent(acc));
        }
        None => println!("saved untrained model to {}", args.out.display()),
    }
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let model = checkpoint::load(&args.checkpoint)?;
    let samples = formats::load_corpus(&args.corpus, &model.lexicon)?;
    let reference = match &args.train_corpus {
        Some(path) => Some(ClassCounts::from_samples(&formats::load_corpus(path, &model.lexicon)?)),
        None => None,
    };
    let words = WordResources::load(&args.words, model.variant())?;
    if args.batch_size == 0 {
        return Err(Error::Usage("--batch-size must be positive".into()));
    }
    let result = accuracy(&model, &samples, WordResources::pair(&words), reference.as_ref(), args.batch_size)?;
    print!("{}", report::eval_table(&result));
    if let Some(path) = &args.json {
        write_file(path, &report::to_json(&result))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictJson<'a> {
    char: String,
    chosen: &'a str,
    restricted: bool,
    candidates: &'a [(String, f64)],
}

fn predict(args: &PredictArgs) -> Result<()> {
    let model = checkpoint::load(&args.checkpoint)?;
    let words = WordResources::load(&args.words, model.variant())?;
    let result = predict_pinyin(&model, WordResources::pair(&words), &args.text, args.index, args.restrict)?;
    let json = PredictJson {
        char: result.character.to_string(),
        chosen: &result.chosen,
        restricted: result.restricted,
        candidates: &result.candidates,
    };
    println!("{}", serde_json::to_string(&json).expect("plain record"));
    Ok(())
}

fn baseline(args: &BaselineArgs) -> Result<()> {
    let lexicon = formats::load_lexicon(&args.lexicon)?;
    let corpus = formats::load_corpus(&args.corpus, &lexicon)?;
    let (train, eval): (Vec<Sample>, Vec<Sample>) = match &args.eval_corpus {
        Some(path) => (corpus, formats::load_corpus(path, &lexicon)?),
        None => split_dataset(&corpus, &SplitRule::default(), args.seed)?,
    };
    let result = majority_baseline(&train, &eval, &lexicon)?;
    print!("{}", report::baseline_table(&result));
    if let Some(path) = &args.json {
        let rows: Vec<_> = result
            .rows
            .iter()
            .map(|r| serde_json::json!({"char": r.character.to_string(), "predicted": r.predicted, "seen_in_train": r.seen_in_train, "rate": r.rate, "count": r.count}))
            .collect();
        let json = serde_json::json!({"overall": result.overall, "rows": rows});
        write_file(path, &serde_json::to_string_pretty(&json).expect("plain json"))?;
    }
    Ok(())
}

fn gradcheck(args: &GradcheckArgs) -> Result<()> {
    let checks = diagnostics::gradient_suite(args.seed, args.full)?;
    let mut worst: f64 = 0.0;
    for c in &checks {
        let err = c.report.max_rel_error();
        println!(
            "{:<4} hidden {:>3} fc1 {:>3}: {:>6} elements ({} skipped at ReLU kinks), max rel. error {err:.3e} (max abs. {:.1e})",
            c.variant.name(),
            c.dims.hidden,
            c.dims.fc1,
            c.checked(),
            c.skipped(),
            c.report.max_abs_error()
        );
        worst = worst.max(err);
    }
    println!("max rel. error {worst:.3e}");
    if worst >= diagnostics::TOLERANCE {
        return Err(polyphone_core::Error::Numeric(format!("gradient check failed: {worst:.3e} >= {:e}", diagnostics::TOLERANCE)).into());
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Baseline(a) => baseline(a),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

/// Parses `argv`, runs the command and maps the outcome to an exit code:
/// 0 on success, 2 on usage errors, 1 on data and format errors.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(Error::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
