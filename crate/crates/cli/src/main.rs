use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lrnn::io::{
    append_embeddings, cross_validate, generate_planted, parse_body, read_examples, read_template, serialize_template,
    template_stats, write_examples, write_history_csv, EmbeddingMatrix, GeneratorConfig, ParseOptions,
};
use lrnn::network::build_network;
use lrnn::structure::{initial_state, structure_learn_with, LearnConfig, SearchConfig};
use lrnn::train::{evaluate, train_weights, LossKind, Metrics, TrainConfig};
use lrnn::{Dataset, Execution, RuleWeightPlacement, Template, WeightStore};

/// Lifted relational neural networks with stacked structure learning.
#[derive(Parser, Debug)]
#[command(name = "lrnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn a template from examples.
    Learn(LearnArgs),
    /// Train the weights of a fixed template.
    Train(TrainArgs),
    /// Report loss and accuracy of a template on examples.
    Eval(EvalArgs),
    /// Cross-validate structure learning.
    Xval(XvalArgs),
    /// Write a planted-pattern molecule dataset.
    GenSynthetic(GenArgs),
    /// Print rule count, learned patterns, average pattern length and depth.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Example file.
    #[arg(long, short = 'e')]
    examples: PathBuf,
    /// Reject attribute-value atoms such as color(o, red).
    #[arg(long)]
    strict_unary: bool,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let data = read_examples(&self.examples, ParseOptions { strict_unary: self.strict_unary })
            .with_context(|| format!("reading {}", self.examples.display()))?;
        log::info!("{} examples from {}", data.len(), self.examples.display());
        Ok(data)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Loss {
    Squared,
    Logistic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Placement {
    Aggregation,
    Conjunction,
}

impl From<Placement> for RuleWeightPlacement {
    fn from(p: Placement) -> Self {
        match p {
            Placement::Aggregation => RuleWeightPlacement::Aggregation,
            Placement::Conjunction => RuleWeightPlacement::Conjunction,
        }
    }
}

#[derive(Args, Debug)]
struct TrainOpts {
    #[arg(long, default_value_t = 0.3)]
    lr: f64,
    #[arg(long, default_value_t = 400)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    minibatch: usize,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads: 1 runs sequentially, 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, value_enum, default_value_t = Placement::Aggregation)]
    placement: Placement,
}

impl TrainOpts {
    fn config(&self, loss: LossKind) -> Result<TrainConfig> {
        let execution = set_threads(self.threads)?;
        let mut cfg = TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            minibatch_size: self.minibatch,
            restarts: self.restarts,
            seed: self.seed,
            loss,
            execution,
            ..Default::default()
        };
        cfg.network.placement = self.placement.into();
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct SearchOpts {
    /// Latent predicates per layer.
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 5)]
    beam: usize,
    #[arg(long, default_value_t = 4)]
    max_rule_len: usize,
    #[arg(long, default_value_t = 4)]
    max_vars: usize,
    #[arg(long, default_value_t = 8)]
    max_iters: usize,
    /// Arity of invented predicates.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1e-3)]
    min_improvement: f64,
    /// Score candidates on the full networks instead of cached latent values.
    #[arg(long)]
    no_cache: bool,
}

impl SearchOpts {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            d: self.d,
            max_rule_length: self.max_rule_len,
            max_variables: self.max_vars,
            beam_width: self.beam,
            max_iterations: self.max_iters,
            latent_arity: self.k,
            min_score_improvement: self.min_improvement,
            use_cache: !self.no_cache,
        }
    }
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    search: SearchOpts,
    #[command(flatten)]
    train: TrainOpts,
    /// Learned template; stdout when omitted.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    /// Per-iteration CSV report.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Append layer-1 embedding snapshots (initial and after every iteration).
    #[arg(long)]
    emit_embeddings: Option<PathBuf>,
    /// Ground network of the first example under the learned template, in DOT.
    #[arg(long)]
    emit_dot: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, short = 't')]
    template: PathBuf,
    #[command(flatten)]
    train: TrainOpts,
    #[arg(long, value_enum, default_value_t = Loss::Squared)]
    loss: Loss,
    /// Trained template; stdout when omitted.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, short = 't')]
    template: PathBuf,
    #[arg(long, value_enum, default_value_t = Placement::Aggregation)]
    placement: Placement,
}

#[derive(Args, Debug)]
struct XvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[command(flatten)]
    search: SearchOpts,
    #[command(flatten)]
    train: TrainOpts,
    /// Per-fold CSV report; stdout when omitted.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, short = 'o')]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    molecules: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Conjunctive pattern over the element predicates and bond/2.
    #[arg(long, default_value = "bond(X,Y), c(X), o(Y)")]
    pattern: String,
    #[arg(long, default_value_t = 5)]
    min_atoms: usize,
    #[arg(long, default_value_t = 12)]
    max_atoms: usize,
    /// Permute labels after generation.
    #[arg(long)]
    shuffle_labels: bool,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long, short = 't')]
    template: PathBuf,
}

/// Invalid option values; reported with exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(e: lrnn::Error) -> anyhow::Error {
    Usage(e.to_string()).into()
}

fn learn_config(search: &SearchOpts, train: &TrainOpts) -> Result<LearnConfig> {
    let cfg = LearnConfig { search: search.config(), train: train.config(LossKind::Squared)? };
    cfg.search.validate().map_err(usage)?;
    cfg.train.validate().map_err(usage)?;
    Ok(cfg)
}

fn set_threads(threads: usize) -> Result<Execution> {
    match threads {
        1 => Ok(Execution::Sequential),
        0 => Ok(Execution::Parallel),
        n => {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(Execution::Parallel)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn print_metrics(m: &Metrics) {
    println!("queries,accuracy,squared_loss,log_loss");
    println!("{},{},{},{}", m.queries, m.accuracy, m.squared_loss, m.log_loss);
}

fn learn(args: LearnArgs) -> Result<()> {
    let cfg = learn_config(&args.search, &args.train)?;
    let data = args.data.load()?;
    if let Some(p) = &args.emit_embeddings {
        if p.exists() {
            std::fs::remove_file(p).with_context(|| format!("replacing {}", p.display()))?;
        }
        let (t, w) = initial_state(&data, &cfg)?;
        append_embeddings(p, &EmbeddingMatrix::from_template(&t, &w, 0))?;
    }
    let mut failure = None;
    let mut observe = |t: &Template, w: &WeightStore, r: &lrnn::structure::IterationRecord| {
        if let (Some(p), None) = (&args.emit_embeddings, &failure) {
            if let Err(e) = append_embeddings(p, &EmbeddingMatrix::from_template(t, w, r.iteration)) {
                failure = Some(e);
            }
        }
    };
    let outcome = structure_learn_with(&data, &cfg, &mut observe)?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    log::info!("stopped: {:?} after {} rules", outcome.stop, outcome.history.len());
    emit(args.out.as_deref(), &serialize_template(&outcome.template, &outcome.weights))?;
    if let Some(p) = &args.history {
        write_history_csv(create(p)?, &outcome.history)?;
    }
    if let Some(p) = &args.emit_dot {
        let atoms: Vec<_> = data.queries[0].iter().map(|q| q.atom.clone()).collect();
        let net = build_network(&outcome.template, &data.examples[0], &atoms)?;
        emit(Some(p), &net.to_dot())?;
    }
    let m = evaluate(&outcome.template, &outcome.weights, &data, cfg.train.network, cfg.train.execution)?;
    eprintln!("{} rules, training accuracy {:.4}, log-loss {:.6}", outcome.template.len(), m.accuracy, m.log_loss);
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let data = args.data.load()?;
    let (template, weights) =
        read_template(&args.template).with_context(|| format!("reading {}", args.template.display()))?;
    let loss = match args.loss {
        Loss::Squared => LossKind::Squared,
        Loss::Logistic => LossKind::Logistic,
    };
    let cfg = args.train.config(loss)?;
    let out = train_weights(&template, &data, &weights, &cfg, &[])?;
    log::info!("loss {:.6} -> {:.6}", out.initial_loss, out.final_loss);
    emit(args.out.as_deref(), &serialize_template(&template, &out.weights))
}

fn eval(args: EvalArgs) -> Result<()> {
    let data = args.data.load()?;
    let (template, weights) =
        read_template(&args.template).with_context(|| format!("reading {}", args.template.display()))?;
    let params = lrnn::NetworkParams { placement: args.placement.into(), ..Default::default() };
    let m = evaluate(&template, &weights, &data, params, Execution::default())?;
    print_metrics(&m);
    Ok(())
}

fn xval(args: XvalArgs) -> Result<()> {
    if args.folds < 2 {
        return Err(Usage("--folds must be at least 2".into()).into());
    }
    let cfg = learn_config(&args.search, &args.train)?;
    let data = args.data.load()?;
    let cv = cross_validate(&data, args.folds, &cfg)?;
    match &args.out {
        Some(p) => cv.write_csv(create(p)?)?,
        None => cv.write_csv(std::io::stdout().lock())?,
    }
    eprintln!("mean test accuracy {:.4}, mean train accuracy {:.4}", cv.mean_test_accuracy(), cv.mean_train_accuracy());
    Ok(())
}

fn gen_synthetic(args: GenArgs) -> Result<()> {
    let pattern = parse_body(&args.pattern).map_err(|e| Usage(format!("--pattern: {e}")))?;
    let cfg = GeneratorConfig {
        min_atoms: args.min_atoms,
        max_atoms: args.max_atoms,
        shuffle_labels: args.shuffle_labels,
        ..GeneratorConfig::new(args.seed, args.molecules, pattern)
    };
    let data = generate_planted(&cfg).map_err(|e| match e {
        lrnn::Error::Config(_) => usage(e),
        e => e.into(),
    })?;
    emit(Some(&args.out), &write_examples(&data))
}

fn stats(args: StatsArgs) -> Result<()> {
    let (template, _) =
        read_template(&args.template).with_context(|| format!("reading {}", args.template.display()))?;
    print!("{}", template_stats(&template));
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Learn(a) => learn(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Xval(a) => xval(a),
        Command::GenSynthetic(a) => gen_synthetic(a),
        Command::Stats(a) => stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
