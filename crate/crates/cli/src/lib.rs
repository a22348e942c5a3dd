//! The `pathnat` command-line tool: graph preparation, sampling, training,
//! evaluation series, and the local annotation service.

pub mod artifact;
pub mod serve;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pathnat_core::baselines::{flow_score, length_jitter, length_score, pair_score, st_score};
use pathnat_core::dataset::{
    build_questionnaire, default_qc_good_paths, read_judgments, read_pairs, sample_pairs, split_train_test,
    write_judgments, write_pairs, MultiResponseSet,
};
use pathnat_core::embed::EmbeddingTable;
use pathnat_core::eval::{
    agreement_upper_bound, avg_entropy, collect_ps_paths, expansion_series, hard_queries, opinion_splits,
    parse_analogies, AnalogySolver, Corpus, ExpansionContext, ExpansionStrategy, OpinionSplit,
};
use pathnat_core::features::{write_feature_cache, FeatureMask};
use pathnat_core::graph::{Graph, Path, RelationTable};
use pathnat_core::model::TrainingConfig;
use pathnat_core::pipeline::{judged_accuracy, train_on_judgments, NaturalnessModel, Resources};

use artifact::{config_hash, emit, read_paths, read_text, read_words, CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "pathnat", version, about = "Path naturalness over commonsense knowledge graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse an edge dump and write it back normalized and sorted.
    BuildGraph(BuildGraphArgs),
    /// Draw vocabularies, paths, pairs, splits or questionnaires.
    Sample {
        #[command(subcommand)]
        what: SampleCommand,
    },
    /// Write the feature cache for a list of paths.
    Featurize(FeaturizeArgs),
    /// Train a naturalness model on judged pairs.
    Train(TrainArgs),
    /// Pairwise accuracy of the model and the baselines on judged pairs.
    Eval(EvalArgs),
    /// Rank every path between two concepts.
    Rank(RankArgs),
    /// Average PS-relation entropy of the top-ranked paths.
    Entropy(EntropyArgs),
    /// Query expansion series over a retrieval corpus.
    Expand(ExpandArgs),
    /// Analogy accuracy as a function of the kept path fraction.
    Analogy(AnalogyArgs),
    /// Opinion-split histogram and majority-vote upper bound of multi-annotator judgments.
    Agreement(AgreementArgs),
    /// Serve questionnaires over HTTP and store accepted responses.
    ServeAnnotate(ServeArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GraphArgs {
    /// Edge dump: `start  end  relation  weight  source:weight[,...]`.
    #[arg(long)]
    pub edges: PathBuf,
    /// Relation table `name  directionality`; the ConceptNet table when omitted.
    #[arg(long)]
    pub relations: Option<PathBuf>,
}

impl GraphArgs {
    fn load(&self) -> CliResult<Graph> {
        let table = match &self.relations {
            Some(p) => RelationTable::load(p)?,
            None => RelationTable::conceptnet(),
        };
        Ok(Graph::load(&self.edges, table)?)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ResourceArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Word vectors in text format, most frequent first.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Sense inventory TSV.
    #[arg(long)]
    pub senses: Option<PathBuf>,
}

/// Loaded graph, with embeddings when a vector file was given.
enum World {
    Full(Resources),
    GraphOnly(Graph),
}

impl World {
    fn graph(&self) -> &Graph {
        match self {
            World::Full(r) => &r.graph,
            World::GraphOnly(g) => g,
        }
    }

    fn table(&self) -> Option<&EmbeddingTable> {
        match self {
            World::Full(r) => Some(&r.table),
            World::GraphOnly(_) => None,
        }
    }

    fn resources(&self) -> CliResult<&Resources> {
        match self {
            World::Full(r) => Ok(r),
            World::GraphOnly(_) => Err(CliError::usage("this command needs --vectors")),
        }
    }
}

impl ResourceArgs {
    fn load(&self) -> CliResult<World> {
        match &self.vectors {
            Some(v) => Ok(World::Full(Resources::load(
                &self.graph.edges,
                v,
                self.graph.relations.as_deref(),
                self.senses.as_deref(),
            )?)),
            None => Ok(World::GraphOnly(self.graph.load()?)),
        }
    }

    fn resources(&self) -> CliResult<Resources> {
        match self.load()? {
            World::Full(r) => Ok(r),
            World::GraphOnly(_) => Err(CliError::usage("this command needs --vectors")),
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct BuildGraphArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum SampleCommand {
    /// Random-walk vocabulary around a center word.
    Vocab(SampleVocabArgs),
    /// Distinct simple paths inside a vocabulary.
    Paths(SamplePathsArgs),
    /// Unordered pairs of distinct paths.
    Pairs(SamplePairsArgs),
    /// Path-disjoint train/test split of judged pairs.
    Split(SampleSplitArgs),
    /// A 73-item questionnaire as delivered to an annotator.
    Questionnaire(SampleQuestionnaireArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SampleVocabArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Allowed words, one per line; every concept when omitted.
    #[arg(long)]
    pub allowed: Option<PathBuf>,
    #[arg(long)]
    pub center: String,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SamplePathsArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Restrict paths to these words, one per line.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub max_nodes: usize,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SamplePairsArgs {
    /// Paths in arrow notation, one per line.
    #[arg(long)]
    pub paths: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Prefix of the generated pair ids.
    #[arg(long, default_value = "p")]
    pub prefix: String,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SampleSplitArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub judgments: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Receives train_pairs.jsonl, train_judgments.jsonl, test_pairs.jsonl and test_judgments.jsonl.
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SampleQuestionnaireArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Pool of genuine pairs.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Natural paths for quality-control items; the shipped list when omitted.
    #[arg(long)]
    pub qc_good: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[arg(long)]
    pub paths: PathBuf,
    /// PCA width of the vertex embedding; raw vectors when omitted.
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    /// Feature ablation such as `all`, `no-degree` or `edge-only`.
    #[arg(long, default_value = "all")]
    pub ablation: String,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrainFlags {
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Item code length `l_f`.
    #[arg(long, default_value_t = 64)]
    pub feature_len: usize,
    /// LSTM state size `h`.
    #[arg(long, default_value_t = 10)]
    pub code_len: usize,
    /// PCA width of the vertex embedding; raw vectors when omitted.
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long, default_value = "all")]
    pub ablation: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Compute per-example gradients on all cores. Results are unchanged.
    #[arg(long)]
    #[serde(skip)]
    pub parallel: bool,
}

impl TrainFlags {
    fn config(&self) -> CliResult<TrainingConfig> {
        let config = TrainingConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            feature_len: self.feature_len,
            code_len: self.code_len,
            embedding_dim: self.embedding_dim,
            mask: FeatureMask::ablation(&self.ablation)?,
            parallel: self.parallel,
            ..Default::default()
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub judgments: PathBuf,
    #[arg(long, requires = "heldout_judgments")]
    pub heldout_pairs: Option<PathBuf>,
    #[arg(long, requires = "heldout_pairs")]
    pub heldout_judgments: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Checkpoint file.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Per-epoch loss and held-out accuracy.
    #[arg(long)]
    #[serde(skip)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub judgments: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Seed of the length baseline's tie-break.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Model,
    St,
    Pair,
    Flow,
    Length,
    Random,
}

#[derive(Args, Debug, Serialize)]
pub struct RankArgs {
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[arg(long)]
    pub source: String,
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value_t = 4)]
    pub max_nodes: usize,
    #[arg(long, value_enum)]
    pub strategy: Strategy,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct EntropyArgs {
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Nodes per sampled path.
    #[arg(long, default_value_t = 4)]
    pub path_nodes: usize,
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    #[arg(long, value_enum)]
    pub strategy: Strategy,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "10,20,30,40,50,60,70,80,90,100", value_delimiter = ',')]
    pub percents: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ExpandArgs {
    /// Directory with docs/, queries.tsv and qrels.tsv.
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[arg(long, value_parser = parse_expansion)]
    pub strategy: ExpansionStrategy,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "0,1,2,3,4,5", value_delimiter = ',')]
    pub budgets: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub max_nodes: usize,
    /// Only queries with zero unexpanded P@10.
    #[arg(long)]
    pub hard_only: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn parse_expansion(s: &str) -> Result<ExpansionStrategy, String> {
    s.parse().map_err(|e: pathnat_core::Error| e.to_string())
}

#[derive(Args, Debug, Serialize)]
pub struct AnalogyArgs {
    #[command(flatten)]
    pub resources: ResourceArgs,
    /// One question per line: `a:b::A:B|C:D|E:F|G:H  answer`.
    #[arg(long)]
    pub questions: PathBuf,
    #[arg(long, value_enum)]
    pub strategy: Strategy,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "10,20,30,40,50,60,70,80,90,100", value_delimiter = ',')]
    pub percents: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct AgreementArgs {
    /// Judgments with several annotators per pair.
    #[arg(long)]
    pub judgments: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ServeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Pool of genuine pairs.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub qc_good: Option<PathBuf>,
    /// Accepted judgments are appended here; kept in memory when omitted.
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long, env = "PATHNAT_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: String,
}

/// Parses `args` and runs the command, printing a JSON error record on failure.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::usage(message).record());
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::FAILURE
        }
    }
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::BuildGraph(a) => build_graph(a),
        Command::Sample { what } => match what {
            SampleCommand::Vocab(a) => sample_vocab(a),
            SampleCommand::Paths(a) => sample_paths(a),
            SampleCommand::Pairs(a) => sample_pairs_cmd(a),
            SampleCommand::Split(a) => sample_split(a),
            SampleCommand::Questionnaire(a) => sample_questionnaire(a),
        },
        Command::Featurize(a) => featurize(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Rank(a) => rank(a),
        Command::Entropy(a) => entropy(a),
        Command::Expand(a) => expand(a),
        Command::Analogy(a) => analogy(a),
        Command::Agreement(a) => agreement(a),
        Command::ServeAnnotate(a) => serve::serve(a),
    }
}

// ====================================================================== graph

fn build_graph(a: BuildGraphArgs) -> CliResult<()> {
    let graph = a.graph.load()?;
    let hash = config_hash("build-graph", &a);
    emit(a.out.as_ref(), &hash, &graph.to_tsv())?;
    if a.out.is_some() {
        println!(
            "{}",
            serde_json::json!({ "concepts": graph.concept_count(), "edges": graph.edge_count() })
        );
    }
    Ok(())
}

// =================================================================== sampling

fn sample_vocab(a: SampleVocabArgs) -> CliResult<()> {
    let graph = a.graph.load()?;
    let allowed = match &a.allowed {
        Some(p) => read_words(p)?,
        None => graph.concepts().map(String::from).collect(),
    };
    let words = graph.sample_vocabulary(&a.center, &allowed, a.count, a.seed)?;
    let body: String = words.iter().map(|w| format!("{w}\n")).collect();
    emit(a.out.as_ref(), &config_hash("sample vocab", &a), &body)
}

fn sample_paths(a: SamplePathsArgs) -> CliResult<()> {
    let graph = a.graph.load()?;
    let vocab = a.vocab.as_deref().map(read_words).transpose()?;
    let paths = graph.sample_paths(vocab.as_ref(), a.max_nodes, a.count, a.seed)?;
    let body: String = paths.iter().map(|p| format!("{p}\n")).collect();
    emit(a.out.as_ref(), &config_hash("sample paths", &a), &body)
}

fn sample_pairs_cmd(a: SamplePairsArgs) -> CliResult<()> {
    let paths = read_paths(&a.paths)?;
    let pairs = sample_pairs(&paths, a.count, a.seed, &a.prefix)?;
    emit(a.out.as_ref(), &config_hash("sample pairs", &a), &write_pairs(&pairs))
}

fn sample_split(a: SampleSplitArgs) -> CliResult<()> {
    let pairs = read_pairs(&read_text(&a.pairs)?)?;
    let judgments = read_judgments(&read_text(&a.judgments)?, Some(&pairs))?;
    let (train, test) = split_train_test(&pairs, &judgments, a.train_fraction, a.seed)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let hash = config_hash("sample split", &a);
    for (side, name) in [(&train, "train"), (&test, "test")] {
        emit(Some(&a.out_dir.join(format!("{name}_pairs.jsonl"))), &hash, &write_pairs(&side.pairs))?;
        emit(
            Some(&a.out_dir.join(format!("{name}_judgments.jsonl"))),
            &hash,
            &write_judgments(&side.judgments),
        )?;
    }
    println!(
        "{}",
        serde_json::json!({
            "train_pairs": train.pairs.len(), "train_judgments": train.judgments.len(),
            "test_pairs": test.pairs.len(), "test_judgments": test.judgments.len(),
        })
    );
    Ok(())
}

fn qc_good_paths(file: Option<&PathBuf>) -> CliResult<Vec<Path>> {
    match file {
        Some(p) => read_paths(p),
        None => Ok(default_qc_good_paths()),
    }
}

fn sample_questionnaire(a: SampleQuestionnaireArgs) -> CliResult<()> {
    let graph = a.graph.load()?;
    let pairs = read_pairs(&read_text(&a.pairs)?)?;
    let q = build_questionnaire(&pairs, &qc_good_paths(a.qc_good.as_ref())?, &graph, a.seed)?;
    let mut body = String::new();
    for item in q.delivered() {
        body.push_str(&serde_json::to_string(&item).expect("item serializes"));
        body.push('\n');
    }
    emit(a.out.as_ref(), &config_hash("sample questionnaire", &a), &body)
}

// ================================================================ model work

fn featurize(a: FeaturizeArgs) -> CliResult<()> {
    let resources = a.resources.resources()?;
    let paths = read_paths(&a.paths)?;
    let encoding = resources.vertex_encoding(a.embedding_dim)?;
    let featurizer = resources.featurizer(encoding, FeatureMask::ablation(&a.ablation)?);
    let features = resources.featurize_all(&featurizer, &paths)?;
    emit(
        a.out.as_ref(),
        &config_hash("featurize", &a),
        &write_feature_cache(&featurizer.dims(), &features),
    )
}

fn train(a: TrainArgs) -> CliResult<()> {
    let config = a.train.config()?;
    let resources = a.resources.resources()?;
    let pairs = read_pairs(&read_text(&a.pairs)?)?;
    let judgments = read_judgments(&read_text(&a.judgments)?, Some(&pairs))?;
    let heldout = match (&a.heldout_pairs, &a.heldout_judgments) {
        (Some(p), Some(j)) => {
            let hp = read_pairs(&read_text(p)?)?;
            let hj = read_judgments(&read_text(j)?, Some(&hp))?;
            Some((hp, hj))
        }
        _ => None,
    };
    let (model, log) = train_on_judgments(
        &resources,
        &pairs,
        &judgments,
        heldout.as_ref().map(|(p, j)| (p.as_slice(), j.as_slice())),
        &config,
    )?;
    let hash = config_hash("train", &a);
    let mut ck = model.to_checkpoint();
    ck.meta["tool"] = serde_json::json!({ "name": "pathnat", "version": artifact::VERSION, "config": hash });
    ck.save(&a.out)?;
    if let Some(path) = &a.log {
        emit(Some(path), &hash, &log.to_tsv())?;
    }
    let last = log.epochs.last().expect("at least one epoch");
    println!(
        "{}",
        serde_json::json!({ "checkpoint": a.out, "epochs": log.epochs.len(), "final_loss": last.loss, "heldout_accuracy": last.heldout_accuracy })
    );
    Ok(())
}

type Scorer<'a> = Box<dyn Fn(&Path) -> pathnat_core::Result<f64> + 'a>;

fn load_model(checkpoint: Option<&PathBuf>) -> CliResult<NaturalnessModel> {
    let path = checkpoint.ok_or_else(|| CliError::usage("the model strategy needs --checkpoint"))?;
    Ok(NaturalnessModel::load(path)?)
}

fn scorer<'a>(world: &'a World, strategy: Strategy, checkpoint: Option<&PathBuf>, seed: u64) -> CliResult<Scorer<'a>> {
    let table = || world.table().ok_or_else(|| CliError::usage(format!("strategy {strategy:?} needs --vectors")));
    Ok(match strategy {
        Strategy::Model => {
            let s = load_model(checkpoint)?.scorer(world.resources()?)?;
            Box::new(move |p| s.score(p))
        }
        Strategy::St => {
            let t = table()?;
            Box::new(move |p| Ok(st_score(p, t)))
        }
        Strategy::Pair => {
            let t = table()?;
            Box::new(move |p| Ok(pair_score(p, t)))
        }
        Strategy::Flow => {
            let g = world.graph();
            Box::new(move |p| flow_score(p, g))
        }
        Strategy::Length => Box::new(move |p| Ok(length_score(p, seed))),
        Strategy::Random => Box::new(move |p| Ok(length_jitter(p, seed))),
    })
}

fn eval(a: EvalArgs) -> CliResult<()> {
    let world = a.resources.load()?;
    let pairs = read_pairs(&read_text(&a.pairs)?)?;
    let judgments = read_judgments(&read_text(&a.judgments)?, Some(&pairs))?;
    let mut methods = Vec::new();
    if a.checkpoint.is_some() {
        methods.push(("model", Strategy::Model));
    }
    if world.table().is_some() {
        methods.extend([("st", Strategy::St), ("pair", Strategy::Pair)]);
    }
    methods.extend([("flow", Strategy::Flow), ("length", Strategy::Length)]);
    let mut body = String::from("method\taccuracy\n");
    for (name, strategy) in methods {
        let score = scorer(&world, strategy, a.checkpoint.as_ref(), a.seed)?;
        let acc = judged_accuracy(&pairs, &judgments, score)?;
        let _ = writeln!(body, "{name}\t{acc:.4}");
    }
    emit(a.out.as_ref(), &config_hash("eval", &a), &body)
}

fn rank(a: RankArgs) -> CliResult<()> {
    let world = a.resources.load()?;
    let score = scorer(&world, a.strategy, a.checkpoint.as_ref(), a.seed)?;
    let paths = world.graph().enumerate_paths(&a.source, &a.target, a.max_nodes)?;
    let mut scored: Vec<(f64, Path)> = paths.into_iter().map(|p| Ok((score(&p)?, p))).collect::<pathnat_core::Result<_>>()?;
    // stable sort keeps enumeration order among equal scores
    scored.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut body = String::from("score\tpath\n");
    for (s, p) in &scored {
        let _ = writeln!(body, "{s}\t{p}");
    }
    emit(a.out.as_ref(), &config_hash("rank", &a), &body)
}

fn entropy(a: EntropyArgs) -> CliResult<()> {
    let world = a.resources.load()?;
    let vocab = a.vocab.as_deref().map(read_words).transpose()?;
    let records = collect_ps_paths(world.graph(), vocab.as_ref(), a.path_nodes, a.count, a.seed)?;
    let score = scorer(&world, a.strategy, a.checkpoint.as_ref(), a.seed)?;
    let scores: Vec<f64> = records.iter().map(|r| score(&r.path)).collect::<pathnat_core::Result<_>>()?;
    let mut body = String::from("top_percent\tentropy\n");
    for &pct in &a.percents {
        let _ = writeln!(body, "{pct}\t{:.6}", avg_entropy(&records, &scores, pct)?);
    }
    emit(a.out.as_ref(), &config_hash("entropy", &a), &body)
}

fn expand(a: ExpandArgs) -> CliResult<()> {
    let corpus = Corpus::load(&a.corpus)?;
    let index = corpus.index()?;
    let world = a.resources.load()?;
    let natural = if a.strategy.needs_model() {
        Some(scorer(&world, Strategy::Model, a.checkpoint.as_ref(), a.seed)?)
    } else {
        None
    };
    let ctx = ExpansionContext {
        graph: world.graph(),
        table: world.table(),
        naturalness: natural.as_deref().map(|f| f as &dyn Fn(&Path) -> pathnat_core::Result<f64>),
        seed: a.seed,
        max_nodes: a.max_nodes,
    };
    let queries = if a.hard_only { hard_queries(&index, &corpus) } else { corpus.queries.clone() };
    let series = expansion_series(&index, &corpus, &queries, a.strategy, &a.budgets, &ctx)?;
    let mut body = String::from("words_added\tp_at_10\tmap\n");
    for pt in series {
        let _ = writeln!(body, "{}\t{:.4}\t{:.4}", pt.words_added, pt.p_at_10, pt.map);
    }
    emit(a.out.as_ref(), &config_hash("expand", &a), &body)
}

fn analogy(a: AnalogyArgs) -> CliResult<()> {
    let world = a.resources.load()?;
    let questions = parse_analogies(&read_text(&a.questions)?)?;
    let score = scorer(&world, a.strategy, a.checkpoint.as_ref(), a.seed)?;
    let solver = AnalogySolver { graph: world.graph(), score: &*score };
    let mut body = String::from("top_percent\taccuracy\tanswered\n");
    for &pct in &a.percents {
        let (acc, answered) = solver.accuracy(&questions, pct)?;
        let _ = writeln!(body, "{pct}\t{acc:.4}\t{answered}");
    }
    emit(a.out.as_ref(), &config_hash("analogy", &a), &body)
}

fn agreement(a: AgreementArgs) -> CliResult<()> {
    let judgments = read_judgments(&read_text(&a.judgments)?, None)?;
    let set = MultiResponseSet::from_judgments(judgments)?;
    let mut histogram: BTreeMap<OpinionSplit, usize> = BTreeMap::new();
    for (_, split) in opinion_splits(&set) {
        *histogram.entry(split).or_default() += 1;
    }
    let mut body = String::from("split\tquestions\n");
    for (s, n) in histogram.iter().rev() {
        let _ = writeln!(body, "{s}\t{n}");
    }
    let _ = writeln!(body, "upper_bound\t{:.4}", agreement_upper_bound(&set)?);
    emit(a.out.as_ref(), &config_hash("agreement", &a), &body)
}
