use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kbfeat::eval::{run_experiment, ExperimentConfig, GenerationScope, Method, Task};
use kbfeat::recursive::CandidateOutcome;
use kbfeat::synth::{gen_disorder_scenario, gen_random_tasks, ScenarioSpec, TestVariant};
use kbfeat::{
    deep_generate, expand_features, generate_features, AggregatorFamily, Column, Dataset,
    DeepConfig, Example, Feature, FeatureSet, GenerationConfig, KnowledgeBase, LearnerKind,
};

#[derive(Parser)]
#[command(name = "kbfeat", version, about = "Knowledge-based feature generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add one feature per applicable relation of each input feature.
    Expand(ExpandArgs),
    /// Generate classifier features through recursive learning problems.
    Generate(GenerateArgs),
    /// Run recursive generation at every node of a split tree.
    Deep(DeepArgs),
    /// Evaluate generated features on new data.
    Apply(ApplyArgs),
    /// Cross-validated comparison of feature generation methods.
    Eval(EvalArgs),
    /// Write synthetic tasks with known concepts.
    Synth(SynthArgs),
}

#[derive(Args)]
struct Input {
    /// Dataset in JSON lines.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    kb: KbArgs,
    /// Columns to start from (default: all).
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
}

#[derive(Args)]
struct KbArgs {
    /// Relation schema (name, departure type, codomain type, fn|rel).
    #[arg(long)]
    schema: PathBuf,
    /// Triples (relation, subject, object).
    #[arg(long)]
    triples: PathBuf,
}

#[derive(Args)]
struct RelationArgs {
    #[arg(long, default_value = "majority")]
    aggregator: AggregatorFamily,
    /// Fraction of values a relation must cover to apply.
    #[arg(long, default_value_t = 1.0)]
    coverage: f64,
}

#[derive(Args)]
struct GenerationArgs {
    #[command(flatten)]
    relations: RelationArgs,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Minimum number of objects in a recursive problem.
    #[arg(long, default_value_t = 8)]
    min_size: usize,
    /// Learner for the recursive problems.
    #[arg(long, default_value = "tree")]
    learner: LearnerKind,
}

impl GenerationArgs {
    fn config(&self) -> GenerationConfig {
        GenerationConfig {
            depth: self.depth,
            min_recursive_size: self.min_size,
            coverage: self.relations.coverage,
            aggregator: self.relations.aggregator,
            learner: self.learner,
            ..GenerationConfig::default()
        }
    }
}

#[derive(Args)]
struct ExpandArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    relations: RelationArgs,
    /// Where to write the feature definitions (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    generation: GenerationArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DeepArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    generation: GenerationArgs,
    #[arg(long, default_value_t = 10)]
    min_node_size: usize,
    #[arg(long, default_value_t = 10)]
    max_tree_depth: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the per-depth report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ApplyArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    kb: KbArgs,
    /// Feature definitions written by expand, generate or deep.
    #[arg(long)]
    features: PathBuf,
    /// Output dataset with one extra column per feature (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Datasets in JSON lines; repeat for several.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    #[command(flatten)]
    kb: KbArgs,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "baseline,expander,feagure_d1,feagure_d2"
    )]
    methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "knn,linear,tree")]
    learners: Vec<LearnerKind>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generate per fold from its training part, or once per dataset.
    #[arg(long, default_value = "fold")]
    generation_scope: GenerationScope,
    #[command(flatten)]
    relations: RelationArgs,
    #[arg(long, default_value_t = 8)]
    min_size: usize,
    #[arg(long, default_value_t = 10)]
    min_node_size: usize,
    /// Where to write the JSON result document.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum Scenario {
    Disorder,
    Random,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    scenario: Scenario,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Number of tasks for the random scenario.
    #[arg(long, default_value_t = 10)]
    n_tasks: usize,
    /// Test surnames from countries absent in training.
    #[arg(long)]
    unseen_countries: bool,
    /// Label noise rate for the disorder scenario.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_kb(args: &KbArgs) -> Result<KnowledgeBase> {
    Ok(KnowledgeBase::load(
        &read(&args.schema)?,
        &read(&args.triples)?,
    )?)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_jsonl(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_input(input: &Input) -> Result<(Dataset, KnowledgeBase, Vec<Feature>)> {
    let ds = load_dataset(&input.data)?;
    let kb = load_kb(&input.kb)?;
    let features = if input.columns.is_empty() {
        ds.columns()
            .iter()
            .map(|c| Feature::base(c.name.clone()))
            .collect()
    } else {
        for c in &input.columns {
            if ds.column(c).is_none() {
                bail!("dataset has no column `{c}`");
            }
        }
        input.columns.iter().map(Feature::base).collect()
    };
    Ok((ds, kb, features))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Summary lines go to stdout when the main document goes to a file, and to
/// stderr otherwise.
fn say(to_file: bool, line: &str) {
    if to_file {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn feature_document(features: Vec<Feature>) -> String {
    FeatureSet { features }.to_json() + "\n"
}

fn expand(args: ExpandArgs) -> Result<()> {
    let (ds, kb, features) = load_input(&args.input)?;
    let new = expand_features(
        &ds,
        &features,
        &kb,
        args.relations.aggregator,
        args.relations.coverage,
    );
    let to_file = args.out.is_some();
    say(to_file, &format!("{} features added", new.len()));
    for f in &new {
        say(to_file, &format!("  {}", f.name()));
    }
    write_or_print(args.out.as_deref(), &feature_document(new))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let (ds, kb, features) = load_input(&args.input)?;
    let cfg = args.generation.config();
    let out = generate_features(&ds, &features, &kb, &cfg, cfg.depth);
    let to_file = args.out.is_some();
    let filtered = out.filtered().count();
    say(
        to_file,
        &format!(
            "tried {}, generated {}, filtered {}",
            out.candidates.len(),
            out.features.len(),
            filtered
        ),
    );
    for c in &out.candidates {
        let part = c
            .partition
            .as_deref()
            .map(|p| format!(" [{p}]"))
            .unwrap_or_default();
        let what = match &c.outcome {
            CandidateOutcome::Generated { feature } => format!("generated {feature}"),
            CandidateOutcome::Filtered(reason) => format!("filtered: {reason}"),
        };
        say(
            to_file,
            &format!("  {}{part} ({} objects): {what}", c.source, c.objects),
        );
    }
    write_or_print(args.out.as_deref(), &feature_document(out.features))
}

fn deep(args: DeepArgs) -> Result<()> {
    let (ds, kb, features) = load_input(&args.input)?;
    let cfg = DeepConfig {
        min_node_size: args.min_node_size,
        max_tree_depth: args.max_tree_depth,
        generation: args.generation.config(),
    };
    let out = deep_generate(&ds, &features, &kb, &cfg);
    let to_file = args.out.is_some();
    say(
        to_file,
        &format!("{} features generated", out.features.len()),
    );
    say(to_file, out.report.to_table().trim_end());
    if let Some(p) = &args.report {
        fs::write(p, serde_json::to_string_pretty(&out.report)? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    write_or_print(args.out.as_deref(), &feature_document(out.features))
}

fn apply(args: ApplyArgs) -> Result<()> {
    let ds = load_dataset(&args.data)?;
    let kb = load_kb(&args.kb)?;
    let set =
        FeatureSet::from_json(&read(&args.features)?).context("parsing feature definitions")?;
    let mut columns: Vec<Column> = ds.columns().to_vec();
    for f in &set.features {
        if ds.column(f.name()).is_some() {
            bail!("feature `{}` clashes with an existing column", f.name());
        }
        columns.push(Column::new(f.name()));
    }
    let examples: Vec<Example> = ds
        .examples()
        .iter()
        .map(|ex| {
            set.features
                .iter()
                .fold(ex.clone(), |acc, f| acc.with(f.name(), f.evaluate(ex, &kb)))
        })
        .collect();
    let out = Dataset::new(columns, examples)?;
    write_or_print(args.out.as_deref(), &out.to_jsonl())
}

fn eval(args: EvalArgs) -> Result<()> {
    let kb = load_kb(&args.kb)?;
    let mut names: BTreeMap<String, usize> = BTreeMap::new();
    let tasks = args
        .data
        .iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .map_or("data".into(), |s| s.to_string_lossy().into_owned());
            let n = names.entry(stem.clone()).or_insert(0);
            *n += 1;
            let name = if *n == 1 { stem } else { format!("{stem}#{n}") };
            Ok(Task::new(name, load_dataset(p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cfg = ExperimentConfig {
        methods: args.methods,
        learners: args.learners,
        folds: args.folds,
        seed: args.seed,
        scope: args.generation_scope,
        aggregator: args.relations.aggregator,
        coverage: args.relations.coverage,
        ..ExperimentConfig::default()
    };
    cfg.deep.min_node_size = args.min_node_size;
    cfg.deep.generation.min_recursive_size = args.min_size;
    cfg.deep.generation.aggregator = args.relations.aggregator;
    cfg.deep.generation.coverage = args.relations.coverage;
    let result = run_experiment(&tasks, &kb, &cfg)?;
    print!("{}", result.to_table());
    if let Some(p) = &args.out {
        fs::write(p, serde_json::to_string_pretty(&result)? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    match args.scenario {
        Scenario::Disorder => {
            let spec = ScenarioSpec {
                seed: args.seed,
                noise: args.noise,
                variant: if args.unseen_countries {
                    TestVariant::UnseenCountries
                } else {
                    TestVariant::UnseenSurnames
                },
                ..ScenarioSpec::default()
            };
            let task = gen_disorder_scenario(&spec)?;
            task.write_to(&args.out)?;
            println!("wrote {} to {}", task.name, args.out.display());
        }
        Scenario::Random => {
            if args.n_tasks == 0 {
                bail!("--n-tasks must be at least 1");
            }
            for task in gen_random_tasks(args.seed, args.n_tasks) {
                let dir = args.out.join(&task.name);
                task.write_to(&dir)?;
                println!("wrote {} to {}", task.name, dir.display());
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Expand(a) => expand(a),
        Command::Generate(a) => generate(a),
        Command::Deep(a) => deep(a),
        Command::Apply(a) => apply(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
    }
}
