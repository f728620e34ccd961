use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use conviction_core::conviction::{analyze, model_surprisal, refresh_cache};
use conviction_core::data::{infer_schema, parse_schema_file, parse_table, write_table};
use conviction_core::engine::{react, FitOptions};
use conviction_core::evaluation::{self, suite, Configuration, Split};
use conviction_core::explain::{explain_react, CounterfactualRank, ExplainOptions};
use conviction_core::imputation::{impute, ImputeOptions, Termination};
use conviction_core::persistence::{load, save};
use conviction_core::reduction::{
    feature_removal_table, reduce, removal_table, AnomalyOptions, CasePolicy, FeaturePolicy, FeatureRanking,
    ReducePlan,
};
use conviction_core::residuals::ResidualOptions;
use conviction_core::synthesis::{synthesize, FeatureOrder, SynthesisRequest};
use conviction_core::{DeviationMode, Error, ErrorClass, Hyperparameters, MetricConfig, Model};

type Result<T> = std::result::Result<T, Error>;

#[derive(Parser, Debug)]
#[command(name = "conviction", version, about = "Targetless kNN with surprisal-based conviction")]
struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, env = "CONVICTION_THREADS")]
    threads: Option<usize>,

    /// Seed for every random choice; drawn and echoed when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a table, fit deviations and save a snapshot.
    Ingest(IngestArgs),
    /// Report surprisal and conviction measures.
    Analyze(AnalyzeArgs),
    /// Predict action features from a context.
    React(ReactArgs),
    /// Emit the audit bundle for a decision, live or from a snapshot.
    Explain(ExplainArgs),
    /// Fill missing values.
    Impute(ImputeArgs),
    /// Remove anomalies, redundant cases and weak features.
    Reduce(ReduceArgs),
    /// Generate synthetic cases.
    Synth(SynthArgs),
    /// Mean surprisal of each snapshot's cases against the other.
    Compare(CompareArgs),
    /// Benchmark metric configurations.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    data: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long, default_value = "lk-normal")]
    mode: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 8)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    snapshot: PathBuf,
    #[arg(long)]
    per_case: bool,
    #[arg(long)]
    per_feature: bool,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

#[derive(Args, Debug)]
struct ReactArgs {
    snapshot: PathBuf,
    /// Comma-separated feature=value pairs.
    #[arg(long)]
    context: String,
    /// Comma-separated action feature names.
    #[arg(long)]
    action: String,
    /// Neighbors to use; defaults to the snapshot's k.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    explain: bool,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[arg(required_unless_present = "audit", conflicts_with = "audit")]
    snapshot: Option<PathBuf>,
    /// Regenerate the bundle from a persisted snapshot.
    #[arg(long)]
    audit: Option<PathBuf>,
    #[arg(long)]
    context: String,
    #[arg(long)]
    action: String,
    #[arg(long)]
    k: Option<usize>,
    /// `ratio` or `nearest`.
    #[arg(long, default_value = "ratio")]
    cf_rank: String,
    #[arg(long, default_value_t = 3)]
    counterfactuals: usize,
}

#[derive(Args, Debug)]
struct ImputeArgs {
    snapshot: PathBuf,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    /// `complete`, `ceiling [s]` or `sparsity f`.
    #[arg(long, num_args = 1..=2, default_values_t = ["complete".to_string()])]
    until: Vec<String>,
    #[arg(long)]
    stochastic: bool,
    /// Snapshot to write; defaults to the input.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    snapshot: PathBuf,
    #[arg(long)]
    anomaly_threshold: Option<f64>,
    #[arg(long, conflicts_with = "floor")]
    cap: Option<usize>,
    #[arg(long)]
    floor: Option<f64>,
    /// `keep=j` or `floor=c`.
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

#[derive(Args, Debug)]
struct SynthArgs {
    snapshot: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 1.0)]
    conviction: f64,
    /// Comma-separated feature=value pairs held fixed.
    #[arg(long)]
    condition: Option<String>,
    /// `random` or `conviction`.
    #[arg(long, default_value = "random")]
    order: String,
    /// CSV file to write; defaults to stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

#[derive(Args, Debug)]
struct CompareArgs {
    first: PathBuf,
    second: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Directory of CSV files, or `regression`, `classification`, `structured`.
    #[arg(long, default_value = "regression")]
    suite: String,
    #[arg(long, default_value = "classic,fractional,zero-lk")]
    configs: String,
    #[arg(long, default_value_t = 5, conflicts_with = "train_fraction")]
    folds: usize,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Per-cell table to write; defaults to stdout after the summary.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Infeasible => 4,
        ErrorClass::Corruption => 5,
    }
}

fn quote(token: &str) -> String {
    let plain = !token.is_empty()
        && token
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_./=:,+@%".contains(c));
    if plain {
        token.to_string()
    } else {
        format!("'{}'", token.replace('\'', r"'\''"))
    }
}

fn path(p: &Path) -> String {
    quote(&p.to_string_lossy())
}

fn delimiter_byte(d: char) -> Result<u8> {
    u8::try_from(d)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Error::InvalidArgument(format!("delimiter `{d}` is not a single ASCII byte")))
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Parses `name=value,...` against the model's schema.
fn parse_pairs(model: &Model, text: &str) -> Result<Vec<(usize, f64)>> {
    let ds = model.dataset();
    text.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let (name, value) = pair
                .split_once('=')
                .ok_or_else(|| usage(format!("`{pair}` is not of the form feature=value")))?;
            let f = ds.feature_index(name.trim())?;
            let v = ds
                .parse_value(f, value)
                .map_err(|e| usage(e.to_string()))?
                .ok_or_else(|| usage(format!("value for `{}` is missing", name.trim())))?;
            Ok((f, v))
        })
        .collect()
}

fn parse_names(model: &Model, text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .filter(|n| !n.trim().is_empty())
        .map(|n| model.dataset().feature_index(n.trim()))
        .collect()
}

struct Context {
    seed: u64,
    /// Resolved global flags, echoed before the subcommand.
    prefix: String,
}

fn echo(ctx: &Context, rest: &str) {
    eprintln!("invocation: {} {rest}", ctx.prefix);
}

fn ingest(ctx: &Context, a: &IngestArgs) -> Result<()> {
    let mode = DeviationMode::parse(&a.mode).ok_or_else(|| usage(format!("unknown mode `{}`", a.mode)))?;
    let mut line = format!("ingest {} -o {}", path(&a.data), path(&a.output));
    if let Some(s) = &a.schema {
        let _ = write!(line, " --schema {}", path(s));
    }
    let _ = write!(
        line,
        " --delimiter {} --k {} --p {} --mode {} --alpha {} --max-iters {} --tol {}",
        quote(&a.delimiter.to_string()),
        a.k,
        a.p,
        mode.as_str(),
        a.alpha,
        a.max_iters,
        a.tol
    );
    echo(ctx, &line);
    let delimiter = delimiter_byte(a.delimiter)?;
    let text = std::fs::read_to_string(&a.data)?;
    let schema = match &a.schema {
        Some(p) => parse_schema_file(&std::fs::read_to_string(p)?)?,
        None => infer_schema(&text, delimiter)?,
    };
    let dataset = parse_table(&text, schema, delimiter)?;
    let params = Hyperparameters {
        k: a.k,
        metric: MetricConfig { p: a.p, mode },
        alpha: a.alpha,
    };
    let opts = FitOptions {
        max_iters: a.max_iters,
        tol: a.tol,
        residuals: ResidualOptions {
            seed: ctx.seed,
            ..ResidualOptions::default()
        },
    };
    let (mut model, outcome) = Model::fit(dataset, params, opts)?;
    eprintln!(
        "residual iterations: {} (converged: {}), trace: {:?}",
        outcome.iterations, outcome.converged, outcome.trace
    );
    for f in &outcome.unpredictable {
        eprintln!("warning: feature `{}` could not be predicted", model.dataset().schema()[*f].name);
    }
    refresh_cache(&mut model)?;
    save(&model, &a.output)?;
    println!("{} cases, {} features -> {}", model.len(), model.feature_count(), a.output.display());
    Ok(())
}

fn analyze_cmd(ctx: &Context, a: &AnalyzeArgs) -> Result<()> {
    let both = !a.per_case && !a.per_feature;
    let (cases, features) = (a.per_case || both, a.per_feature || both);
    let mut line = format!("analyze {} --delimiter {}", path(&a.snapshot), quote(&a.delimiter.to_string()));
    if cases {
        line.push_str(" --per-case");
    }
    if features {
        line.push_str(" --per-feature");
    }
    echo(ctx, &line);
    let model = load(&a.snapshot)?;
    let report = analyze(&model, features)?;
    println!("expected_information{}{}", a.delimiter, report.expected_information);
    if cases {
        println!();
        print!("{}", report.cases_table(a.delimiter));
    }
    if features {
        println!();
        print!("{}", report.features_table(a.delimiter));
    }
    Ok(())
}

fn react_cmd(ctx: &Context, a: &ReactArgs) -> Result<()> {
    let model = load(&a.snapshot)?;
    let k = a.k.unwrap_or(model.params().k);
    let mut line = format!(
        "react {} --context {} --action {} --k {k}",
        path(&a.snapshot),
        quote(&a.context),
        quote(&a.action)
    );
    if a.explain {
        line.push_str(" --explain");
    }
    echo(ctx, &line);
    let context = parse_pairs(&model, &a.context)?;
    let actions = parse_names(&model, &a.action)?;
    if a.explain {
        let bundle = explain_react(&model, &context, &actions, k, &ExplainOptions::default())?;
        print!("{}", bundle.render(&model));
    } else {
        let reaction = react(&model, &context, &actions, k)?;
        for (f, v) in &reaction.predictions {
            println!(
                "{}={}",
                model.dataset().schema()[*f].name,
                model.dataset().format_value(*f, Some(*v))
            );
        }
    }
    Ok(())
}

fn explain_cmd(ctx: &Context, a: &ExplainArgs) -> Result<()> {
    let rank = match a.cf_rank.as_str() {
        "ratio" => CounterfactualRank::Ratio,
        "nearest" => CounterfactualRank::Nearest,
        other => return Err(usage(format!("unknown counterfactual rank `{other}`"))),
    };
    let (source, flag) = match (&a.snapshot, &a.audit) {
        (_, Some(p)) => (p, "--audit "),
        (Some(p), None) => (p, ""),
        (None, None) => return Err(usage("explain needs a snapshot or --audit")),
    };
    let model = load(source)?;
    let k = a.k.unwrap_or(model.params().k);
    echo(
        ctx,
        &format!(
            "explain {flag}{} --context {} --action {} --k {k} --cf-rank {} --counterfactuals {}",
            path(source),
            quote(&a.context),
            quote(&a.action),
            a.cf_rank,
            a.counterfactuals
        ),
    );
    let context = parse_pairs(&model, &a.context)?;
    let actions = parse_names(&model, &a.action)?;
    let opts = ExplainOptions {
        counterfactual_count: a.counterfactuals,
        counterfactual_rank: rank,
        ..ExplainOptions::default()
    };
    let bundle = explain_react(&model, &context, &actions, k, &opts)?;
    print!("{}", bundle.render(&model));
    Ok(())
}

fn impute_cmd(ctx: &Context, a: &ImputeArgs) -> Result<()> {
    let termination = match a.until.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["complete"] => Termination::Complete,
        ["ceiling"] => Termination::SurprisalCeiling(None),
        ["ceiling", s] => Termination::SurprisalCeiling(Some(
            s.parse().map_err(|_| usage(format!("bad ceiling `{s}`")))?,
        )),
        ["sparsity", f] => Termination::SparsityTarget(f.parse().map_err(|_| usage(format!("bad sparsity `{f}`")))?),
        other => return Err(usage(format!("unrecognized --until `{}`", other.join(" ")))),
    };
    let output = a.output.clone().unwrap_or_else(|| a.snapshot.clone());
    let mut line = format!(
        "impute {} -o {} --batch {} --until {} --delimiter {}",
        path(&a.snapshot),
        path(&output),
        a.batch,
        a.until.join(" "),
        quote(&a.delimiter.to_string())
    );
    if a.stochastic {
        line.push_str(" --stochastic");
    }
    echo(ctx, &line);
    let model = load(&a.snapshot)?;
    let opts = ImputeOptions {
        batch: a.batch,
        termination,
        stochastic: a.stochastic.then_some(ctx.seed),
        feature_entropy_first: false,
    };
    let (mut imputed, log) = impute(&model, &opts)?;
    eprintln!(
        "imputed {} cells in {} iterations, stopped: {}",
        log.cells.len(),
        log.iterations,
        log.stop.as_str()
    );
    if let Some(c) = log.ceiling {
        eprintln!("surprisal ceiling: {c}");
    }
    print!("{}", log.to_table(&imputed, a.delimiter));
    refresh_cache(&mut imputed)?;
    save(&imputed, &output)?;
    Ok(())
}

fn reduce_cmd(ctx: &Context, a: &ReduceArgs) -> Result<()> {
    let features = match a.features.as_deref() {
        None => None,
        Some(spec) => Some(match spec.split_once('=') {
            Some(("keep", j)) => FeaturePolicy::KeepTop(j.parse().map_err(|_| usage(format!("bad keep count `{j}`")))?),
            Some(("floor", c)) => {
                FeaturePolicy::ConvictionFloor(c.parse().map_err(|_| usage(format!("bad conviction floor `{c}`")))?)
            }
            _ => return Err(usage(format!("--features expects keep=j or floor=c, got `{spec}`"))),
        }),
    };
    let cases = match (a.cap, a.floor) {
        (Some(m), _) => Some(CasePolicy::Cap(m)),
        (None, Some(s)) => Some(CasePolicy::SurprisalFloor(s)),
        (None, None) => None,
    };
    if a.anomaly_threshold.is_none() && cases.is_none() && features.is_none() {
        return Err(usage("reduce needs --anomaly-threshold, --cap, --floor or --features"));
    }
    let output = a.output.clone().unwrap_or_else(|| a.snapshot.clone());
    let mut line = format!("reduce {} -o {}", path(&a.snapshot), path(&output));
    if let Some(t) = a.anomaly_threshold {
        let _ = write!(line, " --anomaly-threshold {t}");
    }
    if let Some(m) = a.cap {
        let _ = write!(line, " --cap {m}");
    }
    if let Some(s) = a.floor {
        let _ = write!(line, " --floor {s}");
    }
    if let Some(f) = &a.features {
        let _ = write!(line, " --features {}", quote(f));
    }
    if let Some(b) = a.batch {
        let _ = write!(line, " --batch {b}");
    }
    let _ = write!(line, " --delimiter {}", quote(&a.delimiter.to_string()));
    echo(ctx, &line);
    let model = load(&a.snapshot)?;
    let plan = ReducePlan {
        anomalies: a.anomaly_threshold.map(|threshold| AnomalyOptions {
            threshold,
            familiarity_threshold: None,
        }),
        cases,
        batch: a.batch,
        features: features.map(|p| (p, FeatureRanking::Conviction)),
    };
    let outcome = reduce(&model, &plan)?;
    let d = a.delimiter;
    if plan.anomalies.is_some() {
        println!("anomaly{d}prediction{d}familiarity");
        for x in &outcome.anomalies {
            println!("{}{d}{}{d}{}", x.id, x.prediction, x.familiarity);
        }
        println!();
    }
    if plan.cases.is_some() {
        print!("{}", removal_table(&outcome.removals, d));
        println!();
    }
    if plan.features.is_some() {
        print!("{}", feature_removal_table(&outcome.feature_removals, d));
    }
    let mut reduced = outcome.model;
    eprintln!("{} -> {} cases, {} features", model.len(), reduced.len(), reduced.feature_count());
    refresh_cache(&mut reduced)?;
    save(&reduced, &output)?;
    Ok(())
}

fn synth_cmd(ctx: &Context, a: &SynthArgs) -> Result<()> {
    let order = match a.order.as_str() {
        "random" => FeatureOrder::Random,
        "conviction" => FeatureOrder::ByFeatureConviction,
        other => return Err(usage(format!("unknown order `{other}`"))),
    };
    let mut line = format!(
        "synth {} --count {} --conviction {} --order {} --delimiter {}",
        path(&a.snapshot),
        a.count,
        a.conviction,
        a.order,
        quote(&a.delimiter.to_string())
    );
    if let Some(c) = &a.condition {
        let _ = write!(line, " --condition {}", quote(c));
    }
    if let Some(o) = &a.output {
        let _ = write!(line, " -o {}", path(o));
    }
    echo(ctx, &line);
    let model = load(&a.snapshot)?;
    let mut request = SynthesisRequest::new(a.conviction, a.count, ctx.seed);
    request.order = order;
    if let Some(c) = &a.condition {
        request.conditions = parse_pairs(&model, c)?;
    }
    let cases = synthesize(&model, &request)?;
    let mut out = model.dataset().subset(&[]);
    for case in cases {
        out.push(case)?;
    }
    let table = write_table(&out, delimiter_byte(a.delimiter)?, true);
    match &a.output {
        Some(p) => std::fs::write(p, table)?,
        None => print!("{table}"),
    }
    Ok(())
}

fn compare_cmd(ctx: &Context, a: &CompareArgs) -> Result<()> {
    echo(ctx, &format!("compare {} {}", path(&a.first), path(&a.second)));
    let first = load(&a.first)?;
    let second = load(&a.second)?;
    if !first.dataset().is_compatible(second.dataset()) {
        return Err(Error::Schema("snapshots have different schemas".into()));
    }
    let forward = model_surprisal(&first, second.dataset())?;
    let backward = model_surprisal(&second, first.dataset())?;
    println!("surprisal of {} given {}: {forward}", a.second.display(), a.first.display());
    println!("surprisal of {} given {}: {backward}", a.first.display(), a.second.display());
    Ok(())
}

fn eval_cmd(ctx: &Context, a: &EvalArgs) -> Result<()> {
    let split = match a.train_fraction {
        Some(f) => Split::Holdout(f),
        None => Split::KFold(a.folds),
    };
    let mut line = format!("eval --suite {} --configs {}", quote(&a.suite), quote(&a.configs));
    match split {
        Split::Holdout(f) => {
            let _ = write!(line, " --train-fraction {f}");
        }
        Split::KFold(k) => {
            let _ = write!(line, " --folds {k}");
        }
    }
    let _ = write!(line, " --delimiter {}", quote(&a.delimiter.to_string()));
    if let Some(o) = &a.output {
        let _ = write!(line, " -o {}", path(o));
    }
    echo(ctx, &line);
    let configs = a
        .configs
        .split(',')
        .filter(|c| !c.is_empty())
        .map(Configuration::parse)
        .collect::<Result<Vec<_>>>()?;
    let dir = Path::new(&a.suite);
    let datasets = if dir.is_dir() {
        suite::load_suite_dir(dir)?
    } else {
        match a.suite.as_str() {
            "regression" => suite::regression_suite(ctx.seed),
            "classification" => suite::classification_suite(ctx.seed),
            "structured" => suite::structured_suite(ctx.seed),
            other => return Err(usage(format!("`{other}` is neither a directory nor a bundled suite"))),
        }
    };
    let result = evaluation::evaluate(&datasets, &configs, split, ctx.seed)?;
    for c in &result.configurations {
        eprintln!("configuration {}", c.describe());
    }
    print!("{}", result.summary());
    let table = result.to_table(a.delimiter);
    match &a.output {
        Some(p) => std::fs::write(p, table)?,
        None => {
            println!();
            print!("{table}");
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let threads = match cli.threads {
        Some(0) | None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        Some(n) => n,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| usage(format!("cannot configure thread pool: {e}")))?;
    let seed = cli.seed.unwrap_or_else(rand::random);
    if cli.seed.is_none() {
        eprintln!("seed: {seed}");
    }
    let ctx = Context {
        seed,
        prefix: format!("conviction --threads {threads} --seed {seed}"),
    };
    match &cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Analyze(a) => analyze_cmd(&ctx, a),
        Command::React(a) => react_cmd(&ctx, a),
        Command::Explain(a) => explain_cmd(&ctx, a),
        Command::Impute(a) => impute_cmd(&ctx, a),
        Command::Reduce(a) => reduce_cmd(&ctx, a),
        Command::Synth(a) => synth_cmd(&ctx, a),
        Command::Compare(a) => compare_cmd(&ctx, a),
        Command::Eval(a) => eval_cmd(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
