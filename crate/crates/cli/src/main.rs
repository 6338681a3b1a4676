//! Operator entry points: build knowledge-base artifacts, run batch and
//! incremental integrations, re-run resolve, manage the review queue,
//! inspect states.
//!
//! Exit codes: 0 ok, 1 usage error, 2 data error, 3 corrupt state.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use unischema::error::Error;
use unischema::exec::Exec;
use unischema::kb::{ingest_edges, DEFAULT_BUCKET_LENGTH, DEFAULT_SEED};
use unischema::normalize::{self, Dictionaries};
use unischema::pipeline::{
    apply_review_decisions, batch_integrate, full_resolve, incremental_integrate,
    parse_schemas, IntegrationParams, IntegrationState, KbHandle, RunReport,
};
use unischema::resolve::{parse_decisions, review_export};

use config::ConfigFile;

#[derive(Parser)]
#[command(name = "unischema", version, about = "Schema integration engine")]
struct Cli {
    /// Flat key = value config file mirroring the flag names; explicit
    /// flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Knowledge-base artifacts
    Kb {
        #[command(subcommand)]
        command: KbCommand,
    },
    /// Batch and incremental integration
    Integrate {
        #[command(subcommand)]
        command: IntegrateCommand,
    },
    /// Re-run the resolve pass on a state file
    Resolve(ResolveArgs),
    /// Export pending review items / import verdicts
    Review {
        #[command(subcommand)]
        command: ReviewCommand,
    },
    /// Tokenize attribute names and print keywords
    Normalize(NormalizeArgs),
    /// Summarize a state file
    Stats(StatsArgs),
}

#[derive(Subcommand)]
enum KbCommand {
    /// Ingest a six-field edge TSV and write graph, neighbor tables, and
    /// the concept index
    Build(KbBuildArgs),
    /// Print the BFS ball around a concept (debug oracle surface)
    Neighbors(KbNeighborsArgs),
}

#[derive(Args)]
struct KbBuildArgs {
    /// Edge file: subId, subName, subType, superId, superName, superType
    edges: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Power-of-two hop counts to materialize
    #[arg(long, value_delimiter = ',')]
    tables: Option<Vec<u32>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bucket_length: Option<u64>,
    /// Gram length for the concept index
    #[arg(long)]
    q: Option<usize>,
}

#[derive(Args)]
struct KbNeighborsArgs {
    concept: String,
    #[arg(long, value_name = "DIR")]
    kb: PathBuf,
    #[arg(long)]
    gamma: u32,
}

#[derive(Subcommand)]
enum IntegrateCommand {
    /// Integrate a whole schema corpus at once
    Batch(BatchArgs),
    /// Insert schemas into an existing state, in place
    Add(AddArgs),
}

#[derive(Args)]
struct ParamFlags {
    #[arg(long)]
    epsilon_t: Option<u32>,
    #[arg(long)]
    gamma: Option<u32>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    frontier_cap: Option<usize>,
}

#[derive(Args)]
struct DictFlags {
    /// Abbreviation dictionary (TSV: abbr<TAB>expansion)
    #[arg(long, value_name = "FILE")]
    abbrev: Option<PathBuf>,
    /// Wordlist for cutting unbroken runs (one word per line)
    #[arg(long, value_name = "FILE")]
    wordlist: Option<PathBuf>,
    /// Manual overrides (TSV: raw-name<TAB>token token ...)
    #[arg(long, value_name = "FILE")]
    overrides: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    schemas: PathBuf,
    #[arg(long, value_name = "DIR")]
    kb: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[command(flatten)]
    params: ParamFlags,
    #[command(flatten)]
    dicts: DictFlags,
}

#[derive(Args)]
struct AddArgs {
    schema: PathBuf,
    #[arg(long, value_name = "FILE")]
    state: PathBuf,
    #[arg(long, value_name = "DIR")]
    kb: PathBuf,
    #[command(flatten)]
    dicts: DictFlags,
}

#[derive(Args)]
struct ResolveArgs {
    #[arg(long, value_name = "FILE")]
    state: PathBuf,
    #[arg(long)]
    beta: Option<f64>,
    /// Knowledge-base directory; needed for semantic distances
    #[arg(long, value_name = "DIR")]
    kb: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ReviewCommand {
    /// Write pending items as JSONL
    Export(ReviewExportArgs),
    /// Apply verdicts from a decisions JSONL
    Import(ReviewImportArgs),
}

#[derive(Args)]
struct ReviewExportArgs {
    #[arg(long, value_name = "FILE")]
    state: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct ReviewImportArgs {
    decisions: PathBuf,
    #[arg(long, value_name = "FILE")]
    state: PathBuf,
    /// Knowledge-base directory; needed for semantic distances when
    /// verdicts trigger a resolve
    #[arg(long, value_name = "DIR")]
    kb: Option<PathBuf>,
}

#[derive(Args)]
struct NormalizeArgs {
    /// Attribute names, one per line
    names: PathBuf,
    #[command(flatten)]
    dicts: DictFlags,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long, value_name = "FILE")]
    state: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let config = match ConfigFile::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match run(cli.command, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    let code = match e {
        Error::Parameter(_) => 1,
        Error::NotFound(_) | Error::Data(_) | Error::Io(_) => 2,
        Error::Corrupt(_) => 3,
    };
    ExitCode::from(code)
}

fn run(command: Command, config: &ConfigFile) -> Result<(), Error> {
    let exec = Exec::default();
    match command {
        Command::Kb { command: KbCommand::Build(args) } => kb_build(args, config, exec),
        Command::Kb { command: KbCommand::Neighbors(args) } => kb_neighbors(args),
        Command::Integrate { command: IntegrateCommand::Batch(args) } => {
            integrate_batch(args, config, exec)
        }
        Command::Integrate { command: IntegrateCommand::Add(args) } => {
            integrate_add(args, config, exec)
        }
        Command::Resolve(args) => resolve_cmd(args, config, exec),
        Command::Review { command: ReviewCommand::Export(args) } => review_export_cmd(args),
        Command::Review { command: ReviewCommand::Import(args) } => review_import_cmd(args, exec),
        Command::Normalize(args) => normalize_cmd(args, config),
        Command::Stats(args) => stats_cmd(args),
    }
}

fn read_file(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))
}

fn load_dicts(flags: &DictFlags, config: &ConfigFile) -> Result<Dictionaries, Error> {
    let path_of = |flag: &Option<PathBuf>, key: &str| -> Result<Option<PathBuf>, Error> {
        Ok(flag.clone().or(config.path(key)?))
    };
    let mut dicts = Dictionaries::default();
    if let Some(path) = path_of(&flags.abbrev, "abbrev")? {
        dicts.abbreviations = Dictionaries::parse_abbreviations(&read_file(&path)?)?;
    }
    if let Some(path) = path_of(&flags.wordlist, "wordlist")? {
        dicts.wordlist = Dictionaries::parse_wordlist(&read_file(&path)?);
    }
    if let Some(path) = path_of(&flags.overrides, "overrides")? {
        dicts.overrides = Dictionaries::parse_overrides(&read_file(&path)?)?;
    }
    Ok(dicts)
}

fn effective_params(flags: &ParamFlags, config: &ConfigFile) -> Result<IntegrationParams, Error> {
    let defaults = IntegrationParams::default();
    Ok(IntegrationParams {
        max_edit: flags.epsilon_t.or(config.u32("epsilon-t")?).unwrap_or(defaults.max_edit),
        max_hops: flags.gamma.or(config.u32("gamma")?).unwrap_or(defaults.max_hops),
        tolerance: flags.beta.or(config.f64("beta")?).unwrap_or(defaults.tolerance),
        gram_len: flags.q.or(config.usize("q")?).unwrap_or(defaults.gram_len),
        frontier_cap: flags
            .frontier_cap
            .or(config.usize("frontier-cap")?)
            .unwrap_or(defaults.frontier_cap),
    })
}

fn kb_build(args: KbBuildArgs, config: &ConfigFile, exec: Exec) -> Result<(), Error> {
    let source = read_file(&args.edges)?;
    let report = ingest_edges(source.as_bytes())?;
    let tables = args
        .tables
        .or(config.u32_list("tables")?)
        .unwrap_or_else(|| vec![1, 2, 4]);
    let seed = args.seed.or(config.u64("seed")?).unwrap_or(DEFAULT_SEED);
    let bucket_length = args
        .bucket_length
        .or(config.u64("bucket-length")?)
        .unwrap_or(DEFAULT_BUCKET_LENGTH);
    let q = args.q.or(config.usize("q")?).unwrap_or(2);
    if !report.rejects.is_empty() {
        let mut log = String::new();
        for r in &report.rejects {
            log.push_str(&format!("line {}: {}\n", r.line, r.reason));
            eprintln!("reject line {}: {}", r.line, r.reason);
        }
        fs::create_dir_all(&args.out)?;
        fs::write(args.out.join("rejects.log"), log)?;
    }
    let kb = KbHandle::build(report.graph, &tables, seed, bucket_length, q, exec)?;
    kb.save(&args.out)?;
    println!(
        "{} concepts, {} edges (dropped: {} duplicates, {} self-loops, {} rejected lines)",
        kb.graph.concept_count(),
        kb.graph.edge_count(),
        report.duplicates,
        report.self_loops,
        report.rejects.len()
    );
    println!(
        "wrote {} neighbor table(s) for hop counts {:?} and a concept index over {} names",
        kb.tables.len(),
        tables,
        kb.concept_index.attr_count()
    );
    Ok(())
}

fn kb_neighbors(args: KbNeighborsArgs) -> Result<(), Error> {
    if args.gamma == 0 {
        return Err(Error::parameter("gamma must be >= 1"));
    }
    let kb = KbHandle::load(&args.kb)?;
    if !kb.graph.contains(&args.concept) {
        return Err(Error::NotFound(format!("concept {:?}", args.concept)));
    }
    let ball = kb.graph.bfs_ball(&args.concept, args.gamma);
    let mut entries: Vec<(&String, &u32)> = ball.iter().collect();
    entries.sort_by(|a, b| a.1.cmp(b.1).then_with(|| a.0.cmp(b.0)));
    for (concept, distance) in entries {
        println!("{distance}\t{concept}");
    }
    Ok(())
}

fn print_report(report: &RunReport) {
    println!(
        "attributes: {} seen, {} new; merges: {} literal, {} semantic; clusters: {}",
        report.attributes_seen,
        report.new_attributes,
        report.literal_merges,
        report.semantic_merges,
        report.clusters
    );
    if !report.kb_absent.is_empty() {
        println!("knowledge-base absent (literal joins only): {}", report.kb_absent.join(", "));
    }
    if report.review_queued > 0 {
        println!("queued for review: {}", report.review_queued);
    }
    for f in &report.failures {
        eprintln!("schema {}: attribute {:?} skipped: {}", f.schema, f.name, f.reason);
    }
}

fn integrate_batch(args: BatchArgs, config: &ConfigFile, exec: Exec) -> Result<(), Error> {
    let params = effective_params(&args.params, config)?;
    let dicts = load_dicts(&args.dicts, config)?;
    let schemas = parse_schemas(&read_file(&args.schemas)?)?;
    let kb = KbHandle::load(&args.kb)?;
    let (state, report) = batch_integrate(&schemas, params, &kb, &dicts, exec)?;
    state.save(&args.out)?;
    print_report(&report);
    println!("state written to {}", args.out.display());
    Ok(())
}

fn integrate_add(args: AddArgs, config: &ConfigFile, exec: Exec) -> Result<(), Error> {
    let dicts = load_dicts(&args.dicts, config)?;
    let schemas = parse_schemas(&read_file(&args.schema)?)?;
    let mut state = IntegrationState::load(&args.state)?;
    let kb = KbHandle::load(&args.kb)?;
    for schema in &schemas {
        let report = incremental_integrate(schema, &mut state, &kb, &dicts, exec)?;
        print_report(&report);
    }
    state.save(&args.state)?;
    println!("state updated in {}", args.state.display());
    Ok(())
}

fn resolve_cmd(args: ResolveArgs, config: &ConfigFile, exec: Exec) -> Result<(), Error> {
    let mut state = IntegrationState::load(&args.state)?;
    let kb = match args.kb.or(config.path("kb")?) {
        Some(dir) => Some(KbHandle::load(dir)?),
        None => None,
    };
    let before = state.clusters.len();
    let report = full_resolve(&mut state, kb.as_ref(), args.beta, exec)?;
    state.save(&args.state)?;
    println!(
        "resolved {} clusters into {} ({} splits, {} newly queued for review)",
        before,
        state.clusters.len(),
        report.splits,
        report.queued.len()
    );
    Ok(())
}

fn review_export_cmd(args: ReviewExportArgs) -> Result<(), Error> {
    let state = IntegrationState::load(&args.state)?;
    let doc = review_export(&state.review.items)?;
    fs::write(&args.out, &doc)?;
    println!("exported {} pending item(s) to {}", doc.lines().count(), args.out.display());
    Ok(())
}

fn review_import_cmd(args: ReviewImportArgs, exec: Exec) -> Result<(), Error> {
    let decisions = parse_decisions(&read_file(&args.decisions)?)?;
    let mut state = IntegrationState::load(&args.state)?;
    let kb = match args.kb {
        Some(dir) => Some(KbHandle::load(dir)?),
        None => None,
    };
    let report = apply_review_decisions(&mut state, &decisions, kb.as_ref(), exec)?;
    state.save(&args.state)?;
    println!("applied {} verdict(s), {} unchanged", report.applied, report.unchanged);
    for (id, reason) in &report.skipped {
        eprintln!("skipped {id}: {reason}");
    }
    Ok(())
}

fn normalize_cmd(args: NormalizeArgs, config: &ConfigFile) -> Result<(), Error> {
    let dicts = load_dicts(&args.dicts, config)?;
    let source = read_file(&args.names)?;
    let mut tokenized = Vec::new();
    for line in source.lines() {
        let name = line.trim_end_matches('\r');
        if name.trim().is_empty() {
            continue;
        }
        tokenized.push(normalize::normalize_attribute(name, &dicts)?);
    }
    normalize::assign_keywords(&mut tokenized);
    for t in &tokenized {
        let rule = match t.rule {
            normalize::RuleTag::Identity => "identity",
            normalize::RuleTag::Abbreviation => "abbreviation",
            normalize::RuleTag::WordCutting => "word-cutting",
            normalize::RuleTag::Override => "override",
        };
        let flag = if t.flagged { "\t[unsplit run]" } else { "" };
        println!("{}\t{}\t{}\t{}{}", t.raw, t.tokens.join(" "), rule, t.keyword, flag);
    }
    Ok(())
}

fn stats_cmd(args: StatsArgs) -> Result<(), Error> {
    let state = IntegrationState::load(&args.state)?;
    println!("clusters: {}", state.clusters.len());
    println!("attributes: {}", state.attribute_count());
    let mut size_histogram: BTreeMap<usize, usize> = BTreeMap::new();
    let mut frontier_sizes: Vec<usize> = Vec::new();
    let mut owners: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in &state.clusters {
        *size_histogram.entry(doc.attributes.len()).or_insert(0) += 1;
        frontier_sizes.push(doc.frontier.len());
        for attr in &doc.attributes {
            *owners.entry(attr.name.as_str()).or_insert(0) += 1;
        }
    }
    println!("cluster sizes:");
    for (size, count) in &size_histogram {
        println!("  {size} member(s): {count}");
    }
    frontier_sizes.sort_unstable();
    if !frontier_sizes.is_empty() {
        println!(
            "frontier sizes: min {} / median {} / max {}",
            frontier_sizes[0],
            frontier_sizes[frontier_sizes.len() / 2],
            frontier_sizes[frontier_sizes.len() - 1]
        );
    }
    let shared: Vec<(&str, usize)> =
        owners.into_iter().filter(|&(_, n)| n > 1).collect();
    let mut overlapping_pairs = 0;
    for i in 0..state.clusters.len() {
        for j in i + 1..state.clusters.len() {
            let a = &state.clusters[i];
            let b = &state.clusters[j];
            if a.attributes.iter().any(|x| b.attributes.iter().any(|y| x.name == y.name)) {
                overlapping_pairs += 1;
            }
        }
    }
    println!(
        "overlaps: {} cluster pair(s) sharing members, {} bridging attribute(s)",
        overlapping_pairs,
        shared.len()
    );
    let pending = state
        .review
        .items
        .iter()
        .filter(|i| i.verdict == unischema::resolve::ReviewVerdict::Pending)
        .count();
    println!(
        "review: {} pending of {} item(s)",
        pending,
        state.review.items.len()
    );
    Ok(())
}
