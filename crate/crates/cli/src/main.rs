use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use topiclens::artifacts;
use topiclens::ingest::CaptureConfig;
use topiclens::pipeline::{
    load_outputs, run_until, DetectorKind, Loaded, ReferenceKind, RunConfig, RunSummary, Stage, StageStatus,
};
use topiclens::report::{self, UsageMode};
use topiclens::synth::{write_corpus, SynthSpec};
use topiclens::topics::coreness;

/// Topic landscapes from hashtag co-occurrence: communities of hashtags as
/// topics, windowed user description vectors and party similarity series.
///
/// Every stage writes its artifacts under the work directory. Stages whose
/// inputs and settings did not change since the last run are reused.
#[derive(Debug, Parser)]
#[command(name = "topiclens", version)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

/// Where the run configuration comes from. Flags override the file.
#[derive(Debug, Args)]
struct RunArgs {
    /// Run configuration (TOML). Relative paths inside resolve against its
    /// directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Work directory holding stage artifacts and the manifest.
    #[arg(long, global = true, default_value = "work")]
    work: PathBuf,
    /// Line-delimited JSON tweet stream.
    #[arg(long, global = true)]
    tweets: Option<PathBuf>,
    /// Party roster CSV: party_id,acronym,name,candidate_id.
    #[arg(long, global = true)]
    roster: Option<PathBuf>,
    /// Candidate follow edges CSV: user_id,candidate_id.
    #[arg(long, global = true)]
    follows: Option<PathBuf>,
    /// First capture day (local date, inclusive).
    #[arg(long, global = true)]
    start: Option<NaiveDate>,
    /// Last capture day (local date, inclusive).
    #[arg(long, global = true)]
    end: Option<NaiveDate>,
    /// Fixed offset of the capture timezone from UTC, in minutes. Capture
    /// dates, day boundaries and windows use this local time (default -180).
    #[arg(long, global = true, allow_hyphen_values = true)]
    utc_offset_minutes: Option<i32>,
    /// Sliding window length in days; each window ends on a capture day
    /// (default 7).
    #[arg(long, global = true)]
    window_days: Option<u32>,
    /// Length of the initial activity probe; only users who post during it
    /// are kept (default 30).
    #[arg(long, global = true)]
    probe_days: Option<u32>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, normalize and activity-filter the tweet stream.
    Ingest,
    /// Infer each user's party from candidate retweets and follows.
    Affiliate(AffiliateArgs),
    /// Hashtag co-occurrence graph and political hashtag scores.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Topic detection and per-topic k-core decomposition.
    #[command(subcommand)]
    Topics(TopicsCommand),
    /// Windowed user-topic matrices and description vectors.
    #[command(subcommand)]
    Dynamics(DynamicsCommand),
    /// Self- and cross-similarity series of party supporters.
    Similarity(SimilarityArgs),
    /// Plot-ready CSV and SVG exports.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Run every stage and emit all report families.
    Run,
    /// Print the effective run configuration as TOML.
    Config,
    /// Generate a synthetic corpus with planted topics and parties.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct AffiliateArgs {
    /// Only evidence strictly before this local date counts (default: the
    /// whole capture).
    #[arg(long)]
    cutoff: Option<NaiveDate>,
    /// Minimum share of a user's candidate retweets that must go to one
    /// party, in (0.5, 1] (default 0.75).
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Edges co-used by fewer distinct users are removed (default 5).
    #[arg(long)]
    min_weight: Option<u32>,
    /// Relative entropy in bits from the party-size distribution at or
    /// above which a hashtag counts as political (default 0.5).
    #[arg(long)]
    kl_threshold: Option<f64>,
    /// Build the graph from political hashtags only.
    #[arg(long)]
    political_only: bool,
}

#[derive(Debug, Subcommand)]
enum GraphCommand {
    /// Build the pruned co-occurrence graph.
    Build(GraphArgs),
    /// List hashtag political scores, highest relative entropy first.
    Political {
        #[command(flatten)]
        graph: GraphArgs,
        /// Number of rows to print.
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Seed for the default detector's node visit order (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Use communities computed by an external detector instead: native
    /// `topic tag tag ...` lines or a `#module`-style file over the node
    /// ids of graph/interchange.edges.
    #[arg(long)]
    communities: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum TopicsCommand {
    /// Detect topics as communities of the co-occurrence graph.
    Detect(DetectArgs),
    /// Coreness of every hashtag within one topic's unweighted subgraph.
    Kcore {
        #[arg(long)]
        topic: usize,
    },
}

#[derive(Debug, Subcommand)]
enum DynamicsCommand {
    /// Compute window matrices and description vectors.
    Vectors {
        /// Measure deviations from capture-wide topic usage instead of each
        /// window's own column sums.
        #[arg(long, conflicts_with = "user_weighted_reference")]
        global_reference: bool,
        /// Measure deviations from each window's mean user frequency, giving
        /// every user equal weight in the reference.
        #[arg(long)]
        user_weighted_reference: bool,
        /// Also write every valid description vector to dynamics/vectors.csv.
        #[arg(long)]
        dump_vectors: bool,
    },
}

#[derive(Debug, Args)]
struct SimilarityArgs {
    /// Parties for self-similarity: `all`, `none` or a comma list.
    #[arg(long = "self")]
    self_groups: Option<String>,
    /// Party pairs for cross-similarity: `all`, `none` or `A:B,C:D`.
    #[arg(long)]
    cross: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Daily,
    Rolling,
    Cumulative,
}

impl From<ModeArg> for UsageMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Daily => UsageMode::Daily,
            ModeArg::Rolling => UsageMode::Rolling,
            ModeArg::Cumulative => UsageMode::Cumulative,
        }
    }
}

#[derive(Debug, Subcommand)]
enum ReportCommand {
    /// Usage of one topic by each party's supporters over time.
    Topic {
        #[arg(long)]
        id: usize,
        /// Series plotted in the SVG; the CSV carries all three (the rolling
        /// mean is trailing over the window length).
        #[arg(long, value_enum, default_value = "rolling")]
        mode: ModeArg,
        /// Output directory (default: <work>/report).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Similarity series in long and wide CSV, plus a line chart.
    Similarity {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coreness table and coreness-vs-degree scatter for one topic.
    Kcore {
        #[arg(long)]
        topic: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Corpus description (TOML or JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for tweets.jsonl, roster.csv, follows.csv and truth.json.
    #[arg(long)]
    out: PathBuf,
}

/// `println!` that reports a closed stdout as an error instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(io::stdout(), $($arg)*)?
    };
}

macro_rules! out_raw {
    ($($arg:tt)*) => {
        write!(io::stdout(), $($arg)*)?
    };
}

fn base_config(args: &RunArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let (Some(start), Some(end)) = (args.start, args.end) else {
                bail!("without --config, --start and --end are required");
            };
            let tweets = args.tweets.clone().ok_or_else(|| anyhow!("without --config, --tweets is required"))?;
            let roster = args.roster.clone().ok_or_else(|| anyhow!("without --config, --roster is required"))?;
            RunConfig::new(CaptureConfig::new(start, end), tweets, roster, args.follows.clone())
        }
    };
    if args.config.is_some() {
        if let Some(p) = &args.tweets {
            config.inputs.tweets = p.clone();
        }
        if let Some(p) = &args.roster {
            config.inputs.roster = p.clone();
        }
        if let Some(p) = &args.follows {
            config.inputs.follows = Some(p.clone());
        }
        if let Some(d) = args.start {
            config.capture.capture_start = d;
        }
        if let Some(d) = args.end {
            config.capture.capture_end = d;
        }
    }
    if let Some(v) = args.utc_offset_minutes {
        config.capture.utc_offset_minutes = v;
    }
    if let Some(v) = args.window_days {
        config.capture.window_days = v;
    }
    if let Some(v) = args.probe_days {
        config.capture.activity_probe_days = v;
    }
    Ok(config)
}

fn apply_graph(config: &mut RunConfig, g: &GraphArgs) {
    if let Some(v) = g.min_weight {
        config.graph.min_weight = v;
    }
    if let Some(v) = g.kl_threshold {
        config.graph.kl_threshold = v;
    }
    if g.political_only {
        config.graph.political_only = true;
    }
}

fn print_summary(summary: &RunSummary) -> Result<()> {
    for (stage, status) in &summary.stages {
        let word = match status {
            StageStatus::Computed => "computed",
            StageStatus::Reused => "reused",
        };
        out!("{:<10} {word}", stage.name());
    }
    Ok(())
}

fn run(config: &RunConfig, work: &Path, last: Stage) -> Result<RunSummary> {
    let summary = run_until(config, work, last)?;
    print_summary(&summary)?;
    Ok(summary)
}

fn report_dir(out: &Option<PathBuf>, work: &Path) -> PathBuf {
    out.clone().unwrap_or_else(|| work.join("report"))
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    report::write_output(&path, text)?;
    out!("wrote {}", path.display());
    Ok(())
}

fn loaded_parts(loaded: &Loaded) -> Result<(&topiclens::semantic_graph::CooccurrenceGraph, &topiclens::topics::TopicPartition)> {
    let graph = loaded.graph.as_ref().ok_or_else(|| anyhow!("graph artifacts missing"))?;
    let partition = loaded.partition.as_ref().ok_or_else(|| anyhow!("topic artifacts missing"))?;
    Ok((graph, partition))
}

fn execute(cli: Cli) -> Result<()> {
    let work = cli.run.work.clone();
    match cli.command {
        Command::Synth(args) => {
            let mut spec = SynthSpec::load(&args.spec)?;
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            let files = write_corpus(&spec, &args.out)?;
            for f in [&files.tweets, &files.roster, &files.follows, &files.truth] {
                out!("wrote {}", f.display());
            }
            return Ok(());
        }
        Command::Config => {
            out_raw!("{}", base_config(&cli.run)?.to_toml());
            return Ok(());
        }
        _ => {}
    }

    let mut config = base_config(&cli.run)?;
    match cli.command {
        Command::Ingest => {
            run(&config, &work, Stage::Ingest)?;
            let meta: artifacts::StoreMeta = artifacts::read_json(&work.join("ingest").join(artifacts::STORE_STATS))?;
            let s = &meta.stats;
            out!(
                "lines {} malformed {} out_of_range {} duplicates {} users {} active {} records {}",
                s.lines, s.malformed, s.out_of_range, s.duplicates, meta.users_seen, meta.active_users, meta.records_kept
            );
        }
        Command::Affiliate(a) => {
            if a.cutoff.is_some() {
                config.affiliation.cutoff = a.cutoff;
            }
            if let Some(t) = a.threshold {
                config.affiliation.threshold = t;
            }
            run(&config, &work, Stage::Affiliate)?;
            let meta: artifacts::AffiliationMeta =
                artifacts::read_json(&work.join("affiliate").join(artifacts::AFFILIATION_META))?;
            for (party, size) in meta.parties.iter().zip(&meta.party_sizes) {
                out!("{party:<10} {size}");
            }
            out!(
                "by_retweets {} by_follows {} undecided {}",
                meta.by_retweets, meta.by_follows, meta.undecided
            );
        }
        Command::Graph(GraphCommand::Build(g)) => {
            apply_graph(&mut config, &g);
            run(&config, &work, Stage::Graph)?;
            let loaded = load_outputs(&config, &work, Stage::Graph)?;
            let graph = loaded.graph.as_ref().expect("loaded through graph");
            out!("nodes {} edges {}", graph.n_nodes(), graph.n_edges());
        }
        Command::Graph(GraphCommand::Political { graph, top }) => {
            apply_graph(&mut config, &graph);
            run(&config, &work, Stage::Graph)?;
            let path = work.join("graph").join(artifacts::GRAPH_POLITICAL);
            let text = fs::read_to_string(&path)
                .with_context(|| format!("{} missing: fewer than two populated parties?", path.display()))?;
            let mut lines = text.lines();
            let header = lines.next().unwrap_or_default();
            let column = header.split(',').position(|c| c == "dkl_bits").unwrap_or(0);
            let mut rows: Vec<(f64, &str)> = lines
                .map(|l| (l.split(',').nth(column).and_then(|v| v.parse().ok()).unwrap_or(0.0), l))
                .collect();
            rows.sort_by(|a, b| b.0.total_cmp(&a.0));
            out!("{header}");
            for (_, row) in rows.into_iter().take(top) {
                out!("{row}");
            }
        }
        Command::Topics(TopicsCommand::Detect(d)) => {
            if let Some(seed) = d.seed {
                config.topics.seed = seed;
            }
            if let Some(path) = d.communities {
                config.topics.detector = DetectorKind::External;
                config.topics.communities = Some(path);
            }
            run(&config, &work, Stage::Topics)?;
            let loaded = load_outputs(&config, &work, Stage::Topics)?;
            let (_, partition) = loaded_parts(&loaded)?;
            out!("{} topics ({})", partition.n_topics(), partition.provenance());
            for (topic, members) in partition.topics() {
                let preview: Vec<&str> = members.iter().take(8).map(|t| loaded.store.interner.tag_name(*t)).collect();
                out!("{topic:>4} {:>6}  {}", members.len(), preview.join(" "));
            }
        }
        Command::Topics(TopicsCommand::Kcore { topic }) => {
            run(&config, &work, Stage::Topics)?;
            let loaded = load_outputs(&config, &work, Stage::Topics)?;
            let (graph, partition) = loaded_parts(&loaded)?;
            let map = coreness(graph, partition, topic)?;
            out_raw!("{}", report::coreness_csv(std::slice::from_ref(&map), &loaded.store.interner)?);
        }
        Command::Dynamics(DynamicsCommand::Vectors {
            global_reference,
            user_weighted_reference,
            dump_vectors,
        }) => {
            if global_reference {
                config.dynamics.reference = ReferenceKind::Global;
            }
            if user_weighted_reference {
                config.dynamics.reference = ReferenceKind::UserWeighted;
            }
            if dump_vectors {
                config.dynamics.dump_vectors = true;
            }
            run(&config, &work, Stage::Dynamics)?;
            let meta: artifacts::DynamicsMeta =
                artifacts::read_json(&work.join("dynamics").join(artifacts::DYNAMICS_META))?;
            out!(
                "topics {} windows {} degenerate {} valid_vectors {} invalid_vectors {}",
                meta.n_topics, meta.windows, meta.degenerate_windows, meta.valid_vectors, meta.invalid_vectors
            );
        }
        Command::Similarity(s) => {
            if let Some(v) = s.self_groups {
                config.similarity.self_groups = v;
            }
            if let Some(v) = s.cross {
                config.similarity.cross = v;
            }
            run(&config, &work, Stage::Similarity)?;
            let loaded = load_outputs(&config, &work, Stage::Similarity)?;
            let series = loaded.series.as_ref().expect("loaded through similarity");
            if series.iter().any(|s| !s.points.is_empty()) {
                out_raw!("{}", report::similarity_wide_csv(series, &loaded.roster)?);
            } else {
                out!("no defined similarity values");
            }
        }
        Command::Report(ReportCommand::Topic { id, mode, out }) => {
            run(&config, &work, Stage::Dynamics)?;
            let loaded = load_outputs(&config, &work, Stage::Dynamics)?;
            let daily = loaded.daily.as_ref().expect("loaded through dynamics");
            let affiliations = loaded.affiliations.as_ref().expect("loaded through dynamics");
            let usage = report::topic_usage_from_daily(daily, affiliations, &config.capture, id)?;
            let dir = report_dir(&out, &work);
            let mode = UsageMode::from(mode);
            write(dir.join(format!("topic_{id}_usage.csv")), &report::usage_csv(&usage, &loaded.roster)?)?;
            write(
                dir.join(format!("topic_{id}_{}.svg", mode.label())),
                &report::usage_svg(&usage, &loaded.roster, mode)?,
            )?;
        }
        Command::Report(ReportCommand::Similarity { out }) => {
            run(&config, &work, Stage::Similarity)?;
            let loaded = load_outputs(&config, &work, Stage::Similarity)?;
            let series = loaded.series.as_ref().expect("loaded through similarity");
            let dir = report_dir(&out, &work);
            write(dir.join("similarity_long.csv"), &report::similarity_long_csv(series, &loaded.roster)?)?;
            write(dir.join("similarity_wide.csv"), &report::similarity_wide_csv(series, &loaded.roster)?)?;
            write(dir.join("similarity.svg"), &report::similarity_svg(series, &loaded.roster)?)?;
        }
        Command::Report(ReportCommand::Kcore { topic, out }) => {
            run(&config, &work, Stage::Topics)?;
            let loaded = load_outputs(&config, &work, Stage::Topics)?;
            let (graph, partition) = loaded_parts(&loaded)?;
            let map = coreness(graph, partition, topic)?;
            let dir = report_dir(&out, &work);
            write(
                dir.join(format!("topic_{topic}_coreness.csv")),
                &report::coreness_csv(std::slice::from_ref(&map), &loaded.store.interner)?,
            )?;
            write(dir.join(format!("topic_{topic}_coreness.svg")), &report::coreness_svg(&map)?)?;
        }
        Command::Run => {
            run(&config, &work, Stage::Report)?;
        }
        Command::Synth(_) | Command::Config => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // Downstream reader went away, e.g. `| head`.
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
