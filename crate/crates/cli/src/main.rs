//! Pipeline driver. Subcommands mirror the pipeline stages: gen-trace,
//! profile, analyze, learn, simulate, report. Settings come from built-in
//! defaults, then an optional `--config` key=value file, then flags.
//!
//! Exit codes are stable for scripting: 0 success, 2 I/O, 3 file-version
//! mismatch, 4 report-schema mismatch, 1 anything else.

mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use prophet_core::analysis::{analyze, AnalysisInput};
use prophet_core::hints::HintManifest;
use prophet_core::learning::CounterStore;
use prophet_core::profiler::{profile, CounterFile, Sampling};
use prophet_core::report::{aggregate_csv, load_report, summarize, ReportRow};
use prophet_core::sim::{simulate_detailed, Policy, SimConfig, CSV_HEADER, PER_PC_HEADER};
use prophet_core::trace::{detect_format, generate_trace, load_trace, write_trace, TraceFormat};
use prophet_core::{Error, Result};

use config::Settings;

#[derive(Parser)]
#[command(name = "prophet", version, about = "Temporal-prefetch profiling and simulation pipeline")]
struct Cli {
    /// Seed override: replaces the trace seed and the randomized-sampling
    /// seed wherever one is used.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// key=value settings file (see README); flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output path; each subcommand has a default artifact name.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trace file.
    GenTrace(GenTraceArgs),
    /// Replay a trace through the simplified profiling configuration and
    /// write per-PC and application counters.
    Profile(ProfileArgs),
    /// Turn a counter file or learned store into a hint manifest.
    Analyze(AnalyzeArgs),
    /// Merge a counter file into a learning store, creating it if absent.
    Learn(LearnArgs),
    /// Run one policy over a trace and emit a report row.
    Simulate(SimulateArgs),
    /// Join report CSVs: aggregate rows, coverage deltas, storage table.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenTraceArgs {
    /// temporal-loop, interleaved-noise, multi-target, pointer-chase,
    /// strided-kernel, or mixed.
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long)]
    unique_addrs: Option<u64>,
    #[arg(long)]
    repetitions: Option<u64>,
    #[arg(long)]
    noise_ratio: Option<f64>,
    /// Splice in L1 stride-prefetcher fill records.
    #[arg(long)]
    l1_stride_prepass: bool,
    /// binary or text.
    #[arg(long, default_value = "binary")]
    format: String,
}

#[derive(Args)]
struct ProfileArgs {
    trace: PathBuf,
    /// Keep every k-th prefetch event; 1 counts exactly.
    #[arg(long, default_value_t = 1)]
    sample_period: u64,
    /// Sample events with probability 1/period instead of every k-th.
    #[arg(long)]
    sample_random: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Counter file or learned store; the header decides which.
    input: PathBuf,
    #[arg(long)]
    el_acc: Option<f64>,
    #[arg(long)]
    n_bits: Option<u32>,
    #[arg(long)]
    llc_sets: Option<u64>,
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Args)]
struct LearnArgs {
    counters: PathBuf,
    /// Store to merge into; missing means start fresh. Updated in place
    /// unless --out names somewhere else.
    #[arg(long)]
    store: PathBuf,
    /// Merge step-size cap, used when creating a store.
    #[arg(long, default_value_t = 8)]
    cap_l: u64,
}

#[derive(Args)]
struct SimulateArgs {
    trace: PathBuf,
    /// nopf, nofilter, patternconf, or prophet.
    #[arg(long)]
    policy: String,
    /// Hint manifest; required by the prophet policy.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    run_id: Option<String>,
    #[arg(long)]
    degree: Option<usize>,
    /// priority-lru, srrip, or lru.
    #[arg(long)]
    replacement: Option<String>,
    #[arg(long)]
    victim_buffer: bool,
    /// per-pc or global.
    #[arg(long)]
    training_scope: Option<String>,
    /// Also write a per-PC breakdown CSV here.
    #[arg(long, value_name = "PATH")]
    per_pc: Option<PathBuf>,
    /// Append the row to an existing report instead of rewriting it.
    #[arg(long)]
    append: bool,
}

#[derive(Args)]
struct ReportArgs {
    inputs: Vec<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(match err {
            Error::Io { .. } => 2,
            Error::BadMagic { .. } => 3,
            Error::Schema { .. } => 4,
            _ => 1,
        });
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    if let Some(seed) = cli.seed {
        settings.trace.seed = seed;
    }
    match cli.command {
        Command::GenTrace(args) => gen_trace(args, settings, cli.out),
        Command::Profile(args) => cmd_profile(args, settings, cli.out),
        Command::Analyze(args) => cmd_analyze(args, settings, cli.out),
        Command::Learn(args) => cmd_learn(args, cli.out),
        Command::Simulate(args) => cmd_simulate(args, settings, cli.out),
        Command::Report(args) => cmd_report(args, cli.out),
    }
}

fn invalid(msg: String) -> Error {
    Error::Config { msg }
}

fn gen_trace(args: GenTraceArgs, mut settings: Settings, out: Option<PathBuf>) -> Result<()> {
    if let Some(p) = &args.pattern {
        settings.trace.pattern = config::pattern(p).map_err(invalid)?;
    }
    if let Some(u) = args.unique_addrs {
        settings.trace.unique_addrs = u;
    }
    if let Some(r) = args.repetitions {
        settings.trace.repetitions = r;
    }
    if let Some(n) = args.noise_ratio {
        settings.trace.noise_ratio = n;
    }
    if args.l1_stride_prepass {
        settings.trace.l1_stride_prepass = true;
    }
    let format = match args.format.as_str() {
        "binary" => TraceFormat::Binary,
        "text" => TraceFormat::Text,
        other => return Err(invalid(format!("unknown format {other:?} (expected binary, text)"))),
    };
    let trace = generate_trace(&settings.trace)?;
    let path = out.unwrap_or_else(|| PathBuf::from("trace.trc"));
    write_trace(&path, format, &trace)?;
    println!("wrote {} accesses (seed {}) to {}", trace.len(), settings.trace.seed, path.display());
    Ok(())
}

fn read_trace(path: &Path) -> Result<Vec<prophet_core::trace::MemoryAccess>> {
    let format = detect_format(path)?;
    load_trace(path, format)
}

fn cmd_profile(args: ProfileArgs, settings: Settings, out: Option<PathBuf>) -> Result<()> {
    let trace = read_trace(&args.trace)?;
    let sampling = if args.sample_random {
        Sampling::Randomized { period: args.sample_period, seed: settings.trace.seed }
    } else {
        Sampling::EveryKth { period: args.sample_period }
    };
    let counters = profile(&trace, &settings.cache, sampling)?;
    let path = out.unwrap_or_else(|| PathBuf::from("profile.cnt"));
    counters.write(&path)?;
    println!("profiled {} pcs to {}", counters.pcs.len(), path.display());
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs, mut settings: Settings, out: Option<PathBuf>) -> Result<()> {
    if let Some(v) = args.el_acc {
        settings.analysis.el_acc = v;
    }
    if let Some(v) = args.n_bits {
        settings.analysis.n_bits = v;
    }
    if let Some(v) = args.llc_sets {
        settings.analysis.llc_sets = v;
    }
    if let Some(v) = args.top_k {
        settings.analysis.top_k = v;
    }
    let input = AnalysisInput::load(&args.input)?;
    let manifest = analyze(&input, &settings.analysis)?;
    let path = out.unwrap_or_else(|| PathBuf::from("hints.man"));
    manifest.write(&path)?;
    println!(
        "wrote {} hints (prefetcher {}) to {}",
        manifest.entries.len(),
        if manifest.csr.prophet_enabled { "enabled" } else { "disabled" },
        path.display()
    );
    Ok(())
}

fn cmd_learn(args: LearnArgs, out: Option<PathBuf>) -> Result<()> {
    let counters = CounterFile::load(&args.counters)?;
    let mut store = if args.store.exists() {
        CounterStore::load(&args.store)?
    } else {
        CounterStore::new(args.cap_l)?
    };
    store.learn(&counters);
    let path = out.unwrap_or(args.store);
    store.write(&path)?;
    println!("store at loop {} with {} pcs: {}", store.loop_l, store.per_pc.len(), path.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, mut settings: Settings, out: Option<PathBuf>) -> Result<()> {
    let policy = Policy::parse(&args.policy)?;
    if let Some(d) = args.degree {
        settings.engine.degree = d;
    }
    if let Some(r) = &args.replacement {
        settings.engine.replacement_mode = config::replacement_mode(r).map_err(invalid)?;
    }
    if args.victim_buffer {
        settings.engine.victim_buffer_enabled = true;
    }
    if let Some(s) = &args.training_scope {
        settings.engine.training_scope = config::training_scope(s).map_err(invalid)?;
    }
    let manifest = match &args.manifest {
        Some(path) => Some(HintManifest::load(path)?),
        None => None,
    };
    if policy == Policy::Prophet && manifest.is_none() {
        return Err(invalid("the prophet policy requires --manifest <path>".into()));
    }
    let trace = read_trace(&args.trace)?;
    let seed = settings.trace.seed;
    let cfg = SimConfig {
        run_id: args.run_id.unwrap_or_else(|| format!("{}-s{seed}", policy.name())),
        seed,
        cache: settings.cache,
        engine: settings.engine,
        policy,
    };
    let (report, per_pc) = simulate_detailed(&cfg, &trace, manifest.as_ref())?;

    let path = out.unwrap_or_else(|| PathBuf::from("report.csv"));
    if args.append && path.exists() {
        let mut file = fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        writeln!(file, "{}", report.csv_row()).map_err(|e| Error::io(&path, e))?;
    } else {
        fs::write(&path, format!("{CSV_HEADER}\n{}\n", report.csv_row()))
            .map_err(|e| Error::io(&path, e))?;
    }
    if let Some(pc_path) = &args.per_pc {
        let mut doc = String::from(PER_PC_HEADER);
        doc.push('\n');
        for row in &per_pc {
            doc.push_str(&row.csv_row());
            doc.push('\n');
        }
        fs::write(pc_path, doc).map_err(|e| Error::io(pc_path, e))?;
    }
    println!(
        "{}: coverage {:.6} accuracy {:.6} ({} misses / {} baseline) -> {}",
        report.run_id,
        report.coverage,
        report.accuracy,
        report.demand_misses,
        report.baseline_misses,
        path.display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs, out: Option<PathBuf>) -> Result<()> {
    if args.inputs.is_empty() {
        return Err(invalid("report needs at least one input CSV".into()));
    }
    let mut rows: Vec<ReportRow> = Vec::new();
    for path in &args.inputs {
        rows.extend(load_report(path)?);
    }
    let doc = format!("{}\n{}", aggregate_csv(&rows), summarize(&rows));
    match out {
        Some(path) => fs::write(&path, doc).map_err(|e| Error::io(&path, e))?,
        None => print!("{doc}"),
    }
    Ok(())
}
