use std::fs::OpenOptions;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bridgewatch::checker::{Attribution, BugClass, CheckOptions};
use bridgewatch::ingest::{load_config, BridgeConfig, MatchingMode, Strictness, CONFIG_ENV};
use bridgewatch::monitor::{replay_log, Monitor};
use bridgewatch::pipeline::{self, Input};
use bridgewatch::report::{self, AddressQuery, Format, Report, SortKey, View, DEFAULT_CLUSTER_GAP};
use bridgewatch::sim::{gen_dataset, ScenarioSpec};

const EXIT_CLEAN: u8 = 0;
const EXIT_FOUND: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "bridgewatch", version, about = "Detect attacks on cross-chain bridges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check historical traces and relayer logs; exits 1 when violations are found.
    Analyze(AnalyzeArgs),
    /// Screen pending unlocks read from stdin, one request per line.
    Monitor(MonitorArgs),
    /// Generate a labeled dataset from a scenario file.
    Simulate(SimulateArgs),
    /// Re-run a monitor decision log and check every decision is reproduced.
    ReplayLog(ReplayArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Bridge config file.
    #[arg(long, env = CONFIG_ENV)]
    config: PathBuf,
    /// Override the config's deposit-to-lock matching mode.
    #[arg(long, value_parser = parse_matching)]
    matching: Option<MatchingMode>,
    /// Report cascaded failures too, not only root causes.
    #[arg(long)]
    exhaustive: bool,
}

impl ConfigArgs {
    fn load(&self) -> Result<(BridgeConfig, CheckOptions), String> {
        let mut cfg = load_config(&self.config).map_err(|e| e.to_string())?;
        if let Some(m) = self.matching {
            cfg.matching_mode = m;
        }
        let mut opts = CheckOptions::from_config(&cfg);
        if self.exhaustive {
            opts.attribution = Attribution::Exhaustive;
        }
        Ok((cfg, opts))
    }
}

fn parse_matching(s: &str) -> Result<MatchingMode, String> {
    s.parse::<MatchingMode>().map_err(|e| e.to_string())
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Chain trace files.
    #[arg(long = "trace", required = true)]
    traces: Vec<PathBuf>,
    /// Relayer action logs.
    #[arg(long = "actions")]
    actions: Vec<PathBuf>,
    /// Skip malformed lines instead of failing.
    #[arg(long)]
    lenient: bool,
    #[arg(long, default_value = "jsonl")]
    format: String,
    /// Only this bug class: UDE, IEP or UU.
    #[arg(long)]
    bug: Option<String>,
    #[arg(long)]
    from_block: Option<u64>,
    #[arg(long)]
    to_block: Option<u64>,
    /// Address as 0x.. or chain:0x..
    #[arg(long)]
    address: Option<String>,
    /// Transaction hash.
    #[arg(long)]
    tx: Option<String>,
    /// block, tx or bug.
    #[arg(long, default_value = "block")]
    sort: String,
    /// Largest block distance inside one cluster.
    #[arg(long, default_value_t = DEFAULT_CLUSTER_GAP)]
    cluster_gap: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MonitorArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Append each decision with its request to this file.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    log: PathBuf,
}

fn view_of(a: &AnalyzeArgs) -> Result<View, String> {
    let view = View {
        bug: a.bug.as_deref().map(str::parse::<BugClass>).transpose()?,
        from_block: a.from_block,
        to_block: a.to_block,
        address: a.address.as_deref().map(AddressQuery::parse).transpose().map_err(|e| e.to_string())?,
        tx: a.tx.as_deref().map(View::parse_tx).transpose().map_err(|e| e.to_string())?,
        sort: a.sort.parse::<SortKey>().map_err(|e| e.to_string())?,
    };
    view.validate().map_err(|e| e.to_string())?;
    Ok(view)
}

fn analyze(a: AnalyzeArgs) -> Result<u8, String> {
    let view = view_of(&a)?;
    let format: Format = a.format.parse().map_err(|e: report::ReportError| e.to_string())?;
    let (cfg, opts) = a.config.load()?;
    let input = Input {
        trace_files: a.traces,
        action_logs: a.actions,
        strictness: if a.lenient { Strictness::Lenient } else { Strictness::Strict },
    };
    let analysis = pipeline::analyze(&input, &cfg, opts).map_err(|e| e.to_string())?;
    for (path, w) in &analysis.warnings {
        eprintln!("warning: {}:{}: {}", path.display(), w.line, w.msg);
    }
    let found = !analysis.violations.is_empty();
    let report = Report::new(analysis.violations, analysis.input_digest, a.cluster_gap, analysis.dropped).view(&view);
    let text = report::render(&report, format);
    match &a.output {
        Some(p) => bridgewatch::atomic_write(p, text.as_bytes()).map_err(|e| format!("{}: {e}", p.display()))?,
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string())?,
    }
    Ok(if found { EXIT_FOUND } else { EXIT_CLEAN })
}

fn monitor(a: MonitorArgs) -> Result<u8, String> {
    let (cfg, opts) = a.config.load()?;
    let mut m = Monitor::new(cfg, opts);
    if let Some(p) = &a.log {
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(p)
            .map_err(|e| format!("{}: {e}", p.display()))?;
        m = m.with_log(Box::new(f));
    }
    let stdin = io::stdin();
    m.serve(stdin.lock(), io::stdout().lock()).map_err(|e| e.to_string())?;
    Ok(EXIT_CLEAN)
}

fn simulate(a: SimulateArgs) -> Result<u8, String> {
    let text = std::fs::read_to_string(&a.spec).map_err(|e| format!("{}: {e}", a.spec.display()))?;
    let spec = ScenarioSpec::from_json(&text).map_err(|e| e.to_string())?;
    let ds = gen_dataset(&spec).map_err(|e| e.to_string())?;
    let written = ds.write(&a.out).map_err(|e| e.to_string())?;
    for p in &written {
        println!("wrote {}", p.display());
    }
    for (class, n) in ds.summary() {
        println!("{class} {n}");
    }
    Ok(EXIT_CLEAN)
}

fn replay(a: ReplayArgs) -> Result<u8, String> {
    let (cfg, opts) = a.config.load()?;
    let f = std::fs::File::open(&a.log).map_err(|e| format!("{}: {e}", a.log.display()))?;
    let out = replay_log(BufReader::new(f), &cfg, opts).map_err(|e| e.to_string())?;
    println!("{} decisions replayed, {} mismatched", out.entries, out.mismatches.len());
    for line in &out.mismatches {
        println!("mismatch at {}:{line}", display(&a.log));
    }
    Ok(if out.mismatches.is_empty() { EXIT_CLEAN } else { EXIT_FOUND })
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Monitor(a) => monitor(a),
        Command::Simulate(a) => simulate(a),
        Command::ReplayLog(a) => replay(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
