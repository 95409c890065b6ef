//! Command-line front end: one subcommand per experiment, parameters from an
//! optional TOML scenario file with flags taking precedence.

mod metrics;
mod scenario_file;

pub use metrics::{write_metrics_csv, MetricsError};
pub use scenario_file::{BenchSection, MirrorSection, PilotSection, SadrSection, ScenarioFile, ScenarioFileError};

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use thiserror::Error;

use crate::broker::{run_broker, BrokerHandle, StatsSnapshot};
use crate::mqtt::QoS;
use crate::netsim::{run_mirror_experiment, MirrorConfig, MirrorTickRow, RateSchedule};
use crate::pilotguard::{run_pilot_scenario, PilotConfig, PilotScenarioConfig, PilotScenarioReport, RedeployTiming};
use crate::sadr::{run_escalating_scenario, Arm, EscalationConfig, InstanceReward, RemoteTwin, TwinService};
use crate::twinlink::{run_latency_bench, BenchConfig, LatencyReport, Link, LinkConfig};

pub const DEFAULT_SEED: u64 = 42;

pub const BROKER_STATS_CSV: &str = "broker_stats.csv";
pub const BENCH_CSV: &str = "bench_latency.csv";
pub const MIRROR_TICKS_CSV: &str = "mirror_ticks.csv";
pub const MIRROR_CHANGES_CSV: &str = "mirror_changes.csv";
pub const SADR_REWARDS_CSV: &str = "sadr_rewards.csv";
pub const SADR_CUMULATIVE_CSV: &str = "sadr_cumulative.csv";
pub const PILOT_ACCURACY_CSV: &str = "pilot_accuracy.csv";
pub const PILOT_TIMING_CSV: &str = "pilot_timing.csv";

pub const MIRROR_CHANGE_COLUMNS: [&str; 5] = ["tick", "t_s", "real_pps", "twin_pps", "delay_ms"];

#[derive(Debug, Parser)]
#[command(name = "twinet", version, about = "Real-world / digital-twin link experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Seed for every random choice [default: network.seed from the
    /// scenario file, else 42].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for CSV output.
    #[arg(long = "out", global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// TOML scenario file.
    #[arg(long = "config", global = true, value_name = "TOML")]
    pub scenario_file: Option<PathBuf>,
    /// Use a running broker instead of starting one in-process.
    #[arg(long, global = true)]
    pub broker: Option<SocketAddr>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Serve as a standalone broker until Ctrl-C or --duration elapses.
    Broker {
        #[arg(long, default_value = "127.0.0.1:1883")]
        bind: String,
        /// Seconds to serve before exiting.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// One-way latency in both directions across payload sizes.
    Bench {
        /// Payload sizes in bytes, comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        warmup: Option<usize>,
        #[arg(long)]
        primers: Option<usize>,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        qos: Option<u8>,
    },
    /// Mirror a real cell's rate changes into its twin.
    Mirror {
        /// Simulated seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Number of rate changes after the initial rate.
        #[arg(long)]
        changes: Option<usize>,
        /// Wall-clock milliseconds per simulated tick.
        #[arg(long)]
        wall_tick_ms: Option<f64>,
    },
    /// Escalating-demand scenario with and without twin gating.
    Sadr {
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        dwell_ticks: Option<usize>,
        #[arg(long, group = "arm")]
        gated: bool,
        #[arg(long, group = "arm")]
        ungated: bool,
        #[arg(long, group = "arm")]
        both: bool,
    },
    /// Jamming detection, pilot relocation and model redeployment.
    Pilot {
        #[arg(long, value_enum)]
        scenario: Option<PilotChoice>,
        /// Seeds per scenario, counting up from --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Broker { .. } => "broker",
            Command::Bench { .. } => "bench",
            Command::Mirror { .. } => "mirror",
            Command::Sadr { .. } => "sadr",
            Command::Pilot { .. } => "pilot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PilotChoice {
    #[value(name = "10mhz")]
    Mhz10,
    #[value(name = "20mhz")]
    Mhz20,
    #[value(name = "40mhz")]
    Mhz40,
    All,
}

impl PilotChoice {
    pub fn configs(self) -> Vec<PilotConfig> {
        match self {
            PilotChoice::Mhz10 => vec![PilotConfig::mhz10()],
            PilotChoice::Mhz20 => vec![PilotConfig::mhz20()],
            PilotChoice::Mhz40 => vec![PilotConfig::mhz40()],
            PilotChoice::All => PilotConfig::presets().to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub scenario_file: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub broker: Option<SocketAddr>,
}

impl From<Cli> for RunConfig {
    fn from(cli: Cli) -> Self {
        Self {
            command: cli.command,
            scenario_file: cli.common.scenario_file,
            seed: cli.common.seed,
            out_dir: cli.common.out_dir,
            broker: cli.common.broker,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    ScenarioFile(#[from] ScenarioFileError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot create output directory {path}: {source}")]
    OutDir { path: String, source: std::io::Error },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{context}: {message}")]
    Run { context: &'static str, message: String },
}

fn run_err<E: std::fmt::Display>(context: &'static str) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Run {
        context,
        message: e.to_string(),
    }
}

/// What a command did: human-readable findings and the files it wrote.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    pub lines: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl Summary {
    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    fn write<S: AsRef<str>>(&mut self, out: &Path, name: &str, schema: &[&str], rows: &[Vec<S>]) -> Result<(), CliError> {
        let path = out.join(name);
        write_metrics_csv(rows, schema, &path)?;
        self.artifacts.push(path);
        Ok(())
    }
}

/// A broker to talk through: either the one given on the command line or a
/// private in-process one that is shut down afterwards.
struct BrokerSite {
    addr: SocketAddr,
    local: Option<BrokerHandle>,
}

impl BrokerSite {
    fn open(external: Option<SocketAddr>) -> Result<Self, CliError> {
        match external {
            Some(addr) => Ok(Self { addr, local: None }),
            None => {
                let h = run_broker("127.0.0.1:0").map_err(run_err("starting in-process broker"))?;
                Ok(Self {
                    addr: h.local_addr(),
                    local: Some(h),
                })
            }
        }
    }

    fn close(self) {
        if let Some(h) = self.local {
            h.shutdown();
        }
    }
}

pub fn run_command(config: &RunConfig) -> Result<Summary, CliError> {
    let file = match &config.scenario_file {
        Some(p) => ScenarioFile::load(p)?,
        None => ScenarioFile::default(),
    };
    let mut network = file.network.clone().unwrap_or_default();
    if let Some(seed) = config.seed {
        network.seed = seed;
    } else if file.network.is_none() {
        network.seed = DEFAULT_SEED;
    }
    network.validate().map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::create_dir_all(&config.out_dir).map_err(|source| CliError::OutDir {
        path: config.out_dir.display().to_string(),
        source,
    })?;
    let out = config.out_dir.as_path();
    info!("{} with seed {}, output in {}", config.command.name(), network.seed, out.display());

    match &config.command {
        Command::Broker { bind, duration } => run_broker_command(bind, *duration, out),
        Command::Bench {
            sizes,
            samples,
            warmup,
            primers,
            qos,
        } => {
            let b = &file.bench;
            let mut cfg = BenchConfig {
                seed: network.seed,
                ..BenchConfig::default()
            };
            if let Some(s) = sizes.clone().or_else(|| b.sizes.clone()) {
                cfg.sizes = s;
            }
            if let Some(n) = samples.or(b.samples) {
                cfg.samples_per_size = n;
            }
            if let Some(n) = warmup.or(b.warmup) {
                cfg.warmup = n;
            }
            if let Some(n) = primers.or(b.primers) {
                cfg.primers = n;
            }
            if let Some(q) = qos.or(b.qos) {
                cfg.qos = QoS::from_u8(q).map_err(|e| CliError::Config(e.to_string()))?;
            }
            if cfg.sizes.is_empty() || cfg.samples_per_size == 0 {
                return Err(CliError::Config("bench needs at least one size and one sample".into()));
            }
            run_bench_command(&cfg, config.broker, out)
        }
        Command::Mirror {
            duration,
            changes,
            wall_tick_ms,
        } => {
            let m = &file.mirror;
            let mut cfg = MirrorConfig {
                scenario: network,
                ..MirrorConfig::default()
            };
            if let Some(d) = duration.or(m.duration_s) {
                cfg.duration_s = d;
            }
            if !(cfg.duration_s.is_finite() && cfg.duration_s > 0.0) {
                return Err(CliError::Config(format!("mirror duration must be positive, got {}", cfg.duration_s)));
            }
            let changes = changes.or(m.changes);
            cfg.schedule = match (&m.schedule, changes) {
                (Some(s), None) => s.clone(),
                (_, Some(n)) => RateSchedule::evenly_spaced(cfg.duration_s, n),
                // the stock schedule unless the run length was changed
                (None, None) if duration.is_none() && m.duration_s.is_none() => RateSchedule::six_changes(),
                (None, None) => RateSchedule::evenly_spaced(cfg.duration_s, 6),
            };
            if let Some(ms) = wall_tick_ms.or(m.wall_tick_ms) {
                if !(ms.is_finite() && ms >= 0.0) {
                    return Err(CliError::Config(format!("wall tick must be non-negative, got {ms}")));
                }
                cfg.wall_tick = Duration::from_secs_f64(ms / 1000.0);
            }
            run_mirror_command(&cfg, config.broker, out)
        }
        Command::Sadr {
            reps,
            dwell_ticks,
            gated,
            ungated,
            both: _,
        } => {
            let s = &file.sadr;
            let mut cfg = EscalationConfig::for_scenario(network).map_err(|e| CliError::Config(e.to_string()))?;
            if let Some(n) = reps.or(s.reps) {
                cfg.repetitions = n;
            }
            if let Some(n) = dwell_ticks.or(s.dwell_ticks) {
                cfg.dwell_ticks = n;
            }
            if let Some(v) = s.risk_threshold {
                cfg.sadr.risk_threshold = v;
            }
            if let Some(v) = s.app_requirements {
                cfg.sadr.app_requirements = v;
            }
            if let Some(v) = &s.safe_setup {
                cfg.sadr.safe_setup = v.clone();
            }
            if let Some(v) = s.horizon_ticks {
                cfg.sadr.twin_horizon_ticks = v;
            }
            if let Some(v) = &s.instances {
                cfg.instances = v.clone();
            }
            cfg.arms = match (gated, ungated) {
                (true, _) => vec![Arm::Gated],
                (_, true) => vec![Arm::Ungated],
                _ => vec![Arm::Gated, Arm::Ungated],
            };
            cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
            run_sadr_command(&cfg, config.broker, out)
        }
        Command::Pilot { scenario, seeds } => {
            let p = &file.pilot;
            let pilots = match (scenario, &p.scenarios) {
                (Some(c), _) => c.configs(),
                (None, Some(names)) => names
                    .iter()
                    .map(|n| PilotConfig::scenario(n))
                    .collect::<Result<_, _>>()
                    .map_err(|e| CliError::Config(e.to_string()))?,
                (None, None) => PilotChoice::All.configs(),
            };
            if *seeds == 0 {
                return Err(CliError::Config("--seeds must be at least 1".into()));
            }
            let template = {
                let mut t = PilotScenarioConfig::new(PilotConfig::mhz10(), network.seed);
                if let Some(n) = p.n_train {
                    t.factory.n_train = n;
                }
                if let Some(n) = p.n_test {
                    t.factory.n_test = n;
                }
                if let Some(v) = p.learning_rate {
                    t.factory.hyper.learning_rate = v;
                }
                if let Some(n) = p.iterations {
                    t.factory.hyper.iterations = n;
                }
                if let Some(n) = p.clean_frames {
                    t.clean_frames = n;
                }
                if let Some(n) = p.jammed_frames {
                    t.jammed_frames = n;
                }
                t
            };
            run_pilot_command(&template, &pilots, *seeds, config.broker, out)
        }
    }
}

fn run_broker_command(bind: &str, duration: Option<f64>, out: &Path) -> Result<Summary, CliError> {
    let handle = run_broker(bind).map_err(run_err("starting broker"))?;
    info!("broker listening on {}", handle.local_addr());
    let (tx, rx) = crossbeam_channel::bounded::<()>(1);
    if let Err(e) = ctrlc::set_handler(move || {
        let _ = tx.try_send(());
    }) {
        warn!("cannot install Ctrl-C handler: {e}");
    }
    match duration {
        Some(s) if s.is_finite() && s >= 0.0 => {
            let _ = rx.recv_timeout(Duration::from_secs_f64(s));
        }
        Some(s) => return Err(CliError::Config(format!("broker duration must be non-negative, got {s}"))),
        None => {
            let _ = rx.recv();
        }
    }
    let stats = handle.shutdown();
    let mut summary = Summary::default();
    summary.line(format!(
        "served {} connections, {} publishes, {} deliveries",
        stats.connections, stats.publishes_received, stats.deliveries
    ));
    summary.write(out, BROKER_STATS_CSV, &StatsSnapshot::CSV_COLUMNS, &[stats.csv_row()])?;
    Ok(summary)
}

fn run_bench_command(cfg: &BenchConfig, broker: Option<SocketAddr>, out: &Path) -> Result<Summary, CliError> {
    let site = BrokerSite::open(broker)?;
    let reports = (|| {
        let real = Link::connect(site.addr, LinkConfig::new("bench-real"))?;
        let twin = Link::connect(site.addr, LinkConfig::new("bench-twin"))?;
        run_latency_bench(&real, &twin, cfg)
    })()
    .map_err(run_err("latency bench"));
    site.close();
    let reports = reports?;

    let mut summary = Summary::default();
    for r in &reports {
        summary.line(format!(
            "{:>9} B {:<13} mean {:.4} ms  p50 {:.4} ms  p99 {:.4} ms",
            r.payload_size,
            r.direction.label(),
            r.mean_ms,
            r.p50_ms,
            r.p99_ms
        ));
    }
    let rows: Vec<_> = reports.iter().map(LatencyReport::csv_row).collect();
    summary.write(out, BENCH_CSV, &LatencyReport::CSV_COLUMNS, &rows)?;
    Ok(summary)
}

fn run_mirror_command(cfg: &MirrorConfig, broker: Option<SocketAddr>, out: &Path) -> Result<Summary, CliError> {
    let site = BrokerSite::open(broker)?;
    let report = run_mirror_experiment(site.addr, cfg).map_err(run_err("mirror experiment"));
    site.close();
    let report = report?;

    let mut summary = Summary::default();
    summary.line(format!("ticks mirrored: {}/{}", report.applied, report.ticks));
    summary.line(format!("rate changes: {}", report.changes.len()));
    summary.line(format!("twin rates match: {}", report.rates_match));
    summary.line(format!("stale/duplicate applications: {}", report.duplicate_applications()));
    summary.line(format!("mean change delay: {:.3} ms", report.mean_change_delay_ms));
    let ticks: Vec<_> = report.rows.iter().map(MirrorTickRow::csv_row).collect();
    summary.write(out, MIRROR_TICKS_CSV, &MirrorTickRow::CSV_COLUMNS, &ticks)?;
    let changes: Vec<_> = report
        .changes
        .iter()
        .map(|c| {
            vec![
                c.tick.to_string(),
                format!("{:.3}", c.t_s),
                format!("{:.1}", c.real_pps),
                format!("{:.1}", c.twin_pps),
                format!("{:.4}", c.delay_ms),
            ]
        })
        .collect();
    summary.write(out, MIRROR_CHANGES_CSV, &MIRROR_CHANGE_COLUMNS, &changes)?;
    Ok(summary)
}

fn run_sadr_command(cfg: &EscalationConfig, broker: Option<SocketAddr>, out: &Path) -> Result<Summary, CliError> {
    let site = BrokerSite::open(broker)?;
    let result = (|| {
        let service = TwinService::spawn(site.addr, cfg.twin_scenario())?;
        let mut twin = RemoteTwin::connect(site.addr, "sadr-controller", Duration::from_secs(2))?;
        let report = run_escalating_scenario(cfg, &mut twin);
        drop(twin);
        let served = service.stop();
        Ok::<_, Box<dyn std::error::Error>>((report?, served))
    })()
    .map_err(run_err("escalation scenario"));
    site.close();
    let (report, served) = result?;

    let mut summary = Summary::default();
    summary.line(format!("app requirement: {:.4}", cfg.sadr.app_requirements));
    summary.line(format!(
        "twin evaluations served: {served}, fallbacks: {}",
        report.fallbacks
    ));
    if cfg.arms.contains(&Arm::Gated) && cfg.arms.contains(&Arm::Ungated) {
        let n = cfg.instances.len();
        summary.line(format!("gain, top third: {:+.1}%", 100.0 * report.relative_gain(n - n / 3..n)));
        summary.line(format!("gain, bottom third: {:+.1}%", 100.0 * report.relative_gain(0..n / 3)));
    }
    let rows: Vec<_> = report.rows.iter().map(InstanceReward::csv_row).collect();
    summary.write(out, SADR_REWARDS_CSV, &InstanceReward::CSV_COLUMNS, &rows)?;
    let rows: Vec<_> = report.rows.iter().map(InstanceReward::cumulative_csv_row).collect();
    summary.write(out, SADR_CUMULATIVE_CSV, &InstanceReward::CUMULATIVE_CSV_COLUMNS, &rows)?;
    Ok(summary)
}

fn run_pilot_command(
    template: &PilotScenarioConfig,
    pilots: &[PilotConfig],
    seeds: u64,
    broker: Option<SocketAddr>,
    out: &Path,
) -> Result<Summary, CliError> {
    let site = BrokerSite::open(broker)?;
    let mut summary = Summary::default();
    let mut accuracy = Vec::new();
    let mut timing = Vec::new();
    let mut failure = None;
    'outer: for p in pilots {
        for i in 0..seeds {
            let seed = template.seed.wrapping_add(i);
            let cfg = PilotScenarioConfig {
                pilots: p.clone(),
                seed,
                ..template.clone()
            };
            let report = match run_pilot_scenario(site.addr, &cfg) {
                Ok(r) => r,
                Err(e) => {
                    failure = Some(run_err("pilot scenario")(format!("{} seed {seed}: {e}", p.label())));
                    break 'outer;
                }
            };
            summary.line(pilot_line(&report, seed));
            accuracy.push(report.table_row(seed));
            timing.push(report.redeploy.timing.csv_row());
        }
    }
    site.close();
    if let Some(e) = failure {
        return Err(e);
    }
    summary.write(out, PILOT_ACCURACY_CSV, &PilotScenarioReport::TABLE_COLUMNS, &accuracy)?;
    summary.write(out, PILOT_TIMING_CSV, &RedeployTiming::CSV_COLUMNS, &timing)?;
    Ok(summary)
}

fn pilot_line(r: &PilotScenarioReport, seed: u64) -> String {
    let after = match &r.post_swap {
        Some(e) => format!("jam at subcarrier {} detected", e.pilot_subcarrier),
        None => format!("jam at subcarrier {} MISSED", r.jammed_subcarrier_after),
    };
    format!(
        "{} seed {seed}: pilots {:?} -> {:?}, test accuracy {:.4}, total {:.3} s, {after}, mixed deployments {}",
        r.new_pilots.label(),
        r.initial_pilots.pilot_indices(),
        r.new_pilots.pilot_indices(),
        r.redeploy.test_accuracy,
        r.redeploy.timing.total_deployment_s,
        r.mixed_deployments
    )
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("TWINET_LOG", "info");
    let _ = env_logger::Builder::from_env(env).format_timestamp_millis().try_init();
}

/// Parse `args` (including the program name), run the command and report.
/// Usage errors exit with clap's status; run failures exit with 1.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    init_logging();
    match run_command(&cli.into()) {
        Ok(summary) => {
            for l in &summary.lines {
                println!("{l}");
            }
            for a in &summary.artifacts {
                println!("wrote {}", a.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("twinet: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("twinet").chain(args.iter().copied()))
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn global_flags_after_subcommand() {
        let cli = parse(&["bench", "--sizes", "1,100", "--seed", "7", "--out", "x"]).unwrap();
        let rc = RunConfig::from(cli);
        assert_eq!(rc.seed, Some(7));
        assert_eq!(rc.out_dir, PathBuf::from("x"));
        match rc.command {
            Command::Bench { sizes, .. } => assert_eq!(sizes, Some(vec![1, 100])),
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn arm_flags_are_exclusive() {
        assert!(parse(&["sadr", "--gated", "--ungated"]).is_err());
        assert!(parse(&["sadr", "--both"]).is_ok());
    }

    #[test]
    fn unknown_command_and_bad_values_are_rejected() {
        assert!(parse(&["teleport"]).is_err());
        assert!(parse(&[]).is_err());
        assert!(parse(&["pilot", "--scenario", "80mhz"]).is_err());
        assert!(parse(&["bench", "--qos", "2"]).is_err());
        assert_ne!(main_with_args(["twinet", "teleport"]), ExitCode::SUCCESS);
    }

    #[test]
    fn pilot_choices_map_to_presets() {
        assert_eq!(PilotChoice::Mhz20.configs(), vec![PilotConfig::mhz20()]);
        assert_eq!(PilotChoice::All.configs().len(), 3);
    }

    #[test]
    fn broker_command_writes_stats() {
        let dir = tempfile::tempdir().unwrap();
        let rc = RunConfig {
            command: Command::Broker {
                bind: "127.0.0.1:0".into(),
                duration: Some(0.0),
            },
            scenario_file: None,
            seed: None,
            out_dir: dir.path().to_path_buf(),
            broker: None,
        };
        let s = run_command(&rc).unwrap();
        let text = std::fs::read_to_string(&s.artifacts[0]).unwrap();
        assert_eq!(
            text,
            "connections,publishes_received,deliveries,payload_bytes_in,payload_bytes_out\n0,0,0,0,0\n"
        );
    }

    #[test]
    fn missing_scenario_file_is_a_config_error() {
        let rc = RunConfig {
            command: Command::Mirror {
                duration: None,
                changes: None,
                wall_tick_ms: None,
            },
            scenario_file: Some("/nonexistent/desk.toml".into()),
            seed: None,
            out_dir: std::env::temp_dir(),
            broker: None,
        };
        assert!(matches!(run_command(&rc), Err(CliError::ScenarioFile(_))));
    }

    #[test]
    fn mirror_defaults_to_six_changes_over_a_minute() {
        let dir = tempfile::tempdir().unwrap();
        let rc = RunConfig {
            command: Command::Mirror {
                duration: None,
                changes: None,
                wall_tick_ms: Some(0.0),
            },
            scenario_file: None,
            seed: Some(3),
            out_dir: dir.path().to_path_buf(),
            broker: None,
        };
        run_command(&rc).unwrap();
        let changes = std::fs::read_to_string(dir.path().join(MIRROR_CHANGES_CSV)).unwrap();
        assert_eq!(changes.lines().count(), 1 + 6);
        let ticks = std::fs::read_to_string(dir.path().join(MIRROR_TICKS_CSV)).unwrap();
        assert_eq!(ticks.lines().count(), 1 + 600 * 3);
    }
}
