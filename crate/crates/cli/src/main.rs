use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use moasscope::ingest::{parse_mrt_rib, render_normalized};
use moasscope::lifetime::{brute_force_knee, kneedle_knee};
use moasscope::synth::{generate, Scenario};
use moasscope::Family;
use moasscope_cli::analysis::{self, lifetime_knee, read_curve, read_lifetimes};
use moasscope_cli::config::{usage, Overrides};
use moasscope_cli::output::f6;
use moasscope_cli::{detect, report, RunConfig, UsageError};

#[derive(Parser)]
#[command(name = "moasscope", version, about = "Long-lived MOAS prefix detection from BGP RIB snapshots")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode an MRT RIB dump into normalized JSONL
    Convert {
        input: PathBuf,
        /// Collector name stamped on every record
        #[arg(long)]
        collector: String,
        /// Output file; standard output when omitted
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Align, filter and detect MOAS per snapshot into the observation store
    Detect {
        #[arg(long, hide = true)]
        shuffle_seed: Option<u64>,
    },
    /// Compute lifetimes and observability per MOAS prefix
    Lifetime,
    /// Knee of the lifetime CDF
    Knee {
        /// Lifetimes CSV; defaults to <out>/lifetimes.csv
        #[arg(long)]
        lifetimes: Option<PathBuf>,
        /// Only this address family (v4 or v6)
        #[arg(long)]
        family: Option<Family>,
        /// Read a raw `x,y` curve instead of lifetimes
        #[arg(long, conflicts_with_all = ["lifetimes", "family"])]
        curve: Option<PathBuf>,
    },
    /// Route origin validation of long-lived MOAS prefixes
    Rpki,
    /// Profiles of long-lived MOAS prefixes on the analysis days
    Enrich,
    /// Figure tables and row-count reconciliation
    Report {
        /// Emit only this figure
        #[arg(long)]
        figure: Option<String>,
    },
    /// Generate a synthetic dataset with a ground-truth manifest
    Synth {
        /// Scenario JSON
        scenario: PathBuf,
    },
    /// detect, lifetime, rpki, enrich and report in one go
    Run {
        #[arg(long, hide = true)]
        shuffle_seed: Option<u64>,
    },
}

fn convert(input: &Path, collector: &str, output: Option<&Path>) -> anyhow::Result<u8> {
    let reader = moasscope::io::open_input(input).with_context(|| format!("opening {}", input.display()))?;
    let (records, stats) = parse_mrt_rib(reader, collector)?;
    let text = render_normalized(&records);
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    log::info!(
        "{} entries: {} emitted, {} AS-set origins, {} malformed",
        stats.total,
        stats.emitted,
        stats.as_set_origins,
        stats.malformed
    );
    Ok(0)
}

fn knee(cfg: &RunConfig, lifetimes: Option<PathBuf>, family: Option<Family>, curve: Option<PathBuf>) -> anyhow::Result<u8> {
    let kc = cfg.knee_config();
    if let Some(path) = curve {
        let pts = read_curve(&path)?;
        return match (kneedle_knee(&pts, &kc), brute_force_knee(&pts)) {
            (Ok(k), Ok(o)) => {
                println!("knee={}", f6(k));
                println!("oracle={}", f6(o));
                Ok(0)
            }
            (Err(e), _) | (_, Err(e)) => {
                println!("no knee ({e})");
                Ok(1)
            }
        };
    }
    let path = lifetimes.unwrap_or_else(|| cfg.out.join("lifetimes.csv"));
    if !path.is_file() {
        return Err(usage(format!("{} not found; run `lifetime` first", path.display())));
    }
    let l = read_lifetimes(&path, family)?;
    match lifetime_knee(&l, &kc) {
        Ok(k) => {
            println!("knee_days={}", f6(k.knee));
            println!("oracle_days={}", f6(k.oracle));
            println!("short_fraction={}", f6(k.short_fraction));
            println!("long_fraction={}", f6(k.long_fraction));
            println!("population={}", k.population);
            Ok(0)
        }
        Err(e) => {
            println!("no knee ({e})");
            Ok(1)
        }
    }
}

fn synth(cfg: &RunConfig, scenario: &Path) -> anyhow::Result<u8> {
    let text = std::fs::read_to_string(scenario).with_context(|| format!("reading {}", scenario.display()))?;
    let sc: Scenario = serde_json::from_str(&text).map_err(|e| usage(format!("bad scenario: {e}")))?;
    let generated = generate(&sc).map_err(|e| usage(e.to_string()))?;
    generated.write(&cfg.out)?;
    eprintln!(
        "wrote {} RIB files, {} records, {} MOAS prefixes to {}",
        generated.ribs.len(),
        generated.manifest.records,
        generated.manifest.moas_prefixes().count(),
        cfg.out.display()
    );
    Ok(0)
}

fn run_report(cfg: &RunConfig, figure: Option<&str>) -> anyhow::Result<u8> {
    let outcome = report::report(cfg, figure)?;
    for w in &outcome.written {
        log::info!("wrote {w}");
    }
    if outcome.failures > 0 {
        eprintln!("{} reconciliation checks failed; see reconciliation.csv", outcome.failures);
        return Ok(1);
    }
    Ok(0)
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    let cfg = RunConfig::resolve(&cli.overrides)?;
    match cli.command {
        Command::Convert { input, collector, output } => convert(&input, &collector, output.as_deref()),
        Command::Detect { shuffle_seed } => {
            let s = detect::detect(&cfg, shuffle_seed)?;
            eprintln!(
                "{} snapshots ({} reused) from {} files, {} rejected",
                s.snapshots, s.reused, s.files, s.rejected
            );
            Ok(0)
        }
        Command::Lifetime => {
            let r = analysis::lifetime_stage(&cfg)?;
            eprintln!("{} MOAS prefixes", r.len());
            Ok(0)
        }
        Command::Knee { lifetimes, family, curve } => knee(&cfg, lifetimes, family, curve),
        Command::Rpki => {
            analysis::rpki_stage(&cfg)?;
            Ok(0)
        }
        Command::Enrich => {
            analysis::enrich_stage(&cfg)?;
            Ok(0)
        }
        Command::Report { figure } => run_report(&cfg, figure.as_deref()),
        Command::Synth { scenario } => synth(&cfg, &scenario),
        Command::Run { shuffle_seed } => {
            detect::detect(&cfg, shuffle_seed)?;
            analysis::lifetime_stage(&cfg)?;
            analysis::rpki_stage(&cfg)?;
            analysis::enrich_stage(&cfg)?;
            run_report(&cfg, None)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
