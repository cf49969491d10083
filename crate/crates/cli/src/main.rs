//! Command-line driver: run scenarios, validate them, fire one-shot queries
//! against the simulated state at a chosen tick, and snapshot/restore peer
//! caches.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mwsd_core::pipeline::Simulation;
use mwsd_core::scenario::{QueryScript, ScenarioConfig};
use mwsd_core::{
    parse_snapshot, snapshot_string, CapabilitySignature, ContextProfile, PeerGroupId,
};

#[derive(Parser)]
#[command(
    name = "mwsd",
    version,
    about = "P2P mobile web service discovery simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario to completion and write events, traces and metrics.
    Run(RunArgs),
    /// Validate a scenario document and print a summary.
    Validate { scenario: PathBuf },
    /// Run the pipeline once against the simulated state at a given tick.
    Query(QueryArgs),
    /// Run a scenario (fully or up to a tick) and write a cache snapshot.
    Snapshot(SnapshotArgs),
    /// Parse a snapshot file, report its contents and optionally re-emit it.
    Restore(RestoreArgs),
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of ticks.
    #[arg(long)]
    ticks: Option<u64>,
    /// Output directory for events.jsonl, traces.jsonl and metrics.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    scenario: PathBuf,
    /// Tick at which the query runs, after that tick's maintenance.
    #[arg(long, default_value_t = 0)]
    at_tick: u64,
    /// Name of the querying peer.
    #[arg(long)]
    origin: String,
    /// Whitespace-separated keywords.
    #[arg(long)]
    keywords: String,
    /// Restrict matches to one peer group id.
    #[arg(long)]
    group: Option<String>,
    /// Extend keyword matching into the WSDL text.
    #[arg(long)]
    wsdl: bool,
    #[arg(long)]
    hop_budget: Option<u32>,
    /// JSON file holding {"client": ContextProfile, "requested": CapabilitySignature}.
    #[arg(long)]
    context: Option<PathBuf>,
    /// Invoke the service at this rank of the final list after the query.
    #[arg(long)]
    invoke: Option<usize>,
    /// Platform used when resolving the installable client package.
    #[arg(long, default_value = "midp")]
    platform: String,
}

#[derive(Args)]
struct SnapshotArgs {
    scenario: PathBuf,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Stop after this many ticks instead of the full run.
    #[arg(long)]
    ticks: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RestoreArgs {
    snapshot: PathBuf,
    /// Re-emit the parsed snapshot to this path (byte-identical on success).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Client context for one-shot queries, loaded from --context.
#[derive(serde::Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct QueryContextFile {
    client: Option<ContextProfile>,
    requested: CapabilitySignature,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Query(args) => cmd_query(args),
        Command::Snapshot(args) => cmd_snapshot(args),
        Command::Restore(args) => cmd_restore(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            // Machine-readable error record on stderr, nonzero exit.
            let record = serde_json::json!({"error": format!("{e:#}")});
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}

fn load_config(
    path: &Path,
    seed: Option<u64>,
    ticks: Option<u64>,
) -> anyhow::Result<ScenarioConfig> {
    let mut config = ScenarioConfig::from_path(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(ticks) = ticks {
        config.ticks = ticks;
        config.validate()?;
    }
    Ok(config)
}

fn cmd_run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let config = load_config(&args.scenario, args.seed, args.ticks)?;
    let output = mwsd_core::run_scenario(config)?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("events.jsonl"), output.event_log_jsonl())?;
    std::fs::write(args.out.join("traces.jsonl"), output.traces_jsonl())?;
    std::fs::write(args.out.join("metrics.json"), output.metrics_json())?;
    println!(
        "run complete: {} events, {} queries, metrics in {}",
        output.events.len(),
        output.traces.len(),
        args.out.join("metrics.json").display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(path: &Path) -> anyhow::Result<ExitCode> {
    let config = ScenarioConfig::from_path(path)?;
    println!(
        "valid: {} peers, {} groups, {} services, {} queries, {} ticks, seed {}",
        config.topology.peers.len(),
        config.peer_groups.len(),
        config.services.len(),
        config.queries.len(),
        config.ticks,
        config.seed
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_query(args: QueryArgs) -> anyhow::Result<ExitCode> {
    let config = ScenarioConfig::from_path(&args.scenario)?;
    anyhow::ensure!(
        args.at_tick < config.ticks,
        "at-tick {} lies beyond the scenario's {} ticks",
        args.at_tick,
        config.ticks
    );
    let context: QueryContextFile = match &args.context {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => QueryContextFile::default(),
    };
    let script = QueryScript {
        query_id: Some("adhoc".to_string()),
        at_tick: args.at_tick,
        origin: args.origin.clone(),
        keywords: args.keywords.clone(),
        group: args.group.clone().map(PeerGroupId),
        search_wsdl: args.wsdl,
        hop_budget: args.hop_budget,
        max_results: None,
        client: context.client,
        requested: context.requested,
    };

    let mut sim = Simulation::new(config)?;
    sim.overlay()
        .resolve(&args.origin)
        .ok_or_else(|| anyhow::anyhow!("unknown origin peer {}", args.origin))?;
    for concept in script
        .requested
        .inputs
        .iter()
        .chain(script.requested.outputs.iter())
    {
        anyhow::ensure!(
            sim.config().ontology.contains(concept),
            "concept {concept} is not in the scenario ontology"
        );
    }
    sim.run_until(args.at_tick);
    sim.prepare_tick();
    let trace = sim.execute_query(&script, "adhoc".to_string()).clone();

    let single = mwsd_core::RunOutput {
        events: vec![],
        traces: vec![trace.clone()],
        metrics: Default::default(),
    };
    print!("{}", single.traces_jsonl());

    if let Some(rank) = args.invoke {
        let ack = sim.invoke(&trace, rank, &args.platform)?;
        println!(
            "{}",
            serde_json::json!({
                "invoked": ack.class_id,
                "publisher": ack.publisher.as_hex(),
                "round_trip_ticks": ack.round_trip_ticks,
                "package_ref": ack.package_ref,
                "ack": ack.ack,
            })
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_snapshot(args: SnapshotArgs) -> anyhow::Result<ExitCode> {
    let config = load_config(&args.scenario, args.seed, None)?;
    let stop_at = args.ticks.unwrap_or(config.ticks).min(config.ticks);
    let mut sim = Simulation::new(config)?;
    sim.run_until(stop_at);
    std::fs::write(&args.out, snapshot_string(sim.overlay()))?;
    println!(
        "snapshot of {} peers written to {}",
        sim.overlay().peers().count(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_restore(args: RestoreArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&args.snapshot)?;
    let caches = parse_snapshot(&text)?;
    let total: usize = caches.values().map(Vec::len).sum();
    println!("restored {} peers, {} advertisements", caches.len(), total);
    if let Some(out) = &args.out {
        std::fs::write(out, mwsd_core::snapshot::render_caches(&caches))?;
        println!("re-emitted to {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}
