use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use cdmr_agents::checkpoint;
use cdmr_agents::train::{agent_curve_csv, learning_curve_csv};
use cdmr_core::control_plane::{sync_to_root, MessageBus, RootStore};
use cdmr_core::link_metrics::write_trace_jsonl;
use cdmr_core::multicast::TreeFile;
use cdmr_core::topology::topology_to_json;
use cdmr_core::traffic::synthesize_trace;
use cdmr_lab::membership::Membership;
use cdmr_lab::pipeline::eval_seeds;
use cdmr_lab::report::report_csv;
use cdmr_lab::{compare, to_json, train_for, write_output, Algorithm, Error, ExperimentConfig, Lab};
use clap::{Args, Parser, Subcommand};

/// Cross-domain multicast routing lab.
#[derive(Parser)]
#[command(name = "cdmr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the topology, base metrics, one counter trace and its control-plane log.
    GenTopo,
    /// Train the agents and write a checkpoint plus learning curves.
    Train,
    /// Evaluate trained agents on the evaluation snapshots.
    Eval {
        /// Checkpoint to load; defaults to the config's `checkpoint`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run every configured algorithm on the evaluation snapshots.
    Compare,
    /// Simulate random joins and leaves on the configured group.
    Group,
    /// Rebuild the global snapshot from a recorded control-plane log.
    Replay {
        /// JSON-lines message log, as written by `gen-topo`.
        #[arg(long)]
        input: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    Ok((cfg, out))
}

fn gen_topo(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let lab = Lab::load(cfg)?;
    let seed = eval_seeds(cfg).first().copied().unwrap_or(cfg.seed);
    let trace = synthesize_trace(&lab.base, &cfg.traffic, seed)?;
    let mut bus = MessageBus::default();
    let snap = lab.measure(&cfg.traffic, seed, &mut bus)?;
    write_output(out, "topology.json", topology_to_json(&lab.net, &lab.partition))?;
    write_output(out, "base_metrics.csv", lab.base.to_csv())?;
    write_output(out, "trace.jsonl", write_trace_jsonl(&trace))?;
    write_output(out, "ccm.jsonl", bus.to_jsonl())?;
    write_output(out, "snapshot.csv", snap.raw.to_csv())?;
    println!(
        "{} nodes, {} links, {} domains",
        lab.net.node_count(),
        lab.net.links().len(),
        lab.partition.domain_count()
    );
    Ok(())
}

fn train_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let lab = Lab::load(cfg)?;
    let run = train_for(cfg, &lab)?;
    write_output(out, "checkpoint.bin", checkpoint::encode(&run.agents))?;
    write_output(out, "learning_curve.csv", learning_curve_csv(&run.episodes))?;
    write_output(out, "agent_curve.csv", agent_curve_csv(&run.episodes))?;
    let valid = run.episodes.iter().filter(|e| e.valid).count();
    println!("{} episodes, {valid} valid trees", run.episodes.len());
    Ok(())
}

fn eval_cmd(cfg: &ExperimentConfig, out: &Path, checkpoint: Option<PathBuf>) -> Result<()> {
    let path = checkpoint
        .or_else(|| cfg.checkpoint.clone())
        .ok_or_else(|| Error::Config("eval needs --checkpoint or a config `checkpoint`".into()))?;
    let cfg = ExperimentConfig { algorithms: vec![Algorithm::Macdmr], checkpoint: Some(path), ..cfg.clone() };
    let result = compare(&cfg)?;
    write_output(out, "eval_report.csv", report_csv(&result.rows))?;
    write_output(out, "eval_summary.json", to_json(&result.summary)?)?;
    let s = &result.summary.algorithms["macdmr"];
    println!("{} snapshots, {} valid trees", s.rows, s.valid);
    Ok(())
}

fn compare_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let result = compare(cfg)?;
    write_output(out, "report.csv", report_csv(&result.rows))?;
    write_output(out, "summary.json", to_json(&result.summary)?)?;
    if let Some(run) = &result.training {
        write_output(out, "checkpoint.bin", checkpoint::encode(&run.agents))?;
        write_output(out, "learning_curve.csv", learning_curve_csv(&run.episodes))?;
    }
    for (alg, s) in &result.summary.algorithms {
        let cost = s.mean.as_ref().map_or("-".to_string(), |m| format!("{:.4}", m.cost));
        println!("{alg}: {}/{} valid, mean cost {cost}", s.valid, s.rows);
    }
    Ok(())
}

fn group_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let lab = Lab::load(cfg)?;
    let seed = eval_seeds(cfg).first().copied().unwrap_or(cfg.seed);
    let snap = lab.measure(&cfg.traffic, seed, &mut MessageBus::default())?;
    let sim = Membership {
        net: &lab.net,
        partition: &lab.partition,
        snapshot: &snap.norm,
        weights: cfg.hyperparams.weights,
        group_id: cfg.membership.group_id,
    };
    let run = sim.run(&lab.group, cfg.membership.events, cfg.seed)?;
    let mut log = String::new();
    for e in &run.events {
        log.push_str(&serde_json::to_string(e)?);
        log.push('\n');
    }
    write_output(out, "membership.jsonl", log)?;
    write_output(out, "final_tree.json", to_json(&TreeFile::from_tree(&run.tree, &run.group))?)?;
    let bad = run.events.iter().filter(|e| !e.valid || e.delivered != e.online).count();
    println!("{} events, {bad} with an invalid tree or wrong delivery", run.events.len());
    if bad > 0 {
        return Err(Error::Runtime(format!("{bad} membership events broke the tree")).into());
    }
    Ok(())
}

fn replay_cmd(cfg: &ExperimentConfig, out: &Path, input: &Path) -> Result<()> {
    let lab = Lab::load(cfg)?;
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let bus = MessageBus::from_jsonl(&text)?;
    let mut store = RootStore::new(&lab.net, &lab.partition);
    sync_to_root(&mut store, bus.messages())?;
    write_output(out, "snapshot.csv", store.snapshot().to_csv())?;
    println!("{} messages, {} edges missing", bus.messages().len(), store.missing().len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let (cfg, out) = load_config(&cli.common)?;
    match cli.command {
        Command::GenTopo => gen_topo(&cfg, &out),
        Command::Train => train_cmd(&cfg, &out),
        Command::Eval { checkpoint } => eval_cmd(&cfg, &out, checkpoint),
        Command::Compare => compare_cmd(&cfg, &out),
        Command::Group => group_cmd(&cfg, &out),
        Command::Replay { input } => replay_cmd(&cfg, &out, &input),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<Error>().is_some_and(Error::is_config);
            ExitCode::from(if config { 1 } else { 2 })
        }
    }
}
