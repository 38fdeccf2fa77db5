use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use contact_intent::bridge::{serve_stream, serve_tcp, ServerConfig};
use contact_intent::env::{AssetLibrary, PerturbationKind, TaskConfig};
use contact_intent::harness::{
    read_trajectory, replay, run_benchmark, run_perturbation_sweep, PolicyKind, RunOptions, RunReport,
};
use contact_intent::Error;

#[derive(Parser)]
#[command(name = "contact-intent", version, about = "Contact-intention manipulation benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TaskArgs {
    /// Bundled preset name (pushing, reorientation) or preset file path.
    #[arg(long, default_value = "pushing")]
    config: String,
    /// Dotted `key=value` override applied to the preset; repeatable.
    #[arg(long = "preset-override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Directory searched for assets before the bundled ones.
    #[arg(long, env = contact_intent::env::ASSET_DIR_ENV)]
    asset_dir: Option<PathBuf>,
}

impl TaskArgs {
    fn load(&self) -> contact_intent::Result<(TaskConfig, AssetLibrary)> {
        let config = TaskConfig::load(&self.config, &self.overrides)?;
        let assets = match &self.asset_dir {
            Some(d) => AssetLibrary::with_dir(d),
            None => AssetLibrary::bundled(),
        };
        Ok((config, assets))
    }
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// random or greedy.
    #[arg(long, default_value = "greedy")]
    policy: String,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reports (and trajectories) are appended under this directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write one trajectory log per trial into the output directory.
    #[arg(long)]
    log_trajectories: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of seeded episodes.
    Run(BatchArgs),
    /// Run the same seeds under each perturbation.
    Sweep {
        #[command(flatten)]
        batch: BatchArgs,
        #[arg(long, value_delimiter = ',', default_value = "none,external-force,friction")]
        perturbations: Vec<String>,
    },
    /// Re-execute a trajectory log's intentions and compare final poses.
    Replay {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long)]
        log: PathBuf,
    },
    /// Print an asset with its sampled keypoints.
    InspectAsset {
        /// Asset name or file path.
        asset: String,
        #[arg(long, env = contact_intent::env::ASSET_DIR_ENV)]
        asset_dir: Option<PathBuf>,
    },
    /// Serve the policy bridge on a TCP address or on stdio.
    Serve {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, conflicts_with = "stdio")]
        listen: Option<String>,
        #[arg(long)]
        stdio: bool,
    },
}

fn batch_options(b: &BatchArgs) -> contact_intent::Result<(PolicyKind, RunOptions)> {
    let policy: PolicyKind = b.policy.parse()?;
    if b.log_trajectories && b.out_dir.is_none() {
        return Err(Error::Config("--log-trajectories needs --out-dir".into()));
    }
    let trajectory_dir = b
        .log_trajectories
        .then(|| b.out_dir.as_ref().map(|d| d.join("trajectories")))
        .flatten();
    Ok((policy, RunOptions { trajectory_dir }))
}

fn emit(reports: &[RunReport], out_dir: Option<&PathBuf>) -> contact_intent::Result<()> {
    println!("{}", RunReport::summary_header());
    for r in reports {
        println!("{}", r.summary_table());
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        for r in reports {
            r.append_jsonl(&dir.join("report.jsonl"))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> contact_intent::Result<bool> {
    match cli.command {
        Command::Run(b) => {
            let (config, assets) = b.task.load()?;
            let (policy, options) = batch_options(&b)?;
            let report = run_benchmark(&config, &assets, policy, b.trials, b.seed, &options)?;
            emit(std::slice::from_ref(&report), b.out_dir.as_ref())?;
            Ok(report.all_completed())
        }
        Command::Sweep { batch, perturbations } => {
            let (config, assets) = batch.task.load()?;
            let (policy, options) = batch_options(&batch)?;
            let kinds = perturbations
                .iter()
                .map(|p| p.parse::<PerturbationKind>())
                .collect::<contact_intent::Result<Vec<_>>>()?;
            let reports = run_perturbation_sweep(&config, &assets, policy, &kinds, batch.trials, batch.seed, &options)?;
            emit(&reports, batch.out_dir.as_ref())?;
            Ok(reports.iter().all(RunReport::all_completed))
        }
        Command::Replay { task, log } => {
            let (config, assets) = task.load()?;
            let records = read_trajectory(&log)?;
            let result = replay(&config, &assets, &records)?;
            let p = result.final_pose;
            println!("seed {} decisions {}", result.seed, result.intentions.len());
            println!("final position {:?} orientation(wxyz) {:?}", p.position.as_slice(), p.wxyz());
            match result.max_deviation() {
                Some(d) => {
                    println!("max deviation from log {d:.3e}");
                    Ok(d <= 1e-9)
                }
                None => Ok(true),
            }
        }
        Command::InspectAsset { asset, asset_dir } => {
            let lib = asset_dir.map(AssetLibrary::with_dir).unwrap_or_default();
            let model = lib.load(&asset)?;
            let (lo, hi) = model.bounds();
            println!("# {} boxes, bounds {:?} .. {:?}", model.boxes.len(), lo.as_slice(), hi.as_slice());
            print!("{}", model.to_toml_string(true));
            Ok(true)
        }
        Command::Serve { task, listen, stdio } => {
            let (config, assets) = task.load()?;
            let server = ServerConfig {
                default_task: config,
                overrides: task.overrides.clone(),
                assets,
            };
            if stdio {
                let stdin = std::io::stdin();
                let stdout = std::io::stdout();
                serve_stream(&mut stdin.lock(), &mut stdout.lock(), Arc::new(server))?;
            } else {
                let addr = listen.unwrap_or_else(|| "127.0.0.1:7878".into());
                eprintln!("listening on {addr}");
                serve_tcp(addr.as_str(), server)?;
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidAsset(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
