use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use mapeval_core::ingest::{load_manifest, DatasetManifest};
use mapeval_core::ConditionKind;
use mapeval_gateway::transport::OpenAiChatTransport;
use mapeval_gateway::{Gateway, GatewayConfig, Mode, ReplayStore, RetryPolicy, Transport};
use mapeval_vqa::Llm;

use crate::commands;
use crate::config::{MethodConfig, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "mapeval", version, about = "Benchmark harness for open semantic mapping")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for scene-level jobs. Defaults to the number of CPUs.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Serve model calls from this replay store instead of the network.
    #[arg(long, global = true)]
    pub replay_dir: Option<PathBuf>,

    /// Call the endpoint and record every exchange into the replay store.
    #[arg(long, global = true)]
    pub record: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the manifest and every referenced input; exit status 1 on fatal issues.
    Validate,
    /// Score predicted point clouds against ground truth.
    SegEval,
    /// Describe keyframes and generate questions.
    QaGen,
    /// Filter, deduplicate and balance generated questions.
    QaValidate,
    /// Answer validated questions for every method.
    QaAnswer,
    /// Judge answers and compute answering accuracy.
    QaEval,
    /// Render segmentation and accuracy tables to Markdown and CSV.
    Report,
    /// Write simulator condition documents for the five conditions.
    ScenarioEmit {
        /// Output directory. Defaults to `<output_dir>/scenarios`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit only this condition.
        #[arg(long)]
        condition: Option<ConditionKind>,
        /// Also write the light setup in a Habitat-style layout.
        #[arg(long)]
        habitat: bool,
    },
}

/// Hooks for embedding the CLI, mainly for tests.
#[derive(Default, Clone)]
pub struct Env {
    /// Used instead of the configured HTTP transport.
    pub transport: Option<Arc<dyn Transport>>,
}

/// Everything a command needs: config, manifest and gateway settings.
pub struct Ctx {
    pub config: RunConfig,
    pub manifest: DatasetManifest,
    replay_dir: Option<PathBuf>,
    record: bool,
    transport: Option<Arc<dyn Transport>>,
}

impl Ctx {
    pub fn methods(&self) -> Vec<MethodConfig> {
        if self.config.methods.is_empty() {
            vec![MethodConfig {
                name: "method".into(),
                pred_cloud: None,
                pred_labels: None,
                scene_graph: None,
                answers: None,
                fps: None,
            }]
        } else {
            self.config.methods.clone()
        }
    }

    pub fn reference_condition(&self) -> ConditionKind {
        self.config.reference_condition.unwrap_or(if self.manifest.has_baseline() {
            ConditionKind::Baseline
        } else {
            ConditionKind::NominalLights
        })
    }

    pub fn n_total(&self) -> usize {
        self.config
            .vqa
            .n_total
            .unwrap_or(if self.manifest.has_baseline() { 184 } else { 76 })
    }

    pub fn gateway(&self) -> Result<Gateway> {
        let g = &self.config.gateway;
        let replay_dir = self.replay_dir.clone().or_else(|| g.replay_dir.clone());
        let mode = match (self.record, &replay_dir) {
            (true, None) => bail!("--record needs a replay directory (--replay-dir or gateway.replay_dir)"),
            (true, Some(_)) => Mode::Record,
            (false, Some(_)) => Mode::Replay,
            (false, None) => Mode::Live,
        };
        let transport = match (&self.transport, mode) {
            (Some(t), _) => Some(t.clone()),
            (None, Mode::Replay) => None,
            (None, _) => {
                let key = std::env::var(&g.api_key_env).ok();
                if key.is_none() {
                    log::warn!("{} is not set; calling {} without credentials", g.api_key_env, g.endpoint);
                }
                let t: Arc<dyn Transport> = Arc::new(OpenAiChatTransport::new(
                    g.endpoint.clone(),
                    key,
                    Duration::from_secs_f64(g.timeout_secs),
                ));
                Some(t)
            }
        };
        let mut cfg = GatewayConfig {
            retry: RetryPolicy {
                max_attempts: g.max_attempts,
                base_delay: Duration::from_secs_f64(g.backoff_base_secs),
                factor: g.backoff_factor,
                jitter: g.jitter,
            },
            max_in_flight: g.max_in_flight,
            min_interval: None,
            structured_retries: g.structured_retries,
        };
        if let Some(rpm) = g.requests_per_minute {
            cfg = cfg.with_requests_per_minute(rpm);
        }
        log::info!("model gateway in {mode:?} mode");
        Ok(Gateway::new(mode, transport, replay_dir.map(ReplayStore::open), cfg)?)
    }

    pub fn llm<'a>(&'a self, gateway: &'a Gateway) -> Llm<'a> {
        Llm {
            gateway,
            model_id: &self.config.gateway.model_id,
            temperatures: self.config.vqa.temperatures(),
        }
    }
}

fn load_ctx(cli: &Cli, env: &Env) -> Result<Ctx> {
    let path = cli.config.as_ref().context("--config is required for this command")?;
    let config = RunConfig::load(path)?;
    let manifest = load_manifest(&config.manifest)
        .with_context(|| format!("cannot load manifest {}", config.manifest.display()))?;
    Ok(Ctx {
        config,
        manifest,
        replay_dir: cli.replay_dir.clone(),
        record: cli.record,
        transport: env.transport.clone(),
    })
}

/// Runs one command and returns the process exit status.
pub fn run(cli: Cli, env: Env) -> Result<i32> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| dispatch(&cli, &env))
}

fn dispatch(cli: &Cli, env: &Env) -> Result<i32> {
    if let Command::ScenarioEmit { out, condition, habitat } = &cli.command {
        let config = cli.config.as_deref().map(RunConfig::load).transpose()?;
        commands::scenario::run(config.as_ref(), out.as_deref(), *condition, *habitat)?;
        return Ok(0);
    }
    let ctx = load_ctx(cli, env)?;
    match cli.command {
        Command::Validate => commands::validate::run(&ctx),
        Command::SegEval => commands::seg::run(&ctx).map(|_| 0),
        Command::QaGen => commands::qa::generate(&ctx).map(|_| 0),
        Command::QaValidate => commands::qa::validate(&ctx).map(|_| 0),
        Command::QaAnswer => commands::qa::answer(&ctx).map(|_| 0),
        Command::QaEval => commands::qa::evaluate(&ctx).map(|_| 0),
        Command::Report => commands::report::run(&ctx).map(|_| 0),
        Command::ScenarioEmit { .. } => unreachable!("handled above"),
    }
}
