use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ghostcarve::conscious::{conscious_protocol, ConsciousConfig, ReplayResponses, TypedSource};
use ghostcarve::experiment::calibration_for;
use ghostcarve::io::write_calibration_csv;
use ghostcarve::service::{serve, HumanSession, ServiceConfig};
use ghostcarve::{load_scene, replay, run_experiment, write_artifacts, Channel, DetectorKind, ExperimentConfig, ExperimentOutput, SessionLog};

#[derive(Parser)]
#[command(name = "ghostcarve", version, about = "Adaptive ghost imaging with a simulated or human detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the detector response and write the calibration table.
    Calibrate(Common),
    /// Acquire and reconstruct a scene.
    Run(RunArgs),
    /// Conscious/nonconscious comparison on an 8x8 scene.
    Conscious(ConsciousArgs),
    /// Wait for a human-loop UI and run the acquisition through it.
    Serve(ServeArgs),
    /// Rebuild reconstructions from a session log.
    Replay {
        /// session.json written by an earlier run.
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorArg {
    Sim,
    Human,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Typed,
    Transcribed,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML file with defaults; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    freq: Option<f64>,
    #[arg(long)]
    dwell: Option<f64>,
    #[arg(long)]
    pause: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise: Option<Switch>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    detector: Option<DetectorArg>,
    #[command(flatten)]
    service: ServiceArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    service: ServiceArgs,
}

#[derive(Args)]
struct ServiceArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    bind: String,
    /// Session token a reconnecting UI sends in `resume`.
    #[arg(long, default_value = "session")]
    token: String,
    /// Continue from a checkpoint file instead of starting over.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct ConsciousArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    /// Typed or transcribed answers, `{"<rep>": [[attempt, ...], ...]}`.
    #[arg(long)]
    responses: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "typed")]
    channel: ChannelArg,
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate(c) => {
            let cfg = experiment_config(&c)?;
            let curve = calibration_for(&cfg)?;
            match &c.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    write_calibration_csv(std::fs::File::create(dir.join("calibration.csv"))?, &curve)?;
                }
                None => write_calibration_csv(std::io::stdout().lock(), &curve)?,
            }
            eprintln!("linear range {:.3}..{:.3} at {} Hz", curve.linear_range.0, curve.linear_range.1, cfg.frequency);
        }
        Command::Run(r) => {
            let mut cfg = experiment_config(&r.common)?;
            if let Some(d) = r.detector {
                cfg.detector = match d {
                    DetectorArg::Sim => DetectorKind::Sim,
                    DetectorArg::Human => DetectorKind::Human,
                };
            }
            let out = require_out(&r.common)?;
            let output = match cfg.detector {
                DetectorKind::Sim => run_experiment(&cfg, &scene_for(&cfg)?)?,
                DetectorKind::Human => human(&cfg, &r.service, &out)?,
            };
            finish(&out, &output)?;
        }
        Command::Serve(s) => {
            let mut cfg = experiment_config(&s.common)?;
            cfg.detector = DetectorKind::Human;
            let out = require_out(&s.common)?;
            let output = human(&cfg, &s.service, &out)?;
            finish(&out, &output)?;
        }
        Command::Conscious(c) => {
            let base = experiment_config(&c.common)?;
            let cfg = ConsciousConfig {
                frequency: base.frequency,
                dwell: base.dwell,
                pause: base.pause,
                seed: base.seed,
                noise: base.noise,
                sigma_ratio: base.sigma_ratio,
                repetitions: c.repetitions,
                model: base.model.clone(),
                ..ConsciousConfig::default()
            };
            let scene = scene_for(&base)?;
            let mut answers = c.responses.as_deref().map(ReplayResponses::load).transpose()?;
            let channel = match c.channel {
                ChannelArg::Typed => Channel::Typed,
                ChannelArg::Transcribed => Channel::Transcribed,
            };
            let typed = answers.as_mut().map(|a| (a as &mut dyn TypedSource, channel));
            let report = conscious_protocol(&scene, &cfg, typed)?;
            for (channel, mean) in &report.mean_ssim {
                println!("{channel}: mean SSIM {mean:.4}");
            }
            if let Some(dir) = &c.common.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("conscious.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            }
        }
        Command::Replay { log, out } => {
            let text = std::fs::read_to_string(&log).map_err(|e| format!("{}: {e}", log.display()))?;
            let log: SessionLog = serde_json::from_str(&text)?;
            finish(&out, &replay(&log)?)?;
        }
    }
    Ok(())
}

fn experiment_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = &c.scene {
        cfg.scene_path = Some(p.clone());
    }
    if let Some(f) = c.freq {
        cfg.frequency = f;
    }
    if let Some(d) = c.dwell {
        cfg.dwell = d;
    }
    if let Some(p) = c.pause {
        cfg.pause = p;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.noise {
        cfg.noise = matches!(n, Switch::On);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn scene_for(cfg: &ExperimentConfig) -> Result<ghostcarve_core::SceneImage> {
    let path = cfg.scene_path.as_deref().ok_or("no scene given (--scene or scene_path)")?;
    Ok(load_scene(path)?)
}

fn require_out(c: &Common) -> Result<PathBuf> {
    c.out.clone().ok_or_else(|| "--out DIR is required".into())
}

fn human(cfg: &ExperimentConfig, s: &ServiceArgs, out: &Path) -> Result<ExperimentOutput> {
    let session = match &s.resume {
        Some(path) => HumanSession::restore(ghostcarve::service::SessionCheckpoint::load(path)?)?,
        None => HumanSession::new(cfg, &scene_for(cfg)?)?,
    };
    let listener = TcpListener::bind(&s.bind)?;
    eprintln!("waiting for a UI on {}", listener.local_addr()?);
    let service = ServiceConfig {
        timeout: Duration::from_secs_f64(cfg.response_timeout),
        checkpoint_dir: out.to_path_buf(),
        token: s.token.clone(),
    };
    Ok(serve(&listener, session, &service)?)
}

fn finish(out: &Path, output: &ExperimentOutput) -> Result<()> {
    write_artifacts(out, output)?;
    for r in &output.reconstructions {
        let ssim = r.ssim.map_or("-".into(), |s| format!("{s:.4}"));
        println!(
            "{:<9} ssim {ssim}  patterns {:>4}  time {:.1} s",
            r.method.label(),
            r.patterns_used,
            r.simulated_time
        );
    }
    Ok(())
}
