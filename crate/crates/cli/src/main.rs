use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynsub::config::PipelineConfig;
use dynsub::pipeline::{inspect, run_detect, run_place, run_shots, write_atomic, InputPaths, OutputPaths, PipelineError};
use dynsub::synth::write_bundle;

/// Place subtitles next to whoever is speaking.
#[derive(Parser)]
#[command(name = "dynsub", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect speakers and write positioned ASS subtitles plus a report.
    Place {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        out_ass: PathBuf,
        #[arg(long)]
        out_report: Option<PathBuf>,
        /// Write annotated copies of the frames that carry a placed subtitle.
        #[arg(long, value_name = "DIR")]
        annotate: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        dump_tracklets: Option<PathBuf>,
    },
    /// Speaker decisions only, as JSON lines.
    Detect {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        settings: Settings,
        /// Defaults to standard output.
        #[arg(long)]
        out_report: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        dump_tracklets: Option<PathBuf>,
    },
    /// List hard cuts in a frame directory as CSV.
    Shots {
        #[arg(long)]
        frames: PathBuf,
        #[command(flatten)]
        settings: Settings,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration and a summary of any inputs given.
    Inspect {
        #[arg(long)]
        srt: Option<PathBuf>,
        #[arg(long)]
        frames: Option<PathBuf>,
        #[arg(long)]
        detections: Option<PathBuf>,
        #[arg(long)]
        audio: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Write a synthetic input bundle (frames, detections, audio, subtitles).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Nobody in the scene moves their lips.
        #[arg(long)]
        no_speaker: bool,
    },
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    srt: PathBuf,
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    /// WAV file or per-frame energy CSV.
    #[arg(long)]
    audio: Option<PathBuf>,
}

impl Inputs {
    fn paths(self) -> InputPaths {
        InputPaths { srt: self.srt, frames: self.frames, detections: self.detections, audio: self.audio }
    }
}

#[derive(Args)]
struct Settings {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set theta1=15`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Settings {
    fn load(&self) -> Result<PipelineConfig, PipelineError> {
        let base = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        Ok(base.with_overrides(&self.overrides)?)
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), PipelineError> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| PipelineError::Input(format!("standard output: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Place { inputs, settings, out_ass, out_report, annotate, dump_tracklets } => {
            let config = settings.load()?;
            let out = OutputPaths { ass: Some(out_ass), report: out_report, annotate, tracklets: dump_tracklets };
            let s = run_place(&inputs.paths(), &config, &out)?;
            log::info!("{} segments, {} placed next to a speaker, {} frames annotated", s.segments, s.placed, s.annotated);
        }
        Command::Detect { inputs, settings, out_report, dump_tracklets } => {
            let config = settings.load()?;
            let out = OutputPaths { ass: None, report: out_report.clone(), annotate: None, tracklets: dump_tracklets };
            let report = run_detect(&inputs.paths(), &config, &out)?;
            if out_report.is_none() {
                emit(&report, None)?;
            }
        }
        Command::Shots { frames, settings, out } => {
            let csv = run_shots(&frames, &settings.load()?)?;
            emit(&csv, out.as_ref())?;
        }
        Command::Inspect { srt, frames, detections, audio, settings } => {
            let paths = InputPaths { srt: srt.unwrap_or_default(), frames: frames.unwrap_or_default(), detections: detections.unwrap_or_default(), audio };
            emit(&inspect(&settings.load()?, &paths)?, None)?;
        }
        Command::Synth { out, seed, no_speaker } => {
            let p = write_bundle(&out, seed, !no_speaker)?;
            log::info!("bundle written: {}", p.srt.parent().unwrap_or(&out).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
