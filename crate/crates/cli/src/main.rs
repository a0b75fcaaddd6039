//! Command-line front end for the corpus toolkit.
//!
//! Subcommands mirror the pipeline stages: `filter` screens a corpus
//! manifest, `eval` scores hypothesis/reference pairs, `kernel selftest`
//! and `losses selftest` run the built-in oracle checks, `losses eval`
//! prices discriminator trace files, and `make-fixtures` writes a
//! self-contained demo tree. Exit codes are a stable contract: 0 on
//! success, 1 when a self-check fails, 2 on bad user input. Unless
//! `--quiet` is given, every run echoes its fully resolved configuration
//! to stderr before doing any work, so logs capture the thresholds that
//! were actually in force.
//!
//! Per-record problems inside batch commands (an unreadable clip, a pair
//! whose inputs are missing) are reported in the output files and never
//! abort the run; configuration problems (malformed manifests, unknown
//! config keys, unparseable flags) always do.

mod fixtures;
mod selftest;

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use forge_core::corpus::{self, manifest, CorpusRecord, Decision, FilterPolicy};
use forge_core::dsp::{decode_wav, mel_spectrogram, MelConfig, MelSpectrogram};
use forge_core::losses::{
    adv_d, adv_g, fm_loss, hifi_discriminator_total, hifi_generator_total, mel_loss,
    read_traces, LossWeights,
};
use forge_core::metrics::pairs::{self, MetricKind};

// ==== argument grammar =======================================================

#[derive(Parser)]
#[command(
    name = "forge",
    version,
    about = "Corpus engineering and evaluation toolkit for TTS pipelines"
)]
struct Cli {
    /// Seed for every pseudo-random draw the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// key = value file with mel-analysis settings (used by `eval` and
    /// `losses eval`).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Suppress the resolved-configuration echo on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Screen a corpus manifest, writing survivors and a decision report.
    Filter {
        /// Line-delimited JSON manifest to screen.
        #[arg(long)]
        manifest: PathBuf,
        /// Threshold file; built-in defaults when omitted.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Where to write the accepted records (manifest format).
        #[arg(long)]
        out_accepted: PathBuf,
        /// Where to write the per-record decisions.
        #[arg(long)]
        out_report: PathBuf,
    },
    /// Score hypothesis/reference pairs with the objective metrics.
    Eval {
        /// Line-delimited JSON pairs file.
        #[arg(long)]
        pairs: PathBuf,
        /// Comma-separated subset of cer,secs,sbs,de,mos.
        #[arg(long, default_value = "cer,secs,sbs,de,mos")]
        metrics: String,
        /// Where to write the per-pair report lines.
        #[arg(long)]
        out: PathBuf,
    },
    /// Architecture-kernel commands.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Training-loss commands.
    Losses {
        #[command(subcommand)]
        action: LossesAction,
    },
    /// Write the self-contained demo fixture tree.
    MakeFixtures {
        /// Directory to create the tree under.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum KernelAction {
    /// Check the kernels against independent oracles.
    Selftest,
}

#[derive(Subcommand)]
enum LossesAction {
    /// Check the loss formulas against independent oracles.
    Selftest,
    /// Price a discriminator trace file with the loss formulas.
    Eval {
        /// Line-delimited JSON trace file.
        #[arg(long)]
        trace: PathBuf,
        /// Loss-weight file; built-in defaults when omitted.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Reference WAV for the mel term (requires --fake-audio).
        #[arg(long)]
        real_audio: Option<PathBuf>,
        /// Generated WAV for the mel term (requires --real-audio).
        #[arg(long)]
        fake_audio: Option<PathBuf>,
    },
}

// ==== errors and exit codes ==================================================

enum CliError {
    /// Bad user input: malformed files, unknown keys, unreadable paths.
    Usage(String),
    /// The binary failed its own checks.
    SelfCheck(String),
}

fn usage(detail: impl Display) -> CliError {
    CliError::Usage(detail.to_string())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::SelfCheck(detail)) => {
            eprintln!("error: {detail}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(detail)) => {
            eprintln!("error: {detail}");
            ExitCode::from(2)
        }
    }
}

// ==== resolved-configuration echo ============================================

/// The configuration a command actually ran with, merged from flags, any
/// config file, and built-in defaults. Echoed to stderr before work starts.
struct ResolvedConfig {
    command: &'static str,
    entries: Vec<(&'static str, String)>,
}

impl ResolvedConfig {
    fn new(command: &'static str, seed: u64) -> Self {
        Self {
            command,
            entries: vec![("seed", seed.to_string())],
        }
    }

    fn set(&mut self, key: &'static str, value: impl Display) {
        self.entries.push((key, value.to_string()));
    }

    fn echo(&self, quiet: bool) {
        if quiet {
            return;
        }
        eprintln!("# resolved configuration: {}", self.command);
        for (key, value) in &self.entries {
            eprintln!("#   {key} = {value}");
        }
    }
}

fn source_label(path: Option<&Path>) -> String {
    match path {
        Some(p) => p.display().to_string(),
        None => "builtin defaults".to_string(),
    }
}

// ==== dispatch ===============================================================

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Filter {
            manifest,
            policy,
            out_accepted,
            out_report,
        } => cmd_filter(
            &manifest,
            policy.as_deref(),
            &out_accepted,
            &out_report,
            cli.seed,
            cli.quiet,
        ),
        Command::Eval {
            pairs,
            metrics,
            out,
        } => cmd_eval(
            &pairs,
            &metrics,
            &out,
            cli.config.as_deref(),
            cli.seed,
            cli.quiet,
        ),
        Command::Kernel {
            action: KernelAction::Selftest,
        } => cmd_selftest(selftest::Scope::Kernel, cli.seed, cli.quiet),
        Command::Losses { action } => match action {
            LossesAction::Selftest => {
                cmd_selftest(selftest::Scope::Losses, cli.seed, cli.quiet)
            }
            LossesAction::Eval {
                trace,
                weights,
                real_audio,
                fake_audio,
            } => cmd_losses_eval(
                &trace,
                weights.as_deref(),
                real_audio.as_deref(),
                fake_audio.as_deref(),
                cli.config.as_deref(),
                cli.seed,
                cli.quiet,
            ),
        },
        Command::MakeFixtures { out_dir } => cmd_make_fixtures(&out_dir, cli.seed, cli.quiet),
    }
}

// ==== filter =================================================================

fn cmd_filter(
    manifest_path: &Path,
    policy_path: Option<&Path>,
    out_accepted: &Path,
    out_report: &Path,
    seed: u64,
    quiet: bool,
) -> Result<(), CliError> {
    let records = manifest::read_manifest(manifest_path).map_err(usage)?;
    let policy = match policy_path {
        Some(path) => FilterPolicy::from_file(path).map_err(usage)?,
        None => FilterPolicy::default(),
    };

    let mut resolved = ResolvedConfig::new("filter", seed);
    resolved.set("manifest", manifest_path.display());
    resolved.set("records", records.len());
    resolved.set("policy", source_label(policy_path));
    resolved.set("min_duration_s", policy.min_duration_s);
    resolved.set("max_duration_s", policy.max_duration_s);
    resolved.set("max_text_chars", policy.max_text_chars);
    resolved.set("max_silence_ratio", policy.max_silence_ratio);
    resolved.set("ratio_low", policy.ratio_band.0);
    resolved.set("ratio_high", policy.ratio_band.1);
    resolved.set("require_speaker", policy.require_speaker);
    resolved.set("silence_frame_ms", policy.silence_frame_ms);
    resolved.set("silence_db", policy.silence_db);
    resolved.set("out_accepted", out_accepted.display());
    resolved.set("out_report", out_report.display());
    resolved.echo(quiet);

    let base = manifest_path.parent().unwrap_or(Path::new("")).to_path_buf();
    let probe = corpus::file_probe(base, policy.silence_frame_ms, policy.silence_db);
    let report = corpus::apply_filters(&records, &policy, probe);
    let accepted: Vec<CorpusRecord> = records
        .iter()
        .zip(&report.decisions)
        .filter(|(_, d)| d.decision == Decision::Accept)
        .map(|(r, _)| r.clone())
        .collect();
    manifest::write_manifest(&accepted, out_accepted).map_err(usage)?;
    manifest::write_report(&report, out_report).map_err(usage)?;
    if !quiet {
        eprintln!(
            "# filter: accepted {} of {} records",
            accepted.len(),
            records.len()
        );
    }
    Ok(())
}

// ==== eval ===================================================================

fn metric_name(kind: MetricKind) -> &'static str {
    match kind {
        MetricKind::Cer => "cer",
        MetricKind::Secs => "secs",
        MetricKind::Sbs => "sbs",
        MetricKind::De => "de",
        MetricKind::Mos => "mos",
    }
}

fn load_mel_config(config_path: Option<&Path>) -> Result<MelConfig, CliError> {
    match config_path {
        Some(path) => MelConfig::from_file(path).map_err(usage),
        None => Ok(MelConfig::default()),
    }
}

fn echo_mel_config(resolved: &mut ResolvedConfig, source: Option<&Path>, mel: &MelConfig) {
    resolved.set("mel_config", source_label(source));
    resolved.set("sample_rate", mel.sample_rate);
    resolved.set("fft_size", mel.fft_size);
    resolved.set("hop", mel.hop);
    resolved.set("mel_bins", mel.mel_bins);
    resolved.set("fmin", mel.fmin);
    resolved.set("fmax", mel.fmax);
    resolved.set("log_floor", mel.log_floor);
}

fn cmd_eval(
    pairs_path: &Path,
    metrics: &str,
    out: &Path,
    config_path: Option<&Path>,
    seed: u64,
    quiet: bool,
) -> Result<(), CliError> {
    let records = pairs::read_pairs(pairs_path).map_err(usage)?;
    let kinds = MetricKind::parse_list(metrics).map_err(usage)?;
    let mel = load_mel_config(config_path)?;

    let mut resolved = ResolvedConfig::new("eval", seed);
    resolved.set("pairs", pairs_path.display());
    resolved.set("records", records.len());
    let names: Vec<&str> = kinds.iter().copied().map(metric_name).collect();
    resolved.set("metrics", names.join(","));
    echo_mel_config(&mut resolved, config_path, &mel);
    resolved.set("out", out.display());
    resolved.echo(quiet);

    let base = pairs_path.parent().unwrap_or(Path::new(""));
    let outcomes = pairs::evaluate_pairs(&records, &kinds, base, &mel);
    pairs::write_outcomes(&outcomes, out).map_err(usage)?;
    if !quiet {
        let failures = outcomes.iter().filter(|o| o.error.is_some()).count();
        eprintln!(
            "# eval: scored {} pairs ({} with errors)",
            outcomes.len(),
            failures
        );
    }
    Ok(())
}

// ==== selftest ===============================================================

fn cmd_selftest(scope: selftest::Scope, seed: u64, quiet: bool) -> Result<(), CliError> {
    let label = match scope {
        selftest::Scope::Kernel => "kernel selftest",
        selftest::Scope::Losses => "losses selftest",
    };
    let mut resolved = ResolvedConfig::new(label, seed);
    resolved.set("checks", "builtin oracle table");
    resolved.echo(quiet);
    let failures = selftest::run(scope, seed);
    if failures == 0 {
        Ok(())
    } else {
        Err(CliError::SelfCheck(format!(
            "{label}: {failures} check(s) failed"
        )))
    }
}

// ==== losses eval ============================================================

#[derive(Serialize)]
struct TraceSummary {
    adv_g: f64,
    adv_d: f64,
    fm: f64,
}

/// Stdout summary of `losses eval`; the mel term and the full generator
/// total appear only when both audio files were supplied.
#[derive(Serialize)]
struct LossSummary {
    traces: Vec<TraceSummary>,
    discriminator_total: f64,
    /// Adversarial-plus-feature-matching part of the generator objective.
    generator_adv_fm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generator_total: Option<f64>,
}

fn load_mel(path: &Path, cfg: &MelConfig) -> Result<MelSpectrogram, CliError> {
    let bytes = fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let clip = decode_wav(&bytes).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    mel_spectrogram(&clip, cfg).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn cmd_losses_eval(
    trace_path: &Path,
    weights_path: Option<&Path>,
    real_audio: Option<&Path>,
    fake_audio: Option<&Path>,
    config_path: Option<&Path>,
    seed: u64,
    quiet: bool,
) -> Result<(), CliError> {
    let traces = read_traces(trace_path).map_err(usage)?;
    let weights = match weights_path {
        Some(path) => LossWeights::from_file(path).map_err(usage)?,
        None => LossWeights::default(),
    };
    let audio = match (real_audio, fake_audio) {
        (Some(real), Some(fake)) => Some((real, fake)),
        (None, None) => None,
        _ => {
            return Err(usage(
                "--real-audio and --fake-audio must be given together",
            ))
        }
    };
    let mel_cfg = load_mel_config(config_path)?;

    let mut resolved = ResolvedConfig::new("losses eval", seed);
    resolved.set("trace", trace_path.display());
    resolved.set("traces", traces.len());
    resolved.set("weights", source_label(weights_path));
    resolved.set("alpha", weights.alpha);
    resolved.set("beta", weights.beta);
    resolved.set("lambda_fm", weights.lambda_fm);
    resolved.set("lambda_mel", weights.lambda_mel);
    if let Some((real, fake)) = audio {
        resolved.set("real_audio", real.display());
        resolved.set("fake_audio", fake.display());
        echo_mel_config(&mut resolved, config_path, &mel_cfg);
    }
    resolved.echo(quiet);

    let mut summaries = Vec::with_capacity(traces.len());
    let mut generator_adv_fm = 0.0;
    for trace in &traces {
        let g = adv_g(trace).map_err(usage)?;
        let d = adv_d(trace).map_err(usage)?;
        let fm = fm_loss(trace).map_err(usage)?;
        generator_adv_fm += g + weights.lambda_fm * fm;
        summaries.push(TraceSummary {
            adv_g: g,
            adv_d: d,
            fm,
        });
    }
    let discriminator_total = hifi_discriminator_total(&traces).map_err(usage)?;

    let (mel, generator_total) = match audio {
        None => (None, None),
        Some((real_path, fake_path)) => {
            let real = load_mel(real_path, &mel_cfg)?;
            let fake = load_mel(fake_path, &mel_cfg)?;
            let mel = mel_loss(&real, &fake).map_err(usage)?;
            let total =
                hifi_generator_total(&traces, &real, &fake, &weights).map_err(usage)?;
            (Some(mel), Some(total))
        }
    };

    let summary = LossSummary {
        traces: summaries,
        discriminator_total,
        generator_adv_fm,
        mel,
        generator_total,
    };
    println!(
        "{}",
        serde_json::to_string(&summary).expect("loss summary serializes")
    );
    Ok(())
}

// ==== make-fixtures ==========================================================

fn cmd_make_fixtures(out_dir: &Path, seed: u64, quiet: bool) -> Result<(), CliError> {
    let mut resolved = ResolvedConfig::new("make-fixtures", seed);
    resolved.set("out_dir", out_dir.display());
    resolved.echo(quiet);
    let written = fixtures::make_fixtures(out_dir).map_err(usage)?;
    if !quiet {
        eprintln!(
            "# make-fixtures: wrote {} files under {}",
            written.len(),
            out_dir.display()
        );
    }
    Ok(())
}
