//! Command-line front-end: batch unit generation, scripted export,
//! validation, corpus statistics and the HTTP server.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage or configuration error.

pub mod config;
pub mod pipeline;
mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use gtruth_core::export;
use rayon::prelude::*;
use serde_json::json;

pub use config::{ConfigError, LabelMap, LabelSpec, PipelineConfig};
pub use pipeline::{PipelineError, UnitsDocument};

pub const EXIT_OK: u8 = 0;
pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "gtruth", version, about = "Ground-truth annotation pipeline")]
pub struct Cli {
    /// TOML or JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Binarize, group and trace each input; writes `<stem>.units.json`
    /// and `<stem>.grouped.png`.
    Units {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Overrides `output_dir`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Check ground-truth XML files (or directories of them) and their label images.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Mean labels and units per image over a directory of ground truth.
    Stats { dir: PathBuf },
    /// Full scripted pipeline: units, label map, finalize, export.
    ExportRun {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        /// Overrides `service.bind`.
        #[arg(long)]
        bind: Option<String>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(
    args: I,
    env: Vec<(String, String)>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    init_logging(cli.verbose, matches!(cli.command, Command::Serve { .. }));
    let config = match PipelineConfig::load(cli.config.as_deref(), env) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    match cli.command {
        Command::Units { inputs, out: dir } => {
            let dir = dir.unwrap_or_else(|| config.output_dir.clone());
            batch(&inputs, &dir, cli.json, out, err, |i| {
                pipeline::run_units(i, &config, &dir)
                    .map(|p| json!({"input": i, "units": p.units, "json": p.json, "png": p.png}))
            })
        }
        Command::ExportRun { inputs, out: dir } => {
            if config.label_map.is_none() {
                let _ = writeln!(err, "error: {}", PipelineError::MissingLabelMap);
                return EXIT_USAGE;
            }
            let dir = dir.unwrap_or_else(|| config.output_dir.clone());
            batch(&inputs, &dir, cli.json, out, err, |i| {
                pipeline::run_export(i, &config, &dir)
                    .map(|p| json!({"input": i, "xml": p.xml, "png": p.png}))
            })
        }
        Command::Validate { paths } => cmd_validate(&paths, cli.json, out, err),
        Command::Stats { dir } => cmd_stats(&dir, cli.json, out, err),
        Command::Serve { bind } => {
            let mut service = config.service;
            if let Some(b) = bind {
                service.bind = b;
            }
            cmd_serve(service, out, err)
        }
    }
}

fn init_logging(verbose: bool, to_stdout: bool) {
    let level = if verbose {
        tracing::Level::DEBUG
    } else if to_stdout {
        tracing::Level::INFO
    } else {
        tracing::Level::WARN
    };
    let builder = tracing_subscriber::fmt()
        .with_max_level(level)
        .with_target(false);
    // A second init (tests calling `run` repeatedly) keeps the first subscriber.
    let _ = if to_stdout {
        builder.with_writer(std::io::stdout).try_init()
    } else {
        builder.with_writer(std::io::stderr).try_init()
    };
}

/// Runs `job` on every input in parallel and reports in input order.
fn batch(
    inputs: &[PathBuf],
    dir: &Path,
    as_json: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
    job: impl Fn(&Path) -> Result<serde_json::Value, PipelineError> + Sync,
) -> u8 {
    if let Some(stem) = duplicate_stem(inputs) {
        let _ = writeln!(
            err,
            "error: several inputs would write {stem:?} into {}",
            dir.display()
        );
        return EXIT_USAGE;
    }
    let results: Vec<_> = inputs.par_iter().map(|i| job(i)).collect();
    let mut code = EXIT_OK;
    let mut records = Vec::new();
    for (input, result) in inputs.iter().zip(results) {
        match result {
            Ok(v) => {
                tracing::info!(input = %input.display(), "done");
                if !as_json {
                    let _ = writeln!(out, "{}: ok", input.display());
                }
                records.push(v);
            }
            Err(e) => {
                code = EXIT_DOMAIN;
                let _ = writeln!(err, "{}: {}: {e}", input.display(), e.code());
                records.push(
                    json!({"input": input, "error": {"code": e.code(), "message": e.to_string()}}),
                );
            }
        }
    }
    if as_json {
        let _ = writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&records).expect("serializable")
        );
    }
    code
}

fn duplicate_stem(inputs: &[PathBuf]) -> Option<String> {
    let mut seen = std::collections::BTreeSet::new();
    inputs
        .iter()
        .map(|p| {
            export::output_stem(
                &p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            )
        })
        .find(|s| !seen.insert(s.clone()))
}

fn cmd_validate(paths: &[PathBuf], as_json: bool, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            match report::xml_files(p) {
                Ok(found) => files.extend(found),
                Err(e) => {
                    let _ = writeln!(err, "{}: {e}", p.display());
                    return EXIT_DOMAIN;
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    let reports: Vec<_> = files.par_iter().map(export::validate).collect();
    let all_valid = reports.iter().all(|r| r.is_valid());
    let _ = if as_json {
        report::validate_json(&files, &reports, out)
    } else {
        report::validate_text(&files, &reports, out)
    };
    if all_valid {
        EXIT_OK
    } else {
        EXIT_DOMAIN
    }
}

fn cmd_stats(dir: &Path, as_json: bool, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let stats = match export::corpus_stats(dir) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "{}: {e}", dir.display());
            return EXIT_DOMAIN;
        }
    };
    let _ = if as_json {
        writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&stats).expect("serializable")
        )
    } else {
        report::stats_table(&stats, out)
    };
    EXIT_OK
}

fn cmd_serve(
    config: gtruth_service::ServiceConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let runtime = match tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
    {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_DOMAIN;
        }
    };
    let result = runtime.block_on(gtruth_service::serve(
        config,
        |addr| {
            let _ = writeln!(out, "listening on http://{addr}");
            let _ = out.flush();
        },
        shutdown_signal(),
    ));
    match result {
        Ok(state) => {
            let _ = writeln!(out, "stopped; {} session(s) kept", state.session_count());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DOMAIN
        }
    }
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}
