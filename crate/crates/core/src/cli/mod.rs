//! Command-line front end: `run`, `sweep`, `validate` and `presets`.
//!
//! Any flag naming a configuration field path (`--params.alpha 20`,
//! `--ensemble.n_traj=100`) overrides the document and the preset.

pub mod config;
pub mod runner;
pub mod validate;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub use config::{resolve, ExperimentConfig, Model, Preset};
pub use runner::{output_dir, run, Manifest};
pub use validate::{validate, ValidationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "optosqueeze", version, about = "Optical quadrature squeezing in an optomechanical cavity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the curves (and sweep, if any) of a preset or configuration.
    Run(RunArgs),
    /// Run only the (alpha, k) sweep.
    Sweep(RunArgs),
    /// Run the quick invariant suite and print a JSON report.
    Validate,
    /// List presets, or print the expanded configuration of one.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// JSON configuration document.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; overrides `output_dir` and the environment.
    #[arg(long)]
    out: Option<PathBuf>,
}

const KNOWN_FLAGS: [&str; 5] = ["config", "preset", "out", "show", "help"];

/// Split field-path overrides from the arguments clap understands.
fn split_overrides(args: Vec<OsString>) -> Result<(Vec<OsString>, Vec<(String, String)>)> {
    let mut plain = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        let Some(body) = s.strip_prefix("--") else {
            plain.push(a);
            continue;
        };
        let (key, inline) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (body.to_string(), None),
        };
        if key.is_empty() || KNOWN_FLAGS.contains(&key.as_str()) || key == "version" {
            plain.push(a);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .map(|v| v.to_string_lossy().into_owned())
                .ok_or_else(|| Error::Config(format!("flag --{key} needs a value")))?,
        };
        overrides.push((key, value));
    }
    Ok((plain, overrides))
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidParameter { .. } => "invalid_parameter",
        Error::NonFinite { .. } => "non_finite",
        Error::OutOfWindow { .. } => "out_of_window",
        Error::Truncation { .. } => "truncation",
        Error::Convergence { .. } => "convergence",
        Error::TraceCollapse { .. } => "trace_collapse",
        Error::Invariant(_) => "invariant",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

/// Machine-readable error document written to stderr.
pub fn error_json(e: &Error) -> Value {
    json!({
        "error": {
            "kind": error_kind(e),
            "message": e.to_string(),
            "exit_code": exit_code(e),
        }
    })
}

fn load_document(path: &Option<PathBuf>) -> Result<Option<Value>> {
    let Some(p) = path else { return Ok(None) };
    let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
    let v = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
    Ok(Some(v))
}

fn effective_config(args: &RunArgs, overrides: &[(String, String)], sweep_only: bool) -> Result<ExperimentConfig> {
    let preset = args.preset.as_deref().map(str::parse).transpose()?;
    let preset = if sweep_only { preset.or(Some(Preset::Sweep)) } else { preset };
    let mut cfg = resolve(preset, load_document(&args.config)?, overrides)?;
    if sweep_only {
        cfg.curves.clear();
        if cfg.sweep.is_none() {
            return Err(Error::Config("no sweep section in the configuration".into()));
        }
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.to_string_lossy().into_owned());
    }
    Ok(cfg)
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn dispatch(cli: Cli, overrides: Vec<(String, String)>) -> Result<i32> {
    match cli.command {
        Command::Run(args) => {
            let cfg = effective_config(&args, &overrides, false)?;
            let m = run(&cfg, &output_dir(&cfg))?;
            print_json(&m)?;
            Ok(EXIT_OK)
        }
        Command::Sweep(args) => {
            let cfg = effective_config(&args, &overrides, true)?;
            let m = run(&cfg, &output_dir(&cfg))?;
            print_json(&m)?;
            Ok(EXIT_OK)
        }
        Command::Validate => {
            reject_overrides(&overrides)?;
            let r = validate();
            print_json(&r)?;
            Ok(if r.passed { EXIT_OK } else { EXIT_NUMERICAL })
        }
        Command::Presets { show } => {
            reject_overrides(&overrides)?;
            match show {
                Some(name) => {
                    let p: Preset = name.parse()?;
                    print_json(&ExperimentConfig::preset(p))?;
                }
                None => {
                    for p in Preset::ALL {
                        println!("{:<12} {}", p.name(), p.summary());
                    }
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn reject_overrides(o: &[(String, String)]) -> Result<()> {
    match o.first() {
        Some((k, _)) => Err(Error::Config(format!("unexpected flag --{k}"))),
        None => Ok(()),
    }
}

/// Parse `args` (program name first), execute, and return the exit code.
pub fn main_with_args(args: Vec<OsString>) -> i32 {
    let (plain, overrides) = match split_overrides(args) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(plain) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let err = Error::Config(e.to_string().trim().to_string());
            eprintln!("{}", error_json(&err));
            return EXIT_CONFIG;
        }
    };
    match dispatch(cli, overrides) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}
