//! `heatid <subcommand> --config <file> [overrides]`
//!
//! Every run writes `summary.json` into the output directory, also on failure.
//! Exit codes: 0 ok, 2 configuration error, 3 solver error, 4 empty
//! identifiable interval.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use clap::{CommandFactory, FromArgMatches, Parser};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use config::{parse_config, ConfigError, RunConfig};
use run::Command;

#[derive(Parser, Debug)]
#[command(
    name = "heatid",
    version,
    about = "Identify a temperature dependent heat conductivity from boundary traces"
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides HEATID_OUT and output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel study points.
    #[arg(long)]
    jobs: Option<usize>,
    /// Config override `section.key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let (text, base) = match &cli.config {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|e| {
                ConfigError::Validation(format!("cannot read {}: {e}", p.display()))
            })?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (String::new(), PathBuf::from(".")),
    };
    parse_config(&text, &cli.overrides, &base)
}

fn output_dir(cli: &Cli, cfg: Option<&RunConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("HEATID_OUT").map(PathBuf::from))
        .or_else(|| cfg.map(|c| c.output.dir.clone()))
        .unwrap_or_else(|| RunConfig::default().output.dir)
}

fn write_summary(dir: &Path, summary: &Value) {
    let path = dir.join("summary.json");
    if let Err(e) = std::fs::create_dir_all(dir)
        .map_err(|e| e.to_string())
        .and_then(|_| heatid_core::io::write_json(&path, summary).map_err(|e| e.to_string()))
    {
        eprintln!("heatid: could not write {}: {e}", path.display());
    }
}

fn main() -> ExitCode {
    let defaults = toml::to_string(&RunConfig::default()).unwrap_or_default();
    let matches = Cli::command()
        .after_long_help(format!("Default configuration:\n\n{defaults}"))
        .get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };

    let mut summary = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command,
        "config": Value::Null,
        "metrics": {},
        "outputs": [],
        "error": Value::Null,
    });

    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("heatid: {e}");
            summary["error"] =
                json!({ "kind": "Config", "message": e.to_string(), "exit_code": 2 });
            write_summary(&output_dir(&cli, None), &summary);
            return ExitCode::from(2);
        }
    };
    summary["config"] = serde_json::to_value(&cfg).unwrap_or(Value::Null);
    let out = output_dir(&cli, Some(&cfg));

    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("heatid: {e}");
        }
    }

    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("heatid: cannot create {}: {e}", out.display());
        return ExitCode::from(2);
    }
    let code = match run::run(cli.command, &cfg, &out) {
        Ok(o) => {
            summary["metrics"] = Value::Object(o.metrics);
            summary["outputs"] = json!(o.outputs);
            0
        }
        Err(e) => {
            let code = run::exit_code(&e);
            eprintln!("heatid: {e}");
            summary["error"] =
                json!({ "kind": run::error_kind(&e), "message": e.to_string(), "exit_code": code });
            code
        }
    };
    write_summary(&out, &summary);
    ExitCode::from(code as u8)
}
