//! Output directory layout: the config as given (`config.source.json`), with
//! defaults filled in (`config.json`), `manifest.json`, and CSV tables.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::{CliError, CliResult, Context};

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seeds: &'a [u64],
    threads: usize,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("cannot write {}: {e}", path.display()))
}

pub fn prepare(ctx: &Context, command: &str) -> CliResult<()> {
    fs::create_dir_all(&ctx.out_dir).map_err(|e| io_err(&ctx.out_dir, e))?;
    let source = ctx.out_dir.join("config.source.json");
    fs::write(&source, &ctx.source).map_err(|e| io_err(&source, e))?;
    write_json(&ctx.out_dir.join("config.json"), &ctx.config)?;
    let manifest = Manifest {
        tool: "noisereg",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seeds: ctx.seeds(),
        threads: ctx.threads,
    };
    write_json(&ctx.out_dir.join("manifest.json"), &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Writes a CSV table with a header row; all fields are pre-formatted strings.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Shortest round-trip formatting, so identical runs give identical bytes.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
