pub mod build_index;
pub mod evaluate;
pub mod ingest;
pub mod query;
pub mod score_dist;
pub mod serve;
pub mod synth;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

pub(crate) fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

pub(crate) fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| crate::error::CliError::data(format!("{}: {e}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    f(&mut out)?;
    out.flush()?;
    Ok(())
}
