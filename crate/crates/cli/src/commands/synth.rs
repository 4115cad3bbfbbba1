use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use twoscope_core::corpus::{write_benchmark, write_corpus};
use twoscope_core::synthetic::{generate, SyntheticConfig};

use crate::error::Result;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory for public.jsonl, private.jsonl and benchmark.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SyntheticConfig::default().per_path)]
    per_path: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().distractors_per_scope)]
    distractors: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().seed)]
    seed: u64,
}

pub fn run(args: SynthArgs) -> Result<()> {
    let data = generate(&SyntheticConfig {
        per_path: args.per_path,
        distractors_per_scope: args.distractors,
        seed: args.seed,
        ..SyntheticConfig::default()
    });
    std::fs::create_dir_all(&args.out)?;
    write_corpus(&data.public, &args.out.join("public.jsonl"))?;
    write_corpus(&data.private, &args.out.join("private.jsonl"))?;
    super::write_file(&args.out.join("benchmark.json"), |w| {
        write_benchmark(&data.examples, w).map_err(std::io::Error::from)
    })?;
    super::print_json(&json!({
        "public_passages": data.public.len(),
        "private_passages": data.private.len(),
        "examples": data.examples.len(),
    }))
}
