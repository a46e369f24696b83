use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "upsilon", version, about = "Hypothesis management over a project directory")]
pub struct Cli {
    /// Project directory.
    #[arg(long, global = true, env = "UPSILON_PROJECT", default_value = ".")]
    pub project: PathBuf,
    /// Print the JSON artifact instead of the text rendering.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty project.
    Init,
    /// Register a phenomenon from a JSON or XML file.
    AddPhenomenon { file: PathBuf },
    /// Ingest a hypothesis descriptor and deploy its synthesized schema.
    AddHypothesis {
        descriptor: PathBuf,
        /// Phenomenon this hypothesis targets (repeatable).
        #[arg(long = "target")]
        targets: Vec<u32>,
    },
    /// Record that a hypothesis targets a phenomenon.
    AddTarget {
        #[arg(long)]
        phi: u32,
        #[arg(long)]
        upsilon: u32,
    },
    /// Load a trial CSV.
    LoadTrial {
        csv: PathBuf,
        #[arg(long)]
        phi: u32,
        #[arg(long)]
        upsilon: u32,
    },
    /// Simulate a model manifest; prints the trial CSV unless --load is given.
    Sim {
        model: PathBuf,
        #[arg(long)]
        phi: Option<u32>,
        #[arg(long)]
        upsilon: Option<u32>,
        /// Write the trial CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Load the simulated trial into the project.
        #[arg(long)]
        load: bool,
    },
    /// Introduce uncertainty for a phenomenon.
    UIntro {
        #[arg(long)]
        phi: u32,
    },
    /// Select rows of a certain relation.
    Query {
        relation: String,
        /// attr=value (repeatable).
        #[arg(long = "where", value_parser = parse_pair)]
        predicate: Vec<(String, String)>,
    },
    /// Tuples of a U-relation with their confidence.
    Conf { relation: String },
    /// Condition a phenomenon's worlds on observations.
    Condition {
        #[arg(long)]
        phi: u32,
        #[arg(long)]
        obs: PathBuf,
        /// Observation standard deviation; defaults to the sample standard deviation.
        #[arg(long)]
        sigma: Option<f64>,
        /// Only list rows at this index value.
        #[arg(long)]
        at: Option<f64>,
        /// Rank without writing posteriors back.
        #[arg(long)]
        no_writeback: bool,
    },
    /// Current world probabilities of a phenomenon.
    Predictions {
        #[arg(long)]
        phi: u32,
    },
    /// Dump the world table.
    WorldTable,
    /// Phenomena, hypotheses, targets and stages.
    Catalog,
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

pub fn parse_pair(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected attr=value, got {s:?}")),
    }
}
