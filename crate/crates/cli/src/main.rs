//! `illocute`: run the review server and work with annotation-set files.
//!
//! Exit codes: 0 success, 1 domain failure (invalid acts, unknown
//! documents, hash mismatches), 2 environment failure (unreadable files,
//! bad configuration, unbindable address).

mod commands;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use illocute_core::geometry::OrphanThreshold;
use illocute_core::DocumentId;

#[derive(Debug, Parser)]
#[command(name = "illocute", version, about = "Speech-act annotation of 3D design models")]
struct Cli {
    /// Directory holding the store journal and meshes.
    #[arg(long, global = true, default_value = "illocute-data")]
    data_dir: PathBuf,

    /// Fraction of the bounding-box diagonal beyond which a remapped anchor
    /// is orphaned.
    #[arg(long, global = true, default_value_t = 0.05, value_parser = parse_threshold)]
    orphan_threshold: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the review service until interrupted.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// TOML file of `[[token]]` entries (token, participant, role).
        #[arg(long)]
        tokens: PathBuf,
    },
    /// Check every act in an annotation-set file.
    Validate { file: PathBuf },
    /// Write a document's annotation set.
    Export {
        document: DocumentId,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load an annotation-set file into the store.
    Import {
        file: PathBuf,
        /// Mesh of the set's document, needed when the store does not know it.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Render the minute of a document revision.
    Minute {
        document: DocumentId,
        /// Defaults to the latest revision.
        #[arg(long)]
        revision: Option<u32>,
        #[arg(long, value_enum, default_value_t = Format::Html)]
        format: Format,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Html,
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    let value: f64 = s.parse().map_err(|e| format!("{e}"))?;
    OrphanThreshold::new(value).map(f64::from).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("illocute: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
