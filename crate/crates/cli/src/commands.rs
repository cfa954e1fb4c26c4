use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use illocute_core::act::validate_act;
use illocute_core::geometry::{load_mesh, OrphanThreshold};
use illocute_core::minute::{generate_minute, render_minute, MinuteError, MinuteFormat, MinuteSource};
use illocute_core::store::{ParsedSet, SkipReason};
use illocute_core::{AnnotationStore, Mesh, MeshFormat, Query, StoreError, StoreOptions};
use illocute_service::{ReviewService, TokenRegistry};
use thiserror::Error;

use crate::{Cli, Command, Format};

#[derive(Debug, Error)]
pub enum CliError {
    /// The request itself cannot be satisfied.
    #[error("{0}")]
    Domain(String),
    /// Files, configuration or the network let us down.
    #[error("{0}")]
    Environment(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Environment(_) => 2,
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io(_) | StoreError::Json(_) | StoreError::Malformed(_) => CliError::Environment(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<MinuteError> for CliError {
    fn from(e: MinuteError) -> Self {
        match e {
            MinuteError::Store(e) => e.into(),
            other => CliError::Domain(other.to_string()),
        }
    }
}

pub fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let threshold = OrphanThreshold::new(cli.orphan_threshold).map_err(|e| CliError::Environment(e.to_string()))?;
    match cli.command {
        Command::Serve { listen, tokens } => serve(&cli.data_dir, threshold, listen, &tokens),
        Command::Validate { file } => validate(&file),
        Command::Export { document, out } => {
            let store = open_store(&cli.data_dir, threshold)?;
            write_output(out.as_deref(), &store.export_set(document)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Import { file, mesh } => {
            let store = open_store(&cli.data_dir, threshold)?;
            let bytes = read(&file)?;
            let mesh = mesh.map(|p| read_mesh(&p)).transpose()?;
            let report = store.import_set(&bytes, mesh.as_ref())?;
            for s in &report.skipped {
                let who = s.id.map_or_else(|| format!("#{}", s.index), |id| id.to_string());
                eprintln!("skipped {who}: {}", s.reason);
            }
            println!("imported {}, skipped {}", report.imported, report.skipped.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Minute {
            document,
            revision,
            format,
            out,
        } => {
            let store = open_store(&cli.data_dir, threshold)?;
            let doc = store.document(document).map_err(|e| CliError::Domain(e.to_string()))?;
            let revision = revision.unwrap_or(doc.latest().revision);
            let minute = generate_minute(
                &store,
                MinuteSource::Document {
                    document,
                    revision,
                    query: &Query::default(),
                    at: store.clock().now(),
                },
            )?;
            let format = match format {
                Format::Json => MinuteFormat::Json,
                Format::Html => MinuteFormat::Html,
            };
            write_output(out.as_deref(), &render_minute(&minute, format))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn open_store(dir: &Path, orphan_threshold: OrphanThreshold) -> Result<AnnotationStore, CliError> {
    AnnotationStore::open_dir(
        dir,
        StoreOptions {
            orphan_threshold,
            ..StoreOptions::default()
        },
    )
    .map_err(|e| CliError::Environment(format!("{}: {e}", dir.display())))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Environment(format!("{}: {e}", path.display())))
}

fn read_mesh(path: &Path) -> Result<Mesh, CliError> {
    let bytes = read(path)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let format = MeshFormat::detect(name, &bytes)
        .ok_or_else(|| CliError::Environment(format!("{}: unrecognised mesh format", path.display())))?;
    load_mesh(&bytes, format).map_err(|e| CliError::Environment(format!("{}: {e}", path.display())))
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    let result = match out {
        Some(path) => fs::write(path, bytes),
        None => io::stdout().lock().write_all(bytes),
    };
    result.map_err(|e| CliError::Environment(e.to_string()))
}

/// Prints one line per entry and a summary; exit 1 if any entry is invalid.
fn validate(file: &Path) -> Result<ExitCode, CliError> {
    let bytes = read(file)?;
    let parsed = ParsedSet::parse(&bytes).map_err(|e| match e {
        StoreError::SchemaUnsupported(_) => CliError::Domain(e.to_string()),
        other => CliError::Environment(format!("{}: {other}", file.display())),
    })?;
    let kinds: HashMap<_, _> = parsed.entries.iter().flatten().map(|r| (r.id, r.force.kind)).collect();
    let (mut ok, mut invalid) = (0usize, 0usize);
    let mut stdout = io::stdout().lock();
    for entry in &parsed.entries {
        let (who, codes) = match entry {
            Ok(record) => {
                let mut refs = Vec::new();
                let mut codes = Vec::new();
                for r in &record.references {
                    match kinds.get(&r.target) {
                        Some(&kind) => refs.push((kind, r.kind)),
                        None => codes.push(format!("UNKNOWN_REFERENCE({})", r.target)),
                    }
                }
                let report = validate_act(&record.force, &record.utterance, &refs);
                let mut all: Vec<String> = report.codes().into_iter().map(String::from).collect();
                all.extend(codes);
                (record.id.to_string(), all)
            }
            Err(skipped) => {
                let who = skipped
                    .id
                    .map_or_else(|| format!("#{}", skipped.index), |id| id.to_string());
                let code = match &skipped.reason {
                    SkipReason::InvalidAct(_) => "UNDECODABLE_ACT",
                    _ => "MALFORMED",
                };
                (who, vec![code.to_string()])
            }
        };
        let line = if codes.is_empty() {
            ok += 1;
            format!("{who} OK")
        } else {
            invalid += 1;
            format!("{who} {}", codes.join(","))
        };
        writeln!(stdout, "{line}").map_err(|e| CliError::Environment(e.to_string()))?;
    }
    writeln!(stdout, "{ok} ok, {invalid} invalid").map_err(|e| CliError::Environment(e.to_string()))?;
    Ok(if invalid == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn serve(
    data_dir: &Path,
    threshold: OrphanThreshold,
    listen: std::net::SocketAddr,
    tokens: &PathBuf,
) -> Result<ExitCode, CliError> {
    let tokens =
        TokenRegistry::load(tokens).map_err(|e| CliError::Environment(format!("{}: {e}", tokens.display())))?;
    fs::create_dir_all(data_dir).map_err(|e| CliError::Environment(format!("{}: {e}", data_dir.display())))?;
    let store = open_store(data_dir, threshold)?;
    let service = Arc::new(ReviewService::new(store, tokens));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Environment(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(|e| CliError::Environment(format!("cannot bind {listen}: {e}")))?;
        let bound = listener
            .local_addr()
            .map_err(|e| CliError::Environment(e.to_string()))?;
        eprintln!("listening on {bound}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        illocute_service::serve(listener, service, shutdown)
            .await
            .map_err(|e| CliError::Environment(e.to_string()))?;
        Ok(ExitCode::SUCCESS)
    })
}
