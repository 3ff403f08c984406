//! `cct`: batch front end for the covert channel pattern toolkit.
//!
//! Subcommands: `catalog` (inspect/export the pattern catalog), `settings`
//! (validate/list settings files), `run` (execute an experiment spec),
//! `calibrate` (derive detector thresholds from an overt trace) and
//! `trace` (inspect/convert trace files). All configuration comes from
//! files and flags; exit codes are 0 on success, 2 for configuration
//! errors, 3 for runtime/capacity errors.

mod spec_file;

use cct_core::catalog::{
    catalog_stats, export_catalog, import_catalog, load_catalog, ExportFormat, PatternId,
};
use cct_core::countermeasures::applicability;
use cct_core::countermeasures::detectors::{
    detect_compressibility, detect_epsilon_similarity, detect_iat_entropy, EntropyBins,
};
use cct_core::error::{Error, Result};
use cct_core::experiment::run_experiment;
use cct_core::protocol::{load_trace, save_trace, SchemaRegistry};
use cct_core::variation::{default_settings, parse_settings, render_settings};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "cct", version, about = "covert channel pattern toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect or export the pattern catalog.
    Catalog(CatalogArgs),
    /// Validate or list pattern settings files.
    Settings {
        #[command(subcommand)]
        action: SettingsAction,
    },
    /// Run an experiment spec and write its report.
    Run {
        /// Experiment spec file.
        spec: PathBuf,
    },
    /// Derive detector thresholds from an overt trace.
    Calibrate {
        /// Overt `.cct` trace.
        trace: PathBuf,
        #[arg(long, default_value_t = 16)]
        bins: usize,
        /// Rounding grid for the compressibility detector, in us.
        #[arg(long, default_value_t = 100)]
        rounding: u64,
        #[arg(long, default_value_t = 0.02)]
        epsilon: f64,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Inspect or convert trace files.
    Trace {
        #[command(subcommand)]
        action: TraceAction,
    },
}

#[derive(Args)]
struct CatalogArgs {
    /// Print catalog statistics.
    #[arg(long)]
    stats: bool,
    /// Print one pattern's record.
    #[arg(long)]
    pattern: Option<String>,
    /// Export the catalog to a file.
    #[arg(long)]
    export: Option<PathBuf>,
    /// Export format: markup or tabular.
    #[arg(long, default_value = "markup")]
    format: String,
    /// Validate a previously exported catalog file.
    #[arg(long)]
    import: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SettingsAction {
    /// Parse and validate a settings file against the schema registry.
    Validate {
        file: PathBuf,
        /// Additional declarative schema files to load first.
        #[arg(long)]
        schema_file: Vec<PathBuf>,
    },
    /// List the entries of a settings file (or the shipped defaults).
    List { file: Option<PathBuf> },
}

#[derive(Subcommand)]
enum TraceAction {
    /// Summarize a trace file.
    Inspect { file: PathBuf },
    /// Convert a trace to a deterministic text dump.
    Convert { input: PathBuf, output: PathBuf },
}

fn cmd_catalog(args: &CatalogArgs) -> Result<()> {
    let mut did_something = false;
    if args.stats {
        did_something = true;
        let stats = catalog_stats();
        println!("{}", stats.headline());
        println!("top-4 (children folded into parents):");
        for (p, c) in &stats.top4 {
            let d = cct_core::catalog::descriptor(*p);
            println!("  {:<5} {:<22} {c}", p.code(), d.name);
        }
        println!("per-pattern technique counts:");
        for (p, c) in &stats.per_pattern_counts {
            let d = cct_core::catalog::descriptor(*p);
            println!("  {:<5} {:<22} {c}", p.code(), d.name);
        }
    }
    if let Some(id) = &args.pattern {
        did_something = true;
        let pattern =
            PatternId::parse(id).ok_or_else(|| Error::config(format!("unknown pattern {id:?}")))?;
        let d = cct_core::catalog::descriptor(pattern);
        println!("pattern id: {}", d.id.code());
        println!("name: {}", d.name);
        if let Some(alias) = &d.alias {
            println!("alias: {alias}");
        }
        println!("context: {}", d.context_path.join(" > "));
        println!("semantic: {}", d.semantic.name());
        println!("syntax: {}", d.syntax.name());
        println!("noise: {}", d.noise.name());
        println!("evidence: {} techniques", d.evidence_count);
        for f in &d.footnotes {
            println!("note {f}");
        }
        let a = applicability(pattern);
        let names = |v: &[cct_core::countermeasures::Countermeasure]| {
            if v.is_empty() {
                "-".to_string()
            } else {
                v.iter().map(|c| c.name()).collect::<Vec<_>>().join(", ")
            }
        };
        println!("elimination: {}", names(&a.elimination));
        println!("limitation: {}", names(&a.limitation));
        println!("detection: {}", names(&a.detection));
    }
    if let Some(path) = &args.export {
        did_something = true;
        let format = match args.format.as_str() {
            "markup" => ExportFormat::StructuredMarkup,
            "tabular" => ExportFormat::Tabular,
            other => return Err(Error::config(format!("unknown export format {other:?}"))),
        };
        std::fs::write(path, export_catalog(&load_catalog(), format))?;
        println!("exported 15 records to {}", path.display());
    }
    if let Some(path) = &args.import {
        did_something = true;
        let bytes = std::fs::read(path)?;
        let records = import_catalog(&bytes)?;
        println!("imported {} records from {}", records.len(), path.display());
    }
    if !did_something {
        let stats = catalog_stats();
        println!("{}", stats.headline());
    }
    Ok(())
}

fn cmd_settings(action: &SettingsAction) -> Result<()> {
    match action {
        SettingsAction::Validate { file, schema_file } => {
            let mut registry = SchemaRegistry::new();
            for path in schema_file {
                let text = std::fs::read_to_string(path)?;
                registry.load_schema_file(&text)?;
            }
            let text = std::fs::read_to_string(file)?;
            let mut catalog = parse_settings(&text)?;
            catalog.validate(&registry)?;
            println!("ok: {} entries", catalog.entries.len());
        }
        SettingsAction::List { file } => {
            let catalog = match file {
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    let mut c = parse_settings(&text)?;
                    c.validate(&SchemaRegistry::new())?;
                    c
                }
                None => default_settings(),
            };
            print!("{}", render_settings(&catalog));
        }
    }
    Ok(())
}

fn cmd_run(spec_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(spec_path)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let resolved = spec_file::resolve_spec(&text, base)?;
    let x = &resolved.experiment;

    for path in [
        &resolved.outputs.report,
        &resolved.outputs.covert_trace,
        &resolved.outputs.received_trace,
        &resolved.outputs.carrier_trace,
    ]
    .into_iter()
    .flatten()
    {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
    }
    if let Some(path) = &resolved.outputs.carrier_trace {
        save_trace(&x.carrier, path)?;
    }
    if resolved.outputs.covert_trace.is_some() || resolved.outputs.received_trace.is_some() {
        let embedded = x.embedding.embed(&x.message, &x.carrier)?;
        if let Some(path) = &resolved.outputs.covert_trace {
            save_trace(&embedded.stream, path)?;
        }
        if let Some(path) = &resolved.outputs.received_trace {
            let transmitted = cct_core::channel::transmit(&x.channel, &embedded.stream)?;
            let observed = match &x.warden {
                Some(w) => cct_core::countermeasures::normalize(w, &transmitted)?.0,
                None => transmitted,
            };
            save_trace(&observed, path)?;
        }
    }
    let report = run_experiment(x)?;
    let rendered = report.render();
    if let Some(path) = &resolved.outputs.report {
        std::fs::write(path, &rendered)?;
    }
    print!("{rendered}");
    Ok(())
}

fn cmd_calibrate(
    trace: &Path,
    bins: usize,
    rounding: u64,
    epsilon: f64,
    output: &Path,
) -> Result<()> {
    let stream = load_trace(trace)?;
    let iats = stream.iats();
    if iats.is_empty() {
        return Err(Error::config("trace has no inter-arrival times"));
    }
    let edges = EntropyBins::calibrate(&iats, bins)?;
    let compressibility = detect_compressibility(&iats, rounding)?;
    let similarity = detect_epsilon_similarity(&iats, epsilon)?;
    let entropy = detect_iat_entropy(&iats, &edges)?;
    let mut out = String::new();
    out.push_str("calibration-version: 1\n");
    out.push_str(&format!("source-pdus: {}\n", stream.len()));
    out.push_str(&format!("rounding-us: {rounding}\n"));
    out.push_str(&format!("epsilon: {epsilon:.6}\n"));
    out.push_str(&format!("bins: {bins}\n"));
    let edge_list: Vec<String> = edges.edges.iter().map(u64::to_string).collect();
    out.push_str(&format!("bin-edges-us: {}\n", edge_list.join(",")));
    out.push_str(&format!("compressibility-baseline: {compressibility:.6}\n"));
    out.push_str(&format!("epsilon-similarity-baseline: {similarity:.6}\n"));
    out.push_str(&format!("iat-entropy-baseline: {entropy:.6}\n"));
    std::fs::write(output, &out)?;
    print!("{out}");
    Ok(())
}

fn cmd_trace(action: &TraceAction) -> Result<()> {
    match action {
        TraceAction::Inspect { file } => {
            let stream = load_trace(file)?;
            println!("schema: {}", stream.schema.name);
            println!("pdus: {}", stream.len());
            if let (Some(first), Some(last)) = (stream.pdus.first(), stream.pdus.last()) {
                println!("first-timestamp-us: {}", first.timestamp_us);
                println!("last-timestamp-us: {}", last.timestamp_us);
            }
            let violations = stream.validate();
            println!("violations: {}", violations.len());
            for (seq, v) in violations.iter().take(10) {
                println!("  seq {seq}: {v}");
            }
        }
        TraceAction::Convert { input, output } => {
            let stream = load_trace(input)?;
            let mut out = String::new();
            out.push_str(&format!("schema: {}\n", stream.schema.name));
            out.push_str(&format!("pdus: {}\n", stream.len()));
            for p in &stream.pdus {
                let header: String = p
                    .header
                    .as_bytes()
                    .iter()
                    .map(|b| format!("{b:02x}"))
                    .collect();
                let options: Vec<String> = p
                    .options
                    .iter()
                    .map(|e| {
                        let hex: String = e.payload.iter().map(|b| format!("{b:02x}")).collect();
                        format!("{}:{hex}", e.id)
                    })
                    .collect();
                out.push_str(&format!(
                    "pdu seq={} ts={} corrupted={} header={header} options=[{}] payload={}\n",
                    p.seq,
                    p.timestamp_us,
                    p.corrupted,
                    options.join(" "),
                    p.payload.len()
                ));
            }
            std::fs::write(output, out)?;
            println!("wrote {}", output.display());
        }
    }
    Ok(())
}

fn main() -> std::process::ExitCode {
    // Die quietly when the output pipe closes, like other stream tools.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Catalog(args) => cmd_catalog(args),
        Command::Settings { action } => cmd_settings(action),
        Command::Run { spec } => cmd_run(spec),
        Command::Calibrate {
            trace,
            bins,
            rounding,
            epsilon,
            output,
        } => cmd_calibrate(trace, *bins, *rounding, *epsilon, output),
        Command::Trace { action } => cmd_trace(action),
    };
    match result {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(e.exit_code() as u8)
        }
    }
}
