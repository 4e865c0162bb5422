//! `ncdkit`: compression distances, classification trees and hit-count
//! distances from the command line.
//!
//! Exit status: 0 on success, 1 on a usage error (with a one-line remedy on
//! stderr), 2 on a data or provider error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ncdkit", version, about = "Compression-based distances and classification trees")]
struct Cli {
    /// JSON config file (see README for the keys).
    #[arg(long, global = true, env = "NCDKIT_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for the persistent Γ cache and hit-count store [default: none, in-memory only].
    #[arg(long, global = true, env = "NCDKIT_CACHE_DIR", value_name = "DIR")]
    cache_dir: Option<PathBuf>,

    /// off, error, warn, info, debug or trace [default: warn].
    #[arg(long, global = true, env = "NCDKIT_LOG", value_name = "LEVEL")]
    log_level: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RecordFormat {
    Text,
    Tsv,
}

#[derive(Debug, Args)]
struct CompressorArg {
    /// Compressor id [default: lz-ref].
    #[arg(long, env = "NCDKIT_COMPRESSOR", value_name = "ID")]
    compressor: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// NCD between two files.
    Ncd {
        file_a: PathBuf,
        file_b: PathBuf,
        #[command(flatten)]
        compressor: CompressorArg,
        #[arg(long, value_enum, default_value = "text")]
        format: RecordFormat,
    },
    /// Pairwise NCD matrix over a corpus manifest, as TSV.
    Matrix {
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        #[command(flatten)]
        compressor: CompressorArg,
        /// Parallel compression jobs [default: available cores].
        #[arg(long, env = "NCDKIT_WORKERS", value_name = "N")]
        workers: Option<usize>,
        /// Output file [default: stdout].
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Classification tree from a matrix TSV.
    Tree {
        #[arg(long, value_name = "PATH")]
        matrix: PathBuf,
        #[arg(long, value_enum, default_value = "nj")]
        method: commands::Method,
        #[arg(long, value_enum, default_value = "newick")]
        format: commands::TreeOut,
        /// Output file [default: stdout].
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Normalized Google distance between two terms.
    Ngd {
        /// Two comma-separated terms, e.g. `horse,rider`.
        #[arg(long, value_name = "X,Y")]
        terms: String,
        #[arg(long, value_enum, default_value = "offline")]
        provider: commands::ProviderKind,
        /// Corpus manifest for the offline provider.
        #[arg(long, value_name = "PATH")]
        corpus: Option<PathBuf>,
        /// Index size Υ. Overrides the provider's own total [default: 8e9 for http, document count for offline].
        #[arg(long, env = "NCDKIT_TOTAL", value_name = "N")]
        total: Option<String>,
        /// Reuse stored http counts younger than this.
        #[arg(long, default_value_t = 168, value_name = "HOURS")]
        max_age_hours: i64,
        #[arg(long, value_enum, default_value = "text")]
        format: RecordFormat,
    },
    /// Bounded Kolmogorov complexity on the micro-machine, or the theorem audit.
    Toyk {
        /// Binary string x; prints K(x), or K(x|y) with --given.
        #[arg(long, value_name = "BITS", conflicts_with = "audit_n", required_unless_present = "audit_n")]
        string: Option<String>,
        /// Condition y for K(x|y).
        #[arg(long, value_name = "BITS", requires = "string")]
        given: Option<String>,
        /// Audit the distance axioms over every string of length ≤ N.
        #[arg(long, value_name = "N")]
        audit_n: Option<usize>,
        /// Longest program in bits.
        #[arg(long, default_value_t = 18, value_name = "BITS")]
        max_len: usize,
        /// Instruction budget per run.
        #[arg(long, default_value_t = 1000, value_name = "N")]
        steps: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: RecordFormat,
    },
    /// Idempotency, symmetry and monotonicity of a compressor over a corpus.
    AuditCompressor {
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        #[command(flatten)]
        compressor: CompressorArg,
        #[arg(long, value_enum, default_value = "text")]
        format: RecordFormat,
    },
    /// List registered compressor ids.
    Compressors,
    /// Γ cache maintenance.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Debug, Subcommand)]
enum CacheAction {
    /// Rewrite the Γ log with one record per key.
    Compact,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            if let Some(remedy) = e.remedy() {
                eprintln!("hint: {remedy}");
            }
            ExitCode::from(e.code())
        }
    }
}
