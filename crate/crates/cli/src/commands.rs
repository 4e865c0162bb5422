//! Subcommand bodies and the error-to-exit-code mapping.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::ValueEnum;
use ncdkit::cluster::{build_tree, TreeFormat, TreeMethod};
use ncdkit::compressor::{normality_audit, Compressor, CompressorError, Registry};
use ncdkit::corpus::{ingest, CorpusError, CorpusManifest, Document};
use ncdkit::distances::ncd;
use ncdkit::matrix::{build_matrix, compact, DistanceMatrix, GammaCache};
use ncdkit::ngd::{ngd, CachedProvider, HitCountProvider, HttpProvider, NgdError, NgdRecord, OfflineProvider};
use ncdkit::toyk::{k_bounded, k_cond_bounded, theorem_audit, Bits, Budget};

use crate::config::{ConfigFile, Overrides, RunConfig};
use crate::{CacheAction, Cli, Command, CompressorArg, RecordFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Nj,
    Upgma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TreeOut {
    Newick,
    Dot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Offline,
    Http,
}

/// A failed command: exit code 1 for usage, 2 for data or provider trouble.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
    remedy: Option<String>,
}

impl CliError {
    fn usage(message: impl Into<String>, remedy: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
            remedy: Some(remedy.into()),
        }
    }

    fn data(message: impl ToString) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
            remedy: None,
        }
    }

    pub fn code(&self) -> u8 {
        self.code
    }

    pub fn message(&self) -> &str {
        &self.message
    }

    pub fn remedy(&self) -> Option<&str> {
        self.remedy.as_deref()
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(
            format!("{what} `{}` does not exist", path.display()),
            format!("check the path given for the {what}"),
        ))
    }
}

fn corpus_error(e: CorpusError) -> CliError {
    match e {
        CorpusError::MissingFile { .. } => CliError::usage(e.to_string(), "fix the entry path in the manifest"),
        CorpusError::UnknownStep(_) | CorpusError::BadStepParam { .. } | CorpusError::Manifest { .. } => {
            CliError::usage(e.to_string(), "see README for the manifest schema and step names")
        }
        _ => CliError::data(e),
    }
}

fn load_docs(manifest: &Path) -> Result<Vec<Document>> {
    require_file(manifest, "manifest")?;
    let m = CorpusManifest::load(manifest).map_err(corpus_error)?;
    ingest(&m).map_err(corpus_error)
}

fn registry(cfg: &RunConfig) -> Result<Registry> {
    let mut r = Registry::with_builtins();
    if let Some(table) = &cfg.compressor_table {
        r.load_table_file(table).map_err(|e| {
            CliError::usage(
                format!("compressor table {}: {e}", table.display()),
                "each line is: id<TAB>command<TAB>version probe[<TAB>deterministic]",
            )
        })?;
    }
    Ok(r)
}

fn compressor(cfg: &RunConfig, arg: &CompressorArg) -> Result<Arc<dyn Compressor>> {
    let r = registry(cfg)?;
    let id = arg.compressor.as_deref().unwrap_or(&cfg.compressor);
    r.get(id).map_err(|e| match e {
        CompressorError::UnknownCompressor(_) => {
            let known: Vec<&str> = r.ids().collect();
            CliError::usage(e.to_string(), format!("choose one of: {}", known.join(", ")))
        }
        other => CliError::data(other),
    })
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn open_cache(cfg: &RunConfig) -> Result<GammaCache> {
    match cfg.gamma_log() {
        Some(path) => GammaCache::open(&path).map_err(|e| CliError {
            code: 2,
            message: e.to_string(),
            remedy: Some("run `ncdkit cache compact` or delete the damaged log".into()),
        }),
        None => Ok(GammaCache::in_memory()),
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let file = match &cli.config {
        Some(path) => {
            require_file(path, "config file")?;
            ConfigFile::load(path).map_err(|e| CliError::usage(e, "see README for the config keys"))?
        }
        None => ConfigFile::default(),
    };
    let mut over = Overrides {
        cache_dir: cli.cache_dir.clone(),
        log_level: cli.log_level.clone(),
        ..Overrides::default()
    };
    match &cli.command {
        Command::Ncd { compressor, .. } | Command::AuditCompressor { compressor, .. } => {
            over.compressor = compressor.compressor.clone();
        }
        Command::Matrix { compressor, workers, .. } => {
            over.compressor = compressor.compressor.clone();
            over.workers = *workers;
        }
        Command::Ngd { total, .. } => over.total = total.clone(),
        _ => {}
    }
    RunConfig::resolve(over, file, |k| std::env::var(k).ok())
        .map_err(|e| CliError::usage(e, "fix the flag, variable or config value named above"))
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli)?;
    env_logger::Builder::new()
        .filter_level(cfg.log_level)
        .format_timestamp(None)
        .init();
    log::debug!("resolved configuration: {cfg:?}");

    match cli.command {
        Command::Ncd {
            file_a,
            file_b,
            compressor: arg,
            format,
        } => cmd_ncd(&cfg, &file_a, &file_b, &arg, format),
        Command::Matrix {
            manifest,
            compressor: arg,
            out,
            ..
        } => cmd_matrix(&cfg, &manifest, &arg, out.as_deref()),
        Command::Tree {
            matrix,
            method,
            format,
            out,
        } => cmd_tree(&matrix, method, format, out.as_deref()),
        Command::Ngd {
            terms,
            provider,
            corpus,
            max_age_hours,
            format,
            ..
        } => cmd_ngd(&cfg, &terms, provider, corpus.as_deref(), max_age_hours, format),
        Command::Toyk {
            string,
            given,
            audit_n,
            max_len,
            steps,
            format,
        } => cmd_toyk(string.as_deref(), given.as_deref(), audit_n, max_len, steps, format),
        Command::AuditCompressor {
            manifest,
            compressor: arg,
            format,
        } => cmd_audit_compressor(&cfg, &manifest, &arg, format),
        Command::Compressors => {
            for id in registry(&cfg)?.ids() {
                println!("{id}");
            }
            Ok(())
        }
        Command::Cache {
            action: CacheAction::Compact,
        } => cmd_cache_compact(&cfg),
    }
}

fn cmd_ncd(cfg: &RunConfig, a: &Path, b: &Path, arg: &CompressorArg, format: RecordFormat) -> Result<()> {
    let c = compressor(cfg, arg)?;
    require_file(a, "input file")?;
    require_file(b, "input file")?;
    let read = |p: &Path| std::fs::read(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())));
    let (x, y) = (read(a)?, read(b)?);
    let d = ncd(&x, &y, &*c).map_err(CliError::data)?;
    match format {
        RecordFormat::Text => {
            print!("NCD({}, {}) = {:.6}  [compressor={}]", a.display(), b.display(), d.value, d.source_id);
            if d.clamped {
                print!("  (numerator clamped at 0)");
            }
            println!();
        }
        RecordFormat::Tsv => {
            println!("metric\tx\ty\tvalue\tcompressor\tclamped\tinputs_hash");
            println!(
                "{}\t{}\t{}\t{:.6}\t{}\t{}\t{}",
                d.metric,
                a.display(),
                b.display(),
                d.value,
                d.source_id,
                d.clamped,
                d.inputs_hash
            );
        }
    }
    Ok(())
}

fn cmd_matrix(cfg: &RunConfig, manifest: &Path, arg: &CompressorArg, out: Option<&Path>) -> Result<()> {
    let c = compressor(cfg, arg)?;
    let docs = load_docs(manifest)?;
    let cache = open_cache(cfg)?;
    let m = build_matrix(&docs, &*c, &cache, cfg.workers).map_err(CliError::data)?;
    if let Some(meta) = &m.build_meta {
        log::info!(
            "built {}x{} matrix at {} with {} workers: {} compressor calls, {} cache hits, {} clamped",
            m.n(),
            m.n(),
            meta.timestamp,
            meta.workers,
            meta.compressor_calls,
            meta.cache_hits,
            meta.clamped
        );
    }
    write_out(out, &m.to_tsv())
}

fn cmd_tree(matrix: &Path, method: Method, format: TreeOut, out: Option<&Path>) -> Result<()> {
    require_file(matrix, "matrix")?;
    let m = DistanceMatrix::import(matrix).map_err(CliError::data)?;
    let method = match method {
        Method::Nj => TreeMethod::NeighborJoining,
        Method::Upgma => TreeMethod::Upgma,
    };
    let tree = build_tree(&m, method).map_err(CliError::data)?;
    if tree.clamped_branches() > 0 {
        log::warn!("{} negative branch lengths were clamped to 0", tree.clamped_branches());
    }
    let format = match format {
        TreeOut::Newick => TreeFormat::Newick,
        TreeOut::Dot => TreeFormat::Dot,
    };
    write_out(out, &tree.export(format))
}

/// Replaces the inner provider's Υ.
struct WithTotal<P>(P, u64);

impl<P: HitCountProvider> HitCountProvider for WithTotal<P> {
    fn id(&self) -> &str {
        self.0.id()
    }
    fn lambda(&self, terms: &[String]) -> std::result::Result<u64, NgdError> {
        self.0.lambda(terms)
    }
    fn total(&self) -> std::result::Result<u64, NgdError> {
        Ok(self.1)
    }
}

fn ngd_error(e: NgdError) -> CliError {
    let remedy = match &e {
        NgdError::AuthFailure(_) => Some("set NCDKIT_HTTP_AUTH_TOKEN (and NCDKIT_HTTP_AUTH_HEADER if needed)"),
        NgdError::RateLimited { .. } => Some("lower NCDKIT_HTTP_RPS or retry later"),
        NgdError::StoreCorrupt { .. } => Some("remove or repair hits.jsonl in the cache directory"),
        NgdError::DegenerateTotal { .. } => Some("pass a larger --total"),
        _ => None,
    };
    CliError {
        code: 2,
        message: e.to_string(),
        remedy: remedy.map(str::to_string),
    }
}

fn cmd_ngd(
    cfg: &RunConfig,
    terms: &str,
    kind: ProviderKind,
    corpus: Option<&Path>,
    max_age_hours: i64,
    format: RecordFormat,
) -> Result<()> {
    let parts: Vec<&str> = terms.split(',').map(str::trim).collect();
    let [x, y] = parts[..] else {
        return Err(CliError::usage(
            format!("--terms `{terms}` must name exactly two terms"),
            "write them comma-separated, e.g. --terms horse,rider",
        ));
    };
    if x.is_empty() || y.is_empty() {
        return Err(CliError::usage("--terms contains an empty term", "e.g. --terms horse,rider"));
    }
    if max_age_hours < 0 {
        return Err(CliError::usage("--max-age-hours must not be negative", "pass 0 to always refresh"));
    }
    let provider: Box<dyn HitCountProvider> = match kind {
        ProviderKind::Offline => {
            let Some(corpus) = corpus else {
                return Err(CliError::usage(
                    "the offline provider needs a corpus",
                    "pass --corpus <manifest.json>",
                ));
            };
            let p = OfflineProvider::new(&load_docs(corpus)?).map_err(ngd_error)?;
            if cfg.total_explicit {
                Box::new(WithTotal(p, cfg.total))
            } else {
                Box::new(p)
            }
        }
        ProviderKind::Http => {
            if corpus.is_some() {
                return Err(CliError::usage(
                    "--corpus only applies to the offline provider",
                    "drop --corpus or use --provider offline",
                ));
            }
            let http = HttpProvider::new(cfg.http.clone()).map_err(|e| match e {
                NgdError::Config(_) => CliError::usage(e.to_string(), "set NCDKIT_HTTP_ENDPOINT or `http.endpoint` in the config file"),
                other => ngd_error(other),
            })?;
            match cfg.hit_store() {
                Some(store) => Box::new(
                    CachedProvider::open(http, &store, chrono::Duration::hours(max_age_hours)).map_err(ngd_error)?,
                ),
                None => Box::new(http),
            }
        }
    };
    let record = ngd(x, y, &*provider).map_err(ngd_error)?;
    match format {
        RecordFormat::Text => println!("{record}"),
        RecordFormat::Tsv => println!("{}\n{}", NgdRecord::tsv_header(), record.to_tsv_row()),
    }
    Ok(())
}

fn parse_bits(s: &str, flag: &str) -> Result<Bits> {
    s.parse()
        .map_err(|_| CliError::usage(format!("{flag} `{s}` is not a binary string"), "use only the characters 0 and 1"))
}

fn cmd_toyk(
    string: Option<&str>,
    given: Option<&str>,
    audit_n: Option<usize>,
    max_len: usize,
    steps: u64,
    format: RecordFormat,
) -> Result<()> {
    let budget = Budget::new(max_len, steps)
        .map_err(|e| CliError::usage(e.to_string(), "lower --max-len or raise --steps"))?;
    if let Some(n) = audit_n {
        let audit = theorem_audit(n, budget).map_err(|e| CliError::usage(e.to_string(), "lower --audit-n"))?;
        match format {
            RecordFormat::Text => print!("{}", audit.to_table()),
            RecordFormat::Tsv => print!("{}", audit.to_tsv()),
        }
        return Ok(());
    }
    let x = parse_bits(string.unwrap_or_default(), "--string")?;
    let result = match given {
        Some(g) => k_cond_bounded(&x, &parse_bits(g, "--given")?, budget),
        None => k_bounded(&x, budget),
    }
    .map_err(CliError::data)?;
    let label = match given {
        Some(g) => format!("K({x}|{})", parse_bits(g, "--given")?),
        None => format!("K({x})"),
    };
    let k = result.k_value.map_or("UNKNOWN".to_string(), |k| k.to_string());
    let (witness, program) = match &result.witness {
        Some(w) => (w.to_string(), w.disassemble()),
        None => ("-".into(), "-".into()),
    };
    let mut s = String::new();
    match format {
        RecordFormat::Text => {
            let _ = writeln!(s, "{label} = {k}  [max_len={max_len} steps={steps}]");
            let _ = writeln!(s, "witness  {witness}");
            let _ = writeln!(s, "program  {program}");
        }
        RecordFormat::Tsv => {
            let _ = writeln!(s, "quantity\tk\tmax_len\tsteps\twitness\tprogram");
            let _ = writeln!(s, "{label}\t{k}\t{max_len}\t{steps}\t{witness}\t{program}");
        }
    }
    print!("{s}");
    Ok(())
}

fn cmd_audit_compressor(cfg: &RunConfig, manifest: &Path, arg: &CompressorArg, format: RecordFormat) -> Result<()> {
    let c = compressor(cfg, arg)?;
    let docs = load_docs(manifest)?;
    let samples: Vec<&[u8]> = docs.iter().map(|d| d.normalized_bytes.as_slice()).collect();
    let report = normality_audit(&*c, &samples).map_err(|e| match e {
        CompressorError::InsufficientSamples(_) => CliError::usage(e.to_string(), "list at least two entries in the manifest"),
        other => CliError::data(other),
    })?;
    match format {
        RecordFormat::Text => print!("{}", report.to_text()),
        RecordFormat::Tsv => print!("{}", report.to_tsv()),
    }
    Ok(())
}

fn cmd_cache_compact(cfg: &RunConfig) -> Result<()> {
    let Some(path): Option<PathBuf> = cfg.gamma_log() else {
        return Err(CliError::usage(
            "no cache directory is configured",
            "pass --cache-dir or set NCDKIT_CACHE_DIR",
        ));
    };
    if !path.exists() {
        println!("{}: nothing to compact", path.display());
        return Ok(());
    }
    let c = compact(&path).map_err(CliError::data)?;
    println!("{}: {} records -> {}", path.display(), c.records_before, c.records_after);
    Ok(())
}
