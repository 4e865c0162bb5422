//! Run configuration.
//!
//! Every field resolves as: command-line flag, then environment variable,
//! then config file, then built-in default. Flags and variables are merged
//! by clap before they get here; this module layers the file and defaults
//! underneath.
//!
//! | field              | flag                | environment          | file key           | default              |
//! |--------------------|---------------------|----------------------|--------------------|----------------------|
//! | cache directory    | `--cache-dir`       | `NCDKIT_CACHE_DIR`   | `cache_dir`        | none (in-memory)     |
//! | compressor         | `--compressor`      | `NCDKIT_COMPRESSOR`  | `compressor`       | `lz-ref`             |
//! | index size Υ       | `--total`           | `NCDKIT_TOTAL`       | `total`            | 8000000000           |
//! | workers            | `--workers`         | `NCDKIT_WORKERS`     | `workers`          | available cores      |
//! | log level          | `--log-level`       | `NCDKIT_LOG`         | `log_level`        | `warn`               |
//! | compressor table   | none                | none                 | `compressor_table` | none                 |
//! | HTTP provider      | none                | `NCDKIT_HTTP_*`      | `http`             | see `HttpConfig`     |
//!
//! The config file itself comes from `--config` or `NCDKIT_CONFIG`.

use std::path::{Path, PathBuf};

use ncdkit::ngd::{parse_total, HttpConfig, DEFAULT_TOTAL};
use serde::Deserialize;

pub const DEFAULT_COMPRESSOR: &str = "lz-ref";

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub cache_dir: Option<PathBuf>,
    pub compressor: Option<String>,
    pub total: Option<serde_json::Value>,
    pub workers: Option<usize>,
    pub log_level: Option<String>,
    pub compressor_table: Option<PathBuf>,
    pub http: Option<HttpConfig>,
}

impl ConfigFile {
    /// Reads a JSON config. Relative paths inside resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: ConfigFile =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.cache_dir, &mut cfg.compressor_table].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Values given on the command line or through the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub cache_dir: Option<PathBuf>,
    pub compressor: Option<String>,
    pub total: Option<String>,
    pub workers: Option<usize>,
    pub log_level: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cache_dir: Option<PathBuf>,
    pub compressor: String,
    pub total: u64,
    /// Υ came from a flag, the environment or the file rather than the default.
    pub total_explicit: bool,
    pub workers: usize,
    pub log_level: log::LevelFilter,
    pub compressor_table: Option<PathBuf>,
    pub http: HttpConfig,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(usize::from).unwrap_or(1)
}

fn total_from_json(v: &serde_json::Value) -> Option<u64> {
    match v {
        serde_json::Value::Number(n) => n.as_u64().or_else(|| n.as_f64().and_then(|f| parse_total(&f.to_string()))),
        serde_json::Value::String(s) => parse_total(s),
        _ => None,
    }
}

impl RunConfig {
    pub fn resolve(
        over: Overrides,
        file: ConfigFile,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, String> {
        let total = match (&over.total, &file.total) {
            (Some(s), _) => parse_total(s).ok_or_else(|| format!("total `{s}` is not a positive count"))?,
            (None, Some(v)) => total_from_json(v).ok_or_else(|| format!("config total `{v}` is not a positive count"))?,
            (None, None) => DEFAULT_TOTAL,
        };
        let total_explicit = over.total.is_some() || file.total.is_some();
        let workers = over.workers.or(file.workers).unwrap_or_else(default_workers);
        if workers == 0 {
            return Err("workers must be at least 1".into());
        }
        let level = over.log_level.or(file.log_level).unwrap_or_else(|| "warn".into());
        let log_level = level
            .parse::<log::LevelFilter>()
            .map_err(|_| format!("log level `{level}` is not one of off, error, warn, info, debug, trace"))?;

        // Config file, then NCDKIT_HTTP_* variables; Υ always follows `total`.
        let mut http = file.http.unwrap_or_default();
        http.apply_env(|k| if k == "NCDKIT_TOTAL" { None } else { env(k) })
            .map_err(|e| e.to_string())?;
        http.total = total;

        Ok(Self {
            cache_dir: over.cache_dir.or(file.cache_dir),
            compressor: over.compressor.or(file.compressor).unwrap_or_else(|| DEFAULT_COMPRESSOR.into()),
            total,
            total_explicit,
            workers,
            log_level,
            compressor_table: file.compressor_table,
            http,
        })
    }

    pub fn gamma_log(&self) -> Option<PathBuf> {
        self.cache_dir.as_ref().map(|d| d.join("gamma.log"))
    }

    pub fn hit_store(&self) -> Option<PathBuf> {
        self.cache_dir.as_ref().map(|d| d.join("hits.jsonl"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env(_: &str) -> Option<String> {
        None
    }

    #[test]
    fn defaults() {
        let c = RunConfig::resolve(Overrides::default(), ConfigFile::default(), no_env).unwrap();
        assert_eq!(c.compressor, "lz-ref");
        assert_eq!(c.total, 8_000_000_000);
        assert!(!c.total_explicit);
        assert_eq!(c.cache_dir, None);
        assert_eq!(c.log_level, log::LevelFilter::Warn);
        assert!(c.workers >= 1);
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let file: ConfigFile = serde_json::from_str(
            r#"{"compressor": "gzip", "total": 2e9, "workers": 3, "cache_dir": "/tmp/c", "log_level": "info"}"#,
        )
        .unwrap();
        let c = RunConfig::resolve(Overrides::default(), file.clone(), no_env).unwrap();
        assert_eq!((c.compressor.as_str(), c.total, c.workers), ("gzip", 2_000_000_000, 3));
        assert_eq!(c.http.total, 2_000_000_000);
        let over = Overrides {
            compressor: Some("lz-ref".into()),
            total: Some("5e10".into()),
            workers: Some(8),
            ..Overrides::default()
        };
        let c = RunConfig::resolve(over, file, no_env).unwrap();
        assert_eq!((c.compressor.as_str(), c.total, c.workers), ("lz-ref", 50_000_000_000, 8));
        assert_eq!(c.cache_dir, Some(PathBuf::from("/tmp/c")));
        assert_eq!(c.log_level, log::LevelFilter::Info);
    }

    #[test]
    fn http_env_beats_file() {
        let file: ConfigFile = serde_json::from_str(
            r#"{"http": {"endpoint": "https://a.example/?q={query}", "requests_per_second": 2}}"#,
        )
        .unwrap();
        let env = |k: &str| (k == "NCDKIT_HTTP_ENDPOINT").then(|| "https://b.example/?q={query}".to_string());
        let c = RunConfig::resolve(Overrides::default(), file, env).unwrap();
        assert_eq!(c.http.endpoint, "https://b.example/?q={query}");
        assert_eq!(c.http.requests_per_second, 2.0);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |o: Overrides| RunConfig::resolve(o, ConfigFile::default(), no_env).is_err();
        assert!(bad(Overrides { workers: Some(0), ..Default::default() }));
        assert!(bad(Overrides { total: Some("lots".into()), ..Default::default() }));
        assert!(bad(Overrides { log_level: Some("loud".into()), ..Default::default() }));
        assert!(serde_json::from_str::<ConfigFile>(r#"{"colour": "blue"}"#).is_err());
    }

    #[test]
    fn readme_example_parses() {
        let readme = include_str!("../../../README.md");
        let section = &readme[readme.find("## Configuration").unwrap()..];
        let start = section.find("```json\n").unwrap() + 8;
        let body = &section[start..start + section[start..].find("```").unwrap()];
        let file: ConfigFile = serde_json::from_str(body).unwrap();
        let c = RunConfig::resolve(Overrides::default(), file, no_env).unwrap();
        assert_eq!((c.total, c.workers), (8_000_000_000, 4));
        assert_eq!(c.http.count_field, "result.total");
    }
}
