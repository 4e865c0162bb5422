use std::io::{Read, Write};
use std::process::{Command, Stdio};

use super::{Compressor, CompressorError, CompressorProfile};

/// Declaration of an external compressor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSpec {
    pub id: String,
    /// Whitespace-separated argv that compresses stdin to stdout.
    pub command: String,
    /// Whitespace-separated argv whose first stdout line is the version.
    pub version_probe: String,
    pub deterministic: bool,
}

impl ExternalSpec {
    pub fn parse_table(text: &str) -> Result<Vec<ExternalSpec>, CompressorError> {
        let mut specs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let bad = |message: &str| CompressorError::Registry {
                line: line_no,
                message: message.to_string(),
            };
            if !(3..=4).contains(&fields.len()) {
                return Err(bad("expected `id<TAB>command<TAB>version probe[<TAB>deterministic]`"));
            }
            if fields[0].is_empty() || fields[1].is_empty() {
                return Err(bad("id and command must be non-empty"));
            }
            let deterministic = match fields.get(3) {
                None | Some(&"true") => true,
                Some(&"false") => false,
                Some(_) => return Err(bad("deterministic must be `true` or `false`")),
            };
            specs.push(ExternalSpec {
                id: fields[0].to_string(),
                command: fields[1].to_string(),
                version_probe: fields[2].to_string(),
                deterministic,
            });
        }
        Ok(specs)
    }
}

/// Adapter over a tool that compresses stdin to stdout. A fresh process is
/// spawned per call, so concurrent callers never share a pipe.
#[derive(Debug, Clone)]
pub struct ExternalCompressor {
    argv: Vec<String>,
    profile: CompressorProfile,
}

fn split_argv(cmd: &str) -> Vec<String> {
    cmd.split_whitespace().map(str::to_string).collect()
}

impl ExternalCompressor {
    /// Builds the adapter and resolves its version by running the probe.
    pub fn new(spec: ExternalSpec) -> Result<Self, CompressorError> {
        let failure = |message: String| CompressorError::CompressorFailure {
            id: spec.id.clone(),
            message,
        };
        let version = if spec.version_probe.trim().is_empty() {
            "unknown".to_string()
        } else {
            let probe = split_argv(&spec.version_probe);
            let out = Command::new(&probe[0])
                .args(&probe[1..])
                .stdin(Stdio::null())
                .output()
                .map_err(|e| failure(format!("version probe: {e}")))?;
            let text = if out.stdout.is_empty() { out.stderr } else { out.stdout };
            String::from_utf8_lossy(&text)
                .lines()
                .next()
                .unwrap_or("unknown")
                .trim()
                .to_string()
        };
        let argv = split_argv(&spec.command);
        Ok(Self {
            profile: CompressorProfile {
                id: spec.id.clone(),
                deterministic: spec.deterministic,
                params: vec![("command".into(), spec.command.clone())],
                version,
            },
            argv,
        })
    }
}

impl Compressor for ExternalCompressor {
    fn profile(&self) -> &CompressorProfile {
        &self.profile
    }

    fn compressed_size(&self, data: &[u8]) -> Result<u64, CompressorError> {
        let failure = |message: String| CompressorError::CompressorFailure {
            id: self.profile.id.clone(),
            message,
        };
        let mut child = Command::new(&self.argv[0])
            .args(&self.argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| failure(format!("spawn: {e}")))?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = child.stdout.take().expect("piped stdout");
        // Feed stdin from a scoped thread so a tool that streams output
        // before consuming all input cannot deadlock us.
        let (written, counted) = std::thread::scope(|s| {
            let writer = s.spawn(move || stdin.write_all(data));
            let mut count = 0u64;
            let mut buf = [0u8; 8192];
            let read = loop {
                match stdout.read(&mut buf) {
                    Ok(0) => break Ok(count),
                    Ok(n) => count += n as u64,
                    Err(e) => break Err(e),
                }
            };
            (writer.join().expect("stdin writer panicked"), read)
        });
        let status = child.wait().map_err(|e| failure(format!("wait: {e}")))?;
        written.map_err(|e| failure(format!("stdin: {e}")))?;
        let count = counted.map_err(|e| failure(format!("stdout: {e}")))?;
        if !status.success() {
            return Err(failure(format!("exited with {status}")));
        }
        Ok(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_table() {
        let text = "# id\tcommand\tversion\n\
                    gzip\tgzip -c -9 -n\tgzip --version\n\
                    \n\
                    cat\tcat\t\tfalse\n";
        let specs = ExternalSpec::parse_table(text).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].command, "gzip -c -9 -n");
        assert!(specs[0].deterministic);
        assert!(!specs[1].deterministic);
    }

    #[test]
    fn rejects_short_records() {
        let err = ExternalSpec::parse_table("ok\tcat\tx\nbroken\n").unwrap_err();
        assert!(matches!(err, CompressorError::Registry { line: 2, .. }));
    }

    #[test]
    fn cat_adapter_counts_bytes() {
        let c = ExternalCompressor::new(ExternalSpec {
            id: "cat".into(),
            command: "cat".into(),
            version_probe: String::new(),
            deterministic: true,
        })
        .unwrap();
        assert_eq!(c.compressed_size(b"hello").unwrap(), 5);
        let big = vec![7u8; 300_000];
        assert_eq!(c.compressed_size(&big).unwrap(), 300_000);
    }

    #[test]
    fn missing_binary_is_a_failure() {
        let c = ExternalCompressor::new(ExternalSpec {
            id: "nope".into(),
            command: "/definitely/not/here".into(),
            version_probe: String::new(),
            deterministic: true,
        })
        .unwrap();
        assert!(matches!(
            c.compressed_size(b"x"),
            Err(CompressorError::CompressorFailure { .. })
        ));
    }

    #[test]
    fn failing_tool_is_reported() {
        let c = ExternalCompressor::new(ExternalSpec {
            id: "false".into(),
            command: "false".into(),
            version_probe: String::new(),
            deterministic: true,
        })
        .unwrap();
        assert!(c.compressed_size(b"x").is_err());
    }
}
