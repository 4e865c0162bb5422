use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::machine::{C_COPY, MACHINE_VERSION};
use super::search::{Budget, ConditionalTable};
use super::ToykError;

/// Largest string length the audit enumerates.
pub const MAX_AUDIT_LEN: usize = 5;

/// Additive triangle constant for machine `toyk-m1`: measured with
/// `theorem_audit(4, Budget { max_len: 18, steps: 1000 })` and frozen as a
/// regression bound (the maximum, 0, is attained at x = y = z = ε). Every
/// triple must satisfy
/// `slack <= C_TRI + 2 * log2(ID(x,y) + ID(y,z) + 1)`.
pub const C_TRI: f64 = 0.0;

/// The worst triangle triple and the log term printed next to it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstTriple {
    pub x: String,
    pub y: String,
    pub z: String,
    pub id_xz: usize,
    pub id_xy: usize,
    pub id_yz: usize,
    pub slack: i64,
    pub log_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremAudit {
    pub machine: &'static str,
    pub n: usize,
    pub budget: Budget,
    pub strings: usize,
    /// max ID(x, x).
    pub c_identity: usize,
    pub c_copy: usize,
    pub symmetry_ok: bool,
    /// max over triples of ID(x,z) − ID(x,y) − ID(y,z).
    pub triangle_slack_max: i64,
    pub worst_triple: Option<WorstTriple>,
    /// max over triples of slack − 2·log2(ID(x,y) + ID(y,z) + 1).
    pub c_tri_measured: f64,
    /// Every triple is within `C_TRI + 2·log2(...)`.
    pub triangle_bound_ok: bool,
    pub triples_checked: usize,
    /// Pairs whose ID stayed unknown within budget; such cells are skipped.
    pub unknown_pairs: usize,
    /// slack value → number of triples.
    pub slack_histogram: BTreeMap<i64, usize>,
}

fn log_term(a: usize, b: usize) -> f64 {
    ((a + b + 1) as f64).log2()
}

/// Checks identity, symmetry and the log-slack triangle inequality for ID
/// over every string of length ≤ `n`.
pub fn theorem_audit(n: usize, budget: Budget) -> Result<TheoremAudit, ToykError> {
    if n > MAX_AUDIT_LEN {
        return Err(ToykError::AuditTooLarge { n, max: MAX_AUDIT_LEN });
    }
    let table = ConditionalTable::build(n, budget)?;
    let strings = &table.strings;
    let m = strings.len();

    let mut ids: Vec<Option<usize>> = vec![None; m * m];
    let mut unknown_pairs = 0;
    let mut symmetry_ok = true;
    let mut c_identity = 0;
    for (i, x) in strings.iter().enumerate() {
        for (j, y) in strings.iter().enumerate() {
            let id = table.id(x, y);
            if id.is_none() {
                unknown_pairs += 1;
            }
            if id != table.id(y, x) {
                symmetry_ok = false;
            }
            if i == j {
                c_identity = c_identity.max(id.unwrap_or(0));
            }
            ids[i * m + j] = id;
        }
    }

    let mut report = TheoremAudit {
        machine: MACHINE_VERSION,
        n,
        budget: table.budget,
        strings: m,
        c_identity,
        c_copy: C_COPY,
        symmetry_ok,
        triangle_slack_max: i64::MIN,
        worst_triple: None,
        c_tri_measured: f64::NEG_INFINITY,
        triangle_bound_ok: true,
        triples_checked: 0,
        unknown_pairs,
        slack_histogram: BTreeMap::new(),
    };

    for i in 0..m {
        for j in 0..m {
            let Some(xy) = ids[i * m + j] else { continue };
            for k in 0..m {
                let (Some(yz), Some(xz)) = (ids[j * m + k], ids[i * m + k]) else {
                    continue;
                };
                let slack = xz as i64 - xy as i64 - yz as i64;
                let log = log_term(xy, yz);
                report.triples_checked += 1;
                *report.slack_histogram.entry(slack).or_default() += 1;
                report.c_tri_measured = report.c_tri_measured.max(slack as f64 - 2.0 * log);
                if slack as f64 > C_TRI + 2.0 * log {
                    report.triangle_bound_ok = false;
                }
                if slack > report.triangle_slack_max {
                    report.triangle_slack_max = slack;
                    report.worst_triple = Some(WorstTriple {
                        x: strings[i].to_string(),
                        y: strings[j].to_string(),
                        z: strings[k].to_string(),
                        id_xz: xz,
                        id_xy: xy,
                        id_yz: yz,
                        slack,
                        log_term: log,
                    });
                }
            }
        }
    }
    Ok(report)
}

impl TheoremAudit {
    /// Two-column key/value table, then the slack histogram.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let mut row = |k: &str, v: String| {
            let _ = writeln!(s, "{k:<22}{v}");
        };
        row("machine", self.machine.to_string());
        row("n", self.n.to_string());
        row("max_len", self.budget.max_len.to_string());
        row("steps", self.budget.steps.to_string());
        row("strings", self.strings.to_string());
        row("c_identity", self.c_identity.to_string());
        row("c_copy", self.c_copy.to_string());
        row("identity_ok", (self.c_identity <= self.c_copy).to_string());
        row("symmetry_ok", self.symmetry_ok.to_string());
        row("triangle_slack_max", self.triangle_slack_max.to_string());
        if let Some(w) = &self.worst_triple {
            row(
                "worst_triple",
                format!(
                    "x={} y={} z={} ID(x,z)={} ID(x,y)={} ID(y,z)={} log2(ID(x,y)+ID(y,z)+1)={:.6}",
                    w.x, w.y, w.z, w.id_xz, w.id_xy, w.id_yz, w.log_term
                ),
            );
        }
        row("c_tri_measured", format!("{:.6}", self.c_tri_measured));
        row("c_tri_frozen", format!("{:.6}", C_TRI));
        row("triangle_bound_ok", self.triangle_bound_ok.to_string());
        row("triples_checked", self.triples_checked.to_string());
        row("unknown_pairs", self.unknown_pairs.to_string());
        s.push_str("slack\ttriples\n");
        for (slack, count) in &self.slack_histogram {
            let _ = writeln!(s, "{slack}\t{count}");
        }
        s
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from(
            "machine\tn\tmax_len\tsteps\tc_identity\tc_copy\tsymmetry_ok\ttriangle_slack_max\tc_tri_measured\ttriangle_bound_ok\tunknown_pairs\n",
        );
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\t{}",
            self.machine,
            self.n,
            self.budget.max_len,
            self.budget.steps,
            self.c_identity,
            self.c_copy,
            self.symmetry_ok,
            self.triangle_slack_max,
            self.c_tri_measured,
            self.triangle_bound_ok,
            self.unknown_pairs
        );
        s
    }
}
