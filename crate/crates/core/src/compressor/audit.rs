use serde::Serialize;

use super::{concat, Compressor, CompressorError};

/// Empirical "normality" of a compressor over a sample set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NormalityReport {
    pub compressor_id: String,
    /// max |Γ(xx) − Γ(x)| over samples, in bytes.
    pub idempotency_gap: u64,
    /// max |Γ(xy) − Γ(yx)| over ordered pairs, in bytes.
    pub symmetry_gap: u64,
    /// Ordered pairs (including x with itself) with Γ(xy) < Γ(x).
    pub monotonicity_violations: u64,
    pub sample_count: usize,
}

impl NormalityReport {
    pub fn to_tsv(&self) -> String {
        format!(
            "compressor\tsamples\tidempotency_gap\tsymmetry_gap\tmonotonicity_violations\n{}\t{}\t{}\t{}\t{}\n",
            self.compressor_id,
            self.sample_count,
            self.idempotency_gap,
            self.symmetry_gap,
            self.monotonicity_violations
        )
    }

    pub fn to_text(&self) -> String {
        format!(
            "compressor:               {}\n\
             samples:                  {}\n\
             idempotency gap (bytes):  {}\n\
             symmetry gap (bytes):     {}\n\
             monotonicity violations:  {}\n",
            self.compressor_id,
            self.sample_count,
            self.idempotency_gap,
            self.symmetry_gap,
            self.monotonicity_violations
        )
    }
}

/// Measures idempotency over every sample and symmetry / monotonicity over
/// every ordered pair. Concatenation here is raw order on purpose.
pub fn normality_audit<C: Compressor + ?Sized>(
    c: &C,
    samples: &[&[u8]],
) -> Result<NormalityReport, CompressorError> {
    if samples.len() < 2 {
        return Err(CompressorError::InsufficientSamples(samples.len()));
    }
    let singles = samples
        .iter()
        .map(|s| c.compressed_size(s))
        .collect::<Result<Vec<_>, _>>()?;

    let n = samples.len();
    let mut joint = vec![0u64; n * n];
    for i in 0..n {
        for j in 0..n {
            joint[i * n + j] = c.compressed_size(&concat(samples[i], samples[j]))?;
        }
    }

    let mut report = NormalityReport {
        compressor_id: c.id().to_string(),
        idempotency_gap: 0,
        symmetry_gap: 0,
        monotonicity_violations: 0,
        sample_count: n,
    };
    for i in 0..n {
        report.idempotency_gap = report.idempotency_gap.max(joint[i * n + i].abs_diff(singles[i]));
        for j in 0..n {
            let xy = joint[i * n + j];
            report.symmetry_gap = report.symmetry_gap.max(xy.abs_diff(joint[j * n + i]));
            if xy < singles[i] {
                report.monotonicity_violations += 1;
            }
        }
    }
    Ok(report)
}
