use rayon::prelude::*;
use serde::Serialize;

use super::machine::{run_ops, Bits, RawOutcome, OPCODE_BITS};
use super::ToykError;

/// Largest program length the enumerator accepts.
pub const MAX_PROGRAM_BITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Budget {
    /// Longest program considered, in bits.
    pub max_len: usize,
    /// Instructions a program may execute before it counts as non-halting.
    pub steps: u64,
}

impl Budget {
    pub fn new(max_len: usize, steps: u64) -> Result<Self, ToykError> {
        if max_len > MAX_PROGRAM_BITS {
            return Err(ToykError::BudgetTooLarge {
                max_len,
                guard: MAX_PROGRAM_BITS,
            });
        }
        if steps == 0 {
            return Err(ToykError::ZeroSteps);
        }
        Ok(Self { max_len, steps })
    }
}

/// Bounded-resource complexity: the shortest program found within `budget`,
/// or unknown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KResult {
    pub k_value: Option<usize>,
    pub budget: Budget,
    pub witness: Option<Bits>,
}

impl KResult {
    fn unknown(budget: Budget) -> Self {
        Self {
            k_value: None,
            budget,
            witness: None,
        }
    }

    fn found(budget: Budget, witness: Bits) -> Self {
        Self {
            k_value: Some(witness.len()),
            budget,
            witness: Some(witness),
        }
    }
}

fn decode_into(index: u64, n_ops: usize, ops: &mut Vec<u8>) {
    ops.clear();
    ops.extend((0..n_ops).rev().map(|k| ((index >> (OPCODE_BITS * k)) & 7) as u8));
}

/// First program in length-then-lexicographic order accepted by `accept`.
///
/// Each length stratum is scanned in parallel; `find_first` keeps the
/// lexicographically smallest hit, so the witness does not depend on the
/// worker count.
fn first_program<F>(budget: Budget, accept: F) -> Option<Bits>
where
    F: Fn(&[u8], &mut Vec<u8>) -> bool + Sync,
{
    for n_ops in 0..=budget.max_len / OPCODE_BITS {
        let count = 1u64 << (OPCODE_BITS * n_ops);
        let hit = (0..count)
            .into_par_iter()
            .map_init(
                || (Vec::with_capacity(n_ops), Vec::new()),
                |(ops, out), index| {
                    decode_into(index, n_ops, ops);
                    accept(ops, out).then_some(index)
                },
            )
            .find_first(Option::is_some)
            .flatten();
        if let Some(index) = hit {
            let mut ops = Vec::new();
            decode_into(index, n_ops, &mut ops);
            return Some(Bits::from_opcodes(&ops));
        }
    }
    None
}

fn produces(ops: &[u8], input: &[u8], target: &[u8], steps: u64, out: &mut Vec<u8>) -> bool {
    run_ops(ops, input, steps, target.len(), out) == RawOutcome::Halted && out.as_slice() == target
}

/// K(x) within budget: shortest `p` with `U(p, ε) = x`.
pub fn k_bounded(x: &Bits, budget: Budget) -> Result<KResult, ToykError> {
    k_cond_bounded(x, &Bits::new(), budget)
}

/// K(x|y) within budget: shortest `p` with `U(p, y) = x`.
pub fn k_cond_bounded(x: &Bits, y: &Bits, budget: Budget) -> Result<KResult, ToykError> {
    let budget = Budget::new(budget.max_len, budget.steps)?;
    let (target, input) = (x.as_slice(), y.as_slice());
    Ok(
        match first_program(budget, |ops, out| produces(ops, input, target, budget.steps, out)) {
            Some(p) => KResult::found(budget, p),
            None => KResult::unknown(budget),
        },
    )
}

/// ID(x, y) = max(K(x|y), K(y|x)).
pub fn id_distance(x: &Bits, y: &Bits, budget: Budget) -> Result<usize, ToykError> {
    let xy = k_cond_bounded(x, y, budget)?;
    let yx = k_cond_bounded(y, x, budget)?;
    match (xy.k_value, yx.k_value) {
        (Some(a), Some(b)) => Ok(a.max(b)),
        _ => Err(ToykError::Unknown(format!("ID({x}, {y})"))),
    }
}

/// ID'(x, y): the shortest single program with `U(p, x) = y` and `U(p, y) = x`.
pub fn id_prime_distance(x: &Bits, y: &Bits, budget: Budget) -> Result<KResult, ToykError> {
    let budget = Budget::new(budget.max_len, budget.steps)?;
    let (xs, ys) = (x.as_slice(), y.as_slice());
    Ok(
        match first_program(budget, |ops, out| {
            produces(ops, xs, ys, budget.steps, out) && produces(ops, ys, xs, budget.steps, out)
        }) {
            Some(p) => KResult::found(budget, p),
            None => KResult::unknown(budget),
        },
    )
}

/// K(x|y) for every pair of strings up to a length, filled by running each
/// program once per input instead of once per pair.
#[derive(Debug, Clone)]
pub struct ConditionalTable {
    pub strings: Vec<Bits>,
    pub budget: Budget,
    /// `witnesses[y][x]` is the canonical shortest program mapping `y` to `x`.
    witnesses: Vec<Vec<Option<Bits>>>,
}

impl ConditionalTable {
    pub fn build(max_string_len: usize, budget: Budget) -> Result<Self, ToykError> {
        let budget = Budget::new(budget.max_len, budget.steps)?;
        let strings = Bits::all_up_to(max_string_len);
        let witnesses = strings
            .par_iter()
            .map(|input| Self::fill_row(input, strings.len(), max_string_len, budget))
            .collect();
        Ok(Self {
            strings,
            budget,
            witnesses,
        })
    }

    fn fill_row(input: &Bits, n_strings: usize, max_len: usize, budget: Budget) -> Vec<Option<Bits>> {
        let mut row: Vec<Option<Bits>> = vec![None; n_strings];
        let mut missing = n_strings;
        let mut ops = Vec::new();
        let mut out = Vec::new();
        'strata: for n_ops in 0..=budget.max_len / OPCODE_BITS {
            for index in 0..1u64 << (OPCODE_BITS * n_ops) {
                decode_into(index, n_ops, &mut ops);
                if run_ops(&ops, input.as_slice(), budget.steps, max_len, &mut out) != RawOutcome::Halted {
                    continue;
                }
                let rank = Bits::from_symbols(out.clone()).rank();
                if row[rank].is_none() {
                    row[rank] = Some(Bits::from_opcodes(&ops));
                    missing -= 1;
                    if missing == 0 {
                        break 'strata;
                    }
                }
            }
        }
        row
    }

    pub fn witness(&self, x: &Bits, given: &Bits) -> Option<&Bits> {
        self.witnesses[given.rank()][x.rank()].as_ref()
    }

    /// K(x|y), or `None` when no program within budget produces `x` from `y`.
    pub fn k_cond(&self, x: &Bits, given: &Bits) -> Option<usize> {
        self.witness(x, given).map(Bits::len)
    }

    pub fn k(&self, x: &Bits) -> Option<usize> {
        self.k_cond(x, &Bits::new())
    }

    pub fn id(&self, x: &Bits, y: &Bits) -> Option<usize> {
        Some(self.k_cond(x, y)?.max(self.k_cond(y, x)?))
    }
}
