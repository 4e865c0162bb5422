//! The micro-machine `U(p, x)`.
//!
//! Programs are bit strings read as a sequence of 3-bit opcodes (most
//! significant bit first). A program whose length is not a multiple of three
//! is malformed and never halts. Running off the end of the program halts.
//!
//! | code | name   | effect                                                        |
//! |------|--------|---------------------------------------------------------------|
//! | 000  | EMIT0  | append 0                                                      |
//! | 001  | EMIT1  | append 1                                                      |
//! | 010  | ECHO   | append the next input symbol and consume it (no-op at end)    |
//! | 011  | FLIP   | append the negated next input symbol and consume it (no-op at end) |
//! | 100  | SKIP   | consume the next input symbol (no-op at end)                  |
//! | 101  | DUP    | append a copy of the whole output so far                      |
//! | 110  | LOOP   | if input remains, jump to the first instruction               |
//! | 111  | BRANCH | if the next input symbol is 1, skip the next instruction      |
//!
//! Every instruction executed costs one step.

use std::fmt;
use std::str::FromStr;

/// Frozen identifier of the opcode table above. Every pinned K value depends
/// on it.
pub const MACHINE_VERSION: &str = "toyk-m1";
pub const OPCODE_BITS: usize = 3;
/// Bits needed per emitted symbol by the literal construct.
pub const BITS_PER_SYMBOL: usize = OPCODE_BITS;
/// Extra bits of the literal construct beyond the per-symbol cost.
pub const C_LIT: usize = 0;
/// `ECHO LOOP` copies its input; its length.
pub const C_COPY: usize = 2 * OPCODE_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Op {
    Emit0 = 0,
    Emit1 = 1,
    Echo = 2,
    Flip = 3,
    Skip = 4,
    Dup = 5,
    Loop = 6,
    Branch = 7,
}

impl Op {
    pub const ALL: [Op; 8] = [
        Op::Emit0,
        Op::Emit1,
        Op::Echo,
        Op::Flip,
        Op::Skip,
        Op::Dup,
        Op::Loop,
        Op::Branch,
    ];

    pub fn from_code(code: u8) -> Op {
        Op::ALL[(code & 7) as usize]
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Op::Emit0 => "EMIT0",
            Op::Emit1 => "EMIT1",
            Op::Echo => "ECHO",
            Op::Flip => "FLIP",
            Op::Skip => "SKIP",
            Op::Dup => "DUP",
            Op::Loop => "LOOP",
            Op::Branch => "BRANCH",
        }
    }
}

/// A string over {0, 1}, one symbol per byte.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits(Vec<u8>);

impl Bits {
    pub fn new() -> Self {
        Bits(Vec::new())
    }

    pub fn from_symbols(symbols: Vec<u8>) -> Self {
        assert!(symbols.iter().all(|&b| b <= 1), "symbols must be 0 or 1");
        Bits(symbols)
    }

    /// The `len`-bit big-endian rendering of `value`.
    pub fn from_index(value: u64, len: usize) -> Self {
        Bits((0..len).rev().map(|k| ((value >> k) & 1) as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn reversed(&self) -> Self {
        Bits(self.0.iter().rev().copied().collect())
    }

    /// Every string of length `0..=max_len`, shortest first, then lexicographic.
    pub fn all_up_to(max_len: usize) -> Vec<Bits> {
        (0..=max_len)
            .flat_map(|len| (0..1u64 << len).map(move |v| Bits::from_index(v, len)))
            .collect()
    }

    /// Position of this string in [`Bits::all_up_to`] order.
    pub fn rank(&self) -> usize {
        let value = self.0.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        (1usize << self.0.len()) - 1 + value
    }

    /// Decodes into opcodes, or `None` for a ragged length.
    pub fn opcodes(&self) -> Option<Vec<u8>> {
        if !self.0.len().is_multiple_of(OPCODE_BITS) {
            return None;
        }
        Some(
            self.0
                .chunks(OPCODE_BITS)
                .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | b))
                .collect(),
        )
    }

    pub fn from_opcodes(ops: &[u8]) -> Self {
        Bits(
            ops.iter()
                .flat_map(|&op| (0..OPCODE_BITS).rev().map(move |k| (op >> k) & 1))
                .collect(),
        )
    }

    /// Human-readable disassembly, e.g. `ECHO LOOP`.
    pub fn disassemble(&self) -> String {
        match self.opcodes() {
            Some(ops) if ops.is_empty() => "(empty)".to_string(),
            Some(ops) => ops
                .iter()
                .map(|&o| Op::from_code(o).mnemonic())
                .collect::<Vec<_>>()
                .join(" "),
            None => "(malformed)".to_string(),
        }
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl serde::Serialize for Bits {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for Bits {
    type Err = String;

    /// Accepts `0`/`1` digits; the empty string and `ε` denote the empty word.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "ε" {
            return Ok(Bits::new());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(format!("`{other}` is not a binary digit")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Bits)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Halted(Bits),
    /// Still running when the step budget ran out, or provably looping.
    NoHalt,
    /// Output grew past the caller's limit; the program can't produce the target.
    Overflow,
    Malformed,
}

/// Executes opcodes directly. `output_limit` aborts once the output is longer
/// than any string the caller cares about; output only ever grows.
pub fn run_ops(ops: &[u8], input: &[u8], steps: u64, output_limit: usize, out: &mut Vec<u8>) -> RawOutcome {
    out.clear();
    let mut pc = 0usize;
    let mut head = 0usize;
    let mut used = 0u64;
    // A LOOP jump that neither consumed input nor produced output since the
    // previous jump repeats a machine state forever.
    let mut last_jump: Option<(usize, usize)> = None;
    while pc < ops.len() {
        if used == steps {
            return RawOutcome::NoHalt;
        }
        used += 1;
        match ops[pc] {
            0 => out.push(0),
            1 => out.push(1),
            2 => {
                if let Some(&b) = input.get(head) {
                    out.push(b);
                    head += 1;
                }
            }
            3 => {
                if let Some(&b) = input.get(head) {
                    out.push(b ^ 1);
                    head += 1;
                }
            }
            4 => {
                if head < input.len() {
                    head += 1;
                }
            }
            5 => {
                if out.len() > output_limit {
                    return RawOutcome::Overflow;
                }
                out.extend_from_within(..);
            }
            6 => {
                if head < input.len() {
                    let state = (head, out.len());
                    if last_jump == Some(state) {
                        return RawOutcome::NoHalt;
                    }
                    last_jump = Some(state);
                    pc = 0;
                    continue;
                }
            }
            _ => {
                if input.get(head) == Some(&1) {
                    pc += 1;
                }
            }
        }
        if out.len() > output_limit {
            return RawOutcome::Overflow;
        }
        pc += 1;
    }
    RawOutcome::Halted
}

/// Allocation-free variant of [`Outcome`] used on the enumeration hot path;
/// on `Halted` the output is in the caller's buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawOutcome {
    Halted,
    NoHalt,
    Overflow,
}

/// `U` with a fixed step budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MicroMachine {
    pub step_budget: u64,
    pub output_limit: usize,
}

impl MicroMachine {
    pub const DEFAULT_OUTPUT_LIMIT: usize = 1 << 16;

    pub fn new(step_budget: u64) -> Self {
        Self {
            step_budget,
            output_limit: Self::DEFAULT_OUTPUT_LIMIT,
        }
    }

    pub fn run(&self, program: &Bits, input: &Bits) -> Outcome {
        let Some(ops) = program.opcodes() else {
            return Outcome::Malformed;
        };
        let mut out = Vec::new();
        match run_ops(&ops, input.as_slice(), self.step_budget, self.output_limit, &mut out) {
            RawOutcome::Halted => Outcome::Halted(Bits(out)),
            RawOutcome::NoHalt => Outcome::NoHalt,
            RawOutcome::Overflow => Outcome::Overflow,
        }
    }
}
