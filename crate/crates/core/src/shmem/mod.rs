//! Shared-memory substrate.
//!
//! Every algorithm in this crate issues its atomic instructions through this
//! layer. There are two backends:
//!
//! * the **native** backend routes accesses to hardware atomics
//!   ([`NativeCell`], [`NativeByteCell`]) and is what the queues in
//!   [`crate::wsqueue`] and [`crate::baselines`] run on;
//! * the **sim** backend ([`sim::SimMemory`]) executes cooperative step
//!   machines one atomic instruction at a time, logs every access and can
//!   enumerate schedules exhaustively ([`explore`]).

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, AtomicU8, Ordering};

pub mod explore;
pub mod model;
pub mod record;
pub mod sim;

/// Word-sized payload stored in a cell: a task id, an index or a flag.
pub type Word = u64;

/// Process identifier. The owner of a queue is process 0 by convention.
pub type Pid = usize;

/// Sentinel meaning "no task here yet". Task ids start at 1.
pub const BOTTOM: Word = 0;

/// Identifier of a simulated cell.
pub type CellId = usize;

/// The instruction kinds a cell access can take.
///
/// `MaxRead`/`MaxWrite` are the operations of an atomic max-register base
/// object; plain [`AtomicCell`](sim::SimMemory) accesses use only the first
/// four kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Read,
    Write,
    Swap,
    Cas,
    MaxRead,
    MaxWrite,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::Read => "Read",
            Kind::Write => "Write",
            Kind::Swap => "Swap",
            Kind::Cas => "Cas",
            Kind::MaxRead => "MaxRead",
            Kind::MaxWrite => "MaxWrite",
        };
        f.write_str(s)
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Read" => Ok(Kind::Read),
            "Write" => Ok(Kind::Write),
            "Swap" => Ok(Kind::Swap),
            "Cas" => Ok(Kind::Cas),
            "MaxRead" => Ok(Kind::MaxRead),
            "MaxWrite" => Ok(Kind::MaxWrite),
            other => Err(format!("unknown instruction kind `{other}`")),
        }
    }
}

/// One logged access of the sim backend.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Access {
    pub step: usize,
    pub pid: Pid,
    pub kind: Kind,
    pub cell: CellId,
    /// Value argument: the written/new value for `Write`/`Swap`/`Cas`/`MaxWrite`,
    /// 0 for reads.
    pub arg: Word,
    /// Result: the value read, the displaced value for `Swap`, 1/0 for `Cas`
    /// success, the written value for `Write`/`MaxWrite`.
    pub result: Word,
}

impl Access {
    /// Renders the access in the line-oriented log format
    /// `step,pid,kind,cell,arg,result`.
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.step, self.pid, self.kind, self.cell, self.arg, self.result
        )
    }

    /// Parses one `step,pid,kind,cell,arg,result` line.
    pub fn parse_line(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 6 {
            return Err(format!("expected 6 fields, got {}: `{line}`", fields.len()));
        }
        let parse_num = |s: &str, what: &str| {
            s.parse::<u64>()
                .map_err(|e| format!("bad {what} `{s}`: {e}"))
        };
        Ok(Access {
            step: parse_num(fields[0], "step")? as usize,
            pid: parse_num(fields[1], "pid")? as usize,
            kind: fields[2].parse()?,
            cell: parse_num(fields[3], "cell")? as usize,
            arg: parse_num(fields[4], "arg")?,
            result: parse_num(fields[5], "result")?,
        })
    }
}

/// Serializes an access log to the line-oriented text format.
pub fn log_to_text(log: &[Access]) -> String {
    let mut out = String::new();
    for a in log {
        out.push_str(&a.to_line());
        out.push('\n');
    }
    out
}

/// Parses a text access log produced by [`log_to_text`].
pub fn log_from_text(text: &str) -> Result<Vec<Access>, String> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(Access::parse_line)
        .collect()
}

/// Per-operation counts of executed shared instructions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InstructionCount {
    pub reads: usize,
    pub writes: usize,
    pub swaps: usize,
    pub cas: usize,
    pub max_reads: usize,
    pub max_writes: usize,
}

impl InstructionCount {
    pub fn record(&mut self, kind: Kind) {
        match kind {
            Kind::Read => self.reads += 1,
            Kind::Write => self.writes += 1,
            Kind::Swap => self.swaps += 1,
            Kind::Cas => self.cas += 1,
            Kind::MaxRead => self.max_reads += 1,
            Kind::MaxWrite => self.max_writes += 1,
        }
    }

    /// Total number of logged steps for the operation.
    pub fn total(&self) -> usize {
        self.reads + self.writes + self.swaps + self.cas + self.max_reads + self.max_writes
    }

    /// Pointwise maximum, used when folding per-operation maxima.
    pub fn max(self, other: Self) -> Self {
        InstructionCount {
            reads: self.reads.max(other.reads),
            writes: self.writes.max(other.writes),
            swaps: self.swaps.max(other.swaps),
            cas: self.cas.max(other.cas),
            max_reads: self.max_reads.max(other.max_reads),
            max_writes: self.max_writes.max(other.max_writes),
        }
    }
}

/// Memory-ordering profile for the native backend.
///
/// Correctness gates run under `SeqCst`; `Relaxed` exists for benchmarking the
/// fence-free claims and is never used by the checkers. Segment-link
/// publication in [`crate::taskbuf`] stays release-visible in both profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    #[default]
    SeqCst,
    Relaxed,
}

impl Profile {
    #[inline]
    pub fn load(self) -> Ordering {
        match self {
            Profile::SeqCst => Ordering::SeqCst,
            Profile::Relaxed => Ordering::Relaxed,
        }
    }

    #[inline]
    pub fn store(self) -> Ordering {
        match self {
            Profile::SeqCst => Ordering::SeqCst,
            Profile::Relaxed => Ordering::Relaxed,
        }
    }

    #[inline]
    pub fn rmw(self) -> Ordering {
        match self {
            Profile::SeqCst => Ordering::SeqCst,
            Profile::Relaxed => Ordering::Relaxed,
        }
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seqcst" | "seq-cst" => Ok(Profile::SeqCst),
            "relaxed" => Ok(Profile::Relaxed),
            other => Err(format!("unknown ordering profile `{other}`")),
        }
    }
}

/// A word-sized shared location on the native backend.
///
/// Mutation happens only through `read`/`write`/`swap`/`cas`/`max_write`.
#[derive(Debug)]
pub struct NativeCell(AtomicU64);

impl NativeCell {
    pub fn new(v: Word) -> Self {
        NativeCell(AtomicU64::new(v))
    }

    #[inline]
    pub fn read(&self, p: Profile) -> Word {
        self.0.load(p.load())
    }

    #[inline]
    pub fn write(&self, v: Word, p: Profile) {
        self.0.store(v, p.store());
    }

    #[inline]
    pub fn swap(&self, v: Word, p: Profile) -> Word {
        self.0.swap(v, p.rmw())
    }

    #[inline]
    pub fn cas(&self, expected: Word, new: Word, p: Profile) -> bool {
        self.0
            .compare_exchange(expected, new, p.rmw(), p.load())
            .is_ok()
    }

    /// Atomic max-register write (used only where a register is modelled as a
    /// single base object, never by the pure read/write constructions).
    #[inline]
    pub fn max_write(&self, v: Word, p: Profile) {
        self.0.fetch_max(v, p.rmw());
    }
}

/// A single-byte shared flag on the native backend; used for the bit tree of
/// the max register and for claim arrays, where a full word per flag would
/// waste cache.
#[derive(Debug)]
pub struct NativeByteCell(AtomicU8);

impl NativeByteCell {
    pub fn new(v: u8) -> Self {
        NativeByteCell(AtomicU8::new(v))
    }

    #[inline]
    pub fn read(&self, p: Profile) -> u8 {
        self.0.load(p.load())
    }

    #[inline]
    pub fn write(&self, v: u8, p: Profile) {
        self.0.store(v, p.store());
    }

    #[inline]
    pub fn swap(&self, v: u8, p: Profile) -> u8 {
        self.0.swap(v, p.rmw())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn native_cell_swap_and_cas() {
        let c = NativeCell::new(1);
        assert_eq!(c.swap(0, Profile::SeqCst), 1);
        assert_eq!(c.read(Profile::SeqCst), 0);

        let c = NativeCell::new(3);
        assert!(c.cas(3, 4, Profile::SeqCst));
        assert_eq!(c.read(Profile::SeqCst), 4);
        assert!(!c.cas(3, 5, Profile::SeqCst));
        assert_eq!(c.read(Profile::SeqCst), 4);
    }

    #[test]
    fn access_line_round_trip() {
        let a = Access {
            step: 12,
            pid: 1,
            kind: Kind::Swap,
            cell: 4,
            arg: 0,
            result: 1,
        };
        assert_eq!(a.to_line(), "12,1,Swap,4,0,1");
        assert_eq!(Access::parse_line(&a.to_line()).unwrap(), a);
    }

    #[test]
    fn log_text_round_trip() {
        let log = vec![
            Access {
                step: 0,
                pid: 0,
                kind: Kind::Write,
                cell: 1,
                arg: 7,
                result: 7,
            },
            Access {
                step: 1,
                pid: 1,
                kind: Kind::Read,
                cell: 1,
                arg: 0,
                result: 7,
            },
        ];
        let text = log_to_text(&log);
        assert_eq!(log_from_text(&text).unwrap(), log);
    }

    #[test]
    fn bad_log_line_is_rejected() {
        assert!(Access::parse_line("1,2,3").is_err());
        assert!(Access::parse_line("0,0,Frobnicate,1,0,0").is_err());
    }
}
