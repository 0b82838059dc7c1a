//! Histories: records of operation invocations and responses.
//!
//! A history is the interface between the execution backends and the
//! checkers: the sim explorer emits one per interleaving, the native
//! recorder one per run. Events carry a timestamp (the step number under the
//! sim backend, a shared-counter stamp under the native one); the event order
//! in the vector is the timestamp order.

use crate::shmem::{Pid, Word};
use std::fmt;
use std::hash::Hash;

/// One invocation or response event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event<O, R> {
    Inv { pid: Pid, op: O, time: u64 },
    Res { pid: Pid, op: O, ret: R, time: u64 },
}

impl<O: Copy, R: Copy> Event<O, R> {
    pub fn pid(&self) -> Pid {
        match self {
            Event::Inv { pid, .. } | Event::Res { pid, .. } => *pid,
        }
    }

    pub fn time(&self) -> u64 {
        match self {
            Event::Inv { time, .. } | Event::Res { time, .. } => *time,
        }
    }
}

/// A completed or pending operation extracted from a history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpRecord<O, R> {
    pub pid: Pid,
    pub op: O,
    pub ret: Option<R>,
    /// Index of the invocation event in the history.
    pub inv: usize,
    /// Index of the response event; `None` for pending operations.
    pub res: Option<usize>,
}

impl<O, R> OpRecord<O, R> {
    pub fn is_complete(&self) -> bool {
        self.res.is_some()
    }
}

/// An ordered record of invocations and responses.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct History<O, R> {
    pub events: Vec<Event<O, R>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HistoryError {
    #[error("process {pid} has a response without a matching invocation at event {index}")]
    OrphanResponse { pid: Pid, index: usize },
    #[error("process {pid} invoked at event {index} while an operation was already in flight")]
    NestedInvocation { pid: Pid, index: usize },
    #[error("response at event {index} does not match the pending operation of process {pid}")]
    MismatchedResponse { pid: Pid, index: usize },
}

impl<O, R> History<O, R> {
    pub fn new(events: Vec<Event<O, R>>) -> Self {
        History { events }
    }
}

impl<O: Copy + PartialEq, R: Copy> History<O, R> {

    /// Checks per-process well-formedness: invocations and responses
    /// alternate, starting with an invocation.
    pub fn validate(&self) -> Result<(), HistoryError> {
        let max_pid = self.events.iter().map(|e| e.pid()).max().unwrap_or(0);
        let mut pending: Vec<Option<O>> = vec![None; max_pid + 1];
        for (i, e) in self.events.iter().enumerate() {
            match e {
                Event::Inv { pid, op, .. } => {
                    if pending[*pid].is_some() {
                        return Err(HistoryError::NestedInvocation { pid: *pid, index: i });
                    }
                    pending[*pid] = Some(*op);
                }
                Event::Res { pid, op, .. } => match pending[*pid].take() {
                    None => return Err(HistoryError::OrphanResponse { pid: *pid, index: i }),
                    Some(p) if p != *op => {
                        return Err(HistoryError::MismatchedResponse { pid: *pid, index: i })
                    }
                    Some(_) => {}
                },
            }
        }
        Ok(())
    }

    /// Extracts operations in invocation order.
    pub fn ops(&self) -> Vec<OpRecord<O, R>> {
        let max_pid = self.events.iter().map(|e| e.pid()).max().unwrap_or(0);
        let mut open: Vec<Option<usize>> = vec![None; max_pid + 1];
        let mut out: Vec<OpRecord<O, R>> = Vec::new();
        for (i, e) in self.events.iter().enumerate() {
            match e {
                Event::Inv { pid, op, .. } => {
                    open[*pid] = Some(out.len());
                    out.push(OpRecord {
                        pid: *pid,
                        op: *op,
                        ret: None,
                        inv: i,
                        res: None,
                    });
                }
                Event::Res { pid, ret, .. } => {
                    if let Some(slot) = open[*pid].take() {
                        out[slot].ret = Some(*ret);
                        out[slot].res = Some(i);
                    }
                }
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// A history reduced to what the checkers observe: operations grouped by
/// process (in program order) plus the real-time precedence relation.
/// Histories with equal canonical forms receive identical verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalHistory<O, R> {
    /// `(pid, op, ret)` sorted by process id, program order within a process.
    pub ops: Vec<(Pid, O, Option<R>)>,
    /// Pairs `(i, j)` with `ops[i] <_E ops[j]`, sorted.
    pub precedence: Vec<(u32, u32)>,
}

impl<O: Copy + PartialEq, R: Copy> History<O, R> {
    pub fn canonical(&self) -> CanonicalHistory<O, R> {
        let recs = self.ops();
        let mut order: Vec<usize> = (0..recs.len()).collect();
        order.sort_by_key(|&i| (recs[i].pid, recs[i].inv));
        let mut rank = vec![0u32; recs.len()];
        for (new_idx, &old_idx) in order.iter().enumerate() {
            rank[old_idx] = new_idx as u32;
        }
        let ops = order
            .iter()
            .map(|&i| (recs[i].pid, recs[i].op, recs[i].ret))
            .collect();
        let mut precedence = Vec::new();
        for i in 0..recs.len() {
            for j in 0..recs.len() {
                if i != j && precedes(&recs[i], &recs[j]) {
                    precedence.push((rank[i], rank[j]));
                }
            }
        }
        precedence.sort_unstable();
        CanonicalHistory { ops, precedence }
    }
}

impl<O: std::hash::Hash, R: std::hash::Hash> CanonicalHistory<O, R> {
    /// Deterministic 128-bit digest, for dedup sets over large corpora.
    pub fn digest(&self) -> (u64, u64) {
        use std::collections::hash_map::DefaultHasher;
        use std::hash::{Hash, Hasher};
        let mut h1 = DefaultHasher::new();
        1u8.hash(&mut h1);
        self.hash(&mut h1);
        let mut h2 = DefaultHasher::new();
        2u8.hash(&mut h2);
        self.hash(&mut h2);
        (h1.finish(), h2.finish())
    }
}

/// Real-time precedence: `a <_E b` iff the response of `a` precedes the
/// invocation of `b`.
pub fn precedes<O, R>(a: &OpRecord<O, R>, b: &OpRecord<O, R>) -> bool {
    match a.res {
        Some(r) => r < b.inv,
        None => false,
    }
}

/// Two operations are concurrent iff neither precedes the other.
pub fn concurrent<O, R>(a: &OpRecord<O, R>, b: &OpRecord<O, R>) -> bool {
    !precedes(a, b) && !precedes(b, a)
}

/// Operations of the work-stealing object family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WsOp {
    Put(Word),
    Take,
    Steal,
}

/// Responses of the work-stealing object family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WsRet {
    True,
    Task(Word),
    Empty,
}

impl fmt::Display for WsOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WsOp::Put(_) => write!(f, "put"),
            WsOp::Take => write!(f, "take"),
            WsOp::Steal => write!(f, "steal"),
        }
    }
}

impl fmt::Display for WsRet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WsRet::True => write!(f, "true"),
            WsRet::Task(x) => write!(f, "{x}"),
            WsRet::Empty => write!(f, "empty"),
        }
    }
}

/// Operations of the max-register object family; used for both the exact and
/// the range-relaxed register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegOp {
    Write(Word),
    Read,
}

/// Responses of the max-register object family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegRet {
    True,
    Value(Word),
}

pub type WsHistory = History<WsOp, WsRet>;
pub type RegHistory = History<RegOp, RegRet>;

impl WsHistory {
    /// Renders the history in the line-oriented format
    /// `event,pid,op,arg_or_result,timestamp`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            match e {
                Event::Inv { pid, op, time } => {
                    let arg = match op {
                        WsOp::Put(x) => x.to_string(),
                        _ => "-".to_string(),
                    };
                    out.push_str(&format!("inv,{pid},{op},{arg},{time}\n"));
                }
                Event::Res { pid, op, ret, time } => {
                    out.push_str(&format!("res,{pid},{op},{ret},{time}\n"));
                }
            }
        }
        out
    }

    /// Parses the format produced by [`WsHistory::to_text`].
    pub fn from_text(text: &str) -> Result<Self, String> {
        let mut events = Vec::new();
        let mut pending: std::collections::HashMap<Pid, WsOp> = std::collections::HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 5 {
                return Err(format!("expected 5 fields: `{line}`"));
            }
            let pid: Pid = fields[1].parse().map_err(|e| format!("bad pid: {e}"))?;
            let time: u64 = fields[4].parse().map_err(|e| format!("bad time: {e}"))?;
            match fields[0] {
                "inv" => {
                    let op = match fields[2] {
                        "put" => WsOp::Put(
                            fields[3].parse().map_err(|e| format!("bad put arg: {e}"))?,
                        ),
                        "take" => WsOp::Take,
                        "steal" => WsOp::Steal,
                        other => return Err(format!("unknown op `{other}`")),
                    };
                    pending.insert(pid, op);
                    events.push(Event::Inv { pid, op, time });
                }
                "res" => {
                    let op = *pending
                        .get(&pid)
                        .ok_or_else(|| format!("response without invocation: `{line}`"))?;
                    pending.remove(&pid);
                    let ret = match fields[3] {
                        "true" => WsRet::True,
                        "empty" => WsRet::Empty,
                        n => WsRet::Task(n.parse().map_err(|e| format!("bad result: {e}"))?),
                    };
                    events.push(Event::Res { pid, op, ret, time });
                }
                other => return Err(format!("unknown event kind `{other}`")),
            }
        }
        Ok(History::new(events))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(events: Vec<Event<WsOp, WsRet>>) -> WsHistory {
        History::new(events)
    }

    #[test]
    fn well_formedness() {
        let good = h(vec![
            Event::Inv { pid: 0, op: WsOp::Put(1), time: 0 },
            Event::Res { pid: 0, op: WsOp::Put(1), ret: WsRet::True, time: 1 },
            Event::Inv { pid: 0, op: WsOp::Take, time: 2 },
            Event::Res { pid: 0, op: WsOp::Take, ret: WsRet::Task(1), time: 3 },
        ]);
        assert!(good.validate().is_ok());

        let nested = h(vec![
            Event::Inv { pid: 0, op: WsOp::Take, time: 0 },
            Event::Inv { pid: 0, op: WsOp::Take, time: 1 },
        ]);
        assert!(matches!(
            nested.validate(),
            Err(HistoryError::NestedInvocation { .. })
        ));

        let orphan = h(vec![Event::Res {
            pid: 1,
            op: WsOp::Steal,
            ret: WsRet::Empty,
            time: 0,
        }]);
        assert!(matches!(
            orphan.validate(),
            Err(HistoryError::OrphanResponse { .. })
        ));
    }

    #[test]
    fn precedence_relation() {
        let hist = h(vec![
            Event::Inv { pid: 0, op: WsOp::Put(1), time: 0 },
            Event::Res { pid: 0, op: WsOp::Put(1), ret: WsRet::True, time: 1 },
            Event::Inv { pid: 1, op: WsOp::Steal, time: 2 },
            Event::Inv { pid: 0, op: WsOp::Take, time: 3 },
            Event::Res { pid: 0, op: WsOp::Take, ret: WsRet::Task(1), time: 4 },
            Event::Res { pid: 1, op: WsOp::Steal, ret: WsRet::Task(1), time: 5 },
        ]);
        let ops = hist.ops();
        assert_eq!(ops.len(), 3);
        assert!(precedes(&ops[0], &ops[1]));
        assert!(precedes(&ops[0], &ops[2]));
        assert!(concurrent(&ops[1], &ops[2]));
    }

    #[test]
    fn text_round_trip() {
        let hist = h(vec![
            Event::Inv { pid: 0, op: WsOp::Put(7), time: 0 },
            Event::Res { pid: 0, op: WsOp::Put(7), ret: WsRet::True, time: 2 },
            Event::Inv { pid: 1, op: WsOp::Steal, time: 3 },
            Event::Res { pid: 1, op: WsOp::Steal, ret: WsRet::Task(7), time: 5 },
            Event::Inv { pid: 0, op: WsOp::Take, time: 6 },
            Event::Res { pid: 0, op: WsOp::Take, ret: WsRet::Empty, time: 8 },
        ]);
        let text = hist.to_text();
        assert_eq!(WsHistory::from_text(&text).unwrap(), hist);
    }
}
