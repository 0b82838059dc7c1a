//! Multiplicity-bound side conditions, sequential exactness, and the
//! scripted adversarial execution against idempotent FIFO.

use crate::baselines::model::IdemFifoModel;
use crate::checker::history::{concurrent, WsHistory, WsOp, WsRet};
use crate::checker::search::{Outcome, Verdict};
use crate::shmem::model::{ScriptRunner, SimModel};
use crate::shmem::sim::SimMemory;
use crate::shmem::{Kind, Pid, Word};
use crate::wsqueue::model::{DequeModel, HeadKind};
use crate::wsqueue::Discipline;
use std::collections::HashMap;

/// Which multiplicity relaxation a history is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    /// Duplicate extractions must be pairwise concurrent.
    Mult,
    /// Each process extracts a task at most once.
    Weak,
    /// Per task at most one take and at most one steal.
    Bounded,
    /// Per task exactly one extraction.
    Exact,
}

fn verdict(ok: bool, stuck: Vec<usize>) -> Verdict {
    Verdict {
        outcome: if ok { Outcome::Accepted } else { Outcome::Rejected },
        witness: None,
        stuck: if ok { None } else { Some(stuck) },
        nodes: 0,
    }
}

/// Detects the drain condition: after the last put completed, every process
/// that extracts at all finished with two consecutive empty results.
pub fn drained(h: &WsHistory) -> bool {
    let recs = h.ops();
    let last_put_res = recs
        .iter()
        .filter(|r| matches!(r.op, WsOp::Put(_)))
        .filter_map(|r| r.res)
        .max();
    let nprocs = recs.iter().map(|r| r.pid).max().map_or(0, |p| p + 1);
    for pid in 0..nprocs {
        let ext: Vec<_> = recs
            .iter()
            .filter(|r| r.pid == pid && !matches!(r.op, WsOp::Put(_)))
            .collect();
        if ext.is_empty() {
            continue;
        }
        let tail: Vec<_> = ext.iter().rev().take(2).collect();
        if tail.len() < 2 {
            return false;
        }
        for r in tail {
            if r.ret != Some(WsRet::Empty) {
                return false;
            }
            if let Some(after) = last_put_res {
                if r.inv < after {
                    return false;
                }
            }
        }
    }
    true
}

/// Checks the per-mode extraction bounds, plus at-least-once coverage when
/// the drain condition holds and put values are unique.
pub fn check_multiplicity_bounds(h: &WsHistory, mode: BoundMode) -> Verdict {
    let recs = h.ops();
    let mut extractions: HashMap<Word, Vec<usize>> = HashMap::new();
    for (i, r) in recs.iter().enumerate() {
        if matches!(r.op, WsOp::Take | WsOp::Steal) {
            if let Some(WsRet::Task(x)) = r.ret {
                extractions.entry(x).or_default().push(i);
            }
        }
    }

    for (_, idxs) in extractions.iter() {
        match mode {
            BoundMode::Mult => {
                for (a, &i) in idxs.iter().enumerate() {
                    for &j in &idxs[a + 1..] {
                        if !concurrent(&recs[i], &recs[j]) {
                            return verdict(false, vec![i, j]);
                        }
                    }
                }
            }
            BoundMode::Weak => {
                let mut by_pid: HashMap<Pid, usize> = HashMap::new();
                for &i in idxs {
                    let c = by_pid.entry(recs[i].pid).or_insert(0);
                    *c += 1;
                    if *c > 1 {
                        return verdict(false, vec![i]);
                    }
                }
            }
            BoundMode::Bounded => {
                let takes = idxs
                    .iter()
                    .filter(|&&i| matches!(recs[i].op, WsOp::Take))
                    .count();
                let steals = idxs.len() - takes;
                if takes > 1 || steals > 1 {
                    return verdict(false, idxs.clone());
                }
            }
            BoundMode::Exact => {
                if idxs.len() != 1 {
                    return verdict(false, idxs.clone());
                }
            }
        }
    }

    // At-least-once, checkable when the run is drained and put values are
    // unique.
    let puts: Vec<Word> = recs
        .iter()
        .filter_map(|r| match (r.op, &r.ret) {
            (WsOp::Put(x), Some(WsRet::True)) => Some(x),
            _ => None,
        })
        .collect();
    let unique = {
        let mut sorted = puts.clone();
        sorted.sort_unstable();
        sorted.windows(2).all(|w| w[0] != w[1])
    };
    if unique && drained(h) {
        for (i, r) in recs.iter().enumerate() {
            if let WsOp::Put(x) = r.op {
                if r.is_complete() && !extractions.contains_key(&x) {
                    return verdict(false, vec![i]);
                }
            }
        }
    }
    verdict(true, vec![])
}

/// Drives one process until a predicate on its next instruction fires or its
/// current operation completes. Returns events into `sink`.
struct Driver<M: SimModel> {
    runner: ScriptRunner<M>,
    mem: SimMemory,
    events: Vec<crate::checker::history::Event<M::Op, M::Ret>>,
}

impl<M: SimModel> Driver<M> {
    fn new(model: M, scripts: Vec<Vec<M::Op>>, mut mem: SimMemory) -> Self {
        mem.reset_counters();
        Driver {
            runner: ScriptRunner::new(model, scripts),
            mem,
            events: Vec::new(),
        }
    }

    fn step(&mut self, pid: Pid) -> Option<(M::Ret, crate::shmem::InstructionCount)> {
        use crate::checker::history::Event;
        let time = self.mem.steps() as u64;
        let report = self.runner.step(pid, &mut self.mem);
        assert!(!report.retry_limited, "scripted replay hit a retry cap");
        if report.first {
            self.events.push(Event::Inv {
                pid,
                op: report.op,
                time,
            });
        }
        if let Some((ret, counts)) = report.done {
            self.events.push(Event::Res {
                pid,
                op: report.op,
                ret,
                time,
            });
            return Some((ret, counts));
        }
        None
    }

    /// Steps `pid` until its in-flight operation completes.
    fn finish_op(&mut self, pid: Pid) -> M::Ret {
        loop {
            if let Some((ret, _)) = self.step(pid) {
                return ret;
            }
        }
    }

    /// Steps `pid` until the next instruction satisfies `stop` (leaving it
    /// unexecuted) or the operation completes; true means paused.
    fn run_until(&mut self, pid: Pid, stop: impl Fn(&crate::shmem::model::Peek) -> bool) -> bool {
        loop {
            let (peek, _) = self.runner.peek(pid, &self.mem);
            if stop(&peek) {
                return true;
            }
            if self.step(pid).is_some() {
                return false;
            }
        }
    }

    fn history(self) -> WsHistory
    where
        M: SimModel<Op = WsOp, Ret = WsRet>,
    {
        crate::checker::history::History::new(self.events)
    }
}

/// The adversarial schedule against idempotent FIFO: the owner puts `z`
/// tasks, then for r = z down to 1 the owner starts a take and pauses just
/// before its head advance, a thief performs r sequential steals, and the
/// owner's plain head write rolls their advances back. Task at 0-based
/// index i ends up extracted by one take plus i+1 distinct steals.
pub fn replay_idempotent_counterexample(z: u64) -> WsHistory {
    assert!(z >= 1);
    let mut mem = SimMemory::with_logging();
    let model = IdemFifoModel::install(&mut mem, 2, z + 1, 4);
    let owner_script: Vec<WsOp> = (1..=z)
        .map(WsOp::Put)
        .chain(std::iter::repeat(WsOp::Take).take(z as usize))
        .collect();
    let steals = (z * (z + 1) / 2) as usize;
    let thief_script = vec![WsOp::Steal; steals];
    let mut d = Driver::new(model, vec![owner_script, thief_script], mem);

    for _ in 0..z {
        d.finish_op(0);
    }
    for r in (1..=z).rev() {
        // Owner's take runs until it is about to increment the head with its
        // plain write.
        let paused = d.run_until(0, |p| p.kind == Kind::Write);
        assert!(paused, "take completed before its head write");
        for _ in 0..r {
            let ret = d.finish_op(1);
            assert!(matches!(ret, WsRet::Task(_)));
        }
        let ret = d.finish_op(0);
        assert!(matches!(ret, WsRet::Task(_)));
    }
    d.history()
}

/// The same pause-the-take schedule shape applied to the multiplicity deque:
/// the max-register head absorbs the owner's stale advance, so the only
/// duplicate is between the paused take and the first steal, which overlap.
pub fn replay_counterexample_shape_on_ws_mult(z: u64) -> WsHistory {
    assert!(z >= 1);
    let mut mem = SimMemory::with_logging();
    let model = DequeModel::install(&mut mem, 2, HeadKind::AtomicMax, Discipline::Plain, z, 4);
    let owner_script: Vec<WsOp> = (1..=z)
        .map(WsOp::Put)
        .chain(std::iter::repeat(WsOp::Take).take(z as usize))
        .collect();
    let steals = (z * (z + 1) / 2) as usize;
    let thief_script = vec![WsOp::Steal; steals];
    let mut d = Driver::new(model, vec![owner_script, thief_script], mem);

    for _ in 0..z {
        d.finish_op(0);
    }
    let mut thief_remaining = steals;
    for r in (1..=z).rev() {
        let paused = d.run_until(0, |p| p.kind == Kind::MaxWrite);
        for _ in 0..r {
            if thief_remaining == 0 {
                break;
            }
            d.finish_op(1);
            thief_remaining -= 1;
        }
        if paused {
            d.finish_op(0);
        }
    }
    while thief_remaining > 0 {
        d.finish_op(1);
        thief_remaining -= 1;
    }
    // Any takes that never started (the queue drained early) still run.
    while d.runner.enabled(0) {
        d.finish_op(0);
    }
    d.history()
}

/// Counts, per task value, how many takes and steals extracted it.
pub fn extraction_counts(h: &WsHistory) -> HashMap<Word, (usize, usize)> {
    let mut counts: HashMap<Word, (usize, usize)> = HashMap::new();
    for r in h.ops() {
        if let Some(WsRet::Task(x)) = r.ret {
            let e = counts.entry(x).or_default();
            match r.op {
                WsOp::Take => e.0 += 1,
                WsOp::Steal => e.1 += 1,
                WsOp::Put(_) => {}
            }
        }
    }
    counts
}
