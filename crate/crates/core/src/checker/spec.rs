//! The object specifications the checkers decide against.
//!
//! Sequential machines implement [`SeqSpec`] (possibly nondeterministic:
//! `apply` returns every successor state consistent with an observed
//! return). The set-sequential machine for work-stealing with multiplicity
//! implements [`SetSeqSpec`], whose transitions consume a whole concurrency
//! class at once.

use crate::checker::history::{RegOp, RegRet, WsOp, WsRet};
use crate::shmem::{Pid, Word};
use std::collections::VecDeque;
use std::hash::Hash;

/// A sequential specification as a (nondeterministic) state machine.
pub trait SeqSpec {
    type State: Clone + Eq + Hash;
    type Op: Copy;
    type Ret: Copy + PartialEq;

    fn initial(&self, nprocs: usize) -> Self::State;

    /// Pushes every state reachable by `pid` invoking `op` and observing
    /// `ret`; pushes nothing when the pair is inconsistent with `s`.
    fn apply(
        &self,
        s: &Self::State,
        pid: Pid,
        op: Self::Op,
        ret: Self::Ret,
        out: &mut Vec<Self::State>,
    );

    /// Returns the candidate return values an operation might produce, for
    /// completing pending operations.
    fn candidate_rets(&self, s: &Self::State, pid: Pid, op: Self::Op) -> Vec<Self::Ret>;
}

/// The exact FIFO queue: put appends, take and steal remove the head.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactFifoSpec;

impl SeqSpec for ExactFifoSpec {
    type State = VecDeque<Word>;
    type Op = WsOp;
    type Ret = WsRet;

    fn initial(&self, _nprocs: usize) -> Self::State {
        VecDeque::new()
    }

    fn apply(
        &self,
        s: &Self::State,
        _pid: Pid,
        op: WsOp,
        ret: WsRet,
        out: &mut Vec<Self::State>,
    ) {
        match (op, ret) {
            (WsOp::Put(x), WsRet::True) => {
                let mut q = s.clone();
                q.push_back(x);
                out.push(q);
            }
            (WsOp::Take | WsOp::Steal, WsRet::Empty) => {
                if s.is_empty() {
                    out.push(s.clone());
                }
            }
            (WsOp::Take | WsOp::Steal, WsRet::Task(x)) => {
                if s.front() == Some(&x) {
                    let mut q = s.clone();
                    q.pop_front();
                    out.push(q);
                }
            }
            _ => {}
        }
    }

    fn candidate_rets(&self, s: &Self::State, _pid: Pid, op: WsOp) -> Vec<WsRet> {
        match op {
            WsOp::Put(_) => vec![WsRet::True],
            WsOp::Take | WsOp::Steal => {
                let mut rets = vec![WsRet::Empty];
                if let Some(&x) = s.front() {
                    rets.push(WsRet::Task(x));
                }
                rets
            }
        }
    }
}

/// Work-stealing with weak multiplicity: one queue per process, puts append
/// to all, an extraction may return anything up to and including the first
/// task of the shortest queue. A process never sees the same task twice
/// because its own queue only ever shrinks from the front.
///
/// The state is the put sequence plus one drop count per process: queue `i`
/// is `puts[drops[i]..]`, which keeps every queue a suffix of the longest.
#[derive(Debug, Clone, Copy, Default)]
pub struct WeakMultSpec;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeakState {
    pub puts: Vec<Word>,
    pub drops: Vec<usize>,
}

impl WeakState {
    fn queue_len(&self, pid: Pid) -> usize {
        self.puts.len() - self.drops[pid]
    }

    /// Length of the shortest queue in the state.
    fn shortest(&self) -> usize {
        self.puts.len() - self.drops.iter().copied().max().unwrap_or(0)
    }

    /// How deep into its queue process `pid` may extract: up to the first
    /// task of the shortest queue, or its whole queue when the shortest is
    /// empty.
    fn consumable(&self, pid: Pid) -> usize {
        let own = self.queue_len(pid);
        let s = self.shortest();
        if s == 0 {
            own
        } else {
            own - s + 1
        }
    }
}

impl SeqSpec for WeakMultSpec {
    type State = WeakState;
    type Op = WsOp;
    type Ret = WsRet;

    fn initial(&self, nprocs: usize) -> Self::State {
        WeakState {
            puts: Vec::new(),
            drops: vec![0; nprocs],
        }
    }

    fn apply(
        &self,
        s: &Self::State,
        pid: Pid,
        op: WsOp,
        ret: WsRet,
        out: &mut Vec<Self::State>,
    ) {
        match (op, ret) {
            (WsOp::Put(x), WsRet::True) => {
                if pid != 0 {
                    return;
                }
                let mut n = s.clone();
                n.puts.push(x);
                out.push(n);
            }
            (WsOp::Take, _) if pid != 0 => {}
            (WsOp::Steal, _) if pid == 0 => {}
            (WsOp::Take | WsOp::Steal, WsRet::Empty) => {
                if s.queue_len(pid) == 0 {
                    out.push(s.clone());
                } else if s.shortest() == 0 {
                    // The caller catches up with the emptied queue.
                    let mut n = s.clone();
                    n.drops[pid] = n.puts.len();
                    out.push(n);
                }
            }
            (WsOp::Take | WsOp::Steal, WsRet::Task(x)) => {
                let c = s.consumable(pid);
                for k in 1..=c {
                    if s.puts[s.drops[pid] + k - 1] == x {
                        let mut n = s.clone();
                        n.drops[pid] += k;
                        out.push(n);
                    }
                }
            }
            _ => {}
        }
    }

    fn candidate_rets(&self, s: &Self::State, pid: Pid, op: WsOp) -> Vec<WsRet> {
        match op {
            WsOp::Put(_) => vec![WsRet::True],
            WsOp::Take | WsOp::Steal => {
                let mut rets = vec![WsRet::Empty];
                let c = s.consumable(pid);
                for k in 1..=c {
                    rets.push(WsRet::Task(s.puts[s.drops[pid] + k - 1]));
                }
                rets.dedup();
                rets
            }
        }
    }
}

/// The exact max register: reads return the maximum written so far.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxRegSpec;

impl SeqSpec for MaxRegSpec {
    type State = Word;
    type Op = RegOp;
    type Ret = RegRet;

    fn initial(&self, _nprocs: usize) -> Word {
        1
    }

    fn apply(&self, s: &Word, _pid: Pid, op: RegOp, ret: RegRet, out: &mut Vec<Word>) {
        match (op, ret) {
            (RegOp::Write(v), RegRet::True) => out.push((*s).max(v)),
            (RegOp::Read, RegRet::Value(v)) => {
                if v == *s {
                    out.push(*s);
                }
            }
            _ => {}
        }
    }

    fn candidate_rets(&self, s: &Word, _pid: Pid, op: RegOp) -> Vec<RegRet> {
        match op {
            RegOp::Write(_) => vec![RegRet::True],
            RegOp::Read => vec![RegRet::Value(*s)],
        }
    }
}

/// The range max register: per-process components; a read returns anything
/// between the caller's component and the global maximum and raises the
/// caller's component to the returned value.
#[derive(Debug, Clone, Copy, Default)]
pub struct RangeMaxRegSpec;

impl SeqSpec for RangeMaxRegSpec {
    type State = Vec<Word>;
    type Op = RegOp;
    type Ret = RegRet;

    fn initial(&self, nprocs: usize) -> Vec<Word> {
        vec![1; nprocs]
    }

    fn apply(&self, s: &Vec<Word>, pid: Pid, op: RegOp, ret: RegRet, out: &mut Vec<Vec<Word>>) {
        match (op, ret) {
            (RegOp::Write(x), RegRet::True) => {
                let mut n = s.clone();
                if x > n[pid] {
                    n[pid] = x;
                }
                out.push(n);
            }
            (RegOp::Read, RegRet::Value(v)) => {
                let max = *s.iter().max().expect("nonempty state");
                if v >= s[pid] && v <= max {
                    let mut n = s.clone();
                    n[pid] = v;
                    out.push(n);
                }
            }
            _ => {}
        }
    }

    fn candidate_rets(&self, s: &Vec<Word>, pid: Pid, op: RegOp) -> Vec<RegRet> {
        match op {
            RegOp::Write(_) => vec![RegRet::True],
            RegOp::Read => {
                let max = *s.iter().max().expect("nonempty state");
                (s[pid]..=max).map(RegRet::Value).collect()
            }
        }
    }
}

/// A set-sequential specification: transitions consume concurrency classes.
pub trait SetSeqSpec {
    type State: Clone + Eq + Hash;

    fn initial(&self) -> Self::State;

    /// Pushes the successors for linearizing `class` (pids, ops and observed
    /// returns) at a single point; pushes nothing when illegal.
    fn apply_class(
        &self,
        s: &Self::State,
        class: &[(Pid, WsOp, WsRet)],
        out: &mut Vec<Self::State>,
    );

    /// The task values an extraction class could return in state `s`; used
    /// by the search to enumerate candidate classes.
    fn extraction_values(&self, s: &Self::State) -> Vec<Word>;
}

/// Work-stealing with multiplicity: a put or an empty-returning extraction
/// linearizes alone; any group with at most one take plus steals, all
/// returning the task at the head, may share one point.
#[derive(Debug, Clone, Copy, Default)]
pub struct MultSpec;

impl SetSeqSpec for MultSpec {
    type State = VecDeque<Word>;

    fn initial(&self) -> Self::State {
        VecDeque::new()
    }

    fn apply_class(
        &self,
        s: &Self::State,
        class: &[(Pid, WsOp, WsRet)],
        out: &mut Vec<Self::State>,
    ) {
        match class {
            [(pid, WsOp::Put(x), WsRet::True)] => {
                if *pid == 0 {
                    let mut q = s.clone();
                    q.push_back(*x);
                    out.push(q);
                }
            }
            [(_, WsOp::Take | WsOp::Steal, WsRet::Empty)] => {
                if s.is_empty() {
                    out.push(s.clone());
                }
            }
            extractions => {
                let Some(&front) = s.front() else { return };
                let mut takes = 0;
                for (pid, op, ret) in extractions {
                    match (op, ret) {
                        (WsOp::Take, WsRet::Task(x)) if *pid == 0 && *x == front => takes += 1,
                        (WsOp::Steal, WsRet::Task(x)) if *pid != 0 && *x == front => {}
                        _ => return,
                    }
                }
                if takes <= 1 {
                    let mut q = s.clone();
                    q.pop_front();
                    out.push(q);
                }
            }
        }
    }

    fn extraction_values(&self, s: &Self::State) -> Vec<Word> {
        s.front().copied().into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fifo_transitions() {
        let spec = ExactFifoSpec;
        let s0 = spec.initial(2);
        let mut out = Vec::new();
        spec.apply(&s0, 0, WsOp::Put(1), WsRet::True, &mut out);
        assert_eq!(out.len(), 1);
        let s1 = out.pop().unwrap();
        spec.apply(&s1, 0, WsOp::Take, WsRet::Task(2), &mut out);
        assert!(out.is_empty());
        spec.apply(&s1, 0, WsOp::Take, WsRet::Task(1), &mut out);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn weak_mult_allows_duplicate_across_processes() {
        // puts 1,2; owner takes 1 (its queue shrinks); the thief's queue
        // still holds 1, so a steal returning 1 is legal.
        let spec = WeakMultSpec;
        let mut s = spec.initial(2);
        let mut out = Vec::new();
        for x in [1, 2] {
            spec.apply(&s, 0, WsOp::Put(x), WsRet::True, &mut out);
            s = out.pop().unwrap();
        }
        spec.apply(&s, 0, WsOp::Take, WsRet::Task(1), &mut out);
        s = out.pop().unwrap();
        spec.apply(&s, 1, WsOp::Steal, WsRet::Task(1), &mut out);
        assert_eq!(out.len(), 1, "thief may still extract 1");
        let s2 = out.pop().unwrap();
        // But not twice.
        spec.apply(&s2, 1, WsOp::Steal, WsRet::Task(1), &mut out);
        assert!(out.is_empty());
    }

    #[test]
    fn weak_mult_respects_shortest_queue_bound() {
        // puts 1,2,3; nobody extracted: every queue is full, the shortest
        // has first task 1, so only task 1 is extractable.
        let spec = WeakMultSpec;
        let mut s = spec.initial(2);
        let mut out = Vec::new();
        for x in [1, 2, 3] {
            spec.apply(&s, 0, WsOp::Put(x), WsRet::True, &mut out);
            s = out.pop().unwrap();
        }
        spec.apply(&s, 1, WsOp::Steal, WsRet::Task(2), &mut out);
        assert!(out.is_empty());
        spec.apply(&s, 1, WsOp::Steal, WsRet::Task(1), &mut out);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn weak_mult_empty_after_drain_by_other() {
        // Owner drains everything; the thief's stale queue is nonempty but
        // the shortest queue is empty, so the thief may return empty (and
        // catches up).
        let spec = WeakMultSpec;
        let mut s = spec.initial(2);
        let mut out = Vec::new();
        spec.apply(&s, 0, WsOp::Put(1), WsRet::True, &mut out);
        s = out.pop().unwrap();
        spec.apply(&s, 0, WsOp::Take, WsRet::Task(1), &mut out);
        s = out.pop().unwrap();
        spec.apply(&s, 1, WsOp::Steal, WsRet::Empty, &mut out);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].drops[1], 1);
    }

    #[test]
    fn range_reg_read_range() {
        let spec = RangeMaxRegSpec;
        let mut s = spec.initial(2);
        let mut out = Vec::new();
        spec.apply(&s, 0, RegOp::Write(9), RegRet::True, &mut out);
        s = out.pop().unwrap();
        // p1's component is 1; reads may return 1..=9.
        for v in 1..=9 {
            let mut o = Vec::new();
            spec.apply(&s, 1, RegOp::Read, RegRet::Value(v), &mut o);
            assert_eq!(o.len(), 1, "v={v}");
        }
        let mut o = Vec::new();
        spec.apply(&s, 1, RegOp::Read, RegRet::Value(10), &mut o);
        assert!(o.is_empty());
    }

    #[test]
    fn mult_spec_classes() {
        let spec = MultSpec;
        let mut out = Vec::new();
        let mut s = spec.initial();
        spec.apply_class(&s, &[(0, WsOp::Put(1), WsRet::True)], &mut out);
        s = out.pop().unwrap();
        // A take and two steals, all returning 1, share one point.
        spec.apply_class(
            &s,
            &[
                (0, WsOp::Take, WsRet::Task(1)),
                (1, WsOp::Steal, WsRet::Task(1)),
                (2, WsOp::Steal, WsRet::Task(1)),
            ],
            &mut out,
        );
        assert_eq!(out.len(), 1);
        assert!(out.pop().unwrap().is_empty());
        // Two takes may not.
        spec.apply_class(
            &s,
            &[
                (0, WsOp::Take, WsRet::Task(1)),
                (0, WsOp::Take, WsRet::Task(1)),
            ],
            &mut out,
        );
        assert!(out.is_empty());
    }
}
