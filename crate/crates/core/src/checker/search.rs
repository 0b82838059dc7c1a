//! Brute-force (set-)linearizability decision procedures.
//!
//! Depth-first search over linearization orders, memoized on the pair
//! (set of linearized operations, specification state). Pending operations
//! are first dropped, then completed with every return the specification
//! offers at the point they linearize.

use crate::checker::history::{precedes, History, OpRecord, WsOp, WsRet};
use crate::checker::spec::{SeqSpec, SetSeqSpec};
use std::collections::HashSet;
use std::hash::{BuildHasherDefault, Hasher};

/// Multiply-xor hasher for the hot memoization sets; not DoS-resistant,
/// which is fine for checker-internal keys.
#[derive(Default)]
pub struct FxHasher {
    state: u64,
}

const FX_SEED: u64 = 0x51_7c_c1_b7_27_22_0a_95;

impl Hasher for FxHasher {
    #[inline]
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.write_u8(b);
        }
    }

    #[inline]
    fn write_u8(&mut self, b: u8) {
        self.write_u64(b as u64);
    }

    #[inline]
    fn write_u32(&mut self, v: u32) {
        self.write_u64(v as u64);
    }

    #[inline]
    fn write_u64(&mut self, v: u64) {
        self.state = (self.state.rotate_left(5) ^ v).wrapping_mul(FX_SEED);
    }

    #[inline]
    fn write_usize(&mut self, v: usize) {
        self.write_u64(v as u64);
    }

    #[inline]
    fn finish(&self) -> u64 {
        self.state
    }
}

pub type FxBuildHasher = BuildHasherDefault<FxHasher>;
pub type FxHashSet<T> = HashSet<T, FxBuildHasher>;

/// Search budget in expanded nodes.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub max_nodes: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_nodes: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Accepted,
    Rejected,
    /// The budget ran out before the search could accept or exhaust; never
    /// to be treated as a pass.
    Inconclusive,
}

/// Result of a check. On acceptance the witness lists concurrency classes of
/// operation indices (singletons under plain linearizability) in
/// linearization order; on rejection `stuck` names the operations that could
/// not be linearized past the deepest frontier reached.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub outcome: Outcome,
    pub witness: Option<Vec<Vec<usize>>>,
    pub stuck: Option<Vec<usize>>,
    pub nodes: u64,
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        self.outcome == Outcome::Accepted
    }

    pub fn rejected(&self) -> bool {
        self.outcome == Outcome::Rejected
    }
}

const MAX_OPS: usize = 24;

fn precedence_masks<O: Copy, R: Copy>(recs: &[OpRecord<O, R>]) -> Vec<u32> {
    let n = recs.len();
    let mut preds = vec![0u32; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && precedes(&recs[j], &recs[i]) {
                preds[i] |= 1 << j;
            }
        }
    }
    preds
}

/// Subsets of `items` in ascending size order (drop-pending-first search).
fn subsets_by_size(items: &[usize]) -> Vec<u32> {
    let mut subs: Vec<u32> = (0..(1u32 << items.len()))
        .map(|bits| {
            let mut m = 0u32;
            for (k, &i) in items.iter().enumerate() {
                if (bits >> k) & 1 == 1 {
                    m |= 1 << i;
                }
            }
            m
        })
        .collect();
    subs.sort_by_key(|m| m.count_ones());
    subs
}

struct LinCtx<'a, S: SeqSpec> {
    spec: &'a S,
    recs: &'a [OpRecord<S::Op, S::Ret>],
    keep: u32,
    preds: &'a [u32],
    budget: u64,
    nodes: u64,
    hit_budget: bool,
    best_mask: u32,
    memo: FxHashSet<(u32, S::State)>,
}

impl<S: SeqSpec> LinCtx<'_, S> {
    fn dfs(&mut self, mask: u32, state: &S::State, path: &mut Vec<usize>) -> bool {
        if mask == self.keep {
            return true;
        }
        if !self.memo.insert((mask, state.clone())) {
            return false;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.hit_budget = true;
            return false;
        }
        if mask.count_ones() > self.best_mask.count_ones() {
            self.best_mask = mask;
        }
        let mut succs = Vec::new();
        for i in 0..self.recs.len() {
            let bit = 1u32 << i;
            if self.keep & bit == 0 || mask & bit != 0 || self.preds[i] & self.keep & !mask != 0
            {
                continue;
            }
            let rec = &self.recs[i];
            let rets = match rec.ret {
                Some(ret) => vec![ret],
                None => self.spec.candidate_rets(state, rec.pid, rec.op),
            };
            for ret in rets {
                succs.clear();
                self.spec.apply(state, rec.pid, rec.op, ret, &mut succs);
                for next in succs.drain(..) {
                    path.push(i);
                    if self.dfs(mask | bit, &next, path) {
                        return true;
                    }
                    path.pop();
                }
            }
        }
        false
    }
}

/// Decides linearizability of `h` against a sequential specification.
pub fn check_linearizable<S: SeqSpec>(h: &History<S::Op, S::Ret>, spec: &S, budget: &Budget) -> Verdict
where
    S::Op: Copy + PartialEq + std::fmt::Debug,
    S::Ret: Copy + std::fmt::Debug,
{
    let recs = h.ops();
    if recs.len() > MAX_OPS {
        return Verdict {
            outcome: Outcome::Inconclusive,
            witness: None,
            stuck: None,
            nodes: 0,
        };
    }
    let nprocs = recs.iter().map(|r| r.pid).max().map_or(1, |p| p + 1);
    let preds = precedence_masks(&recs);
    let completed: u32 = recs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_complete())
        .fold(0, |m, (i, _)| m | 1 << i);
    let pending: Vec<usize> = (0..recs.len()).filter(|&i| !recs[i].is_complete()).collect();

    let mut nodes = 0u64;
    let mut hit_budget = false;
    let mut best_mask = 0u32;
    for extra in subsets_by_size(&pending) {
        let mut ctx = LinCtx {
            spec,
            recs: &recs,
            keep: completed | extra,
            preds: &preds,
            budget: budget.max_nodes.saturating_sub(nodes),
            nodes: 0,
            hit_budget: false,
            best_mask: 0,
            memo: FxHashSet::default(),
        };
        let mut path = Vec::new();
        let accepted = ctx.dfs(0, &spec.initial(nprocs), &mut path);
        nodes += ctx.nodes;
        hit_budget |= ctx.hit_budget;
        if ctx.best_mask.count_ones() > best_mask.count_ones() {
            best_mask = ctx.best_mask;
        }
        if accepted {
            return Verdict {
                outcome: Outcome::Accepted,
                witness: Some(path.iter().map(|&i| vec![i]).collect()),
                stuck: None,
                nodes,
            };
        }
        if hit_budget {
            break;
        }
    }
    Verdict {
        outcome: if hit_budget {
            Outcome::Inconclusive
        } else {
            Outcome::Rejected
        },
        witness: None,
        stuck: Some(
            (0..recs.len())
                .filter(|&i| completed & (1 << i) != 0 && best_mask & (1 << i) == 0)
                .collect(),
        ),
        nodes,
    }
}

struct SetCtx<'a, S: SetSeqSpec> {
    spec: &'a S,
    recs: &'a [OpRecord<WsOp, WsRet>],
    keep: u32,
    preds: &'a [u32],
    /// Pairwise-concurrency bitmask per op.
    conc: &'a [u32],
    budget: u64,
    nodes: u64,
    hit_budget: bool,
    best_mask: u32,
    memo: FxHashSet<(u32, S::State)>,
}

impl<S: SetSeqSpec> SetCtx<'_, S> {
    fn enabled(&self, mask: u32) -> Vec<usize> {
        (0..self.recs.len())
            .filter(|&i| {
                let bit = 1u32 << i;
                self.keep & bit != 0
                    && mask & bit == 0
                    && self.preds[i] & self.keep & !mask == 0
            })
            .collect()
    }

    fn dfs(&mut self, mask: u32, state: &S::State, path: &mut Vec<Vec<usize>>) -> bool {
        if mask == self.keep {
            return true;
        }
        if !self.memo.insert((mask, state.clone())) {
            return false;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.hit_budget = true;
            return false;
        }
        if mask.count_ones() > self.best_mask.count_ones() {
            self.best_mask = mask;
        }
        let enabled = self.enabled(mask);
        let mut succs = Vec::new();

        // Singleton classes: puts and empty-returning extractions (and
        // pending operations completed as either).
        for &i in &enabled {
            let rec = &self.recs[i];
            let singleton_rets: Vec<WsRet> = match (rec.op, rec.ret) {
                (WsOp::Put(_), Some(r)) => vec![r],
                (WsOp::Put(_), None) => vec![WsRet::True],
                (_, Some(WsRet::Empty)) => vec![WsRet::Empty],
                (_, None) => vec![WsRet::Empty],
                _ => vec![],
            };
            for ret in singleton_rets {
                succs.clear();
                self.spec
                    .apply_class(state, &[(rec.pid, rec.op, ret)], &mut succs);
                for next in succs.drain(..) {
                    path.push(vec![i]);
                    if self.dfs(mask | (1 << i), &next, path) {
                        return true;
                    }
                    path.pop();
                }
            }
        }

        // Extraction classes: pairwise-concurrent groups returning one task.
        for x in self.spec.extraction_values(state) {
            let members: Vec<usize> = enabled
                .iter()
                .copied()
                .filter(|&i| {
                    let rec = &self.recs[i];
                    matches!(rec.op, WsOp::Take | WsOp::Steal)
                        && match rec.ret {
                            Some(WsRet::Task(v)) => v == x,
                            Some(_) => false,
                            None => true,
                        }
                })
                .collect();
            if members.is_empty() {
                continue;
            }
            let k = members.len().min(8);
            for bits in 1u32..(1 << k) {
                let class: Vec<usize> = (0..k)
                    .filter(|b| (bits >> b) & 1 == 1)
                    .map(|b| members[b])
                    .collect();
                let mut class_mask = 0u32;
                let pairwise_conc = class.iter().all(|&i| {
                    class_mask |= 1 << i;
                    class
                        .iter()
                        .all(|&j| i == j || self.conc[i] & (1 << j) != 0)
                });
                if !pairwise_conc {
                    continue;
                }
                let class_ops: Vec<_> = class
                    .iter()
                    .map(|&i| (self.recs[i].pid, self.recs[i].op, WsRet::Task(x)))
                    .collect();
                succs.clear();
                self.spec.apply_class(state, &class_ops, &mut succs);
                for next in succs.drain(..) {
                    path.push(class.clone());
                    if self.dfs(mask | class_mask, &next, path) {
                        return true;
                    }
                    path.pop();
                }
            }
        }
        false
    }
}

/// Decides set-linearizability of `h` against a set-sequential
/// specification.
pub fn check_set_linearizable<S: SetSeqSpec>(
    h: &History<WsOp, WsRet>,
    spec: &S,
    budget: &Budget,
) -> Verdict {
    let recs = h.ops();
    if recs.len() > MAX_OPS {
        return Verdict {
            outcome: Outcome::Inconclusive,
            witness: None,
            stuck: None,
            nodes: 0,
        };
    }
    if recs.is_empty() {
        return Verdict {
            outcome: Outcome::Accepted,
            witness: Some(Vec::new()),
            stuck: None,
            nodes: 0,
        };
    }
    let preds = precedence_masks(&recs);
    let n = recs.len();
    let mut conc = vec![0u32; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && preds[i] & (1 << j) == 0 && preds[j] & (1 << i) == 0 {
                conc[i] |= 1 << j;
            }
        }
    }
    let completed: u32 = recs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_complete())
        .fold(0, |m, (i, _)| m | 1 << i);
    let pending: Vec<usize> = (0..n).filter(|&i| !recs[i].is_complete()).collect();

    let mut nodes = 0u64;
    let mut hit_budget = false;
    let mut best_mask = 0u32;
    for extra in subsets_by_size(&pending) {
        let mut ctx = SetCtx {
            spec,
            recs: &recs,
            keep: completed | extra,
            preds: &preds,
            conc: &conc,
            budget: budget.max_nodes.saturating_sub(nodes),
            nodes: 0,
            hit_budget: false,
            best_mask: 0,
            memo: FxHashSet::default(),
        };
        let mut path = Vec::new();
        let accepted = ctx.dfs(0, &spec.initial(), &mut path);
        nodes += ctx.nodes;
        hit_budget |= ctx.hit_budget;
        if ctx.best_mask.count_ones() > best_mask.count_ones() {
            best_mask = ctx.best_mask;
        }
        if accepted {
            return Verdict {
                outcome: Outcome::Accepted,
                witness: Some(path),
                stuck: None,
                nodes,
            };
        }
        if hit_budget {
            break;
        }
    }
    Verdict {
        outcome: if hit_budget {
            Outcome::Inconclusive
        } else {
            Outcome::Rejected
        },
        witness: None,
        stuck: Some(
            (0..n)
                .filter(|&i| completed & (1 << i) != 0 && best_mask & (1 << i) == 0)
                .collect(),
        ),
        nodes,
    }
}

/// Checks that an already-sequential run is a sequential execution of the
/// specification, tracking the full frontier of states for nondeterministic
/// machines.
pub fn matches_sequential_spec<S: SeqSpec>(
    spec: &S,
    nprocs: usize,
    run: &[(crate::shmem::Pid, S::Op, S::Ret)],
) -> bool
where
    S::Op: Copy,
    S::Ret: Copy + PartialEq,
{
    let mut states: HashSet<S::State> = HashSet::from([spec.initial(nprocs)]);
    for &(pid, op, ret) in run {
        let mut next = Vec::new();
        for s in &states {
            spec.apply(s, pid, op, ret, &mut next);
        }
        states = next.into_iter().collect();
        if states.is_empty() {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::history::{Event, WsHistory};
    use crate::checker::spec::{ExactFifoSpec, MultSpec, WeakMultSpec};

    fn ev(events: Vec<Event<WsOp, WsRet>>) -> WsHistory {
        History::new(events)
    }

    fn seq(ops: &[(usize, WsOp, WsRet)]) -> WsHistory {
        let mut events = Vec::new();
        for (t, (pid, op, ret)) in ops.iter().enumerate() {
            events.push(Event::Inv {
                pid: *pid,
                op: *op,
                time: 2 * t as u64,
            });
            events.push(Event::Res {
                pid: *pid,
                op: *op,
                ret: *ret,
                time: 2 * t as u64 + 1,
            });
        }
        ev(events)
    }

    #[test]
    fn empty_history_is_accepted() {
        let h = ev(vec![]);
        assert!(check_set_linearizable(&h, &MultSpec, &Budget::default()).accepted());
        assert!(check_linearizable(&h, &ExactFifoSpec, &Budget::default()).accepted());
    }

    #[test]
    fn sequential_take_then_steal_of_same_task_rejected_under_multiplicity() {
        // Non-concurrent duplicate extractions must share a class but cannot.
        let h = seq(&[
            (0, WsOp::Put(1), WsRet::True),
            (0, WsOp::Take, WsRet::Task(1)),
            (1, WsOp::Steal, WsRet::Task(1)),
        ]);
        let v = check_set_linearizable(&h, &MultSpec, &Budget::default());
        assert!(v.rejected());
        // The same history is fine under weak multiplicity.
        let v2 = check_linearizable(&h, &WeakMultSpec, &Budget::default());
        assert!(v2.accepted());
    }

    #[test]
    fn overlapping_take_and_steal_of_same_task_accepted() {
        // put(1) completes; then take and steal overlap, both returning 1.
        let h = ev(vec![
            Event::Inv { pid: 0, op: WsOp::Put(1), time: 0 },
            Event::Res { pid: 0, op: WsOp::Put(1), ret: WsRet::True, time: 1 },
            Event::Inv { pid: 0, op: WsOp::Take, time: 2 },
            Event::Inv { pid: 1, op: WsOp::Steal, time: 3 },
            Event::Res { pid: 0, op: WsOp::Take, ret: WsRet::Task(1), time: 4 },
            Event::Res { pid: 1, op: WsOp::Steal, ret: WsRet::Task(1), time: 5 },
        ]);
        let v = check_set_linearizable(&h, &MultSpec, &Budget::default());
        assert!(v.accepted());
        let classes = v.witness.unwrap();
        assert!(classes.iter().any(|c| c.len() == 2));
    }

    #[test]
    fn steal_empty_before_any_put_is_accepted() {
        let h = seq(&[
            (1, WsOp::Steal, WsRet::Empty),
            (0, WsOp::Put(1), WsRet::True),
        ]);
        assert!(check_set_linearizable(&h, &MultSpec, &Budget::default()).accepted());
        assert!(check_linearizable(&h, &WeakMultSpec, &Budget::default()).accepted());
    }

    #[test]
    fn value_returned_before_put_is_rejected() {
        let h = seq(&[
            (1, WsOp::Steal, WsRet::Task(1)),
            (0, WsOp::Put(1), WsRet::True),
        ]);
        assert!(check_set_linearizable(&h, &MultSpec, &Budget::default()).rejected());
        assert!(check_linearizable(&h, &ExactFifoSpec, &Budget::default()).rejected());
        assert!(check_linearizable(&h, &WeakMultSpec, &Budget::default()).rejected());
    }

    #[test]
    fn fifo_order_inversion_is_rejected() {
        let h = seq(&[
            (0, WsOp::Put(1), WsRet::True),
            (0, WsOp::Put(2), WsRet::True),
            (0, WsOp::Take, WsRet::Task(2)),
        ]);
        assert!(check_linearizable(&h, &ExactFifoSpec, &Budget::default()).rejected());
        assert!(check_set_linearizable(&h, &MultSpec, &Budget::default()).rejected());
    }

    #[test]
    fn three_process_nonconcurrent_duplicate_weak_only() {
        // puts 1..3; thief1 reads the head early and pauses; the owner takes
        // 1 and 2; thief1 finishes with task 1 (overlapping everything);
        // thief2 then steals task 2 even though the owner's take of 2
        // completed before thief2 began: a non-concurrent duplicate.
        let h = ev(vec![
            Event::Inv { pid: 0, op: WsOp::Put(1), time: 0 },
            Event::Res { pid: 0, op: WsOp::Put(1), ret: WsRet::True, time: 1 },
            Event::Inv { pid: 0, op: WsOp::Put(2), time: 2 },
            Event::Res { pid: 0, op: WsOp::Put(2), ret: WsRet::True, time: 3 },
            Event::Inv { pid: 0, op: WsOp::Put(3), time: 4 },
            Event::Res { pid: 0, op: WsOp::Put(3), ret: WsRet::True, time: 5 },
            Event::Inv { pid: 1, op: WsOp::Steal, time: 6 },
            Event::Inv { pid: 0, op: WsOp::Take, time: 7 },
            Event::Res { pid: 0, op: WsOp::Take, ret: WsRet::Task(1), time: 8 },
            Event::Inv { pid: 0, op: WsOp::Take, time: 9 },
            Event::Res { pid: 0, op: WsOp::Take, ret: WsRet::Task(2), time: 10 },
            Event::Res { pid: 1, op: WsOp::Steal, ret: WsRet::Task(1), time: 11 },
            Event::Inv { pid: 2, op: WsOp::Steal, time: 12 },
            Event::Res { pid: 2, op: WsOp::Steal, ret: WsRet::Task(2), time: 13 },
        ]);
        assert!(h.validate().is_ok());
        let weak = check_linearizable(&h, &WeakMultSpec, &Budget::default());
        assert!(weak.accepted());
        let mult = check_set_linearizable(&h, &MultSpec, &Budget::default());
        assert!(mult.rejected());
    }

    #[test]
    fn pending_operation_may_be_dropped_or_completed() {
        // A pending steal: accepted by dropping it.
        let h = ev(vec![
            Event::Inv { pid: 0, op: WsOp::Put(1), time: 0 },
            Event::Res { pid: 0, op: WsOp::Put(1), ret: WsRet::True, time: 1 },
            Event::Inv { pid: 1, op: WsOp::Steal, time: 2 },
        ]);
        assert!(check_linearizable(&h, &ExactFifoSpec, &Budget::default()).accepted());
        assert!(check_set_linearizable(&h, &MultSpec, &Budget::default()).accepted());
    }

    #[test]
    fn budget_exhaustion_is_inconclusive_not_reject() {
        let h = seq(&[
            (0, WsOp::Put(1), WsRet::True),
            (0, WsOp::Put(2), WsRet::True),
            (0, WsOp::Take, WsRet::Task(1)),
            (1, WsOp::Steal, WsRet::Task(2)),
        ]);
        let v = check_linearizable(&h, &ExactFifoSpec, &Budget { max_nodes: 1 });
        assert_eq!(v.outcome, Outcome::Inconclusive);
    }

    #[test]
    fn monotone_search_completion_never_flips_accept_to_inconclusive() {
        // Accepting a history with a pending op stays accepting when the
        // pending op is completed with the return the search chose.
        let pending = ev(vec![
            Event::Inv { pid: 0, op: WsOp::Put(1), time: 0 },
            Event::Res { pid: 0, op: WsOp::Put(1), ret: WsRet::True, time: 1 },
            Event::Inv { pid: 1, op: WsOp::Steal, time: 2 },
        ]);
        let completed = ev(vec![
            Event::Inv { pid: 0, op: WsOp::Put(1), time: 0 },
            Event::Res { pid: 0, op: WsOp::Put(1), ret: WsRet::True, time: 1 },
            Event::Inv { pid: 1, op: WsOp::Steal, time: 2 },
            Event::Res { pid: 1, op: WsOp::Steal, ret: WsRet::Task(1), time: 3 },
        ]);
        let budget = Budget::default();
        assert!(check_linearizable(&pending, &ExactFifoSpec, &budget).accepted());
        assert!(check_linearizable(&completed, &ExactFifoSpec, &budget).accepted());
        assert!(check_set_linearizable(&pending, &MultSpec, &budget).accepted());
        assert!(check_set_linearizable(&completed, &MultSpec, &budget).accepted());
    }
}
