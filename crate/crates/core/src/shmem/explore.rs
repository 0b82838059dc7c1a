//! Exhaustive enumeration of schedules for sim-backend programs.
//!
//! The explorer walks the tree of scheduling choices depth-first, restoring
//! snapshots on backtrack. In the default mode it visits every maximal
//! interleaving; with `reduced` set it prunes interleavings that differ from
//! an already-visited one only by swapping adjacent independent steps. The
//! independence relation is history-preserving: two steps are treated as
//! dependent when they conflict on a cell *or* when reordering them could
//! change the invocation/response order across processes, so the reduced
//! mode yields the same set of distinct histories as the full mode.

use super::model::{Peek, ScriptRunner, SimModel, SimProgram};
use super::sim::SimMemory;
use super::{Access, Kind, Pid};
use crate::checker::history::{Event, History};

/// Exploration bounds.
#[derive(Debug, Clone)]
pub struct Bounds {
    /// Maximum number of processes the program may have.
    pub processes: usize,
    /// Cap on steps per interleaving; exceeding it is a bound error.
    pub steps: usize,
    /// Optional cap on the number of interleavings visited.
    pub interleavings: Option<u64>,
    /// Enable the history-preserving partial-order reduction.
    pub reduced: bool,
    /// Record access logs (needed by [`explore`]; streaming callers can turn
    /// it off).
    pub log: bool,
    /// How to treat branches that exhaust a machine-internal retry cap.
    pub on_retry_cap: RetryCapPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetryCapPolicy {
    /// Abort the exploration with [`ExploreError::RetryCap`].
    Error,
    /// Abandon the branch and count it in [`ExploreStats::retry_capped`].
    Prune,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            processes: 3,
            steps: 64,
            interleavings: None,
            reduced: false,
            log: true,
            on_retry_cap: RetryCapPolicy::Error,
        }
    }
}

impl Bounds {
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn reduced(mut self) -> Self {
        self.reduced = true;
        self
    }

    pub fn without_log(mut self) -> Self {
        self.log = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExploreError {
    #[error("program has {got} processes, bounds allow {max}")]
    TooManyProcesses { got: usize, max: usize },
    #[error("interleaving exceeded the step bound of {max}")]
    StepBound { max: usize },
    #[error("interleaving budget of {max} exhausted")]
    InterleavingBudget { max: u64 },
    #[error("process {pid} exhausted its retry cap")]
    RetryCap { pid: Pid },
}

/// Counters reported by a completed exploration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExploreStats {
    /// Maximal interleavings visited (leaves of the schedule tree).
    pub interleavings: u64,
    /// Total executed steps across all branches.
    pub steps: u64,
    /// Branches abandoned due to a retry cap (only with
    /// [`RetryCapPolicy::Prune`]).
    pub retry_capped: u64,
    /// `false` when the visitor stopped the exploration early.
    pub exhaustive: bool,
}

/// View of one maximal interleaving handed to the streaming visitor.
pub struct Leaf<'a, O, R> {
    pub history: &'a [Event<O, R>],
    pub log: &'a [Access],
    pub schedule: &'a [Pid],
    /// `(pid, op, ret, counts)` per completed operation.
    pub completed: &'a [(Pid, O, R, super::InstructionCount)],
}

/// Explores every maximal interleaving of `program`, collecting one
/// `(history, access log)` pair per interleaving.
pub fn explore<P: SimProgram>(
    program: &P,
    bounds: &Bounds,
) -> Result<
    (
        Vec<(
            History<<P::Model as SimModel>::Op, <P::Model as SimModel>::Ret>,
            Vec<Access>,
        )>,
        ExploreStats,
    ),
    ExploreError,
> {
    let mut runs = Vec::new();
    let stats = explore_each(program, bounds, |leaf| {
        runs.push((History::new(leaf.history.to_vec()), leaf.log.to_vec()));
        true
    })?;
    Ok((runs, stats))
}

fn conflict(a: &Peek, b: &Peek) -> bool {
    if a.cell != b.cell {
        return false;
    }
    use Kind::*;
    match (a.kind, b.kind) {
        (Read, Read) | (MaxRead, MaxRead) => false,
        // Max-writes commute: the register keeps the maximum either way and
        // neither instruction returns a value.
        (MaxWrite, MaxWrite) => false,
        // Plain writes of the same value commute.
        (Write, Write) => a.write_value != b.write_value,
        _ => true,
    }
}

/// Steps are dependent when they conflict on a cell or when swapping them
/// could flip a response/invocation order (which would change the real-time
/// precedence relation of the resulting history).
fn dependent(exec: &Peek, exec_first: bool, exec_done: bool, other: &Peek, other_first: bool) -> bool {
    conflict(exec, other)
        || (exec_done && other_first)
        || (exec_first && other.may_complete)
}

struct Frame<M: SimModel> {
    mem_cells: super::sim::MemSnapshot,
    runner: super::model::RunnerSnapshot<M>,
    children: Vec<Pid>,
    peeks: Vec<(Peek, bool)>,
    sleep: u64,
    next_child: usize,
    /// Sleep mask accumulated from already-explored siblings.
    explored: u64,
    log_len: usize,
    events_len: usize,
    completed_len: usize,
    sched_len: usize,
}

impl<M: SimModel> Frame<M> {
    fn fill(
        &mut self,
        runner: &ScriptRunner<M>,
        mem: &SimMemory,
        sleep: u64,
        log_len: usize,
        events_len: usize,
        completed_len: usize,
        sched_len: usize,
    ) {
        mem.save_into(&mut self.mem_cells);
        runner.save_into(&mut self.runner);
        self.children.clear();
        self.peeks.clear();
        for p in 0..runner.process_count() {
            if runner.enabled(p) {
                self.children.push(p);
                self.peeks.push(runner.peek(p, mem));
            }
        }
        self.sleep = sleep;
        self.next_child = 0;
        self.explored = 0;
        self.log_len = log_len;
        self.events_len = events_len;
        self.completed_len = completed_len;
        self.sched_len = sched_len;
    }

    fn fresh(runner: &ScriptRunner<M>, mem: &SimMemory) -> Self {
        let mut frame = Frame {
            mem_cells: mem.snapshot(),
            runner: runner.snapshot(),
            children: Vec::new(),
            peeks: Vec::new(),
            sleep: 0,
            next_child: 0,
            explored: 0,
            log_len: 0,
            events_len: 0,
            completed_len: 0,
            sched_len: 0,
        };
        frame.fill(runner, mem, 0, 0, 0, 0, 0);
        frame
    }
}

/// Streaming exploration: calls `visit` once per maximal interleaving.
/// Returning `false` from the visitor stops the exploration early.
pub fn explore_each<P: SimProgram>(
    program: &P,
    bounds: &Bounds,
    mut visit: impl FnMut(Leaf<'_, <P::Model as SimModel>::Op, <P::Model as SimModel>::Ret>) -> bool,
) -> Result<ExploreStats, ExploreError> {
    let mut mem = SimMemory::new();
    mem.set_logging(bounds.log);
    let (model, scripts) = program.build(&mut mem);
    if scripts.len() > bounds.processes {
        return Err(ExploreError::TooManyProcesses {
            got: scripts.len(),
            max: bounds.processes,
        });
    }
    mem.reset_counters();
    let mut runner = ScriptRunner::new(model, scripts);

    let mut stats = ExploreStats {
        exhaustive: true,
        ..ExploreStats::default()
    };
    let mut events: Vec<Event<_, _>> = Vec::new();
    let mut completed: Vec<(Pid, _, _, super::InstructionCount)> = Vec::new();
    let mut schedule: Vec<Pid> = Vec::new();

    if runner.all_done() {
        stats.interleavings = 1;
        visit(Leaf {
            history: &events,
            log: &mem.log,
            schedule: &schedule,
            completed: &completed,
        });
        return Ok(stats);
    }

    // Frame pool: frames[0..depth] are active; deeper slots keep their
    // buffers for reuse.
    let mut frames: Vec<Frame<P::Model>> = vec![Frame::fresh(&runner, &mem)];
    let mut depth: usize = 1;

    'outer: while depth > 0 {
        let fi = depth - 1;
        // Pick the next unexplored, non-sleeping child of the top frame.
        let pid = {
            let frame = &mut frames[fi];
            let mut found = None;
            while frame.next_child < frame.children.len() {
                let pos = frame.next_child;
                frame.next_child += 1;
                let p = frame.children[pos];
                if bounds.reduced && (frame.sleep >> p) & 1 == 1 {
                    continue;
                }
                found = Some(p);
                break;
            }
            match found {
                Some(x) => x,
                None => {
                    depth -= 1;
                    continue 'outer;
                }
            }
        };

        // Restore the node state and execute the chosen step.
        {
            let frame = &frames[fi];
            mem.restore(&frame.mem_cells);
            runner.restore(&frame.runner);
            mem.truncate_log(frame.log_len);
            events.truncate(frame.events_len);
            completed.truncate(frame.completed_len);
            schedule.truncate(frame.sched_len);
        }

        if schedule.len() >= bounds.steps {
            return Err(ExploreError::StepBound { max: bounds.steps });
        }

        let time = schedule.len() as u64;
        let report = runner.step(pid, &mut mem);
        stats.steps += 1;
        schedule.push(pid);
        if report.retry_limited {
            match bounds.on_retry_cap {
                RetryCapPolicy::Error => return Err(ExploreError::RetryCap { pid }),
                RetryCapPolicy::Prune => {
                    stats.retry_capped += 1;
                    frames[fi].explored |= 1 << pid;
                    continue 'outer;
                }
            }
        }
        if report.first {
            events.push(Event::Inv {
                pid,
                op: report.op,
                time,
            });
        }
        if let Some((ret, counts)) = report.done {
            events.push(Event::Res {
                pid,
                op: report.op,
                ret,
                time,
            });
            completed.push((pid, report.op, ret, counts));
        }

        // Child sleep set: siblings explored earlier plus inherited sleepers,
        // filtered by independence with the executed step.
        let child_sleep = if bounds.reduced {
            let frame = &frames[fi];
            let mut s = 0u64;
            let candidates = frame.sleep | frame.explored;
            for (i, &q) in frame.children.iter().enumerate() {
                if q == pid || (candidates >> q) & 1 == 0 {
                    continue;
                }
                let (q_peek, q_first) = frame.peeks[i];
                if !dependent(
                    &report.executed,
                    report.first,
                    report.done.is_some(),
                    &q_peek,
                    q_first,
                ) {
                    s |= 1 << q;
                }
            }
            s
        } else {
            0
        };
        frames[fi].explored |= 1 << pid;

        if runner.all_done() {
            stats.interleavings += 1;
            if let Some(budget) = bounds.interleavings {
                if stats.interleavings > budget {
                    return Err(ExploreError::InterleavingBudget { max: budget });
                }
            }
            let keep_going = visit(Leaf {
                history: &events,
                log: &mem.log,
                schedule: &schedule,
                completed: &completed,
            });
            if !keep_going {
                stats.exhaustive = false;
                return Ok(stats);
            }
            continue 'outer;
        }

        let (log_len, events_len, completed_len, sched_len) =
            (mem.log_len(), events.len(), completed.len(), schedule.len());
        if frames.len() > depth {
            frames[depth].fill(
                &runner,
                &mem,
                child_sleep,
                log_len,
                events_len,
                completed_len,
                sched_len,
            );
        } else {
            let mut f = Frame::fresh(&runner, &mem);
            f.fill(
                &runner,
                &mem,
                child_sleep,
                log_len,
                events_len,
                completed_len,
                sched_len,
            );
            frames.push(f);
        }
        depth += 1;
    }

    Ok(stats)
}

/// Convenience: one representative [`History`] per distinct canonical form.
pub fn distinct_histories<P: SimProgram>(
    program: &P,
    bounds: &Bounds,
) -> Result<
    Vec<History<<P::Model as SimModel>::Op, <P::Model as SimModel>::Ret>>,
    ExploreError,
> {
    use std::collections::HashSet;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    explore_each(program, bounds, |leaf| {
        let h = History::new(leaf.history.to_vec());
        if seen.insert(h.canonical()) {
            out.push(h);
        }
        true
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::model::{CellModel, CellOp};
    use super::*;

    fn writers(steps_per_proc: Vec<usize>) -> impl SimProgram<Model = CellModel> {
        move |mem: &mut SimMemory| {
            let n = steps_per_proc.len();
            let model = CellModel::install(mem, n, n, 0);
            let scripts = steps_per_proc
                .iter()
                .enumerate()
                .map(|(p, &k)| (0..k).map(|i| CellOp::Write(p, i as u64)).collect())
                .collect();
            (model, scripts)
        }
    }

    #[test]
    fn two_single_step_processes_have_two_interleavings() {
        let (_, stats) = explore(&writers(vec![1, 1]), &Bounds::default()).unwrap();
        assert_eq!(stats.interleavings, 2);
    }

    #[test]
    fn two_two_step_processes_have_six_interleavings() {
        let (_, stats) = explore(&writers(vec![2, 2]), &Bounds::default()).unwrap();
        assert_eq!(stats.interleavings, 6);
    }

    #[test]
    fn interleaving_count_matches_multinomial() {
        // 3 processes with 2, 3, 2 branch-free steps: 7! / (2! 3! 2!) = 210.
        let (_, stats) = explore(&writers(vec![2, 3, 2]), &Bounds::default()).unwrap();
        assert_eq!(stats.interleavings, 210);
    }

    #[test]
    fn step_bound_is_reported() {
        let err = explore(&writers(vec![4, 4]), &Bounds::default().with_steps(3)).unwrap_err();
        assert_eq!(err, ExploreError::StepBound { max: 3 });
    }

    #[test]
    fn logs_are_deduplicated_by_schedule() {
        // Every leaf of a full exploration corresponds to a distinct schedule
        // and hence a distinct access log.
        use std::collections::HashSet;
        let (runs, stats) = explore(&writers(vec![2, 2]), &Bounds::default()).unwrap();
        let logs: HashSet<Vec<String>> = runs
            .iter()
            .map(|(_, log)| log.iter().map(|a| a.to_line()).collect())
            .collect();
        assert_eq!(logs.len() as u64, stats.interleavings);
    }

    fn pair_writers(nprocs: usize, ops_per_proc: usize) -> impl SimProgram<Model = CellModel> {
        move |mem: &mut SimMemory| {
            let model = CellModel::install(mem, nprocs, 2 * nprocs, 0);
            let scripts = (0..nprocs)
                .map(|p| {
                    (0..ops_per_proc)
                        .map(|i| CellOp::Pair(2 * p, i as u64, 2 * p + 1, i as u64))
                        .collect()
                })
                .collect();
            (model, scripts)
        }
    }

    #[test]
    fn reduced_mode_preserves_distinct_histories() {
        // Two-step writers on process-private cells: their interiors commute,
        // so the reduced mode prunes, but the set of distinct canonical
        // histories must be identical to the full enumeration's.
        for prog in [pair_writers(3, 1), pair_writers(2, 2)] {
            let full = distinct_histories(&prog, &Bounds::default()).unwrap();
            let reduced = distinct_histories(&prog, &Bounds::default().reduced()).unwrap();
            let full_set: std::collections::HashSet<_> =
                full.iter().map(|h| h.canonical()).collect();
            let red_set: std::collections::HashSet<_> =
                reduced.iter().map(|h| h.canonical()).collect();
            assert_eq!(full_set, red_set);
        }
    }

    #[test]
    fn reduced_mode_prunes_independent_interleavings() {
        let (_, full) = explore(&pair_writers(2, 2), &Bounds::default()).unwrap();
        let (_, red) = explore(&pair_writers(2, 2), &Bounds::default().reduced()).unwrap();
        assert!(red.interleavings < full.interleavings);
    }

    #[test]
    fn single_step_ops_cannot_be_pruned() {
        // Every step of a single-instruction operation carries both its
        // invocation and its response, so each interleaving is a distinct
        // history and the reduction keeps all of them.
        let (_, full) = explore(&writers(vec![2, 2]), &Bounds::default()).unwrap();
        let (_, red) = explore(&writers(vec![2, 2]), &Bounds::default().reduced()).unwrap();
        assert_eq!(red.interleavings, full.interleavings);
    }
}
