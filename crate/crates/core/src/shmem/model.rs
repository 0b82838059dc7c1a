//! Cooperative step machines for the sim backend.
//!
//! A [`SimModel`] is an algorithm instance whose operations execute one
//! shared atomic instruction per [`SimModel::step`] call. The
//! [`ScriptRunner`] drives one operation script per process against a model;
//! schedulers (replay, the explorer) pick which process steps next.
//!
//! An operation's invocation is placed at its first shared step and its
//! response at the step that completes it; processes take no observable
//! action outside their steps.

use super::sim::SimMemory;
use super::{CellId, InstructionCount, Kind, Pid, Word};
use crate::checker::history::{Event, History};
use std::fmt;
use std::hash::Hash;
use std::sync::Arc;

/// Outcome of executing one step of an in-flight operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome<R> {
    /// The operation has more shared instructions to execute.
    Running,
    /// This step completed the operation with the given response.
    Done(R),
    /// A retry loop exceeded the configured cap (bounded-steal variants).
    RetryLimit,
}

/// Description of the next shared instruction a process will execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Peek {
    pub kind: Kind,
    pub cell: CellId,
    /// Value about to be written, for write-like instructions.
    pub write_value: Option<Word>,
    /// Whether this step may complete the operation. `true` when uncertain.
    pub may_complete: bool,
}

/// An algorithm modelled as per-process step machines over [`SimMemory`].
pub trait SimModel: Clone {
    type Op: Copy + fmt::Debug + Eq + Hash;
    type Ret: Copy + fmt::Debug + Eq + Hash;

    /// Prepares process `pid` to run `op`. Consumes no steps.
    fn begin(&mut self, pid: Pid, op: Self::Op);

    /// Executes exactly one shared instruction of `pid`'s in-flight
    /// operation.
    fn step(&mut self, pid: Pid, mem: &mut SimMemory) -> StepOutcome<Self::Ret>;

    /// Describes the instruction the next `step(pid, ..)` call will execute.
    fn peek(&self, pid: Pid, mem: &SimMemory) -> Peek;

    /// Copies another instance's state into `self`, reusing allocations
    /// where the model can. The explorer's snapshot pool calls this on every
    /// node, so models with heap state should override it.
    fn copy_from(&mut self, other: &Self) {
        *self = other.clone();
    }
}

/// What happened when the runner stepped a process.
#[derive(Debug, Clone, Copy)]
pub struct StepReport<O, R> {
    pub pid: Pid,
    pub op: O,
    /// This was the operation's first shared step (its invocation point).
    pub first: bool,
    /// Set when this step completed the operation.
    pub done: Option<(R, InstructionCount)>,
    /// The instruction that was executed.
    pub executed: Peek,
    pub retry_limited: bool,
}

/// Snapshot of runner state, excluding the scripts (which never change).
#[derive(Debug, Clone)]
pub struct RunnerSnapshot<M: SimModel> {
    model: M,
    next_op: Vec<usize>,
    active: Vec<Option<M::Op>>,
    in_op_steps: Vec<InstructionCount>,
}

/// Drives per-process operation scripts against a model.
#[derive(Debug, Clone)]
pub struct ScriptRunner<M: SimModel> {
    pub model: M,
    scripts: Arc<Vec<Vec<M::Op>>>,
    next_op: Vec<usize>,
    active: Vec<Option<M::Op>>,
    in_op_steps: Vec<InstructionCount>,
}

impl<M: SimModel> ScriptRunner<M> {
    pub fn new(mut model: M, scripts: Vec<Vec<M::Op>>) -> Self {
        let n = scripts.len();
        let mut next_op = vec![0usize; n];
        let mut active = vec![None; n];
        for pid in 0..n {
            if let Some(&op) = scripts[pid].first() {
                model.begin(pid, op);
                active[pid] = Some(op);
                next_op[pid] = 1;
            }
        }
        ScriptRunner {
            model,
            scripts: Arc::new(scripts),
            next_op,
            active,
            in_op_steps: vec![InstructionCount::default(); n],
        }
    }

    pub fn process_count(&self) -> usize {
        self.scripts.len()
    }

    /// A process is enabled while it has an in-flight operation.
    pub fn enabled(&self, pid: Pid) -> bool {
        self.active[pid].is_some()
    }

    pub fn enabled_pids(&self) -> Vec<Pid> {
        (0..self.scripts.len()).filter(|&p| self.enabled(p)).collect()
    }

    pub fn all_done(&self) -> bool {
        self.active.iter().all(|a| a.is_none())
    }

    /// Next instruction of `pid` plus whether it opens a fresh operation.
    pub fn peek(&self, pid: Pid, mem: &SimMemory) -> (Peek, bool) {
        let peek = self.model.peek(pid, mem);
        let first = self.in_op_steps[pid].total() == 0;
        (peek, first)
    }

    /// Executes one step of `pid`'s in-flight operation.
    ///
    /// Panics if `pid` is not enabled; schedulers must consult
    /// [`ScriptRunner::enabled`] first.
    pub fn step(&mut self, pid: Pid, mem: &mut SimMemory) -> StepReport<M::Op, M::Ret> {
        let op = self.active[pid].expect("stepped a process with no in-flight operation");
        let executed = self.model.peek(pid, mem);
        let first = self.in_op_steps[pid].total() == 0;
        let outcome = self.model.step(pid, mem);
        self.in_op_steps[pid].record(executed.kind);
        let mut report = StepReport {
            pid,
            op,
            first,
            done: None,
            executed,
            retry_limited: false,
        };
        match outcome {
            StepOutcome::Running => {}
            StepOutcome::RetryLimit => {
                report.retry_limited = true;
            }
            StepOutcome::Done(ret) => {
                report.done = Some((ret, self.in_op_steps[pid]));
                self.in_op_steps[pid] = InstructionCount::default();
                self.active[pid] = None;
                let idx = self.next_op[pid];
                if let Some(&next) = self.scripts[pid].get(idx) {
                    self.model.begin(pid, next);
                    self.active[pid] = Some(next);
                    self.next_op[pid] = idx + 1;
                }
            }
        }
        report
    }

    pub fn snapshot(&self) -> RunnerSnapshot<M> {
        RunnerSnapshot {
            model: self.model.clone(),
            next_op: self.next_op.clone(),
            active: self.active.clone(),
            in_op_steps: self.in_op_steps.clone(),
        }
    }

    /// Refreshes an existing snapshot in place.
    pub fn save_into(&self, snap: &mut RunnerSnapshot<M>) {
        snap.model.copy_from(&self.model);
        snap.next_op.clone_from(&self.next_op);
        snap.active.clone_from(&self.active);
        snap.in_op_steps.clone_from(&self.in_op_steps);
    }

    pub fn restore(&mut self, snap: &RunnerSnapshot<M>) {
        self.model.copy_from(&snap.model);
        self.next_op.clone_from(&snap.next_op);
        self.active.clone_from(&snap.active);
        self.in_op_steps.clone_from(&snap.in_op_steps);
    }
}

/// A program for the sim backend: allocates its cells in a fresh memory and
/// returns the model plus one operation script per process.
pub trait SimProgram {
    type Model: SimModel;
    fn build(
        &self,
        mem: &mut SimMemory,
    ) -> (Self::Model, Vec<Vec<<Self::Model as SimModel>::Op>>);
}

impl<M: SimModel, F> SimProgram for F
where
    F: Fn(&mut SimMemory) -> (M, Vec<Vec<M::Op>>),
{
    type Model = M;
    fn build(&self, mem: &mut SimMemory) -> (M, Vec<Vec<M::Op>>) {
        self(mem)
    }
}

/// Result of replaying one schedule.
#[derive(Debug, Clone)]
pub struct Execution<O, R> {
    pub history: History<O, R>,
    pub log: Vec<super::Access>,
    /// `(pid, op, ret, counts)` per completed operation, in completion order.
    pub completed: Vec<(Pid, O, R, InstructionCount)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("schedule entry {index} names process {pid}, which has no in-flight operation")]
    DisabledProcess { index: usize, pid: Pid },
    #[error("process {pid} exhausted its retry cap")]
    RetryCap { pid: Pid },
}

/// Replays `program` under an explicit schedule (one pid per step) and
/// returns the resulting history, access log and instruction counts.
///
/// Two replays of the same `(program, schedule)` pair produce identical
/// results.
pub fn replay<P: SimProgram>(
    program: &P,
    schedule: &[Pid],
) -> Result<Execution<<P::Model as SimModel>::Op, <P::Model as SimModel>::Ret>, ReplayError> {
    let mut mem = SimMemory::with_logging();
    let (model, scripts) = program.build(&mut mem);
    mem.reset_counters();
    let mut runner = ScriptRunner::new(model, scripts);
    let mut events = Vec::new();
    let mut completed = Vec::new();
    for (index, &pid) in schedule.iter().enumerate() {
        if !runner.enabled(pid) {
            return Err(ReplayError::DisabledProcess { index, pid });
        }
        let time = mem.steps() as u64;
        let report = runner.step(pid, &mut mem);
        if report.retry_limited {
            return Err(ReplayError::RetryCap { pid });
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
    }
    Ok(Execution {
        history: History::new(events),
        log: std::mem::take(&mut mem.log),
        completed,
    })
}

/// Runs `program` to completion by stepping processes according to `pick`,
/// which receives the runner and memory and returns the next pid.
pub fn run_with_policy<P: SimProgram>(
    program: &P,
    mut pick: impl FnMut(
        &ScriptRunner<P::Model>,
        &SimMemory,
    ) -> Pid,
    max_steps: usize,
) -> Result<Execution<<P::Model as SimModel>::Op, <P::Model as SimModel>::Ret>, ReplayError> {
    let mut mem = SimMemory::with_logging();
    let (model, scripts) = program.build(&mut mem);
    mem.reset_counters();
    let mut runner = ScriptRunner::new(model, scripts);
    let mut events = Vec::new();
    let mut completed = Vec::new();
    let mut index = 0usize;
    while !runner.all_done() && index < max_steps {
        let pid = pick(&runner, &mem);
        if !runner.enabled(pid) {
            return Err(ReplayError::DisabledProcess { index, pid });
        }
        let time = mem.steps() as u64;
        let report = runner.step(pid, &mut mem);
        if report.retry_limited {
            return Err(ReplayError::RetryCap { pid });
        }
        if report.first {
            events.push(Event::Inv { pid, op: report.op, time });
        }
        if let Some((ret, counts)) = report.done {
            events.push(Event::Res { pid, op: report.op, ret, time });
            completed.push((pid, report.op, ret, counts));
        }
        index += 1;
    }
    Ok(Execution {
        history: History::new(events),
        log: std::mem::take(&mut mem.log),
        completed,
    })
}

/// Runs every process to completion in pid order: the canonical sequential
/// execution of a program.
pub fn run_sequential<P: SimProgram>(
    program: &P,
    max_steps: usize,
) -> Result<Execution<<P::Model as SimModel>::Op, <P::Model as SimModel>::Ret>, ReplayError> {
    run_with_policy(
        program,
        |runner, _| {
            (0..runner.process_count())
                .find(|&p| runner.enabled(p))
                .expect("policy asked with no enabled process")
        },
        max_steps,
    )
}

/// A raw-cell program for exercising the substrate itself. `Pair` is a
/// two-instruction operation (write then write); the others are single
/// instructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellOp {
    Read(usize),
    Write(usize, Word),
    Swap(usize, Word),
    Cas(usize, Word, Word),
    Pair(usize, Word, usize, Word),
}

/// Model for [`CellOp`] scripts.
#[derive(Debug, Clone)]
pub struct CellModel {
    base: CellId,
    pending: Vec<Option<(CellOp, u8)>>,
}

impl CellModel {
    /// Allocates `cells` cells initialized to `init` for `nprocs` processes.
    pub fn install(mem: &mut SimMemory, nprocs: usize, cells: usize, init: Word) -> Self {
        let base = mem.alloc_many(cells, init);
        CellModel {
            base,
            pending: vec![None; nprocs],
        }
    }
}

impl SimModel for CellModel {
    type Op = CellOp;
    type Ret = Word;

    fn begin(&mut self, pid: Pid, op: CellOp) {
        self.pending[pid] = Some((op, 0));
    }

    fn step(&mut self, pid: Pid, mem: &mut SimMemory) -> StepOutcome<Word> {
        let (op, phase) = self.pending[pid].expect("no pending cell op");
        let ret = match op {
            CellOp::Read(c) => mem.read(pid, self.base + c),
            CellOp::Write(c, v) => {
                mem.write(pid, self.base + c, v);
                v
            }
            CellOp::Swap(c, v) => mem.swap(pid, self.base + c, v),
            CellOp::Cas(c, exp, new) => mem.cas(pid, self.base + c, exp, new) as Word,
            CellOp::Pair(c1, v1, c2, v2) => {
                if phase == 0 {
                    mem.write(pid, self.base + c1, v1);
                    self.pending[pid] = Some((op, 1));
                    return StepOutcome::Running;
                }
                mem.write(pid, self.base + c2, v2);
                v2
            }
        };
        self.pending[pid] = None;
        StepOutcome::Done(ret)
    }

    fn peek(&self, pid: Pid, _mem: &SimMemory) -> Peek {
        let (op, phase) = self.pending[pid].expect("no pending cell op");
        let (kind, cell, write_value, may_complete) = match op {
            CellOp::Read(c) => (Kind::Read, c, None, true),
            CellOp::Write(c, v) => (Kind::Write, c, Some(v), true),
            CellOp::Swap(c, v) => (Kind::Swap, c, Some(v), true),
            CellOp::Cas(c, _, new) => (Kind::Cas, c, Some(new), true),
            CellOp::Pair(c1, v1, c2, v2) => {
                if phase == 0 {
                    (Kind::Write, c1, Some(v1), false)
                } else {
                    (Kind::Write, c2, Some(v2), true)
                }
            }
        };
        Peek {
            kind,
            cell: self.base + cell,
            write_value,
            may_complete,
        }
    }
}
