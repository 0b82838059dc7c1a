//! Step machines for the baseline algorithms, plus an atomic reference
//! queue whose operations take effect in a single instruction (used to
//! generate linearizable-by-construction histories for checker tests).

use crate::checker::history::{WsOp, WsRet};
use crate::shmem::model::{Peek, SimModel, StepOutcome};
use crate::shmem::sim::SimMemory;
use crate::shmem::{CellId, Kind, Pid, Word, BOTTOM};

#[derive(Debug, Clone)]
enum IfMachine {
    Idle,
    PutReadTail { x: Word },
    PutWriteTask { x: Word, t: Word },
    PutWriteTail { t: Word },
    ExtReadHead { stealing: bool, retries: usize },
    ExtReadTail { stealing: bool, h: Word, retries: usize },
    ExtReadTask { stealing: bool, h: Word, retries: usize },
    TakeWriteHead { h: Word, x: Word },
    StealCasHead { h: Word, x: Word, retries: usize },
}

/// Idempotent FIFO work-stealing on the sim backend: shared `tasks` array,
/// shared `head` and `tail` words. Take's head advance is a plain write.
#[derive(Debug, Clone)]
pub struct IdemFifoModel {
    head: CellId,
    tail: CellId,
    tasks_base: CellId,
    slots: usize,
    retry_cap: usize,
    machines: Vec<IfMachine>,
}

impl IdemFifoModel {
    pub fn install(mem: &mut SimMemory, nprocs: usize, max_tasks: u64, retry_cap: usize) -> Self {
        let head = mem.alloc(0);
        let tail = mem.alloc(0);
        let tasks_base = mem.alloc_many(max_tasks as usize, BOTTOM);
        IdemFifoModel {
            head,
            tail,
            tasks_base,
            slots: max_tasks as usize,
            retry_cap,
            machines: vec![IfMachine::Idle; nprocs],
        }
    }

    fn task_cell(&self, i: Word) -> CellId {
        debug_assert!((i as usize) < self.slots, "model sized for fewer puts");
        self.tasks_base + i as usize
    }
}

impl SimModel for IdemFifoModel {
    type Op = WsOp;
    type Ret = WsRet;

    fn begin(&mut self, pid: Pid, op: WsOp) {
        self.machines[pid] = match op {
            WsOp::Put(x) => {
                assert_eq!(pid, 0, "only the owner puts");
                IfMachine::PutReadTail { x }
            }
            WsOp::Take => {
                assert_eq!(pid, 0, "only the owner takes");
                IfMachine::ExtReadHead {
                    stealing: false,
                    retries: 0,
                }
            }
            WsOp::Steal => {
                assert_ne!(pid, 0);
                IfMachine::ExtReadHead {
                    stealing: true,
                    retries: 0,
                }
            }
        };
    }

    fn step(&mut self, pid: Pid, mem: &mut SimMemory) -> StepOutcome<WsRet> {
        let m = std::mem::replace(&mut self.machines[pid], IfMachine::Idle);
        match m {
            IfMachine::Idle => unreachable!("stepped an idle process"),
            IfMachine::PutReadTail { x } => {
                let t = mem.read(pid, self.tail);
                self.machines[pid] = IfMachine::PutWriteTask { x, t };
                StepOutcome::Running
            }
            IfMachine::PutWriteTask { x, t } => {
                mem.write(pid, self.task_cell(t), x);
                self.machines[pid] = IfMachine::PutWriteTail { t };
                StepOutcome::Running
            }
            IfMachine::PutWriteTail { t } => {
                mem.write(pid, self.tail, t + 1);
                StepOutcome::Done(WsRet::True)
            }
            IfMachine::ExtReadHead { stealing, retries } => {
                let h = mem.read(pid, self.head);
                self.machines[pid] = IfMachine::ExtReadTail {
                    stealing,
                    h,
                    retries,
                };
                StepOutcome::Running
            }
            IfMachine::ExtReadTail {
                stealing,
                h,
                retries,
            } => {
                let t = mem.read(pid, self.tail);
                if h == t {
                    return StepOutcome::Done(WsRet::Empty);
                }
                self.machines[pid] = IfMachine::ExtReadTask {
                    stealing,
                    h,
                    retries,
                };
                StepOutcome::Running
            }
            IfMachine::ExtReadTask {
                stealing,
                h,
                retries,
            } => {
                let x = mem.read(pid, self.task_cell(h));
                self.machines[pid] = if stealing {
                    IfMachine::StealCasHead { h, x, retries }
                } else {
                    IfMachine::TakeWriteHead { h, x }
                };
                StepOutcome::Running
            }
            IfMachine::TakeWriteHead { h, x } => {
                mem.write(pid, self.head, h + 1);
                StepOutcome::Done(WsRet::Task(x))
            }
            IfMachine::StealCasHead { h, x, retries } => {
                if mem.cas(pid, self.head, h, h + 1) {
                    StepOutcome::Done(WsRet::Task(x))
                } else {
                    if retries + 1 > self.retry_cap {
                        return StepOutcome::RetryLimit;
                    }
                    self.machines[pid] = IfMachine::ExtReadHead {
                        stealing: true,
                        retries: retries + 1,
                    };
                    StepOutcome::Running
                }
            }
        }
    }

    fn peek(&self, pid: Pid, _mem: &SimMemory) -> Peek {
        match &self.machines[pid] {
            IfMachine::Idle => unreachable!("peeked an idle process"),
            IfMachine::PutReadTail { .. } => Peek {
                kind: Kind::Read,
                cell: self.tail,
                write_value: None,
                may_complete: false,
            },
            IfMachine::PutWriteTask { x, t } => Peek {
                kind: Kind::Write,
                cell: self.task_cell(*t),
                write_value: Some(*x),
                may_complete: false,
            },
            IfMachine::PutWriteTail { t } => Peek {
                kind: Kind::Write,
                cell: self.tail,
                write_value: Some(*t + 1),
                may_complete: true,
            },
            IfMachine::ExtReadHead { .. } => Peek {
                kind: Kind::Read,
                cell: self.head,
                write_value: None,
                may_complete: false,
            },
            IfMachine::ExtReadTail { .. } => Peek {
                kind: Kind::Read,
                cell: self.tail,
                write_value: None,
                may_complete: true,
            },
            IfMachine::ExtReadTask { h, .. } => Peek {
                kind: Kind::Read,
                cell: self.task_cell(*h),
                write_value: None,
                may_complete: false,
            },
            IfMachine::TakeWriteHead { h, .. } => Peek {
                kind: Kind::Write,
                cell: self.head,
                write_value: Some(*h + 1),
                may_complete: true,
            },
            IfMachine::StealCasHead { h, .. } => Peek {
                kind: Kind::Cas,
                cell: self.head,
                write_value: Some(*h + 1),
                may_complete: true,
            },
        }
    }
}

#[derive(Debug, Clone)]
enum ClMachine {
    Idle,
    PushReadBottom { x: Word },
    PushReadTop { x: Word, b: Word },
    PushWriteCell { x: Word, b: Word },
    PushWriteBottom { b: Word },
    PopReadBottom,
    PopWriteBottom { b: Word },
    PopReadTop { b: Word },
    PopRestoreBottom { b: Word },
    PopReadCell { b: Word, t: Word },
    PopCasTop { b: Word, x: Word },
    PopFinish { b: Word, won: bool, x: Word },
    StealReadTop { retries: usize },
    StealReadBottom { t: Word, retries: usize },
    StealReadCell { t: Word, retries: usize },
    StealCasTop { t: Word, x: Word, retries: usize },
}

/// Chase-Lev deque on the sim backend (fixed-capacity ring; small programs
/// never grow).
#[derive(Debug, Clone)]
pub struct ChaseLevModel {
    top: CellId,
    bottom: CellId,
    ring_base: CellId,
    cap: usize,
    retry_cap: usize,
    machines: Vec<ClMachine>,
}

impl ChaseLevModel {
    pub fn install(mem: &mut SimMemory, nprocs: usize, cap: u64, retry_cap: usize) -> Self {
        let top = mem.alloc(0);
        let bottom = mem.alloc(0);
        let ring_base = mem.alloc_many(cap as usize, BOTTOM);
        ChaseLevModel {
            top,
            bottom,
            ring_base,
            cap: cap as usize,
            retry_cap,
            machines: vec![ClMachine::Idle; nprocs],
        }
    }

    fn cell(&self, i: Word) -> CellId {
        self.ring_base + (i as usize % self.cap)
    }
}

impl SimModel for ChaseLevModel {
    type Op = WsOp;
    type Ret = WsRet;

    fn begin(&mut self, pid: Pid, op: WsOp) {
        self.machines[pid] = match op {
            WsOp::Put(x) => {
                assert_eq!(pid, 0);
                ClMachine::PushReadBottom { x }
            }
            WsOp::Take => {
                assert_eq!(pid, 0);
                ClMachine::PopReadBottom
            }
            WsOp::Steal => {
                assert_ne!(pid, 0);
                ClMachine::StealReadTop { retries: 0 }
            }
        };
    }

    fn step(&mut self, pid: Pid, mem: &mut SimMemory) -> StepOutcome<WsRet> {
        let m = std::mem::replace(&mut self.machines[pid], ClMachine::Idle);
        match m {
            ClMachine::Idle => unreachable!("stepped an idle process"),
            ClMachine::PushReadBottom { x } => {
                let b = mem.read(pid, self.bottom);
                self.machines[pid] = ClMachine::PushReadTop { x, b };
                StepOutcome::Running
            }
            ClMachine::PushReadTop { x, b } => {
                let t = mem.read(pid, self.top);
                assert!((b - t) < self.cap as u64, "model ring sized too small");
                self.machines[pid] = ClMachine::PushWriteCell { x, b };
                StepOutcome::Running
            }
            ClMachine::PushWriteCell { x, b } => {
                mem.write(pid, self.cell(b), x);
                self.machines[pid] = ClMachine::PushWriteBottom { b };
                StepOutcome::Running
            }
            ClMachine::PushWriteBottom { b } => {
                mem.write(pid, self.bottom, b + 1);
                StepOutcome::Done(WsRet::True)
            }
            ClMachine::PopReadBottom => {
                let b = mem.read(pid, self.bottom);
                self.machines[pid] = ClMachine::PopWriteBottom { b: b.wrapping_sub(1) };
                StepOutcome::Running
            }
            ClMachine::PopWriteBottom { b } => {
                mem.write(pid, self.bottom, b);
                self.machines[pid] = ClMachine::PopReadTop { b };
                StepOutcome::Running
            }
            ClMachine::PopReadTop { b } => {
                let t = mem.read(pid, self.top);
                if t > b || b == Word::MAX {
                    self.machines[pid] = ClMachine::PopRestoreBottom { b };
                } else if t == b {
                    self.machines[pid] = ClMachine::PopReadCell { b, t };
                } else {
                    self.machines[pid] = ClMachine::PopReadCell { b, t };
                }
                StepOutcome::Running
            }
            ClMachine::PopRestoreBottom { b } => {
                mem.write(pid, self.bottom, b.wrapping_add(1));
                StepOutcome::Done(WsRet::Empty)
            }
            ClMachine::PopReadCell { b, t } => {
                let x = mem.read(pid, self.cell(b));
                if t == b {
                    self.machines[pid] = ClMachine::PopCasTop { b, x };
                    StepOutcome::Running
                } else {
                    StepOutcome::Done(WsRet::Task(x))
                }
            }
            ClMachine::PopCasTop { b, x } => {
                let won = mem.cas(pid, self.top, b, b + 1);
                self.machines[pid] = ClMachine::PopFinish { b, won, x };
                StepOutcome::Running
            }
            ClMachine::PopFinish { b, won, x } => {
                mem.write(pid, self.bottom, b + 1);
                StepOutcome::Done(if won { WsRet::Task(x) } else { WsRet::Empty })
            }
            ClMachine::StealReadTop { retries } => {
                let t = mem.read(pid, self.top);
                self.machines[pid] = ClMachine::StealReadBottom { t, retries };
                StepOutcome::Running
            }
            ClMachine::StealReadBottom { t, retries } => {
                let b = mem.read(pid, self.bottom);
                if t >= b || b == Word::MAX {
                    return StepOutcome::Done(WsRet::Empty);
                }
                self.machines[pid] = ClMachine::StealReadCell { t, retries };
                StepOutcome::Running
            }
            ClMachine::StealReadCell { t, retries } => {
                let x = mem.read(pid, self.cell(t));
                self.machines[pid] = ClMachine::StealCasTop { t, x, retries };
                StepOutcome::Running
            }
            ClMachine::StealCasTop { t, x, retries } => {
                if mem.cas(pid, self.top, t, t + 1) {
                    StepOutcome::Done(WsRet::Task(x))
                } else {
                    if retries + 1 > self.retry_cap {
                        return StepOutcome::RetryLimit;
                    }
                    self.machines[pid] = ClMachine::StealReadTop {
                        retries: retries + 1,
                    };
                    StepOutcome::Running
                }
            }
        }
    }

    fn peek(&self, pid: Pid, _mem: &SimMemory) -> Peek {
        let (kind, cell, write_value, may_complete) = match &self.machines[pid] {
            ClMachine::Idle => unreachable!("peeked an idle process"),
            ClMachine::PushReadBottom { .. } => (Kind::Read, self.bottom, None, false),
            ClMachine::PushReadTop { .. } => (Kind::Read, self.top, None, false),
            ClMachine::PushWriteCell { x, b } => {
                (Kind::Write, self.cell(*b), Some(*x), false)
            }
            ClMachine::PushWriteBottom { b } => (Kind::Write, self.bottom, Some(*b + 1), true),
            ClMachine::PopReadBottom => (Kind::Read, self.bottom, None, false),
            ClMachine::PopWriteBottom { b } => (Kind::Write, self.bottom, Some(*b), false),
            ClMachine::PopReadTop { .. } => (Kind::Read, self.top, None, false),
            ClMachine::PopRestoreBottom { b } => {
                (Kind::Write, self.bottom, Some(b.wrapping_add(1)), true)
            }
            ClMachine::PopReadCell { b, .. } => (Kind::Read, self.cell(*b), None, true),
            ClMachine::PopCasTop { b, .. } => (Kind::Cas, self.top, Some(*b + 1), false),
            ClMachine::PopFinish { b, .. } => (Kind::Write, self.bottom, Some(*b + 1), true),
            ClMachine::StealReadTop { .. } => (Kind::Read, self.top, None, false),
            ClMachine::StealReadBottom { .. } => (Kind::Read, self.bottom, None, true),
            ClMachine::StealReadCell { t, .. } => (Kind::Read, self.cell(*t), None, false),
            ClMachine::StealCasTop { t, .. } => (Kind::Cas, self.top, Some(*t + 1), true),
        };
        Peek {
            kind,
            cell,
            write_value,
            may_complete,
        }
    }
}

/// Reference exact FIFO queue whose operations are single atomic
/// instructions; every history it produces is linearizable by construction.
#[derive(Debug, Clone)]
pub struct AtomicFifoModel {
    token: CellId,
    queue: std::collections::VecDeque<Word>,
    pending: Vec<Option<WsOp>>,
}

impl AtomicFifoModel {
    pub fn install(mem: &mut SimMemory, nprocs: usize) -> Self {
        AtomicFifoModel {
            token: mem.alloc(0),
            queue: std::collections::VecDeque::new(),
            pending: vec![None; nprocs],
        }
    }
}

impl SimModel for AtomicFifoModel {
    type Op = WsOp;
    type Ret = WsRet;

    fn begin(&mut self, pid: Pid, op: WsOp) {
        self.pending[pid] = Some(op);
    }

    fn step(&mut self, pid: Pid, mem: &mut SimMemory) -> StepOutcome<WsRet> {
        // One swap on a token cell serializes all operations; the queue
        // itself lives in the model.
        mem.swap(pid, self.token, pid as Word);
        let op = self.pending[pid].take().expect("no pending op");
        StepOutcome::Done(match op {
            WsOp::Put(x) => {
                self.queue.push_back(x);
                WsRet::True
            }
            WsOp::Take | WsOp::Steal => match self.queue.pop_front() {
                Some(x) => WsRet::Task(x),
                None => WsRet::Empty,
            },
        })
    }

    fn peek(&self, pid: Pid, _mem: &SimMemory) -> Peek {
        Peek {
            kind: Kind::Swap,
            cell: self.token,
            write_value: Some(pid as Word),
            may_complete: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shmem::model::{run_sequential, SimProgram};

    fn if_prog(scripts: Vec<Vec<WsOp>>) -> impl SimProgram<Model = IdemFifoModel> {
        move |mem: &mut SimMemory| {
            (
                IdemFifoModel::install(mem, scripts.len(), 32, 16),
                scripts.clone(),
            )
        }
    }

    fn cl_prog(scripts: Vec<Vec<WsOp>>) -> impl SimProgram<Model = ChaseLevModel> {
        move |mem: &mut SimMemory| {
            (
                ChaseLevModel::install(mem, scripts.len(), 32, 16),
                scripts.clone(),
            )
        }
    }

    #[test]
    fn idempotent_fifo_sequential_exact() {
        let prog = if_prog(vec![
            vec![WsOp::Put(1), WsOp::Put(2), WsOp::Take, WsOp::Take, WsOp::Take],
            vec![WsOp::Steal],
        ]);
        let exec = run_sequential(&prog, 1000).unwrap();
        let owner: Vec<WsRet> = exec
            .completed
            .iter()
            .filter(|c| c.0 == 0 && !matches!(c.1, WsOp::Put(_)))
            .map(|c| c.2)
            .collect();
        assert_eq!(owner, vec![WsRet::Task(1), WsRet::Task(2), WsRet::Empty]);
    }

    #[test]
    fn chase_lev_sequential_lifo_pop_fifo_steal() {
        let prog = cl_prog(vec![
            vec![WsOp::Put(1), WsOp::Put(2), WsOp::Take],
            vec![WsOp::Steal],
        ]);
        let exec = run_sequential(&prog, 1000).unwrap();
        let pop = exec
            .completed
            .iter()
            .find(|c| matches!(c.1, WsOp::Take))
            .unwrap();
        let steal = exec
            .completed
            .iter()
            .find(|c| matches!(c.1, WsOp::Steal))
            .unwrap();
        assert_eq!(pop.2, WsRet::Task(2));
        assert_eq!(steal.2, WsRet::Task(1));
    }

    #[test]
    fn atomic_fifo_is_sequentially_exact() {
        let prog = |mem: &mut SimMemory| {
            (
                AtomicFifoModel::install(mem, 2),
                vec![
                    vec![WsOp::Put(5), WsOp::Take, WsOp::Take],
                    vec![WsOp::Steal],
                ],
            )
        };
        let exec = run_sequential(&prog, 100).unwrap();
        let rets: Vec<WsRet> = exec.completed.iter().map(|c| c.2).collect();
        assert_eq!(
            rets,
            vec![WsRet::True, WsRet::Task(5), WsRet::Empty, WsRet::Empty]
        );
    }
}
