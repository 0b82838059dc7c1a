//! Step machines for the relaxed deques on the sim backend.
//!
//! One machine covers all five variants; the head register kind and the
//! claim discipline are constructor choices. Task cells are preallocated
//! flat (the buffer strategies are order-isomorphic to the flat array, so
//! the interleaving behavior is identical).

use super::Discipline;
use crate::checker::history::{WsOp, WsRet};
use crate::maxreg::model::{TreeCells, TreeReadSt, TreeWriteSt};
use crate::shmem::model::{Peek, SimModel, StepOutcome};
use crate::shmem::sim::SimMemory;
use crate::shmem::{CellId, Kind, Pid, Word, BOTTOM};

/// Head-register construction for the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    /// A max register as one atomic base object (one instruction per
    /// operation).
    AtomicMax,
    /// The read/write tree construction.
    Tree,
    /// The inlined range register: a plain cell merged with a persistent
    /// local maximum.
    Range,
}

#[derive(Debug, Clone)]
enum HeadCells {
    AtomicMax(CellId),
    Tree(TreeCells),
    Range(CellId),
}

#[derive(Debug, Clone)]
enum HeadRead {
    AtomicMax,
    Range,
    Tree(TreeReadSt),
}

#[derive(Debug, Clone)]
enum HeadAdv {
    AtomicMax(Word),
    Range(Word),
    Tree(TreeWriteSt),
}

#[derive(Debug, Clone)]
enum Machine {
    Idle,
    PutFirst { x: Word },
    PutSecond,
    TakeHead { st: HeadRead, retries: usize },
    TakeClaim { h: Word, retries: usize },
    TakeRead { h: Word },
    TakeAdv { x: Word, st: HeadAdv },
    StealHead { st: HeadRead, retries: usize },
    StealRead { h: Word, retries: usize },
    StealClaim { h: Word, x: Word, retries: usize },
    StealAdv { x: Word, st: HeadAdv },
}

#[derive(Debug, Clone)]
struct Proc {
    tail: Word,
    head_local: Word,
    machine: Machine,
}

/// Sim model of the relaxed work-stealing deques.
#[derive(Debug, Clone)]
pub struct DequeModel {
    head: HeadCells,
    tasks_base: CellId,
    task_slots: usize,
    claims_base: Option<CellId>,
    discipline: Discipline,
    retry_cap: usize,
    procs: Vec<Proc>,
}

impl DequeModel {
    /// Allocates cells for a deque holding at most `max_tasks` tasks, for
    /// `nprocs` processes (process 0 is the owner).
    pub fn install(
        mem: &mut SimMemory,
        nprocs: usize,
        head: HeadKind,
        discipline: Discipline,
        max_tasks: u64,
        retry_cap: usize,
    ) -> Self {
        let task_slots = (max_tasks + 3) as usize;
        let head = match head {
            HeadKind::AtomicMax => HeadCells::AtomicMax(mem.alloc(1)),
            HeadKind::Tree => HeadCells::Tree(TreeCells::install(mem, (max_tasks + 1).max(2))),
            HeadKind::Range => HeadCells::Range(mem.alloc(1)),
        };
        let tasks_base = mem.alloc_many(task_slots, BOTTOM);
        let claims_base = match discipline {
            Discipline::Plain => None,
            _ => Some(mem.alloc_many(task_slots, 1)),
        };
        DequeModel {
            head,
            tasks_base,
            task_slots,
            claims_base,
            discipline,
            retry_cap,
            procs: vec![
                Proc {
                    tail: 0,
                    head_local: 1,
                    machine: Machine::Idle,
                };
                nprocs
            ],
        }
    }

    fn task_cell(&self, idx: Word) -> CellId {
        debug_assert!(idx >= 1 && (idx as usize) <= self.task_slots);
        self.tasks_base + (idx - 1) as usize
    }

    fn claim_cell(&self, idx: Word) -> CellId {
        self.claims_base.expect("claims in bounded variants only") + (idx - 1) as usize
    }

    fn start_head_read(&self) -> HeadRead {
        match &self.head {
            HeadCells::AtomicMax(_) => HeadRead::AtomicMax,
            HeadCells::Tree(cells) => HeadRead::Tree(cells.start_read()),
            HeadCells::Range(_) => HeadRead::Range,
        }
    }

    fn start_head_adv(&self, new: Word) -> HeadAdv {
        match &self.head {
            HeadCells::AtomicMax(_) => HeadAdv::AtomicMax(new),
            HeadCells::Tree(cells) => HeadAdv::Tree(cells.start_write(new)),
            HeadCells::Range(_) => HeadAdv::Range(new),
        }
    }

    /// Executes one head-read instruction; `Some(h)` once the read finishes
    /// (with the range register's local merge applied).
    fn head_read_step(
        &self,
        st: &mut HeadRead,
        pid: Pid,
        local: &mut Word,
        mem: &mut SimMemory,
    ) -> Option<Word> {
        match (st, &self.head) {
            (HeadRead::AtomicMax, HeadCells::AtomicMax(cell)) => Some(mem.max_read(pid, *cell)),
            (HeadRead::Range, HeadCells::Range(cell)) => {
                let v = mem.read(pid, *cell);
                *local = (*local).max(v);
                Some(*local)
            }
            (HeadRead::Tree(ts), HeadCells::Tree(cells)) => cells.read_step(ts, pid, mem),
            _ => unreachable!("head state/kind mismatch"),
        }
    }

    fn head_read_peek(&self, st: &HeadRead) -> (Kind, CellId, bool) {
        match (st, &self.head) {
            (HeadRead::AtomicMax, HeadCells::AtomicMax(cell)) => (Kind::MaxRead, *cell, true),
            (HeadRead::Range, HeadCells::Range(cell)) => (Kind::Read, *cell, true),
            (HeadRead::Tree(ts), HeadCells::Tree(cells)) => {
                let (cell, completes) = cells.read_peek(ts);
                (Kind::Read, cell, completes)
            }
            _ => unreachable!("head state/kind mismatch"),
        }
    }

    fn head_adv_step(
        &self,
        st: &mut HeadAdv,
        pid: Pid,
        local: &mut Word,
        mem: &mut SimMemory,
    ) -> bool {
        match (st, &self.head) {
            (HeadAdv::AtomicMax(v), HeadCells::AtomicMax(cell)) => {
                mem.max_write(pid, *cell, *v);
                true
            }
            (HeadAdv::Range(v), HeadCells::Range(cell)) => {
                mem.write(pid, *cell, *v);
                *local = (*local).max(*v);
                true
            }
            (HeadAdv::Tree(ts), HeadCells::Tree(cells)) => cells.write_step(ts, pid, mem),
            _ => unreachable!("head state/kind mismatch"),
        }
    }

    fn head_adv_peek(&self, st: &HeadAdv) -> (Kind, CellId, Option<Word>, bool) {
        match (st, &self.head) {
            (HeadAdv::AtomicMax(v), HeadCells::AtomicMax(cell)) => {
                (Kind::MaxWrite, *cell, Some(*v), true)
            }
            (HeadAdv::Range(v), HeadCells::Range(cell)) => (Kind::Write, *cell, Some(*v), true),
            (HeadAdv::Tree(ts), HeadCells::Tree(cells)) => cells.write_peek(ts),
            _ => unreachable!("head state/kind mismatch"),
        }
    }

    fn note_spent(&mut self, pid: Pid, new: Word) {
        if matches!(self.head, HeadCells::Range(_)) {
            let l = &mut self.procs[pid].head_local;
            *l = (*l).max(new);
        }
    }
}

impl SimModel for DequeModel {
    type Op = WsOp;
    type Ret = WsRet;

    fn begin(&mut self, pid: Pid, op: WsOp) {
        let machine = match op {
            WsOp::Put(x) => {
                assert_eq!(pid, 0, "only the owner puts");
                assert!(x != BOTTOM);
                self.procs[pid].tail += 1;
                assert!(
                    (self.procs[pid].tail + 2) as usize <= self.task_slots,
                    "model sized for fewer puts"
                );
                Machine::PutFirst { x }
            }
            WsOp::Take => {
                assert_eq!(pid, 0, "only the owner takes");
                Machine::TakeHead {
                    st: self.start_head_read(),
                    retries: 0,
                }
            }
            WsOp::Steal => {
                assert_ne!(pid, 0, "the owner does not steal");
                Machine::StealHead {
                    st: self.start_head_read(),
                    retries: 0,
                }
            }
        };
        self.procs[pid].machine = machine;
    }

    fn step(&mut self, pid: Pid, mem: &mut SimMemory) -> StepOutcome<WsRet> {
        let machine = std::mem::replace(&mut self.procs[pid].machine, Machine::Idle);
        match machine {
            Machine::Idle => unreachable!("stepped an idle process"),
            Machine::PutFirst { x } => {
                mem.write(pid, self.task_cell(self.procs[pid].tail), x);
                self.procs[pid].machine = Machine::PutSecond;
                StepOutcome::Running
            }
            Machine::PutSecond => {
                mem.write(pid, self.task_cell(self.procs[pid].tail + 2), BOTTOM);
                StepOutcome::Done(WsRet::True)
            }
            Machine::TakeHead { mut st, retries } => {
                let mut local = self.procs[pid].head_local;
                let got = self.head_read_step(&mut st, pid, &mut local, mem);
                self.procs[pid].head_local = local;
                match got {
                    None => {
                        self.procs[pid].machine = Machine::TakeHead { st, retries };
                        StepOutcome::Running
                    }
                    Some(h) => {

                        if h > self.procs[pid].tail {
                            return StepOutcome::Done(WsRet::Empty);
                        }
                        self.procs[pid].machine = if self.discipline == Discipline::Exact {
                            Machine::TakeClaim { h, retries }
                        } else {
                            Machine::TakeRead { h }
                        };
                        StepOutcome::Running
                    }
                }
            }
            Machine::TakeClaim { h, retries } => {
                let won = mem.swap(pid, self.claim_cell(h), 0) == 1;
                if won {
                    self.procs[pid].machine = Machine::TakeRead { h };
                    StepOutcome::Running
                } else {
                    self.note_spent(pid, h + 1);
                    if retries + 1 > self.retry_cap {
                        return StepOutcome::RetryLimit;
                    }
                    self.procs[pid].machine = Machine::TakeHead {
                        st: self.start_head_read(),
                        retries: retries + 1,
                    };
                    StepOutcome::Running
                }
            }
            Machine::TakeRead { h } => {
                let x = mem.read(pid, self.task_cell(h));
                debug_assert_ne!(x, BOTTOM, "owner read within its own tail");
                self.procs[pid].machine = Machine::TakeAdv {
                    x,
                    st: self.start_head_adv(h + 1),
                };
                StepOutcome::Running
            }
            Machine::TakeAdv { x, mut st } => {
                let mut local = self.procs[pid].head_local;
                let done = self.head_adv_step(&mut st, pid, &mut local, mem);
                self.procs[pid].head_local = local;
                if done {
                    StepOutcome::Done(WsRet::Task(x))
                } else {
                    self.procs[pid].machine = Machine::TakeAdv { x, st };
                    StepOutcome::Running
                }
            }
            Machine::StealHead { mut st, retries } => {
                let mut local = self.procs[pid].head_local;
                let got = self.head_read_step(&mut st, pid, &mut local, mem);
                self.procs[pid].head_local = local;
                match got {
                    None => {
                        self.procs[pid].machine = Machine::StealHead { st, retries };
                        StepOutcome::Running
                    }
                    Some(h) => {

                        self.procs[pid].machine = Machine::StealRead { h, retries };
                        StepOutcome::Running
                    }
                }
            }
            Machine::StealRead { h, retries } => {
                let x = mem.read(pid, self.task_cell(h));
                if x == BOTTOM {
                    return StepOutcome::Done(WsRet::Empty);
                }
                self.procs[pid].machine = match self.discipline {
                    Discipline::Plain => Machine::StealAdv {
                        x,
                        st: self.start_head_adv(h + 1),
                    },
                    _ => Machine::StealClaim { h, x, retries },
                };
                StepOutcome::Running
            }
            Machine::StealClaim { h, x, retries } => {
                let won = mem.swap(pid, self.claim_cell(h), 0) == 1;
                if won {
                    self.procs[pid].machine = Machine::StealAdv {
                        x,
                        st: self.start_head_adv(h + 1),
                    };
                    StepOutcome::Running
                } else {
                    self.note_spent(pid, h + 1);
                    if retries + 1 > self.retry_cap {
                        return StepOutcome::RetryLimit;
                    }
                    self.procs[pid].machine = Machine::StealHead {
                        st: self.start_head_read(),
                        retries: retries + 1,
                    };
                    StepOutcome::Running
                }
            }
            Machine::StealAdv { x, mut st } => {
                let mut local = self.procs[pid].head_local;
                let done = self.head_adv_step(&mut st, pid, &mut local, mem);
                self.procs[pid].head_local = local;
                if done {
                    StepOutcome::Done(WsRet::Task(x))
                } else {
                    self.procs[pid].machine = Machine::StealAdv { x, st };
                    StepOutcome::Running
                }
            }
        }
    }

    fn copy_from(&mut self, other: &Self) {
        self.head = other.head.clone();
        self.tasks_base = other.tasks_base;
        self.task_slots = other.task_slots;
        self.claims_base = other.claims_base;
        self.discipline = other.discipline;
        self.retry_cap = other.retry_cap;
        self.procs.clone_from(&other.procs);
    }

    fn peek(&self, pid: Pid, _mem: &SimMemory) -> Peek {
        let proc = &self.procs[pid];
        match &proc.machine {
            Machine::Idle => unreachable!("peeked an idle process"),
            Machine::PutFirst { x } => Peek {
                kind: Kind::Write,
                cell: self.task_cell(proc.tail),
                write_value: Some(*x),
                may_complete: false,
            },
            Machine::PutSecond => Peek {
                kind: Kind::Write,
                cell: self.task_cell(proc.tail + 2),
                write_value: Some(BOTTOM),
                may_complete: true,
            },
            Machine::TakeHead { st, .. } => {
                let (kind, cell, completes) = self.head_read_peek(st);
                Peek {
                    kind,
                    cell,
                    write_value: None,
                    // The final head read completes the take when the queue
                    // looks empty.
                    may_complete: completes,
                }
            }
            Machine::TakeClaim { h, .. } | Machine::StealClaim { h, .. } => Peek {
                kind: Kind::Swap,
                cell: self.claim_cell(*h),
                write_value: Some(0),
                may_complete: false,
            },
            Machine::TakeRead { h } => Peek {
                kind: Kind::Read,
                cell: self.task_cell(*h),
                write_value: None,
                may_complete: false,
            },
            Machine::StealHead { st, .. } => {
                let (kind, cell, _) = self.head_read_peek(st);
                Peek {
                    kind,
                    cell,
                    write_value: None,
                    may_complete: false,
                }
            }
            Machine::StealRead { h, .. } => Peek {
                kind: Kind::Read,
                cell: self.task_cell(*h),
                write_value: None,
                may_complete: true,
            },
            Machine::TakeAdv { st, .. } | Machine::StealAdv { st, .. } => {
                let (kind, cell, write_value, may_complete) = self.head_adv_peek(st);
                Peek {
                    kind,
                    cell,
                    write_value,
                    may_complete,
                }
            }
        }
    }
}
