//! Sim-backend step machines for the registers.
//!
//! [`TreeCells`] carries the reusable read/write submachines of the tree
//! register so the deque models can embed them; the standalone models at the
//! bottom drive whole register objects for exploration and checking.

use crate::checker::history::{RegOp, RegRet};
use crate::shmem::model::{Peek, SimModel, StepOutcome};
use crate::shmem::sim::SimMemory;
use crate::shmem::{CellId, Kind, Pid, Word};

/// Switch cells of a tree max register living in sim memory.
#[derive(Debug, Clone, Copy)]
pub struct TreeCells {
    base: CellId,
    pub capacity: Word,
    leaves: u64,
    height: u32,
}

/// In-flight tree read: the current node of the root-to-leaf walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeReadSt {
    node: u64,
}

/// In-flight tree write, kept normalized: right turns (which touch no
/// memory) are consumed eagerly, so the next instruction is always directly
/// readable from the state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeWriteSt {
    leaf_pos: u64,
    node: u64,
    depth: u32,
    ascending: bool,
    to_set: Vec<u64>,
}

impl TreeCells {
    /// Allocates the switch cells for capacity `m` (at least 2).
    pub fn install(mem: &mut SimMemory, m: Word) -> Self {
        assert!(m >= 2, "tree register models need capacity >= 2");
        let (leaves, height) = super::tree_shape(m);
        let base = mem.alloc_many(leaves as usize, 0);
        TreeCells {
            base,
            capacity: m,
            leaves,
            height,
        }
    }

    fn cell(&self, node: u64) -> CellId {
        self.base + node as usize
    }

    pub fn start_read(&self) -> TreeReadSt {
        TreeReadSt { node: 1 }
    }

    /// `(cell to read, this step completes the read)`.
    pub fn read_peek(&self, st: &TreeReadSt) -> (CellId, bool) {
        (self.cell(st.node), 2 * st.node >= self.leaves)
    }

    pub fn read_step(&self, st: &mut TreeReadSt, pid: Pid, mem: &mut SimMemory) -> Option<Word> {
        let sw = mem.read(pid, self.cell(st.node));
        st.node = 2 * st.node + (sw == 1) as u64;
        if st.node >= self.leaves {
            Some(st.node - self.leaves + 1)
        } else {
            None
        }
    }

    pub fn start_write(&self, v: Word) -> TreeWriteSt {
        debug_assert!((1..=self.capacity).contains(&v));
        let mut st = TreeWriteSt {
            leaf_pos: v - 1,
            node: 1,
            depth: self.height,
            ascending: false,
            to_set: Vec::new(),
        };
        st.normalize();
        st
    }

    /// `(kind, cell, written value, may complete)` of the next instruction.
    pub fn write_peek(&self, st: &TreeWriteSt) -> (Kind, CellId, Option<Word>, bool) {
        if st.ascending {
            let node = *st.to_set.last().expect("ascending with nothing to set");
            (
                Kind::Write,
                self.cell(node),
                Some(1),
                st.to_set.len() == 1,
            )
        } else {
            (Kind::Read, self.cell(st.node), None, st.to_set.is_empty())
        }
    }

    /// Executes one instruction; returns true when the write is complete.
    pub fn write_step(&self, st: &mut TreeWriteSt, pid: Pid, mem: &mut SimMemory) -> bool {
        if st.ascending {
            let node = st.to_set.pop().expect("ascending with nothing to set");
            mem.write(pid, self.cell(node), 1);
            return st.to_set.is_empty();
        }
        let sw = mem.read(pid, self.cell(st.node));
        if sw == 1 {
            st.ascending = true;
        } else {
            st.node *= 2;
            st.depth -= 1;
            st.normalize();
            if st.depth == 0 {
                st.ascending = true;
            }
        }
        if st.ascending && st.to_set.is_empty() {
            return true;
        }
        false
    }
}

impl TreeWriteSt {
    /// Consumes right turns, which push the switch to set later but issue no
    /// instruction, until the walk faces a left turn or the leaf level.
    fn normalize(&mut self) {
        while self.depth > 0 && (self.leaf_pos >> (self.depth - 1)) & 1 == 1 {
            self.to_set.push(self.node);
            self.node = 2 * self.node + 1;
            self.depth -= 1;
        }
        if self.depth == 0 {
            self.ascending = true;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum RegMachine {
    Idle,
    TreeRead(TreeReadSt),
    TreeWrite(TreeWriteSt),
    PlainRead,
    PlainWritePending(Word),
    PlainWriteStore(Word),
    AtomicRead,
    AtomicWrite(Word),
}

/// Which register construction a standalone model drives.
#[derive(Debug, Clone)]
enum RegKind {
    /// Tree register over read/write bits.
    Tree(TreeCells),
    /// Range max register of one shared word plus local maxima.
    Range { shared: CellId },
    /// A max register as a single atomic base object.
    Atomic { cell: CellId },
}

/// Standalone register model; op scripts are [`RegOp`] sequences.
#[derive(Debug, Clone)]
pub struct RegModel {
    kind: RegKind,
    machines: Vec<RegMachine>,
    /// Persistent local maxima (range register only).
    locals: Vec<Word>,
}

impl RegModel {
    pub fn tree(mem: &mut SimMemory, nprocs: usize, m: Word) -> Self {
        RegModel {
            kind: RegKind::Tree(TreeCells::install(mem, m)),
            machines: vec![RegMachine::Idle; nprocs],
            locals: vec![1; nprocs],
        }
    }

    pub fn range(mem: &mut SimMemory, nprocs: usize) -> Self {
        let shared = mem.alloc(1);
        RegModel {
            kind: RegKind::Range { shared },
            machines: vec![RegMachine::Idle; nprocs],
            locals: vec![1; nprocs],
        }
    }

    pub fn atomic(mem: &mut SimMemory, nprocs: usize) -> Self {
        let cell = mem.alloc(1);
        RegModel {
            kind: RegKind::Atomic { cell },
            machines: vec![RegMachine::Idle; nprocs],
            locals: vec![1; nprocs],
        }
    }
}

impl SimModel for RegModel {
    type Op = RegOp;
    type Ret = RegRet;

    fn begin(&mut self, pid: Pid, op: RegOp) {
        self.machines[pid] = match (&self.kind, op) {
            (RegKind::Tree(cells), RegOp::Read) => RegMachine::TreeRead(cells.start_read()),
            (RegKind::Tree(cells), RegOp::Write(v)) => {
                RegMachine::TreeWrite(cells.start_write(v))
            }
            (RegKind::Range { .. }, RegOp::Read) => RegMachine::PlainRead,
            (RegKind::Range { .. }, RegOp::Write(x)) => RegMachine::PlainWritePending(x),
            (RegKind::Atomic { .. }, RegOp::Read) => RegMachine::AtomicRead,
            (RegKind::Atomic { .. }, RegOp::Write(x)) => RegMachine::AtomicWrite(x),
        };
    }

    fn step(&mut self, pid: Pid, mem: &mut SimMemory) -> StepOutcome<RegRet> {
        let machine = std::mem::replace(&mut self.machines[pid], RegMachine::Idle);
        match (machine, &self.kind) {
            (RegMachine::TreeRead(mut st), RegKind::Tree(cells)) => {
                match cells.read_step(&mut st, pid, mem) {
                    Some(v) => StepOutcome::Done(RegRet::Value(v)),
                    None => {
                        self.machines[pid] = RegMachine::TreeRead(st);
                        StepOutcome::Running
                    }
                }
            }
            (RegMachine::TreeWrite(mut st), RegKind::Tree(cells)) => {
                if cells.write_step(&mut st, pid, mem) {
                    StepOutcome::Done(RegRet::True)
                } else {
                    self.machines[pid] = RegMachine::TreeWrite(st);
                    StepOutcome::Running
                }
            }
            (RegMachine::PlainRead, RegKind::Range { shared }) => {
                let v = mem.read(pid, *shared);
                self.locals[pid] = self.locals[pid].max(v);
                StepOutcome::Done(RegRet::Value(self.locals[pid]))
            }
            (RegMachine::PlainWritePending(x), RegKind::Range { shared }) => {
                let v = mem.read(pid, *shared);
                self.locals[pid] = self.locals[pid].max(v);
                if x > self.locals[pid] {
                    self.machines[pid] = RegMachine::PlainWriteStore(x);
                    StepOutcome::Running
                } else {
                    StepOutcome::Done(RegRet::True)
                }
            }
            (RegMachine::PlainWriteStore(x), RegKind::Range { shared }) => {
                self.locals[pid] = x;
                mem.write(pid, *shared, x);
                StepOutcome::Done(RegRet::True)
            }
            (RegMachine::AtomicRead, RegKind::Atomic { cell }) => {
                StepOutcome::Done(RegRet::Value(mem.max_read(pid, *cell)))
            }
            (RegMachine::AtomicWrite(x), RegKind::Atomic { cell }) => {
                mem.max_write(pid, *cell, x);
                StepOutcome::Done(RegRet::True)
            }
            (m, _) => unreachable!("machine/kind mismatch: {m:?}"),
        }
    }

    fn peek(&self, pid: Pid, _mem: &SimMemory) -> Peek {
        match (&self.machines[pid], &self.kind) {
            (RegMachine::TreeRead(st), RegKind::Tree(cells)) => {
                let (cell, completes) = cells.read_peek(st);
                Peek {
                    kind: Kind::Read,
                    cell,
                    write_value: None,
                    may_complete: completes,
                }
            }
            (RegMachine::TreeWrite(st), RegKind::Tree(cells)) => {
                let (kind, cell, write_value, may_complete) = cells.write_peek(st);
                Peek {
                    kind,
                    cell,
                    write_value,
                    may_complete,
                }
            }
            (RegMachine::PlainRead, RegKind::Range { shared }) => Peek {
                kind: Kind::Read,
                cell: *shared,
                write_value: None,
                may_complete: true,
            },
            (RegMachine::PlainWritePending(_), RegKind::Range { shared }) => Peek {
                kind: Kind::Read,
                cell: *shared,
                write_value: None,
                may_complete: true,
            },
            (RegMachine::PlainWriteStore(x), RegKind::Range { shared }) => Peek {
                kind: Kind::Write,
                cell: *shared,
                write_value: Some(*x),
                may_complete: true,
            },
            (RegMachine::AtomicRead, RegKind::Atomic { cell }) => Peek {
                kind: Kind::MaxRead,
                cell: *cell,
                write_value: None,
                may_complete: true,
            },
            (RegMachine::AtomicWrite(x), RegKind::Atomic { cell }) => Peek {
                kind: Kind::MaxWrite,
                cell: *cell,
                write_value: Some(*x),
                may_complete: true,
            },
            (m, _) => unreachable!("peeked idle machine: {m:?}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shmem::model::{replay, run_sequential, SimProgram};

    fn tree_prog(m: Word, scripts: Vec<Vec<RegOp>>) -> impl SimProgram<Model = RegModel> {
        move |mem: &mut SimMemory| {
            let n = scripts.len();
            (RegModel::tree(mem, n, m), scripts.clone())
        }
    }

    #[test]
    fn tree_model_sequential_max_semantics() {
        let prog = tree_prog(8, vec![vec![RegOp::Write(5), RegOp::Write(3), RegOp::Read]]);
        let exec = run_sequential(&prog, 1000).unwrap();
        let results: Vec<RegRet> = exec.completed.iter().map(|c| c.2).collect();
        assert_eq!(results, vec![RegRet::True, RegRet::True, RegRet::Value(5)]);
    }

    #[test]
    fn tree_model_instruction_bound() {
        // Every operation executes at most 2*ceil(log2 m) instructions.
        for m in [2u64, 4, 8, 16, 64] {
            let h = super::super::tree_shape(m).1 as usize;
            let prog = tree_prog(
                m,
                vec![vec![
                    RegOp::Write(m),
                    RegOp::Read,
                    RegOp::Write(1),
                    RegOp::Read,
                ]],
            );
            let exec = run_sequential(&prog, 1000).unwrap();
            assert_eq!(exec.completed.len(), 4);
            for (_, op, _, counts) in &exec.completed {
                assert!(
                    counts.total() <= 2 * h,
                    "m={m} op={op:?} took {} steps (h={h})",
                    counts.total()
                );
            }
        }
    }

    #[test]
    fn tree_model_matches_native_register() {
        // Differential check: random sequential scripts give identical
        // results on the sim model and the native register.
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = *[2u64, 5, 8, 13, 32].choose(&mut rng).unwrap();
            let script: Vec<RegOp> = (0..20)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        RegOp::Write(rng.gen_range(1..=m))
                    } else {
                        RegOp::Read
                    }
                })
                .collect();
            let native = super::super::TreeMaxRegister::new(m);
            let native_results: Vec<RegRet> = script
                .iter()
                .map(|op| match op {
                    RegOp::Write(v) => {
                        native.max_write(*v).unwrap();
                        RegRet::True
                    }
                    RegOp::Read => RegRet::Value(native.max_read()),
                })
                .collect();
            let prog = tree_prog(m, vec![script.clone()]);
            let exec = run_sequential(&prog, 10_000).unwrap();
            let sim_results: Vec<RegRet> = exec.completed.iter().map(|c| c.2).collect();
            assert_eq!(sim_results, native_results, "m={m} script={script:?}");
        }
    }

    #[test]
    fn range_model_sequential_two_processes() {
        let prog = |mem: &mut SimMemory| {
            let model = RegModel::range(mem, 2);
            (
                model,
                vec![
                    vec![RegOp::Write(7), RegOp::Read],
                    vec![RegOp::Read, RegOp::Write(3), RegOp::Read],
                ],
            )
        };
        // p0: write 7 (read R, store), read. Then p1: read, write 3 (no
        // store), read.
        let exec = replay(&prog, &[0, 0, 0, 1, 1, 1]).unwrap();
        let results: Vec<(Pid, RegRet)> = exec.completed.iter().map(|c| (c.0, c.2)).collect();
        assert_eq!(
            results,
            vec![
                (0, RegRet::True),
                (0, RegRet::Value(7)),
                (1, RegRet::Value(7)),
                (1, RegRet::True),
                (1, RegRet::Value(7)),
            ]
        );
    }
}
