//! The simulated memory: a flat pool of cells driven by one real thread.
//!
//! Every access is an explicit call that the scheduler interleaves; the
//! memory logs `(step, pid, kind, cell, arg, result)` tuples when logging is
//! enabled. Replaying the same schedule on the same program always produces
//! the identical log.

use super::{Access, CellId, Kind, Word};

/// Simulated shared memory. Cloning a `SimMemory` snapshots the cell values;
/// the access log is kept out of snapshots and managed by the explorer via
/// [`SimMemory::log_len`] / [`SimMemory::truncate_log`].
#[derive(Debug, Clone, Default)]
pub struct SimMemory {
    cells: Vec<Word>,
    steps: usize,
    logging: bool,
    #[doc(hidden)]
    pub log: Vec<Access>,
}

impl SimMemory {
    pub fn new() -> Self {
        SimMemory::default()
    }

    pub fn with_logging() -> Self {
        SimMemory {
            logging: true,
            ..SimMemory::default()
        }
    }

    pub fn set_logging(&mut self, on: bool) {
        self.logging = on;
    }

    /// Allocates a fresh cell initialized to `init`.
    pub fn alloc(&mut self, init: Word) -> CellId {
        self.cells.push(init);
        self.cells.len() - 1
    }

    /// Allocates `n` consecutive cells initialized to `init`; returns the id
    /// of the first.
    pub fn alloc_many(&mut self, n: usize, init: Word) -> CellId {
        let first = self.cells.len();
        self.cells.resize(first + n, init);
        first
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Number of executed steps so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Peeks at a cell value without logging a step. Used by schedulers and
    /// assertions, never by algorithm machines.
    pub fn peek_cell(&self, cell: CellId) -> Word {
        self.cells[cell]
    }

    pub fn log_len(&self) -> usize {
        self.log.len()
    }

    pub fn truncate_log(&mut self, len: usize) {
        self.log.truncate(len);
    }

    fn record(&mut self, pid: usize, kind: Kind, cell: CellId, arg: Word, result: Word) {
        if self.logging {
            self.log.push(Access {
                step: self.steps,
                pid,
                kind,
                cell,
                arg,
                result,
            });
        }
        self.steps += 1;
    }

    pub fn read(&mut self, pid: usize, cell: CellId) -> Word {
        let v = self.cells[cell];
        self.record(pid, Kind::Read, cell, 0, v);
        v
    }

    pub fn write(&mut self, pid: usize, cell: CellId, v: Word) {
        self.cells[cell] = v;
        self.record(pid, Kind::Write, cell, v, v);
    }

    pub fn swap(&mut self, pid: usize, cell: CellId, v: Word) -> Word {
        let old = self.cells[cell];
        self.cells[cell] = v;
        self.record(pid, Kind::Swap, cell, v, old);
        old
    }

    pub fn cas(&mut self, pid: usize, cell: CellId, expected: Word, new: Word) -> bool {
        let ok = self.cells[cell] == expected;
        if ok {
            self.cells[cell] = new;
        }
        self.record(pid, Kind::Cas, cell, new, ok as Word);
        ok
    }

    /// One-step read of an atomic max-register object.
    pub fn max_read(&mut self, pid: usize, cell: CellId) -> Word {
        let v = self.cells[cell];
        self.record(pid, Kind::MaxRead, cell, 0, v);
        v
    }

    /// One-step write of an atomic max-register object: the stored value only
    /// ever grows.
    pub fn max_write(&mut self, pid: usize, cell: CellId, v: Word) {
        if v > self.cells[cell] {
            self.cells[cell] = v;
        }
        self.record(pid, Kind::MaxWrite, cell, v, self.cells[cell]);
    }

    /// Resets step counter and log, keeping allocated cells and their values.
    pub fn reset_counters(&mut self) {
        self.steps = 0;
        self.log.clear();
    }

    /// Snapshots cell values and the step counter; the log is excluded and
    /// managed separately by callers that backtrack.
    pub fn snapshot(&self) -> MemSnapshot {
        MemSnapshot {
            cells: self.cells.clone(),
            steps: self.steps,
        }
    }

    /// Refreshes an existing snapshot in place, reusing its buffer.
    pub fn save_into(&self, snap: &mut MemSnapshot) {
        snap.cells.clone_from(&self.cells);
        snap.steps = self.steps;
    }

    pub fn restore(&mut self, snap: &MemSnapshot) {
        self.cells.clone_from(&snap.cells);
        self.steps = snap.steps;
    }
}

/// Cell values plus step counter, without the log.
#[derive(Debug, Clone)]
pub struct MemSnapshot {
    cells: Vec<Word>,
    steps: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_cell_reads_bottom() {
        let mut m = SimMemory::with_logging();
        let c = m.alloc(super::super::BOTTOM);
        assert_eq!(m.read(0, c), super::super::BOTTOM);
    }

    #[test]
    fn single_process_program_order() {
        let mut m = SimMemory::with_logging();
        let c = m.alloc(0);
        m.write(0, c, 7);
        assert_eq!(m.read(0, c), 7);
    }

    #[test]
    fn swap_returns_displaced_value() {
        let mut m = SimMemory::new();
        let c = m.alloc(1);
        assert_eq!(m.swap(0, c, 0), 1);
        assert_eq!(m.peek_cell(c), 0);
    }

    #[test]
    fn cas_success_and_failure() {
        let mut m = SimMemory::new();
        let c = m.alloc(3);
        assert!(m.cas(0, c, 3, 4));
        assert_eq!(m.peek_cell(c), 4);
        assert!(!m.cas(0, c, 3, 5));
        assert_eq!(m.peek_cell(c), 4);
    }

    #[test]
    fn max_write_is_monotone() {
        let mut m = SimMemory::new();
        let c = m.alloc(1);
        m.max_write(0, c, 5);
        m.max_write(0, c, 3);
        assert_eq!(m.max_read(0, c), 5);
    }

    #[test]
    fn log_records_every_access() {
        let mut m = SimMemory::with_logging();
        let c = m.alloc(0);
        m.write(0, c, 9);
        m.read(1, c);
        assert_eq!(m.log.len(), 2);
        assert_eq!(m.log[0].kind, Kind::Write);
        assert_eq!(m.log[1].result, 9);
        assert_eq!(m.log[1].pid, 1);
    }
}
