//! Comparison algorithms: the Chase-Lev work-stealing deque and idempotent
//! FIFO work-stealing.
//!
//! Chase-Lev is the exact baseline every benchmark normalizes to. The
//! idempotent FIFO queue extracts each task at least once with no bound on
//! how often; its take publishes the head advance with a plain write, which
//! is what lets sequential steals re-extract tasks.

pub mod model;

use crate::shmem::{Word, BOTTOM};
use crate::wsqueue::{QueueError, QueueOwner, QueueThief};
use std::sync::atomic::{fence, AtomicI64, AtomicPtr, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

struct Ring {
    mask: i64,
    cells: Box<[AtomicU64]>,
}

impl Ring {
    fn alloc(cap: i64) -> *mut Ring {
        debug_assert!(cap.count_ones() == 1);
        Box::into_raw(Box::new(Ring {
            mask: cap - 1,
            cells: (0..cap).map(|_| AtomicU64::new(BOTTOM)).collect(),
        }))
    }

    fn get(&self, i: i64) -> Word {
        self.cells[(i & self.mask) as usize].load(Ordering::Relaxed)
    }

    fn set(&self, i: i64, v: Word) {
        self.cells[(i & self.mask) as usize].store(v, Ordering::Relaxed);
    }
}

/// Growable circular-array work-stealing deque: the owner pushes and pops at
/// the bottom, thieves compare-and-swap the top. Exact: every task extracted
/// once.
pub struct ChaseLevDeque {
    top: AtomicI64,
    bottom: AtomicI64,
    ring: AtomicPtr<Ring>,
    graveyard: Mutex<Vec<*mut Ring>>,
}

unsafe impl Send for ChaseLevDeque {}
unsafe impl Sync for ChaseLevDeque {}

impl ChaseLevDeque {
    pub fn new(initial_cap: u64) -> Self {
        ChaseLevDeque {
            top: AtomicI64::new(0),
            bottom: AtomicI64::new(0),
            ring: AtomicPtr::new(Ring::alloc((initial_cap.max(2)).next_power_of_two() as i64)),
            graveyard: Mutex::new(Vec::new()),
        }
    }

    /// Owner-only: append at the bottom, growing when full.
    pub fn push(&self, x: Word) {
        let b = self.bottom.load(Ordering::Relaxed);
        let t = self.top.load(Ordering::Acquire);
        let mut ring = unsafe { &*self.ring.load(Ordering::Relaxed) };
        if b - t > ring.mask {
            ring = self.grow(t, b);
        }
        ring.set(b, x);
        fence(Ordering::Release);
        self.bottom.store(b + 1, Ordering::Relaxed);
    }

    fn grow(&self, t: i64, b: i64) -> &Ring {
        let old_ptr = self.ring.load(Ordering::Relaxed);
        let old = unsafe { &*old_ptr };
        let new_ptr = Ring::alloc((old.mask + 1) * 2);
        let new = unsafe { &*new_ptr };
        for i in t..b {
            new.set(i, old.get(i));
        }
        self.graveyard.lock().unwrap().push(old_ptr);
        self.ring.store(new_ptr, Ordering::Release);
        new
    }

    /// Owner-only: remove from the bottom (the owner's end is LIFO).
    pub fn pop(&self) -> Option<Word> {
        let b = self.bottom.load(Ordering::Relaxed) - 1;
        let ring = unsafe { &*self.ring.load(Ordering::Relaxed) };
        self.bottom.store(b, Ordering::Relaxed);
        fence(Ordering::SeqCst);
        let t = self.top.load(Ordering::Relaxed);
        if t > b {
            // Empty: restore.
            self.bottom.store(b + 1, Ordering::Relaxed);
            return None;
        }
        let x = ring.get(b);
        if t == b {
            // Last element: race the thieves for it.
            let won = self
                .top
                .compare_exchange(t, t + 1, Ordering::SeqCst, Ordering::Relaxed)
                .is_ok();
            self.bottom.store(b + 1, Ordering::Relaxed);
            return won.then_some(x);
        }
        Some(x)
    }

    /// Any thief: remove from the top (FIFO end).
    pub fn steal(&self) -> Option<Word> {
        loop {
            let t = self.top.load(Ordering::Acquire);
            fence(Ordering::SeqCst);
            let b = self.bottom.load(Ordering::Acquire);
            if t >= b {
                return None;
            }
            let ring = unsafe { &*self.ring.load(Ordering::Acquire) };
            let x = ring.get(t);
            if self
                .top
                .compare_exchange(t, t + 1, Ordering::SeqCst, Ordering::Relaxed)
                .is_ok()
            {
                return Some(x);
            }
        }
    }
}

impl Drop for ChaseLevDeque {
    fn drop(&mut self) {
        unsafe {
            drop(Box::from_raw(self.ring.load(Ordering::Relaxed)));
            for p in self.graveyard.lock().unwrap().drain(..) {
                drop(Box::from_raw(p));
            }
        }
    }
}

struct IdemBlock {
    cells: Box<[AtomicU64]>,
}

/// Idempotent FIFO work-stealing: tasks in a shared array, shared `head` and
/// `tail` words. Take reads the head task and then advances `head` with a
/// plain write; steal advances it with compare-and-swap.
pub struct IdempotentFifo {
    head: AtomicU64,
    tail: AtomicU64,
    arr: AtomicPtr<IdemBlock>,
    graveyard: Mutex<Vec<*mut IdemBlock>>,
}

unsafe impl Send for IdempotentFifo {}
unsafe impl Sync for IdempotentFifo {}

impl IdempotentFifo {
    pub fn new(initial_cap: u64) -> Self {
        let block = Box::into_raw(Box::new(IdemBlock {
            cells: (0..initial_cap.max(2)).map(|_| AtomicU64::new(BOTTOM)).collect(),
        }));
        IdempotentFifo {
            head: AtomicU64::new(0),
            tail: AtomicU64::new(0),
            arr: AtomicPtr::new(block),
            graveyard: Mutex::new(Vec::new()),
        }
    }

    /// Owner-only.
    pub fn put(&self, x: Word) {
        let t = self.tail.load(Ordering::Relaxed);
        let mut block = unsafe { &*self.arr.load(Ordering::Relaxed) };
        if t as usize >= block.cells.len() {
            block = self.grow(t);
        }
        block.cells[t as usize].store(x, Ordering::SeqCst);
        self.tail.store(t + 1, Ordering::SeqCst);
    }

    fn grow(&self, t: u64) -> &IdemBlock {
        let old_ptr = self.arr.load(Ordering::Relaxed);
        let old = unsafe { &*old_ptr };
        let new_cells: Box<[AtomicU64]> = (0..old.cells.len() * 2)
            .map(|i| {
                AtomicU64::new(if i < t as usize {
                    old.cells[i].load(Ordering::Relaxed)
                } else {
                    BOTTOM
                })
            })
            .collect();
        let new_ptr = Box::into_raw(Box::new(IdemBlock { cells: new_cells }));
        self.graveyard.lock().unwrap().push(old_ptr);
        self.arr.store(new_ptr, Ordering::Release);
        unsafe { &*new_ptr }
    }

    /// Owner-only.
    pub fn take(&self) -> Option<Word> {
        let h = self.head.load(Ordering::SeqCst);
        let t = self.tail.load(Ordering::SeqCst);
        if h == t {
            return None;
        }
        let block = unsafe { &*self.arr.load(Ordering::Acquire) };
        let x = block.cells[h as usize].load(Ordering::SeqCst);
        // The late head advance: a plain write that can roll back concurrent
        // steals' increments.
        self.head.store(h + 1, Ordering::SeqCst);
        Some(x)
    }

    /// Any thief.
    pub fn steal(&self) -> Option<Word> {
        loop {
            let h = self.head.load(Ordering::SeqCst);
            let t = self.tail.load(Ordering::SeqCst);
            if h == t {
                return None;
            }
            let block = unsafe { &*self.arr.load(Ordering::Acquire) };
            let x = block.cells[h as usize].load(Ordering::SeqCst);
            if self
                .head
                .compare_exchange(h, h + 1, Ordering::SeqCst, Ordering::SeqCst)
                .is_ok()
            {
                return Some(x);
            }
        }
    }
}

impl Drop for IdempotentFifo {
    fn drop(&mut self) {
        unsafe {
            drop(Box::from_raw(self.arr.load(Ordering::Relaxed)));
            for p in self.graveyard.lock().unwrap().drain(..) {
                drop(Box::from_raw(p));
            }
        }
    }
}

struct ClOwner(Arc<ChaseLevDeque>);
struct ClThief(Arc<ChaseLevDeque>);

impl QueueOwner for ClOwner {
    fn put(&mut self, x: Word) -> Result<(), QueueError> {
        if x == BOTTOM {
            return Err(QueueError::ReservedTaskId);
        }
        self.0.push(x);
        Ok(())
    }
    fn take(&mut self) -> Option<Word> {
        self.0.pop()
    }
}

impl QueueThief for ClThief {
    fn steal(&mut self) -> Option<Word> {
        self.0.steal()
    }
}

pub fn build_chase_lev(
    initial_cap: u64,
    thieves: usize,
) -> (Box<dyn QueueOwner>, Vec<Box<dyn QueueThief>>) {
    let q = Arc::new(ChaseLevDeque::new(initial_cap));
    let ts = (0..thieves)
        .map(|_| Box::new(ClThief(Arc::clone(&q))) as Box<dyn QueueThief>)
        .collect();
    (Box::new(ClOwner(q)), ts)
}

struct IfOwner(Arc<IdempotentFifo>);
struct IfThief(Arc<IdempotentFifo>);

impl QueueOwner for IfOwner {
    fn put(&mut self, x: Word) -> Result<(), QueueError> {
        if x == BOTTOM {
            return Err(QueueError::ReservedTaskId);
        }
        self.0.put(x);
        Ok(())
    }
    fn take(&mut self) -> Option<Word> {
        self.0.take()
    }
}

impl QueueThief for IfThief {
    fn steal(&mut self) -> Option<Word> {
        self.0.steal()
    }
}

pub fn build_idempotent_fifo(
    initial_cap: u64,
    thieves: usize,
) -> (Box<dyn QueueOwner>, Vec<Box<dyn QueueThief>>) {
    let q = Arc::new(IdempotentFifo::new(initial_cap));
    let ts = (0..thieves)
        .map(|_| Box::new(IfThief(Arc::clone(&q))) as Box<dyn QueueThief>)
        .collect();
    (Box::new(IfOwner(q)), ts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn chase_lev_sequential_steals_are_fifo() {
        let q = ChaseLevDeque::new(4);
        for x in 1..=5 {
            q.push(x);
        }
        let got: Vec<_> = (0..5).map(|_| q.steal().unwrap()).collect();
        assert_eq!(got, vec![1, 2, 3, 4, 5]);
        assert_eq!(q.steal(), None);
    }

    #[test]
    fn chase_lev_pop_is_lifo_and_exact() {
        let q = ChaseLevDeque::new(4);
        q.push(1);
        q.push(2);
        assert_eq!(q.pop(), Some(2));
        assert_eq!(q.steal(), Some(1));
        assert_eq!(q.pop(), None);
        assert_eq!(q.steal(), None);
    }

    #[test]
    fn chase_lev_growth_preserves_contents() {
        let q = ChaseLevDeque::new(2);
        for x in 1..=100 {
            q.push(x);
        }
        let got: HashSet<_> = (0..100).map(|_| q.steal().unwrap()).collect();
        assert_eq!(got.len(), 100);
    }

    #[test]
    fn chase_lev_concurrent_extraction_is_exact() {
        // Multiset equality between puts and extractions under contention.
        use std::sync::atomic::{AtomicBool, Ordering};
        let n: u64 = 20_000;
        let q = Arc::new(ChaseLevDeque::new(8));
        let done = Arc::new(AtomicBool::new(false));
        let mut joins = Vec::new();
        for _ in 0..2 {
            let q = Arc::clone(&q);
            let done = Arc::clone(&done);
            joins.push(std::thread::spawn(move || {
                let mut got = Vec::new();
                loop {
                    match q.steal() {
                        Some(x) => got.push(x),
                        None if done.load(Ordering::SeqCst) => match q.steal() {
                            Some(x) => got.push(x),
                            None => break,
                        },
                        None => std::hint::spin_loop(),
                    }
                }
                got
            }));
        }
        let mut owner_got = Vec::new();
        for x in 1..=n {
            q.push(x);
            if x % 3 == 0 {
                if let Some(v) = q.pop() {
                    owner_got.push(v);
                }
            }
        }
        loop {
            match q.pop() {
                Some(v) => owner_got.push(v),
                None => break,
            }
        }
        done.store(true, Ordering::SeqCst);
        let mut all = owner_got;
        for j in joins {
            all.extend(j.join().unwrap());
        }
        all.sort_unstable();
        assert_eq!(all, (1..=n).collect::<Vec<_>>());
    }

    #[test]
    fn idempotent_fifo_sequential_exact() {
        let q = IdempotentFifo::new(4);
        for x in 1..=5 {
            q.put(x);
        }
        assert_eq!(q.take(), Some(1));
        assert_eq!(q.steal(), Some(2));
        assert_eq!(q.take(), Some(3));
        assert_eq!(q.steal(), Some(4));
        assert_eq!(q.take(), Some(5));
        assert_eq!(q.take(), None);
        assert_eq!(q.steal(), None);
    }

    #[test]
    fn idempotent_fifo_growth() {
        let q = IdempotentFifo::new(2);
        for x in 1..=50 {
            q.put(x);
        }
        let got: Vec<_> = (0..50).map(|_| q.take().unwrap()).collect();
        assert_eq!(got, (1..=50).collect::<Vec<_>>());
    }
}
