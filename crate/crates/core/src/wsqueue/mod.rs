//! The relaxed FIFO work-stealing deques.
//!
//! One skeleton, several instantiations. Tasks live in an unbounded buffer
//! indexed from 1; the owner's `tail` is process-local; the head of the
//! queue lives in a shared head register. The register choice picks the
//! algorithm:
//!
//! * a read/write tree max register gives the multiplicity deque (duplicates
//!   only between concurrent extractions, take/steal cost logarithmic in the
//!   capacity);
//! * the inlined range max register (one plain shared word plus a local
//!   maximum per process) gives the weak-multiplicity deque (a process never
//!   extracts the same task twice, constant cost, fully fence-free).
//!
//! The swap-bounded variants add a claim array so no two steals return the
//! same task; claiming in take as well makes extraction exact.
//!
//! `put` performs shared writes only. `take` and `steal` perform a sequence
//! of reads followed by writes. No operation writes one shared location and
//! then reads another.

pub mod model;

use crate::maxreg::TreeMaxRegister;
use crate::shmem::{NativeCell, Profile, Word, BOTTOM};
use crate::taskbuf::{
    ClaimArray, ClaimCursor, DoublingBuffer, FlatBuffer, SegmentedBuffer, TaskBuffer,
    DEFAULT_SEGMENT_LEN,
};
use std::str::FromStr;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueueError {
    #[error("queue holds at most {capacity} tasks")]
    Full { capacity: u64 },
    #[error("task ids start at 1; 0 is the empty-cell sentinel")]
    ReservedTaskId,
}

/// Shared head register: the synchronization point of the deque.
pub trait HeadRegister: Send + Sync {
    type Local: Clone + Send;

    fn new_local(&self) -> Self::Local;

    /// Current head position, merged with the process's local knowledge.
    fn read(&self, local: &mut Self::Local) -> u64;

    /// Advances the head to `new` after an extraction at `new - 1`.
    fn advance(&self, local: &mut Self::Local, new: u64);

    /// Records locally that position `new - 1` is spent (lost claim in the
    /// bounded variants); registers without local state ignore it.
    fn note_spent(&self, local: &mut Self::Local, new: u64);
}

/// Head backed by the tree max register: reads never miss a completed
/// advance, so duplicate extractions are possible only between concurrent
/// operations.
pub struct TreeHead {
    reg: TreeMaxRegister,
}

impl TreeHead {
    pub fn new(value_capacity: u64, profile: Profile) -> Self {
        TreeHead {
            reg: TreeMaxRegister::with_profile(value_capacity, profile),
        }
    }
}

impl HeadRegister for TreeHead {
    type Local = ();

    fn new_local(&self) {}

    fn read(&self, _l: &mut ()) -> u64 {
        self.reg.max_read()
    }

    fn advance(&self, _l: &mut (), new: u64) {
        self.reg
            .max_write(new)
            .expect("head advance within put-bounded capacity");
    }

    fn note_spent(&self, _l: &mut (), _new: u64) {}
}

/// Head backed by the inlined range max register: one plain shared word, a
/// persistent local maximum per process. Fence-free and constant cost; a
/// slow process can move the shared word backwards, which is where the
/// weak-multiplicity relaxation shows.
pub struct RangeHead {
    shared: NativeCell,
    profile: Profile,
}

impl RangeHead {
    pub fn new(profile: Profile) -> Self {
        RangeHead {
            shared: NativeCell::new(1),
            profile,
        }
    }
}

impl HeadRegister for RangeHead {
    type Local = u64;

    fn new_local(&self) -> u64 {
        1
    }

    fn read(&self, local: &mut u64) -> u64 {
        let v = self.shared.read(self.profile);
        *local = (*local).max(v);
        *local
    }

    fn advance(&self, local: &mut u64, new: u64) {
        self.shared.write(new, self.profile);
        *local = (*local).max(new);
    }

    fn note_spent(&self, local: &mut u64, new: u64) {
        *local = (*local).max(new);
    }
}

/// Extraction discipline: how take and steal treat the claim array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discipline {
    /// No claims: duplicates allowed per the relaxation of the head register.
    Plain,
    /// Steals claim before returning: no two steals share a task.
    BoundedSteal,
    /// Takes claim as well: every task extracted exactly once.
    Exact,
}

struct Inner<H: HeadRegister, B: TaskBuffer> {
    head: H,
    tasks: B,
    claims: Option<ClaimArray>,
    discipline: Discipline,
    /// `Some(max_puts)` when the head register is bounded.
    put_bound: Option<u64>,
}

/// The owner's handle: `put` and `take`. One thread at a time.
pub struct Owner<H: HeadRegister, B: TaskBuffer> {
    inner: Arc<Inner<H, B>>,
    tail: u64,
    puts: u64,
    head_local: H::Local,
    write_cursor: B::Cursor,
    sentinel_cursor: B::Cursor,
    read_cursor: B::Cursor,
    ensure_cursor: ClaimCursor,
    claim_cursor: ClaimCursor,
}

/// A thief's handle: `steal`. One handle per thief process.
pub struct Thief<H: HeadRegister, B: TaskBuffer> {
    inner: Arc<Inner<H, B>>,
    head_local: H::Local,
    read_cursor: B::Cursor,
    claim_cursor: ClaimCursor,
}

/// A queue instance; hands out the owner handle and thief handles.
pub struct Queue<H: HeadRegister, B: TaskBuffer> {
    inner: Arc<Inner<H, B>>,
}

impl<H: HeadRegister, B: TaskBuffer> Queue<H, B> {
    pub fn new(
        head: H,
        tasks: B,
        discipline: Discipline,
        claims: Option<ClaimArray>,
        put_bound: Option<u64>,
    ) -> Self {
        assert_eq!(
            discipline != Discipline::Plain,
            claims.is_some(),
            "claim array exactly when steals are bounded"
        );
        Queue {
            inner: Arc::new(Inner {
                head,
                tasks,
                claims,
                discipline,
                put_bound,
            }),
        }
    }

    pub fn owner(&self) -> Owner<H, B> {
        Owner {
            inner: Arc::clone(&self.inner),
            tail: 0,
            puts: 0,
            head_local: self.inner.head.new_local(),
            write_cursor: self.inner.tasks.cursor(),
            sentinel_cursor: self.inner.tasks.cursor(),
            read_cursor: self.inner.tasks.cursor(),
            ensure_cursor: ClaimCursor::default(),
            claim_cursor: ClaimCursor::default(),
        }
    }

    pub fn thief(&self) -> Thief<H, B> {
        Thief {
            inner: Arc::clone(&self.inner),
            head_local: self.inner.head.new_local(),
            read_cursor: self.inner.tasks.cursor(),
            claim_cursor: ClaimCursor::default(),
        }
    }
}

impl<H: HeadRegister, B: TaskBuffer> Owner<H, B> {
    /// Appends a task. Shared writes only: the task cell and the
    /// two-ahead empty sentinel.
    pub fn put(&mut self, x: Word) -> Result<(), QueueError> {
        if x == BOTTOM {
            return Err(QueueError::ReservedTaskId);
        }
        if let Some(bound) = self.inner.put_bound {
            if self.puts >= bound {
                return Err(QueueError::Full { capacity: bound });
            }
        }
        self.tail += 1;
        self.inner.tasks.write(&mut self.write_cursor, self.tail, x);
        self.inner
            .tasks
            .write(&mut self.sentinel_cursor, self.tail + 2, BOTTOM);
        if let Some(claims) = &self.inner.claims {
            claims.ensure(&mut self.ensure_cursor, self.tail + 2);
        }
        self.puts += 1;
        Ok(())
    }

    /// Removes the task at the head, if any.
    pub fn take(&mut self) -> Option<Word> {
        let inner = &*self.inner;
        let mut h = inner.head.read(&mut self.head_local);
        if h > self.tail {
            return None;
        }
        if inner.discipline == Discipline::Exact {
            let claims = inner.claims.as_ref().expect("exact queues carry claims");
            loop {
                if claims.claim(&mut self.claim_cursor, h) {
                    break;
                }
                inner.head.note_spent(&mut self.head_local, h + 1);
                h = inner.head.read(&mut self.head_local);
                if h > self.tail {
                    return None;
                }
            }
        }
        let x = inner.tasks.read(&mut self.read_cursor, h);
        debug_assert_ne!(x, BOTTOM, "owner read its own task range");
        inner.head.advance(&mut self.head_local, h + 1);
        Some(x)
    }

    /// Number of completed puts.
    pub fn puts(&self) -> u64 {
        self.puts
    }
}

impl<H: HeadRegister, B: TaskBuffer> Thief<H, B> {
    /// Extracts the task at the head, or reports the queue empty.
    pub fn steal(&mut self) -> Option<Word> {
        let inner = &*self.inner;
        match inner.discipline {
            Discipline::Plain => {
                let h = inner.head.read(&mut self.head_local);
                let x = inner.tasks.read(&mut self.read_cursor, h);
                if x == BOTTOM {
                    return None;
                }
                inner.head.advance(&mut self.head_local, h + 1);
                Some(x)
            }
            Discipline::BoundedSteal | Discipline::Exact => {
                let claims = inner.claims.as_ref().expect("bounded queues carry claims");
                loop {
                    let h = inner.head.read(&mut self.head_local);
                    let x = inner.tasks.read(&mut self.read_cursor, h);
                    if x == BOTTOM {
                        return None;
                    }
                    if claims.claim(&mut self.claim_cursor, h) {
                        inner.head.advance(&mut self.head_local, h + 1);
                        return Some(x);
                    }
                    inner.head.note_spent(&mut self.head_local, h + 1);
                }
            }
        }
    }
}

/// The algorithms the crate ships, by their benchmark identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    WsMult,
    WsWmult,
    BWsMult,
    BWsWmult,
    Exact,
    ChaseLev,
    IdempotentFifo,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::WsMult,
        Algorithm::WsWmult,
        Algorithm::BWsMult,
        Algorithm::BWsWmult,
        Algorithm::Exact,
        Algorithm::ChaseLev,
        Algorithm::IdempotentFifo,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::WsMult => "ws-mult",
            Algorithm::WsWmult => "ws-wmult",
            Algorithm::BWsMult => "b-ws-mult",
            Algorithm::BWsWmult => "b-ws-wmult",
            Algorithm::Exact => "exact",
            Algorithm::ChaseLev => "chase-lev",
            Algorithm::IdempotentFifo => "idempotent-fifo",
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ws-mult" => Ok(Algorithm::WsMult),
            "ws-wmult" => Ok(Algorithm::WsWmult),
            "b-ws-mult" => Ok(Algorithm::BWsMult),
            "b-ws-wmult" => Ok(Algorithm::BWsWmult),
            "exact" => Ok(Algorithm::Exact),
            "chase-lev" => Ok(Algorithm::ChaseLev),
            "idempotent-fifo" => Ok(Algorithm::IdempotentFifo),
            other => Err(format!(
                "unknown algorithm `{other}`; expected one of {}",
                Algorithm::ALL.map(|a| a.name()).join(", ")
            )),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Task-buffer strategy for the deques built here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferStrategy {
    Segmented,
    Doubling,
    /// Preallocated flat array; used by differential tests.
    Flat,
}

impl FromStr for BufferStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "segmented" => Ok(BufferStrategy::Segmented),
            "doubling" => Ok(BufferStrategy::Doubling),
            "flat" => Ok(BufferStrategy::Flat),
            other => Err(format!("unknown buffer strategy `{other}`")),
        }
    }
}

impl std::fmt::Display for BufferStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BufferStrategy::Segmented => "segmented",
            BufferStrategy::Doubling => "doubling",
            BufferStrategy::Flat => "flat",
        })
    }
}

/// Construction parameters for any of the seven algorithms.
#[derive(Debug, Clone)]
pub struct QueueConfig {
    pub algorithm: Algorithm,
    pub buffer: BufferStrategy,
    pub segment_len: u64,
    /// Maximum number of tasks ever put; sizes the tree head register of the
    /// bounded-register builds.
    pub capacity: u64,
    pub profile: Profile,
}

impl QueueConfig {
    pub fn new(algorithm: Algorithm, capacity: u64) -> Self {
        QueueConfig {
            algorithm,
            buffer: BufferStrategy::Segmented,
            segment_len: DEFAULT_SEGMENT_LEN,
            capacity,
            profile: Profile::SeqCst,
        }
    }
}

/// Owner-side interface used by the benchmark harness.
pub trait QueueOwner: Send {
    fn put(&mut self, x: Word) -> Result<(), QueueError>;
    fn take(&mut self) -> Option<Word>;
}

/// Thief-side interface used by the benchmark harness.
pub trait QueueThief: Send {
    fn steal(&mut self) -> Option<Word>;
}

impl<H: HeadRegister + 'static, B: TaskBuffer + 'static> QueueOwner for Owner<H, B>
where
    H::Local: 'static,
    B::Cursor: 'static,
{
    fn put(&mut self, x: Word) -> Result<(), QueueError> {
        Owner::put(self, x)
    }
    fn take(&mut self) -> Option<Word> {
        Owner::take(self)
    }
}

impl<H: HeadRegister + 'static, B: TaskBuffer + 'static> QueueThief for Thief<H, B>
where
    H::Local: 'static,
    B::Cursor: 'static,
{
    fn steal(&mut self) -> Option<Word> {
        Thief::steal(self)
    }
}

fn build_relaxed<H: HeadRegister + 'static>(
    head: H,
    cfg: &QueueConfig,
    discipline: Discipline,
    thieves: usize,
) -> (Box<dyn QueueOwner>, Vec<Box<dyn QueueThief>>)
where
    H::Local: 'static,
{
    let claims = match discipline {
        Discipline::Plain => None,
        _ => Some(ClaimArray::new(cfg.segment_len, cfg.profile)),
    };
    let put_bound = match cfg.algorithm {
        Algorithm::WsMult | Algorithm::BWsMult | Algorithm::Exact => Some(cfg.capacity),
        _ => None,
    };
    match cfg.buffer {
        BufferStrategy::Segmented => {
            let q = Queue::new(
                head,
                SegmentedBuffer::with_profile(cfg.segment_len, cfg.profile),
                discipline,
                claims,
                put_bound,
            );
            let ts = (0..thieves)
                .map(|_| Box::new(q.thief()) as Box<dyn QueueThief>)
                .collect();
            (Box::new(q.owner()), ts)
        }
        BufferStrategy::Doubling => {
            let q = Queue::new(
                head,
                DoublingBuffer::with_profile(cfg.segment_len.max(2), cfg.profile),
                discipline,
                claims,
                put_bound,
            );
            let ts = (0..thieves)
                .map(|_| Box::new(q.thief()) as Box<dyn QueueThief>)
                .collect();
            (Box::new(q.owner()), ts)
        }
        BufferStrategy::Flat => {
            let q = Queue::new(
                head,
                FlatBuffer::with_profile(cfg.capacity + 3, cfg.profile),
                discipline,
                claims,
                put_bound,
            );
            let ts = (0..thieves)
                .map(|_| Box::new(q.thief()) as Box<dyn QueueThief>)
                .collect();
            (Box::new(q.owner()), ts)
        }
    }
}

/// Instantiates any algorithm with `thieves` thief handles.
pub fn build_queue(
    cfg: &QueueConfig,
    thieves: usize,
) -> (Box<dyn QueueOwner>, Vec<Box<dyn QueueThief>>) {
    match cfg.algorithm {
        Algorithm::WsMult => build_relaxed(
            TreeHead::new(cfg.capacity + 1, cfg.profile),
            cfg,
            Discipline::Plain,
            thieves,
        ),
        Algorithm::WsWmult => {
            build_relaxed(RangeHead::new(cfg.profile), cfg, Discipline::Plain, thieves)
        }
        Algorithm::BWsMult => build_relaxed(
            TreeHead::new(cfg.capacity + 1, cfg.profile),
            cfg,
            Discipline::BoundedSteal,
            thieves,
        ),
        Algorithm::BWsWmult => build_relaxed(
            RangeHead::new(cfg.profile),
            cfg,
            Discipline::BoundedSteal,
            thieves,
        ),
        Algorithm::Exact => build_relaxed(
            TreeHead::new(cfg.capacity + 1, cfg.profile),
            cfg,
            Discipline::Exact,
            thieves,
        ),
        Algorithm::ChaseLev => crate::baselines::build_chase_lev(cfg.segment_len.max(8), thieves),
        Algorithm::IdempotentFifo => {
            crate::baselines::build_idempotent_fifo(cfg.segment_len.max(8), thieves)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain_wmult() -> Queue<RangeHead, SegmentedBuffer> {
        Queue::new(
            RangeHead::new(Profile::SeqCst),
            SegmentedBuffer::new(4),
            Discipline::Plain,
            None,
            None,
        )
    }

    #[test]
    fn fresh_queue_take_and_steal_are_empty() {
        let q = plain_wmult();
        let mut owner = q.owner();
        let mut thief = q.thief();
        assert_eq!(owner.take(), None);
        assert_eq!(thief.steal(), None);
    }

    #[test]
    fn put_take_fifo_sequential() {
        let q = plain_wmult();
        let mut owner = q.owner();
        owner.put(7).unwrap();
        owner.put(8).unwrap();
        assert_eq!(owner.take(), Some(7));
        assert_eq!(owner.take(), Some(8));
        assert_eq!(owner.take(), None);
    }

    #[test]
    fn put_then_steal() {
        let q = plain_wmult();
        let mut owner = q.owner();
        let mut thief = q.thief();
        owner.put(7).unwrap();
        assert_eq!(thief.steal(), Some(7));
        assert_eq!(thief.steal(), None);
    }

    #[test]
    fn tree_head_capacity_rejects_puts() {
        let cfg = QueueConfig::new(Algorithm::WsMult, 3);
        let (mut owner, _) = build_queue(&cfg, 0);
        owner.put(1).unwrap();
        owner.put(2).unwrap();
        owner.put(3).unwrap();
        assert_eq!(owner.put(4), Err(QueueError::Full { capacity: 3 }));
        assert_eq!(owner.take(), Some(1));
    }

    #[test]
    fn task_id_zero_is_reserved() {
        let q = plain_wmult();
        let mut owner = q.owner();
        assert_eq!(owner.put(0), Err(QueueError::ReservedTaskId));
    }

    #[test]
    fn bounded_steal_claims_once() {
        // One put: the first steal wins the claim, a second steal (same or
        // another thief) finds the queue empty.
        let cfg = QueueConfig::new(Algorithm::BWsWmult, 8);
        let (mut owner, mut thieves) = build_queue(&cfg, 2);
        owner.put(7).unwrap();
        assert_eq!(thieves[0].steal(), Some(7));
        assert_eq!(thieves[1].steal(), None);
        assert_eq!(thieves[0].steal(), None);
    }

    #[test]
    fn exact_variant_sequential_fifo() {
        let cfg = QueueConfig::new(Algorithm::Exact, 16);
        let (mut owner, mut thieves) = build_queue(&cfg, 1);
        for x in 1..=10 {
            owner.put(x).unwrap();
        }
        let mut got = Vec::new();
        for i in 0..10 {
            let v = if i % 2 == 0 {
                owner.take()
            } else {
                thieves[0].steal()
            };
            got.push(v.unwrap());
        }
        assert_eq!(got, (1..=10).collect::<Vec<_>>());
        assert_eq!(owner.take(), None);
        assert_eq!(thieves[0].steal(), None);
    }

    #[test]
    fn all_algorithms_drain_in_fifo_order_via_steals() {
        for algo in Algorithm::ALL {
            let cfg = QueueConfig::new(algo, 64);
            let (mut owner, mut thieves) = build_queue(&cfg, 1);
            for x in 1..=5 {
                owner.put(x).unwrap();
            }
            // Steals are head-side FIFO for every algorithm, including
            // Chase-Lev (whose owner end is the tail).
            let got: Vec<_> = (0..5).map(|_| thieves[0].steal().unwrap()).collect();
            assert_eq!(got, vec![1, 2, 3, 4, 5], "{algo}");
            assert_eq!(thieves[0].steal(), None, "{algo}");
        }
    }

    #[test]
    fn buffer_strategies_are_equivalent_sequentially() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let script: Vec<u8> = (0..200).map(|_| rng.gen_range(0..3)).collect();
            let mut results: Vec<Vec<Option<Word>>> = Vec::new();
            for buffer in [
                BufferStrategy::Segmented,
                BufferStrategy::Doubling,
                BufferStrategy::Flat,
            ] {
                let cfg = QueueConfig {
                    buffer,
                    segment_len: 4,
                    ..QueueConfig::new(Algorithm::WsWmult, 256)
                };
                let (mut owner, mut thieves) = build_queue(&cfg, 1);
                let mut next = 1u64;
                let mut out = Vec::new();
                for c in &script {
                    match c {
                        0 => {
                            owner.put(next).unwrap();
                            next += 1;
                        }
                        1 => out.push(owner.take()),
                        _ => out.push(thieves[0].steal()),
                    }
                }
                results.push(out);
            }
            assert_eq!(results[0], results[1]);
            assert_eq!(results[1], results[2]);
        }
    }
}
