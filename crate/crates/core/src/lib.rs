//! Relaxed FIFO work-stealing deques built on max-register reductions.
//!
//! The crate has three faces:
//!
//! * **Queues** ([`wsqueue`], [`baselines`], [`maxreg`], [`taskbuf`]): native
//!   lock-free implementations of the relaxed deques (multiplicity and weak
//!   multiplicity, plus swap-bounded and exact variants), the
//!   head-synchronization registers they reduce to, the unbounded task
//!   buffers, and the Chase-Lev / idempotent-FIFO comparison algorithms.
//! * **Checking** ([`shmem`], [`checker`]): a simulated backend that executes
//!   the same algorithms one atomic instruction at a time, enumerates
//!   schedules exhaustively, and decides set-linearizability and
//!   linearizability of the resulting histories against the object
//!   specifications.
//! * **Benchmarks** ([`bench`]): zero-cost put/take/steal experiments and a
//!   parallel spanning-tree application over several graph families, with CSV
//!   reports normalized to single-thread Chase-Lev. See the `bench` binary.

pub mod baselines;
pub mod bench;
pub mod checker;
pub mod maxreg;
pub mod shmem;
pub mod taskbuf;
pub mod wsqueue;
