//! Head-synchronization registers.
//!
//! [`TreeMaxRegister`] is a bounded wait-free max register built from plain
//! read/write bits: a complete binary tree with one switch bit per internal
//! node. A read walks root-to-leaf following set switches (right when set);
//! the leaf index is the value. A write descends along its value's path,
//! reading the switch at every left turn (a set switch there proves a larger
//! value is already readable, so the write stops), then sets the switches of
//! its right-turn nodes bottom-up. Reads are a sequence of loads, writes are
//! loads followed by stores: no read-after-write pattern anywhere.
//!
//! [`RangeMaxRegister`] is the relaxed register: one shared word plus a
//! persistent local maximum per process. A read returns the larger of the
//! two, which lies between the caller's last known value and the global
//! maximum written.

pub mod model;

use crate::shmem::{NativeByteCell, NativeCell, Profile, Word};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("value {value} exceeds register capacity {capacity}")]
pub struct CapacityError {
    pub value: Word,
    pub capacity: Word,
}

/// Computes the shape of the switch tree for capacity `m`: number of leaves
/// (m rounded up to a power of two) and height.
pub(crate) fn tree_shape(m: Word) -> (u64, u32) {
    let leaves = m.next_power_of_two();
    (leaves, leaves.trailing_zeros())
}

/// Bounded read/write max register storing values in `1..=m`, initially 1.
#[derive(Debug)]
pub struct TreeMaxRegister {
    capacity: Word,
    leaves: u64,
    height: u32,
    /// Switches for internal nodes in heap order (index 1..leaves-1; slot 0
    /// unused). Empty when the tree has a single leaf.
    switches: Vec<NativeByteCell>,
    profile: Profile,
}

impl TreeMaxRegister {
    pub fn new(m: Word) -> Self {
        Self::with_profile(m, Profile::SeqCst)
    }

    pub fn with_profile(m: Word, profile: Profile) -> Self {
        assert!(m >= 1, "capacity must be at least 1");
        let (leaves, height) = tree_shape(m);
        let switches = (0..leaves).map(|_| NativeByteCell::new(0)).collect();
        TreeMaxRegister {
            capacity: m,
            leaves,
            height,
            switches,
            profile,
        }
    }

    /// Constructs the register pre-seeded with `init` (1 means fresh).
    pub fn with_initial(m: Word, init: Word) -> Self {
        let reg = Self::new(m);
        reg.max_write(init).expect("initial value exceeds capacity");
        reg
    }

    pub fn capacity(&self) -> Word {
        self.capacity
    }

    /// Returns the maximum completed write (or the initial value 1).
    pub fn max_read(&self) -> Word {
        let mut node = 1u64;
        for _ in 0..self.height {
            let right = self.switches[node as usize].read(self.profile) == 1;
            node = 2 * node + right as u64;
        }
        node - self.leaves + 1
    }

    /// Raises the register to at least `v`. After completion every
    /// `max_read` returns at least `v`.
    pub fn max_write(&self, v: Word) -> Result<(), CapacityError> {
        if v > self.capacity {
            return Err(CapacityError {
                value: v,
                capacity: self.capacity,
            });
        }
        let leaf_pos = v - 1;
        let mut node = 1u64;
        let mut to_set: Vec<u64> = Vec::new();
        for d in (0..self.height).rev() {
            let goes_right = (leaf_pos >> d) & 1 == 1;
            if goes_right {
                to_set.push(node);
                node = 2 * node + 1;
            } else {
                if self.switches[node as usize].read(self.profile) == 1 {
                    break;
                }
                node = 2 * node;
            }
        }
        for &n in to_set.iter().rev() {
            self.switches[n as usize].write(1, self.profile);
        }
        Ok(())
    }
}

/// The relaxation of the max register: reads may lag behind the global
/// maximum but never behind the caller's own past.
#[derive(Debug)]
pub struct RangeMaxRegister {
    shared: Arc<NativeCell>,
    profile: Profile,
}

/// Per-process handle. The persistent local maximum is owned by exactly one
/// process at a time; the handle is transferable between threads but never
/// shared.
#[derive(Debug)]
pub struct RangeMaxHandle {
    shared: Arc<NativeCell>,
    profile: Profile,
    local: Word,
}

impl RangeMaxRegister {
    pub fn new() -> Self {
        Self::with_profile(Profile::SeqCst)
    }

    pub fn with_profile(profile: Profile) -> Self {
        RangeMaxRegister {
            shared: Arc::new(NativeCell::new(1)),
            profile,
        }
    }

    pub fn handle(&self) -> RangeMaxHandle {
        RangeMaxHandle {
            shared: Arc::clone(&self.shared),
            profile: self.profile,
            local: 1,
        }
    }
}

impl Default for RangeMaxRegister {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeMaxHandle {
    /// Publishes `x` if it exceeds everything this process has seen.
    /// Always returns true.
    pub fn rmax_write(&mut self, x: Word) -> bool {
        debug_assert!(x >= 1);
        let seen = self.local.max(self.shared.read(self.profile));
        self.local = seen;
        if x > seen {
            self.local = x;
            self.shared.write(x, self.profile);
        }
        true
    }

    /// Returns a value between this process's previous local maximum and the
    /// largest value written so far, and remembers it.
    pub fn rmax_read(&mut self) -> Word {
        let v = self.local.max(self.shared.read(self.profile));
        self.local = v;
        v
    }

    /// The process's current local maximum (no shared access).
    pub fn local(&self) -> Word {
        self.local
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_register_reads_initial_one() {
        for m in [1, 2, 3, 8, 100] {
            let r = TreeMaxRegister::new(m);
            assert_eq!(r.max_read(), 1, "m={m}");
        }
    }

    #[test]
    fn max_semantics_sequential() {
        let r = TreeMaxRegister::new(8);
        r.max_write(5).unwrap();
        r.max_write(3).unwrap();
        assert_eq!(r.max_read(), 5);
        r.max_write(8).unwrap();
        assert_eq!(r.max_read(), 8);
    }

    #[test]
    fn write_of_one_changes_no_bits() {
        let r = TreeMaxRegister::new(8);
        r.max_write(1).unwrap();
        for s in &r.switches {
            assert_eq!(s.read(Profile::SeqCst), 0);
        }
        assert_eq!(r.max_read(), 1);
    }

    #[test]
    fn capacity_is_enforced() {
        let r = TreeMaxRegister::new(5);
        assert_eq!(
            r.max_write(6),
            Err(CapacityError {
                value: 6,
                capacity: 5
            })
        );
        r.max_write(5).unwrap();
        assert_eq!(r.max_read(), 5);
    }

    #[test]
    fn non_power_of_two_capacity() {
        let r = TreeMaxRegister::new(6);
        for v in 1..=6 {
            r.max_write(v).unwrap();
            assert_eq!(r.max_read(), v);
        }
    }

    #[test]
    fn matches_running_max_oracle() {
        // Sequential exactness of the tree register against a running max.
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let m = 64;
        let r = TreeMaxRegister::new(m);
        let mut oracle = 1u64;
        for _ in 0..1000 {
            if rng.gen_bool(0.6) {
                let v = rng.gen_range(1..=m);
                r.max_write(v).unwrap();
                oracle = oracle.max(v);
            } else {
                assert_eq!(r.max_read(), oracle);
            }
        }
    }

    #[test]
    fn range_register_sequential_exactness() {
        // Single process: behaves exactly like a max register.
        let reg = RangeMaxRegister::new();
        let mut h = reg.handle();
        assert_eq!(h.rmax_read(), 1);
        assert!(h.rmax_write(5));
        assert_eq!(h.rmax_read(), 5);
        assert!(h.rmax_write(3));
        assert_eq!(h.rmax_read(), 5);
    }

    #[test]
    fn range_register_visibility_across_processes() {
        // Sequential cross-process visibility: p0 writes 7, p1 reads 7.
        let reg = RangeMaxRegister::new();
        let mut p0 = reg.handle();
        let mut p1 = reg.handle();
        p0.rmax_write(7);
        assert_eq!(p1.rmax_read(), 7);
    }

    #[test]
    fn range_register_reads_are_monotone_per_process() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let reg = RangeMaxRegister::new();
        let mut handles: Vec<_> = (0..3).map(|_| reg.handle()).collect();
        let mut last = vec![1u64; 3];
        for _ in 0..500 {
            let p = rng.gen_range(0..3);
            if rng.gen_bool(0.5) {
                handles[p].rmax_write(rng.gen_range(1..=100));
            } else {
                let v = handles[p].rmax_read();
                assert!(v >= last[p]);
                last[p] = v;
            }
        }
    }
}
