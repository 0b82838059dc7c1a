//! Parallel spanning tree over a shared claim array, with one work-stealing
//! deque per thread.
//!
//! A task is a vertex to expand. A thread claims each unvisited neighbor
//! with a compare-and-swap on the parent array and puts claimed neighbors
//! into its own deque; out of local work it steals from a uniformly random
//! victim. Duplicate extractions under the relaxed deques are absorbed: the
//! claim already failed, so reprocessing puts nothing.

use super::graph::{Graph, UNCLAIMED};
use crate::wsqueue::{build_queue, QueueConfig, QueueOwner, QueueThief};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

struct Workspace {
    parents: Vec<AtomicU32>,
    claimed: AtomicUsize,
    /// Extractions that found the vertex's neighbors already claimed; a
    /// correctness side-channel for observing absorbed duplicates.
    duplicates: AtomicUsize,
}

struct WorkerIo {
    owner: Box<dyn QueueOwner>,
    victims: Vec<Box<dyn QueueThief>>,
}

fn worker(
    ws: &Workspace,
    g: &Graph,
    io: &mut WorkerIo,
    component: usize,
    rng: &mut ChaCha8Rng,
) {
    let process = |v_task: u64, io_owner: &mut Box<dyn QueueOwner>| {
        let v = (v_task - 1) as usize;
        let mut spawned = false;
        for &u in g.neighbors(v) {
            if ws.parents[u as usize]
                .compare_exchange(UNCLAIMED, v as u32, Ordering::SeqCst, Ordering::SeqCst)
                .is_ok()
            {
                ws.claimed.fetch_add(1, Ordering::SeqCst);
                io_owner
                    .put(u as u64 + 1)
                    .expect("queue sized for the vertex count");
                spawned = true;
            }
        }
        if !spawned {
            ws.duplicates.fetch_add(1, Ordering::Relaxed);
        }
    };

    loop {
        while let Some(task) = io.owner.take() {
            process(task, &mut io.owner);
        }
        if ws.claimed.load(Ordering::SeqCst) >= component {
            return;
        }
        if !io.victims.is_empty() {
            let k = rng.gen_range(0..io.victims.len());
            if let Some(task) = io.victims[k].steal() {
                process(task, &mut io.owner);
                continue;
            }
        }
        std::hint::spin_loop();
    }
}

/// One timed spanning-tree run. Returns the parent array and the wall time
/// of the parallel phase.
pub fn spanning_tree_run(
    g: &Graph,
    root: usize,
    threads: usize,
    cfg: &QueueConfig,
    component: usize,
    seed: u64,
) -> (Vec<u32>, Duration) {
    assert!(threads >= 1);
    let ws = Arc::new(Workspace {
        parents: (0..g.vertices).map(|_| AtomicU32::new(UNCLAIMED)).collect(),
        claimed: AtomicUsize::new(1),
        duplicates: AtomicUsize::new(0),
    });
    ws.parents[root].store(root as u32, Ordering::SeqCst);

    // One deque per thread; thief handles cross-distributed.
    let mut owners = Vec::with_capacity(threads);
    let mut stealers: Vec<Vec<Box<dyn QueueThief>>> = (0..threads).map(|_| Vec::new()).collect();
    let mut queue_cfg = cfg.clone();
    queue_cfg.capacity = g.vertices as u64 + 2;
    for qi in 0..threads {
        let (owner, thieves) = build_queue(&queue_cfg, threads.saturating_sub(1));
        owners.push(owner);
        let mut it = thieves.into_iter();
        for ti in 0..threads {
            if ti != qi {
                stealers[ti].push(it.next().expect("one thief handle per other thread"));
            }
        }
    }

    let mut ios: Vec<WorkerIo> = owners
        .into_iter()
        .zip(stealers)
        .map(|(owner, victims)| WorkerIo { owner, victims })
        .collect();
    ios[0]
        .owner
        .put(root as u64 + 1)
        .expect("root fits the queue");

    let g_arc: Arc<Graph> = Arc::new(g.clone());
    let start = Instant::now();
    let handles: Vec<_> = ios
        .into_iter()
        .enumerate()
        .map(|(t, mut io)| {
            let ws = Arc::clone(&ws);
            let g = Arc::clone(&g_arc);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (t as u64).wrapping_mul(0x9e3779b9));
            std::thread::spawn(move || worker(&ws, &g, &mut io, component, &mut rng))
        })
        .collect();
    for h in handles {
        h.join().expect("worker thread panicked");
    }
    let elapsed = start.elapsed();

    let parents = ws
        .parents
        .iter()
        .map(|p| p.load(Ordering::SeqCst))
        .collect();
    (parents, elapsed)
}

/// Component size (vertices reachable from `root`), computed once per graph
/// outside any timed region.
pub fn component_size(g: &Graph, root: usize) -> usize {
    g.reachable_from(root).iter().filter(|&&r| r).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::graph::{gen_graph, verify_spanning_tree, GraphKind};
    use crate::wsqueue::Algorithm;

    #[test]
    fn single_thread_tree_is_valid() {
        let g = gen_graph(GraphKind::Torus2d, 9, None, false, 1).unwrap();
        let comp = component_size(&g, 0);
        assert_eq!(comp, 9);
        let cfg = QueueConfig::new(Algorithm::WsWmult, 16);
        let (parents, _) = spanning_tree_run(&g, 0, 1, &cfg, comp, 1);
        assert!(verify_spanning_tree(&g, &parents, 0));
    }

    #[test]
    fn multi_thread_trees_are_valid_for_every_algorithm() {
        let g = gen_graph(GraphKind::Torus2d, 100, None, false, 5).unwrap();
        let comp = component_size(&g, 0);
        for algo in Algorithm::ALL {
            let cfg = QueueConfig::new(algo, g.vertices as u64 + 2);
            for threads in [1, 2, 3] {
                let (parents, _) = spanning_tree_run(&g, 0, threads, &cfg, comp, 7);
                assert!(
                    verify_spanning_tree(&g, &parents, 0),
                    "{algo} with {threads} threads"
                );
            }
        }
    }

    #[test]
    fn disconnected_random_graph_spans_the_root_component() {
        // Sparse random graph: only the root's component must be claimed.
        let g = gen_graph(GraphKind::Random, 60, Some(20), false, 11).unwrap();
        let comp = component_size(&g, 0);
        let cfg = QueueConfig::new(Algorithm::Exact, g.vertices as u64 + 2);
        let (parents, _) = spanning_tree_run(&g, 0, 2, &cfg, comp, 3);
        assert!(verify_spanning_tree(&g, &parents, 0));
        let claimed = parents.iter().filter(|&&p| p != UNCLAIMED).count();
        assert_eq!(claimed, comp);
    }

    #[test]
    fn single_thread_runs_are_deterministic() {
        let g = gen_graph(GraphKind::Torus3d, 27, None, false, 2).unwrap();
        let comp = component_size(&g, 0);
        for algo in Algorithm::ALL {
            let cfg = QueueConfig::new(algo, g.vertices as u64 + 2);
            let (a, _) = spanning_tree_run(&g, 0, 1, &cfg, comp, 9);
            let (b, _) = spanning_tree_run(&g, 0, 1, &cfg, comp, 9);
            assert_eq!(a, b, "{algo}");
        }
    }

    #[test]
    fn single_thread_tree_is_identical_across_fifo_algorithms() {
        // One thread, no contention: every FIFO-extracting algorithm expands
        // vertices in the same breadth-first order. Chase-Lev is excluded:
        // its owner end is LIFO, so its (equally valid) tree differs.
        let g = gen_graph(GraphKind::Torus3d, 27, None, false, 2).unwrap();
        let comp = component_size(&g, 0);
        let fifo = [
            Algorithm::WsMult,
            Algorithm::WsWmult,
            Algorithm::BWsMult,
            Algorithm::BWsWmult,
            Algorithm::Exact,
            Algorithm::IdempotentFifo,
        ];
        let mut trees = Vec::new();
        for algo in fifo {
            let cfg = QueueConfig::new(algo, g.vertices as u64 + 2);
            let (parents, _) = spanning_tree_run(&g, 0, 1, &cfg, comp, 9);
            trees.push(parents);
        }
        for t in &trees[1..] {
            assert_eq!(&trees[0], t);
        }
    }
}
