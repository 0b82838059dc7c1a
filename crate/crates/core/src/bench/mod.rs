//! Benchmark harness: zero-cost put/take/steal experiments and the parallel
//! spanning tree, with trimmed-mean timing normalized to single-thread
//! Chase-Lev.

pub mod graph;
pub mod spanning;
pub mod suite;

pub use graph::{gen_graph, verify_spanning_tree, Graph, GraphError, GraphKind, UNCLAIMED};
pub use spanning::{component_size, spanning_tree_run};

use crate::wsqueue::{build_queue, Algorithm, QueueConfig};
use std::str::FromStr;
use std::time::{Duration, Instant};

/// Zero-cost experiment shape: N puts followed by N takes or N steals, no
/// per-task work.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroCostMode {
    PutTake,
    PutSteal,
}

impl ZeroCostMode {
    pub fn name(&self) -> &'static str {
        match self {
            ZeroCostMode::PutTake => "put-take",
            ZeroCostMode::PutSteal => "put-steal",
        }
    }
}

impl FromStr for ZeroCostMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "put-take" => Ok(ZeroCostMode::PutTake),
            "put-steal" => Ok(ZeroCostMode::PutSteal),
            other => Err(format!("unknown zero-cost mode `{other}`")),
        }
    }
}

/// Per-run wall times plus the trimmed mean (fastest and slowest runs
/// dropped when at least three were taken).
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub runs: Vec<Duration>,
    pub trimmed_mean: Duration,
    /// Chase-Lev single-thread trimmed mean divided by this report's; 1.0
    /// for the baseline itself.
    pub speedup_vs_chaselev_1t: Option<f64>,
}

impl BenchReport {
    pub fn from_runs(runs: Vec<Duration>) -> Self {
        assert!(!runs.is_empty());
        let trimmed_mean = trimmed_mean(&runs);
        BenchReport {
            runs,
            trimmed_mean,
            speedup_vs_chaselev_1t: None,
        }
    }

    pub fn with_baseline(mut self, baseline: Duration) -> Self {
        self.speedup_vs_chaselev_1t =
            Some(baseline.as_secs_f64() / self.trimmed_mean.as_secs_f64());
        self
    }
}

/// Drops the fastest and slowest runs (when three or more were taken) and
/// averages the rest.
pub fn trimmed_mean(runs: &[Duration]) -> Duration {
    if runs.len() < 3 {
        return runs.iter().sum::<Duration>() / runs.len() as u32;
    }
    let mut sorted: Vec<Duration> = runs.to_vec();
    sorted.sort_unstable();
    let kept = &sorted[1..sorted.len() - 1];
    kept.iter().sum::<Duration>() / kept.len() as u32
}

/// Outcome counters of one zero-cost run, the correctness side-channel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ZeroCostCounts {
    pub puts: u64,
    pub non_empty: u64,
    pub empty: u64,
}

/// One timed zero-cost run on a fresh queue.
pub fn zero_cost_run(
    cfg: &QueueConfig,
    mode: ZeroCostMode,
    ops: u64,
) -> (Duration, ZeroCostCounts) {
    let mut qcfg = cfg.clone();
    qcfg.capacity = ops + 2;
    let (mut owner, mut thieves) = build_queue(&qcfg, 1);
    let mut counts = ZeroCostCounts::default();
    let start = Instant::now();
    for x in 1..=ops {
        owner.put(x).expect("queue sized for the op count");
        counts.puts += 1;
    }
    match mode {
        ZeroCostMode::PutTake => {
            for _ in 0..ops {
                match owner.take() {
                    Some(_) => counts.non_empty += 1,
                    None => counts.empty += 1,
                }
            }
        }
        ZeroCostMode::PutSteal => {
            let thief = &mut thieves[0];
            for _ in 0..ops {
                match thief.steal() {
                    Some(_) => counts.non_empty += 1,
                    None => counts.empty += 1,
                }
            }
        }
    }
    (start.elapsed(), counts)
}

/// Repeated zero-cost experiment.
pub fn zero_cost(
    cfg: &QueueConfig,
    mode: ZeroCostMode,
    ops: u64,
    reps: usize,
) -> (BenchReport, Vec<ZeroCostCounts>) {
    let mut runs = Vec::with_capacity(reps);
    let mut counts = Vec::with_capacity(reps);
    for _ in 0..reps {
        let (t, c) = zero_cost_run(cfg, mode, ops);
        runs.push(t);
        counts.push(c);
    }
    (BenchReport::from_runs(runs), counts)
}

/// Repeated spanning-tree experiment; every run's tree is validated.
pub fn spanning_tree_bench(
    g: &Graph,
    root: usize,
    threads: usize,
    cfg: &QueueConfig,
    reps: usize,
    seed: u64,
) -> Result<(BenchReport, Vec<u32>), String> {
    let comp = component_size(g, root);
    let mut runs = Vec::with_capacity(reps);
    let mut last_parents = Vec::new();
    for rep in 0..reps {
        let (parents, t) =
            spanning_tree_run(g, root, threads, cfg, comp, seed ^ ((rep as u64) << 32));
        if !verify_spanning_tree(g, &parents, root) {
            return Err(format!(
                "invalid spanning tree: algo={} threads={threads} rep={rep}",
                cfg.algorithm
            ));
        }
        runs.push(t);
        last_parents = parents;
    }
    Ok((BenchReport::from_runs(runs), last_parents))
}

/// A row of the CSV report:
/// `graph,directed,algorithm,buffer,threads,trimmed_mean_ms,speedup_vs_chaselev_1t`.
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub graph: String,
    pub directed: Option<bool>,
    pub algorithm: Algorithm,
    pub buffer: crate::wsqueue::BufferStrategy,
    pub threads: usize,
    pub trimmed_mean_ms: Option<f64>,
    pub speedup: Option<f64>,
}

pub const CSV_HEADER: &str =
    "graph,directed,algorithm,buffer,threads,trimmed_mean_ms,speedup_vs_chaselev_1t";

impl CsvRow {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.graph,
            self.directed.map_or("-".to_string(), |d| d.to_string()),
            self.algorithm,
            self.buffer,
            self.threads,
            self.trimmed_mean_ms
                .map_or("NA".to_string(), |m| format!("{m:.3}")),
            self.speedup.map_or("NA".to_string(), |s| format!("{s:.4}")),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wsqueue::BufferStrategy;

    #[test]
    fn trimmed_mean_drops_extremes() {
        let runs: Vec<Duration> = [10, 1, 100, 12, 11]
            .into_iter()
            .map(Duration::from_millis)
            .collect();
        assert_eq!(trimmed_mean(&runs), Duration::from_millis(11));
    }

    #[test]
    fn trimmed_mean_short_runs_average() {
        let runs: Vec<Duration> = [10, 20].into_iter().map(Duration::from_millis).collect();
        assert_eq!(trimmed_mean(&runs), Duration::from_millis(15));
    }

    #[test]
    fn zero_cost_put_take_is_exact_for_wmult() {
        let cfg = QueueConfig::new(Algorithm::WsWmult, 0);
        let (report, counts) = zero_cost(&cfg, ZeroCostMode::PutTake, 1000, 5);
        assert_eq!(report.runs.len(), 5);
        for c in counts {
            assert_eq!(c.puts, 1000);
            assert_eq!(c.non_empty, 1000);
            assert_eq!(c.empty, 0);
        }
    }

    #[test]
    fn zero_cost_put_steal_bounded_extracts_everything() {
        let cfg = QueueConfig::new(Algorithm::BWsWmult, 0);
        let (_, counts) = zero_cost(&cfg, ZeroCostMode::PutSteal, 500, 3);
        for c in counts {
            assert_eq!(c.non_empty, 500);
        }
    }

    #[test]
    fn zero_cost_capacity_error_for_tree_register_build() {
        // The tree-register build rejects puts beyond its capacity; the
        // harness sizes the register to the op count, so an undersized
        // explicit config must fail.
        let mut qcfg = QueueConfig::new(Algorithm::WsMult, 3);
        qcfg.capacity = 3;
        let (mut owner, _) = build_queue(&qcfg, 0);
        for x in 1..=3 {
            owner.put(x).unwrap();
        }
        assert!(owner.put(4).is_err());
    }

    #[test]
    fn csv_row_formatting() {
        let row = CsvRow {
            graph: "torus2d".into(),
            directed: Some(false),
            algorithm: Algorithm::ChaseLev,
            buffer: BufferStrategy::Segmented,
            threads: 1,
            trimmed_mean_ms: Some(12.3456),
            speedup: Some(1.0),
        };
        assert_eq!(
            row.to_line(),
            "torus2d,false,chase-lev,segmented,1,12.346,1.0000"
        );
        let failed = CsvRow {
            trimmed_mean_ms: None,
            speedup: None,
            ..row
        };
        assert!(failed.to_line().ends_with("NA,NA"));
    }
}
