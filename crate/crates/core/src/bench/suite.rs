//! Suite files: batches of experiments described in TOML, emitted as CSV.
//!
//! ```toml
//! seed = 1
//! reps = 5
//!
//! [[spanning_tree]]
//! graph = "torus2d"
//! vertices = 100000
//! directed = false
//! algos = ["chase-lev", "ws-wmult"]
//! threads = [1, 2, 4]
//!
//! [[zero_cost]]
//! mode = "put-take"
//! ops = 1000000
//! algos = ["chase-lev", "ws-wmult"]
//! ```

use super::{
    gen_graph, spanning_tree_bench, zero_cost, CsvRow, GraphKind, ZeroCostMode, CSV_HEADER,
};
use crate::wsqueue::{Algorithm, BufferStrategy, QueueConfig};
use serde::Deserialize;
use std::time::Duration;

#[derive(Debug, Clone, Deserialize)]
pub struct SuiteFile {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub spanning_tree: Vec<SpanningExperiment>,
    #[serde(default)]
    pub zero_cost: Vec<ZeroCostExperiment>,
}

fn default_seed() -> u64 {
    1
}

fn default_reps() -> usize {
    5
}

fn default_buffers() -> Vec<String> {
    vec!["segmented".to_string()]
}

fn default_vertices() -> usize {
    100_000
}

#[derive(Debug, Clone, Deserialize)]
pub struct SpanningExperiment {
    pub graph: String,
    #[serde(default = "default_vertices")]
    pub vertices: usize,
    pub edges: Option<usize>,
    #[serde(default)]
    pub directed: bool,
    pub algos: Vec<String>,
    #[serde(default = "default_buffers")]
    pub buffers: Vec<String>,
    pub threads: Vec<usize>,
    #[serde(default = "default_segment_len")]
    pub segment_len: u64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ZeroCostExperiment {
    pub mode: String,
    pub ops: u64,
    pub algos: Vec<String>,
    #[serde(default = "default_buffers")]
    pub buffers: Vec<String>,
    #[serde(default = "default_segment_len")]
    pub segment_len: u64,
}

fn default_segment_len() -> u64 {
    crate::taskbuf::DEFAULT_SEGMENT_LEN
}

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("suite file does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("bad field: {0}")]
    BadField(String),
}

impl SuiteFile {
    pub fn parse(text: &str) -> Result<Self, SuiteError> {
        Ok(toml::from_str(text)?)
    }
}

/// Runs a whole suite. Cells that fail are emitted as rows with `NA`
/// timing columns and the suite continues; the error strings come back in
/// the second component.
pub fn run_suite(suite: &SuiteFile) -> Result<(Vec<CsvRow>, Vec<String>), SuiteError> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();

    for exp in &suite.spanning_tree {
        let kind: GraphKind = exp
            .graph
            .parse()
            .map_err(SuiteError::BadField)?;
        let graph = match gen_graph(kind, exp.vertices, exp.edges, exp.directed, suite.seed) {
            Ok(g) => g,
            Err(e) => {
                failures.push(format!("graph {}: {e}", exp.graph));
                continue;
            }
        };
        // The normalization divisor: single-thread Chase-Lev on this graph.
        let base_cfg = QueueConfig {
            segment_len: exp.segment_len,
            ..QueueConfig::new(Algorithm::ChaseLev, graph.vertices as u64 + 2)
        };
        let baseline =
            match spanning_tree_bench(&graph, 0, 1, &base_cfg, suite.reps, suite.seed) {
                Ok((report, _)) => report.trimmed_mean,
                Err(e) => {
                    failures.push(format!("baseline on {}: {e}", exp.graph));
                    Duration::ZERO
                }
            };
        for algo_s in &exp.algos {
            let algorithm: Algorithm = algo_s.parse().map_err(SuiteError::BadField)?;
            for buffer_s in &exp.buffers {
                let buffer: BufferStrategy = buffer_s.parse().map_err(SuiteError::BadField)?;
                for &threads in &exp.threads {
                    let cfg = QueueConfig {
                        buffer,
                        segment_len: exp.segment_len,
                        ..QueueConfig::new(algorithm, graph.vertices as u64 + 2)
                    };
                    let mut row = CsvRow {
                        graph: exp.graph.clone(),
                        directed: Some(exp.directed),
                        algorithm,
                        buffer,
                        threads,
                        trimmed_mean_ms: None,
                        speedup: None,
                    };
                    // The baseline cell reuses its own measurement, so its
                    // speedup is exactly 1.
                    if algorithm == Algorithm::ChaseLev
                        && threads == 1
                        && baseline > Duration::ZERO
                    {
                        row.trimmed_mean_ms = Some(baseline.as_secs_f64() * 1e3);
                        row.speedup = Some(1.0);
                        rows.push(row);
                        continue;
                    }
                    match spanning_tree_bench(&graph, 0, threads, &cfg, suite.reps, suite.seed)
                    {
                        Ok((report, _)) => {
                            row.trimmed_mean_ms =
                                Some(report.trimmed_mean.as_secs_f64() * 1e3);
                            if baseline > Duration::ZERO {
                                row.speedup = Some(
                                    baseline.as_secs_f64()
                                        / report.trimmed_mean.as_secs_f64(),
                                );
                            }
                        }
                        Err(e) => failures.push(e),
                    }
                    rows.push(row);
                }
            }
        }
    }

    for exp in &suite.zero_cost {
        let mode: ZeroCostMode = exp.mode.parse().map_err(SuiteError::BadField)?;
        let base_cfg = QueueConfig {
            segment_len: exp.segment_len,
            ..QueueConfig::new(Algorithm::ChaseLev, exp.ops + 2)
        };
        let (base_report, _) = zero_cost(&base_cfg, mode, exp.ops, suite.reps);
        let baseline = base_report.trimmed_mean;
        for algo_s in &exp.algos {
            let algorithm: Algorithm = algo_s.parse().map_err(SuiteError::BadField)?;
            for buffer_s in &exp.buffers {
                let buffer: BufferStrategy = buffer_s.parse().map_err(SuiteError::BadField)?;
                if algorithm == Algorithm::ChaseLev {
                    rows.push(CsvRow {
                        graph: format!("zero-cost-{}", mode.name()),
                        directed: None,
                        algorithm,
                        buffer,
                        threads: 1,
                        trimmed_mean_ms: Some(baseline.as_secs_f64() * 1e3),
                        speedup: Some(1.0),
                    });
                    continue;
                }
                let cfg = QueueConfig {
                    buffer,
                    segment_len: exp.segment_len,
                    ..QueueConfig::new(algorithm, exp.ops + 2)
                };
                let (report, _) = zero_cost(&cfg, mode, exp.ops, suite.reps);
                rows.push(CsvRow {
                    graph: format!("zero-cost-{}", mode.name()),
                    directed: None,
                    algorithm,
                    buffer,
                    threads: 1,
                    trimmed_mean_ms: Some(report.trimmed_mean.as_secs_f64() * 1e3),
                    speedup: Some(
                        baseline.as_secs_f64() / report.trimmed_mean.as_secs_f64(),
                    ),
                });
            }
        }
    }

    Ok((rows, failures))
}

/// Renders header plus rows.
pub fn render_csv(rows: &[CsvRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL_SUITE: &str = r#"
seed = 7
reps = 3

[[spanning_tree]]
graph = "torus2d"
vertices = 64
algos = ["chase-lev", "ws-wmult"]
threads = [1, 2]

[[zero_cost]]
mode = "put-take"
ops = 2000
algos = ["ws-wmult"]
"#;

    #[test]
    fn suite_parses_and_runs() {
        let suite = SuiteFile::parse(SMALL_SUITE).unwrap();
        assert_eq!(suite.reps, 3);
        let (rows, failures) = run_suite(&suite).unwrap();
        assert!(failures.is_empty(), "{failures:?}");
        // 2 algorithms x 2 thread counts + 1 zero-cost row.
        assert_eq!(rows.len(), 5);
        let csv = render_csv(&rows);
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn chase_lev_single_thread_speedup_is_one() {
        let suite = SuiteFile::parse(SMALL_SUITE).unwrap();
        let (rows, _) = run_suite(&suite).unwrap();
        let base = rows
            .iter()
            .find(|r| r.algorithm == Algorithm::ChaseLev && r.threads == 1)
            .unwrap();
        assert_eq!(base.speedup, Some(1.0));
    }

    #[test]
    fn same_seed_gives_identical_non_timing_columns() {
        let suite = SuiteFile::parse(SMALL_SUITE).unwrap();
        let (a, _) = run_suite(&suite).unwrap();
        let (b, _) = run_suite(&suite).unwrap();
        let strip = |rows: &[CsvRow]| -> Vec<String> {
            rows.iter()
                .map(|r| {
                    format!(
                        "{},{:?},{},{},{}",
                        r.graph, r.directed, r.algorithm, r.buffer, r.threads
                    )
                })
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn bad_suite_is_rejected() {
        assert!(SuiteFile::parse("nonsense = [").is_err());
        let bad_algo = r#"
[[zero_cost]]
mode = "put-take"
ops = 10
algos = ["quantum"]
"#;
        let suite = SuiteFile::parse(bad_algo).unwrap();
        assert!(run_suite(&suite).is_err());
    }
}
