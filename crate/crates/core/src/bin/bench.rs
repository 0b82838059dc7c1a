//! Benchmark CLI: zero-cost experiments, spanning-tree runs and suite files,
//! all reported as CSV normalized to single-thread Chase-Lev.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use wsmult::bench::{
    self, gen_graph, spanning_tree_bench, zero_cost, CsvRow, GraphKind, ZeroCostMode, CSV_HEADER,
};
use wsmult::shmem::Profile;
use wsmult::wsqueue::{Algorithm, BufferStrategy, QueueConfig};

#[derive(Parser)]
#[command(
    name = "bench",
    about = "Work-stealing benchmark harness",
    version,
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonQueueArgs {
    /// Algorithm id.
    #[arg(long, value_parser = parse_algo)]
    algo: Algorithm,
    /// Task buffer strategy for the relaxed deques.
    #[arg(long, default_value = "segmented", value_parser = parse_buffer)]
    buffer: BufferStrategy,
    /// Segment length (or initial array length for the doubling strategy).
    #[arg(long, default_value_t = 256)]
    segment_len: u64,
    /// Memory ordering profile: seqcst (default, correctness-gated) or
    /// relaxed (benchmark-only).
    #[arg(long, default_value = "seqcst", value_parser = parse_profile)]
    profile: Profile,
    /// RNG seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

fn parse_buffer(s: &str) -> Result<BufferStrategy, String> {
    s.parse()
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<ZeroCostMode, String> {
    s.parse()
}

fn parse_graph(s: &str) -> Result<GraphKind, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// N puts followed by N takes or N steals, with no per-task work.
    ZeroCost {
        #[command(flatten)]
        queue: CommonQueueArgs,
        /// put-take or put-steal.
        #[arg(long, value_parser = parse_mode)]
        mode: ZeroCostMode,
        /// Number of puts.
        #[arg(long, default_value_t = 1_000_000)]
        ops: u64,
        /// Repetitions (fastest and slowest dropped when >= 3).
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
    /// Parallel spanning tree over a generated graph.
    SpanningTree {
        #[command(flatten)]
        queue: CommonQueueArgs,
        /// Graph family.
        #[arg(long, value_parser = parse_graph)]
        graph: GraphKind,
        /// Requested vertex count (tori round to the nearest side^2/side^3).
        #[arg(long, default_value_t = 100_000)]
        vertices: usize,
        /// Edge count for the random family.
        #[arg(long)]
        edges: Option<usize>,
        /// Directed edges.
        #[arg(long, conflicts_with = "undirected")]
        directed: bool,
        /// Undirected edges (the default).
        #[arg(long)]
        undirected: bool,
        /// Worker threads, each owning one deque.
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
    /// Run every experiment in a TOML suite file.
    Suite {
        /// Suite description file.
        #[arg(long)]
        file: PathBuf,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(rows: &[CsvRow], out: Option<&PathBuf>) -> std::io::Result<()> {
    let csv = bench::suite::render_csv(rows);
    match out {
        Some(path) => std::fs::write(path, csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match cli.command {
        Command::ZeroCost {
            queue,
            mode,
            ops,
            reps,
        } => {
            let mk = |algo: Algorithm| QueueConfig {
                buffer: queue.buffer,
                segment_len: queue.segment_len,
                profile: queue.profile,
                ..QueueConfig::new(algo, ops + 2)
            };
            let (base_report, _) = zero_cost(&mk(Algorithm::ChaseLev), mode, ops, reps);
            let baseline = base_report.trimmed_mean;
            let (report, counts) = if queue.algo == Algorithm::ChaseLev {
                (base_report, Vec::new())
            } else {
                zero_cost(&mk(queue.algo), mode, ops, reps)
            };
            let row = CsvRow {
                graph: format!("zero-cost-{}", mode.name()),
                directed: None,
                algorithm: queue.algo,
                buffer: queue.buffer,
                threads: 1,
                trimmed_mean_ms: Some(report.trimmed_mean.as_secs_f64() * 1e3),
                speedup: Some(baseline.as_secs_f64() / report.trimmed_mean.as_secs_f64()),
            };
            println!("{CSV_HEADER}");
            println!("{}", row.to_line());
            for (i, c) in counts.iter().enumerate() {
                eprintln!(
                    "# run {i}: puts={} extracted={} empty={}",
                    c.puts, c.non_empty, c.empty
                );
            }
        }
        Command::SpanningTree {
            queue,
            graph,
            vertices,
            edges,
            directed,
            undirected: _,
            threads,
            reps,
        } => {
            let g = match gen_graph(graph, vertices, edges, directed, queue.seed) {
                Ok(g) => g,
                Err(e) => {
                    eprintln!("error: {e}");
                    std::process::exit(2);
                }
            };
            eprintln!(
                "# {graph}: {} vertices, {} edges, directed={directed}",
                g.vertices,
                g.edge_count()
            );
            let mk = |algo: Algorithm| QueueConfig {
                buffer: queue.buffer,
                segment_len: queue.segment_len,
                profile: queue.profile,
                ..QueueConfig::new(algo, g.vertices as u64 + 2)
            };
            let baseline =
                match spanning_tree_bench(&g, 0, 1, &mk(Algorithm::ChaseLev), reps, queue.seed) {
                    Ok((r, _)) => r.trimmed_mean,
                    Err(e) => {
                        eprintln!("error: {e}");
                        std::process::exit(1);
                    }
                };
            let report = if queue.algo == Algorithm::ChaseLev && threads == 1 {
                baseline
            } else {
                match spanning_tree_bench(&g, 0, threads, &mk(queue.algo), reps, queue.seed) {
                    Ok((r, _)) => r.trimmed_mean,
                    Err(e) => {
                        eprintln!("error: {e}");
                        std::process::exit(1);
                    }
                }
            };
            let row = CsvRow {
                graph: graph.name().to_string(),
                directed: Some(directed),
                algorithm: queue.algo,
                buffer: queue.buffer,
                threads,
                trimmed_mean_ms: Some(report.as_secs_f64() * 1e3),
                speedup: Some(baseline.as_secs_f64() / report.as_secs_f64()),
            };
            println!("{CSV_HEADER}");
            println!("{}", row.to_line());
        }
        Command::Suite { file, out } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", file.display());
                    std::process::exit(2);
                }
            };
            let suite = match bench::suite::SuiteFile::parse(&text) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    std::process::exit(2);
                }
            };
            match bench::suite::run_suite(&suite) {
                Ok((rows, failures)) => {
                    if let Err(e) = emit(&rows, out.as_ref()) {
                        eprintln!("error: cannot write output: {e}");
                        std::process::exit(1);
                    }
                    for f in &failures {
                        eprintln!("# failed cell: {f}");
                    }
                    if !failures.is_empty() {
                        std::process::exit(1);
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    std::process::exit(2);
                }
            }
        }
    }
}
