//! Correctness deciders for recorded and explored histories:
//! set-linearizability against the multiplicity specification,
//! linearizability against the weak-multiplicity and register
//! specifications, sequential exactness, and the multiplicity-bound side
//! conditions.

pub mod bounds;
pub mod history;
pub mod search;
pub mod spec;

pub use bounds::{check_multiplicity_bounds, drained, replay_idempotent_counterexample, BoundMode};
pub use history::{History, RegHistory, WsHistory, WsOp, WsRet};
pub use search::{
    check_linearizable, check_set_linearizable, matches_sequential_spec, Budget, Outcome, Verdict,
};
pub use spec::{
    ExactFifoSpec, MaxRegSpec, MultSpec, RangeMaxRegSpec, SeqSpec, SetSeqSpec, WeakMultSpec,
};

/// Runs a single-threaded workload against any owner/thief pair and checks
/// the outputs against the exact FIFO oracle.
pub fn check_sequentially_exact(
    owner: &mut dyn crate::wsqueue::QueueOwner,
    thief: &mut dyn crate::wsqueue::QueueThief,
    workload: &[WsOp],
) -> Verdict {
    let mut run = Vec::new();
    for op in workload {
        match op {
            WsOp::Put(x) => {
                owner.put(*x).expect("workload within queue capacity");
                run.push((0usize, WsOp::Put(*x), WsRet::True));
            }
            WsOp::Take => {
                let ret = match owner.take() {
                    Some(x) => WsRet::Task(x),
                    None => WsRet::Empty,
                };
                run.push((0, WsOp::Take, ret));
            }
            WsOp::Steal => {
                let ret = match thief.steal() {
                    Some(x) => WsRet::Task(x),
                    None => WsRet::Empty,
                };
                run.push((1, WsOp::Steal, ret));
            }
        }
    }
    let ok = matches_sequential_spec(&ExactFifoSpec, 2, &run);
    Verdict {
        outcome: if ok { Outcome::Accepted } else { Outcome::Rejected },
        witness: None,
        stuck: None,
        nodes: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wsqueue::{build_queue, Algorithm, QueueConfig};

    #[test]
    fn ten_puts_then_twelve_takes_match_oracle() {
        let cfg = QueueConfig::new(Algorithm::WsWmult, 16);
        let (mut owner, mut thieves) = build_queue(&cfg, 1);
        let mut workload: Vec<WsOp> = (1..=10).map(WsOp::Put).collect();
        workload.extend(std::iter::repeat(WsOp::Take).take(12));
        let v = check_sequentially_exact(owner.as_mut(), thieves[0].as_mut(), &workload);
        assert!(v.accepted());
    }

    #[test]
    fn steal_only_extraction_matches_oracle() {
        let cfg = QueueConfig::new(Algorithm::WsMult, 16);
        let (mut owner, mut thieves) = build_queue(&cfg, 1);
        let mut workload: Vec<WsOp> = (1..=8).map(WsOp::Put).collect();
        workload.extend(std::iter::repeat(WsOp::Steal).take(10));
        let v = check_sequentially_exact(owner.as_mut(), thieves[0].as_mut(), &workload);
        assert!(v.accepted());
    }
}
