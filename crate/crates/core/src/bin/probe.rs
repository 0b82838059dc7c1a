// Scratch probe for sizing the exploration corpora; not part of the
// deliverable surface.

use std::collections::HashSet;
use std::time::Instant;
use wsmult::checker::history::{History, WsOp};
use wsmult::checker::search::{check_linearizable, check_set_linearizable, Budget};
use wsmult::checker::spec::{MultSpec, WeakMultSpec};
use wsmult::shmem::explore::{explore_each, Bounds};
use wsmult::shmem::sim::SimMemory;
use wsmult::wsqueue::model::{DequeModel, HeadKind};
use wsmult::wsqueue::Discipline;

fn main() {
    // probe <head:mult|wmult|tree> <puts> <takes> <s1[,s2]> [reduced|full] [check|nocheck]
    let args: Vec<String> = std::env::args().collect();
    let head = match args.get(1).map(|s| s.as_str()).unwrap_or("mult") {
        "mult" => HeadKind::AtomicMax,
        "wmult" => HeadKind::Range,
        "tree" => HeadKind::Tree,
        other => panic!("unknown head {other}"),
    };
    let puts: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3);
    let takes: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(3);
    let steals: Vec<usize> = args
        .get(4)
        .map(|s| s.split(',').map(|x| x.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![3]);
    let reduced = args.get(5).map(|s| s == "reduced").unwrap_or(true);
    let check = args.get(6).map(|s| s == "check").unwrap_or(true);
    let which = format!("{head:?} p{puts} t{takes} s{steals:?}");

    let mut owner: Vec<WsOp> = (1..=puts).map(|i| WsOp::Put(i as u64)).collect();
    owner.extend(std::iter::repeat(WsOp::Take).take(takes));
    let mut scripts = vec![owner];
    for &s in &steals {
        scripts.push(vec![WsOp::Steal; s]);
    }

    let prog = {
        let scripts = scripts.clone();
        move |mem: &mut SimMemory| {
            let model = DequeModel::install(
                mem,
                scripts.len(),
                head,
                Discipline::Plain,
                puts.max(1) as u64,
                16,
            );
            (model, scripts.clone())
        }
    };

    let mut bounds = Bounds {
        processes: 4,
        steps: 128,
        interleavings: None,
        reduced,
        log: false,
        on_retry_cap: wsmult::shmem::explore::RetryCapPolicy::Error,
    };
    bounds.reduced = reduced;

    let t0 = Instant::now();
    let mut distinct: HashSet<(u64, u64)> = HashSet::new();
    let mut checked = 0u64;
    let mut rejected = 0u64;
    let mut inconclusive = 0u64;
    let budget = Budget::default();
    let stats = explore_each(&prog, &bounds, |leaf| {
        let h = History::new(leaf.history.to_vec());
        let canon = h.canonical();
        if distinct.insert(canon.digest()) && check {
            checked += 1;
            let v = match head {
                HeadKind::Range => check_linearizable(&h, &WeakMultSpec, &budget),
                _ => check_set_linearizable(&h, &MultSpec, &budget),
            };
            match v.outcome {
                wsmult::checker::search::Outcome::Accepted => {}
                wsmult::checker::search::Outcome::Rejected => rejected += 1,
                wsmult::checker::search::Outcome::Inconclusive => inconclusive += 1,
            }
        }
        true
    })
    .unwrap();
    println!(
        "{which} reduced={reduced}: interleavings={} steps={} distinct={} checked={checked} rejected={rejected} inconclusive={inconclusive} elapsed={:.2?}",
        stats.interleavings,
        stats.steps,
        distinct.len(),
        t0.elapsed()
    );
}
