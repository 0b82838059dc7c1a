//! Recording histories of native multi-threaded runs.
//!
//! Each thread logs invocation/response events stamped from a shared atomic
//! counter. Stamps are taken strictly outside the operation call, so if one
//! operation's response stamp precedes another's invocation stamp, the two
//! operations really were non-concurrent.

use crate::checker::history::{Event, History};
use crate::shmem::Pid;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// Per-thread event sink handed to recorded programs.
pub struct EventLogger<O, R> {
    pid: Pid,
    clock: Arc<AtomicU64>,
    events: Vec<Event<O, R>>,
}

impl<O: Copy, R: Copy> EventLogger<O, R> {
    /// Runs `f` as one operation, logging its invocation and response.
    pub fn call(&mut self, op: O, f: impl FnOnce() -> R) -> R {
        let t0 = self.clock.fetch_add(1, Ordering::SeqCst);
        self.events.push(Event::Inv {
            pid: self.pid,
            op,
            time: t0,
        });
        let ret = f();
        let t1 = self.clock.fetch_add(1, Ordering::SeqCst);
        self.events.push(Event::Res {
            pid: self.pid,
            op,
            ret,
            time: t1,
        });
        ret
    }

    pub fn pid(&self) -> Pid {
        self.pid
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("worker thread panicked")]
    WorkerPanic,
}

/// Runs one closure per process on real threads and merges their event logs
/// into a single history ordered by stamp.
pub fn record<O, R>(
    procs: Vec<Box<dyn FnOnce(&mut EventLogger<O, R>) + Send>>,
) -> Result<History<O, R>, RecordError>
where
    O: Copy + Send + 'static,
    R: Copy + Send + 'static,
{
    let clock = Arc::new(AtomicU64::new(0));
    let handles: Vec<_> = procs
        .into_iter()
        .enumerate()
        .map(|(pid, f)| {
            let clock = Arc::clone(&clock);
            std::thread::spawn(move || {
                let mut logger = EventLogger {
                    pid,
                    clock,
                    events: Vec::new(),
                };
                f(&mut logger);
                logger.events
            })
        })
        .collect();
    let mut events = Vec::new();
    for h in handles {
        events.extend(h.join().map_err(|_| RecordError::WorkerPanic)?);
    }
    events.sort_by_key(|e| e.time());
    Ok(History::new(events))
}
