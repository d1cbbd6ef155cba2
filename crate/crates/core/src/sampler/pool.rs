//! Parallel subgraph production through a bounded queue.
//!
//! Workers claim instance indices from a shared counter, sample them, and
//! push results into a bounded channel. The consumer re-orders arrivals by
//! instance index, so the sequence it sees is identical for any worker
//! count.

use std::collections::BTreeMap;
use std::ops::{ControlFlow, Range};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::sync_channel;
use std::thread;

use super::{Sample, Sampler};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolOptions {
    pub threads: usize,
    /// Bounded queue capacity between workers and the consumer.
    pub capacity: usize,
}

impl Default for PoolOptions {
    fn default() -> Self {
        PoolOptions {
            threads: 1,
            capacity: 16,
        }
    }
}

/// Feeds `consume` with samples for every instance in `instances`, in index
/// order. The consumer may stop early with `ControlFlow::Break`; in-flight
/// work is then drained and the workers joined before returning.
pub fn produce_ordered<F, C>(
    sampler: &Sampler<'_, F>,
    instances: Range<u64>,
    options: PoolOptions,
    mut consume: C,
) -> Result<()>
where
    F: Scalar,
    C: FnMut(u64, Sample) -> Result<ControlFlow<()>>,
{
    if options.capacity == 0 {
        return Err(Error::InvalidConfig("queue capacity must be positive".into()));
    }
    if options.threads <= 1 {
        for i in instances {
            if consume(i, sampler.sample(i)?)?.is_break() {
                break;
            }
        }
        return Ok(());
    }

    let next = AtomicU64::new(instances.start);
    let stop = AtomicBool::new(false);
    let end = instances.end;
    thread::scope(|scope| {
        let (tx, rx) = sync_channel::<(u64, Result<Sample>)>(options.capacity);
        for _ in 0..options.threads {
            let tx = tx.clone();
            let (next, stop) = (&next, &stop);
            scope.spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= end || tx.send((i, sampler.sample(i))).is_err() {
                        break;
                    }
                }
            });
        }
        drop(tx);

        let mut pending = BTreeMap::new();
        let mut want = instances.start;
        let mut outcome = Ok(());
        'recv: for (i, sample) in rx.iter() {
            pending.insert(i, sample);
            while let Some(sample) = pending.remove(&want) {
                let flow = sample.and_then(|s| consume(want, s));
                want += 1;
                match flow {
                    Ok(ControlFlow::Continue(())) => {}
                    Ok(ControlFlow::Break(())) => break 'recv,
                    Err(e) => {
                        outcome = Err(e);
                        break 'recv;
                    }
                }
            }
        }
        stop.store(true, Ordering::Relaxed);
        // Unblock any worker parked on a full queue.
        for _ in rx.iter() {}
        outcome
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, Graph};
    use crate::sampler::{SamplerConfig, SamplerKind};

    fn graph() -> Graph<f64> {
        let edges: Vec<_> = (0..40).flat_map(|i| [(i, (i + 1) % 40), (i, (i * 3 + 7) % 40)]).collect();
        build_graph(&edges, 40, false).unwrap()
    }

    fn collect(threads: usize, capacity: usize, range: Range<u64>) -> Vec<(u64, Sample)> {
        let g = graph();
        let s = Sampler::new(&g, SamplerConfig::new(SamplerKind::RandomWalk { r: 4, h: 3 }, 21)).unwrap();
        let mut out = Vec::new();
        produce_ordered(&s, range, PoolOptions { threads, capacity }, |i, sample| {
            out.push((i, sample));
            Ok(ControlFlow::Continue(()))
        })
        .unwrap();
        out
    }

    #[test]
    fn order_is_independent_of_thread_count() {
        let serial = collect(1, 1, 5..105);
        assert_eq!(serial.len(), 100);
        assert_eq!(serial, collect(4, 2, 5..105));
        assert_eq!(serial, collect(8, 64, 5..105));
    }

    #[test]
    fn early_stop_drains_and_joins() {
        let g = graph();
        let s = Sampler::new(&g, SamplerConfig::new(SamplerKind::Node { n: 5 }, 1)).unwrap();
        let mut seen = 0;
        produce_ordered(&s, 0..10_000, PoolOptions { threads: 4, capacity: 2 }, |_, _| {
            seen += 1;
            Ok(if seen == 7 { ControlFlow::Break(()) } else { ControlFlow::Continue(()) })
        })
        .unwrap();
        assert_eq!(seen, 7);
    }

    #[test]
    fn consumer_errors_propagate() {
        let g = graph();
        let s = Sampler::new(&g, SamplerConfig::new(SamplerKind::Node { n: 5 }, 1)).unwrap();
        let r = produce_ordered(&s, 0..100, PoolOptions { threads: 3, capacity: 4 }, |i, _| {
            if i == 10 { Err(Error::NoTrainingNodes) } else { Ok(ControlFlow::Continue(())) }
        });
        assert!(matches!(r, Err(Error::NoTrainingNodes)));
    }
}
