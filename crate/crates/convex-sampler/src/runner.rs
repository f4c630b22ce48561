//! Fan-out of independent chains over worker threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use convex_sampler_core::sampler::{drive_chain, SamplerConfig, TelemetryTotals};
use convex_sampler_core::{ConvexBody, Result};

use crate::formats::SampleRecord;

/// Number of worker threads used for `jobs` independent jobs.
pub fn worker_count(jobs: usize) -> usize {
    let cores = thread::available_parallelism().map_or(1, |n| n.get());
    cores.min(jobs).max(1)
}

/// Evaluates `job(i)` for `i in 0..jobs` on a pool of scoped threads and
/// returns the results in index order. The first error (lowest index) wins.
pub fn parallel_map<T, E, F>(jobs: usize, job: F) -> std::result::Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> std::result::Result<T, E> + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<std::result::Result<T, E>>>> =
        Mutex::new((0..jobs).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..worker_count(jobs) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let r = job(i);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// Output of one chain: its start point, every iterate as a record, and
/// its telemetry totals.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub chain: u64,
    pub start: Vec<f64>,
    pub records: Vec<SampleRecord>,
    pub totals: TelemetryTotals,
}

#[derive(Debug, Clone)]
pub struct MultiChainRun {
    pub chains: Vec<ChainOutput>,
    pub totals: TelemetryTotals,
    pub wall_clock: Duration,
}

impl MultiChainRun {
    /// Last iterate of every chain, in chain order.
    pub fn final_points(&self) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| {
                c.records
                    .last()
                    .map_or_else(|| c.start.clone(), |r| r.x.clone())
            })
            .collect()
    }

    pub fn records(&self) -> impl Iterator<Item = &SampleRecord> {
        self.chains.iter().flat_map(|c| c.records.iter())
    }
}

/// Runs chains `0..chains` of `config` concurrently. Chain `i` uses the RNG
/// stream `(config.seed, i)`, so output does not depend on the thread count.
pub fn run_chains<B>(body: &B, config: &SamplerConfig, chains: u64) -> Result<MultiChainRun>
where
    B: ConvexBody + ?Sized,
{
    let clock = Instant::now();
    let outputs = parallel_map(chains as usize, |i| {
        let chain = i as u64;
        let mut records = Vec::with_capacity(config.iterations);
        let (start, totals) = drive_chain(body, config, chain, |iter, x, t| {
            records.push(SampleRecord::new(chain, iter, x, t));
        })?;
        log::debug!("chain {chain} done: {} rejections", totals.total_rejections);
        Ok(ChainOutput {
            chain,
            start,
            records,
            totals,
        })
    })?;
    let mut totals = TelemetryTotals::default();
    for c in &outputs {
        totals.merge(&c.totals);
    }
    Ok(MultiChainRun {
        chains: outputs,
        totals,
        wall_clock: clock.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use convex_sampler_core::bodies::Ball;

    #[test]
    fn parallel_map_keeps_order_and_reports_first_error() {
        let squares: Vec<usize> = parallel_map(50, |i| Ok::<_, ()>(i * i)).unwrap();
        assert_eq!(squares, (0..50).map(|i| i * i).collect::<Vec<_>>());
        let err = parallel_map(10, |i| if i % 4 == 3 { Err(i) } else { Ok(i) });
        assert_eq!(err, Err(3));
    }

    #[test]
    fn chains_are_reproducible_and_totals_add_up() {
        let ball = Ball::new(2, 1.5).unwrap();
        let mut config = SamplerConfig::for_dim(2);
        config.iterations = 25;
        config.seed = 11;
        let a = run_chains(&ball, &config, 3).unwrap();
        let b = run_chains(&ball, &config, 3).unwrap();
        let ra: Vec<_> = a.records().cloned().collect();
        let rb: Vec<_> = b.records().cloned().collect();
        assert_eq!(ra, rb);
        assert_eq!(ra.len(), 75);
        let summed: u64 = ra.iter().map(|r| r.rejections).sum();
        assert_eq!(summed, a.totals.total_rejections);
        let mems: u64 = ra.iter().map(|r| r.mem_calls).sum();
        assert_eq!(mems, a.totals.membership_calls);
        assert_eq!(a.totals.iterations, 75);
    }
}
