//! Streaming read-modify-write bandwidth over a shared array.

use std::sync::Barrier;
use std::time::{Duration, Instant};

use super::clock::calibrate_clock_hz;
use super::BenchResult;
use crate::error::{Error, Result};

pub const DEFAULT_UPDATE_REPS: usize = 5;
const TARGET_REP: Duration = Duration::from_millis(20);

#[inline(never)]
fn sweep(chunk: &mut [f32], times: usize) {
    for _ in 0..times {
        for v in chunk.iter_mut() {
            *v = *v * 0.5 + 1.0;
        }
        std::hint::black_box(&mut *chunk);
    }
}

/// Aggregate update bandwidth with the default repetition count.
pub fn run_update_bench(working_set_bytes: usize, threads: usize) -> Result<BenchResult> {
    run_update_bench_reps(working_set_bytes, threads, DEFAULT_UPDATE_REPS)
}

/// Each of `threads` workers owns a disjoint chunk and sweeps it; bytes moved
/// are counted as one read plus one write of the array per sweep. Reports the
/// best repetition.
pub fn run_update_bench_reps(
    working_set_bytes: usize,
    threads: usize,
    reps: usize,
) -> Result<BenchResult> {
    if threads == 0 {
        return Err(Error::invalid("thread count must be at least one"));
    }
    if reps == 0 {
        return Err(Error::MeasurementUnreliable(
            "zero repetitions requested".into(),
        ));
    }
    let len = working_set_bytes / 4;
    if len < threads {
        return Err(Error::invalid(format!(
            "working set of {working_set_bytes} bytes cannot be split over {threads} threads"
        )));
    }
    let mut data = vec![1.0f32; len];

    // Sweeps per repetition, sized from one single-threaded pass.
    let t = Instant::now();
    sweep(&mut data, 1);
    let once = t.elapsed().max(Duration::from_nanos(100));
    let sweeps = (TARGET_REP.as_secs_f64() / once.as_secs_f64())
        .ceil()
        .clamp(1.0, 1e7) as usize;

    let warmup = (reps / 4).max(1).min(reps - 1);
    let total = warmup + reps;
    let chunk = len.div_ceil(threads);
    let start = Barrier::new(threads + 1);
    let done = Barrier::new(threads + 1);
    let mut best = f64::MAX;
    std::thread::scope(|s| {
        for part in data.chunks_mut(chunk) {
            let (start, done) = (&start, &done);
            s.spawn(move || {
                for _ in 0..total {
                    start.wait();
                    sweep(part, sweeps);
                    done.wait();
                }
            });
        }
        for rep in 0..total {
            start.wait();
            let t = Instant::now();
            done.wait();
            let secs = t.elapsed().as_secs_f64();
            if rep >= warmup {
                best = best.min(secs);
            }
        }
    });
    std::hint::black_box(&data);

    let bytes = 2.0 * (len * 4) as f64 * sweeps as f64;
    Ok(BenchResult {
        cycles_per_instruction: None,
        cycles_per_full_gather: None,
        ns_per_full_gather: None,
        bandwidth_bytes_per_sec: Some(bytes / best),
        reps,
        warmup_reps: warmup,
        clock_hz: calibrate_clock_hz(),
        noisy: false,
    })
}
