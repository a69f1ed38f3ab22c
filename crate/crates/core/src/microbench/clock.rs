//! Core clock estimate from a timed chain of dependent integer adds.

use std::time::{Duration, Instant};

const ADDS_PER_TRIP: u64 = 8;

/// Runs `trips` iterations of a loop whose body is a chain of dependent
/// register adds, one cycle each. Register operands keep the chain out of
/// reach of add-immediate elimination at rename.
#[cfg(target_arch = "x86_64")]
#[inline(never)]
fn add_chain(trips: u64) -> u64 {
    let mut x: u64 = 0;
    let mut n = trips;
    // SAFETY: register-only arithmetic.
    unsafe {
        std::arch::asm!(
            "2:",
            "add {x}, {one}",
            "add {x}, {one}",
            "add {x}, {one}",
            "add {x}, {one}",
            "add {x}, {one}",
            "add {x}, {one}",
            "add {x}, {one}",
            "add {x}, {one}",
            "sub {n}, 1",
            "jnz 2b",
            x = inout(reg) x,
            n = inout(reg) n,
            one = in(reg) 1u64,
            options(nomem, nostack),
        );
    }
    let _ = n;
    x
}

#[cfg(not(target_arch = "x86_64"))]
#[inline(never)]
fn add_chain(trips: u64) -> u64 {
    let mut x: u64 = 0;
    for _ in 0..trips * ADDS_PER_TRIP {
        x = std::hint::black_box(x.wrapping_add(1));
    }
    x
}

/// Estimated cycles per second, best of several short runs.
pub fn calibrate_clock_hz() -> f64 {
    // Grow the trip count until one run lasts a few milliseconds.
    let mut trips = 1u64 << 16;
    loop {
        let t = Instant::now();
        std::hint::black_box(add_chain(std::hint::black_box(trips)));
        if t.elapsed() >= Duration::from_millis(5) || trips >= 1 << 34 {
            break;
        }
        trips *= 2;
    }
    let mut best = f64::MAX;
    for _ in 0..5 {
        let t = Instant::now();
        std::hint::black_box(add_chain(std::hint::black_box(trips)));
        best = best.min(t.elapsed().as_secs_f64());
    }
    (trips * ADDS_PER_TRIP) as f64 / best
}

/// Smallest positive step observed between consecutive clock reads.
pub fn timer_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..64 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best
}
