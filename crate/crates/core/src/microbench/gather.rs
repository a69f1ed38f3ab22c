//! Gather latency as a function of how many gathered elements share a cache
//! line.
//!
//! One gather of `width` lanes is issued as one indexed-load group per cache
//! line it touches, the way a hardware gather retires one line per internal
//! step. Every group's indices are XORed with bits of the previous group's
//! loaded values, so the groups form a single dependency chain and the timing
//! reflects latency rather than throughput.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::clock::{calibrate_clock_hz, timer_resolution};
use super::{median, BenchResult, CACHE_LINE_BYTES, FLOATS_PER_LINE};
use crate::error::{Error, Result};

/// Distributions accepted for elements per cache line.
pub const ELEMENTS_PER_LINE: [u32; 5] = [1, 2, 4, 8, 16];

const PATTERN_SEED: u64 = 0x9a7e_5eed;
const TARGET_REP: Duration = Duration::from_micros(300);
const NOISE_LIMIT: f64 = 0.10;

#[repr(C, align(64))]
#[derive(Clone, Copy)]
struct CacheLine([f32; FLOATS_PER_LINE]);

/// Precomputed lane indices, `gather_width` per gather, streaming through a
/// working set in a seeded random line order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatherPattern {
    elements_per_line: u32,
    gather_width: u32,
    working_set_bytes: usize,
    /// Element indices, `gather_width` consecutive entries per gather.
    index_table: Vec<u32>,
}

/// Builds a pattern in which each gather touches `ceil(width / k)` lines.
pub fn gen_gather_pattern(
    elements_per_line: u32,
    width: u32,
    working_set_bytes: usize,
) -> Result<GatherPattern> {
    let k = elements_per_line;
    if !ELEMENTS_PER_LINE.contains(&k) {
        return Err(Error::invalid(format!(
            "elements per line must be one of {ELEMENTS_PER_LINE:?}, got {k}"
        )));
    }
    if !width.is_power_of_two() || width > 64 {
        return Err(Error::invalid(format!(
            "gather width must be a power of two up to 64, got {width}"
        )));
    }
    if !width.is_multiple_of(k) && k < width {
        return Err(Error::invalid(format!(
            "{k} elements per line do not tile a {width}-lane gather"
        )));
    }
    let per_line = k.min(width) as usize;
    let lines_per_gather = (width as usize).div_ceil(per_line);
    let lines = working_set_bytes / CACHE_LINE_BYTES;
    if lines < lines_per_gather {
        return Err(Error::invalid(format!(
            "working set of {working_set_bytes} bytes is smaller than one gather ({lines_per_gather} lines)"
        )));
    }

    let mut order: Vec<u32> = (0..lines as u32).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(PATTERN_SEED));
    let gathers = lines / lines_per_gather;
    // Spread the lanes of one line evenly over its sixteen slots.
    let step = FLOATS_PER_LINE / per_line;
    let mut index_table = Vec::with_capacity(gathers * width as usize);
    for g in order.chunks_exact(lines_per_gather).take(gathers) {
        for lane in 0..width as usize {
            let line = g[lane / per_line] as usize;
            let slot = (lane % per_line) * step;
            index_table.push((line * FLOATS_PER_LINE + slot) as u32);
        }
    }
    Ok(GatherPattern {
        elements_per_line: k,
        gather_width: width,
        working_set_bytes: lines * CACHE_LINE_BYTES,
        index_table,
    })
}

impl GatherPattern {
    pub fn elements_per_line(&self) -> u32 {
        self.elements_per_line
    }

    pub fn gather_width(&self) -> u32 {
        self.gather_width
    }

    /// Working set actually covered, rounded down to whole lines.
    pub fn working_set_bytes(&self) -> usize {
        self.working_set_bytes
    }

    pub fn index_table(&self) -> &[u32] {
        &self.index_table
    }

    pub fn lanes_per_group(&self) -> usize {
        self.elements_per_line.min(self.gather_width) as usize
    }

    /// Indexed-load groups (cache lines) per gather.
    pub fn lines_per_gather(&self) -> usize {
        self.gather_width as usize / self.lanes_per_group()
    }

    pub fn gathers(&self) -> usize {
        self.index_table.len() / self.gather_width as usize
    }

    /// Lane indices of gather `g`.
    pub fn gather(&self, g: usize) -> &[u32] {
        let w = self.gather_width as usize;
        &self.index_table[g * w..(g + 1) * w]
    }
}

/// One pass over every gather, `K` lanes per line group. `bases` holds the
/// first element of each group's line; lane `l` reads slot `l * 16 / K` of it,
/// matching the spread laid out in the index table. The lanes of a group are
/// combined by a balanced OR tree so that the chain cost per group is one load
/// plus `log2 K` ORs. Returns the final chain value, which is zero for a
/// zero-filled buffer.
#[inline(never)]
fn chase<const K: usize>(buf: &[f32], bases: &[u32], passes: usize, mut chain: u32) -> u32 {
    let step = FLOATS_PER_LINE / K;
    for _ in 0..passes {
        for &base in bases {
            let b = (base ^ chain) as usize;
            let line = &buf[b..b + FLOATS_PER_LINE];
            let mut bits = [0u32; K];
            for l in 0..K {
                bits[l] = line[l * step].to_bits();
            }
            let mut n = K;
            while n > 1 {
                n /= 2;
                for l in 0..n {
                    bits[l] = bits[2 * l] | bits[2 * l + 1];
                }
            }
            chain = bits[0];
        }
    }
    chain
}

fn chase_dyn(group: usize, buf: &[f32], bases: &[u32], passes: usize, chain: u32) -> u32 {
    match group {
        1 => chase::<1>(buf, bases, passes, chain),
        2 => chase::<2>(buf, bases, passes, chain),
        4 => chase::<4>(buf, bases, passes, chain),
        8 => chase::<8>(buf, bases, passes, chain),
        16 => chase::<16>(buf, bases, passes, chain),
        _ => unreachable!("group sizes are powers of two up to a cache line"),
    }
}

/// Measures the latency of one gather group and of a full gather.
pub fn run_gather_bench(pat: &GatherPattern, reps: usize) -> Result<BenchResult> {
    if reps == 0 {
        return Err(Error::MeasurementUnreliable(
            "zero repetitions requested".into(),
        ));
    }
    let resolution = timer_resolution();
    if resolution > TARGET_REP / 100 {
        return Err(Error::MeasurementUnreliable(format!(
            "timer resolution {resolution:?} is too coarse for {TARGET_REP:?} repetitions"
        )));
    }
    let lines = pat.working_set_bytes / CACHE_LINE_BYTES;
    let storage = vec![CacheLine([0.0; FLOATS_PER_LINE]); lines];
    // SAFETY: CacheLine is a repr(C) wrapper around [f32; 16].
    let buf = unsafe {
        std::slice::from_raw_parts(storage.as_ptr().cast::<f32>(), lines * FLOATS_PER_LINE)
    };
    let group = pat.lanes_per_group();
    let bases: Vec<u32> = pat.index_table().iter().step_by(group).copied().collect();

    let time = |passes: usize| {
        let t = Instant::now();
        let c = chase_dyn(group, buf, &bases, passes, std::hint::black_box(0));
        let e = t.elapsed();
        std::hint::black_box(c);
        e
    };
    let mut passes = 1;
    while time(passes) < TARGET_REP && passes < 1 << 24 {
        passes *= 2;
    }

    let warmup = reps / 4;
    let per_gather = passes as f64 * pat.gathers() as f64;
    let mut samples = Vec::with_capacity(reps);
    for rep in 0..warmup + reps {
        let ns = time(passes).as_nanos() as f64 / per_gather;
        if rep >= warmup {
            samples.push(ns);
        }
    }
    let noisy = halves_disagree(&samples);
    let ns_full = median(&mut samples);
    let clock_hz = calibrate_clock_hz();
    let full = ns_full * clock_hz / 1e9;
    Ok(BenchResult {
        cycles_per_instruction: Some(full / pat.lines_per_gather() as f64),
        cycles_per_full_gather: Some(full),
        ns_per_full_gather: Some(ns_full),
        bandwidth_bytes_per_sec: None,
        reps,
        warmup_reps: warmup,
        clock_hz,
        noisy,
    })
}

/// True when the medians of the first and second half of the samples differ
/// by more than the noise limit.
fn halves_disagree(samples: &[f64]) -> bool {
    if samples.len() < 2 {
        return false;
    }
    let (a, b) = samples.split_at(samples.len() / 2);
    let (ma, mb) = (median(&mut a.to_vec()), median(&mut b.to_vec()));
    (ma - mb).abs() > NOISE_LIMIT * ma.min(mb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    /// Distinct cache lines touched by one gather, from raw byte addresses.
    fn lines_touched(idx: &[u32]) -> usize {
        idx.iter()
            .map(|&i| i as usize * 4 / 64)
            .collect::<BTreeSet<_>>()
            .len()
    }

    #[test]
    fn full_line_and_scattered_extremes() {
        let p = gen_gather_pattern(16, 16, 64 * 1024).unwrap();
        assert!((0..p.gathers()).all(|g| lines_touched(p.gather(g)) == 1));
        let p = gen_gather_pattern(1, 16, 64 * 1024).unwrap();
        assert!((0..p.gathers()).all(|g| lines_touched(p.gather(g)) == 16));
    }

    #[test]
    fn four_per_line_eight_lanes_touches_two_lines() {
        let p = gen_gather_pattern(4, 8, 32 * 1024).unwrap();
        assert_eq!(p.gathers(), 32 * 1024 / 64 / 2);
        for g in 0..p.gathers() {
            assert_eq!(lines_touched(p.gather(g)), 2);
        }
    }

    #[test]
    fn every_distribution_audited() {
        for width in [8u32, 16] {
            for k in ELEMENTS_PER_LINE {
                let p = gen_gather_pattern(k, width, 48 * 1024).unwrap();
                let expect = width.div_ceil(k) as usize;
                assert_eq!(p.lines_per_gather(), expect);
                let limit = (p.working_set_bytes() / 4) as u32;
                let mut all_lines = BTreeSet::new();
                for g in 0..p.gathers() {
                    let idx = p.gather(g);
                    assert_eq!(lines_touched(idx), expect, "k={k} width={width}");
                    // Each group of consecutive lanes sits in one line.
                    for grp in idx.chunks(p.lanes_per_group()) {
                        assert_eq!(lines_touched(grp), 1);
                    }
                    // No element is loaded twice within one gather.
                    assert_eq!(idx.iter().collect::<BTreeSet<_>>().len(), idx.len());
                    assert!(idx.iter().all(|&i| i < limit));
                    for &i in idx {
                        all_lines.insert(i / 16);
                    }
                }
                // Gathers stream through distinct lines.
                assert_eq!(all_lines.len(), p.gathers() * expect);
            }
        }
    }

    #[test]
    fn rejects_bad_patterns() {
        assert!(gen_gather_pattern(3, 16, 4096).is_err());
        assert!(gen_gather_pattern(32, 16, 4096).is_err());
        assert!(gen_gather_pattern(4, 6, 4096).is_err());
        assert!(gen_gather_pattern(4, 0, 4096).is_err());
        assert!(gen_gather_pattern(1, 16, 512).is_err());
        assert!(gen_gather_pattern(16, 16, 64).is_ok());
    }

    #[test]
    fn pattern_is_reproducible() {
        assert_eq!(
            gen_gather_pattern(2, 16, 8192).unwrap(),
            gen_gather_pattern(2, 16, 8192).unwrap()
        );
    }

    #[test]
    fn zero_reps_is_an_error() {
        let p = gen_gather_pattern(16, 16, 4096).unwrap();
        assert!(matches!(
            run_gather_bench(&p, 0),
            Err(Error::MeasurementUnreliable(_))
        ));
    }

    #[test]
    fn bench_reports_consistent_fields() {
        let p = gen_gather_pattern(4, 16, 16 * 1024).unwrap();
        let r = run_gather_bench(&p, 5).unwrap();
        let per = r.cycles_per_instruction.unwrap();
        let full = r.cycles_per_full_gather.unwrap();
        assert!(per > 0.0);
        assert!(full >= per);
        assert!((full / per - 4.0).abs() < 1e-9);
        assert!(r.reps > r.warmup_reps);
        assert!(r.bandwidth_bytes_per_sec.is_none());
    }

    #[test]
    fn chase_keeps_chain_at_zero() {
        let p = gen_gather_pattern(8, 16, 4096).unwrap();
        let buf = vec![0f32; 4096 / 4];
        let bases: Vec<u32> = p.index_table().iter().step_by(8).copied().collect();
        assert_eq!(chase_dyn(8, &buf, &bases, 3, 0), 0);
        // A nonzero lane reaches the chain through the tree.
        let mut buf = vec![0f32; 16];
        buf[5] = f32::from_bits(3);
        assert_eq!(chase::<16>(&buf, &[0], 1, 0), 3);
        buf[5] = 0.0;
        buf[6] = f32::from_bits(4);
        assert_eq!(chase::<8>(&buf, &[0], 1, 0), 4);
        assert_eq!(chase::<4>(&buf, &[0], 1, 0), 0);
    }

    #[test]
    fn noise_detector() {
        assert!(!halves_disagree(&[1.0, 1.01, 1.0, 0.99]));
        assert!(halves_disagree(&[1.0, 1.0, 2.0, 2.0]));
        assert!(!halves_disagree(&[5.0]));
    }
}
