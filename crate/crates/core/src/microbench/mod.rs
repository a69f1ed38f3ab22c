//! Gather-latency and streaming-update microbenchmarks.

mod clock;
mod gather;
mod update;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use clock::{calibrate_clock_hz, timer_resolution};
pub use gather::{gen_gather_pattern, run_gather_bench, GatherPattern, ELEMENTS_PER_LINE};
pub use update::{run_update_bench, run_update_bench_reps, DEFAULT_UPDATE_REPS};

pub const CACHE_LINE_BYTES: usize = 64;
const FLOATS_PER_LINE: usize = CACHE_LINE_BYTES / 4;

/// Outcome of one microbenchmark. Latency fields are set by the gather
/// benchmark, bandwidth by the update benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchResult {
    pub cycles_per_instruction: Option<f64>,
    pub cycles_per_full_gather: Option<f64>,
    pub ns_per_full_gather: Option<f64>,
    pub bandwidth_bytes_per_sec: Option<f64>,
    pub reps: usize,
    pub warmup_reps: usize,
    pub clock_hz: f64,
    /// Set when the two halves of the measured repetitions disagree.
    pub noisy: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchKind {
    Gather,
    Update,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MicrobenchConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elements_per_line: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lanes: Option<u32>,
    pub working_set_bytes: usize,
    pub threads: usize,
    pub reps: usize,
}

/// Line written by `voxelbench microbench --json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MicrobenchRecord {
    pub kind: BenchKind,
    pub config: MicrobenchConfig,
    pub cycles_per_instruction: Option<f64>,
    pub cycles_per_full_gather: Option<f64>,
    /// Bytes per second.
    pub bandwidth: Option<f64>,
    pub clock_hz: f64,
    pub timestamp: String,
    pub ns_per_full_gather: Option<f64>,
    pub warmup_reps: usize,
    pub noisy: bool,
}

impl MicrobenchRecord {
    pub fn new(kind: BenchKind, config: MicrobenchConfig, r: &BenchResult) -> Self {
        Self {
            kind,
            config,
            cycles_per_instruction: r.cycles_per_instruction,
            cycles_per_full_gather: r.cycles_per_full_gather,
            bandwidth: r.bandwidth_bytes_per_sec,
            clock_hz: r.clock_hz,
            timestamp: crate::harness::timestamp_now(),
            ns_per_full_gather: r.ns_per_full_gather,
            warmup_reps: r.warmup_reps,
            noisy: r.noisy,
        }
    }
}

/// Per-core data cache sizes in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheSizes {
    pub l1d: usize,
    pub l2: usize,
    pub l3: Option<usize>,
}

impl CacheSizes {
    /// Reads the sizes Linux reports for cpu0, falling back to 32 KiB / 256 KiB.
    pub fn detect() -> Self {
        let mut sizes = CacheSizes {
            l1d: 32 << 10,
            l2: 256 << 10,
            l3: None,
        };
        let root = Path::new("/sys/devices/system/cpu/cpu0/cache");
        let Ok(entries) = std::fs::read_dir(root) else {
            return sizes;
        };
        for e in entries.flatten() {
            let read =
                |f: &str| std::fs::read_to_string(e.path().join(f)).map(|s| s.trim().to_string());
            let (Ok(level), Ok(kind), Ok(size)) = (read("level"), read("type"), read("size"))
            else {
                continue;
            };
            let Some(bytes) = parse_size(&size) else {
                continue;
            };
            match (level.as_str(), kind.as_str()) {
                ("1", "Data") => sizes.l1d = bytes,
                ("2", _) => sizes.l2 = bytes,
                ("3", _) => sizes.l3 = Some(bytes),
                _ => {}
            }
        }
        sizes
    }

    /// Comfortably inside L1.
    pub fn l1_working_set(&self) -> usize {
        self.l1d / 2
    }

    /// Well beyond L1, well inside L2.
    pub fn l2_working_set(&self) -> usize {
        (self.l2 / 4).max(2 * self.l1d)
    }

    /// Twice the last cache level, at least eight times L2, capped at 1 GiB.
    pub fn memory_working_set(&self) -> usize {
        (8 * self.l2).max(2 * self.l3.unwrap_or(0)).min(1 << 30)
    }
}

/// Parses `4096`, `48K`, `2M` or `1G` into bytes.
pub fn parse_size(s: &str) -> Option<usize> {
    let s = s.trim();
    let (num, mul) = match s.chars().last()? {
        'K' | 'k' => (&s[..s.len() - 1], 1 << 10),
        'M' | 'm' => (&s[..s.len() - 1], 1 << 20),
        'G' | 'g' => (&s[..s.len() - 1], 1 << 30),
        _ => (s, 1),
    };
    num.parse::<usize>().ok().map(|n| n * mul)
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
