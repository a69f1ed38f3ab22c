//! Static instruction-mix bookkeeping and the analytical cycles-per-iteration
//! model of a gather-based line-update kernel.
//!
//! The shipped profiles live in `data/instruction_profiles.json`; users can
//! load their own with [`ProfileSet::from_json`] and push them through the
//! same functions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SHIPPED_PROFILES: &str = include_str!("../data/instruction_profiles.json");
const SHIPPED_REFERENCE: &str = include_str!("../data/reference_measurements.json");

/// Instruction counts of one kernel part, by class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub memory: u32,
    pub shuffle: u32,
    pub arithmetic: u32,
    pub other: u32,
}

impl ClassCounts {
    pub fn total(&self) -> u32 {
        self.memory + self.shuffle + self.arithmetic + self.other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PartCounts {
    pub part1: ClassCounts,
    pub part2: ClassCounts,
    pub part3: ClassCounts,
    pub other: ClassCounts,
}

impl PartCounts {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &ClassCounts)> {
        [
            ("Part 1", &self.part1),
            ("Part 2", &self.part2),
            ("Part 3", &self.part3),
            ("Other", &self.other),
        ]
        .into_iter()
    }

    pub fn total(&self) -> u32 {
        self.iter().map(|(_, c)| c.total()).sum()
    }
}

/// Instruction composition of one vectorised loop iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InstructionProfile {
    pub isa: String,
    pub voxels_per_loop: u32,
    /// Instructions per voxel of the matching scalar build, when one exists.
    pub scalar_instr_per_voxel: Option<u32>,
    pub measured_simd_runtime_efficiency: Option<f64>,
    /// Published loop total, kept to audit the per-class breakdown.
    pub published_total: Option<u32>,
    pub parts: PartCounts,
}

impl InstructionProfile {
    pub fn total(&self) -> u32 {
        self.parts.total()
    }

    /// Instruction-count efficiency against the scalar build, if known.
    pub fn count_efficiency(&self) -> Option<f64> {
        let scalar = self.scalar_instr_per_voxel?;
        instruction_count_efficiency(
            scalar as f64,
            self.total() as f64,
            self.voxels_per_loop as f64,
        )
        .ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub version: u32,
    #[serde(default)]
    pub description: String,
    pub profiles: Vec<InstructionProfile>,
}

impl ProfileSet {
    /// The profiles shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_PROFILES).expect("shipped instruction profiles parse")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: ProfileSet = serde_json::from_str(text)?;
        for p in &set.profiles {
            if p.voxels_per_loop == 0 {
                return Err(Error::invalid(format!(
                    "{}: voxelsPerLoop must be positive",
                    p.isa
                )));
            }
        }
        Ok(set)
    }

    pub fn get(&self, isa: &str) -> Option<&InstructionProfile> {
        self.profiles.iter().find(|p| p.isa == isa)
    }
}

/// Ratio of scalar to vector instruction counts per unit of work:
/// `scalar * lanes / simd_per_loop`, divided by `lanes` so that 1.0 means the
/// vector loop costs as many instructions as one scalar voxel.
pub fn instruction_count_efficiency(
    scalar_per_voxel: f64,
    simd_per_loop: f64,
    lanes: f64,
) -> Result<f64> {
    if !(scalar_per_voxel > 0.0 && simd_per_loop > 0.0 && lanes > 0.0) {
        return Err(Error::invalid(format!(
            "instruction counts and lanes must be positive, got ({scalar_per_voxel}, {simd_per_loop}, {lanes})"
        )));
    }
    let speedup_bound = scalar_per_voxel * lanes / simd_per_loop;
    Ok(speedup_bound / lanes)
}

/// Achieved speedup per SIMD lane.
pub fn simd_runtime_efficiency(speedup: f64, lanes: u32) -> Result<f64> {
    if !(speedup > 0.0) || lanes == 0 {
        return Err(Error::invalid(format!(
            "need speedup > 0 and lanes > 0, got ({speedup}, {lanes})"
        )));
    }
    Ok(speedup / lanes as f64)
}

/// Inputs of the cycles-per-iteration model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CycleModelInputs {
    /// Cycles of the same loop with gathers removed.
    pub base_cycles_per_iter: f64,
    pub gathers_per_iter: f64,
    pub latency_per_gather_l1: f64,
    pub l1_hit_fraction: f64,
    pub bytes_per_missed_line: f64,
    /// Bytes per cycle.
    pub effective_l2_bandwidth: f64,
}

impl CycleModelInputs {
    pub fn new(
        base_cycles_per_iter: f64,
        gathers_per_iter: f64,
        latency_per_gather_l1: f64,
        l1_hit_fraction: f64,
        bytes_per_missed_line: f64,
        effective_l2_bandwidth: f64,
    ) -> Self {
        Self {
            base_cycles_per_iter,
            gathers_per_iter,
            latency_per_gather_l1,
            l1_hit_fraction,
            bytes_per_missed_line,
            effective_l2_bandwidth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("baseCyclesPerIter", self.base_cycles_per_iter),
            ("gathersPerIter", self.gathers_per_iter),
            ("latencyPerGatherL1", self.latency_per_gather_l1),
            ("bytesPerMissedLine", self.bytes_per_missed_line),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !(self.effective_l2_bandwidth.is_finite() && self.effective_l2_bandwidth > 0.0) {
            return Err(Error::invalid(format!(
                "effectiveL2Bandwidth must be positive, got {}",
                self.effective_l2_bandwidth
            )));
        }
        if !(0.0..=1.0).contains(&self.l1_hit_fraction) {
            return Err(Error::invalid(format!(
                "l1HitFraction must lie in [0, 1], got {}",
                self.l1_hit_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CycleBreakdown {
    pub base_cycles: f64,
    pub gather_cycles: f64,
    pub l2_penalty_cycles: f64,
    pub total_cycles: f64,
}

impl CycleBreakdown {
    /// Fraction of the total spent in gathers, L2 traffic included.
    pub fn gather_share(&self) -> f64 {
        if self.total_cycles == 0.0 {
            return 0.0;
        }
        (self.gather_cycles + self.l2_penalty_cycles) / self.total_cycles
    }
}

/// Base cycles plus L1 gather latency plus the cost of streaming missed lines
/// from L2 at the effective bandwidth.
pub fn knc_cycle_model(m: &CycleModelInputs) -> Result<CycleBreakdown> {
    m.validate()?;
    let gather_cycles = m.gathers_per_iter * m.latency_per_gather_l1;
    let missed_bytes = m.gathers_per_iter * m.bytes_per_missed_line * (1.0 - m.l1_hit_fraction);
    let l2_penalty_cycles = missed_bytes / m.effective_l2_bandwidth;
    Ok(CycleBreakdown {
        base_cycles: m.base_cycles_per_iter,
        gather_cycles,
        l2_penalty_cycles,
        total_cycles: m.base_cycles_per_iter + gather_cycles + l2_penalty_cycles,
    })
}

/// Bytes per cycle implied by the latency gap between an L2-resident and an
/// L1-resident gather.
pub fn effective_l2_bandwidth(lat_l2: f64, lat_l1: f64, line_bytes: f64) -> Result<f64> {
    let gap = lat_l2 - lat_l1;
    if !(gap > 0.0) || !(line_bytes > 0.0) {
        return Err(Error::invalid(format!(
            "need latL2 > latL1 and lineBytes > 0, got ({lat_l2}, {lat_l1}, {line_bytes})"
        )));
    }
    Ok(line_bytes / gap)
}

/// One row of the archived gather latency table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GatherLatencyRecord {
    pub microarchitecture: String,
    pub gather_width: u32,
    pub cache_level: String,
    pub elements_per_line: u32,
    pub cycles_per_instruction: f64,
    pub cycles_per_full_gather: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UpdateBandwidthRecord {
    pub microarchitecture: String,
    pub model: String,
    pub peak_bytes_per_sec: f64,
    pub measured_bytes_per_sec: f64,
    pub fraction_of_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CycleModelRecord {
    pub microarchitecture: String,
    pub static_estimate_gatherless_cycles: f64,
    pub inputs: CycleModelInputs,
    #[serde(rename = "publishedL1OnlyCycles")]
    pub published_l1_only_cycles: f64,
    pub published_total_cycles: f64,
    pub published_gather_cycles: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParallelEfficiencyRecord {
    pub microarchitecture: String,
    pub cores: u32,
    pub efficiency: f64,
}

/// Published hardware measurements, for side-by-side output only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReferenceData {
    pub version: u32,
    #[serde(default)]
    pub description: String,
    pub gather_latency: Vec<GatherLatencyRecord>,
    pub update_bandwidth: Vec<UpdateBandwidthRecord>,
    pub cycle_model: CycleModelRecord,
    pub parallel_efficiency: Vec<ParallelEfficiencyRecord>,
}

impl ReferenceData {
    pub fn shipped() -> Self {
        serde_json::from_str(SHIPPED_REFERENCE).expect("shipped reference data parses")
    }

    /// Archived latency for one microarchitecture, cache level and distribution.
    pub fn gather_latency(
        &self,
        uarch: &str,
        level: &str,
        elements_per_line: u32,
    ) -> Option<&GatherLatencyRecord> {
        self.gather_latency.iter().find(|r| {
            r.microarchitecture == uarch
                && r.cache_level == level
                && r.elements_per_line == elements_per_line
        })
    }
}

/// Plain-text rendering of the instruction composition and efficiency tables.
pub fn render_tables(set: &ProfileSet) -> String {
    let mut out = String::new();
    let col = 10;
    let _ = write!(out, "{:<8}{:<12}", "", "Type");
    for p in &set.profiles {
        let _ = write!(out, "{:>col$}", p.isa);
    }
    out.push('\n');

    let classes: [(&str, fn(&ClassCounts) -> u32); 4] = [
        ("Memory", |c| c.memory),
        ("Shuffle", |c| c.shuffle),
        ("Arith.", |c| c.arithmetic),
        ("Other", |c| c.other),
    ];
    for part in 0..4 {
        let name = ["Part 1", "Part 2", "Part 3", "Other"][part];
        let pick = |p: &InstructionProfile| *p.parts.iter().nth(part).unwrap().1;
        let mut first = true;
        for (class, get) in classes {
            if set.profiles.iter().all(|p| get(&pick(p)) == 0) {
                continue;
            }
            let _ = write!(out, "{:<8}{:<12}", if first { name } else { "" }, class);
            for p in &set.profiles {
                let _ = write!(out, "{:>col$}", get(&pick(p)));
            }
            out.push('\n');
            first = false;
        }
        let _ = write!(out, "{:<8}{:<12}", if first { name } else { "" }, "All");
        for p in &set.profiles {
            let _ = write!(out, "{:>col$}", pick(p).total());
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<20}", "Total");
    for p in &set.profiles {
        let _ = write!(out, "{:>col$}", p.total());
    }
    out.push_str("\n\n");

    let compared: Vec<_> = set
        .profiles
        .iter()
        .filter(|p| p.scalar_instr_per_voxel.is_some())
        .collect();
    let _ = write!(out, "{:<30}", "");
    for p in &compared {
        let _ = write!(out, "{:>col$}", p.isa);
    }
    out.push('\n');
    let rows: [(&str, &dyn Fn(&InstructionProfile) -> String); 5] = [
        ("Voxels per vectorized loop", &|p| {
            p.voxels_per_loop.to_string()
        }),
        ("Instr. per loop (SIMD)", &|p| p.total().to_string()),
        ("Instr. per voxel (scalar)", &|p| {
            p.scalar_instr_per_voxel.unwrap().to_string()
        }),
        ("Instr. count efficiency", &|p| pct(p.count_efficiency())),
        ("SIMD runtime efficiency", &|p| {
            pct(p.measured_simd_runtime_efficiency)
        }),
    ];
    for (label, cell) in rows {
        let _ = write!(out, "{label:<30}");
        for p in &compared {
            let _ = write!(out, "{:>col$}", cell(p));
        }
        out.push('\n');
    }
    out
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |e| format!("{:.0}%", e * 100.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn published() -> CycleModelInputs {
        CycleModelInputs::new(37.5, 16.0, 3.7, 0.885, 64.0, 11.85)
    }

    #[test]
    fn shipped_profiles_match_published_totals() {
        let set = ProfileSet::shipped();
        let expected = [
            ("SSE", 73),
            ("AVX", 92),
            ("AVX2", 49),
            ("AVX/FMA3", 82),
            ("IMCI", 77),
        ];
        assert_eq!(set.profiles.len(), expected.len());
        for (isa, total) in expected {
            let p = set.get(isa).unwrap();
            assert_eq!(p.total(), total, "{isa}");
            assert_eq!(p.published_total, Some(total));
        }
    }

    #[test]
    fn shipped_part_subtotals() {
        let set = ProfileSet::shipped();
        let subtotals = [
            ("SSE", [21, 26, 22, 4]),
            ("AVX", [20, 46, 22, 4]),
            ("AVX2", [12, 16, 17, 4]),
            ("AVX/FMA3", [15, 46, 18, 3]),
            ("IMCI", [15, 40, 14, 8]),
        ];
        for (isa, parts) in subtotals {
            let p = set.get(isa).unwrap();
            let got: Vec<u32> = p.parts.iter().map(|(_, c)| c.total()).collect();
            assert_eq!(got, parts, "{isa}");
        }
    }

    #[test]
    fn count_efficiency_of_shipped_profiles() {
        let set = ProfileSet::shipped();
        for (isa, pct) in [
            ("SSE", 78.0),
            ("AVX", 50.0),
            ("AVX2", 84.0),
            ("AVX/FMA3", 56.0),
        ] {
            let e = set.get(isa).unwrap().count_efficiency().unwrap();
            assert!((e * 100.0 - pct).abs() <= 1.0, "{isa}: {e}");
        }
        assert_eq!(set.get("IMCI").unwrap().count_efficiency(), None);
    }

    #[test]
    fn count_efficiency_examples() {
        assert!((instruction_count_efficiency(57.0, 73.0, 4.0).unwrap() - 0.78).abs() < 0.005);
        assert!((instruction_count_efficiency(46.0, 92.0, 8.0).unwrap() - 0.50).abs() < 1e-12);
        assert_eq!(instruction_count_efficiency(41.0, 41.0, 1.0).unwrap(), 1.0);
        assert!(instruction_count_efficiency(41.0, 0.0, 1.0).is_err());
        assert!(instruction_count_efficiency(41.0, 41.0, 0.0).is_err());
    }

    #[test]
    fn runtime_efficiency_examples() {
        assert!((simd_runtime_efficiency(6.56, 8).unwrap() - 0.82).abs() < 1e-12);
        assert!((simd_runtime_efficiency(3.28, 4).unwrap() - 0.82).abs() < 1e-12);
        assert_eq!(simd_runtime_efficiency(8.0, 8).unwrap(), 1.0);
        assert!(simd_runtime_efficiency(0.0, 8).is_err());
        assert!(simd_runtime_efficiency(2.0, 0).is_err());
    }

    #[test]
    fn published_cycle_model() {
        let b = knc_cycle_model(&published()).unwrap();
        assert!((b.gather_cycles - 59.2).abs() < 1e-9);
        // 16 * 64 * 0.115 / 11.85
        assert!((b.l2_penalty_cycles - 9.93755).abs() < 1e-4);
        assert!((b.total_cycles - 107.0).abs() <= 1.0, "{}", b.total_cycles);
        assert!(b.gather_share() >= 0.6);
        // 69 of 107 cycles attributed to gathering.
        assert!((b.gather_cycles + b.l2_penalty_cycles - 69.0).abs() < 0.5);
    }

    #[test]
    fn all_hits_and_no_gathers() {
        let mut m = published();
        m.l1_hit_fraction = 1.0;
        let b = knc_cycle_model(&m).unwrap();
        assert_eq!(b.l2_penalty_cycles, 0.0);
        assert!((b.total_cycles - 96.7).abs() < 1e-9);
        assert_eq!(b.total_cycles.round(), 97.0);

        m.gathers_per_iter = 0.0;
        assert_eq!(knc_cycle_model(&m).unwrap().total_cycles, 37.5);
    }

    #[test]
    fn cycle_model_rejects_bad_inputs() {
        let mut m = published();
        m.l1_hit_fraction = 1.5;
        assert!(knc_cycle_model(&m).is_err());
        let mut m = published();
        m.effective_l2_bandwidth = 0.0;
        assert!(knc_cycle_model(&m).is_err());
        let mut m = published();
        m.base_cycles_per_iter = -1.0;
        assert!(knc_cycle_model(&m).is_err());
    }

    #[test]
    fn l2_bandwidth_examples() {
        assert!((effective_l2_bandwidth(9.1, 3.7, 64.0).unwrap() - 11.85).abs() < 0.01);
        assert!((effective_l2_bandwidth(8.6, 2.9, 64.0).unwrap() - 11.23).abs() < 0.01);
        assert!((effective_l2_bandwidth(6.0, 3.0, 64.0).unwrap() - 64.0 / 3.0).abs() < 1e-12);
        assert!(effective_l2_bandwidth(3.7, 3.7, 64.0).is_err());
        assert!(effective_l2_bandwidth(3.0, 3.7, 64.0).is_err());
    }

    #[test]
    fn reference_data_consistency() {
        let r = ReferenceData::shipped();
        assert_eq!(r.gather_latency.len(), 18);
        let row = r.gather_latency("Knights Corner", "L1", 16).unwrap();
        assert_eq!(row.cycles_per_instruction, 9.0);
        // Full-set time is instruction latency times lines touched.
        for rec in r
            .gather_latency
            .iter()
            .filter(|r| r.cycles_per_full_gather.is_some())
        {
            let lines = rec.gather_width.div_ceil(rec.elements_per_line) as f64;
            assert!(
                (rec.cycles_per_instruction * lines - rec.cycles_per_full_gather.unwrap()).abs()
                    < 1e-9
            );
        }
        let bw = effective_l2_bandwidth(
            r.gather_latency("Knights Corner", "L2", 4)
                .unwrap()
                .cycles_per_instruction,
            r.gather_latency("Knights Corner", "L1", 4)
                .unwrap()
                .cycles_per_instruction,
            64.0,
        )
        .unwrap();
        assert!((bw - r.cycle_model.inputs.effective_l2_bandwidth).abs() < 0.01);
        let b = knc_cycle_model(&r.cycle_model.inputs).unwrap();
        assert!((b.total_cycles - r.cycle_model.published_total_cycles).abs() <= 1.0);
        assert_eq!(r.cycle_model.static_estimate_gatherless_cycles, 34.0);
        assert!(r.parallel_efficiency.iter().all(|p| p.efficiency == 0.93));
        // Published fractions are rounded to whole percent.
        for u in &r.update_bandwidth {
            assert!(
                (u.measured_bytes_per_sec / u.peak_bytes_per_sec - u.fraction_of_peak).abs()
                    < 0.015
            );
        }
    }

    #[test]
    fn user_profiles_load_and_validate() {
        let text = r#"{"version":1,"profiles":[{"isa":"mine","voxelsPerLoop":4,
            "scalarInstrPerVoxel":10,"measuredSimdRuntimeEfficiency":null,"publishedTotal":null,
            "parts":{"part1":{"memory":1,"shuffle":0,"arithmetic":2,"other":0},
                     "part2":{"memory":3,"shuffle":1,"arithmetic":0,"other":0},
                     "part3":{"memory":1,"shuffle":0,"arithmetic":2,"other":0},
                     "other":{"memory":0,"shuffle":0,"arithmetic":0,"other":1}}}]}"#;
        let set = ProfileSet::from_json(text).unwrap();
        assert_eq!(set.profiles[0].total(), 11);
        assert!(
            ProfileSet::from_json(&text.replace("\"voxelsPerLoop\":4", "\"voxelsPerLoop\":0"))
                .is_err()
        );
        assert!(ProfileSet::from_json("{").is_err());
    }

    #[test]
    fn tables_render_every_isa() {
        let text = render_tables(&ProfileSet::shipped());
        for needle in [
            "SSE", "IMCI", "73", "92", "49", "82", "77", "78%", "50%", "84%", "56%", "82%", "33%",
        ] {
            assert!(text.contains(needle), "missing {needle}:\n{text}");
        }
    }

    fn inputs() -> impl Strategy<Value = CycleModelInputs> {
        (
            1.0..100.0f64,
            0.0..64.0f64,
            0.5..20.0f64,
            0.0..=1.0f64,
            8.0..128.0f64,
            1.0..64.0f64,
        )
            .prop_map(|(a, b, c, d, e, f)| CycleModelInputs::new(a, b, c, d, e, f))
    }

    proptest! {
        #[test]
        fn total_is_sum_of_parts(m in inputs()) {
            let b = knc_cycle_model(&m).unwrap();
            prop_assert!((b.base_cycles + b.gather_cycles + b.l2_penalty_cycles - b.total_cycles).abs() < 1e-9);
            prop_assert!(b.total_cycles >= m.base_cycles_per_iter);
            prop_assert!((0.0..=1.0).contains(&b.gather_share()));
        }

        #[test]
        fn total_is_monotone_in_each_input(m in inputs(), bump in 0.01..5.0f64) {
            let t0 = knc_cycle_model(&m).unwrap().total_cycles;
            let increasing: [fn(&mut CycleModelInputs, f64); 4] = [
                |m, d| m.base_cycles_per_iter += d,
                |m, d| m.gathers_per_iter += d,
                |m, d| m.latency_per_gather_l1 += d,
                |m, d| m.bytes_per_missed_line += d,
            ];
            for f in increasing {
                let mut n = m;
                f(&mut n, bump);
                prop_assert!(knc_cycle_model(&n).unwrap().total_cycles >= t0);
            }
            let mut n = m;
            n.l1_hit_fraction = (m.l1_hit_fraction + bump / 10.0).min(1.0);
            prop_assert!(knc_cycle_model(&n).unwrap().total_cycles <= t0);
            let mut n = m;
            n.effective_l2_bandwidth += bump;
            prop_assert!(knc_cycle_model(&n).unwrap().total_cycles <= t0);
        }

        #[test]
        fn count_efficiency_ignores_lane_factor(s in 1.0..200.0f64, v in 1.0..200.0f64, lanes in 1u32..64) {
            let e = instruction_count_efficiency(s, v, lanes as f64).unwrap();
            prop_assert!((e - s / v).abs() <= 1e-12 * (s / v));
        }
    }
}
