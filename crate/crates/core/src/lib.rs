//! Back-projection kernel laboratory.
//!
//! * [`geometry`]: projection matrices, circular trajectories, the
//!   voxel-to-detector mapping and forward splatting.
//! * [`backproject`]: the scalar reference kernel and lane-generic kernels
//!   with conditional, gather and pairwise fetch strategies.
//! * [`microbench`]: gather latency and streaming update benchmarks.
//! * [`costmodel`]: instruction-count efficiencies and the analytical cycle
//!   model for gather-bound kernels.
//! * [`harness`]: dataset files, synthetic phantoms, timed multi-threaded
//!   reconstructions and result records.

pub mod backproject;
pub mod costmodel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod microbench;

pub use backproject::{
    backproject_kernel, backproject_reference, compute_clip_mask, fast_reciprocal, ClipMask,
    FetchStrategy, KernelConfig, LaneWidth, ProjectionImage, ReciprocalMode, Volume,
};
pub use costmodel::{
    effective_l2_bandwidth, instruction_count_efficiency, knc_cycle_model, simd_runtime_efficiency,
    CycleBreakdown, CycleModelInputs, InstructionProfile, ProfileSet,
};
pub use error::{Error, Result};
pub use geometry::{
    forward_splat, make_circular_trajectory, project_voxel, DetectorCoord, ProjectionMatrix,
    ReconParams, ScanGeometry,
};
pub use harness::{
    run_benchmark, scaling_sweep, synthesize_dataset, PhantomSpec, ProjectionSet, RunConfig,
    RunResult, Sphere, SynthSpec,
};
pub use microbench::{
    gen_gather_pattern, run_gather_bench, run_update_bench, BenchResult, GatherPattern,
};
