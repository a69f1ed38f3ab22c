//! Dataset files, synthetic phantoms and the timed reconstruction driver.

mod dataset;
mod results;
mod run;
mod synth;

pub use dataset::{
    read_volume, volume_from_bytes, volume_to_bytes, write_volume, Projection, ProjectionSet,
    PROJECTION_SET_MAGIC, VOLUME_MAGIC,
};
pub use results::{append_jsonl, read_jsonl, write_csv, RunRecordConfig, RunResult};
pub use run::{
    gups, psnr, reconstruct, reconstruct_reference, rmse, run_benchmark, run_on, scaling_sweep,
    PreparedSet, RunConfig,
};
pub use synth::{synthesize_dataset, PhantomSpec, Sphere, SynthSpec};

/// Current UTC time, RFC 3339 with seconds.
pub fn timestamp_now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
