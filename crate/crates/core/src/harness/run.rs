//! Timed plane-parallel reconstruction.

use std::borrow::Cow;
use std::path::PathBuf;
use std::sync::Barrier;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::dataset::{write_volume, ProjectionSet};
use super::results::{RunRecordConfig, RunResult};
use super::synth::SynthSpec;
use crate::backproject::{
    backproject_reference, compute_clip_mask, ClipMask, KernelConfig, LineKernel, ProjectionImage,
    Volume,
};
use crate::error::{Error, Result};

/// What to run and where to put the results. Deserializes from the JSON or
/// TOML run file; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct RunConfig {
    /// Projection set to load. When absent, `synth` is generated in memory.
    pub dataset: Option<PathBuf>,
    pub synth: SynthSpec,
    pub kernel: KernelConfig,
    pub threads: usize,
    pub repetitions: usize,
    pub output_volume: Option<PathBuf>,
    /// JSON-lines file results are appended to.
    pub results_path: Option<PathBuf>,
    pub csv_path: Option<PathBuf>,
    /// Quality gate against the reference reconstruction.
    pub max_rmse: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            synth: SynthSpec::default(),
            kernel: KernelConfig::default(),
            threads: 1,
            repetitions: 3,
            output_volume: None,
            results_path: None,
            csv_path: None,
            max_rmse: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::invalid("threads must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if let Some(t) = self.max_rmse {
            if !(t >= 0.0) {
                return Err(Error::invalid(format!(
                    "maxRmse must be non-negative, got {t}"
                )));
            }
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<ProjectionSet> {
        match &self.dataset {
            Some(path) => ProjectionSet::read(path),
            None => self.synth.synthesize(),
        }
    }

    fn dataset_label(&self) -> String {
        match &self.dataset {
            Some(path) => path.display().to_string(),
            None => "synthetic".to_string(),
        }
    }
}

/// Images in the layout the kernel wants plus per-view clip masks, built
/// outside the timed region.
pub struct PreparedSet<'a> {
    set: &'a ProjectionSet,
    config: KernelConfig,
    images: Vec<Cow<'a, ProjectionImage>>,
    masks: Option<Vec<ClipMask>>,
}

impl<'a> PreparedSet<'a> {
    pub fn new(set: &'a ProjectionSet, config: KernelConfig) -> Result<Self> {
        let images = set
            .projections
            .iter()
            .map(|p| config.prepare_image(&p.image))
            .collect::<Result<Vec<_>>>()?;
        let masks = config.clip.then(|| {
            set.projections
                .iter()
                .map(|p| compute_clip_mask(&p.matrix, &set.params))
                .collect()
        });
        let prepared = PreparedSet {
            set,
            config,
            images,
            masks,
        };
        // Surface configuration errors before anything is timed.
        prepared.kernels()?;
        Ok(prepared)
    }

    fn kernels(&self) -> Result<Vec<LineKernel<'_>>> {
        self.set
            .projections
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mask = self.masks.as_ref().map(|m| &m[i]);
                LineKernel::new(
                    &self.images[i],
                    &p.matrix,
                    &self.set.params,
                    &self.config,
                    mask,
                )
            })
            .collect()
    }

    /// Mean fraction of voxels the clip masks skip.
    pub fn clipped_fraction(&self) -> f64 {
        match &self.masks {
            Some(m) if !m.is_empty() => {
                m.iter().map(ClipMask::clipped_fraction).sum::<f64>() / m.len() as f64
            }
            _ => 0.0,
        }
    }

    /// Back-projects every view into a fresh volume. Returns the volume and
    /// the wall time of the projection loop.
    pub fn reconstruct(&self, threads: usize) -> Result<(Volume, f64)> {
        if threads == 0 {
            return Err(Error::invalid("threads must be at least 1"));
        }
        let kernels = self.kernels()?;
        let l = self.set.params.edge;
        let mut vol = Volume::zeros(l);
        let plane = l * l;
        // Contiguous plane ranges, sizes differing by at most one.
        let mut chunks = Vec::with_capacity(threads);
        let mut rest = vol.data_mut();
        let mut first_z = 0;
        for t in 0..threads {
            let planes = l / threads + usize::from(t < l % threads);
            let (mine, tail) = std::mem::take(&mut rest).split_at_mut(planes * plane);
            chunks.push((first_z, mine));
            rest = tail;
            first_z += planes;
        }

        let start = Barrier::new(threads + 1);
        let step = Barrier::new(threads);
        let done = Barrier::new(threads + 1);
        let mut elapsed = 0.0;
        std::thread::scope(|s| {
            for (first_z, planes) in chunks {
                let (kernels, start, step, done) = (&kernels, &start, &step, &done);
                s.spawn(move || {
                    start.wait();
                    for k in kernels {
                        k.run_planes(planes, first_z);
                        step.wait();
                    }
                    done.wait();
                });
            }
            start.wait();
            let t = Instant::now();
            done.wait();
            elapsed = t.elapsed().as_secs_f64();
        });
        Ok((vol, elapsed))
    }
}

/// Serial reference reconstruction of a whole set.
pub fn reconstruct_reference(set: &ProjectionSet) -> Result<Volume> {
    let mut vol = Volume::zeros(set.params.edge);
    for p in &set.projections {
        backproject_reference(&mut vol, &p.image, &p.matrix, &set.params)?;
    }
    Ok(vol)
}

/// Reconstruction with any kernel configuration, untimed.
pub fn reconstruct(set: &ProjectionSet, config: &KernelConfig, threads: usize) -> Result<Volume> {
    Ok(PreparedSet::new(set, *config)?.reconstruct(threads)?.0)
}

/// Billions of voxel updates per second, counting every voxel of every view.
pub fn gups(edge: usize, projections: usize, wall_time_sec: f64) -> f64 {
    let l = edge as f64;
    l * l * l * projections as f64 / wall_time_sec / 1e9
}

/// Root-mean-square difference in double precision.
pub fn rmse(a: &Volume, reference: &Volume) -> f64 {
    let n = reference.data().len().max(1) as f64;
    let sum: f64 = a
        .data()
        .iter()
        .zip(reference.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    (sum / n).sqrt()
}

/// `10 log10(peak^2 / mse)` with the peak taken as the largest reference
/// magnitude. Identical volumes give `+inf`.
pub fn psnr(a: &Volume, reference: &Volume) -> f64 {
    let e = rmse(a, reference);
    if e == 0.0 {
        return f64::INFINITY;
    }
    let peak = reference
        .data()
        .iter()
        .fold(0f64, |m, &v| m.max((v as f64).abs()));
    20.0 * (peak / e).log10()
}

/// Loads, prepares, times `repetitions` reconstructions, keeps the best wall
/// time and scores the result against the reference kernel.
pub fn run_benchmark(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let set = cfg.load_dataset()?;
    run_on(&set, cfg)
}

/// [`run_benchmark`] on an already loaded set.
pub fn run_on(set: &ProjectionSet, cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let prepared = PreparedSet::new(set, cfg.kernel)?;
    let mut best = f64::INFINITY;
    let mut volume = None;
    for _ in 0..cfg.repetitions {
        let (vol, secs) = prepared.reconstruct(cfg.threads)?;
        best = best.min(secs);
        volume = Some(vol);
    }
    let volume = volume.expect("at least one repetition");
    let reference = reconstruct_reference(set)?;
    if let Some(path) = &cfg.output_volume {
        write_volume(path, &volume)?;
    }
    let edge = set.params.edge;
    Ok(RunResult {
        timestamp: super::timestamp_now(),
        config: RunRecordConfig {
            kernel: cfg.kernel,
            threads: cfg.threads,
            repetitions: cfg.repetitions,
            edge,
            num_projections: set.len(),
            dataset: cfg.dataset_label(),
        },
        gups_per_sec: gups(edge, set.len(), best),
        wall_time_sec: best,
        rmse: rmse(&volume, &reference),
        psnr: psnr(&volume, &reference),
        kernel_label: cfg.kernel.to_string(),
        clipped_fraction: prepared.clipped_fraction(),
        parallel_efficiency: None,
        finite: volume.data().iter().all(|v| v.is_finite()),
    })
}

/// Runs at 1..=`max_threads` workers and fills in the parallel efficiency
/// `speedup(t) / t` of every point.
pub fn scaling_sweep(cfg: &RunConfig, max_threads: usize) -> Result<Vec<RunResult>> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    if max_threads == 0 || max_threads > cores {
        return Err(Error::invalid(format!(
            "max threads must be in 1..={cores} (available cores), got {max_threads}"
        )));
    }
    cfg.validate()?;
    let set = cfg.load_dataset()?;
    let mut out: Vec<RunResult> = Vec::with_capacity(max_threads);
    for t in 1..=max_threads {
        let mut r = run_on(
            &set,
            &RunConfig {
                threads: t,
                ..cfg.clone()
            },
        )?;
        let base = out
            .first()
            .map_or(r.gups_per_sec, |first| first.gups_per_sec);
        r.parallel_efficiency = Some(r.gups_per_sec / (t as f64 * base));
        out.push(r);
    }
    Ok(out)
}
