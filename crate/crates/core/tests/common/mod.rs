//! Random instances shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxelbench_core::backproject::compute_clip_mask;
use voxelbench_core::{
    backproject_kernel, backproject_reference, KernelConfig, ProjectionImage, ProjectionMatrix,
    ReconParams, ScanGeometry, Volume,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A perturbed pinhole view of a centred volume, scaled so that `w` is of
/// order one, with the volume partly hanging off the detector.
pub fn random_view(
    rng: &mut ChaCha8Rng,
    edge: usize,
    width: usize,
    height: usize,
) -> (ProjectionMatrix, ReconParams) {
    let spacing = rng.gen_range(0.5f32..2.0);
    let p = ReconParams::centered(edge, spacing, width, height).unwrap();
    let extent = edge as f64 * spacing as f64;
    let sid = extent * rng.gen_range(1.5..3.0);
    let geom = ScanGeometry {
        num_projections: 1,
        source_iso_distance: sid,
        source_detector_distance: sid * rng.gen_range(1.2..2.0),
        // Roughly 70-130% of the volume's shadow fits on the detector.
        detector_pixel_pitch: extent * 1.5 / width.min(height) as f64 * rng.gen_range(0.7..1.3),
        angular_range: std::f64::consts::TAU,
    };
    let m = geom
        .matrix_at(rng.gen_range(0.0..std::f64::consts::TAU), &p)
        .unwrap();
    let sign = if rng.gen_bool(0.2) { -1.0 } else { 1.0 };
    let scale = sign * rng.gen_range(0.8f32..1.25) / sid as f32;
    let jittered = m
        .entries()
        .map(|v| v * scale * rng.gen_range(0.98f32..1.02));
    (ProjectionMatrix::from_entries(jittered).unwrap(), p)
}

pub fn random_image(
    rng: &mut ChaCha8Rng,
    width: usize,
    height: usize,
    lo: f32,
    hi: f32,
) -> ProjectionImage {
    let data = (0..width * height).map(|_| rng.gen_range(lo..hi)).collect();
    ProjectionImage::from_data(width, height, data).unwrap()
}

pub fn random_volume(rng: &mut ChaCha8Rng, edge: usize) -> Volume {
    Volume::from_data(
        edge,
        (0..edge.pow(3))
            .map(|_| rng.gen_range(-1.0f32..1.0))
            .collect(),
    )
    .unwrap()
}

/// Applies one kernel configuration on top of `start`.
pub fn apply(
    cfg: &KernelConfig,
    start: &Volume,
    img: &ProjectionImage,
    m: &ProjectionMatrix,
    p: &ReconParams,
) -> Volume {
    let mut vol = start.clone();
    let prepared = cfg.prepare_image(img).unwrap();
    let mask = cfg.clip.then(|| compute_clip_mask(m, p));
    backproject_kernel(&mut vol, &prepared, m, p, cfg, mask.as_ref()).unwrap();
    vol
}

pub fn apply_reference(
    start: &Volume,
    img: &ProjectionImage,
    m: &ProjectionMatrix,
    p: &ReconParams,
) -> Volume {
    let mut vol = start.clone();
    backproject_reference(&mut vol, img, m, p).unwrap();
    vol
}

/// Largest per-voxel `|a - b| / |b|`; a voxel where only one side is zero
/// counts as infinitely wrong.
pub fn max_rel_error(a: &Volume, b: &Volume) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let (x, y) = (x as f64, y as f64);
            if x == y {
                0.0
            } else if y == 0.0 {
                f64::INFINITY
            } else {
                ((x - y) / y).abs()
            }
        })
        .fold(0.0, f64::max)
}
