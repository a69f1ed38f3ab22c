//! Scan geometry, projection matrices and the voxel-to-detector mapping.
//!
//! A projection matrix maps homogeneous world coordinates `(wx, wy, wz, 1)`
//! to homogeneous detector coordinates `(u, v, w)`. Entries are stored in the
//! order the line-update kernel consumes them: `a[0..3]` is the column
//! multiplied by `wx`, `a[3..6]` by `wy`, `a[6..9]` by `wz` and `a[9..12]` is
//! the translation column. Within a column the order is `(u, v, w)`.

use serde::{Deserialize, Serialize};

use crate::backproject::{ProjectionImage, Volume};
use crate::error::{Error, Result};

/// Guard for the homogeneous divide. Voxels with `|w|` below this project to
/// the behind-source sentinel and never contribute.
pub const W_EPSILON: f32 = 1e-12;

/// Reconstruction parameters shared by every projection of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReconParams {
    /// Voxels per volume edge.
    pub edge: usize,
    /// Voxel spacing in mm.
    pub spacing: f32,
    /// World coordinate (mm) of voxel index 0 along every axis.
    pub origin: f32,
    /// Detector width in pixels.
    pub width: usize,
    /// Detector height in pixels.
    pub height: usize,
}

impl ReconParams {
    pub fn new(
        edge: usize,
        spacing: f32,
        origin: f32,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let params = ReconParams {
            edge,
            spacing,
            origin,
            width,
            height,
        };
        params.validate()?;
        Ok(params)
    }

    /// Parameters for a volume centred on the world origin,
    /// `origin = -spacing * (edge - 1) / 2`.
    pub fn centered(edge: usize, spacing: f32, width: usize, height: usize) -> Result<Self> {
        if edge == 0 {
            return Err(Error::invalid("volume edge must be at least 1"));
        }
        let origin = -spacing * (edge - 1) as f32 / 2.0;
        Self::new(edge, spacing, origin, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        if self.edge == 0 {
            return Err(Error::invalid("volume edge must be at least 1"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::invalid(format!(
                "voxel spacing must be positive and finite, got {}",
                self.spacing
            )));
        }
        if !self.origin.is_finite() {
            return Err(Error::invalid("volume origin must be finite"));
        }
        if self.width < 2 || self.height < 2 {
            return Err(Error::invalid(format!(
                "detector must be at least 2x2 pixels, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// World coordinate of voxel index `i` along any axis.
    #[inline(always)]
    pub fn world(&self, i: usize) -> f32 {
        self.origin + i as f32 * self.spacing
    }

    pub fn voxel_count(&self) -> usize {
        self.edge * self.edge * self.edge
    }
}

/// Free-function form of [`ReconParams::centered`].
pub fn make_centered_params(
    edge: usize,
    spacing: f32,
    width: usize,
    height: usize,
) -> Result<ReconParams> {
    ReconParams::centered(edge, spacing, width, height)
}

/// 3x4 homogeneous forward projection in kernel element order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionMatrix {
    a: [f32; 12],
}

impl ProjectionMatrix {
    pub fn from_entries(a: [f32; 12]) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("projection matrix entries must be finite"));
        }
        if a[2] == 0.0 && a[5] == 0.0 && a[8] == 0.0 && a[11] == 0.0 {
            return Err(Error::invalid(
                "projection matrix has an all-zero homogeneous row",
            ));
        }
        Ok(ProjectionMatrix { a })
    }

    /// Builds a matrix from ordinary row-major rows `[u-row, v-row, w-row]`.
    pub fn from_rows(rows: [[f64; 4]; 3]) -> Result<Self> {
        let mut a = [0f32; 12];
        for (r, row) in rows.iter().enumerate() {
            for (c, &val) in row.iter().enumerate() {
                a[c * 3 + r] = val as f32;
            }
        }
        Self::from_entries(a)
    }

    #[inline(always)]
    pub fn entries(&self) -> &[f32; 12] {
        &self.a
    }

    /// Element at ordinary `(row, col)` position.
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.a[col * 3 + row]
    }

    pub fn scaled(&self, factor: f32) -> Result<Self> {
        Self::from_entries(self.a.map(|v| v * factor))
    }

    /// Projects a world point in double precision, returning `(ix, iy, w)`.
    pub fn project_point(&self, p: [f64; 3]) -> (f64, f64, f64) {
        let m = |r: usize| {
            p[0] * self.get(r, 0) as f64
                + p[1] * self.get(r, 1) as f64
                + p[2] * self.get(r, 2) as f64
                + self.get(r, 3) as f64
        };
        let (u, v, w) = (m(0), m(1), m(2));
        (u / w, v / w, w)
    }
}

/// Circular cone-beam scan description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ScanGeometry {
    pub num_projections: usize,
    /// Source to detector distance in mm.
    pub source_detector_distance: f64,
    /// Source to rotation axis distance in mm.
    pub source_iso_distance: f64,
    /// Detector pixel pitch in mm/pixel.
    pub detector_pixel_pitch: f64,
    /// Total rotation in radians.
    pub angular_range: f64,
}

impl Default for ScanGeometry {
    fn default() -> Self {
        ScanGeometry {
            num_projections: 496,
            source_detector_distance: 1200.0,
            source_iso_distance: 750.0,
            detector_pixel_pitch: 0.3,
            angular_range: std::f64::consts::TAU,
        }
    }
}

impl ScanGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.num_projections == 0 {
            return Err(Error::invalid("scan needs at least one projection"));
        }
        let finite = [
            self.source_detector_distance,
            self.source_iso_distance,
            self.detector_pixel_pitch,
            self.angular_range,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("scan geometry values must be finite"));
        }
        if !(self.source_iso_distance > 0.0
            && self.source_detector_distance > self.source_iso_distance)
        {
            return Err(Error::invalid(
                "need source_detector_distance > source_iso_distance > 0",
            ));
        }
        if self.detector_pixel_pitch <= 0.0 {
            return Err(Error::invalid("detector pixel pitch must be positive"));
        }
        Ok(())
    }

    pub fn magnification(&self) -> f64 {
        self.source_detector_distance / self.source_iso_distance
    }

    /// Gantry angle of projection `i`.
    pub fn angle(&self, i: usize) -> f64 {
        self.angular_range * i as f64 / self.num_projections as f64
    }

    /// Source position at gantry angle `theta`. The source circles the z axis
    /// in the z = 0 plane.
    pub fn source_position(&self, theta: f64) -> [f64; 3] {
        let r = self.source_iso_distance;
        [r * theta.sin(), -r * theta.cos(), 0.0]
    }

    /// Ideal pinhole matrix for gantry angle `theta`, principal point at the
    /// detector centre.
    pub fn matrix_at(&self, theta: f64, params: &ReconParams) -> Result<ProjectionMatrix> {
        let (sin, cos) = theta.sin_cos();
        let r = self.source_iso_distance;
        let f = self.source_detector_distance / self.detector_pixel_pitch;
        let cu = (params.width as f64 - 1.0) / 2.0;
        let cv = (params.height as f64 - 1.0) / 2.0;
        // Central ray direction, detector row axis and column axis.
        let d = [-sin, cos, 0.0];
        let e_u = [cos, sin, 0.0];
        let e_v = [0.0, 0.0, 1.0];
        let row = |axis: [f64; 3], c: f64| {
            [
                f * axis[0] + c * d[0],
                f * axis[1] + c * d[1],
                f * axis[2] + c * d[2],
                c * r,
            ]
        };
        ProjectionMatrix::from_rows([row(e_u, cu), row(e_v, cv), [d[0], d[1], d[2], r]])
    }
}

/// One matrix per projection along a circular trajectory.
pub fn make_circular_trajectory(
    geom: &ScanGeometry,
    params: &ReconParams,
) -> Result<Vec<ProjectionMatrix>> {
    geom.validate()?;
    params.validate()?;
    (0..geom.num_projections)
        .map(|i| geom.matrix_at(geom.angle(i), params))
        .collect()
}

/// Detector position of a voxel centre together with the bilinear split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorCoord {
    pub ix: f32,
    pub iy: f32,
    pub w: f32,
    pub iix: i32,
    pub iiy: i32,
    pub scalex: f32,
    pub scaley: f32,
}

impl DetectorCoord {
    /// Returned for voxels at (or numerically at) the source plane.
    pub const BEHIND_SOURCE: DetectorCoord = DetectorCoord {
        ix: f32::NAN,
        iy: f32::NAN,
        w: 0.0,
        iix: i32::MIN,
        iiy: i32::MIN,
        scalex: 0.0,
        scaley: 0.0,
    };

    #[inline(always)]
    pub fn is_valid(&self) -> bool {
        !self.ix.is_nan()
    }
}

/// Whether the homogeneous result is usable. Shared by every kernel so that
/// all of them skip exactly the same voxels.
#[inline(always)]
pub(crate) fn usable(w: f32, ix: f32, iy: f32) -> bool {
    w.abs() >= W_EPSILON && ix.is_finite() && iy.is_finite()
}

/// Homogeneous detector coordinates `(u, v, w)` of a voxel centre.
#[inline(always)]
pub(crate) fn homogeneous(
    a: &ProjectionMatrix,
    p: &ReconParams,
    x: usize,
    y: usize,
    z: usize,
) -> (f32, f32, f32) {
    let a = a.entries();
    let wx = p.origin + x as f32 * p.spacing;
    let wy = p.origin + y as f32 * p.spacing;
    let wz = p.origin + z as f32 * p.spacing;

    let u = wx * a[0] + wy * a[3] + wz * a[6] + a[9];
    let v = wx * a[1] + wy * a[4] + wz * a[7] + a[10];
    let w = wx * a[2] + wy * a[5] + wz * a[8] + a[11];
    (u, v, w)
}

/// Maps voxel `(x, y, z)` to detector coordinates.
#[inline(always)]
pub fn project_voxel(
    a: &ProjectionMatrix,
    p: &ReconParams,
    x: usize,
    y: usize,
    z: usize,
) -> DetectorCoord {
    let (u, v, w) = homogeneous(a, p, x, y, z);
    let ix = u / w;
    let iy = v / w;
    if !usable(w, ix, iy) {
        return DetectorCoord::BEHIND_SOURCE;
    }

    let iix = ix as i32;
    let iiy = iy as i32;
    DetectorCoord {
        ix,
        iy,
        w,
        iix,
        iiy,
        scalex: ix - iix as f32,
        scaley: iy - iiy as f32,
    }
}

/// Splats `phantom` onto the detector: the adjoint of the additive part of
/// the back projection. Each voxel deposits `value / w^2` onto its four
/// bilinear neighbours; deposits outside the detector are dropped.
pub fn forward_splat(
    phantom: &Volume,
    a: &ProjectionMatrix,
    p: &ReconParams,
) -> Result<ProjectionImage> {
    p.validate()?;
    if phantom.edge() != p.edge {
        return Err(Error::DimensionMismatch {
            what: "phantom edge",
            expected: p.edge,
            actual: phantom.edge(),
        });
    }
    let (width, height) = (p.width as i64, p.height as i64);
    let mut acc = vec![0f64; p.width * p.height];
    let mut deposit = |px: i64, py: i64, value: f64| {
        if (0..width).contains(&px) && (0..height).contains(&py) {
            acc[(py * width + px) as usize] += value;
        }
    };

    let l = p.edge;
    for z in 0..l {
        for y in 0..l {
            for x in 0..l {
                let value = phantom.get(x, y, z);
                if value == 0.0 {
                    continue;
                }
                let c = project_voxel(a, p, x, y, z);
                if !c.is_valid() {
                    continue;
                }
                let weighted = value as f64 / (c.w as f64 * c.w as f64);
                let (sx, sy) = (c.scalex as f64, c.scaley as f64);
                let (ix, iy) = (c.iix as i64, c.iiy as i64);
                deposit(ix, iy, weighted * (1.0 - sx) * (1.0 - sy));
                deposit(ix + 1, iy, weighted * sx * (1.0 - sy));
                deposit(ix, iy + 1, weighted * (1.0 - sx) * sy);
                deposit(ix + 1, iy + 1, weighted * sx * sy);
            }
        }
    }
    ProjectionImage::from_data(
        p.width,
        p.height,
        acc.into_iter().map(|v| v as f32).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn centered_origin() {
        assert_eq!(ReconParams::centered(1, 1.0, 16, 16).unwrap().origin, 0.0);
        assert_eq!(
            ReconParams::centered(512, 0.5, 1248, 960).unwrap().origin,
            -127.75
        );
        assert_eq!(ReconParams::centered(3, 2.0, 8, 8).unwrap().origin, -2.0);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ReconParams::centered(0, 1.0, 8, 8).is_err());
        assert!(ReconParams::centered(4, 0.0, 8, 8).is_err());
        assert!(ReconParams::centered(4, -1.0, 8, 8).is_err());
        assert!(ReconParams::centered(4, 1.0, 1, 8).is_err());
        assert!(ReconParams::centered(4, 1.0, 8, 0).is_err());
    }

    #[test]
    fn matrix_rejects_zero_w_row_and_nan() {
        let mut a = [1.0f32; 12];
        a[2] = 0.0;
        a[5] = 0.0;
        a[8] = 0.0;
        a[11] = 0.0;
        assert!(ProjectionMatrix::from_entries(a).is_err());
        let mut b = [1.0f32; 12];
        b[4] = f32::NAN;
        assert!(ProjectionMatrix::from_entries(b).is_err());
    }

    #[test]
    fn from_rows_uses_kernel_order() {
        let m = ProjectionMatrix::from_rows([
            [1.0, 2.0, 3.0, 4.0],
            [5.0, 6.0, 7.0, 8.0],
            [9.0, 10.0, 11.0, 12.0],
        ])
        .unwrap();
        assert_eq!(
            m.entries(),
            &[1.0, 5.0, 9.0, 2.0, 6.0, 10.0, 3.0, 7.0, 11.0, 4.0, 8.0, 12.0]
        );
        assert_eq!(m.get(2, 1), 10.0);
    }

    #[test]
    fn identity_projection() {
        let q = ReconParams::new(8, 1.0, 2.0, 16, 16).unwrap();
        let m = ProjectionMatrix::from_rows([
            [1.0, 0.0, 0.0, 1.4],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let c = project_voxel(&m, &q, 0, 0, 0);
        // wx = 2.0 + 1.4 (w column forces w = 1), wy = 2.0.
        assert_eq!(c.w, 1.0);
        assert_eq!((c.ix, c.iy, c.iix, c.iiy), (2.0f32 + 1.4f32, 2.0, 3, 2));
        assert!((c.scalex - 0.4).abs() < 1e-6);
        assert_eq!(c.scaley, 0.0);
    }

    #[test]
    fn truncation_is_toward_zero() {
        let p = ReconParams::new(1, 1.0, 0.0, 16, 16).unwrap();
        for k in 0..400 {
            let t = -2.0 + k as f64 * 0.01;
            let m = ProjectionMatrix::from_rows([
                [0.0, 0.0, 0.0, t],
                [0.0, 0.0, 0.0, -t],
                [0.0, 0.0, 0.0, 1.0],
            ])
            .unwrap();
            let c = project_voxel(&m, &p, 0, 0, 0);
            assert_eq!(c.iix, c.ix.trunc() as i32, "ix = {}", c.ix);
            assert_eq!(c.iiy, c.iy.trunc() as i32, "iy = {}", c.iy);
            assert_eq!(c.scalex, c.ix - c.ix.trunc());
            if c.ix >= 0.0 {
                assert!((0.0..1.0).contains(&c.scalex));
            }
        }
    }

    #[test]
    fn degenerate_w_is_sentinel() {
        let p = ReconParams::new(4, 1.0, 0.0, 16, 16).unwrap();
        // w = wx - 0, zero at voxel x = 0.
        let m = ProjectionMatrix::from_rows([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        assert!(!project_voxel(&m, &p, 0, 1, 1).is_valid());
        assert!(project_voxel(&m, &p, 1, 1, 1).is_valid());
    }

    #[test]
    fn part1_matches_brute_force_multiply() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a: [f32; 12] = std::array::from_fn(|_| rng.gen_range(-3.0f32..3.0));
            let Ok(m) = ProjectionMatrix::from_entries(a) else {
                continue;
            };
            let p = ReconParams::centered(9, rng.gen_range(0.1f32..2.0), 32, 24).unwrap();
            let (x, y, z) = (
                rng.gen_range(0..9),
                rng.gen_range(0..9),
                rng.gen_range(0..9),
            );
            let c = project_voxel(&m, &p, x, y, z);
            // Independent multiply: explicit row/column access.
            let world = [
                p.origin + x as f32 * p.spacing,
                p.origin + y as f32 * p.spacing,
                p.origin + z as f32 * p.spacing,
            ];
            let mut out = [0f32; 3];
            for (r, o) in out.iter_mut().enumerate() {
                let mut acc = world[0] * m.get(r, 0);
                acc += world[1] * m.get(r, 1);
                acc += world[2] * m.get(r, 2);
                acc += m.get(r, 3);
                *o = acc;
            }
            if !c.is_valid() {
                continue;
            }
            assert_eq!(c.w.to_bits(), out[2].to_bits());
            assert_eq!(c.ix.to_bits(), (out[0] / out[2]).to_bits());
            assert_eq!(c.iy.to_bits(), (out[1] / out[2]).to_bits());
        }
    }

    #[test]
    fn homogeneous_scale_invariance() {
        let geom = ScanGeometry::default();
        let p = ReconParams::centered(16, 2.0, 96, 80).unwrap();
        let m = geom.matrix_at(0.7, &p).unwrap();
        // Powers of two scale every intermediate exactly.
        for lambda in [2.0f32, -4.0, 0.5] {
            let s = m.scaled(lambda).unwrap();
            for (x, y, z) in [(0, 0, 0), (5, 9, 15), (15, 3, 7)] {
                let c = project_voxel(&m, &p, x, y, z);
                let d = project_voxel(&s, &p, x, y, z);
                assert_eq!((c.ix, c.iy, c.iix, c.iiy), (d.ix, d.iy, d.iix, d.iiy));
                assert_eq!((c.scalex, c.scaley), (d.scalex, d.scaley));
                assert_eq!(d.w, c.w * lambda);
            }
        }
    }

    fn small_geometry() -> (ScanGeometry, ReconParams) {
        let geom = ScanGeometry {
            num_projections: 8,
            source_detector_distance: 1200.0,
            source_iso_distance: 750.0,
            detector_pixel_pitch: 0.5,
            angular_range: std::f64::consts::TAU,
        };
        (geom, ReconParams::centered(32, 1.0, 120, 100).unwrap())
    }

    #[test]
    fn trajectory_centres_origin() {
        let (geom, p) = small_geometry();
        let mats = make_circular_trajectory(&geom, &p).unwrap();
        assert_eq!(mats.len(), 8);
        for m in &mats {
            let (ix, iy, _) = m.project_point([0.0, 0.0, 0.0]);
            assert!((ix - 59.5).abs() < 1e-4, "ix = {ix}");
            assert!((iy - 49.5).abs() < 1e-4, "iy = {iy}");
        }
    }

    #[test]
    fn opposed_views_mirror() {
        let (geom, p) = small_geometry();
        let a = geom.matrix_at(0.0, &p).unwrap();
        let b = geom.matrix_at(std::f64::consts::PI, &p).unwrap();
        for d in [1.0, 5.0, -7.5] {
            let (ia, _, _) = a.project_point([d, 0.0, 0.0]);
            let (ib, _, _) = b.project_point([d, 0.0, 0.0]);
            let (oa, ob) = (ia - 59.5, ib - 59.5);
            assert!(oa.abs() > 1.0);
            assert!((oa + ob).abs() < 1e-3, "{oa} vs {ob}");
        }
    }

    #[test]
    fn axial_offset_scales_with_magnification() {
        let (geom, p) = small_geometry();
        let m = geom.matrix_at(1.1, &p).unwrap();
        let z0 = 6.0;
        let (_, iy, _) = m.project_point([0.0, 0.0, z0]);
        let expected = z0 * geom.magnification() / geom.detector_pixel_pitch;
        assert!(((iy - 49.5) - expected).abs() < 1e-3);
    }

    /// Ray-trace oracle: intersect the source->point ray with the detector plane.
    fn ray_trace(geom: &ScanGeometry, p: &ReconParams, theta: f64, point: [f64; 3]) -> (f64, f64) {
        let s = geom.source_position(theta);
        let dir = [point[0] - s[0], point[1] - s[1], point[2] - s[2]];
        let central = [
            -s[0] / geom.source_iso_distance,
            -s[1] / geom.source_iso_distance,
            0.0,
        ];
        let along = dir[0] * central[0] + dir[1] * central[1] + dir[2] * central[2];
        let t = geom.source_detector_distance / along;
        let hit = [s[0] + t * dir[0], s[1] + t * dir[1], s[2] + t * dir[2]];
        let centre = [
            s[0] + geom.source_detector_distance * central[0],
            s[1] + geom.source_detector_distance * central[1],
            0.0,
        ];
        let off = [hit[0] - centre[0], hit[1] - centre[1], hit[2] - centre[2]];
        let col_axis = [theta.cos(), theta.sin(), 0.0];
        let u = off[0] * col_axis[0] + off[1] * col_axis[1];
        let v = off[2];
        (
            u / geom.detector_pixel_pitch + (p.width as f64 - 1.0) / 2.0,
            v / geom.detector_pixel_pitch + (p.height as f64 - 1.0) / 2.0,
        )
    }

    #[test]
    fn matrices_agree_with_ray_trace() {
        let (geom, p) = small_geometry();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let point = [
                rng.gen_range(-15.0..15.0),
                rng.gen_range(-15.0..15.0),
                rng.gen_range(-15.0..15.0),
            ];
            let m = geom.matrix_at(theta, &p).unwrap();
            let (ix, iy, _) = m.project_point(point);
            let (rx, ry) = ray_trace(&geom, &p, theta, point);
            // f32 matrix storage bounds the agreement.
            assert!((ix - rx).abs() < 1e-3, "{ix} vs {rx}");
            assert!((iy - ry).abs() < 1e-3, "{iy} vs {ry}");
        }
    }

    #[test]
    fn splat_of_zero_is_zero() {
        let (geom, p) = small_geometry();
        let m = geom.matrix_at(0.3, &p).unwrap();
        let img = forward_splat(&Volume::zeros(p.edge), &m, &p).unwrap();
        assert!(img.interior().all(|v| v == 0.0));
    }

    #[test]
    fn splat_single_voxel_lands_on_one_pixel() {
        // w = 1 everywhere, voxel 1 of a 3-voxel line sits at world 0.
        let p = ReconParams::centered(3, 1.0, 8, 8).unwrap();
        let m = ProjectionMatrix::from_rows([
            [1.0, 0.0, 0.0, 4.0],
            [0.0, 1.0, 0.0, 3.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let mut vol = Volume::zeros(3);
        vol.set(1, 1, 1, 1.0);
        let img = forward_splat(&vol, &m, &p).unwrap();
        let nonzero: Vec<_> = (0..8)
            .flat_map(|v| (0..8).map(move |u| (u, v)))
            .filter(|&(u, v)| img.get(u, v) != 0.0)
            .collect();
        assert_eq!(nonzero, vec![(4, 3)]);
        assert_eq!(img.get(4, 3), 1.0);
    }
}
