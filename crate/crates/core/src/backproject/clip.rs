//! Per-line `[start, stop)` ranges outside which a voxel cannot receive a
//! nonzero contribution from a given projection.
//!
//! Each line `(y, z)` maps to a curve `x -> (u(x)/w(x), v(x)/w(x))` with
//! `u, v, w` affine in `x`. Between poles of `w` every detector inequality
//! becomes linear in `x`, so the visible part of the line is an interval that
//! can be found in closed form. That interval is computed in double precision
//! with an explicit slack for single-precision evaluation error, then
//! tightened by evaluating the exact kernel predicate at its two ends.

use std::ops::Range;

use super::lanes::{Dehomogenize, Exact, Fast, FastRefined};
use crate::geometry::{homogeneous, usable, ProjectionMatrix, ReconParams, W_EPSILON};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipMask {
    edge: usize,
    // (start, stop) per line, indexed z * edge + y
    ranges: Vec<(u32, u32)>,
}

impl ClipMask {
    /// A mask that keeps every voxel.
    pub fn full(edge: usize) -> Self {
        ClipMask {
            edge,
            ranges: vec![(0, edge as u32); edge * edge],
        }
    }

    pub fn edge(&self) -> usize {
        self.edge
    }

    #[inline]
    pub fn line(&self, y: usize, z: usize) -> Range<usize> {
        let (start, stop) = self.ranges[z * self.edge + y];
        start as usize..stop as usize
    }

    pub fn active_voxels(&self) -> usize {
        self.ranges.iter().map(|&(a, b)| (b - a) as usize).sum()
    }

    /// Fraction of the volume skipped by the mask.
    pub fn clipped_fraction(&self) -> f64 {
        let total = self.edge.pow(3);
        if total == 0 {
            return 0.0;
        }
        1.0 - self.active_voxels() as f64 / total as f64
    }
}

/// True when voxel `(x, y, z)` has at least one in-bounds bilinear neighbour
/// with a nonzero interpolation factor under any reciprocal mode. Voxels for
/// which this is false add exactly zero in every kernel.
pub fn voxel_contributes(
    a: &ProjectionMatrix,
    p: &ReconParams,
    x: usize,
    y: usize,
    z: usize,
) -> bool {
    let (u, v, w) = homogeneous(a, p, x, y, z);
    touches_detector::<Exact>(u, v, w, p)
        || touches_detector::<Fast>(u, v, w, p)
        || touches_detector::<FastRefined>(u, v, w, p)
}

#[inline(always)]
fn touches_detector<D: Dehomogenize>(u: f32, v: f32, w: f32, p: &ReconParams) -> bool {
    let (ix, iy, _) = D::split(u, v, w);
    if !usable(w, ix, iy) {
        return false;
    }
    let (iix, iiy) = (ix as i32 as i64, iy as i32 as i64);
    let (sx, sy) = (ix - iix as f32, iy - iiy as f32);
    let (width, height) = (p.width as i64, p.height as i64);
    let col = (iix >= 0 && iix < width && 1.0 - sx != 0.0)
        || (iix + 1 >= 0 && iix + 1 < width && sx != 0.0);
    let row = (iiy >= 0 && iiy < height && 1.0 - sy != 0.0)
        || (iiy + 1 >= 0 && iiy + 1 < height && sy != 0.0);
    col && row
}

/// Affine function `c0 + c1 * x`.
#[derive(Clone, Copy)]
struct Affine {
    c0: f64,
    c1: f64,
}

impl Affine {
    fn at(&self, x: f64) -> f64 {
        self.c0 + self.c1 * x
    }

    /// Restricts `[lo, hi]` to where `self >= 0`.
    fn clamp_nonneg(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        if self.c1 == 0.0 {
            return (self.c0 >= 0.0).then_some((lo, hi));
        }
        let root = -self.c0 / self.c1;
        let (lo, hi) = if self.c1 > 0.0 {
            (lo.max(root), hi)
        } else {
            (lo, hi.min(root))
        };
        (lo <= hi).then_some((lo, hi))
    }
}

/// Margin (pixels) added around the detector on top of the rounding slack.
const PIXEL_MARGIN: f64 = 1.0;
/// Relative rounding slack for the single-precision `u, v, w` evaluation.
const ROUNDING: f64 = 8.0 * f32::EPSILON as f64;
/// Relative coordinate error of the fast reciprocal modes, with headroom.
const RECIPROCAL_SLACK: f64 = 1.0 / 512.0;

pub fn compute_clip_mask(a: &ProjectionMatrix, p: &ReconParams) -> ClipMask {
    let l = p.edge;
    let e = a.entries().map(|v| v as f64);
    let (origin, spacing) = (p.origin as f64, p.spacing as f64);
    let reach = origin.abs() + l as f64 * spacing;
    let slack = |r: usize| {
        ROUNDING * (reach * (e[r].abs() + e[r + 3].abs() + e[r + 6].abs()) + e[r + 9].abs())
    };
    let (su, sv, sw) = (slack(0), slack(1), slack(2));

    // The 11-bit reciprocal moves ix, iy by up to 2^-11 relative.
    let widen = 1.0 + RECIPROCAL_SLACK;
    let low = -(2.0 + PIXEL_MARGIN) * widen;
    let high_u = (p.width as f64 + PIXEL_MARGIN) * widen;
    let high_v = (p.height as f64 + PIXEL_MARGIN) * widen;
    let last = (l - 1) as f64;

    let mut ranges = Vec::with_capacity(l * l);
    for z in 0..l {
        let wz = origin + z as f64 * spacing;
        for y in 0..l {
            let wy = origin + y as f64 * spacing;
            let row = |r: usize| Affine {
                c0: origin * e[r] + wy * e[r + 3] + wz * e[r + 6] + e[r + 9],
                c1: spacing * e[r],
            };
            let (u, v, w) = (row(0), row(1), row(2));

            let mut hull: Option<(f64, f64)> = None;
            let mut extend = |seg: (f64, f64)| {
                hull = Some(match hull {
                    None => seg,
                    Some((a, b)) => (a.min(seg.0), b.max(seg.1)),
                });
            };

            // Band around the pole where single precision may flip the sign of w.
            let band = sw + W_EPSILON as f64;
            let mut pieces: Vec<(f64, f64, f64)> = Vec::with_capacity(2);
            if w.c1 == 0.0 {
                if w.c0.abs() > band {
                    pieces.push((0.0, last, w.c0.signum()));
                } else {
                    extend((0.0, last));
                }
            } else {
                let pole = -w.c0 / w.c1;
                let half = band / w.c1.abs();
                let (pa, pb) = (pole - half, pole + half);
                if pb >= 0.0 && pa <= last {
                    extend((pa.max(0.0), pb.min(last)));
                }
                if pa > 0.0 {
                    pieces.push((0.0, pa.min(last), w.at(0.0).signum()));
                }
                if pb < last {
                    pieces.push((pb.max(0.0), last, w.at(last).signum()));
                }
            }

            for (lo, hi, sign) in pieces {
                // sign * (u - bound * w) >= -(su + |bound| * sw), etc.
                let cond = |num: Affine, bound: f64, upper: bool, s_num: f64| {
                    let flip = if upper { -sign } else { sign };
                    Affine {
                        c0: flip * (num.c0 - bound * w.c0) + s_num + bound.abs() * sw,
                        c1: flip * (num.c1 - bound * w.c1),
                    }
                };
                let seg = [
                    cond(u, low, false, su),
                    cond(u, high_u, true, su),
                    cond(v, low, false, sv),
                    cond(v, high_v, true, sv),
                ]
                .iter()
                .try_fold((lo, hi), |(a, b), f| f.clamp_nonneg(a, b));
                if let Some(seg) = seg {
                    extend(seg);
                }
            }

            let (mut start, mut stop) = match hull {
                Some((a, b)) if a.is_finite() && b.is_finite() => {
                    let start = (a.floor() - 1.0).max(0.0) as usize;
                    let stop = ((b.floor() + 2.0).max(0.0) as usize).min(l);
                    (start.min(l), stop)
                }
                _ => (0, 0),
            };
            while start < stop && !voxel_contributes(a, p, start, y, z) {
                start += 1;
            }
            while stop > start && !voxel_contributes(a, p, stop - 1, y, z) {
                stop -= 1;
            }
            if start == stop {
                start = 0;
                stop = 0;
            }
            ranges.push((start as u32, stop as u32));
        }
    }
    ClipMask { edge: l, ranges }
}
