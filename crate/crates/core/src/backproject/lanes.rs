//! Lane-width generic line-update kernel.
//!
//! A line of voxels is processed in groups of `N` lanes held in `[f32; N]`
//! arrays; the per-lane loops are straight-line code that LLVM turns into
//! packed SIMD for the target. The arithmetic of every lane is the same
//! sequence of operations as the scalar reference, so results only depend on
//! the reciprocal mode, never on `N` or on the fetch strategy.

use std::ops::Range;

use super::recip::{fast_reciprocal, fast_reciprocal_refined};
use crate::geometry::usable;

/// Everything a line update needs, borrowed for one projection.
pub(crate) struct LineContext<'a> {
    pub a: [f32; 12],
    pub origin: f32,
    pub spacing: f32,
    pub width: i32,
    pub height: i32,
    pub pixels: &'a [f32],
    pub stride: usize,
    pub pad: usize,
}

/// Homogeneous divide flavour.
pub(crate) trait Dehomogenize {
    /// Returns `(ix, iy, aux)`; `aux` is whatever [`Self::weigh`] needs.
    fn split(u: f32, v: f32, w: f32) -> (f32, f32, f32);
    /// Applies the inverse-square weight.
    fn weigh(val: f32, w: f32, aux: f32) -> f32;
}

pub(crate) struct Exact;
pub(crate) struct Fast;
pub(crate) struct FastRefined;

impl Dehomogenize for Exact {
    #[inline(always)]
    fn split(u: f32, v: f32, w: f32) -> (f32, f32, f32) {
        (u / w, v / w, 0.0)
    }

    #[inline(always)]
    fn weigh(val: f32, w: f32, _aux: f32) -> f32 {
        val / (w * w)
    }
}

impl Dehomogenize for Fast {
    #[inline(always)]
    fn split(u: f32, v: f32, w: f32) -> (f32, f32, f32) {
        let r = fast_reciprocal(w);
        (u * r, v * r, r)
    }

    #[inline(always)]
    fn weigh(val: f32, _w: f32, r: f32) -> f32 {
        val * (r * r)
    }
}

impl Dehomogenize for FastRefined {
    #[inline(always)]
    fn split(u: f32, v: f32, w: f32) -> (f32, f32, f32) {
        let r = fast_reciprocal_refined(w);
        (u * r, v * r, r)
    }

    #[inline(always)]
    fn weigh(val: f32, _w: f32, r: f32) -> f32 {
        val * (r * r)
    }
}

/// The four bilinear neighbours of every lane.
pub(crate) struct Quad<const N: usize> {
    pub bl: [f32; N],
    pub br: [f32; N],
    pub tl: [f32; N],
    pub tr: [f32; N],
}

/// How Part 2 obtains detector values.
pub(crate) trait Fetch {
    fn fetch<const N: usize>(ctx: &LineContext<'_>, iix: &[i32; N], iiy: &[i32; N]) -> Quad<N>;
}

/// Per-lane scalar loads with bounds checks on an unpadded image.
pub(crate) struct Conditional;
/// Per-lane indexed loads from the zero-padded buffer, no branches.
pub(crate) struct PaddedGather;
/// Per-lane loads of adjacent texel pairs, then a deinterleave.
pub(crate) struct PaddedPairwise;

impl Fetch for Conditional {
    #[inline(always)]
    fn fetch<const N: usize>(ctx: &LineContext<'_>, iix: &[i32; N], iiy: &[i32; N]) -> Quad<N> {
        let (width, height) = (ctx.width as i64, ctx.height as i64);
        let at = |iu: i64, iv: i64| {
            if iv >= 0 && iv < height && iu >= 0 && iu < width {
                ctx.pixels[(iv * width + iu) as usize]
            } else {
                0.0
            }
        };
        let mut q = Quad {
            bl: [0.0; N],
            br: [0.0; N],
            tl: [0.0; N],
            tr: [0.0; N],
        };
        for l in 0..N {
            let (x, y) = (iix[l] as i64, iiy[l] as i64);
            q.bl[l] = at(x, y);
            q.br[l] = at(x + 1, y);
            q.tl[l] = at(x, y + 1);
            q.tr[l] = at(x + 1, y + 1);
        }
        q
    }
}

/// Offset of the bottom-left neighbour in the padded buffer. Indices are
/// clamped to `[-2, size]`: a voxel that far outside only sees apron zeros
/// either way, so clamping never changes a fetched value.
#[inline(always)]
fn padded_base(ctx: &LineContext<'_>, iix: i32, iiy: i32) -> usize {
    let cx = iix.clamp(-2, ctx.width);
    let cy = iiy.clamp(-2, ctx.height);
    let pad = ctx.pad as i32;
    let base = (cy + pad) as usize * ctx.stride + (cx + pad) as usize;
    debug_assert!(base + ctx.stride + 1 < ctx.pixels.len());
    base
}

impl Fetch for PaddedGather {
    #[inline(always)]
    fn fetch<const N: usize>(ctx: &LineContext<'_>, iix: &[i32; N], iiy: &[i32; N]) -> Quad<N> {
        let mut base = [0usize; N];
        for l in 0..N {
            base[l] = padded_base(ctx, iix[l], iiy[l]);
        }
        let px = ctx.pixels;
        let s = ctx.stride;
        // SAFETY: padded_base keeps base, base + 1, base + s and base + s + 1
        // inside the buffer (pad >= 2 is checked when the context is built).
        unsafe {
            Quad {
                bl: base.map(|b| *px.get_unchecked(b)),
                br: base.map(|b| *px.get_unchecked(b + 1)),
                tl: base.map(|b| *px.get_unchecked(b + s)),
                tr: base.map(|b| *px.get_unchecked(b + s + 1)),
            }
        }
    }
}

impl Fetch for PaddedPairwise {
    #[inline(always)]
    fn fetch<const N: usize>(ctx: &LineContext<'_>, iix: &[i32; N], iiy: &[i32; N]) -> Quad<N> {
        let px = ctx.pixels;
        let s = ctx.stride;
        let mut bottom = [[0f32; 2]; N];
        let mut top = [[0f32; 2]; N];
        for l in 0..N {
            let b = padded_base(ctx, iix[l], iiy[l]);
            // SAFETY: see PaddedGather; both pairs lie inside the buffer.
            unsafe {
                bottom[l] = px.get_unchecked(b..b + 2).try_into().unwrap_unchecked();
                top[l] = px
                    .get_unchecked(b + s..b + s + 2)
                    .try_into()
                    .unwrap_unchecked();
            }
        }
        // Deinterleave the pairs into the four neighbour groups.
        let mut q = Quad {
            bl: [0.0; N],
            br: [0.0; N],
            tl: [0.0; N],
            tr: [0.0; N],
        };
        for l in 0..N {
            q.bl[l] = bottom[l][0];
            q.br[l] = bottom[l][1];
            q.tl[l] = top[l][0];
            q.tr[l] = top[l][1];
        }
        q
    }
}

/// Products of the line-invariant world coordinates with their matrix
/// columns, one per output row.
struct LineTerms {
    wy: [f32; 3],
    wz: [f32; 3],
}

#[inline(always)]
fn group<F: Fetch, D: Dehomogenize, const N: usize>(
    ctx: &LineContext<'_>,
    terms: &LineTerms,
    out: &mut [f32; N],
    x0: usize,
) {
    let a = &ctx.a;
    let mut u = [0f32; N];
    let mut v = [0f32; N];
    let mut w = [0f32; N];
    for l in 0..N {
        let wx = ctx.origin + (x0 + l) as f32 * ctx.spacing;
        u[l] = wx * a[0] + terms.wy[0] + terms.wz[0] + a[9];
        v[l] = wx * a[1] + terms.wy[1] + terms.wz[1] + a[10];
        w[l] = wx * a[2] + terms.wy[2] + terms.wz[2] + a[11];
    }

    let mut valid = [false; N];
    let mut aux = [0f32; N];
    let mut iix = [0i32; N];
    let mut iiy = [0i32; N];
    let mut sx = [0f32; N];
    let mut sy = [0f32; N];
    for l in 0..N {
        let (ix, iy, r) = D::split(u[l], v[l], w[l]);
        valid[l] = usable(w[l], ix, iy);
        aux[l] = r;
        iix[l] = ix as i32;
        iiy[l] = iy as i32;
        sx[l] = ix - iix[l] as f32;
        sy[l] = iy - iiy[l] as f32;
    }

    let q = F::fetch::<N>(ctx, &iix, &iiy);

    for l in 0..N {
        let valb = (1.0 - sx[l]) * q.bl[l] + sx[l] * q.br[l];
        let valt = (1.0 - sx[l]) * q.tl[l] + sx[l] * q.tr[l];
        let val = (1.0 - sy[l]) * valb + sy[l] * valt;
        let updated = out[l] + D::weigh(val, w[l], aux[l]);
        out[l] = if valid[l] { updated } else { out[l] };
    }
}

/// Updates `line[range]` for voxel line `(y, z)`. Full groups of `N` lanes
/// first, then the remainder one voxel at a time.
pub(crate) fn update_line<F: Fetch, D: Dehomogenize, const N: usize>(
    ctx: &LineContext<'_>,
    line: &mut [f32],
    y: usize,
    z: usize,
    range: Range<usize>,
) {
    let wy = ctx.origin + y as f32 * ctx.spacing;
    let wz = ctx.origin + z as f32 * ctx.spacing;
    let a = &ctx.a;
    let terms = LineTerms {
        wy: [wy * a[3], wy * a[4], wy * a[5]],
        wz: [wz * a[6], wz * a[7], wz * a[8]],
    };

    let mut x = range.start;
    while x + N <= range.end {
        let chunk: &mut [f32; N] = (&mut line[x..x + N]).try_into().unwrap();
        group::<F, D, N>(ctx, &terms, chunk, x);
        x += N;
    }
    while x < range.end {
        let chunk: &mut [f32; 1] = (&mut line[x..x + 1]).try_into().unwrap();
        group::<F, D, 1>(ctx, &terms, chunk, x);
        x += 1;
    }
}

pub(crate) type LineFn =
    for<'a, 'b> fn(&LineContext<'a>, &'b mut [f32], usize, usize, Range<usize>);
