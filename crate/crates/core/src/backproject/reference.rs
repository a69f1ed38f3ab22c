//! Straight scalar back projection: the bit-level oracle for every other
//! kernel.

use super::grid::{ProjectionImage, Volume};
use crate::error::{Error, Result};
use crate::geometry::{project_voxel, ProjectionMatrix, ReconParams};

pub(crate) fn check_dims(vol: &Volume, img: &ProjectionImage, p: &ReconParams) -> Result<()> {
    p.validate()?;
    if vol.edge() != p.edge {
        return Err(Error::DimensionMismatch {
            what: "volume edge",
            expected: p.edge,
            actual: vol.edge(),
        });
    }
    if img.width() != p.width {
        return Err(Error::DimensionMismatch {
            what: "image width",
            expected: p.width,
            actual: img.width(),
        });
    }
    if img.height() != p.height {
        return Err(Error::DimensionMismatch {
            what: "image height",
            expected: p.height,
            actual: img.height(),
        });
    }
    Ok(())
}

/// Adds one projection into `vol`, one voxel at a time, with bounds-checked
/// bilinear fetches (zero outside the detector) and `1/w^2` weighting.
pub fn backproject_reference(
    vol: &mut Volume,
    img: &ProjectionImage,
    a: &ProjectionMatrix,
    p: &ReconParams,
) -> Result<()> {
    check_dims(vol, img, p)?;
    if img.pad() != 0 {
        return Err(Error::invalid("reference kernel expects an unpadded image"));
    }
    let width = p.width as i64;
    let height = p.height as i64;
    let pixels = img.data();
    let fetch = |iu: i64, iv: i64| -> f32 {
        if iv >= 0 && iv < height && iu >= 0 && iu < width {
            pixels[(iv * width + iu) as usize]
        } else {
            0.0
        }
    };

    let l = p.edge;
    let out = vol.data_mut();
    for z in 0..l {
        for y in 0..l {
            for x in 0..l {
                // Part 1: world -> detector.
                let c = project_voxel(a, p, x, y, z);
                if !c.is_valid() {
                    continue;
                }
                let (iix, iiy) = (c.iix as i64, c.iiy as i64);

                // Part 2: four neighbours.
                let valbl = fetch(iix, iiy);
                let valbr = fetch(iix + 1, iiy);
                let valtl = fetch(iix, iiy + 1);
                let valtr = fetch(iix + 1, iiy + 1);

                // Part 3: bilinear combine and weighted update.
                let valb = (1.0 - c.scalex) * valbl + c.scalex * valbr;
                let valt = (1.0 - c.scalex) * valtl + c.scalex * valtr;
                let val = (1.0 - c.scaley) * valb + c.scaley * valt;
                out[z * l * l + y * l + x] += val / (c.w * c.w);
            }
        }
    }
    Ok(())
}
