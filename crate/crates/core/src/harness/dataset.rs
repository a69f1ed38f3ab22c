//! Little-endian projection set (`VXB1`) and volume (`VXV1`) files.
//!
//! Projection set: magic, projection count, detector width and height, volume
//! edge (u32 each), voxel spacing and origin (f32), then per projection the 12
//! matrix entries followed by `width * height` intensities in row-major order.
//!
//! Volume: magic, edge (u32), then `edge^3` values, z-major.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::backproject::{ProjectionImage, Volume};
use crate::error::{Error, Result};
use crate::geometry::{ProjectionMatrix, ReconParams};

pub const PROJECTION_SET_MAGIC: [u8; 4] = *b"VXB1";
pub const VOLUME_MAGIC: [u8; 4] = *b"VXV1";
const HEADER_BYTES: usize = 28;

/// One view: its projection matrix and unpadded detector image.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub matrix: ProjectionMatrix,
    pub image: ProjectionImage,
}

/// All views of a scan with the parameters of the volume they reconstruct.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    pub params: ReconParams,
    pub projections: Vec<Projection>,
}

impl ProjectionSet {
    pub fn new(params: ReconParams, projections: Vec<Projection>) -> Result<Self> {
        params.validate()?;
        for p in &projections {
            if p.image.width() != params.width
                || p.image.height() != params.height
                || p.image.pad() != 0
            {
                return Err(Error::invalid(format!(
                    "projection image must be an unpadded {}x{} image",
                    params.width, params.height
                )));
            }
        }
        Ok(ProjectionSet {
            params,
            projections,
        })
    }

    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut out = Vec::with_capacity(HEADER_BYTES + self.len() * (48 + 4 * p.width * p.height));
        out.extend_from_slice(&PROJECTION_SET_MAGIC);
        for v in [self.len(), p.width, p.height, p.edge] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&p.spacing.to_le_bytes());
        out.extend_from_slice(&p.origin.to_le_bytes());
        for proj in &self.projections {
            for v in proj.matrix.entries() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in proj.image.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a projection set; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).map_err(bad)? != PROJECTION_SET_MAGIC {
            return Err(bad("not a VXB1 projection set".into()));
        }
        let n = r.u32().map_err(bad)? as usize;
        let width = r.u32().map_err(bad)? as usize;
        let height = r.u32().map_err(bad)? as usize;
        let edge = r.u32().map_err(bad)? as usize;
        let spacing = r.f32().map_err(bad)?;
        let origin = r.f32().map_err(bad)?;
        let params = ReconParams::new(edge, spacing, origin, width, height)
            .map_err(|e| bad(e.to_string()))?;

        let per_view = 4 * (12 + width * height);
        if r.remaining() != n * per_view {
            return Err(bad(format!(
                "expected {} payload bytes for {n} projections, found {}",
                n * per_view,
                r.remaining()
            )));
        }
        let mut projections = Vec::with_capacity(n);
        for i in 0..n {
            let mut a = [0f32; 12];
            for v in &mut a {
                *v = r.f32().map_err(bad)?;
            }
            let matrix = ProjectionMatrix::from_entries(a)
                .map_err(|e| bad(format!("projection {i}: {e}")))?;
            let pixels = r.f32_vec(width * height).map_err(bad)?;
            let image = ProjectionImage::from_data(width, height, pixels)?;
            projections.push(Projection { matrix, image });
        }
        Ok(ProjectionSet {
            params,
            projections,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&read_file(path)?, path)
    }
}

pub fn volume_to_bytes(vol: &Volume) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * vol.data().len());
    out.extend_from_slice(&VOLUME_MAGIC);
    out.extend_from_slice(&(vol.edge() as u32).to_le_bytes());
    for v in vol.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn volume_from_bytes(bytes: &[u8], path: &Path) -> Result<Volume> {
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(bad)? != VOLUME_MAGIC {
        return Err(bad("not a VXV1 volume".into()));
    }
    let edge = r.u32().map_err(bad)? as usize;
    let count = edge
        .checked_mul(edge)
        .and_then(|v| v.checked_mul(edge))
        .ok_or_else(|| bad(format!("edge {edge} overflows")))?;
    if r.remaining() != 4 * count {
        return Err(bad(format!(
            "expected {} voxel bytes, found {}",
            4 * count,
            r.remaining()
        )));
    }
    Volume::from_data(edge, r.f32_vec(count).map_err(bad)?)
}

pub fn write_volume(path: impl AsRef<Path>, vol: &Volume) -> Result<()> {
    write_file(path.as_ref(), &volume_to_bytes(vol))
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    volume_from_bytes(&read_file(path)?, path)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        if self.remaining() < n {
            return Err(format!("truncated at byte {}", self.bytes.len()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, String> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>, String> {
        Ok(self
            .take(4 * n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
