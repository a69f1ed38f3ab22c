use crate::error::{Error, Result};

/// Cubic single-precision voxel grid, linearised as `z * L^2 + y * L + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    edge: usize,
    data: Vec<f32>,
}

impl Volume {
    pub fn zeros(edge: usize) -> Self {
        Volume {
            edge,
            data: vec![0.0; edge * edge * edge],
        }
    }

    pub fn from_data(edge: usize, data: Vec<f32>) -> Result<Self> {
        let expected = edge * edge * edge;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "volume data length",
                expected,
                actual: data.len(),
            });
        }
        Ok(Volume { edge, data })
    }

    #[inline]
    pub fn edge(&self) -> usize {
        self.edge
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.edge + y) * self.edge + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: f32) {
        let i = self.index(x, y, z);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0`.
    pub fn bitwise_eq(&self, other: &Volume) -> bool {
        self.edge == other.edge
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Detector image with an optional zero apron of `pad` pixels on every side.
///
/// Interior pixel `(u, v)` (column, row) lives at
/// `(v + pad) * stride + (u + pad)` with `stride = width + 2 * pad`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionImage {
    width: usize,
    height: usize,
    pad: usize,
    data: Vec<f32>,
}

impl ProjectionImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        ProjectionImage {
            width,
            height,
            pad: 0,
            data: vec![0.0; width * height],
        }
    }

    /// Wraps row-major unpadded intensities.
    pub fn from_data(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "image data length",
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(ProjectionImage {
            width,
            height,
            pad: 0,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pad(&self) -> usize {
        self.pad
    }

    #[inline]
    pub fn stride(&self) -> usize {
        self.width + 2 * self.pad
    }

    /// Raw buffer including the apron.
    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn offset(&self, u: usize, v: usize) -> usize {
        (v + self.pad) * self.stride() + u + self.pad
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.data[self.offset(u, v)]
    }

    pub fn set(&mut self, u: usize, v: usize, value: f32) {
        let i = self.offset(u, v);
        self.data[i] = value;
    }

    /// Interior pixels in row-major order.
    pub fn interior(&self) -> impl Iterator<Item = f32> + '_ {
        (0..self.height).flat_map(move |v| (0..self.width).map(move |u| self.get(u, v)))
    }

    /// Copies an unpadded image into a buffer with a `pad`-pixel zero apron.
    pub fn pad_image(&self, pad: usize) -> Result<ProjectionImage> {
        if self.pad != 0 {
            return Err(Error::invalid("image is already padded"));
        }
        if pad == 0 {
            return Err(Error::invalid("pad width must be at least 1"));
        }
        let stride = self.width + 2 * pad;
        let mut data = vec![0.0; stride * (self.height + 2 * pad)];
        for (v, row) in self.data.chunks_exact(self.width).enumerate() {
            let start = (v + pad) * stride + pad;
            data[start..start + self.width].copy_from_slice(row);
        }
        Ok(ProjectionImage {
            width: self.width,
            height: self.height,
            pad,
            data,
        })
    }

    /// Drops the apron.
    pub fn unpad(&self) -> ProjectionImage {
        ProjectionImage {
            width: self.width,
            height: self.height,
            pad: 0,
            data: self.interior().collect(),
        }
    }

    /// Sum of `a * b` over the interiors in double precision.
    pub fn dot(&self, other: &ProjectionImage) -> f64 {
        self.interior()
            .zip(other.interior())
            .map(|(a, b)| a as f64 * b as f64)
            .sum()
    }
}
