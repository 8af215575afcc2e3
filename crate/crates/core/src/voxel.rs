//! Time-free voxel grid of polarity codes.
//!
//! Depth index `k` at a pixel holds the polarity of that pixel's `(k+1)`-th
//! event; slots past the pixel's event count hold the padding code. Timestamps
//! are not stored.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::event::{EventStream, Pixel, SensorGeometry};
use crate::nn::Tensor;

/// Real values used to encode polarities and padding, plus decode thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelCoding {
    pub code_plus: f64,
    pub code_minus: f64,
    pub code_pad: f64,
    pub thresh_plus: f64,
    pub thresh_minus: f64,
}

impl Default for VoxelCoding {
    fn default() -> Self {
        Self {
            code_plus: 0.75,
            code_minus: 0.25,
            code_pad: 0.5,
            thresh_plus: 0.625,
            thresh_minus: 0.375,
        }
    }
}

impl VoxelCoding {
    pub fn validate(&self) -> Result<()> {
        let ordered = self.code_minus < self.thresh_minus
            && self.thresh_minus < self.code_pad
            && self.code_pad < self.thresh_plus
            && self.thresh_plus < self.code_plus;
        if ordered {
            Ok(())
        } else {
            Err(Error::InvalidConfig("voxel coding values must be strictly ordered".into()))
        }
    }

    #[inline]
    pub fn code(&self, polarity: i8) -> f64 {
        if polarity > 0 {
            self.code_plus
        } else {
            self.code_minus
        }
    }

    /// `Some(+1 | -1)` for a polarity voxel, `None` for padding.
    #[inline]
    pub fn classify(&self, value: f64) -> Option<i8> {
        if value >= self.thresh_plus {
            Some(1)
        } else if value <= self.thresh_minus {
            Some(-1)
        } else {
            None
        }
    }

    #[inline]
    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.code_minus, self.code_plus)
    }
}

/// Dense `L x H x W` grid, depth-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    data: Vec<f64>,
    depth: usize,
    geometry: SensorGeometry,
    coding: VoxelCoding,
    fill_counts: Vec<u32>,
}

impl VoxelGrid {
    /// Wrap real-valued data (e.g. network output). Fill counts are derived
    /// by decoding each column.
    pub fn from_tensor(tensor: &Tensor, geometry: SensorGeometry, coding: VoxelCoding) -> Result<Self> {
        let shape = tensor.shape();
        let expected = [shape.first().copied().unwrap_or(0), geometry.height(), geometry.width()];
        if shape.len() != 3 || shape[1..] != expected[1..] {
            return Err(Error::ShapeMismatch { expected: expected.to_vec(), got: shape.to_vec() });
        }
        if tensor.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("voxel grid"));
        }
        let mut grid = Self {
            data: tensor.data().to_vec(),
            depth: shape[0],
            geometry,
            coding,
            fill_counts: vec![0; geometry.pixel_count()],
        };
        for idx in 0..geometry.pixel_count() {
            grid.fill_counts[idx] = grid.decoded_len(idx) as u32;
        }
        Ok(grid)
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.depth
    }

    #[inline]
    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    #[inline]
    pub fn coding(&self) -> VoxelCoding {
        self.coding
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Number of polarity voxels at each pixel (raster order).
    #[inline]
    pub fn fill_counts(&self) -> &[u32] {
        &self.fill_counts
    }

    #[inline]
    pub fn fill_count(&self, x: usize, y: usize) -> u32 {
        self.fill_counts[self.geometry.index(x, y)]
    }

    /// `true` for the `0 x H x W` grid of an empty stream.
    pub fn is_empty(&self) -> bool {
        self.depth == 0
    }

    #[inline]
    pub fn get(&self, k: usize, x: usize, y: usize) -> f64 {
        self.data[k * self.geometry.pixel_count() + self.geometry.index(x, y)]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(vec![self.depth, self.geometry.height(), self.geometry.width()], self.data.clone())
            .expect("grid data matches its shape")
    }

    /// Depth fiber at pixel `(x, y)`.
    pub fn column(&self, x: usize, y: usize) -> Result<Vec<f64>> {
        if !self.geometry.contains(x as u32, y as u32) {
            return Err(Error::OutOfBounds {
                x: x as u32,
                y: y as u32,
                width: self.geometry.width,
                height: self.geometry.height,
            });
        }
        Ok(self.column_at(self.geometry.index(x, y)))
    }

    pub(crate) fn column_at(&self, pixel_index: usize) -> Vec<f64> {
        let plane = self.geometry.pixel_count();
        (0..self.depth).map(|k| self.data[k * plane + pixel_index]).collect()
    }

    fn decoded_len(&self, pixel_index: usize) -> usize {
        let plane = self.geometry.pixel_count();
        (0..self.depth)
            .take_while(|&k| self.coding.classify(self.data[k * plane + pixel_index]).is_some())
            .count()
    }

    /// Decoded polarity sequence of one pixel.
    pub(crate) fn decode_at(&self, pixel_index: usize) -> Vec<i8> {
        let plane = self.geometry.pixel_count();
        (0..self.depth)
            .map_while(|k| self.coding.classify(self.data[k * plane + pixel_index]))
            .collect()
    }
}

/// Encode a stream as a voxel grid with depth `L = max` per-pixel event count.
///
/// An empty stream yields a `0 x H x W` grid (see [`VoxelGrid::is_empty`]).
pub fn encode(stream: &EventStream, coding: VoxelCoding) -> Result<VoxelGrid> {
    coding.validate()?;
    let geometry = stream.geometry();
    let plane = geometry.pixel_count();
    let mut fill_counts = crate::event::pixel_counts(stream);
    let depth = fill_counts.iter().copied().max().unwrap_or(0) as usize;
    let mut data = vec![coding.code_pad; depth * plane];
    // Events arrive in time order, so each pixel's slots fill from depth 0.
    fill_counts.iter_mut().for_each(|c| *c = 0);
    for e in stream.events() {
        let idx = geometry.index(e.x as usize, e.y as usize);
        let k = fill_counts[idx] as usize;
        data[k * plane + idx] = coding.code(e.p);
        fill_counts[idx] += 1;
    }
    Ok(VoxelGrid { data, depth, geometry, coding, fill_counts })
}

/// Per-pixel polarity sequences. A column ends at its first padding voxel;
/// pixels with no events are absent.
pub fn decode(grid: &VoxelGrid) -> BTreeMap<Pixel, Vec<i8>> {
    let g = grid.geometry();
    let mut out = BTreeMap::new();
    for y in 0..g.height() {
        for x in 0..g.width() {
            let seq = grid.decode_at(g.index(x, y));
            if !seq.is_empty() {
                out.insert(Pixel::new(x as u16, y as u16), seq);
            }
        }
    }
    out
}
