//! Stream comparison on time-binned, polarity-split count grids.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::event::{pixel_counts, EventStream, SensorGeometry};
use crate::math;

pub const DEFAULT_BINS: usize = 16;

/// `B x H x W x 2` event counts; channel 0 holds negative, channel 1 positive events.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedGrid {
    bins: usize,
    geometry: SensorGeometry,
    counts: Vec<u32>,
}

impl BinnedGrid {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    #[inline]
    fn index(&self, bin: usize, x: usize, y: usize, positive: bool) -> usize {
        ((bin * self.geometry.height() + y) * self.geometry.width() + x) * 2 + positive as usize
    }

    pub fn get(&self, bin: usize, x: usize, y: usize, polarity: i8) -> u32 {
        self.counts[self.index(bin, x, y, polarity > 0)]
    }

    /// Counts divided by the grid's own maximum (all zeros for an empty grid).
    pub fn normalized(&self) -> Vec<f64> {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        if max == 0 {
            return vec![0.0; self.counts.len()];
        }
        let inv = 1.0 / max as f64;
        self.counts.iter().map(|&c| c as f64 * inv).collect()
    }
}

/// Bin a stream over `[0, t_end]`; bin index is `min(floor(t * B / T), B - 1)`.
pub fn bin(stream: &EventStream, bins: usize) -> Result<BinnedGrid> {
    bin_with_extent(stream, bins, stream.t_end())
}

pub fn bin_with_extent(stream: &EventStream, bins: usize, t_end: u64) -> Result<BinnedGrid> {
    if bins == 0 {
        return Err(Error::BadBinCount);
    }
    let geometry = stream.geometry();
    let mut grid = BinnedGrid { bins, geometry, counts: vec![0; bins * geometry.pixel_count() * 2] };
    for e in stream.events() {
        let b = if t_end == 0 {
            0
        } else {
            ((e.t as u128 * bins as u128 / t_end as u128) as usize).min(bins - 1)
        };
        let idx = grid.index(b, e.x as usize, e.y as usize, e.p > 0);
        grid.counts[idx] += 1;
    }
    Ok(grid)
}

/// RMSE between two max-normalized count grids.
pub fn rmse_grids(a: &BinnedGrid, b: &BinnedGrid) -> Result<f64> {
    if a.geometry != b.geometry || a.bins != b.bins {
        return Err(Error::GeometryMismatch);
    }
    let (na, nb) = (a.normalized(), b.normalized());
    let sum: f64 = na.iter().zip(&nb).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(math::sqrt(sum / na.len() as f64))
}

/// RMSE between two streams of equal geometry, binned over the larger of the
/// two time extents.
pub fn rmse(a: &EventStream, b: &EventStream, bins: usize) -> Result<f64> {
    if a.geometry() != b.geometry() {
        return Err(Error::GeometryMismatch);
    }
    let t_end = a.t_end().max(b.t_end());
    rmse_grids(&bin_with_extent(a, bins, t_end)?, &bin_with_extent(b, bins, t_end)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamStats {
    pub event_count: u64,
    pub positive: u64,
    pub negative: u64,
    pub events_per_second: f64,
    /// `positive / negative`; `None` when there are no negative events.
    pub polarity_ratio: Option<f64>,
    /// `histogram[n]` = number of pixels with exactly `n` events.
    pub pixel_histogram: Vec<u64>,
    /// Maximum per-pixel event count (the voxel-grid depth).
    pub depth: usize,
}

pub fn stats(stream: &EventStream) -> StreamStats {
    let counts = pixel_counts(stream);
    let depth = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut pixel_histogram = vec![0u64; depth + 1];
    for &c in &counts {
        pixel_histogram[c as usize] += 1;
    }
    let positive = stream.events().iter().filter(|e| e.p > 0).count() as u64;
    let event_count = stream.len() as u64;
    let negative = event_count - positive;
    let events_per_second = if stream.t_end() == 0 {
        0.0
    } else {
        event_count as f64 / (stream.t_end() as f64 * 1e-6)
    };
    StreamStats {
        event_count,
        positive,
        negative,
        events_per_second,
        polarity_ratio: (negative > 0).then(|| positive as f64 / negative as f64),
        pixel_histogram,
        depth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Event;

    fn geom() -> SensorGeometry {
        SensorGeometry::new(3, 2).unwrap()
    }

    #[test]
    fn single_event_lands_in_first_bin() {
        let s = EventStream::new(vec![Event::new(1, 1, 0, 1)], geom(), Some(100)).unwrap();
        let g = bin(&s, 16).unwrap();
        assert_eq!(g.get(0, 1, 1, 1), 1);
        assert_eq!(g.total(), 1);
    }

    #[test]
    fn last_timestamp_goes_to_last_bin() {
        let s = EventStream::new(vec![Event::new(0, 0, 100, -1)], geom(), Some(100)).unwrap();
        assert_eq!(bin(&s, 4).unwrap().get(3, 0, 0, -1), 1);
    }

    #[test]
    fn single_bin_is_spatial_histogram() {
        let s = EventStream::new(
            vec![Event::new(0, 0, 3, 1), Event::new(0, 0, 90, 1), Event::new(2, 1, 50, -1)],
            geom(),
            Some(100),
        )
        .unwrap();
        let g = bin(&s, 1).unwrap();
        assert_eq!(g.get(0, 0, 0, 1), 2);
        assert_eq!(g.get(0, 2, 1, -1), 1);
        assert_eq!(bin(&s, 0), Err(Error::BadBinCount));
    }

    #[test]
    fn rmse_basics() {
        let a = EventStream::new(vec![Event::new(0, 0, 3, 1)], geom(), Some(100)).unwrap();
        let b = EventStream::new(vec![Event::new(0, 0, 3, 1), Event::new(1, 0, 60, -1)], geom(), Some(100)).unwrap();
        assert_eq!(rmse(&a, &a, 16).unwrap(), 0.0);
        assert!(rmse(&a, &b, 16).unwrap() > 0.0);
        assert_eq!(rmse(&a, &b, 16).unwrap(), rmse(&b, &a, 16).unwrap());
        let other = EventStream::empty(SensorGeometry::new(2, 2).unwrap(), 100);
        assert_eq!(rmse(&a, &other, 16), Err(Error::GeometryMismatch));
    }

    #[test]
    fn empty_stats_are_zero() {
        let st = stats(&EventStream::empty(geom(), 0));
        assert_eq!(st.event_count, 0);
        assert_eq!(st.events_per_second, 0.0);
        assert_eq!(st.polarity_ratio, None);
        assert_eq!(st.depth, 0);
        assert_eq!(st.pixel_histogram, vec![6]);
    }

    #[test]
    fn stats_counts() {
        let s = EventStream::new(
            vec![Event::new(0, 0, 3, 1), Event::new(0, 0, 9, -1), Event::new(2, 1, 50, 1)],
            geom(),
            Some(1_000_000),
        )
        .unwrap();
        let st = stats(&s);
        assert_eq!(st.event_count, 3);
        assert_eq!(st.events_per_second, 3.0);
        assert_eq!(st.polarity_ratio, Some(2.0));
        assert_eq!(st.depth, 2);
        assert_eq!(st.pixel_histogram, vec![4, 1, 1]);
    }
}
