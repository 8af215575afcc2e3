//! Events, streams and sensor geometry.
//!
//! Coordinates are 0-based in memory. Streams are kept sorted by
//! `(t, y, x, p)` so every downstream computation sees one total order.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

/// A single sensor event: pixel `(x, y)`, timestamp `t` in microseconds and
/// polarity `p` (`-1` or `+1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: u64,
    pub p: i8,
}

impl Event {
    pub const fn new(x: u16, y: u16, t: u64, p: i8) -> Self {
        Self { x, y, t, p }
    }

    #[inline]
    pub fn pixel(&self) -> Pixel {
        Pixel { x: self.x, y: self.y }
    }

    /// Total order used for every stream: time first, then raster position,
    /// then polarity.
    #[inline]
    pub fn stream_order(&self, other: &Self) -> Ordering {
        (self.t, self.y, self.x, self.p).cmp(&(other.t, other.y, other.x, other.p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pixel {
    pub x: u16,
    pub y: u16,
}

impl Pixel {
    pub const fn new(x: u16, y: u16) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SensorGeometry {
    pub width: u32,
    pub height: u32,
}

impl SensorGeometry {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        // Event coordinates are stored as u16.
        if width == 0 || height == 0 || width > 1 << 16 || height > 1 << 16 {
            return Err(Error::BadGeometry { width, height });
        }
        Ok(Self { width, height })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width as usize
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height as usize
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width() * self.height()
    }

    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height
    }

    /// Geometry scaled by an integer factor on both axes.
    pub fn scaled(&self, factor: usize) -> Result<Self> {
        Self::new(self.width * factor as u32, self.height * factor as u32)
    }

    /// Raster index of a pixel (row-major).
    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width() + x
    }
}

/// One pixel's events as a time-ordered train of signed unit impulses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImpulseTrain {
    pub pixel: Pixel,
    /// `(t, p)` pairs sorted by `t`.
    pub entries: Vec<(u64, i8)>,
}

impl ImpulseTrain {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn polarities(&self) -> impl Iterator<Item = i8> + '_ {
        self.entries.iter().map(|&(_, p)| p)
    }
}

/// A validated, sorted event stream with its time extent `t_end` (µs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    geometry: SensorGeometry,
    events: Vec<Event>,
    t_end: u64,
}

impl EventStream {
    /// Validate and sort raw events. `t_hint` sets the time extent; when absent
    /// the extent is the last timestamp (0 for an empty stream).
    pub fn new(raw_events: Vec<Event>, geometry: SensorGeometry, t_hint: Option<u64>) -> Result<Self> {
        validate_stream(raw_events, geometry, t_hint)
    }

    pub fn empty(geometry: SensorGeometry, t_end: u64) -> Self {
        Self { geometry, events: Vec::new(), t_end }
    }

    #[inline]
    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    #[inline]
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Time extent `T` in microseconds.
    #[inline]
    pub fn t_end(&self) -> u64 {
        self.t_end
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.events.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn max_timestamp(&self) -> Option<u64> {
        self.events.last().map(|e| e.t)
    }
}

/// Sort and validate raw events against a geometry.
///
/// Input order is irrelevant; duplicate events are preserved.
pub fn validate_stream(
    mut raw_events: Vec<Event>,
    geometry: SensorGeometry,
    t_hint: Option<u64>,
) -> Result<EventStream> {
    let mut max_t = 0;
    for e in &raw_events {
        if !geometry.contains(e.x as u32, e.y as u32) {
            return Err(Error::OutOfBounds {
                x: e.x as u32,
                y: e.y as u32,
                width: geometry.width,
                height: geometry.height,
            });
        }
        if e.p != 1 && e.p != -1 {
            return Err(Error::BadPolarity(e.p));
        }
        max_t = max_t.max(e.t);
    }
    let t_end = match t_hint {
        Some(hint) if !raw_events.is_empty() && hint < max_t => {
            return Err(Error::TimeExtentTooSmall { hint, max: max_t })
        }
        Some(hint) => hint,
        None => max_t,
    };
    raw_events.sort_unstable_by(Event::stream_order);
    Ok(EventStream { geometry, events: raw_events, t_end })
}

/// Split a stream into per-pixel impulse trains. Pixels without events are absent.
pub fn group_by_pixel(stream: &EventStream) -> BTreeMap<Pixel, ImpulseTrain> {
    let mut trains: BTreeMap<Pixel, ImpulseTrain> = BTreeMap::new();
    for e in stream.events() {
        trains
            .entry(e.pixel())
            .or_insert_with(|| ImpulseTrain { pixel: e.pixel(), entries: Vec::new() })
            .entries
            .push((e.t, e.p));
    }
    trains
}

/// Per-pixel event counts in raster order.
pub fn pixel_counts(stream: &EventStream) -> Vec<u32> {
    let g = stream.geometry();
    let mut counts = alloc::vec![0u32; g.pixel_count()];
    for e in stream.events() {
        counts[g.index(e.x as usize, e.y as usize)] += 1;
    }
    counts
}

/// Event coordinates mapped to the unit cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedEvent {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

#[inline]
pub fn normalize_axis(value: usize, extent: usize) -> f64 {
    if extent <= 1 {
        0.0
    } else {
        value as f64 / (extent - 1) as f64
    }
}

/// Map every event to `(x/(W-1), y/(H-1), t/T)`.
pub fn normalize(stream: &EventStream) -> Result<Vec<NormalizedEvent>> {
    if stream.is_empty() {
        return Ok(Vec::new());
    }
    if stream.t_end() == 0 {
        return Err(Error::ZeroExtent);
    }
    let g = stream.geometry();
    let t_end = stream.t_end() as f64;
    Ok(stream
        .events()
        .iter()
        .map(|e| NormalizedEvent {
            x: normalize_axis(e.x as usize, g.width()),
            y: normalize_axis(e.y as usize, g.height()),
            t: e.t as f64 / t_end,
        })
        .collect())
}

/// Inverse of [`normalize`] for a fixed geometry and extent.
pub fn denormalize(n: &NormalizedEvent, geometry: SensorGeometry, t_end: u64) -> (u16, u16, u64) {
    let back = |v: f64, extent: usize| -> u64 {
        if extent <= 1 {
            0
        } else {
            crate::math::round_half_up(v * (extent - 1) as f64) as u64
        }
    };
    (
        back(n.x, geometry.width()) as u16,
        back(n.y, geometry.height()) as u16,
        crate::math::round_half_up(n.t * t_end as f64) as u64,
    )
}
