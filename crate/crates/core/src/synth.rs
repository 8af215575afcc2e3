//! Synthetic event generation from moving piecewise-constant patterns, and the
//! HR -> LR stream downsampling used to build evaluation pairs.
//!
//! Each pixel integrates the change of its log intensity since its last event
//! and emits one event per contrast-threshold crossing, at the time step where
//! the crossing happens.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Pixel, SensorGeometry};
use crate::math;

/// Intensity outside the pattern.
pub const BACKGROUND: f64 = 0.2;
/// Intensity inside the pattern.
pub const FOREGROUND: f64 = 1.0;

/// Moving bright pattern on a dark background. Sizes and positions are in
/// pixels; `origin` is the pattern's position at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pattern {
    /// Full-height vertical bar; `origin.0` is its left edge.
    Bar { width: f64 },
    /// Checkerboard with square side `square`; `origin` is a square corner.
    Checkerboard { square: f64 },
    /// Disk centred on `origin`.
    Disk { radius: f64 },
}

impl Pattern {
    /// Whether scene point `(px, py)` is bright when the pattern sits at `(ox, oy)`.
    fn covers(&self, px: f64, py: f64, ox: f64, oy: f64) -> bool {
        match *self {
            Pattern::Bar { width } => px >= ox && px < ox + width,
            Pattern::Checkerboard { square } => {
                let cx = math::floor((px - ox) / square) as i64;
                let cy = math::floor((py - oy) / square) as i64;
                (cx + cy).rem_euclid(2) == 0
            }
            Pattern::Disk { radius } => {
                let (dx, dy) = (px - ox, py - oy);
                dx * dx + dy * dy < radius * radius
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub pattern: Pattern,
    pub origin: (f64, f64),
    /// Pixels per millisecond along x and y.
    pub velocity: (f64, f64),
    pub duration_ms: f64,
    pub geometry: SensorGeometry,
    /// Log-intensity change per event.
    pub contrast: f64,
    /// Simulation time step in microseconds.
    pub dt_us: u64,
    /// Area samples per pixel axis used to render partially covered pixels.
    pub supersample: usize,
}

impl SynthConfig {
    /// Bar of width `W/8` (at least 2 px) starting a quarter of the way in.
    pub fn bar(geometry: SensorGeometry, velocity: (f64, f64), duration_ms: f64) -> Self {
        let width = (geometry.width() as f64 / 8.0).max(2.0);
        Self {
            pattern: Pattern::Bar { width },
            origin: (geometry.width() as f64 / 4.0 - width / 2.0, 0.0),
            velocity,
            duration_ms,
            geometry,
            contrast: 0.2,
            dt_us: 10,
            supersample: 4,
        }
    }

    /// Checkerboard with squares of `W/4` (at least 2 px) anchored at the origin.
    pub fn checkerboard(geometry: SensorGeometry, velocity: (f64, f64), duration_ms: f64) -> Self {
        let square = (geometry.width() as f64 / 4.0).max(2.0);
        Self { pattern: Pattern::Checkerboard { square }, origin: (0.0, 0.0), ..Self::bar(geometry, velocity, duration_ms) }
    }

    /// Disk of radius `min(W, H)/6` (at least 1 px) centred a third of the way in.
    pub fn disk(geometry: SensorGeometry, velocity: (f64, f64), duration_ms: f64) -> Self {
        let radius = (geometry.width().min(geometry.height()) as f64 / 6.0).max(1.0);
        Self {
            pattern: Pattern::Disk { radius },
            origin: (geometry.width() as f64 / 3.0, geometry.height() as f64 / 2.0),
            ..Self::bar(geometry, velocity, duration_ms)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.contrast > 0.0) {
            return bad("contrast threshold must be positive");
        }
        if self.dt_us == 0 {
            return bad("time step must be positive");
        }
        if self.supersample == 0 {
            return bad("supersampling must be at least 1");
        }
        if !(self.duration_ms >= 0.0) || !self.duration_ms.is_finite() {
            return bad("duration must be finite and non-negative");
        }
        let size_ok = match self.pattern {
            Pattern::Bar { width } => width > 0.0,
            Pattern::Checkerboard { square } => square > 0.0,
            Pattern::Disk { radius } => radius > 0.0,
        };
        if !size_ok {
            return bad("pattern size must be positive");
        }
        let travel = math::sqrt(self.velocity.0 * self.velocity.0 + self.velocity.1 * self.velocity.1) * self.duration_ms;
        let fov = self.geometry.width().max(self.geometry.height()) as f64;
        if !travel.is_finite() || travel > fov {
            return bad("pattern travel exceeds the field of view");
        }
        Ok(())
    }

    /// Whether the motion is degenerate (no displacement), which yields no events.
    pub fn is_static(&self) -> bool {
        self.velocity == (0.0, 0.0) || self.duration_ms == 0.0
    }
}

/// Log intensity of every pixel with the pattern at `(ox, oy)`.
fn render_log_frame(cfg: &SynthConfig, ox: f64, oy: f64, out: &mut [f64]) {
    let g = cfg.geometry;
    let n = cfg.supersample;
    let inv = 1.0 / n as f64;
    for y in 0..g.height() {
        for x in 0..g.width() {
            let mut covered = 0usize;
            for sy in 0..n {
                let py = y as f64 + (sy as f64 + 0.5) * inv;
                for sx in 0..n {
                    let px = x as f64 + (sx as f64 + 0.5) * inv;
                    covered += cfg.pattern.covers(px, py, ox, oy) as usize;
                }
            }
            let frac = covered as f64 / (n * n) as f64;
            out[g.index(x, y)] = math::ln(BACKGROUND + (FOREGROUND - BACKGROUND) * frac);
        }
    }
}

/// Signed number of threshold crossings between the pixel's reference level
/// and its current log intensity; the reference moves by `c` per crossing.
fn threshold_crossings(level: &mut f64, now: f64, c: f64, tol: f64) -> i32 {
    let mut n = 0;
    while now - *level >= c - tol {
        *level += c;
        n += 1;
    }
    while *level - now >= c - tol {
        *level -= c;
        n -= 1;
    }
    n
}

/// Run the event generation model. Static configurations produce an empty stream.
pub fn simulate(cfg: &SynthConfig) -> Result<EventStream> {
    cfg.validate()?;
    let g = cfg.geometry;
    let duration_us = math::round_half_up(cfg.duration_ms * 1000.0) as u64;
    if cfg.is_static() {
        return Ok(EventStream::empty(g, duration_us));
    }
    let mut reference = vec![0.0; g.pixel_count()];
    render_log_frame(cfg, cfg.origin.0, cfg.origin.1, &mut reference);
    let mut frame = vec![0.0; g.pixel_count()];
    // Guards against float drift when the change is an exact multiple of c.
    let tol = 1e-9 * cfg.contrast;
    let mut events = Vec::new();
    let steps = duration_us / cfg.dt_us;
    for step in 1..=steps {
        let t = step * cfg.dt_us;
        let ms = t as f64 / 1000.0;
        render_log_frame(cfg, cfg.origin.0 + cfg.velocity.0 * ms, cfg.origin.1 + cfg.velocity.1 * ms, &mut frame);
        for (idx, (&now, level)) in frame.iter().zip(reference.iter_mut()).enumerate() {
            let crossings = threshold_crossings(level, now, cfg.contrast, tol);
            let (x, y) = ((idx % g.width()) as u16, (idx / g.width()) as u16);
            let p = if crossings > 0 { 1 } else { -1 };
            for _ in 0..crossings.unsigned_abs() {
                events.push(Event::new(x, y, t, p));
            }
        }
    }
    EventStream::new(events, g, Some(duration_us))
}

/// Map HR events onto the `factor`-times coarser grid, then merge same-polarity
/// events of one LR pixel that fall within `refractory_us` of the last kept
/// event (the earliest timestamp is kept). `refractory_us = 0` merges nothing.
pub fn downsample_stream(hr: &EventStream, factor: usize, refractory_us: u64) -> Result<EventStream> {
    if factor < 1 {
        return Err(Error::BadFactor(factor));
    }
    let g = hr.geometry();
    let lr_geometry = SensorGeometry::new(g.width.div_ceil(factor as u32), g.height.div_ceil(factor as u32))?;
    // Last kept timestamp per (LR pixel, polarity).
    let mut last_kept: BTreeMap<(Pixel, i8), u64> = BTreeMap::new();
    let mut out = Vec::with_capacity(hr.len());
    for e in hr.events() {
        let lr = Event::new(e.x / factor as u16, e.y / factor as u16, e.t, e.p);
        let key = (lr.pixel(), lr.p);
        match last_kept.get(&key) {
            Some(&t0) if lr.t - t0 < refractory_us => continue,
            _ => {
                last_kept.insert(key, lr.t);
                out.push(lr);
            }
        }
    }
    EventStream::new(out, lr_geometry, Some(hr.t_end()))
}

/// Baseline upscaling: every event is copied to all `factor x factor`
/// subpixels of its pixel with its original timestamp.
pub fn upsample_stream_nearest(lr: &EventStream, factor: usize) -> Result<EventStream> {
    if factor < 1 {
        return Err(Error::BadFactor(factor));
    }
    let geometry = lr.geometry().scaled(factor)?;
    let f = factor as u16;
    let mut out = Vec::with_capacity(lr.len() * factor * factor);
    for e in lr.events() {
        for dy in 0..f {
            for dx in 0..f {
                out.push(Event::new(e.x * f + dx, e.y * f + dy, e.t, e.p));
            }
        }
    }
    EventStream::new(out, geometry, Some(lr.t_end()))
}
