//! Fusing the spatial and temporal outputs into an SR stream, and the
//! end-to-end pipeline.

use alloc::vec::Vec;

use crate::error::{Error, Result, Stage};
use crate::event::{Event, EventStream, SensorGeometry};
use crate::math;
use crate::spatial::{self, SpatialConfig, SpatialModel, TrainLog};
use crate::temporal::{self, TemporalConfig, TemporalModel, TimestampField};
use crate::voxel::{self, VoxelCoding, VoxelGrid};

/// Emit one event per decoded depth slot of every SR pixel, timestamped
/// `round(ts * T)` (half up, capped at `T`).
pub fn assemble(sr_grid: &VoxelGrid, ts: &TimestampField, t_end: u64, geometry_out: SensorGeometry) -> Result<EventStream> {
    let g = sr_grid.geometry();
    if g != geometry_out {
        return Err(Error::FieldMismatch("output geometry differs from the SR grid".into()));
    }
    if ts.geometry != g || ts.depth != sr_grid.depth() {
        return Err(Error::FieldMismatch("timestamp field shape differs from the SR grid".into()));
    }
    let mut events = Vec::new();
    for i in 0..g.pixel_count() {
        if sr_grid.fill_counts()[i] == 0 {
            continue;
        }
        let (x, y) = ((i % g.width()) as u16, (i / g.width()) as u16);
        for (k, p) in sr_grid.decode_at(i).into_iter().enumerate() {
            let v = ts.values[i * ts.depth + k];
            if !v.is_finite() {
                return Err(Error::NonFinite("timestamp field"));
            }
            let t = (math::round_half_up(v.clamp(0.0, 1.0) * t_end as f64) as u64).min(t_end);
            events.push(Event::new(x, y, t, p));
        }
    }
    EventStream::new(events, geometry_out, Some(t_end))
}

/// Source of wall-clock readings, in seconds from any fixed origin.
pub trait Clock {
    fn now(&mut self) -> f64;
}

/// A clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&mut self) -> f64 {
        0.0
    }
}

#[cfg(feature = "std")]
#[derive(Debug, Clone, Copy)]
pub struct SystemClock(std::time::Instant);

#[cfg(feature = "std")]
impl Default for SystemClock {
    fn default() -> Self {
        Self(std::time::Instant::now())
    }
}

#[cfg(feature = "std")]
impl Clock for SystemClock {
    fn now(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub scale: usize,
    pub lr_events: usize,
    pub sr_events: usize,
    pub lr_geometry: SensorGeometry,
    pub sr_geometry: SensorGeometry,
    pub depth: usize,
    pub t_end: u64,
    pub spatial_log: TrainLog,
    pub temporal_log: TrainLog,
    /// Seconds spent in each stage, in pipeline order.
    pub stage_seconds: Vec<(Stage, f64)>,
    pub spatial_config: SpatialConfig,
    pub temporal_config: TemporalConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrResult {
    pub stream: EventStream,
    pub diagnostics: Diagnostics,
    pub spatial_model: SpatialModel,
    pub temporal_model: TemporalModel,
}

pub fn super_resolve_with_clock(
    stream: &EventStream,
    scale: usize,
    spatial_cfg: &SpatialConfig,
    temporal_cfg: &TemporalConfig,
    clock: &mut dyn Clock,
) -> Result<SrResult> {
    if scale < 1 {
        return Err(Error::BadFactor(scale));
    }
    if stream.is_empty() {
        return Err(Error::EmptyStream.at(Stage::Encode));
    }
    let spatial_cfg = SpatialConfig { scale, ..spatial_cfg.clone() };
    let t_end = stream.t_end();
    let sr_geometry = stream.geometry().scaled(scale)?;
    let mut stage_seconds = Vec::new();
    let mut timed = |stage: Stage, start: f64, clock: &mut dyn Clock| stage_seconds.push((stage, clock.now() - start));

    let start = clock.now();
    let grid = voxel::encode(stream, VoxelCoding::default()).map_err(|e| e.at(Stage::Encode))?;
    timed(Stage::Encode, start, clock);

    let start = clock.now();
    let spatial_model = spatial::train_spatial(&grid, &spatial_cfg).map_err(|e| e.at(Stage::TrainSpatial))?;
    timed(Stage::TrainSpatial, start, clock);

    let start = clock.now();
    let sr_grid = spatial::infer_spatial(&spatial_model, &grid, scale).map_err(|e| e.at(Stage::InferSpatial))?;
    timed(Stage::InferSpatial, start, clock);

    let start = clock.now();
    let temporal_model =
        temporal::train_temporal(stream, &grid, temporal_cfg).map_err(|e| e.at(Stage::TrainTemporal))?;
    timed(Stage::TrainTemporal, start, clock);

    let start = clock.now();
    let field =
        temporal::predict_timestamps(&temporal_model, &sr_grid, t_end).map_err(|e| e.at(Stage::PredictTimestamps))?;
    timed(Stage::PredictTimestamps, start, clock);

    let start = clock.now();
    let out = assemble(&sr_grid, &field, t_end, sr_geometry).map_err(|e| e.at(Stage::Assemble))?;
    timed(Stage::Assemble, start, clock);

    let diagnostics = Diagnostics {
        scale,
        lr_events: stream.len(),
        sr_events: out.len(),
        lr_geometry: stream.geometry(),
        sr_geometry,
        depth: grid.depth(),
        t_end,
        spatial_log: spatial_model.log.clone(),
        temporal_log: temporal_model.log.clone(),
        stage_seconds,
        spatial_config: spatial_cfg,
        temporal_config: temporal_cfg.clone(),
    };
    Ok(SrResult { stream: out, diagnostics, spatial_model, temporal_model })
}

/// Run the whole pipeline: encode, spatial training and inference, temporal
/// training and prediction, assembly. `spatial_cfg.scale` is overridden by
/// `scale`.
pub fn super_resolve(
    stream: &EventStream,
    scale: usize,
    spatial_cfg: &SpatialConfig,
    temporal_cfg: &TemporalConfig,
) -> Result<SrResult> {
    #[cfg(feature = "std")]
    let mut clock = SystemClock::default();
    #[cfg(not(feature = "std"))]
    let mut clock = NoClock;
    super_resolve_with_clock(stream, scale, spatial_cfg, temporal_cfg, &mut clock)
}
