//! Temporal branch: an MLP regresses each pixel's normalized timestamp train
//! from its position and voxel column, then fills in timestamps for the
//! super-resolved pixels.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::event::{group_by_pixel, normalize_axis, pixel_counts, EventStream, SensorGeometry};
use crate::nn::{self, AdamConfig, AdamState, LrSchedule, LrScheduler, Network, NetworkSpec, Tensor};
use crate::spatial::{TrainLog, TrainRecord};
use crate::voxel::VoxelGrid;

/// Rows per forward pass at prediction time.
const PREDICT_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Pixels per optimizer step; `None` trains on every pixel at once.
    pub batch: Option<usize>,
    pub hidden: usize,
    pub hidden_layers: usize,
    pub schedule: LrSchedule,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            lr: 1e-3,
            seed: 0,
            batch: None,
            hidden: 128,
            hidden_layers: 9,
            schedule: LrSchedule::default(),
        }
    }
}

impl TemporalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.hidden < 1 || self.hidden_layers < 1 || self.batch == Some(0) {
            return Err(Error::InvalidConfig("temporal training parameters must be positive".into()));
        }
        Ok(())
    }

    pub fn network_spec(&self, depth: usize) -> NetworkSpec {
        NetworkSpec::mlp(depth + 2, self.hidden, self.hidden_layers, depth)
    }
}

/// `[x, y, column...]`; positions must lie in `[0, 1]`.
pub fn encode_features(column: &[f64], pos: (f64, f64)) -> Result<Vec<f64>> {
    let ok = |v: f64| (0.0..=1.0).contains(&v);
    if !ok(pos.0) || !ok(pos.1) {
        return Err(Error::BadPosition(pos.0, pos.1));
    }
    let mut f = Vec::with_capacity(column.len() + 2);
    f.push(pos.0);
    f.push(pos.1);
    f.extend_from_slice(column);
    Ok(f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalModel {
    pub network: Network,
    /// Geometry of the stream the model was fitted on.
    pub geometry: SensorGeometry,
    pub depth: usize,
    pub log: TrainLog,
}

/// Normalized timestamps for every pixel of an SR grid, `depth` per pixel in
/// raster order. Entries past a pixel's fill count are meaningless.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampField {
    pub geometry: SensorGeometry,
    pub depth: usize,
    pub t_end: u64,
    pub values: Vec<f64>,
}

impl TimestampField {
    pub fn get(&self, x: usize, y: usize, k: usize) -> f64 {
        self.values[self.geometry.index(x, y) * self.depth + k]
    }

    /// The stream's own normalized timestamps, laid out like its voxel grid.
    pub fn from_stream(stream: &EventStream) -> Self {
        let g = stream.geometry();
        let t_end = stream.t_end();
        let depth = pixel_counts(stream).into_iter().max().unwrap_or(0) as usize;
        let mut values = vec![0.0; g.pixel_count() * depth];
        for (px, train) in group_by_pixel(stream) {
            let base = g.index(px.x as usize, px.y as usize) * depth;
            for (k, &(t, _)) in train.entries.iter().enumerate() {
                values[base + k] = if t_end == 0 { 0.0 } else { t as f64 / t_end as f64 };
            }
        }
        Self { geometry: g, depth, t_end, values }
    }
}

/// Training set for the temporal network: features, normalized targets and
/// the mask of real (non-padding) depth slots. Empty pixels are left out.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSamples {
    pub rows: usize,
    pub features: Vec<f64>,
    pub targets: Vec<f64>,
    pub mask: Vec<f64>,
}

pub fn temporal_samples(stream: &EventStream, grid: &VoxelGrid) -> Result<TemporalSamples> {
    let g = stream.geometry();
    if grid.geometry() != g {
        return Err(Error::SourceMismatch("grid geometry differs from stream geometry".into()));
    }
    if pixel_counts(stream).as_slice() != grid.fill_counts() {
        return Err(Error::SourceMismatch("grid contents differ from stream".into()));
    }
    let depth = grid.depth();
    let t_end = stream.t_end();
    let mut s = TemporalSamples { rows: 0, features: Vec::new(), targets: Vec::new(), mask: Vec::new() };
    for (pixel, train) in group_by_pixel(stream) {
        let (x, y) = (pixel.x as usize, pixel.y as usize);
        let pos = (normalize_axis(x, g.width()), normalize_axis(y, g.height()));
        s.features.extend(encode_features(&grid.column(x, y)?, pos)?);
        for k in 0..depth {
            match train.entries.get(k) {
                Some(&(t, _)) => {
                    s.targets.push(if t_end == 0 { 0.0 } else { t as f64 / t_end as f64 });
                    s.mask.push(1.0);
                }
                None => {
                    s.targets.push(0.0);
                    s.mask.push(0.0);
                }
            }
        }
        s.rows += 1;
    }
    Ok(s)
}

fn gather(src: &[f64], width: usize, rows: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * width);
    for &r in rows {
        out.extend_from_slice(&src[r * width..(r + 1) * width]);
    }
    out
}

fn evaluate(net: &Network, s: &TemporalSamples, depth: usize) -> Result<f64> {
    let input = Tensor::from_vec(vec![s.rows, depth + 2], s.features.clone())?;
    let target = Tensor::from_vec(vec![s.rows, depth], s.targets.clone())?;
    let mask = Tensor::from_vec(vec![s.rows, depth], s.mask.clone())?;
    nn::mse_loss(&net.predict(&input)?, &target, Some(&mask))
}

/// Fit the temporal network on a stream and its own voxel grid.
pub fn train_temporal(stream: &EventStream, grid: &VoxelGrid, cfg: &TemporalConfig) -> Result<TemporalModel> {
    cfg.validate()?;
    let samples = temporal_samples(stream, grid)?;
    if samples.rows == 0 {
        return Err(Error::EmptyStream);
    }
    let depth = grid.depth();
    let mut network = Network::new(cfg.network_spec(depth), depth + 2, cfg.seed)?;
    let mut adam = AdamState::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() }, network.params())?;
    let mut scheduler = LrScheduler::new(cfg.schedule.clone());
    let mut rng = nn::seeded_rng(cfg.seed ^ 0x7e3f_0000_0000_0001);

    let batch = cfg.batch.unwrap_or(samples.rows).min(samples.rows);
    let mut order: Vec<usize> = (0..samples.rows).collect();
    let mut log = TrainLog { initial_loss: evaluate(&network, &samples, depth)?, ..TrainLog::default() };
    let mut last_finite = log.initial_loss;
    for epoch in 1..=cfg.epochs {
        if batch < samples.rows {
            nn::shuffle(&mut order, &mut rng);
        }
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for rows in order.chunks(batch) {
            let n = rows.len();
            let input = Tensor::from_vec(vec![n, depth + 2], gather(&samples.features, depth + 2, rows))?;
            let target = Tensor::from_vec(vec![n, depth], gather(&samples.targets, depth, rows))?;
            let mask = Tensor::from_vec(vec![n, depth], gather(&samples.mask, depth, rows))?;
            let (out, trace) = network.forward(&input).map_err(|e| match e {
                Error::NonFinite(_) => Error::NonFiniteLoss { step: epoch, last_finite },
                other => other,
            })?;
            let (loss, grad) = nn::mse_loss_with_grad(&out, &target, Some(&mask))?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step: epoch, last_finite });
            }
            let grads = network.backward(&trace, &grad)?;
            adam.step(network.params_mut(), &grads.params)?;
            epoch_loss += loss * n as f64;
            seen += n;
        }
        let loss = epoch_loss / seen as f64;
        last_finite = loss;
        log.records.push(TrainRecord { step: epoch, loss, lr: adam.lr() });
        if scheduler.observe(loss) {
            adam.decay();
        }
    }
    log.final_loss = evaluate(&network, &samples, depth)?;
    Ok(TemporalModel { network, geometry: stream.geometry(), depth, log })
}

/// Map an SR pixel index onto the source pixel frame (pixel centres aligned),
/// normalized to `[0, 1]`.
pub fn source_position(i: usize, sr_extent: usize, src_extent: usize) -> f64 {
    if src_extent <= 1 {
        return 0.0;
    }
    let u = (i as f64 + 0.5) * (src_extent as f64 / sr_extent as f64) - 0.5;
    u.clamp(0.0, (src_extent - 1) as f64) / (src_extent - 1) as f64
}

/// Predict normalized timestamps for every non-empty pixel of `sr_grid`.
pub fn predict_timestamps(model: &TemporalModel, sr_grid: &VoxelGrid, t_end: u64) -> Result<TimestampField> {
    let g = sr_grid.geometry();
    let depth = sr_grid.depth();
    let mut values = vec![0.0; g.pixel_count() * depth];
    if depth == 0 {
        return Ok(TimestampField { geometry: g, depth, t_end, values });
    }
    if depth != model.depth {
        return Err(Error::ShapeMismatch { expected: vec![model.depth], got: vec![depth] });
    }
    let src = model.geometry;
    let active: Vec<usize> = (0..g.pixel_count()).filter(|&i| sr_grid.fill_counts()[i] > 0).collect();
    for chunk in active.chunks(PREDICT_CHUNK) {
        let mut features = Vec::with_capacity(chunk.len() * (depth + 2));
        for &i in chunk {
            let (x, y) = (i % g.width(), i / g.width());
            let pos = (source_position(x, g.width(), src.width()), source_position(y, g.height(), src.height()));
            features.extend(encode_features(&sr_grid.column_at(i), pos)?);
        }
        let out = model.network.predict(&Tensor::from_vec(vec![chunk.len(), depth + 2], features)?)?;
        for (row, &i) in chunk.iter().enumerate() {
            for k in 0..depth {
                values[i * depth + k] = out.data()[row * depth + k].clamp(0.0, 1.0);
            }
        }
    }
    Ok(TimestampField { geometry: g, depth, t_end, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Event;
    use crate::voxel::{encode, VoxelCoding};

    fn grid_of(s: &EventStream) -> VoxelGrid {
        encode(s, VoxelCoding::default()).unwrap()
    }

    #[test]
    fn features_layout() {
        assert_eq!(encode_features(&[0.75, 0.5], (0.0, 1.0)).unwrap(), vec![0.0, 1.0, 0.75, 0.5]);
        assert_eq!(encode_features(&[0.5], (0.25, 0.5)).unwrap(), vec![0.25, 0.5, 0.5]);
        assert_eq!(encode_features(&[0.5], (1.5, 0.0)), Err(Error::BadPosition(1.5, 0.0)));
    }

    #[test]
    fn mask_covers_real_events_only() {
        let g = SensorGeometry::new(4, 4).unwrap();
        let s = EventStream::new(
            vec![Event::new(1, 2, 10, 1), Event::new(1, 2, 20, -1), Event::new(1, 2, 30, 1)],
            g,
            Some(100),
        )
        .unwrap();
        let samples = temporal_samples(&s, &grid_of(&s)).unwrap();
        assert_eq!(samples.rows, 1);
        assert_eq!(samples.mask.iter().sum::<f64>(), 3.0);
        assert_eq!(samples.targets, vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn source_mismatch() {
        let s = EventStream::new(vec![Event::new(0, 0, 10, 1)], SensorGeometry::new(4, 4).unwrap(), None).unwrap();
        let other = EventStream::new(vec![Event::new(0, 0, 10, 1)], SensorGeometry::new(4, 5).unwrap(), None).unwrap();
        assert!(matches!(train_temporal(&s, &grid_of(&other), &TemporalConfig::default()), Err(Error::SourceMismatch(_))));
    }

    #[test]
    fn source_position_aligns_centres() {
        assert_eq!(source_position(0, 4, 4), 0.0);
        assert_eq!(source_position(3, 4, 4), 1.0);
        // SR pixels 1 and 2 of a 2x upsampling straddle source pixel 0/1.
        assert!((source_position(1, 8, 4) - 0.25 / 3.0).abs() < 1e-12);
        assert_eq!(source_position(0, 8, 1), 0.0);
    }

    #[test]
    fn memorizes_single_event() {
        let g = SensorGeometry::new(2, 2).unwrap();
        let s = EventStream::new(vec![Event::new(1, 0, 50, 1)], g, Some(100)).unwrap();
        let grid = grid_of(&s);
        let cfg = TemporalConfig { epochs: 300, hidden: 16, hidden_layers: 2, ..TemporalConfig::default() };
        let model = train_temporal(&s, &grid, &cfg).unwrap();
        let field = predict_timestamps(&model, &grid, 100).unwrap();
        assert!((field.get(1, 0, 0) - 0.5).abs() < 0.02, "{}", field.get(1, 0, 0));
        assert_eq!(field.get(0, 0, 0), 0.0);
    }
}
