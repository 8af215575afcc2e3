//! Spatial branch: test-time training of a residual 3D CNN on the grid's own
//! cross-scale recurrence, then inference at the target scale.
//!
//! Training pairs are `(bicubic_up(downsample(E, s)), E)`, i.e. the network
//! learns to restore the input grid from its coarser version at the same
//! resolution. At inference the network refines `bicubic_up(E, s)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::{self, AdamConfig, AdamState, LrSchedule, LrScheduler, Network, NetworkSpec, Tensor};
use crate::resample::{self, augment, Kernel, Transform, UpsampleMode};
use crate::voxel::VoxelGrid;

/// Smallest spatial size (per axis) of the downsampled training input.
pub const MIN_DOWNSAMPLED_SIZE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialConfig {
    pub scale: usize,
    pub iterations: usize,
    pub lr: f64,
    pub kernel: Kernel,
    pub augment: bool,
    pub seed: u64,
    /// Channels of the hidden convolutions.
    pub hidden: usize,
    /// Number of convolution layers.
    pub conv_layers: usize,
    pub schedule: LrSchedule,
    /// Training grids larger than `patch_threshold` on either axis are trained
    /// on random `patch x patch` crops.
    pub patch: usize,
    pub patch_threshold: usize,
    /// Augmented pairs whose gradients are averaged into one optimizer step.
    pub pairs_per_step: usize,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        Self {
            scale: 2,
            iterations: 1000,
            lr: 1e-3,
            kernel: Kernel::BICUBIC,
            augment: true,
            seed: 0,
            hidden: 8,
            conv_layers: 8,
            schedule: LrSchedule::default(),
            patch: 64,
            patch_threshold: 128,
            pairs_per_step: 1,
        }
    }
}

impl SpatialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scale < 1 {
            return Err(Error::BadFactor(self.scale));
        }
        if self.iterations < 1 || self.hidden < 1 || self.conv_layers < 2 || self.patch < 1 || self.pairs_per_step < 1 {
            return Err(Error::InvalidConfig("spatial training parameters must be positive".into()));
        }
        Ok(())
    }

    pub fn network_spec(&self) -> NetworkSpec {
        NetworkSpec::residual_cnn(self.hidden, self.conv_layers, 3)
    }
}

/// One optimizer step of either branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    /// Iteration (spatial) or epoch (temporal), 1-based.
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    /// Loss over the full training set before the first step.
    pub initial_loss: f64,
    /// Loss over the full training set after the last step.
    pub final_loss: f64,
}

impl TrainLog {
    /// Best loss seen so far after each step.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.min(r.loss);
                best
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialModel {
    pub network: Network,
    pub scale: usize,
    pub log: TrainLog,
}

/// Add a leading channel axis: `[L, H, W] -> [1, L, H, W]`.
fn as_volume(t: Tensor) -> Result<Tensor> {
    let mut shape = alloc::vec![1];
    shape.extend_from_slice(t.shape());
    t.reshape(shape)
}

fn as_grid(t: Tensor) -> Result<Tensor> {
    let shape = t.shape()[1..].to_vec();
    t.reshape(shape)
}

/// Bicubic pre-upsampling of a `[L, H, W]` tensor, cropped to `h x w`.
fn pre_upsample(t: &Tensor, scale: usize, h: usize, w: usize) -> Result<Tensor> {
    resample::crop(&resample::upsample_naive(t, scale, UpsampleMode::Bicubic)?, h, w)
}

/// The unaugmented training pair `(network input, target)` for a grid.
pub fn training_pair(grid: &VoxelGrid, scale: usize, kernel: &Kernel) -> Result<(Tensor, Tensor)> {
    let target = grid.to_tensor();
    let (h, w) = (grid.geometry().height(), grid.geometry().width());
    let coarse = resample::downsample(&target, scale, kernel)?;
    Ok((pre_upsample(&coarse, scale, h, w)?, target))
}

/// Mean L1 over a set of pairs, without gradients.
fn evaluate(net: &Network, pairs: &[(Transform, Tensor, Tensor)]) -> Result<f64> {
    let mut total = 0.0;
    for (_, input, target) in pairs {
        let out = net.predict(&as_volume(input.clone())?)?;
        total += nn::l1_loss(&as_grid(out)?, target)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Fit the spatial network on one grid.
///
/// With augmentation on, the pair set holds the original pair and its five
/// rotations/reflections. Each iteration draws `pairs_per_step` of them from
/// a seeded order that visits every pair once before reshuffling, and steps
/// on their mean loss.
pub fn train_spatial(grid: &VoxelGrid, cfg: &SpatialConfig) -> Result<SpatialModel> {
    cfg.validate()?;
    if grid.is_empty() {
        return Err(Error::EmptyStream);
    }
    let g = grid.geometry();
    let (dh, dw) = (g.height().div_ceil(cfg.scale), g.width().div_ceil(cfg.scale));
    if dh < MIN_DOWNSAMPLED_SIZE || dw < MIN_DOWNSAMPLED_SIZE {
        return Err(Error::GridTooSmall { height: g.height(), width: g.width(), factor: cfg.scale });
    }

    let (input, target) = training_pair(grid, cfg.scale, &cfg.kernel)?;
    let pairs = if cfg.augment {
        augment(&input, &target)?.pairs
    } else {
        alloc::vec![(Transform::Identity, input, target)]
    };

    let mut rng = nn::seeded_rng(cfg.seed);
    let mut network = Network::new(cfg.network_spec(), 1, cfg.seed)?;
    let mut adam = AdamState::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() }, network.params())?;
    let mut scheduler = LrScheduler::new(cfg.schedule.clone());

    let mut log = TrainLog { initial_loss: evaluate(&network, &pairs)?, ..TrainLog::default() };
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut cursor = pairs.len();
    let per_step = cfg.pairs_per_step.min(pairs.len());
    let mut last_finite = log.initial_loss;
    for step in 1..=cfg.iterations {
        let non_finite = |e| match e {
            Error::NonFinite(_) => Error::NonFiniteLoss { step, last_finite },
            other => other,
        };
        let mut loss = 0.0;
        let mut grads: Option<Vec<Tensor>> = None;
        for _ in 0..per_step {
            if cursor == pairs.len() {
                nn::shuffle(&mut order, &mut rng);
                cursor = 0;
            }
            let (_, input, target) = &pairs[order[cursor]];
            cursor += 1;
            let (input, target) = crop_for_training(input, target, cfg, &mut rng)?;
            let (out, trace) = network.forward(&as_volume(input)?).map_err(non_finite)?;
            let (l, grad) = nn::l1_loss_with_grad(&as_grid(out)?, &target)?;
            if !l.is_finite() {
                return Err(Error::NonFiniteLoss { step, last_finite });
            }
            loss += l / per_step as f64;
            let g = network.backward(&trace, &as_volume(grad)?)?.params;
            match grads.as_mut() {
                None => grads = Some(g),
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(&g) {
                        for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                            *x += y;
                        }
                    }
                }
            }
        }
        let mut grads = grads.unwrap_or_default();
        if per_step > 1 {
            let inv = 1.0 / per_step as f64;
            for g in &mut grads {
                g.data_mut().iter_mut().for_each(|v| *v *= inv);
            }
        }
        last_finite = loss;
        adam.step(network.params_mut(), &grads)?;
        log.records.push(TrainRecord { step, loss, lr: adam.lr() });
        if scheduler.observe(loss) {
            adam.decay();
        }
    }
    log.final_loss = evaluate(&network, &pairs)?;
    Ok(SpatialModel { network, scale: cfg.scale, log })
}

fn crop_for_training(input: &Tensor, target: &Tensor, cfg: &SpatialConfig, rng: &mut nn::Rng) -> Result<(Tensor, Tensor)> {
    let (h, w) = (input.shape()[1], input.shape()[2]);
    if h <= cfg.patch_threshold && w <= cfg.patch_threshold {
        return Ok((input.clone(), target.clone()));
    }
    let (ph, pw) = (cfg.patch.min(h), cfg.patch.min(w));
    let y0 = (nn::uniform(rng) * (h - ph + 1) as f64) as usize;
    let x0 = (nn::uniform(rng) * (w - pw + 1) as f64) as usize;
    Ok((resample::crop_at(input, y0, x0, ph, pw)?, resample::crop_at(target, y0, x0, ph, pw)?))
}

/// Super-resolve a grid by `scale`; outputs are clamped to the coding range.
pub fn infer_spatial(model: &SpatialModel, grid: &VoxelGrid, scale: usize) -> Result<VoxelGrid> {
    if scale != model.scale {
        return Err(Error::ScaleMismatch { trained: model.scale, requested: scale });
    }
    let g_out = grid.geometry().scaled(scale)?;
    let coding = grid.coding();
    if grid.is_empty() {
        return VoxelGrid::from_tensor(&Tensor::zeros(alloc::vec![0, g_out.height(), g_out.width()]), g_out, coding);
    }
    let input = pre_upsample(&grid.to_tensor(), scale, g_out.height(), g_out.width())?;
    let out = as_grid(model.network.predict(&as_volume(input)?)?)?;
    VoxelGrid::from_tensor(&out.map(|v| coding.clamp(v)), g_out, coding)
}
