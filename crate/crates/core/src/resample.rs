//! Spatial resampling of `[L, H, W]` voxel tensors and the rotation/flip
//! augmentation group. The depth axis is never resampled.
//!
//! Sample positions follow the half-pixel convention: output index `i` at
//! scale `s` covers source coordinate `(i + 0.5) * s - 0.5`. Out-of-range taps
//! reflect about the border (which also realizes the reflect-padding of sizes
//! that are not a multiple of the factor).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::nn::{seeded_rng, uniform, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Catmull-Rom cubic convolution (a = -0.5).
    Bicubic,
    Bilinear,
    /// Plain `factor x factor` block average.
    Box,
    /// Seeded 4x4 non-negative, unit-sum convolution followed by stride sampling.
    Random,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Bicubic => "bicubic",
            KernelKind::Bilinear => "bilinear",
            KernelKind::Box => "box",
            KernelKind::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Kernel {
    pub kind: KernelKind,
    pub random_seed: Option<u64>,
}

impl Kernel {
    pub const BICUBIC: Kernel = Kernel { kind: KernelKind::Bicubic, random_seed: None };
    pub const BILINEAR: Kernel = Kernel { kind: KernelKind::Bilinear, random_seed: None };
    pub const BOX: Kernel = Kernel { kind: KernelKind::Box, random_seed: None };

    pub const fn random(seed: u64) -> Kernel {
        Kernel { kind: KernelKind::Random, random_seed: Some(seed) }
    }

    /// The 4x4 random kernel, row-major, for a given seed.
    pub fn random_taps(seed: u64) -> [f64; 16] {
        let mut rng = seeded_rng(seed);
        let mut taps = [0.0; 16];
        for t in &mut taps {
            // Keep every weight strictly positive.
            *t = 0.05 + uniform(&mut rng);
        }
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        taps
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::BICUBIC
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpsampleMode {
    Nearest,
    Bicubic,
}

/// Reflect an index into `[0, n)` without repeating the border sample.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

fn cubic_weight(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = math::abs(x);
    if x <= 1.0 {
        (A + 2.0) * x * x * x - (A + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        A * x * x * x - 5.0 * A * x * x + 8.0 * A * x - 4.0 * A
    } else {
        0.0
    }
}

type Taps = Vec<Vec<(usize, f64)>>;

/// Per-output-index taps for interpolating at `center(i)`.
fn interp_taps(out_len: usize, src_len: usize, center: impl Fn(usize) -> f64, cubic: bool) -> Taps {
    (0..out_len)
        .map(|i| {
            let c = center(i);
            let f = math::floor(c);
            let t = c - f;
            let f = f as isize;
            if cubic {
                (-1..=2)
                    .map(|o| (reflect(f + o, src_len), cubic_weight(t - o as f64)))
                    .collect()
            } else {
                vec![(reflect(f, src_len), 1.0 - t), (reflect(f + 1, src_len), t)]
            }
        })
        .collect()
}

fn box_taps(out_len: usize, src_len: usize, factor: usize) -> Taps {
    let w = 1.0 / factor as f64;
    (0..out_len)
        .map(|i| (0..factor).map(|o| (reflect((i * factor + o) as isize, src_len), w)).collect())
        .collect()
}

fn volume_dims(t: &Tensor) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [l, h, w] => Ok((l, h, w)),
        _ => Err(Error::ShapeMismatch { expected: vec![0, 0, 0], got: t.shape().to_vec() }),
    }
}

/// Apply row taps (along H) and column taps (along W) to every depth slice.
fn separable(t: &Tensor, rows: &Taps, cols: &Taps) -> Result<Tensor> {
    let (l, h, w) = volume_dims(t)?;
    let (oh, ow) = (rows.len(), cols.len());
    let mut out = vec![0.0; l * oh * ow];
    let mut tmp = vec![0.0; h * ow];
    for k in 0..l {
        let src = &t.data()[k * h * w..(k + 1) * h * w];
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            for (x, taps) in cols.iter().enumerate() {
                tmp[y * ow + x] = taps.iter().map(|&(i, wt)| wt * row[i]).sum();
            }
        }
        let dst = &mut out[k * oh * ow..(k + 1) * oh * ow];
        for (y, taps) in rows.iter().enumerate() {
            for x in 0..ow {
                dst[y * ow + x] = taps.iter().map(|&(i, wt)| wt * tmp[i * ow + x]).sum();
            }
        }
    }
    Tensor::from_vec(vec![l, oh, ow], out)
}

/// Downsample spatially by an integer factor. Sizes that are not a multiple of
/// `factor` are reflect-padded up, so the output is `ceil(H/f) x ceil(W/f)`.
pub fn downsample(t: &Tensor, factor: usize, kernel: &Kernel) -> Result<Tensor> {
    if factor < 1 {
        return Err(Error::BadFactor(factor));
    }
    let (l, h, w) = volume_dims(t)?;
    let (oh, ow) = (h.div_ceil(factor), w.div_ceil(factor));
    let s = factor as f64;
    let center = |i: usize| (i as f64 + 0.5) * s - 0.5;
    match kernel.kind {
        KernelKind::Bicubic => separable(t, &interp_taps(oh, h, center, true), &interp_taps(ow, w, center, true)),
        KernelKind::Bilinear => separable(t, &interp_taps(oh, h, center, false), &interp_taps(ow, w, center, false)),
        KernelKind::Box => separable(t, &box_taps(oh, h, factor), &box_taps(ow, w, factor)),
        KernelKind::Random => {
            let seed = kernel
                .random_seed
                .ok_or_else(|| Error::InvalidConfig("random kernel needs a seed".into()))?;
            let taps = Kernel::random_taps(seed);
            // Window start so the 4x4 support is centred on the sample position.
            let offset = math::floor((s - 1.0) / 2.0 - 1.5) as isize;
            let mut out = vec![0.0; l * oh * ow];
            for k in 0..l {
                let src = &t.data()[k * h * w..(k + 1) * h * w];
                for y in 0..oh {
                    for x in 0..ow {
                        let mut acc = 0.0;
                        for a in 0..4 {
                            let sy = reflect((y * factor) as isize + offset + a as isize, h);
                            for b in 0..4 {
                                let sx = reflect((x * factor) as isize + offset + b as isize, w);
                                acc += taps[a * 4 + b] * src[sy * w + sx];
                            }
                        }
                        out[(k * oh + y) * ow + x] = acc;
                    }
                }
            }
            Tensor::from_vec(vec![l, oh, ow], out)
        }
    }
}

/// Naive spatial upsampling to `factor*H x factor*W`.
pub fn upsample_naive(t: &Tensor, factor: usize, mode: UpsampleMode) -> Result<Tensor> {
    if factor < 1 {
        return Err(Error::BadFactor(factor));
    }
    let (l, h, w) = volume_dims(t)?;
    let (oh, ow) = (h * factor, w * factor);
    match mode {
        UpsampleMode::Nearest => {
            let mut out = vec![0.0; l * oh * ow];
            for k in 0..l {
                for y in 0..oh {
                    for x in 0..ow {
                        out[(k * oh + y) * ow + x] = t.data()[(k * h + y / factor) * w + x / factor];
                    }
                }
            }
            Tensor::from_vec(vec![l, oh, ow], out)
        }
        UpsampleMode::Bicubic => {
            let s = factor as f64;
            let center = |i: usize| (i as f64 + 0.5) / s - 0.5;
            separable(t, &interp_taps(oh, h, center, true), &interp_taps(ow, w, center, true))
        }
    }
}

/// Keep the top-left `h x w` window of every depth slice.
pub fn crop(t: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let (l, th, tw) = volume_dims(t)?;
    if h > th || w > tw {
        return Err(Error::ShapeMismatch { expected: vec![l, h, w], got: t.shape().to_vec() });
    }
    let mut out = Vec::with_capacity(l * h * w);
    for k in 0..l {
        for y in 0..h {
            let start = (k * th + y) * tw;
            out.extend_from_slice(&t.data()[start..start + w]);
        }
    }
    Tensor::from_vec(vec![l, h, w], out)
}

/// Crop an arbitrary `h x w` window starting at `(y0, x0)`.
pub fn crop_at(t: &Tensor, y0: usize, x0: usize, h: usize, w: usize) -> Result<Tensor> {
    let (l, th, tw) = volume_dims(t)?;
    if y0 + h > th || x0 + w > tw {
        return Err(Error::ShapeMismatch { expected: vec![l, y0 + h, x0 + w], got: t.shape().to_vec() });
    }
    let mut out = Vec::with_capacity(l * h * w);
    for k in 0..l {
        for y in y0..y0 + h {
            let start = (k * th + y) * tw + x0;
            out.extend_from_slice(&t.data()[start..start + w]);
        }
    }
    Tensor::from_vec(vec![l, h, w], out)
}

/// The six elements of the augmentation set: identity, three rotations and
/// two mirror reflections. Rotations are counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    FlipHorizontal,
    FlipVertical,
}

impl Transform {
    pub const ALL: [Transform; 6] = [
        Transform::Identity,
        Transform::Rot90,
        Transform::Rot180,
        Transform::Rot270,
        Transform::FlipHorizontal,
        Transform::FlipVertical,
    ];

    pub fn inverse(self) -> Transform {
        match self {
            Transform::Rot90 => Transform::Rot270,
            Transform::Rot270 => Transform::Rot90,
            other => other,
        }
    }

    /// Output `(h, w)` for an input of size `(h, w)`.
    pub fn output_dims(self, h: usize, w: usize) -> (usize, usize) {
        match self {
            Transform::Rot90 | Transform::Rot270 => (w, h),
            _ => (h, w),
        }
    }

    /// Source position `(y, x)` that lands on output `(y', x')`.
    #[inline]
    fn source(self, y: usize, x: usize, h: usize, w: usize) -> (usize, usize) {
        match self {
            Transform::Identity => (y, x),
            // Output is w x h; out[y][x] = in[x][w-1-y].
            Transform::Rot90 => (x, w - 1 - y),
            Transform::Rot180 => (h - 1 - y, w - 1 - x),
            // out[y][x] = in[h-1-x][y].
            Transform::Rot270 => (h - 1 - x, y),
            Transform::FlipHorizontal => (y, w - 1 - x),
            Transform::FlipVertical => (h - 1 - y, x),
        }
    }

    /// Apply to every depth slice of an `[L, H, W]` tensor.
    pub fn apply(self, t: &Tensor) -> Result<Tensor> {
        let (l, h, w) = volume_dims(t)?;
        let (oh, ow) = self.output_dims(h, w);
        let mut out = Vec::with_capacity(t.len());
        for k in 0..l {
            let src = &t.data()[k * h * w..(k + 1) * h * w];
            for y in 0..oh {
                for x in 0..ow {
                    let (sy, sx) = self.source(y, x, h, w);
                    out.push(src[sy * w + sx]);
                }
            }
        }
        Tensor::from_vec(vec![l, oh, ow], out)
    }
}

/// LR-HR training pairs with the same transform applied to both members.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPairSet {
    pub pairs: Vec<(Transform, Tensor, Tensor)>,
}

impl AugmentedPairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn augment(lr: &Tensor, hr: &Tensor) -> Result<AugmentedPairSet> {
    let pairs = Transform::ALL
        .iter()
        .map(|&tr| Ok((tr, tr.apply(lr)?, tr.apply(hr)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AugmentedPairSet { pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slice(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> Tensor {
        let data = (0..h * w).map(|i| f(i / w, i % w)).collect();
        Tensor::from_vec(vec![1, h, w], data).unwrap()
    }

    fn all_kernels() -> [Kernel; 4] {
        [Kernel::BICUBIC, Kernel::BILINEAR, Kernel::BOX, Kernel::random(7)]
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 4), 1);
        assert_eq!(reflect(4, 4), 2);
        assert_eq!(reflect(5, 4), 1);
        assert_eq!(reflect(-3, 1), 0);
    }

    #[test]
    fn constants_are_preserved() {
        let t = Tensor::full(vec![3, 8, 6], 0.5);
        for kernel in all_kernels() {
            for factor in [1, 2, 3, 4] {
                let d = downsample(&t, factor, &kernel).unwrap();
                assert!(d.data().iter().all(|v| (v - 0.5).abs() < 1e-12), "{kernel:?} x{factor}");
            }
        }
        let u = upsample_naive(&t, 3, UpsampleMode::Bicubic).unwrap();
        assert!(u.data().iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn factor_one_is_identity() {
        let t = slice(5, 7, |y, x| (y * 7 + x) as f64 * 0.1);
        assert_eq!(downsample(&t, 1, &Kernel::BICUBIC).unwrap(), t);
        assert_eq!(downsample(&t, 1, &Kernel::BILINEAR).unwrap(), t);
        assert_eq!(upsample_naive(&t, 1, UpsampleMode::Bicubic).unwrap(), t);
        assert_eq!(upsample_naive(&t, 1, UpsampleMode::Nearest).unwrap(), t);
    }

    #[test]
    fn bilinear_half_matches_box_average() {
        let t = slice(4, 4, |y, x| if (y, x) == (1, 2) { 0.75 } else { 0.0 });
        let d = downsample(&t, 2, &Kernel::BILINEAR).unwrap();
        // Oracle: direct 2x2 block means.
        let mut oracle = [0.0; 4];
        for y in 0..4 {
            for x in 0..4 {
                oracle[(y / 2) * 2 + x / 2] += t.data()[y * 4 + x] / 4.0;
            }
        }
        assert_eq!(d.shape(), &[1, 2, 2]);
        assert_eq!(d.data(), &oracle);
        assert_eq!(d.data()[1], 0.1875);
    }

    #[test]
    fn nearest_replicates() {
        let t = Tensor::from_vec(vec![1, 1, 1], vec![0.3]).unwrap();
        let u = upsample_naive(&t, 2, UpsampleMode::Nearest).unwrap();
        assert_eq!(u.shape(), &[1, 2, 2]);
        assert_eq!(u.data(), &[0.3; 4]);
    }

    #[test]
    fn box_inverts_nearest() {
        let t = slice(3, 5, |y, x| ((y * 5 + x) % 3) as f64 * 0.25);
        for f in 1..=4 {
            let up = upsample_naive(&t, f, UpsampleMode::Nearest).unwrap();
            let boxed = downsample(&up, f, &Kernel::BOX).unwrap();
            assert!(boxed.data().iter().zip(t.data()).all(|(a, b)| (a - b).abs() < 1e-15));
            assert_eq!(downsample(&up, f, &Kernel::BILINEAR).unwrap(), t);
        }
    }

    #[test]
    fn non_divisible_sizes_round_up() {
        let t = Tensor::full(vec![2, 5, 7], 0.25);
        let d = downsample(&t, 2, &Kernel::BICUBIC).unwrap();
        assert_eq!(d.shape(), &[2, 3, 4]);
        let u = crop(&upsample_naive(&d, 2, UpsampleMode::Bicubic).unwrap(), 5, 7).unwrap();
        assert_eq!(u.shape(), t.shape());
    }

    #[test]
    fn bad_factor() {
        let t = Tensor::full(vec![1, 2, 2], 0.0);
        assert_eq!(downsample(&t, 0, &Kernel::BICUBIC), Err(Error::BadFactor(0)));
        assert_eq!(upsample_naive(&t, 0, UpsampleMode::Nearest), Err(Error::BadFactor(0)));
    }

    #[test]
    fn random_kernel_needs_seed_and_is_reproducible() {
        let t = slice(8, 8, |y, x| ((y * 3 + x * 5) % 7) as f64);
        let unseeded = Kernel { kind: KernelKind::Random, random_seed: None };
        assert!(downsample(&t, 2, &unseeded).is_err());
        let a = downsample(&t, 2, &Kernel::random(3)).unwrap();
        assert_eq!(a, downsample(&t, 2, &Kernel::random(3)).unwrap());
        assert_ne!(a, downsample(&t, 2, &Kernel::random(4)).unwrap());
        let taps = Kernel::random_taps(3);
        assert!(taps.iter().all(|&w| w > 0.0));
        assert!((taps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transforms_follow_group_laws() {
        let t = Tensor::from_vec(vec![2, 2, 3], (0..12).map(f64::from).collect()).unwrap();
        let r90 = Transform::Rot90.apply(&t).unwrap();
        assert_eq!(r90.shape(), &[2, 3, 2]);
        // Counter-clockwise: top-right corner moves to top-left.
        assert_eq!(r90.data()[0], 2.0);
        let twice = Transform::Rot180.apply(&Transform::Rot180.apply(&t).unwrap()).unwrap();
        assert_eq!(twice, t);
        for tr in Transform::ALL {
            assert_eq!(tr.inverse().apply(&tr.apply(&t).unwrap()).unwrap(), t, "{tr:?}");
        }
        let r90_twice = Transform::Rot90.apply(&r90).unwrap();
        assert_eq!(r90_twice, Transform::Rot180.apply(&t).unwrap());
    }

    #[test]
    fn augment_yields_six_matched_pairs() {
        let lr = slice(4, 6, |y, x| (y + x) as f64);
        let hr = slice(4, 6, |y, x| if x > y { 0.75 } else { 0.5 });
        let set = augment(&lr, &hr).unwrap();
        assert_eq!(set.len(), 6);
        let non_pad = |t: &Tensor| t.data().iter().filter(|&&v| v != 0.5).count();
        for (tr, a, b) in &set.pairs {
            assert_eq!(*a, tr.apply(&lr).unwrap());
            assert_eq!(non_pad(b), non_pad(&hr));
        }
    }
}
