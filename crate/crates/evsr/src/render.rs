//! Frame rendering of event streams to PGM / PPM images.

use std::path::Path;

use evsr_core::EventStream;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder, Luma, Rgb, RgbImage};

use crate::error::{IoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RenderMode {
    /// Signed polarity sum per pixel on a mid-gray background (graymap).
    #[default]
    Accumulate,
    /// Positive events in red, negative in blue, on white (pixmap).
    PolarityColor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RenderSpec {
    pub mode: RenderMode,
    /// Inclusive `[start, end]` window in microseconds.
    pub window: Option<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Gray(GrayImage),
    Color(RgbImage),
}

impl Frame {
    pub fn dimensions(&self) -> (u32, u32) {
        match self {
            Frame::Gray(img) => img.dimensions(),
            Frame::Color(img) => img.dimensions(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(IoError::io(path))?);
        let (w, h) = self.dimensions();
        let (bytes, subtype, color) = match self {
            Frame::Gray(img) => (img.as_raw(), PnmSubtype::Graymap(SampleEncoding::Binary), ExtendedColorType::L8),
            Frame::Color(img) => (img.as_raw(), PnmSubtype::Pixmap(SampleEncoding::Binary), ExtendedColorType::Rgb8),
        };
        PnmEncoder::new(&mut file).with_subtype(subtype).write_image(bytes, w, h, color)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub frame: Frame,
    /// A window was given and no event fell inside it.
    pub empty_window: bool,
}

fn scale(value: u32, max: u32, range: f64) -> u8 {
    if max == 0 {
        return 0;
    }
    (value as f64 / max as f64 * range).round() as u8
}

pub fn render(stream: &EventStream, spec: &RenderSpec) -> Rendered {
    let g = stream.geometry();
    let (w, h) = (g.width() as u32, g.height() as u32);
    let mut pos = vec![0u32; g.pixel_count()];
    let mut neg = vec![0u32; g.pixel_count()];
    let mut any = false;
    for e in stream.events() {
        if let Some((t0, t1)) = spec.window {
            if e.t < t0 || e.t > t1 {
                continue;
            }
        }
        any = true;
        let i = g.index(e.x as usize, e.y as usize);
        if e.p > 0 {
            pos[i] += 1;
        } else {
            neg[i] += 1;
        }
    }
    let empty_window = spec.window.is_some() && !any;
    let frame = match spec.mode {
        RenderMode::Accumulate => {
            let sums: Vec<i64> = pos.iter().zip(&neg).map(|(&p, &n)| p as i64 - n as i64).collect();
            let max = sums.iter().map(|s| s.unsigned_abs()).max().unwrap_or(0);
            Frame::Gray(GrayImage::from_fn(w, h, |x, y| {
                let s = sums[g.index(x as usize, y as usize)];
                let v = if max == 0 { 0.0 } else { s as f64 / max as f64 * 127.0 };
                Luma([(128.0 + v).round() as u8])
            }))
        }
        RenderMode::PolarityColor => {
            let max = pos.iter().chain(&neg).copied().max().unwrap_or(0);
            Frame::Color(RgbImage::from_fn(w, h, |x, y| {
                let i = g.index(x as usize, y as usize);
                let (p, n) = (scale(pos[i], max, 255.0), scale(neg[i], max, 255.0));
                Rgb([255 - n, 255 - p.max(n), 255 - p])
            }))
        }
    };
    Rendered { frame, empty_window }
}
