//! Flat little-endian parameter checkpoint.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "EVNN"
//! 4       2     u16 version (1)
//! 6       2     u16 reserved (0)
//! 8       4     u32 layer count N
//! 12      24*N  layer table: u32 kind, u32 a, u32 b, u32 c, u64 extra
//! ..      8     u64 parameter scalar count P
//! ..      8*P   f64 parameters, (weight, bias) per parametric layer in layer order
//! ```
//!
//! Layer kinds: 1 conv3d (a=in, b=out, c=kernel, extra=padding), 2 dense
//! (a=in, b=out), 3 relu, 4 leaky relu (extra = slope bits), 5 skip save,
//! 6 skip add, 7 skip concat, 8 avg-pool 2x, 9 upsample 2x.

use alloc::format;
use alloc::vec::Vec;

use super::{LayerSpec, Network, NetworkSpec, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EVNN";
pub const VERSION: u16 = 1;

fn layer_entry(layer: &LayerSpec) -> (u32, u32, u32, u32, u64) {
    match *layer {
        LayerSpec::Conv3d { in_channels, out_channels, kernel, padding } => {
            (1, in_channels as u32, out_channels as u32, kernel as u32, padding as u64)
        }
        LayerSpec::Dense { inputs, outputs } => (2, inputs as u32, outputs as u32, 0, 0),
        LayerSpec::Relu => (3, 0, 0, 0, 0),
        LayerSpec::LeakyRelu(slope) => (4, 0, 0, 0, slope.to_bits()),
        LayerSpec::SkipSave => (5, 0, 0, 0, 0),
        LayerSpec::SkipAdd => (6, 0, 0, 0, 0),
        LayerSpec::SkipConcat => (7, 0, 0, 0, 0),
        LayerSpec::AvgPool2 => (8, 0, 0, 0, 0),
        LayerSpec::Upsample2 => (9, 0, 0, 0, 0),
    }
}

pub fn encode(net: &Network) -> Vec<u8> {
    let layers = &net.spec().layers;
    let mut out = Vec::with_capacity(24 + 24 * layers.len() + 8 * net.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for layer in layers {
        let (kind, a, b, c, extra) = layer_entry(layer);
        for v in [kind, a, b, c] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&extra.to_le_bytes());
    }
    out.extend_from_slice(&(net.parameter_count() as u64).to_le_bytes());
    for p in net.params() {
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(slice.try_into().expect("slice has length N"))
    }

    fn u16(&mut self) -> Result<u16> {
        self.take::<2>().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader { bytes, pos: 0 };
    if &r.take::<4>()? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    r.u16()?;
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        let (kind, a, b, c) = (r.u32()?, r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let extra = r.u64()?;
        layers.push(match kind {
            1 => LayerSpec::Conv3d { in_channels: a, out_channels: b, kernel: c, padding: extra as usize },
            2 => LayerSpec::Dense { inputs: a, outputs: b },
            3 => LayerSpec::Relu,
            4 => LayerSpec::LeakyRelu(f64::from_bits(extra)),
            5 => LayerSpec::SkipSave,
            6 => LayerSpec::SkipAdd,
            7 => LayerSpec::SkipConcat,
            8 => LayerSpec::AvgPool2,
            9 => LayerSpec::Upsample2,
            other => return Err(Error::Checkpoint(format!("layer {i}: unknown kind {other}"))),
        });
    }
    let spec = NetworkSpec::new(layers);
    let total = r.u64()? as usize;
    if total != spec.parameter_count() {
        return Err(Error::Checkpoint(format!(
            "parameter count {total} does not match layer table ({})",
            spec.parameter_count()
        )));
    }
    let mut params = Vec::new();
    for shapes in spec.layers.iter().filter_map(LayerSpec::parameter_shapes) {
        for shape in shapes {
            let len: usize = shape.iter().product();
            let data = (0..len).map(|_| r.u64().map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
            params.push(Tensor::from_vec(shape, data)?);
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Network::from_parts(spec, params)
}
