//! Event file formats.
//!
//! Text: optional `#` comment lines, the header `t_us,x,y,p`, then one event
//! per line with 1-based coordinates. The writer emits a leading
//! `# evsr width=W height=H t_end_us=T` line so geometry and time extent
//! survive a round trip; without it the reader infers both from the events.
//!
//! Binary (little-endian): `EVSR`, u16 version 1, u16 reserved, u32 W, u32 H,
//! u64 T, u64 count, then `count` records of u64 t, u16 x, u16 y, i8 p, u8 pad
//! with 0-based coordinates.

use std::fmt::Write as _;
use std::path::Path;

use evsr_core::{Event, EventStream, SensorGeometry};

use crate::error::{IoError, Result};

pub const TEXT_HEADER: &str = "t_us,x,y,p";
pub const MAGIC: &[u8; 4] = b"EVSR";
pub const VERSION: u16 = 1;
pub const BINARY_HEADER_LEN: usize = 32;
pub const BINARY_RECORD_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    /// Binary if the data starts with the magic (reading) or the path ends in
    /// `.evb` / `.bin` (writing); text otherwise.
    #[default]
    Auto,
    Text,
    Binary,
}

pub fn to_text(stream: &EventStream) -> String {
    let g = stream.geometry();
    let mut out = String::with_capacity(64 + stream.len() * 16);
    let _ = writeln!(out, "# evsr width={} height={} t_end_us={}", g.width(), g.height(), stream.t_end());
    out.push_str(TEXT_HEADER);
    out.push('\n');
    for e in stream.events() {
        let _ = writeln!(out, "{},{},{},{}", e.t, e.x as u32 + 1, e.y as u32 + 1, e.p);
    }
    out
}

#[derive(Default)]
struct Preamble {
    width: Option<u32>,
    height: Option<u32>,
    t_end: Option<u64>,
}

fn parse_preamble(line: &str, no: usize, pre: &mut Preamble) -> Result<()> {
    let body = line.trim_start_matches('#').trim();
    let mut tokens = body.split_whitespace();
    if tokens.next() != Some("evsr") {
        return Ok(());
    }
    let bad = |reason: String| IoError::Parse { line: no, reason };
    for tok in tokens {
        let (k, v) = tok.split_once('=').ok_or_else(|| bad(format!("expected key=value, found `{tok}`")))?;
        match k {
            "width" => pre.width = Some(v.parse().map_err(|_| bad(format!("bad width `{v}`")))?),
            "height" => pre.height = Some(v.parse().map_err(|_| bad(format!("bad height `{v}`")))?),
            "t_end_us" => pre.t_end = Some(v.parse().map_err(|_| bad(format!("bad t_end_us `{v}`")))?),
            _ => {}
        }
    }
    Ok(())
}

fn parse_event(line: &str, no: usize) -> Result<Event> {
    let bad = |reason: String| IoError::Parse { line: no, reason };
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(bad(format!("expected 4 fields, found {}", fields.len())));
    }
    let t: u64 = fields[0].parse().map_err(|_| bad(format!("bad timestamp `{}`", fields[0])))?;
    let coord = |s: &str, name: &str| -> Result<u16> {
        match s.parse::<u32>() {
            Ok(v) if (1..=65536).contains(&v) => Ok((v - 1) as u16),
            _ => Err(bad(format!("bad {name} `{s}` (coordinates are 1-based)"))),
        }
    };
    let x = coord(fields[1], "x")?;
    let y = coord(fields[2], "y")?;
    let p: i8 = match fields[3] {
        "1" | "+1" => 1,
        "-1" => -1,
        other => return Err(bad(format!("bad polarity `{other}`"))),
    };
    Ok(Event::new(x, y, t, p))
}

pub fn from_text(text: &str) -> Result<EventStream> {
    let mut pre = Preamble::default();
    let mut header_seen = false;
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !header_seen {
            if line.starts_with('#') {
                parse_preamble(line, no, &mut pre)?;
            } else if line == TEXT_HEADER {
                header_seen = true;
            } else {
                return Err(IoError::Parse { line: no, reason: format!("expected header `{TEXT_HEADER}`") });
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        events.push(parse_event(line, no)?);
    }
    if !header_seen {
        return Err(IoError::Parse { line: 1, reason: format!("missing header `{TEXT_HEADER}`") });
    }
    let max_x = events.iter().map(|e| e.x as u32 + 1).max().unwrap_or(1);
    let max_y = events.iter().map(|e| e.y as u32 + 1).max().unwrap_or(1);
    let geometry = SensorGeometry::new(pre.width.unwrap_or(max_x), pre.height.unwrap_or(max_y))?;
    Ok(EventStream::new(events, geometry, pre.t_end)?)
}

pub fn to_binary(stream: &EventStream) -> Vec<u8> {
    let g = stream.geometry();
    let mut out = Vec::with_capacity(BINARY_HEADER_LEN + stream.len() * BINARY_RECORD_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(g.width() as u32).to_le_bytes());
    out.extend_from_slice(&(g.height() as u32).to_le_bytes());
    out.extend_from_slice(&stream.t_end().to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in stream.events() {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.p as u8);
        out.push(0);
    }
    out
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes(b.try_into().expect("2 bytes"))
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().expect("4 bytes"))
}

fn le_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b.try_into().expect("8 bytes"))
}

pub fn from_binary(bytes: &[u8]) -> Result<EventStream> {
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(IoError::MagicMismatch);
    }
    if bytes.len() < BINARY_HEADER_LEN {
        return Err(IoError::TruncatedFile { expected: BINARY_HEADER_LEN as u64, found: bytes.len() as u64 });
    }
    let version = le_u16(&bytes[4..6]);
    if version != VERSION {
        return Err(IoError::UnsupportedVersion(version));
    }
    let geometry = SensorGeometry::new(le_u32(&bytes[8..12]), le_u32(&bytes[12..16]))?;
    let t_end = le_u64(&bytes[16..24]);
    let count = le_u64(&bytes[24..32]);
    let expected = (count as u128) * BINARY_RECORD_LEN as u128 + BINARY_HEADER_LEN as u128;
    let found = bytes.len() as u128;
    if found < expected {
        return Err(IoError::TruncatedFile { expected: expected.min(u64::MAX as u128) as u64, found: found as u64 });
    }
    if found > expected {
        return Err(IoError::TrailingBytes((found - expected) as u64));
    }
    let events = bytes[BINARY_HEADER_LEN..]
        .chunks_exact(BINARY_RECORD_LEN)
        .map(|r| Event::new(le_u16(&r[8..10]), le_u16(&r[10..12]), le_u64(&r[..8]), r[12] as i8))
        .collect();
    Ok(EventStream::new(events, geometry, Some(t_end))?)
}

pub fn from_bytes(bytes: &[u8], format: Format) -> Result<EventStream> {
    match format {
        Format::Binary => from_binary(bytes),
        Format::Auto if bytes.starts_with(MAGIC) => from_binary(bytes),
        Format::Auto | Format::Text => {
            let text = std::str::from_utf8(bytes)
                .map_err(|e| IoError::Parse { line: line_of(bytes, e.valid_up_to()), reason: "invalid UTF-8".into() })?;
            from_text(text)
        }
    }
}

fn line_of(bytes: &[u8], offset: usize) -> usize {
    bytes[..offset].iter().filter(|&&b| b == b'\n').count() + 1
}

fn resolve_for_write(path: &Path, format: Format) -> Format {
    match format {
        Format::Auto => match path.extension().and_then(|e| e.to_str()) {
            Some("evb") | Some("bin") => Format::Binary,
            _ => Format::Text,
        },
        f => f,
    }
}

pub fn read(path: impl AsRef<Path>, format: Format) -> Result<EventStream> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(IoError::io(path))?;
    from_bytes(&bytes, format)
}

pub fn write(stream: &EventStream, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    let bytes = match resolve_for_write(path, format) {
        Format::Binary => to_binary(stream),
        _ => to_text(stream).into_bytes(),
    };
    std::fs::write(path, bytes).map_err(IoError::io(path))
}
