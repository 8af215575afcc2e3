//! Command-line surface. Exit codes: 0 success, 1 usage, 2 data, 3 pipeline.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evsr_core::assemble::super_resolve;
use evsr_core::metrics;
use evsr_core::resample::Kernel;
use evsr_core::spatial::SpatialConfig;
use evsr_core::synth::{self, SynthConfig};
use evsr_core::temporal::TemporalConfig;
use evsr_core::SensorGeometry;

use crate::error::IoError;
use crate::format::{self, Format};
use crate::render::{self, RenderMode, RenderSpec};
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "evsr", version, about = "Self-supervised super resolution of event streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Super-resolve an event stream.
    Sr(SrArgs),
    /// Synthesize a lower-resolution stream by pixel binning with refractory merging.
    Downsample(DownsampleArgs),
    /// Simulate a moving pattern.
    Synth(SynthArgs),
    /// RMSE between two streams of equal geometry on binned count grids.
    Rmse(RmseArgs),
    /// Render a stream to a PGM / PPM image.
    Render(RenderArgs),
    /// Describe a stream.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Auto,
    Text,
    Binary,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Auto => Format::Auto,
            FormatArg::Text => Format::Text,
            FormatArg::Binary => Format::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Bicubic,
    Bilinear,
    Box,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FallbackArg {
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PatternArg {
    Bar,
    Checkerboard,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Accumulate,
    PolarityColor,
}

#[derive(Debug, Args)]
pub struct SrArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long)]
    pub scale: usize,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = KernelArg::Bicubic)]
    pub kernel: KernelArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Channels of the hidden spatial convolutions.
    #[arg(long, default_value_t = SpatialConfig::default().hidden)]
    pub spatial_hidden: usize,
    /// Width of the hidden temporal layers.
    #[arg(long, default_value_t = TemporalConfig::default().hidden)]
    pub temporal_hidden: usize,
    /// Disable rotation/reflection augmentation.
    #[arg(long)]
    pub no_augment: bool,
    /// On pipeline failure, write the nearest-neighbour upsampled input instead.
    #[arg(long, value_enum)]
    pub fallback: Option<FallbackArg>,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// CSV of per-step training losses.
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct DownsampleArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long)]
    pub scale: usize,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Refractory window, e.g. `100us` or `0.1ms`.
    #[arg(long, default_value = "100us", value_parser = parse_duration_us)]
    pub refractory: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = PatternArg::Bar)]
    pub pattern: PatternArg,
    /// Pixels per millisecond, `VX,VY`.
    #[arg(long, default_value = "0.75,0", value_parser = parse_pair, allow_hyphen_values = true)]
    pub velocity: (f64, f64),
    /// Milliseconds.
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    /// Sensor size `WxH`.
    #[arg(long, default_value = "32x32", value_parser = parse_size)]
    pub size: (u32, u32),
    #[arg(long, default_value_t = 0.2)]
    pub contrast: f64,
    /// Simulation time step in microseconds.
    #[arg(long, default_value_t = 10)]
    pub dt: u64,
    #[arg(long, default_value_t = 4)]
    pub supersample: usize,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct RmseArgs {
    #[arg(long, value_name = "FILE")]
    pub a: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub b: PathBuf,
    #[arg(long, default_value_t = metrics::DEFAULT_BINS)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "IMG")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Accumulate)]
    pub mode: ModeArg,
    /// Inclusive time window in microseconds, `T0,T1`.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<(u64, u64)>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `A,B`")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((p(a)?, p(b)?))
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected `WxH`")?;
    let p = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("`{v}`: {e}"));
    Ok((p(w)?, p(h)?))
}

fn parse_window(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `T0,T1`")?;
    let p = |v: &str| v.trim().parse::<u64>().map_err(|e| format!("`{v}`: {e}"));
    let (a, b) = (p(a)?, p(b)?);
    if a > b {
        return Err("window start exceeds its end".into());
    }
    Ok((a, b))
}

fn parse_duration_us(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let (num, mult) = if let Some(v) = s.strip_suffix("us") {
        (v, 1.0)
    } else if let Some(v) = s.strip_suffix("ms") {
        (v, 1000.0)
    } else {
        (s, 1.0)
    };
    let v: f64 = num.trim().parse().map_err(|e| format!("`{s}`: {e}"))?;
    if !(v >= 0.0) || !v.is_finite() {
        return Err(format!("`{s}` is not a non-negative duration"));
    }
    Ok((v * mult).round() as u64)
}

/// Failure of one CLI invocation, mapped onto an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] IoError),
    #[error("pipeline failed: {0}")]
    Pipeline(evsr_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Pipeline(_) => 3,
        }
    }
}

impl From<evsr_core::Error> for CliError {
    fn from(e: evsr_core::Error) -> Self {
        CliError::Data(IoError::Core(e))
    }
}

fn usage_if(cond: bool, msg: &str) -> Result<(), CliError> {
    if cond {
        return Err(CliError::Usage(msg.into()));
    }
    Ok(())
}

/// Run one parsed command. Normal output goes to `out`, warnings to stderr.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let mut say = |line: String| {
        let _ = writeln!(out, "{line}");
    };
    match cli.command {
        Command::Sr(a) => {
            usage_if(a.scale == 0, "--scale must be at least 1")?;
            usage_if(a.iters == 0 || a.epochs == 0, "--iters and --epochs must be at least 1")?;
            let lr = format::read(&a.input, Format::Auto)?;
            let kernel = match a.kernel {
                KernelArg::Bicubic => Kernel::BICUBIC,
                KernelArg::Bilinear => Kernel::BILINEAR,
                KernelArg::Box => Kernel::BOX,
                KernelArg::Random => Kernel::random(a.seed),
            };
            let sc = SpatialConfig {
                scale: a.scale,
                iterations: a.iters,
                lr: a.lr,
                kernel,
                augment: !a.no_augment,
                seed: a.seed,
                hidden: a.spatial_hidden,
                ..SpatialConfig::default()
            };
            let tc =
                TemporalConfig { epochs: a.epochs, lr: a.lr, seed: a.seed, hidden: a.temporal_hidden, ..TemporalConfig::default() };
            match super_resolve(&lr, a.scale, &sc, &tc) {
                Ok(res) => {
                    format::write(&res.stream, &a.out, a.format.into())?;
                    if let Some(path) = &a.report {
                        let mut text = report::diagnostics_report(&res.diagnostics);
                        text.push_str("fallback: none\n");
                        std::fs::write(path, text).map_err(IoError::io(path))?;
                    }
                    if let Some(path) = &a.log {
                        let csv = report::training_log_csv(&res.diagnostics.spatial_log, &res.diagnostics.temporal_log);
                        std::fs::write(path, csv).map_err(IoError::io(path))?;
                    }
                    say(format!("lr_events: {}\nsr_events: {}", lr.len(), res.stream.len()));
                }
                Err(e) if a.fallback == Some(FallbackArg::Naive) => {
                    eprintln!("warning: pipeline failed ({e}); writing nearest-neighbour upsampling");
                    let naive = synth::upsample_stream_nearest(&lr, a.scale)?;
                    format::write(&naive, &a.out, a.format.into())?;
                    if let Some(path) = &a.report {
                        let text = format!(
                            "scale: {}\nlr_events: {}\nsr_events: {}\nfallback: naive\nfallback_reason: {e}\n",
                            a.scale,
                            lr.len(),
                            naive.len()
                        );
                        std::fs::write(path, text).map_err(IoError::io(path))?;
                    }
                    say(format!("lr_events: {}\nsr_events: {}", lr.len(), naive.len()));
                }
                Err(e) => return Err(CliError::Pipeline(e)),
            }
        }
        Command::Downsample(a) => {
            usage_if(a.scale == 0, "--scale must be at least 1")?;
            let hr = format::read(&a.input, Format::Auto)?;
            let lr = synth::downsample_stream(&hr, a.scale, a.refractory)?;
            format::write(&lr, &a.out, a.format.into())?;
            say(format!("events: {} -> {}", hr.len(), lr.len()));
        }
        Command::Synth(a) => {
            let geometry = SensorGeometry::new(a.size.0, a.size.1)?;
            let base = match a.pattern {
                PatternArg::Bar => SynthConfig::bar(geometry, a.velocity, a.duration),
                PatternArg::Checkerboard => SynthConfig::checkerboard(geometry, a.velocity, a.duration),
                PatternArg::Disk => SynthConfig::disk(geometry, a.velocity, a.duration),
            };
            let cfg = SynthConfig { contrast: a.contrast, dt_us: a.dt, supersample: a.supersample, ..base };
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let stream = synth::simulate(&cfg)?;
            if cfg.is_static() {
                eprintln!("warning: motion is degenerate; the stream is empty");
            }
            format::write(&stream, &a.out, a.format.into())?;
            say(format!("events: {}", stream.len()));
        }
        Command::Rmse(a) => {
            usage_if(a.bins == 0, "--bins must be at least 1")?;
            let (sa, sb) = (format::read(&a.a, Format::Auto)?, format::read(&a.b, Format::Auto)?);
            say(format!("{:.6}", metrics::rmse(&sa, &sb, a.bins)?));
        }
        Command::Render(a) => {
            let stream = format::read(&a.input, Format::Auto)?;
            let mode = match a.mode {
                ModeArg::Accumulate => RenderMode::Accumulate,
                ModeArg::PolarityColor => RenderMode::PolarityColor,
            };
            let rendered = render::render(&stream, &RenderSpec { mode, window: a.window });
            if rendered.empty_window {
                eprintln!("warning: the time window contains no events");
            }
            rendered.frame.save(&a.out)?;
        }
        Command::Stats(a) => {
            let stream = format::read(&a.input, Format::Auto)?;
            let g = stream.geometry();
            let text = report::stats_report(&metrics::stats(&stream), g.width(), g.height(), stream.t_end());
            say(text.trim_end().to_string());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_parsers() {
        assert_eq!(parse_pair("0.5,-1").unwrap(), (0.5, -1.0));
        assert_eq!(parse_size("64x48").unwrap(), (64, 48));
        assert_eq!(parse_duration_us("100us").unwrap(), 100);
        assert_eq!(parse_duration_us("0.5ms").unwrap(), 500);
        assert_eq!(parse_duration_us("7").unwrap(), 7);
        assert!(parse_duration_us("-1us").is_err());
        assert!(parse_window("5,3").is_err());
        assert!(parse_size("64").is_err());
    }

    #[test]
    fn arguments_parse() {
        let cli = Cli::try_parse_from(["evsr", "synth", "--velocity", "-1,0", "--out", "x.txt"]).unwrap();
        let Command::Synth(a) = cli.command else { panic!() };
        assert_eq!(a.velocity, (-1.0, 0.0));
        assert!(Cli::try_parse_from(["evsr", "sr", "--in", "a"]).is_err());
    }
}
