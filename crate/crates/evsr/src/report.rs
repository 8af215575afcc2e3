//! `key: value` reports and CSV training logs.

use std::fmt::Write as _;

use evsr_core::assemble::Diagnostics;
use evsr_core::metrics::StreamStats;
use evsr_core::nn::LrSchedule;
use evsr_core::spatial::TrainLog;

fn schedule_name(s: &LrSchedule) -> String {
    match s {
        LrSchedule::Constant => "constant".into(),
        LrSchedule::Plateau { window, min_improvement, max_decays } => {
            format!("plateau(window={window}, min_improvement={min_improvement:e}, max_decays={max_decays})")
        }
        LrSchedule::Milestones(steps) => {
            let list: Vec<String> = steps.iter().map(|s| s.to_string()).collect();
            format!("milestones({})", list.join(","))
        }
    }
}

/// Every diagnostic of a pipeline run, one `key: value` per line.
pub fn diagnostics_report(d: &Diagnostics) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}: {v}");
    };
    let sc = &d.spatial_config;
    let tc = &d.temporal_config;
    kv("scale", d.scale.to_string());
    kv("lr_width", d.lr_geometry.width().to_string());
    kv("lr_height", d.lr_geometry.height().to_string());
    kv("sr_width", d.sr_geometry.width().to_string());
    kv("sr_height", d.sr_geometry.height().to_string());
    kv("t_end_us", d.t_end.to_string());
    kv("depth", d.depth.to_string());
    kv("lr_events", d.lr_events.to_string());
    kv("sr_events", d.sr_events.to_string());
    kv("spatial_seed", sc.seed.to_string());
    kv("spatial_iterations", sc.iterations.to_string());
    kv("spatial_lr", format!("{:e}", sc.lr));
    kv("spatial_kernel", sc.kernel.kind.name().to_string());
    if let Some(seed) = sc.kernel.random_seed {
        kv("spatial_kernel_seed", seed.to_string());
    }
    kv("spatial_augment", sc.augment.to_string());
    kv("spatial_pairs_per_step", sc.pairs_per_step.to_string());
    kv("spatial_hidden", sc.hidden.to_string());
    kv("spatial_conv_layers", sc.conv_layers.to_string());
    kv("spatial_schedule", schedule_name(&sc.schedule));
    kv("spatial_initial_loss", format!("{:.6e}", d.spatial_log.initial_loss));
    kv("spatial_final_loss", format!("{:.6e}", d.spatial_log.final_loss));
    kv("temporal_seed", tc.seed.to_string());
    kv("temporal_epochs", tc.epochs.to_string());
    kv("temporal_lr", format!("{:e}", tc.lr));
    kv("temporal_batch", tc.batch.map_or("all".into(), |b| b.to_string()));
    kv("temporal_hidden", tc.hidden.to_string());
    kv("temporal_hidden_layers", tc.hidden_layers.to_string());
    kv("temporal_schedule", schedule_name(&tc.schedule));
    kv("temporal_initial_loss", format!("{:.6e}", d.temporal_log.initial_loss));
    kv("temporal_final_loss", format!("{:.6e}", d.temporal_log.final_loss));
    let mut total = 0.0;
    for (stage, secs) in &d.stage_seconds {
        kv(&format!("seconds_{stage}"), format!("{secs:.3}"));
        total += secs;
    }
    kv("seconds_total", format!("{total:.3}"));
    out
}

/// `stage,step,loss,lr` lines for both training runs.
pub fn training_log_csv(spatial: &TrainLog, temporal: &TrainLog) -> String {
    let mut out = String::from("stage,step,loss,lr\n");
    for (stage, log) in [("spatial", spatial), ("temporal", temporal)] {
        for r in &log.records {
            let _ = writeln!(out, "{stage},{},{:e},{:e}", r.step, r.loss, r.lr);
        }
    }
    out
}

pub fn stats_report(s: &StreamStats, width: usize, height: usize, t_end: u64) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}: {v}");
    };
    kv("width", width.to_string());
    kv("height", height.to_string());
    kv("t_end_us", t_end.to_string());
    kv("events", s.event_count.to_string());
    kv("positive", s.positive.to_string());
    kv("negative", s.negative.to_string());
    kv("events_per_second", format!("{:.3}", s.events_per_second));
    kv("polarity_ratio", s.polarity_ratio.map_or("n/a".into(), |r| format!("{r:.6}")));
    kv("depth", s.depth.to_string());
    let hist: Vec<String> = s.pixel_histogram.iter().map(|c| c.to_string()).collect();
    kv("pixel_histogram", hist.join(","));
    out
}
