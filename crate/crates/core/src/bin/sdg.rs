use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sdg_core::dataset::{convert_third_party, fold_manifest, load_clip, read_manifest, RdsHqLayout, SourceDescriptor};
use sdg_core::lidar::io::{encode_sweeps, read_range_map, write_normalized, write_range_map};
use sdg_core::lidar::{
    compute_percentiles, decode_range_map, normalize_with_fill, sweep_to_range_map, FrameTag, SensorModel,
    DEFAULT_FILL_VALUE,
};
use sdg_core::pipeline::{manifest_stats, run_pipeline, sample_training_mix, MixSpec, PipelineConfig, RunOptions, Services};
use sdg_core::render::output::{write_png_frames, write_raw_video};
use sdg_core::render::{render_condition_video, RenderSpec};
use sdg_core::trajectory::{interpolate_trajectory, TrajectorySpec};

#[derive(Parser)]
#[command(name = "sdg", version, about = "Driving-scene condition rendering and synthetic data tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render an HDMap or LiDAR-depth condition video for one clip.
    Render(RenderArgs),
    /// Range-map codec.
    #[command(subcommand)]
    Lidar(LidarCommand),
    /// Convert a third-party dataset into the archive layout.
    Convert {
        #[arg(long)]
        descriptor: PathBuf,
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        layout: PathBuf,
    },
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Sample a real + synthetic training list.
    Mix {
        #[arg(long)]
        manifest: PathBuf,
        /// Archive layout whose clips form the real set.
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the trajectory studio API.
    Serve {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Condition {
    Hdmap,
    Lidar,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    clip: String,
    /// Output directory for PNG frames, or stem of a raw video with --raw.
    #[arg(long)]
    out: PathBuf,
    /// RenderSpec JSON; defaults apply when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "hdmap")]
    condition: Condition,
    /// TrajectorySpec JSON replacing the logged ego track.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    frames: Option<u32>,
    #[arg(long)]
    raw: bool,
}

#[derive(Subcommand)]
enum LidarCommand {
    /// Encode one sweep of a clip into a range map.
    Encode {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        clip: String,
        #[arg(long)]
        sensor: PathBuf,
        #[arg(long, default_value_t = 0)]
        sweep: usize,
        /// Output stem; writes `<stem>.bin` and `<stem>.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a range map back into a world-frame sweep blob.
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        clip: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Normalize range maps to [-1, 1]. Bounds default to the 2nd/98th
    /// percentiles over all inputs.
    Normalize {
        #[arg(long, required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, requires = "clip_hi")]
        clip_lo: Option<f64>,
        #[arg(long, requires = "clip_lo")]
        clip_hi: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_FILL_VALUE)]
        fill: f64,
    },
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Run every stage for the given clips (all clips when none given).
    Run(RunArgs),
    /// Continue an interrupted run from its manifest.
    Resume(RunArgs),
    /// Summarize a manifest.
    Stats {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    clips: Vec<String>,
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let layout = RdsHqLayout::new(&a.layout);
    let mut clip = load_clip(&layout, &a.clip)?;
    let mut spec = match &a.spec {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?).with_context(|| p.display().to_string())?,
        None => RenderSpec::default(),
    };
    if let Some(p) = &a.trajectory {
        let t: TrajectorySpec = serde_json::from_str(&std::fs::read_to_string(p)?).with_context(|| p.display().to_string())?;
        clip = clip.with_ego_track(interpolate_trajectory(&t)?)?;
    }
    if let Some(n) = a.frames {
        spec.frame_count = n;
    }
    spec.draw.lidar_depth = matches!(a.condition, Condition::Lidar);
    let frames = render_condition_video(&clip, &spec)?;
    if a.raw {
        write_raw_video(&a.out, &frames, spec.fps)?;
    } else {
        write_png_frames(&a.out, &frames)?;
    }
    eprintln!("rendered {} frames of {}", frames.len(), a.clip);
    Ok(())
}

fn lidar(cmd: LidarCommand) -> Result<()> {
    match cmd {
        LidarCommand::Encode {
            layout,
            clip,
            sensor,
            sweep,
            out,
        } => {
            let clip = load_clip(&RdsHqLayout::new(layout), &clip)?;
            let sensor = Arc::new(SensorModel::load(&sensor)?);
            let sweeps = clip.lidar_sweeps().context("clip has no lidar sweeps")?;
            let s = sweeps
                .get(sweep)
                .with_context(|| format!("sweep {sweep} out of range ({} sweeps)", sweeps.len()))?;
            let (map, stats, flagged) = sweep_to_range_map(s, clip.ego_pose_track(), sensor)?;
            write_range_map(&out, &map)?;
            if !flagged.is_empty() {
                eprintln!("{} returns did not converge during de-compensation", flagged.len());
            }
            print_json(&stats)
        }
        LidarCommand::Decode {
            input,
            layout,
            clip,
            out,
        } => {
            let clip = load_clip(&RdsHqLayout::new(layout), &clip)?;
            let map = read_range_map(&input)?;
            let sweep = decode_range_map(&map, clip.ego_pose_track(), FrameTag::World)?;
            std::fs::write(&out, encode_sweeps(std::slice::from_ref(&sweep)))?;
            eprintln!("decoded {} points", sweep.points.len());
            Ok(())
        }
        LidarCommand::Normalize {
            inputs,
            out_dir,
            clip_lo,
            clip_hi,
            fill,
        } => {
            let maps = inputs.iter().map(|p| read_range_map(p)).collect::<sdg_core::Result<Vec<_>>>()?;
            let (lo, hi) = match (clip_lo, clip_hi) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => compute_percentiles(|| maps.iter())?,
            };
            std::fs::create_dir_all(&out_dir)?;
            for (p, m) in inputs.iter().zip(&maps) {
                let name = p.file_name().context("input stem has no file name")?;
                write_normalized(&out_dir.join(name), &normalize_with_fill(m, lo, hi, fill)?)?;
            }
            print_json(&serde_json::json!({ "clip_lo": lo, "clip_hi": hi, "maps": maps.len() }))
        }
    }
}

fn pipeline_run(a: RunArgs) -> Result<ExitCode> {
    let cfg = PipelineConfig::load(&a.config)?;
    let clips = if a.clips.is_empty() {
        RdsHqLayout::new(&cfg.layout).list_clips()?
    } else {
        a.clips
    };
    let services = Services::from_config(&cfg)?;
    let report = run_pipeline(&clips, &cfg, &services, &RunOptions::default())?;
    print_json(&serde_json::json!({
        "stats": report.stats,
        "discard_rate": report.discard_rate(),
        "failures": report.failures,
        "appended": report.appended,
    }))?;
    Ok(if report.is_complete() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn mix(manifest: &Path, layout: &Path, ratio: f64, seed: u64) -> Result<()> {
    let log = read_manifest(manifest)?;
    let real = RdsHqLayout::new(layout).list_clips()?;
    let spec = MixSpec::from_manifest(real, &fold_manifest(&log.entries), ratio, seed);
    let mix = sample_training_mix(&spec)?;
    if mix.capped() {
        eprintln!(
            "warning: requested {} synthetic items, only {} available",
            mix.requested_synthetic, mix.sampled_synthetic
        );
    }
    print_json(&mix)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Render(a) => render(a)?,
        Command::Lidar(c) => lidar(c)?,
        Command::Convert { descriptor, src, layout } => {
            let d = SourceDescriptor::load(&descriptor)?;
            let report = convert_third_party(&d, &src, &RdsHqLayout::new(layout))?;
            print_json(&report)?;
        }
        Command::Pipeline(PipelineCommand::Run(a)) | Command::Pipeline(PipelineCommand::Resume(a)) => {
            return pipeline_run(a)
        }
        Command::Pipeline(PipelineCommand::Stats { manifest }) => {
            let stats = manifest_stats(&manifest)?;
            print_json(&serde_json::json!({ "stats": stats, "discard_rate": stats.discard_rate() }))?;
        }
        Command::Mix {
            manifest,
            layout,
            ratio,
            seed,
        } => mix(&manifest, &layout, ratio, seed)?,
        Command::Serve { layout, port } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(sdg_core::api::serve_api(RdsHqLayout::new(layout), port))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<sdg_core::Error>().is_some_and(|e| matches!(e, sdg_core::Error::Interrupted { .. })) {
                return ExitCode::from(3);
            }
            ExitCode::FAILURE
        }
    }
}
