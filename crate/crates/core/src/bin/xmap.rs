use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use xmap_core::bench::bench_depth_frame;
use xmap_core::geometry::event_to_3d;
use xmap_core::io::config::PipelineConfig;
use xmap_core::io::{calib, events, maps, ply, points};
use xmap_core::metrics::{DepthImage, EvalReport};
use xmap_core::pipeline::{
    calibrate_from_stream, disparity_map_points, oracle_disparity, positive_frames,
    truth_depth_image, xmap_from_projector_map,
};
use xmap_core::scene::Scene;
use xmap_core::simulator::{
    default_calibration, projector_time_map_for, simulate, ScanProfile, SpeedModel,
};
use xmap_core::timemap::{ideal_projector_time_map, IdealVariant};
use xmap_core::{
    depth_frame, DedupMode, Error, Rectification, Result, StereoCalibration, TriggerConfig,
};

#[derive(Parser)]
#[command(
    name = "xmap",
    version,
    about = "Depth from event-camera + laser-projector recordings"
)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Largest gap between events of one frame, µs.
    #[arg(long, global = true)]
    max_gap_us: Option<u64>,
    /// Shortest accepted frame, µs.
    #[arg(long, global = true)]
    min_span_us: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Speed {
    Linear,
    Quadratic,
}

impl From<Speed> for SpeedModel {
    fn from(s: Speed) -> Self {
        match s {
            Speed::Linear => SpeedModel::Linear,
            Speed::Quadratic => SpeedModel::quadratic(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Simple,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic recording of a scene.
    Simulate {
        /// `plane`, `sphere`, `staircase`, or a scene file (.toml / .json).
        #[arg(long, default_value = "plane")]
        scene: String,
        /// Depth of the `plane` preset, m.
        #[arg(long)]
        depth: Option<f64>,
        #[arg(long, default_value_t = 3)]
        frames: u32,
        #[arg(long, value_enum, default_value = "linear")]
        speed: Speed,
        #[arg(long, default_value_t = 0.0)]
        x_jitter: f64,
        #[arg(long, default_value_t = 0.0)]
        t_jitter: f64,
        /// µs.
        #[arg(long)]
        refractory: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        negative_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        duplicate_rate: f64,
        /// Rig to simulate; the built-in rig otherwise.
        #[arg(long)]
        calib: Option<PathBuf>,
        /// Events file (.csv for text, binary otherwise).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Also write the rig used.
        #[arg(long)]
        write_calib: Option<PathBuf>,
    },
    /// Print the detected frames as JSON.
    SplitFrames {
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Projector time map from a recording of a plane, or the ideal map.
    CalibrateTimemap {
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        calib: Option<PathBuf>,
        /// Write the ideal map instead of calibrating.
        #[arg(long, value_enum)]
        ideal: Option<Variant>,
        /// Write the exact map of a simulated speed model instead.
        #[arg(long, value_enum, conflicts_with = "ideal")]
        model: Option<Speed>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rectify a projector time map and build its X-map.
    BuildXmap {
        #[arg(long)]
        time_map: Option<PathBuf>,
        #[arg(long)]
        calib: Option<PathBuf>,
        #[arg(long)]
        time_columns: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the camera rectification map.
        #[arg(long)]
        rectify_out: Option<PathBuf>,
    },
    /// Per-event depth by X-map lookup.
    Depth {
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        xmap: Option<PathBuf>,
        #[arg(long)]
        calib: Option<PathBuf>,
        /// Camera rectification map; computed from the calibration otherwise.
        #[arg(long)]
        rectify_map: Option<PathBuf>,
        #[arg(long)]
        dedup: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Depth from the time-map disparity search.
    OracleDepth {
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        time_map: Option<PathBuf>,
        #[arg(long)]
        calib: Option<PathBuf>,
        #[arg(long)]
        max_disparity: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a depth CSV with a reference and print the report as JSON.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        /// Reference depth CSV (e.g. from `oracle-depth`).
        #[arg(long, conflicts_with_all = ["truth", "events"])]
        reference: Option<PathBuf>,
        /// Simulator truth; needs the matching events.
        #[arg(long, requires = "events")]
        truth: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        calib: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        /// Also report the plane-fit residual of the estimate.
        #[arg(long)]
        plane: bool,
    },
    /// Write one frame of a depth CSV as a PLY point cloud.
    ExportPly {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        calib: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the depth lookup on one frame. Without inputs, a simulated plane
    /// of about 100k events is used.
    Bench {
        #[arg(long, requires = "xmap")]
        events: Option<PathBuf>,
        #[arg(long)]
        xmap: Option<PathBuf>,
        #[arg(long)]
        calib: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long, default_value_t = 50)]
        repetitions: usize,
    },
}

struct Ctx {
    cfg: PipelineConfig,
    seed: u64,
    trigger: TriggerConfig,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self> {
        let cfg = match &cli.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let mut trigger = cfg.trigger_config()?;
        if let Some(g) = cli.max_gap_us {
            trigger.max_intra_frame_gap = g;
        }
        if let Some(s) = cli.min_span_us {
            trigger.min_frame_span = s;
        }
        trigger.validate()?;
        Ok(Self {
            seed: cli.seed.unwrap_or(cfg.seed),
            cfg,
            trigger,
        })
    }

    fn calibration(&self, flag: &Option<PathBuf>) -> Result<StereoCalibration> {
        match flag.as_ref().or(self.cfg.paths.calibration.as_ref()) {
            Some(p) => calib::read_calibration(p),
            None => Ok(default_calibration()),
        }
    }

    fn events_path<'a>(&'a self, flag: &'a Option<PathBuf>) -> Result<&'a Path> {
        required(flag, &self.cfg.paths.events, "events")
    }
}

fn required<'a>(
    flag: &'a Option<PathBuf>,
    configured: &'a Option<PathBuf>,
    what: &str,
) -> Result<&'a Path> {
    flag.as_deref()
        .or(configured.as_deref())
        .ok_or_else(|| Error::InvalidArgument(format!("no {what} file given (flag or config)")))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn load_scene(name: &str, depth: Option<f64>) -> Result<Scene> {
    if let Some(mut scene) = Scene::preset(name) {
        if let (Scene::Plane { depth: d }, Some(z)) = (&mut scene, depth) {
            *d = z;
        }
        return Ok(scene);
    }
    let path = Path::new(name);
    let text = std::fs::read_to_string(path)?;
    let scene: Scene = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("scene: {e}")))?
    } else {
        toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("scene: {e}")))?
    };
    scene.validate()?;
    Ok(scene)
}

#[derive(Serialize)]
struct FrameInfo {
    index: usize,
    start_t: u64,
    end_t: u64,
    events: usize,
}

#[derive(Serialize)]
struct DepthSummary {
    frames: usize,
    points: usize,
    discarded: usize,
}

fn pick<T>(items: &[T], index: usize, what: &str) -> Result<usize> {
    if index < items.len() {
        Ok(index)
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} {index} requested but only {} available",
            items.len()
        )))
    }
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(&cli)?;
    match cli.command {
        Command::Simulate {
            scene,
            depth,
            frames,
            speed,
            x_jitter,
            t_jitter,
            refractory,
            negative_rate,
            duplicate_rate,
            calib: calib_path,
            out,
            truth,
            write_calib,
        } => {
            let scene = load_scene(&scene, depth)?;
            let rig = ctx.calibration(&calib_path)?;
            let defaults = ScanProfile::default();
            let profile = ScanProfile {
                speed_model: speed.into(),
                x_jitter_sigma: x_jitter,
                t_jitter_sigma: t_jitter,
                refractory: refractory.unwrap_or(defaults.refractory),
                negative_event_rate: negative_rate,
                duplicate_rate,
                ..defaults
            };
            let (stream, gt) = simulate(&scene, &rig, &profile, frames, ctx.seed)?;
            events::write_events(&out, &stream)?;
            if let Some(p) = truth {
                points::write_truth(&p, &gt)?;
            }
            if let Some(p) = write_calib {
                calib::write_calibration(&p, &rig)?;
            }
            eprintln!("{} events in {} frames", stream.len(), frames);
        }
        Command::SplitFrames { events: ev } => {
            let stream = events::read_events(ctx.events_path(&ev)?)?;
            let (_, frames) = positive_frames(&stream, &ctx.trigger);
            let info: Vec<FrameInfo> = frames
                .iter()
                .enumerate()
                .map(|(index, f)| FrameInfo {
                    index,
                    start_t: f.start_t,
                    end_t: f.end_t,
                    events: f.len(),
                })
                .collect();
            print_json(&info)?;
        }
        Command::CalibrateTimemap {
            events: ev,
            calib: calib_path,
            ideal,
            model,
            out,
        } => {
            let rig = ctx.calibration(&calib_path)?;
            let (w, h) = (rig.projector.width as usize, rig.projector.height as usize);
            let map = match (ideal, model) {
                (Some(Variant::Simple), _) => ideal_projector_time_map(w, h, IdealVariant::Simple),
                (Some(Variant::Full), _) => ideal_projector_time_map(w, h, IdealVariant::Full),
                (None, Some(speed)) => projector_time_map_for(&speed.into(), w, h),
                (None, None) => {
                    let stream = events::read_events(ctx.events_path(&ev)?)?;
                    calibrate_from_stream(&stream, &ctx.trigger, &rig)?
                }
            };
            maps::write_time_map(&out, &map)?;
        }
        Command::BuildXmap {
            time_map,
            calib: calib_path,
            time_columns,
            out,
            rectify_out,
        } => {
            let rig = ctx.calibration(&calib_path)?;
            let map =
                maps::read_time_map(required(&time_map, &ctx.cfg.paths.time_map, "time map")?)?;
            let xmap =
                xmap_from_projector_map(&map, &rig, time_columns.or(ctx.cfg.depth.time_columns))?;
            maps::write_xmap(&out, &xmap)?;
            if let Some(p) = rectify_out {
                maps::write_rectify_map(&p, &Rectification::new(&rig)?.camera_map())?;
            }
        }
        Command::Depth {
            events: ev,
            xmap,
            calib: calib_path,
            rectify_map,
            dedup,
            out,
        } => {
            let rig = ctx.calibration(&calib_path)?;
            let stream = events::read_events(ctx.events_path(&ev)?)?;
            let xmap = maps::read_xmap(required(&xmap, &ctx.cfg.paths.xmap, "X-map")?)?;
            let rect = match rectify_map {
                Some(p) => maps::read_rectify_map(&p)?,
                None => Rectification::new(&rig)?.camera_map(),
            };
            let dedup: DedupMode = match dedup {
                Some(s) => s.parse()?,
                None => ctx.cfg.dedup_mode()?,
            };
            let (positive, frames) = positive_frames(&stream, &ctx.trigger);
            let out_frames = frames
                .iter()
                .map(|f| {
                    depth_frame(
                        &positive.events()[f.event_range.clone()],
                        f,
                        &xmap,
                        &rect,
                        &rig,
                        dedup,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            points::write_depth_frames(&out, &out_frames)?;
            print_json(&DepthSummary {
                frames: out_frames.len(),
                points: out_frames.iter().map(|f| f.len()).sum(),
                discarded: out_frames.iter().map(|f| f.discards.total()).sum(),
            })?;
        }
        Command::OracleDepth {
            events: ev,
            time_map,
            calib: calib_path,
            max_disparity,
            out,
        } => {
            let rig = ctx.calibration(&calib_path)?;
            let stream = events::read_events(ctx.events_path(&ev)?)?;
            let map =
                maps::read_time_map(required(&time_map, &ctx.cfg.paths.time_map, "time map")?)?;
            let cam_rect = Rectification::new(&rig)?.camera_map();
            let max_d = max_disparity.unwrap_or(ctx.cfg.depth.max_disparity);
            let (positive, frames) = positive_frames(&stream, &ctx.trigger);
            let out_frames = frames
                .iter()
                .map(|f| {
                    Ok(disparity_map_points(
                        &oracle_disparity(&positive, f, &map, &cam_rect, &rig, max_d)?,
                        f,
                        &rig,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            points::write_depth_frames(&out, &out_frames)?;
        }
        Command::Eval {
            estimate,
            reference,
            truth,
            events: ev,
            calib: calib_path,
            frame,
            plane,
        } => {
            let rig = ctx.calibration(&calib_path)?;
            let (rw, rh) = rig.rectified_size();
            let est_frames = points::read_depth_frames(&estimate)?;
            let est = &est_frames[pick(&est_frames, frame, "estimate frame")?];
            let reference_img = match (reference, truth) {
                (Some(p), _) => {
                    let refs = points::read_depth_frames(&p)?;
                    DepthImage::from_depth_frame(
                        &refs[pick(&refs, frame, "reference frame")?],
                        rw,
                        rh,
                    )
                }
                (None, Some(p)) => {
                    let gt = points::read_truth(&p)?;
                    let stream = events::read_events(ctx.events_path(&ev)?)?;
                    let (_, frames) = positive_frames(&stream, &ctx.trigger);
                    let f = &frames[pick(&frames, frame, "frame")?];
                    truth_depth_image(
                        &stream,
                        &gt,
                        f,
                        &Rectification::new(&rig)?.camera_map(),
                        &rig,
                    )?
                }
                (None, None) => {
                    return Err(Error::InvalidArgument(
                        "eval needs --reference or --truth".into(),
                    ))
                }
            };
            let plane_points = if plane {
                Some(
                    est.points
                        .iter()
                        .map(|p| event_to_3d(p.x_r, p.y_r, p.disparity, &rig))
                        .collect::<Result<Vec<_>>>()?,
                )
            } else {
                None
            };
            let est_img = DepthImage::from_depth_frame(est, rw, rh);
            print_json(&EvalReport::evaluate(
                &est_img,
                &reference_img,
                est.discards,
                plane_points.as_deref(),
            )?)?;
        }
        Command::ExportPly {
            depth,
            calib: calib_path,
            frame,
            out,
        } => {
            let rig = ctx.calibration(&calib_path)?;
            let frames = points::read_depth_frames(&depth)?;
            ply::write_ply(&out, &frames[pick(&frames, frame, "frame")?], &rig)?;
        }
        Command::Bench {
            events: ev,
            xmap,
            calib: calib_path,
            frame,
            repetitions,
        } => {
            let rig = ctx.calibration(&calib_path)?;
            let (stream, xmap) = match (ev.as_ref().or(ctx.cfg.paths.events.as_ref()), xmap) {
                (Some(e), Some(x)) => (events::read_events(e)?, maps::read_xmap(&x)?),
                _ => {
                    let profile = ScanProfile {
                        refractory: 50.0,
                        ..ScanProfile::default()
                    };
                    let (stream, _) =
                        simulate(&Scene::Plane { depth: 1.0 }, &rig, &profile, 1, ctx.seed)?;
                    let w = rig.projector.width as usize;
                    let ideal = ideal_projector_time_map(
                        w,
                        rig.projector.height as usize,
                        IdealVariant::Simple,
                    );
                    (stream, xmap_from_projector_map(&ideal, &rig, None)?)
                }
            };
            let rect = Rectification::new(&rig)?.camera_map();
            let (positive, frames) = positive_frames(&stream, &ctx.trigger);
            let f = &frames[pick(&frames, frame, "frame")?];
            let stats = bench_depth_frame(
                &positive.events()[f.event_range.clone()],
                f,
                &xmap,
                &rect,
                &rig,
                ctx.cfg.dedup_mode()?,
                repetitions,
            )?;
            print_json(&stats)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
