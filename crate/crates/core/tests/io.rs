use nalgebra::{Matrix3, Point3, Rotation3, Vector3};

use xmap_core::geometry::event_to_3d;
use xmap_core::io::config::PipelineConfig;
use xmap_core::io::{calib, events, maps, ply, points};
use xmap_core::metrics::plane_fit_rmse;
use xmap_core::pipeline::{positive_frames, xmap_from_projector_map};
use xmap_core::scene::Scene;
use xmap_core::simulator::{default_calibration, simulate, ScanProfile};
use xmap_core::timemap::{ideal_projector_time_map, IdealVariant};
use xmap_core::{
    depth_frame, DedupMode, DepthFrame, PinholeIntrinsics, Rectification, StereoCalibration,
    TriggerConfig,
};

fn noisy_profile() -> ScanProfile {
    ScanProfile {
        negative_event_rate: 0.1,
        duplicate_rate: 0.1,
        t_jitter_sigma: 1.0,
        ..ScanProfile::default()
    }
}

#[test]
fn event_files_round_trip_in_both_encodings() {
    let (stream, _) = simulate(
        &Scene::preset("sphere").unwrap(),
        &default_calibration(),
        &noisy_profile(),
        1,
        1,
    )
    .unwrap();
    let sample = stream.slice(100_000..110_000);
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("ev.xev");
    let csv = dir.path().join("ev.csv");
    events::write_events(&bin, &sample).unwrap();
    events::write_events(&csv, &sample).unwrap();
    let from_bin = events::read_events(&bin).unwrap();
    let from_csv = events::read_events(&csv).unwrap();
    assert_eq!(from_bin, sample);
    assert_eq!(from_csv, sample);
    assert_eq!(std::fs::metadata(&bin).unwrap().len(), 16 + 16 * 10_000);
}

fn tilted_rig() -> StereoCalibration {
    let cam = PinholeIntrinsics::new(512.5, 511.0, 321.25, 238.5, 640, 480).unwrap();
    let proj = PinholeIntrinsics::new(1490.0, 1502.0, 359.0, 641.0, 720, 1280).unwrap();
    let rot: Matrix3<f64> = *Rotation3::from_euler_angles(0.01, -0.05, 0.02).matrix();
    StereoCalibration::new(cam, proj, rot, Vector3::new(0.1, 0.003, -0.002)).unwrap()
}

#[test]
fn maps_and_calibration_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let rig = tilted_rig();
    let p = dir.path().join("rig.txt");
    calib::write_calibration(&p, &rig).unwrap();
    assert_eq!(calib::read_calibration(&p).unwrap(), rig);

    let tm = ideal_projector_time_map(720, 1280, IdealVariant::Full);
    let p = dir.path().join("tm.xmp");
    maps::write_time_map(&p, &tm).unwrap();
    assert_eq!(maps::read_time_map(&p).unwrap().values(), tm.values());

    let xm = xmap_from_projector_map(&tm, &rig, Some(1000)).unwrap();
    let p = dir.path().join("xm.xmp");
    maps::write_xmap(&p, &xm).unwrap();
    let back = maps::read_xmap(&p).unwrap();
    assert_eq!(back.time_columns(), 1000);
    assert!(back
        .entries()
        .iter()
        .zip(xm.entries())
        .all(|(a, b)| a.to_bits() == b.to_bits()));

    let rm = Rectification::new(&rig).unwrap().camera_map();
    let p = dir.path().join("cam.rmap");
    maps::write_rectify_map(&p, &rm).unwrap();
    let back = maps::read_rectify_map(&p).unwrap();
    assert!(back
        .coords()
        .iter()
        .flatten()
        .zip(rm.coords().iter().flatten())
        .all(|(a, b)| a.to_bits() == b.to_bits()));

    // Reading one kind as another is rejected.
    assert!(maps::read_time_map(&p).is_err());
}

fn plane_depth() -> (DepthFrame, StereoCalibration) {
    let calib = default_calibration();
    let profile = ScanProfile {
        x_jitter_sigma: 0.5,
        ..ScanProfile::default()
    };
    let (stream, _) = simulate(&Scene::Plane { depth: 0.9 }, &calib, &profile, 1, 2).unwrap();
    let (positive, frames) = positive_frames(&stream, &TriggerConfig::default());
    let f = &frames[0];
    let xmap = xmap_from_projector_map(
        &ideal_projector_time_map(720, 1280, IdealVariant::Full),
        &calib,
        None,
    )
    .unwrap();
    let cam = Rectification::new(&calib).unwrap().camera_map();
    let df = depth_frame(
        &positive.events()[f.event_range.clone()],
        f,
        &xmap,
        &cam,
        &calib,
        DedupMode::KeepFirst,
    )
    .unwrap();
    (df, calib)
}

#[test]
fn ply_reimport_preserves_plane_fit() {
    let (df, calib) = plane_depth();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cloud.ply");
    ply::write_ply(&p, &df, &calib).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    let (header, body) = text.split_once("end_header\n").unwrap();
    assert!(header.contains(&format!("element vertex {}", df.len())));
    let reread: Vec<Point3<f64>> = body
        .lines()
        .map(|l| {
            let v: Vec<f64> = l.split(' ').map(|s| s.parse().unwrap()).collect();
            Point3::new(v[0], v[1], v[2])
        })
        .collect();
    assert_eq!(reread.len(), df.len());
    let direct: Vec<Point3<f64>> = df
        .points
        .iter()
        .map(|p| event_to_3d(p.x_r, p.y_r, p.disparity, &calib).unwrap())
        .collect();
    let (a, b) = (
        plane_fit_rmse(&reread).unwrap(),
        plane_fit_rmse(&direct).unwrap(),
    );
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
}

#[test]
fn depth_and_truth_csv_round_trip() {
    let (df, _) = plane_depth();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("depth.csv");
    let frames = vec![
        df.clone(),
        DepthFrame {
            start_t: 5,
            end_t: 9,
            ..Default::default()
        },
    ];
    points::write_depth_frames(&p, &frames).unwrap();
    assert_eq!(points::read_depth_frames(&p).unwrap(), frames);

    let (_, gt) = simulate(
        &Scene::preset("staircase").unwrap(),
        &default_calibration(),
        &noisy_profile(),
        2,
        3,
    )
    .unwrap();
    let p = dir.path().join("truth.csv");
    points::write_truth(&p, &gt).unwrap();
    assert_eq!(points::read_truth(&p).unwrap(), gt);
}

#[test]
fn config_file_drives_paths_and_trigger() {
    let dir = tempfile::tempdir().unwrap();
    let rig = dir.path().join("rig.txt");
    calib::write_calibration(&rig, &default_calibration()).unwrap();
    let cfg_path = dir.path().join("pipeline.toml");
    std::fs::write(
        &cfg_path,
        format!(
            "seed = 17\n[paths]\ncalibration = {:?}\n[trigger]\nmax_gap_us = 60\n[depth]\ndedup = \"keep_all\"\ntime_columns = 1440\n",
            rig.display().to_string()
        ),
    )
    .unwrap();
    let cfg = PipelineConfig::load(&cfg_path).unwrap();
    cfg.check_inputs().unwrap();
    assert_eq!(cfg.seed, 17);
    assert_eq!(cfg.trigger_config().unwrap().max_intra_frame_gap, 60);
    assert_eq!(cfg.dedup_mode().unwrap(), DedupMode::KeepAll);
    assert_eq!(cfg.depth.time_columns, Some(1440));

    std::fs::write(&cfg_path, "[paths]\nevents = \"/nonexistent.xev\"\n").unwrap();
    assert!(PipelineConfig::load(&cfg_path)
        .unwrap()
        .check_inputs()
        .is_err());
    std::fs::write(&cfg_path, "[trigger]\nmax_gap_us = 9000\n").unwrap();
    assert!(PipelineConfig::load(&cfg_path).is_err());
    std::fs::write(&cfg_path, "[depth]\nunknown = 1\n").unwrap();
    assert!(PipelineConfig::load(&cfg_path).is_err());
}
