use std::path::Path;
use std::process::{Command, Output};

fn xmap(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_xmap"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    if !out.status.success() {
        panic!(
            "xmap {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    out
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn subcommands_compose() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let quadratic = ["--speed", "quadratic"];

    xmap(
        dir,
        &[
            &[
                "simulate",
                "--scene",
                "plane",
                "--frames",
                "3",
                "--out",
                "cal.xev",
                "--write-calib",
                "rig.txt",
            ][..],
            &quadratic,
        ]
        .concat(),
    );
    let frames = json(&xmap(dir, &["split-frames", "--events", "cal.xev"]));
    assert_eq!(frames.as_array().unwrap().len(), 3);

    xmap(
        dir,
        &[
            "calibrate-timemap",
            "--events",
            "cal.xev",
            "--calib",
            "rig.txt",
            "--out",
            "tm.xmp",
        ],
    );
    xmap(
        dir,
        &[
            "build-xmap",
            "--time-map",
            "tm.xmp",
            "--calib",
            "rig.txt",
            "--out",
            "xm.xmp",
            "--rectify-out",
            "cam.rmap",
        ],
    );

    xmap(
        dir,
        &[
            &[
                "simulate",
                "--scene",
                "staircase",
                "--frames",
                "2",
                "--seed",
                "4",
                "--out",
                "ev.csv",
                "--truth",
                "truth.csv",
            ][..],
            &quadratic,
        ]
        .concat(),
    );
    let summary = json(&xmap(
        dir,
        &[
            "depth",
            "--events",
            "ev.csv",
            "--xmap",
            "xm.xmp",
            "--calib",
            "rig.txt",
            "--rectify-map",
            "cam.rmap",
            "--out",
            "d.csv",
        ],
    ));
    assert_eq!(summary["frames"], 2);
    assert!(summary["points"].as_u64().unwrap() > 150_000);

    let vs_truth = json(&xmap(
        dir,
        &[
            "eval",
            "--estimate",
            "d.csv",
            "--truth",
            "truth.csv",
            "--events",
            "ev.csv",
            "--frame",
            "1",
        ],
    ));
    assert!(vs_truth["rmse_cm"].as_f64().unwrap() < 3.0, "{vs_truth}");
    assert!(vs_truth["plane_fit_rmse_cm"].is_null());

    xmap(
        dir,
        &[
            "oracle-depth",
            "--events",
            "ev.csv",
            "--time-map",
            "tm.xmp",
            "--out",
            "o.csv",
        ],
    );
    let vs_oracle = json(&xmap(
        dir,
        &["eval", "--estimate", "d.csv", "--reference", "o.csv"],
    ));
    assert!(vs_oracle["n_compared"].as_u64().unwrap() > 50_000);

    xmap(
        dir,
        &[
            "export-ply",
            "--depth",
            "d.csv",
            "--frame",
            "1",
            "--out",
            "c.ply",
        ],
    );
    assert!(std::fs::read_to_string(dir.join("c.ply"))
        .unwrap()
        .starts_with("ply\n"));

    let bench = json(&xmap(
        dir,
        &[
            "bench",
            "--events",
            "ev.csv",
            "--xmap",
            "xm.xmp",
            "--calib",
            "rig.txt",
            "--repetitions",
            "3",
        ],
    ));
    assert_eq!(bench["repetitions"], 3);
}

#[test]
fn config_supplies_paths_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    xmap(
        dir,
        &[
            "simulate",
            "--scene",
            "plane",
            "--frames",
            "1",
            "--refractory",
            "50",
            "--out",
            "ev.xev",
        ],
    );
    std::fs::write(
        dir.join("p.toml"),
        "[paths]\nevents = \"ev.xev\"\n[trigger]\nmin_span_us = 14000\n",
    )
    .unwrap();
    let none = json(&xmap(dir, &["--config", "p.toml", "split-frames"]));
    assert_eq!(none.as_array().unwrap().len(), 0);
    let one = json(&xmap(
        dir,
        &[
            "--config",
            "p.toml",
            "--min-span-us",
            "8000",
            "split-frames",
        ],
    ));
    assert_eq!(one.as_array().unwrap().len(), 1);
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_xmap"))
            .current_dir(tmp.path())
            .args(args)
            .output()
            .unwrap()
    };

    let out = run(&["split-frames", "--events", "missing.xev"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = run(&["split-frames"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no events file"));

    std::fs::write(tmp.path().join("bad.xev"), b"XEV1\x01").unwrap();
    let out = run(&["split-frames", "--events", "bad.xev"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncated"));

    let out = run(&[
        "--max-gap-us",
        "9000",
        "split-frames",
        "--events",
        "bad.xev",
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_gap < min_span"));

    let out = run(&["simulate", "--scene", "cube", "--out", "x.xev"]);
    assert!(!out.status.success());
}
