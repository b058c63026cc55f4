//! Compiles a C and a C++ translation unit against the generated header.

use std::path::Path;
use std::process::Command;

const PROGRAM: &str = r#"
#include "xmap.h"
int use_api(const XmapEvent *ev, size_t n) {
    XmapCalibration *c = NULL;
    XmapRectifyMap *r = NULL;
    XmapXMap *x = NULL;
    XmapDepthFrame *f = NULL;
    XmapFrame frames[8];
    size_t count = 0;
    if (xmap_calibration_default(&c) != XMAP_STATUS_OK) return 1;
    xmap_rectify_map_camera(c, &r);
    xmap_xmap_read("map.xmp", &x);
    xmap_split_frames(ev, n, 40, 8000, frames, 8, &count);
    if (xmap_depth_frame(x, r, c, ev, n, 0, 1, XMAP_DEDUP_KEEP_FIRST, &f) != XMAP_STATUS_OK) {
        return (int)xmap_last_error()[0];
    }
    const XmapPoint *p = xmap_depth_frame_points(f);
    double z = xmap_depth_frame_len(f) ? p[0].depth : 0.0;
    xmap_depth_frame_free(f);
    xmap_xmap_free(x);
    xmap_rectify_map_free(r);
    xmap_calibration_free(c);
    return z > 0.0;
}
"#;

fn compile(compiler: &str, ext: &str) {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join(format!("use_api.{ext}"));
    std::fs::write(&src, PROGRAM).unwrap();
    let out = match Command::new(compiler)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
    {
        Ok(o) => o,
        Err(_) => {
            eprintln!("{compiler} not available, skipping");
            return;
        }
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn header_compiles_as_c() {
    compile("cc", "c");
}

#[test]
fn header_compiles_as_cpp() {
    compile("c++", "cpp");
}
