use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use xnec::media::{Geometry, Video};
use xnec::model::{checkpoint, ModelConfig, NecessityModel};
use xnec_ffi::*;

const N: usize = 45;
const W: u16 = 16;
const H: u16 = 16;

fn inputs() -> (Vec<u8>, Vec<u8>, Vec<f64>) {
    let frames = (0..N * W as usize * H as usize * 3).map(|i| ((i * 7) % 251) as u8).collect();
    let gaze = (0..N * W as usize * H as usize).map(|i| ((i * 13) % 256) as u8).collect();
    let speed = (0..N).map(|i| 10.0 - 0.1 * i as f64).collect();
    (frames, gaze, speed)
}

fn rust_score(model: &NecessityModel) -> f64 {
    let (frames, gaze, speed) = inputs();
    let to_video = |buf: &[u8], g: Geometry| {
        let mut v = Video::new(g);
        for (i, c) in buf.chunks_exact(g.frame_bytes()).enumerate() {
            v.push(i as f64 / 10.0, c.to_vec()).unwrap();
        }
        v
    };
    let video = to_video(&frames, Geometry { width: W, height: H, channels: 3 });
    let gaze = to_video(&gaze, Geometry { width: W, height: H, channels: 1 });
    let clip = model.prepare_clip("t", &video, Some(&gaze), &speed).unwrap();
    model.score(&clip, N - 1).unwrap()
}

fn saved_model(dir: &Path) -> (PathBuf, NecessityModel) {
    let model = NecessityModel::new(ModelConfig { init_seed: 11, ..Default::default() }).unwrap();
    let path = dir.join("model.xnck");
    checkpoint::save(&model, &path).unwrap();
    (path, model)
}

fn last_error() -> String {
    let p = xnec_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn handle_scores_like_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let (path, model) = saved_model(dir.path());
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { xnec_model_load(cpath.as_ptr(), &mut handle) }, XnecStatus::Ok);
    assert!(xnec_last_error().is_null());

    let mut window = 0usize;
    assert_eq!(unsafe { xnec_model_window_len(handle, &mut window) }, XnecStatus::Ok);
    assert_eq!(window, 40);
    let mut threshold = 0.0;
    assert_eq!(unsafe { xnec_model_threshold(handle, &mut threshold) }, XnecStatus::Ok);
    assert_eq!(threshold, 0.5);

    let (frames, gaze, speed) = inputs();
    let mut score = f64::NAN;
    let st = unsafe {
        xnec_model_score(handle, frames.as_ptr(), gaze.as_ptr(), N, W, H, 3, speed.as_ptr(), N - 1, &mut score)
    };
    assert_eq!(st, XnecStatus::Ok, "{}", last_error());
    assert_eq!(score, rust_score(&model));

    // A window that would start before frame 0.
    let st = unsafe { xnec_model_score(handle, frames.as_ptr(), gaze.as_ptr(), N, W, H, 3, speed.as_ptr(), 10, &mut score) };
    assert_eq!(st, XnecStatus::Model);
    assert!(!last_error().is_empty());

    let st = unsafe { xnec_model_score(handle, frames.as_ptr(), gaze.as_ptr(), N, W, H, 2, speed.as_ptr(), N - 1, &mut score) };
    assert_eq!(st, XnecStatus::InvalidArgument);
    let st = unsafe { xnec_model_score(handle, ptr::null(), ptr::null(), N, W, H, 3, speed.as_ptr(), N - 1, &mut score) };
    assert_eq!(st, XnecStatus::NullPointer);
    unsafe { xnec_model_free(handle) };
    unsafe { xnec_model_free(ptr::null_mut()) };
}

#[test]
fn load_errors_are_classified() {
    let dir = tempfile::tempdir().unwrap();
    let mut handle = ptr::null_mut();
    let missing = CString::new(dir.path().join("none.xnck").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { xnec_model_load(missing.as_ptr(), &mut handle) }, XnecStatus::Io);
    assert!(handle.is_null());

    let junk = dir.path().join("junk.xnck");
    std::fs::write(&junk, b"XNCKjunk").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { xnec_model_load(junk.as_ptr(), &mut handle) }, XnecStatus::Checkpoint);
    assert!(last_error().contains("truncated") || last_error().contains("version"));
    assert_eq!(unsafe { xnec_model_load(ptr::null(), &mut handle) }, XnecStatus::NullPointer);
}

#[test]
fn decisions_and_statistics() {
    let mut explain = -1;
    assert_eq!(unsafe { xnec_decide(0.5, 0.5, &mut explain) }, XnecStatus::Ok);
    assert_eq!(explain, 1);
    assert_eq!(unsafe { xnec_decide(0.49, 0.5, &mut explain) }, XnecStatus::Ok);
    assert_eq!(explain, 0);
    assert_eq!(unsafe { xnec_decide(0.5, 1.5, &mut explain) }, XnecStatus::InvalidArgument);

    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [2.0, 4.0, 6.0, 8.5];
    let mut r = 0.0;
    assert_eq!(unsafe { xnec_pearson(x.as_ptr(), y.as_ptr(), 4, &mut r) }, XnecStatus::Ok);
    assert_eq!(r, xnec::studystats::pearson(&x, &y).unwrap());

    let b = [0u8, 0, 1, 1];
    let mut rpb = 0.0;
    assert_eq!(unsafe { xnec_point_biserial(b.as_ptr(), y.as_ptr(), 4, &mut rpb) }, XnecStatus::Ok);
    assert_eq!(rpb, xnec::studystats::pearson(&[0.0, 0.0, 1.0, 1.0], &y).unwrap());
    let bad = [0u8, 2, 1, 1];
    assert_eq!(unsafe { xnec_point_biserial(bad.as_ptr(), y.as_ptr(), 4, &mut rpb) }, XnecStatus::InvalidArgument);

    let scores = [0.1, 0.4, 0.35, 0.8];
    let labels = [0u8, 0, 1, 1];
    let mut auc = 0.0;
    assert_eq!(unsafe { xnec_roc_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut auc) }, XnecStatus::Ok);
    assert_eq!(auc, 0.75);
    let one_class = [1u8; 4];
    assert_eq!(unsafe { xnec_roc_auc(scores.as_ptr(), one_class.as_ptr(), 4, &mut auc) }, XnecStatus::Stats);

    let s = [0.9, 0.1, 0.5, 0.4, 0.6];
    let mut m = 0.0;
    assert_eq!(unsafe { xnec_truncated_mean(s.as_ptr(), 5, &mut m) }, XnecStatus::Ok);
    assert_eq!(m, 0.5);
    assert_eq!(unsafe { xnec_truncated_mean(s.as_ptr(), 2, &mut m) }, XnecStatus::Stats);
    assert_eq!(unsafe { xnec_pearson(x.as_ptr(), y.as_ptr(), 4, ptr::null_mut()) }, XnecStatus::NullPointer);
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(xnec_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles a C program against the generated header and the static
/// library, then checks it reproduces the Rust score bit for bit.
#[test]
fn c_program_links_against_header() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header_dir = crate_dir.join("include");
    assert!(header_dir.join("xnec.h").exists(), "header was not generated");
    // Test binaries live in <target>/<profile>/deps; libraries one level up.
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libxnec_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let (model_path, model) = saved_model(dir.path());
    let bin = dir.path().join("c_smoke");
    let out = Command::new("cc")
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&header_dir)
        .arg(crate_dir.join("tests").join("c_smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .expect("cc is available");
    assert!(out.status.success(), "cc failed: {}", String::from_utf8_lossy(&out.stderr));

    let run = Command::new(&bin).arg(&model_path).output().unwrap();
    assert!(run.status.success(), "c_smoke failed: {}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    let fields: Vec<&str> = stdout.split_whitespace().collect();
    assert_eq!(fields[0], "40");
    let score: f64 = fields[1].parse().unwrap();
    assert_eq!(score, rust_score(&model));
    assert_eq!(fields[2], if score >= 0.5 { "1" } else { "0" });
}
