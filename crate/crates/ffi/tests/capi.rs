use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use centerout_ffi::*;

fn last_error() -> String {
    let p = centerout_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn square_sample(n: usize, seed: u64) -> Vec<f64> {
    let spec = CString::new(r#"{"kind": "uniform-box", "lower": [0, 0], "upper": [1, 1]}"#).unwrap();
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(centerout_generator_new(spec.as_ptr(), &mut g), CenteroutStatus::Ok);
        assert_eq!(centerout_generator_dim(g), 2);
        let mut pts = vec![0.0; n * 2];
        assert_eq!(centerout_generator_sample(g, n, seed, pts.as_mut_ptr()), CenteroutStatus::Ok);
        centerout_generator_free(g);
        pts
    }
}

#[test]
fn fit_and_evaluate_round_trip() {
    let n = 60;
    let pts = square_sample(n, 1);
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(centerout_model_fit(pts.as_ptr(), n, 2, 0, 0, 7, &mut model), CenteroutStatus::Ok);
        assert_eq!((centerout_model_dim(model), centerout_model_len(model)), (2, n));
        let (mut nr, mut ns, mut n0) = (0, 0, 0);
        assert_eq!(centerout_model_grid_shape(model, &mut nr, &mut ns, &mut n0), CenteroutStatus::Ok);
        assert_eq!(nr * ns + n0, n);

        for x in pts.chunks(2) {
            let (mut u, mut back) = ([0.0; 2], [0.0; 2]);
            let mut k = 0;
            assert_eq!(centerout_model_forward(model, x.as_ptr(), u.as_mut_ptr(), &mut k), CenteroutStatus::Ok);
            assert!(u[0].hypot(u[1]) < 1.0);
            if u != [0.0, 0.0] {
                assert_eq!(centerout_model_quantile(model, u.as_ptr(), back.as_mut_ptr(), ptr::null_mut()), CenteroutStatus::Ok);
                assert_eq!(back, [x[0], x[1]]);
            }
        }

        let (mut ranks, mut signs) = (vec![0.0; n], vec![0.0; 2 * n]);
        assert_eq!(centerout_model_ranks_signs(model, ranks.as_mut_ptr(), signs.as_mut_ptr()), CenteroutStatus::Ok);
        assert!(ranks.iter().all(|&r| (0.0..1.0).contains(&r)));

        let mut count = 0;
        let mut buf = vec![0.0; 2 * 16];
        assert_eq!(centerout_model_contour(model, 0.5, 16, buf.as_mut_ptr(), buf.len(), &mut count), CenteroutStatus::Ok);
        assert_eq!(count, 16);
        assert_eq!(centerout_model_contour(model, 0.5, 16, buf.as_mut_ptr(), 10, &mut count), CenteroutStatus::BufferTooSmall);
        centerout_model_free(model);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut model = ptr::null_mut();
        let pts = square_sample(10, 2);
        assert_eq!(centerout_model_fit(pts.as_ptr(), 10, 2, 4, 4, 0, &mut model), CenteroutStatus::InvalidArgument);
        assert!(last_error().contains("exceeds"), "{}", last_error());
        assert_eq!(centerout_model_fit(ptr::null(), 10, 2, 0, 0, 0, &mut model), CenteroutStatus::NullPointer);

        assert_eq!(centerout_model_fit(pts.as_ptr(), 10, 2, 0, 0, 0, &mut model), CenteroutStatus::Ok);
        assert!(centerout_last_error().is_null());
        let (u, mut out) = ([0.8, 0.8], [0.0; 2]);
        assert_eq!(centerout_model_quantile(model, u.as_ptr(), out.as_mut_ptr(), ptr::null_mut()), CenteroutStatus::OutOfDomain);
        centerout_model_free(model);

        let bad = CString::new(r#"{"kind": "uniform-box", "lower": [1], "upper": [0]}"#).unwrap();
        let mut g = ptr::null_mut();
        assert_eq!(centerout_generator_new(bad.as_ptr(), &mut g), CenteroutStatus::InvalidArgument);
        let junk = CString::new("{").unwrap();
        assert_eq!(centerout_generator_new(junk.as_ptr(), &mut g), CenteroutStatus::Parse);
        assert!(g.is_null());
        centerout_model_free(ptr::null_mut());
        assert_eq!(centerout_model_dim(ptr::null()), 0);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(centerout_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "centerout.h"

int main(void) {
    double pts[] = {0.1, 0.2, 0.9, 0.1, 0.5, 0.7, 0.3, 0.95};
    CenteroutModel *m = NULL;
    if (centerout_model_fit(pts, 4, 2, 0, 0, 1, &m) != CENTEROUT_STATUS_OK) return 1;
    double u[2], x[2];
    size_t k = 0;
    if (centerout_model_forward(m, pts + 2, u, &k) != CENTEROUT_STATUS_OK) return 2;
    if (centerout_model_quantile(m, u, x, NULL) != CENTEROUT_STATUS_OK) return 3;
    if (x[0] != pts[2] || x[1] != pts[3]) return 4;
    double far[2] = {2.0, 0.0};
    if (centerout_model_quantile(m, far, x, NULL) != CENTEROUT_STATUS_OUT_OF_DOMAIN) return 5;
    printf("%s\n", centerout_last_error());
    centerout_model_free(m);
    return 0;
}
"#;

/// Compiles a C program against the generated header and the static library.
#[test]
fn c_program_links_and_runs() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let target = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = target.join("libcenterout_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile_dir();
    let src = dir.join("main.c");
    let exe = dir.join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("outside"), "{}", String::from_utf8_lossy(&out.stdout));
    std::fs::remove_dir_all(&dir).unwrap();
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("centerout-capi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
