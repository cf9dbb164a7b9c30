use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use trackverify_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(tv_last_error()) }
        .to_str()
        .unwrap()
        .to_string()
}

fn network(side: usize) -> *mut TvNetwork {
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { tv_network_new(5, side, &mut net) }, TvStatus::Ok);
    net
}

fn image(side: usize) -> Vec<f32> {
    (0..side * side)
        .map(|i| ((i * 37) % 101) as f32 / 100.0)
        .collect()
}

#[test]
fn network_lifecycle_and_forward() {
    let net = network(16);
    let (mut side, mut params) = (0, 0);
    assert_eq!(
        unsafe { tv_network_info(net, &mut side, &mut params) },
        TvStatus::Ok
    );
    assert_eq!(side, 16);
    assert!(params > 0);

    let x = image(16);
    let mut y = [0.0f32; 2];
    assert_eq!(
        unsafe { tv_network_forward(net, x.as_ptr(), x.len(), y.as_mut_ptr(), 2) },
        TvStatus::Ok
    );

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.nnw").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { tv_network_save(net, path.as_ptr()) }, TvStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(
        unsafe { tv_network_load(path.as_ptr(), &mut loaded) },
        TvStatus::Ok
    );
    let mut y2 = [0.0f32; 2];
    unsafe { tv_network_forward(loaded, x.as_ptr(), x.len(), y2.as_mut_ptr(), 2) };
    assert_eq!(y.map(f32::to_bits), y2.map(f32::to_bits));

    let (mut lo, mut hi) = ([0.0f32; 2], [0.0f32; 2]);
    let st = unsafe {
        tv_network_bounds(
            net,
            x.as_ptr(),
            x.len(),
            0.01,
            lo.as_mut_ptr(),
            hi.as_mut_ptr(),
            2,
        )
    };
    assert_eq!(st, TvStatus::Ok);
    for i in 0..2 {
        assert!(lo[i] <= y[i] && y[i] <= hi[i]);
    }
    unsafe {
        tv_network_free(net);
        tv_network_free(loaded);
        tv_network_free(ptr::null_mut());
    }
}

#[test]
fn error_codes() {
    let net = network(16);
    let x = image(16);
    let mut y = [0.0f32; 2];
    let st = unsafe { tv_network_forward(net, x.as_ptr(), 10, y.as_mut_ptr(), 2) };
    assert_eq!(st, TvStatus::Shape);
    assert!(last_error().contains("expects 256"));
    assert_eq!(
        unsafe { tv_network_forward(net, x.as_ptr(), x.len(), y.as_mut_ptr(), 1) },
        TvStatus::Shape
    );
    assert_eq!(
        unsafe { tv_network_forward(ptr::null(), x.as_ptr(), x.len(), y.as_mut_ptr(), 2) },
        TvStatus::NullPointer
    );
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { tv_network_new(0, 10, &mut h) },
        TvStatus::InvalidArgument
    );

    let missing = CString::new("/nonexistent/x.nnw").unwrap();
    assert_eq!(
        unsafe { tv_network_load(missing.as_ptr(), &mut h) },
        TvStatus::Io
    );
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.nnw");
    std::fs::write(&junk, b"NOPE").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { tv_network_load(junk.as_ptr(), &mut h) },
        TvStatus::Format
    );
    assert!(h.is_null());

    let bad = CString::new("forall x in").unwrap();
    let mut prop = ptr::null_mut();
    assert_eq!(
        unsafe { tv_property_parse(bad.as_ptr(), &mut prop) },
        TvStatus::Parse
    );
    assert!(last_error().starts_with("1:"), "{}", last_error());
    unsafe { tv_network_free(net) };
}

#[test]
fn robustness_verdicts() {
    let net = network(16);
    let x = image(16);
    let mut v = TvVerdict::Unknown;
    let st = unsafe {
        tv_check_robustness(
            net,
            x.as_ptr(),
            x.len(),
            0.0,
            0.01,
            0,
            0,
            &mut v,
            ptr::null_mut(),
        )
    };
    assert_eq!((st, v), (TvStatus::Ok, TvVerdict::Verified));
    let mut cex = vec![0.0f32; x.len()];
    let st = unsafe {
        tv_check_robustness(
            net,
            x.as_ptr(),
            x.len(),
            0.5,
            1e-7,
            0,
            0,
            &mut v,
            cex.as_mut_ptr(),
        )
    };
    assert_eq!((st, v), (TvStatus::Ok, TvVerdict::Falsified));
    assert!(cex
        .iter()
        .zip(&x)
        .all(|(c, x0)| (c - x0).abs() <= 0.5 + 1e-6));
    assert!(cex != x);
    unsafe { tv_network_free(net) };
}

#[test]
fn property_round_trip_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let img = trackverify::data::pnm::PnmImage::from_unit_tensor(
        &trackverify::tensor::Tensor::new(vec![16, 16], image(16)).unwrap(),
    );
    trackverify::data::pnm::write(&dir.path().join("a.pgm"), &img).unwrap();
    let src = CString::new(
        "param epsilon = 0\ninput x0 = \"a.pgm\"\nnetwork N\nforall x in ball(x0, epsilon) . abs(N(x)[0] - N(x0)[0]) <= 0.1",
    )
    .unwrap();
    let mut prop = ptr::null_mut();
    assert_eq!(
        unsafe { tv_property_parse(src.as_ptr(), &mut prop) },
        TvStatus::Ok
    );
    let mut eps = -1.0;
    assert_eq!(unsafe { tv_property_epsilon(prop, &mut eps) }, TvStatus::Ok);
    assert_eq!(eps, 0.0);

    let mut text = ptr::null_mut();
    assert_eq!(unsafe { tv_property_format(prop, &mut text) }, TvStatus::Ok);
    let mut again = ptr::null_mut();
    assert_eq!(unsafe { tv_property_parse(text, &mut again) }, TvStatus::Ok);

    let net = network(16);
    let base = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut v = TvVerdict::Unknown;
    let st =
        unsafe { tv_property_verify(again, net, base.as_ptr(), 0, 0, &mut v, ptr::null_mut()) };
    assert_eq!((st, v), (TvStatus::Ok, TvVerdict::Verified));
    let st = unsafe { tv_property_verify(again, net, ptr::null(), 0, 0, &mut v, ptr::null_mut()) };
    assert_eq!(st, TvStatus::Format);
    unsafe {
        tv_string_free(text);
        tv_property_free(prop);
        tv_property_free(again);
        tv_network_free(net);
    }
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/trackverify.h")
}

#[test]
fn header_declares_the_interface() {
    let h = std::fs::read_to_string(header()).unwrap();
    for name in [
        "typedef struct TvNetwork TvNetwork;",
        "TV_STATUS_NULL_POINTER = 1",
        "TV_VERDICT_FALSIFIED = 1",
        "tv_network_load(",
        "tv_check_robustness(",
        "tv_property_verify(",
        "tv_last_error(void)",
    ] {
        assert!(h.contains(name), "{name}");
    }
}

/// Compiles and runs a C program against the header and static library.
#[test]
fn c_program_links_against_the_static_library() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libtrackverify_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("main.c");
    std::fs::write(
        &c,
        r#"#include <stdio.h>
#include "trackverify.h"
int main(void) {
    TvNetwork *net = NULL;
    if (tv_network_new(1, 8, &net) != TV_STATUS_OK) return 10;
    float x[64], y[2];
    for (int i = 0; i < 64; i++) x[i] = (float)i / 64.0f;
    if (tv_network_forward(net, x, 64, y, 2) != TV_STATUS_OK) return 11;
    TvVerdict v;
    if (tv_check_robustness(net, x, 64, 0.0, 0.01, 0, 0, &v, NULL) != TV_STATUS_OK) return 12;
    if (v != TV_VERDICT_VERIFIED) return 13;
    if (tv_network_forward(net, x, 3, y, 2) != TV_STATUS_SHAPE) return 14;
    printf("%s\n", tv_last_error());
    tv_network_free(net);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let st = Command::new("cc")
        .arg(&c)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(st.success());
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("expects 64"));
}
