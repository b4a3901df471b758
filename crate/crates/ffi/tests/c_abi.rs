use std::f64::consts::TAU;
use std::ptr;

use perimit_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { perimit_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn circle(n: usize, dt: f64, period: f64) -> Vec<f64> {
    (0..n)
        .flat_map(|i| {
            let a = TAU * i as f64 * dt / period;
            [0.25 + 0.1 * a.cos(), 0.2 + 0.1 * a.sin(), 0.01]
        })
        .collect()
}

#[test]
fn rdmp_fit_and_rollout() {
    let xyz = circle(200, 0.01, 1.0);
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { perimit_rdmp_fit(xyz.as_ptr(), 200, 0.01, 25, 1.0, &mut h) },
        PerimitStatus::Ok
    );
    let mut period = 0.0;
    assert_eq!(unsafe { perimit_rdmp_period(h, &mut period) }, PerimitStatus::Ok);
    assert_eq!(period, 1.0);

    let mut len = 0usize;
    let status = unsafe { perimit_rdmp_rollout(h, 3, 0.005, ptr::null_mut(), 0, &mut len) };
    assert_eq!(status, PerimitStatus::BufferTooSmall);
    assert!(len > 0);
    assert!(last_error().contains("buffer"));

    let mut buf = vec![0.0; 3 * len];
    let mut written = 0usize;
    assert_eq!(
        unsafe { perimit_rdmp_rollout(h, 3, 0.005, buf.as_mut_ptr(), len, &mut written) },
        PerimitStatus::Ok
    );
    assert_eq!(written, len);
    // last period stays on the demonstrated circle
    for p in buf.chunks_exact(3).skip(2 * len / 3) {
        let r = ((p[0] - 0.25).powi(2) + (p[1] - 0.2).powi(2)).sqrt();
        assert!((r - 0.1).abs() < 0.01, "radius {r}");
    }
    unsafe { perimit_rdmp_free(h) };
}

#[test]
fn rdmp_from_waypoints_and_bad_input() {
    let wp = [0.1, 0.1, 0.0, 0.2, 0.1, 0.0, 0.15, 0.2, 0.0];
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { perimit_rdmp_from_waypoints(wp.as_ptr(), 3, 2.0, 25, &mut h) },
        PerimitStatus::Ok
    );
    unsafe { perimit_rdmp_free(h) };

    let mut h2 = ptr::null_mut();
    let status = unsafe { perimit_rdmp_from_waypoints(wp.as_ptr(), 2, 2.0, 25, &mut h2) };
    assert_eq!(status, PerimitStatus::InvalidArgument);
    assert!(h2.is_null());
    assert!(last_error().contains("waypoints"));

    assert_eq!(
        unsafe { perimit_rdmp_from_waypoints(ptr::null(), 3, 2.0, 25, &mut h2) },
        PerimitStatus::NullPointer
    );
    assert_eq!(
        unsafe { perimit_rdmp_from_waypoints(wp.as_ptr(), 3, 2.0, 25, ptr::null_mut()) },
        PerimitStatus::NullPointer
    );
    unsafe { perimit_rdmp_free(ptr::null_mut()) };
}

#[test]
fn gp_posterior_and_ucb() {
    let x = [0.0, 0.0, 1.0, 0.5, -0.5, 1.0, 0.3, 0.9];
    let y = [0.1, -0.2, 0.4, 0.0];
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { perimit_gp_fit(x.as_ptr(), 4, 2, y.as_ptr(), 1, &mut h) },
        PerimitStatus::Ok
    );
    let w = [0.2, 0.2];
    let (mut m, mut s, mut u) = (0.0, 0.0, 0.0);
    assert_eq!(
        unsafe { perimit_gp_posterior(h, w.as_ptr(), 2, &mut m, &mut s) },
        PerimitStatus::Ok
    );
    assert_eq!(
        unsafe { perimit_gp_ucb(h, w.as_ptr(), 2, 0.1, &mut u) },
        PerimitStatus::Ok
    );
    assert_eq!(u, m + 0.1 * s);
    assert!(s >= 0.0);
    assert_eq!(
        unsafe { perimit_gp_posterior(h, w.as_ptr(), 3, &mut m, &mut s) },
        PerimitStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { perimit_gp_ucb(h, w.as_ptr(), 2, -1.0, &mut u) },
        PerimitStatus::InvalidArgument
    );
    unsafe { perimit_gp_free(h) };
}

#[test]
fn keypoint_distance_of_offset_video() {
    let a: Vec<f64> = (0..40).flat_map(|i| [0.01 * i as f64, 0.5]).collect();
    let b: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(i, v)| if i % 2 == 0 { v + 0.1 } else { *v })
        .collect();
    let mut d = -1.0;
    assert_eq!(
        unsafe { perimit_keypoint_distance(a.as_ptr(), 20, b.as_ptr(), 20, 2, 10, &mut d) },
        PerimitStatus::Ok
    );
    assert!((d - 0.1).abs() < 1e-12);
    assert_eq!(
        unsafe { perimit_keypoint_distance(a.as_ptr(), 20, a.as_ptr(), 20, 2, 10, &mut d) },
        PerimitStatus::Ok
    );
    assert_eq!(d, 0.0);
    assert_eq!(
        unsafe { perimit_keypoint_distance(a.as_ptr(), 20, b.as_ptr(), 20, 0, 10, &mut d) },
        PerimitStatus::InvalidArgument
    );
}

#[test]
fn periods_of_a_sinusoid() {
    let kp: Vec<f64> = (0..400)
        .flat_map(|i| {
            let a = TAU * i as f64 / 100.0;
            [0.5 + 0.2 * a.sin(), 0.5, 0.3, 0.5 + 0.1 * a.cos()]
        })
        .collect();
    let (mut n, mut p, mut c) = (0usize, 0.0, 0.0);
    assert_eq!(
        unsafe { perimit_estimate_periods(kp.as_ptr(), 400, 2, &mut n, &mut p, &mut c) },
        PerimitStatus::Ok
    );
    assert_eq!(n, 4);
    assert!((p - 100.0).abs() <= 1.0);

    let flat = vec![0.5; 400 * 4];
    assert_eq!(
        unsafe { perimit_estimate_periods(flat.as_ptr(), 400, 2, &mut n, &mut p, &mut c) },
        PerimitStatus::NoPeriodicity
    );
}

#[test]
fn performance_bounds() {
    let e = circle(50, 0.1, 5.0);
    let mut s = 0.0;
    assert_eq!(
        unsafe { perimit_performance(e.as_ptr(), 50, e.as_ptr(), 50, 0.98, &mut s) },
        PerimitStatus::Ok
    );
    assert_eq!(s, 1.0);
    let far = vec![10.0; 150];
    assert_eq!(
        unsafe { perimit_performance(e.as_ptr(), 50, far.as_ptr(), 50, 0.98, &mut s) },
        PerimitStatus::Ok
    );
    assert_eq!(s, 0.0);
    assert_eq!(
        unsafe { perimit_performance(e.as_ptr(), 50, e.as_ptr(), 50, 0.0, &mut s) },
        PerimitStatus::InvalidArgument
    );
}

#[test]
fn success_clears_the_last_error() {
    let mut s = 0.0;
    let e = [0.0, 0.0, 0.0];
    unsafe { perimit_performance(e.as_ptr(), 1, e.as_ptr(), 1, 0.0, &mut s) };
    assert!(!last_error().is_empty());
    unsafe { perimit_performance(e.as_ptr(), 1, e.as_ptr(), 1, 1.0, &mut s) };
    assert_eq!(unsafe { perimit_last_error_message(ptr::null_mut(), 0) }, 0);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/perimit.h")).unwrap();
    for name in [
        "perimit_rdmp_fit",
        "perimit_rdmp_from_waypoints",
        "perimit_rdmp_rollout",
        "perimit_rdmp_free",
        "perimit_gp_fit",
        "perimit_gp_posterior",
        "perimit_gp_ucb",
        "perimit_gp_free",
        "perimit_keypoint_distance",
        "perimit_estimate_periods",
        "perimit_performance",
        "perimit_last_error_message",
        "PERIMIT_STATUS_OK",
        "typedef struct PerimitRdmp PerimitRdmp",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

/// Compiles and runs a C program against the generated header and the
/// static library built alongside this test.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libperimit_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::tempdir().unwrap();
    let bin = tmp.path().join("smoke");
    let status = std::process::Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).contains("points; error text: need at least 3 waypoints"));
}
