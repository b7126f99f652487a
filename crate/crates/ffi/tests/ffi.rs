use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use qgevrey_ffi::*;

fn c(re: f64, im: f64) -> QgComplex {
    QgComplex { re, im }
}

fn last_error() -> String {
    let p = qg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn theta_handle_round_trip() {
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(qg_theta_new(2.0, 1.0, &mut h), QgStatus::Ok);
        let mut v = c(0.0, 0.0);
        assert_eq!(qg_theta_eval(h, c(1.0, 0.0), &mut v), QgStatus::Ok);
        // theta(1) = sum_n 2^{-n(n-1)/2}, symmetric under n -> 1-n
        let direct: f64 = (-30i32..=30).map(|n| 2f64.powf(-(n * (n - 1)) as f64 / 2.0)).sum();
        assert!((v.re - direct).abs() <= 1e-14 * direct && v.im.abs() < 1e-14);

        let mut r = 1.0;
        assert_eq!(qg_theta_qdiff_residual(h, c(0.7, 0.4), 2, &mut r), QgStatus::Ok);
        assert!(r < 1e-12);

        assert_eq!(qg_theta_eval(h, c(0.0, 0.0), &mut v), QgStatus::OutsideDomain);
        assert!(last_error().contains("singularity"));
        assert_eq!(qg_theta_eval(h, c(1.0, 0.0), ptr::null_mut()), QgStatus::NullPointer);
        qg_theta_free(h);
        qg_theta_free(ptr::null_mut());
    }
}

#[test]
fn bad_theta_parameters_are_rejected() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { qg_theta_new(0.5, 1.0, &mut h) }, QgStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn scenario_handles() {
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(qg_scenario_default(&mut h), QgStatus::Ok);
        let mut n = 0;
        assert_eq!(qg_scenario_len(h, &mut n), QgStatus::Ok);
        assert_eq!(n, 4);
        let kinds: Vec<i32> = (0..n)
            .map(|p| {
                let mut k = -1;
                assert_eq!(qg_scenario_overlap_intersecting(h, p, &mut k), QgStatus::Ok);
                k
            })
            .collect();
        assert_eq!(kinds, [1, 0, 1, 0]);

        let (mut u, mut err) = (c(0.0, 0.0), -1.0);
        assert_eq!(qg_scenario_solution(h, 0, c(0.2, 0.0), c(0.1, 0.0), c(0.2, 0.05), &mut u, &mut err), QgStatus::Ok);
        assert!(u.re.is_finite() && (0.0..1e-8).contains(&err));
        assert_eq!(qg_scenario_solution(h, 7, c(0.2, 0.0), c(0.1, 0.0), c(0.2, 0.05), &mut u, ptr::null_mut()), QgStatus::InvalidArgument);
        qg_scenario_free(h);

        let json = CString::new(serde_json::to_string(&qgevrey::model::Scenario::default_scenario().unwrap()).unwrap()).unwrap();
        let mut h2 = ptr::null_mut();
        assert_eq!(qg_scenario_from_json(json.as_ptr(), &mut h2), QgStatus::Ok);
        qg_scenario_free(h2);
        let bad = CString::new("{\"nu\": 1}").unwrap();
        assert_eq!(qg_scenario_from_json(bad.as_ptr(), &mut h2), QgStatus::Parse);
    }
}

#[test]
fn transforms() {
    let mut v = c(0.0, 0.0);
    unsafe {
        assert_eq!(qg_qlaplace_monomial_constant(2.0, 1.0, 0.0, 3, &mut v), QgStatus::Ok);
        assert!((v.re - 8.0).abs() < 1e-10, "{v:?}");
        let name = CString::new("gaussian").unwrap();
        assert_eq!(qg_inverse_fourier(name.as_ptr(), 0.5, c(0.3, 0.1), &mut v), QgStatus::Ok);
        let bogus = CString::new("nope").unwrap();
        assert_eq!(qg_inverse_fourier(bogus.as_ptr(), 0.5, c(0.3, 0.1), &mut v), QgStatus::InvalidArgument);
    }
}

/// Compiles a C program against the generated header and the static library.
#[test]
fn c_program_links_against_the_header() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libqgevrey_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let out = std::env::temp_dir().join(format!("qgevrey_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .arg(root.join("tests/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&out)
        .status()
        .expect("a C compiler is on PATH");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
