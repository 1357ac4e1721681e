use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use fmcw::*;

fn default_config() -> *mut FmcwConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { fmcw_config_default(&mut cfg) }, FmcwStatus::Ok);
    assert!(!cfg.is_null());
    cfg
}

fn last_error() -> String {
    let p = fmcw_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn synthesize_and_estimate_single_target() {
    let cfg = default_config();
    let target = FmcwTarget {
        a: 1.0,
        phi: 0.3,
        r: 5.0,
        theta: 15f64.to_radians(),
    };
    let mut z = ptr::null_mut();
    unsafe {
        assert_eq!(fmcw_measurement_synthesize(cfg, &target, 1, 0.0, 7, &mut z), FmcwStatus::Ok);
        let (mut rows, mut cols) = (0, 0);
        assert_eq!(fmcw_measurement_dims(z, &mut rows, &mut cols), FmcwStatus::Ok);
        assert_eq!((rows, cols), (256, 16));

        let mut out = [FmcwEstimate { a: 0.0, psi: 0.0, r: 0.0, theta: 0.0 }; 2];
        let mut written = 0;
        let st = fmcw_estimate(z, FmcwAlgorithm::Mle, 1, 64, out.as_mut_ptr(), out.len(), &mut written);
        assert_eq!(st, FmcwStatus::Ok);
        assert_eq!(written, 1);
        assert!((out[0].r - 5.0).abs() < 1e-6);
        assert!((out[0].theta - target.theta).abs() < 1e-6);
        assert!((out[0].a - 1.0).abs() < 1e-6);

        // The grid estimator shows the coupling bias the closed form predicts.
        let st = fmcw_estimate(z, FmcwAlgorithm::Fft2d, 1, 256, out.as_mut_ptr(), out.len(), &mut written);
        assert_eq!(st, FmcwStatus::Ok);
        let (mut rb, mut tb) = (0.0, 0.0);
        assert_eq!(fmcw_bias(cfg, target.theta, &mut rb, &mut tb), FmcwStatus::Ok);
        assert!((out[0].r - 5.0 - rb).abs() < 0.0375 / 256.0);
        assert!((out[0].theta - target.theta - tb).abs() < 2e-4);

        fmcw_measurement_free(z);
        fmcw_config_free(cfg);
    }
}

#[test]
fn samples_round_trip_through_the_boundary() {
    let cfg = default_config();
    let target = FmcwTarget { a: 2.0, phi: 1.0, r: 3.0, theta: -0.2 };
    unsafe {
        let mut z = ptr::null_mut();
        assert_eq!(fmcw_measurement_synthesize(cfg, &target, 1, 0.1, 3, &mut z), FmcwStatus::Ok);
        let mut buf = Vec::new();
        for n in 0..256 {
            for m in 0..16 {
                let (mut re, mut im) = (0.0, 0.0);
                assert_eq!(fmcw_measurement_get(z, n, m, &mut re, &mut im), FmcwStatus::Ok);
                buf.extend([re, im]);
            }
        }
        let mut w = ptr::null_mut();
        assert_eq!(fmcw_measurement_from_samples(cfg, buf.as_ptr(), buf.len(), 0.1, &mut w), FmcwStatus::Ok);
        let (mut a, mut b) = ((0.0, 0.0), (0.0, 0.0));
        fmcw_measurement_get(z, 100, 9, &mut a.0, &mut a.1);
        fmcw_measurement_get(w, 100, 9, &mut b.0, &mut b.1);
        assert_eq!(a, b);

        assert_eq!(fmcw_measurement_get(z, 256, 0, &mut a.0, &mut a.1), FmcwStatus::InvalidArgument);
        assert_eq!(
            fmcw_measurement_from_samples(cfg, buf.as_ptr(), buf.len() - 2, 0.1, &mut w),
            FmcwStatus::InvalidArgument
        );
        assert!(last_error().contains("samples"));
        fmcw_measurement_free(z);
        fmcw_measurement_free(w);
        fmcw_config_free(cfg);
    }
}

#[test]
fn crb_scales_with_noise() {
    let cfg = default_config();
    let t = FmcwTarget { a: 1.0, phi: 0.0, r: 5.0, theta: 0.26 };
    let (mut r10, mut t10, mut r30, mut t30) = (0.0, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(fmcw_crb(cfg, &t, 10.0, &mut r10, &mut t10), FmcwStatus::Ok);
        assert_eq!(fmcw_crb(cfg, &t, 30.0, &mut r30, &mut t30), FmcwStatus::Ok);
        fmcw_config_free(cfg);
        // Single transmitter: unit power per sample.
        let mut one = ptr::null_mut();
        assert_eq!(fmcw_config_new(77e9, 4e9, 1e-4, 64, 1, 4, &mut one), FmcwStatus::Ok);
        let mut sigma = 0.0;
        assert_eq!(fmcw_sigma_for_snr(one, 1.0, 20.0, &mut sigma), FmcwStatus::Ok);
        assert!((sigma - 0.1).abs() < 1e-12);
        fmcw_config_free(one);
    }
    assert!((r10 / r30 - 10.0).abs() < 1e-9);
    assert!((t10 / t30 - 10.0).abs() < 1e-9);
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(fmcw_config_new(77e9, 4e9, 1e-4, 0, 4, 4, &mut cfg), FmcwStatus::InvalidConfig);
        assert!(cfg.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(fmcw_config_default(ptr::null_mut()), FmcwStatus::NullPointer);

        let cfg = default_config();
        let mut written = 0;
        assert_eq!(
            fmcw_estimate(ptr::null(), FmcwAlgorithm::Fft2d, 1, 8, ptr::null_mut(), 0, &mut written),
            FmcwStatus::NullPointer
        );
        // Coincident targets leave a single peak to refine.
        let ts = [
            FmcwTarget { a: 1.0, phi: 0.0, r: 5.0, theta: 0.1 },
            FmcwTarget { a: 1.0, phi: 2.0, r: 5.0, theta: 0.1 },
        ];
        let mut z = ptr::null_mut();
        assert_eq!(fmcw_measurement_synthesize(cfg, ts.as_ptr(), 2, 0.0, 0, &mut z), FmcwStatus::Ok);
        let mut out = [FmcwEstimate { a: 0.0, psi: 0.0, r: 0.0, theta: 0.0 }; 1];
        assert_eq!(
            fmcw_estimate(z, FmcwAlgorithm::Fft2d, 2, 8, out.as_mut_ptr(), 1, &mut written),
            FmcwStatus::BufferTooSmall
        );
        assert_eq!(written, 2);
        let mut out = [FmcwEstimate { a: 0.0, psi: 0.0, r: 0.0, theta: 0.0 }; 2];
        assert_eq!(
            fmcw_estimate(z, FmcwAlgorithm::Mle, 2, 8, out.as_mut_ptr(), 2, &mut written),
            FmcwStatus::Numerical
        );
        assert!(last_error().contains("separated"));
        let (mut rb, mut tb) = (0.0, 0.0);
        assert_eq!(fmcw_bias(cfg, 2.0, &mut rb, &mut tb), FmcwStatus::InvalidArgument);
        fmcw_measurement_free(z);
        fmcw_config_free(cfg);
        fmcw_config_free(ptr::null_mut());
    }
}

/// The generated header must compile as C and match the exported symbols.
#[test]
fn header_compiles_as_c() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include/fmcw.h");
    assert!(header.exists(), "header not generated");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "fmcw_config_new",
        "fmcw_config_default",
        "fmcw_config_free",
        "fmcw_measurement_synthesize",
        "fmcw_measurement_from_samples",
        "fmcw_measurement_free",
        "fmcw_estimate",
        "fmcw_crb",
        "fmcw_bias",
        "fmcw_last_error",
    ] {
        assert!(text.contains(&format!("{sym}(")), "{sym} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"fmcw.h\"\nint main(void) { FmcwConfig *c = 0; FmcwStatus s = fmcw_config_default(&c); fmcw_config_free(c); return (int)s; }\n",
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(root.join("include"))
        .arg(&src)
        .output()
    {
        Ok(o) => assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr)),
        Err(e) => eprintln!("skipping C compile: {cc} unavailable ({e})"),
    }
}
