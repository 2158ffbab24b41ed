//! Drives the C entry points the way a foreign caller would: raw pointers,
//! status codes, explicit frees, and the thread-local error channel.

use std::ffi::{c_char, CStr};
use std::ptr;

use kinreg_ffi::*;

fn last_error() -> String {
    unsafe {
        let needed = kinreg_last_error(ptr::null_mut(), 0);
        assert!(needed > 0, "no error recorded on this thread");
        let mut buf = vec![0 as c_char; needed];
        let written = kinreg_last_error(buf.as_mut_ptr(), buf.len());
        assert_eq!(written, needed);
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn version_matches_the_crate() {
    let raw = kinreg_version();
    let text = unsafe { CStr::from_ptr(raw) }.to_str().unwrap();
    assert_eq!(text, env!("CARGO_PKG_VERSION"));
}

#[test]
fn exponents_match_the_closed_forms() {
    let mut q = 0.0;
    let mut s = 0.0;
    let mut eff = 0.0;
    let status = unsafe { kinreg_exponents(0.5, 2, true, &mut q, &mut s, &mut eff) };
    assert_eq!(status, KinregStatus::Ok);
    assert!((q - 25.0 / 13.0).abs() < 1e-12, "q* = {q}");
    assert!((s - 1.0 / 150.0).abs() < 1e-12, "s* = {s}");
    assert!((eff - 1.0 / 75.0).abs() < 1e-12, "effective = {eff}");

    // Stochastic setting: no doubling.
    let status = unsafe { kinreg_exponents(0.5, 2, false, ptr::null_mut(), ptr::null_mut(), &mut eff) };
    assert_eq!(status, KinregStatus::Ok);
    assert!((eff - 1.0 / 150.0).abs() < 1e-12);

    // All-null outputs are allowed: the call validates and discards.
    let status =
        unsafe { kinreg_exponents(1.0, 1, true, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(status, KinregStatus::Ok);

    let status = unsafe { kinreg_exponents(0.0, 2, true, &mut q, &mut s, &mut eff) };
    assert_eq!(status, KinregStatus::InvalidArgument);
    let message = last_error();
    assert!(message.contains("positive"), "{message}");
}

#[test]
fn burgers_symbol_and_degenerate_measure() {
    unsafe {
        let mut model: *mut KinregModel = ptr::null_mut();
        assert_eq!(kinreg_model_burgers(&mut model), KinregStatus::Ok);
        assert!(!model.is_null());

        let mut d = 0usize;
        assert_eq!(kinreg_model_dimension(model, &mut d), KinregStatus::Ok);
        assert_eq!(d, 1);

        // Purely hyperbolic: symbol(ξ, λ) = |ξ0 + λ ξ1|².
        let xi = [0.0, 1.0];
        let mut value = 0.0;
        let status = kinreg_eval_symbol(model, xi.as_ptr(), xi.len(), 0.3, &mut value);
        assert_eq!(status, KinregStatus::Ok);
        assert!((value - 0.09).abs() < 1e-12, "symbol = {value}");

        // {λ : λ² ≤ 0.25} has length 1 inside the state interval.
        let mut measure = 0.0;
        let status =
            kinreg_degenerate_measure(model, xi.as_ptr(), xi.len(), 0.25, 4096, &mut measure);
        assert_eq!(status, KinregStatus::Ok);
        assert!((measure - 1.0).abs() < 2e-3, "measure = {measure}");

        let skew = [1.0, 1.0];
        let status = kinreg_eval_symbol(model, skew.as_ptr(), skew.len(), 0.3, &mut value);
        assert_eq!(status, KinregStatus::InvalidArgument);
        assert!(last_error().contains("unit"), "{}", last_error());

        kinreg_model_free(model);
    }
}

#[test]
fn power_law_fit_round_trips_through_handles() {
    unsafe {
        let mut model: *mut KinregModel = ptr::null_mut();
        assert_eq!(kinreg_model_power_law(1, 1, &mut model), KinregStatus::Ok);

        let mut fit: *mut KinregFit = ptr::null_mut();
        let status = kinreg_estimate_alpha(model, 128, 1e-4, 1e-1, 12, 2048, 0, false, &mut fit);
        assert_eq!(status, KinregStatus::Ok);

        let mut alpha = 0.0;
        let mut r2 = 0.0;
        let mut flag = KinregFitFlag::TooFewPoints;
        assert_eq!(kinreg_fit_alpha(fit, &mut alpha), KinregStatus::Ok);
        assert_eq!(kinreg_fit_r_squared(fit, &mut r2), KinregStatus::Ok);
        assert_eq!(kinreg_fit_flag(fit, &mut flag), KinregStatus::Ok);
        assert!((0.4..=0.6).contains(&alpha), "alpha = {alpha}");
        assert!(r2 >= 0.9, "r² = {r2}");
        assert_eq!(flag, KinregFitFlag::Ok);

        let mut count = 0usize;
        assert_eq!(kinreg_fit_point_count(fit, &mut count), KinregStatus::Ok);
        assert_eq!(count, 12);

        let mut deltas = vec![0.0; count];
        let mut measures = vec![0.0; count];
        assert_eq!(
            kinreg_fit_deltas(fit, deltas.as_mut_ptr(), deltas.len()),
            KinregStatus::Ok
        );
        assert_eq!(
            kinreg_fit_sup_measures(fit, measures.as_mut_ptr(), measures.len()),
            KinregStatus::Ok
        );
        assert!(deltas.windows(2).all(|w| w[0] < w[1]), "{deltas:?}");
        assert!(measures.windows(2).all(|w| w[0] <= w[1]), "{measures:?}");
        assert!(measures.iter().all(|&m| m > 0.0), "{measures:?}");

        let mut short = vec![0.0; 3];
        let status = kinreg_fit_sup_measures(fit, short.as_mut_ptr(), short.len());
        assert_eq!(status, KinregStatus::BufferTooSmall);
        assert!(last_error().contains("buffer holds 3"), "{}", last_error());

        kinreg_fit_free(fit);
        kinreg_model_free(model);
    }
}

#[test]
fn heat_model_is_flagged_degenerate() {
    unsafe {
        let mut model: *mut KinregModel = ptr::null_mut();
        assert_eq!(kinreg_model_heat(1.0, 2, &mut model), KinregStatus::Ok);

        let mut fit: *mut KinregFit = ptr::null_mut();
        let status = kinreg_estimate_alpha(model, 64, 1e-4, 1e-2, 8, 512, 1, false, &mut fit);
        assert_eq!(status, KinregStatus::Ok);

        let mut flag = KinregFitFlag::Ok;
        let mut alpha = 0.0;
        assert_eq!(kinreg_fit_flag(fit, &mut flag), KinregStatus::Ok);
        assert_eq!(kinreg_fit_alpha(fit, &mut alpha), KinregStatus::Ok);
        assert_eq!(flag, KinregFitFlag::Degenerate);
        assert!(alpha.is_nan(), "alpha = {alpha}");

        kinreg_fit_free(fit);
        kinreg_model_free(model);
    }
}

#[test]
fn besov_slope_matches_the_brownian_calibration() {
    let n = 1 << 14;
    let path = kinreg::regularity::calibration::fbm_path(n, 0.5, 77).unwrap();
    let mut s = 0.0;
    let mut r2 = 0.0;
    let status = unsafe { kinreg_besov_slope(path.as_ptr(), path.len(), 2.0, &mut s, &mut r2) };
    assert_eq!(status, KinregStatus::Ok);
    assert!((0.35..=0.65).contains(&s), "H = 0.5 slope = {s}");
    assert!(r2 >= 0.9, "r² = {r2}");

    // A single sinusoid concentrates in ≤ 3 blocks; the estimator refuses
    // with NaN rather than inventing a slope.
    let sine: Vec<f64> = (0..1024)
        .map(|i| (std::f64::consts::TAU * 5.0 * i as f64 / 1024.0).sin())
        .collect();
    let status = unsafe { kinreg_besov_slope(sine.as_ptr(), sine.len(), 2.0, &mut s, &mut r2) };
    assert_eq!(status, KinregStatus::Ok);
    assert!(s.is_nan(), "sinusoid slope = {s}");
}

#[test]
fn null_and_error_paths_are_reported() {
    unsafe {
        // Frees tolerate null.
        kinreg_model_free(ptr::null_mut());
        kinreg_fit_free(ptr::null_mut());

        assert_eq!(
            kinreg_model_power_law(1, 1, ptr::null_mut()),
            KinregStatus::InvalidArgument
        );
        assert!(last_error().contains("null"), "{}", last_error());

        let mut alpha = 0.0;
        assert_eq!(
            kinreg_fit_alpha(ptr::null(), &mut alpha),
            KinregStatus::InvalidArgument
        );

        // Interval bounds must be ordered.
        let mut model: *mut KinregModel = ptr::null_mut();
        assert_eq!(kinreg_model_burgers(&mut model), KinregStatus::Ok);
        assert_eq!(
            kinreg_model_set_interval(model, 2.0, -2.0),
            KinregStatus::InvalidArgument
        );
        kinreg_model_free(model);

        // A missing table file is an I/O failure, not a validation one.
        let mut out: *mut KinregModel = ptr::null_mut();
        let path = b"/nonexistent/coefficients.csv\0";
        let status = kinreg_model_from_csv(path.as_ptr().cast(), &mut out);
        assert_eq!(status, KinregStatus::RuntimeFailure);
        assert!(out.is_null(), "out must stay untouched on failure");
    }
}

#[test]
fn widening_the_interval_widens_the_degenerate_set() {
    unsafe {
        let mut model: *mut KinregModel = ptr::null_mut();
        assert_eq!(kinreg_model_burgers(&mut model), KinregStatus::Ok);
        assert_eq!(
            kinreg_model_set_interval(model, -2.0, 2.0),
            KinregStatus::Ok
        );

        // Same δ as the unit-interval case, but now the full {|λ| ≤ 0.5}
        // set fits strictly inside: still measure 1, on a wider grid.
        let xi = [0.0, 1.0];
        let mut measure = 0.0;
        let status =
            kinreg_degenerate_measure(model, xi.as_ptr(), xi.len(), 0.25, 8192, &mut measure);
        assert_eq!(status, KinregStatus::Ok);
        assert!((measure - 1.0).abs() < 2e-3, "measure = {measure}");

        kinreg_model_free(model);
    }
}
