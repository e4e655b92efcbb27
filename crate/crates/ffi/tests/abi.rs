use std::ffi::{c_char, CStr, CString};
use std::ptr;

use robust_linreg_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe { rl_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn toy() -> *mut RlDataset {
    let x = [1.0, 2.0, 2.0, 0.5, -1.0, 1.0, 0.3, 0.7, 1.1, -0.4];
    let y = [3.1, 1.7, 0.2, 2.0, 0.35];
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { rl_dataset_new(x.as_ptr(), 5, 2, y.as_ptr(), &mut ds) }, RlStatus::Ok);
    ds
}

#[test]
fn solve_matches_the_library() {
    let ds = toy();
    let mut pen = ptr::null_mut();
    assert_eq!(unsafe { rl_penalty_l1(&mut pen) }, RlStatus::Ok);
    let mut beta = [0.0; 2];
    let mut info = RlSolveInfo::default();
    let s = unsafe { rl_solve(ds, pen, 2.0, 1.0, 0.1, 0, 0.0, beta.as_mut_ptr(), 2, &mut info) };
    assert_eq!(s, RlStatus::Ok);
    assert!(info.converged);

    let data = robust_linreg::Dataset::from_flat(2, vec![1.0, 2.0, 2.0, 0.5, -1.0, 1.0, 0.3, 0.7, 1.1, -0.4], vec![3.1, 1.7, 0.2, 2.0, 0.35]).unwrap();
    let prob = robust_linreg::RobustProblem::new(2.0, 1.0, 0.1, robust_linreg::PenaltySpec::L1).unwrap();
    let rep = robust_linreg::solver::solve_penalized(&data, &prob, &Default::default()).unwrap();
    assert_eq!(beta.to_vec(), rep.beta_hat);
    assert_eq!(info.objective_value, rep.objective_value);
    unsafe {
        rl_penalty_free(pen);
        rl_dataset_free(ds);
    }
}

#[test]
fn worst_case_round_trip_through_handles() {
    let ds = toy();
    let lambda = [2.0, 1.0];
    let mut pen = ptr::null_mut();
    assert_eq!(unsafe { rl_penalty_slope(lambda.as_ptr(), 2, &mut pen) }, RlStatus::Ok);
    let beta = [0.5, 0.2];
    let mut wc = ptr::null_mut();
    assert_eq!(unsafe { rl_worst_case(ds, pen, 2.0, 1.0, 0.3, beta.as_ptr(), 2, &mut wc) }, RlStatus::Ok);
    let (mut n, mut d) = (0, 0);
    assert_eq!(unsafe { rl_dataset_shape(wc, &mut n, &mut d) }, RlStatus::Ok);
    assert_eq!((n, d), (5, 2));
    let mut y = vec![0.0; n];
    assert_eq!(unsafe { rl_dataset_copy(wc, ptr::null_mut(), 0, y.as_mut_ptr(), n) }, RlStatus::Ok);
    assert!(y.iter().all(|v| v.is_finite()));
    let mut bad = vec![0.0; 3];
    assert_eq!(unsafe { rl_dataset_copy(wc, bad.as_mut_ptr(), 3, ptr::null_mut(), 0) }, RlStatus::Dimension);
    let mut value = 0.0;
    assert_eq!(unsafe { rl_penalty_eval(pen, beta.as_ptr(), 2, &mut value) }, RlStatus::Ok);
    assert_eq!(value, 2.0 * 0.5 + 0.2);
    unsafe {
        rl_dataset_free(wc);
        rl_penalty_free(pen);
        rl_dataset_free(ds);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut pen = ptr::null_mut();
    assert_eq!(unsafe { rl_penalty_lp(0.5, &mut pen) }, RlStatus::InvalidArgument);
    assert!(pen.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { rl_penalty_l1(ptr::null_mut()) }, RlStatus::NullPointer);

    let path = CString::new("/definitely/missing.csv").unwrap();
    let y = CString::new("y").unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { rl_dataset_load_csv(path.as_ptr(), y.as_ptr(), &mut ds) }, RlStatus::Io);
    assert!(last_error().contains("/definitely/missing.csv"));

    let ds = toy();
    let lambda = [1.0, 1.0];
    let mut slope = ptr::null_mut();
    unsafe { rl_penalty_slope(lambda.as_ptr(), 2, &mut slope) };
    let mut beta = [0.0; 3];
    assert_eq!(unsafe { rl_solve(ds, slope, 2.0, 1.0, 0.1, 0, 0.0, beta.as_mut_ptr(), 3, ptr::null_mut()) }, RlStatus::Dimension);

    // Exact interpolation leaves no residual to perturb along.
    let x = [1.0, 2.0];
    let yv = [1.0, 2.0];
    let mut one = ptr::null_mut();
    unsafe { rl_dataset_new(x.as_ptr(), 2, 1, yv.as_ptr(), &mut one) };
    let mut l1 = ptr::null_mut();
    unsafe { rl_penalty_l1(&mut l1) };
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { rl_worst_case(one, l1, 2.0, 1.0, 0.1, [1.0].as_ptr(), 1, &mut out) }, RlStatus::Degenerate);
    assert!(out.is_null());
    unsafe {
        rl_dataset_free(one);
        rl_penalty_free(l1);
        rl_penalty_free(slope);
        rl_dataset_free(ds);
    }
}

#[test]
fn iteration_cap_reports_not_converged() {
    let ds = toy();
    let mut pen = ptr::null_mut();
    unsafe { rl_penalty_lp(1.5, &mut pen) };
    let mut beta = [0.0; 2];
    let mut info = RlSolveInfo::default();
    let s = unsafe { rl_solve(ds, pen, 1.5, 1.0, 0.2, 1, 1e-15, beta.as_mut_ptr(), 2, &mut info) };
    assert_eq!(s, RlStatus::NotConverged);
    assert!(!info.converged && beta.iter().all(|b| b.is_finite()));
    unsafe {
        rl_penalty_free(pen);
        rl_dataset_free(ds);
    }
}

#[test]
fn scalar_helpers() {
    let mut q = 0.0;
    assert_eq!(unsafe { rl_kolmogorov_quantile(0.95, &mut q) }, RlStatus::Ok);
    assert!((q - 1.358).abs() < 1e-3);
    let mut delta = 0.0;
    assert_eq!(unsafe { rl_delta_asymptotic(2500, 2.0, 0.05, 33.82, 1.0, &mut delta) }, RlStatus::Ok);
    assert!((delta - 5.575).abs() < 5e-3);
    assert_eq!(unsafe { rl_kolmogorov_quantile(1.5, &mut q) }, RlStatus::InvalidArgument);
    let v = unsafe { CStr::from_ptr(rl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn msw_fills_the_direction() {
    let p = toy();
    let x = [0.0, 1.0, 1.0, 1.0, 2.0, 0.0];
    let y = [1.0, -1.0, 0.5];
    let mut q = ptr::null_mut();
    unsafe { rl_dataset_new(x.as_ptr(), 3, 2, y.as_ptr(), &mut q) };
    let mut value = 0.0;
    let mut dir = [0.0; 3];
    assert_eq!(unsafe { rl_msw(p, q, 1.0, RlNorm::L2, 7, &mut value, dir.as_mut_ptr(), 3) }, RlStatus::Ok);
    assert!(value > 0.0);
    let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-9);
    unsafe {
        rl_dataset_free(q);
        rl_dataset_free(p);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/robust_linreg.h")).unwrap();
    for f in [
        "rl_last_error_message",
        "rl_dataset_new",
        "rl_dataset_load_csv",
        "rl_dataset_free",
        "rl_dataset_shape",
        "rl_dataset_copy",
        "rl_penalty_l1",
        "rl_penalty_lp",
        "rl_penalty_slope",
        "rl_penalty_free",
        "rl_penalty_eval",
        "rl_solve",
        "rl_worst_case",
        "rl_msw",
        "rl_delta_asymptotic",
        "rl_kolmogorov_quantile",
        "rl_version",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(h.contains("typedef struct RlDataset RlDataset;"));
    assert!(h.contains("RL_STATUS_NOT_CONVERGED = 8"));
}
