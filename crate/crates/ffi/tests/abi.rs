use std::ffi::{c_int, c_void, CStr, CString};
use std::ptr;

use archipelago_ffi::*;

fn last_error() -> String {
    let p = arch_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe extern "C" fn product_plus(user_data: *mut c_void, x: *const f64, p: usize, out: *mut f64) -> c_int {
    let calls = &mut *(user_data as *mut u32);
    *calls += 1;
    let x = std::slice::from_raw_parts(x, p);
    *out = x[0] * x[1] + x[2];
    0
}

unsafe extern "C" fn failing(_: *mut c_void, _: *const f64, _: usize, _: *mut f64) -> c_int {
    7
}

#[test]
fn callback_detect_and_explain() {
    let mut calls = 0u32;
    let target = [2.0, 3.0, 5.0];
    let baseline = [0.0; 3];
    let mut bb = ptr::null_mut();
    unsafe {
        let st = arch_blackbox_callback(
            Some(product_plus),
            &mut calls as *mut u32 as *mut c_void,
            target.as_ptr(),
            baseline.as_ptr(),
            3,
            ArchH::Unit,
            &mut bb,
        );
        assert_eq!(st, ArchStatus::Ok);

        let mut r = ptr::null_mut();
        assert_eq!(arch_detect(bb, ptr::null(), 0, 1, &mut r), ArchStatus::Ok);
        let mut len = 0;
        assert_eq!(arch_ranking_len(r, &mut len), ArchStatus::Ok);
        assert_eq!(len, 3);
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        assert_eq!(arch_ranking_get(r, 0, &mut i, &mut j, &mut s), ArchStatus::Ok);
        assert_eq!((i, j, s), (0, 1, 36.0));
        assert_eq!(arch_ranking_get(r, 3, &mut i, &mut j, &mut s), ArchStatus::OutOfRange);

        let mut e = ptr::null_mut();
        assert_eq!(arch_explain(bb, r, 1, ArchMethod::ArchAttribute, &mut e), ArchStatus::Ok);
        let mut n = 0;
        assert_eq!(arch_explanation_num_sets(e, &mut n), ArchStatus::Ok);
        assert_eq!(n, 2);
        let mut buf = [0usize; 1];
        let mut set_len = 0;
        assert_eq!(arch_explanation_set(e, 0, buf.as_mut_ptr(), 1, &mut set_len), ArchStatus::BufferTooSmall);
        assert_eq!(set_len, 2);
        let mut buf = [0usize; 4];
        assert_eq!(arch_explanation_set(e, 0, buf.as_mut_ptr(), 4, &mut set_len), ArchStatus::Ok);
        assert_eq!(&buf[..set_len], &[0, 1]);
        let mut phi = [0.0; 2];
        for (k, v) in phi.iter_mut().enumerate() {
            assert_eq!(arch_explanation_phi(e, k, v), ArchStatus::Ok);
        }
        assert_eq!(phi, [6.0, 5.0]);
        let (mut ft, mut fb, mut res) = (0.0, 0.0, 1.0);
        assert_eq!(arch_explanation_summary(e, &mut ft, &mut fb, &mut res), ArchStatus::Ok);
        assert_eq!((ft, fb, res), (11.0, 0.0, 0.0));

        let mut count = 0;
        assert_eq!(arch_blackbox_call_count(bb, &mut count), ArchStatus::Ok);
        assert_eq!(count, u64::from(calls));

        arch_explanation_free(e);
        arch_ranking_free(r);
        arch_blackbox_free(bb);
    }
}

#[test]
fn synthetic_ranking_matches_ground_truth_size() {
    let name = CString::new("F2").unwrap();
    let mut bb = ptr::null_mut();
    unsafe {
        assert_eq!(arch_blackbox_synthetic(name.as_ptr(), ArchH::Unit, &mut bb), ArchStatus::Ok);
        let mut p = 0;
        assert_eq!(arch_blackbox_p(bb, &mut p), ArchStatus::Ok);
        assert_eq!(p, 40);
        let mut r = ptr::null_mut();
        assert_eq!(arch_detect(bb, ptr::null(), 0, 0, &mut r), ArchStatus::Ok);
        let mut nonzero = 0;
        for k in 0..780 {
            let (mut i, mut j, mut s) = (0, 0, 0.0);
            assert_eq!(arch_ranking_get(r, k, &mut i, &mut j, &mut s), ArchStatus::Ok);
            if s > 0.0 {
                nonzero += 1;
            }
        }
        assert_eq!(nonzero, 335);
        let mut count = 0;
        arch_blackbox_call_count(bb, &mut count);
        assert!(count <= 1642);
        arch_ranking_free(r);
        arch_blackbox_free(bb);
    }
}

#[test]
fn expression_sets_and_masks() {
    let expr = CString::new("relu(x1 + x3 + 1) + relu(x2) + 1").unwrap();
    let target = [2.0, 3.0, 0.5];
    let baseline = [-1.0, 0.0, -1.0];
    let mut bb = ptr::null_mut();
    unsafe {
        assert_eq!(
            arch_blackbox_expr(expr.as_ptr(), target.as_ptr(), baseline.as_ptr(), 3, ArchH::Unit, &mut bb),
            ArchStatus::Ok
        );
        let mut v = 0.0;
        assert_eq!(arch_blackbox_eval_mask(bb, [0u8, 0, 0].as_ptr(), &mut v), ArchStatus::Ok);
        assert_eq!(v, 1.0);
        assert_eq!(arch_blackbox_eval_mask(bb, [1u8, 1, 1].as_ptr(), &mut v), ArchStatus::Ok);
        assert_eq!(v, 7.5);

        let mut phi = 0.0;
        assert_eq!(arch_attribute(bb, [0usize, 2].as_ptr(), 2, ArchMethod::ArchAttribute, &mut phi), ArchStatus::Ok);
        assert_eq!(phi, 3.5);
        assert_eq!(arch_attribute(bb, [1usize].as_ptr(), 1, ArchMethod::Difference, &mut phi), ArchStatus::Ok);
        assert_eq!(phi, 3.0);
        assert_eq!(arch_attribute(bb, [5usize].as_ptr(), 1, ArchMethod::Difference, &mut phi), ArchStatus::OutOfRange);

        let indices = [0usize, 2, 1];
        let offsets = [0usize, 2, 3];
        let mut e = ptr::null_mut();
        assert_eq!(
            arch_attribute_sets(bb, indices.as_ptr(), offsets.as_ptr(), 2, ArchMethod::ArchAttribute, &mut e),
            ArchStatus::Ok
        );
        let mut res = 1.0;
        arch_explanation_summary(e, ptr::null_mut(), ptr::null_mut(), &mut res);
        assert_eq!(res, 0.0);
        arch_explanation_free(e);

        let overlapping = [0usize, 1, 1];
        assert_eq!(
            arch_attribute_sets(bb, overlapping.as_ptr(), offsets.as_ptr(), 2, ArchMethod::ArchAttribute, &mut e),
            ArchStatus::InvalidArgument
        );
        arch_blackbox_free(bb);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut bb = ptr::null_mut();
    unsafe {
        let bad = CString::new("F9").unwrap();
        assert_eq!(arch_blackbox_synthetic(bad.as_ptr(), ArchH::Unit, &mut bb), ArchStatus::InvalidArgument);
        assert!(last_error().contains("F9"));

        assert_eq!(arch_blackbox_synthetic(ptr::null(), ArchH::Unit, &mut bb), ArchStatus::NullPointer);
        assert!(last_error().contains("name"));

        let expr = CString::new("x1 +").unwrap();
        let v = [1.0];
        assert_eq!(
            arch_blackbox_expr(expr.as_ptr(), v.as_ptr(), v.as_ptr(), 1, ArchH::Unit, &mut bb),
            ArchStatus::InvalidArgument
        );
        assert!(last_error().contains("offset 4"));

        let (t, b) = ([1.0, 1.0], [0.0, 0.0]);
        assert_eq!(
            arch_blackbox_callback(Some(failing), ptr::null_mut(), t.as_ptr(), b.as_ptr(), 2, ArchH::Unit, &mut bb),
            ArchStatus::Ok
        );
        let mut r = ptr::null_mut();
        assert_eq!(arch_detect(bb, ptr::null(), 0, 0, &mut r), ArchStatus::Evaluation);
        assert!(last_error().contains("callback returned 7"));
        let regime = CString::new("sometimes").unwrap();
        assert_eq!(arch_detect(bb, regime.as_ptr(), 0, 0, &mut r), ArchStatus::InvalidArgument);
        arch_blackbox_free(bb);

        let name = CString::new("F1").unwrap();
        assert_eq!(arch_blackbox_synthetic(name.as_ptr(), ArchH::Unit, &mut bb), ArchStatus::Ok);
        let full = CString::new("full").unwrap();
        assert_eq!(arch_detect(bb, full.as_ptr(), 0, 0, &mut r), ArchStatus::Capacity);
        arch_blackbox_free(bb);
    }
}

#[test]
fn free_accepts_null() {
    unsafe {
        arch_blackbox_free(ptr::null_mut());
        arch_ranking_free(ptr::null_mut());
        arch_explanation_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(arch_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn bridge_handle_reports_spawn_failure() {
    let cmd = CString::new("/nonexistent/host").unwrap();
    let (t, b) = ([1.0, 1.0], [0.0, 0.0]);
    let mut bb = ptr::null_mut();
    let st = unsafe {
        arch_blackbox_bridge(cmd.as_ptr(), ArchWireMode::Vector, 1000, t.as_ptr(), b.as_ptr(), 2, ArchH::Unit, &mut bb)
    };
    assert_eq!(st, ArchStatus::Evaluation);
    assert!(last_error().contains("spawn"));
}
