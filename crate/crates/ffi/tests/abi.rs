use std::ffi::{CStr, CString};
use std::ptr;

use wq_ffi::*;

fn last_error() -> String {
    let p = wq_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn metrics_match_hand_values() {
    let pred = [1.0, 2.0, 3.0];
    let obs = [1.0, 2.0, 5.0];
    let mut out = 0.0;
    assert_eq!(unsafe { wq_rmse(pred.as_ptr(), obs.as_ptr(), 3, &mut out) }, WqStatus::Ok);
    assert!((out - (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
    // mean(obs) = 8/3, sst = 25/9 + 4/9 + 49/9 = 78/9, sse = 4
    assert_eq!(unsafe { wq_r_squared(pred.as_ptr(), obs.as_ptr(), 3, &mut out) }, WqStatus::Ok);
    assert!((out - (1.0 - 4.0 * 9.0 / 78.0)).abs() < 1e-12);
    assert!(wq_last_error_message().is_null());
}

#[test]
fn metric_errors_carry_messages() {
    let obs = [2.0, 2.0];
    let mut out = 0.0;
    let st = unsafe { wq_r_squared(obs.as_ptr(), obs.as_ptr(), 2, &mut out) };
    assert_eq!(st, WqStatus::Metric);
    assert!(!last_error().is_empty());
    let st = unsafe { wq_rmse(ptr::null(), obs.as_ptr(), 2, &mut out) };
    assert_eq!(st, WqStatus::NullPointer);
    assert!(last_error().contains("pred"));
}

#[test]
fn haversine_one_degree_of_latitude() {
    let d = wq_haversine_km(0.0, 0.0, 1.0, 0.0);
    assert!((d - 111.2).abs() < 0.1, "{d}");
    // along a meridian distance is linear in the angle
    assert!((wq_haversine_km(10.0, 5.0, 13.0, 5.0) - 3.0 * d).abs() < 1e-9);
}

#[test]
fn fit_predict_save_load_roundtrip() {
    // y = 2 + x0 - 0.5 x1
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..20 {
        let a = i as f64;
        let b = (i * 7 % 5) as f64;
        x.extend([a, b]);
        y.push(2.0 + a - 0.5 * b);
    }
    let kind = CString::new("lm").unwrap();
    let mut model = ptr::null_mut();
    let st = unsafe { wq_model_fit(kind.as_ptr(), ptr::null(), x.as_ptr(), 20, 2, y.as_ptr(), 1, &mut model) };
    assert_eq!(st, WqStatus::Ok);
    assert_eq!(unsafe { wq_model_n_features(model) }, 2);
    assert!(unsafe { wq_model_train_rmse(model) } < 1e-9);

    let q = [100.0, 4.0];
    let mut out = [0.0];
    assert_eq!(unsafe { wq_model_predict(model, q.as_ptr(), 1, 2, out.as_mut_ptr()) }, WqStatus::Ok);
    assert!((out[0] - 100.0).abs() < 1e-8);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { wq_model_save(model, path.as_ptr()) }, WqStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { wq_model_load(path.as_ptr(), &mut loaded) }, WqStatus::Ok);
    let mut again = [0.0];
    assert_eq!(unsafe { wq_model_predict(loaded, q.as_ptr(), 1, 2, again.as_mut_ptr()) }, WqStatus::Ok);
    assert_eq!(out, again);

    // wrong width
    assert_eq!(unsafe { wq_model_predict(loaded, q.as_ptr(), 2, 1, out.as_mut_ptr()) }, WqStatus::Model);
    unsafe {
        wq_model_free(model);
        wq_model_free(loaded);
        wq_model_free(ptr::null_mut());
    }
}

#[test]
fn fit_rejects_bad_arguments() {
    let x = [0.0, 1.0, 2.0];
    let y = [0.0, 1.0, 2.0];
    let mut model = ptr::null_mut();
    let bad = CString::new("catboost").unwrap();
    let st = unsafe { wq_model_fit(bad.as_ptr(), ptr::null(), x.as_ptr(), 3, 1, y.as_ptr(), 0, &mut model) };
    assert_ne!(st, WqStatus::Ok);
    assert!(model.is_null());

    let gb = CString::new("gb").unwrap();
    let params = CString::new("n_rounds=2.5").unwrap();
    let st = unsafe { wq_model_fit(gb.as_ptr(), params.as_ptr(), x.as_ptr(), 3, 1, y.as_ptr(), 0, &mut model) };
    assert_eq!(st, WqStatus::Model);
    assert!(last_error().contains("n_rounds"));

    let params = CString::new("n_rounds").unwrap();
    let st = unsafe { wq_model_fit(gb.as_ptr(), params.as_ptr(), x.as_ptr(), 3, 1, y.as_ptr(), 0, &mut model) };
    assert_eq!(st, WqStatus::InvalidArgument);

    let missing = CString::new("/nonexistent/model.json").unwrap();
    assert_eq!(unsafe { wq_model_load(missing.as_ptr(), &mut model) }, WqStatus::Io);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/wq.h")).unwrap();
    for name in [
        "wq_last_error_message",
        "wq_version",
        "wq_haversine_km",
        "wq_rmse",
        "wq_r_squared",
        "wq_model_fit",
        "wq_model_predict",
        "wq_model_n_features",
        "wq_model_train_rmse",
        "wq_model_save",
        "wq_model_load",
        "wq_model_free",
        "WQ_STATUS_PANIC",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
