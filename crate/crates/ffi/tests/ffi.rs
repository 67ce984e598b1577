use std::ffi::{CStr, CString};
use std::ptr;

use adsel_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(adsel_last_error_message()) }.to_string_lossy().into_owned()
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).flat_map(|i| [(i % 10) as f64 / 10.0, (i / 10) as f64 / 10.0]).collect()
}

fn default_config(alg: &str) -> CString {
    let alg = CString::new(alg).unwrap();
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { adsel_default_config(alg.as_ptr(), &mut json) }, AdselStatus::Ok);
    let owned = unsafe { CStr::from_ptr(json) }.to_owned();
    unsafe { adsel_string_free(json) };
    owned
}

#[test]
fn detector_lifecycle() {
    let data = grid(100);
    let cfg = default_config("knn");
    let mut det = ptr::null_mut();
    let st = unsafe { adsel_detector_fit(cfg.as_ptr(), data.as_ptr(), 100, 2, &mut det) };
    assert_eq!(st, AdselStatus::Ok, "{}", last_error());
    assert_eq!(last_error(), "");

    let probe = [0.4, 0.4, 5.0, 5.0];
    let mut scores = [0.0; 2];
    let mut flags = [9u8; 2];
    let mut threshold = 0.0;
    unsafe {
        assert_eq!(adsel_detector_score(det, probe.as_ptr(), 2, 2, scores.as_mut_ptr()), AdselStatus::Ok);
        assert_eq!(adsel_detector_predict(det, probe.as_ptr(), 2, 2, flags.as_mut_ptr()), AdselStatus::Ok);
        assert_eq!(adsel_detector_threshold(det, &mut threshold), AdselStatus::Ok);
    }
    assert!(scores[0] < scores[1]);
    assert_eq!(flags, [0, 1]);
    assert!(scores[0] <= threshold && threshold < scores[1]);

    let st = unsafe { adsel_detector_predict(det, probe.as_ptr(), 1, 4, flags.as_mut_ptr()) };
    assert_eq!(st, AdselStatus::DimensionMismatch);
    assert!(!last_error().is_empty());

    let mut ball = ptr::null_mut();
    let (mut frac, mut se) = (0.0, 0.0);
    let mut center = [0.0; 2];
    let mut radius = 0.0;
    unsafe {
        assert_eq!(adsel_ball_fit(data.as_ptr(), 100, 2, 1e-3, &mut ball), AdselStatus::Ok);
        assert_eq!(adsel_ball_get(ball, center.as_mut_ptr(), 2, &mut radius), AdselStatus::Ok);
        assert_eq!(adsel_hypervolume(det, ball, 20_000, 7, &mut frac, &mut se), AdselStatus::Ok);
        adsel_ball_free(ball);
        adsel_detector_free(det);
    }
    assert!((center[0] - 0.45).abs() < 0.01 && (center[1] - 0.45).abs() < 0.01);
    assert!(radius > 0.6 && radius < 0.66);
    assert!(frac > 0.0 && frac < 1.0 && se > 0.0);
}

#[test]
fn mc_cv_fpr_in_range() {
    let data = grid(60);
    let cfg = default_config("gaussian");
    let mut fpr = -1.0;
    let st = unsafe { adsel_mc_cv_fpr(cfg.as_ptr(), data.as_ptr(), 60, 2, 0.3, 5, 1, &mut fpr) };
    assert_eq!(st, AdselStatus::Ok, "{}", last_error());
    assert!((0.0..=1.0).contains(&fpr));
}

#[test]
fn errors_map_to_codes() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(adsel_lc_score(1.5, 0.0, &mut out), AdselStatus::InvalidInput);
        assert_eq!(adsel_lc_score(0.2, 0.1, ptr::null_mut()), AdselStatus::NullPointer);
        let bad = CString::new("{not json").unwrap();
        let data = grid(10);
        let mut det = ptr::null_mut();
        assert_eq!(adsel_detector_fit(bad.as_ptr(), data.as_ptr(), 10, 2, &mut det), AdselStatus::Parse);
        assert!(det.is_null());
        let alg = CString::new("svm").unwrap();
        let mut json = ptr::null_mut();
        assert_eq!(adsel_default_config(alg.as_ptr(), &mut json), AdselStatus::InvalidInput);
        let missing = CString::new("/nonexistent/model.json").unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(adsel_metamodel_load(missing.as_ptr(), &mut model), AdselStatus::Io);
    }
}

#[test]
fn metrics() {
    let (mut m, mut s, mut t, mut g, mut lc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(adsel_mcc(2, 1, 1, 6, &mut m, &mut s), AdselStatus::Ok);
        assert_eq!(adsel_kendall_tau_b([1.0, 2.0, 3.0, 4.0].as_ptr(), [1.0, 3.0, 2.0, 4.0].as_ptr(), 4, &mut t), AdselStatus::Ok);
        assert_eq!(adsel_ndcg([0usize, 1].as_ptr(), [0.5, 1.0].as_ptr(), 2, &mut g), AdselStatus::Ok);
        assert_eq!(adsel_lc_score(0.2, 0.1, &mut lc), AdselStatus::Ok);
        assert_eq!(adsel_ndcg([0usize, 5].as_ptr(), [0.5, 1.0].as_ptr(), 2, &mut g), AdselStatus::InvalidInput);
    }
    assert!((m - 11.0 / 21.0).abs() < 1e-12);
    assert!((s - (m + 1.0) / 2.0).abs() < 1e-15);
    assert!((t - 4.0 / 6.0).abs() < 1e-12);
    assert!((lc - 0.85).abs() < 1e-12);
    let v = unsafe { CStr::from_ptr(adsel_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn dataset_and_metamodel_round_trip() {
    use adsel::features::{MetaDataset, MetaInstance};
    use adsel::metamodel::{ForestParams, MetaModel};

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, "a,b,label\n1,2,0\n2,3,0\n3,1,0\n2,2,0\n9,9,1\n1,1,0\n").unwrap();
    let (path, label) = (CString::new(csv.to_str().unwrap()).unwrap(), CString::new("label").unwrap());
    let mut ds = ptr::null_mut();
    let (mut r, mut c, mut a) = (0, 0, 0);
    unsafe {
        assert_eq!(adsel_dataset_load_csv(path.as_ptr(), label.as_ptr(), &mut ds), AdselStatus::Ok);
        assert_eq!(adsel_dataset_shape(ds, &mut r, &mut c, &mut a), AdselStatus::Ok);
    }
    assert_eq!((r, c, a), (6, 2, 1));
    let cfg = default_config("gaussian");
    let mut det = ptr::null_mut();
    unsafe {
        assert_eq!(adsel_detector_fit_dataset(cfg.as_ptr(), ds, &mut det), AdselStatus::Ok, "{}", last_error());
        adsel_detector_free(det);
        adsel_dataset_free(ds);
    }

    let meta = MetaDataset {
        columns: vec!["landmark_hv_knn".into(), "detector_hv".into(), "detector_fpr".into()],
        rows: (0..30)
            .map(|i| MetaInstance {
                dataset_id: "d".into(),
                config_id: format!("c{i}"),
                values: vec![Some(0.5), Some(i as f64 / 30.0), Some(0.1)],
                target: i as f64 / 30.0,
            })
            .collect(),
    };
    let model = MetaModel::fit(&meta, ForestParams { n_trees: 10, ..Default::default() }).unwrap();
    let file = dir.path().join("model.json");
    model.save(&file).unwrap();
    let file = CString::new(file.to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    let mut n = 0;
    let mut name = ptr::null_mut();
    let mut pred = 0.0;
    let values = [f64::NAN, 0.5, 0.1];
    unsafe {
        assert_eq!(adsel_metamodel_load(file.as_ptr(), &mut handle), AdselStatus::Ok);
        assert_eq!(adsel_metamodel_n_columns(handle, &mut n), AdselStatus::Ok);
        assert_eq!(adsel_metamodel_column_name(handle, 1, &mut name), AdselStatus::Ok);
        assert_eq!(CStr::from_ptr(name).to_str().unwrap(), "detector_hv");
        adsel_string_free(name);
        assert_eq!(adsel_metamodel_predict(handle, values.as_ptr(), 3, &mut pred), AdselStatus::Ok);
        assert_eq!(adsel_metamodel_predict(handle, values.as_ptr(), 2, &mut pred), AdselStatus::DimensionMismatch);
        adsel_metamodel_free(handle);
    }
    assert_eq!(n, 3);
    let expected = model.predict_values(&[None, Some(0.5), Some(0.1)]).unwrap();
    let mut again = 0.0;
    unsafe {
        let mut h = ptr::null_mut();
        adsel_metamodel_load(file.as_ptr(), &mut h);
        adsel_metamodel_predict(h, values.as_ptr(), 3, &mut again);
        adsel_metamodel_free(h);
    }
    assert_eq!(again.to_bits(), expected.to_bits());
}

#[test]
fn header_declares_every_export_and_compiles() {
    let header_path = concat!(env!("CARGO_MANIFEST_DIR"), "/include/adsel.h");
    let header = std::fs::read_to_string(header_path).unwrap();
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 20);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    // syntax-check the header with the system C compiler when one exists
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header_path])
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
