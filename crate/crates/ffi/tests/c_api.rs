use std::ffi::{CStr, CString};
use std::ptr;

use sarcnn_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sar_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn cpath(p: &std::path::Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(sar_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn reflectivity_and_simulation_round_trip() {
    unsafe {
        let mut map = ptr::null_mut();
        assert_eq!(sar_reflectivity_new(-10.0, 10.0, 100, &mut map), SarStatus::Ok);
        assert_eq!(
            sar_reflectivity_add_shape(map, SarShapeKind::Circle as u32, 2.0, 0.0, 4.0, 4.0),
            SarStatus::Ok
        );
        assert_eq!(sar_reflectivity_size(map), 100);
        let mut vals = vec![0.0; 100 * 100];
        assert_eq!(
            sar_reflectivity_values(map, vals.as_mut_ptr(), vals.len()),
            SarStatus::Ok
        );
        assert!(vals.contains(&1.0));

        let mut raw = ptr::null_mut();
        assert_eq!(sar_simulate(map, 5.0, 0, 1, &mut raw), SarStatus::Ok);
        let (mut rows, mut cols) = (0, 0);
        assert_eq!(sar_raw_dims(raw, &mut rows, &mut cols), SarStatus::Ok);
        assert_eq!((rows, cols), (100, 100));
        let mut data = vec![0.0; rows * cols];
        assert_eq!(sar_raw_values(raw, data.as_mut_ptr(), data.len()), SarStatus::Ok);
        assert!(data.iter().any(|&v| v > 0.0));

        let mut img = vec![0.0; 50 * 50];
        assert_eq!(
            sar_backproject(raw, -10.0, 10.0, 50, 0.1, img.as_mut_ptr(), img.len()),
            SarStatus::Ok
        );
        let (lo, hi) = img.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert_eq!((lo, hi), (0.0, 1.0));

        sar_raw_free(raw);
        sar_reflectivity_free(map);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut map = ptr::null_mut();
        assert_eq!(
            sar_reflectivity_new(1.0, -1.0, 10, &mut map),
            SarStatus::InvalidParameter
        );
        assert!(map.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(
            sar_reflectivity_new(-1.0, 1.0, 10, ptr::null_mut()),
            SarStatus::NullPointer
        );
        assert!(last_error().contains("null"));

        assert_eq!(sar_reflectivity_new(-1.0, 1.0, 10, &mut map), SarStatus::Ok);
        assert_eq!(
            sar_reflectivity_add_shape(map, 99, 1.0, 0.0, 0.0, 0.0),
            SarStatus::InvalidParameter
        );
        let mut small = [0.0; 3];
        assert_eq!(
            sar_reflectivity_values(map, small.as_mut_ptr(), small.len()),
            SarStatus::BufferTooSmall
        );
        sar_reflectivity_free(map);

        let missing = CString::new("/nonexistent/dir/data.sard").unwrap();
        let mut ds = ptr::null_mut();
        assert_eq!(sar_dataset_load(missing.as_ptr(), &mut ds), SarStatus::Io);
        assert!(ds.is_null());

        assert_eq!(sar_dataset_len(ptr::null()), 0);
        sar_dataset_free(ptr::null_mut());
        sar_model_free(ptr::null_mut());
    }
}

#[test]
fn corrupt_file_reports_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.sard");
    std::fs::write(&path, b"NOPE").unwrap();
    let c = cpath(&path);
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(sar_dataset_load(c.as_ptr(), &mut ds), SarStatus::Format);
        let mut m = ptr::null_mut();
        assert_eq!(sar_model_load(c.as_ptr(), &mut m), SarStatus::Format);
    }
}

#[test]
fn dataset_train_predict_and_persist() {
    let dir = tempfile::tempdir().unwrap();
    let ds_path = cpath(&dir.path().join("shapes.sard"));
    let ck_path = cpath(&dir.path().join("model.sard"));
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(
            sar_dataset_generate_shapes(10, 5.0, SarMode::Raw as u32, 3, &mut ds),
            SarStatus::Ok
        );
        assert_eq!(sar_dataset_len(ds), 40);
        assert_eq!(sar_dataset_input_size(ds), 100);
        assert_eq!(sar_dataset_class_count(ds), 4);

        let mut x = vec![0f32; 100 * 100];
        let mut label = 0u8;
        assert_eq!(
            sar_dataset_sample(ds, 0, &mut label, x.as_mut_ptr(), x.len()),
            SarStatus::Ok
        );
        assert!((1..=4).contains(&label));
        assert_eq!(
            sar_dataset_sample(ds, 40, &mut label, x.as_mut_ptr(), x.len()),
            SarStatus::InvalidParameter
        );

        assert_eq!(sar_dataset_save(ds, ds_path.as_ptr()), SarStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(sar_dataset_load(ds_path.as_ptr(), &mut again), SarStatus::Ok);
        let mut y = vec![0f32; 100 * 100];
        let mut label2 = 0u8;
        assert_eq!(
            sar_dataset_sample(again, 0, &mut label2, y.as_mut_ptr(), y.len()),
            SarStatus::Ok
        );
        assert_eq!((label, &x), (label2, &y));

        let mut model = ptr::null_mut();
        assert_eq!(sar_model_train(ds, 2, 2, 1e-3, 8, 1, &mut model), SarStatus::Ok);
        assert_eq!(sar_model_class_count(model), 4);

        let mut probs = [0.0; 4];
        assert_eq!(
            sar_model_predict(model, x.as_ptr(), x.len(), probs.as_mut_ptr(), probs.len()),
            SarStatus::Ok
        );
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(
            sar_model_predict(model, x.as_ptr(), 10, probs.as_mut_ptr(), probs.len()),
            SarStatus::ShapeMismatch
        );

        let mut acc = -1.0;
        assert_eq!(sar_model_evaluate(model, ds, 0, &mut acc), SarStatus::Ok);
        assert!((0.0..=1.0).contains(&acc));

        assert_eq!(sar_model_save(model, ck_path.as_ptr()), SarStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(sar_model_load(ck_path.as_ptr(), &mut loaded), SarStatus::Ok);
        let mut probs2 = [0.0; 4];
        assert_eq!(
            sar_model_predict(loaded, x.as_ptr(), x.len(), probs2.as_mut_ptr(), probs2.len()),
            SarStatus::Ok
        );
        assert_eq!(probs, probs2);

        sar_model_free(loaded);
        sar_model_free(model);
        sar_dataset_free(again);
        sar_dataset_free(ds);
    }
}

#[test]
fn header_lists_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/sarcnn.h")).unwrap();
    for name in [
        "sar_last_error_message",
        "sar_version",
        "sar_reflectivity_new",
        "sar_reflectivity_add_shape",
        "sar_reflectivity_free",
        "sar_simulate",
        "sar_raw_dims",
        "sar_backproject",
        "sar_raw_free",
        "sar_dataset_generate_shapes",
        "sar_dataset_load",
        "sar_dataset_save",
        "sar_dataset_sample",
        "sar_dataset_free",
        "sar_model_train",
        "sar_model_load",
        "sar_model_save",
        "sar_model_predict",
        "sar_model_evaluate",
        "sar_model_free",
        "SAR_STATUS_BUFFER_TOO_SMALL",
        "typedef struct SarModel SarModel",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
