use std::ffi::{CStr, CString};
use std::ptr;

use msdn_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(msdn_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn small_dataset() -> *mut MsdnDataset {
    let spec = CString::new("samples_per_class=10\nseed=3\n").unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(
        unsafe { msdn_dataset_generate(spec.as_ptr(), &mut ds) },
        MsdnStatus::Ok
    );
    assert!(!ds.is_null());
    ds
}

#[test]
fn generate_train_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset();
    let mut info = MsdnDatasetInfo::default();
    assert_eq!(unsafe { msdn_dataset_info(ds, &mut info) }, MsdnStatus::Ok);
    assert_eq!((info.images, info.regions, info.attributes), (120, 9, 12));
    assert_eq!((info.seen_classes, info.unseen_classes), (8, 4));

    let ds_path = CString::new(dir.path().join("ds.zsld").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { msdn_dataset_save(ds, ds_path.as_ptr()) },
        MsdnStatus::Ok
    );
    let mut loaded = ptr::null_mut();
    assert_eq!(
        unsafe { msdn_dataset_load(ds_path.as_ptr(), &mut loaded) },
        MsdnStatus::Ok
    );

    let cfg = CString::new("epochs=5").unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { msdn_train(loaded, cfg.as_ptr(), &mut model) },
        MsdnStatus::Ok
    );
    let ck = CString::new(dir.path().join("m.ckpt").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { msdn_model_save(model, ck.as_ptr()) },
        MsdnStatus::Ok
    );
    let mut reloaded = ptr::null_mut();
    assert_eq!(
        unsafe { msdn_model_load(ck.as_ptr(), &mut reloaded) },
        MsdnStatus::Ok
    );

    let mut m1 = MsdnMetrics::default();
    let mut m2 = MsdnMetrics::default();
    assert_eq!(
        unsafe { msdn_evaluate(model, ds, 0.9, 0.1, &mut m1) },
        MsdnStatus::Ok
    );
    assert_eq!(
        unsafe { msdn_evaluate(reloaded, loaded, 0.9, 0.1, &mut m2) },
        MsdnStatus::Ok
    );
    assert_eq!(m1, m2);
    assert!((0.0..=1.0).contains(&m1.acc));

    let mut beta = vec![0.0; 12 * 9];
    let mut tau = vec![0.0; 9 * 12];
    let mut psi = vec![0.0; 12];
    let status = unsafe {
        msdn_attention(
            model,
            ds,
            0,
            beta.as_mut_ptr(),
            beta.len(),
            tau.as_mut_ptr(),
            tau.len(),
            psi.as_mut_ptr(),
            psi.len(),
            ptr::null_mut(),
            0,
        )
    };
    assert_eq!(status, MsdnStatus::Ok);
    for r in 0..9 {
        let s: f64 = (0..12).map(|k| beta[k * 9 + r]).sum();
        assert!((s - 1.0).abs() < 1e-10);
    }
    for k in 0..12 {
        let s: f64 = (0..9).map(|r| tau[r * 12 + k]).sum();
        assert!((s - 1.0).abs() < 1e-10);
    }
    let status = unsafe {
        msdn_attention(
            model,
            ds,
            0,
            beta.as_mut_ptr(),
            5,
            ptr::null_mut(),
            0,
            ptr::null_mut(),
            0,
            ptr::null_mut(),
            0,
        )
    };
    assert_eq!(status, MsdnStatus::Shape);
    assert!(last_error().contains("beta"));

    unsafe {
        msdn_model_free(model);
        msdn_model_free(reloaded);
        msdn_dataset_free(ds);
        msdn_dataset_free(loaded);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut ds = ptr::null_mut();
    let missing = CString::new("/nonexistent/ds.zsld").unwrap();
    assert_eq!(
        unsafe { msdn_dataset_load(missing.as_ptr(), &mut ds) },
        MsdnStatus::Argument
    );
    assert!(ds.is_null());
    assert!(!last_error().is_empty());

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.zsld");
    std::fs::write(&junk, b"NOPE").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { msdn_dataset_load(junk.as_ptr(), &mut ds) },
        MsdnStatus::Data
    );

    assert_eq!(
        unsafe { msdn_dataset_load(ptr::null(), &mut ds) },
        MsdnStatus::NullPointer
    );
    assert_eq!(last_error(), "path must not be null");
    assert_eq!(
        unsafe { msdn_dataset_generate(ptr::null(), ptr::null_mut()) },
        MsdnStatus::NullPointer
    );

    let bad = CString::new("regions=0").unwrap();
    assert_eq!(
        unsafe { msdn_dataset_generate(bad.as_ptr(), &mut ds) },
        MsdnStatus::Argument
    );

    let mut h = 0.0;
    assert_eq!(
        unsafe { msdn_harmonic_mean(0.745, 0.620, &mut h) },
        MsdnStatus::Ok
    );
    assert!((h - 0.677).abs() < 5e-4);
    assert_eq!(last_error(), "");
    assert_eq!(
        unsafe { msdn_harmonic_mean(1.5, 0.5, &mut h) },
        MsdnStatus::Argument
    );

    // Model for 12 attributes against a 4-attribute dataset.
    let small = CString::new("attributes=4\nsamples_per_class=5").unwrap();
    let mut other = ptr::null_mut();
    assert_eq!(
        unsafe { msdn_dataset_generate(small.as_ptr(), &mut other) },
        MsdnStatus::Ok
    );
    let ds = small_dataset();
    let cfg = CString::new("epochs=1").unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { msdn_train(ds, cfg.as_ptr(), &mut model) },
        MsdnStatus::Ok
    );
    let mut m = MsdnMetrics::default();
    assert_eq!(
        unsafe { msdn_evaluate(model, other, 0.9, 0.1, &mut m) },
        MsdnStatus::Shape
    );
    unsafe {
        msdn_model_free(model);
        msdn_dataset_free(ds);
        msdn_dataset_free(other);
        msdn_dataset_free(ptr::null_mut());
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(msdn_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
