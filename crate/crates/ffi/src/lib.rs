//! C ABI for the `msdn` zero-shot learning toolkit.
//!
//! Datasets and trained models are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible function
//! returns an [`MsdnStatus`]; on failure a human-readable message is available
//! from [`msdn_last_error_message`] on the same thread.
//!
//! Strings passed in must be NUL-terminated UTF-8. Configuration strings use
//! the same `key=value` lines as the command-line tool and may be null to
//! take defaults.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use msdn_core::data::{generate_synthetic, load_container, save_container, Dataset, SynthSpec};
use msdn_core::eval::{evaluate, harmonic_mean, Mode, PredictConfig};
use msdn_core::model::{forward, Dims, ModelParams};
use msdn_core::training::{train, TrainConfig};
use msdn_core::Error;

/// Status codes. The numeric values of the core error kinds match the
/// command-line tool's exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsdnStatus {
    Ok = 0,
    /// Bad argument, unreadable or unwritable file.
    Argument = 2,
    /// Malformed or invalid dataset/checkpoint.
    Data = 3,
    /// Non-finite loss or parameters.
    Numeric = 4,
    /// Dimension mismatch.
    Shape = 5,
    /// Gradient check failure.
    Gradient = 6,
    /// A required pointer argument was null.
    NullPointer = 7,
    /// Internal panic caught at the boundary.
    Panic = 8,
}

impl MsdnStatus {
    fn from_exit_code(code: i32) -> Self {
        match code {
            3 => MsdnStatus::Data,
            4 => MsdnStatus::Numeric,
            5 => MsdnStatus::Shape,
            6 => MsdnStatus::Gradient,
            _ => MsdnStatus::Argument,
        }
    }
}

/// Opaque dataset handle.
pub struct MsdnDataset {
    inner: Dataset,
}

/// Opaque handle to trained model parameters.
pub struct MsdnModel {
    inner: ModelParams,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MsdnDatasetInfo {
    pub images: usize,
    pub regions: usize,
    pub visual_dim: usize,
    pub attributes: usize,
    pub attr_dim: usize,
    pub seen_classes: usize,
    pub unseen_classes: usize,
    pub train_samples: usize,
    pub test_seen_samples: usize,
    pub test_unseen_samples: usize,
}

/// Evaluation results. `acc` is CZSL accuracy on unseen classes; `unseen`,
/// `seen` and `harmonic` are the GZSL figures.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MsdnMetrics {
    pub acc: f64,
    pub unseen: f64,
    pub seen: f64,
    pub harmonic: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, converting errors and panics into a status plus the thread's
/// last-error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MsdnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            MsdnStatus::Ok
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(&e.to_string());
            MsdnStatus::from_exit_code(e.exit_code())
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(&format!("{what} must not be null"));
            MsdnStatus::NullPointer
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            MsdnStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

/// Reads an optional string argument; null maps to `None`.
unsafe fn opt_str<'a>(p: *const c_char, what: &'static str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure::Core(Error::Argument(format!("{what} is not valid UTF-8"))))
}

unsafe fn req_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    opt_str(p, what)?.ok_or(Failure::Null(what))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message for the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn msdn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn msdn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates a synthetic dataset. `spec` holds `key=value` generator
/// settings, or is null for defaults.
///
/// # Safety
/// `spec` must be null or a valid C string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn msdn_dataset_generate(
    spec: *const c_char,
    out: *mut *mut MsdnDataset,
) -> MsdnStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let spec = match opt_str(spec, "spec")? {
            Some(text) => SynthSpec::from_kv(text)?,
            None => SynthSpec::default(),
        };
        write_out(
            out,
            MsdnDataset {
                inner: generate_synthetic(&spec)?,
            },
        );
        Ok(())
    })
}

/// Loads and validates a dataset container.
///
/// # Safety
/// `path` must be a valid C string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn msdn_dataset_load(
    path: *const c_char,
    out: *mut *mut MsdnDataset,
) -> MsdnStatus {
    guard(|| {
        let path = req_str(path, "path")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        write_out(
            out,
            MsdnDataset {
                inner: load_container(path)?,
            },
        );
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live handle; `path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn msdn_dataset_save(
    ds: *const MsdnDataset,
    path: *const c_char,
) -> MsdnStatus {
    guard(|| {
        let ds = non_null(ds, "dataset")?;
        save_container(&ds.inner, req_str(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn msdn_dataset_info(
    ds: *const MsdnDataset,
    out: *mut MsdnDatasetInfo,
) -> MsdnStatus {
    guard(|| {
        let ds = &non_null(ds, "dataset")?.inner;
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        *out = MsdnDatasetInfo {
            images: ds.features.images(),
            regions: ds.features.regions(),
            visual_dim: ds.features.dim(),
            attributes: ds.attributes.rows(),
            attr_dim: ds.attributes.cols(),
            seen_classes: ds.seen_classes.len(),
            unseen_classes: ds.unseen_classes.len(),
            train_samples: ds.train_idx.len(),
            test_seen_samples: ds.test_seen_idx.len(),
            test_unseen_samples: ds.test_unseen_idx.len(),
        };
        Ok(())
    })
}

/// Releases a dataset. Null is accepted and ignored.
///
/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn msdn_dataset_free(ds: *mut MsdnDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Trains a model. `config` holds `key=value` training settings, or is null
/// for defaults.
///
/// # Safety
/// `ds` must be a live handle, `config` null or a valid C string, `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn msdn_train(
    ds: *const MsdnDataset,
    config: *const c_char,
    out: *mut *mut MsdnModel,
) -> MsdnStatus {
    guard(|| {
        let ds = non_null(ds, "dataset")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let cfg = match opt_str(config, "config")? {
            Some(text) => TrainConfig::from_kv(text)?,
            None => TrainConfig::default(),
        };
        write_out(
            out,
            MsdnModel {
                inner: train(&ds.inner, &cfg)?.params,
            },
        );
        Ok(())
    })
}

/// # Safety
/// `path` must be a valid C string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn msdn_model_load(
    path: *const c_char,
    out: *mut *mut MsdnModel,
) -> MsdnStatus {
    guard(|| {
        let path = req_str(path, "path")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        write_out(
            out,
            MsdnModel {
                inner: ModelParams::load(path)?,
            },
        );
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn msdn_model_save(
    model: *const MsdnModel,
    path: *const c_char,
) -> MsdnStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        model.inner.save(req_str(path, "path")?)?;
        Ok(())
    })
}

/// Releases a model. Null is accepted and ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn msdn_model_free(model: *mut MsdnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Evaluates `model` on the dataset's test splits with fusion weights
/// `alpha1` (attribute→visual) and `alpha2` (visual→attribute).
///
/// # Safety
/// Handles must be live; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn msdn_evaluate(
    model: *const MsdnModel,
    ds: *const MsdnDataset,
    alpha1: f64,
    alpha2: f64,
    out: *mut MsdnMetrics,
) -> MsdnStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        let ds = non_null(ds, "dataset")?;
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        let cfg = PredictConfig {
            alpha1,
            alpha2,
            mode: Mode::Czsl,
        };
        let r = evaluate(&model.inner, &ds.inner, &cfg)?;
        *out = MsdnMetrics {
            acc: r.acc,
            unseen: r.unseen,
            seen: r.seen,
            harmonic: r.harmonic,
        };
        Ok(())
    })
}

/// Copies the attention maps and embeddings for image `image` into caller
/// buffers: `beta` is `K × R` and `tau` is `R × K`, both row-major; `psi`
/// and `psi_mapped` have length `K`. Any buffer may be null to skip it; a
/// non-null buffer whose length differs from the required size is a shape
/// error.
///
/// # Safety
/// Handles must be live; each non-null buffer must hold its stated length.
#[no_mangle]
pub unsafe extern "C" fn msdn_attention(
    model: *const MsdnModel,
    ds: *const MsdnDataset,
    image: usize,
    beta: *mut f64,
    beta_len: usize,
    tau: *mut f64,
    tau_len: usize,
    psi: *mut f64,
    psi_len: usize,
    psi_mapped: *mut f64,
    psi_mapped_len: usize,
) -> MsdnStatus {
    guard(|| {
        let model = &non_null(model, "model")?.inner;
        let ds = &non_null(ds, "dataset")?.inner;
        model.check_compatible(Dims::of(ds))?;
        if image >= ds.features.images() {
            return Err(Error::Argument(format!(
                "image index {image} out of range for {} images",
                ds.features.images()
            ))
            .into());
        }
        let t = forward(&ds.features.image(image), &ds.attributes, model)?;
        let outputs: [(&'static str, *mut f64, usize, &[f64]); 4] = [
            ("beta", beta, beta_len, t.beta().as_slice()),
            ("tau", tau, tau_len, t.tau().as_slice()),
            ("psi", psi, psi_len, t.psi()),
            ("psi_mapped", psi_mapped, psi_mapped_len, t.psi_mapped()),
        ];
        for (name, ptr, len, src) in outputs {
            if ptr.is_null() {
                continue;
            }
            if len != src.len() {
                return Err(Error::Shape {
                    op: name,
                    lhs: (len, 1),
                    rhs: (src.len(), 1),
                }
                .into());
            }
            ptr::copy_nonoverlapping(src.as_ptr(), ptr, len);
        }
        Ok(())
    })
}

/// `2SU / (S + U)` for accuracies in `[0, 1]`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn msdn_harmonic_mean(seen: f64, unseen: f64, out: *mut f64) -> MsdnStatus {
    guard(|| {
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        *out = harmonic_mean(seen, unseen)?;
        Ok(())
    })
}
