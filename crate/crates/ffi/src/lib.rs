//! C interface to `sarcnn`.
//!
//! Every fallible function returns a [`SarStatus`]. On failure a description
//! is available from [`sar_last_error_message`] on the same thread. Objects
//! are opaque handles created by `*_new`, `*_load`, `*_generate` style calls
//! and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use sarcnn::backprojection::backproject;
use sarcnn::cnn::{evaluate, train, Hyper, ModelParams, Tensor, TrainConfig};
use sarcnn::datasets::{
    gen_shape_dataset, load_checkpoint, load_dataset, save_checkpoint, save_dataset, LabeledDataset, Mode, SimConfig,
};
use sarcnn::forward::{simulate, smooth, RawSarData};
use sarcnn::scene::{ReflectivityMap, RoiGrid, ShapeKind, ShapeSpec};
use sarcnn::Error;

/// Result codes. Values are stable.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SarStatus {
    Ok = 0,
    InvalidParameter = 1,
    ShapeMismatch = 2,
    InvalidState = 3,
    Io = 4,
    Format = 5,
    Image = 6,
    Dataset = 7,
    Generation = 8,
    NullPointer = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SarShapeKind {
    /// `a` = radius.
    Circle = 1,
    /// `a` = side.
    Square = 2,
    /// `a`, `b` = semi-axes along z1 and z2.
    Ellipse = 3,
    /// `a` = half diagonal.
    Rhombus = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SarMode {
    Raw = 0,
    Backprojected = 1,
}

pub struct SarReflectivity {
    inner: ReflectivityMap,
}

pub struct SarRawData {
    inner: RawSarData,
}

pub struct SarDataset {
    inner: LabeledDataset,
}

pub struct SarModel {
    inner: ModelParams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SarStatus {
    match e {
        Error::InvalidParameter(_) => SarStatus::InvalidParameter,
        Error::ShapeMismatch(_) => SarStatus::ShapeMismatch,
        Error::InvalidState(_) => SarStatus::InvalidState,
        Error::Io { .. } => SarStatus::Io,
        Error::Format(_) => SarStatus::Format,
        Error::Image { .. } => SarStatus::Image,
        Error::Dataset(_) => SarStatus::Dataset,
        Error::Generation(_) => SarStatus::Generation,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Small { need: usize, got: usize },
    Arg(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SarStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(&format!("null pointer passed for {what}"));
            SarStatus::NullPointer
        }
        Ok(Err(Fail::Small { need, got })) => {
            set_error(&format!("buffer holds {got} elements, {need} needed"));
            SarStatus::BufferTooSmall
        }
        Ok(Err(Fail::Arg(m))) => {
            set_error(&m);
            SarStatus::InvalidParameter
        }
        Err(_) => {
            set_error("internal panic");
            SarStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn out_slice<'a, T>(buf: *mut T, len: usize, need: usize) -> Result<&'a mut [T], Fail> {
    if buf.is_null() {
        return Err(Fail::Null("buffer"));
    }
    if len < need {
        return Err(Fail::Small { need, got: len });
    }
    Ok(std::slice::from_raw_parts_mut(buf, need))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn sar_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sar_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an all-zero reflectivity map on an `n × n` grid over `[z_min, z_max]²`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sar_reflectivity_new(
    z_min: f64,
    z_max: f64,
    n: usize,
    out: *mut *mut SarReflectivity,
) -> SarStatus {
    guard(|| {
        let grid = RoiGrid::new(z_min, z_max, n)?;
        put(
            out,
            SarReflectivity {
                inner: ReflectivityMap::zeros(grid),
            },
        )
    })
}

/// Adds a shape to the map (union). `kind` is a [`SarShapeKind`] value, which
/// also says what `a` and `b` mean.
///
/// # Safety
/// `map` must come from [`sar_reflectivity_new`].
#[no_mangle]
pub unsafe extern "C" fn sar_reflectivity_add_shape(
    map: *mut SarReflectivity,
    kind: u32,
    a: f64,
    b: f64,
    center_z1: f64,
    center_z2: f64,
) -> SarStatus {
    guard(|| {
        let map = get_mut(map, "map")?;
        let kind = match kind {
            k if k == SarShapeKind::Circle as u32 => ShapeKind::Circle { radius: a },
            k if k == SarShapeKind::Square as u32 => ShapeKind::Square { side: a },
            k if k == SarShapeKind::Ellipse as u32 => ShapeKind::Ellipse { a, b },
            k if k == SarShapeKind::Rhombus as u32 => ShapeKind::Rhombus { half_diagonal: a },
            k => return Err(Fail::Arg(format!("unknown shape kind {k}"))),
        };
        let shape = sarcnn::scene::render(map.inner.grid(), &[ShapeSpec::new(kind, (center_z1, center_z2))])?;
        map.inner = map.inner.union(&shape)?;
        Ok(())
    })
}

/// Side length of the map's grid.
///
/// # Safety
/// `map` must be a valid handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn sar_reflectivity_size(map: *const SarReflectivity) -> usize {
    map.as_ref().map_or(0, |m| m.inner.grid().n())
}

/// Copies the `n × n` map values (row index along z1) into `buf`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sar_reflectivity_values(map: *const SarReflectivity, buf: *mut f64, len: usize) -> SarStatus {
    guard(|| {
        let m = get(map, "map")?;
        let v = m.inner.values().as_slice();
        out_slice(buf, len, v.len())?.copy_from_slice(v);
        Ok(())
    })
}

/// # Safety
/// `map` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn sar_reflectivity_free(map: *mut SarReflectivity) {
    free(map)
}

/// Simulates raw data from the standard flight track (radius 20, 100
/// positions, `c0 = 1`) at `height`, with 100 fast-time samples. The result
/// is smoothed when `smoothed` is nonzero.
///
/// # Safety
/// `map` must be valid; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sar_simulate(
    map: *const SarReflectivity,
    height: f64,
    paper_times: i32,
    smoothed: i32,
    out: *mut *mut SarRawData,
) -> SarStatus {
    guard(|| {
        let m = get(map, "map")?;
        let cfg = SimConfig {
            grid: *m.inner.grid(),
            paper_times: paper_times != 0,
            ..SimConfig::default()
        };
        let sim = cfg.simulator(height)?;
        let mut raw = simulate(&m.inner, sim.track(), sim.axis())?;
        if smoothed != 0 {
            raw = smooth(&raw)?;
        }
        put(out, SarRawData { inner: raw })
    })
}

/// Rows (fast-time samples) and columns (antenna positions) of the data.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sar_raw_dims(raw: *const SarRawData, rows: *mut usize, cols: *mut usize) -> SarStatus {
    guard(|| {
        let r = get(raw, "raw")?;
        *get_mut(rows, "rows")? = r.inner.values().rows();
        *get_mut(cols, "cols")? = r.inner.values().cols();
        Ok(())
    })
}

/// Copies the data matrix, row-major, into `buf`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sar_raw_values(raw: *const SarRawData, buf: *mut f64, len: usize) -> SarStatus {
    guard(|| {
        let r = get(raw, "raw")?;
        let v = r.inner.values().as_slice();
        out_slice(buf, len, v.len())?.copy_from_slice(v);
        Ok(())
    })
}

/// Backprojects smoothed data onto an `n × n` grid over `[z_min, z_max]²`
/// and writes the `[0, 1]` image into `buf`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sar_backproject(
    raw: *const SarRawData,
    z_min: f64,
    z_max: f64,
    n: usize,
    tol: f64,
    buf: *mut f64,
    len: usize,
) -> SarStatus {
    guard(|| {
        let r = get(raw, "raw")?;
        let grid = RoiGrid::new(z_min, z_max, n)?;
        let img = backproject(&r.inner, &grid, tol)?;
        let v = img.values().as_slice();
        out_slice(buf, len, v.len())?.copy_from_slice(v);
        Ok(())
    })
}

/// # Safety
/// `raw` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn sar_raw_free(raw: *mut SarRawData) {
    free(raw)
}

/// Generates the four-class shape dataset with default simulation settings.
/// `mode` is a [`SarMode`] value.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sar_dataset_generate_shapes(
    n_per_class: usize,
    height: f64,
    mode: u32,
    seed: u64,
    out: *mut *mut SarDataset,
) -> SarStatus {
    guard(|| {
        let mode = match mode {
            m if m == SarMode::Raw as u32 => Mode::Raw,
            m if m == SarMode::Backprojected as u32 => Mode::Backprojected,
            m => return Err(Fail::Arg(format!("unknown mode {m}"))),
        };
        let d = gen_shape_dataset(n_per_class, height, mode, seed, &SimConfig::default())?;
        put(out, SarDataset { inner: d })
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sar_dataset_load(path: *const c_char, out: *mut *mut SarDataset) -> SarStatus {
    guard(|| {
        let d = load_dataset(&path_arg(path)?)?;
        put(out, SarDataset { inner: d })
    })
}

/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sar_dataset_save(ds: *const SarDataset, path: *const c_char) -> SarStatus {
    guard(|| {
        let d = get(ds, "dataset")?;
        save_dataset(&path_arg(path)?, &d.inner)?;
        Ok(())
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `ds` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn sar_dataset_len(ds: *const SarDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// Side of the square inputs, or 0 for a null handle.
///
/// # Safety
/// `ds` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn sar_dataset_input_size(ds: *const SarDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.input_size())
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `ds` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn sar_dataset_class_count(ds: *const SarDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.class_count())
}

/// Copies sample `index` into `buf` (row-major, `P²` floats) and its 1-based label into `label`.
///
/// # Safety
/// `buf` must hold `len` floats; `label` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sar_dataset_sample(
    ds: *const SarDataset,
    index: usize,
    label: *mut u8,
    buf: *mut f32,
    len: usize,
) -> SarStatus {
    guard(|| {
        let d = get(ds, "dataset")?;
        let s = d
            .inner
            .samples()
            .get(index)
            .ok_or_else(|| Fail::Arg(format!("sample index {index} out of range")))?;
        out_slice(buf, len, s.input.len())?.copy_from_slice(&s.input);
        *get_mut(label, "label")? = s.label;
        Ok(())
    })
}

/// # Safety
/// `ds` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn sar_dataset_free(ds: *mut SarDataset) {
    free(ds)
}

/// Trains a network (`K_f = 13`, `filters` filters) on the dataset's training
/// split with ADAM defaults apart from the given rate, batch size and epochs.
///
/// # Safety
/// `ds` must be valid; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sar_model_train(
    ds: *const SarDataset,
    filters: usize,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    seed: u64,
    out: *mut *mut SarModel,
) -> SarStatus {
    guard(|| {
        let d = get(ds, "dataset")?;
        let hyper = Hyper::new(d.inner.input_size(), 13, filters, d.inner.class_count())?;
        let cfg = TrainConfig {
            learning_rate,
            batch_size,
            max_epochs: epochs,
            seed,
            ..TrainConfig::default()
        };
        let outcome = train(&d.inner, hyper, &cfg)?;
        put(out, SarModel { inner: outcome.params })
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sar_model_load(path: *const c_char, out: *mut *mut SarModel) -> SarStatus {
    guard(|| {
        let p = load_checkpoint(&path_arg(path)?)?;
        put(out, SarModel { inner: p })
    })
}

/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sar_model_save(model: *const SarModel, path: *const c_char) -> SarStatus {
    guard(|| {
        let m = get(model, "model")?;
        save_checkpoint(&path_arg(path)?, &m.inner)?;
        Ok(())
    })
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `model` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn sar_model_class_count(model: *const SarModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.hyper().classes)
}

/// Inference-mode class probabilities for one `P × P` input.
///
/// # Safety
/// `input` must hold `input_len` floats and `probs` `probs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sar_model_predict(
    model: *const SarModel,
    input: *const f32,
    input_len: usize,
    probs: *mut f64,
    probs_len: usize,
) -> SarStatus {
    guard(|| {
        let m = get(model, "model")?;
        if input.is_null() {
            return Err(Fail::Null("input"));
        }
        let p = m.inner.hyper().input_size;
        if input_len != p * p {
            return Err(Fail::Lib(Error::ShapeMismatch(format!(
                "input has {input_len} values, model expects {}",
                p * p
            ))));
        }
        let x = Tensor::from_image(p, std::slice::from_raw_parts(input, input_len))?;
        let pr = m.inner.predict_proba(&x)?;
        out_slice(probs, probs_len, pr.len())?.copy_from_slice(&pr);
        Ok(())
    })
}

/// Test-split accuracy in `[0, 1]`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sar_model_evaluate(
    model: *const SarModel,
    ds: *const SarDataset,
    seed: u64,
    accuracy: *mut f64,
) -> SarStatus {
    guard(|| {
        let m = get(model, "model")?;
        let d = get(ds, "dataset")?;
        let cm = evaluate(&m.inner, &d.inner, seed)?;
        *get_mut(accuracy, "accuracy")? = cm.accuracy();
        Ok(())
    })
}

/// # Safety
/// `model` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn sar_model_free(model: *mut SarModel) {
    free(model)
}
