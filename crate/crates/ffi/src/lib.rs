//! C ABI over the `egoview` pipeline.
//!
//! Conventions:
//!
//! * Every fallible function returns an [`EgoviewStatus`]; results come back
//!   through out-pointers, which are written only on success.
//! * On failure, [`egoview_last_error`] returns a message for the calling
//!   thread, valid until that thread's next failing call.
//! * Handles (`EgoviewImage`, `EgoviewDepthMap`, `EgoviewSparseMap`) are
//!   opaque; release each with its `_free` function. Freeing NULL is a no-op.
//! * Images are row-major interleaved RGB doubles in `[0, 1]`; depth maps are
//!   row-major doubles, with values `<= 0` or non-finite meaning invalid.
//! * Keypoint arrays are `n * 3` doubles (x, y, z in meters), `n` = 21 or 42.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use egoview::alignment::{umeyama_points, HandLayout, HandPose};
use egoview::calibration::{compute_scale, hand_region_from_depth};
use egoview::geometry::{CameraIntrinsics, SimilarityTransform, SparseEgoMap};
use egoview::image::{DepthMap, RgbImage};
use egoview::io::{self, SparseMapPaths};
use egoview::metrics::{psnr, ssim, SsimParams};
use egoview::reprojection::{build_sparse_ego_map, ExoObservation};
use egoview::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgoviewStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    EmptyRegion = 4,
    InvalidSample = 5,
    DegenerateConfiguration = 6,
    NoValidDepth = 7,
    Parse = 8,
    Io = 9,
    Internal = 10,
}

impl From<&Error> for EgoviewStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } | Error::ShapeMismatch { .. } => Self::DimensionMismatch,
            Error::Validation { .. } | Error::TimestepOutOfRange { .. } => Self::InvalidArgument,
            Error::EmptyRegion => Self::EmptyRegion,
            Error::InvalidSample { .. } => Self::InvalidSample,
            Error::InsufficientPoints { .. } | Error::DegenerateConfiguration(_) => {
                Self::DegenerateConfiguration
            }
            Error::NoValidDepth => Self::NoValidDepth,
            Error::Parse { .. } => Self::Parse,
            Error::Io { .. } => Self::Io,
            Error::Denoiser(_) => Self::Internal,
        }
    }
}

/// Pinhole intrinsics in pixels; principal point in pixel-center coordinates.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EgoviewIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// `x -> scale * R x + t`, rotation row-major.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EgoviewTransform {
    pub scale: f64,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl From<&SimilarityTransform> for EgoviewTransform {
    fn from(t: &SimilarityTransform) -> Self {
        let doc = io::TransformDocument::from(t);
        Self {
            scale: doc.scale,
            rotation: doc.rotation,
            translation: doc.translation,
        }
    }
}

pub struct EgoviewImage(RgbImage);

pub struct EgoviewDepthMap(DepthMap);

pub struct EgoviewSparseMap {
    map: SparseEgoMap,
    transform: SimilarityTransform,
    scale: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let clean = message.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).expect("interior NULs removed"));
}

struct Failure(EgoviewStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(EgoviewStatus::from(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(EgoviewStatus::NullPointer, format!("{name} is NULL"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(EgoviewStatus::InvalidArgument, message.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EgoviewStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EgoviewStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            EgoviewStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| invalid(format!("{name} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn grid_len(width: usize, height: usize, channels: usize) -> Result<usize, Failure> {
    width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| invalid("dimensions overflow"))
}

fn intrinsics(k: &EgoviewIntrinsics) -> Result<CameraIntrinsics, Failure> {
    Ok(CameraIntrinsics::new(k.fx, k.fy, k.cx, k.cy, k.width, k.height)?)
}

fn hand_pose(points: &[f64]) -> Result<HandPose, Failure> {
    let layout = match points.len() / 3 {
        21 => HandLayout::SingleHand21,
        42 => HandLayout::TwoHands42,
        n => return Err(invalid(format!("keypoint count must be 21 or 42, got {n}"))),
    };
    let pts = points
        .chunks_exact(3)
        .map(|c| egoview::nalgebra::Vector3::new(c[0], c[1], c[2]))
        .collect();
    Ok(HandPose::new(layout, pts)?)
}

/// Message describing the calling thread's most recent failure ("" if none).
#[no_mangle]
pub extern "C" fn egoview_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn egoview_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an image from `width * height * 3` interleaved RGB values in `[0, 1]`.
///
/// # Safety
/// `rgb` must point to `width * height * 3` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn egoview_image_new(
    width: usize,
    height: usize,
    rgb: *const f64,
    out: *mut *mut EgoviewImage,
) -> EgoviewStatus {
    guard(|| {
        let values = slice(rgb, grid_len(width, height, 3)?, "rgb")?;
        let px = values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let img = RgbImage::from_pixels(width, height, px)?;
        write_out(out, Box::into_raw(Box::new(EgoviewImage(img))), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn egoview_image_load_png(
    path: *const c_char,
    out: *mut *mut EgoviewImage,
) -> EgoviewStatus {
    guard(|| {
        let img = io::load_rgb(&path_arg(path, "path")?)?;
        write_out(out, Box::into_raw(Box::new(EgoviewImage(img))), "out")
    })
}

/// # Safety
/// `image` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn egoview_image_save_png(
    image: *const EgoviewImage,
    path: *const c_char,
) -> EgoviewStatus {
    guard(|| Ok(io::save_rgb(&deref(image, "image")?.0, &path_arg(path, "path")?)?))
}

/// Writes width and height of `image`.
///
/// # Safety
/// `image` must be a live handle; the out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn egoview_image_dims(
    image: *const EgoviewImage,
    width: *mut usize,
    height: *mut usize,
) -> EgoviewStatus {
    guard(|| {
        let (w, h) = deref(image, "image")?.0.dims();
        write_out(width, w, "width")?;
        write_out(height, h, "height")
    })
}

/// Copies interleaved RGB into `out`, which must hold `len >= width * height * 3` doubles.
///
/// # Safety
/// `image` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn egoview_image_copy_rgb(
    image: *const EgoviewImage,
    out: *mut f64,
    len: usize,
) -> EgoviewStatus {
    guard(|| {
        let img = &deref(image, "image")?.0;
        copy_into(img.pixels().iter().flatten().copied(), img.pixels().len() * 3, out, len)
    })
}

unsafe fn copy_into<T>(values: impl Iterator<Item = T>, n: usize, out: *mut T, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len < n {
        return Err(invalid(format!("buffer holds {len} values, need {n}")));
    }
    for (i, v) in values.enumerate() {
        out.add(i).write(v);
    }
    Ok(())
}

/// # Safety
/// `image` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn egoview_image_free(image: *mut EgoviewImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Creates a depth map from `width * height` row-major values.
///
/// # Safety
/// `values` must point to `width * height` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn egoview_depth_map_new(
    width: usize,
    height: usize,
    values: *const f64,
    out: *mut *mut EgoviewDepthMap,
) -> EgoviewStatus {
    guard(|| {
        let v = slice(values, grid_len(width, height, 1)?, "values")?;
        let d = DepthMap::from_values(width, height, v.to_vec())?;
        write_out(out, Box::into_raw(Box::new(EgoviewDepthMap(d))), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn egoview_depth_map_load_pfm(
    path: *const c_char,
    out: *mut *mut EgoviewDepthMap,
) -> EgoviewStatus {
    guard(|| {
        let d = io::load_depth(&path_arg(path, "path")?)?;
        write_out(out, Box::into_raw(Box::new(EgoviewDepthMap(d))), "out")
    })
}

/// # Safety
/// `depth` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn egoview_depth_map_save_pfm(
    depth: *const EgoviewDepthMap,
    path: *const c_char,
) -> EgoviewStatus {
    guard(|| Ok(io::save_depth(&deref(depth, "depth")?.0, &path_arg(path, "path")?)?))
}

/// # Safety
/// `depth` must be a live handle; the out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn egoview_depth_map_dims(
    depth: *const EgoviewDepthMap,
    width: *mut usize,
    height: *mut usize,
) -> EgoviewStatus {
    guard(|| {
        let (w, h) = deref(depth, "depth")?.0.dims();
        write_out(width, w, "width")?;
        write_out(height, h, "height")
    })
}

/// # Safety
/// `depth` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn egoview_depth_map_copy_values(
    depth: *const EgoviewDepthMap,
    out: *mut f64,
    len: usize,
) -> EgoviewStatus {
    guard(|| {
        let v = deref(depth, "depth")?.0.values();
        copy_into(v.iter().copied(), v.len(), out, len)
    })
}

/// # Safety
/// `depth` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn egoview_depth_map_free(depth: *mut EgoviewDepthMap) {
    if !depth.is_null() {
        drop(Box::from_raw(depth));
    }
}

/// Median of `hand / (est + delta)` over pixels where `hand_depth` is valid.
///
/// # Safety
/// Handles must be live; `out_scale` writable.
#[no_mangle]
pub unsafe extern "C" fn egoview_compute_scale(
    hand_depth: *const EgoviewDepthMap,
    est_depth: *const EgoviewDepthMap,
    delta: f64,
    out_scale: *mut f64,
) -> EgoviewStatus {
    guard(|| {
        let hand = &deref(hand_depth, "hand_depth")?.0;
        let est = &deref(est_depth, "est_depth")?.0;
        let s = compute_scale(hand, est, &hand_region_from_depth(hand), delta)?;
        write_out(out_scale, s.value, "out_scale")
    })
}

/// Least-squares similarity transform taking `source` onto `target`
/// (`n` points each, `n * 3` doubles).
///
/// # Safety
/// `source` and `target` must point to `n * 3` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn egoview_umeyama(
    source: *const f64,
    target: *const f64,
    n: usize,
    out: *mut EgoviewTransform,
) -> EgoviewStatus {
    guard(|| {
        let len = grid_len(n, 3, 1)?;
        let to_points = |s: &[f64]| -> Vec<_> {
            s.chunks_exact(3)
                .map(|c| egoview::nalgebra::Vector3::new(c[0], c[1], c[2]))
                .collect()
        };
        let src = to_points(slice(source, len, "source")?);
        let dst = to_points(slice(target, len, "target")?);
        let t = umeyama_points(&src, &dst)?;
        write_out(out, EgoviewTransform::from(&t), "out")
    })
}

/// Builds the sparse egocentric map. `hand_depth` may be NULL, in which case
/// `depth` is taken as metric.
///
/// # Safety
/// Handles must be live; keypoint arrays must hold `n_keypoints * 3` doubles.
#[no_mangle]
pub unsafe extern "C" fn egoview_build_sparse_map(
    image: *const EgoviewImage,
    depth: *const EgoviewDepthMap,
    hand_depth: *const EgoviewDepthMap,
    exo_intrinsics: *const EgoviewIntrinsics,
    exo_keypoints: *const f64,
    ego_keypoints: *const f64,
    n_keypoints: usize,
    ego_intrinsics: *const EgoviewIntrinsics,
    delta: f64,
    splat_radius: usize,
    out: *mut *mut EgoviewSparseMap,
) -> EgoviewStatus {
    guard(|| {
        let len = grid_len(n_keypoints, 3, 1)?;
        let exo_pose = hand_pose(slice(exo_keypoints, len, "exo_keypoints")?)?;
        let ego_pose = hand_pose(slice(ego_keypoints, len, "ego_keypoints")?)?;
        let exo_k = intrinsics(deref(exo_intrinsics, "exo_intrinsics")?)?;
        let ego_k = intrinsics(deref(ego_intrinsics, "ego_intrinsics")?)?;
        let obs = ExoObservation {
            image: &deref(image, "image")?.0,
            depth: &deref(depth, "depth")?.0,
            intrinsics: &exo_k,
            hand_pose: &exo_pose,
            hand_depth: hand_depth.as_ref().map(|d| &d.0),
        };
        let res = build_sparse_ego_map(&obs, &ego_pose, &ego_k, delta, splat_radius)?;
        let handle = EgoviewSparseMap {
            map: res.map,
            transform: res.exo_to_ego,
            scale: res.scale.value,
        };
        write_out(out, Box::into_raw(Box::new(handle)), "out")
    })
}

/// Fraction of pixels covered by at least one projected point.
///
/// # Safety
/// `map` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn egoview_sparse_map_valid_fraction(
    map: *const EgoviewSparseMap,
    out: *mut f64,
) -> EgoviewStatus {
    guard(|| write_out(out, deref(map, "map")?.map.valid_fraction(), "out"))
}

/// Estimated exocentric-to-egocentric transform and depth scale used for the map.
///
/// # Safety
/// `map` must be a live handle; the out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn egoview_sparse_map_calibration(
    map: *const EgoviewSparseMap,
    transform: *mut EgoviewTransform,
    scale: *mut f64,
) -> EgoviewStatus {
    guard(|| {
        let m = deref(map, "map")?;
        write_out(transform, EgoviewTransform::from(&m.transform), "transform")?;
        write_out(scale, m.scale, "scale")
    })
}

/// Copies the map's RGB image into a new image handle.
///
/// # Safety
/// `map` must be a live handle; `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn egoview_sparse_map_image(
    map: *const EgoviewSparseMap,
    out: *mut *mut EgoviewImage,
) -> EgoviewStatus {
    guard(|| {
        let img = deref(map, "map")?.map.rgb.clone();
        write_out(out, Box::into_raw(Box::new(EgoviewImage(img))), "out")
    })
}

/// Copies the validity mask as bytes (1 = valid) into `out` of `len` bytes.
///
/// # Safety
/// `map` must be a live handle; `out` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn egoview_sparse_map_copy_mask(
    map: *const EgoviewSparseMap,
    out: *mut u8,
    len: usize,
) -> EgoviewStatus {
    guard(|| {
        let v = deref(map, "map")?.map.validity.values();
        copy_into(v.iter().map(|b| u8::from(*b)), v.len(), out, len)
    })
}

/// Writes `<dir>/<stem>_rgb.png`, `<stem>_mask.png` and `<stem>_depth.pfm`.
///
/// # Safety
/// `map` must be a live handle; `dir` and `stem` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn egoview_sparse_map_save(
    map: *const EgoviewSparseMap,
    dir: *const c_char,
    stem: *const c_char,
) -> EgoviewStatus {
    guard(|| {
        let m = deref(map, "map")?;
        let dir = path_arg(dir, "dir")?;
        let stem = path_arg(stem, "stem")?;
        let paths = SparseMapPaths::in_dir(&dir, &stem.to_string_lossy());
        Ok(io::save_sparse_map(&m.map, &paths)?)
    })
}

/// # Safety
/// `map` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn egoview_sparse_map_free(map: *mut EgoviewSparseMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// PSNR in dB for a peak value of 1; +infinity for identical images.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn egoview_psnr(
    a: *const EgoviewImage,
    b: *const EgoviewImage,
    out: *mut f64,
) -> EgoviewStatus {
    guard(|| {
        let v = psnr(&deref(a, "a")?.0, &deref(b, "b")?.0, 1.0)?;
        write_out(out, v, "out")
    })
}

/// Mean SSIM over channels (11x11 Gaussian window, sigma 1.5).
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn egoview_ssim(
    a: *const EgoviewImage,
    b: *const EgoviewImage,
    out: *mut f64,
) -> EgoviewStatus {
    guard(|| {
        let v = ssim(&deref(a, "a")?.0, &deref(b, "b")?.0, &SsimParams::default())?;
        write_out(out, v, "out")
    })
}
