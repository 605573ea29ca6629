//! C interface to `fsd-core`.
//!
//! Every function returns an [`FsdStatus`]. On failure a message is kept per
//! thread and can be read with [`fsd_last_error_message`]. Handles are opaque
//! and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fsd_core::extract::{extract_batched, ExtractedSurface, ExtractionConfig};
use fsd_core::geometry::svd_orthogonalize;
use fsd_core::losses::{chamfer_thresholded, ChamferConfig, ChamferMode};
use fsd_core::sdf::{
    gen_random_decoder, gen_shape_decoder, load_weights_any, AnalyticField, Field, LatentCode,
    MlpSdfDecoder,
};
use fsd_core::{FsdError, Mat3, Vec3};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FsdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Format = 3,
    Io = 4,
    Degenerate = 5,
    Consistency = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FsdShapeKind {
    /// `params = [radius]`
    Sphere = 0,
    /// `params = [hx, hy, hz]`
    Box = 1,
    /// `params = [major_radius, minor_radius]`
    Torus = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FsdChamferMode {
    ClampedInlier = 0,
    Hinge = 1,
}

/// Loaded or generated decoder.
pub struct FsdDecoder(MlpSdfDecoder);

/// Extracted surfaces, one per object.
pub struct FsdSurfaces(Vec<ExtractedSurface>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &FsdError) -> FsdStatus {
    match e {
        FsdError::InvalidArgument(_) => FsdStatus::InvalidArgument,
        FsdError::Format { .. } | FsdError::Json(_) => FsdStatus::Format,
        FsdError::Io(_) => FsdStatus::Io,
        FsdError::Degenerate(_) => FsdStatus::Degenerate,
        FsdError::Consistency(_) => FsdStatus::Consistency,
    }
}

struct Fail(FsdStatus, String);

impl From<FsdError> for Fail {
    fn from(e: FsdError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FsdStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FsdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FsdStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FsdStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn points_of(xyz: &[f64]) -> Vec<Vec3> {
    xyz.chunks_exact(3)
        .map(|c| Vec3::new(c[0], c[1], c[2]))
        .collect()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fsd_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Loads binary or JSON weights from `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fsd_decoder_load(
    path: *const c_char,
    out: *mut *mut FsdDecoder,
) -> FsdStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(FsdStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let bytes = std::fs::read(path).map_err(|e| Fail(FsdStatus::Io, format!("{path}: {e}")))?;
        let decoder = load_weights_any(&bytes)?;
        *out = Box::into_raw(Box::new(FsdDecoder(decoder)));
        Ok(())
    })
}

/// Seeded random decoder; `shape_calibrated != 0` gives a field with a zero
/// level set inside the unit cube.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fsd_decoder_generate(
    seed: u64,
    latent_dim: usize,
    hidden_dim: usize,
    depth: usize,
    shape_calibrated: i32,
    out: *mut *mut FsdDecoder,
) -> FsdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if latent_dim == 0 || hidden_dim == 0 || depth == 0 {
            return Err(Fail(
                FsdStatus::InvalidArgument,
                "dimensions must be positive".into(),
            ));
        }
        let decoder = if shape_calibrated != 0 {
            gen_shape_decoder(seed, latent_dim, hidden_dim, depth)
        } else {
            gen_random_decoder(seed, latent_dim, hidden_dim, depth)
        };
        *out = Box::into_raw(Box::new(FsdDecoder(decoder)));
        Ok(())
    })
}

/// # Safety
/// `decoder` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fsd_decoder_latent_dim(decoder: *const FsdDecoder) -> usize {
    decoder.as_ref().map_or(0, |d| d.0.latent_dim())
}

/// # Safety
/// `decoder` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsd_decoder_free(decoder: *mut FsdDecoder) {
    if !decoder.is_null() {
        drop(Box::from_raw(decoder));
    }
}

/// Evaluates the field of one latent at `num_points` xyz triples.
///
/// # Safety
/// Pointers must be valid for the stated lengths (`points`: `3 * num_points`,
/// `out_values`: `num_points`).
#[no_mangle]
pub unsafe extern "C" fn fsd_decoder_eval(
    decoder: *const FsdDecoder,
    latent: *const f64,
    latent_len: usize,
    points: *const f64,
    num_points: usize,
    out_values: *mut f64,
) -> FsdStatus {
    guard(|| {
        let d = decoder.as_ref().ok_or_else(|| null("decoder"))?;
        let z = LatentCode::new(slice(latent, latent_len, "latent")?.to_vec())?;
        let pts = points_of(slice(points, 3 * num_points, "points")?);
        if num_points > 0 && out_values.is_null() {
            return Err(null("out_values"));
        }
        let values = d.0.eval(&z, &pts)?;
        if num_points > 0 {
            ptr::copy_nonoverlapping(values.as_ptr(), out_values, num_points);
        }
        Ok(())
    })
}

fn config(lod_end: u32, prune_factor: f64) -> Result<ExtractionConfig, Fail> {
    let cfg = ExtractionConfig {
        lod_end,
        prune_factor,
        ..Default::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Batched extraction for `num_objects` latents stored back to back.
///
/// # Safety
/// `latents` must hold `num_objects * latent_dim` values; `out` valid for one
/// write.
#[no_mangle]
pub unsafe extern "C" fn fsd_extract_decoder(
    decoder: *const FsdDecoder,
    latents: *const f64,
    num_objects: usize,
    lod_end: u32,
    prune_factor: f64,
    out: *mut *mut FsdSurfaces,
) -> FsdStatus {
    guard(|| {
        let d = decoder.as_ref().ok_or_else(|| null("decoder"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let dim = d.0.latent_dim();
        let codes = slice(latents, num_objects * dim, "latents")?
            .chunks_exact(dim)
            .map(|c| LatentCode::new(c.to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        let fields = codes
            .iter()
            .map(|z| Field::neural(&d.0, z))
            .collect::<Result<Vec<_>, _>>()?;
        let e = extract_batched(&fields, &config(lod_end, prune_factor)?)?;
        *out = Box::into_raw(Box::new(FsdSurfaces(e.surfaces)));
        Ok(())
    })
}

/// Extraction of a single analytic shape.
///
/// # Safety
/// `params` must hold `num_params` values; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fsd_extract_shape(
    kind: FsdShapeKind,
    params: *const f64,
    num_params: usize,
    lod_end: u32,
    prune_factor: f64,
    out: *mut *mut FsdSurfaces,
) -> FsdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = slice(params, num_params, "params")?;
        let bad = || {
            Fail(
                FsdStatus::InvalidArgument,
                "wrong parameter count for shape".into(),
            )
        };
        let field = match (kind, p) {
            (FsdShapeKind::Sphere, [r]) => AnalyticField::sphere(*r)?,
            (FsdShapeKind::Box, [x, y, z]) => AnalyticField::cuboid([*x, *y, *z])?,
            (FsdShapeKind::Torus, [a, b]) => AnalyticField::torus(*a, *b)?,
            _ => return Err(bad()),
        };
        let e = extract_batched(&[Field::Analytic(field)], &config(lod_end, prune_factor)?)?;
        *out = Box::into_raw(Box::new(FsdSurfaces(e.surfaces)));
        Ok(())
    })
}

/// # Safety
/// `surfaces` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fsd_surfaces_count(surfaces: *const FsdSurfaces) -> usize {
    surfaces.as_ref().map_or(0, |s| s.0.len())
}

/// Point count of object `index`, zero when out of range.
///
/// # Safety
/// `surfaces` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fsd_surface_point_count(
    surfaces: *const FsdSurfaces,
    index: usize,
) -> usize {
    surfaces
        .as_ref()
        .and_then(|s| s.0.get(index))
        .map_or(0, |s| s.len())
}

unsafe fn copy_vectors(
    surfaces: *const FsdSurfaces,
    index: usize,
    out: *mut f64,
    capacity_points: usize,
    pick: fn(&ExtractedSurface) -> &[Vec3],
) -> FsdStatus {
    guard(|| {
        let s = surfaces.as_ref().ok_or_else(|| null("surfaces"))?;
        let surface =
            s.0.get(index)
                .ok_or_else(|| Fail(FsdStatus::InvalidArgument, format!("no object {index}")))?;
        let v = pick(surface);
        if capacity_points < v.len() {
            return Err(Fail(
                FsdStatus::InvalidArgument,
                format!("buffer holds {capacity_points} points, {} needed", v.len()),
            ));
        }
        if v.is_empty() {
            return Ok(());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let flat = std::slice::from_raw_parts_mut(out, 3 * v.len());
        for (dst, p) in flat.chunks_exact_mut(3).zip(v) {
            dst.copy_from_slice(&[p.x, p.y, p.z]);
        }
        Ok(())
    })
}

/// Copies the projected points of object `index` as xyz triples.
///
/// # Safety
/// `out` must be valid for `3 * capacity_points` writes.
#[no_mangle]
pub unsafe extern "C" fn fsd_surface_copy_points(
    surfaces: *const FsdSurfaces,
    index: usize,
    out: *mut f64,
    capacity_points: usize,
) -> FsdStatus {
    copy_vectors(surfaces, index, out, capacity_points, |s| &s.points)
}

/// Copies the unit normals of object `index` as xyz triples.
///
/// # Safety
/// `out` must be valid for `3 * capacity_points` writes.
#[no_mangle]
pub unsafe extern "C" fn fsd_surface_copy_normals(
    surfaces: *const FsdSurfaces,
    index: usize,
    out: *mut f64,
    capacity_points: usize,
) -> FsdStatus {
    copy_vectors(surfaces, index, out, capacity_points, |s| &s.normals)
}

/// # Safety
/// `surfaces` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsd_surfaces_free(surfaces: *mut FsdSurfaces) {
    if !surfaces.is_null() {
        drop(Box::from_raw(surfaces));
    }
}

/// Thresholded Chamfer distance between two xyz clouds.
///
/// # Safety
/// `a` and `b` must hold `3 * na` and `3 * nb` values; `out_value` valid for
/// one write.
#[no_mangle]
pub unsafe extern "C" fn fsd_chamfer(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    epsilon: f64,
    mode: FsdChamferMode,
    out_value: *mut f64,
) -> FsdStatus {
    guard(|| {
        if out_value.is_null() {
            return Err(null("out_value"));
        }
        let pa = points_of(slice(a, 3 * na, "a")?);
        let pb = points_of(slice(b, 3 * nb, "b")?);
        let cfg = ChamferConfig {
            epsilon,
            mode: match mode {
                FsdChamferMode::ClampedInlier => ChamferMode::ClampedInlier,
                FsdChamferMode::Hinge => ChamferMode::Hinge,
            },
        };
        *out_value = chamfer_thresholded(&pa, &pb, &cfg)?.value;
        Ok(())
    })
}

/// Nearest rotation to a row-major 3x3 matrix.
///
/// # Safety
/// `matrix` and `out_rotation` must each hold 9 values.
#[no_mangle]
pub unsafe extern "C" fn fsd_orthogonalize(
    matrix: *const f64,
    out_rotation: *mut f64,
) -> FsdStatus {
    guard(|| {
        let m = slice(matrix, 9, "matrix")?;
        if out_rotation.is_null() {
            return Err(null("out_rotation"));
        }
        let r = svd_orthogonalize(&Mat3::from_row_slice(m))?;
        let out = std::slice::from_raw_parts_mut(out_rotation, 9);
        for i in 0..3 {
            for j in 0..3 {
                out[3 * i + j] = r[(i, j)];
            }
        }
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fsd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
