use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use fsd_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        fsd_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn sphere_extraction_round_trip() {
    let mut s: *mut FsdSurfaces = ptr::null_mut();
    let status =
        unsafe { fsd_extract_shape(FsdShapeKind::Sphere, [0.5].as_ptr(), 1, 5, 1.0, &mut s) };
    assert_eq!(status, FsdStatus::Ok);
    unsafe {
        assert_eq!(fsd_surfaces_count(s), 1);
        let n = fsd_surface_point_count(s, 0);
        assert!(n > 0);
        let mut xyz = vec![0.0; 3 * n];
        assert_eq!(
            fsd_surface_copy_points(s, 0, xyz.as_mut_ptr(), n),
            FsdStatus::Ok
        );
        for p in xyz.chunks_exact(3) {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((r - 0.5).abs() < 1e-9);
        }
        let mut normals = vec![0.0; 3 * n];
        assert_eq!(
            fsd_surface_copy_normals(s, 0, normals.as_mut_ptr(), n),
            FsdStatus::Ok
        );
        assert_eq!(
            fsd_surface_copy_points(s, 0, xyz.as_mut_ptr(), n - 1),
            FsdStatus::InvalidArgument
        );
        assert_eq!(fsd_surface_point_count(s, 9), 0);
        fsd_surfaces_free(s);
    }
}

#[test]
fn decoder_generate_eval_extract() {
    let mut d: *mut FsdDecoder = ptr::null_mut();
    unsafe {
        assert_eq!(fsd_decoder_generate(5, 4, 16, 3, 1, &mut d), FsdStatus::Ok);
        assert_eq!(fsd_decoder_latent_dim(d), 4);
        let z = [0.0; 4];
        let pts = [0.0, 0.0, 0.0, 0.5, 0.5, 0.5];
        let mut v = [f64::NAN; 2];
        assert_eq!(
            fsd_decoder_eval(d, z.as_ptr(), 4, pts.as_ptr(), 2, v.as_mut_ptr()),
            FsdStatus::Ok
        );
        assert!(v.iter().all(|x| x.abs() <= 1.0));

        assert_eq!(
            fsd_decoder_eval(d, z.as_ptr(), 3, pts.as_ptr(), 2, v.as_mut_ptr()),
            FsdStatus::InvalidArgument
        );
        assert!(last_error().contains("latent"));

        let latents = [0.0; 8];
        let mut s: *mut FsdSurfaces = ptr::null_mut();
        assert_eq!(
            fsd_extract_decoder(d, latents.as_ptr(), 2, 4, 1.0, &mut s),
            FsdStatus::Ok
        );
        assert_eq!(fsd_surfaces_count(s), 2);
        assert_eq!(fsd_surface_point_count(s, 0), fsd_surface_point_count(s, 1));
        fsd_surfaces_free(s);
        fsd_decoder_free(d);
    }
}

#[test]
fn load_errors() {
    let mut d: *mut FsdDecoder = ptr::null_mut();
    let missing = CString::new("/definitely/not/here.fsdw").unwrap();
    assert_eq!(
        unsafe { fsd_decoder_load(missing.as_ptr(), &mut d) },
        FsdStatus::Io
    );
    assert!(d.is_null());

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.fsdw");
    std::fs::write(&bad, b"FSDWxxxx").unwrap();
    let path = CString::new(bad.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { fsd_decoder_load(path.as_ptr(), &mut d) },
        FsdStatus::Format
    );
    assert_eq!(
        unsafe { fsd_decoder_load(ptr::null(), &mut d) },
        FsdStatus::NullPointer
    );
}

#[test]
fn chamfer_and_orthogonalize() {
    let a = [0.0, 0.0, 0.0];
    let b = [0.1, 0.0, 0.0];
    let mut v = 0.0;
    for mode in [FsdChamferMode::ClampedInlier, FsdChamferMode::Hinge] {
        assert_eq!(
            unsafe { fsd_chamfer(a.as_ptr(), 1, b.as_ptr(), 1, 0.2, mode, &mut v) },
            FsdStatus::Ok
        );
        assert!((v - 0.2).abs() < 1e-15);
    }
    assert_eq!(
        unsafe {
            fsd_chamfer(
                a.as_ptr(),
                1,
                b.as_ptr(),
                1,
                0.0,
                FsdChamferMode::ClampedInlier,
                &mut v,
            )
        },
        FsdStatus::InvalidArgument
    );

    let m = [2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0];
    let mut r = [0.0; 9];
    assert_eq!(
        unsafe { fsd_orthogonalize(m.as_ptr(), r.as_mut_ptr()) },
        FsdStatus::Ok
    );
    assert_eq!(r, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let zero = [0.0; 9];
    assert_eq!(
        unsafe { fsd_orthogonalize(zero.as_ptr(), r.as_mut_ptr()) },
        FsdStatus::Degenerate
    );
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(fsd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/fsd.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "fsd_last_error_message",
        "fsd_decoder_load",
        "fsd_decoder_generate",
        "fsd_decoder_eval",
        "fsd_decoder_free",
        "fsd_extract_decoder",
        "fsd_extract_shape",
        "fsd_surface_copy_points",
        "fsd_surfaces_free",
        "fsd_chamfer",
        "fsd_orthogonalize",
        "typedef struct FsdDecoder FsdDecoder",
        "FSD_STATUS_OK = 0",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

/// Builds and runs a C program against the static library when a C
/// compiler and the archive are available.
#[test]
fn c_program_links_against_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let archive = profile_dir.join("libfsd_ffi.a");
    if !archive.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "fsd.h"
int main(void) {
    double r = 0.5;
    FsdSurfaces *s = NULL;
    if (fsd_extract_shape(FSD_SHAPE_KIND_SPHERE, &r, 1, 4, 1.0, &s) != FSD_STATUS_OK) return 1;
    size_t n = fsd_surface_point_count(s, 0);
    fsd_surfaces_free(s);
    FsdDecoder *d = NULL;
    if (fsd_decoder_load("/missing", &d) != FSD_STATUS_IO) return 2;
    char msg[128];
    fsd_last_error_message(msg, sizeof msg);
    printf("%zu\n", n);
    return n > 0 ? 0 : 3;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("demo");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success());
    let n: usize = String::from_utf8_lossy(&run.stdout).trim().parse().unwrap();
    assert!(n > 0);
}
