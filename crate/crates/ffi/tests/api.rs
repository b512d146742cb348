use absslice_ffi::*;
use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

const FIG1: &str = "a := 1;\nb := b + 1;\nc := c + 2;\ne := e + 1;\nd := 2 * c + b + a - a;\n";

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn parse(src: &str) -> *mut AbssliceProgram {
    let mut p = ptr::null_mut();
    assert_eq!(absslice_program_parse(cstr(src).as_ptr(), &mut p), AbssliceStatus::Ok);
    p
}

unsafe fn criterion(text: &str, p: *const AbssliceProgram) -> *mut AbssliceCriterion {
    let mut c = ptr::null_mut();
    assert_eq!(absslice_criterion_parse(cstr(text).as_ptr(), p, &mut c), AbssliceStatus::Ok);
    c
}

unsafe fn last_error() -> String {
    CStr::from_ptr(absslice_last_error()).to_string_lossy().into_owned()
}

#[test]
fn slice_round_trip() {
    unsafe {
        let p = parse(FIG1);
        let c = criterion("range=a:-2..2,b:-2..2,c:-2..2,e:-2..2\nvars=d\nabs=d:par", p);
        let mut s = ptr::null_mut();
        assert_eq!(absslice_slice(p, c, 4, 10_000, false, &mut s), AbssliceStatus::Ok);
        let mut buf = [0u32; 2];
        assert_eq!(absslice_slice_kept(s, buf.as_mut_ptr(), 2), 2);
        assert_eq!(buf, [2, 5]);
        assert_eq!(absslice_slice_kept(s, ptr::null_mut(), 0), 2);

        let json = absslice_slice_report_json(s);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["erased"], serde_json::json!([1, 3, 4]));
        absslice_string_free(json);

        let q = absslice_slice_program(s);
        let text = absslice_program_to_string(q);
        assert!(CStr::from_ptr(text).to_str().unwrap().contains("b := b + 1;"));
        absslice_string_free(text);
        let mut holds = false;
        assert_eq!(absslice_check(p, q, c, 4, 10_000, &mut holds), AbssliceStatus::Ok);
        assert!(holds);
        // The slice is not a slice of itself under exact observation of d.
        let exact = criterion("range=a:-2..2,b:-2..2,c:-2..2,e:-2..2\nvars=d", p);
        assert_eq!(absslice_check(p, q, exact, 4, 10_000, &mut holds), AbssliceStatus::Ok);
        assert!(!holds);

        let mut conc = ptr::null_mut();
        assert_eq!(absslice_slice(p, c, 4, 10_000, true, &mut conc), AbssliceStatus::Ok);
        assert_eq!(absslice_slice_kept(conc, ptr::null_mut(), 0), 3);

        absslice_slice_free(conc);
        absslice_criterion_free(exact);
        absslice_program_free(q);
        absslice_slice_free(s);
        absslice_criterion_free(c);
        absslice_program_free(p);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(absslice_program_parse(cstr("x := ;").as_ptr(), &mut p), AbssliceStatus::ParseError);
        assert!(p.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(absslice_program_parse(ptr::null(), &mut p), AbssliceStatus::NullArgument);
        let bytes = [0xffu8, 0];
        assert_eq!(absslice_program_parse(bytes.as_ptr().cast(), &mut p), AbssliceStatus::InvalidUtf8);

        let p = parse(FIG1);
        let mut c = ptr::null_mut();
        assert_eq!(absslice_criterion_parse(cstr("occ=9:N").as_ptr(), p, &mut c), AbssliceStatus::CriterionError);
        let c = criterion("vars=d\nocc=5:N\nabs=d:par", p);
        let mut s = ptr::null_mut();
        assert_eq!(absslice_slice(p, c, 4, 10_000, false, &mut s), AbssliceStatus::Unsupported);
        assert!(last_error().contains("end of the program"));
        assert_eq!(absslice_slice(p, c, 0, 10_000, false, &mut s), AbssliceStatus::InvalidArgument);
        assert_eq!(absslice_slice(ptr::null(), c, 4, 10_000, false, &mut s), AbssliceStatus::NullArgument);
        let mut out = ptr::null_mut();
        assert_eq!(
            absslice_find_ndeps(cstr("x+1").as_ptr(), cstr("nope").as_ptr(), 4, &mut out),
            AbssliceStatus::InvalidArgument
        );
        absslice_criterion_free(c);
        absslice_program_free(p);
        absslice_program_free(ptr::null_mut());
        absslice_string_free(ptr::null_mut());
    }
}

#[test]
fn dependencies() {
    unsafe {
        let mut out = ptr::null_mut();
        for (dom, expect) in [("par", "y"), ("sign", "x,y")] {
            assert_eq!(absslice_find_ndeps(cstr("2*x*x+y").as_ptr(), cstr(dom).as_ptr(), 4, &mut out), AbssliceStatus::Ok);
            assert_eq!(CStr::from_ptr(out).to_str().unwrap(), expect);
            absslice_string_free(out);
        }
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // The test executable lives in <target>/<profile>/deps.
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libabsslice_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "kept: 2 5\ndeps: y\n");
}
