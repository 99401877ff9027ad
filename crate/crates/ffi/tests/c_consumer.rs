//! Compiles a C program against the generated header and links it to the
//! static library, so the header and the exported symbols are checked together.

use std::path::{Path, PathBuf};
use std::process::Command;

/// The static library built alongside this test binary.
fn static_library() -> PathBuf {
    let deps = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let profile = deps.parent().unwrap();
    let direct = profile.join("libsbltomo_ffi.a");
    if direct.exists() {
        return direct;
    }
    std::fs::read_dir(&deps)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().unwrap().to_string_lossy();
            name.starts_with("libsbltomo_ffi") && name.ends_with(".a")
        })
        .max_by_key(|p| p.metadata().and_then(|m| m.modified()).ok())
        .expect("libsbltomo_ffi.a next to the test binary")
}

#[test]
fn c_program_builds_and_runs_against_the_header() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = Path::new(env!("CARGO_TARGET_TMPDIR")).join("sbltomo_smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args([
            "-std=c99",
            "-Wall",
            "-Wextra",
            "-Werror",
            "-D_DEFAULT_SOURCE",
            "-I",
        ])
        .arg(dir.join("include"))
        .arg(dir.join("tests/smoke.c"))
        .arg(static_library())
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap_or_else(|e| panic!("running `{cc}`: {e}"));
    assert!(status.success(), "C compilation failed");

    let output = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        output.status.success(),
        "exit {:?}, stdout {stdout}",
        output.status.code()
    );
    assert!(stdout.starts_with("dimension mismatch: "), "{stdout}");
}
