//! Compiles a C program against the generated header and the static
//! library, then runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

fn manifest_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

/// `target/<profile>` holding this test binary.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let include = manifest_dir().join("include");
    for (compiler, flags) in [("cc", &["-x", "c", "-std=c99"][..]), ("c++", &["-x", "c++"][..])] {
        let out = Command::new(compiler)
            .args(flags)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
            .arg(&include)
            .arg(include.join("waypoint.h"))
            .output()
            .expect("C compiler available");
        assert!(out.status.success(), "{compiler}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn c_client_routes_over_the_abi() {
    let lib = profile_dir().join("libwaypoint_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("client");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(manifest_dir().join("include"))
        .arg(manifest_dir().join("tests/c/client.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let triangle = manifest_dir().join("../core/fixtures/triangle.json");
    let run = Command::new(&exe).arg(&triangle).output().unwrap();
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(run.status.success(), "exit {:?}: {stdout}", run.status.code());
    let lines: Vec<&str> = stdout.lines().collect();
    assert!(lines[0].starts_with("2.0 {\"nodes\":[{\"id\":\"A\""), "{}", lines[0]);
    assert_eq!(lines[1], "error: unknown node \"Z\"");
    // 20 + 30 * log10(0.125 / (4 pi)), and its inverse
    assert_eq!(lines[2], "-40.0690 1.000000000000");
}
