//! Compiles the generated header, and a small C program linked against the
//! static library, with the system C compiler when one is available.

use std::path::{Path, PathBuf};
use std::process::Command;

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn compiler(name: &str) -> Option<String> {
    let ok = Command::new(name).arg("--version").output().map(|o| o.status.success()).unwrap_or(false);
    ok.then(|| name.to_string())
}

fn static_lib() -> Option<PathBuf> {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().ok()?;
    let profile = exe.parent()?.parent()?;
    let lib = profile.join("libarchipelago_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let include = crate_dir().join("include");
    let header = include.join("archipelago.h");
    assert!(header.exists(), "{} missing", header.display());
    let dir = tempfile::tempdir().unwrap();
    for (cc, ext, std) in [("cc", "c", "-std=c11"), ("c++", "cpp", "-std=c++17")] {
        let Some(cc) = compiler(cc) else {
            eprintln!("skipping: no {cc}");
            continue;
        };
        let src = dir.path().join(format!("probe.{ext}"));
        std::fs::write(&src, "#include \"archipelago.h\"\nint main(void) { return ARCH_STATUS_OK; }\n").unwrap();
        let out = Command::new(&cc)
            .args([std, "-Wall", "-Wextra", "-Werror", "-fsyntax-only", "-I"])
            .arg(&include)
            .arg(&src)
            .output()
            .unwrap();
        assert!(out.status.success(), "{cc}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

const PROGRAM: &str = r#"
#include <stdio.h>
#include "archipelago.h"

static int model(void *user_data, const double *x, size_t p, double *out) {
    (void)user_data; (void)p;
    *out = x[0] * x[1] + x[2];
    return 0;
}

int main(void) {
    double target[3] = {2.0, 3.0, 5.0}, baseline[3] = {0.0, 0.0, 0.0};
    ArchBlackBox *bb = NULL;
    ArchRanking *r = NULL;
    ArchExplanation *e = NULL;
    if (arch_blackbox_callback(model, NULL, target, baseline, 3, ARCH_H_UNIT, &bb) != ARCH_STATUS_OK) return 1;
    if (arch_detect(bb, "archdetect", 0, 0, &r) != ARCH_STATUS_OK) return 2;
    if (arch_explain(bb, r, 1, ARCH_METHOD_ARCH_ATTRIBUTE, &e) != ARCH_STATUS_OK) return 3;
    size_t n = 0;
    arch_explanation_num_sets(e, &n);
    for (size_t k = 0; k < n; k++) {
        double phi = 0.0;
        arch_explanation_phi(e, k, &phi);
        printf("%g\n", phi);
    }
    if (arch_blackbox_synthetic("nope", ARCH_H_UNIT, &bb) != ARCH_STATUS_INVALID_ARGUMENT) return 4;
    printf("%s\n", arch_last_error_message() != NULL ? "error-set" : "no-error");
    arch_explanation_free(e);
    arch_ranking_free(r);
    arch_blackbox_free(bb);
    return 0;
}
"#;

fn link(cc: &str, lib: &Path, dir: &Path) -> PathBuf {
    let src = dir.join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.join("main");
    let out = Command::new(cc)
        .args(["-std=c11", "-Wall", "-Werror", "-I"])
        .arg(crate_dir().join("include"))
        .arg(&src)
        .arg(lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "link failed: {}", String::from_utf8_lossy(&out.stderr));
    exe
}

#[test]
fn c_program_runs_against_the_static_library() {
    let (Some(cc), Some(lib)) = (compiler("cc"), static_lib()) else {
        eprintln!("skipping: no C compiler or static library");
        return;
    };
    if !cfg!(target_os = "linux") {
        eprintln!("skipping: link flags are Linux-specific");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = link(&cc, &lib, dir.path());
    let out = Command::new(exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "6\n5\nerror-set\n");
}
