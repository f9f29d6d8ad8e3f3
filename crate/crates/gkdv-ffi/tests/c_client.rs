use std::path::PathBuf;
use std::process::Command;

const SOURCE: &str = r#"
#include <math.h>
#include <stdio.h>
#include "gkdv.h"

int main(void) {
    GkdvNonlinearity *nl = NULL;
    if (gkdv_nonlinearity_parse("power:5", &nl) != GKDV_STATUS_OK) return 1;
    GkdvProfile *prof = NULL;
    if (gkdv_profile_build(nl, 1.0, &prof) != GKDV_STATUS_OK) return 2;
    double a = 0.0;
    gkdv_profile_amplitude(prof, &a);
    if (fabs(a - pow(3.0, 0.25)) > 1e-10) return 3;
    GkdvNonlinearity *bad = NULL;
    if (gkdv_nonlinearity_parse("cubic?", &bad) != GKDV_STATUS_INVALID_ARGUMENT) return 4;
    if (gkdv_last_error_message() == NULL) return 5;
    gkdv_profile_free(prof);
    gkdv_nonlinearity_free(nl);
    printf("ok\n");
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = target_dir().join("libgkdv_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    assert!(lib.exists(), "missing {}", lib.display());
    let work = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c_client");
    std::fs::create_dir_all(&work).unwrap();
    let src = work.join("main.c");
    std::fs::write(&src, SOURCE).unwrap();
    let bin = work.join("main");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
