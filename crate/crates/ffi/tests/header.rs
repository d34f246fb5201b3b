use std::path::Path;
use std::process::Command;

const PROGRAM: &str = r#"
#include "egoview.h"
#include <stdio.h>

int run(void) {
    double src[9] = {0, 0, 0, 1, 0, 0, 0, 1, 0};
    EgoviewTransform t;
    EgoviewStatus st = egoview_umeyama(src, src, 3, &t);
    if (st != EGOVIEW_STATUS_OK) {
        fprintf(stderr, "%s\n", egoview_last_error());
        return 1;
    }
    EgoviewDepthMap *d = NULL;
    double v[1] = {1.0};
    egoview_depth_map_new(1, 1, v, &d);
    egoview_depth_map_free(d);
    return 0;
}
"#;

#[test]
fn generated_header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("egoview.h").is_file(), "header not generated");
    let Ok(status) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(status.status.success());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
