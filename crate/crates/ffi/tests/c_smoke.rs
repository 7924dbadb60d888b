//! Compiles and runs a small C program against the generated header and the
//! static library, proving the C ABI end to end.

use std::path::PathBuf;
use std::process::Command;

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "beatnls.h"

int main(void) {
    if (fabs(beatnls_h_eval(0.0) - 1.0) > 1e-15) return 1;

    double xi = 0.0;
    if (beatnls_collision_xi(1, &xi) != BEATNLS_STATUS_OK) return 2;
    if (fabs(xi - 1.1847503659235739) > 1e-9) return 3;

    double value = 0.0;
    uint8_t jump = 0;
    if (beatnls_rate_j(1.0, 1e-6, &value, &jump) != BEATNLS_STATUS_OK) return 4;
    if (jump != 0 || fabs(value - 1.0) > 1e-4) return 5;

    BeatnlsBranchTable *table = NULL;
    if (beatnls_branch_table_new(1.0, 2, &table) != BEATNLS_STATUS_OK) return 6;
    double tau = 0.0;
    if (beatnls_branch_table_collision(table, 1, &xi, &tau) != BEATNLS_STATUS_OK) return 7;
    beatnls_branch_table_free(table);

    BeatnlsReducedState st;
    if (beatnls_closed_form_state(1.0, 0.0, 0.0, 0.0, 0.1, 0.0, &st) != BEATNLS_STATUS_OK) return 8;
    if (fabs(st.u1_re - 0.1) > 1e-15) return 9;

    if (beatnls_collision_xi(0, &xi) != BEATNLS_STATUS_INVALID_ARGUMENT) return 10;
    printf("c smoke ok\n");
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include_dir = manifest.join("include");
    assert!(include_dir.join("beatnls.h").exists(), "header not generated");
    // Workspace target dir; depending on how the build was driven the
    // staticlib lands in debug/ or debug/deps/.
    let lib_dir = manifest.join("../../target/debug");
    let staticlib = [lib_dir.join("libbeatnls_ffi.a"), lib_dir.join("deps/libbeatnls_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
        .unwrap_or_else(|| panic!("static library missing under {}", lib_dir.display()));

    let work = std::env::temp_dir().join(format!("beatnls-c-smoke-{}", std::process::id()));
    std::fs::create_dir_all(&work).unwrap();
    let src = work.join("smoke.c");
    let exe = work.join("smoke");
    std::fs::write(&src, C_PROGRAM).unwrap();

    let compile = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include_dir)
        .arg(staticlib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .output()
        .expect("cc available");
    assert!(
        compile.status.success(),
        "compile failed: {}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "c smoke ok");
    std::fs::remove_dir_all(&work).ok();
}
