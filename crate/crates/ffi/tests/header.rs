use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn crate_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn header() -> String {
    fs::read_to_string(crate_dir().join("include/shaploc.h"))
        .expect("header generated by build script")
}

#[test]
fn header_declares_the_public_surface() {
    let h = header();
    for decl in [
        "typedef struct ShaplocModel ShaplocModel;",
        "SHAPLOC_STATUS_OK = 0",
        "SHAPLOC_STATUS_PANIC = 11",
        "#define SHAPLOC_ATTACK_C 2",
        "typedef struct ShaplocAttack",
        "typedef struct ShaplocRunParams",
        "typedef struct ShaplocOutcome",
        "ShaplocStatus shaploc_model_new(const double *mean,",
        "void shaploc_model_free(struct ShaplocModel *model);",
        "ShaplocStatus shaploc_all_shapley(",
        "ShaplocStatus shaploc_run_experiment(",
        "double shaploc_binomial_ci(double pe, uint64_t trials);",
        "const char *shaploc_status_message(int32_t status);",
        "const char *shaploc_last_error_message(void);",
    ] {
        assert!(h.contains(decl), "missing `{decl}`");
    }
}

/// Directory holding the static library built alongside this test binary.
fn lib_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = lib_dir().join("libshaploc_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!(
            "skipping: no C compiler or static library at {}",
            lib.display()
        );
        return;
    }
    let out_dir = tempfile_dir();
    let exe = out_dir.join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
    let _ = fs::remove_dir_all(out_dir);
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("shaploc-ffi-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}
