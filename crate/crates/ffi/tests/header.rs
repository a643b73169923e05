use std::path::Path;
use std::process::Command;

/// The generated header must compile as C99 with a program using the API.
#[test]
fn header_compiles_as_c() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(root.join("include"))
        .arg(root.join("tests/smoke.c"))
        .status();
    match status {
        Ok(s) => assert!(s.success(), "cc rejected the header"),
        Err(e) => eprintln!("skipping: no C compiler ({e})"),
    }
}
