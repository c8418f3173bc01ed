use std::fs;
use std::path::Path;
use std::process::Command;

fn grstokes(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_grstokes")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{"case": "vortex", "variants": ["hdiv-hdg"], "orders": [1], "nu": [1], "c_m": [1], "levels": [0],
            "output_dir": {:?}{extra}}}"#,
        dir.join("out").display().to_string()
    );
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    assert_eq!(grstokes(&["--help"]).0, 0);
    assert_eq!(grstokes(&["frobnicate"]).0, 1);
    assert_eq!(grstokes(&["run", "/nonexistent/config.json"]).0, 1);
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#", "colour": "blue""#);
    let (code, _, err) = grstokes(&["run", &config]);
    assert_eq!(code, 1);
    assert!(err.contains("colour"), "{err}");
}

#[test]
fn run_reports_solver_failures_with_three() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(grstokes(&["run", &write_config(dir.path(), "")]).0, 0);
    assert!(dir.path().join("out/vortex_hdiv-hdg_k1_nu1e0_cm1e0.csv").exists());
    assert_eq!(grstokes(&["run", &write_config(dir.path(), r#", "max_iters": 1"#)]).0, 3);
}

#[test]
fn verify_writes_csv() {
    let (code, out, err) = grstokes(&["verify", "--seed", "7", "--instances", "3", "--property", "m-matrix", "--property", "upwind-identity"]);
    assert_eq!(code, 0, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "property,seed,cells,k,variant,passed,violation");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("m-matrix,7,"));
    assert_eq!(grstokes(&["verify", "--property", "nonsense"]).0, 1);
}

#[test]
fn mesh_output_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("square.mesh");
    let (code, _, err) = grstokes(&["mesh", "--case", "square", "--level", "1", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(err.starts_with("384 cells"), "{err}");
    let mesh = grstokes::mesh::read_mesh(std::io::BufReader::new(fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(mesh.num_cells(), 384);
}
