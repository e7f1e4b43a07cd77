use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_lptv-mesh");

#[test]
fn synthetic_run_writes_the_expected_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["--synthetic", "icosphere_k=2,pattern=two_patch", "--out"])
        .arg(dir.path())
        .args(["--noise-levels", "0.1,0.2", "--p-values", "0.5", "--trials", "2", "--seed", "3"])
        .args(["--lambda", "0.1", "--outer-max", "30", "--no-timing"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("image,noise_level,method,psnr_db,wall_time_s,outer_iters"));
    assert_eq!(lines.count(), 2 * 2);
    for sub in ["0.10/noisy.ply", "0.10/L1TV/restored.ply", "0.20/LpTV_p0.5/restored.ply", "0.20/LpTV_p0.5/trace.csv"] {
        assert!(dir.path().join("icosphere2_two_patch").join(sub).exists(), "{sub}");
    }
}

#[test]
fn mesh_and_image_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let mesh_path = dir.path().join("quad.off");
    let image_path = dir.path().join("quad.txt");
    std::fs::write(&mesh_path, "OFF\n4 2 0\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n3 0 1 2\n3 1 3 2\n").unwrap();
    std::fs::write(&image_path, "0.2\n0.2\n0.8\n0.8\n").unwrap();
    let out = Command::new(BIN)
        .arg("--mesh")
        .arg(&mesh_path)
        .arg("--image")
        .arg(&image_path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(["--noise-levels", "0.0", "--p-values", "0.5", "--trials", "1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/results.csv").exists());
}

#[test]
fn bad_input_fails_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 3] = [
        &["--synthetic", "icosphere_k=2,pattern=spiral"],
        &["--mesh", "/nonexistent.off", "--image", "/nonexistent.txt"],
        &["--synthetic", "icosphere_k=1,pattern=two_patch", "--p-values", "1.5"],
    ];
    for args in cases {
        let out = Command::new(BIN).args(args).arg("--out").arg(dir.path()).output().unwrap();
        assert!(!out.status.success(), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}
