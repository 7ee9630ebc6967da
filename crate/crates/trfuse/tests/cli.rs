//! End-to-end tests of the `trfuse` binary: pipeline wiring, file shapes,
//! reproducibility and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use trfuse::io::{read_tensor, write_tensor};
use trfuse::ring::{tr_init, tr_reconstruct};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trfuse"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Random low-rank cube written to `dir/hr.hten`.
fn write_synthetic_hr(dir: &Path, shape: [usize; 3], seed: u64) -> PathBuf {
    let ring = tr_init(&[shape[0], shape[1], shape[2]], &[2, 4, 2], seed).unwrap();
    let x = tr_reconstruct(&ring).unwrap();
    let path = dir.join("hr.hten");
    write_tensor(&path, &x).unwrap();
    path
}

#[test]
fn simulate_fuse_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let hr = write_synthetic_hr(dir.path(), [16, 16, 8], 3);
    let out_dir = dir.path().join("sim");
    let out = run(&[
        "simulate",
        hr.to_str().unwrap(),
        "--factor",
        "2",
        "--kernel-size",
        "2",
        "--msi-bands",
        "2",
        "--snr",
        "30",
        "--seed",
        "7",
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert_success(&out);
    let y = read_tensor(&out_dir.join("y.hten")).unwrap();
    let z = read_tensor(&out_dir.join("z.hten")).unwrap();
    assert_eq!(y.shape(), &[8, 8, 8]);
    assert_eq!(z.shape(), &[16, 16, 2]);

    let fuse_dir = dir.path().join("fused");
    let out = run(&[
        "fuse",
        out_dir.join("y.hten").to_str().unwrap(),
        out_dir.join("z.hten").to_str().unwrap(),
        "--model",
        out_dir.join("model.txt").to_str().unwrap(),
        "--ranks",
        "2,4,2",
        "--iters",
        "15",
        "--seed",
        "1",
        "-o",
        fuse_dir.to_str().unwrap(),
    ]);
    assert_success(&out);
    let x_hat = read_tensor(&fuse_dir.join("x_hat.hten")).unwrap();
    assert_eq!(x_hat.shape(), &[16, 16, 8]);
    let trace = std::fs::read_to_string(fuse_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with(
        "iteration,objective,hsi_term,msi_term,nuclear_term,mu,g0_g3_residual,wall_seconds"
    ));
    assert_eq!(trace.lines().count(), 16); // header + 15 sweeps

    let csv = dir.path().join("scores.csv");
    let out = run(&[
        "evaluate",
        fuse_dir.join("x_hat.hten").to_str().unwrap(),
        out_dir.join("xref.hten").to_str().unwrap(),
        "--ratio",
        "2",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("psnr:"), "stdout: {stdout}");
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("psnr,rmse,ergas,sam,ssim\n"));
    assert_eq!(csv_text.lines().count(), 2);
}

#[test]
fn simulate_table_geometries() {
    let dir = tempfile::tempdir().unwrap();
    // 256x256x90 at factor 4 with 4 msi bands
    let hr = write_synthetic_hr(dir.path(), [256, 256, 90], 11);
    let out_dir = dir.path().join("wdc");
    let out = run(&[
        "simulate",
        hr.to_str().unwrap(),
        "--factor",
        "4",
        "--kernel-size",
        "8",
        "--msi-bands",
        "4",
        "--snr",
        "inf",
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert_success(&out);
    assert_eq!(
        read_tensor(&out_dir.join("y.hten")).unwrap().shape(),
        &[64, 64, 90]
    );
    assert_eq!(
        read_tensor(&out_dir.join("z.hten")).unwrap().shape(),
        &[256, 256, 4]
    );

    // 144x144x100 at factor 9
    let hr = write_synthetic_hr(dir.path(), [144, 144, 100], 12);
    let out_dir = dir.path().join("indian");
    let out = run(&[
        "simulate",
        hr.to_str().unwrap(),
        "--factor",
        "9",
        "--kernel-size",
        "9",
        "--msi-bands",
        "4",
        "--snr",
        "inf",
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert_success(&out);
    assert_eq!(
        read_tensor(&out_dir.join("y.hten")).unwrap().shape(),
        &[16, 16, 100]
    );
}

#[test]
fn simulate_identity_spectral_groups_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let hr = write_synthetic_hr(dir.path(), [8, 8, 4], 13);
    let out_dir = dir.path().join("lossless");
    // factor 1 with size-1 groups: both outputs are exact transforms
    let out = run(&[
        "simulate",
        hr.to_str().unwrap(),
        "--factor",
        "1",
        "--kernel-size",
        "1",
        "--msi-bands",
        "4",
        "--snr",
        "inf",
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert_success(&out);
    let xref = read_tensor(&out_dir.join("xref.hten")).unwrap();
    let y = read_tensor(&out_dir.join("y.hten")).unwrap();
    let z = read_tensor(&out_dir.join("z.hten")).unwrap();
    assert_eq!(y.data(), xref.data());
    assert_eq!(z.data(), xref.data());
}

#[test]
fn simulate_reruns_reproduce_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let hr = write_synthetic_hr(dir.path(), [16, 16, 6], 17);
    let args_for = |out: &Path| {
        vec![
            "simulate".to_string(),
            hr.to_str().unwrap().to_string(),
            "--factor".into(),
            "2".into(),
            "--kernel-size".into(),
            "4".into(),
            "--msi-bands".into(),
            "3".into(),
            "--snr".into(),
            "20".into(),
            "--seed".into(),
            "99".into(),
            "-o".into(),
            out.to_str().unwrap().to_string(),
        ]
    };
    let a_dir = dir.path().join("a");
    let b_dir = dir.path().join("b");
    assert_success(&bin().args(args_for(&a_dir)).output().unwrap());
    assert_success(&bin().args(args_for(&b_dir)).output().unwrap());
    for f in ["y.hten", "z.hten", "xref.hten"] {
        let a = std::fs::read(a_dir.join(f)).unwrap();
        let b = std::fs::read(b_dir.join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical runs");
    }

    // manifest-driven rerun reproduces the same bytes too
    let c_dir = dir.path().join("c");
    let out = run(&[
        "simulate",
        hr.to_str().unwrap(),
        "--from-manifest",
        a_dir.join("model.txt").to_str().unwrap(),
        "-o",
        c_dir.to_str().unwrap(),
    ]);
    assert_success(&out);
    for f in ["y.hten", "z.hten", "xref.hten"] {
        let a = std::fs::read(a_dir.join(f)).unwrap();
        let c = std::fs::read(c_dir.join(f)).unwrap();
        assert_eq!(a, c, "{f} differs under manifest rerun");
    }
}

#[test]
fn fuse_rerun_is_byte_identical_and_ctrf_trace_drops_mu() {
    let dir = tempfile::tempdir().unwrap();
    let hr = write_synthetic_hr(dir.path(), [16, 16, 6], 23);
    let sim = dir.path().join("sim");
    assert_success(&run(&[
        "simulate",
        hr.to_str().unwrap(),
        "--factor",
        "2",
        "--kernel-size",
        "2",
        "--msi-bands",
        "3",
        "--snr",
        "30",
        "-o",
        sim.to_str().unwrap(),
    ]));
    let fuse = |mode: &str, out: &Path| {
        run(&[
            "fuse",
            sim.join("y.hten").to_str().unwrap(),
            sim.join("z.hten").to_str().unwrap(),
            "--model",
            sim.join("model.txt").to_str().unwrap(),
            "--mode",
            mode,
            "--ranks",
            "2,4,2",
            "--iters",
            "10",
            "--seed",
            "5",
            "-o",
            out.to_str().unwrap(),
        ])
    };
    let a_dir = dir.path().join("fa");
    let b_dir = dir.path().join("fb");
    assert_success(&fuse("nctrf", &a_dir));
    assert_success(&fuse("nctrf", &b_dir));
    assert_eq!(
        std::fs::read(a_dir.join("x_hat.hten")).unwrap(),
        std::fs::read(b_dir.join("x_hat.hten")).unwrap(),
        "same seed must give identical estimate bytes"
    );

    let c_dir = dir.path().join("fc");
    assert_success(&fuse("ctrf", &c_dir));
    let trace = std::fs::read_to_string(c_dir.join("trace.csv")).unwrap();
    let header = trace.lines().next().unwrap();
    assert_eq!(
        header,
        "iteration,objective,hsi_term,msi_term,nuclear_term,wall_seconds"
    );
    for line in trace.lines().skip(1) {
        let nuclear: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(nuclear, 0.0);
    }
}

#[test]
fn fuse_preset_selects_rank_triple() {
    let dir = tempfile::tempdir().unwrap();
    let hr = write_synthetic_hr(dir.path(), [32, 32, 8], 29);
    let sim = dir.path().join("sim");
    assert_success(&run(&[
        "simulate",
        hr.to_str().unwrap(),
        "--factor",
        "4",
        "--kernel-size",
        "4",
        "--msi-bands",
        "4",
        "--snr",
        "30",
        "-o",
        sim.to_str().unwrap(),
    ]));
    let out = run(&[
        "fuse",
        sim.join("y.hten").to_str().unwrap(),
        sim.join("z.hten").to_str().unwrap(),
        "--model",
        sim.join("model.txt").to_str().unwrap(),
        "--preset",
        "snr30",
        "--iters",
        "1",
        "-o",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("ranks=4,200,4"), "stdout: {stdout}");
}

#[test]
fn check_command_and_negative_control() {
    let started = std::time::Instant::now();
    let out = run(&["check"]);
    assert_success(&out);
    assert!(
        started.elapsed().as_secs_f64() < 30.0,
        "self-test should stay fast"
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("all 7 checks passed"), "stdout: {stdout}");

    let out = run(&["check", "--corrupt-unfolding"]);
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(4));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL block factorization identity"));
}

#[test]
fn exit_codes_match_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    // usage error from clap: unknown flag
    let out = run(&["fuse", "--definitely-not-a-flag"]);
    assert_eq!(out.status.code(), Some(2));

    // usage error from validation: fuse without ranks or preset
    let hr = write_synthetic_hr(dir.path(), [8, 8, 4], 31);
    let sim = dir.path().join("sim");
    assert_success(&run(&[
        "simulate",
        hr.to_str().unwrap(),
        "--factor",
        "2",
        "--kernel-size",
        "2",
        "--msi-bands",
        "2",
        "-o",
        sim.to_str().unwrap(),
    ]));
    let out = run(&[
        "fuse",
        sim.join("y.hten").to_str().unwrap(),
        sim.join("z.hten").to_str().unwrap(),
        "--model",
        sim.join("model.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    // data error: missing file
    let out = run(&["evaluate", "/nonexistent/a.hten", "/nonexistent/b.hten"]);
    assert_eq!(out.status.code(), Some(3));

    // data error: shape mismatch between estimate and reference
    let small = dir.path().join("small.hten");
    write_tensor(
        &small,
        &trfuse::DenseTensor::zeros(vec![8, 8, 3]).unwrap(),
    )
    .unwrap();
    let out = run(&[
        "evaluate",
        hr.to_str().unwrap(),
        small.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // data error: indivisible dims
    let out = run(&[
        "simulate",
        hr.to_str().unwrap(),
        "--factor",
        "3",
        "--kernel-size",
        "3",
        "--msi-bands",
        "2",
        "-o",
        dir.path().join("bad").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn env_var_supplies_default_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let hr = write_synthetic_hr(dir.path(), [8, 8, 4], 41);
    let out_dir = dir.path().join("from_env");
    let out = bin()
        .args([
            "simulate",
            hr.to_str().unwrap(),
            "--factor",
            "2",
            "--kernel-size",
            "2",
            "--msi-bands",
            "2",
            "--snr",
            "inf",
        ])
        .env("TRFUSE_OUT_DIR", &out_dir)
        .output()
        .unwrap();
    assert_success(&out);
    assert!(out_dir.join("y.hten").exists());
    assert!(out_dir.join("model.txt").exists());
}

#[test]
fn csv_import_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let hr = write_synthetic_hr(dir.path(), [4, 6, 3], 37);
    let csv = dir.path().join("t.csv");
    assert_success(&run(&[
        "export-csv",
        hr.to_str().unwrap(),
        "-o",
        csv.to_str().unwrap(),
    ]));
    let back = dir.path().join("back.hten");
    assert_success(&run(&[
        "import-csv",
        csv.to_str().unwrap(),
        "-o",
        back.to_str().unwrap(),
    ]));
    assert_eq!(
        std::fs::read(&hr).unwrap(),
        std::fs::read(&back).unwrap(),
        "csv round trip must preserve every byte of the payload"
    );
}

#[test]
fn signatures_command_reports_angles() {
    let dir = tempfile::tempdir().unwrap();
    // two classes from a separable construction, 16 pixels in a 4x4 grid
    let bands = 6usize;
    let pixels = trfuse::DenseTensor::from_fn(vec![16, bands], |ix| {
        let class = usize::from(ix[0] / 4 >= 2);
        let t = ix[1] as f64 / bands as f64;
        let base = if class == 0 { (3.0 * t).sin() } else { (7.0 * t).cos() };
        base * (1.0 + 0.3 * (ix[0] % 4) as f64)
    })
    .unwrap();
    let pixels_path = dir.path().join("pixels.hten");
    write_tensor(&pixels_path, &pixels).unwrap();
    let labels_path = dir.path().join("labels.txt");
    let labels: Vec<String> = (0..16).map(|p| usize::from(p / 4 >= 2).to_string()).collect();
    std::fs::write(&labels_path, labels.join("\n")).unwrap();

    let out = run(&[
        "signatures",
        pixels_path.to_str().unwrap(),
        labels_path.to_str().unwrap(),
        "--ranks",
        "1,2,2",
    ]);
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("class 0"), "stdout: {stdout}");
    assert!(stdout.contains("class 1"), "stdout: {stdout}");
}
