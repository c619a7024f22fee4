use std::path::Path;
use std::process::{Command, Output};

use qfgn::imaging::{load_image, Image};

fn qfgn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfgn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run qfgn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_constant(dir: &Path, name: &str, side: usize, value: f64) {
    let img = Image::constant(side, side, value).unwrap();
    img.save_pgm(&dir.join(name)).unwrap();
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn constant_image_fits_to_small_loss() {
    let tmp = tempfile::tempdir().unwrap();
    write_constant(tmp.path(), "flat.pgm", 8, 0.4);
    std::fs::write(
        tmp.path().join("run.toml"),
        "model = \"relu\"\nimage = \"flat.pgm\"\nresolution = 8\noutput_dir = \"out\"\n",
    )
    .unwrap();
    let o = qfgn(tmp.path(), &["train", "--config", "run.toml", "--log-every", "0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = tmp.path().join("out");
    let ckpts: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("run-"))
        .collect();
    assert_eq!(ckpts.len(), 1);
    let table = std::fs::read_to_string(out.join("restarts.csv")).unwrap();
    let row = data_rows(&table)[0];
    let loss: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!(loss < 1e-4, "final loss {loss}");
}

#[test]
fn missing_image_is_a_usage_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfgn(tmp.path(), &["train", "--image", "no/such/scan.png"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no/such/scan.png"), "{}", stderr(&o));
}

#[test]
fn bad_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "[train]\nepoch = 3\n").unwrap();
    let o = qfgn(tmp.path(), &["train", "--config", "bad.toml"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("epoch"));
}

#[test]
fn five_restarts_write_five_checkpoints_and_best() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfgn(
        tmp.path(),
        &[
            "train", "--model", "tanh", "--restarts", "5", "--seed", "3", "--epochs", "5", "--out", "r",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = tmp.path().join("r");
    for seed in 3..8 {
        assert!(r.join(format!("run-{seed}.ckpt")).exists());
        assert!(r.join(format!("loss-{seed}.csv")).exists());
    }
    assert!(r.join("best.ckpt").exists());
    let table = std::fs::read_to_string(r.join("restarts.csv")).unwrap();
    let best = data_rows(&table)
        .iter()
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let metrics = std::fs::read_to_string(r.join("metrics.csv")).unwrap();
    let psnr: f64 = data_rows(&metrics)[0].split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(psnr, best);
}

#[test]
fn reconstruct_and_superres_agree_with_training() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfgn(tmp.path(), &["train", "--model", "siren", "--epochs", "20", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = tmp.path().join("r");
    let metrics = std::fs::read_to_string(r.join("metrics.csv")).unwrap();
    let trained: f64 = data_rows(&metrics)[0].split(',').nth(2).unwrap().parse().unwrap();

    let o = qfgn(tmp.path(), &["reconstruct", "r/best.ckpt", "--out", "rec"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rec_csv = std::fs::read_to_string(tmp.path().join("rec/reconstruct.csv")).unwrap();
    let rows = data_rows(&rec_csv);
    assert_eq!(rows.len(), 1);
    let psnr: f64 = rows[0].split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(psnr, trained);
    let rec = std::fs::read(tmp.path().join("rec/reconstruct.pgm")).unwrap();
    assert_eq!(load_image(&tmp.path().join("rec/reconstruct.pgm")).unwrap().height(), 32);

    let o = qfgn(tmp.path(), &["superres", "r/best.ckpt", "--factor", "1", "--out", "sr1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read(tmp.path().join("sr1/reconstruct.pgm")).unwrap(), rec);

    let o = qfgn(tmp.path(), &["superres", "r/best.ckpt", "--factor", "2", "--truth", "phantom", "--out", "sr2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let img = load_image(&tmp.path().join("sr2/superres-x2.pgm")).unwrap();
    assert_eq!((img.height(), img.width()), (64, 64));
    let sr_csv = std::fs::read_to_string(tmp.path().join("sr2/superres-x2.csv")).unwrap();
    let p: f64 = data_rows(&sr_csv)[0].split(',').nth(2).unwrap().parse().unwrap();
    assert!(p.is_finite());

    write_constant(tmp.path(), "small.pgm", 32, 0.5);
    let o = qfgn(tmp.path(), &["superres", "r/best.ckpt", "--factor", "2", "--truth", "small.pgm"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    for artifact in ["r/best.ckpt", "r/loss-0.csv", "r/metrics.csv", "rec/reconstruct.csv", "sr2/superres-x2.pgm"] {
        let bytes = std::fs::read(tmp.path().join(artifact)).unwrap();
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("model = \"siren\"") && text.contains("seed = 0"), "{artifact}");
    }
}

#[test]
fn checkpoint_version_mismatch_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfgn(tmp.path(), &["train", "--model", "relu", "--epochs", "1", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let path = tmp.path().join("r/best.ckpt");
    let text = std::fs::read_to_string(&path).unwrap().replacen("QFGN-CKPT v1", "QFGN-CKPT v9", 1);
    std::fs::write(&path, text).unwrap();
    let o = qfgn(tmp.path(), &["reconstruct", "r/best.ckpt"]);
    assert_eq!(code(&o), 3);
    let err = stderr(&o);
    assert!(err.contains("v9") && err.contains("v1"), "{err}");
}

#[test]
fn spectrum_of_default_circuit_lists_33_frequencies() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfgn(tmp.path(), &["spectrum", "--circuit", "default", "--out", "s.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(tmp.path().join("s.csv")).unwrap();
    assert!(text.contains("# predicted 33 frequencies from 16 encoding gates"), "{text}");
    assert!(text.contains("\nfrequency,re,im,magnitude\n"));
}

#[test]
fn cosine_circuit_has_half_coefficients() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("cos.txt"), "qubits 1\nrx 0 enc 0\n").unwrap();
    let o = qfgn(tmp.path(), &["spectrum", "cos.txt", "--out", "s.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(tmp.path().join("s.csv")).unwrap();
    let mut seen = 0;
    for row in data_rows(&text) {
        let cols: Vec<&str> = row.split(',').collect();
        let f: f64 = cols[0].parse().unwrap();
        let mag: f64 = cols[3].parse().unwrap();
        if f.abs() == 1.0 {
            assert!((mag - 0.5).abs() < 1e-12, "{row}");
            seen += 1;
        } else {
            assert!(mag < 1e-12, "{row}");
        }
    }
    assert_eq!(seen, 2);
}

#[test]
fn sampled_spectrum_reports_larger_leakage() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.txt"), "qubits 2\nry 0 par 0\nrx 0 enc 0\ncz 0 1\nrx 1 enc 1\nry 0 par 1\n").unwrap();
    let leak = |args: &[&str]| {
        let o = qfgn(tmp.path(), args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let text = std::fs::read_to_string(tmp.path().join("s.csv")).unwrap();
        let line = text.lines().find(|l| l.starts_with("# max leakage")).unwrap();
        line.split_whitespace().nth(3).unwrap().trim_end_matches(',').parse::<f64>().unwrap()
    };
    let exact = leak(&["spectrum", "c.txt", "--out", "s.csv"]);
    let sampled = leak(&["spectrum", "c.txt", "--shots", "50000", "--out", "s.csv"]);
    assert!(sampled > exact, "{sampled} vs {exact}");
}

#[test]
fn eval_compares_two_images() {
    let tmp = tempfile::tempdir().unwrap();
    write_constant(tmp.path(), "a.pgm", 16, 0.5);
    write_constant(tmp.path(), "b.pgm", 16, 0.5);
    write_constant(tmp.path(), "c.pgm", 8, 0.5);
    let o = qfgn(tmp.path(), &["eval", "a.pgm", "b.pgm", "--out", "m.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(tmp.path().join("m.csv")).unwrap();
    assert_eq!(data_rows(&text), vec!["a.pgm,-,inf,1"]);
    assert_eq!(code(&qfgn(tmp.path(), &["eval", "a.pgm", "c.pgm"])), 2);
    std::fs::write(tmp.path().join("junk.pgm"), "not an image").unwrap();
    assert_eq!(code(&qfgn(tmp.path(), &["eval", "a.pgm", "junk.pgm"])), 3);
}
