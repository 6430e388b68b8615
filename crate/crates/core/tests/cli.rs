use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motorfault"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout_ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn paper_scale_model(dir: &Path) {
    stdout_ok(
        dir,
        &["gen", "--paper-scale", "--seed", "1", "--train", "train.csv", "--test", "test.csv"],
    );
    stdout_ok(dir, &["train", "--train", "train.csv", "--model", "model.txt", "--seed", "1"]);
}

#[test]
fn gen_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let gen = stdout_ok(
        dir.path(),
        &["gen", "--paper-scale", "--seed", "1", "--train", "train.csv", "--test", "test.csv"],
    );
    assert!(gen.contains("wrote 800 training samples"));
    assert!(gen.contains("wrote 66 test samples"));
    assert!(fs::read_to_string(dir.path().join("train.csv")).unwrap().starts_with("class,v1,v2,v3,i1,i2,i3\n"));

    let train = stdout_ok(dir.path(), &["train", "--train", "train.csv", "--model", "model.txt", "--seed", "1"]);
    assert!(train.contains("trained 6-10-7 on 800 samples"), "{train}");
    let history = fs::read_to_string(dir.path().join("model.txt.loss.csv")).unwrap();
    assert!(history.starts_with("epoch,loss\n1,"));

    let eval = stdout_ok(
        dir.path(),
        &["eval", "--test", "test.csv", "--model", "model.txt", "--train", "train.csv", "--out-dir", "reports"],
    );
    assert!(eval.contains("accuracy 1.000000"), "{eval}");
    assert!(eval.contains("Locked rotor (4)"), "{eval}");
    assert!(eval.contains("regression r 0.99"), "{eval}");
    let confusion = fs::read_to_string(dir.path().join("reports/confusion.csv")).unwrap();
    assert_eq!(confusion.lines().count(), 7);
    assert_eq!(confusion.lines().next().unwrap(), "11,0,0,0,0,0,0");
    let regression = fs::read_to_string(dir.path().join("reports/regression.csv")).unwrap();
    assert_eq!(regression.lines().count(), 1 + 800 * 7);
    assert!(dir.path().join("reports/frequency.txt").exists());
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        stdout_ok(dir, &["gen", "--counts", "20,20,20,20,20,20,20", "--seed", "4", "--train", "t.csv", "--test", "e.csv"]);
        stdout_ok(dir, &["train", "--train", "t.csv", "--model", "m.txt", "--epochs", "50", "--seed", "9", "--hidden", "8,5"]);
    }
    for name in ["t.csv", "e.csv", "m.txt", "m.txt.loss.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn classify_names_the_locked_rotor_row() {
    let dir = tempfile::tempdir().unwrap();
    paper_scale_model(dir.path());
    let out = stdout_ok(
        dir.path(),
        &["classify", "--model", "model.txt", "--row", "4,1.874796,1.855089,1.874878,0.286777,0.287052,0.281013"],
    );
    assert_eq!(out.lines().next(), Some("LockedRotor (4)"));
    assert!(out.lines().any(|l| l.starts_with("activations ") && l.split(' ').count() == 8));

    let out = stdout_ok(
        dir.path(),
        &["classify", "--model", "model.txt", "--sample", "2.657179,2.613409,2.687374,1.671357,1.650515,1.668712"],
    );
    assert_eq!(out.lines().next(), Some("SinglePhasingUnderVoltage (6)"));
}

#[test]
fn table1_prints_the_reference_rows() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(stdout_ok(dir.path(), &["table1"]), include_str!("golden/table1.csv"));
    stdout_ok(dir.path(), &["table1", "--out", "t1.csv"]);
    assert_eq!(
        fs::read_to_string(dir.path().join("t1.csv")).unwrap(),
        include_str!("golden/table1.csv")
    );
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["gen", "train", "eval", "classify", "serve", "replay", "table1"] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
    let out = run(dir.path(), &["train", "--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("Exit status"));
}

#[test]
fn exit_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(dir.path(), args).status.code().unwrap();

    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["train", "--train", "t.csv"]), 2);
    assert_eq!(code(&["train", "--train", "missing.csv", "--model", "m.txt"]), 3);

    fs::write(dir.path().join("bad.csv"), "class,v1,v2,v3,i1,i2,i3\n9,1,1,1,1,1,1\n").unwrap();
    let out = run(dir.path(), &["train", "--train", "bad.csv", "--model", "m.txt"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:2"));

    fs::write(dir.path().join("m.txt"), "not a model\n").unwrap();
    fs::write(dir.path().join("ok.csv"), include_str!("golden/table1.csv")).unwrap();
    assert_eq!(code(&["eval", "--test", "ok.csv", "--model", "m.txt"]), 4);

    assert_eq!(code(&["gen", "--train", "t.csv", "--noise", "-1"]), 2);
    assert_eq!(code(&["train", "--train", "ok.csv", "--model", "m2.txt", "--hidden", "0"]), 2);
    assert_eq!(code(&["train", "--train", "ok.csv", "--model", "m2.txt", "--lr", "-0.1"]), 2);

    // grab a free port, then release it so nothing is listening
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port().to_string();
    assert_eq!(code(&["replay", "--input", "ok.csv", "--port", &port]), 7);
}
