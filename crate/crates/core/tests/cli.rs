use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hiertrack"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key}= in {text}"))
        .trim()
        .parse()
        .unwrap()
}

fn synth(dir: &Path, seed: u64, frames: u32) {
    let o = run(&[
        "synth",
        "--seed",
        &seed.to_string(),
        "--frames",
        &frames.to_string(),
        "--out",
        s(dir),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["track", "--help"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    let o = run(&["eval", "--pred", "x.txt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--gt"));
}

#[test]
fn synth_is_deterministic_per_seed() {
    let root = tempfile::tempdir().unwrap();
    let (a, b, c) = (root.path().join("a"), root.path().join("b"), root.path().join("c"));
    synth(&a, 7, 60);
    synth(&b, 7, 60);
    synth(&c, 8, 60);
    for f in ["det.txt", "features.tsv", "homography.csv", "gt.txt", "seqinfo.ini", "scenario.toml"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f} differs between runs");
        if f == "det.txt" || f == "features.tsv" {
            assert_ne!(x, std::fs::read(c.join(f)).unwrap(), "{f} ignores the seed");
        }
    }
}

#[test]
fn train_track_eval_round() {
    let root = tempfile::tempdir().unwrap();
    let (train, test) = (root.path().join("train"), root.path().join("test"));
    synth(&train, 1, 300);
    synth(&test, 2, 300);
    let weights = root.path().join("w.json");
    let log = root.path().join("train.log");
    let o = run(&[
        "train",
        "--seq",
        s(&train),
        "--out",
        s(&weights),
        "--log",
        s(&log),
        "--lr",
        "0.05",
        "--stage-iters",
        "60",
        "--epochs",
        "200",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(value(&stdout(&o), "edge_accuracy") >= 0.99, "{}", stdout(&o));
    assert!(std::fs::read_to_string(&log).unwrap().starts_with("iteration\tstage\tloss"));

    let pred = root.path().join("pred.txt");
    let dbg = root.path().join("graphs");
    let o = run(&[
        "--threads",
        "2",
        "track",
        "--seq",
        s(&test),
        "--weights",
        s(&weights),
        "--out",
        s(&pred),
        "--debug-graphs",
        s(&dbg),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(value(&stdout(&o), "tracks") >= 1.0);
    assert!(std::fs::read_dir(&dbg).unwrap().count() > 0);

    let o = run(&["eval", "--pred", s(&pred), "--gt", s(&test.join("gt.txt")), "--kv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let hota = value(&stdout(&o), "hota");
    assert!(hota > 80.0 && hota <= 100.0, "{}", stdout(&o));

    let o = run(&["gap", "--seq", s(&test), "--steps", "1,10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| !l.trim().is_empty()).count(), 3);

    // weights trained for nine levels do not fit a seven-level run
    let o = run(&[
        "track",
        "--seq",
        s(&test),
        "--weights",
        s(&weights),
        "--out",
        s(&pred),
        "--levels",
        "7",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("level"), "{}", stderr(&o));
}

#[test]
fn missing_inputs_name_the_file() {
    let root = tempfile::tempdir().unwrap();
    synth(root.path(), 0, 20);
    std::fs::remove_file(root.path().join("features.tsv")).unwrap();
    let w = root.path().join("none.json");
    let o = run(&[
        "track",
        "--seq",
        s(root.path()),
        "--weights",
        s(&w),
        "--out",
        s(&root.path().join("o.txt")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("none.json"), "{}", stderr(&o));

    let o = run(&["eval", "--pred", s(&root.path().join("missing.txt")), "--gt", s(&root.path().join("gt.txt"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.txt"));
}
