use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_srlssvm"));
    c.env_remove("SRLSSVM_THREADS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn strip_timing(mut v: Value) -> Value {
    match &mut v {
        Value::Object(map) => {
            map.retain(|k, _| !matches!(k.as_str(), "wall_ms" | "train_ms" | "predict_time_ms"));
            for child in map.values_mut() {
                *child = strip_timing(child.take());
            }
        }
        Value::Array(items) => {
            for child in items.iter_mut() {
                *child = strip_timing(child.take());
            }
        }
        _ => {}
    }
    v
}

#[test]
fn train_writes_model_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "train",
            "--data",
            "synthetic",
            "--seed",
            "0",
            "--rank",
            "3",
            "--kernel",
            "linear",
            "--model",
            "m.json",
            "--out",
            "r.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("m.json").exists());
    let report = json(&dir.path().join("r.json"));
    assert!(report["iterations"].as_u64().unwrap() >= 1);
    assert!(report["converged"].as_bool().unwrap());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("n_sv") && stdout.contains("iterations"));

    let eval = run(
        dir.path(),
        &["eval", "--data", "synthetic", "--model", "m.json", "--out", "e.json"],
    );
    assert_eq!(code(&eval), 0, "{}", stderr(&eval));
    let acc = json(&dir.path().join("e.json"))["accuracy"].as_f64().unwrap();
    assert!(acc > 0.8);

    let pred = run(
        dir.path(),
        &["predict", "--data", "synthetic", "--model", "m.json", "--format", "csv"],
    );
    assert_eq!(code(&pred), 0);
    let text = String::from_utf8(pred.stdout).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert!(text.starts_with("index,raw,prediction\n"));
}

#[test]
fn missing_dataset_is_a_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["train", "--data", "does-not-exist.txt"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("does-not-exist.txt"));
}

#[test]
fn rank_above_sample_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["train", "--data", "synthetic", "--rank", "61"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("rank"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["train", "--no-such-flag"])), 2);
    assert_eq!(
        code(&run(dir.path(), &["train", "--data", "synthetic", "--tau", "1,2"])),
        2
    );
    assert_eq!(
        code(&run(
            dir.path(),
            &["train", "--data", "synthetic", "--anneal-delta", "0.5"]
        )),
        2
    );
    assert_eq!(
        code(&run(dir.path(), &["bench", "--data", "synthetic", "--repeats", "0"])),
        2
    );
    let threads = bin()
        .current_dir(dir.path())
        .env("SRLSSVM_THREADS", "many")
        .args(["train", "--data", "synthetic"])
        .output()
        .unwrap();
    assert_eq!(code(&threads), 2);
}

#[test]
fn empty_grid_from_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("grid.toml"), "data = \"synthetic\"\nmlambda = []\n").unwrap();
    let out = run(dir.path(), &["gridsearch", "--config", "grid.toml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("empty"));
}

#[test]
fn ill_conditioned_system_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    // Constant first attribute: the centered Gram matrix is singular.
    let rows: String = (0..12)
        .map(|i| format!("{} 1:1 2:{}\n", if i % 2 == 0 { 1 } else { -1 }, i))
        .collect();
    std::fs::write(dir.path().join("flat.txt"), rows).unwrap();
    let out = run(
        dir.path(),
        &[
            "train",
            "--data",
            "flat.txt",
            "--kernel",
            "linear",
            "--rank",
            "2",
            "--mlambda",
            "1e-30",
        ],
    );
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "data = \"synthetic\"\nkernel = \"linear\"\nrank = 61\ntau = 1.5\nmodel = \"from-file.json\"\n",
    )
    .unwrap();
    assert_eq!(code(&run(dir.path(), &["train", "--config", "run.toml"])), 3);
    let out = run(dir.path(), &["train", "--config", "run.toml", "--rank", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("from-file.json").exists());

    std::fs::write(
        dir.path().join("run.json"),
        r#"{"data": "synthetic", "kernel": "linear", "rank": 2, "typo": 1}"#,
    )
    .unwrap();
    assert_eq!(code(&run(dir.path(), &["train", "--config", "run.json"])), 2);
}

#[test]
fn single_point_grid_uses_every_fold() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "gridsearch",
            "--data",
            "synthetic",
            "--kernel",
            "linear",
            "--rank",
            "2",
            "--mlambda",
            "0.1",
            "--tau",
            "1.5",
            "--folds",
            "4",
            "--out",
            "g.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let g = json(&dir.path().join("g.json"));
    assert_eq!(g["grid"].as_array().unwrap().len(), 1);
    assert_eq!(g["best"]["folds_used"], 4);
    assert_eq!(g["best"]["mlambda"], 0.1);
    assert_eq!(g["best"]["tau"], 1.5);
}

#[test]
fn gridsearch_selects_a_top_scoring_tuple() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "gridsearch",
            "--data",
            "synthetic",
            "--seed",
            "0",
            "--sigma",
            "0.1,1",
            "--mlambda",
            "0.01,1",
            "--tau",
            "1,1.5",
            "--rank",
            "10",
            "--out",
            "g.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let g = json(&dir.path().join("g.json"));
    let grid = g["grid"].as_array().unwrap();
    assert_eq!(grid.len(), 8);
    let top = grid
        .iter()
        .map(|r| r["mean"].as_f64().unwrap())
        .fold(f64::MIN, f64::max);
    let best = &g["best"];
    assert!(best["mean"].as_f64().unwrap() >= top - best["std"].as_f64().unwrap());
    // Canonical order regardless of scheduling.
    let keys: Vec<(f64, f64, f64)> = grid
        .iter()
        .map(|r| {
            (
                r["mlambda"].as_f64().unwrap(),
                r["sigma"].as_f64().unwrap(),
                r["tau"].as_f64().unwrap(),
            )
        })
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(keys, sorted);
}

#[test]
fn bench_rows_and_single_repeat_std() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "bench",
            "--data",
            "synthetic",
            "--kernel",
            "linear",
            "--rank",
            "2",
            "--repeats",
            "1",
            "--format",
            "csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,accuracy,n_sv,iterations,train_ms");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("srlssvm,") && lines[2].starts_with("lssvm,"));
    for line in &lines[1..] {
        for cell in line.split(',').skip(1) {
            assert!(cell.ends_with("(0.00)"), "{cell}");
        }
    }

    let one = run(
        dir.path(),
        &[
            "bench",
            "--data",
            "synthetic",
            "--kernel",
            "linear",
            "--rank",
            "2",
            "--repeats",
            "10",
            "--methods",
            "srlssvm",
            "--out",
            "b.json",
        ],
    );
    assert_eq!(code(&one), 0);
    let b = json(&dir.path().join("b.json"));
    assert_eq!(b["rows"].as_array().unwrap().len(), 1);
    assert_eq!(b["repeats"], 10);
}

#[test]
fn identical_runs_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let train_args = |tag: &str, threads: &str| {
        let out = bin()
            .current_dir(dir.path())
            .env("SRLSSVM_THREADS", threads)
            .args([
                "train",
                "--data",
                "synthetic",
                "--task",
                "reg",
                "--rank",
                "40",
                "--tau",
                "0.5",
                "--seed",
                "3",
            ])
            .args(["--model", &format!("m{tag}.json"), "--out", &format!("r{tag}.json")])
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    };
    train_args("a", "2");
    train_args("b", "2");
    train_args("c", "1");
    let model = std::fs::read(dir.path().join("ma.json")).unwrap();
    assert_eq!(model, std::fs::read(dir.path().join("mb.json")).unwrap());
    assert_eq!(model, std::fs::read(dir.path().join("mc.json")).unwrap());
    let report = strip_timing(json(&dir.path().join("ra.json")));
    assert_eq!(report, strip_timing(json(&dir.path().join("rb.json"))));
    assert_eq!(report, strip_timing(json(&dir.path().join("rc.json"))));

    let bench = |name: &str| {
        let out = run(
            dir.path(),
            &[
                "bench",
                "--data",
                "synthetic",
                "--kernel",
                "linear",
                "--rank",
                "2",
                "--repeats",
                "4",
                "--out",
                name,
            ],
        );
        assert_eq!(code(&out), 0);
        strip_timing(json(&dir.path().join(name)))
    };
    assert_eq!(bench("b1.json"), bench("b2.json"));
}

#[test]
fn sparse_files_with_held_out_set() {
    let dir = tempfile::tempdir().unwrap();
    let mut train = String::new();
    let mut test = String::new();
    for i in 0..40 {
        let y = if i % 2 == 0 { 4 } else { 2 };
        let x = if y == 4 { 1.0 } else { -1.0 } + 0.05 * (i % 7) as f64;
        train.push_str(&format!("{y} 1:{x} 2:{}\n", 0.1 * (i % 3) as f64));
        if i < 10 {
            test.push_str(&format!("{y} 1:{x}\n"));
        }
    }
    std::fs::write(dir.path().join("train.txt"), train).unwrap();
    std::fs::write(dir.path().join("test.txt"), test).unwrap();
    let out = run(
        dir.path(),
        &[
            "train",
            "--data",
            "train.txt",
            "--test",
            "test.txt",
            "--kernel",
            "linear",
            "--rank",
            "3",
            "--model",
            "m.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8(out.stdout).unwrap().contains("test accuracy 100.00%"));

    let bench = run(
        dir.path(),
        &[
            "bench",
            "--data",
            "train.txt",
            "--kernel",
            "linear",
            "--rank",
            "3",
            "--repeats",
            "3",
        ],
    );
    assert_eq!(code(&bench), 0, "{}", stderr(&bench));
}
