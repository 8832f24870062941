use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn sga(args: &[&str]) -> Output {
    sga_env(args, None)
}

fn sga_env(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sga"));
    cmd.args(args).env_remove("SGA_SEED");
    if let Some(s) = seed {
        cmd.env("SGA_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// All files below `dir`, relative path and contents, sorted by path.
fn tree_contents(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn missing_input_is_a_usage_error() {
    let out = sga(&["graph", "/definitely/not/here.conllu"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not/here.conllu"));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    assert_eq!(code(&sga(&["verify", "bogus"])), 2);
}

#[test]
fn encode_needs_params_or_random_init() {
    let tmp = TempDir::new().unwrap();
    let input = fixture("dogs_bark.conllu");
    let out = sga(&["encode", path_str(&input), "-o", path_str(tmp.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn malformed_conllu_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.conllu");
    fs::write(&bad, "1\tDogs\tdog\tNOUN\t_\t_\t7\tnsubj\t_\t_\n\n").unwrap();
    let out = sga(&["paths", path_str(&bad)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn algebra_suite_passes() {
    let out = sga(&["verify", "algebra", "--seed", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["seed"], 5);
    let checks = report["checks"].as_array().unwrap();
    let four = checks.iter().find(|c| c["name"] == "four_term_identity").unwrap();
    assert_eq!(four["pass"], true);
    assert!(four["measured"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn gradcheck_suite_writes_report_file() {
    let tmp = TempDir::new().unwrap();
    let report_path = tmp.path().join("grad.json");
    let out = sga(&["verify", "gradcheck", "-o", path_str(&report_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    let check = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "end_to_end_gradient")
        .unwrap()
        .clone();
    assert!(check["measured"].as_f64().unwrap() <= 1e-5);
}

#[test]
fn two_token_dot_output() {
    let tmp = TempDir::new().unwrap();
    let input = fixture("dogs_bark.conllu");
    let out = sga(&["graph", path_str(&input), "-o", path_str(tmp.path())]);
    assert_eq!(code(&out), 0);
    let dot = fs::read_to_string(tmp.path().join("001-dogs-bark.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches("style=solid").count(), 2);
    assert_eq!(dot.matches("style=dashed").count(), 2);
}

#[test]
fn figure_sentence_json_output() {
    let tmp = TempDir::new().unwrap();
    let input = fixture("morning_flight.conllu");
    let out = sga(&["graph", path_str(&input), "--format", "json", "-o", path_str(tmp.path())]);
    assert_eq!(code(&out), 0);
    let file = fs::read_dir(tmp.path()).unwrap().next().unwrap().unwrap().path();
    assert_eq!(file.extension().unwrap(), "json");
    let g: serde_json::Value = serde_json::from_str(&fs::read_to_string(file).unwrap()).unwrap();
    assert_eq!(g["edge_count"], 22);
    assert_eq!(g["self_loop_count"], 8);
}

#[test]
fn paths_tsv_covers_every_word_pair() {
    let input = fixture("morning_flight.conllu");
    let out = sga(&["paths", path_str(&input)]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sentence\tfrom\tto\tfrom_form\tto_form\thops\tpath");
    assert_eq!(lines.len(), 1 + 64);
    let denver = lines.iter().find(|l| l.contains("\tI\tDenver\t")).unwrap();
    assert!(denver.ends_with("\t3\tnsubj:rev obj:fwd nmod:fwd"), "{denver}");
}

#[test]
fn default_encode_writes_one_map_per_block_and_head() {
    let tmp = TempDir::new().unwrap();
    let input = fixture("dogs_bark.conllu");
    let out = sga(&["encode", path_str(&input), "--random-init", "--dump-scores", "-o", path_str(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("001-dogs-bark");
    let names: Vec<String> = fs::read_dir(dir.join("attention"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.iter().filter(|n| !n.ends_with("_scores.csv")).count(), 24);
    assert_eq!(names.iter().filter(|n| n.ends_with("_scores.csv")).count(), 24);
    assert!(dir.join("embeddings.sga").is_file());
    assert!(dir.join("relations.json").is_file());

    // the space is not a graph node, so "Dogs bark" gives 8 rows under the header
    let csv = fs::read_to_string(dir.join("attention/block00_head00.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    for row in csv.lines().skip(1) {
        let sum: f64 = row.split(',').skip(1).map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn repeated_encodes_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let input = fixture("morning_flight.conllu");
    for dir in [&a, &b] {
        let out = sga(&["encode", path_str(&input), "--random-init", "--toy", "--seed", "9", "-o", path_str(dir.path())]);
        assert_eq!(code(&out), 0);
    }
    let contents = tree_contents(a.path());
    assert!(!contents.is_empty());
    assert_eq!(contents, tree_contents(b.path()));
}

#[test]
fn zero_relations_match_the_baseline_encoder() {
    let zero = TempDir::new().unwrap();
    let base = TempDir::new().unwrap();
    let input = fixture("corpus10.conllu");
    let run = |flag: &str, dir: &TempDir| {
        let out = sga(&["encode", path_str(&input), "--random-init", "--toy", "--seed", "4", flag, "-o", path_str(dir.path())]);
        assert_eq!(code(&out), 0);
    };
    run("--zero-relations", &zero);
    run("--baseline", &base);
    assert_eq!(tree_contents(zero.path()), tree_contents(base.path()));
}

#[test]
fn sga_seed_is_the_seed_fallback() {
    let input = fixture("dogs_bark.conllu");
    let run = |extra: &[&str], seed: Option<&str>| {
        let tmp = TempDir::new().unwrap();
        let mut args = vec!["encode", path_str(&input), "--random-init", "--toy", "-o", path_str(tmp.path())];
        args.extend_from_slice(extra);
        let out = sga_env(&args, seed);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(tmp.path().join("001-dogs-bark/embeddings.sga")).unwrap()
    };
    let from_env = run(&[], Some("7"));
    assert_eq!(from_env, run(&["--seed", "7"], None));
    assert_ne!(from_env, run(&[], None));
    assert_eq!(run(&["--seed", "7"], Some("8")), from_env);

    let out = sga_env(&["verify", "graph"], Some("not-a-number"));
    assert_eq!(code(&out), 2);
}

#[test]
fn saved_params_reload_and_mismatches_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let input = fixture("dogs_bark.conllu");
    let params = tmp.path().join("model.sga");
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let out = sga(&[
        "encode", path_str(&input), "--random-init", "--toy", "--seed", "3",
        "--save-params", path_str(&params), "-o", path_str(&first),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(&fs::read(&params).unwrap()[..4], b"SGA1");

    let out = sga(&["encode", path_str(&input), "--toy", "--params", path_str(&params), "-o", path_str(&second)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(tree_contents(&first), tree_contents(&second));

    let out = sga(&[
        "encode", path_str(&input), "--toy", "--set", "d_model=16", "--params", path_str(&params),
        "-o", path_str(&tmp.path().join("third")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("do not fit"));
}

#[test]
fn config_file_and_overrides() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("model.cfg");
    fs::write(&cfg, "# small model\ntoy = true\nN = 3\nseed = 2\n").unwrap();
    let input = fixture("dogs_bark.conllu");
    let out = sga(&["encode", path_str(&input), "--random-init", "--config", path_str(&cfg), "-o", path_str(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let maps = fs::read_dir(tmp.path().join("001-dogs-bark/attention")).unwrap().count();
    assert_eq!(maps, 3 * 2);

    fs::write(&cfg, "dropout = 0.1\n").unwrap();
    let out = sga(&["encode", path_str(&input), "--random-init", "--config", path_str(&cfg), "-o", path_str(tmp.path())]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

fn loss_curve(args: &[&str]) -> Vec<(usize, f64)> {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("loss.csv");
    let corpus = fixture("corpus10.conllu");
    let mut all = vec!["toytrain", path_str(&corpus), "-o", path_str(&csv)];
    all.extend_from_slice(args);
    let out = sga(&all);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epoch,loss"));
    lines
        .map(|l| {
            let (e, v) = l.split_once(',').unwrap();
            (e.parse().unwrap(), v.parse().unwrap())
        })
        .collect()
}

#[test]
fn toytrain_zero_epochs_reports_only_the_initial_loss() {
    let curve = loss_curve(&["--epochs", "0"]);
    assert_eq!(curve.len(), 1);
    assert_eq!(curve[0].0, 0);
    assert!(curve[0].1 > 0.0);
}

#[test]
fn toytrain_is_reproducible_and_learns() {
    let a = loss_curve(&["--epochs", "20", "--seed", "1"]);
    let b = loss_curve(&["--epochs", "20", "--seed", "1"]);
    assert_eq!(a, b);
    assert_eq!(a.len(), 21);
    assert!(a[20].1 < a[0].1);
}

#[test]
fn toytrain_rejects_an_empty_corpus() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty.conllu");
    fs::write(&empty, "").unwrap();
    let out = sga(&["toytrain", path_str(&empty), "-o", path_str(&tmp.path().join("loss.csv"))]);
    assert_eq!(code(&out), 2);
}
