use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_convsearch"))
}

fn minibench() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/minibench")
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn build_index(dir: &Path) -> PathBuf {
    let index = dir.join("idx.bin");
    let corpus = minibench().join("corpus.jsonl");
    let out = ok(bin().args(["index", "--corpus"]).arg(&corpus).arg("--out").arg(&index).output().unwrap());
    assert!(out.starts_with("indexed 2000 documents"), "{out}");
    index
}

#[test]
fn classify_single_and_batch() {
    let out = ok(bin().args(["classify", "--question", "How much does it cost?"]).output().unwrap());
    assert_eq!(out, "HowMuch\n");
    let dir = tempfile::tempdir().unwrap();
    let batch = dir.path().join("q.txt");
    std::fs::write(&batch, "Who invented penicillin?\n\nWhy is the sky blue?\n").unwrap();
    let out = ok(bin().args(["classify", "--batch"]).arg(&batch).output().unwrap());
    assert_eq!(out, "Who invented penicillin?\tWho\nWhy is the sky blue?\tWhy\n");
}

#[test]
fn run_eval_compare() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index(dir.path());
    let topics = minibench().join("topics.json");
    let qrels = minibench().join("qrels.txt");
    let method = dir.path().join("method.trec");
    let baseline = dir.path().join("baseline.trec");
    for (path, extra) in [(&method, None), (&baseline, Some("--baseline"))] {
        let mut cmd = bin();
        cmd.args(["run", "--topics"]).arg(&topics).arg("--index").arg(&index).arg("--out").arg(path);
        cmd.args(extra);
        ok(cmd.output().unwrap());
    }
    assert!(dir.path().join("method.trec.categories.tsv").exists());
    let params: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("method.trec.params.json")).unwrap()).unwrap();
    assert_eq!(params["weights"]["first"], 3.25);
    assert_eq!(params["rerank_lambda"], 0.5);
    assert!(params["rules_hash"].is_string() && params["lexicon_hash"].is_string());

    let out = ok(bin().args(["eval", "--format", "tsv", "--k", "10", "--run"]).arg(&method).arg("--qrels").arg(&qrels).output().unwrap());
    assert!(out.lines().any(|l| l.starts_with("all\trecall\t10\t")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("HowMuch\t")), "categories sidecar was not picked up:\n{out}");

    let out = ok(bin().arg("compare").arg(&baseline).arg(&method).arg("--qrels").arg(&qrels).args(["--k", "10"]).output().unwrap());
    let all_recall = out.lines().find(|l| l.starts_with("all\trecall\t10")).unwrap();
    let delta: f64 = all_recall.rsplit('\t').next().unwrap().parse().unwrap();
    assert!(delta >= 0.10, "{out}");
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index(dir.path());
    let topics = minibench().join("topics.json");
    let mut files = Vec::new();
    for name in ["a.trec", "b.trec"] {
        let out = dir.path().join(name);
        ok(bin().args(["run", "--baseline", "--topics"]).arg(&topics).arg("--index").arg(&index).arg("--out").arg(&out).output().unwrap());
        files.push(std::fs::read(out).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index(dir.path());
    let config = dir.path().join("cs.toml");
    std::fs::write(&config, "[retrieval]\nk = 7\n[rerank]\nlambda = 0.0\n").unwrap();
    let topics = minibench().join("topics.json");
    let run = dir.path().join("r.trec");
    let mut cmd = bin();
    cmd.arg("--config").arg(&config).args(["run", "--k", "3", "--topics"]).arg(&topics).arg("--index").arg(&index).arg("--out").arg(&run);
    ok(cmd.output().unwrap());
    let params: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.trec.params.json")).unwrap()).unwrap();
    assert_eq!(params["k"], 3);
    assert_eq!(params["rerank_lambda"], 0.0);
    let text = std::fs::read_to_string(&run).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("1_1 ")).count(), 3);

    let out = ok(bin().arg("--config").arg(&config).args(["search", "-q", "solar panel cost", "--index"]).arg(&index).output().unwrap());
    assert_eq!(out.lines().count(), 7);
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index(dir.path());
    let topics = minibench().join("topics.json");
    let out = bin().args(["run", "--no-stem", "--topics"]).arg(&topics).arg("--index").arg(&index).arg("--out").arg(dir.path().join("x")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("config mismatch"));

    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "[]").unwrap();
    let run = dir.path().join("empty.trec");
    let out = bin().args(["run", "--topics"]).arg(&empty).arg("--index").arg(&index).arg("--out").arg(&run).output().unwrap();
    assert!(!out.status.success());
    assert!(!run.exists(), "no output may be written for an empty topics file");

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[rerank]\nlamda = 1\n").unwrap();
    let out = bin().arg("--config").arg(&bad).args(["classify", "--question", "who?"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn gen_bench_matches_checked_in_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(bin().args(["gen-bench", "--out"]).arg(dir.path()).output().unwrap());
    for name in ["corpus.jsonl", "topics.json", "qrels.txt"] {
        assert_eq!(std::fs::read(dir.path().join(name)).unwrap(), std::fs::read(minibench().join(name)).unwrap(), "{name}");
    }
}
