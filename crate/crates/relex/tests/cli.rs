use std::path::Path;
use std::process::{Command, Output};

fn relex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relex")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_with_2() {
    for args in [&["frobnicate"][..], &[], &["eval"], &["gen-synthetic", "-n", "many"], &["train", "--bogus"]] {
        let o = relex(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    assert_eq!(relex(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.txt");
    let o = relex(&["eval", "-g", arg(&missing), "-p", arg(&missing)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: "), "{}", stderr(&o));

    let o = relex(&["train", "--set", "learning_rat=0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learning_rat"));

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1\tAnn\tNNP\t0\troot\tL-PER\n").unwrap();
    let o = relex(&["inspect-path", "-c", arg(&bad), "-s", "1", "1", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1, column 6"), "{}", stderr(&o));
}

#[test]
fn gold_scored_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.txt");
    let o = relex(&["gen-synthetic", "-n", "15", "--seed", "3", "-o", arg(&gold)]);
    assert!(o.status.success());
    let o = relex(&["eval", "-g", arg(&gold), "-p", arg(&gold)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().last(), Some("ENT 1.0000 1.0000 1.0000 REL 1.0000 1.0000 1.0000"));
}

#[test]
fn gradcheck_small_dims() {
    let o = relex(&["gradcheck", "--dims", "small", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).lines().last().unwrap().starts_with("all "));
}

#[test]
fn inspect_path_prints_the_structure() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.txt");
    std::fs::write(
        &corpus,
        "1\tSidney\tNNP\t2\tnn\tB-PER\n2\tYates\tNNP\t4\tnsubjpass\tL-PER\n3\twas\tVBD\t4\tauxpass\tO\n\
         4\tborn\tVBN\t0\troot\tO\n5\tin\tIN\t4\tprep\tO\n6\tChicago\tNNP\t5\tpobj\tU-GPE\n",
    )
    .unwrap();
    let o = relex(&["inspect-path", "-c", arg(&corpus), "-s", "1", "2", "6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("lca: 4 born"), "{out}");
    assert!(out.contains("path: 2 Yates -> 4 born -> 5 in -> 6 Chicago"), "{out}");
    let o = relex(&["inspect-path", "-c", arg(&corpus), "-s", "1", "2", "9"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_predict_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (train, model, pred) = (dir.path().join("t.txt"), dir.path().join("m.model"), dir.path().join("p.txt"));
    assert!(relex(&["gen-synthetic", "-n", "8", "-o", arg(&train)]).status.success());
    let config = dir.path().join("run.conf");
    std::fs::write(
        &config,
        format!(
            "# tiny run\ntrain = {}\nmodel = {}\nepochs = 2\npretrain_epochs = 1\nword_dim = 8\nseq_hidden = 6\n\
             tree_hidden = 6\nentity_hidden = 6\nrelation_hidden = 6\n",
            arg(&train),
            arg(&model)
        ),
    )
    .unwrap();
    let o = relex(&["train", "-c", arg(&config), "--set", "seed=3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let log = stdout(&o);
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch ")).count(), 2, "{log}");

    let o = relex(&["predict", "-m", arg(&model), "-i", arg(&train), "-o", arg(&pred), "--threads", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let predicted = std::fs::read_to_string(&pred).unwrap();
    let gold = std::fs::read_to_string(&train).unwrap();
    assert_eq!(predicted.lines().filter(|l| !l.starts_with('#')).count(), gold.lines().filter(|l| !l.starts_with('#')).count());

    let from_file = relex(&["eval", "-g", arg(&train), "-p", arg(&pred)]);
    let from_model = relex(&["eval", "-g", arg(&train), "-m", arg(&model)]);
    assert!(from_file.status.success() && from_model.status.success());
    assert_eq!(stdout(&from_file), stdout(&from_model));
}
