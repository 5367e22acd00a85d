use relex::config::{ConfigError, RunConfig, KEYS};
use relex_core::depstruct::StructureKind;
use relex_core::model::CandidateMode;

#[test]
fn file_with_comments_and_overrides() {
    let mut c = RunConfig::parse(
        "# joint model\ntrain = data/train.txt\nepochs = 30   # fewer\n\nstructure = subtree\ncandidates = l2r_only\n",
    )
    .unwrap();
    assert_eq!(c.train.epochs, 30);
    assert_eq!(c.model.structure, StructureKind::SubTree);
    assert_eq!(c.model.candidates, CandidateMode::LeftToRight);
    c.apply_override("epochs=12").unwrap();
    c.apply_override("dev = data/dev.txt").unwrap();
    assert_eq!(c.train.epochs, 12);
    assert_eq!(c.dev_path.as_deref(), Some(std::path::Path::new("data/dev.txt")));
}

#[test]
fn unknown_keys_are_rejected() {
    let e = RunConfig::parse("epochs = 3\nlearning_rat = 0.01\n").unwrap_err();
    assert_eq!(e, ConfigError::At { line: 2, source: Box::new(ConfigError::UnknownKey("learning_rat".into())) });
    assert!(RunConfig::default().apply_override("nope=1").is_err());
    assert!(RunConfig::default().apply_override("epochs").is_err());
    assert_eq!(RunConfig::parse("epochs 3\n").unwrap_err(), ConfigError::Syntax { line: 1 });
}

#[test]
fn bad_values_name_the_key() {
    let e = RunConfig::parse("dropout = lots\n").unwrap_err();
    assert!(e.to_string().contains("dropout"), "{e}");
    assert!(RunConfig::parse("structure = forest\n").is_err());
}

#[test]
fn tuning_ranges_are_enforced_unless_waived() {
    let mut c = RunConfig::parse("learning_rate = 0.5\n").unwrap();
    assert!(c.validate().is_err());
    c.apply_override("allow_out_of_range=true").unwrap();
    c.validate().unwrap();
    assert!(RunConfig::parse("epochs = 500\n").unwrap().validate().is_err());
    RunConfig::parse("l2 = 0\n").unwrap().validate().unwrap();
    // hard limits hold regardless
    let c = RunConfig::parse("dropout = 1.0\nallow_out_of_range = true\n").unwrap();
    assert!(c.validate().is_err());
}

#[test]
fn relation_only_turns_label_embeddings_off_by_default() {
    let c = RunConfig::parse("relation_only = true\n").unwrap();
    assert!(!c.model.label_embeddings);
    c.validate().unwrap();
    let c = RunConfig::parse("relation_only = true\nlabel_embeddings = true\n").unwrap();
    assert!(c.validate().is_err());
}

#[test]
fn paths_are_checked_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.txt");
    let mut c = RunConfig::default();
    c.train_path = Some(train.clone());
    c.model_path = Some(dir.path().join("m.model"));
    assert!(c.validate_paths().is_err());
    std::fs::write(&train, "").unwrap();
    c.validate_paths().unwrap();
    c.model_path = Some(dir.path().join("missing/m.model"));
    assert!(c.validate_paths().is_err());
}

#[test]
fn every_key_is_accepted() {
    let mut c = RunConfig::default();
    for (key, _) in KEYS {
        let value = match *key {
            "structure" => "fulltree",
            "candidates" => "both",
            "pair" | "label_embeddings" | "shared" | "constrained_decoding" | "relation_only" | "allow_out_of_range" => {
                "false"
            }
            "train" | "dev" | "test" | "vectors" | "model" | "log" | "negative_relation" => "x",
            "schedule_k" | "clip" => "5",
            "learning_rate" | "l2" | "dropout" | "forget_bias" => "0.001",
            _ => "3",
        };
        c.set(key, value).unwrap_or_else(|e| panic!("{key}: {e}"));
    }
}
