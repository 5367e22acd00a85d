//! Model files.
//!
//! A model is two text files. The parameter container:
//!
//! ```text
//! relex-model v1
//! emb.word 1234 200
//! <one line per row, values in 9 significant digits>
//! ...
//! end
//! ```
//!
//! and a metadata sidecar (`<model>.meta`) with the architecture keys and
//! the vocabulary the parameters are indexed by.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context as _};
use relex_core::bilou::TagAlphabet;
use relex_core::model::{Model, ModelConfig};
use relex_core::vocab::{Alphabet, RelationLabels, Vocabulary, ROOT, UNK};
use relex_core::{ParamStore, Tensor};

use crate::config::{RunConfig, MODEL_KEYS};

pub const MODEL_HEADER: &str = "relex-model v1";
pub const META_HEADER: &str = "relex-meta v1";
const END: &str = "end";

/// The parameter container text.
pub fn write_params(store: &ParamStore) -> String {
    let mut out = String::new();
    out.push_str(MODEL_HEADER);
    out.push('\n');
    for (_, p) in store.iter() {
        let (rows, cols) = p.value.shape();
        let _ = writeln!(out, "{} {rows} {cols}", p.name);
        for r in 0..rows {
            let row: Vec<String> = p.value.row(r).iter().map(|v| format!("{v:.8e}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out.push_str(END);
    out.push('\n');
    out
}

/// Parses a parameter container into `(name, value)` pairs in file order.
pub fn parse_params(text: &str) -> anyhow::Result<Vec<(String, Tensor)>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, MODEL_HEADER)) => {}
        _ => bail!("line 1: expected {MODEL_HEADER:?}"),
    }
    let mut params = Vec::new();
    loop {
        let Some((n, line)) = lines.next() else { bail!("missing {END:?} line") };
        if line == END {
            break;
        }
        let fields: Vec<&str> = line.split(' ').collect();
        ensure!(fields.len() == 3, "line {n}: expected `name rows cols`");
        let rows: usize = fields[1].parse().with_context(|| format!("line {n}: bad row count"))?;
        let cols: usize = fields[2].parse().with_context(|| format!("line {n}: bad column count"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let Some((m, row)) = lines.next() else { bail!("{}: truncated", fields[0]) };
            let before = data.len();
            for v in row.split(' ') {
                data.push(v.parse::<f64>().with_context(|| format!("line {m}: {v:?} is not a number"))?);
            }
            ensure!(data.len() - before == cols, "line {m}: expected {cols} values");
        }
        params.push((fields[0].to_string(), Tensor::from_vec(rows, cols, data)?));
    }
    ensure!(lines.all(|(_, l)| l.trim().is_empty()), "content after {END:?}");
    Ok(params)
}

/// Fills a copy of `template` with parsed values; names and shapes must
/// match exactly.
pub fn restore_params(template: &ParamStore, values: Vec<(String, Tensor)>) -> anyhow::Result<ParamStore> {
    ensure!(
        values.len() == template.len(),
        "model file has {} parameters, the architecture needs {}",
        values.len(),
        template.len()
    );
    let mut store = template.clone();
    let mut seen = std::collections::HashSet::new();
    for (name, value) in values {
        ensure!(seen.insert(name.clone()), "parameter {name} appears twice");
        store.assign(&name, value)?;
    }
    Ok(store)
}

fn as_refs(items: &[String]) -> Vec<&str> {
    items.iter().map(String::as_str).collect()
}

fn write_alphabet(out: &mut String, name: &str, items: &[&str]) {
    let _ = writeln!(out, "{name} {}", items.len());
    for item in items {
        out.push_str(item);
        out.push('\n');
    }
}

/// The metadata sidecar text.
pub fn write_meta(model: &Model) -> String {
    let mut out = String::from(META_HEADER);
    out.push('\n');
    for key in MODEL_KEYS {
        let value = RunConfig::model_value(&model.config, key).expect("model key");
        let _ = writeln!(out, "{key} = {value}");
    }
    let v = &model.vocab;
    let _ = writeln!(out, "negative_relation = {}", v.negative_relation.as_deref().unwrap_or("-"));
    let collect = |a: &Alphabet| a.iter().map(|(_, s)| s.to_string()).collect::<Vec<_>>();
    let (words, pos, deprels) = (collect(&v.words), collect(&v.pos), collect(&v.deprels));
    write_alphabet(&mut out, "words", &as_refs(&words));
    write_alphabet(&mut out, "pos", &as_refs(&pos));
    write_alphabet(&mut out, "deprels", &as_refs(&deprels));
    write_alphabet(&mut out, "entity_types", &as_refs(v.tags.types()));
    write_alphabet(&mut out, "relation_types", &as_refs(v.relations.types()));
    out.push_str(END);
    out.push('\n');
    out
}

fn read_list<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, name: &str) -> anyhow::Result<Vec<&'a str>> {
    let Some((n, line)) = lines.next() else { bail!("missing {name} section") };
    let count = line
        .strip_prefix(name)
        .and_then(|rest| rest.trim().parse::<usize>().ok())
        .with_context(|| format!("line {n}: expected `{name} <count>`"))?;
    (0..count)
        .map(|_| lines.next().map(|(_, l)| l).with_context(|| format!("{name} list is truncated")))
        .collect()
}

fn alphabet(items: &[&str], reserved: &[&str], name: &str) -> anyhow::Result<Alphabet> {
    ensure!(items.len() >= reserved.len() && items[..reserved.len()] == *reserved, "{name} list lacks reserved entries");
    let mut a = Alphabet::with_reserved(reserved);
    for item in &items[reserved.len()..] {
        let before = a.len();
        a.insert(item);
        ensure!(a.len() == before + 1, "{name} list repeats {item:?}");
    }
    Ok(a)
}

/// Parses a metadata sidecar into the architecture and vocabulary.
pub fn parse_meta(text: &str) -> anyhow::Result<(ModelConfig, Vocabulary)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, META_HEADER)) => {}
        _ => bail!("line 1: expected {META_HEADER:?}"),
    }
    let mut config = RunConfig::default();
    for key in MODEL_KEYS.iter().chain(["negative_relation"].iter()) {
        let Some((n, line)) = lines.next() else { bail!("missing key {key}") };
        let (k, v) = line.split_once(" = ").with_context(|| format!("line {n}: expected `{key} = value`"))?;
        ensure!(k == *key, "line {n}: expected key {key}, found {k}");
        config.set(k, v).with_context(|| format!("line {n}"))?;
    }
    let words = read_list(&mut lines, "words")?;
    let pos = read_list(&mut lines, "pos")?;
    let deprels = read_list(&mut lines, "deprels")?;
    let entity_types = read_list(&mut lines, "entity_types")?;
    let relation_types = read_list(&mut lines, "relation_types")?;
    ensure!(lines.next().map(|(_, l)| l) == Some(END), "missing {END:?} line");
    let vocab = Vocabulary {
        words: alphabet(&words, &[UNK], "words")?,
        pos: alphabet(&pos, &[UNK], "pos")?,
        deprels: alphabet(&deprels, &[UNK, ROOT], "deprels")?,
        tags: TagAlphabet::new(entity_types),
        relations: RelationLabels::new(relation_types.into_iter().map(String::from).collect()),
        negative_relation: config.negative_relation.clone(),
    };
    Ok((config.model, vocab))
}

pub fn meta_path(model: &Path) -> PathBuf {
    let mut name = model.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

pub fn save_model(model: &Model, path: &Path) -> anyhow::Result<()> {
    std::fs::write(path, write_params(&model.params)).with_context(|| format!("cannot write {}", path.display()))?;
    let meta = meta_path(path);
    std::fs::write(&meta, write_meta(model)).with_context(|| format!("cannot write {}", meta.display()))
}

/// Loads a model saved by [`save_model`].
pub fn load_model(path: &Path) -> anyhow::Result<Model> {
    let meta = meta_path(path);
    let meta_text = std::fs::read_to_string(&meta).with_context(|| format!("cannot read {}", meta.display()))?;
    let (config, vocab) = parse_meta(&meta_text).with_context(|| format!("invalid metadata {}", meta.display()))?;
    let template = Model::new(config, vocab, 0)?;
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let values = parse_params(&text).with_context(|| format!("invalid model file {}", path.display()))?;
    let store = restore_params(&template.params, values).with_context(|| format!("model file {} does not fit its metadata", path.display()))?;
    Ok(template.with_params(store)?)
}
