//! Micro precision/recall/F1 over exact span matches and macro-F1 over
//! relation types.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::sentence::{EntitySpan, RelationInstance};

/// True positive, false positive and false negative counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

impl core::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

fn set_counts<T: Ord>(gold: BTreeSet<T>, pred: BTreeSet<T>) -> Counts {
    let tp = gold.intersection(&pred).count();
    Counts { tp, fp: pred.len() - tp, fn_: gold.len() - tp }
}

/// Exact `(type, start, end)` matching; duplicates count once.
pub fn score_entities(gold: &[EntitySpan], pred: &[EntitySpan]) -> Counts {
    set_counts(gold.iter().collect(), pred.iter().collect())
}

/// A relation together with its argument spans, the unit of relation
/// scoring.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ScoredRelation {
    pub ty: String,
    pub arg1: EntitySpan,
    pub arg2: EntitySpan,
}

/// Attaches argument spans to relations. Relations whose arguments are not
/// span ends, or whose type is `negative`, are dropped.
pub fn attach_spans(
    entities: &[EntitySpan],
    relations: &[RelationInstance],
    negative: Option<&str>,
) -> Vec<ScoredRelation> {
    let find = |t: usize| entities.iter().find(|e| e.end == t);
    relations
        .iter()
        .filter(|r| Some(r.ty.as_str()) != negative)
        .filter_map(|r| {
            Some(ScoredRelation { ty: r.ty.clone(), arg1: find(r.arg1)?.clone(), arg2: find(r.arg2)?.clone() })
        })
        .collect()
}

/// A relation is correct iff type, direction and both argument spans
/// (type and region) match a gold relation. Duplicates count once.
pub fn score_relations(gold: &[ScoredRelation], pred: &[ScoredRelation]) -> Counts {
    set_counts(gold.iter().collect(), pred.iter().collect())
}

/// Per-type counts with the same matching rule as [`score_relations`].
pub fn score_relations_by_type(gold: &[ScoredRelation], pred: &[ScoredRelation]) -> BTreeMap<String, Counts> {
    let mut out: BTreeMap<String, Counts> = BTreeMap::new();
    let types: BTreeSet<&str> = gold.iter().chain(pred).map(|r| r.ty.as_str()).collect();
    for ty in types {
        let g: Vec<ScoredRelation> = gold.iter().filter(|r| r.ty == ty).cloned().collect();
        let p: Vec<ScoredRelation> = pred.iter().filter(|r| r.ty == ty).cloned().collect();
        out.insert(ty.into(), score_relations(&g, &p));
    }
    out
}

/// Unweighted mean of per-class F1.
pub fn macro_f1(classes: &[Counts]) -> Result<f64> {
    if classes.is_empty() {
        return Err(Error::Empty("relation classes"));
    }
    Ok(classes.iter().map(Counts::f1).sum::<f64>() / classes.len() as f64)
}

/// Corpus-level scores.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub entity: Counts,
    pub relation: Counts,
    pub per_type: BTreeMap<String, Counts>,
}

impl MetricReport {
    /// Adds one sentence. `negative` names a relation type that means "no
    /// relation" and is ignored on both sides.
    pub fn add_sentence(
        &mut self,
        gold_entities: &[EntitySpan],
        gold_relations: &[RelationInstance],
        pred_entities: &[EntitySpan],
        pred_relations: &[RelationInstance],
        negative: Option<&str>,
    ) {
        self.entity += score_entities(gold_entities, pred_entities);
        let g = attach_spans(gold_entities, gold_relations, negative);
        let p = attach_spans(pred_entities, pred_relations, negative);
        self.relation += score_relations(&g, &p);
        for (ty, c) in score_relations_by_type(&g, &p) {
            *self.per_type.entry(ty).or_default() += c;
        }
    }

    pub fn merge(&mut self, other: &MetricReport) {
        self.entity += other.entity;
        self.relation += other.relation;
        for (ty, c) in &other.per_type {
            *self.per_type.entry(ty.clone()).or_default() += *c;
        }
    }

    /// Macro-F1 over the relation types seen in gold or predictions.
    pub fn macro_f1(&self) -> Option<f64> {
        let classes: Vec<Counts> = self.per_type.values().copied().collect();
        macro_f1(&classes).ok()
    }

    /// `ENT P R F1 REL P R F1` with four decimals.
    pub fn machine_line(&self) -> String {
        let (e, r) = (&self.entity, &self.relation);
        alloc::format!(
            "ENT {:.4} {:.4} {:.4} REL {:.4} {:.4} {:.4}",
            e.precision(),
            e.recall(),
            e.f1(),
            r.precision(),
            r.recall(),
            r.f1()
        )
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.per_type.keys().map(|t| t.chars().count() + 3).max().unwrap_or(0).max(16);
        writeln!(f, "{:<w$} {:>9} {:>9} {:>9} {:>6} {:>6} {:>6}", "", "precision", "recall", "f1", "tp", "fp", "fn")?;
        let row = |f: &mut fmt::Formatter<'_>, name: &str, c: &Counts| {
            writeln!(
                f,
                "{:<w$} {:>9.3} {:>9.3} {:>9.3} {:>6} {:>6} {:>6}",
                name,
                c.precision(),
                c.recall(),
                c.f1(),
                c.tp,
                c.fp,
                c.fn_
            )
        };
        row(f, "entities", &self.entity)?;
        row(f, "relations", &self.relation)?;
        for (ty, c) in &self.per_type {
            row(f, &alloc::format!("  {ty}"), c)?;
        }
        if let Some(m) = self.macro_f1() {
            writeln!(f, "{:<w$} {:>29.3}", "macro-f1", m)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn span(ty: &str, s: usize, e: usize) -> EntitySpan {
        EntitySpan::new(ty, s, e)
    }

    #[test]
    fn hand_computed_entity_fixture() {
        let gold = vec![span("PER", 0, 1), span("LOC", 3, 3), span("ORG", 5, 6), span("PER", 8, 8)];
        let pred = vec![
            span("PER", 0, 1),
            span("LOC", 3, 3),
            span("ORG", 5, 6),
            span("LOC", 8, 8),
            span("PER", 10, 10),
        ];
        let c = score_entities(&gold, &pred);
        assert_eq!(c, Counts { tp: 3, fp: 2, fn_: 1 });
        assert_eq!(alloc::format!("{:.4} {:.4} {:.4}", c.precision(), c.recall(), c.f1()), "0.6000 0.7500 0.6667");
    }

    #[test]
    fn zero_denominators_are_zero() {
        let c = Counts::default();
        assert_eq!((c.precision(), c.recall(), c.f1()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn wrong_argument_region_is_a_false_positive() {
        let gold_e = vec![span("PER", 0, 1), span("LOC", 5, 5)];
        let pred_e = vec![span("PER", 1, 1), span("LOC", 5, 5)];
        let rel = vec![RelationInstance::new(1, 5, "PHYS")];
        let mut report = MetricReport::default();
        report.add_sentence(&gold_e, &rel, &pred_e, &rel, None);
        assert_eq!(report.relation, Counts { tp: 0, fp: 1, fn_: 1 });
    }

    #[test]
    fn flipped_direction_counts_twice() {
        let e = vec![span("PER", 0, 0), span("LOC", 2, 2)];
        let mut report = MetricReport::default();
        report.add_sentence(&e, &[RelationInstance::new(0, 2, "PHYS")], &e, &[RelationInstance::new(2, 0, "PHYS")], None);
        assert_eq!(report.relation, Counts { tp: 0, fp: 1, fn_: 1 });
    }

    #[test]
    fn macro_average() {
        let perfect = Counts { tp: 3, fp: 0, fn_: 0 };
        let zero = Counts { tp: 0, fp: 2, fn_: 1 };
        assert_eq!(macro_f1(&[perfect, perfect]).unwrap(), 1.0);
        assert_eq!(macro_f1(&[perfect, zero]).unwrap(), 0.5);
        assert!(macro_f1(&[]).is_err());
    }

    #[test]
    fn machine_line_format() {
        let mut r = MetricReport::default();
        let e = vec![span("PER", 0, 0)];
        r.add_sentence(&e, &[], &e, &[], None);
        assert_eq!(r.machine_line(), "ENT 1.0000 1.0000 1.0000 REL 0.0000 0.0000 0.0000");
    }
}
