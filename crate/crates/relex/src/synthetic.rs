//! Template-generated corpora with gold parses, entities and relations.
//!
//! The entity corpus has three entity types (`PER`, `ORG`, `LOC`) and two
//! directed relation types (`EMP`, `PHYS`) written in both sentence orders,
//! plus distractor sentences without relations. The nominal corpus has one
//! annotated nominal pair per sentence, for relation-only training.

use rand::seq::SliceRandom;
use rand::Rng;
use relex_core::sentence::{EntitySpan, RelationInstance, Sentence, Token};
use relex_core::{seeded_rng, SeededRng};

/// Relation type of unrelated nominal pairs in [`gen_nominal_pairs`].
pub const NOMINAL_NEGATIVE: &str = "Other";

const FIRST: &[&str] = &["Ann", "Maria", "John", "Wei", "Omar", "Lena", "Carlos", "Yuki", "Peter", "Fatima", "Ivan", "Grace"];
const LAST: &[&str] = &["Smith", "Garcia", "Chen", "Haddad", "Novak", "Okafor", "Rossi", "Tanaka", "Meyer", "Silva"];
const INITIAL: &[&str] = &["J.", "K.", "M.", "R."];
const ORG: &[&str] = &["Acme", "Globex", "Initech", "Umbrella", "Stark", "Wayne", "Hooli", "Vandelay"];
const ORG_SUFFIX: &[&str] = &["Corp", "Industries", "Group", "Labs"];
const LOC: &[&[&str]] = &[
    &["Paris"],
    &["Chicago"],
    &["Berlin"],
    &["Lagos"],
    &["Lima"],
    &["Osaka"],
    &["Toronto"],
    &["Cairo"],
    &["New", "York"],
    &["Buenos", "Aires"],
    &["Hong", "Kong"],
    &["Rio", "de", "Janeiro"],
];

#[derive(Default)]
struct Builder {
    tokens: Vec<Token>,
    spans: Vec<EntitySpan>,
    relations: Vec<RelationInstance>,
}

impl Builder {
    fn word(&mut self, form: &str, pos: &str, deprel: &str) -> usize {
        self.tokens.push(Token::new(form, pos, None, deprel));
        self.tokens.len() - 1
    }

    fn attach(&mut self, child: usize, head: usize) {
        self.tokens[child].head = Some(head);
    }

    /// A head-final name: earlier tokens attach to the last one.
    fn entity(&mut self, ty: &str, words: &[&str], deprel: &str) -> usize {
        let start = self.tokens.len();
        for w in words {
            let pos = if w.chars().next().is_some_and(char::is_uppercase) { "NNP" } else { "IN" };
            self.word(w, pos, "nn");
        }
        let last = self.tokens.len() - 1;
        self.tokens[last].deprel = deprel.to_string();
        for t in start..last {
            self.attach(t, last);
        }
        self.spans.push(EntitySpan::new(ty, start, last));
        last
    }

    fn relation(&mut self, arg1: usize, arg2: usize, ty: &str) {
        self.relations.push(RelationInstance::new(arg1, arg2, ty));
    }

    fn finish(self) -> Sentence {
        Sentence::new(self.tokens, self.spans, self.relations).expect("templates build valid sentences")
    }
}

fn pick<'a, T: ?Sized>(rng: &mut SeededRng, items: &'a [&'a T]) -> &'a T {
    items.choose(rng).expect("non-empty pool")
}

fn person(rng: &mut SeededRng) -> Vec<&'static str> {
    let r: f64 = rng.gen();
    if r < 0.3 {
        vec![pick(rng, FIRST)]
    } else if r < 0.8 {
        vec![pick(rng, FIRST), pick(rng, LAST)]
    } else {
        vec![pick(rng, FIRST), pick(rng, INITIAL), pick(rng, LAST)]
    }
}

fn organization(rng: &mut SeededRng) -> Vec<&'static str> {
    if rng.gen_bool(0.5) {
        vec![pick(rng, ORG), pick(rng, ORG_SUFFIX)]
    } else {
        vec![pick(rng, ORG)]
    }
}

fn location(rng: &mut SeededRng) -> Vec<&'static str> {
    LOC.choose(rng).expect("non-empty pool").to_vec()
}

/// Optional sentence-initial adverbial attached to the root.
fn opener(b: &mut Builder, rng: &mut SeededRng) -> Option<(usize, usize)> {
    if !rng.gen_bool(0.25) {
        return None;
    }
    let adv = b.word(pick(rng, &["Yesterday", "Reportedly", "Meanwhile"]), "RB", "advmod");
    let comma = b.word(",", ",", "punct");
    Some((adv, comma))
}

fn close(b: &mut Builder, root: usize, opened: Option<(usize, usize)>) {
    if let Some((adv, comma)) = opened {
        b.attach(adv, root);
        b.attach(comma, root);
    }
    let dot = b.word(".", ".", "punct");
    b.attach(dot, root);
}

fn entity_sentence(rng: &mut SeededRng) -> Sentence {
    let mut b = Builder::default();
    let opened = opener(&mut b, rng);
    let root;
    match rng.gen_range(0..10) {
        // PER was born in LOC
        0 => {
            let per = b.entity("PER", &person(rng), "nsubjpass");
            let was = b.word("was", "VBD", "auxpass");
            root = b.word("born", "VBN", "root");
            let in_ = b.word("in", "IN", "prep");
            let loc = b.entity("LOC", &location(rng), "pobj");
            for t in [per, was, in_] {
                b.attach(t, root);
            }
            b.attach(loc, in_);
            b.relation(per, loc, "PHYS");
        }
        // PER works for ORG
        1 => {
            let per = b.entity("PER", &person(rng), "nsubj");
            root = b.word("works", "VBZ", "root");
            let for_ = b.word("for", "IN", "prep");
            let org = b.entity("ORG", &organization(rng), "pobj");
            b.attach(per, root);
            b.attach(for_, root);
            b.attach(org, for_);
            b.relation(per, org, "EMP");
        }
        // ORG hired PER last year
        2 => {
            let org = b.entity("ORG", &organization(rng), "nsubj");
            root = b.word("hired", "VBD", "root");
            let per = b.entity("PER", &person(rng), "dobj");
            let last = b.word("last", "JJ", "amod");
            let year = b.word("year", "NN", "tmod");
            for t in [org, per, year] {
                b.attach(t, root);
            }
            b.attach(last, year);
            b.relation(per, org, "EMP");
        }
        // PER traveled to LOC with PER
        3 => {
            let per = b.entity("PER", &person(rng), "nsubj");
            root = b.word("traveled", "VBD", "root");
            let to = b.word("to", "TO", "prep");
            let loc = b.entity("LOC", &location(rng), "pobj");
            let with = b.word("with", "IN", "prep");
            let other = b.entity("PER", &person(rng), "pobj");
            for t in [per, to, with] {
                b.attach(t, root);
            }
            b.attach(loc, to);
            b.attach(other, with);
            b.relation(per, loc, "PHYS");
            b.relation(other, loc, "PHYS");
        }
        // ORG is based in LOC
        4 => {
            let org = b.entity("ORG", &organization(rng), "nsubjpass");
            let is = b.word("is", "VBZ", "auxpass");
            root = b.word("based", "VBN", "root");
            let in_ = b.word("in", "IN", "prep");
            let loc = b.entity("LOC", &location(rng), "pobj");
            for t in [org, is, in_] {
                b.attach(t, root);
            }
            b.attach(loc, in_);
            b.relation(org, loc, "PHYS");
        }
        // In LOC , PER met the director of ORG
        5 => {
            let in_ = b.word(if opened.is_some() { "in" } else { "In" }, "IN", "prep");
            let loc = b.entity("LOC", &location(rng), "pobj");
            let comma = b.word(",", ",", "punct");
            let per = b.entity("PER", &person(rng), "nsubj");
            root = b.word("met", "VBD", "root");
            let the = b.word("the", "DT", "det");
            let director = b.word("director", "NN", "dobj");
            let of = b.word("of", "IN", "prep");
            let org = b.entity("ORG", &organization(rng), "pobj");
            for t in [in_, comma, per, director] {
                b.attach(t, root);
            }
            b.attach(loc, in_);
            b.attach(the, director);
            b.attach(of, director);
            b.attach(org, of);
            b.relation(per, loc, "PHYS");
        }
        // ORG , the employer of PER , moved to LOC
        6 => {
            let org = b.entity("ORG", &organization(rng), "nsubj");
            let c1 = b.word(",", ",", "punct");
            let the = b.word("the", "DT", "det");
            let employer = b.word("employer", "NN", "appos");
            let of = b.word("of", "IN", "prep");
            let per = b.entity("PER", &person(rng), "pobj");
            let c2 = b.word(",", ",", "punct");
            root = b.word("moved", "VBD", "root");
            let to = b.word("to", "TO", "prep");
            let loc = b.entity("LOC", &location(rng), "pobj");
            for t in [org, to] {
                b.attach(t, root);
            }
            for t in [c1, employer, c2] {
                b.attach(t, org);
            }
            b.attach(the, employer);
            b.attach(of, employer);
            b.attach(per, of);
            b.attach(loc, to);
            b.relation(per, org, "EMP");
            b.relation(org, loc, "PHYS");
        }
        // PER said the weather was nice
        7 => {
            let per = b.entity("PER", &person(rng), "nsubj");
            root = b.word("said", "VBD", "root");
            let the = b.word("the", "DT", "det");
            let weather = b.word("weather", "NN", "nsubj");
            let was = b.word("was", "VBD", "cop");
            let nice = b.word("nice", "JJ", "ccomp");
            b.attach(per, root);
            b.attach(nice, root);
            b.attach(weather, nice);
            b.attach(was, nice);
            b.attach(the, weather);
        }
        // Analysts praised ORG and PER
        8 => {
            let analysts = b.word("Analysts", "NNS", "nsubj");
            root = b.word("praised", "VBD", "root");
            let org = b.entity("ORG", &organization(rng), "dobj");
            let and = b.word("and", "CC", "cc");
            let per = b.entity("PER", &person(rng), "conj");
            b.attach(analysts, root);
            b.attach(org, root);
            b.attach(and, org);
            b.attach(per, org);
        }
        // The market fell sharply on Monday
        _ => {
            let the = b.word(if opened.is_some() { "the" } else { "The" }, "DT", "det");
            let market = b.word("market", "NN", "nsubj");
            root = b.word("fell", "VBD", "root");
            let sharply = b.word("sharply", "RB", "advmod");
            let on = b.word("on", "IN", "prep");
            let day = b.word(pick(rng, &["Monday", "Friday", "Tuesday"]), "NNP", "pobj");
            b.attach(the, market);
            for t in [market, sharply, on] {
                b.attach(t, root);
            }
            b.attach(day, on);
        }
    }
    b.tokens[root].deprel = String::from("root");
    close(&mut b, root, opened);
    b.finish()
}

/// `n` template sentences with entities and relations; identical seeds
/// give identical corpora.
pub fn gen_synthetic(n: usize, seed: u64) -> Vec<Sentence> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| entity_sentence(&mut rng)).collect()
}

const NOMINAL: &str = "NOM";
const ADJECTIVES: &[&str] = &["old", "new", "small", "large", "broken"];

/// Pools of (argument 1, argument 2) nouns per relation type.
const PAIRS: &[(&str, &[&str], &[&str])] = &[
    ("Cause-Effect", &["pressure", "fire", "virus", "storm", "heat", "smoke"], &["burst", "damage", "fever", "flood", "crack", "cough"]),
    ("Component-Whole", &["engine", "wheel", "screen", "handle", "roof", "blade"], &["car", "bike", "laptop", "door", "house", "knife"]),
    ("Entity-Origin", &["water", "oil", "juice", "honey", "sugar", "wine"], &["well", "seed", "orange", "hive", "cane", "grape"]),
    (NOMINAL_NEGATIVE, &["man", "woman", "child", "teacher", "boy", "girl"], &["dog", "book", "ball", "letter", "fence", "song"]),
];

/// `the [adj] noun` with the noun as the phrase head.
fn noun_phrase(b: &mut Builder, rng: &mut SeededRng, noun: &str, deprel: &str) -> usize {
    let det = b.word("the", "DT", "det");
    let adj = rng.gen_bool(0.3).then(|| b.word(pick(rng, ADJECTIVES), "JJ", "amod"));
    let head = b.entity(NOMINAL, &[noun], deprel);
    b.tokens[head].pos = String::from("NN");
    b.attach(det, head);
    if let Some(a) = adj {
        b.attach(a, head);
    }
    head
}

fn nominal_sentence(rng: &mut SeededRng) -> Sentence {
    let (ty, firsts, seconds) = *PAIRS.choose(rng).expect("non-empty");
    let (a1, a2) = (pick(rng, firsts), pick(rng, seconds));
    let mut b = Builder::default();
    let (root, x1, x2);
    // x1 and x2 are the heads of the relation's first and second argument
    match (ty, rng.gen_bool(0.5)) {
        ("Cause-Effect", true) => {
            x1 = noun_phrase(&mut b, rng, a1, "nsubj");
            root = b.word("caused", "VBD", "root");
            x2 = noun_phrase(&mut b, rng, a2, "dobj");
            b.attach(x1, root);
            b.attach(x2, root);
        }
        ("Cause-Effect", false) => {
            x2 = noun_phrase(&mut b, rng, a2, "nsubjpass");
            let was = b.word("was", "VBD", "auxpass");
            root = b.word("caused", "VBN", "root");
            let by = b.word("by", "IN", "prep");
            x1 = noun_phrase(&mut b, rng, a1, "pobj");
            for t in [x2, was, by] {
                b.attach(t, root);
            }
            b.attach(x1, by);
        }
        ("Component-Whole", true) => {
            x1 = noun_phrase(&mut b, rng, a1, "nsubj");
            let is = b.word("is", "VBZ", "cop");
            root = b.word("part", "NN", "root");
            let of = b.word("of", "IN", "prep");
            x2 = noun_phrase(&mut b, rng, a2, "pobj");
            for t in [x1, is, of] {
                b.attach(t, root);
            }
            b.attach(x2, of);
        }
        ("Component-Whole", false) => {
            x2 = noun_phrase(&mut b, rng, a2, "nsubj");
            root = b.word("has", "VBZ", "root");
            x1 = noun_phrase(&mut b, rng, a1, "dobj");
            b.attach(x1, root);
            b.attach(x2, root);
        }
        ("Entity-Origin", true) => {
            x1 = noun_phrase(&mut b, rng, a1, "nsubj");
            root = b.word("came", "VBD", "root");
            let from = b.word("from", "IN", "prep");
            x2 = noun_phrase(&mut b, rng, a2, "pobj");
            b.attach(x1, root);
            b.attach(from, root);
            b.attach(x2, from);
        }
        ("Entity-Origin", false) => {
            x2 = noun_phrase(&mut b, rng, a2, "nsubj");
            root = b.word("produced", "VBD", "root");
            x1 = noun_phrase(&mut b, rng, a1, "dobj");
            b.attach(x1, root);
            b.attach(x2, root);
        }
        (_, forward) => {
            x1 = noun_phrase(&mut b, rng, a1, "nsubj");
            root = b.word(if forward { "saw" } else { "liked" }, "VBD", "root");
            x2 = noun_phrase(&mut b, rng, a2, "dobj");
            b.attach(x1, root);
            b.attach(x2, root);
        }
    }
    b.tokens[root].deprel = String::from("root");
    close(&mut b, root, None);
    b.relation(x1, x2, ty);
    b.finish()
}

/// `n` sentences with exactly one annotated nominal pair each. Unrelated
/// pairs carry the type [`NOMINAL_NEGATIVE`].
pub fn gen_nominal_pairs(n: usize, seed: u64) -> Vec<Sentence> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| nominal_sentence(&mut rng)).collect()
}
