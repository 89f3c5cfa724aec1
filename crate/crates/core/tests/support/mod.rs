//! Oracles and generators shared by the integration and acceptance tests.
//! The oracles deliberately avoid the library's own algorithms: they work
//! on plain maps and brute force.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chrono::{TimeZone, Utc};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use railsafe_core::ontology::{Concept, ConceptId, Layer, Ontology};
use railsafe_core::petri::{Aspect, ExplorationBounds, Marking, PetriNet};
use railsafe_core::query::{Atom, CmpOp, Expr};
use railsafe_core::scenario::{ParameterId, ScenarioSheet, Selection};
use railsafe_core::seed;
use railsafe_core::store::{Meta, ScenarioDocument, Status};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- nets

/// Marking as a plain map without zero entries.
pub type M = BTreeMap<String, u32>;

pub fn plain(m: &Marking) -> M {
    m.iter().filter(|(_, n)| *n > 0).map(|(p, n)| (p.to_owned(), n)).collect()
}

/// Net with 1..=`max_places` places and 1..=`max_transitions` transitions,
/// arc weights 1..=`max_weight` and at most `max_tokens` initial tokens.
pub fn random_net(
    rng: &mut impl Rng,
    max_places: usize,
    max_transitions: usize,
    max_weight: u32,
    max_tokens: u32,
) -> (PetriNet, Marking) {
    let np = rng.gen_range(1..=max_places);
    let nt = rng.gen_range(1..=max_transitions);
    let density = rng.gen_range(0.15..0.6);
    let aspects = Aspect::ALL;
    let mut net = PetriNet::new();
    for p in 0..np {
        net.place(&format!("p{p}"), &format!("P{p}"), *aspects.choose(rng).unwrap());
    }
    for t in 0..nt {
        net.transition(&format!("t{t}"), &format!("T{t}"), *aspects.choose(rng).unwrap());
    }
    for t in 0..nt {
        for p in 0..np {
            if rng.gen_bool(density) {
                net.arc(&format!("p{p}"), &format!("t{t}"), rng.gen_range(1..=max_weight));
            }
            if rng.gen_bool(density) {
                net.arc(&format!("t{t}"), &format!("p{p}"), rng.gen_range(1..=max_weight));
            }
        }
    }
    let mut m = Marking::new();
    for _ in 0..rng.gen_range(0..=max_tokens) {
        let p = format!("p{}", rng.gen_range(0..np));
        let n = m.get(&p);
        m.set(p, n + 1);
    }
    (net, m)
}

/// Per transition: input and output weights by place.
pub struct Incidence {
    pub transitions: Vec<String>,
    pub pre: BTreeMap<String, M>,
    pub post: BTreeMap<String, M>,
}

impl Incidence {
    pub fn of(net: &PetriNet) -> Self {
        let places: BTreeSet<&str> = net.places.iter().map(|p| p.id.as_str()).collect();
        let mut transitions: Vec<String> = net.transitions.iter().map(|t| t.id.clone()).collect();
        transitions.sort();
        let mut pre: BTreeMap<String, M> = transitions.iter().map(|t| (t.clone(), M::new())).collect();
        let mut post = pre.clone();
        for a in &net.arcs {
            if places.contains(a.source.as_str()) {
                *pre.get_mut(&a.target).unwrap().entry(a.source.clone()).or_default() += a.weight;
            } else {
                *post.get_mut(&a.source).unwrap().entry(a.target.clone()).or_default() += a.weight;
            }
        }
        Self { transitions, pre, post }
    }

    pub fn enabled(&self, m: &M, t: &str) -> bool {
        self.pre[t].iter().all(|(p, w)| m.get(p).copied().unwrap_or(0) >= *w)
    }

    pub fn fire(&self, m: &M, t: &str) -> Option<M> {
        if !self.enabled(m, t) {
            return None;
        }
        let mut next: BTreeMap<String, i64> = m.iter().map(|(p, n)| (p.clone(), i64::from(*n))).collect();
        for (p, w) in &self.pre[t] {
            *next.entry(p.clone()).or_default() -= i64::from(*w);
        }
        for (p, w) in &self.post[t] {
            *next.entry(p.clone()).or_default() += i64::from(*w);
        }
        assert!(next.values().all(|n| *n >= 0));
        Some(next.into_iter().filter(|(_, n)| *n > 0).map(|(p, n)| (p, n as u32)).collect())
    }
}

pub struct OracleGraph {
    pub nodes: BTreeSet<M>,
    pub edges: BTreeSet<(M, String, M)>,
    /// Shortest firing distance per node.
    pub depth: BTreeMap<M, usize>,
}

/// Plain breadth-first search with the explorer's bound rules: markings at
/// `max_depth` are not expanded, successors over `max_tokens` in some place
/// are dropped, and no new marking is admitted once `max_markings` are known.
/// Transitions are tried in id order.
pub fn bfs_oracle(net: &PetriNet, m0: &Marking, bounds: ExplorationBounds) -> OracleGraph {
    let inc = Incidence::of(net);
    let start = plain(m0);
    let mut depth = BTreeMap::from([(start.clone(), 0usize)]);
    let mut edges = BTreeSet::new();
    let mut queue = VecDeque::from([start]);
    while let Some(m) = queue.pop_front() {
        let d = depth[&m];
        if d >= bounds.max_depth {
            continue;
        }
        for t in &inc.transitions {
            let Some(next) = inc.fire(&m, t) else { continue };
            if next.values().any(|n| *n > bounds.max_tokens) {
                continue;
            }
            if !depth.contains_key(&next) {
                if depth.len() >= bounds.max_markings {
                    continue;
                }
                depth.insert(next.clone(), d + 1);
                queue.push_back(next.clone());
            }
            edges.insert((m.clone(), t.clone(), next));
        }
    }
    OracleGraph {
        nodes: depth.keys().cloned().collect(),
        edges,
        depth,
    }
}

// ---------------------------------------------------------------- ontologies

/// Acyclic ontology of `n` generic concepts. Parents always come from
/// earlier positions of a random ordering, so no cycle can form.
pub fn random_dag(rng: &mut impl Rng, n: usize) -> (Ontology, BTreeMap<String, Vec<String>>) {
    let mut names: Vec<String> = (0..n).map(|i| format!("c{i:02}")).collect();
    names.shuffle(rng);
    let density = rng.gen_range(0.0..0.3);
    let mut parents: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, name) in names.iter().enumerate() {
        let ps: Vec<String> = names[..i].iter().filter(|_| rng.gen_bool(density)).cloned().collect();
        parents.insert(name.clone(), ps);
    }
    let concepts = parents
        .iter()
        .map(|(id, ps)| {
            Concept::new(ConceptId::new(id.clone()).unwrap(), id.to_uppercase(), Layer::Generic)
                .with_parents(ps.iter().map(|p| ConceptId::new(p.clone()).unwrap()))
        })
        .collect();
    (Ontology::build("test", concepts, Vec::new()).unwrap(), parents)
}

/// Reflexive-transitive closure of the parent relation by Warshall's
/// algorithm: `(a, b)` is in the result iff `a` is below or equal to `b`.
pub fn closure_oracle(parents: &BTreeMap<String, Vec<String>>) -> BTreeSet<(String, String)> {
    let ids: Vec<&String> = parents.keys().collect();
    let pos: BTreeMap<&String, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let n = ids.len();
    let mut r = vec![vec![false; n]; n];
    for (c, ps) in parents {
        r[pos[c]][pos[c]] = true;
        for p in ps {
            r[pos[c]][pos[p]] = true;
        }
    }
    for k in 0..n {
        let via = r[k].clone();
        for row in r.iter_mut() {
            if row[k] {
                for (cell, hit) in row.iter_mut().zip(&via) {
                    *cell |= *hit;
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            if r[i][j] {
                out.insert((ids[i].clone(), ids[j].clone()));
            }
        }
    }
    out
}

// ---------------------------------------------------------------- documents

const SYSTEMS: &[&str] = &["VAL", "Metro", "Tram", "Light rail"];
const WORDS: &[&str] = &[
    "train", "canton", "door", "terminus", "<switch>", "\"quoted\"", "a & b", "élan", "voie", "zone",
];

fn phrase(rng: &mut impl Rng, n: usize) -> String {
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn code(rng: &mut impl Rng) -> String {
    let prefix = ["OO", "OS", "OP", "XA"].choose(rng).unwrap();
    format!("{prefix}{}", rng.gen_range(10..40))
}

/// A synthetic scenario document over the vocabulary of `o`. Status is
/// validated only when the sheet validates cleanly against `o`.
pub fn random_document(rng: &mut impl Rng, o: &Ontology, id: &str) -> ScenarioDocument {
    let words = rng.gen_range(1..5);
    let title = phrase(rng, words);
    let mut sheet = ScenarioSheet::new(id, title);
    sheet.transport_system = SYSTEMS.choose(rng).unwrap().to_string();
    let words = rng.gen_range(0..12);
    sheet.narrative = phrase(rng, words);
    for p in ParameterId::ALL {
        let vocab: Vec<String> = o
            .instances_of(p.anchor(), true)
            .unwrap()
            .into_iter()
            .map(|i| i.id.clone())
            .collect();
        let max = if p == ParameterId::GeographicalPrinciple { 1 } else { 3 };
        let lo = usize::from(rng.gen_bool(0.8));
        let n = rng.gen_range(lo..=max).min(vocab.len());
        for v in vocab.choose_multiple(rng, n) {
            let mut s = Selection::value(v.clone());
            if v == "number-of-trains" {
                s = s.with_count(rng.gen_range(1..=4));
            }
            if rng.gen_bool(0.6) {
                s = s.key();
            }
            sheet.select(p, s);
        }
        if matches!(p, ParameterId::SummarizedFailures | ParameterId::InterimSolutions) {
            for _ in 0..rng.gen_range(0..=2) {
                let c = code(rng);
                if sheet.selections(p).iter().any(|s| s.value_key() == c) {
                    continue;
                }
                let mut s = Selection::coded(c, phrase(rng, 3));
                if rng.gen_bool(0.3) {
                    s = s.key();
                }
                sheet.select(p, s);
            }
        }
    }
    let mut doc = ScenarioDocument::new(sheet);
    if rng.gen_bool(0.3) {
        let demo = seed::demo_collision();
        doc.net = demo.net;
        let k = rng.gen_range(0..=demo.tables.len());
        doc.tables = demo.tables[..k].to_vec();
    }
    let created = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
        + chrono::Duration::seconds(rng.gen_range(0..10_000_000));
    doc.meta = Meta {
        author: phrase(rng, 2),
        created,
        modified: created + chrono::Duration::seconds(rng.gen_range(0..100_000)),
        status: Status::Draft,
        ontology_version: o.version().to_owned(),
    };
    if rng.gen_bool(0.5) && doc.validate(o).error_count() == 0 {
        doc.meta.status = Status::Validated;
    }
    doc
}

// ---------------------------------------------------------------- queries

/// Terms that always resolve for `isa`, and a wider pool for `has`.
pub struct TermPool {
    pub isa: Vec<String>,
    pub has: Vec<String>,
}

impl TermPool {
    pub fn of(o: &Ontology) -> Self {
        let mut isa: Vec<String> = o.concepts().flat_map(|c| [c.id.to_string(), c.label.clone()]).collect();
        isa.extend(o.instances().map(|i| i.id.clone()));
        let mut has: Vec<String> = o.instances().flat_map(|i| [i.id.clone(), i.label.to_uppercase()]).collect();
        has.extend(["OO26", "OS15", "XA12", "nothing-here"].map(String::from));
        Self { isa, has }
    }
}

pub fn random_atom(rng: &mut impl Rng, pool: &TermPool) -> Atom {
    let parameter = *ParameterId::ALL.choose(rng).unwrap();
    match rng.gen_range(0..7) {
        0 | 1 => Atom::Has { parameter, term: pool.has.choose(rng).unwrap().clone() },
        2 | 3 => Atom::Isa { parameter, term: pool.isa.choose(rng).unwrap().clone() },
        4 => Atom::Trains { cmp: *CmpOp::ALL.choose(rng).unwrap(), value: rng.gen_range(0..=5) },
        5 => {
            if rng.gen_bool(0.5) {
                Atom::HasCritical
            } else {
                Atom::StatusIs { status: if rng.gen_bool(0.5) { Status::Draft } else { Status::Validated } }
            }
        }
        _ => {
            let s = SYSTEMS.choose(rng).unwrap();
            let system = if rng.gen_bool(0.5) { s.to_lowercase() } else { s.to_string() };
            Atom::SystemIs { system }
        }
    }
}

fn random_expr_with(r: &mut StdRng, depth: usize, atom: &mut dyn FnMut(&mut StdRng) -> Atom) -> Expr {
    if depth == 0 || r.gen_bool(0.3) {
        return Expr::Atom(atom(r));
    }
    match r.gen_range(0..3) {
        0 => Expr::not(random_expr_with(r, depth - 1, atom)),
        1 => Expr::and(random_expr_with(r, depth - 1, atom), random_expr_with(r, depth - 1, atom)),
        _ => Expr::or(random_expr_with(r, depth - 1, atom), random_expr_with(r, depth - 1, atom)),
    }
}

/// Random expression over vocabulary terms.
pub fn random_query_expr(r: &mut StdRng, pool: &TermPool, depth: usize) -> Expr {
    random_expr_with(r, depth, &mut |r| random_atom(r, pool))
}

/// Random expression with arbitrary strings and numbers, for syntax tests.
pub fn random_syntax_expr(r: &mut StdRng, depth: usize) -> Expr {
    random_expr_with(r, depth, &mut |r| {
        let parameter = *ParameterId::ALL.choose(r).unwrap();
        let text = |r: &mut StdRng| -> String {
            let alphabet: Vec<char> = "aZ0 -_\"\\\n\té✓()".chars().collect();
            (0..r.gen_range(0..10)).map(|_| *alphabet.choose(r).unwrap()).collect()
        };
        match r.gen_range(0..6) {
            0 => Atom::Has { parameter, term: text(r) },
            1 => Atom::Isa { parameter, term: text(r) },
            2 => Atom::Trains { cmp: *CmpOp::ALL.choose(r).unwrap(), value: r.gen() },
            3 => Atom::HasCritical,
            4 => Atom::StatusIs { status: if r.gen_bool(0.5) { Status::Draft } else { Status::Validated } },
            _ => Atom::SystemIs { system: text(r) },
        }
    })
}

fn compare(cmp: CmpOp, a: u32, b: u32) -> bool {
    match cmp {
        CmpOp::Eq => a == b,
        CmpOp::Ne => a != b,
        CmpOp::Lt => a < b,
        CmpOp::Le => a <= b,
        CmpOp::Gt => a > b,
        CmpOp::Ge => a >= b,
    }
}

fn label_hit(label: &str, alts: &[String], term: &str) -> bool {
    let t = term.to_lowercase();
    label.to_lowercase() == t || alts.iter().any(|a| a.to_lowercase() == t)
}

/// Linear-scan evaluator written from the query semantics alone. Errors
/// with the term when an `isa` term names nothing.
pub fn naive_eval(e: &Expr, doc: &ScenarioDocument, o: &Ontology) -> Result<bool, String> {
    Ok(match e {
        Expr::Not(x) => !naive_eval(x, doc, o)?,
        Expr::And(a, b) => {
            let l = naive_eval(a, doc, o)?;
            let r = naive_eval(b, doc, o)?;
            l && r
        }
        Expr::Or(a, b) => {
            let l = naive_eval(a, doc, o)?;
            let r = naive_eval(b, doc, o)?;
            l || r
        }
        Expr::Atom(a) => match a {
            Atom::Has { parameter, term } => doc.sheet.selections(*parameter).iter().any(|s| {
                let key = s.value_key();
                key == term
                    || o.instance(key).is_some_and(|i| i.id == *term || label_hit(&i.label, &i.alt_labels, term))
            }),
            Atom::Isa { parameter, term } => {
                let named: Vec<&str> = o
                    .concepts()
                    .filter(|c| c.id.as_str() == term || label_hit(&c.label, &c.alt_labels, term))
                    .map(|c| c.id.as_str())
                    .collect();
                let named_instances: Vec<&str> = o
                    .instances()
                    .filter(|i| i.id == *term || label_hit(&i.label, &i.alt_labels, term))
                    .map(|i| i.id.as_str())
                    .collect();
                if named.is_empty() && named_instances.is_empty() {
                    return Err(term.clone());
                }
                let below = |c: &str, anc: &str| o.is_subconcept(c, anc).unwrap();
                doc.sheet.selections(*parameter).iter().any(|s| {
                    let key = s.value_key();
                    if named_instances.contains(&key) {
                        return true;
                    }
                    if let Some(i) = o.instance(key) {
                        if named.iter().any(|c| below(i.concept.as_str(), c)) {
                            return true;
                        }
                    }
                    matches!(s, Selection::Coded(_))
                        && o.contains_concept(parameter.anchor())
                        && named.iter().any(|c| below(parameter.anchor(), c))
                })
            }
            Atom::Trains { cmp, value } => doc
                .sheet
                .selections(ParameterId::Actors)
                .iter()
                .find(|s| s.value_key() == "number-of-trains")
                .and_then(|s| s.numeric_qualifier())
                .is_some_and(|n| compare(*cmp, n, *value)),
            Atom::HasCritical => doc.tables.iter().any(|t| t.critical),
            Atom::StatusIs { status } => doc.meta.status == *status,
            Atom::SystemIs { system } => doc.sheet.transport_system.to_lowercase() == system.to_lowercase(),
        },
    })
}
