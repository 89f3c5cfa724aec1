//! One pass/fail line per acceptance criterion. Runs without the libtest
//! harness so the lines always show; exits non-zero if any criterion fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;

use railsafe_core::petri::{enabled, find_critical, fire, reachability, CriticalOptions, ExplorationBounds, PetriError};
use railsafe_core::query::{evaluate, matches, parse_query, EvalMode, Expr, Projection, Query};
use railsafe_core::scenario::{ParameterId, Selection};
use railsafe_core::seed;
use railsafe_core::store::{Archive, StoreError};
use support::{
    bfs_oracle, closure_oracle, naive_eval, plain, random_dag, random_document, random_net, random_query_expr,
    random_syntax_expr, rng, Incidence, M,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn seed_fidelity() -> Outcome {
    let o = seed::ontology();
    for p in ParameterId::ALL {
        ensure!(o.contains_concept(p.anchor()), "anchor `{}` missing", p.anchor());
    }
    let count = o.instances().count();
    ensure!(count == seed::SEED_INSTANCE_COUNT && count == 45, "{count} instances, expected 45");
    for p in ParameterId::ALL {
        ensure!(!o.instances_of(p.anchor(), true).unwrap().is_empty(), "no values under `{}`", p.anchor());
    }
    let doc = seed::exemplar_document();
    let base = doc.validate(&o);
    ensure!(base.error_count() == 0, "exemplar has errors: {}", base.summary());

    let mut substitutions = 0;
    for (p, list) in &doc.sheet.selections {
        for (i, s) in list.iter().enumerate() {
            let Selection::Value(v) = s else { continue };
            // An unknown token, and a real instance from another parameter.
            let foreign = ParameterId::ALL
                .iter()
                .filter(|q| *q != p)
                .flat_map(|q| o.instances_of(q.anchor(), true).unwrap())
                .map(|inst| inst.id.clone())
                .find(|id| !o.instance_is_a(id, p.anchor()).unwrap())
                .unwrap();
            for token in ["zz-not-in-vocabulary".to_string(), foreign] {
                let mut bad = doc.clone();
                let mut replaced = v.clone();
                replaced.instance = token.clone();
                bad.sheet.selections.get_mut(p).unwrap()[i] = Selection::Value(replaced);
                let n = bad.validate(&o).error_count();
                ensure!(n == 1, "substituting {token} for {} under {p} gives {n} errors", v.instance);
                substitutions += 1;
            }
        }
    }
    Ok(format!("8 anchors, {count} instances, exemplar clean, {substitutions} substitutions give 1 error each"))
}

fn reachability_oracle() -> Outcome {
    let started = Instant::now();
    let bounds = ExplorationBounds { max_markings: 500, max_tokens: 100_000, max_depth: 100_000 };
    let mut r = rng(2);
    let (mut nodes, mut edges, mut capped) = (0, 0, 0);
    for i in 0..100 {
        let (net, m0) = random_net(&mut r, 6, 6, 2, 3);
        let g = reachability(&net, &m0, bounds).map_err(|e| e.to_string())?;
        let o = bfs_oracle(&net, &m0, bounds);
        let got_nodes: BTreeSet<M> = g.markings.iter().map(plain).collect();
        let got_edges: BTreeSet<(M, String, M)> = g
            .edges
            .iter()
            .map(|e| (plain(&g.markings[e.from]), e.transition.clone(), plain(&g.markings[e.to])))
            .collect();
        ensure!(got_nodes == o.nodes, "net {i}: node sets differ");
        ensure!(got_edges == o.edges, "net {i}: edge sets differ");
        nodes += o.nodes.len();
        edges += o.edges.len();
        capped += usize::from(o.nodes.len() == 500);
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("100 nets, {nodes} markings, {edges} edges, {capped} hit the 500 cap, {:.2}s", elapsed.as_secs_f64()))
}

fn firing_equation() -> Outcome {
    let mut r = rng(3);
    let (mut fired, mut refused) = (0, 0);
    for i in 0..1000 {
        let (net, _) = random_net(&mut r, 6, 6, 2, 3);
        let m = net.places.iter().map(|p| (p.id.clone(), r.gen_range(0..=3u32))).collect();
        let t = net.transitions[r.gen_range(0..net.transitions.len())].id.clone();
        let inc = Incidence::of(&net);
        let is_enabled = enabled(&net, &m).map_err(|e| e.to_string())?.contains(&t);
        ensure!(is_enabled == inc.enabled(&plain(&m), &t), "triple {i}: enabledness differs");
        match fire(&net, &m, &t) {
            Ok(next) => {
                ensure!(is_enabled, "triple {i}: fired a disabled transition");
                ensure!(Some(plain(&next)) == inc.fire(&plain(&m), &t), "triple {i}: M' != M - Pre + Post");
                fired += 1;
            }
            Err(PetriError::NotEnabled(_)) => {
                ensure!(!is_enabled, "triple {i}: refused an enabled transition");
                refused += 1;
            }
            Err(e) => return Err(format!("triple {i}: {e}")),
        }
    }
    Ok(format!("1000 triples, {fired} fired, {refused} refused"))
}

fn table_replay() -> Outcome {
    let mut r = rng(4);
    let mut tables = 0;
    for i in 0..100 {
        let (net, m0) = random_net(&mut r, 5, 5, 2, 3);
        let p = &net.places[r.gen_range(0..net.places.len())].id;
        let pred = format!("{p} >= {}", r.gen_range(1..=3)).parse().unwrap();
        for all_paths in [false, true] {
            let bounds = ExplorationBounds { max_markings: 300, max_tokens: 8, max_depth: if all_paths { 5 } else { 40 } };
            let rep = find_critical(&net, &m0, &pred, bounds, CriticalOptions { all_paths }).map_err(|e| e.to_string())?;
            for t in &rep.tables {
                ensure!(t.replay(&net).is_ok(), "net {i}: table does not replay");
                ensure!(pred.holds(t.final_marking()), "net {i}: final marking not critical");
            }
            tables += rep.tables.len();
        }
    }

    let demo = seed::demo_collision();
    let model = demo.net.as_ref().unwrap();
    let pred = model.predicate.as_ref().unwrap();
    let bounds = ExplorationBounds::default();
    let rep = find_critical(&model.net, &model.initial, pred, bounds, CriticalOptions::default())
        .map_err(|e| e.to_string())?;
    ensure!(!rep.truncated, "demo exploration truncated");
    for t in &rep.tables {
        ensure!(t.replay(&model.net).is_ok(), "demo table does not replay");
    }
    let o = bfs_oracle(&model.net, &model.initial, bounds);
    let exhaustive: BTreeSet<M> = o
        .nodes
        .iter()
        .filter(|m| pred.holds(&m.iter().map(|(p, n)| (p.clone(), *n)).collect()))
        .cloned()
        .collect();
    let found: BTreeSet<M> = rep.tables.iter().map(|t| plain(t.final_marking())).collect();
    ensure!(found == exhaustive, "demo: {} critical markings found, {} by enumeration", found.len(), exhaustive.len());
    let meet = |m: &M| (1..=3).any(|s| m.contains_key(&format!("train-a-seg{s}")) && m.contains_key(&format!("train-b-seg{s}")));
    let meetings = rep.tables.iter().filter(|t| meet(&plain(t.final_marking()))).count();
    ensure!(meetings >= 1, "no demo table puts both trains in one segment");
    Ok(format!(
        "{tables} random tables replay; demo: {} critical tables = enumeration, {meetings} with both trains in one segment",
        rep.tables.len()
    ))
}

fn persistence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut a = Archive::open(dir.path(), Arc::new(seed::ontology())).map_err(|e| e.to_string())?;
    let mut r = rng(5);
    let (mut validated, mut with_net) = (0, 0);
    for i in 0..100 {
        let mut d = random_document(&mut r, a.ontology(), &format!("doc-{i:03}"));
        a.save(&mut d, false).map_err(|e| e.to_string())?;
        ensure!(a.load(d.id()).map_err(|e| e.to_string())? == d, "doc-{i:03}: load(save(d)) != d");
        validated += usize::from(d.meta.status == railsafe_core::store::Status::Validated);
        with_net += usize::from(d.net.is_some());
    }

    let mut ops = 0;
    for seq in 0..20 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut a = Archive::open(dir.path(), Arc::new(seed::ontology())).map_err(|e| e.to_string())?;
        for _ in 0..25 {
            let id = format!("d{}", r.gen_range(0..8));
            match r.gen_range(0..5) {
                0 | 1 => {
                    let mut d = random_document(&mut r, a.ontology(), &id);
                    match a.save(&mut d, false) {
                        Ok(_) | Err(StoreError::IdConflict(_)) => {}
                        Err(e) => return Err(e.to_string()),
                    }
                }
                2 => {
                    let mut d = random_document(&mut r, a.ontology(), &id);
                    a.save(&mut d, true).map_err(|e| e.to_string())?;
                }
                3 => {
                    let _ = a.remove(&id);
                }
                _ => {
                    let o = a.ontology().clone();
                    a = Archive::open(dir.path(), o).map_err(|e| e.to_string())?;
                }
            }
            ops += 1;
            let mut fresh = Archive::open(dir.path(), a.ontology().clone()).map_err(|e| e.to_string())?;
            fresh.rebuild_index().map_err(|e| e.to_string())?;
            ensure!(a.index() == fresh.index(), "sequence {seq}: index differs from rebuild");
        }
    }
    Ok(format!("100 documents round trip ({validated} validated, {with_net} with nets); index = rebuild after {ops} operations"))
}

fn query_oracle() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut a = Archive::open(dir.path(), Arc::new(seed::ontology())).map_err(|e| e.to_string())?;
    let mut r = rng(6);
    let mut docs = Vec::new();
    for i in 0..50 {
        let mut d = random_document(&mut r, a.ontology(), &format!("s{i:02}"));
        a.save(&mut d, false).map_err(|e| e.to_string())?;
        docs.push(d);
    }
    let o = a.ontology().clone();
    let pool = support::TermPool::of(&o);
    let mut non_trivial = 0;
    for _ in 0..30 {
        let e = random_query_expr(&mut r, &pool, 3);
        let expected: BTreeSet<String> = docs
            .iter()
            .filter(|d| naive_eval(&e, d, &o).unwrap())
            .map(|d| d.id().to_owned())
            .collect();
        let q = Query { expr: Some(e) };
        for mode in [EvalMode::Index, EvalMode::Scan] {
            let got: BTreeSet<String> = evaluate(&q, &a, Projection::Ids, mode)
                .map_err(|e| e.to_string())?
                .ids
                .into_iter()
                .collect();
            ensure!(got == expected, "{mode:?} differs from naive for `{q}`");
        }
        non_trivial += usize::from(!expected.is_empty() && expected.len() < docs.len());
    }

    for i in 0..200 {
        let mut r = rng(1000 + i);
        let e = random_syntax_expr(&mut r, 4);
        let q = Query { expr: Some(e) };
        let back = parse_query(&q.to_string()).map_err(|e| format!("AST {i}: {e}"))?;
        ensure!(back == q, "AST {i}: parse(print(q)) != q");

        let x = random_query_expr(&mut r, &pool, 2);
        let y = random_query_expr(&mut r, &pool, 2);
        let d = &docs[i as usize % docs.len()];
        let eval = |e: Expr| matches(&Query { expr: Some(e) }, d, &o).unwrap();
        ensure!(
            eval(Expr::not(Expr::and(x.clone(), y.clone()))) == eval(Expr::or(Expr::not(x.clone()), Expr::not(y.clone()))),
            "De Morgan (and) fails on AST {i}"
        );
        ensure!(
            eval(Expr::not(Expr::or(x.clone(), y.clone()))) == eval(Expr::and(Expr::not(x), Expr::not(y))),
            "De Morgan (or) fails on AST {i}"
        );
    }
    Ok(format!("30 queries over 50 documents = naive ({non_trivial} with partial results); 200 ASTs pass De Morgan and parse/print"))
}

fn subsumption_oracle() -> Outcome {
    let mut r = rng(7);
    let mut pairs = 0;
    for i in 0..50 {
        let n = r.gen_range(1..=50);
        let (o, parents) = random_dag(&mut r, n);
        let closure = closure_oracle(&parents);
        let ids: Vec<&String> = parents.keys().collect();
        let le = |a: &str, b: &str| o.is_subconcept(a, b).unwrap();
        for a in &ids {
            ensure!(le(a, a), "DAG {i}: not reflexive at {a}");
            for b in &ids {
                let got = le(a, b);
                ensure!(got == closure.contains(&((*a).clone(), (*b).clone())), "DAG {i}: {a} <= {b} disagrees");
                ensure!(!(a != b && got && le(b, a)), "DAG {i}: antisymmetry fails for {a}, {b}");
                pairs += 1;
            }
        }
        for a in &ids {
            for b in &ids {
                if !le(a, b) {
                    continue;
                }
                for c in &ids {
                    ensure!(!le(b, c) || le(a, c), "DAG {i}: transitivity fails for {a}, {b}, {c}");
                }
            }
        }
    }
    Ok(format!("50 DAGs, {pairs} pairs agree with the closure; reflexive, antisymmetric, transitive"))
}

fn cli_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_railsafe"))
            .args(args)
            .current_dir(dir.path())
            .env("RAILSAFE_ARCHIVE", dir.path().join("archive"))
            .env("RAILSAFE_ONTOLOGY", dir.path().join("ontology.xml"))
            .output()
            .map_err(|e| e.to_string())
    };
    let exemplar = dir.path().join("exemplar.xml");
    std::fs::write(&exemplar, seed::EXEMPLAR_XML).map_err(|e| e.to_string())?;
    let path = |p: &Path| p.display().to_string();

    let out = run(&["init"])?;
    ensure!(out.status.success(), "init failed: {}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["import", &path(&exemplar)])?;
    ensure!(out.status.success(), "import failed: {}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["query", "risks isa \"collision\""])?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    ensure!(out.status.success(), "query failed: {}", String::from_utf8_lossy(&out.stderr));
    ensure!(
        stdout.lines().any(|l| l.split('\t').next() == Some(seed::EXEMPLAR_ID)),
        "query output lacks {}: {stdout}",
        seed::EXEMPLAR_ID
    );
    let out = run(&["simulate", "demo-collision"])?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    ensure!(out.status.code() == Some(0), "simulate exited {:?}", out.status.code());
    ensure!(stdout.contains("(critical,") && stdout.contains("critical:"), "no critical table printed");
    let tables = stdout.lines().filter(|l| l.starts_with("table ")).count();
    Ok(format!("init, import, query printed {}; simulate exit 0 with {tables} critical tables", seed::EXEMPLAR_ID))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("seed fidelity", seed_fidelity),
        ("reachability oracle", reachability_oracle),
        ("firing equation", firing_equation),
        ("sequencing-table replay", table_replay),
        ("persistence round trip", persistence),
        ("query oracle", query_oracle),
        ("subsumption oracle", subsumption_oracle),
        ("end-to-end CLI", cli_end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail}) [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
