use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use railsafe_core::ontology::{parse_ontology, LoadOptions, Ontology, TreeNode};
use railsafe_core::petri::{
    find_critical, parse_net_text, reachability, to_dot, to_net_text, validate_net, CriticalOptions,
    CriticalPredicate, CriticalReport, ExplorationBounds, SequencingTable,
};
use railsafe_core::query::{evaluate, explain, parse_query, EvalMode, Projection};
use railsafe_core::report::ValidationReport;
use railsafe_core::seed;
use railsafe_core::store::{Archive, NetModel, ScenarioDocument, Status};

use crate::config::read_ontology;
use crate::ApiConfig;

#[derive(Debug, Parser)]
#[command(name = "railsafe", version, about = "Railway accident scenario knowledge base")]
struct Cli {
    /// Archive directory.
    #[arg(long, global = true, env = "RAILSAFE_ARCHIVE", default_value = "./archive")]
    archive: PathBuf,
    /// Ontology file.
    #[arg(long, global = true, env = "RAILSAFE_ONTOLOGY", default_value = "./ontology.xml")]
    ontology: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create the archive and install the seed ontology and demo scenarios.
    Init {
        /// Skip the demonstration scenarios.
        #[arg(long)]
        no_demos: bool,
        /// Overwrite an existing ontology file and demo documents.
        #[arg(long)]
        force: bool,
    },
    /// Check scenario documents, ontology files or `.net` text files.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Search a scenario's net for critical markings.
    Simulate(SimulateArgs),
    /// Run a consultation query.
    Query {
        /// Query text; empty matches everything.
        #[arg(default_value = "")]
        text: String,
        #[arg(long, value_enum, default_value_t = ProjectionArg::Summaries)]
        projection: ProjectionArg,
        #[arg(long)]
        json: bool,
        /// Show how each atom is resolved instead of running the query.
        #[arg(long)]
        explain: bool,
        /// Test every document instead of using the index.
        #[arg(long)]
        scan: bool,
    },
    /// Add scenario documents to the archive.
    Import {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        overwrite: bool,
    },
    /// Print an archived scenario.
    Export {
        id: String,
        #[arg(long, value_enum, default_value_t = ExportFormat::Xml)]
        format: ExportFormat,
    },
    /// Print the ontology as a concept forest.
    Tree {
        #[arg(long)]
        json: bool,
    },
    /// List archived scenarios.
    List {
        #[arg(long)]
        status: Option<StatusArg>,
        #[arg(long)]
        json: bool,
    },
    /// Rebuild the archive index from the document files.
    Reindex,
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Archived scenario id, or a path to a scenario document or `.net` file.
    target: String,
    /// Critical predicate, e.g. "seg3 >= 2"; defaults to the document's own.
    #[arg(long)]
    pred: Option<String>,
    #[arg(long)]
    max_markings: Option<usize>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Report every simple path to a critical marking, not only the shortest.
    #[arg(long)]
    all_paths: bool,
    #[arg(long)]
    json: bool,
    /// Save the resulting tables into the archived document.
    #[arg(long)]
    store: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Require `Authorization: Bearer <token>`.
    #[arg(long, env = "RAILSAFE_TOKEN")]
    token: Option<String>,
    /// Allowed CORS origin; repeatable, `*` for any.
    #[arg(long = "cors-origin")]
    cors_origins: Vec<String>,
    /// Seconds allowed per simulate request.
    #[arg(long, default_value_t = 10)]
    time_budget: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProjectionArg {
    Ids,
    Summaries,
    Full,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExportFormat {
    Xml,
    Json,
    Net,
    Dot,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StatusArg {
    Draft,
    Validated,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type CmdResult = Result<i32, Failure>;

struct Ctx<'a> {
    archive: PathBuf,
    ontology: PathBuf,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Ctx<'_> {
    /// The configured ontology, or the built-in seed when the file is absent.
    fn load_ontology(&mut self) -> Result<Ontology, Failure> {
        if self.ontology.exists() {
            let (o, warnings) = read_ontology(&self.ontology).map_err(Failure)?;
            for w in warnings {
                let _ = writeln!(self.err, "warning: {w}");
            }
            Ok(o)
        } else {
            let _ = writeln!(
                self.err,
                "note: {} not found, using the built-in seed ontology",
                self.ontology.display()
            );
            Ok(seed::ontology())
        }
    }

    fn open_archive(&mut self) -> Result<Archive, Failure> {
        let o = self.load_ontology()?;
        let archive = Archive::open(&self.archive, Arc::new(o))?;
        if let Some(stats) = archive.open_rebuild() {
            for (name, why) in &stats.corrupt {
                let _ = writeln!(self.err, "warning: skipped {name}: {why}");
            }
        }
        let archive = if self.ontology.exists() {
            archive.with_ontology_file(&self.ontology)
        } else {
            archive
        };
        Ok(archive)
    }
}

fn json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Runs the command line. Returns the process exit code: 0 on success,
/// 1 on operation errors, 2 on usage errors.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    let mut ctx = Ctx {
        archive: cli.archive,
        ontology: cli.ontology,
        out,
        err,
    };
    let result = match cli.command {
        Command::Init { no_demos, force } => init(&mut ctx, no_demos, force),
        Command::Validate { files } => validate(&mut ctx, &files),
        Command::Simulate(args) => simulate(&mut ctx, args),
        Command::Query { text, projection, json, explain, scan } => {
            query(&mut ctx, &text, projection, json, explain, scan)
        }
        Command::Import { files, overwrite } => import(&mut ctx, &files, overwrite),
        Command::Export { id, format } => export(&mut ctx, &id, format),
        Command::Tree { json } => tree(&mut ctx, json),
        Command::List { status, json } => list(&mut ctx, status, json),
        Command::Reindex => reindex(&mut ctx),
        Command::Serve(args) => serve(&mut ctx, args),
    };
    match result {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(ctx.err, "error: {msg}");
            1
        }
    }
}

fn init(ctx: &mut Ctx, no_demos: bool, force: bool) -> CmdResult {
    if ctx.ontology.exists() && !force {
        return Err(Failure(format!(
            "{} already exists (use --force to replace it)",
            ctx.ontology.display()
        )));
    }
    if let Some(dir) = ctx.ontology.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    railsafe_core::store::write_atomic(&ctx.ontology, seed::ONTOLOGY_XML.as_bytes())?;
    let mut archive = ctx.open_archive()?;
    writeln!(ctx.out, "ontology written to {}", ctx.ontology.display())?;
    if !no_demos {
        for mut doc in [seed::demo_collision(), seed::demo_door_closing()] {
            if archive.contains(doc.id()) && !force {
                writeln!(ctx.out, "kept existing {}", doc.id())?;
                continue;
            }
            let id = archive.save(&mut doc, force)?;
            writeln!(ctx.out, "installed {id}")?;
        }
    }
    writeln!(ctx.out, "archive ready at {} ({} documents)", ctx.archive.display(), archive.len())?;
    Ok(0)
}

enum FileKind {
    Scenario,
    Ontology,
    NetText,
}

fn sniff(path: &Path, text: &str) -> Result<FileKind, Failure> {
    if path.extension().is_some_and(|e| e == "net") {
        return Ok(FileKind::NetText);
    }
    let first = text
        .trim_start()
        .strip_prefix("<?xml")
        .and_then(|rest| rest.split_once("?>").map(|(_, after)| after))
        .unwrap_or(text)
        .trim_start();
    if first.starts_with("<scenario") {
        Ok(FileKind::Scenario)
    } else if first.starts_with("<ontology") {
        Ok(FileKind::Ontology)
    } else {
        Err(Failure(format!(
            "{}: not a scenario document, ontology or .net file",
            path.display()
        )))
    }
}

fn validate_file(ctx: &mut Ctx, path: &Path) -> Result<ValidationReport, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    let mut report = ValidationReport::new();
    match sniff(path, &text)? {
        FileKind::Scenario => match ScenarioDocument::from_xml(&text) {
            Err(e) => report.error(None, "malformed", e.to_string()),
            Ok(doc) => {
                let o = ctx.load_ontology()?;
                report = doc.validate(&o);
                for (i, t) in doc.tables.iter().enumerate() {
                    match &doc.net {
                        Some(m) => {
                            if let Err(e) = t.replay(&m.net) {
                                report.error(Some(&format!("table {}", i + 1)), "replay", e.to_string());
                            }
                        }
                        None => report.error(Some(&format!("table {}", i + 1)), "replay", "document has no net"),
                    }
                }
            }
        },
        FileKind::Ontology => match parse_ontology(&text, LoadOptions::default()) {
            Err(e) => report.error(None, "ontology", e.to_string()),
            Ok(loaded) => {
                for w in loaded.warnings.iter().chain(loaded.ontology.lints().iter()) {
                    report.warning(None, "ontology-lint", w.clone());
                }
            }
        },
        FileKind::NetText => match parse_net_text(&text) {
            Err(e) => report.error(None, "malformed", e.to_string()),
            Ok((net, m)) => {
                report = validate_net(&net);
                if let Err(e) = m.check(&net) {
                    report.error(None, "initial-marking", e.to_string());
                }
            }
        },
    }
    Ok(report)
}

fn validate(ctx: &mut Ctx, files: &[PathBuf]) -> CmdResult {
    let mut failed = false;
    for path in files {
        let report = validate_file(ctx, path)?;
        if files.len() > 1 {
            writeln!(ctx.out, "{}:", path.display())?;
        }
        for f in &report.findings {
            writeln!(ctx.out, "  {f}")?;
        }
        writeln!(ctx.out, "{}", report.summary())?;
        failed |= !report.is_ok();
    }
    Ok(if failed { 1 } else { 0 })
}

/// Loads the simulate target: a file on disk wins over an archive id.
fn simulation_target(ctx: &mut Ctx, target: &str) -> Result<(Option<Archive>, Option<ScenarioDocument>, NetModel), Failure> {
    let path = Path::new(target);
    if path.is_file() {
        let text = fs::read_to_string(path)?;
        return match sniff(path, &text)? {
            FileKind::NetText => {
                let (net, initial) = parse_net_text(&text)?;
                Ok((None, None, NetModel { net, initial, predicate: None }))
            }
            FileKind::Scenario => {
                let doc = ScenarioDocument::from_xml(&text)?;
                let model = doc.net.clone().ok_or_else(|| Failure(format!("{target} has no net")))?;
                Ok((None, Some(doc), model))
            }
            FileKind::Ontology => Err(Failure(format!("{target} is an ontology, not a scenario"))),
        };
    }
    let archive = ctx.open_archive()?;
    let doc = archive.load(target)?;
    let model = doc
        .net
        .clone()
        .ok_or_else(|| Failure(format!("scenario `{target}` has no net")))?;
    Ok((Some(archive), Some(doc), model))
}

fn print_table(out: &mut dyn Write, n: usize, t: &SequencingTable) -> std::io::Result<()> {
    let kind = if t.critical { "critical" } else { "non-critical" };
    writeln!(out, "table {n} ({kind}, {} steps)", t.rows.len())?;
    writeln!(out, "  initial: {}", t.initial)?;
    for (i, r) in t.rows.iter().enumerate() {
        writeln!(out, "  {:>2}. {}  {}", i + 1, r.transition, r.situation_label)?;
        writeln!(out, "      {}", r.marking)?;
    }
    if t.critical {
        writeln!(out, "  critical: {} holds", t.predicate)?;
    }
    Ok(())
}

fn simulate(ctx: &mut Ctx, args: SimulateArgs) -> CmdResult {
    let (archive, doc, model) = simulation_target(ctx, &args.target)?;
    let predicate: CriticalPredicate = match (&args.pred, &model.predicate) {
        (Some(text), _) => text.parse().map_err(|e| Failure(format!("bad predicate: {e}")))?,
        (None, Some(p)) => p.clone(),
        (None, None) => return Err(Failure("no critical predicate; pass --pred".into())),
    };
    let defaults = ExplorationBounds::default();
    let bounds = ExplorationBounds {
        max_markings: args.max_markings.unwrap_or(defaults.max_markings),
        max_tokens: args.max_tokens.unwrap_or(defaults.max_tokens),
        max_depth: args.max_depth.unwrap_or(defaults.max_depth),
    };
    let report: CriticalReport = find_critical(
        &model.net,
        &model.initial,
        &predicate,
        bounds,
        CriticalOptions { all_paths: args.all_paths },
    )?;
    if args.json {
        json(ctx.out, &report)?;
    } else {
        for (i, t) in report.tables.iter().enumerate() {
            print_table(ctx.out, i + 1, t)?;
        }
        if report.tables.is_empty() {
            writeln!(ctx.out, "no critical marking reachable within bounds")?;
        }
        writeln!(
            ctx.out,
            "{} critical tables, {} markings explored{}",
            report.tables.len(),
            report.markings_explored,
            if report.truncated { " (truncated)" } else { "" }
        )?;
    }
    if args.store {
        match (archive, doc) {
            (Some(mut archive), Some(mut doc)) => {
                doc.tables = report.tables;
                archive.save(&mut doc, true)?;
                writeln!(ctx.err, "stored tables in {}", doc.id())?;
            }
            _ => return Err(Failure("--store needs an archived scenario id".into())),
        }
    }
    Ok(0)
}

fn query(ctx: &mut Ctx, text: &str, projection: ProjectionArg, as_json: bool, show_explain: bool, scan: bool) -> CmdResult {
    let q = parse_query(text)?;
    let archive = ctx.open_archive()?;
    if show_explain {
        let e = explain(&q, archive.ontology(), Some(archive.index()))?;
        if as_json {
            json(ctx.out, &e)?;
        } else {
            if e.atoms.is_empty() {
                writeln!(ctx.out, "match-all query: nothing to expand")?;
            }
            for a in &e.atoms {
                writeln!(ctx.out, "{}  [{:?}]", a.atom, a.served_by)?;
                if let Some(exp) = &a.expansion {
                    writeln!(ctx.out, "  expands to: {}", exp.join(", "))?;
                }
                if a.coded_entries_match {
                    writeln!(ctx.out, "  plus every coded entry under the parameter")?;
                }
                if !a.indexed_keys.is_empty() {
                    writeln!(ctx.out, "  indexed: {}", a.indexed_keys.join(", "))?;
                }
            }
        }
        return Ok(0);
    }
    let projection = match projection {
        ProjectionArg::Ids => Projection::Ids,
        ProjectionArg::Summaries => Projection::Summaries,
        ProjectionArg::Full => Projection::Full,
    };
    let mode = if scan { EvalMode::Scan } else { EvalMode::Index };
    let result = evaluate(&q, &archive, projection, mode)?;
    if as_json {
        json(ctx.out, &result)?;
    } else if !result.summaries.is_empty() {
        for s in &result.summaries {
            writeln!(ctx.out, "{}\t{}\t{}", s.id, s.status, s.title)?;
        }
    } else if !result.documents.is_empty() {
        for d in &result.documents {
            write!(ctx.out, "{}", d.to_xml())?;
        }
    } else {
        for id in &result.ids {
            writeln!(ctx.out, "{id}")?;
        }
    }
    Ok(0)
}

fn import(ctx: &mut Ctx, files: &[PathBuf], overwrite: bool) -> CmdResult {
    let mut archive = ctx.open_archive()?;
    let mut failed = false;
    for path in files {
        let outcome = fs::read_to_string(path)
            .map_err(Failure::from)
            .and_then(|text| ScenarioDocument::from_xml(&text).map_err(Failure::from))
            .and_then(|mut doc| archive.save(&mut doc, overwrite).map_err(Failure::from));
        match outcome {
            Ok(id) => writeln!(ctx.out, "imported {id}")?,
            Err(Failure(msg)) => {
                writeln!(ctx.err, "error: {}: {msg}", path.display())?;
                failed = true;
            }
        }
    }
    Ok(if failed { 1 } else { 0 })
}

fn export(ctx: &mut Ctx, id: &str, format: ExportFormat) -> CmdResult {
    let archive = ctx.open_archive()?;
    let doc = archive.load(id)?;
    match format {
        ExportFormat::Xml => write!(ctx.out, "{}", doc.to_xml())?,
        ExportFormat::Json => json(ctx.out, &doc)?,
        ExportFormat::Net | ExportFormat::Dot => {
            let m = doc.net.as_ref().ok_or_else(|| Failure(format!("scenario `{id}` has no net")))?;
            if matches!(format, ExportFormat::Net) {
                write!(ctx.out, "{}", to_net_text(&m.net, &m.initial))?;
            } else {
                let g = reachability(&m.net, &m.initial, ExplorationBounds::default())?;
                write!(ctx.out, "{}", to_dot(&g))?;
            }
        }
    }
    Ok(0)
}

fn print_node(out: &mut dyn Write, node: &TreeNode, depth: usize) -> std::io::Result<()> {
    let pad = "  ".repeat(depth);
    writeln!(out, "{pad}{} ({}) [{}]", node.label, node.id, node.layer.as_str())?;
    for i in &node.instances {
        let mark = if i.uncertain { " ?" } else { "" };
        writeln!(out, "{pad}  - {} ({}){mark}", i.label, i.id)?;
    }
    for c in &node.children {
        print_node(out, c, depth + 1)?;
    }
    Ok(())
}

fn tree(ctx: &mut Ctx, as_json: bool) -> CmdResult {
    let o = ctx.load_ontology()?;
    let forest = o.concept_tree();
    if as_json {
        json(ctx.out, &forest)?;
    } else {
        for root in &forest {
            print_node(ctx.out, root, 0)?;
        }
    }
    Ok(0)
}

fn list(ctx: &mut Ctx, status: Option<StatusArg>, as_json: bool) -> CmdResult {
    let archive = ctx.open_archive()?;
    let status = status.map(|s| match s {
        StatusArg::Draft => Status::Draft,
        StatusArg::Validated => Status::Validated,
    });
    let rows = archive.list(status);
    if as_json {
        json(ctx.out, &rows)?;
    } else {
        for s in rows {
            writeln!(ctx.out, "{}\t{}\t{}\t{}", s.id, s.status, s.modified.format("%Y-%m-%dT%H:%M:%SZ"), s.title)?;
        }
    }
    Ok(0)
}

fn reindex(ctx: &mut Ctx) -> CmdResult {
    let mut archive = ctx.open_archive()?;
    let stats = archive.rebuild_index()?;
    writeln!(
        ctx.out,
        "{} files scanned, {} documents, {} index entries, {} skipped",
        stats.scanned,
        stats.documents,
        stats.entries,
        stats.corrupt.len()
    )?;
    for (name, why) in &stats.corrupt {
        writeln!(ctx.out, "  skipped {name}: {why}")?;
    }
    Ok(0)
}

fn serve(ctx: &mut Ctx, args: ServeArgs) -> CmdResult {
    let mut config = ApiConfig::new(&ctx.archive, &ctx.ontology);
    config.listen = args.listen;
    config.token = args.token;
    config.cors_origins = args.cors_origins;
    config.time_budget = Duration::from_secs(args.time_budget.max(1));
    config.check().map_err(Failure)?;
    let archive = ctx.open_archive()?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    writeln!(ctx.err, "listening on http://{}", config.listen)?;
    runtime.block_on(crate::serve(config, archive))?;
    Ok(0)
}
