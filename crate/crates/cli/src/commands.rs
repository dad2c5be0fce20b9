use std::path::Path;
use std::sync::Arc;

use corpusforge::components::{builtin_registry, BenchJob, PlannerJob, TokenizeJob};
use corpusforge::config_graph::{
    resolve_roots, validate_document, DependencyGraph, Diagnostic, Level, Registry,
};
use corpusforge::corpus_index::{build_index, sidecar_path, write_index};
use corpusforge::packed::{
    chunk, load_permutation, make_permutation, materialize_chunk, perm_sidecar_path,
    write_permutation, PackedReader,
};
use corpusforge::pipeline::bench_csv;
use corpusforge::planner::table_csv;
use serde_json::json;

use crate::{Command, ConfigArgs};

pub enum Failure {
    /// Configuration defects, one diagnostic per line.
    Invalid(Vec<Diagnostic>),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn report(&self, as_json: bool) {
        match self {
            Failure::Invalid(diagnostics) if as_json => {
                println!("{}", json!({ "valid": false, "diagnostics": diagnostics }));
            }
            Failure::Runtime(message) if as_json => {
                println!("{}", json!({ "error": message }));
            }
            Failure::Invalid(diagnostics) => {
                for d in diagnostics {
                    println!("{d}");
                }
            }
            Failure::Runtime(message) => eprintln!("error: {message}"),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn invalid(node_id: &str, message: impl Into<String>) -> Failure {
    Failure::Invalid(vec![Diagnostic {
        level: Level::Error,
        node_id: node_id.to_string(),
        message: message.into(),
    }])
}

pub fn run(command: Command, as_json: bool) -> Result<(), Failure> {
    let emit = |value: serde_json::Value, line: String| {
        if as_json {
            println!("{value}");
        } else {
            println!("{line}");
        }
    };
    match command {
        Command::Resolve {
            config,
            instantiate,
        } => resolve(&config, instantiate, as_json),
        Command::Index { raw_path } => {
            let index = build_index(&raw_path).map_err(runtime)?;
            let index_path = sidecar_path(&raw_path);
            write_index(&index, &index_path).map_err(runtime)?;
            emit(
                json!({
                    "raw_path": raw_path,
                    "index_path": index_path,
                    "documents": index.len(),
                    "source_size": index.source_size,
                }),
                format!(
                    "indexed {} documents ({} bytes) -> {}",
                    index.len(),
                    index.source_size,
                    index_path.display()
                ),
            );
            Ok(())
        }
        Command::Tokenize { config } => {
            let job = build::<TokenizeJob>(&config, "pipeline")?;
            let (summary, stats) = job.run().map_err(runtime)?;
            emit(
                json!({ "out_path": job.config.out_path, "summary": summary, "stats": stats }),
                format!(
                    "tokenized {} documents ({} skipped) into {} tokens -> {} ({:.0} tokens/s)",
                    stats.documents,
                    stats.skipped,
                    stats.tokens,
                    job.config.out_path.display(),
                    stats.tokens_per_sec
                ),
            );
            Ok(())
        }
        Command::Shuffle { packed, seed, out } => {
            let reader = PackedReader::open(&packed).map_err(runtime)?;
            let perm = make_permutation(reader.doc_count(), seed);
            let out = out.unwrap_or_else(|| perm_sidecar_path(&packed));
            write_permutation(&perm, &out).map_err(runtime)?;
            emit(
                json!({ "perm_path": out, "documents": perm.len(), "seed": seed }),
                format!(
                    "wrote permutation of {} documents (seed {seed}) -> {}",
                    perm.len(),
                    out.display()
                ),
            );
            Ok(())
        }
        Command::Chunk {
            packed,
            perm,
            k,
            out_dir,
        } => {
            let reader = PackedReader::open(&packed).map_err(runtime)?;
            let perm = load_permutation(&perm).map_err(runtime)?;
            if perm.len() as u64 != reader.doc_count() {
                return Err(Failure::Runtime(format!(
                    "permutation covers {} documents but {} holds {}",
                    perm.len(),
                    packed.display(),
                    reader.doc_count()
                )));
            }
            let spec = chunk(&perm, k).map_err(runtime)?;
            std::fs::create_dir_all(&out_dir).map_err(runtime)?;
            let mut chunks = Vec::with_capacity(k);
            for (i, docs) in spec.assignments.iter().enumerate() {
                let path = out_dir.join(format!("chunk_{i:05}.cfpk"));
                let summary = materialize_chunk(&reader, docs, &path).map_err(runtime)?;
                chunks.push(json!({
                    "path": path,
                    "documents": summary.doc_count,
                    "tokens": summary.token_count,
                }));
            }
            emit(
                json!({ "chunks": chunks }),
                format!(
                    "wrote {k} chunks of {} documents -> {}",
                    perm.len(),
                    out_dir.display()
                ),
            );
            Ok(())
        }
        Command::Sample { packed, s, seq_len } => {
            let reader = PackedReader::open(&packed).map_err(runtime)?;
            let tokens = reader.get_sample(s, seq_len).map_err(runtime)?;
            let line = tokens
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(" ");
            emit(
                json!({ "sample": s, "seq_len": seq_len, "tokens": tokens }),
                line,
            );
            Ok(())
        }
        Command::Plan { config } => {
            let job = build::<PlannerJob>(&config, "planner")?;
            let table = job.table().map_err(runtime)?;
            let plans = job.plans().map_err(runtime)?;
            if as_json {
                println!("{}", json!({ "table": table, "plans": plans }));
            } else {
                print!("{}", table_csv(&table));
                for p in &plans {
                    eprintln!(
                        "dp={}: best blocks_per_unit={} (shard {} bytes, step communication {:.6} s)",
                        p.dp, p.blocks_per_unit, p.shard_bytes, p.step_comm_seconds
                    );
                }
            }
            Ok(())
        }
        Command::Bench { config } => {
            let job = build::<BenchJob>(&config, "benchmark")?;
            let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
            if job.sweep.workers.iter().any(|&w| w > cores) {
                log::warn!("sweep uses more workers than the {cores} available cores");
            }
            let rows = job.run().map_err(runtime)?;
            if as_json {
                println!("{}", json!({ "cores": cores, "rows": rows }));
            } else {
                print!("{}", bench_csv(&rows));
            }
            Ok(())
        }
    }
}

struct Checked {
    registry: Registry,
    graph: DependencyGraph,
    root: Option<String>,
    warnings: Vec<Diagnostic>,
}

fn read_config(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Validate the document; pick the root from `--root` or, failing that, the
/// only node implementing `interface`.
fn check(args: &ConfigArgs, interface: Option<&str>) -> Result<Checked, Failure> {
    let text = read_config(&args.config)?;
    let registry = builtin_registry();
    let validation = validate_document(&text, &registry, &args.overrides, None);
    let Some(graph) = validation.graph else {
        return Err(Failure::Invalid(validation.diagnostics));
    };
    let root = match (&args.root, interface) {
        (Some(root), _) => {
            if graph.node(root).is_none() {
                return Err(invalid(root, "root node is not defined"));
            }
            Some(root.clone())
        }
        (None, Some(interface)) => {
            let matching: Vec<&String> = graph
                .nodes()
                .iter()
                .filter(|(_, n)| n.interface.as_str() == interface)
                .map(|(id, _)| id)
                .collect();
            match matching.as_slice() {
                [only] => Some((*only).clone()),
                [] => {
                    return Err(invalid(
                        "<document>",
                        format!("no node implements '{interface}'"),
                    ))
                }
                _ => {
                    return Err(invalid(
                        "<document>",
                        format!("several nodes implement '{interface}'; pick one with --root"),
                    ))
                }
            }
        }
        (None, None) => None,
    };
    let warnings = root
        .as_deref()
        .map(|r| graph.unused_node_warnings(&[r]))
        .unwrap_or_default();
    Ok(Checked {
        registry,
        graph,
        root,
        warnings,
    })
}

fn build<T: std::any::Any + Send + Sync>(
    args: &ConfigArgs,
    interface: &str,
) -> Result<Arc<T>, Failure> {
    let checked = check(args, Some(interface))?;
    for w in &checked.warnings {
        eprintln!("{w}");
    }
    let root = checked.root.expect("interface lookup always yields a root");
    let node = checked.graph.node(&root).expect("root was checked");
    if node.interface.as_str() != interface {
        return Err(invalid(
            &root,
            format!(
                "root implements '{}' but this command needs '{interface}'",
                node.interface
            ),
        ));
    }
    let objects =
        resolve_roots(&checked.graph, &checked.registry, &[root.as_str()]).map_err(runtime)?;
    let job = objects
        .get::<T>(&root)
        .expect("factory output type is bound to its interface");
    Ok(job)
}

fn resolve(args: &ConfigArgs, instantiate: bool, as_json: bool) -> Result<(), Failure> {
    let checked = check(args, None)?;
    let mut instantiated = None;
    if instantiate {
        let roots: Vec<&str> = match &checked.root {
            Some(root) => vec![root.as_str()],
            None => checked.graph.nodes().keys().map(String::as_str).collect(),
        };
        let objects = resolve_roots(&checked.graph, &checked.registry, &roots).map_err(runtime)?;
        instantiated = Some(objects.instantiation_order().to_vec());
    }
    if as_json {
        println!(
            "{}",
            json!({
                "valid": true,
                "nodes": checked.graph.nodes().len(),
                "topological_order": checked.graph.topological_order(),
                "diagnostics": checked.warnings,
                "instantiated": instantiated,
            })
        );
    } else {
        for w in &checked.warnings {
            println!("{w}");
        }
    }
    Ok(())
}
