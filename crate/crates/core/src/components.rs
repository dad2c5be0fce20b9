//! Built-in component catalog.
//!
//! | interface          | variants                        | produces          |
//! |--------------------|---------------------------------|-------------------|
//! | `tokenizer`        | `byte`, `whitespace`, `bpe`, `synthetic_bpe` | [`Tokenizer`] |
//! | `corpus`           | `jsonl`, `synthetic`            | [`CorpusSource`]  |
//! | `pipeline`         | `tokenize`                      | [`TokenizeJob`]   |
//! | `model_shape`      | `transformer_block`             | [`ModelShape`]    |
//! | `collective_model` | `alpha_beta`                    | [`CollectiveModel`] |
//! | `planner`          | `fsdp`                          | [`PlannerJob`]    |
//! | `benchmark`        | `tokenize_sweep`                | [`BenchJob`]      |

use std::path::PathBuf;
use std::sync::Arc;

use crate::config_graph::{
    BoxError, ConfigValue, FactoryDescriptor, ParamKind, ParamSpec, Params, Registry,
};
use crate::corpus_index::{
    build_index, load_index, sidecar_path, verify_index, write_index, DocumentIndex, IndexStatus,
};
use crate::packed::PackedSummary;
use crate::pipeline::{
    bench_pipeline, default_workers, run_pipeline, synthetic_bpe_tokenizer, write_synthetic_corpus,
    BenchRow, BenchSweep, CorpusSize, PipelineConfig, PipelineError, PipelineStats,
    SyntheticCorpus, DEFAULT_TEXT_KEY,
};
use crate::planner::{
    message_size_table, plan_unit_size, CollectiveModel, FsdpPlan, ModelShape, PlannerError,
};
use crate::tokenizers::{load_tokenizer, Tokenizer, TokenizerKind, TokenizerSpec};

/// A raw JSONL corpus with a document index that matches it.
#[derive(Debug, Clone)]
pub struct CorpusSource {
    pub raw_path: PathBuf,
    pub index: DocumentIndex,
    pub text_key: String,
}

impl CorpusSource {
    /// Load the sidecar index if it is current, otherwise build (and, if
    /// `persist`, write) a fresh one.
    pub fn open(
        raw_path: PathBuf,
        index_path: Option<PathBuf>,
        persist: bool,
        text_key: String,
    ) -> Result<Self, BoxError> {
        let index_path = index_path.unwrap_or_else(|| sidecar_path(&raw_path));
        if index_path.exists() {
            let index = load_index(&index_path)?;
            if verify_index(&index, &raw_path)? == IndexStatus::Ok {
                return Ok(CorpusSource {
                    raw_path,
                    index,
                    text_key,
                });
            }
            log::warn!("{} is stale, rebuilding", index_path.display());
        }
        let index = build_index(&raw_path)?;
        if persist {
            write_index(&index, &index_path)?;
        }
        Ok(CorpusSource {
            raw_path,
            index,
            text_key,
        })
    }
}

/// A configured tokenization run.
#[derive(Debug)]
pub struct TokenizeJob {
    pub corpus: Arc<CorpusSource>,
    pub tokenizer: Arc<Tokenizer>,
    pub config: PipelineConfig,
}

impl TokenizeJob {
    pub fn run(&self) -> Result<(PackedSummary, PipelineStats), PipelineError> {
        run_pipeline(
            &self.corpus.raw_path,
            self.corpus.index.clone(),
            &self.tokenizer,
            &self.config,
        )
    }
}

/// Message-size table plus the chosen unit size per DP degree.
#[derive(Debug, Clone)]
pub struct PlannerJob {
    pub shape: ModelShape,
    pub collective: CollectiveModel,
    pub dp_degrees: Vec<u64>,
    pub blocks_per_unit: Vec<u64>,
    pub memory_cap_bytes: Option<u64>,
}

impl PlannerJob {
    pub fn table(&self) -> Result<Vec<FsdpPlan>, PlannerError> {
        message_size_table(
            &self.shape,
            &self.collective,
            &self.dp_degrees,
            &self.blocks_per_unit,
        )
    }

    /// Best grouping for each DP degree, when a memory cap is configured.
    pub fn plans(&self) -> Result<Vec<FsdpPlan>, PlannerError> {
        let Some(cap) = self.memory_cap_bytes else {
            return Ok(Vec::new());
        };
        self.dp_degrees
            .iter()
            .map(|&dp| plan_unit_size(&self.shape, dp, &self.collective, cap))
            .collect()
    }
}

/// A throughput sweep over pipeline settings.
#[derive(Debug)]
pub struct BenchJob {
    pub corpus: Arc<CorpusSource>,
    pub tokenizer: Arc<Tokenizer>,
    pub sweep: BenchSweep,
    pub work_dir: PathBuf,
}

impl BenchJob {
    pub fn run(&self) -> Result<Vec<BenchRow>, PipelineError> {
        std::fs::create_dir_all(&self.work_dir)?;
        bench_pipeline(
            &self.corpus.raw_path,
            &self.tokenizer,
            &self.sweep,
            &self.work_dir,
        )
    }
}

fn opt_token_id(p: &Params, name: &str) -> Result<Option<u32>, BoxError> {
    match p.opt_count(name, 0)? {
        None => Ok(None),
        Some(v) => {
            Ok(Some(u32::try_from(v).map_err(|_| {
                format!("{name} {v} does not fit in 32 bits")
            })?))
        }
    }
}

fn tokenizer_spec(p: &Params, kind: TokenizerKind) -> Result<TokenizerSpec, BoxError> {
    Ok(TokenizerSpec {
        kind,
        vocab_path: p.opt_str("vocab_path")?.map(PathBuf::from),
        merges_path: p.opt_str("merges_path")?.map(PathBuf::from),
        eod_token_id: opt_token_id(p, "eod_token_id")?,
        unk_token_id: opt_token_id(p, "unk_token_id")?,
    })
}

fn int_list(items: &[i64]) -> ConfigValue {
    ConfigValue::List(items.iter().map(|&v| ConfigValue::Int(v)).collect())
}

fn count_list(p: &Params, name: &str) -> Result<Vec<u64>, BoxError> {
    let items = p.opt_count_list(name, 1)?.unwrap_or_default();
    if items.is_empty() {
        return Err(format!("{name} must list at least one value").into());
    }
    Ok(items)
}

fn usize_list(p: &Params, name: &str) -> Result<Vec<usize>, BoxError> {
    Ok(count_list(p, name)?
        .into_iter()
        .map(|v| v as usize)
        .collect())
}

fn tokenizers(reg: &mut Registry) -> Result<(), BoxError> {
    use ParamKind::*;
    let eod = || ParamSpec::optional("eod_token_id", Int);
    let unk = || ParamSpec::optional("unk_token_id", Int);
    reg.register(
        FactoryDescriptor::builder("tokenizer", "byte")
            .param(eod())
            .construct(|p| Ok(load_tokenizer(&tokenizer_spec(p, TokenizerKind::Byte)?)?)),
    )?;
    reg.register(
        FactoryDescriptor::builder("tokenizer", "whitespace")
            .param(ParamSpec::required("vocab_path", Str))
            .param(unk())
            .param(eod())
            .construct(|p| {
                Ok(load_tokenizer(&tokenizer_spec(
                    p,
                    TokenizerKind::Whitespace,
                )?)?)
            }),
    )?;
    reg.register(
        FactoryDescriptor::builder("tokenizer", "bpe")
            .param(ParamSpec::required("vocab_path", Str))
            .param(ParamSpec::required("merges_path", Str))
            .param(unk())
            .param(eod())
            .construct(|p| Ok(load_tokenizer(&tokenizer_spec(p, TokenizerKind::Bpe)?)?)),
    )?;
    reg.register(
        FactoryDescriptor::builder("tokenizer", "synthetic_bpe")
            .construct(|_| Ok(synthetic_bpe_tokenizer()?)),
    )?;
    Ok(())
}

fn corpora(reg: &mut Registry) -> Result<(), BoxError> {
    use ParamKind::*;
    let text_key = || {
        ParamSpec::with_default(
            "text_key",
            Str,
            ConfigValue::Str(DEFAULT_TEXT_KEY.to_string()),
        )
    };
    reg.register(
        FactoryDescriptor::builder("corpus", "jsonl")
            .param(ParamSpec::required("raw_path", Str))
            .param(ParamSpec::optional("index_path", Str))
            .param(ParamSpec::with_default(
                "write_index",
                Bool,
                ConfigValue::Bool(true),
            ))
            .param(text_key())
            .construct(|p| {
                CorpusSource::open(
                    PathBuf::from(p.str("raw_path")?),
                    p.opt_str("index_path")?.map(PathBuf::from),
                    p.bool("write_index")?,
                    p.str("text_key")?.to_string(),
                )
            }),
    )?;
    reg.register(
        FactoryDescriptor::builder("corpus", "synthetic")
            .param(ParamSpec::required("raw_path", Str))
            .param(ParamSpec::with_default("seed", Int, ConfigValue::Int(0)))
            .param(ParamSpec::optional("documents", Int))
            .param(ParamSpec::optional("bytes", Int))
            .param(ParamSpec::with_default(
                "min_words",
                Int,
                ConfigValue::Int(20),
            ))
            .param(ParamSpec::with_default(
                "max_words",
                Int,
                ConfigValue::Int(200),
            ))
            .construct(|p| {
                let size = match (p.opt_count("documents", 0)?, p.opt_count("bytes", 0)?) {
                    (Some(n), None) => CorpusSize::Documents(n),
                    (None, Some(n)) => CorpusSize::Bytes(n),
                    _ => return Err("set exactly one of 'documents' and 'bytes'".into()),
                };
                let (min_words, max_words) = (p.count("min_words", 1)?, p.count("max_words", 1)?);
                if min_words > max_words {
                    return Err("min_words exceeds max_words".into());
                }
                let spec = SyntheticCorpus {
                    seed: p.int("seed")? as u64,
                    size,
                    min_words: min_words.try_into()?,
                    max_words: max_words.try_into()?,
                };
                let raw_path = PathBuf::from(p.str("raw_path")?);
                if let Some(dir) = raw_path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                write_synthetic_corpus(&spec, &raw_path)?;
                CorpusSource::open(raw_path, None, true, DEFAULT_TEXT_KEY.to_string())
            }),
    )?;
    Ok(())
}

fn pipelines(reg: &mut Registry) -> Result<(), BoxError> {
    use ParamKind::*;
    reg.register(
        FactoryDescriptor::builder("pipeline", "tokenize")
            .param(ParamSpec::dependency("corpus", "corpus"))
            .param(ParamSpec::dependency("tokenizer", "tokenizer"))
            .param(ParamSpec::required("out_path", Str))
            .param(ParamSpec::optional("workers", Int))
            .param(ParamSpec::with_default(
                "batch_size",
                Int,
                ConfigValue::Int(64),
            ))
            .param(ParamSpec::with_default(
                "queue_capacity",
                Int,
                ConfigValue::Int(16),
            ))
            .param(ParamSpec::with_default(
                "append_eod",
                Bool,
                ConfigValue::Bool(true),
            ))
            .param(ParamSpec::optional("reorder_cap", Int))
            .construct(|p| {
                let corpus = p.dependency::<CorpusSource>("corpus")?;
                let config = PipelineConfig {
                    workers: p
                        .opt_count("workers", 1)?
                        .map_or_else(default_workers, |w| w as usize),
                    batch_size: p.count("batch_size", 1)? as usize,
                    queue_capacity: p.count("queue_capacity", 1)? as usize,
                    append_eod: p.bool("append_eod")?,
                    text_key: corpus.text_key.clone(),
                    reorder_cap: p.opt_count("reorder_cap", 1)?.map(|v| v as usize),
                    out_path: PathBuf::from(p.str("out_path")?),
                };
                Ok(TokenizeJob {
                    corpus,
                    tokenizer: p.dependency("tokenizer")?,
                    config,
                })
            }),
    )?;
    reg.register(
        FactoryDescriptor::builder("benchmark", "tokenize_sweep")
            .param(ParamSpec::dependency("corpus", "corpus"))
            .param(ParamSpec::dependency("tokenizer", "tokenizer"))
            .param(ParamSpec::with_default(
                "workers",
                List,
                int_list(&[1, 2, 4]),
            ))
            .param(ParamSpec::with_default(
                "batch_sizes",
                List,
                int_list(&[64]),
            ))
            .param(ParamSpec::with_default(
                "queue_capacities",
                List,
                int_list(&[16]),
            ))
            .param(ParamSpec::with_default(
                "work_dir",
                Str,
                ConfigValue::Str("bench_out".to_string()),
            ))
            .construct(|p| {
                Ok(BenchJob {
                    corpus: p.dependency("corpus")?,
                    tokenizer: p.dependency("tokenizer")?,
                    sweep: BenchSweep {
                        workers: usize_list(p, "workers")?,
                        batch_sizes: usize_list(p, "batch_sizes")?,
                        queue_capacities: usize_list(p, "queue_capacities")?,
                    },
                    work_dir: PathBuf::from(p.str("work_dir")?),
                })
            }),
    )?;
    Ok(())
}

fn planning(reg: &mut Registry) -> Result<(), BoxError> {
    use ParamKind::*;
    let mut shape = FactoryDescriptor::builder("model_shape", "transformer_block");
    for name in [
        "hidden",
        "ffn_hidden",
        "query_heads",
        "kv_heads",
        "head_dim",
        "layers",
    ] {
        shape = shape.param(ParamSpec::required(name, Int));
    }
    reg.register(
        shape
            .param(ParamSpec::with_default(
                "dtype_bytes",
                Int,
                ConfigValue::Int(2),
            ))
            .construct(|p| {
                let shape = ModelShape {
                    hidden: p.count("hidden", 1)?,
                    ffn_hidden: p.count("ffn_hidden", 1)?,
                    query_heads: p.count("query_heads", 1)?,
                    kv_heads: p.count("kv_heads", 1)?,
                    head_dim: p.count("head_dim", 1)?,
                    layers: p.count("layers", 1)?,
                    dtype_bytes: p.count("dtype_bytes", 1)?,
                };
                shape.validate()?;
                Ok(shape)
            }),
    )?;
    reg.register(
        FactoryDescriptor::builder("collective_model", "alpha_beta")
            .param(ParamSpec::required("alpha", Float))
            .param(ParamSpec::required("bandwidth", Float))
            .construct(|p| {
                Ok(CollectiveModel::new(
                    p.float("alpha")?,
                    p.float("bandwidth")?,
                )?)
            }),
    )?;
    reg.register(
        FactoryDescriptor::builder("planner", "fsdp")
            .param(ParamSpec::dependency("shape", "model_shape"))
            .param(ParamSpec::dependency("collective", "collective_model"))
            .param(ParamSpec::required("dp_degrees", List))
            .param(ParamSpec::with_default(
                "blocks_per_unit",
                List,
                int_list(&[1]),
            ))
            .param(ParamSpec::optional("memory_cap_bytes", Int))
            .construct(|p| {
                let dp_degrees = count_list(p, "dp_degrees")?;
                if dp_degrees.iter().any(|&dp| dp < 2) {
                    return Err("dp_degrees must all be at least 2".into());
                }
                Ok(PlannerJob {
                    shape: *p.dependency::<ModelShape>("shape")?,
                    collective: *p.dependency::<CollectiveModel>("collective")?,
                    dp_degrees,
                    blocks_per_unit: count_list(p, "blocks_per_unit")?,
                    memory_cap_bytes: p.opt_count("memory_cap_bytes", 1)?,
                })
            }),
    )?;
    Ok(())
}

/// Registry holding every built-in component.
pub fn builtin_registry() -> Registry {
    let mut reg = Registry::new();
    let result = tokenizers(&mut reg)
        .and(corpora(&mut reg))
        .and(pipelines(&mut reg))
        .and(planning(&mut reg));
    if let Err(e) = result {
        panic!("built-in catalog is inconsistent: {e}");
    }
    reg
}
