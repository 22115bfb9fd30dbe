use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

use spix::harness::formats::{
    corpus_inputs, format_result_lines, parse_embeddings, parse_judgments, parse_records,
    parse_results, prepare_queries, InputMode,
};
use spix::harness::selftest::{self, SelftestConfig};
use spix::harness::sweep::{
    rows_to_csv, run_sweep, Materialize, SweepInputs, SweepSpec, DEFAULT_THRESHOLDS,
};
use spix::harness::synthetic::{generate, render, SyntheticParams};
use spix::harness::{evaluate, run_queries, HarnessError};
use spix::index::{build_index, index_stats, load_index, save_index};
use spix::metrics::{flops_estimate, latency_stats, unjudged_queries, SssAggregation};
use spix::retrieval::{select_query_terms, Bm25Params, RetrievalError};
use spix::SearchParams;

use crate::config::Config;
use crate::{Bm25Flags, Cli, Command, InvariantError, UsageError};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e).into())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e).into())
}

fn source(path: &Path) -> String {
    path.display().to_string()
}

struct Ctx {
    config: Config,
    seed: u64,
    workers: usize,
}

impl Ctx {
    fn mode(&self, flag: Option<String>) -> Result<InputMode> {
        let raw = self
            .config
            .pick(flag, "mode", "vector".to_owned())
            .map_err(|e| usage(format!("{e:#}")))?;
        raw.parse().map_err(usage)
    }

    fn pick<T: serde::de::DeserializeOwned>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T> {
        self.config
            .pick(flag, key, default)
            .map_err(|e| usage(format!("{e:#}")))
    }

    fn bm25(&self, flags: Bm25Flags) -> Result<Bm25Params> {
        let d = Bm25Params::default();
        let p = Bm25Params {
            k1: self.pick(flags.k1, "k1", d.k1)?,
            b: self.pick(flags.b, "b", d.b)?,
        };
        if !(p.k1 >= 0.0 && (0.0..=1.0).contains(&p.b)) {
            return Err(usage("BM25 needs k1 >= 0 and b in [0, 1]"));
        }
        Ok(p)
    }

    fn aggregation(&self, flag: Option<String>) -> Result<SssAggregation> {
        match self
            .pick(flag, "sss_aggregation", "max".to_owned())?
            .as_str()
        {
            "max" => Ok(SssAggregation::Max),
            "mean" => Ok(SssAggregation::Mean),
            other => Err(usage(format!(
                "unknown SSS aggregation {other:?} (expected max or mean)"
            ))),
        }
    }
}

fn search_params(top_n: usize, query_k: usize, threshold: f64) -> Result<SearchParams> {
    SearchParams::new(top_n, query_k, threshold).map_err(|e| usage(e.to_string()))
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| usage(format!("{e:#}")))?,
        None => Config::default(),
    };
    let default_workers = std::thread::available_parallelism().map_or(1, usize::from);
    let ctx = Ctx {
        seed: config
            .pick(cli.seed, "seed", 0)
            .map_err(|e| usage(format!("{e:#}")))?,
        workers: config
            .pick(cli.workers, "workers", default_workers)
            .map_err(|e| usage(format!("{e:#}")))?,
        config,
    };
    if ctx.workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    match cli.command {
        Command::Build(a) => {
            let mode = ctx.mode(a.mode)?;
            let document_k = ctx.pick(a.document_k, "document_k", 0)?;
            let bm25 = ctx.bm25(a.bm25)?;
            let records = parse_records(&source(&a.corpus), &read(&a.corpus)?, mode)?;
            let (vocab, docs) = corpus_inputs(&records, bm25)?;
            let index = build_index(vocab, docs, Some(document_k))?;
            save_index(&index, &a.output)
                .with_context(|| format!("writing {}", a.output.display()))?;
            let s = index_stats(&index);
            println!("documents\t{}", s.doc_count);
            println!("vocabulary\t{}", s.vocab_size);
            println!("postings\t{}", s.total_postings);
            println!("mean_postings_per_term\t{}", s.mean_postings_per_term);
            println!("mean_term_count\t{}", s.mean_term_count);
            println!("max_term_count\t{}", s.max_term_count);
            let hist: Vec<String> = s.p_d_histogram.iter().map(u64::to_string).collect();
            println!("p_d_histogram\t{}", hist.join(","));
            Ok(())
        }
        Command::Search(a) => {
            let mode = ctx.mode(a.mode)?;
            let params = search_params(
                ctx.pick(a.top_n, "top_n", 10)?,
                ctx.pick(a.query_k, "query_k", 0)?,
                ctx.pick(a.threshold, "threshold", 0.0)?,
            )?;
            let repetitions = ctx.pick(a.repetitions, "repetitions", 1)?.max(1);
            let index =
                load_index(&a.index).with_context(|| format!("loading {}", a.index.display()))?;
            let records = parse_records(&source(&a.queries), &read(&a.queries)?, mode)?;
            let prepared = prepare_queries(&index, &records)?;
            let outcomes = run_queries(&index, &prepared, &params, repetitions, ctx.workers);

            let mut out = String::new();
            let mut latencies = Vec::with_capacity(outcomes.len());
            for (q, o) in prepared.iter().zip(&outcomes) {
                match &o.outcome {
                    Ok(found) => {
                        format_result_lines(&o.id, &found.results, &mut out);
                        latencies.push(o.latency_secs);
                    }
                    Err(RetrievalError::EmptyQuery) => {
                        eprintln!(
                            "warning: query {}: no terms left after vocabulary mapping; no results",
                            o.id
                        )
                    }
                    Err(e) => eprintln!("warning: query {}: {e}", o.id),
                }
                if !q.dropped.is_empty() && o.outcome.is_ok() {
                    eprintln!(
                        "note: query {}: ignored {} unknown terms",
                        q.id,
                        q.dropped.len()
                    );
                }
            }
            match &a.output {
                Some(path) => write(path, &out)?,
                None => std::io::stdout().write_all(out.as_bytes())?,
            }
            if let Ok(s) = latency_stats(&latencies) {
                eprintln!(
                    "latency s/query over {} queries: mean {:.6} p50 {:.6} p95 {:.6} max {:.6}",
                    s.count, s.mean, s.p50, s.p95, s.max
                );
            }
            Ok(())
        }
        Command::Eval(a) => {
            let k = ctx.pick(a.k, "k", 10)?;
            if k == 0 {
                return Err(usage("--k must be at least 1"));
            }
            let aggregation = ctx.aggregation(a.sss_aggregation)?;
            let run = parse_results(&source(&a.results), &read(&a.results)?)?;
            let judgments = parse_judgments(&source(&a.judgments), &read(&a.judgments)?)?;
            let store = match &a.embeddings {
                Some(p) => Some(parse_embeddings(&source(p), &read(p)?)?),
                None => None,
            };
            let unjudged = unjudged_queries(&run, &judgments);
            if !unjudged.is_empty() {
                eprintln!(
                    "note: {} queries in the results have no judgments and are ignored",
                    unjudged.len()
                );
            }
            let report = evaluate(&run, &judgments, store.as_ref(), k, aggregation)?;
            print!("{}", report.to_key_value());
            if let Some(path) = &a.csv {
                write(path, &report.to_csv())?;
            }
            Ok(())
        }
        Command::Sweep(a) => {
            let mode = ctx.mode(a.mode)?;
            let bm25 = ctx.bm25(a.bm25)?;
            let spec = SweepSpec {
                document_k: ctx.pick(a.document_k, "document_k", vec![0])?,
                query_k: ctx.pick(a.query_k, "query_k", vec![0])?,
                thresholds: ctx.pick(a.thresholds, "thresholds", DEFAULT_THRESHOLDS.to_vec())?,
                top_n: ctx.pick(a.top_n, "top_n", 10)?,
                repetitions: ctx.pick(a.repetitions, "repetitions", 1)?,
                metric_k: ctx.pick(a.k, "k", 10)?,
                sss_aggregation: ctx.aggregation(a.sss_aggregation)?,
            };
            spec.validate().map_err(|e| usage(e.to_string()))?;
            let corpus = parse_records(&source(&a.corpus), &read(&a.corpus)?, mode)?;
            let queries = parse_records(&source(&a.queries), &read(&a.queries)?, mode)?;
            let judgments = parse_judgments(&source(&a.judgments), &read(&a.judgments)?)?;
            let store = match &a.embeddings {
                Some(p) => Some(parse_embeddings(&source(p), &read(p)?)?),
                None => None,
            };
            let (vocab, docs) = corpus_inputs(&corpus, bm25)?;
            let inputs = SweepInputs {
                vocab: &vocab,
                docs: &docs,
                queries: &queries,
                judgments: &judgments,
                embeddings: store.as_ref(),
            };
            let temp;
            let dir = match &a.index_dir {
                Some(d) => {
                    fs::create_dir_all(d).map_err(|e| HarnessError::io(d, e))?;
                    d.as_path()
                }
                None => {
                    temp = tempfile::tempdir().context("creating a temporary index directory")?;
                    temp.path()
                }
            };
            let rows = run_sweep(&inputs, &spec, ctx.workers, Materialize::Directory(dir))?;
            write(&a.output, &rows_to_csv(&rows)?)?;
            eprintln!("wrote {} rows to {}", rows.len(), a.output.display());
            Ok(())
        }
        Command::Flops(a) => {
            let mode = ctx.mode(a.mode)?;
            let query_k = ctx.pick(a.query_k, "query_k", 0)?;
            let index =
                load_index(&a.index).with_context(|| format!("loading {}", a.index.display()))?;
            let records = parse_records(&source(&a.queries), &read(&a.queries)?, mode)?;
            let vectors: Vec<_> = prepare_queries(&index, &records)?
                .iter()
                .map(|q| select_query_terms(&q.vector, query_k))
                .collect();
            let flops = flops_estimate(&index, &vectors)?;
            println!("flops\t{flops}");
            println!("queries\t{}", vectors.len());
            println!("documents\t{}", index.doc_count());
            Ok(())
        }
        Command::LossesSelftest(a) => {
            let d = SelftestConfig::default();
            let config = SelftestConfig {
                seed: ctx.seed,
                batch: ctx.pick(a.batch, "batch", d.batch)?,
                vocab: ctx.pick(a.vocab, "vocab", d.vocab)?,
                trials: ctx.pick(a.trials, "trials", d.trials)?,
                ..d
            };
            if config.batch == 0 || config.vocab == 0 {
                return Err(usage("--batch and --vocab must be at least 1"));
            }
            let report = selftest::run(&config)?;
            print!("{}", report.render(&config));
            if !report.passed() {
                return Err(InvariantError("loss self-test failed".into()).into());
            }
            Ok(())
        }
        Command::GenSynthetic(a) => {
            let d = SyntheticParams::default();
            let params = SyntheticParams {
                doc_count: ctx.pick(a.docs, "docs", d.doc_count)?,
                vocab_size: ctx.pick(a.vocab, "vocab", d.vocab_size)?,
                query_count: ctx.pick(a.queries, "queries", d.query_count)?,
                topics: ctx.pick(a.topics, "topics", d.topics)?,
                ..d
            };
            params.validate().map_err(|e| usage(e.to_string()))?;
            let files = render(&generate(ctx.seed, &params)?);
            fs::create_dir_all(&a.output_dir).map_err(|e| HarnessError::io(&a.output_dir, e))?;
            for (name, text) in [
                ("corpus.tsv", &files.corpus),
                ("queries.tsv", &files.queries),
                ("judgments.tsv", &files.judgments),
                ("embeddings.tsv", &files.embeddings),
            ] {
                write(&a.output_dir.join(name), text)?;
            }
            eprintln!(
                "wrote corpus.tsv, queries.tsv, judgments.tsv, embeddings.tsv to {}",
                a.output_dir.display()
            );
            Ok(())
        }
    }
}
