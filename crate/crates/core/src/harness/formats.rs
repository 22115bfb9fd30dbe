//! Line-oriented text formats shared by the command-line tools.
//!
//! | file        | line                                                    |
//! |-------------|---------------------------------------------------------|
//! | corpus      | `doc_id TAB term:weight term:weight ...` or `doc_id TAB text` |
//! | queries     | `query_id TAB term:weight ...` or `query_id TAB text`   |
//! | results     | `query_id TAB rank TAB doc_id TAB score TAB matched`    |
//! | judgments   | `query_id TAB doc_id`                                   |
//! | embeddings  | `doc_id TAB x1 x2 ... xE`                               |
//!
//! Blank lines are skipped. Line numbers in errors are 1-based.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use crate::index::{DocInput, ImpactIndex, Vocabulary};
use crate::metrics::{EmbeddingStore, Judgments, QueryRun, RunResults};
use crate::retrieval::{
    vectorize_doc_bm25, vectorize_query_bm25, Bm25Params, CollectionStats, SearchResult,
};
use crate::sparse::SparseVector;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputMode {
    /// Explicit `term:weight` pairs.
    #[default]
    Vector,
    /// Whitespace-tokenized text, weighted with BM25.
    Text,
}

impl FromStr for InputMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vector" => Ok(InputMode::Vector),
            "text" => Ok(InputMode::Text),
            other => Err(format!("unknown mode {other:?} (expected vector or text)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecordBody {
    Pairs(Vec<(String, f64)>),
    Tokens(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    pub line: usize,
    pub body: RecordBody,
}

fn parse_error(source: &str, line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Parse {
        source_name: source.to_owned(),
        line,
        message: message.into(),
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn split_id<'a>(
    source: &str,
    line: usize,
    text: &'a str,
) -> Result<(&'a str, &'a str), HarnessError> {
    let (id, rest) = text
        .split_once('\t')
        .ok_or_else(|| parse_error(source, line, "expected a TAB after the id"))?;
    if id.is_empty() {
        return Err(parse_error(source, line, "empty id"));
    }
    Ok((id, rest))
}

fn parse_pairs(source: &str, line: usize, rest: &str) -> Result<Vec<(String, f64)>, HarnessError> {
    rest.split_whitespace()
        .map(|tok| {
            let (term, weight) = tok.rsplit_once(':').ok_or_else(|| {
                parse_error(source, line, format!("expected term:weight, got {tok:?}"))
            })?;
            if term.is_empty() {
                return Err(parse_error(source, line, format!("empty term in {tok:?}")));
            }
            let weight: f64 = weight
                .parse()
                .map_err(|_| parse_error(source, line, format!("bad weight in {tok:?}")))?;
            if !weight.is_finite() || weight < 0.0 {
                return Err(parse_error(
                    source,
                    line,
                    format!("weight must be finite and non-negative in {tok:?}"),
                ));
            }
            Ok((term.to_owned(), weight))
        })
        .collect()
}

/// Parses corpus or query records, rejecting duplicate ids.
pub fn parse_records(
    source: &str,
    text: &str,
    mode: InputMode,
) -> Result<Vec<Record>, HarnessError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, raw) in lines(text) {
        let (id, rest) = split_id(source, line, raw)?;
        if !seen.insert(id.to_owned()) {
            return Err(parse_error(source, line, format!("duplicate id {id:?}")));
        }
        let body = match mode {
            InputMode::Vector => {
                let pairs = parse_pairs(source, line, rest)?;
                let mut terms = HashSet::new();
                if let Some((t, _)) = pairs.iter().find(|(t, _)| !terms.insert(t.as_str())) {
                    return Err(parse_error(source, line, format!("term {t:?} repeated")));
                }
                RecordBody::Pairs(pairs)
            }
            InputMode::Text => {
                RecordBody::Tokens(rest.split_whitespace().map(str::to_owned).collect())
            }
        };
        out.push(Record {
            id: id.to_owned(),
            line,
            body,
        });
    }
    Ok(out)
}

/// Turns corpus records into index input, interning terms in first-seen order.
/// Text records are weighted with BM25 document impacts.
pub fn corpus_inputs(
    records: &[Record],
    bm25: Bm25Params,
) -> Result<(Vocabulary, Vec<DocInput>), HarnessError> {
    let mut vocab = Vocabulary::new();
    let stats = CollectionStats::from_documents(records.iter().filter_map(|r| match &r.body {
        RecordBody::Tokens(t) => Some(t.iter().map(String::as_str)),
        RecordBody::Pairs(_) => None,
    }));
    let mut docs = Vec::with_capacity(records.len());
    for r in records {
        let doc = match &r.body {
            RecordBody::Pairs(pairs) => {
                let ids: Vec<_> = pairs.iter().map(|(t, w)| (vocab.intern(t), *w)).collect();
                let vector = SparseVector::from_pairs(ids)
                    .map_err(|e| parse_error("corpus", r.line, e.to_string()))?;
                DocInput::new(r.id.clone(), vector, pairs.len() as u32)
            }
            RecordBody::Tokens(tokens) => {
                let toks: Vec<&str> = tokens.iter().map(String::as_str).collect();
                let vector = vectorize_doc_bm25(&toks, &stats, bm25, &mut vocab);
                DocInput::new(r.id.clone(), vector, tokens.len() as u32)
            }
        };
        docs.push(doc);
    }
    Ok((vocab, docs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedQuery {
    pub id: String,
    pub vector: SparseVector,
    /// Terms not found in the index vocabulary.
    pub dropped: Vec<String>,
}

/// Maps query records onto an index: pairs through its vocabulary, text through
/// BM25 idf weights derived from the index. Output is ordered by query id.
pub fn prepare_queries(
    index: &ImpactIndex,
    records: &[Record],
) -> Result<Vec<PreparedQuery>, HarnessError> {
    let stats = records
        .iter()
        .any(|r| matches!(r.body, RecordBody::Tokens(_)))
        .then(|| CollectionStats::from_index(index));
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let q = match &r.body {
            RecordBody::Pairs(pairs) => {
                let mut dropped = Vec::new();
                let mut ids = Vec::with_capacity(pairs.len());
                for (t, w) in pairs {
                    match index.vocab().get(t) {
                        Some(id) => ids.push((id, *w)),
                        None => dropped.push(t.clone()),
                    }
                }
                let vector = SparseVector::from_pairs(ids)
                    .map_err(|e| parse_error("queries", r.line, e.to_string()))?;
                PreparedQuery {
                    id: r.id.clone(),
                    vector,
                    dropped,
                }
            }
            RecordBody::Tokens(tokens) => {
                let toks: Vec<&str> = tokens.iter().map(String::as_str).collect();
                let stats = stats.as_ref().expect("computed when text records exist");
                let (vector, dropped) = vectorize_query_bm25(&toks, stats, index.vocab());
                PreparedQuery {
                    id: r.id.clone(),
                    vector,
                    dropped: dropped.into_iter().map(str::to_owned).collect(),
                }
            }
        };
        out.push(q);
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

pub fn format_result_lines(query_id: &str, results: &[SearchResult], out: &mut String) {
    for (rank, r) in results.iter().enumerate() {
        let _ = writeln!(
            out,
            "{query_id}\t{}\t{}\t{}\t{}",
            rank + 1,
            r.external_id,
            r.score,
            r.matched_terms
        );
    }
}

pub fn parse_results(source: &str, text: &str) -> Result<RunResults, HarnessError> {
    let mut grouped: BTreeMap<String, Vec<(usize, String, f64, usize)>> = BTreeMap::new();
    for (line, raw) in lines(text) {
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 5 {
            return Err(parse_error(
                source,
                line,
                format!("expected 5 fields, got {}", fields.len()),
            ));
        }
        let rank: usize = fields[1]
            .parse()
            .ok()
            .filter(|&r| r >= 1)
            .ok_or_else(|| parse_error(source, line, "rank must be a positive integer"))?;
        let score: f64 = fields[3]
            .parse()
            .map_err(|_| parse_error(source, line, "bad score"))?;
        fields[4]
            .parse::<u32>()
            .map_err(|_| parse_error(source, line, "bad matched-term count"))?;
        grouped.entry(fields[0].to_owned()).or_default().push((
            rank,
            fields[2].to_owned(),
            score,
            line,
        ));
    }
    let mut run = RunResults::new();
    for (qid, mut hits) in grouped {
        hits.sort_by_key(|h| (h.0, h.3));
        if let Some(w) = hits.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(parse_error(
                source,
                w[1].3,
                format!("query {qid:?} repeats rank {}", w[1].0),
            ));
        }
        run.insert(
            qid,
            QueryRun {
                hits: hits.into_iter().map(|(_, d, s, _)| (d, s)).collect(),
                ..Default::default()
            },
        );
    }
    Ok(run)
}

pub fn parse_judgments(source: &str, text: &str) -> Result<Judgments, HarnessError> {
    let mut judgments = Judgments::new();
    for (line, raw) in lines(text) {
        let (qid, doc) = split_id(source, line, raw)?;
        let doc = doc.trim();
        if doc.is_empty() || doc.contains('\t') {
            return Err(parse_error(source, line, "expected query_id TAB doc_id"));
        }
        judgments.add(qid, doc);
    }
    Ok(judgments)
}

pub fn parse_embeddings(source: &str, text: &str) -> Result<EmbeddingStore, HarnessError> {
    let mut store: Option<EmbeddingStore> = None;
    for (line, raw) in lines(text) {
        let (id, rest) = split_id(source, line, raw)?;
        let v = rest
            .split_whitespace()
            .map(|x| x.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| parse_error(source, line, "bad embedding component"))?;
        let store = store.get_or_insert_with(|| EmbeddingStore::new(v.len()));
        if store.get(id).is_some() {
            return Err(parse_error(source, line, format!("duplicate id {id:?}")));
        }
        store
            .insert(id, v)
            .map_err(|e| parse_error(source, line, e.to_string()))?;
    }
    Ok(store.unwrap_or_default())
}

pub fn format_vector_line(
    id: &str,
    pairs: impl IntoIterator<Item = (String, f64)>,
    out: &mut String,
) {
    out.push_str(id);
    out.push('\t');
    let mut first = true;
    for (t, w) in pairs {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{t}:{w}");
    }
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_vector_records() {
        let recs = parse_records("c", "A\tx:2 y:1\n\nB\ty:3\n", InputMode::Vector).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].line, 3);
        assert_eq!(
            recs[0].body,
            RecordBody::Pairs(vec![("x".into(), 2.0), ("y".into(), 1.0)])
        );
        let (vocab, docs) = corpus_inputs(&recs, Bm25Params::default()).unwrap();
        assert_eq!(vocab.terms(), &["x".to_string(), "y".to_string()]);
        assert_eq!(docs[1].raw_length, 1);
    }

    #[test]
    fn errors_name_the_line() {
        let text = "A\tx:1\nB\tx:1\nC\tx:1\nD\tx:1\nE\tx:1\nF\tx:1\nG\tx=1\n";
        match parse_records("corpus.tsv", text, InputMode::Vector) {
            Err(HarnessError::Parse {
                line, source_name, ..
            }) => {
                assert_eq!(line, 7);
                assert_eq!(source_name, "corpus.tsv");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_records("c", "A x:1\n", InputMode::Vector).is_err());
        assert!(parse_records("c", "A\tx:-1\n", InputMode::Vector).is_err());
        assert!(parse_records("c", "A\tx:nan\n", InputMode::Vector).is_err());
        assert!(parse_records("c", "A\tx:1 x:2\n", InputMode::Vector).is_err());
        assert!(parse_records("c", "A\tx:1\nA\ty:1\n", InputMode::Vector).is_err());
    }

    #[test]
    fn terms_may_contain_colons() {
        let recs = parse_records("c", "A\turl:http://x:0.5\n", InputMode::Vector).unwrap();
        assert_eq!(
            recs[0].body,
            RecordBody::Pairs(vec![("url:http://x".into(), 0.5)])
        );
    }

    #[test]
    fn results_round_trip() {
        let results = vec![
            SearchResult {
                doc: 0,
                external_id: "A".into(),
                score: 3.0,
                matched_terms: 2,
            },
            SearchResult {
                doc: 1,
                external_id: "B".into(),
                score: 0.1,
                matched_terms: 1,
            },
        ];
        let mut text = String::new();
        format_result_lines("q1", &results, &mut text);
        assert_eq!(text, "q1\t1\tA\t3\t2\nq1\t2\tB\t0.1\t1\n");
        let run = parse_results("r", &text).unwrap();
        assert_eq!(
            run.hits("q1"),
            &[("A".to_string(), 3.0), ("B".to_string(), 0.1)]
        );
    }

    #[test]
    fn judgments_and_embeddings() {
        let j = parse_judgments("j", "q1\tA\nq1\tB\nq1\tA\nq2\tC\n").unwrap();
        assert_eq!(j.get("q1").unwrap(), &["A".to_string(), "B".to_string()]);
        assert_eq!(j.len(), 2);
        let e = parse_embeddings("e", "A\t1 0\nB\t0 1\n").unwrap();
        assert_eq!(e.dim(), 2);
        assert_eq!(e.get("B"), Some(&[0.0, 1.0][..]));
        assert!(parse_embeddings("e", "A\t1 0\nB\t0 1 1\n").is_err());
        assert!(parse_embeddings("e", "A\t0 0\n").is_err());
    }
}
