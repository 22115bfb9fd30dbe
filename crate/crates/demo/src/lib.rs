//! Browser bindings. Every call returns a JSON string so the page needs no glue
//! beyond `JSON.parse`; errors come back as plain strings.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use spix::harness::formats::{prepare_queries, PreparedQuery};
use spix::harness::sweep::{sweep_index, SweepInputs, SweepSpec};
use spix::harness::synthetic::{generate, SyntheticData, SyntheticParams};
use spix::losses::{flops_loss, flops_loss_grad, in_batch_loss, in_batch_loss_grad};
use spix::{build_index, search, ImpactIndex, SearchParams};

const MAX_DOCS: usize = 20_000;
const MAX_STEPS: usize = 2_000;

fn json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// A seeded synthetic collection with one cached index per `document_k`.
#[wasm_bindgen]
pub struct Demo {
    data: SyntheticData,
    indexes: Vec<(usize, ImpactIndex, Vec<PreparedQuery>)>,
}

#[derive(Serialize)]
struct QueryTerm {
    term: String,
    weight: f64,
}

#[derive(Serialize)]
struct Hit {
    rank: usize,
    doc: String,
    score: f64,
    matched: u32,
    relevant: bool,
}

#[derive(Serialize)]
struct SearchView {
    query: String,
    terms: Vec<QueryTerm>,
    required_matches: usize,
    candidates_pre_filter: usize,
    candidates_post_filter: usize,
    relevant: Vec<String>,
    hits: Vec<Hit>,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, docs: usize) -> Result<Demo, String> {
        if !(50..=MAX_DOCS).contains(&docs) {
            return Err(format!("documents must be between 50 and {MAX_DOCS}"));
        }
        let params = SyntheticParams {
            doc_count: docs,
            vocab_size: (docs * 4).max(1000),
            query_count: (docs / 10).clamp(20, 200),
            topics: (docs / 50).clamp(5, 60),
            ..Default::default()
        };
        let data = generate(u64::from(seed), &params).map_err(|e| e.to_string())?;
        Ok(Demo {
            data,
            indexes: Vec::new(),
        })
    }

    #[wasm_bindgen(js_name = queryCount)]
    pub fn query_count(&self) -> usize {
        self.data.queries.len()
    }

    fn index(&mut self, document_k: usize) -> Result<usize, String> {
        if let Some(pos) = self.indexes.iter().position(|(k, _, _)| *k == document_k) {
            return Ok(pos);
        }
        let index = build_index(
            self.data.vocab.clone(),
            self.data.docs.iter().cloned(),
            Some(document_k),
        )
        .map_err(|e| e.to_string())?;
        let prepared = prepare_queries(&index, &self.data.queries).map_err(|e| e.to_string())?;
        self.indexes.push((document_k, index, prepared));
        Ok(self.indexes.len() - 1)
    }

    /// Rows for every default threshold at one (`document_k`, `query_k`) cell.
    pub fn sweep(
        &mut self,
        document_k: usize,
        query_k: usize,
        repetitions: usize,
    ) -> Result<String, String> {
        let pos = self.index(document_k)?;
        let spec = SweepSpec {
            document_k: vec![document_k],
            query_k: vec![query_k],
            repetitions: repetitions.clamp(1, 20),
            ..Default::default()
        };
        let inputs = SweepInputs {
            vocab: &self.data.vocab,
            docs: &self.data.docs,
            queries: &self.data.queries,
            judgments: &self.data.judgments,
            embeddings: Some(&self.data.embeddings),
        };
        let rows = sweep_index(&self.indexes[pos].1, document_k, &inputs, &spec, 1)
            .map_err(|e| e.to_string())?;
        json(&rows)
    }

    /// One query's plan, candidate counts and ranked hits.
    pub fn search(
        &mut self,
        query: usize,
        document_k: usize,
        query_k: usize,
        threshold: f64,
        top_n: usize,
    ) -> Result<String, String> {
        let params = SearchParams::new(top_n, query_k, threshold).map_err(|e| e.to_string())?;
        let pos = self.index(document_k)?;
        let (_, index, prepared) = &self.indexes[pos];
        let q = prepared
            .get(query)
            .ok_or_else(|| format!("query {query} out of range (0..{})", prepared.len()))?;
        let outcome = search(index, &q.vector, &params).map_err(|e| e.to_string())?;
        let relevant = self.data.judgments.get(&q.id).unwrap_or_default().to_vec();
        let selected = spix::retrieval::select_query_terms(&q.vector, query_k);
        let view = SearchView {
            query: q.id.clone(),
            terms: selected
                .entries()
                .iter()
                .map(|&(t, w)| QueryTerm {
                    term: index.vocab().term(t).unwrap_or("?").to_owned(),
                    weight: w,
                })
                .collect(),
            required_matches: outcome.required_matches,
            candidates_pre_filter: outcome.candidates_pre_filter,
            candidates_post_filter: outcome.candidates_post_filter,
            hits: outcome
                .results
                .iter()
                .enumerate()
                .map(|(i, r)| Hit {
                    rank: i + 1,
                    doc: r.external_id.clone(),
                    score: r.score,
                    matched: r.matched_terms,
                    relevant: relevant.contains(&r.external_id),
                })
                .collect(),
            relevant,
        };
        json(&view)
    }
}

#[derive(Serialize)]
struct DescentStep {
    step: usize,
    in_batch: f64,
    flops: f64,
    nonzero_fraction: f64,
    /// Mean over terms of the squared fraction of documents using the term.
    expected_overlap: f64,
}

fn random_batch(rng: &mut ChaCha8Rng, batch: usize, vocab: usize) -> (Array2<f64>, Array2<f64>) {
    let q = Array2::from_shape_fn((batch, vocab), |_| rng.random_range(0.0..0.1));
    let noise = Array2::from_shape_fn((batch, vocab), |_| rng.random_range(0.0..0.05));
    let d = &q + &noise;
    (q, d)
}

fn active_stats(reps: &Array2<f64>) -> (usize, f64) {
    let rows = reps.nrows() as f64;
    let mut nonzero = 0;
    let mut overlap = 0.0;
    for col in reps.columns() {
        let active = col.iter().filter(|&&x| x > 0.0).count();
        nonzero += active;
        overlap += (active as f64 / rows).powi(2);
    }
    (nonzero, overlap / reps.ncols() as f64)
}

/// Projected gradient descent on in-batch loss plus `lambda` times the FLOPS
/// regularizer of both sides, clamping weights at zero after each step. Shows
/// how the regularizer trades ranking loss for sparsity.
#[wasm_bindgen(js_name = lossDescent)]
pub fn loss_descent(
    seed: u32,
    batch: usize,
    vocab: usize,
    lambda: f64,
    learning_rate: f64,
    steps: usize,
) -> Result<String, String> {
    if batch < 2 || vocab == 0 || batch * vocab > 100_000 {
        return Err("need batch >= 2, vocab >= 1 and batch * vocab <= 100000".into());
    }
    if !(lambda >= 0.0 && lambda.is_finite() && learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err("lambda must be >= 0 and the learning rate > 0".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(seed));
    let (mut q, mut d) = random_batch(&mut rng, batch, vocab);
    let err = |e: spix::losses::LossError| e.to_string();
    let mut out = Vec::with_capacity(steps.min(MAX_STEPS) + 1);
    for step in 0..=steps.min(MAX_STEPS) {
        let scores = q.dot(&d.t());
        let (nz_q, ov_q) = active_stats(&q);
        let (nz_d, ov_d) = active_stats(&d);
        out.push(DescentStep {
            step,
            in_batch: in_batch_loss(scores.view()).map_err(err)?,
            flops: flops_loss(q.view()).map_err(err)? + flops_loss(d.view()).map_err(err)?,
            nonzero_fraction: (nz_q + nz_d) as f64 / (2 * batch * vocab) as f64,
            expected_overlap: (ov_q + ov_d) / 2.0,
        });
        let g = in_batch_loss_grad(scores.view()).map_err(err)?;
        let dq = g.dot(&d) + lambda * flops_loss_grad(q.view()).map_err(err)?;
        let dd = g.t().dot(&q) + lambda * flops_loss_grad(d.view()).map_err(err)?;
        q.zip_mut_with(&dq, |x, g| *x = (*x - learning_rate * g).max(0.0));
        d.zip_mut_with(&dd, |x, g| *x = (*x - learning_rate * g).max(0.0));
    }
    json(&out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn sweep_rows_cover_default_thresholds() {
        let mut demo = Demo::new(1, 200).unwrap();
        let rows: Value = serde_json::from_str(&demo.sweep(10, 0, 1).unwrap()).unwrap();
        let rows = rows.as_array().unwrap();
        assert_eq!(rows.len(), 5);
        let post: Vec<f64> = rows
            .iter()
            .map(|r| r["candidates_post_mean"].as_f64().unwrap())
            .collect();
        assert!(post.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(demo.indexes.len(), 1);
        demo.sweep(10, 3, 1).unwrap();
        assert_eq!(demo.indexes.len(), 1);
    }

    #[test]
    fn search_view_is_consistent() {
        let mut demo = Demo::new(2, 200).unwrap();
        let v: Value = serde_json::from_str(&demo.search(0, 0, 4, 0.5, 5).unwrap()).unwrap();
        assert!(v["terms"].as_array().unwrap().len() <= 4);
        assert_eq!(v["required_matches"], 2);
        let hits = v["hits"].as_array().unwrap();
        assert!(hits.len() <= 5);
        assert!(hits.iter().all(|h| h["matched"].as_u64().unwrap() >= 2));
        assert!(demo.search(0, 0, 0, 1.5, 5).is_err());
        assert!(demo.search(10_000, 0, 0, 0.0, 5).is_err());
    }

    #[test]
    fn regularizer_sparsifies() {
        let run = |lambda| -> Vec<Value> {
            let v: Value =
                serde_json::from_str(&loss_descent(3, 8, 40, lambda, 0.5, 200).unwrap()).unwrap();
            v.as_array().unwrap().clone()
        };
        let plain = run(0.0);
        let regular = run(5.0);
        assert_eq!(plain.len(), 201);
        let last = |v: &[Value], key: &str| v.last().unwrap()[key].as_f64().unwrap();
        assert!(last(&regular, "nonzero_fraction") < last(&plain, "nonzero_fraction"));
        assert!(last(&regular, "flops") < last(&plain, "flops"));
        assert!(last(&plain, "in_batch") < plain[0]["in_batch"].as_f64().unwrap());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(Demo::new(0, 10).is_err());
        assert!(loss_descent(0, 1, 10, 0.0, 0.1, 5).is_err());
        assert!(loss_descent(0, 4, 10, -1.0, 0.1, 5).is_err());
    }
}
