//! Similarity queries over the learned word embeddings.

use std::cmp::Ordering;

use super::{tokenize, EmbedderError, Model, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub similarity: f64,
    pub word: String,
}

fn word_id<F: Real>(model: &Model<F>, word: &str) -> Result<usize, EmbedderError> {
    let tokens = tokenize(word);
    if tokens.len() != 1 {
        return Err(EmbedderError::InvalidQuery(word.to_string()));
    }
    model
        .vocab()
        .word_id(&tokens[0])
        .ok_or_else(|| EmbedderError::OutOfVocabulary(word.to_string()))
}

fn embedding<F: Real>(model: &Model<F>, id: usize) -> Vec<f64> {
    model
        .input_matrix()
        .row(id)
        .iter()
        .map(|x| x.to_f64().unwrap_or(0.0))
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    if n > 0.0 {
        v.into_iter().map(|x| x / n).collect()
    } else {
        v
    }
}

/// Cosine similarity of `query` against every vocabulary word not in
/// `exclude`, best first (ties by vocabulary order).
fn rank<F: Real>(model: &Model<F>, query: &[f64], exclude: &[usize], k: usize) -> Vec<Neighbor> {
    let qn = norm(query);
    let mut scored: Vec<(f64, usize)> = (0..model.vocab().num_words())
        .filter(|id| !exclude.contains(id))
        .map(|id| {
            let e = embedding(model, id);
            let denom = qn * norm(&e);
            let dot: f64 = e.iter().zip(query).map(|(a, b)| a * b).sum();
            (if denom > 0.0 { dot / denom } else { 0.0 }, id)
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    scored
        .into_iter()
        .take(k)
        .map(|(similarity, id)| Neighbor { similarity, word: model.vocab().words()[id].0.clone() })
        .collect()
}

/// The `k` vocabulary words closest to `word` by cosine, excluding `word`.
pub fn nearest_neighbors<F: Real>(
    model: &Model<F>,
    word: &str,
    k: usize,
) -> Result<Vec<Neighbor>, EmbedderError> {
    if k == 0 {
        return Err(EmbedderError::InvalidK);
    }
    let id = word_id(model, word)?;
    Ok(rank(model, &embedding(model, id), &[id], k))
}

/// Query vector `a/|a| - b/|b| + c/|c|`: "what is to `c` what `a` is to `b`".
pub fn analogy_query<F: Real>(
    model: &Model<F>,
    a: &str,
    b: &str,
    c: &str,
) -> Result<(Vec<f64>, [usize; 3]), EmbedderError> {
    let ids = [word_id(model, a)?, word_id(model, b)?, word_id(model, c)?];
    let [ea, eb, ec] = ids.map(|id| unit(embedding(model, id)));
    let query = ea
        .iter()
        .zip(&eb)
        .zip(&ec)
        .map(|((x, y), z)| x - y + z)
        .collect();
    Ok((query, ids))
}

/// Words ranked by cosine to the analogy query, excluding the three inputs.
pub fn analogies<F: Real>(
    model: &Model<F>,
    a: &str,
    b: &str,
    c: &str,
    k: usize,
) -> Result<Vec<Neighbor>, EmbedderError> {
    if k == 0 {
        return Err(EmbedderError::InvalidK);
    }
    let (query, ids) = analogy_query(model, a, b, c)?;
    Ok(rank(model, &query, &ids, k))
}
