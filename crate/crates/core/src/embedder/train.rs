use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    featurize, tokenize, EmbedderError, Loss, Matrix, Model, ModelParams, Real, TrainingExample,
    Vocabulary,
};

/// Which labels a document is trained against.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    /// Softmax: cross-entropy against one gold label index.
    Single(usize),
    /// One-vs-all: binary cross-entropy of every label against membership.
    All(&'a [usize]),
}

/// Read/update access to a flat weight buffer.
trait Weights<F> {
    fn get(&self, i: usize) -> F;
    fn add(&mut self, i: usize, delta: F);
}

impl<F: Real> Weights<F> for &mut [F] {
    #[inline]
    fn get(&self, i: usize) -> F {
        self[i]
    }

    #[inline]
    fn add(&mut self, i: usize, delta: F) {
        self[i] = self[i] + delta;
    }
}

/// Shared buffer for lock-free multi-worker training. Concurrent updates to
/// the same cell may be lost.
struct SharedWeights<'a>(&'a [AtomicU32]);

impl Weights<f32> for SharedWeights<'_> {
    #[inline]
    fn get(&self, i: usize) -> f32 {
        f32::from_bits(self.0[i].load(Ordering::Relaxed))
    }

    #[inline]
    fn add(&mut self, i: usize, delta: f32) {
        let v = self.get(i) + delta;
        self.0[i].store(v.to_bits(), Ordering::Relaxed);
    }
}

struct Scratch<F> {
    hidden: Vec<F>,
    grad_hidden: Vec<F>,
    scores: Vec<F>,
    /// dL/d(score) per label
    score_grad: Vec<F>,
}

impl<F: Real> Scratch<F> {
    fn new(dim: usize, labels: usize) -> Self {
        Scratch {
            hidden: vec![F::zero(); dim],
            grad_hidden: vec![F::zero(); dim],
            scores: vec![F::zero(); labels],
            score_grad: vec![F::zero(); labels],
        }
    }
}

fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// log(1 + exp(x)) without overflow.
fn softplus<F: Real>(x: F) -> F {
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

/// Forward and backward pass of one non-empty document. Leaves the hidden
/// vector, dL/ds and dL/dh in `s` and returns the loss.
fn forward_backward<F: Real>(
    input: &impl Weights<F>,
    output: &impl Weights<F>,
    dim: usize,
    features: &[usize],
    target: Target<'_>,
    loss: Loss,
    s: &mut Scratch<F>,
) -> F {
    let n = F::from_usize(features.len()).expect("count fits");
    s.hidden.iter_mut().for_each(|x| *x = F::zero());
    for &f in features {
        let base = f * dim;
        for (j, h) in s.hidden.iter_mut().enumerate() {
            *h = *h + input.get(base + j);
        }
    }
    s.hidden.iter_mut().for_each(|x| *x = *x / n);

    for (i, score) in s.scores.iter_mut().enumerate() {
        let base = i * dim;
        *score = s
            .hidden
            .iter()
            .enumerate()
            .fold(F::zero(), |acc, (j, &h)| acc + output.get(base + j) * h);
    }

    let value = match (loss, target) {
        (Loss::Softmax, target) => {
            let gold = match target {
                Target::Single(i) => i,
                Target::All(labels) => labels[0],
            };
            let max = s.scores.iter().copied().fold(F::neg_infinity(), F::max);
            let mut z = F::zero();
            for (g, &sc) in s.score_grad.iter_mut().zip(&s.scores) {
                *g = (sc - max).exp();
                z = z + *g;
            }
            for g in s.score_grad.iter_mut() {
                *g = *g / z;
            }
            s.score_grad[gold] = s.score_grad[gold] - F::one();
            z.ln() + max - s.scores[gold]
        }
        (Loss::Ova, target) => {
            let gold: &[usize] = match target {
                Target::All(labels) => labels,
                Target::Single(ref i) => std::slice::from_ref(i),
            };
            let mut total = F::zero();
            for (i, (g, &sc)) in s.score_grad.iter_mut().zip(&s.scores).enumerate() {
                let y = if gold.contains(&i) { F::one() } else { F::zero() };
                *g = sigmoid(sc) - y;
                total = total + softplus(sc) - y * sc;
            }
            total
        }
    };

    s.grad_hidden.iter_mut().for_each(|x| *x = F::zero());
    for (i, &g) in s.score_grad.iter().enumerate() {
        if g == F::zero() {
            continue;
        }
        let base = i * dim;
        for (j, gh) in s.grad_hidden.iter_mut().enumerate() {
            *gh = *gh + g * output.get(base + j);
        }
    }
    value
}

/// Plain SGD step from the gradients left in `s` by `forward_backward`.
fn apply_update<F: Real>(
    input: &mut impl Weights<F>,
    output: &mut impl Weights<F>,
    dim: usize,
    features: &[usize],
    lr: F,
    s: &Scratch<F>,
) {
    for (i, &g) in s.score_grad.iter().enumerate() {
        if g == F::zero() {
            continue;
        }
        let step = -lr * g;
        let base = i * dim;
        for (j, &h) in s.hidden.iter().enumerate() {
            output.add(base + j, step * h);
        }
    }
    let scale = -lr / F::from_usize(features.len()).expect("count fits");
    for &f in features {
        let base = f * dim;
        for (j, &gh) in s.grad_hidden.iter().enumerate() {
            input.add(base + j, scale * gh);
        }
    }
}

/// Loss of one document and its exact gradients with respect to both
/// matrices. Input-matrix gradients are listed per distinct row, ascending.
#[derive(Debug, Clone)]
pub struct DocumentGradients<F: Real> {
    pub loss: F,
    pub input: Vec<(usize, Vec<F>)>,
    pub output: Matrix<F>,
}

pub fn document_gradients<F: Real>(
    model: &Model<F>,
    features: &[usize],
    target: Target<'_>,
) -> Option<DocumentGradients<F>> {
    if features.is_empty() {
        return None;
    }
    let dim = model.params.dim;
    let labels = model.labels().len();
    let mut s = Scratch::new(dim, labels);
    let mut input = model.input.as_slice().to_vec();
    let mut output = model.output.as_slice().to_vec();
    let loss = forward_backward(
        &input.as_mut_slice(),
        &output.as_mut_slice(),
        dim,
        features,
        target,
        model.params.loss,
        &mut s,
    );

    let mut out_grad = Matrix::zeros(labels, dim);
    for i in 0..labels {
        for (j, &h) in s.hidden.iter().enumerate() {
            out_grad.row_mut(i)[j] = s.score_grad[i] * h;
        }
    }
    let n = F::from_usize(features.len()).expect("count fits");
    let mut rows: Vec<usize> = features.to_vec();
    rows.sort_unstable();
    rows.dedup();
    let input_grad = rows
        .into_iter()
        .map(|r| {
            let occurrences = F::from_usize(features.iter().filter(|&&f| f == r).count())
                .expect("count fits");
            let g = s.grad_hidden.iter().map(|&gh| gh * occurrences / n).collect();
            (r, g)
        })
        .collect();
    Some(DocumentGradients { loss, input: input_grad, output: out_grad })
}

/// Mean training loss per epoch, over documents that had features.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingReport {
    pub epoch_losses: Vec<f64>,
    /// Documents without a single usable feature, skipped on every visit.
    pub skipped_documents: usize,
}

struct Prepared {
    vocab: Vocabulary,
    features: Vec<Vec<usize>>,
    labels: Vec<Vec<usize>>,
}

fn prepare(examples: &[TrainingExample], params: &ModelParams) -> Result<Prepared, EmbedderError> {
    params.validate()?;
    if examples.is_empty() {
        return Err(EmbedderError::EmptyDataset);
    }
    if let Some(i) = examples.iter().position(|e| e.labels.is_empty()) {
        return Err(EmbedderError::UnlabeledDocument(i));
    }
    let tokens: Vec<Vec<String>> = examples.iter().map(|e| tokenize(&e.text)).collect();
    let vocab = Vocabulary::build(
        tokens.iter().map(Vec::as_slice).zip(examples.iter().map(|e| e.labels.as_slice())),
        params.min_count,
    );
    let features = tokens.iter().map(|t| featurize(t, &vocab, params)).collect();
    let labels = examples
        .iter()
        .map(|e| {
            let mut ids: Vec<usize> =
                e.labels.iter().filter_map(|l| vocab.label_id(l)).collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect();
    Ok(Prepared { vocab, features, labels })
}

fn initial_input<F: Real>(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Matrix<F> {
    let bound = 1.0 / dim as f64;
    let dist = Uniform::new_inclusive(-bound, bound);
    let data = (0..rows * dim)
        .map(|_| F::from_f64(dist.sample(rng)).expect("finite"))
        .collect();
    Matrix::from_vec(rows, dim, data).expect("shape")
}

fn learning_rate(params: &ModelParams, visits: usize, total: usize) -> f64 {
    params.learning_rate * (1.0 - visits as f64 / total as f64)
}

fn pick_target<'a>(labels: &'a [usize], loss: Loss, rng: &mut ChaCha8Rng) -> Target<'a> {
    match loss {
        Loss::Ova => Target::All(labels),
        Loss::Softmax if labels.len() == 1 => Target::Single(labels[0]),
        Loss::Softmax => Target::Single(labels[rng.gen_range(0..labels.len())]),
    }
}

pub fn train<F: Real>(
    examples: &[TrainingExample],
    params: &ModelParams,
) -> Result<Model<F>, EmbedderError> {
    train_with_report(examples, params).map(|(m, _)| m)
}

/// Deterministic single-worker training.
pub fn train_with_report<F: Real>(
    examples: &[TrainingExample],
    params: &ModelParams,
) -> Result<(Model<F>, TrainingReport), EmbedderError> {
    let prep = prepare(examples, params)?;
    let dim = params.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut input = initial_input::<F>(prep.vocab.num_words() + params.buckets, dim, &mut rng);
    let mut output = Matrix::<F>::zeros(prep.vocab.labels().len(), dim);
    let mut scratch = Scratch::new(dim, output.rows());

    let total = params.epoch * examples.len();
    let mut visits = 0usize;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut report = TrainingReport {
        skipped_documents: prep.features.iter().filter(|f| f.is_empty()).count(),
        ..Default::default()
    };
    for _ in 0..params.epoch {
        order.shuffle(&mut rng);
        let (mut sum, mut count) = (0.0f64, 0usize);
        for &doc in &order {
            let lr = F::from_f64(learning_rate(params, visits, total)).expect("finite");
            visits += 1;
            let features = &prep.features[doc];
            if features.is_empty() {
                continue;
            }
            let target = pick_target(&prep.labels[doc], params.loss, &mut rng);
            let mut in_w = input.as_mut_slice();
            let mut out_w = output.as_mut_slice();
            let loss =
                forward_backward(&in_w, &out_w, dim, features, target, params.loss, &mut scratch);
            apply_update(&mut in_w, &mut out_w, dim, features, lr, &scratch);
            sum += loss.to_f64().unwrap_or(f64::NAN);
            count += 1;
        }
        report.epoch_losses.push(if count > 0 { sum / count as f64 } else { 0.0 });
    }
    let model = Model::from_parts(params.clone(), prep.vocab, input, output)?;
    Ok((model, report))
}

/// Lock-free training with several workers sharing both matrices. Results
/// depend on thread scheduling; with one worker this is `train_with_report`.
pub fn train_hogwild(
    examples: &[TrainingExample],
    params: &ModelParams,
    workers: usize,
) -> Result<(Model<f32>, TrainingReport), EmbedderError> {
    if workers <= 1 {
        return train_with_report(examples, params);
    }
    let prep = prepare(examples, params)?;
    let dim = params.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let input = initial_input::<f32>(prep.vocab.num_words() + params.buckets, dim, &mut rng);
    let labels = prep.vocab.labels().len();
    let to_atomic = |m: Vec<f32>| -> Vec<AtomicU32> {
        m.into_iter().map(|x| AtomicU32::new(x.to_bits())).collect()
    };
    let shared_in = to_atomic(input.into_vec());
    let shared_out = to_atomic(vec![0.0; labels * dim]);
    let visits = AtomicUsize::new(0);
    let total = params.epoch * examples.len();

    let per_worker: Vec<Vec<(f64, usize)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (prep, shared_in, shared_out, visits) = (&prep, &shared_in, &shared_out, &visits);
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(w as u64 + 1));
                    let mut shard: Vec<usize> = (w..prep.features.len()).step_by(workers).collect();
                    let mut scratch = Scratch::<f32>::new(dim, labels);
                    let mut in_w = SharedWeights(shared_in);
                    let mut out_w = SharedWeights(shared_out);
                    let mut epochs = Vec::with_capacity(params.epoch);
                    for _ in 0..params.epoch {
                        shard.shuffle(&mut rng);
                        let (mut sum, mut count) = (0.0f64, 0usize);
                        for &doc in &shard {
                            let seen = visits.fetch_add(1, Ordering::Relaxed);
                            let lr = learning_rate(params, seen.min(total), total) as f32;
                            let features = &prep.features[doc];
                            if features.is_empty() {
                                continue;
                            }
                            let target = pick_target(&prep.labels[doc], params.loss, &mut rng);
                            let loss = forward_backward(
                                &in_w, &out_w, dim, features, target, params.loss, &mut scratch,
                            );
                            apply_update(&mut in_w, &mut out_w, dim, features, lr, &scratch);
                            sum += f64::from(loss);
                            count += 1;
                        }
                        epochs.push((sum, count));
                    }
                    epochs
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training worker panicked")).collect()
    });

    let epoch_losses = (0..params.epoch)
        .map(|e| {
            let (sum, count) = per_worker
                .iter()
                .fold((0.0, 0), |(s, c), w| (s + w[e].0, c + w[e].1));
            if count > 0 { sum / count as f64 } else { 0.0 }
        })
        .collect();
    let from_atomic = |v: Vec<AtomicU32>| -> Vec<f32> {
        v.into_iter().map(|a| f32::from_bits(a.into_inner())).collect()
    };
    let rows = prep.vocab.num_words() + params.buckets;
    let input = Matrix::from_vec(rows, dim, from_atomic(shared_in)).expect("shape");
    let output = Matrix::from_vec(labels, dim, from_atomic(shared_out)).expect("shape");
    let report = TrainingReport {
        epoch_losses,
        skipped_documents: prep.features.iter().filter(|f| f.is_empty()).count(),
    };
    Ok((Model::from_parts(params.clone(), prep.vocab, input, output)?, report))
}
