use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::Adam;
use super::model::{Dims, LstmModel, Network, ParamGrads};
use super::vocab::{build_vocab, Vocab};
use crate::corpus::{Corpus, Label, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Epochs without a strict improvement in validation accuracy before
    /// training stops.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            embed_dim: 100,
            hidden_dim: 50,
            max_epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: 5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub valid_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Checkpoint with the best validation accuracy.
    pub model: LstmModel,
    pub metrics: Vec<EpochMetrics>,
    /// 1-based epoch of the kept checkpoint; 0 when no epoch ran.
    pub best_epoch: usize,
}

/// An encoded document with its gold class index.
pub type Example = (Vec<u32>, usize);

pub fn encode_split(corpus: &Corpus, vocab: &Vocab, split: Split) -> Vec<Example> {
    corpus
        .split(split)
        .map(|d| (vocab.encode(d), d.label.index()))
        .collect()
}

struct DocGrads {
    loss: f64,
    correct: bool,
    params: ParamGrads,
    /// Per-position input gradients, scattered into embedding rows later.
    inputs: Array2<f64>,
}

fn doc_gradients(net: &Network<'_>, seq: &[u32], label: usize) -> Result<DocGrads> {
    let trace = net.forward(seq)?;
    let p = trace.probabilities[label];
    let mut dlogits = trace.probabilities.clone();
    dlogits[label] -= 1.0;
    let mut params = ParamGrads::zeros(net.dims());
    let inputs = net.backward(&trace, dlogits.view(), Some(&mut params));
    Ok(DocGrads {
        loss: -p.max(f64::MIN_POSITIVE).ln(),
        correct: trace.predicted_class() == label,
        params,
        inputs,
    })
}

/// Fraction of examples whose predicted class equals the label.
pub fn accuracy(model: &LstmModel, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let net = model.compile();
    let hits = examples
        .par_iter()
        .map(|(seq, label)| Ok(usize::from(net.forward(seq)?.predicted_class() == *label)))
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / examples.len() as f64)
}

/// Mini-batch Adam on mean cross-entropy with early stopping on validation
/// accuracy. Gradients of a batch are computed in parallel and summed in
/// document order, so results do not depend on the thread count.
pub fn train(
    mut model: LstmModel,
    train_set: &[Example],
    valid_set: &[Example],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::EmptyTrainingSplit);
    }
    let dims = model.dims;
    let mut adam = Adam::new(
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.epsilon,
    );
    let mut best = model.clone();
    let mut best_accuracy = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut metrics = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let batch_size = config.batch_size.max(1);

    for epoch in 1..=config.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (batch_no, batch) in order.chunks(batch_size).enumerate() {
            let net = model.compile();
            let per_doc = batch
                .par_iter()
                .map(|&i| doc_gradients(&net, &train_set[i].0, train_set[i].1))
                .collect::<Result<Vec<_>>>()?;
            drop(net);

            let mut grads = ParamGrads::zeros(dims);
            let mut embed_grad = Array2::<f64>::zeros((dims.vocab, dims.embed));
            let mut batch_loss = 0.0;
            for (&i, g) in batch.iter().zip(&per_doc) {
                batch_loss += g.loss;
                correct += usize::from(g.correct);
                grads.add_assign(&g.params);
                for (row, &id) in g.inputs.rows().into_iter().zip(&train_set[i].0) {
                    let mut target = embed_grad.row_mut(id as usize);
                    target += &row;
                }
            }
            loss_sum += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            let grad_arrays: [&mut [f64]; 6] = [
                embed_grad.as_slice_mut().expect("standard layout"),
                grads.w_input.as_slice_mut().expect("standard layout"),
                grads.w_recurrent.as_slice_mut().expect("standard layout"),
                grads.bias.as_slice_mut().expect("standard layout"),
                grads.w_out.as_slice_mut().expect("standard layout"),
                grads.b_out.as_slice_mut().expect("standard layout"),
            ];
            let mut finite = batch_loss.is_finite();
            for g in grad_arrays {
                for v in g.iter_mut() {
                    *v *= scale;
                    finite &= v.is_finite();
                }
            }
            if !finite {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                    param_norm: model.parameter_norm(),
                });
            }
            let grad_refs: [&[f64]; 6] = [
                embed_grad.as_slice().expect("standard layout"),
                grads.w_input.as_slice().expect("standard layout"),
                grads.w_recurrent.as_slice().expect("standard layout"),
                grads.bias.as_slice().expect("standard layout"),
                grads.w_out.as_slice().expect("standard layout"),
                grads.b_out.as_slice().expect("standard layout"),
            ];
            adam.update(&mut model.parameters_mut(), &grad_refs);
        }

        let valid_accuracy = if valid_set.is_empty() {
            correct as f64 / train_set.len() as f64
        } else {
            accuracy(&model, valid_set)?
        };
        metrics.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            valid_accuracy,
        });
        if valid_accuracy > best_accuracy {
            best_accuracy = valid_accuracy;
            best = model.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        model: best,
        metrics,
        best_epoch,
    })
}

/// Builds the vocabulary from the training split, initializes a model with
/// `config.seed` and trains it.
pub fn train_classifier(corpus: &Corpus, config: &TrainConfig) -> Result<(Vocab, TrainOutcome)> {
    let vocab = build_vocab(corpus)?;
    let dims = Dims {
        vocab: vocab.len(),
        embed: config.embed_dim,
        hidden: config.hidden_dim,
        classes: Label::ALL.len(),
    };
    let model = LstmModel::new(dims, config.seed);
    let train_set = encode_split(corpus, &vocab, Split::Train);
    let valid_set = encode_split(corpus, &vocab, Split::Valid);
    let outcome = train(model, &train_set, &valid_set, config)?;
    Ok((vocab, outcome))
}

/// Class probabilities for one encoded document.
pub fn predict_proba(model: &LstmModel, seq: &[u32]) -> Result<Array1<f64>> {
    Ok(model.forward(seq)?.probabilities)
}
