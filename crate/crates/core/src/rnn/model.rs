//! Single-layer unidirectional LSTM classifier with exact backpropagation
//! through time.
//!
//! Parameters are stored as `f32`. Every forward and backward pass runs on an
//! `f64` copy of the weights (see [`LstmModel::compile`]), so gradients are
//! accumulated in double precision and can be checked against finite
//! differences.
//!
//! Gate blocks are stacked in the order input, forget, output, candidate:
//!
//! ```text
//! i = σ(W_i x + U_i h + b_i)      f = σ(W_f x + U_f h + b_f)
//! o = σ(W_o x + U_o h + b_o)      g = tanh(W_c x + U_c h + b_c)
//! c' = f ⊙ c + i ⊙ g              h' = o ⊙ tanh(c')
//! logits = W_y h_T + b_y
//! ```

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub dims: Dims,
    /// vocab × embed
    pub embedding: Array2<f32>,
    /// 4·hidden × embed, gate blocks i, f, o, c
    pub w_input: Array2<f32>,
    /// 4·hidden × hidden, gate blocks i, f, o, c
    pub w_recurrent: Array2<f32>,
    /// 4·hidden
    pub bias: Array1<f32>,
    /// classes × hidden
    pub w_out: Array2<f32>,
    pub b_out: Array1<f32>,
}

pub const FORGET_BIAS_INIT: f32 = 1.0;
pub const EMBEDDING_INIT_RANGE: f32 = 0.1;

fn uniform(rng: &mut ChaCha8Rng, shape: (usize, usize), range: f32) -> Array2<f32> {
    Array2::from_shape_simple_fn(shape, || rng.gen_range(-range..=range))
}

impl LstmModel {
    /// Random initialization: embeddings uniform in ±0.1, weight matrices
    /// uniform in ±1/√fan_in, zero biases except the forget gate (1.0).
    pub fn new(dims: Dims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = dims.hidden;
        let embedding = uniform(&mut rng, (dims.vocab, dims.embed), EMBEDDING_INIT_RANGE);
        let w_input = uniform(
            &mut rng,
            (4 * h, dims.embed),
            1.0 / (dims.embed as f32).sqrt(),
        );
        let w_recurrent = uniform(&mut rng, (4 * h, h), 1.0 / (h as f32).sqrt());
        let w_out = uniform(&mut rng, (dims.classes, h), 1.0 / (h as f32).sqrt());
        let mut bias = Array1::zeros(4 * h);
        bias.slice_mut(s![h..2 * h]).fill(FORGET_BIAS_INIT);
        LstmModel {
            dims,
            embedding,
            w_input,
            w_recurrent,
            bias,
            w_out,
            b_out: Array1::zeros(dims.classes),
        }
    }

    /// All-zero parameters; useful as a base for hand-set test models.
    pub fn zeros(dims: Dims) -> Self {
        let h = dims.hidden;
        LstmModel {
            dims,
            embedding: Array2::zeros((dims.vocab, dims.embed)),
            w_input: Array2::zeros((4 * h, dims.embed)),
            w_recurrent: Array2::zeros((4 * h, h)),
            bias: Array1::zeros(4 * h),
            w_out: Array2::zeros((dims.classes, h)),
            b_out: Array1::zeros(dims.classes),
        }
    }

    /// Checks that every matrix matches `dims` and holds only finite values.
    pub fn validate(&self) -> Result<()> {
        let d = self.dims;
        let h4 = 4 * d.hidden;
        let shapes = [
            ("embedding", self.embedding.dim(), (d.vocab, d.embed)),
            ("w_input", self.w_input.dim(), (h4, d.embed)),
            ("w_recurrent", self.w_recurrent.dim(), (h4, d.hidden)),
            ("w_out", self.w_out.dim(), (d.classes, d.hidden)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::ShapeMismatch(format!(
                    "{name} is {got:?}, expected {want:?}"
                )));
            }
        }
        if self.bias.len() != h4 || self.b_out.len() != d.classes {
            return Err(Error::ShapeMismatch("bias length".into()));
        }
        if !self.parameters().all(|p| p.iter().all(|v| v.is_finite())) {
            return Err(Error::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Parameter tensors in checkpoint order, as flat slices.
    pub fn parameters(&self) -> impl Iterator<Item = &[f32]> {
        [
            self.embedding.as_slice(),
            self.w_input.as_slice(),
            self.w_recurrent.as_slice(),
            self.bias.as_slice(),
            self.w_out.as_slice(),
            self.b_out.as_slice(),
        ]
        .into_iter()
        .map(|p| p.expect("parameters are kept in standard layout"))
    }

    pub fn parameters_mut(&mut self) -> [&mut [f32]; 6] {
        let std = "parameters are kept in standard layout";
        [
            self.embedding.as_slice_mut().expect(std),
            self.w_input.as_slice_mut().expect(std),
            self.w_recurrent.as_slice_mut().expect(std),
            self.bias.as_slice_mut().expect(std),
            self.w_out.as_slice_mut().expect(std),
            self.b_out.as_slice_mut().expect(std),
        ]
    }

    pub fn parameter_norm(&self) -> f64 {
        self.parameters()
            .flatten()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    /// Double-precision view of the dense weights, reused across documents.
    pub fn compile(&self) -> Network<'_> {
        let to64 = |a: &Array2<f32>| a.mapv(f64::from);
        Network {
            model: self,
            w_input: to64(&self.w_input),
            w_recurrent: to64(&self.w_recurrent),
            bias: self.bias.mapv(f64::from),
            w_out: to64(&self.w_out),
            b_out: self.b_out.mapv(f64::from),
        }
    }

    pub fn forward(&self, seq: &[u32]) -> Result<Trace> {
        self.compile().forward(seq)
    }

    pub fn input_gradients(&self, seq: &[u32]) -> Result<GradientMatrix> {
        self.compile().input_gradients(seq)
    }
}

pub struct Network<'m> {
    model: &'m LstmModel,
    w_input: Array2<f64>,
    w_recurrent: Array2<f64>,
    bias: Array1<f64>,
    w_out: Array2<f64>,
    b_out: Array1<f64>,
}

/// Activations cached by a forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// T × embed input vectors.
    pub inputs: Array2<f64>,
    /// T × 4·hidden activated gates (i, f, o, g).
    gates: Array2<f64>,
    /// (T+1) × hidden cell states; row 0 is the zero initial state.
    cells: Array2<f64>,
    /// T × hidden tanh of the cell states.
    cell_tanh: Array2<f64>,
    /// (T+1) × hidden hidden states; row 0 is the zero initial state.
    hidden: Array2<f64>,
    pub logits: Array1<f64>,
    pub probabilities: Array1<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the largest probability; ties go to the lower class index.
    pub fn predicted_class(&self) -> usize {
        argmax(self.probabilities.view())
    }

    pub fn final_hidden(&self) -> ArrayView1<'_, f64> {
        self.hidden.row(self.len())
    }
}

/// Gradient of the predicted class logit with respect to each input
/// embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMatrix {
    /// T × embed
    pub rows: Array2<f64>,
    pub target_class: usize,
}

/// Parameter gradients for the dense weights. Embedding gradients are
/// returned separately as per-position input gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub w_input: Array2<f64>,
    pub w_recurrent: Array2<f64>,
    pub bias: Array1<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

impl ParamGrads {
    pub fn zeros(dims: Dims) -> Self {
        let h4 = 4 * dims.hidden;
        ParamGrads {
            w_input: Array2::zeros((h4, dims.embed)),
            w_recurrent: Array2::zeros((h4, dims.hidden)),
            bias: Array1::zeros(h4),
            w_out: Array2::zeros((dims.classes, dims.hidden)),
            b_out: Array1::zeros(dims.classes),
        }
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        self.w_input += &other.w_input;
        self.w_recurrent += &other.w_recurrent;
        self.bias += &other.bias;
        self.w_out += &other.w_out;
        self.b_out += &other.b_out;
    }
}

pub(crate) fn argmax(values: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl Network<'_> {
    pub fn dims(&self) -> Dims {
        self.model.dims
    }

    /// Looks up the embedding rows of `seq`.
    pub fn embed(&self, seq: &[u32]) -> Result<Array2<f64>> {
        let dims = self.model.dims;
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut inputs = Array2::zeros((seq.len(), dims.embed));
        for (t, &id) in seq.iter().enumerate() {
            let id = id as usize;
            if id >= dims.vocab {
                return Err(Error::TokenOutOfRange {
                    id,
                    vocab_size: dims.vocab,
                });
            }
            inputs
                .row_mut(t)
                .assign(&self.model.embedding.row(id).mapv(f64::from));
        }
        Ok(inputs)
    }

    pub fn forward(&self, seq: &[u32]) -> Result<Trace> {
        let inputs = self.embed(seq)?;
        Ok(self.forward_inputs(inputs))
    }

    /// Runs the recurrence over explicit input vectors (T × embed).
    pub fn forward_inputs(&self, inputs: Array2<f64>) -> Trace {
        let h = self.model.dims.hidden;
        let steps = inputs.nrows();
        let mut gates = inputs.dot(&self.w_input.t());
        gates += &self.bias;
        let mut cells = Array2::<f64>::zeros((steps + 1, h));
        let mut hidden = Array2::<f64>::zeros((steps + 1, h));
        let mut cell_tanh = Array2::<f64>::zeros((steps, h));
        let w_rec = self.w_recurrent.as_slice().expect("standard layout");

        for t in 0..steps {
            let h_prev = hidden.row(t).to_owned();
            let h_prev = h_prev.as_slice().expect("owned row");
            let mut g = gates.row_mut(t);
            let g = g.as_slice_mut().expect("standard layout");
            for (r, pre) in g.iter_mut().enumerate() {
                *pre += dot(&w_rec[r * h..(r + 1) * h], h_prev);
            }
            for j in 0..h {
                g[j] = sigmoid(g[j]);
                g[h + j] = sigmoid(g[h + j]);
                g[2 * h + j] = sigmoid(g[2 * h + j]);
                g[3 * h + j] = g[3 * h + j].tanh();
            }
            for j in 0..h {
                let c = g[h + j] * cells[[t, j]] + g[j] * g[3 * h + j];
                let tc = c.tanh();
                cells[[t + 1, j]] = c;
                cell_tanh[[t, j]] = tc;
                hidden[[t + 1, j]] = g[2 * h + j] * tc;
            }
        }

        let logits = self.w_out.dot(&hidden.row(steps)) + &self.b_out;
        let probabilities = softmax(&logits);
        Trace {
            inputs,
            gates,
            cells,
            cell_tanh,
            hidden,
            logits,
            probabilities,
        }
    }

    /// Backpropagates `dlogits` through the whole sequence. Returns the
    /// gradient with respect to every input vector (T × embed) and, when
    /// `params` is given, accumulates parameter gradients into it.
    pub fn backward(
        &self,
        trace: &Trace,
        dlogits: ArrayView1<'_, f64>,
        params: Option<&mut ParamGrads>,
    ) -> Array2<f64> {
        let h = self.model.dims.hidden;
        let steps = trace.len();
        let mut dh = self.w_out.t().dot(&dlogits);
        let mut dc = vec![0.0; h];
        let mut dgates = Array2::<f64>::zeros((steps, 4 * h));
        let w_rec = self.w_recurrent.as_slice().expect("standard layout");

        for t in (0..steps).rev() {
            let g = trace.gates.row(t);
            let g = g.as_slice().expect("standard layout");
            let tc = trace.cell_tanh.row(t);
            let c_prev = trace.cells.row(t);
            let mut da = dgates.row_mut(t);
            let da = da.as_slice_mut().expect("standard layout");
            for j in 0..h {
                let (i, f, o, cand) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let d_o = dh[j] * tc[j];
                let dcj = dc[j] + dh[j] * o * (1.0 - tc[j] * tc[j]);
                da[j] = dcj * cand * i * (1.0 - i);
                da[h + j] = dcj * c_prev[j] * f * (1.0 - f);
                da[2 * h + j] = d_o * o * (1.0 - o);
                da[3 * h + j] = dcj * i * (1.0 - cand * cand);
                dc[j] = dcj * f;
            }
            // dh_prev = U^T da
            dh.fill(0.0);
            let dh_s = dh.as_slice_mut().expect("owned");
            for (r, &dar) in da.iter().enumerate() {
                if dar != 0.0 {
                    let row = &w_rec[r * h..(r + 1) * h];
                    for (acc, &w) in dh_s.iter_mut().zip(row) {
                        *acc += dar * w;
                    }
                }
            }
        }

        if let Some(grads) = params {
            let h_final = trace.final_hidden();
            for (c, &dl) in dlogits.iter().enumerate() {
                grads.w_out.row_mut(c).scaled_add(dl, &h_final);
                grads.b_out[c] += dl;
            }
            general_mat_mul(1.0, &dgates.t(), &trace.inputs, 1.0, &mut grads.w_input);
            let h_prev = trace.hidden.slice(s![..steps, ..]);
            general_mat_mul(1.0, &dgates.t(), &h_prev, 1.0, &mut grads.w_recurrent);
            grads.bias += &dgates.sum_axis(Axis(0));
        }

        dgates.dot(&self.w_input)
    }

    /// Gradient of the pre-softmax logit of the predicted class with respect
    /// to every input embedding.
    pub fn input_gradients(&self, seq: &[u32]) -> Result<GradientMatrix> {
        let trace = self.forward(seq)?;
        Ok(self.trace_gradients(&trace))
    }

    pub fn trace_gradients(&self, trace: &Trace) -> GradientMatrix {
        let target_class = trace.predicted_class();
        let mut onehot = Array1::zeros(self.model.dims.classes);
        onehot[target_class] = 1.0;
        GradientMatrix {
            rows: self.backward(trace, onehot.view(), None),
            target_class,
        }
    }
}
