use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Matrix, NumericsError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected feed-forward classifier producing raw logits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
    dropout_rate: f64,
}

/// Intermediate values of one forward pass, needed by [`MlpModel::backward`].
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// `inputs[l]` is the input to layer `l` (the batch itself for `l = 0`),
    /// after activation and dropout of the previous layer.
    inputs: Vec<Matrix>,
    /// Pre-activation values of every hidden layer.
    pre_activations: Vec<Matrix>,
    /// Inverted-dropout multipliers (0 or 1/(1-p)) per hidden layer, if any.
    masks: Vec<Option<Matrix>>,
}

impl ForwardTrace {
    pub fn num_layers(&self) -> usize {
        self.inputs.len()
    }

    pub fn batch_size(&self) -> usize {
        self.inputs[0].rows()
    }

    pub fn dropout_masks(&self) -> &[Option<Matrix>] {
        &self.masks
    }
}

/// Parameter-shaped container for gradients (or Adam moments).
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Gradients {
            weights: model
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn num_values(&self) -> usize {
        self.weights
            .iter()
            .map(|w| w.as_slice().len())
            .sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn l2_norm(&self) -> f64 {
        let w: f64 = self.weights.iter().map(Matrix::sum_squares).sum();
        let b: f64 = self.biases.iter().flatten().map(|v| v * v).sum();
        (w + b).sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    /// `self += factor * other`; shapes must agree.
    pub fn add_scaled(&mut self, other: &Gradients, factor: f64) -> Result<(), NumericsError> {
        self.check_compatible(other)?;
        self.values_mut()
            .zip(other.values())
            .for_each(|(a, b)| *a += factor * b);
        Ok(())
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .flat_map(|w| w.as_slice().iter().copied())
            .chain(self.biases.iter().flatten().copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weights
            .iter_mut()
            .flat_map(|w| w.as_mut_slice().iter_mut())
            .chain(self.biases.iter_mut().flatten())
    }

    pub(crate) fn check_compatible(&self, other: &Gradients) -> Result<(), NumericsError> {
        let same = self.weights.len() == other.weights.len()
            && self.biases.len() == other.biases.len()
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| a.shape() == b.shape())
            && self
                .biases
                .iter()
                .zip(&other.biases)
                .all(|(a, b)| a.len() == b.len());
        if same {
            Ok(())
        } else {
            Err(NumericsError::Dimension(
                "parameter containers have different shapes".into(),
            ))
        }
    }
}

impl MlpModel {
    /// He-initialized model; biases start at zero.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        dropout_rate: f64,
        rng: &mut R,
    ) -> Result<Self, NumericsError> {
        let mut model = MlpModel::zeros(layer_sizes, dropout_rate)?;
        for w in &mut model.weights {
            let std = (2.0 / w.rows() as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            w.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = normal.sample(rng));
        }
        Ok(model)
    }

    /// All-zero weights and biases.
    pub fn zeros(layer_sizes: &[usize], dropout_rate: f64) -> Result<Self, NumericsError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(NumericsError::Contract(format!(
                "layer sizes must list at least input and output, all positive: {layer_sizes:?}"
            )));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(NumericsError::Contract(format!(
                "dropout rate {dropout_rate} outside [0, 1)"
            )));
        }
        Ok(MlpModel {
            layer_sizes: layer_sizes.to_vec(),
            weights: layer_sizes
                .windows(2)
                .map(|w| Matrix::zeros(w[0], w[1]))
                .collect(),
            biases: layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
            activation: Activation::Relu,
            dropout_rate,
        })
    }

    /// Builds a model from explicit parameters.
    pub fn from_parameters(
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        dropout_rate: f64,
    ) -> Result<Self, NumericsError> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(NumericsError::Contract(
                "need one bias vector per weight matrix".into(),
            ));
        }
        let mut sizes = vec![weights[0].rows()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.rows() != sizes[l] || b.len() != w.cols() {
                return Err(NumericsError::Dimension(format!(
                    "layer {l}: weight {}x{}, bias {}, expected input {}",
                    w.rows(),
                    w.cols(),
                    b.len(),
                    sizes[l]
                )));
            }
            sizes.push(w.cols());
        }
        let mut model = MlpModel::zeros(&sizes, dropout_rate)?;
        model.weights = weights;
        model.biases = biases;
        Ok(model)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_parameters(&self) -> usize {
        self.weights
            .iter()
            .map(|w| w.rows() * w.cols())
            .sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Parameters viewed through the gradient container, for optimizers.
    pub(crate) fn parameters_mut(&mut self) -> (&mut [Matrix], &mut [Vec<f64>]) {
        (&mut self.weights, &mut self.biases)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    /// Forward pass. Dropout is only active when `train_mode` is set and the
    /// rate is positive; `rng` is only consumed in that case.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        batch: &Matrix,
        train_mode: bool,
        rng: &mut R,
    ) -> Result<(Matrix, ForwardTrace), NumericsError> {
        self.check_input(batch)?;
        let last = self.num_layers() - 1;
        let mut inputs = Vec::with_capacity(self.num_layers());
        let mut pre_activations = Vec::with_capacity(last);
        let mut masks = Vec::with_capacity(last);
        let mut current = batch.clone();
        for l in 0..=last {
            let mut z = current.matmul(&self.weights[l])?;
            z.add_row_vector(&self.biases[l])?;
            inputs.push(current);
            if l == last {
                return Ok((
                    z,
                    ForwardTrace {
                        inputs,
                        pre_activations,
                        masks,
                    },
                ));
            }
            let mut a = z.clone();
            a.map_inplace(|v| self.activation.apply(v));
            let mask = if train_mode && self.dropout_rate > 0.0 {
                let keep = 1.0 - self.dropout_rate;
                let mut mask = Matrix::zeros(a.rows(), a.cols());
                for m in mask.as_mut_slice() {
                    *m = if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    };
                }
                a.as_mut_slice()
                    .iter_mut()
                    .zip(mask.as_slice())
                    .for_each(|(v, m)| *v *= m);
                Some(mask)
            } else {
                None
            };
            pre_activations.push(z);
            masks.push(mask);
            current = a;
        }
        unreachable!("loop returns on the output layer")
    }

    /// Inference-mode logits (no dropout, no trace).
    pub fn predict_logits(&self, batch: &Matrix) -> Result<Matrix, NumericsError> {
        self.check_input(batch)?;
        let last = self.num_layers() - 1;
        let mut current = batch.matmul(&self.weights[0])?;
        current.add_row_vector(&self.biases[0])?;
        for l in 1..=last {
            current.map_inplace(|v| self.activation.apply(v));
            current = current.matmul(&self.weights[l])?;
            current.add_row_vector(&self.biases[l])?;
        }
        Ok(current)
    }

    pub fn predict_classes(&self, batch: &Matrix) -> Result<Vec<usize>, NumericsError> {
        Ok(self.predict_logits(batch)?.argmax_rows())
    }

    /// Exact gradients of the loss whose logit gradient is `dlogits`.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        dlogits: &Matrix,
    ) -> Result<Gradients, NumericsError> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_with(trace, dlogits, |l, input, delta| {
            grads.weights[l] = input.t_matmul(delta)?;
            grads.biases[l] = delta.column_sums();
            Ok(())
        })?;
        Ok(grads)
    }

    /// Gradients of each row's own loss. Row `i` of `dlogits` must be the
    /// gradient of example `i`'s loss with respect to its logits.
    pub fn backward_per_example(
        &self,
        trace: &ForwardTrace,
        dlogits: &Matrix,
    ) -> Result<Vec<Gradients>, NumericsError> {
        let n = dlogits.rows();
        let mut out = vec![Gradients::zeros_like(self); n];
        self.backward_with(trace, dlogits, |l, input, delta| {
            for (i, g) in out.iter_mut().enumerate() {
                let x = input.row(i);
                let d = delta.row(i);
                let w = g.weights[l].as_mut_slice();
                for (r, &xv) in x.iter().enumerate() {
                    if xv != 0.0 {
                        w[r * d.len()..(r + 1) * d.len()]
                            .iter_mut()
                            .zip(d)
                            .for_each(|(o, dv)| *o = xv * dv);
                    }
                }
                g.biases[l].copy_from_slice(d);
            }
            Ok(())
        })?;
        Ok(out)
    }

    /// Runs the backward recursion, handing each layer's input activations
    /// and output deltas to `sink`, from the last layer to the first.
    fn backward_with(
        &self,
        trace: &ForwardTrace,
        dlogits: &Matrix,
        mut sink: impl FnMut(usize, &Matrix, &Matrix) -> Result<(), NumericsError>,
    ) -> Result<(), NumericsError> {
        self.check_trace(trace, dlogits)?;
        let mut delta = dlogits.clone();
        for l in (0..self.num_layers()).rev() {
            sink(l, &trace.inputs[l], &delta)?;
            if l == 0 {
                break;
            }
            let mut upstream = delta.matmul_t(&self.weights[l])?;
            let pre = &trace.pre_activations[l - 1];
            for (u, z) in upstream.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                *u *= self.activation.derivative(*z);
            }
            if let Some(mask) = &trace.masks[l - 1] {
                upstream
                    .as_mut_slice()
                    .iter_mut()
                    .zip(mask.as_slice())
                    .for_each(|(u, m)| *u *= m);
            }
            delta = upstream;
        }
        Ok(())
    }

    fn check_input(&self, batch: &Matrix) -> Result<(), NumericsError> {
        if batch.cols() != self.input_dim() {
            return Err(NumericsError::Dimension(format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn check_trace(&self, trace: &ForwardTrace, dlogits: &Matrix) -> Result<(), NumericsError> {
        let layers_ok = trace.inputs.len() == self.num_layers()
            && trace.pre_activations.len() == self.num_layers() - 1
            && trace
                .inputs
                .iter()
                .zip(&self.layer_sizes)
                .all(|(m, &d)| m.cols() == d);
        if !layers_ok {
            return Err(NumericsError::Contract(
                "forward trace was not produced by this model".into(),
            ));
        }
        if dlogits.shape() != (trace.batch_size(), self.num_classes()) {
            return Err(NumericsError::Contract(format!(
                "dlogits is {}x{}, trace expects {}x{}",
                dlogits.rows(),
                dlogits.cols(),
                trace.batch_size(),
                self.num_classes()
            )));
        }
        Ok(())
    }
}
