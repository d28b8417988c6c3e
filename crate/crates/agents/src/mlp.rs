//! Fully connected network with tanh hidden layers and a linear output
//! layer, trained by plain SGD. Inputs are sparse: only nonzero entries are
//! visited in the first layer, in both directions.

use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row `i` holds the weights leaving input `i`.
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, w: vec![0.0; inputs * outputs], b: vec![0.0; outputs] }
    }

    fn lecun_uniform(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let limit = (3.0 / inputs as f64).sqrt();
        let mut l = Self::zeros(inputs, outputs);
        for w in &mut l.w {
            *w = rng.gen_range(-limit..=limit);
        }
        l
    }

    fn apply(&self, x: impl Iterator<Item = (usize, f64)>) -> Vec<f64> {
        let mut z = self.b.clone();
        for (i, xi) in x {
            let row = &self.w[i * self.outputs..(i + 1) * self.outputs];
            for (zo, w) in z.iter_mut().zip(row) {
                *zo += xi * w;
            }
        }
        z
    }

    fn step(&mut self, x: impl Iterator<Item = (usize, f64)>, delta: &[f64], scale: f64) {
        for (i, xi) in x {
            let row = &mut self.w[i * self.outputs..(i + 1) * self.outputs];
            let s = scale * xi;
            for (w, d) in row.iter_mut().zip(delta) {
                *w += s * d;
            }
        }
        for (b, d) in self.b.iter_mut().zip(delta) {
            *b += scale * d;
        }
    }
}

/// Activations recorded by a forward pass, needed for backpropagation.
#[derive(Clone, Debug)]
pub struct Forward {
    input: Vec<(usize, f64)>,
    hidden: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Forward {
    fn layer_input(&self, l: usize) -> Box<dyn Iterator<Item = (usize, f64)> + '_> {
        if l == 0 {
            Box::new(self.input.iter().copied())
        } else {
            Box::new(self.hidden[l - 1].iter().copied().enumerate())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    /// `sizes` lists the input width, hidden widths and output width.
    /// Hidden layers use LeCun-uniform init; the output layer is zero when
    /// `zero_output` is set.
    pub fn new(sizes: &[usize], zero_output: bool, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                if k == last && zero_output {
                    Layer::zeros(w[0], w[1])
                } else {
                    Layer::lecun_uniform(w[0], w[1], rng)
                }
            })
            .collect();
        Self { layers }
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs).chain(self.layers.iter().map(|l| l.outputs)).collect()
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_len(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn forward(&self, input: Vec<(usize, f64)>) -> Forward {
        debug_assert!(input.iter().all(|(i, _)| *i < self.input_len()));
        let mut hidden = Vec::with_capacity(self.layers.len() - 1);
        let mut z = self.layers[0].apply(input.iter().copied());
        for layer in &self.layers[1..] {
            z.iter_mut().for_each(|x| *x = x.tanh());
            let next = layer.apply(z.iter().copied().enumerate());
            hidden.push(z);
            z = next;
        }
        Forward { input, hidden, output: z }
    }

    pub fn forward_dense(&self, x: &[f64]) -> Forward {
        self.forward(x.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect())
    }

    /// Gradients of `dout . output` with respect to each layer's
    /// pre-activation.
    fn deltas(&self, fwd: &Forward, dout: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![dout.to_vec()];
        for l in (1..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let delta = &out[out.len() - 1];
            let prev: Vec<f64> = fwd.hidden[l - 1]
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let row = &layer.w[i * layer.outputs..(i + 1) * layer.outputs];
                    let s: f64 = row.iter().zip(delta).map(|(w, d)| w * d).sum();
                    s * (1.0 - a * a)
                })
                .collect();
            out.push(prev);
        }
        out.reverse();
        out
    }

    /// `params += scale * grad(dout . output)`. Returns false, leaving the
    /// parameters untouched, if the backward pass is not finite.
    pub fn step(&mut self, fwd: &Forward, dout: &[f64], scale: f64) -> bool {
        let deltas = self.deltas(fwd, dout);
        if !deltas.iter().flatten().all(|d| d.is_finite()) {
            return false;
        }
        for (l, delta) in deltas.iter().enumerate() {
            let x: Vec<(usize, f64)> = fwd.layer_input(l).collect();
            self.layers[l].step(x.into_iter(), delta, scale);
        }
        true
    }

    /// Dense gradient of `dout . output`, laid out like [`Mlp::params`].
    pub fn gradient(&self, fwd: &Forward, dout: &[f64]) -> Vec<f64> {
        let deltas = self.deltas(fwd, dout);
        let mut out = Vec::with_capacity(self.param_count());
        for (l, delta) in deltas.iter().enumerate() {
            let layer = &self.layers[l];
            let mut gw = vec![0.0; layer.w.len()];
            for (i, xi) in fwd.layer_input(l) {
                for (o, d) in delta.iter().enumerate() {
                    gw[i * layer.outputs + o] = xi * d;
                }
            }
            out.extend(gw);
            out.extend_from_slice(delta);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Weights then biases of each layer in order, weights row-major by input.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter count");
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.w.len());
            let (b, tail) = tail.split_at(l.b.len());
            l.w.copy_from_slice(w);
            l.b.copy_from_slice(b);
            rest = tail;
        }
    }

    /// Network of the given shape with all parameters zero.
    pub fn zeros(sizes: &[usize]) -> Self {
        Self { layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(&l.b).all(|x| x.is_finite()))
    }
}
