use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::binio::{self, Reader, Writer};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SFTN";
const VERSION: u8 = 1;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed in terms of the pre-activation.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Activation::Tanh),
            1 => Ok(Activation::Relu),
            _ => Err(Error::format("network", format!("unknown activation code {c}"))),
        }
    }
}

/// Multi-layer perceptron. Layer `k` maps `dims[k]` inputs to `dims[k+1]`
/// outputs with weights stored as `(dims[k+1], dims[k])`.
#[derive(Debug)]
pub struct Mlp {
    dims: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    activation: Activation,
    id: u64,
    generation: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            weights: self.weights.clone(),
            biases: self.biases.clone(),
            activation: self.activation,
            id: fresh_id(),
            generation: 0,
        }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.activation == other.activation
            && self.weights == other.weights
            && self.biases == other.biases
    }
}

/// Gradients (or any other quantity) shaped like an [`Mlp`]'s parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpGrads {
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.weights.len() * 2);
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }
}

/// Intermediates from one forward pass, consumed by [`Mlp::backward`].
#[derive(Debug)]
pub struct GradientTape {
    net_id: u64,
    generation: u64,
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Array2<f64>>,
}

impl GradientTape {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }
}

#[derive(Debug)]
pub struct Backward {
    pub grads: MlpGrads,
    /// Gradient with respect to the network input, `(batch, dims[0])`.
    pub input: Array2<f64>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(dims: &[usize], activation: Activation, rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeros(dims, activation)?;
        for w in &mut net.weights {
            let (fan_out, fan_in) = w.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-limit..=limit));
        }
        Ok(net)
    }

    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Shape(format!("invalid layer dims {dims:?}")));
        }
        let weights = dims.windows(2).map(|d| Array2::zeros((d[1], d[0]))).collect();
        let biases = dims[1..].iter().map(|&d| Array1::zeros(d)).collect();
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
            activation,
            id: fresh_id(),
            generation: 0,
        })
    }

    pub fn from_parts(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Shape("weights and biases must pair up".into()));
        }
        let mut dims = vec![weights[0].ncols()];
        for (k, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != dims[k] || b.len() != w.nrows() {
                return Err(Error::Shape(format!("layer {k} does not chain")));
            }
            dims.push(w.nrows());
        }
        let mut net = Self::zeros(&dims, activation)?;
        // Re-own in standard layout so tensor slices are always contiguous.
        net.weights = weights.into_iter().map(|w| w.as_standard_layout().into_owned()).collect();
        net.biases = biases;
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two dims")
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Mutable access to layer `k`. Invalidates outstanding tapes.
    pub fn layer_mut(&mut self, k: usize) -> (&mut Array2<f64>, &mut Array1<f64>) {
        self.generation += 1;
        (&mut self.weights[k], &mut self.biases[k])
    }

    /// Parameter tensors in `[w0, b0, w1, b1, ...]` order. Invalidates
    /// outstanding tapes.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.generation += 1;
        let mut out = Vec::with_capacity(self.weights.len() * 2);
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_slice_mut().expect("standard layout"));
            out.push(b.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.weights.len() * 2);
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.dims[0] {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.dims[0],
                x.ncols()
            )));
        }
        Ok(())
    }

    fn affine(&self, k: usize, x: &Array2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights[k].t());
        z += &self.biases[k];
        z
    }

    /// Forward pass without recording intermediates.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let last = self.num_layers() - 1;
        let mut h = self.affine(0, x);
        for k in 1..=last {
            let act = self.activation;
            h.mapv_inplace(|z| act.apply(z));
            h = self.affine(k, &h);
        }
        Ok(h)
    }

    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<(Array2<f64>, GradientTape)> {
        self.check_input(x)?;
        let last = self.num_layers() - 1;
        let mut inputs = Vec::with_capacity(self.num_layers());
        let mut pre = Vec::with_capacity(last);
        let mut h = x.clone();
        for k in 0..=last {
            let z = self.affine(k, &h);
            inputs.push(h);
            if k == last {
                h = z;
            } else {
                let act = self.activation;
                h = z.mapv(|v| act.apply(v));
                pre.push(z);
            }
        }
        let tape = GradientTape { net_id: self.id, generation: self.generation, inputs, pre };
        Ok((h, tape))
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, GradientTape)> {
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec())
            .map_err(|e| Error::Shape(e.to_string()))?;
        let (y, tape) = self.forward_batch(&x)?;
        Ok((y.into_raw_vec_and_offset().0, tape))
    }

    /// Reverse pass. `output_grad` is `dL/dy` with the same shape as the
    /// forward output. The tape is consumed.
    pub fn backward(&self, tape: GradientTape, output_grad: &Array2<f64>) -> Result<Backward> {
        if tape.net_id != self.id || tape.generation != self.generation {
            return Err(Error::Usage(
                "gradient tape does not belong to this network state".into(),
            ));
        }
        let batch = tape.batch_size();
        if output_grad.dim() != (batch, self.output_dim()) {
            return Err(Error::Shape(format!(
                "output gradient has shape {:?}, expected ({batch}, {})",
                output_grad.dim(),
                self.output_dim()
            )));
        }
        let n = self.num_layers();
        let mut gw = Vec::with_capacity(n);
        let mut gb = Vec::with_capacity(n);
        let mut g = output_grad.clone();
        for k in (0..n).rev() {
            gw.push(g.t().dot(&tape.inputs[k]).as_standard_layout().into_owned());
            gb.push(g.sum_axis(Axis(0)).as_standard_layout().into_owned());
            let mut ga = g.dot(&self.weights[k]);
            if k > 0 {
                let act = self.activation;
                ga.zip_mut_with(&tape.pre[k - 1], |d, &z| *d *= act.derivative(z));
            }
            g = ga;
        }
        gw.reverse();
        gb.reverse();
        Ok(Backward { grads: MlpGrads { weights: gw, biases: gb }, input: g })
    }

    /// `self <- tau * source + (1 - tau) * self`, element-wise.
    pub fn polyak_from(&mut self, source: &Mlp, tau: f64) -> Result<()> {
        if self.dims != source.dims {
            return Err(Error::Shape("polyak update between different architectures".into()));
        }
        let src = source.tensors();
        for (dst, s) in self.tensors_mut().into_iter().zip(src) {
            for (d, &v) in dst.iter_mut().zip(s) {
                *d = tau * v + (1.0 - tau) * *d;
            }
        }
        Ok(())
    }

    pub fn copy_from(&mut self, source: &Mlp) -> Result<()> {
        if self.dims != source.dims {
            return Err(Error::Shape("copy between different architectures".into()));
        }
        for (dst, s) in self.tensors_mut().into_iter().zip(source.tensors()) {
            dst.copy_from_slice(s);
        }
        Ok(())
    }

    pub fn write_payload(&self, w: &mut Writer) {
        w.u8(self.activation.code());
        w.u32(self.dims.len() as u32);
        for &d in &self.dims {
            w.u32(d as u32);
        }
        for t in self.tensors() {
            w.f64s(t);
        }
    }

    pub fn read_payload(r: &mut Reader<'_>) -> Result<Self> {
        let activation = Activation::from_code(r.u8()?)?;
        let n = r.u32()? as usize;
        if !(2..=64).contains(&n) {
            return Err(Error::format("network", format!("implausible layer count {n}")));
        }
        let dims: Vec<usize> = (0..n).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        let mut net = Self::zeros(&dims, activation).map_err(|e| Error::format("network", e.to_string()))?;
        for t in net.tensors_mut() {
            let v = r.f64s()?;
            if v.len() != t.len() {
                return Err(Error::format("network", "tensor length does not match dims"));
            }
            t.copy_from_slice(&v);
        }
        Ok(net)
    }

    /// Standalone `SFTN` checkpoint bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write_payload(&mut w);
        binio::seal(MAGIC, VERSION, &w.into_inner())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (version, payload) = binio::open(bytes, MAGIC, "network")?;
        if version != VERSION {
            return Err(Error::format("network", format!("unsupported version {version}")));
        }
        let mut r = Reader::new(payload, "network");
        let net = Self::read_payload(&mut r)?;
        r.finish()?;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::array;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[2, 5, 3], Activation::Tanh).unwrap();
        let (y, _) = net.forward(&[1.0, 2.0]).unwrap();
        assert_eq!(y, vec![0.0; 3]);
    }

    #[test]
    fn identity_linear_layer() {
        let net = Mlp::from_parts(vec![Array2::eye(2)], vec![Array1::zeros(2)], Activation::Relu)
            .unwrap();
        let (y, _) = net.forward(&[0.5, -0.5]).unwrap();
        assert_eq!(y, vec![0.5, -0.5]);
    }

    #[test]
    fn shapes_follow_dims() {
        let net = Mlp::new(&[3, 4, 2], Activation::Tanh, &mut seed::rng(1)).unwrap();
        assert_eq!(net.weights()[0].dim(), (4, 3));
        assert_eq!(net.weights()[1].dim(), (2, 4));
        assert_eq!(net.biases()[1].len(), 2);
        assert_eq!(net.num_params(), 4 * 3 + 4 + 2 * 4 + 2);
    }

    #[test]
    fn wrong_input_length_is_shape_error() {
        let net = Mlp::zeros(&[3, 2], Activation::Tanh).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn linear_layer_weight_gradient_is_outer_product() {
        let w = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let net = Mlp::from_parts(vec![w], vec![Array1::zeros(2)], Activation::Tanh).unwrap();
        let x = [0.3, -1.2, 2.0];
        let (_, tape) = net.forward(&x).unwrap();
        let back = net.backward(tape, &array![[1.0, 0.0]]).unwrap();
        assert_eq!(back.grads.weights[0].row(0).to_vec(), x.to_vec());
        assert_eq!(back.grads.weights[0].row(1).to_vec(), vec![0.0; 3]);
        assert_eq!(back.input.row(0).to_vec(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn tanh_derivative_at_zero_is_one() {
        assert_eq!(Activation::Tanh.derivative(0.0), 1.0);
        // Zero-bias hidden layer with zero input: gradient passes straight through.
        let net = Mlp::from_parts(
            vec![array![[1.0]], array![[1.0]]],
            vec![array![0.0], array![0.0]],
            Activation::Tanh,
        )
        .unwrap();
        let (_, tape) = net.forward(&[0.0]).unwrap();
        let back = net.backward(tape, &array![[1.0]]).unwrap();
        assert_eq!(back.input[[0, 0]], 1.0);
    }

    #[test]
    fn stale_tape_is_rejected() {
        let mut net = Mlp::new(&[2, 3, 1], Activation::Tanh, &mut seed::rng(3)).unwrap();
        let (_, tape) = net.forward(&[0.1, 0.2]).unwrap();
        net.layer_mut(0).1[0] += 1.0;
        assert!(matches!(net.backward(tape, &array![[1.0]]), Err(Error::Usage(_))));

        let other = net.clone();
        let (_, tape) = other.forward(&[0.1, 0.2]).unwrap();
        assert!(matches!(net.backward(tape, &array![[1.0]]), Err(Error::Usage(_))));
    }

    #[test]
    fn forward_backward_leaves_params_untouched() {
        let net = Mlp::new(&[3, 5, 2], Activation::Relu, &mut seed::rng(9)).unwrap();
        let before = net.clone();
        let (_, tape) = net.forward(&[1.0, -2.0, 0.5]).unwrap();
        net.backward(tape, &array![[0.3, -0.7]]).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn polyak_one_step() {
        let mut target = Mlp::zeros(&[1, 1], Activation::Tanh).unwrap();
        let src = Mlp::from_parts(vec![array![[1.0]]], vec![array![1.0]], Activation::Tanh).unwrap();
        target.polyak_from(&src, 0.005).unwrap();
        assert_eq!(target.weights()[0][[0, 0]], 0.005);
        target.polyak_from(&src, 1.0).unwrap();
        assert_eq!(target, src);
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = Mlp::new(&[4, 7, 3], Activation::Relu, &mut seed::rng(5)).unwrap();
        let bytes = net.to_bytes();
        assert_eq!(&bytes[..4], b"SFTN");
        let back = Mlp::from_bytes(&bytes).unwrap();
        assert_eq!(back, net);
        let mut corrupt = bytes.clone();
        corrupt[30] ^= 0x10;
        assert!(Mlp::from_bytes(&corrupt).is_err());
    }
}
