use alloc::vec;
use alloc::vec::Vec;

use super::layers::{self, ConvDims, LayerSpec, NetworkSpec};
use super::{seeded_rng, uniform, Tensor};
use crate::error::{Error, Result};
use crate::math;

/// A [`NetworkSpec`] with its parameters: `(weight, bias)` for every
/// convolution and dense layer, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    params: Vec<Tensor>,
}

/// Activations recorded by [`Network::forward`]; `inputs[i]` is the input of layer `i`.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub(crate) inputs: Vec<Tensor>,
}

impl Trace {
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Same layout as [`Network::params`].
    pub params: Vec<Tensor>,
    pub input: Tensor,
}

impl Network {
    /// He-uniform initialization (bound `sqrt(6 / fan_in)`), zero biases.
    pub fn new(spec: NetworkSpec, input_channels: usize, seed: u64) -> Result<Self> {
        spec.validate(input_channels)?;
        let mut rng = seeded_rng(seed);
        let mut params = Vec::new();
        for layer in &spec.layers {
            if let Some([w_shape, b_shape]) = layer.parameter_shapes() {
                let bound = math::sqrt(6.0 / layer.fan_in() as f64);
                let len: usize = w_shape.iter().product();
                let weights = (0..len).map(|_| (2.0 * uniform(&mut rng) - 1.0) * bound).collect();
                params.push(Tensor::from_vec(w_shape, weights)?);
                params.push(Tensor::zeros(b_shape));
            }
        }
        Ok(Self { spec, params })
    }

    /// Rebuild a network from explicit parameters (e.g. a checkpoint).
    pub fn from_parts(spec: NetworkSpec, params: Vec<Tensor>) -> Result<Self> {
        let shapes: Vec<Vec<usize>> =
            spec.layers.iter().filter_map(LayerSpec::parameter_shapes).flatten().collect();
        if shapes.len() != params.len() {
            return Err(Error::ShapeMismatch { expected: vec![shapes.len()], got: vec![params.len()] });
        }
        for (shape, p) in shapes.iter().zip(&params) {
            p.ensure_shape(shape)?;
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Forward pass without recording activations.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        self.run(input, None)
    }

    /// Forward pass recording the activations needed by [`Network::backward`].
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Trace)> {
        let mut trace = Trace { inputs: Vec::with_capacity(self.spec.layers.len()) };
        let out = self.run(input, Some(&mut trace))?;
        Ok((out, trace))
    }

    fn run(&self, input: &Tensor, mut trace: Option<&mut Trace>) -> Result<Tensor> {
        input.ensure_finite("network input")?;
        let mut x = input.clone();
        let mut skips: Vec<Tensor> = Vec::new();
        let mut p = 0;
        for layer in &self.spec.layers {
            let next = match *layer {
                LayerSpec::Conv3d { in_channels, out_channels, kernel, padding } => {
                    let dims = conv_dims(&x, in_channels, out_channels, kernel, padding)?;
                    let (od, oh, ow) = dims.out_dims();
                    let out = layers::conv3d_forward(x.data(), &dims, self.params[p].data(), self.params[p + 1].data());
                    p += 2;
                    Tensor::from_vec(vec![out_channels, od, oh, ow], out)?
                }
                LayerSpec::Dense { inputs, outputs } => {
                    let rows = dense_rows(&x, inputs)?;
                    let out = layers::dense_forward(x.data(), rows, inputs, outputs, self.params[p].data(), self.params[p + 1].data());
                    p += 2;
                    Tensor::from_vec(vec![rows, outputs], out)?
                }
                LayerSpec::Relu => x.map(|v| v.max(0.0)),
                LayerSpec::LeakyRelu(slope) => x.map(|v| if v > 0.0 { v } else { slope * v }),
                LayerSpec::SkipSave => {
                    skips.push(x.clone());
                    x.clone()
                }
                LayerSpec::SkipAdd => {
                    let saved = skips.pop().ok_or(Error::InvalidConfig("skip without save".into()))?;
                    saved.ensure_shape(x.shape())?;
                    let data = x.data().iter().zip(saved.data()).map(|(a, b)| a + b).collect();
                    Tensor::from_vec(x.shape().to_vec(), data)?
                }
                LayerSpec::SkipConcat => {
                    let saved = skips.pop().ok_or(Error::InvalidConfig("skip without save".into()))?;
                    if saved.shape().len() != x.shape().len() || saved.shape()[1..] != x.shape()[1..] {
                        return Err(Error::ShapeMismatch { expected: saved.shape().to_vec(), got: x.shape().to_vec() });
                    }
                    let mut shape = x.shape().to_vec();
                    shape[0] += saved.shape()[0];
                    let mut data = saved.data().to_vec();
                    data.extend_from_slice(x.data());
                    Tensor::from_vec(shape, data)?
                }
                LayerSpec::AvgPool2 => {
                    let [c, d, h, w] = volume_dims(&x)?;
                    if h % 2 != 0 || w % 2 != 0 {
                        return Err(Error::ShapeMismatch { expected: vec![c, d, h & !1, w & !1], got: x.shape().to_vec() });
                    }
                    Tensor::from_vec(vec![c, d, h / 2, w / 2], layers::avg_pool2_forward(x.data(), c, d, h, w))?
                }
                LayerSpec::Upsample2 => {
                    let [c, d, h, w] = volume_dims(&x)?;
                    Tensor::from_vec(vec![c, d, 2 * h, 2 * w], layers::upsample2_forward(x.data(), c, d, h, w))?
                }
            };
            next.ensure_finite("activation")?;
            if let Some(t) = trace.as_deref_mut() {
                t.inputs.push(x);
            }
            x = next;
        }
        Ok(x)
    }

    /// Reverse pass: parameter gradients (and the input gradient) of a scalar
    /// loss whose gradient w.r.t. the network output is `grad_output`.
    pub fn backward(&self, trace: &Trace, grad_output: &Tensor) -> Result<Gradients> {
        if trace.inputs.len() != self.spec.layers.len() || trace.is_empty() {
            return Err(Error::NoTrace);
        }
        let mut grads: Vec<Tensor> = self.params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
        let mut p = self.params.len();
        let mut g = grad_output.clone();
        let mut skip_grads: Vec<Tensor> = Vec::new();
        for (layer, x) in self.spec.layers.iter().zip(&trace.inputs).rev() {
            g = match *layer {
                LayerSpec::Conv3d { in_channels, out_channels, kernel, padding } => {
                    p -= 2;
                    let dims = conv_dims(x, in_channels, out_channels, kernel, padding)?;
                    let (gi, gw, gb) = layers::conv3d_backward(x.data(), &dims, self.params[p].data(), g.data(), true);
                    grads[p] = Tensor::from_vec(self.params[p].shape().to_vec(), gw)?;
                    grads[p + 1] = Tensor::from_vec(self.params[p + 1].shape().to_vec(), gb)?;
                    Tensor::from_vec(x.shape().to_vec(), gi)?
                }
                LayerSpec::Dense { inputs, outputs } => {
                    p -= 2;
                    let rows = dense_rows(x, inputs)?;
                    let (gi, gw, gb) = layers::dense_backward(x.data(), rows, inputs, outputs, self.params[p].data(), g.data());
                    grads[p] = Tensor::from_vec(self.params[p].shape().to_vec(), gw)?;
                    grads[p + 1] = Tensor::from_vec(self.params[p + 1].shape().to_vec(), gb)?;
                    Tensor::from_vec(x.shape().to_vec(), gi)?
                }
                LayerSpec::Relu => {
                    let data = g.data().iter().zip(x.data()).map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 }).collect();
                    Tensor::from_vec(x.shape().to_vec(), data)?
                }
                LayerSpec::LeakyRelu(slope) => {
                    let data = g.data().iter().zip(x.data()).map(|(&gv, &xv)| if xv > 0.0 { gv } else { slope * gv }).collect();
                    Tensor::from_vec(x.shape().to_vec(), data)?
                }
                LayerSpec::SkipAdd => {
                    skip_grads.push(g.clone());
                    g
                }
                LayerSpec::SkipConcat => {
                    let own = x.len();
                    let split = g.len() - own;
                    let mut saved_shape = g.shape().to_vec();
                    saved_shape[0] -= x.shape()[0];
                    skip_grads.push(Tensor::from_vec(saved_shape, g.data()[..split].to_vec())?);
                    Tensor::from_vec(x.shape().to_vec(), g.data()[split..].to_vec())?
                }
                LayerSpec::SkipSave => {
                    let extra = skip_grads.pop().ok_or(Error::NoTrace)?;
                    let data = g.data().iter().zip(extra.data()).map(|(a, b)| a + b).collect();
                    Tensor::from_vec(x.shape().to_vec(), data)?
                }
                LayerSpec::AvgPool2 => {
                    let [c, d, h, w] = volume_dims(x)?;
                    Tensor::from_vec(x.shape().to_vec(), layers::avg_pool2_backward(g.data(), c, d, h, w))?
                }
                LayerSpec::Upsample2 => {
                    let [c, d, h, w] = volume_dims(x)?;
                    Tensor::from_vec(x.shape().to_vec(), layers::upsample2_backward(g.data(), c, d, h, w))?
                }
            };
        }
        Ok(Gradients { params: grads, input: g })
    }
}

fn volume_dims(x: &Tensor) -> Result<[usize; 4]> {
    match *x.shape() {
        [c, d, h, w] => Ok([c, d, h, w]),
        _ => Err(Error::ShapeMismatch { expected: vec![0; 4], got: x.shape().to_vec() }),
    }
}

fn conv_dims(x: &Tensor, c_in: usize, c_out: usize, kernel: usize, padding: usize) -> Result<ConvDims> {
    let [c, d, h, w] = volume_dims(x)?;
    let span = 2 * padding + 1;
    if c != c_in || d + span <= kernel || h + span <= kernel || w + span <= kernel {
        return Err(Error::ShapeMismatch { expected: vec![c_in, d, h, w], got: x.shape().to_vec() });
    }
    Ok(ConvDims { c_in, c_out, kernel, padding, d, h, w })
}

fn dense_rows(x: &Tensor, inputs: usize) -> Result<usize> {
    match *x.shape() {
        [rows, f] if f == inputs => Ok(rows),
        _ => Err(Error::ShapeMismatch { expected: vec![0, inputs], got: x.shape().to_vec() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_forward_example() {
        let spec = NetworkSpec::new(vec![LayerSpec::Dense { inputs: 2, outputs: 1 }]);
        let net = Network::from_parts(
            spec,
            vec![Tensor::from_vec(vec![1, 2], vec![1.0, 1.0]).unwrap(), Tensor::zeros(vec![1])],
        )
        .unwrap();
        let out = net.predict(&Tensor::from_vec(vec![1, 2], vec![3.0, 4.0]).unwrap()).unwrap();
        assert_eq!(out.data(), &[7.0]);
    }

    #[test]
    fn relu_forward_example() {
        let net = Network::new(NetworkSpec::new(vec![LayerSpec::Relu]), 2, 0).unwrap();
        let out = net.predict(&Tensor::from_vec(vec![1, 2], vec![-1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(out.data(), &[0.0, 2.0]);
    }

    #[test]
    fn linear_gradient_is_input() {
        let spec = NetworkSpec::new(vec![LayerSpec::Dense { inputs: 1, outputs: 1 }]);
        let net = Network::from_parts(spec, vec![Tensor::full(vec![1, 1], 0.3), Tensor::zeros(vec![1])]).unwrap();
        let (_, trace) = net.forward(&Tensor::full(vec![1, 1], 2.0)).unwrap();
        let grads = net.backward(&trace, &Tensor::full(vec![1, 1], 1.0)).unwrap();
        assert_eq!(grads.params[0].data(), &[2.0]);
        assert_eq!(grads.params[1].data(), &[1.0]);
    }

    #[test]
    fn dead_relu_has_zero_gradient() {
        let net = Network::new(NetworkSpec::new(vec![LayerSpec::Relu]), 1, 0).unwrap();
        let (_, trace) = net.forward(&Tensor::full(vec![1, 1], -1.0)).unwrap();
        let grads = net.backward(&trace, &Tensor::full(vec![1, 1], 1.0)).unwrap();
        assert_eq!(grads.input.data(), &[0.0]);
    }

    #[test]
    fn backward_without_trace_fails() {
        let net = Network::new(NetworkSpec::mlp(2, 2, 1, 1), 2, 0).unwrap();
        assert_eq!(net.backward(&Trace::default(), &Tensor::zeros(vec![1, 1])).unwrap_err(), Error::NoTrace);
    }

    #[test]
    fn shape_mismatch_and_non_finite_input() {
        let net = Network::new(NetworkSpec::mlp(2, 2, 1, 1), 2, 0).unwrap();
        assert!(matches!(net.predict(&Tensor::zeros(vec![1, 3])), Err(Error::ShapeMismatch { .. })));
        let nan = Tensor::from_vec(vec![1, 2], vec![f64::NAN, 0.0]).unwrap();
        assert!(matches!(net.predict(&nan), Err(Error::NonFinite(_))));
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = Network::new(NetworkSpec::residual_cnn(4, 3, 3), 1, 9).unwrap();
        let b = Network::new(NetworkSpec::residual_cnn(4, 3, 3), 1, 9).unwrap();
        let c = Network::new(NetworkSpec::residual_cnn(4, 3, 3), 1, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
