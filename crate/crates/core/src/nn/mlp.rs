//! Fixed-topology dense networks with hand-written backpropagation.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::{LayerShape, Layout, Matrix, ParamVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and the output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `output x input`, row-major.
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn shape(&self) -> LayerShape {
        LayerShape { input: self.weight.cols(), output: self.weight.rows(), activation: self.activation }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layers: Vec<DenseLayer>,
}

/// Everything backward needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    output: Matrix,
}

impl Trace {
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

/// Parameter gradient plus the gradient with respect to the network input.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: ParamVector,
    pub input: Matrix,
}

impl MlpModel {
    /// Builds a network from explicit layers, checking that dimensions chain.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a model needs at least one layer"));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.rows() {
                return Err(Error::invalid(format!("layer {k}: bias length does not match output dim")));
            }
            if !l.weight.all_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::invalid(format!("layer {k}: non-finite parameter")));
            }
        }
        for (k, w) in layers.windows(2).enumerate() {
            if w[0].weight.rows() != w[1].weight.cols() {
                return Err(Error::invalid(format!(
                    "layer {k} outputs {} values but layer {} takes {}",
                    w[0].weight.rows(),
                    k + 1,
                    w[1].weight.cols()
                )));
            }
        }
        Ok(MlpModel { layers })
    }

    /// Glorot-uniform weights, zero biases.
    ///
    /// `widths` lists every layer width including input and output, so `[4, 8, 1]`
    /// is a single hidden layer of 8 units.
    pub fn init<R: Rng + ?Sized>(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::invalid(format!("invalid layer widths {widths:?}")));
        }
        let n = widths.len() - 1;
        let mut layers = Vec::with_capacity(n);
        for k in 0..n {
            let (fan_in, fan_out) = (widths[k], widths[k + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            let values = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
            layers.push(DenseLayer {
                weight: Matrix::from_vec(fan_out, fan_in, values)?,
                bias: vec![0.0; fan_out],
                activation: if k + 1 == n { output } else { hidden },
            });
        }
        MlpModel::from_layers(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.rows()
    }

    pub fn layout(&self) -> Layout {
        Layout(self.layers.iter().map(DenseLayer::shape).collect())
    }

    pub fn n_params(&self) -> usize {
        self.layout().n_params()
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, Trace)> {
        if batch.cols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "batch has {} columns, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for layer in &self.layers {
            let z = affine(layer, &x);
            let mut a = z.clone();
            for v in a.values_mut() {
                *v = layer.activation.apply(*v);
            }
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        Ok((x.clone(), Trace { inputs, pre, output: x }))
    }

    /// Forward pass without keeping a trace.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "batch has {} columns, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        let mut x = batch.clone();
        for layer in &self.layers {
            let mut z = affine(layer, &x);
            for v in z.values_mut() {
                *v = layer.activation.apply(*v);
            }
            x = z;
        }
        Ok(x)
    }

    /// Parameter gradient of a loss whose gradient with respect to the output is `output_grad`.
    pub fn backward(&self, trace: &Trace, output_grad: &Matrix) -> Result<ParamVector> {
        Ok(self.backward_full(trace, output_grad)?.params)
    }

    pub fn backward_full(&self, trace: &Trace, output_grad: &Matrix) -> Result<Gradients> {
        self.check_trace(trace, output_grad)?;
        let layout = self.layout();
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut delta_out = output_grad.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let z = &trace.pre[k];
            let x = &trace.inputs[k];
            let a = if k + 1 == self.layers.len() { &trace.output } else { &trace.inputs[k + 1] };
            // delta = dL/dz
            let mut delta = delta_out;
            for ((d, &zv), &av) in delta.values_mut().iter_mut().zip(z.values()).zip(a.values()) {
                *d *= layer.activation.derivative(zv, av);
            }
            let (n_out, n_in) = (layer.weight.rows(), layer.weight.cols());
            let mut g = vec![0.0; n_out * n_in + n_out];
            let (gw, gb) = g.split_at_mut(n_out * n_in);
            let mut dx = Matrix::zeros(x.rows(), n_in);
            for r in 0..x.rows() {
                let xr = x.row(r);
                let dr = delta.row(r);
                let dxr = dx.row_mut(r);
                for o in 0..n_out {
                    let d = dr[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let wrow = layer.weight.row(o);
                    let gwrow = &mut gw[o * n_in..(o + 1) * n_in];
                    for i in 0..n_in {
                        gwrow[i] += d * xr[i];
                        dxr[i] += d * wrow[i];
                    }
                }
            }
            grads.push(g);
            delta_out = dx;
        }
        grads.reverse();
        let values = grads.into_iter().flatten().collect();
        Ok(Gradients { params: ParamVector::new(values, layout)?, input: delta_out })
    }

    fn check_trace(&self, trace: &Trace, output_grad: &Matrix) -> Result<()> {
        let stale = || Error::invalid("trace does not belong to this model (shape mismatch)");
        if trace.inputs.len() != self.layers.len() || trace.pre.len() != self.layers.len() {
            return Err(stale());
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if trace.inputs[k].cols() != layer.weight.cols() || trace.pre[k].cols() != layer.weight.rows() {
                return Err(stale());
            }
        }
        if output_grad.rows() != trace.output.rows() || output_grad.cols() != trace.output.cols() {
            return Err(Error::invalid(format!(
                "output gradient is {}x{}, forward output was {}x{}",
                output_grad.rows(),
                output_grad.cols(),
                trace.output.rows(),
                trace.output.cols()
            )));
        }
        Ok(())
    }

    /// Flattens every layer as weights (row-major) then bias.
    pub fn to_params(&self) -> ParamVector {
        let mut values = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            values.extend_from_slice(l.weight.values());
            values.extend_from_slice(&l.bias);
        }
        ParamVector { values, layout: self.layout() }
    }

    pub fn from_params(params: &ParamVector) -> Result<Self> {
        if params.values.len() != params.layout.n_params() {
            return Err(Error::invalid("parameter count does not match layout"));
        }
        let mut layers = Vec::with_capacity(params.layout.0.len());
        let mut off = 0;
        for s in &params.layout.0 {
            let nw = s.output * s.input;
            let weight = Matrix::from_vec(s.output, s.input, params.values[off..off + nw].to_vec())?;
            let bias = params.values[off + nw..off + nw + s.output].to_vec();
            off += s.n_params();
            layers.push(DenseLayer { weight, bias, activation: s.activation });
        }
        MlpModel::from_layers(layers)
    }

    /// Overwrites the parameters in place. The layout must match.
    pub fn set_params(&mut self, params: &ParamVector) -> Result<()> {
        if params.layout != self.layout() {
            return Err(Error::invalid("parameter layout does not match model"));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weight.rows() * l.weight.cols();
            l.weight.values_mut().copy_from_slice(&params.values[off..off + nw]);
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params.values[off + nw..off + nw + nb]);
            off += nw + nb;
        }
        Ok(())
    }
}

fn affine(layer: &DenseLayer, x: &Matrix) -> Matrix {
    let (n_out, n_in) = (layer.weight.rows(), layer.weight.cols());
    let mut z = Matrix::zeros(x.rows(), n_out);
    for r in 0..x.rows() {
        let xr = x.row(r);
        let zr = z.row_mut(r);
        for o in 0..n_out {
            let w = layer.weight.row(o);
            let mut acc = layer.bias[o];
            for i in 0..n_in {
                acc += w[i] * xr[i];
            }
            zr[o] = acc;
        }
    }
    z
}
