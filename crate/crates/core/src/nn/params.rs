//! Flat parameter vectors: the unit that participants exchange and aggregate.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Activation;
use crate::error::{Error, Result};

/// Shape of one dense layer inside a flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

impl LayerShape {
    /// Weights (`output x input`, row-major) followed by the bias.
    pub fn n_params(&self) -> usize {
        self.output * self.input + self.output
    }
}

/// Layer-shape descriptor of a [`ParamVector`].
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Layout(pub Vec<LayerShape>);

impl Layout {
    pub fn n_params(&self) -> usize {
        self.0.iter().map(LayerShape::n_params).sum()
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.0
    }

    pub fn concat(&self, other: &Layout) -> Layout {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Layout(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: Layout) -> Result<Self> {
        if values.len() != layout.n_params() {
            return Err(Error::invalid(format!(
                "layout describes {} parameters, got {}",
                layout.n_params(),
                values.len()
            )));
        }
        Ok(ParamVector { values, layout })
    }

    pub fn zeros(layout: Layout) -> Self {
        ParamVector { values: vec![0.0; layout.n_params()], layout }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_same_layout(&self, other: &ParamVector) -> Result<()> {
        if self.layout != other.layout || self.values.len() != other.values.len() {
            return Err(Error::invalid(format!(
                "parameter layout mismatch ({} vs {} values)",
                self.values.len(),
                other.values.len()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self - other`.
    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        self.check_same_layout(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(ParamVector { values, layout: self.layout.clone() })
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, scale: f64, other: &ParamVector) -> Result<()> {
        self.check_same_layout(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// Concatenation `(self, other)`; layouts are concatenated too.
    pub fn concat(&self, other: &ParamVector) -> ParamVector {
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        ParamVector { values, layout: self.layout.concat(&other.layout) }
    }

    /// Splits after the first `n_layers` layers.
    pub fn split_layers(&self, n_layers: usize) -> Result<(ParamVector, ParamVector)> {
        if n_layers > self.layout.0.len() {
            return Err(Error::invalid("split point beyond the last layer"));
        }
        let head = Layout(self.layout.0[..n_layers].to_vec());
        let tail = Layout(self.layout.0[n_layers..].to_vec());
        let k = head.n_params();
        Ok((
            ParamVector { values: self.values[..k].to_vec(), layout: head },
            ParamVector { values: self.values[k..].to_vec(), layout: tail },
        ))
    }

    /// Short content hash (first 16 hex digits of SHA-256 over the little-endian bits).
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in &self.values {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}
