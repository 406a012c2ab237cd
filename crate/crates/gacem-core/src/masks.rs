//! Autoregressive connectivity masks.
//!
//! Natural ordering over the input dimensions; hidden-unit degrees are
//! assigned round-robin over `1..d-1`. The output block for dimension `i`
//! only reaches hidden units of degree `< i`, so the parameter heads of
//! dimension 1 carry no input connectivity at all (bias-driven) and the heads
//! of dimension `i` see exactly inputs `1..i-1` through the composite product
//! of the masks.

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::tensor::Tensor;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

/// One binary mask per trunk layer (hidden layers plus the output layer).
#[derive(Debug, Clone)]
pub struct MaskSet {
    /// Masks for input->h1, h1->h2, ... (one per hidden layer).
    pub hidden: Vec<Arc<Tensor>>,
    /// Mask for h_last -> output heads.
    pub output: Arc<Tensor>,
}

fn hidden_degrees(units: usize, dims: usize) -> Vec<usize> {
    // With d = 1 nothing may precede the single variable; degree 1 keeps the
    // masks well-formed while the output rule blocks all composite paths.
    let span = if dims > 1 { dims - 1 } else { 1 };
    (0..units).map(|u| 1 + (u % span)).collect()
}

pub fn build_masks(config: &ModelConfig) -> Result<MaskSet> {
    config.validate()?;
    let d = config.dims;
    let block = config.block_width();

    let mut hidden = Vec::with_capacity(config.hidden_sizes.len());
    // Input degrees are 1..=d in natural ordering.
    let mut prev_degrees: Vec<usize> = (1..=d).collect();
    for &units in &config.hidden_sizes {
        let degrees = hidden_degrees(units, d);
        let mut data = vec![0.0; units * prev_degrees.len()];
        for (u, &mu) in degrees.iter().enumerate() {
            for (v, &mv) in prev_degrees.iter().enumerate() {
                if mu >= mv {
                    data[u * prev_degrees.len() + v] = 1.0;
                }
            }
        }
        hidden.push(Arc::new(Tensor::new(vec![units, prev_degrees.len()], data)?));
        prev_degrees = degrees;
    }

    let last = prev_degrees;
    let out_width = d * block;
    let mut data = vec![0.0; out_width * last.len()];
    for row in 0..out_width {
        let dim = row / block + 1; // 1-based variable index of this head row
        for (v, &mv) in last.iter().enumerate() {
            if mv < dim {
                data[row * last.len() + v] = 1.0;
            }
        }
    }
    let output = Arc::new(Tensor::new(vec![out_width, last.len()], data)?);

    Ok(MaskSet { hidden, output })
}

/// Boolean product of all masks: entry `(row, j)` is true when output head
/// `row` has any path from input `j`. Test oracle for the autoregressive
/// property.
pub fn composite_connectivity(masks: &MaskSet) -> Result<Tensor> {
    let mut acc: Option<Tensor> = None;
    for m in masks.hidden.iter().map(Arc::as_ref).chain(core::iter::once(masks.output.as_ref())) {
        acc = Some(match acc {
            None => m.clone(),
            Some(prev) => bool_matmul(m, &prev)?,
        });
    }
    acc.ok_or_else(|| Error::Config(format!("mask set has no layers")))
}

fn bool_matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ar, ac) = a.dims2()?;
    let (br, bc) = b.dims2()?;
    if ac != br {
        return Err(Error::Shape(format!(
            "bool_matmul: inner dims {ac} vs {br} differ"
        )));
    }
    let mut out = vec![0.0; ar * bc];
    for i in 0..ar {
        for k in 0..ac {
            if a.data()[i * ac + k] == 0.0 {
                continue;
            }
            for j in 0..bc {
                if b.data()[k * bc + j] != 0.0 {
                    out[i * bc + j] = 1.0;
                }
            }
        }
    }
    Tensor::new(vec![ar, bc], out)
}
