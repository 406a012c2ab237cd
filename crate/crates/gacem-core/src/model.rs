//! Masked autoregressive mixture-density model over a discretized design
//! space.
//!
//! The joint factorizes as `p(x) = prod_i p(x_i | x_<i>)`; one masked forward
//! pass produces every conditional's mixture parameters (weights, means and,
//! unless the variance is fixed, scales). Discrete bin probabilities are
//! Gaussian CDF differences at the bin edges, normalized over the bins of the
//! dimension, so they are nonnegative and sum to one by construction.
//!
//! The parameter heads of dimension 1 receive no input connectivity, so an
//! extra MLP is attached to their output (a residual correction) to give the
//! first conditional more adjustable capacity than bias terms alone.

use crate::error::{Error, Result};
use crate::grid::GridMap;
use crate::masks::{build_masks, MaskSet};
use crate::math;
use crate::rng::{self, Stream};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

/// Clamp bounds for learned mixture scales.
pub const SIGMA_MIN: f64 = 1e-4;
pub const SIGMA_MAX: f64 = 2.0;

/// Floor folded into every bin probability so log-probabilities and score
/// gradients stay finite when a trained model assigns (numerically) zero mass
/// to an old buffer sample. Folded symmetrically into the normalizer, so the
/// per-dimension pmf still sums to one exactly.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub dims: usize,
    /// Mixture components per conditional.
    pub num_mixtures: usize,
    pub hidden_sizes: Vec<usize>,
    /// When set, every conditional uses this scale and the sigma head is
    /// dropped from the network entirely.
    pub fixed_sigma: Option<f64>,
    /// Hidden sizes of the extra first-unit MLP.
    pub first_unit_hidden: Vec<usize>,
}

impl ModelConfig {
    pub fn new(dims: usize) -> Result<Self> {
        let cfg = ModelConfig {
            dims,
            num_mixtures: 40,
            hidden_sizes: vec![100, 100, 100],
            fixed_sigma: Some(0.05),
            first_unit_hidden: vec![100],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::Config(String::from("dims must be at least 1")));
        }
        if self.num_mixtures == 0 {
            return Err(Error::Config(String::from("num_mixtures must be at least 1")));
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) || self.first_unit_hidden.iter().any(|&h| h == 0)
        {
            return Err(Error::Config(String::from("hidden sizes must be at least 1")));
        }
        if let Some(s) = self.fixed_sigma {
            if !(s > 0.0) {
                return Err(Error::Config(format!("fixed_sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }

    /// Heads per mixture component: weight and mean, plus a scale head in
    /// learned-variance mode.
    pub fn heads(&self) -> usize {
        if self.fixed_sigma.is_some() {
            2
        } else {
            3
        }
    }

    /// Output-layer columns per dimension.
    pub fn block_width(&self) -> usize {
        self.num_mixtures * self.heads()
    }
}

/// Mixture parameters of one conditional at one input, as plain values.
#[derive(Debug, Clone)]
pub struct MixtureParams {
    pub logits: Vec<f64>,
    /// Softmax of the logits; sums to one.
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sigmas: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Layer {
    w: Tensor,
    b: Tensor,
}

/// Head nodes of one conditional on a tape.
pub struct DimHeads {
    pub logits: NodeId,
    pub means: NodeId,
    /// `None` in fixed-variance mode.
    pub sigmas: Option<NodeId>,
}

/// One forward pass: per-dimension heads plus the parameter leaves (aligned
/// with [`DensityModel::param_tensors`]) for gradient extraction.
pub struct ForwardPass {
    pub heads: Vec<DimHeads>,
    pub param_nodes: Vec<NodeId>,
}

pub struct DensityModel {
    config: ModelConfig,
    grid: GridMap,
    masks: MaskSet,
    trunk: Vec<Layer>,
    subnet: Vec<Layer>,
}

impl DensityModel {
    /// Fresh model. Hidden weights are uniform in `[-1/sqrt(fan_in), ..]`;
    /// head weights start at zero and mean-head biases are spread uniformly
    /// over `[-1, 1]`, so the initial marginals are near-uniform and the
    /// mixture weights are exactly uniform.
    pub fn init(config: ModelConfig, grid_bins: usize, rng: &mut Stream) -> Result<Self> {
        config.validate()?;
        let masks = build_masks(&config)?;
        let grid = GridMap::new(grid_bins)?;
        let block = config.block_width();
        let k = config.num_mixtures;

        let mut trunk = Vec::new();
        let mut prev = config.dims;
        for &h in &config.hidden_sizes {
            trunk.push(random_layer(h, prev, rng));
            prev = h;
        }
        let out_width = config.dims * block;
        let mut out_bias = vec![0.0; out_width];
        let spread = mean_spread(k);
        for dim in 0..config.dims {
            for (j, &m) in spread.iter().enumerate() {
                out_bias[dim * block + k + j] = m;
            }
        }
        trunk.push(Layer {
            w: Tensor::zeros(&[out_width, prev]),
            b: Tensor::vector(out_bias),
        });

        let mut subnet = Vec::new();
        let mut prev = block;
        for &h in &config.first_unit_hidden {
            subnet.push(random_layer(h, prev, rng));
            prev = h;
        }
        subnet.push(Layer {
            w: Tensor::zeros(&[block, prev]),
            b: Tensor::vector(vec![0.0; block]),
        });

        Ok(DensityModel {
            config,
            grid,
            masks,
            trunk,
            subnet,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn grid(&self) -> &GridMap {
        &self.grid
    }

    pub fn dims(&self) -> usize {
        self.config.dims
    }

    /// Natural variable ordering.
    pub fn ordering(&self) -> Vec<usize> {
        (0..self.config.dims).collect()
    }

    pub fn param_tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for l in self.trunk.iter().chain(&self.subnet) {
            out.push(&l.w);
            out.push(&l.b);
        }
        out
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for l in self.trunk.iter_mut().chain(self.subnet.iter_mut()) {
            out.push(&mut l.w);
            out.push(&mut l.b);
        }
        out
    }

    /// Named parameter arrays for checkpointing.
    pub fn export_params(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let mut out = Vec::new();
        for (i, l) in self.trunk.iter().enumerate() {
            out.push((format!("trunk.{i}.weight"), l.w.shape().to_vec(), l.w.data().to_vec()));
            out.push((format!("trunk.{i}.bias"), l.b.shape().to_vec(), l.b.data().to_vec()));
        }
        for (i, l) in self.subnet.iter().enumerate() {
            out.push((
                format!("first_unit.{i}.weight"),
                l.w.shape().to_vec(),
                l.w.data().to_vec(),
            ));
            out.push((format!("first_unit.{i}.bias"), l.b.shape().to_vec(), l.b.data().to_vec()));
        }
        out
    }

    /// Rebuild a model from checkpointed parameter arrays.
    pub fn from_params(
        config: ModelConfig,
        grid_bins: usize,
        named: &[(String, Vec<usize>, Vec<f64>)],
    ) -> Result<Self> {
        let mut rng = rng::stream(0, rng::StreamId::ModelInit);
        let mut model = DensityModel::init(config, grid_bins, &mut rng)?;
        let expected = model.export_params();
        if expected.len() != named.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} parameter arrays, model needs {}",
                named.len(),
                expected.len()
            )));
        }
        for ((name, shape, data), (want_name, want_shape, _)) in named.iter().zip(&expected) {
            if name != want_name || shape != want_shape {
                return Err(Error::Config(format!(
                    "checkpoint entry '{name}' {shape:?} does not match expected '{want_name}' {want_shape:?}"
                )));
            }
        }
        {
            let mut params = model.param_tensors_mut();
            for (slot, (_, shape, data)) in params.iter_mut().zip(named) {
                **slot = Tensor::new(shape.clone(), data.clone())?;
            }
        }
        Ok(model)
    }

    /// Overwrite every parameter with uniform noise in `[-scale, scale]`.
    /// Produces a generic (non-degenerate) model; the masking still enforces
    /// the autoregressive property, which is what the property tests probe.
    pub fn randomize(&mut self, rng: &mut Stream, scale: f64) {
        for t in self.param_tensors_mut() {
            for v in t.data_mut() {
                *v = rng.gen_range(-scale..=scale);
            }
        }
    }

    /// Copy all parameters from another model of identical configuration.
    pub fn copy_params_from(&mut self, other: &DensityModel) -> Result<()> {
        if self.config != other.config {
            return Err(Error::Contract(String::from(
                "copy_params_from: model configurations differ",
            )));
        }
        let src: Vec<Tensor> = other.param_tensors().into_iter().cloned().collect();
        for (dst, s) in self.param_tensors_mut().into_iter().zip(src) {
            *dst = s;
        }
        Ok(())
    }

    fn check_inputs(&self, x: &Tensor) -> Result<(usize, usize)> {
        let (n, d) = x.dims2()?;
        if d != self.config.dims {
            return Err(Error::Shape(format!(
                "input has {d} columns, model expects {}",
                self.config.dims
            )));
        }
        for &v in x.data() {
            if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&v) {
                return Err(Error::Domain(format!("input {v} outside [-1, 1]")));
            }
        }
        Ok((n, d))
    }

    /// Run the trunk and first-unit subnet, producing head nodes for every
    /// conditional. `train` registers parameters as differentiable leaves.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        x_norm: &Tensor,
        train: bool,
    ) -> Result<ForwardPass> {
        self.check_inputs(x_norm)?;
        let k = self.config.num_mixtures;
        let block = self.config.block_width();

        let mut param_nodes = Vec::new();
        let mut reg = |tape: &mut Tape, t: &Tensor| -> NodeId {
            let id = if train { tape.param(t.clone()) } else { tape.leaf(t.clone()) };
            id
        };
        let trunk_nodes: Vec<(NodeId, NodeId)> = self
            .trunk
            .iter()
            .map(|l| (reg(tape, &l.w), reg(tape, &l.b)))
            .collect();
        let subnet_nodes: Vec<(NodeId, NodeId)> = self
            .subnet
            .iter()
            .map(|l| (reg(tape, &l.w), reg(tape, &l.b)))
            .collect();
        for (w, b) in trunk_nodes.iter().chain(&subnet_nodes) {
            param_nodes.push(*w);
            param_nodes.push(*b);
        }

        let mut h = tape.leaf(x_norm.clone());
        let n_hidden = self.config.hidden_sizes.len();
        for (i, (w, b)) in trunk_nodes.iter().enumerate() {
            let mask = if i < n_hidden {
                Some(self.masks.hidden[i].clone())
            } else {
                Some(self.masks.output.clone())
            };
            h = tape.linear(h, *w, *b, mask)?;
            if i < n_hidden {
                h = tape.tanh(h);
            }
        }
        let out = h;

        // First-unit MLP: residual correction on the dimension-1 block, which
        // by the masks depends only on bias terms.
        let trunk_block1 = tape.slice_cols(out, 0, block)?;
        let mut s = trunk_block1;
        let n_sub_hidden = self.config.first_unit_hidden.len();
        for (i, (w, b)) in subnet_nodes.iter().enumerate() {
            s = tape.linear(s, *w, *b, None)?;
            if i < n_sub_hidden {
                s = tape.tanh(s);
            }
        }
        let block1 = tape.add(trunk_block1, s)?;

        let mut heads = Vec::with_capacity(self.config.dims);
        for dim in 0..self.config.dims {
            let (src, base) = if dim == 0 { (block1, 0) } else { (out, dim * block) };
            let logits = tape.slice_cols(src, base, k)?;
            let means = tape.slice_cols(src, base + k, k)?;
            let sigmas = if self.config.fixed_sigma.is_some() {
                None
            } else {
                let raw = tape.slice_cols(src, base + 2 * k, k)?;
                let e = tape.exp(raw);
                Some(tape.clamp(e, SIGMA_MIN, SIGMA_MAX))
            };
            heads.push(DimHeads { logits, means, sigmas });
        }
        Ok(ForwardPass { heads, param_nodes })
    }

    /// Mixture parameters of every conditional for a batch of normalized
    /// inputs, as plain values: `result[sample][dim]`.
    pub fn mixture_params(&self, x_norm: &[Vec<f64>]) -> Result<Vec<Vec<MixtureParams>>> {
        let n = x_norm.len();
        let d = self.config.dims;
        let k = self.config.num_mixtures;
        let flat: Vec<f64> = x_norm.iter().flat_map(|r| r.iter().copied()).collect();
        let x = Tensor::new(vec![n, d], flat)?;
        let mut tape = Tape::new();
        let pass = self.forward_on_tape(&mut tape, &x, false)?;
        let mut out = vec![Vec::with_capacity(d); n];
        for heads in &pass.heads {
            let logits = tape.value(heads.logits);
            let means = tape.value(heads.means);
            let sigmas = heads.sigmas.map(|id| tape.value(id).clone());
            for (row, slot) in out.iter_mut().enumerate() {
                let lg: Vec<f64> = logits.data()[row * k..(row + 1) * k].to_vec();
                let mut weights = lg.clone();
                math::softmax_in_place(&mut weights);
                let mn: Vec<f64> = means.data()[row * k..(row + 1) * k].to_vec();
                let sg: Vec<f64> = match (&sigmas, self.config.fixed_sigma) {
                    (_, Some(fixed)) => vec![fixed; k],
                    (Some(t), None) => t.data()[row * k..(row + 1) * k].to_vec(),
                    (None, None) => unreachable!(),
                };
                slot.push(MixtureParams {
                    logits: lg,
                    weights,
                    means: mn,
                    sigmas: sg,
                });
            }
        }
        Ok(out)
    }

    /// Normalized discrete probabilities of one conditional over all bins.
    pub fn conditional_bin_pmf(&self, x_norm: &[f64], dim: usize) -> Result<Vec<f64>> {
        if dim >= self.config.dims {
            return Err(Error::Contract(format!(
                "dimension {dim} out of range for {}-dim model",
                self.config.dims
            )));
        }
        let params = self.mixture_params(core::slice::from_ref(&x_norm.to_vec()))?;
        Ok(self.pmf_from_params(&params[0][dim]))
    }

    /// Normalized bin pmf for one conditional given its mixture parameters.
    /// Shares the exact floor/normalizer arithmetic with the log-probability
    /// path so the two always agree.
    pub fn pmf_from_params(&self, params: &MixtureParams) -> Vec<f64> {
        let n_bins = self.grid.bins();
        let mut probs = vec![0.0; n_bins];
        let mut total = 0.0;
        let cdf_at = |edge: f64, mu: f64, sigma: f64| -> f64 {
            let z = (edge - mu) / sigma;
            if z <= -9.0 {
                0.0
            } else if z >= 9.0 {
                1.0
            } else {
                math::norm_cdf(z)
            }
        };
        for ((&w, &mu), &sigma) in params
            .weights
            .iter()
            .zip(&params.means)
            .zip(&params.sigmas)
        {
            if w == 0.0 {
                continue;
            }
            let lo_end = cdf_at(-1.0, mu, sigma);
            let hi_end = cdf_at(1.0, mu, sigma);
            total += w * (hi_end - lo_end);
            // Only bins within the +-9 sigma window can receive mass.
            let win_lo = self.grid.snap(mu - 9.0 * sigma) as usize;
            let win_hi = self.grid.snap(mu + 9.0 * sigma) as usize;
            let mut prev = cdf_at(self.grid.lower_edge(win_lo as u32), mu, sigma);
            for b in win_lo..=win_hi {
                let next = cdf_at(self.grid.lower_edge(b as u32 + 1), mu, sigma);
                probs[b] += w * (next - prev);
                prev = next;
            }
        }
        let z = total + n_bins as f64 * PROB_FLOOR;
        for p in probs.iter_mut() {
            *p = (*p + PROB_FLOOR) / z;
        }
        probs
    }

    /// Joint log probability nodes for a batch of grid designs, for training.
    /// Returns the `[n]` log-prob node plus the parameter leaves.
    pub fn log_prob_on_tape(
        &self,
        tape: &mut Tape,
        designs: &[Vec<u32>],
        train: bool,
    ) -> Result<(NodeId, Vec<NodeId>)> {
        if designs.is_empty() {
            return Err(Error::Contract(String::from("log_prob: empty design batch")));
        }
        let n = designs.len();
        let d = self.config.dims;
        let n_bins = self.grid.bins();
        for row in designs {
            if row.len() != d {
                return Err(Error::Shape(format!(
                    "design has {} coordinates, model expects {d}",
                    row.len()
                )));
            }
            if row.iter().any(|&b| b as usize >= n_bins) {
                return Err(Error::Contract(format!("bin index out of range in {row:?}")));
            }
        }
        let mut flat = Vec::with_capacity(n * d);
        for row in designs {
            for &b in row {
                flat.push(self.grid.center(b));
            }
        }
        let x = Tensor::new(vec![n, d], flat)?;
        let pass = self.forward_on_tape(tape, &x, train)?;

        let half_delta = self.grid.delta() * 0.5;
        let floor_z = n_bins as f64 * PROB_FLOOR;
        let mut total: Option<NodeId> = None;
        for (dim, heads) in pass.heads.iter().enumerate() {
            let centers: Arc<Vec<f64>> =
                Arc::new(designs.iter().map(|row| self.grid.center(row[dim])).collect());
            let weights = tape.softmax(heads.logits)?;

            let standardize = |tape: &mut Tape, raw: NodeId, sigmas: &Option<NodeId>| -> Result<NodeId> {
                match (sigmas, self.config.fixed_sigma) {
                    (_, Some(fixed)) => Ok(tape.scale(raw, 1.0 / fixed)),
                    (Some(s), None) => tape.div(raw, *s),
                    (None, None) => unreachable!(),
                }
            };

            let hi_raw = tape.col_shift_sub(centers.clone(), half_delta, heads.means)?;
            let hi = standardize(tape, hi_raw, &heads.sigmas)?;
            let lo_raw = tape.col_shift_sub(centers.clone(), -half_delta, heads.means)?;
            let lo = standardize(tape, lo_raw, &heads.sigmas)?;
            let cdf_hi = tape.norm_cdf(hi);
            let cdf_lo = tape.norm_cdf(lo);
            let bin_mass = tape.sub(cdf_hi, cdf_lo)?;
            let weighted = tape.mul(weights, bin_mass)?;
            let s = tape.row_sum(weighted)?;

            let dom_hi_raw = tape.const_minus(1.0, heads.means);
            let dom_hi = standardize(tape, dom_hi_raw, &heads.sigmas)?;
            let dom_lo_raw = tape.const_minus(-1.0, heads.means);
            let dom_lo = standardize(tape, dom_lo_raw, &heads.sigmas)?;
            let cdf_dhi = tape.norm_cdf(dom_hi);
            let cdf_dlo = tape.norm_cdf(dom_lo);
            let dom_mass = tape.sub(cdf_dhi, cdf_dlo)?;
            let weighted_dom = tape.mul(weights, dom_mass)?;
            let z = tape.row_sum(weighted_dom)?;

            let ln_s = tape.ln_plus(s, PROB_FLOOR)?;
            let ln_z = tape.ln_plus(z, floor_z)?;
            let logp_dim = tape.sub(ln_s, ln_z)?;
            total = Some(match total {
                None => logp_dim,
                Some(acc) => tape.add(acc, logp_dim)?,
            });
        }
        Ok((total.expect("dims >= 1"), pass.param_nodes))
    }

    /// Joint log probability values for a batch of grid designs.
    pub fn log_prob_discrete(&self, designs: &[Vec<u32>]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (lp, _) = self.log_prob_on_tape(&mut tape, designs, false)?;
        Ok(tape.value(lp).data().to_vec())
    }

    /// Like [`log_prob_discrete`] but takes normalized coordinates, which
    /// must lie exactly on the grid.
    pub fn log_prob_grid_points(&self, x_norm: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut designs = Vec::with_capacity(x_norm.len());
        for row in x_norm {
            let mut bins = Vec::with_capacity(row.len());
            for &v in row {
                bins.push(self.grid.bin_of_grid_point(v)?);
            }
            designs.push(bins);
        }
        self.log_prob_discrete(&designs)
    }

    /// Log of the raw (continuous) mixture density at normalized coordinates.
    pub fn log_prob_continuous(&self, x_norm: &[Vec<f64>]) -> Result<Vec<f64>> {
        let params = self.mixture_params(x_norm)?;
        let mut out = Vec::with_capacity(x_norm.len());
        for (row, per_dim) in x_norm.iter().zip(&params) {
            let mut lp = 0.0;
            for (dim, p) in per_dim.iter().enumerate() {
                let mut terms = Vec::with_capacity(p.weights.len());
                for ((&w, &mu), &sigma) in p.weights.iter().zip(&p.means).zip(&p.sigmas) {
                    if w == 0.0 {
                        continue;
                    }
                    terms.push(math::ln(w) + math::gaussian_log_pdf(row[dim], mu, sigma)?);
                }
                lp += math::log_sum_exp(&terms);
            }
            out.push(lp);
        }
        Ok(out)
    }

    /// Ancestral sampling: dimension by dimension, compute the discrete bin
    /// probabilities and draw a categorical outcome. Deterministic given the
    /// stream state.
    pub fn sample_bins(&self, n: usize, rng: &mut Stream) -> Result<Vec<Vec<u32>>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let d = self.config.dims;
        let k = self.config.num_mixtures;
        let mut bins = vec![vec![0u32; d]; n];
        let mut coords = vec![0.0f64; n * d];
        for dim in 0..d {
            let x = Tensor::new(vec![n, d], coords.clone())?;
            let mut tape = Tape::new();
            let pass = self.forward_on_tape(&mut tape, &x, false)?;
            let heads = &pass.heads[dim];
            let logits = tape.value(heads.logits).data();
            let means = tape.value(heads.means).data();
            let sigma_vals = heads.sigmas.map(|id| tape.value(id).data().to_vec());
            for row in 0..n {
                let mut weights: Vec<f64> = logits[row * k..(row + 1) * k].to_vec();
                math::softmax_in_place(&mut weights);
                let sigmas: Vec<f64> = match (&sigma_vals, self.config.fixed_sigma) {
                    (_, Some(fixed)) => vec![fixed; k],
                    (Some(sv), None) => sv[row * k..(row + 1) * k].to_vec(),
                    (None, None) => unreachable!(),
                };
                let params = MixtureParams {
                    logits: Vec::new(),
                    weights,
                    means: means[row * k..(row + 1) * k].to_vec(),
                    sigmas,
                };
                let pmf = self.pmf_from_params(&params);
                let b = rng::categorical(rng, &pmf) as u32;
                bins[row][dim] = b;
                coords[row * d + dim] = self.grid.center(b);
            }
        }
        Ok(bins)
    }

    /// Monte Carlo entropy estimate in nats per dimension:
    /// `-(1/n) sum log p(x_i) / d` over `x_i ~ model`.
    pub fn entropy_estimate(&self, n: usize, rng: &mut Stream) -> Result<f64> {
        if n == 0 {
            return Err(Error::Contract(String::from("entropy estimate needs n >= 1")));
        }
        let samples = self.sample_bins(n, rng)?;
        let lps = self.log_prob_discrete(&samples)?;
        let mean: f64 = lps.iter().sum::<f64>() / n as f64;
        Ok(-mean / self.config.dims as f64)
    }
}

fn random_layer(out_dim: usize, in_dim: usize, rng: &mut Stream) -> Layer {
    let s = 1.0 / math::sqrt(in_dim as f64);
    let data: Vec<f64> = (0..out_dim * in_dim).map(|_| rng.gen_range(-s..=s)).collect();
    Layer {
        w: Tensor::new(vec![out_dim, in_dim], data).unwrap(),
        b: Tensor::vector(vec![0.0; out_dim]),
    }
}

/// Mean-head biases: K values spread uniformly over [-1, 1].
fn mean_spread(k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.0];
    }
    (0..k)
        .map(|i| -1.0 + 2.0 * i as f64 / (k as f64 - 1.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamId};

    fn small_config(dims: usize) -> ModelConfig {
        ModelConfig {
            dims,
            num_mixtures: 3,
            hidden_sizes: vec![8, 8],
            fixed_sigma: Some(0.05),
            first_unit_hidden: vec![4],
        }
    }

    #[test]
    fn fresh_model_has_uniform_mixture_weights() {
        let mut rng = stream(1, StreamId::ModelInit);
        let model = DensityModel::init(ModelConfig::new(3).unwrap(), 100, &mut rng).unwrap();
        let params = model.mixture_params(&[vec![0.3, -0.5, 0.9]]).unwrap();
        for dim_params in &params[0] {
            for &w in &dim_params.weights {
                assert!((w - 1.0 / 40.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn fixed_sigma_is_returned_for_every_component() {
        let mut rng = stream(2, StreamId::ModelInit);
        let mut model = DensityModel::init(small_config(2), 50, &mut rng).unwrap();
        model.randomize(&mut rng, 0.8);
        let params = model
            .mixture_params(&[vec![0.1, -0.2], vec![-0.9, 0.4]])
            .unwrap();
        for row in &params {
            for p in row {
                assert!(p.sigmas.iter().all(|&s| s == 0.05));
            }
        }
    }

    #[test]
    fn learned_sigma_is_clamped() {
        let mut cfg = small_config(2);
        cfg.fixed_sigma = None;
        let mut rng = stream(3, StreamId::ModelInit);
        let mut model = DensityModel::init(cfg, 50, &mut rng).unwrap();
        model.randomize(&mut rng, 5.0); // exp of +-5 exceeds the clamp range
        let params = model.mixture_params(&[vec![0.0, 0.0]]).unwrap();
        for p in &params[0] {
            for &s in &p.sigmas {
                assert!((SIGMA_MIN..=SIGMA_MAX).contains(&s), "sigma {s}");
            }
        }
    }

    #[test]
    fn input_outside_domain_is_rejected() {
        let mut rng = stream(4, StreamId::ModelInit);
        let model = DensityModel::init(small_config(2), 50, &mut rng).unwrap();
        let err = model.mixture_params(&[vec![0.0, 1.5]]);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn off_grid_log_prob_is_contract_error() {
        let mut rng = stream(5, StreamId::ModelInit);
        let model = DensityModel::init(small_config(1), 100, &mut rng).unwrap();
        assert!(matches!(
            model.log_prob_grid_points(&[vec![0.0101]]),
            Err(Error::Contract(_))
        ));
        // exact centers pass
        let c = model.grid().center(42);
        assert!(model.log_prob_grid_points(&[vec![c]]).is_ok());
    }

    #[test]
    fn conditional_pmf_sums_to_one() {
        let mut rng = stream(6, StreamId::ModelInit);
        let mut model = DensityModel::init(small_config(3), 100, &mut rng).unwrap();
        model.randomize(&mut rng, 1.0);
        for dim in 0..3 {
            let pmf = model.conditional_bin_pmf(&[0.105, -0.315, 0.805], dim).unwrap();
            let sum: f64 = pmf.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6, "dim {dim}: sum {sum}");
            assert!(pmf.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn pmf_matches_log_prob_discrete() {
        let mut rng = stream(7, StreamId::ModelInit);
        let mut model = DensityModel::init(small_config(1), 100, &mut rng).unwrap();
        model.randomize(&mut rng, 0.7);
        let pmf = model.conditional_bin_pmf(&[0.0], 0).unwrap();
        for b in [0u32, 17, 50, 99] {
            let lp = model.log_prob_discrete(&[vec![b]]).unwrap()[0];
            assert!(
                (math::ln(pmf[b as usize]) - lp).abs() < 1e-9,
                "bin {b}: {} vs {lp}",
                math::ln(pmf[b as usize])
            );
        }
    }

    #[test]
    fn near_flat_mixture_is_close_to_uniform() {
        // K=1 with sigma far wider than the domain: every bin within 2% of 1/N.
        let cfg = ModelConfig {
            dims: 1,
            num_mixtures: 1,
            hidden_sizes: vec![4],
            fixed_sigma: Some(10.0),
            first_unit_hidden: vec![4],
        };
        let mut rng = stream(8, StreamId::ModelInit);
        let model = DensityModel::init(cfg, 100, &mut rng).unwrap();
        let pmf = model.conditional_bin_pmf(&[0.0], 0).unwrap();
        for &p in &pmf {
            assert!((p - 0.01).abs() < 0.0002, "p={p}");
        }
    }

    #[test]
    fn concentrated_mixture_owns_its_bin() {
        // K=1, mean at a bin center, tiny sigma: that bin carries > 0.999.
        let cfg = ModelConfig {
            dims: 1,
            num_mixtures: 1,
            hidden_sizes: vec![4],
            fixed_sigma: Some(1e-4),
            first_unit_hidden: vec![4],
        };
        let mut rng = stream(9, StreamId::ModelInit);
        let model = DensityModel::init(cfg, 100, &mut rng).unwrap();
        // mean-head bias is 0 for K=1, which is not a bin center for N=100;
        // steer it onto the center of bin 50 through from_params.
        let mut named = model.export_params();
        let target = model.grid().center(50);
        for (name, _, data) in named.iter_mut() {
            if name == "trunk.1.bias" {
                data[1] = target; // block layout: [logit, mean]
            }
        }
        let model = DensityModel::from_params(model.config().clone(), 100, &named).unwrap();
        let pmf = model.conditional_bin_pmf(&[target], 0).unwrap();
        assert!(pmf[50] > 0.999, "p={}", pmf[50]);
    }

    #[test]
    fn sampling_is_deterministic_and_on_grid() {
        let mut rng = stream(10, StreamId::ModelInit);
        let model = DensityModel::init(small_config(2), 100, &mut rng).unwrap();
        let mut s1 = stream(99, StreamId::ModelSampling);
        let mut s2 = stream(99, StreamId::ModelSampling);
        let a = model.sample_bins(64, &mut s1).unwrap();
        let b = model.sample_bins(64, &mut s2).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|row| row.iter().all(|&x| (x as usize) < 100)));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = stream(11, StreamId::ModelInit);
        let mut model = DensityModel::init(small_config(2), 100, &mut rng).unwrap();
        model.randomize(&mut rng, 0.9);
        let named = model.export_params();
        let restored = DensityModel::from_params(model.config().clone(), 100, &named).unwrap();
        for (a, b) in model.param_tensors().iter().zip(restored.param_tensors()) {
            assert_eq!(a.data(), b.data());
        }
        let lp_a = model.log_prob_discrete(&[vec![10, 20]]).unwrap();
        let lp_b = restored.log_prob_discrete(&[vec![10, 20]]).unwrap();
        assert_eq!(lp_a[0].to_bits(), lp_b[0].to_bits());
    }
}
