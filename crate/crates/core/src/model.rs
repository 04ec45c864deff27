//! Data model: multiplex graph and attribute series with observation masks,
//! the latent state of the joint factor model, and its log density.
//!
//! Every latent function is stored as a contiguous run of `T` values
//! (time-major within the function), so one Gibbs block reads and writes a
//! single slice.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernel::{KernelParams, PriorFactor, TimeGrid};

/// One cell of the adjacency tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum EdgeValue {
    Absent = 0,
    Present = 1,
    Unknown = 2,
}

impl EdgeValue {
    pub fn from_bool(present: bool) -> Self {
        if present {
            EdgeValue::Present
        } else {
            EdgeValue::Absent
        }
    }

    pub fn is_observed(self) -> bool {
        self != EdgeValue::Unknown
    }

    /// `a − 1/2` for observed cells.
    pub fn centered(self) -> Option<f64> {
        match self {
            EdgeValue::Absent => Some(-0.5),
            EdgeValue::Present => Some(0.5),
            EdgeValue::Unknown => None,
        }
    }
}

/// Index of the unordered pair `{j, k}` (`j != k`) among the `n(n-1)/2` pairs,
/// in lexicographic order of `(min, max)`.
pub fn pair_index(num_nodes: usize, j: usize, k: usize) -> usize {
    let (a, b) = if j < k { (j, k) } else { (k, j) };
    a * (2 * num_nodes - a - 1) / 2 + (b - a - 1)
}

/// Undirected binary multiplex graph observed on a time grid.
///
/// Only pairs `j < j'` are stored; reads of `(j', j)` mirror `(j, j')` and
/// self-pairs are rejected. Cell layout is `((pair · L) + layer) · T + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplexGraphSeries {
    num_nodes: usize,
    num_layers: usize,
    grid: TimeGrid,
    pairs: Vec<(usize, usize)>,
    values: Vec<EdgeValue>,
}

impl MultiplexGraphSeries {
    /// A graph with every cell unobserved.
    pub fn unobserved(num_nodes: usize, num_layers: usize, grid: TimeGrid) -> Result<Self> {
        if num_nodes < 2 || num_layers == 0 {
            return Err(Error::InvalidInput(format!(
                "graph needs at least 2 nodes and 1 layer, got {num_nodes} nodes, {num_layers} layers"
            )));
        }
        let mut pairs = Vec::with_capacity(num_nodes * (num_nodes - 1) / 2);
        for a in 0..num_nodes {
            for b in a + 1..num_nodes {
                pairs.push((a, b));
            }
        }
        let cells = pairs.len() * num_layers * grid.len();
        Ok(MultiplexGraphSeries {
            num_nodes,
            num_layers,
            grid,
            pairs,
            values: vec![EdgeValue::Unknown; cells],
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn num_times(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    /// Nodes `(j, j')`, `j < j'`, of a pair index.
    pub fn pair_nodes(&self, pair: usize) -> (usize, usize) {
        self.pairs[pair]
    }

    pub fn cell_index(&self, j: usize, k: usize, layer: usize, t: usize) -> Result<usize> {
        if j == k {
            return Err(Error::IndexOutOfRange(format!("self-pair ({j}, {k})")));
        }
        if j >= self.num_nodes || k >= self.num_nodes {
            return Err(Error::IndexOutOfRange(format!(
                "node {} with {} nodes",
                j.max(k),
                self.num_nodes
            )));
        }
        if layer >= self.num_layers {
            return Err(Error::IndexOutOfRange(format!(
                "layer {layer} with {} layers",
                self.num_layers
            )));
        }
        if t >= self.grid.len() {
            return Err(Error::IndexOutOfRange(format!(
                "time index {t} with {} times",
                self.grid.len()
            )));
        }
        Ok(self.cell_at(pair_index(self.num_nodes, j, k), layer, t))
    }

    #[inline]
    pub(crate) fn cell_at(&self, pair: usize, layer: usize, t: usize) -> usize {
        (pair * self.num_layers + layer) * self.grid.len() + t
    }

    /// Decomposes a cell index into `(pair, layer, t)`.
    pub fn cell_coords(&self, cell: usize) -> (usize, usize, usize) {
        let t = cell % self.grid.len();
        let rest = cell / self.grid.len();
        (rest / self.num_layers, rest % self.num_layers, t)
    }

    pub fn get(&self, j: usize, k: usize, layer: usize, t: usize) -> Result<EdgeValue> {
        Ok(self.values[self.cell_index(j, k, layer, t)?])
    }

    pub fn set(&mut self, j: usize, k: usize, layer: usize, t: usize, v: EdgeValue) -> Result<()> {
        let c = self.cell_index(j, k, layer, t)?;
        self.values[c] = v;
        Ok(())
    }

    #[inline]
    pub fn value(&self, cell: usize) -> EdgeValue {
        self.values[cell]
    }

    pub(crate) fn set_value(&mut self, cell: usize, v: EdgeValue) {
        self.values[cell] = v;
    }

    #[inline]
    pub fn is_observed(&self, cell: usize) -> bool {
        self.values[cell].is_observed()
    }

    pub fn values(&self) -> &[EdgeValue] {
        &self.values
    }

    pub fn observed_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_observed())
            .map(|(i, _)| i)
    }

    pub fn unobserved_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_observed())
            .map(|(i, _)| i)
    }

    pub fn observed_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_observed()).count()
    }

    /// Copy restricted to the given layers, in the given order.
    pub fn select_layers(&self, layers: &[usize]) -> Result<Self> {
        let mut out = MultiplexGraphSeries::unobserved(self.num_nodes, layers.len(), self.grid.clone())?;
        for pair in 0..self.num_pairs() {
            for (new_l, &old_l) in layers.iter().enumerate() {
                if old_l >= self.num_layers {
                    return Err(Error::IndexOutOfRange(format!("layer {old_l}")));
                }
                for t in 0..self.grid.len() {
                    let v = self.values[self.cell_at(pair, old_l, t)];
                    let c = out.cell_at(pair, new_l, t);
                    out.values[c] = v;
                }
            }
        }
        Ok(out)
    }
}

/// Real-valued nodal attributes `x_{j,k}(t)` with an observation mask.
/// Layout is `((j · m) + k) · T + t`.
#[derive(Debug, Clone)]
pub struct AttributeSeries {
    num_nodes: usize,
    num_attrs: usize,
    grid: TimeGrid,
    values: Vec<f64>,
    mask: Vec<bool>,
}

/// Same shape, grid and mask, and bitwise-equal observed values; the
/// placeholders in unobserved cells are ignored.
impl PartialEq for AttributeSeries {
    fn eq(&self, other: &Self) -> bool {
        self.num_nodes == other.num_nodes
            && self.num_attrs == other.num_attrs
            && self.grid == other.grid
            && self.mask == other.mask
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.mask)
                .all(|((a, b), &m)| !m || a.to_bits() == b.to_bits())
    }
}

impl AttributeSeries {
    pub fn unobserved(num_nodes: usize, num_attrs: usize, grid: TimeGrid) -> Self {
        let n = num_nodes * num_attrs * grid.len();
        AttributeSeries {
            num_nodes,
            num_attrs,
            grid,
            values: vec![f64::NAN; n],
            mask: vec![false; n],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_attrs(&self) -> usize {
        self.num_attrs
    }

    pub fn num_times(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn cell_index(&self, j: usize, k: usize, t: usize) -> Result<usize> {
        if j >= self.num_nodes || k >= self.num_attrs || t >= self.grid.len() {
            return Err(Error::IndexOutOfRange(format!(
                "attribute cell ({j}, {k}, {t}) outside ({}, {}, {})",
                self.num_nodes,
                self.num_attrs,
                self.grid.len()
            )));
        }
        Ok(self.cell_at(j, k, t))
    }

    #[inline]
    pub(crate) fn cell_at(&self, j: usize, k: usize, t: usize) -> usize {
        (j * self.num_attrs + k) * self.grid.len() + t
    }

    pub fn cell_coords(&self, cell: usize) -> (usize, usize, usize) {
        let t = cell % self.grid.len();
        let rest = cell / self.grid.len();
        (rest / self.num_attrs, rest % self.num_attrs, t)
    }

    /// Observed value, `None` when masked.
    pub fn get(&self, j: usize, k: usize, t: usize) -> Result<Option<f64>> {
        let c = self.cell_index(j, k, t)?;
        Ok(self.mask[c].then_some(self.values[c]))
    }

    pub fn set(&mut self, j: usize, k: usize, t: usize, value: Option<f64>) -> Result<()> {
        let c = self.cell_index(j, k, t)?;
        self.set_cell(c, value)
    }

    pub(crate) fn set_cell(&mut self, c: usize, value: Option<f64>) -> Result<()> {
        match value {
            Some(v) if !v.is_finite() => {
                return Err(Error::InvalidInput(format!("non-finite attribute value {v}")))
            }
            Some(v) => {
                self.values[c] = v;
                self.mask[c] = true;
            }
            None => {
                self.values[c] = f64::NAN;
                self.mask[c] = false;
            }
        }
        Ok(())
    }

    #[inline]
    pub fn is_observed(&self, cell: usize) -> bool {
        self.mask[cell]
    }

    #[inline]
    pub fn raw(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn observed_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i)
    }

    pub fn unobserved_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, m)| !**m).map(|(i, _)| i)
    }

    /// Copy restricted to the given attributes, in the given order.
    pub fn select_attrs(&self, attrs: &[usize]) -> Result<Self> {
        let mut out = AttributeSeries::unobserved(self.num_nodes, attrs.len(), self.grid.clone());
        for j in 0..self.num_nodes {
            for (nk, &k) in attrs.iter().enumerate() {
                for t in 0..self.grid.len() {
                    let v = self.get(j, k, t)?;
                    out.set(j, nk, t, v)?;
                }
            }
        }
        Ok(out)
    }
}

/// Model and run settings for one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// R_ζ, rank of the shared factors.
    pub shared_rank: usize,
    /// R, rank of the layer-specific factors and attribute loadings.
    pub layer_rank: usize,
    /// F, number of arc-cosine layers in every prior kernel.
    pub depth: usize,
    /// Candidate `(σ_c², σ_g²)` pairs for the kernel hyperparameter update.
    pub hyper_grid: Vec<(f64, f64)>,
    /// Starting `(σ_c², σ_g²)` for every family.
    pub initial_beta: (f64, f64),
    pub a_sigma: f64,
    pub b_sigma: f64,
    /// Diagonal jitter for prior covariances, relative to their mean diagonal.
    pub jitter: f64,
    pub burn_in: usize,
    /// Q, number of retained draws.
    pub keep: usize,
    pub thin: usize,
    pub seed: u64,
    /// Share ξ between graph and attributes (`false` fits the two models separately).
    pub joint_mode: bool,
}

impl ModelConfig {
    /// `{0.01, 0.02, ..., 0.1}²`.
    pub fn default_hyper_grid() -> Vec<(f64, f64)> {
        let axis: Vec<f64> = (1..=10).map(|i| i as f64 / 100.0).collect();
        let mut grid = Vec::with_capacity(100);
        for &c in &axis {
            for &g in &axis {
                grid.push((c, g));
            }
        }
        grid
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.shared_rank == 0 || self.layer_rank == 0 {
            return bad("ranks must be at least 1");
        }
        if self.keep == 0 {
            return bad("keep must be at least 1");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if self.hyper_grid.is_empty() {
            return bad("hyperparameter grid must be nonempty");
        }
        for &(c, g) in self.hyper_grid.iter().chain(std::iter::once(&self.initial_beta)) {
            KernelParams::new(c, g, self.depth)?;
        }
        if !(self.a_sigma > 0.0 && self.b_sigma > 0.0) {
            return bad("inverse-gamma hyperparameters must be positive");
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad("jitter must be nonnegative");
        }
        Ok(())
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            shared_rank: 4,
            layer_rank: 4,
            depth: 1,
            hyper_grid: ModelConfig::default_hyper_grid(),
            initial_beta: (0.05, 0.05),
            a_sigma: 1.0,
            b_sigma: 0.01,
            jitter: 1e-8,
            burn_in: 5000,
            keep: 10000,
            thin: 1,
            seed: 0,
            joint_mode: true,
        }
    }
}

/// Sizes of every latent block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub nodes: usize,
    pub layers: usize,
    pub attrs: usize,
    pub times: usize,
    pub shared_rank: usize,
    pub layer_rank: usize,
}

impl Dims {
    pub fn zeta_index(&self, j: usize, r: usize) -> usize {
        (j * self.shared_rank + r) * self.times
    }

    pub fn xi_index(&self, j: usize, l: usize, r: usize) -> usize {
        ((j * self.layers + l) * self.layer_rank + r) * self.times
    }

    pub fn alpha_index(&self, k: usize, l: usize, r: usize) -> usize {
        ((k * self.layers + l) * self.layer_rank + r) * self.times
    }

    pub fn eta_index(&self, k: usize) -> usize {
        k * self.times
    }
}

/// Latent-function family sharing one kernel hyperparameter pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Mu,
    Eta,
    Zeta,
    Xi,
    Alpha,
    /// Attribute-side factor copy used when graph and attributes are fit separately.
    XiAttr,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Mu,
        Family::Eta,
        Family::Zeta,
        Family::Xi,
        Family::Alpha,
        Family::XiAttr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Mu => "mu",
            Family::Eta => "eta",
            Family::Zeta => "zeta",
            Family::Xi => "xi",
            Family::Alpha => "alpha",
            Family::XiAttr => "xi_attr",
        }
    }
}

/// Kernel hyperparameters per family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyParams {
    pub mu: KernelParams,
    pub eta: KernelParams,
    pub zeta: KernelParams,
    pub xi: KernelParams,
    pub alpha: KernelParams,
    pub xi_attr: Option<KernelParams>,
}

impl FamilyParams {
    pub fn uniform(p: KernelParams, joint: bool) -> Self {
        FamilyParams {
            mu: p,
            eta: p,
            zeta: p,
            xi: p,
            alpha: p,
            xi_attr: (!joint).then_some(p),
        }
    }

    pub fn get(&self, f: Family) -> Option<&KernelParams> {
        match f {
            Family::Mu => Some(&self.mu),
            Family::Eta => Some(&self.eta),
            Family::Zeta => Some(&self.zeta),
            Family::Xi => Some(&self.xi),
            Family::Alpha => Some(&self.alpha),
            Family::XiAttr => self.xi_attr.as_ref(),
        }
    }

    pub fn set(&mut self, f: Family, p: KernelParams) {
        match f {
            Family::Mu => self.mu = p,
            Family::Eta => self.eta = p,
            Family::Zeta => self.zeta = p,
            Family::Xi => self.xi = p,
            Family::Alpha => self.alpha = p,
            Family::XiAttr => self.xi_attr = Some(p),
        }
    }
}

/// Values of every latent function on the time grid, plus the idiosyncratic
/// variances and kernel hyperparameters. One posterior draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Latents {
    pub dims: Dims,
    /// μ(t_i), length T.
    pub mu: Vec<f64>,
    /// η_k(t_i), `m` functions.
    pub eta: Vec<f64>,
    /// ζ_{j,r}(t_i), `J · R_ζ` functions.
    pub zeta: Vec<f64>,
    /// ξ_{j,l,r}(t_i), `J · L · R` functions.
    pub xi: Vec<f64>,
    /// α_{k,l,r}(t_i), `m · L · R` functions.
    pub alpha: Vec<f64>,
    /// Separate attribute-side factors; `None` in joint mode.
    pub xi_attr: Option<Vec<f64>>,
    /// σ_k², length m.
    pub sigma2: Vec<f64>,
    pub betas: FamilyParams,
}

impl Latents {
    pub fn zeros(dims: Dims, joint: bool, beta: KernelParams) -> Self {
        let t = dims.times;
        let xi_len = dims.nodes * dims.layers * dims.layer_rank * t;
        Latents {
            dims,
            mu: vec![0.0; t],
            eta: vec![0.0; dims.attrs * t],
            zeta: vec![0.0; dims.nodes * dims.shared_rank * t],
            xi: vec![0.0; xi_len],
            alpha: vec![0.0; dims.attrs * dims.layers * dims.layer_rank * t],
            xi_attr: (!joint).then(|| vec![0.0; xi_len]),
            sigma2: vec![1.0; dims.attrs],
            betas: FamilyParams::uniform(beta, joint),
        }
    }

    pub fn is_joint(&self) -> bool {
        self.xi_attr.is_none()
    }

    /// Factors entering the attribute mean.
    #[inline]
    pub fn attr_xi(&self) -> &[f64] {
        self.xi_attr.as_deref().unwrap_or(&self.xi)
    }

    pub fn family(&self, f: Family) -> Option<&[f64]> {
        match f {
            Family::Mu => Some(&self.mu),
            Family::Eta => Some(&self.eta),
            Family::Zeta => Some(&self.zeta),
            Family::Xi => Some(&self.xi),
            Family::Alpha => Some(&self.alpha),
            Family::XiAttr => self.xi_attr.as_deref(),
        }
    }

    pub fn family_mut(&mut self, f: Family) -> Option<&mut Vec<f64>> {
        match f {
            Family::Mu => Some(&mut self.mu),
            Family::Eta => Some(&mut self.eta),
            Family::Zeta => Some(&mut self.zeta),
            Family::Xi => Some(&mut self.xi),
            Family::Alpha => Some(&mut self.alpha),
            Family::XiAttr => self.xi_attr.as_mut(),
        }
    }

    fn check_time(&self, t: usize) -> Result<()> {
        if t >= self.dims.times {
            return Err(Error::IndexOutOfRange(format!(
                "time index {t} with {} times",
                self.dims.times
            )));
        }
        Ok(())
    }

    /// `ψ = μ(t) + ζ_j(t)ᵀζ_{j'}(t) + ξ_{j,l}(t)ᵀξ_{j',l}(t)`.
    pub fn edge_linear_predictor(&self, j: usize, k: usize, layer: usize, t: usize) -> Result<f64> {
        let d = &self.dims;
        if j == k || j >= d.nodes || k >= d.nodes || layer >= d.layers {
            return Err(Error::IndexOutOfRange(format!(
                "edge ({j}, {k}, layer {layer}) with {} nodes and {} layers",
                d.nodes, d.layers
            )));
        }
        self.check_time(t)?;
        Ok(self.psi(j, k, layer, t))
    }

    #[inline]
    pub(crate) fn psi(&self, j: usize, k: usize, layer: usize, t: usize) -> f64 {
        self.mu[t] + self.zeta_dot(j, k, t) + self.xi_dot(j, k, layer, t)
    }

    #[inline]
    pub(crate) fn zeta_dot(&self, j: usize, k: usize, t: usize) -> f64 {
        let d = &self.dims;
        (0..d.shared_rank)
            .map(|r| self.zeta[d.zeta_index(j, r) + t] * self.zeta[d.zeta_index(k, r) + t])
            .sum()
    }

    #[inline]
    pub(crate) fn xi_dot(&self, j: usize, k: usize, layer: usize, t: usize) -> f64 {
        let d = &self.dims;
        (0..d.layer_rank)
            .map(|r| self.xi[d.xi_index(j, layer, r) + t] * self.xi[d.xi_index(k, layer, r) + t])
            .sum()
    }

    /// `η_k(t) + Σ_l ξ_{j,l}(t)ᵀ α_{k,l}(t)`, using the attribute-side factors
    /// when the models are fit separately.
    pub fn attribute_mean(&self, j: usize, k: usize, t: usize) -> Result<f64> {
        let d = &self.dims;
        if j >= d.nodes || k >= d.attrs {
            return Err(Error::IndexOutOfRange(format!(
                "attribute ({j}, {k}) with {} nodes and {} attributes",
                d.nodes, d.attrs
            )));
        }
        self.check_time(t)?;
        Ok(self.attr_mean(j, k, t))
    }

    #[inline]
    pub(crate) fn attr_mean(&self, j: usize, k: usize, t: usize) -> f64 {
        self.eta[self.dims.eta_index(k) + t] + self.loading_sum(j, k, t)
    }

    /// `s_{j,k}(t) = Σ_l ξ_{j,l}(t)ᵀ α_{k,l}(t)`.
    #[inline]
    pub(crate) fn loading_sum(&self, j: usize, k: usize, t: usize) -> f64 {
        let d = &self.dims;
        let xi = self.attr_xi();
        let mut s = 0.0;
        for l in 0..d.layers {
            for r in 0..d.layer_rank {
                s += xi[d.xi_index(j, l, r) + t] * self.alpha[d.alpha_index(k, l, r) + t];
            }
        }
        s
    }
}

/// Full Gibbs state: latents plus the Pólya-Gamma auxiliaries.
///
/// `omega` is indexed like the graph cells; it is positive exactly on observed
/// cells and zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub latents: Latents,
    pub omega: Vec<f64>,
}

impl LatentState {
    pub fn new(latents: Latents, graph: &MultiplexGraphSeries) -> Self {
        let omega = graph
            .values()
            .iter()
            .map(|v| if v.is_observed() { 0.25 } else { 0.0 })
            .collect();
        LatentState { latents, omega }
    }

    /// Checks that ω is positive exactly on the observed cells of `graph`.
    pub fn check_omega(&self, graph: &MultiplexGraphSeries) -> Result<()> {
        if self.omega.len() != graph.num_cells() {
            return Err(Error::ShapeMismatch("omega length differs from graph cells".into()));
        }
        for (c, &w) in self.omega.iter().enumerate() {
            let ok = if graph.is_observed(c) { w > 0.0 && w.is_finite() } else { w == 0.0 };
            if !ok {
                return Err(Error::InvalidInput(format!("omega[{c}] = {w} inconsistent with mask")));
            }
        }
        Ok(())
    }

    pub fn sigma2_valid(&self) -> bool {
        self.latents.sigma2.iter().all(|s| *s > 0.0 && s.is_finite())
    }
}

/// Factorized priors for each family under the current hyperparameters.
#[derive(Debug, Clone)]
pub struct FamilyPriors {
    pub mu: PriorFactor,
    pub eta: PriorFactor,
    pub zeta: PriorFactor,
    pub xi: PriorFactor,
    pub alpha: PriorFactor,
    pub xi_attr: Option<PriorFactor>,
}

impl FamilyPriors {
    pub fn build(grid: &TimeGrid, betas: &FamilyParams, rel_jitter: f64) -> Result<Self> {
        Ok(FamilyPriors {
            mu: PriorFactor::new(grid, &betas.mu, rel_jitter)?,
            eta: PriorFactor::new(grid, &betas.eta, rel_jitter)?,
            zeta: PriorFactor::new(grid, &betas.zeta, rel_jitter)?,
            xi: PriorFactor::new(grid, &betas.xi, rel_jitter)?,
            alpha: PriorFactor::new(grid, &betas.alpha, rel_jitter)?,
            xi_attr: betas
                .xi_attr
                .as_ref()
                .map(|p| PriorFactor::new(grid, p, rel_jitter))
                .transpose()?,
        })
    }

    pub fn get(&self, f: Family) -> Option<&PriorFactor> {
        match f {
            Family::Mu => Some(&self.mu),
            Family::Eta => Some(&self.eta),
            Family::Zeta => Some(&self.zeta),
            Family::Xi => Some(&self.xi),
            Family::Alpha => Some(&self.alpha),
            Family::XiAttr => self.xi_attr.as_ref(),
        }
    }

    pub fn set(&mut self, f: Family, p: PriorFactor) {
        match f {
            Family::Mu => self.mu = p,
            Family::Eta => self.eta = p,
            Family::Zeta => self.zeta = p,
            Family::Xi => self.xi = p,
            Family::Alpha => self.alpha = p,
            Family::XiAttr => self.xi_attr = Some(p),
        }
    }
}

pub(crate) fn check_dims(
    latents: &Latents,
    graph: &MultiplexGraphSeries,
    attrs: &AttributeSeries,
) -> Result<()> {
    let d = &latents.dims;
    if graph.grid() != attrs.grid() {
        return Err(Error::GridMismatch("graph and attribute grids differ".into()));
    }
    if d.nodes != graph.num_nodes()
        || d.nodes != attrs.num_nodes()
        || d.layers != graph.num_layers()
        || d.attrs != attrs.num_attrs()
        || d.times != graph.num_times()
    {
        return Err(Error::ShapeMismatch(format!(
            "state dims {d:?} do not match data (J={}, L={}, m={}, T={})",
            graph.num_nodes(),
            graph.num_layers(),
            attrs.num_attrs(),
            graph.num_times()
        )));
    }
    Ok(())
}

/// Σ over observed edge cells of `(a − 1/2) ψ − ω ψ² / 2`.
pub fn edge_log_lik(state: &LatentState, graph: &MultiplexGraphSeries) -> f64 {
    let lat = &state.latents;
    let mut total = 0.0;
    for cell in graph.observed_cells() {
        let (pair, layer, t) = graph.cell_coords(cell);
        let (j, k) = graph.pair_nodes(pair);
        let a = graph.value(cell).centered().unwrap_or(0.0);
        let psi = lat.psi(j, k, layer, t);
        total += a * psi - 0.5 * state.omega[cell] * psi * psi;
    }
    total
}

/// Σ over observed attribute cells of `log N(x | mean, σ_k²)`.
pub fn attr_log_lik(latents: &Latents, attrs: &AttributeSeries) -> f64 {
    let mut total = 0.0;
    for cell in attrs.observed_cells() {
        let (j, k, t) = attrs.cell_coords(cell);
        let s2 = latents.sigma2[k];
        let r = attrs.raw(cell) - latents.attr_mean(j, k, t);
        total += -0.5 * (2.0 * PI * s2).ln() - r * r / (2.0 * s2);
    }
    total
}

/// Gaussian process log priors of every latent function plus the
/// inverse-gamma log priors of the σ_k².
pub fn log_prior(latents: &Latents, priors: &FamilyPriors, a_sigma: f64, b_sigma: f64) -> f64 {
    let t = latents.dims.times;
    let mut total = 0.0;
    for f in Family::ALL {
        if let (Some(values), Some(prior)) = (latents.family(f), priors.get(f)) {
            total += values.chunks(t).map(|v| prior.log_density(v)).sum::<f64>();
        }
    }
    let log_norm = a_sigma * b_sigma.ln() - libm::lgamma(a_sigma);
    for &s2 in &latents.sigma2 {
        total += log_norm - (a_sigma + 1.0) * s2.ln() - b_sigma / s2;
    }
    total
}

/// Log of the PG-augmented joint density up to a constant, with the ω prior
/// (the PG(1, 0) density) omitted as constant.
pub fn log_posterior_with(
    state: &LatentState,
    graph: &MultiplexGraphSeries,
    attrs: &AttributeSeries,
    priors: &FamilyPriors,
    a_sigma: f64,
    b_sigma: f64,
) -> f64 {
    edge_log_lik(state, graph)
        + attr_log_lik(&state.latents, attrs)
        + log_prior(&state.latents, priors, a_sigma, b_sigma)
}

/// [`log_posterior_with`], factorizing the priors from the state's current
/// hyperparameters.
pub fn log_posterior_unnorm(
    state: &LatentState,
    graph: &MultiplexGraphSeries,
    attrs: &AttributeSeries,
    config: &ModelConfig,
) -> Result<f64> {
    check_dims(&state.latents, graph, attrs)?;
    let priors = FamilyPriors::build(graph.grid(), &state.latents.betas, config.jitter)?;
    Ok(log_posterior_with(
        state,
        graph,
        attrs,
        &priors,
        config.a_sigma,
        config.b_sigma,
    ))
}
