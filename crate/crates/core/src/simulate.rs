//! Synthetic data generators and the masking protocol.
//!
//! Scheme 1 draws every latent function from its NN-GP prior, Scheme 2 from
//! stationary AR(1) processes, and Scheme 3 keeps the Scheme 1 attributes but
//! draws the graph from a dyad-independent exponential random graph model.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::{KernelParams, PriorFactor, TimeGrid};
use crate::model::{
    AttributeSeries, Dims, EdgeValue, Family, FamilyParams, Latents, MultiplexGraphSeries,
};

/// Relative jitter for the generating covariances.
const SIM_JITTER: f64 = 1e-8;

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sizes shared by all schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSizes {
    pub nodes: usize,
    pub layers: usize,
    pub attrs: usize,
    pub shared_rank: usize,
    pub layer_rank: usize,
}

impl SimSizes {
    fn dims(&self, times: usize) -> Dims {
        Dims {
            nodes: self.nodes,
            layers: self.layers,
            attrs: self.attrs,
            times,
            shared_rank: self.shared_rank,
            layer_rank: self.layer_rank,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheme1Params {
    pub sizes: SimSizes,
    /// Generating kernel per family; `xi_attr` is ignored.
    pub betas: FamilyParams,
    /// Attribute noise variance σ_k².
    pub noise_var: f64,
    /// Rescale each attribute to zero mean and unit variance over all cells.
    pub standardize: bool,
}

impl Scheme1Params {
    /// All families share `{σ_g², σ_c²} = {0.4, 0.01}`.
    pub fn defaults(sizes: SimSizes, depth: usize) -> Self {
        let p = KernelParams {
            sigma_bias_sq: 0.01,
            sigma_weight_sq: 0.4,
            depth,
        };
        Scheme1Params {
            sizes,
            betas: FamilyParams::uniform(p, true),
            noise_var: 1.0,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Params {
    pub rho: f64,
    pub innovation_var: f64,
}

impl Ar1Params {
    fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) || !(self.innovation_var > 0.0) || !self.innovation_var.is_finite() {
            return Err(Error::InvalidInput(format!(
                "AR(1) needs |rho| < 1 and positive variance, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Path at `t_1..t_n` started from the stationary law at `t_0`.
    pub fn path<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let sd = self.innovation_var.sqrt();
        let z: f64 = rng.sample(StandardNormal);
        let mut v = z * sd / (1.0 - self.rho * self.rho).sqrt();
        (0..n)
            .map(|_| {
                let e: f64 = rng.sample(StandardNormal);
                v = self.rho * v + sd * e;
                v
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheme2Params {
    pub sizes: SimSizes,
    pub mu: Ar1Params,
    pub eta: Ar1Params,
    pub zeta: Ar1Params,
    pub xi: Ar1Params,
    pub alpha: Ar1Params,
    pub noise_var: f64,
    pub standardize: bool,
}

impl Scheme2Params {
    /// ρ = 0.5 and innovation variance 4 for every family.
    pub fn defaults(sizes: SimSizes) -> Self {
        let a = Ar1Params {
            rho: 0.5,
            innovation_var: 4.0,
        };
        Scheme2Params {
            sizes,
            mu: a,
            eta: a,
            zeta: a,
            xi: a,
            alpha: a,
            noise_var: 1.0,
            standardize: true,
        }
    }

    fn family(&self, f: Family) -> Ar1Params {
        match f {
            Family::Mu => self.mu,
            Family::Eta => self.eta,
            Family::Zeta => self.zeta,
            Family::Xi | Family::XiAttr => self.xi,
            Family::Alpha => self.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheme3Params {
    /// Generator of the attributes.
    pub attributes: Scheme1Params,
    /// θ₁ at time `t` is `theta1_scale · t / t_max`.
    pub theta1_scale: f64,
    pub theta2: f64,
}

/// Everything the generator produced, on the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub latents: Latents,
    pub graph: MultiplexGraphSeries,
    pub attrs: AttributeSeries,
}

fn check_sizes(s: &SimSizes, noise_var: f64) -> Result<()> {
    if s.nodes < 2 || s.layers == 0 || s.shared_rank == 0 || s.layer_rank == 0 {
        return Err(Error::InvalidInput(format!("invalid simulation sizes {s:?}")));
    }
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidInput("noise variance must be positive".into()));
    }
    Ok(())
}

/// Scheme 1: latent functions from their NN-GP priors.
pub fn simulate_scheme1<R: Rng + ?Sized>(p: &Scheme1Params, grid: &TimeGrid, rng: &mut R) -> Result<Truth> {
    check_sizes(&p.sizes, p.noise_var)?;
    let latents = scheme1_latents(p, grid, rng)?;
    finish(latents, grid, p.standardize, rng)
}

fn scheme1_latents<R: Rng + ?Sized>(p: &Scheme1Params, grid: &TimeGrid, rng: &mut R) -> Result<Latents> {
    let dims = p.sizes.dims(grid.len());
    let mut lat = Latents::zeros(dims, true, p.betas.mu);
    lat.betas = FamilyParams { xi_attr: None, ..p.betas };
    for f in Family::ALL {
        let Some(beta) = p.betas.get(f).filter(|_| f != Family::XiAttr) else { continue };
        let prior = PriorFactor::new(grid, beta, SIM_JITTER)?;
        if let Some(values) = lat.family_mut(f) {
            for chunk in values.chunks_mut(grid.len()) {
                chunk.copy_from_slice(&prior.draw_prior(rng));
            }
        }
    }
    lat.sigma2.iter_mut().for_each(|s| *s = p.noise_var);
    Ok(lat)
}

/// Scheme 2: latent functions from stationary AR(1) paths.
pub fn simulate_scheme2<R: Rng + ?Sized>(p: &Scheme2Params, grid: &TimeGrid, rng: &mut R) -> Result<Truth> {
    check_sizes(&p.sizes, p.noise_var)?;
    for f in [Family::Mu, Family::Eta, Family::Zeta, Family::Xi, Family::Alpha] {
        p.family(f).validate()?;
    }
    let dims = p.sizes.dims(grid.len());
    let placeholder = KernelParams {
        sigma_bias_sq: 0.05,
        sigma_weight_sq: 0.05,
        depth: 1,
    };
    let mut lat = Latents::zeros(dims, true, placeholder);
    for f in [Family::Mu, Family::Eta, Family::Zeta, Family::Xi, Family::Alpha] {
        let ar = p.family(f);
        if let Some(values) = lat.family_mut(f) {
            for chunk in values.chunks_mut(grid.len()) {
                chunk.copy_from_slice(&ar.path(grid.len(), rng));
            }
        }
    }
    lat.sigma2.iter_mut().for_each(|s| *s = p.noise_var);
    finish(lat, grid, p.standardize, rng)
}

/// Scheme 3: Scheme 1 attributes, edges from the ERGM with statistics
/// `S₁ = Σ_{j≠j'} a_{jj'} x_jᵀx_{j'}` and `S₂ = Σ_{j≠j'} a_{jj'}`.
///
/// Both statistics are sums over dyads (each unordered dyad counted twice), so
/// the model factorizes and every dyad is an independent Bernoulli with
/// logit `2θ₁ x_jᵀx_{j'} + 2θ₂`.
pub fn simulate_scheme3<R: Rng + ?Sized>(p: &Scheme3Params, grid: &TimeGrid, rng: &mut R) -> Result<Truth> {
    let a = &p.attributes;
    check_sizes(&a.sizes, a.noise_var)?;
    if !p.theta1_scale.is_finite() || !p.theta2.is_finite() {
        return Err(Error::InvalidInput("Scheme 3 coefficients must be finite".into()));
    }
    let latents = scheme1_latents(a, grid, rng)?;
    let mut truth = finish(latents, grid, a.standardize, rng)?;
    truth.graph = draw_scheme3_graph(&truth.attrs, a.sizes.layers, p.theta1_scale, p.theta2, rng)?;
    Ok(truth)
}

/// Independent Bernoulli dyads given fully observed attributes, on the
/// attributes' grid.
pub fn draw_scheme3_graph<R: Rng + ?Sized>(
    attrs: &AttributeSeries,
    layers: usize,
    theta1_scale: f64,
    theta2: f64,
    rng: &mut R,
) -> Result<MultiplexGraphSeries> {
    if attrs.observed_count() != attrs.num_cells() {
        return Err(Error::InvalidInput("Scheme 3 needs fully observed attributes".into()));
    }
    let grid = attrs.grid();
    let t_max = *grid.times().last().unwrap_or(&1.0);
    let mut g = MultiplexGraphSeries::unobserved(attrs.num_nodes(), layers, grid.clone())?;
    for cell in 0..g.num_cells() {
        let (pair, _, t) = g.cell_coords(cell);
        let (j, k) = g.pair_nodes(pair);
        let theta1 = theta1_scale * grid.times()[t] / t_max;
        let logit = scheme3_edge_logit(attrs, j, k, t, theta1, theta2);
        g.set_value(cell, EdgeValue::from_bool(rng.random::<f64>() < logistic(logit)));
    }
    Ok(g)
}

/// `2θ₁ Σ_k x_{j,k}(t) x_{j',k}(t) + 2θ₂` from fully observed attributes.
pub fn scheme3_edge_logit(attrs: &AttributeSeries, j: usize, k: usize, t: usize, theta1: f64, theta2: f64) -> f64 {
    let dot: f64 = (0..attrs.num_attrs())
        .map(|a| attrs.raw(attrs.cell_at(j, a, t)) * attrs.raw(attrs.cell_at(k, a, t)))
        .sum();
    2.0 * theta1 * dot + 2.0 * theta2
}

/// Draws the fully observed tensors from `latents`, optionally standardizing
/// the attributes (the latents are rescaled to match).
fn finish<R: Rng + ?Sized>(mut latents: Latents, grid: &TimeGrid, standardize: bool, rng: &mut R) -> Result<Truth> {
    let d = latents.dims;
    let mut graph = MultiplexGraphSeries::unobserved(d.nodes, d.layers, grid.clone())?;
    let mut attrs = AttributeSeries::unobserved(d.nodes, d.attrs, grid.clone());
    for c in 0..graph.num_cells() {
        graph.set_value(c, EdgeValue::Absent);
    }
    for c in 0..attrs.num_cells() {
        attrs.set_cell(c, Some(0.0))?;
    }
    resample_observed(&latents, &mut graph, &mut attrs, rng)?;
    if standardize {
        standardize_attributes(&mut latents, &mut attrs)?;
    }
    Ok(Truth {
        latents,
        graph,
        attrs,
    })
}

/// Redraws every observed cell from the model given `latents`, keeping the
/// masks: edges `Bernoulli(logistic(ψ))`, attributes `N(mean, σ_k²)`.
pub fn resample_observed<R: Rng + ?Sized>(
    latents: &Latents,
    graph: &mut MultiplexGraphSeries,
    attrs: &mut AttributeSeries,
    rng: &mut R,
) -> Result<()> {
    let cells: Vec<usize> = graph.observed_cells().collect();
    for cell in cells {
        let (pair, layer, t) = graph.cell_coords(cell);
        let (j, k) = graph.pair_nodes(pair);
        let p = logistic(latents.edge_linear_predictor(j, k, layer, t)?);
        graph.set_value(cell, EdgeValue::from_bool(rng.random::<f64>() < p));
    }
    let cells: Vec<usize> = attrs.observed_cells().collect();
    for cell in cells {
        let (j, k, t) = attrs.cell_coords(cell);
        let sd = latents.sigma2[k].sqrt();
        let noise = Normal::new(0.0, sd).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let x = latents.attribute_mean(j, k, t)? + noise.sample(rng);
        attrs.set_cell(cell, Some(x))?;
    }
    Ok(())
}

/// Affine map `x → (x − m_k)/s_k` per attribute over all observed cells,
/// pushed through to η_k, α_k and σ_k² so the latents still generate the data.
fn standardize_attributes(latents: &mut Latents, attrs: &mut AttributeSeries) -> Result<()> {
    let d = latents.dims;
    for k in 0..d.attrs {
        let cells: Vec<usize> = attrs.observed_cells().filter(|&c| attrs.cell_coords(c).1 == k).collect();
        if cells.len() < 2 {
            continue;
        }
        let n = cells.len() as f64;
        let mean = cells.iter().map(|&c| attrs.raw(c)).sum::<f64>() / n;
        let var = cells.iter().map(|&c| (attrs.raw(c) - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > 0.0) {
            continue;
        }
        for &c in &cells {
            attrs.set_cell(c, Some((attrs.raw(c) - mean) / sd))?;
        }
        let e = d.eta_index(k);
        for v in &mut latents.eta[e..e + d.times] {
            *v = (*v - mean) / sd;
        }
        for l in 0..d.layers {
            for r in 0..d.layer_rank {
                let a = d.alpha_index(k, l, r);
                for v in &mut latents.alpha[a..a + d.times] {
                    *v /= sd;
                }
            }
        }
        latents.sigma2[k] /= var;
    }
    Ok(())
}

/// Masking rates. The attribute rates mirror the edge protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskPolicy {
    /// Probability that a (layer, time) slot is selected for masking.
    pub time_select_prob: f64,
    /// Probability that a dyad is hidden at a selected slot.
    pub edge_drop_prob: f64,
    /// Probability that an (attribute, time) slot is selected.
    pub attr_time_select_prob: f64,
    /// Probability that a node's value is hidden at a selected slot.
    pub attr_drop_prob: f64,
    /// Trailing grid points removed wholesale for out-of-sample prediction.
    pub holdout_future_times: usize,
}

impl Default for MaskPolicy {
    fn default() -> Self {
        MaskPolicy {
            time_select_prob: 0.1,
            edge_drop_prob: 0.25,
            attr_time_select_prob: 0.1,
            attr_drop_prob: 0.25,
            holdout_future_times: 0,
        }
    }
}

impl MaskPolicy {
    pub fn validate(&self) -> Result<()> {
        for p in [
            self.time_select_prob,
            self.edge_drop_prob,
            self.attr_time_select_prob,
            self.attr_drop_prob,
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!("mask probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Prediction setting of a cell. Ledgers only hold `Missing` and `Out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    /// Observed in the training data.
    In,
    /// Masked inside the training window.
    Missing,
    /// At a held-out future time.
    Out,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::In => "in",
            Scenario::Missing => "missing",
            Scenario::Out => "out",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "in" => Some(Scenario::In),
            "missing" => Some(Scenario::Missing),
            "out" => Some(Scenario::Out),
            _ => None,
        }
    }
}

/// A hidden edge cell; `t` indexes the full grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenEdge {
    pub i: usize,
    pub j: usize,
    pub layer: usize,
    pub t: usize,
    pub value: EdgeValue,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenAttr {
    pub node: usize,
    pub attr: usize,
    pub t: usize,
    /// `None` if the cell was already unobserved before masking.
    pub value: Option<f64>,
    pub scenario: Scenario,
}

/// Hidden cells with their true values, enough to undo the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskLedger {
    pub full_grid: TimeGrid,
    pub edges: Vec<HiddenEdge>,
    pub attrs: Vec<HiddenAttr>,
}

impl MaskLedger {
    /// Number of leading grid points kept for training.
    pub fn train_len(&self, hold: usize) -> usize {
        self.full_grid.len() - hold
    }

    /// Future times held out, if any.
    pub fn future_grid(&self, train_len: usize) -> Option<TimeGrid> {
        (train_len < self.full_grid.len())
            .then(|| TimeGrid::new(self.full_grid.times()[train_len..].to_vec()).ok())
            .flatten()
    }

    /// Rebuilds the unmasked graph on the full grid.
    pub fn restore_graph(&self, masked: &MultiplexGraphSeries) -> Result<MultiplexGraphSeries> {
        let mut full = MultiplexGraphSeries::unobserved(masked.num_nodes(), masked.num_layers(), self.full_grid.clone())?;
        for pair in 0..masked.num_pairs() {
            for l in 0..masked.num_layers() {
                for t in 0..masked.num_times() {
                    let v = masked.value(masked.cell_at(pair, l, t));
                    let c = full.cell_at(pair, l, t);
                    full.set_value(c, v);
                }
            }
        }
        for h in &self.edges {
            full.set(h.i, h.j, h.layer, h.t, h.value)?;
        }
        Ok(full)
    }

    pub fn restore_attrs(&self, masked: &AttributeSeries) -> Result<AttributeSeries> {
        let mut full = AttributeSeries::unobserved(masked.num_nodes(), masked.num_attrs(), self.full_grid.clone());
        for j in 0..masked.num_nodes() {
            for k in 0..masked.num_attrs() {
                for t in 0..masked.num_times() {
                    full.set(j, k, t, masked.get(j, k, t)?)?;
                }
            }
        }
        for h in &self.attrs {
            full.set(h.node, h.attr, h.t, h.value)?;
        }
        Ok(full)
    }
}

/// Masks a fully observed graph: per layer each time is selected with
/// `time_select_prob` and at selected times each dyad is hidden with
/// `edge_drop_prob`. The last `holdout_future_times` grid points are removed
/// from the returned graph and recorded as out-of-sample cells.
pub fn apply_mask<R: Rng + ?Sized>(
    graph: &MultiplexGraphSeries,
    policy: &MaskPolicy,
    rng: &mut R,
) -> Result<(MultiplexGraphSeries, MaskLedger)> {
    policy.validate()?;
    let full_t = graph.num_times();
    if policy.holdout_future_times >= full_t {
        return Err(Error::InvalidInput(format!(
            "cannot hold out {} of {full_t} times",
            policy.holdout_future_times
        )));
    }
    let train_t = full_t - policy.holdout_future_times;
    let train_grid = graph.grid().truncated(train_t)?;
    let mut masked = MultiplexGraphSeries::unobserved(graph.num_nodes(), graph.num_layers(), train_grid)?;
    let mut ledger = MaskLedger {
        full_grid: graph.grid().clone(),
        edges: Vec::new(),
        attrs: Vec::new(),
    };
    for pair in 0..graph.num_pairs() {
        for l in 0..graph.num_layers() {
            for t in 0..train_t {
                let c = masked.cell_at(pair, l, t);
                masked.set_value(c, graph.value(graph.cell_at(pair, l, t)));
            }
        }
    }
    for l in 0..graph.num_layers() {
        for t in 0..train_t {
            if rng.random::<f64>() >= policy.time_select_prob {
                continue;
            }
            for pair in 0..graph.num_pairs() {
                if rng.random::<f64>() < policy.edge_drop_prob {
                    let c = masked.cell_at(pair, l, t);
                    let v = masked.value(c);
                    if v.is_observed() {
                        let (i, j) = graph.pair_nodes(pair);
                        ledger.edges.push(HiddenEdge {
                            i,
                            j,
                            layer: l,
                            t,
                            value: v,
                            scenario: Scenario::Missing,
                        });
                        masked.set_value(c, EdgeValue::Unknown);
                    }
                }
            }
        }
    }
    for pair in 0..graph.num_pairs() {
        let (i, j) = graph.pair_nodes(pair);
        for l in 0..graph.num_layers() {
            for t in train_t..full_t {
                let v = graph.value(graph.cell_at(pair, l, t));
                if v.is_observed() {
                    ledger.edges.push(HiddenEdge {
                        i,
                        j,
                        layer: l,
                        t,
                        value: v,
                        scenario: Scenario::Out,
                    });
                }
            }
        }
    }
    Ok((masked, ledger))
}

/// Attribute counterpart of [`apply_mask`], appending to `ledger`.
pub fn apply_attr_mask<R: Rng + ?Sized>(
    attrs: &AttributeSeries,
    policy: &MaskPolicy,
    ledger: &mut MaskLedger,
    rng: &mut R,
) -> Result<AttributeSeries> {
    policy.validate()?;
    if attrs.grid() != &ledger.full_grid {
        return Err(Error::GridMismatch("attribute grid differs from the ledger grid".into()));
    }
    let full_t = attrs.num_times();
    let train_t = full_t - policy.holdout_future_times.min(full_t);
    let mut masked = AttributeSeries::unobserved(attrs.num_nodes(), attrs.num_attrs(), attrs.grid().truncated(train_t)?);
    for j in 0..attrs.num_nodes() {
        for k in 0..attrs.num_attrs() {
            for t in 0..train_t {
                masked.set(j, k, t, attrs.get(j, k, t)?)?;
            }
        }
    }
    for k in 0..attrs.num_attrs() {
        for t in 0..train_t {
            if rng.random::<f64>() >= policy.attr_time_select_prob {
                continue;
            }
            for j in 0..attrs.num_nodes() {
                if rng.random::<f64>() < policy.attr_drop_prob {
                    if let Some(v) = masked.get(j, k, t)? {
                        ledger.attrs.push(HiddenAttr {
                            node: j,
                            attr: k,
                            t,
                            value: Some(v),
                            scenario: Scenario::Missing,
                        });
                        masked.set(j, k, t, None)?;
                    }
                }
            }
        }
    }
    for j in 0..attrs.num_nodes() {
        for k in 0..attrs.num_attrs() {
            for t in train_t..full_t {
                if let Some(v) = attrs.get(j, k, t)? {
                    ledger.attrs.push(HiddenAttr {
                        node: j,
                        attr: k,
                        t,
                        value: Some(v),
                        scenario: Scenario::Out,
                    });
                }
            }
        }
    }
    Ok(masked)
}

/// Masks graph and attributes together.
pub fn mask_dataset<R: Rng + ?Sized>(
    graph: &MultiplexGraphSeries,
    attrs: &AttributeSeries,
    policy: &MaskPolicy,
    rng: &mut R,
) -> Result<(MultiplexGraphSeries, AttributeSeries, MaskLedger)> {
    let (g, mut ledger) = apply_mask(graph, policy, rng)?;
    let a = apply_attr_mask(attrs, policy, &mut ledger, rng)?;
    Ok((g, a, ledger))
}
