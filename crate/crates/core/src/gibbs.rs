//! Blocked Gibbs sampler for the joint graph/attribute factor model.
//!
//! Every latent function is updated as one `T`-dimensional Gaussian block.
//! The edge likelihood enters through the Pólya-Gamma augmentation: a cell with
//! `a ∈ {0, 1}`, auxiliary `ω` and linear predictor `ψ = h θ + rest` adds
//! `ω h²` to the diagonal precision of `θ` and `h (a − 1/2 − ω rest)` to the
//! linear term, i.e. a Gaussian pseudo-response `(a − 1/2)/ω` with weight `ω`.
//! Attribute cells add `h²/σ_k²` and `h (x − rest)/σ_k²` the same way.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::archive::{MonitorStat, PosteriorArchive, RunInfo};
use crate::diagnostics::effective_sample_size;
use crate::error::{Error, Result};
use crate::kernel::{KernelParams, PriorFactor, TimeGrid};
use crate::model::{
    check_dims, pair_index, AttributeSeries, Dims, Family, FamilyPriors, LatentState, Latents,
    ModelConfig, MultiplexGraphSeries,
};
use crate::polya_gamma::sample_pg1;

/// One kind of Gibbs block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    Omega,
    Mu,
    Eta,
    Sigma2,
    Zeta,
    Xi,
    Alpha,
    BetaGrids,
}

impl Block {
    pub const ALL: [Block; 8] = [
        Block::Omega,
        Block::Mu,
        Block::Eta,
        Block::Sigma2,
        Block::Zeta,
        Block::Xi,
        Block::Alpha,
        Block::BetaGrids,
    ];
}

/// Order of the blocks within one sweep, and the thinning interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepPlan {
    pub order: Vec<Block>,
    pub thin: usize,
}

impl SweepPlan {
    pub fn standard(thin: usize) -> Self {
        SweepPlan {
            order: Block::ALL.to_vec(),
            thin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidInput("thin must be at least 1".into()));
        }
        for b in Block::ALL {
            if !self.order.contains(&b) {
                return Err(Error::InvalidInput(format!("sweep plan is missing {b:?}")));
            }
        }
        Ok(())
    }
}

/// Data contribution to one Gaussian block: diagonal precision `D` and linear
/// term `b`. Combined with the prior `N(0, Σ)` the conditional is
/// `N((Σ⁻¹ + D)⁻¹ b, (Σ⁻¹ + D)⁻¹)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianConditional {
    pub diag_precision: Vec<f64>,
    pub linear: Vec<f64>,
}

impl GaussianConditional {
    fn zeros(t: usize) -> Self {
        GaussianConditional {
            diag_precision: vec![0.0; t],
            linear: vec![0.0; t],
        }
    }

    #[inline]
    fn add_edge(&mut self, t: usize, h: f64, centered: f64, omega: f64, rest: f64) {
        self.diag_precision[t] += omega * h * h;
        self.linear[t] += h * (centered - omega * rest);
    }

    #[inline]
    fn add_gaussian(&mut self, t: usize, h: f64, precision: f64, residual: f64) {
        self.diag_precision[t] += precision * h * h;
        self.linear[t] += precision * h * residual;
    }

    pub fn mean(&self, prior: &PriorFactor) -> Result<Vec<f64>> {
        prior.conditional_mean(&self.diag_precision, &self.linear)
    }

    /// Dense posterior precision `Σ⁻¹ + D`.
    pub fn precision(&self, prior: &PriorFactor) -> DMatrix<f64> {
        let mut p = prior.precision().clone();
        for (i, d) in self.diag_precision.iter().enumerate() {
            p[(i, i)] += d;
        }
        p
    }

    pub fn draw<R: Rng + ?Sized>(&self, prior: &PriorFactor, rng: &mut R) -> Result<Vec<f64>> {
        prior.draw_conditional(&self.diag_precision, &self.linear, rng)
    }
}

/// Edge terms for μ.
pub fn mu_conditional(lat: &Latents, omega: &[f64], graph: &MultiplexGraphSeries) -> GaussianConditional {
    let mut g = GaussianConditional::zeros(lat.dims.times);
    for cell in graph.observed_cells() {
        let (pair, layer, t) = graph.cell_coords(cell);
        let (j, k) = graph.pair_nodes(pair);
        let centered = graph.value(cell).centered().unwrap_or(0.0);
        let rest = lat.psi(j, k, layer, t) - lat.mu[t];
        g.add_edge(t, 1.0, centered, omega[cell], rest);
    }
    g
}

/// Attribute terms for η_k.
pub fn eta_conditional(lat: &Latents, attrs: &AttributeSeries, k: usize) -> GaussianConditional {
    let d = &lat.dims;
    let mut g = GaussianConditional::zeros(d.times);
    let prec = 1.0 / lat.sigma2[k];
    for j in 0..d.nodes {
        for t in 0..d.times {
            let c = attrs.cell_at(j, k, t);
            if attrs.is_observed(c) {
                g.add_gaussian(t, 1.0, prec, attrs.raw(c) - lat.loading_sum(j, k, t));
            }
        }
    }
    g
}

/// Edge terms for ζ_{j,r}, over every layer and every partner `j' ≠ j`.
pub fn zeta_conditional(
    lat: &Latents,
    omega: &[f64],
    graph: &MultiplexGraphSeries,
    j: usize,
    r: usize,
) -> GaussianConditional {
    let d = &lat.dims;
    let mut g = GaussianConditional::zeros(d.times);
    let own = d.zeta_index(j, r);
    for k in (0..d.nodes).filter(|&k| k != j) {
        let pair = pair_index(d.nodes, j, k);
        let other = d.zeta_index(k, r);
        for layer in 0..d.layers {
            for t in 0..d.times {
                let cell = graph.cell_at(pair, layer, t);
                if let Some(centered) = graph.value(cell).centered() {
                    let h = lat.zeta[other + t];
                    let rest = lat.psi(j, k, layer, t) - h * lat.zeta[own + t];
                    g.add_edge(t, h, centered, omega[cell], rest);
                }
            }
        }
    }
    g
}

/// Terms for the graph-side ξ_{j,l,r}: edges in layer `l`, plus the attribute
/// terms when the model is joint.
pub fn xi_conditional(
    lat: &Latents,
    omega: &[f64],
    graph: &MultiplexGraphSeries,
    attrs: &AttributeSeries,
    j: usize,
    l: usize,
    r: usize,
) -> GaussianConditional {
    let d = &lat.dims;
    let mut g = GaussianConditional::zeros(d.times);
    let own = d.xi_index(j, l, r);
    for k in (0..d.nodes).filter(|&k| k != j) {
        let pair = pair_index(d.nodes, j, k);
        let other = d.xi_index(k, l, r);
        for t in 0..d.times {
            let cell = graph.cell_at(pair, l, t);
            if let Some(centered) = graph.value(cell).centered() {
                let h = lat.xi[other + t];
                let rest = lat.psi(j, k, l, t) - h * lat.xi[own + t];
                g.add_edge(t, h, centered, omega[cell], rest);
            }
        }
    }
    if lat.is_joint() {
        add_factor_attr_terms(&mut g, lat, attrs, j, l, r);
    }
    g
}

/// Attribute terms for the attribute-side factor copy ξ^x_{j,l,r} (separate mode).
pub fn xi_attr_conditional(
    lat: &Latents,
    attrs: &AttributeSeries,
    j: usize,
    l: usize,
    r: usize,
) -> GaussianConditional {
    let mut g = GaussianConditional::zeros(lat.dims.times);
    add_factor_attr_terms(&mut g, lat, attrs, j, l, r);
    g
}

fn add_factor_attr_terms(
    g: &mut GaussianConditional,
    lat: &Latents,
    attrs: &AttributeSeries,
    j: usize,
    l: usize,
    r: usize,
) {
    let d = &lat.dims;
    let own = d.xi_index(j, l, r);
    let xi = lat.attr_xi();
    for k in 0..d.attrs {
        let prec = 1.0 / lat.sigma2[k];
        let a = d.alpha_index(k, l, r);
        for t in 0..d.times {
            let c = attrs.cell_at(j, k, t);
            if attrs.is_observed(c) {
                let h = lat.alpha[a + t];
                let rest = lat.attr_mean(j, k, t) - h * xi[own + t];
                g.add_gaussian(t, h, prec, attrs.raw(c) - rest);
            }
        }
    }
}

/// Attribute terms for α_{k,l,r}.
pub fn alpha_conditional(
    lat: &Latents,
    attrs: &AttributeSeries,
    k: usize,
    l: usize,
    r: usize,
) -> GaussianConditional {
    let d = &lat.dims;
    let mut g = GaussianConditional::zeros(d.times);
    let prec = 1.0 / lat.sigma2[k];
    let own = d.alpha_index(k, l, r);
    let xi = lat.attr_xi();
    for j in 0..d.nodes {
        let x = d.xi_index(j, l, r);
        for t in 0..d.times {
            let c = attrs.cell_at(j, k, t);
            if attrs.is_observed(c) {
                let h = xi[x + t];
                let rest = lat.attr_mean(j, k, t) - h * lat.alpha[own + t];
                g.add_gaussian(t, h, prec, attrs.raw(c) - rest);
            }
        }
    }
    g
}

/// `(shape, rate)` of the inverse-gamma conditional of σ_k².
pub fn sigma2_posterior(
    lat: &Latents,
    attrs: &AttributeSeries,
    k: usize,
    a_sigma: f64,
    b_sigma: f64,
) -> (f64, f64) {
    let d = &lat.dims;
    let mut n = 0usize;
    let mut ss = 0.0;
    for j in 0..d.nodes {
        for t in 0..d.times {
            let c = attrs.cell_at(j, k, t);
            if attrs.is_observed(c) {
                let r = attrs.raw(c) - lat.attr_mean(j, k, t);
                ss += r * r;
                n += 1;
            }
        }
    }
    (a_sigma + 0.5 * n as f64, b_sigma + 0.5 * ss)
}

/// Factorized priors for every candidate hyperparameter pair, ordered by
/// `(σ_g², σ_c²)` ascending so that the first maximizer is the tie-break winner.
#[derive(Debug, Clone)]
pub struct HyperGrid {
    candidates: Vec<PriorFactor>,
}

impl HyperGrid {
    pub fn new(grid: &TimeGrid, pairs: &[(f64, f64)], depth: usize, rel_jitter: f64) -> Result<Self> {
        let mut sorted: Vec<(f64, f64)> = pairs.to_vec();
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
        sorted.dedup();
        let candidates = sorted
            .into_iter()
            .map(|(c, g)| PriorFactor::new(grid, &KernelParams::new(c, g, depth)?, rel_jitter))
            .collect::<Result<Vec<_>>>()?;
        if candidates.is_empty() {
            return Err(Error::InvalidInput("hyperparameter grid is empty".into()));
        }
        Ok(HyperGrid { candidates })
    }

    pub fn candidates(&self) -> &[PriorFactor] {
        &self.candidates
    }

    /// Summed log prior density, up to the shared `2π` constant, of the
    /// `T`-length vectors packed in `values` under each candidate.
    pub fn scores(&self, values: &[f64]) -> Vec<f64> {
        let t = self.candidates[0].dim();
        let n = (values.len() / t) as f64;
        let mut scatter = DMatrix::<f64>::zeros(t, t);
        for v in values.chunks(t) {
            for a in 0..t {
                for b in 0..t {
                    scatter[(a, b)] += v[a] * v[b];
                }
            }
        }
        self.candidates
            .iter()
            .map(|p| -0.5 * n * p.log_det() - 0.5 * p.precision().component_mul(&scatter).sum())
            .collect()
    }

    /// Index of the best-scoring candidate; ties keep the earliest.
    pub fn select(&self, values: &[f64]) -> usize {
        let scores = self.scores(values);
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        best
    }
}

/// Scalars tracked for effective sample sizes.
pub fn monitored_scalars(dims: &Dims) -> Vec<(String, Family, usize)> {
    let mut out = vec![("mu(t1)".to_string(), Family::Mu, 0)];
    if dims.attrs >= 2 {
        out.push(("eta_2(t1)".to_string(), Family::Eta, dims.eta_index(1)));
    }
    let r = dims.layer_rank;
    if dims.attrs >= 1 {
        out.push((
            format!("alpha_1,1,{r}(t1)"),
            Family::Alpha,
            dims.alpha_index(0, 0, r - 1),
        ));
    }
    let half = r.div_ceil(2);
    out.push((format!("xi_1,1,{half}(t1)"), Family::Xi, dims.xi_index(0, 0, half - 1)));
    out
}

/// Gibbs sampler state for one chain.
pub struct Sampler<'a> {
    graph: &'a MultiplexGraphSeries,
    attrs: &'a AttributeSeries,
    config: ModelConfig,
    hyper: HyperGrid,
    priors: FamilyPriors,
    state: LatentState,
    rng: ChaCha8Rng,
}

impl<'a> Sampler<'a> {
    /// Draws every latent function from its prior at the initial β, sets
    /// σ_k² = 1, and runs one ω update.
    pub fn new(
        graph: &'a MultiplexGraphSeries,
        attrs: &'a AttributeSeries,
        config: &ModelConfig,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        config.validate()?;
        let dims = Dims {
            nodes: graph.num_nodes(),
            layers: graph.num_layers(),
            attrs: attrs.num_attrs(),
            times: graph.num_times(),
            shared_rank: config.shared_rank,
            layer_rank: config.layer_rank,
        };
        let beta0 = KernelParams::new(config.initial_beta.0, config.initial_beta.1, config.depth)?;
        let latents = Latents::zeros(dims, config.joint_mode, beta0);
        check_dims(&latents, graph, attrs)?;
        let hyper = HyperGrid::new(graph.grid(), &config.hyper_grid, config.depth, config.jitter)?;
        let priors = FamilyPriors::build(graph.grid(), &latents.betas, config.jitter)?;
        let state = LatentState::new(latents, graph);
        let mut s = Sampler {
            graph,
            attrs,
            config: config.clone(),
            hyper,
            priors,
            state,
            rng,
        };
        s.init_from_prior();
        s.update_omega()?;
        Ok(s)
    }

    /// Starts from a given latent configuration instead of a prior draw.
    pub fn with_state(
        graph: &'a MultiplexGraphSeries,
        attrs: &'a AttributeSeries,
        config: &ModelConfig,
        state: LatentState,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        config.validate()?;
        check_dims(&state.latents, graph, attrs)?;
        state.check_omega(graph)?;
        let hyper = HyperGrid::new(graph.grid(), &config.hyper_grid, config.depth, config.jitter)?;
        let priors = FamilyPriors::build(graph.grid(), &state.latents.betas, config.jitter)?;
        Ok(Sampler {
            graph,
            attrs,
            config: config.clone(),
            hyper,
            priors,
            state,
            rng,
        })
    }

    fn init_from_prior(&mut self) {
        let t = self.state.latents.dims.times;
        for f in Family::ALL {
            let Some(prior) = self.priors.get(f) else { continue };
            let Some(values) = self.state.latents.family_mut(f) else { continue };
            for chunk in values.chunks_mut(t) {
                chunk.copy_from_slice(&prior.draw_prior(&mut self.rng));
            }
        }
        self.state.latents.sigma2.iter_mut().for_each(|s| *s = 1.0);
    }

    pub fn state(&self) -> &LatentState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut LatentState {
        &mut self.state
    }

    pub fn priors(&self) -> &FamilyPriors {
        &self.priors
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn into_state(self) -> LatentState {
        self.state
    }

    /// Refreshes ω on every observed cell; returns the number of cells visited.
    pub fn update_omega(&mut self) -> Result<usize> {
        let graph = self.graph;
        let lat = &self.state.latents;
        let mut visited = 0;
        for cell in graph.observed_cells() {
            let (pair, layer, t) = graph.cell_coords(cell);
            let (j, k) = graph.pair_nodes(pair);
            let psi = lat.psi(j, k, layer, t);
            self.state.omega[cell] = sample_pg1(psi, &mut self.rng)?.value();
            visited += 1;
        }
        Ok(visited)
    }

    pub fn update_mu(&mut self) -> Result<()> {
        let g = mu_conditional(&self.state.latents, &self.state.omega, self.graph);
        self.state.latents.mu = g.draw(&self.priors.mu, &mut self.rng)?;
        Ok(())
    }

    pub fn update_eta(&mut self) -> Result<()> {
        let d = self.state.latents.dims;
        for k in 0..d.attrs {
            let g = eta_conditional(&self.state.latents, self.attrs, k);
            let v = g.draw(&self.priors.eta, &mut self.rng)?;
            let o = d.eta_index(k);
            self.state.latents.eta[o..o + d.times].copy_from_slice(&v);
        }
        Ok(())
    }

    pub fn update_sigma2(&mut self) -> Result<()> {
        for k in 0..self.state.latents.dims.attrs {
            let (shape, rate) =
                sigma2_posterior(&self.state.latents, self.attrs, k, self.config.a_sigma, self.config.b_sigma);
            let gamma = Gamma::new(shape, 1.0 / rate)
                .map_err(|e| Error::InvalidInput(format!("inverse-gamma conditional: {e}")))?;
            let g: f64 = gamma.sample(&mut self.rng);
            self.state.latents.sigma2[k] = 1.0 / g;
        }
        Ok(())
    }

    pub fn update_zeta(&mut self) -> Result<()> {
        let d = self.state.latents.dims;
        for j in 0..d.nodes {
            for r in 0..d.shared_rank {
                let g = zeta_conditional(&self.state.latents, &self.state.omega, self.graph, j, r);
                let v = g.draw(&self.priors.zeta, &mut self.rng)?;
                let o = d.zeta_index(j, r);
                self.state.latents.zeta[o..o + d.times].copy_from_slice(&v);
            }
        }
        Ok(())
    }

    /// Graph-side ξ, then the attribute-side copy when fitting separately.
    pub fn update_xi(&mut self) -> Result<()> {
        let d = self.state.latents.dims;
        for j in 0..d.nodes {
            for l in 0..d.layers {
                for r in 0..d.layer_rank {
                    let g = xi_conditional(
                        &self.state.latents,
                        &self.state.omega,
                        self.graph,
                        self.attrs,
                        j,
                        l,
                        r,
                    );
                    let v = g.draw(&self.priors.xi, &mut self.rng)?;
                    let o = d.xi_index(j, l, r);
                    self.state.latents.xi[o..o + d.times].copy_from_slice(&v);
                }
            }
        }
        if self.state.latents.is_joint() {
            return Ok(());
        }
        let prior = self
            .priors
            .xi_attr
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("missing attribute-side prior".into()))?;
        for j in 0..d.nodes {
            for l in 0..d.layers {
                for r in 0..d.layer_rank {
                    let g = xi_attr_conditional(&self.state.latents, self.attrs, j, l, r);
                    let v = g.draw(prior, &mut self.rng)?;
                    let o = d.xi_index(j, l, r);
                    if let Some(xa) = self.state.latents.xi_attr.as_mut() {
                        xa[o..o + d.times].copy_from_slice(&v);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn update_alpha(&mut self) -> Result<()> {
        let d = self.state.latents.dims;
        for k in 0..d.attrs {
            for l in 0..d.layers {
                for r in 0..d.layer_rank {
                    let g = alpha_conditional(&self.state.latents, self.attrs, k, l, r);
                    let v = g.draw(&self.priors.alpha, &mut self.rng)?;
                    let o = d.alpha_index(k, l, r);
                    self.state.latents.alpha[o..o + d.times].copy_from_slice(&v);
                }
            }
        }
        Ok(())
    }

    /// Sets each family's β to the grid point maximizing the summed Gaussian
    /// log prior density of that family's current functions.
    pub fn update_beta_grids(&mut self) -> Result<()> {
        for f in Family::ALL {
            let Some(values) = self.state.latents.family(f) else { continue };
            let best = &self.hyper.candidates()[self.hyper.select(values)];
            if self.state.latents.betas.get(f) != Some(best.params()) {
                self.state.latents.betas.set(f, *best.params());
                self.priors.set(f, best.clone());
            }
        }
        Ok(())
    }

    pub fn run_block(&mut self, block: Block) -> Result<()> {
        match block {
            Block::Omega => self.update_omega().map(|_| ()),
            Block::Mu => self.update_mu(),
            Block::Eta => self.update_eta(),
            Block::Sigma2 => self.update_sigma2(),
            Block::Zeta => self.update_zeta(),
            Block::Xi => self.update_xi(),
            Block::Alpha => self.update_alpha(),
            Block::BetaGrids => self.update_beta_grids(),
        }
    }

    pub fn sweep(&mut self, plan: &SweepPlan) -> Result<()> {
        for &b in &plan.order {
            self.run_block(b)?;
        }
        Ok(())
    }
}

/// Post-burn-in draws of one chain.
pub struct ChainOutput {
    pub draws: Vec<Latents>,
    pub sweeps: usize,
    pub wall_seconds: f64,
}

/// Runs `burn_in + keep · thin` sweeps from a prior initialization and keeps
/// every `thin`-th post-burn-in state.
pub fn run_single_chain(
    graph: &MultiplexGraphSeries,
    attrs: &AttributeSeries,
    config: &ModelConfig,
    rng: ChaCha8Rng,
) -> Result<ChainOutput> {
    let start = Instant::now();
    let plan = SweepPlan::standard(config.thin);
    plan.validate()?;
    let mut sampler = Sampler::new(graph, attrs, config, rng)?;
    let total = config.burn_in + config.keep * config.thin;
    let mut draws = Vec::with_capacity(config.keep);
    for sweep in 0..total {
        sampler.sweep(&plan).map_err(|e| Error::AtSweep {
            sweep,
            source: Box::new(e),
        })?;
        if sweep >= config.burn_in && (sweep + 1 - config.burn_in) % config.thin == 0 {
            draws.push(sampler.state().latents.clone());
        }
    }
    Ok(ChainOutput {
        draws,
        sweeps: total,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// RNG of chain `chain`: the seed's ChaCha8 generator on stream `chain`.
pub fn chain_rng(seed: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// One chain seeded from `config.seed`.
pub fn run_chain(
    graph: &MultiplexGraphSeries,
    attrs: &AttributeSeries,
    config: &ModelConfig,
) -> Result<PosteriorArchive> {
    run_chains(graph, attrs, config, 1)
}

/// `chains` independent chains on derived RNG streams, run on separate threads
/// and merged in chain order.
pub fn run_chains(
    graph: &MultiplexGraphSeries,
    attrs: &AttributeSeries,
    config: &ModelConfig,
    chains: usize,
) -> Result<PosteriorArchive> {
    if chains == 0 {
        return Err(Error::InvalidInput("need at least one chain".into()));
    }
    config.validate()?;
    let start = Instant::now();
    let outputs: Vec<Result<ChainOutput>> = if chains == 1 {
        vec![run_single_chain(graph, attrs, config, chain_rng(config.seed, 0))]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..chains)
                .map(|c| {
                    s.spawn(move || run_single_chain(graph, attrs, config, chain_rng(config.seed, c as u64)))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("chain thread panicked"))
                .collect()
        })
    };
    let mut draws = Vec::new();
    let mut labels = Vec::new();
    let mut sweeps = 0;
    for (c, out) in outputs.into_iter().enumerate() {
        let out = out?;
        sweeps = out.sweeps;
        labels.extend(std::iter::repeat_n(c as u32, out.draws.len()));
        draws.extend(out.draws);
    }
    let dims = draws[0].dims;
    let monitors = monitor_ess(&draws, &labels, &dims);
    Ok(PosteriorArchive {
        config: config.clone(),
        grid: graph.grid().clone(),
        dims,
        draws,
        chain_labels: labels,
        node_ids: Vec::new(),
        run_info: RunInfo {
            seed: config.seed,
            sweeps,
            chains,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
        monitors,
    })
}

/// ESS of each monitored scalar, summed over chains.
pub fn monitor_ess(draws: &[Latents], labels: &[u32], dims: &Dims) -> Vec<MonitorStat> {
    let chains = labels.iter().copied().max().map_or(0, |m| m + 1);
    monitored_scalars(dims)
        .into_iter()
        .map(|(name, fam, idx)| {
            let mut ess = 0.0;
            for c in 0..chains {
                let series: Vec<f64> = draws
                    .iter()
                    .zip(labels)
                    .filter(|(_, l)| **l == c)
                    .filter_map(|(d, _)| d.family(fam).map(|v| v[idx]))
                    .collect();
                ess += effective_sample_size(&series);
            }
            MonitorStat {
                name,
                ess,
                draws: draws.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EdgeValue;

    fn small_data(seed: u64) -> (MultiplexGraphSeries, AttributeSeries) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = TimeGrid::integer(4).unwrap();
        let mut g = MultiplexGraphSeries::unobserved(3, 2, grid.clone()).unwrap();
        for c in 0..g.num_cells() {
            if rng.random::<f64>() < 0.8 {
                g.set_value(c, EdgeValue::from_bool(rng.random()));
            }
        }
        let mut a = AttributeSeries::unobserved(3, 2, grid);
        for c in 0..a.num_cells() {
            if rng.random::<f64>() < 0.8 {
                a.set_cell(c, Some(rng.random_range(-1.0..1.0))).unwrap();
            }
        }
        (g, a)
    }

    fn config() -> ModelConfig {
        ModelConfig {
            shared_rank: 2,
            layer_rank: 2,
            burn_in: 0,
            keep: 10,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn sweep_plan_validation() {
        assert!(SweepPlan::standard(1).validate().is_ok());
        assert!(SweepPlan::standard(0).validate().is_err());
        let mut p = SweepPlan::standard(1);
        p.order.retain(|b| *b != Block::Alpha);
        assert!(p.validate().is_err());
    }

    #[test]
    fn archive_has_keep_draws() {
        let (g, a) = small_data(1);
        let arc = run_chain(&g, &a, &config()).unwrap();
        assert_eq!(arc.len(), 10);
        assert!(arc.draws.iter().all(|d| d.sigma2.iter().all(|s| *s > 0.0)));
    }

    #[test]
    fn omega_visits_exactly_the_observed_cells() {
        let (g, a) = small_data(2);
        let mut s = Sampler::new(&g, &a, &config(), ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s.update_omega().unwrap(), g.observed_count());
        s.state().check_omega(&g).unwrap();
    }

    #[test]
    fn single_candidate_is_selected() {
        let grid = TimeGrid::integer(5).unwrap();
        let h = HyperGrid::new(&grid, &[(0.03, 0.07)], 1, 1e-8).unwrap();
        assert_eq!(h.select(&[1.0; 10]), 0);
    }

    #[test]
    fn zero_vectors_pick_the_smallest_determinant() {
        let grid = TimeGrid::integer(5).unwrap();
        let pairs = ModelConfig::default_hyper_grid();
        let h = HyperGrid::new(&grid, &pairs, 1, 1e-8).unwrap();
        let best = h.select(&[0.0; 15]);
        let min_ld = h
            .candidates()
            .iter()
            .map(|p| p.log_det())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(h.candidates()[best].log_det(), min_ld);
    }

    #[test]
    fn candidates_sorted_by_weight_then_bias() {
        let grid = TimeGrid::integer(3).unwrap();
        let h = HyperGrid::new(&grid, &[(0.05, 0.02), (0.01, 0.02), (0.01, 0.01)], 1, 1e-8).unwrap();
        let keys: Vec<(f64, f64)> = h
            .candidates()
            .iter()
            .map(|p| (p.params().sigma_bias_sq, p.params().sigma_weight_sq))
            .collect();
        assert_eq!(keys, vec![(0.01, 0.01), (0.01, 0.02), (0.05, 0.02)]);
    }
}
