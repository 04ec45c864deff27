//! Posterior predictive edge scores and attribute predictions, and the
//! evaluation metrics.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::archive::PosteriorArchive;
use crate::error::{Error, Result};
use crate::kernel::{kappa_recursive, GpExtension, KernelParams, TimeGrid};
use crate::model::{Dims, Family, Latents, MultiplexGraphSeries};
use crate::simulate::logistic;

/// How per-draw edge probabilities are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreMode {
    /// Mean of `logistic(ψ)` over draws.
    #[default]
    RaoBlackwell,
    /// Mean of one Bernoulli(`logistic(ψ)`) edge draw per posterior draw.
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeScore {
    pub i: usize,
    pub j: usize,
    pub layer: usize,
    /// Index into the scored grid.
    pub t: usize,
    pub probability: f64,
    pub threshold: f64,
}

impl EdgeScore {
    pub fn predicted(&self) -> bool {
        self.probability > self.threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttrPrediction {
    pub node: usize,
    pub attr: usize,
    pub t: usize,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

/// An edge cell `(i, j, layer, t)` with `i != j`.
pub type EdgeCell = (usize, usize, usize, usize);

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidInput(format!("threshold {threshold} outside (0, 1)")));
    }
    Ok(())
}

fn check_cell(dims: &Dims, &(i, j, l, t): &EdgeCell) -> Result<()> {
    if i == j || i >= dims.nodes || j >= dims.nodes || l >= dims.layers || t >= dims.times {
        return Err(Error::IndexOutOfRange(format!("edge cell ({i}, {j}, {l}, {t})")));
    }
    Ok(())
}

/// Scores arbitrary cells on the archive's own grid.
pub fn score_edges<R: Rng + ?Sized>(
    archive: &PosteriorArchive,
    cells: &[EdgeCell],
    mode: ScoreMode,
    threshold: f64,
    rng: &mut R,
) -> Result<Vec<EdgeScore>> {
    check_threshold(threshold)?;
    if archive.is_empty() {
        return Err(Error::InvalidInput("archive has no draws".into()));
    }
    let q = archive.len() as f64;
    cells
        .iter()
        .map(|cell| {
            check_cell(&archive.dims, cell)?;
            let &(i, j, l, t) = cell;
            let mut acc = 0.0;
            for d in &archive.draws {
                let p = logistic(d.psi(i, j, l, t));
                acc += match mode {
                    ScoreMode::RaoBlackwell => p,
                    ScoreMode::Bernoulli => f64::from(u8::from(rng.random::<f64>() < p)),
                };
            }
            Ok(EdgeScore {
                i: i.min(j),
                j: i.max(j),
                layer: l,
                t,
                probability: (acc / q).clamp(0.0, 1.0),
                threshold,
            })
        })
        .collect()
}

fn check_grid(archive: &PosteriorArchive, graph: &MultiplexGraphSeries) -> Result<()> {
    if archive.grid != *graph.grid() {
        return Err(Error::GridMismatch(format!(
            "archive grid has {} points, graph grid has {}",
            archive.grid.len(),
            graph.num_times()
        )));
    }
    if archive.dims.nodes != graph.num_nodes() || archive.dims.layers != graph.num_layers() {
        return Err(Error::ShapeMismatch("archive and graph sizes differ".into()));
    }
    Ok(())
}

fn cells_where(graph: &MultiplexGraphSeries, observed: bool) -> Vec<EdgeCell> {
    (0..graph.num_cells())
        .filter(|&c| graph.is_observed(c) == observed)
        .map(|c| {
            let (pair, l, t) = graph.cell_coords(c);
            let (i, j) = graph.pair_nodes(pair);
            (i, j, l, t)
        })
        .collect()
}

/// Scores every unobserved cell of `graph`.
pub fn score_missing_edges<R: Rng + ?Sized>(
    archive: &PosteriorArchive,
    graph: &MultiplexGraphSeries,
    mode: ScoreMode,
    threshold: f64,
    rng: &mut R,
) -> Result<Vec<EdgeScore>> {
    check_grid(archive, graph)?;
    score_edges(archive, &cells_where(graph, false), mode, threshold, rng)
}

/// Scores every observed cell of `graph` (in-sample fit).
pub fn score_observed_edges<R: Rng + ?Sized>(
    archive: &PosteriorArchive,
    graph: &MultiplexGraphSeries,
    mode: ScoreMode,
    threshold: f64,
    rng: &mut R,
) -> Result<Vec<EdgeScore>> {
    check_grid(archive, graph)?;
    score_edges(archive, &cells_where(graph, true), mode, threshold, rng)
}

/// Posterior draws of every latent function at `new_times`.
///
/// For each draw, each function is extended by one joint draw from its GP
/// conditional given the draw's values on the fitted grid, under that draw's
/// family hyperparameters. σ² and β are carried over.
pub fn extend_archive<R: Rng + ?Sized>(
    archive: &PosteriorArchive,
    new_times: &TimeGrid,
    rng: &mut R,
) -> Result<PosteriorArchive> {
    let t_obs = archive.grid.len();
    let t_new = new_times.len();
    let dims = Dims {
        times: t_new,
        ..archive.dims
    };
    let mut cache: HashMap<(u64, u64, usize), GpExtension> = HashMap::new();
    let mut draws = Vec::with_capacity(archive.len());
    for d in &archive.draws {
        let mut ext = Latents::zeros(dims, d.is_joint(), d.betas.mu);
        ext.betas = d.betas;
        ext.sigma2 = d.sigma2.clone();
        for f in Family::ALL {
            let (Some(src), Some(params)) = (d.family(f), d.betas.get(f)) else { continue };
            let op = match cache.entry(params.key()) {
                std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::hash_map::Entry::Vacant(e) => {
                    let jitter = relative_jitter(&archive.grid, params, archive.config.jitter);
                    e.insert(GpExtension::new(&archive.grid, new_times, params, jitter)?)
                }
            };
            let dst = ext.family_mut(f).expect("families match between draws");
            for (s, o) in src.chunks(t_obs).zip(dst.chunks_mut(t_new)) {
                o.copy_from_slice(&op.draw(s, rng));
            }
        }
        draws.push(ext);
    }
    Ok(PosteriorArchive {
        grid: new_times.clone(),
        dims,
        draws,
        ..archive.clone_without_draws()
    })
}

fn relative_jitter(grid: &TimeGrid, params: &KernelParams, rel: f64) -> f64 {
    let n = grid.len() as f64;
    rel * grid.times().iter().map(|&t| kappa_recursive(t, t, params)).sum::<f64>() / n
}

impl PosteriorArchive {
    fn clone_without_draws(&self) -> PosteriorArchive {
        PosteriorArchive {
            config: self.config.clone(),
            grid: self.grid.clone(),
            dims: self.dims,
            draws: Vec::new(),
            chain_labels: self.chain_labels.clone(),
            node_ids: self.node_ids.clone(),
            run_info: self.run_info.clone(),
            monitors: self.monitors.clone(),
        }
    }
}

/// Scores every dyad and layer at `new_times` by GP extension of each draw.
pub fn score_future_edges<R: Rng + ?Sized>(
    archive: &PosteriorArchive,
    graph: &MultiplexGraphSeries,
    new_times: &TimeGrid,
    mode: ScoreMode,
    threshold: f64,
    rng: &mut R,
) -> Result<Vec<EdgeScore>> {
    check_grid(archive, graph)?;
    let ext = extend_archive(archive, new_times, rng)?;
    let future = MultiplexGraphSeries::unobserved(graph.num_nodes(), graph.num_layers(), new_times.clone())?;
    score_edges(&ext, &cells_where(&future, false), mode, threshold, rng)
}

/// Posterior predictive draws `x ~ N(attribute mean, σ_k²)` at the target
/// cells `(node, attr, t)` of the archive's grid; point = sample mean,
/// interval = empirical 2.5% and 97.5% quantiles.
pub fn predict_attributes_on_grid<R: Rng + ?Sized>(
    archive: &PosteriorArchive,
    targets: &[(usize, usize, usize)],
    rng: &mut R,
) -> Result<Vec<AttrPrediction>> {
    if archive.is_empty() {
        return Err(Error::InvalidInput("archive has no draws".into()));
    }
    let d = &archive.dims;
    let mut samples = vec![0.0; archive.len()];
    targets
        .iter()
        .map(|&(j, k, t)| {
            if j >= d.nodes || k >= d.attrs || t >= d.times {
                return Err(Error::IndexOutOfRange(format!("attribute cell ({j}, {k}, {t})")));
            }
            for (s, draw) in samples.iter_mut().zip(&archive.draws) {
                let z: f64 = rng.sample(StandardNormal);
                *s = draw.attr_mean(j, k, t) + draw.sigma2[k].sqrt() * z;
            }
            let point = samples.iter().sum::<f64>() / samples.len() as f64;
            samples.sort_by(f64::total_cmp);
            let lo = quantile_sorted(&samples, 0.025).min(point);
            let hi = quantile_sorted(&samples, 0.975).max(point);
            Ok(AttrPrediction {
                node: j,
                attr: k,
                t,
                point,
                lo,
                hi,
            })
        })
        .collect()
}

/// As [`predict_attributes_on_grid`]; with `new_times` the targets index
/// `new_times` and the latents are first extended by GP conditioning.
pub fn predict_attributes<R: Rng + ?Sized>(
    archive: &PosteriorArchive,
    targets: &[(usize, usize, usize)],
    new_times: Option<&TimeGrid>,
    rng: &mut R,
) -> Result<Vec<AttrPrediction>> {
    match new_times {
        Some(grid) => {
            let ext = extend_archive(archive, grid, rng)?;
            predict_attributes_on_grid(&ext, targets, rng)
        }
        None => predict_attributes_on_grid(archive, targets, rng),
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Rank-based (Mann–Whitney) AUC with midranks for tied scores.
pub fn auc(scores: &[(f64, bool)]) -> Result<f64> {
    let pos = scores.iter().filter(|s| s.1).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels {
            positives: pos,
            negatives: neg,
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].0.total_cmp(&scores[b].0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut k = i;
        while k + 1 < order.len() && scores[order[k + 1]].0 == scores[order[i]].0 {
            k += 1;
        }
        // ranks i+1 ..= k+1 share their average
        let mid = (i + k) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=k].iter().filter(|&&o| scores[o].1).count() as f64;
        i = k + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

fn check_lengths(n_pred: usize, n_truth: usize) -> Result<()> {
    if n_pred == 0 {
        return Err(Error::InvalidInput("no predictions to evaluate".into()));
    }
    if n_pred != n_truth {
        return Err(Error::ShapeMismatch(format!("{n_pred} predictions for {n_truth} truths")));
    }
    Ok(())
}

/// Mean squared prediction error of the point predictions.
pub fn mspe(predictions: &[AttrPrediction], truth: &[f64]) -> Result<f64> {
    check_lengths(predictions.len(), truth.len())?;
    Ok(predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| (p.point - t).powi(2))
        .sum::<f64>()
        / truth.len() as f64)
}

/// `(coverage, mean interval length)`.
pub fn interval_metrics(predictions: &[AttrPrediction], truth: &[f64]) -> Result<(f64, f64)> {
    check_lengths(predictions.len(), truth.len())?;
    let n = truth.len() as f64;
    let covered = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p.lo <= **t && **t <= p.hi)
        .count() as f64;
    let length = predictions.iter().map(|p| p.hi - p.lo).sum::<f64>() / n;
    Ok((covered / n, length))
}
