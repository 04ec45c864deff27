//! Deep arc-cosine (NN-GP) covariance kernel over one-dimensional time inputs.
//!
//! The kernel starts from the linear base case `σ_c² + σ_g² t s` and applies
//! the ReLU arc-cosine map `depth` times. Covariance matrices built from it on
//! integer grids are smooth and close to rank deficient (condition numbers of
//! 1e10 and beyond are normal), so every Gaussian computation here goes through
//! Cholesky factors and never forms an explicit inverse of a covariance.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Smallest relative jitter tried when a factorization fails.
const ESCALATION_START: f64 = 1e-10;
/// Largest relative jitter before giving up.
const ESCALATION_LIMIT: f64 = 1e-4;

/// Hyperparameters of the depth-`depth` arc-cosine kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Bias variance σ_c².
    pub sigma_bias_sq: f64,
    /// Weight variance σ_g².
    pub sigma_weight_sq: f64,
    /// Number of arc-cosine layers applied on top of the linear base kernel.
    pub depth: usize,
}

impl KernelParams {
    pub fn new(sigma_bias_sq: f64, sigma_weight_sq: f64, depth: usize) -> Result<Self> {
        let p = KernelParams {
            sigma_bias_sq,
            sigma_weight_sq,
            depth,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.sigma_bias_sq) || !ok(self.sigma_weight_sq) {
            return Err(Error::InvalidInput(format!(
                "kernel variances must be positive and finite, got ({}, {})",
                self.sigma_bias_sq, self.sigma_weight_sq
            )));
        }
        Ok(())
    }

    /// Bitwise key, usable for caching factorizations per parameter value.
    pub fn key(&self) -> (u64, u64, usize) {
        (
            self.sigma_bias_sq.to_bits(),
            self.sigma_weight_sq.to_bits(),
            self.depth,
        )
    }
}

/// Strictly increasing, finite time stamps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidInput("time grid must be nonempty".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("time grid contains non-finite values".into()));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "time grid must be strictly increasing".into(),
            ));
        }
        Ok(TimeGrid { times })
    }

    /// The grid `1, 2, ..., n`.
    pub fn integer(n: usize) -> Result<Self> {
        TimeGrid::new((1..=n).map(|t| t as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of a time stamp that is exactly on the grid.
    pub fn position(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| s == t)
    }

    /// Leading `n` points.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        TimeGrid::new(self.times[..n.min(self.times.len())].to_vec())
    }
}

/// Linear base case `κ_0(t_i, t_j) = σ_c² + σ_g² t_i t_j`.
pub fn kappa_base(t_i: f64, t_j: f64, params: &KernelParams) -> f64 {
    params.sigma_bias_sq + params.sigma_weight_sq * (t_i * t_j)
}

/// Depth-`params.depth` arc-cosine kernel.
///
/// Each layer maps `(k_ii, k_ij, k_jj)` to
/// `σ_c² + σ_g² √(k_ii k_jj) (sin γ + (π − γ) cos γ) / 2π` with
/// `cos γ = k_ij / √(k_ii k_jj)` clamped to `[-1, 1]`.
pub fn kappa_recursive(t_i: f64, t_j: f64, params: &KernelParams) -> f64 {
    let c = params.sigma_bias_sq;
    let g = params.sigma_weight_sq;
    let mut k_ij = kappa_base(t_i, t_j, params);
    let mut k_ii = kappa_base(t_i, t_i, params);
    let mut k_jj = kappa_base(t_j, t_j, params);
    for _ in 0..params.depth {
        let norm = (k_ii * k_jj).sqrt();
        let cos = if norm > 0.0 {
            (k_ij / norm).clamp(-1.0, 1.0)
        } else {
            1.0
        };
        let gamma = cos.acos();
        k_ij = c + g * norm * (gamma.sin() + (PI - gamma) * cos) / (2.0 * PI);
        k_ii = c + g * k_ii / 2.0;
        k_jj = c + g * k_jj / 2.0;
    }
    k_ij
}

/// Kernel matrix between two sets of time stamps, without jitter.
pub fn cross_cov(rows: &[f64], cols: &[f64], params: &KernelParams) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        kappa_recursive(rows[i], cols[j], params)
    })
}

/// A symmetric covariance matrix over a time grid together with its lower
/// Cholesky factor.
///
/// `values` already contains any jitter that was needed to factorize it.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    grid: TimeGrid,
    values: DMatrix<f64>,
    chol: DMatrix<f64>,
    jitter: f64,
}

impl CovMatrix {
    /// Wraps an arbitrary symmetric matrix, escalating jitter (relative to the
    /// mean diagonal) until it factorizes.
    pub fn from_values(grid: TimeGrid, values: DMatrix<f64>) -> Result<Self> {
        let scale = diag_scale(&values);
        CovMatrix::with_scale(grid, values, scale)
    }

    /// As [`CovMatrix::from_values`] with an explicit scale for the jitter ladder.
    pub fn with_scale(grid: TimeGrid, values: DMatrix<f64>, scale: f64) -> Result<Self> {
        let n = grid.len();
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "covariance is {}x{} but grid has {} points",
                values.nrows(),
                values.ncols(),
                n
            )));
        }
        let values = symmetrize(values);
        let (chol, added) = cholesky_escalating(&values, scale)?;
        let mut values = values;
        for i in 0..n {
            values[(i, i)] += added;
        }
        Ok(CovMatrix {
            grid,
            values,
            chol,
            jitter: added,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Lower-triangular `L` with `L Lᵀ = values`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Jitter added by escalation on top of what the caller requested.
    pub fn escalation_jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Builds `Σ(β)` on `grid` with `jitter` added to the diagonal.
pub fn build_cov(grid: &TimeGrid, params: &KernelParams, jitter: f64) -> Result<CovMatrix> {
    params.validate()?;
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::InvalidInput(format!("jitter must be >= 0, got {jitter}")));
    }
    let mut k = cross_cov(grid.times(), grid.times(), params);
    for i in 0..grid.len() {
        k[(i, i)] += jitter;
    }
    CovMatrix::from_values(grid.clone(), k)
}

/// Draws `mean + L z` with `z` standard normal.
pub fn sample_mvn<R: Rng + ?Sized>(mean: &[f64], cov: &CovMatrix, rng: &mut R) -> Result<Vec<f64>> {
    if mean.len() != cov.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mean has length {} but covariance is {}x{}",
            mean.len(),
            cov.dim(),
            cov.dim()
        )));
    }
    let z = standard_normal_vec(mean.len(), rng);
    let lz = &cov.chol * z;
    Ok(mean.iter().zip(lz.iter()).map(|(m, e)| m + e).collect())
}

/// Conditional law of a zero-mean GP at `new_times` given its values on `obs_grid`.
///
/// Returns `(K_*ᵀ(K + jitter I)⁻¹ y, K_** − K_*ᵀ(K + jitter I)⁻¹ K_*)`.
pub fn gp_condition(
    obs_grid: &TimeGrid,
    obs_values: &[f64],
    new_times: &TimeGrid,
    params: &KernelParams,
    jitter: f64,
) -> Result<(Vec<f64>, CovMatrix)> {
    if obs_values.len() != obs_grid.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} observed values for a grid of {} points",
            obs_values.len(),
            obs_grid.len()
        )));
    }
    let ext = GpExtension::new(obs_grid, new_times, params, jitter)?;
    Ok((ext.mean(obs_values), ext.cov))
}

/// Precomputed GP conditioning operator from an observed grid to new times.
#[derive(Debug, Clone)]
pub struct GpExtension {
    /// `K_*ᵀ (K + jitter I)⁻¹`, shape `new × obs`.
    weights: DMatrix<f64>,
    cov: CovMatrix,
}

impl GpExtension {
    pub fn new(
        obs_grid: &TimeGrid,
        new_times: &TimeGrid,
        params: &KernelParams,
        jitter: f64,
    ) -> Result<Self> {
        let k_obs = build_cov(obs_grid, params, jitter)?;
        let k_cross = cross_cov(obs_grid.times(), new_times.times(), params);
        let k_new = cross_cov(new_times.times(), new_times.times(), params);
        let l = k_obs.cholesky_factor();
        // A = L⁻¹ K_*, so K_*ᵀ K⁻¹ K_* = AᵀA and K_*ᵀ K⁻¹ = (L⁻ᵀ A)ᵀ.
        let a = l
            .solve_lower_triangular(&k_cross)
            .ok_or(Error::FactorizationFailure { jitter })?;
        let b = l
            .tr_solve_lower_triangular(&a)
            .ok_or(Error::FactorizationFailure { jitter })?;
        let weights = b.transpose();
        let cond = &k_new - a.transpose() * &a;
        let scale = diag_scale(&k_new);
        let cov = CovMatrix::with_scale(new_times.clone(), cond, scale)?;
        Ok(GpExtension { weights, cov })
    }

    pub fn mean(&self, obs_values: &[f64]) -> Vec<f64> {
        let y = DVector::from_column_slice(obs_values);
        (&self.weights * y).iter().copied().collect()
    }

    pub fn cov(&self) -> &CovMatrix {
        &self.cov
    }

    /// One joint draw at the new times given observed values.
    pub fn draw<R: Rng + ?Sized>(&self, obs_values: &[f64], rng: &mut R) -> Vec<f64> {
        let mean = self.mean(obs_values);
        let z = standard_normal_vec(mean.len(), rng);
        let lz = self.cov.cholesky_factor() * z;
        mean.iter().zip(lz.iter()).map(|(m, e)| m + e).collect()
    }
}

/// Factorized NN-GP prior `N(0, Σ(β))` for one latent-function family.
///
/// Supports the conjugate update used by every Gaussian Gibbs block, where the
/// data contribute a diagonal precision `D` and a linear term `b`:
/// the conditional is `N(P⁻¹ b, P⁻¹)` with `P = Σ⁻¹ + D`. Writing `Σ = L Lᵀ`,
/// `P⁻¹ = L (I + Lᵀ D L)⁻¹ Lᵀ`, which stays well conditioned even when Σ is not.
#[derive(Debug, Clone)]
pub struct PriorFactor {
    params: KernelParams,
    cov: CovMatrix,
    precision: DMatrix<f64>,
}

impl PriorFactor {
    /// `rel_jitter` is scaled by the mean diagonal of the kernel matrix.
    pub fn new(grid: &TimeGrid, params: &KernelParams, rel_jitter: f64) -> Result<Self> {
        params.validate()?;
        let raw = cross_cov(grid.times(), grid.times(), params);
        let jitter = rel_jitter * diag_scale(&raw);
        let cov = build_cov(grid, params, jitter)?;
        let n = grid.len();
        let precision = Cholesky::new(cov.values().clone())
            .map(|c| c.inverse())
            .unwrap_or_else(|| {
                let l = cov.cholesky_factor();
                let linv = l
                    .solve_lower_triangular(&DMatrix::identity(n, n))
                    .unwrap_or_else(|| DMatrix::zeros(n, n));
                linv.transpose() * linv
            });
        Ok(PriorFactor {
            params: *params,
            cov,
            precision: symmetrize(precision),
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn cov(&self) -> &CovMatrix {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    /// `Σ⁻¹`. Accurate enough for traces and likelihood comparisons, not used
    /// inside the Gibbs draws.
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn log_det(&self) -> f64 {
        self.cov.log_det()
    }

    /// `vᵀ Σ⁻¹ v` through a triangular solve.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let y = DVector::from_column_slice(v);
        match self.cov.cholesky_factor().solve_lower_triangular(&y) {
            Some(w) => w.norm_squared(),
            None => f64::INFINITY,
        }
    }

    /// `log N(v | 0, Σ)`.
    pub fn log_density(&self, v: &[f64]) -> f64 {
        let n = v.len() as f64;
        -0.5 * (self.log_det() + self.quad_form(v) + n * (2.0 * PI).ln())
    }

    pub fn draw_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = standard_normal_vec(self.dim(), rng);
        (self.cov.cholesky_factor() * z).iter().copied().collect()
    }

    fn posterior_factors(&self, diag_precision: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if diag_precision.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "diagonal precision of length {} for a {n}-point prior",
                diag_precision.len()
            )));
        }
        let l = self.cov.cholesky_factor();
        let mut dl = l.clone();
        for (i, d) in diag_precision.iter().enumerate() {
            dl.row_mut(i).scale_mut(*d);
        }
        let mut b = l.transpose() * dl;
        for i in 0..n {
            b[(i, i)] += 1.0;
        }
        let b = symmetrize(b);
        Cholesky::new(b)
            .map(|c| c.l())
            .ok_or(Error::FactorizationFailure { jitter: 0.0 })
    }

    /// Mean `(Σ⁻¹ + D)⁻¹ b` of the conjugate conditional.
    pub fn conditional_mean(&self, diag_precision: &[f64], linear: &[f64]) -> Result<Vec<f64>> {
        let c = self.posterior_factors(diag_precision)?;
        Ok(self.mean_with(&c, linear))
    }

    fn mean_with(&self, c: &DMatrix<f64>, linear: &[f64]) -> Vec<f64> {
        let l = self.cov.cholesky_factor();
        let u = l.transpose() * DVector::from_column_slice(linear);
        let v = c
            .solve_lower_triangular(&u)
            .and_then(|w| c.tr_solve_lower_triangular(&w))
            .expect("triangular factor with unit-bounded diagonal");
        (l * v).iter().copied().collect()
    }

    /// One draw from `N((Σ⁻¹ + D)⁻¹ b, (Σ⁻¹ + D)⁻¹)`.
    pub fn draw_conditional<R: Rng + ?Sized>(
        &self,
        diag_precision: &[f64],
        linear: &[f64],
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let c = self.posterior_factors(diag_precision)?;
        let mean = self.mean_with(&c, linear);
        let z = standard_normal_vec(self.dim(), rng);
        let w = c
            .tr_solve_lower_triangular(&z)
            .ok_or(Error::FactorizationFailure { jitter: 0.0 })?;
        let noise = self.cov.cholesky_factor() * w;
        Ok(mean.iter().zip(noise.iter()).map(|(m, e)| m + e).collect())
    }
}

pub(crate) fn standard_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Mean absolute diagonal, falling back to 1 for zero or non-finite matrices.
fn diag_scale(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows().max(1) as f64;
    let s = m.diagonal().iter().map(|d| d.abs()).sum::<f64>() / n;
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Lower Cholesky factor of `m`, adding `rel * scale` to the diagonal for
/// `rel = 1e-10, 1e-9, ..., 1e-4` until it succeeds. Returns the factor and the
/// jitter that was added.
pub(crate) fn cholesky_escalating(m: &DMatrix<f64>, scale: f64) -> Result<(DMatrix<f64>, f64)> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::FactorizationFailure { jitter: 0.0 });
    }
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c.l(), 0.0));
    }
    let mut rel = ESCALATION_START;
    loop {
        let jitter = rel * scale;
        let mut a = m.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(a) {
            return Ok((c.l(), jitter));
        }
        if rel >= ESCALATION_LIMIT {
            return Err(Error::FactorizationFailure { jitter });
        }
        rel *= 10.0;
    }
}
