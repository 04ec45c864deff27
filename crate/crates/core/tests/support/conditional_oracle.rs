//! Finite-difference oracle for the Gaussian full conditionals: each block's
//! (mean, precision) against the gradient and Hessian of the joint log density.

#![allow(dead_code)]

use djl_core::gibbs::{
    alpha_conditional, eta_conditional, mu_conditional, xi_attr_conditional, xi_conditional, zeta_conditional,
    GaussianConditional,
};
use djl_core::kernel::{KernelParams, PriorFactor, TimeGrid};
use djl_core::model::{
    log_posterior_unnorm, AttributeSeries, Dims, EdgeValue, Family, FamilyPriors, LatentState, Latents, ModelConfig,
    MultiplexGraphSeries,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Large enough that the depth-0 covariances (rank 2) stay well conditioned
/// and finite differences of the log density are not swamped by rounding.
pub const JITTER: f64 = 1e-3;

pub struct Instance {
    pub state: LatentState,
    pub graph: MultiplexGraphSeries,
    pub attrs: AttributeSeries,
    pub config: ModelConfig,
}

pub fn instance(seed: u64, joint: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims {
        nodes: 3,
        layers: 2,
        attrs: 2,
        times: 4,
        shared_rank: 2,
        layer_rank: 2,
    };
    let grid = TimeGrid::integer(4).unwrap();
    let beta = |rng: &mut ChaCha8Rng| {
        KernelParams::new(rng.random_range(0.01..0.1), rng.random_range(0.01..0.1), rng.random_range(0..3)).unwrap()
    };
    let mut lat = Latents::zeros(dims, joint, beta(&mut rng));
    for f in Family::ALL {
        if lat.family(f).is_some() {
            let b = beta(&mut rng);
            lat.betas.set(f, b);
            let prior = PriorFactor::new(&grid, &b, JITTER).unwrap();
            for chunk in lat.family_mut(f).unwrap().chunks_mut(4) {
                chunk.copy_from_slice(&prior.draw_prior(&mut rng));
            }
        }
    }
    lat.sigma2 = vec![rng.random_range(0.3..2.0), rng.random_range(0.3..2.0)];

    let mut graph = MultiplexGraphSeries::unobserved(3, 2, grid.clone()).unwrap();
    for j in 0..3 {
        for k in j + 1..3 {
            for l in 0..2 {
                for t in 0..4 {
                    let v = match rng.random_range(0..5) {
                        0 => EdgeValue::Unknown,
                        1 | 2 => EdgeValue::Present,
                        _ => EdgeValue::Absent,
                    };
                    graph.set(j, k, l, t, v).unwrap();
                }
            }
        }
    }
    let mut attrs = AttributeSeries::unobserved(3, 2, grid);
    for j in 0..3 {
        for k in 0..2 {
            for t in 0..4 {
                let v = (rng.random::<f64>() > 0.2).then(|| rng.sample::<f64, _>(StandardNormal));
                attrs.set(j, k, t, v).unwrap();
            }
        }
    }
    let mut state = LatentState::new(lat, &graph);
    for (c, w) in state.omega.iter_mut().enumerate() {
        if graph.is_observed(c) {
            *w = rng.random_range(0.05..0.3);
        }
    }
    let config = ModelConfig {
        shared_rank: 2,
        layer_rank: 2,
        joint_mode: joint,
        jitter: JITTER,
        ..ModelConfig::default()
    };
    Instance {
        state,
        graph,
        attrs,
        config,
    }
}

/// Log density as a function of the `T` coordinates at `offset` of `family`.
pub fn slice_fn(inst: &Instance, family: Family, offset: usize) -> impl Fn(&[f64]) -> f64 + '_ {
    move |x: &[f64]| {
        let mut s = inst.state.clone();
        s.latents.family_mut(family).unwrap()[offset..offset + x.len()].copy_from_slice(x);
        log_posterior_unnorm(&s, &inst.graph, &inst.attrs, &inst.config).unwrap()
    }
}

pub fn check_block(inst: &Instance, family: Family, offset: usize, cond: &GaussianConditional, label: &str) {
    let priors = FamilyPriors::build(inst.graph.grid(), &inst.state.latents.betas, inst.config.jitter).unwrap();
    let prior = priors.get(family).unwrap();
    let mean = cond.mean(prior).unwrap();
    let prec = cond.precision(prior);
    let f = slice_fn(inst, family, offset);
    let n = mean.len();

    // The slice is exactly quadratic, so wide steps lose no accuracy.
    let h = 0.05;
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let mut p = mean.clone();
        let mut m = mean.clone();
        p[i] += h;
        m[i] -= h;
        grad[i] = (f(&p) - f(&m)) / (2.0 * h);
    }
    // Newton step from the claimed mean lands on the true maximizer.
    let step = prec.clone().lu().solve(&DVector::from_vec(grad.clone())).unwrap();
    let scale = mean.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    assert!(
        step.amax() <= 1e-6 * scale,
        "{label}: mean off by {} (grad {grad:?})",
        step.amax()
    );

    let h = 0.05;
    let f0 = f(&mean);
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            let shift = |di: f64, dk: f64| {
                let mut x = mean.clone();
                x[i] += di;
                x[k] += dk;
                f(&x)
            };
            hess[(i, k)] = if i == k {
                (shift(h, 0.0) - 2.0 * f0 + shift(-h, 0.0)) / (h * h)
            } else {
                (shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h)
            };
        }
    }
    let err = (&hess + &prec).amax();
    assert!(
        err <= 1e-4 * prec.amax(),
        "{label}: Hessian differs from −precision by {err} (scale {})",
        prec.amax()
    );
}

pub fn check_all_blocks(seed: u64, joint: bool) {
    let inst = instance(seed, joint);
    let lat = &inst.state.latents;
    let d = lat.dims;
    let (om, g, a) = (&inst.state.omega, &inst.graph, &inst.attrs);
    check_block(&inst, Family::Mu, 0, &mu_conditional(lat, om, g), "mu");
    for k in 0..d.attrs {
        check_block(&inst, Family::Eta, d.eta_index(k), &eta_conditional(lat, a, k), "eta");
    }
    for j in 0..d.nodes {
        for r in 0..d.shared_rank {
            let c = zeta_conditional(lat, om, g, j, r);
            check_block(&inst, Family::Zeta, d.zeta_index(j, r), &c, &format!("zeta {j},{r}"));
        }
        for l in 0..d.layers {
            for r in 0..d.layer_rank {
                let c = xi_conditional(lat, om, g, a, j, l, r);
                check_block(&inst, Family::Xi, d.xi_index(j, l, r), &c, &format!("xi {j},{l},{r}"));
                if !joint {
                    let c = xi_attr_conditional(lat, a, j, l, r);
                    check_block(&inst, Family::XiAttr, d.xi_index(j, l, r), &c, &format!("xi_attr {j},{l},{r}"));
                }
            }
        }
    }
    for k in 0..d.attrs {
        for l in 0..d.layers {
            for r in 0..d.layer_rank {
                let c = alpha_conditional(lat, a, k, l, r);
                check_block(&inst, Family::Alpha, d.alpha_index(k, l, r), &c, &format!("alpha {k},{l},{r}"));
            }
        }
    }
}
