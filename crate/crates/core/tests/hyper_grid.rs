//! Grid selection of the kernel hyperparameters.

use djl_core::gibbs::HyperGrid;
use djl_core::kernel::{KernelParams, PriorFactor, TimeGrid};
use djl_core::model::ModelConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn draws(prior: &PriorFactor, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).flat_map(|_| prior.draw_prior(rng)).collect()
}

#[test]
fn recovers_generating_candidate() {
    let grid = TimeGrid::integer(20).unwrap();
    let hyper = HyperGrid::new(&grid, &ModelConfig::default_hyper_grid(), 1, 1e-8).unwrap();
    for (c, g) in [(0.03, 0.08), (0.1, 0.01), (0.05, 0.05)] {
        let truth = KernelParams::new(c, g, 1).unwrap();
        let prior = PriorFactor::new(&grid, &truth, 1e-8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64((c * 1000.0 + g * 10.0) as u64);
        let hits = (0..20)
            .filter(|_| {
                let v = draws(&prior, 50, &mut rng);
                hyper.candidates()[hyper.select(&v)].params() == &truth
            })
            .count();
        assert!(hits >= 16, "({c}, {g}): {hits}/20");
    }
}

#[test]
fn single_candidate_always_selected() {
    let grid = TimeGrid::integer(6).unwrap();
    let hyper = HyperGrid::new(&grid, &[(0.02, 0.07)], 2, 1e-8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let other = PriorFactor::new(&grid, &KernelParams::new(0.1, 0.1, 2).unwrap(), 1e-8).unwrap();
    assert_eq!(hyper.select(&draws(&other, 5, &mut rng)), 0);
}

#[test]
fn zero_vectors_pick_smallest_determinant() {
    let grid = TimeGrid::integer(8).unwrap();
    let pairs = ModelConfig::default_hyper_grid();
    let hyper = HyperGrid::new(&grid, &pairs, 1, 1e-8).unwrap();
    let best = hyper.select(&vec![0.0; 8 * 4]);
    let min_logdet = hyper
        .candidates()
        .iter()
        .map(|p| p.log_det())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(hyper.candidates()[best].log_det(), min_logdet);
}

#[test]
fn ties_go_to_smallest_weight_then_bias() {
    let grid = TimeGrid::integer(4).unwrap();
    // Duplicate scores: the same pair listed twice collapses to one candidate.
    let hyper = HyperGrid::new(&grid, &[(0.05, 0.02), (0.01, 0.09), (0.05, 0.02)], 1, 1e-8).unwrap();
    assert_eq!(hyper.candidates().len(), 2);
    let order: Vec<(f64, f64)> = hyper
        .candidates()
        .iter()
        .map(|p| (p.params().sigma_weight_sq, p.params().sigma_bias_sq))
        .collect();
    assert_eq!(order, vec![(0.02, 0.05), (0.09, 0.01)]);
}

#[test]
fn empty_grid_rejected() {
    let grid = TimeGrid::integer(4).unwrap();
    assert!(HyperGrid::new(&grid, &[], 1, 1e-8).is_err());
}
