//! Procrustes alignment and PCA projection.

use djl_core::align::{pca_project, procrustes_rotate, procrustes_rotation, LatentPositionFrame};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// signs of R's diagonal folded into Q).
fn haar(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let qr = gaussian(n, n, rng).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
        }
    }
    q
}

fn frame(z: DMatrix<f64>) -> LatentPositionFrame {
    LatentPositionFrame { t: 0, z }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn recovers_rotation_orbit(seed in any::<u64>(), nodes in 3usize..25, rank in 1usize..5) {
        prop_assume!(nodes >= rank);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z0 = gaussian(nodes, rank, &mut rng);
        let o = haar(rank, &mut rng);
        let rotated = frame(&z0 * &o);
        let back = procrustes_rotate(&rotated, &frame(z0.clone())).unwrap();
        prop_assert!((back.z - &z0).amax() < 1e-8);
    }

    #[test]
    fn gram_is_rotation_invariant(seed in any::<u64>(), nodes in 2usize..25, rank in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = gaussian(nodes, rank, &mut rng);
        let o = haar(rank, &mut rng);
        let a = frame(z.clone()).gram();
        let b = frame(&z * &o).gram();
        prop_assert!((a - b).amax() < 1e-10);
    }

    #[test]
    fn rotation_is_orthogonal(seed in any::<u64>(), nodes in 2usize..25, rank in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = procrustes_rotation(&gaussian(nodes, rank, &mut rng), &gaussian(nodes, rank, &mut rng)).unwrap();
        prop_assert!((o.transpose() * &o - DMatrix::identity(rank, rank)).amax() < 1e-10);
    }
}

#[test]
fn no_sampled_orthogonal_matrix_does_better() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let rank = rng.random_range(1..5);
        let z = gaussian(12, rank, &mut rng);
        let z0 = gaussian(12, rank, &mut rng);
        let best = (&z * procrustes_rotation(&z, &z0).unwrap() - &z0).norm();
        for _ in 0..500 {
            let q = haar(rank, &mut rng);
            let fit = (&z * q - &z0).norm();
            assert!(fit >= best - 1e-10, "{fit} < {best}");
        }
    }
}

#[test]
fn pca_orders_components_and_fixes_signs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let scales = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 3.0, 1.5]));
    let z = gaussian(40, 3, &mut rng) * scales;
    let p = pca_project(&frame(z.clone())).unwrap();
    assert!(p.singular_values.windows(2).all(|w| w[0] >= w[1]));
    assert!(!p.rank_deficient);
    for c in 0..2 {
        let col = p.loadings.column(c);
        let lead = col.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        assert!(lead > 0.0);
    }
    // Projection is invariant to rotating the input up to the sign rule.
    let q = haar(3, &mut rng);
    let p2 = pca_project(&frame(&z * q)).unwrap();
    for c in 0..2 {
        let a = p.coords.column(c);
        let b = p2.coords.column(c);
        let same = (a - b).amax().min((a + b).amax());
        assert!(same < 1e-8);
    }
}

#[test]
fn pca_flags_rank_deficiency() {
    let col: Vec<f64> = (0..6).map(|i| i as f64).collect();
    let z = DMatrix::from_fn(6, 2, |i, j| col[i] * (j as f64 + 1.0));
    assert!(pca_project(&frame(z)).unwrap().rank_deficient);
}
