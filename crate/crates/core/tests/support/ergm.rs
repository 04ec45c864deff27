//! Exhaustive ERGM enumeration on four nodes.

/// Marginal dyad probabilities of the ERGM by summing over all 2^6 graphs.
pub fn enumerate_ergm(x: &[Vec<f64>], theta1: f64, theta2: f64) -> Vec<f64> {
    let dyads: Vec<(usize, usize)> = (0..4).flat_map(|j| (j + 1..4).map(move |k| (j, k))).collect();
    let dot = |j: usize, k: usize| x[j].iter().zip(&x[k]).map(|(a, b)| a * b).sum::<f64>();
    let mut z = 0.0;
    let mut marg = vec![0.0; dyads.len()];
    for g in 0u32..64 {
        let (mut s1, mut s2) = (0.0, 0.0);
        for (d, &(j, k)) in dyads.iter().enumerate() {
            if g >> d & 1 == 1 {
                // ordered double sums count (j, k) and (k, j)
                s1 += 2.0 * dot(j, k);
                s2 += 2.0;
            }
        }
        let w = (theta1 * s1 + theta2 * s2).exp();
        z += w;
        for (d, m) in marg.iter_mut().enumerate() {
            if g >> d & 1 == 1 {
                *m += w;
            }
        }
    }
    marg.iter().map(|m| m / z).collect()
}
