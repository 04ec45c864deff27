//! Exact PG(1, c) draws by Devroye's alternating-series rejection sampler.
//!
//! `PG(1, c) = J*(1, c/2) / 4`. The Jacobi variate `J*(1, z)` is proposed from a
//! two-piece envelope split at `t = 0.64`: a truncated inverse Gaussian on
//! `(0, t]` and a shifted exponential on `(t, ∞)`, then accepted by evaluating
//! the alternating series for the target density until the partial sums bracket
//! the uniform.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};

/// Split point of the proposal envelope.
const TRUNC: f64 = 0.64;
/// Proposals allowed before declaring the sampler stuck.
const MAX_PROPOSALS: usize = 1_000_000;

/// One PG(1, c) variate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PgDraw(f64);

impl PgDraw {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `E[PG(1, c)] = tanh(c/2) / (2c)`, with the limit `1/4` at zero.
pub fn pg1_mean(c: f64) -> f64 {
    let c = c.abs();
    if c < 1e-6 {
        // next term of the series is -c²/48
        0.25 - c * c / 48.0
    } else {
        (c / 2.0).tanh() / (2.0 * c)
    }
}

/// Exact draw from PG(1, c).
pub fn sample_pg1<R: Rng + ?Sized>(c: f64, rng: &mut R) -> Result<PgDraw> {
    if !c.is_finite() {
        return Err(Error::InvalidInput(format!("PG tilt must be finite, got {c}")));
    }
    let z = c.abs() * 0.5;
    let k = PI * PI / 8.0 + 0.5 * z * z;
    let p_exp = exponential_mass(z, k);

    for _ in 0..MAX_PROPOSALS {
        let x = if rng.random::<f64>() < p_exp {
            TRUNC + rng.sample::<f64, _>(Exp1) / k
        } else {
            truncated_inverse_gaussian(z, rng)
        };

        let mut s = series_coef(0, x);
        let y = rng.random::<f64>() * s;
        let mut n = 0usize;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return Ok(PgDraw(0.25 * x));
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
    Err(Error::SamplerStall {
        c,
        proposals: MAX_PROPOSALS,
    })
}

/// Probability that the envelope proposes from the exponential piece.
fn exponential_mass(z: f64, k: f64) -> f64 {
    let t = TRUNC;
    let b = (t * z - 1.0) / t.sqrt();
    let a = -(t * z + 1.0) / t.sqrt();
    let x0 = k.ln() + k * t;
    let xb = x0 - z + log_normal_cdf(b);
    let xa = x0 + z + log_normal_cdf(a);
    // q/p = (4/π)(e^xb + e^xa), computed in log space
    let hi = xb.max(xa);
    let log_ratio = (4.0 / PI).ln() + hi + ((xb - hi).exp() + (xa - hi).exp()).ln();
    if log_ratio > 700.0 {
        0.0
    } else {
        1.0 / (1.0 + log_ratio.exp())
    }
}

/// n-th term of the alternating series for the J*(1, 0) density, using the
/// small-x form below the split point and the large-x form above it.
fn series_coef(n: usize, x: f64) -> f64 {
    let np = n as f64 + 0.5;
    if x > TRUNC {
        let kk = PI * np;
        kk * (-0.5 * kk * kk * x).exp()
    } else {
        (-1.5 * ((0.5 * PI).ln() + x.ln()) + (PI * np).ln() - 2.0 * np * np / x).exp()
    }
}

/// Inverse Gaussian with mean `1/z` and shape 1, truncated to `(0, TRUNC]`.
fn truncated_inverse_gaussian<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let t = TRUNC;
    let mu = if z > 0.0 { 1.0 / z } else { f64::INFINITY };
    if mu > t {
        // z small: propose from the truncated Lévy (z = 0) law and accept with
        // probability exp(-z² x / 2).
        loop {
            let e1 = loop {
                let e1: f64 = rng.sample(Exp1);
                let e2: f64 = rng.sample(Exp1);
                if e1 * e1 <= 2.0 * e2 / t {
                    break e1;
                }
            };
            let x = t / ((1.0 + t * e1) * (1.0 + t * e1));
            let alpha = (-0.5 * z * z * x).exp();
            if rng.random::<f64>() <= alpha {
                return x;
            }
        }
    } else {
        loop {
            let n: f64 = rng.sample(StandardNormal);
            let y = n * n;
            let mut x = mu + 0.5 * mu * mu * y - 0.5 * mu * (4.0 * mu * y + (mu * y) * (mu * y)).sqrt();
            if rng.random::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x <= t {
                return x;
            }
        }
    }
}

/// `log Φ(x)` accurate into the far lower tail.
fn log_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Φ(x) ~ φ(x)/|x| · (1 - 1/x² + 3/x⁴ - 15/x⁶)
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
    }
}

/// Truncated sum-of-gammas representation
/// `ω ≈ (1/2π²) Σ_{k=1}^{terms} g_k / ((k − 1/2)² + c²/(4π²))`, `g_k ~ Exp(1)`.
///
/// Approximate; kept as an independent reference for testing the exact sampler.
pub fn sample_pg1_truncated<R: Rng + ?Sized>(c: f64, terms: usize, rng: &mut R) -> f64 {
    let shift = c * c / (4.0 * PI * PI);
    let mut acc = 0.0;
    for k in 1..=terms {
        let g: f64 = rng.sample(Exp1);
        let kk = k as f64 - 0.5;
        acc += g / (kk * kk + shift);
    }
    acc / (2.0 * PI * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mean_formula() {
        assert_eq!(pg1_mean(0.0), 0.25);
        assert!((pg1_mean(2.0) - 1f64.tanh() / 4.0).abs() < 1e-15);
        assert_eq!(pg1_mean(-2.0), pg1_mean(2.0));
        // continuity across the small-c switch
        assert!((pg1_mean(1e-6) - pg1_mean(1.0001e-6)).abs() < 1e-12);
    }

    #[test]
    fn draws_are_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &c in &[0.0, 0.1, 1.0, 4.0, 30.0, 250.0] {
            for _ in 0..2000 {
                assert!(sample_pg1(c, &mut rng).unwrap().value() > 0.0);
            }
        }
    }

    #[test]
    fn large_tilt_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = 60.0;
        let n = 20_000;
        let mean = (0..n).map(|_| sample_pg1(c, &mut rng).unwrap().value()).sum::<f64>() / n as f64;
        assert!((mean / pg1_mean(c) - 1.0).abs() < 0.01);
    }

    #[test]
    fn non_finite_tilt_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_pg1(f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn log_cdf_branches_agree() {
        // both expressions are valid near the switch point
        let x: f64 = -30.0;
        let direct = (0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)).ln();
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        let asym = -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + series.ln();
        assert!((direct - asym).abs() < 1e-8);
    }

    #[test]
    fn envelope_mass_is_probability() {
        for &z in &[0.0, 0.5, 2.0, 20.0, 200.0] {
            let k = PI * PI / 8.0 + 0.5 * z * z;
            let p = exponential_mass(z, k);
            assert!((0.0..=1.0).contains(&p), "z = {z}: {p}");
        }
    }
}
