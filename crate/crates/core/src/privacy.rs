//! Laplace noise for uploads and the signal-to-noise metric.
//!
//! Uploaded parameters are perturbed with i.i.d. Laplace noise whose scale
//! follows a per-client schedule: proportional to the L1 norm of the cached
//! period gradient (the computable sensitivity surrogate) and inversely
//! proportional to the privacy budget and a geometrically growing weight.
//! Noise therefore anneals as training converges.

use rand::Rng;

use crate::algorithms::ClientHyper;
use crate::numkit::ModelVector;
use crate::{Error, Result};

/// Differential-privacy knobs: the budget `epsilon` and a master switch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpConfig {
    pub epsilon: f64,
    pub enabled: bool,
}

impl DpConfig {
    pub fn enabled(epsilon: f64) -> Self {
        Self { epsilon, enabled: true }
    }

    pub fn off() -> Self {
        Self { epsilon: 0.0, enabled: false }
    }
}

/// Noise attached to one upload, kept for SNR reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRecord {
    pub client: usize,
    /// Communication round index of the upload.
    pub round: usize,
    pub noise: ModelVector,
    pub scale: f64,
}

impl NoiseRecord {
    /// Exact-zero record used when privacy noise is disabled.
    pub fn silent(client: usize, round: usize, n: usize) -> Self {
        Self { client, round, noise: ModelVector::zeros(n), scale: 0.0 }
    }
}

/// Inverse CDF of the standard Laplace law with scale `b`, evaluated at
/// `u in (0,1)`. Exactly zero at `u = 0.5` or `b = 0`.
pub fn laplace_inverse_cdf(u: f64, b: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    if b == 0.0 {
        return 0.0;
    }
    let centered = u - 0.5;
    if centered == 0.0 {
        return 0.0;
    }
    -b * centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}

/// One draw from Laplace(0, b). Degenerates to exactly 0 when `b = 0`.
pub fn laplace_sample(rng: &mut impl Rng, b: f64) -> Result<f64> {
    if b < 0.0 {
        return Err(Error::InvalidInput(format!("Laplace scale must be nonnegative, got {b}")));
    }
    Ok(sample_unchecked(rng, b))
}

fn sample_unchecked(rng: &mut impl Rng, b: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    // Draw u in (0,1); the open-interval guard re-draws the measure-zero 0.
    let mut u: f64 = rng.random();
    while u == 0.0 {
        u = rng.random();
    }
    laplace_inverse_cdf(u, b)
}

/// Upload noise scale for iteration `k`:
/// `b = 2 ||g||_1 / (eps * mu0 * (1 + c ||w_local - w_global||^2) * alpha^(k+1))`.
/// Returns 0 when privacy noise is disabled.
pub fn noise_scale(
    g: &ModelVector,
    w_local: &ModelVector,
    w_global: &ModelVector,
    k: usize,
    dp: &DpConfig,
    hyper: &ClientHyper,
) -> Result<f64> {
    if !dp.enabled {
        return Ok(0.0);
    }
    if !(dp.epsilon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "privacy budget must be positive when enabled, got {}",
            dp.epsilon
        )));
    }
    let drift = w_local.dist_sq(w_global);
    let denom =
        dp.epsilon * hyper.mu0 * (1.0 + hyper.c * drift) * hyper.alpha.powi(k as i32 + 1);
    Ok(2.0 * g.norm1() / denom)
}

/// Scale for the very first upload, before any iteration has run: the
/// schedule at `k = -1` with a unit drift term, `2 ||g||_1 / (eps * mu0)`.
pub fn initial_noise_scale(g: &ModelVector, dp: &DpConfig, hyper: &ClientHyper) -> Result<f64> {
    if !dp.enabled {
        return Ok(0.0);
    }
    if !(dp.epsilon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "privacy budget must be positive when enabled, got {}",
            dp.epsilon
        )));
    }
    Ok(2.0 * g.norm1() / (dp.epsilon * hyper.mu0))
}

/// Adds i.i.d. Laplace(0, b) noise to `w` and records it.
pub fn perturb(
    w: &ModelVector,
    b: f64,
    client: usize,
    round: usize,
    rng: &mut impl Rng,
) -> Result<(ModelVector, NoiseRecord)> {
    if b < 0.0 {
        return Err(Error::InvalidInput(format!("Laplace scale must be nonnegative, got {b}")));
    }
    if b == 0.0 {
        // Bit-exact passthrough so disabling privacy perturbs nothing.
        return Ok((w.clone(), NoiseRecord::silent(client, round, w.len())));
    }
    let noise = ModelVector::new((0..w.len()).map(|_| sample_unchecked(rng, b)).collect());
    let z = w.add_scaled(1.0, &noise);
    Ok((z, NoiseRecord { client, round, noise, scale: b }))
}

/// Minimum over clients of `log10(||w_i|| / ||eps_i||)` at the final
/// iteration. A client with exactly zero noise contributes `+inf` (so a run
/// without privacy noise reports the infinite-SNR sentinel); a client whose
/// parameter is zero but whose noise is not contributes `-inf`.
pub fn snr(final_states: &[(ModelVector, ModelVector)]) -> f64 {
    assert!(!final_states.is_empty(), "snr requires at least one client");
    final_states
        .iter()
        .map(|(w, eps)| {
            let noise_norm = eps.norm();
            if noise_norm == 0.0 {
                f64::INFINITY
            } else {
                let signal = w.norm();
                if signal == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (signal / noise_norm).log10()
                }
            }
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper() -> ClientHyper {
        ClientHyper { mu0: 0.05, c: 0.0, alpha: 1.001 }
    }

    #[test]
    fn inverse_cdf_median_and_zero_scale() {
        assert_eq!(laplace_inverse_cdf(0.5, 3.0), 0.0);
        assert_eq!(laplace_inverse_cdf(0.25, 0.0), 0.0);
        let mut rng = crate::rng::stream(31, 0);
        assert_eq!(laplace_sample(&mut rng, 0.0).unwrap(), 0.0);
        assert!(laplace_sample(&mut rng, -1.0).is_err());
    }

    #[test]
    fn sample_moments_match_standard_laplace() {
        let mut rng = crate::rng::stream(32, 0);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum_abs = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = sample_unchecked(&mut rng, 1.0);
            sum += x;
            sum_abs += x.abs();
            sum_sq += x * x;
        }
        let m = n as f64;
        assert!((sum / m).abs() < 0.005, "mean {}", sum / m);
        assert!((0.98..=1.02).contains(&(sum_abs / m)), "E|x| {}", sum_abs / m);
        assert!((1.94..=2.06).contains(&(sum_sq / m)), "Ex^2 {}", sum_sq / m);
    }

    #[test]
    fn noise_scale_example_and_degeneracies() {
        let g = ModelVector::new(vec![1.0]);
        let w = ModelVector::zeros(1);
        let dp = DpConfig::enabled(0.1);
        let b = noise_scale(&g, &w, &w, 0, &dp, &hyper()).unwrap();
        assert!((b - 2.0 / (0.1 * 0.05 * 1.001)).abs() < 1e-9);
        assert!((b - 399.6004).abs() < 1e-3);

        let zero = noise_scale(&ModelVector::zeros(1), &w, &w, 0, &dp, &hyper()).unwrap();
        assert_eq!(zero, 0.0);
        assert_eq!(noise_scale(&g, &w, &w, 5, &DpConfig::off(), &hyper()).unwrap(), 0.0);
        assert!(noise_scale(&g, &w, &w, 0, &DpConfig::enabled(0.0), &hyper()).is_err());
    }

    #[test]
    fn noise_scale_geometric_decay_and_monotonicity() {
        let g = ModelVector::new(vec![0.3, -0.7]);
        let w = ModelVector::zeros(2);
        let dp = DpConfig::enabled(0.1);
        let h = ClientHyper { mu0: 0.05, c: 1e-2, alpha: 1.001 };
        let b0 = noise_scale(&g, &w, &w, 0, &dp, &h).unwrap();
        let b1 = noise_scale(&g, &w, &w, 1, &dp, &h).unwrap();
        assert!((b1 * h.alpha - b0).abs() < 1e-12 * b0);

        // strictly decreasing in epsilon, k, and drift
        let far = ModelVector::new(vec![2.0, 2.0]);
        assert!(noise_scale(&g, &w, &w, 0, &DpConfig::enabled(0.2), &h).unwrap() < b0);
        assert!(b1 < b0);
        assert!(noise_scale(&g, &far, &w, 0, &dp, &h).unwrap() < b0);

        // initial schedule: no alpha power, no drift term
        let b_init = initial_noise_scale(&g, &dp, &h).unwrap();
        assert!((b_init - 2.0 * g.norm1() / (0.1 * 0.05)).abs() < 1e-12);
    }

    #[test]
    fn perturb_is_deterministic_and_silent_when_off() {
        let w = ModelVector::new(vec![0.5, -1.5, 2.0]);
        let (z1, r1) = perturb(&w, 1.0, 0, 0, &mut crate::rng::stream(33, 0)).unwrap();
        let (z2, _) = perturb(&w, 1.0, 0, 0, &mut crate::rng::stream(33, 0)).unwrap();
        assert_eq!(z1, z2);
        assert_eq!(r1.scale, 1.0);
        assert_eq!(z1.sub(&w), r1.noise);

        let (z0, r0) = perturb(&w, 0.0, 0, 0, &mut crate::rng::stream(33, 1)).unwrap();
        assert_eq!(z0, w);
        assert!(r0.noise.iter().all(|&x| x == 0.0));
        assert_eq!(r0.scale, 0.0);
    }

    #[test]
    fn perturb_l1_concentration() {
        let w = ModelVector::zeros(100_000);
        let (_, rec) = perturb(&w, 2.0, 0, 0, &mut crate::rng::stream(34, 0)).unwrap();
        let mean_abs = rec.noise.norm1() / 100_000.0;
        assert!((1.96..=2.04).contains(&mean_abs), "mean |eps| {mean_abs}");
    }

    #[test]
    fn snr_examples() {
        let unit = |norm: f64, n: usize| {
            let mut v = vec![0.0; n];
            v[0] = norm;
            ModelVector::new(v)
        };
        let all_ten = vec![(unit(10.0, 2), unit(1.0, 2)); 3];
        assert!((snr(&all_ten) - 1.0).abs() < 1e-12);

        let mut mixed = all_ten.clone();
        mixed.push((unit(1.0, 2), unit(10.0, 2)));
        assert!((snr(&mixed) + 1.0).abs() < 1e-12);

        let silent = vec![(unit(10.0, 2), ModelVector::zeros(2))];
        assert_eq!(snr(&silent), f64::INFINITY);
        let drowned = vec![(ModelVector::zeros(2), unit(1.0, 2))];
        assert_eq!(snr(&drowned), f64::NEG_INFINITY);
    }

    #[test]
    fn snr_shifts_by_one_when_noise_grows_tenfold() {
        let mut rng = crate::rng::stream(35, 0);
        let states: Vec<(ModelVector, ModelVector)> = (0..4)
            .map(|_| {
                let w = ModelVector::new((0..3).map(|_| rng.random::<f64>() + 0.1).collect());
                let e = ModelVector::new((0..3).map(|_| rng.random::<f64>() + 0.1).collect());
                (w, e)
            })
            .collect();
        let scaled: Vec<_> = states.iter().map(|(w, e)| (w.clone(), e.scale(10.0))).collect();
        assert!((snr(&states) - snr(&scaled) - 1.0).abs() < 1e-12);
    }
}
