//! Per-iteration update rules for the three simulated algorithms.
//!
//! `fedepm` clients minimize a linearized local model with a growing proximal
//! weight, which reduces to one soft-thresholding step per iteration against
//! the cached period gradient. The baselines take plain gradient steps
//! (`sfedavg`) or a few inner steps on a proximal surrogate (`sfedprox`).
//! Update functions return the number of fresh gradient evaluations they
//! performed so the harness can meter local compute.

use crate::elastic_net::{self, PenaltyConfig};
use crate::numkit::{ModelVector, Objective};
use crate::privacy::NoiseRecord;
use crate::{Error, Result};

/// Which algorithm a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmKind {
    FedEpm,
    SFedAvg,
    SFedProx,
}

impl AlgorithmKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlgorithmKind::FedEpm => "fedepm",
            AlgorithmKind::SFedAvg => "sfedavg",
            AlgorithmKind::SFedProx => "sfedprox",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fedepm" => Ok(AlgorithmKind::FedEpm),
            "sfedavg" => Ok(AlgorithmKind::SFedAvg),
            "sfedprox" => Ok(AlgorithmKind::SFedProx),
            other => Err(Error::Config(format!(
                "unknown algorithm `{other}` (expected fedepm, sfedavg, or sfedprox)"
            ))),
        }
    }
}

impl std::fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-client constants of the proximal-weight and noise schedules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientHyper {
    /// Initial proximal weight, `mu0 > 0`.
    pub mu0: f64,
    /// Drift sensitivity, `c >= 0`.
    pub c: f64,
    /// Geometric growth factor, `alpha > 1`.
    pub alpha: f64,
}

impl Default for ClientHyper {
    fn default() -> Self {
        Self { mu0: 0.05, c: 1e-8, alpha: 1.001 }
    }
}

/// One client's mutable state across iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    /// Current local parameter `w_i`.
    pub w_local: ModelVector,
    /// Last uploaded (noisy) parameter `z_i`; changes only at communication
    /// iterations or initialization.
    pub z_uploaded: ModelVector,
    /// Current proximal weight `mu_i`; never drops below `hyper.mu0`.
    pub mu: f64,
    pub hyper: ClientHyper,
    pub last_noise: NoiseRecord,
}

impl ClientState {
    pub fn fresh(id: usize, n: usize, hyper: ClientHyper) -> Self {
        Self {
            w_local: ModelVector::zeros(n),
            z_uploaded: ModelVector::zeros(n),
            mu: hyper.mu0,
            hyper,
            last_noise: NoiseRecord::silent(id, 0, n),
        }
    }
}

/// Step-size policy for the baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `gamma = 2 d_i / sqrt(2 k0 + floor(k / k0))`, decaying across rounds.
    Decaying,
    /// Constant user-chosen step.
    Fixed(f64),
}

/// Baseline solver knobs: the proximal weight of the surrogate problem and
/// the number of inner gradient steps used to solve it inexactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub prox_mu: f64,
    pub inner_steps: usize,
    pub step_rule: StepRule,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { prox_mu: 1e-5, inner_steps: 3, step_rule: StepRule::Decaying }
    }
}

impl BaselineConfig {
    pub fn step(&self, d_i: usize, k: usize, k0: usize) -> f64 {
        match self.step_rule {
            StepRule::Decaying => step_size_gamma(d_i, k, k0),
            StepRule::Fixed(g) => g,
        }
    }
}

/// Decaying baseline step size `2 d_i / sqrt(2 k0 + floor(k / k0))`.
pub fn step_size_gamma(d_i: usize, k: usize, k0: usize) -> f64 {
    2.0 * d_i as f64 / ((2 * k0 + k / k0) as f64).sqrt()
}

/// One `fedepm` local step against the cached period gradient:
///
/// ```text
/// mu   <- mu0 (1 + c ||w_i - w_tau||^2) alpha^(k+1)
/// wt    = mu (w_i - w_tau) - g
/// w_i  <- w_tau + soft(wt, lambda) / (eta + mu)
/// ```
///
/// This is the exact minimizer of the linearized local model with proximal
/// weight `mu` and the elastic-net coupling to `w_tau`.
pub fn fedepm_client_update(
    state: &mut ClientState,
    w_global: &ModelVector,
    g_cached: &ModelVector,
    k: usize,
    cfg: &PenaltyConfig,
) {
    let h = state.hyper;
    let mu_next = h.mu0 * (1.0 + h.c * state.w_local.dist_sq(w_global)) * h.alpha.powi(k as i32 + 1);
    let mut wt = state.w_local.sub(w_global).scale(mu_next);
    wt.axpy(-1.0, g_cached);
    let step = elastic_net::soft_vec(&wt, cfg.lambda).scale(1.0 / (cfg.eta + mu_next));
    state.w_local = w_global.add_scaled(1.0, &step);
    state.mu = mu_next;
}

/// Server aggregation for `fedepm`: elastic-net consensus over all `m`
/// stored uploads, stale ones included.
pub fn fedepm_aggregate(uploads: &[ModelVector], cfg: &PenaltyConfig) -> Result<ModelVector> {
    elastic_net::ens(uploads, cfg)
}

/// One `sfedavg` local step. Returns the number of fresh gradient
/// evaluations (the communication step reuses the cached period gradient).
pub fn sfedavg_client_update(
    state: &mut ClientState,
    w_global: &ModelVector,
    obj: &impl Objective,
    k: usize,
    k0: usize,
    step: f64,
    g_cached: &ModelVector,
) -> usize {
    if k % k0 == 0 {
        state.w_local = w_global.add_scaled(-step, g_cached);
        0
    } else {
        let (_, g) = obj.value_grad(&state.w_local);
        state.w_local.axpy(-step, &g);
        1
    }
}

/// One `sfedprox` iteration: `inner_steps` gradient steps on the proximal
/// surrogate `f_i(v) + (prox_mu/2) ||v - w_tau||^2`, warm-started from the
/// broadcast at communication iterations and from the local iterate
/// otherwise. Returns the number of fresh gradient evaluations.
pub fn sfedprox_client_update(
    state: &mut ClientState,
    w_global: &ModelVector,
    obj: &impl Objective,
    k: usize,
    k0: usize,
    cfg: &BaselineConfig,
    step: f64,
    g_cached: &ModelVector,
) -> usize {
    let at_comm = k % k0 == 0;
    let mut v = if at_comm { w_global.clone() } else { state.w_local.clone() };
    let mut evals = 0;
    for t in 0..cfg.inner_steps {
        let g = if at_comm && t == 0 {
            g_cached.clone()
        } else {
            evals += 1;
            obj.value_grad(&v).1
        };
        // v <- v - step * (g + prox_mu * (v - w_global))
        let prox = v.sub(w_global);
        v.axpy(-step, &g);
        v.axpy(-step * cfg.prox_mu, &prox);
    }
    state.w_local = v;
    evals
}

/// Plain average of the uploads from the selected clients.
pub fn mean_aggregate(uploads: &[ModelVector]) -> Result<ModelVector> {
    if uploads.is_empty() {
        return Err(Error::InvalidInput("mean_aggregate requires a nonempty selection".into()));
    }
    let n = uploads[0].len();
    if uploads.iter().any(|u| u.len() != n) {
        return Err(Error::InvalidInput("uploads must share dimension".into()));
    }
    let mut sum = ModelVector::zeros(n);
    for u in uploads {
        sum.axpy(1.0, u);
    }
    Ok(sum.scale(1.0 / uploads.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Quadratic;
    use rand::Rng;

    fn state_1d(w: f64, hyper: ClientHyper) -> ClientState {
        let mut s = ClientState::fresh(0, 1, hyper);
        s.w_local = ModelVector::new(vec![w]);
        s
    }

    fn ternary_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        for _ in 0..200 {
            let a = lo + (hi - lo) / 3.0;
            let b = hi - (hi - lo) / 3.0;
            if f(a) <= f(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn fedepm_fixed_point_at_consensus() {
        let cfg = PenaltyConfig::new(0.5, 1.0, 4).unwrap();
        let wg = ModelVector::new(vec![1.5, -2.0]);
        let mut s = ClientState::fresh(0, 2, ClientHyper::default());
        s.w_local = wg.clone();
        fedepm_client_update(&mut s, &wg, &ModelVector::zeros(2), 0, &cfg);
        assert_eq!(s.w_local, wg);
    }

    #[test]
    fn fedepm_hand_computed_step() {
        let cfg = PenaltyConfig::new(0.5, 1.0, 4).unwrap();
        let hyper = ClientHyper { mu0: 1.0, c: 0.0, alpha: 2.0 };
        let mut s = state_1d(1.0, hyper);
        fedepm_client_update(&mut s, &ModelVector::zeros(1), &ModelVector::new(vec![0.2]), 0, &cfg);
        assert!((s.mu - 2.0).abs() < 1e-15);
        assert!((s.w_local[0] - 1.3 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fedepm_step_minimizes_linearized_model() {
        let mut rng = crate::rng::stream(41, 0);
        for _ in 0..50 {
            let cfg = PenaltyConfig::new(
                rng.random::<f64>() * 2.0 + 0.01,
                rng.random::<f64>() * 2.0 + 0.01,
                4,
            )
            .unwrap();
            let hyper = ClientHyper {
                mu0: rng.random::<f64>() * 2.0 + 0.1,
                c: rng.random::<f64>() * 0.1,
                alpha: 1.0 + rng.random::<f64>(),
            };
            let k = rng.random_range(0..5usize);
            let wg = rng.random::<f64>() * 4.0 - 2.0;
            let wk = rng.random::<f64>() * 4.0 - 2.0;
            let g = rng.random::<f64>() * 2.0 - 1.0;

            let mut s = state_1d(wk, hyper);
            fedepm_client_update(
                &mut s,
                &ModelVector::new(vec![wg]),
                &ModelVector::new(vec![g]),
                k,
                &cfg,
            );
            let mu = s.mu;
            // objective of the linearized subproblem (constant term dropped)
            let q = |w: f64| {
                g * (w - wg)
                    + 0.5 * mu * (w - wk) * (w - wk)
                    + cfg.lambda * (w - wg).abs()
                    + 0.5 * cfg.eta * (w - wg) * (w - wg)
            };
            let oracle = ternary_min(-10.0, 10.0, q);
            assert!(
                (s.w_local[0] - oracle).abs() < 1e-6,
                "update {} vs oracle {oracle}",
                s.w_local[0]
            );
        }
    }

    #[test]
    fn fedepm_mu_growth_and_shrinking_step() {
        let cfg = PenaltyConfig::new(0.1, 0.5, 4).unwrap();
        let hyper = ClientHyper { mu0: 0.3, c: 0.5, alpha: 1.2 };
        let mut s = state_1d(2.0, hyper);
        let wg = ModelVector::zeros(1);
        let g = ModelVector::new(vec![0.4]);
        for k in 0..10 {
            let pre = s.w_local.clone();
            fedepm_client_update(&mut s, &wg, &g, k, &cfg);
            assert!(s.mu >= hyper.mu0 * hyper.alpha.powi(k as i32 + 1) - 1e-15);
            // soft step never exceeds the unthresholded step in norm
            let wt = pre.sub(&wg).scale(s.mu).add_scaled(-1.0, &g);
            let moved = s.w_local.sub(&wg).norm();
            assert!(moved <= wt.norm() / (cfg.eta + s.mu) + 1e-15);
        }
    }

    #[test]
    fn fedepm_aggregate_delegates_to_ens() {
        let cfg = PenaltyConfig::new(0.5, 1.0, 4).unwrap();
        let ups =
            vec![ModelVector::new(vec![1.0]), ModelVector::new(vec![3.0])];
        let a = fedepm_aggregate(&ups, &cfg).unwrap();
        assert_eq!(a, crate::elastic_net::ens(&ups, &cfg).unwrap());
        assert!((a[0] - 2.0).abs() < 1e-12);
        let same = vec![ModelVector::new(vec![0.7, -0.3]); 4];
        assert_eq!(fedepm_aggregate(&same, &cfg).unwrap(), same[0]);
    }

    #[test]
    fn step_size_values_and_decay() {
        assert!((step_size_gamma(10, 0, 4) - 20.0 / 8f64.sqrt()).abs() < 1e-12);
        assert!((step_size_gamma(10, 0, 4) - 7.07107).abs() < 1e-5);
        assert!((step_size_gamma(1, 0, 2) - 1.0).abs() < 1e-15);
        assert!(step_size_gamma(10, 4, 4) < step_size_gamma(10, 0, 4));
    }

    #[test]
    fn sfedavg_steps() {
        let q = Quadratic::new(ModelVector::zeros(1), 1.0);
        let wg = ModelVector::new(vec![1.0]);
        let g = ModelVector::new(vec![2.0]);
        let mut s = state_1d(5.0, ClientHyper::default());
        // communication iteration: restart from broadcast
        let evals = sfedavg_client_update(&mut s, &wg, &q, 0, 4, 0.1, &g);
        assert_eq!(evals, 0);
        assert!((s.w_local[0] - 0.8).abs() < 1e-15);
        // zero step leaves the state unchanged
        let before = s.w_local.clone();
        sfedavg_client_update(&mut s, &wg, &q, 1, 4, 0.0, &g);
        assert_eq!(s.w_local, before);
    }

    #[test]
    fn sfedavg_descends_on_quadratic() {
        let mut rng = crate::rng::stream(42, 0);
        let center = ModelVector::new((0..3).map(|_| rng.random::<f64>()).collect());
        let q = Quadratic::new(center, 1.0);
        let mut s = ClientState::fresh(0, 3, ClientHyper::default());
        s.w_local = ModelVector::new(vec![2.0, -1.0, 0.5]);
        let g0 = q.value_grad(&s.w_local).1;
        let mut prev = q.value_grad(&s.w_local).0;
        for k in 1..=100 {
            sfedavg_client_update(&mut s, &ModelVector::zeros(3), &q, k, 1000, 0.3, &g0);
            let v = q.value_grad(&s.w_local).0;
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn sfedprox_matches_sfedavg_when_trivial() {
        let q = Quadratic::new(ModelVector::new(vec![0.3]), 1.0);
        let wg = ModelVector::new(vec![1.0]);
        let g = q.value_grad(&wg).1;
        let cfg = BaselineConfig { prox_mu: 0.0, inner_steps: 1, step_rule: StepRule::Fixed(0.2) };
        let mut a = state_1d(2.0, ClientHyper::default());
        let mut b = state_1d(2.0, ClientHyper::default());
        sfedprox_client_update(&mut a, &wg, &q, 0, 4, &cfg, 0.2, &g);
        sfedavg_client_update(&mut b, &wg, &q, 0, 4, 0.2, &g);
        assert_eq!(a.w_local, b.w_local);
    }

    #[test]
    fn sfedprox_hand_computed_inner_step() {
        // f(v) = v^2/2, w_global = 1, v1 = 1, gamma = 0.1, mu = 1 -> v2 = 0.9
        let q = Quadratic::new(ModelVector::zeros(1), 1.0);
        let wg = ModelVector::new(vec![1.0]);
        let g = q.value_grad(&wg).1;
        let cfg = BaselineConfig { prox_mu: 1.0, inner_steps: 1, step_rule: StepRule::Fixed(0.1) };
        let mut s = state_1d(7.0, ClientHyper::default());
        let evals = sfedprox_client_update(&mut s, &wg, &q, 0, 4, &cfg, 0.1, &g);
        assert_eq!(evals, 0);
        assert!((s.w_local[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn sfedprox_approaches_exact_prox_minimizer() {
        let mut rng = crate::rng::stream(43, 0);
        for _ in 0..10 {
            let center = rng.random::<f64>() * 2.0 - 1.0;
            let q = Quadratic::new(ModelVector::new(vec![center]), 1.0);
            let wg_val = rng.random::<f64>() * 2.0 - 1.0;
            let wg = ModelVector::new(vec![wg_val]);
            let mu = 0.5;
            let g = q.value_grad(&wg).1;
            let cfg =
                BaselineConfig { prox_mu: mu, inner_steps: 200, step_rule: StepRule::Fixed(0.05) };
            let mut s = state_1d(0.0, ClientHyper::default());
            sfedprox_client_update(&mut s, &wg, &q, 0, 4, &cfg, 0.05, &g);
            let oracle = ternary_min(-5.0, 5.0, |v| {
                0.5 * (v - center) * (v - center) + 0.5 * mu * (v - wg_val) * (v - wg_val)
            });
            assert!((s.w_local[0] - oracle).abs() < 1e-4);
        }
    }

    #[test]
    fn mean_aggregate_examples() {
        let single = vec![ModelVector::new(vec![2.5])];
        assert_eq!(mean_aggregate(&single).unwrap(), single[0]);
        let two = vec![ModelVector::new(vec![0.0]), ModelVector::new(vec![2.0])];
        assert_eq!(mean_aggregate(&two).unwrap().as_slice(), &[1.0]);
        assert!(mean_aggregate(&[]).is_err());

        let mut rng = crate::rng::stream(44, 0);
        let ups: Vec<ModelVector> =
            (0..5).map(|_| ModelVector::new(vec![rng.random(), rng.random()])).collect();
        let m = mean_aggregate(&ups).unwrap();
        for j in 0..2 {
            let expect = ups.iter().map(|u| u[j]).sum::<f64>() / 5.0;
            assert!((m[j] - expect).abs() < 1e-12);
        }
    }
}
