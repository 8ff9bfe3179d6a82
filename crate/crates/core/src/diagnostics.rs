//! Stationarity residuals, the exact-penalty threshold, and the per-run
//! descent monitor.
//!
//! Residuals for the penalized problem treat the L1 subdifferential as
//! set-valued: wherever a client agrees with the consensus point the
//! subgradient entry is chosen inside `[-lambda, lambda]` to minimize the
//! violation, so the residual is zero exactly when the first-order inclusion
//! can be satisfied.

use crate::algorithms::ClientHyper;
use crate::elastic_net::{phi, PenaltyConfig};
use crate::numkit::{ModelVector, Objective};
use crate::privacy::DpConfig;

/// Penalized objective `F(w, W) = sum_i [ f_i(w_i) + phi(w_i - w) ]`.
pub fn penalized_objective<O: Objective>(
    w: &ModelVector,
    locals: &[ModelVector],
    objs: &[O],
    cfg: &PenaltyConfig,
) -> f64 {
    debug_assert_eq!(locals.len(), objs.len());
    locals
        .iter()
        .zip(objs.iter())
        .map(|(wi, obj)| obj.value_grad(wi).0 + phi(&wi.sub(w), cfg))
        .sum()
}

/// Exact-penalty threshold: the largest absolute gradient entry over all
/// clients at the candidate consensus point.
pub fn lambda_star<O: Objective>(w_star: &ModelVector, objs: &[O]) -> f64 {
    objs.iter()
        .map(|obj| {
            obj.value_grad(w_star)
                .1
                .iter()
                .map(|g| g.abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Residual of the original consensus-constrained optimality system at
/// `(w, W)` with candidate multipliers `pis`: the largest of the per-client
/// gradient residuals, the consensus gaps, and the multiplier-sum norm.
pub fn stationarity_residual_original<O: Objective>(
    w: &ModelVector,
    locals: &[ModelVector],
    objs: &[O],
    pis: &[ModelVector],
) -> f64 {
    let mut worst = 0.0f64;
    let mut pi_sum = ModelVector::zeros(w.len());
    for ((wi, obj), pi) in locals.iter().zip(objs.iter()).zip(pis.iter()) {
        let g = obj.value_grad(wi).1;
        worst = worst.max(g.add_scaled(1.0, pi).norm());
        worst = worst.max(wi.sub(w).norm());
        pi_sum.axpy(1.0, pi);
    }
    worst.max(pi_sum.norm())
}

// Distance of `q` to the interval [-r, r].
fn interval_dist(q: f64, r: f64) -> f64 {
    (q.abs() - r).max(0.0)
}

/// Residual of the penalized problem's first-order system at `(w, W)`.
///
/// Per client and coordinate, with `q = grad_i[j] + eta (w_ij - w_j)`:
/// tied coordinates contribute the distance of `-q` to `[-lambda, lambda]`,
/// others contribute `|q + lambda sign(w_ij - w_j)|`. The multiplier-sum
/// block reuses the same minimal selection per coordinate.
pub fn stationarity_residual_penalized<O: Objective>(
    w: &ModelVector,
    locals: &[ModelVector],
    objs: &[O],
    cfg: &PenaltyConfig,
) -> f64 {
    let n = w.len();
    let mut worst = 0.0f64;
    // Per-coordinate forced part of sum_i (lambda pi_i + eta (w_i - w)) and
    // the count of clients whose pi entry is still free.
    let mut sum_base = vec![0.0f64; n];
    let mut free = vec![0usize; n];
    for (wi, obj) in locals.iter().zip(objs.iter()) {
        let g = obj.value_grad(wi).1;
        for j in 0..n {
            let gap = wi[j] - w[j];
            let q = g[j] + cfg.eta * gap;
            if gap != 0.0 {
                worst = worst.max((q + cfg.lambda * gap.signum()).abs());
                sum_base[j] += cfg.lambda * gap.signum() + cfg.eta * gap;
            } else {
                worst = worst.max(interval_dist(q, cfg.lambda));
                free[j] += 1;
            }
        }
    }
    for j in 0..n {
        worst = worst.max(interval_dist(sum_base[j], cfg.lambda * free[j] as f64));
    }
    worst
}

/// One monitor record per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRecord {
    pub iter: usize,
    /// Penalized objective `F(w^tau_k, W^k)` on the realized path.
    pub f_value: f64,
    /// Decreasing-majorant surrogate; `None` while it is undefined (`c = 0`).
    pub l_surrogate: Option<f64>,
    /// `sum_i ||w_i^{k+1} - w_i^k||^2`.
    pub dw_clients_sq: f64,
    /// `||w^{tau_{k+1}} - w^{tau_k}||^2`; zero between communications.
    pub dw_global_sq: f64,
}

/// Convergence diagnostics gathered over a run.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceTrace {
    pub records: Vec<MonitorRecord>,
    /// Set when `c = 0` made the surrogate undefined; `f_value` is still kept.
    pub l_undefined: bool,
    /// Set when no coverage window was configured and `s0 = ceil(1/rho)` was
    /// substituted in the surrogate.
    pub s0_nominal: bool,
}

/// Builds the [`ConvergenceTrace`] iteration by iteration.
///
/// The surrogate adds to `F` the vanishing terms
/// `r_i^2 / (2 mu0 c (alpha - 1) alpha^k) + 2 phi_{i,k-1}`, with the
/// unobservable sensitivity bound replaced by the running maximum of
/// `2 ||g_i||_1` seen at gradient refreshes, and the expectation over noise
/// replaced by the realized sample path.
pub struct Monitor {
    trace: ConvergenceTrace,
    hypers: Vec<ClientHyper>,
    r_bounds: Vec<f64>,
    delta_inf: Vec<f64>,
    dp: DpConfig,
    lambda: f64,
    eta: f64,
    n: usize,
    s0: usize,
    k0: usize,
}

impl Monitor {
    pub fn new(
        n: usize,
        cfg: &PenaltyConfig,
        dp: DpConfig,
        hypers: Vec<ClientHyper>,
        r_bounds: Vec<f64>,
        s0: Option<usize>,
        rho: f64,
    ) -> Self {
        let m = hypers.len();
        let nominal = s0.is_none();
        let s0 = s0.unwrap_or_else(|| (1.0 / rho).ceil() as usize);
        let l_undefined = hypers.iter().any(|h| h.c == 0.0);
        Monitor {
            trace: ConvergenceTrace { records: Vec::new(), l_undefined, s0_nominal: nominal },
            hypers,
            r_bounds,
            delta_inf: vec![0.0; m],
            dp,
            lambda: cfg.lambda,
            eta: cfg.eta,
            n,
            s0,
            k0: cfg.k0,
        }
    }

    /// Feed the freshly cached gradient of client `i`; keeps the running
    /// maximum of the sensitivity surrogate `2 ||g||_1`.
    pub fn observe_gradient(&mut self, i: usize, g: &ModelVector) {
        let surrogate = 2.0 * g.norm1();
        if surrogate > self.delta_inf[i] {
            self.delta_inf[i] = surrogate;
        }
    }

    fn phi_term(&self, i: usize, k: i32) -> f64 {
        let delta = if self.dp.enabled { self.delta_inf[i] } else { 0.0 };
        if delta == 0.0 {
            return 0.0;
        }
        let h = &self.hypers[i];
        let boost = h.alpha.powi(2 * (self.s0 * self.k0) as i32);
        let eps_mu = self.dp.epsilon * h.mu0;
        let first = 4.0 * self.n as f64 * self.lambda * delta * boost
            / (eps_mu * (h.alpha - 1.0) * h.alpha.powi(k));
        let second = 8.0 * self.n as f64 * self.eta * (delta * boost).powi(2)
            / (eps_mu * eps_mu * (h.alpha * h.alpha - 1.0) * h.alpha.powi(2 * k));
        first + second
    }

    /// Append the record for iteration `k`.
    pub fn record(&mut self, k: usize, f_value: f64, dw_clients_sq: f64, dw_global_sq: f64) {
        let l_surrogate = if self.trace.l_undefined {
            None
        } else {
            let mut tail = 0.0;
            for i in 0..self.hypers.len() {
                let h = &self.hypers[i];
                let r = self.r_bounds[i];
                tail += r * r / (2.0 * h.mu0 * h.c * (h.alpha - 1.0) * h.alpha.powi(k as i32));
                tail += 2.0 * self.phi_term(i, k as i32 - 1);
            }
            Some(f_value + tail)
        };
        self.trace.records.push(MonitorRecord {
            iter: k,
            f_value,
            l_surrogate,
            dw_clients_sq,
            dw_global_sq,
        });
    }

    pub fn trace(&self) -> &ConvergenceTrace {
        &self.trace
    }

    pub fn into_trace(self) -> ConvergenceTrace {
        self.trace
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Quadratic;
    use rand::Rng;

    fn quad_family(centers: &[f64]) -> Vec<Quadratic> {
        centers
            .iter()
            .map(|&a| Quadratic::new(ModelVector::new(vec![a]), 1.0))
            .collect()
    }

    fn consensus(w: f64, m: usize) -> (ModelVector, Vec<ModelVector>) {
        (ModelVector::new(vec![w]), vec![ModelVector::new(vec![w]); m])
    }

    #[test]
    fn penalized_objective_examples() {
        let cfg = PenaltyConfig::new(1.0, 2.0, 1).unwrap();
        let objs = quad_family(&[0.0, 2.0, 4.0]);
        let (w, locals) = consensus(1.0, 3);
        let expect: f64 = objs.iter().map(|q| q.value_grad(&w).0).sum();
        assert!((penalized_objective(&w, &locals, &objs, &cfg) - expect).abs() < 1e-12);

        // one client, zero loss, unit gap: phi((1)) = 1 + 1 = 2
        let zero = vec![Quadratic::new(ModelVector::zeros(1), 0.0)];
        let w0 = ModelVector::zeros(1);
        let l1 = vec![ModelVector::new(vec![1.0])];
        assert!((penalized_objective(&w0, &l1, &zero, &cfg) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn penalized_objective_recomputation() {
        let mut rng = crate::rng::stream(51, 0);
        let cfg = PenaltyConfig::new(0.7, 1.1, 1).unwrap();
        let objs: Vec<Quadratic> = (0..4)
            .map(|_| Quadratic::new(ModelVector::new(vec![rng.random(), rng.random()]), 1.0))
            .collect();
        let w = ModelVector::new(vec![rng.random(), rng.random()]);
        let locals: Vec<ModelVector> =
            (0..4).map(|_| ModelVector::new(vec![rng.random(), rng.random()])).collect();
        let mut expect = 0.0;
        for (wi, q) in locals.iter().zip(objs.iter()) {
            let gap = wi.sub(&w);
            expect += q.value_grad(wi).0 + cfg.lambda * gap.norm1() + 0.5 * cfg.eta * gap.norm_sq();
        }
        assert!((penalized_objective(&w, &locals, &objs, &cfg) - expect).abs() < 1e-12);
    }

    #[test]
    fn lambda_star_examples() {
        let objs = quad_family(&[0.0, 2.0, 4.0]);
        assert!((lambda_star(&ModelVector::new(vec![2.0]), &objs) - 2.0).abs() < 1e-15);
        // all gradients vanish at the shared center
        let same = quad_family(&[1.0, 1.0]);
        assert_eq!(lambda_star(&ModelVector::new(vec![1.0]), &same), 0.0);
    }

    #[test]
    fn lambda_star_matches_brute_force_and_scales() {
        let mut rng = crate::rng::stream(52, 0);
        let centers: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let objs = quad_family(&centers);
        let w = ModelVector::new(vec![rng.random::<f64>()]);
        let brute = centers.iter().map(|a| (w[0] - a).abs()).fold(0.0, f64::max);
        assert!((lambda_star(&w, &objs) - brute).abs() < 1e-15);

        let t = 3.5;
        let scaled: Vec<Quadratic> =
            centers.iter().map(|&a| Quadratic::new(ModelVector::new(vec![a]), t)).collect();
        assert!((lambda_star(&w, &scaled) - t * brute).abs() < 1e-12);
    }

    #[test]
    fn original_residual_examples() {
        let objs = quad_family(&[0.0, 2.0, 4.0]);
        let (w, locals) = consensus(2.0, 3);
        // pi_i = a_i - w* satisfies the system exactly
        let pis: Vec<ModelVector> =
            [0.0, 2.0, 4.0].iter().map(|&a| ModelVector::new(vec![a - 2.0])).collect();
        assert!(stationarity_residual_original(&w, &locals, &objs, &pis) < 1e-15);

        // perturbing only the consensus point moves only the gap residual
        let delta = 0.3;
        let w2 = ModelVector::new(vec![2.0 + delta]);
        let r = stationarity_residual_original(&w2, &locals, &objs, &pis);
        assert!((r - delta).abs() < 1e-15);

        // residual is a max of norms, never negative
        let r3 = stationarity_residual_original(
            &ModelVector::new(vec![-1.0]),
            &locals,
            &objs,
            &pis,
        );
        assert!(r3 >= 0.0);
    }

    #[test]
    fn penalized_residual_threshold_behavior() {
        let objs = quad_family(&[0.0, 2.0, 4.0]);
        let (w, locals) = consensus(2.0, 3);
        let at = |lambda: f64| {
            let cfg = PenaltyConfig::new(lambda, 1.0, 1).unwrap();
            stationarity_residual_penalized(&w, &locals, &objs, &cfg)
        };
        assert!(at(2.0) <= 1e-10);
        assert!(at(2.5) <= 1e-10);
        assert!((at(1.0) - 1.0).abs() < 1e-12);

        // zero losses at full consensus: residual vanishes for any lambda
        let zeros = vec![Quadratic::new(ModelVector::zeros(1), 0.0); 3];
        let cfg = PenaltyConfig::new(0.3, 1.0, 1).unwrap();
        assert_eq!(stationarity_residual_penalized(&w, &locals, &zeros, &cfg), 0.0);
    }

    #[test]
    fn exact_penalty_certificate_on_random_quadratics() {
        let mut rng = crate::rng::stream(53, 0);
        for _ in 0..20 {
            let centers: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let objs = quad_family(&centers);
            let mean = centers.iter().sum::<f64>() / 4.0;
            let (w, locals) = consensus(mean, 4);
            let ls = lambda_star(&w, &objs);
            if ls < 1e-6 {
                continue;
            }
            let tight = PenaltyConfig::new(ls + 1e-12, 1.0, 1).unwrap();
            assert!(stationarity_residual_penalized(&w, &locals, &objs, &tight) <= 1e-10);
            let lo = PenaltyConfig::new(0.5 * ls, 1.0, 1).unwrap();
            let r = stationarity_residual_penalized(&w, &locals, &objs, &lo);
            assert!(r > 0.5 * (ls - 0.5 * ls) - 1e-12, "residual {r} too small");
        }
    }

    #[test]
    fn monitor_surrogate_noise_free_form() {
        let cfg = PenaltyConfig::new(0.5, 1.0, 4).unwrap();
        let h = ClientHyper { mu0: 0.4, c: 0.01, alpha: 1.2 };
        let r = vec![0.8, 1.3];
        let mut mon = Monitor::new(
            1,
            &cfg,
            DpConfig::off(),
            vec![h, h],
            r.clone(),
            None,
            0.5,
        );
        mon.observe_gradient(0, &ModelVector::new(vec![5.0]));
        mon.record(3, 2.0, 0.0, 0.0);
        let rec = &mon.trace().records[0];
        let expect: f64 = r
            .iter()
            .map(|ri| ri * ri / (2.0 * h.mu0 * h.c * (h.alpha - 1.0) * h.alpha.powi(3)))
            .sum();
        assert!((rec.l_surrogate.unwrap() - (2.0 + expect)).abs() < 1e-12);
        assert!(mon.trace().s0_nominal);

        // with noise enabled the observed gradient activates the phi terms
        let mut mon2 = Monitor::new(
            1,
            &cfg,
            DpConfig::enabled(0.1),
            vec![h, h],
            r,
            Some(2),
            0.5,
        );
        mon2.observe_gradient(0, &ModelVector::new(vec![5.0]));
        mon2.record(3, 2.0, 0.0, 0.0);
        assert!(mon2.trace().records[0].l_surrogate.unwrap() > rec.l_surrogate.unwrap());
        assert!(!mon2.trace().s0_nominal);
    }

    #[test]
    fn monitor_flags_undefined_surrogate_when_c_is_zero() {
        let cfg = PenaltyConfig::new(0.5, 1.0, 4).unwrap();
        let h = ClientHyper { mu0: 0.4, c: 0.0, alpha: 1.2 };
        let mut mon = Monitor::new(1, &cfg, DpConfig::off(), vec![h], vec![1.0], None, 1.0);
        mon.record(0, 3.5, 0.0, 0.0);
        assert!(mon.trace().l_undefined);
        let rec = &mon.trace().records[0];
        assert_eq!(rec.f_value, 3.5);
        assert!(rec.l_surrogate.is_none());
    }
}
