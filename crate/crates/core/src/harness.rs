//! Round-driven orchestration of a federated run.
//!
//! The iteration clock ticks `k = 0, 1, 2, ...`. At every `k` divisible by
//! `k0` the server aggregates the stored uploads, selects the participants
//! of the new period, and the selected clients refresh their cached gradient
//! at the broadcast point. Every iteration the selected clients take one
//! local step (everyone else holds state bit-exactly). On the last iteration
//! of a period the selected clients perturb and upload their parameters.
//! Stopping rules are evaluated at communication iterations only.
//!
//! Timing uses a deterministic virtual clock by default (costs proportional
//! to gradient evaluations, local vector work, and server aggregation) so
//! traces are machine-independent; wall-clock metering is available for
//! reporting runs.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algorithms::{
    fedepm_aggregate, fedepm_client_update, mean_aggregate, sfedavg_client_update,
    sfedprox_client_update, AlgorithmKind, BaselineConfig, ClientHyper, ClientState,
};
use crate::diagnostics::{penalized_objective, ConvergenceTrace, Monitor};
use crate::elastic_net::PenaltyConfig;
use crate::numkit::{ModelVector, Objective};
use crate::privacy::{initial_noise_scale, noise_scale, perturb, snr, DpConfig};
use crate::rng::{client_tag, stream, tags};
use crate::{Error, Result};

/// Virtual cost of touching one sample coordinate in a gradient pass.
const GRAD_UNIT: f64 = 1e-8;
/// Virtual cost of one coordinate of local vector arithmetic.
const VEC_UNIT: f64 = 1e-8;

/// How the server picks participants each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionPolicy {
    /// Uniform subset of size `max(1, round(rho m))` without replacement.
    Iid,
    /// A shuffled partition of the clients into `s0` blocks served
    /// round-robin, so every window of `s0` consecutive rounds covers all
    /// clients.
    Coverage,
}

/// Stateful client selector; coverage keeps its block partition for the
/// whole run so that any `s0` consecutive selections cover `[m]`.
pub struct ClientSelector {
    policy: SelectionPolicy,
    m: usize,
    rho: f64,
    blocks: Vec<Vec<usize>>,
    cursor: usize,
}

impl ClientSelector {
    pub fn new(
        policy: SelectionPolicy,
        m: usize,
        rho: f64,
        s0: Option<usize>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidInput(format!("rho must lie in (0, 1], got {rho}")));
        }
        let blocks = match policy {
            SelectionPolicy::Iid => Vec::new(),
            SelectionPolicy::Coverage => {
                let s0 = s0.ok_or_else(|| {
                    Error::InvalidInput("coverage selection requires s0".into())
                })?;
                if s0 == 0 || s0 > m {
                    return Err(Error::InvalidInput(format!(
                        "s0 must lie in [1, m], got {s0}"
                    )));
                }
                let mut ids: Vec<usize> = (0..m).collect();
                use rand::seq::SliceRandom;
                ids.shuffle(rng);
                // First (m mod s0) blocks take one extra client.
                let base = m / s0;
                let extra = m % s0;
                let mut blocks = Vec::with_capacity(s0);
                let mut at = 0;
                for b in 0..s0 {
                    let size = base + usize::from(b < extra);
                    let mut block: Vec<usize> = ids[at..at + size].to_vec();
                    block.sort_unstable();
                    blocks.push(block);
                    at += size;
                }
                blocks
            }
        };
        Ok(Self { policy, m, rho, blocks, cursor: 0 })
    }

    /// Participant ids for the next round, ascending.
    pub fn select(&mut self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        match self.policy {
            SelectionPolicy::Iid => {
                let take = ((self.rho * self.m as f64).round() as usize).clamp(1, self.m);
                let mut ids: Vec<usize> =
                    rand::seq::index::sample(rng, self.m, take).into_vec();
                ids.sort_unstable();
                ids
            }
            SelectionPolicy::Coverage => {
                let block = self.blocks[self.cursor % self.blocks.len()].clone();
                self.cursor += 1;
                block
            }
        }
    }
}

/// Stopping rule: gradient threshold, or the variance of the last four
/// communication-round objectives falling under `n 1e-8 / (1 + |f|)`.
pub fn should_stop(history: &[f64], grad_sq: f64, n: usize) -> bool {
    if grad_sq < 1e-6 {
        return true;
    }
    if history.len() < 4 {
        return false;
    }
    let tail = &history[history.len() - 4..];
    let mean = tail.iter().sum::<f64>() / 4.0;
    let var = tail.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / 4.0;
    let latest = *history.last().unwrap();
    var <= n as f64 * 1e-8 / (1.0 + latest.abs())
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientThreshold,
    ObjectiveVariance,
    BudgetExhausted,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::GradientThreshold => "gradient-threshold",
            StopReason::ObjectiveVariance => "objective-variance",
            StopReason::BudgetExhausted => "budget-exhausted",
        }
    }
}

/// Full configuration of one run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithm: AlgorithmKind,
    pub m: usize,
    pub k0: usize,
    pub rho: f64,
    pub dp: DpConfig,
    pub selection: SelectionPolicy,
    pub s0: Option<usize>,
    pub max_iterations: usize,
    pub seed: u64,
    pub penalty: PenaltyConfig,
    pub baseline: BaselineConfig,
    pub hyper: ClientHyper,
    /// Update selected clients on a worker pool; output is bit-identical to
    /// the sequential order.
    pub parallel_clients: bool,
    /// Meter real elapsed time instead of the virtual clock (reporting only;
    /// breaks trace determinism).
    pub wall_clock: bool,
}

impl ExperimentConfig {
    /// Configuration with the experiment defaults: `lambda = eta/2` and
    /// `eta = (0.02 m + 1)(rho + 0.1) 1e-5`.
    pub fn new(algorithm: AlgorithmKind, m: usize, k0: usize, rho: f64) -> Result<Self> {
        let penalty = Self::default_penalty(m, k0, rho)?;
        Ok(Self {
            algorithm,
            m,
            k0,
            rho,
            dp: DpConfig::enabled(0.1),
            selection: SelectionPolicy::Iid,
            s0: None,
            max_iterations: 20_000,
            seed: 0,
            penalty,
            baseline: BaselineConfig::default(),
            hyper: ClientHyper::default(),
            parallel_clients: false,
            wall_clock: false,
        })
    }

    pub fn default_penalty(m: usize, k0: usize, rho: f64) -> Result<PenaltyConfig> {
        let eta = (0.02 * m as f64 + 1.0) * (rho + 0.1) * 1e-5;
        PenaltyConfig::new(eta / 2.0, eta, k0)
    }

    fn validate<O: Objective>(&self, objs: &[O]) -> Result<usize> {
        if objs.len() != self.m {
            return Err(Error::InvalidInput(format!(
                "expected {} client objectives, got {}",
                self.m,
                objs.len()
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidInput("need at least one client".into()));
        }
        let n = objs[0].dim();
        if objs.iter().any(|o| o.dim() != n) {
            return Err(Error::InvalidInput("client objectives must share dimension".into()));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidInput(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if self.max_iterations < self.k0 {
            return Err(Error::InvalidInput("max_iterations must be at least k0".into()));
        }
        Ok(n)
    }
}

/// Per-communication-round record.
#[derive(Debug, Clone)]
pub struct RoundTrace {
    /// Iteration at which this aggregation happened (also the index into the
    /// convergence trace).
    pub iter: usize,
    /// Communication round index `tau = iter / k0`.
    pub tau: usize,
    /// Cumulative aggregation count.
    pub cr: usize,
    /// Global objective divided by the client count.
    pub f_over_m: f64,
    /// Squared gradient norm of the global objective at the broadcast point.
    pub grad_sq: f64,
    /// Mean per-selected-client local compute of the period that just ended.
    pub lct_mean: f64,
    /// Max-over-clients variant of the same.
    pub lct_max: f64,
    /// Cumulative compute seconds at the time of aggregation.
    pub tct: f64,
    /// Signal-to-noise ratio of the stored uploads.
    pub snr: f64,
    pub selected: Vec<usize>,
}

/// Headline metrics of a finished run.
#[derive(Debug, Clone, Copy)]
pub struct RunMetrics {
    pub f_over_m: f64,
    pub cr: usize,
    pub tct: f64,
    pub lct_mean: f64,
    pub lct_max: f64,
    pub snr: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_w: ModelVector,
    pub rounds: Vec<RoundTrace>,
    pub convergence: ConvergenceTrace,
    pub stop: StopReason,
    pub iterations: usize,
    pub metrics: RunMetrics,
    rows: Vec<TraceRow>,
}

/// One merged trace line per executed iteration.
#[derive(Debug, Clone)]
struct TraceRow {
    iter: usize,
    tau: usize,
    cr: usize,
    f_over_m: f64,
    grad_sq: f64,
    f_penalized: f64,
    l_surrogate: Option<f64>,
    dw_clients_sq: f64,
    dw_global_sq: f64,
    lct_s: f64,
    tct_s: f64,
    snr: f64,
}

pub const TRACE_HEADER: &str =
    "iter,tau,cr,f_over_m,grad_sq,F,L_surrogate,dW_sq,dw_global_sq,lct_s,tct_s,snr";

impl RunResult {
    /// Merged round/convergence trace as CSV with a fixed header. Floats are
    /// printed with Rust's shortest round-trip formatting, so identical runs
    /// produce identical bytes.
    pub fn trace_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let l = r.l_surrogate.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.iter,
                r.tau,
                r.cr,
                r.f_over_m,
                r.grad_sq,
                r.f_penalized,
                l,
                r.dw_clients_sq,
                r.dw_global_sq,
                r.lct_s,
                r.tct_s,
                r.snr
            ));
        }
        out
    }
}

/// Timing metrics of a finished run: communication rounds, total compute
/// time, and the mean (and max) per-period local compute time.
pub fn timing_metrics(result: &RunResult) -> (usize, f64, f64) {
    (result.metrics.cr, result.metrics.tct, result.metrics.lct_mean)
}

/// The simulation engine. [`run_experiment`] drives it to completion; tests
/// can step it manually.
pub struct Simulation<'a, O: Objective> {
    cfg: &'a ExperimentConfig,
    objs: &'a [O],
    n: usize,
    pub clients: Vec<ClientState>,
    pub w_global: ModelVector,
    pub selected: Vec<usize>,
    g_cache: Vec<ModelVector>,
    noise_rngs: Vec<ChaCha8Rng>,
    sel_rng: ChaCha8Rng,
    selector: ClientSelector,
    monitor: Monitor,
    f_history: Vec<f64>,
    rounds: Vec<RoundTrace>,
    rows: Vec<TraceRow>,
    k: usize,
    cr: usize,
    tct: f64,
    period_cost: Vec<f64>,
    lct_means: Vec<f64>,
    lct_maxes: Vec<f64>,
    last_lct_mean: f64,
    last_lct_max: f64,
    last_f: f64,
    last_grad_sq: f64,
    last_snr: f64,
    stop: Option<StopReason>,
}

impl<'a, O: Objective> Simulation<'a, O> {
    pub fn new(cfg: &'a ExperimentConfig, objs: &'a [O]) -> Result<Self> {
        let n = cfg.validate(objs)?;
        let mut sel_rng = stream(cfg.seed, tags::SELECTION);
        let selector =
            ClientSelector::new(cfg.selection, cfg.m, cfg.rho, cfg.s0, &mut sel_rng)?;
        let mut noise_rngs: Vec<ChaCha8Rng> =
            (0..cfg.m).map(|i| stream(cfg.seed, client_tag(i))).collect();

        let r_bounds: Vec<f64> = objs.iter().map(|o| o.grad_lipschitz()).collect();
        let mut monitor = Monitor::new(
            n,
            &cfg.penalty,
            cfg.dp,
            vec![cfg.hyper; cfg.m],
            r_bounds,
            cfg.s0,
            cfg.rho,
        );

        // Initialization: every client starts at zero and uploads a noisy
        // copy so the server has a full set of stored parameters.
        let mut clients: Vec<ClientState> =
            (0..cfg.m).map(|i| ClientState::fresh(i, n, cfg.hyper)).collect();
        let mut init_cost = 0.0;
        for (i, client) in clients.iter_mut().enumerate() {
            let (_, g0) = objs[i].value_grad(&client.w_local);
            init_cost += grad_cost(objs[i].sample_count(), n);
            monitor.observe_gradient(i, &g0);
            let b0 = initial_noise_scale(&g0, &cfg.dp, &cfg.hyper)?;
            let (z, rec) = perturb(&client.w_local, b0, i, 0, &mut noise_rngs[i])?;
            client.z_uploaded = z;
            client.last_noise = rec;
        }

        Ok(Self {
            cfg,
            objs,
            n,
            clients,
            w_global: ModelVector::zeros(n),
            selected: Vec::new(),
            g_cache: vec![ModelVector::zeros(n); cfg.m],
            noise_rngs,
            sel_rng,
            selector,
            monitor,
            f_history: Vec::new(),
            rounds: Vec::new(),
            rows: Vec::new(),
            k: 0,
            cr: 0,
            tct: init_cost,
            period_cost: vec![0.0; cfg.m],
            lct_means: Vec::new(),
            lct_maxes: Vec::new(),
            last_lct_mean: 0.0,
            last_lct_max: 0.0,
            last_f: f64::NAN,
            last_grad_sq: f64::NAN,
            last_snr: f64::NAN,
            stop: None,
        })
    }

    fn global_value_grad(&self, w: &ModelVector) -> (f64, ModelVector) {
        let mut f = 0.0;
        let mut grad = ModelVector::zeros(self.n);
        for obj in self.objs {
            let (v, g) = obj.value_grad(w);
            f += v;
            grad.axpy(1.0, &g);
        }
        (f, grad)
    }

    fn current_snr(&self) -> f64 {
        let pairs: Vec<(ModelVector, ModelVector)> = self
            .clients
            .iter()
            .map(|c| (c.w_local.clone(), c.last_noise.noise.clone()))
            .collect();
        snr(&pairs)
    }

    /// Executes iteration `k`. Returns `false` once the run has ended.
    pub fn step(&mut self) -> bool {
        if self.stop.is_some() || self.k >= self.cfg.max_iterations {
            return false;
        }
        let cfg = self.cfg;
        let k = self.k;
        let comm = k % cfg.k0 == 0;
        let mut dw_global_sq = 0.0;

        if comm {
            // Close out the period that just ended.
            if k > 0 {
                self.flush_period();
            }
            self.selected = self.selector.select(&mut self.sel_rng);

            // Aggregate the stored uploads.
            let prev = self.w_global.clone();
            let uploads: Vec<ModelVector> = match cfg.algorithm {
                AlgorithmKind::FedEpm => {
                    self.clients.iter().map(|c| c.z_uploaded.clone()).collect()
                }
                _ => self
                    .selected
                    .iter()
                    .map(|&i| self.clients[i].z_uploaded.clone())
                    .collect(),
            };
            let timer = WallTimer::start(cfg.wall_clock);
            self.w_global = match cfg.algorithm {
                AlgorithmKind::FedEpm => fedepm_aggregate(&uploads, &cfg.penalty),
                _ => mean_aggregate(&uploads),
            }
            .expect("aggregation inputs validated at construction");
            self.tct += timer.cost(cfg.m as f64 * self.n as f64 * VEC_UNIT);
            self.cr += 1;
            dw_global_sq = self.w_global.dist_sq(&prev);

            // Server-side monitoring and the stopping rules.
            let (f, grad) = self.global_value_grad(&self.w_global);
            self.f_history.push(f);
            self.last_f = f;
            self.last_grad_sq = grad.norm_sq();
            self.last_snr = self.current_snr();
            self.rounds.push(RoundTrace {
                iter: k,
                tau: k / cfg.k0,
                cr: self.cr,
                f_over_m: f / cfg.m as f64,
                grad_sq: self.last_grad_sq,
                lct_mean: self.last_lct_mean,
                lct_max: self.last_lct_max,
                tct: self.tct,
                snr: self.last_snr,
                selected: self.selected.clone(),
            });

            if should_stop(&self.f_history, self.last_grad_sq, self.n) {
                self.stop = Some(if self.last_grad_sq < 1e-6 {
                    StopReason::GradientThreshold
                } else {
                    StopReason::ObjectiveVariance
                });
                let f_pen = penalized_objective(
                    &self.w_global,
                    &self.local_params(),
                    self.objs,
                    &cfg.penalty,
                );
                self.monitor.record(k, f_pen, 0.0, dw_global_sq);
                self.push_row(k, dw_global_sq);
                self.k += 1;
                return false;
            }

            // Selected clients refresh the cached period gradient.
            for &i in &self.selected {
                let timer = WallTimer::start(cfg.wall_clock);
                let (_, g) = self.objs[i].value_grad(&self.w_global);
                let cost = timer.cost(grad_cost(self.objs[i].sample_count(), self.n));
                self.g_cache[i] = g;
                self.monitor.observe_gradient(i, &self.g_cache[i]);
                self.period_cost[i] += cost;
                self.tct += cost;
            }
        }

        // Pending upload scales use the pre-update local parameters.
        let uploading = (k + 1) % cfg.k0 == 0;
        let mut pending_scale = vec![0.0; self.selected.len()];
        if uploading {
            for (slot, &i) in pending_scale.iter_mut().zip(&self.selected) {
                *slot = noise_scale(
                    &self.g_cache[i],
                    &self.clients[i].w_local,
                    &self.w_global,
                    k,
                    &cfg.dp,
                    &cfg.hyper,
                )
                .expect("dp config validated at construction");
            }
        }

        // Local updates for the selected clients; everyone else holds.
        let updates: Vec<(usize, ClientState, f64, f64)> = if cfg.parallel_clients {
            self.selected
                .par_iter()
                .map(|&i| self.update_client(i, k))
                .collect()
        } else {
            self.selected.iter().map(|&i| self.update_client(i, k)).collect()
        };
        let mut dw_clients_sq = 0.0;
        for (i, state, cost, moved_sq) in updates {
            self.clients[i] = state;
            self.period_cost[i] += cost;
            self.tct += cost;
            dw_clients_sq += moved_sq;
        }

        if uploading {
            let round = (k + 1) / cfg.k0;
            for (slot, &i) in pending_scale.iter().zip(&self.selected) {
                let (z, rec) = perturb(
                    &self.clients[i].w_local,
                    *slot,
                    i,
                    round,
                    &mut self.noise_rngs[i],
                )
                .expect("scale is nonnegative");
                self.clients[i].z_uploaded = z;
                self.clients[i].last_noise = rec;
            }
        }

        let f_pen = penalized_objective(
            &self.w_global,
            &self.local_params(),
            self.objs,
            &cfg.penalty,
        );
        self.monitor.record(k, f_pen, dw_clients_sq, dw_global_sq);
        self.push_row(k, dw_global_sq);

        self.k += 1;
        self.k < cfg.max_iterations
    }

    // One client's local step as a pure function so the parallel and
    // sequential paths share bit-identical arithmetic.
    fn update_client(&self, i: usize, k: usize) -> (usize, ClientState, f64, f64) {
        let cfg = self.cfg;
        let mut state = self.clients[i].clone();
        let before = state.w_local.clone();
        let timer = WallTimer::start(cfg.wall_clock);
        let virt = match cfg.algorithm {
            AlgorithmKind::FedEpm => {
                fedepm_client_update(&mut state, &self.w_global, &self.g_cache[i], k, &cfg.penalty);
                self.n as f64 * VEC_UNIT
            }
            AlgorithmKind::SFedAvg => {
                let step = cfg.baseline.step(self.objs[i].sample_count(), k, cfg.k0);
                let evals = sfedavg_client_update(
                    &mut state,
                    &self.w_global,
                    &self.objs[i],
                    k,
                    cfg.k0,
                    step,
                    &self.g_cache[i],
                );
                evals as f64 * grad_cost(self.objs[i].sample_count(), self.n)
                    + self.n as f64 * VEC_UNIT
            }
            AlgorithmKind::SFedProx => {
                let step = cfg.baseline.step(self.objs[i].sample_count(), k, cfg.k0);
                let evals = sfedprox_client_update(
                    &mut state,
                    &self.w_global,
                    &self.objs[i],
                    k,
                    cfg.k0,
                    &cfg.baseline,
                    step,
                    &self.g_cache[i],
                );
                evals as f64 * grad_cost(self.objs[i].sample_count(), self.n)
                    + cfg.baseline.inner_steps as f64 * self.n as f64 * VEC_UNIT
            }
        };
        let cost = timer.cost(virt);
        let moved_sq = state.w_local.dist_sq(&before);
        (i, state, cost, moved_sq)
    }

    fn local_params(&self) -> Vec<ModelVector> {
        self.clients.iter().map(|c| c.w_local.clone()).collect()
    }

    fn flush_period(&mut self) {
        if self.selected.is_empty() {
            return;
        }
        let costs: Vec<f64> = self.selected.iter().map(|&i| self.period_cost[i]).collect();
        let mean = costs.iter().sum::<f64>() / costs.len() as f64;
        let max = costs.iter().cloned().fold(0.0, f64::max);
        self.lct_means.push(mean);
        self.lct_maxes.push(max);
        self.last_lct_mean = mean;
        self.last_lct_max = max;
        self.period_cost.iter_mut().for_each(|c| *c = 0.0);
    }

    fn push_row(&mut self, k: usize, dw_global_sq: f64) {
        let rec = self
            .monitor
            .trace()
            .records
            .last()
            .expect("record pushed before row");
        debug_assert_eq!(rec.iter, k);
        self.rows.push(TraceRow {
            iter: k,
            tau: k / self.cfg.k0,
            cr: self.cr,
            f_over_m: self.last_f / self.cfg.m as f64,
            grad_sq: self.last_grad_sq,
            f_penalized: rec.f_value,
            l_surrogate: rec.l_surrogate,
            dw_clients_sq: rec.dw_clients_sq,
            dw_global_sq,
            lct_s: self.last_lct_mean,
            tct_s: self.tct,
            snr: self.last_snr,
        });
    }

    /// Consume the simulation into a [`RunResult`].
    pub fn finish(mut self) -> RunResult {
        let stop = self.stop.unwrap_or(StopReason::BudgetExhausted);
        // The final round's local work only counts if the period completed.
        if self.stop.is_some() {
            // stopped at an aggregation: preceding period was already flushed
        } else if self.k % self.cfg.k0 == 0 {
            self.flush_period();
        }
        let lct_mean = mean(&self.lct_means);
        let lct_max = mean(&self.lct_maxes);
        let metrics = RunMetrics {
            f_over_m: self.last_f / self.cfg.m as f64,
            cr: self.cr,
            tct: self.tct,
            lct_mean,
            lct_max,
            snr: self.current_snr(),
        };
        RunResult {
            final_w: self.w_global,
            rounds: self.rounds,
            convergence: self.monitor.into_trace(),
            stop,
            iterations: self.k,
            metrics,
            rows: self.rows,
        }
    }
}

fn grad_cost(samples: usize, n: usize) -> f64 {
    samples as f64 * n as f64 * GRAD_UNIT
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

// Either measures real elapsed seconds or passes the virtual cost through.
struct WallTimer {
    start: Option<std::time::Instant>,
}

impl WallTimer {
    fn start(wall: bool) -> Self {
        Self { start: wall.then(std::time::Instant::now) }
    }

    fn cost(&self, virtual_cost: f64) -> f64 {
        match self.start {
            Some(t) => t.elapsed().as_secs_f64(),
            None => virtual_cost,
        }
    }
}

/// Runs a full experiment: the iteration clock with period `k0`, client
/// selection, local updates, noisy uploads, and stopping rules. Budget
/// exhaustion is reported as a [`StopReason`], not an error.
pub fn run_experiment<O: Objective>(cfg: &ExperimentConfig, objs: &[O]) -> Result<RunResult> {
    let mut sim = Simulation::new(cfg, objs)?;
    while sim.step() {}
    Ok(sim.finish())
}
