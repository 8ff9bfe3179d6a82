//! Dense vector arithmetic and the logistic-regression loss kernels.
//!
//! All numerics are `f64`. The loss on a shard with rows `x_t`, labels
//! `b_t in {0,1}` and ridge weight `beta` is
//!
//! ```text
//! f(w) = (1/d) sum_t [ ln(1 + exp(<x_t, w>)) - b_t <x_t, w> + (beta/2) ||w||^2 ]
//! ```
//!
//! evaluated with the overflow-safe form `ln(1+e^z) = max(z,0) + ln(1+e^-|z|)`.

use crate::{Error, Result};

/// Dense model parameter vector of fixed dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVector {
    entries: Vec<f64>,
}

impl ModelVector {
    pub fn new(entries: Vec<f64>) -> Self {
        Self { entries }
    }

    pub fn zeros(n: usize) -> Self {
        Self { entries: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.entries.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|x| x.is_finite())
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm1(&self) -> f64 {
        self.iter().map(|x| x.abs()).sum()
    }

    /// `self + scale * other`, allocating the result.
    pub fn add_scaled(&self, scale: f64, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::new(
            self.iter()
                .zip(other.iter())
                .map(|(a, b)| a + scale * b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(-1.0, other)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.iter().map(|x| x * s).collect())
    }

    /// `self += scale * other` in place.
    pub fn axpy(&mut self, scale: f64, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.entries.iter_mut().zip(other.iter()) {
            *a += scale * b;
        }
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist_sq(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

impl From<Vec<f64>> for ModelVector {
    fn from(entries: Vec<f64>) -> Self {
        Self::new(entries)
    }
}

impl std::ops::Index<usize> for ModelVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.entries[i]
    }
}

/// One client's local samples: `d` feature rows of length `n`, binary labels,
/// and the ridge weight `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataShard {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub beta: f64,
}

impl DataShard {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<u8>, beta: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("shard must contain at least one row".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "shard has {} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("shard rows have unequal lengths".into()));
        }
        if labels.iter().any(|&b| b > 1) {
            return Err(Error::InvalidInput("labels must be 0 or 1".into()));
        }
        if !(beta >= 0.0) {
            return Err(Error::InvalidInput(format!("beta must be nonnegative, got {beta}")));
        }
        Ok(Self { rows, labels, beta })
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Numerically stable `ln(1 + e^z)`.
fn log1p_exp(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Numerically stable logistic sigmoid.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// Unchecked kernel shared by the validated entry point and the trait impl.
fn logistic_kernel(w: &ModelVector, shard: &DataShard) -> (f64, ModelVector) {
    let d = shard.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; w.len()];
    for (row, &label) in shard.rows.iter().zip(shard.labels.iter()) {
        let z: f64 = row.iter().zip(w.iter()).map(|(x, wj)| x * wj).sum();
        let b = label as f64;
        value += log1p_exp(z) - b * z;
        let coeff = sigmoid(z) - b;
        for (g, x) in grad.iter_mut().zip(row.iter()) {
            *g += coeff * x;
        }
    }
    value /= d;
    value += 0.5 * shard.beta * w.norm_sq();
    for (g, wj) in grad.iter_mut().zip(w.iter()) {
        *g = *g / d + shard.beta * wj;
    }
    (value, ModelVector::new(grad))
}

/// Loss value and gradient of one shard's logistic objective at `w`.
pub fn logistic_value_grad(w: &ModelVector, shard: &DataShard) -> Result<(f64, ModelVector)> {
    if shard.dim() != w.len() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: w has {} entries, shard rows have {}",
            w.len(),
            shard.dim()
        )));
    }
    Ok(logistic_kernel(w, shard))
}

/// Upper bound on the gradient-Lipschitz constant of a shard's logistic loss:
/// `sum_t ||x_t||^2 / (4 d) + beta`. The trace bound is loose against the
/// spectral one but always valid and O(nd) to compute.
pub fn lipschitz_bound(shard: &DataShard) -> f64 {
    let d = shard.len() as f64;
    let sum_sq: f64 = shard.rows.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>()).sum();
    sum_sq / (4.0 * d) + shard.beta
}

/// Value and gradient of the global objective `f(w) = sum_i f_i(w)`.
pub fn global_objective(w: &ModelVector, shards: &[DataShard]) -> Result<(f64, ModelVector)> {
    if shards.is_empty() {
        return Err(Error::InvalidInput("empty shard list".into()));
    }
    let mut total = 0.0;
    let mut grad = ModelVector::zeros(w.len());
    for shard in shards {
        let (v, g) = logistic_value_grad(w, shard)?;
        total += v;
        grad.axpy(1.0, &g);
    }
    Ok((total, grad))
}

/// A client-side objective the round harness can drive: smooth, with a known
/// gradient-Lipschitz bound. `sample_count` feeds the virtual compute clock
/// and the baselines' step-size rule.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value_grad(&self, w: &ModelVector) -> (f64, ModelVector);
    fn grad_lipschitz(&self) -> f64;
    fn sample_count(&self) -> usize;
}

impl Objective for DataShard {
    fn dim(&self) -> usize {
        DataShard::dim(self)
    }

    fn value_grad(&self, w: &ModelVector) -> (f64, ModelVector) {
        debug_assert_eq!(self.dim(), w.len());
        logistic_kernel(w, self)
    }

    fn grad_lipschitz(&self) -> f64 {
        lipschitz_bound(self)
    }

    fn sample_count(&self) -> usize {
        self.len()
    }
}

/// Toy objective `f(w) = (scale/2) ||w - center||^2`, used by the diagnostics
/// tests and as a cheap stand-in for a client loss.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub center: ModelVector,
    pub scale: f64,
}

impl Quadratic {
    pub fn new(center: ModelVector, scale: f64) -> Self {
        Self { center, scale }
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value_grad(&self, w: &ModelVector) -> (f64, ModelVector) {
        let diff = w.sub(&self.center);
        (0.5 * self.scale * diff.norm_sq(), diff.scale(self.scale))
    }

    fn grad_lipschitz(&self) -> f64 {
        self.scale
    }

    fn sample_count(&self) -> usize {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_shard(rng: &mut impl Rng, d: usize, n: usize, beta: f64) -> DataShard {
        let rows = (0..d)
            .map(|_| (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let labels = (0..d).map(|_| rng.random::<bool>() as u8).collect();
        DataShard::new(rows, labels, beta).unwrap()
    }

    fn random_vec(rng: &mut impl Rng, n: usize) -> ModelVector {
        ModelVector::new((0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
    }

    #[test]
    fn value_at_zero_is_ln2() {
        let mut rng = crate::rng::stream(11, 0);
        let shard = random_shard(&mut rng, 20, 3, 0.0);
        let w = ModelVector::zeros(3);
        let (v, g) = logistic_value_grad(&w, &shard).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        // grad = (1/d) sum_t (0.5 - b_t) x_t
        let d = shard.len() as f64;
        for j in 0..3 {
            let expect: f64 = shard
                .rows
                .iter()
                .zip(shard.labels.iter())
                .map(|(r, &b)| (0.5 - b as f64) * r[j])
                .sum::<f64>()
                / d;
            assert!((g[j] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn single_sample_gradient() {
        let shard = DataShard::new(vec![vec![1.0, 0.0]], vec![1], 0.0).unwrap();
        let (_, g) = logistic_value_grad(&ModelVector::zeros(2), &shard).unwrap();
        assert_eq!(g.as_slice(), &[-0.5, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = crate::rng::stream(12, 0);
        for _ in 0..10 {
            let n = 4;
            let shard = random_shard(&mut rng, 15, n, 0.001);
            let w = random_vec(&mut rng, n);
            let (_, g) = logistic_value_grad(&w, &shard).unwrap();
            let h = 1e-6;
            for j in 0..n {
                let mut wp = w.clone();
                wp.as_mut_slice()[j] += h;
                let mut wm = w.clone();
                wm.as_mut_slice()[j] -= h;
                let (vp, _) = logistic_value_grad(&wp, &shard).unwrap();
                let (vm, _) = logistic_value_grad(&wm, &shard).unwrap();
                let fd = (vp - vm) / (2.0 * h);
                assert!(
                    (fd - g[j]).abs() <= 1e-5 * (g[j].abs() + 1e-8),
                    "coordinate {j}: fd {fd} vs analytic {}",
                    g[j]
                );
            }
        }
    }

    #[test]
    fn convexity_supporting_hyperplane() {
        let mut rng = crate::rng::stream(13, 0);
        let shard = random_shard(&mut rng, 10, 3, 0.01);
        for _ in 0..50 {
            let w = random_vec(&mut rng, 3);
            let v = random_vec(&mut rng, 3);
            let (fw, gw) = logistic_value_grad(&w, &shard).unwrap();
            let (fv, _) = logistic_value_grad(&v, &shard).unwrap();
            assert!(fv + 1e-12 >= fw + gw.dot(&v.sub(&w)));
        }
    }

    #[test]
    fn lipschitz_bound_values() {
        let one = DataShard::new(vec![vec![1.0, 0.0]], vec![0], 0.0).unwrap();
        assert!((lipschitz_bound(&one) - 0.25).abs() < 1e-15);
        let two =
            DataShard::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1], 0.001).unwrap();
        // (1 + 1) / (4 * 2) + 0.001
        assert!((lipschitz_bound(&two) - 0.251).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_bound_is_sound() {
        let mut rng = crate::rng::stream(14, 0);
        let shard = random_shard(&mut rng, 12, 3, 0.002);
        let r = lipschitz_bound(&shard);
        for _ in 0..100 {
            let w = random_vec(&mut rng, 3);
            let v = random_vec(&mut rng, 3);
            let (_, gw) = logistic_value_grad(&w, &shard).unwrap();
            let (_, gv) = logistic_value_grad(&v, &shard).unwrap();
            let lhs = gw.sub(&gv).norm();
            assert!(lhs <= r * w.sub(&v).norm() + 1e-12);
        }
    }

    #[test]
    fn global_objective_sums_shards() {
        let mut rng = crate::rng::stream(15, 0);
        let shards: Vec<_> = (0..3).map(|_| random_shard(&mut rng, 8, 3, 0.001)).collect();
        let w = random_vec(&mut rng, 3);
        let (f, g) = global_objective(&w, &shards).unwrap();
        let mut f2 = 0.0;
        let mut g2 = ModelVector::zeros(3);
        for s in &shards {
            let (v, gi) = logistic_value_grad(&w, s).unwrap();
            f2 += v;
            g2.axpy(1.0, &gi);
        }
        assert!((f - f2).abs() < 1e-12);
        assert!(g.sub(&g2).norm() < 1e-12);

        // single shard and duplicated shard
        let (f1, _) = global_objective(&w, &shards[..1]).unwrap();
        let (fs, _) = logistic_value_grad(&w, &shards[0]).unwrap();
        assert_eq!(f1, fs);
        let dup = vec![shards[0].clone(), shards[0].clone()];
        let (fd, _) = global_objective(&w, &dup).unwrap();
        assert!((fd - 2.0 * fs).abs() < 1e-12);
    }

    #[test]
    fn input_validation() {
        let shard = DataShard::new(vec![vec![1.0, 0.0]], vec![1], 0.0).unwrap();
        assert!(logistic_value_grad(&ModelVector::zeros(3), &shard).is_err());
        assert!(global_objective(&ModelVector::zeros(2), &[]).is_err());
        assert!(DataShard::new(vec![], vec![], 0.0).is_err());
        assert!(DataShard::new(vec![vec![1.0]], vec![2], 0.0).is_err());
        assert!(DataShard::new(vec![vec![1.0]], vec![0], -1.0).is_err());
    }

    #[test]
    fn no_overflow_on_large_logits() {
        let shard = DataShard::new(vec![vec![1.0, 1.0]], vec![0], 0.0).unwrap();
        let w = ModelVector::new(vec![500.0, 500.0]);
        let (v, g) = logistic_value_grad(&w, &shard).unwrap();
        assert!(v.is_finite() && g.is_finite());
        let wneg = ModelVector::new(vec![-500.0, -500.0]);
        let (v2, g2) = logistic_value_grad(&wneg, &shard).unwrap();
        assert!(v2.is_finite() && g2.is_finite());
    }

    #[test]
    fn quadratic_objective() {
        let q = Quadratic::new(ModelVector::new(vec![2.0]), 1.0);
        let (v, g) = q.value_grad(&ModelVector::new(vec![5.0]));
        assert_eq!(v, 4.5);
        assert_eq!(g.as_slice(), &[3.0]);
        assert_eq!(q.grad_lipschitz(), 1.0);
    }
}
