//! Polynomial-kernel SVM: an SMO solver for the binary dual and one-vs-one
//! voting for multi-class prediction.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{FeatureTensor, TensorFile};

pub const DEFAULT_TOL: f64 = 1e-3;
const MAX_ITER_FACTOR: usize = 10_000;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelParams {
    pub degree: u32,
    /// `None` means `1 / dim` of the data the model is trained on.
    pub gamma: Option<f64>,
    pub coef0: f64,
    pub c: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            degree: 3,
            gamma: None,
            coef0: 1.0,
            c: 1.0,
        }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        let gamma_ok = self.gamma.is_none_or(|g| g > 0.0);
        if self.degree >= 1 && gamma_ok && self.c > 0.0 && self.coef0.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid kernel parameters {self:?}")))
        }
    }

    /// Fixes `gamma` for data of dimension `dim`.
    pub fn resolved(&self, dim: usize) -> KernelParams {
        KernelParams {
            gamma: Some(self.gamma.unwrap_or(1.0 / dim.max(1) as f64)),
            ..*self
        }
    }

    fn gamma(&self, dim: usize) -> f64 {
        self.gamma.unwrap_or(1.0 / dim.max(1) as f64)
    }
}

/// `(gamma <x, y> + coef0)^degree`
pub fn poly_kernel(x: &[f64], y: &[f64], params: &KernelParams) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!("kernel arguments of length {} and {}", x.len(), y.len())));
    }
    Ok(kernel(x, y, params.gamma(x.len()), params))
}

#[inline]
fn kernel(x: &[f64], y: &[f64], gamma: f64, params: &KernelParams) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (gamma * dot + params.coef0).powi(params.degree as i32)
}

/// Decision function `f(x) = sum_i coef_i k(sv_i, x) - rho`; positive means
/// the `+1` class.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i`, each within `[-C, C]`.
    pub coefficients: Vec<f64>,
    pub rho: f64,
    pub params: KernelParams,
    /// Largest KKT violation `max_up(-y G) - min_low(-y G)` at exit.
    pub kkt_violation: f64,
    pub iterations: usize,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let gamma = self.params.gamma(x.len());
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, &c)| c * kernel(sv, x, gamma, &self.params))
            .sum::<f64>()
            - self.rho
    }

    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.decision(x) >= 0.0 {
            1
        } else {
            -1
        }
    }
}

/// Solves the C-SVM dual with SMO. Working pairs are the maximal violating
/// pair (first-order selection), ties resolved toward the lowest index;
/// iteration stops once the violation is at most `tol`.
pub fn svm_train_binary(x: &[Vec<f64>], y: &[i8], params: &KernelParams, tol: f64) -> Result<BinarySvm> {
    params.validate()?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if y.iter().any(|&v| v != 1 && v != -1) {
        return Err(Error::Config("binary labels must be +1 or -1".into()));
    }
    if !(y.contains(&1) && y.contains(&-1)) {
        return Err(Error::SingleClass);
    }
    let dim = x[0].len();
    if let Some(bad) = x.iter().find(|v| v.len() != dim) {
        return Err(Error::ShapeMismatch(format!("sample of length {} among length {dim}", bad.len())));
    }
    let params = params.resolved(dim);
    let gamma = params.gamma(dim);
    let n = x.len();
    let c = params.c;
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();

    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = yf[i] * yf[j] * kernel(&x[i], &x[j], gamma, &params);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }

    let mut alpha = vec![0.0; n];
    // gradient of 1/2 a^T Q a - e^T a
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let max_iter = MAX_ITER_FACTOR * n.max(100);
    let mut iterations = 0;
    let mut violation;
    loop {
        let mut i_sel = None;
        let mut m_up = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let v = -yf[t] * grad[t];
            if in_up(alpha[t], yf[t]) && v > m_up {
                m_up = v;
                i_sel = Some(t);
            }
            if in_low(alpha[t], yf[t]) && v < m_low {
                m_low = v;
                j_sel = Some(t);
            }
        }
        violation = m_up - m_low;
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            violation = 0.0;
            break;
        };
        if violation <= tol || iterations >= max_iter {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if yf[i] != yf[j] {
            let mut quad = q[i * n + i] + q[j * n + j] + 2.0 * q[i * n + j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q[i * n + i] + q[j * n + j] - 2.0 * q[i * n + j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q[t * n + i] * di + q[t * n + j] * dj;
        }
    }

    // rho from free variables, or the midpoint of the feasible interval
    let (mut free_sum, mut free_count) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = yf[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if yf[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if yf[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_count += 1;
        }
    }
    let rho = if free_count > 0 { free_sum / free_count as f64 } else { (ub + lb) / 2.0 };

    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(x[t].clone());
            coefficients.push(alpha[t] * yf[t]);
        }
    }
    Ok(BinarySvm {
        support_vectors,
        coefficients,
        rho,
        params,
        kkt_violation: violation.max(0.0),
        iterations,
    })
}

/// One-vs-one multi-class SVM. `pairs[k]` separates `classes[a]` (+1) from
/// `classes[b]` (-1) for the `k`-th pair `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub classes: Vec<usize>,
    pub pairs: Vec<((usize, usize), BinarySvm)>,
    pub params: KernelParams,
}

pub fn svm_train_multiclass(x: &[Vec<f64>], y: &[usize], params: &KernelParams) -> Result<SvmModel> {
    svm_train_multiclass_tol(x, y, params, DEFAULT_TOL)
}

pub fn svm_train_multiclass_tol(x: &[Vec<f64>], y: &[usize], params: &KernelParams, tol: f64) -> Result<SvmModel> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let mut classes: Vec<usize> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let params = params.resolved(x.first().map_or(1, Vec::len));
    let mut pairs = Vec::with_capacity(classes.len() * (classes.len() - 1) / 2);
    for a in 0..classes.len() {
        for b in a + 1..classes.len() {
            let (ca, cb) = (classes[a], classes[b]);
            let mut px = Vec::new();
            let mut py = Vec::new();
            for (xi, &yi) in x.iter().zip(y) {
                if yi == ca || yi == cb {
                    px.push(xi.clone());
                    py.push(if yi == ca { 1 } else { -1 });
                }
            }
            pairs.push(((ca, cb), svm_train_binary(&px, &py, &params, tol)?));
        }
    }
    Ok(SvmModel { classes, pairs, params })
}

/// Picks the class with the most votes; ties go to the larger summed margin,
/// then to the lowest class index. `votes`, `margins` and `classes` are
/// parallel.
pub fn resolve_votes(classes: &[usize], votes: &[usize], margins: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..classes.len() {
        let better = votes[i] > votes[best]
            || (votes[i] == votes[best] && margins[i] > margins[best])
            || (votes[i] == votes[best] && margins[i] == margins[best] && classes[i] < classes[best]);
        if better {
            best = i;
        }
    }
    classes[best]
}

pub fn svm_predict(model: &SvmModel, x: &[f64]) -> usize {
    let k = model.classes.len();
    let mut votes = vec![0usize; k];
    let mut margins = vec![0.0; k];
    let pos = |c: usize| model.classes.binary_search(&c).expect("pair classes come from the class list");
    for ((a, b), svm) in &model.pairs {
        let f = svm.decision(x);
        let (ia, ib) = (pos(*a), pos(*b));
        if f >= 0.0 {
            votes[ia] += 1;
        } else {
            votes[ib] += 1;
        }
        margins[ia] += f;
        margins[ib] -= f;
    }
    resolve_votes(&model.classes, &votes, &margins)
}

impl SvmModel {
    pub fn predict(&self, x: &[f64]) -> usize {
        svm_predict(self, x)
    }

    pub fn max_kkt_violation(&self) -> f64 {
        self.pairs.iter().map(|(_, s)| s.kkt_violation).fold(0.0, f64::max)
    }

    /// Kernel parameters as `key = value` lines.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        writeln!(s, "degree = {}", self.params.degree).unwrap();
        writeln!(s, "gamma = {}", self.params.gamma.unwrap_or(f64::NAN)).unwrap();
        writeln!(s, "coef0 = {}", self.params.coef0).unwrap();
        writeln!(s, "c = {}", self.params.c).unwrap();
        writeln!(
            s,
            "classes = {}",
            self.classes.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
        )
        .unwrap();
        s
    }

    pub fn to_tensor_file(&self) -> Result<TensorFile> {
        let mut f = TensorFile::new();
        for ((a, b), svm) in &self.pairs {
            let dim = svm.support_vectors.first().map_or(0, Vec::len);
            let flat: Vec<f64> = svm.support_vectors.iter().flatten().copied().collect();
            f.insert(format!("pair_{a}_{b}.support"), FeatureTensor::from_f64(vec![svm.support_vectors.len(), dim], &flat)?);
            f.insert(format!("pair_{a}_{b}.coef"), FeatureTensor::from_f64(vec![svm.coefficients.len()], &svm.coefficients)?);
            f.insert(format!("pair_{a}_{b}.rho"), FeatureTensor::from_f64(vec![1], &[svm.rho])?);
        }
        Ok(f)
    }
}

/// Per-dimension standardization with statistics from the training data.
/// Constant dimensions get unit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self> {
        let first = x.first().ok_or(Error::EmptySet("standardization"))?;
        let d = first.len();
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            if row.len() != d {
                return Err(Error::ShapeMismatch("ragged feature rows".into()));
            }
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var.into_iter().map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn linear() -> KernelParams {
        KernelParams {
            degree: 1,
            gamma: Some(1.0),
            coef0: 0.0,
            c: 1.0,
        }
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(poly_kernel(&[1.0, 2.0], &[3.0, -1.0], &linear()).unwrap(), 1.0);
        let p = KernelParams {
            degree: 3,
            gamma: Some(0.5),
            coef0: 1.0,
            c: 1.0,
        };
        assert_eq!(poly_kernel(&[0.0; 4], &[0.0; 4], &p).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let a: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert_eq!(poly_kernel(&a, &b, &p).unwrap(), poly_kernel(&b, &a, &p).unwrap());
        }
        assert!(poly_kernel(&[1.0], &[1.0, 2.0], &p).is_err());
    }

    #[test]
    fn kernel_matrix_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec<f64>> = (0..25).map(|_| (0..4).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let p = KernelParams::default();
        let k = nalgebra::DMatrix::from_fn(25, 25, |i, j| poly_kernel(&pts[i], &pts[j], &p).unwrap());
        assert_eq!(k, k.transpose());
        let min = k.clone().symmetric_eigenvalues().min();
        assert!(min >= -1e-8 * k.trace());
    }

    #[test]
    fn separable_pair_and_xor() {
        let x = vec![vec![0.0, 0.0], vec![2.0, 2.0]];
        let m = svm_train_binary(&x, &[-1, 1], &linear(), 1e-3).unwrap();
        assert_eq!(m.predict(&x[0]), -1);
        assert_eq!(m.predict(&x[1]), 1);

        let xor = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let labels = [-1, -1, 1, 1];
        let p = KernelParams {
            degree: 2,
            gamma: Some(1.0),
            coef0: 1.0,
            c: 10.0,
        };
        let m = svm_train_binary(&xor, &labels, &p, 1e-3).unwrap();
        for (v, &l) in xor.iter().zip(&labels) {
            assert_eq!(m.predict(v), l);
        }
        assert!(m.kkt_violation <= 1e-3);
        assert!(m.coefficients.iter().all(|c| c.abs() <= p.c + 1e-12));
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(matches!(svm_train_binary(&[vec![1.0], vec![2.0]], &[1, 1], &linear(), 1e-3), Err(Error::SingleClass)));
        assert!(matches!(svm_train_multiclass(&[vec![1.0], vec![2.0]], &[3, 3], &linear()), Err(Error::SingleClass)));
    }

    #[test]
    fn duplicating_training_set_keeps_sign_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            x.push(vec![s * 2.0 + rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)]);
            y.push(s as i8);
        }
        let p = KernelParams {
            degree: 1,
            gamma: Some(1.0),
            coef0: 1.0,
            c: 100.0,
        };
        let a = svm_train_binary(&x, &y, &p, 1e-6).unwrap();
        let xx: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let yy: Vec<i8> = y.iter().chain(&y).copied().collect();
        let b = svm_train_binary(&xx, &yy, &p, 1e-6).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let probe = [-3.0 + 0.6 * i as f64 + 0.05, -3.0 + 0.6 * j as f64];
                assert_eq!(a.predict(&probe), b.predict(&probe), "probe {probe:?}");
            }
        }
    }

    #[test]
    fn singletons_are_memorized() {
        let x: Vec<Vec<f64>> = (0..6).map(|c| vec![c as f64 * 3.0, (c % 2) as f64 * 5.0]).collect();
        let y: Vec<usize> = (0..6).collect();
        let m = svm_train_multiclass(&x, &y, &KernelParams::default()).unwrap();
        assert_eq!(m.pairs.len(), 15);
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(svm_predict(&m, xi), yi);
        }
    }

    #[test]
    fn vote_ties() {
        assert_eq!(resolve_votes(&[0, 2, 4], &[1, 2, 2], &[0.0, 0.5, 0.5]), 2);
        assert_eq!(resolve_votes(&[0, 2, 4], &[1, 2, 2], &[0.0, 0.5, 0.7]), 4);
        assert_eq!(resolve_votes(&[0, 2, 4], &[3, 2, 2], &[-9.0, 0.5, 0.7]), 0);
    }

    #[test]
    fn standardizer_centers_and_scales() {
        let x = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&x).unwrap();
        assert_eq!(s.apply(&[1.0, 5.0]), vec![-1.0, 0.0]);
        assert_eq!(s.apply(&[3.0, 6.0]), vec![1.0, 1.0]);
    }
}
