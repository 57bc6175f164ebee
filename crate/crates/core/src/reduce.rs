//! PCA keeping the fewest components that reach a target fraction of the
//! variance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::tensor::{FeatureTensor, TensorFile};

pub const DEFAULT_TARGET_VARIANCE: f64 = 0.99;

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `d x k`, orthonormal columns sorted by decreasing variance.
    pub basis: DMatrix<f64>,
    /// Variance fraction of each retained component.
    pub component_ratios: Vec<f64>,
    /// Cumulative variance fraction of the retained components.
    pub explained_ratio: f64,
}

/// Which eigenproblem the fit solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaRoute {
    /// `d x d` covariance (scatter) matrix.
    Covariance,
    /// `n x n` Gram matrix of the centered samples, mapped back to feature
    /// space; cheaper when samples are fewer than dimensions.
    Gram,
}

pub fn pca_fit(samples: &[Vec<f64>], target_variance: f64) -> Result<PcaModel> {
    let route = match samples.first() {
        Some(s) if samples.len() < s.len() => PcaRoute::Gram,
        _ => PcaRoute::Covariance,
    };
    pca_fit_with(samples, target_variance, route)
}

pub fn pca_fit_with(samples: &[Vec<f64>], target_variance: f64, route: PcaRoute) -> Result<PcaModel> {
    if !(target_variance > 0.0 && target_variance <= 1.0) {
        return Err(Error::Config(format!("target variance {target_variance} outside (0, 1]")));
    }
    let n = samples.len();
    if n < 2 {
        return Err(Error::EmptySet("PCA needs at least two samples; sample"));
    }
    let d = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != d) {
        return Err(Error::ShapeMismatch(format!("sample of length {} among length {d}", bad.len())));
    }
    let x = DMatrix::from_fn(n, d, |i, j| samples[i][j]);
    let mean = x.row_mean().transpose();
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }

    let (values, vectors) = match route {
        PcaRoute::Covariance => {
            let eig = SymmetricEigen::new(centered.transpose() * &centered);
            (eig.eigenvalues, eig.eigenvectors)
        }
        PcaRoute::Gram => {
            let eig = SymmetricEigen::new(&centered * centered.transpose());
            // v = X^T u / sqrt(lambda) is a unit eigenvector of X^T X
            let mut v = centered.transpose() * &eig.eigenvectors;
            for (mut col, &lambda) in v.column_iter_mut().zip(eig.eigenvalues.iter()) {
                if lambda > 0.0 {
                    col /= lambda.sqrt();
                }
            }
            (eig.eigenvalues, v)
        }
    };

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let top = values[order[0]].max(0.0);
    if top <= 0.0 {
        return Err(Error::DegenerateData);
    }
    let kept: Vec<usize> = order.into_iter().filter(|&i| values[i] > top * RANK_TOLERANCE).collect();
    let total: f64 = kept.iter().map(|&i| values[i]).sum();
    let ratios: Vec<f64> = kept.iter().map(|&i| values[i] / total).collect();

    let mut k = 0;
    let mut cumulative = 0.0;
    while k < ratios.len() {
        cumulative += ratios[k];
        k += 1;
        if cumulative >= target_variance - 1e-12 {
            break;
        }
    }
    let mut basis = DMatrix::zeros(d, k);
    for (c, &i) in kept[..k].iter().enumerate() {
        let col = vectors.column(i);
        basis.set_column(c, &(col / col.norm()));
    }
    Ok(PcaModel {
        mean,
        basis,
        component_ratios: ratios[..k].to_vec(),
        explained_ratio: cumulative.min(1.0),
    })
}

impl PcaModel {
    pub fn components(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        pca_transform(self, x)
    }

    /// Maps reduced coordinates back to feature space.
    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        (&self.mean + &self.basis * DVector::from_column_slice(z)).as_slice().to_vec()
    }

    pub fn to_tensor_file(&self) -> Result<TensorFile> {
        let mut f = TensorFile::new();
        f.insert("pca.mean", FeatureTensor::from_f64(vec![self.dim()], self.mean.as_slice())?);
        // column-major d x k is row-major k x d
        f.insert("pca.basis", FeatureTensor::from_f64(vec![self.components(), self.dim()], self.basis.as_slice())?);
        f.insert("pca.ratios", FeatureTensor::from_f64(vec![self.components()], &self.component_ratios)?);
        Ok(f)
    }

    pub fn from_tensor_file(f: &TensorFile) -> Result<Self> {
        let mean = f.require("pca.mean")?;
        let basis = f.require("pca.basis")?;
        let ratios = f.require("pca.ratios")?;
        let d = mean.len();
        let [k, bd] = basis.dims() else {
            return Err(Error::ShapeMismatch("pca.basis must be 2-D".into()));
        };
        if *bd != d || ratios.len() != *k {
            return Err(Error::ShapeMismatch("PCA tensors disagree on dimensions".into()));
        }
        let component_ratios = ratios.to_f64();
        Ok(PcaModel {
            mean: DVector::from_vec(mean.to_f64()),
            basis: DMatrix::from_row_slice(*k, d, &basis.to_f64()).transpose(),
            explained_ratio: component_ratios.iter().sum::<f64>().min(1.0),
            component_ratios,
        })
    }
}

/// `basis^T (x - mean)`
pub fn pca_transform(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.dim() {
        return Err(Error::ShapeMismatch(format!("PCA expects {} values, got {}", model.dim(), x.len())));
    }
    let centered = DVector::from_column_slice(x) - &model.mean;
    Ok((model.basis.transpose() * centered).as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn orthonormality_error(m: &PcaModel) -> f64 {
        let g = m.basis.transpose() * &m.basis;
        (g - DMatrix::identity(m.components(), m.components())).amax()
    }

    #[test]
    fn line_in_3d_needs_one_component() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| {
            let t = i as f64 * 0.7 - 2.0;
            vec![1.0 + 2.0 * t, -1.0 + t, 3.0 - 0.5 * t]
        }).collect();
        let m = pca_fit(&pts, 0.99).unwrap();
        assert_eq!(m.components(), 1);
        assert!((m.explained_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_cloud_needs_both_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..500).map(|_| vec![rng.sample(StandardNormal), rng.sample(StandardNormal)]).collect();
        let m = pca_fit(&pts, 0.99).unwrap();
        assert_eq!(m.components(), 2);
    }

    #[test]
    fn reconstruction_keeps_target_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..12).map(|j| rng.sample::<f64, _>(StandardNormal) / (1.0 + j as f64)).collect())
            .collect();
        let m = pca_fit(&pts, 0.99).unwrap();
        let (mut resid, mut total) = (0.0, 0.0);
        for p in &pts {
            let r = m.reconstruct(&m.transform(p).unwrap());
            resid += p.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            total += p.iter().zip(m.mean.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        assert!(resid / total <= 0.01 + 1e-12, "{}", resid / total);
        assert!(orthonormality_error(&m) < 1e-8);
        assert!(m.component_ratios.windows(2).all(|w| w[0] >= w[1]));
        assert!(m.component_ratios.iter().sum::<f64>() <= 1.0 + 1e-9);
    }

    #[test]
    fn gram_and_covariance_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..30).map(|j| rng.sample::<f64, _>(StandardNormal) * (1.0 + (j % 5) as f64)).collect())
            .collect();
        let a = pca_fit_with(&pts, 0.95, PcaRoute::Gram).unwrap();
        let b = pca_fit_with(&pts, 0.95, PcaRoute::Covariance).unwrap();
        assert_eq!(a.components(), b.components());
        for (x, y) in a.component_ratios.iter().zip(&b.component_ratios) {
            assert!((x - y).abs() < 1e-9);
        }
        // columns agree up to sign
        for c in 0..a.components() {
            let dot = a.basis.column(c).dot(&b.basis.column(c)).abs();
            assert!((dot - 1.0).abs() < 1e-6);
        }
        assert!(orthonormality_error(&a) < 1e-8);
    }

    #[test]
    fn transform_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Vec<f64>> = (0..20).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let m = pca_fit(&pts, 0.9).unwrap();
        let zero = m.transform(m.mean.as_slice()).unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-12));
        let (x, y, a) = (&pts[0], &pts[1], 0.3);
        let mix: Vec<f64> = x.iter().zip(y).map(|(p, q)| a * p + (1.0 - a) * q).collect();
        let (tx, ty, tm) = (m.transform(x).unwrap(), m.transform(y).unwrap(), m.transform(&mix).unwrap());
        for i in 0..tm.len() {
            assert!((tm[i] - (a * tx[i] + (1.0 - a) * ty[i])).abs() < 1e-9);
        }
        assert!(m.transform(&[0.0; 5]).is_err());
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(pca_fit(&[vec![1.0, 2.0], vec![1.0, 2.0]], 0.99), Err(Error::DegenerateData)));
        assert!(pca_fit(&[vec![1.0, 2.0]], 0.99).is_err());
        assert!(pca_fit(&[vec![1.0], vec![2.0]], 0.0).is_err());
    }

    #[test]
    fn tensor_file_round_trip_is_close() {
        let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * i) as f64 * 0.1, 1.0]).collect();
        let m = pca_fit(&pts, 0.99).unwrap();
        let back = PcaModel::from_tensor_file(&m.to_tensor_file().unwrap()).unwrap();
        assert_eq!(back.components(), m.components());
        assert!((back.basis.clone() - &m.basis).amax() < 1e-6);
    }
}
