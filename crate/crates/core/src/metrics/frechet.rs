use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{ensure, Error, Result};
use crate::imagecore::{sobel_gradient_magnitude, to_grayscale, ImageGrid};

/// Negative eigenvalues down to this are treated as rounding noise.
const NEG_EIGEN_TOL: f64 = 1e-10;

/// Gaussian summary of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    /// Row-major `k x k`.
    pub covariance: Vec<f64>,
    pub sample_count: usize,
}

impl FeatureStats {
    pub fn new(mean: Vec<f64>, covariance: Vec<f64>, sample_count: usize) -> Result<Self> {
        let k = mean.len();
        ensure!(k >= 1, "feature dimension must be >= 1");
        ensure!(covariance.len() == k * k, "covariance must be {k}x{k}");
        ensure!(sample_count >= 2, "need at least 2 samples, got {sample_count}");
        for i in 0..k {
            for j in 0..i {
                let (a, b) = (covariance[i * k + j], covariance[j * k + i]);
                ensure!(
                    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())),
                    "covariance is not symmetric at ({i},{j})"
                );
            }
        }
        Ok(Self {
            mean,
            covariance,
            sample_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn cov_matrix(&self) -> DMatrix<f64> {
        let k = self.dim();
        DMatrix::from_row_slice(k, k, &self.covariance)
    }
}

/// Sample mean and unbiased sample covariance.
pub fn feature_stats(features: &[Vec<f64>]) -> Result<FeatureStats> {
    ensure!(features.len() >= 2, "need at least 2 feature vectors, got {}", features.len());
    let k = features[0].len();
    ensure!(k >= 1, "feature vectors are empty");
    for (i, f) in features.iter().enumerate() {
        ensure!(f.len() == k, "feature vector {i} has dimension {}, expected {k}", f.len());
    }
    let n = features.len() as f64;
    let mut mean = vec![0.0; k];
    for f in features {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; k * k];
    for f in features {
        for i in 0..k {
            let di = f[i] - mean[i];
            for j in i..k {
                cov[i * k + j] += di * (f[j] - mean[j]);
            }
        }
    }
    for i in 0..k {
        for j in i..k {
            let v = cov[i * k + j] / (n - 1.0);
            cov[i * k + j] = v;
            cov[j * k + i] = v;
        }
    }
    FeatureStats::new(mean, cov, features.len())
}

fn clamped_eigenvalues(m: &DMatrix<f64>, what: &str) -> Result<DVector<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let min = eig.eigenvalues.min();
    if min < -NEG_EIGEN_TOL * scale {
        let max = eig.eigenvalues.max();
        return Err(Error::Numeric(format!(
            "{what} has eigenvalue {min:e} (largest {max:e}); not positive semidefinite"
        )));
    }
    Ok(eig.eigenvalues.map(|v| v.max(0.0)))
}

fn psd_sqrt(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let vals = clamped_eigenvalues(&sym, what)?;
    let d = DMatrix::from_diagonal(&vals.map(f64::sqrt));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// `tr((A B)^{1/2})` for PSD `A`, `B`, computed as `tr((√A B √A)^{1/2})`.
fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let ra = psd_sqrt(a, "covariance")?;
    let inner = &ra * b * &ra;
    Ok(clamped_eigenvalues(&inner, "covariance product")?.iter().map(|v| v.sqrt()).sum())
}

/// Fréchet distance between two Gaussians:
/// `|mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2})`.
pub fn frechet_distance(a: &FeatureStats, b: &FeatureStats) -> Result<f64> {
    ensure!(a.dim() == b.dim(), "feature dimensions differ: {} vs {}", a.dim(), b.dim());
    let (sa, sb) = (a.cov_matrix(), b.cov_matrix());
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y).powi(2)).sum();
    // averaging both orders makes the result exactly symmetric
    let cross = 0.5 * (trace_sqrt_product(&sa, &sb)? + trace_sqrt_product(&sb, &sa)?);
    let d = mean_term + sa.trace() + sb.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}

/// Length of [`global_descriptor`].
pub const DESCRIPTOR_LEN: usize = 8;

/// Cheap whole-image descriptor for Fréchet comparisons: per-channel mean and
/// standard deviation (gray is replicated to RGB), then mean and standard
/// deviation of the luma gradient magnitude.
pub fn global_descriptor(img: &ImageGrid) -> Result<Vec<f64>> {
    let rgb = img.with_channels(3)?;
    let grad = sobel_gradient_magnitude(&to_grayscale(img)?);
    let mean_sd = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
    };
    let mut out = Vec::with_capacity(DESCRIPTOR_LEN);
    let stats: Vec<(f64, f64)> = (0..3).map(|c| mean_sd(rgb.plane(c))).collect();
    out.extend(stats.iter().map(|s| s.0));
    out.extend(stats.iter().map(|s| s.1));
    let (gm, gs) = mean_sd(grad.data());
    out.push(gm);
    out.push(gs);
    Ok(out)
}
