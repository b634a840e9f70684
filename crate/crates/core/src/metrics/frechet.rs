use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// First 8 bytes of a feature file, followed by `n` and `d` as u32 LE and
/// then `n * d` f32 LE values in row-major order.
pub const FEATURE_MAGIC: &[u8; 8] = b"LCFEAT01";

const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Gaussian summary of a feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub n: usize,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl FeatureSet {
    pub fn new(n: usize, mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("feature set needs n >= 2, got {n}")));
        }
        let d = mean.len();
        if covariance.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "mean of length {d} with a {:?} covariance",
                covariance.shape()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature statistics".into()));
        }
        let scale = covariance.amax().max(1.0);
        let defect = (&covariance - covariance.transpose()).amax();
        if defect > SYMMETRY_TOLERANCE * scale {
            return Err(Error::InvalidArgument(format!("covariance asymmetric by {defect:e}")));
        }
        Ok(FeatureSet { n, mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased covariance of an `n x d` matrix (rows are samples).
pub fn fit_featureset(samples: &DMatrix<f64>) -> Result<FeatureSet> {
    let (n, d) = samples.shape();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {n}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite feature value".into()));
    }
    let mean = DVector::from_iterator(d, samples.column_iter().map(|c| c.sum() / n as f64));
    let mut centered = samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let cov = (&cov + cov.transpose()) * 0.5;
    FeatureSet::new(n, mean, cov)
}

fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `|mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2))`.
///
/// The trace of the product root is computed as the sum of square roots of
/// the eigenvalues of the symmetric matrix `S_a^(1/2) S_b S_a^(1/2)`, which
/// shares its spectrum with `S_a S_b`. Negative eigenvalues are clamped to
/// zero and so is the result.
pub fn frechet_distance(a: &FeatureSet, b: &FeatureSet) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("{} vs {} feature dimensions", a.dim(), b.dim())));
    }
    for fs in [a, b] {
        if fs.mean.iter().chain(fs.covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature statistics".into()));
        }
    }
    let diff = &a.mean - &b.mean;
    let root_a = symmetric_sqrt(&a.covariance);
    let inner = &root_a * &b.covariance * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = SymmetricEigen::new(inner).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    let d = diff.norm_squared() + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != FEATURE_MAGIC {
        return Err(Error::Format(format!("{}: not a feature file", path.display())));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != n * d * 4 {
        return Err(Error::Format(format!(
            "{}: header says {n}x{d} but {} payload bytes",
            path.display(),
            body.len()
        )));
    }
    let values = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    Ok(DMatrix::from_row_iterator(n, d, values))
}

pub fn write_features(path: impl AsRef<Path>, samples: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let (n, d) = samples.shape();
    let mut out = Vec::with_capacity(16 + n * d * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for row in samples.row_iter() {
        for v in row.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}
