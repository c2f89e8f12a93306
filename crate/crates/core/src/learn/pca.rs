//! Standardization and principal component analysis with the Kaiser rule.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column-wise z-scoring. Zero-variance columns keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: DVector<f64>,
    pub scale: DVector<f64>,
}

impl Standardizer {
    /// Fits on the rows of `x` using the unbiased variance.
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 samples to standardize, got {n}"
            )));
        }
        let mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()));
        let scale = DVector::from_iterator(
            x.ncols(),
            x.column_iter().zip(mean.iter()).map(|(c, &m)| {
                let var = c.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            }),
        );
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<DVector<f64>> {
        check_len(x.len(), self.dim())?;
        Ok(DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(self.mean.iter().zip(self.scale.iter()))
                .map(|(&v, (&m, &s))| (v - m) / s),
        ))
    }

    fn apply_rows(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
            (x[(r, c)] - self.mean[c]) / self.scale[c]
        })
    }
}

fn check_len(found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::Dimension {
            context: "feature vector",
            expected,
            found,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub feature_mean: DVector<f64>,
    pub feature_scale: DVector<f64>,
    /// D × D_T, orthonormal columns ordered by decreasing eigenvalue.
    pub axes: DMatrix<f64>,
    pub retained_dim: usize,
    /// All D eigenvalues of the correlation matrix, descending.
    pub eigenvalues: DVector<f64>,
}

/// Eigenvalues must exceed 1 by this much to be retained, so that rounding
/// noise on an exactly unit eigenvalue does not add a component.
pub const KAISER_TOLERANCE: f64 = 1e-9;

/// Fits PCA on the rows of `x` and keeps components with eigenvalue above 1
/// (at least one).
///
/// When there are more features than samples the eigenvectors are recovered
/// from the n × n Gram matrix instead of the D × D correlation matrix; the
/// nonzero spectra coincide.
pub fn pca_fit(x: &DMatrix<f64>) -> Result<PcaModel> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    let std = Standardizer::fit(x)?;
    let z = std.apply_rows(x);
    let denom = (n - 1) as f64;

    let (values, vectors) = if d <= n {
        let eig = SymmetricEigen::new(z.transpose() * &z / denom);
        (eig.eigenvalues, eig.eigenvectors)
    } else {
        let eig = SymmetricEigen::new(&z * z.transpose() / denom);
        (eig.eigenvalues, eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut eigenvalues = DVector::zeros(d);
    for (slot, &i) in order.iter().enumerate().take(d) {
        eigenvalues[slot] = values[i].max(0.0);
    }
    let retained = eigenvalues
        .iter()
        .filter(|&&v| v > 1.0 + KAISER_TOLERANCE)
        .count()
        .max(1);

    let mut axes = DMatrix::zeros(d, retained);
    for (j, &i) in order.iter().take(retained).enumerate() {
        let mut axis: DVector<f64> = if d <= n {
            vectors.column(i).into_owned()
        } else if values[i] > 0.0 {
            z.transpose() * vectors.column(i) / (denom * values[i]).sqrt()
        } else {
            DVector::zeros(d)
        };
        let norm = axis.norm();
        if norm == 0.0 {
            // Degenerate data: every feature constant.
            axis[j.min(d - 1)] = 1.0;
        } else {
            axis /= norm;
        }
        // Largest-magnitude entry positive.
        let pivot = axis.iamax();
        if axis[pivot] < 0.0 {
            axis.neg_mut();
        }
        axes.set_column(j, &axis);
    }

    Ok(PcaModel {
        feature_mean: std.mean,
        feature_scale: std.scale,
        axes,
        retained_dim: retained,
        eigenvalues,
    })
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.feature_mean.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<DVector<f64>> {
        check_len(x.len(), self.input_dim())?;
        let z = DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(self.feature_mean.iter().zip(self.feature_scale.iter()))
                .map(|(&v, (&m, &s))| (v - m) / s),
        );
        Ok(self.axes.tr_mul(&z))
    }

    /// Maps reduced coordinates back to feature space.
    pub fn reconstruct(&self, reduced: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(reduced.len(), self.retained_dim)?;
        let z = &self.axes * reduced;
        Ok(z.component_mul(&self.feature_scale) + &self.feature_mean)
    }
}

/// Input preprocessing in front of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureMap {
    Pca(PcaModel),
    /// Raw features, z-scored only.
    Standardize(Standardizer),
}

impl FeatureMap {
    pub fn fit(x: &DMatrix<f64>, use_pca: bool) -> Result<Self> {
        Ok(if use_pca {
            FeatureMap::Pca(pca_fit(x)?)
        } else {
            FeatureMap::Standardize(Standardizer::fit(x)?)
        })
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::Pca(p) => p.input_dim(),
            FeatureMap::Standardize(s) => s.dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FeatureMap::Pca(p) => p.retained_dim,
            FeatureMap::Standardize(s) => s.dim(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<DVector<f64>> {
        match self {
            FeatureMap::Pca(p) => p.transform(x),
            FeatureMap::Standardize(s) => s.apply(x),
        }
    }

    /// Maps a batch of feature vectors to a Q × output_dim matrix.
    pub fn apply_batch<'a>(
        &self,
        rows: impl ExactSizeIterator<Item = &'a [f64]>,
    ) -> Result<DMatrix<f64>> {
        let q = rows.len();
        let mut out = DMatrix::zeros(q, self.output_dim());
        for (r, x) in rows.enumerate() {
            out.set_row(r, &self.apply(x)?.transpose());
        }
        Ok(out)
    }
}
