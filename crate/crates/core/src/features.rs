//! Per-cluster geometric features: the three eigenvalues of the spatial
//! covariance, the axis-aligned bounding-box volume, and the variance of
//! the intensity channel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kitti::Point;

/// Header of the feature dataset CSV exchanged between the extraction and
/// training stages. The class column holds the fixed integer encoding.
pub const FEATURE_CSV_HEADER: &str = "eig1,eig2,eig3,volume,ivar,class";

/// Eigenvalues within this of zero (numerical noise on PSD matrices) are
/// clamped to exactly zero.
const PSD_CLAMP: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("cluster is empty")]
    EmptyCluster,
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("feature csv: {0}")]
    Csv(String),
}

/// Symmetric 3x3 matrix stored as its six unique entries (m^2 for spatial
/// covariances).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymMatrix3 {
    pub xx: f64,
    pub xy: f64,
    pub xz: f64,
    pub yy: f64,
    pub yz: f64,
    pub zz: f64,
}

impl SymMatrix3 {
    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn determinant(&self) -> f64 {
        self.xx * (self.yy * self.zz - self.yz * self.yz)
            - self.xy * (self.xy * self.zz - self.yz * self.xz)
            + self.xz * (self.xy * self.yz - self.yy * self.xz)
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.xx * self.xx
            + self.yy * self.yy
            + self.zz * self.zz
            + 2.0 * (self.xy * self.xy + self.xz * self.xz + self.yz * self.yz))
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        [self.xx, self.xy, self.xz, self.yy, self.yz, self.zz]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Which spread statistic fills the first three feature slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EigenMode {
    /// True covariance eigenvalues (rotation-invariant).
    #[default]
    Eigenvalues,
    /// Raw per-axis variances, descending — for comparison experiments.
    AxisVariances,
}

/// The five per-cluster features, spread entries sorted descending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub eig1: f64,
    pub eig2: f64,
    pub eig3: f64,
    pub volume: f64,
    pub intensity_variance: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; 5] {
        [self.eig1, self.eig2, self.eig3, self.volume, self.intensity_variance]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        FeatureVector { eig1: a[0], eig2: a[1], eig3: a[2], volume: a[3], intensity_variance: a[4] }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// One data row of the feature CSV (class as its integer code).
    pub fn to_csv_row(&self, class_code: u8) -> String {
        let a = self.as_array();
        format!("{},{},{},{},{},{}", a[0], a[1], a[2], a[3], a[4], class_code)
    }

    /// Parses one data row of the feature CSV, returning the class code.
    pub fn parse_csv_row(line: &str) -> Result<(FeatureVector, u8), FeatureError> {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(FeatureError::Csv(format!(
                "expected 6 columns, found {}: {line:?}",
                cols.len()
            )));
        }
        let mut values = [0.0; 5];
        for (v, col) in values.iter_mut().zip(&cols) {
            *v = col
                .trim()
                .parse()
                .map_err(|_| FeatureError::Csv(format!("bad float {col:?}")))?;
        }
        let code: u8 = cols[5]
            .trim()
            .parse()
            .map_err(|_| FeatureError::Csv(format!("bad class code {:?}", cols[5])))?;
        Ok((FeatureVector::from_array(values), code))
    }
}

/// Population covariance (divide by N) of the cluster positions about their
/// centroid.
pub fn covariance(cluster: &[Point]) -> Result<SymMatrix3, FeatureError> {
    if cluster.is_empty() {
        return Err(FeatureError::EmptyCluster);
    }
    let n = cluster.len() as f64;
    let mut centroid = [0.0f64; 3];
    for p in cluster {
        let q = p.position();
        centroid[0] += q[0];
        centroid[1] += q[1];
        centroid[2] += q[2];
    }
    centroid.iter_mut().for_each(|c| *c /= n);
    let mut m = SymMatrix3::default();
    for p in cluster {
        let q = p.position();
        let d = [q[0] - centroid[0], q[1] - centroid[1], q[2] - centroid[2]];
        m.xx += d[0] * d[0];
        m.xy += d[0] * d[1];
        m.xz += d[0] * d[2];
        m.yy += d[1] * d[1];
        m.yz += d[1] * d[2];
        m.zz += d[2] * d[2];
    }
    m.xx /= n;
    m.xy /= n;
    m.xz /= n;
    m.yy /= n;
    m.yz /= n;
    m.zz /= n;
    Ok(m)
}

/// Eigenvalues of a symmetric 3x3 matrix, sorted descending.
pub fn eigenvalues_sym3(m: &SymMatrix3) -> Result<[f64; 3], FeatureError> {
    Ok(eigen_sym3(m)?.0)
}

/// Full symmetric eigen decomposition by cyclic Jacobi rotations.
///
/// Returns `(values, vectors)` with `vectors[k]` the unit eigenvector for
/// `values[k]`, values sorted descending. Iterates until the off-diagonal
/// norm drops below 1e-12 times the Frobenius norm of the input.
pub fn eigen_sym3(m: &SymMatrix3) -> Result<([f64; 3], [[f64; 3]; 3]), FeatureError> {
    if !m.is_finite() {
        return Err(FeatureError::NonFinite);
    }
    let mut a = m.to_rows();
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let norm = m.frobenius_norm();
    if norm > 0.0 {
        let tol = 1e-12 * norm;
        // Quadratic convergence; a handful of sweeps suffices for 3x3.
        for _ in 0..64 {
            let off = (2.0
                * (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2]))
                .sqrt();
            if off < tol {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
    }
    let mut pairs = [
        (a[0][0], [v[0][0], v[1][0], v[2][0]]),
        (a[1][1], [v[0][1], v[1][1], v[2][1]]),
        (a[2][2], [v[0][2], v[1][2], v[2][2]]),
    ];
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    Ok((
        [pairs[0].0, pairs[1].0, pairs[2].0],
        [pairs[0].1, pairs[1].1, pairs[2].1],
    ))
}

/// One Jacobi rotation annihilating `a[p][q]`, accumulating into `v`.
fn jacobi_rotate(a: &mut [[f64; 3]; 3], v: &mut [[f64; 3]; 3], p: usize, q: usize) {
    let apq = a[p][q];
    if apq == 0.0 {
        return;
    }
    let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let r = 3 - p - q; // the untouched axis
    let app = a[p][p];
    let aqq = a[q][q];
    let arp = a[r][p];
    let arq = a[r][q];
    a[p][p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
    a[q][q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
    a[p][q] = 0.0;
    a[q][p] = 0.0;
    a[r][p] = c * arp - s * arq;
    a[p][r] = a[r][p];
    a[r][q] = s * arp + c * arq;
    a[q][r] = a[r][q];
    for row in v.iter_mut() {
        let vp = row[p];
        let vq = row[q];
        row[p] = c * vp - s * vq;
        row[q] = s * vp + c * vq;
    }
}

/// Volume of the axis-aligned bounding box of the cluster.
pub fn aabb_volume(cluster: &[Point]) -> Result<f64, FeatureError> {
    if cluster.is_empty() {
        return Err(FeatureError::EmptyCluster);
    }
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for p in cluster {
        let q = p.position();
        for k in 0..3 {
            min[k] = min[k].min(q[k]);
            max[k] = max[k].max(q[k]);
        }
    }
    Ok((max[0] - min[0]) * (max[1] - min[1]) * (max[2] - min[2]))
}

/// Population variance of the intensity channel.
pub fn intensity_variance(cluster: &[Point]) -> Result<f64, FeatureError> {
    if cluster.is_empty() {
        return Err(FeatureError::EmptyCluster);
    }
    let n = cluster.len() as f64;
    let mean = cluster.iter().map(|p| p.intensity as f64).sum::<f64>() / n;
    let var = cluster
        .iter()
        .map(|p| {
            let d = p.intensity as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(var)
}

pub fn extract_features(cluster: &[Point]) -> Result<FeatureVector, FeatureError> {
    extract_features_with_mode(cluster, EigenMode::Eigenvalues)
}

/// Composes covariance eigenvalues (or per-axis variances), bounding volume,
/// and intensity variance into one feature vector.
pub fn extract_features_with_mode(
    cluster: &[Point],
    mode: EigenMode,
) -> Result<FeatureVector, FeatureError> {
    let cov = covariance(cluster)?;
    let mut spread = match mode {
        EigenMode::Eigenvalues => eigenvalues_sym3(&cov)?,
        EigenMode::AxisVariances => {
            let mut d = [cov.xx, cov.yy, cov.zz];
            d.sort_by(|a, b| b.total_cmp(a));
            d
        }
    };
    for e in spread.iter_mut() {
        if *e < 0.0 && *e >= -PSD_CLAMP {
            *e = 0.0;
        }
    }
    Ok(FeatureVector {
        eig1: spread[0],
        eig2: spread[1],
        eig3: spread[2],
        volume: aabb_volume(cluster)?,
        intensity_variance: intensity_variance(cluster)?,
    })
}
