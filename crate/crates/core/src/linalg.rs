//! Dense symmetric linear algebra shared by the spectral routines.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graphs::Eigenpair;

/// Matrices up to this order use a full symmetric eigendecomposition.
pub const FULL_DECOMPOSITION_LIMIT: usize = 512;

/// Relative eigenvalue gap below which an eigenvalue is reported non-simple.
pub const SIMPLICITY_GAP: f64 = 1e-8;

const QR_EPS: f64 = 1e-15;
const QR_MAX_ITER: usize = 10_000;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 200_000;

/// Eigenvalues sorted in decreasing signed order with matching column eigenvectors.
#[derive(Debug, Clone)]
pub struct SymmetricSpectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymmetricSpectrum {
    pub fn vector(&self, index: usize) -> DVector<f64> {
        self.vectors.column(index).into_owned()
    }

    /// Relative distance from eigenvalue `index` to its nearest neighbour.
    pub fn relative_gap(&self, index: usize) -> f64 {
        let value = self.values[index];
        let scale = self
            .values
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut gap = f64::INFINITY;
        if index > 0 {
            gap = gap.min(self.values[index - 1] - value);
        }
        if index + 1 < self.values.len() {
            gap = gap.min(value - self.values[index + 1]);
        }
        gap / scale
    }

    pub fn eigenpair(&self, index: usize) -> Eigenpair {
        Eigenpair {
            value: self.values[index],
            vector: orient(self.vector(index)),
            gap: self.relative_gap(index),
        }
    }
}

pub fn symmetric_spectrum(matrix: &DMatrix<f64>) -> Result<SymmetricSpectrum> {
    let n = matrix.nrows();
    let eigen = SymmetricEigen::try_new(matrix.clone(), QR_EPS, QR_MAX_ITER).ok_or_else(|| {
        Error::Numeric(format!(
            "symmetric QR did not converge within {QR_MAX_ITER} iterations (n = {n})"
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let values = order.iter().map(|&i| eigen.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eigen.eigenvectors[(r, order[c])]);
    Ok(SymmetricSpectrum { values, vectors })
}

/// Eigenpair of the largest (signed) eigenvalue of a symmetric matrix.
pub fn dominant_symmetric(matrix: &DMatrix<f64>) -> Result<Eigenpair> {
    if matrix.nrows() <= FULL_DECOMPOSITION_LIMIT {
        return Ok(symmetric_spectrum(matrix)?.eigenpair(0));
    }
    dominant_by_power_iteration(matrix)
}

/// Shifted power iteration; the shift makes the spectrum nonnegative so the
/// largest signed eigenvalue dominates. A deflated second run measures the gap.
fn dominant_by_power_iteration(matrix: &DMatrix<f64>) -> Result<Eigenpair> {
    let n = matrix.nrows();
    let shift = (0..n)
        .map(|i| matrix.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let shifted = matrix + DMatrix::identity(n, n) * shift;

    let start = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_7).fract());
    let (top, vector) = power_iterate(&shifted, start, None)?;

    let deflated = &shifted - &vector * vector.transpose() * top;
    let start = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.414_213_562_3).fract());
    let (second, _) = power_iterate(&deflated, start, Some(&vector))?;

    let value = top - shift;
    let scale = value.abs().max((second - shift).abs()).max(f64::MIN_POSITIVE);
    Ok(Eigenpair {
        value,
        vector: orient(vector),
        gap: (top - second).abs() / scale,
    })
}

fn power_iterate(
    matrix: &DMatrix<f64>,
    mut x: DVector<f64>,
    orthogonal_to: Option<&DVector<f64>>,
) -> Result<(f64, DVector<f64>)> {
    let project = |x: &mut DVector<f64>| {
        if let Some(q) = orthogonal_to {
            let c = q.dot(x);
            x.axpy(-c, q, 1.0);
        }
    };
    project(&mut x);
    x.normalize_mut();
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_MAX_ITER {
        let mut y = matrix * &x;
        project(&mut y);
        let rayleigh = x.dot(&y);
        residual = (&y - &x * rayleigh).norm();
        let norm = y.norm();
        if norm == 0.0 {
            return Ok((0.0, x));
        }
        x = y / norm;
        if residual <= POWER_TOL * rayleigh.abs().max(1.0) {
            let rayleigh = x.dot(&(matrix * &x));
            return Ok((rayleigh, x));
        }
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge in {POWER_MAX_ITER} iterations (residual {residual:e}, n = {})",
        matrix.nrows()
    )))
}

/// Applies the eigenvector sign convention: positive when the vector can be
/// made entrywise nonnegative, otherwise the largest-magnitude entry positive.
pub fn orient(mut v: DVector<f64>) -> DVector<f64> {
    let scale = v.amax();
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let nonpositive = v.iter().all(|&x| x <= tol);
    let nonnegative = v.iter().all(|&x| x >= -tol);
    let flip = if nonnegative && !nonpositive {
        false
    } else if nonpositive && !nonnegative {
        true
    } else {
        let imax = v.iamax();
        v[imax] < 0.0
    };
    if flip {
        v.neg_mut();
    }
    v
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix by eigendecomposition.
/// Eigenvalues below `rel_cutoff` times the largest magnitude are dropped.
pub fn symmetric_pseudo_inverse(matrix: &DMatrix<f64>, rel_cutoff: f64) -> Result<DMatrix<f64>> {
    let n = matrix.nrows();
    let eigen = SymmetricEigen::try_new(matrix.clone(), QR_EPS, QR_MAX_ITER)
        .ok_or_else(|| Error::Numeric("pseudo-inverse eigendecomposition failed".into()))?;
    let largest = eigen.eigenvalues.amax();
    let cutoff = rel_cutoff * largest;
    let mut out = DMatrix::zeros(n, n);
    for (k, &value) in eigen.eigenvalues.iter().enumerate() {
        if value.abs() > cutoff {
            let q = eigen.eigenvectors.column(k);
            out += q * q.transpose() / value;
        }
    }
    Ok(out)
}

/// Distance between two directions after unit normalization, minimized over sign.
pub fn direction_error(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let a = a.normalize();
    let b = b.normalize();
    (&a - &b).norm().min((&a + &b).norm())
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}
