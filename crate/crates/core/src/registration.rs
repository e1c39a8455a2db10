//! Least-squares rigid registration between matched prototype sets.
//!
//! Transforms act as `x -> R (x + t)`: translate first, then rotate.
//! This is not the usual `R x + t`; the fitted `t` is expressed in the
//! pre-rotation frame.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assignment::NodeMapping;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
}

impl RigidTransform {
    pub fn identity(dim: usize) -> Self {
        Self { rotation: DMatrix::identity(dim, dim), translation: DVector::zeros(dim) }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    /// `R (x + t)`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let shifted = DVector::from_column_slice(x) + &self.translation;
        Ok((&self.rotation * shifted).as_slice().to_vec())
    }

    /// Frobenius norm of `RᵀR - I`.
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.dim();
        (self.rotation.transpose() * &self.rotation - DMatrix::<f64>::identity(n, n)).norm()
    }

    pub fn determinant(&self) -> f64 {
        self.rotation.determinant()
    }

    /// Least-squares objective `Σ ||R (p + t) - q||²` over matched pairs.
    pub fn objective(&self, prev: &[Vec<f64>], curr: &[Vec<f64>], mapping: &NodeMapping) -> Result<f64> {
        let mut total = 0.0;
        for &(g, h) in &mapping.pairs {
            let y = self.apply(&prev[g])?;
            total += y.iter().zip(&curr[h]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(total)
    }
}

/// Row-major serialisable form, used in run traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub rotation: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
}

impl From<&RigidTransform> for TransformRecord {
    fn from(x: &RigidTransform) -> Self {
        let n = x.dim();
        Self {
            rotation: (0..n).map(|r| (0..n).map(|c| x.rotation[(r, c)]).collect()).collect(),
            translation: x.translation.as_slice().to_vec(),
        }
    }
}

impl TryFrom<&TransformRecord> for RigidTransform {
    type Error = Error;

    fn try_from(r: &TransformRecord) -> Result<Self> {
        let n = r.translation.len();
        if r.rotation.len() != n || r.rotation.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: r.rotation.len() });
        }
        Ok(Self {
            rotation: DMatrix::from_fn(n, n, |i, j| r.rotation[i][j]),
            translation: DVector::from_column_slice(&r.translation),
        })
    }
}

fn centroid(points: &[&[f64]], dim: usize) -> DVector<f64> {
    let mut c = DVector::zeros(dim);
    for p in points {
        c += DVector::from_column_slice(p);
    }
    c / points.len() as f64
}

/// Kabsch-Umeyama fit of the proper rotation `R` and translation `t`
/// minimising `Σ ||R (prev[g] + t) - curr[g']||²` over the mapping pairs.
///
/// Degenerate configurations (coincident or collinear points) yield some
/// minimiser with `det R = +1`.
pub fn fit_rigid(prev: &[Vec<f64>], curr: &[Vec<f64>], mapping: &NodeMapping) -> Result<RigidTransform> {
    if mapping.len() < 2 {
        return Err(Error::TooFewPairs(mapping.len()));
    }
    let dim = prev.first().ok_or(Error::EmptyInput("previous points"))?.len();
    let mut p: Vec<&[f64]> = Vec::with_capacity(mapping.len());
    let mut q: Vec<&[f64]> = Vec::with_capacity(mapping.len());
    for &(g, h) in &mapping.pairs {
        let (a, b) = match (prev.get(g), curr.get(h)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::InvalidParameter(format!("mapping pair ({g}, {h}) out of range"))),
        };
        if a.len() != dim || b.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: a.len().max(b.len()) });
        }
        p.push(a);
        q.push(b);
    }

    let cp = centroid(&p, dim);
    let cq = centroid(&q, dim);

    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (a, b) in p.iter().zip(&q) {
        let da = DVector::from_column_slice(a) - &cp;
        let db = DVector::from_column_slice(b) - &cq;
        h += &da * db.transpose();
    }

    let svd = h.svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v = svd.v_t.expect("svd computed with v_t").transpose();

    let mut d = DMatrix::<f64>::identity(dim, dim);
    if (&v * u.transpose()).determinant() < 0.0 {
        d[(dim - 1, dim - 1)] = -1.0;
    }
    let rotation = &v * d * u.transpose();
    let translation = rotation.transpose() * &cq - &cp;
    Ok(RigidTransform { rotation, translation })
}

/// `R (x + t)` for every point, preserving order.
pub fn project(points: &[Vec<f64>], xform: &RigidTransform) -> Result<Vec<Vec<f64>>> {
    points.iter().map(|x| xform.apply(x)).collect()
}
