use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::chart::Chart;
use crate::error::{invalid, Error, Result};
use crate::numeric::richardson;

/// Candidates whose residual after projection falls below this are skipped.
pub const DEPENDENCE_THRESHOLD: f64 = 1e-6;
/// Maximum tolerated asymmetry of `n . d_a d_b r` before symmetrisation.
pub const SYMMETRY_RESIDUAL: f64 = 1e-8;
/// Symmetry tolerance for caller-supplied curvature forms.
pub const FORM_SYMMETRY_TOL: f64 = 1e-10;

/// The curvature forms `k^(alpha)` of one point, one symmetric `m x m`
/// matrix per normal direction, in an orthonormal tangent basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Vec<f64>>>", into = "Vec<Vec<Vec<f64>>>")]
pub struct FormSet {
    dim: usize,
    forms: Vec<DMatrix<f64>>,
}

impl FormSet {
    /// Validates shape and symmetry (to 1e-10) and symmetrises exactly.
    pub fn new(forms: Vec<DMatrix<f64>>) -> Result<Self> {
        let dim = forms
            .first()
            .map(|f| f.nrows())
            .ok_or_else(|| invalid("at least one curvature form required"))?;
        if dim == 0 {
            return Err(invalid("curvature forms must be at least 1x1"));
        }
        let mut out = Vec::with_capacity(forms.len());
        for f in forms {
            if f.shape() != (dim, dim) {
                return Err(invalid("curvature forms must all be square of the same size"));
            }
            if f.iter().any(|x| !x.is_finite()) {
                return Err(invalid("curvature form has non-finite entries"));
            }
            let residual = (&f - f.transpose()).amax();
            if residual > FORM_SYMMETRY_TOL * f.amax().max(1.0) {
                return Err(Error::NonSymmetricForm { residual });
            }
            out.push((&f + f.transpose()) * 0.5);
        }
        Ok(Self { dim, forms: out })
    }

    /// Forms that are diagonal, given by their diagonals.
    pub fn diagonal(diagonals: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            diagonals
                .iter()
                .map(|d| DMatrix::from_diagonal(&DVector::from_row_slice(d)))
                .collect(),
        )
    }

    /// Forms of a curve (`m = 1`): one number per normal.
    pub fn curve(curvatures: &[f64]) -> Result<Self> {
        Self::new(curvatures.iter().map(|&k| DMatrix::from_element(1, 1, k)).collect())
    }

    /// Intrinsic dimension `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of normal directions.
    pub fn codim(&self) -> usize {
        self.forms.len()
    }

    pub fn forms(&self) -> &[DMatrix<f64>] {
        &self.forms
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        self.forms.iter().all(|f| {
            (0..self.dim).all(|a| (0..self.dim).all(|b| a == b || f[(a, b)].abs() <= tol))
        })
    }

    /// `Q^T k Q` for every form (a change of orthonormal tangent basis).
    pub fn conjugated(&self, q: &DMatrix<f64>) -> Self {
        let forms = self
            .forms
            .iter()
            .map(|f| {
                let c = q.transpose() * f * q;
                (&c + c.transpose()) * 0.5
            })
            .collect();
        Self { dim: self.dim, forms }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            forms: self.forms.iter().map(|f| f * c).collect(),
        }
    }

    /// Flips the sign of form `alpha` (reversing that normal).
    pub fn with_flipped(&self, alpha: usize) -> Self {
        let mut out = self.clone();
        out.forms[alpha] *= -1.0;
        out
    }

    /// `I + sum_alpha eps_alpha k^(alpha)`.
    pub fn offset_operator(&self, eps: &[f64]) -> DMatrix<f64> {
        let mut a = DMatrix::identity(self.dim, self.dim);
        for (f, e) in self.forms.iter().zip(eps) {
            a += f * *e;
        }
        a
    }

    /// Eigenvalues of the single form, sorted descending (codimension 1).
    pub fn principal(&self) -> Option<Vec<f64>> {
        (self.codim() == 1).then(|| sorted_eigenvalues(&self.forms[0]))
    }
}

impl TryFrom<Vec<Vec<Vec<f64>>>> for FormSet {
    type Error = Error;

    fn try_from(rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let forms = rows
            .into_iter()
            .map(|f| {
                let m = f.len();
                if f.iter().any(|r| r.len() != m) {
                    return Err(invalid("curvature form rows must be square"));
                }
                Ok(DMatrix::from_fn(m, m, |i, j| f[i][j]))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(forms)
    }
}

impl From<FormSet> for Vec<Vec<Vec<f64>>> {
    fn from(set: FormSet) -> Self {
        set.forms
            .iter()
            .map(|f| f.row_iter().map(|r| r.iter().copied().collect()).collect())
            .collect()
    }
}

pub(crate) fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// First- and second-order geometry at one point of a chart.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub point: Vec<f64>,
    /// Orthonormal tangent basis, `n x m`, columns `J L^{-T}` with `g = L L^T`.
    pub tangent_frame: DMatrix<f64>,
    /// Orthonormal normal frame, `n x (n - m)`.
    pub normal_frame: DMatrix<f64>,
    pub forms: FormSet,
    /// Principal curvatures, descending; codimension 1 only.
    pub principal: Option<Vec<f64>>,
}

/// Orthonormal basis of the tangent space (thin QR of the Jacobian).
fn tangent_basis(jac: &DMatrix<f64>) -> DMatrix<f64> {
    jac.clone().qr().q()
}

/// Deterministic orthonormal normal frame at `u`.
///
/// Standard basis vectors are Gram–Schmidt orthogonalised against the
/// tangent space and previously accepted normals; a candidate is skipped when
/// its residual norm is below [`DEPENDENCE_THRESHOLD`]. Each normal is then
/// signed so its largest-magnitude component is positive.
pub fn normal_frame(chart: &Chart, u: &[f64]) -> Result<DMatrix<f64>> {
    let jac = chart.jacobian(u)?;
    normal_frame_from_jacobian(&jac, u)
}

pub(crate) fn normal_frame_from_jacobian(jac: &DMatrix<f64>, u: &[f64]) -> Result<DMatrix<f64>> {
    let (n, m) = jac.shape();
    let t = tangent_basis(jac);
    let mut normals: Vec<DVector<f64>> = Vec::with_capacity(n - m);
    for i in 0..n {
        if normals.len() == n - m {
            break;
        }
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        for _ in 0..2 {
            let proj = &t * t.tr_mul(&v);
            v -= proj;
            for q in &normals {
                let d = q.dot(&v);
                v.axpy(-d, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > DEPENDENCE_THRESHOLD {
            normals.push(v / norm);
        }
    }
    if normals.len() != n - m {
        return Err(Error::DegenerateChart {
            point: u.to_vec(),
            sigma_min: 0.0,
            tol: DEPENDENCE_THRESHOLD,
        });
    }
    for q in &mut normals {
        let imax = q.iamax();
        if q[imax] < 0.0 {
            q.neg_mut();
        }
    }
    Ok(DMatrix::from_columns(&normals))
}

/// Curvature forms, frames and (codimension 1) principal curvatures at `u`.
///
/// With `h^(alpha)_ab = n^(alpha) . d_a d_b r` and `g = L L^T`, the returned
/// forms are `k^(alpha) = -L^{-1} h^(alpha) L^{-T}`: offsetting along
/// `+n^(alpha)` by `eps` stretches tangent lengths by `1 + eps k`. A sphere
/// with outward normal has `k = +1/R`.
pub fn curvature_forms(chart: &Chart, u: &[f64]) -> Result<CurvatureData> {
    let jac = chart.jacobian(u)?;
    let second = chart.second_derivatives(u)?;
    let normals = normal_frame_from_jacobian(&jac, u)?;
    let (l_inv, tangent) = orthonormal_reduction(&jac, u)?;
    let m = chart.dim();
    let mut forms = Vec::with_capacity(normals.ncols());
    for alpha in 0..normals.ncols() {
        let n = normals.column(alpha);
        let h = DMatrix::from_fn(m, m, |a, b| n.dot(second.get(a, b)));
        let residual = (&h - h.transpose()).amax();
        if residual > SYMMETRY_RESIDUAL * h.amax().max(1.0) {
            return Err(Error::NonSymmetricForm { residual });
        }
        let h = (&h + h.transpose()) * 0.5;
        let k = -(&l_inv * h * l_inv.transpose());
        forms.push((&k + k.transpose()) * 0.5);
    }
    let forms = FormSet::new(forms)?;
    let principal = forms.principal();
    Ok(CurvatureData {
        point: u.to_vec(),
        tangent_frame: tangent,
        normal_frame: normals,
        forms,
        principal,
    })
}

/// `L^{-1}` of the metric Cholesky factor and the tangent frame `J L^{-T}`.
pub(crate) fn orthonormal_reduction(jac: &DMatrix<f64>, u: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let g = jac.tr_mul(jac);
    let chol = Cholesky::new(g).ok_or_else(|| Error::DegenerateChart {
        point: u.to_vec(),
        sigma_min: 0.0,
        tol: 0.0,
    })?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| invalid("metric factor not invertible"))?;
    let tangent = jac * l_inv.transpose();
    Ok((l_inv, tangent))
}

/// Re-signs the columns of `frame` to agree with `reference`.
///
/// Fails with [`Error::FrameDiscontinuity`] when some column is closer to
/// orthogonal than parallel to its reference counterpart.
pub fn align_frame(frame: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = frame.clone();
    for j in 0..frame.ncols() {
        let overlap = frame.column(j).dot(&reference.column(j));
        if overlap.abs() < 0.5 {
            return Err(Error::FrameDiscontinuity { overlap });
        }
        if overlap < 0.0 {
            out.column_mut(j).neg_mut();
        }
    }
    Ok(out)
}

/// Rates `d_a n^(beta) . n^(alpha)`, stored as `[alpha][beta][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCrossTerms {
    codim: usize,
    dim: usize,
    values: Vec<f64>,
}

impl FrameCrossTerms {
    pub fn get(&self, alpha: usize, beta: usize, a: usize) -> f64 {
        self.values[(alpha * self.codim + beta) * self.dim + a]
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest `|d_a n^(alpha) . n^(alpha)|`; zero for unit normals.
    pub fn max_diagonal(&self) -> f64 {
        let mut worst = 0.0f64;
        for alpha in 0..self.codim {
            for a in 0..self.dim {
                worst = worst.max(self.get(alpha, alpha, a).abs());
            }
        }
        worst
    }

    /// Largest `|C[alpha][beta][a] + C[beta][alpha][a]|`.
    pub fn max_antisymmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for alpha in 0..self.codim {
            for beta in 0..self.codim {
                for a in 0..self.dim {
                    worst = worst.max((self.get(alpha, beta, a) + self.get(beta, alpha, a)).abs());
                }
            }
        }
        worst
    }
}

/// Directional derivatives of the normal frame field projected on the frame.
///
/// The field is [`normal_frame`] evaluated at neighbouring parameter points
/// with signs propagated from `u`; derivatives are central differences with
/// one Richardson step.
pub fn frame_cross_terms(chart: &Chart, u: &[f64]) -> Result<FrameCrossTerms> {
    let center = normal_frame(chart, u)?;
    let (m, codim) = (chart.dim(), chart.codim());
    let mut values = vec![0.0; codim * codim * m];
    let mut v = u.to_vec();
    for a in 0..m {
        let h = 1e-4 * u[a].abs().max(1.0);
        let mut derivative = |s: f64| -> Result<DMatrix<f64>> {
            v[a] = u[a] + s;
            let plus = align_frame(&normal_frame(chart, &v)?, &center)?;
            v[a] = u[a] - s;
            let minus = align_frame(&normal_frame(chart, &v)?, &center)?;
            v[a] = u[a];
            Ok((plus - minus) / (2.0 * s))
        };
        let coarse = derivative(h)?;
        let fine = derivative(h / 2.0)?;
        let d = coarse.zip_map(&fine, |c, f| richardson(c, f, 2));
        for alpha in 0..codim {
            for beta in 0..codim {
                values[(alpha * codim + beta) * m + a] = center.column(alpha).dot(&d.column(beta));
            }
        }
    }
    Ok(FrameCrossTerms { codim, dim: m, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formset_rejects_asymmetric_input() {
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 2.0]);
        assert!(matches!(FormSet::new(vec![f]), Err(Error::NonSymmetricForm { .. })));
    }

    #[test]
    fn formset_rejects_mixed_sizes() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::identity(3, 3);
        assert!(FormSet::new(vec![a, b]).is_err());
        assert!(FormSet::new(vec![]).is_err());
    }

    #[test]
    fn formset_serde_roundtrip_shape() {
        let set = FormSet::diagonal(&[vec![1.0, 0.0], vec![0.0, 0.5]]).unwrap();
        let rows: Vec<Vec<Vec<f64>>> = set.clone().into();
        assert_eq!(rows[1], vec![vec![0.0, 0.0], vec![0.0, 0.5]]);
        assert_eq!(FormSet::try_from(rows).unwrap(), set);
    }

    #[test]
    fn align_detects_flip() {
        let r = DMatrix::identity(3, 1);
        let flipped = -&r;
        assert_eq!(align_frame(&flipped, &r).unwrap(), r);
        let rotated = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        assert!(matches!(align_frame(&rotated, &r), Err(Error::FrameDiscontinuity { .. })));
    }
}
