use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{invalid, Result};

/// `K x = lambda M x` with symmetric `K` and diagonal positive `M`.
#[derive(Debug, Clone)]
pub struct GeneralizedProblem {
    pub stiffness: CscMatrix<f64>,
    pub mass: Vec<f64>,
}

impl GeneralizedProblem {
    pub fn size(&self) -> usize {
        self.mass.len()
    }

    /// `max |K_ij - K_ji| / max |K_ij|`.
    pub fn relative_asymmetry(&self) -> f64 {
        let k = &self.stiffness;
        let t = k.transpose();
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (i, j, v) in k.triplet_iter() {
            scale = scale.max(v.abs());
            let w = t.get_entry(i, j).map(|e| e.into_value()).unwrap_or(0.0);
            diff = diff.max((v - w).abs());
        }
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }

    pub fn dense_stiffness(&self) -> nalgebra::DMatrix<f64> {
        let n = self.size();
        let mut d = nalgebra::DMatrix::zeros(n, n);
        for (i, j, v) in self.stiffness.triplet_iter() {
            d[(i, j)] += *v;
        }
        d
    }
}

/// Accumulates a quadratic form `sum c (x_p - x_q)^2 + sum d x_p^2` and a
/// diagonal mass, then emits the symmetric stiffness matrix.
#[derive(Debug, Clone)]
pub struct StencilBuilder {
    n: usize,
    diagonal: Vec<f64>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    mass: Vec<f64>,
}

impl StencilBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            diagonal: vec![0.0; n],
            rows: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
            mass: vec![0.0; n],
        }
    }

    /// Coupling `c (x_p - x_q)^2`.
    pub fn edge(&mut self, p: usize, q: usize, c: f64) {
        self.diagonal[p] += c;
        self.diagonal[q] += c;
        self.rows.extend([p, q]);
        self.cols.extend([q, p]);
        self.vals.extend([-c, -c]);
    }

    /// Term `d x_p^2`: a Dirichlet neighbour or a potential.
    pub fn diagonal(&mut self, p: usize, d: f64) {
        self.diagonal[p] += d;
    }

    pub fn mass(&mut self, p: usize, w: f64) {
        self.mass[p] += w;
    }

    pub fn build(mut self) -> Result<GeneralizedProblem> {
        if let Some(p) = self.mass.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid(format!("mass weight {p} is not positive")));
        }
        for (p, d) in self.diagonal.iter().enumerate() {
            self.rows.push(p);
            self.cols.push(p);
            self.vals.push(*d);
        }
        let coo = CooMatrix::try_from_triplets(self.n, self.n, self.rows, self.cols, self.vals)
            .map_err(|e| invalid(format!("stencil assembly failed: {e}")))?;
        Ok(GeneralizedProblem {
            stiffness: CscMatrix::from(&coo),
            mass: self.mass,
        })
    }
}

/// Position of tangential node `i` among `n` in the interleaved order
/// `0, n-1, 1, n-2, ...`, which keeps periodic neighbours within two slots.
pub(crate) fn interleaved(i: usize, n: usize) -> usize {
    if i < n.div_ceil(2) {
        2 * i
    } else {
        2 * (n - 1 - i) + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interleaving_is_a_bandwidth_two_permutation() {
        for n in [5, 8, 33] {
            let mut seen = vec![false; n];
            for i in 0..n {
                let p = interleaved(i, n);
                assert!(!seen[p]);
                seen[p] = true;
                let q = interleaved((i + 1) % n, n);
                assert!(p.abs_diff(q) <= 2, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn ring_laplacian_is_symmetric_with_zero_row_sums() {
        let n = 6;
        let mut b = StencilBuilder::new(n);
        for i in 0..n {
            b.edge(i, (i + 1) % n, 1.0 + i as f64);
            b.mass(i, 1.0);
        }
        let p = b.build().unwrap();
        assert_eq!(p.relative_asymmetry(), 0.0);
        let d = p.dense_stiffness();
        for i in 0..n {
            assert!(d.row(i).sum().abs() < 1e-14);
        }
    }
}
