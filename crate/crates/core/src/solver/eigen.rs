use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::factorization::CscCholesky;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::assembly::GeneralizedProblem;
use crate::error::{invalid, Error, Result};
use crate::random;

/// Problems up to this many unknowns go to the dense solver under
/// [`SolverKind::Auto`]. The full dense eigendecomposition costs seconds
/// already at two thousand unknowns, while shift-invert Lanczos on the
/// banded layer matrices takes milliseconds.
pub const DENSE_LIMIT: usize = 512;

/// Ritz pairs are accepted when `|OP u - theta u| <= LANCZOS_TOL * theta`.
pub const LANCZOS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Auto,
    Dense,
    Iterative,
}

/// Lowest eigenpairs of `K x = lambda M x`, ascending, with `x^T M x = 1`.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
    /// The solver actually used (never `Auto`).
    pub solver: SolverKind,
    /// Operator applications (iterative) or 0 (dense).
    pub iterations: usize,
    /// Shift used by the iterative solver.
    pub shift: Option<f64>,
}

/// The `nev` lowest eigenpairs. `shift_hint` should lie below the lowest
/// eigenvalue and close to it; it is lowered automatically when the shifted
/// matrix turns out indefinite.
pub fn lowest_eigenpairs(
    problem: &GeneralizedProblem,
    nev: usize,
    kind: SolverKind,
    shift_hint: Option<f64>,
) -> Result<Eigenpairs> {
    let n = problem.size();
    if nev == 0 || nev > n {
        return Err(invalid(format!("cannot compute {nev} eigenvalues of a size-{n} problem")));
    }
    let dense = match kind {
        SolverKind::Dense => true,
        SolverKind::Iterative => false,
        SolverKind::Auto => n <= DENSE_LIMIT,
    };
    if dense || n < 4 * (nev + 2) {
        dense_eigenpairs(problem, nev)
    } else {
        shift_invert_eigenpairs(problem, nev, shift_hint.unwrap_or(0.0))
    }
}

fn dense_eigenpairs(problem: &GeneralizedProblem, nev: usize) -> Result<Eigenpairs> {
    let n = problem.size();
    let inv_sqrt: Vec<f64> = problem.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut c = problem.dense_stiffness();
    for j in 0..n {
        for i in 0..n {
            c[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values = Vec::with_capacity(nev);
    let mut vectors = Vec::with_capacity(nev);
    for &k in order.iter().take(nev) {
        values.push(eig.eigenvalues[k]);
        let v = eig.eigenvectors.column(k);
        let mut x = DVector::from_fn(n, |i, _| v[i] * inv_sqrt[i]);
        fix_sign(&mut x);
        vectors.push(x);
    }
    Ok(Eigenpairs {
        values,
        vectors,
        solver: SolverKind::Dense,
        iterations: 0,
        shift: None,
    })
}

/// Makes the largest-magnitude entry positive, for reproducible output.
fn fix_sign(x: &mut DVector<f64>) {
    if x[x.iamax()] < 0.0 {
        x.neg_mut();
    }
}

fn shift_invert_eigenpairs(problem: &GeneralizedProblem, nev: usize, hint: f64) -> Result<Eigenpairs> {
    let n = problem.size();
    let sqrt_m: Vec<f64> = problem.mass.iter().map(|m| m.sqrt()).collect();
    let k = &problem.stiffness;
    let diagonal: Vec<Option<usize>> = {
        let mut pos = vec![None; n];
        let (offsets, rows) = (k.col_offsets(), k.row_indices());
        for j in 0..n {
            for idx in offsets[j]..offsets[j + 1] {
                if rows[idx] == j {
                    pos[j] = Some(idx);
                }
            }
        }
        pos
    };
    if diagonal.iter().any(Option::is_none) {
        return Err(invalid("stiffness matrix lacks a stored diagonal"));
    }
    let shifted = |sigma: f64| {
        let mut values = k.values().to_vec();
        for (j, p) in diagonal.iter().enumerate() {
            values[p.expect("checked")] -= sigma * problem.mass[j];
        }
        values
    };

    let mut sigma = hint;
    let mut drop = hint.abs().max(1.0) * 1e-3;
    let mut chol = None;
    for _ in 0..80 {
        let mut m = k.clone();
        m.values_mut().copy_from_slice(&shifted(sigma));
        match CscCholesky::factor(&m) {
            Ok(c) => {
                chol = Some(c);
                break;
            }
            Err(_) => {
                sigma -= drop;
                drop *= 2.0;
            }
        }
    }
    let chol = chol.ok_or(Error::NoConvergence {
        iterations: 80,
        residual: f64::INFINITY,
    })?;

    let block = nev + 2;
    let max_basis = (8 * block).max(40).min(n);
    let mut lanczos = BlockLanczos::new(n, nev, block, max_basis, LANCZOS_TOL, 0x5eed);
    let mut applications = 0;
    while let Some(x) = lanczos.request() {
        let mut rhs = x.clone();
        for (i, s) in sqrt_m.iter().enumerate() {
            rhs.row_mut(i).scale_mut(*s);
        }
        let mut y = chol.solve(&rhs);
        for (i, s) in sqrt_m.iter().enumerate() {
            y.row_mut(i).scale_mut(*s);
        }
        applications += y.ncols();
        lanczos.supply(y)?;
    }
    let (_, ritz) = lanczos.ritz_pairs();
    let mut pairs: Vec<(f64, DVector<f64>)> = ritz
        .iter()
        .map(|u| {
            let mut x = DVector::from_fn(n, |i, _| u[i] / sqrt_m[i]);
            let kx = k * &x;
            let mass_norm: f64 = x.iter().zip(&problem.mass).map(|(v, m)| v * v * m).sum();
            let lambda = x.dot(&kx) / mass_norm;
            x /= mass_norm.sqrt();
            fix_sign(&mut x);
            (lambda, x)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(Eigenpairs {
        values,
        vectors,
        solver: SolverKind::Iterative,
        iterations: applications,
        shift: Some(sigma),
    })
}

/// Block Lanczos with full reorthogonalisation and explicit restarts, for
/// the largest eigenvalues of a symmetric operator the caller applies.
///
/// Reverse communication: while [`request`](Self::request) returns a block
/// `X`, compute `Y = OP X` and hand it back through
/// [`supply`](Self::supply). When `request` returns `None` the `nev` wanted
/// Ritz pairs have converged.
///
/// ```
/// use geomq::solver::BlockLanczos;
/// use nalgebra::DMatrix;
/// let op = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(50, |i, _| 1.0 / (1.0 + i as f64)));
/// let mut lanczos = BlockLanczos::new(50, 2, 3, 20, 1e-12, 7);
/// while let Some(x) = lanczos.request() {
///     let y = &op * x;
///     lanczos.supply(y).unwrap();
/// }
/// let (theta, _) = lanczos.ritz_pairs();
/// assert!((theta[0] - 1.0).abs() < 1e-12 && (theta[1] - 0.5).abs() < 1e-12);
/// ```
#[derive(Debug, Clone)]
pub struct BlockLanczos {
    n: usize,
    nev: usize,
    block: usize,
    max_basis: usize,
    tol: f64,
    basis: Vec<DVector<f64>>,
    images: Vec<DVector<f64>>,
    projected: DMatrix<f64>,
    pending: Option<DMatrix<f64>>,
    ritz_values: Vec<f64>,
    ritz_vectors: Vec<DVector<f64>>,
    rng: random::SuiteRng,
    rounds: usize,
    max_rounds: usize,
}

impl BlockLanczos {
    pub fn new(n: usize, nev: usize, block: usize, max_basis: usize, tol: f64, seed: u64) -> Self {
        let block = block.max(nev).max(1).min(n);
        let max_basis = max_basis.max(nev + 2 * block).min(n);
        let mut s = Self {
            n,
            nev,
            block,
            max_basis,
            tol,
            basis: Vec::new(),
            images: Vec::new(),
            projected: DMatrix::zeros(0, 0),
            pending: None,
            ritz_values: Vec::new(),
            ritz_vectors: Vec::new(),
            rng: random::stream(seed, 7),
            rounds: 0,
            max_rounds: 2000,
        };
        let start: Vec<DVector<f64>> = (0..block).map(|_| s.random_vector()).collect();
        s.pending = Some(s.orthonormal_block(start));
        s
    }

    fn random_vector(&mut self) -> DVector<f64> {
        let rng = &mut self.rng;
        DVector::from_fn(self.n, |_, _| StandardNormal.sample(rng))
    }

    /// Orthonormalises `cols` against the basis and each other, replacing
    /// columns that collapse with fresh random directions.
    fn orthonormal_block(&mut self, cols: Vec<DVector<f64>>) -> DMatrix<f64> {
        let mut accepted: Vec<DVector<f64>> = Vec::with_capacity(self.block);
        let mut queue = cols.into_iter();
        let mut attempts = 0;
        while accepted.len() < self.block && attempts < 10 * self.block + 10 {
            attempts += 1;
            let mut v = match queue.next() {
                Some(v) => v,
                None => self.random_vector(),
            };
            let start = v.norm();
            if start == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for q in self.basis.iter().chain(accepted.iter()) {
                    let d = q.dot(&v);
                    v.axpy(-d, q, 1.0);
                }
            }
            let norm = v.norm();
            if norm > 1e-8 * start {
                accepted.push(v / norm);
            }
        }
        DMatrix::from_columns(&accepted)
    }

    /// The block awaiting `OP`, or `None` once converged.
    pub fn request(&self) -> Option<&DMatrix<f64>> {
        self.pending.as_ref()
    }

    pub fn is_converged(&self) -> bool {
        self.pending.is_none()
    }

    /// Converged Ritz values (descending) and unit Ritz vectors.
    pub fn ritz_pairs(&self) -> (&[f64], &[DVector<f64>]) {
        (&self.ritz_values, &self.ritz_vectors)
    }

    pub fn supply(&mut self, image: DMatrix<f64>) -> Result<()> {
        let x = self
            .pending
            .take()
            .ok_or_else(|| invalid("no block was requested"))?;
        if image.shape() != x.shape() {
            return Err(invalid("operator image has the wrong shape"));
        }
        let old = self.basis.len();
        let added = x.ncols();
        let d = old + added;
        self.basis.extend(x.column_iter().map(|c| c.into_owned()));
        self.images.extend(image.column_iter().map(|c| c.into_owned()));
        let mut h = DMatrix::zeros(d, d);
        h.view_mut((0, 0), (old, old)).copy_from(&self.projected);
        for j in old..d {
            for i in 0..=j {
                let a = self.basis[i].dot(&self.images[j]);
                let b = self.basis[j].dot(&self.images[i]);
                h[(i, j)] = 0.5 * (a + b);
                h[(j, i)] = h[(i, j)];
            }
        }
        self.projected = h;

        let eig = SymmetricEigen::new(self.projected.clone());
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let combine = |vs: &[DVector<f64>], k: usize| {
            let mut out = DVector::zeros(self.n);
            for (i, v) in vs.iter().enumerate() {
                out.axpy(eig.eigenvectors[(i, k)], v, 1.0);
            }
            out
        };
        let wanted = self.nev.min(d);
        let mut residuals = Vec::with_capacity(self.block);
        let mut worst: f64 = 0.0;
        let mut converged = wanted == self.nev;
        for (rank, &k) in order.iter().take(self.block.min(d)).enumerate() {
            let theta = eig.eigenvalues[k];
            let u = combine(&self.basis, k);
            let r = combine(&self.images, k) - &u * theta;
            let rel = r.norm() / theta.abs().max(f64::MIN_POSITIVE);
            if rank < wanted {
                worst = worst.max(rel);
                converged &= rel <= self.tol;
            }
            residuals.push(r);
        }
        if converged || d >= self.n {
            self.ritz_values = order.iter().take(wanted).map(|&k| eig.eigenvalues[k]).collect();
            self.ritz_vectors = order.iter().take(wanted).map(|&k| combine(&self.basis, k)).collect();
            return Ok(());
        }
        self.rounds += 1;
        if self.rounds > self.max_rounds {
            return Err(Error::NoConvergence {
                iterations: self.rounds,
                residual: worst,
            });
        }
        if d + self.block > self.max_basis {
            let keep = (self.nev + self.block).min(d);
            let basis: Vec<_> = order.iter().take(keep).map(|&k| combine(&self.basis, k)).collect();
            let images: Vec<_> = order.iter().take(keep).map(|&k| combine(&self.images, k)).collect();
            let theta: Vec<f64> = order.iter().take(keep).map(|&k| eig.eigenvalues[k]).collect();
            self.basis = basis;
            self.images = images;
            self.projected = DMatrix::from_diagonal(&DVector::from_vec(theta));
        }
        let next = self.orthonormal_block(residuals);
        if next.ncols() == 0 {
            return Err(Error::NoConvergence {
                iterations: self.rounds,
                residual: worst,
            });
        }
        self.pending = Some(next);
        Ok(())
    }
}
