//! Entropy primitives: the entropy function, probability vectors, density
//! matrices, relative entropy and the symmetric eigensolver they all rest on.
//!
//! Every entropy is in nats.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Slack allowed at the edges of `[0, 1]` before a value is rejected.
pub const EDGE_TOL: f64 = 1e-12;
/// Allowed deviation of a probability vector's total mass from one.
pub const SUM_TOL: f64 = 1e-9;
/// Slack on the trace of a density matrix.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues in `[-EIGEN_CLAMP, 0)` are treated as zero.
pub const EIGEN_CLAMP: f64 = 1e-10;
/// Entrywise symmetry tolerance.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative eigenpair residual bound, `|m v - l v| <= RESIDUAL_TOL * |m|`.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// `-x log x`, with `eta(0) = 0`.
pub fn eta(x: f64) -> Result<f64> {
    if !(-EDGE_TOL..=1.0 + EDGE_TOL).contains(&x) || x.is_nan() {
        return Err(Error::Domain { value: x });
    }
    Ok(eta_clamped(x))
}

#[inline]
pub(crate) fn eta_clamped(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 {
        return 0.0;
    }
    // written as a subtraction so that eta(1) is +0 rather than -0
    0.0 - x * x.ln()
}

/// Shannon entropy of raw weights that are already known to be valid.
pub(crate) fn entropy_of(weights: &[f64]) -> f64 {
    weights.iter().map(|&w| eta_clamped(w)).sum()
}

/// A probability vector over a finite outcome set.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates the weights. Entries in `[-1e-12, 0)` are clamped to zero.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidProbVector("empty".into()));
        }
        let mut weights = weights;
        for (i, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() || *w < -EDGE_TOL {
                return Err(Error::InvalidProbVector(format!(
                    "weight {i} is {w}"
                )));
            }
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidProbVector(format!(
                "weights sum to {total}"
            )));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidProbVector("empty".into()));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::InvalidProbVector(format!(
                "point mass at {at} outside {n} outcomes"
            )));
        }
        let mut w = vec![0.0; n];
        w[at] = 1.0;
        Ok(Self(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Shannon entropy `S(p) = sum_i eta(p_i)`.
pub fn shannon_entropy(p: &ProbVector) -> f64 {
    entropy_of(p.as_slice())
}

/// Relative entropy value; support violations are `Infinite`, which orders
/// above every finite value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn is_finite(self) -> bool {
        matches!(self, Divergence::Finite(_))
    }

    /// The finite value, or `f64::INFINITY`.
    pub fn value(self) -> f64 {
        match self {
            Divergence::Finite(v) => v,
            Divergence::Infinite => f64::INFINITY,
        }
    }
}

/// `S(p | q) = sum_i p_i log(p_i / q_i)`.
pub fn relative_entropy(p: &ProbVector, q: &ProbVector) -> Result<Divergence> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.as_slice().iter().zip(q.as_slice()) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(Divergence::Infinite);
        }
        total += pi * (pi / qi).ln();
    }
    // Rounding can leave a tiny negative sum when p == q.
    Ok(Divergence::Finite(total.max(0.0)))
}

/// A real column-stochastic map given by a row-stochastic matrix `M_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix(DMatrix<f64>);

impl StochasticMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidStochasticMatrix("empty matrix".into()));
        }
        for i in 0..m.nrows() {
            let mut sum = 0.0;
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidStochasticMatrix(format!(
                        "entry ({i}, {j}) is {v}"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidStochasticMatrix(format!(
                    "row {i} sums to {sum}"
                )));
            }
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
            return Err(Error::InvalidStochasticMatrix(format!(
                "row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
        Self::new(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn is_square(&self) -> bool {
        self.0.is_square()
    }
}

/// Image of `p` under the dual map: `(M* p)_j = sum_i p_i M_ij`.
pub fn pushforward(m: &StochasticMatrix, p: &ProbVector) -> Result<ProbVector> {
    if m.nrows() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: p.len(),
        });
    }
    let mat = m.matrix();
    let out = (0..mat.ncols())
        .map(|j| {
            p.as_slice()
                .iter()
                .enumerate()
                .map(|(i, &pi)| pi * mat[(i, j)])
                .sum()
        })
        .collect();
    ProbVector::new(out)
}

/// Eigenpairs of a real symmetric matrix, eigenvalues in descending order and
/// eigenvectors as the matching columns of `vectors`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == 0.0))
}

/// Full eigendecomposition, with the residual of every pair checked.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<Spectrum> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let n = m.nrows();
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite entry".into()));
    }

    if is_diagonal(m) {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| m[(b, b)].total_cmp(&m[(a, a)]));
        let values = order.iter().map(|&i| m[(i, i)]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| if r == order[c] { 1.0 } else { 0.0 });
        return Ok(Spectrum { values, vectors });
    }

    let max_iter = 1000 + 100 * n;
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, max_iter)
        .ok_or_else(|| Error::Eigen(format!("no convergence within {max_iter} iterations")))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);

    let scale = m.norm();
    let mv = m * &vectors;
    for (c, &lambda) in values.iter().enumerate() {
        let residual: f64 = (0..n)
            .map(|r| (mv[(r, c)] - lambda * vectors[(r, c)]).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual > RESIDUAL_TOL * scale {
            return Err(Error::Eigen(format!(
                "residual {residual:e} for eigenvalue {lambda} exceeds bound"
            )));
        }
    }
    Ok(Spectrum { values, vectors })
}

/// Eigenvalues of a real symmetric matrix, descending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    symmetric_eigen(m).map(|s| s.values)
}

/// A real symmetric positive semidefinite unit-trace matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    entries: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || !entries.is_square() {
            return Err(Error::InvalidDensityMatrix(format!(
                "shape {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let asym = max_asymmetry(&entries);
        if asym > SYMMETRY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "asymmetry {asym:e}"
            )));
        }
        let trace = entries.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {trace}")));
        }
        let eigenvalues = symmetric_eigenvalues(&entries)?;
        let min = eigenvalues.last().copied().unwrap_or(0.0);
        if min < -EIGEN_CLAMP {
            return Err(Error::InvalidDensityMatrix(format!(
                "minimum eigenvalue {min:e}"
            )));
        }
        Ok(Self {
            entries,
            eigenvalues,
        })
    }

    /// Diagonal density matrix with the given probabilities.
    pub fn diagonal(p: &ProbVector) -> Self {
        let n = p.len();
        let entries = DMatrix::from_diagonal(&DVector::from_column_slice(p.as_slice()));
        let mut eigenvalues = p.as_slice().to_vec();
        eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        debug_assert_eq!(eigenvalues.len(), n);
        Self {
            entries,
            eigenvalues,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Spectrum, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn is_diagonal(&self) -> bool {
        is_diagonal(&self.entries)
    }
}

/// `S_q(rho) = Tr eta(rho)`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues
        .iter()
        .map(|&l| if l < 0.0 { 0.0 } else { eta_clamped(l) })
        .sum()
}

/// The diagonal of `rho` in the standard basis.
pub fn diag_restrict(rho: &DensityMatrix) -> ProbVector {
    let d = rho.entries.diagonal();
    let weights = d.iter().map(|&v| v.max(0.0)).collect();
    ProbVector::new(weights).expect("diagonal of a density matrix is a probability vector")
}
