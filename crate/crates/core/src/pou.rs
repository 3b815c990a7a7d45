//! Partitions of unity (response matrices of possibly unsharp measurements),
//! joins, time evolution and the two refinement schemes.
//!
//! Outcome ordering convention: in a join `F v G` outcome `(k, l)` has index
//! `k * |G| + l`, so refined words are coded big-endian with the earliest
//! measurement as the most significant digit.

use std::borrow::Cow;

use nalgebra::DMatrix;

use crate::dynsys::{Observable, StochasticSystem};
use crate::entcore::{ProbVector, StochasticMatrix, EDGE_TOL, SUM_TOL};
use crate::error::{Error, Result};

/// Default cap on the number of words of a materialized refinement.
pub const DEFAULT_WORD_CAP: usize = 1 << 20;

/// Response matrix `F[x][k] = f_k(x)`: probability of outcome `k` in state `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOfUnity {
    response: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

impl PartitionOfUnity {
    /// Validates entries in `[0, 1]` (with `1e-12` slack, clamped) and unit row sums.
    pub fn new(response: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(response, SUM_TOL)
    }

    fn with_tolerance(mut response: DMatrix<f64>, row_tol: f64) -> Result<Self> {
        if response.nrows() == 0 || response.ncols() == 0 {
            return Err(Error::InvalidPartition("empty response matrix".into()));
        }
        for x in 0..response.nrows() {
            let mut sum = 0.0;
            for k in 0..response.ncols() {
                let v = response[(x, k)];
                if !v.is_finite() || !(-EDGE_TOL..=1.0 + EDGE_TOL).contains(&v) {
                    return Err(Error::InvalidPartition(format!(
                        "response ({x}, {k}) is {v}"
                    )));
                }
                let v = v.clamp(0.0, 1.0);
                response[(x, k)] = v;
                sum += v;
            }
            if (sum - 1.0).abs() > row_tol {
                return Err(Error::InvalidPartition(format!(
                    "row {x} sums to {sum}"
                )));
            }
        }
        Ok(Self {
            response,
            labels: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if let Some((x, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != k) {
            return Err(Error::InvalidPartition(format!(
                "row {x} has {} entries, expected {k}",
                r.len()
            )));
        }
        Self::new(DMatrix::from_fn(n, k, |x, j| rows[x][j]))
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_outcomes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_outcomes(),
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn label(&self, k: usize) -> Cow<'_, str> {
        match &self.labels {
            Some(l) => Cow::Borrowed(&l[k]),
            None => Cow::Owned(k.to_string()),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.n_outcomes()).map(|k| self.label(k).into_owned()).collect()
    }

    pub fn response(&self) -> &DMatrix<f64> {
        &self.response
    }

    pub fn n_states(&self) -> usize {
        self.response.nrows()
    }

    pub fn n_outcomes(&self) -> usize {
        self.response.ncols()
    }

    #[inline]
    pub fn get(&self, x: usize, k: usize) -> f64 {
        self.response[(x, k)]
    }

    /// The outcome function `f_k`.
    pub fn element(&self, k: usize) -> Observable {
        Observable(self.response.column(k).iter().copied().collect())
    }

    pub fn row(&self, x: usize) -> Vec<f64> {
        self.response.row(x).iter().copied().collect()
    }

    /// All entries are 0 or 1.
    pub fn is_sharp(&self) -> bool {
        self.response.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Cells of a sharp partition, outcome by outcome (possibly empty).
    pub fn cells(&self) -> Option<Vec<Vec<usize>>> {
        if !self.is_sharp() {
            return None;
        }
        Some(
            (0..self.n_outcomes())
                .map(|k| (0..self.n_states()).filter(|&x| self.get(x, k) == 1.0).collect())
                .collect(),
        )
    }
}

/// Indicator functions of a set partition of the states `0..n_states`.
pub fn sharp_partition(n_states: usize, cells: &[Vec<usize>]) -> Result<PartitionOfUnity> {
    if cells.is_empty() {
        return Err(Error::InvalidPartition("no cells".into()));
    }
    let mut owner = vec![None; n_states];
    for (k, cell) in cells.iter().enumerate() {
        if cell.is_empty() {
            return Err(Error::InvalidPartition(format!("cell {k} is empty")));
        }
        for &x in cell {
            if x >= n_states {
                return Err(Error::InvalidPartition(format!(
                    "state {x} outside {n_states} states"
                )));
            }
            if let Some(prev) = owner[x] {
                return Err(Error::InvalidPartition(format!(
                    "state {x} in cells {prev} and {k}"
                )));
            }
            owner[x] = Some(k);
        }
    }
    if let Some(x) = owner.iter().position(Option::is_none) {
        return Err(Error::InvalidPartition(format!("state {x} is in no cell")));
    }
    let response = DMatrix::from_fn(n_states, cells.len(), |x, k| {
        if owner[x] == Some(k) {
            1.0
        } else {
            0.0
        }
    });
    PartitionOfUnity::new(response)
}

/// The partition into singletons.
pub fn extremal_partition(n_states: usize) -> PartitionOfUnity {
    PartitionOfUnity::new(DMatrix::identity(n_states, n_states))
        .expect("identity response is a partition of unity")
}

/// `k` outcomes, each with constant response `1/k`.
pub fn uniform_unsharp(n_states: usize, k: usize) -> Result<PartitionOfUnity> {
    if k == 0 {
        return Err(Error::InvalidPartition("uniform partition needs k >= 1".into()));
    }
    if n_states == 0 {
        return Err(Error::InvalidPartition("no states".into()));
    }
    PartitionOfUnity::new(DMatrix::from_element(n_states, k, 1.0 / k as f64))
}

/// `F v G = {f_k g_l}`, outcome `(k, l)` at index `k * |G| + l`.
pub fn join(f: &PartitionOfUnity, g: &PartitionOfUnity) -> Result<PartitionOfUnity> {
    if f.n_states() != g.n_states() {
        return Err(Error::DimensionMismatch {
            expected: f.n_states(),
            got: g.n_states(),
        });
    }
    let (kf, kg) = (f.n_outcomes(), g.n_outcomes());
    let response = DMatrix::from_fn(f.n_states(), kf * kg, |x, c| {
        f.get(x, c / kg) * g.get(x, c % kg)
    });
    let joined = PartitionOfUnity::new(response)?;
    match (&f.labels, &g.labels) {
        (None, None) => Ok(joined),
        _ => {
            let labels = (0..kf * kg)
                .map(|c| format!("{}.{}", f.label(c / kg), g.label(c % kg)))
                .collect();
            joined.with_labels(labels)
        }
    }
}

/// `Theta(F) = {Theta(f_k)}`.
pub fn evolve(sys: &StochasticSystem, f: &PartitionOfUnity) -> Result<PartitionOfUnity> {
    check_states(sys, f)?;
    let response = sys.transition().matrix() * f.response();
    let mut evolved = PartitionOfUnity::new(response)?;
    evolved.labels.clone_from(&f.labels);
    Ok(evolved)
}

fn check_states(sys: &StochasticSystem, f: &PartitionOfUnity) -> Result<()> {
    if sys.n_states() != f.n_states() {
        return Err(Error::DimensionMismatch {
            expected: sys.n_states(),
            got: f.n_states(),
        });
    }
    Ok(())
}

/// A measurement record `(k_0, ..., k_{N-1})`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(symbols: Vec<usize>, base: usize) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidArgument("empty word".into()));
        }
        if let Some(&s) = symbols.iter().find(|&&s| s >= base) {
            return Err(Error::InvalidArgument(format!(
                "symbol {s} outside alphabet of size {base}"
            )));
        }
        Ok(Self(symbols))
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `sum_n k_n K^(N-1-n)`.
    pub fn code(&self, base: usize) -> usize {
        self.0.iter().fold(0, |acc, &k| acc * base + k)
    }

    pub fn decode(code: usize, base: usize, depth: usize) -> Result<Self> {
        let count = word_count(base, depth)?;
        if code >= count {
            return Err(Error::InvalidArgument(format!(
                "code {code} outside {count} words"
            )));
        }
        let mut symbols = vec![0; depth];
        let mut rest = code;
        for s in symbols.iter_mut().rev() {
            *s = rest % base;
            rest /= base;
        }
        Ok(Self(symbols))
    }
}

/// `base^depth`, or an error if it overflows.
pub fn word_count(base: usize, depth: usize) -> Result<usize> {
    u32::try_from(depth)
        .ok()
        .and_then(|d| base.checked_pow(d))
        .ok_or(Error::CapExceeded {
            what: "word count",
            requested: u128::MAX,
            cap: usize::MAX as u128,
        })
}

fn check_word_cap(base: usize, depth: usize, cap: usize) -> Result<usize> {
    if depth == 0 {
        return Err(Error::InvalidArgument("refinement depth must be >= 1".into()));
    }
    let requested = (base as u128).checked_pow(depth as u32).unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(Error::CapExceeded {
            what: "refinement words",
            requested,
            cap: cap as u128,
        });
    }
    Ok(requested as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// `F v Theta(F v ... v Theta(F))`.
    Afl,
    /// `F v Theta(F) v ... v Theta^{N-1}(F)`.
    Mak,
}

/// A depth-`N` refinement of a base partition with `K` outcomes; its `K^N`
/// elements are indexed by word code.
#[derive(Debug, Clone)]
pub struct RefinedPartition {
    partition: PartitionOfUnity,
    base: usize,
    depth: usize,
    scheme: Scheme,
}

impl RefinedPartition {
    pub fn partition(&self) -> &PartitionOfUnity {
        &self.partition
    }

    pub fn into_partition(self) -> PartitionOfUnity {
        self.partition
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn n_words(&self) -> usize {
        self.partition.n_outcomes()
    }

    pub fn element(&self, word: &Word) -> Result<Observable> {
        if word.len() != self.depth {
            return Err(Error::DimensionMismatch {
                expected: self.depth,
                got: word.len(),
            });
        }
        Ok(self.partition.element(word.code(self.base)))
    }

    /// Sums elements over the last symbol, giving a depth `N-1` response matrix.
    pub fn marginalize_last(&self) -> Option<DMatrix<f64>> {
        if self.depth < 2 {
            return None;
        }
        let r = self.partition.response();
        let shorter = self.n_words() / self.base;
        Some(DMatrix::from_fn(r.nrows(), shorter, |x, w| {
            (0..self.base).map(|k| r[(x, w * self.base + k)]).sum()
        }))
    }
}

/// AFL-scheme refinement: element `(k_0..k_{N-1})` is
/// `f_{k_0} Theta(f_{k_1} Theta(... f_{k_{N-1}}))`, i.e. the probability of
/// recording that word when starting in `x`.
///
/// Built level by level: each depth-`m` element is propagated through `Theta`
/// once and then multiplied by every `f_k`, so suffixes are shared.
pub fn refine_afl(
    sys: &StochasticSystem,
    f: &PartitionOfUnity,
    depth: usize,
    word_cap: usize,
) -> Result<RefinedPartition> {
    check_states(sys, f)?;
    let k = f.n_outcomes();
    check_word_cap(k, depth, word_cap)?;
    let n = f.n_states();

    // column-major: element w occupies data[w*n .. (w+1)*n]
    let mut level: Vec<f64> = f.response().as_slice().to_vec();
    let mut words = k;
    let mut image = vec![0.0; n];
    for _ in 1..depth {
        let mut next = vec![0.0; n * words * k];
        for w in 0..words {
            sys.theta_into(&level[w * n..(w + 1) * n], &mut image);
            for sym in 0..k {
                let col = sym * words + w;
                let out = &mut next[col * n..(col + 1) * n];
                for x in 0..n {
                    out[x] = f.get(x, sym) * image[x];
                }
            }
        }
        level = next;
        words *= k;
    }
    let partition =
        PartitionOfUnity::with_tolerance(DMatrix::from_vec(n, words, level), SUM_TOL * depth as f64)?;
    Ok(RefinedPartition {
        partition,
        base: k,
        depth,
        scheme: Scheme::Afl,
    })
}

/// Makarov-scheme refinement: element `(k_0..k_{N-1})` is
/// `prod_m Theta^m(f_{k_m})`.
pub fn refine_mak(
    sys: &StochasticSystem,
    f: &PartitionOfUnity,
    depth: usize,
    word_cap: usize,
) -> Result<RefinedPartition> {
    check_states(sys, f)?;
    let k = f.n_outcomes();
    check_word_cap(k, depth, word_cap)?;
    let mut evolved = f.clone();
    let mut refined = f.clone();
    for _ in 1..depth {
        evolved = evolve(sys, &evolved)?;
        refined = join(&refined, &evolved)?;
    }
    refined.labels = None;
    Ok(RefinedPartition {
        partition: refined,
        base: k,
        depth,
        scheme: Scheme::Mak,
    })
}

/// `mu o F = {mu(f_k)}`.
pub fn distribution(mu: &ProbVector, f: &PartitionOfUnity) -> Result<ProbVector> {
    if mu.len() != f.n_states() {
        return Err(Error::DimensionMismatch {
            expected: f.n_states(),
            got: mu.len(),
        });
    }
    let r = f.response();
    let weights = (0..f.n_outcomes())
        .map(|k| (0..f.n_states()).map(|x| mu.get(x) * r[(x, k)]).sum::<f64>())
        .collect();
    ProbVector::new(weights)
}

/// `delta_x o F`, row `x` of the response matrix.
pub fn point_distribution(x: usize, f: &PartitionOfUnity) -> Result<ProbVector> {
    if x >= f.n_states() {
        return Err(Error::InvalidArgument(format!(
            "state {x} outside {} states",
            f.n_states()
        )));
    }
    ProbVector::new(f.row(x))
}

/// `mu` of the AFL-refined element for `word`, by the backward recursion
/// `g <- f_{k_m} Theta(g)`; never materializes other words.
pub fn word_probability(sys: &StochasticSystem, f: &PartitionOfUnity, word: &Word) -> Result<f64> {
    check_states(sys, f)?;
    if let Some(&s) = word.symbols().iter().find(|&&s| s >= f.n_outcomes()) {
        return Err(Error::InvalidArgument(format!(
            "symbol {s} outside {} outcomes",
            f.n_outcomes()
        )));
    }
    let n = f.n_states();
    let symbols = word.symbols();
    let last = symbols[symbols.len() - 1];
    let mut g: Vec<f64> = (0..n).map(|x| f.get(x, last)).collect();
    let mut image = vec![0.0; n];
    for &sym in symbols[..symbols.len() - 1].iter().rev() {
        sys.theta_into(&g, &mut image);
        for x in 0..n {
            g[x] = f.get(x, sym) * image[x];
        }
    }
    Ok(sys.expect(&g))
}

/// A partition of unity written as `f_k = sum_i M_ik chi_{C_i}`.
#[derive(Debug, Clone)]
pub struct SimpleDecomposition {
    pub cells: Vec<Vec<usize>>,
    pub matrix: StochasticMatrix,
}

/// Groups states with identical response rows.
pub fn simple_decomposition(f: &PartitionOfUnity) -> SimpleDecomposition {
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for x in 0..f.n_states() {
        let row = f.row(x);
        match rows.iter().position(|r| *r == row) {
            Some(i) => cells[i].push(x),
            None => {
                cells.push(vec![x]);
                rows.push(row);
            }
        }
    }
    let matrix = StochasticMatrix::from_rows(&rows).expect("partition rows are stochastic");
    SimpleDecomposition { cells, matrix }
}
