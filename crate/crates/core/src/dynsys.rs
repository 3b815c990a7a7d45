//! Finite stochastic dynamical systems `(X, mu, Theta)` with
//! `Theta(f)(x) = sum_y P_xy f(y)`.

use nalgebra::DMatrix;

use crate::entcore::{ProbVector, StochasticMatrix, SUM_TOL};
use crate::error::{Error, Result};

/// Power iteration step cap for [`stationary_measure`].
pub const MAX_POWER_ITERATIONS: usize = 1_000_000;
/// Required `|mu P - mu|_inf` for a computed stationary measure.
pub const STATIONARY_TOL: f64 = 1e-10;

/// A real function on the state set.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable(pub Vec<f64>);

impl Observable {
    pub fn constant(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct StochasticSystem {
    states: Vec<String>,
    transition: StochasticMatrix,
    stationary: ProbVector,
}

/// Labels `"0"`, `"1"`, ... for `n` states.
pub fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn invariance_violation(p: &StochasticMatrix, mu: &ProbVector) -> f64 {
    let m = p.matrix();
    let n = m.nrows();
    (0..n)
        .map(|y| {
            let image: f64 = (0..n).map(|x| mu.get(x) * m[(x, y)]).sum();
            (image - mu.get(y)).abs()
        })
        .fold(0.0, f64::max)
}

impl StochasticSystem {
    fn build(states: Vec<String>, transition: StochasticMatrix, stationary: ProbVector) -> Result<Self> {
        let n = transition.nrows();
        if !transition.is_square() {
            return Err(Error::InvalidStochasticMatrix(format!(
                "transition matrix is {}x{}",
                n,
                transition.ncols()
            )));
        }
        if states.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: states.len(),
            });
        }
        if stationary.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: stationary.len(),
            });
        }
        let violation = invariance_violation(&transition, &stationary);
        if violation > SUM_TOL {
            return Err(Error::NotInvariant { violation });
        }
        if let Some(state) = stationary.as_slice().iter().position(|&m| m <= 0.0) {
            return Err(Error::ZeroMassState { state });
        }
        Ok(Self {
            states,
            transition,
            stationary,
        })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn transition(&self) -> &StochasticMatrix {
        &self.transition
    }

    pub fn stationary(&self) -> &ProbVector {
        &self.stationary
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    /// True when every transition row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        let m = self.transition.matrix();
        (0..m.nrows()).all(|x| (0..m.ncols()).all(|y| m[(x, y)] == 0.0 || m[(x, y)] == 1.0))
    }

    /// `mu(f)`.
    pub fn expect(&self, f: &[f64]) -> f64 {
        self.stationary
            .as_slice()
            .iter()
            .zip(f)
            .map(|(m, v)| m * v)
            .sum()
    }

    /// `Theta(f) = P f`, the observable version of one time step.
    pub fn theta_apply(&self, f: &Observable) -> Result<Observable> {
        if f.len() != self.n_states() {
            return Err(Error::DimensionMismatch {
                expected: self.n_states(),
                got: f.len(),
            });
        }
        let mut out = vec![0.0; f.len()];
        self.theta_into(f.values(), &mut out);
        Ok(Observable(out))
    }

    /// Unchecked `out = P f`; both slices have length `n_states`.
    pub(crate) fn theta_into(&self, f: &[f64], out: &mut [f64]) {
        let m = self.transition.matrix();
        let n = m.nrows();
        for (x, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..n).map(|y| m[(x, y)] * f[y]).sum();
        }
    }
}

/// Markov chain with transition matrix `p`; the stationary measure is computed
/// when not given.
pub fn make_markov(
    states: Vec<String>,
    p: StochasticMatrix,
    mu: Option<ProbVector>,
) -> Result<StochasticSystem> {
    if !p.is_square() {
        return Err(Error::InvalidStochasticMatrix(format!(
            "transition matrix is {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    let mu = match mu {
        Some(mu) => mu,
        None => stationary_measure(&p)?,
    };
    StochasticSystem::build(states, p, mu)
}

/// Bernoulli process: every row equals `p`, and so does the stationary measure.
pub fn make_bernoulli(p: &ProbVector) -> Result<StochasticSystem> {
    let n = p.len();
    let m = DMatrix::from_fn(n, n, |_, y| p.get(y));
    let transition = StochasticMatrix::new(m)?;
    StochasticSystem::build(default_labels(n), transition, p.clone())
}

/// Deterministic dynamics `Theta(f) = f o T` with `T(x) = map[x]`.
pub fn make_deterministic(
    states: Vec<String>,
    map: &[usize],
    mu: ProbVector,
) -> Result<StochasticSystem> {
    let n = map.len();
    if let Some(&bad) = map.iter().find(|&&y| y >= n) {
        return Err(Error::InvalidArgument(format!(
            "map target {bad} outside {n} states"
        )));
    }
    let m = DMatrix::from_fn(n, n, |x, y| if map[x] == y { 1.0 } else { 0.0 });
    StochasticSystem::build(states, StochasticMatrix::new(m)?, mu)
}

/// Strongly connected components of the support graph of `m`, in a stable order.
fn communicating_classes(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    // Transitive closure; state spaces here are small.
    let mut reach = vec![vec![false; n]; n];
    for (x, row) in reach.iter_mut().enumerate() {
        row[x] = true;
        for (y, r) in row.iter_mut().enumerate() {
            if m[(x, y)] > 0.0 {
                *r = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                let via = reach[k].clone();
                for (r, v) in reach[i].iter_mut().zip(via) {
                    *r |= v;
                }
            }
        }
    }
    let mut assigned = vec![false; n];
    let mut classes = Vec::new();
    for x in 0..n {
        if assigned[x] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&y| reach[x][y] && reach[y][x]).collect();
        for &y in &class {
            assigned[y] = true;
        }
        classes.push(class);
    }
    classes
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of an irreducible class, from BFS levels.
fn class_period(m: &DMatrix<f64>, class: &[usize]) -> usize {
    let n = m.nrows();
    let mut in_class = vec![false; n];
    for &x in class {
        in_class[x] = true;
    }
    let mut level = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    level[class[0]] = 0;
    queue.push_back(class[0]);
    let mut period = 0;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if !in_class[v] || m[(u, v)] <= 0.0 {
                continue;
            }
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                period = gcd(period, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    period.max(1)
}

/// The unique stationary measure of an irreducible aperiodic chain, computed by
/// power iteration from the uniform distribution.
///
/// Chains with several closed classes, transient states or a periodic closed
/// class are rejected: the caller must then supply the measure explicitly.
pub fn stationary_measure(p: &StochasticMatrix) -> Result<ProbVector> {
    if !p.is_square() {
        return Err(Error::InvalidStochasticMatrix(format!(
            "transition matrix is {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    let m = p.matrix();
    let n = m.nrows();

    let classes = communicating_classes(m);
    let closed: Vec<&Vec<usize>> = classes
        .iter()
        .filter(|c| {
            c.iter()
                .all(|&x| (0..n).all(|y| m[(x, y)] <= 0.0 || c.contains(&y)))
        })
        .collect();
    if closed.len() > 1 {
        return Err(Error::Stationary(format!(
            "reducible chain with {} closed classes",
            closed.len()
        )));
    }
    if let Some(state) = (0..n).find(|x| !closed[0].contains(x)) {
        return Err(Error::Stationary(format!(
            "reducible chain: state {state} is transient and gets zero stationary mass"
        )));
    }
    let period = class_period(m, closed[0]);
    if period > 1 {
        return Err(Error::Stationary(format!(
            "periodic chain (period {period}); power iteration does not converge"
        )));
    }

    let mut mu = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_POWER_ITERATIONS {
        for (y, out) in next.iter_mut().enumerate() {
            *out = (0..n).map(|x| mu[x] * m[(x, y)]).sum();
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        residual = mu
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut mu, &mut next);
        if residual <= 1e-15 {
            break;
        }
    }
    if residual > STATIONARY_TOL {
        return Err(Error::Stationary(format!(
            "power iteration did not converge within {MAX_POWER_ITERATIONS} steps (residual {residual:e})"
        )));
    }
    if let Some(state) = mu.iter().position(|&v| v <= 0.0) {
        return Err(Error::Stationary(format!(
            "stationary mass of state {state} is zero"
        )));
    }
    ProbVector::new(mu)
}
