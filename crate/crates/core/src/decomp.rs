//! Convex decompositions `mu = sum_a lambda_a mu_a` of the invariant measure,
//! single- and multi-index, and enumeration of the extremal ones.

use nalgebra::DMatrix;

use crate::entcore::{entropy_of, ProbVector, SUM_TOL};
use crate::error::{Error, Result};
use crate::pou::PartitionOfUnity;

/// Components lighter than this are dropped.
pub const PRUNE_WEIGHT: f64 = 1e-15;
/// Default cap on the number of maps enumerated by [`extremal_decompositions`].
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

fn check_recombination(mu: &ProbVector, weights: &[f64], components: &[ProbVector]) -> Result<()> {
    for x in 0..mu.len() {
        let mixed: f64 = weights
            .iter()
            .zip(components)
            .map(|(w, c)| w * c.get(x))
            .sum();
        let err = (mixed - mu.get(x)).abs();
        if err > SUM_TOL {
            return Err(Error::InvalidDecomposition(format!(
                "components recombine to {mixed} at state {x}, expected {} (error {err:e})",
                mu.get(x)
            )));
        }
    }
    Ok(())
}

fn check_components(n: usize, components: &[ProbVector]) -> Result<()> {
    if let Some(c) = components.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c.len(),
        });
    }
    Ok(())
}

/// `mu_a(x) = mu_x g(x) / lambda` with `lambda = sum_x mu_x g(x)`.
fn weighted_component(mu: &ProbVector, density: impl Fn(usize) -> f64) -> Option<(f64, ProbVector)> {
    let raw: Vec<f64> = (0..mu.len()).map(|x| mu.get(x) * density(x)).collect();
    let lambda: f64 = raw.iter().sum();
    if lambda < PRUNE_WEIGHT {
        return None;
    }
    let component = raw.iter().map(|v| v / lambda).collect();
    Some((
        lambda,
        ProbVector::new(component).expect("normalized nonnegative weights"),
    ))
}

/// A single-index decomposition. `index[i]` is the original label of
/// component `i`; pruned labels simply do not appear.
#[derive(Debug, Clone)]
pub struct Decomposition {
    weights: ProbVector,
    components: Vec<ProbVector>,
    index: Vec<usize>,
}

impl Decomposition {
    pub fn new(mu: &ProbVector, weights: Vec<f64>, components: Vec<ProbVector>) -> Result<Self> {
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                got: components.len(),
            });
        }
        check_components(mu.len(), &components)?;
        ProbVector::new(weights.clone())?;
        let mut kept_w = Vec::new();
        let mut kept_c = Vec::new();
        let mut index = Vec::new();
        for (a, (w, c)) in weights.into_iter().zip(components).enumerate() {
            if w >= PRUNE_WEIGHT {
                kept_w.push(w);
                kept_c.push(c);
                index.push(a);
            }
        }
        check_recombination(mu, &kept_w, &kept_c)?;
        let total: f64 = kept_w.iter().sum();
        let weights = ProbVector::new(kept_w.iter().map(|w| w / total).collect())?;
        Ok(Self {
            weights,
            components: kept_c,
            index,
        })
    }

    /// `lambda = (1)`, `mu_1 = mu`.
    pub fn trivial(mu: &ProbVector) -> Self {
        Self {
            weights: ProbVector::point_mass(1, 0).expect("one outcome"),
            components: vec![mu.clone()],
            index: vec![0],
        }
    }

    pub fn weights(&self) -> &ProbVector {
        &self.weights
    }

    pub fn components(&self) -> &[ProbVector] {
        &self.components
    }

    pub fn index(&self) -> &[usize] {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// `sum_a lambda_a mu_a`.
    pub fn recombine(&self) -> Vec<f64> {
        let n = self.components[0].len();
        (0..n)
            .map(|x| {
                self.weights
                    .as_slice()
                    .iter()
                    .zip(&self.components)
                    .map(|(w, c)| w * c.get(x))
                    .sum()
            })
            .collect()
    }

    /// Radon-Nikodym densities `g_a = lambda_a d mu_a / d mu`, one outcome per
    /// kept component.
    pub fn densities(&self, mu: &ProbVector) -> Result<PartitionOfUnity> {
        let n = mu.len();
        if let Some(x) = (0..n).find(|&x| mu.get(x) <= 0.0) {
            return Err(Error::ZeroMassState { state: x });
        }
        let w = self.weights.as_slice();
        let response = DMatrix::from_fn(n, self.len(), |x, a| w[a] * self.components[a].get(x) / mu.get(x));
        PartitionOfUnity::new(response)
    }
}

/// `lambda_a = mu(g_a)`, `mu_a = mu g_a / mu(g_a)`; negligible outcomes dropped.
pub fn from_densities(mu: &ProbVector, g: &PartitionOfUnity) -> Result<Decomposition> {
    if g.n_states() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: g.n_states(),
        });
    }
    let mut weights = Vec::new();
    let mut components = Vec::new();
    let mut index = Vec::new();
    for a in 0..g.n_outcomes() {
        if let Some((lambda, c)) = weighted_component(mu, |x| g.get(x, a)) {
            weights.push(lambda);
            components.push(c);
            index.push(a);
        }
    }
    let total: f64 = weights.iter().sum();
    let weights = ProbVector::new(weights.iter().map(|w| w / total).collect())?;
    check_recombination(mu, weights.as_slice(), &components)?;
    Ok(Decomposition {
        weights,
        components,
        index,
    })
}

#[derive(Debug, Clone)]
pub struct MultiEntry {
    pub index: Vec<usize>,
    pub weight: f64,
    pub component: ProbVector,
}

/// An `N`-index decomposition `mu = sum lambda_{a_1..a_N} mu_{a_1..a_N}`,
/// stored sparsely (zero-weight multi-indices omitted).
#[derive(Debug, Clone)]
pub struct MultiDecomposition {
    shape: Vec<usize>,
    entries: Vec<MultiEntry>,
}

impl MultiDecomposition {
    pub fn new(mu: &ProbVector, shape: Vec<usize>, entries: Vec<MultiEntry>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidDecomposition(format!("index shape {shape:?}")));
        }
        for e in &entries {
            if e.index.len() != shape.len() || e.index.iter().zip(&shape).any(|(i, s)| i >= s) {
                return Err(Error::InvalidDecomposition(format!(
                    "multi-index {:?} outside shape {shape:?}",
                    e.index
                )));
            }
            if !e.weight.is_finite() || e.weight < 0.0 {
                return Err(Error::InvalidDecomposition(format!("weight {}", e.weight)));
            }
        }
        let entries: Vec<MultiEntry> = entries.into_iter().filter(|e| e.weight >= PRUNE_WEIGHT).collect();
        let comps: Vec<ProbVector> = entries.iter().map(|e| e.component.clone()).collect();
        check_components(mu.len(), &comps)?;
        let weights: Vec<f64> = entries.iter().map(|e| e.weight).collect();
        ProbVector::new(weights.clone())?;
        check_recombination(mu, &weights, &comps)?;
        Ok(Self { shape, entries })
    }

    /// All indices trivial: one entry `(0, ..., 0)` with component `mu`.
    pub fn trivial(mu: &ProbVector, arity: usize) -> Result<Self> {
        Self::new(
            mu,
            vec![1; arity],
            vec![MultiEntry {
                index: vec![0; arity],
                weight: 1.0,
                component: mu.clone(),
            }],
        )
    }

    /// The identification decomposition of a tuple of maps `f_n: states -> A_n`:
    /// state `x` goes to multi-index `(f_1(x), ..., f_N(x))`.
    pub fn from_maps(mu: &ProbVector, maps: &[Vec<usize>]) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidDecomposition("no maps".into()));
        }
        let n = mu.len();
        if let Some(m) = maps.iter().find(|m| m.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.len(),
            });
        }
        let shape: Vec<usize> = maps
            .iter()
            .map(|m| m.iter().copied().max().map_or(1, |v| v + 1))
            .collect();
        let mut groups: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for x in 0..n {
            let idx: Vec<usize> = maps.iter().map(|m| m[x]).collect();
            match groups.iter_mut().find(|(i, _)| *i == idx) {
                Some((_, members)) => members.push(x),
                None => groups.push((idx, vec![x])),
            }
        }
        let entries = groups
            .into_iter()
            .filter_map(|(index, members)| {
                weighted_component(mu, |x| if members.contains(&x) { 1.0 } else { 0.0 }).map(|(weight, component)| {
                    MultiEntry {
                        index,
                        weight,
                        component,
                    }
                })
            })
            .collect();
        Self::new(mu, shape, entries)
    }

    /// Density-based decomposition: `g` has one outcome per multi-index of
    /// `shape`, coded big-endian (first index most significant).
    pub fn from_densities(mu: &ProbVector, shape: Vec<usize>, g: &PartitionOfUnity) -> Result<Self> {
        let total: usize = shape.iter().product();
        if g.n_outcomes() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: g.n_outcomes(),
            });
        }
        let single = from_densities(mu, g)?;
        let entries = single
            .index
            .iter()
            .zip(single.weights.as_slice())
            .zip(&single.components)
            .map(|((&code, &weight), component)| {
                let mut index = vec![0; shape.len()];
                let mut rest = code;
                for (slot, &s) in index.iter_mut().zip(&shape).rev() {
                    *slot = rest % s;
                    rest /= s;
                }
                MultiEntry {
                    index,
                    weight,
                    component: component.clone(),
                }
            })
            .collect();
        Self::new(mu, shape, entries)
    }

    pub fn arity(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn entries(&self) -> &[MultiEntry] {
        &self.entries
    }

    /// `S(lambda)` over the product index.
    pub fn weight_entropy(&self) -> f64 {
        let w: Vec<f64> = self.entries.iter().map(|e| e.weight).collect();
        entropy_of(&w)
    }

    /// `sum_n S(lambda^(n)) - S(lambda)`, nonnegative by subadditivity.
    pub fn entropy_defect(&self) -> f64 {
        let marginals: f64 = (0..self.arity())
            .map(|n| entropy_of(&self.marginal_weights(n)))
            .sum();
        marginals - self.weight_entropy()
    }

    /// `lambda^(n)_b = sum_{a: a_n = b} lambda_a`, over all of `A_n`.
    pub fn marginal_weights(&self, position: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.shape[position]];
        for e in &self.entries {
            w[e.index[position]] += e.weight;
        }
        w
    }
}

/// Marginal decomposition over all but index `position` (zero-based).
pub fn multi_marginal(d: &MultiDecomposition, position: usize) -> Result<Decomposition> {
    if position >= d.arity() {
        return Err(Error::InvalidArgument(format!(
            "index position {position} outside arity {}",
            d.arity()
        )));
    }
    let size = d.shape[position];
    let n = d.entries[0].component.len();
    let mut weights = vec![0.0; size];
    let mut mass = vec![vec![0.0; n]; size];
    for e in &d.entries {
        let b = e.index[position];
        weights[b] += e.weight;
        for (x, m) in mass[b].iter_mut().enumerate() {
            *m += e.weight * e.component.get(x);
        }
    }
    let mut kept_w = Vec::new();
    let mut comps = Vec::new();
    let mut index = Vec::new();
    for b in 0..size {
        if weights[b] >= PRUNE_WEIGHT {
            let c = mass[b].iter().map(|m| m / weights[b]).collect();
            kept_w.push(weights[b]);
            comps.push(ProbVector::new(c)?);
            index.push(b);
        }
    }
    if kept_w.is_empty() {
        return Err(Error::InvalidDecomposition("marginal has no mass".into()));
    }
    Ok(Decomposition {
        weights: ProbVector::new(kept_w)?,
        components: comps,
        index,
    })
}

/// Raw map `index -> (f(0), ..., f(n-1))`, big-endian in base `a_size`.
pub fn extremal_map(index: usize, n_states: usize, a_size: usize) -> Vec<usize> {
    let mut map = vec![0; n_states];
    let mut rest = index;
    for slot in map.iter_mut().rev() {
        *slot = rest % a_size;
        rest /= a_size;
    }
    map
}

/// Number of set partitions of `n` elements into at most `k` blocks.
fn restricted_growth_count(n: usize, k: usize) -> u128 {
    // Stirling numbers of the second kind, row by row.
    let mut row = vec![0u128; k + 1];
    row[0] = 1;
    for _ in 0..n {
        let mut next = vec![0u128; k + 1];
        for j in 1..=k {
            next[j] = (j as u128).saturating_mul(row[j]).saturating_add(row[j - 1]);
        }
        row = next;
    }
    row.iter().fold(0u128, |a, &b| a.saturating_add(b))
}

/// Iterator over maps `states -> A`, optionally only canonical ones
/// (restricted growth strings: first occurrences appear in increasing order).
#[derive(Debug, Clone)]
pub struct ExtremalMaps {
    a_size: usize,
    canonical: bool,
    next: Option<Vec<usize>>,
}

impl ExtremalMaps {
    pub fn new(n_states: usize, a_size: usize, canonical: bool, cap: usize) -> Result<Self> {
        if a_size == 0 {
            return Err(Error::InvalidArgument("index set must be non-empty".into()));
        }
        let count = Self::count(n_states, a_size, canonical);
        if count > cap as u128 {
            return Err(Error::CapExceeded {
                what: "extremal maps",
                requested: count,
                cap: cap as u128,
            });
        }
        Ok(Self {
            a_size,
            canonical,
            next: Some(vec![0; n_states]),
        })
    }

    pub fn count(n_states: usize, a_size: usize, canonical: bool) -> u128 {
        if canonical {
            restricted_growth_count(n_states, a_size)
        } else {
            (a_size as u128).checked_pow(n_states as u32).unwrap_or(u128::MAX)
        }
    }

    fn advance(&self, map: &[usize]) -> Option<Vec<usize>> {
        let n = map.len();
        let mut next = map.to_vec();
        for i in (0..n).rev() {
            let limit = if self.canonical {
                let prefix_max = next[..i].iter().copied().max().map_or(0, |m| m + 1);
                prefix_max.min(self.a_size - 1)
            } else {
                self.a_size - 1
            };
            if next[i] < limit {
                next[i] += 1;
                for v in &mut next[i + 1..] {
                    *v = 0;
                }
                return Some(next);
            }
        }
        None
    }
}

impl Iterator for ExtremalMaps {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        self.next = self.advance(&current);
        Some(current)
    }
}

/// Decomposition induced by `f: states -> A`: `mu_a` is `mu` restricted to
/// `f^{-1}(a)` and normalized.
pub fn map_decomposition(mu: &ProbVector, map: &[usize]) -> Result<Decomposition> {
    if map.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: map.len(),
        });
    }
    let a_size = map.iter().copied().max().map_or(1, |m| m + 1);
    let mut weights = Vec::new();
    let mut components = Vec::new();
    let mut index = Vec::new();
    for a in 0..a_size {
        if let Some((w, c)) = weighted_component(mu, |x| if map[x] == a { 1.0 } else { 0.0 }) {
            weights.push(w);
            components.push(c);
            index.push(a);
        }
    }
    let weights = ProbVector::new(weights)?;
    Ok(Decomposition {
        weights,
        components,
        index,
    })
}

/// Every decomposition induced by a map `states -> A` with `|A| = a_size`.
pub fn extremal_decompositions(
    mu: &ProbVector,
    a_size: usize,
    canonical: bool,
    cap: usize,
) -> Result<impl Iterator<Item = Decomposition> + '_> {
    let maps = ExtremalMaps::new(mu.len(), a_size, canonical, cap)?;
    Ok(maps.map(move |m| map_decomposition(mu, &m).expect("map decompositions are valid")))
}
