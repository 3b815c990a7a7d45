//! Entropy functionals of a measurement on a stochastic system: mutual
//! information, the CNT functional, Hudetz, Makarov, AFL and KOW entropies,
//! their finite-`N` sequences and rate estimates, and suprema over sharp
//! partitions.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decomp::{
    extremal_decompositions, multi_marginal, Decomposition, ExtremalMaps, MultiDecomposition,
    DEFAULT_ENUMERATION_CAP,
};
use crate::dynsys::StochasticSystem;
use crate::entcore::{
    entropy_of, relative_entropy, shannon_entropy, von_neumann_entropy, DensityMatrix, ProbVector,
};
use crate::error::{Error, Result};
use crate::pou::{
    distribution, point_distribution, refine_afl, sharp_partition, word_count, PartitionOfUnity,
    DEFAULT_WORD_CAP,
};
use crate::random::random_partition;

/// Default cap on the dimension of a density matrix that gets diagonalized.
pub const DEFAULT_AFL_DIM_CAP: usize = 2048;
/// Agreement required between the two forms of the mutual information.
pub const FORM_AGREEMENT_TOL: f64 = 1e-9;
/// Values closer than this count as ties in [`sup_over_sharp`].
pub const TIE_TOL: f64 = 1e-12;

/// Resource guards for the exponentially growing objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Maximum `K^N` for a materialized refinement.
    pub word_cap: usize,
    /// Maximum dimension of a density matrix that is diagonalized.
    pub afl_dim_cap: usize,
    /// Maximum number of maps or map tuples enumerated.
    pub enumeration_cap: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            word_cap: DEFAULT_WORD_CAP,
            afl_dim_cap: DEFAULT_AFL_DIM_CAP,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

fn check_dim_cap(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        return Err(Error::CapExceeded {
            what: "density matrix dimension",
            requested: dim as u128,
            cap: cap as u128,
        });
    }
    Ok(())
}

/// `I = S(mu o F) - sum_a lambda_a S(mu_a o F)`, checked against the
/// relative-entropy form `sum_a lambda_a S(mu_a o F | mu o F)`.
pub fn mutual_information(mu: &ProbVector, d: &Decomposition, f: &PartitionOfUnity) -> Result<f64> {
    let outcome = distribution(mu, f)?;
    let mut averaged = 0.0;
    let mut relative = 0.0;
    for (&w, c) in d.weights().as_slice().iter().zip(d.components()) {
        let local = distribution(c, f)?;
        averaged += w * shannon_entropy(&local);
        relative += w * relative_entropy(&local, &outcome)?.value();
    }
    let difference = shannon_entropy(&outcome) - averaged;
    if !relative.is_finite() || (difference - relative).abs() > FORM_AGREEMENT_TOL {
        return Err(Error::Internal(format!(
            "mutual information forms disagree: {difference} vs {relative}"
        )));
    }
    Ok(relative)
}

/// Hudetz functional `S(mu o F) - sum_x mu_x S(delta_x o F)`: the mutual
/// information between the state and the outcome.
pub fn hud_functional(mu: &ProbVector, f: &PartitionOfUnity) -> Result<f64> {
    let outcome = distribution(mu, f)?;
    let mut conditional = 0.0;
    for x in 0..f.n_states() {
        conditional += mu.get(x) * shannon_entropy(&point_distribution(x, f)?);
    }
    Ok(shannon_entropy(&outcome) - conditional)
}

/// `sum_n I[mu, lambda^(n) mu^(n), F_n] - (sum_n S(lambda^(n)) - S(lambda))`.
pub fn cnt_functional(
    mu: &ProbVector,
    d: &MultiDecomposition,
    partitions: &[PartitionOfUnity],
) -> Result<f64> {
    if partitions.len() != d.arity() {
        return Err(Error::DimensionMismatch {
            expected: d.arity(),
            got: partitions.len(),
        });
    }
    let mut information = 0.0;
    for (n, f) in partitions.iter().enumerate() {
        information += mutual_information(mu, &multi_marginal(d, n)?, f)?;
    }
    Ok(information - d.entropy_defect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneTimeMode {
    /// The closed form, equal to [`hud_functional`].
    ClosedForm,
    /// Maximum of the mutual information over every map `states -> states`.
    BruteForce { cap: usize },
}

/// The one-time CNT supremum over decompositions of `mu`.
pub fn cnt_onetime(mu: &ProbVector, f: &PartitionOfUnity, mode: OneTimeMode) -> Result<f64> {
    match mode {
        OneTimeMode::ClosedForm => hud_functional(mu, f),
        OneTimeMode::BruteForce { cap } => {
            let mut best = f64::NEG_INFINITY;
            for d in extremal_decompositions(mu, mu.len(), false, cap)? {
                best = best.max(mutual_information(mu, &d, f)?);
            }
            Ok(best)
        }
    }
}

/// Outcome of [`cnt_search`].
#[derive(Debug, Clone)]
pub struct CntSearch {
    pub best: f64,
    pub witness: MultiDecomposition,
    /// Where the witness came from: `"trivial"`, `"identification"` or `"random"`.
    pub witness_source: &'static str,
    pub identifications_evaluated: usize,
    pub identifications_truncated: bool,
    /// Identification decompositions with a strictly negative value.
    pub negative_identifications: usize,
    /// The most negative identification value seen, if any was negative.
    pub most_negative: Option<(f64, MultiDecomposition)>,
    pub random_evaluated: usize,
}

/// Heuristic search for the multi-time CNT supremum. Candidates are the
/// trivial decomposition, identification decompositions from tuples of
/// canonical maps `states -> states` (up to `caps.enumeration_cap` tuples), and
/// `budget` seeded random density decompositions. The result is never
/// negative since the trivial decomposition scores zero.
pub fn cnt_search(
    sys: &StochasticSystem,
    partitions: &[PartitionOfUnity],
    budget: usize,
    seed: u64,
    caps: &Caps,
) -> Result<CntSearch> {
    if partitions.is_empty() {
        return Err(Error::InvalidArgument("cnt_search needs at least one partition".into()));
    }
    let mu = sys.stationary();
    let n = sys.n_states();
    let arity = partitions.len();

    let trivial = MultiDecomposition::trivial(mu, arity)?;
    let mut result = CntSearch {
        best: cnt_functional(mu, &trivial, partitions)?,
        witness: trivial,
        witness_source: "trivial",
        identifications_evaluated: 0,
        identifications_truncated: false,
        negative_identifications: 0,
        most_negative: None,
        random_evaluated: 0,
    };

    let maps: Vec<Vec<usize>> = ExtremalMaps::new(n, n, true, usize::MAX)?.collect();
    let mut tuple = vec![0usize; arity];
    'tuples: loop {
        if result.identifications_evaluated >= caps.enumeration_cap {
            result.identifications_truncated = true;
            break;
        }
        let chosen: Vec<Vec<usize>> = tuple.iter().map(|&i| maps[i].clone()).collect();
        let d = MultiDecomposition::from_maps(mu, &chosen)?;
        let value = cnt_functional(mu, &d, partitions)?;
        result.identifications_evaluated += 1;
        if value < 0.0 {
            result.negative_identifications += 1;
            if result.most_negative.as_ref().is_none_or(|(v, _)| value < *v) {
                result.most_negative = Some((value, d.clone()));
            }
        }
        if value > result.best {
            result.best = value;
            result.witness = d;
            result.witness_source = "identification";
        }
        for slot in tuple.iter_mut().rev() {
            *slot += 1;
            if *slot < maps.len() {
                continue 'tuples;
            }
            *slot = 0;
        }
        break;
    }

    let shape = vec![n; arity];
    let outcomes = word_count(n, arity)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..budget {
        let g = random_partition(&mut rng, n, outcomes)?;
        let d = MultiDecomposition::from_densities(mu, shape.clone(), &g)?;
        let value = cnt_functional(mu, &d, partitions)?;
        result.random_evaluated += 1;
        if value > result.best {
            result.best = value;
            result.witness = d;
            result.witness_source = "random";
        }
    }
    Ok(result)
}

/// `rho_kl = mu(sqrt(f_k f_l))`, the Gram matrix of the `sqrt(f_k)` in the
/// `mu`-weighted inner product.
pub fn rho_mak(mu: &ProbVector, f: &PartitionOfUnity, dim_cap: usize) -> Result<DensityMatrix> {
    if mu.len() != f.n_states() {
        return Err(Error::DimensionMismatch {
            expected: f.n_states(),
            got: mu.len(),
        });
    }
    let k = f.n_outcomes();
    check_dim_cap(k, dim_cap)?;
    if f.is_sharp() {
        return Ok(DensityMatrix::diagonal(&distribution(mu, f)?));
    }
    let weighted = DMatrix::from_fn(f.n_states(), k, |x, j| (mu.get(x) * f.get(x, j)).sqrt());
    let gram = weighted.transpose() * &weighted;
    DensityMatrix::new(symmetrize(gram))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// The AFL density matrix over word pairs,
/// `mu(sqrt(f_k0 f_l0) Theta(sqrt(f_k1 f_l1) ... Theta(sqrt(f_kN-1 f_lN-1))))`.
///
/// For a sharp partition the matrix is diagonal with the word distribution on
/// the diagonal, which is returned directly.
pub fn rho_afl(
    sys: &StochasticSystem,
    f: &PartitionOfUnity,
    depth: usize,
    dim_cap: usize,
) -> Result<DensityMatrix> {
    let k = f.n_outcomes();
    let dim = (k as u128).checked_pow(depth as u32).unwrap_or(u128::MAX);
    if dim > dim_cap as u128 {
        return Err(Error::CapExceeded {
            what: "AFL density matrix dimension",
            requested: dim,
            cap: dim_cap as u128,
        });
    }
    if f.is_sharp() {
        let refined = refine_afl(sys, f, depth, dim_cap)?;
        return Ok(DensityMatrix::diagonal(&distribution(sys.stationary(), refined.partition())?));
    }
    if sys.n_states() != f.n_states() {
        return Err(Error::DimensionMismatch {
            expected: sys.n_states(),
            got: f.n_states(),
        });
    }
    if depth == 0 {
        return Err(Error::InvalidArgument("refinement depth must be >= 1".into()));
    }
    let n = f.n_states();
    let dim = dim as usize;

    // roots[(k*K + l)*n + x] = sqrt(f_k(x) f_l(x))
    let mut roots = vec![0.0; k * k * n];
    for a in 0..k {
        for b in 0..k {
            for x in 0..n {
                roots[(a * k + b) * n + x] = (f.get(x, a) * f.get(x, b)).sqrt();
            }
        }
    }

    // Pair functions for suffixes of growing length; `words` is K^m.
    let mut level = roots.clone();
    let mut words = k;
    let mut image = vec![0.0; n];
    for _ in 1..depth.saturating_sub(1) {
        let next_words = words * k;
        let mut next = vec![0.0; next_words * next_words * n];
        for a in 0..words {
            for b in 0..words {
                let src = (a * words + b) * n;
                sys.theta_into(&level[src..src + n], &mut image);
                for sk in 0..k {
                    for sl in 0..k {
                        let row = sk * words + a;
                        let col = sl * words + b;
                        let dst = (row * next_words + col) * n;
                        let r = &roots[(sk * k + sl) * n..(sk * k + sl + 1) * n];
                        for x in 0..n {
                            next[dst + x] = r[x] * image[x];
                        }
                    }
                }
            }
        }
        level = next;
        words = next_words;
    }

    let mu = sys.stationary().as_slice();
    let mut rho = DMatrix::zeros(dim, dim);
    if depth == 1 {
        for a in 0..k {
            for b in 0..k {
                let r = &roots[(a * k + b) * n..(a * k + b + 1) * n];
                rho[(a, b)] = mu.iter().zip(r).map(|(m, v)| m * v).sum();
            }
        }
    } else {
        // Final prefix: contract against mu without storing the last level.
        let weighted_roots: Vec<f64> = (0..k * k * n).map(|i| roots[i] * mu[i % n]).collect();
        for a in 0..words {
            for b in 0..words {
                let src = (a * words + b) * n;
                sys.theta_into(&level[src..src + n], &mut image);
                for sk in 0..k {
                    for sl in 0..k {
                        let w = &weighted_roots[(sk * k + sl) * n..(sk * k + sl + 1) * n];
                        let value: f64 = w.iter().zip(&image).map(|(p, q)| p * q).sum();
                        rho[(sk * words + a, sl * words + b)] = value;
                    }
                }
            }
        }
    }
    DensityMatrix::new(symmetrize(rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntropyKind {
    Hud,
    Mak,
    Afl,
    Kow,
}

impl EntropyKind {
    pub const ALL: [EntropyKind; 4] = [EntropyKind::Hud, EntropyKind::Mak, EntropyKind::Afl, EntropyKind::Kow];

    pub fn as_str(self) -> &'static str {
        match self {
            EntropyKind::Hud => "hud",
            EntropyKind::Mak => "mak",
            EntropyKind::Afl => "afl",
            EntropyKind::Kow => "kow",
        }
    }
}

impl fmt::Display for EntropyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntropyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hud" => Ok(EntropyKind::Hud),
            "mak" => Ok(EntropyKind::Mak),
            "afl" => Ok(EntropyKind::Afl),
            "kow" => Ok(EntropyKind::Kow),
            other => Err(Error::InvalidArgument(format!("unknown entropy kind {other:?}"))),
        }
    }
}

/// The depth-`N` entropy of the given kind (not divided by `N`).
pub fn entropy_at(
    sys: &StochasticSystem,
    f: &PartitionOfUnity,
    kind: EntropyKind,
    depth: usize,
    caps: &Caps,
) -> Result<f64> {
    let mu = sys.stationary();
    if kind == EntropyKind::Afl && !f.is_sharp() {
        return Ok(von_neumann_entropy(&rho_afl(sys, f, depth, caps.afl_dim_cap)?));
    }
    let refined = refine_afl(sys, f, depth, caps.word_cap)?;
    let words = refined.partition();
    match kind {
        EntropyKind::Hud => hud_functional(mu, words),
        EntropyKind::Mak => Ok(von_neumann_entropy(&rho_mak(mu, words, caps.afl_dim_cap)?)),
        // sharp AFL matrices are diagonal in the word basis
        EntropyKind::Afl | EntropyKind::Kow => Ok(shannon_entropy(&distribution(mu, words)?)),
    }
}

/// Why an [`EntropySequence`] stops short of the requested depth.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub depth: usize,
    pub reason: String,
}

/// `s_1, ..., s_Nmax` for one kind and one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropySequence {
    pub kind: EntropyKind,
    pub partition: String,
    pub requested: usize,
    pub values: Vec<f64>,
    pub truncation: Option<Truncation>,
}

impl EntropySequence {
    /// `d_N = s_N - s_{N-1}`, with `s_0 = 0`.
    pub fn increments(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.values
            .iter()
            .map(|&v| {
                let d = v - prev;
                prev = v;
                d
            })
            .collect()
    }

    /// `s_N / N`.
    pub fn ratios(&self) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| v / (i + 1) as f64)
            .collect()
    }

    pub fn is_truncated(&self) -> bool {
        self.truncation.is_some()
    }
}

fn describe(f: &PartitionOfUnity) -> String {
    format!(
        "{} outcomes, {}",
        f.n_outcomes(),
        if f.is_sharp() { "sharp" } else { "unsharp" }
    )
}

/// Entropies at depths `1..=nmax`. A cap hit ends the sequence early and is
/// recorded in `truncation`; every other error is returned.
pub fn entropy_sequence(
    sys: &StochasticSystem,
    f: &PartitionOfUnity,
    kind: EntropyKind,
    nmax: usize,
    caps: &Caps,
) -> Result<EntropySequence> {
    if nmax == 0 {
        return Err(Error::InvalidArgument("nmax must be >= 1".into()));
    }
    let mut seq = EntropySequence {
        kind,
        partition: describe(f),
        requested: nmax,
        values: Vec::with_capacity(nmax),
        truncation: None,
    };
    for depth in 1..=nmax {
        match entropy_at(sys, f, kind, depth, caps) {
            Ok(v) => seq.values.push(v),
            Err(e @ Error::CapExceeded { .. }) => {
                seq.truncation = Some(Truncation {
                    depth,
                    reason: e.to_string(),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(seq)
}

/// Finite-`N` surrogates for `limsup s_N / N`. When the increments have
/// settled, `last_increment` is the sharper of the two; `last_ratio` carries
/// an `O(1/N)` bias from the transient part of the sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub nmax: usize,
    pub last_increment: f64,
    pub last_ratio: f64,
}

pub fn rate_estimate(seq: &EntropySequence) -> Result<RateEstimate> {
    let n = seq.values.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "rate estimate needs at least 2 values, have {n}"
        )));
    }
    Ok(RateEstimate {
        nmax: n,
        last_increment: seq.values[n - 1] - seq.values[n - 2],
        last_ratio: seq.values[n - 1] / n as f64,
    })
}

/// Candidate set for [`sup_over_sharp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SharpSearch {
    /// Every set partition of the states; at most 8 states.
    Exhaustive,
    /// Only the partition into singletons.
    ExtremalOnly,
}

/// Largest number of states accepted by [`SharpSearch::Exhaustive`].
pub const EXHAUSTIVE_MAX_STATES: usize = 8;

#[derive(Debug, Clone)]
pub struct SharpSup {
    /// Winning cells, each sorted, ordered by first member.
    pub cells: Vec<Vec<usize>>,
    pub sequence: EntropySequence,
    pub rate: RateEstimate,
    pub candidates: usize,
    /// Candidates whose sequence was cut short by a cap.
    pub truncated_candidates: usize,
}

fn cells_of(map: &[usize]) -> Vec<Vec<usize>> {
    let blocks = map.iter().copied().max().map_or(0, |m| m + 1);
    let mut cells = vec![Vec::new(); blocks];
    for (x, &b) in map.iter().enumerate() {
        cells[b].push(x);
    }
    cells
}

/// Maximizes the last increment over sharp partitions. Candidates are visited
/// in lexicographic order of their restricted growth string, and a later
/// candidate must beat the incumbent by more than [`TIE_TOL`], so the
/// lexicographically smallest encoding wins ties.
pub fn sup_over_sharp(
    sys: &StochasticSystem,
    kind: EntropyKind,
    nmax: usize,
    mode: SharpSearch,
    caps: &Caps,
) -> Result<SharpSup> {
    if nmax < 2 {
        return Err(Error::InvalidArgument("sup_over_sharp needs nmax >= 2".into()));
    }
    let n = sys.n_states();
    let maps: Vec<Vec<usize>> = match mode {
        SharpSearch::Exhaustive => {
            if n > EXHAUSTIVE_MAX_STATES {
                return Err(Error::InvalidArgument(format!(
                    "exhaustive sharp search supports at most {EXHAUSTIVE_MAX_STATES} states, have {n}"
                )));
            }
            ExtremalMaps::new(n, n, true, caps.enumeration_cap)?.collect()
        }
        SharpSearch::ExtremalOnly => vec![(0..n).collect()],
    };

    let evaluated: Vec<Result<(Vec<Vec<usize>>, EntropySequence)>> = maps
        .par_iter()
        .map(|m| {
            let cells = cells_of(m);
            let f = sharp_partition(n, &cells)?;
            let seq = entropy_sequence(sys, &f, kind, nmax, caps)?;
            Ok((cells, seq))
        })
        .collect();

    let mut best: Option<(Vec<Vec<usize>>, EntropySequence, RateEstimate)> = None;
    let mut truncated = 0;
    for item in evaluated {
        let (cells, seq) = item?;
        if seq.is_truncated() {
            truncated += 1;
        }
        let Ok(rate) = rate_estimate(&seq) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((_, _, r)) => rate.last_increment > r.last_increment + TIE_TOL,
        };
        if better {
            best = Some((cells, seq, rate));
        }
    }
    let (cells, sequence, rate) = best.ok_or(Error::CapExceeded {
        what: "sharp candidates with at least two sequence values",
        requested: 1,
        cap: 0,
    })?;
    Ok(SharpSup {
        cells,
        sequence,
        rate,
        candidates: maps.len(),
        truncated_candidates: truncated,
    })
}

/// `S(lambda)` helper exposed for reports.
pub fn weight_entropy(weights: &[f64]) -> f64 {
    entropy_of(weights)
}
