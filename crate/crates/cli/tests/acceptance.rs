//! Acceptance suite. Prints one PASS/FAIL line per criterion (with sub-checks
//! indented below it) and exits nonzero when a criterion fails, except for
//! the checks listed in `EXPECTED_FAILURES`, whose failure is a property of
//! the mathematics rather than of the implementation.
//!
//! Reference values come from oracles written here: word distributions and
//! AFL matrices by summing over state paths, a cyclic Jacobi eigensolver, and
//! direct entropy sums.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use entropy_lab::decomp::{MultiDecomposition, MultiEntry};
use entropy_lab::dynent::{
    cnt_functional, cnt_onetime, cnt_search, entropy_at, entropy_sequence, rho_afl, rho_mak, Caps,
    EntropyKind, OneTimeMode,
};
use entropy_lab::dynsys::{make_bernoulli, StochasticSystem};
use entropy_lab::entcore::{
    pushforward, relative_entropy, shannon_entropy, von_neumann_entropy, DensityMatrix, ProbVector, StochasticMatrix,
};
use entropy_lab::pou::{
    distribution, evolve, extremal_partition, refine_afl, sharp_partition, simple_decomposition, uniform_unsharp,
    PartitionOfUnity,
};
use entropy_lab::random::{random_partition, random_simple_partition, random_simplex, random_system};
use entropy_lab_cli::doc::{parse_partition, parse_system};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS_SEED: u64 = 0x5eed_0001;
const CORPUS_SIZE: usize = 200;
const INEQUALITY_SEED: u64 = 0x5eed_0010;
const INEQUALITY_INSTANCES: usize = 1000;
const SAMPLE_SEED: u64 = 2024;

/// Sub-checks that cannot pass. See the note printed with them.
const EXPECTED_FAILURES: &[&str] = &["9c-N2"];

// ---------------------------------------------------------------- oracles

fn eta_ref(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

fn shannon_ref(p: &[f64]) -> f64 {
    p.iter().map(|&v| eta_ref(v)).sum()
}

fn response(f: &PartitionOfUnity) -> Vec<Vec<f64>> {
    (0..f.n_states()).map(|x| f.row(x)).collect()
}

fn transition(sys: &StochasticSystem) -> Vec<Vec<f64>> {
    (0..sys.n_states()).map(|x| sys.transition().row(x)).collect()
}

/// Probability of every word of length `depth` (big-endian code), summing
/// `mu(x_0) F(x_0,k_0) P(x_0,x_1) F(x_1,k_1) ...` over all state paths.
fn word_distribution_by_paths(sys: &StochasticSystem, f: &PartitionOfUnity, depth: usize) -> Vec<f64> {
    let p = transition(sys);
    let r = response(f);
    let k = f.n_outcomes();
    let n = sys.n_states();
    let mut out = vec![0.0; k.pow(depth as u32)];
    fn walk(
        p: &[Vec<f64>],
        r: &[Vec<f64>],
        n: usize,
        k: usize,
        left: usize,
        x: usize,
        weight: f64,
        code: usize,
        out: &mut [f64],
    ) {
        for sym in 0..k {
            let w = weight * r[x][sym];
            let c = code * k + sym;
            if left == 1 {
                out[c] += w;
            } else {
                for y in 0..n {
                    walk(p, r, n, k, left - 1, y, w * p[x][y], c, out);
                }
            }
        }
    }
    for x in 0..n {
        walk(&p, &r, n, k, depth, x, sys.stationary().get(x), 0, &mut out);
    }
    out
}

/// AFL matrix entry by summing over state paths.
fn afl_entry_by_paths(sys: &StochasticSystem, f: &PartitionOfUnity, ks: &[usize], ls: &[usize]) -> f64 {
    let p = transition(sys);
    let r = response(f);
    let n = sys.n_states();
    fn walk(p: &[Vec<f64>], r: &[Vec<f64>], n: usize, ks: &[usize], ls: &[usize], x: usize) -> f64 {
        let here = (r[x][ks[0]] * r[x][ls[0]]).sqrt();
        if ks.len() == 1 {
            return here;
        }
        here * (0..n).map(|y| p[x][y] * walk(p, r, n, &ks[1..], &ls[1..], y)).sum::<f64>()
    }
    (0..n).map(|x| sys.stationary().get(x) * walk(&p, &r, n, ks, ls, x)).sum()
}

fn digits(mut code: usize, base: usize, depth: usize) -> Vec<usize> {
    let mut out = vec![0; depth];
    for slot in out.iter_mut().rev() {
        *slot = code % base;
        code /= base;
    }
    out
}

fn afl_matrix_by_paths(sys: &StochasticSystem, f: &PartitionOfUnity, depth: usize) -> DMatrix<f64> {
    let k = f.n_outcomes();
    let dim = k.pow(depth as u32);
    DMatrix::from_fn(dim, dim, |a, b| {
        afl_entry_by_paths(sys, f, &digits(a, k, depth), &digits(b, k, depth))
    })
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut values: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values
}

fn von_neumann_ref(m: &DMatrix<f64>) -> f64 {
    jacobi_eigenvalues(m).into_iter().map(|l| eta_ref(l.max(0.0))).sum()
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

// ---------------------------------------------------------------- corpus

struct Instance {
    sys: StochasticSystem,
    f: PartitionOfUnity,
    simple: PartitionOfUnity,
}

fn corpus() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED);
    (0..CORPUS_SIZE)
        .map(|_| {
            let n = rng.random_range(1..=4);
            let k = rng.random_range(2..=3);
            let sys = random_system(&mut rng, n).unwrap();
            let f = random_partition(&mut rng, n, k).unwrap();
            let simple = random_simple_partition(&mut rng, n, k).unwrap();
            Instance { sys, f, simple }
        })
        .collect()
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Every fixture system paired with every fixture partition that fits it.
fn fixture_pairs() -> Vec<(String, StochasticSystem, Vec<(String, PartitionOfUnity)>)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixtures_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let systems: Vec<(String, StochasticSystem)> = paths
        .iter()
        .filter_map(|p| parse_system(p).ok().map(|s| (name(p), s)))
        .collect();
    systems
        .into_iter()
        .map(|(sname, sys)| {
            let parts = paths
                .iter()
                .filter_map(|p| parse_partition(p, &sys).ok().map(|f| (name(p), f)))
                .collect();
            (sname, sys, parts)
        })
        .collect()
}

fn name(p: &Path) -> String {
    p.file_name().unwrap().to_string_lossy().into_owned()
}

// ---------------------------------------------------------------- reporting

struct Check {
    id: &'static str,
    pass: bool,
    detail: String,
}

struct Criterion {
    number: u32,
    title: &'static str,
    checks: Vec<Check>,
}

impl Criterion {
    fn new(number: u32, title: &'static str) -> Self {
        Self {
            number,
            title,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, id: &'static str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            id,
            pass,
            detail: detail.into(),
        });
    }

    fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

// ---------------------------------------------------------------- criteria

// the pinned values are the printed reference digits, not a stand-in for LN_2
#[allow(clippy::approx_constant)]
fn c1_bernoulli() -> Criterion {
    let mut c = Criterion::new(1, "Bernoulli exactness");
    let start = Instant::now();
    let caps = Caps::default();
    for (p, pinned, id) in [(vec![0.5, 0.5], 0.693_147_18, "p=(0.5,0.5)"), (vec![0.75, 0.25], 0.562_335_14, "p=(0.75,0.25)")] {
        let h: f64 = p.iter().map(|&v| eta_ref(v)).sum();
        let sys = make_bernoulli(&ProbVector::new(p.clone()).unwrap()).unwrap();
        let f = extremal_partition(p.len());
        let mut worst: f64 = 0.0;
        for kind in [EntropyKind::Afl, EntropyKind::Kow] {
            let seq = entropy_sequence(&sys, &f, kind, 8, &caps).unwrap();
            assert_eq!(seq.values.len(), 8);
            for d in seq.increments() {
                worst = worst.max((d - h).abs());
            }
        }
        c.check(
            id,
            worst <= 1e-9 && (h - pinned).abs() < 5e-9,
            format!("sum eta(p) = {h:.8}, max |d_N - sum eta(p)| over AFL, KOW, N<=8 = {worst:.2e} (tol 1e-9)"),
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    c.check("runtime", elapsed < 10.0, format!("{elapsed:.3} s (limit 10 s)"));
    c
}

fn c2_hudetz() -> Criterion {
    let mut c = Criterion::new(2, "Hudetz vanishing");
    let caps = Caps::default();
    let mut pairs = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for (sname, sys, parts) in fixture_pairs() {
        let s_mu = shannon_ref(sys.stationary().as_slice());
        for (pname, f) in parts {
            pairs += 1;
            let seq = entropy_sequence(&sys, &f, EntropyKind::Hud, 8, &caps).unwrap();
            let bounded = seq.values.len() == 8 && seq.values.iter().all(|&v| v <= s_mu + 1e-9);
            let excess = seq.values.iter().map(|&v| v - s_mu).fold(f64::NEG_INFINITY, f64::max);
            worst_excess = worst_excess.max(excess);
            let ratio_ok = seq.values.get(7).is_some_and(|&v| v / 8.0 <= s_mu / 8.0 + 1e-9 / 8.0);
            if !(bounded && ratio_ok) {
                failures.push(format!("{sname}/{pname}"));
            }
        }
    }
    c.check(
        "s_N <= S(mu)",
        failures.is_empty() && pairs > 0,
        format!("{pairs} fixture pairs, max s_N - S(mu) = {worst_excess:.3e}, failures: {failures:?}"),
    );
    c
}

fn c3_kow() -> Criterion {
    let mut c = Criterion::new(3, "KOW unboundedness");
    let caps = Caps::default();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (_, sys, _) in fixture_pairs() {
        for k in [2usize, 3] {
            let f = uniform_unsharp(sys.n_states(), k).unwrap();
            let seq = entropy_sequence(&sys, &f, EntropyKind::Kow, 10, &caps).unwrap();
            assert_eq!(seq.values.len(), 10);
            for (i, v) in seq.values.iter().enumerate() {
                worst = worst.max((v - (i + 1) as f64 * (k as f64).ln()).abs());
            }
            count += 1;
        }
    }
    c.check(
        "s_N = N log k",
        worst <= 1e-10,
        format!("{count} sequences, k in {{2,3}}, N<=10, max error {worst:.2e} (tol 1e-10)"),
    );
    c
}

fn c4_markov() -> Criterion {
    let mut c = Criterion::new(4, "Markov entropy-rate oracle");
    let p = StochasticMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
    let sys = entropy_lab::dynsys::make_markov(entropy_lab::dynsys::default_labels(2), p, None).unwrap();
    let f = extremal_partition(2);
    let seq = entropy_sequence(&sys, &f, EntropyKind::Kow, 8, &Caps::default()).unwrap();
    let mut worst: f64 = 0.0;
    for n in 1..=6 {
        let oracle = shannon_ref(&word_distribution_by_paths(&sys, &f, n));
        worst = worst.max((oracle - seq.values[n - 1]).abs());
    }
    c.check("enumeration N<=6", worst <= 1e-10, format!("max |s_N - path oracle| = {worst:.2e} (tol 1e-10)"));

    let mu = [2.0 / 3.0, 1.0 / 3.0];
    let rows = [[0.9, 0.1], [0.2, 0.8]];
    let rate: f64 = (0..2).map(|x| mu[x] * rows[x].iter().map(|&v| eta_ref(v)).sum::<f64>()).sum();
    let incs = seq.increments();
    let worst_inc = incs[1..].iter().map(|d| (d - 0.383_523).abs()).fold(0.0, f64::max);
    c.check(
        "d_N for N>=2",
        worst_inc <= 1e-6 && (rate - 0.383_523).abs() <= 1e-6,
        format!("sum mu_x sum eta(P_xy) = {rate:.9}, max |d_N - 0.383523| for 2<=N<=8 = {worst_inc:.2e} (tol 1e-6)"),
    );
    c
}

fn c5_ordering(corpus: &[Instance]) -> Criterion {
    let mut c = Criterion::new(5, "Ordering chain");
    let caps = Caps::default();
    let (mut hm, mut ha, mut ak) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for inst in corpus {
        for n in 1..=3 {
            let at = |kind| entropy_at(&inst.sys, &inst.f, kind, n, &caps).unwrap();
            let (hud, mak, afl, kow) = (at(EntropyKind::Hud), at(EntropyKind::Mak), at(EntropyKind::Afl), at(EntropyKind::Kow));
            hm = hm.max(hud - mak);
            ha = ha.max(hud - afl);
            ak = ak.max(afl - kow);
        }
    }
    c.check("HUD <= MAK", hm <= 1e-9, format!("max HUD - MAK = {hm:.3e}"));
    c.check("HUD <= AFL", ha <= 1e-9, format!("max HUD - AFL = {ha:.3e}"));
    c.check("AFL <= KOW", ak <= 1e-9, format!("max AFL - KOW = {ak:.3e}"));
    c
}

fn c6_sharp_dominance(corpus: &[Instance]) -> Criterion {
    let mut c = Criterion::new(6, "Sharp dominance");
    let caps = Caps::default();
    let (mut hud_gap, mut afl_gap) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut evaluated = 0;
    for inst in corpus {
        for f in [&inst.f, &inst.simple] {
            let cells = simple_decomposition(f).cells;
            let sharp = sharp_partition(inst.sys.n_states(), &cells).unwrap();
            for n in 2..=3 {
                let hud = entropy_at(&inst.sys, f, EntropyKind::Hud, n, &caps).unwrap();
                let hud_sharp = entropy_at(&inst.sys, &sharp, EntropyKind::Hud, n, &caps).unwrap();
                hud_gap = hud_gap.max(hud - hud_sharp);
                let afl = entropy_at(&inst.sys, f, EntropyKind::Afl, n, &caps).unwrap();
                let refined = refine_afl(&inst.sys, &sharp, n, caps.word_cap).unwrap();
                let words = shannon_entropy(&distribution(inst.sys.stationary(), refined.partition()).unwrap());
                afl_gap = afl_gap.max(afl - words);
                evaluated += 1;
            }
        }
    }
    c.check("Hudetz", hud_gap <= 1e-9, format!("{evaluated} cases, max HUD(F) - HUD(chi_C) = {hud_gap:.3e}"));
    c.check("AFL", afl_gap <= 1e-9, format!("{evaluated} cases, max S_q(rho_AFL(F)) - S(words of chi_C) = {afl_gap:.3e}"));
    c
}

/// Mutual information of an identification decomposition given by `map`.
fn identification_information(mu: &[f64], map: &[usize], f: &PartitionOfUnity) -> (f64, Vec<f64>) {
    let a = map.iter().copied().max().unwrap() + 1;
    let k = f.n_outcomes();
    let mut lambda = vec![0.0; a];
    let mut joint = vec![vec![0.0; k]; a];
    for (x, &alpha) in map.iter().enumerate() {
        lambda[alpha] += mu[x];
        for j in 0..k {
            joint[alpha][j] += mu[x] * f.get(x, j);
        }
    }
    let outcome: Vec<f64> = (0..k).map(|j| (0..a).map(|al| joint[al][j]).sum()).collect();
    let conditional: f64 = (0..a)
        .filter(|&al| lambda[al] > 0.0)
        .map(|al| lambda[al] * shannon_ref(&joint[al].iter().map(|v| v / lambda[al]).collect::<Vec<_>>()))
        .sum();
    (shannon_ref(&outcome) - conditional, lambda)
}

fn c7_cnt_closed_form() -> Criterion {
    let mut c = Criterion::new(7, "CNT closed form");
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED ^ 7);
    let mut worst_oracle: f64 = 0.0;
    let mut worst_library: f64 = 0.0;
    let mut worst_trivial: f64 = 0.0;
    let mut count = 0;
    for n in 1..=5usize {
        for k in 1..=4usize {
            for rep in 0..3 {
                let sys = random_system(&mut rng, n).unwrap();
                let f = if rep == 2 {
                    random_simple_partition(&mut rng, n, k).unwrap()
                } else {
                    random_partition(&mut rng, n, k).unwrap()
                };
                let mu = sys.stationary();
                let closed = cnt_onetime(mu, &f, OneTimeMode::ClosedForm).unwrap();
                let mut best = f64::NEG_INFINITY;
                let total = n.pow(n as u32);
                for code in 0..total {
                    let map = digits(code, n, n);
                    best = best.max(identification_information(mu.as_slice(), &map, &f).0);
                }
                worst_oracle = worst_oracle.max((closed - best).abs());
                let library = cnt_onetime(mu, &f, OneTimeMode::BruteForce { cap: 1_000_000 }).unwrap();
                worst_library = worst_library.max((closed - library).abs());

                let mut list = vec![f.clone()];
                for arity in 1..=3 {
                    let trivial = MultiDecomposition::trivial(mu, arity).unwrap();
                    worst_trivial = worst_trivial.max(cnt_functional(mu, &trivial, &list).unwrap().abs());
                    let next = evolve(&sys, list.last().unwrap()).unwrap();
                    list.push(next);
                }
                count += 1;
            }
        }
    }
    c.check(
        "closed = brute force",
        worst_oracle <= 1e-9 && worst_library <= 1e-9,
        format!("{count} systems (n<=5, K<=4), max |closed - oracle max| = {worst_oracle:.2e}, library brute force {worst_library:.2e} (tol 1e-9)"),
    );
    c.check(
        "trivial = 0",
        worst_trivial <= 1e-12,
        format!("max |CNT(trivial)| over arities 1..3 = {worst_trivial:.2e} (tol 1e-12)"),
    );
    c
}

fn c8_witness() -> Criterion {
    let mut c = Criterion::new(8, "Non-convexity witness");
    let dir = fixtures_dir();
    let sys = parse_system(&dir.join("cnt_system.json")).unwrap();
    let f = parse_partition(&dir.join("cnt_F.json"), &sys).unwrap();
    let g = parse_partition(&dir.join("cnt_G.json"), &sys).unwrap();
    let res = cnt_search(&sys, &[f.clone(), g.clone()], 200, 11, &Caps::default()).unwrap();
    let most_negative = res.most_negative.as_ref().map_or(f64::INFINITY, |(v, _)| *v);

    // independent evaluation of the identification decomposition from the map
    // (a, b, c) -> (0, 1, 0) in both slots
    let mu = sys.stationary().as_slice();
    let map = [0usize, 1, 0];
    let (i_f, lambda) = identification_information(mu, &map, &f);
    let (i_g, _) = identification_information(mu, &map, &g);
    // both indices agree, so the joint weights are lambda on the diagonal
    let defect = 2.0 * shannon_ref(&lambda) - shannon_ref(&lambda);
    let direct = i_f + i_g - defect;
    let entries: Vec<MultiEntry> = (0..2)
        .map(|a| {
            let comp: Vec<f64> = (0..3).map(|x| if map[x] == a { mu[x] / lambda[a] } else { 0.0 }).collect();
            MultiEntry {
                index: vec![a, a],
                weight: lambda[a],
                component: ProbVector::new(comp).unwrap(),
            }
        })
        .collect();
    let d = MultiDecomposition::new(sys.stationary(), vec![2, 2], entries).unwrap();
    let library = cnt_functional(sys.stationary(), &d, &[f, g]).unwrap();

    c.check(
        "negative identification",
        res.negative_identifications >= 1 && most_negative < -1e-6,
        format!(
            "{} of {} identification decompositions negative, most negative {most_negative:.9}",
            res.negative_identifications, res.identifications_evaluated
        ),
    );
    c.check(
        "oracle value",
        direct < -1e-6 && (direct - library).abs() <= 1e-12,
        format!("map (0,1,0): direct {direct:.12}, library {library:.12}"),
    );
    c.check("search >= 0", res.best >= 0.0, format!("cnt_search best = {:.9} ({})", res.best, res.witness_source));
    c
}

fn density_ok(rho: &DensityMatrix) -> (f64, f64, f64) {
    let m = rho.entries();
    let asym = max_abs_diff(m, &m.transpose());
    let trace = (m.trace() - 1.0).abs();
    let min_eig = jacobi_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min);
    (asym, trace, min_eig)
}

fn c9_density(corpus: &[Instance]) -> Criterion {
    let mut c = Criterion::new(9, "Density-matrix structure");
    let caps = Caps::default();
    let (mut asym, mut trace, mut min_eig) = (0.0f64, 0.0f64, f64::INFINITY);
    let mut paths_afl: f64 = 0.0;
    let mut entropy_gap: f64 = 0.0;
    let mut sharp_offdiag: f64 = 0.0;
    let mut sharp_diag: f64 = 0.0;
    let mut sharp_paths: f64 = 0.0;
    let mut eq = [0.0f64; 3];
    for inst in corpus {
        let mu = inst.sys.stationary();
        for n in 1..=3 {
            let refined = refine_afl(&inst.sys, &inst.f, n, caps.word_cap).unwrap();
            let mak = rho_mak(mu, refined.partition(), caps.afl_dim_cap).unwrap();
            let afl = rho_afl(&inst.sys, &inst.f, n, caps.afl_dim_cap).unwrap();
            for rho in [&mak, &afl] {
                let (a, t, e) = density_ok(rho);
                asym = asym.max(a);
                trace = trace.max(t);
                min_eig = min_eig.min(e);
                entropy_gap = entropy_gap.max((von_neumann_entropy(rho) - von_neumann_ref(rho.entries())).abs());
            }
            paths_afl = paths_afl.max(max_abs_diff(afl.entries(), &afl_matrix_by_paths(&inst.sys, &inst.f, n)));
            eq[n - 1] = eq[n - 1].max(max_abs_diff(afl.entries(), mak.entries()));

            let cells = simple_decomposition(&inst.simple).cells;
            let sharp = sharp_partition(inst.sys.n_states(), &cells).unwrap();
            let rho = rho_afl(&inst.sys, &sharp, n, caps.afl_dim_cap).unwrap();
            let m = rho.entries();
            let words = word_distribution_by_paths(&inst.sys, &sharp, n);
            for a in 0..m.nrows() {
                for b in 0..m.ncols() {
                    if a == b {
                        sharp_diag = sharp_diag.max((m[(a, a)] - words[a]).abs());
                    } else {
                        sharp_offdiag = sharp_offdiag.max(m[(a, b)].abs());
                    }
                }
            }
            sharp_paths = sharp_paths.max(max_abs_diff(m, &afl_matrix_by_paths(&inst.sys, &sharp, n)));
        }
    }
    c.check(
        "9a invariants",
        asym <= 1e-12 && trace <= 1e-10 && min_eig >= -1e-10 && paths_afl <= 1e-12 && entropy_gap <= 1e-9,
        format!(
            "max asymmetry {asym:.1e}, max |tr-1| {trace:.1e}, min eigenvalue {min_eig:.2e}, \
             rho_AFL vs path sums {paths_afl:.1e}, S_q vs Jacobi {entropy_gap:.1e}"
        ),
    );
    c.check(
        "9b sharp diagonal",
        sharp_offdiag <= 1e-12 && sharp_diag <= 1e-12 && sharp_paths <= 1e-12,
        format!("max off-diagonal {sharp_offdiag:.1e}, max |diag - word prob| {sharp_diag:.1e}, vs path sums {sharp_paths:.1e}"),
    );
    c.check("9c-N1", eq[0] <= 1e-12, format!("N=1: max |rho_AFL - rho_Mak(refinement)| = {:.2e} (tol 1e-12)", eq[0]));
    c.check(
        "9c-N2",
        eq[1] <= 1e-12,
        format!(
            "N=2: max |rho_AFL - rho_Mak(refinement)| = {:.2e} (tol 1e-12); the entries are \
             mu(sqrt(f_k0 f_l0) Theta(sqrt(f_k1 f_l1))) vs mu(sqrt(f_k0 f_l0) sqrt(Theta f_k1 Theta f_l1)), \
             which agree only when Theta is deterministic",
            eq[1]
        ),
    );

    let dir = fixtures_dir();
    let sys = parse_system(&dir.join("markov3.json")).unwrap();
    let f = parse_partition(&dir.join("unsharp3.json"), &sys).unwrap();
    let refined = refine_afl(&sys, &f, 3, caps.word_cap).unwrap();
    let diff = max_abs_diff(
        rho_afl(&sys, &f, 3, caps.afl_dim_cap).unwrap().entries(),
        rho_mak(sys.stationary(), refined.partition(), caps.afl_dim_cap).unwrap().entries(),
    );
    c.check("9d N=3 differs", diff > 1e-6, format!("markov3/unsharp3, N=3: max difference {diff:.3e} (> 1e-6)"));

    let cycle = parse_system(&dir.join("cycle3.json")).unwrap();
    let g = PartitionOfUnity::from_rows(&[vec![0.2, 0.8], vec![0.5, 0.5], vec![0.9, 0.1]]).unwrap();
    let det = (1..=3)
        .map(|n| {
            let r = refine_afl(&cycle, &g, n, caps.word_cap).unwrap();
            max_abs_diff(
                rho_afl(&cycle, &g, n, caps.afl_dim_cap).unwrap().entries(),
                rho_mak(cycle.stationary(), r.partition(), caps.afl_dim_cap).unwrap().entries(),
            )
        })
        .fold(0.0, f64::max);
    c.check("9e deterministic", det <= 1e-12, format!("cycle3, unsharp F, N<=3: max difference {det:.1e}"));
    c
}

fn random_density<R: Rng>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let rank = rng.random_range(1..=d);
    let a = DMatrix::from_fn(d, rank, |_, _| rng.random::<f64>() - 0.5);
    let m = &a * a.transpose();
    let t = m.trace();
    let m = m / t;
    (&m + m.transpose()) * 0.5
}

fn c10_inequalities() -> Criterion {
    let mut c = Criterion::new(10, "Classical inequality suite");
    let mut rng = ChaCha8Rng::seed_from_u64(INEQUALITY_SEED);
    let (mut lower, mut upper, mut q_lower, mut q_upper) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut mono = f64::NEG_INFINITY;
    let mut holevo = f64::NEG_INFINITY;
    for _ in 0..INEQUALITY_INSTANCES {
        let d = rng.random_range(1..=5);
        let a = rng.random_range(1..=4);
        let lambda = random_simplex(&mut rng, a);
        let s_lambda = shannon_ref(&lambda);

        let parts: Vec<ProbVector> = (0..a).map(|_| ProbVector::new(random_simplex(&mut rng, d)).unwrap()).collect();
        let mix: Vec<f64> = (0..d).map(|i| (0..a).map(|al| lambda[al] * parts[al].get(i)).sum()).collect();
        let mixed = shannon_entropy(&ProbVector::new(mix).unwrap());
        let avg: f64 = (0..a).map(|al| lambda[al] * shannon_entropy(&parts[al])).sum();
        lower = lower.max(avg - mixed);
        upper = upper.max(mixed - avg - s_lambda);

        let rhos: Vec<DensityMatrix> = (0..a).map(|_| DensityMatrix::new(random_density(&mut rng, d)).unwrap()).collect();
        let mut sum = DMatrix::zeros(d, d);
        for (al, r) in rhos.iter().enumerate() {
            sum += r.entries() * lambda[al];
        }
        let rho = DensityMatrix::new((&sum + sum.transpose()) * 0.5).unwrap();
        let sq = von_neumann_entropy(&rho);
        let sq_avg: f64 = (0..a).map(|al| lambda[al] * von_neumann_entropy(&rhos[al])).sum();
        q_lower = q_lower.max(sq_avg - sq);
        q_upper = q_upper.max(sq - sq_avg - s_lambda);

        let diag = |m: &DensityMatrix| {
            let v: Vec<f64> = m.entries().diagonal().iter().map(|&x| x.max(0.0)).collect();
            shannon_ref(&v)
        };
        let diag_avg: f64 = (0..a).map(|al| lambda[al] * diag(&rhos[al])).sum();
        holevo = holevo.max((diag(&rho) - diag_avg) - (sq - sq_avg));

        let j = rng.random_range(1..=5);
        let m_rows: Vec<Vec<f64>> = (0..d).map(|_| random_simplex(&mut rng, j)).collect();
        let m = StochasticMatrix::from_rows(&m_rows).unwrap();
        let p = ProbVector::new(random_simplex(&mut rng, d)).unwrap();
        let q = ProbVector::new(random_simplex(&mut rng, d)).unwrap();
        let before = relative_entropy(&p, &q).unwrap().value();
        let after = relative_entropy(&pushforward(&m, &p).unwrap(), &pushforward(&m, &q).unwrap()).unwrap().value();
        mono = mono.max(after - before);
    }
    c.check(
        "concavity (Shannon)",
        lower <= 1e-9 && upper <= 1e-9,
        format!("max violation: lower {lower:.2e}, upper {upper:.2e}"),
    );
    c.check(
        "concavity (von Neumann)",
        q_lower <= 1e-9 && q_upper <= 1e-9,
        format!("max violation: lower {q_lower:.2e}, upper {q_upper:.2e}"),
    );
    c.check("monotonicity", mono <= 1e-9, format!("max S(Mp|Mq) - S(p|q) = {mono:.2e}"));
    c.check("Holevo-type lemma", holevo <= 1e-9, format!("max diagonal gap - quantum gap = {holevo:.2e}"));
    c
}

fn run_sample(threads: Option<&str>) -> (Vec<u8>, bool) {
    let dir = fixtures_dir();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_entropy-lab"));
    cmd.arg("sample")
        .arg("--system")
        .arg(dir.join("bernoulli_3q.json"))
        .arg("--partition")
        .arg(dir.join("extremal2.json"))
        .args(["--nmax", "2", "--samples", "1000000", "--format", "json"])
        .args(["--seed", &SAMPLE_SEED.to_string()]);
    match threads {
        Some(t) => cmd.env("ENTROPY_LAB_THREADS", t),
        None => cmd.env_remove("ENTROPY_LAB_THREADS"),
    };
    let out = cmd.output().expect("run entropy-lab");
    (out.stdout, out.status.success())
}

fn c11_monte_carlo() -> Criterion {
    let mut c = Criterion::new(11, "Monte Carlo consistency");
    let (first, ok1) = run_sample(None);
    let (second, ok2) = run_sample(None);
    let (single, ok3) = run_sample(Some("1"));
    let report: serde_json::Value = serde_json::from_slice(&first).unwrap_or(serde_json::Value::Null);
    let sample = &report["sample"];
    let expected = [0.5625, 0.1875, 0.1875, 0.0625];
    let words = sample["words"].as_array().cloned().unwrap_or_default();
    let counts: Vec<f64> = words.iter().map(|w| w["count"].as_f64().unwrap_or(f64::NAN)).collect();
    let analytic: Vec<f64> = words.iter().map(|w| w["analytic"].as_f64().unwrap_or(f64::NAN)).collect();
    let total: f64 = counts.iter().sum();
    let tv: f64 = 0.5 * counts.iter().zip(&expected).map(|(n, p)| (n / total - p).abs()).sum::<f64>();
    let bound = 1.5 * (4.0f64 / 1e6).sqrt();
    let analytic_ok = analytic.len() == 4 && analytic.iter().zip(&expected).all(|(a, e)| (a - e).abs() <= 1e-15);
    let reported_tv = sample["tv_distance"].as_f64().unwrap_or(f64::NAN);
    let reported_bound = sample["reference_bound"].as_f64().unwrap_or(f64::NAN);
    c.check(
        "TV below bound",
        ok1 && analytic_ok && total == 1e6 && tv < bound && (tv - reported_tv).abs() <= 1e-15 && (bound - reported_bound).abs() <= 1e-15,
        format!("TV to (0.5625,0.1875,0.1875,0.0625) = {tv:.3e}, reported {reported_tv:.3e}, bound {bound:.3e}"),
    );
    c.check(
        "byte-identical",
        ok2 && ok3 && first == second && first == single,
        format!("{} bytes; rerun identical: {}; one thread identical: {}", first.len(), first == second, first == single),
    );
    c
}

fn main() {
    let corpus = corpus();
    let criteria = vec![
        c1_bernoulli(),
        c2_hudetz(),
        c3_kow(),
        c4_markov(),
        c5_ordering(&corpus),
        c6_sharp_dominance(&corpus),
        c7_cnt_closed_form(),
        c8_witness(),
        c9_density(&corpus),
        c10_inequalities(),
        c11_monte_carlo(),
    ];
    let mut unexpected = Vec::new();
    for cr in &criteria {
        println!("{} {:>2}. {}", if cr.pass() { "PASS" } else { "FAIL" }, cr.number, cr.title);
        for ch in &cr.checks {
            let expected = EXPECTED_FAILURES.contains(&ch.id);
            let tag = match (ch.pass, expected) {
                (true, _) => "pass",
                (false, true) => "FAIL (expected)",
                (false, false) => "FAIL",
            };
            println!("       {tag} [{}] {}", ch.id, ch.detail);
            if !ch.pass && !expected {
                unexpected.push(format!("{}:{}", cr.number, ch.id));
            }
        }
    }
    let passed = criteria.iter().filter(|c| c.pass()).count();
    println!("{passed}/{} criteria pass", criteria.len());
    if !unexpected.is_empty() {
        println!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
