//! Argument parsing and the seven commands.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use entropy_lab::decomp::{MultiDecomposition, DEFAULT_ENUMERATION_CAP};
use entropy_lab::dynent::{
    cnt_search, entropy_sequence, hud_functional, rate_estimate, sup_over_sharp, Caps, EntropyKind,
    EntropySequence, SharpSearch, DEFAULT_AFL_DIM_CAP, EXHAUSTIVE_MAX_STATES,
};
use entropy_lab::dynsys::StochasticSystem;
use entropy_lab::entcore::shannon_entropy;
use entropy_lab::pou::{evolve, PartitionOfUnity, Word, DEFAULT_WORD_CAP};

use crate::doc::{parse_partition, parse_system, DocError};
use crate::report::{
    CntReport, Config, EntryReport, Format, OrderingReport, PartitionSummary, RateReport, Report, SampleReport,
    SequenceReport, SupReport, SystemSummary, Units, WitnessReport, WordReport,
};
use crate::sample::{sample_words, BLOCK_SIZE};

/// Slack allowed in the HUD <= MAK, HUD <= AFL <= KOW check.
pub const ORDERING_TOL: f64 = 1e-9;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_TRUNCATED: i32 = 3;
pub const EXIT_INEQUALITY: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Parse and check the documents, then summarize them.
    Validate,
    /// Entropy sequence and rate estimates for one kind.
    Rate,
    /// All four kinds side by side, with an ordering check.
    Compare,
    /// Heuristic search for the CNT functional's supremum.
    Cnt,
    /// Monte Carlo word frequencies against the exact distribution.
    Sample,
    /// Best sharp partition for one kind.
    Sup,
    /// Every kind for every partition, with rates.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Rate => "rate",
            Command::Compare => "compare",
            Command::Cnt => "cnt",
            Command::Sample => "sample",
            Command::Sup => "sup",
            Command::Report => "report",
        }
    }

    fn default_nmax(self) -> usize {
        match self {
            Command::Cnt | Command::Sample => 2,
            Command::Sup => 6,
            _ => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SupMode {
    /// Exhaustive up to 8 states, extremal partition beyond.
    Auto,
    Exhaustive,
    Extremal,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "entropy-lab", version, about = "Dynamical entropies of measurements on finite stochastic systems")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// System document (JSON).
    #[arg(long)]
    pub system: PathBuf,
    /// Partition document (JSON); repeat for several.
    #[arg(long = "partition")]
    pub partitions: Vec<PathBuf>,
    #[arg(long, default_value = "afl")]
    pub kind: EntropyKind,
    /// Largest depth N (for `cnt` with one partition, the number of times).
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long, default_value = "nats")]
    pub units: Units,
    #[arg(long, default_value = "table")]
    pub format: Format,
    /// Random decompositions tried by `cnt`.
    #[arg(long, default_value_t = 100)]
    pub budget: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    /// Required by `cnt` and `sample`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_WORD_CAP)]
    pub word_cap: usize,
    #[arg(long, default_value_t = DEFAULT_AFL_DIM_CAP)]
    pub afl_dim_cap: usize,
    /// Cap on enumerated maps and map tuples.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub enumeration_cap: usize,
    /// Candidate set for `sup`.
    #[arg(long, value_enum, default_value_t = SupMode::Auto)]
    pub mode: SupMode,
    /// Write the output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure that ends the command before a report exists.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<DocError> for CliError {
    fn from(e: DocError) -> Self {
        Self {
            code: if e.is_validation() { EXIT_VALIDATION } else { EXIT_USAGE },
            message: e.to_string(),
        }
    }
}

impl From<entropy_lab::Error> for CliError {
    fn from(e: entropy_lab::Error) -> Self {
        use entropy_lab::Error as E;
        let code = match e {
            E::CapExceeded { .. } => EXIT_TRUNCATED,
            E::Internal(_) => EXIT_INEQUALITY,
            E::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_VALIDATION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// A finished command: the report plus the exit code it implies.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub code: i32,
    /// Human-readable notes for stderr.
    pub notes: Vec<String>,
}

struct Loaded {
    sys: StochasticSystem,
    partitions: Vec<(String, PartitionOfUnity)>,
}

fn load(args: &Args) -> Result<Loaded, CliError> {
    let sys = parse_system(&args.system)?;
    let partitions = args
        .partitions
        .iter()
        .map(|p| Ok((p.display().to_string(), parse_partition(p, &sys)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Loaded { sys, partitions })
}

fn exactly_one(loaded: &Loaded, command: Command) -> Result<&(String, PartitionOfUnity), CliError> {
    match loaded.partitions.as_slice() {
        [one] => Ok(one),
        other => Err(CliError::usage(format!(
            "{} needs exactly one --partition, got {}",
            command.name(),
            other.len()
        ))),
    }
}

fn config(args: &Args) -> Config {
    Config {
        system: args.system.display().to_string(),
        partitions: args.partitions.iter().map(|p| p.display().to_string()).collect(),
        units: args.units,
        kind: None,
        nmax: None,
        word_cap: args.word_cap,
        afl_dim_cap: args.afl_dim_cap,
        seed: None,
        budget: None,
        samples: None,
        mode: None,
    }
}

fn caps(args: &Args) -> Caps {
    Caps {
        word_cap: args.word_cap,
        afl_dim_cap: args.afl_dim_cap,
        enumeration_cap: args.enumeration_cap,
    }
}

fn system_summary(sys: &StochasticSystem, units: Units) -> SystemSummary {
    SystemSummary {
        states: sys.states().to_vec(),
        stationary: sys.stationary().as_slice().to_vec(),
        deterministic: sys.is_deterministic(),
        stationary_entropy: units.scale(shannon_entropy(sys.stationary())),
    }
}

fn partition_summary(path: &str, f: &PartitionOfUnity) -> PartitionSummary {
    PartitionSummary {
        path: path.to_string(),
        labels: f.labels(),
        sharp: f.is_sharp(),
    }
}

fn nmax(args: &Args) -> Result<usize, CliError> {
    let n = args.nmax.unwrap_or(args.command.default_nmax());
    if n == 0 {
        return Err(CliError::usage("--nmax must be at least 1"));
    }
    Ok(n)
}

fn require_seed(args: &Args) -> Result<u64, CliError> {
    args.seed
        .ok_or_else(|| CliError::usage(format!("{} requires --seed", args.command.name())))
}

/// Runs one command. Documents that fail to load and invalid flags are errors;
/// cap truncation and ordering violations still produce a report.
pub fn run(args: &Args) -> Result<Outcome, CliError> {
    let loaded = load(args)?;
    let mut report = Report::new(args.command.name(), config(args));
    let mut notes = Vec::new();
    let mut code = EXIT_OK;
    match args.command {
        Command::Validate => {
            report.system = Some(system_summary(&loaded.sys, args.units));
            for (path, f) in &loaded.partitions {
                report.partitions.push(partition_summary(path, f));
            }
        }
        Command::Rate => {
            let (path, f) = exactly_one(&loaded, args.command)?;
            let n = nmax(args)?;
            report.config.kind = Some(args.kind.as_str().into());
            report.config.nmax = Some(n);
            let seq = entropy_sequence(&loaded.sys, f, args.kind, n, &caps(args))?;
            push_sequence(&mut report, &mut notes, &seq, path, args.units);
        }
        Command::Compare | Command::Report => {
            if args.command == Command::Compare {
                exactly_one(&loaded, args.command)?;
            } else if loaded.partitions.is_empty() {
                return Err(CliError::usage("report needs at least one --partition"));
            }
            let n = nmax(args)?;
            report.config.nmax = Some(n);
            if args.command == Command::Report {
                report.system = Some(system_summary(&loaded.sys, args.units));
            }
            let mut violations = Vec::new();
            for (path, f) in &loaded.partitions {
                report.partitions.push(partition_summary(path, f));
                let seqs = EntropyKind::ALL
                    .iter()
                    .map(|&kind| entropy_sequence(&loaded.sys, f, kind, n, &caps(args)))
                    .collect::<Result<Vec<_>, _>>()?;
                violations.extend(ordering_violations(&seqs, path));
                for seq in &seqs {
                    push_sequence(&mut report, &mut notes, seq, path, args.units);
                }
            }
            if !violations.is_empty() {
                notes.push(format!("ordering violated in {} place(s)", violations.len()));
                code = EXIT_INEQUALITY;
            }
            report.ordering = Some(OrderingReport {
                holds: violations.is_empty(),
                tolerance: ORDERING_TOL,
                violations,
            });
        }
        Command::Cnt => return cmd_cnt(args, &loaded, report),
        Command::Sample => {
            let (_, f) = exactly_one(&loaded, args.command)?;
            let seed = require_seed(args)?;
            let depth = nmax(args)?;
            report.config.seed = Some(seed);
            report.config.nmax = Some(depth);
            report.config.samples = Some(args.samples);
            let out = sample_words(&loaded.sys, f, depth, args.samples, seed, args.word_cap)?;
            let empirical = out.empirical();
            let words = (0..out.counts.len())
                .map(|code| {
                    let w = Word::decode(code, f.n_outcomes(), depth).expect("code below K^N");
                    WordReport {
                        word: w.symbols().iter().map(|&k| f.label(k).into_owned()).collect(),
                        count: out.counts[code],
                        empirical: empirical[code],
                        analytic: out.analytic[code],
                    }
                })
                .collect();
            let below = out.tv_distance < out.reference_bound;
            if !below {
                notes.push("TV distance is above the reference bound".into());
            }
            report.sample = Some(SampleReport {
                depth,
                samples: out.samples,
                block_size: BLOCK_SIZE,
                distinct_words: out.distinct_words(),
                tv_distance: out.tv_distance,
                reference_bound: out.reference_bound,
                below_bound: below,
                words,
            });
        }
        Command::Sup => {
            let n = nmax(args)?;
            let states = loaded.sys.n_states();
            let mode = match args.mode {
                SupMode::Exhaustive => SharpSearch::Exhaustive,
                SupMode::Extremal => SharpSearch::ExtremalOnly,
                SupMode::Auto if states <= EXHAUSTIVE_MAX_STATES => SharpSearch::Exhaustive,
                SupMode::Auto => SharpSearch::ExtremalOnly,
            };
            let mode_name = if mode == SharpSearch::Exhaustive { "exhaustive" } else { "extremal" };
            report.config.kind = Some(args.kind.as_str().into());
            report.config.nmax = Some(n);
            report.config.mode = Some(mode_name.into());
            let sup = sup_over_sharp(&loaded.sys, args.kind, n, mode, &caps(args))?;
            let label = |x: usize| loaded.sys.states()[x].clone();
            let cells: Vec<Vec<String>> = sup.cells.iter().map(|c| c.iter().map(|&x| label(x)).collect()).collect();
            let name = cells.iter().map(|c| format!("{{{}}}", c.join(","))).collect::<Vec<_>>().join("");
            push_sequence(&mut report, &mut notes, &sup.sequence, &name, args.units);
            report.rates.clear();
            if sup.truncated_candidates > 0 {
                notes.push(format!("{} candidate sequence(s) cut short by caps", sup.truncated_candidates));
            }
            report.sup = Some(SupReport {
                mode: mode_name.into(),
                candidates: sup.candidates,
                truncated_candidates: sup.truncated_candidates,
                cells,
                rate: RateReport::new(args.kind.as_str(), &name, &sup.rate, args.units),
            });
        }
    }
    if code == EXIT_OK && report.is_truncated() {
        code = EXIT_TRUNCATED;
    }
    Ok(Outcome { report, code, notes })
}

fn push_sequence(report: &mut Report, notes: &mut Vec<String>, seq: &EntropySequence, path: &str, units: Units) {
    report.sequences.push(SequenceReport::new(seq, path, units));
    if let Some(t) = &seq.truncation {
        notes.push(format!("{} on {path} truncated at N={}: {}", seq.kind, t.depth, t.reason));
    }
    if let Ok(rate) = rate_estimate(seq) {
        report.rates.push(RateReport::new(seq.kind.as_str(), path, &rate, units));
    }
}

/// Rows where HUD <= MAK, HUD <= AFL or AFL <= KOW fails by more than
/// [`ORDERING_TOL`]; `seqs` is in [`EntropyKind::ALL`] order.
fn ordering_violations(seqs: &[EntropySequence], path: &str) -> Vec<String> {
    let [hud, mak, afl, kow] = seqs else {
        unreachable!("one sequence per kind")
    };
    let mut out = Vec::new();
    let mut check = |n: usize, lo: &EntropySequence, hi: &EntropySequence| {
        if let (Some(a), Some(b)) = (lo.values.get(n), hi.values.get(n)) {
            if *a > b + ORDERING_TOL {
                out.push(format!("{path} N={}: {} {a} > {} {b}", n + 1, lo.kind, hi.kind));
            }
        }
    };
    for n in 0..hud.values.len().max(kow.values.len()) {
        check(n, hud, mak);
        check(n, hud, afl);
        check(n, afl, kow);
    }
    out
}

fn witness(source: &str, value: f64, d: &MultiDecomposition, units: Units) -> WitnessReport {
    WitnessReport {
        source: source.into(),
        value: units.scale(value),
        shape: d.shape().to_vec(),
        entries: d
            .entries()
            .iter()
            .map(|e| EntryReport {
                index: e.index.clone(),
                weight: e.weight,
                component: e.component.as_slice().to_vec(),
            })
            .collect(),
    }
}

fn cmd_cnt(args: &Args, loaded: &Loaded, mut report: Report) -> Result<Outcome, CliError> {
    let seed = require_seed(args)?;
    report.config.seed = Some(seed);
    report.config.budget = Some(args.budget);
    let (names, list): (Vec<String>, Vec<PartitionOfUnity>) = match loaded.partitions.as_slice() {
        [] => return Err(CliError::usage("cnt needs at least one --partition")),
        [(path, f)] => {
            // one partition means the list F, Theta(F), ..., Theta^{N-1}(F)
            let times = nmax(args)?;
            report.config.nmax = Some(times);
            let mut list = vec![f.clone()];
            for _ in 1..times {
                let next = evolve(&loaded.sys, list.last().expect("nonempty"))?;
                list.push(next);
            }
            let names = (0..times)
                .map(|m| if m == 0 { path.clone() } else { format!("Theta^{m}({path})") })
                .collect();
            (names, list)
        }
        many => {
            if args.nmax.is_some_and(|n| n != many.len()) {
                return Err(CliError::usage("--nmax must match the number of partitions given"));
            }
            many.iter().map(|(p, f)| (p.clone(), f.clone())).unzip()
        }
    };
    let res = cnt_search(&loaded.sys, &list, args.budget, seed, &caps(args))?;
    let closed_form = if list.len() == 1 {
        Some(args.units.scale(hud_functional(loaded.sys.stationary(), &list[0])?))
    } else {
        None
    };
    let mut notes = Vec::new();
    let mut code = EXIT_OK;
    if res.best < 0.0 {
        notes.push(format!("search returned a negative supremum {}", res.best));
        code = EXIT_INEQUALITY;
    } else if res.identifications_truncated {
        notes.push(format!(
            "identification decompositions truncated at {}",
            res.identifications_evaluated
        ));
        code = EXIT_TRUNCATED;
    }
    report.cnt = Some(CntReport {
        arity: list.len(),
        partition_list: names,
        best: args.units.scale(res.best),
        witness: witness(res.witness_source, res.best, &res.witness, args.units),
        identifications_evaluated: res.identifications_evaluated,
        identifications_truncated: res.identifications_truncated,
        negative_identifications: res.negative_identifications,
        most_negative: res
            .most_negative
            .as_ref()
            .map(|(v, d)| witness("identification", *v, d, args.units)),
        random_evaluated: res.random_evaluated,
        closed_form,
    });
    Ok(Outcome { report, code, notes })
}
